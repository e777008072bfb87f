//! `cqg` — evaluations and experiments on compact quantum groups.
//!
//! Subcommands:
//!   haar          evaluate the Haar state on a word
//!   moments       character moments as CSV
//!   converge      alternating convolution powers against the Haar state
//!   usplit-check  free unitary Haar vs. the torus*orthogonal splitting
//!   defect        factorization-net trace errors and defects
//!
//! Exit codes: 0 success/converged, 1 experiment ran but threshold unmet,
//! 2 usage error, 3 resource-cap error. JSON reports carry `"schema": 1`
//! and render every number as a decimal string, plus exact `num`/`den`
//! fields where the value is rational.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value as Json};

use cqg_core::caps::Caps;
use cqg_core::error::Error;
use cqg_core::experiments::{convolved_net, pair_by_name, usplit_check, word_corpus};
use cqg_core::haar::HaarOracle;
use cqg_core::state::{converge_to_haar, StateOracle};
use cqg_core::ucp::{
    classical_sampling_ucp, defect_report, factorization_report, full_permutation_average, UcpMap,
};
use cqg_core::value::Value;
use cqg_core::{GroupSpec, Word, WordSum};

#[derive(Parser)]
#[command(name = "cqg", version, about = "Compact-quantum-group experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Output file (stdout when omitted); written atomically.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the transfer/coproduct entry caps.
    #[arg(long)]
    cap_entries: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the Haar state on a word, printing exact and decimal forms.
    Haar {
        /// Group name: o:<n>, o+:<n>, u:<n>, u+:<n>, s:<m>, s+:<m>, t,
        /// free(...).
        #[arg(long)]
        group: String,
        /// Word: letters "i,j" or "i,j*" separated by ';' (1-based).
        #[arg(long)]
        word: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Character moments k = 0..k_max as CSV rows `k,value`.
    Moments {
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 8)]
        k_max: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Iterate (τ₁ ⋆ τ₂)^⋆k against the Haar state; JSON report.
    Converge {
        #[arg(long)]
        group: String,
        /// Pair name: classical+fixlast, fixlast2, perm+blocksplit, haar.
        #[arg(long)]
        pair: String,
        #[arg(long, default_value_t = 4)]
        degree: usize,
        /// Star pattern, one of . (plain) or * per letter; default all plain.
        #[arg(long)]
        pattern: Option<String>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Compare the free unitary Haar state against the free-product
    /// splitting on an exhaustive or stride-sampled word set.
    UsplitCheck {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        max_degree: usize,
        /// Sample size when the full set is larger.
        #[arg(long, default_value_t = 500)]
        limit: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run a factorization net against a target trace; JSON report.
    Defect {
        #[arg(long)]
        group: String,
        /// Net spec: full-average | sample:<k1>,<k2>,... |
        /// convolved:<k1>,<k2>,...
        #[arg(long)]
        net: String,
        /// Target trace: haar | tau1*tau2 (convolved nets only).
        #[arg(long, default_value = "haar")]
        trace: String,
        /// Words file: one word per line, '#' comments. Default: a
        /// deterministic 20-word corpus.
        #[arg(long)]
        words: Option<PathBuf>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Resource(_) => ExitCode::from(3),
                Error::Argument(_) | Error::Unsupported(_) => ExitCode::from(2),
            }
        }
    }
}

fn caps_with(common: &CommonOpts) -> Caps {
    let mut caps = Caps::default();
    if let Some(entries) = common.cap_entries {
        caps.max_transfer_entries = entries;
        caps.max_coproduct_pairs = entries;
        caps.max_ucp_entries = entries;
    }
    caps
}

fn json_value(v: &Value) -> Json {
    let mut obj = Map::new();
    obj.insert("dec".into(), Json::String(format!("{}", v.to_f64_real())));
    if let Some(r) = v.as_exact() {
        obj.insert("num".into(), Json::String(r.numer().to_string()));
        obj.insert("den".into(), Json::String(r.denom().to_string()));
    }
    Json::Object(obj)
}

fn json_f64(x: f64) -> Json {
    Json::String(format!("{x}"))
}

/// Single plain words render in the word grammar so reports round-trip
/// through a words file; genuine sums keep the coefficient form.
fn wordsum_display(ws: &WordSum) -> String {
    let mut terms = ws.terms();
    match (terms.next(), terms.next()) {
        (Some((word, coeff)), None) if *coeff == Value::one() => word.to_string(),
        _ => ws.to_string(),
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), Error> {
    match out {
        None => {
            println!("{content}");
            Ok(())
        }
        Some(path) => write_atomic(path, content),
    }
}

fn write_atomic(path: &Path, content: &str) -> Result<(), Error> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = match dir {
        Some(d) => d.join(format!(
            ".{}.tmp",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
        )),
        None => PathBuf::from(format!(
            ".{}.tmp",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
        )),
    };
    std::fs::write(&tmp, content)
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| Error::argument(format!("cannot write {}: {e}", path.display())))
}

fn parse_pattern(pattern: &Option<String>, degree: usize) -> Result<Vec<bool>, Error> {
    match pattern {
        None => Ok(vec![false; degree]),
        Some(p) => {
            let flags: Vec<bool> = p
                .chars()
                .map(|ch| match ch {
                    '.' => Ok(false),
                    '*' => Ok(true),
                    _ => Err(Error::argument(format!("bad pattern character {ch:?}"))),
                })
                .collect::<Result<_, _>>()?;
            if flags.len() != degree {
                return Err(Error::argument(format!(
                    "pattern length {} != degree {degree}",
                    flags.len()
                )));
            }
            Ok(flags)
        }
    }
}

fn read_words_file(path: &Path, group: &GroupSpec) -> Result<Vec<WordSum>, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::argument(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let word = Word::parse(line, group)?;
        out.push(WordSum::from_word(word, Value::one()));
    }
    if out.is_empty() {
        return Err(Error::argument(format!(
            "no words found in {}",
            path.display()
        )));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Haar {
            group,
            word,
            common,
        } => {
            let caps = caps_with(&common);
            let group = GroupSpec::parse(&group)?;
            let w = Word::parse(&word, &group)?;
            let state = StateOracle::haar(&group, &caps)?;
            let v = state.eval(&w)?;
            let line = match v.as_exact() {
                Some(r) if !r.is_integer() => format!("{v} = {}", v.to_f64_real()),
                _ => format!("{v}"),
            };
            emit(&common.out, &line)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Moments {
            group,
            k_max,
            common,
        } => {
            let caps = caps_with(&common);
            let group = GroupSpec::parse(&group)?;
            let mut rows = vec!["k,value".to_string()];
            if group.is_free_product() {
                return Err(Error::unsupported(
                    "character moments are reported for single-factor groups",
                ));
            }
            let oracle = HaarOracle::new(group, &caps)?;
            for k in 0..=k_max {
                let v = Value::Exact(oracle.char_moment(k)?);
                rows.push(format!("{k},{v}"));
            }
            emit(&common.out, &rows.join("\n"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Converge {
            group,
            pair,
            degree,
            pattern,
            tol,
            max_iter,
            common,
        } => {
            let caps = caps_with(&common);
            let group = GroupSpec::parse(&group)?;
            let flags = parse_pattern(&pattern, degree)?;
            let started = Instant::now();
            let cfg = pair_by_name(&pair, &group, &caps)?;
            let report = converge_to_haar(
                &cfg.tau1, &cfg.tau2, &cfg.haar, degree, &flags, tol, max_iter, true, &caps,
            )?;
            let doc = json!({
                "schema": 1,
                "command": "converge",
                "config": {
                    "group": group.name(),
                    "pair": pair,
                    "degree": degree,
                    "pattern": flags.iter().map(|&s| if s { '*' } else { '.' }).collect::<String>(),
                    "tol": json_f64(tol),
                    "max_iter": max_iter,
                },
                "iterations": report.iterations,
                "converged": report.converged,
                "residuals": report.residuals.iter().map(|&r| json_f64(r)).collect::<Vec<_>>(),
                "residuals_monotone": report.residuals_monotone,
                "sub_leading_modulus": report.sub_leading_modulus.map(json_f64),
                "elapsed_seconds": json_f64(started.elapsed().as_secs_f64()),
            });
            emit(&common.out, &serde_json::to_string_pretty(&doc).unwrap())?;
            Ok(if report.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::UsplitCheck {
            n,
            max_degree,
            limit,
            common,
        } => {
            let caps = caps_with(&common);
            let started = Instant::now();
            let report = usplit_check(n, max_degree, limit, &caps)?;
            let doc = json!({
                "schema": 1,
                "command": "usplit-check",
                "config": { "n": n, "max_degree": max_degree, "limit": limit },
                "words_checked": report.words_checked,
                "sampled": report.sampled,
                "max_discrepancy": json_f64(report.max_discrepancy),
                "all_exact": report.all_exact,
                "elapsed_seconds": json_f64(started.elapsed().as_secs_f64()),
            });
            emit(&common.out, &serde_json::to_string_pretty(&doc).unwrap())?;
            Ok(if report.max_discrepancy <= 1e-12 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Defect {
            group,
            net,
            trace,
            words,
            seed,
            common,
        } => {
            let caps = caps_with(&common);
            let group = GroupSpec::parse(&group)?;
            let started = Instant::now();

            let (net_maps, net_target): (Vec<UcpMap>, Option<StateOracle>) =
                build_net(&net, &group, seed, &caps)?;
            let target = match trace.as_str() {
                "haar" => StateOracle::haar(&group, &caps)?,
                "tau1*tau2" => net_target.ok_or_else(|| {
                    Error::argument("trace tau1*tau2 is defined for convolved nets only")
                })?,
                other => {
                    return Err(Error::argument(format!(
                        "unknown trace spec {other:?} (expected haar or tau1*tau2)"
                    )))
                }
            };
            let corpus = match &words {
                Some(path) => read_words_file(path, &group)?,
                None => word_corpus(&group, 20, 2, seed)?,
            };

            let report = factorization_report(&net_maps, &target, &corpus)?;
            let target_values = corpus
                .iter()
                .map(|w| Ok(json_value(&target.eval_sum(w)?)))
                .collect::<Result<Vec<_>, Error>>()?;
            let mut stages = Vec::new();
            for (i, theta) in net_maps.iter().enumerate() {
                let per_map = defect_report(theta, &corpus)?;
                stages.push(json!({
                    "k": theta.k(),
                    "trace_error": json_f64(report.trace_errors[i]),
                    "max_defect": json_f64(report.max_defects[i]),
                    "gram_min_eigenvalue": json_f64(per_map.gram_min_eigenvalue),
                    "cauchy_schwarz_ok": per_map.cauchy_schwarz_ok,
                    "defects": per_map.defects.iter().map(|&d| json_f64(d)).collect::<Vec<_>>(),
                    "trace_values": per_map
                        .trace_values
                        .iter()
                        .map(|&c| Json::String(Value::Approx(c).to_string()))
                        .collect::<Vec<_>>(),
                }));
            }
            let doc = json!({
                "schema": 1,
                "command": "defect",
                "config": {
                    "group": group.name(),
                    "net": net,
                    "trace": trace,
                    "seed": seed,
                    "words": corpus.iter().map(wordsum_display).collect::<Vec<_>>(),
                },
                "target_values": target_values,
                "stages": stages,
                "trace_errors_decreasing": report.trace_error_decreasing,
                "defects_decreasing": report.defects_decreasing,
                "elapsed_seconds": json_f64(started.elapsed().as_secs_f64()),
            });
            emit(&common.out, &serde_json::to_string_pretty(&doc).unwrap())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Net grammar: `full-average` (classical S_m), `sample:<k,...>` (classical
/// families), `convolved:<k,...>` (free orthogonal; also yields the
/// τ₁ ⋆ τ₂ target).
fn build_net(
    spec: &str,
    group: &GroupSpec,
    seed: u64,
    caps: &Caps,
) -> Result<(Vec<UcpMap>, Option<StateOracle>), Error> {
    if spec == "full-average" {
        let theta = full_permutation_average(group, caps)?;
        return Ok((vec![theta], None));
    }
    if let Some(sizes) = spec.strip_prefix("sample:") {
        let sizes = parse_sizes(sizes)?;
        let net = sizes
            .iter()
            .map(|&k| classical_sampling_ucp(group, k, seed, caps))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok((net, None));
    }
    if let Some(sizes) = spec.strip_prefix("convolved:") {
        if group.family() != cqg_core::Family::OPlus {
            return Err(Error::argument(
                "convolved nets are configured for o+:<n> groups",
            ));
        }
        let sizes = parse_sizes(sizes)?;
        let (stages, target, _) = convolved_net(group.dim(), &sizes, seed, caps)?;
        return Ok((
            stages.into_iter().map(|s| s.combined).collect(),
            Some(target),
        ));
    }
    Err(Error::argument(format!(
        "unknown net spec {spec:?} (expected full-average, sample:<k,...> or convolved:<k,...>)"
    )))
}

fn parse_sizes(text: &str) -> Result<Vec<usize>, Error> {
    let sizes: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| Error::argument(format!("bad size list {text:?}")))?;
    if sizes.is_empty() {
        return Err(Error::argument("empty size list"));
    }
    Ok(sizes)
}
