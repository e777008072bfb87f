//! Canned experiment configurations: the convergence pairs, the unitary
//! splitting cross-check, and the convolved factorization nets. The CLI and
//! the acceptance suite both run these.

use num_complex::Complex64;

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::group::{
    morphism_abelianize, morphism_block_split, morphism_fix_vector, morphism_to_perm,
    morphism_unitary_split, rational_givens, Family, GroupSpec, Rotation,
};
use crate::ratmat::big_rat;
use crate::state::{pullback, StateOracle};
use crate::ucp::{classical_sampling_ucp, convolve_ucp, pullback_ucp, UcpMap};
use crate::value::Value;
use crate::word::{Letter, Word, WordSum};

/// τ₁, τ₂ and the Haar target for a convergence run.
pub struct ConvergencePair {
    pub group: GroupSpec,
    pub tau1: StateOracle,
    pub tau2: StateOracle,
    pub haar: StateOracle,
}

/// Classical pullback against the fixed-vector quotient.
pub fn pair_classical_fixlast(n: usize, caps: &Caps) -> Result<ConvergencePair> {
    let group = GroupSpec::make(Family::OPlus, n)?;
    let ab = morphism_abelianize(n)?;
    let tau1 = pullback(&StateOracle::haar(&ab.target, caps)?, &ab, caps)?;
    let fix = morphism_fix_vector(n, Rotation::Identity)?;
    let tau2 = pullback(&StateOracle::haar(&fix.target, caps)?, &fix, caps)?;
    let haar = StateOracle::haar(&group, caps)?;
    Ok(ConvergencePair {
        group,
        tau1,
        tau2,
        haar,
    })
}

/// Two fixed-vector quotients with linearly independent fixed vectors:
/// the identity rotation and an exact 3-4-5 Givens rotation mixing the last
/// coordinate into the first.
pub fn pair_fixlast_two_rotations(n: usize, caps: &Caps) -> Result<ConvergencePair> {
    let group = GroupSpec::make(Family::OPlus, n)?;
    let fix1 = morphism_fix_vector(n, Rotation::Identity)?;
    let tau1 = pullback(&StateOracle::haar(&fix1.target, caps)?, &fix1, caps)?;
    let givens = rational_givens(n, 0, n - 1, big_rat(3, 5), big_rat(4, 5))?;
    let fix2 = morphism_fix_vector(n, Rotation::Exact(givens))?;
    let tau2 = pullback(&StateOracle::haar(&fix2.target, caps)?, &fix2, caps)?;
    let haar = StateOracle::haar(&group, caps)?;
    Ok(ConvergencePair {
        group,
        tau1,
        tau2,
        haar,
    })
}

/// Permutation pullback against the block-split free product (even n).
pub fn pair_perm_blocksplit(n: usize, caps: &Caps) -> Result<ConvergencePair> {
    if n % 2 != 0 {
        return Err(Error::argument("block-split pair needs even dimension"));
    }
    let group = GroupSpec::make(Family::OPlus, n)?;
    let perm = morphism_to_perm(n)?;
    let tau1 = pullback(&StateOracle::haar(&perm.target, caps)?, &perm, caps)?;
    let split = morphism_block_split(n / 2)?;
    let tau2 = pullback(&StateOracle::haar(&split.target, caps)?, &split, caps)?;
    let haar = StateOracle::haar(&group, caps)?;
    Ok(ConvergencePair {
        group,
        tau1,
        tau2,
        haar,
    })
}

/// Trivial configuration: both factors already Haar.
pub fn pair_haar(group: &GroupSpec, caps: &Caps) -> Result<ConvergencePair> {
    let haar = StateOracle::haar(group, caps)?;
    Ok(ConvergencePair {
        group: group.clone(),
        tau1: haar.clone(),
        tau2: haar.clone(),
        haar,
    })
}

pub fn pair_by_name(name: &str, group: &GroupSpec, caps: &Caps) -> Result<ConvergencePair> {
    if name == "haar" {
        return pair_haar(group, caps);
    }
    if group.family() != Family::OPlus {
        return Err(Error::argument(format!(
            "pair {name} is configured for o+:<n>, got {group}"
        )));
    }
    let n = group.dim();
    match name {
        "classical+fixlast" => pair_classical_fixlast(n, caps),
        "fixlast2" => pair_fixlast_two_rotations(n, caps),
        "perm+blocksplit" => pair_perm_blocksplit(n, caps),
        _ => Err(Error::argument(format!("unknown pair name: {name}"))),
    }
}

/// Comparison of the free unitary Haar state against the free-product state
/// pulled back through the unitary splitting.
#[derive(Clone, Debug)]
pub struct UsplitReport {
    pub dimension: usize,
    pub max_degree: usize,
    pub words_checked: usize,
    pub sampled: bool,
    pub max_discrepancy: f64,
    pub all_exact: bool,
}

/// Checks h(w) against the pullback on every word of degree <= max_degree,
/// or a deterministic stride sample of `limit` words when the full set is
/// larger than that.
pub fn usplit_check(
    n: usize,
    max_degree: usize,
    limit: usize,
    caps: &Caps,
) -> Result<UsplitReport> {
    let u = GroupSpec::make(Family::UPlus, n)?;
    let direct = StateOracle::haar(&u, caps)?;
    let split = morphism_unitary_split(n)?;
    let tau = pullback(&StateOracle::haar(&split.target, caps)?, &split, caps)?;

    // Letters in a fixed order: (i, j, star) lexicographic.
    let mut alphabet = Vec::with_capacity(2 * n * n);
    for i in 1..=n {
        for j in 1..=n {
            for starred in [false, true] {
                alphabet.push(Letter::new(i, j, starred));
            }
        }
    }
    let l = alphabet.len();
    let mut degree_offsets = Vec::new();
    let mut total: usize = 0;
    for d in 0..=max_degree {
        degree_offsets.push(total);
        total = total.saturating_add(l.pow(d as u32));
    }
    let word_at = |index: usize| -> Word {
        let mut d = max_degree;
        while degree_offsets[d] > index {
            d -= 1;
        }
        let mut k = index - degree_offsets[d];
        let mut letters = Vec::with_capacity(d);
        for _ in 0..d {
            letters.push(alphabet[k % l]);
            k /= l;
        }
        Word::new(u.clone(), letters).expect("alphabet letters are valid")
    };

    let indices: Vec<usize> = if total <= limit {
        (0..total).collect()
    } else {
        let stride = total / limit;
        (0..limit).map(|k| k * stride).collect()
    };

    let mut max_discrepancy = 0.0f64;
    let mut all_exact = true;
    for &idx in &indices {
        let w = word_at(idx);
        let lhs = direct.eval(&w)?;
        let rhs = tau.eval(&w)?;
        let diff = lhs.clone() - rhs.clone();
        all_exact &= diff.is_exact();
        max_discrepancy = max_discrepancy.max(diff.abs_f64());
    }
    Ok(UsplitReport {
        dimension: n,
        max_degree,
        words_checked: indices.len(),
        sampled: total > limit,
        max_discrepancy,
        all_exact,
    })
}

/// One stage of a convolved factorization net, keeping the component maps
/// around so their (vanishing) defects can be reported separately.
pub struct ConvolvedNetStage {
    pub size: usize,
    pub left: UcpMap,
    pub right: UcpMap,
    pub combined: UcpMap,
}

/// Convolved factorization net: stage i convolves a classical-O_n sampling
/// map (pulled back along abelianization) with a classical-O_{n-1} sampling
/// map (pulled back along the fixed-vector quotient and abelianization).
/// Returns the net together with the limit trace τ₁ ⋆ τ₂ it approximates.
pub fn convolved_net(
    n: usize,
    sizes: &[usize],
    seed: u64,
    caps: &Caps,
) -> Result<(Vec<ConvolvedNetStage>, StateOracle, GroupSpec)> {
    let group = GroupSpec::make(Family::OPlus, n)?;
    let ab = morphism_abelianize(n)?;
    let fix = morphism_fix_vector(n, Rotation::Identity)?;
    let ab_small = morphism_abelianize(n - 1)?;
    let fix_then_ab = fix.then(&ab_small, caps)?;

    let mut net = Vec::with_capacity(sizes.len());
    for (stage, &size) in sizes.iter().enumerate() {
        let sample_big = classical_sampling_ucp(&ab.target, size, seed + 2 * stage as u64, caps)?;
        let left = pullback_ucp(&sample_big, &ab, caps)?;
        let sample_small =
            classical_sampling_ucp(&fix_then_ab.target, size, seed + 2 * stage as u64 + 1, caps)?;
        let right = pullback_ucp(&sample_small, &fix_then_ab, caps)?;
        let combined = convolve_ucp(&left, &right, caps)?;
        net.push(ConvolvedNetStage {
            size,
            left,
            right,
            combined,
        });
    }

    let tau1 = pullback(&StateOracle::haar(&ab.target, caps)?, &ab, caps)?;
    let tau2 = pullback(
        &StateOracle::haar(&fix_then_ab.target, caps)?,
        &fix_then_ab,
        caps,
    )?;
    let target = crate::state::convolve(&tau1, &tau2, caps)?;
    Ok((net, target, group))
}

/// Deterministic word corpus: `count` words of degree 1..=max_degree with
/// letters driven by a splitmix-style generator.
pub fn word_corpus(
    group: &GroupSpec,
    count: usize,
    max_degree: usize,
    seed: u64,
) -> Result<Vec<WordSum>> {
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut next = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        (z ^ (z >> 31)) as usize
    };
    let n = group.dim();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let d = 1 + next() % max_degree;
        let mut letters = Vec::with_capacity(d);
        for _ in 0..d {
            let row = 1 + next() % n;
            let range = group.column_range(row)?;
            let span = range.end() - range.start() + 1;
            let col = range.start() + next() % span;
            let starred = next() % 2 == 0;
            letters.push(Letter::new(row, col, starred));
        }
        out.push(WordSum::from_word(Word::new(group.clone(), letters)?, Value::one()));
    }
    Ok(out)
}

/// A small supply of self-adjoint unitaries for flip-family representations.
pub fn reflection_unitary(k: usize, axis: usize) -> nalgebra::DMatrix<Complex64> {
    nalgebra::DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            Complex64::new(if r == axis % k { -1.0 } else { 1.0 }, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usplit_small_full_enumeration_is_exact() {
        let caps = Caps::default();
        let report = usplit_check(2, 2, 10_000, &caps).unwrap();
        assert!(!report.sampled);
        // 1 + 8 + 64 words.
        assert_eq!(report.words_checked, 73);
        assert!(report.all_exact);
        assert_eq!(report.max_discrepancy, 0.0);
    }

    #[test]
    fn usplit_sampling_is_deterministic() {
        let caps = Caps::default();
        let a = usplit_check(3, 3, 40, &caps).unwrap();
        let b = usplit_check(3, 3, 40, &caps).unwrap();
        assert!(a.sampled);
        assert_eq!(a.words_checked, 40);
        assert_eq!(a.max_discrepancy, b.max_discrepancy);
        assert_eq!(a.max_discrepancy, 0.0);
    }

    #[test]
    fn pair_names_resolve() {
        let caps = Caps::default();
        let g = GroupSpec::parse("o+:4").unwrap();
        for name in ["classical+fixlast", "fixlast2", "perm+blocksplit", "haar"] {
            let pair = pair_by_name(name, &g, &caps).unwrap();
            assert_eq!(pair.group, g, "{name}");
        }
        assert!(pair_by_name("nope", &g, &caps).is_err());
        assert!(pair_by_name("perm+blocksplit", &GroupSpec::parse("o+:3").unwrap(), &caps).is_err());
    }

    #[test]
    fn two_rotation_pair_converges_at_degree_four() {
        // Two fixed-vector quotients with independent fixed vectors drive
        // the alternating powers to the Haar projection.
        let caps = Caps::default();
        let pair = pair_fixlast_two_rotations(4, &caps).unwrap();
        let report = crate::state::converge_to_haar(
            &pair.tau1,
            &pair.tau2,
            &pair.haar,
            4,
            &[false; 4],
            1e-6,
            500,
            true,
            &caps,
        )
        .unwrap();
        assert!(report.converged, "residuals {:?}", report.residuals);
        assert!(report.sub_leading_modulus.unwrap() < 1.0 - 1e-3);
        assert!(report.residuals_monotone);
    }

    #[test]
    fn word_corpus_is_deterministic_and_valid() {
        let g = GroupSpec::parse("o+:4").unwrap();
        let a = word_corpus(&g, 20, 3, 9).unwrap();
        let b = word_corpus(&g, 20, 3, 9).unwrap();
        assert_eq!(a.len(), 20);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_string(), y.to_string());
        }
    }
}
