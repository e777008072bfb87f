//! Linear functionals on the word algebra and their dynamics: convolution,
//! convolution powers through transfer matrices, pullbacks along quotient
//! morphisms, free-product states, and invariance/convergence experiments.
//!
//! The engineering core is the transfer-matrix representation: the matrix of
//! a state on degree-d matrix coefficients turns convolution into matrix
//! multiplication, so k-fold convolution powers cost one matrix product per
//! step instead of an n^(d(k-1))-term coproduct expansion. Matrices stay in
//! exact rationals while small and switch to binary64 above a configurable
//! size.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::group::{GroupSpec, Morphism};
use crate::haar::HaarOracle;
use crate::ratmat::RationalMatrix;
use crate::value::{rational_to_f64, Value};
use crate::word::{Letter, Word};

type EvalFn = dyn Fn(&Word) -> Result<Value> + Send + Sync;

/// A unital linear functional evaluated on words. Values are exact rationals
/// when the whole evaluation path is exact, floats otherwise.
#[derive(Clone)]
pub struct StateOracle {
    label: String,
    group: GroupSpec,
    eval_fn: Arc<EvalFn>,
}

impl StateOracle {
    pub fn from_fn(
        label: impl Into<String>,
        group: GroupSpec,
        f: impl Fn(&Word) -> Result<Value> + Send + Sync + 'static,
    ) -> Self {
        StateOracle {
            label: label.into(),
            group,
            eval_fn: Arc::new(f),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn eval(&self, w: &Word) -> Result<Value> {
        if *w.group() != self.group {
            return Err(Error::argument(format!(
                "word on {} evaluated against state on {}",
                w.group(),
                self.group
            )));
        }
        (self.eval_fn)(w)
    }

    /// Linear extension to word sums.
    pub fn eval_sum(&self, ws: &crate::word::WordSum) -> Result<Value> {
        let mut total = Value::zero();
        for (word, coeff) in ws.terms() {
            total = total + self.eval(&word)? * coeff.clone();
        }
        Ok(total)
    }

    /// Wraps the oracle with an idempotent memo cache.
    pub fn memoized(self) -> StateOracle {
        let cache: Mutex<HashMap<Vec<Letter>, Value>> = Mutex::new(HashMap::new());
        let inner = self.eval_fn.clone();
        StateOracle {
            label: self.label,
            group: self.group,
            eval_fn: Arc::new(move |w: &Word| {
                if let Some(hit) = cache.lock().unwrap().get(&w.key()) {
                    return Ok(hit.clone());
                }
                let v = inner(w)?;
                cache
                    .lock()
                    .unwrap()
                    .entry(w.key())
                    .or_insert_with(|| v.clone());
                Ok(v)
            }),
        }
    }

    /// The Haar state of any supported group; free products get the free
    /// product of their factor Haar states.
    pub fn haar(group: &GroupSpec, caps: &Caps) -> Result<StateOracle> {
        if group.is_free_product() {
            let factors = group
                .factors()
                .iter()
                .map(|f| StateOracle::haar(f, caps))
                .collect::<Result<Vec<_>>>()?;
            return free_product_state(factors, group.clone(), caps);
        }
        let oracle = HaarOracle::new(group.clone(), caps)?;
        Ok(StateOracle::from_fn(
            format!("haar({})", group.name()),
            group.clone(),
            move |w| Ok(Value::Exact(oracle.value(w)?)),
        ))
    }

    /// The counit as a state; the unit of convolution.
    pub fn counit(group: &GroupSpec) -> StateOracle {
        StateOracle::from_fn("counit", group.clone(), |w| Ok(Value::Exact(w.counit())))
    }

    /// Evaluation at a classical point: an exact orthogonal (or permutation)
    /// matrix defines a character of the self-adjoint-entry families.
    pub fn point(group: &GroupSpec, matrix: RationalMatrix) -> Result<StateOracle> {
        let n = group.dim();
        if matrix.rows() != n || matrix.cols() != n {
            return Err(Error::argument("point matrix has wrong shape"));
        }
        if group.is_free_product() || !group.letter_self_adjoint(1)? {
            return Err(Error::unsupported(
                "point states are supplied for self-adjoint-entry families only",
            ));
        }
        if matrix.transpose().mul(&matrix)? != RationalMatrix::identity(n) {
            return Err(Error::argument("point matrix is not orthogonal"));
        }
        if matches!(group.family(), crate::group::Family::SClassical | crate::group::Family::SPlus)
        {
            let zero = BigRational::zero();
            let one = BigRational::one();
            for r in 0..n {
                for c in 0..n {
                    let v = matrix.get(r, c);
                    if *v != zero && *v != one {
                        return Err(Error::argument(
                            "points of permutation-type groups are permutation matrices",
                        ));
                    }
                }
            }
        }
        Ok(StateOracle::from_fn(
            "point",
            group.clone(),
            move |w: &Word| {
                let mut acc = BigRational::one();
                for l in w.letters() {
                    acc *= matrix.get(l.row - 1, l.col - 1);
                    if acc.is_zero() {
                        break;
                    }
                }
                Ok(Value::Exact(acc))
            },
        ))
    }

    /// Convex combination with exact weights (which must sum to 1).
    pub fn convex(parts: Vec<(StateOracle, BigRational)>) -> Result<StateOracle> {
        if parts.is_empty() {
            return Err(Error::argument("empty convex combination"));
        }
        let group = parts[0].0.group.clone();
        if parts.iter().any(|(s, _)| s.group != group) {
            return Err(Error::argument("convex combination across groups"));
        }
        let total: BigRational = parts.iter().map(|(_, w)| w.clone()).sum();
        if !total.is_one() {
            return Err(Error::argument("convex weights must sum to 1"));
        }
        Ok(StateOracle::from_fn(
            "convex",
            group,
            move |w: &Word| {
                let mut acc = Value::zero();
                for (s, weight) in &parts {
                    acc = acc + s.eval(w)? * Value::Exact(weight.clone());
                }
                Ok(acc)
            },
        ))
    }
}

/// Convolution (φ ⊗ ψ) after the coproduct.
pub fn convolve(phi: &StateOracle, psi: &StateOracle, caps: &Caps) -> Result<StateOracle> {
    if phi.group != psi.group {
        return Err(Error::argument("convolving states on different groups"));
    }
    let phi = phi.clone();
    let psi = psi.clone();
    let caps = caps.clone();
    Ok(StateOracle::from_fn(
        format!("({})⋆({})", phi.label, psi.label),
        phi.group.clone(),
        move |w: &Word| {
            let mut total = Value::zero();
            for (left, right) in w.coproduct_expand(&caps)? {
                let a = phi.eval(&left)?;
                if a.is_zero() {
                    continue;
                }
                total = total + a * psi.eval(&right)?;
            }
            Ok(total)
        },
    )
    .memoized())
}

/// Pullback along a quotient morphism: w ↦ ψ(π(w)).
pub fn pullback(psi: &StateOracle, morphism: &Morphism, caps: &Caps) -> Result<StateOracle> {
    if psi.group != morphism.target {
        return Err(Error::argument(format!(
            "state on {} pulled back along morphism into {}",
            psi.group, morphism.target
        )));
    }
    let psi = psi.clone();
    let morphism = morphism.clone();
    let caps = caps.clone();
    Ok(StateOracle::from_fn(
        format!("{}∘{}", psi.label, morphism.name),
        morphism.source.clone(),
        move |w: &Word| psi.eval_sum(&morphism.apply_word(w, &caps)?),
    )
    .memoized())
}

/// Free-product state determined by the factor states: single-factor words
/// evaluate in their factor, and alternating products of centered syllables
/// evaluate to zero. Evaluation uses the centering recursion, expanding each
/// syllable s as (s - φ(s)·1) + φ(s)·1 and dropping the all-centered term.
pub fn free_product_state(
    factors: Vec<StateOracle>,
    group: GroupSpec,
    caps: &Caps,
) -> Result<StateOracle> {
    if !group.is_free_product() {
        return Err(Error::argument("free-product state needs a free-product group"));
    }
    if factors.len() != group.factors().len() {
        return Err(Error::argument(format!(
            "{} factor states given for {} factors",
            factors.len(),
            group.factors().len()
        )));
    }
    for (s, f) in factors.iter().zip(group.factors()) {
        if s.group != *f {
            return Err(Error::argument(format!(
                "factor state on {} does not match factor {}",
                s.group, f
            )));
        }
    }
    let label = format!(
        "∗({})",
        factors
            .iter()
            .map(|s| s.label.clone())
            .collect::<Vec<_>>()
            .join(",")
    );
    let evaluator = FreeProductEval {
        group: group.clone(),
        factors,
        caps: caps.clone(),
        memo: Mutex::new(HashMap::new()),
    };
    Ok(StateOracle::from_fn(label, group, move |w: &Word| {
        evaluator.eval(w)
    }))
}

struct FreeProductEval {
    group: GroupSpec,
    factors: Vec<StateOracle>,
    caps: Caps,
    memo: Mutex<HashMap<Vec<Letter>, Value>>,
}

impl FreeProductEval {
    fn eval(&self, w: &Word) -> Result<Value> {
        let syllables = self.split_syllables(w.letters())?;
        self.eval_syllables(syllables)
    }

    /// Maximal runs of same-factor letters.
    fn split_syllables(&self, letters: &[Letter]) -> Result<Vec<(usize, Vec<Letter>)>> {
        let mut out: Vec<(usize, Vec<Letter>)> = Vec::new();
        for &l in letters {
            let (factor, _) = self.group.factor_of(l.row)?;
            match out.last_mut() {
                Some((f, run)) if *f == factor => run.push(l),
                _ => out.push((factor, vec![l])),
            }
        }
        Ok(out)
    }

    fn factor_value(&self, factor: usize, letters: &[Letter]) -> Result<Value> {
        let offset = self.group.factor_offset(factor);
        let local_group = &self.group.factors()[factor];
        let local: Vec<Letter> = letters
            .iter()
            .map(|l| Letter::new(l.row - offset, l.col - offset, l.starred))
            .collect();
        self.factors[factor].eval(&Word::new(local_group.clone(), local)?)
    }

    fn eval_syllables(&self, mut sylls: Vec<(usize, Vec<Letter>)>) -> Result<Value> {
        // Merge adjacent same-factor runs and drop empties.
        let mut merged: Vec<(usize, Vec<Letter>)> = Vec::with_capacity(sylls.len());
        for (f, run) in sylls.drain(..) {
            if run.is_empty() {
                continue;
            }
            match merged.last_mut() {
                Some((g, acc)) if *g == f => acc.extend(run),
                _ => merged.push((f, run)),
            }
        }
        let r = merged.len();
        if r == 0 {
            return Ok(Value::one());
        }
        if r == 1 {
            return self.factor_value(merged[0].0, &merged[0].1);
        }
        if r > self.caps.max_syllables {
            return Err(Error::resource(format!(
                "free-product word has {r} syllables (cap {})",
                self.caps.max_syllables
            )));
        }
        let key: Vec<Letter> = merged.iter().flat_map(|(_, run)| run.clone()).collect();
        if let Some(hit) = self.memo.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let means: Vec<Value> = merged
            .iter()
            .map(|(f, run)| self.factor_value(*f, run))
            .collect::<Result<_>>()?;
        // φ(s₁…s_r) = Σ_{∅≠U} (−1)^{|U|+1} (Π_{i∈U} m_i) φ(rest), the
        // all-kept term vanishing by freeness on alternating centered words.
        let mut total = Value::zero();
        for mask in 1u32..(1 << r) {
            let mut coeff = Value::one();
            for (i, m) in means.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    coeff = coeff * m.clone();
                    if coeff.is_zero() {
                        break;
                    }
                }
            }
            if coeff.is_zero() {
                continue;
            }
            if mask.count_ones() % 2 == 0 {
                coeff = -coeff;
            }
            let rest: Vec<(usize, Vec<Letter>)> = merged
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) == 0)
                .map(|(_, s)| s.clone())
                .collect();
            total = total + coeff * self.eval_syllables(rest)?;
        }
        self.memo
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| total.clone());
        Ok(total)
    }
}

/// The matrix of a state on degree-d coefficients: entry at (row tuple i,
/// column tuple j) is φ(u^ε_{i₁j₁}···u^ε_{i_dj_d}), tuples in mixed-radix
/// order. Exact while every entry is rational.
#[derive(Clone, Debug)]
pub struct TransferMatrix {
    group: GroupSpec,
    degree: usize,
    pattern: Vec<bool>,
    dim: usize,
    data: TransferData,
}

#[derive(Clone, Debug)]
pub enum TransferData {
    Exact(RationalMatrix),
    Float(DMatrix<f64>),
}

fn tuple_of_index(mut idx: usize, n: usize, d: usize) -> Vec<usize> {
    let mut out = vec![1usize; d];
    for t in (0..d).rev() {
        out[t] = 1 + idx % n;
        idx /= n;
    }
    out
}

impl TransferMatrix {
    pub fn build(
        state: &StateOracle,
        degree: usize,
        pattern: &[bool],
        caps: &Caps,
    ) -> Result<TransferMatrix> {
        let group = state.group().clone();
        if group.is_free_product() {
            return Err(Error::unsupported(
                "transfer matrices are defined for single-factor groups",
            ));
        }
        if pattern.len() != degree {
            return Err(Error::argument("pattern length must equal degree"));
        }
        let n = group.dim();
        let dim = n.checked_pow(degree as u32).ok_or_else(|| {
            Error::resource("transfer dimension overflow".to_string())
        })?;
        let entries = dim.checked_mul(dim).ok_or_else(|| {
            Error::resource("transfer entry count overflow".to_string())
        })?;
        if entries > caps.max_transfer_entries {
            return Err(Error::resource(format!(
                "transfer matrix needs {entries} entries (cap {})",
                caps.max_transfer_entries
            )));
        }
        let mut values = Vec::with_capacity(entries);
        let mut all_exact = true;
        for ri in 0..dim {
            let rows = tuple_of_index(ri, n, degree);
            for ci in 0..dim {
                let cols = tuple_of_index(ci, n, degree);
                let letters: Vec<Letter> = (0..degree)
                    .map(|t| Letter::new(rows[t], cols[t], pattern[t]))
                    .collect();
                let v = state.eval(&Word::new(group.clone(), letters)?)?;
                all_exact &= v.is_exact();
                values.push(v);
            }
        }
        let data = if all_exact {
            let mut m = RationalMatrix::zeros(dim, dim);
            for (idx, v) in values.into_iter().enumerate() {
                match v {
                    Value::Exact(r) => m.set(idx / dim, idx % dim, r),
                    Value::Approx(_) => unreachable!("all_exact checked"),
                }
            }
            TransferData::Exact(m)
        } else {
            let mut m = DMatrix::<f64>::zeros(dim, dim);
            for (idx, v) in values.into_iter().enumerate() {
                if let Value::Approx(c) = &v {
                    if c.im.abs() > 1e-9 {
                        return Err(Error::argument(
                            "transfer matrices require real-valued states",
                        ));
                    }
                }
                m[(idx / dim, idx % dim)] = v.to_f64_real();
            }
            TransferData::Float(m)
        };
        Ok(TransferMatrix {
            group,
            degree,
            pattern: pattern.to_vec(),
            dim,
            data,
        })
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn pattern(&self) -> &[bool] {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.data, TransferData::Exact(_))
    }

    pub fn entry(&self, r: usize, c: usize) -> Value {
        match &self.data {
            TransferData::Exact(m) => Value::Exact(m.get(r, c).clone()),
            TransferData::Float(m) => Value::from_f64(m[(r, c)]),
        }
    }

    pub fn to_float(&self) -> DMatrix<f64> {
        match &self.data {
            TransferData::Exact(m) => {
                DMatrix::from_fn(self.dim, self.dim, |r, c| rational_to_f64(m.get(r, c)))
            }
            TransferData::Float(m) => m.clone(),
        }
    }

    pub fn exact(&self) -> Option<&RationalMatrix> {
        match &self.data {
            TransferData::Exact(m) => Some(m),
            TransferData::Float(_) => None,
        }
    }

    fn compatible(&self, other: &TransferMatrix) -> Result<()> {
        if self.group != other.group || self.degree != other.degree || self.dim != other.dim {
            return Err(Error::argument("transfer matrices not compatible"));
        }
        Ok(())
    }

    /// Matrix product; stays exact while both sides are exact and small
    /// enough, degrades to binary64 above the configured size.
    pub fn mul(&self, other: &TransferMatrix, caps: &Caps) -> Result<TransferMatrix> {
        self.compatible(other)?;
        let data = match (&self.data, &other.data) {
            (TransferData::Exact(a), TransferData::Exact(b))
                if self.dim * self.dim <= caps.float_switch_entries =>
            {
                TransferData::Exact(a.mul(b)?)
            }
            _ => TransferData::Float(self.to_float() * other.to_float()),
        };
        Ok(TransferMatrix {
            group: self.group.clone(),
            degree: self.degree,
            pattern: self.pattern.clone(),
            dim: self.dim,
            data,
        })
    }

    /// k-th power by repeated squaring.
    pub fn pow(&self, k: usize, caps: &Caps) -> Result<TransferMatrix> {
        if k == 0 {
            return Err(Error::argument("transfer power needs k >= 1"));
        }
        let mut base = self.clone();
        let mut k = k;
        let mut acc: Option<TransferMatrix> = None;
        loop {
            if k & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base, caps)?,
                });
            }
            k >>= 1;
            if k == 0 {
                break;
            }
            base = base.mul(&base, caps)?;
        }
        Ok(acc.expect("k >= 1"))
    }

    /// Max-abs-entry distance, exact when both sides are exact.
    pub fn max_abs_diff(&self, other: &TransferMatrix) -> Result<Value> {
        self.compatible(other)?;
        match (&self.data, &other.data) {
            (TransferData::Exact(a), TransferData::Exact(b)) => {
                Ok(Value::Exact(a.sub(b)?.max_abs()))
            }
            _ => {
                let a = self.to_float();
                let b = other.to_float();
                let mut worst = 0.0f64;
                for r in 0..self.dim {
                    for c in 0..self.dim {
                        worst = worst.max((a[(r, c)] - b[(r, c)]).abs());
                    }
                }
                Ok(Value::from_f64(worst))
            }
        }
    }
}

/// Transfer matrix of the k-fold convolution power of a state.
pub fn convolution_power(
    state: &StateOracle,
    k: usize,
    degree: usize,
    pattern: &[bool],
    caps: &Caps,
) -> Result<TransferMatrix> {
    TransferMatrix::build(state, degree, pattern, caps)?.pow(k, caps)
}

/// Max residual of the bi-invariance identity at degree d:
/// max(‖H·T − H‖, ‖T·H − H‖) with H the candidate Haar transfer matrix.
/// Exactly zero in rational mode when h is the true Haar state.
pub fn check_invariance(
    h: &StateOracle,
    phi: &StateOracle,
    degree: usize,
    pattern: &[bool],
    caps: &Caps,
) -> Result<Value> {
    let ht = TransferMatrix::build(h, degree, pattern, caps)?;
    let pt = TransferMatrix::build(phi, degree, pattern, caps)?;
    let left = ht.mul(&pt, caps)?.max_abs_diff(&ht)?;
    let right = pt.mul(&ht, caps)?.max_abs_diff(&ht)?;
    Ok(if left.abs_f64() >= right.abs_f64() {
        left
    } else {
        right
    })
}

/// Numerical witness of pointwise convergence (τ₁ ⋆ τ₂)^⋆k → h on degree-d
/// coefficients.
#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub degree: usize,
    pub pattern: Vec<bool>,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub tolerance: f64,
    /// Residuals never increase after the first step. Nothing guarantees
    /// this a priori; a failure is a red flag worth inspecting.
    pub residuals_monotone: bool,
    /// Modulus of the largest eigenvalue of T₁T₂ on the complement of the
    /// range of the Haar projection (the convergence rate), when eigensolving
    /// is enabled.
    pub sub_leading_modulus: Option<f64>,
}

/// Iterates T ← transfer(τ₁)·transfer(τ₂) and records ‖T^k − H‖max per step.
/// Above the float-switch size the powering runs in binary64; accumulated
/// error per entry stays within ~10·k·ε·dim of exact, far below the
/// tolerances used here.
pub fn converge_to_haar(
    tau1: &StateOracle,
    tau2: &StateOracle,
    h: &StateOracle,
    degree: usize,
    pattern: &[bool],
    tol: f64,
    max_iter: usize,
    eigensolve: bool,
    caps: &Caps,
) -> Result<ConvergenceReport> {
    let t1 = TransferMatrix::build(tau1, degree, pattern, caps)?;
    let t2 = TransferMatrix::build(tau2, degree, pattern, caps)?;
    let ht = TransferMatrix::build(h, degree, pattern, caps)?;
    let step = t1.mul(&t2, caps)?;
    let mut power = step.clone();
    let mut residuals = Vec::new();
    let mut converged = false;
    for _ in 1..=max_iter {
        let res = power.max_abs_diff(&ht)?.abs_f64();
        residuals.push(res);
        if res <= tol {
            converged = true;
            break;
        }
        power = power.mul(&step, caps)?;
    }
    let sub_leading_modulus = if eigensolve {
        // T^k − H = (T − H)^k because H is idempotent and absorbing, so the
        // rate is the spectral radius of T − H.
        let m = step.to_float() - ht.to_float();
        let eigs = m.complex_eigenvalues();
        Some(eigs.iter().map(|e| e.norm()).fold(0.0f64, f64::max))
    } else {
        None
    };
    let residuals_monotone = residuals.windows(2).all(|p| p[1] <= p[0] + 1e-12);
    Ok(ConvergenceReport {
        degree,
        pattern: pattern.to_vec(),
        iterations: residuals.len(),
        residuals,
        converged,
        tolerance: tol,
        residuals_monotone,
        sub_leading_modulus,
    })
}
