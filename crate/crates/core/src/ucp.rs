//! Unital completely positive maps into k×k matrix algebras, and the
//! approximate-multiplicativity defect machinery.
//!
//! The UCP supply is explicit and finite: matrix *-representations (including
//! characters at classical points and the flip family), classical sampling
//! maps (diagonal evaluation at Haar-sampled group elements, a quadrature of
//! the classical Haar state), and composites: compression by an isometry,
//! convolution through the coproduct, pullback along a quotient morphism and
//! direct sums. Defects use the normalized trace.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::group::{Family, GroupSpec, Morphism};
use crate::state::StateOracle;
use crate::value::Value;
use crate::word::{Word, WordSum};

/// Evaluation result: dense k×k matrix, or the diagonal of one. Sampling
/// maps and their convolutions stay diagonal, which keeps quadratically
/// large convolved nets affordable.
#[derive(Clone, Debug)]
pub enum Op {
    Dense(DMatrix<Complex64>),
    Diag(DVector<Complex64>),
}

impl Op {
    pub fn size(&self) -> usize {
        match self {
            Op::Dense(m) => m.nrows(),
            Op::Diag(d) => d.len(),
        }
    }

    pub fn identity(k: usize) -> Op {
        Op::Diag(DVector::from_element(k, Complex64::new(1.0, 0.0)))
    }

    pub fn zero(k: usize) -> Op {
        Op::Diag(DVector::from_element(k, Complex64::new(0.0, 0.0)))
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        match self {
            Op::Dense(m) => m.clone(),
            Op::Diag(d) => DMatrix::from_diagonal(d),
        }
    }

    pub fn adjoint(&self) -> Op {
        match self {
            Op::Dense(m) => Op::Dense(m.adjoint()),
            Op::Diag(d) => Op::Diag(d.map(|c| c.conj())),
        }
    }

    pub fn scale(&self, c: Complex64) -> Op {
        match self {
            Op::Dense(m) => Op::Dense(m.scale_complex(c)),
            Op::Diag(d) => Op::Diag(d.map(|x| x * c)),
        }
    }

    pub fn mul(&self, other: &Op) -> Result<Op> {
        if self.size() != other.size() {
            return Err(Error::argument("operator product size mismatch"));
        }
        Ok(match (self, other) {
            (Op::Diag(a), Op::Diag(b)) => Op::Diag(a.component_mul(b)),
            (Op::Dense(a), Op::Dense(b)) => Op::Dense(a * b),
            (Op::Dense(a), Op::Diag(b)) => {
                let mut m = a.clone();
                for (j, s) in b.iter().enumerate() {
                    for i in 0..m.nrows() {
                        m[(i, j)] *= s;
                    }
                }
                Op::Dense(m)
            }
            (Op::Diag(a), Op::Dense(b)) => {
                let mut m = b.clone();
                for (i, s) in a.iter().enumerate() {
                    for j in 0..m.ncols() {
                        m[(i, j)] *= s;
                    }
                }
                Op::Dense(m)
            }
        })
    }

    pub fn add_scaled(&mut self, other: &Op, c: Complex64) -> Result<()> {
        if self.size() != other.size() {
            return Err(Error::argument("operator sum size mismatch"));
        }
        match (&mut *self, other) {
            (Op::Diag(a), Op::Diag(b)) => {
                a.zip_apply(b, |x, y| *x += y * c);
            }
            (Op::Dense(a), Op::Dense(b)) => {
                a.zip_apply(b, |x, y| *x += y * c);
            }
            _ => {
                let dense = self.to_dense() + other.to_dense().scale_complex(c);
                *self = Op::Dense(dense);
            }
        }
        Ok(())
    }

    /// self += scale · (a ⊗ b), fused for the diagonal case so convolved
    /// sampling nets never materialize per-pair tensors.
    pub fn accumulate_kron(&mut self, a: &Op, b: &Op, scale: Complex64, caps: &Caps) -> Result<()> {
        if self.size() != a.size() * b.size() {
            return Err(Error::argument("tensor accumulation size mismatch"));
        }
        if let (Op::Diag(acc), Op::Diag(da), Op::Diag(db)) = (&mut *self, a, b) {
            let acc = acc.as_mut_slice();
            let db = db.as_slice();
            let kb = db.len();
            for (i, &x) in da.as_slice().iter().enumerate() {
                let factor = x * scale;
                if factor.re == 0.0 && factor.im == 0.0 {
                    continue;
                }
                let chunk = &mut acc[i * kb..(i + 1) * kb];
                for (dst, &y) in chunk.iter_mut().zip(db) {
                    *dst += factor * y;
                }
            }
            return Ok(());
        }
        self.add_scaled(&a.kron(b, caps)?, scale)
    }

    pub fn kron(&self, other: &Op, caps: &Caps) -> Result<Op> {
        let k = self
            .size()
            .checked_mul(other.size())
            .ok_or_else(|| Error::resource("tensor size overflow"))?;
        match (self, other) {
            (Op::Diag(a), Op::Diag(b)) => {
                if k > caps.max_ucp_entries {
                    return Err(Error::resource(format!(
                        "diagonal tensor of size {k} exceeds cap {}",
                        caps.max_ucp_entries
                    )));
                }
                let mut d = DVector::from_element(k, Complex64::new(0.0, 0.0));
                for (i, x) in a.iter().enumerate() {
                    for (j, y) in b.iter().enumerate() {
                        d[i * other.size() + j] = x * y;
                    }
                }
                Ok(Op::Diag(d))
            }
            _ => {
                if k * k > caps.max_ucp_entries {
                    return Err(Error::resource(format!(
                        "dense tensor of {} entries exceeds cap {}",
                        k * k,
                        caps.max_ucp_entries
                    )));
                }
                Ok(Op::Dense(self.to_dense().kronecker(&other.to_dense())))
            }
        }
    }

    pub fn normalized_trace(&self) -> Complex64 {
        let k = self.size() as f64;
        match self {
            Op::Dense(m) => m.trace() / k,
            Op::Diag(d) => d.sum() / k,
        }
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        match self {
            Op::Dense(m) => m.iter().map(|c| c.norm_sqr()).sum(),
            Op::Diag(d) => d.iter().map(|c| c.norm_sqr()).sum(),
        }
    }

    fn spectral_norm(&self) -> f64 {
        match self {
            Op::Dense(m) => m
                .clone()
                .singular_values()
                .iter()
                .fold(0.0f64, |a, &s| a.max(s)),
            Op::Diag(d) => d.iter().map(|c| c.norm()).fold(0.0f64, f64::max),
        }
    }
}

trait ScaleComplex {
    fn scale_complex(&self, c: Complex64) -> Self;
}

impl ScaleComplex for DMatrix<Complex64> {
    fn scale_complex(&self, c: Complex64) -> Self {
        self.map(|x| x * c)
    }
}

#[derive(Clone, Debug)]
enum SampleData {
    /// Haar-distributed orthogonal matrices (Gaussian ensemble + QR with
    /// positive-diagonal R correction).
    Orthogonal(Vec<DMatrix<f64>>),
    Permutations(Vec<Vec<usize>>),
    /// Evaluation at the k-th roots of unity, deterministic.
    RootsOfUnity(usize),
}

#[derive(Clone, Debug)]
enum UcpKind {
    Rep {
        images: BTreeMap<(usize, usize), DMatrix<Complex64>>,
    },
    ClassicalSample {
        samples: SampleData,
    },
    Compressed {
        inner: Box<UcpMap>,
        isometry: DMatrix<Complex64>,
    },
    Convolved {
        left: Box<UcpMap>,
        right: Box<UcpMap>,
    },
    Pullback {
        morphism: Morphism,
        inner: Box<UcpMap>,
    },
    DirectSum {
        parts: Vec<UcpMap>,
    },
}

#[derive(Clone, Debug)]
pub struct UcpMap {
    group: GroupSpec,
    k: usize,
    kind: UcpKind,
    caps: Caps,
}

impl UcpMap {
    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    /// Output matrix size.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn apply(&self, w: &Word) -> Result<Op> {
        if w.group() != &self.group {
            return Err(Error::argument(format!(
                "word on {} fed to UCP map on {}",
                w.group(),
                self.group
            )));
        }
        match &self.kind {
            UcpKind::Rep { images } => {
                let mut acc = Op::identity(self.k);
                for l in w.letters() {
                    let img = images.get(&(l.row, l.col)).ok_or_else(|| {
                        Error::argument(format!("no image for generator ({},{})", l.row, l.col))
                    })?;
                    let img = if l.starred {
                        Op::Dense(img.adjoint())
                    } else {
                        Op::Dense(img.clone())
                    };
                    acc = acc.mul(&img)?;
                }
                Ok(acc)
            }
            UcpKind::ClassicalSample { samples } => {
                let mut d = DVector::from_element(self.k, Complex64::new(1.0, 0.0));
                match samples {
                    SampleData::Orthogonal(mats) => {
                        for (s, g) in mats.iter().enumerate() {
                            let mut v = 1.0f64;
                            for l in w.letters() {
                                v *= g[(l.row - 1, l.col - 1)];
                            }
                            d[s] = Complex64::new(v, 0.0);
                        }
                    }
                    SampleData::Permutations(perms) => {
                        for (s, sigma) in perms.iter().enumerate() {
                            let hit = w.letters().iter().all(|l| sigma[l.col - 1] == l.row);
                            d[s] = Complex64::new(if hit { 1.0 } else { 0.0 }, 0.0);
                        }
                    }
                    SampleData::RootsOfUnity(k) => {
                        for s in 0..*k {
                            let mut v = Complex64::new(1.0, 0.0);
                            let root = Complex64::from_polar(
                                1.0,
                                2.0 * std::f64::consts::PI * s as f64 / *k as f64,
                            );
                            for l in w.letters() {
                                v *= if l.starred { root.conj() } else { root };
                            }
                            d[s] = v;
                        }
                    }
                }
                Ok(Op::Diag(d))
            }
            UcpKind::Compressed { inner, isometry } => {
                let mid = inner.apply(w)?.to_dense();
                Ok(Op::Dense(isometry.adjoint() * mid * isometry))
            }
            UcpKind::Convolved { left, right } => {
                if self.k > self.caps.max_ucp_entries {
                    return Err(Error::resource(format!(
                        "convolved output of size {} exceeds cap {}",
                        self.k, self.caps.max_ucp_entries
                    )));
                }
                let mut acc = Op::zero(self.k);
                for (lw, rw) in w.coproduct_expand(&self.caps)? {
                    let a = left.apply(&lw)?;
                    let b = right.apply(&rw)?;
                    acc.accumulate_kron(&a, &b, Complex64::new(1.0, 0.0), &self.caps)?;
                }
                Ok(acc)
            }
            UcpKind::Pullback { morphism, inner } => {
                let image = morphism.apply_word(w, &self.caps)?;
                let mut acc = Op::zero(self.k);
                for (word, coeff) in image.terms() {
                    acc.add_scaled(&inner.apply(&word)?, coeff.to_c64())?;
                }
                Ok(acc)
            }
            UcpKind::DirectSum { parts } => {
                let outs: Vec<Op> = parts.iter().map(|p| p.apply(w)).collect::<Result<_>>()?;
                if outs.iter().all(|o| matches!(o, Op::Diag(_))) {
                    let mut d = DVector::from_element(self.k, Complex64::new(0.0, 0.0));
                    let mut off = 0;
                    for o in outs {
                        if let Op::Diag(v) = o {
                            for (i, x) in v.iter().enumerate() {
                                d[off + i] = *x;
                            }
                            off += v.len();
                        }
                    }
                    Ok(Op::Diag(d))
                } else {
                    let mut m = DMatrix::from_element(
                        self.k,
                        self.k,
                        Complex64::new(0.0, 0.0),
                    );
                    let mut off = 0;
                    for o in outs {
                        let dense = o.to_dense();
                        let s = dense.nrows();
                        for i in 0..s {
                            for j in 0..s {
                                m[(off + i, off + j)] = dense[(i, j)];
                            }
                        }
                        off += s;
                    }
                    Ok(Op::Dense(m))
                }
            }
        }
    }

    /// Linear extension to word sums.
    pub fn apply_sum(&self, ws: &WordSum) -> Result<Op> {
        let mut acc = Op::zero(self.k);
        for (word, coeff) in ws.terms() {
            acc.add_scaled(&self.apply(&word)?, coeff.to_c64())?;
        }
        Ok(acc)
    }

    /// The state w ↦ tr_k(θ(w)).
    pub fn trace_state(&self) -> StateOracle {
        let this = self.clone();
        StateOracle::from_fn(
            format!("tr∘θ[k={}]", self.k),
            self.group.clone(),
            move |w: &Word| Ok(Value::Approx(this.apply(w)?.normalized_trace())),
        )
    }

    /// Normalized-trace multiplicativity defect at b:
    /// tr(θ(b*b)) − tr(θ(b)*θ(b)). Real up to float noise.
    pub fn defect(&self, b: &WordSum) -> Result<f64> {
        let b_star_b = b.adjoint()?.mul(b, &self.caps)?;
        let lhs = self.apply_sum(&b_star_b)?.normalized_trace();
        assert!(
            lhs.im.abs() < 1e-12,
            "trace of θ(b*b) should be real, got imaginary part {}",
            lhs.im
        );
        let theta_b = self.apply_sum(b)?;
        let rhs = theta_b.frobenius_sq() / self.k as f64;
        Ok(lhs.re - rhs)
    }
}

const REP_RELATION_TOLERANCE: f64 = 1e-10;

/// Max spectral-norm residual of the group's defining relations over the
/// given generator images.
pub fn validate_relations(
    group: &GroupSpec,
    images: &BTreeMap<(usize, usize), DMatrix<Complex64>>,
) -> Result<f64> {
    let k = images
        .values()
        .next()
        .map(|m| m.nrows())
        .ok_or_else(|| Error::argument("no generator images"))?;
    for ((i, j), m) in images {
        if m.nrows() != k || m.ncols() != k {
            return Err(Error::argument(format!(
                "image of ({i},{j}) is not {k}x{k}"
            )));
        }
    }
    let get = |i: usize, j: usize| -> Result<&DMatrix<Complex64>> {
        images
            .get(&(i, j))
            .ok_or_else(|| Error::argument(format!("missing image for generator ({i},{j})")))
    };
    let eye = DMatrix::<Complex64>::identity(k, k);
    let norm = |m: DMatrix<Complex64>| Op::Dense(m).spectral_norm();
    let mut worst = 0.0f64;

    match group.family() {
        Family::OClassical | Family::OPlus => {
            let n = group.dim();
            for i in 1..=n {
                for j in 1..=n {
                    worst = worst.max(norm(get(i, j)?.clone() - get(i, j)?.adjoint()));
                    let mut row = DMatrix::from_element(k, k, Complex64::new(0.0, 0.0));
                    let mut col = row.clone();
                    for l in 1..=n {
                        row += get(i, l)? * get(j, l)?;
                        col += get(l, i)? * get(l, j)?;
                    }
                    let target = if i == j { eye.clone() } else { DMatrix::zeros(k, k) };
                    worst = worst.max(norm(row - target.clone()));
                    worst = worst.max(norm(col - target));
                }
            }
        }
        Family::UClassical | Family::UPlus => {
            let n = group.dim();
            for i in 1..=n {
                for j in 1..=n {
                    let target = if i == j { eye.clone() } else { DMatrix::zeros(k, k) };
                    let mut r1 = DMatrix::from_element(k, k, Complex64::new(0.0, 0.0));
                    let mut r2 = r1.clone();
                    let mut r3 = r1.clone();
                    let mut r4 = r1.clone();
                    for l in 1..=n {
                        r1 += get(i, l)? * get(j, l)?.adjoint(); // u ūᵗ
                        r2 += get(l, i)?.adjoint() * get(l, j)?; // ūᵗ u
                        r3 += get(l, i)? * get(l, j)?.adjoint(); // uᵗ ū
                        r4 += get(i, l)?.adjoint() * get(j, l)?; // ū uᵗ
                    }
                    for r in [r1, r2, r3, r4] {
                        worst = worst.max(norm(r - target.clone()));
                    }
                }
            }
        }
        Family::SClassical | Family::SPlus => {
            let n = group.dim();
            for i in 1..=n {
                let mut row = DMatrix::from_element(k, k, Complex64::new(0.0, 0.0));
                let mut col = row.clone();
                for j in 1..=n {
                    let a = get(i, j)?;
                    worst = worst.max(norm(a * a - a));
                    worst = worst.max(norm(a.clone() - a.adjoint()));
                    row += get(i, j)?;
                    col += get(j, i)?;
                }
                worst = worst.max(norm(row - eye.clone()));
                worst = worst.max(norm(col - eye.clone()));
            }
        }
        Family::Torus => {
            let z = get(1, 1)?;
            worst = worst.max(norm(z * z.adjoint() - eye.clone()));
            worst = worst.max(norm(z.adjoint() * z - eye.clone()));
        }
        Family::FreeProduct => {
            for (fi, factor) in group.factors().iter().enumerate() {
                let off = group.factor_offset(fi);
                let mut local = BTreeMap::new();
                for li in 1..=factor.dim() {
                    for lj in 1..=factor.dim() {
                        local.insert((li, lj), get(off + li, off + lj)?.clone());
                    }
                }
                worst = worst.max(validate_relations(factor, &local)?);
            }
        }
    }
    Ok(worst)
}

/// A matrix *-representation on generators; rejected unless the relation
/// residual is within tolerance.
pub fn rep_ucp(
    group: &GroupSpec,
    images: BTreeMap<(usize, usize), DMatrix<Complex64>>,
    caps: &Caps,
) -> Result<UcpMap> {
    let residual = validate_relations(group, &images)?;
    if residual > REP_RELATION_TOLERANCE {
        return Err(Error::argument(format!(
            "generator images violate the defining relations (residual {residual:.3e})"
        )));
    }
    let k = images.values().next().expect("nonempty").nrows();
    Ok(UcpMap {
        group: group.clone(),
        k,
        kind: UcpKind::Rep { images },
        caps: caps.clone(),
    })
}

/// One-dimensional representation u_ij ↦ δ_ij (the counit as a character).
pub fn identity_character(group: &GroupSpec, caps: &Caps) -> Result<UcpMap> {
    let mut images = BTreeMap::new();
    for (i, j) in group.generator_positions() {
        let v = if i == j { 1.0 } else { 0.0 };
        images.insert(
            (i, j),
            DMatrix::from_element(1, 1, Complex64::new(v, 0.0)),
        );
    }
    rep_ucp(group, images, caps)
}

/// One-dimensional representation at a classical orthogonal point.
pub fn point_character(group: &GroupSpec, point: &DMatrix<f64>, caps: &Caps) -> Result<UcpMap> {
    let n = group.dim();
    if point.nrows() != n || point.ncols() != n {
        return Err(Error::argument("point matrix has wrong shape"));
    }
    let mut images = BTreeMap::new();
    for (i, j) in group.generator_positions() {
        images.insert(
            (i, j),
            DMatrix::from_element(1, 1, Complex64::new(point[(i - 1, j - 1)], 0.0)),
        );
    }
    rep_ucp(group, images, caps)
}

/// The flip-family representation on the 2-dimensional free orthogonal
/// group: u_11 = u_22 = 0, u_12 = u_21 = V for a self-adjoint unitary V.
pub fn flip_family_rep(v: DMatrix<Complex64>, caps: &Caps) -> Result<UcpMap> {
    let group = GroupSpec::make(Family::OPlus, 2)?;
    let k = v.nrows();
    let zero = DMatrix::from_element(k, k, Complex64::new(0.0, 0.0));
    let mut images = BTreeMap::new();
    images.insert((1, 1), zero.clone());
    images.insert((2, 2), zero);
    images.insert((1, 2), v.clone());
    images.insert((2, 1), v);
    rep_ucp(&group, images, caps)
}

fn haar_orthogonal_sample(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let normal = Normal::new(0.0, 1.0).expect("valid parameters");
    let g = DMatrix::from_fn(n, n, |_, _| normal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix the sign convention so Q is Haar-distributed.
    for i in 0..n {
        if r[(i, i)] < 0.0 {
            for j in 0..n {
                q[(j, i)] = -q[(j, i)];
            }
        }
    }
    q
}

/// Diagonal evaluation at `sample_count` group elements: a seeded Haar
/// quadrature for classical O_n, uniform permutations for S_m, and the
/// sample_count-th roots of unity (deterministic) for the torus. The
/// resulting map is a *-homomorphism, so its defect vanishes, and its
/// normalized trace approximates the classical Haar state. Sampling streams
/// are indexed per element, so a fixed seed is reproducible regardless of
/// evaluation order.
pub fn classical_sampling_ucp(
    group: &GroupSpec,
    sample_count: usize,
    seed: u64,
    caps: &Caps,
) -> Result<UcpMap> {
    if sample_count == 0 {
        return Err(Error::argument("sample count must be positive"));
    }
    let samples = match group.family() {
        Family::OClassical => {
            let n = group.dim();
            let mats = (0..sample_count)
                .map(|s| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(s as u64 + 1);
                    haar_orthogonal_sample(n, &mut rng)
                })
                .collect();
            SampleData::Orthogonal(mats)
        }
        Family::SClassical => {
            let m = group.dim();
            let perms = (0..sample_count)
                .map(|s| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(s as u64 + 1);
                    let mut sigma: Vec<usize> = (1..=m).collect();
                    for i in (1..m).rev() {
                        let j = rng.random_range(0..=i);
                        sigma.swap(i, j);
                    }
                    sigma
                })
                .collect();
            SampleData::Permutations(perms)
        }
        Family::Torus => SampleData::RootsOfUnity(sample_count),
        _ => {
            return Err(Error::unsupported(
                "sampling maps exist for classical O, classical S and the torus",
            ))
        }
    };
    Ok(UcpMap {
        group: group.clone(),
        k: sample_count,
        kind: UcpKind::ClassicalSample { samples },
        caps: caps.clone(),
    })
}

/// Full average over all m! permutations: the trace state is exactly Haar.
pub fn full_permutation_average(group: &GroupSpec, caps: &Caps) -> Result<UcpMap> {
    if group.family() != Family::SClassical {
        return Err(Error::argument("full average is for classical S_m"));
    }
    let m = group.dim();
    let order: usize = (1..=m).product();
    if order > caps.max_direct_average {
        return Err(Error::resource(format!(
            "{order} permutations exceed cap {}",
            caps.max_direct_average
        )));
    }
    fn rec(current: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        let m = used.len();
        if current.len() == m {
            out.push(current.clone());
            return;
        }
        for v in 1..=m {
            if !used[v - 1] {
                used[v - 1] = true;
                current.push(v);
                rec(current, used, out);
                current.pop();
                used[v - 1] = false;
            }
        }
    }
    let mut perms = Vec::with_capacity(order);
    rec(&mut Vec::new(), &mut vec![false; m], &mut perms);
    Ok(UcpMap {
        group: group.clone(),
        k: order,
        kind: UcpKind::ClassicalSample {
            samples: SampleData::Permutations(perms),
        },
        caps: caps.clone(),
    })
}

/// (θ₁ ⊗ θ₂) after the coproduct, into M_{k₁k₂}.
pub fn convolve_ucp(left: &UcpMap, right: &UcpMap, caps: &Caps) -> Result<UcpMap> {
    if left.group != right.group {
        return Err(Error::argument("convolving UCP maps on different groups"));
    }
    let k = left
        .k
        .checked_mul(right.k)
        .ok_or_else(|| Error::resource("tensor size overflow"))?;
    Ok(UcpMap {
        group: left.group.clone(),
        k,
        kind: UcpKind::Convolved {
            left: Box::new(left.clone()),
            right: Box::new(right.clone()),
        },
        caps: caps.clone(),
    })
}

/// θ ∘ π. The morphism is a concrete *-homomorphism, so the composite is
/// UCP outright.
pub fn pullback_ucp(inner: &UcpMap, morphism: &Morphism, caps: &Caps) -> Result<UcpMap> {
    if inner.group != morphism.target {
        return Err(Error::argument(format!(
            "UCP map on {} pulled back along morphism into {}",
            inner.group, morphism.target
        )));
    }
    Ok(UcpMap {
        group: morphism.source.clone(),
        k: inner.k,
        kind: UcpKind::Pullback {
            morphism: morphism.clone(),
            inner: Box::new(inner.clone()),
        },
        caps: caps.clone(),
    })
}

/// Compression w ↦ V*θ(w)V by an isometry V (columns orthonormal).
pub fn compress_ucp(inner: &UcpMap, isometry: DMatrix<Complex64>) -> Result<UcpMap> {
    if isometry.nrows() != inner.k {
        return Err(Error::argument("isometry domain mismatch"));
    }
    let k = isometry.ncols();
    let gram = isometry.adjoint() * &isometry;
    let eye = DMatrix::<Complex64>::identity(k, k);
    let err = (gram - eye).iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    if err > 1e-12 {
        return Err(Error::argument(format!(
            "columns are not orthonormal (residual {err:.3e})"
        )));
    }
    Ok(UcpMap {
        group: inner.group.clone(),
        k,
        kind: UcpKind::Compressed {
            inner: Box::new(inner.clone()),
            isometry,
        },
        caps: inner.caps.clone(),
    })
}

/// Block-diagonal direct sum; traces weight each block by its size.
pub fn direct_sum_ucp(parts: Vec<UcpMap>) -> Result<UcpMap> {
    let group = parts
        .first()
        .map(|p| p.group.clone())
        .ok_or_else(|| Error::argument("empty direct sum"))?;
    if parts.iter().any(|p| p.group != group) {
        return Err(Error::argument("direct sum across groups"));
    }
    let k = parts.iter().map(|p| p.k).sum();
    let caps = parts[0].caps.clone();
    Ok(UcpMap {
        group,
        k,
        kind: UcpKind::DirectSum { parts },
        caps,
    })
}

/// Gram matrix of the defect form ⟨x,y⟩ = tr(θ(y*x) − θ(y*)θ(x)) on a word
/// list, its minimum eigenvalue, and a pairwise Cauchy-Schwarz check.
#[derive(Clone, Debug)]
pub struct DefectGram {
    pub matrix: DMatrix<Complex64>,
    pub min_eigenvalue: f64,
    pub cauchy_schwarz_ok: bool,
}

pub fn defect_gram(theta: &UcpMap, words: &[WordSum]) -> Result<DefectGram> {
    let n = words.len();
    let mut matrix = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let thetas: Vec<Op> = words
        .iter()
        .map(|w| theta.apply_sum(w))
        .collect::<Result<_>>()?;
    for i in 0..n {
        for j in 0..n {
            // ⟨x_i, x_j⟩ = tr(θ(x_j* x_i)) − tr(θ(x_j)* θ(x_i)).
            let prod = words[j].adjoint()?.mul(&words[i], &theta.caps)?;
            let lhs = theta.apply_sum(&prod)?.normalized_trace();
            let rhs = thetas[j].adjoint().mul(&thetas[i])?.normalized_trace();
            matrix[(i, j)] = lhs - rhs;
        }
    }
    let min_eigenvalue = if n == 0 {
        0.0
    } else {
        // Hermitize to wash out float asymmetry before eigensolving.
        let herm = (matrix.clone() + matrix.adjoint()).scale_complex(Complex64::new(0.5, 0.0));
        nalgebra::SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    };
    let mut cauchy_schwarz_ok = true;
    for i in 0..n {
        for j in 0..n {
            let bound = matrix[(i, i)].re.max(0.0).sqrt() * matrix[(j, j)].re.max(0.0).sqrt();
            if matrix[(i, j)].norm() > bound + 1e-9 {
                cauchy_schwarz_ok = false;
            }
        }
    }
    Ok(DefectGram {
        matrix,
        min_eigenvalue,
        cauchy_schwarz_ok,
    })
}

/// Per-map summary against a target trace on a fixed word corpus.
#[derive(Clone, Debug)]
pub struct DefectReport {
    pub words: Vec<String>,
    pub defects: Vec<f64>,
    pub trace_values: Vec<Complex64>,
    pub gram_min_eigenvalue: f64,
    pub cauchy_schwarz_ok: bool,
}

pub fn defect_report(theta: &UcpMap, words: &[WordSum]) -> Result<DefectReport> {
    let mut defects = Vec::with_capacity(words.len());
    let mut trace_values = Vec::with_capacity(words.len());
    for w in words {
        defects.push(theta.defect(w)?);
        trace_values.push(theta.apply_sum(w)?.normalized_trace());
    }
    let gram = defect_gram(theta, words)?;
    Ok(DefectReport {
        words: words.iter().map(|w| w.to_string()).collect(),
        defects,
        trace_values,
        gram_min_eigenvalue: gram.min_eigenvalue,
        cauchy_schwarz_ok: gram.cauchy_schwarz_ok,
    })
}

/// Trace-approximation and defect trends of a net of UCP maps against a
/// target trace.
#[derive(Clone, Debug)]
pub struct FactorizationReport {
    /// Per net element: max over words of |tr(θ(w)) − τ(w)|.
    pub trace_errors: Vec<f64>,
    /// Per net element: max over words of the defect.
    pub max_defects: Vec<f64>,
    pub trace_error_decreasing: bool,
    pub defects_decreasing: bool,
}

impl FactorizationReport {
    /// The net witnesses amenability at this scale: both sequences decrease
    /// and the final values are below the thresholds.
    pub fn witnesses(&self, trace_tol: f64, defect_tol: f64) -> bool {
        self.trace_error_decreasing
            && self.defects_decreasing
            && self.trace_errors.last().is_some_and(|&e| e <= trace_tol)
            && self.max_defects.last().is_some_and(|&d| d <= defect_tol)
    }
}

pub fn factorization_report(
    net: &[UcpMap],
    target: &StateOracle,
    words: &[WordSum],
) -> Result<FactorizationReport> {
    let mut trace_errors = Vec::with_capacity(net.len());
    let mut max_defects = Vec::with_capacity(net.len());
    for theta in net {
        let mut worst_trace = 0.0f64;
        let mut worst_defect = 0.0f64;
        for w in words {
            let approx = theta.apply_sum(w)?.normalized_trace();
            let exact = target.eval_sum(w)?.to_c64();
            worst_trace = worst_trace.max((approx - exact).norm());
            worst_defect = worst_defect.max(theta.defect(w)?);
        }
        trace_errors.push(worst_trace);
        max_defects.push(worst_defect);
    }
    let non_increasing =
        |xs: &[f64]| xs.windows(2).all(|p| p[1] <= p[0] + 1e-12);
    Ok(FactorizationReport {
        trace_error_decreasing: non_increasing(&trace_errors),
        defects_decreasing: non_increasing(&max_defects),
        trace_errors,
        max_defects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{morphism_abelianize, morphism_fix_vector, Rotation};
    use crate::state::{convolve, pullback};

    fn caps() -> Caps {
        Caps::default()
    }

    fn pauli_x() -> DMatrix<Complex64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        )
    }

    fn word(text: &str, g: &GroupSpec) -> WordSum {
        WordSum::from_word(Word::parse(text, g).unwrap(), Value::one())
    }

    #[test]
    fn flip_family_is_a_valid_rep() {
        let c = caps();
        let theta = flip_family_rep(pauli_x(), &c).unwrap();
        assert_eq!(theta.k(), 2);
        let g = theta.group().clone();
        // Multiplicative, so zero defect.
        let b = word("1,2;2,1", &g);
        assert!(theta.defect(&b).unwrap().abs() < 1e-12);
        // u_11 evaluates to 0, u_12 to V.
        let v = theta.apply(&Word::parse("1,1", &g).unwrap()).unwrap();
        assert!(v.frobenius_sq() < 1e-20);
    }

    #[test]
    fn invalid_images_rejected_with_measurable_residual() {
        let c = caps();
        let group = GroupSpec::make(Family::OPlus, 2).unwrap();
        let mut images = BTreeMap::new();
        // Identity images satisfy the relations.
        for (i, j) in group.generator_positions() {
            let v = if i == j { 1.0 } else { 0.0 };
            images.insert((i, j), DMatrix::from_element(1, 1, Complex64::new(v, 0.0)));
        }
        assert!(validate_relations(&group, &images).unwrap() < 1e-15);

        // Perturb one entry; the residual lands well above tolerance.
        images.insert(
            (1, 2),
            DMatrix::from_element(1, 1, Complex64::new(1e-3, 0.0)),
        );
        let residual = validate_relations(&group, &images).unwrap();
        assert!((1e-4..1e-1).contains(&residual), "residual {residual}");
        assert!(rep_ucp(&group, images, &c).is_err());
    }

    #[test]
    fn torus_roots_of_unity_traces() {
        let c = caps();
        let t = GroupSpec::make(Family::Torus, 1).unwrap();
        let theta = classical_sampling_ucp(&t, 6, 0, &c).unwrap();
        // tr∘θ(z^a) = 1 if 6 | a else 0.
        for (a, expect) in [(0usize, 1.0), (1, 0.0), (5, 0.0), (6, 1.0)] {
            let letters = "1,1;".repeat(a);
            let w = Word::parse(letters.trim_end_matches(';'), &t).unwrap();
            let tr = theta.apply(&w).unwrap().normalized_trace();
            assert!((tr.re - expect).abs() < 1e-12 && tr.im.abs() < 1e-12, "a={a}");
        }
    }

    #[test]
    fn full_permutation_average_matches_haar_exactly() {
        let c = caps();
        let s4 = GroupSpec::parse("s:4").unwrap();
        let theta = full_permutation_average(&s4, &c).unwrap();
        assert_eq!(theta.k(), 24);
        let h = StateOracle::haar(&s4, &c).unwrap();
        for text in ["1,1", "1,1;2,2", "1,2", "1,1;1,2"] {
            let w = Word::parse(text, &s4).unwrap();
            let tr = theta.apply(&w).unwrap().normalized_trace();
            let exact = h.eval(&w).unwrap().to_f64_real();
            assert!((tr.re - exact).abs() < 1e-15, "{text}");
        }
        // Exact average is multiplicative-defect-free on single words? No:
        // it is a *-homomorphism onto diagonals, so defects vanish.
        let b = word("1,1;2,2", &s4);
        assert!(theta.defect(&b).unwrap().abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let c = caps();
        let o4 = GroupSpec::parse("o:4").unwrap();
        let a = classical_sampling_ucp(&o4, 8, 42, &c).unwrap();
        let b = classical_sampling_ucp(&o4, 8, 42, &c).unwrap();
        let w = Word::parse("1,1;1,1", &o4).unwrap();
        let ta = a.apply(&w).unwrap().to_dense();
        let tb = b.apply(&w).unwrap().to_dense();
        assert_eq!(ta, tb);

        let c2 = classical_sampling_ucp(&o4, 8, 43, &c).unwrap();
        let tc = c2.apply(&w).unwrap().to_dense();
        assert_ne!(ta, tc);
    }

    #[test]
    fn monte_carlo_second_moment_near_exact() {
        let c = caps();
        let o4 = GroupSpec::parse("o:4").unwrap();
        let theta = classical_sampling_ucp(&o4, 2000, 7, &c).unwrap();
        let w = Word::parse("1,1;1,1", &o4).unwrap();
        let tr = theta.apply(&w).unwrap().normalized_trace();
        assert!((tr.re - 0.25).abs() <= 0.05, "got {}", tr.re);
    }

    #[test]
    fn trace_of_convolved_map_is_convolution_of_traces() {
        let c = caps();
        let o2 = GroupSpec::parse("o:2").unwrap();
        let ab = morphism_abelianize(2).unwrap();
        let sample = classical_sampling_ucp(&o2, 50, 3, &c).unwrap();
        let theta1 = pullback_ucp(&sample, &ab, &c).unwrap();
        let theta2 = flip_family_rep(pauli_x(), &c).unwrap();
        let conv = convolve_ucp(&theta1, &theta2, &c).unwrap();
        let tr_conv = conv.trace_state();
        let conv_tr = convolve(&theta1.trace_state(), &theta2.trace_state(), &c).unwrap();
        let g = theta1.group().clone();
        for text in ["", "1,1", "1,2;2,1", "1,1;2,2;1,1"] {
            let w = Word::parse(text, &g).unwrap();
            let a = tr_conv.eval(&w).unwrap().to_c64();
            let b = conv_tr.eval(&w).unwrap().to_c64();
            assert!((a - b).norm() < 1e-12, "{text}: {a} vs {b}");
        }
    }

    #[test]
    fn convolving_identity_characters_gives_identity_character() {
        let c = caps();
        let g = GroupSpec::make(Family::OPlus, 2).unwrap();
        let e = identity_character(&g, &c).unwrap();
        let conv = convolve_ucp(&e, &e, &c).unwrap();
        for text in ["", "1,1", "1,2", "1,1;2,2", "1,2;2,1"] {
            let w = Word::parse(text, &g).unwrap();
            let got = conv.apply(&w).unwrap().normalized_trace();
            let expect = if num_traits::Zero::is_zero(&w.counit()) { 0.0 } else { 1.0 };
            assert!((got.re - expect).abs() < 1e-15, "{text}");
        }
    }

    #[test]
    fn compressed_map_has_positive_defect() {
        let c = caps();
        let theta = flip_family_rep(pauli_x(), &c).unwrap();
        // Compress onto the first basis vector.
        let v = DMatrix::from_row_slice(
            2,
            1,
            &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        );
        let comp = compress_ucp(&theta, v).unwrap();
        assert_eq!(comp.k(), 1);
        let g = comp.group().clone();
        let b = word("1,2", &g);
        let d = comp.defect(&b).unwrap();
        assert!(d > 1e-3, "defect {d}");
        // Defect of the empty word is zero by unitality.
        let unit = WordSum::unit(g);
        assert!(comp.defect(&unit).unwrap().abs() < 1e-12);
    }

    #[test]
    fn pullback_of_homomorphism_keeps_zero_defect() {
        let c = caps();
        let fix = morphism_fix_vector(4, Rotation::Identity).unwrap();
        let ab = morphism_abelianize(3).unwrap();
        let composite = fix.then(&ab, &c).unwrap();
        let sample = classical_sampling_ucp(&ab.target, 40, 11, &c).unwrap();
        let theta = pullback_ucp(&sample, &composite, &c).unwrap();
        let g = theta.group().clone();
        for text in ["1,1", "4,4", "1,1;2,2", "1,4;4,1"] {
            let b = word(text, &g);
            assert!(theta.defect(&b).unwrap().abs() < 1e-12, "{text}");
        }
        // tr∘pullback equals pullback of tr∘θ.
        let lhs = theta.trace_state();
        let rhs = pullback(&sample.trace_state(), &composite, &c).unwrap();
        for text in ["1,1;1,1", "4,4", "2,3;3,2"] {
            let w = Word::parse(text, &g).unwrap();
            let a = lhs.eval(&w).unwrap().to_c64();
            let b = rhs.eval(&w).unwrap().to_c64();
            assert!((a - b).norm() < 1e-14, "{text}");
        }
    }

    #[test]
    fn defect_gram_is_psd_and_cauchy_schwarz_holds() {
        let c = caps();
        let theta = flip_family_rep(pauli_x(), &c).unwrap();
        let v = DMatrix::from_row_slice(
            2,
            1,
            &[Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)],
        );
        let comp = compress_ucp(&theta, v).unwrap();
        let g = comp.group().clone();
        let words: Vec<WordSum> = ["1,1", "1,2", "1,2;2,1", "2,2;1,2", "1,1;1,2"]
            .iter()
            .map(|t| word(t, &g))
            .collect();
        let gram = defect_gram(&comp, &words).unwrap();
        assert!(gram.min_eigenvalue >= -1e-9, "min eig {}", gram.min_eigenvalue);
        assert!(gram.cauchy_schwarz_ok);

        // Single-word Gram equals the defect.
        let single = defect_gram(&comp, &words[1..2]).unwrap();
        let d = comp.defect(&words[1]).unwrap();
        assert!((single.matrix[(0, 0)].re - d).abs() < 1e-12);

        // A multiplicative map gives the zero matrix.
        let zero = defect_gram(&theta, &words).unwrap();
        assert!(zero.matrix.iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn direct_sum_averages_traces() {
        let c = caps();
        let o2 = GroupSpec::parse("o:2").unwrap();
        let e1 = point_character(&o2, &DMatrix::identity(2, 2), &c).unwrap();
        let refl = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e2 = point_character(&o2, &refl, &c).unwrap();
        let sum = direct_sum_ucp(vec![e1, e2]).unwrap();
        assert_eq!(sum.k(), 2);
        let w = Word::parse("1,1", &o2).unwrap();
        let tr = sum.apply(&w).unwrap().normalized_trace();
        assert!((tr.re - 0.5).abs() < 1e-15);
        // Direct sums of homomorphisms stay defect-free.
        let b = word("1,1;1,2", &o2);
        assert!(sum.defect(&b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn every_kind_is_unital() {
        let c = caps();
        let o2 = GroupSpec::parse("o:2").unwrap();
        let ab = morphism_abelianize(2).unwrap();
        let flip = flip_family_rep(pauli_x(), &c).unwrap();
        let sample = classical_sampling_ucp(&o2, 10, 1, &c).unwrap();
        let pulled = pullback_ucp(&sample, &ab, &c).unwrap();
        let conv = convolve_ucp(&flip, &pulled, &c).unwrap();
        let v = DMatrix::from_row_slice(
            2,
            1,
            &[Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)],
        );
        let comp = compress_ucp(&flip, v).unwrap();
        let dsum = direct_sum_ucp(vec![flip.clone(), flip.clone()]).unwrap();
        for theta in [&flip, &pulled, &conv, &comp, &dsum] {
            let unit = Word::unit(theta.group().clone());
            let out = theta.apply(&unit).unwrap();
            let eye = Op::identity(theta.k()).to_dense();
            let gap = (out.to_dense() - eye).iter().map(|c| c.norm()).fold(0.0f64, f64::max);
            assert!(gap < 1e-12, "unitality gap {gap} at k={}", theta.k());
        }
        let t = GroupSpec::parse("t").unwrap();
        let roots = classical_sampling_ucp(&t, 5, 0, &c).unwrap();
        let out = roots.apply(&Word::unit(t)).unwrap();
        assert!((out.normalized_trace() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn factorization_report_trivial_net() {
        let c = caps();
        let s4 = GroupSpec::parse("s:4").unwrap();
        let theta = full_permutation_average(&s4, &c).unwrap();
        let h = StateOracle::haar(&s4, &c).unwrap();
        let words: Vec<WordSum> = ["1,1", "1,1;2,2", "1,2;2,1"]
            .iter()
            .map(|t| word(t, &s4))
            .collect();
        let report = factorization_report(&[theta.clone(), theta], &h, &words).unwrap();
        assert!(report.trace_errors.iter().all(|&e| e < 1e-14));
        assert!(report.max_defects.iter().all(|&d| d < 1e-14));
        assert!(report.witnesses(1e-12, 1e-12));
    }
}
