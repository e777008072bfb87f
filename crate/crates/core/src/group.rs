//! Group descriptors and the concrete quotient morphisms between them.
//!
//! A `GroupSpec` names one of the supported families together with its
//! dimension. Free products are n-ary with ordered factors and get flattened;
//! their generators live in the diagonal blocks of a (sum of factor
//! dimensions)-sized index square, so letters carry their factor implicitly.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::ratmat::RationalMatrix;
use crate::value::Value;
use crate::word::{Letter, Word, WordSum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    OClassical,
    OPlus,
    UClassical,
    UPlus,
    SClassical,
    SPlus,
    Torus,
    FreeProduct,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupSpec {
    family: Family,
    n: usize,
    factors: Vec<GroupSpec>,
}

impl GroupSpec {
    pub fn make(family: Family, n: usize) -> Result<Self> {
        match family {
            Family::FreeProduct => Err(Error::argument(
                "free products are built with GroupSpec::free_product",
            )),
            Family::Torus if n != 1 => Err(Error::argument("the torus has dimension 1")),
            _ if n == 0 => Err(Error::argument("dimension parameter must be positive")),
            _ => Ok(GroupSpec {
                family,
                n,
                factors: Vec::new(),
            }),
        }
    }

    /// N-ary free product; nested free products are flattened.
    pub fn free_product(factors: Vec<GroupSpec>) -> Result<Self> {
        let mut flat = Vec::new();
        for f in factors {
            if f.family == Family::FreeProduct {
                flat.extend(f.factors);
            } else {
                flat.push(f);
            }
        }
        if flat.len() < 2 {
            return Err(Error::argument("free product needs at least 2 factors"));
        }
        let n = flat.iter().map(|f| f.n).sum();
        Ok(GroupSpec {
            family: Family::FreeProduct,
            n,
            factors: flat,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Generator matrix size: n, or the sum of factor dimensions.
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn factors(&self) -> &[GroupSpec] {
        &self.factors
    }

    pub fn is_free_product(&self) -> bool {
        self.family == Family::FreeProduct
    }

    /// Factor index and local (1-based) offset of a global row index.
    pub fn factor_of(&self, index: usize) -> Result<(usize, usize)> {
        if index == 0 || index > self.n {
            return Err(Error::argument(format!(
                "index {index} out of range 1..={}",
                self.n
            )));
        }
        if self.family != Family::FreeProduct {
            return Ok((0, index));
        }
        let mut offset = 0;
        for (fi, f) in self.factors.iter().enumerate() {
            if index <= offset + f.n {
                return Ok((fi, index - offset));
            }
            offset += f.n;
        }
        unreachable!("index within dim but not in any factor block")
    }

    /// Starting offset of a factor's diagonal block.
    pub fn factor_offset(&self, factor: usize) -> usize {
        self.factors.iter().take(factor).map(|f| f.n).sum()
    }

    /// Whether the generator at this row has a self-adjoint entry, so star
    /// flags normalize away at word construction.
    pub fn letter_self_adjoint(&self, row: usize) -> Result<bool> {
        match self.family {
            Family::OClassical | Family::OPlus | Family::SClassical | Family::SPlus => Ok(true),
            Family::UClassical | Family::UPlus | Family::Torus => Ok(false),
            Family::FreeProduct => {
                let (fi, local) = self.factor_of(row)?;
                self.factors[fi].letter_self_adjoint(local)
            }
        }
    }

    /// Column range a letter at this row may use (the factor's diagonal
    /// block for free products, 1..=n otherwise).
    pub fn column_range(&self, row: usize) -> Result<std::ops::RangeInclusive<usize>> {
        if row == 0 || row > self.n {
            return Err(Error::argument(format!(
                "row {row} out of range 1..={}",
                self.n
            )));
        }
        if self.family != Family::FreeProduct {
            return Ok(1..=self.n);
        }
        let (fi, _) = self.factor_of(row)?;
        let off = self.factor_offset(fi);
        Ok(off + 1..=off + self.factors[fi].n)
    }

    /// All valid generator positions, in row-major order.
    pub fn generator_positions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for row in 1..=self.n {
            for col in self.column_range(row).expect("row in range") {
                out.push((row, col));
            }
        }
        out
    }

    /// Parse the CLI group grammar: `o:<n>`, `o+:<n>`, `u:<n>`, `u+:<n>`,
    /// `s:<m>`, `s+:<m>`, `t`, `free(spec,spec,...)`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "t" {
            return GroupSpec::make(Family::Torus, 1);
        }
        if let Some(inner) = text.strip_prefix("free(").and_then(|s| s.strip_suffix(')')) {
            let mut factors = Vec::new();
            let mut depth = 0usize;
            let mut start = 0usize;
            for (i, ch) in inner.char_indices() {
                match ch {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    ',' if depth == 0 => {
                        factors.push(GroupSpec::parse(&inner[start..i])?);
                        start = i + 1;
                    }
                    _ => {}
                }
            }
            factors.push(GroupSpec::parse(&inner[start..])?);
            return GroupSpec::free_product(factors);
        }
        let (name, dim) = text
            .split_once(':')
            .ok_or_else(|| Error::argument(format!("unrecognized group name: {text}")))?;
        let n: usize = dim
            .parse()
            .map_err(|_| Error::argument(format!("bad dimension in group name: {text}")))?;
        let family = match name {
            "o" => Family::OClassical,
            "o+" => Family::OPlus,
            "u" => Family::UClassical,
            "u+" => Family::UPlus,
            "s" => Family::SClassical,
            "s+" => Family::SPlus,
            _ => return Err(Error::argument(format!("unrecognized group family: {name}"))),
        };
        GroupSpec::make(family, n)
    }

    pub fn name(&self) -> String {
        match self.family {
            Family::OClassical => format!("o:{}", self.n),
            Family::OPlus => format!("o+:{}", self.n),
            Family::UClassical => format!("u:{}", self.n),
            Family::UPlus => format!("u+:{}", self.n),
            Family::SClassical => format!("s:{}", self.n),
            Family::SPlus => format!("s+:{}", self.n),
            Family::Torus => "t".to_string(),
            Family::FreeProduct => {
                let names: Vec<String> = self.factors.iter().map(|f| f.name()).collect();
                format!("free({})", names.join(","))
            }
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Rotation parameter for the fixed-vector quotient.
#[derive(Clone, Debug)]
pub enum Rotation {
    Identity,
    /// Exact orthogonal matrix (e.g. built from Pythagorean-triple Givens
    /// rotations); keeps the whole morphism rational.
    Exact(RationalMatrix),
    /// Row-major n*n floats, orthogonal within 1e-12.
    Numeric(Vec<f64>),
}

impl Rotation {
    fn entry(&self, n: usize, r: usize, c: usize) -> Value {
        match self {
            Rotation::Identity => {
                if r == c {
                    Value::one()
                } else {
                    Value::zero()
                }
            }
            Rotation::Exact(m) => Value::Exact(m.get(r, c).clone()),
            Rotation::Numeric(v) => Value::from_f64(v[r * n + c]),
        }
    }

    fn check_orthogonal(&self, n: usize) -> Result<()> {
        match self {
            Rotation::Identity => Ok(()),
            Rotation::Exact(m) => {
                if m.rows() != n || m.cols() != n {
                    return Err(Error::argument("rotation has wrong shape"));
                }
                let prod = m.transpose().mul(m)?;
                if prod != RationalMatrix::identity(n) {
                    return Err(Error::argument("exact rotation is not orthogonal"));
                }
                Ok(())
            }
            Rotation::Numeric(v) => {
                if v.len() != n * n {
                    return Err(Error::argument("rotation has wrong shape"));
                }
                for i in 0..n {
                    for j in 0..n {
                        let dot: f64 = (0..n).map(|k| v[k * n + i] * v[k * n + j]).sum();
                        let target = if i == j { 1.0 } else { 0.0 };
                        if (dot - target).abs() > 1e-12 {
                            return Err(Error::argument(format!(
                                "rotation not orthogonal within 1e-12 (RtR[{i}][{j}] = {dot})"
                            )));
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

/// A quotient morphism given by its generator images. Images of starred
/// generators are derived by taking adjoints, so the map is a *-homomorphism
/// by construction; coproduct intertwining is a checkable property.
#[derive(Clone, Debug)]
pub struct Morphism {
    pub name: String,
    pub source: GroupSpec,
    pub target: GroupSpec,
    images: BTreeMap<(usize, usize), WordSum>,
}

impl Morphism {
    fn new(
        name: impl Into<String>,
        source: GroupSpec,
        target: GroupSpec,
        images: BTreeMap<(usize, usize), WordSum>,
    ) -> Self {
        Morphism {
            name: name.into(),
            source,
            target,
            images,
        }
    }

    pub fn image(&self, row: usize, col: usize) -> Result<&WordSum> {
        self.images.get(&(row, col)).ok_or_else(|| {
            Error::argument(format!(
                "generator ({row},{col}) has no image under {}",
                self.name
            ))
        })
    }

    /// Push a word through the morphism: product of generator images,
    /// star letters via the image adjoint.
    pub fn apply_word(&self, w: &Word, caps: &Caps) -> Result<WordSum> {
        if *w.group() != self.source {
            return Err(Error::argument(format!(
                "word lives on {} but morphism {} starts at {}",
                w.group(),
                self.name,
                self.source
            )));
        }
        let mut acc = WordSum::unit(self.target.clone());
        for letter in w.letters() {
            let img = self.image(letter.row, letter.col)?;
            let img = if letter.starred { img.adjoint()? } else { img.clone() };
            acc = acc.mul(&img, caps)?;
            if acc.is_zero() {
                return Ok(acc);
            }
        }
        Ok(acc)
    }

    pub fn apply_sum(&self, ws: &WordSum, caps: &Caps) -> Result<WordSum> {
        let mut acc = WordSum::zero(self.target.clone());
        for (word, coeff) in ws.terms() {
            let img = self.apply_word(&word, caps)?;
            acc.add_scaled(&img, coeff.clone())?;
        }
        Ok(acc)
    }

    /// Composition target-after-source: `self` then `next`.
    pub fn then(&self, next: &Morphism, caps: &Caps) -> Result<Morphism> {
        if self.target != next.source {
            return Err(Error::argument(format!(
                "cannot compose {} (into {}) with {} (from {})",
                self.name, self.target, next.name, next.source
            )));
        }
        let mut images = BTreeMap::new();
        for (&pos, img) in &self.images {
            images.insert(pos, next.apply_sum(img, caps)?);
        }
        Ok(Morphism::new(
            format!("{}∘{}", next.name, self.name),
            self.source.clone(),
            next.target.clone(),
            images,
        ))
    }

    /// Max-abs residual of coproduct intertwining on all generators:
    /// (π⊗π)Δ(u_ij) versus Δ(π(u_ij)), compared termwise as tensor sums.
    /// Exactly zero (as a rational) for morphisms with exact coefficients.
    pub fn coproduct_intertwining_residual(&self, caps: &Caps) -> Result<Value> {
        let mut worst = Value::zero();
        for (row, col) in self.source.generator_positions() {
            let mut lhs: BTreeMap<(Vec<Letter>, Vec<Letter>), Value> = BTreeMap::new();
            for mid in self.source.column_range(row)? {
                // (π ⊗ π) of u_{row,mid} ⊗ u_{mid,col}; off-block middle
                // positions in free products contribute nothing.
                if !self.source.column_range(mid)?.contains(&col) {
                    continue;
                }
                let left = self.image(row, mid)?;
                let right = self.image(mid, col)?;
                for (lw, lc) in left.terms() {
                    for (rw, rc) in right.terms() {
                        let key = (lw.key(), rw.key());
                        let add = lc.clone() * rc.clone();
                        let entry = lhs.remove(&key).unwrap_or_else(Value::zero) + add;
                        if !entry.is_zero() {
                            lhs.insert(key, entry);
                        }
                    }
                }
            }
            let mut rhs: BTreeMap<(Vec<Letter>, Vec<Letter>), Value> = BTreeMap::new();
            for (word, coeff) in self.image(row, col)?.terms() {
                for (lw, rw) in word.coproduct_expand(caps)? {
                    let key = (lw.key(), rw.key());
                    let entry = rhs.remove(&key).unwrap_or_else(Value::zero) + coeff.clone();
                    if !entry.is_zero() {
                        rhs.insert(key, entry);
                    }
                }
            }
            let keys: std::collections::BTreeSet<_> =
                lhs.keys().chain(rhs.keys()).cloned().collect();
            for key in keys {
                let l = lhs.get(&key).cloned().unwrap_or_else(Value::zero);
                let r = rhs.get(&key).cloned().unwrap_or_else(Value::zero);
                let diff = match l - r {
                    Value::Exact(d) => Value::Exact(d.abs()),
                    Value::Approx(c) => Value::from_f64(c.norm()),
                };
                let larger = diff.abs_f64() > worst.abs_f64();
                let degrades = !diff.is_exact() && worst.is_exact();
                if larger || (degrades && !diff.is_zero()) {
                    worst = diff;
                }
            }
        }
        Ok(worst)
    }
}

fn single_letter_sum(group: &GroupSpec, row: usize, col: usize) -> Result<WordSum> {
    let w = Word::new(group.clone(), vec![Letter::plain(row, col)])?;
    Ok(WordSum::from_word(w, Value::one()))
}

/// The identity-on-symbols quotient onto the classical orthogonal group.
pub fn morphism_abelianize(n: usize) -> Result<Morphism> {
    let source = GroupSpec::make(Family::OPlus, n)?;
    let target = GroupSpec::make(Family::OClassical, n)?;
    let mut images = BTreeMap::new();
    for (i, j) in source.generator_positions() {
        images.insert((i, j), single_letter_sum(&target, i, j)?);
    }
    Ok(Morphism::new("abelianize", source, target, images))
}

/// Quotient fixing the vector R·e_n: u ↦ Rᵗ(v ⊕ 1)R entrywise. With R = I
/// this is u_ij ↦ v_ij for i,j < n, u_nn ↦ 1, last row/column off-entries ↦ 0.
pub fn morphism_fix_vector(n: usize, rotation: Rotation) -> Result<Morphism> {
    if n < 2 {
        return Err(Error::argument("fixed-vector quotient needs n >= 2"));
    }
    rotation.check_orthogonal(n)?;
    let source = GroupSpec::make(Family::OPlus, n)?;
    let target = GroupSpec::make(Family::OPlus, n - 1)?;
    let mut images = BTreeMap::new();
    for (i, j) in source.generator_positions() {
        let mut sum = WordSum::zero(target.clone());
        for a in 1..=n {
            for b in 1..=n {
                // (v ⊕ 1)_{ab}: generator for a,b < n, the unit for a=b=n.
                let coeff = rotation.entry(n, a - 1, i - 1) * rotation.entry(n, b - 1, j - 1);
                if coeff.is_zero() {
                    continue;
                }
                if a < n && b < n {
                    let w = Word::new(target.clone(), vec![Letter::plain(a, b)])?;
                    sum.add_term(w, coeff)?;
                } else if a == n && b == n {
                    sum.add_term(Word::unit(target.clone()), coeff)?;
                }
            }
        }
        images.insert((i, j), sum);
    }
    Ok(Morphism::new("fix-vector", source, target, images))
}

/// Block-diagonal quotient onto a free product of two half-size factors.
pub fn morphism_block_split(n: usize) -> Result<Morphism> {
    let source = GroupSpec::make(Family::OPlus, 2 * n)?;
    let factor = GroupSpec::make(Family::OPlus, n)?;
    let target = GroupSpec::free_product(vec![factor.clone(), factor])?;
    let mut images = BTreeMap::new();
    for (i, j) in source.generator_positions() {
        let in_first = i <= n && j <= n;
        let in_second = i > n && j > n;
        let img = if in_first || in_second {
            single_letter_sum(&target, i, j)?
        } else {
            WordSum::zero(target.clone())
        };
        images.insert((i, j), img);
    }
    Ok(Morphism::new("block-split", source, target, images))
}

/// Quotient onto the classical permutation group: u_ij ↦ the 0/1 coordinate
/// function σ ↦ δ_{i,σ(j)}.
pub fn morphism_to_perm(m: usize) -> Result<Morphism> {
    let source = GroupSpec::make(Family::OPlus, m)?;
    let target = GroupSpec::make(Family::SClassical, m)?;
    let mut images = BTreeMap::new();
    for (i, j) in source.generator_positions() {
        images.insert((i, j), single_letter_sum(&target, i, j)?);
    }
    Ok(Morphism::new("to-perm", source, target, images))
}

/// The unitary splitting u_ij ↦ z·a_ij into the free product of the torus and
/// the orthogonal free factor.
pub fn morphism_unitary_split(n: usize) -> Result<Morphism> {
    let source = GroupSpec::make(Family::UPlus, n)?;
    let torus = GroupSpec::make(Family::Torus, 1)?;
    let ortho = GroupSpec::make(Family::OPlus, n)?;
    let target = GroupSpec::free_product(vec![torus, ortho])?;
    let mut images = BTreeMap::new();
    for (i, j) in source.generator_positions() {
        let w = Word::new(
            target.clone(),
            vec![Letter::plain(1, 1), Letter::plain(1 + i, 1 + j)],
        )?;
        images.insert((i, j), WordSum::from_word(w, Value::one()));
    }
    Ok(Morphism::new("unitary-split", source, target, images))
}

/// Exact orthogonal Givens rotation in the (axis_a, axis_b) plane with a
/// Pythagorean cosine/sine pair, handy for exact fixed-vector experiments.
pub fn rational_givens(
    n: usize,
    axis_a: usize,
    axis_b: usize,
    cos: BigRational,
    sin: BigRational,
) -> Result<RationalMatrix> {
    if axis_a == axis_b || axis_a >= n || axis_b >= n {
        return Err(Error::argument("bad rotation axes"));
    }
    if &cos * &cos + &sin * &sin != BigRational::one() {
        return Err(Error::argument("cos² + sin² must equal 1 exactly"));
    }
    let mut m = RationalMatrix::identity(n);
    m.set(axis_a, axis_a, cos.clone());
    m.set(axis_b, axis_b, cos);
    m.set(axis_a, axis_b, -sin.clone());
    m.set(axis_b, axis_a, sin);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratmat::big_rat;

    #[test]
    fn make_and_parse_groups() {
        let g = GroupSpec::make(Family::OPlus, 4).unwrap();
        assert_eq!(g.name(), "o+:4");
        assert_eq!(GroupSpec::parse("o+:4").unwrap(), g);
        assert_eq!(GroupSpec::parse("t").unwrap().dim(), 1);
        assert!(GroupSpec::make(Family::OPlus, 0).is_err());
        assert!(GroupSpec::make(Family::Torus, 2).is_err());

        let fp = GroupSpec::parse("free(o+:2,o+:2)").unwrap();
        assert_eq!(fp.dim(), 4);
        assert_eq!(fp.factors().len(), 2);
        assert_eq!(fp.name(), "free(o+:2,o+:2)");

        // Nested free products flatten.
        let nested = GroupSpec::parse("free(t,free(o+:2,o+:2))").unwrap();
        assert_eq!(nested.factors().len(), 3);
    }

    #[test]
    fn free_product_blocks() {
        let fp = GroupSpec::parse("free(t,o+:3)").unwrap();
        assert_eq!(fp.factor_of(1).unwrap(), (0, 1));
        assert_eq!(fp.factor_of(2).unwrap(), (1, 1));
        assert_eq!(fp.factor_of(4).unwrap(), (1, 3));
        assert_eq!(fp.column_range(1).unwrap(), 1..=1);
        assert_eq!(fp.column_range(3).unwrap(), 2..=4);
        assert!(!fp.letter_self_adjoint(1).unwrap());
        assert!(fp.letter_self_adjoint(2).unwrap());
        // 1 + 9 valid generator positions.
        assert_eq!(fp.generator_positions().len(), 10);
    }

    #[test]
    fn fix_vector_identity_images() {
        let caps = Caps::default();
        let m = morphism_fix_vector(4, Rotation::Identity).unwrap();
        let img = m.image(4, 4).unwrap();
        assert_eq!(img.terms().count(), 1);
        let (w, c) = img.terms().next().unwrap();
        assert_eq!(w.degree(), 0);
        assert_eq!(*c, Value::one());
        assert!(m.image(1, 4).unwrap().is_zero());
        let img13 = m.image(1, 3).unwrap();
        let (w, _) = img13.terms().next().unwrap();
        assert_eq!(w.letters(), &[Letter::plain(1, 3)]);
        assert!(m
            .coproduct_intertwining_residual(&caps)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn shipped_morphisms_intertwine_coproducts_exactly() {
        let caps = Caps::default();
        let morphisms = vec![
            morphism_abelianize(3).unwrap(),
            morphism_fix_vector(3, Rotation::Identity).unwrap(),
            morphism_block_split(2).unwrap(),
            morphism_to_perm(3).unwrap(),
            morphism_unitary_split(2).unwrap(),
        ];
        for m in morphisms {
            let residual = m.coproduct_intertwining_residual(&caps).unwrap();
            assert!(residual.is_zero(), "{} residual {}", m.name, residual);
            assert!(residual.is_exact());
        }
    }

    #[test]
    fn rotated_fix_vector_intertwines() {
        let caps = Caps::default();
        // Exact 3-4-5 rotation in the (0, 3) plane.
        let r = rational_givens(4, 0, 3, big_rat(3, 5), big_rat(4, 5)).unwrap();
        let m = morphism_fix_vector(4, Rotation::Exact(r)).unwrap();
        let residual = m.coproduct_intertwining_residual(&caps).unwrap();
        assert!(residual.is_zero());
        assert!(residual.is_exact());

        // Same rotation as floats goes through the numeric path.
        let theta = (4.0f64 / 3.0).atan();
        let (c, s) = (theta.cos(), theta.sin());
        let mut num = vec![0.0; 16];
        for i in 0..4 {
            num[i * 4 + i] = 1.0;
        }
        num[0] = c;
        num[15] = c;
        num[3] = -s;
        num[12] = s;
        let m = morphism_fix_vector(4, Rotation::Numeric(num)).unwrap();
        let residual = m.coproduct_intertwining_residual(&caps).unwrap();
        assert!(residual.abs_f64() <= 1e-10, "residual {residual}");
    }

    #[test]
    fn non_orthogonal_rotation_rejected() {
        let num = vec![1.0, 0.5, 0.0, 1.0];
        assert!(morphism_fix_vector(2, Rotation::Numeric(num)).is_err());
    }

    #[test]
    fn unitary_split_star_images() {
        let caps = Caps::default();
        let m = morphism_unitary_split(2).unwrap();
        let u = GroupSpec::make(Family::UPlus, 2).unwrap();
        let w = Word::parse("1,1;1,1*", &u).unwrap();
        let img = m.apply_word(&w, &caps).unwrap();
        // z a11 a11 z*: a single term of degree 4.
        assert_eq!(img.terms().count(), 1);
        let (word, coeff) = img.terms().next().unwrap();
        assert_eq!(*coeff, Value::one());
        assert_eq!(
            word.letters(),
            &[
                Letter::plain(1, 1),
                Letter::plain(2, 2),
                Letter::plain(2, 2),
                Letter::new(1, 1, true),
            ]
        );
    }

    #[test]
    fn block_split_images() {
        let caps = Caps::default();
        let m = morphism_block_split(2).unwrap();
        let o4 = GroupSpec::make(Family::OPlus, 4).unwrap();
        let w = Word::parse("1,3", &o4).unwrap();
        assert!(m.apply_word(&w, &caps).unwrap().is_zero());
        let w = Word::parse("3,3", &o4).unwrap();
        let img = m.apply_word(&w, &caps).unwrap();
        let (word, _) = img.terms().next().unwrap();
        assert_eq!(word.letters(), &[Letter::plain(3, 3)]);
    }

    #[test]
    fn fix_vector_maps_relations_onto_target_relations() {
        // With R = I, pushing the source relation row Σ_k u_ik u_jk through
        // the quotient lands exactly on the target relation row (plus the
        // unit where the fixed coordinate contributes), as word sums.
        let caps = Caps::default();
        let n = 4usize;
        let m = morphism_fix_vector(n, Rotation::Identity).unwrap();
        let target = m.target.clone();
        for i in 1..=n {
            for j in 1..=n {
                let mut pushed = WordSum::zero(target.clone());
                for k in 1..=n {
                    let a = m.image(i, k).unwrap();
                    let b = m.image(j, k).unwrap();
                    pushed.add_scaled(&a.mul(b, &caps).unwrap(), Value::one()).unwrap();
                }
                let mut expect = WordSum::zero(target.clone());
                if i < n && j < n {
                    for k in 1..n {
                        let w = Word::new(
                            target.clone(),
                            vec![Letter::plain(i, k), Letter::plain(j, k)],
                        )
                        .unwrap();
                        expect.add_term(w, Value::one()).unwrap();
                    }
                } else if i == n && j == n {
                    expect.add_term(Word::unit(target.clone()), Value::one()).unwrap();
                }
                let lhs: Vec<_> = pushed.terms().map(|(w, c)| (w.key(), c.clone())).collect();
                let rhs: Vec<_> = expect.terms().map(|(w, c)| (w.key(), c.clone())).collect();
                assert_eq!(lhs, rhs, "relation row ({i},{j})");
            }
        }
    }

    #[test]
    fn composition_applies_both_maps() {
        let caps = Caps::default();
        let fix = morphism_fix_vector(4, Rotation::Identity).unwrap();
        let ab = morphism_abelianize(3).unwrap();
        let comp = fix.then(&ab, &caps).unwrap();
        assert_eq!(comp.source, GroupSpec::make(Family::OPlus, 4).unwrap());
        assert_eq!(comp.target, GroupSpec::make(Family::OClassical, 3).unwrap());
        let o4 = GroupSpec::make(Family::OPlus, 4).unwrap();
        let w = Word::parse("4,4", &o4).unwrap();
        let img = comp.apply_word(&w, &caps).unwrap();
        let (word, coeff) = img.terms().next().unwrap();
        assert_eq!(word.degree(), 0);
        assert_eq!(*coeff, Value::one());
    }
}
