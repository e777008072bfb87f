//! Monomials in the generators u_ij and their adjoints, with the Hopf
//! structure maps: coproduct expansion, antipode, counit, involution.
//!
//! Words live in the free *-algebra on the generators; defining relations are
//! never used for rewriting. Every consumer is a linear functional or linear
//! map evaluated on monomials, and the relations are checked downstream as
//! identities of evaluations. Star flags on self-adjoint-entry families are
//! normalized away at construction so canonical forms are unambiguous.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::group::GroupSpec;
use crate::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub row: usize,
    pub col: usize,
    pub starred: bool,
}

impl Letter {
    pub fn new(row: usize, col: usize, starred: bool) -> Self {
        Letter { row, col, starred }
    }

    pub fn plain(row: usize, col: usize) -> Self {
        Letter::new(row, col, false)
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}{}", self.row, self.col, if self.starred { "*" } else { "" })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Word {
    group: GroupSpec,
    letters: Vec<Letter>,
}

impl Word {
    /// Builds a word, checking index ranges (including free-product block
    /// membership) and normalizing stars on self-adjoint entries.
    pub fn new(group: GroupSpec, letters: Vec<Letter>) -> Result<Self> {
        let mut canon = Vec::with_capacity(letters.len());
        for mut l in letters {
            let range = group.column_range(l.row)?;
            if !range.contains(&l.col) {
                return Err(Error::argument(format!(
                    "letter {} out of range for group {group}",
                    l
                )));
            }
            if l.starred && group.letter_self_adjoint(l.row)? {
                l.starred = false;
            }
            canon.push(l);
        }
        Ok(Word {
            group,
            letters: canon,
        })
    }

    pub fn unit(group: GroupSpec) -> Self {
        Word {
            group,
            letters: Vec::new(),
        }
    }

    /// Word grammar: `word := letter (';' letter)*`, `letter := int ',' int '*'?`,
    /// 1-based indices, whitespace ignored. The empty string is the unit.
    pub fn parse(text: &str, group: &GroupSpec) -> Result<Self> {
        let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if cleaned.is_empty() {
            return Ok(Word::unit(group.clone()));
        }
        let mut letters = Vec::new();
        for piece in cleaned.split(';') {
            let (body, starred) = match piece.strip_suffix('*') {
                Some(rest) => (rest, true),
                None => (piece, false),
            };
            let (r, c) = body
                .split_once(',')
                .ok_or_else(|| Error::argument(format!("bad letter syntax: {piece:?}")))?;
            let row: usize = r
                .parse()
                .map_err(|_| Error::argument(format!("bad row index: {r:?}")))?;
            let col: usize = c
                .parse()
                .map_err(|_| Error::argument(format!("bad column index: {c:?}")))?;
            letters.push(Letter::new(row, col, starred));
        }
        Word::new(group.clone(), letters)
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn degree(&self) -> usize {
        self.letters.len()
    }

    /// Letter sequence, usable as a map key within a fixed group context.
    pub fn key(&self) -> Vec<Letter> {
        self.letters.clone()
    }

    pub fn concat(&self, other: &Word) -> Result<Word> {
        if self.group != other.group {
            return Err(Error::argument("concatenating words from different groups"));
        }
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Ok(Word {
            group: self.group.clone(),
            letters,
        })
    }

    /// The *-involution: reverse order, toggle stars (then normalize).
    pub fn adjoint(&self) -> Word {
        let letters = self
            .letters
            .iter()
            .rev()
            .map(|l| Letter::new(l.row, l.col, !l.starred))
            .collect();
        Word::new(self.group.clone(), letters).expect("adjoint of a valid word is valid")
    }

    /// The antipode: reverse order, each letter (i,j,s) ↦ (j,i,¬s), with the
    /// usual normalization for self-adjoint entries.
    pub fn antipode(&self) -> Word {
        let letters = self
            .letters
            .iter()
            .rev()
            .map(|l| Letter::new(l.col, l.row, !l.starred))
            .collect();
        Word::new(self.group.clone(), letters).expect("antipode of a valid word is valid")
    }

    /// Counit: product of δ_{row,col} over letters; 1 on the empty word.
    pub fn counit(&self) -> BigRational {
        if self.letters.iter().all(|l| l.row == l.col) {
            BigRational::one()
        } else {
            BigRational::zero()
        }
    }

    /// Multiplicative coproduct expansion: one (left, right) pair per choice
    /// of middle index for each letter, middle indices ranging over the
    /// letter's block. Star flags copy to both sides.
    pub fn coproduct_expand(&self, caps: &Caps) -> Result<Vec<(Word, Word)>> {
        if self.degree() > caps.max_word_degree {
            return Err(Error::resource(format!(
                "word degree {} exceeds cap {}",
                self.degree(),
                caps.max_word_degree
            )));
        }
        let ranges: Vec<Vec<usize>> = self
            .letters
            .iter()
            .map(|l| self.group.column_range(l.row).map(|r| r.collect()))
            .collect::<Result<_>>()?;
        let total: usize = ranges.iter().map(|r| r.len()).try_fold(1usize, |acc, k| {
            acc.checked_mul(k).filter(|&t| t <= caps.max_coproduct_pairs)
        })
        .ok_or_else(|| {
            Error::resource(format!(
                "coproduct expansion exceeds {} pairs",
                caps.max_coproduct_pairs
            ))
        })?;
        let mut out = Vec::with_capacity(total);
        let mut mid = vec![0usize; self.degree()];
        loop {
            let mut left = Vec::with_capacity(self.degree());
            let mut right = Vec::with_capacity(self.degree());
            for (t, l) in self.letters.iter().enumerate() {
                let k = ranges[t][mid[t]];
                left.push(Letter::new(l.row, k, l.starred));
                right.push(Letter::new(k, l.col, l.starred));
            }
            out.push((
                Word::new(self.group.clone(), left)?,
                Word::new(self.group.clone(), right)?,
            ));
            // Mixed-radix increment over middle indices.
            let mut t = self.degree();
            loop {
                if t == 0 {
                    return Ok(out);
                }
                t -= 1;
                mid[t] += 1;
                if mid[t] < ranges[t].len() {
                    break;
                }
                mid[t] = 0;
            }
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.letters.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join(";"))
    }
}

/// Finite linear combination of words; no zero coefficients stored, term
/// order canonical (lexicographic on letter sequences).
#[derive(Clone, Debug)]
pub struct WordSum {
    group: GroupSpec,
    terms: BTreeMap<Vec<Letter>, Value>,
}

impl WordSum {
    pub fn zero(group: GroupSpec) -> Self {
        WordSum {
            group,
            terms: BTreeMap::new(),
        }
    }

    pub fn unit(group: GroupSpec) -> Self {
        let mut s = Self::zero(group);
        s.terms.insert(Vec::new(), Value::one());
        s
    }

    pub fn from_word(word: Word, coeff: Value) -> Self {
        let mut s = Self::zero(word.group().clone());
        if !coeff.is_zero() {
            s.terms.insert(word.key(), coeff);
        }
        s
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, word: Word, coeff: Value) -> Result<()> {
        if *word.group() != self.group {
            return Err(Error::argument("adding a word from a different group"));
        }
        if coeff.is_zero() {
            return Ok(());
        }
        let key = word.key();
        let cur = self.terms.remove(&key).unwrap_or_else(Value::zero);
        let next = cur + coeff;
        if !next.is_zero() {
            self.terms.insert(key, next);
        }
        Ok(())
    }

    pub fn add_scaled(&mut self, other: &WordSum, scale: Value) -> Result<()> {
        if scale.is_zero() {
            return Ok(());
        }
        for (word, coeff) in other.terms() {
            self.add_term(word.clone(), coeff.clone() * scale.clone())?;
        }
        Ok(())
    }

    pub fn scale(&self, s: &Value) -> WordSum {
        let mut out = Self::zero(self.group.clone());
        if s.is_zero() {
            return out;
        }
        for (key, coeff) in &self.terms {
            out.terms.insert(key.clone(), coeff.clone() * s.clone());
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (Word, &Value)> + '_ {
        self.terms.iter().map(|(key, v)| {
            (
                Word::new(self.group.clone(), key.clone()).expect("stored keys are valid"),
                v,
            )
        })
    }

    /// Product: concatenation of words, product of coefficients.
    pub fn mul(&self, other: &WordSum, caps: &Caps) -> Result<WordSum> {
        if self.group != other.group {
            return Err(Error::argument("multiplying sums over different groups"));
        }
        let bound = self.terms.len().saturating_mul(other.terms.len());
        if bound > caps.max_wordsum_terms {
            return Err(Error::resource(format!(
                "word-sum product would reach {bound} terms (cap {})",
                caps.max_wordsum_terms
            )));
        }
        let mut out = Self::zero(self.group.clone());
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                let mut key = ka.clone();
                key.extend_from_slice(kb);
                let add = va.clone() * vb.clone();
                if add.is_zero() {
                    continue;
                }
                let cur = out.terms.remove(&key).unwrap_or_else(Value::zero);
                let next = cur + add;
                if !next.is_zero() {
                    out.terms.insert(key, next);
                }
            }
        }
        Ok(out)
    }

    /// Termwise adjoint (coefficients conjugate, words reverse-star).
    pub fn adjoint(&self) -> Result<WordSum> {
        let mut out = Self::zero(self.group.clone());
        for (word, coeff) in self.terms() {
            out.add_term(word.adjoint(), coeff.conj())?;
        }
        Ok(out)
    }
}

impl fmt::Display for WordSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms()
            .map(|(w, c)| format!("({c})·[{w}]"))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Family;

    fn o2p() -> GroupSpec {
        GroupSpec::make(Family::OPlus, 2).unwrap()
    }

    fn u2p() -> GroupSpec {
        GroupSpec::make(Family::UPlus, 2).unwrap()
    }

    #[test]
    fn parse_and_normalize() {
        let w = Word::parse("1,1;1,2", &o2p()).unwrap();
        assert_eq!(w.letters(), &[Letter::plain(1, 1), Letter::plain(1, 2)]);

        // Stars on self-adjoint entries normalize away.
        let w = Word::parse("1,1*", &o2p()).unwrap();
        assert_eq!(w.letters(), &[Letter::plain(1, 1)]);

        // Unitary entries keep their star.
        let w = Word::parse("1,1*", &u2p()).unwrap();
        assert_eq!(w.letters(), &[Letter::new(1, 1, true)]);

        assert!(Word::parse("1,3", &o2p()).is_err());
        assert!(Word::parse("0,1", &o2p()).is_err());
        assert!(Word::parse("1;2", &o2p()).is_err());
    }

    #[test]
    fn parse_rejects_cross_block_letters() {
        let fp = GroupSpec::parse("free(t,o+:2)").unwrap();
        assert!(Word::parse("1,2", &fp).is_err());
        assert!(Word::parse("2,2", &fp).is_ok());
    }

    #[test]
    fn adjoint_reverses_and_toggles() {
        let w = Word::parse("1,1;1,2", &o2p()).unwrap();
        let adj = w.adjoint();
        assert_eq!(adj.letters(), &[Letter::plain(1, 2), Letter::plain(1, 1)]);

        let w = Word::parse("1,1*", &u2p()).unwrap();
        assert_eq!(w.adjoint().letters(), &[Letter::plain(1, 1)]);

        let e = Word::unit(o2p());
        assert_eq!(e.adjoint(), e);
    }

    #[test]
    fn antipode_examples() {
        let w = Word::parse("1,2", &o2p()).unwrap();
        assert_eq!(w.antipode().letters(), &[Letter::plain(2, 1)]);

        let w = Word::parse("1,1;1,2", &o2p()).unwrap();
        assert_eq!(
            w.antipode().letters(),
            &[Letter::plain(2, 1), Letter::plain(1, 1)]
        );

        // κ(u_ij) = u_ji* on unitary entries.
        let w = Word::parse("1,2", &u2p()).unwrap();
        assert_eq!(w.antipode().letters(), &[Letter::new(2, 1, true)]);
    }

    #[test]
    fn counit_examples() {
        assert!(Word::parse("1,1;2,2", &o2p()).unwrap().counit().is_one());
        assert!(Word::parse("1,2", &o2p()).unwrap().counit().is_zero());
        assert!(Word::unit(o2p()).counit().is_one());
    }

    #[test]
    fn coproduct_of_single_letter() {
        let caps = Caps::default();
        let w = Word::parse("1,1", &o2p()).unwrap();
        let pairs = w.coproduct_expand(&caps).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].0.letters(), &[Letter::plain(1, 1)]);
        assert_eq!(pairs[0].1.letters(), &[Letter::plain(1, 1)]);
        assert_eq!(pairs[1].0.letters(), &[Letter::plain(1, 2)]);
        assert_eq!(pairs[1].1.letters(), &[Letter::plain(2, 1)]);
    }

    #[test]
    fn coproduct_of_unit_and_degree_two() {
        let caps = Caps::default();
        let e = Word::unit(o2p());
        assert_eq!(e.coproduct_expand(&caps).unwrap(), vec![(e.clone(), e.clone())]);

        let w = Word::parse("1,1;1,2", &o2p()).unwrap();
        let pairs = w.coproduct_expand(&caps).unwrap();
        assert_eq!(pairs.len(), 4);
        // Middle tuple (k1,k2) enumerates {1,2}² in order.
        let expect: Vec<(Vec<Letter>, Vec<Letter>)> = vec![
            (
                vec![Letter::plain(1, 1), Letter::plain(1, 1)],
                vec![Letter::plain(1, 1), Letter::plain(1, 2)],
            ),
            (
                vec![Letter::plain(1, 1), Letter::plain(1, 2)],
                vec![Letter::plain(1, 1), Letter::plain(2, 2)],
            ),
            (
                vec![Letter::plain(1, 2), Letter::plain(1, 1)],
                vec![Letter::plain(2, 1), Letter::plain(1, 2)],
            ),
            (
                vec![Letter::plain(1, 2), Letter::plain(1, 2)],
                vec![Letter::plain(2, 1), Letter::plain(2, 2)],
            ),
        ];
        for ((l, r), (el, er)) in pairs.iter().zip(expect) {
            assert_eq!(l.letters(), el.as_slice());
            assert_eq!(r.letters(), er.as_slice());
        }
    }

    #[test]
    fn coproduct_copies_stars_to_both_legs() {
        let caps = Caps::default();
        let w = Word::parse("1,1*", &u2p()).unwrap();
        for (l, r) in w.coproduct_expand(&caps).unwrap() {
            assert!(l.letters()[0].starred);
            assert!(r.letters()[0].starred);
        }
    }

    #[test]
    fn coproduct_respects_free_product_blocks() {
        let caps = Caps::default();
        let fp = GroupSpec::parse("free(t,o+:2)").unwrap();
        // Torus letter: block size 1, single pair.
        let z = Word::parse("1,1", &fp).unwrap();
        assert_eq!(z.coproduct_expand(&caps).unwrap().len(), 1);
        // Orthogonal-block letter: block size 2.
        let a = Word::parse("2,3", &fp).unwrap();
        let pairs = a.coproduct_expand(&caps).unwrap();
        assert_eq!(pairs.len(), 2);
        for (l, r) in pairs {
            assert!(l.letters()[0].col >= 2);
            assert!(r.letters()[0].row >= 2);
        }
    }

    #[test]
    fn coproduct_cap_enforced() {
        let caps = Caps {
            max_coproduct_pairs: 3,
            ..Caps::default()
        };
        let w = Word::parse("1,1;1,2", &o2p()).unwrap();
        assert!(matches!(
            w.coproduct_expand(&caps),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn wordsum_canonicalizes() {
        let caps = Caps::default();
        let w = Word::parse("1,1", &o2p()).unwrap();
        let mut s = WordSum::from_word(w.clone(), Value::from_int(2));
        s.add_term(w.clone(), Value::from_int(-2)).unwrap();
        assert!(s.is_zero());

        let a = WordSum::from_word(w.clone(), Value::from_ratio(1, 2));
        let b = WordSum::from_word(Word::parse("1,2", &o2p()).unwrap(), Value::from_int(3));
        let prod = a.mul(&b, &caps).unwrap();
        assert_eq!(prod.len(), 1);
        let (word, coeff) = prod.terms().next().unwrap();
        assert_eq!(word.degree(), 2);
        assert_eq!(*coeff, Value::from_ratio(3, 2));
    }

    #[test]
    fn wordsum_adjoint_is_antimultiplicative() {
        let caps = Caps::default();
        let a = WordSum::from_word(Word::parse("1,1;2,1", &o2p()).unwrap(), Value::from_int(2));
        let b = WordSum::from_word(Word::parse("1,2", &o2p()).unwrap(), Value::from_ratio(1, 3));
        let lhs = a.mul(&b, &caps).unwrap().adjoint().unwrap();
        let rhs = b.adjoint().unwrap().mul(&a.adjoint().unwrap(), &caps).unwrap();
        let lhs_terms: Vec<_> = lhs.terms().map(|(w, c)| (w.key(), c.clone())).collect();
        let rhs_terms: Vec<_> = rhs.terms().map(|(w, c)| (w.key(), c.clone())).collect();
        assert_eq!(lhs_terms, rhs_terms);
    }

    proptest::proptest! {
        #[test]
        fn antipode_and_adjoint_are_involutive(letters in proptest::collection::vec((1usize..=2, 1usize..=2, proptest::bool::ANY), 0..6)) {
            let group = u2p();
            let word = Word::new(
                group,
                letters.into_iter().map(|(r, c, s)| Letter::new(r, c, s)).collect(),
            ).unwrap();
            proptest::prop_assert_eq!(word.antipode().antipode(), word.clone());
            proptest::prop_assert_eq!(word.adjoint().adjoint(), word);
        }

        #[test]
        fn adjoint_antimultiplicative_on_words(
            la in proptest::collection::vec((1usize..=2, 1usize..=2, proptest::bool::ANY), 0..4),
            lb in proptest::collection::vec((1usize..=2, 1usize..=2, proptest::bool::ANY), 0..4),
        ) {
            let group = u2p();
            let a = Word::new(group.clone(), la.into_iter().map(|(r, c, s)| Letter::new(r, c, s)).collect()).unwrap();
            let b = Word::new(group, lb.into_iter().map(|(r, c, s)| Letter::new(r, c, s)).collect()).unwrap();
            let lhs = a.concat(&b).unwrap().adjoint();
            let rhs = b.adjoint().concat(&a.adjoint()).unwrap();
            proptest::prop_assert_eq!(lhs, rhs);
        }
    }
}
