//! Exact Haar-state evaluation on words, per family:
//!
//! - easy families (O, O⁺, U, U⁺, S⁺) via the Weingarten sum
//!   h(u^ε_{i₁j₁}···u^ε_{imjm}) = Σ_{p,q} δ_p(i) δ_q(j) Wg(p,q)
//!   over the family's partition category at degree m;
//! - classical S_m by direct averaging over all m! permutations (the
//!   Weingarten route over ALL partitions stays available as a cross-check);
//! - the torus by balanced-power counting.
//!
//! Values are exact rationals throughout. Word evaluations, categories and
//! Weingarten matrices are memoized behind mutexes; insertions are
//! idempotent, so cached and uncached paths agree bit for bit.

use std::collections::HashMap;
use std::sync::Mutex;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::caps::Caps;
use crate::error::{Error, Result};
use crate::group::{Family, GroupSpec};
use crate::partition::{
    delta, enumerate_partitions, gram_matrix, weingarten_matrix, Color, FamilyKind, Partition,
    PartitionFamily,
};
use crate::ratmat::RationalMatrix;
use crate::word::{Letter, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HaarMethod {
    Weingarten,
    DirectAverage,
    Circle,
}

/// Partition category at one degree together with its Weingarten matrix.
type Category = (Vec<Partition>, RationalMatrix);

pub struct HaarOracle {
    group: GroupSpec,
    method: HaarMethod,
    /// Memo: star pattern -> (category, Weingarten matrix).
    categories: Mutex<HashMap<Vec<bool>, Category>>,
    /// Memo: canonical letter key -> value.
    values: Mutex<HashMap<Vec<Letter>, BigRational>>,
    /// All permutations of {1..m}, built once for direct averaging.
    permutations: Option<Vec<Vec<usize>>>,
}

fn factorial(m: usize) -> usize {
    (1..=m).product::<usize>().max(1)
}

fn all_permutations(m: usize) -> Vec<Vec<usize>> {
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
    let mut out = Vec::with_capacity(factorial(m));
    rec(&mut Vec::new(), &mut vec![false; m], &mut out);
    out
}

impl HaarOracle {
    pub fn new(group: GroupSpec, caps: &Caps) -> Result<Self> {
        let method = match group.family() {
            Family::SClassical => {
                let order = factorial(group.dim());
                if order > caps.max_direct_average {
                    return Err(Error::resource(format!(
                        "direct average over {order} permutations exceeds cap {}",
                        caps.max_direct_average
                    )));
                }
                HaarMethod::DirectAverage
            }
            Family::Torus => HaarMethod::Circle,
            Family::FreeProduct => {
                return Err(Error::unsupported(
                    "free-product Haar states are built as free products of factor states",
                ))
            }
            _ => HaarMethod::Weingarten,
        };
        let permutations = if method == HaarMethod::DirectAverage {
            Some(all_permutations(group.dim()))
        } else {
            None
        };
        Ok(HaarOracle {
            group,
            method,
            categories: Mutex::new(HashMap::new()),
            values: Mutex::new(HashMap::new()),
            permutations,
        })
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn method(&self) -> HaarMethod {
        self.method
    }

    /// The partition family indexing degree-m moments, or None where the
    /// family does not use partitions (torus) / uses direct averaging.
    pub fn partition_family(&self, pattern: &[bool]) -> Option<PartitionFamily> {
        let colored = || {
            pattern
                .iter()
                .map(|&s| if s { Color::Starred } else { Color::Plain })
                .collect::<Vec<_>>()
        };
        match self.group.family() {
            Family::OClassical => Some(PartitionFamily::plain(FamilyKind::Pairings).unwrap()),
            Family::OPlus => Some(PartitionFamily::plain(FamilyKind::NoncrossingPairings).unwrap()),
            Family::SClassical => Some(PartitionFamily::plain(FamilyKind::All).unwrap()),
            Family::SPlus => Some(PartitionFamily::plain(FamilyKind::Noncrossing).unwrap()),
            Family::UClassical => {
                Some(PartitionFamily::colored(FamilyKind::ColoredPairings, colored()).unwrap())
            }
            Family::UPlus => Some(
                PartitionFamily::colored(FamilyKind::NoncrossingColoredPairings, colored()).unwrap(),
            ),
            Family::Torus | Family::FreeProduct => None,
        }
    }

    fn category(&self, pattern: &[bool]) -> Result<Category> {
        if let Some(hit) = self.categories.lock().unwrap().get(pattern) {
            return Ok(hit.clone());
        }
        let family = self
            .partition_family(pattern)
            .ok_or_else(|| Error::unsupported("no partition category for this family"))?;
        let parts = enumerate_partitions(pattern.len(), &family)?;
        let wg = weingarten_matrix(&parts, self.group.dim())?;
        let entry = (parts, wg);
        self.categories
            .lock()
            .unwrap()
            .entry(pattern.to_vec())
            .or_insert_with(|| entry.clone());
        Ok(entry)
    }

    fn check_word(&self, w: &Word) -> Result<()> {
        if *w.group() != self.group {
            return Err(Error::argument(format!(
                "word on {} evaluated against Haar state of {}",
                w.group(),
                self.group
            )));
        }
        Ok(())
    }

    /// Exact Haar value of a word.
    pub fn value(&self, w: &Word) -> Result<BigRational> {
        self.check_word(w)?;
        let key = w.key();
        if let Some(hit) = self.values.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let computed = match self.method {
            HaarMethod::Circle => self.value_circle(w),
            HaarMethod::DirectAverage => self.value_direct_average(w),
            HaarMethod::Weingarten => self.value_weingarten(w),
        }?;
        self.values
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| computed.clone());
        Ok(computed)
    }

    fn value_circle(&self, w: &Word) -> Result<BigRational> {
        let plain = w.letters().iter().filter(|l| !l.starred).count();
        let starred = w.degree() - plain;
        Ok(if plain == starred {
            BigRational::one()
        } else {
            BigRational::zero()
        })
    }

    fn value_direct_average(&self, w: &Word) -> Result<BigRational> {
        let perms = self.permutations.as_ref().expect("built at construction");
        let hits = perms
            .iter()
            .filter(|sigma| w.letters().iter().all(|l| sigma[l.col - 1] == l.row))
            .count();
        Ok(BigRational::new((hits as i64).into(), (perms.len() as i64).into()))
    }

    fn value_weingarten(&self, w: &Word) -> Result<BigRational> {
        let pattern: Vec<bool> = w.letters().iter().map(|l| l.starred).collect();
        let (parts, wg) = self.category(&pattern)?;
        if parts.is_empty() {
            return Ok(BigRational::zero());
        }
        let rows: Vec<usize> = w.letters().iter().map(|l| l.row).collect();
        let cols: Vec<usize> = w.letters().iter().map(|l| l.col).collect();
        let row_hits: Vec<bool> = parts
            .iter()
            .map(|p| delta(p, &rows))
            .collect::<Result<_>>()?;
        let col_hits: Vec<bool> = parts
            .iter()
            .map(|p| delta(p, &cols))
            .collect::<Result<_>>()?;
        let mut total = BigRational::zero();
        for (pi, &pr) in row_hits.iter().enumerate() {
            if !pr {
                continue;
            }
            for (qi, &qc) in col_hits.iter().enumerate() {
                if qc {
                    total += wg.get(pi, qi);
                }
            }
        }
        Ok(total)
    }

    /// Moment of the fundamental character Σ_i u_ii at degree k.
    pub fn char_moment(&self, k: usize) -> Result<BigRational> {
        if k == 0 {
            return Ok(BigRational::one());
        }
        match self.method {
            HaarMethod::Circle => Ok(BigRational::zero()),
            HaarMethod::DirectAverage => {
                // χ(σ) = number of fixed points; average χ^k.
                let perms = self.permutations.as_ref().expect("built at construction");
                let mut total = BigRational::zero();
                for sigma in perms {
                    let fixed = sigma.iter().enumerate().filter(|(i, &v)| v == i + 1).count();
                    total += BigRational::from_integer((fixed as i64).pow(k as u32).into());
                }
                Ok(total / BigRational::from_integer((perms.len() as i64).into()))
            }
            HaarMethod::Weingarten => {
                // Summing δ_p(i)δ_q(i) over diagonal tuples telescopes to
                // n^|p∨q|, so the k-th moment is tr(G·Wg) = rank of the Gram.
                let pattern = vec![false; k];
                let (parts, wg) = self.category(&pattern)?;
                if parts.is_empty() {
                    return Ok(BigRational::zero());
                }
                let g = gram_matrix(&parts, self.group.dim())?;
                let prod = g.mul(&wg)?;
                let mut tr = BigRational::zero();
                for i in 0..prod.rows() {
                    tr += prod.get(i, i);
                }
                Ok(tr)
            }
        }
    }
}
