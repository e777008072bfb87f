//! Set partitions of {1..m} and the partition families indexing Weingarten
//! sums: all partitions, pairings, their noncrossing restrictions, and the
//! color-constrained pairings used by the unitary families.
//!
//! Everything here is exact. Gram matrices have integer entries n^|p∨q| and
//! Weingarten matrices are their exact pseudo-inverses, so evaluation stays
//! correct even where the Gram matrix is singular (small n).

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::ratmat::{big_int, RationalMatrix};

/// Hard cap on the ground size; partition counts explode past desk scale.
pub const MAX_GROUND_SIZE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Color {
    Plain,
    Starred,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    All,
    Pairings,
    Noncrossing,
    NoncrossingPairings,
    ColoredPairings,
    NoncrossingColoredPairings,
}

impl FamilyKind {
    pub fn is_colored(self) -> bool {
        matches!(
            self,
            FamilyKind::ColoredPairings | FamilyKind::NoncrossingColoredPairings
        )
    }

    fn is_pairing(self) -> bool {
        !matches!(self, FamilyKind::All | FamilyKind::Noncrossing)
    }

    fn is_noncrossing(self) -> bool {
        matches!(
            self,
            FamilyKind::Noncrossing
                | FamilyKind::NoncrossingPairings
                | FamilyKind::NoncrossingColoredPairings
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionFamily {
    pub kind: FamilyKind,
    pub color_pattern: Option<Vec<Color>>,
}

impl PartitionFamily {
    pub fn plain(kind: FamilyKind) -> Result<Self> {
        if kind.is_colored() {
            return Err(Error::argument("colored family kinds require a color pattern"));
        }
        Ok(PartitionFamily {
            kind,
            color_pattern: None,
        })
    }

    pub fn colored(kind: FamilyKind, pattern: Vec<Color>) -> Result<Self> {
        if !kind.is_colored() {
            return Err(Error::argument("color pattern given for an uncolored family"));
        }
        Ok(PartitionFamily {
            kind,
            color_pattern: Some(pattern),
        })
    }
}

/// A set partition of {1..m} in canonical form: every block sorted ascending,
/// blocks ordered by their minima. Equality is structural equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    ground_size: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(ground_size: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if ground_size > MAX_GROUND_SIZE {
            return Err(Error::resource(format!(
                "partition ground size {ground_size} exceeds cap {MAX_GROUND_SIZE}"
            )));
        }
        let mut seen = vec![false; ground_size + 1];
        let mut canon: Vec<Vec<usize>> = Vec::with_capacity(blocks.len());
        for mut b in blocks {
            if b.is_empty() {
                return Err(Error::argument("empty block"));
            }
            b.sort_unstable();
            for &x in &b {
                if x == 0 || x > ground_size {
                    return Err(Error::argument(format!("index {x} out of ground range")));
                }
                if seen[x] {
                    return Err(Error::argument(format!("index {x} repeated across blocks")));
                }
                seen[x] = true;
            }
            canon.push(b);
        }
        if seen[1..].iter().any(|&s| !s) {
            return Err(Error::argument("blocks do not cover the ground set"));
        }
        canon.sort_by_key(|b| b[0]);
        Ok(Partition {
            ground_size,
            blocks: canon,
        })
    }

    pub fn empty() -> Self {
        Partition {
            ground_size: 0,
            blocks: Vec::new(),
        }
    }

    pub fn singletons(ground_size: usize) -> Result<Self> {
        Partition::new(ground_size, (1..=ground_size).map(|i| vec![i]).collect())
    }

    pub fn ground_size(&self) -> usize {
        self.ground_size
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Block index of each ground element, 0-based, indexed by element-1.
    fn block_labels(&self) -> Vec<usize> {
        let mut labels = vec![0usize; self.ground_size];
        for (bi, b) in self.blocks.iter().enumerate() {
            for &x in b {
                labels[x - 1] = bi;
            }
        }
        labels
    }

    pub fn is_noncrossing(&self) -> bool {
        let labels = self.block_labels();
        // Crossing <=> some a < b < c < d with labels a==c != b==d.
        let m = self.ground_size;
        for a in 0..m {
            for b in a + 1..m {
                if labels[b] == labels[a] {
                    continue;
                }
                for c in b + 1..m {
                    if labels[c] != labels[a] {
                        continue;
                    }
                    for d in c + 1..m {
                        if labels[d] == labels[b] {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    pub fn is_pairing(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 2)
    }
}

/// 1 iff the index tuple is constant on every block.
pub fn delta(p: &Partition, idx: &[usize]) -> Result<bool> {
    if idx.len() != p.ground_size() {
        return Err(Error::argument(format!(
            "index tuple length {} != ground size {}",
            idx.len(),
            p.ground_size()
        )));
    }
    Ok(p.blocks()
        .iter()
        .all(|b| b.iter().all(|&x| idx[x - 1] == idx[b[0] - 1])))
}

/// Lattice join: finest partition coarser than both (connected components of
/// the union of the two block graphs).
pub fn join(p: &Partition, q: &Partition) -> Result<Partition> {
    if p.ground_size() != q.ground_size() {
        return Err(Error::argument("join of partitions with different ground sizes"));
    }
    let m = p.ground_size();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
        let ra = find(parent, a);
        let rb = find(parent, b);
        if ra != rb {
            parent[ra] = rb;
        }
    };
    for part in [p, q] {
        for b in part.blocks() {
            for w in b.windows(2) {
                union(&mut parent, w[0] - 1, w[1] - 1);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for x in 0..m {
        let root = find(&mut parent, x);
        groups.entry(root).or_default().push(x + 1);
    }
    Partition::new(m, groups.into_values().collect())
}

fn enumerate_all_partitions(m: usize) -> Vec<Partition> {
    // Recursive placement of 1..m into existing or fresh blocks; the
    // generation order (restricted-growth order) is already canonical.
    fn rec(next: usize, m: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Partition>) {
        if next > m {
            out.push(Partition::new(m, blocks.clone()).expect("valid by construction"));
            return;
        }
        for i in 0..blocks.len() {
            blocks[i].push(next);
            rec(next + 1, m, blocks, out);
            blocks[i].pop();
        }
        blocks.push(vec![next]);
        rec(next + 1, m, blocks, out);
        blocks.pop();
    }
    if m == 0 {
        return vec![Partition::empty()];
    }
    let mut out = Vec::new();
    rec(1, m, &mut Vec::new(), &mut out);
    out
}

fn enumerate_pairings(m: usize) -> Vec<Partition> {
    fn rec(free: &[usize], m: usize, pairs: &mut Vec<Vec<usize>>, out: &mut Vec<Partition>) {
        if free.is_empty() {
            out.push(Partition::new(m, pairs.clone()).expect("valid by construction"));
            return;
        }
        let first = free[0];
        for k in 1..free.len() {
            let partner = free[k];
            let rest: Vec<usize> = free[1..]
                .iter()
                .copied()
                .filter(|&x| x != partner)
                .collect();
            pairs.push(vec![first, partner]);
            rec(&rest, m, pairs, out);
            pairs.pop();
        }
    }
    if m == 0 {
        return vec![Partition::empty()];
    }
    if m % 2 != 0 {
        return Vec::new();
    }
    let free: Vec<usize> = (1..=m).collect();
    let mut out = Vec::new();
    rec(&free, m, &mut Vec::new(), &mut out);
    out
}

fn color_matched(p: &Partition, pattern: &[Color]) -> bool {
    p.blocks()
        .iter()
        .all(|b| b.len() == 2 && pattern[b[0] - 1] != pattern[b[1] - 1])
}

/// All partitions of {1..m} in the family, deterministic canonical order.
pub fn enumerate_partitions(m: usize, family: &PartitionFamily) -> Result<Vec<Partition>> {
    if m > MAX_GROUND_SIZE {
        return Err(Error::resource(format!(
            "ground size {m} exceeds cap {MAX_GROUND_SIZE}"
        )));
    }
    if let Some(pattern) = &family.color_pattern {
        if pattern.len() != m {
            return Err(Error::argument(format!(
                "color pattern length {} != ground size {m}",
                pattern.len()
            )));
        }
    }
    let base = if family.kind.is_pairing() {
        enumerate_pairings(m)
    } else {
        enumerate_all_partitions(m)
    };
    let mut out: Vec<Partition> = base
        .into_iter()
        .filter(|p| !family.kind.is_noncrossing() || p.is_noncrossing())
        .filter(|p| match &family.color_pattern {
            Some(pattern) => color_matched(p, pattern),
            None => true,
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Gram matrix with entries n^|p∨q|, exact.
pub fn gram_matrix(parts: &[Partition], n: usize) -> Result<RationalMatrix> {
    if let Some(first) = parts.first() {
        if parts.iter().any(|p| p.ground_size() != first.ground_size()) {
            return Err(Error::argument("partitions with mixed ground sizes"));
        }
    }
    let k = parts.len();
    let mut g = RationalMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let blocks = join(&parts[i], &parts[j])?.block_count();
            let entry = big_int(n as i64).numer().pow(blocks as u32);
            let entry = BigRational::from_integer(entry);
            g.set(i, j, entry.clone());
            g.set(j, i, entry);
        }
    }
    Ok(g)
}

/// Weingarten matrix: exact pseudo-inverse of the Gram matrix. Equals the
/// plain inverse whenever the Gram matrix is nonsingular.
pub fn weingarten_matrix(parts: &[Partition], n: usize) -> Result<RationalMatrix> {
    gram_matrix(parts, n)?.pseudo_inverse()
}
