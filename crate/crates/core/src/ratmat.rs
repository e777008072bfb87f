//! Dense matrices over arbitrary-precision rationals.
//!
//! Small and exact by design: Gram matrices of partition families are at most
//! a few hundred rows at desk scale, and the pseudo-inverse must be bit-exact
//! because those Gram matrices are singular at small dimension parameters.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::value::rational_to_f64;

#[derive(Clone, Debug, PartialEq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigRational>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            data: vec![BigRational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigRational::one());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> BigRational) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        RationalMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<BigRational>>) -> Result<Self> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != nc) {
            return Err(Error::argument("ragged row lengths"));
        }
        Ok(RationalMatrix {
            rows: nr,
            cols: nc,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &BigRational {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: BigRational) {
        self.data[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).clone())
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| (0..r).all(|c| self.get(r, c) == self.get(c, r)))
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::argument(format!(
                "matrix product shape mismatch: {}x{} * {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    let b = rhs.get(k, c);
                    if b.is_zero() {
                        continue;
                    }
                    let cur = out.get(r, c).clone();
                    out.set(r, c, cur + a * b);
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::argument("matrix difference shape mismatch"));
        }
        Ok(Self::from_fn(self.rows, self.cols, |r, c| {
            self.get(r, c) - rhs.get(r, c)
        }))
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| self.get(r, c) * s)
    }

    pub fn max_abs(&self) -> BigRational {
        self.data
            .iter()
            .map(|v| v.abs())
            .max()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(rational_to_f64).collect()
    }

    /// Reduced row echelon form together with the pivot column indices.
    pub fn rref(&self) -> (Self, Vec<usize>) {
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(p) = (row..m.rows).find(|&r| !m.get(r, col).is_zero()) else {
                continue;
            };
            if p != row {
                for c in 0..m.cols {
                    let a = m.get(row, c).clone();
                    let b = m.get(p, c).clone();
                    m.set(row, c, b);
                    m.set(p, c, a);
                }
            }
            let inv = m.get(row, col).clone();
            for c in 0..m.cols {
                let v = m.get(row, c) / &inv;
                m.set(row, c, v);
            }
            for r in 0..m.rows {
                if r == row || m.get(r, col).is_zero() {
                    continue;
                }
                let factor = m.get(r, col).clone();
                for c in 0..m.cols {
                    let v = m.get(r, c) - &factor * m.get(row, c);
                    m.set(r, c, v);
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    pub fn determinant(&self) -> Result<BigRational> {
        if self.rows != self.cols {
            return Err(Error::argument("determinant of non-square matrix"));
        }
        let mut m = self.clone();
        let n = m.rows;
        let mut det = BigRational::one();
        for col in 0..n {
            let Some(p) = (col..n).find(|&r| !m.get(r, col).is_zero()) else {
                return Ok(BigRational::zero());
            };
            if p != col {
                det = -det;
                for c in 0..n {
                    let a = m.get(col, c).clone();
                    let b = m.get(p, c).clone();
                    m.set(col, c, b);
                    m.set(p, c, a);
                }
            }
            let pivot = m.get(col, col).clone();
            det *= &pivot;
            for r in col + 1..n {
                if m.get(r, col).is_zero() {
                    continue;
                }
                let factor = m.get(r, col) / &pivot;
                for c in col..n {
                    let v = m.get(r, c) - &factor * m.get(col, c);
                    m.set(r, c, v);
                }
            }
        }
        Ok(det)
    }

    /// Exact inverse of a square nonsingular matrix (Gauss-Jordan).
    pub fn inverse(&self) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::argument("inverse of non-square matrix"));
        }
        let n = self.rows;
        // Augment with the identity and reduce.
        let mut aug = Self::zeros(n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                aug.set(r, c, self.get(r, c).clone());
            }
            aug.set(r, n + r, BigRational::one());
        }
        let (red, pivots) = aug.rref();
        if pivots.len() < n || pivots.iter().take(n).enumerate().any(|(i, &p)| p != i) {
            return Err(Error::argument("matrix is singular"));
        }
        Ok(Self::from_fn(n, n, |r, c| red.get(r, n + c).clone()))
    }

    /// Moore-Penrose pseudo-inverse, exact, via full-rank factorization:
    /// with A = C·F (C = pivot columns, F = top of rref), the pseudo-inverse
    /// is Fᵗ(FFᵗ)⁻¹(CᵗC)⁻¹Cᵗ. Satisfies all four Penrose identities; equals
    /// the plain inverse when A is nonsingular.
    pub fn pseudo_inverse(&self) -> Result<Self> {
        let (red, pivots) = self.rref();
        let r = pivots.len();
        if r == 0 {
            return Ok(Self::zeros(self.cols, self.rows));
        }
        let c_mat = Self::from_fn(self.rows, r, |i, j| self.get(i, pivots[j]).clone());
        let f_mat = Self::from_fn(r, self.cols, |i, j| red.get(i, j).clone());
        let ff_t = f_mat.mul(&f_mat.transpose())?.inverse()?;
        let ct_c = c_mat.transpose().mul(&c_mat)?.inverse()?;
        f_mat
            .transpose()
            .mul(&ff_t)?
            .mul(&ct_c)?
            .mul(&c_mat.transpose())
    }
}

pub fn big_rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn big_int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn penrose_ok(a: &RationalMatrix, w: &RationalMatrix) -> bool {
        let awa = a.mul(w).unwrap().mul(a).unwrap();
        let waw = w.mul(a).unwrap().mul(w).unwrap();
        let aw = a.mul(w).unwrap();
        let wa = w.mul(a).unwrap();
        awa == *a && waw == *w && aw == aw.transpose() && wa == wa.transpose()
    }

    #[test]
    fn inverse_of_two_by_two() {
        let g = RationalMatrix::from_rows(vec![
            vec![big_int(4), big_int(2)],
            vec![big_int(2), big_int(4)],
        ])
        .unwrap();
        let w = g.inverse().unwrap();
        let expect = RationalMatrix::from_rows(vec![
            vec![big_rat(4, 12), big_rat(-2, 12)],
            vec![big_rat(-2, 12), big_rat(4, 12)],
        ])
        .unwrap();
        assert_eq!(w, expect);
        assert!(penrose_ok(&g, &w));
    }

    #[test]
    fn pseudo_inverse_matches_inverse_when_nonsingular() {
        let g = RationalMatrix::from_rows(vec![
            vec![big_int(4), big_int(2)],
            vec![big_int(2), big_int(4)],
        ])
        .unwrap();
        assert_eq!(g.pseudo_inverse().unwrap(), g.inverse().unwrap());
    }

    #[test]
    fn pseudo_inverse_of_rank_one_all_ones() {
        // Penrose equations force J⁺ = J/4 for the 2x2 all-ones matrix.
        let j = RationalMatrix::from_fn(2, 2, |_, _| BigRational::one());
        let w = j.pseudo_inverse().unwrap();
        assert_eq!(w, j.scale(&big_rat(1, 4)));
        assert!(penrose_ok(&j, &w));
    }

    #[test]
    fn pseudo_inverse_of_zero_matrix() {
        let z = RationalMatrix::zeros(3, 2);
        let w = z.pseudo_inverse().unwrap();
        assert_eq!(w, RationalMatrix::zeros(2, 3));
    }

    #[test]
    fn determinant_and_rank() {
        let m = RationalMatrix::from_rows(vec![
            vec![big_int(1), big_int(2)],
            vec![big_int(2), big_int(4)],
        ])
        .unwrap();
        assert_eq!(m.determinant().unwrap(), BigRational::zero());
        assert_eq!(m.rank(), 1);
    }
}
