//! Dense row-major matrices over an arbitrary scalar, plus the exact
//! rational kernels (determinant, rank) that the verification paths need.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::scalar::{Coeff, Rat};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Mat<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn fill(rows: usize, cols: usize, value: T) -> Self {
        Mat {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn at(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Submatrix on the given row indices (all columns), in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Mat {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Coeff> Mat<T> {
    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
            })
            .collect()
    }
}

/// Exact determinant by fraction-free Gaussian elimination (Bareiss) on the
/// numerators after clearing row denominators.
pub fn det_rat(m: &Mat<Rat>) -> Rat {
    assert_eq!(m.nrows(), m.ncols(), "determinant needs a square matrix");
    let n = m.nrows();
    if n == 0 {
        return Rat::one();
    }

    // Clear denominators row by row; track the accumulated row factors.
    let mut scale = Rat::one();
    let mut a: Vec<Vec<BigInt>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut lcm = BigInt::one();
        for j in 0..n {
            lcm = num_integer::lcm(lcm, m.at(i, j).denom().clone());
        }
        scale *= Rat::new(BigInt::one(), lcm.clone());
        a.push(
            (0..n)
                .map(|j| {
                    let v = m.at(i, j);
                    v.numer() * (&lcm / v.denom())
                })
                .collect(),
        );
    }

    // Bareiss elimination.
    let mut sign = 1i32;
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !a[i][k].is_zero()) else {
                return Rat::zero();
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = &t / &prev;
            }
            a[i][k] = BigInt::zero();
        }
        prev = a[k][k].clone();
    }

    let det_int = Rat::from_integer(a[n - 1][n - 1].clone());
    let det = det_int * scale;
    if sign < 0 {
        -det
    } else {
        det
    }
}

/// Exact rank over the rationals by Gaussian elimination.
pub fn rank_rat(m: &Mat<Rat>) -> usize {
    let mut a: Vec<Vec<Rat>> = (0..m.nrows()).map(|i| m.row(i).to_vec()).collect();
    let rows = m.nrows();
    let cols = m.ncols();
    let mut rank = 0;
    let mut col = 0;
    while rank < rows && col < cols {
        let Some(p) = (rank..rows).find(|&i| !a[i][col].is_zero()) else {
            col += 1;
            continue;
        };
        a.swap(rank, p);
        let pivot = a[rank][col].clone();
        for i in rank + 1..rows {
            if a[i][col].is_zero() {
                continue;
            }
            let f = &a[i][col] / &pivot;
            for j in col..cols {
                let t = &a[rank][j] * &f;
                a[i][j] = &a[i][j] - &t;
            }
        }
        rank += 1;
        col += 1;
    }
    rank
}

/// 61-bit Mersenne prime used by the modular rank fast path.
const RANK_PRIME: u64 = (1 << 61) - 1;

fn mod_p(v: &BigInt) -> u64 {
    let p = BigInt::from(RANK_PRIME);
    let r = ((v % &p) + &p) % &p;
    let (_, digits) = r.to_u64_digits();
    digits.first().copied().unwrap_or(0)
}

fn mul_p(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % RANK_PRIME as u128) as u64
}

fn inv_p(a: u64) -> u64 {
    // Fermat: a^(p-2) mod p.
    let mut base = a;
    let mut exp = RANK_PRIME - 2;
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_p(acc, base);
        }
        base = mul_p(base, base);
        exp >>= 1;
    }
    acc
}

/// Rank of the image of a rational matrix modulo a fixed 61-bit prime.
///
/// A nonzero minor mod p is nonzero over the rationals, so this is a lower
/// bound on the exact rank; callers use it to certify full rank cheaply and
/// fall back to [`rank_rat`] otherwise. Returns `None` when a denominator is
/// divisible by the prime (cannot reduce).
pub fn rank_mod_p(m: &Mat<Rat>) -> Option<usize> {
    let rows = m.nrows();
    let cols = m.ncols();
    let mut a = vec![vec![0u64; cols]; rows];
    for i in 0..rows {
        for j in 0..cols {
            let v = m.at(i, j);
            let den = mod_p(v.denom());
            if den == 0 {
                return None;
            }
            a[i][j] = mul_p(mod_p(v.numer()), inv_p(den));
        }
    }
    let mut rank = 0;
    let mut col = 0;
    while rank < rows && col < cols {
        let Some(p) = (rank..rows).find(|&i| a[i][col] != 0) else {
            col += 1;
            continue;
        };
        a.swap(rank, p);
        let inv = inv_p(a[rank][col]);
        for i in rank + 1..rows {
            if a[i][col] == 0 {
                continue;
            }
            let f = mul_p(a[i][col], inv);
            for j in col..cols {
                let t = mul_p(f, a[rank][j]);
                a[i][j] = (a[i][j] + RANK_PRIME - t) % RANK_PRIME;
            }
        }
        rank += 1;
        col += 1;
    }
    Some(rank)
}

/// Absolute value helper for pivoting diagnostics.
pub fn rat_abs(v: &Rat) -> Rat {
    v.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Coeff;

    fn q(n: i64, d: i64) -> Rat {
        Rat::from_ratio(n, d)
    }

    fn qi(n: i64) -> Rat {
        Rat::from_int(n)
    }

    #[test]
    fn det_small() {
        let m = Mat::from_rows(vec![vec![qi(1), qi(2)], vec![qi(3), qi(4)]]);
        assert_eq!(det_rat(&m), qi(-2));
    }

    #[test]
    fn det_rational_entries() {
        let m = Mat::from_rows(vec![vec![q(1, 2), q(1, 3)], vec![q(1, 4), q(1, 5)]]);
        // 1/10 - 1/12 = 1/60
        assert_eq!(det_rat(&m), q(1, 60));
    }

    #[test]
    fn det_singular() {
        let m = Mat::from_rows(vec![
            vec![qi(1), qi(2), qi(3)],
            vec![qi(2), qi(4), qi(6)],
            vec![qi(0), qi(1), qi(1)],
        ]);
        assert_eq!(det_rat(&m), qi(0));
    }

    #[test]
    fn det_needs_row_swap() {
        let m = Mat::from_rows(vec![
            vec![qi(0), qi(1), qi(0)],
            vec![qi(1), qi(0), qi(0)],
            vec![qi(0), qi(0), qi(1)],
        ]);
        assert_eq!(det_rat(&m), qi(-1));
    }

    #[test]
    fn rank_full_and_deficient() {
        let full = Mat::from_rows(vec![vec![qi(1), qi(0)], vec![qi(1), qi(1)], vec![qi(0), qi(1)]]);
        assert_eq!(rank_rat(&full), 2);
        assert_eq!(rank_mod_p(&full), Some(2));

        let def = Mat::from_rows(vec![vec![qi(1), qi(2)], vec![qi(2), qi(4)]]);
        assert_eq!(rank_rat(&def), 1);
        assert_eq!(rank_mod_p(&def), Some(1));
    }

    #[test]
    fn modular_rank_matches_exact_on_random_entries() {
        // Deterministic pseudo-random small rationals.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _ in 0..10 {
            let rows = 4;
            let cols = 6;
            let mut data = Vec::new();
            for _ in 0..rows * cols {
                let n = (next() % 2001) as i64 - 1000;
                let d = (next() % 50) as i64 + 1;
                data.push(q(n, d));
            }
            let m = Mat::from_vec(rows, cols, data);
            assert_eq!(rank_mod_p(&m), Some(rank_rat(&m)));
        }
    }
}
