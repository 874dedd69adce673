//! Symmetric-function kernels: power sums, elementary symmetric
//! polynomials, Newton's-identity conversions, and the symbolic expansion
//! of a power sum pulled back through a linear map.

use thiserror::Error;

use crate::mat::Mat;
use crate::polyring::{Monomial, MonomialOrder, Poly};
use crate::scalar::Coeff;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SymfunError {
    #[error("power-sum index must be >= 1, got {0}")]
    BadIndex(i64),
    #[error("Newton conversions require the exact coefficient domain")]
    InexactDomain,
    #[error("matrix must be non-empty")]
    EmptyMatrix,
}

/// Power sums (p_1, ..., p_L) of some value multiset.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSumVector<C>(pub Vec<C>);

/// Elementary symmetric values (s_1, ..., s_L).
#[derive(Debug, Clone, PartialEq)]
pub struct ElementarySymmetricVector<C>(pub Vec<C>);

/// Sum of `ell`-th powers of the entries of `v`.
pub fn power_sum<C: Coeff>(ell: i64, v: &[C]) -> Result<C, SymfunError> {
    if ell < 1 {
        return Err(SymfunError::BadIndex(ell));
    }
    let mut acc = C::zero();
    for x in v {
        let mut p = C::one();
        for _ in 0..ell {
            p = p * x.clone();
        }
        acc = acc + p;
    }
    Ok(acc)
}

/// First `len` power sums of `v`, sharing the running powers across orders.
pub fn power_sums_up_to<C: Coeff>(len: usize, v: &[C]) -> Vec<C> {
    let mut acc = vec![C::zero(); len];
    for x in v {
        let mut p = C::one();
        for slot in acc.iter_mut() {
            p = p * x.clone();
            *slot = slot.clone() + p.clone();
        }
    }
    acc
}

/// Power sums -> elementary symmetric values, exact domain only.
///
/// Uses the recurrence `l*s_l = sum_{i=1..l} (-1)^(i-1) s_{l-i} p_i` with
/// `s_0 = 1`; the divisions by 1..L are why floats are rejected.
pub fn newton_p_to_e<C: Coeff>(
    p: &PowerSumVector<C>,
) -> Result<ElementarySymmetricVector<C>, SymfunError> {
    if !C::EXACT {
        return Err(SymfunError::InexactDomain);
    }
    let len = p.0.len();
    let mut s: Vec<C> = Vec::with_capacity(len + 1);
    s.push(C::one());
    for l in 1..=len {
        let mut acc = C::zero();
        let mut sign = C::one();
        for i in 1..=l {
            acc = acc + sign.clone() * s[l - i].clone() * p.0[i - 1].clone();
            sign = -sign;
        }
        s.push(acc / C::from_int(l as i64));
    }
    Ok(ElementarySymmetricVector(s[1..].to_vec()))
}

/// Elementary symmetric values -> power sums; inverse of [`newton_p_to_e`].
pub fn newton_e_to_p<C: Coeff>(
    e: &ElementarySymmetricVector<C>,
) -> Result<PowerSumVector<C>, SymfunError> {
    if !C::EXACT {
        return Err(SymfunError::InexactDomain);
    }
    let len = e.0.len();
    let mut p: Vec<C> = Vec::with_capacity(len);
    for l in 1..=len {
        // p_l = (-1)^(l-1) * (l*s_l - sum_{i=1..l-1} (-1)^(i-1) s_{l-i} p_i)
        let mut acc = C::zero();
        let mut sign = C::one();
        for i in 1..l {
            acc = acc + sign.clone() * e.0[l - i - 1].clone() * p[i - 1].clone();
            sign = -sign;
        }
        let inner = C::from_int(l as i64) * e.0[l - 1].clone() - acc;
        let lead_sign = if l % 2 == 1 { C::one() } else { -C::one() };
        p.push(lead_sign * inner);
    }
    Ok(PowerSumVector(p))
}

/// Symbolic expansion of the degree-`ell` power sum composed with `x -> A x`:
/// the homogeneous polynomial `sum_i (row_i . x)^ell` in `A.ncols()`
/// variables. Exact-domain verification paths only; the numeric pipeline
/// evaluates the same quantity without expanding.
pub fn expand_power_sum_pullback<C: Coeff>(
    a: &Mat<C>,
    ell: i64,
) -> Result<Poly<C>, SymfunError> {
    if ell < 1 {
        return Err(SymfunError::BadIndex(ell));
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(SymfunError::EmptyMatrix);
    }
    let n = a.ncols();
    let order = MonomialOrder::Grevlex;
    let mut acc = Poly::zero(n, order);
    for i in 0..a.nrows() {
        let linear = Poly::from_terms(
            n,
            order,
            a.row(i)
                .iter()
                .enumerate()
                .map(|(j, c)| (Monomial::var(n, j), c.clone()))
                .collect(),
        );
        acc = acc.add(&linear.pow(ell as u32)).expect("same ring");
    }
    Ok(acc)
}
