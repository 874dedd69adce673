//! Sparse multivariate polynomial arithmetic over an exchangeable
//! coefficient domain (exact rationals or binary floats).
//!
//! Polynomials are immutable after construction: every operation normalizes
//! its result (terms combined, zeros pruned, sorted descending in the
//! carried monomial order), so iteration order is deterministic.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::scalar::Coeff;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("monomial order mismatch")]
    OrderMismatch,
    #[error("point length {0} does not match arity {1}")]
    PointLength(usize, usize),
    #[error("variable index {0} out of range for arity {1}")]
    VarIndex(usize, usize),
}

/// Monomial order tag. Grevlex is the workhorse; lex is used where root
/// extraction needs an elimination order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MonomialOrder {
    Lex,
    Grevlex,
}

impl MonomialOrder {
    pub fn cmp_exponents(&self, a: &[u32], b: &[u32]) -> Ordering {
        debug_assert_eq!(a.len(), b.len());
        match self {
            MonomialOrder::Lex => {
                for (x, y) in a.iter().zip(b) {
                    match x.cmp(y) {
                        Ordering::Equal => continue,
                        other => return other,
                    }
                }
                Ordering::Equal
            }
            MonomialOrder::Grevlex => {
                let da: u32 = a.iter().sum();
                let db: u32 = b.iter().sum();
                match da.cmp(&db) {
                    Ordering::Equal => {}
                    other => return other,
                }
                // Equal degree: the one whose last differing exponent is
                // smaller is the larger monomial.
                for (x, y) in a.iter().zip(b).rev() {
                    match x.cmp(y) {
                        Ordering::Equal => continue,
                        Ordering::Less => return Ordering::Greater,
                        Ordering::Greater => return Ordering::Less,
                    }
                }
                Ordering::Equal
            }
        }
    }
}

/// Exponent vector with fixed arity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(arity: usize) -> Self {
        Monomial(vec![0; arity])
    }

    pub fn var(arity: usize, index: usize) -> Self {
        assert!(index < arity);
        let mut e = vec![0; arity];
        e[index] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.arity(), other.arity());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `other / self`, assuming divisibility.
    pub fn div_into(&self, other: &Monomial) -> Monomial {
        debug_assert!(self.divides(other));
        Monomial(other.0.iter().zip(&self.0).map(|(b, a)| b - a).collect())
    }

    pub fn lcm(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| *a.max(b))
                .collect(),
        )
    }

    pub fn coprime(&self, other: &Monomial) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| *a == 0 || *b == 0)
    }
}

/// All monomials of the given total degree, sorted descending in `order`.
pub fn monomials_of_degree(arity: usize, degree: u32, order: MonomialOrder) -> Vec<Monomial> {
    assert!(arity >= 1, "arity must be at least 1");
    let mut out = Vec::new();
    let mut current = vec![0u32; arity];
    fn rec(out: &mut Vec<Monomial>, current: &mut Vec<u32>, pos: usize, remaining: u32) {
        if pos + 1 == current.len() {
            current[pos] = remaining;
            out.push(Monomial::new(current.clone()));
            return;
        }
        for e in (0..=remaining).rev() {
            current[pos] = e;
            rec(out, current, pos + 1, remaining - e);
        }
        current[pos] = 0;
    }
    rec(&mut out, &mut current, 0, degree);
    out.sort_by(|a, b| order.cmp_exponents(b.exponents(), a.exponents()));
    out
}

/// Sparse multivariate polynomial; terms held descending in `order`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<C: Coeff> {
    arity: usize,
    order: MonomialOrder,
    terms: Vec<(Monomial, C)>,
}

impl<C: Coeff> Poly<C> {
    /// Normalizing constructor: combines duplicate monomials, prunes zeros,
    /// sorts descending.
    pub fn from_terms(
        arity: usize,
        order: MonomialOrder,
        mut terms: Vec<(Monomial, C)>,
    ) -> Self {
        for (m, _) in &terms {
            assert_eq!(m.arity(), arity, "monomial arity mismatch");
        }
        terms.sort_by(|a, b| order.cmp_exponents(b.0.exponents(), a.0.exponents()));
        let mut merged: Vec<(Monomial, C)> = Vec::with_capacity(terms.len());
        for (m, c) in terms {
            if let Some(last) = merged.last_mut() {
                if last.0 == m {
                    let sum = last.1.clone() + c;
                    last.1 = sum;
                    if merged.last().unwrap().1.is_zero() {
                        merged.pop();
                    }
                    continue;
                }
            }
            if !c.is_zero() {
                merged.push((m, c));
            }
        }
        Poly {
            arity,
            order,
            terms: merged,
        }
    }

    pub fn zero(arity: usize, order: MonomialOrder) -> Self {
        Poly {
            arity,
            order,
            terms: Vec::new(),
        }
    }

    pub fn constant(arity: usize, order: MonomialOrder, c: C) -> Self {
        Poly::from_terms(arity, order, vec![(Monomial::one(arity), c)])
    }

    pub fn var(arity: usize, order: MonomialOrder, index: usize) -> Self {
        Poly::from_terms(arity, order, vec![(Monomial::var(arity, index), C::one())])
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn order(&self) -> MonomialOrder {
        self.order
    }

    pub fn terms(&self) -> &[(Monomial, C)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|(m, _)| m.total_degree())
            .max()
            .unwrap_or(0)
    }

    /// Leading term in the carried order.
    pub fn leading(&self) -> Option<(&Monomial, &C)> {
        self.terms.first().map(|(m, c)| (m, c))
    }

    /// True when every term has the same total degree `d`.
    pub fn is_homogeneous_of_degree(&self, d: u32) -> bool {
        self.terms.iter().all(|(m, _)| m.total_degree() == d)
    }

    /// Coefficient of a monomial (zero when absent).
    pub fn coeff(&self, m: &Monomial) -> C {
        self.terms
            .iter()
            .find(|(t, _)| t == m)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(C::zero)
    }

    /// Re-tag with a different monomial order (re-sorts terms).
    pub fn with_order(&self, order: MonomialOrder) -> Self {
        Poly::from_terms(self.arity, order, self.terms.clone())
    }

    pub fn add(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_compat(other)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Poly::from_terms(self.arity, self.order, terms))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, PolyError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Poly {
            arity: self.arity,
            order: self.order,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_compat(other)?;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                terms.push((ma.mul(mb), ca.clone() * cb.clone()));
            }
        }
        Ok(Poly::from_terms(self.arity, self.order, terms))
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Poly::zero(self.arity, self.order);
        }
        Poly {
            arity: self.arity,
            order: self.order,
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), k.clone() * c.clone()))
                .collect(),
        }
    }

    /// Multiply by a single term `c * m`.
    pub fn mul_term(&self, m: &Monomial, c: &C) -> Self {
        if c.is_zero() {
            return Poly::zero(self.arity, self.order);
        }
        Poly {
            arity: self.arity,
            order: self.order,
            terms: self
                .terms
                .iter()
                .map(|(t, k)| (t.mul(m), k.clone() * c.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Poly::constant(self.arity, self.order, C::one());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base).expect("same ring");
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base).expect("same ring");
            }
        }
        acc
    }

    pub fn eval(&self, point: &[C]) -> Result<C, PolyError> {
        if point.len() != self.arity {
            return Err(PolyError::PointLength(point.len(), self.arity));
        }
        let mut acc = C::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for (e, v) in m.exponents().iter().zip(point) {
                for _ in 0..*e {
                    term = term * v.clone();
                }
            }
            acc = acc + term;
        }
        Ok(acc)
    }

    /// Formal partial derivative with respect to variable `var_index`.
    pub fn diff(&self, var_index: usize) -> Result<Self, PolyError> {
        if var_index >= self.arity {
            return Err(PolyError::VarIndex(var_index, self.arity));
        }
        let terms = self
            .terms
            .iter()
            .filter(|(m, _)| m.exponents()[var_index] > 0)
            .map(|(m, c)| {
                let e = m.exponents()[var_index];
                let mut exps = m.exponents().to_vec();
                exps[var_index] = e - 1;
                (Monomial::new(exps), c.clone() * C::from_int(e as i64))
            })
            .collect();
        Ok(Poly::from_terms(self.arity, self.order, terms))
    }

    /// Partial evaluation: fix variable `var_index` to `value`. The result
    /// keeps the same arity with that variable eliminated from all terms.
    pub fn substitute(&self, var_index: usize, value: &C) -> Result<Self, PolyError> {
        if var_index >= self.arity {
            return Err(PolyError::VarIndex(var_index, self.arity));
        }
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let e = m.exponents()[var_index];
                let mut coeff = c.clone();
                for _ in 0..e {
                    coeff = coeff * value.clone();
                }
                let mut exps = m.exponents().to_vec();
                exps[var_index] = 0;
                (Monomial::new(exps), coeff)
            })
            .collect();
        Ok(Poly::from_terms(self.arity, self.order, terms))
    }

    /// Maximum coefficient bit size (resource-cap metric; 0 for floats).
    pub fn max_coeff_bits(&self) -> u64 {
        self.terms.iter().map(|(_, c)| c.bit_size()).max().unwrap_or(0)
    }

    fn check_compat(&self, other: &Self) -> Result<(), PolyError> {
        if self.arity != other.arity {
            return Err(PolyError::ArityMismatch(self.arity, other.arity));
        }
        if self.order != other.order {
            return Err(PolyError::OrderMismatch);
        }
        Ok(())
    }
}

impl<C: Coeff> fmt::Display for Poly<C> {
    /// Terms as `coeff*x1^e1*...*xn^en` joined by ` + `; exponent suffix
    /// omitted for exponent 1, constants render as the bare coefficient.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let rendered: Vec<String> = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut s = c.render();
                for (i, &e) in m.exponents().iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    s.push_str(&format!("*x{}", i + 1));
                    if e > 1 {
                        s.push_str(&format!("^{}", e));
                    }
                }
                s
            })
            .collect();
        write!(f, "{}", rendered.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rat;

    type QP = Poly<Rat>;

    fn qi(v: i64) -> Rat {
        Rat::from_int(v)
    }

    fn x(arity: usize, i: usize) -> QP {
        Poly::var(arity, MonomialOrder::Grevlex, i)
    }

    #[test]
    fn add_cancellation() {
        // (x1 + x2) + (x1 - x2) = 2 x1
        let a = x(2, 0).add(&x(2, 1)).unwrap();
        let b = x(2, 0).sub(&x(2, 1)).unwrap();
        let s = a.add(&b).unwrap();
        assert_eq!(s, x(2, 0).scale(&qi(2)));
    }

    #[test]
    fn add_identity_and_merge() {
        let p = x(2, 0).mul(&x(2, 1)).unwrap();
        let zero = QP::zero(2, MonomialOrder::Grevlex);
        assert_eq!(p.add(&zero).unwrap(), p);

        let sq = x(2, 0).pow(2);
        let doubled = sq.add(&sq).unwrap();
        assert_eq!(doubled, sq.scale(&qi(2)));
    }

    #[test]
    fn mul_difference_of_squares() {
        let a = x(2, 0).add(&x(2, 1)).unwrap();
        let b = x(2, 0).sub(&x(2, 1)).unwrap();
        let p = a.mul(&b).unwrap();
        let expect = x(2, 0).pow(2).sub(&x(2, 1).pow(2)).unwrap();
        assert_eq!(p, expect);
    }

    #[test]
    fn mul_identity() {
        let p = x(3, 0).add(&x(3, 2).pow(2)).unwrap();
        let one = QP::constant(3, MonomialOrder::Grevlex, qi(1));
        assert_eq!(p.mul(&one).unwrap(), p);
    }

    #[test]
    fn square_of_binomial() {
        // (x1 + 1)^2 = x1^2 + 2 x1 + 1
        let p = x(1, 0)
            .add(&QP::constant(1, MonomialOrder::Grevlex, qi(1)))
            .unwrap()
            .pow(2);
        let expect = QP::from_terms(
            1,
            MonomialOrder::Grevlex,
            vec![
                (Monomial::new(vec![2]), qi(1)),
                (Monomial::new(vec![1]), qi(2)),
                (Monomial::new(vec![0]), qi(1)),
            ],
        );
        assert_eq!(p, expect);
    }

    #[test]
    fn eval_cases() {
        // x1^2 x2 at (2,3) = 12
        let p = x(2, 0).pow(2).mul(&x(2, 1)).unwrap();
        assert_eq!(p.eval(&[qi(2), qi(3)]).unwrap(), qi(12));

        // at all zeros -> constant term
        let q = p
            .add(&QP::constant(2, MonomialOrder::Grevlex, qi(7)))
            .unwrap();
        assert_eq!(q.eval(&[qi(0), qi(0)]).unwrap(), qi(7));

        // (x1+x2)^2 at (1/2, 1/2) = 1 exactly
        let s = x(2, 0).add(&x(2, 1)).unwrap().pow(2);
        assert_eq!(
            s.eval(&[Rat::from_ratio(1, 2), Rat::from_ratio(1, 2)]).unwrap(),
            qi(1)
        );
    }

    #[test]
    fn diff_cases() {
        let p = x(2, 0).pow(2).mul(&x(2, 1)).unwrap();
        let d = p.diff(0).unwrap();
        let expect = x(2, 0).mul(&x(2, 1)).unwrap().scale(&qi(2));
        assert_eq!(d, expect);

        let c = QP::constant(2, MonomialOrder::Grevlex, qi(5));
        assert!(c.diff(0).unwrap().is_zero());

        let q = x(2, 1).pow(3);
        assert!(q.diff(0).unwrap().is_zero());
        assert!(q.diff(5).is_err());
    }

    #[test]
    fn arity_mismatch_is_error() {
        let a = x(2, 0);
        let b = x(3, 0);
        assert!(matches!(a.add(&b), Err(PolyError::ArityMismatch(2, 3))));
        assert!(matches!(a.mul(&b), Err(PolyError::ArityMismatch(2, 3))));
        assert!(matches!(
            a.eval(&[qi(1)]),
            Err(PolyError::PointLength(1, 2))
        ));
    }

    #[test]
    fn monomials_of_degree_counts() {
        assert_eq!(monomials_of_degree(3, 4, MonomialOrder::Grevlex).len(), 15);
        let deg2 = monomials_of_degree(2, 2, MonomialOrder::Grevlex);
        assert_eq!(
            deg2,
            vec![
                Monomial::new(vec![2, 0]),
                Monomial::new(vec![1, 1]),
                Monomial::new(vec![0, 2]),
            ]
        );
        assert_eq!(
            monomials_of_degree(4, 0, MonomialOrder::Lex),
            vec![Monomial::one(4)]
        );
    }

    #[test]
    fn monomial_order_comparisons() {
        // grevlex: x1 x3 < x2^2 (same degree, last differing exponent.. )
        let a = Monomial::new(vec![1, 0, 1]);
        let b = Monomial::new(vec![0, 2, 0]);
        assert_eq!(
            MonomialOrder::Grevlex.cmp_exponents(a.exponents(), b.exponents()),
            Ordering::Less
        );
        // lex: x1 x3 > x2^2
        assert_eq!(
            MonomialOrder::Lex.cmp_exponents(a.exponents(), b.exponents()),
            Ordering::Greater
        );
    }

    #[test]
    fn display_format() {
        let p = QP::from_terms(
            2,
            MonomialOrder::Grevlex,
            vec![
                (Monomial::new(vec![2, 1]), Rat::from_ratio(3, 2)),
                (Monomial::new(vec![0, 0]), qi(-1)),
            ],
        );
        assert_eq!(p.to_string(), "3/2*x1^2*x2 + -1");
        assert_eq!(QP::zero(2, MonomialOrder::Grevlex).to_string(), "0");
    }

    #[test]
    fn float_domain_display_round_trips() {
        let p: Poly<f64> = Poly::from_terms(
            1,
            MonomialOrder::Grevlex,
            vec![(Monomial::new(vec![1]), 0.1 + 0.2)],
        );
        assert_eq!(p.to_string(), "0.30000000000000004*x1");
    }
}
