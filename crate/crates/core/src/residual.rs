//! Fast evaluation of the power-sum constraint system and its Jacobian.
//!
//! For a design `A` and response `y`, equation `l` (for `l = 1..n+1`) is
//! `sum_i (a_i . x)^l - p_l(y) = 0`. Evaluation accumulates powers of the
//! row inner products, so one residual+Jacobian pass costs O(m*n) — the
//! polynomials are never expanded symbolically here.

use thiserror::Error;

use crate::instance::Instance;
use crate::mat::Mat;
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ResidualError {
    #[error("instance contains non-finite entries")]
    NonFinite,
    #[error("m >= n >= 1 required, got m={0}, n={1}")]
    BadShape(usize, usize),
    #[error("x has length {0}, expected {1}")]
    BadPoint(usize, usize),
}

/// Compiled evaluator for the `n+1` power-sum constraints of one instance.
#[derive(Debug, Clone)]
pub struct ResidualSystem<F: Real> {
    a: Mat<F>,
    /// p_1(y), ..., p_{n+1}(y), accumulated over y sorted ascending so the
    /// targets are bit-identical for every permutation of y.
    target: Vec<F>,
    scale: Vec<F>,
    sigma: F,
    /// Response values sorted ascending; the solver's matching-based
    /// refinement phases consume these quantiles.
    sorted_y: Vec<F>,
    m: usize,
    n: usize,
}

/// Residual or Jacobian values plus a finiteness flag; overflow to
/// non-finite is reported, not panicked, so the solver can reject the step.
#[derive(Debug, Clone)]
pub struct Eval<F> {
    pub values: Vec<F>,
    pub finite: bool,
}

fn median_abs<F: Real>(values: &[F]) -> F {
    let mut mags: Vec<F> = values.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let k = mags.len();
    if k == 0 {
        return F::zero();
    }
    if k % 2 == 1 {
        mags[k / 2]
    } else {
        (mags[k / 2 - 1] + mags[k / 2]) / F::c(2.0)
    }
}

/// scale_l = 1 / max(1, m * c^l): counteracts the growth of the l-th
/// power-sum equation with the data magnitude c.
fn default_scales<F: Real>(m: usize, n: usize, c: F) -> Vec<F> {
    let mut scales = Vec::with_capacity(n + 1);
    let mf = F::from_usize(m).unwrap();
    let mut cl = F::one();
    for _ in 1..=n + 1 {
        cl = cl * c;
        scales.push(F::one() / (mf * cl).max(F::one()));
    }
    scales
}

impl<F: Real> ResidualSystem<F> {
    /// Compile an instance in the float domain. The initial scales use the
    /// median response magnitude as the data-magnitude estimate; the solver
    /// re-derives them at its first iterate via [`rescaled_at`].
    ///
    /// [`rescaled_at`]: ResidualSystem::rescaled_at
    pub fn compile(inst: &Instance<F>) -> Result<Self, ResidualError> {
        if inst.m < inst.n || inst.n < 1 {
            return Err(ResidualError::BadShape(inst.m, inst.n));
        }
        if inst.a.data().iter().any(|v| !v.is_finite())
            || inst.y.iter().any(|v| !v.is_finite())
        {
            return Err(ResidualError::NonFinite);
        }
        let n = inst.n;
        let m = inst.m;

        let mut sorted = inst.y.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let mut target = vec![F::zero(); n + 1];
        for v in &sorted {
            let mut p = F::one();
            for slot in target.iter_mut() {
                p = p * *v;
                *slot = *slot + p;
            }
        }

        let c = median_abs(&inst.y);
        Ok(ResidualSystem {
            a: inst.a.clone(),
            target,
            scale: default_scales(m, n, c),
            sigma: F::c(inst.sigma),
            sorted_y: sorted,
            m,
            n,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn design(&self) -> &Mat<F> {
        &self.a
    }

    pub fn targets(&self) -> &[F] {
        &self.target
    }

    pub fn scales(&self) -> &[F] {
        &self.scale
    }

    pub fn sigma(&self) -> F {
        self.sigma
    }

    pub fn sorted_y(&self) -> &[F] {
        &self.sorted_y
    }

    pub fn with_unit_scales(mut self) -> Self {
        self.scale = vec![F::one(); self.n + 1];
        self
    }

    pub fn with_scales(mut self, scale: Vec<F>) -> Self {
        assert_eq!(scale.len(), self.n + 1);
        assert!(scale.iter().all(|s| *s > F::zero() && s.is_finite()));
        self.scale = scale;
        self
    }

    /// Default scaling re-estimated at an iterate: c is the median |a_i . x0|.
    pub fn rescaled_at(&self, x0: &[F]) -> Self {
        let inner = self.inner_products(x0);
        let c = median_abs(&inner);
        let mut out = self.clone();
        out.scale = default_scales(self.m, self.n, c);
        out
    }

    fn inner_products(&self, x: &[F]) -> Vec<F> {
        (0..self.m)
            .map(|i| {
                self.a
                    .row(i)
                    .iter()
                    .zip(x)
                    .fold(F::zero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    /// Scaled residual vector `r_l = scale_l * (sum_i (a_i.x)^l - p_l(y))`.
    pub fn residual_eval(&self, x: &[F]) -> Result<Eval<F>, ResidualError> {
        if x.len() != self.n {
            return Err(ResidualError::BadPoint(x.len(), self.n));
        }
        let mut sums = vec![F::zero(); self.n + 1];
        for i in 0..self.m {
            let u = self
                .a
                .row(i)
                .iter()
                .zip(x)
                .fold(F::zero(), |acc, (a, b)| acc + *a * *b);
            let mut p = F::one();
            for slot in sums.iter_mut() {
                p = p * u;
                *slot = *slot + p;
            }
        }
        let values: Vec<F> = sums
            .iter()
            .zip(&self.target)
            .zip(&self.scale)
            .map(|((s, t), w)| *w * (*s - *t))
            .collect();
        let finite = values.iter().all(|v| v.is_finite());
        Ok(Eval { values, finite })
    }

    /// Scaled Jacobian, row-major (n+1) x n:
    /// `J[l][j] = scale_l * l * sum_i (a_i.x)^(l-1) * a_ij`.
    pub fn jacobian_eval(&self, x: &[F]) -> Result<Eval<F>, ResidualError> {
        if x.len() != self.n {
            return Err(ResidualError::BadPoint(x.len(), self.n));
        }
        let rows = self.n + 1;
        let mut jac = vec![F::zero(); rows * self.n];
        for i in 0..self.m {
            let row = self.a.row(i);
            let u = row
                .iter()
                .zip(x)
                .fold(F::zero(), |acc, (a, b)| acc + *a * *b);
            // powers u^(l-1) for l = 1..n+1
            let mut p = F::one();
            for l in 0..rows {
                for (j, aij) in row.iter().enumerate() {
                    jac[l * self.n + j] += p * *aij;
                }
                p = p * u;
            }
        }
        for l in 0..rows {
            let f = self.scale[l] * F::from_usize(l + 1).unwrap();
            for j in 0..self.n {
                jac[l * self.n + j] *= f;
            }
        }
        let finite = jac.iter().all(|v| v.is_finite());
        Ok(Eval {
            values: jac,
            finite,
        })
    }

    /// Euclidean norm of the scaled residual at `x`; infinity when the
    /// evaluation overflows.
    pub fn residual_norm(&self, x: &[F]) -> F {
        match self.residual_eval(x) {
            Ok(e) if e.finite => e
                .values
                .iter()
                .map(|v| *v * *v)
                .fold(F::zero(), |a, b| a + b)
                .sqrt(),
            _ => F::infinity(),
        }
    }
}
