//! Numeric recovery by damped Gauss-Newton (Levenberg-Marquardt) multistart
//! on the power-sum system, followed by permutation recovery via rank
//! matching and an ordinary least-squares refit.
//!
//! The certificate logic rests on the uniqueness of the system's solution
//! for generic data: any iterate that drives the residual to zero is the
//! ground truth, so a converged start certifies itself.

use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::instance::{relative_error, Instance, Permutation};
use crate::mat::Mat;
use crate::residual::ResidualSystem;
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("degenerate design: smallest singular value below 1e-10 of largest")]
    DegenerateDesign,
    #[error("ambiguous matching: two entries within tie tolerance")]
    AmbiguousMatching,
    #[error("rank-deficient design in least-squares refit")]
    RankDeficient,
}

/// Levenberg-Marquardt multistart configuration.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub starts: usize,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub lm_lambda0: f64,
    pub lm_up: f64,
    pub lm_down: f64,
    pub start_radius: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            starts: 16,
            max_iters: 200,
            residual_tol: 1e-10,
            lm_lambda0: 1e-3,
            lm_up: 10.0,
            lm_down: 0.1,
            start_radius: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Certificate {
    #[serde(rename = "unique-root")]
    UniqueRoot,
    #[serde(rename = "approximate")]
    Approximate,
    #[serde(rename = "none")]
    None,
}

/// One start's descent: final iterate plus the accepted residual norms
/// (monotone non-increasing by construction).
#[derive(Debug, Clone)]
pub struct StartRun<F> {
    pub x: Vec<F>,
    pub norm: F,
    pub iters: usize,
    pub converged: bool,
    pub accepted_norms: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct SolveReport<F: Real> {
    pub xi_hat: Vec<F>,
    pub pi_hat: Option<Permutation>,
    pub residual_norm: F,
    pub certificate: Certificate,
    pub converged_starts: usize,
    pub best_start_index: usize,
    pub refit_xi: Option<Vec<F>>,
    pub relative_error: Option<F>,
    pub noise_floor: Option<F>,
    pub scales: Vec<F>,
    pub wall_time: Duration,
    pub config: SolverConfig,
    pub start_norms: Vec<F>,
}

#[derive(Serialize)]
struct ReportJson {
    xi_hat: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pi_hat: Option<Vec<usize>>,
    residual_norm: f64,
    certificate: Certificate,
    converged_starts: usize,
    best_start_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    refit_xi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_floor: Option<f64>,
    scales: Vec<f64>,
    config: SolverConfig,
}

impl<F: Real> SolveReport<F> {
    /// Deterministic JSON: wall time is deliberately excluded so equal
    /// seeds produce byte-identical reports.
    pub fn to_json(&self) -> String {
        let j = ReportJson {
            xi_hat: self.xi_hat.iter().map(|v| v.approx_f64()).collect(),
            pi_hat: self.pi_hat.as_ref().map(|p| p.image().to_vec()),
            residual_norm: self.residual_norm.approx_f64(),
            certificate: self.certificate,
            converged_starts: self.converged_starts,
            best_start_index: self.best_start_index,
            refit_xi: self
                .refit_xi
                .as_ref()
                .map(|v| v.iter().map(|x| x.approx_f64()).collect()),
            relative_error: self.relative_error.map(|v| v.approx_f64()),
            noise_floor: self.noise_floor.map(|v| v.approx_f64()),
            scales: self.scales.iter().map(|v| v.approx_f64()).collect(),
            config: self.config.clone(),
        };
        let mut s = serde_json::to_string_pretty(&j).expect("serializable");
        s.push('\n');
        s
    }
}

// ---------------------------------------------------------------------------
// Small dense numerics (n <= ~10 throughout).

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn sym_eigenvalues<F: Real>(mut a: Vec<Vec<F>>) -> Vec<F> {
    let n = a.len();
    if n == 1 {
        return vec![a[0][0]];
    }
    for _sweep in 0..60 {
        let mut off = F::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + a[p][q] * a[p][q];
            }
        }
        if off.sqrt() <= F::c(1e-30) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() <= F::c(1e-300) {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (F::c(2.0) * a[p][q]);
                let t = {
                    let s = if theta >= F::zero() { F::one() } else { -F::one() };
                    s / (theta.abs() + (theta * theta + F::one()).sqrt())
                };
                let c = F::one() / (t * t + F::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Singular value extremes of a rectangular matrix via the Gram matrix.
fn singular_extremes<F: Real>(a: &Mat<F>) -> (F, F) {
    let n = a.ncols();
    let mut gram = vec![vec![F::zero(); n]; n];
    for i in 0..a.nrows() {
        let row = a.row(i);
        for p in 0..n {
            for q in p..n {
                gram[p][q] += row[p] * row[q];
            }
        }
    }
    for p in 0..n {
        for q in 0..p {
            gram[p][q] = gram[q][p];
        }
    }
    let eigs = sym_eigenvalues(gram);
    let mut smin = F::infinity();
    let mut smax = F::zero();
    for e in eigs {
        let s = e.max(F::zero()).sqrt();
        smin = smin.min(s);
        smax = smax.max(s);
    }
    (smin, smax)
}

/// Solve (SPD) `a x = b` in place by Cholesky; `None` if not positive
/// definite within rounding.
fn cholesky_solve<F: Real>(mut a: Vec<Vec<F>>, mut b: Vec<F>) -> Option<Vec<F>> {
    let n = a.len();
    for k in 0..n {
        for j in 0..k {
            let f = a[k][j];
            for i in k..n {
                let t = a[i][j];
                a[i][k] = a[i][k] - t * f;
            }
        }
        let d = a[k][k];
        if !(d > F::zero()) || !d.is_finite() {
            return None;
        }
        let r = d.sqrt();
        for i in k..n {
            a[i][k] = a[i][k] / r;
        }
    }
    // forward: L z = b
    for i in 0..n {
        for j in 0..i {
            let t = a[i][j] * b[j];
            b[i] = b[i] - t;
        }
        b[i] = b[i] / a[i][i];
    }
    // backward: L^T x = z
    for i in (0..n).rev() {
        for j in i + 1..n {
            let t = a[j][i] * b[j];
            b[i] = b[i] - t;
        }
        b[i] = b[i] / a[i][i];
    }
    Some(b)
}

/// Least squares by Householder QR; errors when the triangular factor shows
/// rank deficiency.
fn qr_least_squares<F: Real>(a: &Mat<F>, b: &[F]) -> Result<Vec<F>, SolveError> {
    let m = a.nrows();
    let n = a.ncols();
    if m < n {
        return Err(SolveError::RankDeficient);
    }
    let mut r: Vec<Vec<F>> = (0..m).map(|i| a.row(i).to_vec()).collect();
    let mut rhs = b.to_vec();
    let mut max_diag = F::zero();
    for k in 0..n {
        let mut norm = F::zero();
        for row in r.iter().skip(k) {
            norm = norm + row[k] * row[k];
        }
        let norm = norm.sqrt();
        if norm <= F::c(1e-300) {
            return Err(SolveError::RankDeficient);
        }
        let alpha = if r[k][k] >= F::zero() { -norm } else { norm };
        let mut v: Vec<F> = (k..m).map(|i| r[i][k]).collect();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().map(|x| *x * *x).fold(F::zero(), |s, t| s + t);
        if vnorm2 > F::zero() {
            for j in k..n {
                let dot = (k..m)
                    .map(|i| v[i - k] * r[i][j])
                    .fold(F::zero(), |s, t| s + t);
                let f = F::c(2.0) * dot / vnorm2;
                for i in k..m {
                    let t = f * v[i - k];
                    r[i][j] = r[i][j] - t;
                }
            }
            let dot = (k..m)
                .map(|i| v[i - k] * rhs[i])
                .fold(F::zero(), |s, t| s + t);
            let f = F::c(2.0) * dot / vnorm2;
            for i in k..m {
                let t = f * v[i - k];
                rhs[i] = rhs[i] - t;
            }
        }
        max_diag = max_diag.max(r[k][k].abs());
    }
    for k in 0..n {
        if r[k][k].abs() <= F::c(1e-12) * max_diag {
            return Err(SolveError::RankDeficient);
        }
    }
    let mut x = vec![F::zero(); n];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in i + 1..n {
            let t = r[i][j] * x[j];
            acc = acc - t;
        }
        x[i] = acc / r[i][i];
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Levenberg-Marquardt.

/// Single LM descent from `x0`. Accepted steps strictly decrease the scaled
/// residual norm; rejected steps raise the damping.
pub fn lm_descend<F: Real>(
    sys: &ResidualSystem<F>,
    x0: &[F],
    config: &SolverConfig,
) -> StartRun<F> {
    let n = sys.n();
    let rows = n + 1;
    let tol = F::c(config.residual_tol);
    let mut x = x0.to_vec();

    // Overflow backoff: shrink wild initial points until evaluable.
    let mut norm = sys.residual_norm(&x);
    let mut shrink = 0;
    while !norm.is_finite() && shrink < 80 {
        for v in x.iter_mut() {
            *v = *v * F::c(0.1);
        }
        norm = sys.residual_norm(&x);
        shrink += 1;
    }

    let mut lambda = F::c(config.lm_lambda0);
    let up = F::c(config.lm_up);
    let down = F::c(config.lm_down);
    let mut accepted = vec![norm];
    let mut iters = 0;

    while iters < config.max_iters && norm > tol {
        iters += 1;
        let jac = match sys.jacobian_eval(&x) {
            Ok(e) if e.finite => e.values,
            _ => break,
        };
        let res = match sys.residual_eval(&x) {
            Ok(e) if e.finite => e.values,
            _ => break,
        };
        // normal equations J^T J + lambda diag(J^T J)
        let mut jtj = vec![vec![F::zero(); n]; n];
        let mut jtr = vec![F::zero(); n];
        for l in 0..rows {
            for p in 0..n {
                let jlp = jac[l * n + p];
                jtr[p] += jlp * res[l];
                for q in p..n {
                    jtj[p][q] += jlp * jac[l * n + q];
                }
            }
        }
        for p in 0..n {
            for q in 0..p {
                jtj[p][q] = jtj[q][p];
            }
        }
        let max_diag = (0..n).fold(F::zero(), |acc, p| acc.max(jtj[p][p]));
        let floor = (max_diag * F::c(1e-14)).max(F::c(1e-300));

        let mut improved = false;
        // inner damping loop: retry the same point with larger lambda
        for _ in 0..40 {
            let mut lhs = jtj.clone();
            for p in 0..n {
                let d = jtj[p][p].max(floor);
                lhs[p][p] = lhs[p][p] + lambda * d;
            }
            let rhs: Vec<F> = jtr.iter().map(|v| -*v).collect();
            let Some(delta) = cholesky_solve(lhs, rhs) else {
                lambda = lambda * up;
                continue;
            };
            let cand: Vec<F> = x.iter().zip(&delta).map(|(a, d)| *a + *d).collect();
            let cand_norm = sys.residual_norm(&cand);
            if cand_norm < norm {
                x = cand;
                norm = cand_norm;
                accepted.push(norm);
                lambda = (lambda * down).max(F::c(1e-14));
                improved = true;
                break;
            }
            lambda = lambda * up;
            if lambda > F::c(1e18) {
                break;
            }
        }
        if !improved {
            break;
        }
    }

    StartRun {
        converged: norm <= tol,
        x,
        norm,
        iters,
        accepted_norms: accepted,
    }
}

/// Deterministic start point for stream `k`: an isotropic normal vector at
/// the configured radius.
fn start_point<F: Real>(n: usize, radius: F, seed: u64, k: u64) -> Vec<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    (0..n)
        .map(|_| F::c(rng.sample::<f64, _>(StandardNormal)) * radius)
        .collect()
}

// ---------------------------------------------------------------------------
// Matching-based refinement. The power-sum landscape has spurious
// least-squares minima whose basins shrink rapidly with n, so a descent
// alone rarely reaches the root from a random point. Each start therefore
// augments its LM descent with rank-matching refit steps and bounded
// basin-hopping on the sorted-matching cost; the certificate is still
// decided solely by the power-sum residual.

fn lstsq_normal<F: Real>(a: &Mat<F>, b: &[F]) -> Option<Vec<F>> {
    let n = a.ncols();
    let mut gram = vec![vec![F::zero(); n]; n];
    let mut atb = vec![F::zero(); n];
    for i in 0..a.nrows() {
        let row = a.row(i);
        for p in 0..n {
            atb[p] += row[p] * b[i];
            for q in p..n {
                gram[p][q] += row[p] * row[q];
            }
        }
    }
    for p in 0..n {
        for q in 0..p {
            gram[p][q] = gram[q][p];
        }
    }
    cholesky_solve(gram, atb)
}

/// One pass of rank matching: assign the k-th smallest response to the row
/// holding the k-th smallest fitted value, then refit. Returns the refit
/// point and the squared matching cost at it.
fn matching_refit<F: Real>(a: &Mat<F>, sorted_y: &[F], x: &[F]) -> Option<(Vec<F>, F)> {
    let m = sorted_y.len();
    let v = a.mul_vec(x);
    if v.iter().any(|t| !t.is_finite()) {
        return None;
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).expect("finite"));
    let mut aligned = vec![F::zero(); m];
    for (k, &i) in order.iter().enumerate() {
        aligned[i] = sorted_y[k];
    }
    let xn = lstsq_normal(a, &aligned)?;
    let vn = a.mul_vec(&xn);
    let cost = vn
        .iter()
        .zip(&aligned)
        .map(|(p, q)| (*p - *q) * (*p - *q))
        .fold(F::zero(), |s, t| s + t);
    Some((xn, cost))
}

/// Iterate [`matching_refit`] to a fixed point.
fn matching_fixpoint<F: Real>(
    a: &Mat<F>,
    sorted_y: &[F],
    x0: &[F],
    max_iters: usize,
) -> Option<(Vec<F>, F)> {
    let mut x = x0.to_vec();
    let mut cost = F::infinity();
    for _ in 0..max_iters {
        let (xn, cn) = matching_refit(a, sorted_y, &x)?;
        let step: F = xn
            .iter()
            .zip(&x)
            .map(|(p, q)| (*p - *q).abs())
            .fold(F::zero(), |s, t| s + t);
        x = xn;
        cost = cn;
        if step <= F::c(1e-14) {
            break;
        }
    }
    Some((x, cost))
}

/// Monotone basin-hopping on the matching cost: random kicks around the
/// best fixed point, keeping strict improvements. `floor` is the expected
/// cost at the solution (0 noiseless, ~sigma^2 (m-n) noisy).
fn basin_hop<F: Real>(
    a: &Mat<F>,
    sorted_y: &[F],
    x0: &[F],
    hops: usize,
    floor: F,
    rng: &mut ChaCha8Rng,
) -> (Vec<F>, F) {
    let (mut best_x, mut best_cost) = match matching_fixpoint(a, sorted_y, x0, 120) {
        Some(r) => r,
        None => (x0.to_vec(), F::infinity()),
    };
    for _ in 0..hops {
        if best_cost <= floor {
            break;
        }
        let scale = best_x
            .iter()
            .map(|v| *v * *v)
            .fold(F::zero(), |s, t| s + t)
            .sqrt()
            .max(F::c(1e-9));
        let kick = F::c(0.2 + 0.3 * rng.gen::<f64>());
        let cand: Vec<F> = best_x
            .iter()
            .map(|v| *v + kick * scale * F::c(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        if let Some((xc, cc)) = matching_fixpoint(a, sorted_y, &cand, 120) {
            if cc < best_cost {
                best_x = xc;
                best_cost = cc;
            }
        }
    }
    (best_x, best_cost)
}

/// Exact assignment search for tiny instances (m <= 12): enumerate all
/// permutations with Heap's algorithm, tracking the least-squares residual
/// of each alignment incrementally through a thin orthonormal basis of
/// col(A). Returns the refit under the best alignment.
fn exhaustive_assignment<F: Real>(a: &Mat<F>, sorted_y: &[F]) -> Option<Vec<F>> {
    let m = a.nrows();
    let n = a.ncols();
    // modified Gram-Schmidt with reorthogonalization; m <= 12 keeps this tame
    let mut q = vec![vec![F::zero(); m]; n];
    for j in 0..n {
        let mut col: Vec<F> = (0..m).map(|i| *a.at(i, j)).collect();
        for _ in 0..2 {
            for prev in q.iter().take(j) {
                let dot = prev
                    .iter()
                    .zip(&col)
                    .map(|(p, c)| *p * *c)
                    .fold(F::zero(), |s, t| s + t);
                for (c, p) in col.iter_mut().zip(prev) {
                    *c -= dot * *p;
                }
            }
        }
        let norm = col.iter().map(|c| *c * *c).fold(F::zero(), |s, t| s + t).sqrt();
        if norm <= F::c(1e-12) {
            return None;
        }
        for c in col.iter_mut() {
            *c = *c / norm;
        }
        q[j] = col;
    }

    let y2 = sorted_y
        .iter()
        .map(|v| *v * *v)
        .fold(F::zero(), |s, t| s + t);
    let mut b = sorted_y.to_vec();
    // w = Q^T b, maintained incrementally across Heap's swaps
    let mut w: Vec<F> = (0..n)
        .map(|j| {
            q[j].iter()
                .zip(&b)
                .map(|(p, c)| *p * *c)
                .fold(F::zero(), |s, t| s + t)
        })
        .collect();
    let proj = |w: &[F]| w.iter().map(|v| *v * *v).fold(F::zero(), |s, t| s + t);

    let mut best_cost = y2 - proj(&w);
    let mut best_b = b.clone();
    let mut counters = vec![0usize; m];
    let mut i = 1;
    while i < m {
        if counters[i] < i {
            let (p1, p2) = if i % 2 == 0 { (0, i) } else { (counters[i], i) };
            let (va, vb) = (b[p1], b[p2]);
            b[p1] = vb;
            b[p2] = va;
            let delta = vb - va;
            for j in 0..n {
                w[j] += delta * (q[j][p1] - q[j][p2]);
            }
            let cost = y2 - proj(&w);
            if cost < best_cost {
                best_cost = cost;
                best_b = b.clone();
            }
            counters[i] += 1;
            i = 1;
        } else {
            counters[i] = 0;
            i += 1;
        }
    }
    lstsq_normal(a, &best_b)
}

/// Predicted scaled residual magnitude at the noise level sigma: first-order
/// propagation of the response noise through each power-sum equation.
fn noise_floor<F: Real>(sys: &ResidualSystem<F>, x: &[F]) -> F {
    let sigma = sys.sigma();
    if sigma <= F::zero() {
        return F::zero();
    }
    let n = sys.n();
    let u = (0..sys.m()).map(|i| {
        sys.design()
            .row(i)
            .iter()
            .zip(x)
            .fold(F::zero(), |acc, (a, b)| acc + *a * *b)
    });
    // even power sums p_0 .. p_{2n} of the fitted responses
    let mut even = vec![F::zero(); 2 * n + 1];
    for ui in u {
        let mut p = F::one();
        for slot in even.iter_mut() {
            *slot = *slot + p;
            p = p * ui;
        }
    }
    let mut acc = F::zero();
    for l in 1..=n + 1 {
        let fl = sys.scales()[l - 1] * F::from_usize(l).unwrap() * sigma
            * even[2 * (l - 1)].max(F::zero()).sqrt();
        acc = acc + fl * fl;
    }
    acc.sqrt()
}

/// One start of the multistart search. The seeded random point feeds a
/// best-of-pool ranking, an LM descent, and (when the descent stalls short
/// of the tolerance) matching-based refinement with basin-hopping, each
/// followed by an LM polish. Start 0 of a tiny instance (m <= 12) replaces
/// the random search with the exact assignment enumeration.
fn run_start<F: Real>(
    scaled: &ResidualSystem<F>,
    radius: F,
    config: &SolverConfig,
    k: usize,
) -> StartRun<F> {
    let n = scaled.n();
    let m = scaled.m();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(k as u64);

    if k == 0 && m <= 12 {
        if let Some(x) = exhaustive_assignment(scaled.design(), scaled.sorted_y()) {
            let run = lm_descend(scaled, &x, config);
            if run.converged {
                return run;
            }
        }
    }

    // candidate pool ranked by the scaled residual; the best seeds the LM
    let pool = 256.max(2 * m);
    let mut x0: Vec<F> = (0..n)
        .map(|_| radius * F::c(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let mut best_norm = scaled.residual_norm(&x0);
    for _ in 1..pool {
        let cand: Vec<F> = (0..n)
            .map(|_| radius * F::c(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let norm = scaled.residual_norm(&cand);
        if norm < best_norm {
            best_norm = norm;
            x0 = cand;
        }
    }

    let mut best = lm_descend(scaled, &x0, config);
    if best.converged {
        return best;
    }

    // matching refinement: alternating fixed point, then basin hops
    let sigma = scaled.sigma();
    let dof = F::from_usize(m.saturating_sub(n)).unwrap();
    let spread = scaled.sorted_y()[m - 1] - scaled.sorted_y()[0];
    let cost_floor =
        sigma * sigma * dof * F::c(1.5) + F::c(1e-24) * spread * spread * F::from_usize(m).unwrap();
    let hops = (60_000 / m).clamp(8, 120) + 12 * n;
    let (hop_x, _) = basin_hop(
        scaled.design(),
        scaled.sorted_y(),
        &best.x,
        hops,
        cost_floor,
        &mut rng,
    );
    let polished = lm_descend(scaled, &hop_x, config);
    if polished.norm < best.norm {
        best = polished;
    }
    best
}

/// Multistart solve: runs `config.starts` independent searches from seeded
/// random points (LM descents plus matching-based refinement) and keeps the
/// minimum-residual iterate (ties go to the lowest start index).
pub fn solve<F: Real>(
    sys: &ResidualSystem<F>,
    config: &SolverConfig,
) -> Result<SolveReport<F>, SolveError> {
    let t0 = Instant::now();
    let (smin, smax) = singular_extremes(sys.design());
    if !(smin > F::c(1e-10) * smax) {
        return Err(SolveError::DegenerateDesign);
    }
    // |y| = sqrt(p_2(y)); radius start_radius * |y| / sigma_min(A)
    let y_norm = sys.targets()[1].max(F::zero()).sqrt();
    let radius = F::c(config.start_radius) * y_norm / smin;

    let x0_first = start_point::<F>(sys.n(), radius, config.seed, 0);
    let scaled = sys.rescaled_at(&x0_first);

    let mut runs: Vec<StartRun<F>> = Vec::with_capacity(config.starts);
    for k in 0..config.starts {
        runs.push(run_start(&scaled, radius, config, k));
    }

    let tol = F::c(config.residual_tol);
    let mut best = 0;
    for (k, run) in runs.iter().enumerate() {
        if run.norm < runs[best].norm {
            best = k;
        }
    }
    let converged_starts = runs.iter().filter(|r| r.norm <= tol).count();
    let best_run = &runs[best];

    let floor = noise_floor(&scaled, &best_run.x);
    let certificate = if best_run.norm <= tol {
        Certificate::UniqueRoot
    } else if sys.sigma() > F::zero() && best_run.norm <= F::c(10.0) * floor {
        Certificate::Approximate
    } else {
        Certificate::None
    };

    Ok(SolveReport {
        xi_hat: best_run.x.clone(),
        pi_hat: None,
        residual_norm: best_run.norm,
        certificate,
        converged_starts,
        best_start_index: best,
        refit_xi: None,
        relative_error: None,
        noise_floor: if sys.sigma() > F::zero() {
            Some(floor)
        } else {
            None
        },
        scales: scaled.scales().to_vec(),
        wall_time: t0.elapsed(),
        config: config.clone(),
        start_norms: runs.iter().map(|r| r.norm).collect(),
    })
}

/// Match responses to fitted values by sorting both and pairing ranks.
/// Returns `pi_hat` with `y[pi_hat[i]] ~= (A xi_hat)_i`. Generic data have
/// pairwise-distinct entries; ties within `1e-9 * spread` are an error, not
/// a silent choice.
pub fn recover_permutation<F: Real>(
    a: &Mat<F>,
    xi_hat: &[F],
    y: &[F],
) -> Result<Permutation, SolveError> {
    let v = a.mul_vec(xi_hat);
    let order_of = |vals: &[F]| -> Result<Vec<usize>, SolveError> {
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        idx.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).expect("finite"));
        let spread = vals[idx[vals.len() - 1]] - vals[idx[0]];
        let tol = F::c(1e-9) * spread;
        for w in idx.windows(2) {
            if vals[w[1]] - vals[w[0]] <= tol {
                return Err(SolveError::AmbiguousMatching);
            }
        }
        Ok(idx)
    };
    let iv = order_of(&v)?;
    let iy = order_of(y)?;
    let mut image = vec![0usize; y.len()];
    for (a, b) in iv.iter().zip(&iy) {
        image[*a] = *b;
    }
    Ok(Permutation::from_image(image))
}

/// Ordinary least squares on the unshuffled system `A x = pi_hat(y)` via
/// Householder QR.
pub fn refit<F: Real>(a: &Mat<F>, y: &[F], pi_hat: &Permutation) -> Result<Vec<F>, SolveError> {
    let aligned = pi_hat.apply(y);
    qr_least_squares(a, &aligned)
}

/// Full pipeline: compile, solve, recover the permutation, refit, and fill
/// in the ground-truth error when the instance carries it.
pub fn run_pipeline<F: Real>(
    inst: &Instance<F>,
    config: &SolverConfig,
) -> Result<SolveReport<F>, SolveError> {
    let sys = ResidualSystem::compile(inst).map_err(|_| SolveError::DegenerateDesign)?;
    let mut report = solve(&sys, config)?;
    if let Ok(pi_hat) = recover_permutation(&inst.a, &report.xi_hat, &inst.y) {
        if let Ok(x) = refit(&inst.a, &inst.y, &pi_hat) {
            report.refit_xi = Some(x);
        }
        report.pi_hat = Some(pi_hat);
    }
    if let Some(truth) = &inst.xi_star {
        let est = report.refit_xi.as_ref().unwrap_or(&report.xi_hat);
        report.relative_error = Some(relative_error(est, truth));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::FloatInstance;

    fn small_instance() -> FloatInstance {
        Instance {
            m: 3,
            n: 2,
            a: Mat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]),
            xi_star: Some(vec![1.0, 2.0]),
            pi: Some(Permutation::reversal(3)),
            sigma: 0.0,
            y: vec![3.0, 2.0, 1.0],
            seed: 0,
        }
    }

    #[test]
    fn solves_tiny_noiseless_instance() {
        // This design has a row symmetry swapping x1 and x2, so both (1,2)
        // and (2,1) reproduce y exactly; the residual check is the oracle.
        let sys = ResidualSystem::compile(&small_instance()).unwrap();
        let report = solve(&sys, &SolverConfig::default()).unwrap();
        assert_eq!(report.certificate, Certificate::UniqueRoot);
        let mut xs = report.xi_hat.clone();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((xs[0] - 1.0).abs() < 1e-8 && (xs[1] - 2.0).abs() < 1e-8, "{xs:?}");
    }

    #[test]
    fn solves_n4_m1000() {
        let inst = FloatInstance::generate(1000, 4, 17, 0.0).unwrap();
        let report = run_pipeline(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(report.certificate, Certificate::UniqueRoot);
        assert!(report.relative_error.unwrap() <= 1e-8);
    }

    #[test]
    fn deterministic_reports() {
        let inst = FloatInstance::generate(60, 3, 5, 0.0).unwrap();
        let config = SolverConfig {
            starts: 4,
            seed: 3,
            ..SolverConfig::default()
        };
        let r1 = run_pipeline(&inst, &config).unwrap();
        let r2 = run_pipeline(&inst, &config).unwrap();
        assert_eq!(r1.to_json(), r2.to_json());
    }

    #[test]
    fn start_set_grows_monotonically() {
        let inst = FloatInstance::generate(40, 3, 9, 0.0).unwrap();
        let sys = ResidualSystem::compile(&inst).unwrap();
        let base = SolverConfig {
            starts: 4,
            seed: 11,
            ..SolverConfig::default()
        };
        let more = SolverConfig {
            starts: 8,
            ..base.clone()
        };
        let r4 = solve(&sys, &base).unwrap();
        let r8 = solve(&sys, &more).unwrap();
        assert_eq!(r4.start_norms[..4], r8.start_norms[..4]);
        assert!(r8.converged_starts >= r4.converged_starts);
    }

    #[test]
    fn accepted_norms_never_increase() {
        let inst = FloatInstance::generate(25, 2, 21, 0.0).unwrap();
        let sys = ResidualSystem::compile(&inst).unwrap();
        let config = SolverConfig::default();
        let x0 = vec![0.5, -2.0];
        let run = lm_descend(&sys.rescaled_at(&x0), &x0, &config);
        for w in run.accepted_norms.windows(2) {
            assert!(w[1] <= w[0], "{:?}", run.accepted_norms);
        }
    }

    #[test]
    fn converged_solves_agree_across_seeds() {
        // uniqueness made observable: independently seeded searches that
        // both certify must have found the same point
        let inst = FloatInstance::generate(100, 3, 33, 0.0).unwrap();
        let sys = ResidualSystem::compile(&inst).unwrap();
        let mut points = Vec::new();
        for seed in [0u64, 1, 2] {
            let config = SolverConfig {
                seed,
                ..SolverConfig::default()
            };
            let report = solve(&sys, &config).unwrap();
            assert_eq!(report.certificate, Certificate::UniqueRoot, "seed {seed}");
            points.push(report.xi_hat);
        }
        for pair in points.windows(2) {
            let rel: f64 = relative_error(&pair[1], &pair[0]);
            assert!(rel <= 1e-6, "seeded solves disagree: {rel}");
        }
    }

    #[test]
    fn degenerate_design_is_an_error() {
        let inst = Instance {
            m: 3,
            n: 2,
            a: Mat::from_rows(vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]),
            xi_star: None,
            pi: None,
            sigma: 0.0,
            y: vec![1.0, 2.0, 3.0],
            seed: 0,
        };
        let sys = ResidualSystem::compile(&inst).unwrap();
        assert_eq!(
            solve(&sys, &SolverConfig::default()).unwrap_err(),
            SolveError::DegenerateDesign
        );
    }

    #[test]
    fn permutation_recovery_cases() {
        let a = Mat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        // A xi = (1,2,3), y = (3,2,1): expect reversal
        let p = recover_permutation(&a, &[1.0, 2.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(p.image(), &[2, 1, 0]);
        // identity case
        let p = recover_permutation(&a, &[1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.image(), &[0, 1, 2]);
        // ties are an error
        let err = recover_permutation(&a, &[1.0, 1.0], &[1.0, 2.0, 2.0]);
        assert_eq!(err.unwrap_err(), SolveError::AmbiguousMatching);
    }

    #[test]
    fn refit_exact_on_noiseless() {
        let inst = FloatInstance::generate(30, 4, 8, 0.0).unwrap();
        let report = run_pipeline(&inst, &SolverConfig::default()).unwrap();
        let truth = inst.xi_star.as_ref().unwrap();
        let refit_xi = report.refit_xi.as_ref().unwrap();
        let rel: f64 = relative_error(refit_xi, truth);
        assert!(rel <= 1e-12, "refit rel err {rel}");
        // recovered permutation matches the generator's
        let expect = inst.pi.as_ref().unwrap().inverse();
        assert_eq!(report.pi_hat.as_ref().unwrap(), &expect);
    }

    #[test]
    fn refit_identity_design_returns_aligned_y() {
        let a = Mat::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let y = vec![5.0, -3.0];
        let pi = Permutation::from_image(vec![1, 0]);
        let x: Vec<f64> = refit(&a, &y, &pi).unwrap();
        assert!((x[0] - -3.0).abs() < 1e-14);
        assert!((x[1] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn refit_rank_deficient_errors() {
        let a = Mat::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]);
        let pi = Permutation::identity(3);
        assert_eq!(
            refit(&a, &[1.0, 2.0, 3.0], &pi).unwrap_err(),
            SolveError::RankDeficient
        );
    }
}
