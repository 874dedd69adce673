//! Generation, perturbation, serialization, and validation of
//! unlabeled-sensing instances.
//!
//! Reproducibility contract: all randomness comes from ChaCha8 seeded with
//! the instance's 64-bit master seed; the design matrix, the ground-truth
//! vector, the permutation, and the noise each draw from their own ChaCha
//! stream id, so changing one parameter (e.g. sigma) never shifts the
//! others.

use rand::distributions::Uniform;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mat::Mat;
use crate::scalar::{Coeff, Rat, Real};

const STREAM_DESIGN: u64 = 1;
const STREAM_TRUTH: u64 = 2;
const STREAM_PERM: u64 = 3;
const STREAM_NOISE: u64 = 4;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("m >= n >= 1 required, got m={0}, n={1}")]
    BadShape(usize, usize),
    #[error("noise requires the float domain")]
    NoiseNeedsFloat,
    #[error("negative sigma: {0}")]
    NegativeSigma(f64),
    #[error("instance has zero signal, SNR undefined")]
    ZeroSignal,
    #[error("instance has no ground truth vector")]
    MissingTruth,
    #[error("parse error in field {field}: {value:?}")]
    Parse { field: &'static str, value: String },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Permutation of {0, ..., m-1} stored as its image array.
///
/// `apply` produces the vector with `out[i] = v[image[i]]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(m: usize) -> Self {
        Permutation((0..m).collect())
    }

    pub fn reversal(m: usize) -> Self {
        Permutation((0..m).rev().collect())
    }

    pub fn from_image(image: Vec<usize>) -> Self {
        Permutation(image)
    }

    pub fn image(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_bijection(&self) -> bool {
        let m = self.0.len();
        let mut seen = vec![false; m];
        for &i in &self.0 {
            if i >= m || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        true
    }

    pub fn apply<T: Clone>(&self, v: &[T]) -> Vec<T> {
        self.0.iter().map(|&i| v[i].clone()).collect()
    }

    pub fn inverse(&self) -> Self {
        let mut img = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            img[j] = i;
        }
        Permutation(img)
    }
}

/// One unlabeled-sensing problem: design `a`, permuted (possibly noisy)
/// response `y`, and optional ground truth for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance<C: Coeff> {
    pub m: usize,
    pub n: usize,
    pub a: Mat<C>,
    pub xi_star: Option<Vec<C>>,
    pub pi: Option<Permutation>,
    pub sigma: f64,
    pub y: Vec<C>,
    pub seed: u64,
}

pub type ExactInstance = Instance<Rat>;
pub type FloatInstance = Instance<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Exact,
    Float,
}

/// Either coefficient domain, as read from an instance file.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyInstance {
    Exact(ExactInstance),
    Float(FloatInstance),
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn random_permutation(m: usize, seed: u64) -> Permutation {
    let mut img: Vec<usize> = (0..m).collect();
    img.shuffle(&mut stream(seed, STREAM_PERM));
    Permutation(img)
}

impl ExactInstance {
    /// Seeded noiseless exact instance: entries are p/q with numerator
    /// uniform in [-10^4, 10^4] and denominator uniform in [1, 10^2].
    pub fn generate(m: usize, n: usize, seed: u64) -> Result<Self, InstanceError> {
        if m < n || n < 1 {
            return Err(InstanceError::BadShape(m, n));
        }
        let num = Uniform::new_inclusive(-10_000i64, 10_000);
        let den = Uniform::new_inclusive(1i64, 100);

        let mut rng_a = stream(seed, STREAM_DESIGN);
        let a = Mat::from_vec(
            m,
            n,
            (0..m * n)
                .map(|_| Rat::from_ratio(rng_a.sample(num), rng_a.sample(den)))
                .collect(),
        );

        let mut rng_x = stream(seed, STREAM_TRUTH);
        let xi: Vec<Rat> = (0..n)
            .map(|_| Rat::from_ratio(rng_x.sample(num), rng_x.sample(den)))
            .collect();

        let pi = random_permutation(m, seed);
        let y = pi.apply(&a.mul_vec(&xi));
        Ok(Instance {
            m,
            n,
            a,
            xi_star: Some(xi),
            pi: Some(pi),
            sigma: 0.0,
            y,
            seed,
        })
    }

    /// Lossy conversion for the numeric pipeline.
    pub fn to_float(&self) -> FloatInstance {
        Instance {
            m: self.m,
            n: self.n,
            a: self.a.map(|v| v.approx_f64()),
            xi_star: self.xi_star.as_ref().map(|xs| xs.iter().map(|v| v.approx_f64()).collect()),
            pi: self.pi.clone(),
            sigma: self.sigma,
            y: self.y.iter().map(|v| v.approx_f64()).collect(),
            seed: self.seed,
        }
    }
}

impl FloatInstance {
    /// Seeded float instance: standard-normal design and truth, uniform
    /// random permutation, i.i.d. N(0, sigma^2) noise added to y.
    pub fn generate(m: usize, n: usize, seed: u64, sigma: f64) -> Result<Self, InstanceError> {
        if m < n || n < 1 {
            return Err(InstanceError::BadShape(m, n));
        }
        if sigma < 0.0 {
            return Err(InstanceError::NegativeSigma(sigma));
        }
        let mut rng_a = stream(seed, STREAM_DESIGN);
        let a = Mat::from_vec(
            m,
            n,
            (0..m * n)
                .map(|_| rng_a.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        let mut rng_x = stream(seed, STREAM_TRUTH);
        let xi: Vec<f64> = (0..n)
            .map(|_| rng_x.sample::<f64, _>(StandardNormal))
            .collect();
        let pi = random_permutation(m, seed);
        let mut y = pi.apply(&a.mul_vec(&xi));
        if sigma > 0.0 {
            let mut rng_e = stream(seed, STREAM_NOISE);
            for v in y.iter_mut() {
                *v += sigma * rng_e.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(Instance {
            m,
            n,
            a,
            xi_star: Some(xi),
            pi: Some(pi),
            sigma,
            y,
            seed,
        })
    }
}

/// Dispatching generator matching the CLI surface.
pub fn generate(
    m: usize,
    n: usize,
    seed: u64,
    domain: Domain,
    sigma: f64,
) -> Result<AnyInstance, InstanceError> {
    match domain {
        Domain::Exact => {
            if sigma != 0.0 {
                return Err(InstanceError::NoiseNeedsFloat);
            }
            Ok(AnyInstance::Exact(ExactInstance::generate(m, n, seed)?))
        }
        Domain::Float => Ok(AnyInstance::Float(FloatInstance::generate(
            m, n, seed, sigma,
        )?)),
    }
}

/// Noise level realizing the requested SNR (dB) against the noiseless
/// signal: `10*log10((|A xi|^2 / m) / sigma^2) = snr_db`.
pub fn snr_to_sigma<C: Coeff>(inst: &Instance<C>, snr_db: f64) -> Result<f64, InstanceError> {
    let xi = inst.xi_star.as_ref().ok_or(InstanceError::MissingTruth)?;
    let clean = inst.a.mul_vec(xi);
    let power: f64 = clean.iter().map(|v| v.approx_f64().powi(2)).sum::<f64>() / inst.m as f64;
    if power <= 0.0 {
        return Err(InstanceError::ZeroSignal);
    }
    Ok((power / 10f64.powf(snr_db / 10.0)).sqrt())
}

impl<C: Coeff> Instance<C> {
    /// Invariant check; each violation names the failed invariant.
    /// Violations are data, not errors.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.m < self.n || self.n < 1 {
            v.push("m >= n required".to_string());
        }
        if self.a.nrows() != self.m || self.a.ncols() != self.n {
            v.push("A dimensions do not match (m, n)".to_string());
        }
        if self.y.len() != self.m {
            v.push("y length does not match m".to_string());
        }
        if let Some(xi) = &self.xi_star {
            if xi.len() != self.n {
                v.push("xi_star length does not match n".to_string());
            }
        }
        if self.sigma < 0.0 {
            v.push("sigma must be non-negative".to_string());
        }
        if C::EXACT && self.sigma != 0.0 {
            v.push("exact domain requires sigma = 0".to_string());
        }
        if let Some(pi) = &self.pi {
            if pi.len() != self.m || !pi.is_bijection() {
                v.push("pi not a bijection".to_string());
                return v;
            }
        }
        if self.sigma == 0.0 && v.is_empty() {
            if let (Some(xi), Some(pi)) = (&self.xi_star, &self.pi) {
                let expect = pi.apply(&self.a.mul_vec(xi));
                if C::EXACT {
                    if expect != self.y {
                        v.push("y != pi(A xi_star) on a noiseless instance".to_string());
                    }
                } else {
                    let norm: f64 = self.y.iter().map(|t| t.approx_f64().powi(2)).sum::<f64>().sqrt();
                    let err: f64 = expect
                        .iter()
                        .zip(&self.y)
                        .map(|(e, y)| (e.approx_f64() - y.approx_f64()).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    if err > 1e-12 * norm.max(1.0) {
                        v.push("y != pi(A xi_star) on a noiseless instance".to_string());
                    }
                }
            }
        }
        v
    }
}

// JSON schema: numbers carried as strings to preserve exactness.
#[derive(Serialize, Deserialize)]
struct InstanceJson {
    m: usize,
    n: usize,
    seed: u64,
    domain: String,
    sigma: f64,
    #[serde(rename = "A")]
    a: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi_star: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pi: Option<Vec<usize>>,
    y: Vec<String>,
}

fn render_all<C: Coeff>(vs: &[C]) -> Vec<String> {
    vs.iter().map(|v| v.render()).collect()
}

fn parse_all<C: Coeff>(vs: &[String], field: &'static str) -> Result<Vec<C>, InstanceError> {
    vs.iter()
        .map(|s| {
            C::parse(s).ok_or_else(|| InstanceError::Parse {
                field,
                value: s.clone(),
            })
        })
        .collect()
}

impl<C: Coeff> Instance<C> {
    fn to_json_struct(&self, domain: &str) -> InstanceJson {
        InstanceJson {
            m: self.m,
            n: self.n,
            seed: self.seed,
            domain: domain.to_string(),
            sigma: self.sigma,
            a: render_all(self.a.data()),
            xi_star: self.xi_star.as_ref().map(|xs| render_all(xs)),
            pi: self.pi.as_ref().map(|p| p.image().to_vec()),
            y: render_all(&self.y),
        }
    }

    fn from_json_struct(j: &InstanceJson) -> Result<Self, InstanceError> {
        Ok(Instance {
            m: j.m,
            n: j.n,
            a: Mat::from_vec(j.m, j.n, parse_all(&j.a, "A")?),
            xi_star: j
                .xi_star
                .as_ref()
                .map(|xs| parse_all(xs, "xi_star"))
                .transpose()?,
            pi: j.pi.clone().map(Permutation::from_image),
            sigma: j.sigma,
            y: parse_all(&j.y, "y")?,
            seed: j.seed,
        })
    }
}

impl AnyInstance {
    pub fn to_json(&self) -> String {
        let j = match self {
            AnyInstance::Exact(i) => i.to_json_struct("exact"),
            AnyInstance::Float(i) => i.to_json_struct("float"),
        };
        let mut s = serde_json::to_string_pretty(&j).expect("serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let j: InstanceJson = serde_json::from_str(text)?;
        match j.domain.as_str() {
            "exact" => Ok(AnyInstance::Exact(Instance::from_json_struct(&j)?)),
            "float" => Ok(AnyInstance::Float(Instance::from_json_struct(&j)?)),
            other => Err(InstanceError::Parse {
                field: "domain",
                value: other.to_string(),
            }),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), InstanceError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, InstanceError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn m(&self) -> usize {
        match self {
            AnyInstance::Exact(i) => i.m,
            AnyInstance::Float(i) => i.m,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            AnyInstance::Exact(i) => i.n,
            AnyInstance::Float(i) => i.n,
        }
    }

    pub fn validate(&self) -> Vec<String> {
        match self {
            AnyInstance::Exact(i) => i.validate(),
            AnyInstance::Float(i) => i.validate(),
        }
    }

    /// Float view regardless of the stored domain.
    pub fn to_float(&self) -> FloatInstance {
        match self {
            AnyInstance::Exact(i) => i.to_float(),
            AnyInstance::Float(i) => i.clone(),
        }
    }
}

/// Relative error against ground truth: |x - xi_star| / |xi_star|.
pub fn relative_error<F: Real>(x: &[F], truth: &[F]) -> F {
    let num = x
        .iter()
        .zip(truth)
        .map(|(a, b)| (*a - *b) * (*a - *b))
        .fold(F::zero(), |s, v| s + v)
        .sqrt();
    let den = truth
        .iter()
        .map(|b| *b * *b)
        .fold(F::zero(), |s, v| s + v)
        .sqrt();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qi(v: i64) -> Rat {
        Rat::from_int(v)
    }

    #[test]
    fn reversal_example() {
        // A = [[1,0],[0,1],[1,1]], xi = (1,2): A xi = (1,2,3); reversal -> (3,2,1)
        let a = Mat::from_rows(vec![
            vec![qi(1), qi(0)],
            vec![qi(0), qi(1)],
            vec![qi(1), qi(1)],
        ]);
        let xi = vec![qi(1), qi(2)];
        let pi = Permutation::reversal(3);
        let y = pi.apply(&a.mul_vec(&xi));
        assert_eq!(y, vec![qi(3), qi(2), qi(1)]);

        let inst = Instance {
            m: 3,
            n: 2,
            a,
            xi_star: Some(xi),
            pi: Some(pi),
            sigma: 0.0,
            y,
            seed: 0,
        };
        assert!(inst.validate().is_empty());
    }

    #[test]
    fn generated_instance_is_consistent_and_deterministic() {
        let i1 = ExactInstance::generate(6, 2, 42).unwrap();
        let i2 = ExactInstance::generate(6, 2, 42).unwrap();
        assert_eq!(i1, i2);
        assert!(i1.validate().is_empty());

        let f1 = FloatInstance::generate(50, 3, 7, 0.0).unwrap();
        let f2 = FloatInstance::generate(50, 3, 7, 0.0).unwrap();
        assert_eq!(f1, f2);
        assert!(f1.validate().is_empty());

        // same seed, different sigma: design/truth/permutation unchanged
        let noisy = FloatInstance::generate(50, 3, 7, 0.5).unwrap();
        assert_eq!(noisy.a, f1.a);
        assert_eq!(noisy.xi_star, f1.xi_star);
        assert_eq!(noisy.pi, f1.pi);
        assert_ne!(noisy.y, f1.y);
    }

    #[test]
    fn exact_domain_rejects_noise() {
        assert!(matches!(
            generate(4, 2, 1, Domain::Exact, 0.1),
            Err(InstanceError::NoiseNeedsFloat)
        ));
    }

    #[test]
    fn bad_shape_rejected() {
        assert!(matches!(
            ExactInstance::generate(2, 4, 1),
            Err(InstanceError::BadShape(2, 4))
        ));
    }

    #[test]
    fn validate_reports_violations() {
        let mut inst = ExactInstance::generate(3, 2, 5).unwrap();
        inst.pi = Some(Permutation::from_image(vec![0, 0, 1]));
        let v = inst.validate();
        assert!(v.iter().any(|s| s.contains("pi not a bijection")), "{v:?}");

        let mut bad_shape = ExactInstance::generate(3, 2, 5).unwrap();
        bad_shape.m = 1;
        let v = bad_shape.validate();
        assert!(v.iter().any(|s| s.contains("m >= n required")), "{v:?}");

        let mut inconsistent = ExactInstance::generate(3, 2, 5).unwrap();
        inconsistent.y[0] = &inconsistent.y[0] + &qi(1);
        let v = inconsistent.validate();
        assert!(v.iter().any(|s| s.contains("noiseless")), "{v:?}");
    }

    #[test]
    fn snr_formula_frozen_values() {
        // per-coordinate signal power 1, 40 dB -> sigma 0.01
        let inst = Instance::<f64> {
            m: 2,
            n: 1,
            a: Mat::from_rows(vec![vec![1.0], vec![1.0]]),
            xi_star: Some(vec![1.0]),
            pi: Some(Permutation::identity(2)),
            sigma: 0.0,
            y: vec![1.0, 1.0],
            seed: 0,
        };
        let s = snr_to_sigma(&inst, 40.0).unwrap();
        assert!((s - 0.01).abs() < 1e-15);

        // power 4 at 20 dB -> sigma 0.2
        let inst2 = Instance::<f64> {
            m: 2,
            n: 1,
            a: Mat::from_rows(vec![vec![2.0], vec![2.0]]),
            xi_star: Some(vec![1.0]),
            pi: Some(Permutation::identity(2)),
            sigma: 0.0,
            y: vec![2.0, 2.0],
            seed: 0,
        };
        let s2 = snr_to_sigma(&inst2, 20.0).unwrap();
        assert!((s2 - 0.2).abs() < 1e-15);

        // limit: snr -> large drives sigma -> 0
        assert!(snr_to_sigma(&inst, 300.0).unwrap() < 1e-14);
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        for any in [
            AnyInstance::Exact(ExactInstance::generate(5, 2, 99).unwrap()),
            AnyInstance::Float(FloatInstance::generate(5, 2, 99, 0.25).unwrap()),
        ] {
            let text = any.to_json();
            let parsed = AnyInstance::from_json(&text).unwrap();
            assert_eq!(parsed, any);
            assert_eq!(parsed.to_json(), text);
        }
    }

    #[test]
    fn permutation_inverse_round_trip() {
        let p = Permutation::from_image(vec![2, 0, 3, 1]);
        assert!(p.is_bijection());
        let v = vec![10, 20, 30, 40];
        let w = p.apply(&v);
        assert_eq!(w, vec![30, 10, 40, 20]);
        assert_eq!(p.inverse().apply(&w), v);
    }
}
