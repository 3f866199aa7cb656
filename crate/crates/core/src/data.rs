//! Sample containers, Gaussian generation, corruption adversaries, and the
//! norm-separation hardness instance.
//!
//! Corruption follows the strong contamination model: the adversary inspects
//! the clean draw and replaces exactly `floor(eps * N)` columns with
//! arbitrary points. Synthetic adversaries record which columns they touched
//! so tests and benchmarks can score recovery.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::matrix::CovMatrix;
use crate::seed::{self, tag};

/// Ceiling for the corruption fraction accepted by the adversaries. Looser
/// than the estimators' ceiling: test fixtures legitimately corrupt more
/// than the estimators can tolerate.
pub const ADVERSARY_MAX_EPS: f64 = 0.5;

/// `d x N` sample matrix (column `i` is sample `i`) with optional
/// bookkeeping of which columns an adversary replaced.
#[derive(Debug, Clone)]
pub struct SampleMatrix {
    data: Array2<f64>,
    corrupted: Option<BTreeSet<usize>>,
}

impl SampleMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample entry"));
        }
        Ok(Self {
            data,
            corrupted: None,
        })
    }

    pub fn with_corruption(data: Array2<f64>, corrupted: BTreeSet<usize>) -> Result<Self> {
        let mut s = Self::new(data)?;
        if let Some(&max) = corrupted.iter().next_back() {
            if max >= s.n() {
                return Err(Error::InvalidParameter(format!(
                    "corrupted index {max} out of range for N={}",
                    s.n()
                )));
            }
        }
        s.corrupted = Some(corrupted);
        Ok(s)
    }

    pub fn d(&self) -> usize {
        self.data.nrows()
    }

    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// The replaced column set, known only for synthetic data.
    pub fn corrupted_indices(&self) -> Option<&BTreeSet<usize>> {
        self.corrupted.as_ref()
    }

    pub fn column_norms_sq(&self) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.data.column(i).iter().map(|v| v * v).sum())
            .collect()
    }
}

/// A point of the truncated simplex: nonnegative weights summing to one with
/// every coordinate at most `1 / ((1 - eps_slack) N)`.
#[derive(Debug, Clone)]
pub struct WeightVector {
    w: Vec<f64>,
    eps_slack: f64,
}

impl WeightVector {
    pub const SUM_TOL: f64 = 1e-9;
    pub const CAP_TOL: f64 = 1e-12;

    pub fn new(w: Vec<f64>, eps_slack: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps_slack) {
            return Err(Error::InvalidParameter(format!(
                "eps_slack {eps_slack} outside [0, 1)"
            )));
        }
        let n = w.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        let cap = 1.0 / ((1.0 - eps_slack) * n as f64);
        let mut sum = 0.0;
        for (i, &v) in w.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite("weight"));
            }
            if v < 0.0 {
                return Err(Error::NegativeWeight { index: i, value: v });
            }
            if v > cap + Self::CAP_TOL {
                return Err(Error::SimplexViolation(format!(
                    "weight {v} at index {i} exceeds cap {cap}"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::SimplexViolation(format!("weights sum to {sum}")));
        }
        Ok(Self { w, eps_slack })
    }

    pub fn uniform(n: usize, eps_slack: f64) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n], eps_slack)
    }

    /// Exact Euclidean projection of an arbitrary vector onto the truncated
    /// simplex. Solves `sum_i clamp(x_i - theta, 0, cap) = 1` for the unique
    /// threshold by walking the breakpoints.
    pub fn project(x: &[f64], eps_slack: f64) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        let cap = 1.0 / ((1.0 - eps_slack) * n as f64);
        if cap * (n as f64) < 1.0 - 1e-12 {
            return Err(Error::SimplexViolation(
                "cap too small for the simplex to be nonempty".into(),
            ));
        }
        // Breakpoints of theta -> sum_i clamp(x_i - theta, 0, cap).
        let mut bps: Vec<f64> = Vec::with_capacity(2 * n);
        for &v in x {
            if !v.is_finite() {
                return Err(Error::NonFinite("projection input"));
            }
            bps.push(v);
            bps.push(v - cap);
        }
        bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let sum_at = |theta: f64| -> f64 {
            x.iter()
                .map(|&v| (v - theta).clamp(0.0, cap))
                .sum::<f64>()
        };
        // The map is continuous, piecewise linear, and nonincreasing; find
        // the segment straddling 1 and solve the linear piece exactly.
        let mut lo = bps[0];
        let mut hi = bps[bps.len() - 1];
        if sum_at(lo) < 1.0 {
            // every coordinate at cap still cannot exceed 1 only when
            // cap * n == 1; distribute uniformly
            return Self::new(vec![1.0 / n as f64; n], eps_slack);
        }
        for &b in &bps {
            let s = sum_at(b);
            if s >= 1.0 {
                lo = b;
            } else {
                hi = b;
                break;
            }
        }
        let (slo, shi) = (sum_at(lo), sum_at(hi));
        let theta = if (slo - shi).abs() < f64::EPSILON {
            lo
        } else {
            lo + (slo - 1.0) * (hi - lo) / (slo - shi)
        };
        let mut w: Vec<f64> = x.iter().map(|&v| (v - theta).clamp(0.0, cap)).collect();
        // Exact-sum fixup: spread the fp residual over interior coordinates.
        let sum: f64 = w.iter().sum();
        let resid = 1.0 - sum;
        if resid != 0.0 {
            let interior: Vec<usize> = (0..n)
                .filter(|&i| w[i] > 0.0 && w[i] < cap - Self::CAP_TOL)
                .collect();
            if !interior.is_empty() {
                let delta = resid / interior.len() as f64;
                for &i in &interior {
                    w[i] = (w[i] + delta).clamp(0.0, cap);
                }
            }
        }
        Self::new(w, eps_slack)
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn eps_slack(&self) -> f64 {
        self.eps_slack
    }

    pub fn cap(&self) -> f64 {
        1.0 / ((1.0 - self.eps_slack) * self.w.len() as f64)
    }
}

/// Synthetic corruption strategies.
#[derive(Debug, Clone)]
pub enum AdversarySpec {
    /// Leave the samples untouched.
    None,
    /// Replace columns with `±magnitude * direction`, alternating sign so
    /// the empirical mean stays near zero while the empirical covariance is
    /// maximally inflated along one direction.
    DirectionInflation {
        direction: Array1<f64>,
        magnitude: f64,
    },
    /// Replace columns with draws from the norm-matched perturbed Gaussian:
    /// covariance `(I + 2*gamma*U*U^T) / (1 + gamma)` with
    /// `gamma = c / (eps * sqrt(d))`, which preserves the expected squared
    /// norm while slightly inflating it inside `col(U)`.
    SubspacePerturbation { u: Array2<f64>, c: f64 },
}

impl AdversarySpec {
    /// Direction inflation along `e_1` with the default magnitude
    /// `10 * sqrt(d)`.
    pub fn direction_inflation_default(d: usize) -> Self {
        let mut direction = Array1::zeros(d);
        direction[0] = 1.0;
        AdversarySpec::DirectionInflation {
            direction,
            magnitude: 10.0 * (d as f64).sqrt(),
        }
    }
}

fn check_eps_budget(eps: f64) -> Result<()> {
    if !(0.0..=ADVERSARY_MAX_EPS).contains(&eps) {
        return Err(Error::EpsOutOfRange {
            eps,
            max: ADVERSARY_MAX_EPS,
        });
    }
    Ok(())
}

/// Draws `N` i.i.d. samples from `N(0, sigma)` as `sigma^{1/2} g` with `g`
/// standard normal. Deterministic for a fixed seed.
pub fn sample_gaussian(config: &ProblemConfig, sigma: &CovMatrix) -> Result<SampleMatrix> {
    config.validate()?;
    if sigma.dim() != config.d {
        return Err(Error::DimensionMismatch {
            expected: config.d,
            got: sigma.dim(),
        });
    }
    let min_eig = sigma.min_eigenvalue();
    if min_eig < -1e-8 * sigma.spectral_norm().max(1e-300) {
        return Err(Error::NotPsd { min_eig });
    }
    let root = sigma.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(config.seed, &[tag::SAMPLE]));
    let d = config.d;
    let n = config.n;
    let mut data = Array2::zeros((d, n));
    let mut g = Array1::zeros(d);
    for i in 0..n {
        for k in 0..d {
            g[k] = rng.sample::<f64, _>(StandardNormal);
        }
        let x = root.data().dot(&g);
        data.column_mut(i).assign(&x);
    }
    SampleMatrix::new(data)
}

/// Picks `count` distinct indices from `[0, n)` uniformly at random.
fn choose_indices(n: usize, count: usize, rng: &mut ChaCha8Rng) -> BTreeSet<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..count.min(n) {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.into_iter().take(count).collect()
}

/// Applies an adversary, replacing exactly `floor(eps * N)` columns.
pub fn corrupt(
    samples: &SampleMatrix,
    adversary: &AdversarySpec,
    eps: f64,
    seed: u64,
) -> Result<SampleMatrix> {
    check_eps_budget(eps)?;
    if samples.corrupted_indices().is_some() {
        return Err(Error::InvalidParameter(
            "samples were already corrupted".into(),
        ));
    }
    let n = samples.n();
    let d = samples.d();
    let count = (eps * n as f64).floor() as usize;
    let mut data = samples.data().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[tag::CORRUPT]));

    if matches!(adversary, AdversarySpec::None) || count == 0 {
        return SampleMatrix::with_corruption(data, BTreeSet::new());
    }
    let chosen = choose_indices(n, count, &mut rng);

    match adversary {
        AdversarySpec::None => unreachable!(),
        AdversarySpec::DirectionInflation {
            direction,
            magnitude,
        } => {
            if direction.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: direction.len(),
                });
            }
            let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::InvalidParameter("zero direction".into()));
            }
            let unit = direction.mapv(|v| v / norm);
            for (k, &i) in chosen.iter().enumerate() {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                data.column_mut(i).assign(&unit.mapv(|v| sign * magnitude * v));
            }
        }
        AdversarySpec::SubspacePerturbation { u, c } => {
            if u.nrows() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: u.nrows(),
                });
            }
            check_orthonormal_columns(u)?;
            if eps == 0.0 {
                return SampleMatrix::with_corruption(data, chosen);
            }
            let gamma = c / (eps * (d as f64).sqrt());
            let alpha = (1.0 / (1.0 + gamma)).sqrt();
            let beta = (2.0 * gamma / (1.0 + gamma)).sqrt();
            let k = u.ncols();
            let mut g = Array1::zeros(d);
            let mut h = Array1::zeros(k);
            for &i in &chosen {
                for v in g.iter_mut() {
                    *v = rng.sample::<f64, _>(StandardNormal);
                }
                for v in h.iter_mut() {
                    *v = rng.sample::<f64, _>(StandardNormal);
                }
                let x = g.mapv(|v| alpha * v) + u.dot(&h).mapv(|v| beta * v);
                data.column_mut(i).assign(&x);
            }
        }
    }
    SampleMatrix::with_corruption(data, chosen)
}

fn check_orthonormal_columns(u: &Array2<f64>) -> Result<()> {
    let gram = u.t().dot(u);
    let k = gram.nrows();
    for i in 0..k {
        for j in 0..k {
            let expect = if i == j { 1.0 } else { 0.0 };
            if (gram[[i, j]] - expect).abs() > 1e-10 {
                return Err(Error::InvalidParameter(
                    "columns are not orthonormal".into(),
                ));
            }
        }
    }
    Ok(())
}

/// The norm-separation benchmark instance: good columns from `N(0, I)`, bad
/// columns from `N(0, sigma')` where `sigma'` matches the expected squared
/// norm of the good distribution but inflates it inside a planted
/// half-dimensional subspace.
#[derive(Debug, Clone)]
pub struct HardnessInstance {
    pub samples: SampleMatrix,
    pub u: Array2<f64>,
    pub c: f64,
    pub eps: f64,
}

impl HardnessInstance {
    /// The perturbed covariance as a dense matrix.
    pub fn perturbed_covariance(&self) -> Array2<f64> {
        perturbed_covariance(&self.u, self.c, self.eps)
    }
}

pub fn perturbed_covariance(u: &Array2<f64>, c: f64, eps: f64) -> Array2<f64> {
    let d = u.nrows();
    let gamma = c / (eps * (d as f64).sqrt());
    let mut out = u.dot(&u.t()).mapv(|v| v * 2.0 * gamma / (1.0 + gamma));
    for i in 0..d {
        out[[i, i]] += 1.0 / (1.0 + gamma);
    }
    out
}

/// Random `d x k` matrix with orthonormal columns: the Q factor of a
/// Gaussian matrix, with signs fixed by the R diagonal for determinism.
pub fn random_orthonormal(d: usize, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let g = nalgebra::DMatrix::from_fn(d, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Array2::from_shape_fn((d, k), |(i, j)| q[(i, j)])
}

pub fn make_hardness_instance(
    d: usize,
    n: usize,
    eps: f64,
    c: f64,
    seed: u64,
) -> Result<HardnessInstance> {
    if d % 2 != 0 || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "hardness instance needs even positive d, got {d}"
        )));
    }
    if n < d * d {
        return Err(Error::InvalidParameter(format!(
            "hardness instance needs N >= d^2 ({} < {})",
            n,
            d * d
        )));
    }
    if c <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "perturbation constant must be positive, got {c}"
        )));
    }
    check_eps_budget(eps)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[tag::HARDNESS]));
    let u = random_orthonormal(d, d / 2, &mut rng);

    let count = (eps * n as f64).floor() as usize;
    let bad = choose_indices(n, count, &mut rng);
    let gamma = c / (eps * (d as f64).sqrt());
    let alpha = (1.0 / (1.0 + gamma)).sqrt();
    let beta = (2.0 * gamma / (1.0 + gamma)).sqrt();

    let mut data = Array2::zeros((d, n));
    let mut g = Array1::zeros(d);
    let mut h = Array1::zeros(d / 2);
    for i in 0..n {
        for v in g.iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal);
        }
        if bad.contains(&i) {
            for v in h.iter_mut() {
                *v = rng.sample::<f64, _>(StandardNormal);
            }
            let x = g.mapv(|v| alpha * v) + u.dot(&h).mapv(|v| beta * v);
            data.column_mut(i).assign(&x);
        } else {
            data.column_mut(i).assign(&g);
        }
    }

    Ok(HardnessInstance {
        samples: SampleMatrix::with_corruption(data, bad)?,
        u,
        c,
        eps,
    })
}

/// `sum_i w_i x_i x_i^T` computed as one Gram product with the weights
/// absorbed as `sqrt(w_i)` column scalings.
pub fn weighted_second_moment(samples: &SampleMatrix, w: &[f64]) -> Result<CovMatrix> {
    if w.len() != samples.n() {
        return Err(Error::DimensionMismatch {
            expected: samples.n(),
            got: w.len(),
        });
    }
    for (i, &v) in w.iter().enumerate() {
        if v < 0.0 {
            return Err(Error::NegativeWeight { index: i, value: v });
        }
    }
    let mut scaled = samples.data().clone();
    for (i, &v) in w.iter().enumerate() {
        let s = v.sqrt();
        scaled.column_mut(i).mapv_inplace(|x| x * s);
    }
    let gram = scaled.dot(&scaled.t());
    CovMatrix::new(gram)
}
