//! Matrix-free linear algebra over tensorized samples.
//!
//! For samples `Y_1..Y_N` in `R^d`, the tensorized sample `Y_i ⊗ Y_i` lives
//! in `R^{d^2}`, and the operators the SDP solver needs — the map sending
//! sample weights to a flattened weighted Gram matrix, its adjoint, and the
//! centered weighted second-moment operator built from both — all factor
//! through `d x N` products. Nothing here ever materializes a `d^2 x d^2`
//! matrix or the explicit `d^2 x N` tensor matrix; the exponential-weighted
//! traces and quadratic forms the solver consumes are approximated by a
//! Taylor-polynomial action of `exp` composed with a sign-sketch.

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed::{self, tag};

/// Rows used by the sketch at accuracy `eps`; the constant is conservative
/// enough that the norm-preservation tests pass with margin.
pub fn sketch_rows(dim: usize, eps: f64) -> usize {
    let logd = (dim.max(2) as f64).ln();
    (64.0 * logd / (eps * eps)).ceil() as usize
}

/// Maps sample weights `s` to the flattening of `Y diag(s) Y^T`, i.e. the
/// weighted sum of the tensorized samples.
pub fn self_kron_apply(y: &Array2<f64>, s: &Array1<f64>) -> Result<Array1<f64>> {
    let (d, n) = y.dim();
    if s.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s.len(),
        });
    }
    let mut scaled = y.clone();
    for (j, &w) in s.iter().enumerate() {
        scaled.column_mut(j).mapv_inplace(|v| v * w);
    }
    let gram = scaled.dot(&y.t());
    let mut out = Array1::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = gram[[i, j]];
        }
    }
    Ok(out)
}

/// Adjoint of [`self_kron_apply`]: entry `i` is `Y_i^T V Y_i` where `V` is
/// the `d x d` unflattening of `v`. One product `V Y` then column dots.
pub fn self_kron_apply_t(y: &Array2<f64>, v: &Array1<f64>) -> Result<Array1<f64>> {
    let (d, n) = y.dim();
    if v.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: v.len(),
        });
    }
    let vm = Array2::from_shape_fn((d, d), |(i, j)| v[i * d + j]);
    let vy = vm.dot(y);
    let mut out = Array1::zeros(n);
    for i in 0..n {
        out[i] = y.column(i).dot(&vy.column(i));
    }
    Ok(out)
}

/// The centered weighted second-moment operator of the tensorized samples:
/// with `z_i = Y_i ⊗ Y_i`, applying this operator to `s` gives
/// `sum_i w_i (z_i - nu) (z_i - nu)^T s`, evaluated in three stages so the
/// cost stays at two `d x N` products plus `O(N + d^2)` vector work.
#[derive(Debug, Clone)]
pub struct ImplicitTensorOperator {
    y: Array2<f64>,
    w: Vec<f64>,
    nu: Array1<f64>,
    /// Upper estimate of the operator's spectral norm, supplied by the
    /// caller (the SDP solver controls growth) and cross-checked by the
    /// exponential oracles.
    norm_bound: f64,
}

impl ImplicitTensorOperator {
    pub fn new(y: Array2<f64>, w: Vec<f64>, nu: Array1<f64>, norm_bound: f64) -> Result<Self> {
        let (d, n) = y.dim();
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            });
        }
        if nu.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: nu.len(),
            });
        }
        if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "operator weights must be nonnegative and finite".into(),
            ));
        }
        Ok(Self {
            y,
            w,
            nu,
            norm_bound,
        })
    }

    pub fn dim(&self) -> usize {
        let d = self.y.nrows();
        d * d
    }

    pub fn n(&self) -> usize {
        self.y.ncols()
    }

    pub fn y(&self) -> &Array2<f64> {
        &self.y
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn nu(&self) -> &Array1<f64> {
        &self.nu
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn apply(&self, s: &Array1<f64>) -> Result<Array1<f64>> {
        if s.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: s.len(),
            });
        }
        let nu_dot_s = self.nu.dot(s);
        let mut u = self_kron_apply_t(&self.y, s)?;
        u.mapv_inplace(|v| v - nu_dot_s);
        for (i, &w) in self.w.iter().enumerate() {
            u[i] *= w;
        }
        let ones_dot_u = u.sum();
        let mut out = self_kron_apply(&self.y, &u)?;
        out.zip_mut_with(&self.nu, |o, &nv| *o -= ones_dot_u * nv);
        Ok(out)
    }
}

/// Evaluates the truncated Taylor polynomial of `exp` applied to a vector,
/// by Horner's rule over the matvec oracle. The degree follows the spectral
/// bound: `ceil(e * ell) + ceil(log2(2/eps)) + 4`.
pub fn taylor_exp_apply<F>(apply: F, v: &Array1<f64>, ell: f64, eps: f64) -> Result<Array1<f64>>
where
    F: Fn(&Array1<f64>) -> Result<Array1<f64>>,
{
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "taylor accuracy must be in (0,1), got {eps}"
        )));
    }
    let degree = (std::f64::consts::E * ell.max(0.0)).ceil() as usize
        + (2.0 / eps).log2().ceil() as usize
        + 4;
    let mut u = v.clone();
    for j in (1..=degree).rev() {
        let au = apply(&u)?;
        u = v + &au.mapv(|x| x / j as f64);
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(
                "Taylor iterate (spectral-norm bound likely underestimated)",
            ));
        }
    }
    Ok(u)
}

/// Power iteration estimate of the spectral norm of a symmetric PSD
/// operator. Returns a value in `[0.9 ||A||, ||A||]` with high probability
/// when `iters >= 64 ln(dim)`; returns 0 for the zero operator.
pub fn estimate_spectral_norm<F>(apply: F, dim: usize, iters: usize, seed: u64) -> Result<f64>
where
    F: Fn(&Array1<f64>) -> Result<Array1<f64>>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[tag::POWER_ITER]));
    let mut v: Array1<f64> = Array1::from_shape_fn(dim, |_| rng.random::<f64>() - 0.5);
    let norm = v.dot(&v).sqrt();
    if norm == 0.0 {
        return Ok(0.0);
    }
    v.mapv_inplace(|x| x / norm);
    let mut lambda = 0.0;
    for _ in 0..iters.max(1) {
        let av = apply(&v)?;
        let raleigh = v.dot(&av);
        let nrm = av.dot(&av).sqrt();
        if nrm <= f64::MIN_POSITIVE * dim as f64 {
            return Ok(0.0);
        }
        lambda = raleigh.max(lambda);
        v = av.mapv(|x| x / nrm);
    }
    Ok(lambda)
}

/// Default power-iteration count for the `[0.9, 1.0]` relative guarantee.
pub fn default_power_iters(dim: usize) -> usize {
    (64.0 * (dim.max(2) as f64).ln()).ceil() as usize
}

/// Random sign sketch with `t` rows scaled by `1/sqrt(t)`. Rows are
/// generated on demand from per-row RNG streams, so the operator never holds
/// the full `t x dim` matrix.
#[derive(Debug, Clone)]
pub struct SketchOperator {
    t: usize,
    dim: usize,
    seed: u64,
}

impl SketchOperator {
    pub fn new(t: usize, dim: usize, seed: u64) -> Self {
        Self { t, dim, seed }
    }

    /// Sketch sized for `(1 ± eps)`-accurate squared norms.
    pub fn for_accuracy(dim: usize, eps: f64, seed: u64) -> Self {
        Self::new(sketch_rows(dim, eps), dim, seed)
    }

    pub fn rows(&self) -> usize {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, r: usize) -> Array1<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(self.seed, &[tag::SKETCH]));
        rng.set_stream(r as u64 + 1);
        let scale = 1.0 / (self.t as f64).sqrt();
        Array1::from_shape_fn(self.dim, |_| {
            if rng.random::<bool>() {
                scale
            } else {
                -scale
            }
        })
    }

    /// `||Q v||^2`, the sketched estimate of `||v||^2`.
    pub fn squared_norm_estimate(&self, v: &Array1<f64>) -> f64 {
        (0..self.t).map(|r| self.row(r).dot(v).powi(2)).sum()
    }
}

/// Shared driver for the exponential oracles: one Taylor pass per sketch row
/// `q_r` yields `m_r = p(Psi/2) q_r`; the trace estimate is
/// `sum_r ||m_r||^2` and the quadratic forms are the squared column norms of
/// the sketched, centered tensor matrix.
#[derive(Debug)]
pub struct SketchedExp {
    /// Sketched rows of `exp(Psi/2)`: `m_r = p(Psi/2) q_r`. `exp(Psi)` is
    /// approximated by `sum_r m_r m_r^T`.
    pub rows: Vec<Array1<f64>>,
    pub trace_estimate: f64,
    /// `exp(Psi) . (z_i - nu)(z_i - nu)^T` estimates, one per sample.
    pub quadforms: Option<Array1<f64>>,
}

pub fn sketched_exp(
    op: &ImplicitTensorOperator,
    eps: f64,
    seed: u64,
    want_quadforms: bool,
) -> Result<SketchedExp> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "oracle accuracy must be in (0,1), got {eps}"
        )));
    }
    let dim = op.dim();
    let ell = op.norm_bound();
    // Cross-check the supplied bound; power iteration underestimates, so an
    // estimate above twice the bound is a definitive violation.
    let est = estimate_spectral_norm(|s| op.apply(s), dim, 48, seed)?;
    if est > 2.0 * ell.max(1e-12) {
        return Err(Error::NormBoundExceeded {
            estimate: est,
            bound: ell,
        });
    }

    let sketch = SketchOperator::for_accuracy(dim, eps, seed);
    let apply_half = |s: &Array1<f64>| op.apply(s).map(|r| r.mapv(|x| 0.5 * x));
    let mut rows = Vec::with_capacity(sketch.rows());
    let mut trace_estimate = 0.0;
    let mut quadforms = if want_quadforms {
        Some(Array1::zeros(op.n()))
    } else {
        None
    };
    for r in 0..sketch.rows() {
        let q = sketch.row(r);
        let m = taylor_exp_apply(apply_half, &q, 0.5 * ell, eps / 8.0)?;
        trace_estimate += m.dot(&m);
        if let Some(acc) = quadforms.as_mut() {
            // row r of Q M (Z - nu 1^T)
            let mut zrow = self_kron_apply_t(op.y(), &m)?;
            let shift = m.dot(op.nu());
            zrow.mapv_inplace(|x| x - shift);
            acc.zip_mut_with(&zrow, |a, &b| *a += b * b);
        }
        rows.push(m);
    }
    Ok(SketchedExp {
        rows,
        trace_estimate,
        quadforms,
    })
}

/// `(1 ± eps)`-multiplicative estimate of `tr(exp(Psi))`, valid with high
/// probability when the operator's spectral norm respects its stated bound.
pub fn approx_trace_exp(op: &ImplicitTensorOperator, eps: f64, seed: u64) -> Result<f64> {
    Ok(sketched_exp(op, eps, seed, false)?.trace_estimate)
}

/// `(1 ± eps)`-multiplicative estimates of
/// `exp(Psi) . (z_i - nu)(z_i - nu)^T` for every sample.
pub fn approx_exp_quadforms(
    op: &ImplicitTensorOperator,
    eps: f64,
    seed: u64,
) -> Result<Array1<f64>> {
    Ok(sketched_exp(op, eps, seed, true)?
        .quadforms
        .expect("requested quadforms"))
}

/// Dense reference paths. Used by the small-dimension solver mode and as the
/// oracle side of the exactness tests; cost is quadratic in `d^2`, so keep
/// these away from large instances.
pub mod dense {
    use super::*;

    /// The explicit `d^2 x N` matrix whose columns are `Y_i ⊗ Y_i`.
    pub fn tensor_columns(y: &Array2<f64>) -> Array2<f64> {
        let (d, n) = y.dim();
        let mut z = Array2::zeros((d * d, n));
        for c in 0..n {
            for i in 0..d {
                for j in 0..d {
                    z[[i * d + j, c]] = y[[i, c]] * y[[j, c]];
                }
            }
        }
        z
    }

    /// Dense assembly of the centered weighted second-moment operator.
    pub fn psi_matrix(op: &ImplicitTensorOperator) -> Array2<f64> {
        let z = tensor_columns(op.y());
        let (dim, n) = z.dim();
        let mut centered = z;
        for c in 0..n {
            for r in 0..dim {
                centered[[r, c]] -= op.nu()[r];
            }
        }
        let mut scaled = centered.clone();
        for (c, &w) in op.weights().iter().enumerate() {
            scaled.column_mut(c).mapv_inplace(|v| v * w.sqrt());
        }
        scaled.dot(&scaled.t())
    }

    /// `exp(A)` for symmetric `A` through the eigendecomposition.
    pub fn sym_exp(a: &Array2<f64>) -> Array2<f64> {
        let (vals, vecs) = crate::matrix::symmetric_eigen(a);
        let mut scaled = vecs.clone();
        for (k, &v) in vals.iter().enumerate() {
            scaled.column_mut(k).mapv_inplace(|x| x * v.exp());
        }
        scaled.dot(&vecs.t())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::frobenius_distance;
    use ndarray::array;

    fn random_matrix(d: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((d, n), |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    fn random_vec(n: usize, seed: u64) -> Array1<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array1::from_shape_fn(n, |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn kron_apply_basis_columns() {
        let y = array![[1.0, 0.0], [0.0, 1.0]];
        let out = self_kron_apply(&y, &array![1.0, 1.0]).unwrap();
        assert_eq!(out.to_vec(), vec![1.0, 0.0, 0.0, 1.0]);
        let zero = self_kron_apply(&y, &array![0.0, 0.0]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kron_apply_matches_materialized_tensor() {
        for seed in 0..20u64 {
            let y = random_matrix(3, 7, seed);
            let s = random_vec(7, seed + 100);
            let fast = self_kron_apply(&y, &s).unwrap();
            let z = dense::tensor_columns(&y);
            let slow = z.dot(&s);
            let scale = slow.iter().fold(1e-30f64, |a, v| a.max(v.abs()));
            for i in 0..fast.len() {
                assert!((fast[i] - slow[i]).abs() <= 1e-12 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn kron_apply_t_basis_cases() {
        let y = array![[1.0, 0.0], [0.0, 1.0]];
        let mut v = Array1::zeros(4);
        v[0] = 1.0; // V = e1 e1^T
        let out = self_kron_apply_t(&y, &v).unwrap();
        assert_eq!(out.to_vec(), vec![1.0, 0.0]);
        // V = I gives the squared column norms
        let eye = array![1.0, 0.0, 0.0, 1.0];
        let y2 = array![[1.0, 2.0], [2.0, 0.0]];
        let norms = self_kron_apply_t(&y2, &eye).unwrap();
        assert_eq!(norms.to_vec(), vec![5.0, 4.0]);
    }

    #[test]
    fn kron_apply_t_matches_materialized_tensor() {
        for seed in 0..20u64 {
            let y = random_matrix(3, 7, seed);
            let v = random_vec(9, seed + 200);
            let fast = self_kron_apply_t(&y, &v).unwrap();
            let z = dense::tensor_columns(&y);
            let slow = z.t().dot(&v);
            for i in 0..fast.len() {
                assert!((fast[i] - slow[i]).abs() <= 1e-12 * slow[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn adjoint_identity_holds() {
        for seed in 0..50u64 {
            let y = random_matrix(4, 11, seed);
            let s = random_vec(11, seed + 300);
            let v = random_vec(16, seed + 400);
            let lhs = self_kron_apply(&y, &s).unwrap().dot(&v);
            let rhs = s.dot(&self_kron_apply_t(&y, &v).unwrap());
            assert!(
                (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0),
                "adjoint mismatch {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn psi_zero_weights_give_zero() {
        let y = random_matrix(2, 5, 1);
        let op = ImplicitTensorOperator::new(y, vec![0.0; 5], Array1::zeros(4), 1.0).unwrap();
        let s = random_vec(4, 2);
        let out = op.apply(&s).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn psi_rank_one_case() {
        // single sample e1 with weight 1 and nu = 0: the operator is the
        // rank-one projector onto the first tensor coordinate
        let y = array![[1.0], [0.0]];
        let op = ImplicitTensorOperator::new(y, vec![1.0], Array1::zeros(4), 1.0).unwrap();
        let s = array![0.7, -0.3, 0.1, 0.9];
        let out = op.apply(&s).unwrap();
        assert!((out[0] - 0.7).abs() < 1e-15);
        assert!(out.iter().skip(1).all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn psi_matches_dense_assembly() {
        for seed in 0..30u64 {
            let y = random_matrix(3, 10, seed);
            let w: Vec<f64> = random_vec(10, seed + 500)
                .iter()
                .map(|v| v.abs())
                .collect();
            let nu = random_vec(9, seed + 600);
            let op = ImplicitTensorOperator::new(y, w, nu, 100.0).unwrap();
            let dense_m = dense::psi_matrix(&op);
            let s = random_vec(9, seed + 700);
            let fast = op.apply(&s).unwrap();
            let slow = dense_m.dot(&s);
            let scale = slow.iter().fold(1e-30f64, |a, v| a.max(v.abs()));
            for i in 0..fast.len() {
                assert!(
                    (fast[i] - slow[i]).abs() <= 1e-10 * scale.max(1.0),
                    "entry {i}: {} vs {}",
                    fast[i],
                    slow[i]
                );
            }
        }
    }

    #[test]
    fn psi_is_psd() {
        for seed in 0..20u64 {
            let y = random_matrix(3, 8, seed);
            let w: Vec<f64> = random_vec(8, seed + 800).iter().map(|v| v.abs()).collect();
            let nu = random_vec(9, seed + 900);
            let op = ImplicitTensorOperator::new(y, w, nu, 100.0).unwrap();
            let s = random_vec(9, seed + 1000);
            let quad = s.dot(&op.apply(&s).unwrap());
            assert!(quad >= -1e-10 * s.dot(&s));
        }
    }

    #[test]
    fn taylor_on_zero_operator_is_identity() {
        let v = array![0.3, -0.4, 0.5];
        let out = taylor_exp_apply(|s| Ok(s.mapv(|_| 0.0)), &v, 0.0, 1e-6).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn taylor_scalar_exponential() {
        let v = array![1.0];
        let out = taylor_exp_apply(|s| Ok(s.clone()), &v, 1.0, 1e-6).unwrap();
        assert!((out[0] - std::f64::consts::E).abs() < 1e-6);
    }

    #[test]
    fn taylor_matches_dense_exponential() {
        for seed in 0..10u64 {
            let g = random_matrix(5, 5, seed);
            let mut a = g.dot(&g.t());
            // scale to spectral norm <= 3
            let top = crate::matrix::symmetric_eigen(&a).0[4];
            a.mapv_inplace(|v| v * 3.0 / top.max(1e-12));
            let v = {
                let mut v = random_vec(5, seed + 50);
                let n = v.dot(&v).sqrt();
                v.mapv_inplace(|x| x / n);
                v
            };
            let eps = 1e-8;
            let fast = taylor_exp_apply(|s| Ok(a.dot(s)), &v, 3.0, eps).unwrap();
            let slow = dense::sym_exp(&a).dot(&v);
            let err = (&fast - &slow).iter().map(|x| x * x).sum::<f64>().sqrt();
            let scale = slow.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(err <= eps * scale.max(1.0) * 10.0, "err {err}");
        }
    }

    #[test]
    fn spectral_norm_estimates() {
        let zero = estimate_spectral_norm(|s| Ok(s.mapv(|_| 0.0)), 4, 100, 1).unwrap();
        assert_eq!(zero, 0.0);
        let a = Array2::from_diag(&array![3.0, 1.0, 1.0]);
        let est = estimate_spectral_norm(|s| Ok(a.dot(s)), 3, 200, 2).unwrap();
        assert!((2.7..=3.0 + 1e-9).contains(&est), "est {est}");
        let eye = estimate_spectral_norm(|s| Ok(s.clone()), 7, 50, 3).unwrap();
        assert!((0.9..=1.0 + 1e-9).contains(&eye), "est {eye}");
    }

    #[test]
    fn sketch_preserves_norms() {
        let dim = 9;
        let eps = 0.2;
        let q = SketchOperator::for_accuracy(dim, eps, 77);
        let mut ok = 0;
        let total = 100;
        for s in 0..total {
            let mut v = random_vec(dim, 5000 + s);
            let n = v.dot(&v).sqrt();
            v.mapv_inplace(|x| x / n);
            let est = q.squared_norm_estimate(&v);
            if (est - 1.0).abs() <= eps / 2.0 {
                ok += 1;
            }
        }
        assert!(ok >= 99, "norm preserved in only {ok}/{total} trials");
    }

    #[test]
    fn trace_exp_of_zero_operator() {
        let y = random_matrix(2, 5, 9);
        let op = ImplicitTensorOperator::new(y, vec![0.0; 5], Array1::zeros(4), 0.5).unwrap();
        let est = approx_trace_exp(&op, 0.1, 3).unwrap();
        assert!((est - 4.0).abs() <= 0.4, "tr(exp 0) estimate {est}");
    }

    #[test]
    fn trace_exp_rank_one() {
        // Psi has a single eigenvalue 1, rest zero: trace = (d^2 - 1) + e
        let y = array![[1.0], [0.0]];
        let op = ImplicitTensorOperator::new(y, vec![1.0], Array1::zeros(4), 1.5).unwrap();
        let expect = 3.0 + std::f64::consts::E;
        for seed in 0..5u64 {
            let est = approx_trace_exp(&op, 0.1, seed).unwrap();
            assert!(
                (est - expect).abs() <= 0.1 * expect,
                "estimate {est} vs {expect}"
            );
        }
    }

    #[test]
    fn quadforms_of_zero_operator_reduce_to_squared_distances() {
        // w = 0 so exp(Psi) = I and the quadforms are ||z_i - nu||^2
        let y = array![[1.0, 0.0], [0.0, 1.0]];
        let nu = array![0.2, 0.0, 0.0, -0.1];
        let z = dense::tensor_columns(&y);
        let op = ImplicitTensorOperator::new(y, vec![0.0, 0.0], nu.clone(), 0.5).unwrap();
        let qf = approx_exp_quadforms(&op, 0.1, 11).unwrap();
        for i in 0..2 {
            let diff = &z.column(i).to_owned() - &nu;
            let expect = diff.dot(&diff);
            assert!(
                (qf[i] - expect).abs() <= 0.1 * expect,
                "qf {} vs {}",
                qf[i],
                expect
            );
        }
    }

    #[test]
    fn exponential_oracles_match_dense_reference() {
        // moderate-norm instance, checked against the dense eigendecomposition
        let mut pass_trace = 0;
        let mut pass_quads = 0;
        let trials = 20u64;
        for seed in 0..trials {
            let y = random_matrix(3, 20, seed + 4000);
            let raw: Vec<f64> = random_vec(20, seed + 4100).iter().map(|v| v.abs()).collect();
            let nu = random_vec(9, seed + 4200).mapv(|v| 0.3 * v);
            let probe = ImplicitTensorOperator::new(y.clone(), raw.clone(), nu.clone(), 1e6).unwrap();
            let dense_psi = dense::psi_matrix(&probe);
            let top = crate::matrix::symmetric_eigen(&dense_psi).0[8];
            // rescale weights so the spectral norm is about 4
            let scale = 4.0 / top.max(1e-12);
            let w: Vec<f64> = raw.iter().map(|v| v * scale).collect();
            let op = ImplicitTensorOperator::new(y.clone(), w, nu.clone(), 5.0).unwrap();
            let psi = dense::psi_matrix(&op);
            let expm = dense::sym_exp(&psi);
            let true_trace: f64 = (0..9).map(|i| expm[[i, i]]).sum();
            let stats = sketched_exp(&op, 0.1, seed, true).unwrap();
            if (stats.trace_estimate - true_trace).abs() <= 0.1 * true_trace {
                pass_trace += 1;
            }
            let z = dense::tensor_columns(&y);
            let qf = stats.quadforms.unwrap();
            let mut all_ok = true;
            for i in 0..20 {
                let diff = &z.column(i).to_owned() - &nu;
                let expect = diff.dot(&expm.dot(&diff));
                if (qf[i] - expect).abs() > 0.15 * expect.max(1e-12) {
                    all_ok = false;
                }
            }
            if all_ok {
                pass_quads += 1;
            }
        }
        assert!(pass_trace >= 19, "trace within band in {pass_trace}/{trials}");
        assert!(pass_quads >= 19, "quadforms within band in {pass_quads}/{trials}");
    }

    #[test]
    fn oracle_rejects_norm_bound_violation() {
        let y = random_matrix(2, 6, 31);
        let w = vec![10.0; 6];
        let probe = ImplicitTensorOperator::new(y.clone(), w.clone(), Array1::zeros(4), 1e9).unwrap();
        let psi = dense::psi_matrix(&probe);
        let top = crate::matrix::symmetric_eigen(&psi).0[3];
        assert!(top > 1.0);
        // claim a bound far below the true norm
        let lying = ImplicitTensorOperator::new(y, w, Array1::zeros(4), top / 10.0).unwrap();
        let res = approx_trace_exp(&lying, 0.2, 1);
        assert!(matches!(res, Err(Error::NormBoundExceeded { .. })));
    }
}
