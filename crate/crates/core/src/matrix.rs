//! Symmetric PSD matrices with cached spectral data, plus the small dense
//! helpers (eigendecomposition, flattening) used throughout the estimators.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check.
pub const SYMMETRY_RTOL: f64 = 1e-12;
/// Eigenvalues above `-PSD_RTOL * lambda_max` count as numerically PSD.
pub const PSD_RTOL: f64 = 1e-10;
/// `inv_sqrt` refuses matrices with min eigenvalue below this times the norm.
pub const SINGULAR_RTOL: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Spectral {
    /// Ascending eigenvalues.
    eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, same order as `eigenvalues`.
    eigenvectors: Array2<f64>,
}

/// A symmetric real `d x d` matrix standing for a covariance (or an upper
/// bound on one). Construction symmetrizes exactly; the eigendecomposition is
/// computed on first use and cached.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    data: Array2<f64>,
    spectral: OnceLock<Spectral>,
}

impl CovMatrix {
    /// Wraps a matrix that is symmetric within [`SYMMETRY_RTOL`] relative
    /// error. PSD-ness is not verified here; use [`CovMatrix::psd_checked`]
    /// when the input is untrusted.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, got: c });
        }
        let mut scale: f64 = 0.0;
        for &v in &data {
            if !v.is_finite() {
                return Err(Error::NonFinite("covariance matrix entry"));
            }
            scale = scale.max(v.abs());
        }
        let tol = SYMMETRY_RTOL * scale.max(1.0);
        for i in 0..r {
            for j in (i + 1)..r {
                if (data[[i, j]] - data[[j, i]]).abs() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "matrix not symmetric at ({i},{j}): {} vs {}",
                        data[[i, j]],
                        data[[j, i]]
                    )));
                }
            }
        }
        let sym = symmetrize(&data);
        Ok(Self {
            data: sym,
            spectral: OnceLock::new(),
        })
    }

    /// Like [`CovMatrix::new`] but also verifies numerical PSD-ness.
    pub fn psd_checked(data: Array2<f64>) -> Result<Self> {
        let m = Self::new(data)?;
        let eigs = m.eigenvalues();
        let max = eigs.last().copied().unwrap_or(0.0);
        let min = eigs.first().copied().unwrap_or(0.0);
        if min < -PSD_RTOL * max.max(1e-300) && min < 0.0 {
            return Err(Error::NotPsd { min_eig: min });
        }
        Ok(m)
    }

    /// Symmetrizes, clamps negative eigenvalues to zero, and reassembles.
    /// Used by the refinement loops, whose intermediate estimates can pick up
    /// tiny negative eigenvalues from sampling noise.
    pub fn psd_clamped(data: Array2<f64>) -> Result<Self> {
        let m = Self::new(data)?;
        let (vals, vecs) = symmetric_eigen(&m.data);
        if vals.iter().all(|&v| v >= 0.0) {
            return Ok(m);
        }
        let clamped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
        let rebuilt = reassemble(&clamped, &vecs);
        Ok(Self {
            data: rebuilt,
            spectral: OnceLock::new(),
        })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            data: Array2::eye(d),
            spectral: OnceLock::new(),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            data: Array2::zeros((d, d)),
            spectral: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    fn spectral(&self) -> &Spectral {
        self.spectral.get_or_init(|| {
            let (eigenvalues, eigenvectors) = symmetric_eigen(&self.data);
            Spectral {
                eigenvalues,
                eigenvectors,
            }
        })
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectral().eigenvalues
    }

    /// Eigenvectors as columns, matching [`CovMatrix::eigenvalues`].
    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.spectral().eigenvectors
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().unwrap_or(&0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues().first().unwrap_or(&0.0)
    }

    /// Spectral norm; equals the max eigenvalue for PSD input.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues()
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()))
    }

    /// Ratio of extreme eigenvalues, `inf` for singular matrices.
    pub fn condition_number(&self) -> f64 {
        let min = self.min_eigenvalue();
        let max = self.max_eigenvalue();
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Principal square root with negative eigenvalues clamped to zero.
    pub fn sqrt(&self) -> CovMatrix {
        let s = self.spectral();
        let vals: Vec<f64> = s.eigenvalues.iter().map(|&v| v.max(0.0).sqrt()).collect();
        CovMatrix {
            data: reassemble(&vals, &s.eigenvectors),
            spectral: OnceLock::new(),
        }
    }

    /// Inverse square root through the eigendecomposition. Errors if the
    /// matrix is numerically singular relative to its spectral norm.
    pub fn inv_sqrt(&self) -> Result<CovMatrix> {
        let s = self.spectral();
        let max = self.max_eigenvalue();
        let min = self.min_eigenvalue();
        if min <= SINGULAR_RTOL * max.max(1e-300) {
            return Err(Error::Singular { min_eig: min });
        }
        let vals: Vec<f64> = s.eigenvalues.iter().map(|&v| 1.0 / v.sqrt()).collect();
        Ok(CovMatrix {
            data: reassemble(&vals, &s.eigenvectors),
            spectral: OnceLock::new(),
        })
    }
}

fn symmetrize(a: &Array2<f64>) -> Array2<f64> {
    let mut out = a.clone();
    let n = a.nrows();
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    out
}

fn reassemble(vals: &[f64], vecs: &Array2<f64>) -> Array2<f64> {
    let n = vecs.nrows();
    let mut scaled = vecs.clone();
    for (k, &v) in vals.iter().enumerate() {
        scaled.column_mut(k).mapv_inplace(|x| x * v);
    }
    let mut out = scaled.dot(&vecs.t());
    // kill the last-bit asymmetry from the two matmuls
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (out[[i, j]] + out[[j, i]]);
            out[[i, j]] = m;
            out[[j, i]] = m;
        }
    }
    out
}

/// Symmetric eigendecomposition, eigenvalues ascending with matching
/// eigenvector columns.
pub fn symmetric_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let m = to_nalgebra(a);
    let se = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = Array2::zeros((n, n));
    for (k, &i) in order.iter().enumerate() {
        let col = se.eigenvectors.column(i);
        // fix the sign so the decomposition is unique up to ties
        let lead = col.iter().cloned().fold(0.0f64, |acc, v| {
            if v.abs() > acc.abs() {
                v
            } else {
                acc
            }
        });
        let flip = if lead < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vecs[[r, k]] = flip * col[r];
        }
    }
    (vals, vecs)
}

pub fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn from_nalgebra(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Row-major flattening of a `d x d` matrix into a `d^2` vector.
pub fn flatten(a: &Array2<f64>) -> Array1<f64> {
    Array1::from_iter(a.iter().cloned())
}

/// Inverse of [`flatten`].
pub fn unflatten(v: &Array1<f64>, d: usize) -> Result<Array2<f64>> {
    if v.len() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            got: v.len(),
        });
    }
    Ok(Array2::from_shape_vec((d, d), v.to_vec()).expect("length checked"))
}

/// `||a - b||_F` for dense matrices of equal shape.
pub fn frobenius_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn inv_sqrt_of_identity_is_identity() {
        let m = CovMatrix::identity(3);
        let inv = m.inv_sqrt().unwrap();
        assert!(frobenius_distance(inv.data(), &Array2::eye(3)) < 1e-12);
    }

    #[test]
    fn inv_sqrt_of_diagonal() {
        let m = CovMatrix::new(array![[4.0, 0.0], [0.0, 1.0]]).unwrap();
        let inv = m.inv_sqrt().unwrap();
        let expect = array![[0.5, 0.0], [0.0, 1.0]];
        assert!(frobenius_distance(inv.data(), &expect) < 1e-12);
    }

    #[test]
    fn inv_sqrt_round_trip_on_random_spd() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 6;
        let g = Array2::from_shape_fn((d, d), |_| rng.random::<f64>() - 0.5);
        let spd = g.dot(&g.t()) + Array2::<f64>::eye(d) * 0.5;
        let m = CovMatrix::new(spd.clone()).unwrap();
        let inv = m.inv_sqrt().unwrap();
        let round = inv.data().dot(&spd).dot(inv.data());
        assert!(frobenius_distance(&round, &Array2::eye(d)) < 1e-8);
    }

    #[test]
    fn inv_sqrt_rejects_near_singular() {
        let m = CovMatrix::new(array![[1.0, 0.0], [0.0, 1e-15]]).unwrap();
        assert!(matches!(m.inv_sqrt(), Err(Error::Singular { .. })));
    }

    #[test]
    fn psd_checked_rejects_indefinite() {
        let res = CovMatrix::psd_checked(array![[1.0, 0.0], [0.0, -0.5]]);
        assert!(matches!(res, Err(Error::NotPsd { .. })));
    }

    #[test]
    fn psd_clamped_zeroes_negative_directions() {
        let m = CovMatrix::psd_clamped(array![[1.0, 0.0], [0.0, -0.5]]).unwrap();
        assert!(m.min_eigenvalue() >= -1e-12);
        assert!((m.max_eigenvalue() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let res = CovMatrix::new(array![[1.0, 0.5], [0.2, 1.0]]);
        assert!(res.is_err());
    }

    #[test]
    fn flatten_round_trip() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let v = flatten(&a);
        assert_eq!(v.to_vec(), vec![1.0, 2.0, 3.0, 4.0]);
        let b = unflatten(&v, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn condition_number_of_diag() {
        let m = CovMatrix::new(array![[4.0, 0.0], [0.0, 0.5]]).unwrap();
        assert!((m.condition_number() - 8.0).abs() < 1e-12);
    }
}
