//! Robust covariance estimation for Gaussian samples under adversarial
//! contamination.
//!
//! An adversary may replace an `eps` fraction of `N` samples drawn from
//! `N(0, Σ)` with arbitrary points. The estimators here recover `Σ` with
//! dimension-independent error by reducing covariance estimation to robust
//! mean estimation of the self-Kronecker products `Y ⊗ Y`, solved with a
//! primal-dual packing/covering SDP solver that never materializes the
//! `d² × d²` operators involved.
//!
//! The crate is organized around the pipeline stages:
//!
//! * [`data`] — sample containers, Gaussian generation, corruption
//!   adversaries, and the norm-separation hardness instance.
//! * [`tensor`] — matrix-free operators over the tensorized samples:
//!   matvecs, Taylor-polynomial exponential action, sketched trace and
//!   quadratic-form oracles.
//! * [`sdp`] — the width-independent packing/covering solver and the
//!   conversion back to the weight/certificate pair used by the estimators.
//! * [`mean`] — robust mean estimation over tensorized samples
//!   (bounded-covariance and approximately-known-covariance variants).
//! * [`cov`] — the covariance estimators: crude, multiplicative (two-phase
//!   iterative refinement), and additive (subspace partitioning).
//! * [`experiment`] — batch experiment harness, metrics, reports, and the
//!   suspect-set recovery benchmark.

pub mod config;
pub mod data;
pub mod error;
pub mod io;
pub mod matrix;
pub mod seed;
pub mod tensor;

pub use config::ProblemConfig;
pub use data::{AdversarySpec, HardnessInstance, SampleMatrix, WeightVector};
pub use error::{Error, Result};
pub use matrix::CovMatrix;
