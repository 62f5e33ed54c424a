//! Spectral toolkit for self-adjoint discrete Sturm-Liouville problems.
//!
//! The objects are vector-valued three-term recurrences
//! `-∇(P_i Δy_i) + Q_i y_i = λ W_i y_i` on `i = 1..N` with coupled
//! self-adjoint boundary conditions, where the coefficients are `d x d`
//! complex matrices. The crate computes their finite spectra exactly as
//! predicted by the counting formula, classifies singular boundary
//! conditions and singular equations by matrix inertia, traces eigenvalue
//! branches under one-parameter perturbations (including branches escaping
//! to infinity near a singular point), and reduces integrable
//! (Atkinson-type) continuous problems to discrete ones.
//!
//! Module map:
//! - [`numkernel`]: dense complex matrices, Hermitian eigensolver, rank and
//!   inertia decisions, linear solves.
//! - [`problem`]: equations, boundary conditions in raw and chart form, the
//!   chart transfer matrices, model constructors.
//! - [`spectrum`]: characteristic polynomial, eigenvalue counting, spectra
//!   with multiplicities, an independent block-pencil oracle, eigenfunctions.
//! - [`classify`]: inertia classifiers for boundary-condition space and
//!   equation space, jump predictions at singular points.
//! - [`perturb`]: eigenvalue derivative formulas, perturbation paths,
//!   jump experiments, branch tracing.
//! - [`atkinson`]: reduction of integrable continuous problems to discrete
//!   form and the classification theory transported through it.
//! - [`cli`]: the command-line interface.

pub mod atkinson;
pub mod classify;
pub mod cli;
pub mod error;
pub mod io;
pub mod numkernel;
pub mod perturb;
pub mod problem;
pub mod spectrum;

pub use error::{Error, Result};
pub use numkernel::{CMatrix, InertiaSignature, Tolerances};
