//! Dense complex linear algebra kernel.
//!
//! Everything downstream (counting formulas, classifiers, spectra) reduces to
//! a handful of primitives on small Hermitian matrices: an eigensolver,
//! inertia and rank decisions, linear solves, and nullspaces. All rank-type
//! decisions are centralised here so that a single tolerance policy governs
//! the whole crate.

mod linalg;
mod matrix;

pub use linalg::{
    det, herm_eig, inertia, inverse, is_positive_definite, nullspace, num_rank, qr_square,
    singular_values, solve, solve_right, solve_right_upper, two_norm,
};
pub use matrix::CMatrix;

/// Tolerance bundle threaded through every numerical decision.
///
/// - `herm_tol`: relative symmetry slack accepted before a matrix is rejected
///   as non-Hermitian.
/// - `rank_tol`: relative singular-value threshold for rank / inertia / kernel
///   decisions.
/// - `root_cluster_tol`: relative radius used to merge nearby polynomial roots
///   into one eigenvalue with multiplicity.
/// - `divergence_threshold`: magnitude beyond which a traced eigenvalue branch
///   counts as escaping to +-infinity.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub herm_tol: f64,
    pub rank_tol: f64,
    pub root_cluster_tol: f64,
    pub divergence_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm_tol: 1e-8,
            rank_tol: 1e-9,
            root_cluster_tol: 1e-6,
            divergence_threshold: 1e4,
        }
    }
}

/// Inertia of a Hermitian matrix: counts of negative, zero, and positive
/// eigenvalues relative to the rank tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InertiaSignature {
    pub r_minus: usize,
    pub r_zero: usize,
    pub r_plus: usize,
}

impl InertiaSignature {
    pub fn new(r_minus: usize, r_zero: usize, r_plus: usize) -> Self {
        InertiaSignature { r_minus, r_zero, r_plus }
    }

    /// Matrix order: `r_minus + r_zero + r_plus`.
    pub fn order(&self) -> usize {
        self.r_minus + self.r_zero + self.r_plus
    }
}

impl std::fmt::Display for InertiaSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(-:{} 0:{} +:{})", self.r_minus, self.r_zero, self.r_plus)
    }
}
