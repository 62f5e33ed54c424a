//! Classification of singular points of the eigenvalue count.
//!
//! Three Hermitian matrices organize where (and how badly) the eigenvalue
//! count drops: one over boundary-condition space, one over equation space
//! (the leading coefficient at the left endpoint), and one for problems of
//! Atkinson type.  Each is built on a chart `O_K`; its corank is the layer
//! index of the stratification and its inertia pins down the area within
//! the layer.  Approaching a singular point from a given area, the inertia
//! differences predict exactly how many eigenvalue branches escape to -inf
//! and +inf; see [`predict_jump`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkernel::{self, CMatrix, InertiaSignature, Tolerances};
use crate::problem::{chart_to_raw, BoundaryChart, BoundaryRaw, SLEquation};

/// Which parameter space a signature refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    BoundaryCondition,
    Equation,
    Atkinson,
}

/// Layer and area of a boundary condition inside the chart `O_K`.
#[derive(Clone, Debug)]
pub struct BcAreaSignature {
    pub k: Vec<usize>,
    /// Inertia of the boundary-space classifier, a matrix of order `d + #K_2`.
    pub inertia: InertiaSignature,
    /// Corank of the layer matrix; the eigenvalue count is `Nd - layer`.
    pub layer: usize,
}

/// Layer and area of an equation at a fixed non-degenerate boundary condition.
#[derive(Clone, Copy, Debug)]
pub struct EqAreaSignature {
    /// Inertia of the equation-space classifier, a matrix of order `d`.
    pub inertia: InertiaSignature,
    pub layer: usize,
}

/// How many eigenvalue branches escape at a singular point, and how the
/// surviving ones are relabeled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JumpPrediction {
    /// Branches diverging to -inf.
    pub n_down: usize,
    /// Branches diverging to +inf.
    pub n_up: usize,
    /// `lambda_n` on the area converges to `lambda_{n - index_shift}` at the
    /// singular point, for the middle block of indices.
    pub index_shift: usize,
}

/// Diagonal indicator of the complement of `K_1`: entry `(i, i)` vanishes
/// exactly when `i + 1` lies in `K_1`.
fn e1_diag(d: usize, k1: &[usize]) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| {
        if i == j && !k1.contains(&(i + 1)) {
            Complex64::ONE
        } else {
            Complex64::ZERO
        }
    })
}

/// Column selector picking the `K_2` coordinates: column `j` is the standard
/// basis vector `e_{k_j - d}`, with `K_2 = {k_1 < ... < k_r}` ascending.
fn e0_selector(d: usize, k2: &[usize]) -> CMatrix {
    CMatrix::from_fn(d, k2.len(), |i, j| {
        if i + 1 == k2[j] - d {
            Complex64::ONE
        } else {
            Complex64::ZERO
        }
    })
}

/// `R = S_1 E_1 + E_1 - I_d`, the core matrix of the non-degeneracy
/// conditions in equation space.
fn r_matrix(s1: &CMatrix, e1: &CMatrix) -> CMatrix {
    &(&(s1 * e1) + e1) - &CMatrix::identity(e1.rows())
}

fn chart_blocks(chart: &BoundaryChart) -> (CMatrix, CMatrix, CMatrix) {
    let d = chart.d();
    let s = chart.s();
    (s.block(0, 0, d, d), s.block(0, d, d, d), s.block(d, d, d, d))
}

/// The 2d x 2d block matrix `(A_1 P_0^{-1} + B_1 | B_2)` whose corank is the
/// layer index.  The same assembly measures the layer in boundary-condition
/// space (equation fixed) and in equation space (boundary condition fixed).
pub fn layer_matrix(eq: &SLEquation, bc: &BoundaryRaw) -> CMatrix {
    let left = &(&bc.a1() * eq.pinv(0)) + &bc.b1();
    CMatrix::hstack(&[&left, &bc.b2()])
}

/// Corank of the layer matrix: `2d - rank(A_1 P_0^{-1} + B_1 | B_2)`.
pub fn bc_layer(eq: &SLEquation, bc: &BoundaryRaw, tols: &Tolerances) -> Result<usize> {
    let m = layer_matrix(eq, bc);
    Ok(2 * bc.d() - numkernel::num_rank(&m, tols)?)
}

/// Boundary-condition-space classifier on the chart `O_K`.
///
/// With `G = [(E_1 - I_d) P_0^{-1} + E_1] (E_1 P_0^{-1} + I_d - E_1)^{-1}`
/// the classifier is `S_1 + G` when `K_2` is empty, and otherwise that block
/// bordered by the `K_2` columns of `S_2` and the `K_2` principal block of
/// `S_3`.  The denominator of `G` is invertible whenever `P_0^{-1}` is
/// positive definite, and the result is Hermitian.  Its rank determines the
/// rank of the layer matrix: `rank D = rank S + d - #K_2`.
pub fn bc_classifier(eq: &SLEquation, chart: &BoundaryChart, tols: &Tolerances) -> Result<CMatrix> {
    let d = chart.d();
    let pinv0 = eq.pinv(0);
    if !numkernel::is_positive_definite(pinv0, tols)? {
        return Err(Error::P0NotPositiveDefinite);
    }
    let e1 = e1_diag(d, &chart.k1());
    let id = CMatrix::identity(d);
    let numer = &(&(&e1 - &id) * pinv0) + &e1;
    let denom = &(&e1 * pinv0) + &(&id - &e1);
    let g = numkernel::solve_right(&numer, &denom)?;
    let (s1, s2, s3) = chart_blocks(chart);
    let head = &s1 + &g;
    let k2 = chart.k2();
    if k2.is_empty() {
        return Ok(head);
    }
    let e0 = e0_selector(d, &k2);
    let edge = &s2 * &e0;
    let corner = &(&e0.adjoint() * &s3) * &e0;
    Ok(CMatrix::vstack(&[
        &CMatrix::hstack(&[&head, &edge]),
        &CMatrix::hstack(&[&edge.adjoint(), &corner]),
    ]))
}

/// Layer and inertia of a boundary condition given in chart form.  The layer
/// is measured on the layer matrix directly, so the rank identity linking it
/// to the classifier stays an observable invariant rather than an assumption.
pub fn bc_signature(
    eq: &SLEquation,
    chart: &BoundaryChart,
    tols: &Tolerances,
) -> Result<BcAreaSignature> {
    let classifier = bc_classifier(eq, chart, tols)?;
    let inertia = numkernel::inertia(&classifier, tols)?;
    let raw = chart_to_raw(chart, tols)?;
    let layer = bc_layer(eq, &raw, tols)?;
    Ok(BcAreaSignature { k: chart.k().to_vec(), inertia, layer })
}

/// Whether the chart point admits the equation-space classifier: `R` must be
/// invertible and, when `K_2` is non-empty, so must the bordered block
/// `E_0^* (S_2^* E_1 R^{-1} S_2 - S_3) E_0`.  Holds automatically when
/// `K_1 = {1..d}` and `K_2` is empty (`R = -I_d` there).
pub fn nondegenerate(chart: &BoundaryChart, tols: &Tolerances) -> Result<bool> {
    let d = chart.d();
    let (s1, s2, s3) = chart_blocks(chart);
    let e1 = e1_diag(d, &chart.k1());
    let r_mat = r_matrix(&s1, &e1);
    if numkernel::num_rank(&r_mat, tols)? < d {
        return Ok(false);
    }
    let k2 = chart.k2();
    if k2.is_empty() {
        return Ok(true);
    }
    let e0 = e0_selector(d, &k2);
    let rinv_s2 = numkernel::solve(&r_mat, &s2)?;
    let inner = &(&(&s2.adjoint() * &e1) * &rinv_s2) - &s3;
    let t2 = &(&e0.adjoint() * &inner) * &e0;
    Ok(numkernel::num_rank(&t2, tols)? == k2.len())
}

/// Equation-space classifier at a fixed non-degenerate boundary condition:
///
/// `T = P_0^{-1} + R^{-1} (S_1 (I_d - E_1) + E_1) - T1 T2^{-1} T1^*`
///
/// with `T1 = R^{-1} S_2 E_0` and `T2 = E_0^* (S_2^* E_1 R^{-1} S_2 - S_3) E_0`;
/// the last term is absent when `K_2` is empty.  Hermitian, of order `d`, and
/// `rank (A_1 P_0^{-1} + B_1 | B_2) = rank T + d`.
pub fn eq_classifier(eq: &SLEquation, chart: &BoundaryChart, tols: &Tolerances) -> Result<CMatrix> {
    if !nondegenerate(chart, tols)? {
        return Err(Error::DegenerateBoundaryCondition(format!(
            "chart K = {:?} violates the invertibility conditions for the equation-space classifier",
            chart.k()
        )));
    }
    let d = chart.d();
    let (s1, s2, s3) = chart_blocks(chart);
    let e1 = e1_diag(d, &chart.k1());
    let id = CMatrix::identity(d);
    let r_mat = r_matrix(&s1, &e1);
    let core = &(&s1 * &(&id - &e1)) + &e1;
    let mut t = eq.pinv(0) + &numkernel::solve(&r_mat, &core)?;
    let k2 = chart.k2();
    if !k2.is_empty() {
        let e0 = e0_selector(d, &k2);
        let rinv_s2 = numkernel::solve(&r_mat, &s2)?;
        let t1 = &rinv_s2 * &e0;
        let inner = &(&(&s2.adjoint() * &e1) * &rinv_s2) - &s3;
        let t2 = &(&e0.adjoint() * &inner) * &e0;
        let tail = numkernel::solve(&t2, &t1.adjoint())?;
        t = &t - &(&t1 * &tail);
    }
    Ok(t)
}

/// Layer and inertia of the equation, at a fixed boundary condition given in
/// chart form.
pub fn eq_signature(
    eq: &SLEquation,
    chart: &BoundaryChart,
    tols: &Tolerances,
) -> Result<EqAreaSignature> {
    let classifier = eq_classifier(eq, chart, tols)?;
    let inertia = numkernel::inertia(&classifier, tols)?;
    let raw = chart_to_raw(chart, tols)?;
    let layer = bc_layer(eq, &raw, tols)?;
    Ok(EqAreaSignature { inertia, layer })
}

/// Atkinson-type classifier: the principal submatrix of the chart matrix `S`
/// on the index set `K`.  Hermitian by construction; needs `K` non-empty.
pub fn atkinson_classifier(chart: &BoundaryChart) -> Result<CMatrix> {
    let k = chart.k();
    if k.is_empty() {
        return Err(Error::EmptyK);
    }
    let s = chart.s();
    Ok(CMatrix::from_fn(k.len(), k.len(), |i, j| s[(k[i] - 1, k[j] - 1)]))
}

/// Predicted escape counts when a path in `space` runs from an area with
/// inertia `sig_from` into a singular point with inertia `sig_to` on a
/// strictly higher layer.
///
/// In boundary-condition space and for Atkinson-type problems the branches
/// that vanish from the positive part dive to -inf and the ones from the
/// negative part climb to +inf; in equation space the roles are reversed.
/// The convergent block is relabeled by `n_down` either way.
pub fn predict_jump(
    sig_from: InertiaSignature,
    sig_to: InertiaSignature,
    space: Space,
) -> Result<JumpPrediction> {
    if sig_from.order() != sig_to.order() {
        return Err(Error::IncompatibleSignatures(format!(
            "classifier orders differ: {} vs {}",
            sig_from.order(),
            sig_to.order()
        )));
    }
    if sig_to.r_zero <= sig_from.r_zero {
        return Err(Error::IncompatibleSignatures(format!(
            "target must sit on a strictly higher layer: corank {} -> {}",
            sig_from.r_zero, sig_to.r_zero
        )));
    }
    if sig_to.r_plus > sig_from.r_plus || sig_to.r_minus > sig_from.r_minus {
        return Err(Error::IncompatibleSignatures(format!(
            "definite parts cannot grow toward the singular point: {sig_from} -> {sig_to}"
        )));
    }
    let plus_drop = sig_from.r_plus - sig_to.r_plus;
    let minus_drop = sig_from.r_minus - sig_to.r_minus;
    let (n_down, n_up) = match space {
        Space::BoundaryCondition | Space::Atkinson => (plus_drop, minus_drop),
        Space::Equation => (minus_drop, plus_drop),
    };
    Ok(JumpPrediction { n_down, n_up, index_shift: n_down })
}
