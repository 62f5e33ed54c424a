//! Problem data: discrete Sturm-Liouville equations and self-adjoint
//! boundary conditions.
//!
//! An equation on `i = 1..N` is stored through the inverses `P_j^{-1}`
//! (`j = 0..N`, invertible Hermitian), the potentials `Q_i` (Hermitian) and
//! the weights `W_i` (positive definite), all `d x d` complex. A boundary
//! condition couples the endpoint data `(-y_0; y_N)` and
//! `(P_0 Δy_0; P_N Δy_N)` through a pair `(A, B)` of `2d x 2d` matrices with
//! `rank (A, B) = 2d` and `A B* = B A*`. Such pairs are equivalent up to an
//! invertible left factor; each equivalence class has chart representatives
//! `(S | I) E_K` with `S` Hermitian, indexed by subsets `K` of `{1..2d}`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numkernel::{
    self, is_positive_definite, num_rank, singular_values, solve, CMatrix, Tolerances,
};

/// Discrete vector Sturm-Liouville equation
/// `-∇(P_i Δy_i) + Q_i y_i = λ W_i y_i`, `1 <= i <= N`.
#[derive(Clone, Debug)]
pub struct SLEquation {
    d: usize,
    n: usize,
    pinv: Vec<CMatrix>,
    q: Vec<CMatrix>,
    w: Vec<CMatrix>,
}

impl SLEquation {
    /// Validating constructor. `pinv` holds `P_0^{-1} .. P_N^{-1}`
    /// (N+1 invertible Hermitian matrices), `q` holds `Q_1 .. Q_N`
    /// (Hermitian), `w` holds `W_1 .. W_N` (positive definite).
    pub fn new(
        d: usize,
        n: usize,
        pinv: Vec<CMatrix>,
        q: Vec<CMatrix>,
        w: Vec<CMatrix>,
        tols: &Tolerances,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::Validation("dimension d must be at least 1".into()));
        }
        if n < 2 {
            return Err(Error::Validation(format!("N must be at least 2, got {n}")));
        }
        if pinv.len() != n + 1 {
            return Err(Error::Validation(format!(
                "expected {} matrices Pinv_0..Pinv_{n}, got {}",
                n + 1,
                pinv.len()
            )));
        }
        if q.len() != n {
            return Err(Error::Validation(format!("expected {n} matrices Q_1..Q_{n}, got {}", q.len())));
        }
        if w.len() != n {
            return Err(Error::Validation(format!("expected {n} matrices W_1..W_{n}, got {}", w.len())));
        }
        for (j, m) in pinv.iter().enumerate() {
            check_shape(m, d, &format!("Pinv_{j}"))?;
            if !m.is_hermitian(tols.herm_tol) {
                return Err(Error::Validation(format!("Pinv_{j} is not Hermitian")));
            }
            if num_rank(m, tols)? < d {
                return Err(Error::Validation(format!("Pinv_{j} is not invertible")));
            }
        }
        for (idx, m) in q.iter().enumerate() {
            let i = idx + 1;
            check_shape(m, d, &format!("Q_{i}"))?;
            if !m.is_hermitian(tols.herm_tol) {
                return Err(Error::Validation(format!("Q_{i} is not Hermitian")));
            }
        }
        for (idx, m) in w.iter().enumerate() {
            let i = idx + 1;
            check_shape(m, d, &format!("W_{i}"))?;
            if !m.is_hermitian(tols.herm_tol) {
                return Err(Error::Validation(format!("W_{i} is not Hermitian")));
            }
            if !is_positive_definite(m, tols)? {
                return Err(Error::Validation(format!("W_{i} is not positive definite")));
            }
        }
        let herm = |v: Vec<CMatrix>| v.into_iter().map(|m| m.hermitized()).collect();
        Ok(SLEquation {
            d,
            n,
            pinv: herm(pinv),
            q: herm(q),
            w: herm(w),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of interior equation indices `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `P_j^{-1}`, `0 <= j <= N`.
    pub fn pinv(&self, j: usize) -> &CMatrix {
        &self.pinv[j]
    }

    /// `Q_i`, `1 <= i <= N`.
    pub fn q(&self, i: usize) -> &CMatrix {
        &self.q[i - 1]
    }

    /// `W_i`, `1 <= i <= N`.
    pub fn w(&self, i: usize) -> &CMatrix {
        &self.w[i - 1]
    }

    /// `P_j`, `0 <= j <= N`, recovered from its stored inverse.
    pub fn p(&self, j: usize) -> Result<CMatrix> {
        Ok(numkernel::inverse(&self.pinv[j])?.hermitized())
    }

    pub fn pinv_all(&self) -> &[CMatrix] {
        &self.pinv
    }

    pub fn q_all(&self) -> &[CMatrix] {
        &self.q
    }

    pub fn w_all(&self) -> &[CMatrix] {
        &self.w
    }

    /// Clone with `P_j^{-1}` replaced; revalidates.
    pub fn with_pinv(&self, j: usize, m: CMatrix, tols: &Tolerances) -> Result<Self> {
        let mut pinv = self.pinv.clone();
        pinv[j] = m;
        SLEquation::new(self.d, self.n, pinv, self.q.clone(), self.w.clone(), tols)
    }

    /// Clone with `Q_i` replaced; revalidates.
    pub fn with_q(&self, i: usize, m: CMatrix, tols: &Tolerances) -> Result<Self> {
        let mut q = self.q.clone();
        q[i - 1] = m;
        SLEquation::new(self.d, self.n, self.pinv.clone(), q, self.w.clone(), tols)
    }

    /// Clone with `W_i` replaced; revalidates.
    pub fn with_w(&self, i: usize, m: CMatrix, tols: &Tolerances) -> Result<Self> {
        let mut w = self.w.clone();
        w[i - 1] = m;
        SLEquation::new(self.d, self.n, self.pinv.clone(), self.q.clone(), w, tols)
    }
}

fn check_shape(m: &CMatrix, d: usize, name: &str) -> Result<()> {
    if m.rows() != d || m.cols() != d {
        return Err(Error::Validation(format!(
            "{name} must be {d}x{d}, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(())
}

/// Boundary condition in raw form: `A (-y_0; y_N) + B (P_0 Δy_0; P_N Δy_N) = 0`
/// with `A, B` of size `2d x 2d`, `rank (A, B) = 2d` and `A B* = B A*`.
#[derive(Clone, Debug)]
pub struct BoundaryRaw {
    a: CMatrix,
    b: CMatrix,
}

impl BoundaryRaw {
    pub fn new(a: CMatrix, b: CMatrix, tols: &Tolerances) -> Result<Self> {
        if !a.is_square() || a.rows() != b.rows() || !b.is_square() {
            return Err(Error::Validation(format!(
                "boundary pair must be square of equal size, got {}x{} and {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
        if a.rows() == 0 || a.rows() % 2 != 0 {
            return Err(Error::Validation(format!(
                "boundary pair must be 2d x 2d, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let twod = a.rows();
        let stacked = CMatrix::hstack(&[&a, &b]);
        if num_rank(&stacked, tols)? < twod {
            return Err(Error::Validation("boundary pair (A, B) has rank below 2d".into()));
        }
        let comm = &(&a * &b.adjoint()) - &(&b * &a.adjoint());
        let scale = 1.0 + a.max_abs().max(b.max_abs()).powi(2);
        if comm.max_abs() > tols.herm_tol * scale {
            return Err(Error::Validation(format!(
                "boundary pair is not self-adjoint: |A B* - B A*| = {:.3e}",
                comm.max_abs()
            )));
        }
        Ok(BoundaryRaw { a, b })
    }

    pub fn d(&self) -> usize {
        self.a.rows() / 2
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    /// Left `2d x d` block of `A`.
    pub fn a1(&self) -> CMatrix {
        self.a.block(0, 0, self.a.rows(), self.d())
    }

    /// Right `2d x d` block of `A`.
    pub fn a2(&self) -> CMatrix {
        self.a.block(0, self.d(), self.a.rows(), self.d())
    }

    /// Left `2d x d` block of `B`.
    pub fn b1(&self) -> CMatrix {
        self.b.block(0, 0, self.b.rows(), self.d())
    }

    /// Right `2d x d` block of `B`.
    pub fn b2(&self) -> CMatrix {
        self.b.block(0, self.d(), self.b.rows(), self.d())
    }

    /// The `2d x 4d` matrix `(A, B)`.
    pub fn stacked(&self) -> CMatrix {
        CMatrix::hstack(&[&self.a, &self.b])
    }
}

/// Boundary condition in chart form: the representative `(S | I_{2d}) E_K`
/// with `S` Hermitian and `K ⊆ {1..2d}` (1-based indices).
#[derive(Clone, Debug)]
pub struct BoundaryChart {
    k: Vec<usize>,
    s: CMatrix,
}

impl BoundaryChart {
    pub fn new(k: Vec<usize>, s: CMatrix, tols: &Tolerances) -> Result<Self> {
        if !s.is_square() || s.rows() == 0 || s.rows() % 2 != 0 {
            return Err(Error::Validation(format!(
                "chart matrix S must be 2d x 2d, got {}x{}",
                s.rows(),
                s.cols()
            )));
        }
        if !s.is_hermitian(tols.herm_tol) {
            return Err(Error::NotHermitian("chart matrix S".into()));
        }
        let twod = s.rows();
        let mut k = k;
        k.sort_unstable();
        k.dedup();
        for &idx in &k {
            if idx == 0 || idx > twod {
                return Err(Error::IndexOutOfRange(format!(
                    "chart index {idx} outside 1..={twod}"
                )));
            }
        }
        Ok(BoundaryChart { k, s: s.hermitized() })
    }

    pub fn d(&self) -> usize {
        self.s.rows() / 2
    }

    pub fn k(&self) -> &[usize] {
        &self.k
    }

    pub fn s(&self) -> &CMatrix {
        &self.s
    }

    /// `K_1 = K ∩ {1..d}`.
    pub fn k1(&self) -> Vec<usize> {
        let d = self.d();
        self.k.iter().copied().filter(|&i| i <= d).collect()
    }

    /// `K_2 = K ∩ {d+1..2d}`.
    pub fn k2(&self) -> Vec<usize> {
        let d = self.d();
        self.k.iter().copied().filter(|&i| i > d).collect()
    }

    /// `r = #K_2`.
    pub fn r(&self) -> usize {
        self.k2().len()
    }

    /// Clone with the chart matrix replaced (same `K`).
    pub fn with_s(&self, s: CMatrix, tols: &Tolerances) -> Result<Self> {
        BoundaryChart::new(self.k.clone(), s, tols)
    }
}

/// Either form of a boundary condition.
#[derive(Clone, Debug)]
pub enum BoundaryCondition {
    Raw(BoundaryRaw),
    Chart(BoundaryChart),
}

impl BoundaryCondition {
    pub fn d(&self) -> usize {
        match self {
            BoundaryCondition::Raw(r) => r.d(),
            BoundaryCondition::Chart(c) => c.d(),
        }
    }

    pub fn to_raw(&self, tols: &Tolerances) -> Result<BoundaryRaw> {
        match self {
            BoundaryCondition::Raw(r) => Ok(r.clone()),
            BoundaryCondition::Chart(c) => chart_to_raw(c, tols),
        }
    }
}

/// The chart transfer matrix `E_K` with its block halves.
///
/// `E_K` is obtained from `I_{4d}` by, for each `k ∈ K`, multiplying column
/// `k + 2d` by `-1` and then exchanging columns `k` and `k + 2d`. It is
/// unitary and preserves the standard symplectic form.
#[derive(Clone, Debug)]
pub struct EKMatrix {
    d: usize,
    k: Vec<usize>,
    full: CMatrix,
}

impl EKMatrix {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> &[usize] {
        &self.k
    }

    /// The full `4d x 4d` matrix.
    pub fn full(&self) -> &CMatrix {
        &self.full
    }

    /// Upper half `E_{K,1}` (`2d x 4d`).
    pub fn top(&self) -> CMatrix {
        self.full.block(0, 0, 2 * self.d, 4 * self.d)
    }

    /// Lower half `E_{K,2}` (`2d x 4d`).
    pub fn bottom(&self) -> CMatrix {
        self.full.block(2 * self.d, 0, 2 * self.d, 4 * self.d)
    }

    /// Diagonal indicator block `E_1`: entry `i` is 0 iff `i ∈ K_1`.
    pub fn e1(&self) -> CMatrix {
        let d = self.d;
        CMatrix::from_fn(d, d, |i, j| {
            if i == j && !self.k.contains(&(i + 1)) {
                Complex64::ONE
            } else {
                Complex64::ZERO
            }
        })
    }

    /// Diagonal indicator block `E_2`: entry `i` is 0 iff `d + i ∈ K_2`.
    pub fn e2(&self) -> CMatrix {
        let d = self.d;
        CMatrix::from_fn(d, d, |i, j| {
            if i == j && !self.k.contains(&(d + i + 1)) {
                Complex64::ONE
            } else {
                Complex64::ZERO
            }
        })
    }
}

/// Build `E_K` by the column construction. `k` holds 1-based indices in
/// `{1..2d}`.
pub fn build_ek(d: usize, k: &[usize]) -> Result<EKMatrix> {
    if d == 0 {
        return Err(Error::Validation("dimension d must be at least 1".into()));
    }
    let mut ks: Vec<usize> = k.to_vec();
    ks.sort_unstable();
    ks.dedup();
    for &idx in &ks {
        if idx == 0 || idx > 2 * d {
            return Err(Error::IndexOutOfRange(format!("E_K index {idx} outside 1..={}", 2 * d)));
        }
    }
    let mut m = CMatrix::identity(4 * d);
    for &idx in &ks {
        let a = idx - 1; // column k
        let b = idx - 1 + 2 * d; // column k + 2d
        for row in 0..4 * d {
            let t = m[(row, b)] * -1.0;
            m[(row, b)] = m[(row, a)];
            m[(row, a)] = t;
        }
    }
    Ok(EKMatrix { d, k: ks, full: m })
}

/// Expand a chart `(K, S)` to its raw representative `(S | I_{2d}) E_K`.
pub fn chart_to_raw(chart: &BoundaryChart, tols: &Tolerances) -> Result<BoundaryRaw> {
    let d = chart.d();
    let ek = build_ek(d, chart.k())?;
    let si = CMatrix::hstack(&[chart.s(), &CMatrix::identity(2 * d)]);
    let ab = &si * ek.full();
    let a = ab.block(0, 0, 2 * d, 2 * d);
    let b = ab.block(0, 2 * d, 2 * d, 2 * d);
    BoundaryRaw::new(a, b, tols)
}

/// Canonical chart of a raw boundary pair.
///
/// Scans all `2^{2d}` subsets `K`, forms `(A, B) E_K^*` and keeps the chart
/// whose right `2d x 2d` block has the largest smallest singular value
/// (ties resolved toward the first subset in mask order). Returns the chart
/// `(K, S)` with `S = D^{-1} C` where `(C | D) = (A, B) E_K^*`.
pub fn canonicalize(raw: &BoundaryRaw, tols: &Tolerances) -> Result<BoundaryChart> {
    let d = raw.d();
    let m = raw.stacked();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u32..(1u32 << (2 * d)) {
        let k: Vec<usize> = (0..2 * d).filter(|&i| mask & (1 << i) != 0).map(|i| i + 1).collect();
        let ek = build_ek(d, &k)?;
        let me = &m * &ek.full().adjoint();
        let right = me.block(0, 2 * d, 2 * d, 2 * d);
        let smin = singular_values(&right, tols)?[0];
        let better = match &best {
            None => true,
            Some((s, _)) => smin > *s,
        };
        if better {
            best = Some((smin, k));
        }
    }
    let (smin, k) = best.unwrap();
    let scale = singular_values(&m, tols)?.last().copied().unwrap_or(0.0);
    if smin <= tols.rank_tol * scale.max(1.0) {
        return Err(Error::NoChartFound);
    }
    let ek = build_ek(d, &k)?;
    let me = &m * &ek.full().adjoint();
    let left = me.block(0, 0, 2 * d, 2 * d);
    let right = me.block(0, 2 * d, 2 * d, 2 * d);
    let s = solve(&right, &left)?;
    // self-adjointness of the raw pair makes D^{-1} C Hermitian
    debug_assert!(s.is_hermitian(1e-7));
    BoundaryChart::new(k, s.hermitized(), tols)
}

/// Row-space equality of two boundary pairs, i.e. whether they describe the
/// same boundary condition up to an invertible left factor. Compared through
/// the orthogonal projectors onto the ranges of the conjugated row spans.
pub fn same_boundary_condition(x: &BoundaryRaw, y: &BoundaryRaw, tols: &Tolerances) -> Result<bool> {
    if x.d() != y.d() {
        return Ok(false);
    }
    let px = row_space_projector(&x.stacked(), tols)?;
    let py = row_space_projector(&y.stacked(), tols)?;
    Ok((&px - &py).max_abs() <= 1e-7)
}

fn row_space_projector(m: &CMatrix, tols: &Tolerances) -> Result<CMatrix> {
    // range(m*) = orthogonal complement of the kernel of m
    let ns = numkernel::nullspace(m, tols)?;
    let id = CMatrix::identity(m.cols());
    if ns.cols() == 0 {
        return Ok(id);
    }
    Ok(&id - &(&ns * &ns.adjoint()))
}

/// Vibrating string with point masses `m_1..m_l` and stiffnesses
/// `c_0..c_l`: builds the scalar equation with `P_j = c_j`, `W_i = m_i`,
/// `Q = 0` and clamped ends `y_0 = y_{N+1} = 0`.
pub fn vibrating_string(c: &[f64], m: &[f64], tols: &Tolerances) -> Result<(SLEquation, BoundaryRaw)> {
    let l = m.len();
    if l < 2 {
        return Err(Error::Validation(format!("need at least 2 masses, got {l}")));
    }
    if c.len() != l + 1 {
        return Err(Error::Validation(format!(
            "need {} stiffnesses c_0..c_{l} for {l} masses, got {}",
            l + 1,
            c.len()
        )));
    }
    for (j, &cj) in c.iter().enumerate() {
        if !(cj > 0.0) {
            return Err(Error::NonPositiveCoefficient(format!("c_{j} = {cj}")));
        }
    }
    for (idx, &mi) in m.iter().enumerate() {
        if !(mi > 0.0) {
            return Err(Error::NonPositiveCoefficient(format!("m_{} = {mi}", idx + 1)));
        }
    }
    let pinv: Vec<CMatrix> = c.iter().map(|&cj| CMatrix::diag(&[1.0 / cj])).collect();
    let q = vec![CMatrix::zeros(1, 1); l];
    let w: Vec<CMatrix> = m.iter().map(|&mi| CMatrix::diag(&[mi])).collect();
    let eq = SLEquation::new(1, l, pinv, q, w, tols)?;
    let bc = dirichlet_bc(1, &eq.p(l)?, tols)?;
    Ok((eq, bc))
}

/// Birth-death chain with transition probabilities `alpha_j` (right) and
/// `beta_j` (left), `j = 1..l`. Gauges the similarity transform `a_1 = 1`,
/// `a_{j+1} = alpha_j a_j / beta_{j+1}` and returns the weighted string whose
/// spectrum equals that of `I - T` for the chain's transition block `T`.
pub fn random_walk(alpha: &[f64], beta: &[f64], tols: &Tolerances) -> Result<(SLEquation, BoundaryRaw)> {
    let l = alpha.len();
    if l < 2 {
        return Err(Error::Validation(format!("need at least 2 states, got {l}")));
    }
    if beta.len() != l {
        return Err(Error::InconsistentProbabilities(format!(
            "alpha has {l} entries but beta has {}",
            beta.len()
        )));
    }
    for j in 0..l {
        if !(alpha[j] > 0.0) || !(beta[j] > 0.0) {
            return Err(Error::InconsistentProbabilities(format!(
                "alpha_{0} = {1}, beta_{0} = {2} must be positive",
                j + 1,
                alpha[j],
                beta[j]
            )));
        }
        if alpha[j] + beta[j] > 1.0 + 1e-12 {
            return Err(Error::InconsistentProbabilities(format!(
                "alpha_{0} + beta_{0} = {1} exceeds 1",
                j + 1,
                alpha[j] + beta[j]
            )));
        }
    }
    // similarity weights a_j and conductances g_j
    let mut a = vec![1.0f64; l + 1]; // a[1..=l]
    for j in 1..l {
        a[j + 1] = alpha[j - 1] * a[j] / beta[j];
    }
    let mut g = vec![0.0f64; l + 1]; // g[0..=l]
    g[0] = beta[0] * a[1];
    for j in 1..=l {
        g[j] = alpha[j - 1] * a[j];
    }
    let pinv: Vec<CMatrix> = g.iter().map(|&gj| CMatrix::diag(&[1.0 / gj])).collect();
    let q = vec![CMatrix::zeros(1, 1); l];
    let w: Vec<CMatrix> = (1..=l).map(|j| CMatrix::diag(&[a[j]])).collect();
    let eq = SLEquation::new(1, l, pinv, q, w, tols)?;
    let bc = dirichlet_bc(1, &eq.p(l)?, tols)?;
    Ok((eq, bc))
}

/// Clamped-end boundary pair `y_0 = 0`, `y_{N+1} = 0` (the second row uses
/// `y_{N+1} = y_N + P_N^{-1} (P_N Δy_N)`).
fn dirichlet_bc(d: usize, p_n: &CMatrix, tols: &Tolerances) -> Result<BoundaryRaw> {
    let mut a = CMatrix::zeros(2 * d, 2 * d);
    let mut b = CMatrix::zeros(2 * d, 2 * d);
    let id = CMatrix::identity(d);
    a.set_block(0, 0, &(-&id));
    a.set_block(d, d, &id);
    b.set_block(d, d, &numkernel::inverse(p_n)?.hermitized());
    BoundaryRaw::new(a, b, tols)
}
