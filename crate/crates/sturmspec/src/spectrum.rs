//! Spectra of discrete Sturm-Liouville problems.
//!
//! The spectrum is computed two independent ways:
//!
//! * `eigenvalues` interpolates the characteristic determinant
//!   `Γ(λ) = det(A Φ(λ) + B Ψ(λ))` built from the fundamental solutions and
//!   roots it with a real-rooted interlacing bisection;
//! * `pencil_oracle` assembles the full `(N+2)d` linear pencil over
//!   `(y_0, …, y_{N+1})` and roots its determinant the same way.
//!
//! Both must agree with the closed-form eigenvalue count
//! `(N-2)d + rank(A_1 P_0^{-1} + B_1, B_2)`; a mismatch is a hard error, not
//! a warning, since the count is exact.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numkernel::{self, num_rank, CMatrix, Tolerances};
use crate::problem::{BoundaryCondition, BoundaryRaw, SLEquation};

/// Matrix with polynomial entries, stored as coefficient matrices by
/// ascending power of `λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    coeffs: Vec<CMatrix>,
}

impl PolyMatrix {
    pub fn new(coeffs: Vec<CMatrix>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial matrix needs a constant term");
        let (r, c) = (coeffs[0].rows(), coeffs[0].cols());
        assert!(coeffs.iter().all(|m| m.rows() == r && m.cols() == c));
        PolyMatrix { coeffs }
    }

    pub fn constant(m: CMatrix) -> Self {
        PolyMatrix { coeffs: vec![m] }
    }

    pub fn rows(&self) -> usize {
        self.coeffs[0].rows()
    }

    pub fn cols(&self) -> usize {
        self.coeffs[0].cols()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> CMatrix {
        if k < self.coeffs.len() {
            self.coeffs[k].clone()
        } else {
            CMatrix::zeros(self.rows(), self.cols())
        }
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    /// Horner evaluation at a real point.
    pub fn eval(&self, lambda: f64) -> CMatrix {
        let mut acc = self.coeffs.last().unwrap().clone();
        for k in (0..self.coeffs.len() - 1).rev() {
            acc = &acc.scale(lambda) + &self.coeffs[k];
        }
        acc
    }

    /// Drop trailing coefficients below `1e-10 * max coefficient norm`.
    pub fn trimmed(mut self) -> Self {
        let scale = self.coeffs.iter().map(|m| m.max_abs()).fold(0.0, f64::max);
        let thr = 1e-10 * scale;
        while self.coeffs.len() > 1 && self.coeffs.last().unwrap().max_abs() <= thr {
            self.coeffs.pop();
        }
        self
    }

    fn add(&self, other: &PolyMatrix) -> PolyMatrix {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(len);
        for k in 0..len {
            out.push(&self.coeff(k) + &other.coeff(k));
        }
        PolyMatrix::new(out)
    }

    /// Left-multiply every coefficient by a constant matrix.
    fn lmul(&self, m: &CMatrix) -> PolyMatrix {
        PolyMatrix::new(self.coeffs.iter().map(|c| m * c).collect())
    }

    /// Multiply by `λ` (shift all powers up by one).
    fn shift(&self) -> PolyMatrix {
        let mut out = vec![CMatrix::zeros(self.rows(), self.cols())];
        out.extend(self.coeffs.iter().cloned());
        PolyMatrix::new(out)
    }

    fn vstack2(top: &PolyMatrix, bottom: &PolyMatrix) -> PolyMatrix {
        let len = top.coeffs.len().max(bottom.coeffs.len());
        let mut out = Vec::with_capacity(len);
        for k in 0..len {
            out.push(CMatrix::vstack(&[&top.coeff(k), &bottom.coeff(k)]));
        }
        PolyMatrix::new(out)
    }
}

/// Scalar polynomial with complex coefficients, ascending powers, plus its
/// validated monic real normalization.
#[derive(Clone, Debug)]
pub struct ScalarPoly {
    coeffs: Vec<Complex64>,
    monic: Vec<f64>,
}

impl ScalarPoly {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn eval(&self, lambda: Complex64) -> Complex64 {
        let mut acc = Complex64::ZERO;
        for c in self.coeffs.iter().rev() {
            acc = acc * lambda + c;
        }
        acc
    }

    /// Monic normalization with real coefficients. Realness was already
    /// verified against the interpolation noise floor when the polynomial
    /// was fitted (all roots of a self-adjoint problem are real, so the
    /// coefficients share one complex phase).
    pub fn monic_real(&self) -> &[f64] {
        &self.monic
    }
}

/// Finite multiset of real eigenvalues with multiplicities, ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    items: Vec<(f64, usize)>,
}

impl Spectrum {
    pub fn new(items: Vec<(f64, usize)>) -> Result<Self> {
        for w in items.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::Validation("spectrum must be strictly increasing".into()));
            }
        }
        if items.iter().any(|&(_, m)| m == 0) {
            return Err(Error::Validation("multiplicities must be positive".into()));
        }
        Ok(Spectrum { items })
    }

    pub fn items(&self) -> &[(f64, usize)] {
        &self.items
    }

    pub fn total(&self) -> usize {
        self.items.iter().map(|&(_, m)| m).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Eigenvalues repeated by multiplicity.
    pub fn flattened(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total());
        for &(l, m) in &self.items {
            out.extend(std::iter::repeat(l).take(m));
        }
        out
    }
}

/// Normalized eigenfunction of a simple eigenvalue: the node values
/// `y_0 … y_{N+1}` plus the boundary vector
/// `Y = (-y_0; y_N; P_0 Δy_0; P_N Δy_N)`.
#[derive(Clone, Debug)]
pub struct EigenFunction {
    lambda: f64,
    y: Vec<CMatrix>,
    boundary: CMatrix,
}

impl EigenFunction {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Node value `y_i`, `0 <= i <= N+1` (`d x 1`).
    pub fn y(&self, i: usize) -> &CMatrix {
        &self.y[i]
    }

    pub fn nodes(&self) -> &[CMatrix] {
        &self.y
    }

    /// Boundary vector `(-y_0; y_N; P_0 Δy_0; P_N Δy_N)` (`4d x 1`).
    pub fn boundary(&self) -> &CMatrix {
        &self.boundary
    }
}

/// Fundamental solutions `(Φ, Ψ)`: `2d x 2d` polynomial matrices stacking the
/// endpoint position data `(-φ_0; φ_N)` and momentum data
/// `(P_0 Δφ_0; P_N Δφ_N)` of the solution family with initial state `I_{2d}`.
pub fn fundamental_solutions(eq: &SLEquation) -> (PolyMatrix, PolyMatrix) {
    let d = eq.d();
    let n = eq.n();
    // state (y_i, u_i) with u_i = P_i Δy_i, initial data (y_0; u_0) = I_{2d}
    let y0 = PolyMatrix::constant(CMatrix::hstack(&[
        &CMatrix::identity(d),
        &CMatrix::zeros(d, d),
    ]));
    let u0 = PolyMatrix::constant(CMatrix::hstack(&[
        &CMatrix::zeros(d, d),
        &CMatrix::identity(d),
    ]));
    let mut y = y0.clone();
    let mut u = u0.clone();
    for i in 1..=n {
        // y_i = y_{i-1} + P_{i-1}^{-1} u_{i-1}
        y = y.add(&u.lmul(eq.pinv(i - 1)));
        // u_i = u_{i-1} - (λ W_i - Q_i) y_i
        u = u.add(&y.lmul(eq.q(i)));
        u = u.add(&y.lmul(&eq.w(i).scale(-1.0)).shift());
    }
    let phi = PolyMatrix::vstack2(&PolyMatrix::new(y0.coeffs.iter().map(|m| -m).collect()), &y);
    let psi = PolyMatrix::vstack2(&u0, &u);
    (phi, psi)
}

/// Endpoint data `(Φ(λ), Ψ(λ))` by running the recursion numerically at a
/// fixed `λ` — mathematically the same as evaluating `fundamental_solutions`
/// but cheaper and free of coefficient growth.  Kept as the cross-check
/// reference for the renormalized evaluator.
#[cfg(test)]
fn endpoint_data(eq: &SLEquation, lambda: f64) -> (CMatrix, CMatrix) {
    let d = eq.d();
    let y0 = CMatrix::hstack(&[&CMatrix::identity(d), &CMatrix::zeros(d, d)]);
    let u0 = CMatrix::hstack(&[&CMatrix::zeros(d, d), &CMatrix::identity(d)]);
    let mut y = y0.clone();
    let mut u = u0.clone();
    for i in 1..=eq.n() {
        y = &y + &(eq.pinv(i - 1) * &u);
        let coupling = &(eq.q(i) * &y) - &(eq.w(i) * &y).scale(lambda);
        u = &u + &coupling;
    }
    let phi = CMatrix::vstack(&[&(-&y0), &y]);
    let psi = CMatrix::vstack(&[&u0, &u]);
    (phi, psi)
}

/// `Γ(λ) = det(A Φ(λ) + B Ψ(λ))` evaluated through a QR-renormalized
/// transfer recursion.
///
/// A direct determinant of `A Φ + B Ψ` loses `|λ|^(2dN - count)` digits to
/// cancellation at large `|λ|`: the endpoint data grows like `λ^N` per
/// entry while the determinant only grows like `λ^count`. Each one-step
/// transfer matrix is unimodular, so factoring the running state `(Y; U) =
/// Z·R_i···R_1` with unitary `Z` after every step keeps all determinant
/// factors near one: `Γ = det([-A_1 B_1]·R_1^{-1}···R_N^{-1} +
/// [A_2 B_2]·Z) · ∏ det(R_i)`.
fn gamma_at(eq: &SLEquation, bc: &BoundaryRaw, x: f64) -> Result<Complex64> {
    let d = eq.d();
    let mut z = CMatrix::identity(2 * d);
    let mut f = CMatrix::hstack(&[&(-&bc.a1()), &bc.b1()]);
    let mut gamma = Complex64::ONE;
    for i in 1..=eq.n() {
        let zy = z.block(0, 0, d, 2 * d);
        let zu = z.block(d, 0, d, 2 * d);
        let y = &zy + &(eq.pinv(i - 1) * &zu);
        let coupling = &(eq.q(i) * &y) - &(eq.w(i) * &y).scale(x);
        let u = &zu + &coupling;
        let (zq, r) = numkernel::qr_square(&CMatrix::vstack(&[&y, &u]));
        for k in 0..2 * d {
            gamma *= r[(k, k)];
        }
        f = numkernel::solve_right_upper(&f, &r)?;
        z = zq;
    }
    let m = &f + &(&CMatrix::hstack(&[&bc.a2(), &bc.b2()]) * &z);
    Ok(numkernel::det(&m) * gamma)
}

/// Closed-form eigenvalue count `(N-2)d + rank(A_1 P_0^{-1} + B_1, B_2)`.
pub fn count_formula(eq: &SLEquation, bc: &BoundaryRaw, tols: &Tolerances) -> Result<usize> {
    let left = &(&bc.a1() * eq.pinv(0)) + &bc.b1();
    let b2 = bc.b2();
    let stacked = CMatrix::hstack(&[&left, &b2]);
    Ok((eq.n() - 2) * eq.d() + num_rank(&stacked, tols)?)
}

/// Sampling radius for determinant interpolation: a coarse a-priori bound
/// `1 + max_i ‖W_i^{-1}‖(‖Q_i‖ + 2‖P_{i-1}‖ + 2‖P_i‖)`. Only the node spread
/// matters for conditioning; roots may lie outside the interval.
fn sample_radius(eq: &SLEquation, tols: &Tolerances) -> Result<f64> {
    let min_abs_eig = |m: &CMatrix| -> Result<f64> {
        let (ev, _) = numkernel::herm_eig(m, tols)?;
        Ok(ev.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min))
    };
    let max_abs_eig = |m: &CMatrix| -> Result<f64> {
        let (ev, _) = numkernel::herm_eig(m, tols)?;
        Ok(ev.iter().map(|l| l.abs()).fold(0.0, f64::max))
    };
    let mut worst = 0.0f64;
    for i in 1..=eq.n() {
        let winv = 1.0 / min_abs_eig(eq.w(i))?;
        let qn = max_abs_eig(eq.q(i))?;
        let pprev = 1.0 / min_abs_eig(eq.pinv(i - 1))?;
        let pcur = 1.0 / min_abs_eig(eq.pinv(i))?;
        worst = worst.max(winv * (qn + 2.0 * pprev + 2.0 * pcur));
    }
    Ok(1.0 + worst)
}

fn chebyshev_nodes(rho: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| rho * ((2 * j + 1) as f64 * PI / (2.0 * n as f64)).cos())
        .collect()
}

/// Chebyshev coefficients of the interpolant through values at the
/// first-kind nodes (discrete cosine transform).
fn chebyshev_coeffs(values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    let mut cheb = vec![Complex64::ZERO; n];
    for (k, ck) in cheb.iter_mut().enumerate() {
        let mut acc = Complex64::ZERO;
        for (j, v) in values.iter().enumerate() {
            let theta = (2 * j + 1) as f64 * PI / (2.0 * n as f64);
            acc += *v * (k as f64 * theta).cos();
        }
        let weight = if k == 0 { 1.0 } else { 2.0 };
        *ck = acc * (weight / n as f64);
    }
    cheb
}

/// Expand a Chebyshev series into monomial coefficients of the scaled
/// variable. The integer coefficients of T_k stay exact in f64 at every
/// degree used here.
fn cheb_to_monomial(cheb: &[Complex64]) -> Vec<Complex64> {
    let n = cheb.len();
    let mut out = vec![Complex64::ZERO; n];
    let mut prev = vec![0.0f64; n];
    prev[0] = 1.0;
    out[0] += cheb[0];
    if n > 1 {
        let mut cur = vec![0.0f64; n];
        cur[1] = 1.0;
        out[1] += cheb[1];
        for k in 2..n {
            let mut next = vec![0.0f64; n];
            for m in 0..n - 1 {
                next[m + 1] = 2.0 * cur[m];
            }
            for m in 0..n {
                next[m] -= prev[m];
            }
            for m in 0..n {
                out[m] += cheb[k] * next[m];
            }
            prev = cur;
            cur = next;
        }
    }
    out
}

/// Index of the last coefficient above `rel * max norm` (the trimmed
/// degree). Trimming happens in the Chebyshev basis, where the fit noise is
/// flat at roughly `matrix work * ε` relative to the largest coefficient.
fn trimmed_degree(c: &[Complex64], rel: f64) -> usize {
    let scale = c.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let thr = rel * scale;
    let mut len = c.len();
    while len > 1 && c[len - 1].norm() <= thr {
        len -= 1;
    }
    len - 1
}

/// Conjugate phase of the largest-magnitude coefficient — the only one
/// whose own phase is reliable when the dynamic range is wide.
fn common_phase(c: &[Complex64]) -> Complex64 {
    let big = c
        .iter()
        .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .unwrap();
    big.conj() / big.norm()
}

/// Rotate all coefficients onto the real axis and normalize by the aligned
/// leading value (its sign cancels, so the roots are unchanged), returning
/// the monic real vector in the same basis.
fn align_monic(scaled: &[Complex64]) -> Vec<f64> {
    let phase = common_phase(scaled);
    let lead = (scaled.last().unwrap() * phase).re;
    scaled.iter().map(|c| (c * phase).re / lead).collect()
}

/// Verify that the coefficients share one complex phase (all roots real).
fn check_phase_coherence(c: &[Complex64]) -> Result<()> {
    let phase = common_phase(c);
    let scale = c.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let resid = c.iter().map(|x| (x * phase).im.abs()).fold(0.0, f64::max);
    if resid > 1e-8 * scale {
        return Err(Error::NumericalInstability(format!(
            "characteristic polynomial has non-real coefficients (residue {:.3e})",
            resid / scale
        )));
    }
    Ok(())
}

/// Monic real coefficients (ascending) of `∏ (λ - r_i)`.
fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut out = vec![1.0f64];
    for &r in roots {
        let mut next = vec![0.0; out.len() + 1];
        for (k, &c) in out.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= r * c;
        }
        out = next;
    }
    out
}

// A fitted factor may claim the entire remaining degree when its leading
// coefficient clears TRIM_FULL; below that the top coefficients are split
// off for a deflation round, and only signal above TRIM_SAFE is trusted to
// produce roots that get divided out of the samples.
const TRIM_FULL: f64 = 1e-11;
const TRIM_SAFE: f64 = 1e-7;
// Resolution at which near-coincident fitted roots are treated as one point
// while extracting and polishing; matches the default clustering tolerance.
const COINCIDENT_REL: f64 = 1e-6;
// Per-coefficient noise floor of one Chebyshev fit relative to the largest
// sampled magnitude: transform round-off plus the determinant evaluations.
const FIT_NOISE_REL: f64 = 1e-12;
// A degree claim below the fine trim is trusted only when every coefficient
// above it sits at least this factor under the claimed leading one — a
// decisive noise shelf rather than compressed signal.
const SHELF_GAP: f64 = 1e-2;
// Once the zoom radius is this small, whatever structure remains is a root
// cluster at the origin below clustering resolution; claim it as such.
const RHO_FLOOR: f64 = 1e-7;
// Beyond this multiple of the sampling radius the determinant recursion
// exhausts f64 (adjacent transfer columns agree past the mantissa), so both
// Newton polish and kernel verification stop there; escaped roots are
// carried by their deflated factor, whose relative accuracy is ample for
// divergence bookkeeping.
const ESCAPE_FACTOR: f64 = 100.0;
// Roots outside the sampling interval only ever need relative accuracy (all
// downstream comparisons at large |λ| are relative), so the keep rule lets
// them through at this relative resolution instead of the absolute one.
const ESCAPE_KEEP_REL: f64 = 1e-5;
// Within Newton reach a fitted root only needs to start well inside its own
// basin — closer to itself than this fraction of the gap to the nearest
// other root — and the polish supplies the precision.
const BASIN_FRAC: f64 = 0.05;

/// Ranges of near-coincident entries in a sorted slice, grouped at the same
/// resolution the final clustering uses.
fn coincident_ranges(roots: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < roots.len() {
        let mut end = start + 1;
        while end < roots.len()
            && roots[end] - roots[end - 1] <= COINCIDENT_REL * (1.0 + roots[end].abs())
        {
            end += 1;
        }
        out.push((start, end));
        start = end;
    }
    out
}

/// Newton-polish fitted roots against fresh determinant evaluations. The
/// interpolation conditions the roots only to the sampling radius, which is
/// set by the largest root; eigenvalues orders of magnitude below it come
/// out with absolute error far above their own scale. Multiplicity-aware
/// steps (`m·Γ/Γ'` with `Γ'` by central difference) restore quadratic
/// convergence; the determinant has constant phase on the real axis, so the
/// real projection of the step is the whole signal. Roots past `skip_above`
/// are left on their fitted values: evaluations there read pure round-off.
fn polish_roots(
    roots: &mut [f64],
    skip_above: f64,
    det_at: &mut impl FnMut(f64) -> Result<Complex64>,
) -> Result<()> {
    roots.sort_by(f64::total_cmp);
    for (start, end) in coincident_ranges(roots) {
        let m = (end - start) as f64;
        let mut x = roots[start..end].iter().sum::<f64>() / m;
        if x.abs() > skip_above {
            for r in roots[start..end].iter_mut() {
                *r = x;
            }
            continue;
        }
        let mut best = x;
        let mut best_res = f64::INFINITY;
        for _ in 0..40 {
            let h = 1e-7 * (1.0 + x.abs());
            let f0 = det_at(x)?;
            if f0.norm() < best_res {
                best_res = f0.norm();
                best = x;
            }
            let deriv = (det_at(x + h)? - det_at(x - h)?) / (2.0 * h);
            if deriv.norm() == 0.0 {
                break;
            }
            let step = m * (f0 * deriv.conj()).re / deriv.norm_sqr();
            x -= step;
            if !x.is_finite() {
                break;
            }
            if step.abs() <= 1e-15 * (1.0 + x.abs()) {
                if det_at(x)?.norm() < best_res {
                    best = x;
                }
                break;
            }
        }
        for r in roots[start..end].iter_mut() {
            *r = best;
        }
    }
    Ok(())
}

/// Interpolate a determinant known to be a polynomial of the stated degree
/// and return it in rooted, monic-real form.
///
/// The determinant is sampled on `[-ρ, ρ]` with `ρ = min(rho_cap,
/// 1.5 * max|root estimate|)`: shrinking the coarse a-priori bound toward
/// the actual spectral scale keeps the low-order coefficients of crowded
/// spectra above the noise floor. One fixed radius still cannot resolve a
/// spectrum whose dynamic range exceeds the fit precision — the small roots
/// of such a fit are pure coefficient noise — so extraction walks a zoom
/// ladder: each round fits the residual left after dividing the claimed
/// roots out of fresh samples (pointwise deflation keeps full relative
/// precision), claims only the roots the fit certifies against its own
/// noise floor, then shrinks the radius fourfold so the inner structure is
/// refit at a scale where it carries signal. Roots far outside the interval
/// (escaping eigenvalue branches) come out of partial factors with high
/// leverage and are claimed at relative accuracy. The claimed degrees must
/// add up to `expected_degree` or the fit fails, since the count formula is
/// exact.
fn fit_determinant(
    rho_cap: f64,
    nodes: usize,
    expected_degree: usize,
    mut det_at: impl FnMut(f64) -> Result<Complex64>,
) -> Result<ScalarPoly> {
    let sample = |rho: f64, det_at: &mut dyn FnMut(f64) -> Result<Complex64>| -> Result<(Vec<f64>, Vec<Complex64>)> {
        let xs = chebyshev_nodes(rho, nodes);
        let mut values = Vec::with_capacity(nodes);
        for &x in &xs {
            let v = det_at(x)?;
            if !v.is_finite() {
                return Err(Error::NumericalInstability(format!(
                    "determinant overflow at sample point {x:.3e}"
                )));
            }
            values.push(v);
        }
        Ok((xs, values))
    };
    // pass 1: locate the spectral scale from a fit at the coarse bound
    let (xs_cap, v_cap) = sample(rho_cap, &mut det_at)?;
    let c1 = chebyshev_coeffs(&v_cap);
    if c1.iter().all(|c| c.norm() == 0.0) {
        return Err(Error::NumericalInstability(
            "determinant vanishes identically on the sampling interval".into(),
        ));
    }
    let d1 = trimmed_degree(&c1, TRIM_SAFE);
    let rmax = if d1 == 0 {
        0.0
    } else {
        let mono = cheb_to_monomial(&c1[..=d1]);
        real_roots(&align_monic(&mono))
            .iter()
            .map(|r| r.abs())
            .fold(0.0, f64::max)
            * rho_cap
    };
    let rho = rho_cap.min(1.5 * rmax).max(1.0);
    let (xs0, values0) = if (rho - rho_cap).abs() <= 1e-9 * rho_cap {
        (xs_cap, v_cap)
    } else {
        sample(rho, &mut det_at)?
    };
    let skip_above = ESCAPE_FACTOR * rho;
    // extraction ladder: fit the deflated residual, claim what is certified,
    // then zoom the radius down toward the unresolved inner structure
    let mut roots: Vec<f64> = Vec::with_capacity(expected_degree);
    let mut rho_k = rho;
    let mut xs = xs0.clone();
    let mut values = values0.clone();
    while roots.len() < expected_degree {
        let remaining = expected_degree - roots.len();
        let q: Vec<Complex64> = xs
            .iter()
            .zip(values.iter())
            .map(|(&x, &v)| {
                let div: f64 = roots.iter().map(|r| x - r).product();
                v / div
            })
            .collect();
        if q.iter().any(|c| !c.is_finite()) {
            return Err(Error::NumericalInstability(
                "deflation hit a sample node coinciding with a root".into(),
            ));
        }
        let c = chebyshev_coeffs(&q);
        if c.iter().all(|x| x.norm() == 0.0) {
            return Err(Error::NumericalInstability(
                "determinant vanishes identically on the sampling interval".into(),
            ));
        }
        let trace = std::env::var("FIT_TRACE").is_ok();
        let fine = trimmed_degree(&c, TRIM_FULL);
        if trace {
            eprintln!(
                "[fit] rho_k={rho_k:.3e} remaining={remaining} fine={fine} coarse={} scale_q={:.3e}",
                trimmed_degree(&c, TRIM_SAFE),
                q.iter().map(|v| v.norm()).fold(0.0, f64::max)
            );
        }
        let deg = if fine == remaining {
            fine
        } else if fine > remaining {
            // honest mismatch unless everything above `remaining` is a flat
            // noise shelf well below the claimed leading coefficient
            let lead = c[remaining].norm();
            let shelf = c[remaining + 1..=fine]
                .iter()
                .map(|x| x.norm())
                .fold(0.0, f64::max);
            if lead > 0.0 && shelf <= SHELF_GAP * lead {
                remaining
            } else {
                return Err(Error::DegreeMismatch {
                    expected: expected_degree,
                    got: roots.len() + fine,
                });
            }
        } else {
            let coarse = trimmed_degree(&c, TRIM_SAFE);
            if coarse == 0 {
                // no confident signal left yet degree is still missing
                return Err(Error::DegreeMismatch {
                    expected: expected_degree,
                    got: roots.len() + fine,
                });
            }
            coarse
        };
        let factor = &c[..=deg];
        check_phase_coherence(factor)?;
        let mono = cheb_to_monomial(factor);
        let mut batch: Vec<f64> = real_roots(&align_monic(&mono))
            .iter()
            .map(|s| s * rho_k)
            .collect();
        batch.sort_by(f64::total_cmp);
        // Certified-keep rule: a noise-floor perturbation of the fit moves a
        // cluster of m roots by the m-th root of
        //   noise · basis growth / (|lead| · ∏ distances to the other roots)
        // (worst case — the noise polynomial aligned with the top basis
        // element). A cluster is claimed once that bound puts it inside its
        // Newton basin (polish then supplies the precision), or at absolute
        // clustering resolution, or — past Newton reach — at the relative
        // resolution escapes need. A partial (deflation) factor claims
        // nothing inside the interval, since its low coefficients still hide
        // unmodeled signal.
        let scale_q = q.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let shelf_noise = if fine + 1 < c.len() {
            c[fine + 1..].iter().map(|x| x.norm()).fold(0.0, f64::max)
        } else {
            0.0
        };
        let noise = (FIT_NOISE_REL * scale_q).max(shelf_noise);
        let jq = (0..nodes)
            .max_by(|&a, &b| q[a].norm().partial_cmp(&q[b].norm()).unwrap())
            .unwrap();
        let lead = q[jq].norm() / batch.iter().map(|r| (xs[jq] - r).abs()).product::<f64>();
        let ranges = coincident_ranges(&batch);
        let centers: Vec<f64> = ranges
            .iter()
            .map(|&(s, e)| batch[s..e].iter().sum::<f64>() / (e - s) as f64)
            .collect();
        let mut keep_flags = vec![false; ranges.len()];
        if lead.is_finite() && lead > 0.0 {
            for (idx, &(s, e)) in ranges.iter().enumerate() {
                let m = (e - s) as f64;
                let center = centers[idx];
                if deg < remaining && center.abs() < rho_k {
                    continue;
                }
                let others: f64 = batch[..s]
                    .iter()
                    .chain(batch[e..].iter())
                    .map(|r| (center - r).abs())
                    .product();
                let growth = (2.0 * center.abs() / rho_k).max(1.0).powf(deg as f64);
                let err = (noise * growth / (lead * others)).powf(1.0 / m);
                // isolation gap: nearest other fitted cluster or already
                // claimed root, so the polish cannot drift onto a neighbor
                let gap = centers
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != idx)
                    .map(|(_, &c)| (c - center).abs())
                    .chain(roots.iter().map(|r| (r - center).abs()))
                    .fold(f64::INFINITY, f64::min)
                    .min(2.0 * rho_k);
                let mut tol = 0.5 * COINCIDENT_REL * (1.0 + center.abs());
                if center.abs() > skip_above {
                    tol = tol.max(ESCAPE_KEEP_REL * center.abs());
                } else {
                    tol = tol.max(BASIN_FRAC * gap);
                }
                if trace {
                    eprintln!(
                        "[fit]   cluster@{center:.6e} m={m} err={err:.3e} tol={tol:.3e} keep={}",
                        err.is_finite() && err <= tol
                    );
                }
                keep_flags[idx] = err.is_finite() && err <= tol;
            }
        }
        let mut kept: Vec<f64> = ranges
            .iter()
            .zip(&keep_flags)
            .filter(|(_, &f)| f)
            .flat_map(|(&(s, e), _)| batch[s..e].iter().copied())
            .collect();
        // zoom target: a quarter of the radius, but never below unclaimed
        // interior structure — roots must stay inside the interval until
        // they are claimed
        let unclaimed_interior = centers
            .iter()
            .zip(&keep_flags)
            .filter(|(c, &f)| !f && c.abs() <= rho_k)
            .map(|(c, _)| c.abs())
            .fold(0.0, f64::max);
        let rho_next = (0.25 * rho_k)
            .max((1.1 * unclaimed_interior).min(0.5 * rho_k))
            .max(RHO_FLOOR)
            .min(rho_k);
        if kept.is_empty() {
            if rho_next < rho_k {
                rho_k = rho_next;
                let fresh = sample(rho_k, &mut det_at)?;
                xs = fresh.0;
                values = fresh.1;
                continue;
            }
            // nothing certifies and the radius cannot move: claim the whole
            // factor and let the polish and the later degree/multiplicity
            // checks arbitrate
            if trace {
                eprintln!("[fit]   stalled at rho_k={rho_k:.3e}; claiming full factor");
            }
            kept = batch;
        }
        polish_roots(&mut kept, skip_above, &mut det_at)?;
        roots.extend(kept);
        roots.sort_by(f64::total_cmp);
        if roots.len() == expected_degree {
            break;
        }
        if rho_next < rho_k {
            rho_k = rho_next;
            let fresh = sample(rho_k, &mut det_at)?;
            xs = fresh.0;
            values = fresh.1;
        }
    }
    roots.sort_by(f64::total_cmp);
    let monic = poly_from_roots(&roots);
    // overall complex scale for the display coefficients, matched at the
    // most trustworthy first-round sample
    let jbest = (0..nodes)
        .max_by(|&a, &b| values0[a].norm().partial_cmp(&values0[b].norm()).unwrap())
        .unwrap();
    let denom = eval_poly(&monic, xs0[jbest]);
    let scale = if denom == 0.0 {
        Complex64::ONE
    } else {
        values0[jbest] / denom
    };
    let coeffs = monic.iter().map(|&m| scale * m).collect();
    Ok(ScalarPoly { coeffs, monic })
}

/// Characteristic polynomial `Γ(λ) = det(A Φ(λ) + B Ψ(λ))`, interpolated
/// from Chebyshev samples. The trimmed degree must equal `count_formula`.
pub fn char_poly(eq: &SLEquation, bc: &BoundaryRaw, tols: &Tolerances) -> Result<ScalarPoly> {
    if eq.d() != bc.d() {
        return Err(Error::Validation(format!(
            "equation has d = {}, boundary condition has d = {}",
            eq.d(),
            bc.d()
        )));
    }
    let expected = count_formula(eq, bc, tols)?;
    let rho = sample_radius(eq, tols)?;
    let nodes = eq.n() * eq.d() + 1;
    fit_determinant(rho, nodes, expected, |x| gamma_at(eq, bc, x))
}

/// Assemble the `(N+2)d` linear pencil `L_0 + λ L_1` over the unknowns
/// `(y_0, …, y_{N+1})`: one block row per equation index plus `2d` boundary
/// rows with `P_0 Δy_0 = P_0(y_1 - y_0)`, `P_N Δy_N = P_N(y_{N+1} - y_N)`.
pub fn pencil(eq: &SLEquation, bc: &BoundaryRaw) -> Result<(CMatrix, CMatrix)> {
    let d = eq.d();
    let n = eq.n();
    let size = (n + 2) * d;
    let mut l0 = CMatrix::zeros(size, size);
    let mut l1 = CMatrix::zeros(size, size);
    let p: Vec<CMatrix> = (0..=n).map(|j| eq.p(j)).collect::<Result<_>>()?;
    for i in 1..=n {
        let row = (i - 1) * d;
        l0.set_block(row, (i - 1) * d, &(-&p[i - 1]));
        let center = &(&p[i] + &p[i - 1]) + eq.q(i);
        l0.set_block(row, i * d, &center);
        l0.set_block(row, (i + 1) * d, &(-&p[i]));
        l1.set_block(row, i * d, &(-eq.w(i)));
    }
    let row = n * d;
    let b1p0 = &bc.b1() * &p[0];
    let b2pn = &bc.b2() * &p[n];
    l0.set_block(row, 0, &(&(-&bc.a1()) - &b1p0));
    l0.set_block(row, d, &b1p0);
    l0.set_block(row, n * d, &(&bc.a2() - &b2pn));
    l0.set_block(row, (n + 1) * d, &b2pn);
    Ok((l0, l1))
}

/// Independent spectral route: root the determinant of the full pencil.
/// Shares no code path with `char_poly` beyond the generic fit and rooter.
pub fn pencil_oracle(eq: &SLEquation, bc: &BoundaryRaw, tols: &Tolerances) -> Result<Spectrum> {
    let expected = count_formula(eq, bc, tols)?;
    let rho = sample_radius(eq, tols)?;
    let nodes = (eq.n() + 2) * eq.d() + 1;
    let (l0, l1) = pencil(eq, bc)?;
    let poly = fit_determinant(rho, nodes, expected, |x| {
        Ok(numkernel::det(&(&l0 + &l1.scale(x))))
    })?;
    let roots = real_roots(poly.monic_real());
    Spectrum::new(cluster_roots(&roots, tols))
}

/// Pencil at `λ` with every row scaled to unit norm. Row scaling preserves
/// the kernel exactly while removing the λ-growth of `σ_max`, which would
/// otherwise absorb genuinely independent rows into a λ-relative threshold.
fn equilibrated_at(l0: &CMatrix, l1: &CMatrix, lambda: f64) -> CMatrix {
    let mut m = l0 + &l1.scale(lambda);
    for i in 0..m.rows() {
        let norm = (0..m.cols())
            .map(|j| m[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            for j in 0..m.cols() {
                m[(i, j)] /= norm;
            }
        }
    }
    m
}

/// Geometric multiplicity of `λ` against the row-equilibrated pencil. A
/// merged cluster is tested at its own resolution — the kernel threshold
/// widens to half the clustering tolerance, since members of a legitimate
/// merge may sit anywhere inside that window. Roots past `skip_above` are
/// reported at their analytic multiplicity: out there the root location
/// error and the pencil's own parameter-scale near-degeneracies overlap, so
/// the kernel test carries no information (the count identity already pins
/// how many roots escape).
fn verified_multiplicity(
    l0: &CMatrix,
    l1: &CMatrix,
    lambda: f64,
    mult: usize,
    skip_above: f64,
    tols: &Tolerances,
) -> Result<usize> {
    if lambda.abs() > skip_above {
        return Ok(mult);
    }
    let m = equilibrated_at(l0, l1, lambda);
    let sv = numkernel::singular_values(&m, tols)?;
    let smax = sv.last().copied().unwrap_or(0.0).max(1.0);
    let tau_rel = if mult >= 2 {
        tols.rank_tol.max(0.5 * tols.root_cluster_tol)
    } else {
        tols.rank_tol
    };
    Ok(sv.iter().filter(|&&s| s <= tau_rel * smax).count())
}

/// Spectrum with multiplicities. Roots the characteristic polynomial and
/// cross-checks every clustered multiplicity against the geometric kernel
/// dimension of the pencil; analytic and geometric multiplicities must agree
/// for a self-adjoint problem.
pub fn eigenvalues(eq: &SLEquation, bc: &BoundaryCondition, tols: &Tolerances) -> Result<Spectrum> {
    let raw = bc.to_raw(tols)?;
    let poly = char_poly(eq, &raw, tols)?;
    let roots = real_roots(poly.monic_real());
    let clusters = cluster_roots(&roots, tols);
    let (l0, l1) = pencil(eq, &raw)?;
    // mirror the fit's working radius so "escaped" means the same thing here
    let rho_cap = sample_radius(eq, tols)?;
    let rmax = clusters.iter().map(|c| c.0.abs()).fold(0.0, f64::max);
    let skip_above = ESCAPE_FACTOR * rho_cap.min(1.5 * rmax).max(1.0);
    for &(lambda, mult) in &clusters {
        let geometric = verified_multiplicity(&l0, &l1, lambda, mult, skip_above, tols)?;
        if geometric != mult {
            return Err(Error::MultiplicityMismatch {
                lambda,
                analytic: mult,
                geometric,
            });
        }
    }
    Spectrum::new(clusters)
}

/// Normalized eigenfunction for a simple eigenvalue `λ`: the kernel vector
/// of `L_0 + λ L_1` with `Σ_{i=1}^N y_i* W_i y_i = 1` and the
/// largest-magnitude entry made real positive.
pub fn eigenfunction(
    eq: &SLEquation,
    bc: &BoundaryRaw,
    lambda: f64,
    tols: &Tolerances,
) -> Result<EigenFunction> {
    let d = eq.d();
    let n = eq.n();
    let (l0, l1) = pencil(eq, bc)?;
    let at = equilibrated_at(&l0, &l1, lambda);
    let ns = numkernel::nullspace(&at, tols)?;
    if ns.cols() == 0 {
        return Err(Error::NotAnEigenvalue(lambda));
    }
    if ns.cols() > 1 {
        return Err(Error::DegenerateEigenvalue(lambda));
    }
    let mut v = ns.column(0);
    // W-normalization over the interior nodes
    let mut norm2 = 0.0;
    for i in 1..=n {
        let yi = v.block(i * d, 0, d, 1);
        norm2 += (&(&yi.adjoint() * eq.w(i)) * &yi)[(0, 0)].re;
    }
    if norm2 <= 0.0 {
        return Err(Error::NumericalInstability(format!(
            "kernel vector at λ = {lambda} has vanishing weighted norm"
        )));
    }
    v = v.scale(1.0 / norm2.sqrt());
    // deterministic phase: first entry of largest magnitude becomes real > 0
    let mut best = 0usize;
    for k in 1..v.rows() {
        if v[(k, 0)].norm() > v[(best, 0)].norm() {
            best = k;
        }
    }
    let e = v[(best, 0)];
    v = v.scale_c(e.conj() / e.norm());
    let y: Vec<CMatrix> = (0..=n + 1).map(|i| v.block(i * d, 0, d, 1)).collect();
    let p0 = eq.p(0)?;
    let pn = eq.p(n)?;
    let boundary = CMatrix::vstack(&[
        &(-&y[0]),
        &y[n],
        &(&p0 * &(&y[1] - &y[0])),
        &(&pn * &(&y[n + 1] - &y[n])),
    ]);
    Ok(EigenFunction {
        lambda,
        y,
        boundary,
    })
}

fn eval_poly(c: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for a in c.iter().rev() {
        acc = acc * x + a;
    }
    acc
}

/// All roots of a monic real-rooted polynomial, ascending with multiplicity.
///
/// Rolle interlacing: the sorted roots `r'_1 ≤ … ≤ r'_{n-1}` of the
/// derivative bracket the roots of `p` as `root_i ∈ [r'_{i-1}, r'_i]` with
/// the Cauchy bound closing the outer brackets, so exactly `n` intervals are
/// searched and exactly `n` roots returned — multiple roots surface as
/// coinciding interval endpoints, never through a magnitude threshold.
pub fn real_roots(monic: &[f64]) -> Vec<f64> {
    let n = monic.len() - 1;
    if n == 0 {
        return vec![];
    }
    if n == 1 {
        return vec![-monic[0]];
    }
    let deriv: Vec<f64> = (1..=n).map(|k| monic[k] * k as f64 / n as f64).collect();
    let droots = real_roots(&deriv);
    let bound = 1.0 + monic[..n].iter().map(|a| a.abs()).fold(0.0, f64::max);
    let mut cuts = Vec::with_capacity(n + 1);
    cuts.push(-bound);
    cuts.extend(droots.iter().map(|r| r.clamp(-bound, bound)));
    cuts.push(bound);
    let mut roots: Vec<f64> = cuts.windows(2).map(|w| root_in_interval(monic, w[0], w[1])).collect();
    roots.sort_by(f64::total_cmp);
    roots
}

fn root_in_interval(p: &[f64], lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    let plo = eval_poly(p, lo);
    if plo == 0.0 {
        return lo;
    }
    let phi = eval_poly(p, hi);
    if phi == 0.0 {
        return hi;
    }
    if plo.signum() == phi.signum() {
        // multiple root pinned at an interval endpoint
        return if plo.abs() <= phi.abs() { lo } else { hi };
    }
    let slo = plo.signum();
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let pm = eval_poly(p, mid);
        if pm == 0.0 {
            return mid;
        }
        if pm.signum() == slo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if eval_poly(p, lo).abs() <= eval_poly(p, hi).abs() {
        lo
    } else {
        hi
    }
}

/// Merge ascending roots whose consecutive gap stays within
/// `root_cluster_tol * (1 + |λ|)`; the representative is the cluster mean.
pub fn cluster_roots(roots: &[f64], tols: &Tolerances) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < roots.len() {
        let mut j = i + 1;
        while j < roots.len() {
            let gap = roots[j] - roots[j - 1];
            let scale = 1.0 + roots[j].abs().max(roots[j - 1].abs());
            if gap <= tols.root_cluster_tol * scale {
                j += 1;
            } else {
                break;
            }
        }
        let mean = roots[i..j].iter().sum::<f64>() / (j - i) as f64;
        out.push((mean, j - i));
        i = j;
    }
    out
}
