//! Perturbation analysis: eigenvalue derivatives along coefficient and
//! boundary-condition directions, one-parameter paths out of singular
//! points, branch tracing, and jump experiments that compare the observed
//! asymptotics against the inertia-based prediction.

use num_complex::Complex64;

use crate::atkinson;
use crate::classify::{self, JumpPrediction, Space};
use crate::error::{Error, Result};
use crate::numkernel::{self, CMatrix, InertiaSignature, Tolerances};
use crate::problem::{build_ek, chart_to_raw, BoundaryChart, BoundaryCondition, BoundaryRaw, SLEquation};
use crate::spectrum::{self, EigenFunction, Spectrum};

/// One-parameter family of problems sampled on a geometric ladder
/// `t_max · 2^{-k}`, `k = 0..=k_steps`, approaching a limit at `t = 0`.
pub struct ParamPath {
    ts: Vec<f64>,
    gen: Box<dyn Fn(f64) -> Result<(SLEquation, BoundaryCondition)>>,
}

impl ParamPath {
    pub const DEFAULT_T_MAX: f64 = 0.25;
    pub const DEFAULT_K_STEPS: usize = 20;

    pub fn new(
        t_max: f64,
        k_steps: usize,
        gen: impl Fn(f64) -> Result<(SLEquation, BoundaryCondition)> + 'static,
    ) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::Validation(format!(
                "path extent t_max must be a positive number, got {t_max}"
            )));
        }
        let ts = (0..=k_steps)
            .map(|k| t_max * 0.5f64.powi(k as i32))
            .collect();
        Ok(ParamPath {
            ts,
            gen: Box::new(gen),
        })
    }

    /// Ladder parameters, largest first; `t = 0` is not included.
    pub fn samples(&self) -> &[f64] {
        &self.ts
    }

    pub fn at(&self, t: f64) -> Result<(SLEquation, BoundaryCondition)> {
        (self.gen)(t)
    }

    pub fn endpoint(&self) -> Result<(SLEquation, BoundaryCondition)> {
        (self.gen)(0.0)
    }
}

/// Hermitian direction supported on the numerical kernel of a classifier:
/// `Σ v v*` over the first `plus` kernel eigenvectors minus the same over
/// the next `minus` of them.  The kernel is read with the same threshold the
/// inertia uses, so the direction is consistent with the reported signature.
pub(crate) fn kernel_direction(
    classifier: &CMatrix,
    plus: usize,
    minus: usize,
    tols: &Tolerances,
) -> Result<CMatrix> {
    let (vals, vecs) = numkernel::herm_eig(classifier, tols)?;
    let scale = vals.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let tau = tols.rank_tol * scale.max(1.0);
    let kernel: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].abs() <= tau).collect();
    if kernel.len() < plus + minus {
        return Err(Error::IncompatibleSignatures(format!(
            "kernel of order {} cannot absorb {plus} positive and {minus} negative directions",
            kernel.len()
        )));
    }
    let m = classifier.rows();
    let mut delta = CMatrix::zeros(m, m);
    for (pos, &col) in kernel.iter().enumerate().take(plus + minus) {
        let sign = if pos < plus { 1.0 } else { -1.0 };
        let v = vecs.column(col);
        delta = &delta + &(&v * &v.adjoint()).scale(sign);
    }
    Ok(delta)
}

fn check_direction(label: &str, m: &CMatrix, d: usize, tols: &Tolerances) -> Result<()> {
    if m.rows() != d || m.cols() != d {
        return Err(Error::Validation(format!(
            "{label} direction must be {d}x{d}, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_hermitian(tols.herm_tol) {
        return Err(Error::NotHermitian(format!("{label} direction")));
    }
    Ok(())
}

/// Derivative of a simple eigenvalue under a joint coefficient perturbation
/// `P_i⁻¹(t) = P_i⁻¹ + t H_i`, `Q_i(t) = Q_i + t K_i`, `W_i(t) = W_i + t L_i`
/// with a fixed boundary condition:
///
/// `λ'(0) = −Σ_{i<N} (P_i Δy_i)* H_i (P_i Δy_i) + Σ y_i* K_i y_i − λ Σ y_i* L_i y_i`.
///
/// Note the leading directions move the *inverse* coefficient.  `h` must
/// still list `N + 1` of them to match the coefficient layout, but the last
/// one never contributes: the right-end momentum `P_N Δy_N` is boundary
/// data, so the spectrum does not see `P_N` itself.
pub fn d_lambda_eq(
    eq: &SLEquation,
    bc: &BoundaryRaw,
    lambda_star: f64,
    h: &[CMatrix],
    kdir: &[CMatrix],
    ldir: &[CMatrix],
    tols: &Tolerances,
) -> Result<f64> {
    let n = eq.n();
    let d = eq.d();
    if h.len() != n + 1 || kdir.len() != n || ldir.len() != n {
        return Err(Error::Validation(format!(
            "expected {} leading, {n} potential and {n} weight directions; got {}, {}, {}",
            n + 1,
            h.len(),
            kdir.len(),
            ldir.len()
        )));
    }
    for (label, list) in [("leading", h), ("potential", kdir), ("weight", ldir)] {
        for m in list {
            check_direction(label, m, d, tols)?;
        }
    }
    let ef = spectrum::eigenfunction(eq, bc, lambda_star, tols)?;
    let mut total = 0.0;
    for i in 0..n {
        let p = eq.p(i)?;
        let v = &p * &(ef.y(i + 1) - ef.y(i));
        total -= (&(&v.adjoint() * &h[i]) * &v)[(0, 0)].re;
    }
    for i in 1..=n {
        let yi = ef.y(i);
        total += (&(&yi.adjoint() * &kdir[i - 1]) * yi)[(0, 0)].re;
        total -= lambda_star * (&(&yi.adjoint() * &ldir[i - 1]) * yi)[(0, 0)].re;
    }
    Ok(total)
}

/// Derivative of a simple eigenvalue when the chart parameter moves along
/// `S(t) = S + t H`: `λ'(0) = (E_{K,1} Y)* H (E_{K,1} Y)` with `Y` the
/// boundary data vector of the normalized eigenfunction.  Positive
/// semidefinite `H` therefore never pushes an eigenvalue down.
pub fn d_lambda_bc(
    eq: &SLEquation,
    chart: &BoundaryChart,
    lambda_star: f64,
    h: &CMatrix,
    tols: &Tolerances,
) -> Result<f64> {
    let d = chart.d();
    check_direction("chart", h, 2 * d, tols)?;
    let raw = chart_to_raw(chart, tols)?;
    let ef = spectrum::eigenfunction(eq, &raw, lambda_star, tols)?;
    let ek1 = build_ek(d, chart.k())?.top();
    let v = &ek1 * ef.boundary();
    Ok((&(&v.adjoint() * h) * &v)[(0, 0)].re)
}

/// Same chart derivative for an Atkinson problem that has already been
/// reduced to its discrete form.  The boundary data vector swaps the left
/// endpoint value for the first mass-interval one, matching the reduction's
/// change of variables.
pub fn d_lambda_bc_atkinson(
    eq_transformed: &SLEquation,
    chart: &BoundaryChart,
    lambda_star: f64,
    h: &CMatrix,
    tols: &Tolerances,
) -> Result<f64> {
    let d = chart.d();
    check_direction("chart", h, 2 * d, tols)?;
    let raw = chart_to_raw(chart, tols)?;
    let c = atkinson::bc_transform(&raw, tols)?;
    let ef = spectrum::eigenfunction(eq_transformed, &c, lambda_star, tols)?;
    let np = eq_transformed.n();
    let z = CMatrix::vstack(&[
        &-ef.y(1),
        ef.y(np),
        &(ef.y(1) - ef.y(0)),
        &(ef.y(np + 1) - ef.y(np)),
    ]);
    let ek1 = build_ek(d, chart.k())?.top();
    let v = &ek1 * &z;
    Ok((&(&v.adjoint() * h) * &v)[(0, 0)].re)
}

/// Straight-line path out of a singular point of the boundary-condition
/// space.  `target` is the signature the path should carry for `t > 0`; it
/// must be reachable from the singular signature, and only the entries of
/// `S` seen by the classifier (`{1..d} ∪ K₂`) are moved.
pub fn make_bc_path(
    eq: &SLEquation,
    chart_at_singular: &BoundaryChart,
    target: InertiaSignature,
    t_max: f64,
    k_steps: usize,
    tols: &Tolerances,
) -> Result<ParamPath> {
    let classifier = classify::bc_classifier(eq, chart_at_singular, tols)?;
    let sig1 = numkernel::inertia(&classifier, tols)?;
    classify::predict_jump(target, sig1, Space::BoundaryCondition)?;
    let delta = kernel_direction(
        &classifier,
        target.r_plus - sig1.r_plus,
        target.r_minus - sig1.r_minus,
        tols,
    )?;
    let d = chart_at_singular.d();
    let mut idx: Vec<usize> = (1..=d).collect();
    idx.extend(chart_at_singular.k2());
    let eq = eq.clone();
    let chart = chart_at_singular.clone();
    let tols = *tols;
    ParamPath::new(t_max, k_steps, move |t| {
        let mut s = chart.s().clone();
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                s[(ia - 1, ib - 1)] += delta[(a, b)] * t;
            }
        }
        Ok((
            eq.clone(),
            BoundaryCondition::Chart(chart.with_s(s, &tols)?),
        ))
    })
}

/// Straight-line path out of a singular point of the equation space: the
/// boundary condition stays fixed on a nondegenerate chart while `P₀⁻¹`
/// moves along the kernel of the equation-space classifier.
pub fn make_eq_path(
    eq_at_singular: &SLEquation,
    chart: &BoundaryChart,
    target: InertiaSignature,
    t_max: f64,
    k_steps: usize,
    tols: &Tolerances,
) -> Result<ParamPath> {
    let classifier = classify::eq_classifier(eq_at_singular, chart, tols)?;
    let sig1 = numkernel::inertia(&classifier, tols)?;
    classify::predict_jump(target, sig1, Space::Equation)?;
    let delta = kernel_direction(
        &classifier,
        target.r_plus - sig1.r_plus,
        target.r_minus - sig1.r_minus,
        tols,
    )?;
    let eq = eq_at_singular.clone();
    let bc = BoundaryCondition::Chart(chart.clone());
    let tols = *tols;
    ParamPath::new(t_max, k_steps, move |t| {
        let pinv0 = &eq.pinv(0).clone() + &delta.scale(t);
        let moved = eq
            .with_pinv(0, pinv0, &tols)
            .map_err(|_| Error::LostInvertibility(t))?;
        Ok((moved, bc.clone()))
    })
}

/// Eigenvalue branches along a path: `branch(n)` is the `n`-th smallest
/// eigenvalue (with multiplicity) at each ladder parameter, largest `t`
/// first.  The total count must not change along the way.
pub struct BranchTrace {
    ts: Vec<f64>,
    spectra: Vec<Spectrum>,
    branches: Vec<Vec<f64>>,
}

impl BranchTrace {
    pub fn ts(&self) -> &[f64] {
        &self.ts
    }

    pub fn spectra(&self) -> &[Spectrum] {
        &self.spectra
    }

    pub fn count(&self) -> usize {
        self.branches.len()
    }

    /// 1-based branch index.
    pub fn branch(&self, n: usize) -> &[f64] {
        &self.branches[n - 1]
    }

    /// Flags per branch: never decreases as `t` grows, within `slack`.
    /// The ladder is stored largest `t` first, so this checks successive
    /// samples never rise.
    pub fn nondecreasing_in_t(&self, slack: f64) -> Vec<bool> {
        self.branches
            .iter()
            .map(|b| b.windows(2).all(|w| w[1] <= w[0] + slack))
            .collect()
    }

    pub fn nonincreasing_in_t(&self, slack: f64) -> Vec<bool> {
        self.branches
            .iter()
            .map(|b| b.windows(2).all(|w| w[1] >= w[0] - slack))
            .collect()
    }
}

pub fn branch_trace(path: &ParamPath, tols: &Tolerances) -> Result<BranchTrace> {
    let mut spectra: Vec<Spectrum> = Vec::with_capacity(path.samples().len());
    for &t in path.samples() {
        let (eq, bc) = path.at(t)?;
        let spec = spectrum::eigenvalues(&eq, &bc, tols)?;
        if let Some(first) = spectra.first() {
            if spec.total() != first.total() {
                return Err(Error::CountChangedAlongPath(format!(
                    "{} eigenvalues at t = {t} but {} at t = {}",
                    spec.total(),
                    first.total(),
                    path.samples()[0]
                )));
            }
        }
        spectra.push(spec);
    }
    let count = spectra.first().map_or(0, |s| s.total());
    let branches = (0..count)
        .map(|n| spectra.iter().map(|s| s.flattened()[n]).collect())
        .collect();
    Ok(BranchTrace {
        ts: path.samples().to_vec(),
        spectra,
        branches,
    })
}

/// What a branch did as `t → 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchFate {
    DivergesDown,
    DivergesUp,
    /// Converged to the limit eigenvalue with this 1-based index.
    ConvergesTo(usize),
}

pub struct JumpReport {
    pub predicted: JumpPrediction,
    pub observed: JumpPrediction,
    pub pass: bool,
    pub fates: Vec<BranchFate>,
    pub trace: BranchTrace,
    pub endpoint: Spectrum,
}

/// Run a path to its limit and classify every branch.
///
/// A branch diverges down when its final sample sits below the negative
/// divergence threshold and it was strictly decreasing over the last five
/// ladder steps (symmetrically for up); a middle branch converges when its
/// final sample agrees with the shifted limit eigenvalue to `1e-4` relative
/// accuracy.  Anything else is inconclusive, reported with the 1-based
/// branch index.
pub fn jump_experiment(
    path: &ParamPath,
    prediction: JumpPrediction,
    tols: &Tolerances,
) -> Result<JumpReport> {
    let trace = branch_trace(path, tols)?;
    let (eq0, bc0) = path.endpoint()?;
    let endpoint = spectrum::eigenvalues(&eq0, &bc0, tols)?;
    let end_vals = endpoint.flattened();
    let count = trace.count();
    let steps = trace.ts().len();
    let window = 5.min(steps.saturating_sub(1));

    let mut flags: Vec<Option<BranchFate>> = Vec::with_capacity(count);
    for n in 1..=count {
        let b = trace.branch(n);
        let last = b[steps - 1];
        let tail = &b[steps - 1 - window..];
        let decreasing = tail.windows(2).all(|w| w[1] < w[0]);
        let increasing = tail.windows(2).all(|w| w[1] > w[0]);
        flags.push(if last < -tols.divergence_threshold && decreasing {
            Some(BranchFate::DivergesDown)
        } else if last > tols.divergence_threshold && increasing {
            Some(BranchFate::DivergesUp)
        } else {
            None
        });
    }
    let n_down = flags
        .iter()
        .take_while(|f| **f == Some(BranchFate::DivergesDown))
        .count();
    let n_up = flags
        .iter()
        .rev()
        .take_while(|f| **f == Some(BranchFate::DivergesUp))
        .count();

    let mut fates = Vec::with_capacity(count);
    for n in 0..count {
        if n < n_down {
            fates.push(BranchFate::DivergesDown);
        } else if n >= count - n_up {
            fates.push(BranchFate::DivergesUp);
        } else {
            // interior branches must all converge to limit eigenvalues
            if flags[n].is_some() {
                return Err(Error::Inconclusive { index: n + 1 });
            }
            let m = n - n_down;
            if m >= end_vals.len() {
                return Err(Error::Inconclusive { index: n + 1 });
            }
            let lm = end_vals[m];
            let b = trace.branch(n + 1);
            if (b[steps - 1] - lm).abs() >= 1e-4 * (1.0 + lm.abs()) {
                return Err(Error::Inconclusive { index: n + 1 });
            }
            fates.push(BranchFate::ConvergesTo(m + 1));
        }
    }
    if count - n_down - n_up != end_vals.len() {
        // unmatched limit eigenvalues: the ladder has not separated the
        // divergers from the survivors yet
        return Err(Error::Inconclusive { index: count });
    }
    let observed = JumpPrediction {
        n_down,
        n_up,
        index_shift: n_down,
    };
    Ok(JumpReport {
        predicted: prediction,
        observed,
        pass: observed == prediction,
        fates,
        trace,
        endpoint,
    })
}

/// Residual of the endpoint pairing shared by eigenfunctions of two
/// problems with the same boundary condition:
/// `(Δz_0)* P̃_0 y_0 − z_0* P_0 Δy_0 = (Δz_N)* P̃_N y_N − z_N* P_N Δy_N`,
/// where `y` solves the first problem and `z` the second.
pub fn boundary_form_residual(
    eq_y: &SLEquation,
    ef_y: &EigenFunction,
    eq_z: &SLEquation,
    ef_z: &EigenFunction,
) -> Result<f64> {
    let n = eq_y.n();
    if eq_z.n() != n || eq_z.d() != eq_y.d() {
        return Err(Error::Validation(
            "both problems must share one grid size and dimension".into(),
        ));
    }
    let form = |j: usize| -> Result<Complex64> {
        let py = eq_y.p(j)?;
        let pz = eq_z.p(j)?;
        let dy = ef_y.y(j + 1) - ef_y.y(j);
        let dz = ef_z.y(j + 1) - ef_z.y(j);
        let a = (&(&dz.adjoint() * &pz) * ef_y.y(j))[(0, 0)];
        let b = (&(&ef_z.y(j).adjoint() * &py) * &dy)[(0, 0)];
        Ok(a - b)
    };
    Ok((form(0)? - form(n)?).norm())
}
