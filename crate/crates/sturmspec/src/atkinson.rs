//! Problems of Atkinson type and their reduction to discrete form.
//!
//! An Atkinson-type problem lives on an interval split into `2N + 2` pieces
//! that alternate between mass-carrying intervals (where the weight and the
//! potential are supported and `P⁻¹` vanishes) and stiffness gaps (where only
//! `P⁻¹` is supported).  On such data the continuous Sturm-Liouville problem
//! collapses to a discrete one of size `N + 1`, which lets every spectral
//! question — counting, classification, jumps — reuse the discrete machinery.

use crate::classify::{self, BcAreaSignature, Space};
use crate::error::{Error, Result};
use crate::numkernel::{self, CMatrix, InertiaSignature, Tolerances};
use crate::perturb::{kernel_direction, ParamPath};
use crate::problem::{chart_to_raw, BoundaryChart, BoundaryCondition, BoundaryRaw, SLEquation};
use crate::spectrum::{self, Spectrum};

/// Integrated data of an Atkinson-type problem.
///
/// `partition` holds the `2N + 2` endpoints `a₀ < b₀ < a₁ < … < a_{N+1}`
/// alternating mass intervals `[aᵢ, bᵢ]` with gaps `(bᵢ, aᵢ₊₁)`.  `what[i]`
/// and `qhat[i]` are the integrals of the weight and potential over the
/// `i`-th mass interval (`0 ≤ i ≤ N`), `pinvhat[j]` the integral of `P⁻¹`
/// over the `j`-th gap (`1 ≤ j ≤ N`).
#[derive(Clone, Debug)]
pub struct AtkinsonProblem {
    d: usize,
    n: usize,
    partition: Vec<f64>,
    what: Vec<CMatrix>,
    qhat: Vec<CMatrix>,
    pinvhat: Vec<CMatrix>,
}

impl AtkinsonProblem {
    pub fn new(
        d: usize,
        partition: Vec<f64>,
        what: Vec<CMatrix>,
        qhat: Vec<CMatrix>,
        pinvhat: Vec<CMatrix>,
        tols: &Tolerances,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::Validation("dimension d must be positive".into()));
        }
        let n = pinvhat.len();
        if n < 2 {
            return Err(Error::Validation(format!(
                "an Atkinson problem needs at least 2 stiffness gaps, got {n}"
            )));
        }
        if what.len() != n + 1 || qhat.len() != n + 1 {
            return Err(Error::Validation(format!(
                "expected {} weight and potential blocks to go with {n} gaps; got {} and {}",
                n + 1,
                what.len(),
                qhat.len()
            )));
        }
        if partition.len() != 2 * n + 2 {
            return Err(Error::Validation(format!(
                "partition must list {} endpoints, got {}",
                2 * n + 2,
                partition.len()
            )));
        }
        if partition.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Validation(
                "partition endpoints must be strictly increasing".into(),
            ));
        }
        let check = |label: &str, list: &[CMatrix]| -> Result<()> {
            for (i, m) in list.iter().enumerate() {
                if m.rows() != d || m.cols() != d {
                    return Err(Error::Validation(format!(
                        "{label}[{i}] must be {d}x{d}, got {}x{}",
                        m.rows(),
                        m.cols()
                    )));
                }
                if !m.is_hermitian(tols.herm_tol) {
                    return Err(Error::NotHermitian(format!("{label}[{i}]")));
                }
            }
            Ok(())
        };
        check("What", &what)?;
        check("Qhat", &qhat)?;
        check("Pinvhat", &pinvhat)?;
        for (i, m) in what.iter().enumerate() {
            if !numkernel::is_positive_definite(m, tols)? {
                return Err(Error::Validation(format!(
                    "What[{i}] must be positive definite"
                )));
            }
        }
        for (j, m) in pinvhat.iter().enumerate() {
            if numkernel::num_rank(m, tols)? != d {
                return Err(Error::Validation(format!(
                    "Pinvhat[{}] must be invertible",
                    j + 1
                )));
            }
        }
        Ok(AtkinsonProblem {
            d,
            n,
            partition,
            what: what.iter().map(|m| m.hermitized()).collect(),
            qhat: qhat.iter().map(|m| m.hermitized()).collect(),
            pinvhat: pinvhat.iter().map(|m| m.hermitized()).collect(),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn partition(&self) -> &[f64] {
        &self.partition
    }

    /// Mass interval `[aᵢ, bᵢ]`, `0 ≤ i ≤ n`.
    pub fn mass_interval(&self, i: usize) -> (f64, f64) {
        (self.partition[2 * i], self.partition[2 * i + 1])
    }

    /// Stiffness gap `(b_{j−1}, a_j)`, `1 ≤ j ≤ n`.
    pub fn gap(&self, j: usize) -> (f64, f64) {
        (self.partition[2 * j - 1], self.partition[2 * j])
    }

    pub fn what(&self, i: usize) -> &CMatrix {
        &self.what[i]
    }

    pub fn qhat(&self, i: usize) -> &CMatrix {
        &self.qhat[i]
    }

    /// 1-based like the gaps.
    pub fn pinvhat(&self, j: usize) -> &CMatrix {
        &self.pinvhat[j - 1]
    }

    pub fn with_what(&self, i: usize, m: CMatrix, tols: &Tolerances) -> Result<Self> {
        let mut what = self.what.clone();
        what[i] = m;
        AtkinsonProblem::new(
            self.d,
            self.partition.clone(),
            what,
            self.qhat.clone(),
            self.pinvhat.clone(),
            tols,
        )
    }

    pub fn with_qhat(&self, i: usize, m: CMatrix, tols: &Tolerances) -> Result<Self> {
        let mut qhat = self.qhat.clone();
        qhat[i] = m;
        AtkinsonProblem::new(
            self.d,
            self.partition.clone(),
            self.what.clone(),
            qhat,
            self.pinvhat.clone(),
            tols,
        )
    }
}

/// Discrete problem equivalent to an Atkinson-type one.
///
/// The reduced problem has `N + 1` interior nodes; its outermost leading
/// coefficients are identity placeholders (the spectrum never sees them
/// because the reduction pins the solution slopes outside the gaps).
pub fn to_discrete(ap: &AtkinsonProblem, tols: &Tolerances) -> Result<SLEquation> {
    let id = CMatrix::identity(ap.d());
    let mut pinv = Vec::with_capacity(ap.n + 2);
    pinv.push(id.clone());
    pinv.extend(ap.pinvhat.iter().cloned());
    pinv.push(id);
    SLEquation::new(
        ap.d,
        ap.n + 1,
        pinv,
        ap.qhat.clone(),
        ap.what.clone(),
        tols,
    )
}

/// Boundary condition for the reduced problem.
///
/// A self-adjoint condition `A u + B (P u')|∂ = 0` on the Atkinson problem
/// becomes `A y + C (P Δy)|∂ = 0` on the discrete one with
/// `C = (B₁ − A₁ | B₂)`; self-adjointness is preserved because the column
/// shear leaves `A B* − B A*` unchanged.
pub fn bc_transform(bc: &BoundaryRaw, tols: &Tolerances) -> Result<BoundaryRaw> {
    let b1 = &bc.b1() - &bc.a1();
    let b2 = bc.b2();
    BoundaryRaw::new(bc.a().clone(), CMatrix::hstack(&[&b1, &b2]), tols)
}

/// Number of eigenvalues of the Atkinson problem: `(N − 1)d + rank B`.
pub fn atkinson_count(ap: &AtkinsonProblem, bc: &BoundaryRaw, tols: &Tolerances) -> Result<usize> {
    Ok((ap.n - 1) * ap.d + numkernel::num_rank(bc.b(), tols)?)
}

pub fn atkinson_spectrum(
    ap: &AtkinsonProblem,
    bc: &BoundaryRaw,
    tols: &Tolerances,
) -> Result<Spectrum> {
    let eq = to_discrete(ap, tols)?;
    let c = bc_transform(bc, tols)?;
    spectrum::eigenvalues(&eq, &BoundaryCondition::Raw(c), tols)
}

/// Singularity data of a chart point in the Atkinson boundary-condition
/// space.  The layer is the rank drop of `B`; the area is read off the
/// inertia of the principal submatrix of `S` on `K`, so `K = ∅` (the single
/// point of the zeroth layer) has no area label and is rejected.
pub fn atkinson_classify(chart: &BoundaryChart, tols: &Tolerances) -> Result<BcAreaSignature> {
    let classifier = classify::atkinson_classifier(chart)?;
    let inertia = numkernel::inertia(&classifier, tols)?;
    let raw = chart_to_raw(chart, tols)?;
    let layer = 2 * chart.d() - numkernel::num_rank(raw.b(), tols)?;
    Ok(BcAreaSignature {
        k: chart.k().to_vec(),
        inertia,
        layer,
    })
}

/// Straight-line path out of a singular Atkinson boundary condition that
/// realizes a jump from `target` (at `t > 0`) into the signature of
/// `chart_at_singular` (at `t = 0`).  Entries of `S` outside `K × K` stay
/// fixed; on `K × K` the kernel of the classifier absorbs `±t`.
pub fn make_atkinson_bc_path(
    ap: &AtkinsonProblem,
    chart_at_singular: &BoundaryChart,
    target: InertiaSignature,
    t_max: f64,
    k_steps: usize,
    tols: &Tolerances,
) -> Result<ParamPath> {
    let classifier = classify::atkinson_classifier(chart_at_singular)?;
    let sig1 = numkernel::inertia(&classifier, tols)?;
    classify::predict_jump(target, sig1, Space::Atkinson)?;
    let delta = kernel_direction(
        &classifier,
        target.r_plus - sig1.r_plus,
        target.r_minus - sig1.r_minus,
        tols,
    )?;
    let eq = to_discrete(ap, tols)?;
    let chart = chart_at_singular.clone();
    let k: Vec<usize> = chart.k().to_vec();
    let tols = *tols;
    ParamPath::new(t_max, k_steps, move |t| {
        let mut s = chart.s().clone();
        for (a, &ka) in k.iter().enumerate() {
            for (b, &kb) in k.iter().enumerate() {
                s[(ka - 1, kb - 1)] += delta[(a, b)] * t;
            }
        }
        let raw = chart_to_raw(&chart.with_s(s, &tols)?, &tols)?;
        Ok((eq.clone(), BoundaryCondition::Raw(bc_transform(&raw, &tols)?)))
    })
}

/// Matrix-valued step function on a mesh, zero outside of it.
#[derive(Clone, Debug)]
pub struct PiecewiseConstant {
    breaks: Vec<f64>,
    values: Vec<CMatrix>,
}

impl PiecewiseConstant {
    pub fn new(breaks: Vec<f64>, values: Vec<CMatrix>) -> Result<Self> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::Validation(format!(
                "need one more breakpoint than pieces; got {} breakpoints, {} pieces",
                breaks.len(),
                values.len()
            )));
        }
        if breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Validation(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let d = values[0].rows();
        if values.iter().any(|m| m.rows() != d || m.cols() != d) {
            return Err(Error::Validation("pieces must share one square shape".into()));
        }
        Ok(PiecewiseConstant { breaks, values })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn value_at(&self, x: f64) -> CMatrix {
        let d = self.values[0].rows();
        for (i, v) in self.values.iter().enumerate() {
            if self.breaks[i] <= x && x < self.breaks[i + 1] {
                return v.clone();
            }
        }
        CMatrix::zeros(d, d)
    }

    /// Exact integral over `[lo, hi]` (the function vanishes off the mesh).
    pub fn integrate(&self, lo: f64, hi: f64) -> CMatrix {
        let d = self.values[0].rows();
        let mut total = CMatrix::zeros(d, d);
        for (i, v) in self.values.iter().enumerate() {
            let overlap = hi.min(self.breaks[i + 1]) - lo.max(self.breaks[i]);
            if overlap > 0.0 {
                total = &total + &v.scale(overlap);
            }
        }
        total
    }

    /// Same function on a finer mesh: extra interior breakpoints split
    /// pieces without changing any value.
    pub fn refined(&self, extra: &[f64]) -> Result<PiecewiseConstant> {
        let mut breaks = self.breaks.clone();
        for &x in extra {
            if x <= breaks[0] || x >= *breaks.last().unwrap() {
                continue;
            }
            match breaks.binary_search_by(|b| b.partial_cmp(&x).unwrap()) {
                Ok(_) => {}
                Err(pos) => breaks.insert(pos, x),
            }
        }
        let mut values = Vec::with_capacity(breaks.len() - 1);
        for w in breaks.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            values.push(self.value_at(mid));
        }
        PiecewiseConstant::new(breaks, values)
    }
}

/// Build integrated Atkinson data from pointwise coefficients.
///
/// `pinv_fn` must vanish on every mass interval and `w_fn`, `q_fn` on every
/// gap — this is exactly the support structure the reduction relies on, so
/// violations are rejected rather than silently integrated away.
pub fn from_coefficients(
    partition: &[f64],
    pinv_fn: &PiecewiseConstant,
    q_fn: &PiecewiseConstant,
    w_fn: &PiecewiseConstant,
    tols: &Tolerances,
) -> Result<AtkinsonProblem> {
    if partition.len() < 6 || partition.len() % 2 != 0 {
        return Err(Error::Validation(format!(
            "partition must have an even number (at least 6) of endpoints, got {}",
            partition.len()
        )));
    }
    let n = partition.len() / 2 - 1;
    let supported_inside = |f: &PiecewiseConstant, lo: f64, hi: f64| -> bool {
        f.breaks()
            .windows(2)
            .zip(&f.values)
            .all(|(w, v)| v.max_abs() <= 1e-12 || w[1].min(hi) - w[0].max(lo) <= 1e-12)
    };
    for i in 0..=n {
        let (a, b) = (partition[2 * i], partition[2 * i + 1]);
        if !supported_inside(pinv_fn, a, b) {
            return Err(Error::Validation(format!(
                "P^-1 must vanish on the mass interval [{a}, {b}]"
            )));
        }
    }
    for j in 1..=n {
        let (b, a) = (partition[2 * j - 1], partition[2 * j]);
        if !supported_inside(q_fn, b, a) || !supported_inside(w_fn, b, a) {
            return Err(Error::Validation(format!(
                "Q and W must vanish on the stiffness gap ({b}, {a})"
            )));
        }
    }
    let what = (0..=n)
        .map(|i| w_fn.integrate(partition[2 * i], partition[2 * i + 1]))
        .collect();
    let qhat = (0..=n)
        .map(|i| q_fn.integrate(partition[2 * i], partition[2 * i + 1]))
        .collect();
    let pinvhat = (1..=n)
        .map(|j| pinv_fn.integrate(partition[2 * j - 1], partition[2 * j]))
        .collect();
    let d = w_fn.values[0].rows();
    AtkinsonProblem::new(d, partition.to_vec(), what, qhat, pinvhat, tols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn scalar(x: f64) -> CMatrix {
        CMatrix::from_real_rows(&[vec![x]])
    }

    fn unit_partition(n: usize) -> Vec<f64> {
        (0..2 * n + 2).map(|i| i as f64).collect()
    }

    /// d = 1, all integrated data equal to 1.
    fn unit_fixture(n: usize) -> AtkinsonProblem {
        AtkinsonProblem::new(
            1,
            unit_partition(n),
            vec![scalar(1.0); n + 1],
            vec![scalar(0.0); n + 1],
            vec![scalar(1.0); n],
            &tols(),
        )
        .unwrap()
    }

    fn random_herm(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        (&g + &g.adjoint()).scale(0.5)
    }

    fn random_posdef(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        &(&g * &g.adjoint()) + &CMatrix::identity(n).scale(0.3)
    }

    fn random_fixture(rng: &mut ChaCha8Rng, d: usize, n: usize) -> AtkinsonProblem {
        AtkinsonProblem::new(
            d,
            unit_partition(n),
            (0..=n).map(|_| random_posdef(rng, d)).collect(),
            (0..=n).map(|_| random_herm(rng, d)).collect(),
            (0..n).map(|_| random_posdef(rng, d)).collect(),
            &tols(),
        )
        .unwrap()
    }

    fn dirichlet(d: usize) -> BoundaryRaw {
        BoundaryRaw::new(
            CMatrix::identity(2 * d),
            CMatrix::zeros(2 * d, 2 * d),
            &tols(),
        )
        .unwrap()
    }

    fn full_flux(d: usize) -> BoundaryRaw {
        BoundaryRaw::new(
            CMatrix::zeros(2 * d, 2 * d),
            CMatrix::identity(2 * d),
            &tols(),
        )
        .unwrap()
    }

    #[test]
    fn validation_rejects_malformed_data() {
        let t = tols();
        // too few gaps
        assert!(AtkinsonProblem::new(
            1,
            (0..6).map(|i| i as f64).collect(),
            vec![scalar(1.0); 2],
            vec![scalar(0.0); 2],
            vec![scalar(1.0); 1],
            &t
        )
        .is_err());
        // partition not increasing
        let mut part = unit_partition(2);
        part.swap(2, 3);
        assert!(AtkinsonProblem::new(
            1,
            part,
            vec![scalar(1.0); 3],
            vec![scalar(0.0); 3],
            vec![scalar(1.0); 2],
            &t
        )
        .is_err());
        // weight not positive definite
        assert!(AtkinsonProblem::new(
            1,
            unit_partition(2),
            vec![scalar(1.0), scalar(-1.0), scalar(1.0)],
            vec![scalar(0.0); 3],
            vec![scalar(1.0); 2],
            &t
        )
        .is_err());
        // singular stiffness integral
        assert!(AtkinsonProblem::new(
            1,
            unit_partition(2),
            vec![scalar(1.0); 3],
            vec![scalar(0.0); 3],
            vec![scalar(1.0), scalar(0.0)],
            &t
        )
        .is_err());
    }

    #[test]
    fn reduction_shape_and_placeholders() {
        let ap = unit_fixture(3);
        let eq = to_discrete(&ap, &tols()).unwrap();
        assert_eq!(eq.n(), 4);
        assert_eq!(eq.d(), 1);
        assert_eq!(eq.pinv(0)[(0, 0)], c(1.0));
        assert_eq!(eq.pinv(4)[(0, 0)], c(1.0));
        assert_eq!(eq.pinv(2)[(0, 0)], ap.pinvhat(2)[(0, 0)]);
        assert_eq!(eq.w(1)[(0, 0)], ap.what(0)[(0, 0)]);
        assert_eq!(eq.q(4)[(0, 0)], ap.qhat(3)[(0, 0)]);
    }

    #[test]
    fn transform_keeps_self_adjointness() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for d in 1..=3usize {
            for _ in 0..10 {
                // random chart point gives a valid raw pair
                let k: Vec<usize> = (1..=2 * d).filter(|_| rng.random_bool(0.5)).collect();
                let chart = BoundaryChart::new(k, random_herm(&mut rng, 2 * d), &tols()).unwrap();
                let raw = chart_to_raw(&chart, &tols()).unwrap();
                let c = bc_transform(&raw, &tols()).unwrap();
                // BoundaryRaw::new enforces rank and A B* = B A*, so
                // construction succeeding is the assertion; check shear too.
                let diff = &(&c.b1() + &raw.a1()) - &raw.b1();
                assert!(diff.max_abs() <= 1e-14);
                assert!((&c.b2() - &raw.b2()).max_abs() == 0.0);
            }
        }
    }

    #[test]
    fn unit_fixture_dirichlet_spectrum() {
        // N = 2, Dirichlet: count (N-1)d + rank 0 = 1, and the one eigenvalue
        // of the reduced y0 = y3 = 0 problem solves det = 0 by hand: the
        // reduced problem is the 3-node chain with outer stiffness pinned.
        let ap = unit_fixture(2);
        let bc = dirichlet(1);
        assert_eq!(atkinson_count(&ap, &bc, &tols()).unwrap(), 1);
        let spec = atkinson_spectrum(&ap, &bc, &tols()).unwrap();
        assert_eq!(spec.total(), 1);
        // cross-check the value against the independent dense-pencil route
        let eq = to_discrete(&ap, &tols()).unwrap();
        let c = bc_transform(&bc, &tols()).unwrap();
        let oracle = spectrum::pencil_oracle(&eq, &c, &tols()).unwrap();
        assert_eq!(oracle.total(), 1);
        let (a, ma) = spec.items()[0];
        let (b, mb) = oracle.items()[0];
        assert_eq!(ma, mb);
        assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()));
    }

    #[test]
    fn count_matches_spectrum_totals() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let t = tols();
        for _ in 0..25 {
            let d = rng.random_range(1..=2);
            let n = rng.random_range(2..=4);
            let ap = random_fixture(&mut rng, d, n);
            for bc in [dirichlet(d), full_flux(d)] {
                let total = atkinson_spectrum(&ap, &bc, &t).unwrap().total();
                assert_eq!(total, atkinson_count(&ap, &bc, &t).unwrap());
            }
            // random chart bc as well
            let k: Vec<usize> = (1..=2 * d).filter(|_| rng.random_bool(0.5)).collect();
            let chart = BoundaryChart::new(k, random_herm(&mut rng, 2 * d), &t).unwrap();
            let raw = chart_to_raw(&chart, &t).unwrap();
            let total = atkinson_spectrum(&ap, &raw, &t).unwrap().total();
            assert_eq!(total, atkinson_count(&ap, &raw, &t).unwrap());
        }
    }

    #[test]
    fn full_rank_flux_reaches_maximal_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for d in 1..=2usize {
            let n = 3;
            let ap = random_fixture(&mut rng, d, n);
            let total = atkinson_spectrum(&ap, &full_flux(d), &tols()).unwrap().total();
            assert_eq!(total, (n + 1) * d);
        }
    }

    #[test]
    fn weight_scaling_rescales_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let t = tols();
        let ap = random_fixture(&mut rng, 2, 2);
        let mut scaled = ap.clone();
        for i in 0..=2 {
            scaled = scaled.with_what(i, ap.what(i).scale(4.0), &t).unwrap();
        }
        let base = atkinson_spectrum(&ap, &dirichlet(2), &t).unwrap();
        let quart = atkinson_spectrum(&scaled, &dirichlet(2), &t).unwrap();
        assert_eq!(base.total(), quart.total());
        for ((a, ma), (b, mb)) in base.items().iter().zip(quart.items()) {
            assert_eq!(ma, mb);
            assert!((a - 4.0 * b).abs() <= 1e-7 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn piecewise_constant_integrates_exactly() {
        let f = PiecewiseConstant::new(
            vec![0.0, 1.0, 3.0],
            vec![scalar(2.0), scalar(-1.0)],
        )
        .unwrap();
        assert_eq!(f.integrate(0.0, 3.0)[(0, 0)], c(0.0));
        assert_eq!(f.integrate(0.5, 2.0)[(0, 0)], c(0.0));
        assert_eq!(f.integrate(-5.0, 0.5)[(0, 0)], c(1.0));
        assert_eq!(f.integrate(2.0, 10.0)[(0, 0)], c(-1.0));
        let g = f.refined(&[0.25, 1.5, 2.5]).unwrap();
        assert_eq!(g.breaks().len(), 6);
        assert_eq!(g.integrate(0.5, 2.0)[(0, 0)], c(0.0));
        assert_eq!(g.value_at(2.7)[(0, 0)], c(-1.0));
    }

    /// Pointwise coefficients on the mesh 0..8 with mass on [2i, 2i+1].
    fn pointwise_unit(n: usize) -> (Vec<f64>, PiecewiseConstant, PiecewiseConstant, PiecewiseConstant) {
        let part = unit_partition(n);
        let m = part.len() - 1;
        let mut pinv_vals = Vec::new();
        let mut w_vals = Vec::new();
        for piece in 0..m {
            let on_mass = piece % 2 == 0;
            pinv_vals.push(scalar(if on_mass { 0.0 } else { 1.0 }));
            w_vals.push(scalar(if on_mass { 1.0 } else { 0.0 }));
        }
        let pinv_fn = PiecewiseConstant::new(part.clone(), pinv_vals).unwrap();
        let q_fn = PiecewiseConstant::new(part.clone(), vec![scalar(0.0); m]).unwrap();
        let w_fn = PiecewiseConstant::new(part.clone(), w_vals).unwrap();
        (part, pinv_fn, q_fn, w_fn)
    }

    #[test]
    fn coefficients_with_wrong_support_are_rejected() {
        let (part, pinv_fn, q_fn, w_fn) = pointwise_unit(2);
        // weight leaking into a gap
        let bad_w = PiecewiseConstant::new(part.clone(), vec![scalar(1.0); part.len() - 1]).unwrap();
        assert!(from_coefficients(&part, &pinv_fn, &q_fn, &bad_w, &tols()).is_err());
        // stiffness leaking into a mass interval
        let bad_p = PiecewiseConstant::new(part.clone(), vec![scalar(1.0); part.len() - 1]).unwrap();
        assert!(from_coefficients(&part, &bad_p, &q_fn, &w_fn, &tols()).is_err());
        assert!(from_coefficients(&part, &pinv_fn, &q_fn, &w_fn, &tols()).is_ok());
    }

    #[test]
    fn mesh_refinement_leaves_spectrum_unchanged() {
        let (part, pinv_fn, q_fn, w_fn) = pointwise_unit(2);
        let t = tols();
        let coarse = from_coefficients(&part, &pinv_fn, &q_fn, &w_fn, &t).unwrap();
        let extra: Vec<f64> = (0..40).map(|i| 0.17 * i as f64).collect();
        let fine = from_coefficients(
            &part,
            &pinv_fn.refined(&extra).unwrap(),
            &q_fn.refined(&extra).unwrap(),
            &w_fn.refined(&extra).unwrap(),
            &t,
        )
        .unwrap();
        for bc in [dirichlet(1), full_flux(1)] {
            let a = atkinson_spectrum(&coarse, &bc, &t).unwrap();
            let b = atkinson_spectrum(&fine, &bc, &t).unwrap();
            assert_eq!(a.total(), b.total());
            for ((x, mx), (y, my)) in a.items().iter().zip(b.items()) {
                assert_eq!(mx, my);
                assert!((x - y).abs() <= 1e-8 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn classify_fixtures() {
        let t = tols();
        // Dirichlet corner of the full chart: K = {1..2d}, S = 0 makes
        // B = ±S = 0, the deepest layer, and the classifier is all kernel
        let d = 2;
        let chart = BoundaryChart::new(
            (1..=2 * d).collect(),
            CMatrix::zeros(2 * d, 2 * d),
            &t,
        )
        .unwrap();
        let sig = atkinson_classify(&chart, &t).unwrap();
        assert_eq!(sig.layer, 2 * d);
        assert_eq!(sig.inertia, InertiaSignature::new(0, 2 * d, 0));
        // K = {2} at d = 1 with s22 < 0: definite classifier, full-rank B
        let mut s = CMatrix::zeros(2, 2);
        s[(1, 1)] = c(-2.0);
        let chart = BoundaryChart::new(vec![2], s, &t).unwrap();
        let sig = atkinson_classify(&chart, &t).unwrap();
        assert_eq!(sig.layer, 0);
        assert_eq!(sig.inertia, InertiaSignature::new(1, 0, 0));
        // same K with s22 = 0 sits one layer down
        let chart = BoundaryChart::new(vec![2], CMatrix::zeros(2, 2), &t).unwrap();
        let sig = atkinson_classify(&chart, &t).unwrap();
        assert_eq!(sig.layer, 1);
        assert_eq!(sig.inertia, InertiaSignature::new(0, 1, 0));
        // K = {} is the isolated full-rank point: no area label
        let chart = BoundaryChart::new(vec![], CMatrix::zeros(2, 2), &t).unwrap();
        assert!(matches!(atkinson_classify(&chart, &t), Err(Error::EmptyK)));
    }

    #[test]
    fn layer_equals_classifier_kernel_order() {
        // rank B = (2d - #K) + rank of the principal submatrix on K, so the
        // two routes to the layer must agree on random charts
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let t = tols();
        for _ in 0..40 {
            let d = rng.random_range(1..=3);
            let mut k: Vec<usize> = (1..=2 * d).filter(|_| rng.random_bool(0.5)).collect();
            if k.is_empty() {
                k.push(rng.random_range(1..=2 * d));
            }
            // low-rank S makes nontrivial kernels likely
            let g = CMatrix::from_fn(2 * d, 1, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let s = &g * &g.adjoint();
            let chart = BoundaryChart::new(k, s, &t).unwrap();
            let sig = atkinson_classify(&chart, &t).unwrap();
            assert_eq!(sig.layer, sig.inertia.r_zero);
        }
    }

    #[test]
    fn layer_counts_match_atkinson_spectrum_totals() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let t = tols();
        for _ in 0..15 {
            let d = rng.random_range(1..=2);
            let n = rng.random_range(2..=3);
            let ap = random_fixture(&mut rng, d, n);
            let k: Vec<usize> = (1..=2 * d).filter(|_| rng.random_bool(0.6)).collect();
            if k.is_empty() {
                continue;
            }
            let chart = BoundaryChart::new(k, random_herm(&mut rng, 2 * d), &t).unwrap();
            let sig = atkinson_classify(&chart, &t).unwrap();
            let raw = chart_to_raw(&chart, &t).unwrap();
            let total = atkinson_spectrum(&ap, &raw, &t).unwrap().total();
            assert_eq!(total, (n + 1) * d - sig.layer);
        }
    }

    #[test]
    fn bc_path_endpoint_and_signature() {
        // d = 1, K = {1}, s11 = 0: singular chart with kernel of order 1.
        let t = tols();
        let ap = unit_fixture(2);
        let chart = BoundaryChart::new(vec![1], CMatrix::zeros(2, 2), &t).unwrap();
        let sig0 = atkinson_classify(&chart, &t).unwrap();
        assert_eq!(sig0.inertia, InertiaSignature::new(0, 1, 0));
        let target = InertiaSignature::new(0, 0, 1);
        let path = make_atkinson_bc_path(&ap, &chart, target, 0.25, 6, &t).unwrap();
        // endpoint reproduces the singular chart
        let (eq0, bc0) = path.endpoint().unwrap();
        let direct = bc_transform(&chart_to_raw(&chart, &t).unwrap(), &t).unwrap();
        match &bc0 {
            BoundaryCondition::Raw(r) => {
                assert!((&r.stacked() - &direct.stacked()).max_abs() <= 1e-12)
            }
            _ => panic!("path should produce raw conditions"),
        }
        assert_eq!(eq0.n(), 3);
        // signature along the path matches the target area
        for &tv in path.samples() {
            let mut s = CMatrix::zeros(2, 2);
            s[(0, 0)] = c(tv);
            let moved = chart.with_s(s, &t).unwrap();
            let sig = atkinson_classify(&moved, &t).unwrap();
            assert_eq!(sig.layer, 0);
            assert_eq!(sig.inertia, InertiaSignature::new(0, 0, 1));
        }
        // inadmissible request: growing the kernel
        assert!(make_atkinson_bc_path(
            &ap,
            &BoundaryChart::new(vec![1], CMatrix::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]), &t).unwrap(),
            InertiaSignature::new(0, 1, 0),
            0.25,
            6,
            &t
        )
        .is_err());
    }
}
