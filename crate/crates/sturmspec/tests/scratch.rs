//! Temporary diagnostic reproductions for acceptance failures. Deleted
//! before the suite is finalized.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use sturmspec::atkinson::{self, AtkinsonProblem};
use sturmspec::classify::{self};
use sturmspec::numkernel::{self, CMatrix, InertiaSignature, Tolerances};
use sturmspec::perturb::{self, ParamPath};
use sturmspec::problem::{chart_to_raw, BoundaryChart, BoundaryCondition, SLEquation};
use sturmspec::spectrum::{self};

fn tols() -> Tolerances {
    Tolerances::default()
}

fn random_herm(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    (&m + &m.adjoint()).scale(0.5)
}

fn random_posdef(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    &(&g * &g.adjoint()).scale(0.5) + &CMatrix::identity(n).scale(0.3)
}

fn random_invertible_herm(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let (_, vecs) = numkernel::herm_eig(&random_herm(rng, n), &tols()).unwrap();
    let signs: Vec<f64> = (0..n)
        .map(|_| {
            let mag = rng.random_range(0.4..1.4);
            if rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let d = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex64::new(signs[i], 0.0)
        } else {
            Complex64::ZERO
        }
    });
    &(&vecs * &d) * &vecs.adjoint()
}

fn random_equation(rng: &mut ChaCha8Rng, d: usize, n: usize) -> SLEquation {
    let mut pinv = vec![random_posdef(rng, d)];
    for _ in 1..=n {
        if rng.random_bool(0.3) {
            pinv.push(random_invertible_herm(rng, d));
        } else {
            pinv.push(random_posdef(rng, d));
        }
    }
    let q = (0..n).map(|_| random_herm(rng, d)).collect();
    let w = (0..n).map(|_| random_posdef(rng, d)).collect();
    SLEquation::new(d, n, pinv, q, w, &tols()).unwrap()
}

fn random_subset(rng: &mut ChaCha8Rng, max: usize) -> Vec<usize> {
    (1..=max).filter(|_| rng.random_bool(0.5)).collect()
}

fn random_chart(rng: &mut ChaCha8Rng, d: usize, k: Vec<usize>) -> BoundaryChart {
    BoundaryChart::new(k, random_herm(rng, 2 * d), &tols()).unwrap()
}

fn dump_case(case: usize, eq: &SLEquation, chart: &BoundaryChart) {
    let t = tols();
    let raw = chart_to_raw(chart, &t).unwrap();
    let expected = spectrum::count_formula(eq, &raw, &t).unwrap();
    println!("== case {case}: d={} n={} K={:?} expected count {expected}", eq.d(), eq.n(), chart.k());
    match spectrum::char_poly(eq, &raw, &t) {
        Err(e) => println!("   char_poly error: {e}"),
        Ok(poly) => {
            println!("   char_poly degree {}", poly.degree());
            let roots = spectrum::real_roots(poly.monic_real());
            println!("   roots: {roots:?}");
            for w in roots.windows(2) {
                let gap = w[1] - w[0];
                if gap < 1e-4 * (1.0 + w[1].abs()) {
                    println!("   NARROW GAP {gap:.3e} between {} and {}", w[0], w[1]);
                }
            }
            let (l0, l1) = spectrum::pencil(eq, &raw).unwrap();
            for &r in &roots {
                let m = &l0 + &l1.scale(r);
                let sv = numkernel::singular_values(&m, &t).unwrap();
                let smax = sv.last().copied().unwrap_or(0.0);
                println!(
                    "   root {r:+.12e}: sv_min {:.3e}  sv2 {:.3e}  smax {:.3e}  rel {:.3e}",
                    sv[0],
                    sv[1],
                    smax,
                    sv[0] / smax.max(1.0)
                );
            }
            let clusters = spectrum::cluster_roots(&roots, &t);
            println!("   clusters: {clusters:?}");
        }
    }
    match spectrum::pencil_oracle(eq, &raw, &t) {
        Err(e) => println!("   pencil_oracle error: {e}"),
        Ok(s) => println!("   oracle: {:?}", s.items()),
    }
}

#[test]
fn repro_c1() {
    let t = tols();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..200 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(2..=6);
        let eq = random_equation(&mut rng, d, n);
        let k = random_subset(&mut rng, 2 * d);
        let chart = random_chart(&mut rng, d, k.clone());
        let failed = {
            let raw = chart_to_raw(&chart, &t).unwrap();
            let expected = spectrum::count_formula(&eq, &raw, &t).unwrap();
            match spectrum::eigenvalues(&eq, &BoundaryCondition::Chart(chart.clone()), &t) {
                Err(e) => {
                    println!("case {case} FAILED: {e}");
                    true
                }
                Ok(spec) => spec.total() != expected,
            }
        };
        if failed {
            dump_case(case, &eq, &chart);
        }
    }
}

fn sig(r_minus: usize, r_zero: usize, r_plus: usize) -> InertiaSignature {
    InertiaSignature::new(r_minus, r_zero, r_plus)
}

fn admissible_pairs(order: usize) -> Vec<(InertiaSignature, InertiaSignature)> {
    let mut all = Vec::new();
    for rm in 0..=order {
        for rz in 0..=order - rm {
            all.push(sig(rm, rz, order - rm - rz));
        }
    }
    let mut pairs = Vec::new();
    for &singular in all.iter().filter(|s| s.r_zero >= 1) {
        for &target in all.iter() {
            if target.r_zero < singular.r_zero
                && target.r_plus >= singular.r_plus
                && target.r_minus >= singular.r_minus
            {
                pairs.push((singular, target));
            }
        }
    }
    pairs
}

fn diagonal_with_inertia(s: InertiaSignature) -> CMatrix {
    let n = s.r_minus + s.r_zero + s.r_plus;
    CMatrix::from_fn(n, n, |i, j| {
        if i != j {
            Complex64::ZERO
        } else if i < s.r_plus {
            Complex64::new(1.0, 0.0)
        } else if i < s.r_plus + s.r_minus {
            Complex64::new(-1.0, 0.0)
        } else {
            Complex64::ZERO
        }
    })
}

#[test]
fn repro_c9() {
    let t = tols();
    for d in 1..=2usize {
        let id = CMatrix::identity(d);
        let eq = SLEquation::new(
            d,
            2,
            vec![id.clone(), id.clone(), id.clone()],
            vec![CMatrix::zeros(d, d); 2],
            vec![id.clone(), id.clone()],
            &t,
        )
        .unwrap();
        for (singular_sig, target) in admissible_pairs(d) {
            let s1 = &id - &diagonal_with_inertia(singular_sig);
            let mut s = CMatrix::zeros(2 * d, 2 * d);
            for i in 0..d {
                for j in 0..d {
                    s[(i, j)] = s1[(i, j)];
                }
            }
            let chart = BoundaryChart::new((1..=d).collect(), s, &t).unwrap();
            let tag = format!(
                "d={d} ({},{},{}) -> ({},{},{})",
                singular_sig.r_minus,
                singular_sig.r_zero,
                singular_sig.r_plus,
                target.r_minus,
                target.r_zero,
                target.r_plus
            );
            let path = match perturb::make_eq_path(&eq, &chart, target, 0.25, 20, &t) {
                Ok(p) => p,
                Err(e) => {
                    println!("{tag}: make_eq_path: {e}");
                    continue;
                }
            };
            let prediction =
                classify::predict_jump(target, singular_sig, classify::Space::Equation).unwrap();
            match perturb::jump_experiment(&path, prediction, &t) {
                Ok(r) if !r.pass => {
                    println!("{tag}: FAIL predicted {:?} observed {:?} fates {:?}", r.predicted, r.observed, r.fates)
                }
                Ok(_) => {}
                Err(e) => {
                    println!("{tag}: jump_experiment: {e}");
                    // walk the ladder manually to find the failing sample
                    for (ks, tv) in path.samples().iter().enumerate() {
                        let (meq, mbc) = path.at(*tv).unwrap();
                        match spectrum::eigenvalues(&meq, &mbc, &t) {
                            Ok(_) => {}
                            Err(e2) => {
                                println!("    sample {ks} t={tv:.3e}: {e2}");
                                if ks > 2 {
                                    break;
                                }
                            }
                        }
                    }
                    let (eq0, bc0) = path.endpoint().unwrap();
                    if let Err(e2) = spectrum::eigenvalues(&eq0, &bc0, &t) {
                        println!("    endpoint: {e2}");
                    }
                }
            }
        }
    }
}

#[test]
fn repro_c10_counts() {
    let t = tols();
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    for case in 0..100 {
        let d = rng.random_range(1..=2);
        let n = rng.random_range(2..=4);
        let ap = random_atkinson(&mut rng, d, n);
        let chart = {
            let k = random_subset(&mut rng, 2 * d);
            random_chart(&mut rng, d, k)
        };
        let raw = chart_to_raw(&chart, &t).unwrap();
        let count = atkinson::atkinson_count(&ap, &raw, &t).unwrap();
        match atkinson::atkinson_spectrum(&ap, &raw, &t) {
            Err(e) => {
                println!("case {case} (d={d}, n={n}, K={:?}): {e}", chart.k());
                let eqd = atkinson::to_discrete(&ap, &t).unwrap();
                let rawt = atkinson::bc_transform(&raw, &t).unwrap();
                println!("   discrete N={} count={count}", eqd.n());
                dump_case(case, &eqd, &chart);
                match spectrum::char_poly(&eqd, &rawt, &t) {
                    Ok(p) => println!("   transformed char_poly degree {}", p.degree()),
                    Err(e2) => println!("   transformed char_poly: {e2}"),
                }
                match spectrum::pencil_oracle(&eqd, &rawt, &t) {
                    Ok(s) => println!("   transformed oracle: {:?}", s.items()),
                    Err(e2) => println!("   transformed oracle: {e2}"),
                }
            }
            Ok(spec) => {
                if spec.total() != count {
                    println!("case {case}: count {count} vs total {}", spec.total());
                }
            }
        }
    }
}

fn random_partition(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut nodes = Vec::with_capacity(2 * n + 2);
    let mut x = rng.random_range(-1.0..1.0);
    for _ in 0..2 * n + 2 {
        nodes.push(x);
        x += rng.random_range(0.2..1.0);
    }
    nodes
}

fn random_atkinson(rng: &mut ChaCha8Rng, d: usize, n: usize) -> AtkinsonProblem {
    let what = (0..=n).map(|_| random_posdef(rng, d)).collect();
    let qhat = (0..=n).map(|_| random_herm(rng, d)).collect();
    let pinvhat = (0..n)
        .map(|_| {
            if rng.random_bool(0.3) {
                random_invertible_herm(rng, d)
            } else {
                random_posdef(rng, d)
            }
        })
        .collect();
    AtkinsonProblem::new(d, random_partition(rng, n), what, qhat, pinvhat, &tols()).unwrap()
}

fn psd_direction(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    (&g * &g.adjoint()).scale(0.3)
}

#[test]
fn repro_c7() {
    let t = tols();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut done = 0usize;
    while done < 10 {
        let d = rng.random_range(1..=2);
        let n = rng.random_range(2..=3);
        let eq = random_equation(&mut rng, d, n);
        let chart = {
            let k = random_subset(&mut rng, 2 * d);
            random_chart(&mut rng, d, k)
        };
        let delta = psd_direction(&mut rng, 2 * d);
        let tl = tols();
        let (eqc, chc, dc) = (eq.clone(), chart.clone(), delta.clone());
        let path = ParamPath::new(0.25, 12, move |tt| {
            let moved = chc.with_s(&chc.s().clone() + &dc.scale(tt), &tl)?;
            Ok((eqc.clone(), BoundaryCondition::Chart(moved)))
        })
        .unwrap();
        let trace = match perturb::branch_trace(&path, &t) {
            Ok(tr) => tr,
            Err(_) => continue,
        };
        let flags = trace.nondecreasing_in_t(1e-9);
        if let Some(bad) = flags.iter().position(|ok| !ok) {
            println!("path (d={d}, n={n}, K={:?}) branch {} not monotone", chart.k(), bad + 1);
            for &tv in path.samples() {
                let moved = chart.with_s(&chart.s().clone() + &delta.scale(tv), &t).unwrap();
                let s = classify::bc_signature(&eq, &moved, &t).unwrap();
                println!(
                    "   t={tv:.5}: inertia ({},{},{})",
                    s.inertia.r_minus, s.inertia.r_zero, s.inertia.r_plus
                );
            }
            println!("   branch values {:?}", trace.branch(bad + 1));
        }
        done += 1;
    }
}

#[test]
fn repro_c2() {
    let t = tols();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for case in 0..50 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(2..=6);
        let eq = random_equation(&mut rng, d, n);
        let chart = {
            let k = random_subset(&mut rng, 2 * d);
            random_chart(&mut rng, d, k)
        };
        let raw = chart_to_raw(&chart, &t).unwrap();
        let gamma = spectrum::eigenvalues(&eq, &BoundaryCondition::Raw(raw.clone()), &t);
        let oracle = spectrum::pencil_oracle(&eq, &raw, &t);
        let bad = match (&gamma, &oracle) {
            (Ok(a), Ok(b)) => {
                a.items().len() != b.items().len()
                    || a.items()
                        .iter()
                        .zip(b.items())
                        .any(|(x, y)| x.1 != y.1 || (x.0 - y.0).abs() > 1e-8 * (1.0 + y.0.abs()))
            }
            _ => true,
        };
        if bad {
            println!("case {case} disagreement:");
            println!("   gamma : {:?}", gamma.map(|s| s.items().to_vec()));
            println!("   oracle: {:?}", oracle.map(|s| s.items().to_vec()));
            dump_case(case, &eq, &chart);
        }
    }
}

#[test]
#[ignore]
fn trace_one_case() {
    let which: usize = std::env::var("CASE").unwrap().parse().unwrap();
    let t = tols();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..200 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(2..=6);
        let eq = random_equation(&mut rng, d, n);
        let k = random_subset(&mut rng, 2 * d);
        let chart = random_chart(&mut rng, d, k.clone());
        if case == which {
            let raw = chart_to_raw(&chart, &t).unwrap();
            let expected = spectrum::count_formula(&eq, &raw, &t).unwrap();
            eprintln!("case {case}: d={d} n={n} expected={expected}");
            match spectrum::char_poly(&eq, &raw, &t) {
                Err(e) => eprintln!("char_poly error: {e}"),
                Ok(p) => eprintln!("degree {}", p.monic_real().len() - 1),
            }
            return;
        }
    }
}

#[test]
#[ignore]
fn trace_c9_rung() {
    let t = tols();
    let d = 2usize;
    let id = CMatrix::identity(d);
    let eq = SLEquation::new(
        d,
        2,
        vec![id.clone(), id.clone(), id.clone()],
        vec![CMatrix::zeros(d, d); 2],
        vec![id.clone(), id.clone()],
        &t,
    )
    .unwrap();
    let singular_sig = sig(0, 2, 0);
    let target = sig(1, 0, 1);
    let s1 = &id - &diagonal_with_inertia(singular_sig);
    let mut s = CMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            s[(i, j)] = s1[(i, j)];
        }
    }
    let chart = BoundaryChart::new((1..=d).collect(), s, &t).unwrap();
    let path = perturb::make_eq_path(&eq, &chart, target, 0.25, 20, &t).unwrap();
    let tv = path.samples()[7];
    eprintln!("t = {tv:.6e}");
    let (meq, mbc) = path.at(tv).unwrap();
    let raw = match &mbc {
        BoundaryCondition::Chart(ch) => chart_to_raw(ch, &t).unwrap(),
        BoundaryCondition::Raw(r) => r.clone(),
    };
    let expected = spectrum::count_formula(&meq, &raw, &t).unwrap();
    eprintln!("expected count {expected}");
    match spectrum::char_poly(&meq, &raw, &t) {
        Ok(p) => eprintln!("degree {}", p.monic_real().len() - 1),
        Err(e) => eprintln!("char_poly: {e}"),
    }
}

#[test]
#[ignore]
fn trace_c9_rung2() {
    let t = tols();
    let d = 2usize;
    let id = CMatrix::identity(d);
    let eq = SLEquation::new(
        d,
        2,
        vec![id.clone(), id.clone(), id.clone()],
        vec![CMatrix::zeros(d, d); 2],
        vec![id.clone(), id.clone()],
        &t,
    )
    .unwrap();
    let singular_sig = sig(0, 2, 0);
    let target = sig(1, 0, 1);
    let s1 = &id - &diagonal_with_inertia(singular_sig);
    let mut s = CMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            s[(i, j)] = s1[(i, j)];
        }
    }
    let chart = BoundaryChart::new((1..=d).collect(), s, &t).unwrap();
    let path = perturb::make_eq_path(&eq, &chart, target, 0.25, 20, &t).unwrap();
    for ks in 0..path.samples().len() {
        let tv = path.samples()[ks];
        let (meq, mbc) = path.at(tv).unwrap();
        match spectrum::eigenvalues(&meq, &mbc, &t) {
            Ok(sp) => eprintln!("sample {ks} t={tv:.6e}: total {}", sp.total()),
            Err(e) => eprintln!("sample {ks} t={tv:.6e}: ERR {e}"),
        }
    }
}
