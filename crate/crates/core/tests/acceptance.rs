//! End-to-end checks pinning the library's headline behaviors with fixed
//! tolerances. Each test covers one numbered criterion and prints a single
//! summary line on success.

use std::sync::Arc;

use hmk_core::solver::Selector;
use hmk_core::system::RhoFn;
use hmk_core::{
    arc_distance, check_kl, closeness_triangle_check, example, extend_linear, refine_study,
    relation_check, residual_check, robustness_experiment, set_lemma_check, solve,
    viability_probe, wellposedness_experiment, HybridArc, KLBound, MemoryArc, PointCloud,
    QuadratureSpec, Segment, Solution, SolveOptions, SolveStatus, SystemData, Target, TAU_EQ,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Tolerance for the closed-form metric values of criterion 1.
const METRIC_TOL: f64 = 1e-6;

/// Instance counts for the seeded relation and lemma suites.
const SUITE_SIZE: usize = 1000;

/// Residual allowances of criterion 7; the hull slack term covers the
/// projection tolerance of the min-norm-point solve.
const HULL_SLACK: f64 = 1e-9;

fn linspace(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect()
}

/// Random piecewise-linear hybrid arc with slopes at most 2 and values
/// clamped to [-2, 2], with an optional jump.
fn random_arc(rng: &mut ChaCha8Rng, n: usize) -> HybridArc {
    let s0 = -(0.5 + rng.random_range(0.0..1.0));
    let t_end = 0.5 + rng.random_range(0.0..1.0);
    let with_jump = rng.random_bool(0.5);
    let breaks: Vec<(i64, f64, f64)> = if with_jump {
        let tj = t_end * rng.random_range(0.3..0.7);
        vec![(0, s0, tj), (1, tj, t_end)]
    } else {
        vec![(0, s0, t_end)]
    };
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let segs = breaks
        .into_iter()
        .map(|(j, a, b)| {
            let times = linspace(a, b, 3 + rng.random_range(0..4));
            let mut values = Vec::with_capacity(times.len() * n);
            for w in times.windows(2).map(Some).chain([None]) {
                values.extend_from_slice(&v);
                if let Some(w) = w {
                    let dt = w[1] - w[0];
                    for c in v.iter_mut() {
                        *c = (*c + rng.random_range(-2.0..2.0) * dt).clamp(-2.0, 2.0);
                    }
                }
            }
            Segment::new(j, times, values).unwrap()
        })
        .collect();
    HybridArc::new(n, segs).unwrap()
}

/// Same-domain copy with bounded value noise.
fn noisy_copy(rng: &mut ChaCha8Rng, arc: &HybridArc, amp: f64) -> HybridArc {
    let segs = arc
        .segments()
        .iter()
        .map(|seg| {
            let values: Vec<f64> = seg
                .values()
                .iter()
                .map(|v| (v + rng.random_range(-amp..amp)).clamp(-2.0, 2.0))
                .collect();
            Segment::new(seg.j(), seg.times().to_vec(), values).unwrap()
        })
        .collect();
    HybridArc::new(arc.n(), segs).unwrap()
}

/// History with the same domain as `base` and non-timer components scaled.
fn scale_history(base: &MemoryArc, scaled: &[usize], c: f64) -> MemoryArc {
    let n = base.arc().n();
    let segs = base
        .arc()
        .segments()
        .iter()
        .map(|seg| {
            let values: Vec<f64> = seg
                .values()
                .iter()
                .enumerate()
                .map(|(i, v)| if scaled.contains(&(i % n)) { c * v } else { *v })
                .collect();
            Segment::new(seg.j(), seg.times().to_vec(), values).unwrap()
        })
        .collect();
    MemoryArc::from_arc(HybridArc::new(n, segs).unwrap(), base.delta()).unwrap()
}

/// The shared pool of seeded solver runs behind criteria 4 and 7.
fn closure_runs() -> Vec<(SystemData, f64, Solution)> {
    (0..100u64)
        .into_par_iter()
        .map(|i| {
            let (ex, scaled, mut opt) = match i % 3 {
                0 => (
                    example("decay").unwrap(),
                    vec![0usize],
                    SolveOptions::new(1e-3 * (1.0 + (i % 4) as f64), 2.0 + (i % 5) as f64 * 0.25, 10),
                ),
                1 => (
                    example("dde").unwrap(),
                    vec![0usize],
                    SolveOptions::new(1e-3 * (1.0 + (i % 4) as f64), 1.2 + (i % 8) as f64 * 0.1, 10),
                ),
                _ => (
                    example("etc").unwrap(),
                    vec![0usize, 1],
                    SolveOptions::new(5e-3, 0.6 + (i % 5) as f64 * 0.1, 50),
                ),
            };
            opt.selector = Selector::Seeded(i);
            let c = 0.6 + 0.08 * (i % 10) as f64;
            let phi0 = scale_history(&ex.history, &scaled, c);
            let h = opt.h;
            let sol = solve(&ex.system, &phi0, &opt).unwrap();
            assert!(
                matches!(sol.status, SolveStatus::Complete { .. }),
                "run {i} ended {:?}",
                sol.status
            );
            (ex.system, h, sol)
        })
        .collect()
}

#[test]
fn criterion_01_metric_closed_forms() {
    let quad = QuadratureSpec::default();
    let point = |x: f64| {
        HybridArc::new(1, vec![Segment::new(0, vec![0.0], vec![x]).unwrap()]).unwrap()
    };
    let d = arc_distance(&point(0.0), &point(0.5), &quad).unwrap().d;
    assert!((d - 0.5).abs() <= METRIC_TOL, "singleton distance {d}");

    for c in [0.1, 1.0, 3.0] {
        let zero = HybridArc::from_grid(1, vec![-1.0, -0.5, 0.0], vec![0.0; 3]).unwrap();
        let level = HybridArc::from_grid(1, vec![-1.0, -0.5, 0.0], vec![c; 3]).unwrap();
        let d = arc_distance(&zero, &level, &quad).unwrap().d;
        assert!((d - c).abs() <= METRIC_TOL, "parallel arcs at {c}: {d}");
    }
    println!("criterion 1 (metric closed forms): PASS");
}

#[test]
fn criterion_02_relation_suite() {
    let failures: Vec<String> = (0..SUITE_SIZE as u64)
        .into_par_iter()
        .filter_map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x51AB + seed);
            let n = 1 + (seed % 2) as usize;
            let a = random_arc(&mut rng, n);
            let b = if rng.random_bool(0.5) {
                let amp = rng.random_range(0.01..0.3);
                noisy_copy(&mut rng, &a, amp)
            } else {
                random_arc(&mut rng, n)
            };
            let report = relation_check(&a, &b).unwrap();
            if report.all_pass() {
                None
            } else {
                let bad: Vec<String> = report
                    .items
                    .iter()
                    .filter(|i| !i.pass)
                    .map(|i| format!("{}: {} > {}", i.name, i.lhs, i.rhs))
                    .collect();
                Some(format!("seed {seed}: {}", bad.join("; ")))
            }
        })
        .collect();
    assert!(failures.is_empty(), "{} failures, first: {}", failures.len(), failures[0]);
    println!("criterion 2 (relation suite, {SUITE_SIZE} pairs): PASS");
}

#[test]
fn criterion_03_lemma_suite() {
    let triangle_failures: Vec<u64> = (0..SUITE_SIZE as u64)
        .into_par_iter()
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x7A1A + seed);
            let n = 1 + (seed % 2) as usize;
            let a1 = random_arc(&mut rng, n);
            let a2 = noisy_copy(&mut rng, &a1, 0.15);
            let a3 = noisy_copy(&mut rng, &a2, 0.15);
            let tau1 = rng.random_range(0.4..0.9);
            let tau2 = rng.random_range(0.4..0.9);
            !closeness_triangle_check(&a1, &a2, &a3, tau1, tau2).unwrap().pass
        })
        .collect();
    assert!(triangle_failures.is_empty(), "triangle failures at seeds {triangle_failures:?}");

    let set_failures: Vec<u64> = (0..SUITE_SIZE as u64)
        .into_par_iter()
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5E7 + seed);
            let dim = 1 + (seed % 4) as usize;
            let k = 1 + rng.random_range(0..4);
            let cloud = |rng: &mut ChaCha8Rng| {
                let rows: Vec<Vec<f64>> = (0..1 + rng.random_range(0..20))
                    .map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
                    .collect();
                PointCloud::from_rows(dim, &rows).unwrap()
            };
            let a_sets: Vec<PointCloud> = (0..k).map(|_| cloud(&mut rng)).collect();
            let b_sets: Vec<PointCloud> = (0..k).map(|_| cloud(&mut rng)).collect();
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            !set_lemma_check(&a_sets, &b_sets, &x, &y).unwrap().all_pass()
        })
        .collect();
    assert!(set_failures.is_empty(), "set lemma failures at seeds {set_failures:?}");
    println!("criterion 3 (lemma suite, {SUITE_SIZE} instances each): PASS");
}

#[test]
fn criterion_04_memory_view_closure() {
    let runs = closure_runs();
    runs.par_iter().for_each(|(sys, _, sol)| {
        for seg in sol.arc.segments() {
            if seg.j() < 0 {
                continue;
            }
            let step = (seg.len() / 8).max(1);
            let mut idx: Vec<usize> = (0..seg.len()).step_by(step).collect();
            if *idx.last().unwrap() != seg.len() - 1 {
                idx.push(seg.len() - 1);
            }
            for i in idx {
                let (t, _) = seg.sample(i);
                if t < 0.0 {
                    continue;
                }
                let view = sol.arc.memory_view(t, seg.j(), sys.delta).unwrap();
                assert!(view.in_class(), "view at ({t}, {}) leaves the class", seg.j());
                let di = view.delta_inf();
                assert!(
                    di >= sys.delta - TAU_EQ && di < sys.delta + 1.0,
                    "depth window violated at ({t}, {}): delta_inf {di}",
                    seg.j()
                );
            }
        }
    });
    println!("criterion 4 (memory view closure, {} runs): PASS", runs.len());
}

#[test]
fn criterion_05_dde_oracle() {
    let ex = example("dde").unwrap();
    let opt = SolveOptions::new(1e-3, 2.0, 10);
    let sol = solve(&ex.system, &ex.history, &opt).unwrap();
    assert!(matches!(sol.status, SolveStatus::Complete { .. }));
    let x_1_pre = sol.arc.eval(1.0, 0).unwrap()[0];
    let x_1_post = sol.arc.eval(1.0, 1).unwrap()[0];
    let x_2_pre = sol.arc.eval(2.0, 1).unwrap()[0];
    assert!((x_1_pre - 2.0).abs() <= 0.01, "x(1-) = {x_1_pre}");
    assert!((x_1_post - 4.0).abs() <= 0.02, "x(1,1) = {x_1_post}");
    assert!((x_2_pre - 5.0).abs() <= 0.03, "x(2-) = {x_2_pre}");

    let report = residual_check(&ex.system, &sol).unwrap();
    assert!(report.domain_valid);
    assert!(report.max_jump_gap <= HULL_SLACK);
    assert!(report.max_flow_residual <= 5.0 * (opt.h + HULL_SLACK));

    let free = example("dde:delta_timer=5").unwrap();
    let study = refine_study(
        &free.system,
        &free.history,
        &[4e-3, 2e-3, 1e-3],
        &SolveOptions::new(1e-3, 2.5, 10),
    )
    .unwrap();
    let order = study.order.expect("measurable refinement gaps");
    assert!((order - 1.0).abs() <= 0.3, "fitted order {order}");
    println!("criterion 5 (delay oracle, order {order:.3}): PASS");
}

#[test]
fn criterion_06_decay_oracle() {
    let ex = example("decay").unwrap();
    let opt = SolveOptions::new(1e-3, 3.0, 10);
    let sol = solve(&ex.system, &ex.history, &opt).unwrap();
    assert!(matches!(sol.status, SolveStatus::Complete { .. }));
    let mut worst = 0.0f64;
    for seg in sol.arc.segments() {
        if seg.j() < 0 {
            continue;
        }
        for i in 0..seg.len() {
            let (t, v) = seg.sample(i);
            if t < 0.0 {
                continue;
            }
            let exact = (-t).exp() * 0.5f64.powi(seg.j() as i32);
            worst = worst.max((v[0] - exact).abs());
        }
    }
    assert!(worst <= 10.0 * opt.h, "worst closed-form gap {worst}");

    let report = residual_check(&ex.system, &sol).unwrap();
    assert!(report.domain_valid);
    assert!(report.max_jump_gap <= HULL_SLACK);
    assert!(report.max_flow_residual <= 5.0 * (opt.h + HULL_SLACK));
    println!("criterion 6 (decay oracle, worst gap {worst:.2e}): PASS");
}

#[test]
fn criterion_07_solution_residuals() {
    let runs = closure_runs();
    runs.par_iter().for_each(|(sys, h, sol)| {
        let report = residual_check(sys, sol).unwrap();
        assert!(report.domain_valid, "domain failed revalidation");
        assert!(report.max_jump_gap <= HULL_SLACK, "jump gap {}", report.max_jump_gap);
        assert!(
            report.max_flow_residual <= 5.0 * (h + HULL_SLACK),
            "flow residual {} at h {h}",
            report.max_flow_residual
        );
    });
    println!("criterion 7 (solution residuals, {} runs): PASS", runs.len());
}

#[test]
fn criterion_08_wellposedness_trend() {
    let ex = example("dde").unwrap();
    let rho: RhoFn = Arc::new(|_| 1.0);
    let mut opt = SolveOptions::new(2e-3, 1.0, 10);
    opt.selector = Selector::Seeded(17);
    let deltas: Vec<f64> = (1..=8).map(|i| 0.5f64.powi(i)).collect();
    let report =
        wellposedness_experiment(&ex.system, &rho, &deltas, &ex.history, &opt, 17).unwrap();
    let d: Vec<f64> = report
        .runs
        .iter()
        .map(|r| r.distance.unwrap_or_else(|| panic!("run failed: {:?}", r.error)))
        .collect();
    assert!(report.monotone, "distances not nonincreasing within slack: {d:?}");
    assert!(d[7] < d[0] / 4.0, "d_8 {} versus d_1 {}", d[7], d[0]);

    let exact = wellposedness_experiment(&ex.system, &rho, &[0.0], &ex.history, &opt, 17).unwrap();
    assert_eq!(exact.runs[0].distance, Some(0.0), "zero scale must be exact");
    println!("criterion 8 (well-posedness trend, d: {:.4} down to {:.6}): PASS", d[0], d[7]);
}

#[test]
fn criterion_09_kl_robustness() {
    let ex = example("decay").unwrap();
    let w = Target::Box { lo: vec![0.0, -2.0], hi: vec![0.0, 1.0] };
    let beta0 = KLBound::new(1.0, 0.69, 0.0).unwrap();
    let mut opt = SolveOptions::new(1e-3, 3.0, 10);
    opt.selector = Selector::Seeded(5);

    let nominal = solve(&ex.system, &ex.history, &opt).unwrap();
    let nominal_report = check_kl(&nominal, &w, &beta0).unwrap();
    assert!(nominal_report.pass, "nominal margin {}", nominal_report.worst_margin);

    let rho: RhoFn = Arc::new(|_| 1.0);
    let beta = beta0.with_eps(0.1).unwrap();
    let report = robustness_experiment(
        &ex.system,
        &w,
        &beta,
        &rho,
        &[0.1, 0.05, 0.02, 0.01],
        std::slice::from_ref(&ex.history),
        &opt,
        5,
    )
    .unwrap();
    assert!(report.nominal_pass);
    let best = report.passing_delta.expect("a positive scale passes");
    assert!(best >= 0.01, "passing scale {best}");

    for delta in [0.0, 0.02, 0.1] {
        let sys = ex.system.perturb(Arc::clone(&rho), delta, 5).unwrap().system();
        let sol = solve(&sys, &ex.history, &opt).unwrap();
        let mut prev = f64::NEG_INFINITY;
        let mut passed = false;
        for eps in [0.0, 0.05, 0.1, 0.3] {
            let rep = check_kl(&sol, &w, &beta0.with_eps(eps).unwrap()).unwrap();
            assert!(rep.worst_margin >= prev, "margin fell as the offset grew");
            assert!(rep.pass || !passed, "pass flag lost monotonicity at eps {eps}");
            passed |= rep.pass;
            prev = rep.worst_margin;
        }
    }
    println!("criterion 9 (decay envelope robustness, passing scale {best}): PASS");
}

#[test]
fn criterion_10_viability_probe() {
    let ex = example("dde").unwrap();
    let eps = 1e-2;
    (0..50u64).into_par_iter().for_each(|seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(0xF1A7 + seed);
        let tau0 = rng.random_range(0.05..0.9);
        let times = linspace(-3.0, 0.0, 7);
        let mut values = Vec::with_capacity(times.len() * 2);
        let mut x = rng.random_range(-1.5..1.5);
        for &s in &times {
            values.push(x);
            values.push(tau0 + s);
            x = (x + rng.random_range(-0.4..0.4)).clamp(-2.0, 2.0);
        }
        let phi = MemoryArc::from_arc(
            HybridArc::new(2, vec![Segment::new(0, times, values).unwrap()]).unwrap(),
            ex.system.delta,
        )
        .unwrap();

        let (v, h) = viability_probe(&ex.system, &phi, eps)
            .unwrap()
            .unwrap_or_else(|| panic!("no certified pair at seed {seed}"));
        assert!(h > 0.0 && h <= eps);

        let psi = extend_linear(&phi, &v, h).unwrap();
        let margin = (ex.system.flow_margin)(&psi).unwrap();
        assert!(margin <= TAU_EQ, "extension left the flow set: margin {margin}");
        let head = phi.head();
        let ext = psi.head();
        let quotient_gap = ext
            .iter()
            .zip(&head)
            .zip(&v)
            .map(|((e, s), vi)| ((e - s) / h - vi).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(quotient_gap <= eps, "difference quotient off by {quotient_gap}");
    });
    println!("criterion 10 (viability probe, 50 interior points): PASS");
}
