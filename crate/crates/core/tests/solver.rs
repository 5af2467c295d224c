use std::f64::consts::PI;

use sesop_mg::baselines::{cg_solve, classical_tg_solve};
use sesop_mg::hierarchy::{build_hierarchy, CoarseMode, Hierarchy};
use sesop_mg::problems::ProblemSpec;
use sesop_mg::relaxation::{Preconditioner, Relaxer};
use sesop_mg::sesop::{random_initial, sesop_solve, subspace_minimize_quadratic, SesopConfig, SesopSolver, SubspaceBasis};
use sesop_mg::trace::{estimate_practical_factor, Monitor, StopRule};
use sesop_mg::transfer::TransferPair;
use sesop_mg::GridField;

fn hier(spec: &ProblemSpec, n: usize, coarsest: usize) -> Hierarchy {
    build_hierarchy(spec, n, coarsest, TransferPair::default(), CoarseMode::Rediscretize).unwrap()
}

fn laplace() -> ProblemSpec {
    ProblemSpec::Rotated { epsilon: 1.0, phi: 0.0 }
}

#[test]
fn sesop_with_one_history_step_is_cg() {
    let h = hier(&laplace(), 31, 15);
    let cfg = SesopConfig {
        use_cgc: false,
        preconditioner: Preconditioner::Identity,
        ..SesopConfig::linear_two_grid(1)
    };
    let x0 = random_initial(31, 7);
    let stop = StopRule::new(0.0, 20);
    let s = sesop_solve(&h, cfg, x0.clone(), Monitor::Residual, stop).unwrap();
    let c = cg_solve(h.fine(), x0, Monitor::Residual, stop).unwrap();
    assert_eq!(s.trace.len(), 21);
    for (a, b) in s.trace.records().iter().zip(c.trace.records()) {
        assert!((a.metric - b.metric).abs() <= 1e-6 * b.metric, "{} vs {}", a.metric, b.metric);
    }
}

#[test]
fn objective_never_increases_on_quadratics() {
    let spec = ProblemSpec::Rotated { epsilon: 1e-2, phi: PI / 5.0 };
    let h = hier(&spec, 63, 7);
    for history in [0, 1, 2] {
        let cfg = SesopConfig {
            fine_relax: Relaxer::jacobi(2, 1),
            ..SesopConfig::linear_two_grid(history)
        };
        let out = sesop_solve(&h, cfg, random_initial(63, 1), Monitor::Residual, StopRule::new(1e-8, 60)).unwrap();
        for w in out.trace.records().windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-12 * w[0].objective.abs());
        }
    }
}

#[test]
fn larger_subspace_decreases_more() {
    let spec = ProblemSpec::Rotated { epsilon: 0.1, phi: 0.4 };
    let h = hier(&spec, 31, 15);
    let fine = h.fine();
    let x = random_initial(31, 3);
    let g = fine.gradient(&x);
    let (xc, sigma) = h.coarse_problem(0, &x, &g).unwrap();
    let ys = h.coarsest_solve(sigma.linear_parts().unwrap().1).unwrap();
    let d = h.prolong(&ys.sub(&xc)).unwrap();
    let small = subspace_minimize_quadratic(fine, &x, &SubspaceBasis::from_directions(vec![g.clone()])).unwrap();
    let big = subspace_minimize_quadratic(fine, &x, &SubspaceBasis::from_directions(vec![d, g])).unwrap();
    assert!(fine.value(&big.x) <= fine.value(&small.x));
}

#[test]
fn w_cycle_tracks_two_grid_factor() {
    let tg = hier(&laplace(), 63, 31);
    let mg = hier(&laplace(), 63, 7);
    let stop = StopRule::new(1e-8, 200);
    let cfg = SesopConfig::linear_two_grid(1);
    let a = sesop_solve(&tg, cfg, random_initial(63, 0), Monitor::Residual, stop).unwrap();
    let b = sesop_solve(&mg, cfg, random_initial(63, 0), Monitor::Residual, stop).unwrap();
    let (fa, fb) = (estimate_practical_factor(&a.trace).unwrap(), estimate_practical_factor(&b.trace).unwrap());
    assert!((fa - fb).abs() < 0.05, "{fa} vs {fb}");
}

#[test]
fn coarse_problem_matches_restricted_gradient() {
    for spec in [ProblemSpec::Exp { gamma: 10.0 }, ProblemSpec::PLaplacian { p: 1.6, xi: 1e-4 }] {
        let h = hier(&spec, 31, 7);
        let mut x = random_initial(31, 2);
        let mut g = h.fine().gradient(&x);
        for l in 0..h.len() - 1 {
            let (xc, sigma) = h.coarse_problem(l, &x, &g).unwrap();
            let expect = h.restrict_dual(&g).unwrap();
            let got = sigma.gradient(&xc);
            let err = got.sub(&expect).max_abs();
            assert!(err <= 1e-12 * (1.0 + expect.max_abs()), "level {l}: {err}");
            x = xc;
            g = got;
        }
    }
}

#[test]
fn nonlinear_multilevel_descends() {
    let spec = ProblemSpec::Exp { gamma: 10.0 };
    let h = hier(&spec, 63, 7);
    let mut solver = SesopSolver::new(&h, SesopConfig::nonlinear(1)).unwrap();
    let mut x = random_initial(63, 4);
    let mut f = h.fine().value(&x);
    for _ in 0..6 {
        x = solver.step(&x).unwrap();
        let fx = h.fine().value(&x);
        assert!(fx <= f);
        f = fx;
    }
    let analytic = spec.reference_objective(63).unwrap();
    assert!((f - analytic).abs() < 1e-3 * analytic.abs(), "{f} vs {analytic}");
}

#[test]
fn classical_two_grid_solves() {
    let h = hier(&laplace(), 31, 15);
    let out = classical_tg_solve(&h, random_initial(31, 5), StopRule::new(1e-8, 100)).unwrap();
    assert!(out.converged);
    assert!(out.trace.iterations() < 60);
}

#[test]
fn seeded_initial_guess_is_reproducible() {
    let a = random_initial(15, 11);
    assert_eq!(a, random_initial(15, 11));
    assert_ne!(a, random_initial(15, 12));
    assert!(a.as_slice().iter().all(|v| (0.0..1.0).contains(v)));
}

#[test]
fn configuration_errors() {
    let h = hier(&laplace(), 15, 7);
    let bad = SesopConfig {
        cycle_type: 3,
        ..SesopConfig::linear_two_grid(1)
    };
    assert!(SesopSolver::new(&h, bad).is_err());
    let one = GridField::zeros(15);
    assert!(sesop_solve(&h, SesopConfig::linear_two_grid(0), one, Monitor::Gap { reference: 0.0 }, StopRule::new(1e-8, 0)).is_ok());
}
