use epec_core::catalog::{cournot, pang_fukushima, CournotParams, PfVariant};
use epec_core::mpec::{
    build_ae, build_best_response, build_imp, build_quasi, expand_quasi, solve_global, solve_local,
    SolveOptions, SolveStatus,
};
use epec_core::structure::{detect_implicit_potential, detect_potential, detect_quasi_potential};
use epec_core::{Error, Formulation, Polyhedron};

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn pf_ae_global_minimiser() {
    let g = pang_fukushima(PfVariant::Shared);
    let inst = build_ae(&g, &detect_potential(&g)).unwrap();
    let r = solve_global(&inst, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(close(&r.point, &[0.0, 1.0, 0.0, 0.0], 1e-8), "{:?}", r.point);
    assert!((r.value + 0.5).abs() < 1e-9);
    assert!(g.membership_f(&r.point));
}

#[test]
fn pf_quasi_minus_minimiser() {
    let g = pang_fukushima(PfVariant::QuasiMinus);
    let inst = build_quasi(&g, &detect_quasi_potential(&g)).unwrap();
    let r = solve_global(&inst, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(close(&r.point, &[0.0, 0.0, 1.0], 1e-8), "{:?}", r.point);
    assert!((r.value + 1.0).abs() < 1e-9);
    assert!(close(&expand_quasi(&g, &r.point), &[0.0, 0.0, 1.0, 1.0], 1e-8));
}

#[test]
fn quasi_needs_quasi_report() {
    let g = pang_fukushima(PfVariant::Original);
    assert!(matches!(build_quasi(&g, &detect_quasi_potential(&g)), Err(Error::Contract(_))));
    assert!(matches!(build_ae(&g, &detect_quasi_potential(&g)), Err(Error::Contract(_))));
}

#[test]
fn pf_quasi_plus_implicit_problem() {
    let g = pang_fukushima(PfVariant::QuasiPlus);
    let insts = build_imp(&g, &detect_implicit_potential(&g).unwrap()).unwrap();
    assert_eq!(insts.len(), 2);
    let r = epec_core::mpec::solve_global_many(&insts, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    // both branches reach −½ only at (0, 1)
    assert!(close(&r.point, &[0.0, 1.0], 1e-8), "{:?}", r.point);
    assert!((r.value + 0.5).abs() < 1e-9);
}

#[test]
fn empty_leader_set_is_infeasible() {
    let g = pang_fukushima(PfVariant::Shared);
    let mut inst = build_ae(&g, &detect_potential(&g)).unwrap();
    inst.polyhedral[0].set = Polyhedron::boxed(&[1.0], &[0.0]);
    let r = solve_global(&inst, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
}

#[test]
fn unbounded_linear_piece() {
    let g = pang_fukushima(PfVariant::Shared);
    let mut inst = build_ae(&g, &detect_potential(&g)).unwrap();
    // drop x₂'s upper bound: −½x₂ decreases without limit on the y = 0 piece
    inst.polyhedral[1].set = Polyhedron::from_rows(1, vec![vec![1.0]], vec![0.0]).unwrap();
    let r = solve_global(&inst, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Unbounded);
}

#[test]
fn pf_original_best_response_of_leader_two() {
    // with x₁ = 0, y₂ = max{0, 1 − x₂} and φ₂ = −½x₂ − y₂ = −1 + ½x₂ on [0, 1]
    let g = pang_fukushima(PfVariant::Original);
    let inst = build_best_response(&g, 1, &[0.0, 1.0, 0.0, 0.0]).unwrap();
    let r = solve_global(&inst, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(close(&r.point, &[0.0, 0.0, 0.0, 1.0], 1e-8), "{:?}", r.point);
    assert!((r.value + 1.0).abs() < 1e-9);
}

#[test]
fn pf_ae_best_response_is_pinned() {
    // y₁ = 0 must stay in S(0, x₂), so x₂ = 1 and then y₂ = 0
    let g = pang_fukushima(PfVariant::Shared);
    let inst = build_best_response(&g, 1, &[0.0, 0.3, 0.0, 0.7]).unwrap();
    let r = solve_global(&inst, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(close(&r.point, &[0.0, 1.0, 0.0, 0.0], 1e-8), "{:?}", r.point);
    assert!(matches!(
        build_best_response(&g, 2, &[0.0; 4]),
        Err(Error::Dimension { .. })
    ));
}

#[test]
fn best_response_with_empty_feasible_set() {
    // y₁ = 1 needs x₁ + x₂ = 0, but x₁ = 0.5 is fixed
    let g = pang_fukushima(PfVariant::Shared);
    let inst = build_best_response(&g, 1, &[0.5, 0.0, 1.0, 0.0]).unwrap();
    let r = solve_global(&inst, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
}

fn cournot_ae(a: f64, b: f64, c: f64, nl: usize, nf: usize) -> epec_core::mpec::MpecInstance {
    let g = cournot(&CournotParams { a, b, c, leaders: nl, followers: nf }, false).unwrap();
    build_ae(&g, &detect_potential(&g)).unwrap()
}

#[test]
fn cournot_local_descent_is_stationary_on_the_interior_piece() {
    let (a, b, c, nl, nf) = (10.0, 1.0, 1.0, 3usize, 2usize);
    let inst = cournot_ae(a, b, c, nl, nf);
    // x = 0 puts ŷ on its positive branch
    let yh = a / (c + b * (nf as f64 + 1.0));
    let mut start = vec![0.0; nl];
    start.extend(std::iter::repeat(yh).take(nl));
    let r = solve_local(&inst, &start, &SolveOptions::default()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(r.stationarity_residual <= 1e-8);
    let sx: f64 = r.point[..nl].iter().sum();
    for k in 0..nl {
        assert!((r.point[nl + k] - (a - b * sx) / (c + b * (nf as f64 + 1.0))).abs() < 1e-8);
    }
    assert!(inst.value(&r.point) < inst.value(&start));
}

#[test]
fn local_descent_keeps_a_global_minimiser() {
    let g = pang_fukushima(PfVariant::Shared);
    let inst = build_ae(&g, &detect_potential(&g)).unwrap();
    let r = solve_local(&inst, &[0.0, 1.0, 0.0, 0.0], &SolveOptions::default()).unwrap();
    assert!(close(&r.point, &[0.0, 1.0, 0.0, 0.0], 1e-12));
    assert!(r.stationarity_residual <= 1e-8);
}

#[test]
fn pf_ae_local_from_corner() {
    let g = pang_fukushima(PfVariant::Shared);
    let inst = build_ae(&g, &detect_potential(&g)).unwrap();
    let r = solve_local(&inst, &[1.0, 1.0, 0.0, 0.0], &SolveOptions::default()).unwrap();
    assert!(r.patterns.iter().all(|p| p.is_empty_set()));
    assert!(r.stationarity_residual <= 1e-8);
    // on y = 0 the piece is x₁ + x₂ ≥ 1; ½x₁ − ½x₂ is least at (0, 1)
    assert!(close(&r.point, &[0.0, 1.0, 0.0, 0.0], 1e-8), "{:?}", r.point);
}

#[test]
fn local_start_off_the_feasible_set() {
    let g = pang_fukushima(PfVariant::Shared);
    let inst = build_ae(&g, &detect_potential(&g)).unwrap();
    assert!(matches!(
        solve_local(&inst, &[0.0, 0.0, 0.0, 0.0], &SolveOptions::default()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn thread_count_does_not_change_the_answer() {
    let inst = cournot_ae(5.0, 0.5, 2.0, 3, 3);
    let one = solve_global(&inst, &SolveOptions::default()).unwrap();
    let four = solve_global(&inst, &SolveOptions { threads: 4, ..SolveOptions::default() }).unwrap();
    assert_eq!(one.patterns, four.patterns);
    assert!(close(&one.point, &four.point, 1e-12));
    assert!((one.value - four.value).abs() <= 1e-12);
}

#[test]
fn ae_rejects_formulations_without_potential() {
    let g = pang_fukushima(PfVariant::Original).with_formulation(Formulation::Ae).unwrap();
    let mut report = detect_potential(&g);
    report.kind = epec_core::structure::StructureKind::None;
    assert!(matches!(build_ae(&g, &report), Err(Error::Contract(_))));
}
