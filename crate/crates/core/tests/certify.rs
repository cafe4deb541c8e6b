use epec_core::catalog::{cournot, pang_fukushima, CournotParams, PfVariant};
use epec_core::certify::{
    check_b_stationary, check_nash_b_stationary, check_second_order_ss, check_shared_multiplier_form,
    check_strong_stationary, transfer_multipliers, verify_global, verify_local, Claim, DEFAULT_EPS,
};
use epec_core::mpec::{build_ae, build_best_response, solve_global, SolveOptions};
use epec_core::structure::detect_potential;
use epec_core::{Error, Formulation, Game, LeaderProblem, ParametricLcp, Polyhedron, Polynomial, VariableLayout};
use nalgebra::{DMatrix, DVector};

fn opts() -> SolveOptions {
    SolveOptions::default()
}

#[test]
fn pf_shared_minimiser_is_a_global_equilibrium() {
    let g = pang_fukushima(PfVariant::Shared);
    let c = verify_global(&g, &[0.0, 1.0, 0.0, 0.0], DEFAULT_EPS, &opts()).unwrap();
    assert_eq!(c.claim, Claim::GlobalEq, "{}", c.detail);
    assert!(c.gaps.iter().all(|&x| x <= DEFAULT_EPS));
}

#[test]
fn pf_original_leader_two_deviates() {
    // y₂ = 1 − x₂ once x₁ = 0, so leader 2 moves to x₂ = 0 and gets −1 instead of −½
    let g = pang_fukushima(PfVariant::Original);
    let c = verify_global(&g, &[0.0, 1.0, 0.0, 0.0], DEFAULT_EPS, &opts()).unwrap();
    assert_eq!(c.claim, Claim::NotGlobalEq);
    assert!(c.gaps[0].abs() <= 1e-9);
    assert!((c.gaps[1] - 0.5).abs() <= 1e-9, "{:?}", c.gaps);
    assert_eq!(c.deviations.len(), 1);
    assert_eq!(c.deviations[0].leader, 1);
    assert!((c.deviations[0].value + 1.0).abs() <= 1e-9);
}

#[test]
fn pf_quasi_minus_point_is_a_local_equilibrium() {
    let g = pang_fukushima(PfVariant::QuasiMinus);
    let c = verify_local(&g, &[0.0, 0.0, 1.0, 1.0], 0.1, &opts()).unwrap();
    assert_eq!(c.claim, Claim::LocalEq, "{}", c.detail);
    assert!(matches!(
        verify_local(&g, &[0.0, 0.0, 1.0, 1.0], 0.0, &opts()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn verification_needs_a_feasible_point() {
    let g = pang_fukushima(PfVariant::Original);
    assert!(matches!(
        verify_global(&g, &[0.0, 0.0, 0.0, 0.0], DEFAULT_EPS, &opts()),
        Err(Error::Precondition(_))
    ));
}

fn cournot_instance(a: f64, b: f64, c: f64, nl: usize, nf: usize) -> (Game, epec_core::mpec::MpecInstance) {
    let g = cournot(&CournotParams { a, b, c, leaders: nl, followers: nf }, false).unwrap();
    let inst = build_ae(&g, &detect_potential(&g)).unwrap();
    (g, inst)
}

#[test]
fn cournot_minimiser_is_strongly_stationary_and_transfers() {
    for (a, b, c, nl, nf) in [(10.0, 1.0, 1.0, 3, 2), (1.0, 1.0, 1.0, 2, 1), (5.0, 0.5, 2.0, 4, 3)] {
        let (g, inst) = cournot_instance(a, b, c, nl, nf);
        let r = solve_global(&inst, &opts()).unwrap();
        let ss = check_strong_stationary(&inst, &r.point).unwrap();
        assert_eq!(ss.claim, Claim::StrongStationary, "{}", ss.detail);
        assert!(ss.residual.unwrap() <= 1e-8);
        let t = transfer_multipliers(&g, &inst, &r.point, &ss).unwrap();
        assert_eq!(t.claim, Claim::MultiplierTransfer);
        assert_eq!(t.leader_multipliers.len(), nl);
        assert!(t.residual.unwrap() <= 1e-8);
        let b = check_b_stationary(&inst, &r.point).unwrap();
        assert_eq!(b.claim, Claim::BStationary);
    }
}

#[test]
fn transfer_needs_strong_stationarity() {
    let (g, inst) = cournot_instance(10.0, 1.0, 1.0, 3, 2);
    let r = solve_global(&inst, &opts()).unwrap();
    let mut ss = check_strong_stationary(&inst, &r.point).unwrap();
    ss.claim = Claim::NotStrongStationary;
    assert!(matches!(transfer_multipliers(&g, &inst, &r.point, &ss), Err(Error::Precondition(_))));
}

#[test]
fn cournot_origin_has_a_descent_direction() {
    let (a, b, c, nl, nf) = (10.0, 1.0, 1.0, 3, 2);
    let (_, inst) = cournot_instance(a, b, c, nl, nf);
    let yh = a / (c + b * (nf as f64 + 1.0));
    let mut z = vec![0.0; nl];
    z.extend(std::iter::repeat(yh).take(nl));
    let cert = check_b_stationary(&inst, &z).unwrap();
    assert_eq!(cert.claim, Claim::NotBStationary);
    let d = cert.direction.unwrap();
    // a short step along the direction stays feasible and lowers the objective
    let t = 1e-4;
    let moved: Vec<f64> = z.iter().zip(&d).map(|(p, q)| p + t * q).collect();
    assert!(inst.is_feasible(&moved, 1e-9), "{moved:?}");
    assert!(inst.value(&moved) < inst.value(&z));
}

#[test]
fn pf_shared_minimiser_is_b_stationary_but_not_strongly() {
    let g = pang_fukushima(PfVariant::Shared);
    let inst = build_ae(&g, &detect_potential(&g)).unwrap();
    let z = [0.0, 1.0, 0.0, 0.0];
    assert_eq!(check_b_stationary(&inst, &z).unwrap().claim, Claim::BStationary);
    assert_eq!(check_nash_b_stationary(&g, &z).unwrap().claim, Claim::NashBStationary);
    // the y₂ column needs λ₂ + β₂ = −1 with both multipliers nonnegative
    let ss = check_strong_stationary(&inst, &z).unwrap();
    assert_eq!(ss.claim, Claim::NotStrongStationary);
    assert_eq!(check_shared_multiplier_form(&g, &z).unwrap().claim, Claim::Inconclusive);
}

#[test]
fn pf_original_point_is_not_nash_b_stationary() {
    let g = pang_fukushima(PfVariant::Original);
    let c = check_nash_b_stationary(&g, &[0.0, 1.0, 0.0, 0.0]).unwrap();
    assert_eq!(c.claim, Claim::NotBStationary);
}

#[test]
fn cournot_shared_form_selects_the_original_equilibrium() {
    let (g, inst) = cournot_instance(10.0, 1.0, 1.0, 3, 2);
    // symmetric equilibrium of the game without shared constraints
    let x = 5.0 / 3.0;
    let y = (10.0 - 3.0 * x) / 4.0;
    let z = [x, x, x, y, y, y];
    let c = check_shared_multiplier_form(&g, &z).unwrap();
    assert_eq!(c.claim, Claim::SharedMultiplierForm, "{}", c.detail);
    assert!(c.residual.unwrap() <= 1e-8);
    let original = g.with_formulation(Formulation::Original).unwrap();
    assert_eq!(verify_global(&original, &z, DEFAULT_EPS, &opts()).unwrap().claim, Claim::GlobalEq);
    assert_eq!(verify_global(&g, &z, DEFAULT_EPS, &opts()).unwrap().claim, Claim::GlobalEq);

    // the potential minimiser is an equilibrium only of the shared-constraint game
    let r = solve_global(&inst, &opts()).unwrap();
    let c = check_shared_multiplier_form(&g, &r.point).unwrap();
    assert_eq!(c.claim, Claim::ModifiedGameOnly);
    assert!((c.residual.unwrap() - 1.25).abs() < 1e-8);
    assert_eq!(verify_global(&g, &r.point, DEFAULT_EPS, &opts()).unwrap().claim, Claim::GlobalEq);
    assert_eq!(verify_global(&original, &r.point, DEFAULT_EPS, &opts()).unwrap().claim, Claim::NotGlobalEq);
}

#[test]
fn cournot_equality_multipliers() {
    for (a, b, c, nl, nf) in [(10.0, 1.0, 1.0, 3, 2), (1.0, 1.0, 1.0, 2, 1), (5.0, 0.5, 2.0, 4, 3)] {
        let (_, inst) = cournot_instance(a, b, c, nl, nf);
        let r = solve_global(&inst, &opts()).unwrap();
        let m = check_strong_stationary(&inst, &r.point).unwrap().multipliers.unwrap();
        let bar = m.equality_form(&inst, &r.point);
        for i in 0..nl {
            assert!((bar[i][0] + nf as f64 * b * r.point[i]).abs() < 1e-8, "{bar:?}");
            assert_eq!(m.lambda[i][0], 0.0);
        }
    }
}

/// One leader, one follower with `y = max{0, 1 − x}`.
fn one_leader(objective: Polynomial) -> Game {
    one_leader_on(objective, 1.0)
}

fn one_leader_on(objective: Polynomial, half_width: f64) -> Game {
    let leader = LeaderProblem {
        objective,
        x_set: Polyhedron::boxed(&[-half_width], &[half_width]),
        y_set: Polyhedron::whole_space(1),
    };
    let follower = ParametricLcp::new(
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
        DVector::from_element(1, -1.0),
    )
    .unwrap();
    Game::new(vec![leader], follower, Formulation::Original, VariableLayout::new(vec![1], 1)).unwrap()
}

fn quadratic(xx: f64, yy: f64) -> Polynomial {
    let a = Polynomial::monomial(2, vec![2, 0], xx).unwrap();
    let b = Polynomial::monomial(2, vec![0, 2], yy).unwrap();
    &a + &b
}

#[test]
fn second_order_holds_for_a_convex_objective() {
    // x² + y² on y = 1 − x is least at x = y = ½
    let g = one_leader(quadratic(1.0, 1.0));
    let z = [0.5, 0.5];
    let inst = build_best_response(&g, 0, &z).unwrap();
    let ss = check_strong_stationary(&inst, &z).unwrap();
    assert_eq!(ss.claim, Claim::StrongStationary);
    let m = ss.multipliers.unwrap();
    assert!((m.beta[0][0] - 1.0).abs() < 1e-9, "{m:?}");
    let so = check_second_order_ss(&inst, &z, &m, 0).unwrap();
    assert_eq!(so.claim, Claim::SecondOrderSs);
    assert!(so.flags.is_empty());
}

#[test]
fn second_order_fails_on_negative_curvature() {
    // −x² is stationary at x = 0 with zero multipliers and curves down
    let g = one_leader(quadratic(-1.0, 0.0));
    let z = [0.0, 1.0];
    let inst = build_best_response(&g, 0, &z).unwrap();
    let ss = check_strong_stationary(&inst, &z).unwrap();
    assert_eq!(ss.claim, Claim::StrongStationary);
    let so = check_second_order_ss(&inst, &z, ss.multipliers.as_ref().unwrap(), 0).unwrap();
    assert_eq!(so.claim, Claim::NotSecondOrderSs);
    let d = so.direction.unwrap();
    assert!(d[0].abs() > 0.5 && (d[0] + d[1]).abs() < 1e-9, "{d:?}");
    assert!(so.residual.unwrap() < 0.0);
}

#[test]
fn second_order_rejects_bad_multipliers() {
    let g = one_leader(quadratic(1.0, 1.0));
    let z = [0.5, 0.5];
    let inst = build_best_response(&g, 0, &z).unwrap();
    let mut m = check_strong_stationary(&inst, &z).unwrap().multipliers.unwrap();
    m.beta[0][0] = 3.0;
    assert!(matches!(check_second_order_ss(&inst, &z, &m, 0), Err(Error::Precondition(_))));
}

fn poly(terms: &[([u32; 2], f64)]) -> Polynomial {
    terms
        .iter()
        .map(|&(e, c)| Polynomial::monomial(2, e.to_vec(), c).unwrap())
        .fold(Polynomial::linear(&[0.0, 0.0], 0.0), |acc, t| &acc + &t)
}

/// `½(x−1)² + k(x−1)y + 3y²`, stationary with zero multipliers at the
/// biactive kink `(1, 0)`; the cone `{d_y ≥ 0, d_x + d_y ≥ 0}` has rays
/// `(1, 0)` and `(−1, 1)`.
fn kinked(k: f64) -> Game {
    let obj = poly(&[([2, 0], 0.5), ([1, 0], -1.0), ([0, 0], 0.5), ([1, 1], k), ([0, 1], -k), ([0, 2], 3.0)]);
    one_leader_on(obj, 2.0)
}

#[test]
fn second_order_copositive_but_indefinite() {
    // H = [[1, 3], [3, 6]] is indefinite; on the rays it is [[1, 2], [2, 1]]
    let g = kinked(3.0);
    let z = [1.0, 0.0];
    let inst = build_best_response(&g, 0, &z).unwrap();
    let ss = check_strong_stationary(&inst, &z).unwrap();
    assert_eq!(ss.claim, Claim::StrongStationary);
    let so = check_second_order_ss(&inst, &z, ss.multipliers.as_ref().unwrap(), 0).unwrap();
    assert_eq!(so.claim, Claim::SecondOrderSs, "{}", so.detail);
    assert_eq!(so.branches_checked, 2);
    assert!(so.flags.is_empty());
}

#[test]
fn second_order_witness_inside_a_pointed_cone() {
    // on the rays H becomes [[1, −4], [−4, 13]], not copositive
    let g = kinked(-3.0);
    let z = [1.0, 0.0];
    let inst = build_best_response(&g, 0, &z).unwrap();
    let ss = check_strong_stationary(&inst, &z).unwrap();
    let so = check_second_order_ss(&inst, &z, ss.multipliers.as_ref().unwrap(), 0).unwrap();
    assert_eq!(so.claim, Claim::NotSecondOrderSs);
    let d = so.direction.unwrap();
    assert!(d[1] >= -1e-12 && d[0] + d[1] >= -1e-12, "{d:?}");
    let curv = d[0] * d[0] - 6.0 * d[0] * d[1] + 6.0 * d[1] * d[1];
    assert!(curv < 0.0);
}

#[test]
fn claims_round_trip() {
    for s in ["global_eq", "not_b_stationary", "modified_game_only", "inconclusive"] {
        assert_eq!(s.parse::<Claim>().unwrap().to_string(), s);
    }
    assert!("nope".parse::<Claim>().is_err());
}
