mod common;

use ndarray::Array2;
use sim_isac::geometry::{build_diffraction_stack, GeometryParams, SimGeometry};
use sim_isac::gradients::{
    fd_gradient, grad_comm, grad_sensing, layer_factors, max_relative_error, precise,
};
use sim_isac::metrics::{desired_pattern, AngleGrid, GridAnchor, TargetBin, TransmitConfig};
use sim_isac::wavedomain::PhaseState;
use sim_isac::{seed, C64};

const FD_STEP: f64 = 1e-6;
const FLOOR: f64 = 1e-9;

#[test]
fn analytic_gradients_match_central_differences() {
    for s in 0..20 {
        let (problem, _) = common::random_instance(1000 + s);
        let state = PhaseState::random(problem.atoms(), problem.layers(), &mut seed::rng(s));
        let analytic = problem.gradients(&state).unwrap();
        let (fd_j, fd_r) = precise::fd_gradients(&problem, &state, FD_STEP).unwrap();
        let ej = max_relative_error(&analytic.sensing, &fd_j, FLOOR);
        let er = max_relative_error(&analytic.comm, &fd_r, FLOOR);
        assert!(ej < 1e-4, "instance {s}: sensing rel err {ej:e}");
        assert!(er < 1e-4, "instance {s}: comm rel err {er:e}");
    }
}

#[test]
fn plain_and_double_double_differences_agree_on_large_entries() {
    let (problem, _) = common::random_instance(4242);
    let state = PhaseState::random(problem.atoms(), problem.layers(), &mut seed::rng(9));
    let (dd_j, dd_r) = precise::fd_gradients(&problem, &state, FD_STEP).unwrap();
    let fd_j = fd_gradient(|st| Ok(problem.evaluate(st)?.j_mse), &state, FD_STEP).unwrap();
    let fd_r = fd_gradient(|st| Ok(problem.evaluate(st)?.sum_rate), &state, FD_STEP).unwrap();
    let scale_j = dd_j.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale_r = dd_r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(max_relative_error(&fd_j, &dd_j, 1e-3 * scale_j) < 1e-3);
    assert!(max_relative_error(&fd_r, &dd_r, 1e-3 * scale_r) < 1e-3);
    assert!(precise::fd_gradients(&problem, &state, 0.0).is_err());
    assert!(precise::fd_gradients(&problem, &PhaseState::zeros(1, 1), FD_STEP).is_err());
}

#[test]
fn sensing_gradient_vanishes_on_the_desired_pattern() {
    // Desired pattern set to the pattern itself: the residual is zero everywhere.
    let (problem, _) = common::random_instance(77);
    let state = PhaseState::random(problem.atoms(), problem.layers(), &mut seed::rng(1));
    let pattern = problem.pattern(&state).unwrap();
    let mut desired = problem.desired.clone();
    desired.matrix = pattern.normalized.clone();
    let factors = layer_factors(&state, &problem.stack).unwrap();
    let g = sim_isac::gradients::grad_sensing_with(&factors, &problem.steering, &desired).unwrap();
    assert!(g.iter().all(|x| x.abs() < 1e-18), "{g:?}");
}

#[test]
fn gradients_are_two_pi_periodic() {
    let (problem, _) = common::random_instance(5);
    let state = PhaseState::random(problem.atoms(), problem.layers(), &mut seed::rng(2));
    let shifted = state.perturbed(0, 0, 2.0 * std::f64::consts::PI);
    let a = problem.gradients(&state).unwrap();
    let b = problem.gradients(&shifted).unwrap();
    assert!(max_relative_error(&a.sensing, &b.sensing, 1e-12) < 1e-9);
    assert!(max_relative_error(&a.comm, &b.comm, 1e-9) < 1e-9);
}

#[test]
fn composition_identity_on_four_layers() {
    let geometry = SimGeometry::new(&GeometryParams::square(3, 4, 2)).unwrap();
    let stack = build_diffraction_stack(&geometry).unwrap();
    for s in 0..5 {
        let state = PhaseState::random(9, 4, &mut seed::rng(s));
        assert!(layer_factors(&state, &stack).unwrap().composition_error() < 1e-10);
    }
}

/// One atom, one layer, one feed: P(θ) = |w a|² has no θ dependence on a
/// single-element aperture and the matching error gradient is zero; with
/// one user on one stream, R(θ) = log2(1 + c²|h w|²/σ²) is also phase-free.
/// Both gradients must vanish.
#[test]
fn single_atom_single_feed_is_phase_invariant() {
    let geometry = SimGeometry::new(&GeometryParams {
        rows: 1,
        cols: 1,
        num_layers: 1,
        num_feeds: 1,
        ..Default::default()
    })
    .unwrap();
    let stack = build_diffraction_stack(&geometry).unwrap();
    let grid = AngleGrid::uniform(3, GridAnchor::LowerEdge).unwrap();
    let desired = desired_pattern(&grid, &[TargetBin::new(2, 2)], false).unwrap();
    let state = PhaseState::new(Array2::from_elem((1, 1), 1.3));
    let gs = grad_sensing(&state, &stack, &grid, &desired, &geometry).unwrap();
    assert!(gs[[0, 0]].abs() < 1e-15);
    let h = Array2::from_elem((1, 1), C64::new(0.3, -0.4));
    let gc = grad_comm(&state, &stack, &h, &TransmitConfig::new(1.0, 1, 0).unwrap(), 1e-3).unwrap();
    assert!(gc[[0, 0]].abs() < 1e-15);
}

/// Two atoms, one layer, one user on a single stream. With `B_m = c h_m w_m e^{jθ_m}`
/// the received amplitude is `s = B_1 + B_2`, so by hand
/// `d|s|²/dθ_1 = -2 Im{B_1 conj(B_2)} = -2 |B_1||B_2| sin(∠B_1 - ∠B_2)` and
/// `dR/dθ_1 = (d|s|²/dθ_1) / ((σ² + |s|²) ln 2)`.
#[test]
fn two_atom_chain_matches_hand_derivative() {
    let geometry = SimGeometry::new(&GeometryParams {
        rows: 1,
        cols: 2,
        num_layers: 1,
        num_feeds: 1,
        ..Default::default()
    })
    .unwrap();
    let stack = build_diffraction_stack(&geometry).unwrap();
    let h = ndarray::array![[C64::new(0.8, 0.1), C64::new(-0.2, 0.5)]];
    let cfg = TransmitConfig::new(2.0, 1, 0).unwrap();
    let noise = 1e-3;
    let state = PhaseState::new(ndarray::array![[0.4], [2.1]]);
    let c = cfg.stream_amplitude();
    let b: Vec<C64> = (0..2).map(|m| c * h[[0, m]] * stack.w1[[m, 0]]).collect();
    let (t1, t2) = (0.4f64, 2.1f64);
    let phase = |b: C64, t: f64| b.arg() + t;
    let s2 = (b[0] * C64::from_polar(1.0, t1) + b[1] * C64::from_polar(1.0, t2)).norm_sqr();
    let ds2_d1 = -2.0 * b[0].norm() * b[1].norm() * (phase(b[0], t1) - phase(b[1], t2)).sin();
    let expect_1 = ds2_d1 / ((noise + s2) * std::f64::consts::LN_2);
    let g = grad_comm(&state, &stack, &h, &cfg, noise).unwrap();
    assert!((g[[0, 0]] - expect_1).abs() < 1e-9 * expect_1.abs().max(1.0), "{} vs {}", g[[0, 0]], expect_1);
    // the two partials cancel: R depends only on θ_1 - θ_2
    assert!((g[[0, 0]] + g[[1, 0]]).abs() < 1e-9 * expect_1.abs().max(1.0));
}
