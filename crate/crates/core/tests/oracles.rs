// Independent scalar re-computations of the geometry, beamformer, steering
// vectors and channel statistics.

use std::f64::consts::PI;

use ndarray::Array2;
use sim_isac::channel::{
    db_to_linear, linear_to_db, sample_channel, steering_vector, user_distance, LinkBudget, UserSpec,
    NLOS_RELATIVE_POWER,
};
use sim_isac::geometry::{build_diffraction_stack, GeometryParams, SimGeometry};
use sim_isac::metrics::{beam_matching_error, desired_pattern, AngleGrid, GridAnchor, SteeringTable, TargetBin};
use sim_isac::wavedomain::{beamforming_matrix, PhaseState};
use sim_isac::{seed, CMatrix, C64};

fn rs(area: f64, r: f64, cos: f64, lambda: f64) -> C64 {
    let phase = 2.0 * PI * r / lambda;
    let amp = area * cos / r;
    let (re, im) = (1.0 / (2.0 * PI * r), -1.0 / lambda);
    // (re + j im)(cos φ + j sin φ)
    C64::new(
        amp * (re * phase.cos() - im * phase.sin()),
        amp * (re * phase.sin() + im * phase.cos()),
    )
}

#[test]
fn diffraction_matrices_match_brute_force_coordinates() {
    let params = GeometryParams {
        rows: 3,
        cols: 2,
        num_layers: 3,
        num_feeds: 4,
        ..Default::default()
    };
    let g = SimGeometry::new(&params).unwrap();
    let stack = build_diffraction_stack(&g).unwrap();
    let lambda = g.wavelength();
    let (dy, dz) = (g.atom_spacing_y(), g.atom_spacing_z());
    let spacing = g.sim_thickness() / g.num_layers() as f64;
    let layer_x = |l: usize| -g.sim_thickness() + (l + 1) as f64 * spacing;
    let atom = |l: usize, m: usize| {
        let (r, c) = ((m / 2) as f64, (m % 2) as f64);
        [layer_x(l), (r - 1.0) * dy, (c - 0.5) * dz]
    };
    let feed = |n: usize| [layer_x(0) - g.feed_offset(), (n as f64 - 1.5) * g.feed_spacing(), 0.0];
    let coef = |s: [f64; 3], d: [f64; 3]| {
        let v = [d[0] - s[0], d[1] - s[1], d[2] - s[2]];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        rs(g.atom_area(), r, v[0] / r, lambda)
    };

    for m in 0..6 {
        for n in 0..4 {
            let want = coef(feed(n), atom(0, m));
            assert!((stack.w1[[m, n]] - want).norm() <= 1e-12 * want.norm());
        }
    }
    for l in 1..3 {
        for i in 0..6 {
            for j in 0..6 {
                let want = coef(atom(l - 1, j), atom(l, i));
                assert!((stack.wl[l - 1][[i, j]] - want).norm() <= 1e-12 * want.norm());
            }
        }
    }
}

#[test]
fn beamformer_matches_naive_loops() {
    let g = SimGeometry::new(&GeometryParams::square(3, 4, 2)).unwrap();
    let stack = build_diffraction_stack(&g).unwrap();
    let state = PhaseState::random(9, 4, &mut seed::rng(12));
    let f = beamforming_matrix(&state, &stack).unwrap();

    let mut x: CMatrix = Array2::zeros((9, 2));
    for m in 0..9 {
        for n in 0..2 {
            x[[m, n]] = C64::from_polar(1.0, state.get(m, 0)) * stack.w1[[m, n]];
        }
    }
    for l in 1..4 {
        let mut next: CMatrix = Array2::zeros((9, 2));
        for i in 0..9 {
            for n in 0..2 {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..9 {
                    acc += stack.wl[l - 1][[i, k]] * x[[k, n]];
                }
                next[[i, n]] = C64::from_polar(1.0, state.get(i, l)) * acc;
            }
        }
        x = next;
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    assert!((&f - &x).iter().all(|d| d.norm() <= 1e-12 * scale));
}

#[test]
fn steering_vectors_match_scalar_formula() {
    let params = GeometryParams {
        rows: 3,
        cols: 5,
        num_layers: 1,
        num_feeds: 1,
        ..Default::default()
    };
    let g = SimGeometry::new(&params).unwrap();
    let lambda = g.wavelength();
    for &(el, az) in &[(0.0, 0.0), (30.0, -20.0), (-75.0, 60.0), (45.0, 45.0)] {
        let a = steering_vector(&g, el, az);
        let (e, z) = (f64::to_radians(el), f64::to_radians(az));
        for r in 0..3 {
            for c in 0..5 {
                let phase = -2.0 * PI / lambda
                    * e.sin()
                    * (r as f64 * g.atom_spacing_y() * z.cos() + c as f64 * g.atom_spacing_z() * z.sin());
                let want = C64::new(phase.cos(), phase.sin());
                assert!((a[r * 5 + c] - want).norm() < 1e-12, "({el},{az}) atom {r},{c}");
            }
        }
    }
    // broadside is all ones
    assert!(steering_vector(&g, 0.0, 33.0).iter().all(|x| (x - C64::new(1.0, 0.0)).norm() < 1e-15));
}

#[test]
fn steering_table_columns_follow_elevation_major_order() {
    let g = SimGeometry::new(&GeometryParams::square(2, 1, 1)).unwrap();
    let grid = AngleGrid::uniform(4, GridAnchor::LowerEdge).unwrap();
    assert_eq!(grid.samples_deg(), &[-45.0, 0.0, 45.0, 90.0]);
    let table = SteeringTable::new(&g, &grid);
    for (j, &el) in grid.samples_deg().iter().enumerate() {
        for (k, &az) in grid.samples_deg().iter().enumerate() {
            let col = table.vectors().column(j * 4 + k).to_owned();
            assert_eq!(col, steering_vector(&g, el, az));
        }
    }
}

#[test]
fn reference_user_large_scale_gain_by_hand() {
    let user = &UserSpec::reference_users()[0];
    let d = user_distance(user).unwrap();
    assert!((d - 20.0).abs() < 1e-12);
    let budget = LinkBudget::default();
    // -32 + 5 + 0 - 35 log10(20)
    let want = -27.0 - 35.0 * 20f64.log10();
    assert!((budget.path_gain_db(d) - want).abs() < 1e-12);
    assert!((want + 72.536).abs() < 1e-3);
    assert!((linear_to_db(db_to_linear(-104.0)) + 104.0).abs() < 1e-12);
    assert!((budget.noise_power_mw() - 10f64.powf(-10.4)).abs() < 1e-24);
}

#[test]
fn channel_power_matches_model_in_expectation() {
    let users = UserSpec::reference_users();
    let budget = LinkBudget::default();
    let draws = 4000;
    for side in [2usize, 4] {
        let g = SimGeometry::new(&GeometryParams::square(side, 1, 1)).unwrap();
        let m = (side * side) as f64;
        let mut power = vec![0.0; users.len()];
        for s in 0..draws {
            let ch = sample_channel(&g, &users, &budget, seed::derive(77, s)).unwrap();
            for (p, row) in power.iter_mut().zip(ch.h.rows()) {
                *p += row.iter().map(|x| x.norm_sqr()).sum::<f64>() / draws as f64;
            }
        }
        for (u, p) in users.iter().zip(&power) {
            let q = u.num_paths as f64;
            let zeta = budget.path_gain(user_distance(u).unwrap());
            let want = m * m / q * zeta * (1.0 + NLOS_RELATIVE_POWER * (q - 1.0));
            let rel = (p / want - 1.0).abs();
            // LoS gain dominates: |g|² ~ Exp, so the mean of 4000 draws is within ~5 %.
            assert!(rel < 0.08, "M={m}: {p:e} vs {want:e}");
        }
    }
}

#[test]
fn channel_draws_are_seeded() {
    let g = SimGeometry::new(&GeometryParams::square(3, 1, 1)).unwrap();
    let users = UserSpec::reference_users();
    let b = LinkBudget::default();
    let a = sample_channel(&g, &users, &b, 5).unwrap();
    assert_eq!(a, sample_channel(&g, &users, &b, 5).unwrap());
    assert_ne!(a.h, sample_channel(&g, &users, &b, 6).unwrap().h);
    for angles in &a.path_angles {
        for &(el, az) in &angles[1..] {
            assert!((el - angles[0].0).abs() <= 5.0 && (az - angles[0].1).abs() <= 5.0);
        }
    }
}

#[test]
fn matching_error_by_hand() {
    let grid = AngleGrid::uniform(2, GridAnchor::LowerEdge).unwrap();
    let desired = desired_pattern(&grid, &[TargetBin::new(1, 2)], false).unwrap();
    let pattern = sim_isac::metrics::BeamPattern::from_raw(ndarray::array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
    // normalized = [.1 .2; .3 .4], residual [.1 -.8; .3 .4]
    let want = (0.01 + 0.64 + 0.09 + 0.16) / 4.0;
    assert!((beam_matching_error(&pattern, &desired).unwrap() - want).abs() < 1e-15);
}
