#![allow(dead_code)]

use rand::Rng;
use sim_isac::channel::{sample_channel, LinkBudget, UserSpec};
use sim_isac::geometry::{GeometryParams, SimGeometry};
use sim_isac::metrics::{desired_pattern, AngleGrid, GridAnchor, TargetBin, TransmitConfig};
use sim_isac::problem::IsacProblem;
use sim_isac::seed;

/// Small random instance: two users, one target, `rows x cols <= 16`,
/// up to three layers and an `N_D <= 8` grid.
pub fn random_instance(instance_seed: u64) -> (IsacProblem, SimGeometry) {
    let mut rng = seed::rng(instance_seed);
    let rows = rng.random_range(1..=4);
    let cols = rng.random_range(2..=4);
    let layers = rng.random_range(1..=3);
    let n_d = rng.random_range(2..=8);
    let geometry = SimGeometry::new(&GeometryParams {
        rows,
        cols,
        num_layers: layers,
        num_feeds: 3,
        ..Default::default()
    })
    .unwrap();
    let users: Vec<_> = (0..2)
        .map(|_| UserSpec::new(rng.random_range(-70.0..70.0), rng.random_range(-70.0..70.0)))
        .collect();
    let budget = LinkBudget::default();
    let channel = sample_channel(&geometry, &users, &budget, rng.random()).unwrap();
    let grid = AngleGrid::uniform(n_d, GridAnchor::LowerEdge).unwrap();
    let target = TargetBin::new(rng.random_range(1..=n_d), rng.random_range(1..=n_d));
    let desired = desired_pattern(&grid, &[target], false).unwrap();
    let tx = TransmitConfig::new(100.0, 2, 1).unwrap();
    let problem =
        IsacProblem::new(&geometry, &grid, desired, &channel, tx, budget.noise_power_mw()).unwrap();
    (problem, geometry)
}
