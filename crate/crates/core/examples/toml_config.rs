// Experiment configuration from TOML layered over the built-in defaults, and
// the validation error for an out-of-range value.
//
//   cargo run --release --example toml_config

use std::path::Path;

use sim_isac::harness::{run_experiment, ExperimentSpec};

const CONFIG: &str = r#"
realizations = 2
master_seed = 42

[scenario]
normalize_desired = true
total_power_dbm = 23.0
users = [
  { los_elevation_deg = 50.0, los_azimuth_deg = 20.0 },
  { los_elevation_deg = -40.0, los_azimuth_deg = -10.0 },
]
targets = [{ elevation = 12, azimuth = 30 }]

[sweep]
atoms = [36]
layers = [3]

[optimizer]
num_restarts = 2
"#;

pub fn run(quick: bool, _out: &Path) -> sim_isac::Result<()> {
    let mut spec = ExperimentSpec::from_toml_over(&ExperimentSpec::default(), CONFIG)?;
    if quick {
        spec.sweep.atoms = vec![4];
        spec.sweep.layers = vec![1];
        spec.optimizer.max_iters = 3;
    }
    println!(
        "{} users, {} target(s), P = {} dBm",
        spec.scenario.users.len(),
        spec.scenario.targets.len(),
        spec.scenario.total_power_dbm
    );
    let report = run_experiment(&spec)?;
    for r in &report.cells[0].records {
        println!("realization {}: R_sum {:.3}, J_MSE {:.3} dB", r.realization, r.sum_rate, r.j_mse_db);
    }

    let bad = ExperimentSpec::from_toml_over(&ExperimentSpec::default(), "[optimizer]\ndecay = 1.5\n");
    println!("decay = 1.5 -> {}", bad.unwrap_err());
    Ok(())
}

fn main() -> sim_isac::Result<()> {
    let quick = std::env::args().any(|a| a == "--quick");
    run(quick, Path::new("out/toml_config"))
}
