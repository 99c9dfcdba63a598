// Per-iteration wall time versus M, L and N_D with fitted log-log slopes.
//
//   cargo run --release --example scaling_probe

use std::path::Path;

use sim_isac::harness::{scaling_probe, ExperimentSpec, ProbeAxis, ProbeSizes};

pub fn run(quick: bool, out: &Path) -> sim_isac::Result<()> {
    let sizes = if quick {
        ProbeSizes {
            atoms: vec![4, 8, 16],
            layers: vec![1, 2, 3],
            grid_points: vec![4, 8, 16],
            base: (8, 2, 8),
            iterations: 2,
            repeats: 1,
        }
    } else {
        ProbeSizes::default()
    };
    let table = scaling_probe(&ExperimentSpec::default(), &sizes)?;
    for r in &table.rows {
        println!(
            "{:?}: M={:<4} L={:<2} N_D={:<3} {:.3e} s/iter",
            r.axis, r.atoms, r.layers, r.grid_points, r.seconds_per_iteration
        );
    }
    for axis in [ProbeAxis::Atoms, ProbeAxis::Layers, ProbeAxis::GridPoints] {
        println!("slope vs {axis:?}: {:.2}", table.slope(axis));
    }
    std::fs::create_dir_all(out).map_err(|e| sim_isac::Error::io(out, e))?;
    table.write_csv(&out.join("probe.csv"))
}

fn main() -> sim_isac::Result<()> {
    let quick = std::env::args().any(|a| a == "--quick");
    run(quick, Path::new("out/scaling_probe"))
}
