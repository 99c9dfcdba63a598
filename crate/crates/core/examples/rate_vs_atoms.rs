// Sum rate against the number of meta-atoms for sensing-only, communication-
// only and ISAC weights, at two stack depths.
//
//   cargo run --release --example rate_vs_atoms -- [realizations]

use std::path::Path;

use sim_isac::harness::{emit_figure_data, run_experiment, ExperimentSpec, FigureId, Preset};

pub fn run(quick: bool, out: &Path, realizations: usize) -> sim_isac::Result<()> {
    let mut spec = ExperimentSpec::preset(Preset::Fig3);
    spec.realizations = realizations;
    if quick {
        spec.sweep.atoms = vec![4, 9];
        spec.sweep.layers = vec![1];
        spec.optimizer.num_restarts = 1;
        spec.optimizer.max_iters = 3;
    }
    let report = run_experiment(&spec)?;
    println!("   M  L  w_sens w_comm  mean R_sum");
    for c in report.cells.iter().filter(|c| c.cell.w_sens + c.cell.w_comm > 0.0) {
        println!(
            "{:>4} {:>2}  {:>6} {:>6}  {:>10.3}",
            c.cell.atoms, c.cell.layers, c.cell.w_sens, c.cell.w_comm, c.stats.sum_rate.mean
        );
    }
    for f in emit_figure_data(&report, FigureId::Fig3, out)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> sim_isac::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let quick = args.iter().any(|a| a == "--quick");
    let n = args.iter().find_map(|a| a.parse().ok()).unwrap_or(2);
    run(quick, Path::new("out/rate_vs_atoms"), n)
}
