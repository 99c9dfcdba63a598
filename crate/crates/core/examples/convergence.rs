// Iteration-indexed R_sum and J_MSE across channel realizations, plus the
// distribution of iterations to the stopping rule.
//
//   cargo run --release --example convergence -- [realizations]

use std::path::Path;

use sim_isac::harness::{emit_figure_data, run_experiment, ExperimentSpec, FigureId, Preset};

pub fn run(quick: bool, out: &Path, realizations: usize) -> sim_isac::Result<()> {
    let mut spec = ExperimentSpec::preset(Preset::Fig67);
    spec.realizations = realizations;
    spec.optimizer.num_restarts = 1;
    if quick {
        spec.sweep.atoms = vec![9];
        spec.sweep.layers = vec![2];
        spec.optimizer.max_iters = 6;
    }
    let report = run_experiment(&spec)?;
    let stats = &report.cells[0].stats;
    println!(
        "mean R_sum {:.3} bit/s/Hz (p10 {:.3}, p90 {:.3})",
        stats.sum_rate.mean, stats.sum_rate.p10, stats.sum_rate.p90
    );
    println!("iterations to stop: {:?}", stats.iteration_histogram);
    for f in emit_figure_data(&report, FigureId::Fig67, out)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> sim_isac::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let quick = args.iter().any(|a| a == "--quick");
    let n = args.iter().find_map(|a| a.parse().ok()).unwrap_or(5);
    run(quick, Path::new("out/convergence"), n)
}
