// Rate / beam-matching trade-off over a (w_sens, w_comm) grid. The default
// uses a 25-atom, 3-layer stack so the full 6 x 6 grid runs in minutes;
// `--full-size` switches to M = 100, L = 6.
//
//   cargo run --release --example weight_tradeoff -- [--full-size]

use std::path::Path;

use sim_isac::harness::config::weight_grid;
use sim_isac::harness::{emit_figure_data, run_experiment, ExperimentSpec, FigureId, Preset};

pub fn run(quick: bool, out: &Path, full_size: bool) -> sim_isac::Result<()> {
    let mut spec = ExperimentSpec::preset(Preset::Fig45);
    spec.realizations = 3;
    if !full_size {
        spec.sweep.atoms = vec![25];
        spec.sweep.layers = vec![3];
    }
    if quick {
        let w = weight_grid(0.5)?;
        spec.sweep.atoms = vec![4];
        spec.sweep.layers = vec![1];
        spec.sweep.w_sens = w.clone();
        spec.sweep.w_comm = w;
        spec.realizations = 1;
        spec.optimizer.num_restarts = 1;
        spec.optimizer.max_iters = 3;
    }
    let report = run_experiment(&spec)?;

    print!("mean R_sum   ");
    for wc in &spec.sweep.w_comm {
        print!("  w2={wc:<4}");
    }
    println!();
    for &ws in &spec.sweep.w_sens {
        print!("w1={ws:<4}     ");
        for &wc in &spec.sweep.w_comm {
            let c = report.cell(spec.sweep.atoms[0], spec.sweep.layers[0], ws, wc).expect("cell in sweep");
            print!("  {:>7.3}", c.stats.sum_rate.mean);
        }
        println!();
    }
    for f in emit_figure_data(&report, FigureId::Fig45, out)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> sim_isac::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let quick = args.iter().any(|a| a == "--quick");
    let full = args.iter().any(|a| a == "--full-size");
    run(quick, Path::new("out/weight_tradeoff"), full)
}
