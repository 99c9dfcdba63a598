// One D³ run on one channel draw using the library directly: build the
// problem, optimize from random phases, and stream the per-iteration trace.
//
//   cargo run --release --example single_run -- 0.5 1.0      (w_sens w_comm)

use std::path::Path;

use sim_isac::channel::{db_to_linear, linear_to_db, sample_channel, LinkBudget, UserSpec};
use sim_isac::geometry::{GeometryParams, SimGeometry};
use sim_isac::metrics::{desired_pattern, AngleGrid, GridAnchor, TargetBin, TransmitConfig};
use sim_isac::optimizer::{run as d3, D3Config};
use sim_isac::problem::IsacProblem;
use sim_isac::seed;
use sim_isac::wavedomain::PhaseState;

pub fn run(quick: bool, out: &Path, w_sens: f64, w_comm: f64) -> sim_isac::Result<()> {
    let (side, layers) = if quick { (4, 2) } else { (10, 7) };
    let geometry = SimGeometry::new(&GeometryParams::square(side, layers, 6))?;
    let grid = AngleGrid::uniform(36, GridAnchor::LowerEdge)?;
    let budget = LinkBudget::default();
    let channel = sample_channel(&geometry, &UserSpec::reference_users(), &budget, 11)?;
    let problem = IsacProblem::new(
        &geometry,
        &grid,
        desired_pattern(&grid, &TargetBin::reference_targets(), false)?,
        &channel,
        TransmitConfig::new(db_to_linear(20.0), 4, 2)?,
        budget.noise_power_mw(),
    )?;

    let mut cfg = D3Config::default().with_weights(w_sens, w_comm);
    if quick {
        cfg.max_iters = 5;
    }
    let initial = PhaseState::random(geometry.atoms_per_layer(), layers, &mut seed::rng(5));
    let trace = d3(initial, &problem, &cfg, 5)?;
    println!(
        "start: R = {:.3} bit/s/Hz, J = {:.3} dB",
        trace.initial_sum_rate,
        linear_to_db(trace.initial_j_mse)
    );
    for r in &trace.records {
        println!(
            "{:>3}  mu = {:.2e}  R = {:8.3}  J = {:.4} dB",
            r.iteration,
            r.step,
            r.sum_rate,
            linear_to_db(r.j_mse)
        );
    }
    println!("stopped: {:?} after {} iterations", trace.reason, trace.iterations());

    std::fs::create_dir_all(out).map_err(|e| sim_isac::Error::io(out, e))?;
    let path = out.join("trace.jsonl");
    let file = std::fs::File::create(&path).map_err(|e| sim_isac::Error::io(&path, e))?;
    trace.write_jsonl(std::io::BufWriter::new(file))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> sim_isac::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let quick = args.iter().any(|a| a == "--quick");
    let w: Vec<f64> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let (w_sens, w_comm) = match w[..] {
        [s, c] => (s, c),
        _ => (1.0, 1.0),
    };
    run(quick, Path::new("out/single_run"), w_sens, w_comm)
}
