use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sim_isac::harness::config::weight_grid;
use sim_isac::harness::{
    emit_figure_data, gradcheck, load_spec, run_experiment, scaling_probe, ExperimentSpec, FigureId,
    MonteCarloReport, Preset, ProbeAxis, ProbeSizes,
};
use sim_isac::Result;

#[derive(Parser)]
#[command(name = "sim-isac", version, about = "SIM ISAC beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// TOML experiment file layered over the preset (or the defaults).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SpecArgs {
    fn resolve(&self) -> Result<ExperimentSpec> {
        let mut spec = load_spec(self.config.as_deref(), self.preset)?;
        if let Some(s) = self.seed {
            spec.master_seed = s;
        }
        if let Some(r) = self.realizations {
            spec.realizations = r;
        }
        if let Some(o) = &self.out {
            spec.output_dir = o.clone();
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo campaign and write report.json.
    Run {
        #[command(flatten)]
        spec: SpecArgs,
        /// Replace both weight axes with an even grid over [0, 1].
        #[arg(long)]
        weight_step: Option<f64>,
    },
    /// Write plot-ready CSVs from a report (or from a fresh preset run).
    Figure {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Figure to emit; defaults to the one matching --preset.
        #[arg(long, value_enum)]
        figure: Option<FigureId>,
    },
    /// Compare analytic gradients with central differences on one instance.
    Gradcheck {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = sim_isac::harness::gradcheck::DEFAULT_FD_STEP)]
        step: f64,
        /// Fail when either maximum relative error reaches this value.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long)]
        atoms: Option<usize>,
        #[arg(long)]
        layers: Option<usize>,
        /// Difference in double-double arithmetic.
        #[arg(long)]
        precise: bool,
    },
    /// Time one D³ iteration across sizes and fit log-log slopes.
    Probe {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_delimiter = ',')]
        atoms: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        layers: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        grid_points: Option<Vec<usize>>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
    },
}

fn figure_for(preset: Option<Preset>) -> Option<FigureId> {
    preset.map(|p| match p {
        Preset::Fig2 => FigureId::Fig2,
        Preset::Fig3 => FigureId::Fig3,
        Preset::Fig45 => FigureId::Fig45,
        Preset::Fig67 => FigureId::Fig67,
    })
}

fn print_report(report: &MonteCarloReport) {
    println!("atoms layers w_sens w_comm  sum_rate(mean)  j_mse_db(mean)  peak_hits  failed");
    for c in &report.cells {
        println!(
            "{:>5} {:>6} {:>6} {:>6}  {:>14.3}  {:>14.3}  {:>9.2}  {}",
            c.cell.atoms,
            c.cell.layers,
            c.cell.w_sens,
            c.cell.w_comm,
            c.stats.sum_rate.mean,
            c.stats.j_mse_db.mean,
            c.stats.peak_hit_rate,
            c.error.as_deref().unwrap_or("-"),
        );
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { spec, weight_step } => {
            let mut spec = spec.resolve()?;
            if let Some(step) = weight_step {
                let w = weight_grid(step)?;
                spec.sweep.w_sens = w.clone();
                spec.sweep.w_comm = w;
            }
            let report = run_experiment(&spec)?;
            std::fs::create_dir_all(&spec.output_dir)
                .map_err(|e| sim_isac::Error::io(&spec.output_dir, e))?;
            let path = spec.output_dir.join("report.json");
            report.write_json(&path)?;
            print_report(&report);
            println!("wrote {}", path.display());
            Ok(report.cells.iter().all(|c| c.error.is_none()))
        }
        Command::Figure { spec: args, report, figure } => {
            let figure = figure
                .or_else(|| figure_for(args.preset))
                .ok_or_else(|| sim_isac::Error::invalid("figure", "pass --figure or --preset"))?;
            let (report, out) = match report {
                Some(path) => {
                    let r = MonteCarloReport::read_json(&path)?;
                    let out = args.out.clone().unwrap_or_else(|| r.spec.output_dir.clone());
                    (r, out)
                }
                None => {
                    let spec = args.resolve()?;
                    let out = spec.output_dir.clone();
                    (run_experiment(&spec)?, out)
                }
            };
            for f in emit_figure_data(&report, figure, &out)? {
                println!("wrote {}", f.display());
            }
            Ok(true)
        }
        Command::Gradcheck { spec: args, step, tol, atoms, layers, precise } => {
            let mut spec = args.resolve()?;
            if let Some(m) = atoms {
                spec.sweep.atoms = vec![m];
            }
            if let Some(l) = layers {
                spec.sweep.layers = vec![l];
            }
            let dump = args.out.as_deref();
            let (report, files) = gradcheck(&spec, spec.master_seed, step, precise, dump)?;
            if let Some(dir) = dump {
                let path = dir.join("gradcheck.csv");
                report.write_csv(&path)?;
                println!("wrote {}", path.display());
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            println!(
                "M={} L={} seed={} step={:e}: sensing max rel err {:.3e}, comm max rel err {:.3e}",
                report.atoms,
                report.layers,
                report.seed,
                report.step,
                report.sensing_max_rel_error,
                report.comm_max_rel_error
            );
            let ok = report.passes(tol);
            println!("{}", if ok { "PASS" } else { "FAIL" });
            Ok(ok)
        }
        Command::Probe {
            spec: args,
            atoms,
            layers,
            grid_points,
            iterations,
            repeats,
        } => {
            let spec = args.resolve()?;
            let d = ProbeSizes::default();
            let sizes = ProbeSizes {
                atoms: atoms.unwrap_or(d.atoms),
                layers: layers.unwrap_or(d.layers),
                grid_points: grid_points.unwrap_or(d.grid_points),
                iterations: iterations.unwrap_or(d.iterations),
                repeats: repeats.unwrap_or(d.repeats),
                ..d
            };
            let table = scaling_probe(&spec, &sizes)?;
            println!("axis        M    L   N_D  s/iter");
            for r in &table.rows {
                println!(
                    "{:<10} {:>4} {:>4} {:>4}  {:.4e}",
                    format!("{:?}", r.axis),
                    r.atoms,
                    r.layers,
                    r.grid_points,
                    r.seconds_per_iteration
                );
            }
            for axis in [ProbeAxis::Atoms, ProbeAxis::Layers, ProbeAxis::GridPoints] {
                println!("slope vs {:?}: {:.3}", axis, table.slope(axis));
            }
            if let Some(dir) = &args.out {
                std::fs::create_dir_all(dir).map_err(|e| sim_isac::Error::io(dir, e))?;
                let path = dir.join("probe.csv");
                table.write_csv(&path)?;
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
