// Analytic phase gradients of both objectives against central differences on
// a random instance, with the four gradient matrices dumped as CSV.
//
//   cargo run --release --example gradient_check

use std::path::Path;

use sim_isac::harness::gradcheck::{gradcheck, DEFAULT_FD_STEP};
use sim_isac::harness::ExperimentSpec;

pub fn run(quick: bool, out: &Path) -> sim_isac::Result<()> {
    let mut spec = ExperimentSpec::default();
    spec.sweep.atoms = vec![if quick { 4 } else { 16 }];
    spec.sweep.layers = vec![if quick { 2 } else { 3 }];
    if quick {
        spec.scenario.grid.points = 8;
        spec.scenario.targets.iter_mut().for_each(|t| {
            t.elevation = t.elevation.min(8);
            t.azimuth = t.azimuth.min(8);
        });
    }
    let (report, files) = gradcheck(&spec, 21, DEFAULT_FD_STEP, true, Some(out))?;
    let worst = report
        .entries
        .iter()
        .max_by(|a, b| (a.comm_analytic - a.comm_fd).abs().total_cmp(&(b.comm_analytic - b.comm_fd).abs()))
        .expect("non-empty");
    println!("largest sum-rate discrepancy at atom {}, layer {}: {:.6e} vs {:.6e}", worst.atom, worst.layer, worst.comm_analytic, worst.comm_fd);
    println!(
        "max relative error: sensing {:.2e}, communication {:.2e}",
        report.sensing_max_rel_error, report.comm_max_rel_error
    );
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> sim_isac::Result<()> {
    let quick = std::env::args().any(|a| a == "--quick");
    run(quick, Path::new("out/gradient_check"))
}
