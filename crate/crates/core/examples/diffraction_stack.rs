// Builds the feed-to-layer and layer-to-layer diffraction matrices for a
// stacked metasurface and propagates a zero-phase configuration through it.
//
//   cargo run --release --example diffraction_stack
//   cargo run --release --example diffraction_stack -- --quick

use std::path::Path;

use sim_isac::geometry::{build_diffraction_stack, GeometryParams, SimGeometry};
use sim_isac::wavedomain::{beamforming_matrix, PhaseState};

pub fn run(quick: bool, _out: &Path) -> sim_isac::Result<()> {
    let (side, layers) = if quick { (3, 2) } else { (10, 7) };
    let geometry = SimGeometry::new(&GeometryParams::square(side, layers, 6))?;
    println!(
        "lambda = {:.4} mm, layer spacing = {:.4} mm",
        geometry.wavelength() * 1e3,
        geometry.layer_spacing() * 1e3
    );
    for l in 0..layers {
        println!("layer {l}: x = {:+.4} mm", geometry.layer_x(l)? * 1e3);
    }

    let stack = build_diffraction_stack(&geometry)?;
    println!("W1 is {:?}, {} inter-layer matrices of {:?}", stack.w1.dim(), stack.wl.len(), stack.w1.nrows());
    let strongest = stack.w1.iter().map(|c| c.norm()).fold(0.0, f64::max);
    println!("largest |W1| entry: {strongest:.4e}");

    let f = beamforming_matrix(&PhaseState::zeros(geometry.atoms_per_layer(), layers), &stack)?;
    for (n, col) in f.columns().into_iter().enumerate() {
        let norm: f64 = col.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        println!("feed {n}: |F[:, n]| = {norm:.4e}");
    }
    Ok(())
}

fn main() -> sim_isac::Result<()> {
    let quick = std::env::args().any(|a| a == "--quick");
    run(quick, Path::new("out/diffraction_stack"))
}
