//! Empirical per-iteration cost of D³ versus M, L and N_D.
//!
//! Each axis is swept with the other two held at the base size. A timed run
//! uses a fixed iteration count (`rel_tol = 0`) from a seeded random state, on
//! the calling thread, and reports the fastest of `repeats` runs.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentSpec;
use crate::channel::sample_channel;
use crate::metrics::AngleGrid;
use crate::optimizer::{run, StopReason};
use crate::problem::IsacProblem;
use crate::wavedomain::PhaseState;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeAxis {
    Atoms,
    Layers,
    GridPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSizes {
    pub atoms: Vec<usize>,
    pub layers: Vec<usize>,
    pub grid_points: Vec<usize>,
    /// Size held fixed while another axis is swept: `(M, L, N_D)`.
    pub base: (usize, usize, usize),
    pub iterations: usize,
    pub repeats: usize,
}

impl Default for ProbeSizes {
    fn default() -> Self {
        Self {
            atoms: vec![16, 32, 64, 128],
            layers: vec![1, 2, 4, 8],
            grid_points: vec![16, 32, 64],
            base: (64, 4, 32),
            iterations: 5,
            repeats: 3,
        }
    }
}

impl ProbeSizes {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("atoms", &self.atoms),
            ("layers", &self.layers),
            ("grid_points", &self.grid_points),
        ] {
            if v.len() < 3 {
                return Err(Error::invalid(field, "need at least 3 sizes per axis"));
            }
            if v.contains(&0) {
                return Err(Error::invalid(field, "sizes must be at least 1"));
            }
        }
        if self.iterations == 0 || self.repeats == 0 {
            return Err(Error::invalid("iterations/repeats", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub axis: ProbeAxis,
    pub atoms: usize,
    pub layers: usize,
    pub grid_points: usize,
    pub seconds_per_iteration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ProbeRow>,
}

impl ScalingTable {
    pub fn axis(&self, axis: ProbeAxis) -> impl Iterator<Item = &ProbeRow> {
        self.rows.iter().filter(move |r| r.axis == axis)
    }

    /// Least-squares slope of log time against log size along `axis`.
    pub fn slope(&self, axis: ProbeAxis) -> f64 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .axis(axis)
            .map(|r| {
                let x = match axis {
                    ProbeAxis::Atoms => r.atoms,
                    ProbeAxis::Layers => r.layers,
                    ProbeAxis::GridPoints => r.grid_points,
                };
                (x as f64, r.seconds_per_iteration)
            })
            .unzip();
        loglog_slope(&xs, &ys)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["axis", "atoms", "layers", "grid_points", "seconds_per_iteration"])?;
        for r in &self.rows {
            let axis = match r.axis {
                ProbeAxis::Atoms => "atoms",
                ProbeAxis::Layers => "layers",
                ProbeAxis::GridPoints => "grid_points",
            };
            w.write_record([
                axis.to_string(),
                r.atoms.to_string(),
                r.layers.to_string(),
                r.grid_points.to_string(),
                r.seconds_per_iteration.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Most nearly square `rows x cols` factorization of `atoms`.
fn shape(atoms: usize) -> (usize, usize) {
    let mut rows = (atoms as f64).sqrt().floor() as usize;
    while atoms % rows != 0 {
        rows -= 1;
    }
    (rows, atoms / rows)
}

/// Per-iteration wall time of D³ at one size, both objectives active.
pub fn time_iteration(spec: &ExperimentSpec, atoms: usize, layers: usize, grid_points: usize, iterations: usize, repeats: usize) -> Result<f64> {
    let sc = &spec.scenario;
    let (rows, cols) = shape(atoms);
    let geometry = sc.geometry_shape(rows, cols, layers)?;
    let grid = AngleGrid::uniform(grid_points, sc.grid.anchor)?;
    // target bins must exist on the probe grid
    let mut scenario = sc.clone();
    for t in &mut scenario.targets {
        t.elevation = t.elevation.min(grid_points);
        t.azimuth = t.azimuth.min(grid_points);
    }
    let channel = sample_channel(&geometry, &sc.users, &sc.link, spec.master_seed)?;
    let problem = IsacProblem::new(
        &geometry,
        &grid,
        scenario.desired(&grid)?,
        &channel,
        sc.transmit()?,
        sc.link.noise_power_mw(),
    )?;
    let mut cfg = spec.optimizer.clone().with_weights(1.0, 1.0);
    cfg.rel_tol = 0.0;
    cfg.max_iters = iterations;

    let mut best = f64::INFINITY;
    for r in 0..repeats {
        let s = seed::derive(spec.master_seed, r as u64);
        let initial = PhaseState::random(atoms, layers, &mut seed::rng(s));
        let t0 = Instant::now();
        let trace = run(initial, &problem, &cfg, s)?;
        let elapsed = t0.elapsed().as_secs_f64();
        let done = trace.iterations().max(1);
        if trace.reason == StopReason::Stationary && done < iterations {
            continue;
        }
        best = best.min(elapsed / done as f64);
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Objective("every timed run stopped at a stationary point".into()))
    }
}

/// Time each axis of `sizes` with the others at `sizes.base`.
pub fn scaling_probe(spec: &ExperimentSpec, sizes: &ProbeSizes) -> Result<ScalingTable> {
    sizes.validate()?;
    let (m0, l0, n0) = sizes.base;
    let mut points = Vec::new();
    points.extend(sizes.atoms.iter().map(|&m| (ProbeAxis::Atoms, m, l0, n0)));
    points.extend(sizes.layers.iter().map(|&l| (ProbeAxis::Layers, m0, l, n0)));
    points.extend(sizes.grid_points.iter().map(|&n| (ProbeAxis::GridPoints, m0, l0, n)));
    let rows = points
        .into_iter()
        .map(|(axis, atoms, layers, grid_points)| {
            Ok(ProbeRow {
                axis,
                atoms,
                layers,
                grid_points,
                seconds_per_iteration: time_iteration(spec, atoms, layers, grid_points, sizes.iterations, sizes.repeats)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingTable { rows })
}
