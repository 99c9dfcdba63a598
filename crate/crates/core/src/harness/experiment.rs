//! Seeded Monte-Carlo campaigns over a sweep grid.
//!
//! Realization `r` draws its channel from `seed::derive(master_seed, r)` in
//! every cell, so cells are compared on common channel draws. Jobs run in
//! parallel and are merged by (cell, realization) index, so the report does
//! not depend on scheduling.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentSpec;
use crate::channel::{linear_to_db, sample_channel};
use crate::geometry::build_diffraction_stack;
use crate::metrics::SteeringTable;
use crate::optimizer::{multi_restart, peaks_on_targets, StopReason};
use crate::problem::IsacProblem;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub atoms: usize,
    pub layers: usize,
    pub w_sens: f64,
    pub w_comm: f64,
}

/// Sweep cells in row-major order: atoms, layers, w_sens, w_comm.
pub fn cells(spec: &ExperimentSpec) -> Vec<Cell> {
    let s = &spec.sweep;
    let mut out = Vec::new();
    for &atoms in &s.atoms {
        for &layers in &s.layers {
            for &w_sens in &s.w_sens {
                for &w_comm in &s.w_comm {
                    out.push(Cell {
                        atoms,
                        layers,
                        w_sens,
                        w_comm,
                    });
                }
            }
        }
    }
    out
}

/// Outcome of one channel realization in one cell (selected restart).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub realization: usize,
    pub channel_seed: u64,
    pub best_restart: usize,
    pub initial_sum_rate: f64,
    pub initial_j_mse: f64,
    pub sum_rate: f64,
    pub j_mse: f64,
    pub j_mse_db: f64,
    pub iterations: usize,
    pub reason: StopReason,
    /// The two (or `N_S`) strongest pattern bins are exactly the targets.
    pub peaks_on_targets: bool,
    /// Per-iteration `(sum_rate, j_mse)` of the selected run.
    pub trace: Vec<[f64; 2]>,
    /// Final phases of the selected run, layer-major.
    pub final_theta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: percentile(&v, 0.5),
            p10: percentile(&v, 0.1),
            p90: percentile(&v, 0.9),
            min: v[0],
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub sum_rate: Summary,
    pub j_mse_db: Summary,
    /// Iterations to stop -> number of realizations.
    pub iteration_histogram: BTreeMap<usize, usize>,
    pub peak_hit_rate: f64,
}

impl CellStats {
    pub fn from_records(records: &[RealizationRecord]) -> Self {
        let rates: Vec<_> = records.iter().map(|r| r.sum_rate).collect();
        let errs: Vec<_> = records.iter().map(|r| r.j_mse_db).collect();
        let mut hist = BTreeMap::new();
        for r in records {
            *hist.entry(r.iterations).or_insert(0) += 1;
        }
        let hits = records.iter().filter(|r| r.peaks_on_targets).count();
        Self {
            sum_rate: Summary::of(&rates),
            j_mse_db: Summary::of(&errs),
            iteration_histogram: hist,
            peak_hit_rate: if records.is_empty() {
                0.0
            } else {
                hits as f64 / records.len() as f64
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub cell: Cell,
    /// Set when at least one realization failed; failed realizations are omitted.
    pub error: Option<String>,
    pub stats: CellStats,
    pub records: Vec<RealizationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub spec: ExperimentSpec,
    pub cells: Vec<CellReport>,
}

impl MonteCarloReport {
    /// Rebuild every cell's statistics from its records.
    pub fn recompute_stats(&mut self) {
        for c in &mut self.cells {
            c.stats = CellStats::from_records(&c.records);
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn cell(&self, atoms: usize, layers: usize, w_sens: f64, w_comm: f64) -> Option<&CellReport> {
        self.cells.iter().find(|c| {
            c.cell.atoms == atoms
                && c.cell.layers == layers
                && c.cell.w_sens == w_sens
                && c.cell.w_comm == w_comm
        })
    }
}

/// Shared per-(atoms, layers) precomputation.
struct SizeContext {
    geometry: crate::geometry::SimGeometry,
    base: IsacProblem,
}

fn size_context(spec: &ExperimentSpec, atoms: usize, layers: usize) -> Result<SizeContext> {
    let sc = &spec.scenario;
    let geometry = sc.geometry(atoms, layers)?;
    let grid = sc.grid()?;
    let stack = build_diffraction_stack(&geometry)?;
    let steering = SteeringTable::new(&geometry, &grid);
    let tx = sc.transmit()?;
    let placeholder = ndarray::Array2::zeros((tx.num_users, geometry.atoms_per_layer()));
    let base = IsacProblem::from_parts(
        stack,
        steering,
        sc.desired(&grid)?,
        placeholder,
        tx,
        sc.link.noise_power_mw(),
    )?;
    Ok(SizeContext { geometry, base })
}

fn run_one(
    spec: &ExperimentSpec,
    ctx: &SizeContext,
    cell: &Cell,
    realization: usize,
) -> Result<RealizationRecord> {
    let base = &ctx.base;
    let channel_seed = seed::derive(spec.master_seed, realization as u64);
    let channel = sample_channel(&ctx.geometry, &spec.scenario.users, &spec.scenario.link, channel_seed)?;
    let mut problem = base.clone();
    problem.h = channel.h;

    let cfg = spec.optimizer.clone().with_weights(cell.w_sens, cell.w_comm);
    let outcome = multi_restart(&problem, &cfg, seed::derive(channel_seed, 0x5EED))?;
    let best = outcome.best_trace();
    let j_mse = best.final_j_mse();
    Ok(RealizationRecord {
        realization,
        channel_seed,
        best_restart: outcome.best,
        initial_sum_rate: best.initial_sum_rate,
        initial_j_mse: best.initial_j_mse,
        sum_rate: best.final_sum_rate(),
        j_mse,
        j_mse_db: linear_to_db(j_mse),
        iterations: best.iterations(),
        reason: best.reason,
        peaks_on_targets: peaks_on_targets(&problem, &best.final_state, &spec.scenario.targets)?,
        trace: best.records.iter().map(|r| [r.sum_rate, r.j_mse]).collect(),
        final_theta: best.final_state.to_flat(),
    })
}

/// Run every sweep cell for every realization. Failures are recorded per cell
/// instead of aborting the campaign; only an invalid spec is an error.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<MonteCarloReport> {
    spec.validate()?;
    let cells = cells(spec);

    let mut sizes: Vec<(usize, usize)> = cells.iter().map(|c| (c.atoms, c.layers)).collect();
    sizes.dedup();
    let contexts: BTreeMap<(usize, usize), Result<SizeContext>> = sizes
        .par_iter()
        .map(|&(m, l)| ((m, l), size_context(spec, m, l)))
        .collect();

    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.realizations).map(move |r| (c, r)))
        .collect();
    let results: Vec<Result<RealizationRecord>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let cell = &cells[c];
            match &contexts[&(cell.atoms, cell.layers)] {
                Ok(ctx) => run_one(spec, ctx, cell, r),
                Err(e) => Err(Error::Objective(e.to_string())),
            }
        })
        .collect();

    let mut reports: Vec<CellReport> = cells
        .iter()
        .map(|&cell| CellReport {
            cell,
            error: None,
            stats: CellStats::default(),
            records: Vec::new(),
        })
        .collect();
    for (&(c, r), result) in jobs.iter().zip(results) {
        match result {
            Ok(rec) => reports[c].records.push(rec),
            Err(e) => {
                let msg = format!("realization {r}: {e}");
                let err = &mut reports[c].error;
                *err = Some(match err.take() {
                    Some(prev) => format!("{prev}; {msg}"),
                    None => msg,
                });
            }
        }
    }
    let mut report = MonteCarloReport {
        spec: spec.clone(),
        cells: reports,
    };
    report.recompute_stats();
    Ok(report)
}
