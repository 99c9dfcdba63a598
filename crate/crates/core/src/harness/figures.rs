//! Plot-ready CSV output from a [`MonteCarloReport`].
//!
//! File schemas (header rows are fixed):
//!
//! | figure | file | layout |
//! |---|---|---|
//! | fig2 | `fig2_pattern.csv` | `N_D x N_D` normalized pattern, row = elevation bin, column = azimuth bin, no header |
//! | fig2 | `fig2_angles.csv` | `bin,angle_deg` |
//! | fig3 | `fig3_rate_vs_atoms.csv` | `atoms,layers,w_sens,w_comm,mean_sum_rate,median_sum_rate,p10_sum_rate,p90_sum_rate,mean_j_mse_db` |
//! | fig45 | `fig4_rate_grid.csv`, `fig5_jmse_grid.csv` | `w_sens,w_comm=<v>...`, one row per `w_sens` |
//! | fig67 | `fig6_rate_trace.csv`, `fig7_jmse_trace.csv` | `iteration,mean,p10,median,p90,r<i>...`, one row per iteration |

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiment::{CellReport, MonteCarloReport, Summary};
use crate::channel::linear_to_db;
use crate::geometry::build_diffraction_stack;
use crate::metrics::{write_grid_csv, SteeringTable};
use crate::wavedomain::{beamforming_matrix, PhaseState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig45,
    Fig67,
}

impl FigureId {
    pub const ALL: [FigureId; 4] = [FigureId::Fig2, FigureId::Fig3, FigureId::Fig45, FigureId::Fig67];

    fn name(self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig45 => "fig45",
            FigureId::Fig67 => "fig67",
        }
    }
}

fn missing(figure: FigureId, what: &str) -> Error {
    Error::MissingAxes {
        figure: figure.name().into(),
        missing: what.into(),
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn first_populated(report: &MonteCarloReport, figure: FigureId) -> Result<&CellReport> {
    report
        .cells
        .iter()
        .find(|c| !c.records.is_empty())
        .ok_or_else(|| missing(figure, "at least one cell with successful realizations"))
}

/// Write the data files for `figure` under `dir` and return their paths.
pub fn emit_figure_data(report: &MonteCarloReport, figure: FigureId, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match figure {
        FigureId::Fig2 => fig2(report, dir),
        FigureId::Fig3 => fig3(report, dir),
        FigureId::Fig45 => fig45(report, dir),
        FigureId::Fig67 => fig67(report, dir),
    }
}

/// Normalized pattern of the selected run of the first realization of the first cell.
pub fn selected_pattern(report: &MonteCarloReport) -> Result<crate::RMatrix> {
    let cell = first_populated(report, FigureId::Fig2)?;
    let rec = &cell.records[0];
    let sc = &report.spec.scenario;
    let geometry = sc.geometry(cell.cell.atoms, cell.cell.layers)?;
    let grid = sc.grid()?;
    let state = PhaseState::from_flat(geometry.atoms_per_layer(), geometry.num_layers(), &rec.final_theta)?;
    let f = beamforming_matrix(&state, &build_diffraction_stack(&geometry)?)?;
    Ok(SteeringTable::new(&geometry, &grid).pattern(&f)?.normalized)
}

fn fig2(report: &MonteCarloReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let pattern = selected_pattern(report)?;
    let grid_path = dir.join("fig2_pattern.csv");
    write_grid_csv(&grid_path, &pattern)?;

    let angles_path = dir.join("fig2_angles.csv");
    let mut w = csv::Writer::from_path(&angles_path)?;
    w.write_record(["bin", "angle_deg"])?;
    for (i, a) in report.spec.scenario.grid()?.samples_deg().iter().enumerate() {
        w.write_record([(i + 1).to_string(), fmt(*a)])?;
    }
    w.flush().map_err(|e| Error::io(&angles_path, e))?;
    Ok(vec![grid_path, angles_path])
}

fn fig3(report: &MonteCarloReport, dir: &Path) -> Result<Vec<PathBuf>> {
    first_populated(report, FigureId::Fig3)?;
    let path = dir.join("fig3_rate_vs_atoms.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "atoms",
        "layers",
        "w_sens",
        "w_comm",
        "mean_sum_rate",
        "median_sum_rate",
        "p10_sum_rate",
        "p90_sum_rate",
        "mean_j_mse_db",
    ])?;
    for c in report.cells.iter().filter(|c| !c.records.is_empty()) {
        let s = &c.stats;
        w.write_record([
            c.cell.atoms.to_string(),
            c.cell.layers.to_string(),
            fmt(c.cell.w_sens),
            fmt(c.cell.w_comm),
            fmt(s.sum_rate.mean),
            fmt(s.sum_rate.median),
            fmt(s.sum_rate.p10),
            fmt(s.sum_rate.p90),
            fmt(s.j_mse_db.mean),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(vec![path])
}

fn fig45(report: &MonteCarloReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let sweep = &report.spec.sweep;
    if sweep.w_sens.len() < 2 || sweep.w_comm.len() < 2 {
        return Err(missing(FigureId::Fig45, "at least two values on both weight axes"));
    }
    let (atoms, layers) = (sweep.atoms[0], sweep.layers[0]);
    let mut out = Vec::new();
    for (file, pick) in [
        ("fig4_rate_grid.csv", (|s: &super::experiment::CellStats| s.sum_rate.mean) as fn(&_) -> f64),
        ("fig5_jmse_grid.csv", |s| s.j_mse_db.mean),
    ] {
        let path = dir.join(file);
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = vec!["w_sens".to_string()];
        header.extend(sweep.w_comm.iter().map(|v| format!("w_comm={v}")));
        w.write_record(&header)?;
        for &ws in &sweep.w_sens {
            let mut row = vec![fmt(ws)];
            for &wc in &sweep.w_comm {
                let cell = report
                    .cell(atoms, layers, ws, wc)
                    .filter(|c| !c.records.is_empty())
                    .ok_or_else(|| missing(FigureId::Fig45, &format!("cell w = ({ws}, {wc})")))?;
                row.push(fmt(pick(&cell.stats)));
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

/// Per-iteration values across realizations; runs that stopped early hold
/// their final value.
pub fn iteration_matrix(cell: &CellReport, column: usize) -> Vec<Vec<f64>> {
    let len = cell.records.iter().map(|r| r.trace.len()).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            cell.records
                .iter()
                .filter_map(|r| r.trace.get(i).or(r.trace.last()).map(|v| v[column]))
                .collect()
        })
        .collect()
}

fn fig67(report: &MonteCarloReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let cell = first_populated(report, FigureId::Fig67)?;
    let mut out = Vec::new();
    for (file, column, to_db) in [("fig6_rate_trace.csv", 0, false), ("fig7_jmse_trace.csv", 1, true)] {
        let path = dir.join(file);
        let mut w = csv::Writer::from_path(&path)?;
        let mut header: Vec<String> = ["iteration", "mean", "p10", "median", "p90"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(cell.records.iter().map(|r| format!("r{}", r.realization)));
        w.write_record(&header)?;
        for (i, values) in iteration_matrix(cell, column).into_iter().enumerate() {
            let values: Vec<f64> = if to_db {
                values.into_iter().map(linear_to_db).collect()
            } else {
                values
            };
            let s = Summary::of(&values);
            let mut row = vec![(i + 1).to_string(), fmt(s.mean), fmt(s.p10), fmt(s.median), fmt(s.p90)];
            row.extend(values.iter().map(|v| fmt(*v)));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}
