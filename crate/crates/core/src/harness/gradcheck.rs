//! Analytic-versus-finite-difference comparison on one seeded instance.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentSpec;
use crate::channel::sample_channel;
use crate::gradients::{fd_gradient, max_relative_error, precise, write_gradient_csv};
use crate::problem::IsacProblem;
use crate::wavedomain::PhaseState;
use crate::{seed, Error, Result};

pub const DEFAULT_FD_STEP: f64 = 1e-6;
pub const DEFAULT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientEntry {
    pub atom: usize,
    pub layer: usize,
    pub sensing_analytic: f64,
    pub sensing_fd: f64,
    pub comm_analytic: f64,
    pub comm_fd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub atoms: usize,
    pub layers: usize,
    pub seed: u64,
    pub step: f64,
    pub precise: bool,
    pub sensing_max_rel_error: f64,
    pub comm_max_rel_error: f64,
    pub entries: Vec<GradientEntry>,
}

impl GradcheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.sensing_max_rel_error < tol && self.comm_max_rel_error < tol
    }

    /// `atom,layer,sensing_analytic,sensing_fd,comm_analytic,comm_fd`
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["atom", "layer", "sensing_analytic", "sensing_fd", "comm_analytic", "comm_fd"])?;
        for e in &self.entries {
            w.write_record([
                e.atom.to_string(),
                e.layer.to_string(),
                format!("{:e}", e.sensing_analytic),
                format!("{:e}", e.sensing_fd),
                format!("{:e}", e.comm_analytic),
                format!("{:e}", e.comm_fd),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Build the instance for the first sweep size of `spec`, draw a random state
/// from `seed`, and compare both gradients with central differences.
/// `precise` evaluates the differences in double-double arithmetic, which
/// removes f64 roundoff from small entries at some cost in speed.
/// With `dump_dir`, the four gradient matrices are also written as CSV.
pub fn gradcheck(
    spec: &ExperimentSpec,
    seed: u64,
    step: f64,
    precise: bool,
    dump_dir: Option<&Path>,
) -> Result<(GradcheckReport, Vec<PathBuf>)> {
    spec.validate()?;
    let sc = &spec.scenario;
    let (atoms, layers) = (spec.sweep.atoms[0], spec.sweep.layers[0]);
    let geometry = sc.geometry(atoms, layers)?;
    let grid = sc.grid()?;
    let channel = sample_channel(&geometry, &sc.users, &sc.link, seed::derive(seed, 0))?;
    let problem = IsacProblem::new(
        &geometry,
        &grid,
        sc.desired(&grid)?,
        &channel,
        sc.transmit()?,
        sc.link.noise_power_mw(),
    )?;
    let state = PhaseState::random(atoms, layers, &mut seed::rng(seed::derive(seed, 1)));

    let analytic = problem.gradients(&state)?;
    let (fd_s, fd_c) = if precise {
        precise::fd_gradients(&problem, &state, step)?
    } else {
        (
            fd_gradient(|s| Ok(problem.evaluate(s)?.j_mse), &state, step)?,
            fd_gradient(|s| Ok(problem.evaluate(s)?.sum_rate), &state, step)?,
        )
    };

    let entries = analytic
        .sensing
        .indexed_iter()
        .map(|((m, l), &s)| GradientEntry {
            atom: m,
            layer: l,
            sensing_analytic: s,
            sensing_fd: fd_s[[m, l]],
            comm_analytic: analytic.comm[[m, l]],
            comm_fd: fd_c[[m, l]],
        })
        .collect();
    let report = GradcheckReport {
        atoms,
        layers,
        seed,
        step,
        precise,
        sensing_max_rel_error: max_relative_error(&analytic.sensing, &fd_s, DEFAULT_FLOOR),
        comm_max_rel_error: max_relative_error(&analytic.comm, &fd_c, DEFAULT_FLOOR),
        entries,
    };

    let mut files = Vec::new();
    if let Some(dir) = dump_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, g) in [
            ("grad_sensing_analytic.csv", &analytic.sensing),
            ("grad_sensing_fd.csv", &fd_s),
            ("grad_comm_analytic.csv", &analytic.comm),
            ("grad_comm_fd.csv", &fd_c),
        ] {
            let path = dir.join(name);
            write_gradient_csv(&path, g)?;
            files.push(path);
        }
    }
    Ok((report, files))
}
