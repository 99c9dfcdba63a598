//! Experiment configuration. Every field has a default, and the defaults
//! reproduce the reference scenario, so an empty file is a valid config.
//!
//! Resolution order: preset, then the TOML file (deep-merged over the preset),
//! then command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, LinkBudget, UserSpec};
use crate::geometry::{GeometryParams, SimGeometry, DEFAULT_CARRIER_HZ, DEFAULT_THICKNESS_M};
use crate::metrics::{desired_pattern, AngleGrid, DesiredPattern, GridAnchor, TargetBin, TransmitConfig};
use crate::optimizer::D3Config;
use crate::{Error, Result};

/// Stack parameters other than the swept sizes. `None` lengths default to
/// wavelength-relative values (see [`GeometryParams`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackConfig {
    pub carrier_hz: f64,
    pub thickness: f64,
    pub atom_spacing_y: Option<f64>,
    pub atom_spacing_z: Option<f64>,
    pub atom_area: Option<f64>,
    pub feed_spacing: Option<f64>,
    pub feed_offset: Option<f64>,
}

impl Default for StackConfig {
    fn default() -> Self {
        Self {
            carrier_hz: DEFAULT_CARRIER_HZ,
            thickness: DEFAULT_THICKNESS_M,
            atom_spacing_y: None,
            atom_spacing_z: None,
            atom_area: None,
            feed_spacing: None,
            feed_offset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub points: usize,
    pub anchor: GridAnchor,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            points: 36,
            anchor: GridAnchor::LowerEdge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub stack: StackConfig,
    pub users: Vec<UserSpec>,
    pub targets: Vec<TargetBin>,
    /// Scale the indicator pattern to unit ℓ1 mass.
    pub normalize_desired: bool,
    pub link: LinkBudget,
    pub total_power_dbm: f64,
    pub grid: GridConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            stack: StackConfig::default(),
            users: UserSpec::reference_users(),
            targets: TargetBin::reference_targets(),
            normalize_desired: false,
            link: LinkBudget::default(),
            total_power_dbm: 20.0,
            grid: GridConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }
    pub fn num_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn geometry(&self, atoms: usize, layers: usize) -> Result<SimGeometry> {
        let side = square_side(atoms).ok_or_else(|| {
            Error::invalid("sweep.atoms", format!("{atoms} is not a perfect square"))
        })?;
        self.geometry_shape(side, side, layers)
    }

    /// Rectangular `rows x cols` metasurface with this scenario's stack and feeds.
    pub fn geometry_shape(&self, rows: usize, cols: usize, layers: usize) -> Result<SimGeometry> {
        SimGeometry::new(&GeometryParams {
            carrier_hz: self.stack.carrier_hz,
            num_layers: layers,
            rows,
            cols,
            atom_spacing_y: self.stack.atom_spacing_y,
            atom_spacing_z: self.stack.atom_spacing_z,
            atom_area: self.stack.atom_area,
            thickness: self.stack.thickness,
            num_feeds: self.num_users() + self.num_targets(),
            feed_spacing: self.stack.feed_spacing,
            feed_offset: self.stack.feed_offset,
        })
    }

    pub fn grid(&self) -> Result<AngleGrid> {
        AngleGrid::uniform(self.grid.points, self.grid.anchor)
    }

    pub fn desired(&self, grid: &AngleGrid) -> Result<DesiredPattern> {
        desired_pattern(grid, &self.targets, self.normalize_desired)
    }

    pub fn transmit(&self) -> Result<TransmitConfig> {
        if !self.total_power_dbm.is_finite() {
            return Err(Error::invalid("scenario.total_power_dbm", "must be finite"));
        }
        TransmitConfig::new(db_to_linear(self.total_power_dbm), self.num_users(), self.num_targets())
            .map_err(|_| Error::invalid("scenario.total_power_dbm", "must give positive power"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::invalid("scenario.users", "at least one user is required"));
        }
        for (i, u) in self.users.iter().enumerate() {
            u.validate(i)?;
        }
        self.link.validate()?;
        self.transmit()?;
        let grid = self.grid()?;
        self.desired(&grid)?;
        // catches bad stack lengths with a representative size
        self.geometry(1, 1)?;
        Ok(())
    }
}

pub fn square_side(atoms: usize) -> Option<usize> {
    let side = (atoms as f64).sqrt().round() as usize;
    (side >= 1 && side * side == atoms).then_some(side)
}

/// Lists swept as a Cartesian product. `atoms` entries must be perfect squares
/// (square metasurfaces).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub atoms: Vec<usize>,
    pub layers: Vec<usize>,
    pub w_sens: Vec<f64>,
    pub w_comm: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            atoms: vec![100],
            layers: vec![7],
            w_sens: vec![1.0],
            w_comm: vec![1.0],
        }
    }
}

/// Weight values `0, step, 2 step, ..., 1`.
pub fn weight_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::invalid("weight_step", "must lie in (0, 1]"));
    }
    let n = (1.0 / step).round() as usize;
    if ((n as f64) * step - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("weight_step", "must divide 1 evenly"));
    }
    Ok((0..=n).map(|i| (i as f64 * step * 1e9).round() / 1e9).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Beam pattern at M = 100, L = 7, w = (1, 1).
    Fig2,
    /// Sum rate versus M for sensing-only, communication-only and ISAC weights.
    Fig3,
    /// Weight-grid trade-off at M = 100, L = 6.
    Fig45,
    /// Convergence traces at M = 100, L = 7, w = (1, 1).
    Fig67,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub optimizer: D3Config,
    pub sweep: SweepConfig,
    pub realizations: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            optimizer: D3Config::default(),
            sweep: SweepConfig::default(),
            realizations: 100,
            master_seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentSpec {
    pub fn preset(preset: Preset) -> Self {
        let mut spec = Self::default();
        match preset {
            Preset::Fig2 | Preset::Fig67 => {}
            Preset::Fig3 => {
                spec.sweep = SweepConfig {
                    atoms: vec![16, 36, 64, 100],
                    layers: vec![2, 6],
                    w_sens: vec![0.0, 1.0],
                    w_comm: vec![0.0, 1.0],
                };
            }
            Preset::Fig45 => {
                let w = weight_grid(0.2).expect("valid step");
                spec.sweep = SweepConfig {
                    atoms: vec![100],
                    layers: vec![6],
                    w_sens: w.clone(),
                    w_comm: w,
                };
            }
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.optimizer.validate()?;
        if self.realizations == 0 {
            return Err(Error::invalid("realizations", "must be at least 1"));
        }
        let s = &self.sweep;
        for (field, empty) in [
            ("sweep.atoms", s.atoms.is_empty()),
            ("sweep.layers", s.layers.is_empty()),
            ("sweep.w_sens", s.w_sens.is_empty()),
            ("sweep.w_comm", s.w_comm.is_empty()),
        ] {
            if empty {
                return Err(Error::invalid(field, "must not be empty"));
            }
        }
        for &m in &s.atoms {
            if square_side(m).is_none() {
                return Err(Error::invalid("sweep.atoms", format!("{m} is not a perfect square")));
            }
        }
        if s.layers.contains(&0) {
            return Err(Error::invalid("sweep.layers", "must be at least 1"));
        }
        for (field, ws) in [("sweep.w_sens", &s.w_sens), ("sweep.w_comm", &s.w_comm)] {
            if let Some(w) = ws.iter().find(|w| !(0.0..=1.0).contains(*w)) {
                return Err(Error::invalid(field, format!("weights must lie in [0, 1], got {w}")));
            }
        }
        Ok(())
    }

    /// Parse TOML text layered over `base`.
    pub fn from_toml_over(base: &ExperimentSpec, text: &str) -> Result<Self> {
        let mut merged = toml::Table::try_from(base).expect("spec serializes to a table");
        let overlay: toml::Table = toml::from_str(text)?;
        merge(&mut merged, overlay);
        let spec: ExperimentSpec = merged.try_into()?;
        spec.validate()?;
        Ok(spec)
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Resolve a spec from an optional preset and an optional TOML file.
pub fn load_spec(path: Option<&Path>, preset: Option<Preset>) -> Result<ExperimentSpec> {
    let base = preset.map(ExperimentSpec::preset).unwrap_or_default();
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            ExperimentSpec::from_toml_over(&base, &text)
        }
        None => {
            base.validate()?;
            Ok(base)
        }
    }
}
