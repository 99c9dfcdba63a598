//! Experiment layer: configuration, Monte-Carlo campaigns, figure data,
//! gradient checks and the scaling probe.

pub mod config;
pub mod experiment;
pub mod figures;
pub mod gradcheck;
pub mod probe;

pub use config::{load_spec, ExperimentSpec, Preset, ScenarioConfig, SweepConfig};
pub use experiment::{run_experiment, CellReport, CellStats, MonteCarloReport, RealizationRecord, Summary};
pub use figures::{emit_figure_data, FigureId};
pub use gradcheck::{gradcheck, GradcheckReport};
pub use probe::{loglog_slope, scaling_probe, ProbeAxis, ProbeSizes, ScalingTable};
