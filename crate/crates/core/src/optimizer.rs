//! Dual-normalized differential gradient descent (D³) over meta-atom phases.
//!
//! Each iteration normalizes the sensing and communication gradients entry by
//! entry, takes their weighted difference, rescales it so the largest entry
//! has magnitude π, and steps with a geometrically decaying rate.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::Zip;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::TargetBin;
use crate::problem::{Evaluation, IsacProblem};
use crate::wavedomain::{wrap_phase, PhaseState};
use crate::{seed, Error, RMatrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct D3Config {
    pub w_sens: f64,
    pub w_comm: f64,
    pub epsilon: f64,
    pub initial_step: f64,
    pub decay: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub num_restarts: usize,
}

impl Default for D3Config {
    fn default() -> Self {
        Self {
            w_sens: 1.0,
            w_comm: 1.0,
            epsilon: 1e-8,
            initial_step: 1.0,
            decay: 0.5,
            max_iters: 60,
            rel_tol: 1e-6,
            num_restarts: 5,
        }
    }
}

impl D3Config {
    pub fn with_weights(mut self, w_sens: f64, w_comm: f64) -> Self {
        self.w_sens = w_sens;
        self.w_comm = w_comm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (field, w) in [("optimizer.w_sens", self.w_sens), ("optimizer.w_comm", self.w_comm)] {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::invalid(field, format!("must lie in [0, 1], got {w}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("optimizer.epsilon", "must be > 0"));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::invalid("optimizer.decay", "must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::invalid("optimizer.initial_step", "must be > 0"));
        }
        if self.num_restarts == 0 {
            return Err(Error::invalid("optimizer.num_restarts", "must be at least 1"));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::invalid("optimizer.rel_tol", "must be >= 0"));
        }
        Ok(())
    }

    /// Scalar watched by the stopping rule.
    pub fn tracked(&self, eval: &Evaluation) -> f64 {
        self.w_sens * eval.j_mse - self.w_comm * eval.sum_rate
    }

    /// Step size used at iteration `k` (0-based).
    pub fn step_at(&self, k: usize) -> f64 {
        self.initial_step * self.decay.powi(k as i32)
    }
}

/// `g / sqrt(g² + ε)` entrywise.
pub fn elementwise_normalize(g: &RMatrix, epsilon: f64) -> RMatrix {
    g.mapv(|x| x / (x * x + epsilon).sqrt())
}

/// `w_sens · sens - w_comm · comm`: descends the matching error while
/// ascending the sum rate.
pub fn differential_gradient(
    sens_norm: &RMatrix,
    comm_norm: &RMatrix,
    w_sens: f64,
    w_comm: f64,
) -> Result<RMatrix> {
    if sens_norm.dim() != comm_norm.dim() {
        return Err(Error::dims(
            "differential gradient",
            format!("{:?}", sens_norm.dim()),
            format!("{:?}", comm_norm.dim()),
        ));
    }
    Ok(Zip::from(sens_norm)
        .and(comm_norm)
        .map_collect(|s, c| w_sens * s - w_comm * c))
}

/// Rescale so the largest-magnitude entry becomes ±π. `None` when every entry
/// is zero, i.e. the iterate is stationary.
pub fn global_normalize(g: &RMatrix) -> Option<RMatrix> {
    let peak = max_abs(g);
    (peak > 0.0 && peak.is_finite()).then(|| g.mapv(|x| PI * x / peak))
}

pub fn max_abs(g: &RMatrix) -> f64 {
    g.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `θ ← wrap(θ - μ Ḡ)`.
pub fn step(state: &PhaseState, g_norm: &RMatrix, mu: f64) -> PhaseState {
    let mut theta = state.theta().clone();
    Zip::from(&mut theta)
        .and(g_norm)
        .for_each(|t, &g| *t = wrap_phase(*t - mu * g));
    PhaseState::new(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIters,
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub sum_rate: f64,
    pub j_mse: f64,
    /// Step size applied in this iteration.
    pub step: f64,
    /// Largest magnitude of the differential gradient before rescaling.
    pub max_abs_gradient: f64,
    /// Largest magnitude of the rescaled direction actually stepped along
    /// (π, or 0 when the run stopped at a stationary point).
    pub max_abs_direction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub restart: usize,
    pub seed: u64,
    pub initial_sum_rate: f64,
    pub initial_j_mse: f64,
    pub records: Vec<IterationRecord>,
    pub final_state: PhaseState,
    pub reason: StopReason,
    /// Largest cumulative (unwrapped) phase movement of any coordinate.
    pub phase_travel: f64,
}

impl RunTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_sum_rate(&self) -> f64 {
        self.records.last().map_or(self.initial_sum_rate, |r| r.sum_rate)
    }

    pub fn final_j_mse(&self) -> f64 {
        self.records.last().map_or(self.initial_j_mse, |r| r.j_mse)
    }

    /// One JSON object per iteration.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            restart: usize,
            seed: u64,
            #[serde(flatten)]
            record: &'a IterationRecord,
            j_mse_db: f64,
        }
        for record in &self.records {
            let line = Line {
                restart: self.restart,
                seed: self.seed,
                record,
                j_mse_db: crate::channel::linear_to_db(record.j_mse),
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n").map_err(|e| Error::io("<trace>", e))?;
        }
        Ok(())
    }
}

fn relative_change(prev: f64, next: f64) -> f64 {
    let delta = (next - prev).abs();
    if prev == 0.0 {
        delta
    } else {
        delta / prev.abs()
    }
}

/// Runs D³ from `initial` until the relative change of
/// `w_sens · J - w_comm · R` drops below `rel_tol`, the differential gradient
/// vanishes, or `max_iters` is reached.
pub fn run(initial: PhaseState, problem: &IsacProblem, cfg: &D3Config, seed: u64) -> Result<RunTrace> {
    cfg.validate()?;
    let start = problem.evaluate(&initial)?;
    let mut prev = cfg.tracked(&start);
    let mut state = initial;
    let mut records = Vec::new();
    let mut travel = RMatrix::zeros((problem.atoms(), problem.layers()));
    let mut reason = StopReason::MaxIters;

    for k in 0..cfg.max_iters {
        let mu = cfg.step_at(k);
        let factors = problem.factors(&state)?;
        debug_assert!(k > 0 || factors.composition_error() < 1e-9);
        let grads = problem.gradients_weighted(&factors, cfg.w_sens != 0.0, cfg.w_comm != 0.0)?;
        let g = differential_gradient(
            &elementwise_normalize(&grads.sensing, cfg.epsilon),
            &elementwise_normalize(&grads.comm, cfg.epsilon),
            cfg.w_sens,
            cfg.w_comm,
        )?;
        let peak = max_abs(&g);
        let Some(g_bar) = global_normalize(&g) else {
            let eval = problem.evaluate(&state)?;
            records.push(IterationRecord {
                iteration: k + 1,
                sum_rate: eval.sum_rate,
                j_mse: eval.j_mse,
                step: mu,
                max_abs_gradient: peak,
                max_abs_direction: 0.0,
            });
            reason = StopReason::Stationary;
            break;
        };
        state = step(&state, &g_bar, mu);
        Zip::from(&mut travel)
            .and(&g_bar)
            .for_each(|t, g| *t += (mu * g).abs());

        let eval = problem.evaluate(&state)?;
        records.push(IterationRecord {
            iteration: k + 1,
            sum_rate: eval.sum_rate,
            j_mse: eval.j_mse,
            step: mu,
            max_abs_gradient: peak,
            max_abs_direction: max_abs(&g_bar),
        });
        let next = cfg.tracked(&eval);
        if relative_change(prev, next) < cfg.rel_tol {
            reason = StopReason::Tolerance;
            break;
        }
        prev = next;
    }

    Ok(RunTrace {
        restart: 0,
        seed,
        initial_sum_rate: start.sum_rate,
        initial_j_mse: start.j_mse,
        records,
        final_state: state,
        reason,
        phase_travel: max_abs(&travel),
    })
}

/// Index of the preferred run: lowest final matching error when sensing is
/// weighted above communication, otherwise highest final sum rate.
pub fn select_best(traces: &[RunTrace], w_sens: f64, w_comm: f64) -> Option<usize> {
    let it = traces.iter().enumerate();
    if w_sens > w_comm {
        it.min_by(|a, b| a.1.final_j_mse().total_cmp(&b.1.final_j_mse()).then(a.0.cmp(&b.0)))
    } else {
        it.max_by(|a, b| a.1.final_sum_rate().total_cmp(&b.1.final_sum_rate()).then(b.0.cmp(&a.0)))
    }
    .map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub best: usize,
    pub traces: Vec<RunTrace>,
}

impl RestartOutcome {
    pub fn best_trace(&self) -> &RunTrace {
        &self.traces[self.best]
    }
    pub fn best_state(&self) -> &PhaseState {
        &self.best_trace().final_state
    }
}

/// `num_restarts` independent runs from uniform random phases, restart `r`
/// seeded with `seed::derive(master_seed, r)`. Runs execute in parallel and
/// are merged by index.
pub fn multi_restart(problem: &IsacProblem, cfg: &D3Config, master_seed: u64) -> Result<RestartOutcome> {
    cfg.validate()?;
    let traces = (0..cfg.num_restarts)
        .into_par_iter()
        .map(|r| {
            let s = seed::derive(master_seed, r as u64);
            let initial = PhaseState::random(problem.atoms(), problem.layers(), &mut seed::rng(s));
            run(initial, problem, cfg, s).map(|mut t| {
                t.restart = r;
                t
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = select_best(&traces, cfg.w_sens, cfg.w_comm).expect("at least one restart");
    Ok(RestartOutcome { best, traces })
}

/// Whether the two strongest pattern bins are exactly `targets`.
pub fn peaks_on_targets(problem: &IsacProblem, state: &PhaseState, targets: &[TargetBin]) -> Result<bool> {
    let mut top = problem.pattern(state)?.strongest_bins(targets.len());
    let mut want = targets.to_vec();
    top.sort();
    want.sort();
    Ok(top == want)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn elementwise_cases() {
        let eps: f64 = 1e-8;
        let g = array![[0.0, 1.0], [eps.sqrt(), -1.0]];
        let n = elementwise_normalize(&g, eps);
        assert_eq!(n[[0, 0]], 0.0);
        assert!((n[[0, 1]] - 0.999_999_995).abs() < 1e-12);
        assert!((n[[1, 0]] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(n.iter().all(|x| x.abs() < 1.0));
    }

    #[test]
    fn differential_cases() {
        let s = array![[0.5, -0.2]];
        let c = array![[0.1, 0.3]];
        assert_eq!(differential_gradient(&s, &c, 1.0, 0.0).unwrap(), s);
        assert!(differential_gradient(&s, &c, 0.0, 0.0).unwrap().iter().all(|&x| x == 0.0));
        assert!(differential_gradient(&s, &s, 1.0, 1.0).unwrap().iter().all(|&x| x == 0.0));
        assert!(differential_gradient(&s, &array![[1.0]], 1.0, 1.0).is_err());
    }

    #[test]
    fn global_cases() {
        let g = array![[PI, -1.0]];
        assert_eq!(global_normalize(&g).unwrap(), g);
        let half = array![[0.5, 0.5], [0.5, 0.5]];
        assert!(global_normalize(&half).unwrap().iter().all(|&x| x == PI));
        let neg = array![[-2.0, 1.0]];
        let n = global_normalize(&neg).unwrap();
        assert_eq!(n[[0, 0]], -PI);
        assert!((n[[0, 1]] - PI / 2.0).abs() < 1e-15);
        assert!(global_normalize(&array![[0.0, 0.0]]).is_none());
    }

    #[test]
    fn step_cases() {
        let s = PhaseState::new(array![[0.1, 1.0]]);
        assert_eq!(step(&s, &array![[0.0, 0.0]], 0.7), s);
        let moved = step(&s, &array![[0.3, 0.0]], 1.0);
        assert!((moved.get(0, 0) - (2.0 * PI - 0.2)).abs() < 1e-14);
        let cfg = D3Config::default();
        assert_eq!(cfg.step_at(3), 0.125);
    }

    fn trace(r: f64, j: f64) -> RunTrace {
        RunTrace {
            restart: 0,
            seed: 0,
            initial_sum_rate: 0.0,
            initial_j_mse: 1.0,
            records: vec![IterationRecord {
                iteration: 1,
                sum_rate: r,
                j_mse: j,
                step: 1.0,
                max_abs_gradient: 1.0,
                max_abs_direction: PI,
            }],
            final_state: PhaseState::zeros(1, 1),
            reason: StopReason::Tolerance,
            phase_travel: 0.0,
        }
    }

    #[test]
    fn selection_rule() {
        let traces = vec![trace(3.0, 0.5), trace(9.0, 0.7), trace(1.0, 0.2), trace(9.0, 0.1)];
        assert_eq!(select_best(&traces, 1.0, 0.0), Some(3));
        assert_eq!(select_best(&traces, 1.0, 1.0), Some(1));
        assert_eq!(select_best(&traces, 0.0, 1.0), Some(1));
        assert_eq!(select_best(&traces[..1], 0.3, 0.9), Some(0));
        assert_eq!(select_best(&[], 1.0, 0.0), None);
    }

    #[test]
    fn config_validation() {
        assert!(D3Config::default().validate().is_ok());
        assert!(D3Config::default().with_weights(1.2, 0.0).validate().is_err());
        let mut c = D3Config::default();
        c.decay = 1.0;
        assert!(c.validate().is_err());
        let mut c = D3Config::default();
        c.num_restarts = 0;
        assert!(c.validate().is_err());
    }
}
