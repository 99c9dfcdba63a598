//! Central differences evaluated in double-double arithmetic.
//!
//! The f64 objectives carry rounding noise of order `1e-16 · J`, which after
//! division by `2h` swamps gradient entries a few orders below `J / h`. Here
//! the beamformer, pattern and SINRs are rebuilt in `TwoFloat` from the same
//! f64 inputs, the perturbation `exp(±jh)` is applied as an exact series, and
//! the two evaluations are differenced before rounding back to f64:
//!
//! * `J+ - J- = (1/N_D²) Σ (P+ - P-)(P+ + P- - 2 P_D)`
//! * `R+ - R- = Σ_n log2(1 + (γ+ - γ-) / (1 + γ-))`
//!
//! The evaluation does not use the `U`/`V` factorization, so it is an
//! independent check of the analytic gradients.

use num_complex::Complex;
use twofloat::TwoFloat;

use crate::problem::IsacProblem;
use crate::wavedomain::PhaseState;
use crate::{Error, RMatrix, Result, C64};

type Dd = TwoFloat;
type Cdd = Complex<TwoFloat>;

fn dd(x: f64) -> Dd {
    Dd::from(x)
}

fn cdd(c: C64) -> Cdd {
    Complex::new(dd(c.re), dd(c.im))
}

fn norm_sqr(c: Cdd) -> Dd {
    c.re * c.re + c.im * c.im
}

/// `exp(jh)` from its Taylor series. Truncation error is below `h^8 / 8!`.
fn rotation(h: f64) -> Cdd {
    let h = dd(h);
    let h2 = h * h;
    let cos = dd(1.0) - h2 / dd(2.0) + h2 * h2 / dd(24.0) - h2 * h2 * h2 / dd(720.0);
    let sin = h * (dd(1.0) - h2 / dd(6.0) + h2 * h2 / dd(120.0) - h2 * h2 * h2 / dd(5040.0));
    Complex::new(cos, sin)
}

struct Lifted {
    /// `M x N_BS`, row-major.
    w1: Vec<Cdd>,
    /// `M x M`, row-major, one per layer after the first.
    wl: Vec<Vec<Cdd>>,
    /// Steering vectors, column `i` at `a[i * M..(i + 1) * M]`.
    a: Vec<Cdd>,
    desired: Vec<Dd>,
    /// `N_C x M`, row-major, pre-scaled by the stream amplitude.
    h: Vec<Cdd>,
    noise: Dd,
    m: usize,
    n_bs: usize,
    n_users: usize,
}

struct Evaluated {
    pattern: Vec<Dd>,
    /// `(1 + γ_n)` numerator and denominator pairs.
    sinr: Vec<(Dd, Dd)>,
}

impl Lifted {
    fn new(problem: &IsacProblem) -> Self {
        let stack = &problem.stack;
        let m = stack.atoms_per_layer();
        let a = problem.steering.vectors();
        let amp = problem.transmit.stream_amplitude();
        Self {
            w1: stack.w1.iter().map(|&c| cdd(c)).collect(),
            wl: stack.wl.iter().map(|w| w.iter().map(|&c| cdd(c)).collect()).collect(),
            a: a.t().iter().map(|&c| cdd(c)).collect(),
            desired: problem.desired.matrix.iter().map(|&x| dd(x)).collect(),
            h: problem.h.iter().map(|&c| cdd(c * amp)).collect(),
            noise: dd(problem.noise_power_mw),
            m,
            n_bs: stack.num_feeds(),
            n_users: problem.h.nrows(),
        }
    }

    fn beamformer(&self, phases: &[Vec<Cdd>]) -> Vec<Cdd> {
        let (m, n) = (self.m, self.n_bs);
        let mut x = self.w1.clone();
        for (l, phase) in phases.iter().enumerate() {
            if l > 0 {
                let w = &self.wl[l - 1];
                let mut next = vec![Cdd::new(dd(0.0), dd(0.0)); m * n];
                for i in 0..m {
                    for k in 0..m {
                        let wik = w[i * m + k];
                        for c in 0..n {
                            next[i * n + c] = next[i * n + c] + wik * x[k * n + c];
                        }
                    }
                }
                x = next;
            }
            for i in 0..m {
                for c in 0..n {
                    x[i * n + c] = x[i * n + c] * phase[i];
                }
            }
        }
        x
    }

    fn evaluate(&self, phases: &[Vec<Cdd>]) -> Evaluated {
        let (m, n) = (self.m, self.n_bs);
        let f = self.beamformer(phases);
        let grid = self.a.len() / m;
        let mut raw = Vec::with_capacity(grid);
        for i in 0..grid {
            let a = &self.a[i * m..(i + 1) * m];
            let mut p = dd(0.0);
            for c in 0..n {
                let mut y = Cdd::new(dd(0.0), dd(0.0));
                for k in 0..m {
                    y = y + f[k * n + c].conj() * a[k];
                }
                p += norm_sqr(y);
            }
            raw.push(p);
        }
        let total = raw.iter().fold(dd(0.0), |s, &x| s + x);
        let pattern = raw.into_iter().map(|x| x / total).collect();

        let mut sinr = Vec::with_capacity(self.n_users);
        for u in 0..self.n_users {
            let hrow = &self.h[u * m..(u + 1) * m];
            let gains: Vec<Dd> = (0..n)
                .map(|c| {
                    let g = (0..m).fold(Cdd::new(dd(0.0), dd(0.0)), |s, k| s + hrow[k] * f[k * n + c]);
                    norm_sqr(g)
                })
                .collect();
            let interference = (0..n).filter(|&c| c != u).fold(self.noise, |s, c| s + gains[c]);
            sinr.push((gains[u] + interference, interference));
        }
        Evaluated { pattern, sinr }
    }
}

/// Central-difference gradients `(∂J_MSE/∂θ, ∂R_sum/∂θ)` at `state` with
/// step `step`, evaluated in double-double arithmetic.
pub fn fd_gradients(problem: &IsacProblem, state: &PhaseState, step: f64) -> Result<(RMatrix, RMatrix)> {
    if !(step > 0.0 && step <= 1e-3) {
        return Err(Error::invalid("step", "must lie in (0, 1e-3]"));
    }
    if state.atoms() != problem.atoms() || state.layers() != problem.layers() {
        return Err(Error::dims(
            "phase state vs problem",
            format!("{} x {}", problem.atoms(), problem.layers()),
            format!("{} x {}", state.atoms(), state.layers()),
        ));
    }
    let lifted = Lifted::new(problem);
    let base: Vec<Vec<Cdd>> = (0..state.layers())
        .map(|l| {
            (0..state.atoms())
                .map(|m| {
                    let t = state.get(m, l);
                    Complex::new(dd(t.cos()), dd(t.sin()))
                })
                .collect()
        })
        .collect();
    let (up, down) = (rotation(step), rotation(-step));
    let cells = (problem.steering.grid_len() * problem.steering.grid_len()) as f64;

    let mut sensing = RMatrix::zeros((state.atoms(), state.layers()));
    let mut comm = RMatrix::zeros((state.atoms(), state.layers()));
    for l in 0..state.layers() {
        for m in 0..state.atoms() {
            let mut phases = base.clone();
            phases[l][m] = base[l][m] * up;
            let plus = lifted.evaluate(&phases);
            phases[l][m] = base[l][m] * down;
            let minus = lifted.evaluate(&phases);

            let dj = plus
                .pattern
                .iter()
                .zip(&minus.pattern)
                .zip(&lifted.desired)
                .fold(dd(0.0), |s, ((&p, &q), &d)| s + (p - q) * (p + q - d - d));
            sensing[[m, l]] = f64::from(dj) / cells / (2.0 * step);

            let dr: f64 = plus
                .sinr
                .iter()
                .zip(&minus.sinr)
                .map(|(&(np, dp), &(nm, dm))| {
                    // (1+γ+)/(1+γ-) - 1, formed before rounding
                    let x = (np * dm - nm * dp) / (nm * dp);
                    f64::from(x).ln_1p() / std::f64::consts::LN_2
                })
                .sum();
            comm[[m, l]] = dr / (2.0 * step);
        }
    }
    if sensing.iter().chain(comm.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Objective("non-finite difference".into()));
    }
    Ok((sensing, comm))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_unit_and_matches_libm() {
        for h in [1e-8, 1e-6, -1e-4, 1e-3] {
            let r = rotation(h);
            let modulus = norm_sqr(r) - dd(1.0);
            assert!(f64::from(modulus).abs() < 1e-28, "h={h}");
            assert!((f64::from(r.re) - h.cos()).abs() < 1e-16);
            assert!((f64::from(r.im) - h.sin()).abs() < 1e-16);
        }
    }
}
