//! Analytic phase gradients of the beam-matching error and the sum rate, and a
//! central-difference reference.
//!
//! Both gradients use the split `F = V_l Φ_l U_l` around layer `l`, where `U_l`
//! is everything before the layer's phase mask and `V_l` everything after it.
//! A phase `θ` of atom `m` on layer `l` then enters `F` only through the
//! rank-one term `V_l[:, m] exp(jθ) U_l[m, :]`.

use std::f64::consts::LOG2_E;
use std::path::Path;

use ndarray::{Array1, Array2, Axis, Zip};

use crate::geometry::{DiffractionStack, SimGeometry};
use crate::metrics::{AngleGrid, DesiredPattern, SteeringTable, TransmitConfig};
use crate::wavedomain::{check_compatible, scale_rows, PhaseState};
use crate::{CMatrix, Error, RMatrix, Result, C64};

pub mod precise;

/// Partial products of the cascade around every layer, with the full
/// beamformer and the per-layer phase vectors.
#[derive(Debug, Clone)]
pub struct LayerFactors {
    /// `u[l]`: feeds up to the input of layer `l`'s phase mask, `atoms x feeds`.
    pub u: Vec<CMatrix>,
    /// `v[l]`: output of layer `l`'s phase mask to the aperture, `atoms x atoms`.
    pub v: Vec<CMatrix>,
    pub phases: Vec<Array1<C64>>,
    pub f: CMatrix,
}

pub fn layer_factors(state: &PhaseState, stack: &DiffractionStack) -> Result<LayerFactors> {
    check_compatible(state, stack)?;
    let layers = stack.num_layers();
    let phases: Vec<_> = (0..layers)
        .map(|l| state.phase_vector(l))
        .collect::<Result<_>>()?;

    let mut u = Vec::with_capacity(layers);
    u.push(stack.w1.clone());
    for l in 1..layers {
        let mut prev = u[l - 1].clone();
        scale_rows(&mut prev, phases[l - 1].view());
        u.push(stack.wl[l - 1].dot(&prev));
    }
    let mut f = u[layers - 1].clone();
    scale_rows(&mut f, phases[layers - 1].view());

    let m = stack.atoms_per_layer();
    let mut v = vec![Array2::<C64>::eye(m); layers];
    for l in (0..layers - 1).rev() {
        // V_l = V_{l+1} Φ_{l+1} W_{l+1}
        let mut next = v[l + 1].clone();
        Zip::from(next.columns_mut())
            .and(&phases[l + 1])
            .for_each(|mut col, &p| col.mapv_inplace(|x| x * p));
        v[l] = next.dot(&stack.wl[l]);
    }
    Ok(LayerFactors { u, v, phases, f })
}

impl LayerFactors {
    pub fn num_layers(&self) -> usize {
        self.u.len()
    }

    /// Largest relative deviation of `V_l Φ_l U_l` from `F` over all layers.
    pub fn composition_error(&self) -> f64 {
        let norm = |m: &CMatrix| m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let f_norm = norm(&self.f).max(f64::MIN_POSITIVE);
        (0..self.num_layers())
            .map(|l| {
                let mut pu = self.u[l].clone();
                scale_rows(&mut pu, self.phases[l].view());
                norm(&(self.v[l].dot(&pu) - &self.f)) / f_norm
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    /// ∂J/∂θ, `atoms x layers`.
    pub sensing: RMatrix,
    /// ∂R/∂θ, `atoms x layers`.
    pub comm: RMatrix,
}

/// Gradient of the beam-matching error from precomputed factors.
///
/// With `P̄ = P / ΣP` and `r = P̄ - P_D`, the chain rule collapses to
/// `∂J/∂θ = 2/(N² ΣP) Σ_jk (r_jk - <r, P̄>) ∂P_jk/∂θ`, where
/// `∂P_jk/∂θ = -2 Im{ e^{jθ} (a^H V[:, m]) (U[m, :] F^H a) }`.
pub fn grad_sensing_with(
    factors: &LayerFactors,
    steering: &SteeringTable,
    desired: &DesiredPattern,
) -> Result<RMatrix> {
    let n = steering.grid_len();
    if desired.matrix.dim() != (n, n) {
        return Err(Error::dims("desired pattern vs grid", n, desired.matrix.nrows()));
    }
    let projection = steering.project(&factors.f)?;
    let raw = steering.raw_from_projection(&projection);
    let total = raw.sum();
    if !(total > 0.0) {
        return Err(Error::ZeroPattern);
    }
    let residual: Array1<f64> = raw
        .iter()
        .zip(desired.matrix.iter())
        .map(|(p, d)| p / total - d)
        .collect();
    let centre: f64 = residual.iter().zip(raw.iter()).map(|(r, p)| r * p / total).sum();
    let weights = residual.mapv(|r| r - centre);
    let scale = -4.0 / ((n * n) as f64 * total);

    let (atoms, layers) = (factors.f.nrows(), factors.num_layers());
    let mut grad = Array2::zeros((atoms, layers));
    let proj_t = projection.t();
    for l in 0..layers {
        // rows indexed by grid point: a^H V_l and (U_l F^H a)^T
        let mut left = steering.vectors_h().dot(&factors.v[l]);
        let right = proj_t.dot(&factors.u[l].t());
        Zip::from(left.rows_mut())
            .and(&weights)
            .for_each(|mut row, &w| row.mapv_inplace(|x| x * w));
        let acc = (&left * &right).sum_axis(Axis(0));
        for m in 0..atoms {
            grad[[m, l]] = scale * (factors.phases[l][m] * acc[m]).im;
        }
    }
    Ok(grad)
}

/// Gradient of the sum rate from precomputed factors; interference runs over
/// all streams, matching [`crate::metrics::sinr`].
pub fn grad_comm_with(
    factors: &LayerFactors,
    h: &CMatrix,
    cfg: &TransmitConfig,
    noise_power: f64,
) -> Result<RMatrix> {
    let amp = cfg.stream_amplitude();
    let gain = crate::metrics::effective_gain_matrix(h, &factors.f, cfg)?;
    let (users, streams) = gain.dim();
    let power = gain.mapv(|g| g.norm_sqr());
    let denom: Vec<f64> = power.rows().into_iter().map(|r| r.sum() + noise_power).collect();
    let gamma: Vec<f64> = (0..users)
        .map(|p| power[[p, p]] / (denom[p] - power[[p, p]]))
        .collect();

    let (atoms, layers) = (factors.f.nrows(), factors.num_layers());
    let mut grad = Array2::zeros((atoms, layers));
    for l in 0..layers {
        let hv = h.dot(&factors.v[l]);
        let u = &factors.u[l];
        for m in 0..atoms {
            let e = factors.phases[l][m] * amp;
            let mut acc = 0.0;
            for p in 0..users {
                let lead = hv[[p, m]] * e;
                let mut own = 0.0;
                let mut others = 0.0;
                for q in 0..streams {
                    let eta = (lead * u[[m, q]] * gain[[p, q]].conj()).im;
                    if q == p {
                        own = eta;
                    } else {
                        others += eta;
                    }
                }
                acc += (own - gamma[p] * others) / denom[p];
            }
            grad[[m, l]] = -2.0 * LOG2_E * acc;
        }
    }
    Ok(grad)
}

pub fn grad_sensing(
    state: &PhaseState,
    stack: &DiffractionStack,
    grid: &AngleGrid,
    desired: &DesiredPattern,
    geometry: &SimGeometry,
) -> Result<RMatrix> {
    let steering = SteeringTable::new(geometry, grid);
    grad_sensing_with(&layer_factors(state, stack)?, &steering, desired)
}

pub fn grad_comm(
    state: &PhaseState,
    stack: &DiffractionStack,
    h: &CMatrix,
    cfg: &TransmitConfig,
    noise_power: f64,
) -> Result<RMatrix> {
    grad_comm_with(&layer_factors(state, stack)?, h, cfg, noise_power)
}

/// Central differences `(f(θ + h) - f(θ - h)) / 2h`, one coordinate at a time.
pub fn fd_gradient<F>(mut objective: F, state: &PhaseState, step: f64) -> Result<RMatrix>
where
    F: FnMut(&PhaseState) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(Error::invalid("step", "must be > 0"));
    }
    let mut grad = Array2::zeros((state.atoms(), state.layers()));
    for ((m, l), g) in grad.indexed_iter_mut() {
        let plus = objective(&state.perturbed(m, l, step))?;
        let minus = objective(&state.perturbed(m, l, -step))?;
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(Error::Objective(format!("non-finite value at ({m}, {l})")));
        }
        *g = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

/// Largest entrywise relative error with an absolute floor for tiny entries.
pub fn max_relative_error(analytic: &RMatrix, reference: &RMatrix, floor: f64) -> f64 {
    analytic
        .iter()
        .zip(reference.iter())
        .map(|(a, r)| (a - r).abs() / r.abs().max(floor))
        .fold(0.0, f64::max)
}

/// Dump an `atoms x layers` gradient as CSV with a `layer_<l>` header.
pub fn write_gradient_csv(path: &Path, grad: &RMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..grad.ncols()).map(|l| format!("layer_{l}")))?;
    for row in grad.rows() {
        w.write_record(row.iter().map(|x| format!("{x:e}")))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_diffraction_stack, GeometryParams};

    fn setup(side: usize, layers: usize, feeds: usize) -> DiffractionStack {
        build_diffraction_stack(
            &SimGeometry::new(&GeometryParams::square(side, layers, feeds)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_layer_factors_are_base_cases() {
        let stack = setup(2, 1, 2);
        let mut rng = crate::seed::rng(3);
        let f = layer_factors(&PhaseState::random(4, 1, &mut rng), &stack).unwrap();
        assert_eq!(f.u[0], stack.w1);
        assert_eq!(f.v[0], Array2::<C64>::eye(4));
    }

    #[test]
    fn two_layer_factors_expand_directly() {
        let stack = setup(2, 2, 2);
        let mut rng = crate::seed::rng(4);
        let s = PhaseState::random(4, 2, &mut rng);
        let f = layer_factors(&s, &stack).unwrap();
        let u2 = stack.wl[0].dot(&s.phase_matrix(0).unwrap()).dot(&stack.w1);
        let v1 = s.phase_matrix(1).unwrap().dot(&stack.wl[0]);
        assert!((&f.u[1] - &u2).iter().all(|x| x.norm() < 1e-14));
        assert!((&f.v[0] - &v1).iter().all(|x| x.norm() < 1e-14));
        assert!(f.composition_error() < 1e-12);
    }

    #[test]
    fn fd_basics() {
        let s = PhaseState::new(Array2::from_elem((2, 2), 0.7));
        let zero = fd_gradient(|_| Ok(3.0), &s, 1e-6).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));

        let sine = fd_gradient(|st| Ok(st.get(0, 0).sin()), &s, 1e-6).unwrap();
        assert!((sine[[0, 0]] - 0.7f64.cos()).abs() < 1e-8);
        assert!(sine[[1, 0]].abs() < 1e-12);

        let quad = fd_gradient(
            |st| Ok(st.theta().iter().map(|t| 2.0 * t * t - t).sum()),
            &s,
            1e-3,
        )
        .unwrap();
        assert!(quad.iter().all(|g| (g - (4.0 * 0.7 - 1.0)).abs() < 1e-9));

        assert!(fd_gradient(|_| Ok(0.0), &s, 0.0).is_err());
        assert!(fd_gradient(|_| Ok(f64::NAN), &s, 1e-3).is_err());
        assert!(fd_gradient(|_| Err(Error::Objective("boom".into())), &s, 1e-3).is_err());
    }

    #[test]
    fn zero_channel_gives_zero_comm_gradient() {
        let stack = setup(2, 2, 3);
        let mut rng = crate::seed::rng(9);
        let s = PhaseState::random(4, 2, &mut rng);
        let cfg = TransmitConfig::new(100.0, 2, 1).unwrap();
        let g = grad_comm(&s, &stack, &Array2::zeros((2, 4)), &cfg, 1e-3).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }
}
