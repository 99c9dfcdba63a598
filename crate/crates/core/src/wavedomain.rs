//! Meta-atom phase shifts and the cascaded wave-domain beamforming matrix.

use std::f64::consts::TAU;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::DiffractionStack;
use crate::{CMatrix, Error, RMatrix, Result, C64};

/// Wrap an angle into `[0, 2π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Phase of every meta-atom, `theta[[m, l]]` for atom `m` on layer `l`.
/// Entries always lie in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    theta: RMatrix,
}

impl PhaseState {
    /// Takes an `atoms x layers` matrix and wraps it.
    pub fn new(mut theta: RMatrix) -> Self {
        theta.mapv_inplace(wrap_phase);
        Self { theta }
    }

    pub fn zeros(atoms: usize, layers: usize) -> Self {
        Self {
            theta: Array2::zeros((atoms, layers)),
        }
    }

    /// Uniform random phases in `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(atoms: usize, layers: usize, rng: &mut R) -> Self {
        Self::new(Array2::from_shape_simple_fn((atoms, layers), || {
            rng.random::<f64>() * TAU
        }))
    }

    pub fn atoms(&self) -> usize {
        self.theta.nrows()
    }
    pub fn layers(&self) -> usize {
        self.theta.ncols()
    }
    pub fn theta(&self) -> &RMatrix {
        &self.theta
    }
    pub fn get(&self, atom: usize, layer: usize) -> f64 {
        self.theta[[atom, layer]]
    }

    pub fn set(&mut self, atom: usize, layer: usize, value: f64) {
        self.theta[[atom, layer]] = wrap_phase(value);
    }

    /// Copy with one coordinate shifted by `delta` (wrapped).
    pub fn perturbed(&self, atom: usize, layer: usize, delta: f64) -> Self {
        let mut out = self.clone();
        out.set(atom, layer, self.get(atom, layer) + delta);
        out
    }

    /// `exp(j θ)` for every atom of `layer`.
    pub fn phase_vector(&self, layer: usize) -> Result<Array1<C64>> {
        self.check_layer(layer)?;
        Ok(self
            .theta
            .column(layer)
            .mapv(|t| C64::from_polar(1.0, t)))
    }

    /// Diagonal phase-shift matrix of `layer`.
    pub fn phase_matrix(&self, layer: usize) -> Result<CMatrix> {
        Ok(Array2::from_diag(&self.phase_vector(layer)?))
    }

    /// Flat layer-major form: all atoms of layer 0, then layer 1, ...
    pub fn to_flat(&self) -> Vec<f64> {
        self.theta.t().iter().copied().collect()
    }

    pub fn from_flat(atoms: usize, layers: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != atoms * layers {
            return Err(Error::dims("phase state", atoms * layers, flat.len()));
        }
        let t = Array2::from_shape_vec((layers, atoms), flat.to_vec()).expect("length checked");
        Ok(Self::new(t.reversed_axes().as_standard_layout().into_owned()))
    }

    fn check_layer(&self, layer: usize) -> Result<()> {
        if layer < self.layers() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "layer",
                index: layer,
                len: self.layers(),
            })
        }
    }
}

/// Serialized form of [`PhaseState`]; `theta` is layer-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub atoms: usize,
    pub layers: usize,
    pub theta: Vec<f64>,
}

impl Serialize for PhaseState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PhaseRecord {
            atoms: self.atoms(),
            layers: self.layers(),
            theta: self.to_flat(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PhaseState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PhaseRecord::deserialize(d)?;
        PhaseState::from_flat(r.atoms, r.layers, &r.theta).map_err(serde::de::Error::custom)
    }
}

/// Left-multiply `m` by `diag(d)` in place.
pub(crate) fn scale_rows(m: &mut CMatrix, d: ArrayView1<C64>) {
    for (mut row, &s) in m.axis_iter_mut(Axis(0)).zip(d.iter()) {
        row.mapv_inplace(|x| x * s);
    }
}

pub(crate) fn check_compatible(state: &PhaseState, stack: &DiffractionStack) -> Result<()> {
    let expected = (stack.atoms_per_layer(), stack.num_layers());
    if (state.atoms(), state.layers()) != expected {
        return Err(Error::dims(
            "phase state vs diffraction stack",
            format!("{}x{}", expected.0, expected.1),
            format!("{}x{}", state.atoms(), state.layers()),
        ));
    }
    Ok(())
}

/// End-to-end beamformer `Φ_L W_L ... Φ_1 W_1`, shape `atoms x feeds`.
pub fn beamforming_matrix(state: &PhaseState, stack: &DiffractionStack) -> Result<CMatrix> {
    check_compatible(state, stack)?;
    let mut f = stack.w1.clone();
    scale_rows(&mut f, state.phase_vector(0)?.view());
    for (i, w) in stack.wl.iter().enumerate() {
        f = w.dot(&f);
        scale_rows(&mut f, state.phase_vector(i + 1)?.view());
    }
    Ok(f)
}
