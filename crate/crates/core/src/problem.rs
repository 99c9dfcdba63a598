//! One optimization instance: a fixed stack, channel draw, and sensing target.

use crate::channel::ChannelRealization;
use crate::geometry::{build_diffraction_stack, DiffractionStack, SimGeometry};
use crate::gradients::{grad_comm_with, grad_sensing_with, layer_factors, GradientField, LayerFactors};
use crate::metrics::{
    beam_matching_error, effective_gain_matrix, sum_rate, AngleGrid, BeamPattern, DesiredPattern,
    SteeringTable, TransmitConfig,
};
use crate::wavedomain::PhaseState;
use crate::{CMatrix, Error, Result};

#[derive(Debug, Clone)]
pub struct IsacProblem {
    pub stack: DiffractionStack,
    pub steering: SteeringTable,
    pub desired: DesiredPattern,
    pub h: CMatrix,
    pub transmit: TransmitConfig,
    pub noise_power_mw: f64,
}

/// Both objectives at one phase state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub sum_rate: f64,
    pub j_mse: f64,
}

impl IsacProblem {
    pub fn new(
        geometry: &SimGeometry,
        grid: &AngleGrid,
        desired: DesiredPattern,
        channel: &ChannelRealization,
        transmit: TransmitConfig,
        noise_power_mw: f64,
    ) -> Result<Self> {
        let stack = build_diffraction_stack(geometry)?;
        Self::from_parts(
            stack,
            SteeringTable::new(geometry, grid),
            desired,
            channel.h.clone(),
            transmit,
            noise_power_mw,
        )
    }

    pub fn from_parts(
        stack: DiffractionStack,
        steering: SteeringTable,
        desired: DesiredPattern,
        h: CMatrix,
        transmit: TransmitConfig,
        noise_power_mw: f64,
    ) -> Result<Self> {
        let m = stack.atoms_per_layer();
        if steering.atoms() != m || h.ncols() != m {
            return Err(Error::dims("problem atoms", m, format!("{} / {}", steering.atoms(), h.ncols())));
        }
        if stack.num_feeds() != transmit.num_streams() || h.nrows() != transmit.num_users {
            return Err(Error::dims(
                "problem streams",
                format!("{} feeds, {} users", transmit.num_streams(), transmit.num_users),
                format!("{} feeds, {} users", stack.num_feeds(), h.nrows()),
            ));
        }
        let n = steering.grid_len();
        if desired.matrix.dim() != (n, n) {
            return Err(Error::dims("desired pattern vs grid", n, desired.matrix.nrows()));
        }
        if !(noise_power_mw > 0.0) {
            return Err(Error::invalid("noise_power", "must be > 0"));
        }
        Ok(Self {
            stack,
            steering,
            desired,
            h,
            transmit,
            noise_power_mw,
        })
    }

    pub fn atoms(&self) -> usize {
        self.stack.atoms_per_layer()
    }
    pub fn layers(&self) -> usize {
        self.stack.num_layers()
    }

    pub fn beamformer(&self, state: &PhaseState) -> Result<CMatrix> {
        crate::wavedomain::beamforming_matrix(state, &self.stack)
    }

    pub fn pattern(&self, state: &PhaseState) -> Result<BeamPattern> {
        self.steering.pattern(&self.beamformer(state)?)
    }

    pub fn sum_rate_of(&self, f: &CMatrix) -> Result<f64> {
        let gain = effective_gain_matrix(&self.h, f, &self.transmit)?;
        Ok(sum_rate(&gain, self.noise_power_mw))
    }

    pub fn j_mse_of(&self, f: &CMatrix) -> Result<f64> {
        beam_matching_error(&self.steering.pattern(f)?, &self.desired)
    }

    pub fn evaluate(&self, state: &PhaseState) -> Result<Evaluation> {
        let f = self.beamformer(state)?;
        Ok(Evaluation {
            sum_rate: self.sum_rate_of(&f)?,
            j_mse: self.j_mse_of(&f)?,
        })
    }

    pub fn factors(&self, state: &PhaseState) -> Result<LayerFactors> {
        layer_factors(state, &self.stack)
    }

    /// Gradients of both objectives. Skips work for an objective whose weight is zero.
    pub fn gradients_weighted(
        &self,
        factors: &LayerFactors,
        need_sensing: bool,
        need_comm: bool,
    ) -> Result<GradientField> {
        let zeros = || ndarray::Array2::zeros((self.atoms(), self.layers()));
        Ok(GradientField {
            sensing: if need_sensing {
                grad_sensing_with(factors, &self.steering, &self.desired)?
            } else {
                zeros()
            },
            comm: if need_comm {
                grad_comm_with(factors, &self.h, &self.transmit, self.noise_power_mw)?
            } else {
                zeros()
            },
        })
    }

    pub fn gradients(&self, state: &PhaseState) -> Result<GradientField> {
        self.gradients_weighted(&self.factors(state)?, true, true)
    }
}
