//! Communication and sensing figures of merit.
//!
//! The beam pattern is sampled on an `N_D x N_D` grid of (elevation, azimuth)
//! angles. Pattern matrices are indexed `[elevation bin, azimuth bin]`; the
//! flattened grid index used by [`SteeringTable`] is `j * N_D + k`.

use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::channel::steering_vector;
use crate::geometry::SimGeometry;
use crate::{CMatrix, Error, RMatrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmitConfig {
    pub total_power_mw: f64,
    pub num_users: usize,
    pub num_targets: usize,
}

impl TransmitConfig {
    pub fn new(total_power_mw: f64, num_users: usize, num_targets: usize) -> Result<Self> {
        if !(total_power_mw > 0.0 && total_power_mw.is_finite()) {
            return Err(Error::invalid("total_power", "must be finite and > 0"));
        }
        if num_users == 0 {
            return Err(Error::invalid("num_users", "must be at least 1"));
        }
        Ok(Self {
            total_power_mw,
            num_users,
            num_targets,
        })
    }

    /// Feed antennas / data streams, users plus targets.
    pub fn num_streams(&self) -> usize {
        self.num_users + self.num_targets
    }

    /// Per-stream amplitude under equal power across the feeds.
    pub fn stream_amplitude(&self) -> f64 {
        (self.total_power_mw / self.num_streams() as f64).sqrt()
    }
}

/// `sqrt(P / N_BS) · H · F`, users by streams.
pub fn effective_gain_matrix(h: &CMatrix, f: &CMatrix, cfg: &TransmitConfig) -> Result<CMatrix> {
    if h.ncols() != f.nrows() {
        return Err(Error::dims("channel x beamformer", h.ncols(), f.nrows()));
    }
    if f.ncols() != cfg.num_streams() || h.nrows() != cfg.num_users {
        return Err(Error::dims(
            "effective gain vs transmit config",
            format!("{}x{}", cfg.num_users, cfg.num_streams()),
            format!("{}x{}", h.nrows(), f.ncols()),
        ));
    }
    let c = cfg.stream_amplitude();
    Ok(h.dot(f).mapv(|x| x * c))
}

/// SINR of user `n`; every other stream, sensing streams included, interferes.
///
/// Panics if `n` is not a valid row/column of `gain`.
pub fn sinr(gain: &CMatrix, n: usize, noise_power: f64) -> f64 {
    let row = gain.row(n);
    let signal = row[n].norm_sqr();
    let total: f64 = row.iter().map(|g| g.norm_sqr()).sum();
    signal / (total - signal + noise_power)
}

/// Sum over users of `log2(1 + SINR)`, bits/s/Hz.
pub fn sum_rate(gain: &CMatrix, noise_power: f64) -> f64 {
    (0..gain.nrows())
        .map(|n| (1.0 + sinr(gain, n, noise_power)).log2())
        .sum()
}

/// Which point of a bin the steering vector is evaluated at.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridAnchor {
    #[default]
    LowerEdge,
    Center,
}

/// Evenly spaced angles shared by the elevation and azimuth axes. Bin number
/// `j` (1-based) covers `[-90 + j w, -90 + (j + 1) w]` with `w = 180 / N_D`,
/// so for `N_D = 36` bin 9 starts at -45° and bin 27 at +45°.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    samples_deg: Vec<f64>,
    bin_width_deg: f64,
}

impl AngleGrid {
    pub fn uniform(n: usize, anchor: GridAnchor) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("grid_points", "must be at least 1"));
        }
        let w = 180.0 / n as f64;
        let offset = match anchor {
            GridAnchor::LowerEdge => 0.0,
            GridAnchor::Center => 0.5 * w,
        };
        Ok(Self {
            samples_deg: (1..=n).map(|j| -90.0 + j as f64 * w + offset).collect(),
            bin_width_deg: w,
        })
    }

    pub fn len(&self) -> usize {
        self.samples_deg.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples_deg.is_empty()
    }
    pub fn samples_deg(&self) -> &[f64] {
        &self.samples_deg
    }
    pub fn bin_width_deg(&self) -> f64 {
        self.bin_width_deg
    }
}

/// Steering vectors for every grid point, cached in both orientations.
#[derive(Debug, Clone)]
pub struct SteeringTable {
    n_d: usize,
    /// `atoms x N_D²`, column `j * N_D + k` is `a(ψ_j, φ_k)`.
    a: CMatrix,
    /// Conjugate transpose of `a`.
    a_h: CMatrix,
}

impl SteeringTable {
    pub fn new(geometry: &SimGeometry, grid: &AngleGrid) -> Self {
        let n_d = grid.len();
        let m = geometry.atoms_per_layer();
        let mut a = Array2::zeros((m, n_d * n_d));
        for (j, &el) in grid.samples_deg().iter().enumerate() {
            for (k, &az) in grid.samples_deg().iter().enumerate() {
                a.column_mut(j * n_d + k)
                    .assign(&steering_vector(geometry, el, az));
            }
        }
        let a_h = a.t().mapv(|x| x.conj());
        Self { n_d, a, a_h }
    }

    pub fn grid_len(&self) -> usize {
        self.n_d
    }
    pub fn atoms(&self) -> usize {
        self.a.nrows()
    }
    pub fn vectors(&self) -> &CMatrix {
        &self.a
    }
    pub fn vectors_h(&self) -> &CMatrix {
        &self.a_h
    }

    /// `F^H a` for every grid point, `streams x N_D²`.
    pub fn project(&self, f: &CMatrix) -> Result<CMatrix> {
        if f.nrows() != self.atoms() {
            return Err(Error::dims("beamformer vs steering table", self.atoms(), f.nrows()));
        }
        Ok(f.t().mapv(|x| x.conj()).dot(&self.a))
    }

    /// Raw pattern from a projection computed by [`Self::project`].
    pub fn raw_from_projection(&self, projection: &CMatrix) -> RMatrix {
        let flat = projection.map(|x| x.norm_sqr()).sum_axis(Axis(0));
        flat.into_shape_with_order((self.n_d, self.n_d))
            .expect("projection width is N_D²")
    }

    pub fn pattern(&self, f: &CMatrix) -> Result<BeamPattern> {
        BeamPattern::from_raw(self.raw_from_projection(&self.project(f)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamPattern {
    pub raw: RMatrix,
    pub normalized: RMatrix,
}

impl BeamPattern {
    pub fn from_raw(raw: RMatrix) -> Result<Self> {
        let total: f64 = raw.sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::ZeroPattern);
        }
        let normalized = raw.mapv(|x| x / total);
        Ok(Self { raw, normalized })
    }

    pub fn l1_mass(&self) -> f64 {
        self.raw.sum()
    }

    /// Grid bins ordered by decreasing normalized gain, as 1-based [`TargetBin`]s.
    pub fn strongest_bins(&self, count: usize) -> Vec<TargetBin> {
        let mut idx: Vec<_> = self.normalized.indexed_iter().collect();
        idx.sort_by(|a, b| b.1.total_cmp(a.1).then(a.0.cmp(&b.0)));
        idx.into_iter()
            .take(count)
            .map(|((j, k), _)| TargetBin::new(j + 1, k + 1))
            .collect()
    }

    /// Normalized pattern as CSV; row = elevation bin, column = azimuth bin.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_grid_csv(path, &self.normalized)
    }
}

pub(crate) fn write_grid_csv(path: &Path, grid: &RMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in grid.rows() {
        w.write_record(row.iter().map(|x| format!("{x:e}")))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn beam_pattern(f: &CMatrix, grid: &AngleGrid, geometry: &SimGeometry) -> Result<BeamPattern> {
    SteeringTable::new(geometry, grid).pattern(f)
}

/// 1-based (elevation, azimuth) bin number on an [`AngleGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TargetBin {
    pub elevation: usize,
    pub azimuth: usize,
}

impl TargetBin {
    pub const fn new(elevation: usize, azimuth: usize) -> Self {
        Self { elevation, azimuth }
    }

    /// Target bins of the reference two-target scenario.
    pub fn reference_targets() -> Vec<TargetBin> {
        vec![TargetBin::new(9, 27), TargetBin::new(27, 9)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesiredPattern {
    pub target_bins: Vec<TargetBin>,
    pub matrix: RMatrix,
}

/// Indicator pattern with ones at `targets`. With `normalize`, the indicator
/// is scaled to unit ℓ1 mass to match the normalized beam pattern.
pub fn desired_pattern(
    grid: &AngleGrid,
    targets: &[TargetBin],
    normalize: bool,
) -> Result<DesiredPattern> {
    let n = grid.len();
    let mut matrix = Array2::zeros((n, n));
    for t in targets {
        for (what, index) in [("elevation bin", t.elevation), ("azimuth bin", t.azimuth)] {
            if index == 0 || index > n {
                return Err(Error::IndexOutOfRange { what, index, len: n });
            }
        }
        matrix[[t.elevation - 1, t.azimuth - 1]] = 1.0;
    }
    if normalize {
        let mass = matrix.sum();
        if mass > 0.0 {
            matrix.mapv_inplace(|x| x / mass);
        }
    }
    Ok(DesiredPattern {
        target_bins: targets.to_vec(),
        matrix,
    })
}

/// Mean squared deviation `(1/N_D²) Σ (P̄ - P_D)²`.
pub fn beam_matching_error(pattern: &BeamPattern, desired: &DesiredPattern) -> Result<f64> {
    if pattern.normalized.dim() != desired.matrix.dim() {
        return Err(Error::dims(
            "beam pattern vs desired pattern",
            format!("{:?}", desired.matrix.dim()),
            format!("{:?}", pattern.normalized.dim()),
        ));
    }
    let n = pattern.normalized.len() as f64;
    let sq: f64 = pattern
        .normalized
        .iter()
        .zip(desired.matrix.iter())
        .map(|(s, d)| (s - d) * (s - d))
        .sum();
    Ok(sq / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometryParams;
    use crate::C64;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn zero_beamformer_gives_zero_gain() {
        let cfg = TransmitConfig::new(100.0, 2, 1).unwrap();
        let h = Array2::from_elem((2, 4), c(1.0, -1.0));
        let g = effective_gain_matrix(&h, &Array2::zeros((4, 3)), &cfg).unwrap();
        assert!(g.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn gain_scales_with_amplitude() {
        let h = array![[c(1.0, 0.5), c(-0.2, 0.1)]];
        let f = array![[c(0.3, 0.0), c(0.0, 1.0)], [c(1.0, 1.0), c(2.0, 0.0)]];
        let g1 = effective_gain_matrix(&h, &f, &TransmitConfig::new(1.0, 1, 1).unwrap()).unwrap();
        let g4 = effective_gain_matrix(&h, &f, &TransmitConfig::new(4.0, 1, 1).unwrap()).unwrap();
        for (a, b) in g1.iter().zip(g4.iter()) {
            assert!((2.0 * a - b).norm() < 1e-15);
        }
        assert!(effective_gain_matrix(&h, &f.t().to_owned(), &TransmitConfig::new(1.0, 2, 0).unwrap()).is_err());
    }

    #[test]
    fn sinr_cases() {
        let g = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        assert!((sinr(&g, 0, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(sinr(&g, 1, 1.0), 0.0);
    }

    #[test]
    fn sum_rate_closed_forms() {
        let g = Array2::from_diag(&array![c(1.0, 0.0), c(0.0, 1.0)]);
        assert!((sum_rate(&g, 1.0) - 2.0).abs() < 1e-15);
        assert_eq!(sum_rate(&Array2::zeros((3, 4)), 1.0), 0.0);
        for gamma in [3.0f64, 15.0] {
            let g = Array2::from_diag(&ndarray::Array1::from_elem(3, c(gamma.sqrt(), 0.0)));
            assert!((sum_rate(&g, 1.0) - 3.0 * (1.0 + gamma).log2()).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_indices_match_reference_ranges() {
        let g = AngleGrid::uniform(36, GridAnchor::LowerEdge).unwrap();
        assert_eq!(g.len(), 36);
        assert!((g.samples_deg()[8] + 45.0).abs() < 1e-12);
        assert!((g.samples_deg()[26] - 45.0).abs() < 1e-12);
        assert_eq!(g.bin_width_deg(), 5.0);
        let c = AngleGrid::uniform(36, GridAnchor::Center).unwrap();
        assert!((c.samples_deg()[8] + 42.5).abs() < 1e-12);
        assert!(AngleGrid::uniform(0, GridAnchor::LowerEdge).is_err());
    }

    #[test]
    fn desired_pattern_cases() {
        let grid = AngleGrid::uniform(36, GridAnchor::LowerEdge).unwrap();
        let d = desired_pattern(&grid, &TargetBin::reference_targets(), false).unwrap();
        assert_eq!(d.matrix.iter().filter(|&&x| x != 0.0).count(), 2);
        assert_eq!(d.matrix[[8, 26]], 1.0);
        assert_eq!(d.matrix[[26, 8]], 1.0);

        assert_eq!(desired_pattern(&grid, &[], false).unwrap().matrix.sum(), 0.0);
        let corner = desired_pattern(&grid, &[TargetBin::new(1, 1)], false).unwrap();
        assert_eq!(corner.matrix[[0, 0]], 1.0);
        assert_eq!(corner.matrix.sum(), 1.0);

        let norm = desired_pattern(&grid, &TargetBin::reference_targets(), true).unwrap();
        assert!((norm.matrix.sum() - 1.0).abs() < 1e-15);

        assert!(desired_pattern(&grid, &[TargetBin::new(37, 1)], false).is_err());
        assert!(desired_pattern(&grid, &[TargetBin::new(0, 1)], false).is_err());
    }

    #[test]
    fn matching_error_cases() {
        let grid = AngleGrid::uniform(2, GridAnchor::LowerEdge).unwrap();
        let d = desired_pattern(&grid, &[TargetBin::new(1, 2)], false).unwrap();
        let p = BeamPattern::from_raw(array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        // P̄ = [.1 .2; .3 .4], P_D = [0 1; 0 0]
        let expect = (0.01 + 0.64 + 0.09 + 0.16) / 4.0;
        assert!((beam_matching_error(&p, &d).unwrap() - expect).abs() < 1e-15);

        let same = BeamPattern::from_raw(array![[0.0, 3.0], [0.0, 0.0]]).unwrap();
        assert_eq!(beam_matching_error(&same, &d).unwrap(), 0.0);

        let zero = desired_pattern(&grid, &[], false).unwrap();
        let e = beam_matching_error(&p, &zero).unwrap();
        assert!((e - 0.30 / 4.0).abs() < 1e-15);

        let wrong = desired_pattern(&AngleGrid::uniform(3, GridAnchor::LowerEdge).unwrap(), &[], false).unwrap();
        assert!(beam_matching_error(&p, &wrong).is_err());
    }

    #[test]
    fn zero_pattern_is_distinct_error() {
        assert!(matches!(
            BeamPattern::from_raw(Array2::zeros((3, 3))),
            Err(Error::ZeroPattern)
        ));
    }

    #[test]
    fn rank_one_pattern_and_scale_invariance() {
        let geom = crate::geometry::SimGeometry::new(&GeometryParams::square(2, 1, 2)).unwrap();
        let grid = AngleGrid::uniform(4, GridAnchor::LowerEdge).unwrap();
        let col = array![c(1.0, 0.0), c(0.0, 1.0), c(-0.5, 0.2), c(0.3, 0.3)];
        let mut f = Array2::zeros((4, 2));
        f.column_mut(1).assign(&col);
        let p = beam_pattern(&f, &grid, &geom).unwrap();
        for (j, &el) in grid.samples_deg().iter().enumerate() {
            for (k, &az) in grid.samples_deg().iter().enumerate() {
                let a = steering_vector(&geom, el, az);
                let ip: C64 = a.iter().zip(col.iter()).map(|(a, c)| a.conj() * c).sum();
                assert!((p.raw[[j, k]] - ip.norm_sqr()).abs() < 1e-12);
            }
        }
        assert!((p.normalized.sum() - 1.0).abs() < 1e-12);
        let scaled = beam_pattern(&f.mapv(|x| x * 3.7), &grid, &geom).unwrap();
        for (a, b) in p.normalized.iter().zip(scaled.normalized.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn strongest_bins_are_one_based() {
        let p = BeamPattern::from_raw(array![[1.0, 5.0], [3.0, 0.5]]).unwrap();
        assert_eq!(p.strongest_bins(2), vec![TargetBin::new(1, 2), TargetBin::new(2, 1)]);
    }
}
