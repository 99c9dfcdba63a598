//! Saleh-Valenzuela user channels and planar-array steering vectors.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geometry::SimGeometry;
use crate::{seed, CMatrix, Error, Result, C64};

/// Half-width of the uniform NLoS angular spread around the LoS AoD (degrees).
pub const NLOS_HALF_SPREAD_DEG: f64 = 5.0;
/// NLoS path power relative to the LoS path.
pub const NLOS_RELATIVE_POWER: f64 = 0.01;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Planar-array response toward (`elevation_deg`, `azimuth_deg`): the Kronecker
/// product of the row (y) and column (z) linear phase ramps.
pub fn steering_vector(geometry: &SimGeometry, elevation_deg: f64, azimuth_deg: f64) -> Array1<C64> {
    let (el, az) = (elevation_deg.to_radians(), azimuth_deg.to_radians());
    let k = 2.0 * PI / geometry.wavelength();
    let step_y = -k * el.sin() * az.cos() * geometry.atom_spacing_y();
    let step_z = -k * el.sin() * az.sin() * geometry.atom_spacing_z();
    let cols = geometry.cols();
    Array1::from_shape_fn(geometry.atoms_per_layer(), |m| {
        let (r, c) = ((m / cols) as f64, (m % cols) as f64);
        C64::from_polar(1.0, r * step_y + c * step_z)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub los_elevation_deg: f64,
    pub los_azimuth_deg: f64,
    #[serde(default = "default_paths")]
    pub num_paths: usize,
    #[serde(default = "default_plane_x")]
    pub plane_x: f64,
}

fn default_paths() -> usize {
    3
}
fn default_plane_x() -> f64 {
    10.0
}

impl UserSpec {
    pub fn new(los_elevation_deg: f64, los_azimuth_deg: f64) -> Self {
        Self {
            los_elevation_deg,
            los_azimuth_deg,
            num_paths: default_paths(),
            plane_x: default_plane_x(),
        }
    }

    /// The four users of the reference scenario.
    pub fn reference_users() -> Vec<UserSpec> {
        vec![
            UserSpec::new(60.0, 45.0),
            UserSpec::new(60.0, 35.0),
            UserSpec::new(-60.0, -45.0),
            UserSpec::new(-60.0, -30.0),
        ]
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        let field = |f: &str| format!("users[{index}].{f}");
        if self.num_paths == 0 {
            return Err(Error::invalid(field("num_paths"), "must be at least 1"));
        }
        for (name, v) in [
            ("los_elevation_deg", self.los_elevation_deg),
            ("los_azimuth_deg", self.los_azimuth_deg),
        ] {
            if !(v > -90.0 && v < 90.0) {
                return Err(Error::invalid(field(name), format!("must lie in (-90, 90), got {v}")));
            }
        }
        if !(self.plane_x > 0.0 && self.plane_x.is_finite()) {
            return Err(Error::invalid(field("plane_x"), "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Distance from the outermost layer center to the user, who sits on the
/// plane `x = plane_x` along the LoS direction.
pub fn user_distance(user: &UserSpec) -> Result<f64> {
    let (el, az) = (
        user.los_elevation_deg.to_radians(),
        user.los_azimuth_deg.to_radians(),
    );
    let uy = el.sin() * az.cos();
    let uz = el.sin() * az.sin();
    let ux = (1.0 - uy * uy - uz * uz).max(0.0).sqrt();
    if ux <= 1e-12 {
        return Err(Error::DirectionParallelToPlane(ux));
    }
    Ok(user.plane_x / ux)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkBudget {
    pub pathloss_const_db: f64,
    pub pathloss_exponent: f64,
    pub bs_gain_dbi: f64,
    pub user_gain_dbi: f64,
    pub noise_power_dbm: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            pathloss_const_db: -32.0,
            pathloss_exponent: 3.5,
            bs_gain_dbi: 5.0,
            user_gain_dbi: 0.0,
            noise_power_dbm: -104.0,
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exponent > 0.0) {
            return Err(Error::invalid("link.pathloss_exponent", "must be > 0"));
        }
        Ok(())
    }

    /// Large-scale gain in dB, antenna gains included.
    pub fn path_gain_db(&self, distance: f64) -> f64 {
        self.pathloss_const_db + self.bs_gain_dbi + self.user_gain_dbi
            - 10.0 * self.pathloss_exponent * distance.log10()
    }

    pub fn path_gain(&self, distance: f64) -> f64 {
        db_to_linear(self.path_gain_db(distance))
    }

    pub fn noise_power_mw(&self) -> f64 {
        db_to_linear(self.noise_power_dbm)
    }
}

/// One channel draw. Row `n` of `h` is user `n`'s channel toward the
/// outermost layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CMatrix,
    pub path_gains: Vec<Vec<C64>>,
    /// `(elevation_deg, azimuth_deg)` per path.
    pub path_angles: Vec<Vec<(f64, f64)>>,
    pub seed: u64,
}

/// `CN(0, variance)`: real and imaginary parts each carry half the variance.
fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

fn channel_row(geometry: &SimGeometry, gains: &[C64], angles: &[(f64, f64)]) -> Array1<C64> {
    let m = geometry.atoms_per_layer();
    let scale = (m as f64 / gains.len() as f64).sqrt();
    let mut row = Array1::<C64>::zeros(m);
    for (g, &(el, az)) in gains.iter().zip(angles) {
        let a = steering_vector(geometry, el, az);
        row.zip_mut_with(&a, |h, a| *h += g * a.conj());
    }
    row.mapv_inplace(|x| x * scale);
    row
}

pub fn sample_channel(
    geometry: &SimGeometry,
    users: &[UserSpec],
    budget: &LinkBudget,
    seed: u64,
) -> Result<ChannelRealization> {
    if users.is_empty() {
        return Err(Error::invalid("users", "at least one user is required"));
    }
    let mut rng = seed::rng(seed);
    let mut path_gains = Vec::with_capacity(users.len());
    let mut path_angles = Vec::with_capacity(users.len());
    for user in users {
        let zeta = budget.path_gain(user_distance(user)?);
        let mut gains = Vec::with_capacity(user.num_paths);
        let mut angles = Vec::with_capacity(user.num_paths);
        for q in 0..user.num_paths {
            if q == 0 {
                angles.push((user.los_elevation_deg, user.los_azimuth_deg));
                gains.push(complex_normal(&mut rng, zeta));
            } else {
                let spread = NLOS_HALF_SPREAD_DEG;
                let el = user.los_elevation_deg + rng.random_range(-spread..=spread);
                let az = user.los_azimuth_deg + rng.random_range(-spread..=spread);
                angles.push((el, az));
                gains.push(complex_normal(&mut rng, NLOS_RELATIVE_POWER * zeta));
            }
        }
        path_gains.push(gains);
        path_angles.push(angles);
    }
    Ok(ChannelRealization::assemble(geometry, path_gains, path_angles, seed))
}

impl ChannelRealization {
    fn assemble(
        geometry: &SimGeometry,
        path_gains: Vec<Vec<C64>>,
        path_angles: Vec<Vec<(f64, f64)>>,
        seed: u64,
    ) -> Self {
        let mut h = Array2::zeros((path_gains.len(), geometry.atoms_per_layer()));
        for (n, (g, a)) in path_gains.iter().zip(&path_angles).enumerate() {
            h.row_mut(n).assign(&channel_row(geometry, g, a));
        }
        Self {
            h,
            path_gains,
            path_angles,
            seed,
        }
    }

    pub fn num_users(&self) -> usize {
        self.h.nrows()
    }

    pub fn to_record(&self) -> ChannelRecord {
        ChannelRecord {
            seed: self.seed,
            users: self
                .path_gains
                .iter()
                .zip(&self.path_angles)
                .map(|(g, a)| UserPaths {
                    gains: g.iter().map(|c| [c.re, c.im]).collect(),
                    angles_deg: a.iter().map(|&(e, z)| [e, z]).collect(),
                })
                .collect(),
        }
    }

    /// Rebuild the channel matrix from recorded path draws.
    pub fn from_record(geometry: &SimGeometry, record: &ChannelRecord) -> Result<Self> {
        let mut gains = Vec::new();
        let mut angles = Vec::new();
        for (i, u) in record.users.iter().enumerate() {
            if u.gains.is_empty() || u.gains.len() != u.angles_deg.len() {
                return Err(Error::invalid(
                    format!("users[{i}]"),
                    "gains and angles must be non-empty and of equal length",
                ));
            }
            gains.push(u.gains.iter().map(|&[re, im]| C64::new(re, im)).collect());
            angles.push(u.angles_deg.iter().map(|&[e, z]| (e, z)).collect());
        }
        if gains.is_empty() {
            return Err(Error::invalid("users", "at least one user is required"));
        }
        Ok(Self::assemble(geometry, gains, angles, record.seed))
    }
}

/// JSON replay form of a [`ChannelRealization`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub seed: u64,
    pub users: Vec<UserPaths>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPaths {
    /// `[re, im]` per path.
    pub gains: Vec<[f64; 2]>,
    /// `[elevation, azimuth]` per path, degrees.
    pub angles_deg: Vec<[f64; 2]>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometryParams;

    fn geom(rows: usize, cols: usize) -> SimGeometry {
        SimGeometry::new(&GeometryParams {
            rows,
            cols,
            num_layers: 2,
            num_feeds: 2,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn broadside_steering_is_all_ones() {
        let a = steering_vector(&geom(3, 4), 0.0, 37.0);
        assert!(a.iter().all(|x| (x - C64::new(1.0, 0.0)).norm() < 1e-15));
        let a = steering_vector(&geom(1, 1), 50.0, 10.0);
        assert_eq!(a.len(), 1);
        assert!((a[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn steering_entries_unit_modulus() {
        let a = steering_vector(&geom(5, 5), -33.0, 71.0);
        assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn distances() {
        assert!((user_distance(&UserSpec::new(0.0, 20.0)).unwrap() - 10.0).abs() < 1e-12);
        assert!((user_distance(&UserSpec::new(60.0, 0.0)).unwrap() - 20.0).abs() < 1e-12);
        let mut u = UserSpec::new(90.0, 0.0);
        u.plane_x = 10.0;
        assert!(matches!(user_distance(&u), Err(Error::DirectionParallelToPlane(_))));
    }

    #[test]
    fn single_path_channel_is_rank_one() {
        let g = geom(2, 2);
        let mut u = UserSpec::new(30.0, 10.0);
        u.num_paths = 1;
        let ch = sample_channel(&g, &[u], &LinkBudget::default(), 5).unwrap();
        let a = steering_vector(&g, 30.0, 10.0);
        let g1 = ch.path_gains[0][0];
        for m in 0..4 {
            let expect = 2.0 * g1 * a[m].conj();
            assert!((ch.h[[0, m]] - expect).norm() < 1e-12 * expect.norm());
        }
    }

    #[test]
    fn nlos_angles_within_spread() {
        let g = geom(2, 2);
        let users = UserSpec::reference_users();
        let ch = sample_channel(&g, &users, &LinkBudget::default(), 11).unwrap();
        for (u, angles) in users.iter().zip(&ch.path_angles) {
            assert_eq!(angles.len(), 3);
            assert_eq!(angles[0], (u.los_elevation_deg, u.los_azimuth_deg));
            for &(e, a) in &angles[1..] {
                assert!((e - u.los_elevation_deg).abs() <= 5.0);
                assert!((a - u.los_azimuth_deg).abs() <= 5.0);
            }
        }
    }

    #[test]
    fn seeded_and_replayable() {
        let g = geom(3, 3);
        let users = UserSpec::reference_users();
        let b = LinkBudget::default();
        let a1 = sample_channel(&g, &users, &b, 99).unwrap();
        let a2 = sample_channel(&g, &users, &b, 99).unwrap();
        assert_eq!(a1, a2);
        assert_ne!(a1, sample_channel(&g, &users, &b, 100).unwrap());

        let json = serde_json::to_string(&a1.to_record()).unwrap();
        let rec: ChannelRecord = serde_json::from_str(&json).unwrap();
        let replay = ChannelRealization::from_record(&g, &rec).unwrap();
        assert_eq!(replay, a1);
    }

    #[test]
    fn empty_user_list_rejected() {
        assert!(sample_channel(&geom(2, 2), &[], &LinkBudget::default(), 0).is_err());
    }

    #[test]
    fn user_validation() {
        let mut u = UserSpec::new(95.0, 0.0);
        assert!(u.validate(0).is_err());
        u.los_elevation_deg = 10.0;
        u.num_paths = 0;
        let e = u.validate(2).unwrap_err().to_string();
        assert!(e.contains("users[2].num_paths"), "{e}");
    }
}
