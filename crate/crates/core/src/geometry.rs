//! Physical layout of the feed array and metasurface layers, and the
//! Rayleigh-Sommerfeld diffraction matrices between them.
//!
//! Coordinates: layers are parallel to the y-z plane and stacked along +x.
//! The outermost layer sits at `x = 0`; layer `l` (0-based) sits at
//! `x = -thickness + (l + 1) * layer_spacing`. Atoms form a centered grid with
//! rows along y and columns along z; atom `m = row * cols + col`, which matches
//! the Kronecker ordering of [`crate::channel::steering_vector`]. The feed ULA
//! lies along y, centered on the stack axis, `feed_offset` behind layer 0.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{CMatrix, Error, Result, C64, SPEED_OF_LIGHT};

/// Carrier frequency of the reference scenario (Hz).
pub const DEFAULT_CARRIER_HZ: f64 = 28e9;
/// Total stack depth of the reference scenario (m).
pub const DEFAULT_THICKNESS_M: f64 = 0.05;

/// Construction parameters for [`SimGeometry`]. Lengths left as `None` take the
/// wavelength-relative defaults (λ/2 spacings, λ²/4 atom area,
/// feed offset equal to the layer spacing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryParams {
    pub carrier_hz: f64,
    pub num_layers: usize,
    pub rows: usize,
    pub cols: usize,
    pub atom_spacing_y: Option<f64>,
    pub atom_spacing_z: Option<f64>,
    pub atom_area: Option<f64>,
    pub thickness: f64,
    pub num_feeds: usize,
    pub feed_spacing: Option<f64>,
    pub feed_offset: Option<f64>,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            carrier_hz: DEFAULT_CARRIER_HZ,
            num_layers: 7,
            rows: 10,
            cols: 10,
            atom_spacing_y: None,
            atom_spacing_z: None,
            atom_area: None,
            thickness: DEFAULT_THICKNESS_M,
            num_feeds: 6,
            feed_spacing: None,
            feed_offset: None,
        }
    }
}

impl GeometryParams {
    /// Reference layout with a square `side x side` metasurface.
    pub fn square(side: usize, num_layers: usize, num_feeds: usize) -> Self {
        Self {
            rows: side,
            cols: side,
            num_layers,
            num_feeds,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimGeometry {
    wavelength: f64,
    num_layers: usize,
    rows: usize,
    cols: usize,
    atom_spacing_y: f64,
    atom_spacing_z: f64,
    atom_area: f64,
    sim_thickness: f64,
    layer_spacing: f64,
    num_feeds: usize,
    feed_spacing: f64,
    feed_offset: f64,
}

fn positive(field: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {value}")))
    }
}

fn nonzero(field: &str, value: usize) -> Result<usize> {
    if value >= 1 {
        Ok(value)
    } else {
        Err(Error::invalid(field, "must be at least 1"))
    }
}

impl SimGeometry {
    pub fn new(params: &GeometryParams) -> Result<Self> {
        let wavelength = SPEED_OF_LIGHT / positive("carrier_hz", params.carrier_hz)?;
        let num_layers = nonzero("num_layers", params.num_layers)?;
        let sim_thickness = positive("thickness", params.thickness)?;
        let layer_spacing = sim_thickness / num_layers as f64;
        let half = wavelength / 2.0;
        Ok(Self {
            wavelength,
            num_layers,
            rows: nonzero("rows", params.rows)?,
            cols: nonzero("cols", params.cols)?,
            atom_spacing_y: positive("atom_spacing_y", params.atom_spacing_y.unwrap_or(half))?,
            atom_spacing_z: positive("atom_spacing_z", params.atom_spacing_z.unwrap_or(half))?,
            atom_area: positive(
                "atom_area",
                params.atom_area.unwrap_or(wavelength * wavelength / 4.0),
            )?,
            sim_thickness,
            layer_spacing,
            num_feeds: nonzero("num_feeds", params.num_feeds)?,
            feed_spacing: positive("feed_spacing", params.feed_spacing.unwrap_or(half))?,
            feed_offset: positive("feed_offset", params.feed_offset.unwrap_or(layer_spacing))?,
        })
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn num_layers(&self) -> usize {
        self.num_layers
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    /// Meta-atoms per layer, `rows * cols`.
    pub fn atoms_per_layer(&self) -> usize {
        self.rows * self.cols
    }
    pub fn atom_spacing_y(&self) -> f64 {
        self.atom_spacing_y
    }
    pub fn atom_spacing_z(&self) -> f64 {
        self.atom_spacing_z
    }
    pub fn atom_area(&self) -> f64 {
        self.atom_area
    }
    pub fn sim_thickness(&self) -> f64 {
        self.sim_thickness
    }
    pub fn layer_spacing(&self) -> f64 {
        self.layer_spacing
    }
    pub fn num_feeds(&self) -> usize {
        self.num_feeds
    }
    pub fn feed_spacing(&self) -> f64 {
        self.feed_spacing
    }
    pub fn feed_offset(&self) -> f64 {
        self.feed_offset
    }

    /// Plane of layer `layer` (0-based) along the stack axis.
    pub fn layer_x(&self, layer: usize) -> Result<f64> {
        check_index("layer", layer, self.num_layers)?;
        Ok(-self.sim_thickness + (layer + 1) as f64 * self.layer_spacing)
    }

    /// Position of `atom` on `layer`, both 0-based.
    pub fn atom_position(&self, layer: usize, atom: usize) -> Result<[f64; 3]> {
        let x = self.layer_x(layer)?;
        check_index("atom", atom, self.atoms_per_layer())?;
        let (row, col) = (atom / self.cols, atom % self.cols);
        Ok([
            x,
            centered(row, self.rows) * self.atom_spacing_y,
            centered(col, self.cols) * self.atom_spacing_z,
        ])
    }

    /// Position of feed antenna `feed` (0-based).
    pub fn feed_position(&self, feed: usize) -> Result<[f64; 3]> {
        check_index("feed", feed, self.num_feeds)?;
        Ok([
            self.layer_x(0)? - self.feed_offset,
            centered(feed, self.num_feeds) * self.feed_spacing,
            0.0,
        ])
    }
}

fn centered(index: usize, count: usize) -> f64 {
    index as f64 - (count as f64 - 1.0) / 2.0
}

fn check_index(what: &'static str, index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, len })
    }
}

/// Rayleigh-Sommerfeld coupling between two elements separated by `distance`,
/// with `obliquity_cosine` the cosine of the angle between the propagation
/// direction and the source layer normal:
///
/// `(A cos χ / r) (1 / (2π r) - j / λ) exp(j 2π r / λ)`
pub fn interlayer_coefficient(
    area: f64,
    distance: f64,
    obliquity_cosine: f64,
    wavelength: f64,
) -> Result<C64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositiveDistance(distance));
    }
    let amplitude = area * obliquity_cosine / distance;
    let kernel = C64::new(1.0 / (2.0 * PI * distance), -1.0 / wavelength);
    Ok(amplitude * kernel * C64::from_polar(1.0, 2.0 * PI * distance / wavelength))
}

/// Diffraction operators of the stack: `w1` maps feeds to layer 0 and
/// `wl[i]` maps layer `i` to layer `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffractionStack {
    pub w1: CMatrix,
    pub wl: Vec<CMatrix>,
}

impl DiffractionStack {
    pub fn num_layers(&self) -> usize {
        self.wl.len() + 1
    }
    pub fn atoms_per_layer(&self) -> usize {
        self.w1.nrows()
    }
    pub fn num_feeds(&self) -> usize {
        self.w1.ncols()
    }

    /// Operator feeding layer `layer` (0-based): `w1` for layer 0, else `wl[layer - 1]`.
    pub fn into_layer(&self, layer: usize) -> &CMatrix {
        if layer == 0 {
            &self.w1
        } else {
            &self.wl[layer - 1]
        }
    }
}

fn coupling(geometry: &SimGeometry, src: [f64; 3], dst: [f64; 3]) -> Result<C64> {
    let d = [dst[0] - src[0], dst[1] - src[1], dst[2] - src[2]];
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !(r > 0.0) {
        return Err(Error::NonPositiveDistance(r));
    }
    interlayer_coefficient(geometry.atom_area, r, d[0] / r, geometry.wavelength)
}

pub fn build_diffraction_stack(geometry: &SimGeometry) -> Result<DiffractionStack> {
    let m = geometry.atoms_per_layer();
    let atoms = |layer: usize| -> Result<Vec<[f64; 3]>> {
        (0..m).map(|a| geometry.atom_position(layer, a)).collect()
    };

    let feeds: Vec<_> = (0..geometry.num_feeds)
        .map(|n| geometry.feed_position(n))
        .collect::<Result<_>>()?;
    let mut dst = atoms(0)?;
    let mut w1 = Array2::zeros((m, feeds.len()));
    for ((i, j), w) in w1.indexed_iter_mut() {
        *w = coupling(geometry, feeds[j], dst[i])?;
    }

    let mut wl = Vec::with_capacity(geometry.num_layers - 1);
    for layer in 1..geometry.num_layers {
        let src = dst;
        dst = atoms(layer)?;
        let mut w = Array2::zeros((m, m));
        for ((i, j), entry) in w.indexed_iter_mut() {
            *entry = coupling(geometry, src[j], dst[i])?;
        }
        wl.push(w);
    }
    Ok(DiffractionStack { w1, wl })
}
