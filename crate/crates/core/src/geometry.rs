//! Physical setup: transducer arrays, imaging grids, sparse scenes, and the
//! homogeneous-medium Green's function.
//!
//! All lengths are in units of the wavelength. The array sits on the plane
//! `z = 0` and the image window (IW) at range `z = L > 0`. With unit
//! wavelength the wavenumber is `2π`.

use nalgebra::Point3;
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::{CMatrix, CVector, Complex};

/// Wavenumber for unit wavelength, `κ = 2π`.
pub const DEFAULT_WAVENUMBER: f64 = TAU;

/// Relative tolerance used when validating stored lengths against the ones
/// recomputed from coordinates.
const GEOMETRY_TOL: f64 = 1e-9;

/// Outgoing free-space Green's function `exp(iκ|x−y|) / (4π|x−y|)`.
///
/// Singular for coincident points, which is reported as an error.
pub fn green(x: &Point3<f64>, y: &Point3<f64>, kappa: f64) -> Result<Complex> {
    let r = (x - y).norm();
    if r == 0.0 {
        return Err(Error::CoincidentPoints { index: None });
    }
    Ok(Complex::from_polar(1.0 / (4.0 * PI * r), kappa * r))
}

/// An active array of `N` co-located transducers on the plane `z = 0`.
#[derive(Debug, Clone)]
pub struct ArrayGeometry {
    positions: Vec<Point3<f64>>,
    wavenumber: f64,
    aperture: f64,
}

impl ArrayGeometry {
    /// Builds an array from explicit positions.
    ///
    /// The aperture is a declared quantity and is validated against the
    /// maximum pairwise extent of the positions rather than inferred from it.
    pub fn new(positions: Vec<Point3<f64>>, wavenumber: f64, aperture: f64) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 transducers, got {}",
                positions.len()
            )));
        }
        if wavenumber <= 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "wavenumber must be positive, got {wavenumber}"
            )));
        }
        if let Some(p) = positions.iter().find(|p| p.z != 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "transducer off the array plane z = 0: {p:?}"
            )));
        }
        let extent = max_pairwise_extent(&positions);
        if (aperture - extent).abs() > GEOMETRY_TOL * extent.max(1.0) {
            return Err(Error::InvalidGeometry(format!(
                "declared aperture {aperture} does not match the maximum \
                 pairwise extent {extent}"
            )));
        }
        Ok(Self {
            positions,
            wavenumber,
            aperture,
        })
    }

    /// Uniform linear array on the x-axis, centered on the origin, spanning
    /// exactly `aperture` (pitch `aperture / (n − 1)`).
    pub fn linear(n: usize, aperture: f64, wavenumber: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGeometry(format!(
                "linear array needs at least 2 transducers, got {n}"
            )));
        }
        let pitch = aperture / (n - 1) as f64;
        Self::linear_with_pitch(n, pitch, wavenumber, -aperture / 2.0)
    }

    /// Uniform linear array on the x-axis with explicit pitch and origin,
    /// `x_s = origin + s·pitch` for `s = 0..n−1`.
    pub fn linear_with_pitch(n: usize, pitch: f64, wavenumber: f64, origin: f64) -> Result<Self> {
        if pitch <= 0.0 {
            return Err(Error::InvalidGeometry(format!(
                "pitch must be positive, got {pitch}"
            )));
        }
        let positions = (0..n)
            .map(|s| Point3::new(origin + s as f64 * pitch, 0.0, 0.0))
            .collect::<Vec<_>>();
        let aperture = (n.saturating_sub(1)) as f64 * pitch;
        Self::new(positions, wavenumber, aperture)
    }

    /// Square planar array of `side × side` transducers in the `z = 0` plane,
    /// centered on the origin. The aperture is the diagonal extent.
    pub fn planar(side: usize, side_length: f64, wavenumber: f64) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidGeometry(format!(
                "planar array needs at least 2 transducers per side, got {side}"
            )));
        }
        let pitch = side_length / (side - 1) as f64;
        let half = side_length / 2.0;
        let mut positions = Vec::with_capacity(side * side);
        for iy in 0..side {
            for ix in 0..side {
                positions.push(Point3::new(
                    -half + ix as f64 * pitch,
                    -half + iy as f64 * pitch,
                    0.0,
                ));
            }
        }
        let aperture = max_pairwise_extent(&positions);
        Self::new(positions, wavenumber, aperture)
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Point3<f64>] {
        &self.positions
    }

    pub fn position(&self, s: usize) -> &Point3<f64> {
        &self.positions[s]
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn wavelength(&self) -> f64 {
        TAU / self.wavenumber
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    /// Pitch of a uniform linear array on the x-axis, or `None` when the
    /// array is not one (off-axis elements or non-uniform spacing).
    pub fn uniform_pitch(&self) -> Option<f64> {
        if self.positions.iter().any(|p| p.y != 0.0) {
            return None;
        }
        let pitch = self.positions[1].x - self.positions[0].x;
        if pitch <= 0.0 {
            return None;
        }
        let uniform = self.positions.windows(2).all(|w| {
            let d = w[1].x - w[0].x;
            (d - pitch).abs() <= GEOMETRY_TOL * pitch
        });
        uniform.then_some(pitch)
    }
}

fn max_pairwise_extent(positions: &[Point3<f64>]) -> f64 {
    let mut max = 0.0_f64;
    for (i, a) in positions.iter().enumerate() {
        for b in &positions[i + 1..] {
            max = max.max((a - b).norm());
        }
    }
    max
}

/// Signals received at the array due to a point source at `y`
/// (equivalently the illumination vector targeting `y`).
pub fn green_vector(geom: &ArrayGeometry, y: &Point3<f64>) -> Result<CVector> {
    let mut g = CVector::zeros(geom.n());
    for (s, x) in geom.positions().iter().enumerate() {
        g[s] = green(x, y, geom.wavenumber())
            .map_err(|_| Error::CoincidentPoints { index: Some(s) })?;
    }
    Ok(g)
}

/// `N × K` matrix whose columns are the Green's function vectors of the grid
/// points; maps a source distribution in the IW to the data on the array.
pub fn sensing_matrix(geom: &ArrayGeometry, grid: &ImagingGrid) -> Result<CMatrix> {
    let mut m = CMatrix::zeros(geom.n(), grid.k());
    for (j, y) in grid.points().iter().enumerate() {
        m.set_column(j, &green_vector(geom, y)?);
    }
    Ok(m)
}

/// Discretized image window: `K` grid points at range `L` from the array.
///
/// The mesh follows the classical resolution limits, `h_x = λL/a` in
/// cross-range and `h_z = λL²/a²` in range. Indices are row-major over range
/// slices: `k = iz · n_cross + ix`.
#[derive(Debug, Clone)]
pub struct ImagingGrid {
    points: Vec<Point3<f64>>,
    range: f64,
    h_cross: f64,
    h_range: f64,
    flat: bool,
    n_cross: usize,
    n_range: usize,
}

impl ImagingGrid {
    /// Validates and wraps an explicit point set.
    pub fn from_points(
        points: Vec<Point3<f64>>,
        range: f64,
        h_cross: f64,
        h_range: f64,
        n_cross: usize,
        n_range: usize,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid needs at least one point".into()));
        }
        if points.len() != n_cross * n_range {
            return Err(Error::InvalidGrid(format!(
                "{} points do not fill a {n_cross} x {n_range} lattice",
                points.len()
            )));
        }
        if range <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "range L must be positive, got {range}"
            )));
        }
        if let Some(p) = points.iter().find(|p| p.z <= 0.0) {
            return Err(Error::InvalidGrid(format!(
                "grid point with non-positive range: {p:?}"
            )));
        }
        let flat = n_range == 1;
        if flat {
            if let Some(p) = points.iter().find(|p| p.z != range) {
                return Err(Error::InvalidGrid(format!(
                    "flat grid point off the range plane z = {range}: {p:?}"
                )));
            }
        }
        Ok(Self {
            points,
            range,
            h_cross,
            h_range,
            flat,
            n_cross,
            n_range,
        })
    }

    /// Uniform `n_cross × n_range` lattice centered on `(0, 0, l)` with the
    /// resolution-limit mesh derived from the array geometry.
    pub fn centered(geom: &ArrayGeometry, l: f64, n_cross: usize, n_range: usize) -> Result<Self> {
        if l <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "range L must be positive, got {l}"
            )));
        }
        let lambda = geom.wavelength();
        let a = geom.aperture();
        let h_cross = lambda * l / a;
        let h_range = lambda * l * l / (a * a);
        let cx = (n_cross as f64 - 1.0) / 2.0;
        let cz = (n_range as f64 - 1.0) / 2.0;
        let mut points = Vec::with_capacity(n_cross * n_range);
        for iz in 0..n_range {
            // A single range slice sits exactly at z = l.
            let z = if n_range == 1 {
                l
            } else {
                l + (iz as f64 - cz) * h_range
            };
            for ix in 0..n_cross {
                points.push(Point3::new((ix as f64 - cx) * h_cross, 0.0, z));
            }
        }
        Self::from_points(points, l, h_cross, h_range, n_cross, n_range)
    }

    /// Flat line of `k` points at range `l`, centered in cross-range, with
    /// the resolution-limit mesh.
    pub fn flat_centered(geom: &ArrayGeometry, l: f64, k: usize) -> Result<Self> {
        Self::centered(geom, l, k, 1)
    }

    /// Flat line of `k` points at range `l` with explicit cross-range spacing:
    /// `x'_j = start + j·pitch` for `j = 0..k−1`.
    pub fn flat_uniform(l: f64, start: f64, pitch: f64, k: usize, h_range: f64) -> Result<Self> {
        if pitch <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "grid pitch must be positive, got {pitch}"
            )));
        }
        let points = (0..k)
            .map(|j| Point3::new(start + j as f64 * pitch, 0.0, l))
            .collect();
        Self::from_points(points, l, pitch, h_range, k, 1)
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn point(&self, j: usize) -> &Point3<f64> {
        &self.points[j]
    }

    /// Distance from the array plane to the IW center.
    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn h_cross(&self) -> f64 {
        self.h_cross
    }

    pub fn h_range(&self) -> f64 {
        self.h_range
    }

    pub fn flat(&self) -> bool {
        self.flat
    }

    /// Lattice dimensions `(n_cross, n_range)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.n_cross, self.n_range)
    }

    pub fn index(&self, ix: usize, iz: usize) -> usize {
        iz * self.n_cross + ix
    }

    /// Lattice coordinates `(ix, iz)` of a linear index.
    pub fn lattice_coords(&self, k: usize) -> (usize, usize) {
        (k % self.n_cross, k / self.n_cross)
    }

    /// Cross-range pitch of a flat 1-D grid, or `None` when the grid is not a
    /// uniform line.
    pub fn uniform_cross_pitch(&self) -> Option<f64> {
        if !self.flat || self.n_cross < 2 || self.points.iter().any(|p| p.y != 0.0) {
            return None;
        }
        let pitch = self.points[1].x - self.points[0].x;
        if pitch <= 0.0 {
            return None;
        }
        let uniform = self.points.windows(2).all(|w| {
            let d = w[1].x - w[0].x;
            (d - pitch).abs() <= GEOMETRY_TOL * pitch
        });
        uniform.then_some(pitch)
    }
}

/// Sparse reflectivity `ρ ∈ C^K`: `M ≤ K` scatterers placed on grid points.
#[derive(Debug, Clone)]
pub struct Scene {
    k: usize,
    entries: Vec<(usize, Complex)>,
}

impl Scene {
    /// `entries` are `(grid index, reflectivity)` pairs; indices must be
    /// distinct and valid for a grid of `k` points.
    pub fn new(k: usize, mut entries: Vec<(usize, Complex)>) -> Result<Self> {
        entries.sort_by_key(|(j, _)| *j);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidScene(format!(
                    "duplicate scatterer at grid index {}",
                    w[0].0
                )));
            }
        }
        if let Some((j, _)) = entries.iter().find(|(j, _)| *j >= k) {
            return Err(Error::InvalidScene(format!(
                "scatterer index {j} outside the {k}-point grid"
            )));
        }
        Ok(Self { k, entries })
    }

    pub fn empty(k: usize) -> Self {
        Self {
            k,
            entries: Vec::new(),
        }
    }

    /// Number of grid points the scene is defined over.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of scatterers.
    pub fn m(&self) -> usize {
        self.entries.len()
    }

    /// `(grid index, reflectivity)` pairs, sorted by index.
    pub fn entries(&self) -> &[(usize, Complex)] {
        &self.entries
    }

    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|(j, _)| *j).collect()
    }

    /// Dense reflectivity vector of length `K`.
    pub fn to_dense(&self) -> CVector {
        let mut rho = CVector::zeros(self.k);
        for &(j, alpha) in &self.entries {
            rho[j] = alpha;
        }
        rho
    }

    /// Scales every reflectivity by `c`.
    pub fn scaled(&self, c: Complex) -> Self {
        Self {
            k: self.k,
            entries: self.entries.iter().map(|&(j, a)| (j, a * c)).collect(),
        }
    }
}

/// Regime classification of the array / image-window setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParaxialRegime {
    /// Near-field diffraction: `F ≳ 1` with a small phase-truncation bound.
    Fresnel,
    /// Far-field diffraction: `F ≪ 1`.
    Fraunhofer,
    /// The quartic phase term is not negligible; the paraxial model is
    /// unreliable.
    InvalidParaxial,
}

/// Thresholds realizing the asymptotic conditions `F ≪ 1` and
/// `(1/4)F(a/L)² ≪ 1`.
#[derive(Debug, Clone, Copy)]
pub struct RegimeThresholds {
    /// `F` below this is classified as Fraunhofer.
    pub fraunhofer_max: f64,
    /// Paraxial phase-error bound must stay below this for the Fresnel
    /// classification.
    pub paraxial_error_max: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            fraunhofer_max: 0.1,
            paraxial_error_max: 0.01,
        }
    }
}

/// Fresnel number and paraxial validity for an array / grid pair.
#[derive(Debug, Clone, Copy)]
pub struct FresnelDiagnostics {
    /// `F = a²/(λL)`.
    pub fresnel_number: f64,
    /// `(1/4)·F·(a/L)²`, the size of the first neglected phase term.
    pub paraxial_error_bound: f64,
    pub regime: ParaxialRegime,
}

pub fn fresnel_diagnostics(geom: &ArrayGeometry, grid: &ImagingGrid) -> FresnelDiagnostics {
    fresnel_diagnostics_with(geom, grid, &RegimeThresholds::default())
}

pub fn fresnel_diagnostics_with(
    geom: &ArrayGeometry,
    grid: &ImagingGrid,
    thresholds: &RegimeThresholds,
) -> FresnelDiagnostics {
    let a = geom.aperture();
    let l = grid.range();
    let f = a * a / (geom.wavelength() * l);
    let bound = 0.25 * f * (a / l) * (a / l);
    let regime = if f < thresholds.fraunhofer_max {
        ParaxialRegime::Fraunhofer
    } else if f >= 1.0 && bound < thresholds.paraxial_error_max {
        ParaxialRegime::Fresnel
    } else {
        ParaxialRegime::InvalidParaxial
    };
    FresnelDiagnostics {
        fresnel_number: f,
        paraxial_error_bound: bound,
        regime,
    }
}

/// Number of IW sampling points at the cross-range resolution limit,
/// `K_opt = round(a·b / (λL))` for an IW of length `b`.
pub fn optimal_grid_count(geom: &ArrayGeometry, l: f64, b: f64) -> Result<usize> {
    if l <= 0.0 || b <= 0.0 {
        return Err(Error::InvalidGrid(format!(
            "L and b must be positive, got L = {l}, b = {b}"
        )));
    }
    let count = geom.aperture() * b / (geom.wavelength() * l);
    let k = count.round();
    if k < 1.0 {
        return Err(Error::DegenerateGrid { count });
    }
    Ok(k as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn p(x: f64, y: f64, z: f64) -> Point3<f64> {
        Point3::new(x, y, z)
    }

    #[test]
    fn green_full_period() {
        // unit wavelength, unit distance: phase 2pi, amplitude 1/(4pi)
        let g = green(&p(0.0, 0.0, 0.0), &p(0.0, 0.0, 1.0), DEFAULT_WAVENUMBER).unwrap();
        assert_relative_eq!(g.re, 1.0 / (4.0 * PI), max_relative = 1e-12);
        assert_abs_diff_eq!(g.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn green_half_period() {
        let g = green(&p(0.0, 0.0, 0.0), &p(0.0, 0.0, 0.5), DEFAULT_WAVENUMBER).unwrap();
        assert_relative_eq!(g.re, -1.0 / (2.0 * PI), max_relative = 1e-12);
        assert_abs_diff_eq!(g.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn green_345_triangle() {
        // |x - y| = 5 with kappa = 1: magnitude 1/(20 pi), phase 5 rad
        let g = green(&p(3.0, 0.0, 0.0), &p(0.0, 4.0, 0.0), 1.0).unwrap();
        assert_relative_eq!(g.norm(), 1.0 / (20.0 * PI), max_relative = 1e-12);
        assert_relative_eq!(g.arg(), 5.0 - TAU, max_relative = 1e-12);
        let direct = Complex::new(0.0, 5.0).exp() / Complex::new(20.0 * PI, 0.0);
        assert_relative_eq!((g - direct).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn green_coincident_points_error() {
        let e = green(&p(1.0, 2.0, 3.0), &p(1.0, 2.0, 3.0), 1.0);
        assert!(matches!(e, Err(Error::CoincidentPoints { .. })));
    }

    #[test]
    fn green_vector_matches_elementwise() {
        let geom = ArrayGeometry::linear(8, 7.0, DEFAULT_WAVENUMBER).unwrap();
        let y = p(0.3, -0.2, 11.0);
        let g = green_vector(&geom, &y).unwrap();
        for (s, x) in geom.positions().iter().enumerate() {
            let expect = green(x, &y, geom.wavenumber()).unwrap();
            assert_eq!(g[s], expect);
        }
    }

    #[test]
    fn green_vector_palindromic_on_bisector() {
        // y on the perpendicular bisector plane of a symmetric array
        let geom = ArrayGeometry::linear(6, 10.0, DEFAULT_WAVENUMBER).unwrap();
        let y = p(0.0, 0.0, 25.0);
        let g = green_vector(&geom, &y).unwrap();
        let n = geom.n();
        for s in 0..n {
            assert_relative_eq!((g[s] - g[n - 1 - s]).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn green_vector_reports_offending_index() {
        let geom = ArrayGeometry::linear(4, 3.0, DEFAULT_WAVENUMBER).unwrap();
        let on_transducer = *geom.position(2);
        match green_vector(&geom, &on_transducer) {
            Err(Error::CoincidentPoints { index: Some(2) }) => {}
            other => panic!("expected coincident-point error at index 2, got {other:?}"),
        }
    }

    #[test]
    fn sensing_matrix_columns_and_norms() {
        let geom = ArrayGeometry::linear(5, 8.0, DEFAULT_WAVENUMBER).unwrap();
        let grid = ImagingGrid::centered(&geom, 40.0, 3, 2).unwrap();
        let m = sensing_matrix(&geom, &grid).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (5, 6));
        for (j, y) in grid.points().iter().enumerate() {
            let g = green_vector(&geom, y).unwrap();
            // column j equals the Green's function vector, entry-wise
            for s in 0..geom.n() {
                assert_eq!(m[(s, j)], g[s]);
                assert_eq!(
                    m[(s, j)],
                    green(geom.position(s), y, geom.wavenumber()).unwrap()
                );
            }
            // column norm from the raw distances
            let norm2: f64 = geom
                .positions()
                .iter()
                .map(|x| {
                    let r = (x - y).norm();
                    1.0 / (4.0 * PI * r).powi(2)
                })
                .sum();
            assert_relative_eq!(m.column(j).norm(), norm2.sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn aperture_is_checked_not_inferred() {
        let positions = vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.0), p(3.0, 0.0, 0.0)];
        assert!(ArrayGeometry::new(positions.clone(), TAU, 3.0).is_ok());
        assert!(matches!(
            ArrayGeometry::new(positions, TAU, 2.5),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn off_plane_transducer_rejected() {
        let positions = vec![p(0.0, 0.0, 0.0), p(1.0, 0.0, 0.1)];
        assert!(ArrayGeometry::new(positions, TAU, 1.0).is_err());
    }

    #[test]
    fn linear_array_pitch_from_aperture() {
        // N = 101 transducers spanning 2000 wavelengths are 20 wavelengths apart
        let geom = ArrayGeometry::linear(101, 2000.0, DEFAULT_WAVENUMBER).unwrap();
        assert_relative_eq!(geom.uniform_pitch().unwrap(), 20.0, max_relative = 1e-12);
        assert_relative_eq!(geom.aperture(), 2000.0, max_relative = 1e-12);
    }

    #[test]
    fn planar_array_has_diagonal_aperture() {
        let geom = ArrayGeometry::planar(3, 2.0, TAU).unwrap();
        assert_eq!(geom.n(), 9);
        assert_relative_eq!(geom.aperture(), 2.0 * 2.0_f64.sqrt(), max_relative = 1e-12);
        assert!(geom.uniform_pitch().is_none());
    }

    #[test]
    fn fresnel_examples_from_setup() {
        let geom = ArrayGeometry::linear(101, 2000.0, DEFAULT_WAVENUMBER).unwrap();

        let near = ImagingGrid::flat_centered(&geom, 2000.0, 3).unwrap();
        let d = fresnel_diagnostics(&geom, &near);
        assert_relative_eq!(d.fresnel_number, 2000.0, max_relative = 1e-12);
        assert_relative_eq!(d.paraxial_error_bound, 500.0, max_relative = 1e-12);
        assert_eq!(d.regime, ParaxialRegime::InvalidParaxial);

        let far = ImagingGrid::flat_centered(&geom, 100_000.0, 3).unwrap();
        let d = fresnel_diagnostics(&geom, &far);
        assert_relative_eq!(d.fresnel_number, 40.0, max_relative = 1e-12);
        assert_relative_eq!(d.paraxial_error_bound, 0.004, max_relative = 1e-12);
        assert_eq!(d.regime, ParaxialRegime::Fresnel);

        // L -> infinity: F -> 0, Fraunhofer
        let very_far = ImagingGrid::flat_centered(&geom, 1e9, 3).unwrap();
        let d = fresnel_diagnostics(&geom, &very_far);
        assert!(d.fresnel_number < 0.1);
        assert_eq!(d.regime, ParaxialRegime::Fraunhofer);
    }

    #[test]
    fn fresnel_number_scaling() {
        // F scales linearly in a^2 and inversely in L over a log-spaced sweep
        let base = ArrayGeometry::linear(11, 100.0, DEFAULT_WAVENUMBER).unwrap();
        let grid = ImagingGrid::centered(&base, 1000.0, 3, 1).unwrap();
        let f0 = fresnel_diagnostics(&base, &grid).fresnel_number;
        for scale in [2.0, 4.0, 8.0, 16.0] {
            let geom = ArrayGeometry::linear(11, 100.0 * scale, DEFAULT_WAVENUMBER).unwrap();
            let f = fresnel_diagnostics(&geom, &grid).fresnel_number;
            assert_relative_eq!(f / f0, scale * scale, max_relative = 1e-10);
        }
        for scale in [10.0, 100.0, 1000.0] {
            let far = ImagingGrid::centered(&base, 1000.0 * scale, 3, 1).unwrap();
            let f = fresnel_diagnostics(&base, &far).fresnel_number;
            assert_relative_eq!(f * scale / f0, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn optimal_grid_count_examples() {
        let geom = ArrayGeometry::linear(101, 2000.0, DEFAULT_WAVENUMBER).unwrap();
        // a b / (lambda L) = 101 by choice of b
        let l = 10_000.0;
        let b = 101.0 * l / 2000.0;
        assert_eq!(optimal_grid_count(&geom, l, b).unwrap(), 101);
        // a = 2000, L = 100000, b = 5000 -> 100
        assert_eq!(optimal_grid_count(&geom, 100_000.0, 5000.0).unwrap(), 100);
        // degenerate window
        assert!(matches!(
            optimal_grid_count(&geom, 1e9, 1.0),
            Err(Error::DegenerateGrid { .. })
        ));
    }

    #[test]
    fn grid_mesh_follows_resolution_limits() {
        let geom = ArrayGeometry::linear(101, 2000.0, DEFAULT_WAVENUMBER).unwrap();
        let grid = ImagingGrid::centered(&geom, 5000.0, 51, 51).unwrap();
        assert_relative_eq!(grid.h_cross(), 5000.0 / 2000.0, max_relative = 1e-12);
        assert_relative_eq!(
            grid.h_range(),
            5000.0_f64.powi(2) / 2000.0_f64.powi(2),
            max_relative = 1e-12
        );
        assert_eq!(grid.k(), 2601);
        assert!(!grid.flat());
        // row-major indexing round-trips
        let (ix, iz) = (7, 13);
        assert_eq!(grid.lattice_coords(grid.index(ix, iz)), (ix, iz));
    }

    #[test]
    fn flat_grid_is_exactly_at_range() {
        let geom = ArrayGeometry::linear(16, 30.0, DEFAULT_WAVENUMBER).unwrap();
        let grid = ImagingGrid::flat_centered(&geom, 500.0, 33).unwrap();
        assert!(grid.flat());
        assert!(grid.points().iter().all(|p| p.z == 500.0));
    }

    #[test]
    fn scene_validation() {
        assert!(Scene::new(10, vec![(3, Complex::new(1.0, 0.0))]).is_ok());
        assert!(Scene::new(10, vec![(10, Complex::new(1.0, 0.0))]).is_err());
        assert!(Scene::new(
            10,
            vec![(3, Complex::new(1.0, 0.0)), (3, Complex::new(2.0, 0.0))]
        )
        .is_err());
        let scene = Scene::new(
            8,
            vec![(5, Complex::new(0.5, 0.5)), (1, Complex::new(1.0, 0.0))],
        )
        .unwrap();
        assert_eq!(scene.m(), 2);
        assert_eq!(scene.support(), vec![1, 5]);
        let rho = scene.to_dense();
        assert_eq!(rho.len(), 8);
        assert_eq!(rho[5], Complex::new(0.5, 0.5));
    }

    proptest! {
        #[test]
        fn green_reciprocity(
            ax in -50.0..50.0f64, ay in -50.0..50.0f64, az in -50.0..50.0f64,
            bx in -50.0..50.0f64, by in -50.0..50.0f64, bz in -50.0..50.0f64,
            kappa in 0.1..20.0f64,
        ) {
            let x = p(ax, ay, az);
            let y = p(bx, by, bz);
            prop_assume!((x - y).norm() > 1e-6);
            let gxy = green(&x, &y, kappa).unwrap();
            let gyx = green(&y, &x, kappa).unwrap();
            prop_assert_eq!(gxy, gyx);
            // |G| = 1/(4 pi r) exactly
            let r = (x - y).norm();
            prop_assert!((gxy.norm() - 1.0 / (4.0 * PI * r)).abs() <= 1e-15 / r);
        }
    }
}
