//! Active-array imaging of weak localized scatterers from intensity-only
//! measurements.
//!
//! A narrow-band array of `N` transducers probes a homogeneous medium and
//! records only the intensities of the backscattered signals. This crate
//! synthesizes that data for sparse scenes of point scatterers, recovers the
//! missing phase information through controlled illumination protocols and
//! polarization identities, and localizes the scatterers with MUSIC subspace
//! imaging.
//!
//! The crate is organized around the measurement pipeline:
//!
//! * [`geometry`] — array layout, imaging grids, scenes, and the
//!   homogeneous-medium Green's function.
//! * [`forward`] — exact Born and paraxial response matrices, intensity
//!   measurements, and the multiplicative noise model.
//! * [`recovery`] — the illumination protocols that rebuild the time-reversal
//!   matrix `M = P*P` (general arrays), the response matrix `P` up to a
//!   global phase (symmetric arrays), or the Hankel skew-diagonal values of
//!   the paraxial response (flat scenes, six illuminations). Each protocol is
//!   also available behind the [`recovery::protocol::RecoveryProtocol`] trait
//!   and can be selected by name at runtime.
//! * [`imaging`] — SVD subspace splitting, the MUSIC pseudo-spectrum, peak
//!   detection, and localization scoring.
//!
//! All lengths are expressed in units of the wavelength; the default
//! wavenumber is `2π` (unit wavelength).
//!
//! ```
//! use imager_core::forward::assemble_response_born;
//! use imager_core::geometry::{ArrayGeometry, ImagingGrid, Scene, DEFAULT_WAVENUMBER};
//! use imager_core::imaging::{detect_peaks, music_pseudospectrum, subspace_split,
//!                            PeakRule, RankRule};
//! use imager_core::recovery::{recover_time_reversal, SimulatorOracle};
//! use imager_core::Complex;
//!
//! // 16-element array, flat image window of 31 points at range 3000
//! let geom = ArrayGeometry::linear(16, 300.0, DEFAULT_WAVENUMBER)?;
//! let grid = ImagingGrid::flat_centered(&geom, 3000.0, 31)?;
//! let scene = Scene::new(grid.k(), vec![(11, Complex::ONE), (20, Complex::I)])?;
//! let response = assemble_response_born(&geom, &grid, &scene)?;
//!
//! // 3N-2 intensity-only illuminations rebuild the time-reversal matrix
//! let oracle = SimulatorOracle::noiseless(response);
//! let time_reversal = recover_time_reversal(&oracle, geom.n())?;
//!
//! // MUSIC peaks at the scatterer grid points
//! let split = subspace_split(&time_reversal.matrix, RankRule::Known(scene.m()))?;
//! let field = music_pseudospectrum(&split, &geom, &grid)?;
//! let peaks = detect_peaks(&field, PeakRule::TopM(scene.m()))?;
//! let mut found = peaks.indices.clone();
//! found.sort();
//! assert_eq!(found, vec![11, 20]);
//! # Ok::<(), imager_core::Error>(())
//! ```

pub mod error;
pub mod forward;
pub mod geometry;
pub mod imaging;
pub mod recovery;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type Complex = num_complex::Complex64;

/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex>;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<Complex>;
