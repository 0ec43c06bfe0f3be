//! MUSIC subspace imaging: SVD splitting, pseudo-spectrum evaluation, peak
//! detection, and localization scoring.

use nalgebra::SVD;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{green_vector, ArrayGeometry, ImagingGrid, Scene};
use crate::CMatrix;

/// Cap applied where a steering vector lies numerically inside the signal
/// space and the projection norm vanishes; such a point is itself a
/// detection.
pub const PSEUDOSPECTRUM_CAP: f64 = 1e15;

/// Default relative singular-value threshold when the scatterer count is
/// unknown.
pub const DEFAULT_SV_THRESHOLD: f64 = 1e-3;

/// How to split the spectrum into signal and noise spaces.
#[derive(Debug, Clone, Copy)]
pub enum RankRule {
    /// The number of scatterers is known a priori.
    Known(usize),
    /// Keep singular values above `threshold · σ_1`.
    Threshold(f64),
}

/// Singular spectrum of a recovered operator with its estimated signal
/// space.
#[derive(Debug, Clone)]
pub struct SubspaceSplit {
    /// All singular values, sorted descending.
    pub singular_values: Vec<f64>,
    /// Right singular vectors of the signal space, one column per retained
    /// singular value.
    pub signal_basis: CMatrix,
    /// Estimated rank `M̃`.
    pub rank: usize,
    /// The input was identically zero; there is no signal space.
    pub zero_matrix: bool,
}

/// Computes the SVD of `a` and splits off the signal space.
///
/// For the Hermitian positive semidefinite time-reversal matrix the right
/// singular vectors coincide with its eigenvectors and with the right
/// singular vectors of the underlying response, so MUSIC sees the same
/// subspace through either input.
pub fn subspace_split(a: &CMatrix, rule: RankRule) -> Result<SubspaceSplit> {
    if a.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFiniteMatrix);
    }
    let n = a.nrows().min(a.ncols());
    if let RankRule::Known(m) = rule {
        if m >= a.ncols() {
            return Err(Error::ProtocolPrecondition(format!(
                "MUSIC needs fewer scatterers than transducers, got M = {m} \
                 with N = {}",
                a.ncols()
            )));
        }
    }
    let svd = SVD::new(a.clone(), false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::ProtocolPrecondition("SVD did not produce V^H".into()))?;

    // singular values in descending order
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();

    let sigma_1 = singular_values.first().copied().unwrap_or(0.0);
    let zero_matrix = sigma_1 == 0.0;
    let rank = if zero_matrix {
        0
    } else {
        match rule {
            RankRule::Known(m) => m,
            RankRule::Threshold(tau) => singular_values
                .iter()
                .take_while(|&&s| s > tau * sigma_1)
                .count(),
        }
    };

    // right singular vector j is the adjoint of row j of V^H
    let mut signal_basis = CMatrix::zeros(a.ncols(), rank);
    for (col, &i) in order.iter().take(rank).enumerate() {
        signal_basis.set_column(col, &v_t.row(i).adjoint());
    }
    Ok(SubspaceSplit {
        singular_values,
        signal_basis,
        rank,
        zero_matrix,
    })
}

/// MUSIC imaging field over the grid.
#[derive(Debug, Clone)]
pub struct Pseudospectrum {
    /// One nonnegative value per grid point, row-major like the grid.
    pub values: Vec<f64>,
    /// Numerator of the functional: the smallest projection norm over the
    /// grid.
    pub normalization: f64,
    pub n_cross: usize,
    pub n_range: usize,
}

impl Pseudospectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn argmax(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Collapses a 2-D field onto the cross-range axis by taking the maximum
    /// over range at every cross-range index.
    pub fn cross_range_profile(&self) -> Vec<f64> {
        let mut profile = vec![f64::NEG_INFINITY; self.n_cross];
        for row in self.values.chunks(self.n_cross) {
            for (best, &v) in profile.iter_mut().zip(row) {
                if v > *best {
                    *best = v;
                }
            }
        }
        profile
    }
}

/// Evaluates the MUSIC functional at every grid point:
/// the reciprocal projection of the steering vector onto the noise space,
/// normalized by the smallest projection norm over the grid.
///
/// The steering vector pairing follows the rank-one response `P = g gᵗ`,
/// whose right singular vector is `conj(g)` up to phase: the projection is
/// taken for `conj(g)` against the orthonormal signal basis, which places
/// steering vectors of true scatterer locations inside the signal span.
pub fn music_pseudospectrum(
    split: &SubspaceSplit,
    geom: &ArrayGeometry,
    grid: &ImagingGrid,
) -> Result<Pseudospectrum> {
    if split.rank == 0 {
        return Err(Error::EmptySignalSpace);
    }
    let basis = &split.signal_basis;
    let norms: Vec<f64> = grid
        .points()
        .par_iter()
        .map(|y| -> Result<f64> {
            let h = green_vector(geom, y)?.conjugate();
            let coefficients = basis.adjoint() * &h;
            let residual = h - basis * coefficients;
            Ok(residual.norm())
        })
        .collect::<Result<Vec<f64>>>()?;

    let normalization = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let values = norms
        .iter()
        .map(|&n| {
            if n == 0.0 {
                PSEUDOSPECTRUM_CAP
            } else {
                (normalization / n).min(PSEUDOSPECTRUM_CAP)
            }
        })
        .collect();
    let (n_cross, n_range) = grid.dims();
    Ok(Pseudospectrum {
        values,
        normalization,
        n_cross,
        n_range,
    })
}

/// How many local maxima to keep.
#[derive(Debug, Clone, Copy)]
pub enum PeakRule {
    /// The strongest `M` local maxima.
    TopM(usize),
    /// Local maxima above `factor` times the median pseudo-spectrum value.
    NoiseFloor(f64),
}

/// Default noise-floor factor for "above the noise level" counting.
pub const DEFAULT_FLOOR_FACTOR: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct PeakDetection {
    /// Grid indices of the kept peaks, strongest first (ties broken by the
    /// lowest index).
    pub indices: Vec<usize>,
    /// Fewer local maxima existed than were requested.
    pub shortfall: bool,
    /// At least two candidate maxima carry exactly the same value, so the
    /// ranking relied on the index tie-break.
    pub degenerate: bool,
}

/// Finds local maxima on the grid graph (2 neighbors in 1-D, 4 in 2-D),
/// ranks them by value, and truncates per the rule.
pub fn detect_peaks(ps: &Pseudospectrum, rule: PeakRule) -> Result<PeakDetection> {
    if ps.values.is_empty() {
        return Err(Error::InvalidGrid("empty pseudospectrum".into()));
    }
    let (nx, nz) = (ps.n_cross, ps.n_range);
    let mut candidates: Vec<usize> = Vec::new();
    for k in 0..ps.values.len() {
        let (ix, iz) = (k % nx, k / nx);
        let v = ps.values[k];
        let mut is_peak = true;
        let mut check = |other: usize| {
            if ps.values[other] > v {
                is_peak = false;
            }
        };
        if ix > 0 {
            check(k - 1);
        }
        if ix + 1 < nx {
            check(k + 1);
        }
        if iz > 0 {
            check(k - nx);
        }
        if iz + 1 < nz {
            check(k + nx);
        }
        if is_peak {
            candidates.push(k);
        }
    }
    candidates.sort_by(|&a, &b| ps.values[b].total_cmp(&ps.values[a]).then(a.cmp(&b)));
    let degenerate = candidates
        .windows(2)
        .any(|w| ps.values[w[0]] == ps.values[w[1]]);

    let (indices, shortfall) = match rule {
        PeakRule::TopM(m) => {
            let kept: Vec<usize> = candidates.iter().take(m).copied().collect();
            let shortfall = kept.len() < m;
            (kept, shortfall)
        }
        PeakRule::NoiseFloor(factor) => {
            let floor = factor * median(&ps.values);
            let kept: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&k| ps.values[k] > floor)
                .collect();
            (kept, false)
        }
    };
    Ok(PeakDetection {
        indices,
        shortfall,
        degenerate,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Detected peaks scored against the true scene.
#[derive(Debug, Clone)]
pub struct LocalizationReport {
    pub detected: Vec<usize>,
    /// `(detected, true)` grid-index pairs matched within one grid cell.
    pub matched: Vec<(usize, usize)>,
    /// True scatterers with no detection nearby.
    pub misses: Vec<usize>,
    /// Detections at locations with no scatterer.
    pub ghosts: Vec<usize>,
    /// Per-match cross-range offsets in units of `h_x`.
    pub cross_range_errors: Vec<f64>,
    /// Per-match range offsets in units of `h_z`.
    pub range_errors: Vec<f64>,
}

impl LocalizationReport {
    /// Every scatterer matched exactly, with no ghosts.
    pub fn is_exact(&self) -> bool {
        self.misses.is_empty()
            && self.ghosts.is_empty()
            && self.cross_range_errors.iter().all(|&e| e == 0.0)
            && self.range_errors.iter().all(|&e| e == 0.0)
    }
}

/// Greedy nearest matching of detections to true scatterers within a radius
/// of one grid cell (Chebyshev); offsets are reported in mesh units.
///
/// The report is canonical: indices and matches are listed in grid order, so
/// two detection runs finding the same locations produce identical reports
/// regardless of how their peaks were ranked.
pub fn localization_report(
    detected: &[usize],
    scene: &Scene,
    grid: &ImagingGrid,
) -> LocalizationReport {
    let mut detected: Vec<usize> = detected.to_vec();
    detected.sort_unstable();
    let truth = scene.support();
    let coords = |k: usize| grid.lattice_coords(k);

    let mut pairs: Vec<(i64, usize, usize)> = Vec::new();
    for (di, &d) in detected.iter().enumerate() {
        let (dx, dz) = coords(d);
        for (ti, &t) in truth.iter().enumerate() {
            let (tx, tz) = coords(t);
            let ex = dx as i64 - tx as i64;
            let ez = dz as i64 - tz as i64;
            if ex.abs() <= 1 && ez.abs() <= 1 {
                pairs.push((ex * ex + ez * ez, di, ti));
            }
        }
    }
    pairs.sort();

    let mut used_detected = vec![false; detected.len()];
    let mut used_truth = vec![false; truth.len()];
    let mut matches: Vec<(usize, usize)> = Vec::new();
    for (_, di, ti) in pairs {
        if used_detected[di] || used_truth[ti] {
            continue;
        }
        used_detected[di] = true;
        used_truth[ti] = true;
        matches.push((di, ti));
    }
    matches.sort_by_key(|&(di, _)| detected[di]);
    let mut matched = Vec::new();
    let mut cross_range_errors = Vec::new();
    let mut range_errors = Vec::new();
    for (di, ti) in matches {
        let (dx, dz) = coords(detected[di]);
        let (tx, tz) = coords(truth[ti]);
        matched.push((detected[di], truth[ti]));
        cross_range_errors.push((dx as f64 - tx as f64).abs());
        range_errors.push((dz as f64 - tz as f64).abs());
    }
    let misses = truth
        .iter()
        .zip(&used_truth)
        .filter(|(_, &used)| !used)
        .map(|(&t, _)| t)
        .collect();
    let ghosts = detected
        .iter()
        .zip(&used_detected)
        .filter(|(_, &used)| !used)
        .map(|(&d, _)| d)
        .collect();
    LocalizationReport {
        detected,
        matched,
        misses,
        ghosts,
        cross_range_errors,
        range_errors,
    }
}

/// Principal angles (radians) between the column spans of two orthonormal
/// bases.
///
/// Uses the sine formulation — the singular values of `B − A(A^H B)` are the
/// sines of the angles — which, unlike the cosine route, resolves angles far
/// below `sqrt(machine epsilon)`.
pub fn principal_angles(a: &CMatrix, b: &CMatrix) -> Vec<f64> {
    let residual = b - a * (a.adjoint() * b);
    let svd = SVD::new(residual, false, false);
    let mut sines: Vec<f64> = svd.singular_values.iter().copied().collect();
    sines.sort_by(f64::total_cmp);
    sines
        .into_iter()
        .map(|s| s.clamp(0.0, 1.0).asin())
        .collect()
}
