//! Phase recovery from intensity-only measurements.
//!
//! Three protocols rebuild phase information by measuring chosen
//! linear combinations of array signals and applying polarization identities:
//!
//! * [`recover_time_reversal`] — `3N−2` illuminations give the time-reversal
//!   matrix `M = P*P` for an arbitrary (not necessarily symmetric) response.
//! * [`recover_response_symmetric`] — the same `3N−2` illuminations give the
//!   full response `P` up to a global phase when sources and receivers are
//!   co-located.
//! * [`recover_paraxial_six`] — six illuminations suffice for flat 1-D scenes
//!   at a known range in the paraxial regime, where the processed response is
//!   a Hankel matrix.
//!
//! Measurements are drawn from an [`IntensityOracle`], which wraps either the
//! forward simulator or imported data.

mod oracle;
mod plan;
pub mod protocol;

pub use oracle::{IntensityOracle, SimulatorOracle};
pub use plan::{IlluminationPlan, PlanKind};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::forward::{GeometricFactors, ResponseMatrix, ResponseModel};
use crate::geometry::ArrayGeometry;
use crate::{CMatrix, CVector, Complex};

/// Recovers `Re(ā·b)` and `Im(ā·b)` from the four intensities
/// `I_i = |a|²`, `I_j = |b|²`, `I_sum = |a+b|²`, `I_mix = |a−ib|²`.
pub fn polarization_product(i_i: f64, i_j: f64, i_sum: f64, i_mix: f64) -> Complex {
    Complex::new(0.5 * (i_sum - i_i - i_j), 0.5 * (i_mix - i_i - i_j))
}

/// Noise can push a derived product magnitude past its Cauchy-Schwarz bound
/// `√(I_i·I_j)`; rescale it onto the bound so downstream phases stay
/// consistent with the measured amplitudes. Noiseless products are unchanged.
fn clamp_product(z: Complex, i_i: f64, i_j: f64) -> Complex {
    let bound = (i_i * i_j).sqrt();
    let mag = z.norm();
    if mag > bound {
        z * (bound / mag)
    } else {
        z
    }
}

/// Tuning knobs for the recovery protocols.
#[derive(Debug, Clone, Copy)]
pub struct RecoveryOptions {
    /// A reference entry below `reference_floor` times the largest magnitude
    /// in its row (or among the skew-diagonals) is flagged as
    /// ill-conditioned.
    pub reference_floor: f64,
    /// Switch to the best-conditioned reference column when the default one
    /// is flagged. The amplitudes from the `N` single-transducer
    /// illuminations are measured first, so the switch costs no extra
    /// illuminations.
    pub allow_reference_fallback: bool,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            reference_floor: 1e-8,
            allow_reference_fallback: true,
        }
    }
}

/// What a recovered matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// Time-reversal matrix `M = P*P` (Hermitian positive semidefinite).
    TimeReversal,
    /// Response matrix recovered up to a global phase.
    ResponseUpToPhase,
    /// Hankel matrix of skew-diagonal values of the processed paraxial
    /// response.
    Hankel,
}

/// Conditioning summary of a recovery run.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    /// Reference column (or skew-diagonal origin) the phases were chained to.
    pub reference_index: usize,
    /// Smallest reference magnitude encountered, relative to the row (or
    /// global) maximum.
    pub min_reference_ratio: f64,
    /// Receivers (or skew-diagonal indices) whose reference fell below the
    /// floor.
    pub flagged: Vec<usize>,
    /// Whether the reference column was switched away from the default.
    pub fallback_applied: bool,
}

/// Matrix reconstructed from intensity-only data.
#[derive(Debug, Clone)]
pub struct RecoveredOperator {
    pub matrix: CMatrix,
    pub kind: OperatorKind,
    /// Human-readable statement of the gauge that fixes the result.
    pub phase_convention: &'static str,
    pub condition: ConditionReport,
}

/// Result of the six-illumination protocol: the Hankel matrix `Ĥ` and the
/// reassembled paraxial response `P̂ = D·Ĥ·D`.
#[derive(Debug, Clone)]
pub struct ParaxialSixRecovery {
    pub hankel: RecoveredOperator,
    pub response: ResponseMatrix,
}

fn unit(n: usize, i: usize) -> CVector {
    let mut e = CVector::zeros(n);
    e[i] = Complex::ONE;
    e
}

fn pair_sum(n: usize, r: usize, j: usize) -> CVector {
    let mut e = CVector::zeros(n);
    e[r] = Complex::ONE;
    e[j] = Complex::ONE;
    e
}

fn pair_mix(n: usize, r: usize, j: usize) -> CVector {
    let mut e = CVector::zeros(n);
    e[r] = Complex::ONE;
    e[j] = -Complex::I;
    e
}

/// Intensity tables collected from the `N` single-transducer illuminations.
struct Amplitudes {
    /// `beta[(k, i)] = |p_{ki}|²` measured with illumination `ê_i`.
    beta: DMatrix<f64>,
    /// `amp = sqrt(beta)`.
    amp: DMatrix<f64>,
}

fn measure_singles(oracle: &dyn IntensityOracle, n: usize) -> Result<Amplitudes> {
    let mut beta = DMatrix::zeros(n, n);
    for i in 0..n {
        let rec = oracle.measure(&unit(n, i))?;
        if rec.intensities.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rec.intensities.len(),
            });
        }
        beta.set_column(i, &rec.intensities);
    }
    let amp = beta.map(f64::sqrt);
    Ok(Amplitudes { beta, amp })
}

/// Picks the reference column and flags ill-conditioned receivers.
fn choose_reference(amp: &DMatrix<f64>, opts: &RecoveryOptions) -> ConditionReport {
    let n = amp.nrows();
    let row_max: Vec<f64> = (0..n).map(|k| amp.row(k).max()).collect();

    let worst_ratio = |col: usize| -> f64 {
        (0..n)
            .filter(|&k| row_max[k] > 0.0)
            .map(|k| amp[(k, col)] / row_max[k])
            .fold(1.0, f64::min)
    };
    let flagged_rows = |col: usize| -> Vec<usize> {
        (0..n)
            .filter(|&k| row_max[k] > 0.0 && amp[(k, col)] < opts.reference_floor * row_max[k])
            .collect()
    };

    let mut reference = 0;
    let mut flagged = flagged_rows(reference);
    let mut fallback_applied = false;
    if !flagged.is_empty() && opts.allow_reference_fallback && n > 1 {
        let best = (0..n)
            .max_by(|&a, &b| worst_ratio(a).total_cmp(&worst_ratio(b)))
            .unwrap();
        if best != reference && worst_ratio(best) > worst_ratio(reference) {
            reference = best;
            flagged = flagged_rows(reference);
            fallback_applied = true;
        }
    }
    ConditionReport {
        reference_index: reference,
        min_reference_ratio: worst_ratio(reference),
        flagged,
        fallback_applied,
    }
}

/// Per-receiver products `z_{kj} = p̄_{k,ref}·p_{kj}` from the polarization
/// identities applied to the pair illuminations `ê_ref + ê_j` and
/// `ê_ref − i·ê_j`.
fn measure_products(
    oracle: &dyn IntensityOracle,
    tables: &Amplitudes,
    reference: usize,
) -> Result<CMatrix> {
    let n = tables.beta.nrows();
    let mut z = CMatrix::zeros(n, n);
    for j in 0..n {
        if j == reference {
            continue;
        }
        let sum = oracle.measure(&pair_sum(n, reference, j))?;
        let mix = oracle.measure(&pair_mix(n, reference, j))?;
        for k in 0..n {
            let i_i = tables.beta[(k, reference)];
            let i_j = tables.beta[(k, j)];
            let product = polarization_product(i_i, i_j, sum.intensities[k], mix.intensities[k]);
            z[(k, j)] = clamp_product(product, i_i, i_j);
        }
    }
    Ok(z)
}

/// Mirrors the strict upper triangle onto the lower one and clears the
/// residual imaginary parts of the diagonal, making the matrix exactly
/// Hermitian.
fn hermitianize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Complex::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
}

/// Recovers the time-reversal matrix `M = P*P` from `3N−2` intensity-only
/// illuminations: `N` singles for the amplitudes `|p_{ki}|`, then `2N−2`
/// pairs against a reference column for the phase differences.
///
/// The assembled matrix is Hermitian positive semidefinite by construction
/// and equals `P*P` exactly for noiseless data.
pub fn recover_time_reversal(oracle: &dyn IntensityOracle, n: usize) -> Result<RecoveredOperator> {
    recover_time_reversal_with(oracle, n, &RecoveryOptions::default())
}

pub fn recover_time_reversal_with(
    oracle: &dyn IntensityOracle,
    n: usize,
    opts: &RecoveryOptions,
) -> Result<RecoveredOperator> {
    check_dimension(oracle, n)?;
    let tables = measure_singles(oracle, n)?;
    if n == 1 {
        // One illumination: M = [beta_1].
        return Ok(RecoveredOperator {
            matrix: CMatrix::from_element(1, 1, Complex::new(tables.beta[(0, 0)], 0.0)),
            kind: OperatorKind::TimeReversal,
            phase_convention: TIME_REVERSAL_GAUGE,
            condition: ConditionReport {
                reference_index: 0,
                min_reference_ratio: 1.0,
                flagged: vec![],
                fallback_applied: false,
            },
        });
    }
    let condition = choose_reference(&tables.amp, opts);
    let reference = condition.reference_index;
    let z = measure_products(oracle, &tables, reference)?;

    // Q_{kj} = |p_{kj}|·exp(i·arg z_{kj}) carries each row's phases relative
    // to its reference entry; the rotations cancel in Q*Q, so M = Q*Q = P*P.
    let q = CMatrix::from_fn(n, n, |k, j| {
        if j == reference {
            Complex::new(tables.amp[(k, reference)], 0.0)
        } else {
            Complex::from_polar(tables.amp[(k, j)], z[(k, j)].arg())
        }
    });
    let mut m = q.adjoint() * &q;
    hermitianize(&mut m);
    Ok(RecoveredOperator {
        matrix: m,
        kind: OperatorKind::TimeReversal,
        phase_convention: TIME_REVERSAL_GAUGE,
        condition,
    })
}

const TIME_REVERSAL_GAUGE: &str =
    "row phases taken relative to the reference column; M = Q*Q is gauge-free";

/// Recovers the full response matrix up to a global phase from `3N−2`
/// illuminations, valid for symmetric `P` (co-located sources and
/// receivers).
///
/// The gauge sets the reference diagonal entry real, and the result is
/// rotated so that `p̂_11` is real and nonnegative; for noiseless data
/// `P̂ = e^{−i·arg p_11}·P`.
pub fn recover_response_symmetric(
    oracle: &dyn IntensityOracle,
    n: usize,
) -> Result<RecoveredOperator> {
    recover_response_symmetric_with(oracle, n, &RecoveryOptions::default())
}

pub fn recover_response_symmetric_with(
    oracle: &dyn IntensityOracle,
    n: usize,
    opts: &RecoveryOptions,
) -> Result<RecoveredOperator> {
    check_dimension(oracle, n)?;
    let tables = measure_singles(oracle, n)?;
    if n == 1 {
        return Ok(RecoveredOperator {
            matrix: CMatrix::from_element(1, 1, Complex::new(tables.beta[(0, 0)].sqrt(), 0.0)),
            kind: OperatorKind::ResponseUpToPhase,
            phase_convention: SYMMETRIC_GAUGE,
            condition: ConditionReport {
                reference_index: 0,
                min_reference_ratio: 1.0,
                flagged: vec![],
                fallback_applied: false,
            },
        });
    }
    let condition = choose_reference(&tables.amp, opts);
    let r = condition.reference_index;
    let z = measure_products(oracle, &tables, r)?;

    // psi_{kj} = arg p_{kj} − arg p_{kr}; the symmetry p_{rk} = p_{kr} turns
    // the reference row's phases into reference-column phases, so
    // p̂_{kj} = |p_{kj}|·exp(i(psi_{kj} + psi_{rk})) = e^{-i arg p_rr}·p_{kj}.
    let psi = |k: usize, j: usize| -> f64 {
        if j == r {
            0.0
        } else {
            z[(k, j)].arg()
        }
    };
    let mut p = CMatrix::from_fn(n, n, |k, j| {
        Complex::from_polar(tables.amp[(k, j)], psi(k, j) + psi(r, k))
    });
    p[(r, r)] = Complex::new(tables.amp[(r, r)], 0.0);

    // A fallback reference leaves p̂_rr real instead of p̂_11; rotate the
    // global phase back onto the (1,1) gauge.
    if r != 0 && p[(0, 0)].norm() > 0.0 {
        let rotation = Complex::from_polar(1.0, -p[(0, 0)].arg());
        p *= rotation;
        p[(0, 0)] = Complex::new(p[(0, 0)].norm(), 0.0);
    }
    Ok(RecoveredOperator {
        matrix: p,
        kind: OperatorKind::ResponseUpToPhase,
        phase_convention: SYMMETRIC_GAUGE,
        condition,
    })
}

const SYMMETRIC_GAUGE: &str = "global phase fixed by making p_11 real and nonnegative";

/// Recovers the Hankel matrix of a flat 1-D scene at known range `l` from six
/// illuminations (three per array edge), together with the paraxial response
/// `P̂ = D·Ĥ·D`.
///
/// The top-edge triplet determines `Ξ_1..Ξ_N` up to a common phase and the
/// bottom-edge triplet extends the chain to `Ξ_{2N−1}`; the gauge makes `Ξ_1`
/// real and nonnegative. Any skew-diagonal magnitude below the conditioning
/// floor breaks the phase chain and aborts the recovery.
pub fn recover_paraxial_six(
    oracle: &dyn IntensityOracle,
    geom: &ArrayGeometry,
    l: f64,
) -> Result<ParaxialSixRecovery> {
    recover_paraxial_six_with(oracle, geom, l, &RecoveryOptions::default())
}

pub fn recover_paraxial_six_with(
    oracle: &dyn IntensityOracle,
    geom: &ArrayGeometry,
    l: f64,
    opts: &RecoveryOptions,
) -> Result<ParaxialSixRecovery> {
    let n = geom.n();
    check_dimension(oracle, n)?;
    geom.uniform_pitch()
        .ok_or_else(|| Error::NotOneDimensional("array is not a uniform line".into()))?;
    let factors = GeometricFactors::new(geom, l)?;
    let plan = IlluminationPlan::paraxial_six(&factors)?;

    let mut measured = Vec::with_capacity(6);
    for f in &plan.vectors {
        measured.push(oracle.measure(f)?.intensities);
    }

    // Remove the known geometric scales: |C_t| = 1/(4 pi L) enters twice for
    // the plain edge illuminations (receive and source side) and once for the
    // D^{-1}-compensated pairs.
    let c2 = factors.magnitude() * factors.magnitude();
    let edge_scale = 1.0 / (c2 * c2);
    let pair_scale = 1.0 / c2;

    // |Xi_m|: top edge covers m = 0..N-1, bottom edge m = N-1..2N-2.
    let mut mag = vec![0.0; 2 * n - 1];
    for k in 0..n {
        mag[k] = (measured[0][k] * edge_scale).sqrt();
    }
    for k in 1..n {
        mag[k + n - 1] = (measured[3][k] * edge_scale).sqrt();
    }

    let max_mag = mag.iter().cloned().fold(0.0, f64::max);
    let floor = opts.reference_floor * max_mag;
    let mut min_ratio = 1.0_f64;
    let mut flagged = Vec::new();
    for (m, &value) in mag.iter().enumerate() {
        if max_mag > 0.0 {
            min_ratio = min_ratio.min(value / max_mag);
        }
        if value < floor || max_mag == 0.0 {
            flagged.push(m);
        }
    }
    if let Some(&index) = flagged.first() {
        return Err(Error::BrokenPhaseChain {
            index,
            magnitude: mag[index],
            floor,
        });
    }

    // The quadrature pairs use +i (|a + ib|²), which conjugates the product
    // recovered by the −i identity.
    let chained_product = |i_i: f64, i_j: f64, i_sum: f64, i_mix: f64| -> Complex {
        clamp_product(polarization_product(i_i, i_j, i_sum, i_mix), i_i, i_j).conj()
    };

    let mut phase = vec![0.0; 2 * n - 1];
    // Top edge, left to right: receiver k couples Xi_k and Xi_{k+1}.
    for k in 0..n - 1 {
        let z = chained_product(
            mag[k] * mag[k],
            mag[k + 1] * mag[k + 1],
            measured[1][k] * pair_scale,
            measured[2][k] * pair_scale,
        );
        phase[k + 1] = phase[k] + z.arg();
    }
    // Bottom edge, chaining outward from Xi_{N-1}: receiver k couples
    // Xi_{k+N-1} (from e_N) and Xi_{k+N-2} (from e_{N-1}), so the product
    // points backwards along the chain.
    for m in n - 1..2 * n - 2 {
        let k = m - (n - 2);
        let z = chained_product(
            mag[m + 1] * mag[m + 1],
            mag[m] * mag[m],
            measured[4][k] * pair_scale,
            measured[5][k] * pair_scale,
        );
        phase[m + 1] = phase[m] - z.arg();
    }

    let xi: Vec<Complex> = mag
        .iter()
        .zip(phase.iter())
        .map(|(&m, &p)| Complex::from_polar(m, p))
        .collect();
    let hankel_matrix = CMatrix::from_fn(n, n, |r, s| xi[r + s]);
    let response = ResponseMatrix {
        matrix: factors.sandwich(&hankel_matrix),
        model: ResponseModel::Paraxial,
        symmetric: true,
        warnings: vec![],
    };
    Ok(ParaxialSixRecovery {
        hankel: RecoveredOperator {
            matrix: hankel_matrix,
            kind: OperatorKind::Hankel,
            phase_convention: SIX_GAUGE,
            condition: ConditionReport {
                reference_index: 0,
                min_reference_ratio: min_ratio,
                flagged: vec![],
                fallback_applied: false,
            },
        },
        response,
    })
}

const SIX_GAUGE: &str = "common phase fixed by making Xi_1 real and nonnegative";

fn check_dimension(oracle: &dyn IntensityOracle, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::ProtocolPrecondition(
            "array size must be positive".into(),
        ));
    }
    if oracle.dimension() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: oracle.dimension(),
        });
    }
    Ok(())
}

/// Relative Frobenius distance between `a` and `b` minimized over a global
/// phase, `min_θ ‖e^{iθ}a − b‖_F / ‖b‖_F`.
pub fn relative_error_up_to_phase(a: &CMatrix, b: &CMatrix) -> f64 {
    let inner: Complex = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    let rotation = if inner.norm() > 0.0 {
        Complex::from_polar(1.0, inner.arg())
    } else {
        Complex::ONE
    };
    (a * rotation - b).norm() / b.norm()
}
