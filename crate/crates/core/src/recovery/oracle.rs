//! Measurement sources for the recovery protocols.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::Result;
use crate::forward::{
    apply_noise_with, derive_seed, measure_intensities, IntensityRecord, NoiseModel, ResponseMatrix,
};
use crate::CVector;

/// A callable measurement source mapping an illumination vector to the
/// per-receiver intensities it produces.
///
/// Implementations must be safe to query concurrently; the protocols
/// nevertheless issue their queries in a fixed, documented order so that
/// noisy runs are reproducible. Repeated noiseless queries with the same
/// illumination return identical intensities.
pub trait IntensityOracle: Sync {
    /// Number of receivers (and illumination components).
    fn dimension(&self) -> usize;

    /// Records the intensities for one illumination.
    fn measure(&self, f: &CVector) -> Result<IntensityRecord>;

    /// Number of illuminations served so far.
    fn queries(&self) -> u64;
}

/// Oracle backed by the forward simulator: measures `|P f|²` and optionally
/// degrades it with the uniform noise model.
///
/// Noise draws are independent across receivers and across illuminations;
/// query `q` uses the stream seed `derive_seed(seed, q)`, so a run is fully
/// reproducible from `(P, ε, seed)` and the query order.
pub struct SimulatorOracle {
    response: ResponseMatrix,
    epsilon: f64,
    seed: u64,
    model: NoiseModel,
    counter: AtomicU64,
}

impl SimulatorOracle {
    pub fn noiseless(response: ResponseMatrix) -> Self {
        Self {
            response,
            epsilon: 0.0,
            seed: 0,
            model: NoiseModel::Replace,
            counter: AtomicU64::new(0),
        }
    }

    pub fn new(response: ResponseMatrix, epsilon: f64, seed: u64) -> Result<Self> {
        Self::with_model(response, epsilon, seed, NoiseModel::Replace)
    }

    pub fn with_model(
        response: ResponseMatrix,
        epsilon: f64,
        seed: u64,
        model: NoiseModel,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(crate::error::Error::NoiseOutOfRange(epsilon));
        }
        Ok(Self {
            response,
            epsilon,
            seed,
            model,
            counter: AtomicU64::new(0),
        })
    }

    /// The exact response matrix behind the oracle (phases included). The
    /// recovery protocols never look at it; tests and the full-phase
    /// baseline do.
    pub fn response(&self) -> &ResponseMatrix {
        &self.response
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl IntensityOracle for SimulatorOracle {
    fn dimension(&self) -> usize {
        self.response.n()
    }

    fn measure(&self, f: &CVector) -> Result<IntensityRecord> {
        let query = self.counter.fetch_add(1, Ordering::Relaxed);
        let record = measure_intensities(&self.response, f)?;
        if self.epsilon == 0.0 {
            return Ok(record);
        }
        apply_noise_with(
            &record,
            self.epsilon,
            derive_seed(self.seed, query),
            self.model,
        )
    }

    fn queries(&self) -> u64 {
        self.counter.load(Ordering::Relaxed)
    }
}
