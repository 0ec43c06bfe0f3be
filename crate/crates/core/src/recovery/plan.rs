//! Canonical illumination sequences of the recovery protocols.

use crate::error::{Error, Result};
use crate::forward::GeometricFactors;
use crate::{CVector, Complex};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    /// `3N−2` illuminations for the time-reversal matrix of a general array.
    General3N,
    /// The same `3N−2` illuminations, consumed with the symmetric-response
    /// bookkeeping.
    Symmetric3N,
    /// Six illuminations from the two array edges for flat paraxial scenes.
    ParaxialSix,
}

/// An ordered list of illumination vectors.
///
/// `General3N` and `Symmetric3N` share the same sequence — the basis vectors
/// `ê_1..ê_N` followed, for every `j ≠ reference`, by `ê_ref + ê_j` and
/// `ê_ref − i·ê_j` — so amplitude data is always available before the
/// reference column is committed, and noisy runs of the two protocols see
/// identical data.
#[derive(Debug, Clone)]
pub struct IlluminationPlan {
    pub kind: PlanKind,
    pub vectors: Vec<CVector>,
    /// Reference column of the pair illuminations.
    pub reference: usize,
}

impl IlluminationPlan {
    pub fn general(n: usize) -> Self {
        Self::with_reference(PlanKind::General3N, n, 0)
    }

    pub fn symmetric(n: usize) -> Self {
        Self::with_reference(PlanKind::Symmetric3N, n, 0)
    }

    pub fn with_reference(kind: PlanKind, n: usize, reference: usize) -> Self {
        assert!(reference < n.max(1), "reference column out of range");
        let mut vectors = Vec::with_capacity(if n <= 1 { 1 } else { 3 * n - 2 });
        for i in 0..n {
            vectors.push(basis(n, i));
        }
        for j in (0..n).filter(|&j| j != reference) {
            let mut sum = basis(n, reference);
            sum[j] += Complex::ONE;
            vectors.push(sum);
            let mut mix = basis(n, reference);
            mix[j] = -Complex::I;
            vectors.push(mix);
        }
        Self {
            kind,
            vectors,
            reference,
        }
    }

    /// The six-edge sequence `e_1`, `D⁻¹(e_1+e_2)`, `D⁻¹(e_1+i·e_2)`, `e_N`,
    /// `D⁻¹(e_N+e_{N−1})`, `D⁻¹(e_N+i·e_{N−1})`.
    pub fn paraxial_six(factors: &GeometricFactors) -> Result<Self> {
        let n = factors.len();
        if n < 2 {
            return Err(Error::ProtocolPrecondition(
                "the six-illumination protocol needs at least 2 transducers".into(),
            ));
        }
        let pair = |a: usize, b: usize, quadrature: bool| {
            let mut f = CVector::zeros(n);
            f[a] = Complex::ONE;
            f[b] = if quadrature { Complex::I } else { Complex::ONE };
            factors.apply_inverse(&f)
        };
        let vectors = vec![
            basis(n, 0),
            pair(0, 1, false),
            pair(0, 1, true),
            basis(n, n - 1),
            pair(n - 1, n - 2, false),
            pair(n - 1, n - 2, true),
        ];
        Ok(Self {
            kind: PlanKind::ParaxialSix,
            vectors,
            reference: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Theoretical illumination count of a plan kind for an `N`-element
    /// array.
    pub fn budget(kind: PlanKind, n: usize) -> u64 {
        match kind {
            PlanKind::General3N | PlanKind::Symmetric3N => {
                if n <= 1 {
                    1
                } else {
                    3 * n as u64 - 2
                }
            }
            PlanKind::ParaxialSix => 6,
        }
    }
}

fn basis(n: usize, i: usize) -> CVector {
    let mut e = CVector::zeros(n);
    e[i] = Complex::ONE;
    e
}
