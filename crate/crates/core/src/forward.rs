//! Forward model: response matrices, intensity-only measurements, and the
//! multiplicative noise model.
//!
//! Under the Born approximation the response of `M` weak scatterers is a sum
//! of rank-one terms, `P = Σ_j ρ_j g(ξ_j) g(ξ_j)ᵗ = 𝒢 diag(ρ) 𝒢ᵗ`. When the
//! image window is far from the array the same matrix is well approximated by
//! the paraxial model, which factors as `P = D H D` with known diagonal
//! geometric factors `D` and a Hankel matrix `H` for flat 1-D scenes.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{
    fresnel_diagnostics, green_vector, ArrayGeometry, ImagingGrid, ParaxialRegime, Scene,
};
use crate::{CMatrix, CVector, Complex};

/// Wave-propagation model behind a response matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseModel {
    Born,
    Paraxial,
}

/// Non-fatal conditions noticed during assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseWarning {
    /// The scene has no scatterers; the response is identically zero.
    EmptyScene,
    /// The setup is outside the paraxial validity regime; the matrix was
    /// still computed.
    OutsideParaxialRegime,
}

/// Dense `N × N` array response.
#[derive(Debug, Clone)]
pub struct ResponseMatrix {
    pub matrix: CMatrix,
    pub model: ResponseModel,
    /// Sources and receivers co-located (Lorentz reciprocity gives `P = Pᵗ`).
    pub symmetric: bool,
    pub warnings: Vec<ResponseWarning>,
}

impl ResponseMatrix {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Born response for co-located sources and receivers:
/// `P(r,s) = Σ_j ρ_j G(x_r, ξ_j) G(ξ_j, x_s)`.
///
/// Lorentz reciprocity makes this exactly symmetric; the entries are mirrored
/// so `P = Pᵗ` holds bit for bit.
pub fn assemble_response_born(
    geom: &ArrayGeometry,
    grid: &ImagingGrid,
    scene: &Scene,
) -> Result<ResponseMatrix> {
    check_scene(grid, scene)?;
    let n = geom.n();
    let mut vectors = Vec::with_capacity(scene.m());
    for &(j, alpha) in scene.entries() {
        vectors.push((alpha, green_vector(geom, grid.point(j))?));
    }
    let mut m = CMatrix::zeros(n, n);
    for r in 0..n {
        for s in r..n {
            let sum: Complex = vectors.iter().map(|(alpha, g)| alpha * g[r] * g[s]).sum();
            m[(r, s)] = sum;
            m[(s, r)] = sum;
        }
    }
    let mut warnings = Vec::new();
    if scene.m() == 0 {
        warnings.push(ResponseWarning::EmptyScene);
    }
    Ok(ResponseMatrix {
        matrix: m,
        model: ResponseModel::Born,
        symmetric: true,
        warnings,
    })
}

/// Born response with distinct receive and transmit arrays; the result is not
/// symmetric in general.
pub fn assemble_response_born_bistatic(
    rx: &ArrayGeometry,
    tx: &ArrayGeometry,
    grid: &ImagingGrid,
    scene: &Scene,
) -> Result<ResponseMatrix> {
    assemble_born_product(rx, tx, grid, scene)
}

fn assemble_born_product(
    rx: &ArrayGeometry,
    tx: &ArrayGeometry,
    grid: &ImagingGrid,
    scene: &Scene,
) -> Result<ResponseMatrix> {
    check_scene(grid, scene)?;
    let mut m = CMatrix::zeros(rx.n(), tx.n());
    for &(j, alpha) in scene.entries() {
        let xi = grid.point(j);
        let g_rx = green_vector(rx, xi)?;
        let g_tx = green_vector(tx, xi)?;
        // rank-one update alpha * g_rx g_tx^t
        m.gerc(alpha, &g_rx, &g_tx.conjugate(), Complex::ONE);
    }
    let mut warnings = Vec::new();
    if scene.m() == 0 {
        warnings.push(ResponseWarning::EmptyScene);
    }
    Ok(ResponseMatrix {
        matrix: m,
        model: ResponseModel::Born,
        symmetric: false,
        warnings,
    })
}

fn check_scene(grid: &ImagingGrid, scene: &Scene) -> Result<()> {
    if scene.k() != grid.k() {
        return Err(Error::InvalidScene(format!(
            "scene defined over {} grid points but the grid has {}",
            scene.k(),
            grid.k()
        )));
    }
    Ok(())
}

/// Known diagonal factors of the paraxial response,
/// `C_t = exp(iκL)·exp(iκ|x_t|²/2L) / (4πL)`.
#[derive(Debug, Clone)]
pub struct GeometricFactors {
    factors: CVector,
    range: f64,
}

impl GeometricFactors {
    pub fn new(geom: &ArrayGeometry, l: f64) -> Result<Self> {
        if l <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "range L must be positive, got {l}"
            )));
        }
        let kappa = geom.wavenumber();
        let factors = CVector::from_iterator(
            geom.n(),
            geom.positions().iter().map(|x| {
                let cross2 = x.x * x.x + x.y * x.y;
                Complex::from_polar(1.0 / (4.0 * PI * l), kappa * (l + cross2 / (2.0 * l)))
            }),
        );
        Ok(Self { factors, range: l })
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factor(&self, t: usize) -> Complex {
        self.factors[t]
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    /// Common magnitude of every factor, `1/(4πL)`.
    pub fn magnitude(&self) -> f64 {
        1.0 / (4.0 * PI * self.range)
    }

    /// `D v` (element-wise product with the factors).
    pub fn apply(&self, v: &CVector) -> CVector {
        v.zip_map(&self.factors, |vi, ci| vi * ci)
    }

    /// `D⁻¹ v`; the factors are unit-modulus up to `1/(4πL)`, never zero.
    pub fn apply_inverse(&self, v: &CVector) -> CVector {
        v.zip_map(&self.factors, |vi, ci| vi / ci)
    }

    /// `D A D` (scales row `r` by `C_r` and column `s` by `C_s`).
    pub fn sandwich(&self, a: &CMatrix) -> CMatrix {
        CMatrix::from_fn(a.nrows(), a.ncols(), |r, s| {
            self.factors[r] * a[(r, s)] * self.factors[s]
        })
    }

    /// `D⁻¹ A D⁻¹`.
    pub fn unsandwich(&self, a: &CMatrix) -> CMatrix {
        CMatrix::from_fn(a.nrows(), a.ncols(), |r, s| {
            a[(r, s)] / (self.factors[r] * self.factors[s])
        })
    }
}

/// Reflectivities with the known quadratic range phase absorbed:
/// `ρ̃_j = ρ_j·exp(iκ|y_j|²/L)` for the cross-range coordinates `y_j` of the
/// flat grid.
///
/// Both Green's factors of the round trip contribute `|y_j|²/2L` to the
/// expansion, so the full distortion is `|y_j|²/L`. The magnitudes are
/// untouched.
pub fn distorted_reflectivity(scene: &Scene, grid: &ImagingGrid, kappa: f64) -> Result<CVector> {
    check_scene(grid, scene)?;
    let l = grid.range();
    let mut rho = CVector::zeros(grid.k());
    for &(j, alpha) in scene.entries() {
        let y = grid.point(j);
        let cross2 = y.x * y.x + y.y * y.y;
        rho[j] = alpha * Complex::from_polar(1.0, kappa * cross2 / l);
    }
    Ok(rho)
}

/// Paraxial response for a flat scene:
/// `P(r,s) = C_r C_s Σ_j ρ̃_j exp(−iκ⟨x_s + x_r, y_j⟩ / L)`.
///
/// Requires a flat grid. Setups outside the paraxial regime are still
/// computed but carry [`ResponseWarning::OutsideParaxialRegime`].
pub fn assemble_response_paraxial(
    geom: &ArrayGeometry,
    grid: &ImagingGrid,
    scene: &Scene,
) -> Result<ResponseMatrix> {
    check_scene(grid, scene)?;
    if !grid.flat() {
        return Err(Error::NonFlatGrid);
    }
    let kappa = geom.wavenumber();
    let l = grid.range();
    let rho_tilde = distorted_reflectivity(scene, grid, kappa)?;
    let n = geom.n();

    // exp(-i kappa <x_s + x_r, y>/L) = v[r] * v[s] with v[s] = exp(-i kappa <x_s, y>/L),
    // so each scatterer contributes a rank-one term in the phase vectors;
    // mirroring keeps the result exactly symmetric.
    let vectors: Vec<(Complex, CVector)> = scene
        .entries()
        .iter()
        .map(|&(j, _)| {
            let y = grid.point(j);
            let v = CVector::from_iterator(
                n,
                geom.positions().iter().map(|x| {
                    let dot = x.x * y.x + x.y * y.y;
                    Complex::from_polar(1.0, -kappa * dot / l)
                }),
            );
            (rho_tilde[j], v)
        })
        .collect();
    let mut h = CMatrix::zeros(n, n);
    for r in 0..n {
        for s in r..n {
            let sum: Complex = vectors.iter().map(|(rho, v)| rho * v[r] * v[s]).sum();
            h[(r, s)] = sum;
            h[(s, r)] = sum;
        }
    }

    let factors = GeometricFactors::new(geom, l)?;
    let matrix = factors.sandwich(&h);

    let mut warnings = Vec::new();
    if scene.m() == 0 {
        warnings.push(ResponseWarning::EmptyScene);
    }
    if fresnel_diagnostics(geom, grid).regime == ParaxialRegime::InvalidParaxial {
        warnings.push(ResponseWarning::OutsideParaxialRegime);
    }
    Ok(ResponseMatrix {
        matrix,
        model: ResponseModel::Paraxial,
        symmetric: true,
        warnings,
    })
}

/// Skew-diagonal values of the processed paraxial response of a flat 1-D
/// scene observed by a uniform linear array.
///
/// The processed data `H(x_r, x_s) = (C_r C_s)⁻¹ P(x_r, x_s)` depends on the
/// transducer positions only through `x_r + x_s`, so the induced matrix
/// `H[r][s] = Ξ[r+s]` has constant anti-diagonals.
#[derive(Debug, Clone)]
pub struct HankelData {
    /// Skew-diagonal values, `2N − 1` of them.
    pub xi: Vec<Complex>,
    /// `Λ = κ·a·b/(L·K)` for array length `a = N·pitch` and IW length
    /// `b = K·pitch'`; equals `2π` at the optimal sampling `K = K_opt`.
    pub lambda: f64,
    /// Array size `N`.
    pub n: usize,
}

impl HankelData {
    /// Expands the skew-diagonal values into the `N × N` Hankel matrix.
    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |r, s| self.xi[r + s])
    }
}

/// Computes the Hankel skew-diagonal values of a flat 1-D scene directly,
/// `Ξ_m = Σ_j ρ̃_j exp(−iκ(x_r + x_s) x'_j / L)` with `x_r + x_s` constant on
/// the anti-diagonal `m = r + s`.
///
/// Requires a uniform-pitch linear array and a uniform flat line of grid
/// points; either may be translated, which leaves the Hankel structure
/// intact.
pub fn hankel_from_scene(
    geom: &ArrayGeometry,
    grid: &ImagingGrid,
    scene: &Scene,
) -> Result<HankelData> {
    check_scene(grid, scene)?;
    let pitch = geom
        .uniform_pitch()
        .ok_or_else(|| Error::NotOneDimensional("array is not a uniform line".into()))?;
    let grid_pitch = grid
        .uniform_cross_pitch()
        .ok_or_else(|| Error::NotOneDimensional("grid is not a uniform flat line".into()))?;
    let n = geom.n();
    let kappa = geom.wavenumber();
    let l = grid.range();
    let origin = geom.position(0).x;
    let rho_tilde = distorted_reflectivity(scene, grid, kappa)?;

    let xi = (0..2 * n - 1)
        .map(|m| {
            let x_sum = 2.0 * origin + m as f64 * pitch;
            scene
                .entries()
                .iter()
                .map(|&(j, _)| {
                    rho_tilde[j] * Complex::from_polar(1.0, -kappa * x_sum * grid.point(j).x / l)
                })
                .sum()
        })
        .collect();

    let a = n as f64 * pitch;
    let b = grid.k() as f64 * grid_pitch;
    let lambda = kappa * a * b / (l * grid.k() as f64);
    Ok(HankelData { xi, lambda, n })
}

/// Per-receiver intensities recorded for one illumination.
#[derive(Debug, Clone)]
pub struct IntensityRecord {
    pub illumination: CVector,
    pub intensities: nalgebra::DVector<f64>,
    /// Noise strength the record was subjected to (0 for noiseless).
    pub noise: f64,
}

/// Noiseless intensities `β_i = |(P f)_i|²`.
pub fn measure_intensities(p: &ResponseMatrix, f: &CVector) -> Result<IntensityRecord> {
    if f.len() != p.matrix.ncols() {
        return Err(Error::DimensionMismatch {
            expected: p.matrix.ncols(),
            got: f.len(),
        });
    }
    let b = &p.matrix * f;
    Ok(IntensityRecord {
        illumination: f.clone(),
        intensities: b.map(|bi| bi.norm_sqr()),
        noise: 0.0,
    })
}

/// How a noise draw enters the recorded intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseModel {
    /// Replace `β_i` by a draw uniform on `[(1−ε)β_i, (1+ε)β_i]`
    /// (multiplicative noise `β_i·U[1−ε, 1+ε]`).
    #[default]
    Replace,
    /// Add the uniform draw to `β_i`, reading the description literally;
    /// kept for comparison, doubles the mean.
    AdditiveLiteral,
}

/// Applies independent uniform noise on `[(1−ε)β_i, (1+ε)β_i]` to every
/// receiver. Deterministic for a given `(record, epsilon, seed)`.
pub fn apply_noise(record: &IntensityRecord, epsilon: f64, seed: u64) -> Result<IntensityRecord> {
    apply_noise_with(record, epsilon, seed, NoiseModel::Replace)
}

pub fn apply_noise_with(
    record: &IntensityRecord,
    epsilon: f64,
    seed: u64,
    model: NoiseModel,
) -> Result<IntensityRecord> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::NoiseOutOfRange(epsilon));
    }
    if epsilon == 0.0 {
        return Ok(record.clone());
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let intensities = record.intensities.map(|beta| {
        let u = unit_f64(&mut rng);
        let draw = beta * (1.0 - epsilon) + 2.0 * epsilon * beta * u;
        match model {
            NoiseModel::Replace => draw,
            NoiseModel::AdditiveLiteral => beta + draw,
        }
    });
    Ok(IntensityRecord {
        illumination: record.illumination.clone(),
        intensities,
        noise: epsilon,
    })
}

/// Uniform draw on `[0, 1)` from the top 53 bits of the generator.
fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Derives an independent stream seed from a master seed and an index
/// (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
