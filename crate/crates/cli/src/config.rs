//! Experiment configuration: a single TOML document with nested blocks.
//!
//! All lengths are in wavelengths. The schema is documented in the repository
//! README; the `configs/` directory holds working references.

use serde::Deserialize;
use std::path::Path;

use imager_core::forward::NoiseModel;
use imager_core::geometry::{ArrayGeometry, ImagingGrid, Scene, DEFAULT_WAVENUMBER};
use imager_core::imaging::{PeakRule, RankRule, DEFAULT_FLOOR_FACTOR, DEFAULT_SV_THRESHOLD};
use imager_core::recovery::protocol::{protocol_by_name, protocol_names, RecoveryProtocol};
use imager_core::recovery::RecoveryOptions;
use imager_core::Complex;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub grid: GridConfig,
    pub scene: SceneConfig,
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub forward: ForwardConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Number of transducers.
    pub n: usize,
    /// Array length in wavelengths (side length for planar layouts).
    pub aperture: f64,
    /// Probing wavelength; lengths are expressed in its units.
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    /// "linear" (1-D, centered on the x-axis) or "planar" (square array;
    /// `n` must be a perfect square).
    #[serde(default = "default_layout")]
    pub layout: String,
}

fn default_wavelength() -> f64 {
    1.0
}

fn default_layout() -> String {
    "linear".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Array-to-IW distances; experiments sweep over every entry.
    pub l: FloatOrList,
    /// Cross-range lattice points.
    pub cross_points: usize,
    /// Range lattice points; 1 makes the scene flat at known range.
    #[serde(default = "default_one")]
    pub range_points: usize,
}

fn default_one() -> usize {
    1
}

/// Accepts `l = 2000.0` as well as `l = [2000.0, 5000.0]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FloatOrList {
    One(f64),
    Many(Vec<f64>),
}

impl FloatOrList {
    pub fn values(&self) -> Vec<f64> {
        match self {
            FloatOrList::One(v) => vec![*v],
            FloatOrList::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    /// Scatterer positions as `(cross index, range index)` lattice pairs.
    pub scatterers: Vec<[usize; 2]>,
    /// "unit", "random" (unit magnitude, uniform phase from `seed`), or
    /// "explicit" (complex values in `values`).
    #[serde(default = "default_reflectivity")]
    pub reflectivity: String,
    #[serde(default)]
    pub values: Vec<[f64; 2]>,
    #[serde(default)]
    pub seed: u64,
}

fn default_reflectivity() -> String {
    "random".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Registry name: "general", "symmetric", "paraxial-six", or
    /// "full-phase-baseline".
    pub name: String,
    /// "known" splits the SVD at the scene's scatterer count; "threshold"
    /// keeps singular values above `sv_threshold · σ_1`.
    #[serde(default = "default_rank")]
    pub rank: String,
    #[serde(default = "default_sv_threshold")]
    pub sv_threshold: f64,
    /// "top-m" keeps the strongest M peaks; "floor" keeps peaks above
    /// `floor_factor` times the median pseudo-spectrum value.
    #[serde(default = "default_peaks")]
    pub peaks: String,
    #[serde(default = "default_floor_factor")]
    pub floor_factor: f64,
    #[serde(default = "default_reference_floor")]
    pub reference_floor: f64,
    #[serde(default = "default_true")]
    pub reference_fallback: bool,
}

fn default_rank() -> String {
    "known".into()
}

fn default_sv_threshold() -> f64 {
    DEFAULT_SV_THRESHOLD
}

fn default_peaks() -> String {
    "top-m".into()
}

fn default_floor_factor() -> f64 {
    DEFAULT_FLOOR_FACTOR
}

fn default_reference_floor() -> f64 {
    1e-8
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardConfig {
    /// Simulator model behind the intensity oracle: "born" or "paraxial".
    #[serde(default = "default_forward_model")]
    pub model: String,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self {
            model: default_forward_model(),
        }
    }
}

fn default_forward_model() -> String {
    "born".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub trials: usize,
    /// "replace" or "additive-literal".
    #[serde(default = "default_noise_model")]
    pub model: String,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            epsilons: default_epsilons(),
            seed: 0,
            trials: 1,
            model: default_noise_model(),
        }
    }
}

fn default_epsilons() -> Vec<f64> {
    vec![0.0]
}

fn default_noise_model() -> String {
    "replace".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: String,
    /// Any of "csv" and "pgm".
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            formats: default_formats(),
        }
    }
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_formats() -> Vec<String> {
    vec!["csv".into()]
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub protocol: Option<String>,
    pub out: Option<String>,
    pub formats: Option<Vec<String>>,
}

/// Forward simulator model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardModel {
    Born,
    Paraxial,
}

/// A validated experiment, ready to run.
pub struct RunPlan {
    pub geometry: ArrayGeometry,
    pub l_values: Vec<f64>,
    pub cross_points: usize,
    pub range_points: usize,
    pub scatterers: Vec<[usize; 2]>,
    pub reflectivities: Vec<Complex>,
    pub scene_seed: u64,
    pub protocol: &'static dyn RecoveryProtocol,
    pub rank: RankChoice,
    pub peaks: PeakChoice,
    pub options: RecoveryOptions,
    pub forward: ForwardModel,
    pub epsilons: Vec<f64>,
    pub noise_seed: u64,
    pub trials: usize,
    pub noise_model: NoiseModel,
    pub out_dir: String,
    pub write_csv: bool,
    pub write_pgm: bool,
    /// FNV-1a hash of the configuration text, for the run manifest.
    pub config_hash: u64,
}

#[derive(Debug, Clone, Copy)]
pub enum RankChoice {
    KnownSceneSize,
    Threshold(f64),
}

#[derive(Debug, Clone, Copy)]
pub enum PeakChoice {
    TopSceneSize,
    Floor(f64),
}

impl RunPlan {
    pub fn rank_rule(&self, scene: &Scene) -> RankRule {
        match self.rank {
            RankChoice::KnownSceneSize => RankRule::Known(scene.m()),
            RankChoice::Threshold(tau) => RankRule::Threshold(tau),
        }
    }

    pub fn peak_rule(&self, scene: &Scene) -> PeakRule {
        match self.peaks {
            PeakChoice::TopSceneSize => PeakRule::TopM(scene.m()),
            PeakChoice::Floor(factor) => PeakRule::NoiseFloor(factor),
        }
    }

    /// Grid for one sweep distance.
    pub fn grid(&self, l: f64) -> Result<ImagingGrid> {
        ImagingGrid::centered(&self.geometry, l, self.cross_points, self.range_points)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Scene over a grid built by [`RunPlan::grid`].
    pub fn scene(&self, grid: &ImagingGrid) -> Result<Scene> {
        let (nx, _) = grid.dims();
        let entries = self
            .scatterers
            .iter()
            .zip(self.reflectivities.iter())
            .map(|(&[ix, iz], &alpha)| (iz * nx + ix, alpha))
            .collect();
        Scene::new(grid.k(), entries).map_err(|e| CliError::Config(e.to_string()))
    }
}

pub fn load_config(path: &Path) -> Result<(ExperimentConfig, u64)> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((config, fnv1a(text.as_bytes())))
}

/// FNV-1a, 64-bit: a stable content hash for manifests.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

pub fn validate(config: &ExperimentConfig, hash: u64, overrides: &Overrides) -> Result<RunPlan> {
    let g = &config.geometry;
    if g.wavelength <= 0.0 {
        return Err(CliError::Config(format!(
            "wavelength must be positive, got {}",
            g.wavelength
        )));
    }
    let kappa = DEFAULT_WAVENUMBER / g.wavelength;
    let geometry = match g.layout.as_str() {
        "linear" => ArrayGeometry::linear(g.n, g.aperture, kappa),
        "planar" => {
            let side = (g.n as f64).sqrt().round() as usize;
            if side * side != g.n {
                return Err(CliError::Config(format!(
                    "planar layout needs a square transducer count, got {}",
                    g.n
                )));
            }
            ArrayGeometry::planar(side, g.aperture, kappa)
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown layout \"{other}\" (use \"linear\" or \"planar\")"
            )));
        }
    }
    .map_err(|e| CliError::Config(e.to_string()))?;

    let l_values = config.grid.l.values();
    if l_values.is_empty() {
        return Err(CliError::Config(
            "grid.l must list at least one range".into(),
        ));
    }
    if let Some(&l) = l_values.iter().find(|&&l| l <= 0.0) {
        return Err(CliError::Config(format!(
            "grid.l entries must be positive, got {l}"
        )));
    }
    if config.grid.cross_points == 0 || config.grid.range_points == 0 {
        return Err(CliError::Config(
            "grid needs at least one point per axis".into(),
        ));
    }

    let s = &config.scene;
    for &[ix, iz] in &s.scatterers {
        if ix >= config.grid.cross_points || iz >= config.grid.range_points {
            return Err(CliError::Config(format!(
                "scatterer ({ix}, {iz}) outside the {} x {} lattice",
                config.grid.cross_points, config.grid.range_points
            )));
        }
    }
    let m = s.scatterers.len();
    if m >= g.n {
        return Err(CliError::Config(format!(
            "MUSIC needs fewer scatterers than transducers (M = {m}, N = {})",
            g.n
        )));
    }
    let reflectivities = reflectivity_values(s)?;

    let protocol_name = overrides
        .protocol
        .clone()
        .unwrap_or_else(|| config.protocol.name.clone());
    let protocol = protocol_by_name(&protocol_name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown protocol \"{protocol_name}\" (available: {})",
            protocol_names().join(", ")
        ))
    })?;
    if protocol.name() == "paraxial-six" {
        if config.grid.range_points != 1 {
            return Err(CliError::Config(
                "paraxial-six needs a flat scene: set grid.range_points = 1".into(),
            ));
        }
        if g.layout != "linear" {
            return Err(CliError::Config(
                "paraxial-six needs a linear array layout".into(),
            ));
        }
    }

    let rank = match config.protocol.rank.as_str() {
        "known" => RankChoice::KnownSceneSize,
        "threshold" => RankChoice::Threshold(config.protocol.sv_threshold),
        other => {
            return Err(CliError::Config(format!(
                "unknown rank rule \"{other}\" (use \"known\" or \"threshold\")"
            )));
        }
    };
    let peaks = match config.protocol.peaks.as_str() {
        "top-m" => PeakChoice::TopSceneSize,
        "floor" => PeakChoice::Floor(config.protocol.floor_factor),
        other => {
            return Err(CliError::Config(format!(
                "unknown peak rule \"{other}\" (use \"top-m\" or \"floor\")"
            )));
        }
    };

    let forward = match config.forward.model.as_str() {
        "born" => ForwardModel::Born,
        "paraxial" => {
            if config.grid.range_points != 1 {
                return Err(CliError::Config(
                    "the paraxial forward model needs a flat grid (range_points = 1)".into(),
                ));
            }
            ForwardModel::Paraxial
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown forward model \"{other}\" (use \"born\" or \"paraxial\")"
            )));
        }
    };

    let epsilons = match overrides.epsilon {
        Some(e) => vec![e],
        None => config.noise.epsilons.clone(),
    };
    if epsilons.is_empty() {
        return Err(CliError::Config("noise.epsilons must not be empty".into()));
    }
    if let Some(&e) = epsilons.iter().find(|&&e| !(0.0..1.0).contains(&e)) {
        return Err(CliError::Config(format!(
            "noise strength must lie in [0, 1), got {e}"
        )));
    }
    let noise_model = match config.noise.model.as_str() {
        "replace" => NoiseModel::Replace,
        "additive-literal" => NoiseModel::AdditiveLiteral,
        other => {
            return Err(CliError::Config(format!(
                "unknown noise model \"{other}\" (use \"replace\" or \"additive-literal\")"
            )));
        }
    };
    if config.noise.trials == 0 {
        return Err(CliError::Config("noise.trials must be at least 1".into()));
    }

    let formats = overrides
        .formats
        .clone()
        .unwrap_or_else(|| config.output.formats.clone());
    let mut write_csv = false;
    let mut write_pgm = false;
    for f in &formats {
        match f.as_str() {
            "csv" => write_csv = true,
            "pgm" => write_pgm = true,
            other => {
                return Err(CliError::Config(format!(
                    "unknown output format \"{other}\" (use \"csv\" or \"pgm\")"
                )));
            }
        }
    }

    Ok(RunPlan {
        geometry,
        l_values,
        cross_points: config.grid.cross_points,
        range_points: config.grid.range_points,
        scatterers: s.scatterers.clone(),
        reflectivities,
        scene_seed: s.seed,
        protocol,
        rank,
        peaks,
        options: RecoveryOptions {
            reference_floor: config.protocol.reference_floor,
            allow_reference_fallback: config.protocol.reference_fallback,
        },
        forward,
        epsilons,
        noise_seed: overrides.seed.unwrap_or(config.noise.seed),
        trials: config.noise.trials,
        noise_model,
        out_dir: overrides
            .out
            .clone()
            .unwrap_or_else(|| config.output.dir.clone()),
        write_csv,
        write_pgm,
        config_hash: hash,
    })
}

fn reflectivity_values(s: &SceneConfig) -> Result<Vec<Complex>> {
    let m = s.scatterers.len();
    match s.reflectivity.as_str() {
        "unit" => Ok(vec![Complex::ONE; m]),
        "random" => {
            // unit magnitude, phase uniform on [0, 2pi), one draw per
            // scatterer in listed order
            use rand_chacha::rand_core::{RngCore, SeedableRng};
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(s.seed);
            Ok((0..m)
                .map(|_| {
                    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                    Complex::from_polar(1.0, u * std::f64::consts::TAU)
                })
                .collect())
        }
        "explicit" => {
            if s.values.len() != m {
                return Err(CliError::Config(format!(
                    "scene.values has {} entries for {m} scatterers",
                    s.values.len()
                )));
            }
            Ok(s.values
                .iter()
                .map(|&[re, im]| Complex::new(re, im))
                .collect())
        }
        other => Err(CliError::Config(format!(
            "unknown reflectivity spec \"{other}\" (use \"unit\", \"random\", or \"explicit\")"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[geometry]
n = 8
aperture = 70.0

[grid]
l = 600.0
cross_points = 16

[scene]
scatterers = [[3, 0], [10, 0]]

[protocol]
name = "general"
"#;

    fn parse(text: &str) -> Result<RunPlan> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        validate(&config, fnv1a(text.as_bytes()), &Overrides::default())
    }

    #[test]
    fn minimal_config_validates() {
        let plan = parse(MINIMAL).unwrap();
        assert_eq!(plan.geometry.n(), 8);
        assert_eq!(plan.l_values, vec![600.0]);
        assert_eq!(plan.protocol.name(), "general");
        assert_eq!(plan.reflectivities.len(), 2);
        assert!(plan.write_csv && !plan.write_pgm);
        let grid = plan.grid(600.0).unwrap();
        let scene = plan.scene(&grid).unwrap();
        assert_eq!(scene.support(), vec![3, 10]);
    }

    #[test]
    fn scatterer_outside_lattice_is_rejected() {
        let bad = MINIMAL.replace("[[3, 0], [10, 0]]", "[[16, 0]]");
        assert!(matches!(parse(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn too_many_scatterers_rejected() {
        let list: Vec<String> = (0..8).map(|i| format!("[{i}, 0]")).collect();
        let bad = MINIMAL.replace("[[3, 0], [10, 0]]", &format!("[{}]", list.join(", ")));
        assert!(matches!(parse(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn paraxial_six_needs_flat_grid() {
        let bad = MINIMAL
            .replace("name = \"general\"", "name = \"paraxial-six\"")
            .replace("cross_points = 16", "cross_points = 16\nrange_points = 3");
        assert!(matches!(parse(&bad), Err(CliError::Config(_))));
        let ok = MINIMAL.replace("name = \"general\"", "name = \"paraxial-six\"");
        assert!(ok.contains("paraxial-six"));
        assert!(parse(&ok).is_ok());
    }

    #[test]
    fn epsilon_range_is_validated() {
        let bad = format!("{MINIMAL}\n[noise]\nepsilons = [0.0, 1.0]\n");
        assert!(matches!(parse(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_protocol_is_rejected() {
        let bad = MINIMAL.replace("general", "gerchberg-saxton");
        assert!(matches!(parse(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = format!("{MINIMAL}\n[grid2]\nx = 1\n");
        assert!(matches!(parse(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn explicit_reflectivities_must_match_count() {
        let bad = MINIMAL.replace(
            "scatterers = [[3, 0], [10, 0]]",
            "scatterers = [[3, 0], [10, 0]]\nreflectivity = \"explicit\"\nvalues = [[1.0, 0.0]]",
        );
        assert!(matches!(parse(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn overrides_take_precedence() {
        let config: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        let overrides = Overrides {
            seed: Some(7),
            epsilon: Some(0.25),
            protocol: Some("symmetric".into()),
            out: Some("elsewhere".into()),
            formats: Some(vec!["pgm".into()]),
        };
        let plan = validate(&config, 0, &overrides).unwrap();
        assert_eq!(plan.noise_seed, 7);
        assert_eq!(plan.epsilons, vec![0.25]);
        assert_eq!(plan.protocol.name(), "symmetric");
        assert_eq!(plan.out_dir, "elsewhere");
        assert!(plan.write_pgm && !plan.write_csv);
    }

    #[test]
    fn random_reflectivities_are_deterministic_unit_magnitude() {
        let a = parse(MINIMAL).unwrap().reflectivities;
        let b = parse(MINIMAL).unwrap().reflectivities;
        assert_eq!(a, b);
        for r in &a {
            assert!((r.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fnv_hash_is_stable() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }
}
