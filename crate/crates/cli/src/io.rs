//! Text serialization of matrices, illumination plans, intensity datasets,
//! pseudo-spectra, and localization reports.
//!
//! All floating-point values are written with Rust's shortest round-trip
//! formatting, so export followed by import reproduces every `f64` bit for
//! bit.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DVector;

use imager_core::forward::IntensityRecord;
use imager_core::imaging::{LocalizationReport, Pseudospectrum};
use imager_core::recovery::IntensityOracle;
use imager_core::{CMatrix, CVector};

use crate::error::{CliError, Result};

/// Writes a complex matrix as a text table with columns `row,col,re,im`.
pub fn export_matrix(matrix: &CMatrix, path: &Path) -> Result<()> {
    let mut out = String::from("row,col,re,im\n");
    for r in 0..matrix.nrows() {
        for c in 0..matrix.ncols() {
            let v = matrix[(r, c)];
            writeln!(out, "{r},{c},{},{}", v.re, v.im).expect("string write");
        }
    }
    std::fs::write(path, out).map_err(CliError::io(path))
}

/// Reads a matrix written by [`export_matrix`]. Dimensions are inferred from
/// the largest indices; every entry must be present exactly once.
pub fn import_matrix(path: &Path) -> Result<CMatrix> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut entries: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut rows = 0usize;
    let mut cols = 0usize;
    for (number, line) in parse_lines(path, &text, "row,col,re,im")? {
        let fields = split_fields(path, number, &line, 4)?;
        let r: usize = parse_field(path, number, fields[0])?;
        let c: usize = parse_field(path, number, fields[1])?;
        let re: f64 = parse_field(path, number, fields[2])?;
        let im: f64 = parse_field(path, number, fields[3])?;
        rows = rows.max(r + 1);
        cols = cols.max(c + 1);
        entries.push((r, c, re, im));
    }
    if entries.is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no matrix entries".into(),
        });
    }
    if entries.len() != rows * cols {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: entries.len() + 1,
            message: format!(
                "expected {} entries for a {rows} x {cols} matrix, found {}",
                rows * cols,
                entries.len()
            ),
        });
    }
    let mut m = CMatrix::zeros(rows, cols);
    for (r, c, re, im) in entries {
        m[(r, c)] = imager_core::Complex::new(re, im);
    }
    Ok(m)
}

/// Writes an illumination plan with columns `illumination,component,re,im`.
pub fn export_plan(plan: &[CVector], path: &Path) -> Result<()> {
    let mut out = String::from("illumination,component,re,im\n");
    for (id, f) in plan.iter().enumerate() {
        for (s, v) in f.iter().enumerate() {
            writeln!(out, "{id},{s},{},{}", v.re, v.im).expect("string write");
        }
    }
    std::fs::write(path, out).map_err(CliError::io(path))
}

pub fn import_plan(path: &Path) -> Result<Vec<CVector>> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut entries: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut count = 0usize;
    let mut dim = 0usize;
    for (number, line) in parse_lines(path, &text, "illumination,component,re,im")? {
        let fields = split_fields(path, number, &line, 4)?;
        let id: usize = parse_field(path, number, fields[0])?;
        let s: usize = parse_field(path, number, fields[1])?;
        let re: f64 = parse_field(path, number, fields[2])?;
        let im: f64 = parse_field(path, number, fields[3])?;
        count = count.max(id + 1);
        dim = dim.max(s + 1);
        entries.push((id, s, re, im));
    }
    if entries.len() != count * dim || count == 0 {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: entries.len() + 1,
            message: format!(
                "expected {} components for {count} illuminations of dimension {dim}, found {}",
                count * dim,
                entries.len()
            ),
        });
    }
    let mut plan = vec![CVector::zeros(dim); count];
    for (id, s, re, im) in entries {
        plan[id][s] = imager_core::Complex::new(re, im);
    }
    Ok(plan)
}

/// Writes intensity datasets with columns `illumination,receiver,beta`.
pub fn export_intensities(records: &[IntensityRecord], path: &Path) -> Result<()> {
    let mut out = String::from("illumination,receiver,beta\n");
    for (id, record) in records.iter().enumerate() {
        for (i, beta) in record.intensities.iter().enumerate() {
            writeln!(out, "{id},{i},{beta}").expect("string write");
        }
    }
    std::fs::write(path, out).map_err(CliError::io(path))
}

fn import_intensity_table(path: &Path) -> Result<Vec<DVector<f64>>> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut count = 0usize;
    let mut dim = 0usize;
    for (number, line) in parse_lines(path, &text, "illumination,receiver,beta")? {
        let fields = split_fields(path, number, &line, 3)?;
        let id: usize = parse_field(path, number, fields[0])?;
        let i: usize = parse_field(path, number, fields[1])?;
        let beta: f64 = parse_field(path, number, fields[2])?;
        count = count.max(id + 1);
        dim = dim.max(i + 1);
        entries.push((id, i, beta));
    }
    if entries.len() != count * dim || count == 0 {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: entries.len() + 1,
            message: format!(
                "expected {} intensities for {count} illuminations x {dim} receivers, found {}",
                count * dim,
                entries.len()
            ),
        });
    }
    let mut data = vec![DVector::zeros(dim); count];
    for (id, i, beta) in entries {
        data[id][i] = beta;
    }
    Ok(data)
}

/// Oracle replaying a recorded intensity dataset, keyed by the illumination
/// vectors declared in the accompanying plan file.
///
/// Lookups are by value: an exact bit match is preferred, with a small
/// relative tolerance as fallback for illuminations recomputed through the
/// same arithmetic.
pub struct FileOracle {
    plan: Vec<CVector>,
    data: Vec<DVector<f64>>,
    counter: AtomicU64,
}

impl FileOracle {
    pub fn load(data_path: &Path, plan_path: &Path) -> Result<Self> {
        let plan = import_plan(plan_path)?;
        let data = import_intensity_table(data_path)?;
        if plan.len() != data.len() {
            return Err(CliError::Parse {
                path: data_path.to_path_buf(),
                line: 1,
                message: format!(
                    "{} recorded illuminations do not match the plan's {}",
                    data.len(),
                    plan.len()
                ),
            });
        }
        let n = plan.first().map(|f| f.len()).unwrap_or(0);
        if let Some(bad) = data.iter().position(|b| b.len() != n) {
            return Err(CliError::Parse {
                path: data_path.to_path_buf(),
                line: 1,
                message: format!("illumination {bad} has a receiver count differing from N = {n}"),
            });
        }
        Ok(Self {
            plan,
            data,
            counter: AtomicU64::new(0),
        })
    }

    fn lookup(&self, f: &CVector) -> Option<usize> {
        if let Some(exact) = self.plan.iter().position(|p| p == f) {
            return Some(exact);
        }
        self.plan.iter().position(|p| {
            p.len() == f.len()
                && p.iter()
                    .zip(f.iter())
                    .all(|(a, b)| (a - b).norm() <= 1e-12 * (1.0 + b.norm()))
        })
    }
}

impl IntensityOracle for FileOracle {
    fn dimension(&self) -> usize {
        self.plan.first().map(|f| f.len()).unwrap_or(0)
    }

    fn measure(&self, f: &CVector) -> imager_core::Result<IntensityRecord> {
        self.counter.fetch_add(1, Ordering::Relaxed);
        let id = self.lookup(f).ok_or_else(|| {
            imager_core::Error::UnknownIllumination(format!(
                "no recorded data for an illumination of dimension {}",
                f.len()
            ))
        })?;
        Ok(IntensityRecord {
            illumination: f.clone(),
            intensities: self.data[id].clone(),
            noise: 0.0,
        })
    }

    fn queries(&self) -> u64 {
        self.counter.load(Ordering::Relaxed)
    }
}

/// Writes a pseudo-spectrum as a CSV grid with columns `x,z,value`.
pub fn export_pseudospectrum(ps: &Pseudospectrum, path: &Path) -> Result<()> {
    let mut out = String::from("x,z,value\n");
    for iz in 0..ps.n_range {
        for ix in 0..ps.n_cross {
            let v = ps.values[iz * ps.n_cross + ix];
            writeln!(out, "{ix},{iz},{v}").expect("string write");
        }
    }
    std::fs::write(path, out).map_err(CliError::io(path))
}

/// Writes a pseudo-spectrum as an 8-bit grayscale binary PGM, normalized to
/// the field maximum, for quick viewing.
pub fn export_pgm(ps: &Pseudospectrum, path: &Path) -> Result<()> {
    let max = ps.values.iter().cloned().fold(0.0_f64, f64::max);
    let mut bytes = format!("P5\n{} {}\n255\n", ps.n_cross, ps.n_range).into_bytes();
    for iz in 0..ps.n_range {
        for ix in 0..ps.n_cross {
            let v = ps.values[iz * ps.n_cross + ix];
            let level = if max > 0.0 {
                (v / max * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            };
            bytes.push(level);
        }
    }
    std::fs::write(path, bytes).map_err(CliError::io(path))
}

/// Writes a localization report as key=value lines.
pub fn export_report(report: &LocalizationReport, path: &Path) -> Result<()> {
    let list = |v: &[usize]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let floats = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let pairs = report
        .matched
        .iter()
        .map(|(d, t)| format!("{d}:{t}"))
        .collect::<Vec<_>>()
        .join(",");
    let mut out = String::new();
    writeln!(out, "detected={}", list(&report.detected)).expect("string write");
    writeln!(out, "matched={pairs}").expect("string write");
    writeln!(out, "misses={}", list(&report.misses)).expect("string write");
    writeln!(out, "ghosts={}", list(&report.ghosts)).expect("string write");
    writeln!(
        out,
        "cross_range_errors={}",
        floats(&report.cross_range_errors)
    )
    .expect("string write");
    writeln!(out, "range_errors={}", floats(&report.range_errors)).expect("string write");
    writeln!(out, "exact={}", report.is_exact()).expect("string write");
    std::fs::write(path, out).map_err(CliError::io(path))
}

type NumberedLine = (usize, String);

/// Strips the header and yields `(line number, content)` for data lines.
fn parse_lines(path: &Path, text: &str, header: &str) -> Result<Vec<NumberedLine>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim() == header => {}
        Some((_, first)) => {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected header \"{header}\", found \"{first}\""),
            });
        }
        None => {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "empty file".into(),
            });
        }
    }
    Ok(lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn split_fields<'a>(
    path: &Path,
    line: usize,
    content: &'a str,
    expected: usize,
) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = content.split(',').map(str::trim).collect();
    if fields.len() != expected {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!(
                "expected {expected} comma-separated fields, found {}",
                fields.len()
            ),
        });
    }
    Ok(fields)
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    field.parse().map_err(|e: T::Err| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse \"{field}\": {e}"),
    })
}

/// Creates an output directory and its parents.
pub fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir.to_path_buf()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use imager_core::Complex;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_matrix(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut unit = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        CMatrix::from_fn(n, n, |_, _| Complex::new(unit() * 1e-7, unit() * 1e3))
    }

    #[test]
    fn matrix_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = random_matrix(7, 3);
        export_matrix(&m, &path).unwrap();
        let back = import_matrix(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn empty_matrix_file_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "").unwrap();
        match import_matrix(&path) {
            Err(CliError::Parse { line: 1, .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_its_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "row,col,re,im\n0,0,1.0,0.0\n0,1,oops,0.0\n").unwrap();
        match import_matrix(&path) {
            Err(CliError::Parse { line: 3, .. }) => {}
            other => panic!("expected parse error at line 3, got {other:?}"),
        }
    }

    #[test]
    fn missing_entries_are_a_consistency_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gap.csv");
        std::fs::write(&path, "row,col,re,im\n0,0,1.0,0.0\n1,1,1.0,0.0\n").unwrap();
        assert!(matches!(import_matrix(&path), Err(CliError::Parse { .. })));
    }

    #[test]
    fn plan_and_intensities_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let plan_path = dir.path().join("plan.csv");
        let data_path = dir.path().join("data.csv");
        let f0 = CVector::from_fn(3, |i, _| Complex::new(i as f64, -1.5));
        let f1 = CVector::from_fn(3, |i, _| Complex::new(0.25, i as f64));
        export_plan(&[f0.clone(), f1.clone()], &plan_path).unwrap();
        let records = vec![
            IntensityRecord {
                illumination: f0.clone(),
                intensities: DVector::from_row_slice(&[1.0, 2.0, 3.0]),
                noise: 0.0,
            },
            IntensityRecord {
                illumination: f1.clone(),
                intensities: DVector::from_row_slice(&[0.5, 0.25, 0.125]),
                noise: 0.0,
            },
        ];
        export_intensities(&records, &data_path).unwrap();

        let oracle = FileOracle::load(&data_path, &plan_path).unwrap();
        assert_eq!(oracle.dimension(), 3);
        let rec = oracle.measure(&f1).unwrap();
        assert_eq!(rec.intensities, records[1].intensities);
        let rec = oracle.measure(&f0).unwrap();
        assert_eq!(rec.intensities, records[0].intensities);
        assert_eq!(oracle.queries(), 2);

        // unknown illumination
        let other = CVector::from_fn(3, |_, _| Complex::new(9.0, 9.0));
        assert!(oracle.measure(&other).is_err());
    }

    #[test]
    fn plan_data_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let plan_path = dir.path().join("plan.csv");
        let data_path = dir.path().join("data.csv");
        let f0 = CVector::from_fn(2, |_, _| Complex::ONE);
        export_plan(std::slice::from_ref(&f0), &plan_path).unwrap();
        let records = vec![
            IntensityRecord {
                illumination: f0.clone(),
                intensities: DVector::from_row_slice(&[1.0, 2.0]),
                noise: 0.0,
            },
            IntensityRecord {
                illumination: f0,
                intensities: DVector::from_row_slice(&[1.0, 2.0]),
                noise: 0.0,
            },
        ];
        export_intensities(&records, &data_path).unwrap();
        assert!(matches!(
            FileOracle::load(&data_path, &plan_path),
            Err(CliError::Parse { .. })
        ));
    }

    proptest::proptest! {
        // serialization must round-trip every finite f64 bit for bit,
        // including negative zeros and extreme magnitudes
        #[test]
        fn matrix_round_trip_over_arbitrary_floats(
            values in proptest::collection::vec(
                (proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL
                 | proptest::num::f64::ZERO | proptest::num::f64::NEGATIVE,
                 proptest::num::f64::NORMAL | proptest::num::f64::ZERO),
                1..=16,
            ),
        ) {
            let n = values.len();
            let m = CMatrix::from_fn(n, 1, |r, _| Complex::new(values[r].0, values[r].1));
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.csv");
            export_matrix(&m, &path).unwrap();
            let back = import_matrix(&path).unwrap();
            for r in 0..n {
                proptest::prop_assert_eq!(m[(r, 0)].re.to_bits(), back[(r, 0)].re.to_bits());
                proptest::prop_assert_eq!(m[(r, 0)].im.to_bits(), back[(r, 0)].im.to_bits());
            }
        }
    }

    #[test]
    fn pgm_has_correct_header_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ps.pgm");
        let ps = Pseudospectrum {
            values: vec![0.0, 0.5, 1.0, 0.25, 0.75, 0.1],
            normalization: 1.0,
            n_cross: 3,
            n_range: 2,
        };
        export_pgm(&ps, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(bytes.len(), b"P5\n3 2\n255\n".len() + 6);
        assert_eq!(bytes[b"P5\n3 2\n255\n".len() + 2], 255);
    }
}
