//! Synthetic instances and matrix file I/O.
//!
//! CSV: one row per line, comma-separated decimals, no header.
//! Frames: binary 8-bit PGM (`P5`), one frame per matrix column.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{DenseMatrix, MatrixError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: malformed PGM: {message}")]
    Pgm { path: PathBuf, message: String },
    #[error("frame {path} is {got:?}, expected {expected:?}")]
    FrameMismatch {
        path: PathBuf,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    /// Probability that a factor entry is nonzero.
    pub sparsity: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            m: 100,
            n: 80,
            r: 5,
            sparsity: 0.3,
            noise_std: 0.01,
            seed: 42,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.m == 0 || self.n == 0 {
            return Err(DataError::InvalidSpec("dimensions must be positive".into()));
        }
        if self.r == 0 || self.r > self.m.min(self.n) {
            return Err(DataError::InvalidSpec(format!(
                "rank {} outside 1..={}",
                self.r,
                self.m.min(self.n)
            )));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(DataError::InvalidSpec(format!(
                "sparsity {} not in (0, 1]",
                self.sparsity
            )));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(DataError::InvalidSpec(format!(
                "noise_std {} must be >= 0",
                self.noise_std
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub x_true: DenseMatrix,
    pub y_true: DenseMatrix,
    pub m_clean: DenseMatrix,
    pub m_observed: DenseMatrix,
    pub spec: SyntheticSpec,
}

/// Sparse Gaussian factors, their product, and a noisy observation.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticInstance, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut factor = |rows: usize, cols: usize| {
        DenseMatrix::from_fn(rows, cols, |_, _| {
            let keep = rng.random_bool(spec.sparsity);
            let v: f64 = StandardNormal.sample(&mut rng);
            if keep {
                v
            } else {
                0.0
            }
        })
    };
    let x_true = factor(spec.m, spec.r);
    let y_true = factor(spec.r, spec.n);
    let m_clean = x_true.matmul(&y_true)?;
    let m_observed = if spec.noise_std > 0.0 {
        let noise = Normal::new(0.0, spec.noise_std).expect("validated std");
        m_clean.map(|v| v + noise.sample(&mut rng))
    } else {
        m_clean.clone()
    };
    Ok(SyntheticInstance {
        x_true,
        y_true,
        m_clean,
        m_observed,
        spec: *spec,
    })
}

pub fn load_matrix_csv(path: impl AsRef<Path>) -> Result<DenseMatrix, DataError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(io_err(path))?;
    let parse_err = |line: usize, message: String| DataError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let start = data.len();
        for field in line.split(',') {
            let field = field.trim();
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(lineno, format!("non-numeric field {field:?}")))?;
            data.push(v);
        }
        let width = data.len() - start;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(parse_err(lineno, format!("ragged row: {width} fields, expected {c}")));
            }
            _ => {}
        }
        rows += 1;
    }
    let Some(cols) = cols else {
        return Err(parse_err(1, "empty file".into()));
    };
    Ok(DenseMatrix::new(rows, cols, data)?)
}

/// Writes with 17 significant digits so that loading reproduces every entry.
pub fn save_matrix_csv(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut out = String::with_capacity(m.rows() * m.cols() * 24);
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v:.16e}"));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(out.as_bytes()).map_err(io_err(path))
}

/// An 8-bit grayscale image in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage, DataError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_pgm(&bytes).map_err(|message| DataError::Pgm {
        path: path.to_path_buf(),
        message,
    })
}

fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, String> {
    let mut pos = 0;
    let mut token = || -> Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err("expected magic P5".into());
    }
    let mut number = |name: &str| -> Result<usize, String> {
        let t = token()?;
        t.parse().map_err(|_| format!("bad {name} {t:?}"))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(format!("maxval {maxval} unsupported, expected 255"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(format!(
            "raster has {} bytes, expected {need}",
            bytes.len().saturating_sub(pos)
        ));
    }
    Ok(GrayImage {
        width,
        height,
        pixels: bytes[pos..pos + need].to_vec(),
    })
}

pub fn write_pgm(path: impl AsRef<Path>, image: &GrayImage) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    fs::write(path, out).map_err(io_err(path))
}

/// Stacks frames as columns (pixels x frames), each flattened column-major
/// and scaled to `[0, 1]`.
pub fn frames_to_matrix<P: AsRef<Path>>(frame_paths: &[P]) -> Result<DenseMatrix, DataError> {
    let images = frame_paths
        .iter()
        .map(|p| read_pgm(p).map(|img| (p.as_ref().to_path_buf(), img)))
        .collect::<Result<Vec<_>, _>>()?;
    let Some((_, first)) = images.first() else {
        return Ok(DenseMatrix::zeros(0, 0));
    };
    let dims = (first.height, first.width);
    for (path, img) in &images {
        if (img.height, img.width) != dims {
            return Err(DataError::FrameMismatch {
                path: path.clone(),
                expected: dims,
                got: (img.height, img.width),
            });
        }
    }
    let (h, w) = dims;
    Ok(DenseMatrix::from_fn(h * w, images.len(), |p, f| {
        let (col, row) = (p / h, p % h);
        images[f].1.pixels[row * w + col] as f64 / 255.0
    }))
}

/// Sorted `*.pgm` files in a directory.
pub fn pgm_files_in(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, DataError> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let p = entry.map_err(io_err(dir))?.path();
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::svd;

    fn nonzero_fraction(m: &DenseMatrix) -> f64 {
        m.as_slice().iter().filter(|v| **v != 0.0).count() as f64 / m.as_slice().len() as f64
    }

    #[test]
    fn dense_noiseless_is_exact_product() {
        let spec = SyntheticSpec {
            sparsity: 1.0,
            noise_std: 0.0,
            ..Default::default()
        };
        let inst = generate(&spec).unwrap();
        assert_eq!(inst.m_observed, inst.x_true.matmul(&inst.y_true).unwrap());
        assert_eq!(nonzero_fraction(&inst.x_true), 1.0);
        assert_eq!(nonzero_fraction(&inst.y_true), 1.0);
    }

    #[test]
    fn defaults_have_reference_shape_and_statistics() {
        let inst = generate(&SyntheticSpec::default()).unwrap();
        assert_eq!(inst.m_observed.shape(), (100, 80));
        assert_eq!(inst.x_true.shape(), (100, 5));
        assert_eq!(inst.y_true.shape(), (5, 80));
        assert!((nonzero_fraction(&inst.x_true) - 0.3).abs() <= 0.05);
        assert!((nonzero_fraction(&inst.y_true) - 0.3).abs() <= 0.05);
        let noise = inst.m_observed.lincomb(1.0, &inst.m_clean, -1.0).unwrap();
        let n = noise.as_slice().len() as f64;
        let mean = noise.as_slice().iter().sum::<f64>() / n;
        let var = noise.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var.sqrt() - 0.01).abs() <= 0.2 * 0.01);
    }

    #[test]
    fn noiseless_rank_bounded() {
        let spec = SyntheticSpec {
            noise_std: 0.0,
            sparsity: 0.6,
            ..Default::default()
        };
        let inst = generate(&spec).unwrap();
        let s = svd(&inst.m_observed).unwrap().sigma;
        assert!(s[spec.r..].iter().all(|v| *v < 1e-10));
    }

    #[test]
    fn sparsity_concentrates_on_large_factors() {
        let spec = SyntheticSpec {
            m: 1000,
            n: 50,
            r: 50,
            noise_std: 0.0,
            ..Default::default()
        };
        let inst = generate(&spec).unwrap();
        assert!((nonzero_fraction(&inst.x_true) - 0.3).abs() <= 0.02);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&SyntheticSpec::default()).unwrap();
        let b = generate(&SyntheticSpec::default()).unwrap();
        assert_eq!(a, b);
        let c = generate(&SyntheticSpec {
            seed: 7,
            ..Default::default()
        })
        .unwrap();
        assert_ne!(a.m_observed, c.m_observed);
    }

    #[test]
    fn invalid_specs_rejected() {
        for spec in [
            SyntheticSpec {
                sparsity: 0.0,
                ..Default::default()
            },
            SyntheticSpec {
                sparsity: 1.5,
                ..Default::default()
            },
            SyntheticSpec {
                noise_std: -1.0,
                ..Default::default()
            },
            SyntheticSpec {
                r: 81,
                ..Default::default()
            },
        ] {
            assert!(matches!(generate(&spec), Err(DataError::InvalidSpec(_))));
        }
    }

    #[test]
    fn csv_examples() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "1,2\n3,4").unwrap();
        assert_eq!(
            load_matrix_csv(&p).unwrap(),
            DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap()
        );
        fs::write(&p, "1,2\n3").unwrap();
        match load_matrix_csv(&p) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::write(&p, "1,x\n").unwrap();
        assert!(matches!(load_matrix_csv(&p), Err(DataError::Parse { line: 1, .. })));
        fs::write(&p, "").unwrap();
        assert!(matches!(load_matrix_csv(&p), Err(DataError::Parse { .. })));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = generate(&SyntheticSpec::default()).unwrap().m_observed;
        let m = m.map(|v| v * std::f64::consts::PI * 1e-7);
        save_matrix_csv(&p, &m).unwrap();
        assert_eq!(load_matrix_csv(&p).unwrap(), m);
    }

    #[test]
    fn frames_stack_as_columns() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.pgm");
        let b = dir.path().join("b.pgm");
        write_pgm(
            &a,
            &GrayImage {
                width: 2,
                height: 2,
                pixels: vec![0, 51, 102, 153],
            },
        )
        .unwrap();
        write_pgm(
            &b,
            &GrayImage {
                width: 2,
                height: 2,
                pixels: vec![255; 4],
            },
        )
        .unwrap();
        let m = frames_to_matrix(&[&a, &b]).unwrap();
        assert_eq!(m.shape(), (4, 2));
        // Column-major flatten: (0,0), (1,0), (0,1), (1,1).
        assert_eq!(m.column(0), vec![0.0, 102.0 / 255.0, 51.0 / 255.0, 153.0 / 255.0]);
        assert_eq!(m.column(1), vec![1.0; 4]);
    }

    #[test]
    fn pgm_round_trip_recovers_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage {
            width: 5,
            height: 3,
            pixels: (0..15).map(|i| (i * 17) as u8).collect(),
        };
        let p = dir.path().join("f.pgm");
        write_pgm(&p, &img).unwrap();
        assert_eq!(read_pgm(&p).unwrap(), img);
        let m = frames_to_matrix(&[&p]).unwrap();
        for r in 0..3 {
            for c in 0..5 {
                assert_eq!((m[(c * 3 + r, 0)] * 255.0).round() as u8, img.pixels[r * 5 + c]);
            }
        }
    }

    #[test]
    fn frame_errors() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.pgm");
        let b = dir.path().join("b.pgm");
        write_pgm(
            &a,
            &GrayImage {
                width: 2,
                height: 2,
                pixels: vec![0; 4],
            },
        )
        .unwrap();
        write_pgm(
            &b,
            &GrayImage {
                width: 3,
                height: 2,
                pixels: vec![0; 6],
            },
        )
        .unwrap();
        assert!(matches!(
            frames_to_matrix(&[&a, &b]),
            Err(DataError::FrameMismatch { .. })
        ));
        let bad = dir.path().join("bad.pgm");
        fs::write(&bad, b"P2\n2 2\n255\n0 0 0 0").unwrap();
        assert!(matches!(read_pgm(&bad), Err(DataError::Pgm { .. })));
        fs::write(&bad, b"P5\n2 2\n255\n\x00").unwrap();
        assert!(matches!(read_pgm(&bad), Err(DataError::Pgm { .. })));
    }
}
