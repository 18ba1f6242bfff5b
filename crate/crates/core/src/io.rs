//! On-disk instance format.
//!
//! An instance directory holds
//!
//! | file        | contents                                                 |
//! |-------------|----------------------------------------------------------|
//! | `Q.mtx`     | MatrixMarket `array real general`, column-major values   |
//! | `A.mtx`     | same, `m × n`                                            |
//! | `r.txt`     | `n` values, one per line                                 |
//! | `b.txt`     | `m` values, one per line                                 |
//! | `box.txt`   | `n` lower bounds then `n` upper bounds, one per line     |
//! | `meta.json` | [`InstanceMeta`]                                         |
//!
//! Floats are written with 17 significant digits so a reload is bit-exact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::problem::{BoxSet, LcqpInstance};
use crate::rng::GENERATOR_VERSION;
use crate::trace::fmt_f64;

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub schema_version: u32,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub generator_version: String,
    /// `max |eig(Q)|`, unfloored.
    pub lipschitz: f64,
    pub sigma_max: f64,
}

impl InstanceMeta {
    pub fn for_instance(inst: &LcqpInstance) -> Self {
        Self {
            schema_version: INSTANCE_SCHEMA_VERSION,
            n: inst.n(),
            m: inst.m(),
            seed: inst.seed(),
            generator_version: GENERATOR_VERSION.to_string(),
            lipschitz: inst.lipschitz(),
            sigma_max: crate::problem::largest_singular_value(inst.a()),
        }
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn matrix_market_string(m: &DenseMatrix) -> String {
    let mut s = String::with_capacity(m.rows() * m.cols() * 25 + 64);
    s.push_str("%%MatrixMarket matrix array real general\n");
    s.push_str(&format!("{} {}\n", m.rows(), m.cols()));
    for j in 0..m.cols() {
        for i in 0..m.rows() {
            s.push_str(&fmt_f64(m.get(i, j)));
            s.push('\n');
        }
    }
    s
}

pub fn parse_matrix_market(text: &str, path: &Path) -> Result<DenseMatrix> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| format_err(path, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(format_err(path, format!("bad header `{header}`")));
    }
    if fields[2] != "array" || fields[3] != "real" || fields[4] != "general" {
        return Err(format_err(
            path,
            format!("unsupported format `{} {} {}` (need array real general)", fields[2], fields[3], fields[4]),
        ));
    }
    let mut body = lines.map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('%'));
    let dims = body.next().ok_or_else(|| format_err(path, "missing size line"))?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| format_err(path, format!("bad size token `{t}`"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(format_err(path, "size line must hold two integers"));
    };
    let values: Vec<f64> = body
        .map(|t| t.parse().map_err(|_| format_err(path, format!("bad value `{t}`"))))
        .collect::<Result<_>>()?;
    if values.len() != rows * cols {
        return Err(format_err(
            path,
            format!("expected {} values, found {}", rows * cols, values.len()),
        ));
    }
    let mut data = vec![0.0; rows * cols];
    for j in 0..cols {
        for i in 0..rows {
            data[i * cols + j] = values[j * rows + i];
        }
    }
    DenseMatrix::new(rows, cols, data).map_err(|e| format_err(path, e.to_string()))
}

fn vector_string(v: &[f64]) -> String {
    let mut s = String::with_capacity(v.len() * 25);
    for x in v {
        s.push_str(&fmt_f64(*x));
        s.push('\n');
    }
    s
}

fn parse_vector(text: &str, path: &Path) -> Result<Vec<f64>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|t| t.parse().map_err(|_| format_err(path, format!("bad value `{t}`"))))
        .collect()
}

fn write(path: PathBuf, contents: &str) -> Result<()> {
    fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `inst` into `dir`. Fails if `dir` exists and `force` is false.
pub fn write_instance(inst: &LcqpInstance, dir: &Path, force: bool) -> Result<InstanceMeta> {
    if dir.exists() && !force {
        return Err(Error::invalid(format!(
            "{} already exists (use --force to overwrite)",
            dir.display()
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = InstanceMeta::for_instance(inst);
    write(dir.join("Q.mtx"), &matrix_market_string(inst.q()))?;
    write(dir.join("A.mtx"), &matrix_market_string(inst.a()))?;
    write(dir.join("r.txt"), &vector_string(inst.r()))?;
    write(dir.join("b.txt"), &vector_string(inst.b()))?;
    let mut bounds = inst.bounds().lower().to_vec();
    bounds.extend_from_slice(inst.bounds().upper());
    write(dir.join("box.txt"), &vector_string(&bounds))?;
    write(dir.join("meta.json"), &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    Ok(meta)
}

pub fn read_instance(dir: &Path) -> Result<(LcqpInstance, InstanceMeta)> {
    let meta_path = dir.join("meta.json");
    let meta: InstanceMeta = serde_json::from_str(&read(&meta_path)?)
        .map_err(|e| format_err(&meta_path, e.to_string()))?;
    let q_path = dir.join("Q.mtx");
    let q = parse_matrix_market(&read(&q_path)?, &q_path)?;
    let a_path = dir.join("A.mtx");
    let a = parse_matrix_market(&read(&a_path)?, &a_path)?;
    let r_path = dir.join("r.txt");
    let r = parse_vector(&read(&r_path)?, &r_path)?;
    let b_path = dir.join("b.txt");
    let b = parse_vector(&read(&b_path)?, &b_path)?;
    let box_path = dir.join("box.txt");
    let mut bounds = parse_vector(&read(&box_path)?, &box_path)?;
    if bounds.len() != 2 * q.rows() {
        return Err(format_err(
            &box_path,
            format!("expected {} values, found {}", 2 * q.rows(), bounds.len()),
        ));
    }
    let upper = bounds.split_off(q.rows());
    let bounds = BoxSet::new(bounds, upper).map_err(|e| format_err(&box_path, e.to_string()))?;
    if meta.n != q.rows() || meta.m != a.rows() {
        return Err(format_err(
            &meta_path,
            format!("meta says n={} m={}, files hold n={} m={}", meta.n, meta.m, q.rows(), a.rows()),
        ));
    }
    let inst = LcqpInstance::new(q, r, a, b, bounds, meta.seed)
        .map_err(|e| format_err(dir, e.to_string()))?;
    Ok((inst, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{generate_lcqp, GeneratorConfig};

    #[test]
    fn matrix_market_is_column_major() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let s = matrix_market_string(&m);
        let vals: Vec<f64> = s.lines().skip(2).map(|l| l.parse().unwrap()).collect();
        assert_eq!(vals, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(parse_matrix_market(&s, Path::new("m")).unwrap(), m);
    }

    #[test]
    fn matrix_market_rejects_garbage() {
        let p = Path::new("m");
        assert!(parse_matrix_market("", p).is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1.0\n", p).is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n", p).is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix array real general\n% c\n1 1\nx\n", p).is_err());
        let ok = parse_matrix_market("%%MatrixMarket matrix array real general\n% comment\n\n1 2\n7\n8\n", p).unwrap();
        assert_eq!(ok.as_slice(), &[7.0, 8.0]);
    }

    #[test]
    fn instance_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst");
        let inst = generate_lcqp(&GeneratorConfig::new(6, 2, 3)).unwrap();
        let meta = write_instance(&inst, &path, false).unwrap();
        assert!(write_instance(&inst, &path, false).is_err());
        write_instance(&inst, &path, true).unwrap();
        let (back, meta_back) = read_instance(&path).unwrap();
        assert_eq!(back, inst);
        assert_eq!(meta_back, meta);
        assert_eq!(meta.generator_version, GENERATOR_VERSION);
    }
}
