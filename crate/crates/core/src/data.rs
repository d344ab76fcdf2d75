//! Labeled datasets with certified feature and label bounds, and their
//! on-disk format: a CSV of `y,x1,...,xd` rows plus a JSON sidecar.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::losses::GlmLoss;
use crate::math::vector::check_dims;
use crate::math::{axpy, dot, norm, JlMatrix, Vector};

/// `n` points in `R^d`, stored row-major, with `‖x_i‖ ≤ x_bound` and
/// `|y_i| ≤ y_bound` verified on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    d: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
    x_bound: f64,
    y_bound: f64,
}

impl Dataset {
    pub fn new(
        d: usize,
        features: Vec<f64>,
        labels: Vec<f64>,
        x_bound: f64,
        y_bound: f64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(invalid("d", "must be positive"));
        }
        check_dims(labels.len() * d, features.len())?;
        if !(x_bound >= 0.0 && x_bound.is_finite()) {
            return Err(invalid(
                "x_bound",
                format!("must be finite and >= 0, got {x_bound}"),
            ));
        }
        if !(y_bound >= 0.0 && y_bound.is_finite()) {
            return Err(invalid(
                "y_bound",
                format!("must be finite and >= 0, got {y_bound}"),
            ));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        if labels.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("labels"));
        }
        // Slack of a few ulps so that generators which normalise onto the
        // sphere of radius x_bound are not rejected for rounding.
        let slack = 1.0 + 1e-12;
        for (index, row) in features.chunks_exact(d).enumerate() {
            let nrm = norm(row);
            if nrm > x_bound * slack {
                return Err(Error::FeatureBound {
                    index,
                    norm: nrm,
                    bound: x_bound,
                });
            }
        }
        if let Some(y) = labels.iter().find(|y| y.abs() > y_bound * slack) {
            return Err(invalid(
                "labels",
                format!("label {y} exceeds the declared bound {y_bound}"),
            ));
        }
        Ok(Self {
            d,
            features,
            labels,
            x_bound,
            y_bound,
        })
    }

    /// Builds from rows, taking the bounds as the realised maxima.
    pub fn from_rows(rows: &[Vector], labels: Vec<f64>) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("rows"))?;
        let d = first.dim();
        let mut features = Vec::with_capacity(rows.len() * d);
        for r in rows {
            check_dims(d, r.dim())?;
            features.extend_from_slice(r.as_slice());
        }
        let x_bound = rows.iter().map(|r| r.norm()).fold(0.0, f64::max);
        let y_bound = labels.iter().map(|y| y.abs()).fold(0.0, f64::max);
        Self::new(d, features, labels, x_bound, y_bound)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn x_bound(&self) -> f64 {
        self.x_bound
    }

    pub fn y_bound(&self) -> f64 {
        self.y_bound
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Largest realised feature norm.
    pub fn max_feature_norm(&self) -> f64 {
        self.features
            .chunks_exact(self.d)
            .map(norm)
            .fold(0.0, f64::max)
    }

    /// Checks that every label is admissible for `loss`.
    pub fn check_loss(&self, loss: &dyn GlmLoss) -> Result<()> {
        if self.y_bound > loss.label_bound() * (1.0 + 1e-12) {
            return Err(invalid(
                "loss",
                format!(
                    "{} admits labels up to {} but the dataset declares {}",
                    loss.name(),
                    loss.label_bound(),
                    self.y_bound
                ),
            ));
        }
        Ok(())
    }

    /// `L̂(w; S) = (1/n) Σ φ_{y_i}(⟨w, x_i⟩)`, summed in index order.
    pub fn empirical_risk(&self, loss: &dyn GlmLoss, w: &[f64]) -> f64 {
        debug_assert_eq!(w.len(), self.d);
        if self.n() == 0 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..self.n() {
            s += loss.value(dot(w, self.x(i)), self.labels[i]);
        }
        s / self.n() as f64
    }

    /// `∇L̂(w; S)` written to `out`, summed in index order.
    pub fn gradient_into(&self, loss: &dyn GlmLoss, w: &[f64], out: &mut [f64]) {
        debug_assert_eq!(w.len(), self.d);
        out.iter_mut().for_each(|v| *v = 0.0);
        let n = self.n();
        if n == 0 {
            return;
        }
        for i in 0..n {
            let x = self.x(i);
            let s = loss.derivative(dot(w, x), self.labels[i]);
            if s != 0.0 {
                axpy(s, x, out);
            }
        }
        let inv = 1.0 / n as f64;
        out.iter_mut().for_each(|v| *v *= inv);
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.x(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            d: self.d,
            features,
            labels,
            x_bound: self.x_bound,
            y_bound: self.y_bound,
        }
    }

    /// Contiguous rows `range`.
    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            d: self.d,
            features: self.features[start * self.d..end * self.d].to_vec(),
            labels: self.labels[start..end].to_vec(),
            x_bound: self.x_bound,
            y_bound: self.y_bound,
        }
    }

    /// Neighbouring dataset with point `i` replaced.
    pub fn replace(&self, i: usize, x: &[f64], y: f64) -> Result<Dataset> {
        if i >= self.n() {
            return Err(invalid(
                "i",
                format!("index {i} out of range for n={}", self.n()),
            ));
        }
        check_dims(self.d, x.len())?;
        let mut out = self.clone();
        out.features[i * self.d..(i + 1) * self.d].copy_from_slice(x);
        out.labels[i] = y;
        Dataset::new(out.d, out.features, out.labels, out.x_bound, out.y_bound)
    }

    /// `{(Φx_i, y_i)}`. The feature bound of the result is the realised
    /// maximum norm; a JL map preserves norms only approximately.
    pub fn embed(&self, phi: &JlMatrix) -> Result<Dataset> {
        check_dims(phi.cols(), self.d)?;
        let k = phi.rows();
        let mut features = vec![0.0; self.n() * k];
        for (i, out) in features.chunks_exact_mut(k).enumerate() {
            phi.apply_into(self.x(i), out);
        }
        let x_bound = features.chunks_exact(k).map(norm).fold(0.0, f64::max);
        Dataset::new(k, features, self.labels.clone(), x_bound, self.y_bound)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        for i in 0..self.n() {
            write!(w, "{}", fmt_f64(self.labels[i]))?;
            for v in self.x(i) {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`Dataset::write_csv`] together with its sidecar.
    pub fn read(path: &Path) -> Result<(Dataset, DatasetMeta)> {
        let meta = DatasetMeta::read(&meta_path(path))?;
        let reader = BufReader::new(fs::File::open(path)?);
        let mut features = Vec::with_capacity(meta.n * meta.d);
        let mut labels = Vec::with_capacity(meta.n);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                let s =
                    s.ok_or_else(|| Error::Parse(format!("line {}: too few fields", lineno + 1)))?;
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            labels.push(parse(fields.next())?);
            for _ in 0..meta.d {
                features.push(parse(fields.next())?);
            }
            if fields.next().is_some() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields",
                    lineno + 1,
                    meta.d + 1
                )));
            }
        }
        if labels.len() != meta.n {
            return Err(Error::Parse(format!(
                "metadata says n={} but file has {} rows",
                meta.n,
                labels.len()
            )));
        }
        let ds = Dataset::new(meta.d, features, labels, meta.x_bound, meta.y_bound)?;
        Ok((ds, meta))
    }
}

/// Shortest representation that round-trips exactly.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// `<path>.meta.json`
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Sidecar document for a dataset file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub d: usize,
    pub x_bound: f64,
    pub y_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl DatasetMeta {
    pub fn for_dataset(ds: &Dataset, generator: &str, seed: Option<u64>) -> Self {
        Self {
            n: ds.n(),
            d: ds.d(),
            x_bound: ds.x_bound(),
            y_bound: ds.y_bound(),
            rank: None,
            generator: generator.to_string(),
            seed,
            params: serde_json::Map::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Writes the CSV and its sidecar.
pub fn write_dataset(path: &Path, ds: &Dataset, meta: &DatasetMeta) -> Result<()> {
    ds.write_csv(path)?;
    meta.write(&meta_path(path))
}
