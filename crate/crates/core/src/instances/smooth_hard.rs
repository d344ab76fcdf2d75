use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::instances::PopulationOracle;
use crate::losses::SquaredLoss;

/// Default dummy magnitude as a fraction of `X`.
pub const DUMMY_SCALE: f64 = 1e-6;

/// Packing dataset for the squared loss.
///
/// Coordinate `j < d′` receives `⌊pn/d′⌋` points `X e_j`; of those,
/// `⌈count(1+b)/2⌉` carry label `σ_j Y` and the rest `−σ_j Y`. Everything
/// else is the zero point with label 0. With `dummy` set, one extra point
/// `c′ e_{d′}` with label `Y` is appended, which inflates the minimizer norm
/// without touching the other coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothHardSpec {
    pub n: usize,
    /// Ambient dimension; at least `d′` (plus one with a dummy point).
    pub d: usize,
    pub d_prime: usize,
    pub p_mass: f64,
    pub b_bias: f64,
    /// `σ_j ∈ {−1, +1}`; empty means all `+1`.
    #[serde(default)]
    pub signs: Vec<i8>,
    pub y_bound: f64,
    pub x_bound: f64,
    #[serde(default)]
    pub dummy: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dummy_c: Option<f64>,
}

impl SmoothHardSpec {
    /// Evaluates the lower-bound schedule `d′ = (pXBnε/Y)^{2/3}`,
    /// `b = (XB/(Y√(pnε)))^{2/3}`, clamped to `d′ ∈ [1, min(d, pn)]` and
    /// `b ∈ [0, 1]`.
    #[allow(clippy::too_many_arguments)]
    pub fn adversarial_auto(
        n: usize,
        d: usize,
        p_mass: f64,
        radius: f64,
        epsilon: f64,
        y_bound: f64,
        x_bound: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || !(y_bound > 0.0) || !(radius >= 0.0) {
            return Err(invalid(
                "adversarial-auto",
                "needs epsilon > 0, y_bound > 0, radius >= 0",
            ));
        }
        let pn = p_mass * n as f64;
        let raw_d = (pn * x_bound * radius * epsilon / y_bound).powf(2.0 / 3.0);
        let cap = (d as f64).min(pn.floor()).max(1.0);
        let d_prime = raw_d.floor().clamp(1.0, cap) as usize;
        let b_bias = (x_bound * radius / (y_bound * (pn * epsilon).sqrt()))
            .powf(2.0 / 3.0)
            .clamp(0.0, 1.0);
        Ok(Self {
            n,
            d,
            d_prime,
            p_mass,
            b_bias,
            signs: Vec::new(),
            y_bound,
            x_bound,
            dummy: false,
            dummy_c: None,
        })
    }
}

/// Output of [`gen_smooth_hard`].
#[derive(Clone, Debug)]
pub struct SmoothHardInstance {
    pub dataset: Dataset,
    /// Minimum-norm empirical least-squares minimizer.
    pub minimizer: Vec<f64>,
    /// `b` recomputed from the rounded counts.
    pub realized_b: f64,
    pub d_prime: usize,
    pub b_bias: f64,
    pub per_coordinate: usize,
    pub dummy_c: Option<f64>,
}

pub fn gen_smooth_hard(spec: &SmoothHardSpec) -> Result<SmoothHardInstance> {
    let dp = spec.d_prime;
    if dp == 0 {
        return Err(invalid("d_prime", "must be >= 1"));
    }
    if !(0.0..=1.0).contains(&spec.p_mass) {
        return Err(invalid(
            "p_mass",
            format!("must be in [0, 1], got {}", spec.p_mass),
        ));
    }
    if !(0.0..=1.0).contains(&spec.b_bias) {
        return Err(invalid(
            "b_bias",
            format!("must be in [0, 1], got {}", spec.b_bias),
        ));
    }
    if !(spec.y_bound >= 0.0 && spec.y_bound.is_finite())
        || !(spec.x_bound > 0.0 && spec.x_bound.is_finite())
    {
        return Err(invalid(
            "bounds",
            "need y_bound >= 0 and x_bound > 0, both finite",
        ));
    }
    let need_d = dp + spec.dummy as usize;
    if spec.d < need_d {
        return Err(invalid("d", format!("must be >= {need_d}, got {}", spec.d)));
    }
    let signs: Vec<f64> = if spec.signs.is_empty() {
        vec![1.0; dp]
    } else if spec.signs.len() != dp || spec.signs.iter().any(|&s| s != 1 && s != -1) {
        return Err(invalid("signs", format!("need {dp} entries in {{-1, +1}}")));
    } else {
        spec.signs.iter().map(|&s| s as f64).collect()
    };
    let n_main = spec
        .n
        .checked_sub(spec.dummy as usize)
        .ok_or_else(|| invalid("n", "must be >= 1 with a dummy point"))?;
    let per = (spec.p_mass * n_main as f64 / dp as f64).floor() as usize;
    if per < 1 {
        return Err(invalid(
            "counts",
            format!("p·n/d′ = {} < 1", spec.p_mass * n_main as f64 / dp as f64),
        ));
    }
    let pos = ((per as f64) * (1.0 + spec.b_bias) / 2.0).ceil() as usize;
    let pos = pos.min(per);
    let realized_b = (2.0 * pos as f64 - per as f64) / per as f64;

    let (d, x, y) = (spec.d, spec.x_bound, spec.y_bound);
    let mut features = vec![0.0; spec.n * d];
    let mut labels = vec![0.0; spec.n];
    let mut minimizer = vec![0.0; d];
    let mut row = 0;
    for (j, &s) in signs.iter().enumerate() {
        for k in 0..per {
            features[row * d + j] = x;
            labels[row] = if k < pos { s * y } else { -s * y };
            row += 1;
        }
        minimizer[j] = s * y * realized_b / x;
    }
    let dummy_c = if spec.dummy {
        let c = spec.dummy_c.unwrap_or(DUMMY_SCALE * x);
        if !(c > 0.0 && c <= x) {
            return Err(invalid("dummy_c", format!("must be in (0, X], got {c}")));
        }
        let last = spec.n - 1;
        features[last * d + dp] = c;
        labels[last] = y;
        minimizer[dp] = y / c;
        Some(c)
    } else {
        None
    };
    let dataset = Dataset::new(d, features, labels, x, y)?;
    Ok(SmoothHardInstance {
        dataset,
        minimizer,
        realized_b,
        d_prime: dp,
        b_bias: spec.b_bias,
        per_coordinate: per,
        dummy_c,
    })
}

/// Minimum-norm least-squares solution for a design whose rows each have at
/// most one nonzero coordinate. Errors if a row has two.
pub fn least_squares_diagonal(ds: &Dataset) -> Result<Vec<f64>> {
    let d = ds.d();
    let mut xx = vec![0.0; d];
    let mut xy = vec![0.0; d];
    for i in 0..ds.n() {
        let mut nz = ds.x(i).iter().enumerate().filter(|(_, v)| **v != 0.0);
        if let Some((j, &v)) = nz.next() {
            if nz.next().is_some() {
                return Err(invalid("design", format!("row {i} is not axis-aligned")));
            }
            xx[j] += v * v;
            xy[j] += v * ds.y(i);
        }
    }
    Ok(xx
        .iter()
        .zip(&xy)
        .map(|(a, b)| if *a > 0.0 { b / a } else { 0.0 })
        .collect())
}

/// Risk on the sample itself under the squared loss, compared against the
/// empirical minimizer. Used where the instance is a fixed dataset rather
/// than a distribution.
#[derive(Clone, Debug)]
pub struct EmpiricalOracle {
    dataset: Dataset,
    comparator: Vec<f64>,
    loss: SquaredLoss,
}

impl EmpiricalOracle {
    pub fn new(dataset: Dataset, comparator: Vec<f64>) -> Self {
        let loss = SquaredLoss::new(dataset.y_bound()).expect("dataset label bound is finite");
        Self {
            dataset,
            comparator,
            loss,
        }
    }
}

impl PopulationOracle for EmpiricalOracle {
    fn risk(&self, w: &[f64]) -> f64 {
        self.dataset.empirical_risk(&self.loss, w)
    }

    fn comparator(&self) -> &[f64] {
        &self.comparator
    }
}
