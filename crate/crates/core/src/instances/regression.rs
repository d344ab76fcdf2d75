use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::instances::PopulationOracle;
use crate::math::{dot, random_unit, RngHandle};

/// Label noise is Gaussian truncated at this many standard deviations, so
/// that labels have a finite bound.
pub const NOISE_TRUNCATION: f64 = 4.0;

/// Well-specified linear model `y = ⟨w*, x⟩ + e`.
///
/// Features are uniform on the sphere of radius `x_bound` inside an
/// `r`-dimensional subspace (`r = rank`, default `d`); `w*` lies in the same
/// subspace. With `r < d` the ambient dimension can grow while the
/// statistical problem stays fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub d: usize,
    pub n: usize,
    pub w_star_norm: f64,
    pub noise_std: f64,
    pub x_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
}

/// `Var(e)` for `e ~ N(0, σ²)` conditioned on `|e| ≤ cσ`:
/// `σ²(1 − 2cφ(c)/(2Φ(c) − 1))`.
pub fn truncated_normal_variance(sigma: f64, c: f64) -> f64 {
    let phi = (-0.5 * c * c).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mass = erf(c / std::f64::consts::SQRT_2);
    sigma * sigma * (1.0 - 2.0 * c * phi / mass)
}

/// `L(w) = (X²/r)‖Uᵀ(w − w*)‖² + Var(e)` under the squared loss.
#[derive(Clone, Debug)]
pub struct RegressionOracle {
    w_star: Vec<f64>,
    /// Row-major `d × r` orthonormal basis; `None` for the full space.
    basis: Option<Vec<f64>>,
    r: usize,
    x_bound: f64,
    noise_var: f64,
}

impl RegressionOracle {
    pub fn w_star(&self) -> &[f64] {
        &self.w_star
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_var
    }

    pub fn rank(&self) -> usize {
        self.r
    }
}

impl PopulationOracle for RegressionOracle {
    fn risk(&self, w: &[f64]) -> f64 {
        let diff: Vec<f64> = w.iter().zip(&self.w_star).map(|(a, b)| a - b).collect();
        let proj_sq = match &self.basis {
            None => dot(&diff, &diff),
            Some(u) => {
                let d = diff.len();
                let mut s = 0.0;
                for c in 0..self.r {
                    let mut p = 0.0;
                    for i in 0..d {
                        p += u[i * self.r + c] * diff[i];
                    }
                    s += p * p;
                }
                s
            }
        };
        self.x_bound * self.x_bound * proj_sq / self.r as f64 + self.noise_var
    }

    fn comparator(&self) -> &[f64] {
        &self.w_star
    }
}

fn truncated_normal(rng: &mut RngHandle, sigma: f64) -> f64 {
    loop {
        let z = rng.standard_normal();
        if z.abs() <= NOISE_TRUNCATION {
            return sigma * z;
        }
    }
}

pub fn gen_regression(
    spec: &RegressionSpec,
    rng: &mut RngHandle,
) -> Result<(Dataset, RegressionOracle)> {
    let d = spec.d;
    if d == 0 {
        return Err(invalid("d", "must be >= 1"));
    }
    let r = spec.rank.unwrap_or(d);
    if r == 0 || r > d {
        return Err(invalid("rank", format!("must be in [1, d={d}], got {r}")));
    }
    for (name, v) in [
        ("w_star_norm", spec.w_star_norm),
        ("noise_std", spec.noise_std),
        ("x_bound", spec.x_bound),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
        }
    }
    let basis = if r < d {
        let mut brng = rng.split_named("basis");
        let g = DMatrix::from_fn(d, r, |_, _| brng.standard_normal());
        let q = g.qr().q();
        let mut u = vec![0.0; d * r];
        for i in 0..d {
            for c in 0..r {
                u[i * r + c] = q[(i, c)];
            }
        }
        Some(u)
    } else {
        None
    };
    let embed = |z: &[f64]| -> Vec<f64> {
        match &basis {
            None => z.to_vec(),
            Some(u) => (0..d)
                .map(|i| (0..r).map(|c| u[i * r + c] * z[c]).sum())
                .collect(),
        }
    };
    let mut wrng = rng.split_named("w_star");
    let w_star: Vec<f64> = embed(&random_unit(&mut wrng, r))
        .iter()
        .map(|v| v * spec.w_star_norm)
        .collect();

    let mut srng = rng.split_named("samples");
    let y_bound = spec.w_star_norm * spec.x_bound + NOISE_TRUNCATION * spec.noise_std;
    let mut features = Vec::with_capacity(spec.n * d);
    let mut labels = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut x = embed(&random_unit(&mut srng, r));
        // Renormalise so the basis rounding cannot push ‖x‖ past the bound.
        let nx = crate::math::norm(&x);
        x.iter_mut().for_each(|v| *v *= spec.x_bound / nx);
        let y = (dot(&w_star, &x) + truncated_normal(&mut srng, spec.noise_std))
            .clamp(-y_bound, y_bound);
        features.extend_from_slice(&x);
        labels.push(y);
    }
    let ds = Dataset::new(d, features, labels, spec.x_bound, y_bound)?;
    let oracle = RegressionOracle {
        w_star,
        basis,
        r,
        x_bound: spec.x_bound,
        noise_var: truncated_normal_variance(spec.noise_std, NOISE_TRUNCATION),
    };
    Ok((ds, oracle))
}
