use rand::Rng;
use rand_distr::{Bernoulli, Beta};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::instances::PopulationOracle;
use crate::math::RngHandle;

/// Fingerprinting distribution for the absolute loss.
///
/// `μ_i ~ Beta(β, β)` is drawn once per instance. Each point is `x = 0` with
/// probability `1 − α` and otherwise `X e_i` with `i` uniform in `0..d′`; the
/// label is `c·z_i` with `z_i ~ Bernoulli(μ_i)` and `c = BX/(d′)^{1/p}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzHardSpec {
    pub n: usize,
    pub d: usize,
    pub d_prime: usize,
    pub alpha_mass: f64,
    pub beta_shape: f64,
    pub radius: f64,
    #[serde(default = "default_p")]
    pub p_norm: f64,
    pub x_bound: f64,
}

fn default_p() -> f64 {
    2.0
}

/// Shape used by the lower-bound schedule.
pub const AUTO_BETA_SHAPE: f64 = 1.0 / 16.0;

impl LipschitzHardSpec {
    /// `β = 1/16`, `α = min(d′/(48(1+2β)nε), 1)`.
    pub fn adversarial_auto(
        n: usize,
        d: usize,
        d_prime: usize,
        radius: f64,
        epsilon: f64,
        x_bound: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0) || n == 0 {
            return Err(invalid("adversarial-auto", "needs epsilon > 0 and n >= 1"));
        }
        let beta = AUTO_BETA_SHAPE;
        let alpha = (d_prime as f64 / (48.0 * (1.0 + 2.0 * beta) * n as f64 * epsilon)).min(1.0);
        Ok(Self {
            n,
            d,
            d_prime,
            alpha_mass: alpha,
            beta_shape: beta,
            radius,
            p_norm: 2.0,
            x_bound,
        })
    }

    fn label_scale(&self) -> f64 {
        self.radius * self.x_bound / (self.d_prime as f64).powf(1.0 / self.p_norm)
    }
}

/// `E|z − μ|` for `μ ~ Beta(β, β)`, `z ~ Bernoulli(μ)`: `2E[μ(1−μ)] = β/(1+2β)`.
pub fn fingerprint_deviation_mean(beta_shape: f64) -> f64 {
    beta_shape / (1.0 + 2.0 * beta_shape)
}

/// Monte Carlo estimate of `E|z − μ|` with fresh `μ` per draw; returns
/// `(mean, standard error)`.
pub fn fingerprint_deviation_mc(
    beta_shape: f64,
    draws: usize,
    rng: &mut RngHandle,
) -> Result<(f64, f64)> {
    if draws < 2 {
        return Err(invalid("draws", "must be >= 2"));
    }
    let dist =
        Beta::new(beta_shape, beta_shape).map_err(|e| invalid("beta_shape", e.to_string()))?;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let mu: f64 = rng.sample(dist);
        let z = if rng.uniform() < mu { 1.0 } else { 0.0 };
        let v = (z - mu).abs();
        s += v;
        s2 += v * v;
    }
    let n = draws as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Exact absolute-loss risk under a fixed `μ`:
/// `(α/d′) Σ_i [μ_i |c − X w_i| + (1 − μ_i) |X w_i|]`.
#[derive(Clone, Debug)]
pub struct LipschitzHardOracle {
    mu: Vec<f64>,
    comparator: Vec<f64>,
    alpha: f64,
    beta: f64,
    x_bound: f64,
    scale: f64,
}

impl LipschitzHardOracle {
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn d_prime(&self) -> usize {
        self.mu.len()
    }

    pub fn alpha_mass(&self) -> f64 {
        self.alpha
    }

    pub fn beta_shape(&self) -> f64 {
        self.beta
    }

    /// `c = BX/(d′)^{1/p}`, the magnitude of a nonzero label.
    pub fn label_scale(&self) -> f64 {
        self.scale
    }
}

impl PopulationOracle for LipschitzHardOracle {
    fn risk(&self, w: &[f64]) -> f64 {
        let dp = self.mu.len();
        let s: f64 = self
            .mu
            .iter()
            .zip(w)
            .map(|(&m, &wi)| {
                let z = self.x_bound * wi;
                m * (self.scale - z).abs() + (1.0 - m) * z.abs()
            })
            .sum();
        self.alpha * s / dp as f64
    }

    fn comparator(&self) -> &[f64] {
        &self.comparator
    }
}

pub fn gen_lipschitz_hard(
    spec: &LipschitzHardSpec,
    rng: &mut RngHandle,
) -> Result<(Dataset, LipschitzHardOracle)> {
    let dp = spec.d_prime;
    if dp == 0 || dp > spec.d {
        return Err(invalid(
            "d_prime",
            format!("must be in [1, d={}], got {dp}", spec.d),
        ));
    }
    if !(0.0..=1.0).contains(&spec.alpha_mass) {
        return Err(invalid(
            "alpha_mass",
            format!("must be in [0, 1], got {}", spec.alpha_mass),
        ));
    }
    if !(spec.beta_shape > 0.0 && spec.beta_shape.is_finite()) {
        return Err(invalid(
            "beta_shape",
            format!("must be > 0, got {}", spec.beta_shape),
        ));
    }
    if !(spec.p_norm >= 1.0) {
        return Err(invalid(
            "p_norm",
            format!("must be >= 1, got {}", spec.p_norm),
        ));
    }
    for (name, v) in [("radius", spec.radius), ("x_bound", spec.x_bound)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
        }
    }
    let beta = Beta::new(spec.beta_shape, spec.beta_shape)
        .map_err(|e| invalid("beta_shape", e.to_string()))?;
    let mut mrng = rng.split_named("mu");
    let mu: Vec<f64> = (0..dp).map(|_| mrng.sample(beta)).collect();
    let scale = spec.label_scale();
    let comparator: Vec<f64> = (0..spec.d)
        .map(|i| {
            if i < dp {
                spec.radius * mu[i] / (dp as f64).powf(1.0 / spec.p_norm)
            } else {
                0.0
            }
        })
        .collect();

    let mass = Bernoulli::new(spec.alpha_mass).map_err(|e| invalid("alpha_mass", e.to_string()))?;
    let mut srng = rng.split_named("samples");
    let d = spec.d;
    let mut features = vec![0.0; spec.n * d];
    let mut labels = vec![0.0; spec.n];
    for r in 0..spec.n {
        if srng.sample(mass) {
            let i = srng.index(dp);
            features[r * d + i] = spec.x_bound;
            if srng.uniform() < mu[i] {
                labels[r] = scale;
            }
        }
    }
    let ds = Dataset::new(d, features, labels, spec.x_bound, scale)?;
    let oracle = LipschitzHardOracle {
        mu,
        comparator,
        alpha: spec.alpha_mass,
        beta: spec.beta_shape,
        x_bound: spec.x_bound,
        scale,
    };
    Ok((ds, oracle))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::AbsoluteLoss;

    fn spec(dp: usize, alpha: f64, n: usize) -> LipschitzHardSpec {
        LipschitzHardSpec {
            n,
            d: dp + 3,
            d_prime: dp,
            alpha_mass: alpha,
            beta_shape: 1.0 / 16.0,
            radius: 2.0,
            p_norm: 2.0,
            x_bound: 1.5,
        }
    }

    #[test]
    fn beta_moment_by_quadrature() {
        // ∫ 2μ(1−μ) Beta(β,β)(μ) dμ = 2B(β+1, β+1)/B(β, β).
        for b in [1.0 / 16.0, 0.5, 1.0, 3.0] {
            let ln_b = |a: f64, c: f64| {
                statrs::function::gamma::ln_gamma(a) + statrs::function::gamma::ln_gamma(c)
                    - statrs::function::gamma::ln_gamma(a + c)
            };
            let exact = 2.0 * (ln_b(b + 1.0, b + 1.0) - ln_b(b, b)).exp();
            assert!((fingerprint_deviation_mean(b) - exact).abs() < 1e-12, "{b}");
        }
        assert!((fingerprint_deviation_mean(1.0 / 16.0) - 1.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn deviation_monte_carlo() {
        let mut rng = RngHandle::new(11, 0);
        let (m, se) = fingerprint_deviation_mc(1.0 / 16.0, 100_000, &mut rng).unwrap();
        assert!(
            (m - fingerprint_deviation_mean(1.0 / 16.0)).abs() <= 3.0 * se,
            "{m} ± {se}"
        );
        assert!((m - 1.0 / 18.0).abs() <= 0.02 * (1.0 / 18.0) * 3.0);
    }

    #[test]
    fn comparator_in_ball() {
        for seed in 0..20 {
            for p in [1.0, 2.0, 4.0] {
                let mut s = spec(7, 0.3, 10);
                s.p_norm = p;
                let (_, o) = gen_lipschitz_hard(&s, &mut RngHandle::new(seed, 0)).unwrap();
                let pn: f64 = o
                    .comparator()
                    .iter()
                    .map(|v| v.abs().powf(p))
                    .sum::<f64>()
                    .powf(1.0 / p);
                assert!(pn <= s.radius * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn zero_mass() {
        let (ds, o) = gen_lipschitz_hard(&spec(4, 0.0, 50), &mut RngHandle::new(1, 0)).unwrap();
        assert_eq!(ds.max_feature_norm(), 0.0);
        assert_eq!(
            o.risk(&[3.0, -1.0, 0.2, 9.0, 0.0, 0.0, 1.0]),
            o.comparator_risk()
        );
    }

    #[test]
    fn oracle_matches_sample_risk() {
        let s = spec(5, 0.4, 400_000);
        let (ds, o) = gen_lipschitz_hard(&s, &mut RngHandle::new(4, 0)).unwrap();
        let l = AbsoluteLoss::new(ds.y_bound()).unwrap();
        for w in [
            vec![0.0; 8],
            o.comparator().to_vec(),
            vec![0.3, -0.2, 0.5, 0.1, 0.9, 0.0, 0.0, 0.0],
        ] {
            let per: Vec<f64> = (0..ds.n())
                .map(|i| (ds.y(i) - crate::math::dot(&w, ds.x(i))).abs())
                .collect();
            let mean = per.iter().sum::<f64>() / per.len() as f64;
            let var = per.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (per.len() - 1) as f64;
            let se = (var / per.len() as f64).sqrt();
            assert!((ds.empirical_risk(&l, &w) - mean).abs() < 1e-12);
            assert!(
                (mean - o.risk(&w)).abs() <= 4.0 * se + 1e-12,
                "{mean} vs {}",
                o.risk(&w)
            );
        }
    }

    #[test]
    fn comparator_residual_expectation() {
        // Over fresh μ, E|y − ⟨w̃, x⟩| = α c β/(1+2β); averaged over many instances.
        let s = spec(6, 0.5, 1);
        let trials = 20_000;
        let mut vals = Vec::with_capacity(trials);
        for t in 0..trials {
            let (_, o) = gen_lipschitz_hard(&s, &mut RngHandle::new(t as u64, 7)).unwrap();
            vals.push(o.comparator_risk());
        }
        let n = trials as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        let c = s.label_scale();
        let want = s.alpha_mass * c * fingerprint_deviation_mean(s.beta_shape);
        assert!((mean - want).abs() <= 3.0 * se, "{mean} vs {want} ± {se}");
    }

    #[test]
    fn auto_preset() {
        let s = LipschitzHardSpec::adversarial_auto(1000, 20, 10, 1.0, 1.0, 1.0).unwrap();
        assert!((s.alpha_mass - 10.0 / (48.0 * 1.125 * 1000.0)).abs() < 1e-15);
        assert_eq!(s.beta_shape, 1.0 / 16.0);
    }
}
