//! Privacy budgets, Gaussian noise calibration and private selection.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::math::{sample_laplace, RngHandle};

/// An `(ε, δ)` pair. `ε = ∞` marks a non-private run and serialises as `null`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0) || epsilon.is_nan() {
            return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(invalid("delta", format!("must be in [0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn non_private() -> Self {
        Self {
            epsilon: f64::INFINITY,
            delta: 0.0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_private(&self) -> bool {
        self.epsilon.is_finite()
    }

    /// `(ε/k, δ/k)` under basic composition.
    pub fn split(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("k", "cannot split a budget into zero parts"));
        }
        Ok(self.scale(1.0 / k as f64, 1.0 / k as f64))
    }

    /// `(a·ε, b·δ)`.
    pub fn scale(&self, eps_factor: f64, delta_factor: f64) -> Self {
        Self {
            epsilon: self.epsilon * eps_factor,
            delta: self.delta * delta_factor,
        }
    }

    /// `ln(1/δ)`, rejecting `δ = 0`.
    pub fn log_inv_delta(&self) -> Result<f64> {
        if self.delta <= 0.0 {
            return Err(invalid("delta", "the Gaussian mechanism needs delta > 0"));
        }
        Ok((1.0 / self.delta).ln())
    }
}

#[derive(Serialize, Deserialize)]
struct BudgetRepr {
    epsilon: Option<f64>,
    delta: f64,
}

impl Serialize for PrivacyBudget {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BudgetRepr {
            epsilon: self.epsilon.is_finite().then_some(self.epsilon),
            delta: self.delta,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PrivacyBudget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = BudgetRepr::deserialize(d)?;
        match r.epsilon {
            None => Ok(PrivacyBudget::non_private()),
            Some(e) => PrivacyBudget::new(e, r.delta).map_err(serde::de::Error::custom),
        }
    }
}

/// Which regularity a procedure is calibrated for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Smooth,
    Lipschitz,
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid(
            name,
            format!("must be positive and finite, got {v}"),
        ));
    }
    Ok(())
}

/// Per-step noise variance of noisy GD: `8G²T ln(1/δ) / (n²ε²)`.
/// Zero for a non-private budget.
pub fn gaussian_sigma2_noisy_gd(g: f64, t: usize, n: usize, budget: &PrivacyBudget) -> Result<f64> {
    if !(g >= 0.0) {
        return Err(invalid("g", format!("must be >= 0, got {g}")));
    }
    if t == 0 || n == 0 {
        return Err(invalid("t, n", "must be positive"));
    }
    if !budget.is_private() {
        return Ok(0.0);
    }
    let l = budget.log_inv_delta()?;
    let (n, e) = (n as f64, budget.epsilon());
    Ok(8.0 * g * g * t as f64 * l / (n * n * e * e))
}

/// Output-perturbation noise variance.
///
/// Lipschitz: `4G²X² ln(1/δ) / (λ²n²ε²)` with `G` the link Lipschitz
/// constant. Smooth: `4G² ln(1/δ) / (λ²n²ε²)` with `G` the gradient bound on
/// the ball.
pub fn gaussian_sigma2_output_perturbation(
    g: f64,
    x_bound: f64,
    lambda: f64,
    n: usize,
    budget: &PrivacyBudget,
    variant: Variant,
) -> Result<f64> {
    check_positive("lambda", lambda)?;
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    if !(g >= 0.0) {
        return Err(invalid("g", format!("must be >= 0, got {g}")));
    }
    if !budget.is_private() {
        return Ok(0.0);
    }
    let l = budget.log_inv_delta()?;
    let (n, e) = (n as f64, budget.epsilon());
    let scale = match variant {
        Variant::Smooth => 1.0,
        Variant::Lipschitz => x_bound * x_bound,
    };
    Ok(4.0 * g * g * scale * l / (lambda * lambda * n * n * e * e))
}

/// Index maximising `utility + Lap(scale)`; ties go to the lowest index.
pub fn report_noisy_max(utilities: &[f64], scale: f64, rng: &mut RngHandle) -> Result<usize> {
    if utilities.is_empty() {
        return Err(Error::Empty("candidates"));
    }
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, u) in utilities.iter().enumerate() {
        let v = u + sample_laplace(rng, scale)?;
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    Ok(best)
}

/// A score to be minimised together with its sensitivity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub score: f64,
    pub sensitivity: f64,
}

/// Normalised scores of the generalized exponential mechanism.
///
/// With `t = 2 ln(N/β)/ε` each candidate gets
/// `s_i = max(0, max_j [(q_i + tγ_i) − (q_j + tγ_j)] / (γ_i + γ_j))`.
/// A pair with `γ_i + γ_j = 0` is compared exactly: a positive difference
/// makes `s_i` infinite. Each ratio moves by at most 1 between neighbouring
/// datasets.
pub fn gem_scores(cands: &[ScoredCandidate], epsilon: f64, beta: f64) -> Result<Vec<f64>> {
    if cands.is_empty() {
        return Err(Error::Empty("candidates"));
    }
    check_positive("epsilon", epsilon)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("must be in (0, 1), got {beta}")));
    }
    for c in cands {
        if !c.score.is_finite() {
            return Err(Error::NonFinite("candidate score"));
        }
        if !(c.sensitivity >= 0.0) || !c.sensitivity.is_finite() {
            return Err(invalid(
                "sensitivity",
                format!("must be finite and >= 0, got {}", c.sensitivity),
            ));
        }
    }
    let t = 2.0 * (cands.len() as f64 / beta).ln() / epsilon;
    let shifted: Vec<f64> = cands.iter().map(|c| c.score + t * c.sensitivity).collect();
    Ok((0..cands.len())
        .map(|i| {
            let mut s = 0.0f64;
            for j in 0..cands.len() {
                if j == i {
                    continue;
                }
                let diff = shifted[i] - shifted[j];
                let den = cands[i].sensitivity + cands[j].sensitivity;
                let r = if den > 0.0 {
                    diff / den
                } else if diff > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                s = s.max(r);
            }
            s
        })
        .collect())
}

/// Samples an index with probability `∝ exp(−ε s_i / 2)` over the
/// [`gem_scores`]. With probability at least `1 − β` the pick satisfies
/// `q_{j*} ≤ min_j (q_j + 4γ_j ln(N/β)/ε)`.
pub fn gem_select(
    cands: &[ScoredCandidate],
    epsilon: f64,
    beta: f64,
    rng: &mut RngHandle,
) -> Result<usize> {
    let scores = gem_scores(cands, epsilon, beta)?;
    let s_min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = scores
        .iter()
        .map(|s| (-epsilon * (s - s_min) / 2.0).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.uniform() * total;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 && u < *w {
            return Ok(i);
        }
        u -= w;
    }
    // Rounding left u just above the last positive weight.
    Ok(weights.iter().rposition(|w| *w > 0.0).unwrap_or(0))
}

/// Whether `chosen` meets `q_{j*} ≤ min_j (q_j + 4γ_j ln(N/β)/ε)`.
pub fn gem_guarantee_holds(
    cands: &[ScoredCandidate],
    chosen: usize,
    epsilon: f64,
    beta: f64,
) -> bool {
    let slack = 4.0 * (cands.len() as f64 / beta).ln() / epsilon;
    let bound = cands
        .iter()
        .map(|c| c.score + slack * c.sensitivity)
        .fold(f64::INFINITY, f64::min);
    cands[chosen].score <= bound
}

#[cfg(test)]
mod tests {
    use super::*;

    const E_INV: f64 = 0.36787944117144233;

    #[test]
    fn budget_rules() {
        assert!(PrivacyBudget::new(0.0, 0.1).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0).is_err());
        assert!(PrivacyBudget::new(1.0, -0.1).is_err());
        let b = PrivacyBudget::new(1.5, 1e-3).unwrap();
        let parts = b.split(3).unwrap();
        assert!((3.0 * parts.epsilon() - 1.5).abs() < 1e-15);
        assert!((3.0 * parts.delta() - 1e-3).abs() < 1e-18);
        assert!(b.split(0).is_err());
        assert!(!PrivacyBudget::non_private().is_private());
    }

    #[test]
    fn budget_serde() {
        let np = serde_json::to_string(&PrivacyBudget::non_private()).unwrap();
        assert_eq!(np, r#"{"epsilon":null,"delta":0.0}"#);
        let back: PrivacyBudget = serde_json::from_str(&np).unwrap();
        assert!(!back.is_private());
        let b = PrivacyBudget::new(0.5, 1e-5).unwrap();
        let back: PrivacyBudget =
            serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn noisy_gd_sigma2() {
        let b = PrivacyBudget::new(1.0, E_INV).unwrap();
        assert!((gaussian_sigma2_noisy_gd(1.0, 100, 1000, &b).unwrap() - 8e-4).abs() < 1e-15);
        assert_eq!(gaussian_sigma2_noisy_gd(0.0, 100, 1000, &b).unwrap(), 0.0);
        let b2 = PrivacyBudget::new(2.0, E_INV).unwrap();
        assert!((gaussian_sigma2_noisy_gd(2.0, 1, 1, &b2).unwrap() - 8.0).abs() < 1e-12);
        let d0 = PrivacyBudget::new(1.0, 0.0).unwrap();
        assert!(gaussian_sigma2_noisy_gd(1.0, 1, 1, &d0).is_err());
        assert_eq!(
            gaussian_sigma2_noisy_gd(1.0, 1, 1, &PrivacyBudget::non_private()).unwrap(),
            0.0
        );
    }

    #[test]
    fn output_perturbation_sigma2() {
        let b = PrivacyBudget::new(1.0, E_INV).unwrap();
        let lip =
            gaussian_sigma2_output_perturbation(1.0, 1.0, 1.0, 2, &b, Variant::Lipschitz).unwrap();
        assert!((lip - 1.0).abs() < 1e-12);
        assert_eq!(
            gaussian_sigma2_output_perturbation(0.0, 1.0, 1.0, 2, &b, Variant::Lipschitz).unwrap(),
            0.0
        );
        let sm =
            gaussian_sigma2_output_perturbation(2.0, 123.0, 1.0, 4, &b, Variant::Smooth).unwrap();
        assert!((sm - 1.0).abs() < 1e-12);
        assert!(
            gaussian_sigma2_output_perturbation(1.0, 1.0, 0.0, 2, &b, Variant::Smooth).is_err()
        );
    }

    #[test]
    fn noisy_max_examples() {
        let mut rng = RngHandle::new(1, 0);
        assert_eq!(report_noisy_max(&[0.0, 10.0], 0.0, &mut rng).unwrap(), 1);
        assert_eq!(report_noisy_max(&[3.0], 5.0, &mut rng).unwrap(), 0);
        assert_eq!(
            report_noisy_max(&[1.0, 1.0, 0.0], 0.0, &mut rng).unwrap(),
            0
        );
        assert!(report_noisy_max(&[], 1.0, &mut rng).is_err());
        let hits = (0..10_000)
            .filter(|_| report_noisy_max(&[0.0, 0.1], 10.0, &mut rng).unwrap() == 1)
            .count();
        let f = hits as f64 / 1e4;
        assert!(f > 0.45 && f < 0.60, "{f}");
    }

    fn c(sensitivity: f64, score: f64) -> ScoredCandidate {
        ScoredCandidate { score, sensitivity }
    }

    #[test]
    fn gem_examples() {
        let mut rng = RngHandle::new(2, 0);
        let pair = [c(1.0, 0.0), c(1.0, 100.0)];
        let zeros = (0..1000)
            .filter(|_| gem_select(&pair, 1.0, 0.1, &mut rng).unwrap() == 0)
            .count();
        assert!(zeros >= 900);
        assert_eq!(gem_select(&[c(3.0, 1.0)], 1.0, 0.1, &mut rng).unwrap(), 0);
        for _ in 0..100 {
            assert_eq!(
                gem_select(&[c(0.0, 5.0), c(0.0, 1.0)], 1.0, 0.1, &mut rng).unwrap(),
                1
            );
        }
        assert!(gem_select(&[], 1.0, 0.1, &mut rng).is_err());
    }

    #[test]
    fn gem_scores_nonnegative_with_zero_minimum() {
        let cands = [c(0.0, 1.0), c(2.0, 0.3), c(0.5, 0.9), c(10.0, -4.0)];
        let s = gem_scores(&cands, 0.7, 0.05).unwrap();
        assert!(s.iter().all(|v| *v >= 0.0));
        assert_eq!(s.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
    }

    #[test]
    fn gem_guarantee_heterogeneous() {
        // A large-γ candidate with a deceptively low score next to an
        // accurate low-γ one.
        let cands = [
            c(1000.0, 20.0),
            c(1.0, 0.0),
            c(0.0, 1.0),
            c(5.0, 0.5),
            c(50.0, -3.0),
        ];
        let (eps, beta) = (1.0, 0.1);
        let mut rng = RngHandle::new(3, 0);
        let bad = (0..1000)
            .filter(|_| {
                !gem_guarantee_holds(
                    &cands,
                    gem_select(&cands, eps, beta, &mut rng).unwrap(),
                    eps,
                    beta,
                )
            })
            .count();
        assert!(bad as f64 / 1000.0 <= beta + 3.0 * (beta / 1000.0).sqrt());
    }
}
