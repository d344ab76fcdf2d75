//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Lists are comma separated
//! and seed ranges may be written `a..b` (half open). Recognised keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `instance` | `regression`, `smooth-hard` or `lipschitz-hard` | required |
//! | `algorithm` | list of algorithm names, see [`AlgSpec`] | required |
//! | `n`, `d` | sweep axes | required |
//! | `epsilon` | sweep axis; `inf` means non-private | required |
//! | `delta` | a number, `1/n` or `1/n^2` | `1/n` |
//! | `seeds` | list or range | `0` |
//! | `base_seed` | added to every seed | `0` |
//! | `radius` | a number, `oracle` (comparator norm) or `adaptive` | `oracle` |
//! | `loss` | `squared`, `scaled-squared:H`, `absolute`, `huber:c` | by instance |
//! | `beta` | failure probability for boosting and selection | `0.1` |
//! | `grid_k` | grid size for `grid-search(..)` | from the flagship rule |
//! | `boost_chunks` | forces the boosting chunk count | from `beta` |
//! | `jl_k` | forces the embedding dimension | from the schedule |
//! | `jl_full_batch` | full-batch sub-run for `jl-lipschitz` | `false` |
//! | `timing` | record wall-clock time; `false` writes 0 | `true` |
//! | `max_gradient_evals` | refuse sweeps predicted to exceed this | `1e9` |
//! | `output` | CSV path when `--out` is not given | none |
//!
//! Instance keys: `w_star_norm` (1), `noise_std` (0.1), `x_bound` (1),
//! `rank`; `d_prime`, `p_mass` (1), `b_bias` (0.5), `signs`, `y_bound` (1),
//! `dummy` (false), `dummy_c`; `alpha_mass` (1), `beta_shape` (1/16),
//! `hard_radius` (1), `p_norm` (2); and `preset = adversarial-auto`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use dpglm::instances::{InstanceSpec, LipschitzHardSpec, RegressionSpec, SmoothHardSpec};
use dpglm::losses::{AbsoluteLoss, GlmLoss, HuberLoss, ScaledSquaredLoss, SquaredLoss};
use dpglm::Variant;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceKind {
    Regression,
    SmoothHard,
    LipschitzHard,
}

impl FromStr for InstanceKind {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "regression" => InstanceKind::Regression,
            "smooth-hard" => InstanceKind::SmoothHard,
            "lipschitz-hard" => InstanceKind::LipschitzHard,
            _ => bail!("unknown instance `{s}`"),
        })
    }
}

/// Algorithm names accepted by the harness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlgSpec {
    NoisyGd,
    NoisyGdNonPrivate,
    OutputPert(Variant),
    Jl(Variant),
    Boost(Box<AlgSpec>),
    GridSearch(Box<AlgSpec>),
    Flagship,
}

impl AlgSpec {
    /// Whether the algorithm selects `B` itself.
    pub fn is_adaptive(&self) -> bool {
        matches!(self, AlgSpec::GridSearch(_) | AlgSpec::Flagship)
    }

    fn needs(&self) -> Variant {
        match self {
            AlgSpec::OutputPert(v) | AlgSpec::Jl(v) => *v,
            AlgSpec::Boost(a) | AlgSpec::GridSearch(a) => a.needs(),
            _ => Variant::Smooth,
        }
    }

    /// Checks that the loss has the regularity the algorithm calibrates on.
    pub fn check_loss(&self, loss: &dyn GlmLoss) -> Result<()> {
        match self.needs() {
            Variant::Smooth if loss.smoothness().is_none() => {
                bail!(
                    "algorithm `{self}` needs a smooth loss, `{}` is not",
                    loss.name()
                )
            }
            Variant::Lipschitz if loss.lipschitz().is_none() => {
                bail!(
                    "algorithm `{self}` needs a Lipschitz loss, `{}` is not",
                    loss.name()
                )
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AlgSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = |v: &Variant| match v {
            Variant::Smooth => "smooth",
            Variant::Lipschitz => "lipschitz",
        };
        match self {
            AlgSpec::NoisyGd => write!(f, "noisy-gd"),
            AlgSpec::NoisyGdNonPrivate => write!(f, "noisy-gd-nonprivate"),
            AlgSpec::OutputPert(x) => write!(f, "output-pert-{}", v(x)),
            AlgSpec::Jl(x) => write!(f, "jl-{}", v(x)),
            AlgSpec::Boost(a) => write!(f, "boost({a})"),
            AlgSpec::GridSearch(a) => write!(f, "grid-search({a})"),
            AlgSpec::Flagship => write!(f, "flagship"),
        }
    }
}

impl FromStr for AlgSpec {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let wrapped = |prefix: &str| s.strip_prefix(prefix).and_then(|r| r.strip_suffix(')'));
        if let Some(inner) = wrapped("boost(") {
            let a: AlgSpec = inner.parse()?;
            if a.is_adaptive() {
                bail!("`{a}` cannot be boosted");
            }
            return Ok(AlgSpec::Boost(Box::new(a)));
        }
        if let Some(inner) = wrapped("grid-search(") {
            let a: AlgSpec = inner.parse()?;
            if a.is_adaptive() || a == AlgSpec::NoisyGdNonPrivate {
                bail!("`{a}` cannot be wrapped by grid search");
            }
            return Ok(AlgSpec::GridSearch(Box::new(a)));
        }
        Ok(match s {
            "noisy-gd" => AlgSpec::NoisyGd,
            "noisy-gd-nonprivate" => AlgSpec::NoisyGdNonPrivate,
            "output-pert-smooth" => AlgSpec::OutputPert(Variant::Smooth),
            "output-pert-lipschitz" => AlgSpec::OutputPert(Variant::Lipschitz),
            "jl-smooth" => AlgSpec::Jl(Variant::Smooth),
            "jl-lipschitz" => AlgSpec::Jl(Variant::Lipschitz),
            "flagship" => AlgSpec::Flagship,
            _ => bail!("unknown algorithm `{s}`"),
        })
    }
}

impl Serialize for AlgSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AlgSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "kebab-case")]
pub enum LossSpec {
    Squared,
    ScaledSquared(f64),
    Absolute,
    Huber(f64),
}

impl LossSpec {
    pub fn default_for(kind: InstanceKind) -> Self {
        match kind {
            InstanceKind::LipschitzHard => LossSpec::Absolute,
            _ => LossSpec::Squared,
        }
    }

    pub fn build(&self, label_bound: f64) -> dpglm::Result<Box<dyn GlmLoss>> {
        Ok(match *self {
            LossSpec::Squared => Box::new(SquaredLoss::new(label_bound)?),
            LossSpec::ScaledSquared(h) => Box::new(ScaledSquaredLoss::new(h, label_bound)?),
            LossSpec::Absolute => Box::new(AbsoluteLoss::new(label_bound)?),
            LossSpec::Huber(c) => Box::new(HuberLoss::new(c, label_bound)?),
        })
    }
}

impl FromStr for LossSpec {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a.trim(), Some(parse_f64(b)?)),
            None => (s.trim(), None),
        };
        Ok(match (name, arg) {
            ("squared", None) => LossSpec::Squared,
            ("scaled-squared", Some(h)) => LossSpec::ScaledSquared(h),
            ("absolute", None) => LossSpec::Absolute,
            ("huber", Some(c)) => LossSpec::Huber(c),
            _ => bail!(
                "unknown loss `{s}` (expected squared, scaled-squared:H, absolute or huber:c)"
            ),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaSpec {
    Fixed(f64),
    InverseN,
    InverseNSquared,
}

impl DeltaSpec {
    pub fn resolve(&self, n: usize) -> f64 {
        match *self {
            DeltaSpec::Fixed(d) => d,
            DeltaSpec::InverseN => 1.0 / n as f64,
            DeltaSpec::InverseNSquared => 1.0 / (n as f64 * n as f64),
        }
    }
}

impl FromStr for DeltaSpec {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.replace(' ', "").as_str() {
            "1/n" => DeltaSpec::InverseN,
            "1/n^2" | "1/n2" => DeltaSpec::InverseNSquared,
            other => DeltaSpec::Fixed(parse_f64(other)?),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusSpec {
    Fixed(f64),
    Oracle,
    Adaptive,
}

impl FromStr for RadiusSpec {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "oracle" => RadiusSpec::Oracle,
            "adaptive" => RadiusSpec::Adaptive,
            other => {
                let b = parse_f64(other)?;
                if !(b > 0.0 && b.is_finite()) {
                    bail!("radius must be positive, got {b}");
                }
                RadiusSpec::Fixed(b)
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    AdversarialAuto,
}

/// Generator parameters shared across the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceParams {
    pub w_star_norm: f64,
    pub noise_std: f64,
    pub x_bound: f64,
    pub rank: Option<usize>,
    pub d_prime: Option<usize>,
    pub p_mass: f64,
    pub b_bias: f64,
    pub signs: Vec<i8>,
    pub y_bound: f64,
    pub dummy: bool,
    pub dummy_c: Option<f64>,
    pub alpha_mass: f64,
    pub beta_shape: f64,
    pub hard_radius: f64,
    pub p_norm: f64,
    pub preset: Option<Preset>,
}

impl Default for InstanceParams {
    fn default() -> Self {
        Self {
            w_star_norm: 1.0,
            noise_std: 0.1,
            x_bound: 1.0,
            rank: None,
            d_prime: None,
            p_mass: 1.0,
            b_bias: 0.5,
            signs: Vec::new(),
            y_bound: 1.0,
            dummy: false,
            dummy_c: None,
            alpha_mass: 1.0,
            beta_shape: 1.0 / 16.0,
            hard_radius: 1.0,
            p_norm: 2.0,
            preset: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub instance: InstanceKind,
    pub params: InstanceParams,
    pub algorithms: Vec<AlgSpec>,
    pub loss: LossSpec,
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub delta: DeltaSpec,
    pub seeds: Vec<u64>,
    pub base_seed: u64,
    pub radius: RadiusSpec,
    pub beta: f64,
    pub grid_k: Option<usize>,
    pub boost_chunks: Option<usize>,
    pub jl_k: Option<usize>,
    pub jl_full_batch: bool,
    pub timing: bool,
    pub max_gradient_evals: f64,
    pub output: Option<PathBuf>,
}

fn parse_f64(s: &str) -> Result<f64> {
    let s = s.trim();
    match s {
        "inf" | "infinity" | "nonprivate" => return Ok(f64::INFINITY),
        _ => {}
    }
    if let Some((a, b)) = s.split_once('/') {
        return Ok(parse_f64(a)? / parse_f64(b)?);
    }
    s.parse::<f64>()
        .with_context(|| format!("`{s}` is not a number"))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("`{s}` is not a boolean"),
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(item)
        .collect()
}

fn parse_usize(s: &str) -> Result<usize> {
    // Accepts 1e4 style as well as plain integers.
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    let f = parse_f64(s)?;
    if f < 0.0 || f.fract() != 0.0 || !f.is_finite() {
        bail!("`{s}` is not a non-negative integer");
    }
    Ok(f as usize)
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
            if b <= a {
                bail!("empty seed range `{part}`");
            }
            out.extend(a..b);
        } else {
            out.push(part.parse()?);
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if kv.insert(k.clone(), v).is_some() {
                bail!("line {}: duplicate key `{k}`", lineno + 1);
            }
        }
        Self::from_map(kv)
    }

    pub fn from_map(mut kv: BTreeMap<String, String>) -> Result<Self> {
        let mut take = |k: &str| kv.remove(k);
        let req =
            |v: Option<String>, k: &str| v.ok_or_else(|| anyhow!("missing required key `{k}`"));

        let instance: InstanceKind = req(take("instance"), "instance")?.parse()?;
        let algorithms = parse_list(&req(take("algorithm"), "algorithm")?, |s| s.parse())?;
        let n = parse_list(&req(take("n"), "n")?, parse_usize)?;
        let d = parse_list(&req(take("d"), "d")?, parse_usize)?;
        let epsilon = parse_list(&req(take("epsilon"), "epsilon")?, parse_f64)?;
        let loss = match take("loss") {
            Some(s) => s.parse()?,
            None => LossSpec::default_for(instance),
        };
        let mut p = InstanceParams::default();
        macro_rules! opt {
            ($key:literal, $f:expr) => {
                take($key)
                    .map(|s| $f(&s).with_context(|| format!("key `{}`", $key)))
                    .transpose()?
            };
        }
        if let Some(v) = opt!("w_star_norm", parse_f64) {
            p.w_star_norm = v;
        }
        if let Some(v) = opt!("noise_std", parse_f64) {
            p.noise_std = v;
        }
        if let Some(v) = opt!("x_bound", parse_f64) {
            p.x_bound = v;
        }
        p.rank = opt!("rank", parse_usize);
        p.d_prime = opt!("d_prime", parse_usize);
        if let Some(v) = opt!("p_mass", parse_f64) {
            p.p_mass = v;
        }
        if let Some(v) = opt!("b_bias", parse_f64) {
            p.b_bias = v;
        }
        if let Some(v) = opt!("signs", |s: &str| parse_list(s, |x| Ok(x.parse::<i8>()?))) {
            p.signs = v;
        }
        if let Some(v) = opt!("y_bound", parse_f64) {
            p.y_bound = v;
        }
        if let Some(v) = opt!("dummy", parse_bool) {
            p.dummy = v;
        }
        p.dummy_c = opt!("dummy_c", parse_f64);
        if let Some(v) = opt!("alpha_mass", parse_f64) {
            p.alpha_mass = v;
        }
        if let Some(v) = opt!("beta_shape", parse_f64) {
            p.beta_shape = v;
        }
        if let Some(v) = opt!("hard_radius", parse_f64) {
            p.hard_radius = v;
        }
        if let Some(v) = opt!("p_norm", parse_f64) {
            p.p_norm = v;
        }
        p.preset = opt!("preset", |s: &str| match s {
            "adversarial-auto" => Ok(Preset::AdversarialAuto),
            _ => Err(anyhow!("unknown preset `{s}`")),
        });

        let cfg = ExperimentConfig {
            instance,
            params: p,
            algorithms,
            loss,
            n,
            d,
            epsilon,
            delta: opt!("delta", |s: &str| s.parse::<DeltaSpec>()).unwrap_or(DeltaSpec::InverseN),
            seeds: opt!("seeds", parse_seeds).unwrap_or_else(|| vec![0]),
            base_seed: opt!("base_seed", |s: &str| Ok::<u64, anyhow::Error>(s.parse()?))
                .unwrap_or(0),
            radius: opt!("radius", |s: &str| s.parse::<RadiusSpec>()).unwrap_or(RadiusSpec::Oracle),
            beta: opt!("beta", parse_f64).unwrap_or(0.1),
            grid_k: opt!("grid_k", parse_usize),
            boost_chunks: opt!("boost_chunks", parse_usize),
            jl_k: opt!("jl_k", parse_usize),
            jl_full_batch: opt!("jl_full_batch", parse_bool).unwrap_or(false),
            timing: opt!("timing", parse_bool).unwrap_or(true),
            max_gradient_evals: opt!("max_gradient_evals", parse_f64).unwrap_or(1e9),
            output: take("output").map(PathBuf::from),
        };
        if let Some(k) = kv.keys().next() {
            bail!("unknown key `{k}`");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty()
            || self.n.is_empty()
            || self.d.is_empty()
            || self.epsilon.is_empty()
            || self.seeds.is_empty()
        {
            bail!("sweep axes (algorithm, n, d, epsilon, seeds) must be non-empty");
        }
        if self.epsilon.iter().any(|e| !(*e > 0.0)) {
            bail!("epsilon values must be positive or `inf`");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            bail!("beta must be in (0, 1)");
        }
        let probe = self.loss.build(1.0).map_err(|e| anyhow!("loss: {e}"))?;
        for a in &self.algorithms {
            a.check_loss(probe.as_ref())?;
            if self.radius == RadiusSpec::Adaptive && !a.is_adaptive() {
                bail!("radius = adaptive needs grid-search(..) or flagship, not `{a}`");
            }
            if matches!(a, AlgSpec::GridSearch(_) | AlgSpec::Flagship)
                && self.epsilon.iter().any(|e| e.is_infinite())
            {
                bail!("`{a}` needs a finite epsilon");
            }
        }
        Ok(())
    }

    /// The generator spec for one sweep point.
    pub fn instance_spec(&self, n: usize, d: usize, epsilon: f64) -> Result<InstanceSpec> {
        let p = &self.params;
        Ok(match self.instance {
            InstanceKind::Regression => InstanceSpec::Regression(RegressionSpec {
                d,
                n,
                w_star_norm: p.w_star_norm,
                noise_std: p.noise_std,
                x_bound: p.x_bound,
                rank: p.rank,
            }),
            InstanceKind::SmoothHard => {
                let mut s = if p.preset == Some(Preset::AdversarialAuto) {
                    let avail = d - p.dummy as usize;
                    SmoothHardSpec::adversarial_auto(
                        n - p.dummy as usize,
                        avail,
                        p.p_mass,
                        p.hard_radius,
                        epsilon,
                        p.y_bound,
                        p.x_bound,
                    )?
                } else {
                    SmoothHardSpec {
                        n,
                        d,
                        d_prime: p.d_prime.unwrap_or(d - p.dummy as usize),
                        p_mass: p.p_mass,
                        b_bias: p.b_bias,
                        signs: p.signs.clone(),
                        y_bound: p.y_bound,
                        x_bound: p.x_bound,
                        dummy: false,
                        dummy_c: None,
                    }
                };
                s.n = n;
                s.d = d;
                s.dummy = p.dummy;
                s.dummy_c = p.dummy_c;
                if !p.signs.is_empty() {
                    s.signs = p.signs.clone();
                }
                InstanceSpec::SmoothHard(s)
            }
            InstanceKind::LipschitzHard => {
                let d_prime = p.d_prime.unwrap_or(d);
                let mut s = if p.preset == Some(Preset::AdversarialAuto) {
                    LipschitzHardSpec::adversarial_auto(
                        n,
                        d,
                        d_prime,
                        p.hard_radius,
                        epsilon,
                        p.x_bound,
                    )?
                } else {
                    LipschitzHardSpec {
                        n,
                        d,
                        d_prime,
                        alpha_mass: p.alpha_mass,
                        beta_shape: p.beta_shape,
                        radius: p.hard_radius,
                        p_norm: p.p_norm,
                        x_bound: p.x_bound,
                    }
                };
                s.p_norm = p.p_norm;
                InstanceSpec::LipschitzHard(s)
            }
        })
    }
}
