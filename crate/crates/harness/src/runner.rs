//! Sweep execution and result rows.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use dpglm::instances::{generate, InstanceSpec};
use dpglm::losses::GlmLoss;
use dpglm::math::norm;
use dpglm::optim::{JlConfig, OptimizerSchedule, TrainedModel};
use dpglm::selection::{
    flagship_k, flagship_pipeline, private_grid_search, BaseAlgorithm, Boost, BoostConfig,
    JlAlgorithm, NoisyGdAlgorithm, OutputPerturbationAlgorithm,
};
use dpglm::{PrivacyBudget, RngHandle, Variant};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AlgSpec, ExperimentConfig, LossSpec, RadiusSpec};

pub const CSV_HEADER: &str =
    "algorithm,n,d,rank,epsilon,delta,b_used,seed,excess_risk,empirical_risk,runtime_ms,schedule_json";

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunDescriptor {
    pub algorithm: AlgSpec,
    pub instance: InstanceSpec,
    pub seed: u64,
    pub loss: LossSpec,
    /// `None` for a non-private run.
    pub epsilon: Option<f64>,
    pub delta: f64,
    pub radius: RadiusSpec,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boost_chunks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jl_k: Option<usize>,
    #[serde(default)]
    pub jl_full_batch: bool,
}

/// Contents of the `schedule_json` column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: RunDescriptor,
    pub schedule: OptimizerSchedule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: String,
    pub n: usize,
    pub d: usize,
    pub rank: Option<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub b_used: f64,
    pub seed: u64,
    pub excess_risk: f64,
    pub empirical_risk: f64,
    pub runtime_ms: u64,
    pub schedule_json: String,
}

/// Result of executing one descriptor.
pub struct RunOutcome {
    pub model: TrainedModel,
    pub b_used: f64,
    pub excess_risk: f64,
    pub empirical_risk: f64,
    pub rank: Option<usize>,
}

impl RunDescriptor {
    pub fn budget(&self) -> Result<PrivacyBudget> {
        if self.algorithm == AlgSpec::NoisyGdNonPrivate {
            return Ok(PrivacyBudget::non_private());
        }
        match self.epsilon {
            None => Ok(PrivacyBudget::non_private()),
            Some(e) => Ok(PrivacyBudget::new(e, self.delta)?),
        }
    }
}

fn build_base(
    alg: &AlgSpec,
    loss: Arc<dyn GlmLoss>,
    desc: &RunDescriptor,
) -> Result<Arc<dyn BaseAlgorithm>> {
    Ok(match alg {
        AlgSpec::NoisyGd | AlgSpec::NoisyGdNonPrivate => Arc::new(NoisyGdAlgorithm { loss }),
        AlgSpec::OutputPert(v) => Arc::new(OutputPerturbationAlgorithm {
            loss,
            variant: *v,
            config: Default::default(),
        }),
        AlgSpec::Jl(v) => Arc::new(JlAlgorithm {
            loss,
            variant: *v,
            config: JlConfig {
                lipschitz_full_batch: desc.jl_full_batch,
                k_override: desc.jl_k,
            },
        }),
        AlgSpec::Boost(inner) => Arc::new(Boost {
            base: build_base(inner, loss, desc)?,
            beta: desc.beta,
            config: BoostConfig {
                chunks: desc.boost_chunks,
                laplace_scale: None,
            },
        }),
        AlgSpec::GridSearch(_) | AlgSpec::Flagship => {
            bail!("`{alg}` cannot be used as a base algorithm")
        }
    })
}

/// Runs a descriptor from scratch: generates the instance, trains, and
/// scores against the instance's oracle.
pub fn execute(desc: &RunDescriptor) -> Result<RunOutcome> {
    let inst = generate(&desc.instance, desc.seed)?;
    let ds = &inst.dataset;
    let loss: Arc<dyn GlmLoss> = Arc::from(desc.loss.build(ds.y_bound())?);
    desc.algorithm.check_loss(loss.as_ref())?;
    let budget = desc.budget()?;
    let mut rng = RngHandle::new(desc.seed, 1);
    let fixed_b = || -> Result<f64> {
        match desc.radius {
            RadiusSpec::Fixed(b) => Ok(b),
            RadiusSpec::Oracle => {
                let b = norm(inst.oracle.comparator());
                if b > 0.0 {
                    Ok(b)
                } else {
                    bail!("oracle radius is 0 for this instance; give radius explicitly")
                }
            }
            RadiusSpec::Adaptive => bail!("`{}` needs a radius", desc.algorithm),
        }
    };
    let (model, b_used) = match &desc.algorithm {
        AlgSpec::Flagship => {
            let out = flagship_pipeline(loss.clone(), ds, &budget, desc.beta, &mut rng)?;
            let b = out.model.diag("grid_selected_b").unwrap_or(0.0);
            (out.model, b)
        }
        AlgSpec::GridSearch(inner) => {
            let base = build_base(inner, loss.clone(), desc)?;
            let k = match desc.grid_k {
                Some(k) => k,
                None => flagship_k(
                    loss.bound_at_zero().sqrt(),
                    ds.x_bound(),
                    loss.smoothness().unwrap_or(1.0),
                    ds.n(),
                    budget.epsilon(),
                ),
            };
            let out = private_grid_search(base.as_ref(), ds, k, &budget, desc.beta, &mut rng)?;
            let b = out.model.diag("grid_selected_b").unwrap_or(0.0);
            (out.model, b)
        }
        alg => {
            let b = fixed_b()?;
            let base = build_base(alg, loss.clone(), desc)?;
            (base.train(ds, b, &budget, &mut rng)?, b)
        }
    };
    let w = model.w.as_slice();
    Ok(RunOutcome {
        b_used,
        excess_risk: inst.oracle.excess_risk(w),
        empirical_risk: ds.empirical_risk(loss.as_ref(), w),
        rank: inst.meta.rank,
        model,
    })
}

/// Per-example gradient evaluations a run is expected to need. Output
/// perturbation is charged a nominal 1000 full passes.
pub fn predicted_gradient_evals(alg: &AlgSpec, n: usize, desc: &RunDescriptor) -> f64 {
    let nf = n as f64;
    match alg {
        AlgSpec::NoisyGd | AlgSpec::NoisyGdNonPrivate => nf * nf,
        AlgSpec::OutputPert(_) => 1000.0 * nf,
        AlgSpec::Jl(Variant::Smooth) => nf * nf,
        AlgSpec::Jl(Variant::Lipschitz) => {
            if desc.jl_full_batch {
                nf * nf * nf
            } else {
                nf * nf
            }
        }
        AlgSpec::Boost(inner) => {
            let m = desc
                .boost_chunks
                .unwrap_or_else(|| dpglm::selection::boost_chunks(desc.beta).unwrap_or(1))
                .max(1);
            m as f64 * predicted_gradient_evals(inner, n / (m + 1), desc)
        }
        AlgSpec::GridSearch(inner) => {
            let k = desc.grid_k.unwrap_or(8) as f64;
            k * predicted_gradient_evals(inner, n / 2, desc)
        }
        AlgSpec::Flagship => {
            let inner = AlgSpec::Boost(Box::new(AlgSpec::OutputPert(Variant::Smooth)));
            8.0 * predicted_gradient_evals(&inner, n / 2, desc)
        }
    }
}

/// Expands the sweep in (algorithm, n, d, ε, seed) order.
pub fn descriptors(cfg: &ExperimentConfig) -> Result<Vec<RunDescriptor>> {
    let mut out = Vec::new();
    for alg in &cfg.algorithms {
        for &n in &cfg.n {
            for &d in &cfg.d {
                for &eps in &cfg.epsilon {
                    let instance = cfg
                        .instance_spec(n, d, eps)
                        .with_context(|| format!("instance for n={n}, d={d}"))?;
                    for &s in &cfg.seeds {
                        out.push(RunDescriptor {
                            algorithm: alg.clone(),
                            instance: instance.clone(),
                            seed: cfg.base_seed.wrapping_add(s),
                            loss: cfg.loss,
                            epsilon: eps.is_finite().then_some(eps),
                            delta: cfg.delta.resolve(n),
                            radius: cfg.radius,
                            beta: cfg.beta,
                            grid_k: cfg.grid_k,
                            boost_chunks: cfg.boost_chunks,
                            jl_k: cfg.jl_k,
                            jl_full_batch: cfg.jl_full_batch,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn row(desc: &RunDescriptor, timing: bool) -> Result<ResultRow> {
    let start = Instant::now();
    let out = execute(desc).with_context(|| {
        format!(
            "{} n={} seed={}",
            desc.algorithm,
            desc.instance.n(),
            desc.seed
        )
    })?;
    let elapsed = start.elapsed().as_millis() as u64;
    let budget = out.model.budget;
    let record = RunRecord {
        run: desc.clone(),
        schedule: out.model.schedule.clone(),
    };
    Ok(ResultRow {
        algorithm: desc.algorithm.to_string(),
        n: desc.instance.n(),
        d: desc.instance.d(),
        rank: out.rank,
        epsilon: budget.epsilon(),
        delta: budget.delta(),
        b_used: out.b_used,
        seed: desc.seed,
        excess_risk: out.excess_risk,
        empirical_risk: out.empirical_risk,
        runtime_ms: if timing { elapsed } else { 0 },
        schedule_json: serde_json::to_string(&record)?,
    })
}

/// Runs every sweep point on a pool of `threads` workers (0 = all cores)
/// and returns rows in sweep order.
pub fn run_sweep(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRow>> {
    let descs = descriptors(cfg)?;
    let predicted: f64 = descs
        .iter()
        .map(|d| predicted_gradient_evals(&d.algorithm, d.instance.n(), d))
        .sum();
    if predicted > cfg.max_gradient_evals {
        bail!(
            "sweep needs about {predicted:.3e} gradient evaluations, above the cap of {:.3e} (raise max_gradient_evals)",
            cfg.max_gradient_evals
        );
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()?;
    pool.install(|| descs.par_iter().map(|d| row(d, cfg.timing)).collect())
}

/// Re-executes the run stored in a row's `schedule_json` and checks that it
/// reproduces the row.
pub fn replay_row(r: &ResultRow) -> Result<RunOutcome> {
    let record: RunRecord = serde_json::from_str(&r.schedule_json).context("schedule_json")?;
    let out = execute(&record.run)?;
    if out.model.schedule != record.schedule {
        bail!("replayed schedule differs");
    }
    if out.excess_risk.to_bits() != r.excess_risk.to_bits()
        || out.b_used.to_bits() != r.b_used.to_bits()
    {
        return Err(anyhow!(
            "replay gave excess risk {} (row has {})",
            out.excess_risk,
            r.excess_risk
        ));
    }
    Ok(out)
}

pub fn write_rows<W: Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    if rows.is_empty() {
        wr.write_record(CSV_HEADER.split(','))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        bail!("unexpected header `{}`", header.join(","));
    }
    rd.deserialize().map(|r| r.map_err(Into::into)).collect()
}
