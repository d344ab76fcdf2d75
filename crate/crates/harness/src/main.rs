use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dpglm::data::write_dataset;
use dpglm::instances::generate;
use dpglm_harness::{
    read_rows, render_text, run_sweep, summarize, write_rows, write_summary_csv, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "dpglm", version, about = "Private GLM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Base seed added to every configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Writes one dataset (first n, d, ε and seed of the config) and its sidecar.
    Gen,
    /// Runs the sweep and writes one CSV row per (point, seed).
    Run,
    /// Summarises a results CSV: medians per (algorithm, d, ε) and log-log slopes.
    Report {
        /// Results CSV written by `run`.
        input: PathBuf,
    },
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli.config.as_ref().context("--config is required")?;
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg =
        ExperimentConfig::parse(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(s) = cli.seed {
        cfg.base_seed = s;
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Gen => {
            let cfg = load(&cli)?;
            let out = cli
                .out
                .clone()
                .or(cfg.output.clone())
                .context("--out is required")?;
            let spec = cfg.instance_spec(cfg.n[0], cfg.d[0], cfg.epsilon[0])?;
            let seed = cfg.base_seed.wrapping_add(cfg.seeds[0]);
            let inst = generate(&spec, seed)?;
            write_dataset(&out, &inst.dataset, &inst.meta)?;
        }
        Command::Run => {
            let cfg = load(&cli)?;
            let rows = run_sweep(&cfg, cli.threads)?;
            match cli.out.clone().or(cfg.output.clone()) {
                Some(p) => write_rows(BufWriter::new(File::create(&p)?), &rows)?,
                None => write_rows(io::stdout().lock(), &rows)?,
            }
        }
        Command::Report { input } => {
            let rows = read_rows(
                File::open(input).with_context(|| format!("opening {}", input.display()))?,
            )?;
            if rows.is_empty() {
                bail!("{} has no rows", input.display());
            }
            let groups = summarize(&rows);
            print!("{}", render_text(&groups));
            if let Some(p) = &cli.out {
                write_summary_csv(BufWriter::new(File::create(p)?), &groups)?;
            }
        }
    }
    Ok(())
}
