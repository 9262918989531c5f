//! `mrlab run <config>` and `mrlab sweep <config> --axis <name> --values <list>`.

mod config;
mod jobs;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::Config;
use jobs::{run_jobs, JobReport};

#[derive(Parser)]
#[command(name = "mrlab", version, about = "Maximal regularity experiments: solves, estimate checks and sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every job of a config and write one JSON report per job.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the config once per axis value and collect one CSV.
    Sweep {
        config: PathBuf,
        /// One of eps, n, horizon (or T), grading, samples, cells, alpha, tol.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Jobs run in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides solver.tol.
    #[arg(long)]
    tol: Option<f64>,
}

fn load(path: &Path, common: &Common) -> Result<Config> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut cfg = Config::from_toml(&text).with_context(|| format!("invalid config {}", path.display()))?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.tol {
        cfg.solver.tol = t;
    }
    Ok(cfg)
}

fn write_reports(dir: &Path, reports: &[JobReport]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for (i, r) in reports.iter().enumerate() {
        let path = dir.join(format!("{i:02}-{}.json", r.job));
        let mut text = serde_json::to_string_pretty(r)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let mut w = csv::Writer::from_path(dir.join("ratios.csv"))?;
    w.write_record(["job", "label", "ratio", "pass"])?;
    for r in reports {
        for (label, ratio) in r.labels.iter().zip(&r.ratios) {
            w.write_record([r.job.as_str(), label, &ratio.to_string(), &r.pass.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn summarize(reports: &[JobReport]) -> bool {
    for r in reports {
        let status = if r.pass { "pass" } else { "FAIL" };
        match &r.error {
            Some(e) => println!("{status} {}: {e}", r.job),
            None => println!("{status} {}", r.job),
        }
    }
    reports.iter().all(|r| r.pass)
}

fn sweep(cfg: &Config, axis: &str, values: &[f64], common: &Common) -> Result<bool> {
    let mut rows = Vec::new();
    for &v in values {
        let c = cfg.with_axis(axis, v)?;
        for r in run_jobs(&c, common.jobs) {
            rows.push((v, r));
        }
    }
    let mut metrics: Vec<String> = rows.iter().flat_map(|(_, r)| r.metrics.keys().cloned()).collect();
    metrics.sort();
    metrics.dedup();
    fs::create_dir_all(&common.out)?;
    let path = common.out.join(format!("sweep-{axis}.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec![axis.to_string(), "job".into(), "pass".into()];
    header.extend(metrics.iter().cloned());
    w.write_record(&header)?;
    for (v, r) in &rows {
        let mut rec = vec![v.to_string(), r.job.clone(), r.pass.to_string()];
        rec.extend(metrics.iter().map(|m| r.metrics.get(m).map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    let reports: Vec<JobReport> = rows.into_iter().map(|(_, r)| r).collect();
    println!("wrote {}", path.display());
    Ok(summarize(&reports))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, common } => {
            let cfg = load(&config, &common)?;
            let reports = run_jobs(&cfg, common.jobs);
            write_reports(&common.out, &reports)?;
            Ok(summarize(&reports))
        }
        Command::Sweep { config, axis, values, common } => {
            let cfg = load(&config, &common)?;
            sweep(&cfg, &axis, &values, &common)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
