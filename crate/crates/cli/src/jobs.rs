//! Job dispatch and per-job reports.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Result};
use serde::Serialize;

use mrlab::admissibility::{holder_exponents, is_admissible, to_f64, HolderExponents};
use mrlab::solver::SolverOptions;
use mrlab::spaces::{weighted_lp_norm, Span};
use mrlab::verify::tolerances::{DISTANCE_RATIO_CAP, ORACLE_RELATIVE};
use mrlab::verify::{
    check_energy_estimates, check_key_perturbation_estimate, check_mixed_embedding, check_spike_stability,
    check_trace_embedding, check_weighted_holder, criticality_experiment, decomposition_invariance, uniqueness_crosscheck,
    CheckReport, CriticalityConfig, EnergyCase, EnergyConfig, LevelSet,
};

use crate::config::{Config, Kind};

pub const JOBS: [&str; 12] = [
    "solve",
    "oracle",
    "uniqueness",
    "decomposition",
    "trace_embedding",
    "mixed_embedding",
    "key_estimate",
    "holder",
    "energy",
    "spike",
    "criticality",
    "admissibility",
];

/// One JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct JobReport {
    pub job: String,
    pub seed: u64,
    pub pass: bool,
    pub params: BTreeMap<String, String>,
    pub ratios: Vec<f64>,
    pub labels: Vec<String>,
    /// Scalar results used as sweep columns.
    pub metrics: BTreeMap<String, f64>,
    pub series: BTreeMap<String, Vec<f64>>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl JobReport {
    fn from_check(job: &str, cfg: &Config, check: CheckReport) -> Self {
        let mut params = base_params(cfg);
        params.extend(check.params);
        let mut metrics = BTreeMap::new();
        metrics.insert("drift".to_string(), check.drift);
        metrics.insert("samples".to_string(), check.samples as f64);
        if let Some(m) = check.ratios.iter().cloned().reduce(f64::max) {
            metrics.insert("max_ratio".to_string(), m);
        }
        Self {
            job: job.to_string(),
            seed: cfg.seed,
            pass: check.pass,
            params,
            ratios: check.ratios,
            labels: check.labels,
            metrics,
            series: check.series,
            notes: check.notes,
            error: None,
        }
    }

    fn failed(job: &str, cfg: &Config, err: anyhow::Error) -> Self {
        Self {
            job: job.to_string(),
            seed: cfg.seed,
            pass: false,
            params: base_params(cfg),
            ratios: vec![],
            labels: vec![],
            metrics: BTreeMap::new(),
            series: BTreeMap::new(),
            notes: vec![],
            error: Some(format!("{err:#}")),
        }
    }
}

fn base_params(cfg: &Config) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("family".into(), cfg.family().name().into());
    m.insert("n".into(), cfg.problem.n.to_string());
    m.insert("p".into(), cfg.problem.p.to_string());
    m.insert("kappa".into(), cfg.problem.kappa.to_string());
    m.insert("horizon".into(), cfg.problem.horizon.to_string());
    m.insert("cells".into(), cfg.grid.cells.to_string());
    m.insert("grading".into(), cfg.grid.grading.to_string());
    m.insert("tol".into(), cfg.solver.tol.to_string());
    if cfg.perturbation.kind != Kind::None {
        m.insert("envelope".into(), format!("{} t^-{}", cfg.perturbation.coef, cfg.perturbation.alpha));
    }
    m
}

fn options(cfg: &Config) -> SolverOptions {
    SolverOptions { tol: cfg.solver.tol, ..SolverOptions::default() }
}

fn levels(cfg: &Config) -> LevelSet {
    LevelSet { per_octave: cfg.check.per_octave.clone(), octaves: cfg.check.octaves }
}

fn energy_case(name: &str) -> Result<EnergyCase> {
    EnergyCase::ALL
        .into_iter()
        .find(|c| c.name() == name)
        .ok_or_else(|| anyhow!("unknown check.energy_case {name:?}"))
}

fn energy_config(cfg: &Config) -> EnergyConfig {
    EnergyConfig {
        dims: cfg.check.dims.clone(),
        levels: levels(cfg),
        seeds: cfg.check.seeds.clone(),
        combos: cfg.check.combos,
        horizon: cfg.problem.horizon,
        ..EnergyConfig::default()
    }
}

fn solve_job(cfg: &Config, with_oracle: bool) -> Result<JobReport> {
    let scenario = cfg.scenario()?;
    let opts = options(cfg);
    let out = scenario.solve(&opts)?;
    let mut check = CheckReport::new(if with_oracle { "oracle" } else { "solve" });
    let late = out.intervals.iter().flat_map(|s| s.ratios.iter().skip(1)).cloned().fold(0.0, f64::max);
    let mut pass = out.max_contraction() <= opts.contraction_cap && late <= DISTANCE_RATIO_CAP;
    if with_oracle {
        let reference = scenario.oracle(cfg.solver.oracle_refinement)?;
        let pr = &scenario.problem;
        let span = Span::full(&scenario.grid);
        let diff = weighted_lp_norm(&out.trajectory.sub(&reference), pr.p, pr.kappa, 1.0, &pr.scale, span)?;
        let size = weighted_lp_norm(&reference, pr.p, pr.kappa, 1.0, &pr.scale, span)?;
        let rel = if size == 0.0 { diff } else { diff / size };
        check.push(format!("relative distance to {}x refined direct solve", cfg.solver.oracle_refinement), rel);
        pass &= rel <= ORACLE_RELATIVE;
    }
    check.pass = pass && out.norms.values().all(|x| x.is_finite());
    check.series.insert("partition".into(), out.partition.clone());
    let mut report = JobReport::from_check(check.name.clone().as_str(), cfg, check);
    report.metrics.insert("pieces".into(), (out.partition.len() - 1) as f64);
    report.metrics.insert("intervals".into(), out.intervals.len() as f64);
    report.metrics.insert("iterations".into(), out.total_iterations() as f64);
    report.metrics.insert("max_contraction".into(), out.max_contraction());
    report.metrics.insert("late_distance_ratio".into(), late);
    report.metrics.insert("budget".into(), out.budget);
    report.metrics.insert("residual".into(), out.residual);
    for (k, v) in &out.norms {
        report.metrics.insert(format!("norm_{k}"), *v);
    }
    Ok(report)
}

fn run_one(job: &str, cfg: &Config) -> Result<JobReport> {
    let c = &cfg.check;
    let pr = &cfg.problem;
    let check = match job {
        "solve" => return solve_job(cfg, false),
        "oracle" => return solve_job(cfg, true),
        "uniqueness" => uniqueness_crosscheck(&cfg.scenario()?, &options(cfg))?,
        "decomposition" => decomposition_invariance(&cfg.scenario()?, &c.fractions, &options(cfg))?,
        "trace_embedding" => check_trace_embedding(pr.p, pr.kappa, &cfg.scale()?, &levels(cfg), &c.horizons, c.samples, cfg.seed)?,
        "mixed_embedding" => {
            check_mixed_embedding(pr.p, pr.kappa, &cfg.triple()?, &cfg.scale()?, &levels(cfg), &c.horizons, c.samples, cfg.seed)?
        }
        "key_estimate" => {
            let s = cfg.scenario()?;
            let Some(component) = s.problem.b.components.first() else {
                bail!("key_estimate needs a lower-order perturbation");
            };
            check_key_perturbation_estimate(pr.p, pr.kappa, component, &cfg.scale()?, &levels(cfg), &c.horizons, c.samples, cfg.seed)?
        }
        "holder" => check_weighted_holder(c.holder_p, c.holder_q, c.holder_r, pr.kappa, c.holder_nu, c.samples, cfg.seed)?,
        "energy" => check_energy_estimates(energy_case(&c.energy_case)?, &energy_config(cfg))?,
        "spike" => check_spike_stability(&energy_config(cfg))?,
        "criticality" => {
            let crit = CriticalityConfig { offsets: c.offsets.clone(), dim: pr.n, cells: cfg.grid.cells };
            let report = criticality_experiment(cfg.family(), &crit)?;
            let mut out = JobReport::from_check(job, cfg, report);
            if let Some(n) = out.series.get("partition_count").and_then(|v| v.last()) {
                out.metrics.insert("pieces".into(), *n);
            }
            return Ok(out);
        }
        "admissibility" => {
            let triple = cfg.triple()?;
            let q = |x: f64| mrlab::admissibility::parse_rational(&x.to_string());
            let verdict = is_admissible(&q(pr.p)?, &q(pr.kappa)?, &triple, &q(pr.gamma_star)?)?;
            let mut check = CheckReport::new("admissibility");
            check.param("triple", &triple);
            check.param("verdict", verdict.reason());
            if let HolderExponents::Finite { q, mu } = holder_exponents(&q(pr.p)?, &q(pr.kappa)?, &triple.r, &triple.nu)? {
                check.series_push("envelope_q", to_f64(&q));
                check.series_push("envelope_mu", to_f64(&mu));
            }
            check.pass = verdict.admissible();
            check
        }
        other => bail!("unknown job {other:?}"),
    };
    Ok(JobReport::from_check(job, cfg, check))
}

/// Runs every configured job on up to `workers` threads; reports come back
/// in job order.
pub fn run_jobs(cfg: &Config, workers: usize) -> Vec<JobReport> {
    let jobs = &cfg.jobs;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<JobReport>>> = Mutex::new(vec![None; jobs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                let report = run_one(&jobs[i], cfg).unwrap_or_else(|e| JobReport::failed(&jobs[i], cfg, e));
                slots.lock().expect("report lock")[i] = Some(report);
            });
        }
    });
    slots.into_inner().expect("report lock").into_iter().map(|r| r.expect("every job reports")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failing_job_is_recorded_not_raised() {
        let cfg = Config::from_toml("seed = 3\njobs = [\"key_estimate\", \"solve\"]\nproblem.n = 2\ngrid.cells = 32\n").unwrap();
        let reports = run_jobs(&cfg, 2);
        assert_eq!(reports.len(), 2);
        assert!(!reports[0].pass && reports[0].error.is_some());
        assert!(reports[1].pass, "{:?}", reports[1]);
        assert_eq!(reports[1].metrics["pieces"], 1.0);
    }
}
