//! Experiment configuration: TOML with dotted keys, see `configs/config-schema.txt`.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use mrlab::admissibility::{is_admissible, parse_rational, Triple};
use mrlab::problems::{
    make_diagonal_heat, make_nonautonomous, OperatorFamily, Op, Perturbation, PerturbationComponent, Problem, Profile, Slot,
    TimeFunction,
};
use mrlab::solver::{AuxChoice, MildQuadrature};
use mrlab::spaces::{HilbertScale, TimeGrid};
use mrlab::verify::samples::seeded_data;
use mrlab::verify::{Scenario, Family};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub jobs: Vec<String>,
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub check: CheckSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// `λ_i = 1 + (iπ)²`.
    Heat,
    /// `λ_i = ratio^i`.
    Geometric,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSpec {
    pub model: Model,
    pub n: usize,
    pub ratio: f64,
    pub gamma_star: f64,
    pub horizon: f64,
    pub p: f64,
    pub kappa: f64,
    /// `A(t) = (1 + a_amp sin(2π a_freq t)) A`; zero keeps `A` autonomous.
    pub a_amp: f64,
    pub a_freq: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self { model: Model::Heat, n: 16, ratio: 2.0, gamma_star: 1.0, horizon: 1.0, p: 2.0, kappa: 0.0, a_amp: 0.0, a_freq: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    None,
    LowerOrder,
    Mixed,
    TraceValued,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSpec {
    pub kind: Kind,
    /// Integrability exponent of a lower-order envelope.
    pub q: f64,
    /// `"r, nu, gamma"` as rationals, for mixed perturbations.
    pub triple: String,
    /// Envelope `coef * t^(-alpha)`.
    pub coef: f64,
    pub alpha: f64,
    pub sign: f64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self { kind: Kind::None, q: 4.0, triple: "4/3, 0, 1/2".into(), coef: 1.0, alpha: 0.0, sign: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub cells: usize,
    pub grading: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { cells: 1024, grading: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    Random,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingData {
    Smooth,
    Ones,
    Zero,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSpec {
    pub u0: InitialData,
    pub forcing: ForcingData,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self { u0: InitialData::Random, forcing: ForcingData::Smooth }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub tol: f64,
    pub c0: f64,
    pub aux: AuxChoice,
    pub quadrature: MildQuadrature,
    pub oracle_refinement: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self { tol: 1e-10, c0: 1.0, aux: AuxChoice::TimeAverage, quadrature: MildQuadrature::ImplicitEuler, oracle_refinement: 4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSpec {
    pub samples: usize,
    pub per_octave: Vec<usize>,
    pub octaves: usize,
    pub horizons: Vec<f64>,
    pub dims: Vec<usize>,
    pub seeds: Vec<u64>,
    pub combos: usize,
    pub energy_case: String,
    pub offsets: Vec<f64>,
    pub fractions: Vec<f64>,
    pub holder_p: f64,
    pub holder_q: f64,
    pub holder_r: f64,
    pub holder_nu: f64,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self {
            samples: 8,
            per_octave: vec![8, 16, 32],
            octaves: 24,
            horizons: vec![0.25, 1.0, 4.0],
            dims: vec![16, 32, 64, 128],
            seeds: vec![1, 2],
            combos: 4,
            energy_case: "perturbed".into(),
            offsets: vec![0.2, 0.1, 0.05, 0.025],
            fractions: vec![0.25, 0.5, 1.0],
            holder_p: 4.0,
            holder_q: 4.0,
            holder_r: 2.0,
            holder_nu: 0.0,
        }
    }
}

/// Axes accepted by `sweep`.
pub const AXES: [&str; 8] = ["eps", "n", "horizon", "grading", "samples", "cells", "alpha", "tol"];

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).context("config does not parse")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn triple(&self) -> Result<Triple> {
        let parts: Vec<&str> = self.perturbation.triple.split(',').collect();
        if parts.len() != 3 {
            bail!("perturbation.triple must read \"r, nu, gamma\"; got {:?}", self.perturbation.triple);
        }
        let q = |s: &str| parse_rational(s).map_err(|e| anyhow!("perturbation.triple: {e}"));
        Ok(Triple::new(q(parts[0])?, q(parts[1])?, q(parts[2])?))
    }

    /// Admissibility and basic ranges, checked before any job runs.
    pub fn validate(&self) -> Result<()> {
        if self.jobs.is_empty() {
            bail!("jobs must list at least one job");
        }
        for j in &self.jobs {
            if !crate::jobs::JOBS.contains(&j.as_str()) {
                bail!("unknown job {j:?}; known jobs: {}", crate::jobs::JOBS.join(", "));
            }
        }
        let pr = &self.problem;
        if pr.n == 0 || self.grid.cells == 0 {
            bail!("problem.n and grid.cells must be positive");
        }
        if self.perturbation.kind == Kind::Mixed {
            let q = |x: f64, name: &str| -> Result<_> {
                parse_rational(&format!("{x}")).map_err(|e| anyhow!("problem.{name}: {e}"))
            };
            let triple = self.triple()?;
            let verdict = is_admissible(&q(pr.p, "p")?, &q(pr.kappa, "kappa")?, &triple, &q(pr.gamma_star, "gamma_star")?)?;
            if !verdict.admissible() {
                bail!("inadmissible triple {triple}: {}", verdict.reason());
            }
        }
        Ok(())
    }

    /// Envelope exponent `q_b` of the configured perturbation class.
    pub fn envelope_exponent(&self) -> Result<f64> {
        let p = self.problem.p;
        Ok(match self.perturbation.kind {
            Kind::None => bail!("an unperturbed problem has no envelope"),
            Kind::LowerOrder => self.perturbation.q,
            Kind::TraceValued => p / (p - 1.0),
            Kind::Mixed => {
                let c = PerturbationComponent::mixed(self.triple()?, Profile::Zero, 1.0)?;
                let q = |x: f64| parse_rational(&format!("{x}"));
                match c.envelope_exponents(&q(p)?, &q(self.problem.kappa)?)? {
                    Some((qb, _)) => qb,
                    None => bail!("r = p admits only the zero envelope"),
                }
            }
        })
    }

    /// Copy with one numeric parameter replaced.
    pub fn with_axis(&self, axis: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                bail!("axis {axis} needs a positive integer, got {v}")
            }
        };
        match axis {
            "eps" => c.perturbation.alpha = 1.0 / self.envelope_exponent()? - value,
            "n" => c.problem.n = count(value)?,
            "horizon" | "T" => c.problem.horizon = value,
            "grading" => c.grid.grading = value,
            "samples" => c.check.samples = count(value)?,
            "cells" => c.grid.cells = count(value)?,
            "alpha" => c.perturbation.alpha = value,
            "tol" => c.solver.tol = value,
            _ => bail!("unknown sweep axis {axis:?}; known axes: {}", AXES.join(", ")),
        }
        c.validate()?;
        Ok(c)
    }

    pub fn scale(&self) -> Result<HilbertScale> {
        let pr = &self.problem;
        Ok(match pr.model {
            Model::Heat => HilbertScale::heat(pr.n, pr.gamma_star)?,
            Model::Geometric => HilbertScale::geometric(pr.n, pr.ratio, pr.gamma_star)?,
        })
    }

    pub fn family(&self) -> Family {
        match self.perturbation.kind {
            Kind::None => Family::LowerOrder,
            Kind::LowerOrder if self.perturbation.q > self.problem.p => Family::LowerOrder,
            Kind::LowerOrder => Family::LowerOrderCritical,
            Kind::Mixed => Family::MixedScale,
            Kind::TraceValued => Family::TraceValued,
        }
    }

    fn operator(&self, scale: &HilbertScale) -> Result<OperatorFamily> {
        let pr = &self.problem;
        let base = match pr.model {
            Model::Heat => make_diagonal_heat(pr.n, pr.gamma_star)?.0,
            Model::Geometric => OperatorFamily::autonomous(Op::Diagonal(scale.eigenvalues().to_vec())),
        };
        if pr.a_amp == 0.0 {
            return Ok(base);
        }
        Ok(make_nonautonomous(&base, Profile::Sine { mean: 1.0, amp: pr.a_amp, freq: pr.a_freq }, pr.horizon)?)
    }

    /// The configured problem with its grid and scheme settings.
    pub fn scenario(&self) -> Result<Scenario> {
        let pr = &self.problem;
        let pe = &self.perturbation;
        let scale = self.scale()?;
        let n = pr.n;
        let a = self.operator(&scale)?;
        let env = Profile::power(pe.coef, pe.alpha);
        let (b, slots) = match pe.kind {
            Kind::None => (Perturbation::none(), vec![(pr.p, pr.kappa, 0.0)]),
            Kind::LowerOrder => {
                (Perturbation::single(PerturbationComponent::lower_order(pe.q, env, pe.sign)?), vec![(pr.p, pr.kappa, 0.0)])
            }
            Kind::Mixed => {
                let t = self.triple()?;
                let second = (mrlab::admissibility::to_f64(&t.r), mrlab::admissibility::to_f64(&t.nu), mrlab::admissibility::to_f64(&t.gamma));
                (Perturbation::single(PerturbationComponent::mixed(t, env, pe.sign)?), vec![(pr.p, pr.kappa, 0.0), second])
            }
            Kind::TraceValued => (
                Perturbation::single(PerturbationComponent::trace_valued(pr.p, env, pe.sign)?),
                vec![(pr.p, pr.kappa, 0.0), (1.0, 0.0, 1.0 - 1.0 / pr.p)],
            ),
        };
        let (u0, smooth) = seeded_data(n, slots.len(), self.seed)?;
        let u0 = match self.data.u0 {
            InitialData::Random => u0,
            InitialData::Zero => vec![0.0; n],
        };
        let f = slots
            .iter()
            .zip(smooth)
            .enumerate()
            .map(|(k, (&(r, nu, gamma), s))| {
                let f = match self.data.forcing {
                    ForcingData::Smooth => s,
                    ForcingData::Ones if k == 0 => TimeFunction::term(Profile::constant(1.0), vec![1.0; n]),
                    _ => TimeFunction::zero(n),
                };
                Slot { f, r, nu, gamma }
            })
            .collect();
        let problem = Problem { scale, a, b, f, u0, p: pr.p, kappa: pr.kappa };
        problem.validate()?;
        Ok(Scenario {
            family: self.family(),
            problem,
            grid: TimeGrid::graded(pr.horizon, self.grid.cells, self.grid.grading)?,
            c0: self.solver.c0,
            aux: self.solver.aux,
            quadrature: self.solver.quadrature,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        "seed = 1\njobs = [\"solve\"]\nproblem.n = 1\ngrid.cells = 16\n"
    }

    #[test]
    fn minimal_config_has_defaults() {
        let c = Config::from_toml(minimal()).unwrap();
        assert_eq!(c.problem.p, 2.0);
        assert_eq!(c.perturbation.kind, Kind::None);
        let s = c.scenario().unwrap();
        assert_eq!(s.problem.scale.dim(), 1);
        assert_eq!(s.grid.cells(), 16);
    }

    #[test]
    fn inadmissible_triple_names_the_clause() {
        let text = "seed = 1\njobs = [\"solve\"]\nproblem.p = 4\nperturbation.kind = \"mixed\"\nperturbation.triple = \"4/3, 0, 1/4\"\n";
        let err = Config::from_toml(text).unwrap_err().to_string();
        assert!(err.contains("(1+ν)/r ≤ (1+κ)/p + γ"), "{err}");
        let text = "seed = 1\njobs = [\"solve\"]\nproblem.p = 4\nperturbation.kind = \"mixed\"\nperturbation.triple = \"1, 0, 1/2\"\n";
        let err = Config::from_toml(text).unwrap_err().to_string();
        assert!(err.contains("ν+1 < r"), "{err}");
    }

    #[test]
    fn unknown_keys_and_axes_are_errors() {
        assert!(Config::from_toml("seed = 1\njobs = [\"solve\"]\nproblem.m = 3\n").is_err());
        assert!(Config::from_toml("seed = 1\njobs = [\"dance\"]\n").is_err());
        let c = Config::from_toml(minimal()).unwrap();
        assert!(c.with_axis("colour", 1.0).is_err());
        assert_eq!(c.with_axis("n", 8.0).unwrap().problem.n, 8);
        assert!(c.with_axis("n", 2.5).is_err());
    }

    #[test]
    fn eps_axis_sets_the_envelope_exponent() {
        let text = "seed = 1\njobs = [\"solve\"]\nperturbation.kind = \"lower_order\"\nperturbation.q = 4\n";
        let c = Config::from_toml(text).unwrap().with_axis("eps", 0.05).unwrap();
        assert!((c.perturbation.alpha - 0.2).abs() < 1e-15);
    }
}
