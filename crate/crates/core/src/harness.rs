//! Seeded Monte-Carlo experiments.
//!
//! Run `r` of an experiment draws its noise from stream `(base_seed, r)`;
//! runs may execute in any order or in parallel, and aggregation always
//! reduces in ascending run index, so statistics are bitwise reproducible.

use rayon::prelude::*;

use crate::analysis::{lyapunov_record, MeanEnergy, TheoremRate};
use crate::error::{Error, Result};
use crate::noise::{MnsOracle, MnsOracleConfig, NoiseShape};
use crate::objective::{GradientOracle, ObjectiveProblem};
use crate::optimizers::{
    baseline_step, shangpp_dl_step, snag_step_hnag, BaselineMethod, BaselineState, DlState,
    Regime, Schedule, ShangMethod, ShangState, SnagHnagParams, SnagState,
};
use crate::point::Point;
use crate::problems::{make_quadratic, FdProblem};
use crate::scalar::Scalar;

/// Runs whose suboptimality exceeds this (or turns non-finite) are flagged
/// as diverged and truncated.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

/// Default cap on `n_runs * n_iters`.
pub const DEFAULT_BUDGET: u64 = 20_000_000_000;

pub const CSV_HEADER: &str = "k,mean_subopt,std_subopt,mean_energy,std_energy,bound,n_runs,diverged_runs";
pub const SWEEP_CSV_HEADER: &str = "method,sigma,final_mean_suboptimality,delta,diverged_runs";

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    Fd { exponent: u32 },
    Quadratic { eigenvalues: Vec<f64>, center: Vec<f64> },
}

impl ProblemSpec {
    pub fn build<T: Scalar>(&self) -> Result<Box<dyn ObjectiveProblem<T>>> {
        Ok(match self {
            ProblemSpec::Fd { exponent } => Box::new(FdProblem::<T>::new(*exponent)?),
            ProblemSpec::Quadratic {
                eigenvalues,
                center,
            } => Box::new(make_quadratic(
                eigenvalues.iter().map(|&l| T::lit(l)).collect(),
                Point::from_f64(center)?,
            )?),
        })
    }

    pub fn dimension(&self) -> usize {
        match self {
            ProblemSpec::Fd { .. } => 1,
            ProblemSpec::Quadratic { eigenvalues, .. } => eigenvalues.len(),
        }
    }

    pub fn label(&self) -> String {
        match self.build::<f64>() {
            Ok(p) => p.label(),
            Err(_) => "invalid".into(),
        }
    }

    fn lipschitz(&self) -> Result<f64> {
        Ok(self.build::<f64>()?.profile().l())
    }
}

/// An optimizer and its hyperparameters. `None` fields take the documented
/// defaults, resolved against the experiment's noise level.
#[derive(Clone, Debug, PartialEq)]
pub enum MethodSpec {
    /// Regime defaults to strongly convex when `mu > 0`; `alpha` defaults to
    /// `sqrt(mu/L)/(1 + sigma^2)`; `design_sigma` (the sigma the schedule is
    /// tuned for) defaults to the effective noise `sigma / sqrt(K)`.
    Shang {
        regime: Option<Regime>,
        alpha: Option<f64>,
        design_sigma: Option<f64>,
    },
    ShangPlusPlus {
        regime: Option<Regime>,
        m: f64,
        alpha_tilde: Option<f64>,
        design_sigma: Option<f64>,
    },
    ShangPlusPlusDl { alpha: f64, gamma: f64, m: f64 },
    /// Flow-form SNAG with constant parameters; no defaults.
    Snag {
        alpha: f64,
        beta: f64,
        gamma: f64,
        mu: f64,
    },
    /// Step defaults to `1/((1 + sigma^2) L)`.
    Sgd { lr: Option<f64> },
    Shb { lr: Option<f64>, momentum: f64 },
    Nag { lr: Option<f64>, momentum: f64 },
}

impl MethodSpec {
    pub fn label(&self) -> &'static str {
        match self {
            MethodSpec::Shang { .. } => "shang",
            MethodSpec::ShangPlusPlus { .. } => "shangpp",
            MethodSpec::ShangPlusPlusDl { .. } => "shangpp-dl",
            MethodSpec::Snag { .. } => "snag",
            MethodSpec::Sgd { .. } => "sgd",
            MethodSpec::Shb { .. } => "shb",
            MethodSpec::Nag { .. } => "nag",
        }
    }

    /// Theorem-default SHANG, tuned for the experiment's noise.
    pub fn shang() -> Self {
        MethodSpec::Shang {
            regime: None,
            alpha: None,
            design_sigma: None,
        }
    }

    /// Theorem-default SHANG++ with correction `m`.
    pub fn shangpp(m: f64) -> Self {
        MethodSpec::ShangPlusPlus {
            regime: None,
            m,
            alpha_tilde: None,
            design_sigma: None,
        }
    }

    /// Fills every defaulted hyperparameter for noise level `effective_sigma`,
    /// so the result no longer depends on the experiment's sigma.
    pub fn resolved(&self, effective_sigma: f64, lipschitz: f64) -> Self {
        let default_lr = 1.0 / ((1.0 + effective_sigma * effective_sigma) * lipschitz);
        match self.clone() {
            MethodSpec::Shang {
                regime,
                alpha,
                design_sigma,
            } => MethodSpec::Shang {
                regime,
                alpha,
                design_sigma: Some(design_sigma.unwrap_or(effective_sigma)),
            },
            MethodSpec::ShangPlusPlus {
                regime,
                m,
                alpha_tilde,
                design_sigma,
            } => MethodSpec::ShangPlusPlus {
                regime,
                m,
                alpha_tilde,
                design_sigma: Some(design_sigma.unwrap_or(effective_sigma)),
            },
            MethodSpec::Sgd { lr } => MethodSpec::Sgd {
                lr: Some(lr.unwrap_or(default_lr)),
            },
            MethodSpec::Shb { lr, momentum } => MethodSpec::Shb {
                lr: Some(lr.unwrap_or(default_lr)),
                momentum,
            },
            MethodSpec::Nag { lr, momentum } => MethodSpec::Nag {
                lr: Some(lr.unwrap_or(default_lr)),
                momentum,
            },
            other => other,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub method: MethodSpec,
    pub sigma: f64,
    pub shape: NoiseShape,
    pub averaging: usize,
    pub n_runs: usize,
    pub n_iters: usize,
    pub base_seed: u64,
    pub x0: Vec<f64>,
    pub record_every: usize,
    pub budget: u64,
}

impl ExperimentSpec {
    /// 200 runs of 1000 iterations from `x0 = (1, ..., 1)`, noiseless,
    /// elementwise noise shape.
    pub fn new(problem: ProblemSpec, method: MethodSpec) -> Self {
        let dim = problem.dimension();
        Self {
            problem,
            method,
            sigma: 0.0,
            shape: NoiseShape::Elementwise,
            averaging: 1,
            n_runs: 200,
            n_iters: 1000,
            base_seed: 0,
            x0: vec![1.0; dim],
            record_every: 1,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn effective_sigma(&self) -> f64 {
        (self.sigma * self.sigma / self.averaging as f64).sqrt()
    }

    pub fn oracle_config(&self) -> Result<MnsOracleConfig> {
        MnsOracleConfig::new(self.sigma, self.shape, self.averaging, self.base_seed)
    }

    pub fn validate(&self) -> Result<()> {
        let problem = self.problem.build::<f64>()?;
        self.oracle_config()?;
        Point::<f64>::from_f64(&self.x0)?.check_dim(problem.dimension())?;
        if self.n_runs == 0 || self.n_iters == 0 || self.record_every == 0 {
            return Err(Error::invalid("n_runs, n_iters and record_every must be >= 1"));
        }
        let work = (self.n_runs as u128) * (self.n_iters as u128);
        if work > self.budget as u128 {
            return Err(Error::invalid(format!(
                "n_runs * n_iters = {work} exceeds the budget of {}",
                self.budget
            )));
        }
        // Instantiating the stepper checks the method's own preconditions.
        let mut oracle = MnsOracle::new(self.oracle_config()?, 0);
        Stepper::<f64>::start(self, problem.as_ref(), &mut oracle).map(|_| ())
    }

    fn resolved_method(&self) -> Result<MethodSpec> {
        Ok(self
            .method
            .resolved(self.effective_sigma(), self.problem.lipschitz()?))
    }

    /// The contraction rate proven for this configuration, if any.
    pub fn theorem_rate(&self) -> Result<Option<TheoremRate<f64>>> {
        let problem = self.problem.build::<f64>()?;
        match self.resolved_method()? {
            MethodSpec::Shang {
                regime,
                alpha,
                design_sigma,
            } => {
                let sched = shang_schedule(problem.as_ref(), regime, 0.0, alpha, design_sigma)?;
                Ok(TheoremRate::for_schedule(ShangMethod::Shang, &sched.at(0)))
            }
            MethodSpec::ShangPlusPlus {
                regime,
                m,
                alpha_tilde,
                design_sigma,
            } => {
                let sched = shang_schedule(problem.as_ref(), regime, m, alpha_tilde, design_sigma)?;
                Ok(TheoremRate::for_schedule(ShangMethod::ShangPlusPlus, &sched.at(0)))
            }
            _ => Ok(None),
        }
    }
}

fn shang_schedule<T: Scalar>(
    problem: &dyn ObjectiveProblem<T>,
    regime: Option<Regime>,
    m: f64,
    alpha_tilde: Option<f64>,
    design_sigma: Option<f64>,
) -> Result<Schedule<T>> {
    let profile = problem.profile();
    let regime = regime.unwrap_or(if profile.is_strongly_convex() {
        Regime::StronglyConvex
    } else {
        Regime::Convex
    });
    Schedule::new(
        regime,
        profile,
        T::lit(design_sigma.unwrap_or(0.0)),
        T::lit(m),
        alpha_tilde.map(T::lit),
    )
}

enum Stepper<T: Scalar> {
    Shang {
        method: ShangMethod,
        schedule: Schedule<T>,
        state: ShangState<T>,
    },
    Dl {
        alpha: T,
        gamma: T,
        m: T,
        state: DlState<T>,
    },
    Snag {
        params: SnagHnagParams<T>,
        state: SnagState<T>,
    },
    Baseline {
        method: BaselineMethod,
        lr: T,
        momentum: T,
        state: BaselineState<T>,
    },
}

impl<T: Scalar> Stepper<T> {
    fn start(
        spec: &ExperimentSpec,
        problem: &dyn ObjectiveProblem<T>,
        oracle: &mut dyn GradientOracle<T>,
    ) -> Result<Self> {
        let x0 = Point::<T>::from_f64(&spec.x0)?;
        x0.check_dim(problem.dimension())?;
        let method = spec.resolved_method()?;
        let shang = |method: ShangMethod, regime, m, alpha, design_sigma, oracle: &mut dyn GradientOracle<T>| {
            let schedule = shang_schedule(problem, regime, m, alpha, design_sigma)?;
            let state = ShangState::start(method, x0.clone(), x0.clone(), &schedule.at(0), oracle, problem)?;
            Ok::<_, Error>(Stepper::Shang {
                method,
                schedule,
                state,
            })
        };
        let baseline = |method, lr: Option<f64>, momentum: f64| -> Result<Self> {
            let lr = lr.expect("resolved");
            if !(lr > 0.0) || !(0.0..1.0).contains(&momentum) {
                return Err(Error::invalid(format!(
                    "{} needs lr > 0 and momentum in [0, 1), got lr = {lr}, momentum = {momentum}",
                    method_name(method)
                )));
            }
            Ok(Stepper::Baseline {
                method,
                lr: T::lit(lr),
                momentum: T::lit(momentum),
                state: BaselineState::start(x0.clone()),
            })
        };
        match method {
            MethodSpec::Shang {
                regime,
                alpha,
                design_sigma,
            } => shang(ShangMethod::Shang, regime, 0.0, alpha, design_sigma, oracle),
            MethodSpec::ShangPlusPlus {
                regime,
                m,
                alpha_tilde,
                design_sigma,
            } => shang(ShangMethod::ShangPlusPlus, regime, m, alpha_tilde, design_sigma, oracle),
            MethodSpec::ShangPlusPlusDl { alpha, gamma, m } => {
                if !(alpha > 0.0 && gamma > 0.0 && m >= 0.0) {
                    return Err(Error::invalid(format!(
                        "shangpp-dl needs alpha, gamma > 0 and m >= 0, got alpha = {alpha}, gamma = {gamma}, m = {m}"
                    )));
                }
                Ok(Stepper::Dl {
                    alpha: T::lit(alpha),
                    gamma: T::lit(gamma),
                    m: T::lit(m),
                    state: DlState::start(x0.clone()),
                })
            }
            MethodSpec::Snag {
                alpha,
                beta,
                gamma,
                mu,
            } => {
                if !(alpha > 0.0 && beta > 0.0 && gamma > 0.0 && mu >= 0.0) {
                    return Err(Error::invalid(format!(
                        "snag needs alpha, beta, gamma > 0 and mu >= 0, got {alpha}, {beta}, {gamma}, {mu}"
                    )));
                }
                Ok(Stepper::Snag {
                    params: SnagHnagParams {
                        alpha_next: T::lit(alpha),
                        beta_next: T::lit(beta),
                        gamma_next: T::lit(gamma),
                        mu: T::lit(mu),
                    },
                    state: SnagState::new(x0.clone(), x0.clone())?,
                })
            }
            MethodSpec::Sgd { lr } => baseline(BaselineMethod::Sgd, lr, 0.0),
            MethodSpec::Shb { lr, momentum } => baseline(BaselineMethod::Shb, lr, momentum),
            MethodSpec::Nag { lr, momentum } => baseline(BaselineMethod::Nag, lr, momentum),
        }
    }

    fn step(&mut self, problem: &dyn ObjectiveProblem<T>, oracle: &mut dyn GradientOracle<T>) -> Result<()> {
        match self {
            Stepper::Shang {
                method,
                schedule,
                state,
            } => {
                let sched = schedule.at(state.k);
                *state = method.step(state, &sched, oracle, problem)?;
            }
            Stepper::Dl {
                alpha,
                gamma,
                m,
                state,
            } => *state = shangpp_dl_step(state, *alpha, *gamma, *m, oracle, problem)?,
            Stepper::Snag { params, state } => *state = snag_step_hnag(state, params, oracle, problem)?,
            Stepper::Baseline {
                method,
                lr,
                momentum,
                state,
            } => *state = baseline_step(*method, state, *lr, *momentum, oracle, problem)?,
        }
        Ok(())
    }

    /// `(suboptimality, energy)`. For SHANG-family methods suboptimality is
    /// measured at `x+` and energy is the Lyapunov value; the other methods
    /// report `f(x) - f*` for both.
    fn measure(&self, problem: &dyn ObjectiveProblem<T>) -> Result<(f64, f64)> {
        let plain = |x: &Point<T>| -> Result<(f64, f64)> {
            let f_star = problem.minimum_value().ok_or(Error::NotBoundCheckable)?;
            let s = (problem.value(x) - f_star).as_f64();
            Ok((s, s))
        };
        match self {
            Stepper::Shang { state, .. } => {
                let rec = lyapunov_record(problem, state, T::nan())?;
                Ok((rec.suboptimality.as_f64(), rec.energy.as_f64()))
            }
            Stepper::Dl { state, .. } => plain(&state.x),
            Stepper::Snag { state, .. } => plain(&state.x),
            Stepper::Baseline { state, .. } => plain(&state.x),
        }
    }
}

fn method_name(method: BaselineMethod) -> &'static str {
    method.as_str()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub k: usize,
    pub suboptimality: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub run_index: u64,
    /// Energy at `k = 0`, after the first auxiliary iterate is formed.
    pub initial_energy: f64,
    pub records: Vec<TrajectoryRecord>,
    /// First iteration at which the run was flagged as diverged.
    pub diverged_at: Option<usize>,
}

fn diverged(subopt: f64, energy: f64) -> bool {
    !subopt.is_finite() || !energy.is_finite() || subopt > DIVERGENCE_THRESHOLD
}

/// One seeded trajectory in precision `T`.
pub fn run_trajectory<T: Scalar>(spec: &ExperimentSpec, run_index: u64) -> Result<Trajectory> {
    let problem = spec.problem.build::<T>()?;
    let problem = problem.as_ref();
    let mut oracle = MnsOracle::new(spec.oracle_config()?, run_index);
    let label = spec.method.label();
    let context = |k: usize| {
        move |e: Error| Error::Trajectory {
            method: label.to_string(),
            k,
            run_index,
            source: Box::new(e),
        }
    };

    let mut stepper = Stepper::start(spec, problem, &mut oracle).map_err(context(0))?;
    let (_, initial_energy) = stepper.measure(problem).map_err(context(0))?;
    let mut traj = Trajectory {
        run_index,
        initial_energy,
        records: Vec::with_capacity(spec.n_iters / spec.record_every + 1),
        diverged_at: None,
    };
    for k in 1..=spec.n_iters {
        stepper.step(problem, &mut oracle).map_err(context(k - 1))?;
        let (suboptimality, energy) = stepper.measure(problem).map_err(context(k))?;
        if diverged(suboptimality, energy) {
            traj.diverged_at = Some(k);
            break;
        }
        if k % spec.record_every == 0 || k == spec.n_iters {
            traj.records.push(TrajectoryRecord {
                k,
                suboptimality,
                energy,
            });
        }
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Serial,
    /// Runs trajectories on the rayon pool; `jobs` caps the thread count.
    Parallel { jobs: Option<usize> },
}

/// Aggregates at one recorded iteration. Runs that diverged at or before
/// `k` are excluded from the means and counted in `diverged_runs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatRow {
    pub k: usize,
    pub mean_subopt: f64,
    pub std_subopt: f64,
    pub mean_energy: f64,
    pub std_energy: f64,
    pub bound: f64,
    pub n_runs: usize,
    pub diverged_runs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStats {
    pub method: String,
    pub problem: String,
    pub sigma: f64,
    pub rows: Vec<StatRow>,
    pub mean_initial_energy: f64,
    pub std_initial_energy: f64,
    pub n_runs: usize,
    pub diverged_runs: usize,
    pub rate: Option<TheoremRate<f64>>,
}

impl TrajectoryStats {
    /// Every run diverged: the experiment produced no usable statistics.
    pub fn failed(&self) -> bool {
        self.diverged_runs == self.n_runs
    }

    pub fn final_row(&self) -> Option<&StatRow> {
        self.rows.last()
    }

    pub fn mean_energies(&self) -> Vec<MeanEnergy> {
        self.rows
            .iter()
            .map(|r| MeanEnergy {
                k: r.k,
                mean: r.mean_energy,
                std_dev: r.std_energy,
                n_runs: r.n_runs,
            })
            .collect()
    }

    /// Theorem envelope at `k` for the mean initial energy, or NaN when no
    /// rate is proven for this method.
    pub fn envelope(&self, k: usize) -> f64 {
        self.rate
            .map(|r| r.envelope(k, self.mean_initial_energy))
            .unwrap_or(f64::NAN)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.k,
                fmt_float(r.mean_subopt),
                fmt_float(r.std_subopt),
                fmt_float(r.mean_energy),
                fmt_float(r.std_energy),
                fmt_float(r.bound),
                r.n_runs,
                r.diverged_runs
            ));
        }
        out
    }
}

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    fn std_dev(&self) -> f64 {
        match self.n {
            0 => f64::NAN,
            1 => 0.0,
            n => (self.m2 / (n - 1) as f64).sqrt(),
        }
    }
}

fn collect_runs<T: Scalar>(spec: &ExperimentSpec, exec: Execution) -> Result<Vec<Trajectory>> {
    let n = spec.n_runs as u64;
    match exec {
        Execution::Serial => (0..n).map(|r| run_trajectory::<T>(spec, r)).collect(),
        Execution::Parallel { jobs } => {
            let run = || {
                (0..n)
                    .into_par_iter()
                    .map(|r| run_trajectory::<T>(spec, r))
                    .collect::<Vec<_>>()
            };
            let results = match jobs {
                Some(j) => rayon::ThreadPoolBuilder::new()
                    .num_threads(j.max(1))
                    .build()
                    .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
                    .install(run),
                None => run(),
            };
            results.into_iter().collect()
        }
    }
}

/// Runs `n_runs` trajectories and aggregates them in run-index order.
pub fn run_monte_carlo<T: Scalar>(spec: &ExperimentSpec, exec: Execution) -> Result<TrajectoryStats> {
    spec.validate()?;
    let runs = collect_runs::<T>(spec, exec)?;
    let rate = spec.theorem_rate()?;

    let mut e0 = Welford::default();
    for run in &runs {
        e0.push(run.initial_energy);
    }
    let mean_initial_energy = e0.mean();

    let record_ks: Vec<usize> = (1..=spec.n_iters)
        .filter(|k| k % spec.record_every == 0 || *k == spec.n_iters)
        .collect();
    let mut rows = Vec::with_capacity(record_ks.len());
    for (j, &k) in record_ks.iter().enumerate() {
        let (mut subopt, mut energy) = (Welford::default(), Welford::default());
        let mut diverged_runs = 0;
        for run in &runs {
            match run.records.get(j) {
                Some(rec) if run.diverged_at.is_none_or(|d| d > k) => {
                    debug_assert_eq!(rec.k, k);
                    subopt.push(rec.suboptimality);
                    energy.push(rec.energy);
                }
                _ => diverged_runs += 1,
            }
        }
        rows.push(StatRow {
            k,
            mean_subopt: subopt.mean(),
            std_subopt: subopt.std_dev(),
            mean_energy: energy.mean(),
            std_energy: energy.std_dev(),
            bound: rate.map_or(f64::NAN, |r| r.envelope(k, mean_initial_energy)),
            n_runs: subopt.n,
            diverged_runs,
        });
    }

    Ok(TrajectoryStats {
        method: spec.method.label().to_string(),
        problem: spec.problem.label(),
        sigma: spec.sigma,
        rows,
        mean_initial_energy,
        std_initial_energy: e0.std_dev(),
        n_runs: spec.n_runs,
        diverged_runs: runs.iter().filter(|r| r.diverged_at.is_some()).count(),
        rate,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub method: String,
    pub sigma: f64,
    pub final_mean_subopt: f64,
    /// `(E(sigma) - E(0)) / E(0)` on the final mean suboptimality.
    pub delta: f64,
    /// `log10(E(sigma) / E(0))`.
    pub log10_ratio: f64,
    pub diverged_runs: usize,
    pub n_runs: usize,
}

impl SweepRow {
    pub fn diverged(&self) -> bool {
        self.diverged_runs > 0 || !self.final_mean_subopt.is_finite()
    }
}

/// Runs `base` at each noise level with hyperparameters frozen at the values
/// resolved for `base.sigma`, and reports the relative degradation of the
/// final mean suboptimality against the noiseless run.
pub fn sigma_sweep<T: Scalar>(base: &ExperimentSpec, sigmas: &[f64], exec: Execution) -> Result<Vec<SweepRow>> {
    if !sigmas.contains(&0.0) {
        return Err(Error::InvalidSweep("the sigma list must contain 0".into()));
    }
    if let Some(bad) = sigmas.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        return Err(Error::InvalidSweep(format!("invalid sigma {bad}")));
    }
    let frozen = base.resolved_method()?;
    let finals = sigmas
        .iter()
        .map(|&sigma| {
            let spec = ExperimentSpec {
                sigma,
                method: frozen.clone(),
                ..base.clone()
            };
            let stats = run_monte_carlo::<T>(&spec, exec)?;
            let last = stats.final_row().copied();
            Ok((
                sigma,
                last.map_or(f64::NAN, |r| r.mean_subopt),
                stats.diverged_runs,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let anchor = finals
        .iter()
        .find(|(s, _, _)| *s == 0.0)
        .map(|f| f.1)
        .expect("sigma = 0 present");
    Ok(finals
        .into_iter()
        .map(|(sigma, value, diverged_runs)| {
            let (delta, log10_ratio) = if sigma == 0.0 {
                (0.0, 0.0)
            } else {
                ((value - anchor) / anchor, (value / anchor).log10())
            };
            SweepRow {
                method: base.method.label().to_string(),
                sigma,
                final_mean_subopt: value,
                delta,
                log10_ratio,
                diverged_runs,
                n_runs: base.n_runs,
            }
        })
        .collect())
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method,
            fmt_float(r.sigma),
            fmt_float(r.final_mean_subopt),
            fmt_float(r.delta),
            r.diverged_runs
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn half_square() -> ProblemSpec {
        ProblemSpec::Quadratic {
            eigenvalues: vec![1.0],
            center: vec![0.0],
        }
    }

    #[test]
    fn sgd_geometric_decay() {
        let mut spec = ExperimentSpec::new(half_square(), MethodSpec::Sgd { lr: Some(0.1) });
        spec.n_iters = 10;
        let t = run_trajectory::<f64>(&spec, 0).unwrap();
        assert_eq!(t.records.len(), 10);
        let last = t.records.last().unwrap();
        assert_eq!(last.k, 10);
        assert_relative_eq!(last.suboptimality, 0.5 * 0.9f64.powi(20), max_relative = 1e-12);
    }

    #[test]
    fn deterministic_runs_repeat() {
        let mut spec = ExperimentSpec::new(ProblemSpec::Fd { exponent: 4 }, MethodSpec::shangpp(1.0));
        spec.n_iters = 50;
        spec.sigma = 10.0;
        assert_eq!(run_trajectory::<f64>(&spec, 3).unwrap(), run_trajectory::<f64>(&spec, 3).unwrap());
        assert_ne!(run_trajectory::<f64>(&spec, 3).unwrap(), run_trajectory::<f64>(&spec, 4).unwrap());
    }

    #[test]
    fn single_run_has_zero_spread() {
        let mut spec = ExperimentSpec::new(ProblemSpec::Fd { exponent: 4 }, MethodSpec::shang());
        spec.n_runs = 1;
        spec.n_iters = 20;
        spec.sigma = 1.0;
        let stats = run_monte_carlo::<f64>(&spec, Execution::Serial).unwrap();
        let t = run_trajectory::<f64>(&spec, 0).unwrap();
        for (row, rec) in stats.rows.iter().zip(&t.records) {
            assert_eq!(row.mean_energy, rec.energy);
            assert_eq!(row.std_energy, 0.0);
            assert_eq!(row.std_subopt, 0.0);
        }
    }

    #[test]
    fn noiseless_runs_agree() {
        let mut spec = ExperimentSpec::new(ProblemSpec::Fd { exponent: 4 }, MethodSpec::shang());
        spec.n_iters = 30;
        let stats = run_monte_carlo::<f64>(&spec, Execution::Parallel { jobs: Some(4) }).unwrap();
        assert!(stats.rows.iter().all(|r| r.std_energy == 0.0 && r.std_subopt == 0.0));
        assert_eq!(stats.std_initial_energy, 0.0);
    }

    #[test]
    fn record_stride_keeps_final_iterate() {
        let mut spec = ExperimentSpec::new(half_square(), MethodSpec::Sgd { lr: Some(0.1) });
        spec.n_iters = 25;
        spec.record_every = 10;
        let ks: Vec<usize> = run_trajectory::<f64>(&spec, 0).unwrap().records.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![10, 20, 25]);
    }

    #[test]
    fn divergence_is_flagged_and_excluded() {
        // lr = 3 on f = x^2/2 multiplies x by -2 each step
        let mut spec = ExperimentSpec::new(half_square(), MethodSpec::Sgd { lr: Some(3.0) });
        spec.n_runs = 2;
        spec.n_iters = 100;
        let stats = run_monte_carlo::<f64>(&spec, Execution::Serial).unwrap();
        assert!(stats.failed());
        assert_eq!(stats.diverged_runs, 2);
        let t = run_trajectory::<f64>(&spec, 0).unwrap();
        // 0.5 * 4^k > 1e12 first at k = 21
        assert_eq!(t.diverged_at, Some(21));
        let last = stats.final_row().unwrap();
        assert_eq!(last.n_runs, 0);
        assert_eq!(last.diverged_runs, 2);
        assert!(last.mean_subopt.is_nan());
        assert_eq!(stats.rows[19].n_runs, 2);
    }

    #[test]
    fn validation_errors() {
        let mut spec = ExperimentSpec::new(half_square(), MethodSpec::shang());
        spec.x0 = vec![1.0, 2.0];
        assert!(spec.validate().is_err());

        let mut spec = ExperimentSpec::new(half_square(), MethodSpec::shang());
        spec.budget = 10;
        assert!(spec.validate().is_err());

        let spec = ExperimentSpec::new(half_square(), MethodSpec::Nag { lr: None, momentum: 1.5 });
        assert!(spec.validate().is_err());

        let spec = ExperimentSpec::new(
            ProblemSpec::Fd { exponent: 4 },
            MethodSpec::Shang { regime: Some(Regime::StronglyConvex), alpha: None, design_sigma: None },
        );
        assert!(spec.validate().is_err());
    }

    #[test]
    fn csv_layout() {
        let mut spec = ExperimentSpec::new(half_square(), MethodSpec::shang());
        spec.n_runs = 1;
        spec.n_iters = 10;
        let stats = run_monte_carlo::<f64>(&spec, Execution::Serial).unwrap();
        let csv = stats.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 11);
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first.len(), 8);
        assert_eq!(first[0], "1");
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn sweep_requires_zero_anchor() {
        let spec = ExperimentSpec::new(half_square(), MethodSpec::shang());
        assert!(matches!(
            sigma_sweep::<f64>(&spec, &[0.1, 0.2], Execution::Serial),
            Err(Error::InvalidSweep(_))
        ));
    }

    #[test]
    fn sweep_with_only_zero_has_zero_delta() {
        let mut spec = ExperimentSpec::new(half_square(), MethodSpec::shang());
        spec.n_runs = 2;
        spec.n_iters = 10;
        let rows = sigma_sweep::<f64>(&spec, &[0.0], Execution::Serial).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].delta, 0.0);
    }

    #[test]
    fn resolved_methods_freeze_defaults() {
        let m = MethodSpec::Nag { lr: None, momentum: 0.9 }.resolved(1.0, 12.0);
        assert_eq!(m, MethodSpec::Nag { lr: Some(1.0 / 24.0), momentum: 0.9 });
        let m = MethodSpec::shangpp(1.0).resolved(0.5, 1.0);
        assert!(matches!(m, MethodSpec::ShangPlusPlus { design_sigma: Some(s), .. } if s == 0.5));
    }
}
