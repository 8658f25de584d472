//! Lyapunov energy, theorem rate envelopes and statistical checks of the
//! descent and contraction properties.

use crate::error::{Error, Result};
use crate::noise::{sample_noisy_gradient, MnsEstimate, MnsOracleConfig, NoiseStream};
use crate::objective::ObjectiveProblem;
use crate::optimizers::{Regime, ScheduleParams, ShangMethod, ShangState};
use crate::point::Point;
use crate::scalar::Scalar;

/// Energy `E(z+; gamma) = f(x+) - f* + gamma/2 |v - x*|^2` and its parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovRecord<T> {
    pub k: usize,
    pub energy: T,
    pub suboptimality: T,
    pub v_distance_sq: T,
    pub bound: T,
}

pub fn lyapunov<T, P>(problem: &P, state: &ShangState<T>) -> Result<T>
where
    T: Scalar,
    P: ObjectiveProblem<T> + ?Sized,
{
    Ok(lyapunov_record(problem, state, T::nan())?.energy)
}

pub fn lyapunov_record<T, P>(problem: &P, state: &ShangState<T>, bound: T) -> Result<LyapunovRecord<T>>
where
    T: Scalar,
    P: ObjectiveProblem<T> + ?Sized,
{
    let (x_star, f_star) = match (problem.minimizer(), problem.minimum_value()) {
        (Some(x), Some(f)) => (x, f),
        _ => return Err(Error::NotBoundCheckable),
    };
    let suboptimality = problem.value(&state.x_plus) - f_star;
    let v_distance_sq = state.v.distance_sq(x_star);
    Ok(LyapunovRecord {
        k: state.k,
        energy: suboptimality + T::lit(0.5) * state.gamma * v_distance_sq,
        suboptimality,
        v_distance_sq,
        bound,
    })
}

/// Rate with which the expected energy contracts, by method and regime.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TheoremRate<T> {
    /// SHANG, strongly convex: `(1 + alpha)^-(k+1)`.
    ShangStronglyConvex { alpha: T },
    /// SHANG++ with `m = 1`, strongly convex: `(1 - alpha_tilde)^(k+1)`.
    ShangPlusPlusStronglyConvex { alpha_tilde: T },
    /// SHANG (`m = 0`) and SHANG++, convex:
    /// `(1+2m)(2+2m) / ((k+2+2m)(k+3+2m))`.
    Convex { m: T },
}

impl<T: Scalar> TheoremRate<T> {
    /// The rate that applies to `method` run on schedule `sched`.
    ///
    /// Strongly convex SHANG++ is only covered for `m = 1`; other
    /// corrections have no proven envelope and yield `None`.
    pub fn for_schedule(method: ShangMethod, sched: &ScheduleParams<T>) -> Option<Self> {
        match (sched.regime, method) {
            (Regime::Convex, _) => Some(TheoremRate::Convex { m: sched.m }),
            (Regime::StronglyConvex, ShangMethod::Shang) => {
                Some(TheoremRate::ShangStronglyConvex { alpha: sched.alpha })
            }
            (Regime::StronglyConvex, ShangMethod::ShangPlusPlus) if sched.m == T::one() => {
                Some(TheoremRate::ShangPlusPlusStronglyConvex {
                    alpha_tilde: sched.alpha_tilde,
                })
            }
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            TheoremRate::ShangStronglyConvex { alpha } => alpha > T::zero() && alpha.is_finite(),
            TheoremRate::ShangPlusPlusStronglyConvex { alpha_tilde } => {
                alpha_tilde > T::zero() && alpha_tilde < T::one()
            }
            TheoremRate::Convex { m } => m >= T::zero() && m.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("rate parameters out of range: {self:?}")))
        }
    }

    /// Factor multiplying `E_0` in the bound on `E_{k+1}`.
    pub fn factor(&self, k: usize) -> T {
        let steps = T::lit((k + 1) as f64);
        match *self {
            TheoremRate::ShangStronglyConvex { alpha } => (-steps * alpha.ln_1p()).exp(),
            TheoremRate::ShangPlusPlusStronglyConvex { alpha_tilde } => {
                (steps * (-alpha_tilde).ln_1p()).exp()
            }
            TheoremRate::Convex { m } => {
                let (one, two, three) = (T::one(), T::lit(2.0), T::lit(3.0));
                let kk = T::lit(k as f64);
                let two_m = two * m;
                (one + two_m) * (two + two_m) / ((kk + two + two_m) * (kk + three + two_m))
            }
        }
    }

    /// Bound on the expected energy after `k` steps; `E_0` at `k = 0`.
    pub fn envelope(&self, k: usize, e0: T) -> T {
        if k == 0 {
            e0
        } else {
            self.factor(k - 1) * e0
        }
    }
}

/// Right-hand side of the contraction theorem: the bound on
/// `E[E(z+_{k+1}; gamma_{k+1})]` given the initial energy `e0`.
pub fn theorem_bound<T: Scalar>(rate: &TheoremRate<T>, k: usize, e0: T) -> Result<T> {
    rate.validate()?;
    if !(e0 >= T::zero()) || !e0.is_finite() {
        return Err(Error::invalid(format!("initial energy must be finite and >= 0, got {e0}")));
    }
    Ok(rate.factor(k) * e0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentReport {
    /// Monte-Carlo mean of `f(x+)`.
    pub mean_lhs: f64,
    pub std_error: f64,
    /// `f(x) - (alpha beta / 2) |grad f(x)|^2`
    pub rhs: f64,
    pub pass: bool,
}

/// Checks `E f(x - s g(x)) <= f(x) - (s/2)|grad f(x)|^2` for a single-step
/// size `s = alpha beta` in the admissible range `(0, 1/(L(1 + sigma^2/K))]`.
///
/// Passes when the sample mean exceeds the right-hand side by at most three
/// standard errors (plus a `1e-12` relative rounding floor).
pub fn descent_check<T, P>(
    problem: &P,
    x: &Point<T>,
    config: &MnsOracleConfig,
    stream: &mut NoiseStream,
    alpha_beta: f64,
    n_samples: usize,
) -> Result<DescentReport>
where
    T: Scalar,
    P: ObjectiveProblem<T> + ?Sized,
{
    x.check_dim(problem.dimension())?;
    let l = problem.profile().l().as_f64();
    let max_step = 1.0 / (l * (1.0 + config.effective_mns_constant()));
    if !(alpha_beta > 0.0) || alpha_beta > max_step * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "alpha*beta = {alpha_beta} outside (0, {max_step}]"
        )));
    }
    if n_samples == 0 {
        return Err(Error::Precondition("n_samples must be positive".into()));
    }
    let grad = problem.gradient(x);
    let grad_sq = grad.norm_sq().as_f64();
    if grad_sq == 0.0 {
        return Err(Error::ZeroGradient);
    }
    let fx = problem.value(x).as_f64();
    let step = T::lit(alpha_beta);
    let est = MnsEstimate::from_samples((0..n_samples).map(|_| {
        let g = sample_noisy_gradient(config, stream, &grad);
        problem.value(&x.axpy(-step, &g)).as_f64()
    }));
    let rhs = fx - 0.5 * alpha_beta * grad_sq;
    let pass = est.value <= rhs + 3.0 * est.std_error + 1e-12 * (1.0 + fx.abs());
    Ok(DescentReport {
        mean_lhs: est.value,
        std_error: est.std_error,
        rhs,
        pass,
    })
}

/// Monte-Carlo mean energy at one recorded iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanEnergy {
    pub k: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub n_runs: usize,
}

impl MeanEnergy {
    pub fn relative_std_error(&self) -> f64 {
        if self.n_runs == 0 || self.mean <= 0.0 {
            0.0
        } else {
            self.std_dev / ((self.n_runs as f64).sqrt() * self.mean)
        }
    }
}

/// How much a mean may exceed the envelope: the allowed relative excess at
/// `k` is `max(min_relative_slack, se_multiplier * relative SE at k)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TolerancePolicy {
    pub min_relative_slack: f64,
    pub se_multiplier: f64,
    pub min_runs: usize,
}

impl TolerancePolicy {
    /// 5% or three relative standard errors, over at least 100 runs.
    pub fn stochastic() -> Self {
        Self {
            min_relative_slack: 0.05,
            se_multiplier: 3.0,
            min_runs: 100,
        }
    }

    /// Pointwise comparison of a single noiseless trajectory.
    pub fn deterministic(relative_slack: f64) -> Self {
        Self {
            min_relative_slack: relative_slack,
            se_multiplier: 0.0,
            min_runs: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContractionReport {
    pub pass: bool,
    pub checked: usize,
    pub first_violation: Option<usize>,
    /// Largest `mean / envelope` over all checked iterations.
    pub worst_ratio: f64,
    pub worst_k: usize,
}

/// Checks that every recorded mean energy lies below `bound(k)` up to the
/// policy's slack.
pub fn contraction_check(
    records: &[MeanEnergy],
    bound: impl Fn(usize) -> f64,
    policy: &TolerancePolicy,
) -> Result<ContractionReport> {
    if let Some(r) = records.iter().find(|r| r.n_runs < policy.min_runs) {
        return Err(Error::InsufficientStatistics {
            runs: r.n_runs,
            required: policy.min_runs,
        });
    }
    let mut report = ContractionReport {
        pass: true,
        checked: 0,
        first_violation: None,
        worst_ratio: f64::NEG_INFINITY,
        worst_k: 0,
    };
    for r in records {
        let b = bound(r.k);
        let slack = policy
            .min_relative_slack
            .max(policy.se_multiplier * r.relative_std_error());
        let ok = r.mean.is_finite() && r.mean <= b * (1.0 + slack);
        let ratio = if b > 0.0 {
            r.mean / b
        } else if r.mean <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if !(ratio <= report.worst_ratio) {
            report.worst_ratio = ratio;
            report.worst_k = r.k;
        }
        report.checked += 1;
        if !ok && report.first_violation.is_none() {
            report.first_violation = Some(r.k);
            report.pass = false;
        }
    }
    Ok(report)
}
