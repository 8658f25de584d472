//! Objective functions with smoothness metadata, Bregman divergences and the
//! gradient-oracle contract the optimizers consume.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::scalar::Scalar;

/// Strong-convexity modulus `mu` and gradient Lipschitz constant `l`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothnessProfile<T> {
    mu: T,
    l: T,
}

impl<T: Scalar> SmoothnessProfile<T> {
    pub fn new(mu: T, l: T) -> Result<Self> {
        if !(l > T::zero()) || !l.is_finite() {
            return Err(Error::invalid(format!("L must be positive and finite, got {l}")));
        }
        if !(mu >= T::zero()) || mu > l {
            return Err(Error::invalid(format!("need 0 <= mu <= L, got mu = {mu}, L = {l}")));
        }
        Ok(Self { mu, l })
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn l(&self) -> T {
        self.l
    }

    pub fn is_strongly_convex(&self) -> bool {
        self.mu > T::zero()
    }

    pub fn condition_number(&self) -> T {
        self.l / self.mu
    }
}

/// A smooth convex objective.
///
/// Problems that know their minimizer expose it through [`minimizer`] and
/// [`minimum_value`]; only those can be used for Lyapunov bound checks.
///
/// [`minimizer`]: ObjectiveProblem::minimizer
/// [`minimum_value`]: ObjectiveProblem::minimum_value
pub trait ObjectiveProblem<T: Scalar>: Send + Sync {
    fn dimension(&self) -> usize;

    fn profile(&self) -> SmoothnessProfile<T>;

    fn value(&self, x: &Point<T>) -> T;

    fn gradient(&self, x: &Point<T>) -> Point<T>;

    fn minimizer(&self) -> Option<&Point<T>> {
        None
    }

    fn minimum_value(&self) -> Option<T> {
        None
    }

    /// Short identifier used in reports and file names.
    fn label(&self) -> String;
}

/// Produces gradient estimates from the exact gradient at the query point.
pub trait GradientOracle<T: Scalar> {
    fn sample(&mut self, true_gradient: &Point<T>) -> Point<T>;
}

/// Noiseless oracle: returns the exact gradient.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactOracle;

impl<T: Scalar> GradientOracle<T> for ExactOracle {
    fn sample(&mut self, true_gradient: &Point<T>) -> Point<T> {
        true_gradient.clone()
    }
}

impl<T: Scalar, O: GradientOracle<T> + ?Sized> GradientOracle<T> for &mut O {
    fn sample(&mut self, true_gradient: &Point<T>) -> Point<T> {
        (**self).sample(true_gradient)
    }
}

/// `D_f(y, x) = f(y) - f(x) - <grad f(x), y - x>`.
pub fn bregman_divergence<T: Scalar, P: ObjectiveProblem<T> + ?Sized>(
    problem: &P,
    y: &Point<T>,
    x: &Point<T>,
) -> Result<T> {
    let d = problem.dimension();
    y.check_dim(d)?;
    x.check_dim(d)?;
    Ok(bregman_unchecked(problem, y, x))
}

fn bregman_unchecked<T: Scalar, P: ObjectiveProblem<T> + ?Sized>(
    problem: &P,
    y: &Point<T>,
    x: &Point<T>,
) -> T {
    problem.value(y) - problem.value(x) - problem.gradient(x).dot(&y.sub(x))
}

/// `<grad f(y) - grad f(x), y - z> - [D_f(z, y) + D_f(y, x) - D_f(z, x)]`.
///
/// The identity holds for every differentiable `f`, so the residual is pure
/// rounding error.
pub fn three_point_identity_residual<T: Scalar, P: ObjectiveProblem<T> + ?Sized>(
    problem: &P,
    x: &Point<T>,
    y: &Point<T>,
    z: &Point<T>,
) -> Result<T> {
    let d = problem.dimension();
    x.check_dim(d)?;
    y.check_dim(d)?;
    z.check_dim(d)?;
    let lhs = problem.gradient(y).sub(&problem.gradient(x)).dot(&y.sub(z));
    let rhs = bregman_unchecked(problem, z, y) + bregman_unchecked(problem, y, x)
        - bregman_unchecked(problem, z, x);
    Ok(lhs - rhs)
}

/// Worst-case violations found by [`probe_invariants`]. Positive excess
/// values mean an invariant failed.
#[derive(Clone, Copy, Debug, Default)]
pub struct ProbeReport {
    pub probes: usize,
    /// max of `|grad f(y) - grad f(x)| - L |y - x|`
    pub lipschitz_excess: f64,
    /// max of `mu/2 |x-y|^2 - D_f(x, y)` after subtracting the rounding floor
    pub bregman_lower_excess: f64,
    /// max of `D_f(x, y) - L/2 |x-y|^2`
    pub bregman_upper_excess: f64,
    /// max of `|three-point residual| / (1 + |f(x)| + |f(y)| + |f(z)|)`
    pub three_point_scaled: f64,
    /// min of `f(x) - f*` over probes, when the minimum is known
    pub min_value_gap: f64,
    /// `|grad f(x*)|`, when the minimizer is known
    pub minimizer_gradient_norm: f64,
}

impl ProbeReport {
    pub const LIPSCHITZ_SLACK: f64 = 1e-9;
    pub const BREGMAN_SLACK: f64 = 1e-9;
    pub const THREE_POINT_TOL: f64 = 1e-10;

    pub fn holds(&self, l: f64) -> bool {
        self.lipschitz_excess <= Self::LIPSCHITZ_SLACK
            && self.bregman_lower_excess <= 0.0
            && self.bregman_upper_excess <= Self::BREGMAN_SLACK
            && self.three_point_scaled <= Self::THREE_POINT_TOL
            && self.min_value_gap >= 0.0
            && self.minimizer_gradient_norm <= 1e-12 * l.max(1.0)
    }
}

/// Checks smoothness, strong convexity, the three-point identity and the
/// minimizer metadata at `n_probes` random points drawn uniformly from
/// `[-half_width, half_width]^d`.
pub fn probe_invariants<T: Scalar, P: ObjectiveProblem<T> + ?Sized>(
    problem: &P,
    n_probes: usize,
    half_width: f64,
    seed: u64,
) -> ProbeReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = problem.dimension();
    let profile = problem.profile();
    let (mu, l) = (profile.mu().as_f64(), profile.l().as_f64());
    let draw = |rng: &mut ChaCha8Rng| {
        Point::<T>::from_vec_unchecked(
            (0..d)
                .map(|_| T::lit(rng.random_range(-half_width..=half_width)))
                .collect(),
        )
    };

    let mut report = ProbeReport {
        probes: n_probes,
        lipschitz_excess: f64::NEG_INFINITY,
        bregman_lower_excess: f64::NEG_INFINITY,
        bregman_upper_excess: f64::NEG_INFINITY,
        three_point_scaled: 0.0,
        min_value_gap: f64::INFINITY,
        minimizer_gradient_norm: 0.0,
    };
    let f_star = problem.minimum_value().map(Scalar::as_f64);
    if let Some(x_star) = problem.minimizer() {
        report.minimizer_gradient_norm = problem.gradient(x_star).norm().as_f64();
    }

    for _ in 0..n_probes {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let z = draw(&mut rng);
        let (fx, fy, fz) = (
            problem.value(&x).as_f64(),
            problem.value(&y).as_f64(),
            problem.value(&z).as_f64(),
        );
        let dist_sq = x.distance_sq(&y).as_f64();

        let grad_gap = problem
            .gradient(&y)
            .sub(&problem.gradient(&x))
            .norm()
            .as_f64();
        report.lipschitz_excess = report
            .lipschitz_excess
            .max(grad_gap - l * dist_sq.sqrt());

        let breg = bregman_unchecked(problem, &x, &y).as_f64();
        let rounding_floor = 1e-12 * (1.0 + fx.abs() + fy.abs());
        report.bregman_lower_excess = report
            .bregman_lower_excess
            .max(0.5 * mu * dist_sq - breg - rounding_floor);
        report.bregman_upper_excess = report
            .bregman_upper_excess
            .max(breg - 0.5 * l * dist_sq);

        let residual = three_point_identity_residual(problem, &x, &y, &z)
            .map(Scalar::as_f64)
            .unwrap_or(f64::INFINITY);
        report.three_point_scaled = report
            .three_point_scaled
            .max(residual.abs() / (1.0 + fx.abs() + fy.abs() + fz.abs()));

        if let Some(f_star) = f_star {
            report.min_value_gap = report.min_value_gap.min(fx - f_star);
        }
    }
    if f_star.is_none() {
        report.min_value_gap = 0.0;
    }
    report
}
