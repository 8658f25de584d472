use super::schedule::ScheduleParams;
use crate::error::{Error, Result};
use crate::objective::{GradientOracle, ObjectiveProblem};
use crate::point::Point;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShangMethod {
    Shang,
    ShangPlusPlus,
}

impl ShangMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ShangMethod::Shang => "shang",
            ShangMethod::ShangPlusPlus => "shangpp",
        }
    }

    fn x_stepsize<T: Scalar>(self, sched: &ScheduleParams<T>) -> T {
        match self {
            ShangMethod::Shang => sched.alpha,
            ShangMethod::ShangPlusPlus => sched.alpha_tilde,
        }
    }

    fn aux_step_next<T: Scalar>(self, sched: &ScheduleParams<T>) -> T {
        let a = match self {
            ShangMethod::Shang => sched.alpha_next,
            ShangMethod::ShangPlusPlus => sched.alpha_tilde_next,
        };
        a * sched.beta_next
    }

    fn check<T: Scalar>(self, sched: &ScheduleParams<T>) -> Result<()> {
        if self == ShangMethod::Shang && sched.m != T::zero() {
            return Err(Error::invalid(format!(
                "SHANG takes no correction term, schedule has m = {}",
                sched.m
            )));
        }
        Ok(())
    }

    pub fn step<T: Scalar, P, O>(
        self,
        state: &ShangState<T>,
        sched: &ScheduleParams<T>,
        oracle: &mut O,
        problem: &P,
    ) -> Result<ShangState<T>>
    where
        P: ObjectiveProblem<T> + ?Sized,
        O: GradientOracle<T> + ?Sized,
    {
        match self {
            ShangMethod::Shang => shang_step(state, sched, oracle, problem),
            ShangMethod::ShangPlusPlus => shangpp_step(state, sched, oracle, problem),
        }
    }
}

/// Iterates of SHANG / SHANG++ at index `k`.
///
/// `last_g` is the gradient sample drawn at `x`; it formed `x_plus` and is
/// reused by the next `x`-update, so each evaluation point costs exactly one
/// oracle draw. `gamma` is the Lyapunov weight at `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShangState<T> {
    pub x: Point<T>,
    pub v: Point<T>,
    pub x_plus: Point<T>,
    pub gamma: T,
    pub k: usize,
    pub last_g: Point<T>,
}

impl<T: Scalar> ShangState<T> {
    /// Draws `g(x0)` and forms `x+_0 = x0 - step_0 g(x0)`.
    pub fn start<P, O>(
        method: ShangMethod,
        x0: Point<T>,
        v0: Point<T>,
        sched: &ScheduleParams<T>,
        oracle: &mut O,
        problem: &P,
    ) -> Result<Self>
    where
        P: ObjectiveProblem<T> + ?Sized,
        O: GradientOracle<T> + ?Sized,
    {
        method.check(sched)?;
        let d = problem.dimension();
        x0.check_dim(d)?;
        v0.check_dim(d)?;
        let g0 = oracle.sample(&problem.gradient(&x0));
        let step = method.x_stepsize(sched) * sched.beta;
        Ok(Self {
            x_plus: x0.axpy(-step, &g0),
            x: x0,
            v: v0,
            gamma: sched.energy_gamma(),
            k: sched.k,
            last_g: g0,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.v.is_finite() && self.x_plus.is_finite()
    }
}

fn advance<T, P, O>(
    method: ShangMethod,
    state: &ShangState<T>,
    sched: &ScheduleParams<T>,
    oracle: &mut O,
    problem: &P,
) -> Result<ShangState<T>>
where
    T: Scalar,
    P: ObjectiveProblem<T> + ?Sized,
    O: GradientOracle<T> + ?Sized,
{
    if state.k != sched.k {
        return Err(Error::ScheduleMismatch {
            state: state.k,
            schedule: sched.k,
        });
    }
    method.check(sched)?;
    let one = T::one();

    // (x_{k+1} - x_k)/a = v_k - x_{k+1} - beta_k g_k, solved for x_{k+1}
    let a = method.x_stepsize(sched);
    let a_beta = a * sched.beta;
    let x_scale = one + a;
    let x: Vec<T> = state
        .x
        .as_slice()
        .iter()
        .zip(state.v.as_slice())
        .zip(state.last_g.as_slice())
        .map(|((&x, &v), &g)| (x + a * v - a_beta * g) / x_scale)
        .collect();
    let x = Point::from_vec_unchecked(x);

    let g = oracle.sample(&problem.gradient(&x));

    // (v_{k+1} - v_k)/alpha = mu/gamma (x_{k+1} - v_{k+1}) - g_{k+1}/gamma
    let coupling = sched.alpha * sched.mu / sched.gamma;
    let grad_step = sched.alpha / sched.gamma;
    let v_scale = one + coupling;
    let v: Vec<T> = state
        .v
        .as_slice()
        .iter()
        .zip(x.as_slice())
        .zip(g.as_slice())
        .map(|((&v, &x), &g)| (v + coupling * x - grad_step * g) / v_scale)
        .collect();

    let x_plus = x.axpy(-method.aux_step_next(sched), &g);
    Ok(ShangState {
        x,
        v: Point::from_vec_unchecked(v),
        x_plus,
        gamma: sched.energy_gamma_next(),
        k: state.k + 1,
        last_g: g,
    })
}

/// One SHANG step (Gauss-Seidel discretization of the Hessian-driven
/// Nesterov flow). Both implicit updates are affine in the unknown and are
/// solved in closed form.
pub fn shang_step<T, P, O>(
    state: &ShangState<T>,
    sched: &ScheduleParams<T>,
    oracle: &mut O,
    problem: &P,
) -> Result<ShangState<T>>
where
    T: Scalar,
    P: ObjectiveProblem<T> + ?Sized,
    O: GradientOracle<T> + ?Sized,
{
    advance(ShangMethod::Shang, state, sched, oracle, problem)
}

/// One SHANG++ step: the `x`-update uses `alpha_tilde = alpha / (1 + m alpha)`,
/// equivalent to adding the damping term `-m (x_{k+1} - x_k)` to SHANG's
/// `x`-update. With `m = 0` this is bitwise identical to [`shang_step`].
pub fn shangpp_step<T, P, O>(
    state: &ShangState<T>,
    sched: &ScheduleParams<T>,
    oracle: &mut O,
    problem: &P,
) -> Result<ShangState<T>>
where
    T: Scalar,
    P: ObjectiveProblem<T> + ?Sized,
    O: GradientOracle<T> + ?Sized,
{
    advance(ShangMethod::ShangPlusPlus, state, sched, oracle, problem)
}
