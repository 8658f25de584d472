use crate::error::{Error, Result};
use crate::objective::{GradientOracle, ObjectiveProblem};
use crate::point::Point;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaselineMethod {
    Sgd,
    /// Stochastic heavy ball (SGD with momentum).
    Shb,
    /// Stochastic Nesterov accelerated gradient.
    Nag,
}

impl BaselineMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMethod::Sgd => "sgd",
            BaselineMethod::Shb => "shb",
            BaselineMethod::Nag => "nag",
        }
    }
}

/// For SHB the buffer is the accumulated gradient; for NAG it is the last
/// displacement `x_k - x_{k-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineState<T> {
    pub x: Point<T>,
    pub momentum_buffer: Point<T>,
    pub k: usize,
}

impl<T: Scalar> BaselineState<T> {
    pub fn start(x0: Point<T>) -> Self {
        Self {
            momentum_buffer: Point::zeros(x0.dim()),
            x: x0,
            k: 0,
        }
    }
}

pub fn baseline_step<T, P, O>(
    method: BaselineMethod,
    state: &BaselineState<T>,
    lr: T,
    momentum: T,
    oracle: &mut O,
    problem: &P,
) -> Result<BaselineState<T>>
where
    T: Scalar,
    P: ObjectiveProblem<T> + ?Sized,
    O: GradientOracle<T> + ?Sized,
{
    if !(lr > T::zero()) || !lr.is_finite() {
        return Err(Error::invalid(format!("learning rate must be positive, got {lr}")));
    }
    if !(momentum >= T::zero() && momentum < T::one()) {
        return Err(Error::invalid(format!("momentum must lie in [0, 1), got {momentum}")));
    }
    let d = problem.dimension();
    state.x.check_dim(d)?;
    state.momentum_buffer.check_dim(d)?;

    let (x, momentum_buffer) = match method {
        BaselineMethod::Sgd => {
            let g = oracle.sample(&problem.gradient(&state.x));
            (state.x.axpy(-lr, &g), state.momentum_buffer.clone())
        }
        BaselineMethod::Shb => {
            let g = oracle.sample(&problem.gradient(&state.x));
            let buffer = g.axpy(momentum, &state.momentum_buffer);
            (state.x.axpy(-lr, &buffer), buffer)
        }
        BaselineMethod::Nag => {
            let y = state.x.axpy(momentum, &state.momentum_buffer);
            let g = oracle.sample(&problem.gradient(&y));
            let x = y.axpy(-lr, &g);
            let displacement = x.sub(&state.x);
            (x, displacement)
        }
    };
    Ok(BaselineState {
        x,
        momentum_buffer,
        k: state.k + 1,
    })
}
