use crate::error::{Error, Result};
use crate::objective::{GradientOracle, ObjectiveProblem};
use crate::point::Point;
use crate::scalar::Scalar;

/// State of the practical SHANG++ loop. `v` holds `v_{k-1}` and `x` holds
/// `x_k`; the loop starts at `k = 1` with `v_0 = x_1 = x_0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DlState<T> {
    pub x: Point<T>,
    pub v: Point<T>,
    pub k: usize,
}

impl<T: Scalar> DlState<T> {
    pub fn start(x0: Point<T>) -> Self {
        Self {
            v: x0.clone(),
            x: x0,
            k: 1,
        }
    }
}

/// One iteration of the deep-learning parameterization of SHANG++:
/// `mu = 0`, coupling `beta = alpha / gamma`, and `v` updated before `x`.
pub fn shangpp_dl_step<T, P, O>(
    state: &DlState<T>,
    alpha: T,
    gamma: T,
    m: T,
    oracle: &mut O,
    problem: &P,
) -> Result<DlState<T>>
where
    T: Scalar,
    P: ObjectiveProblem<T> + ?Sized,
    O: GradientOracle<T> + ?Sized,
{
    if !(alpha > T::zero()) || !(gamma > T::zero()) {
        return Err(Error::invalid(format!(
            "alpha and gamma must be positive, got alpha = {alpha}, gamma = {gamma}"
        )));
    }
    if !(m >= T::zero()) {
        return Err(Error::invalid(format!("m must be >= 0, got {m}")));
    }
    let d = problem.dimension();
    state.x.check_dim(d)?;
    state.v.check_dim(d)?;

    let one = T::one();
    let alpha_tilde = alpha / (one + m * alpha);
    let lr = alpha / gamma;
    let g = oracle.sample(&problem.gradient(&state.x));
    let v = state.v.axpy(-lr, &g);
    let x: Vec<T> = state
        .x
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .zip(g.as_slice())
        .map(|((&x, &v), &g)| (x + alpha_tilde * v - alpha_tilde * lr * g) / (one + alpha_tilde))
        .collect();
    Ok(DlState {
        x: Point::from_vec_unchecked(x),
        v,
        k: state.k + 1,
    })
}
