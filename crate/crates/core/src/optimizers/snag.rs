use crate::error::{Error, Result};
use crate::objective::{GradientOracle, ObjectiveProblem};
use crate::point::Point;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct SnagState<T> {
    pub x: Point<T>,
    pub v: Point<T>,
    pub k: usize,
}

impl<T: Scalar> SnagState<T> {
    pub fn new(x0: Point<T>, v0: Point<T>) -> Result<Self> {
        v0.check_dim(x0.dim())?;
        Ok(Self { x: x0, v: v0, k: 0 })
    }
}

/// Parameters of the four-parameter SNAG recursion for one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnagOriginalParams<T> {
    pub alpha_hat_next: T,
    pub s: T,
    pub beta_hat: T,
    pub eta: T,
}

/// SNAG written as a discretization of the Hessian-driven flow. The
/// time-scaling sequence `gamma` is supplied by the caller.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnagHnagParams<T> {
    pub alpha_next: T,
    pub beta_next: T,
    pub gamma_next: T,
    pub mu: T,
}

impl<T: Scalar> SnagHnagParams<T> {
    fn validate(&self) -> Result<()> {
        let positive = [self.alpha_next, self.beta_next, self.gamma_next];
        if positive.iter().any(|&p| !(p > T::zero()) || !p.is_finite()) || !(self.mu >= T::zero()) {
            return Err(Error::invalid(format!(
                "SNAG needs alpha, beta, gamma > 0 and mu >= 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// `alpha_hat = 1/(1+alpha)`, `s = alpha beta`,
    /// `beta_hat = 1/(1 + alpha mu / gamma)`, `eta = beta_hat alpha / gamma`.
    pub fn to_original(&self) -> SnagOriginalParams<T> {
        let one = T::one();
        let beta_hat = one / (one + self.alpha_next * self.mu / self.gamma_next);
        SnagOriginalParams {
            alpha_hat_next: one / (one + self.alpha_next),
            s: self.alpha_next * self.beta_next,
            beta_hat,
            eta: beta_hat * self.alpha_next / self.gamma_next,
        }
    }
}

/// `v+ = beta_hat v + (1 - beta_hat) x - eta g(x)`,
/// `x+ = alpha_hat x + (1 - alpha_hat) v+ - alpha_hat s g(x)`.
pub fn snag_step_original<T, P, O>(
    state: &SnagState<T>,
    params: &SnagOriginalParams<T>,
    oracle: &mut O,
    problem: &P,
) -> Result<SnagState<T>>
where
    T: Scalar,
    P: ObjectiveProblem<T> + ?Sized,
    O: GradientOracle<T> + ?Sized,
{
    let d = problem.dimension();
    state.x.check_dim(d)?;
    state.v.check_dim(d)?;
    let g = oracle.sample(&problem.gradient(&state.x));
    let one = T::one();
    let SnagOriginalParams {
        alpha_hat_next: a,
        s,
        beta_hat: b,
        eta,
    } = *params;
    let v = state
        .v
        .zip_map(&state.x, |v, x| b * v + (one - b) * x)
        .axpy(-eta, &g);
    let x = state
        .x
        .zip_map(&v, |x, v| a * x + (one - a) * v)
        .axpy(-(a * s), &g);
    Ok(SnagState { x, v, k: state.k + 1 })
}

/// Same recursion in flow form; both affine implicit updates are solved in
/// closed form, `v` first since `x_{k+1}` depends on `v_{k+1}`.
pub fn snag_step_hnag<T, P, O>(
    state: &SnagState<T>,
    params: &SnagHnagParams<T>,
    oracle: &mut O,
    problem: &P,
) -> Result<SnagState<T>>
where
    T: Scalar,
    P: ObjectiveProblem<T> + ?Sized,
    O: GradientOracle<T> + ?Sized,
{
    params.validate()?;
    let d = problem.dimension();
    state.x.check_dim(d)?;
    state.v.check_dim(d)?;
    let g = oracle.sample(&problem.gradient(&state.x));
    let one = T::one();
    let alpha = params.alpha_next;
    let coupling = alpha * params.mu / params.gamma_next;
    let grad_step = alpha / params.gamma_next;
    let v: Vec<T> = state
        .v
        .as_slice()
        .iter()
        .zip(state.x.as_slice())
        .zip(g.as_slice())
        .map(|((&v, &x), &g)| (v + coupling * x - grad_step * g) / (one + coupling))
        .collect();
    let v = Point::from_vec_unchecked(v);
    let a_beta = alpha * params.beta_next;
    let x: Vec<T> = state
        .x
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .zip(g.as_slice())
        .map(|((&x, &v), &g)| (x + alpha * v - a_beta * g) / (one + alpha))
        .collect();
    Ok(SnagState {
        x: Point::from_vec_unchecked(x),
        v,
        k: state.k + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::ExactOracle;
    use crate::problems::make_quadratic;
    use approx::assert_relative_eq;

    fn p(c: &[f64]) -> Point<f64> {
        Point::from_f64(c).unwrap()
    }

    #[test]
    fn degenerate_parameters_freeze_state() {
        let q = make_quadratic(vec![1.0], p(&[0.0])).unwrap();
        let s0 = SnagState::new(p(&[0.7]), p(&[-0.2])).unwrap();
        let params = SnagOriginalParams { alpha_hat_next: 1.0, s: 0.0, beta_hat: 1.0, eta: 0.0 };
        let s1 = snag_step_original(&s0, &params, &mut ExactOracle, &q).unwrap();
        assert_eq!(s1.x, s0.x);
        assert_eq!(s1.v, s0.v);
    }

    #[test]
    fn minimizer_is_fixed() {
        let q = make_quadratic(vec![1.0, 3.0], p(&[2.0, -1.0])).unwrap();
        let s0 = SnagState::new(p(&[2.0, -1.0]), p(&[2.0, -1.0])).unwrap();
        let hnag = SnagHnagParams { alpha_next: 0.3, beta_next: 0.5, gamma_next: 1.0, mu: 1.0 };
        let a = snag_step_hnag(&s0, &hnag, &mut ExactOracle, &q).unwrap();
        let b = snag_step_original(&s0, &hnag.to_original(), &mut ExactOracle, &q).unwrap();
        assert_eq!(a.x, s0.x);
        assert_eq!(b.x, s0.x);
        assert_eq!(a.v, s0.v);
    }

    #[test]
    fn original_form_hand_step() {
        let q = make_quadratic(vec![1.0], p(&[0.0])).unwrap();
        let s0 = SnagState::new(p(&[1.0]), p(&[1.0])).unwrap();
        let params = SnagOriginalParams { alpha_hat_next: 0.5, s: 0.2, beta_hat: 0.5, eta: 0.1 };
        let s1 = snag_step_original(&s0, &params, &mut ExactOracle, &q).unwrap();
        assert_relative_eq!(s1.v[0], 0.9, epsilon = 1e-15);
        assert_relative_eq!(s1.x[0], 0.85, epsilon = 1e-15);
    }

    #[test]
    fn flow_form_hand_step_matches_original() {
        let q = make_quadratic(vec![1.0], p(&[0.0])).unwrap();
        let s0 = SnagState::new(p(&[1.0]), p(&[1.0])).unwrap();
        let hnag = SnagHnagParams { alpha_next: 1.0, beta_next: 0.2, gamma_next: 1.0, mu: 1.0 };
        let a = snag_step_hnag(&s0, &hnag, &mut ExactOracle, &q).unwrap();
        assert_relative_eq!(a.v[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(a.x[0], 0.65, epsilon = 1e-15);
        let orig = hnag.to_original();
        assert_eq!(orig, SnagOriginalParams { alpha_hat_next: 0.5, s: 0.2, beta_hat: 0.5, eta: 0.5 });
        let b = snag_step_original(&s0, &orig, &mut ExactOracle, &q).unwrap();
        assert_relative_eq!(a.x[0], b.x[0], epsilon = 1e-15);
        assert_relative_eq!(a.v[0], b.v[0], epsilon = 1e-15);
    }

    #[test]
    fn invalid_flow_parameters() {
        let q = make_quadratic(vec![1.0], p(&[0.0])).unwrap();
        let s0 = SnagState::new(p(&[1.0]), p(&[1.0])).unwrap();
        let bad = SnagHnagParams { alpha_next: 1.0, beta_next: 0.2, gamma_next: 0.0, mu: 1.0 };
        assert!(snag_step_hnag(&s0, &bad, &mut ExactOracle, &q).is_err());
        assert!(SnagState::new(p(&[1.0]), p(&[1.0, 2.0])).is_err());
    }
}
