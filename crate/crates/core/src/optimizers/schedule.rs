use crate::error::{Error, Result};
use crate::objective::SmoothnessProfile;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `mu > 0`: constant stepsize, `gamma = mu`.
    StronglyConvex,
    /// `mu` treated as 0: `alpha_k = 2/(k+1)`, decreasing `gamma_k`.
    Convex,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::StronglyConvex => "strongly-convex",
            Regime::Convex => "convex",
        }
    }
}

/// Coefficients for iteration `k`, plus the ones for `k + 1` that the step
/// needs to form the auxiliary iterate `x+_{k+1}`.
///
/// `alpha` drives the `v`-update, `alpha_tilde = alpha / (1 + m alpha)` the
/// `x`-update of SHANG++ (equal to `alpha` when `m = 0`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleParams<T> {
    pub regime: Regime,
    pub k: usize,
    pub alpha: T,
    pub alpha_tilde: T,
    pub beta: T,
    pub gamma: T,
    pub alpha_next: T,
    pub alpha_tilde_next: T,
    pub beta_next: T,
    pub gamma_next: T,
    pub m: T,
    pub mu: T,
    pub sigma: T,
}

impl<T: Scalar> ScheduleParams<T> {
    /// Weight of `|v - x*|^2 / 2` in the Lyapunov function at `k`.
    ///
    /// In the convex regime SHANG++ contracts the energy built on the
    /// effective time scaling `gamma / (1 + m alpha)`; with `m = 0` this is
    /// `gamma` itself.
    pub fn energy_gamma(&self) -> T {
        self.energy_gamma_at(self.gamma, self.alpha)
    }

    pub fn energy_gamma_next(&self) -> T {
        self.energy_gamma_at(self.gamma_next, self.alpha_next)
    }

    fn energy_gamma_at(&self, gamma: T, alpha: T) -> T {
        match self.regime {
            Regime::StronglyConvex => gamma,
            Regime::Convex => gamma / (T::one() + self.m * alpha),
        }
    }

    /// Stepsize paired with [`energy_gamma`](Self::energy_gamma) in the
    /// one-sided schedule condition.
    pub fn energy_alpha(&self) -> T {
        match self.regime {
            Regime::StronglyConvex => self.alpha,
            Regime::Convex => self.alpha_tilde,
        }
    }
}

/// Resolves [`ScheduleParams`] for any iteration index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule<T> {
    regime: Regime,
    mu: T,
    l: T,
    sigma: T,
    m: T,
    // strongly convex only
    alpha: T,
    alpha_tilde: T,
}

impl<T: Scalar> Schedule<T> {
    /// `alpha_tilde` is the `x`-update stepsize of the strongly convex
    /// regime (for `m = 0` it is SHANG's `alpha`). It defaults to
    /// `sqrt(mu / L) / (1 + sigma^2)` and must be omitted in the convex
    /// regime, where the stepsizes are fixed by `k`.
    pub fn new(
        regime: Regime,
        profile: SmoothnessProfile<T>,
        sigma: T,
        m: T,
        alpha_tilde: Option<T>,
    ) -> Result<Self> {
        if !(sigma >= T::zero()) || !sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if !(m >= T::zero()) || !m.is_finite() {
            return Err(Error::invalid(format!("m must be finite and >= 0, got {m}")));
        }
        let noise = T::one() + sigma * sigma;
        match regime {
            Regime::StronglyConvex => {
                let mu = profile.mu();
                if !(mu > T::zero()) {
                    return Err(Error::invalid("strongly convex schedule requires mu > 0"));
                }
                let alpha_tilde =
                    alpha_tilde.unwrap_or_else(|| (mu / profile.l()).sqrt() / noise);
                if !(alpha_tilde > T::zero()) || !alpha_tilde.is_finite() {
                    return Err(Error::invalid(format!("alpha_tilde must be positive, got {alpha_tilde}")));
                }
                if m * alpha_tilde >= T::one() {
                    return Err(Error::invalid(format!(
                        "need m * alpha_tilde < 1 for alpha = alpha_tilde / (1 - m alpha_tilde) to exist, got m = {m}, alpha_tilde = {alpha_tilde}"
                    )));
                }
                Ok(Self {
                    regime,
                    mu,
                    l: profile.l(),
                    sigma,
                    m,
                    alpha: alpha_tilde / (T::one() - m * alpha_tilde),
                    alpha_tilde,
                })
            }
            Regime::Convex => {
                if alpha_tilde.is_some() {
                    return Err(Error::invalid(
                        "the convex schedule fixes alpha_k = 2/(k+1); no stepsize override",
                    ));
                }
                Ok(Self {
                    regime,
                    mu: T::zero(),
                    l: profile.l(),
                    sigma,
                    m,
                    alpha: T::zero(),
                    alpha_tilde: T::zero(),
                })
            }
        }
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn m(&self) -> T {
        self.m
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// `(alpha, alpha_tilde, beta, gamma)` at `k`.
    fn coefficients(&self, k: usize) -> (T, T, T, T) {
        let noise = T::one() + self.sigma * self.sigma;
        match self.regime {
            Regime::StronglyConvex => {
                let beta = noise * self.alpha_tilde / self.mu;
                (self.alpha, self.alpha_tilde, beta, self.mu)
            }
            Regime::Convex => {
                let alpha = T::lit(2.0) / T::lit((k + 1) as f64);
                let alpha_tilde = alpha / (T::one() + self.m * alpha);
                let gamma = alpha * alpha_tilde * noise * noise * self.l;
                let beta = alpha * noise / gamma;
                (alpha, alpha_tilde, beta, gamma)
            }
        }
    }

    pub fn at(&self, k: usize) -> ScheduleParams<T> {
        let (alpha, alpha_tilde, beta, gamma) = self.coefficients(k);
        let (alpha_next, alpha_tilde_next, beta_next, gamma_next) = self.coefficients(k + 1);
        ScheduleParams {
            regime: self.regime,
            k,
            alpha,
            alpha_tilde,
            beta,
            gamma,
            alpha_next,
            alpha_tilde_next,
            beta_next,
            gamma_next,
            m: self.m,
            mu: self.mu,
            sigma: self.sigma,
        }
    }
}

/// Resolved coefficients at iteration `k`; see [`Schedule::new`].
pub fn build_schedule<T: Scalar>(
    regime: Regime,
    profile: SmoothnessProfile<T>,
    sigma: T,
    m: T,
    alpha_tilde: Option<T>,
    k: usize,
) -> Result<ScheduleParams<T>> {
    Ok(Schedule::new(regime, profile, sigma, m, alpha_tilde)?.at(k))
}

/// `(gamma_{k+1} - gamma_k) / alpha_k - (mu - gamma_{k+1})`; admissible
/// schedules keep this `<= 0`.
pub fn schedule_condition_residual<T: Scalar>(
    at_k: &ScheduleParams<T>,
    at_next: &ScheduleParams<T>,
) -> T {
    debug_assert_eq!(at_k.k + 1, at_next.k);
    let (g0, g1) = (at_k.energy_gamma(), at_next.energy_gamma());
    (g1 - g0) / at_k.energy_alpha() - (at_k.mu - g1)
}
