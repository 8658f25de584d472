//! Benchmark objectives: the one-dimensional piecewise power family `f_d`
//! and separable quadratics with prescribed spectrum.

use crate::error::{Error, Result};
use crate::objective::{ObjectiveProblem, SmoothnessProfile};
use crate::point::Point;
use crate::scalar::Scalar;

fn check_exponent(d: u32) -> Result<()> {
    if d < 2 {
        Err(Error::invalid(format!("f_d exponent must be >= 2, got {d}")))
    } else {
        Ok(())
    }
}

/// `|x|^d` for `|x| < 1`, `1 + d(|x| - 1)` otherwise.
pub fn fd_value<T: Scalar>(d: u32, x: T) -> Result<T> {
    check_exponent(d)?;
    Ok(fd_value_raw(d, x))
}

/// Derivative of [`fd_value`]. At `|x| = 1` both branches give `d sign(x)`.
pub fn fd_gradient<T: Scalar>(d: u32, x: T) -> Result<T> {
    check_exponent(d)?;
    Ok(fd_gradient_raw(d, x))
}

fn fd_value_raw<T: Scalar>(d: u32, x: T) -> T {
    let a = x.abs();
    if a < T::one() {
        a.powi(d as i32)
    } else {
        T::one() + T::lit(d as f64) * (a - T::one())
    }
}

fn fd_gradient_raw<T: Scalar>(d: u32, x: T) -> T {
    if x == T::zero() {
        return T::zero();
    }
    let a = x.abs();
    let dd = T::lit(d as f64);
    let magnitude = if a < T::one() {
        dd * a.powi(d as i32 - 1)
    } else {
        dd
    };
    magnitude * x.signum()
}

/// The convex, `L = d(d-1)`-smooth test function `f_d` on `R`.
#[derive(Clone, Debug)]
pub struct FdProblem<T> {
    exponent: u32,
    minimizer: Point<T>,
    profile: SmoothnessProfile<T>,
}

impl<T: Scalar> FdProblem<T> {
    pub fn new(exponent: u32) -> Result<Self> {
        check_exponent(exponent)?;
        let l = T::lit((exponent * (exponent - 1)) as f64);
        Ok(Self {
            exponent,
            minimizer: Point::zeros(1),
            profile: SmoothnessProfile::new(T::zero(), l)?,
        })
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }
}

impl<T: Scalar> ObjectiveProblem<T> for FdProblem<T> {
    fn dimension(&self) -> usize {
        1
    }

    fn profile(&self) -> SmoothnessProfile<T> {
        self.profile
    }

    fn value(&self, x: &Point<T>) -> T {
        fd_value_raw(self.exponent, x[0])
    }

    fn gradient(&self, x: &Point<T>) -> Point<T> {
        Point::from_vec_unchecked(vec![fd_gradient_raw(self.exponent, x[0])])
    }

    fn minimizer(&self) -> Option<&Point<T>> {
        Some(&self.minimizer)
    }

    fn minimum_value(&self) -> Option<T> {
        Some(T::zero())
    }

    fn label(&self) -> String {
        format!("fd{}", self.exponent)
    }
}

/// `f(x) = 1/2 sum_i lambda_i (x_i - c_i)^2`.
#[derive(Clone, Debug)]
pub struct QuadraticProblem<T> {
    eigenvalues: Vec<T>,
    center: Point<T>,
    profile: SmoothnessProfile<T>,
}

impl<T: Scalar> QuadraticProblem<T> {
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    pub fn center(&self) -> &Point<T> {
        &self.center
    }
}

pub fn make_quadratic<T: Scalar>(eigenvalues: Vec<T>, center: Point<T>) -> Result<QuadraticProblem<T>> {
    center.check_dim(eigenvalues.len())?;
    if let Some(bad) = eigenvalues.iter().find(|&&l| !(l > T::zero()) || !l.is_finite()) {
        return Err(Error::invalid(format!("eigenvalues must be positive, got {bad}")));
    }
    let mu = eigenvalues.iter().copied().fold(T::infinity(), T::min);
    let l = eigenvalues.iter().copied().fold(T::zero(), T::max);
    Ok(QuadraticProblem {
        profile: SmoothnessProfile::new(mu, l)?,
        eigenvalues,
        center,
    })
}

impl<T: Scalar> ObjectiveProblem<T> for QuadraticProblem<T> {
    fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    fn profile(&self) -> SmoothnessProfile<T> {
        self.profile
    }

    fn value(&self, x: &Point<T>) -> T {
        let half = T::lit(0.5);
        self.eigenvalues
            .iter()
            .zip(x.as_slice().iter().zip(self.center.as_slice()))
            .map(|(&l, (&xi, &ci))| half * l * (xi - ci) * (xi - ci))
            .sum()
    }

    fn gradient(&self, x: &Point<T>) -> Point<T> {
        Point::from_vec_unchecked(
            self.eigenvalues
                .iter()
                .zip(x.as_slice().iter().zip(self.center.as_slice()))
                .map(|(&l, (&xi, &ci))| l * (xi - ci))
                .collect(),
        )
    }

    fn minimizer(&self) -> Option<&Point<T>> {
        Some(&self.center)
    }

    fn minimum_value(&self) -> Option<T> {
        Some(T::zero())
    }

    fn label(&self) -> String {
        let p = self.profile;
        format!("quad{}k{}", self.dimension(), (p.l() / p.mu()).as_f64().round())
    }
}
