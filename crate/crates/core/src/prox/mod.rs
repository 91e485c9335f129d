//! Closed-form proximity operators, Moreau envelopes and potentials.
//!
//! Conventions: for `g` convex and `gamma > 0`,
//! `prox_{gamma g}(x) = argmin_y 1/2 ||x - y||^2 + gamma g(y)` and
//! `M_{gamma g}(x)` is the corresponding minimum value. The potential of the
//! prox is `1/2 ||x||^2 - M_{gamma g}(x)`, whose gradient is the prox itself.

mod map;
mod numeric;

use std::fmt;

use nalgebra::DVector;

use crate::error::{check_lambda, Result};

pub use map::{
    catalog, central_gradient, verify_firm_nonexpansive, verify_moreau_characterization, ProxMap,
    ScalarMap, VectorMap,
};
pub use numeric::{
    numeric_prox, Lifting, PlainObjective, SplitObjective, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

#[inline]
pub fn shrink_scalar(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// `M_{lambda |.|}(x) = min_y 1/2 (x - y)^2 + lambda |y|`.
#[inline]
pub fn huber_scalar(x: f64, lambda: f64) -> f64 {
    let a = x.abs();
    if a > lambda {
        lambda * a - 0.5 * lambda * lambda
    } else {
        0.5 * x * x
    }
}

#[inline]
pub fn shrink_potential_scalar(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        0.5 * (x - lambda) * (x - lambda)
    } else if x < -lambda {
        0.5 * (x + lambda) * (x + lambda)
    } else {
        0.0
    }
}

/// Componentwise soft shrinkage `S_lambda`, the prox of `lambda ||.||_1`.
pub fn soft_shrink(x: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    check_lambda(lambda)?;
    Ok(x.map(|v| shrink_scalar(v, lambda)))
}

/// Moreau envelope of `lambda ||.||_1` (sum of Huber functions).
pub fn huber_envelope(x: &DVector<f64>, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(x.iter().map(|&v| huber_scalar(v, lambda)).sum())
}

/// Convex potential whose gradient is `S_lambda`.
pub fn shrink_potential(x: &DVector<f64>, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(x.iter().map(|&v| shrink_potential_scalar(v, lambda)).sum())
}

/// A convex function with a closed-form, scalable proximity operator.
pub trait ProxFunction: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Value at `x`; `+inf` outside the domain.
    fn value(&self, x: &DVector<f64>) -> f64;

    /// `prox_{gamma g}(x)`.
    fn prox(&self, x: &DVector<f64>, gamma: f64) -> DVector<f64>;

    /// `M_{gamma g}(x)`.
    fn envelope(&self, x: &DVector<f64>, gamma: f64) -> f64 {
        let p = self.prox(x, gamma);
        0.5 * (x - &p).norm_squared() + gamma * self.value(&p)
    }

    /// Coordinate values at which `prox_{gamma g}` has a kink (componentwise maps only).
    fn breakpoints(&self, _gamma: f64) -> Vec<f64> {
        Vec::new()
    }
}

/// `g = lambda ||.||_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct L1Norm {
    pub lambda: f64,
}

impl L1Norm {
    pub fn new(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(L1Norm { lambda })
    }
}

impl ProxFunction for L1Norm {
    fn name(&self) -> &str {
        "soft_shrink"
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.lambda * x.lp_norm(1)
    }

    fn prox(&self, x: &DVector<f64>, gamma: f64) -> DVector<f64> {
        let t = gamma * self.lambda;
        x.map(|v| shrink_scalar(v, t))
    }

    fn envelope(&self, x: &DVector<f64>, gamma: f64) -> f64 {
        let t = gamma * self.lambda;
        x.iter().map(|&v| huber_scalar(v, t)).sum()
    }

    fn breakpoints(&self, gamma: f64) -> Vec<f64> {
        let t = gamma * self.lambda;
        vec![-t, t]
    }
}

/// `g = 0`; its prox is the identity.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ZeroFunction;

impl ProxFunction for ZeroFunction {
    fn name(&self) -> &str {
        "identity"
    }

    fn value(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    fn prox(&self, x: &DVector<f64>, _gamma: f64) -> DVector<f64> {
        x.clone()
    }

    fn envelope(&self, _x: &DVector<f64>, _gamma: f64) -> f64 {
        0.0
    }
}

/// Indicator of the box `[-radius, radius]^m`; its prox is clamping.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxIndicator {
    pub radius: f64,
}

impl BoxIndicator {
    pub fn new(radius: f64) -> Result<Self> {
        check_lambda(radius)?;
        Ok(BoxIndicator { radius })
    }
}

impl ProxFunction for BoxIndicator {
    fn name(&self) -> &str {
        "box"
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        if x.amax() <= self.radius {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox(&self, x: &DVector<f64>, _gamma: f64) -> DVector<f64> {
        let r = self.radius;
        x.map(|v| v.clamp(-r, r))
    }

    fn envelope(&self, x: &DVector<f64>, gamma: f64) -> f64 {
        let p = self.prox(x, gamma);
        0.5 * (x - p).norm_squared()
    }

    fn breakpoints(&self, _gamma: f64) -> Vec<f64> {
        vec![-self.radius, self.radius]
    }
}

/// `g = weight / 2 ||.||^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SquaredNorm {
    pub weight: f64,
}

impl SquaredNorm {
    pub fn new(weight: f64) -> Result<Self> {
        check_lambda(weight)?;
        Ok(SquaredNorm { weight })
    }
}

impl ProxFunction for SquaredNorm {
    fn name(&self) -> &str {
        "ridge"
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.weight * x.norm_squared()
    }

    fn prox(&self, x: &DVector<f64>, gamma: f64) -> DVector<f64> {
        x / (1.0 + gamma * self.weight)
    }

    fn envelope(&self, x: &DVector<f64>, gamma: f64) -> f64 {
        let gw = gamma * self.weight;
        0.5 * gw / (1.0 + gw) * x.norm_squared()
    }
}
