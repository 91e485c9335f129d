use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use super::{
    huber_envelope, shrink_potential, soft_shrink, BoxIndicator, L1Norm, ProxFunction, SquaredNorm,
    ZeroFunction,
};
use crate::error::Result;
use crate::report::{nan_max, VerifyReport};
use crate::sampling::{max_over_trials, scaled_gaussian};

pub type VectorMap = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type ScalarMap = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// A named proximity operator together with whatever companion functions are known for it.
#[derive(Clone)]
pub struct ProxMap {
    pub name: String,
    pub lambda: f64,
    eval: VectorMap,
    envelope: Option<ScalarMap>,
    potential: Option<ScalarMap>,
    function: Option<ScalarMap>,
    handle: Option<Arc<dyn ProxFunction>>,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for ProxMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProxMap")
            .field("name", &self.name)
            .field("lambda", &self.lambda)
            .field("envelope", &self.envelope.is_some())
            .field("potential", &self.potential.is_some())
            .field("function", &self.function.is_some())
            .finish()
    }
}

impl ProxMap {
    /// A bare map with no companion functions (useful for counterexamples).
    pub fn custom(name: impl Into<String>, eval: VectorMap) -> Self {
        ProxMap {
            name: name.into(),
            lambda: 1.0,
            eval,
            envelope: None,
            potential: None,
            function: None,
            handle: None,
            breakpoints: Vec::new(),
        }
    }

    /// `prox_g` for a cataloged `g`, with envelope and potential derived from `g`.
    pub fn from_function(lambda: f64, g: Arc<dyn ProxFunction>) -> Self {
        let (ge, gp, gv, gx) = (g.clone(), g.clone(), g.clone(), g.clone());
        ProxMap {
            name: g.name().to_string(),
            lambda,
            eval: Arc::new(move |x| gx.prox(x, 1.0)),
            envelope: Some(Arc::new(move |x| ge.envelope(x, 1.0))),
            potential: Some(Arc::new(move |x| 0.5 * x.norm_squared() - gp.envelope(x, 1.0))),
            function: Some(Arc::new(move |x| gv.value(x))),
            breakpoints: g.breakpoints(1.0),
            handle: Some(g),
        }
    }

    /// `S_lambda`, with the Huber envelope and the shrinkage potential in closed form.
    pub fn soft_shrink(lambda: f64) -> Result<Self> {
        let g = L1Norm::new(lambda)?;
        let mut map = Self::from_function(lambda, Arc::new(g));
        map.eval = Arc::new(move |x| soft_shrink(x, lambda).expect("lambda validated"));
        map.envelope = Some(Arc::new(move |x| huber_envelope(x, lambda).expect("lambda validated")));
        map.potential = Some(Arc::new(move |x| shrink_potential(x, lambda).expect("lambda validated")));
        Ok(map)
    }

    pub fn identity() -> Self {
        Self::from_function(1.0, Arc::new(ZeroFunction))
    }

    /// Projection onto `[-radius, radius]^m`.
    pub fn clamp(radius: f64) -> Result<Self> {
        Ok(Self::from_function(radius, Arc::new(BoxIndicator::new(radius)?)))
    }

    /// Prox of `weight / 2 ||.||^2`, i.e. scaling by `1 / (1 + weight)`.
    pub fn ridge(weight: f64) -> Result<Self> {
        Ok(Self::from_function(weight, Arc::new(SquaredNorm::new(weight)?)))
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.eval)(x)
    }

    pub fn envelope(&self, x: &DVector<f64>) -> Option<f64> {
        self.envelope.as_ref().map(|f| f(x))
    }

    pub fn potential(&self, x: &DVector<f64>) -> Option<f64> {
        self.potential.as_ref().map(|f| f(x))
    }

    pub fn function(&self, x: &DVector<f64>) -> Option<f64> {
        self.function.as_ref().map(|f| f(x))
    }

    pub fn potential_map(&self) -> Option<ScalarMap> {
        self.potential.clone()
    }

    /// The underlying function with its scalable prox, when known.
    pub fn handle(&self) -> Option<&Arc<dyn ProxFunction>> {
        self.handle.as_ref()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
}

/// Every closed-form map shipped with the crate, at a few representative scales.
pub fn catalog() -> Vec<ProxMap> {
    let mut maps = vec![ProxMap::identity()];
    for &lambda in &[0.1, 1.0, 10.0] {
        maps.push(ProxMap::soft_shrink(lambda).expect("positive"));
    }
    maps.push(ProxMap::clamp(1.0).expect("positive"));
    maps.push(ProxMap::ridge(0.5).expect("positive"));
    maps
}

/// Central-difference gradient with step `1e-6 * max(1, |x_i|)` per coordinate.
pub fn central_gradient<F>(f: F, x: &DVector<f64>) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut probe = x.clone();
    DVector::from_fn(x.len(), |i, _| {
        let h = fd_step(x[i]);
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        (up - down) / (2.0 * h)
    })
}

fn fd_step(xi: f64) -> f64 {
    1e-6 * xi.abs().max(1.0)
}

fn near_breakpoint(x: &DVector<f64>, breakpoints: &[f64]) -> bool {
    x.iter()
        .any(|&xi| breakpoints.iter().any(|&b| (xi - b).abs() <= 10.0 * fd_step(xi)))
}

/// Samples `||Px - Py||^2 - <x - y, Px - Py>`; the map is firmly nonexpansive when it never exceeds `tol`.
pub fn verify_firm_nonexpansive(p: &ProxMap, dim: usize, trials: usize, tol: f64, seed: u64) -> VerifyReport {
    let violation = max_over_trials(seed, trials, |rng| {
        let x = scaled_gaussian(rng, dim);
        let y = scaled_gaussian(rng, dim);
        let dp = p.apply(&x) - p.apply(&y);
        dp.norm_squared() - (x - y).dot(&dp)
    });
    VerifyReport::new(format!("firm_nonexpansive[{}]", p.name), trials, violation, tol)
}

/// Moreau's characterization: `P` is nonexpansive, equals the gradient of
/// `potential`, and `potential` is convex.
///
/// Each sub-check contributes a relative violation; the run passes when the
/// largest stays within `tol`. Gradient samples that fall within ten
/// finite-difference steps of one of `P`'s breakpoints are skipped.
pub fn verify_moreau_characterization(
    p: &ProxMap,
    potential: &(dyn Fn(&DVector<f64>) -> f64 + Sync),
    dim: usize,
    trials: usize,
    tol: f64,
    seed: u64,
) -> VerifyReport {
    let violation = max_over_trials(seed, trials, |rng| {
        let x = scaled_gaussian(rng, dim);
        let y = scaled_gaussian(rng, dim);
        let px = p.apply(&x);
        let py = p.apply(&y);

        let gap = (&x - &y).norm();
        let nonexpansive = ((&px - &py).norm() - gap) / gap.max(1.0);

        let gradient = if near_breakpoint(&x, p.breakpoints()) {
            f64::NEG_INFINITY
        } else {
            let fd = central_gradient(potential, &x);
            (fd - &px).amax() / px.amax().max(1.0)
        };

        let (fx, fy) = (potential(&x), potential(&y));
        let mid = potential(&((&x + &y) * 0.5));
        let avg = 0.5 * (fx + fy);
        let convex = (mid - avg) / avg.abs().max(1.0);

        nan_max(nan_max(nonexpansive, gradient), convex)
    });
    VerifyReport::new(format!("moreau_characterization[{}]", p.name), trials, violation, tol)
}
