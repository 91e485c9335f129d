//! Frame shrinkage `T^+ Prox T` and the regularizer it is the proximity operator of.
//!
//! For `Prox = prox_g` the operator `x -> T^+ prox_g(T x)` is the proximity
//! operator in the metric `||x||_T = ||T x||` of
//!
//! ```text
//! f(x) = min_{z in ker T^*} 1/2 ||z||^2 + g(T x + z),
//! ```
//!
//! the infimal convolution of `g` with `1/2 ||.||^2` restricted to `ker T^*`,
//! evaluated at `T x`. When `T` is bijective the kernel is trivial and
//! `f = g o T`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operator::{AnalysisOperator, TMetric};
use crate::prox::{numeric_prox, Lifting, ProxFunction, ProxMap, SplitObjective};
use crate::report::{nan_max, VerifyReport};
use crate::sampling::{max_over_trials, scaled_gaussian};

/// Accuracy used for regularizer evaluations when the caller has no preference.
pub const DEFAULT_EVAL_TOL: f64 = 1e-11;
pub const DEFAULT_EVAL_MAX_ITER: usize = 100_000;

const DR_GAMMA: f64 = 0.01;

/// Edge of the quadratic branch of the closed-form regularizer for `T = (1, 2)^T`, `lambda = 1`.
pub const EXAMPLE_BRANCH_POINT: f64 = 0.4;

/// `T^+ o Prox o T` together with the metric in which it is a proximity operator.
#[derive(Clone, Debug)]
pub struct FrameShrinkage {
    operator: Arc<AnalysisOperator>,
    inner_prox: ProxMap,
    metric: TMetric,
}

impl FrameShrinkage {
    pub fn new(operator: Arc<AnalysisOperator>, inner_prox: ProxMap) -> Self {
        let metric = TMetric::new(operator.clone());
        FrameShrinkage { operator, inner_prox, metric }
    }

    pub fn operator(&self) -> &Arc<AnalysisOperator> {
        &self.operator
    }

    pub fn inner_prox(&self) -> &ProxMap {
        &self.inner_prox
    }

    pub fn metric(&self) -> &TMetric {
        &self.metric
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let coeffs = self.operator.apply(x)?;
        self.operator.apply_pinv(&self.inner_prox.apply(&coeffs))
    }

    /// `Phi(T x)` where `Phi` is the potential of the inner prox; its `T`-gradient is [`Self::apply`].
    pub fn potential(&self, x: &DVector<f64>) -> Result<Option<f64>> {
        Ok(self.inner_prox.potential(&self.operator.apply(x)?))
    }
}

pub fn frame_prox(fs: &FrameShrinkage, x: &DVector<f64>) -> Result<DVector<f64>> {
    fs.apply(x)
}

/// The function `f` whose `T`-metric prox is a given [`FrameShrinkage`].
#[derive(Clone, Debug)]
pub struct InducedRegularizer {
    shrinkage: FrameShrinkage,
    g: Arc<dyn ProxFunction>,
    // [T | B] with B the orthonormal kernel basis of T^*, used for the lifted form.
    lifted_map: DMatrix<f64>,
    max_iter: usize,
}

impl InducedRegularizer {
    /// Requires the inner prox to carry a scalable closed-form handle for `g`.
    pub fn new(shrinkage: &FrameShrinkage) -> Result<Self> {
        let g = shrinkage
            .inner_prox
            .handle()
            .cloned()
            .ok_or_else(|| Error::MissingProxHandle(shrinkage.inner_prox.name.clone()))?;
        let op = &shrinkage.operator;
        let (n, d) = (op.rows(), op.cols());
        let mut lifted_map = DMatrix::zeros(n, n);
        lifted_map.columns_mut(0, d).copy_from(op.matrix());
        lifted_map.columns_mut(d, n - d).copy_from(op.null_basis());
        Ok(InducedRegularizer {
            shrinkage: shrinkage.clone(),
            g,
            lifted_map,
            max_iter: DEFAULT_EVAL_MAX_ITER,
        })
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn shrinkage(&self) -> &FrameShrinkage {
        &self.shrinkage
    }

    pub fn g(&self) -> &dyn ProxFunction {
        &*self.g
    }

    /// `g(T x)`, the regularizer `f` never exceeds.
    pub fn g_of_t(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.g.value(&self.shrinkage.operator.apply(x)?))
    }

    /// Evaluates `f(x)` to accuracy `tol`.
    ///
    /// Douglas–Rachford splitting on `z in ker T^*` alternates the projection
    /// onto the kernel with the exact prox of `1/2 ||z||^2 + g(T x + z)`, which
    /// is a rescaled, shifted prox of `g`.
    pub fn evaluate(&self, x: &DVector<f64>, tol: f64) -> Result<f64> {
        let op = &self.shrinkage.operator;
        let c = op.apply(x)?;
        if op.is_bijective() {
            return Ok(self.g.value(&c));
        }
        let basis = op.null_basis();
        let project = |r: &DVector<f64>| basis * basis.tr_mul(r);

        // prox_{gamma h}(v) = prox_{gamma/(1+gamma) g}(c + v/(1+gamma)) - c
        let gamma = DR_GAMMA;
        let shrink_scale = gamma / (1.0 + gamma);
        let prox_h = |v: &DVector<f64>| self.g.prox(&(&c + v / (1.0 + gamma)), shrink_scale) - &c;

        let mut r = DVector::zeros(c.len());
        let mut residual = f64::INFINITY;
        for _ in 0..self.max_iter {
            let z = project(&r);
            let p = prox_h(&(&z * 2.0 - &r));
            let step = p - &z;
            residual = step.norm() / gamma;
            r += step;
            if residual <= tol {
                let z = project(&r);
                return Ok(0.5 * z.norm_squared() + self.g.value(&(&c + z)));
            }
        }
        Err(Error::NotConverged { iterations: self.max_iter, residual })
    }
}

impl SplitObjective for InducedRegularizer {
    fn dim(&self) -> usize {
        self.shrinkage.operator.cols()
    }

    fn lifting(&self) -> Lifting<'_> {
        let op = &self.shrinkage.operator;
        Lifting {
            map: Some(&self.lifted_map),
            aux_dim: op.rows() - op.cols(),
            outer: &*self.g,
        }
    }
}

pub fn induced_regularizer(reg: &InducedRegularizer, x: &DVector<f64>, tol: f64) -> Result<f64> {
    reg.evaluate(x, tol)
}

/// Closed-form regularizer for `T = (1, 2)^T` and `S_1`:
/// `5/2 |y| + 5/8 y^2` for `|y| <= 2/5`, else `3 |y| - 1/10`.
pub fn example_regularizer_closed_form(y: f64) -> f64 {
    let a = y.abs();
    if a <= EXAMPLE_BRANCH_POINT {
        2.5 * a + 0.625 * y * y
    } else {
        3.0 * a - 0.1
    }
}

/// Compares `T^+ prox_g T x` with a numerically computed `T`-metric prox of `f`.
///
/// Each trial contributes the larger of `||y1 - y2||_T` and the amount by which
/// the prox objective at the frame shrinkage output exceeds that at the
/// numerical minimizer. Nested solves run at `tol / 100`.
pub fn verify_prox_identity(
    fs: &FrameShrinkage,
    reg: &InducedRegularizer,
    trials: usize,
    tol: f64,
    seed: u64,
) -> VerifyReport {
    let d = fs.operator.cols();
    let inner_tol = (tol * 1e-2).max(1e-13);
    let metric = fs.metric();
    let violation = max_over_trials(seed, trials, |rng| {
        let x = scaled_gaussian(rng, d);
        prox_identity_gap(fs, reg, metric, &x, inner_tol).unwrap_or(f64::INFINITY)
    });
    VerifyReport::new("prox_identity", trials, violation, tol)
}

fn prox_identity_gap(
    fs: &FrameShrinkage,
    reg: &InducedRegularizer,
    metric: &TMetric,
    x: &DVector<f64>,
    inner_tol: f64,
) -> Result<f64> {
    let y1 = fs.apply(x)?;
    let solve = numeric_prox(reg, x, Some(metric), inner_tol, crate::prox::DEFAULT_MAX_ITER)?;
    if !solve.converged {
        return Err(Error::NotConverged { iterations: solve.iterations, residual: solve.residual });
    }
    let y2 = DVector::from_vec(solve.minimizer);
    let objective = |y: &DVector<f64>| -> Result<f64> {
        Ok(0.5 * metric.norm(&(x - y))?.powi(2) + reg.evaluate(y, inner_tol)?)
    };
    let distance = metric.norm(&(&y1 - &y2))?;
    let excess = objective(&y1)? - objective(&y2)?;
    Ok(nan_max(distance, excess))
}

/// Samples `||Fx - Fy||_T^2 - <x - y, Fx - Fy>_T` for `F` the frame shrinkage.
pub fn verify_t_firm_nonexpansive(fs: &FrameShrinkage, trials: usize, tol: f64, seed: u64) -> VerifyReport {
    let violation = firm_nonexpansive_violation(fs, trials, seed, true);
    VerifyReport::new("t_firm_nonexpansive", trials, violation, tol)
}

/// The same inequality measured in the Euclidean metric.
///
/// For anisotropic `T` this can fail, which is why the weighted metric is
/// needed; it is provided for demonstration only.
pub fn verify_euclidean_firm_nonexpansive(
    fs: &FrameShrinkage,
    trials: usize,
    tol: f64,
    seed: u64,
) -> VerifyReport {
    let violation = firm_nonexpansive_violation(fs, trials, seed, false);
    VerifyReport::new("euclidean_firm_nonexpansive", trials, violation, tol)
}

fn firm_nonexpansive_violation(fs: &FrameShrinkage, trials: usize, seed: u64, weighted: bool) -> f64 {
    let op = &fs.operator;
    let d = op.cols();
    max_over_trials(seed, trials, |rng| {
        let x = scaled_gaussian(rng, d);
        let y = scaled_gaussian(rng, d);
        let (tx, ty) = (op.matrix() * &x, op.matrix() * &y);
        let (px, py) = (fs.inner_prox.apply(&tx), fs.inner_prox.apply(&ty));
        let df = op.pinv() * (&px - &py);
        if weighted {
            // With b = T(Fx - Fy) and a = T(x - y) both in range(T),
            // ||b||^2 - <a, b> = <b - a, b> and b - a = P_R (r_x - r_y) for the
            // prox residuals r = Prox(Tx) - Tx. Working with the residuals keeps
            // the cancellation between ||b||^2 and <a, b> out of the result.
            let b = op.matrix() * &df;
            let residual_gap = op.range_proj() * ((px - tx) - (py - ty));
            residual_gap.dot(&b)
        } else {
            df.norm_squared() - (x - y).dot(&df)
        }
    })
}

/// Samples `f(x) - g(T x)`, which must stay below `tol`.
pub fn weaker_regularizer_check(reg: &InducedRegularizer, trials: usize, tol: f64, seed: u64) -> VerifyReport {
    let d = reg.dim();
    let eval_tol = DEFAULT_EVAL_TOL.min(tol * 1e-2);
    let violation = max_over_trials(seed, trials, |rng| {
        let x = scaled_gaussian(rng, d);
        match (reg.evaluate(&x, eval_tol), reg.g_of_t(&x)) {
            (Ok(f), Ok(g)) => f - g,
            _ => f64::INFINITY,
        }
    });
    VerifyReport::new("weaker_regularizer", trials, violation, tol)
}

/// Checks midpoint convexity of `f` on random pairs.
pub fn verify_regularizer_convexity(reg: &InducedRegularizer, trials: usize, tol: f64, seed: u64) -> VerifyReport {
    let d = reg.dim();
    let eval_tol = DEFAULT_EVAL_TOL.min(tol * 1e-2);
    let violation = max_over_trials(seed, trials, |rng| {
        let x = scaled_gaussian(rng, d);
        let y = scaled_gaussian(rng, d);
        let mid = (&x + &y) * 0.5;
        match (reg.evaluate(&x, eval_tol), reg.evaluate(&y, eval_tol), reg.evaluate(&mid, eval_tol)) {
            (Ok(fx), Ok(fy), Ok(fm)) => fm - 0.5 * (fx + fy),
            _ => f64::INFINITY,
        }
    });
    VerifyReport::new("regularizer_convexity", trials, violation, tol)
}

/// Shared constructor for the single-vector frame `T = (1, 2)^T`.
pub fn example_operator() -> Arc<AnalysisOperator> {
    Arc::new(
        AnalysisOperator::with_default_tol(DMatrix::from_column_slice(2, 1, &[1.0, 2.0]))
            .expect("(1, 2)^T is injective"),
    )
}
