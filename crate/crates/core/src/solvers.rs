//! Baseline solvers for `min_y 1/2 ||x - y||^2 + lambda ||T y||_1` and a
//! forward–backward iteration that uses frame shrinkage as its backward step.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, check_lambda, Error, Result};
use crate::frame::{FrameShrinkage, InducedRegularizer, DEFAULT_EVAL_TOL};
use crate::operator::{AnalysisOperator, TMetric};
use crate::prox::shrink_scalar;
use crate::report::SolveReport;

/// Maximum deviation of `T T^T` from the identity accepted by [`synthesis_solution`].
pub const PARSEVAL_TOL: f64 = 1e-10;

/// Analysis-sparsity denoising problem `min_y 1/2 ||x - y||^2 + lambda ||T y||_1`.
#[derive(Clone, Debug)]
pub struct AnalysisProblem {
    pub x: DVector<f64>,
    pub matrix: DMatrix<f64>,
    pub lambda: f64,
}

impl AnalysisProblem {
    pub fn new(x: DVector<f64>, matrix: DMatrix<f64>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        check_dim(matrix.ncols(), x.len())?;
        Ok(AnalysisProblem { x, matrix, lambda })
    }

    pub fn from_operator(x: DVector<f64>, op: &AnalysisOperator, lambda: f64) -> Result<Self> {
        Self::new(x, op.matrix().clone(), lambda)
    }

    pub fn objective(&self, y: &DVector<f64>) -> f64 {
        0.5 * (&self.x - y).norm_squared() + self.lambda * (&self.matrix * y).lp_norm(1)
    }
}

/// Projected gradient on the dual `min_{|p|_inf <= lambda} 1/2 ||x - T^T p||^2`.
///
/// The primal iterate is `y = x - T^T p`; iteration stops once the duality gap
/// is at most `tol`, which bounds `||y - y*||` by `sqrt(2 tol)`.
pub fn solve_analysis_dual(p: &AnalysisProblem, tol: f64, max_iter: usize) -> SolveReport {
    let t = &p.matrix;
    let lambda = p.lambda;
    let sigma_max = t.singular_values().max();
    let step = if sigma_max > 0.0 { 1.0 / (sigma_max * sigma_max) } else { 1.0 };
    let half_x_sq = 0.5 * p.x.norm_squared();

    let mut dual = DVector::zeros(t.nrows());
    let mut y = p.x.clone();
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        let ty = t * &y;
        let primal = 0.5 * (&p.x - &y).norm_squared() + lambda * ty.lp_norm(1);
        let dual_value = half_x_sq - 0.5 * y.norm_squared();
        gap = primal - dual_value;
        if gap <= tol {
            converged = true;
            break;
        }
        iterations += 1;
        dual += ty * step;
        dual.apply(|v| *v = v.clamp(-lambda, lambda));
        y = &p.x - t.tr_mul(&dual);
    }

    SolveReport {
        objective: p.objective(&y),
        minimizer: y.iter().copied().collect(),
        iterations,
        converged,
        residual: gap,
    }
}

/// Closed-form minimizer `(I - T^T T) x + T^T S_lambda(T x)` for `T` with orthonormal rows.
pub fn synthesis_solution(x: &DVector<f64>, t: &DMatrix<f64>, lambda: f64) -> Result<DVector<f64>> {
    check_lambda(lambda)?;
    let (n, d) = t.shape();
    if n > d || n == 0 {
        return Err(Error::InvalidShape {
            rows: n,
            cols: d,
            reason: "expected 1 <= rows <= cols",
        });
    }
    check_dim(d, x.len())?;
    let deviation = (t * t.transpose() - DMatrix::<f64>::identity(n, n)).amax();
    if !(deviation <= PARSEVAL_TOL) {
        return Err(Error::NotParsevalRow { deviation });
    }
    let coeffs = t * x;
    let shrunk = coeffs.map(|c| shrink_scalar(c, lambda));
    Ok(x - t.tr_mul(&coeffs) + t.tr_mul(&shrunk))
}

/// A smooth convex term for [`forward_backward_t_metric`].
pub trait SmoothTerm: Sync {
    fn value(&self, x: &DVector<f64>) -> f64;
    /// Euclidean gradient.
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// `1/2 ||x - center||^2`, Euclidean or in a `T` metric.
#[derive(Clone, Debug)]
pub struct SquaredDistance {
    pub center: DVector<f64>,
    pub metric: Option<TMetric>,
}

impl SmoothTerm for SquaredDistance {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.center;
        match &self.metric {
            Some(m) => 0.5 * m.norm(&diff).expect("dimension checked by caller").powi(2),
            None => 0.5 * diff.norm_squared(),
        }
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let diff = x - &self.center;
        match &self.metric {
            Some(m) => m.gram() * diff,
            None => diff,
        }
    }
}

/// Zero smooth term.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoSmoothTerm;

impl SmoothTerm for NoSmoothTerm {
    fn value(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(x.len())
    }
}

/// Forward–backward iteration `x+ = F(x - step * grad_T h(x))` with `F` the
/// frame shrinkage, i.e. proximal gradient in the `T` metric for
/// `step * h + f` (`f` the induced regularizer).
///
/// Stops when `||x+ - x||_T <= tol`. The reported objective is
/// `step * h + f` at the final iterate (NaN if the inner prox has no closed-form handle).
pub fn forward_backward_t_metric(
    h: &dyn SmoothTerm,
    fs: &FrameShrinkage,
    x0: &DVector<f64>,
    step: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    forward_backward_path(h, fs, x0, step, tol, max_iter).map(|(report, _)| report)
}

/// Like [`forward_backward_t_metric`], also returning every iterate starting with `x0`.
pub fn forward_backward_path(
    h: &dyn SmoothTerm,
    fs: &FrameShrinkage,
    x0: &DVector<f64>,
    step: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(SolveReport, Vec<DVector<f64>>)> {
    check_lambda(step)?;
    check_dim(fs.operator().cols(), x0.len())?;
    let metric = fs.metric();

    let mut path = vec![x0.clone()];
    let mut x = x0.clone();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let forward = &x - metric.gradient(&h.gradient(&x))? * step;
        let next = fs.apply(&forward)?;
        residual = metric.norm(&(&next - &x))?;
        x = next;
        path.push(x.clone());
        if residual <= tol {
            converged = true;
            break;
        }
    }

    let objective = match InducedRegularizer::new(fs) {
        Ok(reg) => step * h.value(&x) + reg.evaluate(&x, DEFAULT_EVAL_TOL)?,
        Err(_) => f64::NAN,
    };
    let report = SolveReport {
        minimizer: x.iter().copied().collect(),
        objective,
        iterations,
        converged,
        residual,
    };
    Ok((report, path))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::frame::{example_operator, example_regularizer_closed_form};
    use crate::prox::{soft_shrink, ProxMap};
    use crate::sampling::{conditioned_matrix, gaussian_vector, orthonormal_columns, trial_rng};
    use approx::assert_abs_diff_eq;

    fn scalar(v: f64) -> DVector<f64> {
        DVector::from_element(1, v)
    }

    #[test]
    fn dual_solver_on_identity_is_soft_shrinkage() {
        let x = DVector::from_vec(vec![2.0, -0.4, 1.3, -3.0]);
        let p = AnalysisProblem::new(x.clone(), DMatrix::identity(4, 4), 1.0).unwrap();
        let r = solve_analysis_dual(&p, 1e-14, 10_000);
        assert!(r.converged);
        let s = soft_shrink(&x, 1.0).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(r.minimizer[i], s[i], epsilon = 1e-7);
        }
    }

    #[test]
    fn vanishing_regularization() {
        let mut rng = trial_rng(30, 0);
        let t = conditioned_matrix(&mut rng, 6, 3, 10.0);
        let x = gaussian_vector(&mut rng, 3);
        let p = AnalysisProblem::new(x.clone(), t, 1e-12).unwrap();
        let r = solve_analysis_dual(&p, 1e-12, 10_000);
        assert!(r.converged);
        for i in 0..3 {
            assert_abs_diff_eq!(r.minimizer[i], x[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn analysis_minimizer_differs_from_frame_shrinkage() {
        let op = example_operator();
        let p = AnalysisProblem::from_operator(scalar(1.0), &op, 1.0).unwrap();
        let r = solve_analysis_dual(&p, 1e-12, 100_000);
        assert!(r.converged);
        // oracle: grid over [-2, 2] of 1/2 (1 - y)^2 + |y| + 2|y|
        let (mut best, mut arg) = (f64::INFINITY, 0.0);
        for i in 0..=400_000 {
            let y = -2.0 + 1e-5 * i as f64;
            let v = 0.5 * (1.0 - y) * (1.0 - y) + 3.0 * y.abs();
            if v < best {
                best = v;
                arg = y;
            }
        }
        assert_abs_diff_eq!(r.minimizer[0], arg, epsilon = 1e-5);
        let fs = FrameShrinkage::new(op, ProxMap::soft_shrink(1.0).unwrap());
        let y_frame = fs.apply(&scalar(1.0)).unwrap()[0];
        assert!((r.minimizer[0] - y_frame).abs() > 0.3);
        assert!(r.objective <= p.objective(&scalar(y_frame)));
    }

    #[test]
    fn synthesis_examples() {
        let x = DVector::from_vec(vec![1.5, -0.2, 0.7]);
        let s = synthesis_solution(&x, &DMatrix::identity(3, 3), 0.5).unwrap();
        assert!((s - soft_shrink(&x, 0.5).unwrap()).amax() < 1e-15);

        let r = 0.5f64.sqrt();
        let t = DMatrix::from_row_slice(1, 2, &[r, r]);
        let x = DVector::from_vec(vec![2.0, 0.0]);
        let closed = synthesis_solution(&x, &t, 0.5).unwrap();
        let p = AnalysisProblem::new(x.clone(), t.clone(), 0.5).unwrap();
        let dual = solve_analysis_dual(&p, 1e-14, 10_000);
        for i in 0..2 {
            assert_abs_diff_eq!(closed[i], dual.minimizer[i], epsilon = 1e-6);
        }

        let big = synthesis_solution(&x, &t, 1e6).unwrap();
        let projected = &x - t.transpose() * (&t * &x);
        assert!((big - projected).amax() < 1e-15);
    }

    #[test]
    fn synthesis_rejects_non_parseval_rows() {
        let t = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(synthesis_solution(&x, &t, 1.0), Err(Error::NotParsevalRow { .. })));
        let tall = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!(matches!(synthesis_solution(&x, &tall, 1.0), Err(Error::InvalidShape { .. })));
        assert!(synthesis_solution(&x, &DMatrix::identity(2, 2), 0.0).is_err());
    }

    #[test]
    fn synthesis_matches_dual_on_random_parseval_rows() {
        let mut rng = trial_rng(31, 0);
        for _ in 0..20 {
            let t = orthonormal_columns(&mut rng, 6, 3).transpose();
            let x = gaussian_vector(&mut rng, 6) * 2.0;
            let closed = synthesis_solution(&x, &t, 0.8).unwrap();
            let p = AnalysisProblem::new(x, t, 0.8).unwrap();
            let dual = solve_analysis_dual(&p, 1e-13, 100_000);
            assert!(dual.converged);
            for i in 0..6 {
                assert!((closed[i] - dual.minimizer[i]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn forward_backward_with_identity_prox_is_gradient_descent() {
        let mut rng = trial_rng(32, 0);
        let op = Arc::new(AnalysisOperator::with_default_tol(conditioned_matrix(&mut rng, 5, 3, 10.0)).unwrap());
        let fs = FrameShrinkage::new(op.clone(), ProxMap::identity());
        let b = gaussian_vector(&mut rng, 3);
        let h = SquaredDistance { center: b.clone(), metric: Some(TMetric::new(op)) };
        let r = forward_backward_t_metric(&h, &fs, &DVector::zeros(3), 0.5, 1e-12, 1_000).unwrap();
        assert!(r.converged);
        for i in 0..3 {
            assert_abs_diff_eq!(r.minimizer[i], b[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn forward_backward_without_smooth_term() {
        let fs = FrameShrinkage::new(example_operator(), ProxMap::soft_shrink(1.0).unwrap());
        let x0 = scalar(2.0);
        let (r, path) = forward_backward_path(&NoSmoothTerm, &fs, &x0, 1.0, 1e-12, 100).unwrap();
        assert_eq!(path[1], fs.apply(&x0).unwrap());
        assert!(r.converged);
        let last = DVector::from_vec(r.minimizer.clone());
        assert!((fs.apply(&last).unwrap() - last).amax() <= 1e-12);
    }

    #[test]
    fn forward_backward_matches_grid_minimizer() {
        // limit minimizes 1/2 (y - 1)^2 + f(y)
        let fs = FrameShrinkage::new(example_operator(), ProxMap::soft_shrink(1.0).unwrap());
        let h = SquaredDistance { center: scalar(1.0), metric: None };
        let r = forward_backward_t_metric(&h, &fs, &scalar(3.0), 1.0, 1e-12, 10_000).unwrap();
        assert!(r.converged);
        let (mut best, mut arg) = (f64::INFINITY, 0.0);
        for i in 0..=400_000 {
            let y = -2.0 + 1e-5 * i as f64;
            let v = 0.5 * (y - 1.0) * (y - 1.0) + example_regularizer_closed_form(y);
            if v < best {
                best = v;
                arg = y;
            }
        }
        assert_abs_diff_eq!(r.minimizer[0], arg, epsilon = 1e-5);
        assert_abs_diff_eq!(r.objective, best, epsilon = 1e-6);
    }

    #[test]
    fn forward_backward_objective_is_monotone() {
        let mut rng = trial_rng(33, 0);
        let op = Arc::new(AnalysisOperator::with_default_tol(conditioned_matrix(&mut rng, 8, 4, 20.0)).unwrap());
        let fs = FrameShrinkage::new(op.clone(), ProxMap::soft_shrink(0.5).unwrap());
        let reg = InducedRegularizer::new(&fs).unwrap();
        let b = gaussian_vector(&mut rng, 4) * 3.0;
        let h = SquaredDistance { center: b, metric: None };
        // Euclidean h has T-metric Lipschitz constant 1 / sigma_min^2.
        let step = op.frame_bounds().0;
        let (_, path) = forward_backward_path(&h, &fs, &DVector::zeros(4), step, 1e-10, 500).unwrap();
        let objective = |x: &DVector<f64>| step * h.value(x) + reg.evaluate(x, 1e-12).unwrap();
        for pair in path.windows(2).skip(1) {
            assert!(objective(&pair[1]) <= objective(&pair[0]) + 1e-12);
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(AnalysisProblem::new(DVector::zeros(2), DMatrix::identity(2, 2), 0.0).is_err());
        assert!(AnalysisProblem::new(DVector::zeros(3), DMatrix::identity(2, 2), 1.0).is_err());
        let fs = FrameShrinkage::new(example_operator(), ProxMap::identity());
        assert!(forward_backward_t_metric(&NoSmoothTerm, &fs, &scalar(1.0), 0.0, 1e-9, 10).is_err());
        assert!(forward_backward_t_metric(&NoSmoothTerm, &fs, &DVector::zeros(2), 1.0, 1e-9, 10).is_err());
    }
}
