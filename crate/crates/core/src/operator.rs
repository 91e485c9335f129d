//! Injective dense operators, their Moore–Penrose inverse and the weighted
//! geometry `<x, y>_T = <Tx, Ty>` they induce on the signal space.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{check_dim, Error, Result};
use crate::report::{nan_max, VerifyReport};
use crate::sampling::{max_over_trials, unit_vector};

/// Relative numerical-rank tolerance used when none is given.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Number of random unit vectors used to check the frame inequalities.
pub const FRAME_BOUND_SAMPLES: usize = 100;

/// Analysis operator `T: R^d -> R^n` of a finite frame (`n >= d`, full column rank).
///
/// All derived quantities are computed once at construction from a singular
/// value decomposition and never change afterwards.
#[derive(Clone, Debug)]
pub struct AnalysisOperator {
    matrix: DMatrix<f64>,
    pinv: DMatrix<f64>,
    range_proj: DMatrix<f64>,
    null_basis: DMatrix<f64>,
    singular_values: DVector<f64>,
    // Right singular vectors as columns, d x d.
    right_vectors: DMatrix<f64>,
    frame_bounds: (f64, f64),
}

impl AnalysisOperator {
    /// Builds the operator, rejecting matrices whose smallest singular value is
    /// at most `rank_tol * sigma_max`.
    pub fn new(matrix: DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        let (n, d) = matrix.shape();
        if d == 0 || n < d {
            return Err(Error::InvalidShape {
                rows: n,
                cols: d,
                reason: "expected rows >= cols >= 1",
            });
        }
        if let Some(pos) = matrix.iter().position(|v| !v.is_finite()) {
            // column-major storage
            return Err(Error::NonFinite { row: pos % n, col: pos / n });
        }

        let svd = SVD::new(matrix.clone(), true, true);
        let sigma = svd.singular_values.clone();
        let sigma_max = sigma[0];
        let sigma_min = sigma[d - 1];
        if !(sigma_min > rank_tol * sigma_max) {
            return Err(Error::RankDeficient { sigma_min, sigma_max, rank_tol });
        }
        let u = svd.u.expect("left singular vectors requested");
        let v = svd.v_t.expect("right singular vectors requested").transpose();

        // T^+ = V diag(1/sigma) U^T
        let inv_sigma = sigma.map(|s| 1.0 / s);
        let pinv = &v * DMatrix::from_diagonal(&inv_sigma) * u.transpose();
        let range_proj = &u * u.transpose();
        let null_basis = complement_basis(&u);

        Ok(AnalysisOperator {
            matrix,
            pinv,
            range_proj,
            null_basis,
            frame_bounds: (sigma_min * sigma_min, sigma_max * sigma_max),
            singular_values: sigma,
            right_vectors: v,
        })
    }

    pub fn with_default_tol(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(matrix, DEFAULT_RANK_TOL)
    }

    pub fn identity(d: usize) -> Self {
        Self::with_default_tol(DMatrix::identity(d, d)).expect("identity is injective")
    }

    /// Coefficient-space dimension `n`.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Signal-space dimension `d`.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    /// Orthogonal projection `T T^+` onto the range of `T`.
    pub fn range_proj(&self) -> &DMatrix<f64> {
        &self.range_proj
    }

    /// Orthonormal columns spanning the kernel of `T^*` (`n x (n - d)`).
    pub fn null_basis(&self) -> &DMatrix<f64> {
        &self.null_basis
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    /// Optimal frame bounds `(A, B) = (sigma_min^2, sigma_max^2)`.
    pub fn frame_bounds(&self) -> (f64, f64) {
        self.frame_bounds
    }

    /// Operator norm of `T`.
    pub fn norm(&self) -> f64 {
        self.singular_values[0]
    }

    /// Operator norm of `T^+`.
    pub fn pinv_norm(&self) -> f64 {
        1.0 / self.singular_values[self.cols() - 1]
    }

    pub fn is_bijective(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.cols(), x.len())?;
        Ok(&self.matrix * x)
    }

    /// Synthesis `T^* c`.
    pub fn adjoint(&self, c: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.rows(), c.len())?;
        Ok(self.matrix.tr_mul(c))
    }

    pub fn apply_pinv(&self, c: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.rows(), c.len())?;
        Ok(&self.pinv * c)
    }

    /// Solves `(T^* T) x = b` through the stored decomposition `V diag(sigma^2) V^T`.
    pub fn solve_gram(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.cols(), b.len())?;
        let mut coeffs = self.right_vectors.tr_mul(b);
        for (c, s) in coeffs.iter_mut().zip(self.singular_values.iter()) {
            *c /= s * s;
        }
        Ok(&self.right_vectors * coeffs)
    }
}

/// Orthonormal basis of the orthogonal complement of the span of the columns of `u`.
///
/// Uses the trailing columns of the full Householder `Q` of `u = Q R`.
fn complement_basis(u: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = u.shape();
    if n == d {
        return DMatrix::zeros(n, 0);
    }
    let qr = u.clone().qr();
    let mut q_t = DMatrix::<f64>::identity(n, n);
    qr.q_tr_mul(&mut q_t);
    q_t.rows(d, n - d).transpose()
}

/// Builds an operator with [`DEFAULT_RANK_TOL`] unless a tolerance is given.
pub fn build_operator(matrix: DMatrix<f64>, rank_tol: f64) -> Result<Arc<AnalysisOperator>> {
    AnalysisOperator::new(matrix, rank_tol).map(Arc::new)
}

/// The signal space re-normed by `||x||_T = ||T x||`.
#[derive(Clone, Debug)]
pub struct TMetric {
    operator: Arc<AnalysisOperator>,
}

impl TMetric {
    pub fn new(operator: Arc<AnalysisOperator>) -> Self {
        TMetric { operator }
    }

    pub fn operator(&self) -> &AnalysisOperator {
        &self.operator
    }

    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        Ok(self.operator.apply(x)?.dot(&self.operator.apply(y)?))
    }

    pub fn norm(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.operator.apply(x)?.norm())
    }

    /// Converts a Euclidean gradient into the gradient with respect to `<.,.>_T`,
    /// i.e. `(T^* T)^{-1} grad`.
    pub fn gradient(&self, euclidean_grad: &DVector<f64>) -> Result<DVector<f64>> {
        self.operator.solve_gram(euclidean_grad)
    }

    /// Gram matrix `T^* T` representing the metric.
    pub fn gram(&self) -> DMatrix<f64> {
        self.operator.matrix.tr_mul(&self.operator.matrix)
    }
}

pub fn t_inner(metric: &TMetric, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    metric.inner(x, y)
}

pub fn t_gradient(metric: &TMetric, euclidean_grad: &DVector<f64>) -> Result<DVector<f64>> {
    metric.gradient(euclidean_grad)
}

/// Checks the Moore–Penrose identities and the frame inequalities in max-entry norm.
pub fn verify_operator_identities(op: &AnalysisOperator, tol: f64, seed: u64) -> VerifyReport {
    let d = op.cols();
    let t = op.matrix();
    let p = op.range_proj();
    let tp = t * op.pinv();

    let left_inverse = (op.pinv() * t - DMatrix::<f64>::identity(d, d)).amax();
    let idempotent = (&tp * &tp - &tp).amax();
    let symmetric = (&tp - tp.transpose()).amax();
    let pinv_absorbs_projection = (op.pinv() * p - op.pinv()).amax();

    let (a, b) = op.frame_bounds();
    let bounds = max_over_trials(seed, FRAME_BOUND_SAMPLES, |rng| {
        let x = unit_vector(rng, d);
        let energy = (t * x).norm_squared();
        (a - energy).max(energy - b)
    });

    let violation = [left_inverse, idempotent, symmetric, pinv_absorbs_projection, bounds]
        .into_iter()
        .fold(f64::NEG_INFINITY, nan_max);
    VerifyReport::new("operator_identities", FRAME_BOUND_SAMPLES, violation.max(0.0), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{gaussian_matrix, gaussian_vector, trial_rng};
    use approx::assert_abs_diff_eq;

    fn col(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(values.len(), 1, values)
    }

    #[test]
    fn single_frame_vector() {
        let op = AnalysisOperator::with_default_tol(col(&[1.0, 2.0])).unwrap();
        // T^T T = 5, so T^+ = T^T / 5; confirm independently by T^+ T = 1.
        assert_abs_diff_eq!(op.pinv()[(0, 0)], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(op.pinv()[(0, 1)], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!((op.pinv() * op.matrix())[(0, 0)], 1.0, epsilon = 1e-15);
        let (a, b) = op.frame_bounds();
        assert_abs_diff_eq!(a, 5.0, epsilon = 1e-13);
        assert_abs_diff_eq!(b, 5.0, epsilon = 1e-13);

        let nb = op.null_basis();
        assert_eq!(nb.shape(), (2, 1));
        let dir = DVector::from_vec(vec![-2.0, 1.0]) / 5f64.sqrt();
        assert_abs_diff_eq!(nb.column(0).dot(&dir).abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn identity_and_padded_identity() {
        let op = AnalysisOperator::identity(3);
        assert_eq!(op.pinv(), &DMatrix::identity(3, 3));
        assert_eq!(op.frame_bounds(), (1.0, 1.0));
        assert_eq!(op.null_basis().ncols(), 0);
        assert!(op.is_bijective());

        let padded = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let op = AnalysisOperator::with_default_tol(padded).unwrap();
        let expected = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_abs_diff_eq!((op.pinv() - expected).amax(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(op.null_basis()[(2, 0)].abs(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(op.null_basis().rows(0, 2).amax(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_rank_deficient_and_bad_shapes() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            AnalysisOperator::with_default_tol(m),
            Err(Error::RankDeficient { .. })
        ));
        assert!(matches!(
            AnalysisOperator::with_default_tol(DMatrix::zeros(3, 2)),
            Err(Error::RankDeficient { .. })
        ));
        assert!(matches!(
            AnalysisOperator::with_default_tol(DMatrix::zeros(1, 2)),
            Err(Error::InvalidShape { .. })
        ));
        let mut m = DMatrix::identity(2, 2);
        m[(1, 0)] = f64::NAN;
        assert!(matches!(
            AnalysisOperator::with_default_tol(m),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
    }

    #[test]
    fn inner_products() {
        let metric = TMetric::new(Arc::new(AnalysisOperator::with_default_tol(col(&[1.0, 2.0])).unwrap()));
        let one = DVector::from_element(1, 1.0);
        assert_abs_diff_eq!(t_inner(&metric, &one, &one).unwrap(), 5.0, epsilon = 1e-15);
        assert_eq!(t_inner(&metric, &DVector::zeros(1), &one).unwrap(), 0.0);

        let eye = TMetric::new(Arc::new(AnalysisOperator::identity(2)));
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let y = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(t_inner(&eye, &x, &y).unwrap(), 11.0);
        assert!(matches!(
            t_inner(&eye, &one, &y),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn gradients() {
        let metric = TMetric::new(Arc::new(AnalysisOperator::with_default_tol(col(&[1.0, 2.0])).unwrap()));
        let g = t_gradient(&metric, &DVector::from_element(1, 5.0)).unwrap();
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-14);

        let m = DMatrix::from_row_slice(3, 2, &[2.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let metric = TMetric::new(Arc::new(AnalysisOperator::with_default_tol(m).unwrap()));
        let g = t_gradient(&metric, &DVector::from_vec(vec![4.0, 3.0])).unwrap();
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[1], 3.0, epsilon = 1e-14);

        let v = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let eye = TMetric::new(Arc::new(AnalysisOperator::identity(3)));
        assert_eq!(t_gradient(&eye, &v).unwrap(), v);
    }

    #[test]
    fn random_operator_passes_identities() {
        let mut rng = trial_rng(42, 0);
        let op = AnalysisOperator::with_default_tol(gaussian_matrix(&mut rng, 6, 3)).unwrap();
        let report = verify_operator_identities(&op, 1e-10, 1);
        assert!(report.pass, "{report:?}");

        let report = verify_operator_identities(&AnalysisOperator::identity(4), 1e-10, 1);
        assert!(report.pass);
        assert!(report.max_violation <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn tight_single_vector_frame() {
        let op = AnalysisOperator::with_default_tol(col(&[1.0, 2.0])).unwrap();
        let mut rng = trial_rng(3, 0);
        for _ in 0..20 {
            let x = gaussian_vector(&mut rng, 1);
            let energy = op.apply(&x).unwrap().norm_squared();
            assert_abs_diff_eq!(energy, 5.0 * x[0] * x[0], epsilon = 1e-12 * energy.max(1.0));
        }
    }

    #[test]
    fn norm_equivalence_and_null_basis() {
        let mut rng = trial_rng(5, 0);
        for trial in 0..20 {
            let m = gaussian_matrix(&mut rng, 4 + trial % 5, 3);
            let op = Arc::new(AnalysisOperator::with_default_tol(m).unwrap());
            let metric = TMetric::new(op.clone());
            for _ in 0..10 {
                let x = gaussian_vector(&mut rng, 3);
                let tn = metric.norm(&x).unwrap();
                let n = x.norm();
                assert!(tn / op.norm() <= n * (1.0 + 1e-12));
                assert!(n <= op.pinv_norm() * tn * (1.0 + 1e-12));
            }
            let nb = op.null_basis();
            let gram = nb.tr_mul(nb);
            assert!((gram - DMatrix::identity(nb.ncols(), nb.ncols())).amax() < 1e-12);
            assert!(op.matrix().tr_mul(nb).amax() < 1e-12);
            assert!((op.range_proj() * nb).amax() < 1e-12);
        }
    }

    #[test]
    fn frame_bounds_attained_on_singular_vectors() {
        let mut rng = trial_rng(6, 0);
        let op = AnalysisOperator::with_default_tol(gaussian_matrix(&mut rng, 5, 3)).unwrap();
        let svd = SVD::new(op.matrix().clone(), false, true);
        let v_t = svd.v_t.unwrap();
        let (a, b) = op.frame_bounds();
        let top = v_t.row(0).transpose();
        let bottom = v_t.row(2).transpose();
        assert_abs_diff_eq!(op.apply(&top).unwrap().norm_squared(), b, epsilon = 1e-12 * b);
        assert_abs_diff_eq!(op.apply(&bottom).unwrap().norm_squared(), a, epsilon = 1e-12 * b);
    }

    #[test]
    fn t_gradient_represents_euclidean_gradient() {
        let mut rng = trial_rng(8, 0);
        let metric = TMetric::new(Arc::new(
            AnalysisOperator::with_default_tol(gaussian_matrix(&mut rng, 7, 4)).unwrap(),
        ));
        for _ in 0..20 {
            let g = gaussian_vector(&mut rng, 4);
            let h = gaussian_vector(&mut rng, 4);
            let tg = metric.gradient(&g).unwrap();
            let lhs = metric.inner(&tg, &h).unwrap();
            assert_abs_diff_eq!(lhs, g.dot(&h), epsilon = 1e-11 * (1.0 + g.norm() * h.norm()));
        }
    }
}
