//! Iterative evaluation of proximity operators that have no closed form.
//!
//! Objectives are described in lifted form
//!
//! ```text
//! f(y) = min_w 1/2 ||w||^2 + g(L [y; w])
//! ```
//!
//! with `g` prox-friendly and `L` linear (the identity for a plain `g`). The
//! prox problem `min_y 1/2 ||x - y||_M^2 + f(y)` then becomes a strongly convex
//! quadratic plus `g` composed with `L`, which is split by ADMM (Douglas–Rachford
//! applied to the dual) using the closed-form prox of `g` and one Cholesky
//! factorization.

use nalgebra::{DMatrix, DVector};

use super::ProxFunction;
use crate::error::{check_dim, Error, Result};
use crate::operator::TMetric;
use crate::report::SolveReport;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100_000;

const PENALTY: f64 = 1.0;

/// Lifted description `f(y) = min_w 1/2 ||w||^2 + outer(map [y; w])`.
pub struct Lifting<'a> {
    /// `None` stands for the identity on `R^d` (and then `aux_dim == 0`).
    pub map: Option<&'a DMatrix<f64>>,
    pub aux_dim: usize,
    pub outer: &'a dyn ProxFunction,
}

/// A function whose prox can be computed by [`numeric_prox`].
pub trait SplitObjective {
    fn dim(&self) -> usize;
    fn lifting(&self) -> Lifting<'_>;
}

/// A prox-friendly function used directly on `R^dim`.
pub struct PlainObjective<'a> {
    pub g: &'a dyn ProxFunction,
    pub dim: usize,
}

impl SplitObjective for PlainObjective<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn lifting(&self) -> Lifting<'_> {
        Lifting { map: None, aux_dim: 0, outer: self.g }
    }
}

/// Minimizes `1/2 ||x - y||^2 + f(y)`, measured in the `T` metric when one is
/// given and Euclidean otherwise.
///
/// Stops once the combined change of the coefficient and multiplier iterates
/// drops to `tol`; hitting `max_iter` first returns the last iterate with
/// `converged == false`. The reported objective evaluates `g` at the
/// coefficient iterate, so it upper-bounds the true objective at the minimizer.
pub fn numeric_prox(
    f: &dyn SplitObjective,
    x: &DVector<f64>,
    metric: Option<&TMetric>,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport> {
    let d = f.dim();
    check_dim(d, x.len())?;
    if let Some(m) = metric {
        check_dim(d, m.operator().cols())?;
    }
    let lifting = f.lifting();
    let k = lifting.aux_dim;
    let total = d + k;
    if let Some(l) = lifting.map {
        check_dim(total, l.ncols())?;
    } else {
        check_dim(0, k)?;
    }

    // Quadratic part 1/2 v^T Q v - b^T v with Q = blockdiag(M, I_k), b = [M x; 0].
    let mut q = DMatrix::<f64>::identity(total, total);
    let mut b = DVector::<f64>::zeros(total);
    match metric {
        Some(m) => {
            let gram = m.gram();
            q.view_mut((0, 0), (d, d)).copy_from(&gram);
            b.rows_mut(0, d).copy_from(&(gram * x));
        }
        None => b.rows_mut(0, d).copy_from(x),
    }

    let apply_l = |v: &DVector<f64>| match lifting.map {
        Some(l) => l * v,
        None => v.clone(),
    };
    let apply_lt = |u: &DVector<f64>| match lifting.map {
        Some(l) => l.tr_mul(u),
        None => u.clone(),
    };

    let system = match lifting.map {
        Some(l) => &q + l.tr_mul(l) * PENALTY,
        None => &q + DMatrix::<f64>::identity(total, total) * PENALTY,
    };
    let chol = system.cholesky().ok_or(Error::InvalidShape {
        rows: total,
        cols: total,
        reason: "splitting system is not positive definite",
    })?;

    let mut v = DVector::zeros(total);
    v.rows_mut(0, d).copy_from(x);
    let mut u = apply_l(&v);
    let mut s = DVector::zeros(u.len());
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        v = chol.solve(&(&b + apply_lt(&(&u - &s)) * PENALTY));
        let lv = apply_l(&v);
        let u_next = lifting.outer.prox(&(&lv + &s), 1.0 / PENALTY);
        let s_next = &s + &lv - &u_next;
        residual = (&u_next - &u).norm() + (&s_next - &s).norm();
        u = u_next;
        s = s_next;
        if residual <= tol {
            converged = true;
            break;
        }
    }

    let y = v.rows(0, d).into_owned();
    let w = v.rows(d, k);
    let diff = x - &y;
    let fidelity = match metric {
        Some(m) => m.norm(&diff)?.powi(2),
        None => diff.norm_squared(),
    };
    let objective = 0.5 * fidelity + 0.5 * w.norm_squared() + lifting.outer.value(&u);

    Ok(SolveReport {
        minimizer: y.iter().copied().collect(),
        objective,
        iterations,
        converged,
        residual,
    })
}
