//! Small dense Levenberg-Marquardt solver used by every fitter in the crate.
//!
//! Steps are damped with Marquardt's diagonal scaling and the damping is
//! updated with Nielsen's gain-ratio rule. Problems supply residuals and
//! (optionally) an analytic Jacobian; a central-difference Jacobian is the
//! default.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub trait LeastSquares {
    fn residuals(&self, x: &DVector<f64>) -> DVector<f64>;

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        numeric_jacobian(|p| self.residuals(p), x)
    }
}

pub fn numeric_jacobian<F>(f: F, x: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let r0 = f(x);
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    for j in 0..x.len() {
        let h = 1e-6 * x[j].abs().max(1e-6);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let col = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative step tolerance.
    pub xtol: f64,
    /// Relative cost-reduction tolerance.
    pub ftol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iterations: 500, xtol: 1e-15, ftol: 1e-30 }
    }
}

#[derive(Debug, Clone)]
pub struct LmSolution {
    pub x: DVector<f64>,
    pub residuals: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    /// Sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl LmSolution {
    pub fn dof(&self) -> usize {
        self.residuals.len().saturating_sub(self.x.len())
    }

    /// Residual variance estimate RSS / (m - n).
    pub fn residual_variance(&self) -> f64 {
        match self.dof() {
            0 => 0.0,
            dof => self.cost / dof as f64,
        }
    }

    /// Unscaled inverse of J^T J, or `None` if singular.
    pub fn inverse_normal_matrix(&self) -> Option<DMatrix<f64>> {
        let jtj = self.jacobian.transpose() * &self.jacobian;
        // Equilibrate before inverting; parameters can differ by many decades.
        let n = jtj.nrows();
        let d: Vec<f64> = (0..n).map(|i| jtj[(i, i)].sqrt()).collect();
        if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return None;
        }
        let scaled = DMatrix::from_fn(n, n, |i, j| jtj[(i, j)] / (d[i] * d[j]));
        let inv = scaled.try_inverse()?;
        Some(DMatrix::from_fn(n, n, |i, j| inv[(i, j)] / (d[i] * d[j])))
    }

    /// Parameter covariance s^2 (J^T J)^-1 with s^2 the residual variance.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        self.inverse_normal_matrix().map(|m| m * self.residual_variance())
    }

    /// Square roots of the covariance diagonal (zero for a noiseless fit).
    pub fn standard_errors(&self) -> Option<DVector<f64>> {
        self.covariance()
            .map(|c| DVector::from_iterator(c.nrows(), (0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt())))
    }
}

pub fn minimize<P: LeastSquares + ?Sized>(problem: &P, x0: DVector<f64>, opts: LmOptions) -> Result<LmSolution> {
    let mut x = x0;
    let mut r = problem.residuals(&x);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailure("non-finite residuals at the initial guess".into()));
    }
    if r.len() < x.len() {
        return Err(Error::InsufficientData(format!(
            "{} residuals for {} parameters",
            r.len(),
            x.len()
        )));
    }
    let mut cost = r.norm_squared();
    let mut jac = problem.jacobian(&x);
    let mut lambda = -1.0;
    let mut nu = 2.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let diag: Vec<f64> = (0..x.len()).map(|i| jtj[(i, i)].max(1e-300)).collect();
        if lambda < 0.0 {
            lambda = 1e-3;
        }
        if g.iter().all(|v| *v == 0.0) || cost == 0.0 {
            converged = true;
            break;
        }

        let mut a = jtj.clone();
        for (i, d) in diag.iter().enumerate() {
            a[(i, i)] += lambda * d;
        }
        let step = match a.cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => {
                lambda *= nu;
                nu *= 2.0;
                if lambda > 1e20 {
                    break;
                }
                continue;
            }
        };

        let x_new = &x + &step;
        let r_new = problem.residuals(&x_new);
        let cost_new = if r_new.iter().all(|v| v.is_finite()) { r_new.norm_squared() } else { f64::INFINITY };

        let predicted = -(step.dot(&g) * 2.0 + step.dot(&(&jtj * &step)));
        let rho = if predicted > 0.0 { (cost - cost_new) / predicted } else { -1.0 };

        let small_step = step.norm() <= opts.xtol * (x.norm() + opts.xtol);

        if cost_new < cost {
            let rel_drop = (cost - cost_new) / cost;
            x = x_new;
            r = r_new;
            cost = cost_new;
            jac = problem.jacobian(&x);
            lambda *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
            if small_step || rel_drop < opts.ftol || cost == 0.0 {
                converged = true;
                break;
            }
        } else {
            if small_step {
                converged = true;
                break;
            }
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e20 {
                // No descent is possible from here: at a minimum to machine precision.
                converged = true;
                break;
            }
        }
    }

    Ok(LmSolution { x, residuals: r, jacobian: jac, cost, iterations, converged })
}

/// Ordinary linear least squares `min |A c - y|` via SVD.
pub fn linear_lstsq(a: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().svd(true, true).solve(y, 1e-14).ok()
}
