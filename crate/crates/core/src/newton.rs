//! Newton-Raphson helpers shared by the estimators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Value, gradient and Hessian of a scalar objective.
#[derive(Clone, Debug)]
pub struct Objective {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl Objective {
    pub fn zeros(n: usize) -> Self {
        Self { value: 0.0, grad: DVector::zeros(n), hess: DMatrix::zeros(n, n) }
    }

    pub fn accumulate(mut self, other: &Objective) -> Self {
        self.value += other.value;
        self.grad += &other.grad;
        self.hess += &other.hess;
        self
    }
}

fn min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    let sym = (h + h.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Newton direction H^{-1} g for a positive definite H.
pub fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Result<DVector<f64>> {
    match hess.clone().cholesky() {
        Some(ch) => Ok(ch.solve(grad)),
        None => Err(Error::NotPositiveDefinite { min_eigenvalue: min_eigenvalue(hess) }),
    }
}

/// One minimization step `param - H^{-1} grad`; rejects a non positive definite Hessian.
pub fn newton_step(grad: &DVector<f64>, hess: &DMatrix<f64>, param: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(param - newton_direction(grad, hess)?)
}

/// Outcome of a damped Newton minimization.
#[derive(Clone, Debug)]
pub struct NewtonResult {
    pub param: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    /// False when the line search stalled before the decrement reached the tolerance.
    pub converged: bool,
}

/// Damped Newton minimization. Stops when the Newton decrement g'H^{-1}g falls
/// below `tol`. `valid` rejects parameters outside the domain during line search.
pub fn minimize(
    f: impl FnMut(&DVector<f64>) -> Objective,
    valid: impl Fn(&DVector<f64>) -> bool,
    x0: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonResult> {
    run(f, valid, x0, tol, max_iter, false)
}

/// Like [`minimize`], but an indefinite Hessian is shifted by a multiple of the
/// identity until it is positive definite instead of failing.
pub fn minimize_shifted(
    f: impl FnMut(&DVector<f64>) -> Objective,
    valid: impl Fn(&DVector<f64>) -> bool,
    x0: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonResult> {
    run(f, valid, x0, tol, max_iter, true)
}

fn shifted_direction(grad: &DVector<f64>, hess: &DMatrix<f64>) -> Result<DVector<f64>> {
    match newton_direction(grad, hess) {
        Err(Error::NotPositiveDefinite { min_eigenvalue }) => {
            let scale = hess.amax().max(f64::MIN_POSITIVE);
            let mut shift = -min_eigenvalue + 1e-8 * scale;
            for _ in 0..20 {
                let h = hess + DMatrix::identity(hess.nrows(), hess.ncols()) * shift;
                if let Ok(d) = newton_direction(grad, &h) {
                    return Ok(d);
                }
                shift *= 2.0;
            }
            Err(Error::NotPositiveDefinite { min_eigenvalue })
        }
        other => other,
    }
}

fn run(
    mut f: impl FnMut(&DVector<f64>) -> Objective,
    valid: impl Fn(&DVector<f64>) -> bool,
    x0: DVector<f64>,
    tol: f64,
    max_iter: usize,
    shift: bool,
) -> Result<NewtonResult> {
    let mut x = x0;
    let mut obj = f(&x);
    if !obj.value.is_finite() {
        return Err(Error::InvalidParameter("objective is not finite at the starting point".into()));
    }
    for it in 0..max_iter {
        let dir = if shift { shifted_direction(&obj.grad, &obj.hess)? } else { newton_direction(&obj.grad, &obj.hess)? };
        let decrement = obj.grad.dot(&dir);
        if decrement <= tol {
            return Ok(NewtonResult { param: x, value: obj.value, iterations: it, converged: true });
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand = &x - &dir * t;
            if valid(&cand) {
                let o = f(&cand);
                if o.value.is_finite() && o.value <= obj.value {
                    accepted = Some((cand, o));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, o)) => {
                x = cand;
                obj = o;
            }
            None => return Ok(NewtonResult { param: x, value: obj.value, iterations: it, converged: false }),
        }
    }
    Err(Error::NoConvergence(format!("{max_iter} Newton iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_on_a_parabola() {
        let x = newton_step(&DVector::from_element(1, -6.0), &DMatrix::from_element(1, 1, 2.0), &DVector::zeros(1)).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_hessian_rejected() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        match newton_step(&DVector::zeros(2), &h, &DVector::zeros(2)) {
            Err(Error::NotPositiveDefinite { min_eigenvalue }) => assert!((min_eigenvalue + 2.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minimizes_smooth_convex_function() {
        let f = |x: &DVector<f64>| {
            let (a, b) = (x[0], x[1]);
            Objective {
                value: (a - 1.0).powi(4) + (b + 2.0).powi(2) + a * a,
                grad: DVector::from_vec(vec![4.0 * (a - 1.0).powi(3) + 2.0 * a, 2.0 * (b + 2.0)]),
                hess: DMatrix::from_row_slice(2, 2, &[12.0 * (a - 1.0).powi(2) + 2.0, 0.0, 0.0, 2.0]),
            }
        };
        let r = minimize(f, |_| true, DVector::from_vec(vec![3.0, 3.0]), 1e-20, 100).unwrap();
        assert!((r.param[1] + 2.0).abs() < 1e-9);
        let a = r.param[0];
        assert!((4.0 * (a - 1.0).powi(3) + 2.0 * a).abs() < 1e-9);
    }
}
