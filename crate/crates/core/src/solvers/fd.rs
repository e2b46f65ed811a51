//! Central finite differences, used as verification oracles.

use nalgebra::{DMatrix, DVector};

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn fd_gradient<F>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp);
        xp[i] = xi - h;
        let fm = f(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central-difference Jacobian of a vector function (rows = outputs).
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let m = f(x).len();
    let mut jac = DMatrix::zeros(m, x.len());
    let mut xp = x.clone();
    for j in 0..x.len() {
        let xj = x[j];
        xp[j] = xj + h;
        let fp = f(&xp);
        xp[j] = xj - h;
        let fm = f(&xp);
        xp[j] = xj;
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    jac
}

/// Symmetrized central-difference Hessian from an analytic gradient.
pub fn fd_hessian<G>(grad: G, x: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let jac = fd_jacobian(grad, x, h);
    (&jac + jac.transpose()) * 0.5
}
