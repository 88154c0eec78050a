//! Finite-difference checks of user-supplied derivatives.

use nalgebra::DMatrix;

use super::problem::NlpProblem;

/// Largest relative error between analytic and central-difference first
/// derivatives (objective gradient and both constraint Jacobians) at `x`.
/// The error of each entry is `|fd - analytic| / max(1, |analytic|)`.
pub fn check_gradients<P: NlpProblem + ?Sized>(p: &P, x: &[f64], h: f64) -> f64 {
    let n = p.n_vars();
    let (me, mi) = (p.n_eq(), p.n_ineq());
    let mut grad = vec![0.0; n];
    p.objective_gradient(x, &mut grad);
    let mut je = DMatrix::zeros(me, n);
    let mut ji = DMatrix::zeros(mi, n);
    p.eq_jacobian(x, &mut je);
    p.ineq_jacobian(x, &mut ji);

    let rel = |fd: f64, an: f64| (fd - an).abs() / an.abs().max(1.0);
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    let (mut ep, mut em) = (vec![0.0; me], vec![0.0; me]);
    let (mut ip, mut im) = (vec![0.0; mi], vec![0.0; mi]);
    for j in 0..n {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        let fd = (p.objective(&xp) - p.objective(&xm)) / (2.0 * h);
        worst = worst.max(rel(fd, grad[j]));
        p.eq_constraints(&xp, &mut ep);
        p.eq_constraints(&xm, &mut em);
        for r in 0..me {
            worst = worst.max(rel((ep[r] - em[r]) / (2.0 * h), je[(r, j)]));
        }
        p.ineq_constraints(&xp, &mut ip);
        p.ineq_constraints(&xm, &mut im);
        for r in 0..mi {
            worst = worst.max(rel((ip[r] - im[r]) / (2.0 * h), ji[(r, j)]));
        }
        xp[j] = x[j];
        xm[j] = x[j];
    }
    worst
}

/// Same measure for the Lagrangian Hessian, differencing the Lagrangian
/// gradient.
pub fn check_hessian<P: NlpProblem + ?Sized>(
    p: &P,
    x: &[f64],
    eq_mult: &[f64],
    ineq_mult: &[f64],
    h: f64,
) -> f64 {
    let n = p.n_vars();
    let mut hess = DMatrix::zeros(n, n);
    p.lagrangian_hessian(x, 1.0, eq_mult, ineq_mult, &mut hess);
    let lag_grad = |x: &[f64]| {
        let mut g = vec![0.0; n];
        p.objective_gradient(x, &mut g);
        let mut je = DMatrix::zeros(p.n_eq(), n);
        let mut ji = DMatrix::zeros(p.n_ineq(), n);
        p.eq_jacobian(x, &mut je);
        p.ineq_jacobian(x, &mut ji);
        for j in 0..n {
            for (r, m) in eq_mult.iter().enumerate() {
                g[j] += m * je[(r, j)];
            }
            for (r, m) in ineq_mult.iter().enumerate() {
                g[j] += m * ji[(r, j)];
            }
        }
        g
    };
    let mut worst = 0.0f64;
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        let gp = lag_grad(&xp);
        let gm = lag_grad(&xm);
        for i in 0..n {
            let fd = (gp[i] - gm[i]) / (2.0 * h);
            worst = worst.max((fd - hess[(i, j)]).abs() / hess[(i, j)].abs().max(1.0));
        }
        xp[j] = x[j];
        xm[j] = x[j];
    }
    worst
}
