//! Primal-dual interior-point method for [`NlpProblem`].
//!
//! Inequalities are turned into equalities with non-negative slacks, bounds
//! are handled by a logarithmic barrier, and each iteration solves the
//! symmetric KKT system with inertia correction so the step is a descent
//! direction for an exact-penalty merit function. The barrier parameter
//! follows the monotone Fiacco-McCormick rule. Variables with equal lower
//! and upper bounds are held fixed and removed from the linear algebra.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ldl::Ldlt;
use super::problem::NlpProblem;

#[derive(Debug, Error, PartialEq)]
pub enum NlpError {
    #[error("starting point has length {got}, problem has {expected} variables")]
    StartDimension { expected: usize, got: usize },

    #[error("variable {name} has empty bounds [{lb}, {ub}]")]
    EmptyBounds { name: String, lb: f64, ub: f64 },

    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { what: String, iteration: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlpOptions {
    /// Scaled overall KKT error at which the barrier loop stops.
    pub tol: f64,
    pub stationarity_tol: f64,
    pub feasibility_tol: f64,
    pub complementarity_tol: f64,
    pub max_iter: usize,
    pub mu_init: f64,
    /// Relative distance the start is pushed inside finite bounds.
    pub bound_push: f64,
}

impl Default for NlpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            stationarity_tol: 1e-6,
            feasibility_tol: 1e-6,
            complementarity_tol: 1e-6,
            max_iter: 500,
            mu_init: 1e-1,
            bound_push: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NlpStatus {
    Optimal,
    MaxIterations,
    InfeasibleDetected,
    /// Line search could not make progress away from a KKT point.
    Stalled,
}

/// Unscaled first-order optimality measures (max norms).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub eq_feasibility: f64,
    pub ineq_feasibility: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn within(&self, opts: &NlpOptions) -> bool {
        self.stationarity <= opts.stationarity_tol
            && self.eq_feasibility <= opts.feasibility_tol
            && self.ineq_feasibility <= opts.feasibility_tol
            && self.complementarity <= opts.complementarity_tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub eq_multipliers: Vec<f64>,
    pub ineq_multipliers: Vec<f64>,
    /// Net bound multipliers `z_upper - z_lower` per variable (zero for
    /// fixed variables).
    pub bound_multipliers: Vec<f64>,
    pub kkt: KktResiduals,
    pub iterations: usize,
    pub status: NlpStatus,
}

const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const TAU_MIN: f64 = 0.99;
const S_MAX: f64 = 100.0;
const ETA_ARMIJO: f64 = 1e-4;
const KAPPA_SIGMA: f64 = 1e10;
const PIVOT_TOL: f64 = 1e-13;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const GAMMA_ALPHA: f64 = 0.05;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;
const MAX_SOC: usize = 4;

/// Variable/slack layout of the barrier subproblem.
struct Layout {
    n: usize,
    me: usize,
    mi: usize,
    free: Vec<usize>,
    fixed_x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Layout {
    fn ny(&self) -> usize {
        self.free.len() + self.mi
    }

    fn m(&self) -> usize {
        self.me + self.mi
    }

    fn nf(&self) -> usize {
        self.free.len()
    }

    fn full_x(&self, y: &[f64]) -> Vec<f64> {
        let mut x = self.fixed_x.clone();
        for (k, &i) in self.free.iter().enumerate() {
            x[i] = y[k];
        }
        x
    }
}

struct Eval {
    f: f64,
    grad: Vec<f64>,
    c: Vec<f64>,
    jac: DMatrix<f64>,
}

struct Workspace<'a, P: NlpProblem + ?Sized> {
    p: &'a P,
    lay: Layout,
    jac_eq: DMatrix<f64>,
    jac_in: DMatrix<f64>,
    iteration: usize,
}

impl<P: NlpProblem + ?Sized> Workspace<'_, P> {
    fn values(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let lay = &self.lay;
        let x = lay.full_x(y);
        let f = self.p.objective(&x);
        let mut c = vec![0.0; lay.m()];
        self.p.eq_constraints(&x, &mut c[..lay.me]);
        self.p.ineq_constraints(&x, &mut c[lay.me..]);
        let nf = lay.nf();
        for i in 0..lay.mi {
            c[lay.me + i] += y[nf + i];
        }
        (f, c)
    }

    fn full(&mut self, y: &[f64]) -> Result<Eval, NlpError> {
        let lay = &self.lay;
        let x = lay.full_x(y);
        let (f, c) = self.values(y);
        let mut gx = vec![0.0; lay.n];
        self.p.objective_gradient(&x, &mut gx);
        self.p.eq_jacobian(&x, &mut self.jac_eq);
        self.p.ineq_jacobian(&x, &mut self.jac_in);
        let lay = &self.lay;
        let (ny, nf) = (lay.ny(), lay.nf());
        let mut grad = vec![0.0; ny];
        for (k, &i) in lay.free.iter().enumerate() {
            grad[k] = gx[i];
        }
        let mut jac = DMatrix::zeros(lay.m(), ny);
        for (k, &i) in lay.free.iter().enumerate() {
            for r in 0..lay.me {
                jac[(r, k)] = self.jac_eq[(r, i)];
            }
            for r in 0..lay.mi {
                jac[(lay.me + r, k)] = self.jac_in[(r, i)];
            }
        }
        for r in 0..lay.mi {
            jac[(lay.me + r, nf + r)] = 1.0;
        }
        let it = self.iteration;
        check_finite(f, "objective", it)?;
        check_all(&grad, "objective gradient", it)?;
        check_all(&c, "constraint values", it)?;
        check_all(jac.as_slice(), "constraint Jacobian", it)?;
        Ok(Eval { f, grad, c, jac })
    }

    fn hessian(&self, y: &[f64], lam: &[f64]) -> Result<DMatrix<f64>, NlpError> {
        let lay = &self.lay;
        let x = lay.full_x(y);
        let mut h = DMatrix::zeros(lay.n, lay.n);
        self.p
            .lagrangian_hessian(&x, 1.0, &lam[..lay.me], &lam[lay.me..], &mut h);
        let ny = lay.ny();
        let mut w = DMatrix::zeros(ny, ny);
        for (a, &i) in lay.free.iter().enumerate() {
            for (b, &j) in lay.free.iter().enumerate() {
                w[(a, b)] = h[(i, j)];
            }
        }
        check_all(w.as_slice(), "Lagrangian Hessian", self.iteration)?;
        Ok(w)
    }
}

fn check_finite(v: f64, what: &str, iteration: usize) -> Result<(), NlpError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(NlpError::NonFinite {
            what: what.to_string(),
            iteration,
        })
    }
}

fn check_all(v: &[f64], what: &str, iteration: usize) -> Result<(), NlpError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NlpError::NonFinite {
            what: what.to_string(),
            iteration,
        })
    }
}

fn push_inside(v: f64, lo: f64, hi: f64, kappa: f64) -> f64 {
    let span = hi - lo;
    let mut v = v;
    if lo.is_finite() {
        let pl = if hi.is_finite() {
            (kappa * lo.abs().max(1.0)).min(kappa * span)
        } else {
            kappa * lo.abs().max(1.0)
        };
        v = v.max(lo + pl);
    }
    if hi.is_finite() {
        let pu = if lo.is_finite() {
            (kappa * hi.abs().max(1.0)).min(kappa * span)
        } else {
            kappa * hi.abs().max(1.0)
        };
        v = v.min(hi - pu);
    }
    v
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn norm_1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest step in `(0, 1]` keeping `y + a dy` a fraction `tau` away from
/// the bounds.
fn max_step(y: &[f64], dy: &[f64], lo: &[f64], hi: &[f64], tau: f64) -> f64 {
    let mut a = 1.0f64;
    for i in 0..y.len() {
        if lo[i].is_finite() && dy[i] < 0.0 {
            a = a.min(-tau * (y[i] - lo[i]) / dy[i]);
        }
        if hi[i].is_finite() && dy[i] > 0.0 {
            a = a.min(tau * (hi[i] - y[i]) / dy[i]);
        }
    }
    a
}

fn max_step_pos(z: &[f64], dz: &[f64], tau: f64) -> f64 {
    let mut a = 1.0f64;
    for i in 0..z.len() {
        if dz[i] < 0.0 && z[i] > 0.0 {
            a = a.min(-tau * z[i] / dz[i]);
        }
    }
    a
}

/// Solves `p` from `x0` (projected into the bounds if needed).
pub fn solve_nlp<P: NlpProblem + ?Sized>(
    p: &P,
    x0: &[f64],
    opts: &NlpOptions,
) -> Result<NlpSolution, NlpError> {
    let n = p.n_vars();
    if x0.len() != n {
        return Err(NlpError::StartDimension {
            expected: n,
            got: x0.len(),
        });
    }
    let (me, mi) = (p.n_eq(), p.n_ineq());
    let lb = p.lower_bounds();
    let ub = p.upper_bounds();
    let mut free = Vec::new();
    let mut fixed_x = vec![0.0; n];
    for i in 0..n {
        if lb[i] > ub[i] || lb[i].is_nan() || ub[i].is_nan() {
            return Err(NlpError::EmptyBounds {
                name: p.var_name(i),
                lb: lb[i],
                ub: ub[i],
            });
        }
        if lb[i].is_finite() && ub[i] - lb[i] <= 1e-12 * lb[i].abs().max(1.0) {
            fixed_x[i] = lb[i];
        } else {
            fixed_x[i] = x0[i].clamp(lb[i], ub[i]);
            free.push(i);
        }
    }
    let nf = free.len();
    let mut lo = Vec::with_capacity(nf + mi);
    let mut hi = Vec::with_capacity(nf + mi);
    for &i in &free {
        lo.push(lb[i]);
        hi.push(ub[i]);
    }
    lo.extend(std::iter::repeat_n(0.0, mi));
    hi.extend(std::iter::repeat_n(f64::INFINITY, mi));
    let lay = Layout {
        n,
        me,
        mi,
        free,
        fixed_x,
        lo,
        hi,
    };
    let mut ws = Workspace {
        p,
        jac_eq: DMatrix::zeros(me, n),
        jac_in: DMatrix::zeros(mi, n),
        lay,
        iteration: 0,
    };
    let ny = ws.lay.ny();
    let m = ws.lay.m();

    // Starting point.
    let mut y = vec![0.0; ny];
    for (k, &i) in ws.lay.free.iter().enumerate() {
        y[k] = push_inside(x0[i].clamp(lb[i], ub[i]), lb[i], ub[i], opts.bound_push);
    }
    if mi > 0 {
        let x = ws.lay.full_x(&y);
        let mut g = vec![0.0; mi];
        p.ineq_constraints(&x, &mut g);
        for r in 0..mi {
            y[nf + r] = push_inside((-g[r]).max(0.0), 0.0, f64::INFINITY, opts.bound_push);
        }
    }
    let lo = ws.lay.lo.clone();
    let hi = ws.lay.hi.clone();
    let has_lo: Vec<bool> = lo.iter().map(|v| v.is_finite()).collect();
    let has_hi: Vec<bool> = hi.iter().map(|v| v.is_finite()).collect();

    let mut mu = opts.mu_init;
    let mu_min = (opts.tol / 10.0).min(opts.complementarity_tol / 10.0);
    let mut lam = vec![0.0; m];
    let mut zl: Vec<f64> = (0..ny)
        .map(|i| if has_lo[i] { mu / (y[i] - lo[i]) } else { 0.0 })
        .collect();
    let mut zu: Vec<f64> = (0..ny)
        .map(|i| if has_hi[i] { mu / (hi[i] - y[i]) } else { 0.0 })
        .collect();
    let mut filter: Vec<(f64, f64)> = Vec::new();
    let mut theta0 = f64::NAN;
    let mut delta_w_last = 0.0f64;
    let mut status = NlpStatus::MaxIterations;
    let mut iterations = 0;

    let barrier = |y: &[f64], mu: f64| -> f64 {
        let mut b = 0.0;
        for i in 0..y.len() {
            if has_lo[i] {
                b -= mu * (y[i] - lo[i]).ln();
            }
            if has_hi[i] {
                b -= mu * (hi[i] - y[i]).ln();
            }
        }
        b
    };

    let mut last_eval: Option<Eval> = None;
    for it in 0..=opts.max_iter {
        ws.iteration = it;
        iterations = it;
        let ev = ws.full(&y)?;

        // Optimality measures.
        let mut dual = ev.grad.clone();
        for r in 0..m {
            let lr = lam[r];
            if lr != 0.0 {
                for k in 0..ny {
                    dual[k] += ev.jac[(r, k)] * lr;
                }
            }
        }
        for k in 0..ny {
            dual[k] += zu[k] - zl[k];
        }
        let compl_at = |mu: f64| -> f64 {
            let mut e = 0.0f64;
            for i in 0..ny {
                if has_lo[i] {
                    e = e.max(((y[i] - lo[i]) * zl[i] - mu).abs());
                }
                if has_hi[i] {
                    e = e.max(((hi[i] - y[i]) * zu[i] - mu).abs());
                }
            }
            e
        };
        let z_sum = norm_1(&zl) + norm_1(&zu);
        let s_d = (S_MAX.max((norm_1(&lam) + z_sum) / ((m + 2 * ny).max(1) as f64))) / S_MAX;
        let s_c = (S_MAX.max(z_sum / ((2 * ny).max(1) as f64))) / S_MAX;
        let dual_inf = norm_inf(&dual);
        let primal_inf = norm_inf(&ev.c);
        let err_at = |mu: f64| (dual_inf / s_d).max(primal_inf).max(compl_at(mu) / s_c);

        let kkt = residuals(&ws, &y, &dual, &ev.c, &zl, &zu, &has_lo, &has_hi);
        if err_at(0.0) <= opts.tol && kkt.within(opts) {
            status = NlpStatus::Optimal;
            last_eval = Some(ev);
            break;
        }
        if it == opts.max_iter {
            last_eval = Some(ev);
            break;
        }
        if it == 0 {
            theta0 = norm_1(&ev.c);
        }
        while mu > mu_min && err_at(mu) <= KAPPA_EPS * mu {
            mu = mu_min.max((KAPPA_MU * mu).min(mu.powf(THETA_MU)));
            filter.clear();
        }

        // Newton system.
        let w = ws.hessian(&y, &lam)?;
        let mut sigma = vec![0.0; ny];
        for i in 0..ny {
            if has_lo[i] {
                sigma[i] += zl[i] / (y[i] - lo[i]);
            }
            if has_hi[i] {
                sigma[i] += zu[i] / (hi[i] - y[i]);
            }
        }
        let mut gb = ev.grad.clone();
        for i in 0..ny {
            if has_lo[i] {
                gb[i] -= mu / (y[i] - lo[i]);
            }
            if has_hi[i] {
                gb[i] += mu / (hi[i] - y[i]);
            }
        }
        let mut rhs = vec![0.0; ny + m];
        for k in 0..ny {
            let mut v = gb[k];
            for r in 0..m {
                v += ev.jac[(r, k)] * lam[r];
            }
            rhs[k] = -v;
        }
        for r in 0..m {
            rhs[ny + r] = -ev.c[r];
        }

        let mut kmat = DMatrix::zeros(ny + m, ny + m);
        for a in 0..ny {
            for b in 0..ny {
                kmat[(a, b)] = w[(a, b)];
            }
            kmat[(a, a)] += sigma[a];
        }
        for r in 0..m {
            for k in 0..ny {
                let v = ev.jac[(r, k)];
                kmat[(ny + r, k)] = v;
                kmat[(k, ny + r)] = v;
            }
        }
        let (factor, delta_w) = match factor_with_inertia(&kmat, ny, m, mu, delta_w_last) {
            Some(v) => v,
            None => {
                status = NlpStatus::Stalled;
                last_eval = Some(ev);
                break;
            }
        };
        if delta_w > 0.0 {
            delta_w_last = delta_w;
        }
        let sol = factor.solve(&rhs);
        let dy = sol[..ny].to_vec();
        let dlam = sol[ny..].to_vec();
        let mut dzl = vec![0.0; ny];
        let mut dzu = vec![0.0; ny];
        for i in 0..ny {
            if has_lo[i] {
                dzl[i] = mu / (y[i] - lo[i]) - zl[i] - zl[i] / (y[i] - lo[i]) * dy[i];
            }
            if has_hi[i] {
                dzu[i] = mu / (hi[i] - y[i]) - zu[i] + zu[i] / (hi[i] - y[i]) * dy[i];
            }
        }
        let tau = TAU_MIN.max(1.0 - mu);
        let alpha_max = max_step(&y, &dy, &lo, &hi, tau);
        let alpha_z = max_step_pos(&zl, &dzl, tau).min(max_step_pos(&zu, &dzu, tau));

        // Filter line search on (constraint violation, barrier objective).
        let theta = norm_1(&ev.c);
        let phi = ev.f + barrier(&y, mu);
        let dphi = dot(&gb, &dy);
        let theta_max = 1e4 * theta0.max(1.0);
        let theta_min = 1e-4 * theta0.max(1.0);
        let alpha_min = if dphi < 0.0 {
            GAMMA_ALPHA
                * GAMMA_THETA
                    .min(GAMMA_PHI * theta / -dphi)
                    .min(theta.powf(S_THETA) / (-dphi).powf(S_PHI))
        } else {
            GAMMA_ALPHA * GAMMA_THETA
        };
        let acceptable = |theta_t: f64, phi_t: f64, alpha: f64| -> Option<bool> {
            if !(theta_t.is_finite() && phi_t.is_finite()) || theta_t > theta_max {
                return None;
            }
            if filter
                .iter()
                .any(|&(ft, fp): &(f64, f64)| theta_t >= ft && phi_t >= fp)
            {
                return None;
            }
            let slack = 10.0 * f64::EPSILON * phi.abs();
            let switching =
                dphi < 0.0 && alpha * (-dphi).powf(S_PHI) > theta.powf(S_THETA);
            if theta <= theta_min && switching {
                (phi_t <= phi + ETA_ARMIJO * alpha * dphi + slack).then_some(true)
            } else {
                (theta_t <= (1.0 - GAMMA_THETA) * theta
                    || phi_t <= phi - GAMMA_PHI * theta + slack)
                    .then_some(false)
            }
        };

        let mut alpha = alpha_max;
        let mut accepted: Option<(Vec<f64>, f64, bool)> = None;
        let tiny = (0..ny).all(|i| dy[i].abs() <= 10.0 * f64::EPSILON * (1.0 + y[i].abs()));
        if tiny {
            let yt: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + alpha * b).collect();
            accepted = Some((yt, alpha, true));
        }
        let mut first = true;
        while accepted.is_none() && alpha >= alpha_min.min(1e-12) {
            let yt: Vec<f64> = y.iter().zip(&dy).map(|(a, b)| a + alpha * b).collect();
            let (ft, ct) = ws.values(&yt);
            let theta_t = norm_1(&ct);
            if let Some(ftype) = acceptable(theta_t, ft + barrier(&yt, mu), alpha) {
                accepted = Some((yt, alpha, ftype));
                break;
            }
            if first && theta_t.is_finite() && theta_t >= theta {
                // Second-order corrections against the Maratos effect.
                let mut c_soc: Vec<f64> = (0..m).map(|r| alpha * ev.c[r] + ct[r]).collect();
                let mut theta_old = theta_t;
                for _ in 0..MAX_SOC {
                    let mut rhs_soc = rhs.clone();
                    for r in 0..m {
                        rhs_soc[ny + r] = -c_soc[r];
                    }
                    let dsoc = factor.solve(&rhs_soc);
                    let a_soc = max_step(&y, &dsoc[..ny], &lo, &hi, tau);
                    let ys: Vec<f64> =
                        y.iter().zip(&dsoc).map(|(a, b)| a + a_soc * b).collect();
                    let (fs, cs) = ws.values(&ys);
                    let theta_s = norm_1(&cs);
                    if let Some(ftype) = acceptable(theta_s, fs + barrier(&ys, mu), alpha) {
                        accepted = Some((ys, alpha, ftype));
                        break;
                    }
                    if !theta_s.is_finite() || theta_s > 0.99 * theta_old {
                        break;
                    }
                    theta_old = theta_s;
                    for r in 0..m {
                        c_soc[r] = a_soc * c_soc[r] + cs[r];
                    }
                }
                if accepted.is_some() {
                    break;
                }
            }
            first = false;
            alpha *= 0.5;
        }
        let Some((ynew, alpha, ftype)) = accepted else {
            log::debug!("line search failed at iteration {it}, mu={mu:e}");
            // Progress is limited by roundoff; keep the point if it already
            // meets the unscaled tolerances.
            status = if kkt.within(opts) {
                NlpStatus::Optimal
            } else {
                NlpStatus::Stalled
            };
            last_eval = Some(ev);
            break;
        };
        if !ftype {
            filter.push(((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta));
        }
        log::trace!(
            "it {it:3} mu {mu:.2e} f {:.6e} pinf {primal_inf:.2e} dinf {dual_inf:.2e} alpha {alpha:.2e} az {alpha_z:.2e} dw {delta_w:.1e} {}",
            ev.f,
            if ftype { 'f' } else { 'h' }
        );
        y = ynew;
        for r in 0..m {
            lam[r] += alpha * dlam[r];
        }
        for i in 0..ny {
            if has_lo[i] {
                let s = y[i] - lo[i];
                zl[i] = (zl[i] + alpha_z * dzl[i])
                    .clamp(mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * mu / s);
            }
            if has_hi[i] {
                let s = hi[i] - y[i];
                zu[i] = (zu[i] + alpha_z * dzu[i])
                    .clamp(mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * mu / s);
            }
        }
    }

    let ev = last_eval.expect("loop runs at least once");
    let mut dual = ev.grad.clone();
    for r in 0..m {
        for k in 0..ny {
            dual[k] += ev.jac[(r, k)] * lam[r];
        }
    }
    for k in 0..ny {
        dual[k] += zu[k] - zl[k];
    }
    let kkt = residuals(&ws, &y, &dual, &ev.c, &zl, &zu, &has_lo, &has_hi);
    if status != NlpStatus::Optimal && kkt.eq_feasibility.max(kkt.ineq_feasibility) > 1e3 * opts.feasibility_tol
        && status == NlpStatus::Stalled
    {
        status = NlpStatus::InfeasibleDetected;
    }
    let x = ws.lay.full_x(&y);
    let mut bound_multipliers = vec![0.0; n];
    for (k, &i) in ws.lay.free.iter().enumerate() {
        bound_multipliers[i] = zu[k] - zl[k];
    }
    Ok(NlpSolution {
        objective: p.objective(&x),
        x,
        eq_multipliers: lam[..me].to_vec(),
        ineq_multipliers: lam[me..].to_vec(),
        bound_multipliers,
        kkt,
        iterations,
        status,
    })
}

#[allow(clippy::too_many_arguments)]
fn residuals<P: NlpProblem + ?Sized>(
    ws: &Workspace<'_, P>,
    y: &[f64],
    dual: &[f64],
    c: &[f64],
    zl: &[f64],
    zu: &[f64],
    has_lo: &[bool],
    has_hi: &[bool],
) -> KktResiduals {
    let lay = &ws.lay;
    let nf = lay.nf();
    let mut compl = 0.0f64;
    for i in 0..y.len() {
        if has_lo[i] {
            compl = compl.max((y[i] - lay.lo[i]) * zl[i]);
        }
        if has_hi[i] {
            compl = compl.max((lay.hi[i] - y[i]) * zu[i]);
        }
    }
    let x = lay.full_x(y);
    let mut g = vec![0.0; lay.mi];
    ws.p.ineq_constraints(&x, &mut g);
    let ineq = g.iter().fold(0.0f64, |m, v| m.max(*v));
    let _ = nf;
    KktResiduals {
        stationarity: norm_inf(dual),
        eq_feasibility: norm_inf(&c[..lay.me]),
        ineq_feasibility: ineq.max(0.0),
        complementarity: compl,
    }
}

/// Factors the KKT matrix, adding primal regularization until the inertia
/// is `(ny, m, 0)`. Returns the factor and the regularization used.
fn factor_with_inertia(
    k: &DMatrix<f64>,
    ny: usize,
    m: usize,
    mu: f64,
    delta_w_last: f64,
) -> Option<(Ldlt, f64)> {
    let mut delta_w = 0.0f64;
    let mut delta_c = 0.0f64;
    let mut kmat = k.clone();
    let apply = |kmat: &mut DMatrix<f64>, dw: f64, dc: f64| {
        kmat.copy_from(k);
        for a in 0..ny {
            kmat[(a, a)] += dw;
        }
        for r in 0..m {
            kmat[(ny + r, ny + r)] -= dc;
        }
    };
    for _ in 0..80 {
        apply(&mut kmat, delta_w, delta_c);
        let f = Ldlt::factor(&kmat, PIVOT_TOL);
        let inertia = f.inertia();
        if inertia.zero > 0 && delta_c == 0.0 && m > 0 {
            delta_c = 1e-8 * mu.powf(0.25);
            continue;
        }
        if inertia.zero == 0 && inertia.positive == ny && inertia.negative == m {
            return Some((f, delta_w));
        }
        delta_w = if delta_w == 0.0 {
            if delta_w_last == 0.0 {
                1e-4
            } else {
                (delta_w_last / 3.0).max(1e-20)
            }
        } else if delta_w_last == 0.0 {
            delta_w * 100.0
        } else {
            delta_w * 8.0
        };
        if delta_w > 1e40 {
            return None;
        }
    }
    None
}
