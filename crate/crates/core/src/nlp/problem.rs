use nalgebra::DMatrix;

/// Smooth constrained program
///
/// ```text
/// min f(x)  s.t.  h(x) = 0,  g(x) <= 0,  lb <= x <= ub
/// ```
///
/// Derivative callbacks write dense storage. Jacobians are `rows x n_vars`;
/// the Hessian callback adds the full symmetric matrix of
/// `sigma * f + lambda_eq . h + lambda_ineq . g` into `hess`.
pub trait NlpProblem {
    fn n_vars(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_ineq(&self) -> usize;
    fn lower_bounds(&self) -> &[f64];
    fn upper_bounds(&self) -> &[f64];
    fn objective(&self, x: &[f64]) -> f64;
    fn objective_gradient(&self, x: &[f64], grad: &mut [f64]);
    fn eq_constraints(&self, x: &[f64], out: &mut [f64]);
    fn ineq_constraints(&self, x: &[f64], out: &mut [f64]);
    fn eq_jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>);
    fn ineq_jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>);
    fn lagrangian_hessian(
        &self,
        x: &[f64],
        sigma: f64,
        eq_mult: &[f64],
        ineq_mult: &[f64],
        hess: &mut DMatrix<f64>,
    );

    fn var_name(&self, i: usize) -> String {
        format!("x{i}")
    }

    fn eq_name(&self, i: usize) -> String {
        format!("eq{i}")
    }

    fn ineq_name(&self, i: usize) -> String {
        format!("ineq{i}")
    }
}

/// Polynomial of degree at most two: `c + sum a_i x_i + sum q_ij x_i x_j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadExpr {
    pub constant: f64,
    pub linear: Vec<(usize, f64)>,
    /// Each `(i, j, q)` contributes `q * x_i * x_j` (`q * x_i^2` when `i == j`).
    pub quadratic: Vec<(usize, usize, f64)>,
}

impl QuadExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn lin(mut self, i: usize, a: f64) -> Self {
        if a != 0.0 {
            self.linear.push((i, a));
        }
        self
    }

    pub fn quad(mut self, i: usize, j: usize, q: f64) -> Self {
        if q != 0.0 {
            self.quadratic.push((i, j, q));
        }
        self
    }

    /// `w * (x_i - target)^2`.
    pub fn square_deviation(self, i: usize, target: f64, w: f64) -> Self {
        self.quad(i, i, w).lin(i, -2.0 * w * target).constant(w * target * target)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for &(i, a) in &self.linear {
            v += a * x[i];
        }
        for &(i, j, q) in &self.quadratic {
            v += q * x[i] * x[j];
        }
        v
    }

    /// Adds `scale * grad` into `out`.
    pub fn add_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        for &(i, a) in &self.linear {
            out[i] += scale * a;
        }
        for &(i, j, q) in &self.quadratic {
            if i == j {
                out[i] += scale * 2.0 * q * x[i];
            } else {
                out[i] += scale * q * x[j];
                out[j] += scale * q * x[i];
            }
        }
    }

    fn add_jacobian_row(&self, x: &[f64], row: usize, jac: &mut DMatrix<f64>) {
        for &(i, a) in &self.linear {
            jac[(row, i)] += a;
        }
        for &(i, j, q) in &self.quadratic {
            if i == j {
                jac[(row, i)] += 2.0 * q * x[i];
            } else {
                jac[(row, i)] += q * x[j];
                jac[(row, j)] += q * x[i];
            }
        }
    }

    /// Adds `scale * Hessian` into `hess`.
    pub fn add_hessian(&self, scale: f64, hess: &mut DMatrix<f64>) {
        if scale == 0.0 {
            return;
        }
        for &(i, j, q) in &self.quadratic {
            if i == j {
                hess[(i, i)] += 2.0 * scale * q;
            } else {
                hess[(i, j)] += scale * q;
                hess[(j, i)] += scale * q;
            }
        }
    }

    fn remap(&self, map: &[usize]) -> Self {
        Self {
            constant: self.constant,
            linear: self.linear.iter().map(|&(i, a)| (map[i], a)).collect(),
            quadratic: self
                .quadratic
                .iter()
                .map(|&(i, j, q)| (map[i], map[j], q))
                .collect(),
        }
    }
}

/// Handle to a variable of a [`QcqpModel`].
pub type VarId = usize;

/// Quadratically constrained program assembled term by term. Every
/// branch-flow, droop, disk and penalty expression in this crate is at most
/// quadratic, so exact derivatives come for free.
#[derive(Debug, Clone, Default)]
pub struct QcqpModel {
    names: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: QuadExpr,
    eqs: Vec<(String, QuadExpr)>,
    ineqs: Vec<(String, QuadExpr)>,
}

impl QcqpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64) -> VarId {
        debug_assert!(lb <= ub, "empty bounds for variable");
        self.names.push(name.into());
        self.lower.push(lb);
        self.upper.push(ub);
        self.names.len() - 1
    }

    pub fn set_bounds(&mut self, var: VarId, lb: f64, ub: f64) {
        self.lower[var] = lb;
        self.upper[var] = ub;
    }

    pub fn add_objective(&mut self, term: QuadExpr) {
        self.objective.constant += term.constant;
        self.objective.linear.extend(term.linear);
        self.objective.quadratic.extend(term.quadratic);
    }

    /// Adds `expr = 0`; returns its row.
    pub fn add_eq(&mut self, name: impl Into<String>, expr: QuadExpr) -> usize {
        self.eqs.push((name.into(), expr));
        self.eqs.len() - 1
    }

    /// Adds `expr <= 0`; returns its row.
    pub fn add_ineq(&mut self, name: impl Into<String>, expr: QuadExpr) -> usize {
        self.ineqs.push((name.into(), expr));
        self.ineqs.len() - 1
    }

    pub fn objective_expr(&self) -> &QuadExpr {
        &self.objective
    }

    pub fn eq_expr(&self, row: usize) -> &QuadExpr {
        &self.eqs[row].1
    }

    pub fn ineq_expr(&self, row: usize) -> &QuadExpr {
        &self.ineqs[row].1
    }

    pub fn var_index(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name)
    }

    /// Same program with variable `i` moved to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.names.len();
        assert_eq!(perm.len(), n);
        let mut names = vec![String::new(); n];
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            names[perm[i]] = self.names[i].clone();
            lower[perm[i]] = self.lower[i];
            upper[perm[i]] = self.upper[i];
        }
        Self {
            names,
            lower,
            upper,
            objective: self.objective.remap(perm),
            eqs: self.eqs.iter().map(|(n, e)| (n.clone(), e.remap(perm))).collect(),
            ineqs: self.ineqs.iter().map(|(n, e)| (n.clone(), e.remap(perm))).collect(),
        }
    }
}

impl NlpProblem for QcqpModel {
    fn n_vars(&self) -> usize {
        self.names.len()
    }

    fn n_eq(&self) -> usize {
        self.eqs.len()
    }

    fn n_ineq(&self) -> usize {
        self.ineqs.len()
    }

    fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    fn objective_gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        self.objective.add_gradient(x, 1.0, grad);
    }

    fn eq_constraints(&self, x: &[f64], out: &mut [f64]) {
        for (o, (_, e)) in out.iter_mut().zip(&self.eqs) {
            *o = e.eval(x);
        }
    }

    fn ineq_constraints(&self, x: &[f64], out: &mut [f64]) {
        for (o, (_, e)) in out.iter_mut().zip(&self.ineqs) {
            *o = e.eval(x);
        }
    }

    fn eq_jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        jac.fill(0.0);
        for (row, (_, e)) in self.eqs.iter().enumerate() {
            e.add_jacobian_row(x, row, jac);
        }
    }

    fn ineq_jacobian(&self, x: &[f64], jac: &mut DMatrix<f64>) {
        jac.fill(0.0);
        for (row, (_, e)) in self.ineqs.iter().enumerate() {
            e.add_jacobian_row(x, row, jac);
        }
    }

    fn lagrangian_hessian(
        &self,
        _x: &[f64],
        sigma: f64,
        eq_mult: &[f64],
        ineq_mult: &[f64],
        hess: &mut DMatrix<f64>,
    ) {
        self.objective.add_hessian(sigma, hess);
        for ((_, e), &m) in self.eqs.iter().zip(eq_mult) {
            e.add_hessian(m, hess);
        }
        for ((_, e), &m) in self.ineqs.iter().zip(ineq_mult) {
            e.add_hessian(m, hess);
        }
    }

    fn var_name(&self, i: usize) -> String {
        self.names[i].clone()
    }

    fn eq_name(&self, i: usize) -> String {
        self.eqs[i].0.clone()
    }

    fn ineq_name(&self, i: usize) -> String {
        self.ineqs[i].0.clone()
    }
}
