//! Angular factor of the separated stationary equation:
//! `(cosh^2(theta) Q')' + a Q' + beta1 Q = 0`.
//!
//! With `u = tanh(theta)` this is `(1 - u^2)(Q_uu + a Q_u) + beta1 Q = 0`, a
//! Sturm-Liouville problem `-(e^{au} Q_u)_u = beta1 e^{au} / (1 - u^2) Q`.
//! Dirichlet conditions at `u = +-1` select the branches integrable in theta.

use crate::error::{Error, Result};
use crate::scalar::sech;
use crate::tridiag::SymTridiag;

use super::{fd_derivatives, Profile};

/// `cosh^2(theta) Q'' + sinh(2 theta) Q' + a Q' + beta1 Q`.
pub fn angular_ode_residual<P: Profile + ?Sized>(a: f64, beta1: f64, q: &P, theta: f64) -> f64 {
    let [f, d1, d2] = q
        .derivatives(theta)
        .unwrap_or_else(|| fd_derivatives(q, theta, 1e-4 * theta.abs().max(1.0)));
    let c = theta.cosh();
    c * c * d2 + (2.0 * theta).sinh() * d1 + a * d1 + beta1 * f
}

/// `sech^2(theta)` with analytic derivatives.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sech2;

impl Profile for Sech2 {
    fn value(&self, x: f64) -> f64 {
        let s = sech(x);
        s * s
    }

    fn derivatives(&self, x: f64) -> Option<[f64; 3]> {
        let s = sech(x);
        let t = x.tanh();
        let s2 = s * s;
        Some([s2, -2.0 * s2 * t, -2.0 * s2 * (s2 - 2.0 * t * t)])
    }
}

#[derive(Debug, Clone)]
pub struct AngularEigenpair {
    pub a: f64,
    pub beta1: f64,
    /// Whether `Q1` is integrable over the whole theta line.
    pub integrable: bool,
    /// Uniform nodes in `u` including both endpoints.
    pub u: Vec<f64>,
    /// `Q1` at the nodes, scaled so that its maximum is 1.
    pub q: Vec<f64>,
    /// Largest residual of the discrete equation, relative to `beta1 max|Q1|`.
    pub discrete_residual: f64,
}

impl AngularEigenpair {
    /// The constant solution with `beta1 = 0`, present for every `a`.
    pub fn constant(a: f64) -> Self {
        Self {
            a,
            beta1: 0.0,
            integrable: false,
            u: vec![-1.0, 1.0],
            q: vec![1.0, 1.0],
            discrete_residual: 0.0,
        }
    }

    /// `Q1` as a function of `u`, by four-point Lagrange interpolation.
    pub fn eval_u(&self, u: f64) -> f64 {
        if !self.integrable {
            return 1.0;
        }
        let n = self.u.len() - 1;
        if u <= -1.0 || u >= 1.0 {
            return 0.0;
        }
        let h = 2.0 / n as f64;
        let x = (u + 1.0) / h;
        let j = (x.floor() as usize).clamp(1, n - 2);
        let t = x - j as f64;
        let (f0, f1, f2, f3) = (self.q[j - 1], self.q[j], self.q[j + 1], self.q[j + 2]);
        // Nodes at t = -1, 0, 1, 2.
        -f0 * t * (t - 1.0) * (t - 2.0) / 6.0 + f1 * (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
            - f2 * (t + 1.0) * t * (t - 2.0) / 2.0
            + f3 * (t + 1.0) * t * (t - 1.0) / 6.0
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.eval_u(theta.tanh())
    }
}

impl Profile for AngularEigenpair {
    fn value(&self, theta: f64) -> f64 {
        self.eval(theta)
    }
}

/// Discretized problem on `n` uniform intervals in `u`: returns the
/// symmetrized tridiagonal matrix and the weights `w_j` at interior nodes.
fn discretize(a: f64, n: usize) -> (SymTridiag, Vec<f64>, Vec<f64>) {
    let h = 2.0 / n as f64;
    let u: Vec<f64> = (0..=n).map(|j| -1.0 + j as f64 * h).collect();
    let p_half = |j: usize| (a * (u[j] + 0.5 * h)).exp();
    let m = n - 1;
    let w: Vec<f64> = (1..n).map(|j| (a * u[j]).exp() / ((1.0 - u[j]) * (1.0 + u[j]))).collect();
    let mut d = vec![0.0; m];
    let mut e = vec![0.0; m.saturating_sub(1)];
    let h2 = h * h;
    for i in 0..m {
        let j = i + 1;
        d[i] = (p_half(j - 1) + p_half(j)) / h2 / w[i];
        if i + 1 < m {
            e[i] = -p_half(j) / h2 / (w[i] * w[i + 1]).sqrt();
        }
    }
    (SymTridiag { d, e }, w, u)
}

fn lowest_eigenvalues(a: f64, n: usize, k: usize) -> Vec<f64> {
    let (s, _, _) = discretize(a, n);
    (0..k.min(n - 1)).map(|i| s.eigenvalue(i)).collect()
}

/// Lowest angular eigenpairs for drift parameter `a`, sorted by `beta1`.
///
/// The constant (`beta1 = 0`, non-integrable) solution comes first. The
/// integrable branches are solved on `n_grid` intervals in `u`; eigenvalues
/// that move by more than `1e-3` (relative) when the grid is doubled are
/// dropped as unresolved.
pub fn solve_angular_eigen(a: f64, n_grid: usize, n_modes: usize) -> Result<Vec<AngularEigenpair>> {
    if n_grid < 200 {
        return Err(Error::InvalidParams("n_grid must be at least 200".into()));
    }
    if !a.is_finite() || a.abs() > 200.0 {
        return Err(Error::InvalidParams(format!("unsupported drift parameter a = {a}")));
    }
    let (s, w, u) = discretize(a, n_grid);
    let fine = lowest_eigenvalues(a, 2 * n_grid, n_modes);
    let mut out = vec![AngularEigenpair::constant(a)];
    for (k, &beta_fine) in fine.iter().enumerate() {
        let beta = s.eigenvalue(k);
        if !beta.is_finite() || (beta - beta_fine).abs() > 1e-3 * beta.abs().max(1.0) {
            continue;
        }
        let y = s.eigenvector(beta);
        let mut q = vec![0.0; n_grid + 1];
        for i in 0..y.len() {
            q[i + 1] = y[i] / w[i].sqrt();
        }
        let (imax, _) = q
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best });
        let scale = q[imax];
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::Eigen(format!("degenerate eigenvector for beta1 = {beta}")));
        }
        q.iter_mut().for_each(|v| *v /= scale);
        let discrete_residual = residual_of_nodes(a, beta, &u, &q);
        out.push(AngularEigenpair {
            a,
            beta1: beta,
            integrable: true,
            u: u.clone(),
            q,
            discrete_residual,
        });
    }
    if out.len() == 1 {
        return Err(Error::Eigen("no resolved integrable eigenvalue".into()));
    }
    Ok(out)
}

/// `max_j |(1-u^2)(D2 Q + a D1 Q) + beta1 Q|` at interior nodes, relative to `beta1`.
fn residual_of_nodes(a: f64, beta: f64, u: &[f64], q: &[f64]) -> f64 {
    let n = u.len() - 1;
    let h = 2.0 / n as f64;
    let mut worst = 0.0f64;
    for j in 1..n {
        let pm = (a * (u[j] - 0.5 * h)).exp();
        let pp = (a * (u[j] + 0.5 * h)).exp();
        // Conservative form divided by e^{a u_j}, matching the discretization.
        let flux = (pp * (q[j + 1] - q[j]) - pm * (q[j] - q[j - 1])) / (h * h) / (a * u[j]).exp();
        let r = (1.0 - u[j] * u[j]) * flux + beta * q[j];
        worst = worst.max(r.abs());
    }
    worst / beta.abs().max(1.0)
}
