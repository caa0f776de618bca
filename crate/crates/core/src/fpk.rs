//! Finite-volume Fokker-Planck solver on a cell-centred `(rho, theta)` grid.
//!
//! The adjoint (backward) operator
//! `L Q = D Q_rr - gamma rho Q_r + (D/rho^2) d_theta(cosh^2 theta Q_theta) + s H'(rho) Q_theta`
//! is assembled as a sum of two tridiagonal pieces, one along `rho`
//! (shared by every `theta` column) and one along `theta` per `rho` row.
//! The forward operator is its exact transpose, so duality holds to
//! rounding. Both pieces are M-matrices: the `rho` part is written in the
//! weighted form `(D/w)(w Q_r)_r` with `w = exp(-gamma rho^2 / (2 D))`, and
//! the `theta` advection uses central fluxes where the cell Peclet number
//! allows and upwind fluxes elsewhere.
//!
//! The `rho` faces are reflecting. The `theta` faces are either reflecting
//! or absorbing (`P = 0` on the face). With absorbing faces mass leaks out
//! and the renormalized long-time limit is the quasi-stationary law.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{HamiltonianKind, ModelParams};
use crate::coords::Sign;
use crate::error::{Error, Result};
use crate::tridiag::{ThomasFactor, Tridiag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThetaBoundary {
    #[default]
    Absorbing,
    Reflecting,
}

/// Cell-centred tensor grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rho_min: f64,
    pub rho_max: f64,
    pub n_rho: usize,
    pub theta_max: f64,
    pub n_theta: usize,
}

impl GridSpec {
    /// `rho in [1e-3, 6/sqrt(beta)]`, `theta in [-8, 8]`, 400 x 400.
    pub fn default_for(beta: f64) -> Self {
        Self {
            rho_min: 1e-3,
            rho_max: 6.0 / beta.sqrt(),
            n_rho: 400,
            theta_max: 8.0,
            n_theta: 400,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_min > 0.0 && self.rho_max > self.rho_min && self.rho_max.is_finite()) {
            return Err(Error::InvalidParams("need 0 < rho_min < rho_max".into()));
        }
        if !(self.theta_max > 0.0 && self.theta_max.is_finite()) {
            return Err(Error::InvalidParams("theta_max must be positive".into()));
        }
        if self.n_rho < 3 || self.n_theta < 3 {
            return Err(Error::InvalidParams("grid needs at least 3 cells per axis".into()));
        }
        Ok(())
    }

    pub fn d_rho(&self) -> f64 {
        (self.rho_max - self.rho_min) / self.n_rho as f64
    }

    pub fn d_theta(&self) -> f64 {
        2.0 * self.theta_max / self.n_theta as f64
    }

    pub fn rho_centres(&self) -> Vec<f64> {
        let h = self.d_rho();
        (0..self.n_rho).map(|i| self.rho_min + (i as f64 + 0.5) * h).collect()
    }

    pub fn theta_centres(&self) -> Vec<f64> {
        let h = self.d_theta();
        (0..self.n_theta).map(|j| -self.theta_max + (j as f64 + 0.5) * h).collect()
    }

    pub fn rho_edges(&self) -> Vec<f64> {
        crate::quad::uniform_edges(self.rho_min, self.rho_max, self.n_rho)
    }

    pub fn theta_edges(&self) -> Vec<f64> {
        crate::quad::uniform_edges(-self.theta_max, self.theta_max, self.n_theta)
    }
}

/// Density against `drho dtheta`, stored `rho`-major: `values[i * n_theta + j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub spec: GridSpec,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn from_fn<F: Fn(f64, f64) -> f64 + Sync>(spec: GridSpec, f: F) -> Result<Self> {
        spec.validate()?;
        let rho = spec.rho_centres();
        let theta = spec.theta_centres();
        let values = rho
            .par_iter()
            .flat_map_iter(|&r| theta.iter().map(|&t| f(r, t)).collect::<Vec<_>>())
            .collect();
        Ok(Self {
            spec,
            rho,
            theta,
            values,
        })
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.n_theta + j]
    }

    pub fn cell_area(&self) -> f64 {
        self.spec.d_rho() * self.spec.d_theta()
    }

    /// Midpoint-rule mass.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidParams(format!("cannot normalize mass {m}")));
        }
        self.values.iter_mut().for_each(|v| *v /= m);
        Ok(())
    }

    /// Marginal density in `theta` at the cell centres.
    pub fn theta_marginal(&self) -> Vec<f64> {
        let nt = self.spec.n_theta;
        let h = self.spec.d_rho();
        (0..nt)
            .map(|j| (0..self.spec.n_rho).map(|i| self.values[i * nt + j]).sum::<f64>() * h)
            .collect()
    }

    /// Marginal density in `rho` at the cell centres.
    pub fn rho_marginal(&self) -> Vec<f64> {
        let h = self.spec.d_theta();
        self.values
            .chunks(self.spec.n_theta)
            .map(|row| row.iter().sum::<f64>() * h)
            .collect()
    }

    /// Masses on the cells of another tensor grid, treating this density as
    /// piecewise constant on its own cells. Exact when the edges align.
    pub fn cell_masses_on(&self, edges_rho: &[f64], edges_theta: &[f64]) -> Vec<f64> {
        let overlap = |own: &[f64], other: &[f64]| -> Vec<Vec<(usize, f64)>> {
            (0..other.len() - 1)
                .map(|k| {
                    let (lo, hi) = (other[k], other[k + 1]);
                    (0..own.len() - 1)
                        .filter_map(|i| {
                            let w = own[i + 1].min(hi) - own[i].max(lo);
                            (w > 0.0).then_some((i, w))
                        })
                        .collect()
                })
                .collect()
        };
        let orho = overlap(&self.spec.rho_edges(), edges_rho);
        let otheta = overlap(&self.spec.theta_edges(), edges_theta);
        let nt = self.spec.n_theta;
        let mut out = Vec::with_capacity(orho.len() * otheta.len());
        for ro in &orho {
            for to in &otheta {
                let mut m = 0.0;
                for &(i, wr) in ro {
                    for &(j, wt) in to {
                        m += self.values[i * nt + j] * wr * wt;
                    }
                }
                out.push(m);
            }
        }
        out
    }

    /// Bilinear interpolation between cell centres, clamped to the grid.
    pub fn interpolate(&self, rho: f64, theta: f64) -> f64 {
        let locate = |x: f64, x0: f64, h: f64, n: usize| -> (usize, f64) {
            let s = ((x - x0) / h - 0.5).clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            (i, s - i as f64)
        };
        let (i, fr) = locate(rho, self.spec.rho_min, self.spec.d_rho(), self.spec.n_rho);
        let (j, ft) = locate(theta, -self.spec.theta_max, self.spec.d_theta(), self.spec.n_theta);
        let v = |a: usize, b: usize| self.at(a, b);
        (1.0 - fr) * ((1.0 - ft) * v(i, j) + ft * v(i, j + 1))
            + fr * ((1.0 - ft) * v(i + 1, j) + ft * v(i + 1, j + 1))
    }

    /// `sum |P - Q| dA`.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.cell_area()
    }
}

/// Continuous coefficients of the polar Fokker-Planck operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FPKOperator {
    pub gamma: f64,
    pub d: f64,
    pub k: f64,
    pub hamiltonian: HamiltonianKind,
    /// Sign `s` of the `H'(rho) d_theta` term in the backward operator.
    pub sign_s: Sign,
    pub theta_boundary: ThetaBoundary,
}

impl FPKOperator {
    pub fn new(
        gamma: f64,
        d: f64,
        hamiltonian: HamiltonianKind,
        k: f64,
        sign_s: Sign,
        theta_boundary: ThetaBoundary,
    ) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::InvalidParams("FPK solver needs D > 0".into()));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParams("FPK solver needs gamma > 0".into()));
        }
        if !k.is_finite() {
            return Err(Error::InvalidParams("k must be finite".into()));
        }
        Ok(Self {
            gamma,
            d,
            k,
            hamiltonian,
            sign_s,
            theta_boundary,
        })
    }

    /// Scalar `gamma` and `D` read from isotropic two-dimensional parameters.
    pub fn from_params(params: &ModelParams<f64>, sign_s: Sign, theta_boundary: ThetaBoundary) -> Result<Self> {
        if params.dim() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: params.dim(),
            });
        }
        Self::new(
            params.scalar_rate()?,
            params.scalar_diffusion()?,
            params.hamiltonian(),
            params.k(),
            sign_s,
            theta_boundary,
        )
    }

    pub fn h_prime(&self, rho: f64) -> f64 {
        match self.hamiltonian {
            HamiltonianKind::Quadratic => rho,
            HamiltonianKind::InverseRho => self.k / (rho * rho),
        }
    }

    pub fn with_sign(mut self, s: Sign) -> Self {
        self.sign_s = s;
        self
    }

    pub fn discretize(&self, spec: &GridSpec) -> Result<Discretization> {
        spec.validate()?;
        let rho = spec.rho_centres();
        let theta = spec.theta_centres();
        let (hr, ht) = (spec.d_rho(), spec.d_theta());

        let b2 = self.gamma / (2.0 * self.d);
        let c = self.d / (hr * hr);
        let rho_faces = (0..spec.n_rho - 1)
            .map(|i| {
                let face = spec.rho_min + (i + 1) as f64 * hr;
                // c w_face / w_i and c w_face / w_{i+1}.
                RhoFace {
                    up: c * (-b2 * (face * face - rho[i] * rho[i])).exp(),
                    down: c * (-b2 * (face * face - rho[i + 1] * rho[i + 1])).exp(),
                }
            })
            .collect();

        let theta_rows = rho
            .iter()
            .map(|&r| {
                let kappa = self.d / (r * r);
                let b = self.sign_s.value::<f64>() * self.h_prime(r);
                let faces = (0..spec.n_theta - 1)
                    .map(|j| {
                        let face = theta[j] + 0.5 * ht;
                        let diff = kappa * face.cosh().powi(2) / (ht * ht);
                        // Advective flux b (alpha P_j + beta P_{j+1}) / b through the face.
                        let (alpha, beta) = if b.abs() <= 2.0 * diff * ht {
                            (0.5 * b, 0.5 * b)
                        } else {
                            (b.max(0.0), b.min(0.0))
                        };
                        ThetaFace {
                            diff,
                            alpha: alpha / ht,
                            beta: beta / ht,
                        }
                    })
                    .collect();
                let edge = match self.theta_boundary {
                    ThetaBoundary::Absorbing => 2.0 * kappa * spec.theta_max.cosh().powi(2) / (ht * ht),
                    ThetaBoundary::Reflecting => 0.0,
                };
                ThetaRow { faces, edge }
            })
            .collect();

        Ok(Discretization {
            spec: *spec,
            rho_faces,
            theta_rows,
        })
    }
}

/// Coefficients of the backward operator across the face between `rho`
/// cells `i` and `i + 1`: `L[i][i+1] = up`, `L[i+1][i] = down`.
#[derive(Debug, Clone, Copy)]
struct RhoFace {
    up: f64,
    down: f64,
}

/// Diffusive conductance and the advective flux weights (already divided by
/// the cell width) across a `theta` face.
#[derive(Debug, Clone, Copy)]
struct ThetaFace {
    diff: f64,
    alpha: f64,
    beta: f64,
}

#[derive(Debug, Clone)]
struct ThetaRow {
    faces: Vec<ThetaFace>,
    /// Loss coefficient of the two edge cells for absorbing faces.
    edge: f64,
}

/// Assembled operator on a grid, stored per face so that both the forward
/// and the backward action are sums of differences.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub spec: GridSpec,
    rho_faces: Vec<RhoFace>,
    theta_rows: Vec<ThetaRow>,
}

impl Discretization {
    /// Forward `rho` operator as a tridiagonal matrix (same for every column).
    pub fn forward_rho(&self) -> Tridiag {
        let n = self.spec.n_rho;
        let mut f = Tridiag::new(vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for (i, face) in self.rho_faces.iter().enumerate() {
            f.c[i] += face.down;
            f.a[i + 1] += face.up;
            f.b[i] -= face.up;
            f.b[i + 1] -= face.down;
        }
        f
    }

    /// Forward `theta` operator of `rho` row `i`.
    pub fn forward_theta(&self, i: usize) -> Tridiag {
        let n = self.spec.n_theta;
        let row = &self.theta_rows[i];
        let mut f = Tridiag::new(vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for (j, face) in row.faces.iter().enumerate() {
            f.c[j] += face.diff - face.beta;
            f.a[j + 1] += face.diff + face.alpha;
            f.b[j] -= face.diff + face.alpha;
            f.b[j + 1] -= face.diff - face.beta;
        }
        f.b[0] -= row.edge;
        f.b[n - 1] -= row.edge;
        f
    }

    fn check_len(&self, x: &[f64]) {
        assert_eq!(x.len(), self.spec.n_rho * self.spec.n_theta, "field does not match the grid");
    }

    pub fn apply_forward(&self, p: &[f64]) -> Vec<f64> {
        self.check_len(p);
        let nt = self.spec.n_theta;
        let mut out = vec![0.0; p.len()];
        out.par_chunks_mut(nt).enumerate().for_each(|(i, o)| {
            let x = &p[i * nt..(i + 1) * nt];
            let row = &self.theta_rows[i];
            for (j, f) in row.faces.iter().enumerate() {
                let flux = f.diff * (x[j + 1] - x[j]) - (f.alpha * x[j] + f.beta * x[j + 1]);
                o[j] += flux;
                o[j + 1] -= flux;
            }
            o[0] -= row.edge * x[0];
            o[nt - 1] -= row.edge * x[nt - 1];
            if i > 0 {
                let f = self.rho_faces[i - 1];
                for ((o, a), b) in o.iter_mut().zip(&p[(i - 1) * nt..i * nt]).zip(x) {
                    *o -= f.down * b - f.up * a;
                }
            }
            if i + 1 < self.spec.n_rho {
                let f = self.rho_faces[i];
                for ((o, a), b) in o.iter_mut().zip(x).zip(&p[(i + 1) * nt..(i + 2) * nt]) {
                    *o += f.down * b - f.up * a;
                }
            }
        });
        out
    }

    pub fn apply_adjoint(&self, q: &[f64]) -> Vec<f64> {
        self.check_len(q);
        let nt = self.spec.n_theta;
        let mut out = vec![0.0; q.len()];
        out.par_chunks_mut(nt).enumerate().for_each(|(i, o)| {
            let x = &q[i * nt..(i + 1) * nt];
            let row = &self.theta_rows[i];
            for (j, f) in row.faces.iter().enumerate() {
                let d = x[j + 1] - x[j];
                o[j] += (f.diff + f.alpha) * d;
                o[j + 1] += (f.beta - f.diff) * d;
            }
            o[0] -= row.edge * x[0];
            o[nt - 1] -= row.edge * x[nt - 1];
            if i > 0 {
                let f = self.rho_faces[i - 1];
                for ((o, a), b) in o.iter_mut().zip(&q[(i - 1) * nt..i * nt]).zip(x) {
                    *o += f.down * (a - b);
                }
            }
            if i + 1 < self.spec.n_rho {
                let f = self.rho_faces[i];
                for ((o, a), b) in o.iter_mut().zip(x).zip(&q[(i + 1) * nt..(i + 2) * nt]) {
                    *o += f.up * (b - a);
                }
            }
        });
        out
    }

    /// Cells not touching the domain boundary.
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && j > 0 && i + 1 < self.spec.n_rho && j + 1 < self.spec.n_theta
    }

    fn interior_norm(&self, x: &[f64]) -> f64 {
        let nt = self.spec.n_theta;
        x.iter()
            .enumerate()
            .filter(|(k, _)| self.is_interior(k / nt, k % nt))
            .map(|(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

pub fn apply_adjoint(op: &FPKOperator, q: &DensityGrid) -> Result<Vec<f64>> {
    Ok(op.discretize(&q.spec)?.apply_adjoint(&q.values))
}

pub fn apply_forward(op: &FPKOperator, p: &DensityGrid) -> Result<Vec<f64>> {
    Ok(op.discretize(&p.spec)?.apply_forward(&p.values))
}

/// `|F P|_2 / |P|_2` over interior cells.
pub fn static_residual(op: &FPKOperator, p: &DensityGrid) -> Result<f64> {
    let disc = op.discretize(&p.spec)?;
    let fp = disc.apply_forward(&p.values);
    Ok(disc.interior_norm(&fp) / disc.interior_norm(&p.values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub t_reached: f64,
    pub steps: usize,
    pub converged: bool,
    /// `(t, |P(t + dt) - P(t)|_1 / dt)` at a fixed sampling interval.
    pub residual_history: Vec<(f64, f64)>,
    /// Largest relative mass change in a single step before renormalizing.
    /// Zero up to rounding for reflecting boundaries.
    pub max_step_mass_change: f64,
    /// Decay rate implied by the mass lost in the last step; for absorbing
    /// boundaries this is the decay rate of the quasi-stationary law.
    pub decay_rate: f64,
}

#[derive(Debug, Clone)]
pub struct Stationary {
    pub density: DensityGrid,
    pub report: ConvergenceReport,
}

/// Lie splitting with backward Euler on each one-dimensional piece. Each
/// substep is an M-matrix solve, so non-negativity is preserved for any
/// `dt`. Mass is renormalized after every step.
pub fn evolve_to_stationary(
    op: &FPKOperator,
    p0: &DensityGrid,
    t_max: f64,
    dt: f64,
    tol: f64,
) -> Result<Stationary> {
    if !(dt > 0.0) || !(t_max > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidParams("need dt, t_max, tol > 0".into()));
    }
    if p0.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParams("initial density must be finite and non-negative".into()));
    }
    let disc = op.discretize(&p0.spec)?;
    let (nr, nt) = (p0.spec.n_rho, p0.spec.n_theta);
    let implicit = |f: &Tridiag| -> ThomasFactor {
        let n = f.len();
        let a = f.a.iter().map(|x| -dt * x).collect();
        let c = f.c.iter().map(|x| -dt * x).collect();
        let b = (0..n).map(|i| 1.0 - dt * f.b[i]).collect();
        Tridiag::new(a, b, c).factor()
    };
    let rho_factor = implicit(&disc.forward_rho());
    let theta_factors: Vec<ThomasFactor> = (0..nr)
        .into_par_iter()
        .map(|i| implicit(&disc.forward_theta(i)))
        .collect();

    let mut p = p0.clone();
    p.normalize()?;
    let area = p.cell_area();
    let mut prev = p.values.clone();
    let mut history = Vec::new();
    let record_every = ((0.05 / dt).round() as usize).max(1);
    let max_steps = (t_max / dt).ceil() as usize;
    let mut max_mass_change: f64 = 0.0;
    let mut decay_rate = 0.0;
    let mut last = f64::INFINITY;
    let mut converged = false;
    let mut steps = 0;
    while steps < max_steps {
        rho_factor.solve_rows(&mut p.values, nt);
        p.values
            .par_chunks_mut(nt)
            .zip(theta_factors.par_iter())
            .for_each(|(row, fac)| fac.solve_in_place(row));
        for v in p.values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let mass = p.values.iter().sum::<f64>() * area;
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Divergence { t: steps as f64 * dt });
        }
        max_mass_change = max_mass_change.max((mass - 1.0).abs());
        // A backward Euler step scales a decaying mode by 1 / (1 + lambda dt).
        decay_rate = (1.0 / mass - 1.0) / dt;
        p.values.iter_mut().for_each(|v| *v /= mass);
        steps += 1;
        let change = p
            .values
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * area
            / dt;
        last = change;
        prev.copy_from_slice(&p.values);
        let t = steps as f64 * dt;
        if steps % record_every == 0 {
            history.push((t, change));
        }
        if change < tol {
            converged = true;
            if steps % record_every != 0 {
                history.push((t, change));
            }
            break;
        }
    }
    let t_reached = steps as f64 * dt;
    if !converged {
        return Err(Error::NotConverged {
            t_reached,
            last_residual: last,
            history,
        });
    }
    debug_assert_eq!(p.values.len(), nr * nt);
    Ok(Stationary {
        density: p,
        report: ConvergenceReport {
            t_reached,
            steps,
            converged,
            residual_history: history,
            max_step_mass_change: max_mass_change,
            decay_rate,
        },
    })
}

/// Picks the sign `s` for which `candidate` (a claimed static density) has
/// the smaller forward residual. Returns the sign and both residuals
/// `(plus, minus)`.
pub fn select_drift_sign(op: &FPKOperator, candidate: &DensityGrid) -> Result<(Sign, f64, f64)> {
    let plus = static_residual(&op.with_sign(Sign::Plus), candidate)?;
    let minus = static_residual(&op.with_sign(Sign::Minus), candidate)?;
    Ok((if plus <= minus { Sign::Plus } else { Sign::Minus }, plus, minus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Philox;
    use crate::scalar::sech;
    use rand::Rng;

    fn op(k: f64, boundary: ThetaBoundary) -> FPKOperator {
        FPKOperator::new(1.0, 1.0, HamiltonianKind::InverseRho, k, Sign::Minus, boundary).unwrap()
    }

    fn small_spec() -> GridSpec {
        GridSpec {
            rho_min: 1e-3,
            rho_max: 6.0,
            n_rho: 60,
            theta_max: 8.0,
            n_theta: 50,
        }
    }

    #[test]
    fn rejects_zero_diffusion() {
        let e = FPKOperator::new(1.0, 0.0, HamiltonianKind::Quadratic, 0.0, Sign::Plus, ThetaBoundary::Absorbing);
        assert!(matches!(e, Err(Error::InvalidParams(_))));
    }

    #[test]
    fn constants_are_annihilated() {
        let spec = small_spec();
        let q = DensityGrid::from_fn(spec, |_, _| 1.0).unwrap();
        let out = apply_adjoint(&op(0.0, ThetaBoundary::Reflecting), &q).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
        let disc = op(0.0, ThetaBoundary::Absorbing).discretize(&spec).unwrap();
        let out = disc.apply_adjoint(&q.values);
        for (k, v) in out.iter().enumerate() {
            if disc.is_interior(k / spec.n_theta, k % spec.n_theta) {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn adjoint_of_theta_is_sinh_2theta() {
        let spec = GridSpec {
            n_rho: 40,
            n_theta: 400,
            ..small_spec()
        };
        let q = DensityGrid::from_fn(spec, |_, t| t).unwrap();
        let disc = op(0.0, ThetaBoundary::Reflecting).discretize(&spec).unwrap();
        let out = disc.apply_adjoint(&q.values);
        let h = spec.d_theta();
        for i in 0..spec.n_rho {
            for j in 1..spec.n_theta - 1 {
                let (r, t) = (q.rho[i], q.theta[j]);
                let want = (2.0 * t).sinh() / (r * r);
                // Face-centred fluxes give sinh(2 theta) sinh(h) / h exactly.
                assert!((out[i * spec.n_theta + j] - want * h.sinh() / h).abs() < 1e-9 * want.abs().max(1.0));
                assert!((out[i * spec.n_theta + j] - want).abs() < 3e-4 * want.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn discrete_duality() {
        let spec = small_spec();
        let mut r = Philox::new(2, 0);
        for boundary in [ThetaBoundary::Absorbing, ThetaBoundary::Reflecting] {
            let o = op(0.7, boundary);
            let disc = o.discretize(&spec).unwrap();
            let n = spec.n_rho * spec.n_theta;
            let p: Vec<f64> = (0..n).map(|_| r.random()).collect();
            let q: Vec<f64> = (0..n).map(|_| r.random()).collect();
            let fp = disc.apply_forward(&p);
            let lq = disc.apply_adjoint(&q);
            let lhs: f64 = fp.iter().zip(&q).map(|(a, b)| a * b).sum();
            let rhs: f64 = p.iter().zip(&lq).map(|(a, b)| a * b).sum();
            let scale: f64 = fp.iter().zip(&q).map(|(a, b)| (a * b).abs()).sum();
            assert!((lhs - rhs).abs() < 1e-10 * scale);

            // The tridiagonal assembly used for time stepping is the same operator.
            let nt = spec.n_theta;
            let fr = disc.forward_rho();
            let mut assembled = vec![0.0; n];
            for i in 0..spec.n_rho {
                disc.forward_theta(i).mul_into(&p[i * nt..(i + 1) * nt], &mut assembled[i * nt..(i + 1) * nt]);
            }
            let mut col = vec![0.0; spec.n_rho];
            let mut out = vec![0.0; spec.n_rho];
            for j in 0..nt {
                (0..spec.n_rho).for_each(|i| col[i] = p[i * nt + j]);
                fr.mul_into(&col, &mut out);
                (0..spec.n_rho).for_each(|i| assembled[i * nt + j] += out[i]);
            }
            for (a, b) in assembled.iter().zip(&fp) {
                assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn reflecting_forward_conserves_mass() {
        let spec = small_spec();
        let mut r = Philox::new(4, 0);
        let p: Vec<f64> = (0..spec.n_rho * spec.n_theta).map(|_| r.random()).collect();
        let disc = op(0.5, ThetaBoundary::Reflecting).discretize(&spec).unwrap();
        let fp = disc.apply_forward(&p);
        let scale: f64 = fp.iter().map(|v| v.abs()).sum();
        assert!(fp.iter().sum::<f64>().abs() < 1e-12 * scale);

        // Compactly supported density under absorbing faces.
        let g = DensityGrid::from_fn(spec, |r, t| {
            let s = (r - 2.0).powi(2) + t * t;
            if s < 1.0 { (1.0 - s).powi(3) } else { 0.0 }
        })
        .unwrap();
        let disc = op(0.5, ThetaBoundary::Absorbing).discretize(&spec).unwrap();
        let fp = disc.apply_forward(&g.values);
        assert!(fp.iter().sum::<f64>().abs() * g.cell_area() < 1e-8);
    }

    #[test]
    fn boltzmann_is_static_in_the_interior() {
        let spec = GridSpec::default_for(1.0);
        let p = DensityGrid::from_fn(spec, |r, _| (-r * r / 2.0).exp()).unwrap();
        for boundary in [ThetaBoundary::Absorbing, ThetaBoundary::Reflecting] {
            let res = static_residual(&op(0.0, boundary), &p).unwrap();
            assert!(res < 1e-10, "{res}");
        }
        let mut r = Philox::new(8, 0);
        let noise = DensityGrid::from_fn(spec, |_, _| 0.0).unwrap();
        let noise = DensityGrid {
            values: noise.values.iter().map(|_| 0.5 + r.random::<f64>()).collect(),
            ..noise
        };
        assert!(static_residual(&op(0.0, ThetaBoundary::Reflecting), &noise).unwrap() > 1.0);
    }

    #[test]
    fn m_matrix_structure() {
        let disc = op(3.0, ThetaBoundary::Absorbing).discretize(&GridSpec::default_for(1.0)).unwrap();
        let check = |t: &Tridiag| {
            for i in 0..t.len() {
                assert!(t.a[i] >= 0.0 && t.c[i] >= 0.0);
                let col = t.b[i] + if i > 0 { t.c[i - 1] } else { 0.0 } + if i + 1 < t.len() { t.a[i + 1] } else { 0.0 };
                assert!(col <= 1e-9 * t.b[i].abs());
            }
        };
        check(&disc.forward_rho());
        (0..400).for_each(|i| check(&disc.forward_theta(i)));
    }

    #[test]
    fn quasi_stationary_law_at_k_zero() {
        // Absorbing theta faces: the renormalized limit is
        // rho^2 exp(-rho^2/2) sech^2(theta) with decay rate 2 gamma.
        let spec = GridSpec {
            n_rho: 120,
            n_theta: 120,
            ..GridSpec::default_for(1.0)
        };
        let p0 = DensityGrid::from_fn(spec, |r, t| (-((r - 1.0).powi(2) + t * t) / 2.0).exp()).unwrap();
        let st = evolve_to_stationary(&op(0.0, ThetaBoundary::Absorbing), &p0, 40.0, 0.01, 1e-6).unwrap();
        assert!(st.report.converged);
        assert!((st.report.decay_rate - 2.0).abs() < 0.02, "{}", st.report.decay_rate);
        let exact = DensityGrid::from_fn(spec, |r, t| r * r * (-r * r / 2.0).exp() * sech(t).powi(2)).unwrap();
        let mut exact = exact;
        exact.normalize().unwrap();
        let tv = 0.5 * st.density.l1_distance(&exact);
        assert!(tv < 0.01, "{tv}");
    }

    fn tricomi_profile(spec: &GridSpec) -> Vec<f64> {
        let q2 = crate::specfun::radial::radial_solution(1.0, 2.0, crate::specfun::radial::RadialBranch::TricomiU).unwrap();
        spec.rho_centres().iter().map(|&r| q2.eval(r)).collect()
    }

    fn separable(spec: GridSpec, radial: &[f64], weight: bool) -> DensityGrid {
        let mut g = DensityGrid::from_fn(spec, |_, t| sech(t).powi(2)).unwrap();
        let nt = spec.n_theta;
        for (i, &q) in radial.iter().enumerate() {
            let w = if weight { (-g.rho[i] * g.rho[i] / 2.0).exp() } else { 1.0 };
            g.values[i * nt..(i + 1) * nt].iter_mut().for_each(|v| *v *= q * w);
        }
        g
    }

    #[test]
    fn separable_adjoint_solution_converges_at_second_order() {
        // Q = sech^2(theta) Q2(rho) with the bounded radial branch. Q2 ~ 1/rho
        // near the origin, so the residual is measured on rho > 1/2.
        let o = op(0.0, ThetaBoundary::Absorbing);
        let res: Vec<f64> = [100, 200, 400]
            .iter()
            .map(|&n| {
                let spec = GridSpec {
                    n_rho: n,
                    n_theta: n,
                    ..GridSpec::default_for(1.0)
                };
                let q = separable(spec, &tricomi_profile(&spec), false);
                let disc = o.discretize(&spec).unwrap();
                let lq = disc.apply_adjoint(&q.values);
                let (mut num, mut den) = (0.0, 0.0);
                for (k, (l, v)) in lq.iter().zip(&q.values).enumerate() {
                    let (i, j) = (k / n, k % n);
                    if disc.is_interior(i, j) && q.rho[i] > 0.5 {
                        num += l * l;
                        den += v * v;
                    }
                }
                (num / den).sqrt()
            })
            .collect();
        assert!(res[2] < 3e-3, "{res:?}");
        for w in res.windows(2) {
            assert!((3.0..5.5).contains(&(w[0] / w[1])), "{res:?}");
        }
    }

    #[test]
    fn static_candidate_forward_residual_converges_at_second_order() {
        let o = op(0.0, ThetaBoundary::Absorbing);
        let res: Vec<f64> = [100, 200, 400]
            .iter()
            .map(|&n| {
                let spec = GridSpec {
                    rho_min: 0.5,
                    n_rho: n,
                    n_theta: n,
                    ..GridSpec::default_for(1.0)
                };
                static_residual(&o, &separable(spec, &tricomi_profile(&spec), true)).unwrap()
            })
            .collect();
        for w in res.windows(2) {
            assert!((3.0..5.0).contains(&(w[0] / w[1])), "{res:?}");
        }
    }

    #[test]
    fn stationary_limit_is_unique_and_has_sech2_marginal() {
        let spec = GridSpec::default_for(1.0);
        let o = op(0.0, ThetaBoundary::Absorbing);
        let a = DensityGrid::from_fn(spec, |r, t| (-((r - 1.0).powi(2) + t * t) / 2.0).exp()).unwrap();
        let b = DensityGrid::from_fn(spec, |r, t| if r > 2.0 && r < 3.0 && t > 1.0 && t < 2.0 { 1.0 } else { 0.0 }).unwrap();
        let sa = evolve_to_stationary(&o, &a, 50.0, 0.01, 1e-6).unwrap();
        let sb = evolve_to_stationary(&o, &b, 50.0, 0.01, 1e-6).unwrap();
        assert!(0.5 * sa.density.l1_distance(&sb.density) < 0.005);
        let h = spec.d_theta();
        let marginal = sa.density.theta_marginal();
        let tv: f64 = 0.5
            * marginal
                .iter()
                .zip(spec.theta_edges().windows(2))
                .map(|(m, e)| (m * h - 0.5 * (e[1].tanh() - e[0].tanh())).abs())
                .sum::<f64>();
        assert!(tv < 0.01, "{tv}");
        assert!(sa.density.values.iter().all(|&v| v >= 0.0));
        assert!((sa.density.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reflecting_evolution_conserves_mass_and_relaxes_to_boltzmann() {
        let spec = GridSpec {
            n_rho: 80,
            n_theta: 40,
            theta_max: 2.0,
            ..GridSpec::default_for(1.0)
        };
        let o = op(0.0, ThetaBoundary::Reflecting);
        let p0 = DensityGrid::from_fn(spec, |r, t| (-((r - 1.0).powi(2) + t * t)).exp()).unwrap();
        let st = evolve_to_stationary(&o, &p0, 200.0, 0.05, 1e-7).unwrap();
        assert!(st.report.max_step_mass_change < 1e-9);
        let mut boltz = DensityGrid::from_fn(spec, |r, _| (-r * r / 2.0).exp()).unwrap();
        boltz.normalize().unwrap();
        assert!(0.5 * st.density.l1_distance(&boltz) < 1e-4);
    }

    #[test]
    fn reports_non_convergence_with_history() {
        let spec = small_spec();
        let p0 = DensityGrid::from_fn(spec, |r, t| (-((r - 1.0).powi(2) + t * t)).exp()).unwrap();
        match evolve_to_stationary(&op(0.0, ThetaBoundary::Absorbing), &p0, 0.5, 0.01, 1e-12) {
            Err(Error::NotConverged { t_reached, history, .. }) => {
                assert!((t_reached - 0.5).abs() < 1e-9);
                assert_eq!(history.len(), 10);
            }
            other => panic!("{other:?}"),
        }
    }
}
