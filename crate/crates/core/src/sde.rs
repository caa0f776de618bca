//! Euler-Maruyama ensembles for the Cartesian Langevin equation and for the
//! polar diffusion whose forward equation is the polar Fokker-Planck
//! operator.
//!
//! The polar process is
//! `drho = -gamma rho dt + sqrt(2D) dW1`,
//! `dtheta = [(D/rho^2) sinh 2theta + s H'(rho)] dt + sqrt(2D) cosh(theta)/rho dW2`.
//! It is integrated in `u = tanh(theta)`, where Ito's formula removes the
//! exponential drift:
//! `du = (1 - u^2) s H'(rho) dt + sqrt(2D) sqrt(1 - u^2) / rho dW2`.
//!
//! Random streams: trajectory `i` of a run with seed `s` draws from
//! `Philox::new(s, i)` (see [`crate::rng`]), so results do not depend on
//! the number of worker threads.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{HamiltonianKind, LieAlgebra, ModelParams};
use crate::coords::Sign;
use crate::error::{Error, Result};
use crate::fpk::{FPKOperator, ThetaBoundary};
use crate::rng::Philox;

/// Scalar white-noise strength: `<eta_a(t) eta_b(t')> = 2 D delta_ab delta(t - t')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub d: f64,
}

impl NoiseModel {
    pub fn new(d: f64) -> Result<Self> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::InvalidParams("noise strength D must be positive".into()));
        }
        Ok(Self { d })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "cartesian_naive")]
    CartesianNaive,
    #[serde(rename = "polar_fpk")]
    PolarFPK,
}

/// Euler-Maruyama for `dv = (-Gamma G v + V(v)) dt + sqrt(2 D) dW` on any
/// algebra. The nonzero structure constants, `Gamma G` and `B` with
/// `B B^T = D` are precomputed.
pub struct CartesianStepper<'a> {
    params: &'a ModelParams<f64>,
    /// `(a, b, c, f_ba^c)` for every nonzero constant.
    terms: Vec<(usize, usize, usize, f64)>,
    rate: Vec<f64>,
    noise: Vec<f64>,
    noise_diagonal: bool,
    gv: Vec<f64>,
    f: Vec<f64>,
}

impl<'a> CartesianStepper<'a> {
    pub fn new(alg: &LieAlgebra<f64>, params: &'a ModelParams<f64>) -> Result<Self> {
        let n = alg.dim();
        if params.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: params.dim(),
            });
        }
        let mut terms = Vec::new();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let f = alg.f(b, a, c);
                    if f != 0.0 {
                        terms.push((a, b, c, f));
                    }
                }
            }
        }
        let (g, gm) = (params.g(), params.gamma());
        let rate = (0..n * n)
            .map(|ij| (0..n).map(|l| gm[(ij / n) * n + l] * g[l * n + ij % n]).sum())
            .collect();
        let noise = noise_factor(params.diffusion(), n);
        let noise_diagonal = (0..n).all(|i| (0..n).all(|j| i == j || noise[i * n + j] == 0.0));
        Ok(Self {
            params,
            terms,
            rate,
            noise,
            noise_diagonal,
            gv: vec![0.0; n],
            f: vec![0.0; n],
        })
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    /// One step in place with standard normal draws `xi`. `t` only labels
    /// the divergence error.
    pub fn step(&mut self, v: &mut [f64], dt: f64, xi: &[f64], t: f64) -> Result<()> {
        let n = self.dim();
        if v.len() != n || xi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len().min(xi.len()),
            });
        }
        let g = self.params.g();
        for i in 0..n {
            self.gv[i] = (0..n).map(|j| g[i * n + j] * v[j]).sum();
        }
        // dH/dv = G v for the quadratic Hamiltonian, scaled by H'(rho)/rho otherwise.
        let scale = match self.params.hamiltonian() {
            HamiltonianKind::Quadratic => 1.0,
            HamiltonianKind::InverseRho => {
                let rho = v.iter().zip(&self.gv).map(|(a, b)| a * b).sum::<f64>().sqrt();
                if !(rho > 0.0) {
                    return Err(Error::Singularity("H = -k/rho is singular at rho = 0".into()));
                }
                self.params.h_prime(rho) / rho
            }
        };
        for i in 0..n {
            self.f[i] = -(0..n).map(|j| self.rate[i * n + j] * v[j]).sum::<f64>();
        }
        for &(a, b, c, f) in &self.terms {
            self.f[a] += f * v[c] * self.gv[b] * scale;
        }
        let amp = (2.0 * dt).sqrt();
        if self.noise_diagonal {
            for i in 0..n {
                v[i] += self.f[i] * dt + amp * self.noise[i * n + i] * xi[i];
            }
        } else {
            for i in 0..n {
                let kick: f64 = (0..n).map(|j| self.noise[i * n + j] * xi[j]).sum();
                self.gv[i] = self.f[i] * dt + amp * kick;
            }
            for i in 0..n {
                v[i] += self.gv[i];
            }
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence { t });
        }
        Ok(())
    }
}

/// `B` with `B B^T = D`: the square root of the diagonal when `D` is
/// diagonal, else the symmetric square root.
fn noise_factor(d: &[f64], n: usize) -> Vec<f64> {
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || d[i * n + j] == 0.0));
    if diagonal {
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            b[i * n + i] = d[i * n + i].max(0.0).sqrt();
        }
        return b;
    }
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(n, n, d));
    let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    let b = &eig.eigenvectors * sqrt * eig.eigenvectors.transpose();
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| b[(i, j)]).collect()
}

/// Single Euler-Maruyama step of the Cartesian equation.
pub fn step_cartesian_naive(
    alg: &LieAlgebra<f64>,
    params: &ModelParams<f64>,
    v: &[f64],
    dt: f64,
    xi: &[f64],
) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParams("dt must be positive".into()));
    }
    let mut out = v.to_vec();
    CartesianStepper::new(alg, params)?.step(&mut out, dt, xi, 0.0)?;
    Ok(out)
}

/// Coefficients of the polar diffusion plus its boundary handling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarModel {
    pub gamma: f64,
    pub d: f64,
    pub hamiltonian: HamiltonianKind,
    pub k: f64,
    pub sign_s: Sign,
    /// Reflecting floor in `rho`.
    pub rho_min: f64,
    pub theta_max: f64,
    pub theta_boundary: ThetaBoundary,
}

/// State after a polar step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarState {
    pub rho: f64,
    pub theta: f64,
    /// Left `|theta| < theta_max` through an absorbing face.
    pub exited: bool,
}

impl PolarModel {
    pub fn from_operator(op: &FPKOperator, rho_min: f64, theta_max: f64) -> Result<Self> {
        Self::new(op.gamma, op.d, op.hamiltonian, op.k, op.sign_s, rho_min, theta_max, op.theta_boundary)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        gamma: f64,
        d: f64,
        hamiltonian: HamiltonianKind,
        k: f64,
        sign_s: Sign,
        rho_min: f64,
        theta_max: f64,
        theta_boundary: ThetaBoundary,
    ) -> Result<Self> {
        if !(d >= 0.0) || !(gamma >= 0.0) || !d.is_finite() || !gamma.is_finite() || !k.is_finite() {
            return Err(Error::InvalidParams("need finite gamma, D >= 0 and finite k".into()));
        }
        if !(rho_min > 0.0) || !(theta_max > 0.0) {
            return Err(Error::InvalidParams("rho_min and theta_max must be positive".into()));
        }
        Ok(Self {
            gamma,
            d,
            hamiltonian,
            k,
            sign_s,
            rho_min,
            theta_max,
            theta_boundary,
        })
    }

    pub fn h_prime(&self, rho: f64) -> f64 {
        match self.hamiltonian {
            HamiltonianKind::Quadratic => rho,
            HamiltonianKind::InverseRho => self.k / (rho * rho),
        }
    }

    /// Drift `(-gamma rho, (D/rho^2) sinh 2theta + s H'(rho))`.
    pub fn drift(&self, rho: f64, theta: f64) -> (f64, f64) {
        (
            -self.gamma * rho,
            self.d / (rho * rho) * (2.0 * theta).sinh() + self.sign_s.value::<f64>() * self.h_prime(rho),
        )
    }

    /// Noise amplitudes `(sqrt(2D), sqrt(2D) cosh(theta) / rho)`.
    pub fn diffusion(&self, rho: f64, theta: f64) -> (f64, f64) {
        let s = (2.0 * self.d).sqrt();
        (s, s * theta.cosh() / rho)
    }

    /// One step on `(rho, u = tanh theta)`. Returns `true` when the state
    /// left through an absorbing face (the state is then unspecified).
    #[inline]
    fn step_u(&self, rho: &mut f64, u: &mut f64, dt: f64, xi: [f64; 2], u_max: f64) -> bool {
        let amp = (2.0 * self.d * dt).sqrt();
        let r = *rho;
        let one_minus = (1.0 - *u) * (1.0 + *u);
        let mut u_new = *u
            + one_minus * self.sign_s.value::<f64>() * self.h_prime(r) * dt
            + amp * one_minus.max(0.0).sqrt() / r * xi[1];
        let mut r_new = r - self.gamma * r * dt + amp * xi[0];
        if r_new < self.rho_min {
            r_new = 2.0 * self.rho_min - r_new;
        }
        *rho = r_new;
        if u_new.abs() >= u_max {
            match self.theta_boundary {
                ThetaBoundary::Absorbing => return true,
                ThetaBoundary::Reflecting => {
                    let m = u_max.copysign(u_new);
                    u_new = (2.0 * m - u_new).clamp(-u_max, u_max);
                }
            }
        }
        *u = u_new;
        false
    }
}

/// One Euler-Maruyama step of the polar diffusion from `(rho, theta)`.
pub fn step_polar_fpk(model: &PolarModel, p: (f64, f64), dt: f64, xi: [f64; 2]) -> Result<PolarState> {
    let (mut rho, theta) = p;
    if !(rho >= model.rho_min) || !theta.is_finite() {
        return Err(Error::InvalidParams(format!("state ({rho}, {theta}) outside the domain")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidParams("dt must be positive".into()));
    }
    let mut u = theta.tanh();
    let exited = model.step_u(&mut rho, &mut u, dt, xi, model.theta_max.tanh());
    if !rho.is_finite() || !u.is_finite() {
        return Err(Error::Divergence { t: dt });
    }
    Ok(PolarState {
        rho,
        theta: if exited { f64::NAN } else { u.atanh() },
        exited,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub t_burn: f64,
    /// Length of the sampling window after burn-in.
    pub t_sample: f64,
    /// Spacing of snapshots inside the window.
    pub sample_every: f64,
    pub dt: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub rho_min: f64,
    pub theta_max: f64,
    pub theta_boundary: ThetaBoundary,
    pub drift_sign: Sign,
    /// Initial state: `(rho, theta)` for `PolarFPK`, the velocity otherwise.
    /// Defaults to `(1/sqrt(beta), 0)` and to the zero velocity.
    pub initial: Option<Vec<f64>>,
}

impl EnsembleConfig {
    pub fn new(scheme: Scheme, n_traj: usize, seed: u64) -> Self {
        Self {
            n_traj,
            t_burn: 10.0,
            t_sample: 9.0,
            sample_every: 1.0,
            dt: 1e-3,
            seed,
            scheme,
            rho_min: 1e-3,
            theta_max: 8.0,
            theta_boundary: ThetaBoundary::Absorbing,
            drift_sign: Sign::Minus,
            initial: None,
        }
    }

    fn schedule(&self) -> Result<(usize, usize, usize)> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_traj == 0 {
            return bad("n_traj must be positive");
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        if !(self.t_burn >= 0.0) || !(self.t_sample >= 0.0) || !self.t_burn.is_finite() || !self.t_sample.is_finite() {
            return bad("t_burn and t_sample must be non-negative");
        }
        let burn = (self.t_burn / self.dt).round() as usize;
        if self.t_sample == 0.0 {
            return Ok((burn, 1, 1));
        }
        if !(self.sample_every >= self.dt) {
            return bad("sample_every must be at least dt");
        }
        let stride = (self.sample_every / self.dt).round() as usize;
        let snaps = (self.t_sample / self.sample_every + 1e-9).floor() as usize + 1;
        Ok((burn, stride, snaps))
    }

    /// Times at which samples are taken.
    pub fn snapshot_times(&self) -> Result<Vec<f64>> {
        let (burn, stride, snaps) = self.schedule()?;
        Ok((0..snaps).map(|k| (burn + k * stride) as f64 * self.dt).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub config: EnsembleConfig,
    pub algebra: String,
    pub coordinates: Vec<String>,
    pub snapshot_times: Vec<f64>,
    /// `n_traj x n_snapshots x dim`, trajectory-major. Rows of diverged
    /// trajectories are zero and flagged in `valid`.
    pub samples: Vec<f64>,
    pub valid: Vec<bool>,
    pub diverged: usize,
    /// Fleming-Viot replacements after absorption.
    pub resampled: u64,
}

impl EnsembleResult {
    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    pub fn n_snapshots(&self) -> usize {
        self.snapshot_times.len()
    }

    /// Rows of valid trajectories at snapshot `k`.
    pub fn snapshot(&self, k: usize) -> impl Iterator<Item = &[f64]> + '_ {
        let (d, s) = (self.dim(), self.n_snapshots());
        (0..self.config.n_traj)
            .filter(|&i| self.valid[i])
            .map(move |i| &self.samples[(i * s + k) * d..(i * s + k + 1) * d])
    }

    /// All rows of valid trajectories.
    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        let (d, s) = (self.dim(), self.n_snapshots());
        (0..self.config.n_traj)
            .filter(|&i| self.valid[i])
            .flat_map(move |i| self.samples[i * s * d..(i + 1) * s * d].chunks(d))
    }

    /// First two coordinates of every valid row.
    pub fn pairs(&self) -> Vec<[f64; 2]> {
        self.rows().map(|r| [r[0], r[1]]).collect()
    }

    pub fn n_samples(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count() * self.n_snapshots()
    }
}

fn affine_like(alg: &LieAlgebra<f64>) -> bool {
    let aff = LieAlgebra::<f64>::affine();
    alg.dim() == 2
        && (0..2).all(|a| (0..2).all(|b| (0..2).all(|c| alg.f(a, b, c) == aff.f(a, b, c))))
}

/// Runs `n_traj` trajectories and collects snapshots after burn-in.
///
/// `PolarFPK` requires the affine algebra with `G = 1`, `Gamma = gamma 1`
/// and `D = d 1`. With absorbing `theta` faces the ensemble is a
/// Fleming-Viot particle system: a particle that leaves is replaced by a
/// copy of a survivor chosen with its own stream, after all particles have
/// moved. Its snapshots therefore sample the quasi-stationary law.
pub fn run_ensemble(alg: &LieAlgebra<f64>, params: &ModelParams<f64>, cfg: &EnsembleConfig) -> Result<EnsembleResult> {
    let (burn, stride, snaps) = cfg.schedule()?;
    if alg.dim() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: alg.dim(),
            got: params.dim(),
        });
    }
    let result = match cfg.scheme {
        Scheme::CartesianNaive => run_cartesian(alg, params, cfg, burn, stride, snaps)?,
        Scheme::PolarFPK => run_polar(alg, params, cfg, burn, stride, snaps)?,
    };
    let budget = cfg.n_traj / 1000;
    if result.diverged > budget {
        return Err(Error::DivergenceBudget {
            diverged: result.diverged,
            total: cfg.n_traj,
            budget,
        });
    }
    Ok(result)
}

fn rate_norm(params: &ModelParams<f64>) -> f64 {
    let n = params.dim();
    let (g, gm) = (params.g(), params.gamma());
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|l| gm[i * n + l] * g[l * n + j]).sum::<f64>().abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn run_cartesian(
    alg: &LieAlgebra<f64>,
    params: &ModelParams<f64>,
    cfg: &EnsembleConfig,
    burn: usize,
    stride: usize,
    snaps: usize,
) -> Result<EnsembleResult> {
    let n = alg.dim();
    if cfg.dt * rate_norm(params) >= 1.0 {
        return Err(Error::InvalidConfig("dt must be below 1/gamma".into()));
    }
    let init = match &cfg.initial {
        Some(v) if v.len() != n => {
            return Err(Error::InvalidConfig(format!("initial state needs {n} entries")));
        }
        Some(v) => v.clone(),
        None => vec![0.0; n],
    };
    let total = burn + (snaps - 1) * stride;
    let per_traj: Vec<Option<Vec<f64>>> = (0..cfg.n_traj)
        .into_par_iter()
        .map_init(
            || (CartesianStepper::new(alg, params).expect("checked dimensions"), vec![0.0; n]),
            |(stepper, xi), i| {
                let mut rng = Philox::new(cfg.seed, i as u64);
                let mut v = init.clone();
                let mut out = Vec::with_capacity(snaps * n);
                let mut next = burn;
                for step in 0..=total {
                    if step > 0 {
                        xi.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
                        if stepper.step(&mut v, cfg.dt, xi, step as f64 * cfg.dt).is_err() {
                            return None;
                        }
                    }
                    if step == next {
                        out.extend_from_slice(&v);
                        next += stride;
                    }
                }
                Some(out)
            },
        )
        .collect();
    let mut samples = Vec::with_capacity(cfg.n_traj * snaps * n);
    let mut valid = Vec::with_capacity(cfg.n_traj);
    for t in per_traj {
        match t {
            Some(s) => {
                samples.extend(s);
                valid.push(true);
            }
            None => {
                samples.extend(std::iter::repeat_n(0.0, snaps * n));
                valid.push(false);
            }
        }
    }
    let diverged = valid.iter().filter(|v| !**v).count();
    Ok(EnsembleResult {
        config: cfg.clone(),
        algebra: alg.name().to_string(),
        coordinates: (0..n).map(|i| format!("v{i}")).collect(),
        snapshot_times: cfg.snapshot_times()?,
        samples,
        valid,
        diverged,
        resampled: 0,
    })
}

fn polar_model(alg: &LieAlgebra<f64>, params: &ModelParams<f64>, cfg: &EnsembleConfig) -> Result<PolarModel> {
    if !affine_like(alg) {
        return Err(Error::InvalidConfig("PolarFPK needs the affine algebra".into()));
    }
    let g = params.g();
    if g != [1.0, 0.0, 0.0, 1.0] {
        return Err(Error::InvalidConfig("PolarFPK needs G = 1".into()));
    }
    let gamma = params.scalar_rate()?;
    let d = params.scalar_diffusion()?;
    if cfg.dt * gamma >= 1.0 {
        return Err(Error::InvalidConfig("dt must be below 1/gamma".into()));
    }
    PolarModel::new(
        gamma,
        d,
        params.hamiltonian(),
        params.k(),
        cfg.drift_sign,
        cfg.rho_min,
        cfg.theta_max,
        cfg.theta_boundary,
    )
}

const CHUNK: usize = 2048;

fn run_polar(
    alg: &LieAlgebra<f64>,
    params: &ModelParams<f64>,
    cfg: &EnsembleConfig,
    burn: usize,
    stride: usize,
    snaps: usize,
) -> Result<EnsembleResult> {
    let model = polar_model(alg, params, cfg)?;
    let (rho0, theta0) = match &cfg.initial {
        Some(v) if v.len() != 2 => return Err(Error::InvalidConfig("initial state needs (rho, theta)".into())),
        Some(v) => (v[0], v[1]),
        None => (1.0 / params.beta().sqrt(), 0.0),
    };
    if !(rho0 >= cfg.rho_min) || !(theta0.abs() < cfg.theta_max) {
        return Err(Error::InvalidConfig("initial state outside the domain".into()));
    }
    let u_max = cfg.theta_max.tanh();
    let n = cfg.n_traj;
    let total = burn + (snaps - 1) * stride;
    let mut rho = vec![rho0; n];
    let mut u = vec![theta0.tanh(); n];
    let mut rngs: Vec<Philox> = (0..n).map(|i| Philox::new(cfg.seed, i as u64)).collect();
    let mut exited = vec![false; n];
    let mut samples = vec![0.0; n * snaps * 2];
    let mut resampled = 0u64;
    let mut next = burn;
    let mut k_snap = 0;
    for step in 0..=total {
        if step > 0 {
            rho.par_chunks_mut(CHUNK)
                .zip(u.par_chunks_mut(CHUNK))
                .zip(rngs.par_chunks_mut(CHUNK))
                .zip(exited.par_chunks_mut(CHUNK))
                .for_each(|(((r, u), g), e)| {
                    for i in 0..r.len() {
                        let xi = [g[i].sample(StandardNormal), g[i].sample(StandardNormal)];
                        e[i] = model.step_u(&mut r[i], &mut u[i], cfg.dt, xi, u_max);
                    }
                });
            let n_exited = exited.iter().filter(|&&e| e).count();
            if n_exited == n {
                return Err(Error::Divergence { t: step as f64 * cfg.dt });
            }
            if n_exited > 0 {
                for i in 0..n {
                    if exited[i] {
                        // Uniform over survivors by rejection.
                        let j = loop {
                            let j = rngs[i].random_range(0..n);
                            if !exited[j] {
                                break j;
                            }
                        };
                        rho[i] = rho[j];
                        u[i] = u[j];
                        resampled += 1;
                    }
                }
            }
        }
        if step == next {
            for i in 0..n {
                let o = (i * snaps + k_snap) * 2;
                samples[o] = rho[i];
                samples[o + 1] = u[i].atanh();
            }
            k_snap += 1;
            next += stride;
        }
    }
    let valid: Vec<bool> = (0..n)
        .map(|i| samples[i * snaps * 2..(i + 1) * snaps * 2].iter().all(|x| x.is_finite()))
        .collect();
    let diverged = valid.iter().filter(|v| !**v).count();
    for (i, ok) in valid.iter().enumerate() {
        if !ok {
            samples[i * snaps * 2..(i + 1) * snaps * 2].iter_mut().for_each(|x| *x = 0.0);
        }
    }
    Ok(EnsembleResult {
        config: cfg.clone(),
        algebra: alg.name().to_string(),
        coordinates: vec!["rho".into(), "theta".into()],
        snapshot_times: cfg.snapshot_times()?,
        samples,
        valid,
        diverged,
        resampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coords::PolarVelocity;
    use crate::dynamics::dissipative_closed_form;
    use crate::stats::{bin_samples, total_variation_histograms};

    fn affine_params(gamma: f64, d: f64) -> ModelParams<f64> {
        ModelParams::isotropic(2, gamma, d, 1.0).unwrap()
    }

    fn polar(d: f64, k: f64, boundary: ThetaBoundary) -> PolarModel {
        PolarModel::new(1.0, d, HamiltonianKind::InverseRho, k, Sign::Minus, 1e-3, 8.0, boundary).unwrap()
    }

    #[test]
    fn pure_noise_increment() {
        let alg = LieAlgebra::affine();
        let p = affine_params(1.0, 0.5);
        let v = step_cartesian_naive(&alg, &p, &[0.0, 0.0], 0.01, &[1.0, 0.0]).unwrap();
        assert!((v[0] - 0.1).abs() < 1e-16 && v[1] == 0.0);
        assert!(NoiseModel::new(0.0).is_err());
    }

    #[test]
    fn noiseless_steps_follow_the_flows() {
        let alg = LieAlgebra::affine();
        // gamma = 0, D = 0: explicit Euler of the geodesic field.
        let p = ModelParams::isotropic(2, 0.0, 0.0, 1.0).unwrap();
        let v = step_cartesian_naive(&alg, &p, &[0.3, 0.7], 0.01, &[5.0, 5.0]).unwrap();
        assert!((v[0] - (0.3 - 0.49 * 0.01)).abs() < 1e-15);
        assert!((v[1] - (0.7 + 0.21 * 0.01)).abs() < 1e-15);

        // gamma = 1, D = 0: O(dt) convergence to the dissipative solution.
        let p = ModelParams::isotropic(2, 1.0, 0.0, 1.0).unwrap();
        let err = |dt: f64| {
            let mut st = CartesianStepper::new(&alg, &p).unwrap();
            let mut v = vec![0.0, 1.0];
            let steps = (1.0 / dt).round() as usize;
            for _ in 0..steps {
                st.step(&mut v, dt, &[0.0, 0.0], 0.0).unwrap();
            }
            let p1 = PolarVelocity::new(1.0, 0.0, Sign::Plus).unwrap();
            let want = dissipative_closed_form(&p1, 0.0, 1.0, 1.0).unwrap();
            (v[0] - want[0]).abs().max((v[1] - want[1]).abs())
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        assert!(e1 < 1e-3);
        assert!((1.8..2.2).contains(&(e1 / e2)), "{e1} {e2}");
    }

    #[test]
    fn correlated_noise_factor() {
        let d = [2.0, 0.5, 0.5, 1.0];
        let b = noise_factor(&d, 2);
        for i in 0..2 {
            for j in 0..2 {
                let bb: f64 = (0..2).map(|l| b[i * 2 + l] * b[j * 2 + l]).sum();
                assert!((bb - d[i * 2 + j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn polar_deterministic_limit_and_symmetry() {
        let m = polar(0.0, 0.0, ThetaBoundary::Absorbing);
        let mut p = (2.0, 0.4);
        for _ in 0..1000 {
            let s = step_polar_fpk(&m, p, 1e-3, [1.0, -1.0]).unwrap();
            p = (s.rho, s.theta);
        }
        assert!((p.0 - 2.0 * (1.0f64 - 1e-3).powi(1000)).abs() < 1e-12);
        assert!((p.0 - 2.0 * (-1.0f64).exp()).abs() < 2e-3);
        assert!((p.1 - 0.4).abs() < 1e-12);

        let m = polar(1.0, 0.7, ThetaBoundary::Absorbing);
        for rho in [0.1, 1.0, 3.0] {
            assert_eq!(m.drift(rho, 0.0).1, -0.7 / (rho * rho));
            let (a, b) = (m.drift(rho, 0.3).1 - m.drift(rho, 0.0).1, m.drift(rho, -0.3).1 - m.drift(rho, 0.0).1);
            assert!((a + b).abs() < 1e-12);
            assert_eq!(m.diffusion(rho, 0.3), m.diffusion(rho, -0.3));
        }
    }

    #[test]
    fn polar_boundaries() {
        let m = polar(1.0, 0.0, ThetaBoundary::Absorbing);
        let s = step_polar_fpk(&m, (2e-3, 0.0), 1e-2, [-1.0, 0.0]).unwrap();
        assert!(s.rho >= 1e-3 && !s.exited);
        let s = step_polar_fpk(&m, (0.01, 7.9), 1e-2, [0.0, 3.0]).unwrap();
        assert!(s.exited);
        let m = polar(1.0, 0.0, ThetaBoundary::Reflecting);
        let s = step_polar_fpk(&m, (0.01, 7.9), 1e-2, [0.0, 3.0]).unwrap();
        assert!(!s.exited && s.theta.abs() <= 8.0 + 1e-6);
        assert!(step_polar_fpk(&m, (1e-4, 0.0), 1e-2, [0.0, 0.0]).is_err());
    }

    #[test]
    fn weak_order_one_in_energy() {
        // Coupled increments: coarse steps reuse sums of fine draws.
        let m = polar(1.0, 0.0, ThetaBoundary::Reflecting);
        let fine = 0.0125;
        let levels = [8usize, 4, 2];
        let n_paths = 20_000;
        let mut means = [0.0; 3];
        for path in 0..n_paths {
            let mut rng = Philox::new(99, path);
            let draws: Vec<[f64; 2]> = (0..(1.0 / fine) as usize)
                .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
                .collect();
            for (l, &agg) in levels.iter().enumerate() {
                let dt = fine * agg as f64;
                let mut p = (0.5, 0.0);
                for block in draws.chunks(agg) {
                    let s = (agg as f64).sqrt();
                    let xi = [
                        block.iter().map(|x| x[0]).sum::<f64>() / s,
                        block.iter().map(|x| x[1]).sum::<f64>() / s,
                    ];
                    let st = step_polar_fpk(&m, p, dt, xi).unwrap();
                    p = (st.rho, st.theta);
                }
                means[l] += 0.5 * p.0 * p.0 / n_paths as f64;
            }
        }
        let ratio = (means[0] - means[1]) / (means[1] - means[2]);
        assert!((1.5..2.6).contains(&ratio), "{means:?} {ratio}");
    }

    fn small_cfg(scheme: Scheme) -> EnsembleConfig {
        EnsembleConfig {
            t_burn: 1.0,
            t_sample: 1.0,
            sample_every: 0.5,
            dt: 0.01,
            ..EnsembleConfig::new(scheme, 300, 42)
        }
    }

    #[test]
    fn ensembles_are_deterministic_across_pools() {
        let alg = LieAlgebra::affine();
        let p = affine_params(1.0, 1.0);
        for scheme in [Scheme::CartesianNaive, Scheme::PolarFPK] {
            let cfg = small_cfg(scheme);
            let a = run_ensemble(&alg, &p, &cfg).unwrap();
            let b = rayon::ThreadPoolBuilder::new()
                .num_threads(3)
                .build()
                .unwrap()
                .install(|| run_ensemble(&alg, &p, &cfg).unwrap());
            assert_eq!(a, b);
            assert_eq!(a.snapshot_times, vec![1.0, 1.5, 2.0]);
            assert_eq!(a.n_samples(), 900);
            let c = run_ensemble(&alg, &p, &EnsembleConfig { seed: 43, ..cfg }).unwrap();
            assert_ne!(a.samples, c.samples);
        }
    }

    #[test]
    fn config_validation() {
        let alg = LieAlgebra::affine();
        let p = affine_params(1.0, 1.0);
        let bad = [
            EnsembleConfig { n_traj: 0, ..small_cfg(Scheme::PolarFPK) },
            EnsembleConfig { dt: 2.0, ..small_cfg(Scheme::PolarFPK) },
            EnsembleConfig { sample_every: 0.001, ..small_cfg(Scheme::PolarFPK) },
            EnsembleConfig { initial: Some(vec![0.5, 9.0]), ..small_cfg(Scheme::PolarFPK) },
            EnsembleConfig { initial: Some(vec![0.5]), ..small_cfg(Scheme::CartesianNaive) },
        ];
        for cfg in bad {
            assert!(matches!(run_ensemble(&alg, &p, &cfg), Err(Error::InvalidConfig(_))), "{cfg:?}");
        }
        let so3 = LieAlgebra::so3();
        let p3 = ModelParams::isotropic(3, 1.0, 1.0, 1.0).unwrap();
        assert!(run_ensemble(&so3, &p3, &small_cfg(Scheme::PolarFPK)).is_err());
    }

    #[test]
    fn divergence_budget() {
        let alg = LieAlgebra::affine();
        let p = affine_params(1.0, 1.0);
        let cfg = EnsembleConfig {
            initial: Some(vec![-1e200, 1e200]),
            ..small_cfg(Scheme::CartesianNaive)
        };
        match run_ensemble(&alg, &p, &cfg) {
            Err(Error::DivergenceBudget { diverged, total, .. }) => assert_eq!((diverged, total), (300, 300)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn polar_ensemble_reaches_the_quasi_stationary_law() {
        let alg = LieAlgebra::affine();
        let p = affine_params(1.0, 1.0).with_inverse_rho(0.0);
        let cfg = EnsembleConfig {
            n_traj: 20_000,
            t_burn: 5.0,
            t_sample: 4.0,
            dt: 2e-3,
            ..EnsembleConfig::new(Scheme::PolarFPK, 0, 7)
        };
        let r = run_ensemble(&alg, &p, &cfg).unwrap();
        assert!(r.resampled > 0);
        let h = bin_samples(
            &r.pairs(),
            &crate::quad::uniform_edges(1e-3, 6.0, 10),
            &crate::quad::uniform_edges(-8.0, 8.0, 40),
        )
        .unwrap();
        let tv = total_variation_histograms(&h, &h.reflect_y().unwrap()).unwrap();
        assert!(tv < 0.02, "{tv}");
        // rho^2 e^{-rho^2/2} sech^2(theta): <rho^2> = 3, <|theta|> = ln 2.
        let pairs = r.pairs();
        let n = pairs.len() as f64;
        let r2 = pairs.iter().map(|x| x[0] * x[0]).sum::<f64>() / n;
        let th = pairs.iter().map(|x| x[1].abs()).sum::<f64>() / n;
        assert!((r2 - 3.0).abs() < 0.1, "{r2}");
        assert!((th - std::f64::consts::LN_2).abs() < 0.02, "{th}");
    }
}
