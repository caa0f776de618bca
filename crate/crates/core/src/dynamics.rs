//! Deterministic flows: closed-form geodesic and dissipative solutions on
//! the affine algebra, and fixed-step RK4 for any algebra.

use crate::algebra::{energy, LieAlgebra, ModelParams};
use crate::coords::{to_cartesian, PolarVelocity};
use crate::error::{Error, Result};
use crate::scalar::{ln_sech, Real};

/// Right-hand side `du_a/dt = -Gamma_ab G^bc u_c + {H, u_a}` with reusable scratch.
pub struct Drift<'a, T> {
    alg: &'a LieAlgebra<T>,
    params: &'a ModelParams<T>,
    dh: Vec<T>,
    scratch: Vec<T>,
    diss: Vec<T>,
}

impl<'a, T: Real> Drift<'a, T> {
    pub fn new(alg: &'a LieAlgebra<T>, params: &'a ModelParams<T>) -> Result<Self> {
        if alg.dim() != params.dim() {
            return Err(Error::DimensionMismatch {
                expected: alg.dim(),
                got: params.dim(),
            });
        }
        let n = alg.dim();
        Ok(Self {
            alg,
            params,
            dh: vec![T::zero(); n],
            scratch: vec![T::zero(); n],
            diss: vec![T::zero(); n],
        })
    }

    pub fn dim(&self) -> usize {
        self.alg.dim()
    }

    pub fn eval(&mut self, v: &[T], out: &mut [T]) -> Result<()> {
        self.params.hamiltonian_gradient_into(v, &mut self.dh)?;
        self.alg.hamiltonian_field_into(&self.dh, v, out);
        self.params.dissipation_into(v, &mut self.scratch, &mut self.diss);
        for (o, d) in out.iter_mut().zip(&self.diss) {
            *o = *o + *d;
        }
        Ok(())
    }
}

/// Point on the semicircle through `p0` after time `t`: `theta = theta0 + rho t`.
pub fn geodesic_closed_form<T: Real>(p0: &PolarVelocity<T>, t: T) -> [T; 2] {
    to_cartesian(&PolarVelocity {
        rho: p0.rho,
        theta: p0.theta + p0.rho * t,
        epsilon: p0.epsilon,
    })
}

/// Polar state of the dissipative flow through `p1` at time `t1`:
/// `rho = rho1 e^{-gamma (t - t1)}`, `theta = theta1 + rho1 (1 - e^{-gamma (t - t1)}) / gamma`.
pub fn dissipative_closed_form_polar<T: Real>(
    p1: &PolarVelocity<T>,
    t1: T,
    gamma: T,
    t: T,
) -> Result<(T, T)> {
    if !(gamma > T::zero()) {
        return Err(Error::InvalidParams("gamma must be positive".into()));
    }
    let x = -gamma * (t - t1);
    // 1 - e^x computed without cancellation for small |x|.
    let frac = -x.exp_m1() / gamma;
    Ok((p1.rho * x.exp(), p1.theta + p1.rho * frac))
}

/// Cartesian form of [`dissipative_closed_form_polar`]. `v1` is formed in log
/// space so that large `|theta|` or large negative `t - t1` stay finite as
/// long as the result is representable.
pub fn dissipative_closed_form<T: Real>(
    p1: &PolarVelocity<T>,
    t1: T,
    gamma: T,
    t: T,
) -> Result<[T; 2]> {
    let (rho, theta) = dissipative_closed_form_polar(p1, t1, gamma, t)?;
    let log_rho = p1.rho.ln() - gamma * (t - t1);
    let v1 = p1.epsilon.value::<T>() * (log_rho + ln_sech(theta)).exp();
    Ok([-rho * theta.tanh(), v1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    pub algebra: String,
    pub integrator: String,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub meta: TrajectoryMeta,
}

/// Classic RK4 with fixed step `dt` from `t_span.0` to `t_span.1`; the last
/// step is shortened to land on `t_span.1`. Every step is recorded.
pub fn integrate_ode<T: Real>(
    alg: &LieAlgebra<T>,
    params: &ModelParams<T>,
    v0: &[T],
    t_span: (T, T),
    dt: T,
) -> Result<Trajectory<T>> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::InvalidParams("dt must be positive".into()));
    }
    let (t0, t1) = t_span;
    if !(t1 >= t0) {
        return Err(Error::InvalidParams(
            "only forward integration is supported".into(),
        ));
    }
    if v0.len() != alg.dim() {
        return Err(Error::DimensionMismatch {
            expected: alg.dim(),
            got: v0.len(),
        });
    }
    let mut drift = Drift::new(alg, params)?;
    let n = alg.dim();
    let span = t1 - t0;
    let n_steps = (span / dt - T::lit(1e-9)).ceil().to_usize().unwrap_or(0);

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    times.push(t0);
    states.push(v0.to_vec());

    let mut v = v0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
        vec![T::zero(); n],
    );
    let mut tmp = vec![T::zero(); n];
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    for i in 0..n_steps {
        let t = t0 + dt * T::from_usize(i).unwrap();
        let t_next = if i + 1 == n_steps {
            t1
        } else {
            t0 + dt * T::from_usize(i + 1).unwrap()
        };
        let h = t_next - t;
        drift.eval(&v, &mut k1)?;
        for j in 0..n {
            tmp[j] = v[j] + half * h * k1[j];
        }
        drift.eval(&tmp, &mut k2)?;
        for j in 0..n {
            tmp[j] = v[j] + half * h * k2[j];
        }
        drift.eval(&tmp, &mut k3)?;
        for j in 0..n {
            tmp[j] = v[j] + h * k3[j];
        }
        drift.eval(&tmp, &mut k4)?;
        for j in 0..n {
            v[j] = v[j] + h * sixth * (k1[j] + (k2[j] + k3[j]) * T::lit(2.0) + k4[j]);
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Divergence {
                t: t_next.to_f64().unwrap_or(f64::NAN),
            });
        }
        times.push(t_next);
        states.push(v.clone());
    }
    Ok(Trajectory {
        times,
        states,
        meta: TrajectoryMeta {
            algebra: alg.name().to_string(),
            integrator: "rk4".into(),
            dt: dt.to_f64().unwrap_or(f64::NAN),
        },
    })
}

/// Max over samples of `|E(t) - E(t0) e^{-2 gamma (t - t0)}| / E(t0)`.
pub fn energy_decay_check<T: Real>(traj: &Trajectory<T>, params: &ModelParams<T>, gamma: T) -> T {
    let (Some(&t0), Some(s0)) = (traj.times.first(), traj.states.first()) else {
        return T::zero();
    };
    let e0 = energy(params, s0);
    if e0 == T::zero() {
        return T::zero();
    }
    let two = T::lit(2.0);
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| (energy(params, s) - e0 * (-two * gamma * (t - t0)).exp()).abs() / e0)
        .fold(T::zero(), T::max)
}
