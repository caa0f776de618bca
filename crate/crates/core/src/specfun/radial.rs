//! Radial factor of the separated stationary equation:
//! `Q2'' - beta rho Q2' - (beta1 / rho^2) Q2 = 0`.
//!
//! Substituting `Q2 = rho^s f(z)` with `z = beta rho^2 / 2` and
//! `s (s - 1) = beta1` gives Kummer's equation with parameters
//! `(s/2, s + 1/2)`. `M` grows like `e^z`; `U` gives the branch that stays
//! bounded as `rho -> inf`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::erf::erf;
use super::hypergeometric::{
    kummer_m, kummer_m_prime, kummer_m_second, tricomi_u, tricomi_u_prime, tricomi_u_second,
};
use super::{fd_derivatives, Profile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialBranch {
    /// `1 - e^{-beta rho^2/4} erf(sqrt(beta) rho / 2) / (sqrt(beta) rho)`.
    ClosedFormErf,
    /// `rho^s M(s/2, s + 1/2, beta rho^2 / 2)`.
    KummerM,
    /// `rho^s U(s/2, s + 1/2, beta rho^2 / 2)`.
    TricomiU,
    /// Bounded solution by inward shooting, `Q2(rho_max) = 1`.
    NumericBVP,
}

#[derive(Debug, Clone)]
pub struct RadialSolution {
    pub beta: f64,
    pub beta1: f64,
    pub branch: RadialBranch,
    /// Larger indicial exponent `(1 + sqrt(1 + 4 beta1)) / 2`.
    pub s: f64,
    table: Option<ShootingTable>,
}

#[derive(Debug, Clone)]
struct ShootingTable {
    rho: Vec<f64>,
    q: Vec<f64>,
    dq: Vec<f64>,
}

/// Larger root of `s (s - 1) = beta1`.
pub fn indicial_exponent(beta1: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * beta1).sqrt())
}

pub fn radial_solution(beta: f64, beta1: f64, branch: RadialBranch) -> Result<RadialSolution> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParams("beta must be positive".into()));
    }
    if !(beta1 >= -0.25) || !beta1.is_finite() {
        return Err(Error::InvalidParams(format!("beta1 = {beta1} below -1/4")));
    }
    let table = match branch {
        RadialBranch::NumericBVP => Some(shoot(beta, beta1)?),
        _ => None,
    };
    Ok(RadialSolution {
        beta,
        beta1,
        branch,
        s: indicial_exponent(beta1),
        table,
    })
}

impl RadialSolution {
    /// Inner end of the shooting table.
    pub fn rho_lo(&self) -> Option<f64> {
        self.table.as_ref().map(|t| t.rho[0])
    }

    /// Outer end of the shooting table, `8 / sqrt(beta)`.
    pub fn rho_max(&self) -> Option<f64> {
        self.table.as_ref().map(|t| *t.rho.last().unwrap())
    }

    fn hypergeometric_derivatives(&self, rho: f64, use_u: bool) -> Result<[f64; 3]> {
        let (s, beta) = (self.s, self.beta);
        let (a, b) = (0.5 * s, s + 0.5);
        let z = 0.5 * beta * rho * rho;
        let (f, fp, fpp) = if use_u {
            (
                tricomi_u(a, b, z)?,
                tricomi_u_prime(a, b, z)?,
                tricomi_u_second(a, b, z)?,
            )
        } else {
            (
                kummer_m(a, b, z)?,
                kummer_m_prime(a, b, z)?,
                kummer_m_second(a, b, z)?,
            )
        };
        // z' = beta rho, z'' = beta.
        let zp = beta * rho;
        let g = f;
        let gp = fp * zp;
        let gpp = fpp * zp * zp + fp * beta;
        let r = rho.powf(s);
        let r1 = s * rho.powf(s - 1.0);
        let r2 = s * (s - 1.0) * rho.powf(s - 2.0);
        Ok([r * g, r1 * g + r * gp, r2 * g + 2.0 * r1 * gp + r * gpp])
    }

    fn closed_form_erf(&self, rho: f64) -> f64 {
        let sb = self.beta.sqrt();
        1.0 - (-self.beta * rho * rho / 4.0).exp() * erf(sb * rho / 2.0) / (sb * rho)
    }

    fn table_value(&self, t: &ShootingTable, rho: f64) -> f64 {
        let n = t.rho.len();
        if rho >= t.rho[n - 1] {
            let c = 0.5 * self.beta1 / self.beta;
            let r = t.rho[n - 1];
            return t.q[n - 1] + c * (1.0 / (rho * rho) - 1.0 / (r * r));
        }
        if rho <= t.rho[0] {
            let k = t.rho[0] * t.dq[0] / t.q[0];
            return t.q[0] * (rho / t.rho[0]).powf(k);
        }
        let i = t.rho.partition_point(|&r| r <= rho) - 1;
        let (x0, x1) = (t.rho[i], t.rho[i + 1]);
        let h = x1 - x0;
        let u = (rho - x0) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u),
            u * (1.0 - u) * (1.0 - u),
            u * u * (3.0 - 2.0 * u),
            u * u * (u - 1.0),
        );
        h00 * t.q[i] + h10 * h * t.dq[i] + h01 * t.q[i + 1] + h11 * h * t.dq[i + 1]
    }

    pub fn eval(&self, rho: f64) -> f64 {
        match self.branch {
            RadialBranch::ClosedFormErf => self.closed_form_erf(rho),
            RadialBranch::KummerM => self
                .hypergeometric_derivatives(rho, false)
                .map_or(f64::NAN, |d| d[0]),
            RadialBranch::TricomiU => self
                .hypergeometric_derivatives(rho, true)
                .map_or(f64::NAN, |d| d[0]),
            RadialBranch::NumericBVP => self.table_value(self.table.as_ref().unwrap(), rho),
        }
    }
}

impl Profile for RadialSolution {
    fn value(&self, rho: f64) -> f64 {
        self.eval(rho)
    }

    fn derivatives(&self, rho: f64) -> Option<[f64; 3]> {
        match self.branch {
            RadialBranch::KummerM => self.hypergeometric_derivatives(rho, false).ok(),
            RadialBranch::TricomiU => self.hypergeometric_derivatives(rho, true).ok(),
            _ => None,
        }
    }
}

/// Inward RK4 from `rho_max = 8/sqrt(beta)` with `Q2 = 1` and the bounded
/// asymptotic slope `Q2' = -beta1 / (beta rho^3)`. The growing solution
/// decays in the inward direction, so the shooting is stable.
fn shoot(beta: f64, beta1: f64) -> Result<ShootingTable> {
    let sb = beta.sqrt();
    let rho_max = 8.0 / sb;
    let rho_lo = 1e-4 / sb;
    let f = |rho: f64, y: [f64; 2]| [y[1], beta * rho * y[1] + beta1 * y[0] / (rho * rho)];
    let mut rho = rho_max;
    let mut y = [1.0, -beta1 / (beta * rho_max.powi(3))];
    let mut rs = vec![rho];
    let mut qs = vec![y[0]];
    let mut dqs = vec![y[1]];
    while rho > rho_lo {
        let h = -(1e-3 / sb).min(0.01 * rho).min(rho - rho_lo).max(1e-15);
        let k1 = f(rho, y);
        let k2 = f(rho + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f(rho + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f(rho + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        rho += h;
        if !y[0].is_finite() || !y[1].is_finite() {
            return Err(Error::Overflow(format!("radial shooting diverged at rho = {rho}")));
        }
        rs.push(rho);
        qs.push(y[0]);
        dqs.push(y[1]);
    }
    rs.reverse();
    qs.reverse();
    dqs.reverse();
    Ok(ShootingTable {
        rho: rs,
        q: qs,
        dq: dqs,
    })
}

/// `Q2'' - beta rho Q2' - (beta1 / rho^2) Q2` at `rho`, with analytic
/// derivatives when available, else fourth-order differences with step
/// `1e-4 max(1, rho)`.
pub fn radial_residual<P: Profile + ?Sized>(beta: f64, beta1: f64, q: &P, rho: f64) -> f64 {
    let [f, d1, d2] = q
        .derivatives(rho)
        .unwrap_or_else(|| fd_derivatives(q, rho, 1e-4 * rho.max(1.0)));
    d2 - beta * rho * d1 - beta1 / (rho * rho) * f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::FnProfile;

    #[test]
    fn residual_examples() {
        let sq = FnProfile(|r: f64| r * r);
        for rho in [0.3, 1.0, 4.0] {
            assert!(radial_residual(0.0, 2.0, &sq, rho).abs() < 1e-8);
        }
        let c = FnProfile(|_| 2.5);
        assert_eq!(radial_residual(1.0, 0.0, &c, 1.7), 0.0);
        let r = radial_residual(1.0, 2.0, &c, 2.0);
        assert!((r + 2.0 * 2.5 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn kummer_branch_parameters() {
        let q = radial_solution(1.0, 2.0, RadialBranch::KummerM).unwrap();
        assert_eq!(q.s, 2.0);
        assert_eq!((0.5 * q.s, q.s + 0.5), (1.0, 2.5));
    }

    #[test]
    fn kummer_branch_solves_the_equation() {
        let q = radial_solution(1.0, 2.0, RadialBranch::KummerM).unwrap();
        for rho in [0.5, 1.0, 2.0] {
            let r = radial_residual(1.0, 2.0, &q, rho);
            assert!(r.abs() < 1e-9, "rho={rho}: {r:e}");
        }
        let q = radial_solution(2.5, 6.3, RadialBranch::KummerM).unwrap();
        for rho in [0.2, 1.1, 3.0] {
            let [f, ..] = q.derivatives(rho).unwrap();
            assert!(radial_residual(2.5, 6.3, &q, rho).abs() < 1e-9 * f.abs().max(1.0));
        }
    }

    #[test]
    fn tricomi_branch_solves_the_equation_and_is_bounded() {
        let q = radial_solution(1.0, 2.0, RadialBranch::TricomiU).unwrap();
        for rho in [0.1, 0.5, 1.0, 2.0, 4.0] {
            let [f, ..] = q.derivatives(rho).unwrap();
            assert!(radial_residual(1.0, 2.0, &q, rho).abs() < 1e-9 * f.abs().max(1.0));
        }
        // rho^s U ~ (beta/2)^{-s/2} at large rho; ~ rho^{-1} near zero.
        assert!((q.eval(12.0) - 2.0).abs() < 0.02);
        let ratio = q.eval(1e-3) * 1e-3 / (q.eval(2e-3) * 2e-3);
        assert!((ratio - 1.0).abs() < 1e-2);
    }

    #[test]
    fn closed_form_erf_branch_fails_its_equation() {
        let q = radial_solution(1.0, 2.0, RadialBranch::ClosedFormErf).unwrap();
        // 30-digit numerical differentiation gives -1.372180591561.
        let r = radial_residual(1.0, 2.0, &q, 1.0);
        assert!((r + 1.372_180_591_561).abs() < 1e-6, "{r}");
    }

    #[test]
    fn shooting_matches_tricomi() {
        for (beta, beta1) in [(1.0, 2.0), (2.0, 2.0625), (0.5, 6.0)] {
            let bvp = radial_solution(beta, beta1, RadialBranch::NumericBVP).unwrap();
            let u = radial_solution(beta, beta1, RadialBranch::TricomiU).unwrap();
            let sb = f64::sqrt(beta);
            let r0 = 3.0 / sb;
            let scale = bvp.eval(r0) / u.eval(r0);
            for i in 0..=49 {
                let rho = (0.1 + 4.9 * i as f64 / 49.0) / sb;
                let (a, b) = (bvp.eval(rho), scale * u.eval(rho));
                assert!((a - b).abs() < 1e-6 * b.abs(), "beta={beta} rho={rho}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(radial_solution(0.0, 2.0, RadialBranch::KummerM).is_err());
        assert!(radial_solution(1.0, -1.0, RadialBranch::KummerM).is_err());
    }
}
