//! Hyperbolic polar chart on the affine algebra's velocity plane.
//!
//! `v0 = -rho tanh(theta)`, `v1 = rho eps sech(theta)`. The chart covers the
//! two half-planes `v1 > 0` (`eps = +1`) and `v1 < 0` (`eps = -1`); in it the
//! invariant measure `mu dv0 dv1` with `mu = 1/|v1|` becomes `drho dtheta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sech, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn of<T: Real>(x: T) -> Self {
        if x.is_sign_negative() {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    #[inline]
    pub fn value<T: Real>(self) -> T {
        match self {
            Sign::Plus => T::one(),
            Sign::Minus => -T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarVelocity<T> {
    pub rho: T,
    pub theta: T,
    pub epsilon: Sign,
}

impl<T: Real> PolarVelocity<T> {
    pub fn new(rho: T, theta: T, epsilon: Sign) -> Result<Self> {
        if !(rho > T::zero()) || !rho.is_finite() {
            return Err(Error::InvalidParams(format!("rho must be positive, got {rho}")));
        }
        if !theta.is_finite() {
            return Err(Error::InvalidParams("theta must be finite".into()));
        }
        Ok(Self { rho, theta, epsilon })
    }
}

pub fn to_cartesian<T: Real>(p: &PolarVelocity<T>) -> [T; 2] {
    [-p.rho * p.theta.tanh(), p.rho * p.epsilon.value::<T>() * sech(p.theta)]
}

/// Inverse chart. `theta = asinh(-v0/|v1|)` stays accurate where the
/// equivalent `artanh(-v0/rho)` loses all digits (`|theta|` beyond ~18).
pub fn to_polar<T: Real>(v: [T; 2]) -> Result<PolarVelocity<T>> {
    let [v0, v1] = v;
    if !v0.is_finite() || !v1.is_finite() {
        return Err(Error::InvalidParams("non-finite velocity".into()));
    }
    if v1 == T::zero() {
        return Err(Error::Singularity("v1 = 0 lies outside the polar chart".into()));
    }
    Ok(PolarVelocity {
        rho: v0.hypot(v1),
        theta: (-v0 / v1.abs()).asinh(),
        epsilon: Sign::of(v1),
    })
}

/// `mu = 1/|v1|`.
pub fn measure_mu<T: Real>(v: [T; 2]) -> Result<T> {
    if v[1] == T::zero() {
        return Err(Error::Singularity("mu is singular on v1 = 0".into()));
    }
    Ok(T::one() / v[1].abs())
}

/// The invariant measure density, evaluable in either chart.
#[derive(Debug, Clone, Copy, Default)]
pub struct InvariantMeasure;

impl InvariantMeasure {
    pub fn at_cartesian<T: Real>(&self, v: [T; 2]) -> Result<T> {
        measure_mu(v)
    }

    /// `cosh(theta) / rho`.
    pub fn at_polar<T: Real>(&self, p: &PolarVelocity<T>) -> T {
        p.theta.cosh() / p.rho
    }
}

/// `d(v0, v1) / d(rho, theta)`, rows indexed by `v`.
pub fn jacobian_polar_to_cartesian<T: Real>(p: &PolarVelocity<T>) -> [[T; 2]; 2] {
    let t = p.theta.tanh();
    let s = sech(p.theta);
    let e = p.epsilon.value::<T>();
    [
        [-t, -p.rho * s * s],
        [e * s, -p.rho * e * s * t],
    ]
}

pub fn det2<T: Real>(m: &[[T; 2]; 2]) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Induced flat metric in the chart, `diag(1, rho^2 sech^2 theta)`, and its inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareMetric<T> {
    pub g: [[T; 2]; 2],
    pub g_inv: [[T; 2]; 2],
}

pub fn poincare_metric<T: Real>(p: &PolarVelocity<T>) -> PoincareMetric<T> {
    let z = T::zero();
    let rs = p.rho * sech(p.theta);
    let rc = p.theta.cosh() / p.rho;
    PoincareMetric {
        g: [[T::one(), z], [z, rs * rs]],
        g_inv: [[T::one(), z], [z, rc * rc]],
    }
}

/// Fourth-order central-difference Jacobian of `to_cartesian`, with steps
/// `h * max(1, rho)` in `rho` and `h` in `theta`.
pub fn fd_jacobian<T: Real>(p: &PolarVelocity<T>, h: T) -> [[T; 2]; 2] {
    let eval = |dr: T, dt: T| {
        to_cartesian(&PolarVelocity {
            rho: p.rho + dr,
            theta: p.theta + dt,
            epsilon: p.epsilon,
        })
    };
    let stencil = |f: &dyn Fn(T) -> [T; 2], h: T| -> [T; 2] {
        let (p1, m1, p2, m2) = (f(h), f(-h), f(h + h), f(-h - h));
        let eight = T::lit(8.0);
        let twelve_h = T::lit(12.0) * h;
        [
            (eight * (p1[0] - m1[0]) - (p2[0] - m2[0])) / twelve_h,
            (eight * (p1[1] - m1[1]) - (p2[1] - m2[1])) / twelve_h,
        ]
    };
    let hr = h * p.rho.max(T::one()).min(p.rho * T::lit(0.25) / h);
    let d_rho = stencil(&|d| eval(d, T::zero()), hr);
    let d_theta = stencil(&|d| eval(T::zero(), d), h);
    [[d_rho[0], d_theta[0]], [d_rho[1], d_theta[1]]]
}

/// Largest entry of `|J^T J - g|`, each scaled by `max(1, |g_ij|)`, using the
/// finite-difference Jacobian.
pub fn metric_pullback_residual<T: Real>(p: &PolarVelocity<T>, h: T) -> T {
    let j = fd_jacobian(p, h);
    let g = poincare_metric(p).g;
    let mut worst = T::zero();
    for a in 0..2 {
        for b in 0..2 {
            let pull = j[0][a] * j[0][b] + j[1][a] * j[1][b];
            worst = worst.max((pull - g[a][b]).abs() / g[a][b].abs().max(T::one()));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn polar(rho: f64, theta: f64, eps: Sign) -> PolarVelocity<f64> {
        PolarVelocity::new(rho, theta, eps).unwrap()
    }

    #[test]
    fn chart_examples() {
        assert_eq!(to_cartesian(&polar(1.0, 0.0, Sign::Plus)), [-0.0, 1.0]);
        assert_eq!(to_cartesian(&polar(2.0, 0.0, Sign::Minus)), [-0.0, -2.0]);
        let far = to_cartesian(&polar(1.0, 20.0, Sign::Plus));
        assert!((far[0] + 1.0).abs() < 1e-16 && far[1] > 0.0 && far[1] < 1e-8);

        let p = to_polar([0.0, 3.0]).unwrap();
        assert_eq!((p.rho, p.theta, p.epsilon), (3.0, 0.0, Sign::Plus));
        let p = to_polar([-3.0, 4.0]).unwrap();
        assert_eq!(p.rho, 5.0);
        assert!((p.theta - 0.6f64.atanh()).abs() < 1e-15);
        assert!((p.theta - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(matches!(to_polar([1.0, 0.0]), Err(Error::Singularity(_))));
        assert!(PolarVelocity::new(0.0, 0.0, Sign::Plus).is_err());
    }

    #[test]
    fn measure_examples() {
        assert_eq!(measure_mu([0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(measure_mu([0.0, 2.0]).unwrap(), 0.5);
        assert_eq!(measure_mu([-3.0, 4.0]).unwrap(), 0.25);
        assert!(measure_mu([2.0, 0.0]).is_err());
        let p = polar(2.0, 0.3, Sign::Minus);
        let m = InvariantMeasure;
        let a = m.at_polar(&p);
        let b = m.at_cartesian(to_cartesian(&p)).unwrap();
        assert!((a - b).abs() < 1e-14 * a);
    }

    #[test]
    fn jacobian_and_metric_examples() {
        let j = jacobian_polar_to_cartesian(&polar(1.0, 0.0, Sign::Plus));
        assert!((det2(&j).abs() - 1.0).abs() < 1e-15);
        let j = jacobian_polar_to_cartesian(&polar(2.0, 0.0, Sign::Plus));
        assert!((det2(&j).abs() - 2.0).abs() < 1e-15);
        assert_eq!(poincare_metric(&polar(1.0, 0.0, Sign::Plus)).g, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(poincare_metric(&polar(2.0, 0.0, Sign::Plus)).g, [[1.0, 0.0], [0.0, 4.0]]);
    }

    #[test]
    fn single_precision_chart() {
        let p = PolarVelocity::<f32>::new(1.5, 0.4, Sign::Minus).unwrap();
        let q = to_polar(to_cartesian(&p)).unwrap();
        assert!((q.rho - 1.5).abs() < 1e-6 && (q.theta - 0.4).abs() < 1e-6);
        assert_eq!(q.epsilon, Sign::Minus);
    }

    fn sign_strategy() -> impl Strategy<Value = Sign> {
        prop_oneof![Just(Sign::Plus), Just(Sign::Minus)]
    }

    proptest! {
        #[test]
        fn round_trip(log_rho in -3.0f64..3.0, theta in -30.0f64..30.0, eps in sign_strategy()) {
            let p = polar(10f64.powf(log_rho), theta, eps);
            let v = to_cartesian(&p);
            let q = to_polar(v).unwrap();
            prop_assert!((q.rho - p.rho).abs() <= 1e-12 * p.rho);
            prop_assert!((q.theta - p.theta).abs() <= 1e-12);
            prop_assert_eq!(q.epsilon, eps);
            prop_assert!((v[0] * v[0] + v[1] * v[1] - p.rho * p.rho).abs() <= 1e-15 * p.rho * p.rho);
        }

        #[test]
        fn measure_cancels_jacobian(rho in 1e-3f64..1e3, theta in -30.0f64..30.0, eps in sign_strategy()) {
            let p = polar(rho, theta, eps);
            let det = det2(&jacobian_polar_to_cartesian(&p)).abs();
            let mu = measure_mu(to_cartesian(&p)).unwrap();
            prop_assert!((det * mu - 1.0).abs() < 1e-12);
        }

        #[test]
        fn fd_jacobian_agrees(rho in 0.05f64..20.0, theta in -6.0f64..6.0, eps in sign_strategy()) {
            let p = polar(rho, theta, eps);
            let exact = jacobian_polar_to_cartesian(&p);
            let fd = fd_jacobian(&p, 1e-3);
            for a in 0..2 {
                for b in 0..2 {
                    prop_assert!((exact[a][b] - fd[a][b]).abs() < 1e-6 * exact[a][b].abs().max(1.0));
                }
            }
            prop_assert!(metric_pullback_residual(&p, 1e-3) < 1e-10);
        }

        #[test]
        fn metric_inverse(rho in 1e-2f64..1e2, theta in -20.0f64..20.0) {
            let m = poincare_metric(&polar(rho, theta, Sign::Plus));
            prop_assert!((m.g[1][1] * m.g_inv[1][1] - 1.0).abs() < 1e-14);
            prop_assert_eq!(m.g[0][0] * m.g_inv[0][0], 1.0);
        }
    }
}
