//! Error function.

use crate::scalar::Real;

/// `erf(x)`: positive-term series `e^{-x^2} sum 2^n x^{2n+1} / (2n+1)!!`
/// below `|x| = 2`, continued fraction for `erfc` above.
pub fn erf<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    if x.is_infinite() {
        return x.signum();
    }
    let ax = x.abs();
    let r = if ax < T::lit(2.0) {
        erf_series(ax)
    } else {
        T::one() - erfc_cf(ax)
    };
    if x.is_sign_negative() {
        -r
    } else {
        r
    }
}

/// `erfc(x) = 1 - erf(x)`, accurate in relative terms for large positive `x`.
pub fn erfc<T: Real>(x: T) -> T {
    if x >= T::lit(2.0) {
        erfc_cf(x)
    } else {
        T::one() - erf(x)
    }
}

fn erf_series<T: Real>(x: T) -> T {
    let x2 = x * x;
    let two_x2 = x2 + x2;
    let mut term = x;
    let mut sum = x;
    let mut n = T::zero();
    for _ in 0..200 {
        n = n + T::one();
        term = term * two_x2 / (n + n + T::one());
        sum = sum + term;
        if term <= sum * T::epsilon() {
            break;
        }
    }
    T::lit(2.0) * (T::one() / T::PI().sqrt()) * (-x2).exp() * sum
}

/// Lentz evaluation of `erfc(x) = e^{-x^2}/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`.
fn erfc_cf<T: Real>(x: T) -> T {
    let tiny = T::min_positive_value() * T::lit(1e10);
    let half = T::lit(0.5);
    let mut f = x;
    let mut c = f;
    let mut d = T::zero();
    for n in 1..500 {
        let a = T::from_usize(n).unwrap() * half;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let delta = c * d;
        f = f * delta;
        if (delta - T::one()).abs() < T::epsilon() {
            break;
        }
    }
    (-x * x).exp() * (T::one() / T::PI().sqrt()) / f
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(erf(0.0f64), 0.0);
        // Maclaurin series 2/sqrt(pi) sum (-1)^n x^{2n+1} / (n! (2n+1)) summed to convergence.
        let x = 0.5f64;
        let mut s = 0.0;
        let mut fact = 1.0;
        for n in 0..40 {
            if n > 0 {
                fact *= n as f64;
            }
            s += (-1f64).powi(n) * x.powi(2 * n + 1) / (fact * (2 * n + 1) as f64);
        }
        let oracle = 2.0 / std::f64::consts::PI.sqrt() * s;
        assert!((erf(0.5) - oracle).abs() < 1e-15);
        assert!((erf(0.5f64) - 0.520_499_877_8).abs() < 1e-10);
        assert_eq!(erf(f64::INFINITY), 1.0);
        assert!(erf(f64::NAN).is_nan());
        assert!((erfc(5.0f64) / 1.537_459_794_428_035_1e-12 - 1.0).abs() < 1e-13);
        assert!((erf(1.0f32) - 0.842_700_8).abs() < 1e-6);
    }

    #[test]
    fn matches_high_precision_reference() {
        // 30-digit reference values rounded to f64.
        for (x, want) in [
            (-5.9f64, -0.9999999999999999),
            (-3.7f64, -0.9999998328489421),
            (-2.2f64, -0.9981371537020182),
            (-1.3f64, -0.9340079449406524),
            (-0.45f64, -0.47548171978692366),
            (0.1f64, 0.1124629160182849),
            (0.9f64, 0.7969082124228322),
            (1.7f64, 0.9837904585907745),
            (1.99f64, 0.995111413199617),
            (2.01f64, 0.9955248493552482),
            (2.5f64, 0.999593047982555),
            (3.3f64, 0.9999969422902035),
            (4.4f64, 0.999999999510829),
            (5.5f64, 0.9999999999999927),
            (6.2f64, 1.0),
        ] {
            assert!((erf(x) - want).abs() < 1e-15, "x={x} {:e}", erf(x) - want);
        }
    }

    #[test]
    fn derivative_identity() {
        let h = 1e-4;
        for i in 0..50 {
            let x = -4.0 + 8.0 * i as f64 / 49.0;
            let fd = (-erf(x + 2.0 * h) + 8.0 * erf(x + h) - 8.0 * erf(x - h) + erf(x - 2.0 * h))
                / (12.0 * h);
            let exact = 2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp();
            assert!((fd - exact).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn odd(x in -10.0f64..10.0) {
            prop_assert!((erf(-x) + erf(x)).abs() <= 1e-15);
        }
    }
}
