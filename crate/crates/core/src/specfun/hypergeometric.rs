//! Confluent hypergeometric functions `M(a, b, z)` (Kummer) and
//! `U(a, b, z)` (Tricomi).

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad::{geometric_edges, GaussLegendre};
use crate::scalar::Real;

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// `M(a, b, z) = sum (a)_n / (b)_n z^n / n!`. Negative `z` goes through
/// Kummer's transformation `M(a, b, z) = e^z M(b - a, b, -z)` so the series
/// has no cancellation when `a, b > 0`.
pub fn kummer_m<T: Real>(a: T, b: T, z: T) -> Result<T> {
    let bf = b.to_f64().unwrap_or(f64::NAN);
    if is_nonpositive_integer(bf) {
        return Err(Error::ParameterPole(format!("M(a, b, z) has a pole at b = {b}")));
    }
    if !a.is_finite() || !b.is_finite() || !z.is_finite() {
        return Err(Error::InvalidParams("non-finite argument to M".into()));
    }
    if z < T::zero() && a > T::zero() && b > a {
        return Ok(z.exp() * kummer_series(b - a, b, -z)?);
    }
    kummer_series(a, b, z)
}

fn kummer_series<T: Real>(a: T, b: T, z: T) -> Result<T> {
    let mut term = T::one();
    let mut sum = T::one();
    let mut n = T::zero();
    for _ in 0..100_000 {
        let ratio = (a + n) / (b + n) * z / (n + T::one());
        term = term * ratio;
        sum = sum + term;
        n = n + T::one();
        if term == T::zero() {
            return Ok(sum);
        }
        // Stop once terms are negligible and shrinking.
        if term.abs() <= sum.abs() * T::epsilon() * T::lit(0.5) && ratio.abs() < T::one() {
            return Ok(sum);
        }
        if !sum.is_finite() {
            return Err(Error::Overflow(format!("M({a}, {b}, {z}) overflows")));
        }
    }
    Err(Error::InvalidParams(format!("M({a}, {b}, {z}) series did not converge")))
}

/// `dM/dz = (a/b) M(a + 1, b + 1, z)`.
pub fn kummer_m_prime<T: Real>(a: T, b: T, z: T) -> Result<T> {
    Ok(a / b * kummer_m(a + T::one(), b + T::one(), z)?)
}

/// `d^2M/dz^2 = a(a+1) / (b(b+1)) M(a + 2, b + 2, z)`.
pub fn kummer_m_second<T: Real>(a: T, b: T, z: T) -> Result<T> {
    let one = T::one();
    let two = one + one;
    Ok(a * (a + one) / (b * (b + one)) * kummer_m(a + two, b + two, z)?)
}

/// `U(a, b, z)` for `z > 0`.
///
/// * `z >= 40`: asymptotic series, truncated at its smallest term.
/// * `a > 0`: `U = 1/G(a) int_0^inf e^{-zt} t^{a-1} (1+t)^{b-a-1} dt`.
/// * otherwise, non-integer `b`:
///   `U = G(1-b)/G(a-b+1) M(a,b,z) + G(b-1)/G(a) z^{1-b} M(a-b+1,2-b,z)`,
///   which cancels badly once `z` exceeds a few units.
pub fn tricomi_u(a: f64, b: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::InvalidParams(format!("U(a, b, z) needs z > 0, got {z}")));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParams("non-finite argument to U".into()));
    }
    if is_nonpositive_integer(a) {
        // U reduces to a polynomial; the integral form does not apply.
        return tricomi_polynomial(a, b, z);
    }
    let v = if z >= 40.0 {
        match tricomi_asymptotic(a, b, z) {
            Some(v) => v,
            None => tricomi_integral(a, b, z)?,
        }
    } else if a > 0.0 {
        tricomi_integral(a, b, z)?
    } else if b != b.round() {
        tricomi_from_m(a, b, z)?
    } else {
        return Err(Error::InvalidParams(format!(
            "U({a}, {b}, {z}) not supported for a <= 0 and integer b"
        )));
    };
    if !v.is_finite() {
        return Err(Error::Overflow(format!("U({a}, {b}, {z}) overflows")));
    }
    Ok(v)
}

/// `dU/dz = -a U(a + 1, b + 1, z)`.
pub fn tricomi_u_prime(a: f64, b: f64, z: f64) -> Result<f64> {
    Ok(-a * tricomi_u(a + 1.0, b + 1.0, z)?)
}

/// `d^2U/dz^2 = a(a+1) U(a + 2, b + 2, z)`.
pub fn tricomi_u_second(a: f64, b: f64, z: f64) -> Result<f64> {
    Ok(a * (a + 1.0) * tricomi_u(a + 2.0, b + 2.0, z)?)
}

fn tricomi_from_m(a: f64, b: f64, z: f64) -> Result<f64> {
    let c1 = if is_nonpositive_integer(a - b + 1.0) {
        0.0
    } else {
        gamma(1.0 - b) / gamma(a - b + 1.0)
    };
    let c2 = gamma(b - 1.0) / gamma(a);
    let m1 = if c1 == 0.0 { 0.0 } else { kummer_m(a, b, z)? };
    Ok(c1 * m1 + c2 * z.powf(1.0 - b) * kummer_m(a - b + 1.0, 2.0 - b, z)?)
}

fn tricomi_asymptotic(a: f64, b: f64, z: f64) -> Option<f64> {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut last = f64::INFINITY;
    for n in 0..200 {
        let nf = n as f64;
        term *= -(a + nf) * (a - b + 1.0 + nf) / ((nf + 1.0) * z);
        if term.abs() > last {
            // Divergent tail: accept only if already converged to full precision.
            return if last <= 1e-16 * sum.abs() { Some(sum * z.powf(-a)) } else { None };
        }
        sum += term;
        last = term.abs();
        if last <= 1e-17 * sum.abs() {
            return Some(sum * z.powf(-a));
        }
    }
    None
}

/// Integral representation `U = z^{-a}/G(a) int_0^inf e^{-x} x^{a-1} (1 + x/z)^{b-a-1} dx`,
/// rewritten with `x = w^{1/a}` as
/// `U = z^{-a}/G(a+1) int_0^inf exp(-w^{1/a}) (1 + w^{1/a}/z)^{b-a-1} dw`
/// to remove the endpoint singularity, on geometrically graded panels.
fn tricomi_integral(a: f64, b: f64, z: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidParams("integral form of U needs a > 0".into()));
    }
    let c = b - a - 1.0;
    let x_max = 50.0 + 3.0 * (a + c.abs());
    let w_max = x_max.powf(a);
    let inv_a = 1.0 / a;
    let f = |w: f64| {
        let x = w.powf(inv_a);
        (-x + c * (x / z).ln_1p()).exp()
    };
    let rule = GaussLegendre::new(20);
    let mut edges = geometric_edges(w_max * 1e-16, w_max, 120);
    edges.insert(0, 0.0);
    let integral = rule.integrate_panels(f, &edges);
    Ok(integral * z.powf(-a) / gamma(a + 1.0))
}

fn tricomi_polynomial(a: f64, b: f64, z: f64) -> Result<f64> {
    // U(-n, b, z) = (-1)^n (b)_n M(-n, b, z).
    let n = (-a).round() as i32;
    let mut poch = 1.0;
    for k in 0..n {
        poch *= b + k as f64;
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * poch * kummer_m(a, b, z)?)
}
