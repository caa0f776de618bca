//! Gauss-Legendre quadrature: fixed rules, composite panels and adaptive
//! bisection.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x);
        }
        s * half
    }

    /// Composite rule over the panels delimited by `edges`.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(&self, mut f: F, edges: &[f64]) -> f64 {
        edges
            .windows(2)
            .map(|w| self.integrate(&mut f, w[0], w[1]))
            .sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive bisection comparing a 10-point rule on an interval with the sum
/// over its halves. Stops when the difference is below `tol` (absolute,
/// distributed over subintervals) or the depth limit is reached.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    let rule = GaussLegendre::new(10);
    let whole = rule.integrate(&mut f, a, b);
    adaptive_rec(&rule, &mut f, a, b, whole, tol, 0)
}

fn adaptive_rec<F: FnMut(f64) -> f64>(
    rule: &GaussLegendre,
    f: &mut F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = rule.integrate(&mut *f, a, m);
    let right = rule.integrate(&mut *f, m, b);
    if (left + right - whole).abs() <= tol || depth >= 40 {
        return left + right;
    }
    adaptive_rec(rule, f, a, m, left, 0.5 * tol, depth + 1)
        + adaptive_rec(rule, f, m, b, right, 0.5 * tol, depth + 1)
}

/// `n + 1` geometrically spaced edges from `a > 0` to `b`.
pub fn geometric_edges(a: f64, b: f64, n: usize) -> Vec<f64> {
    let r = (b / a).ln() / n as f64;
    (0..=n).map(|i| if i == n { b } else { a * (r * i as f64).exp() }).collect()
}

/// `n + 1` uniformly spaced edges.
pub fn uniform_edges(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        for n in 1..12 {
            let rule = GaussLegendre::new(n);
            let deg = 2 * n - 1;
            let got = rule.integrate(|x| x.powi(deg as i32) + x.powi(deg as i32 - 1), 0.0, 2.0);
            let want = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0) + 2f64.powi(deg as i32) / deg as f64;
            assert!((got - want).abs() < 1e-12 * want, "n={n}");
            assert!((rule.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn adaptive_handles_peaks() {
        let got = adaptive(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12);
        let want = 2.0 * (1.0 / 1e-2f64).atan() / 1e-2;
        assert!((got - want).abs() < 1e-9 * want);
        let g = adaptive(|x| (-x * x / 2.0).exp(), 0.0, 40.0, 1e-14);
        assert!((g - (PI / 2.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn edges() {
        let e = geometric_edges(1e-3, 1.0, 3);
        assert!((e[1] - 1e-2).abs() < 1e-15 && e[3] == 1.0);
        assert_eq!(uniform_edges(0.0, 1.0, 4), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
