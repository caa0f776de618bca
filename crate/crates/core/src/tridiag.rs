//! Tridiagonal systems: factor-once Thomas solves and symmetric
//! eigenvalues by Sturm bisection.

/// `a[i] x[i-1] + b[i] x[i] + c[i] x[i+1]`; `a[0]` and `c[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiag {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Tridiag {
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Self {
        assert!(a.len() == b.len() && b.len() == c.len());
        Self { a, b, c }
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.b[i] * x[i];
            if i > 0 {
                s += self.a[i] * x[i - 1];
            }
            if i + 1 < n {
                s += self.c[i] * x[i + 1];
            }
            out[i] = s;
        }
    }

    /// Transposed operator.
    pub fn transpose(&self) -> Self {
        let n = self.len();
        let mut a = vec![0.0; n];
        let mut c = vec![0.0; n];
        for i in 0..n {
            if i + 1 < n {
                a[i + 1] = self.c[i];
                c[i] = self.a[i + 1];
            }
        }
        Self::new(a, self.b.clone(), c)
    }

    /// LU factorization without pivoting; fine for diagonally dominant systems.
    pub fn factor(&self) -> ThomasFactor {
        let n = self.len();
        let mut cp = vec![0.0; n];
        let mut inv = vec![0.0; n];
        for i in 0..n {
            let denom = if i == 0 {
                self.b[0]
            } else {
                self.b[i] - self.a[i] * cp[i - 1]
            };
            inv[i] = 1.0 / denom;
            cp[i] = if i + 1 < n { self.c[i] * inv[i] } else { 0.0 };
        }
        ThomasFactor {
            a: self.a.clone(),
            cp,
            inv,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThomasFactor {
    a: Vec<f64>,
    cp: Vec<f64>,
    inv: Vec<f64>,
}

impl ThomasFactor {
    /// Solves in place; `x` holds the right-hand side on entry.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.inv.len();
        if n == 0 {
            return;
        }
        x[0] *= self.inv[0];
        for i in 1..n {
            x[i] = (x[i] - self.a[i] * x[i - 1]) * self.inv[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.cp[i] * x[i + 1];
        }
    }

    /// Solves the same system for every column of a row-major
    /// `n x width` block (`data[i * width + k]` is entry `i` of column `k`).
    pub fn solve_rows(&self, data: &mut [f64], width: usize) {
        let n = self.inv.len();
        if n == 0 {
            return;
        }
        assert_eq!(data.len(), n * width);
        data[..width].iter_mut().for_each(|x| *x *= self.inv[0]);
        for i in 1..n {
            let (done, rest) = data.split_at_mut(i * width);
            let prev = &done[(i - 1) * width..];
            let (a, inv) = (self.a[i], self.inv[i]);
            for (x, p) in rest[..width].iter_mut().zip(prev) {
                *x = (*x - a * p) * inv;
            }
        }
        for i in (0..n - 1).rev() {
            let (head, tail) = data.split_at_mut((i + 1) * width);
            let cur = &mut head[i * width..];
            let cp = self.cp[i];
            for (x, nx) in cur.iter_mut().zip(&tail[..width]) {
                *x -= cp * nx;
            }
        }
    }

    /// Strided variant for solving along a column of a row-major grid.
    pub fn solve_strided(&self, data: &mut [f64], offset: usize, stride: usize) {
        let n = self.inv.len();
        if n == 0 {
            return;
        }
        let idx = |i: usize| offset + i * stride;
        data[idx(0)] *= self.inv[0];
        for i in 1..n {
            data[idx(i)] = (data[idx(i)] - self.a[i] * data[idx(i - 1)]) * self.inv[i];
        }
        for i in (0..n - 1).rev() {
            data[idx(i)] -= self.cp[i] * data[idx(i + 1)];
        }
    }
}

/// Symmetric tridiagonal matrix with diagonal `d` and off-diagonal `e`
/// (`e[i]` couples `i` and `i + 1`).
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiag {
    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.d.len() {
            let off = if i == 0 { 0.0 } else { self.e[i - 1] * self.e[i - 1] };
            q = self.d[i] - x - if i == 0 { 0.0 } else { off / q };
            if q == 0.0 {
                q = -f64::EPSILON * (self.d[i].abs() + 1.0);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.d.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for an (accurate) eigenvalue `lambda` by inverse iteration,
    /// normalized to unit Euclidean length.
    pub fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.d.len();
        let scale = self.d.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let shift = lambda + 1e-10 * scale;
        let mut a = vec![0.0; n];
        let mut c = vec![0.0; n];
        for i in 0..n.saturating_sub(1) {
            a[i + 1] = self.e[i];
            c[i] = self.e[i];
        }
        let b = self.d.iter().map(|d| d - shift).collect();
        let fac = Tridiag::new(a, b, c).factor();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i * 7919) % 13) as f64).collect();
        for _ in 0..4 {
            fac.solve_in_place(&mut x);
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
        }
        x
    }
}
