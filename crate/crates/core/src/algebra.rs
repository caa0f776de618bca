//! Finite-dimensional Lie algebras and the energy, dissipation and
//! fluctuation tensors that define a Langevin model on them.
//!
//! Velocities `v_a` carry the Lie-Poisson bracket `{v_a, v_b} = f_ab^c v_c`.
//! The Hamiltonian vector field is taken as `V_a = {H, v_a}`, which for the
//! affine algebra with `G = 1` gives the hyperboloid geodesic equations
//! `dv0/dt = -v1^2`, `dv1/dt = v0 v1`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Structure constants `f[a][b][c] = f_ab^c` of a Lie algebra, stored dense.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebra<T> {
    name: String,
    dim: usize,
    f: Vec<T>,
}

impl<T: Real> LieAlgebra<T> {
    /// Builds an algebra from dense structure constants laid out as
    /// `f[(a * dim + b) * dim + c]`, checking antisymmetry and the Jacobi
    /// identity.
    pub fn new(name: impl Into<String>, dim: usize, f: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidAlgebra("dimension must be positive".into()));
        }
        if f.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim * dim,
                got: f.len(),
            });
        }
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidAlgebra("non-finite structure constant".into()));
        }
        let alg = Self {
            name: name.into(),
            dim,
            f,
        };
        let tol = T::exact_tol();
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    if (alg.f(a, b, c) + alg.f(b, a, c)).abs() > tol {
                        return Err(Error::InvalidAlgebra(format!(
                            "antisymmetry fails at ({a},{b},{c})"
                        )));
                    }
                }
            }
        }
        let jac = alg.jacobi_residual();
        if jac > tol {
            return Err(Error::InvalidAlgebra(format!(
                "Jacobi identity violated (residual {jac:e})"
            )));
        }
        Ok(alg)
    }

    /// Builds an algebra from sparse entries `(a, b, c, value)`; the
    /// antisymmetric partner `f[b][a][c] = -value` is filled in automatically.
    pub fn from_entries(
        name: impl Into<String>,
        dim: usize,
        entries: &[(usize, usize, usize, T)],
    ) -> Result<Self> {
        let mut f = vec![T::zero(); dim * dim * dim];
        for &(a, b, c, val) in entries {
            if a >= dim || b >= dim || c >= dim {
                return Err(Error::InvalidAlgebra(format!(
                    "entry ({a},{b},{c}) out of range for dim {dim}"
                )));
            }
            if a == b && val != T::zero() {
                return Err(Error::InvalidAlgebra(format!(
                    "diagonal entry ({a},{a},{c}) must vanish"
                )));
            }
            f[(a * dim + b) * dim + c] = val;
            f[(b * dim + a) * dim + c] = -val;
        }
        Self::new(name, dim, f)
    }

    pub fn abelian(dim: usize) -> Self {
        Self::new(format!("abelian({dim})"), dim, vec![T::zero(); dim * dim * dim])
            .expect("abelian algebra is valid")
    }

    /// The two-dimensional affine algebra `{v0, v1} = v1`.
    pub fn affine() -> Self {
        Self::from_entries("affine", 2, &[(0, 1, 1, T::one())]).expect("affine algebra is valid")
    }

    /// `so(3)` with `f_ab^c = eps_abc`.
    pub fn so3() -> Self {
        let one = T::one();
        Self::from_entries("so3", 3, &[(0, 1, 2, one), (1, 2, 0, one), (2, 0, 1, one)])
            .expect("so(3) is valid")
    }

    /// Direct sum: brackets between the two summands vanish.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let n = self.dim + other.dim;
        let mut f = vec![T::zero(); n * n * n];
        for (alg, off) in [(self, 0), (other, self.dim)] {
            for a in 0..alg.dim {
                for b in 0..alg.dim {
                    for c in 0..alg.dim {
                        f[((a + off) * n + b + off) * n + c + off] = alg.f(a, b, c);
                    }
                }
            }
        }
        Self::new(format!("{}+{}", self.name, other.name), n, f).expect("direct sum is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn f(&self, a: usize, b: usize, c: usize) -> T {
        self.f[(a * self.dim + b) * self.dim + c]
    }

    /// Largest absolute Jacobi-identity violation over all index tuples.
    pub fn jacobi_residual(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut s = T::zero();
                        for e in 0..n {
                            s = s
                                + self.f(a, b, e) * self.f(e, c, d)
                                + self.f(b, c, e) * self.f(e, a, d)
                                + self.f(c, a, e) * self.f(e, b, d);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    /// `T_b = sum_a f_ab^a`; zero exactly for unimodular algebras.
    pub fn trace_vector(&self) -> Vec<T> {
        (0..self.dim)
            .map(|b| (0..self.dim).map(|a| self.f(a, b, a)).sum())
            .collect()
    }

    pub fn is_unimodular(&self) -> bool {
        let tol = T::exact_tol();
        self.trace_vector().iter().all(|t| t.abs() < tol)
    }

    /// `{F, G}(v) = f_ab^c v_c (dF)_a (dG)_b`.
    pub fn poisson_bracket(&self, grad_f: &[T], grad_g: &[T], v: &[T]) -> Result<T> {
        self.check_len(grad_f)?;
        self.check_len(grad_g)?;
        self.check_len(v)?;
        let n = self.dim;
        let mut s = T::zero();
        for a in 0..n {
            for b in 0..n {
                let w = grad_f[a] * grad_g[b];
                if w == T::zero() {
                    continue;
                }
                for c in 0..n {
                    s = s + self.f(a, b, c) * v[c] * w;
                }
            }
        }
        Ok(s)
    }

    /// `out_a = {H, v_a} = sum_{b,c} f_ba^c v_c (dH)_b` for a given
    /// Hamiltonian gradient `dh`. Allocation-free; slices must have length `dim`.
    #[inline]
    pub fn hamiltonian_field_into(&self, dh: &[T], v: &[T], out: &mut [T]) {
        let n = self.dim;
        for (a, o) in out.iter_mut().enumerate().take(n) {
            let mut s = T::zero();
            for (b, &w) in dh.iter().enumerate().take(n) {
                let row = (b * n + a) * n;
                for (c, &vc) in v.iter().enumerate().take(n) {
                    s = s + self.f[row + c] * vc * w;
                }
            }
            *o = s;
        }
    }

    fn check_len(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    /// `H = E = G^ab v_a v_b / 2`.
    #[default]
    Quadratic,
    /// `H(rho) = -k / rho` with `rho^2 = G^ab v_a v_b`.
    InverseRho,
}

/// Energy, dissipation and fluctuation tensors plus the scalar parameters
/// of a Langevin model. Matrices are dense row-major `dim x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    dim: usize,
    g: Vec<T>,
    gamma: Vec<T>,
    diffusion: Vec<T>,
    beta: T,
    k: T,
    hamiltonian: HamiltonianKind,
    einstein_relation: bool,
}

impl<T: Real> ModelParams<T> {
    /// Validates symmetry, positivity and (when requested) the Einstein
    /// relation `beta * D = Gamma`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        g: Vec<T>,
        gamma: Vec<T>,
        diffusion: Vec<T>,
        beta: T,
        k: T,
        hamiltonian: HamiltonianKind,
        einstein_relation: bool,
    ) -> Result<Self> {
        for (name, m) in [("G", &g), ("Gamma", &gamma), ("D", &diffusion)] {
            if m.len() != dim * dim {
                return Err(Error::InvalidParams(format!(
                    "{name} must be {dim}x{dim}, got {} entries",
                    m.len()
                )));
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} has non-finite entries")));
            }
            let sym_tol = T::lit(1e-14).max(T::epsilon() * T::lit(4.0));
            for i in 0..dim {
                for j in 0..i {
                    if (m[i * dim + j] - m[j * dim + i]).abs() > sym_tol {
                        return Err(Error::InvalidParams(format!("{name} is not symmetric")));
                    }
                }
            }
        }
        if !(beta > T::zero()) || !beta.is_finite() {
            return Err(Error::InvalidParams("beta must be positive".into()));
        }
        if !k.is_finite() {
            return Err(Error::InvalidParams("k must be finite".into()));
        }
        let eig = |m: &[T]| -> Vec<f64> {
            let mat = DMatrix::from_fn(dim, dim, |i, j| m[i * dim + j].to_f64().unwrap_or(f64::NAN));
            mat.symmetric_eigenvalues().iter().copied().collect()
        };
        if eig(&g).iter().any(|&l| l <= 0.0) {
            return Err(Error::InvalidParams("G must be positive definite".into()));
        }
        for (name, m) in [("Gamma", &gamma), ("D", &diffusion)] {
            let scale = eig(m).iter().fold(0.0f64, |acc, l| acc.max(l.abs())).max(1.0);
            if eig(m).iter().any(|&l| l < -1e-12 * scale) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive semidefinite"
                )));
            }
        }
        if einstein_relation {
            let tol = T::exact_tol();
            for (d, gm) in diffusion.iter().zip(&gamma) {
                if (beta * *d - *gm).abs() > tol * (T::one() + gm.abs()) {
                    return Err(Error::InvalidParams(
                        "Einstein relation beta * D = Gamma violated".into(),
                    ));
                }
            }
        }
        Ok(Self {
            dim,
            g,
            gamma,
            diffusion,
            beta,
            k,
            hamiltonian,
            einstein_relation,
        })
    }

    /// `G = 1`, `Gamma = gamma 1`, `D = d 1`, quadratic Hamiltonian.
    pub fn isotropic(dim: usize, gamma: T, d: T, beta: T) -> Result<Self> {
        let eye = identity(dim);
        let scaled = |s: T| eye.iter().map(|&x| x * s).collect::<Vec<_>>();
        Self::new(
            dim,
            eye.clone(),
            scaled(gamma),
            scaled(d),
            beta,
            T::zero(),
            HamiltonianKind::Quadratic,
            false,
        )
    }

    /// Returns a copy with the Hamiltonian replaced by `H = -k / rho`.
    pub fn with_inverse_rho(mut self, k: T) -> Self {
        self.hamiltonian = HamiltonianKind::InverseRho;
        self.k = k;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn g(&self) -> &[T] {
        &self.g
    }
    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }
    pub fn diffusion(&self) -> &[T] {
        &self.diffusion
    }
    pub fn beta(&self) -> T {
        self.beta
    }
    pub fn k(&self) -> T {
        self.k
    }
    pub fn hamiltonian(&self) -> HamiltonianKind {
        self.hamiltonian
    }
    pub fn einstein_relation(&self) -> bool {
        self.einstein_relation
    }

    /// `(Gv)_a = G^ab v_b`.
    #[inline]
    pub fn g_times_into(&self, v: &[T], out: &mut [T]) {
        mat_vec_into(&self.g, self.dim, v, out);
    }

    /// `rho = sqrt(G^ab v_a v_b)`.
    pub fn rho(&self, v: &[T]) -> T {
        (energy(self, v) * T::lit(2.0)).sqrt()
    }

    /// The drift `-Gamma_ad G^db v_b` of the Ohmic dissipation.
    pub fn dissipation_into(&self, v: &[T], scratch: &mut [T], out: &mut [T]) {
        self.g_times_into(v, scratch);
        mat_vec_into(&self.gamma, self.dim, scratch, out);
        for o in out.iter_mut() {
            *o = -*o;
        }
    }

    /// Scalar `gamma` when `Gamma G = gamma 1`.
    pub fn scalar_rate(&self) -> Result<T> {
        let n = self.dim;
        let mut gg = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                gg[i * n + j] = (0..n).map(|l| self.gamma[i * n + l] * self.g[l * n + j]).sum();
            }
        }
        scalar_multiple_of_identity(&gg, n)
            .ok_or_else(|| Error::InvalidParams("Gamma G is not a multiple of the identity".into()))
    }

    /// Scalar fluctuation strength when `D = d 1`.
    pub fn scalar_diffusion(&self) -> Result<T> {
        scalar_multiple_of_identity(&self.diffusion, self.dim)
            .ok_or_else(|| Error::InvalidParams("D is not a multiple of the identity".into()))
    }

    /// `dH/drho` at the given `rho`.
    pub fn h_prime(&self, rho: T) -> T {
        match self.hamiltonian {
            HamiltonianKind::Quadratic => rho,
            HamiltonianKind::InverseRho => self.k / (rho * rho),
        }
    }

    /// Gradient of the Hamiltonian, `dH/dv_a`.
    pub fn hamiltonian_gradient_into(&self, v: &[T], out: &mut [T]) -> Result<()> {
        self.g_times_into(v, out);
        if self.hamiltonian == HamiltonianKind::InverseRho {
            let rho = self.rho(v);
            if !(rho > T::zero()) {
                return Err(Error::Singularity("H = -k/rho is singular at rho = 0".into()));
            }
            let s = self.h_prime(rho) / rho;
            for o in out.iter_mut() {
                *o = *o * s;
            }
        }
        Ok(())
    }
}

fn identity<T: Real>(n: usize) -> Vec<T> {
    let mut m = vec![T::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = T::one();
    }
    m
}

fn scalar_multiple_of_identity<T: Real>(m: &[T], n: usize) -> Option<T> {
    let s = m[0];
    let tol = T::exact_tol() * (T::one() + s.abs());
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { s } else { T::zero() };
            if (m[i * n + j] - want).abs() > tol {
                return None;
            }
        }
    }
    Some(s)
}

#[inline]
pub(crate) fn mat_vec_into<T: Real>(m: &[T], n: usize, v: &[T], out: &mut [T]) {
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        out[i] = row.iter().zip(v).map(|(&a, &b)| a * b).sum();
    }
}

/// `E = G^ab v_a v_b / 2`.
pub fn energy<T: Real>(params: &ModelParams<T>, v: &[T]) -> T {
    let n = params.dim;
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            s = s + params.g[i * n + j] * v[i] * v[j];
        }
    }
    s * T::lit(0.5)
}

fn check_dims<T: Real>(alg: &LieAlgebra<T>, params: &ModelParams<T>, v: &[T]) -> Result<()> {
    if params.dim != alg.dim {
        return Err(Error::DimensionMismatch {
            expected: alg.dim,
            got: params.dim,
        });
    }
    alg.check_len(v)
}

/// The Hamiltonian drift `V_a = {H, v_a}`.
pub fn geodesic_field<T: Real>(
    alg: &LieAlgebra<T>,
    params: &ModelParams<T>,
    v: &[T],
) -> Result<Vec<T>> {
    check_dims(alg, params, v)?;
    let mut dh = vec![T::zero(); alg.dim];
    params.hamiltonian_gradient_into(v, &mut dh)?;
    let mut out = vec![T::zero(); alg.dim];
    alg.hamiltonian_field_into(&dh, v, &mut out);
    Ok(out)
}

/// `dV_a/dv_a = -T_b dH/dv_b`; the Hessian term drops by antisymmetry, so
/// this holds for either Hamiltonian kind.
pub fn divergence_of_field<T: Real>(
    alg: &LieAlgebra<T>,
    params: &ModelParams<T>,
    v: &[T],
) -> Result<T> {
    check_dims(alg, params, v)?;
    let mut dh = vec![T::zero(); alg.dim];
    params.hamiltonian_gradient_into(v, &mut dh)?;
    Ok(-alg
        .trace_vector()
        .iter()
        .zip(&dh)
        .map(|(&t, &h)| t * h)
        .sum::<T>())
}
