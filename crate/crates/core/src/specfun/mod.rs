//! Special functions and the separated angular and radial problems of the
//! stationary adjoint equation.

pub mod angular;
pub mod erf;
pub mod hypergeometric;
pub mod radial;

pub use angular::{angular_ode_residual, solve_angular_eigen, AngularEigenpair, Sech2};
pub use erf::{erf, erfc};
pub use hypergeometric::{kummer_m, tricomi_u};
pub use radial::{radial_residual, radial_solution, RadialBranch, RadialSolution};

/// A smooth scalar function of one variable.
pub trait Profile {
    fn value(&self, x: f64) -> f64;

    /// `[f, f', f'']` when the function knows its own derivatives.
    fn derivatives(&self, _x: f64) -> Option<[f64; 3]> {
        None
    }
}

/// Wraps a closure as a [`Profile`] with no analytic derivatives.
pub struct FnProfile<F>(pub F);

impl<F: Fn(f64) -> f64> Profile for FnProfile<F> {
    fn value(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

/// `[f, f', f'']` by fourth-order central differences with step `h`.
pub fn fd_derivatives<P: Profile + ?Sized>(f: &P, x: f64, h: f64) -> [f64; 3] {
    let (p2, p1, c, m1, m2) = (
        f.value(x + 2.0 * h),
        f.value(x + h),
        f.value(x),
        f.value(x - h),
        f.value(x - 2.0 * h),
    );
    [
        c,
        (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h),
        (-p2 + 16.0 * p1 - 30.0 * c + 16.0 * m1 - m2) / (12.0 * h * h),
    ]
}
