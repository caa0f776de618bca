//! Candidate stationary densities on the affine velocity space, their
//! normalizability, modes, and comparison with Monte Carlo samples.
//!
//! Densities are taken with respect to `drho dtheta`, the invariant measure
//! in the hyperbolic polar chart. The Cartesian density (with respect to
//! `dv0 dv1`) is `p(v) = P(rho, theta) / |v1|`, since `rho sech(theta) = |v1|`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::ModelParams;
use crate::coords::to_polar;
use crate::error::{Error, Result};
use crate::fpk::DensityGrid;
use crate::quad::{geometric_edges, uniform_edges, GaussLegendre};
use crate::sde::EnsembleResult;
use crate::specfun::{erf, radial_solution, solve_angular_eigen, AngularEigenpair, RadialBranch, RadialSolution};
use crate::stats::{bin_samples, bin_samples_nd, chi_square, product_cell_masses, total_variation_masses, ChiSquare};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizability {
    Yes,
    No,
    /// Logarithmic growth at a cutoff.
    Marginal,
}

/// Integrals over nested truncations of one axis, with the verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub cutoffs: Vec<f64>,
    pub integrals: Vec<f64>,
    pub status: Normalizability,
}

/// Linear fit of `I(L)` against `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGrowth {
    pub cutoffs: Vec<f64>,
    pub integrals: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizabilityReport {
    pub status: Normalizability,
    pub radial: Option<GrowthReport>,
    pub angular: Option<LinearGrowth>,
}

type DensityFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct CandidateEquilibrium {
    pub name: String,
    pub beta: f64,
    density: Arc<DensityFn>,
    grid: Option<Arc<DensityGrid>>,
    pub normalizable: Normalizability,
    /// Normalization constant already divided out of `density` when the
    /// candidate is normalizable.
    pub z: Option<f64>,
    pub report: NormalizabilityReport,
    /// Angular eigenvalue for separated candidates.
    pub beta1: Option<f64>,
}

impl fmt::Debug for CandidateEquilibrium {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CandidateEquilibrium")
            .field("name", &self.name)
            .field("beta", &self.beta)
            .field("normalizable", &self.normalizable)
            .field("z", &self.z)
            .field("beta1", &self.beta1)
            .finish()
    }
}

impl CandidateEquilibrium {
    /// `P(rho, theta)` with respect to `drho dtheta`.
    pub fn density(&self, rho: f64, theta: f64) -> f64 {
        (self.density)(rho, theta)
    }

    /// `p(v0, v1)` with respect to `dv0 dv1`; singular on `v1 = 0`.
    pub fn cartesian_density(&self, v: [f64; 2]) -> Result<f64> {
        let p = to_polar(v)?;
        Ok(self.density(p.rho, p.theta) / v[1].abs())
    }

    /// Cell masses on a polar tensor grid: exact for grid-backed candidates,
    /// 4x4 Gauss otherwise.
    pub fn cell_masses(&self, edges_rho: &[f64], edges_theta: &[f64]) -> Vec<f64> {
        match &self.grid {
            Some(g) => g.cell_masses_on(edges_rho, edges_theta),
            None => analytic_cell_masses(edges_rho, edges_theta, |r, t| self.density(r, t)),
        }
    }

    pub fn grid(&self) -> Option<&DensityGrid> {
        self.grid.as_deref()
    }
}

/// 8x8 Gauss per cell; radial cells spanning more than a factor 4 are split
/// geometrically so that `1/rho` behaviour at the inner edge is resolved.
fn analytic_cell_masses<F: Fn(f64, f64) -> f64 + Sync>(edges_rho: &[f64], edges_theta: &[f64], f: F) -> Vec<f64> {
    let rule = GaussLegendre::new(8);
    let nt = edges_theta.len() - 1;
    (0..edges_rho.len() - 1)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (lo, hi) = (edges_rho[i], edges_rho[i + 1]);
            let panels = if lo > 0.0 && hi / lo > 4.0 {
                geometric_edges(lo, hi, (hi / lo).log2().ceil() as usize)
            } else {
                vec![lo, hi]
            };
            let (rule, f) = (&rule, &f);
            (0..nt)
                .map(move |j| {
                    let (t0, t1) = (edges_theta[j], edges_theta[j + 1]);
                    rule.integrate_panels(|r| rule.integrate(|t| f(r, t), t0, t1), &panels)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParams("beta must be positive".into()));
    }
    Ok(())
}

/// `int_0^inf e^{-beta rho^2/2} drho` by quadrature.
pub fn boltzmann_rho_integral(beta: f64) -> f64 {
    let rule = GaussLegendre::new(20);
    rule.integrate_panels(|r| (-0.5 * beta * r * r).exp(), &uniform_edges(0.0, 40.0 / beta.sqrt(), 80))
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// `I(L) = int e^{-beta rho^2/2} drho * int_{-L}^{L} dtheta` for
/// `L in {5, 10, 20, 40}`, fitted linearly.
pub fn boltzmann_divergence_certificate(beta: f64) -> Result<LinearGrowth> {
    check_beta(beta)?;
    let rho = boltzmann_rho_integral(beta);
    let rule = GaussLegendre::new(8);
    let cutoffs = vec![5.0, 10.0, 20.0, 40.0];
    let integrals: Vec<f64> = cutoffs
        .iter()
        .map(|&l| rho * rule.integrate_panels(|_| 1.0, &uniform_edges(-l, l, 16)))
        .collect();
    let (slope, intercept, r_squared) = linear_fit(&cutoffs, &integrals);
    Ok(LinearGrowth {
        cutoffs,
        integrals,
        slope,
        intercept,
        r_squared,
    })
}

/// `P = e^{-beta rho^2 / 2}`: flat in `theta`, so not normalizable.
pub fn boltzmann_candidate(beta: f64) -> Result<CandidateEquilibrium> {
    let cert = boltzmann_divergence_certificate(beta)?;
    Ok(CandidateEquilibrium {
        name: "boltzmann".into(),
        beta,
        density: Arc::new(move |r, _| (-0.5 * beta * r * r).exp()),
        grid: None,
        normalizable: Normalizability::No,
        z: None,
        report: NormalizabilityReport {
            status: Normalizability::No,
            radial: None,
            angular: Some(cert),
        },
        beta1: None,
    })
}

/// Radial cutoffs used for the nested-domain normalizability test.
pub const RHO_CUTOFFS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Integrals of `f` over `[rho_min / sqrt(beta), 12 / sqrt(beta)]` for each
/// cutoff. With `f ~ rho^{-p}` near the origin the ratio of successive
/// per-decade increments is `10^{p-1}`: below 1/2 counts as convergence,
/// within 2% of 1 as logarithmic growth, above that as divergence.
pub fn radial_growth<F: Fn(f64) -> f64>(beta: f64, f: F) -> GrowthReport {
    let sb = beta.sqrt();
    let rule = GaussLegendre::new(20);
    let outer = rule.integrate_panels(&f, &uniform_edges(1.0 / sb, 12.0 / sb, 60));
    let cutoffs: Vec<f64> = RHO_CUTOFFS.iter().map(|c| c / sb).collect();
    let integrals: Vec<f64> = cutoffs
        .iter()
        .map(|&lo| outer + rule.integrate_panels(&f, &geometric_edges(lo, 1.0 / sb, 40)))
        .collect();
    let d1 = integrals[1] - integrals[0];
    let d2 = integrals[2] - integrals[1];
    let scale = integrals[0].abs().max(f64::MIN_POSITIVE);
    let status = if d2.abs() < 1e-6 * scale || d2.abs() < 0.5 * d1.abs() {
        Normalizability::Yes
    } else if d2.abs() <= 1.02 * d1.abs() {
        Normalizability::Marginal
    } else {
        Normalizability::No
    };
    GrowthReport {
        cutoffs,
        integrals,
        status,
    }
}

/// Angular factor of a separated candidate.
enum Angular {
    Sech2,
    Mode(AngularEigenpair),
}

impl Angular {
    fn eval(&self, theta: f64) -> f64 {
        match self {
            Angular::Sech2 => {
                let c = theta.cosh();
                1.0 / (c * c)
            }
            Angular::Mode(m) => m.eval(theta),
        }
    }
}

/// The separated solution `e^{-beta rho^2/2} Q2(rho) Q1(theta)`.
///
/// At `a = 0` the angular factor is `sech^2(theta)` with `beta1 = 2`;
/// otherwise it is the lowest integrable angular mode. The radial factor is
/// the bounded solution from inward shooting. Normalizability is measured
/// on nested radial domains; `z` is set only when the integral converges.
pub fn separable_candidate(beta: f64, a: f64) -> Result<CandidateEquilibrium> {
    check_beta(beta)?;
    let (angular, beta1) = if a == 0.0 {
        (Angular::Sech2, 2.0)
    } else {
        let modes = solve_angular_eigen(a, 800, 3)?;
        let m = modes
            .into_iter()
            .find(|m| m.integrable)
            .ok_or_else(|| Error::Eigen("no integrable angular mode".into()))?;
        let b1 = m.beta1;
        (Angular::Mode(m), b1)
    };
    let radial: RadialSolution = radial_solution(beta, beta1, RadialBranch::NumericBVP)?;
    let rule = GaussLegendre::new(8);
    let theta_integral = rule.integrate_panels(|t| angular.eval(t), &uniform_edges(-25.0, 25.0, 500));
    let growth = radial_growth(beta, |r| (-0.5 * beta * r * r).exp() * radial.eval(r));
    let status = growth.status;
    let z = (status == Normalizability::Yes).then(|| growth.integrals[2] * theta_integral);
    let scale = z.unwrap_or(1.0);
    let radial = Arc::new(radial);
    let angular = Arc::new(angular);
    Ok(CandidateEquilibrium {
        name: if a == 0.0 { "separable".into() } else { format!("separable(a={a})") },
        beta,
        density: Arc::new(move |r, t| (-0.5 * beta * r * r).exp() * radial.eval(r) * angular.eval(t) / scale),
        grid: None,
        normalizable: status,
        z,
        report: NormalizabilityReport {
            status,
            radial: Some(growth),
            angular: None,
        },
        beta1: Some(beta1),
    })
}

/// Wraps a (normalized) PDE solution. The density is bilinear inside the
/// grid and zero outside it.
pub fn from_grid(name: &str, beta: f64, grid: DensityGrid) -> Result<CandidateEquilibrium> {
    check_beta(beta)?;
    let mass = grid.mass();
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::InvalidParams("grid has no mass".into()));
    }
    let grid = Arc::new(grid);
    let g = grid.clone();
    let s = grid.spec;
    Ok(CandidateEquilibrium {
        name: name.into(),
        beta,
        density: Arc::new(move |r, t| {
            if r < s.rho_min || r > s.rho_max || t.abs() > s.theta_max {
                0.0
            } else {
                g.interpolate(r, t) / mass
            }
        }),
        grid: Some(grid),
        normalizable: Normalizability::Yes,
        z: Some(mass),
        report: NormalizabilityReport {
            status: Normalizability::Yes,
            radial: None,
            angular: None,
        },
        beta1: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    Polar,
    Cartesian,
}

/// Rectangle searched by [`find_mode`]: `(rho, theta)` or `(v0, v1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl SearchBox {
    pub fn default_for(chart: Chart, beta: f64) -> Self {
        let s = 1.0 / beta.sqrt();
        match chart {
            Chart::Polar => Self {
                lo: [1e-3 * s, -8.0],
                hi: [6.0 * s, 8.0],
            },
            Chart::Cartesian => Self {
                lo: [-4.0 * s, 1e-3 * s],
                hi: [4.0 * s, 4.0 * s],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub chart: Chart,
    pub location: [f64; 2],
    pub value: f64,
    /// Scan points other than the maximum within `1e-9` (relative) of it.
    pub ties: usize,
    /// The maximum sits on an edge of the search box.
    pub on_boundary: bool,
}

impl Mode {
    /// `|v|`, which equals `rho` in either chart.
    pub fn speed(&self) -> f64 {
        match self.chart {
            Chart::Polar => self.location[0],
            Chart::Cartesian => self.location[0].hypot(self.location[1]),
        }
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-13 * (1.0 + a.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Grid scan on `n x n` points, then golden-section refinement along each
/// axis inside the neighbouring scan cells.
pub fn find_mode(cand: &CandidateEquilibrium, chart: Chart, bx: SearchBox, n: usize) -> Result<Mode> {
    if n < 3 || !(bx.hi[0] > bx.lo[0]) || !(bx.hi[1] > bx.lo[1]) {
        return Err(Error::InvalidParams("search box needs n >= 3 and positive extent".into()));
    }
    if chart == Chart::Cartesian && bx.lo[1] <= 0.0 {
        return Err(Error::InvalidParams("Cartesian search needs v1 > 0".into()));
    }
    let eval = |x: f64, y: f64| -> f64 {
        match chart {
            Chart::Polar => cand.density(x, y),
            Chart::Cartesian => cand.cartesian_density([x, y]).unwrap_or(f64::NAN),
        }
    };
    let xs = uniform_edges(bx.lo[0], bx.hi[0], n - 1);
    let ys = uniform_edges(bx.lo[1], bx.hi[1], n - 1);
    let vals: Vec<f64> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).map(|(x, y)| eval(x, y)).collect();
    if vals.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParams("density is not evaluable on the search box".into()));
    }
    let (imax, &vmax) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty scan");
    let vmin = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if !(vmax > vmin) {
        return Err(Error::InvalidParams(format!("density is flat on the search box ({vmax})")));
    }
    let ties = vals.iter().filter(|&&v| v >= vmax * (1.0 - 1e-9)).count() - 1;
    let (ix, iy) = (imax / n, imax % n);
    let (mut x, mut y) = (xs[ix], ys[iy]);
    let bracket = |grid: &[f64], i: usize| (grid[i.saturating_sub(1)], grid[(i + 1).min(n - 1)]);
    let (bx0, bx1) = bracket(&xs, ix);
    let (by0, by1) = bracket(&ys, iy);
    for _ in 0..3 {
        x = golden_max(|t| eval(t, y), bx0, bx1);
        y = golden_max(|t| eval(x, t), by0, by1);
    }
    let mut value = eval(x, y);
    if value < vmax {
        (x, y, value) = (xs[ix], ys[iy], vmax);
    }
    let tol = 1e-9;
    let edge = |v: f64, lo: f64, hi: f64| (v - lo).abs() <= tol * (hi - lo) || (hi - v).abs() <= tol * (hi - lo);
    Ok(Mode {
        chart,
        location: [x, y],
        value,
        ties,
        on_boundary: edge(x, bx.lo[0], bx.hi[0]) || edge(y, bx.lo[1], bx.hi[1]),
    })
}

/// `(max - min) / max` of the Cartesian density over `n` points of the
/// open upper half circle `|v| = radius`. Zero for a rotation-invariant
/// density.
pub fn rotation_variation(cand: &CandidateEquilibrium, radius: f64, n: usize) -> Result<f64> {
    let vals: Vec<f64> = (1..=n)
        .map(|k| {
            let phi = std::f64::consts::PI * k as f64 / (n + 1) as f64;
            cand.cartesian_density([radius * phi.cos(), radius * phi.sin()])
        })
        .collect::<Result<_>>()?;
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) {
        return Err(Error::InvalidParams("density vanishes on the circle".into()));
    }
    Ok((max - min) / max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub cell: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub observed: u64,
    /// Expected count under the candidate, renormalized to the binned
    /// region.
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityComparison {
    pub tv_distance: f64,
    pub chi2: ChiSquare,
    pub n_samples: u64,
    /// Samples outside the binned region.
    pub overflow: u64,
    pub bins: Vec<BinReport>,
}

/// Minimum expected count per pooled chi-square group.
pub const MIN_EXPECTED: f64 = 5.0;

fn comparison(observed: &[u64], masses: &[f64], edges: &[Vec<f64>], overflow: u64) -> Result<DensityComparison> {
    let tv_distance = total_variation_masses(&observed.iter().map(|&c| c as f64).collect::<Vec<_>>(), masses)?;
    let chi2 = chi_square(observed, masses, MIN_EXPECTED)?;
    let n: u64 = observed.iter().sum();
    let total_mass: f64 = masses.iter().sum();
    let shape: Vec<usize> = edges.iter().map(|e| e.len() - 1).collect();
    let bins = observed
        .iter()
        .zip(masses)
        .enumerate()
        .map(|(flat, (&o, &m))| {
            let mut cell = vec![0; shape.len()];
            let mut rest = flat;
            for d in (0..shape.len()).rev() {
                cell[d] = rest % shape[d];
                rest /= shape[d];
            }
            BinReport {
                lo: cell.iter().zip(edges).map(|(&i, e)| e[i]).collect(),
                hi: cell.iter().zip(edges).map(|(&i, e)| e[i + 1]).collect(),
                cell,
                observed: o,
                expected: n as f64 * m / total_mass,
            }
        })
        .collect();
    Ok(DensityComparison {
        tv_distance,
        chi2,
        n_samples: n,
        overflow,
        bins,
    })
}

/// Bins polar `(rho, theta)` samples and compares them with the candidate
/// restricted to the binned region.
pub fn compare_density_to_samples(
    cand: &CandidateEquilibrium,
    result: &EnsembleResult,
    edges_rho: &[f64],
    edges_theta: &[f64],
) -> Result<DensityComparison> {
    if result.coordinates != ["rho", "theta"] {
        return Err(Error::InvalidParams("samples are not in the polar chart".into()));
    }
    let h = bin_samples(&result.pairs(), edges_rho, edges_theta)?;
    let masses = cand.cell_masses(edges_rho, edges_theta);
    comparison(h.counts(), &masses, &[edges_rho.to_vec(), edges_theta.to_vec()], h.overflow)
}

/// Compares Cartesian samples with the Boltzmann law `e^{-beta E}` for a
/// diagonal metric, where `E = G_aa v_a^2 / 2`. Each axis gets `bins`
/// cells over `+-half_width` standard deviations.
pub fn compare_gaussian_to_samples(
    params: &ModelParams<f64>,
    result: &EnsembleResult,
    bins: usize,
    half_width: f64,
) -> Result<DensityComparison> {
    let n = params.dim();
    let g = params.g();
    if (0..n).any(|i| (0..n).any(|j| i != j && g[i * n + j] != 0.0)) {
        return Err(Error::InvalidParams("Gaussian comparison needs a diagonal G".into()));
    }
    if result.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: result.dim(),
        });
    }
    let beta = params.beta();
    let sigma: Vec<f64> = (0..n).map(|i| 1.0 / (beta * g[i * n + i]).sqrt()).collect();
    let edges: Vec<Vec<f64>> = sigma.iter().map(|s| uniform_edges(-half_width * s, half_width * s, bins)).collect();
    let axes: Vec<Vec<f64>> = edges
        .iter()
        .zip(&sigma)
        .map(|(e, s)| {
            let c = |x: f64| erf(x / (s * std::f64::consts::SQRT_2));
            e.windows(2).map(|w| 0.5 * (c(w[1]) - c(w[0]))).collect()
        })
        .collect();
    let flat: Vec<f64> = result.rows().flatten().copied().collect();
    let h = bin_samples_nd(&flat, edges.clone())?;
    comparison(&h.counts, &product_cell_masses(&axes), &edges, h.overflow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::HamiltonianKind;
    use crate::coords::Sign;
    use crate::fpk::{select_drift_sign, FPKOperator, GridSpec, ThetaBoundary};
    use crate::rng::Philox;
    use crate::sde::{EnsembleConfig, Scheme};
    use rand::Rng;

    #[test]
    fn boltzmann_certificate() {
        let c = boltzmann_divergence_certificate(1.0).unwrap();
        assert!(c.r_squared > 0.9999);
        assert!((c.intercept / c.slope).abs() < 1e-3);
        for beta in [0.5, 1.0, 3.0] {
            let want = (std::f64::consts::PI / (2.0 * beta)).sqrt();
            assert!((boltzmann_rho_integral(beta) - want).abs() < 1e-10);
        }
        let b = boltzmann_candidate(1.0).unwrap();
        assert_eq!(b.normalizable, Normalizability::No);
        // p v1 stays bounded while p itself blows up like 1/v1.
        for v1 in [1e-2, 1e-4, 1e-8] {
            let p = b.cartesian_density([0.5, v1]).unwrap();
            assert!((p * v1 - (-0.5 * (0.25 + v1 * v1)).exp()).abs() < 1e-12);
        }
        assert!(b.cartesian_density([0.5, 0.0]).is_err());
    }

    #[test]
    fn separable_candidate_at_zero_drift() {
        let c = separable_candidate(1.0, 0.0).unwrap();
        assert_eq!(c.beta1, Some(2.0));
        // Exact separability.
        for r in [0.05, 0.7, 2.0, 4.5] {
            let p0 = c.density(r, 0.0);
            for t in [-3.0f64, -0.4, 1.1, 6.0] {
                let s = 1.0 / t.cosh();
                assert!((c.density(r, t) / p0 - s * s).abs() < 1e-12);
            }
        }
        let rule = GaussLegendre::new(8);
        let sech2 = rule.integrate_panels(|t| 1.0 / t.cosh().powi(2), &uniform_edges(-40.0, 40.0, 400));
        assert!((sech2 - 2.0).abs() < 1e-12);
        // Q2 ~ 1/rho near the origin: logarithmic growth.
        assert_eq!(c.normalizable, Normalizability::Marginal, "{:?}", c.report);
        assert!(c.z.is_none());
        let g = c.report.radial.as_ref().unwrap();
        let (d1, d2) = (g.integrals[1] - g.integrals[0], g.integrals[2] - g.integrals[1]);
        assert!((d2 / d1 - 1.0).abs() < 5e-3, "{d1} {d2}");
    }

    #[test]
    fn radial_growth_classification() {
        let conv = radial_growth(1.0, |r| (-r * r).exp());
        let log = radial_growth(1.0, |r| (-r * r).exp() / r);
        let pow = radial_growth(1.0, |r| (-r * r).exp() / (r * r));
        assert_eq!(conv.status, Normalizability::Yes);
        assert_eq!(log.status, Normalizability::Marginal);
        assert_eq!(pow.status, Normalizability::No);
    }

    #[test]
    fn separable_candidate_with_drift() {
        let c = separable_candidate(1.0, 0.5).unwrap();
        let b1 = c.beta1.unwrap();
        assert!((b1 - 2.049982113063129).abs() < 1e-5, "{b1}");
        let spec = GridSpec::default_for(1.0);
        let grid = DensityGrid::from_fn(spec, |r, t| c.density(r, t)).unwrap();
        assert!(grid.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        // beta1 > 2 puts the inner exponent below -1: increments grow by
        // 10^{s - 2} per decade.
        assert_eq!(c.normalizable, Normalizability::No, "{:?}", c.report);
        let g = c.report.radial.as_ref().unwrap();
        let ratio = (g.integrals[2] - g.integrals[1]) / (g.integrals[1] - g.integrals[0]);
        let s = crate::specfun::radial::indicial_exponent(b1);
        assert!((ratio - 10f64.powf(s - 2.0)).abs() < 5e-3, "{ratio}");
    }

    #[test]
    fn drift_sign_follows_the_angular_parameter() {
        // a = -s k / D: with k = 0.5, D = 1 and a = 0.5 the sign is minus.
        let c = separable_candidate(1.0, 0.5).unwrap();
        let spec = GridSpec {
            rho_min: 0.5,
            rho_max: 6.0,
            n_rho: 200,
            theta_max: 8.0,
            n_theta: 200,
        };
        let grid = DensityGrid::from_fn(spec, |r, t| c.density(r, t)).unwrap();
        let op = FPKOperator::new(1.0, 1.0, HamiltonianKind::InverseRho, 0.5, Sign::Plus, ThetaBoundary::Absorbing).unwrap();
        let (s, plus, minus) = select_drift_sign(&op, &grid).unwrap();
        assert_eq!(s, Sign::Minus);
        assert!(minus < 0.1 * plus, "{plus} {minus}");
    }

    fn qsd(beta: f64) -> CandidateEquilibrium {
        let spec = GridSpec::default_for(beta);
        let grid = DensityGrid::from_fn(spec, |r, t| r * r * (-0.5 * beta * r * r).exp() / t.cosh().powi(2)).unwrap();
        from_grid("qsd", beta, grid).unwrap()
    }

    #[test]
    fn chart_invariance_of_the_normalization() {
        // Closed-form density; Cartesian side in Euclidean polar coordinates.
        let p = |r: f64, t: f64| r * r * (-0.5 * r * r).exp() / t.cosh().powi(2);
        let (r0, r1, l) = (0.2, 3.0, 4.0);
        let rule = GaussLegendre::new(20);
        let polar = rule.integrate_panels(|r| rule.integrate_panels(|t| p(r, t), &uniform_edges(-l, l, 16)), &uniform_edges(r0, r1, 8));
        // theta = asinh(-cot(phi)), so |theta| < l means phi in (phi_l, pi - phi_l).
        let phi_l = (1.0 / l.sinh()).atan();
        let cart = rule.integrate_panels(
            |r| {
                rule.integrate_panels(
                    |phi| {
                        let v = [r * phi.cos(), r * phi.sin()];
                        let q = to_polar(v).unwrap();
                        p(q.rho, q.theta) / v[1] * r
                    },
                    &uniform_edges(phi_l, std::f64::consts::PI - phi_l, 16),
                )
            },
            &uniform_edges(r0, r1, 8),
        );
        assert!((polar - cart).abs() < 1e-6 * polar, "{polar} {cart}");
    }

    #[test]
    fn modes() {
        let b = boltzmann_candidate(1.0).unwrap();
        let m = find_mode(&b, Chart::Polar, SearchBox::default_for(Chart::Polar, 1.0), 100).unwrap();
        assert!(m.on_boundary && (m.location[0] - 1e-3).abs() < 1e-9 && m.ties > 0);

        let q = qsd(1.0);
        let m = find_mode(&q, Chart::Polar, SearchBox::default_for(Chart::Polar, 1.0), 400).unwrap();
        assert!((m.location[0] - 2f64.sqrt()).abs() < 0.02 && m.location[1].abs() < 0.03, "{m:?}");
        let m = find_mode(&q, Chart::Cartesian, SearchBox::default_for(Chart::Cartesian, 1.0), 400).unwrap();
        // p(v) = v1 e^{-|v|^2/2}: mode at (0, 1).
        assert!(m.location[0].abs() < 0.02 && (m.location[1] - 1.0).abs() < 0.02, "{m:?}");
        assert!(!m.on_boundary);
        let var = rotation_variation(&q, m.speed(), 720).unwrap();
        assert!(var > 0.5, "{var}");
        assert!(rotation_variation(&b, 1.0, 720).unwrap() > 0.5);
    }

    #[test]
    fn self_consistency_against_inverse_cdf_samples() {
        // Truncated a = 0 candidate, sampled per axis from tabulated CDFs.
        let c = separable_candidate(1.0, 0.0).unwrap();
        let (lo, hi) = (1e-3, 6.0);
        let nodes = geometric_edges(lo, hi, 4000);
        let mut cdf = vec![0.0];
        let rule = GaussLegendre::new(8);
        for w in nodes.windows(2) {
            let m = rule.integrate(|r| c.density(r, 0.0), w[0], w[1]);
            cdf.push(cdf.last().unwrap() + m);
        }
        let total = *cdf.last().unwrap();
        let n = 1_000_000;
        let mut rng = Philox::new(5, 0);
        let mut samples = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let x = rng.random::<f64>() * total;
            let i = cdf.partition_point(|&v| v <= x).clamp(1, nodes.len() - 1) - 1;
            let f = (x - cdf[i]) / (cdf[i + 1] - cdf[i]);
            samples.push(nodes[i] + f * (nodes[i + 1] - nodes[i]));
            samples.push((2.0 * rng.random::<f64>() - 1.0).atanh());
        }
        let cfg = EnsembleConfig {
            t_burn: 0.0,
            t_sample: 0.0,
            ..EnsembleConfig::new(Scheme::PolarFPK, n, 0)
        };
        let result = EnsembleResult {
            config: cfg,
            algebra: "affine".into(),
            coordinates: vec!["rho".into(), "theta".into()],
            snapshot_times: vec![0.0],
            samples,
            valid: vec![true; n],
            diverged: 0,
            resampled: 0,
        };
        let cmp = compare_density_to_samples(&c, &result, &uniform_edges(lo, hi, 20), &uniform_edges(-6.0, 6.0, 20)).unwrap();
        assert!(cmp.tv_distance < 0.01, "{}", cmp.tv_distance);
        assert!(cmp.chi2.p_value > 1e-4, "{:?}", cmp.chi2);
        assert_eq!(cmp.bins.len(), 400);
        let b = boltzmann_candidate(1.0).unwrap();
        let cmp = compare_density_to_samples(&b, &result, &uniform_edges(lo, hi, 20), &uniform_edges(-6.0, 6.0, 20)).unwrap();
        assert!(cmp.tv_distance > 0.2);
    }
}
