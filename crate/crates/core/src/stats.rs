//! Histograms, total-variation distance and Pearson chi-square.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::quad::GaussLegendre;

const CHUNK: usize = 1 << 14;

fn check_edges(edges: &[f64], axis: &str) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::InvalidParams(format!("{axis} edges need at least two entries")));
    }
    if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams(format!("{axis} edges must be finite and strictly increasing")));
    }
    Ok(())
}

/// Bin index of `x`; the last bin is closed on the right.
#[inline]
fn locate(edges: &[f64], x: f64) -> Option<usize> {
    let n = edges.len() - 1;
    if !(x >= edges[0] && x <= edges[n]) {
        return None;
    }
    Some((edges.partition_point(|&e| e <= x) - 1).min(n - 1))
}

/// Counts on a rectangular grid of cells, row-major in `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Histogram2DRepr", try_from = "Histogram2DRepr")]
pub struct Histogram2D {
    pub edges_x: Vec<f64>,
    pub edges_y: Vec<f64>,
    counts: Vec<u64>,
    /// Samples inside the domain; always equals the sum of `counts`.
    pub total: u64,
    /// Samples outside the domain or non-finite.
    pub overflow: u64,
}

#[derive(Serialize, Deserialize)]
struct Histogram2DRepr {
    edges_x: Vec<f64>,
    edges_y: Vec<f64>,
    counts: Vec<Vec<u64>>,
    total: u64,
    overflow: u64,
}

impl From<Histogram2D> for Histogram2DRepr {
    fn from(h: Histogram2D) -> Self {
        let ny = h.ny();
        Self {
            counts: h.counts.chunks(ny).map(|r| r.to_vec()).collect(),
            edges_x: h.edges_x,
            edges_y: h.edges_y,
            total: h.total,
            overflow: h.overflow,
        }
    }
}

impl TryFrom<Histogram2DRepr> for Histogram2D {
    type Error = Error;

    fn try_from(r: Histogram2DRepr) -> Result<Self> {
        let mut h = Histogram2D::new(r.edges_x, r.edges_y)?;
        if r.counts.len() != h.nx() || r.counts.iter().any(|row| row.len() != h.ny()) {
            return Err(Error::InvalidParams("counts shape does not match edges".into()));
        }
        h.counts = r.counts.concat();
        h.total = h.counts.iter().sum();
        if h.total != r.total {
            return Err(Error::InvalidParams("total differs from the sum of counts".into()));
        }
        h.overflow = r.overflow;
        Ok(h)
    }
}

impl Histogram2D {
    pub fn new(edges_x: Vec<f64>, edges_y: Vec<f64>) -> Result<Self> {
        check_edges(&edges_x, "x")?;
        check_edges(&edges_y, "y")?;
        let n = (edges_x.len() - 1) * (edges_y.len() - 1);
        Ok(Self {
            edges_x,
            edges_y,
            counts: vec![0; n],
            total: 0,
            overflow: 0,
        })
    }

    pub fn nx(&self) -> usize {
        self.edges_x.len() - 1
    }

    pub fn ny(&self) -> usize {
        self.edges_y.len() - 1
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, ix: usize, iy: usize) -> u64 {
        self.counts[ix * self.ny() + iy]
    }

    pub fn add(&mut self, x: f64, y: f64) {
        match (locate(&self.edges_x, x), locate(&self.edges_y, y)) {
            (Some(i), Some(j)) => {
                let ny = self.ny();
                self.counts[i * ny + j] += 1;
                self.total += 1;
            }
            _ => self.overflow += 1,
        }
    }

    /// Adds the counts of a histogram with identical edges.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.edges_x != other.edges_x || self.edges_y != other.edges_y {
            return Err(Error::InvalidParams("cannot merge histograms with different edges".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        self.overflow += other.overflow;
        Ok(())
    }

    /// Cell frequencies `counts / total`.
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        if self.total == 0 {
            return Err(Error::EmptyHistogram);
        }
        let t = self.total as f64;
        Ok(self.counts.iter().map(|&c| c as f64 / t).collect())
    }

    /// The histogram mirrored in `y` about the centre of its `y` range.
    /// Requires edges symmetric about that centre.
    pub fn reflect_y(&self) -> Result<Self> {
        let ny = self.ny();
        let (lo, hi) = (self.edges_y[0], self.edges_y[ny]);
        let scale = hi - lo;
        for j in 0..=ny {
            if ((self.edges_y[j] - lo) - (hi - self.edges_y[ny - j])).abs() > 1e-12 * scale {
                return Err(Error::InvalidParams("y edges are not symmetric".into()));
            }
        }
        let mut out = self.clone();
        for i in 0..self.nx() {
            for j in 0..ny {
                out.counts[i * ny + j] = self.counts[i * ny + (ny - 1 - j)];
            }
        }
        Ok(out)
    }
}

/// Bins 2-D points given as `(x, y)` pairs. Chunks are counted in parallel
/// and merged; integer addition makes the result independent of the split.
pub fn bin_samples(samples: &[[f64; 2]], edges_x: &[f64], edges_y: &[f64]) -> Result<Histogram2D> {
    let empty = Histogram2D::new(edges_x.to_vec(), edges_y.to_vec())?;
    Ok(samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut h = empty.clone();
            for s in chunk {
                h.add(s[0], s[1]);
            }
            h
        })
        .reduce(
            || empty.clone(),
            |mut a, b| {
                a.merge(&b).expect("same edges");
                a
            },
        ))
}

/// Probability mass of `density` in every cell, by a 2x2 Gauss rule per
/// cell, row-major in `x`.
pub fn cell_integrals<F>(edges_x: &[f64], edges_y: &[f64], density: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    cell_integrals_with(edges_x, edges_y, 2, density)
}

/// As [`cell_integrals`] with an `order x order` Gauss rule.
pub fn cell_integrals_with<F>(edges_x: &[f64], edges_y: &[f64], order: usize, density: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let rule = GaussLegendre::new(order);
    let ny = edges_y.len() - 1;
    (0..edges_x.len() - 1)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (x0, x1) = (edges_x[i], edges_x[i + 1]);
            let rule = &rule;
            let density = &density;
            (0..ny).map(move |j| {
                let (y0, y1) = (edges_y[j], edges_y[j + 1]);
                rule.integrate(|x| rule.integrate(|y| density(x, y), y0, y1), x0, x1)
            })
        })
        .collect()
}

fn normalized(p: &[f64]) -> Result<Vec<f64>> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidParams("masses must be finite and non-negative".into()));
    }
    let s: f64 = p.iter().sum();
    if !(s > 0.0) {
        return Err(Error::EmptyHistogram);
    }
    Ok(p.iter().map(|x| x / s).collect())
}

/// `1/2 sum |p_i - q_i|` after normalizing each side to unit mass.
pub fn total_variation_masses(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let (p, q) = (normalized(p)?, normalized(q)?);
    let tv = 0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>();
    Ok(tv.min(1.0))
}

/// Total variation between a histogram and a density on its cells.
pub fn total_variation<F>(h: &Histogram2D, density: F) -> Result<f64>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let q = cell_integrals(&h.edges_x, &h.edges_y, density);
    total_variation_masses(&h.frequencies()?, &q)
}

/// Total variation between two histograms on the same edges.
pub fn total_variation_histograms(a: &Histogram2D, b: &Histogram2D) -> Result<f64> {
    if a.edges_x != b.edges_x || a.edges_y != b.edges_y {
        return Err(Error::InvalidParams("histograms have different edges".into()));
    }
    total_variation_masses(&a.frequencies()?, &b.frequencies()?)
}

/// Counts on a tensor grid in any dimension, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramNd {
    pub edges: Vec<Vec<f64>>,
    pub counts: Vec<u64>,
    pub total: u64,
    pub overflow: u64,
}

impl HistogramNd {
    pub fn new(edges: Vec<Vec<f64>>) -> Result<Self> {
        for (k, e) in edges.iter().enumerate() {
            check_edges(e, &format!("axis {k}"))?;
        }
        let n = edges.iter().map(|e| e.len() - 1).product();
        Ok(Self {
            edges,
            counts: vec![0; n],
            total: 0,
            overflow: 0,
        })
    }

    pub fn shape(&self) -> Vec<usize> {
        self.edges.iter().map(|e| e.len() - 1).collect()
    }

    pub fn add(&mut self, x: &[f64]) {
        let mut idx = 0;
        for (e, &xi) in self.edges.iter().zip(x) {
            match locate(e, xi) {
                Some(i) => idx = idx * (e.len() - 1) + i,
                None => {
                    self.overflow += 1;
                    return;
                }
            }
        }
        self.counts[idx] += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::InvalidParams("cannot merge histograms with different edges".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        self.overflow += other.overflow;
        Ok(())
    }
}

/// Bins rows of a flat `n x dim` sample array.
pub fn bin_samples_nd(samples: &[f64], edges: Vec<Vec<f64>>) -> Result<HistogramNd> {
    let dim = edges.len();
    if dim == 0 || !samples.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: samples.len(),
        });
    }
    let empty = HistogramNd::new(edges)?;
    Ok(samples
        .par_chunks(CHUNK * dim)
        .map(|chunk| {
            let mut h = empty.clone();
            for row in chunk.chunks(dim) {
                h.add(row);
            }
            h
        })
        .reduce(
            || empty.clone(),
            |mut a, b| {
                a.merge(&b).expect("same edges");
                a
            },
        ))
}

/// Cell probabilities of a product density from per-axis cell masses.
pub fn product_cell_masses(axes: &[Vec<f64>]) -> Vec<f64> {
    axes.iter().fold(vec![1.0], |acc, axis| {
        acc.iter().flat_map(|a| axis.iter().map(move |b| a * b)).collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of groups after merging sparse cells.
    pub groups: usize,
}

/// Pearson chi-square of `observed` counts against cell probabilities.
/// Cells with expected count below `min_expected` are pooled in order of
/// increasing expectation until each pool reaches it; a short final pool
/// joins the previous one. Degrees of freedom: groups - 1.
pub fn chi_square(observed: &[u64], probs: &[f64], min_expected: f64) -> Result<ChiSquare> {
    if observed.len() != probs.len() {
        return Err(Error::DimensionMismatch {
            expected: observed.len(),
            got: probs.len(),
        });
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(Error::EmptyHistogram);
    }
    let probs = normalized(probs)?;
    let n = n as f64;
    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut sparse: Vec<(f64, f64)> = Vec::new();
    for (&o, &p) in observed.iter().zip(&probs) {
        let e = n * p;
        if e >= min_expected {
            groups.push((o as f64, e));
        } else {
            sparse.push((o as f64, e));
        }
    }
    // Stable and independent of the counts, so ties keep cell order.
    sparse.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut pool = (0.0, 0.0);
    for (o, e) in sparse {
        pool.0 += o;
        pool.1 += e;
        if pool.1 >= min_expected {
            groups.push(pool);
            pool = (0.0, 0.0);
        }
    }
    if pool.0 > 0.0 || pool.1 > 0.0 {
        match groups.last_mut() {
            Some(last) => {
                last.0 += pool.0;
                last.1 += pool.1;
            }
            None => groups.push(pool),
        }
    }
    let statistic: f64 = groups
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e) * (o - e) / e } else if o > 0.0 { f64::INFINITY } else { 0.0 })
        .sum();
    let dof = groups.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else if statistic.is_infinite() {
        0.0
    } else {
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParams(e.to_string()))?;
        dist.sf(statistic)
    };
    Ok(ChiSquare {
        statistic,
        dof,
        p_value,
        groups: groups.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::uniform_edges;
    use crate::rng::Philox;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn unit_edges(n: usize) -> Vec<f64> {
        uniform_edges(0.0, 1.0, n)
    }

    #[test]
    fn binning_examples() {
        let e = unit_edges(4);
        let h = bin_samples(&[[0.375, 0.625]], &e, &e).unwrap();
        assert_eq!(h.count(1, 2), 1);
        assert_eq!(h.total, 1);
        let h = bin_samples(&[], &e, &e).unwrap();
        assert!(h.counts().iter().all(|&c| c == 0) && h.total == 0);
        assert!(matches!(h.frequencies(), Err(Error::EmptyHistogram)));
        let h = bin_samples(&[[1.0, 1.0], [1.5, 0.5], [f64::NAN, 0.5]], &e, &e).unwrap();
        assert_eq!((h.count(3, 3), h.total, h.overflow), (1, 1, 2));
        assert!(Histogram2D::new(vec![0.0, 0.0], e.clone()).is_err());
    }

    #[test]
    fn uniform_samples_within_poisson_bounds() {
        let mut r = Philox::new(11, 0);
        let s: Vec<[f64; 2]> = (0..1_000_000).map(|_| [r.random(), r.random()]).collect();
        let e = unit_edges(50);
        let h = bin_samples(&s, &e, &e).unwrap();
        let mean = 1e6 / 2500.0;
        for &c in h.counts() {
            assert!((c as f64 - mean).abs() < 5.0 * mean.sqrt());
        }
    }

    #[test]
    fn tv_examples() {
        let e = unit_edges(10);
        let f = |x: f64, y: f64| 1.0 + x * y;
        let q = cell_integrals(&e, &e, f);
        assert_eq!(total_variation_masses(&q, &q).unwrap(), 0.0);
        let left: Vec<f64> = (0..100).map(|i| if i < 50 { 1.0 } else { 0.0 }).collect();
        let right: Vec<f64> = left.iter().map(|x| 1.0 - x).collect();
        assert_eq!(total_variation_masses(&left, &right).unwrap(), 1.0);
        // 2x2 Gauss is exact for the bilinear density.
        let total: f64 = q.iter().sum();
        assert!((total - 1.25).abs() < 1e-14);
    }

    #[test]
    fn histogram_of_density_is_close_in_tv() {
        // Inverse-CDF samples of p(x, y) = 4xy on the unit square.
        let mut r = Philox::new(5, 1);
        let s: Vec<[f64; 2]> = (0..1_000_000)
            .map(|_| [r.random::<f64>().sqrt(), r.random::<f64>().sqrt()])
            .collect();
        let e = unit_edges(50);
        let h = bin_samples(&s, &e, &e).unwrap();
        let tv = total_variation(&h, |x, y| 4.0 * x * y).unwrap();
        // Multinomial noise alone gives E[TV] ~ sum sqrt(p (1 - p) / (2 pi n)).
        let q = cell_integrals(&e, &e, |x, y| 4.0 * x * y);
        let floor: f64 = q
            .iter()
            .map(|p| (p * (1.0 - p) / (2.0 * std::f64::consts::PI * 1e6)).sqrt())
            .sum();
        assert!((floor - 0.017_734).abs() < 1e-5, "{floor}");
        assert!((tv / floor - 1.0).abs() < 0.1, "{tv} vs {floor}");
    }

    #[test]
    fn json_round_trip() {
        let e = unit_edges(2);
        let h = bin_samples(&[[0.2, 0.7], [0.9, 0.1], [2.0, 0.0]], &e, &e).unwrap();
        let text = serde_json::to_string(&h).unwrap();
        assert_eq!(
            text,
            r#"{"edges_x":[0.0,0.5,1.0],"edges_y":[0.0,0.5,1.0],"counts":[[0,1],[1,0]],"total":2,"overflow":1}"#
        );
        let back: Histogram2D = serde_json::from_str(&text).unwrap();
        assert_eq!(back, h);
        let bad = text.replace(r#""total":2"#, r#""total":3"#);
        assert!(serde_json::from_str::<Histogram2D>(&bad).is_err());
    }

    #[test]
    fn chi_square_examples() {
        let probs = vec![0.25; 4];
        let c = chi_square(&[25, 25, 25, 25], &probs, 5.0).unwrap();
        assert_eq!((c.statistic, c.dof), (0.0, 3));
        assert!((c.p_value - 1.0).abs() < 1e-12);
        let c = chi_square(&[40, 20, 20, 20], &probs, 5.0).unwrap();
        assert!((c.statistic - 12.0).abs() < 1e-12);
        // Survival function of chi^2_3 at 12.
        assert!((c.p_value - 0.007_383_160_505_359_769).abs() < 1e-10);
        // Sparse cells are pooled.
        let c = chi_square(&[1, 2, 97], &[0.01, 0.02, 0.97], 5.0).unwrap();
        assert_eq!(c.groups, 1);
        assert_eq!(c.dof, 0);
    }

    #[test]
    fn chi_square_of_multinomial_is_calibrated() {
        let mut r = Philox::new(3, 9);
        let probs: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let norm: f64 = probs.iter().sum();
        let cdf: Vec<f64> = probs
            .iter()
            .scan(0.0, |s, p| {
                *s += p / norm;
                Some(*s)
            })
            .collect();
        let mut low = 0;
        for _ in 0..200 {
            let mut obs = vec![0u64; 20];
            for _ in 0..2000 {
                let u: f64 = r.random();
                obs[cdf.partition_point(|&c| c < u).min(19)] += 1;
            }
            if chi_square(&obs, &probs, 5.0).unwrap().p_value < 0.05 {
                low += 1;
            }
        }
        // Binomial(200, 0.05): mean 10, sd ~3.1.
        assert!(low < 25, "{low}");
    }

    #[test]
    fn nd_histogram_and_product_masses() {
        let e = vec![unit_edges(2), unit_edges(3), unit_edges(2)];
        let h = bin_samples_nd(&[0.1, 0.5, 0.9, 0.6, 0.1, 0.1, 2.0, 0.0, 0.0], e).unwrap();
        assert_eq!(h.shape(), vec![2, 3, 2]);
        assert_eq!((h.total, h.overflow), (2, 1));
        assert_eq!(h.counts[1 * 2 + 1], 1);
        assert_eq!(h.counts[6], 1);
        let m = product_cell_masses(&[vec![0.5, 0.5], vec![0.1, 0.9]]);
        assert_eq!(m, vec![0.05, 0.45, 0.05, 0.45]);
    }

    proptest! {
        #[test]
        fn tv_bounded_and_symmetric(p in prop::collection::vec(0.0f64..1.0, 12), q in prop::collection::vec(0.0f64..1.0, 12)) {
            prop_assume!(p.iter().sum::<f64>() > 0.0 && q.iter().sum::<f64>() > 0.0);
            let a = total_variation_masses(&p, &q).unwrap();
            let b = total_variation_masses(&q, &p).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn binning_ignores_order(seed in 0u64..1000) {
            let mut r = Philox::new(seed, 0);
            let mut s: Vec<[f64; 2]> = (0..500).map(|_| [r.random::<f64>() * 1.2, r.random()]).collect();
            let e = unit_edges(7);
            let h1 = bin_samples(&s, &e, &e).unwrap();
            s.shuffle(&mut r);
            let h2 = bin_samples(&s, &e, &e).unwrap();
            prop_assert_eq!(&h1, &h2);
            prop_assert_eq!(h1.counts().iter().sum::<u64>(), h1.total);
        }
    }
}
