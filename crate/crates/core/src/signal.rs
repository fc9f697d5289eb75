//! Uniform 1D grids, unit-mass density signals, their cumulative tables and
//! generalized-inverse quantiles.
//!
//! Samples are read as the piecewise-linear function through the grid nodes,
//! so every integral is a trapezoidal sum and the CDF between nodes is linear.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass tolerance accepted by [`Signal1D::new`].
pub const MASS_TOL: f64 = 1e-9;

/// Signals whose mass is this close to one are left untouched by
/// [`normalize`], which makes normalization exactly idempotent.
const NORMALIZED_SLACK: f64 = 1e-12;

/// CDF values within this distance of the queried level count as equal to
/// it, so rounding dust in a flat run does not hide the run.
const FLAT_TOL: f64 = 1e-12;

/// Uniform grid `xmin = x_0 < ... < x_{n-1} = xmax`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRecord")]
pub struct Grid1D {
    xmin: f64,
    xmax: f64,
    n: usize,
}

#[derive(Deserialize)]
struct GridRecord {
    xmin: f64,
    xmax: f64,
    n: usize,
}

impl TryFrom<GridRecord> for Grid1D {
    type Error = Error;

    fn try_from(r: GridRecord) -> Result<Self> {
        Self::new(r.xmin, r.xmax, r.n)
    }
}

impl Grid1D {
    pub fn new(xmin: f64, xmax: f64, n: usize) -> Result<Self> {
        if !(xmin.is_finite() && xmax.is_finite()) {
            return Err(Error::InvalidGrid("bounds must be finite".into()));
        }
        if xmin >= xmax {
            return Err(Error::InvalidGrid(format!("xmin {xmin} must be below xmax {xmax}")));
        }
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {n}")));
        }
        Ok(Self { xmin, xmax, n })
    }

    /// Builds a grid from explicit node positions, rejecting non-uniform spacing.
    pub fn from_nodes(nodes: &[f64]) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid("need at least 2 nodes".into()));
        }
        let grid = Self::new(nodes[0], nodes[nodes.len() - 1], nodes.len())?;
        let tol = 1e-9 * (grid.xmax - grid.xmin).max(grid.xmin.abs().max(grid.xmax.abs()));
        for (i, &x) in nodes.iter().enumerate() {
            if (x - grid.node(i)).abs() > tol {
                return Err(Error::InvalidGrid(format!("node {i} at {x} breaks uniform spacing")));
            }
        }
        Ok(grid)
    }

    pub fn xmin(&self) -> f64 {
        self.xmin
    }

    pub fn xmax(&self) -> f64 {
        self.xmax
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        (self.xmax - self.xmin) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.xmax
        } else {
            self.xmin + (self.xmax - self.xmin) * i as f64 / (self.n - 1) as f64
        }
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    /// Trapezoidal quadrature weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.n {
            0.5 * self.dx()
        } else {
            self.dx()
        }
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().enumerate().map(|(i, v)| v * self.weight(i)).sum()
    }

    /// Locates `x` as `(cell, fraction)` with `x = node(cell) + fraction * dx`,
    /// or `None` outside `[xmin, xmax]`.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !(x >= self.xmin && x <= self.xmax) {
            return None;
        }
        let s = (x - self.xmin) / self.dx();
        let cell = (s.floor() as usize).min(self.n - 2);
        Some((cell, (s - cell as f64).clamp(0.0, 1.0)))
    }

    /// Piecewise-linear interpolation of node values, zero outside the grid.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        match self.locate(x) {
            Some((k, t)) => values[k] * (1.0 - t) + values[k + 1] * t,
            None => 0.0,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.xmin && x <= self.xmax
    }

    /// Sub-grid spanning nodes `first..=last`.
    pub fn slice(&self, first: usize, last: usize) -> Result<Self> {
        if last >= self.n || first >= last {
            return Err(Error::InvalidGrid(format!("bad node range {first}..={last}")));
        }
        Self::new(self.node(first), self.node(last), last - first + 1)
    }
}

/// Nonnegative samples of a unit-mass density on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal1D {
    grid: Grid1D,
    values: Vec<f64>,
}

impl Signal1D {
    /// Wraps already-normalized samples; use [`normalize`] for raw data.
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        check_samples(&grid, &values)?;
        let mass = grid.integrate(&values);
        if mass <= 0.0 {
            return Err(Error::AllZero);
        }
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Precondition(format!("signal mass {mass} is not 1")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the grid nodes and normalizes.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let raw: Vec<f64> = grid.nodes().map(f).collect();
        normalize(&raw, grid)
    }

    /// Normalized sum of indicator functions of `boxes`, each scaled by its height.
    pub fn boxes(grid: Grid1D, boxes: &[(f64, f64, f64)]) -> Result<Self> {
        Self::from_fn(grid, |x| {
            boxes
                .iter()
                .filter(|(a, b, _)| x >= a - 1e-12 && x <= b + 1e-12)
                .map(|(_, _, h)| h)
                .sum()
        })
    }

    /// Uniform density over the whole grid (the default reference).
    pub fn uniform(grid: Grid1D) -> Self {
        let height = 1.0 / (grid.xmax() - grid.xmin());
        Self { grid, values: vec![height; grid.len()] }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// Density at an arbitrary point (linear between nodes, zero off-grid).
    pub fn eval(&self, x: f64) -> f64 {
        self.grid.interpolate(&self.values, x)
    }

    pub fn l1_distance(&self, other: &Signal1D) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::DomainMismatch("signals live on different grids".into()));
        }
        let diff: Vec<f64> =
            self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).collect();
        Ok(self.grid.integrate(&diff))
    }
}

fn check_samples(grid: &Grid1D, values: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(i));
        }
        if v < 0.0 {
            return Err(Error::NegativeMass { index: i, value: v });
        }
    }
    Ok(())
}

/// Scales nonnegative samples to unit trapezoidal mass.
pub fn normalize(raw: &[f64], grid: Grid1D) -> Result<Signal1D> {
    check_samples(&grid, raw)?;
    let mass = grid.integrate(raw);
    if mass <= 0.0 {
        return Err(Error::AllZero);
    }
    let values = if (mass - 1.0).abs() <= NORMALIZED_SLACK {
        raw.to_vec()
    } else {
        raw.iter().map(|v| v / mass).collect()
    };
    Ok(Signal1D { grid, values })
}

/// Cumulative trapezoidal integrals at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    grid: Grid1D,
    cumulative: Vec<f64>,
}

impl CdfTable {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.cumulative
    }

    /// Linear interpolation of the table; 0 left of the grid, 1 right of it.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.grid.xmin() {
            return self.cumulative[0];
        }
        if x >= self.grid.xmax() {
            return 1.0;
        }
        self.grid.interpolate(&self.cumulative, x)
    }
}

pub fn cdf(p: &Signal1D) -> CdfTable {
    let grid = p.grid;
    let dx = grid.dx();
    let mut cumulative = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in p.values.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * dx;
        cumulative.push(acc);
    }
    let total = acc;
    for v in cumulative.iter_mut() {
        *v /= total;
    }
    *cumulative.last_mut().expect("grid has nodes") = 1.0;
    CdfTable { grid, cumulative }
}

/// Generalized inverse `sup { t : F(t) <= u }` of a cumulative table.
///
/// Inside a flat run of `F` the right end of the run is returned. At `u = 1`
/// the result is the right end of the support (the first node where `F`
/// reaches one) rather than the end of the grid.
pub fn quantile(table: &CdfTable, u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::OutOfRange(u));
    }
    let f = &table.cumulative;
    let grid = &table.grid;
    if u >= 1.0 - FLAT_TOL {
        let k = f.partition_point(|&v| v < 1.0 - FLAT_TOL);
        return Ok(grid.node(k.min(f.len() - 1)));
    }
    // last node with F <= u (+ slack); F[n-1] = 1 > u so k < n - 1
    let k = f.partition_point(|&v| v <= u + FLAT_TOL);
    if k == 0 {
        return Ok(grid.xmin());
    }
    let k = k - 1;
    let rise = f[k + 1] - f[k];
    let t = if rise > 0.0 { ((u - f[k]) / rise).clamp(0.0, 1.0) } else { 0.0 };
    Ok(grid.node(k) + t * grid.dx())
}

/// Smallest closed interval holding every node whose value exceeds `threshold`.
pub fn support_interval(p: &Signal1D, threshold: f64) -> Result<(f64, f64)> {
    let (first, last) = support_indices(p.values(), threshold).ok_or(Error::EmptySupport)?;
    Ok((p.grid.node(first), p.grid.node(last)))
}

pub(crate) fn support_indices(values: &[f64], threshold: f64) -> Option<(usize, usize)> {
    let first = values.iter().position(|&v| v > threshold)?;
    let last = values.iter().rposition(|&v| v > threshold)?;
    Some((first, last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(n: usize) -> Grid1D {
        Grid1D::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn grid_rejects_bad_bounds() {
        assert!(Grid1D::new(1.0, 0.0, 10).is_err());
        assert!(Grid1D::new(0.0, 1.0, 1).is_err());
        assert!(Grid1D::new(0.0, f64::INFINITY, 4).is_err());
        assert!(Grid1D::from_nodes(&[0.0, 0.1, 0.3]).is_err());
        assert_eq!(Grid1D::from_nodes(&[0.0, 0.5, 1.0]).unwrap(), unit(3));
    }

    #[test]
    fn normalize_keeps_unit_box() {
        let g = unit(101);
        let raw = vec![1.0; 101];
        let s = normalize(&raw, g).unwrap();
        assert_eq!(s.values(), &raw[..]);
    }

    #[test]
    fn normalize_halves_double_box() {
        let g = unit(101);
        let s = normalize(&vec![2.0; 101], g).unwrap();
        for v in s.values() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_errors() {
        let g = unit(5);
        assert_eq!(normalize(&[0.0; 5], g), Err(Error::AllZero));
        assert!(matches!(
            normalize(&[0.0, 1.0, -1e-3, 0.0, 0.0], g),
            Err(Error::NegativeMass { index: 2, .. })
        ));
        assert!(matches!(normalize(&[0.0; 4], g), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn cdf_of_uniform_is_identity() {
        let g = unit(101);
        let f = cdf(&Signal1D::uniform(g));
        for (x, v) in g.nodes().zip(f.values()) {
            assert_abs_diff_eq!(x, *v, epsilon = 1e-12);
        }
    }

    #[test]
    fn cdf_of_half_box() {
        let g = unit(1001);
        let p = Signal1D::boxes(g, &[(0.0, 0.5, 2.0)]).unwrap();
        let f = cdf(&p);
        for (x, v) in g.nodes().zip(f.values()) {
            assert!((v - (2.0 * x).min(1.0)).abs() <= 2.0 * g.dx(), "x={x} F={v}");
        }
        assert_eq!(*f.values().last().unwrap(), 1.0);
    }

    #[test]
    fn cdf_of_triangle_matches_antiderivative() {
        // density 4x on [0, 1/2], 4(1-x) on [1/2, 1]
        let g = unit(2048);
        let p = Signal1D::from_fn(g, |x| if x <= 0.5 { 4.0 * x } else { 4.0 * (1.0 - x) }).unwrap();
        let exact = |x: f64| if x <= 0.5 { 2.0 * x * x } else { 1.0 - 2.0 * (1.0 - x) * (1.0 - x) };
        let f = cdf(&p);
        for (x, v) in g.nodes().zip(f.values()) {
            assert!((v - exact(x)).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn quantile_cases() {
        let g = unit(101);
        let f = cdf(&Signal1D::uniform(g));
        assert_abs_diff_eq!(quantile(&f, 0.5).unwrap(), 0.5, epsilon = 1e-12);

        let half = cdf(&Signal1D::boxes(g, &[(0.0, 0.5, 2.0)]).unwrap());
        assert!((quantile(&half, 1.0).unwrap() - 0.5).abs() <= 2.0 * g.dx());

        assert_eq!(quantile(&f, 1.5), Err(Error::OutOfRange(1.5)));
        assert_eq!(quantile(&f, -0.1), Err(Error::OutOfRange(-0.1)));
    }

    #[test]
    fn quantile_in_gap_returns_right_end_of_flat_run() {
        let g = Grid1D::new(0.0, 1.5, 1501).unwrap();
        let p = Signal1D::boxes(g, &[(0.0, 0.5, 1.0), (1.0, 1.5, 1.0)]).unwrap();
        let f = cdf(&p);
        // brute force: scan a fine grid for the largest t with F(t) <= 1/2
        let fine = Grid1D::new(0.0, 1.5, 150_001).unwrap();
        let sup = fine.nodes().filter(|&t| f.eval(t) <= 0.5 + 1e-12).fold(f64::MIN, f64::max);
        let q = quantile(&f, 0.5).unwrap();
        assert!((q - sup).abs() <= 2.0 * g.dx(), "q={q} sup={sup}");
        assert!((q - 1.0).abs() <= 2.0 * g.dx());
    }

    #[test]
    fn support_cases() {
        let g = unit(101);
        let p = Signal1D::boxes(g, &[(0.2, 0.7, 1.0)]).unwrap();
        let (a, b) = support_interval(&p, 0.0).unwrap();
        assert_abs_diff_eq!(a, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 0.7, epsilon = 1e-12);

        let bump =
            Signal1D::from_fn(g, |x| (-(x - 0.5) * (x - 0.5) / (2.0 * 0.01)).exp()).unwrap();
        let (a, b) = support_interval(&bump, 1e-12).unwrap();
        assert_eq!((a, b), (0.0, 1.0));
    }

    #[test]
    fn empty_support() {
        let g = unit(11);
        let mut v = vec![0.0; 11];
        v[5] = 1e-20;
        let p = normalize(&v, g).unwrap();
        assert_eq!(support_interval(&p, 1e3), Err(Error::EmptySupport));
    }
}
