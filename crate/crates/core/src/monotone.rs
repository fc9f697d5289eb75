//! Strictly increasing cubic Hermite tables.
//!
//! Node slopes are kept inside the Fritsch–Carlson region, so the interpolant
//! is monotone between nodes and the swapped table (nodes and values
//! exchanged, slopes inverted) interpolates the inverse map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRecord", into = "TableRecord")]
pub struct MonotoneTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
    // running integral of the interpolant at each node
    area: Vec<f64>,
}

impl MonotoneTable {
    /// Table from nodes, values and slopes. Slopes are limited if needed.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, mut ds: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n || ds.len() != n {
            return Err(Error::InvalidDiffeo("table needs at least 2 aligned nodes".into()));
        }
        if xs.iter().chain(&ys).chain(&ds).any(|v| !v.is_finite()) {
            return Err(Error::InvalidDiffeo("table entries must be finite".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidDiffeo("table nodes must be strictly increasing".into()));
        }
        if ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NotInvertible("table values must be strictly increasing".into()));
        }
        if ds.iter().any(|&d| d <= 0.0) {
            return Err(Error::NotInvertible("table slopes must be positive".into()));
        }
        for k in 0..n - 1 {
            let secant = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
            let a = ds[k] / secant;
            let b = ds[k + 1] / secant;
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                ds[k] = tau * a * secant;
                ds[k + 1] = tau * b * secant;
            }
        }
        let mut table = Self { xs, ys, ds, area: Vec::new() };
        table.area = table.node_areas();
        Ok(table)
    }

    /// Samples `f` and its derivative `df` at `n` uniform nodes on `[lo, hi]`.
    pub fn from_fn(
        lo: f64,
        hi: f64,
        n: usize,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let xs = uniform_nodes(lo, hi, n);
        let ys = xs.iter().map(|&x| f(x)).collect();
        let ds = xs.iter().map(|&x| df(x)).collect();
        Self::new(xs, ys, ds)
    }

    /// Table from values alone; slopes come from the monotone
    /// (Fritsch–Butland) three-point estimate.
    pub fn from_values(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::InvalidDiffeo("table needs at least 2 aligned nodes".into()));
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let s: Vec<f64> = ys.windows(2).zip(&h).map(|(w, h)| (w[1] - w[0]) / h).collect();
        let mut ds = vec![0.0; n];
        ds[0] = s[0];
        ds[n - 1] = s[n - 2];
        for k in 1..n - 1 {
            let (w1, w2) = (2.0 * h[k] + h[k - 1], h[k] + 2.0 * h[k - 1]);
            ds[k] = if s[k - 1] > 0.0 && s[k] > 0.0 {
                (w1 + w2) / (w1 / s[k - 1] + w2 / s[k])
            } else {
                0.0
            };
        }
        Self::new(xs, ys, ds)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn range(&self) -> (f64, f64) {
        (self.ys[0], self.ys[self.ys.len() - 1])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn slopes(&self) -> &[f64] {
        &self.ds
    }

    fn locate(&self, x: f64) -> Result<(usize, f64, f64)> {
        let (lo, hi) = self.domain();
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if !(x >= lo - slack && x <= hi + slack) {
            return Err(Error::OutOfDomain { x, lo, hi });
        }
        let x = x.clamp(lo, hi);
        let k = self.xs.partition_point(|&v| v <= x).clamp(1, self.xs.len() - 1) - 1;
        let h = self.xs[k + 1] - self.xs[k];
        Ok((k, ((x - self.xs[k]) / h).clamp(0.0, 1.0), h))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (k, t, h) = self.locate(x)?;
        let (t2, t3) = (t * t, t * t * t);
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * self.ys[k]
            + (t3 - 2.0 * t2 + t) * h * self.ds[k]
            + (-2.0 * t3 + 3.0 * t2) * self.ys[k + 1]
            + (t3 - t2) * h * self.ds[k + 1])
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        let (k, t, h) = self.locate(x)?;
        let t2 = t * t;
        Ok((6.0 * t2 - 6.0 * t) / h * self.ys[k]
            + (3.0 * t2 - 4.0 * t + 1.0) * self.ds[k]
            + (-6.0 * t2 + 6.0 * t) / h * self.ys[k + 1]
            + (3.0 * t2 - 2.0 * t) * self.ds[k + 1])
    }

    /// Table of the inverse map.
    pub fn inverse(&self) -> Result<Self> {
        Self::new(self.ys.clone(), self.xs.clone(), self.ds.iter().map(|d| 1.0 / d).collect())
    }

    fn cell_integral(&self, k: usize, t: f64, h: f64) -> f64 {
        let (t2, t3, t4) = (t * t, t * t * t, t * t * t * t);
        h * ((0.5 * t4 - t3 + t) * self.ys[k]
            + (0.25 * t4 - 2.0 * t3 / 3.0 + 0.5 * t2) * h * self.ds[k]
            + (-0.5 * t4 + t3) * self.ys[k + 1]
            + (0.25 * t4 - t3 / 3.0) * h * self.ds[k + 1])
    }

    fn node_areas(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for k in 0..self.xs.len() - 1 {
            acc += self.cell_integral(k, 1.0, self.xs[k + 1] - self.xs[k]);
            out.push(acc);
        }
        out
    }

    /// Exact integral of the interpolant from the left end of the domain to `x`.
    pub fn integral_to(&self, x: f64) -> Result<f64> {
        let (k, t, h) = self.locate(x)?;
        Ok(self.area[k] + self.cell_integral(k, t, h))
    }
}

#[derive(Serialize, Deserialize)]
struct TableRecord {
    nodes: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl TryFrom<TableRecord> for MonotoneTable {
    type Error = Error;

    fn try_from(r: TableRecord) -> Result<Self> {
        Self::new(r.nodes, r.values, r.slopes)
    }
}

impl From<MonotoneTable> for TableRecord {
    fn from(t: MonotoneTable) -> Self {
        Self { nodes: t.xs, values: t.ys, slopes: t.ds }
    }
}

pub(crate) fn uniform_nodes(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

/// Root of an increasing function on `[lo, hi]` by safeguarded Newton steps.
pub(crate) fn invert_increasing(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    target: f64,
    mut lo: f64,
    mut hi: f64,
) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x) - target;
        if fx == 0.0 {
            return x;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = df(x);
        let mut next = if d > 0.0 { x - fx / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) || hi - lo <= 1e-15 * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics_exactly() {
        let f = |x: f64| x * x * x + x;
        let df = |x: f64| 3.0 * x * x + 1.0;
        let t = MonotoneTable::from_fn(-1.0, 2.0, 7, f, df).unwrap();
        for x in [-1.0, -0.3, 0.0, 0.77, 1.999, 2.0] {
            assert!((t.eval(x).unwrap() - f(x)).abs() < 1e-12);
            assert!((t.derivative(x).unwrap() - df(x)).abs() < 1e-11);
        }
        // ∫_{-1}^{x} (x^3 + x)
        let anti = |x: f64| x.powi(4) / 4.0 + x * x / 2.0 - 0.75;
        assert!((t.integral_to(1.3).unwrap() - anti(1.3)).abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trips() {
        let t = MonotoneTable::from_fn(1.0, 2.0, 4096, |x| x * x, |x| 2.0 * x).unwrap();
        let inv = t.inverse().unwrap();
        for x in [1.0, 1.234, 1.5, 1.9999] {
            let y = t.eval(x).unwrap();
            assert!((inv.eval(y).unwrap() - x).abs() < 1e-12);
        }
        assert!((t.derivative(1.5).unwrap() - 3.0).abs() < 1e-4);
    }

    #[test]
    fn rejects_non_monotone() {
        assert!(MonotoneTable::from_values(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 1.0]).is_err());
        assert!(MonotoneTable::from_values(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        let t = MonotoneTable::from_values(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!(matches!(t.eval(1.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn newton_inverts_polynomial() {
        let x = invert_increasing(|x| x + 0.1 * x * x, |x| 1.0 + 0.2 * x, 1.1, 0.0, 1.0);
        assert!((x - 1.0).abs() < 1e-14);
    }
}
