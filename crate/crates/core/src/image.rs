//! 2D uniform grids and unit-mass images.
//!
//! Values are stored x-major: the sample at `(x_i, y_j)` lives at `i * ny + j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Grid1D;

pub const IMAGE_MASS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    x: Grid1D,
    y: Grid1D,
}

impl Grid2D {
    pub fn new(xmin: f64, xmax: f64, nx: usize, ymin: f64, ymax: f64, ny: usize) -> Result<Self> {
        Ok(Self { x: Grid1D::new(xmin, xmax, nx)?, y: Grid1D::new(ymin, ymax, ny)? })
    }

    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(lo, hi, n, lo, hi, n)
    }

    pub fn from_axes(x: Grid1D, y: Grid1D) -> Self {
        Self { x, y }
    }

    pub fn x_axis(&self) -> &Grid1D {
        &self.x
    }

    pub fn y_axis(&self) -> &Grid1D {
        &self.y
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.ny() + iy
    }

    pub fn point(&self, k: usize) -> [f64; 2] {
        let (ix, iy) = (k / self.ny(), k % self.ny());
        [self.x.node(ix), self.y.node(iy)]
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.len()).map(move |k| self.point(k))
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.x.weight(k / self.ny()) * self.y.weight(k % self.ny())
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().enumerate().map(|(k, v)| v * self.weight(k)).sum()
    }

    /// Larger of the two node spacings.
    pub fn cell(&self) -> f64 {
        self.x.dx().max(self.y.dx())
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.x.contains(p[0]) && self.y.contains(p[1])
    }

    /// Bilinear interpolation of node values, zero outside the grid.
    pub fn interpolate(&self, values: &[f64], p: [f64; 2]) -> f64 {
        let (Some((i, s)), Some((j, t))) = (self.x.locate(p[0]), self.y.locate(p[1])) else {
            return 0.0;
        };
        let v = |a: usize, b: usize| values[self.index(a, b)];
        (1.0 - s) * ((1.0 - t) * v(i, j) + t * v(i, j + 1))
            + s * ((1.0 - t) * v(i + 1, j) + t * v(i + 1, j + 1))
    }

    /// Grid with the same resolution spanning an axis-aligned box.
    pub fn with_box(lo: [f64; 2], hi: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        Self::new(lo[0], hi[0], nx, lo[1], hi[1], ny)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Image2D {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        check(&grid, &values)?;
        let mass = grid.integrate(&values);
        if mass <= 0.0 {
            return Err(Error::AllZero);
        }
        if (mass - 1.0).abs() > IMAGE_MASS_TOL {
            return Err(Error::Precondition(format!("image mass {mass} is not 1")));
        }
        Ok(Self { grid, values })
    }

    pub fn normalize(grid: Grid2D, raw: Vec<f64>) -> Result<Self> {
        check(&grid, &raw)?;
        let mass = grid.integrate(&raw);
        if mass <= 0.0 {
            return Err(Error::AllZero);
        }
        if (mass - 1.0).abs() <= 1e-12 {
            return Ok(Self { grid, values: raw });
        }
        Ok(Self { grid, values: raw.into_iter().map(|v| v / mass).collect() })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let raw = grid.points().map(|[x, y]| f(x, y)).collect();
        Self::normalize(grid, raw)
    }

    /// Normalized indicator of the box `[lo, hi]`.
    pub fn uniform_box(grid: Grid2D, lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        let eps = 1e-12;
        Self::from_fn(grid, |x, y| {
            let inside = x >= lo[0] - eps && x <= hi[0] + eps && y >= lo[1] - eps && y <= hi[1] + eps;
            if inside {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        self.grid.interpolate(&self.values, p)
    }

    /// Bounding box `(lo, hi)` of the nodes with value above `threshold`.
    pub fn support_box(&self, threshold: f64) -> Result<([f64; 2], [f64; 2])> {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for (k, &v) in self.values.iter().enumerate() {
            if v > threshold {
                let p = self.grid.point(k);
                for d in 0..2 {
                    lo[d] = lo[d].min(p[d]);
                    hi[d] = hi[d].max(p[d]);
                }
            }
        }
        if lo[0] > hi[0] {
            return Err(Error::EmptySupport);
        }
        Ok((lo, hi))
    }
}

fn check(grid: &Grid2D, values: &[f64]) -> Result<()> {
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_reproduces_affine_functions() {
        let g = Grid2D::new(-1.0, 1.0, 9, 0.0, 2.0, 5).unwrap();
        let vals: Vec<f64> = g.points().map(|[x, y]| 2.0 + x - 0.5 * y).collect();
        for p in [[0.13, 0.77], [-0.99, 1.99], [1.0, 2.0], [-1.0, 0.0]] {
            let want = 2.0 + p[0] - 0.5 * p[1];
            assert!((g.interpolate(&vals, p) - want).abs() < 1e-12);
        }
        assert_eq!(g.interpolate(&vals, [1.5, 0.0]), 0.0);
    }

    #[test]
    fn uniform_box_has_unit_mass() {
        let g = Grid2D::square(-1.0, 1.0, 41).unwrap();
        let img = Image2D::uniform_box(g, [-0.5, -0.5], [0.5, 0.5]).unwrap();
        assert!((img.mass() - 1.0).abs() < 1e-12);
        let (lo, hi) = img.support_box(0.0).unwrap();
        assert!((lo[0] + 0.5).abs() < 1e-12 && (hi[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_values() {
        let g = Grid2D::square(0.0, 1.0, 3).unwrap();
        assert_eq!(Image2D::normalize(g, vec![0.0; 9]), Err(Error::AllZero));
        assert!(Image2D::normalize(g, vec![1.0; 8]).is_err());
        let mut v = vec![1.0; 9];
        v[4] = -1.0;
        assert!(matches!(Image2D::normalize(g, v), Err(Error::NegativeMass { index: 4, .. })));
    }
}
