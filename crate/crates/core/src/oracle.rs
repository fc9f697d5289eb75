//! Independent optimal-transport solvers used to cross-check the transforms:
//! exact 1D quantile integration and a discrete Kantorovich solver.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Grid2D, Image2D};
use crate::lot::TransportMap2D;
use crate::signal::Signal1D;

/// Hard cap on positive-mass points per side of the discrete problem.
pub const MAX_LP_POINTS: usize = 400;
/// Dual feasibility residual certified for every returned plan.
pub const DUAL_TOL: f64 = 1e-7;

/// Exact quantile of the piecewise-linear interpolant of `p`.
struct ExactQuantile<'a> {
    p: &'a Signal1D,
    cumulative: Vec<f64>,
}

impl<'a> ExactQuantile<'a> {
    fn new(p: &'a Signal1D) -> Self {
        let v = p.values();
        let dx = p.grid().dx();
        let mut cumulative = vec![0.0];
        for w in v.windows(2) {
            let last = *cumulative.last().expect("nonempty");
            cumulative.push(last + 0.5 * (w[0] + w[1]) * dx);
        }
        Self { p, cumulative }
    }

    fn at(&self, u: f64) -> f64 {
        let total = *self.cumulative.last().expect("nonempty");
        let target = u * total;
        let k = self.cumulative.partition_point(|&c| c <= target).clamp(1, self.cumulative.len() - 1) - 1;
        let grid = self.p.grid();
        let (p0, p1) = (self.p.values()[k], self.p.values()[k + 1]);
        let dx = grid.dx();
        // p0·s + (p1 − p0)·s²/(2dx) = target − C_k, solved without cancellation
        let rest = (target - self.cumulative[k]).max(0.0);
        let a = (p1 - p0) / (2.0 * dx);
        let disc = (p0 * p0 + 4.0 * a * rest).max(0.0);
        let denom = p0 + disc.sqrt();
        let s = if denom > 0.0 { (2.0 * rest / denom).min(dx) } else { 0.0 };
        grid.node(k) + s
    }
}

/// `W₂(p, q)` from `m` midpoint nodes of `∫₀¹ (F_p⁻¹(u) − F_q⁻¹(u))² du`,
/// with each quantile computed exactly for the linear interpolant.
pub fn w2_quantile_oracle(p: &Signal1D, q: &Signal1D, m: usize) -> Result<f64> {
    if m < 100 {
        return Err(Error::Precondition(format!("need at least 100 quadrature nodes, got {m}")));
    }
    let (fp, fq) = (ExactQuantile::new(p), ExactQuantile::new(q));
    let du = 1.0 / m as f64;
    let sum: f64 = (0..m)
        .map(|j| {
            let u = (j as f64 + 0.5) * du;
            (fp.at(u) - fq.at(u)).powi(2)
        })
        .sum();
    Ok((sum * du).sqrt())
}

/// A discrete coupling between the positive-mass nodes of two images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanRecord")]
pub struct CouplingPlan {
    pub source_grid: Grid2D,
    /// Node index in `source_grid` of each source point.
    pub source_index: Vec<usize>,
    pub source_points: Vec<([f64; 2], f64)>,
    pub target_points: Vec<([f64; 2], f64)>,
    /// Nonzero entries `(i, j, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Largest violation of `c_ij − u_i − v_j ≥ 0` under the final duals.
    pub dual_residual: f64,
}

#[derive(Deserialize)]
struct PlanRecord {
    source_grid: Grid2D,
    source_index: Vec<usize>,
    source_points: Vec<([f64; 2], f64)>,
    target_points: Vec<([f64; 2], f64)>,
    entries: Vec<(usize, usize, f64)>,
    cost: f64,
    dual_residual: f64,
}

impl TryFrom<PlanRecord> for CouplingPlan {
    type Error = Error;

    fn try_from(r: PlanRecord) -> Result<Self> {
        let plan = Self {
            source_grid: r.source_grid,
            source_index: r.source_index,
            source_points: r.source_points,
            target_points: r.target_points,
            entries: r.entries,
            cost: r.cost,
            dual_residual: r.dual_residual,
        };
        plan.validate()?;
        Ok(plan)
    }
}

/// Row and column sums must match the marginals to this tolerance.
pub const MARGINAL_TOL: f64 = 1e-9;

impl CouplingPlan {
    /// Checks indices, finiteness, and marginals.
    pub fn validate(&self) -> Result<()> {
        if self.source_index.len() != self.source_points.len() {
            return Err(Error::LengthMismatch { expected: self.source_points.len(), got: self.source_index.len() });
        }
        if let Some(&k) = self.source_index.iter().find(|&&k| k >= self.source_grid.len()) {
            return Err(Error::Infeasible(format!("source index {k} outside the grid")));
        }
        let points = self.source_points.iter().chain(&self.target_points);
        if points.clone().any(|(x, m)| !(x[0].is_finite() && x[1].is_finite() && m.is_finite() && *m >= 0.0)) {
            return Err(Error::Infeasible("point coordinates and masses must be finite and nonnegative".into()));
        }
        for &(i, j, m) in &self.entries {
            if i >= self.source_points.len() || j >= self.target_points.len() {
                return Err(Error::Infeasible(format!("entry ({i}, {j}) outside the plan")));
            }
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::Infeasible(format!("entry ({i}, {j}) has mass {m}")));
            }
        }
        if !(self.cost.is_finite() && self.dual_residual.is_finite()) {
            return Err(Error::Infeasible("cost must be finite".into()));
        }
        let err = self.marginal_error();
        if err > MARGINAL_TOL {
            return Err(Error::Infeasible(format!("marginals off by {err}")));
        }
        Ok(())
    }

    /// Largest deviation of row and column sums from the marginals.
    pub fn marginal_error(&self) -> f64 {
        let mut rows: Vec<f64> = self.source_points.iter().map(|p| -p.1).collect();
        let mut cols: Vec<f64> = self.target_points.iter().map(|p| -p.1).collect();
        for &(i, j, m) in &self.entries {
            rows[i] += m;
            cols[j] += m;
        }
        rows.iter().chain(&cols).fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Mass-weighted mean of assigned targets at each source node.
    pub fn barycentric_map(&self) -> Result<TransportMap2D> {
        let mut acc = vec![([0.0, 0.0], 0.0); self.source_points.len()];
        for &(i, j, m) in &self.entries {
            let y = self.target_points[j].0;
            acc[i].0[0] += m * y[0];
            acc[i].0[1] += m * y[1];
            acc[i].1 += m;
        }
        let mut values = vec![None; self.source_grid.len()];
        for (i, (sum, mass)) in acc.into_iter().enumerate() {
            if mass > 0.0 {
                values[self.source_index[i]] = Some([sum[0] / mass, sum[1] / mass]);
            }
        }
        TransportMap2D::new(self.source_grid, values, false)
    }
}

fn positive_points(img: &Image2D) -> (Vec<usize>, Vec<([f64; 2], f64)>) {
    let g = img.grid();
    let mut index = Vec::new();
    let mut points = Vec::new();
    for (k, &v) in img.values().iter().enumerate() {
        let m = v * g.weight(k);
        if m > 0.0 {
            index.push(k);
            points.push((g.point(k), m));
        }
    }
    let total: f64 = points.iter().map(|p| p.1).sum();
    for p in &mut points {
        p.1 /= total;
    }
    (index, points)
}

/// Exact optimal coupling for squared Euclidean cost between the node masses
/// of two images, by the transportation simplex with potential pricing.
pub fn kantorovich_lp_2d(source: &Image2D, target: &Image2D, max_points: usize) -> Result<CouplingPlan> {
    let cap = max_points.min(MAX_LP_POINTS);
    let (source_index, sources) = positive_points(source);
    let (_, targets) = positive_points(target);
    for n in [sources.len(), targets.len()] {
        if n > cap {
            return Err(Error::TooLarge { points: n, cap });
        }
        if n == 0 {
            return Err(Error::Infeasible("an image has no positive mass".into()));
        }
    }
    let supply: Vec<f64> = sources.iter().map(|p| p.1).collect();
    let demand: Vec<f64> = targets.iter().map(|p| p.1).collect();
    let mismatch = (supply.iter().sum::<f64>() - demand.iter().sum::<f64>()).abs();
    if mismatch > 1e-9 {
        return Err(Error::Infeasible(format!("marginals differ by {mismatch}")));
    }
    let n = targets.len();
    let table: Vec<f64> = sources
        .iter()
        .flat_map(|(a, _)| targets.iter().map(move |(b, _)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)))
        .collect();
    let scale = table.iter().fold(0.0f64, |a, &b| a.max(b)) * 1e-9;
    let tied: Vec<f64> = table.iter().enumerate().map(|(k, c)| c + scale * jitter(k as u64)).collect();
    let tied_cost = |i: usize, j: usize| tied[i * n + j];
    let cost = |i: usize, j: usize| table[i * n + j];
    // fixed tie-breaking first, so equivalent instances land on the same vertex
    let mut solver = Simplex::new(supply, demand, &tied_cost);
    solver.solve(&tied_cost)?;
    solver.solve(&cost)?;
    let entries: Vec<(usize, usize, f64)> =
        solver.basis.iter().filter(|c| c.flow > 0.0).map(|c| (c.i, c.j, c.flow)).collect();
    let total = entries.iter().map(|&(i, j, m)| m * cost(i, j)).sum();
    let dual_residual = solver.dual_residual(&cost);
    Ok(CouplingPlan {
        source_grid: *source.grid(),
        source_index,
        source_points: sources,
        target_points: targets,
        entries,
        cost: total,
        dual_residual,
    })
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    i: usize,
    j: usize,
    flow: f64,
}

/// Transportation simplex on a spanning-tree basis of `m + n − 1` cells.
struct Simplex {
    m: usize,
    n: usize,
    basis: Vec<Cell>,
    // basis cells touching each row / column
    row_cells: Vec<Vec<usize>>,
    col_cells: Vec<Vec<usize>>,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl Simplex {
    /// Least-cost starting basis. Each allocation retires exactly one line,
    /// keeping the last row (or column) open until the final allocation, so
    /// the basis is a spanning tree even under degeneracy.
    fn new(mut supply: Vec<f64>, mut demand: Vec<f64>, cost: &impl Fn(usize, usize) -> f64) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let mut order: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
        order.sort_by(|a, b| cost(a.0, a.1).total_cmp(&cost(b.0, b.1)).then(a.cmp(b)));
        let (mut row_open, mut col_open) = (vec![true; m], vec![true; n]);
        let (mut rows_left, mut cols_left) = (m, n);
        let mut basis = Vec::with_capacity(m + n - 1);
        for (i, j) in order {
            if !(row_open[i] && col_open[j]) {
                continue;
            }
            let x = supply[i].min(demand[j]).max(0.0);
            supply[i] -= x;
            demand[j] -= x;
            basis.push(Cell { i, j, flow: x });
            if rows_left == 1 && cols_left == 1 {
                break;
            }
            let retire_row = if rows_left == 1 {
                false
            } else if cols_left == 1 {
                true
            } else {
                supply[i] <= demand[j]
            };
            if retire_row {
                row_open[i] = false;
                rows_left -= 1;
            } else {
                col_open[j] = false;
                cols_left -= 1;
            }
        }
        let mut s = Self {
            m,
            n,
            basis,
            row_cells: vec![Vec::new(); m],
            col_cells: vec![Vec::new(); n],
            u: vec![0.0; m],
            v: vec![0.0; n],
        };
        for (b, c) in s.basis.iter().enumerate() {
            s.row_cells[c.i].push(b);
            s.col_cells[c.j].push(b);
        }
        s
    }

    /// Solves `u_i + v_j = c_ij` over the basis tree from `u_0 = 0`.
    fn potentials(&mut self, cost: &impl Fn(usize, usize) -> f64) {
        let mut row_done = vec![false; self.m];
        let mut col_done = vec![false; self.n];
        let mut queue = VecDeque::new();
        for root in 0..self.m {
            if row_done[root] {
                continue;
            }
            self.u[root] = 0.0;
            row_done[root] = true;
            queue.push_back((true, root));
            while let Some((is_row, k)) = queue.pop_front() {
                let cells = if is_row { &self.row_cells[k] } else { &self.col_cells[k] };
                for &b in cells {
                    let Cell { i, j, .. } = self.basis[b];
                    if is_row && !col_done[j] {
                        self.v[j] = cost(i, j) - self.u[i];
                        col_done[j] = true;
                        queue.push_back((false, j));
                    } else if !is_row && !row_done[i] {
                        self.u[i] = cost(i, j) - self.v[j];
                        row_done[i] = true;
                        queue.push_back((true, i));
                    }
                }
            }
        }
    }

    /// Basis cells on the tree path from column `j` to row `i`, in order.
    fn path(&self, i: usize, j: usize) -> Vec<usize> {
        // nodes: rows 0..m, columns m..m+n; parent edge per node
        let total = self.m + self.n;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; total];
        let mut seen = vec![false; total];
        let start = self.m + j;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            if node == i {
                break;
            }
            let cells = if node < self.m { &self.row_cells[node] } else { &self.col_cells[node - self.m] };
            for &b in cells {
                let c = self.basis[b];
                let next = if node < self.m { self.m + c.j } else { c.i };
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, b));
                    queue.push_back(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = i;
        while node != start {
            let (prev, b) = parent[node].expect("basis is a spanning tree");
            cells.push(b);
            node = prev;
        }
        cells.reverse();
        cells
    }

    fn solve(&mut self, cost: &impl Fn(usize, usize) -> f64) -> Result<()> {
        let max_iter = 200 * (self.m + self.n) * (self.m + self.n).max(10);
        for _ in 0..max_iter {
            self.potentials(cost);
            let mut best = (0.0, 0, 0);
            for i in 0..self.m {
                for j in 0..self.n {
                    let d = cost(i, j) - self.u[i] - self.v[j];
                    if d < best.0 {
                        best = (d, i, j);
                    }
                }
            }
            if best.0 >= -1e-12 {
                return Ok(());
            }
            let (_, ei, ej) = best;
            let path = self.path(ei, ej);
            // signs alternate −, +, −, ... starting at the column of the entering cell
            let (mut theta, mut leave) = (f64::INFINITY, usize::MAX);
            for (k, &b) in path.iter().enumerate() {
                if k % 2 == 0 && self.basis[b].flow < theta {
                    theta = self.basis[b].flow;
                    leave = b;
                }
            }
            for (k, &b) in path.iter().enumerate() {
                if k % 2 == 0 {
                    self.basis[b].flow = (self.basis[b].flow - theta).max(0.0);
                } else {
                    self.basis[b].flow += theta;
                }
            }
            let old = self.basis[leave];
            self.row_cells[old.i].retain(|&b| b != leave);
            self.col_cells[old.j].retain(|&b| b != leave);
            self.basis[leave] = Cell { i: ei, j: ej, flow: theta };
            self.row_cells[ei].push(leave);
            self.col_cells[ej].push(leave);
        }
        self.potentials(cost);
        if self.dual_residual(cost) <= DUAL_TOL {
            return Ok(());
        }
        Err(Error::Infeasible("simplex hit its iteration cap".into()))
    }

    fn dual_residual(&self, cost: &impl Fn(usize, usize) -> f64) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.m {
            for j in 0..self.n {
                worst = worst.max(self.u[i] + self.v[j] - cost(i, j));
            }
        }
        worst
    }
}

fn jitter(k: u64) -> f64 {
    crate::lab::mix64(k) as f64 / u64::MAX as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Grid1D;

    #[test]
    fn quantile_oracle_cases() {
        let g = Grid1D::new(-0.5, 1.5, 2001).unwrap();
        let p = Signal1D::boxes(g, &[(0.0, 1.0, 1.0)]).unwrap();
        let q = Signal1D::boxes(g, &[(0.4, 1.4, 1.0)]).unwrap();
        assert_eq!(w2_quantile_oracle(&p, &p, 1000).unwrap(), 0.0);
        assert!((w2_quantile_oracle(&p, &q, 10_000).unwrap() - 0.4).abs() < 1e-6);
        let u = Grid1D::new(0.0, 1.0, 8001).unwrap();
        let a = Signal1D::uniform(u);
        let b = Signal1D::boxes(u, &[(0.0, 0.5, 2.0)]).unwrap();
        let want = 1.0 / (2.0 * 3f64.sqrt());
        assert!((w2_quantile_oracle(&a, &b, 10_000).unwrap() - want).abs() < 1e-4);
        assert!(w2_quantile_oracle(&a, &b, 10).is_err());
    }

    #[test]
    fn exact_quantile_of_a_ramp() {
        // p(x) = 2x on [0, 1]: F⁻¹(u) = √u, reproduced exactly by the quadratic solve
        let g = Grid1D::new(0.0, 1.0, 11).unwrap();
        let p = Signal1D::from_fn(g, |x| 2.0 * x).unwrap();
        let q = ExactQuantile::new(&p);
        for u in [0.01, 0.3, 0.77] {
            assert!((q.at(u) - u.sqrt()).abs() < 1e-12);
        }
    }

    fn cells(n: usize) -> Grid2D {
        Grid2D::square(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn identical_images_couple_diagonally() {
        let img = Image2D::from_fn(cells(6), |x, y| 1.0 + x + 2.0 * y * y).unwrap();
        let plan = kantorovich_lp_2d(&img, &img, 400).unwrap();
        assert!(plan.cost.abs() < 1e-15);
        assert!(plan.marginal_error() < 1e-12);
        assert!(plan.dual_residual <= DUAL_TOL);
        let t = plan.barycentric_map().unwrap();
        for (k, v) in t.values().iter().enumerate() {
            let (v, p) = (v.unwrap(), img.grid().point(k));
            assert!((v[0] - p[0]).abs() < 1e-15 && (v[1] - p[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn translation_by_one_cell() {
        // interior masses on an 8 × 8 grid, moved one column right
        let g = cells(8);
        let h = g.x_axis().dx();
        let blob = |shift: usize| {
            let raw: Vec<f64> = (0..g.len())
                .map(|k| {
                    let (i, j) = (k / 8, k % 8);
                    if (2 + shift..5 + shift).contains(&i) && (2..6).contains(&j) {
                        1.0 + (i - shift) as f64 + 0.5 * j as f64
                    } else {
                        0.0
                    }
                })
                .collect();
            Image2D::normalize(g, raw).unwrap()
        };
        let plan = kantorovich_lp_2d(&blob(0), &blob(1), 400).unwrap();
        assert!((plan.cost - h * h).abs() < 1e-12);
        let t = plan.barycentric_map().unwrap();
        for (k, v) in t.values().iter().enumerate() {
            if let Some(v) = v {
                let p = g.point(k);
                assert!((v[0] - p[0] - h).abs() < 1e-12 && (v[1] - p[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn too_large_is_rejected() {
        let img = Image2D::uniform_box(cells(21), [0.0, 0.0], [1.0, 1.0]).unwrap();
        assert!(matches!(kantorovich_lp_2d(&img, &img, 400), Err(Error::TooLarge { points: 441, cap: 400 })));
    }
}
