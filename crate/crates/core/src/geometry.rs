//! Bounded domains in one and two dimensions and uniform tensor grids on them.
//!
//! Supported geometries: an interval, an axis-aligned rectangle, and the
//! region above a C^2 graph y > gamma(x) clipped to a rectangle.  Nodes are
//! tensor-product with uniform spacing per axis; every node flagged as
//! boundary lies within half a spacing of the true boundary.

use crate::error::{Error, Result};
use std::sync::Arc;

/// Points are stored as `[f64; 2]`; one-dimensional geometry uses index 0
/// and keeps index 1 at zero.
pub type Point = [f64; 2];

pub fn norm(p: &Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

/// A scalar function with first and second derivative evaluators.
#[derive(Clone)]
pub struct C2Scalar {
    value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    d1: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    d2: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl C2Scalar {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            d1: Arc::new(d1),
            d2: Arc::new(d2),
        }
    }

    /// Derivatives by central differences when only values are available.
    pub fn from_values(f: impl Fn(f64) -> f64 + Send + Sync + Clone + 'static) -> Self {
        let h = 1e-5;
        let f1 = f.clone();
        let f2 = f.clone();
        Self {
            value: Arc::new(f),
            d1: Arc::new(move |x| (f1(x + h) - f1(x - h)) / (2.0 * h)),
            d2: Arc::new(move |x| (f2(x + h) - 2.0 * f2(x) + f2(x - h)) / (h * h)),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, |_| 0.0, |_| 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.value)(x)
    }
    pub fn deriv(&self, x: f64) -> f64 {
        (self.d1)(x)
    }
    pub fn second_deriv(&self, x: f64) -> f64 {
        (self.d2)(x)
    }
}

#[derive(Clone)]
pub enum SpatialDomain {
    Interval {
        x_lo: f64,
        x_hi: f64,
    },
    Rectangle {
        x_lo: f64,
        x_hi: f64,
        y_lo: f64,
        y_hi: f64,
    },
    /// { (x, y) : x_lo < x < x_hi, gamma(x) < y < y_hi }.
    HalfGraph {
        x_lo: f64,
        x_hi: f64,
        y_hi: f64,
        gamma: C2Scalar,
    },
}

impl SpatialDomain {
    pub fn interval(x_lo: f64, x_hi: f64) -> Result<Self> {
        if !(x_lo < x_hi) {
            return Err(Error::Grid(format!(
                "interval requires x_lo < x_hi, got [{x_lo}, {x_hi}]"
            )));
        }
        Ok(SpatialDomain::Interval { x_lo, x_hi })
    }

    pub fn rectangle(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        if !(x_lo < x_hi && y_lo < y_hi) {
            return Err(Error::Grid(format!(
                "rectangle requires x_lo < x_hi and y_lo < y_hi, got [{x_lo},{x_hi}]x[{y_lo},{y_hi}]"
            )));
        }
        Ok(SpatialDomain::Rectangle {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        })
    }

    pub fn half_graph(x_lo: f64, x_hi: f64, y_hi: f64, gamma: C2Scalar) -> Result<Self> {
        if !(x_lo < x_hi) {
            return Err(Error::Grid("half-graph requires x_lo < x_hi".into()));
        }
        // gamma must stay below the top on a dense sample.
        for i in 0..=256 {
            let x = x_lo + (x_hi - x_lo) * i as f64 / 256.0;
            let g = gamma.eval(x);
            if !g.is_finite() {
                return Err(Error::Grid(format!("gamma unbounded at x = {x}")));
            }
            if g >= y_hi {
                return Err(Error::Grid(format!(
                    "gamma(x) = {g} >= y_hi = {y_hi} at x = {x}"
                )));
            }
        }
        Ok(SpatialDomain::HalfGraph {
            x_lo,
            x_hi,
            y_hi,
            gamma,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            SpatialDomain::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match self {
            SpatialDomain::Interval { x_lo, x_hi } => p[0] > *x_lo && p[0] < *x_hi,
            SpatialDomain::Rectangle {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => p[0] > *x_lo && p[0] < *x_hi && p[1] > *y_lo && p[1] < *y_hi,
            SpatialDomain::HalfGraph {
                x_lo,
                x_hi,
                y_hi,
                gamma,
            } => p[0] > *x_lo && p[0] < *x_hi && p[1] < *y_hi && p[1] > gamma.eval(p[0]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryFlag {
    Interior,
    Boundary,
}

/// Uniform tensor grid over a domain.
#[derive(Clone)]
pub struct Grid {
    pub dim: usize,
    /// Node counts per axis (axis 1 count is 1 in one dimension).
    pub counts: [usize; 2],
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub nodes: Vec<Point>,
    pub flags: Vec<BoundaryFlag>,
    /// Inward unit normals for boundary nodes (zero vector for interior).
    pub normals: Vec<Point>,
    tensor_to_node: Vec<Option<usize>>,
    node_to_tensor: Vec<(usize, usize)>,
}

impl Grid {
    /// Build a grid with the given cell counts per axis (nodes = cells + 1).
    pub fn on_domain(domain: &SpatialDomain, cells: [usize; 2]) -> Result<Grid> {
        match domain {
            SpatialDomain::Interval { x_lo, x_hi } => {
                let n = cells[0];
                if n < 2 {
                    return Err(Error::Grid("need at least 2 cells".into()));
                }
                let h = (x_hi - x_lo) / n as f64;
                let mut nodes = Vec::with_capacity(n + 1);
                let mut flags = Vec::with_capacity(n + 1);
                let mut normals = Vec::with_capacity(n + 1);
                for i in 0..=n {
                    nodes.push([x_lo + i as f64 * h, 0.0]);
                    if i == 0 {
                        flags.push(BoundaryFlag::Boundary);
                        normals.push([1.0, 0.0]);
                    } else if i == n {
                        flags.push(BoundaryFlag::Boundary);
                        normals.push([-1.0, 0.0]);
                    } else {
                        flags.push(BoundaryFlag::Interior);
                        normals.push([0.0, 0.0]);
                    }
                }
                Ok(Grid {
                    dim: 1,
                    counts: [n + 1, 1],
                    origin: [*x_lo, 0.0],
                    spacing: [h, 1.0],
                    tensor_to_node: (0..=n).map(Some).collect(),
                    node_to_tensor: (0..=n).map(|i| (i, 0)).collect(),
                    nodes,
                    flags,
                    normals,
                })
            }
            SpatialDomain::Rectangle {
                x_lo,
                x_hi,
                y_lo,
                y_hi,
            } => {
                let (nx, ny) = (cells[0], cells[1]);
                if nx < 2 || ny < 2 {
                    return Err(Error::Grid("need at least 2 cells per axis".into()));
                }
                let hx = (x_hi - x_lo) / nx as f64;
                let hy = (y_hi - y_lo) / ny as f64;
                let mut grid = Grid {
                    dim: 2,
                    counts: [nx + 1, ny + 1],
                    origin: [*x_lo, *y_lo],
                    spacing: [hx, hy],
                    nodes: Vec::new(),
                    flags: Vec::new(),
                    normals: Vec::new(),
                    tensor_to_node: vec![None; (nx + 1) * (ny + 1)],
                    node_to_tensor: Vec::new(),
                };
                for j in 0..=ny {
                    for i in 0..=nx {
                        let id = grid.nodes.len();
                        grid.tensor_to_node[j * (nx + 1) + i] = Some(id);
                        grid.node_to_tensor.push((i, j));
                        grid.nodes
                            .push([x_lo + i as f64 * hx, y_lo + j as f64 * hy]);
                        let mut n = [0.0, 0.0];
                        if i == 0 {
                            n[0] += 1.0;
                        }
                        if i == nx {
                            n[0] -= 1.0;
                        }
                        if j == 0 {
                            n[1] += 1.0;
                        }
                        if j == ny {
                            n[1] -= 1.0;
                        }
                        let len = norm(&n);
                        if len > 0.0 {
                            grid.flags.push(BoundaryFlag::Boundary);
                            grid.normals.push([n[0] / len, n[1] / len]);
                        } else {
                            grid.flags.push(BoundaryFlag::Interior);
                            grid.normals.push([0.0, 0.0]);
                        }
                    }
                }
                Ok(grid)
            }
            SpatialDomain::HalfGraph {
                x_lo,
                x_hi,
                y_hi,
                gamma,
            } => {
                let (nx, ny) = (cells[0], cells[1]);
                if nx < 2 || ny < 2 {
                    return Err(Error::Grid("need at least 2 cells per axis".into()));
                }
                // Vertical extent spans from the lowest graph value to the top.
                let mut g_min = f64::INFINITY;
                for i in 0..=nx {
                    let x = x_lo + (x_hi - x_lo) * i as f64 / nx as f64;
                    g_min = g_min.min(gamma.eval(x));
                }
                let hx = (x_hi - x_lo) / nx as f64;
                let hy = (y_hi - g_min) / ny as f64;
                let mut grid = Grid {
                    dim: 2,
                    counts: [nx + 1, ny + 1],
                    origin: [*x_lo, g_min],
                    spacing: [hx, hy],
                    nodes: Vec::new(),
                    flags: Vec::new(),
                    normals: Vec::new(),
                    tensor_to_node: vec![None; (nx + 1) * (ny + 1)],
                    node_to_tensor: Vec::new(),
                };
                for j in 0..=ny {
                    for i in 0..=nx {
                        let x = x_lo + i as f64 * hx;
                        let y = g_min + j as f64 * hy;
                        let g = gamma.eval(x);
                        if y < g - 1e-12 {
                            continue;
                        }
                        let id = grid.nodes.len();
                        grid.tensor_to_node[j * (nx + 1) + i] = Some(id);
                        grid.node_to_tensor.push((i, j));
                        grid.nodes.push([x, y]);
                        let mut n = [0.0, 0.0];
                        if i == 0 {
                            n[0] += 1.0;
                        }
                        if i == nx {
                            n[0] -= 1.0;
                        }
                        if j == ny {
                            n[1] -= 1.0;
                        }
                        // Bottom nodes within half a spacing of the graph.
                        if y - g <= 0.5 * hy {
                            let gp = gamma.deriv(x);
                            let len = (1.0 + gp * gp).sqrt();
                            n[0] += -gp / len;
                            n[1] += 1.0 / len;
                        }
                        let len = norm(&n);
                        if len > 0.0 {
                            grid.flags.push(BoundaryFlag::Boundary);
                            grid.normals.push([n[0] / len, n[1] / len]);
                        } else {
                            grid.flags.push(BoundaryFlag::Interior);
                            grid.normals.push([0.0, 0.0]);
                        }
                    }
                }
                Ok(grid)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> Point {
        self.nodes[id]
    }

    pub fn is_boundary(&self, id: usize) -> bool {
        self.flags[id] == BoundaryFlag::Boundary
    }

    /// Inward unit normal of a boundary node.
    pub fn inward_normal(&self, id: usize) -> Option<Point> {
        if self.is_boundary(id) {
            Some(self.normals[id])
        } else {
            None
        }
    }

    /// Neighbor along `axis` in direction `dir` (+1/-1), if present.
    pub fn neighbor(&self, id: usize, axis: usize, dir: i32) -> Option<usize> {
        let (i, j) = self.node_to_tensor[id];
        let (mut ti, mut tj) = (i as i64, j as i64);
        match axis {
            0 => ti += dir as i64,
            1 => tj += dir as i64,
            _ => return None,
        }
        if ti < 0 || tj < 0 || ti >= self.counts[0] as i64 || tj >= self.counts[1] as i64 {
            return None;
        }
        self.tensor_to_node[tj as usize * self.counts[0] + ti as usize]
    }

    /// Diagonal neighbor (2D), offsets in {-1, +1} per axis.
    pub fn diag_neighbor(&self, id: usize, dx: i32, dy: i32) -> Option<usize> {
        let step = self.neighbor(id, 0, dx)?;
        self.neighbor(step, 1, dy)
    }

    pub fn boundary_node_ids(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_boundary(i)).collect()
    }

    pub fn min_spacing(&self) -> f64 {
        if self.dim == 1 {
            self.spacing[0]
        } else {
            self.spacing[0].min(self.spacing[1])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_grid_marks_endpoints() {
        let d = SpatialDomain::interval(0.0, 1.0).unwrap();
        let g = Grid::on_domain(&d, [4, 0]).unwrap();
        assert_eq!(g.len(), 5);
        assert!(g.is_boundary(0) && g.is_boundary(4));
        assert_eq!(g.inward_normal(0), Some([1.0, 0.0]));
        assert_eq!(g.inward_normal(4), Some([-1.0, 0.0]));
        assert!(!g.is_boundary(2));
        assert_eq!(g.neighbor(0, 0, 1), Some(1));
        assert_eq!(g.neighbor(0, 0, -1), None);
    }

    #[test]
    fn rectangle_grid_normals() {
        let d = SpatialDomain::rectangle(0.0, 1.0, 0.0, 2.0).unwrap();
        let g = Grid::on_domain(&d, [2, 4]).unwrap();
        assert_eq!(g.len(), 15);
        // Bottom-middle node has inward normal +e_y.
        let id = (0..g.len()).find(|&i| g.node(i) == [0.5, 0.0]).unwrap();
        assert_eq!(g.inward_normal(id), Some([0.0, 1.0]));
        // Corner normal points diagonally inward.
        let c = (0..g.len()).find(|&i| g.node(i) == [0.0, 0.0]).unwrap();
        let n = g.inward_normal(c).unwrap();
        assert!((n[0] - n[1]).abs() < 1e-15 && n[0] > 0.0);
    }

    #[test]
    fn half_graph_keeps_points_above_gamma() {
        let gamma = C2Scalar::new(|x| 0.2 * x, |_| 0.2, |_| 0.0);
        let d = SpatialDomain::half_graph(0.0, 1.0, 1.0, gamma).unwrap();
        let g = Grid::on_domain(&d, [8, 8]).unwrap();
        for id in 0..g.len() {
            let p = g.node(id);
            assert!(p[1] >= 0.2 * p[0] - 1e-9);
        }
        // Bottom boundary nodes carry the graph normal (-gamma', 1)/len.
        let bottom = (0..g.len())
            .filter(|&i| g.is_boundary(i) && g.node(i)[0] > 0.1 && g.node(i)[0] < 0.9)
            .filter(|&i| g.node(i)[1] - 0.2 * g.node(i)[0] <= 0.5 * g.spacing[1] + 1e-12)
            .collect::<Vec<_>>();
        assert!(!bottom.is_empty());
        for id in bottom {
            let n = g.inward_normal(id).unwrap();
            assert!(n[1] > 0.9, "normal {n:?}");
        }
    }

    #[test]
    fn invalid_domains_rejected() {
        assert!(SpatialDomain::interval(1.0, 0.0).is_err());
        assert!(SpatialDomain::rectangle(0.0, 1.0, 3.0, 2.0).is_err());
        let gamma = C2Scalar::constant(5.0);
        assert!(SpatialDomain::half_graph(0.0, 1.0, 1.0, gamma).is_err());
    }
}
