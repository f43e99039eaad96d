//! Boundary conditions and right-hand sides.

use std::fmt;
use std::sync::Arc;

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::grid::{FineGrid, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    /// Pressure datum `p = g_D`.
    Dirichlet,
    /// Outward flux density `u·n = g_N`.
    Neumann,
}

#[derive(Clone)]
pub enum BoundaryValue {
    Constant(f64),
    Function(Arc<dyn Fn(Vector2<f64>) -> f64 + Send + Sync>),
}

impl BoundaryValue {
    pub fn function(f: impl Fn(Vector2<f64>) -> f64 + Send + Sync + 'static) -> Self {
        BoundaryValue::Function(Arc::new(f))
    }

    pub fn eval(&self, x: Vector2<f64>) -> f64 {
        match self {
            BoundaryValue::Constant(c) => *c,
            BoundaryValue::Function(f) => f(x),
        }
    }
}

impl fmt::Debug for BoundaryValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryValue::Constant(c) => write!(f, "Constant({c})"),
            BoundaryValue::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// Per-edge boundary labels, indexed by edge id.
#[derive(Debug, Clone)]
pub struct BoundaryConditions {
    labels: Vec<Option<(BcKind, BoundaryValue)>>,
}

impl BoundaryConditions {
    /// No boundary edge labelled yet.
    pub fn unlabeled(grid: &FineGrid) -> Self {
        BoundaryConditions {
            labels: vec![None; grid.n_edges()],
        }
    }

    pub fn set(&mut self, edge: usize, kind: BcKind, value: BoundaryValue) -> &mut Self {
        self.labels[edge] = Some((kind, value));
        self
    }

    pub fn set_side(&mut self, grid: &FineGrid, side: Side, kind: BcKind, value: BoundaryValue) -> &mut Self {
        for e in grid.boundary_edges().collect::<Vec<_>>() {
            if grid.edge(e).boundary == Some(side) {
                self.set(e, kind, value.clone());
            }
        }
        self
    }

    /// Every boundary edge gets the same label.
    pub fn uniform(grid: &FineGrid, kind: BcKind, value: BoundaryValue) -> Self {
        let mut bc = Self::unlabeled(grid);
        for e in grid.boundary_edges().collect::<Vec<_>>() {
            bc.set(e, kind, value.clone());
        }
        bc
    }

    pub fn no_flow(grid: &FineGrid) -> Self {
        Self::uniform(grid, BcKind::Neumann, BoundaryValue::Constant(0.0))
    }

    /// Pressure `p_left` on the left side, `p_right` on the right side,
    /// no flow on top and bottom.
    pub fn left_right(grid: &FineGrid, p_left: f64, p_right: f64) -> Self {
        let mut bc = Self::no_flow(grid);
        bc.set_side(grid, Side::Left, BcKind::Dirichlet, BoundaryValue::Constant(p_left))
            .set_side(grid, Side::Right, BcKind::Dirichlet, BoundaryValue::Constant(p_right));
        bc
    }

    /// Injector `p = 1` on the boundary edges within a quarter side length of
    /// the bottom-left corner, producer `p = 0` near the top-right corner,
    /// no flow elsewhere.
    pub fn five_spot(grid: &FineGrid) -> Self {
        let d = grid.domain;
        let (qx, qy) = (d.width() / 4.0, d.height() / 4.0);
        let mut bc = Self::no_flow(grid);
        for e in grid.boundary_edges().collect::<Vec<_>>() {
            let edge = grid.edge(e);
            let m = (grid.vertex(edge.vertices[0]) + grid.vertex(edge.vertices[1])) * 0.5;
            let near_lo = match edge.boundary {
                Some(Side::Bottom) => m.x < d.x0 + qx,
                Some(Side::Left) => m.y < d.y0 + qy,
                _ => false,
            };
            let near_hi = match edge.boundary {
                Some(Side::Top) => m.x > d.x1 - qx,
                Some(Side::Right) => m.y > d.y1 - qy,
                _ => false,
            };
            if near_lo {
                bc.set(e, BcKind::Dirichlet, BoundaryValue::Constant(1.0));
            } else if near_hi {
                bc.set(e, BcKind::Dirichlet, BoundaryValue::Constant(0.0));
            }
        }
        bc
    }

    /// Parses `preset:left-right` or `preset:five-spot` (prefix optional).
    pub fn preset(grid: &FineGrid, name: &str) -> Result<Self> {
        match name.strip_prefix("preset:").unwrap_or(name) {
            "left-right" => Ok(Self::left_right(grid, 1.0, 0.0)),
            "five-spot" => Ok(Self::five_spot(grid)),
            other => Err(Error::Configuration(format!("unknown boundary preset '{other}'"))),
        }
    }

    pub fn label(&self, edge: usize) -> Option<&(BcKind, BoundaryValue)> {
        self.labels.get(edge).and_then(|l| l.as_ref())
    }

    pub fn has_dirichlet(&self) -> bool {
        self.labels
            .iter()
            .any(|l| matches!(l, Some((BcKind::Dirichlet, _))))
    }
}

/// Right-hand sides and constrained velocity DOFs.
#[derive(Debug, Clone)]
pub struct Rhs {
    /// Velocity load `-(g_D, v·n)` on Dirichlet edges.
    pub g: Vec<f64>,
    /// Pressure load `-(f, q)`.
    pub f: Vec<f64>,
    /// Prescribed value of each Neumann DOF.
    pub fixed: Vec<Option<f64>>,
}

impl Rhs {
    pub fn free_mask(&self) -> Vec<bool> {
        self.fixed.iter().map(|x| x.is_none()).collect()
    }

    /// The constrained values, zero on free DOFs.
    pub fn fixed_values(&self) -> Vec<f64> {
        self.fixed.iter().map(|x| x.unwrap_or(0.0)).collect()
    }
}

/// 5-point Gauss-Legendre nodes and weights on `[0, 1]`.
pub(crate) fn gauss5() -> [(f64, f64); 5] {
    let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let wa = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
    let wb = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
    [(-b, wb), (-a, wa), (0.0, 128.0 / 225.0), (a, wa), (b, wb)].map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
}

/// Assembles the loads for a cellwise source `f` (cell averages).
pub fn assemble_rhs(grid: &FineGrid, f: &[f64], bc: &BoundaryConditions) -> Result<Rhs> {
    if f.len() != grid.n_cells() {
        return Err(Error::InvalidArgument(format!(
            "source has {} values, grid has {} cells",
            f.len(),
            grid.n_cells()
        )));
    }
    let mut g = vec![0.0; grid.n_dofs()];
    let mut fixed = vec![None; grid.n_dofs()];
    for e in grid.boundary_edges() {
        let edge = grid.edge(e);
        let (kind, value) = bc
            .label(e)
            .ok_or_else(|| Error::Configuration(format!("boundary edge {e} has no condition")))?;
        // outward normal against the global one
        let sigma = match edge.boundary {
            Some(Side::Left | Side::Bottom) => -1.0,
            _ => 1.0,
        };
        let a = grid.vertex(edge.vertices[0]);
        let b = grid.vertex(edge.vertices[1]);
        let [d0, d1] = grid.edge_dofs(e);
        match kind {
            BcKind::Dirichlet => {
                let (i0, i1) = match value {
                    BoundaryValue::Constant(c) => (c * edge.length / 2.0, c * edge.length / 2.0),
                    BoundaryValue::Function(func) => gauss5().iter().fold((0.0, 0.0), |(s0, s1), &(s, w)| {
                        let gv = func(a + (b - a) * s) * w * edge.length;
                        (s0 + gv * (1.0 - s), s1 + gv * s)
                    }),
                };
                g[d0] -= sigma * i0;
                g[d1] -= sigma * i1;
            }
            BcKind::Neumann => {
                fixed[d0] = Some(sigma * value.eval(a));
                fixed[d1] = Some(sigma * value.eval(b));
            }
        }
    }
    let f = (0..grid.n_cells()).map(|t| -f[t] * grid.cell_area(t)).collect();
    Ok(Rhs { g, f, fixed })
}
