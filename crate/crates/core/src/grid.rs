//! Fine rectangular meshes, bilinear element geometry, coarse agglomeration
//! and oversampling regions.
//!
//! Numbering conventions used throughout the crate:
//!
//! * vertex `(i, j)` has id `j * (nx + 1) + i`;
//! * cell `(i, j)` has id `j * nx + i`;
//! * vertical edges come first, `(i, j)` with id `j * (nx + 1) + i`, global
//!   normal `+x`; horizontal edges follow, `(i, j)` with id
//!   `nv + j * nx + i`, global normal `+y`;
//! * every edge carries two velocity DOFs `2e` and `2e + 1`, the normal
//!   component (against the global normal) at its lower/left and upper/right
//!   endpoint respectively.
//!
//! Element corners follow the counter-clockwise order `r1..r4` of the
//! reference square `(0,0), (1,0), (1,1), (0,1)`; element edges are stored as
//! bottom, right, top, left.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rectangle {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rectangle { x0, x1, y0, y1 }
    }

    pub fn unit() -> Self {
        Rectangle::new(0.0, 1.0, 0.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Edge parallel to the y-axis, normal `+x`.
    Vertical,
    /// Edge parallel to the x-axis, normal `+y`.
    Horizontal,
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// Lower/left endpoint first.
    pub vertices: [usize; 2],
    pub normal: Vector2<f64>,
    pub length: f64,
    pub axis: Axis,
    /// Domain side for boundary edges.
    pub boundary: Option<Side>,
}

/// One local velocity DOF of an element corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerDof {
    pub dof: usize,
    pub edge: usize,
    /// `+1` when the element's outward normal agrees with the global normal.
    pub sign: f64,
}

/// Half-open range of fine cells `[i0, i1) x [j0, j1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellRect {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl CellRect {
    pub fn nx(&self) -> usize {
        self.i1 - self.i0
    }

    pub fn ny(&self) -> usize {
        self.j1 - self.j0
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.i0 && i < self.i1 && j >= self.j0 && j < self.j1
    }

    pub fn contains_rect(&self, other: &CellRect) -> bool {
        other.i0 >= self.i0 && other.i1 <= self.i1 && other.j0 >= self.j0 && other.j1 <= self.j1
    }
}

/// Bilinear quadrilateral `F(x̂) = r1(1-x̂)(1-ŷ) + r2 x̂(1-ŷ) + r3 x̂ŷ + r4(1-x̂)ŷ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub id: usize,
    pub corners: [Vector2<f64>; 4],
}

/// Corners of the reference square in element order.
pub const REFERENCE_CORNERS: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

impl Quad {
    pub fn new(id: usize, corners: [Vector2<f64>; 4]) -> Self {
        Quad { id, corners }
    }

    pub fn map(&self, xh: Vector2<f64>) -> Vector2<f64> {
        let [r1, r2, r3, r4] = self.corners;
        let (x, y) = (xh.x, xh.y);
        r1 * ((1.0 - x) * (1.0 - y)) + r2 * (x * (1.0 - y)) + r3 * (x * y) + r4 * ((1.0 - x) * y)
    }

    pub fn jacobian(&self, xh: Vector2<f64>) -> Matrix2<f64> {
        let [r1, r2, r3, r4] = self.corners;
        let dx = (r2 - r1) * (1.0 - xh.y) + (r3 - r4) * xh.y;
        let dy = (r4 - r1) * (1.0 - xh.x) + (r3 - r2) * xh.x;
        Matrix2::from_columns(&[dx, dy])
    }

    /// Returns `(x, DF, J)` at the reference point, failing when `J <= 0`.
    pub fn bilinear_map(&self, xh: Vector2<f64>) -> Result<(Vector2<f64>, Matrix2<f64>, f64)> {
        let df = self.jacobian(xh);
        let det = df.determinant();
        if !(det > 0.0) {
            return Err(Error::DegenerateElement {
                element: self.id,
                jacobian: det,
            });
        }
        Ok((self.map(xh), df, det))
    }

    /// Inverts the bilinear map by Newton iteration.
    pub fn inverse_map(&self, x: Vector2<f64>) -> Result<Vector2<f64>> {
        let mut xh = Vector2::new(0.5, 0.5);
        for _ in 0..50 {
            let (fx, df, _) = self.bilinear_map(xh)?;
            let r = fx - x;
            let step = df
                .try_inverse()
                .ok_or(Error::DegenerateElement {
                    element: self.id,
                    jacobian: 0.0,
                })?
                * r;
            xh -= step;
            if step.norm() < 1e-15 {
                break;
            }
        }
        Ok(xh)
    }

    /// Physical edge `k` (bottom, right, top, left) as a pair of endpoints
    /// ordered counter-clockwise.
    pub fn edge_endpoints(&self, k: usize) -> (Vector2<f64>, Vector2<f64>) {
        let c = &self.corners;
        match k {
            0 => (c[0], c[1]),
            1 => (c[1], c[2]),
            2 => (c[2], c[3]),
            3 => (c[3], c[0]),
            _ => panic!("edge index {k} out of range"),
        }
    }

    /// Unit outward normal of edge `k`.
    pub fn outward_normal(&self, k: usize) -> Vector2<f64> {
        let (a, b) = self.edge_endpoints(k);
        let t = b - a;
        Vector2::new(t.y, -t.x).normalize()
    }

    pub fn edge_length(&self, k: usize) -> f64 {
        let (a, b) = self.edge_endpoints(k);
        (b - a).norm()
    }
}

/// Element-local edges (bottom, right, top, left) meeting at each corner,
/// listed as (x-normal slot, y-normal slot) of the reference square.
pub const CORNER_EDGES: [[usize; 2]; 4] = [[3, 0], [1, 0], [1, 2], [3, 2]];

/// Endpoint index (0 = lower/left, 1 = upper/right) of each corner on its
/// two corner edges, in the same slot order as [`CORNER_EDGES`].
pub const CORNER_ENDPOINTS: [[usize; 2]; 4] = [[0, 0], [0, 1], [1, 1], [1, 0]];

#[derive(Debug, Clone)]
pub struct FineGrid {
    pub nx: usize,
    pub ny: usize,
    pub domain: Rectangle,
    vertices: Vec<Vector2<f64>>,
    elements: Vec<[usize; 4]>,
    edges: Vec<Edge>,
    element_edges: Vec<[(usize, f64); 4]>,
    vertex_dofs: Vec<Vec<usize>>,
    dof_slot: Vec<(usize, usize)>,
}

impl FineGrid {
    /// Uniform `nx x ny` rectangular grid on `domain`.
    pub fn new(nx: usize, ny: usize, domain: Rectangle) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "element counts must be positive, got {nx}x{ny}"
            )));
        }
        if !(domain.x1 > domain.x0 && domain.y1 > domain.y0) {
            return Err(Error::InvalidArgument(format!("degenerate domain {domain:?}")));
        }
        let hx = domain.width() / nx as f64;
        let hy = domain.height() / ny as f64;
        let vid = |i: usize, j: usize| j * (nx + 1) + i;

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let x = if i == nx { domain.x1 } else { domain.x0 + i as f64 * hx };
                let y = if j == ny { domain.y1 } else { domain.y0 + j as f64 * hy };
                vertices.push(Vector2::new(x, y));
            }
        }

        let n_vertical = (nx + 1) * ny;
        let mut edges = Vec::with_capacity(n_vertical + nx * (ny + 1));
        for j in 0..ny {
            for i in 0..=nx {
                let boundary = match i {
                    0 => Some(Side::Left),
                    _ if i == nx => Some(Side::Right),
                    _ => None,
                };
                edges.push(Edge {
                    vertices: [vid(i, j), vid(i, j + 1)],
                    normal: Vector2::new(1.0, 0.0),
                    length: hy,
                    axis: Axis::Vertical,
                    boundary,
                });
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                let boundary = match j {
                    0 => Some(Side::Bottom),
                    _ if j == ny => Some(Side::Top),
                    _ => None,
                };
                edges.push(Edge {
                    vertices: [vid(i, j), vid(i + 1, j)],
                    normal: Vector2::new(0.0, 1.0),
                    length: hx,
                    axis: Axis::Horizontal,
                    boundary,
                });
            }
        }

        let vert_edge = |i: usize, j: usize| j * (nx + 1) + i;
        let horiz_edge = |i: usize, j: usize| n_vertical + j * nx + i;
        let mut elements = Vec::with_capacity(nx * ny);
        let mut element_edges = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                elements.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
                element_edges.push([
                    (horiz_edge(i, j), -1.0),
                    (vert_edge(i + 1, j), 1.0),
                    (horiz_edge(i, j + 1), 1.0),
                    (vert_edge(i, j), -1.0),
                ]);
            }
        }

        let mut vertex_dofs = vec![Vec::with_capacity(4); vertices.len()];
        for (e, edge) in edges.iter().enumerate() {
            for (k, &v) in edge.vertices.iter().enumerate() {
                vertex_dofs[v].push(2 * e + k);
            }
        }
        for dofs in &mut vertex_dofs {
            dofs.sort_unstable();
        }
        let mut dof_slot = vec![(0, 0); 2 * edges.len()];
        for (v, dofs) in vertex_dofs.iter().enumerate() {
            for (k, &d) in dofs.iter().enumerate() {
                dof_slot[d] = (v, k);
            }
        }

        Ok(FineGrid {
            nx,
            ny,
            domain,
            vertices,
            elements,
            edges,
            element_edges,
            vertex_dofs,
            dof_slot,
        })
    }

    pub fn hx(&self) -> f64 {
        self.domain.width() / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.domain.height() / self.ny as f64
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn n_vertical_edges(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn vertex(&self, v: usize) -> Vector2<f64> {
        self.vertices[v]
    }

    pub fn vertices(&self) -> &[Vector2<f64>] {
        &self.vertices
    }

    pub fn element(&self, t: usize) -> [usize; 4] {
        self.elements[t]
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn element_edges(&self, t: usize) -> [(usize, f64); 4] {
        self.element_edges[t]
    }

    pub fn vertex_dofs(&self, v: usize) -> &[usize] {
        &self.vertex_dofs[v]
    }

    /// Owning vertex of a DOF and its position inside that vertex block.
    pub fn dof_slot(&self, dof: usize) -> (usize, usize) {
        self.dof_slot[dof]
    }

    pub fn edge_dofs(&self, e: usize) -> [usize; 2] {
        [2 * e, 2 * e + 1]
    }

    pub fn dof_point(&self, dof: usize) -> Vector2<f64> {
        self.vertices[self.edges[dof / 2].vertices[dof % 2]]
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_ij(&self, t: usize) -> (usize, usize) {
        (t % self.nx, t / self.nx)
    }

    pub fn vertical_edge(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn horizontal_edge(&self, i: usize, j: usize) -> usize {
        self.n_vertical_edges() + j * self.nx + i
    }

    pub fn cell_area(&self, t: usize) -> f64 {
        let [a, b, _, d] = self.elements[t];
        let p = self.vertices[a];
        (self.vertices[b].x - p.x) * (self.vertices[d].y - p.y)
    }

    pub fn cell_center(&self, t: usize) -> Vector2<f64> {
        let [a, _, c, _] = self.elements[t];
        (self.vertices[a] + self.vertices[c]) * 0.5
    }

    pub fn quad(&self, t: usize) -> Quad {
        let ids = self.elements[t];
        Quad::new(t, ids.map(|v| self.vertices[v]))
    }

    /// Bilinear map of element `t` at reference point `xh`.
    pub fn bilinear_map(&self, t: usize, xh: Vector2<f64>) -> Result<(Vector2<f64>, Matrix2<f64>, f64)> {
        self.quad(t).bilinear_map(xh)
    }

    /// Velocity DOFs of element `t` at each corner, x-normal slot first.
    pub fn corner_dofs(&self, t: usize) -> [[CornerDof; 2]; 4] {
        let ee = self.element_edges[t];
        std::array::from_fn(|c| {
            std::array::from_fn(|s| {
                let (edge, sign) = ee[CORNER_EDGES[c][s]];
                CornerDof {
                    dof: 2 * edge + CORNER_ENDPOINTS[c][s],
                    edge,
                    sign,
                }
            })
        })
    }

    /// Elements adjacent to an edge, with their orientation signs.
    pub fn edge_elements(&self, e: usize) -> Vec<(usize, f64)> {
        let edge = &self.edges[e];
        let mut out = Vec::with_capacity(2);
        match edge.axis {
            Axis::Vertical => {
                let i = e % (self.nx + 1);
                let j = e / (self.nx + 1);
                if i > 0 {
                    out.push((self.cell_index(i - 1, j), 1.0));
                }
                if i < self.nx {
                    out.push((self.cell_index(i, j), -1.0));
                }
            }
            Axis::Horizontal => {
                let k = e - self.n_vertical_edges();
                let i = k % self.nx;
                let j = k / self.nx;
                if j > 0 {
                    out.push((self.cell_index(i, j - 1), 1.0));
                }
                if j < self.ny {
                    out.push((self.cell_index(i, j), -1.0));
                }
            }
        }
        out
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.boundary.is_some())
            .map(|(k, _)| k)
    }

    /// Boundary edges of a cell rectangle, counter-clockwise starting at the
    /// bottom-left corner.
    pub fn rect_boundary_edges(&self, r: &CellRect) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * (r.nx() + r.ny()));
        out.extend((r.i0..r.i1).map(|i| self.horizontal_edge(i, r.j0)));
        out.extend((r.j0..r.j1).map(|j| self.vertical_edge(r.i1, j)));
        out.extend((r.i0..r.i1).rev().map(|i| self.horizontal_edge(i, r.j1)));
        out.extend((r.j0..r.j1).rev().map(|j| self.vertical_edge(r.i0, j)));
        out
    }

    pub fn rect_cells(&self, r: &CellRect) -> Vec<usize> {
        let mut out = Vec::with_capacity(r.len());
        for j in r.j0..r.j1 {
            for i in r.i0..r.i1 {
                out.push(self.cell_index(i, j));
            }
        }
        out
    }

    pub fn full_rect(&self) -> CellRect {
        CellRect {
            i0: 0,
            i1: self.nx,
            j0: 0,
            j1: self.ny,
        }
    }

    /// A standalone grid over a cell rectangle together with the maps from
    /// its local cells and DOFs to this grid.
    pub fn subgrid(&self, r: &CellRect) -> Result<Subgrid> {
        if r.is_empty() || r.i1 > self.nx || r.j1 > self.ny {
            return Err(Error::InvalidArgument(format!("cell rectangle {r:?} outside grid")));
        }
        let lo = self.vertices[r.j0 * (self.nx + 1) + r.i0];
        let hi = self.vertices[r.j1 * (self.nx + 1) + r.i1];
        let grid = FineGrid::new(r.nx(), r.ny(), Rectangle::new(lo.x, hi.x, lo.y, hi.y))?;
        let cells = self.rect_cells(r);
        let mut dofs = vec![0; grid.n_dofs()];
        for (le, edge) in grid.edges.iter().enumerate() {
            let ge = match edge.axis {
                Axis::Vertical => {
                    let (i, j) = (le % (r.nx() + 1), le / (r.nx() + 1));
                    self.vertical_edge(i + r.i0, j + r.j0)
                }
                Axis::Horizontal => {
                    let k = le - grid.n_vertical_edges();
                    let (i, j) = (k % r.nx(), k / r.nx());
                    self.horizontal_edge(i + r.i0, j + r.j0)
                }
            };
            dofs[2 * le] = 2 * ge;
            dofs[2 * le + 1] = 2 * ge + 1;
        }
        Ok(Subgrid {
            grid,
            rect: *r,
            cells,
            dofs,
        })
    }
}

/// A grid cut out of a parent grid.
#[derive(Debug, Clone)]
pub struct Subgrid {
    pub grid: FineGrid,
    pub rect: CellRect,
    /// Parent cell id of each local cell.
    pub cells: Vec<usize>,
    /// Parent DOF id of each local DOF.
    pub dofs: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CoarseElement {
    /// Two-index position `(I, J)`, zero based.
    pub index: (usize, usize),
    pub rect: CellRect,
    pub fine_elements: Vec<usize>,
    /// Fine edges of the coarse boundary, counter-clockwise.
    pub boundary_edges: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CoarseGrid {
    pub nx: usize,
    pub ny: usize,
    pub fine_nx: usize,
    pub fine_ny: usize,
    pub elements: Vec<CoarseElement>,
}

impl CoarseGrid {
    /// Uniform `nx x ny` agglomeration of `fine`.
    pub fn new(fine: &FineGrid, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || fine.nx % nx != 0 || fine.ny % ny != 0 {
            return Err(Error::InvalidArgument(format!(
                "coarse partition {nx}x{ny} does not divide fine grid {}x{}",
                fine.nx, fine.ny
            )));
        }
        let (mx, my) = (fine.nx / nx, fine.ny / ny);
        let mut elements = Vec::with_capacity(nx * ny);
        for jc in 0..ny {
            for ic in 0..nx {
                let rect = CellRect {
                    i0: ic * mx,
                    i1: (ic + 1) * mx,
                    j0: jc * my,
                    j1: (jc + 1) * my,
                };
                elements.push(CoarseElement {
                    index: (ic, jc),
                    rect,
                    fine_elements: fine.rect_cells(&rect),
                    boundary_edges: fine.rect_boundary_edges(&rect),
                });
            }
        }
        Ok(CoarseGrid {
            nx,
            ny,
            fine_nx: fine.nx,
            fine_ny: fine.ny,
            elements,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element_id(&self, ic: usize, jc: usize) -> usize {
        jc * self.nx + ic
    }

    /// `T⁺`: the coarse element grown by `layers` fine cells, clipped at the
    /// domain boundary.
    pub fn oversampled(&self, id: usize, layers: usize) -> CellRect {
        let r = self.elements[id].rect;
        CellRect {
            i0: r.i0.saturating_sub(layers),
            i1: (r.i1 + layers).min(self.fine_nx),
            j0: r.j0.saturating_sub(layers),
            j1: (r.j1 + layers).min(self.fine_ny),
        }
    }

    /// Map from fine cell to owning coarse element.
    pub fn cell_owner(&self) -> Vec<usize> {
        let mut owner = vec![0; self.fine_nx * self.fine_ny];
        for (k, el) in self.elements.iter().enumerate() {
            for &t in &el.fine_elements {
                owner[t] = k;
            }
        }
        owner
    }
}
