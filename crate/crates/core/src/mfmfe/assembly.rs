//! Global velocity and divergence matrices.

use nalgebra::{DMatrix, Matrix2, Vector2};

use super::element::{corner_block, corner_velocity_local};
use crate::error::{Error, Result};
use crate::grid::FineGrid;

/// Symmetric 2x2 physical coefficient at every element corner.
#[derive(Debug, Clone)]
pub struct CoefficientAtCorners {
    pub values: Vec<[Matrix2<f64>; 4]>,
}

impl CoefficientAtCorners {
    /// `c_t I` on every corner of cell `t`.
    pub fn from_cells(cells: &[f64]) -> Self {
        CoefficientAtCorners {
            values: cells.iter().map(|&c| [Matrix2::identity() * c; 4]).collect(),
        }
    }

    /// Isotropic coefficient given per corner.
    pub fn from_corner_scalars(values: &[[f64; 4]]) -> Self {
        CoefficientAtCorners {
            values: values.iter().map(|v| v.map(|c| Matrix2::identity() * c)).collect(),
        }
    }

    pub fn from_fn(n_cells: usize, mut f: impl FnMut(usize, usize) -> Matrix2<f64>) -> Self {
        CoefficientAtCorners {
            values: (0..n_cells).map(|t| std::array::from_fn(|c| f(t, c))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, t: usize, corner: usize) -> &Matrix2<f64> {
        &self.values[t][corner]
    }
}

/// Velocity matrix stored as one dense symmetric block per vertex.
#[derive(Debug, Clone)]
pub struct VertexBlockMatrix {
    n_dofs: usize,
    dofs: Vec<Vec<usize>>,
    blocks: Vec<DMatrix<f64>>,
    slot: Vec<(usize, usize)>,
}

impl VertexBlockMatrix {
    /// Zero matrix with the block structure of `grid`.
    pub fn zeros(grid: &FineGrid) -> Self {
        let dofs: Vec<Vec<usize>> = (0..grid.n_vertices()).map(|v| grid.vertex_dofs(v).to_vec()).collect();
        let blocks = dofs.iter().map(|d| DMatrix::zeros(d.len(), d.len())).collect();
        let slot = (0..grid.n_dofs()).map(|d| grid.dof_slot(d)).collect();
        VertexBlockMatrix {
            n_dofs: grid.n_dofs(),
            dofs,
            blocks,
            slot,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_dofs(&self, v: usize) -> &[usize] {
        &self.dofs[v]
    }

    pub fn block(&self, v: usize) -> &DMatrix<f64> {
        &self.blocks[v]
    }

    /// Adds `value` at `(i, j)`; both DOFs must share a vertex.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (vi, si) = self.slot[i];
        let (vj, sj) = self.slot[j];
        assert_eq!(vi, vj, "velocity matrix entry ({i}, {j}) couples vertices {vi} and {vj}");
        self.blocks[vi][(si, sj)] += value;
    }

    /// Entry `(i, j)`, zero across vertex blocks.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (vi, si) = self.slot[i];
        let (vj, sj) = self.slot[j];
        if vi == vj {
            self.blocks[vi][(si, sj)]
        } else {
            0.0
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_dofs];
        for (dofs, blk) in self.dofs.iter().zip(&self.blocks) {
            for (a, &i) in dofs.iter().enumerate() {
                y[i] = dofs.iter().enumerate().map(|(b, &j)| blk[(a, b)] * x[j]).sum();
            }
        }
        y
    }

    /// Quadratic form `xᵀ A x`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        self.mul(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_dofs, self.n_dofs);
        for (dofs, blk) in self.dofs.iter().zip(&self.blocks) {
            for (a, &i) in dofs.iter().enumerate() {
                for (b, &j) in dofs.iter().enumerate() {
                    m[(i, j)] = blk[(a, b)];
                }
            }
        }
        m
    }

    /// Cholesky factors of each block restricted to the DOFs with `free[d]`.
    pub fn factor(&self, free: &[bool]) -> Result<BlockFactor> {
        let mut out = Vec::with_capacity(self.blocks.len());
        for (v, (dofs, blk)) in self.dofs.iter().zip(&self.blocks).enumerate() {
            let local: Vec<usize> = (0..dofs.len()).filter(|&a| free[dofs[a]]).collect();
            if local.is_empty() {
                out.push((Vec::new(), None));
                continue;
            }
            let sub = blk.select_rows(&local).select_columns(&local);
            let chol = sub.cholesky().ok_or(Error::NotPositiveDefinite { vertex: v })?;
            out.push((local.iter().map(|&a| dofs[a]).collect(), Some(chol)));
        }
        Ok(BlockFactor {
            n_dofs: self.n_dofs,
            blocks: out,
        })
    }
}

/// Blockwise inverse of a [`VertexBlockMatrix`] on its free DOFs.
#[derive(Debug, Clone)]
pub struct BlockFactor {
    n_dofs: usize,
    blocks: Vec<(Vec<usize>, Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>)>,
}

impl BlockFactor {
    /// `A⁻¹ x` on free DOFs; constrained entries of the result are zero.
    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_dofs];
        for (dofs, chol) in &self.blocks {
            if let Some(chol) = chol {
                let rhs = nalgebra::DVector::from_iterator(dofs.len(), dofs.iter().map(|&d| x[d]));
                let sol = chol.solve(&rhs);
                for (k, &d) in dofs.iter().enumerate() {
                    y[d] = sol[k];
                }
            }
        }
        y
    }

    /// `Lᵀ x` for the blockwise Cholesky factor `A = L Lᵀ`, so that
    /// `|Lᵀ x|² = xᵀ A x` on free DOFs.
    pub fn factor_transpose_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_dofs];
        for (dofs, chol) in &self.blocks {
            if let Some(chol) = chol {
                let v = nalgebra::DVector::from_iterator(dofs.len(), dofs.iter().map(|&d| x[d]));
                let w = chol.l().transpose() * v;
                for (k, &d) in dofs.iter().enumerate() {
                    y[d] = w[k];
                }
            }
        }
        y
    }

    /// Free DOFs of each block, with the block inverse.
    pub(crate) fn inverse_blocks(&self) -> impl Iterator<Item = (&[usize], DMatrix<f64>)> {
        self.blocks
            .iter()
            .filter_map(|(dofs, chol)| chol.as_ref().map(|c| (dofs.as_slice(), c.inverse())))
    }
}

/// Assembles `(C u, v)_Q`.
pub fn assemble_velocity_matrix(grid: &FineGrid, coeff: &CoefficientAtCorners) -> Result<VertexBlockMatrix> {
    if coeff.len() != grid.n_cells() {
        return Err(Error::InvalidArgument(format!(
            "coefficient has {} cells, grid has {}",
            coeff.len(),
            grid.n_cells()
        )));
    }
    let mut a = VertexBlockMatrix::zeros(grid);
    for t in 0..grid.n_cells() {
        let quad = grid.quad(t);
        let corners = grid.corner_dofs(t);
        for (c, cd) in corners.iter().enumerate() {
            let k = corner_block(&quad, c, coeff.get(t, c))?;
            for a_ in 0..2 {
                for b in 0..2 {
                    a.add(cd[a_].dof, cd[b].dof, cd[a_].sign * cd[b].sign * k[(a_, b)]);
                }
            }
        }
    }
    Ok(a)
}

/// `B[i][j] = -∫ q_j ∇·v_i`, stored by velocity row.
#[derive(Debug, Clone)]
pub struct DivergenceMatrix {
    n_cells: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl DivergenceMatrix {
    pub fn n_dofs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn row(&self, dof: usize) -> &[(usize, f64)] {
        &self.rows[dof]
    }

    /// `B p`.
    pub fn mul(&self, p: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(t, b)| b * p[t]).sum())
            .collect()
    }

    /// `Bᵀ u`.
    pub fn tmul(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cells];
        for (r, &ui) in self.rows.iter().zip(u) {
            for &(t, b) in r {
                out[t] += b * ui;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), self.n_cells);
        for (i, r) in self.rows.iter().enumerate() {
            for &(t, b) in r {
                m[(i, t)] += b;
            }
        }
        m
    }
}

pub fn assemble_divergence(grid: &FineGrid) -> DivergenceMatrix {
    let mut rows = vec![Vec::with_capacity(2); grid.n_dofs()];
    for t in 0..grid.n_cells() {
        for (e, sign) in grid.element_edges(t) {
            let len = grid.edge(e).length;
            for d in grid.edge_dofs(e) {
                rows[d].push((t, -sign * len / 2.0));
            }
        }
    }
    DivergenceMatrix {
        n_cells: grid.n_cells(),
        rows,
    }
}

/// Physical velocity and speed at corner `corner` of cell `t`.
pub fn corner_velocity(grid: &FineGrid, t: usize, corner: usize, u: &[f64]) -> Result<(Vector2<f64>, f64)> {
    let cd = grid.corner_dofs(t)[corner];
    corner_velocity_local(
        &grid.quad(t),
        corner,
        [cd[0].sign * u[cd[0].dof], cd[1].sign * u[cd[1].dof]],
    )
}

pub fn corner_velocities(grid: &FineGrid, u: &[f64]) -> Result<Vec<[Vector2<f64>; 4]>> {
    (0..grid.n_cells())
        .map(|t| {
            let mut out = [Vector2::zeros(); 4];
            for (c, w) in out.iter_mut().enumerate() {
                *w = corner_velocity(grid, t, c, u)?.0;
            }
            Ok(out)
        })
        .collect()
}

pub fn corner_speeds(grid: &FineGrid, u: &[f64]) -> Result<Vec<[f64; 4]>> {
    Ok(corner_velocities(grid, u)?
        .into_iter()
        .map(|w| w.map(|v| v.norm()))
        .collect())
}
