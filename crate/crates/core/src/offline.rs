//! Offline multiscale pressure spaces: snapshot problems, the local spectral
//! decomposition, the global reduction map and residual-driven updates.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fine_solver::{solve_nonlinear_in, Discretization, FlowSolution, NonlinearConfig, Problem};
use crate::grid::{CoarseGrid, FineGrid, Side};
use crate::linalg::{generalized_eigen_factored, GeneralizedEigen};

/// Relative singular-value cutoff below which snapshot combinations are
/// treated as having no pressure content.
pub const SNAPSHOT_RANK_TOL: f64 = 1e-8;
use crate::metrics::cell_divergence;
use crate::mfmfe::{
    assemble_divergence, assemble_rhs, assemble_velocity_matrix, corner_speeds, BcKind, BoundaryConditions,
    BoundaryValue, CoefficientAtCorners,
};
use crate::schur::{FactoredSchur, LinearOptions, PressureSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnTag {
    Offline,
    Online,
    Updated,
}

/// One pressure basis function supported in a single coarse element.
#[derive(Debug, Clone)]
pub struct BasisColumn {
    pub element: usize,
    pub tag: ColumnTag,
    pub cells: Vec<usize>,
    pub values: Vec<f64>,
}

impl BasisColumn {
    pub fn norm_l2(&self, grid: &FineGrid) -> f64 {
        self.cells
            .iter()
            .zip(&self.values)
            .map(|(&t, v)| v * v * grid.cell_area(t))
            .sum::<f64>()
            .sqrt()
    }
}

/// The pressure reduction map `R`; column `k` lives on the cells listed in
/// `columns()[k]`.
#[derive(Debug, Clone)]
pub struct ReductionMap {
    n_cells: usize,
    columns: Vec<BasisColumn>,
}

impl ReductionMap {
    pub fn new(n_cells: usize) -> Self {
        ReductionMap {
            n_cells,
            columns: Vec::new(),
        }
    }

    /// One indicator column per fine cell; `owner` gives its coarse element.
    pub fn identity(owner: &[usize]) -> Self {
        ReductionMap {
            n_cells: owner.len(),
            columns: owner
                .iter()
                .enumerate()
                .map(|(t, &e)| BasisColumn {
                    element: e,
                    tag: ColumnTag::Offline,
                    cells: vec![t],
                    values: vec![1.0],
                })
                .collect(),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[BasisColumn] {
        &self.columns
    }

    pub fn push(&mut self, col: BasisColumn) {
        self.columns.push(col);
    }

    pub fn columns_of(&self, element: usize) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&k| self.columns[k].element == element)
            .collect()
    }

    /// Swaps the columns of `element` for `new`, keeping their position.
    pub fn replace_element(&mut self, element: usize, new: Vec<BasisColumn>) {
        let at = self
            .columns
            .iter()
            .position(|c| c.element == element)
            .unwrap_or(self.columns.len());
        self.columns.retain(|c| c.element != element);
        let at = at.min(self.columns.len());
        self.columns.splice(at..at, new);
    }

    /// Fine-cell vector `R c`.
    pub fn expand(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cells];
        for (col, &ck) in self.columns.iter().zip(c) {
            for (&t, &v) in col.cells.iter().zip(&col.values) {
                out[t] += v * ck;
            }
        }
        out
    }

    /// `Rᵀ x`.
    pub fn restrict(&self, x: &[f64]) -> Vec<f64> {
        self.columns
            .iter()
            .map(|col| col.cells.iter().zip(&col.values).map(|(&t, &v)| v * x[t]).sum())
            .collect()
    }

    /// Sparse triplets `row col value` with a `# rows cols nnz` header.
    pub fn to_triplet_string(&self) -> String {
        let nnz: usize = self.columns.iter().map(|c| c.cells.len()).sum();
        let mut s = format!("# {} {} {}\n", self.n_cells, self.columns.len(), nnz);
        for (k, col) in self.columns.iter().enumerate() {
            for (&t, &v) in col.cells.iter().zip(&col.values) {
                let _ = writeln!(s, "{t} {k} {v:e}");
            }
        }
        s
    }

    pub fn save_triplets(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_triplet_string()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Snapshot functions of one coarse element and their spectral data.
#[derive(Debug, Clone)]
pub struct SpectralSpace {
    pub element: usize,
    /// Global cells of the coarse element.
    pub cells: Vec<usize>,
    /// Global velocity DOFs of the coarse element.
    pub dofs: Vec<usize>,
    /// Snapshot pressures restricted to the element, one column per datum.
    pub pressure: DMatrix<f64>,
    /// Snapshot velocities restricted to the element.
    pub velocity: DMatrix<f64>,
    pub a_off: DMatrix<f64>,
    pub s_off: DMatrix<f64>,
    /// `Y` with `YᵀY = a_off`.
    pub energy_factor: DMatrix<f64>,
    /// `X` with `XᵀX = s_off`.
    pub mass_factor: DMatrix<f64>,
    pub eigen: Option<GeneralizedEigen>,
}

impl SpectralSpace {
    pub fn n_snapshots(&self) -> usize {
        self.pressure.ncols()
    }

    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigen.as_ref().map(|e| e.values.as_slice())
    }

    /// Cell values of the `k`-th offline basis function.
    pub fn offline_basis(&self, k: usize) -> Result<Vec<f64>> {
        let eig = self
            .eigen
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("spectral space not decomposed".into()))?;
        if k >= eig.values.len() {
            return Err(Error::InvalidArgument(format!(
                "requested basis {k} of {} snapshots",
                eig.values.len()
            )));
        }
        Ok((&self.pressure * eig.vectors.column(k)).iter().copied().collect())
    }

    /// The first `m` offline basis functions as reduction-map columns.
    pub fn basis_columns(&self, m: usize, tag: ColumnTag) -> Result<Vec<BasisColumn>> {
        let available = self.eigenvalues().map_or(0, |v| v.len());
        if m > available {
            return Err(Error::InvalidArgument(format!(
                "element {} has {available} independent snapshots, {m} basis functions requested",
                self.element
            )));
        }
        (0..m)
            .map(|k| {
                Ok(BasisColumn {
                    element: self.element,
                    tag,
                    cells: self.cells.clone(),
                    values: self.offline_basis(k)?,
                })
            })
            .collect()
    }
}

/// Snapshots of coarse element `id`: one local Dirichlet problem per fine
/// boundary edge of the (possibly oversampled) region, with unit pressure on
/// that edge, zero elsewhere and no source.
pub fn build_snapshots(
    grid: &FineGrid,
    coarse: &CoarseGrid,
    id: usize,
    coeff: &CoefficientAtCorners,
    layers: usize,
) -> Result<SpectralSpace> {
    let wrap = |e| Error::local(id, None, e);
    let plus = coarse.oversampled(id, layers);
    let sub = grid.subgrid(&plus).map_err(wrap)?;
    let lg = &sub.grid;
    let local_coeff = CoefficientAtCorners {
        values: sub.cells.iter().map(|&t| coeff.values[t]).collect(),
    };
    let a = assemble_velocity_matrix(lg, &local_coeff).map_err(wrap)?;
    let b = assemble_divergence(lg);
    let bc = BoundaryConditions::uniform(lg, BcKind::Dirichlet, BoundaryValue::Constant(0.0));
    let base = assemble_rhs(lg, &vec![0.0; lg.n_cells()], &bc).map_err(wrap)?;
    let opts = LinearOptions {
        shape: Some((lg.nx, lg.ny)),
        ..Default::default()
    };
    let fac = FactoredSchur::new(&a, &b, &base.free_mask(), PressureSpace::Full, &opts).map_err(wrap)?;

    let rect = coarse.elements[id].rect;
    let inner = crate::grid::CellRect {
        i0: rect.i0 - plus.i0,
        i1: rect.i1 - plus.i0,
        j0: rect.j0 - plus.j0,
        j1: rect.j1 - plus.j0,
    };
    let tsub = lg.subgrid(&inner).map_err(wrap)?;

    let edges = lg.rect_boundary_edges(&lg.full_rect());
    let nj = edges.len();
    let mut pressure = DMatrix::zeros(tsub.cells.len(), nj);
    let mut velocity = DMatrix::zeros(tsub.dofs.len(), nj);
    for (j, &e) in edges.iter().enumerate() {
        let edge = lg.edge(e);
        let sigma = match edge.boundary {
            Some(Side::Left | Side::Bottom) => -1.0,
            _ => 1.0,
        };
        let mut rhs = base.clone();
        for d in lg.edge_dofs(e) {
            rhs.g[d] = -sigma * edge.length / 2.0;
        }
        let sol = fac.solve(&rhs).map_err(|err| Error::local(id, Some(j), err))?;
        for (k, &lc) in tsub.cells.iter().enumerate() {
            pressure[(k, j)] = sol.pressure[lc];
        }
        for (k, &ld) in tsub.dofs.iter().enumerate() {
            velocity[(k, j)] = sol.velocity[ld];
        }
    }

    let cells: Vec<usize> = tsub.cells.iter().map(|&lc| sub.cells[lc]).collect();
    let dofs: Vec<usize> = tsub.dofs.iter().map(|&ld| sub.dofs[ld]).collect();
    let t_coeff = CoefficientAtCorners {
        values: cells.iter().map(|&t| coeff.values[t]).collect(),
    };
    let at = assemble_velocity_matrix(&tsub.grid, &t_coeff).map_err(wrap)?;
    let half = at.factor(&vec![true; tsub.dofs.len()]).map_err(wrap)?;
    let mut energy_factor = DMatrix::zeros(tsub.dofs.len(), nj);
    for j in 0..nj {
        let col: Vec<f64> = velocity.column(j).iter().copied().collect();
        for (k, v) in half.factor_transpose_mul(&col).into_iter().enumerate() {
            energy_factor[(k, j)] = v;
        }
    }
    let a_off = energy_factor.transpose() * &energy_factor;
    let mut mass_factor = pressure.clone();
    for (k, &t) in cells.iter().enumerate() {
        mass_factor.row_mut(k).scale_mut(grid.cell_area(t).sqrt());
    }
    let s_off = mass_factor.transpose() * &mass_factor;
    Ok(SpectralSpace {
        element: id,
        cells,
        dofs,
        pressure,
        velocity,
        a_off: (&a_off + a_off.transpose()) * 0.5,
        s_off: (&s_off + s_off.transpose()) * 0.5,
        energy_factor,
        mass_factor,
        eigen: None,
    })
}

/// Solves `A_off Φ = λ S_off Φ` for the snapshot space.
pub fn spectral_decompose(mut space: SpectralSpace) -> Result<SpectralSpace> {
    let eig = generalized_eigen_factored(&space.energy_factor, &space.mass_factor, SNAPSHOT_RANK_TOL).map_err(|e| Error::local(space.element, None, e))?;
    space.eigen = Some(eig);
    Ok(space)
}

/// Snapshot spaces and eigenpairs for every coarse element.
pub fn build_offline_spaces(
    grid: &FineGrid,
    coarse: &CoarseGrid,
    coeff: &CoefficientAtCorners,
    layers: usize,
) -> Result<Vec<SpectralSpace>> {
    (0..coarse.len())
        .map(|id| spectral_decompose(build_snapshots(grid, coarse, id, coeff, layers)?))
        .collect()
}

/// Element-major, eigenvalue-minor assembly of `m` functions per element.
pub fn assemble_reduction(n_cells: usize, spaces: &[SpectralSpace], m: usize) -> Result<ReductionMap> {
    let mut r = ReductionMap::new(n_cells);
    for s in spaces {
        for col in s.basis_columns(m, ColumnTag::Offline)? {
            r.push(col);
        }
    }
    Ok(r)
}

/// Nonlinear solve with the pressure in the span of `r`.
pub fn solve_offline(problem: &Problem, disc: &Discretization, r: &ReductionMap, cfg: &NonlinearConfig) -> Result<FlowSolution> {
    solve_nonlinear_in(problem, disc, PressureSpace::Reduced(r), cfg)
}

/// `∫_{T_i} |f - ∇·u|²` per coarse element.
pub fn offline_residuals(grid: &FineGrid, coarse: &CoarseGrid, u: &[f64], source: &[f64]) -> Vec<f64> {
    let div = cell_divergence(grid, u);
    coarse
        .elements
        .iter()
        .map(|el| {
            el.fine_elements
                .iter()
                .map(|&t| (source[t] - div[t]).powi(2) * grid.cell_area(t))
                .sum()
        })
        .collect()
}

/// Smallest set of largest residuals holding a `theta` fraction of the total.
pub fn select_by_fraction(residuals: &[f64], theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("fraction must lie in (0, 1), got {theta}")));
    }
    let total: f64 = residuals.iter().sum();
    if !(total > 0.0) {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..residuals.len()).collect();
    order.sort_by(|&a, &b| residuals[b].total_cmp(&residuals[a]).then(a.cmp(&b)));
    let target = theta * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    let mut out = Vec::new();
    for k in order {
        out.push(k);
        acc += residuals[k];
        if acc >= target {
            break;
        }
    }
    Ok(out)
}

/// Rebuilds the spaces of `selected` elements with `μκ⁻¹ + βρ|u_off|` and
/// replaces their columns, keeping each element's column count.
pub fn update_offline(
    problem: &Problem,
    coarse: &CoarseGrid,
    r: &ReductionMap,
    u_off: &[f64],
    selected: &[usize],
    layers: usize,
) -> Result<ReductionMap> {
    let mut out = r.clone();
    if selected.is_empty() {
        return Ok(out);
    }
    let speeds = corner_speeds(&problem.grid, u_off)?;
    let coeff = problem.picard_coefficient(&speeds);
    let mut sorted = selected.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for id in sorted {
        let m = r.columns_of(id).len();
        let space = spectral_decompose(build_snapshots(&problem.grid, coarse, id, &coeff, layers)?)?;
        out.replace_element(id, space.basis_columns(m, ColumnTag::Updated)?);
    }
    Ok(out)
}
