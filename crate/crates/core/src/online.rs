//! Online enrichment of the multiscale pressure space with residual-driven
//! local basis functions.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fine_solver::{solve_linear, Discretization, FlowSolution, Problem};
use crate::grid::{CellRect, CoarseGrid, FineGrid};
use crate::metrics::{cell_divergence, relative_errors};
use crate::mfmfe::{
    assemble_divergence, assemble_rhs, assemble_velocity_matrix, corner_speeds, BcKind, BoundaryConditions,
    BoundaryValue, CoefficientAtCorners,
};
use crate::offline::{offline_residuals, select_by_fraction, BasisColumn, ColumnTag, ReductionMap};
use crate::schur::{schur_solve, LinearOptions, PressureSpace};

/// Relative norm a candidate must keep after projection to be accepted.
pub const PROJECTION_REJECT_TOL: f64 = 1e-10;
/// Local defect `‖f - ∇·u‖`, relative to the gross local flux, below which
/// no online function is computed.
pub const DEFECT_FLOOR: f64 = 1e-10;

/// Coefficient used by the local problems and the multiscale re-solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `μκ⁻¹ + βρ|u_ms|` with the current multiscale velocity.
    Updating,
    /// `μκ⁻¹ + βρ|u_off|`, frozen at the offline solution.
    FixedOffline,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "updating" => Ok(Variant::Updating),
            "fixed" | "fixed_offline" | "fixed-offline" => Ok(Variant::FixedOffline),
            _ => Err(Error::Configuration(format!("unknown variant `{s}` (expected updating or fixed)"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Updating => "updating",
            Variant::FixedOffline => "fixed_offline",
        })
    }
}

/// Choice of elements receiving online functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Uniform,
    Adaptive,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Mode::Uniform),
            "adaptive" => Ok(Mode::Adaptive),
            _ => Err(Error::Configuration(format!("unknown mode `{s}` (expected uniform or adaptive)"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Uniform => "uniform",
            Mode::Adaptive => "adaptive",
        })
    }
}

/// One row of the enrichment history. Row zero holds the starting state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    /// Sweep number, zero for the starting state.
    pub level: usize,
    /// Color sub-iteration within the sweep, 1 to 4.
    pub subiter: usize,
    pub dim: usize,
    pub n_added: usize,
    /// `NaN` without a reference solution.
    pub erp: f64,
    pub eru: f64,
    /// Sum of the online residuals after the sub-iteration.
    pub total_residual: f64,
}

/// Parity classes `S1..S4` of the coarse elements: `(even I, even J)`,
/// `(even I, odd J)`, `(odd I, even J)`, `(odd I, odd J)` with zero-based
/// indices, each in increasing element order.
pub fn color_classes(coarse: &CoarseGrid) -> [Vec<usize>; 4] {
    let mut out: [Vec<usize>; 4] = Default::default();
    for (id, el) in coarse.elements.iter().enumerate() {
        let (i, j) = el.index;
        out[2 * (i % 2) + j % 2].push(id);
    }
    out
}

/// Index of the first sweep whose final `Eru` differs from the previous
/// sweep's by less than `rel` relative, if any.
pub fn plateau_sweep(history: &[HistoryRow], rel: f64) -> Option<usize> {
    let ends = sweep_end_rows(history);
    ends.windows(2)
        .find(|w| (w[1].eru - w[0].eru).abs() < rel * w[0].eru.abs())
        .map(|w| w[1].level)
}

/// The starting row and the last row of every sweep.
pub fn sweep_end_rows(history: &[HistoryRow]) -> Vec<HistoryRow> {
    let mut out: Vec<HistoryRow> = Vec::new();
    for row in history {
        match out.last_mut() {
            Some(last) if last.level == row.level => *last = *row,
            _ => out.push(*row),
        }
    }
    out
}

/// CSV text with header `level,subiter,dim_Wms,n_added,Erp,Eru,total_residual`.
pub fn history_csv(history: &[HistoryRow]) -> String {
    let mut s = String::from("level,subiter,dim_Wms,n_added,Erp,Eru,total_residual\n");
    for r in history {
        let _ = writeln!(
            s,
            "{},{},{},{},{:e},{:e},{:e}",
            r.level, r.subiter, r.dim, r.n_added, r.erp, r.eru, r.total_residual
        );
    }
    s
}

/// Multiscale space, current solution and history of an enrichment run.
pub struct EnrichmentState<'a> {
    pub problem: &'a Problem,
    pub disc: &'a Discretization,
    pub coarse: &'a CoarseGrid,
    pub variant: Variant,
    pub r: ReductionMap,
    pub solution: FlowSolution,
    /// Velocity of the offline solution.
    pub u_off: Vec<f64>,
    /// Number of completed sub-iterations that changed the space.
    pub level: usize,
    pub history: Vec<HistoryRow>,
    pub reference: Option<&'a FlowSolution>,
    pub opts: LinearOptions,
    fixed_coeff: Option<CoefficientAtCorners>,
}

impl<'a> EnrichmentState<'a> {
    /// Starts from the offline space `r` and its solution.
    pub fn new(
        problem: &'a Problem,
        disc: &'a Discretization,
        coarse: &'a CoarseGrid,
        r: ReductionMap,
        offline: FlowSolution,
        variant: Variant,
        reference: Option<&'a FlowSolution>,
    ) -> Result<Self> {
        if r.n_cells() != problem.grid.n_cells() || offline.pressure.len() != problem.grid.n_cells() {
            return Err(Error::InvalidArgument("reduction map or solution does not match the grid".into()));
        }
        let fixed_coeff = match variant {
            Variant::FixedOffline => Some(problem.picard_coefficient(&corner_speeds(&problem.grid, &offline.velocity)?)),
            Variant::Updating => None,
        };
        let u_off = offline.velocity.clone();
        let mut state = EnrichmentState {
            problem,
            disc,
            coarse,
            variant,
            r,
            solution: offline,
            u_off,
            level: 0,
            history: Vec::new(),
            reference,
            opts: LinearOptions {
                shape: Some((problem.grid.nx, problem.grid.ny)),
                ..Default::default()
            },
            fixed_coeff,
        };
        let row = state.row(0, 0, 0)?;
        state.history.push(row);
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    fn grid(&self) -> &FineGrid {
        &self.problem.grid
    }

    /// Coefficient of the current level.
    pub fn coefficient(&self) -> Result<CoefficientAtCorners> {
        match &self.fixed_coeff {
            Some(c) => Ok(c.clone()),
            None => Ok(self
                .problem
                .picard_coefficient(&corner_speeds(self.grid(), &self.solution.velocity)?)),
        }
    }

    /// `∫_{T_i} |f - ∇·u_ms|²` per coarse element.
    pub fn online_residuals(&self) -> Vec<f64> {
        offline_residuals(self.grid(), self.coarse, &self.solution.velocity, &self.problem.source)
    }

    fn row(&self, level: usize, subiter: usize, n_added: usize) -> Result<HistoryRow> {
        let (erp, eru) = match self.reference {
            Some(rf) => relative_errors(
                self.grid(),
                &self.solution.pressure,
                &self.solution.velocity,
                &rf.pressure,
                &rf.velocity,
            )?,
            None => (f64::NAN, f64::NAN),
        };
        Ok(HistoryRow {
            level,
            subiter,
            dim: self.dim(),
            n_added,
            erp,
            eru,
            total_residual: self.online_residuals().iter().sum(),
        })
    }

    /// Online function of element `id` for the current solution, or `None`
    /// when it adds nothing to the element's columns.
    pub fn online_basis(&self, id: usize) -> Result<Option<BasisColumn>> {
        let coeff = self.coefficient()?;
        online_basis_with(self.problem, self.coarse, &self.r, &coeff, &self.solution.velocity, id)
    }

    /// One linearized solve in the current space with the coefficient of
    /// the current level.
    pub fn ms_solve(&self) -> Result<FlowSolution> {
        let coeff = self.coefficient()?;
        let sol = solve_linear(
            self.problem,
            self.disc,
            &coeff,
            None,
            PressureSpace::Reduced(&self.r),
            &self.opts,
        )?;
        Ok(FlowSolution {
            pressure: sol.pressure,
            velocity: sol.velocity,
            iterations: 1,
            history: Vec::new(),
            converged: true,
        })
    }

    /// Adds online functions on `elements`, re-solves if any were accepted,
    /// and records a history row. Returns the number of accepted functions.
    pub fn enrich_elements(&mut self, elements: &[usize], level: usize, subiter: usize) -> Result<usize> {
        let coeff = self.coefficient()?;
        let mut accepted = Vec::new();
        for &id in elements {
            if let Some(col) = online_basis_with(self.problem, self.coarse, &self.r, &coeff, &self.solution.velocity, id)?
            {
                accepted.push(col);
            }
        }
        let n = accepted.len();
        for col in accepted {
            self.r.push(col);
        }
        if n > 0 {
            self.solution = self.ms_solve()?;
            self.level += 1;
        }
        let row = self.row(level, subiter, n)?;
        self.history.push(row);
        Ok(n)
    }

    fn sweeps_done(&self) -> usize {
        self.history.last().map_or(0, |r| r.level)
    }

    /// `sweeps` full passes over the four color classes, numbered after
    /// any earlier sweeps.
    pub fn enrich_uniform(&mut self, sweeps: usize) -> Result<()> {
        let classes = color_classes(self.coarse);
        let start = self.sweeps_done();
        for sweep in start + 1..=start + sweeps {
            for (k, class) in classes.iter().enumerate() {
                self.enrich_elements(class, sweep, k + 1)?;
            }
        }
        Ok(())
    }

    /// `sweeps` passes, each enriching only the elements selected by the
    /// `xi`-fraction rule at the start of the sweep, color class by color
    /// class.
    pub fn enrich_adaptive(&mut self, xi: f64, sweeps: usize) -> Result<()> {
        let classes = color_classes(self.coarse);
        let start = self.sweeps_done();
        for sweep in start + 1..=start + sweeps {
            let mut selected = select_by_fraction(&self.online_residuals(), xi)?;
            selected.sort_unstable();
            for (k, class) in classes.iter().enumerate() {
                let part: Vec<usize> = class.iter().copied().filter(|id| selected.binary_search(id).is_ok()).collect();
                if !part.is_empty() {
                    self.enrich_elements(&part, sweep, k + 1)?;
                }
            }
        }
        Ok(())
    }

    /// Enriches in the given mode; `xi` is only used by the adaptive mode.
    pub fn enrich(&mut self, mode: Mode, xi: f64, sweeps: usize) -> Result<()> {
        match mode {
            Mode::Uniform => self.enrich_uniform(sweeps),
            Mode::Adaptive => self.enrich_adaptive(xi, sweeps),
        }
    }
}

/// Cells of `plus` pinned to zero pressure: `plus` minus `inner`, or the
/// outer ring of `plus` when that is empty. Local cell numbering.
fn pinned_cells(plus: &CellRect, inner: &CellRect) -> Vec<bool> {
    let (nx, ny) = (plus.nx(), plus.ny());
    let mut pinned = vec![false; nx * ny];
    let mut any = false;
    for j in 0..ny {
        for i in 0..nx {
            if !inner.contains(i + plus.i0, j + plus.j0) {
                pinned[j * nx + i] = true;
                any = true;
            }
        }
    }
    if !any {
        for j in 0..ny {
            for i in 0..nx {
                if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
                    pinned[j * nx + i] = true;
                }
            }
        }
    }
    pinned
}

/// Online function of element `id` for velocity `u` and local coefficient
/// `coeff`, orthogonalized against the columns of `r` on that element.
pub fn online_basis_with(
    problem: &Problem,
    coarse: &CoarseGrid,
    r: &ReductionMap,
    coeff: &CoefficientAtCorners,
    u: &[f64],
    id: usize,
) -> Result<Option<BasisColumn>> {
    let grid = &problem.grid;
    let wrap = |e| Error::local(id, None, e);
    let plus = coarse.oversampled(id, 1);
    let sub = grid.subgrid(&plus).map_err(wrap)?;
    let lg = &sub.grid;

    let div = cell_divergence(grid, u);
    let mut defect: Vec<f64> = sub.cells.iter().map(|&t| problem.source[t] - div[t]).collect();
    let area: Vec<f64> = sub.cells.iter().map(|&t| grid.cell_area(t)).collect();
    let total_area: f64 = area.iter().sum();
    let mean = defect.iter().zip(&area).map(|(d, a)| d * a).sum::<f64>() / total_area;
    for d in &mut defect {
        *d -= mean;
    }
    let defect_norm = defect.iter().zip(&area).map(|(d, a)| d * d * a).sum::<f64>().sqrt();
    let gross = sub
        .cells
        .iter()
        .map(|&t| {
            let a = grid.cell_area(t);
            let g = problem.source[t].abs() + gross_flux(grid, u, t) / a;
            g * g * a
        })
        .sum::<f64>()
        .sqrt();
    if !(defect_norm > DEFECT_FLOOR * gross) {
        return Ok(None);
    }

    let local_coeff = CoefficientAtCorners {
        values: sub.cells.iter().map(|&t| coeff.values[t]).collect(),
    };
    let a = assemble_velocity_matrix(lg, &local_coeff).map_err(wrap)?;
    let b = assemble_divergence(lg);
    let bc = BoundaryConditions::uniform(lg, BcKind::Neumann, BoundaryValue::Constant(0.0));
    let rhs = assemble_rhs(lg, &defect, &bc).map_err(wrap)?;
    let inner = coarse.elements[id].rect;
    let pinned = pinned_cells(&plus, &inner);
    let free_cells: Vec<usize> = (0..lg.n_cells()).filter(|&c| !pinned[c]).collect();
    let ident = ReductionMap::identity(&vec![0; lg.n_cells()]);
    let mut space = ReductionMap::new(lg.n_cells());
    for &c in &free_cells {
        space.push(ident.columns()[c].clone());
    }
    let opts = LinearOptions::default();
    let sol = schur_solve(&a, &b, &rhs, PressureSpace::Reduced(&space), &opts).map_err(wrap)?;

    let cells = coarse.elements[id].fine_elements.clone();
    let local_of = |t: usize| {
        let (i, j) = grid.cell_ij(t);
        (j - plus.j0) * plus.nx() + (i - plus.i0)
    };
    let mut values: Vec<f64> = cells.iter().map(|&t| sol.pressure[local_of(t)]).collect();
    let weights: Vec<f64> = cells.iter().map(|&t| grid.cell_area(t)).collect();
    let l2 = |v: &[f64]| v.iter().zip(&weights).map(|(x, w)| x * x * w).sum::<f64>().sqrt();
    let before = l2(&values);
    if !(before > 0.0) {
        return Ok(None);
    }
    let existing: Vec<&BasisColumn> = r.columns_of(id).into_iter().map(|k| &r.columns()[k]).collect();
    let index: HashMap<usize, usize> = cells.iter().enumerate().map(|(k, &t)| (t, k)).collect();
    for _pass in 0..2 {
        for col in &existing {
            let dot: f64 = col
                .cells
                .iter()
                .zip(&col.values)
                .filter_map(|(t, v)| index.get(t).map(|&k| values[k] * v * weights[k]))
                .sum();
            for (t, v) in col.cells.iter().zip(&col.values) {
                if let Some(&k) = index.get(t) {
                    values[k] -= dot * v;
                }
            }
        }
    }
    let after = l2(&values);
    if !(after > PROJECTION_REJECT_TOL * before) {
        return Ok(None);
    }
    for v in &mut values {
        *v /= after;
    }
    Ok(Some(BasisColumn {
        element: id,
        tag: ColumnTag::Online,
        cells,
        values,
    }))
}

/// `Σ |edge flux|` of cell `t`.
fn gross_flux(grid: &FineGrid, u: &[f64], t: usize) -> f64 {
    grid.element_edges(t)
        .iter()
        .map(|&(e, _)| (grid.edge(e).length * 0.5 * (u[2 * e] + u[2 * e + 1])).abs())
        .sum()
}
