//! Fine-grid Darcy-Forchheimer solver: Picard and Newton linearization with
//! a pressure Schur-complement solve per step.

use std::str::FromStr;

use nalgebra::Matrix2;

use crate::error::{Error, Result};
use crate::fields::ScalarCellField;
use crate::grid::FineGrid;
use crate::mfmfe::{
    assemble_divergence, assemble_rhs, assemble_velocity_matrix, corner_load, corner_velocities, BoundaryConditions,
    CoefficientAtCorners, DivergenceMatrix, Rhs, VertexBlockMatrix,
};
use crate::schur::{schur_solve, LinearOptions, LinearSolution, PressureSpace};

/// Model data on a fine grid.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: FineGrid,
    pub kappa: Vec<f64>,
    pub beta: Vec<f64>,
    pub mu: f64,
    pub rho: f64,
    /// Cell averages of the source `f`.
    pub source: Vec<f64>,
    pub bc: BoundaryConditions,
}

impl Problem {
    /// `μ = ρ = 1`, `f = 0`.
    pub fn new(grid: FineGrid, kappa: &ScalarCellField, beta: &ScalarCellField, bc: BoundaryConditions) -> Result<Self> {
        let n = grid.n_cells();
        if kappa.len() != n || beta.len() != n {
            return Err(Error::InvalidArgument(format!(
                "fields have {} and {} values, grid has {n} cells",
                kappa.len(),
                beta.len()
            )));
        }
        kappa.validate_positive()?;
        if let Some(b) = beta.values.iter().find(|b| !(**b >= 0.0) || !b.is_finite()) {
            return Err(Error::Domain(format!("Forchheimer coefficient must be nonnegative, got {b}")));
        }
        Ok(Problem {
            grid,
            kappa: kappa.values.clone(),
            beta: beta.values.clone(),
            mu: 1.0,
            rho: 1.0,
            source: vec![0.0; n],
            bc,
        })
    }

    pub fn with_source(mut self, source: Vec<f64>) -> Result<Self> {
        if source.len() != self.grid.n_cells() {
            return Err(Error::InvalidArgument(format!(
                "source has {} values, grid has {} cells",
                source.len(),
                self.grid.n_cells()
            )));
        }
        self.source = source;
        Ok(self)
    }

    pub fn with_fluid(mut self, mu: f64, rho: f64) -> Result<Self> {
        if !(mu > 0.0) || !(rho >= 0.0) {
            return Err(Error::InvalidArgument(format!("need mu > 0 and rho >= 0, got {mu}, {rho}")));
        }
        self.mu = mu;
        self.rho = rho;
        Ok(self)
    }

    /// `μ κ⁻¹` per cell.
    pub fn darcy_coefficient(&self) -> Vec<f64> {
        self.kappa.iter().map(|k| self.mu / k).collect()
    }

    /// `μ κ⁻¹ + β ρ |u|` with `|u|` given per element corner.
    pub fn picard_coefficient(&self, speeds: &[[f64; 4]]) -> CoefficientAtCorners {
        let vals: Vec<[f64; 4]> = speeds
            .iter()
            .enumerate()
            .map(|(t, s)| s.map(|v| self.mu / self.kappa[t] + self.beta[t] * self.rho * v))
            .collect();
        CoefficientAtCorners::from_corner_scalars(&vals)
    }

    pub fn discretize(&self) -> Result<Discretization> {
        Ok(Discretization {
            b: assemble_divergence(&self.grid),
            rhs: assemble_rhs(&self.grid, &self.source, &self.bc)?,
        })
    }
}

/// Operators that do not change between nonlinear iterations.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub b: DivergenceMatrix,
    pub rhs: Rhs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Picard,
    Newton,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "picard" => Ok(Scheme::Picard),
            "newton" => Ok(Scheme::Newton),
            _ => Err(Error::InvalidArgument(format!("unknown scheme '{s}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Picard => "picard",
            Scheme::Newton => "newton",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialGuess {
    Zero,
    /// Solve with `β = 0` first.
    Darcy,
}

#[derive(Debug, Clone)]
pub struct NonlinearConfig {
    pub scheme: Scheme,
    /// Tolerance on the larger of the relative pressure and velocity increments.
    pub tol_nl: f64,
    pub max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    pub initial: InitialGuess,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        NonlinearConfig {
            scheme: Scheme::Newton,
            tol_nl: 1e-8,
            max_iter: 200,
            linear_tol: 1e-12,
            linear_max_iter: 20_000,
            initial: InitialGuess::Darcy,
        }
    }
}

impl NonlinearConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_nl > 0.0) || !(self.linear_tol > 0.0) || self.max_iter == 0 || self.linear_max_iter == 0 {
            return Err(Error::InvalidArgument(format!("invalid nonlinear configuration {self:?}")));
        }
        Ok(())
    }

    pub(crate) fn linear_options(&self, grid: &FineGrid) -> LinearOptions {
        LinearOptions {
            tol: self.linear_tol,
            max_iter: self.linear_max_iter,
            shape: Some((grid.nx, grid.ny)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// Larger of the relative pressure and velocity increments.
    pub increment: f64,
    /// Euclidean norm of the nonlinear momentum residual on free DOFs.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct FlowSolution {
    /// One value per fine cell.
    pub pressure: Vec<f64>,
    /// One value per velocity DOF, constrained DOFs included.
    pub velocity: Vec<f64>,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
}

/// Newton tensor `C + βρ w wᵀ / |w|` and load `βρ|w|w` per corner.
fn newton_terms(problem: &Problem, u: &[f64]) -> Result<(CoefficientAtCorners, Vec<f64>)> {
    let grid = &problem.grid;
    let vels = corner_velocities(grid, u)?;
    let scale = vels
        .iter()
        .flat_map(|w| w.iter().map(|v| v.norm()))
        .fold(0.0, f64::max);
    let eps = 1e-14 * scale;
    let coeff = CoefficientAtCorners::from_fn(grid.n_cells(), |t, c| {
        let w = vels[t][c];
        let s = w.norm();
        let br = problem.beta[t] * problem.rho;
        let mut m = Matrix2::identity() * (problem.mu / problem.kappa[t] + br * s);
        if s > eps && s > 0.0 {
            m += w * w.transpose() * (br / s);
        }
        m
    });
    let mut load = vec![0.0; grid.n_dofs()];
    for t in 0..grid.n_cells() {
        let br = problem.beta[t] * problem.rho;
        if br == 0.0 {
            continue;
        }
        let quad = grid.quad(t);
        for (c, cd) in grid.corner_dofs(t).iter().enumerate() {
            let w = vels[t][c];
            let l = corner_load(&quad, c, w * (br * w.norm()))?;
            for s in 0..2 {
                load[cd[s].dof] += cd[s].sign * l[s];
            }
        }
    }
    Ok((coeff, load))
}

fn picard_matrix(problem: &Problem, u: &[f64]) -> Result<VertexBlockMatrix> {
    let speeds: Vec<[f64; 4]> = corner_velocities(&problem.grid, u)?
        .into_iter()
        .map(|w| w.map(|v| v.norm()))
        .collect();
    assemble_velocity_matrix(&problem.grid, &problem.picard_coefficient(&speeds))
}

/// `‖A(u) u + B p - G‖` over free DOFs with the Picard-form matrix.
fn momentum_residual(a: &VertexBlockMatrix, disc: &Discretization, u: &[f64], p: &[f64]) -> f64 {
    let au = a.mul(u);
    let bp = disc.b.mul(p);
    disc.rhs
        .fixed
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_none())
        .map(|(i, _)| (au[i] + bp[i] - disc.rhs.g[i]).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// One linear solve with coefficient `coeff` and optional extra velocity load.
pub fn solve_linear(
    problem: &Problem,
    disc: &Discretization,
    coeff: &CoefficientAtCorners,
    extra_g: Option<&[f64]>,
    space: PressureSpace<'_>,
    opts: &LinearOptions,
) -> Result<LinearSolution> {
    let a = assemble_velocity_matrix(&problem.grid, coeff)?;
    match extra_g {
        None => schur_solve(&a, &disc.b, &disc.rhs, space, opts),
        Some(extra) => {
            let mut rhs = disc.rhs.clone();
            for (g, e) in rhs.g.iter_mut().zip(extra) {
                *g += e;
            }
            schur_solve(&a, &disc.b, &rhs, space, opts)
        }
    }
}

/// Darcy solve (`β = 0`) in the given pressure space.
pub fn solve_darcy(problem: &Problem, disc: &Discretization, space: PressureSpace<'_>, opts: &LinearOptions) -> Result<LinearSolution> {
    let coeff = CoefficientAtCorners::from_cells(&problem.darcy_coefficient());
    solve_linear(problem, disc, &coeff, None, space, opts)
}

/// Fine-grid nonlinear solve.
pub fn solve_nonlinear(problem: &Problem, cfg: &NonlinearConfig) -> Result<FlowSolution> {
    let disc = problem.discretize()?;
    solve_nonlinear_in(problem, &disc, PressureSpace::Full, cfg)
}

fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let diff: Vec<f64> = new.iter().zip(old).map(|(a, b)| a - b).collect();
    let d = norm(&diff);
    if d == 0.0 {
        0.0
    } else {
        d / norm(old).max(1e-300)
    }
}

/// Nonlinear solve with the pressure restricted to `space`.
pub fn solve_nonlinear_in(
    problem: &Problem,
    disc: &Discretization,
    space: PressureSpace<'_>,
    cfg: &NonlinearConfig,
) -> Result<FlowSolution> {
    cfg.validate()?;
    let opts = cfg.linear_options(&problem.grid);
    let (mut u, mut p) = match cfg.initial {
        InitialGuess::Darcy => {
            let s = solve_darcy(problem, disc, space, &opts)?;
            (s.velocity, s.pressure)
        }
        InitialGuess::Zero => (disc.rhs.fixed_values(), vec![0.0; problem.grid.n_cells()]),
    };
    let mut history: Vec<IterationRecord> = Vec::new();
    for it in 1..=cfg.max_iter {
        let (a, extra) = match cfg.scheme {
            Scheme::Picard => (picard_matrix(problem, &u)?, None),
            Scheme::Newton => {
                let (coeff, load) = newton_terms(problem, &u)?;
                (assemble_velocity_matrix(&problem.grid, &coeff)?, Some(load))
            }
        };
        if let Some(last) = history.last_mut() {
            last.residual = match &extra {
                None => momentum_residual(&a, disc, &u, &p),
                Some(_) => momentum_residual(&picard_matrix(problem, &u)?, disc, &u, &p),
            };
        }
        let sol = match extra {
            None => schur_solve(&a, &disc.b, &disc.rhs, space, &opts)?,
            Some(load) => {
                let mut rhs = disc.rhs.clone();
                for (g, e) in rhs.g.iter_mut().zip(&load) {
                    *g += e;
                }
                schur_solve(&a, &disc.b, &rhs, space, &opts)?
            }
        };
        let increment = relative_change(&sol.pressure, &p).max(relative_change(&sol.velocity, &u));
        u = sol.velocity;
        p = sol.pressure;
        history.push(IterationRecord {
            increment,
            residual: f64::NAN,
        });
        if increment <= cfg.tol_nl {
            let a = picard_matrix(problem, &u)?;
            history.last_mut().unwrap().residual = momentum_residual(&a, disc, &u, &p);
            return Ok(FlowSolution {
                pressure: p,
                velocity: u,
                iterations: it,
                history,
                converged: true,
            });
        }
    }
    let a = picard_matrix(problem, &u)?;
    history.last_mut().unwrap().residual = momentum_residual(&a, disc, &u, &p);
    Err(Error::NonConvergence(Box::new(FlowSolution {
        pressure: p,
        velocity: u,
        iterations: cfg.max_iter,
        history,
        converged: false,
    })))
}
