//! Norms, relative errors and conservation checks.

use crate::error::{Error, Result};
use crate::fine_solver::FlowSolution;
use crate::grid::FineGrid;
use crate::mfmfe::corner_velocities;
use crate::offline::ReductionMap;

/// Net outward flux of `u` through each cell.
pub fn cell_outflux(grid: &FineGrid, u: &[f64]) -> Vec<f64> {
    (0..grid.n_cells())
        .map(|t| {
            grid.element_edges(t)
                .iter()
                .map(|&(e, sign)| sign * grid.edge(e).length * 0.5 * (u[2 * e] + u[2 * e + 1]))
                .sum()
        })
        .collect()
}

/// Cellwise constant divergence of `u`.
pub fn cell_divergence(grid: &FineGrid, u: &[f64]) -> Vec<f64> {
    cell_outflux(grid, u)
        .into_iter()
        .enumerate()
        .map(|(t, q)| q / grid.cell_area(t))
        .collect()
}

/// `Σ signed edge fluxes - ∫_t f` per cell, for cellwise constant `f`.
pub fn cell_flux_balance(grid: &FineGrid, u: &[f64], source: &[f64]) -> Vec<f64> {
    cell_outflux(grid, u)
        .into_iter()
        .enumerate()
        .map(|(t, q)| q - source[t] * grid.cell_area(t))
        .collect()
}

/// `(f - ∇·u, w)` for every column `w` of `r`.
pub fn coarse_balance(grid: &FineGrid, r: &ReductionMap, u: &[f64], source: &[f64]) -> Vec<f64> {
    let defect: Vec<f64> = cell_flux_balance(grid, u, source).into_iter().map(|x| -x).collect();
    r.restrict(&defect)
}

/// Area-weighted cell L2 norm.
pub fn pressure_norm(grid: &FineGrid, p: &[f64]) -> f64 {
    p.iter()
        .enumerate()
        .map(|(t, v)| v * v * grid.cell_area(t))
        .sum::<f64>()
        .sqrt()
}

/// Norm induced by `(v, v)_Q` with unit coefficient.
pub fn velocity_norm(grid: &FineGrid, u: &[f64]) -> Result<f64> {
    let vels = corner_velocities(grid, u)?;
    let mut s = 0.0;
    for (t, w) in vels.iter().enumerate() {
        let quad = grid.quad(t);
        for (c, v) in w.iter().enumerate() {
            let xh = crate::grid::REFERENCE_CORNERS[c];
            let (_, _, j) = quad.bilinear_map(nalgebra::Vector2::new(xh[0], xh[1]))?;
            s += 0.25 * j * v.norm_squared();
        }
    }
    Ok(s.sqrt())
}

/// Relative pressure and velocity errors `(Erp, Eru)` of `sol` against `reference`.
pub fn error_metrics(grid: &FineGrid, sol: &FlowSolution, reference: &FlowSolution) -> Result<(f64, f64)> {
    relative_errors(grid, &sol.pressure, &sol.velocity, &reference.pressure, &reference.velocity)
}

pub fn relative_errors(grid: &FineGrid, p: &[f64], u: &[f64], p_ref: &[f64], u_ref: &[f64]) -> Result<(f64, f64)> {
    let pn = pressure_norm(grid, p_ref);
    let un = velocity_norm(grid, u_ref)?;
    if pn == 0.0 || un == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    let dp: Vec<f64> = p.iter().zip(p_ref).map(|(a, b)| a - b).collect();
    let du: Vec<f64> = u.iter().zip(u_ref).map(|(a, b)| a - b).collect();
    Ok((pressure_norm(grid, &dp) / pn, velocity_norm(grid, &du)? / un))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Rectangle;
    use approx::assert_relative_eq;

    fn sol(p: Vec<f64>, u: Vec<f64>) -> FlowSolution {
        FlowSolution {
            pressure: p,
            velocity: u,
            iterations: 1,
            history: Vec::new(),
            converged: true,
        }
    }

    #[test]
    fn identical_solutions_have_zero_error() {
        let g = FineGrid::new(2, 2, Rectangle::unit()).unwrap();
        let s = sol(vec![1.0, 2.0, 3.0, 4.0], (0..g.n_dofs()).map(|d| d as f64).collect());
        assert_eq!(error_metrics(&g, &s, &s).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn doubled_pressure_has_unit_error() {
        let g = FineGrid::new(3, 1, Rectangle::unit()).unwrap();
        let u = vec![1.0; g.n_dofs()];
        let r = sol(vec![1.0, -2.0, 0.5], u.clone());
        let s = sol(vec![2.0, -4.0, 1.0], u);
        let (erp, eru) = error_metrics(&g, &s, &r).unwrap();
        assert_relative_eq!(erp, 1.0, epsilon = 1e-15);
        assert_eq!(eru, 0.0);
    }

    #[test]
    fn two_cell_hand_value() {
        let g = FineGrid::new(2, 1, Rectangle::new(0.0, 3.0, 0.0, 1.0)).unwrap();
        let (a1, a2) = (1.5, 1.5);
        let (p1, p2) = (2.0, 5.0);
        let (e1, e2) = (0.1, -0.3);
        let u = vec![1.0; g.n_dofs()];
        let r = sol(vec![p1, p2], u.clone());
        let s = sol(vec![p1 + e1, p2 + e2], u);
        let expected = ((e1 * e1 * a1 + e2 * e2 * a2) / (p1 * p1 * a1 + p2 * p2 * a2)).sqrt();
        assert_relative_eq!(error_metrics(&g, &s, &r).unwrap().0, expected, epsilon = 1e-15);
    }

    #[test]
    fn zero_reference_is_undefined() {
        let g = FineGrid::new(1, 1, Rectangle::unit()).unwrap();
        let z = sol(vec![0.0], vec![0.0; 8]);
        assert!(matches!(error_metrics(&g, &z, &z), Err(Error::UndefinedMetric)));
    }

    #[test]
    fn velocity_norm_of_uniform_flow() {
        let g = FineGrid::new(4, 2, Rectangle::new(0.0, 2.0, 0.0, 1.0)).unwrap();
        let u: Vec<f64> = (0..g.n_dofs())
            .map(|d| if g.edge(d / 2).axis == crate::grid::Axis::Vertical { 3.0 } else { 4.0 })
            .collect();
        assert_relative_eq!(velocity_norm(&g, &u).unwrap(), 5.0 * 2f64.sqrt(), epsilon = 1e-14);
        for x in cell_divergence(&g, &u) {
            assert!(x.abs() < 1e-14);
        }
    }
}
