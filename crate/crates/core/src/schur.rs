//! Velocity elimination and the cell-centred pressure system.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dense_cholesky, pcg, BandedCholesky, CsrMatrix, LinearStats};
use crate::mfmfe::{BlockFactor, DivergenceMatrix, Rhs, VertexBlockMatrix};
use crate::offline::ReductionMap;

/// Controls for the pressure solve.
#[derive(Debug, Clone)]
pub struct LinearOptions {
    /// Relative residual tolerance for conjugate gradients.
    pub tol: f64,
    pub max_iter: usize,
    /// Cell layout `(nx, ny)`, used to pick a low-bandwidth ordering.
    pub shape: Option<(usize, usize)>,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions {
            tol: 1e-12,
            max_iter: 20_000,
            shape: None,
        }
    }
}

/// Pressure space of the solve.
#[derive(Debug, Clone, Copy)]
pub enum PressureSpace<'a> {
    /// One unknown per fine cell.
    Full,
    /// The span of the columns of a reduction map.
    Reduced(&'a ReductionMap),
}

#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub stats: LinearStats,
}

/// `BᵀA⁻¹B` over the free velocity DOFs.
fn pressure_operator(a: &VertexBlockMatrix, b: &DivergenceMatrix, free: &[bool]) -> Result<(CsrMatrix, BlockFactor)> {
    let fac = a.factor(free)?;
    let mut trip = Vec::new();
    for (dofs, inv) in fac.inverse_blocks() {
        for (i, &di) in dofs.iter().enumerate() {
            for (j, &dj) in dofs.iter().enumerate() {
                let m = inv[(i, j)];
                for &(ti, bi) in b.row(di) {
                    for &(tj, bj) in b.row(dj) {
                        trip.push((ti, tj, bi * m * bj));
                    }
                }
            }
        }
    }
    Ok((CsrMatrix::from_triplets(b.n_cells(), b.n_cells(), trip), fac))
}

/// `Rᵀ S R` for a sparse-column reduction map.
fn reduced_operator(s: &CsrMatrix, r: &ReductionMap) -> DMatrix<f64> {
    let m = r.len();
    let n = s.n_rows;
    let mut cell_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (k, col) in r.columns().iter().enumerate() {
        for (&c, &v) in col.cells.iter().zip(&col.values) {
            cell_cols[c].push((k, v));
        }
    }
    let mut out = DMatrix::zeros(m, m);
    let mut y = vec![0.0; n];
    let mut touched = Vec::new();
    let mut mark = vec![false; n];
    for (k, col) in r.columns().iter().enumerate() {
        for (&c, &v) in col.cells.iter().zip(&col.values) {
            // S is symmetric: row c is column c
            for (t, sv) in s.row(c) {
                if !mark[t] {
                    mark[t] = true;
                    touched.push(t);
                }
                y[t] += sv * v;
            }
        }
        for &t in &touched {
            for &(j, rv) in &cell_cols[t] {
                out[(j, k)] += rv * y[t];
            }
        }
        for &t in &touched {
            y[t] = 0.0;
            mark[t] = false;
        }
        touched.clear();
    }
    (&out + out.transpose()) * 0.5
}

enum PressureFactor<'a> {
    Banded(BandedCholesky, Option<Vec<usize>>),
    Iterative(LinearOptions),
    Reduced(&'a ReductionMap, DMatrix<f64>),
}

/// Velocity block and pressure system factored once for repeated solves
/// with the same matrices and constrained-DOF set.
pub struct FactoredSchur<'a> {
    a: &'a VertexBlockMatrix,
    b: &'a DivergenceMatrix,
    free: Vec<bool>,
    fac: BlockFactor,
    s: CsrMatrix,
    pressure: PressureFactor<'a>,
}

impl<'a> FactoredSchur<'a> {
    pub fn new(
        a: &'a VertexBlockMatrix,
        b: &'a DivergenceMatrix,
        free: &[bool],
        space: PressureSpace<'a>,
        opts: &LinearOptions,
    ) -> Result<Self> {
        let (s, fac) = pressure_operator(a, b, free)?;
        let pressure = match space {
            PressureSpace::Full => {
                let n = s.n_rows;
                let perm: Option<Vec<usize>> = match opts.shape {
                    Some((nx, ny)) if nx * ny == n && ny < nx => Some((0..n).map(|r| (r % nx) * ny + r / nx).collect()),
                    _ => None,
                };
                let sp = match &perm {
                    Some(p) => s.permute(p),
                    None => s.clone(),
                };
                let bw = sp.bandwidth() as f64;
                let nf = n as f64;
                if nf * bw * bw <= 1e10 && nf * (bw + 1.0) <= 5e7 {
                    PressureFactor::Banded(BandedCholesky::factor(&sp)?, perm)
                } else {
                    PressureFactor::Iterative(opts.clone())
                }
            }
            PressureSpace::Reduced(r) => {
                let sr = reduced_operator(&s, r);
                PressureFactor::Reduced(r, dense_cholesky(&sr, 1e-13)?)
            }
        };
        Ok(FactoredSchur {
            a,
            b,
            free: free.to_vec(),
            fac,
            s,
            pressure,
        })
    }

    /// The assembled `BᵀA⁻¹B` over fine cells.
    pub fn pressure_matrix(&self) -> &CsrMatrix {
        &self.s
    }

    /// Solves for one right-hand side; `rhs` must constrain the same DOFs.
    pub fn solve(&self, rhs: &Rhs) -> Result<LinearSolution> {
        let free = &self.free;
        debug_assert!(rhs.fixed.iter().zip(free).all(|(f, &fr)| f.is_none() == fr));
        let uc = rhs.fixed_values();
        let auc = self.a.mul(&uc);
        let g: Vec<f64> = (0..rhs.g.len())
            .map(|i| if free[i] { rhs.g[i] - auc[i] } else { 0.0 })
            .collect();
        let btuc = self.b.tmul(&uc);
        let f: Vec<f64> = rhs.f.iter().zip(&btuc).map(|(f, x)| f - x).collect();

        let w = self.fac.solve(&g);
        let btw = self.b.tmul(&w);
        let rp: Vec<f64> = btw.iter().zip(&f).map(|(x, y)| x - y).collect();

        let (pressure, stats) = match &self.pressure {
            PressureFactor::Banded(fac, perm) => {
                let n = rp.len();
                let x = match perm {
                    Some(p) => {
                        let mut pb = vec![0.0; n];
                        for r in 0..n {
                            pb[p[r]] = rp[r];
                        }
                        let px = fac.solve(&pb);
                        (0..n).map(|r| px[p[r]]).collect()
                    }
                    None => fac.solve(&rp),
                };
                (x, LinearStats { iterations: 1, residual: 0.0 })
            }
            PressureFactor::Iterative(opts) => pcg(&self.s, &rp, opts.tol, opts.max_iter)?,
            PressureFactor::Reduced(r, l) => {
                let c = cholesky_solve(l, &DVector::from_vec(r.restrict(&rp)));
                (r.expand(c.as_slice()), LinearStats { iterations: 1, residual: 0.0 })
            }
        };

        let bp = self.b.mul(&pressure);
        let corr = self.fac.solve(&bp);
        let velocity = (0..g.len())
            .map(|i| if free[i] { w[i] - corr[i] } else { uc[i] })
            .collect();
        Ok(LinearSolution {
            velocity,
            pressure,
            stats,
        })
    }
}

/// Eliminates the velocity and solves `BᵀA⁻¹B P = BᵀA⁻¹G - F` in the given
/// pressure space, then recovers `U = A⁻¹(G - B P)`. Constrained velocity
/// DOFs are returned at their prescribed values.
pub fn schur_solve(
    a: &VertexBlockMatrix,
    b: &DivergenceMatrix,
    rhs: &Rhs,
    space: PressureSpace<'_>,
    opts: &LinearOptions,
) -> Result<LinearSolution> {
    FactoredSchur::new(a, b, &rhs.free_mask(), space, opts)?.solve(rhs)
}

/// Dense solve of the full saddle-point system `[A B; Bᵀ 0]` for testing.
pub fn saddle_oracle(a: &VertexBlockMatrix, b: &DivergenceMatrix, rhs: &Rhs) -> Result<(Vec<f64>, Vec<f64>)> {
    let free = rhs.free_mask();
    let uc = rhs.fixed_values();
    let fdofs: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
    let nv = fdofs.len();
    let np = b.n_cells();
    if nv + np > 5000 {
        return Err(Error::InvalidArgument(format!(
            "saddle oracle limited to 5000 unknowns, got {}",
            nv + np
        )));
    }
    let ad = a.to_dense();
    let bd = b.to_dense();
    let mut k = DMatrix::zeros(nv + np, nv + np);
    let mut rhs_v = DVector::zeros(nv + np);
    let auc = &ad * DVector::from_vec(uc.clone());
    let btuc = bd.transpose() * DVector::from_vec(uc.clone());
    for (r, &i) in fdofs.iter().enumerate() {
        for (c, &j) in fdofs.iter().enumerate() {
            k[(r, c)] = ad[(i, j)];
        }
        for t in 0..np {
            k[(r, nv + t)] = bd[(i, t)];
            k[(nv + t, r)] = bd[(i, t)];
        }
        rhs_v[r] = rhs.g[i] - auc[i];
    }
    for t in 0..np {
        rhs_v[nv + t] = rhs.f[t] - btuc[t];
    }
    let lu = k.full_piv_lu();
    let diag = lu.u().diagonal();
    let dmax = diag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let dmin = diag.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if !(dmin > 1e-13 * dmax) {
        return Err(Error::Singular(format!(
            "saddle-point matrix is singular (pivot ratio {:.2e})",
            dmin / dmax
        )));
    }
    let x = lu.solve(&rhs_v).ok_or_else(|| Error::Singular("saddle-point matrix is singular".into()))?;
    let mut u = uc;
    for (r, &i) in fdofs.iter().enumerate() {
        u[i] = x[r];
    }
    Ok((u, x.rows(nv, np).iter().copied().collect()))
}
