//! Element kernels on a bilinear quadrilateral.
//!
//! Local DOFs here are outward normal components at the corners, in
//! physical units (reference DOF divided by the edge length).

use nalgebra::{Matrix2, Vector2};

use super::reference::{reference_normal, Bdm1Function};
use crate::error::{Error, Result};
use crate::grid::{Quad, CORNER_EDGES, REFERENCE_CORNERS};

fn corner_point(corner: usize) -> Vector2<f64> {
    Vector2::new(REFERENCE_CORNERS[corner][0], REFERENCE_CORNERS[corner][1])
}

/// Piola image `v = DF v̂ / J` at `F(xh)`; returns `(x, v)`.
pub fn piola(quad: &Quad, f: &Bdm1Function, xh: Vector2<f64>) -> Result<(Vector2<f64>, Vector2<f64>)> {
    let (x, df, j) = quad.bilinear_map(xh)?;
    Ok((x, df * f.eval(xh) / j))
}

/// Piola image evaluated at a physical point.
pub fn piola_at(quad: &Quad, f: &Bdm1Function, x: Vector2<f64>) -> Result<Vector2<f64>> {
    let xh = quad.inverse_map(x)?;
    Ok(piola(quad, f, xh)?.1)
}

fn corner_normals(quad: &Quad, corner: usize) -> Result<Matrix2<f64>> {
    let [ea, eb] = CORNER_EDGES[corner];
    let n = Matrix2::from_rows(&[
        quad.outward_normal(ea).transpose(),
        quad.outward_normal(eb).transpose(),
    ]);
    if n.determinant().abs() < 1e-12 {
        return Err(Error::SingularCorner {
            element: quad.id,
            corner,
        });
    }
    Ok(n)
}

/// Velocity at a corner from its two outward normal components.
pub fn corner_velocity_local(quad: &Quad, corner: usize, dofs: [f64; 2]) -> Result<(Vector2<f64>, f64)> {
    let n = corner_normals(quad, corner)?;
    let w = n.lu().solve(&Vector2::new(dofs[0], dofs[1])).ok_or(Error::SingularCorner {
        element: quad.id,
        corner,
    })?;
    Ok((w, w.norm()))
}

/// Corner contribution `(|t̂|/4) M̂(r̂_c)` of `(C u, v)_Q` restricted to the
/// corner's two local DOFs, with `M̂ = DFᵀ C DF / J`.
pub fn corner_block(quad: &Quad, corner: usize, coeff: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let (_, df, j) = quad.bilinear_map(corner_point(corner))?;
    let m_hat = df.transpose() * coeff * df / j;
    let [ea, eb] = CORNER_EDGES[corner];
    let lens = [quad.edge_length(ea), quad.edge_length(eb)];
    let mut out = Matrix2::zeros();
    for a in 0..2 {
        for b in 0..2 {
            let na = reference_normal(corner, a);
            let nb = reference_normal(corner, b);
            out[(a, b)] = 0.25 * lens[a] * lens[b] * na.dot(&(m_hat * nb));
        }
    }
    Ok(out)
}

/// Same block computed from physical corner values: `(J/4) N⁻ᵀ C N⁻¹`.
pub fn corner_block_physical(quad: &Quad, corner: usize, coeff: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let (_, _, j) = quad.bilinear_map(corner_point(corner))?;
    let n_inv = corner_normals(quad, corner)?
        .try_inverse()
        .ok_or(Error::SingularCorner { element: quad.id, corner })?;
    Ok(n_inv.transpose() * coeff * n_inv * (0.25 * j))
}

/// Corner contribution of `(q, v)_Q` for a pointwise vector field `q`
/// sampled at the corner.
pub fn corner_load(quad: &Quad, corner: usize, q: Vector2<f64>) -> Result<[f64; 2]> {
    let (_, _, j) = quad.bilinear_map(corner_point(corner))?;
    let n_inv = corner_normals(quad, corner)?
        .try_inverse()
        .ok_or(Error::SingularCorner { element: quad.id, corner })?;
    let l = n_inv.transpose() * q * (0.25 * j);
    Ok([l.x, l.y])
}
