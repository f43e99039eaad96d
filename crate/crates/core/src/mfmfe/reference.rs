//! BDM1 on the reference square.
//!
//! A function is `P1(t̂)² + r curl(x̂²ŷ) + s curl(x̂ŷ²)`:
//!
//! ```text
//! v̂ = ( α1 x̂ + β1 ŷ + γ1 + r x̂² + 2s x̂ŷ ,
//!       α2 x̂ + β2 ŷ + γ2 - 2r x̂ŷ - s ŷ² )
//! ```
//!
//! The DOFs are the outward normal components at the four corners, two per
//! corner (x-normal slot first).

use std::sync::OnceLock;

use nalgebra::{SMatrix, Vector2};

use crate::grid::REFERENCE_CORNERS;

/// Coefficients `[α1, β1, γ1, α2, β2, γ2, r, s]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bdm1Function {
    pub coeffs: [f64; 8],
}

impl Bdm1Function {
    pub fn eval(&self, xh: Vector2<f64>) -> Vector2<f64> {
        let [a1, b1, g1, a2, b2, g2, r, s] = self.coeffs;
        let (x, y) = (xh.x, xh.y);
        Vector2::new(
            a1 * x + b1 * y + g1 + r * x * x + 2.0 * s * x * y,
            a2 * x + b2 * y + g2 - 2.0 * r * x * y - s * y * y,
        )
    }

    /// Divergence; constant for every member of the space.
    pub fn divergence(&self) -> f64 {
        self.coeffs[0] + self.coeffs[4]
    }

    pub fn combine(weights: &[f64; 8], functions: &[Bdm1Function; 8]) -> Bdm1Function {
        let mut coeffs = [0.0; 8];
        for (w, f) in weights.iter().zip(functions) {
            for (c, fc) in coeffs.iter_mut().zip(f.coeffs) {
                *c += w * fc;
            }
        }
        Bdm1Function { coeffs }
    }
}

/// Unit outward normal of the reference square at `corner` for `slot`.
pub fn reference_normal(corner: usize, slot: usize) -> Vector2<f64> {
    match (corner, slot) {
        (0 | 3, 0) => Vector2::new(-1.0, 0.0),
        (1 | 2, 0) => Vector2::new(1.0, 0.0),
        (0 | 1, 1) => Vector2::new(0.0, -1.0),
        (2 | 3, 1) => Vector2::new(0.0, 1.0),
        _ => panic!("corner {corner} slot {slot} out of range"),
    }
}

fn monomial(p: usize, x: f64, y: f64) -> Vector2<f64> {
    match p {
        0 => Vector2::new(x, 0.0),
        1 => Vector2::new(y, 0.0),
        2 => Vector2::new(1.0, 0.0),
        3 => Vector2::new(0.0, x),
        4 => Vector2::new(0.0, y),
        5 => Vector2::new(0.0, 1.0),
        6 => Vector2::new(x * x, -2.0 * x * y),
        7 => Vector2::new(2.0 * x * y, -y * y),
        _ => unreachable!(),
    }
}

fn basis_table() -> &'static [Bdm1Function; 8] {
    static TABLE: OnceLock<[Bdm1Function; 8]> = OnceLock::new();
    TABLE.get_or_init(|| {
        // dofs[(corner, slot)][param]
        let mut dofs = SMatrix::<f64, 8, 8>::zeros();
        for c in 0..4 {
            let [x, y] = REFERENCE_CORNERS[c];
            for s in 0..2 {
                let n = reference_normal(c, s);
                for p in 0..8 {
                    dofs[(2 * c + s, p)] = monomial(p, x, y).dot(&n);
                }
            }
        }
        let inv = dofs.try_inverse().expect("BDM1 DOF matrix is unisolvent");
        std::array::from_fn(|k| Bdm1Function {
            coeffs: std::array::from_fn(|p| inv[(p, k)]),
        })
    })
}

/// The basis function dual to the DOF `(corner, slot)`.
pub fn reference_basis(corner: usize, slot: usize) -> Bdm1Function {
    basis_table()[2 * corner + slot]
}

pub fn all_reference_basis() -> &'static [Bdm1Function; 8] {
    basis_table()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn at(c: usize) -> Vector2<f64> {
        Vector2::new(REFERENCE_CORNERS[c][0], REFERENCE_CORNERS[c][1])
    }

    #[test]
    fn kronecker_property() {
        for i in 0..4 {
            for j in 0..2 {
                let v = reference_basis(i, j);
                for s in 0..4 {
                    for l in 0..2 {
                        let val = v.eval(at(s)).dot(&reference_normal(s, l));
                        let expected = if (i, j) == (s, l) { 1.0 } else { 0.0 };
                        assert!((val - expected).abs() < 1e-14, "v{i}{j} at ({s},{l}) = {val}");
                    }
                }
            }
        }
        // first entry: v̂_11 · n̂_11 at r̂1 = 1
        assert!((reference_basis(0, 0).eval(at(0)).dot(&reference_normal(0, 0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn basis_is_linearly_independent() {
        let m = DMatrix::from_fn(8, 8, |p, k| all_reference_basis()[k].coeffs[p]);
        assert_eq!(m.rank(1e-12), 8);
    }

    #[test]
    fn divergence_matches_symbolic_derivative() {
        // central differences on the polynomial are exact up to rounding for quadratics
        let h = 1e-4;
        for f in all_reference_basis() {
            for xh in [[0.2, 0.3], [0.9, 0.1], [0.5, 0.5]] {
                let p = Vector2::new(xh[0], xh[1]);
                let dx = (f.eval(p + Vector2::new(h, 0.0)).x - f.eval(p - Vector2::new(h, 0.0)).x) / (2.0 * h);
                let dy = (f.eval(p + Vector2::new(0.0, h)).y - f.eval(p - Vector2::new(0.0, h)).y) / (2.0 * h);
                assert!((dx + dy - f.divergence()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normal_traces_are_linear_on_edges() {
        // second difference of v·n along each edge vanishes
        for f in all_reference_basis() {
            for (a, b, n) in [
                ([0.0, 0.0], [1.0, 0.0], [0.0, -1.0]),
                ([1.0, 0.0], [1.0, 1.0], [1.0, 0.0]),
                ([1.0, 1.0], [0.0, 1.0], [0.0, 1.0]),
                ([0.0, 1.0], [0.0, 0.0], [-1.0, 0.0]),
            ] {
                let pa = Vector2::new(a[0], a[1]);
                let pb = Vector2::new(b[0], b[1]);
                let n = Vector2::new(n[0], n[1]);
                let g = |t: f64| f.eval(pa + (pb - pa) * t).dot(&n);
                assert!((g(0.0) - 2.0 * g(0.5) + g(1.0)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn edge_flux_sums_to_divergence() {
        for f in all_reference_basis() {
            // mean of endpoint normal values times unit edge length, per edge
            let mut total = 0.0;
            for (c0, c1, k) in [(0, 1, 1), (1, 2, 0), (2, 3, 1), (3, 0, 0)] {
                let n = reference_normal(c0, k);
                total += 0.5 * (f.eval(at(c0)).dot(&n) + f.eval(at(c1)).dot(&n));
            }
            assert!((total - f.divergence()).abs() < 1e-14);
        }
    }
}
