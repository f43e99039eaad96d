//! Sparse and dense linear algebra used by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; n_rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[r]..self.indptr[r + 1];
        self.indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows)
            .map(|r| self.row(r).find(|&(c, _)| c == r).map_or(0.0, |(_, v)| v))
            .collect()
    }

    /// Largest `|r - c|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n_rows)
            .flat_map(|r| self.row(r).map(move |(c, _)| r.abs_diff(c)))
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    /// Symmetric permutation `P A Pᵀ` with `new = perm[old]`.
    pub fn permute(&self, perm: &[usize]) -> CsrMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                trip.push((perm[r], perm[c], v));
            }
        }
        CsrMatrix::from_triplets(self.n_rows, self.n_cols, trip)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone)]
pub struct LinearStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD `a`.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, LinearStats)> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, LinearStats { iterations: 0, residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = 1.0;
    for it in 1..=max_iter {
        let ap = a.mul(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        if res <= tol {
            return Ok((x, LinearStats { iterations: it, residual: res }));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolver {
        iterations: max_iter,
        residual: res,
    })
}

/// Cholesky factor of a symmetric banded matrix, lower band stored by row.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// `l[i * (bw + 1) + (j + bw - i)]` holds `L[i][j]` for `i - bw <= j <= i`.
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n_rows;
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    l[i * w + j + bw - i] += v;
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = l[i * w + j + bw - i];
                for k in k0..j {
                    s -= l[i * w + k + bw - i] * l[j * w + k + bw - j];
                }
                if j == i {
                    if !(s > 1e-13 * l[i * w + bw].abs()) {
                        return Err(Error::Singular(format!("pressure system not positive definite at row {i}")));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + j + bw - i] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandedCholesky { n, bw, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + k + bw - i] * y[k];
            }
            y[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.l[k * w + i + bw - k] * y[k];
            }
            y[i] = s / self.l[i * w + bw];
        }
        y
    }
}

/// Dense Cholesky that names the columns whose pivots collapse.
pub fn dense_cholesky(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut l = DMatrix::zeros(n, n);
    let mut bad = Vec::new();
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > rel_tol * m[(j, j)].abs()) {
            bad.push(j);
            continue;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    if bad.is_empty() {
        Ok(l)
    } else {
        Err(Error::RankDeficient { columns: bad })
    }
}

/// Solves `L Lᵀ x = b` for lower-triangular `l`.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let y = l.solve_lower_triangular(b).expect("nonsingular factor");
    l.transpose().solve_upper_triangular(&y).expect("nonsingular factor")
}

/// Eigen decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues ascending and the matching orthonormal eigenvectors
/// as columns.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::identity(n, n);
    let norm = a.norm();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * norm || norm == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Result of [`generalized_eigen`].
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    pub values: Vec<f64>,
    /// `S`-orthonormal eigenvectors as columns.
    pub vectors: DMatrix<f64>,
    /// Set when `S` needed a diagonal shift to factor, or when near-null
    /// directions of `S` were discarded.
    pub regularized: bool,
}

/// Solves `A x = λ S x` for symmetric `A` and SPD `S`.
pub fn generalized_eigen(a: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<GeneralizedEigen> {
    let n = s.nrows();
    let (l, regularized) = match s.clone().cholesky() {
        Some(c) => (c.l(), false),
        None => {
            let shift = 1e-12 * s.trace() / n as f64;
            let shifted = s + DMatrix::identity(n, n) * shift;
            let c = shifted
                .cholesky()
                .ok_or_else(|| Error::Singular("snapshot Gram matrix is singular".into()))?;
            (c.l(), true)
        }
    };
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("snapshot Gram factor is singular".into()))?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let (values, y) = jacobi_eigen(&c);
    let mut vectors = linv.transpose() * y;
    for k in 0..n {
        let mut col = vectors.column_mut(k);
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(GeneralizedEigen {
        values,
        vectors,
        regularized,
    })
}

/// Singular values and right singular vectors of `z` by one-sided Jacobi
/// rotations, in ascending order of singular value.
pub fn jacobi_svd(z: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (m, n) = z.shape();
    let mut g = z.clone();
    let mut v = DMatrix::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = g.column(p).norm_squared();
                let beta = g.column(q).norm_squared();
                let gamma = g.column(p).dot(&g.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let (gp, gq) = (g[(k, p)], g[(k, q)]);
                    g[(k, p)] = c * gp - s * gq;
                    g[(k, q)] = s * gp + c * gq;
                }
                for k in 0..n {
                    let (vp, vq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vp - s * vq;
                    v[(k, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|k| g.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[i].total_cmp(&norms[j]));
    let values = order.iter().map(|&i| norms[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Solves `YᵀY x = λ XᵀX x` without forming either product.
///
/// Directions of the coefficient space whose `X`-image falls below
/// `rank_tol` times the largest singular value of `X` are treated as null
/// directions of `XᵀX`. They carry no finite eigenvalue; each returned
/// eigenvector takes the null-direction component that minimizes its
/// energy, so fewer than `X.ncols()` eigenpairs may be returned.
pub fn generalized_eigen_factored(y: &DMatrix<f64>, x: &DMatrix<f64>, rank_tol: f64) -> Result<GeneralizedEigen> {
    let n = x.ncols();
    if y.ncols() != n {
        return Err(Error::InvalidArgument(format!("factor widths differ: {} vs {n}", y.ncols())));
    }
    let (sx, vx) = jacobi_svd(x);
    let smax = sx.last().copied().unwrap_or(0.0);
    if !(smax > 0.0) {
        return Err(Error::Singular("snapshot Gram matrix is zero".into()));
    }
    let kept: Vec<usize> = (0..n).filter(|&k| sx[k] > rank_tol * smax).collect();
    let null: Vec<usize> = (0..n).filter(|&k| sx[k] <= rank_tol * smax).collect();
    let w = DMatrix::from_fn(n, kept.len(), |r, c| vx[(r, kept[c])] / sx[kept[c]]);
    let z0 = y * &w;
    let (z, correction) = if null.is_empty() {
        (z0, None)
    } else {
        let vn = DMatrix::from_fn(n, null.len(), |r, c| vx[(r, null[c])]);
        let yn = y * &vn;
        let (sn, wn) = jacobi_svd(&yn);
        let floor = rank_tol * y.norm();
        let range: Vec<usize> = (0..sn.len()).filter(|&k| sn[k] > floor).collect();
        let q = DMatrix::from_fn(yn.nrows(), range.len(), |r, c| {
            (&yn * wn.column(range[c]))[r] / sn[range[c]]
        });
        let qt_z = q.transpose() * &z0;
        let pinv_z = DMatrix::from_fn(null.len(), kept.len(), |r, c| {
            range.iter().enumerate().map(|(k, &i)| wn[(r, i)] * qt_z[(k, c)] / sn[i]).sum()
        });
        (&z0 - &q * qt_z, Some(vn * pinv_z))
    };
    let (sz, vz) = jacobi_svd(&z);
    let values = sz.iter().map(|s| s * s).collect();
    let mut vectors = match correction {
        Some(c) => (w - c) * vz,
        None => w * vz,
    };
    for k in 0..vectors.ncols() {
        let mut col = vectors.column_mut(k);
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(GeneralizedEigen {
        values,
        vectors,
        regularized: kept.len() < n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(n, n) * (n as f64 * 0.1)
    }

    fn laplacian_2d(nx: usize, ny: usize) -> CsrMatrix {
        let mut trip = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let r = j * nx + i;
                trip.push((r, r, 4.1));
                if i > 0 {
                    trip.push((r, r - 1, -1.0));
                }
                if i + 1 < nx {
                    trip.push((r, r + 1, -1.0));
                }
                if j > 0 {
                    trip.push((r, r - nx, -1.0));
                }
                if j + 1 < ny {
                    trip.push((r, r + nx, -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(nx * ny, nx * ny, trip)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(1, 0, 1.0), (0, 0, 2.0), (1, 0, 3.0)]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.to_dense(), DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 4.0, 0.0]));
    }

    #[test]
    fn pcg_and_banded_agree_with_dense() {
        let a = laplacian_2d(7, 5);
        let b: Vec<f64> = (0..35).map(|i| (i as f64).cos()).collect();
        let dense = a.to_dense().lu().solve(&DVector::from_vec(b.clone())).unwrap();
        let (x, stats) = pcg(&a, &b, 1e-13, 200).unwrap();
        assert!(stats.residual <= 1e-13);
        let y = BandedCholesky::factor(&a).unwrap().solve(&b);
        for i in 0..35 {
            assert_relative_eq!(x[i], dense[i], epsilon = 1e-11);
            assert_relative_eq!(y[i], dense[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn permutation_reduces_bandwidth() {
        let a = laplacian_2d(10, 3);
        assert_eq!(a.bandwidth(), 10);
        // column-major renumbering
        let perm: Vec<usize> = (0..30).map(|r| (r % 10) * 3 + r / 10).collect();
        let p = a.permute(&perm);
        assert_eq!(p.bandwidth(), 3);
        let b: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let mut pb = vec![0.0; 30];
        for r in 0..30 {
            pb[perm[r]] = b[r];
        }
        let px = BandedCholesky::factor(&p).unwrap().solve(&pb);
        let x = BandedCholesky::factor(&a).unwrap().solve(&b);
        for r in 0..30 {
            assert_relative_eq!(px[perm[r]], x[r], epsilon = 1e-12);
        }
    }

    #[test]
    fn pcg_reports_failure() {
        let a = laplacian_2d(20, 20);
        let b = vec![1.0; 400];
        assert!(matches!(pcg(&a, &b, 1e-14, 2), Err(Error::LinearSolver { iterations: 2, .. })));
    }

    #[test]
    fn dense_cholesky_names_dependent_columns() {
        let v = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 1.0, 0.0, 1.0, 1.0, 1.0, 3.0, 2.0]);
        // third column = first + second
        let g = v.transpose() * &v;
        match dense_cholesky(&g, 1e-12) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec![2]),
            other => panic!("unexpected {other:?}"),
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_spd(5, &mut rng);
        let l = dense_cholesky(&s, 1e-12).unwrap();
        assert_relative_eq!(&l * l.transpose(), s, epsilon = 1e-12);
    }

    #[test]
    fn jacobi_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [1, 2, 5, 12] {
            let m = random_spd(n, &mut rng);
            let (vals, vecs) = jacobi_eigen(&m);
            let mut reference: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            for k in 0..n {
                assert_relative_eq!(vals[k], reference[k], epsilon = 1e-11, max_relative = 1e-12);
            }
            assert_relative_eq!(vecs.transpose() * &vecs, DMatrix::identity(n, n), epsilon = 1e-12);
            assert_relative_eq!(&m * &vecs, &vecs * DMatrix::from_diagonal(&DVector::from_vec(vals)), epsilon = 1e-10);
        }
    }

    #[test]
    fn generalized_eigen_matches_textbook_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let a = random_spd(8, &mut rng);
            let s = random_spd(8, &mut rng);
            let ge = generalized_eigen(&a, &s).unwrap();
            assert!(!ge.regularized);
            // oracle: eigenvalues of L⁻¹ A L⁻ᵀ through nalgebra
            let l = s.clone().cholesky().unwrap().l();
            let li = l.try_inverse().unwrap();
            let c = &li * &a * li.transpose();
            let mut reference: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            for k in 0..8 {
                assert_relative_eq!(ge.values[k], reference[k], max_relative = 1e-10);
                let x = ge.vectors.column(k);
                assert_relative_eq!(&a * x, &s * x * ge.values[k], epsilon = 1e-9);
            }
            let gram = ge.vectors.transpose() * &s * &ge.vectors;
            assert_relative_eq!(gram, DMatrix::identity(8, 8), epsilon = 1e-10);
            for w in ge.values.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn eigenvector_signs_are_deterministic() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let s = DMatrix::identity(2, 2);
        let ge = generalized_eigen(&a, &s).unwrap();
        for k in 0..2 {
            let col = ge.vectors.column(k);
            assert!(col[col.iamax()] > 0.0);
        }
    }
    #[test]
    fn factored_eigen_matches_textbook_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let y = DMatrix::from_fn(12, 6, |_, _| rng.gen_range(-1.0..1.0));
            let x = DMatrix::from_fn(9, 6, |_, _| rng.gen_range(-1.0..1.0));
            let a = y.transpose() * &y;
            let s = x.transpose() * &x;
            let ge = generalized_eigen_factored(&y, &x, 1e-10).unwrap();
            let reference = generalized_eigen(&a, &s).unwrap();
            assert!(!ge.regularized);
            for k in 0..6 {
                assert_relative_eq!(ge.values[k], reference.values[k], max_relative = 1e-10);
                let v = ge.vectors.column(k);
                assert_relative_eq!(&a * v, &s * v * ge.values[k], epsilon = 1e-8);
            }
            let gram = ge.vectors.transpose() * &s * &ge.vectors;
            assert_relative_eq!(gram, DMatrix::identity(6, 6), epsilon = 1e-10);
        }
    }

    #[test]
    fn factored_eigen_drops_null_directions_and_keeps_exact_zero() {
        // third column duplicates the first; the all-ones combination of y vanishes
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 1.0, 1.0, 1.0]);
        let y = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
        let ge = generalized_eigen_factored(&y, &x, 1e-10).unwrap();
        assert!(ge.regularized);
        assert_eq!(ge.values.len(), 2);
        assert!(ge.values[0].abs() < 1e-14);
    }

    #[test]
    fn factored_eigen_uses_null_directions_to_reach_zero_energy() {
        // columns 0 and 1 share an X-image; only their difference has zero energy
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let y = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, -1.0, 0.0, 2.0, -2.0]);
        let ge = generalized_eigen_factored(&y, &x, 1e-10).unwrap();
        assert!(ge.regularized);
        assert_eq!(ge.values.len(), 2);
        assert!(ge.values[0].abs() < 1e-14, "{:?}", ge.values);
        let v = ge.vectors.column(0);
        assert!((&y * v).norm() < 1e-14);
        assert_relative_eq!((&x * v).norm(), 1.0, epsilon = 1e-14);
        let a = y.transpose() * &y;
        let s = x.transpose() * &x;
        let v1 = ge.vectors.column(1);
        assert_relative_eq!((&x * v1).norm(), 1.0, epsilon = 1e-12);
        assert!((&a * v1 - &s * v1 * ge.values[1]).norm() < 1e-12);
    }

    #[test]
    fn jacobi_svd_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = DMatrix::from_fn(7, 4, |_, _| rng.gen_range(-1.0..1.0));
        let (s, _) = jacobi_svd(&z);
        let mut reference: Vec<f64> = z.svd(false, false).singular_values.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for k in 0..4 {
            assert_relative_eq!(s[k], reference[k], max_relative = 1e-12);
        }
    }
}
