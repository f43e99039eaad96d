use forchms_core::fields::{gen_synthetic, parse_raster, FieldUse, ScalarCellField, SyntheticKind};
use forchms_core::fine_solver::{solve_nonlinear, NonlinearConfig, Problem, Scheme};
use forchms_core::grid::{CoarseGrid, FineGrid, Rectangle};
use forchms_core::linalg::generalized_eigen_factored;
use forchms_core::metrics::{cell_flux_balance, coarse_balance};
use forchms_core::mfmfe::{assemble_divergence, assemble_rhs, assemble_velocity_matrix, BoundaryConditions, CoefficientAtCorners};
use forchms_core::offline::{assemble_reduction, build_offline_spaces, select_by_fraction, solve_offline};
use forchms_core::schur::{saddle_oracle, schur_solve, LinearOptions, PressureSpace};
use nalgebra::{DMatrix, Matrix2};
use proptest::prelude::*;

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
    d / n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schur_elimination_equals_saddle_solve(
        nx in 1usize..6,
        ny in 1usize..6,
        w in 0.3f64..3.0,
        h in 0.3f64..3.0,
        seed in 0u64..1000,
        left in -2.0f64..2.0,
        right in -2.0f64..2.0,
    ) {
        let g = FineGrid::new(nx, ny, Rectangle::new(0.0, w, 0.0, h)).unwrap();
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64)
        };
        let coeff = CoefficientAtCorners::from_fn(g.n_cells(), |_, _| {
            let l = Matrix2::new(0.3 + next(), 0.0, next() - 0.5, 0.3 + next());
            l * l.transpose()
        });
        let f: Vec<f64> = (0..g.n_cells()).map(|_| next() - 0.5).collect();
        let bc = BoundaryConditions::left_right(&g, left, right);
        let a = assemble_velocity_matrix(&g, &coeff).unwrap();
        let b = assemble_divergence(&g);
        let rhs = assemble_rhs(&g, &f, &bc).unwrap();
        let sol = schur_solve(&a, &b, &rhs, PressureSpace::Full, &LinearOptions { shape: Some((nx, ny)), ..Default::default() }).unwrap();
        let (u, p) = saddle_oracle(&a, &b, &rhs).unwrap();
        prop_assert!(rel(&sol.velocity, &u) < 1e-11);
        prop_assert!(rel(&sol.pressure, &p) < 1e-11);
    }

    #[test]
    fn nonlinear_fine_solves_conserve_mass_per_cell(
        seed in 0u64..200,
        beta0 in 0.0f64..50.0,
        picard in any::<bool>(),
    ) {
        let (nx, ny) = (8, 6);
        let g = FineGrid::new(nx, ny, Rectangle::new(0.0, 0.8, 0.0, 0.6)).unwrap();
        let k = gen_synthetic(SyntheticKind::Blobs, nx, ny, seed, 100.0).unwrap();
        let beta = k.map(|v| beta0 / v);
        let src: Vec<f64> = (0..g.n_cells()).map(|t| ((t * 7 + seed as usize) % 5) as f64 - 2.0).collect();
        let bc = BoundaryConditions::left_right(&g, 1.0, 0.0);
        let p = Problem::new(g, &k, &beta, bc).unwrap().with_source(src).unwrap();
        let cfg = NonlinearConfig { scheme: if picard { Scheme::Picard } else { Scheme::Newton }, max_iter: 2000, ..Default::default() };
        let s = solve_nonlinear(&p, &cfg).unwrap();
        for r in cell_flux_balance(&p.grid, &s.velocity, &p.source) {
            prop_assert!(r.abs() < 1e-10, "{r}");
        }
    }

    #[test]
    fn raster_text_round_trips(nx in 1usize..7, ny in 1usize..7, vals in proptest::collection::vec(1e-6f64..1e6, 36)) {
        let f = ScalarCellField { nx, ny, values: vals[..nx * ny].to_vec() };
        let back = parse_raster(&f.to_raster_string(), nx, ny, FieldUse::Permeability, "mem").unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn coarse_partition_covers_the_domain(cx in 1usize..5, cy in 1usize..5, fx in 1usize..4, fy in 1usize..4, w in 0.5f64..4.0) {
        let g = FineGrid::new(cx * fx, cy * fy, Rectangle::new(-1.0, w, 0.0, 1.0)).unwrap();
        let c = CoarseGrid::new(&g, cx, cy).unwrap();
        let mut seen = vec![0usize; g.n_cells()];
        let mut area = 0.0;
        for el in &c.elements {
            prop_assert_eq!(el.fine_elements.len(), fx * fy);
            prop_assert_eq!(el.boundary_edges.len(), 2 * (fx + fy));
            for &t in &el.fine_elements {
                seen[t] += 1;
                area += g.cell_area(t);
            }
        }
        prop_assert!(seen.iter().all(|&n| n == 1));
        prop_assert!((area - (w + 1.0)).abs() < 1e-12 * (w + 1.0));
    }

    #[test]
    fn factored_eigenpairs_are_ordered_and_orthonormal(
        m in 3usize..9,
        n in 2usize..7,
        dup in any::<bool>(),
        entries in proptest::collection::vec(-1.0f64..1.0, 9 * 7 * 2),
    ) {
        let y = DMatrix::from_fn(m, n, |r, c| entries[r * n + c]);
        let mut x = DMatrix::from_fn(m, n, |r, c| entries[63 + r * n + c]);
        if dup && n > 2 {
            let c0 = x.column(0).clone_owned();
            x.set_column(n - 1, &c0);
        }
        let ge = generalized_eigen_factored(&y, &x, 1e-8).unwrap();
        let k = ge.values.len();
        prop_assert!(k <= n);
        prop_assert!(ge.values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(ge.values.iter().all(|&l| l >= 0.0));
        let xv = &x * &ge.vectors;
        let gram = xv.transpose() * &xv;
        prop_assert!((gram - DMatrix::identity(k, k)).amax() < 1e-8);
        let yv = &y * &ge.vectors;
        for j in 0..k {
            prop_assert!((yv.column(j).norm_squared() - ge.values[j]).abs() < 1e-8 * (1.0 + ge.values[j]));
        }
    }

    #[test]
    fn fraction_selection_is_minimal(res in proptest::collection::vec(0.0f64..10.0, 1..30), theta in 0.05f64..0.95) {
        let total: f64 = res.iter().sum();
        let sel = select_by_fraction(&res, theta).unwrap();
        if total == 0.0 {
            prop_assert!(sel.is_empty());
        } else {
            let got: f64 = sel.iter().map(|&i| res[i]).sum();
            prop_assert!(got >= theta * total * (1.0 - 1e-12));
            let smallest = sel.iter().map(|&i| res[i]).fold(f64::INFINITY, f64::min);
            prop_assert!(got - smallest < theta * total);
            for i in 0..res.len() {
                if !sel.contains(&i) {
                    prop_assert!(res[i] <= smallest);
                }
            }
        }
    }
}

#[test]
fn offline_solves_balance_every_column() {
    let g = FineGrid::new(24, 12, Rectangle::new(0.0, 2.0, 0.0, 1.0)).unwrap();
    let c = CoarseGrid::new(&g, 4, 2).unwrap();
    let k = gen_synthetic(SyntheticKind::Channel, 24, 12, 5, 1e3).unwrap();
    let beta = k.map(|v| 100.0 / v);
    let src: Vec<f64> = (0..g.n_cells()).map(|t| if t == 40 { 5.0 } else { 0.0 }).collect();
    let p = Problem::new(g.clone(), &k, &beta, BoundaryConditions::five_spot(&g)).unwrap().with_source(src).unwrap();
    let disc = p.discretize().unwrap();
    let spaces = build_offline_spaces(&g, &c, &CoefficientAtCorners::from_cells(&p.darcy_coefficient()), 0).unwrap();
    for m in [1, 3, 5] {
        let r = assemble_reduction(g.n_cells(), &spaces, m).unwrap();
        let s = solve_offline(&p, &disc, &r, &NonlinearConfig::default()).unwrap();
        for v in coarse_balance(&g, &r, &s.velocity, &p.source) {
            assert!(v.abs() < 1e-8, "{v}");
        }
    }
}
