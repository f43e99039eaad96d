//! The `fine`, `offline`, `online` and `gen-field` commands.

use std::fmt::Write as _;
use std::path::PathBuf;

use forchms_core::error::Error;
use forchms_core::fields::{forchheimer_coeff, gen_synthetic, load_raster, FieldUse, ScalarCellField};
use forchms_core::fine_solver::{solve_nonlinear_in, Discretization, FlowSolution, Problem, Scheme};
use forchms_core::grid::{CoarseGrid, FineGrid, Rectangle};
use forchms_core::metrics::error_metrics;
use forchms_core::mfmfe::{BoundaryConditions, CoefficientAtCorners};
use forchms_core::offline::{
    assemble_reduction, build_offline_spaces, offline_residuals, select_by_fraction, solve_offline, update_offline,
    ReductionMap, SpectralSpace,
};
use forchms_core::online::{history_csv, plateau_sweep, EnrichmentState, Variant};
use forchms_core::schur::PressureSpace;

use crate::config::{FieldSource, RunConfig};
use crate::failure::Failure;

/// Writes files into the output directory, each prefixed by the config hash.
pub struct Output {
    dir: PathBuf,
    hash: String,
}

impl Output {
    pub fn new(cfg: &RunConfig) -> Result<Self, Failure> {
        std::fs::create_dir_all(&cfg.out)
            .map_err(|e| Failure::input(format!("cannot create output directory {}: {e}", cfg.out.display())))?;
        Ok(Output {
            dir: cfg.out.clone(),
            hash: cfg.hash.clone(),
        })
    }

    pub fn write(&self, name: &str, extra_comments: &[String], body: &str) -> Result<(), Failure> {
        let mut text = format!("# config-hash: {}\n", self.hash);
        for c in extra_comments {
            let _ = writeln!(text, "# {c}");
        }
        text.push_str(body);
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
    }
}

/// Loads or generates the permeability field.
pub fn load_field(cfg: &RunConfig) -> Result<ScalarCellField, Failure> {
    match &cfg.field {
        FieldSource::Raster { path, log10: false } => Ok(load_raster(path, cfg.nx, cfg.ny, FieldUse::Permeability)?),
        FieldSource::Raster { path, log10: true } => {
            let k = load_raster(path, cfg.nx, cfg.ny, FieldUse::Generic)?.map(|v| 10f64.powf(v));
            k.validate_positive().map_err(|e| match e {
                Error::Domain(m) => Failure::input(format!("{}: {m}", path.display())),
                other => other.into(),
            })?;
            Ok(k)
        }
        FieldSource::Synthetic { kind, seed, contrast } => Ok(gen_synthetic(*kind, cfg.nx, cfg.ny, *seed, *contrast)?),
    }
}

/// Grid, field and boundary data shared by every run of a command.
pub struct Setup {
    pub cfg: RunConfig,
    pub grid: FineGrid,
    pub coarse: CoarseGrid,
    pub kappa: ScalarCellField,
    pub bc: BoundaryConditions,
}

impl Setup {
    pub fn new(cfg: RunConfig) -> Result<Self, Failure> {
        let [x0, x1, y0, y1] = cfg.domain;
        let grid = FineGrid::new(cfg.nx, cfg.ny, Rectangle::new(x0, x1, y0, y1))?;
        let coarse = CoarseGrid::new(&grid, cfg.coarse_nx, cfg.coarse_ny)?;
        let kappa = load_field(&cfg)?;
        let bc = BoundaryConditions::preset(&grid, &cfg.bc)?;
        Ok(Setup {
            cfg,
            grid,
            coarse,
            kappa,
            bc,
        })
    }

    pub fn problem(&self, beta0: f64) -> Result<Problem, Failure> {
        let beta = forchheimer_coeff(&self.kappa, beta0)?;
        Ok(Problem::new(self.grid.clone(), &self.kappa, &beta, self.bc.clone())?.with_fluid(self.cfg.mu, self.cfg.rho)?)
    }

    fn scheme(&self) -> Scheme {
        self.cfg.schemes[0]
    }

    fn solve(&self, problem: &Problem, disc: &Discretization, space: PressureSpace<'_>, scheme: Scheme) -> Result<FlowSolution, Error> {
        solve_nonlinear_in(problem, disc, space, &self.cfg.nonlinear(scheme))
    }

    fn offline_spaces(&self) -> Result<Vec<SpectralSpace>, Failure> {
        let darcy = self.problem(0.0)?.darcy_coefficient();
        Ok(build_offline_spaces(&self.grid, &self.coarse, &CoefficientAtCorners::from_cells(&darcy), self.cfg.layers)?)
    }
}

fn late_failure(kind: &str, b: f64, e: Error) -> Failure {
    let f = Failure::from(e);
    Failure {
        code: f.code,
        message: format!("{kind} solve at beta0={b}: {}", f.message),
    }
}

/// Fine reference solves for every `(β0, scheme)` pair.
pub fn cmd_fine(setup: &Setup) -> Result<(), Failure> {
    let cfg = &setup.cfg;
    let out = Output::new(cfg)?;
    let runs: Vec<(f64, Scheme)> = cfg
        .beta0
        .iter()
        .flat_map(|&b| cfg.schemes.iter().map(move |&s| (b, s)))
        .collect();
    let single = runs.len() == 1;
    let mut table = String::from("beta0,scheme,iterations,converged\n");
    let mut failed: Option<Failure> = None;
    for (b, scheme) in runs {
        let problem = setup.problem(b)?;
        let disc = problem.discretize()?;
        let sol = match setup.solve(&problem, &disc, PressureSpace::Full, scheme) {
            Ok(s) => s,
            Err(Error::NonConvergence(s)) => {
                failed.get_or_insert_with(|| {
                    Failure::solver(format!("fine solve at beta0={b} with {scheme} did not converge in {} iterations", s.iterations))
                });
                *s
            }
            Err(e) => return Err(late_failure("fine", b, e)),
        };
        let _ = writeln!(table, "{b},{scheme},{},{}", sol.iterations, sol.converged);
        let suffix = if single { String::new() } else { format!("_beta0={b}_{scheme}") };
        let mut p = String::from("cell,x,y,p\n");
        for (t, v) in sol.pressure.iter().enumerate() {
            let c = setup.grid.cell_center(t);
            let _ = writeln!(p, "{t},{:e},{:e},{v:e}", c.x, c.y);
        }
        out.write(&format!("fine_solution{suffix}.csv"), &[], &p)?;
        let mut u = String::from("dof,value\n");
        for (d, v) in sol.velocity.iter().enumerate() {
            let _ = writeln!(u, "{d},{v:e}");
        }
        out.write(&format!("fine_velocity{suffix}.csv"), &[], &u)?;
        let raster = ScalarCellField {
            nx: cfg.nx,
            ny: cfg.ny,
            values: sol.pressure.clone(),
        };
        out.write(&format!("fine_pressure{suffix}.txt"), &[], &raster.to_raster_string())?;
    }
    out.write("iterations.csv", &[], &table)?;
    failed.map_or(Ok(()), Err)
}

fn reference(setup: &Setup, problem: &Problem, disc: &Discretization, b: f64) -> Result<FlowSolution, Failure> {
    setup
        .solve(problem, disc, PressureSpace::Full, setup.scheme())
        .map_err(|e| late_failure("fine reference", b, e))
}

fn reduced_errors(
    setup: &Setup,
    problem: &Problem,
    disc: &Discretization,
    r: &ReductionMap,
    fine: &FlowSolution,
    b: f64,
) -> Result<(FlowSolution, f64, f64), Failure> {
    let sol = solve_offline(problem, disc, r, &setup.cfg.nonlinear(setup.scheme())).map_err(|e| late_failure("offline", b, e))?;
    let (erp, eru) = error_metrics(&setup.grid, &sol, fine)?;
    Ok((sol, erp, eru))
}

/// Offline, partially updated and fully updated errors per `(β0, M_off)`.
pub fn cmd_offline(setup: &Setup) -> Result<(), Failure> {
    let cfg = &setup.cfg;
    let out = Output::new(cfg)?;
    let spaces = setup.offline_spaces()?;
    let everything: Vec<usize> = (0..setup.coarse.len()).collect();
    let mut table = String::from("beta0,dof_per_T,Erp_off,Eru_off,Erp_hat,Eru_hat,N_update,Erp_tilde,Eru_tilde\n");
    for &b in &cfg.beta0 {
        let problem = setup.problem(b)?;
        let disc = problem.discretize()?;
        let fine = reference(setup, &problem, &disc, b)?;
        for &m in &cfg.dof_per_t {
            let r = assemble_reduction(setup.grid.n_cells(), &spaces, m)?;
            let (off, erp, eru) = reduced_errors(setup, &problem, &disc, &r, &fine, b)?;
            let _ = write!(table, "{b},{m},{erp:e},{eru:e}");
            if b > 0.0 {
                let residuals = offline_residuals(&setup.grid, &setup.coarse, &off.velocity, &problem.source);
                let selected = select_by_fraction(&residuals, cfg.theta)?;
                let r_hat = update_offline(&problem, &setup.coarse, &r, &off.velocity, &selected, cfg.layers)?;
                let (_, erp_hat, eru_hat) = reduced_errors(setup, &problem, &disc, &r_hat, &fine, b)?;
                let r_tilde = update_offline(&problem, &setup.coarse, &r, &off.velocity, &everything, cfg.layers)?;
                let (_, erp_tilde, eru_tilde) = reduced_errors(setup, &problem, &disc, &r_tilde, &fine, b)?;
                let _ = writeln!(table, ",{erp_hat:e},{eru_hat:e},{},{erp_tilde:e},{eru_tilde:e}", selected.len());
            } else {
                table.push_str(",,,,,\n");
            }
        }
    }
    out.write("offline_errors.csv", &[format!("theta={}", cfg.theta)], &table)
}

/// Enrichment histories per `(β0, M_off, mode, variant)`.
pub fn cmd_online(setup: &Setup) -> Result<(), Failure> {
    let cfg = &setup.cfg;
    let out = Output::new(cfg)?;
    let spaces = setup.offline_spaces()?;
    for &b in &cfg.beta0 {
        let problem = setup.problem(b)?;
        let disc = problem.discretize()?;
        let fine = reference(setup, &problem, &disc, b)?;
        for &m in &cfg.dof_per_t {
            let r = assemble_reduction(setup.grid.n_cells(), &spaces, m)?;
            let (off, _, _) = reduced_errors(setup, &problem, &disc, &r, &fine, b)?;
            for &mode in &cfg.modes {
                for &variant in &cfg.variants {
                    let mut state = EnrichmentState::new(&problem, &disc, &setup.coarse, r.clone(), off.clone(), variant, Some(&fine))?;
                    state
                        .enrich(mode, cfg.xi, cfg.sweeps)
                        .map_err(|e| late_failure("online", b, e))?;
                    let mut comments = vec![format!("beta0={b} dof_per_T={m} mode={mode} variant={variant} xi={}", cfg.xi)];
                    if variant == Variant::FixedOffline {
                        comments.push(match plateau_sweep(&state.history, cfg.plateau_tol) {
                            Some(s) => format!("plateau=true sweep={s}"),
                            None => "plateau=false".to_string(),
                        });
                    }
                    let name = format!("online_beta0={b}_dof={m}_{mode}_{variant}.csv");
                    out.write(&name, &comments, &history_csv(&state.history))?;
                }
            }
        }
    }
    Ok(())
}

/// Writes the configured permeability field as a raster (log10 values if requested).
pub fn cmd_gen_field(setup: &Setup) -> Result<(), Failure> {
    let out = Output::new(&setup.cfg)?;
    let field = if setup.cfg.log10 { setup.kappa.map(f64::log10) } else { setup.kappa.clone() };
    out.write("perm.txt", &[], &field.to_raster_string())
}
