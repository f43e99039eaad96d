use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--set", "nx=16", "--set", "ny=8", "--set", "coarse_nx=4", "--set", "coarse_ny=2", "--set", "x1=1.6", "--set",
    "y1=0.8",
];

fn forchms(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forchms"))
        .args(args)
        .args(SMALL)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

fn assert_hash_and_header(text: &str) {
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# config-hash: "), "{first}");
    assert_eq!(first.trim_start_matches("# config-hash: ").len(), 64);
    assert!(text.lines().any(|l| !l.starts_with('#')));
}

#[test]
fn fine_sweep_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = forchms(&["fine", "--beta0", "1,10,100,1000,10000", "--scheme", "picard,newton", "--set", "max_iter=2000"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&dir.path().join("iterations.csv"));
    assert_hash_and_header(&text);
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 10);
    for pair in rows.chunks(2) {
        let picard: usize = pair[0].split(',').nth(2).unwrap().parse().unwrap();
        let newton: usize = pair[1].split(',').nth(2).unwrap().parse().unwrap();
        assert!(pair[0].contains(",picard,") && pair[1].contains(",newton,"));
        assert!(newton < picard, "{pair:?}");
    }
}

#[test]
fn darcy_fine_run_records_one_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let o = forchms(&["fine", "--beta0", "0"], dir.path());
    assert!(o.status.success());
    let rows: Vec<String> = data_rows(&read(&dir.path().join("iterations.csv"))).into_iter().map(String::from).collect();
    assert_eq!(rows, vec!["0,newton,1,true".to_string()]);
    let sol = read(&dir.path().join("fine_solution.csv"));
    assert_hash_and_header(&sol);
    assert_eq!(data_rows(&sol).len(), 16 * 8);
    let vel = read(&dir.path().join("fine_velocity.csv"));
    assert_eq!(data_rows(&vel).len(), 2 * (17 * 8 + 16 * 9));
}

#[test]
fn pressure_raster_round_trips_through_field_loader() {
    let dir = tempfile::tempdir().unwrap();
    assert!(forchms(&["fine", "--beta0", "10"], dir.path()).status.success());
    let raster = read(&dir.path().join("fine_pressure.txt"));
    let field = forchms_core::fields::parse_raster(&raster, 16, 8, forchms_core::fields::FieldUse::Generic, "p").unwrap();
    let csv = read(&dir.path().join("fine_solution.csv"));
    for (row, v) in data_rows(&csv).iter().zip(&field.values) {
        let p: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(p, *v);
    }
}

#[test]
fn missing_field_file_is_an_input_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_perm.txt");
    let o = forchms(&["fine", "--perm", missing.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("no_such_perm.txt"), "{err}");
}

#[test]
fn bad_values_exit_with_input_status() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["fine", "--theta", "2"],
        vec!["fine", "--scheme", "bisection"],
        vec!["fine", "--bc", "preset:nowhere"],
        vec!["fine", "--set", "tol_nl=-1"],
        vec!["fine", "--set", "unknown=1"],
        vec!["fine", "--config", "/definitely/not/here.cfg"],
        vec!["frobnicate"],
    ] {
        let o = forchms(&args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(String::from_utf8_lossy(&o.stderr).trim_end().lines().count(), 1, "{args:?}");
    }
}

#[test]
fn nonconvergence_exits_with_solver_status() {
    let dir = tempfile::tempdir().unwrap();
    let o = forchms(&["fine", "--beta0", "1000", "--scheme", "picard", "--set", "max_iter=2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let rows = data_rows(&read(&dir.path().join("iterations.csv"))).into_iter().map(String::from).collect::<Vec<_>>();
    assert_eq!(rows, vec!["1000,picard,2,false".to_string()]);
}

#[test]
fn config_file_is_applied_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# sweep\nbeta0 = 1, 10\nscheme = picard\n").unwrap();
    let out = dir.path().join("a");
    assert!(forchms(&["fine", "--config", cfg.to_str().unwrap(), "--scheme", "newton"], &out).status.success());
    let rows = data_rows(&read(&out.join("iterations.csv"))).into_iter().map(String::from).collect::<Vec<_>>();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.contains(",newton,")));
}

#[test]
fn offline_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = forchms(&["offline", "--beta0", "0,1,10,100,1000,10000", "--dof-per-t", "4,6,8"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(&dir.path().join("offline_errors.csv"));
    assert_hash_and_header(&text);
    assert!(text.lines().any(|l| l == "# theta=0.75"));
    assert!(text.contains("beta0,dof_per_T,Erp_off,Eru_off,Erp_hat,Eru_hat,N_update,Erp_tilde,Eru_tilde"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 18);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 9, "{row}");
        if cols[0] == "0" {
            assert!(cols[4..].iter().all(|c| c.is_empty()), "{row}");
        } else {
            assert!(cols[4..].iter().all(|c| !c.is_empty()), "{row}");
            let n: usize = cols[6].parse().unwrap();
            assert!((1..=8).contains(&n));
        }
    }
}

#[test]
fn online_histories_per_run_and_plateau_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = forchms(
        &["online", "--beta0", "10,100", "--dof-per-t", "2,3", "--mode", "uniform,adaptive", "--variant", "updating,fixed", "--sweeps", "2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 16);
    for f in files {
        let text = read(&f);
        assert_hash_and_header(&text);
        assert!(text.contains("level,subiter,dim_Wms,n_added,Erp,Eru,total_residual"));
        let name = f.file_name().unwrap().to_string_lossy().to_string();
        let flagged = text.lines().any(|l| l.starts_with("# plateau="));
        assert_eq!(flagged, name.ends_with("_fixed_offline.csv"), "{name}");
        assert!(data_rows(&text).len() > 1);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["online", "--beta0", "100", "--dof-per-t", "2", "--mode", "adaptive", "--sweeps", "1"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(forchms(&args, &a).status.success());
    assert!(forchms(&args, &b).status.success());
    let name = "online_beta0=100_dof=2_adaptive_updating.csv";
    assert_eq!(read(&a.join(name)), read(&b.join(name)));
}

#[test]
fn generated_field_feeds_back_in() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g");
    assert!(forchms(&["gen-field", "--kind", "channel", "--contrast", "1e3", "--log10"], &g).status.success());
    let perm = g.join("perm.txt");
    let o = forchms(&["fine", "--perm", perm.to_str().unwrap(), "--log10", "--beta0", "1"], &dir.path().join("f"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = forchms(&["fine", "--perm", perm.to_str().unwrap(), "--beta0", "1"], &dir.path().join("h"));
    assert_eq!(o.status.code(), Some(2), "log values include non-positive permeabilities");
}
