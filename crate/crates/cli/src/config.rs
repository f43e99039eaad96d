//! Flat `key = value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use forchms_core::fields::SyntheticKind;
use forchms_core::fine_solver::{NonlinearConfig, Scheme};
use forchms_core::online::{Mode, Variant};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

/// Keys accepted in config files and `--set`, with their defaults.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("nx", "160"),
    ("ny", "60"),
    ("coarse_nx", "16"),
    ("coarse_ny", "6"),
    ("x0", "0"),
    ("x1", "1.6"),
    ("y0", "0"),
    ("y1", "0.6"),
    ("perm", ""),
    ("log10", "false"),
    ("field", "blobs"),
    ("seed", "1"),
    ("contrast", "100"),
    ("beta0", "0,1,10,100,1000,10000"),
    ("scheme", "newton"),
    ("dof_per_t", "4,6,8"),
    ("theta", "0.75"),
    ("xi", "0.75"),
    ("variant", "updating"),
    ("mode", "uniform"),
    ("sweeps", "3"),
    ("layers", "0"),
    ("bc", "preset:left-right"),
    ("tol_nl", "1e-8"),
    ("max_iter", "200"),
    ("linear_tol", "1e-12"),
    ("linear_max_iter", "20000"),
    ("plateau_tol", "0.01"),
    ("mu", "1"),
    ("rho", "1"),
    ("out", "out"),
];

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSource {
    Raster { path: PathBuf, log10: bool },
    Synthetic { kind: SyntheticKind, seed: u64, contrast: f64 },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub coarse_nx: usize,
    pub coarse_ny: usize,
    pub domain: [f64; 4],
    pub field: FieldSource,
    /// Raster values are base-10 logarithms.
    pub log10: bool,
    pub beta0: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub dof_per_t: Vec<usize>,
    pub theta: f64,
    pub xi: f64,
    pub variants: Vec<Variant>,
    pub modes: Vec<Mode>,
    pub sweeps: usize,
    pub layers: usize,
    pub bc: String,
    pub tol_nl: f64,
    pub max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    pub plateau_tol: f64,
    pub mu: f64,
    pub rho: f64,
    pub out: PathBuf,
    /// Hex SHA-256 of the canonical configuration text.
    pub hash: String,
}

/// Raw key-value layers merged in order: defaults, file, overrides.
#[derive(Debug, Clone)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl Default for RawConfig {
    fn default() -> Self {
        RawConfig {
            values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Failure> {
        let key = key.trim().replace('-', "_");
        if !self.values.contains_key(&key) {
            return Err(Failure::input(format!("unknown configuration key '{key}'")));
        }
        self.values.insert(key, value.trim().to_string());
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str, origin: &str) -> Result<(), Failure> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Failure::input(format!("{origin}:{}: expected key = value", n + 1)))?;
            self.set(k, v).map_err(|e| Failure::input(format!("{origin}:{}: {}", n + 1, e.message)))?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("cannot read config {}: {e}", path.display())))?;
        self.merge_text(&text, &path.display().to_string())
    }

    fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T, Failure>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.get(key);
        raw.parse()
            .map_err(|e| Failure::input(format!("invalid value '{raw}' for {key}: {e}")))
    }

    fn parse_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        let out = self
            .get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| Failure::input(format!("invalid entry '{s}' in {key}: {e}"))))
            .collect::<Result<Vec<T>, Failure>>()?;
        if out.is_empty() {
            return Err(Failure::input(format!("{key} must not be empty")));
        }
        Ok(out)
    }

    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let perm = self.get("perm");
        let log10: bool = self.parse("log10")?;
        let field = if perm.is_empty() {
            FieldSource::Synthetic {
                kind: self.parse("field")?,
                seed: self.parse("seed")?,
                contrast: self.parse("contrast")?,
            }
        } else {
            FieldSource::Raster {
                path: PathBuf::from(perm),
                log10,
            }
        };
        let mut cfg = RunConfig {
            nx: self.parse("nx")?,
            ny: self.parse("ny")?,
            coarse_nx: self.parse("coarse_nx")?,
            coarse_ny: self.parse("coarse_ny")?,
            domain: [self.parse("x0")?, self.parse("x1")?, self.parse("y0")?, self.parse("y1")?],
            field,
            log10,
            beta0: self.parse_list("beta0")?,
            schemes: self.parse_list("scheme")?,
            dof_per_t: self.parse_list("dof_per_t")?,
            theta: self.parse("theta")?,
            xi: self.parse("xi")?,
            variants: self.parse_list("variant")?,
            modes: self.parse_list("mode")?,
            sweeps: self.parse("sweeps")?,
            layers: self.parse("layers")?,
            bc: self.get("bc").to_string(),
            tol_nl: self.parse("tol_nl")?,
            max_iter: self.parse("max_iter")?,
            linear_tol: self.parse("linear_tol")?,
            linear_max_iter: self.parse("linear_max_iter")?,
            plateau_tol: self.parse("plateau_tol")?,
            mu: self.parse("mu")?,
            rho: self.parse("rho")?,
            out: PathBuf::from(self.get("out")),
            hash: String::new(),
        };
        cfg.validate()?;
        cfg.hash = cfg.compute_hash()?;
        Ok(cfg)
    }
}

impl RunConfig {
    fn validate(&self) -> Result<(), Failure> {
        let bad = |m: String| Err(Failure::input(m));
        if self.nx == 0 || self.ny == 0 || self.coarse_nx == 0 || self.coarse_ny == 0 {
            return bad("grid sizes must be positive".into());
        }
        if self.nx % self.coarse_nx != 0 || self.ny % self.coarse_ny != 0 {
            return bad(format!(
                "coarse grid {}x{} does not divide fine grid {}x{}",
                self.coarse_nx, self.coarse_ny, self.nx, self.ny
            ));
        }
        let [x0, x1, y0, y1] = self.domain;
        if !(x1 > x0) || !(y1 > y0) {
            return bad(format!("degenerate domain [{x0},{x1}]x[{y0},{y1}]"));
        }
        if let Some(b) = self.beta0.iter().find(|b| !(**b >= 0.0) || !b.is_finite()) {
            return bad(format!("beta0 must be nonnegative, got {b}"));
        }
        if self.dof_per_t.contains(&0) {
            return bad("dof_per_t entries must be positive".into());
        }
        for (name, v) in [("theta", self.theta), ("xi", self.xi)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if !(self.plateau_tol > 0.0) {
            return bad(format!("plateau_tol must be positive, got {}", self.plateau_tol));
        }
        if let FieldSource::Synthetic { contrast, .. } = self.field {
            if !(contrast >= 1.0) {
                return bad(format!("contrast must be at least 1, got {contrast}"));
            }
        }
        self.nonlinear(Scheme::Newton)
            .validate()
            .map_err(|e| Failure::input(e.to_string()))?;
        Ok(())
    }

    pub fn nonlinear(&self, scheme: Scheme) -> NonlinearConfig {
        NonlinearConfig {
            scheme,
            tol_nl: self.tol_nl,
            max_iter: self.max_iter,
            linear_tol: self.linear_tol,
            linear_max_iter: self.linear_max_iter,
            ..Default::default()
        }
    }

    /// Resolved settings as sorted `key=value` lines; the output directory is
    /// excluded and raster inputs are identified by content digest.
    pub fn canonical(&self) -> Result<String, Failure> {
        let join = |v: Vec<String>| v.join(",");
        let mut map: BTreeMap<&str, String> = BTreeMap::new();
        map.insert("nx", self.nx.to_string());
        map.insert("ny", self.ny.to_string());
        map.insert("coarse_nx", self.coarse_nx.to_string());
        map.insert("coarse_ny", self.coarse_ny.to_string());
        for (k, v) in ["x0", "x1", "y0", "y1"].into_iter().zip(self.domain) {
            map.insert(k, v.to_string());
        }
        match &self.field {
            FieldSource::Raster { path, .. } => {
                let bytes = std::fs::read(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
                map.insert("perm_sha256", hex::encode(Sha256::digest(&bytes)));
            }
            FieldSource::Synthetic { kind, seed, contrast } => {
                map.insert("field", format!("{kind:?}").to_lowercase());
                map.insert("seed", seed.to_string());
                map.insert("contrast", contrast.to_string());
            }
        }
        map.insert("log10", self.log10.to_string());
        map.insert("beta0", join(self.beta0.iter().map(f64::to_string).collect()));
        map.insert("scheme", join(self.schemes.iter().map(|s| s.to_string()).collect()));
        map.insert("dof_per_t", join(self.dof_per_t.iter().map(usize::to_string).collect()));
        map.insert("theta", self.theta.to_string());
        map.insert("xi", self.xi.to_string());
        map.insert("variant", join(self.variants.iter().map(|v| v.to_string()).collect()));
        map.insert("mode", join(self.modes.iter().map(|m| m.to_string()).collect()));
        map.insert("sweeps", self.sweeps.to_string());
        map.insert("layers", self.layers.to_string());
        map.insert("bc", self.bc.clone());
        map.insert("tol_nl", self.tol_nl.to_string());
        map.insert("max_iter", self.max_iter.to_string());
        map.insert("linear_tol", self.linear_tol.to_string());
        map.insert("linear_max_iter", self.linear_max_iter.to_string());
        map.insert("plateau_tol", self.plateau_tol.to_string());
        map.insert("mu", self.mu.to_string());
        map.insert("rho", self.rho.to_string());
        let mut s = String::new();
        for (k, v) in map {
            let _ = writeln!(s, "{k}={v}");
        }
        Ok(s)
    }

    fn compute_hash(&self) -> Result<String, Failure> {
        Ok(hex::encode(Sha256::digest(self.canonical()?.as_bytes())))
    }
}
