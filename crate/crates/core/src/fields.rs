//! Cellwise scalar fields: permeability rasters, synthetic heterogeneous
//! media and the Forchheimer coefficient.
//!
//! Raster text format: any number of leading comment lines starting with
//! `#`, followed by `nx * ny` whitespace-separated decimals in row-major
//! order with the bottom row (smallest y) first.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarCellField {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

/// How raster values are validated on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldUse {
    /// Values must be strictly positive.
    Permeability,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    Layered,
    Channel,
    Blobs,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layered" => Ok(SyntheticKind::Layered),
            "channel" => Ok(SyntheticKind::Channel),
            "blobs" => Ok(SyntheticKind::Blobs),
            _ => Err(Error::InvalidArgument(format!("unknown field kind '{s}'"))),
        }
    }
}

impl ScalarCellField {
    pub fn constant(nx: usize, ny: usize, value: f64) -> Self {
        ScalarCellField {
            nx,
            ny,
            values: vec![value; nx * ny],
        }
    }

    pub fn from_fn(nx: usize, ny: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(i, j));
            }
        }
        ScalarCellField { nx, ny, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarCellField {
            nx: self.nx,
            ny: self.ny,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn validate_positive(&self) -> Result<()> {
        match self.values.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            Some(k) => Err(Error::Domain(format!(
                "cell {k} has non-positive permeability {}",
                self.values[k]
            ))),
            None => Ok(()),
        }
    }

    /// Raster text with a header comment; values use the shortest
    /// round-trip representation.
    pub fn to_raster_string(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# nx={} ny={} row-major, bottom row first", self.nx, self.ny).unwrap();
        for j in 0..self.ny {
            let row: Vec<String> = (0..self.nx).map(|i| format!("{}", self.get(i, j))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn save_raster(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_raster_string()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

pub fn parse_raster(text: &str, nx: usize, ny: usize, usage: FieldUse, origin: &str) -> Result<ScalarCellField> {
    let mut values = Vec::with_capacity(nx * ny);
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Format {
                path: origin.to_string(),
                message: format!("cannot parse '{tok}' as a number"),
            })?;
            values.push(v);
        }
    }
    if values.len() != nx * ny {
        return Err(Error::Format {
            path: origin.to_string(),
            message: format!("expected {} values ({nx}x{ny}), found {}", nx * ny, values.len()),
        });
    }
    let field = ScalarCellField { nx, ny, values };
    if usage == FieldUse::Permeability {
        field.validate_positive()?;
    }
    Ok(field)
}

pub fn load_raster(path: impl AsRef<Path>, nx: usize, ny: usize, usage: FieldUse) -> Result<ScalarCellField> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_raster(&text, nx, ny, usage, &path.display().to_string())
}

/// Synthetic heterogeneous permeability.
///
/// The log-field is rescaled so the values span exactly `[1/contrast, 1]`;
/// high-permeability features sit at the top of that range.
pub fn gen_synthetic(kind: SyntheticKind, nx: usize, ny: usize, seed: u64, contrast: f64) -> Result<ScalarCellField> {
    if !(contrast >= 1.0) || !contrast.is_finite() {
        return Err(Error::InvalidArgument(format!("contrast must be >= 1, got {contrast}")));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument("field dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // background noise in [0, 0.35], features pushed to 1
    let mut logs: Vec<f64> = (0..nx * ny).map(|_| 0.35 * rng.gen::<f64>()).collect();
    let (fx, fy) = (nx as f64, ny as f64);
    match kind {
        SyntheticKind::Layered => {
            let mut j = 0;
            while j < ny {
                let thick = rng.gen_range(1..=(ny / 8).max(1));
                let level: f64 = rng.gen_range(0.0..0.6);
                let streak = rng.gen_bool(0.3);
                for jj in j..(j + thick).min(ny) {
                    for i in 0..nx {
                        let v = &mut logs[jj * nx + i];
                        *v = if streak { 0.85 + 0.15 * *v / 0.35 } else { level + *v };
                    }
                }
                j += thick;
            }
        }
        SyntheticKind::Channel => {
            let n_channels = 2 + (ny / 24).min(4);
            for c in 0..n_channels {
                let center = (c as f64 + 0.5 + rng.gen_range(-0.2..0.2)) * fy / n_channels as f64;
                let amp = rng.gen_range(0.05..0.15) * fy;
                let waves = rng.gen_range(1.0..2.5);
                let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                let half_width = (0.03 * fy).max(0.75) + rng.gen_range(0.0..0.5);
                for i in 0..nx {
                    let x = (i as f64 + 0.5) / fx;
                    let yc = center + amp * (std::f64::consts::TAU * waves * x + phase).sin();
                    for j in 0..ny {
                        if ((j as f64 + 0.5) - yc).abs() <= half_width {
                            logs[j * nx + i] = 1.0;
                        }
                    }
                }
            }
        }
        SyntheticKind::Blobs => {
            let n_blobs = 4 + (nx * ny) / 800;
            for _ in 0..n_blobs {
                let cx = rng.gen_range(0.0..fx);
                let cy = rng.gen_range(0.0..fy);
                let r = rng.gen_range(0.04..0.12) * fx.min(fy).max(4.0);
                for j in 0..ny {
                    for i in 0..nx {
                        let d2 = ((i as f64 + 0.5 - cx).powi(2) + (j as f64 + 0.5 - cy).powi(2)) / (r * r);
                        let bump = (-d2).exp();
                        let v = &mut logs[j * nx + i];
                        *v = v.max(bump);
                    }
                }
            }
        }
    }
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = contrast.log10();
    let values = logs
        .iter()
        .map(|&l| {
            if span == 0.0 || hi <= lo {
                1.0
            } else {
                10f64.powf(span * ((l - lo) / (hi - lo) - 1.0))
            }
        })
        .collect();
    Ok(ScalarCellField { nx, ny, values })
}

/// `β = β0 / κ` cellwise.
pub fn forchheimer_coeff(kappa: &ScalarCellField, beta0: f64) -> Result<ScalarCellField> {
    kappa.validate_positive()?;
    Ok(kappa.map(|k| beta0 / k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_constant_field() {
        let f = parse_raster("1 1 1 1", 2, 2, FieldUse::Permeability, "mem").unwrap();
        assert_eq!(f.values, vec![1.0; 4]);
    }

    #[test]
    fn comments_and_row_order() {
        let f = parse_raster("# header\n1 2\n3 4\n", 2, 2, FieldUse::Generic, "mem").unwrap();
        assert_eq!(f.get(0, 0), 1.0);
        assert_eq!(f.get(1, 0), 2.0);
        assert_eq!(f.get(0, 1), 3.0);
    }

    #[test]
    fn missing_value_reports_counts() {
        let err = parse_raster("1 1 1", 2, 2, FieldUse::Permeability, "k.txt").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 4"), "{msg}");
        assert!(msg.contains("found 3"), "{msg}");
        assert!(msg.contains("k.txt"));
    }

    #[test]
    fn non_positive_permeability_rejected() {
        let err = parse_raster("1 0 1 1", 2, 2, FieldUse::Permeability, "mem").unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        assert!(parse_raster("1 -2 1 1", 2, 2, FieldUse::Generic, "mem").is_ok());
    }

    #[test]
    fn example_two_shaped_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spe.txt");
        let field = ScalarCellField::from_fn(160, 60, |i, j| 1.0 + (i * j) as f64);
        field.save_raster(&path).unwrap();
        let back = load_raster(&path, 160, 60, FieldUse::Permeability).unwrap();
        assert_eq!(back.len(), 9600);
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_raster("/nonexistent/perm.txt", 2, 2, FieldUse::Permeability).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/perm.txt"));
    }

    #[test]
    fn synthetic_contrast_and_determinism() {
        for kind in [SyntheticKind::Layered, SyntheticKind::Channel, SyntheticKind::Blobs] {
            let f = gen_synthetic(kind, 60, 40, 7, 1e4).unwrap();
            let ratio = f.max() / f.min();
            assert!((ratio / 1e4 - 1.0).abs() < 0.01, "{kind:?}: {ratio}");
            let g = gen_synthetic(kind, 60, 40, 7, 1e4).unwrap();
            assert_eq!(f, g);
            let h = gen_synthetic(kind, 60, 40, 8, 1e4).unwrap();
            assert_ne!(f, h);
        }
    }

    #[test]
    fn unit_contrast_is_constant() {
        let f = gen_synthetic(SyntheticKind::Channel, 20, 10, 7, 1.0).unwrap();
        assert!(f.values.iter().all(|&v| v == f.values[0]));
        assert!(gen_synthetic(SyntheticKind::Channel, 20, 10, 7, 0.5).is_err());
    }

    #[test]
    fn forchheimer_examples() {
        let k = ScalarCellField::constant(3, 3, 1.0);
        assert!(forchheimer_coeff(&k, 100.0).unwrap().values.iter().all(|&b| b == 100.0));
        let k = ScalarCellField { nx: 2, ny: 1, values: vec![1e4, 1.0] };
        let b = forchheimer_coeff(&k, 1.0).unwrap();
        assert_eq!(b.values[0], 1e-4);
        assert!(forchheimer_coeff(&k, 0.0).unwrap().values.iter().all(|&b| b == 0.0));
        let bad = ScalarCellField { nx: 1, ny: 1, values: vec![0.0] };
        assert!(forchheimer_coeff(&bad, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn raster_round_trip(values in proptest::collection::vec(1e-8f64..1e8, 12)) {
            let f = ScalarCellField { nx: 4, ny: 3, values };
            let back = parse_raster(&f.to_raster_string(), 4, 3, FieldUse::Permeability, "mem").unwrap();
            prop_assert_eq!(f, back);
        }

        #[test]
        fn beta_monotone_and_linear(k1 in 1e-6f64..1e6, k2 in 1e-6f64..1e6, b0 in 0.0f64..1e4) {
            let k = ScalarCellField { nx: 2, ny: 1, values: vec![k1, k2] };
            let b = forchheimer_coeff(&k, b0).unwrap();
            let b2 = forchheimer_coeff(&k, 2.0 * b0).unwrap();
            if k1 < k2 {
                prop_assert!(b.values[0] >= b.values[1]);
            }
            for c in 0..2 {
                prop_assert!((b2.values[c] - 2.0 * b.values[c]).abs() <= 1e-12 * b2.values[c].abs().max(1e-300));
            }
        }
    }
}
