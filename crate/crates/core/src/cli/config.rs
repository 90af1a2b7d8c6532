//! Run configuration: a JSON file plus `dotted.path=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::continuation::{NewtonOptions, DEFAULT_NP, DEFAULT_NQ};
use crate::error::{Error, Result};
use crate::laminar::PhysicalParams;
use crate::reconstruct::Tolerances;
use crate::vorticity::VorticityProfile;

/// Output directory used when neither the command line nor the config sets one.
pub const OUT_DIR_ENV: &str = "HYDROELASTIC_OUT_DIR";
pub const FALLBACK_OUT_DIR: &str = "hydroelastic-out";

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VorticitySpec {
    Zero,
    Constant {
        gamma0: f64,
    },
    /// `(p, γ)` samples covering `[p₀, 0]`.
    Tabulated {
        samples: Vec<(f64, f64)>,
    },
    /// Two-column CSV file `p,gamma`; relative paths resolve against the
    /// directory of the config file.
    Csv {
        path: PathBuf,
    },
}

/// Externally tagged mirror of [`VorticitySpec`]. Serde buffers the fields
/// of internally tagged enums, and that buffer cannot hold
/// arbitrary-precision numbers such as the 17-digit floats of `config.json`,
/// so the tag is moved outside by hand.
#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum TaggedSpec {
    Zero {},
    Constant { gamma0: f64 },
    Tabulated { samples: Vec<(f64, f64)> },
    Csv { path: PathBuf },
}

impl<'de> Deserialize<'de> for VorticitySpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut tree = Value::deserialize(d)?;
        let map = tree.as_object_mut().ok_or_else(|| D::Error::custom("vorticity must be an object"))?;
        let kind = match map.remove("kind") {
            Some(Value::String(k)) => k,
            Some(_) => return Err(D::Error::custom("vorticity.kind must be a string")),
            None => return Err(D::Error::missing_field("kind")),
        };
        let mut outer = serde_json::Map::new();
        outer.insert(kind, tree);
        let tagged: TaggedSpec = serde_json::from_value(Value::Object(outer)).map_err(D::Error::custom)?;
        Ok(match tagged {
            TaggedSpec::Zero {} => VorticitySpec::Zero,
            TaggedSpec::Constant { gamma0 } => VorticitySpec::Constant { gamma0 },
            TaggedSpec::Tabulated { samples } => VorticitySpec::Tabulated { samples },
            TaggedSpec::Csv { path } => VorticitySpec::Csv { path },
        })
    }
}

/// Wavelengths `λ*·[lambda_min, lambda_max]` and modes `k = 1..=modes`
/// (`μ = (2πk)²`) of the Wronskian scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_lambda: usize,
    pub modes: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { lambda_min: 0.5, lambda_max: 2.5, n_lambda: 41, modes: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Fourier nodes per wavelength (power of two, at least 8).
    pub n_q: usize,
    /// Rows of the continuation grid in `p` (odd, at least 5).
    pub n_p: usize,
    /// Samples of the laminar flow and of the shooting output (odd).
    pub n_laminar: usize,
    pub s_max: f64,
    pub n_steps: usize,
    pub newton: NewtonOptions,
    pub scan: ScanConfig,
    pub verify: Tolerances,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            n_q: DEFAULT_NQ,
            n_p: DEFAULT_NP,
            n_laminar: crate::laminar::DEFAULT_NP,
            s_max: 5e-3,
            n_steps: 5,
            newton: NewtonOptions::default(),
            scan: ScanConfig::default(),
            verify: Tolerances::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physical: PhysicalParams,
    pub vorticity: VorticitySpec,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    /// Parses `tree` after applying `overrides`; `base` anchors relative paths.
    pub fn from_value(mut tree: Value, overrides: &[String], base: &Path) -> Result<Self> {
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let mut cfg: RunConfig = serde_json::from_value(tree).map_err(|e| Error::invalid(format!("config: {e}")))?;
        if let VorticitySpec::Csv { path } = &mut cfg.vorticity {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        let tree: Value =
            serde_json::from_str(&text).map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_value(tree, overrides, base)
    }

    pub fn validate(&self) -> Result<()> {
        self.physical.validate()?;
        let n = &self.numerics;
        if n.n_q < 8 || !n.n_q.is_power_of_two() {
            return Err(Error::invalid(format!("numerics.n_q must be a power of two >= 8, got {}", n.n_q)));
        }
        if n.n_p < 5 || n.n_p.is_multiple_of(2) {
            return Err(Error::invalid(format!("numerics.n_p must be odd and >= 5, got {}", n.n_p)));
        }
        if n.n_laminar < 5 || n.n_laminar.is_multiple_of(2) {
            return Err(Error::invalid(format!("numerics.n_laminar must be odd and >= 5, got {}", n.n_laminar)));
        }
        if !n.s_max.is_finite() {
            return Err(Error::invalid("numerics.s_max must be finite"));
        }
        n.newton.validate()?;
        n.verify.validate()?;
        let s = &n.scan;
        if !(s.lambda_min > 0.0 && s.lambda_max > s.lambda_min && s.lambda_max.is_finite()) {
            return Err(Error::invalid("numerics.scan needs 0 < lambda_min < lambda_max"));
        }
        if s.n_lambda < 2 || s.modes == 0 {
            return Err(Error::invalid("numerics.scan needs n_lambda >= 2 and modes >= 1"));
        }
        if let VorticitySpec::Constant { gamma0 } = self.vorticity {
            if !gamma0.is_finite() {
                return Err(Error::invalid("vorticity.gamma0 must be finite"));
            }
        }
        Ok(())
    }

    pub fn profile(&self) -> Result<VorticityProfile> {
        let p0 = self.physical.p0;
        match &self.vorticity {
            VorticitySpec::Zero => VorticityProfile::zero(p0),
            VorticitySpec::Constant { gamma0 } => VorticityProfile::constant(p0, *gamma0),
            VorticitySpec::Tabulated { samples } => VorticityProfile::tabulated(samples),
            VorticitySpec::Csv { path } => VorticityProfile::from_csv_path(path),
        }
    }

    /// Command line, then the config, then `$HYDROELASTIC_OUT_DIR`, then a
    /// fixed relative directory.
    pub fn out_dir(&self, cli: Option<&Path>) -> PathBuf {
        if let Some(p) = cli {
            return p.to_path_buf();
        }
        if let Some(p) = &self.output.dir {
            return p.clone();
        }
        default_out_dir()
    }
}

/// `$HYDROELASTIC_OUT_DIR`, else a fixed relative directory.
pub fn default_out_dir() -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(FALLBACK_OUT_DIR),
    }
}

/// Sets `path=value` in `tree`, creating objects along the way. `value` is
/// parsed as JSON and taken as a string if that fails.
pub fn apply_override(tree: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("override `{assignment}` is not of the form path=value")))?;
    let keys: Vec<&str> = path.split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::invalid(format!("override path `{path}` has an empty component")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = tree;
    for (i, key) in keys.iter().enumerate() {
        let map = match node {
            Value::Object(m) => m,
            _ => return Err(Error::invalid(format!("override `{path}`: `{}` is not an object", keys[..i].join(".")))),
        };
        if i == keys.len() - 1 {
            map.insert((*key).to_owned(), value);
            return Ok(());
        }
        node = map.entry((*key).to_owned()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("override path has at least one key")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> Value {
        json!({
            "physical": {"g": 1.0, "depth": 1.0, "p0": -2.0, "alpha": 0.5},
            "vorticity": {"kind": "zero"}
        })
    }

    #[test]
    fn defaults_and_overrides() {
        let cfg = RunConfig::from_value(base(), &[], Path::new(".")).unwrap();
        assert_eq!(cfg.numerics.n_q, 64);
        assert_eq!(cfg.numerics.n_p, 129);
        let sets = ["numerics.n_q=32".to_owned(), "vorticity={\"kind\":\"constant\",\"gamma0\":1}".to_owned()];
        let cfg = RunConfig::from_value(base(), &sets, Path::new(".")).unwrap();
        assert_eq!(cfg.numerics.n_q, 32);
        assert_eq!(cfg.vorticity, VorticitySpec::Constant { gamma0: 1.0 });
        let cfg = RunConfig::from_value(base(), &["output.dir=runs/a".to_owned()], Path::new(".")).unwrap();
        assert_eq!(cfg.out_dir(None), PathBuf::from("runs/a"));
        assert_eq!(cfg.out_dir(Some(Path::new("x"))), PathBuf::from("x"));
    }

    #[test]
    fn errors_name_the_field() {
        let mut tree = base();
        tree["physical"].as_object_mut().unwrap().remove("depth");
        let e = RunConfig::from_value(tree, &[], Path::new(".")).unwrap_err().to_string();
        assert!(e.contains("depth"), "{e}");
        for bad in
            ["numerics.n_q=48", "numerics.n_p=64", "physical.alpha=-1", "numerics.newton.tol=0", "numerics.bogus=1"]
        {
            let e = RunConfig::from_value(base(), &[bad.to_owned()], Path::new("."));
            assert!(e.is_err(), "{bad}");
        }
        assert!(apply_override(&mut base(), "novalue").is_err());
        assert!(apply_override(&mut base(), "physical.g.x=1").is_err());
    }

    #[test]
    fn written_configs_read_back() {
        let sets = ["vorticity={\"kind\":\"tabulated\",\"samples\":[[-2,0.1],[0,0.3]]}".to_owned()];
        let cfg = RunConfig::from_value(base(), &sets, Path::new(".")).unwrap();
        let tree = crate::export::to_json(&cfg).unwrap();
        let text = serde_json::to_string(&tree).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        let back = RunConfig::from_value(serde_json::from_str(&text).unwrap(), &[], Path::new(".")).unwrap();
        assert_eq!(back, cfg);
        let bad = json!({"physical": base()["physical"], "vorticity": {"kind": "constant", "gamma": 1}});
        assert!(RunConfig::from_value(bad, &[], Path::new(".")).is_err());
        let bad = json!({"physical": base()["physical"], "vorticity": {"gamma0": 1}});
        assert!(RunConfig::from_value(bad, &[], Path::new(".")).unwrap_err().to_string().contains("kind"));
    }

    #[test]
    fn csv_paths_resolve_against_the_config() {
        let tree = json!({
            "physical": {"g": 1.0, "depth": 1.0, "p0": -2.0, "alpha": 0.5},
            "vorticity": {"kind": "csv", "path": "gamma.csv"}
        });
        let cfg = RunConfig::from_value(tree, &[], Path::new("/data")).unwrap();
        assert_eq!(cfg.vorticity, VorticitySpec::Csv { path: PathBuf::from("/data/gamma.csv") });
    }
}
