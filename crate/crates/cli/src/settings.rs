//! Line-oriented `key = value` settings with strict key checking.
//!
//! Values come from three layers: built-in defaults, an optional config file,
//! and command-line flags (`--key value`), later layers winning. Every key a
//! command accepts is declared up front; unknown keys are usage errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub name: &'static str,
    /// `None` marks a required key.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { name, default: Some(default), help }
}

const fn required(name: &'static str, help: &'static str) -> KeySpec {
    KeySpec { name, default: None, help }
}

/// Keys that do not change any numeric output and are left out of the hash.
const UNHASHED: &[&str] = &["out", "threads"];

/// Keys naming input files; their contents are hashed instead of the path.
const INPUT_FILES: &[&str] = &["checkpoint", "table", "profile_file"];

const COMMON: &[KeySpec] = &[
    key("out", "out", "output directory"),
    key("threads", "0", "worker threads (0: GLVAR_THREADS or all cores)"),
    key("seed", "0", "seed for random starts"),
];

const PROFILE: &[KeySpec] = &[
    key("profile", "x1", "applied field: constant, affine, x1 or custom"),
    key("beta", "1", "value of a constant profile"),
    key("offset", "0", "affine profile offset"),
    key("slope", "1,0", "affine profile slope (two components)"),
    key("profile_file", "", "binary real field for a custom profile"),
    key("domain", "-1,-1,1,1", "domain box x0,y0,x1,y1"),
    key("cells", "128", "cells along x"),
    key("nondegeneracy", "1e-8", "minimum of |B0| + |grad B0|"),
];

const FIELD: &[KeySpec] = &[required("kappa", "GL parameter"), required("H", "applied field strength")];

const CELL: &[KeySpec] = &[
    key("density", "12.766152972845177", "cells per unit of cell side"),
    key("random_starts", "5", "random starts per cell problem"),
];

pub const REFCELL: &[KeySpec] = &[
    required("b", "field ratios, comma separated"),
    required("R2pi", "flux counts k with R^2 = 2 pi k, comma separated"),
    key("bc", "all", "dirichlet, neumann, periodic or all (comma separated)"),
    key("sigma", "1", "field sign, 1 or -1"),
    key("timings", "false", "write solve times into the CSV"),
];

pub const FHAT: &[KeySpec] = &[
    key("b", "0.02,0.05,0.1,0.2,0.35,0.5,0.7,0.85,1", "field ratios to tabulate"),
    key("flux", "4,9,16", "flux counts of the cell sides"),
];

pub const PREDICT: &[KeySpec] = &[
    required("table", "limiting-density table CSV"),
    key("checkpoint", "", "minimizer checkpoint to compare against"),
];

pub const MINIMIZE: &[KeySpec] = &[
    key("mode", "psi-only", "psi-only or coupled"),
    key("init", "random-phase", "uniform, random-phase or zero"),
    key("tol", "1e-8", "stationarity target relative to max(1, kappa^2)"),
    key("max_iter", "20000", "descent iterations per grid level"),
    key("restarts", "5", "number of starts"),
    key("c_res", "0.25", "resolution constant"),
    key("min_coarse_cells", "64", "cells per side of the coarsest level"),
    key("coarse_tol", "1e-5", "relative stationarity on coarse levels"),
    key("prune", "true", "carry only the best start to the finest level"),
    key("max_outer", "8", "stream/psi alternations in coupled mode"),
    key("inner_iter", "400", "psi iterations per alternation"),
    key("trace_every", "10", "trace sampling interval"),
];

pub const VORTICES: &[KeySpec] = &[
    required("checkpoint", "minimizer checkpoint"),
    key("threshold", "0.5", "|psi| threshold on disk boundaries"),
    key("regions", "", "test boxes x0,y0,x1,y1 separated by ';' (default: halves and strips)"),
];

pub const REPORT: &[KeySpec] = &[
    required("checkpoint", "minimizer checkpoint"),
    required("table", "limiting-density table CSV"),
    key("threshold", "0.5", "|psi| threshold on disk boundaries"),
    key("regions", "", "test boxes x0,y0,x1,y1 separated by ';' (default: halves and strips)"),
    key("tau", "0.25", "nice/bad threshold"),
];

/// All keys of a command.
pub fn keys_for(command: &str) -> Vec<KeySpec> {
    let groups: Vec<&[KeySpec]> = match command {
        "refcell" => vec![COMMON, CELL, REFCELL],
        "fhat" => vec![COMMON, CELL, FHAT],
        "predict" => vec![COMMON, FIELD, PROFILE, PREDICT],
        "minimize" => vec![COMMON, FIELD, PROFILE, MINIMIZE],
        "vortices" => vec![COMMON, FIELD, PROFILE, VORTICES],
        "report" => vec![COMMON, FIELD, PROFILE, REPORT],
        _ => vec![],
    };
    groups.into_iter().flatten().copied().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub command: String,
    values: BTreeMap<String, String>,
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl Settings {
    /// Merge defaults, config file entries and flag values, rejecting
    /// unknown and missing keys.
    pub fn resolve(command: &str, config: &[(String, String)], flags: &[(String, String)]) -> Result<Self, CliError> {
        let specs = keys_for(command);
        if specs.is_empty() {
            return Err(CliError::Usage(format!("unknown command {command}")));
        }
        let mut values = BTreeMap::new();
        for s in &specs {
            if let Some(d) = s.default {
                values.insert(s.name.to_string(), d.to_string());
            }
        }
        for (k, v) in config.iter().chain(flags) {
            if !specs.iter().any(|s| s.name == k) {
                return Err(CliError::Usage(format!("unknown key '{k}' for {command}")));
            }
            values.insert(k.clone(), v.clone());
        }
        if let Some(s) = specs.iter().find(|s| !values.contains_key(s.name)) {
            return Err(CliError::Usage(format!("missing required key '{}'", s.name)));
        }
        Ok(Self { command: command.to_string(), values })
    }

    pub fn raw(&self, k: &str) -> &str {
        self.values.get(k).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, k: &str) -> Result<T, CliError> {
        let v = self.raw(k);
        v.parse().map_err(|_| CliError::Usage(format!("invalid value '{v}' for '{k}'")))
    }

    pub fn list<T: FromStr>(&self, k: &str) -> Result<Vec<T>, CliError> {
        let v = self.raw(k);
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',').map(|s| s.trim().parse().map_err(|_| CliError::Usage(format!("invalid entry '{s}' in '{k}'")))).collect()
    }

    pub fn path(&self, k: &str) -> Option<PathBuf> {
        let v = self.raw(k);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    /// Existing input file, or a missing-input error.
    pub fn input(&self, k: &str) -> Result<Option<PathBuf>, CliError> {
        match self.path(k) {
            Some(p) if !p.is_file() => Err(CliError::MissingInput(format!("{k}: {} does not exist", p.display()))),
            p => Ok(p),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out"))
    }

    /// SHA-256 of the command and every numeric-relevant `key=value`, sorted.
    /// Input files enter through the digest of their contents, so moving a
    /// checkpoint does not change the hash.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        h.update(b"\n");
        for (k, v) in &self.values {
            if UNHASHED.contains(&k.as_str()) {
                continue;
            }
            let digest = (INPUT_FILES.contains(&k.as_str()) && !v.is_empty()).then(|| std::fs::read(v).ok()).flatten();
            let v = match digest {
                Some(bytes) => format!("sha256:{}", hex(&Sha256::digest(&bytes))),
                None => v.clone(),
            };
            h.update(format!("{k}={v}\n").as_bytes());
        }
        hex(&h.finalize())
    }

    /// Header lines identifying the tool and the configuration.
    pub fn preamble(&self) -> Vec<String> {
        vec![format!("glvar {}", env!("CARGO_PKG_VERSION")), format!("config-hash {}", self.hash())]
    }

    pub fn entries(&self) -> impl Iterator<Item = (&String, &String)> {
        self.values.iter()
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_config(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::MissingInput(format!("config {}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers_and_strictness() {
        let cfg = parse_config("b = 0.5  # ratio\n\nR2pi=4\n").unwrap();
        let s = Settings::resolve("refcell", &cfg, &[("bc".into(), "dirichlet".into())]).unwrap();
        assert_eq!(s.raw("bc"), "dirichlet");
        assert_eq!(s.list::<f64>("b").unwrap(), vec![0.5]);
        assert_eq!(s.get::<i32>("sigma").unwrap(), 1);
        assert!(matches!(Settings::resolve("refcell", &cfg, &[("bogus".into(), "1".into())]), Err(CliError::Usage(_))));
        assert!(matches!(Settings::resolve("refcell", &[], &[]), Err(CliError::Usage(_))));
        assert!(parse_config("novalue\n").is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let base = [("b".to_string(), "0.5".to_string()), ("R2pi".to_string(), "4".to_string())];
        let a = Settings::resolve("refcell", &base, &[("out".into(), "x".into())]).unwrap();
        let b = Settings::resolve("refcell", &base, &[("out".into(), "y".into()), ("threads".into(), "3".into())]).unwrap();
        let c = Settings::resolve("refcell", &base, &[("seed".into(), "1".into())]).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
