use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algebra::Penalty;
use crate::error::{Error, Result};
use crate::grid::Backend;
use crate::scenarios::ScenarioName;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Number of dual time intervals.
    pub nt: usize,
    /// Forward step size.
    pub dt: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            t_final: 0.5,
            nt: 8,
            dt: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSection {
    pub backend: Backend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualSection {
    pub a_v: f64,
    pub a_alpha: f64,
    pub a_p: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DualSection {
    fn default() -> Self {
        let p = Penalty::default();
        Self {
            a_v: p.a_v,
            a_alpha: p.a_alpha,
            a_p: p.a_p,
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

impl DualSection {
    pub fn penalty(&self) -> Penalty {
        Penalty {
            a_v: self.a_v,
            a_alpha: self.a_alpha,
            a_p: self.a_p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardSection {
    pub nu: f64,
    pub eta: f64,
    pub dealias: bool,
    /// Steps between written snapshots.
    pub sample_every: usize,
}

impl Default for ForwardSection {
    fn default() -> Self {
        Self {
            nu: 0.0,
            eta: 0.0,
            dealias: true,
            sample_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub name: ScenarioName,
    pub seed: u64,
    /// Field file holding a packed primal state, for `from_file`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Size of a smooth perturbation added to the dual base state only.
    pub perturbation: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            name: ScenarioName::Constant,
            seed: 0,
            path: None,
            perturbation: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub output_dir: PathBuf,
}

impl Default for IoSection {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("ifdm_out"),
        }
    }
}

/// Complete run configuration; every section and key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub time: TimeSection,
    pub scheme: SchemeSection,
    pub dual: DualSection,
    pub forward: ForwardSection,
    pub scenario: ScenarioSection,
    pub io: IoSection,
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// 1-based line of `key` inside `[section]`, or of the section header, or 1.
fn locate(src: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    let mut header_line = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if current == section {
                header_line = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    header_line.unwrap_or(1)
}

impl RunConfig {
    pub fn parse(src: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of_offset(src, s.start)).unwrap_or(1),
            message: e.message().to_string(),
        })?;
        cfg.validate_with_source(src)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src)
    }

    /// TOML text that parses back to `self`. Fails for values TOML cannot
    /// hold, such as seeds above `i64::MAX`.
    pub fn to_toml(&self) -> Result<String> {
        if self.scenario.seed > i64::MAX as u64 {
            return Err(Error::InvalidArgument(format!(
                "scenario.seed = {} exceeds the TOML integer range",
                self.scenario.seed
            )));
        }
        toml::to_string(self).map_err(|e| Error::InvalidArgument(format!("config not representable as TOML: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_source("")
    }

    fn validate_with_source(&self, src: &str) -> Result<()> {
        let fail = |section: &str, key: &str, message: String| -> Result<()> {
            Err(Error::Config {
                line: locate(src, section, key),
                message,
            })
        };
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if self.grid.n < 4 {
            return fail("grid", "n", format!("grid.n must be at least 4, got {}", self.grid.n));
        }
        if !positive(self.time.t_final) {
            return fail("time", "T", format!("time.T must be positive, got {}", self.time.t_final));
        }
        if self.time.nt < 2 {
            return fail("time", "nt", format!("time.nt must be at least 2, got {}", self.time.nt));
        }
        if !positive(self.time.dt) {
            return fail("time", "dt", format!("time.dt must be positive, got {}", self.time.dt));
        }
        for (key, v) in [("a_v", self.dual.a_v), ("a_alpha", self.dual.a_alpha), ("a_p", self.dual.a_p)] {
            if !positive(v) {
                return fail("dual", key, format!("dual.{key} must be positive, got {v}"));
            }
        }
        if !positive(self.dual.tol) {
            return fail("dual", "tol", format!("dual.tol must be positive, got {}", self.dual.tol));
        }
        for (key, v) in [("nu", self.forward.nu), ("eta", self.forward.eta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail("forward", key, format!("forward.{key} must be non-negative, got {v}"));
            }
        }
        if self.forward.sample_every == 0 {
            return fail("forward", "sample_every", "forward.sample_every must be positive".into());
        }
        if !(self.scenario.perturbation >= 0.0 && self.scenario.perturbation.is_finite()) {
            return fail(
                "scenario",
                "perturbation",
                format!("scenario.perturbation must be non-negative, got {}", self.scenario.perturbation),
            );
        }
        if self.scenario.name == ScenarioName::FromFile && self.scenario.path.is_none() {
            return fail("scenario", "name", "scenario 'from_file' requires scenario.path".into());
        }
        Ok(())
    }

    /// Forward step count, requiring `T` to be a whole number of steps.
    pub fn forward_steps(&self) -> Result<usize> {
        let steps = (self.time.t_final / self.time.dt).round();
        if steps < 1.0 || (steps * self.time.dt - self.time.t_final).abs() > 1e-9 * self.time.t_final {
            return Err(Error::Config {
                line: 1,
                message: format!(
                    "time.T = {} is not a whole number of steps of time.dt = {}",
                    self.time.t_final, self.time.dt
                ),
            });
        }
        Ok(steps as usize)
    }
}
