//! Run configuration, read from TOML.
//!
//! Every key has a default, so an empty file is a valid configuration
//! (Test 1 on the 100 x 60 grid). Unknown keys are rejected.
//!
//! ```toml
//! mode = "inverse_source"        # or "coefficient"
//! test = "test1"                 # test1..test6 or custom
//! output_dir = "out/test1"
//! delta = 0.05
//! seed = 7
//! epsilon = 1e-8
//! refinement = 2
//! weighted_gram = false
//! solver = "cholesky"            # or "cg"
//! test2_scaled = true
//!
//! [grid]
//! r = 1.0
//! nx = 40
//! nt = 30
//! t_final = 0.2
//!
//! [coefficient]
//! n_star = 20
//! c0 = 1.0
//! update_rule = "background"     # background, cumulative or anchored
//! write_iterates = true
//!
//! [[custom.inclusions]]
//! label = "blob"
//! shape = "bump"                 # bump, disk or rectangle
//! center = [0.2, -0.1]
//! radius = 0.3                   # bump and disk
//! half_widths = [0.2, 0.1]       # rectangle
//! amplitude = 1.5
//! ```

use std::path::{Path, PathBuf};

use quasirev::cip::UpdateRule;
use quasirev::phantoms::{Inclusion, Phantom, Shape};
use quasirev::qr::{GramWeighting, LinearSolver, QrOptions, DEFAULT_TOL};
use quasirev::{GridSpec, NoiseSpec};
use serde::Deserialize;

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    InverseSource,
    Coefficient,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Cholesky,
    Cg,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub r: f64,
    pub nx: usize,
    pub nt: usize,
    pub t_final: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            r: 1.0,
            nx: 100,
            nt: 60,
            t_final: 0.2,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientConfig {
    pub n_star: usize,
    pub c0: f64,
    pub update_rule: String,
    pub write_iterates: bool,
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        Self {
            n_star: 20,
            c0: 1.0,
            update_rule: UpdateRule::default().label().to_string(),
            write_iterates: true,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InclusionConfig {
    #[serde(default)]
    pub label: Option<String>,
    pub shape: String,
    pub center: [f64; 2],
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub half_widths: Option<[f64; 2]>,
    pub amplitude: f64,
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CustomConfig {
    pub background: f64,
    pub inclusions: Vec<InclusionConfig>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    pub test: String,
    pub output_dir: PathBuf,
    pub delta: f64,
    pub seed: u64,
    pub epsilon: f64,
    pub refinement: usize,
    pub weighted_gram: bool,
    pub solver: SolverChoice,
    pub test2_scaled: bool,
    pub grid: GridConfig,
    pub coefficient: CoefficientConfig,
    pub custom: CustomConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::InverseSource,
            test: "test1".into(),
            output_dir: PathBuf::from("output"),
            delta: 0.0,
            seed: 0,
            epsilon: 1e-8,
            refinement: 2,
            weighted_gram: false,
            solver: SolverChoice::Cholesky,
            test2_scaled: true,
            grid: GridConfig::default(),
            coefficient: CoefficientConfig::default(),
            custom: CustomConfig::default(),
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Read(std::io::Error),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Read(e) => write!(f, "cannot read configuration: {e}"),
            ConfigError::Invalid(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Read)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.grid_spec()?;
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return bad(format!("delta must be >= 0, got {}", self.delta));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.refinement == 0 {
            return bad("refinement must be at least 1".into());
        }
        if self.grid.nt < 2 {
            return bad("nt must be at least 2 to difference the data in time".into());
        }
        if self.mode == Mode::Coefficient {
            if self.coefficient.n_star == 0 {
                return bad("coefficient.n_star must be at least 1".into());
            }
            if !self.coefficient.c0.is_finite() {
                return bad("coefficient.c0 must be finite".into());
            }
        }
        self.update_rule()?;
        self.phantom()?;
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        GridSpec::new(self.grid.r, self.grid.nx, self.grid.nt, self.grid.t_final)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            delta: self.delta,
            seed: self.seed,
        }
    }

    pub fn qr_options(&self) -> QrOptions {
        QrOptions {
            epsilon: self.epsilon,
            weighting: if self.weighted_gram {
                GramWeighting::Measure
            } else {
                GramWeighting::Unweighted
            },
            solver: match self.solver {
                SolverChoice::Cholesky => LinearSolver::default(),
                SolverChoice::Cg => LinearSolver::ConjugateGradient { max_iter: None },
            },
            tol: DEFAULT_TOL,
        }
    }

    pub fn update_rule(&self) -> Result<UpdateRule, ConfigError> {
        UpdateRule::from_label(&self.coefficient.update_rule).ok_or_else(|| {
            ConfigError::Invalid(format!(
                "unknown update_rule `{}` (expected background, cumulative or anchored)",
                self.coefficient.update_rule
            ))
        })
    }

    pub fn phantom(&self) -> Result<Phantom, ConfigError> {
        let phantom = if self.test == "custom" {
            self.custom_phantom()?
        } else {
            Phantom::by_name(&self.test, self.test2_scaled).map_err(|e| ConfigError::Invalid(e.to_string()))?
        };
        match (self.mode, phantom.is_coefficient()) {
            (Mode::InverseSource, true) => Err(ConfigError::Invalid(format!(
                "{} is a coefficient phantom; use mode = \"coefficient\"",
                self.test
            ))),
            (Mode::Coefficient, false) if self.test != "custom" => Err(ConfigError::Invalid(format!(
                "{} is a source phantom; use mode = \"inverse_source\"",
                self.test
            ))),
            _ => Ok(phantom),
        }
    }

    fn custom_phantom(&self) -> Result<Phantom, ConfigError> {
        let mut inclusions = Vec::with_capacity(self.custom.inclusions.len());
        for (k, inc) in self.custom.inclusions.iter().enumerate() {
            let positive = |v: Option<f64>, what: &str| match v {
                Some(r) if r.is_finite() && r > 0.0 => Ok(r),
                _ => Err(ConfigError::Invalid(format!("custom inclusion {k}: `{what}` must be positive"))),
            };
            let center = (inc.center[0], inc.center[1]);
            let shape = match inc.shape.as_str() {
                "bump" => Shape::Bump {
                    center,
                    radius: positive(inc.radius, "radius")?,
                },
                "disk" => Shape::disk(center, positive(inc.radius, "radius")?),
                "rectangle" => {
                    let hw = inc.half_widths.unwrap_or([0.0, 0.0]);
                    let (a, b) = (positive(Some(hw[0]), "half_widths")?, positive(Some(hw[1]), "half_widths")?);
                    Shape::Rectangle {
                        center,
                        sx: 1.0 / a,
                        sy: 1.0 / b,
                        half: 1.0,
                    }
                }
                other => {
                    return Err(ConfigError::Invalid(format!(
                        "custom inclusion {k}: unknown shape `{other}`"
                    )))
                }
            };
            inclusions.push(Inclusion {
                label: inc.label.clone().unwrap_or_else(|| format!("inclusion{k}")),
                shape,
                amplitude: inc.amplitude,
            });
        }
        if inclusions.is_empty() && self.mode == Mode::InverseSource {
            return Err(ConfigError::Invalid("custom source needs at least one inclusion".into()));
        }
        Ok(Phantom {
            name: "custom".into(),
            background: self.custom.background,
            inclusions,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let spec = cfg.grid_spec().unwrap();
        assert_eq!((spec.nx(), spec.nt()), (100, 60));
        assert_eq!(cfg.epsilon, 1e-8);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("epsilom = 1e-8").is_err());
        assert!(RunConfig::from_toml("[grid]\nnz = 3").is_err());
        assert!(RunConfig::from_toml("[coefficient]\nnstar = 3").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "delta = -0.1",
            "epsilon = 0.0",
            "refinement = 0",
            "test = \"test9\"",
            "mode = \"sideways\"",
            "[grid]\nnx = 0",
            "[grid]\nnt = 1",
            "test = \"test5\"",
            "mode = \"coefficient\"\ntest = \"test1\"",
            "mode = \"coefficient\"\ntest = \"test5\"\n[coefficient]\nupdate_rule = \"random\"",
            "test = \"custom\"",
        ] {
            assert!(RunConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn custom_inclusions() {
        let cfg = RunConfig::from_toml(
            r#"
test = "custom"
[[custom.inclusions]]
shape = "bump"
center = [0.1, 0.2]
radius = 0.3
amplitude = 2.0
[[custom.inclusions]]
label = "box"
shape = "rectangle"
center = [-0.5, -0.5]
half_widths = [0.2, 0.1]
amplitude = -1.0
"#,
        )
        .unwrap();
        let p = cfg.phantom().unwrap();
        assert_eq!(p.eval(0.1, 0.2), 2.0);
        assert_eq!(p.eval(-0.5, -0.5), -1.0);
        assert_eq!(p.eval(-0.5, -0.35), 0.0);
        assert_eq!(p.inclusions[0].label, "inclusion0");
    }

    #[test]
    fn solver_and_weighting_switches() {
        let cfg = RunConfig::from_toml("solver = \"cg\"\nweighted_gram = true").unwrap();
        let opts = cfg.qr_options();
        assert_eq!(opts.weighting, GramWeighting::Measure);
        assert!(matches!(opts.solver, LinearSolver::ConjugateGradient { .. }));
    }
}
