//! TOML experiment configuration.
//!
//! ```toml
//! experiment = "qq"
//! seed = 7
//! replicates = 50
//! output_dir = "out/qq"
//! q_list = [0.1, 0.5, 0.9, 0.95]
//!
//! [model]
//! mode = "banded_toeplitz"
//! coeffs = [0.5, 0.25]
//!
//! [[distributions]]
//! kind = "gaussian"
//!
//! [[distributions]]
//! kind = "student_t"
//! dof = 3.0
//!
//! [[sizes]]
//! p = 100
//! n = 200
//! ```

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::limit_laws::SolverOptions;
use crate::population::{ModelSpec, PopulationModel};

/// Default replicate count.
pub const DEFAULT_REPLICATES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Mp,
    Lsd,
    Diagnose,
    Qq,
    Validate,
    Moments,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Simulate,
        ExperimentKind::Mp,
        ExperimentKind::Lsd,
        ExperimentKind::Diagnose,
        ExperimentKind::Qq,
        ExperimentKind::Validate,
        ExperimentKind::Moments,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Mp => "mp",
            ExperimentKind::Lsd => "lsd",
            ExperimentKind::Diagnose => "diagnose",
            ExperimentKind::Qq => "qq",
            ExperimentKind::Validate => "validate",
            ExperimentKind::Moments => "moments",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Size {
    pub p: usize,
    pub n: usize,
}

impl Size {
    pub fn gamma(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    pub fn label(&self) -> String {
        format!("{}x{}", self.p, self.n)
    }
}

/// A point `re + i im` of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZPoint {
    pub re: f64,
    pub im: f64,
}

impl ZPoint {
    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Imaginary offset for Stieltjes inversion.
    pub epsilon: f64,
    pub solver_tol: f64,
    pub damping: f64,
    pub max_iter: usize,
    /// Points in density/CDF tables.
    pub grid_points: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = SolverOptions::default();
        Self {
            epsilon: 1e-3,
            solver_tol: s.tol,
            damping: s.damping,
            max_iter: s.max_iter,
            grid_points: 400,
        }
    }
}

impl Tolerances {
    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            damping: self.damping,
            tol: self.solver_tol,
            max_iter: self.max_iter,
        }
    }
}

/// Provenance written into emitted manifests; ignored when a manifest is loaded back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestInfo {
    pub version: String,
    pub seed: u64,
    pub stream_derivation: String,
    pub files: Vec<String>,
}

fn default_model() -> ModelSpec {
    ModelSpec::Identity
}

fn default_distributions() -> Vec<DistributionSpec> {
    vec![DistributionSpec::gaussian()]
}

fn default_replicates() -> usize {
    DEFAULT_REPLICATES
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_z_grid() -> Vec<ZPoint> {
    vec![ZPoint { re: 0.0, im: 1.0 }]
}

fn default_q_list() -> Vec<f64> {
    vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_model")]
    pub model: ModelSpec,
    #[serde(default = "default_distributions")]
    pub distributions: Vec<DistributionSpec>,
    #[serde(default)]
    pub sizes: Vec<Size>,
    /// Ratio `p/n` for `mp` when no sizes are given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_z_grid")]
    pub z_grid: Vec<ZPoint>,
    #[serde(default = "default_q_list")]
    pub q_list: Vec<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestInfo>,
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line where `key` is first assigned or opened as a table.
fn line_of_key(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let t = l.trim_start();
        let bare = t.trim_start_matches('[').trim_start();
        (t.starts_with(key) || (t.starts_with('[') && bare.starts_with(key)))
            && bare[key.len()..].trim_start().starts_with(['=', ']', '.'])
    })
    .map(|i| i + 1)
}

impl ExperimentConfig {
    /// Defaults for `kind`; used when the CLI runs without a config file.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let sizes = match kind {
            ExperimentKind::Mp => Vec::new(),
            _ => vec![Size { p: 100, n: 200 }],
        };
        let distributions = match kind {
            ExperimentKind::Qq => vec![DistributionSpec::gaussian(), DistributionSpec::student_t(3.0).expect("dof > 2")],
            _ => default_distributions(),
        };
        Self {
            experiment: kind,
            model: default_model(),
            distributions,
            sizes,
            gamma: (kind == ExperimentKind::Mp).then_some(0.5),
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            z_grid: default_z_grid(),
            q_list: default_q_list(),
            output_dir: default_output_dir(),
            tolerances: Tolerances::default(),
            manifest: None,
        }
    }

    /// Parses and validates; errors carry the offending line when it can be located.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        config.validate().map_err(|e| match e {
            Error::Config { line: None, message } => {
                let key = message.split(':').next().unwrap_or_default().trim().to_string();
                Error::Config {
                    line: line_of_key(text, &key),
                    message,
                }
            }
            other => other,
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Builds the population model for every size; fails on the first invalid one.
    pub fn models(&self) -> Result<Vec<PopulationModel>> {
        self.sizes
            .iter()
            .map(|s| {
                self.model.build(s.p).map_err(|e| Error::Config {
                    line: None,
                    message: format!("model: cannot build for p = {}: {e}", s.p),
                })
            })
            .collect()
    }

    /// Checks every parameter combination before anything is computed.
    ///
    /// Messages start with the offending key so the loader can locate it.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Error::Config {
            line: None,
            message: format!("{key}: {msg}"),
        };
        let needs_sizes = self.experiment != ExperimentKind::Mp;
        if needs_sizes && self.sizes.is_empty() {
            return Err(bad("sizes", "at least one (p, n) pair is required".into()));
        }
        if self.experiment == ExperimentKind::Mp && self.sizes.is_empty() && self.gamma.is_none() {
            return Err(bad("gamma", "mp needs gamma or sizes".into()));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(bad("gamma", format!("must be positive, got {g}")));
            }
        }
        for s in &self.sizes {
            if s.p == 0 || s.n < 2 {
                return Err(bad("sizes", format!("need p >= 1 and n >= 2, got p = {}, n = {}", s.p, s.n)));
            }
        }
        if self.replicates < 2 {
            return Err(bad("replicates", format!("need at least 2, got {}", self.replicates)));
        }
        if self.distributions.is_empty() {
            return Err(bad("distributions", "at least one distribution is required".into()));
        }
        if self.experiment == ExperimentKind::Qq && self.distributions.len() != 2 {
            return Err(bad(
                "distributions",
                format!("qq compares exactly two distributions, got {}", self.distributions.len()),
            ));
        }
        if self.experiment != ExperimentKind::Qq {
            let mut labels: Vec<String> = self.distributions.iter().map(|d| d.label()).collect();
            labels.sort();
            if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
                return Err(bad("distributions", format!("duplicate distribution {}", w[0])));
            }
        }
        if self.experiment == ExperimentKind::Diagnose && self.z_grid.is_empty() {
            return Err(bad("z_grid", "at least one point is required".into()));
        }
        if let Some(z) = self.z_grid.iter().find(|z| !(z.im > 0.0) || !z.re.is_finite() || !z.im.is_finite()) {
            return Err(bad("z_grid", format!("points must lie in the upper half-plane, got {} + {}i", z.re, z.im)));
        }
        if self.q_list.is_empty() || self.q_list.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
            return Err(bad("q_list", "levels must lie in (0, 1)".into()));
        }
        if self.q_list.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(bad("q_list", "levels must be strictly increasing".into()));
        }
        let t = &self.tolerances;
        if !(t.epsilon > 0.0 && t.epsilon.is_finite()) {
            return Err(bad("tolerances", format!("epsilon must be positive, got {}", t.epsilon)));
        }
        if !(t.solver_tol > 0.0) || !(t.damping > 0.0 && t.damping <= 1.0) || t.max_iter == 0 {
            return Err(bad("tolerances", "need solver_tol > 0, damping in (0, 1], max_iter >= 1".into()));
        }
        if t.grid_points < 2 {
            return Err(bad("tolerances", "grid_points must be at least 2".into()));
        }
        if self.experiment == ExperimentKind::Diagnose && !self.model.is_identity() {
            log::info!("diagnose: master-equation residuals are skipped for dependent models");
        }
        self.models()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QQ: &str = r#"
experiment = "qq"
seed = 7
replicates = 4
q_list = [0.25, 0.5, 0.75]

[model]
mode = "banded_toeplitz"
coeffs = [0.5, 0.25]

[[distributions]]
kind = "gaussian"

[[distributions]]
kind = "student_t"
dof = 3.0

[[sizes]]
p = 20
n = 40
"#;

    #[test]
    fn parses_full_config() {
        let c = ExperimentConfig::from_toml_str(QQ).unwrap();
        assert_eq!(c.experiment, ExperimentKind::Qq);
        assert_eq!(c.distributions[1], DistributionSpec::student_t(3.0).unwrap());
        assert_eq!(c.sizes, vec![Size { p: 20, n: 40 }]);
        assert_eq!(c.model, ModelSpec::BandedToeplitz { coeffs: vec![0.5, 0.25] });
        assert_eq!(c.tolerances, Tolerances::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::from_toml_str(QQ).unwrap();
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, back);
        for kind in ExperimentKind::ALL {
            let d = ExperimentConfig::default_for(kind);
            assert_eq!(ExperimentConfig::from_toml_str(&d.to_toml_string()).unwrap(), d);
        }
    }

    #[test]
    fn syntax_errors_carry_line() {
        let text = "experiment = \"qq\"\nseed = \"x\"\n";
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { line: Some(2), .. }) => {}
            other => panic!("{other:?}"),
        }
        let text = "experiment = \"qq\"\nbogus = 1\n";
        assert!(matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config { line: Some(2), .. })));
    }

    #[test]
    fn semantic_errors_carry_line() {
        let text = QQ.replace("replicates = 4", "replicates = 1");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::Config { line: Some(4), message }) => assert!(message.contains("replicates")),
            other => panic!("{other:?}"),
        }
        let text = QQ.replace("coeffs = [0.5, 0.25]", "coeffs = [0.9, 0.9]");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::Config { line: Some(line), message }) => {
                assert_eq!(line, 7, "{message}");
                assert!(message.contains("positive semidefinite"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_combinations() {
        let one_dist = QQ.replace("[[distributions]]\nkind = \"gaussian\"\n\n", "");
        assert!(ExperimentConfig::from_toml_str(&one_dist).is_err());
        let bad_q = QQ.replace("q_list = [0.25, 0.5, 0.75]", "q_list = [0.5, 1.0]");
        assert!(ExperimentConfig::from_toml_str(&bad_q).is_err());
        let bad_dof = QQ.replace("dof = 3.0", "dof = 2.0");
        assert!(ExperimentConfig::from_toml_str(&bad_dof).is_err());
        let no_sizes = "experiment = \"simulate\"\n";
        assert!(ExperimentConfig::from_toml_str(no_sizes).is_err());
        let mp = "experiment = \"mp\"\ngamma = 0.5\n";
        assert!(ExperimentConfig::from_toml_str(mp).is_ok());
    }
}
