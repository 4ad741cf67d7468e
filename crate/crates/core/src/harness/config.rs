//! Declarative run configuration (TOML) with line-anchored error messages.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionKind;
use crate::bounds::Bounds;
use crate::error::{Error, Result};
use crate::gp::FitConfig;
use crate::inputs::{DependentGroup, DesignKind, InputModel, Marginal};
use crate::optimize::OptimConfig;
use crate::support::{GateMode, GaussianMixture, SupportFit};
use crate::testbed::{BenchmarkOptions, BENCHMARK_IDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: usize,
    /// Optional wall-clock cap per replicate; the loop stops early and keeps
    /// what it has persisted.
    #[serde(default)]
    pub max_wall_secs: Option<f64>,
    pub benchmark: BenchmarkSection,
    #[serde(default)]
    pub inputs: Option<InputsSection>,
    #[serde(default)]
    pub design: DesignSection,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub penalty: Option<PenaltySection>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub optimizer: OptimConfig,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub bench: Option<BenchSection>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSection {
    /// A registered id, or `external` together with `command`.
    pub id: String,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub path_seed: u64,
    #[serde(default)]
    pub command: Option<Vec<String>>,
    #[serde(default)]
    pub timeout_secs: Option<f64>,
    /// Working directory of the command; the config file's directory when
    /// loaded from a file.
    #[serde(default)]
    pub working_dir: Option<PathBuf>,
}

impl BenchmarkSection {
    pub fn options(&self) -> BenchmarkOptions {
        BenchmarkOptions {
            dim: self.dim,
            a: self.a.clone(),
            b: self.b,
            path_seed: self.path_seed,
        }
    }

    pub fn is_external(&self) -> bool {
        self.id == "external"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputsSection {
    pub marginals: Vec<Marginal>,
    #[serde(default)]
    pub group: Option<GroupSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl InputsSection {
    pub fn build(&self) -> Result<InputModel> {
        let model = InputModel::independent(self.marginals.clone())?;
        let Some(g) = &self.group else { return Ok(model) };
        let k = g.indices.len();
        let covs = g
            .covariances
            .iter()
            .map(|rows| {
                if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                    return Err(Error::Shape(format!("group covariances must be {k}×{k}")));
                }
                Ok(DMatrix::from_fn(k, k, |i, j| rows[i][j]))
            })
            .collect::<Result<Vec<_>>>()?;
        let mixture = GaussianMixture::new(
            g.weights.clone(),
            g.means.iter().map(|m| DVector::from_vec(m.clone())).collect(),
            covs,
        )?;
        model.with_group(DependentGroup {
            indices: g.indices.clone(),
            mixture,
            bounds: Bounds::new(g.lower.clone(), g.upper.clone())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    /// `None` means `5 d`.
    #[serde(default)]
    pub initial_count: Option<usize>,
    /// Enrichment points; `None` means `10 d`.
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub kind: DesignKind,
    /// Scramble the sequence with the replicate seed.
    #[serde(default = "yes")]
    pub scrambled: bool,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self {
            initial_count: None,
            budget: None,
            kind: DesignKind::SobolSequence,
            scrambled: true,
        }
    }
}

/// How enrichment points are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Acquisition(AcquisitionKind),
    /// Next points of the initial-design sequence, no surrogate involved.
    RandomSobol,
}

impl Strategy {
    pub fn parse(name: &str) -> Option<Self> {
        if ["random_sobol", "randomsobol", "sobol"].contains(&name.to_ascii_lowercase().as_str()) {
            return Some(Strategy::RandomSobol);
        }
        AcquisitionKind::parse(name).map(Strategy::Acquisition)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Acquisition(k) => k.name(),
            Strategy::RandomSobol => "random_sobol",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    #[serde(default = "default_strategy")]
    pub kind: String,
    #[serde(default = "default_fantasies")]
    pub fantasy_count: usize,
    #[serde(default)]
    pub site_count: Option<usize>,
    #[serde(default)]
    pub chunk_count: Option<usize>,
    #[serde(default = "yes")]
    pub balanced: bool,
    #[serde(default)]
    pub memory_cap: Option<usize>,
    /// Redraw the gradient sites at every iteration.
    #[serde(default = "yes")]
    pub resample_sites: bool,
}

fn default_strategy() -> String {
    "GlobalGradVarRed".into()
}

fn default_fantasies() -> usize {
    8
}

impl Default for StrategySection {
    fn default() -> Self {
        Self {
            kind: default_strategy(),
            fantasy_count: default_fantasies(),
            site_count: None,
            chunk_count: None,
            balanced: true,
            memory_cap: None,
            resample_sites: true,
        }
    }
}

impl StrategySection {
    pub fn strategy(&self) -> Result<Strategy> {
        Strategy::parse(&self.kind).ok_or_else(|| {
            let known: Vec<&str> = AcquisitionKind::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!(
                "unknown strategy {:?}; expected random_sobol or one of {}",
                self.kind,
                known.join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySection {
    /// Input coordinates forming the dependent group.
    pub group: Vec<usize>,
    /// Samples of the group coordinates; drawn from the input model when absent.
    #[serde(default)]
    pub samples_csv: Option<PathBuf>,
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    #[serde(default)]
    pub components: Option<usize>,
    #[serde(default = "default_quantile")]
    pub radius_quantile: f64,
    #[serde(default = "default_sharpness")]
    pub sharpness: f64,
    #[serde(default)]
    pub dilation: f64,
    #[serde(default)]
    pub mode: GateMode,
}

fn default_sample_count() -> usize {
    2000
}

fn default_quantile() -> f64 {
    0.99
}

fn default_sharpness() -> f64 {
    10.0
}

impl PenaltySection {
    pub fn fit_settings(&self) -> SupportFit {
        SupportFit {
            components: self.components,
            radius_quantile: self.radius_quantile,
            sharpness: self.sharpness,
            dilation: self.dilation,
            mode: self.mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default = "default_dgsm_mc")]
    pub dgsm_mc: usize,
    #[serde(default = "default_sobol_mc")]
    pub sobol_mc: usize,
    #[serde(default = "default_test_size")]
    pub test_size: usize,
    #[serde(default = "default_reference_mc")]
    pub reference_mc: usize,
}

fn default_dgsm_mc() -> usize {
    8192
}

fn default_sobol_mc() -> usize {
    4096
}

fn default_test_size() -> usize {
    1024
}

fn default_reference_mc() -> usize {
    1 << 18
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            dgsm_mc: default_dgsm_mc(),
            sobol_mc: default_sobol_mc(),
            test_size: default_test_size(),
            reference_mc: default_reference_mc(),
        }
    }
}

/// Matrix for the `bench` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub benchmarks: Vec<String>,
    pub strategies: Vec<String>,
}

/// A semantic problem located at `section.key`.
struct Issue {
    section: &'static str,
    key: &'static str,
    message: String,
}

fn issue(section: &'static str, key: &'static str, message: impl Into<String>) -> Issue {
    Issue {
        section,
        key,
        message: message.into(),
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
            Error::Config(format!("{origin}:{line}: {}", e.message().trim()))
        })?;
        if let Err(i) = cfg.check() {
            let line = locate(text, i.section, i.key).unwrap_or(1);
            return Err(Error::Config(format!("{origin}:{line}: {}", i.message)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}:1: cannot read config: {e}", path.display())))?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        // relative paths are taken relative to the config file
        let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if let Some(csv) = cfg.penalty.as_mut().and_then(|p| p.samples_csv.as_mut()) {
            if csv.is_relative() {
                *csv = dir.join(&*csv);
            }
        }
        if cfg.benchmark.is_external() {
            let wd = cfg.benchmark.working_dir.take().unwrap_or_default();
            cfg.benchmark.working_dir = Some(if wd.is_absolute() { wd } else { dir.join(wd) });
        }
        Ok(cfg)
    }

    /// Validation that does not need to build the experiment.
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|i| Error::Config(format!("[{}] {}: {}", i.section, i.key, i.message)))
    }

    fn check(&self) -> std::result::Result<(), Issue> {
        let b = &self.benchmark;
        if b.is_external() {
            match &b.command {
                Some(c) if !c.is_empty() => {}
                _ => return Err(issue("benchmark", "id", "an external benchmark needs a nonempty command")),
            }
            if self.inputs.is_none() {
                return Err(issue("benchmark", "id", "an external benchmark needs an [inputs] section"));
            }
            if matches!(b.timeout_secs, Some(t) if !(t > 0.0)) {
                return Err(issue("benchmark", "timeout_secs", "timeout_secs must be positive"));
            }
        } else if !BENCHMARK_IDS.contains(&b.id.as_str()) {
            return Err(issue(
                "benchmark",
                "id",
                format!("unknown benchmark {:?}; known ids are {}, external", b.id, BENCHMARK_IDS.join(", ")),
            ));
        }
        if self.replicates == 0 {
            return Err(issue("", "replicates", "replicates must be at least 1"));
        }
        if matches!(self.design.initial_count, Some(n) if n < 2) {
            return Err(issue("design", "initial_count", "initial_count must be at least 2"));
        }
        if let Err(e) = self.strategy.strategy() {
            return Err(issue("strategy", "kind", e.to_string()));
        }
        if self.strategy.fantasy_count == 0 {
            return Err(issue("strategy", "fantasy_count", "fantasy_count must be at least 1"));
        }
        if matches!(self.strategy.site_count, Some(0)) {
            return Err(issue("strategy", "site_count", "site_count must be positive"));
        }
        if matches!(self.strategy.chunk_count, Some(0)) {
            return Err(issue("strategy", "chunk_count", "chunk_count must be positive"));
        }
        if self.strategy.strategy().ok() == Some(Strategy::Acquisition(AcquisitionKind::GlobalGradVarRedKmeans))
            && self.strategy.chunk_count.is_none()
        {
            return Err(issue("strategy", "kind", "GlobalGradVarRedKmeans needs chunk_count"));
        }
        if let Some(p) = &self.penalty {
            if p.group.is_empty() {
                return Err(issue("penalty", "group", "penalty group is empty"));
            }
            if !(p.radius_quantile > 0.0 && p.radius_quantile < 1.0) {
                return Err(issue("penalty", "radius_quantile", "radius_quantile must lie in (0, 1)"));
            }
            if !(p.sharpness > 0.0) {
                return Err(issue("penalty", "sharpness", "sharpness must be positive"));
            }
            if !(p.dilation >= 0.0) {
                return Err(issue("penalty", "dilation", "dilation must be nonnegative"));
            }
        }
        let m = &self.metrics;
        for (key, v) in [("dgsm_mc", m.dgsm_mc), ("sobol_mc", m.sobol_mc), ("test_size", m.test_size), ("reference_mc", m.reference_mc)] {
            if v < 2 {
                return Err(issue("metrics", key, format!("{key} must be at least 2")));
            }
        }
        if let Some(bench) = &self.bench {
            for id in &bench.benchmarks {
                if !BENCHMARK_IDS.contains(&id.as_str()) {
                    return Err(issue("bench", "benchmarks", format!("unknown benchmark {id:?}")));
                }
            }
            for s in &bench.strategies {
                if Strategy::parse(s).is_none() {
                    return Err(issue("bench", "strategies", format!("unknown strategy {s:?}")));
                }
            }
        }
        if matches!(self.max_wall_secs, Some(t) if !(t > 0.0)) {
            return Err(issue("", "max_wall_secs", "max_wall_secs must be positive"));
        }
        Ok(())
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]` (the root table when `section` is empty).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header_line = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section {
                header_line = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    header_line
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
seed = 3
replicates = 2

[benchmark]
id = "ishigami"

[design]
initial_count = 15
budget = 4

[strategy]
kind = "GradMaxVar"
"#;

    #[test]
    fn parses_minimal_config() {
        let c = RunConfig::parse(GOOD, "cfg.toml").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.design.budget, Some(4));
        assert_eq!(c.strategy.strategy().unwrap(), Strategy::Acquisition(AcquisitionKind::GradMaxVar));
        assert_eq!(c.metrics, MetricsSection::default());
    }

    #[test]
    fn syntax_errors_carry_line() {
        let bad = GOOD.replace("budget = 4", "budget = \"four\"");
        let e = RunConfig::parse(&bad, "cfg.toml").unwrap_err().to_string();
        assert!(e.contains("cfg.toml:10:"), "{e}");
        let bad = GOOD.replace("budget = 4", "budgett = 4");
        let e = RunConfig::parse(&bad, "cfg.toml").unwrap_err().to_string();
        assert!(e.contains("cfg.toml:10:"), "{e}");
    }

    #[test]
    fn semantic_errors_carry_line() {
        let bad = GOOD.replace("\"ishigami\"", "\"nope\"");
        let e = RunConfig::parse(&bad, "c").unwrap_err().to_string();
        assert!(e.contains("c:6:") && e.contains("unknown benchmark"), "{e}");
        let bad = GOOD.replace("\"GradMaxVar\"", "\"Best\"");
        let e = RunConfig::parse(&bad, "c").unwrap_err().to_string();
        assert!(e.contains("c:13:"), "{e}");
        let bad = GOOD.replace("replicates = 2", "replicates = 0");
        let e = RunConfig::parse(&bad, "c").unwrap_err().to_string();
        assert!(e.contains("c:3:"), "{e}");
    }

    #[test]
    fn snapshot_round_trip() {
        let c = RunConfig::parse(GOOD, "c").unwrap();
        let json = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn strategies() {
        assert_eq!(Strategy::parse("random_sobol"), Some(Strategy::RandomSobol));
        assert_eq!(Strategy::parse("globalgradvarred"), Some(Strategy::Acquisition(AcquisitionKind::GlobalGradVarRed)));
        assert_eq!(Strategy::parse("x"), None);
    }
}
