//! Experiment configuration, read from TOML.
//!
//! ```toml
//! version = 1
//! seed = 42
//! replicates = 200
//! phi = "const-one"            # const-one | identity | centered-identity
//!
//! [estimators]
//! measure = "predictive"       # predictive | updated
//! decomposition = true         # per-step terms v_{p,n}; keeps full genealogies
//!
//! [model]
//! kind = "lgssm"               # lgssm | lgssm-adapted | sv | tempered
//! observations = { simulate = { length = 100, seed = 11 } }
//!
//! [fixed]                      # or [adaptive] or [two_stage], exactly one
//! sizes = [128, 256, 512]
//! ```
//!
//! Unknown keys are rejected everywhere.

use crate::models::AnyModel;
use anyhow::{bail, Context, Result};
use pfvar::model::{
    make_fully_adapted, make_lgssm, make_sv, make_tempered_sampler, Gaussian1d, GaussianMixture, LgssmParams,
    MixtureComponent, SvParams, TemperedSamplerParams,
};
use pfvar::rng::seeded;
use pfvar::tuning::AllocationRule;
use pfvar::Measure;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub phi: PhiChoice,
    #[serde(default)]
    pub estimators: Estimators,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<FixedMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive: Option<AdaptiveMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_stage: Option<TwoStageMode>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiChoice {
    #[default]
    ConstOne,
    Identity,
    /// `Id - η_n^N(Id)`, or `Id - η̂_n^N(Id)` for the updated measure, centred per run.
    CenteredIdentity,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Estimators {
    #[serde(default)]
    pub measure: Measure,
    #[serde(default)]
    pub decomposition: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedMode {
    /// Base particle numbers `N`, one experiment each.
    pub sizes: Vec<usize>,
    /// Allocation weights `c_0..c_n`; constant when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveMode {
    pub initial_size: usize,
    pub thresholds: Vec<f64>,
    #[serde(default = "max_doublings")]
    pub max_doublings: usize,
}

fn max_doublings() -> usize {
    30
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoStageMode {
    pub base_sizes: Vec<usize>,
    #[serde(default)]
    pub rule: AllocationRule,
    /// Overrides `g(N) = 2 / log₂ N`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    /// Also run constant-`N` replicates for comparison.
    #[serde(default = "yes")]
    pub compare_constant: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Lgssm(LgssmConfig),
    /// The fully adapted transform of the LGSSM.
    LgssmAdapted(LgssmConfig),
    Sv(SvConfig),
    Tempered(TemperedConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LgssmConfig {
    #[serde(default = "lgssm_a")]
    pub transition_coefficient: f64,
    #[serde(default = "unit")]
    pub transition_variance: f64,
    #[serde(default = "unit")]
    pub observation_variance: f64,
    #[serde(default)]
    pub initial_mean: f64,
    #[serde(default = "unit")]
    pub initial_variance: f64,
    pub observations: Observations,
}

fn lgssm_a() -> f64 {
    0.9
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvConfig {
    #[serde(default = "sv_rho")]
    pub persistence: f64,
    #[serde(default = "sv_sigma")]
    pub volatility: f64,
    #[serde(default = "sv_beta")]
    pub scale: f64,
    pub observations: Observations,
}

fn sv_rho() -> f64 {
    0.95
}

fn sv_sigma() -> f64 {
    0.25
}

fn sv_beta() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperedConfig {
    /// Metropolis iterations `k` per kernel application.
    #[serde(default = "ten")]
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Gaussian1d>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<MixtureComponent>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_sds: Option<Vec<f64>>,
}

fn ten() -> usize {
    10
}

/// Exactly one source.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    /// One observation per row, first column; a non-numeric first row is a header.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<Simulate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulate {
    pub length: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// One hundred zeros except `y_49 = 8`.
    Outlier,
}

/// The experiment a config describes.
#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    Fixed(FixedMode),
    Adaptive(AdaptiveMode),
    TwoStage(TwoStageMode),
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).context("invalid configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn mode(&self) -> Mode {
        match (&self.fixed, &self.adaptive, &self.two_stage) {
            (Some(f), None, None) => Mode::Fixed(f.clone()),
            (None, Some(a), None) => Mode::Adaptive(a.clone()),
            (None, None, Some(t)) => Mode::TwoStage(t.clone()),
            _ => unreachable!("validated"),
        }
    }

    /// Checks everything that does not need the model built, reporting all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.version != CONFIG_VERSION {
            problems.push(format!("version: expected {CONFIG_VERSION}, got {}", self.version));
        }
        if self.replicates < 1 {
            problems.push("replicates: must be at least 1".to_string());
        }
        let modes = [self.fixed.is_some(), self.adaptive.is_some(), self.two_stage.is_some()];
        if modes.iter().filter(|m| **m).count() != 1 {
            problems.push("fixed/adaptive/two_stage: exactly one mode table is required".to_string());
        }
        if let Some(f) = &self.fixed {
            check_sizes("fixed.sizes", &f.sizes, &mut problems);
            if let Some(w) = &f.weights {
                if w.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                    problems.push("fixed.weights: must be positive and finite".to_string());
                }
            }
        }
        if let Some(a) = &self.adaptive {
            if a.initial_size < 2 {
                problems.push("adaptive.initial_size: must be at least 2".to_string());
            }
            if a.thresholds.is_empty() || a.thresholds.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
                problems.push("adaptive.thresholds: need at least one positive, finite threshold".to_string());
            }
        }
        if let Some(t) = &self.two_stage {
            check_sizes("two_stage.base_sizes", &t.base_sizes, &mut problems);
            if t.floor.is_some_and(|g| !(g.is_finite() && g > 0.0)) {
                problems.push("two_stage.floor: must be positive and finite".to_string());
            }
        }
        if self.phi == PhiChoice::CenteredIdentity && (self.adaptive.is_some() || self.two_stage.is_some()) {
            problems.push("phi: centered-identity is only available in fixed mode".to_string());
        }
        match &self.model {
            ModelConfig::Lgssm(c) | ModelConfig::LgssmAdapted(c) => {
                c.observations.check("model.observations", &mut problems)
            }
            ModelConfig::Sv(c) => c.observations.check("model.observations", &mut problems),
            ModelConfig::Tempered(c) => {
                if c.ladder.is_some() != c.proposal_sds.is_some() {
                    problems.push("model.ladder, model.proposal_sds: give both or neither".to_string());
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            bail!("invalid configuration:\n  {}", problems.join("\n  "))
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn check_sizes(field: &str, sizes: &[usize], problems: &mut Vec<String>) {
    if sizes.is_empty() {
        problems.push(format!("{field}: at least one size is required"));
    }
    if sizes.iter().any(|&n| n < 2) {
        problems.push(format!("{field}: every size must be at least 2"));
    }
}

impl Observations {
    fn check(&self, field: &str, problems: &mut Vec<String>) {
        let given = [self.values.is_some(), self.csv.is_some(), self.simulate.is_some(), self.preset.is_some()];
        if given.iter().filter(|g| **g).count() != 1 {
            problems.push(format!("{field}: exactly one of values, csv, simulate, preset is required"));
        }
        if self.simulate.is_some_and(|s| s.length == 0) {
            problems.push(format!("{field}.simulate.length: must be at least 1"));
        }
    }

    fn resolve(&self, base_dir: &Path, simulate: impl FnOnce(Simulate) -> Vec<f64>) -> Result<Vec<f64>> {
        if let Some(v) = &self.values {
            return Ok(v.clone());
        }
        if let Some(path) = &self.csv {
            return read_observations(&base_dir.join(path));
        }
        if let Some(s) = self.simulate {
            return Ok(simulate(s));
        }
        match self.preset {
            Some(Preset::Outlier) => Ok(LgssmParams::outlier_observations()),
            None => bail!("no observation source"),
        }
    }
}

fn read_observations(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("cannot read observations from {}", path.display()))?;
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let field = record.get(0).unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(y) => out.push(y),
            Err(_) if row == 0 => continue,
            Err(_) => bail!("{}: row {} is not a number: {field:?}", path.display(), row + 1),
        }
    }
    Ok(out)
}

impl LgssmConfig {
    pub fn params(&self, base_dir: &Path) -> Result<LgssmParams> {
        let mut params = LgssmParams {
            transition_coefficient: self.transition_coefficient,
            transition_variance: self.transition_variance,
            observation_variance: self.observation_variance,
            initial_mean: self.initial_mean,
            initial_variance: self.initial_variance,
            observations: vec![],
        };
        let base = params.clone();
        params.observations =
            self.observations.resolve(base_dir, |s| base.simulate_observations(s.length, &mut seeded(s.seed)))?;
        Ok(params)
    }
}

impl SvConfig {
    pub fn params(&self, base_dir: &Path) -> Result<SvParams> {
        let mut params = SvParams {
            persistence: self.persistence,
            volatility: self.volatility,
            scale: self.scale,
            observations: vec![],
        };
        let base = params.clone();
        params.observations =
            self.observations.resolve(base_dir, |s| base.simulate_observations(s.length, &mut seeded(s.seed)))?;
        Ok(params)
    }
}

impl TemperedConfig {
    pub fn params(&self) -> TemperedSamplerParams {
        let mut p = TemperedSamplerParams::bimodal(self.iterations);
        if let Some(initial) = self.initial {
            p.initial = initial;
        }
        if let Some(components) = &self.target {
            p.target = Arc::new(GaussianMixture { components: components.clone() });
        }
        if let (Some(ladder), Some(sds)) = (&self.ladder, &self.proposal_sds) {
            p.ladder = ladder.clone();
            p.proposal_sds = sds.clone();
        }
        p
    }
}

impl ModelConfig {
    /// Builds the model; relative observation paths are resolved against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<AnyModel> {
        let model = match self {
            ModelConfig::Lgssm(c) => AnyModel::Lgssm(make_lgssm(c.params(base_dir)?)?),
            ModelConfig::LgssmAdapted(c) => AnyModel::Adapted(make_fully_adapted(make_lgssm(c.params(base_dir)?)?)),
            ModelConfig::Sv(c) => AnyModel::Sv(make_sv(c.params(base_dir)?)?),
            ModelConfig::Tempered(c) => {
                if let Some(components) = &c.target {
                    GaussianMixture { components: components.clone() }.validate()?;
                }
                AnyModel::Tempered(make_tempered_sampler(c.params())?)
            }
        };
        Ok(model)
    }

    /// The same model with observations written out inline.
    pub fn with_inline_observations(&self, base_dir: &Path) -> Result<Self> {
        let inline = |values: Vec<f64>| Observations { values: Some(values), ..Default::default() };
        Ok(match self {
            ModelConfig::Lgssm(c) => {
                ModelConfig::Lgssm(LgssmConfig { observations: inline(c.params(base_dir)?.observations), ..c.clone() })
            }
            ModelConfig::LgssmAdapted(c) => ModelConfig::LgssmAdapted(LgssmConfig {
                observations: inline(c.params(base_dir)?.observations),
                ..c.clone()
            }),
            ModelConfig::Sv(c) => {
                ModelConfig::Sv(SvConfig { observations: inline(c.params(base_dir)?.observations), ..c.clone() })
            }
            ModelConfig::Tempered(c) => ModelConfig::Tempered(c.clone()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pfvar::FeynmanKac;

    const MINIMAL: &str = r#"
version = 1
[model]
kind = "lgssm"
observations = { values = [0.1, -0.2, 0.3] }
[fixed]
sizes = [10]
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.replicates, 1);
        assert_eq!(c.phi, PhiChoice::ConstOne);
        assert_eq!(c.output.format, Format::Csv);
        match &c.model {
            ModelConfig::Lgssm(m) => assert_eq!(m.transition_coefficient, 0.9),
            other => panic!("{other:?}"),
        }
        assert_eq!(c.model.build(Path::new(".")).unwrap().horizon(), 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        for bad in [
            MINIMAL.replace("version = 1", "version = 1\nrepliactes = 3"),
            MINIMAL.replace("kind = \"lgssm\"", "kind = \"lgssm\"\ntransition_coeff = 0.5"),
            MINIMAL.replace("sizes = [10]", "sizes = [10]\nweight = [1.0]"),
            MINIMAL.replace("values = [0.1, -0.2, 0.3]", "value = [0.1]"),
        ] {
            assert!(ExperimentConfig::parse(&bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn validation_lists_every_problem() {
        let text = MINIMAL.replace("version = 1", "version = 2\nreplicates = 0").replace("sizes = [10]", "sizes = [1]");
        let msg = format!("{:#}", ExperimentConfig::parse(&text).unwrap_err());
        assert!(msg.contains("version") && msg.contains("replicates") && msg.contains("fixed.sizes"), "{msg}");
    }

    #[test]
    fn exactly_one_mode() {
        let both = format!("{MINIMAL}\n[adaptive]\ninitial_size = 8\nthresholds = [0.1]\n");
        assert!(ExperimentConfig::parse(&both).is_err());
        let none = MINIMAL.replace("[fixed]\nsizes = [10]\n", "");
        assert!(ExperimentConfig::parse(&none).is_err());
    }

    #[test]
    fn exactly_one_observation_source() {
        let two = MINIMAL.replace("{ values = [0.1, -0.2, 0.3] }", "{ values = [0.1], preset = \"outlier\" }");
        assert!(ExperimentConfig::parse(&two).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(ExperimentConfig::parse(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn outlier_preset_and_simulation() {
        let text = MINIMAL.replace("{ values = [0.1, -0.2, 0.3] }", "{ preset = \"outlier\" }");
        let c = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(c.model.build(Path::new(".")).unwrap().horizon(), 99);
        let text = MINIMAL.replace("{ values = [0.1, -0.2, 0.3] }", "{ simulate = { length = 7, seed = 3 } }");
        let c = ExperimentConfig::parse(&text).unwrap();
        let a = c.model.with_inline_observations(Path::new(".")).unwrap();
        let b = c.model.with_inline_observations(Path::new(".")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.build(Path::new(".")).unwrap().horizon(), 6);
    }

    #[test]
    fn tempered_defaults_to_the_bimodal_sampler() {
        let text = "version = 1\n[model]\nkind = \"tempered\"\niterations = 1\n[fixed]\nsizes = [10]\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.model.build(Path::new(".")).unwrap().horizon(), 11);
    }

    #[test]
    fn shipped_configs_are_valid() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut count = 0;
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "toml") {
                let c = ExperimentConfig::load(&path).unwrap();
                c.model.build(&dir).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
                count += 1;
            }
        }
        assert!(count > 0);
    }
}
