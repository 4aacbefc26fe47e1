//! Run configuration: one TOML file with a table per subcommand.
//!
//! Every table is optional and falls back to its defaults. The top-level
//! `seed` key, the `--seed` flag and `instance.seed` are merged into one
//! resolved seed, which is written back into the config embedded in every
//! report.

use std::path::{Path, PathBuf};

use qanneal::bandit::{BanditParams, Estimator, InnerSchedule};
use qanneal::config::InstanceConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub instance: InstanceConfig,
    pub sample: SampleConfig,
    pub spectrum: SpectrumConfig,
    pub amplify: AmplifyConfig,
    pub validate: ValidateConfig,
    pub bandit: BanditConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SampleConfig {
    pub strands: usize,
    pub steps: usize,
    /// Samples target `exp(−F/T)` at this temperature.
    pub temperature: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            strands: 4,
            steps: 200,
            temperature: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainKind {
    /// Every row uniform over all states.
    Uniform,
    /// Holds with probability ½, otherwise steps to a cycle neighbour.
    LazyCycle,
    /// Random symmetric weights, drawn from the run seed.
    Random,
    /// Transition matrix read from `path`.
    File,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantKind {
    Primal,
    Alternative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SpectrumConfig {
    pub chain: ChainKind,
    pub states: usize,
    pub path: Option<PathBuf>,
    pub variant: VariantKind,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            chain: ChainKind::Uniform,
            states: 2,
            path: None,
            variant: VariantKind::Primal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct AmplifyConfig {
    /// Dimension of the two-reflection demo.
    pub dim: usize,
    /// `|⟨t|s⟩|²` in the two-reflection demo.
    pub overlap: f64,
    /// Rounds; the least meeting `tolerance` when absent.
    pub rounds: Option<u32>,
    pub tolerance: f64,
    /// States of the lazy cycle used in the reflector demo.
    pub reflector_states: usize,
    pub delta: f64,
    pub eps: f64,
}

impl Default for AmplifyConfig {
    fn default() -> Self {
        Self {
            dim: 4,
            overlap: 0.3,
            rounds: None,
            tolerance: 1e-3,
            reflector_states: 4,
            delta: 0.125,
            eps: 1.0 / 64.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ValidateConfig {
    /// Dimension and accuracy that fix the annealing schedule.
    pub n: usize,
    pub epsilon: f64,
    /// Non-convexity `β` of the objective `|x|` on `[−1, 1]`.
    pub beta: f64,
    pub grid_points: usize,
    /// States of the lazy cycle and random chain in the spectral suite.
    pub chain_states: usize,
    /// Horizon accuracy and band of the effective-gap suite.
    pub gap_eps: f64,
    pub gap_band: f64,
    pub gap_constant: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            n: 4,
            epsilon: 0.01,
            beta: 0.0,
            grid_points: 4000,
            chain_states: 8,
            gap_eps: 1e-3,
            gap_band: 1.0,
            gap_constant: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorChoice {
    QuantumModel,
    Classical,
    Both,
}

impl EstimatorChoice {
    pub fn estimators(self) -> Vec<Estimator> {
        match self {
            EstimatorChoice::QuantumModel => vec![Estimator::QuantumModel],
            EstimatorChoice::Classical => vec![Estimator::Classical],
            EstimatorChoice::Both => vec![Estimator::QuantumModel, Estimator::Classical],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct BanditConfig {
    pub n: usize,
    pub radius: f64,
    pub sigma: f64,
    pub horizon: usize,
    pub seeds: u64,
    pub estimator: EstimatorChoice,
    pub queries_per_round: u64,
    pub accuracy_constant: f64,
    pub strands: usize,
    pub steps: usize,
}

impl Default for BanditConfig {
    fn default() -> Self {
        let params = BanditParams::default();
        Self {
            n: 2,
            radius: 2.0,
            sigma: 0.1,
            horizon: 1024,
            seeds: 1,
            estimator: EstimatorChoice::Both,
            queries_per_round: params.queries_per_round,
            accuracy_constant: params.accuracy_constant,
            strands: params.inner.strands,
            steps: params.inner.steps,
        }
    }
}

impl BanditConfig {
    pub fn params(&self) -> BanditParams {
        BanditParams {
            queries_per_round: self.queries_per_round,
            accuracy_constant: self.accuracy_constant,
            inner: InnerSchedule {
                strands: self.strands,
                steps: self.steps,
            },
            ..BanditParams::default()
        }
    }
}

impl RunConfig {
    /// Parses `text`. Relative paths resolve against `base`, and every
    /// referenced file must exist.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, CliError> {
        let mut config: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.instance.validate()?;
        if let (Some(base), Some(path)) = (base, config.spectrum.path.as_mut()) {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(path) = &config.spectrum.path {
            if !path.is_file() {
                return Err(CliError::Config(format!(
                    "chain file {} does not exist",
                    path.display()
                )));
            }
        }
        if config.spectrum.chain == ChainKind::File && config.spectrum.path.is_none() {
            return Err(CliError::Config(
                "`spectrum.chain = \"file\"` needs `spectrum.path`".into(),
            ));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    /// Merges the seed sources, with `flag` taking precedence.
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> Option<u64> {
        let seed = flag.or(self.seed).or(self.instance.seed);
        self.seed = seed;
        self.instance.seed = seed;
        seed
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config("this run is randomized and needs a seed (`seed` key or --seed)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(RunConfig::parse("", None).unwrap(), RunConfig::default());
    }

    #[test]
    fn flag_seed_wins_and_is_recorded() {
        let mut c = RunConfig::parse("seed = 3\n[instance]\nn = 3", None).unwrap();
        assert_eq!(c.resolve_seed(Some(9)), Some(9));
        assert_eq!(c.instance.seed, Some(9));
        assert_eq!(c.instance.n, 3);
    }

    #[test]
    fn missing_chain_file_is_rejected() {
        let text = "[spectrum]\nchain = \"file\"\npath = \"/nonexistent/chain.txt\"";
        assert!(matches!(RunConfig::parse(text, None), Err(CliError::Config(_))));
        assert!(RunConfig::parse("[spectrum]\nchain = \"file\"", None).is_err());
        assert!(RunConfig::parse("[bandit]\nhorizon = 8\ncolour = 1", None).is_err());
    }
}
