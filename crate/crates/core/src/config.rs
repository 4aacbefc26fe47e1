//! Plain key-value instance descriptors.
//!
//! An instance is a flat TOML table. Recognized keys: `shape`, `radius`, `n`,
//! `objective`, `center`, `scale`, `epsilon`, `perturbation`, `amplitude`,
//! `frequency`, `sigma`, `noise`, `seed`, and the schedule overrides
//! `epochs`, `strands`, `steps`, `beta-cap`.

use serde::{Deserialize, Serialize};

use crate::annealing::{make_schedule, Schedule, ScheduleOverrides, DEFAULT_BETA_CAP};
use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::oracle::{ApproxConvexOracle, BaseFunction, NoiseFamily, Perturbation, StochasticOracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Ball,
    Box,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    Quadratic,
    Norm,
    MaxAffine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    None,
    Sinusoidal,
    SeededHash,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct InstanceConfig {
    pub shape: ShapeKind,
    /// Ball radius, or half-width of the box `[−radius, radius]^n`.
    pub radius: f64,
    pub n: usize,
    pub objective: ObjectiveKind,
    /// Minimizer of the convex part. Defaults to `(0.3, 0.2, 0.1, …)`.
    pub center: Option<Vec<f64>>,
    pub scale: f64,
    pub epsilon: f64,
    pub perturbation: PerturbationKind,
    /// Perturbation amplitude. Defaults to `ε/n`.
    pub amplitude: Option<f64>,
    pub frequency: f64,
    pub sigma: f64,
    pub noise: NoiseFamily,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub strands: Option<usize>,
    pub steps: Option<usize>,
    pub beta_cap: f64,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self {
            shape: ShapeKind::Ball,
            radius: 1.0,
            n: 2,
            objective: ObjectiveKind::Quadratic,
            center: None,
            scale: 1.0,
            epsilon: 0.1,
            perturbation: PerturbationKind::None,
            amplitude: None,
            frequency: 20.0,
            sigma: 0.0,
            noise: NoiseFamily::Gaussian,
            seed: None,
            epochs: None,
            strands: None,
            steps: None,
            beta_cap: DEFAULT_BETA_CAP,
        }
    }
}

impl InstanceConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("`n` must be at least 1".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::Config(format!("`radius` must be positive, got {}", self.radius)));
        }
        if let Some(c) = &self.center {
            if c.len() != self.n {
                return Err(Error::Config(format!(
                    "`center` has {} entries but n = {}",
                    c.len(),
                    self.n
                )));
            }
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Config(format!(
                "`sigma` must be nonnegative, got {}",
                self.sigma
            )));
        }
        if !(self.beta_cap > 0.0) {
            return Err(Error::Config(format!(
                "`beta-cap` must be positive, got {}",
                self.beta_cap
            )));
        }
        Ok(())
    }

    /// The seed, required by every randomized run.
    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config("a seed is required (config key `seed` or --seed)".into()))
    }

    pub fn center(&self) -> Vec<f64> {
        self.center
            .clone()
            .unwrap_or_else(|| (0..self.n).map(|i| [0.3, 0.2, 0.1][i % 3]).collect())
    }

    pub fn body(&self) -> Result<ConvexBody> {
        match self.shape {
            ShapeKind::Ball => ConvexBody::ball(vec![0.0; self.n], self.radius),
            ShapeKind::Box => ConvexBody::cube(vec![-self.radius; self.n], vec![self.radius; self.n]),
        }
    }

    pub fn base_function(&self) -> BaseFunction {
        let center = self.center();
        match self.objective {
            ObjectiveKind::Quadratic => BaseFunction::quadratic(center, self.scale),
            ObjectiveKind::Norm => BaseFunction::norm(center, self.scale),
            ObjectiveKind::MaxAffine => BaseFunction::linf_cone(center, self.scale),
        }
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude.unwrap_or(self.epsilon / self.n as f64)
    }

    pub fn perturbation(&self) -> Perturbation {
        match self.perturbation {
            PerturbationKind::None => Perturbation::None,
            PerturbationKind::Sinusoidal => Perturbation::Sinusoidal {
                amplitude: self.amplitude(),
                frequency: self.frequency,
                phase: 0.0,
            },
            PerturbationKind::SeededHash => Perturbation::SeededHash {
                amplitude: self.amplitude(),
                seed: self.seed.unwrap_or(0),
            },
        }
    }

    pub fn approx_oracle(&self) -> ApproxConvexOracle {
        ApproxConvexOracle::new(self.base_function(), self.perturbation())
    }

    pub fn stochastic_oracle(&self) -> Result<StochasticOracle> {
        StochasticOracle::new(self.base_function(), self.noise, self.sigma)
    }

    pub fn overrides(&self) -> ScheduleOverrides {
        ScheduleOverrides {
            epochs: self.epochs,
            strands: self.strands,
            steps: self.steps,
            ..ScheduleOverrides::default()
        }
    }

    pub fn schedule(&self) -> Result<Schedule> {
        make_schedule(self.n, self.epsilon, &self.overrides())
    }
}
