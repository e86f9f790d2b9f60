//! Run configuration: defaults, flat TOML config file, and `--set` flag
//! overrides, in that precedence order. The fully resolved configuration is
//! echoed into every report for reproducibility.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::CliError;
use dqgp::classifier::ClassifierConfig;
use dqgp::data::synth::{Condition, SynthSpec};
use dqgp::gp::FitConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Comma-separated condition labels.
    pub conditions: String,
    pub repetitions: usize,
    pub steps_min: usize,
    pub steps_max: usize,
    /// Endpoint position noise, meters.
    pub noise_pos: f64,
    /// Endpoint orientation noise, radians.
    pub noise_ang: f64,
    /// Condition-specific positional modulation amplitude, meters.
    pub wiggle_pos: f64,
    /// Condition-specific orientation modulation amplitude, radians.
    pub wiggle_ang: f64,
    pub nominal_rate: f64,
    /// Training trajectories per condition; the rest are held out.
    pub train_k: usize,
    /// Per-condition cap on regression training pairs (stride-subsampled).
    pub max_train_points: usize,
    pub velocity_limit: f64,
    pub fit_starts: usize,
    pub fit_max_iters: usize,
    pub abs_nominate: f64,
    pub abs_eliminate: f64,
    pub window_m: usize,
    /// Windowed nomination threshold as a fraction of `window_m`.
    pub win_nominate_factor: f64,
    /// Windowed elimination threshold as a fraction of `window_m`.
    pub win_eliminate_factor: f64,
    pub epsilon_floor: f64,
    pub workspace_bound: f64,
    /// Use true labels (from step 0) instead of classification outcomes
    /// when predicting.
    pub oracle_labels: bool,
    pub min_accuracy: f64,
    pub max_nomination_fraction: f64,
    pub max_overall_rmse: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            conditions: "b-r,b-d,b-l,b-u,t-r,t-l,a-r,a-u,r-d,r-l".into(),
            repetitions: 20,
            steps_min: 404,
            steps_max: 468,
            noise_pos: 0.01,
            noise_ang: 0.02,
            wiggle_pos: 0.012,
            wiggle_ang: 0.025,
            nominal_rate: 240.0,
            train_k: 15,
            max_train_points: 240,
            velocity_limit: 10.0,
            fit_starts: 8,
            fit_max_iters: 200,
            abs_nominate: 0.5,
            abs_eliminate: 0.02,
            window_m: 40,
            win_nominate_factor: 0.45,
            win_eliminate_factor: 0.04,
            epsilon_floor: 1e-8,
            workspace_bound: 10.0,
            oracle_labels: false,
            min_accuracy: 1.0,
            max_nomination_fraction: 0.70,
            max_overall_rmse: None,
        }
    }
}

impl RunConfig {
    /// Defaults, then the config file (if any), then `--set` overrides,
    /// then an explicit `--seed`.
    pub fn resolve(
        config_path: Option<&Path>,
        sets: &[String],
        seed: Option<u64>,
    ) -> Result<Self, CliError> {
        let mut config = match config_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => Self::default(),
        };
        for pair in sets {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set needs key=value, got {pair:?}")))?;
            config.apply(key.trim(), value.trim())?;
        }
        if let Some(seed) = seed {
            config.seed = seed;
        }
        Ok(config)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| CliError::Config(format!("{key}={value}: {e}")))
        }
        match key {
            "seed" => self.seed = parse(key, value)?,
            "conditions" => self.conditions = value.to_string(),
            "repetitions" => self.repetitions = parse(key, value)?,
            "steps_min" => self.steps_min = parse(key, value)?,
            "steps_max" => self.steps_max = parse(key, value)?,
            "noise_pos" => self.noise_pos = parse(key, value)?,
            "noise_ang" => self.noise_ang = parse(key, value)?,
            "wiggle_pos" => self.wiggle_pos = parse(key, value)?,
            "wiggle_ang" => self.wiggle_ang = parse(key, value)?,
            "nominal_rate" => self.nominal_rate = parse(key, value)?,
            "train_k" => self.train_k = parse(key, value)?,
            "max_train_points" => self.max_train_points = parse(key, value)?,
            "velocity_limit" => self.velocity_limit = parse(key, value)?,
            "fit_starts" => self.fit_starts = parse(key, value)?,
            "fit_max_iters" => self.fit_max_iters = parse(key, value)?,
            "abs_nominate" => self.abs_nominate = parse(key, value)?,
            "abs_eliminate" => self.abs_eliminate = parse(key, value)?,
            "window_m" => self.window_m = parse(key, value)?,
            "win_nominate_factor" => self.win_nominate_factor = parse(key, value)?,
            "win_eliminate_factor" => self.win_eliminate_factor = parse(key, value)?,
            "epsilon_floor" => self.epsilon_floor = parse(key, value)?,
            "workspace_bound" => self.workspace_bound = parse(key, value)?,
            "oracle_labels" => self.oracle_labels = parse(key, value)?,
            "min_accuracy" => self.min_accuracy = parse(key, value)?,
            "max_nomination_fraction" => self.max_nomination_fraction = parse(key, value)?,
            "max_overall_rmse" => {
                self.max_overall_rmse = if value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            other => return Err(CliError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn parse_conditions(&self) -> Result<Vec<Condition>, CliError> {
        self.conditions
            .split(',')
            .map(|item| Condition::parse(item.trim()).map_err(CliError::Data))
            .collect()
    }

    pub fn synth_spec(&self) -> Result<SynthSpec, CliError> {
        let spec = SynthSpec {
            conditions: self.parse_conditions()?,
            repetitions: self.repetitions,
            steps_min: self.steps_min,
            steps_max: self.steps_max,
            noise_pos: self.noise_pos,
            noise_ang: self.noise_ang,
            wiggle_pos: self.wiggle_pos,
            wiggle_ang: self.wiggle_ang,
            seed: self.seed,
            nominal_rate: self.nominal_rate,
        };
        spec.validate().map_err(CliError::Data)?;
        Ok(spec)
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            n_starts: self.fit_starts,
            max_iters: self.fit_max_iters,
            ..FitConfig::default()
        }
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            abs_nominate: self.abs_nominate,
            abs_eliminate: self.abs_eliminate,
            window_m: self.window_m,
            win_nominate: self.win_nominate_factor * self.window_m as f64,
            win_eliminate: self.win_eliminate_factor * self.window_m as f64,
            epsilon_floor: self.epsilon_floor,
            ..ClassifierConfig::default()
        }
    }
}
