//! Experiment configuration, loaded from TOML and overridable by flags.

use std::path::{Path, PathBuf};

use crew_core::disruption::{Method, TimeoutPolicy};
use crew_core::domain::Day;
use crew_core::env::RewardVariant;
use crew_core::policy::RolloutMode;
use crew_core::ppo::TrainConfig;
use serde::{Deserialize, Deserializer, Serialize};

use crate::CliError;

/// Training settings that learn on the desk profile within a couple of
/// minutes. Library defaults are kept for everything not listed here.
pub fn desk_train_config() -> TrainConfig {
    TrainConfig {
        density: 1.0,
        total_episodes: 20_000,
        learning_rate: 1e-3,
        entropy_coef: 0.0,
        gamma: 0.9,
        gae_lambda: 0.9,
        ..TrainConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `desk` for the bundled profile, otherwise a profile file.
    pub profile: String,
    pub density: f64,
    pub weeks: u32,
    pub seed: u64,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub fraction_delayed: Vec<f64>,
    pub t_buffer: Day,
    pub t_move: Day,
    pub time_limit_secs: f64,
    /// Monte Carlo extraction rollouts; 0 selects blank-slate extraction.
    pub n: usize,
    pub extraction_mode: RolloutMode,
    pub on_timeout: TimeoutPolicy,
    pub jobs: usize,
    pub out: PathBuf,
    /// Trained policy; when absent and a method needs one, `train` runs first.
    pub weights: Option<PathBuf>,
    /// Keys given here override [`desk_train_config`] one by one. The seed
    /// used for training comes from the master seed's `training` stream.
    #[serde(deserialize_with = "train_overlay")]
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            profile: "desk".into(),
            density: 1.0,
            weeks: 1,
            seed: 0,
            trials: 100,
            methods: vec![Method::Baseline, Method::Buffer, Method::Nice, Method::Rl],
            fraction_delayed: vec![0.25, 0.5, 0.75, 1.0],
            t_buffer: 4,
            t_move: 2,
            time_limit_secs: 60.0,
            n: 2,
            extraction_mode: RolloutMode::Sample,
            on_timeout: TimeoutPolicy::UseIncumbent,
            jobs: 1,
            out: PathBuf::from("out"),
            weights: None,
            train: desk_train_config(),
        }
    }
}

pub(crate) fn train_overlay<'de, D: Deserializer<'de>>(d: D) -> Result<TrainConfig, D::Error> {
    use serde::de::Error;
    let patch = serde_json::Map::<String, serde_json::Value>::deserialize(d)?;
    let mut base = match serde_json::to_value(desk_train_config()) {
        Ok(serde_json::Value::Object(m)) => m,
        _ => unreachable!("TrainConfig serializes to a map"),
    };
    for (k, v) in patch {
        if !base.contains_key(&k) {
            return Err(D::Error::custom(format!("unknown train key `{k}`")));
        }
        base.insert(k, v);
    }
    serde_json::from_value(serde_json::Value::Object(base)).map_err(D::Error::custom)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, path)
    }

    pub fn time_limit(&self) -> std::time::Duration {
        std::time::Duration::from_secs_f64(self.time_limit_secs)
    }

    pub fn needs_weights(&self) -> bool {
        self.methods.iter().any(|m| m.needs_weights())
    }

    /// Reward the policy behind NICE and RL is trained on.
    pub fn reward(&self) -> RewardVariant {
        self.train.reward
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Usage(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if self.fraction_delayed.is_empty() {
            return bad("no fraction_delayed values".into());
        }
        if let Some(f) = self.fraction_delayed.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return bad(format!("fraction_delayed {f} outside (0, 1]"));
        }
        if !(self.density.is_finite() && self.density > 0.0) {
            return bad(format!("density {} must be positive", self.density));
        }
        if self.weeks == 0 {
            return bad("weeks must be at least 1".into());
        }
        if !(self.time_limit_secs.is_finite() && self.time_limit_secs > 0.0) {
            return bad(format!("time_limit_secs {} must be positive", self.time_limit_secs));
        }
        if self.t_buffer < 0 || self.t_move < 0 {
            return bad("t_buffer and t_move must be non-negative".into());
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        if self.profile != "desk" && !Path::new(&self.profile).exists() {
            return Err(CliError::Input(format!("profile file {} does not exist", self.profile)));
        }
        if let Some(w) = self.weights.as_ref().filter(|w| !w.exists()) {
            return Err(CliError::Input(format!("weights file {} does not exist", w.display())));
        }
        Ok(())
    }
}
