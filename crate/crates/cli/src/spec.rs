//! Run specs: a JSON file, the `AAM_SEED` environment variable and
//! `key=value` overrides, applied in that order.

use std::fmt;
use std::path::{Path, PathBuf};

use aam_core::policy::Architecture;
use aam_core::train::PpoConfig;
use aam_core::EpisodeConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{CliError, Result};

/// Environment variable that replaces the run spec's `seed`.
pub const SEED_VAR: &str = "AAM_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicySelector {
    Encdec,
    EncdecMasked,
    Hetgat,
    Hetgcn,
    Random,
    Odla,
}

impl PolicySelector {
    pub const ALL: [PolicySelector; 6] = [
        PolicySelector::Encdec,
        PolicySelector::EncdecMasked,
        PolicySelector::Hetgat,
        PolicySelector::Hetgcn,
        PolicySelector::Random,
        PolicySelector::Odla,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicySelector::Encdec => "encdec",
            PolicySelector::EncdecMasked => "encdec-masked",
            PolicySelector::Hetgat => "hetgat",
            PolicySelector::Hetgcn => "hetgcn",
            PolicySelector::Random => "random",
            PolicySelector::Odla => "odla",
        }
    }

    /// Network and mask flag of a learned policy; `None` for the baselines.
    pub fn learned(self) -> Option<(Architecture, bool)> {
        match self {
            PolicySelector::Encdec => Some((Architecture::EncDec, false)),
            PolicySelector::EncdecMasked => Some((Architecture::EncDec, true)),
            PolicySelector::Hetgat => Some((Architecture::HetGat, false)),
            PolicySelector::Hetgcn => Some((Architecture::HetGcn, false)),
            PolicySelector::Random | PolicySelector::Odla => None,
        }
    }
}

impl fmt::Display for PolicySelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub env: EpisodeConfig,
    pub policy: PolicySelector,
    /// Evaluation episodes; episode `i` uses episode seed `seed + i`.
    pub episodes: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Policy checkpoint, relative to `out_dir` unless absolute.
    pub checkpoint: Option<PathBuf>,
    /// Active timesteps to train for.
    pub budget: u64,
    /// Write an intermediate checkpoint every this many active timesteps.
    pub checkpoint_every: u64,
    /// Evaluate learned policies with argmax instead of sampling.
    pub greedy: bool,
    /// Training hyperparameters. Absent fields take the per-architecture defaults.
    pub ppo: Option<PpoConfig>,
    /// Ticks between grid snapshots in traces.
    pub snapshot_every: u64,
}

impl Default for RunSpec {
    fn default() -> Self {
        let mut env = EpisodeConfig::one_shot([2, 2, 2], 5, 5);
        env.k_v = 1;
        Self {
            env,
            policy: PolicySelector::Encdec,
            episodes: 20,
            seed: 0,
            out_dir: PathBuf::from("out"),
            checkpoint: None,
            budget: 50_000,
            checkpoint_every: 10_000,
            greedy: false,
            ppo: None,
            snapshot_every: 10,
        }
    }
}

impl RunSpec {
    /// Layers `file` (if any), then `seed_var`, then `overrides` on the defaults.
    pub fn resolve(file: Option<&Path>, seed_var: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut value = serde_json::to_value(Self::default())?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Read(path.to_path_buf(), e))?;
            merge(&mut value, serde_json::from_str(&text)?);
        }
        if let Some(seed) = seed_var {
            let seed: u64 = seed
                .trim()
                .parse()
                .map_err(|_| CliError::Spec(format!("{SEED_VAR}={seed:?} is not an unsigned integer")))?;
            value["seed"] = seed.into();
        }
        for item in overrides {
            apply_override(&mut value, item)?;
        }
        if value["ppo"].is_object() {
            // partial hyperparameters fill in from the selected network's defaults
            let policy: PolicySelector = serde_json::from_value(value["policy"].clone()).map_err(|e| CliError::Spec(e.to_string()))?;
            let mut base = PpoConfig::default();
            if let Some((arch, _)) = policy.learned() {
                base.entropy_coef = arch.default_entropy_coef();
            }
            let mut base = serde_json::to_value(base)?;
            merge(&mut base, value["ppo"].take());
            value["ppo"] = base;
        }
        let spec: Self = serde_json::from_value(value).map_err(|e| CliError::Spec(e.to_string()))?;
        spec.env.validate()?;
        Ok(spec)
    }

    /// Like [`RunSpec::resolve`], reading the seed variable from the process environment.
    pub fn from_env(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let var = std::env::var(SEED_VAR).ok();
        Self::resolve(file, var.as_deref(), overrides)
    }

    pub fn resolve_path(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.out_dir.join(path)
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Recursively overlays `patch` on `base`; objects merge, anything else replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `a.b.c=value`, where the value is parsed as JSON and otherwise kept as a string.
fn apply_override(root: &mut Value, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Spec(format!("override {item:?} is not key=value")))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = root;
    for part in key.split('.') {
        if slot.is_null() {
            *slot = Value::Object(Default::default());
        }
        if !slot.is_object() {
            return Err(CliError::Spec(format!("override {key:?}: {part:?} is inside a non-object")));
        }
        slot = slot
            .as_object_mut()
            .expect("checked above")
            .entry(part.to_string())
            .or_insert(Value::Null);
    }
    *slot = parsed;
    Ok(())
}
