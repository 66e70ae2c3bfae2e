//! One JSON file configuring every command; missing sections take defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::ChainConfig;
use crate::env::EnvConfig;
use crate::eval::TrialConfig;
use crate::fdat::CostWeights;
use crate::ppo::PpoConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ChainConfig,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub trial: TrialConfig,
    pub fdat: CostWeights,
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.env.validate().map_err(|e| e.to_string())?;
        cfg.ppo.validate().map_err(|e| e.to_string())?;
        cfg.fdat.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}
