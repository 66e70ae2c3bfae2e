use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdamState, GaussianPolicy, NnError, RunningNorm, ValueNet};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume training or run a trained controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub policy: GaussianPolicy,
    pub value: ValueNet,
    pub policy_adam: AdamState,
    pub value_adam: AdamState,
    pub normalizer: Option<RunningNorm>,
    /// Environment steps consumed so far.
    pub step: u64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let text = serde_json::to_string(self).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let text = fs::read_to_string(path)?;
        let ck: Self = serde_json::from_str(&text).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        if ck.policy_adam.m.len() != ck.policy.num_params() || ck.value_adam.m.len() != ck.value.num_params() {
            return Err(NnError::Checkpoint("optimizer state does not match network".into()));
        }
        if let Some(n) = &ck.normalizer {
            if n.dim() != ck.policy.obs_dim() {
                return Err(NnError::Checkpoint("normalizer width does not match policy input".into()));
            }
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let policy = GaussianPolicy::with_hidden(3, 2, &[5, 4], &mut rng).unwrap();
        let value = ValueNet::new(3, &mut rng).unwrap();
        let mut norm = RunningNorm::new(3);
        norm.update(&[vec![0.1, 0.2, 0.3], vec![1.0 / 3.0, 2.0, -1.0]]).unwrap();
        let mut policy_adam = AdamState::new(policy.num_params());
        let mut p = policy.params();
        let g = vec![0.1; p.len()];
        policy_adam.step(&mut p, &g, 0.01).unwrap();
        let ck = Checkpoint {
            version: CHECKPOINT_VERSION,
            value_adam: AdamState::new(value.num_params()),
            policy,
            value,
            policy_adam,
            normalizer: Some(norm),
            step: 1234,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);

        let mut bad = ck.clone();
        bad.version = 99;
        bad.save(&path).unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }
}
