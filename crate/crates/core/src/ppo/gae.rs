use super::PpoError;

/// Generalized advantage estimates and value targets for one trajectory
/// segment. `dones[t]` cuts the bootstrap after step `t`; `bootstrap` is the
/// value of the state following the last step.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    tau: f64,
) -> Result<(Vec<f64>, Vec<f64>), PpoError> {
    let n = rewards.len();
    for (what, len) in [("values", values.len()), ("dones", dones.len())] {
        if len != n {
            return Err(PpoError::LengthMismatch { what, expected: n, got: len });
        }
    }
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let keep = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * keep - values[t];
        next_adv = delta + gamma * tau * keep * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}
