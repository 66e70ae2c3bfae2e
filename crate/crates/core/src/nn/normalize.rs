use serde::{Deserialize, Serialize};

use super::NnError;

const CLIP: f64 = 10.0;

/// Running per-feature mean and variance (parallel-merge update).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: f64,
}

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            count: 1e-4,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&mut self, batch: &[Vec<f64>]) -> Result<(), NnError> {
        if batch.is_empty() {
            return Ok(());
        }
        let d = self.dim();
        if let Some(bad) = batch.iter().find(|x| x.len() != d) {
            return Err(NnError::DimensionMismatch {
                what: "normalizer sample",
                expected: d,
                got: bad.len(),
            });
        }
        let n = batch.len() as f64;
        let total = self.count + n;
        for j in 0..d {
            let bm = batch.iter().map(|x| x[j]).sum::<f64>() / n;
            let bv = batch.iter().map(|x| (x[j] - bm).powi(2)).sum::<f64>() / n;
            let delta = bm - self.mean[j];
            let m2 = self.var[j] * self.count + bv * n + delta * delta * self.count * n / total;
            self.mean[j] += delta * n / total;
            self.var[j] = m2 / total;
        }
        self.count = total;
        Ok(())
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.var))
            .map(|(v, (m, s2))| ((v - m) / (s2 + 1e-8).sqrt()).clamp(-CLIP, CLIP))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn batched_updates_match_two_pass_statistics() {
        let data: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.3, (i as f64).sin()]).collect();
        let mut norm = RunningNorm::new(2);
        norm.count = 0.0;
        norm.var = vec![0.0; 2];
        for chunk in data.chunks(7) {
            norm.update(chunk).unwrap();
        }
        for j in 0..2 {
            let mean = data.iter().map(|x| x[j]).sum::<f64>() / 50.0;
            let var = data.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / 50.0;
            assert_relative_eq!(norm.mean[j], mean, epsilon = 1e-12);
            assert_relative_eq!(norm.var[j], var, epsilon = 1e-12);
        }
        assert!(norm.update(&[vec![1.0]]).is_err());
    }

    #[test]
    fn normalized_values_are_clipped() {
        let norm = RunningNorm::new(1);
        assert_eq!(norm.normalize(&[1e6]), vec![CLIP]);
        assert_relative_eq!(norm.normalize(&[0.5])[0], 0.5, epsilon = 1e-7);
    }
}
