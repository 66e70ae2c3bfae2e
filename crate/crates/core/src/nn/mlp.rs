use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    /// No nonlinearity; the network is affine.
    Identity,
}

impl Activation {
    fn apply(self, z: &mut DMatrix<f64>) {
        if self == Activation::Tanh {
            z.apply(|v| *v = v.tanh());
        }
    }
}

/// Fully connected network: hidden layers use `activation`, the output layer
/// is linear. Batches are matrices with one sample per column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    /// Input width, hidden widths, output width.
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    /// Layer inputs of the last `forward` call (post-activation).
    #[serde(skip)]
    cache: Option<Vec<DMatrix<f64>>>,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes
            && self.activation == other.activation
            && self.weights == other.weights
            && self.biases == other.biases
    }
}

/// `rows x cols` matrix with orthonormal rows or columns, scaled by `gain`.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    let (r, c) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let a = DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    // sign fix so the distribution is uniform
    let rdiag = qr.r().diagonal();
    for j in 0..c {
        if rdiag[j] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let q = if rows >= cols { q } else { q.transpose() };
    q * gain
}

impl Mlp {
    /// Zero-initialized network.
    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self, NnError> {
        if sizes.len() < 3 || sizes.iter().any(|&s| s == 0) {
            return Err(NnError::InvalidSpec);
        }
        let weights = sizes.windows(2).map(|w| DMatrix::zeros(w[1], w[0])).collect();
        let biases = sizes[1..].iter().map(|&n| DVector::zeros(n)).collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            activation,
            weights,
            biases,
            cache: None,
        })
    }

    /// Orthogonal weights (`hidden_gain` on hidden layers, `output_gain` on
    /// the output layer) and zero biases.
    pub fn orthogonal(sizes: &[usize], hidden_gain: f64, output_gain: f64, rng: &mut impl Rng) -> Result<Self, NnError> {
        let mut net = Self::zeros(sizes, Activation::Tanh)?;
        let last = net.weights.len() - 1;
        for (l, w) in net.weights.iter_mut().enumerate() {
            let gain = if l == last { output_gain } else { hidden_gain };
            *w = orthogonal(w.nrows(), w.ncols(), gain, rng);
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("sizes checked at construction")
    }

    pub fn num_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn check_input(&self, x: &DMatrix<f64>) -> Result<(), NnError> {
        if x.nrows() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                what: "network input",
                expected: self.input_dim(),
                got: x.nrows(),
            });
        }
        Ok(())
    }

    fn run(&self, x: &DMatrix<f64>, mut keep: Option<&mut Vec<DMatrix<f64>>>) -> DMatrix<f64> {
        let last = self.weights.len() - 1;
        let mut a = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w * &a;
            for mut col in z.column_iter_mut() {
                col += b;
            }
            if l < last {
                self.activation.apply(&mut z);
            }
            if let Some(k) = keep.as_deref_mut() {
                k.push(std::mem::replace(&mut a, z));
            } else {
                a = z;
            }
        }
        a
    }

    /// Batch forward pass without touching the cache.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, NnError> {
        self.check_input(x)?;
        Ok(self.run(x, None))
    }

    /// Batch forward pass that caches what `backward` needs.
    pub fn forward(&mut self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, NnError> {
        self.check_input(x)?;
        let mut keep = Vec::with_capacity(self.weights.len());
        let y = self.run(x, Some(&mut keep));
        self.cache = Some(keep);
        Ok(y)
    }

    /// Gradients of `sum(upstream .* y)` for the cached forward pass, in the
    /// layout of [`Mlp::params`]. Consumes the cache.
    pub fn backward(&mut self, upstream: &DMatrix<f64>) -> Result<Vec<f64>, NnError> {
        let inputs = self.cache.take().ok_or(NnError::NoForwardCache)?;
        let batch = inputs[0].ncols();
        if upstream.shape() != (self.output_dim(), batch) {
            return Err(NnError::DimensionMismatch {
                what: "upstream gradient rows",
                expected: self.output_dim(),
                got: upstream.nrows(),
            });
        }
        let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(self.weights.len());
        let mut delta = upstream.clone();
        for l in (0..self.weights.len()).rev() {
            let a = &inputs[l];
            grads.push((&delta * a.transpose(), delta.column_sum()));
            if l > 0 {
                let mut back = self.weights[l].transpose() * &delta;
                if self.activation == Activation::Tanh {
                    back.zip_apply(a, |d, y| *d *= 1.0 - y * y);
                }
                delta = back;
            }
        }
        grads.reverse();
        let mut flat = Vec::with_capacity(self.num_params());
        for (gw, gb) in grads {
            flat.extend_from_slice(gw.as_slice());
            flat.extend_from_slice(gb.as_slice());
        }
        Ok(flat)
    }

    /// Weights (column-major) then biases, layer by layer.
    pub fn params(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            flat.extend_from_slice(w.as_slice());
            flat.extend_from_slice(b.as_slice());
        }
        flat
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<(), NnError> {
        if flat.len() != self.num_params() {
            return Err(NnError::DimensionMismatch {
                what: "parameter vector",
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.len();
            w.as_mut_slice().copy_from_slice(&flat[at..at + n]);
            at += n;
            let n = b.len();
            b.as_mut_slice().copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        self.cache = None;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(sizes: &[usize], act: Activation, seed: u64) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Mlp::zeros(sizes, act).unwrap();
        let p: Vec<f64> = (0..net.num_params()).map(|_| rng.random_range(-0.8..0.8)).collect();
        net.set_params(&p).unwrap();
        net
    }

    fn random_batch(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn matches_straight_line_evaluation() {
        let net = random_net(&[3, 5, 4, 2], Activation::Tanh, 1);
        let x = random_batch(3, 1, 2);
        let y = net.predict(&x).unwrap();
        // independent scalar loops
        let mut a: Vec<f64> = x.column(0).iter().copied().collect();
        for (l, (w, b)) in net.weights.iter().zip(&net.biases).enumerate() {
            let mut next = vec![0.0; w.nrows()];
            for i in 0..w.nrows() {
                let mut s = b[i];
                for j in 0..w.ncols() {
                    s += w[(i, j)] * a[j];
                }
                next[i] = if l + 1 < net.weights.len() { s.tanh() } else { s };
            }
            a = next;
        }
        for i in 0..2 {
            assert_relative_eq!(y[(i, 0)], a[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn backward_without_forward_is_an_error() {
        let mut net = random_net(&[2, 3, 1], Activation::Tanh, 1);
        assert!(matches!(net.backward(&DMatrix::zeros(1, 1)), Err(NnError::NoForwardCache)));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut net = random_net(&[2, 3, 1], Activation::Tanh, 1);
        net.forward(&random_batch(2, 4, 3)).unwrap();
        let g = net.backward(&DMatrix::zeros(1, 4)).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradients_match_central_differences() {
        let sizes = [4, 6, 5, 3];
        let mut net = random_net(&sizes, Activation::Tanh, 7);
        let x = random_batch(4, 5, 8);
        let c = random_batch(3, 5, 9);
        // loss = sum(c .* y)
        net.forward(&x).unwrap();
        let g = net.backward(&c).unwrap();
        let p0 = net.params();
        let h = 1e-5;
        for k in 0..p0.len() {
            let mut loss_at = |d: f64| {
                let mut p = p0.clone();
                p[k] += d;
                net.set_params(&p).unwrap();
                net.predict(&x).unwrap().component_mul(&c).sum()
            };
            let fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
            let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
            assert!(rel <= 1e-4, "param {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn linear_network_least_squares_gradient() {
        let mut net = random_net(&[3, 4, 2], Activation::Identity, 4);
        let x = random_batch(3, 6, 5);
        let y = random_batch(2, 6, 6);
        // loss = 1/2 |W2 (W1 x + b1) + b2 - y|^2 with the product map W = W2 W1
        let out = net.forward(&x).unwrap();
        let resid = &out - &y;
        let g = net.backward(&resid).unwrap();
        let (w1, w2) = (net.weights[0].clone(), net.weights[1].clone());
        let hidden = &w1 * &x + net.biases[0].clone() * DMatrix::from_element(1, 6, 1.0);
        let gw2 = &resid * hidden.transpose();
        let gw1 = w2.transpose() * &resid * x.transpose();
        let gb2 = resid.column_sum();
        let gb1 = w2.transpose() * &gb2;
        let expected: Vec<f64> = gw1
            .iter()
            .chain(gb1.iter())
            .chain(gw2.iter())
            .chain(gb2.iter())
            .copied()
            .collect();
        for (a, b) in g.iter().zip(&expected) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn orthogonal_init_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = orthogonal(6, 3, 2.0, &mut rng);
        let gram = w.transpose() * &w;
        assert_relative_eq!(gram, DMatrix::identity(3, 3) * 4.0, epsilon = 1e-12);
        let w = orthogonal(3, 6, 1.0, &mut rng);
        assert_relative_eq!(&w * w.transpose(), DMatrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn params_round_trip() {
        let mut net = random_net(&[2, 3, 4], Activation::Tanh, 1);
        let p = net.params();
        assert_eq!(p.len(), 2 * 3 + 3 + 3 * 4 + 4);
        let mut q = p.clone();
        q.reverse();
        net.set_params(&q).unwrap();
        assert_eq!(net.params(), q);
        assert!(net.set_params(&p[1..]).is_err());
        assert!(Mlp::zeros(&[2, 3], Activation::Tanh).is_err());
    }
}
