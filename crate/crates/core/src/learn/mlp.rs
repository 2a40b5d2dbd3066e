use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Fully connected network: tanh hidden layers, linear output. Inputs and
/// outputs pass through fixed affine normalizations that are part of the
/// model; the loss is measured in normalized output units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Mlp<T> {
    layer_sizes: Vec<usize>,
    weights: Vec<Matrix<T>>,
    biases: Vec<Vec<T>>,
    input_shift: Vec<T>,
    input_scale: Vec<T>,
    output_shift: Vec<T>,
    output_scale: Vec<T>,
}

/// Gradient of the loss, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<T> {
    pub weights: Vec<Matrix<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> Mlp<T> {
    /// Xavier-uniform weights and zero biases from `seed`.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer sizes {layer_sizes:?} need at least two nonzero entries"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| T::of(rng.random_range(-limit..limit)))
                .collect();
            weights.push(Matrix::from_vec(fan_out, fan_in, data)?);
            biases.push(vec![T::zero(); fan_out]);
        }
        let (n_in, n_out) = (layer_sizes[0], layer_sizes[layer_sizes.len() - 1]);
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            input_shift: vec![T::zero(); n_in],
            input_scale: vec![T::one(); n_in],
            output_shift: vec![T::zero(); n_out],
            output_scale: vec![T::one(); n_out],
        })
    }

    /// Inputs are mapped to `(x − shift) / scale` before the first layer.
    pub fn with_input_normalization(mut self, shift: Vec<T>, scale: Vec<T>) -> Result<Self> {
        check_affine(&shift, &scale, self.input_dim(), "input")?;
        self.input_shift = shift;
        self.input_scale = scale;
        Ok(self)
    }

    /// Raw outputs are mapped to `raw · scale + shift`.
    pub fn with_output_normalization(mut self, shift: Vec<T>, scale: Vec<T>) -> Result<Self> {
        check_affine(&shift, &scale, self.output_dim(), "output")?;
        self.output_shift = shift;
        self.output_scale = scale;
        Ok(self)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("nonempty")
    }

    pub fn num_params(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.rows() * w.cols() + b.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    fn normalize_input(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(&self.input_shift)
            .zip(&self.input_scale)
            .map(|((&v, &s), &c)| (v - s) / c)
            .collect()
    }

    /// Activations of every layer, starting with the normalized input; the
    /// last entry is the raw (unscaled) output.
    fn activations(&self, x: &[T]) -> Vec<Vec<T>> {
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(self.normalize_input(x));
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.matvec(acts.last().expect("input layer"));
            for (zi, &bi) in z.iter_mut().zip(b) {
                *zi = *zi + bi;
                if l < last {
                    *zi = zi.tanh();
                }
            }
            acts.push(z);
        }
        acts
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let raw = self.activations(x).pop().expect("output layer");
        raw.iter()
            .zip(&self.output_shift)
            .zip(&self.output_scale)
            .map(|((&r, &s), &c)| r * c + s)
            .collect()
    }

    /// Mean squared error over the batch and outputs, in normalized units.
    pub fn loss(&self, inputs: &[Vec<T>], targets: &[Vec<T>]) -> T {
        let mut total = T::zero();
        for (x, y) in inputs.iter().zip(targets) {
            let raw = self.activations(x).pop().expect("output layer");
            for (k, &r) in raw.iter().enumerate() {
                let e = r - self.normalize_target(k, y[k]);
                total = total + e * e;
            }
        }
        total / T::of((inputs.len() * self.output_dim()).max(1) as f64)
    }

    fn normalize_target(&self, k: usize, y: T) -> T {
        (y - self.output_shift[k]) / self.output_scale[k]
    }

    /// Loss and its gradient by backpropagation.
    pub fn loss_and_gradient(&self, inputs: &[Vec<T>], targets: &[Vec<T>]) -> (T, Gradient<T>) {
        let mut grad = Gradient {
            weights: self
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: self.biases.iter().map(|b| vec![T::zero(); b.len()]).collect(),
        };
        let denom = T::of((inputs.len() * self.output_dim()).max(1) as f64);
        let two = T::of(2.0);
        let mut total = T::zero();
        let layers = self.weights.len();
        for (x, y) in inputs.iter().zip(targets) {
            let acts = self.activations(x);
            let out = &acts[layers];
            let mut delta: Vec<T> = out
                .iter()
                .enumerate()
                .map(|(k, &r)| {
                    let e = r - self.normalize_target(k, y[k]);
                    total = total + e * e;
                    two * e / denom
                })
                .collect();
            for l in (0..layers).rev() {
                let a_in = &acts[l];
                let gw = &mut grad.weights[l];
                for (i, &d) in delta.iter().enumerate() {
                    grad.biases[l][i] = grad.biases[l][i] + d;
                    for (g, &a) in gw.row_mut(i).iter_mut().zip(a_in) {
                        *g = *g + d * a;
                    }
                }
                if l > 0 {
                    let w = &self.weights[l];
                    let mut back = vec![T::zero(); w.cols()];
                    for (i, &d) in delta.iter().enumerate() {
                        for (b, &wij) in back.iter_mut().zip(w.row(i)) {
                            *b = *b + d * wij;
                        }
                    }
                    // tanh' = 1 − a²
                    delta = back
                        .iter()
                        .zip(a_in)
                        .map(|(&b, &a)| b * (T::one() - a * a))
                        .collect();
                }
            }
        }
        (total / denom, grad)
    }

    /// Parameters flattened layer by layer: weights row-major, then biases.
    pub fn params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let nw = w.rows() * w.cols();
            *w = Matrix::from_vec(w.rows(), w.cols(), flat[at..at + nw].to_vec())?;
            at += nw;
            let nb = b.len();
            b.copy_from_slice(&flat[at..at + nb]);
            at += nb;
        }
        Ok(())
    }
}

impl<T: Real> Gradient<T> {
    /// Same layout as [`Mlp::params`].
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }
}

fn check_affine<T: Real>(shift: &[T], scale: &[T], dim: usize, what: &str) -> Result<()> {
    if shift.len() != dim || scale.len() != dim {
        return Err(Error::Dimension(format!("{what} normalization must have length {dim}")));
    }
    if scale.iter().any(|s| !(s.is_finite() && *s != T::zero())) {
        return Err(Error::InvalidArgument(format!("{what} scale must be finite and nonzero")));
    }
    Ok(())
}

/// Heavy-ball momentum: `v ← μ v − lr g`, `θ ← θ + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Momentum<T> {
    pub lr: T,
    pub momentum: T,
    velocity: Vec<T>,
}

impl<T: Real> Momentum<T> {
    pub fn new(lr: T, momentum: T) -> Self {
        Self {
            lr,
            momentum,
            velocity: Vec::new(),
        }
    }

    pub fn step(&mut self, net: &mut Mlp<T>, grad: &Gradient<T>) -> Result<()> {
        let g = grad.flatten();
        if self.velocity.len() != g.len() {
            self.velocity = vec![T::zero(); g.len()];
        }
        let mut p = net.params();
        for ((pi, vi), &gi) in p.iter_mut().zip(self.velocity.iter_mut()).zip(&g) {
            *vi = self.momentum * *vi - self.lr * gi;
            *pi = *pi + *vi;
        }
        net.set_params(&p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 256,
            lr: 1e-3,
            momentum: 0.9,
            seed: 0,
        }
    }
}

/// Minibatch momentum descent on the MSE. Returns the mean batch loss of
/// every epoch. A non-finite loss stops with [`Error::Diverged`].
pub fn fit_mlp<T: Real>(
    net: &mut Mlp<T>,
    inputs: &[Vec<T>],
    targets: &[Vec<T>],
    config: &FitConfig,
) -> Result<Vec<T>> {
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::Dimension("inputs and targets differ in length".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut opt = Momentum::new(T::of(config.lr), T::of(config.momentum));
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = T::zero();
        let mut batches = 0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let xs: Vec<Vec<T>> = idx.iter().map(|&i| inputs[i].clone()).collect();
            let ys: Vec<Vec<T>> = idx.iter().map(|&i| targets[i].clone()).collect();
            let (loss, grad) = net.loss_and_gradient(&xs, &ys);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch });
            }
            opt.step(net, &grad)?;
            if !net.is_finite() {
                return Err(Error::Diverged { epoch, batch });
            }
            sum = sum + loss;
            batches += 1;
        }
        history.push(sum / T::of(batches as f64));
    }
    Ok(history)
}
