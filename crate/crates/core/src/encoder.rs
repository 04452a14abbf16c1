//! Fully-connected encoder `f(X) = g_out(W_l ... g(W_2 X))` with backpropagation
//! and full-batch gradient descent.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Identity => a,
            Activation::Relu => a.max(0.0),
            Activation::Tanh => a.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-a).exp()),
        }
    }

    /// Derivative at pre-activation `a`. The ReLU derivative at 0 is 0.
    #[inline]
    pub fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = a.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-a).exp());
                s * (1.0 - s)
            }
        }
    }

    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Sigmoid => 0.25,
            _ => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::InvalidConfig(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub init_scale: f64,
    pub seed: u64,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub use_bias: bool,
    /// Fit the top layer by ridge least squares on the hidden features before
    /// the gradient epochs. Needs an identity output activation.
    pub solve_top_layer: bool,
    /// Ridge weight for the top-layer solve, relative to the mean feature energy.
    pub top_layer_ridge: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![1500],
            learning_rate: 1e-4,
            max_epochs: 5,
            init_scale: 0.01,
            seed: 0,
            hidden_activation: Activation::Relu,
            output_activation: Activation::Identity,
            use_bias: false,
            solve_top_layer: true,
            top_layer_ridge: 1e-6,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer sizes must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidConfig("init_scale must be nonnegative".into()));
        }
        if !(self.top_layer_ridge >= 0.0) {
            return Err(Error::InvalidConfig("top_layer_ridge must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Layer weights `W_2 .. W_l` (layer `i` maps `iota_{i-1}` to `iota_i` units)
/// with optional biases.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub layers: Vec<Matrix>,
    /// Either empty (no biases) or one vector per layer.
    pub biases: Vec<DVector<f64>>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
}

/// Cached pre- and post-activations of one forward pass.
struct Trace {
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
}

impl EncoderParams {
    pub fn new(
        layers: Vec<Matrix>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        let params = Self {
            layers,
            biases: Vec::new(),
            hidden_activation,
            output_activation,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Shape("encoder has no layers".into()));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[1].ncols() != pair[0].nrows() {
                return Err(Error::Shape(format!(
                    "layer {} has {} columns but layer {} has {} rows",
                    i + 1,
                    pair[1].ncols(),
                    i,
                    pair[0].nrows()
                )));
            }
        }
        if !self.biases.is_empty() {
            if self.biases.len() != self.layers.len() {
                return Err(Error::Shape("one bias vector per layer expected".into()));
            }
            for (i, (b, w)) in self.biases.iter().zip(&self.layers).enumerate() {
                if b.len() != w.nrows() {
                    return Err(Error::Shape(format!(
                        "bias {i} has length {} but layer has {} rows",
                        b.len(),
                        w.nrows()
                    )));
                }
            }
        }
        let finite = self.layers.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::InvalidInput("encoder weights must be finite".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].nrows()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn has_bias(&self) -> bool {
        !self.biases.is_empty()
    }

    /// Number of multiply-adds per encoded point.
    pub fn cost_per_point(&self) -> usize {
        self.layers.iter().map(|w| w.nrows() * w.ncols()).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    fn check_input(&self, rows: usize) -> Result<()> {
        if rows != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {rows} rows, encoder expects {}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn pre_activation(&self, layer: usize, input: &Matrix) -> Matrix {
        let mut pre = &self.layers[layer] * input;
        if let Some(b) = self.biases.get(layer) {
            for mut col in pre.column_iter_mut() {
                col += b;
            }
        }
        pre
    }

    fn trace(&self, x: &Matrix) -> Trace {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in 0..self.layers.len() {
            let input = post.last().unwrap_or(x);
            let z = self.pre_activation(layer, input);
            let act = self.activation(layer);
            post.push(z.map(|v| act.apply(v)));
            pre.push(z);
        }
        Trace { pre, post }
    }

    /// Codes for every column of `x` (an `n x m` matrix).
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x.nrows())?;
        let mut current = x.clone();
        for layer in 0..self.layers.len() {
            let act = self.activation(layer);
            current = self.pre_activation(layer, &current);
            current.apply(|v| *v = act.apply(*v));
        }
        Ok(current)
    }

    /// Forward pass over column batches of at most `batch` points.
    pub fn forward_batched(&self, x: &Matrix, batch: usize) -> Result<Matrix> {
        self.check_input(x.nrows())?;
        let batch = batch.max(1);
        let m = x.ncols();
        let mut out = DMatrix::zeros(self.output_dim(), m);
        let mut start = 0;
        while start < m {
            let width = batch.min(m - start);
            let block = x.columns(start, width).into_owned();
            let codes = self.forward(&block)?;
            out.columns_mut(start, width).copy_from(&codes);
            start += width;
        }
        Ok(out)
    }

    /// `||target - f(x)||_F^2`.
    pub fn loss(&self, x: &Matrix, target: &Matrix) -> Result<f64> {
        let out = self.forward(x)?;
        check_target(&out, target)?;
        Ok((target - out).norm_squared())
    }

    /// Loss and its gradient with respect to every weight (and bias).
    pub fn loss_and_gradient(&self, x: &Matrix, target: &Matrix) -> Result<(f64, Gradient)> {
        self.check_input(x.nrows())?;
        let trace = self.trace(x);
        let out = trace.post.last().expect("at least one layer");
        check_target(out, target)?;
        let diff = out - target;
        let loss = diff.norm_squared();

        let layers = self.layers.len();
        let mut weights = vec![Matrix::zeros(0, 0); layers];
        let mut biases = Vec::new();
        if self.has_bias() {
            biases = vec![DVector::zeros(0); layers];
        }
        // dL/d(post) for the current layer.
        let mut upstream = diff * 2.0;
        for layer in (0..layers).rev() {
            let act = self.activation(layer);
            let delta = upstream.zip_map(&trace.pre[layer], |g, a| g * act.derivative(a));
            let input = if layer == 0 { x } else { &trace.post[layer - 1] };
            weights[layer] = &delta * input.transpose();
            if self.has_bias() {
                biases[layer] = delta.column_sum();
            }
            if layer > 0 {
                upstream = self.layers[layer].transpose() * &delta;
            }
        }
        Ok((loss, Gradient { weights, biases }))
    }

    /// The `n x d` Jacobian of the encoder at the single point `x`.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<Matrix> {
        self.check_input(x.len())?;
        let input = Matrix::from_column_slice(x.len(), 1, x.as_slice());
        let trace = self.trace(&input);
        let mut jac = Matrix::identity(x.len(), x.len());
        for layer in 0..self.layers.len() {
            let act = self.activation(layer);
            let mut next = &self.layers[layer] * &jac;
            for (r, mut row) in next.row_iter_mut().enumerate() {
                row *= act.derivative(trace.pre[layer][(r, 0)]);
            }
            jac = next;
        }
        Ok(jac)
    }

    pub fn jacobian_frobenius_norm(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.jacobian(x)?.norm())
    }

    /// Upper bound on the Lipschitz constant: product of layer spectral norms
    /// times the activation constants of every nonlinear layer.
    pub fn lipschitz_bound(&self) -> Result<f64> {
        let mut bound = 1.0;
        for (layer, w) in self.layers.iter().enumerate() {
            let s = crate::linalg::singular_values(w)?;
            bound *= s.iter().cloned().fold(0.0, f64::max);
            bound *= self.activation(layer).lipschitz();
        }
        Ok(bound)
    }

    fn step(&self, grad: &Gradient, lr: f64) -> Self {
        let layers = self
            .layers
            .iter()
            .zip(&grad.weights)
            .map(|(w, g)| w - g * lr)
            .collect();
        let biases = self
            .biases
            .iter()
            .zip(&grad.biases)
            .map(|(b, g)| b - g * lr)
            .collect();
        Self {
            layers,
            biases,
            hidden_activation: self.hidden_activation,
            output_activation: self.output_activation,
        }
    }
}

fn check_target(out: &Matrix, target: &Matrix) -> Result<()> {
    if out.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "target is {}x{}, encoder output is {}x{}",
            target.nrows(),
            target.ncols(),
            out.nrows(),
            out.ncols()
        )));
    }
    Ok(())
}

/// Gradient with the same layout as [`EncoderParams`].
#[derive(Debug, Clone)]
pub struct Gradient {
    pub weights: Vec<Matrix>,
    pub biases: Vec<DVector<f64>>,
}

impl Gradient {
    pub fn norm_squared(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_squared()).sum::<f64>()
            + self.biases.iter().map(|b| b.norm_squared()).sum::<f64>()
    }
}

/// Random initialization, uniform on `[-init_scale, init_scale]`, biases zero.
pub fn encoder_init(d: usize, n: usize, config: &EncoderConfig) -> Result<EncoderParams> {
    config.validate()?;
    if d == 0 || n == 0 {
        return Err(Error::InvalidInput(
            "encoder input and output dimensions must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let scale = config.init_scale;
    let mut sizes = Vec::with_capacity(config.hidden_sizes.len() + 2);
    sizes.push(d);
    sizes.extend_from_slice(&config.hidden_sizes);
    sizes.push(n);
    let layers: Vec<Matrix> = sizes
        .windows(2)
        .map(|w| {
            DMatrix::from_fn(w[1], w[0], |_, _| {
                if scale == 0.0 {
                    0.0
                } else {
                    rng.random_range(-scale..=scale)
                }
            })
        })
        .collect();
    let biases = if config.use_bias {
        layers.iter().map(|w| DVector::zeros(w.nrows())).collect()
    } else {
        Vec::new()
    };
    Ok(EncoderParams {
        layers,
        biases,
        hidden_activation: config.hidden_activation,
        output_activation: config.output_activation,
    })
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Gradient epochs actually taken.
    pub epochs: usize,
    /// Loss before training followed by the loss after each accepted update.
    pub loss_history: Vec<f64>,
    /// Learning rate after backtracking.
    pub learning_rate: f64,
}

const MAX_HALVINGS: usize = 60;

/// Full-batch gradient descent on `||target - f(x)||_F^2` until the loss is
/// below `eps1` or `max_epochs` gradient steps were taken.
///
/// A step that would increase the loss is retried with half the learning
/// rate, so the loss history never increases.
pub fn train_to_target(
    x: &Matrix,
    target: &Matrix,
    params: &mut EncoderParams,
    config: &EncoderConfig,
    eps1: f64,
) -> Result<TrainReport> {
    config.validate()?;
    params.validate()?;
    let mut loss = params.loss(x, target)?;
    if !loss.is_finite() {
        return Err(Error::Divergence {
            stage: "encoder training",
            iteration: 0,
            detail: "initial loss is not finite".into(),
        });
    }
    let initial_loss = loss;
    let mut history = vec![loss];

    if config.solve_top_layer && loss >= eps1 {
        if let Some((candidate, candidate_loss)) =
            solve_top_layer(x, target, params, config.top_layer_ridge)?
        {
            if candidate_loss < loss {
                *params = candidate;
                loss = candidate_loss;
                history.push(loss);
            }
        }
    }

    let mut lr = config.learning_rate;
    let mut epochs = 0;
    while epochs < config.max_epochs && loss >= eps1 {
        let (_, grad) = params.loss_and_gradient(x, target)?;
        let gnorm = grad.norm_squared();
        if !gnorm.is_finite() {
            return Err(Error::Divergence {
                stage: "encoder training",
                iteration: epochs,
                detail: "gradient is not finite".into(),
            });
        }
        if gnorm == 0.0 {
            break;
        }
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial = params.step(&grad, lr);
            let trial_loss = trial.loss(x, target)?;
            if trial_loss.is_finite() && trial_loss <= loss {
                accepted = Some((trial, trial_loss));
                break;
            }
            lr *= 0.5;
        }
        let Some((next, next_loss)) = accepted else {
            if loss.is_finite() {
                // No descent left at machine precision.
                break;
            }
            return Err(Error::Divergence {
                stage: "encoder training",
                iteration: epochs,
                detail: "loss is not finite".into(),
            });
        };
        *params = next;
        loss = next_loss;
        history.push(loss);
        epochs += 1;
    }

    Ok(TrainReport {
        initial_loss,
        final_loss: loss,
        epochs,
        loss_history: history,
        learning_rate: lr,
    })
}

/// Ridge least-squares fit of the top layer to `target` given the hidden
/// features of `x`. Returns `None` when the output activation is nonlinear.
fn solve_top_layer(
    x: &Matrix,
    target: &Matrix,
    params: &EncoderParams,
    ridge: f64,
) -> Result<Option<(EncoderParams, f64)>> {
    if params.output_activation != Activation::Identity {
        return Ok(None);
    }
    let top = params.layers.len() - 1;
    let features = if top == 0 {
        x.clone()
    } else {
        params.trace(x).post.swap_remove(top - 1)
    };
    // Append a ones row for the bias.
    let h = if params.has_bias() {
        let r = features.nrows();
        features.insert_row(r, 1.0)
    } else {
        features
    };
    let (rows, samples) = h.shape();
    let energy = h.norm_squared() / rows.max(1) as f64;
    if energy == 0.0 {
        return Ok(None);
    }
    let lambda = ridge * energy + f64::MIN_POSITIVE;
    // Primal (rows x rows) or dual (samples x samples) normal equations.
    let w = if rows <= samples {
        let gram = &h * h.transpose() + Matrix::identity(rows, rows) * lambda;
        let rhs = &h * target.transpose();
        let Some(chol) = gram.cholesky() else {
            return Ok(None);
        };
        chol.solve(&rhs).transpose()
    } else {
        let gram = h.transpose() * &h + Matrix::identity(samples, samples) * lambda;
        let Some(chol) = gram.cholesky() else {
            return Ok(None);
        };
        let alpha = chol.solve(&target.transpose());
        (&h * alpha).transpose()
    };
    if !w.iter().all(|v| v.is_finite()) {
        return Ok(None);
    }
    let mut candidate = params.clone();
    if candidate.has_bias() {
        let width = w.ncols() - 1;
        candidate.layers[top] = w.columns(0, width).into_owned();
        candidate.biases[top] = w.column(width).into_owned();
    } else {
        candidate.layers[top] = w;
    }
    let loss = candidate.loss(x, target)?;
    Ok(Some((candidate, loss)))
}
