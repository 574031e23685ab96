//! Small feed-forward networks with explicit gradients, plus the four
//! training stages built on them.
//!
//! Everything here is deliberately plain `Vec<f64>` math: forward passes,
//! backprop, and every loss gradient are written out by hand so they can
//! be checked against central finite differences ([`grad_check`]).

pub mod bridge_train;
pub mod checkpoint;
pub mod corpus;
pub mod finetune;
pub mod losses;
pub mod optim;
pub mod prior;
pub mod restore;
pub mod vae;

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Optimiser selection for a training stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    /// SGD with momentum.
    Sgd,
    /// Adam with `momentum` as beta1.
    Adam,
}

/// Shared knobs for the four training stages. Loss weights default to
/// the balanced values used throughout: rec 1, adv 0.1, fm 5, kl 1e-4,
/// mse 2.5, cos 2.5, perceptual proxies 1 and 10.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub optimizer: OptimizerKind,
    /// Global-norm gradient clip applied per network before each step.
    pub clip_norm: f64,
    pub seed: u64,
    pub lambda_rec: f64,
    pub lambda_adv: f64,
    pub lambda_fm: f64,
    pub lambda_kl: f64,
    pub lambda_mse: f64,
    pub lambda_cos: f64,
    pub lambda_pesq_proxy: f64,
    pub lambda_utmos_proxy: f64,
    /// Weight of the time-domain anchor inside the reconstruction term.
    pub lambda_wav: f64,
    pub t_min: f64,
    /// Window sizes of the training-time spectral loss (sized to frames).
    pub resolutions: Vec<usize>,
    /// Run a finite-difference gradient check before step 0.
    pub preflight: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 1000,
            batch_size: 32,
            learning_rate: 0.02,
            momentum: 0.9,
            optimizer: OptimizerKind::Sgd,
            clip_norm: 5.0,
            seed: 0,
            lambda_rec: 1.0,
            lambda_adv: 0.1,
            lambda_fm: 5.0,
            lambda_kl: 1e-4,
            lambda_mse: 2.5,
            lambda_cos: 2.5,
            lambda_pesq_proxy: 1.0,
            lambda_utmos_proxy: 10.0,
            lambda_wav: 20.0,
            t_min: 1e-4,
            resolutions: vec![64, 128, 256],
            preflight: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::Domain("steps and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Domain("learning_rate must be positive".into()));
        }
        if !(self.t_min > 0.0 && self.t_min < 1.0) {
            return Err(Error::Domain("t_min must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Per-step loss records emitted by the trainers.
#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub columns: Vec<String>,
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl TrainHistory {
    pub fn new(columns: &[&str]) -> Self {
        TrainHistory {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, step: usize, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push((step, values));
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (step, vals) in &self.rows {
            out.push_str(&step.to_string());
            for v in vals {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv()).map_err(|e| Error::io(path.as_ref(), e))
    }

    /// Mean of a column over a step window (for trend assertions on
    /// noisy batch losses).
    pub fn window_mean(&self, column: &str, from: usize, to: usize) -> Option<f64> {
        let idx = self.columns.iter().position(|c| c == column)?;
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|(s, _)| *s >= from && *s < to)
            .map(|(_, v)| v[idx])
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Linear,
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative given the pre-activation value.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => {
                let y = pre.tanh();
                1.0 - y * y
            }
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One affine layer with a pointwise activation. Weights are row-major
/// `rows x cols` (output x input).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub act: Activation,
}

/// A small multi-layer perceptron with deterministic forward evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyNet {
    pub layers: Vec<Layer>,
}

/// Cached forward state needed by [`ToyNet::backward`].
pub struct Trace {
    /// `inputs[l]` is the input vector of layer `l`; the final network
    /// output is returned separately by `forward_trace`.
    inputs: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
}

/// Parameter gradients shaped like a [`ToyNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &ToyNet) -> Self {
        Grads {
            w: net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn add(&mut self, other: &Grads) {
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.b.iter_mut().zip(&other.b) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for a in self.w.iter_mut().chain(self.b.iter_mut()) {
            for x in a.iter_mut() {
                *x *= k;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.w.iter().map(Vec::len).sum::<usize>() + self.b.iter().map(Vec::len).sum::<usize>()
    }

    /// Flat parameter indexing matching [`ToyNet::param`]: per layer,
    /// weights first, then biases.
    pub fn param(&self, mut idx: usize) -> f64 {
        for (w, b) in self.w.iter().zip(&self.b) {
            if idx < w.len() {
                return w[idx];
            }
            idx -= w.len();
            if idx < b.len() {
                return b[idx];
            }
            idx -= b.len();
        }
        panic!("parameter index out of range");
    }

    /// Scale down so the global L2 norm does not exceed `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) {
        let norm: f64 = self
            .w
            .iter()
            .chain(self.b.iter())
            .flat_map(|v| v.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        if norm > max_norm {
            self.scale(max_norm / norm);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.w
            .iter()
            .chain(self.b.iter())
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.w
            .iter()
            .chain(self.b.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

impl ToyNet {
    /// Build a net with the given layer dimensions, `hidden` activation on
    /// every hidden layer, and a linear output layer. Xavier-uniform init.
    pub fn new(dims: &[usize], hidden: Activation, rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let n_layers = dims.len() - 1;
        let layers = (0..n_layers)
            .map(|l| {
                let (cols, rows) = (dims[l], dims[l + 1]);
                let limit = (6.0 / (rows + cols) as f64).sqrt();
                let w = (0..rows * cols)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                Layer {
                    w,
                    b: vec![0.0; rows],
                    rows,
                    cols,
                    act: if l + 1 == n_layers {
                        Activation::Linear
                    } else {
                        hidden
                    },
                }
            })
            .collect();
        ToyNet { layers }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].cols];
        d.extend(self.layers.iter().map(|l| l.rows));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().rows
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let (out, _) = self.forward_trace(input)?;
        Ok(out)
    }

    pub fn forward_trace(&self, input: &[f64]) -> Result<(Vec<f64>, Trace)> {
        if input.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for layer in &self.layers {
            let mut pre = vec![0.0; layer.rows];
            for r in 0..layer.rows {
                let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                let mut acc = layer.b[r];
                for (wv, xv) in row.iter().zip(&x) {
                    acc += wv * xv;
                }
                pre[r] = acc;
            }
            let out: Vec<f64> = pre.iter().map(|&p| layer.act.apply(p)).collect();
            inputs.push(x);
            preacts.push(pre);
            x = out;
        }
        Ok((x, Trace { inputs, preacts }))
    }

    /// Backpropagate `dl_dy` (gradient w.r.t. the network output) through
    /// the trace, returning parameter gradients and the gradient w.r.t.
    /// the network input.
    pub fn backward(&self, trace: &Trace, dl_dy: &[f64]) -> (Grads, Vec<f64>) {
        self.backward_with_hidden(trace, dl_dy, &[])
    }

    /// Like [`ToyNet::backward`], additionally injecting gradients at
    /// hidden-layer outputs (post-activation). `dl_dhidden[l]` if present
    /// is added to the gradient flowing into layer `l`'s output; used by
    /// feature-matching losses.
    pub fn backward_with_hidden(
        &self,
        trace: &Trace,
        dl_dy: &[f64],
        dl_dhidden: &[Option<Vec<f64>>],
    ) -> (Grads, Vec<f64>) {
        let mut grads = Grads::zeros_like(self);
        let mut g_out = dl_dy.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            if let Some(Some(extra)) = dl_dhidden.get(l) {
                for (g, e) in g_out.iter_mut().zip(extra) {
                    *g += e;
                }
            }
            let pre = &trace.preacts[l];
            let input = &trace.inputs[l];
            let mut g_pre = vec![0.0; layer.rows];
            for r in 0..layer.rows {
                g_pre[r] = g_out[r] * layer.act.derivative(pre[r]);
            }
            for r in 0..layer.rows {
                let gw = &mut grads.w[l][r * layer.cols..(r + 1) * layer.cols];
                let gp = g_pre[r];
                for (gv, iv) in gw.iter_mut().zip(input) {
                    *gv += gp * iv;
                }
                grads.b[l][r] += gp;
            }
            let mut g_in = vec![0.0; layer.cols];
            for r in 0..layer.rows {
                let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
                let gp = g_pre[r];
                for (gi, wv) in g_in.iter_mut().zip(row) {
                    *gi += gp * wv;
                }
            }
            g_out = g_in;
        }
        (grads, g_out)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn param(&self, mut idx: usize) -> f64 {
        for layer in &self.layers {
            if idx < layer.w.len() {
                return layer.w[idx];
            }
            idx -= layer.w.len();
            if idx < layer.b.len() {
                return layer.b[idx];
            }
            idx -= layer.b.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut idx: usize, value: f64) {
        for layer in &mut self.layers {
            if idx < layer.w.len() {
                layer.w[idx] = value;
                return;
            }
            idx -= layer.w.len();
            if idx < layer.b.len() {
                layer.b[idx] = value;
                return;
            }
            idx -= layer.b.len();
        }
        panic!("parameter index out of range");
    }

    /// `p += scale * g` for every parameter.
    pub fn add_scaled(&mut self, grads: &Grads, scale: f64) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (p, g) in layer.w.iter_mut().zip(&grads.w[l]) {
                *p += scale * g;
            }
            for (p, g) in layer.b.iter_mut().zip(&grads.b[l]) {
                *p += scale * g;
            }
        }
    }
}

/// Compare the analytic gradients produced by `loss` against central
/// finite differences. Every parameter is checked, unless the net has
/// more than 10^4 parameters, in which case a deterministic 1% subsample
/// is used. Returns the maximum relative error.
///
/// The per-parameter denominator is floored at 0.1% of the largest
/// analytic gradient entry, so finite-difference truncation noise on
/// negligible components does not register while any systematic error at
/// the gradient scale still does. Parameters whose first-pass error
/// exceeds 1e-5 are re-checked at a smaller step and the smaller error
/// kept, which filters out the occasional kink crossing of
/// piecewise-smooth losses.
pub fn grad_check<F>(net: &ToyNet, loss: F, eps: f64) -> Result<f64>
where
    F: Fn(&ToyNet) -> Result<(f64, Grads)>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Domain(format!(
            "grad_check eps must lie in [1e-7, 1e-3], got {eps}"
        )));
    }
    let (_, analytic) = loss(net)?;
    let n = net.param_count();
    let indices: Vec<usize> = if n > 10_000 {
        let take = (n / 100).max(100);
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        (0..take).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let floor = 1e-3 * analytic.max_abs().max(1e-8);

    let fd_at = |idx: usize, step: f64| -> Result<f64> {
        let base = net.param(idx);
        let mut pos = net.clone();
        pos.set_param(idx, base + step);
        let mut neg = net.clone();
        neg.set_param(idx, base - step);
        Ok((loss(&pos)?.0 - loss(&neg)?.0) / (2.0 * step))
    };
    let rel = |fd: f64, an: f64| -> f64 {
        if fd.abs().max(an.abs()) < 1e-8 {
            return 0.0;
        }
        (fd - an).abs() / fd.abs().max(an.abs()).max(floor)
    };

    let mut max_rel = 0.0f64;
    for idx in indices {
        let an = analytic.param(idx);
        let mut err = rel(fd_at(idx, eps)?, an);
        if err > 1e-5 {
            err = err.min(rel(fd_at(idx, eps / 8.0)?, an));
        }
        max_rel = max_rel.max(err);
    }
    Ok(max_rel)
}
