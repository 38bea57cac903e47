//! Deterministic full-batch gradient descent on masked networks, synthetic
//! regression data and repeated-trial statistics.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::calculus::forward_backward;
use crate::counterexamples::{ss_network, ss_params, ss_target};
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, pinv, RANK_TOL};
use crate::net::{effective_subnetwork, Mask, RemovalReport, SparseLayer, SparseNet};

const STREAM_X: u64 = 0;
const STREAM_A: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_INIT: u64 = 16;
const STREAM_MASK: u64 = 1024;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// `SEED` from the environment when set and parseable, else `default`.
pub fn seed_from_env(default: u64) -> u64 {
    std::env::var("SEED")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(default)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// `d_x × n`.
    pub x: DMatrix<f64>,
    /// `d_y × n`.
    pub y: DMatrix<f64>,
    pub seed: u64,
    pub noise: f64,
    /// Frobenius norm of the generating map.
    pub a_norm: f64,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.ncols()
    }
}

/// `Y = A X + noise · E` with Gaussian `X`, `E` and a Gaussian `A` rescaled
/// to `‖A‖_F = a_norm`. Each of `X`, `A`, `E` has its own stream of `seed`.
pub fn gen_synthetic(n: usize, d_x: usize, d_y: usize, seed: u64, a_norm: f64, noise: f64) -> Result<Dataset> {
    if n == 0 || d_x == 0 || d_y == 0 {
        return Err(Error::InvalidArgument(format!("dimensions must be positive: n={n}, d_x={d_x}, d_y={d_y}")));
    }
    let a = gaussian(&mut stream(seed, STREAM_A), d_y, d_x);
    let a = &a * (a_norm / a.norm());
    Ok(gen_with_map(&a, n, seed, noise))
}

/// Like [`gen_synthetic`] with a caller-supplied map `A`.
pub fn gen_with_map(a: &DMatrix<f64>, n: usize, seed: u64, noise: f64) -> Dataset {
    let x = gaussian(&mut stream(seed, STREAM_X), a.ncols(), n);
    let mut y = a * &x;
    if noise != 0.0 {
        y += gaussian(&mut stream(seed, STREAM_NOISE), a.nrows(), n) * noise;
    }
    Dataset {
        x,
        y,
        seed,
        noise,
        a_norm: a.norm(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `½‖f(X) − Y‖²_F`.
    HalfSse,
    /// `‖f(X) − Y‖²_F / (n d_y)`.
    Mse,
}

impl LossKind {
    /// Factor in front of `‖f(X) − Y‖²_F`.
    pub fn factor(self, y: &DMatrix<f64>) -> f64 {
        match self {
            LossKind::HalfSse => 0.5,
            LossKind::Mse => 1.0 / y.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    /// Uniform on `±1/√fan_in`.
    DefaultUniformFanin,
    /// The default draw times `multiplier`.
    Scaled { multiplier: f64 },
    /// Train from the weights already in the network.
    Keep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub grad_tol: f64,
    pub plateau_window: usize,
    pub plateau_rel_tol: f64,
    pub seed: u64,
    pub init: Init,
    pub loss: LossKind,
    /// Record hidden-layer ranks every this many epochs; 0 disables.
    pub rank_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            max_epochs: 50_000,
            grad_tol: 1e-8,
            plateau_window: 200,
            plateau_rel_tol: 1e-12,
            seed: 0,
            init: Init::DefaultUniformFanin,
            loss: LossKind::HalfSse,
            rank_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be finite and non-negative, got {}", self.learning_rate)));
        }
        if let Init::Scaled { multiplier } = self.init {
            if !multiplier.is_finite() {
                return Err(Error::InvalidArgument(format!("init multiplier {multiplier}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradNorm,
    Plateau,
    MaxEpochs,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// `losses[k]` is the loss after `k` updates.
    pub losses: Vec<f64>,
    pub rank_epochs: Vec<usize>,
    /// Numerical rank of each hidden-layer output at `rank_epochs`.
    pub ranks: Vec<Vec<usize>>,
    pub epochs: usize,
    pub stop: StopReason,
    pub final_loss: f64,
    pub final_grad_norm: f64,
    pub final_weights: Vec<DMatrix<f64>>,
    pub final_biases: Vec<Option<DVector<f64>>>,
}

impl TrainTrace {
    /// Largest loss increase between consecutive epochs.
    pub fn monotone_violation(&self) -> f64 {
        self.losses.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// `template` with the trained weights.
    pub fn final_net(&self, template: &SparseNet) -> Result<SparseNet> {
        let mut net = template.clone();
        for (l, (w, b)) in net.layers.iter_mut().zip(self.final_weights.iter().zip(&self.final_biases)) {
            l.set_weights(w.clone())?;
            if let Some(b) = b {
                l.set_bias(b.clone())?;
            }
        }
        Ok(net)
    }

    /// Rows `epoch,loss,rank_layer_1,...`; rank cells are empty at epochs
    /// without a rank sample.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n_hidden = self.ranks.first().map_or(0, |r| r.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["epoch".to_string(), "loss".to_string()];
        header.extend((1..=n_hidden).map(|k| format!("rank_layer_{k}")));
        w.write_record(&header)?;
        let mut next = 0;
        for (epoch, loss) in self.losses.iter().enumerate() {
            let mut row = vec![epoch.to_string(), loss.to_string()];
            if next < self.rank_epochs.len() && self.rank_epochs[next] == epoch {
                row.extend(self.ranks[next].iter().map(|r| r.to_string()));
                next += 1;
            } else {
                row.extend(std::iter::repeat_n(String::new(), n_hidden));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fresh weights for every layer of `net`, masked; biases, when present,
/// use the same bound.
pub fn initialize(net: &SparseNet, init: &Init, seed: u64) -> Result<SparseNet> {
    let mult = match init {
        Init::Keep => return Ok(net.clone()),
        Init::DefaultUniformFanin => 1.0,
        Init::Scaled { multiplier } => *multiplier,
    };
    let mut out = net.clone();
    for (k, l) in out.layers.iter_mut().enumerate() {
        let mut rng = stream(seed, STREAM_INIT + k as u64);
        let bound = 1.0 / (l.in_dim() as f64).sqrt();
        let w = DMatrix::from_fn(l.out_dim(), l.in_dim(), |_, _| rng.random_range(-bound..bound) * mult);
        l.set_weights(w)?;
        if l.bias().is_some() {
            let b = DVector::from_fn(l.out_dim(), |_, _| rng.random_range(-bound..bound) * mult);
            l.set_bias(b)?;
        }
    }
    Ok(out)
}

/// Full-batch gradient descent. Masked entries receive zero gradient and
/// stay at zero. Stops when the gradient norm drops below `grad_tol`, when
/// the loss changes by at most `plateau_rel_tol` (relative) over
/// `plateau_window` epochs, on a non-finite loss, or at `max_epochs`.
pub fn gd_train(net: &SparseNet, data: &Dataset, config: &TrainConfig) -> Result<TrainTrace> {
    config.validate()?;
    let mut net = initialize(net, &config.init, config.seed)?;
    let factor = config.loss.factor(&data.y);
    let mut losses = Vec::new();
    let mut rank_epochs = Vec::new();
    let mut ranks = Vec::new();
    let mut stop = StopReason::MaxEpochs;
    let mut grad_norm;
    let mut epoch = 0;
    loop {
        let (fwd, mut g) = forward_backward(&net, &data.x, &data.y)?;
        let loss = factor * (&fwd.output - &data.y).norm_squared();
        g.scale(2.0 * factor);
        grad_norm = g.norm();
        losses.push(loss);
        if config.rank_every > 0 && epoch % config.rank_every == 0 {
            rank_epochs.push(epoch);
            ranks.push(fwd.hidden.iter().map(|h| numerical_rank(h, RANK_TOL)).collect());
        }
        if !loss.is_finite() || !grad_norm.is_finite() {
            stop = StopReason::Diverged;
            break;
        }
        if grad_norm < config.grad_tol {
            stop = StopReason::GradNorm;
            break;
        }
        if config.plateau_window > 0 && epoch >= config.plateau_window {
            let past = losses[epoch - config.plateau_window];
            if (past - loss).abs() <= config.plateau_rel_tol * past.abs() {
                stop = StopReason::Plateau;
                break;
            }
        }
        if epoch == config.max_epochs {
            break;
        }
        for (l, (gw, gb)) in net.layers.iter_mut().zip(g.weights.iter().zip(&g.biases)) {
            l.set_weights(l.weights() - gw * config.learning_rate)?;
            if let (Some(b), Some(gb)) = (l.bias(), gb) {
                l.set_bias(b - gb * config.learning_rate)?;
            }
        }
        epoch += 1;
    }
    Ok(TrainTrace {
        final_loss: *losses.last().expect("at least one evaluation"),
        losses,
        rank_epochs,
        ranks,
        epochs: epoch,
        stop,
        final_grad_norm: grad_norm,
        final_weights: net.layers.iter().map(|l| l.weights().clone()).collect(),
        final_biases: net.layers.iter().map(|l| l.bias().cloned()).collect(),
    })
}

/// `min_V factor · ‖V X − Y‖²_F = factor · ‖Y (I − X⁺X)‖²_F`.
pub fn linear_regression_optimum(data: &Dataset, loss: LossKind) -> f64 {
    let n = data.n();
    let proj = DMatrix::identity(n, n) - pinv(&data.x) * &data.x;
    loss.factor(&data.y) * (&data.y * proj).norm_squared()
}

/// Mask with exactly `round((1 − sparsity) · rows · cols)` entries on, at
/// positions drawn without replacement.
pub fn random_sparse_mask(rows: usize, cols: usize, sparsity: f64, seed: u64) -> Result<Mask> {
    if !(0.0..1.0).contains(&sparsity) {
        return Err(Error::InvalidArgument(format!("sparsity must lie in [0, 1), got {sparsity}")));
    }
    let total = rows * cols;
    let keep = ((1.0 - sparsity) * total as f64).round() as usize;
    let mut mask = Mask::from_element(rows, cols, false);
    let mut rng = stream(seed, STREAM_MASK);
    for k in sample(&mut rng, total, keep.min(total)) {
        mask[(k % rows, k / rows)] = true;
    }
    Ok(mask)
}

/// Network with widths `[d_0, ..., d_L]`, per-layer random masks of the
/// given sparsity (zero weights), reduced to its effective part. Fails when
/// the reduction isolates an input or output; retry with another seed.
pub fn random_sparse_net(
    widths: &[usize],
    sparsity: &[f64],
    activation: Activation,
    seed: u64,
) -> Result<(SparseNet, RemovalReport)> {
    if widths.len() < 3 || sparsity.len() != widths.len() - 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 widths and one sparsity per layer, got {} and {}",
            widths.len(),
            sparsity.len()
        )));
    }
    let mut layers = Vec::with_capacity(sparsity.len());
    for (k, w) in widths.windows(2).enumerate() {
        let mask = random_sparse_mask(w[1], w[0], sparsity[k], seed.wrapping_add(k as u64 * 0x9E37_79B9))?;
        layers.push(SparseLayer::masked(DMatrix::zeros(w[1], w[0]), mask)?);
    }
    effective_subnetwork(&SparseNet::new(layers, activation)?)
}

/// Retries [`random_sparse_net`] on successive seeds.
pub fn random_effective_net(
    widths: &[usize],
    sparsity: &[f64],
    activation: Activation,
    seed: u64,
    attempts: usize,
) -> Result<(SparseNet, RemovalReport, u64)> {
    let mut last = None;
    for k in 0..attempts as u64 {
        match random_sparse_net(widths, sparsity, activation.clone(), seed + k) {
            Ok((net, rep)) => return Ok((net, rep, seed + k)),
            Err(e @ Error::NotEffective(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::InvalidArgument("zero attempts".into())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialClass {
    Valley,
    Escaped,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub seed: u64,
    /// Loss on the scale used for classification.
    pub final_loss: f64,
    pub class: TrialClass,
    pub stop: StopReason,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub center_loss: f64,
    pub count: usize,
    pub classification: TrialClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub n_trials: usize,
    pub trials: Vec<TrialRecord>,
    pub clusters: Vec<Cluster>,
}

/// Relative merge tolerance for loss clusters.
pub const CLUSTER_REL_TOL: f64 = 1e-3;
const CLUSTER_ABS_FLOOR: f64 = 1e-9;

impl TrialStats {
    pub fn from_records(mut trials: Vec<TrialRecord>) -> Self {
        trials.sort_by_key(|t| t.index);
        let mut order: Vec<&TrialRecord> = trials.iter().collect();
        order.sort_by(|a, b| a.class.cmp(&b.class).then(a.final_loss.total_cmp(&b.final_loss)));
        let mut clusters: Vec<(TrialClass, f64, f64, usize)> = Vec::new();
        for t in order {
            match clusters.last_mut() {
                Some((c, first, sum, n))
                    if *c == t.class
                        && ((t.final_loss - *first).abs() <= (CLUSTER_REL_TOL * first.abs()).max(CLUSTER_ABS_FLOOR)
                            || (t.final_loss.is_nan() && first.is_nan())) =>
                {
                    *sum += t.final_loss;
                    *n += 1;
                }
                _ => clusters.push((t.class, t.final_loss, t.final_loss, 1)),
            }
        }
        TrialStats {
            n_trials: trials.len(),
            clusters: clusters
                .into_iter()
                .map(|(c, _, sum, n)| Cluster {
                    center_loss: sum / n as f64,
                    count: n,
                    classification: c,
                })
                .collect(),
            trials,
        }
    }

    pub fn count(&self, class: TrialClass) -> usize {
        self.trials.iter().filter(|t| t.class == class).count()
    }

    pub fn fraction(&self, class: TrialClass) -> f64 {
        self.count(class) as f64 / self.n_trials.max(1) as f64
    }
}

/// Trains `n_trials` independent instances in parallel; trial `t` uses
/// seed `config_base.seed + t` for both the builder and the initialization.
/// `classify` maps the trained network and trace to a loss and a class.
pub fn run_trials<B, C>(builder: B, n_trials: usize, config_base: &TrainConfig, classify: C) -> Result<TrialStats>
where
    B: Fn(u64) -> Result<(SparseNet, Dataset)> + Sync,
    C: Fn(&SparseNet, &TrainTrace) -> (f64, TrialClass) + Sync,
{
    config_base.validate()?;
    let records: Result<Vec<TrialRecord>> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let seed = config_base.seed.wrapping_add(t as u64);
            let (net, data) = builder(seed)?;
            let config = TrainConfig {
                seed,
                ..config_base.clone()
            };
            let trace = gd_train(&net, &data, &config)?;
            let trained = trace.final_net(&net)?;
            let (final_loss, class) = classify(&trained, &trace);
            Ok(TrialRecord {
                index: t,
                seed,
                final_loss,
                class,
                stop: trace.stop,
                epochs: trace.epochs,
            })
        })
        .collect();
    Ok(TrialStats::from_records(records?))
}

/// Valley if the unhalved error sits at `y₄²` with `w₄ ≈ 0`; escaped if it
/// is at least 5% below; other otherwise.
pub fn classify_ss(sse: f64, w4: f64, y4: f64) -> TrialClass {
    let level = y4 * y4;
    if (sse - level).abs() <= 1e-3 * level && w4.abs() <= 1e-4 {
        TrialClass::Valley
    } else if sse < level * (1.0 - 0.05) {
        TrialClass::Escaped
    } else {
        TrialClass::Other
    }
}

/// `X = I₃` and the valley target for `y`.
pub fn ss_dataset(y: [f64; 4]) -> Dataset {
    let target = ss_target(y);
    Dataset {
        x: DMatrix::identity(3, 3),
        a_norm: target.norm(),
        y: target,
        seed: 0,
        noise: 0.0,
    }
}

/// Repeated GD on the sparse-sparse valley instance.
pub fn run_ss_trials(activation: Activation, y: [f64; 4], n_trials: usize, config: &TrainConfig) -> Result<TrialStats> {
    let template = ss_network(&[0.0; 8], activation);
    let data = ss_dataset(y);
    run_trials(
        |_| Ok((template.clone(), data.clone())),
        n_trials,
        config,
        |net, _| {
            let sse = 2.0 * net.loss(&data.x, &data.y).unwrap_or(f64::NAN);
            (sse, classify_ss(sse, ss_params(net)[3], y[3]))
        },
    )
}
