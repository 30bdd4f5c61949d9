//! A small self-contained image classifier: a fixed bank of eight
//! convolution kernels, ReLU, global average pooling, and a trainable
//! single-logit linear head, optimized with AdaDelta under binary
//! cross-entropy with weight decay.
//!
//! Only the head is trainable, so the training problem is convex, gradients
//! are exactly checkable, and the pooled+linear structure licenses
//! class-activation maps as saliency.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mildata::Label;
use crate::raster::{AugmentSpec, ImageTensor, Raster};
use crate::saliency::FeatureStack;
use crate::scalar::Scalar;
use crate::seeds::derive_seed;

/// Identifier of the built-in kernel bank, stored with serialized models.
pub const FILTER_BANK_ID: &str = "fixed8-v1";
/// Kernels in the built-in bank.
pub const FILTER_COUNT: usize = 8;

/// Fixed filter bank plus trainable linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniModel<S> {
    filters: Vec<Raster<S>>,
    head_weights: Vec<S>,
    head_bias: S,
}

impl<S: Scalar> MiniModel<S> {
    /// The built-in bank: two difference-of-Gaussians scales, four oriented
    /// edge kernels, a Laplacian, and a center-surround kernel — all with
    /// zero DC response — and a zero-initialized head.
    pub fn fixed8() -> Self {
        let to_raster = |side: usize, vals: Vec<f64>| {
            Raster::from_fn(side, side, |r, c| S::from_f64(vals[r * side + c]))
        };
        let filters = vec![
            to_raster(9, dog_kernel(9, 1.0, 2.0)),
            to_raster(11, dog_kernel(11, 1.6, 3.2)),
            to_raster(3, vec![-1.0, -2.0, -1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0]),
            to_raster(3, vec![-2.0, -1.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 2.0]),
            to_raster(3, vec![-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0]),
            to_raster(3, vec![0.0, -1.0, -2.0, 1.0, 0.0, -1.0, 2.0, 1.0, 0.0]),
            to_raster(3, vec![0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0]),
            to_raster(9, dog_kernel(9, 2.0, 1.0)),
        ];
        MiniModel { filters, head_weights: vec![S::zero(); FILTER_COUNT], head_bias: S::zero() }
    }

    /// Replaces the head parameters; the weight count must match the bank.
    pub fn with_head(mut self, weights: Vec<S>, bias: S) -> Result<Self> {
        if weights.len() != self.filters.len() {
            return Err(Error::invalid(format!(
                "{} head weights for {} kernels",
                weights.len(),
                self.filters.len()
            )));
        }
        self.head_weights = weights;
        self.head_bias = bias;
        Ok(self)
    }

    pub fn head_weights(&self) -> &[S] {
        &self.head_weights
    }

    pub fn head_bias(&self) -> S {
        self.head_bias
    }

    pub fn filters(&self) -> &[Raster<S>] {
        &self.filters
    }

    /// Smallest image side `forward` accepts: the largest kernel side.
    pub fn min_input_side(&self) -> usize {
        self.filters.iter().map(|k| k.height()).max().unwrap_or(1)
    }

    /// Full forward pass: rectified feature maps at image resolution, their
    /// per-channel means, and the head's sigmoid probability. Works for any
    /// input size no smaller than the largest kernel.
    pub fn forward(&self, img: &ImageTensor<S>) -> Result<(FeatureStack<S>, Vec<S>, S)> {
        let maps = self.feature_maps(img)?;
        let (h, w) = maps[0].dims();
        let stack = FeatureStack::from_fn(h, w, maps.len(), |i, j, ch| maps[ch].get(i, j));
        let pooled: Vec<S> = maps.iter().map(raster_mean).collect();
        let prob = self.predict_pooled(&pooled);
        Ok((stack, pooled, prob))
    }

    /// The pooled feature vector alone, skipping stack assembly.
    pub fn pooled_features(&self, img: &ImageTensor<S>) -> Result<Vec<S>> {
        Ok(self.feature_maps(img)?.iter().map(raster_mean).collect())
    }

    /// Head probability for an already-pooled feature vector.
    pub fn predict_pooled(&self, pooled: &[S]) -> S {
        sigmoid(self.logit(pooled))
    }

    fn logit(&self, pooled: &[S]) -> S {
        self.head_weights
            .iter()
            .zip(pooled)
            .map(|(&w, &x)| w * x)
            .sum::<S>()
            + self.head_bias
    }

    fn feature_maps(&self, img: &ImageTensor<S>) -> Result<Vec<Raster<S>>> {
        let min_side = self.min_input_side();
        if img.height() < min_side || img.width() < min_side {
            return Err(Error::invalid(format!(
                "image {}x{} is smaller than the largest kernel ({min_side})",
                img.height(),
                img.width()
            )));
        }
        let lum = img.luminance();
        let margin = min_side / 2;
        let padded = pad_replicate(&lum, margin);
        let (h, w) = lum.dims();
        self.filters
            .iter()
            .map(|k| {
                let mut m = conv_padded(&padded, margin, h, w, k);
                relu_in_place(&mut m);
                Ok(m)
            })
            .collect()
    }
}

fn relu_in_place<S: Scalar>(m: &mut Raster<S>) {
    let (h, w) = m.dims();
    for r in 0..h {
        for c in 0..w {
            let v = m.get(r, c);
            if v < S::zero() {
                m.set(r, c, S::zero());
            }
        }
    }
}

fn raster_mean<S: Scalar>(m: &Raster<S>) -> S {
    let sum: S = m.as_slice().iter().copied().sum();
    sum / S::from_usize(m.as_slice().len())
}

/// Numerically stable logistic function.
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

fn gaussian_kernel(side: usize, sigma: f64) -> Vec<f64> {
    let c = (side / 2) as f64;
    let mut v = Vec::with_capacity(side * side);
    let mut sum = 0.0;
    for r in 0..side {
        for col in 0..side {
            let d2 = (r as f64 - c).powi(2) + (col as f64 - c).powi(2);
            let g = (-d2 / (2.0 * sigma * sigma)).exp();
            sum += g;
            v.push(g);
        }
    }
    for g in &mut v {
        *g /= sum;
    }
    v
}

/// Difference of two unit-sum Gaussians: zero net response on constants.
fn dog_kernel(side: usize, sigma_center: f64, sigma_surround: f64) -> Vec<f64> {
    let a = gaussian_kernel(side, sigma_center);
    let b = gaussian_kernel(side, sigma_surround);
    a.iter().zip(&b).map(|(x, y)| x - y).collect()
}

fn pad_replicate<S: Scalar>(src: &Raster<S>, margin: usize) -> Raster<S> {
    let (h, w) = src.dims();
    Raster::from_fn(h + 2 * margin, w + 2 * margin, |r, c| {
        src.get(r.saturating_sub(margin).min(h - 1), c.saturating_sub(margin).min(w - 1))
    })
}

/// Correlates an already-padded buffer with an odd-sided kernel, producing
/// the h×w output. `margin` is the padding on each side of the buffer.
fn conv_padded<S: Scalar>(
    padded: &Raster<S>,
    margin: usize,
    h: usize,
    w: usize,
    kernel: &Raster<S>,
) -> Raster<S> {
    let (kh, kw) = kernel.dims();
    let (off_r, off_c) = (margin - kh / 2, margin - kw / 2);
    let mut out = vec![S::zero(); h * w];
    for r in 0..h {
        let orow = &mut out[r * w..(r + 1) * w];
        for u in 0..kh {
            let prow = padded.row(r + off_r + u);
            let krow = kernel.row(u);
            for (v, &kv) in krow.iter().enumerate() {
                if kv == S::zero() {
                    continue;
                }
                let shifted = &prow[off_c + v..off_c + v + w];
                for (o, &p) in orow.iter_mut().zip(shifted) {
                    *o += kv * p;
                }
            }
        }
    }
    Raster::new(h, w, out).expect("convolution of finite inputs is finite")
}

/// Same-size 2-D correlation with edge-replicate padding. The kernel must be
/// odd-sided and no larger than the input.
pub fn conv2d_replicate<S: Scalar>(input: &Raster<S>, kernel: &Raster<S>) -> Result<Raster<S>> {
    let (h, w) = input.dims();
    let (kh, kw) = kernel.dims();
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::invalid("kernel sides must be odd"));
    }
    if kh > h || kw > w {
        return Err(Error::invalid(format!(
            "input {h}x{w} is smaller than kernel {kh}x{kw}"
        )));
    }
    let margin = kh.max(kw) / 2;
    let padded = pad_replicate(input, margin);
    Ok(conv_padded(&padded, margin, h, w, kernel))
}

/// Mean binary cross-entropy over the batch plus `weight_decay`·‖w‖², with
/// analytic gradients. The loss is computed from the logit in softplus form,
/// which equals the probability-clipped cross-entropy everywhere inside the
/// clip range and stays finite outside it; the bias is not decayed.
///
/// Returns (loss, d/dweights, d/dbias).
pub fn loss_and_grad_pooled<S: Scalar>(
    weights: &[S],
    bias: S,
    batch: &[(Vec<S>, S)],
    weight_decay: S,
) -> Result<(S, Vec<S>, S)> {
    if batch.is_empty() {
        return Err(Error::invalid("batch must be non-empty"));
    }
    let n = S::from_usize(batch.len());
    let mut loss = S::zero();
    let mut grad_w = vec![S::zero(); weights.len()];
    let mut grad_b = S::zero();
    for (pooled, y) in batch {
        debug_assert_eq!(pooled.len(), weights.len());
        let x: S = weights.iter().zip(pooled).map(|(&w, &f)| w * f).sum::<S>() + bias;
        // softplus(x) - y*x == -[y ln p + (1-y) ln(1-p)] for p = sigmoid(x)
        let softplus = x.max(S::zero()) + (-x.abs()).exp().ln_1p();
        loss += softplus - *y * x;
        let resid = sigmoid(x) - *y;
        for (g, &f) in grad_w.iter_mut().zip(pooled) {
            *g += resid * f;
        }
        grad_b += resid;
    }
    loss /= n;
    grad_b /= n;
    let two = S::from_f64(2.0);
    for (g, &w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + two * weight_decay * w;
    }
    loss += weight_decay * weights.iter().map(|&w| w * w).sum::<S>();
    Ok((loss, grad_w, grad_b))
}

/// `loss_and_grad_pooled` over whole images: pools each image through the
/// model first.
pub fn loss_and_grad<S: Scalar>(
    model: &MiniModel<S>,
    batch: &[(ImageTensor<S>, Label)],
    weight_decay: S,
) -> Result<(S, Vec<S>, S)> {
    if batch.is_empty() {
        return Err(Error::invalid("batch must be non-empty"));
    }
    let pooled: Vec<(Vec<S>, S)> = batch
        .iter()
        .map(|(img, label)| Ok((model.pooled_features(img)?, label.y())))
        .collect::<Result<_>>()?;
    loss_and_grad_pooled(&model.head_weights, model.head_bias, &pooled, weight_decay)
}

/// AdaDelta accumulators and hyperparameters for one flat parameter vector.
///
/// `weight_decay` is carried here for convenience but is consumed by the
/// loss (it is part of the objective); the step itself never re-applies it.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaDeltaState<S> {
    pub rho: S,
    pub eps: S,
    /// Global multiplier on the AdaDelta update.
    pub lr: S,
    pub weight_decay: S,
    acc_grad_sq: Vec<S>,
    acc_update_sq: Vec<S>,
}

impl<S: Scalar> AdaDeltaState<S> {
    /// Defaults: rho 0.95, eps 1e-6, lr 0.1, weight decay 0.0005.
    pub fn new(n_params: usize) -> Self {
        AdaDeltaState {
            rho: S::from_f64(0.95),
            eps: S::from_f64(1e-6),
            lr: S::from_f64(0.1),
            weight_decay: S::from_f64(5e-4),
            acc_grad_sq: vec![S::zero(); n_params],
            acc_update_sq: vec![S::zero(); n_params],
        }
    }

    pub fn with_lr(mut self, lr: S) -> Self {
        self.lr = lr;
        self
    }

    pub fn with_weight_decay(mut self, wd: S) -> Self {
        self.weight_decay = wd;
        self
    }

    pub fn acc_grad_sq(&self) -> &[S] {
        &self.acc_grad_sq
    }

    pub fn acc_update_sq(&self) -> &[S] {
        &self.acc_update_sq
    }
}

/// One AdaDelta update, in place:
/// acc_g ← ρ·acc_g + (1−ρ)g²; Δ = −(√(acc_u+ε)/√(acc_g+ε))·g;
/// acc_u ← ρ·acc_u + (1−ρ)Δ²; param += lr·Δ.
pub fn adadelta_step<S: Scalar>(
    state: &mut AdaDeltaState<S>,
    params: &mut [S],
    grads: &[S],
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.acc_grad_sq.len() {
        return Err(Error::invalid(format!(
            "{} params, {} grads, {} accumulators",
            params.len(),
            grads.len(),
            state.acc_grad_sq.len()
        )));
    }
    let one = S::one();
    for i in 0..params.len() {
        let g = grads[i];
        state.acc_grad_sq[i] = state.rho * state.acc_grad_sq[i] + (one - state.rho) * g * g;
        let delta = -((state.acc_update_sq[i] + state.eps).sqrt()
            / (state.acc_grad_sq[i] + state.eps).sqrt())
            * g;
        state.acc_update_sq[i] = state.rho * state.acc_update_sq[i] + (one - state.rho) * delta * delta;
        params[i] += state.lr * delta;
    }
    Ok(())
}

/// Minibatch training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// At most 128.
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Draw a fresh augmentation per sample per epoch.
    pub augment: bool,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub lr: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            epochs: 60,
            seed: 0,
            augment: false,
            patience: 10,
            lr: 0.1,
            weight_decay: 5e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > 128 {
            return Err(Error::invalid(format!(
                "batch size {} outside [1, 128]",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Writes the training log as CSV with a fixed header.
pub fn write_training_log(log: &[EpochLog], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
    for e in log {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// A uniformly drawn augmentation: zoom in [0.6, 1.4], rotation a multiple
/// of 15 in [0, 360), independent flips, translation in [-4, 4]².
pub fn random_augment_spec(rng: &mut impl Rng) -> AugmentSpec {
    AugmentSpec {
        zoom: rng.gen_range(0.6..=1.4),
        rotation_deg: 15 * rng.gen_range(0u32..24),
        flip_h: rng.gen_bool(0.5),
        flip_v: rng.gen_bool(0.5),
        translate_px: (rng.gen_range(-4i32..=4), rng.gen_range(-4i32..=4)),
    }
}

/// Trains the head on whole images, starting from `init`'s parameters, and
/// returns the model whose parameters had the best validation loss along
/// with the per-epoch log. With an empty validation set the training metrics
/// stand in for validation. Features are standardized internally per
/// training-set statistics; the returned head is folded back to raw feature
/// space, so the model evaluates unchanged inputs.
pub fn train<S: Scalar>(
    init: &MiniModel<S>,
    train_set: &[(ImageTensor<S>, Label)],
    val_set: &[(ImageTensor<S>, Label)],
    config: &TrainConfig,
) -> Result<(MiniModel<S>, Vec<EpochLog>)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let pool_all = |set: &[(ImageTensor<S>, Label)]| -> Result<Vec<(Vec<S>, S)>> {
        set.iter()
            .map(|(img, label)| Ok((init.pooled_features(img)?, label.y())))
            .collect()
    };
    let base_train = pool_all(train_set)?;
    let val = pool_all(val_set)?;

    let (w, b, log) = if config.augment {
        let seed = config.seed;
        let model = init.clone();
        let images: Vec<(&ImageTensor<S>, S)> =
            train_set.iter().map(|(img, l)| (img, l.y())).collect();
        run_training(
            init.head_weights(),
            init.head_bias(),
            &base_train,
            &val,
            config,
            move |epoch| {
                let mut out = Vec::with_capacity(images.len());
                for (idx, (img, y)) in images.iter().enumerate() {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        seed,
                        (epoch as u64) << 32 | idx as u64,
                    ));
                    let spec = random_augment_spec(&mut rng);
                    let augmented = img.augment(&spec, S::zero())?;
                    out.push((model.pooled_features(&augmented)?, *y));
                }
                Ok(out)
            },
        )?
    } else {
        let feats = base_train.clone();
        run_training(
            init.head_weights(),
            init.head_bias(),
            &base_train,
            &val,
            config,
            move |_| Ok(feats.clone()),
        )?
    };
    let trained = init.clone().with_head(w, b)?;
    Ok((trained, log))
}

/// Trains the linear head directly on pooled feature vectors; same contract
/// as [`train`] but with features supplied by the caller. Targets are 0/1.
pub fn train_on_pooled<S: Scalar>(
    init_weights: &[S],
    init_bias: S,
    train_set: &[(Vec<S>, S)],
    val_set: &[(Vec<S>, S)],
    config: &TrainConfig,
) -> Result<(Vec<S>, S, Vec<EpochLog>)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let feats = train_set.to_vec();
    run_training(init_weights, init_bias, train_set, val_set, config, move |_| Ok(feats.clone()))
}

/// Core minibatch loop over per-epoch feature providers.
///
/// `stats_source` fixes the standardization statistics (mean/std per
/// feature); `epoch_features` yields that epoch's raw training features.
/// Initial parameters are mapped into standardized space, and the best
/// parameters by validation loss are folded back to raw space on return.
fn run_training<S: Scalar>(
    init_weights: &[S],
    init_bias: S,
    stats_source: &[(Vec<S>, S)],
    val_set: &[(Vec<S>, S)],
    config: &TrainConfig,
    mut epoch_features: impl FnMut(usize) -> Result<Vec<(Vec<S>, S)>>,
) -> Result<(Vec<S>, S, Vec<EpochLog>)> {
    let n_feat = init_weights.len();
    let (mu, sigma) = feature_stats(stats_source, n_feat);
    let standardize = |set: &[(Vec<S>, S)]| -> Vec<(Vec<S>, S)> {
        set.iter()
            .map(|(f, y)| {
                let z = f
                    .iter()
                    .zip(mu.iter().zip(&sigma))
                    .map(|(&v, (&m, &s))| (v - m) / s)
                    .collect();
                (z, *y)
            })
            .collect()
    };
    let val_std = standardize(val_set);

    // Map the incoming raw-space head into standardized space so training
    // continues the same decision function.
    let mut w: Vec<S> = init_weights.iter().zip(&sigma).map(|(&wi, &s)| wi * s).collect();
    let mut b = init_bias
        + init_weights
            .iter()
            .zip(&mu)
            .map(|(&wi, &m)| wi * m)
            .sum::<S>();

    let wd = S::from_f64(config.weight_decay);
    let mut state = AdaDeltaState::new(n_feat + 1)
        .with_lr(S::from_f64(config.lr))
        .with_weight_decay(wd);

    let mut log = Vec::with_capacity(config.epochs);
    let mut best = (w.clone(), b);
    let mut best_val = f64::INFINITY;
    let mut stale = 0usize;

    for epoch in 1..=config.epochs {
        let feats = standardize(&epoch_features(epoch)?);
        let mut order: Vec<usize> = (0..feats.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, epoch as u64));
        order.shuffle(&mut rng);

        for chunk in order.chunks(config.batch_size.min(feats.len())) {
            let batch: Vec<(Vec<S>, S)> =
                chunk.iter().map(|&i| feats[i].clone()).collect();
            let (_, gw, gb) = loss_and_grad_pooled(&w, b, &batch, wd)?;
            let mut params: Vec<S> = w.iter().copied().chain([b]).collect();
            let grads: Vec<S> = gw.iter().copied().chain([gb]).collect();
            adadelta_step(&mut state, &mut params, &grads)?;
            b = params.pop().expect("bias present");
            w = params;
        }

        let (train_loss, train_acc) = set_metrics(&w, b, &feats, wd)?;
        let (val_loss, val_acc) = if val_std.is_empty() {
            (train_loss, train_acc)
        } else {
            set_metrics(&w, b, &val_std, wd)?
        };
        log.push(EpochLog {
            epoch,
            train_loss: train_loss.to_f64(),
            train_acc: train_acc.to_f64(),
            val_loss: val_loss.to_f64(),
            val_acc: val_acc.to_f64(),
        });

        if val_loss.to_f64() < best_val {
            best_val = val_loss.to_f64();
            best = (w.clone(), b);
            stale = 0;
        } else {
            stale += 1;
            if stale > config.patience {
                break;
            }
        }
    }

    // Fold standardization into the head: the returned parameters act on raw
    // pooled features.
    let (bw, bb) = best;
    let folded_w: Vec<S> = bw.iter().zip(&sigma).map(|(&wi, &s)| wi / s).collect();
    let folded_b = bb
        - folded_w
            .iter()
            .zip(&mu)
            .map(|(&wi, &m)| wi * m)
            .sum::<S>();
    Ok((folded_w, folded_b, log))
}

fn feature_stats<S: Scalar>(set: &[(Vec<S>, S)], n_feat: usize) -> (Vec<S>, Vec<S>) {
    let n = S::from_usize(set.len().max(1));
    let mut mu = vec![S::zero(); n_feat];
    for (f, _) in set {
        for (m, &v) in mu.iter_mut().zip(f) {
            *m += v;
        }
    }
    for m in &mut mu {
        *m /= n;
    }
    let mut var = vec![S::zero(); n_feat];
    for (f, _) in set {
        for ((v, &x), &m) in var.iter_mut().zip(f).zip(&mu) {
            let d = x - m;
            *v += d * d;
        }
    }
    let floor = S::from_f64(1e-8);
    let sigma = var.iter().map(|&v| (v / n).sqrt().max(floor)).collect();
    (mu, sigma)
}

fn set_metrics<S: Scalar>(
    w: &[S],
    b: S,
    set: &[(Vec<S>, S)],
    wd: S,
) -> Result<(S, S)> {
    let (loss, _, _) = loss_and_grad_pooled(w, b, set, wd)?;
    let half = S::half();
    let correct = set
        .iter()
        .filter(|(f, y)| {
            let x: S = w.iter().zip(f).map(|(&wi, &fi)| wi * fi).sum::<S>() + b;
            let predicted_pos = sigmoid(x) >= half;
            predicted_pos == (*y >= half)
        })
        .count();
    Ok((loss, S::from_usize(correct) / S::from_usize(set.len())))
}

/// On-disk model format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    filter_bank_id: String,
    head_weights: Vec<f64>,
    head_bias: f64,
    training_meta: TrainingMeta,
}

/// Provenance stored alongside the head parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingMeta {
    /// What the head was trained on (e.g. "bags", "instances", "untrained").
    pub role: String,
    pub seed: u64,
    pub epochs_run: usize,
    pub best_val_loss: f64,
}

pub fn save_model<S: Scalar>(
    model: &MiniModel<S>,
    meta: &TrainingMeta,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = ModelFile {
        filter_bank_id: FILTER_BANK_ID.to_string(),
        head_weights: model.head_weights.iter().map(|&w| Scalar::to_f64(w)).collect(),
        head_bias: model.head_bias.to_f64(),
        training_meta: meta.clone(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::format(path, format!("serializing model: {e}")))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_model<S: Scalar>(path: impl AsRef<Path>) -> Result<(MiniModel<S>, TrainingMeta)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile =
        serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
    if file.filter_bank_id != FILTER_BANK_ID {
        return Err(Error::format(
            path,
            format!("unknown filter bank '{}'", file.filter_bank_id),
        ));
    }
    let model = MiniModel::fixed8().with_head(
        file.head_weights.iter().map(|&w| S::from_f64(w)).collect(),
        S::from_f64(file.head_bias),
    )?;
    Ok((model, file.training_meta))
}
