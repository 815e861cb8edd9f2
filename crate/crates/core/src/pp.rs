//! Pose prediction stream.
//!
//! One-step forecasting of frame T+1 from the previous T frames, split into a
//! local branch and a global branch. The local branch is a recurrent
//! variational model over flattened keypoints: encoder LSTM, latent mean and
//! log-variance projections with reparameterized sampling during training,
//! and a one-step LSTM decoder started from the encoder state. The global
//! branch forecasts the center point (keypoint mean) with two cascaded LSTM
//! cells. A frame's anomaly score is its squared forecast error: center term
//! plus summed keypoint terms.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{normalize_frames, PoseFrame, PoseSequence, Window};
use crate::error::{Error, Result};
use crate::numkit::ops::add_assign;
use crate::numkit::{
    cell_backward, cell_forward_cached, Linear, LinearGrads, LstmCache, LstmGrads, LstmParams,
};
use crate::pr::TrainMeta;
use crate::seeds;
use crate::train_loop::{run_training, FlatParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpHyper {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    /// Weight of the optional KL regularizer; 0 trains on the pure MSE terms.
    pub kl_weight: f64,
    pub seed: u64,
}

impl Default for PpHyper {
    fn default() -> Self {
        PpHyper {
            lr: 0.004,
            batch_size: 60,
            epochs: 15,
            hidden_dim: 64,
            latent_dim: 16,
            kl_weight: 0.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpModel {
    pub k: usize,
    pub d: usize,
    pub t: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub global_hidden: usize,
    pub encoder: LstmParams,
    pub mu_proj: Linear,
    pub logvar_proj: Linear,
    pub decoder: LstmParams,
    pub output_proj: Linear,
    pub global1: LstmParams,
    pub global2: LstmParams,
    pub center_proj: Linear,
    pub kl_weight: f64,
    /// When set, the latent sample is the mean and outputs are pure
    /// functions of the input. Required for scoring.
    pub deterministic: bool,
    pub meta: TrainMeta,
}

/// Mean of a frame's K keypoints, one value per coordinate axis.
pub type CenterPoint = Vec<f64>;

/// Arithmetic mean of a frame's keypoints, one value per coordinate axis.
pub fn center_of(frame: &PoseFrame) -> CenterPoint {
    let mut c = vec![0.0; frame.d];
    for j in 0..frame.k {
        for (a, v) in c.iter_mut().enumerate() {
            *v += frame.coord(j, a);
        }
    }
    for v in &mut c {
        *v /= frame.k as f64;
    }
    c
}

impl PpModel {
    pub fn init(
        k: usize,
        d: usize,
        t: usize,
        hidden_dim: usize,
        latent_dim: usize,
        kl_weight: f64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, "pp-init"));
        let kd = k * d;
        let gh = (hidden_dim / 2).max(8);
        PpModel {
            k,
            d,
            t,
            hidden_dim,
            latent_dim,
            global_hidden: gh,
            encoder: LstmParams::xavier(kd, hidden_dim, &mut rng),
            mu_proj: Linear::xavier(latent_dim, hidden_dim, &mut rng),
            logvar_proj: Linear::xavier(latent_dim, hidden_dim, &mut rng),
            decoder: LstmParams::xavier(latent_dim, hidden_dim, &mut rng),
            output_proj: Linear::xavier(kd, hidden_dim, &mut rng),
            global1: LstmParams::xavier(d, gh, &mut rng),
            global2: LstmParams::xavier(gh, gh, &mut rng),
            center_proj: Linear::xavier(d, gh, &mut rng),
            kl_weight,
            deterministic: true,
            meta: TrainMeta { epochs_run: 0, final_loss: None, seed },
        }
    }

    fn check_history(&self, history: &[PoseFrame]) -> Result<()> {
        if history.len() != self.t {
            return Err(Error::Usage(format!(
                "history has {} frames, model forecasts from {}",
                history.len(),
                self.t
            )));
        }
        let f = &history[0];
        if f.k != self.k || f.d != self.d {
            return Err(Error::Dimension(format!(
                "frames are K={} d={}, model expects K={} d={}",
                f.k, f.d, self.k, self.d
            )));
        }
        Ok(())
    }
}

impl PpModel {
    /// Trainable parameters flattened in a fixed order.
    pub fn params_flat(&self) -> Vec<f64> {
        self.to_flat()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        self.load_flat(flat);
    }
}

impl FlatParams for PpModel {
    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.encoder.write_flat(&mut out);
        self.mu_proj.write_flat(&mut out);
        self.logvar_proj.write_flat(&mut out);
        self.decoder.write_flat(&mut out);
        self.output_proj.write_flat(&mut out);
        self.global1.write_flat(&mut out);
        self.global2.write_flat(&mut out);
        self.center_proj.write_flat(&mut out);
        out
    }

    fn load_flat(&mut self, flat: &[f64]) {
        let mut pos = 0;
        self.encoder.read_flat(flat, &mut pos);
        self.mu_proj.read_flat(flat, &mut pos);
        self.logvar_proj.read_flat(flat, &mut pos);
        self.decoder.read_flat(flat, &mut pos);
        self.output_proj.read_flat(flat, &mut pos);
        self.global1.read_flat(flat, &mut pos);
        self.global2.read_flat(flat, &mut pos);
        self.center_proj.read_flat(flat, &mut pos);
        debug_assert_eq!(pos, flat.len());
    }
}

struct PpGrads {
    encoder: LstmGrads,
    mu_proj: LinearGrads,
    logvar_proj: LinearGrads,
    decoder: LstmGrads,
    output_proj: LinearGrads,
    global1: LstmGrads,
    global2: LstmGrads,
    center_proj: LinearGrads,
}

impl PpGrads {
    fn zeros_like(m: &PpModel) -> Self {
        PpGrads {
            encoder: LstmGrads::zeros_like(&m.encoder),
            mu_proj: LinearGrads::zeros_like(&m.mu_proj),
            logvar_proj: LinearGrads::zeros_like(&m.logvar_proj),
            decoder: LstmGrads::zeros_like(&m.decoder),
            output_proj: LinearGrads::zeros_like(&m.output_proj),
            global1: LstmGrads::zeros_like(&m.global1),
            global2: LstmGrads::zeros_like(&m.global2),
            center_proj: LinearGrads::zeros_like(&m.center_proj),
        }
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.encoder.write_flat(&mut out);
        self.mu_proj.write_flat(&mut out);
        self.logvar_proj.write_flat(&mut out);
        self.decoder.write_flat(&mut out);
        self.output_proj.write_flat(&mut out);
        self.global1.write_flat(&mut out);
        self.global2.write_flat(&mut out);
        self.center_proj.write_flat(&mut out);
        out
    }
}

struct Forward {
    enc_caches: Vec<LstmCache>,
    enc_h: Vec<f64>,
    mu: Vec<f64>,
    logvar: Vec<f64>,
    eps: Option<Vec<f64>>,
    dec_cache: LstmCache,
    dec_h: Vec<f64>,
    g1_caches: Vec<LstmCache>,
    g2_caches: Vec<LstmCache>,
    g2_h: Vec<f64>,
    pred_pose: Vec<f64>,
    pred_center: Vec<f64>,
}

/// Forward pass over a T-frame history. With `eps` the latent is the
/// reparameterized sample mu + exp(logvar/2) * eps; without it the mean.
fn forward(model: &PpModel, history: &[PoseFrame], eps: Option<Vec<f64>>) -> Result<Forward> {
    let h = model.hidden_dim;
    let gh = model.global_hidden;

    let mut enc_caches = Vec::with_capacity(model.t);
    let mut hs = vec![0.0; h];
    let mut cs = vec![0.0; h];
    for f in history {
        let (h2, c2, cache) = cell_forward_cached(&model.encoder, &f.keypoints, &hs, &cs)?;
        enc_caches.push(cache);
        hs = h2;
        cs = c2;
    }

    let mu = model.mu_proj.forward(&hs)?;
    let logvar = model.logvar_proj.forward(&hs)?;
    let z: Vec<f64> = match &eps {
        Some(e) => {
            if e.len() != model.latent_dim {
                return Err(Error::Dimension(format!(
                    "noise has {} entries, latent dim is {}",
                    e.len(),
                    model.latent_dim
                )));
            }
            mu.iter()
                .zip(&logvar)
                .zip(e)
                .map(|((m, lv), n)| m + (0.5 * lv).exp() * n)
                .collect()
        }
        None => mu.clone(),
    };

    // The decoder starts from a zero state; everything the prediction uses
    // must pass through the latent.
    let zero_h = vec![0.0; h];
    let zero_c = vec![0.0; h];
    let (dec_h, _dec_c, dec_cache) = cell_forward_cached(&model.decoder, &z, &zero_h, &zero_c)?;
    let pred_pose = model.output_proj.forward(&dec_h)?;

    let mut g1_caches = Vec::with_capacity(model.t);
    let mut g2_caches = Vec::with_capacity(model.t);
    let mut h1 = vec![0.0; gh];
    let mut c1 = vec![0.0; gh];
    let mut h2 = vec![0.0; gh];
    let mut c2 = vec![0.0; gh];
    for f in history {
        let center = center_of(f);
        let (h1n, c1n, cache1) = cell_forward_cached(&model.global1, &center, &h1, &c1)?;
        let (h2n, c2n, cache2) = cell_forward_cached(&model.global2, &h1n, &h2, &c2)?;
        g1_caches.push(cache1);
        g2_caches.push(cache2);
        h1 = h1n;
        c1 = c1n;
        h2 = h2n;
        c2 = c2n;
    }
    let pred_center = model.center_proj.forward(&h2)?;

    Ok(Forward {
        enc_caches,
        enc_h: hs,
        mu,
        logvar,
        eps,
        dec_cache,
        dec_h,
        g2_h: h2,
        g1_caches,
        g2_caches,
        pred_pose,
        pred_center,
    })
}

/// Forecasts the next frame's keypoints and center from a T-frame history of
/// normalized frames. Requires deterministic-inference mode.
pub fn predict_pose(model: &PpModel, history: &[PoseFrame]) -> Result<(Vec<f64>, CenterPoint)> {
    if !model.deterministic {
        return Err(Error::Usage(
            "prediction requires deterministic-inference mode".into(),
        ));
    }
    model.check_history(history)?;
    let f = forward(model, history, None)?;
    Ok((f.pred_pose, f.pred_center))
}

/// Forecast-error score: squared center error plus summed squared keypoint
/// errors against the target frame.
pub fn score_from_prediction(
    pred_pose: &[f64],
    pred_center: &[f64],
    target: &PoseFrame,
) -> Result<f64> {
    if pred_pose.len() != target.k * target.d || pred_center.len() != target.d {
        return Err(Error::Dimension(format!(
            "prediction has {} pose and {} center coordinates; target needs {} and {}",
            pred_pose.len(),
            pred_center.len(),
            target.k * target.d,
            target.d
        )));
    }
    let target_center = center_of(target);
    let center_err: f64 = pred_center
        .iter()
        .zip(&target_center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let pose_err: f64 = pred_pose
        .iter()
        .zip(&target.keypoints)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(center_err + pose_err)
}

/// Scores one frame against its T-frame history.
pub fn score_pp(model: &PpModel, history: &[PoseFrame], target: &PoseFrame) -> Result<f64> {
    let (pose, center) = predict_pose(model, history)?;
    score_from_prediction(&pose, &center, target)
}

fn kl_divergence(mu: &[f64], logvar: &[f64]) -> f64 {
    mu.iter()
        .zip(logvar)
        .map(|(m, lv)| 0.5 * (m * m + lv.exp() - 1.0 - lv))
        .sum()
}

/// Loss of one training window (T history frames + 1 target): the forecast
/// error terms plus the optional KL regularizer.
pub fn window_loss(model: &PpModel, window: &Window) -> Result<f64> {
    let (history, target) = split_window(window)?;
    model.check_history(history)?;
    let f = forward(model, history, None)?;
    let mse = score_from_prediction(&f.pred_pose, &f.pred_center, target)?;
    Ok(mse + model.kl_weight * kl_divergence(&f.mu, &f.logvar))
}

fn split_window(window: &Window) -> Result<(&[PoseFrame], &PoseFrame)> {
    if window.t() < 3 {
        return Err(Error::Usage(format!(
            "prediction windows need at least 3 frames (T >= 2 plus target), got {}",
            window.t()
        )));
    }
    let (target, history) = window.frames.split_last().expect("non-empty window");
    Ok((history, target))
}

/// Backward pass for one training window; accumulates gradients scaled by
/// `scale` and returns the window's un-averaged loss.
fn backward(
    model: &PpModel,
    window: &Window,
    eps: Option<Vec<f64>>,
    grads: &mut PpGrads,
    scale: f64,
) -> Result<f64> {
    let (history, target) = split_window(window)?;
    model.check_history(history)?;
    let f = forward(model, history, eps)?;

    let target_center = center_of(target);
    let mut loss = 0.0;

    let mut d_pose = Vec::with_capacity(f.pred_pose.len());
    for (a, b) in f.pred_pose.iter().zip(&target.keypoints) {
        let e = a - b;
        loss += e * e;
        d_pose.push(2.0 * e * scale);
    }
    let mut d_center = Vec::with_capacity(f.pred_center.len());
    for (a, b) in f.pred_center.iter().zip(&target_center) {
        let e = a - b;
        loss += e * e;
        d_center.push(2.0 * e * scale);
    }
    if model.kl_weight != 0.0 {
        loss += model.kl_weight * kl_divergence(&f.mu, &f.logvar);
    }

    // Local branch: output projection -> decoder -> latent -> encoder final.
    let mut d_dec_h = vec![0.0; model.hidden_dim];
    model.output_proj.backward(&f.dec_h, &d_pose, &mut grads.output_proj, &mut d_dec_h)?;

    let zero_c = vec![0.0; model.hidden_dim];
    let (dz, _dh_zero, _dc_zero) =
        cell_backward(&model.decoder, &f.dec_cache, &d_dec_h, &zero_c, &mut grads.decoder)?;
    let mut d_enc_h = vec![0.0; model.hidden_dim];
    let d_enc_c = vec![0.0; model.hidden_dim];

    let mut d_mu = dz.clone();
    let mut d_logvar = vec![0.0; model.latent_dim];
    if let Some(e) = &f.eps {
        for k in 0..model.latent_dim {
            d_logvar[k] = dz[k] * e[k] * 0.5 * (0.5 * f.logvar[k]).exp();
        }
    }
    if model.kl_weight != 0.0 {
        for k in 0..model.latent_dim {
            d_mu[k] += scale * model.kl_weight * f.mu[k];
            d_logvar[k] += scale * model.kl_weight * 0.5 * (f.logvar[k].exp() - 1.0);
        }
    }
    model.mu_proj.backward(&f.enc_h, &d_mu, &mut grads.mu_proj, &mut d_enc_h)?;
    model.logvar_proj.backward(&f.enc_h, &d_logvar, &mut grads.logvar_proj, &mut d_enc_h)?;

    let mut dh = d_enc_h;
    let mut dc = d_enc_c;
    for cache in f.enc_caches.iter().rev() {
        let (_dx, dh_prev, dc_prev) = cell_backward(&model.encoder, cache, &dh, &dc, &mut grads.encoder)?;
        dh = dh_prev;
        dc = dc_prev;
    }

    // Global branch: center projection -> stacked cells.
    let gh = model.global_hidden;
    let mut dh2 = vec![0.0; gh];
    model.center_proj.backward(&f.g2_h, &d_center, &mut grads.center_proj, &mut dh2)?;
    let mut dc2 = vec![0.0; gh];
    let mut dh1 = vec![0.0; gh];
    let mut dc1 = vec![0.0; gh];
    for step in (0..history.len()).rev() {
        let (dx2, dh2_prev, dc2_prev) =
            cell_backward(&model.global2, &f.g2_caches[step], &dh2, &dc2, &mut grads.global2)?;
        let mut dh1_total = dh1;
        add_assign(&mut dh1_total, &dx2);
        let (_dx1, dh1_prev, dc1_prev) =
            cell_backward(&model.global1, &f.g1_caches[step], &dh1_total, &dc1, &mut grads.global1)?;
        dh2 = dh2_prev;
        dc2 = dc2_prev;
        dh1 = dh1_prev;
        dc1 = dc1_prev;
    }

    Ok(loss)
}

/// Un-averaged deterministic-mode loss and flat gradient for one window, for
/// gradient checking.
pub fn window_loss_and_grad(model: &PpModel, window: &Window) -> Result<(f64, Vec<f64>)> {
    let mut grads = PpGrads::zeros_like(model);
    let loss = backward(model, window, None, &mut grads, 1.0)?;
    Ok((loss, grads.to_flat()))
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on uniform draws; u1 in (0, 1].
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Trains the forecaster on windows of T+1 frames with reparameterized
/// sampling active. Deterministic under the seed, including the latent noise
/// draws. The returned model has deterministic inference enabled.
pub fn train_pp(windows: &[Window], hyper: &PpHyper) -> Result<(PpModel, Vec<f64>)> {
    let first = windows
        .first()
        .ok_or_else(|| Error::Usage("empty training set for the prediction stream".into()))?;
    let (k, d, len) = (first.k(), first.d(), first.t());
    if len < 3 {
        return Err(Error::Usage(format!(
            "prediction windows need at least 3 frames, got {len}"
        )));
    }
    for w in windows {
        if w.k() != k || w.d() != d || w.t() != len {
            return Err(Error::Dimension("training windows must share K, d and T".into()));
        }
    }
    let t = len - 1;
    let mut model =
        PpModel::init(k, d, t, hyper.hidden_dim, hyper.latent_dim, hyper.kl_weight, hyper.seed);
    model.deterministic = false;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seeds::derive(hyper.seed, "pp-noise"));
    let latent = hyper.latent_dim;

    let curve = run_training(
        &mut model,
        windows.len(),
        hyper.lr,
        hyper.batch_size,
        hyper.epochs,
        seeds::derive(hyper.seed, "pp-shuffle"),
        |m, batch| {
            let mut grads = PpGrads::zeros_like(m);
            let scale = 1.0 / batch.len() as f64;
            let mut loss = 0.0;
            for &idx in batch {
                let eps: Vec<f64> = (0..latent).map(|_| standard_normal(&mut noise_rng)).collect();
                loss += backward(m, &windows[idx], Some(eps), &mut grads, scale)?;
            }
            Ok((loss, grads.to_flat()))
        },
    )?;
    model.deterministic = true;
    model.meta = TrainMeta {
        epochs_run: hyper.epochs,
        final_loss: curve.last().copied(),
        seed: hyper.seed,
    };
    Ok((model, curve))
}

/// Scores every frame of a sequence. Frame i >= T is scored against the
/// history window ending right before it; the first T frames cannot be
/// forecast from a full history and receive the first computable score, so
/// the array always has the sequence's length. Videos shorter than T+1
/// frames score 0 everywhere.
pub fn score_sequence(model: &PpModel, seq: &PoseSequence) -> Result<Vec<f64>> {
    let n = seq.len();
    let t = model.t;
    if n == 0 {
        return Ok(Vec::new());
    }
    let frames = normalize_frames(&seq.frames)?;
    if n <= t {
        return Ok(vec![0.0; n]);
    }
    let computed: Vec<f64> = (t..n)
        .into_par_iter()
        .map(|i| score_pp(model, &frames[i - t..i], &frames[i]))
        .collect::<Result<_>>()?;
    let mut out = vec![computed[0]; t];
    out.extend(computed);
    debug_assert_eq!(out.len(), n);
    Ok(out)
}
