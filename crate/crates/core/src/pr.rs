//! Pose reconstruction stream.
//!
//! A recurrent autoencoder reads a window's flattened keypoint frames through
//! an input projection and an LSTM encoder; the final hidden state is fed as
//! a repeated context vector to an LSTM decoder unrolled for the same number
//! of steps, whose hidden states project back to keypoint space. The decoder
//! reconstructs in reverse time order. A frame's anomaly score is its summed
//! squared reconstruction error over all keypoints.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{reassemble_scores, window_sequence, PoseSequence, Purpose, Window};
use crate::error::{Error, Result};
use crate::numkit::{
    cell_backward, cell_forward_cached, Linear, LinearGrads, LstmCache, LstmGrads, LstmParams,
};
use crate::seeds;
use crate::train_loop::{run_training, FlatParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrHyper {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub hidden_dim: usize,
    pub seed: u64,
}

impl Default for PrHyper {
    fn default() -> Self {
        PrHyper { lr: 0.004, batch_size: 60, epochs: 15, hidden_dim: 64, seed: 7 }
    }
}

/// Training provenance kept with every model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub epochs_run: usize,
    /// Last epoch's un-averaged training loss; absent before training.
    pub final_loss: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrModel {
    pub k: usize,
    pub d: usize,
    pub t: usize,
    pub hidden_dim: usize,
    pub input_proj: Linear,
    pub encoder: LstmParams,
    pub decoder: LstmParams,
    pub output_proj: Linear,
    pub meta: TrainMeta,
}

impl PrModel {
    pub fn init(k: usize, d: usize, t: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, "pr-init"));
        let kd = k * d;
        PrModel {
            k,
            d,
            t,
            hidden_dim,
            input_proj: Linear::xavier(hidden_dim, kd, &mut rng),
            encoder: LstmParams::xavier(hidden_dim, hidden_dim, &mut rng),
            decoder: LstmParams::xavier(hidden_dim, hidden_dim, &mut rng),
            output_proj: Linear::xavier(kd, hidden_dim, &mut rng),
            meta: TrainMeta { epochs_run: 0, final_loss: None, seed },
        }
    }

    fn check_window(&self, w: &Window) -> Result<()> {
        if w.k() != self.k || w.d() != self.d || w.t() != self.t {
            return Err(Error::Dimension(format!(
                "window K={} d={} T={} does not match model K={} d={} T={}",
                w.k(),
                w.d(),
                w.t(),
                self.k,
                self.d,
                self.t
            )));
        }
        Ok(())
    }
}

impl PrModel {
    /// Trainable parameters flattened in a fixed order, for optimizer state
    /// and gradient checking.
    pub fn params_flat(&self) -> Vec<f64> {
        self.to_flat()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        self.load_flat(flat);
    }
}

impl FlatParams for PrModel {
    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.input_proj.write_flat(&mut out);
        self.encoder.write_flat(&mut out);
        self.decoder.write_flat(&mut out);
        self.output_proj.write_flat(&mut out);
        out
    }

    fn load_flat(&mut self, flat: &[f64]) {
        let mut pos = 0;
        self.input_proj.read_flat(flat, &mut pos);
        self.encoder.read_flat(flat, &mut pos);
        self.decoder.read_flat(flat, &mut pos);
        self.output_proj.read_flat(flat, &mut pos);
        debug_assert_eq!(pos, flat.len());
    }
}

struct PrGrads {
    input_proj: LinearGrads,
    encoder: LstmGrads,
    decoder: LstmGrads,
    output_proj: LinearGrads,
}

impl PrGrads {
    fn zeros_like(m: &PrModel) -> Self {
        PrGrads {
            input_proj: LinearGrads::zeros_like(&m.input_proj),
            encoder: LstmGrads::zeros_like(&m.encoder),
            decoder: LstmGrads::zeros_like(&m.decoder),
            output_proj: LinearGrads::zeros_like(&m.output_proj),
        }
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.input_proj.write_flat(&mut out);
        self.encoder.write_flat(&mut out);
        self.decoder.write_flat(&mut out);
        self.output_proj.write_flat(&mut out);
        out
    }
}

struct Forward {
    enc_caches: Vec<LstmCache>,
    dec_caches: Vec<LstmCache>,
    dec_hidden: Vec<Vec<f64>>,
    /// recon[t] reconstructs window frame t (decoder step T-1-t).
    recon: Vec<Vec<f64>>,
}

fn forward(model: &PrModel, w: &Window) -> Result<Forward> {
    let t = model.t;
    let h = model.hidden_dim;
    let mut enc_caches = Vec::with_capacity(t);
    let mut hs = vec![0.0; h];
    let mut cs = vec![0.0; h];
    for i in 0..t {
        let u = model.input_proj.forward(w.flat(i))?;
        let (h2, c2, cache) = cell_forward_cached(&model.encoder, &u, &hs, &cs)?;
        enc_caches.push(cache);
        hs = h2;
        cs = c2;
    }
    let context = hs;

    let mut dec_caches = Vec::with_capacity(t);
    let mut dec_hidden = Vec::with_capacity(t);
    let mut recon = vec![Vec::new(); t];
    let mut hd = vec![0.0; h];
    let mut cd = vec![0.0; h];
    for s in 0..t {
        let (h2, c2, cache) = cell_forward_cached(&model.decoder, &context, &hd, &cd)?;
        let r = model.output_proj.forward(&h2)?;
        recon[t - 1 - s] = r;
        dec_caches.push(cache);
        dec_hidden.push(h2.clone());
        hd = h2;
        cd = c2;
    }
    Ok(Forward { enc_caches, dec_caches, dec_hidden, recon })
}

/// Reconstructs every frame of a window; entry `t` is the model's version of
/// window frame `t`.
pub fn reconstruct(model: &PrModel, w: &Window) -> Result<Vec<Vec<f64>>> {
    model.check_window(w)?;
    Ok(forward(model, w)?.recon)
}

/// Per-frame anomaly score: summed squared reconstruction error over the
/// keypoints of each frame.
pub fn scores_from_reconstruction(recon: &[Vec<f64>], w: &Window) -> Result<Vec<f64>> {
    if recon.len() != w.t() {
        return Err(Error::Dimension(format!(
            "{} reconstructed frames for a {}-frame window",
            recon.len(),
            w.t()
        )));
    }
    let mut out = Vec::with_capacity(w.t());
    for (i, r) in recon.iter().enumerate() {
        let v = w.flat(i);
        if r.len() != v.len() {
            return Err(Error::Dimension(format!(
                "reconstruction has {} coordinates, frame has {}",
                r.len(),
                v.len()
            )));
        }
        out.push(r.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum());
    }
    Ok(out)
}

pub fn score_pr(model: &PrModel, w: &Window) -> Result<Vec<f64>> {
    let recon = reconstruct(model, w)?;
    scores_from_reconstruction(&recon, w)
}

/// Scores every frame of a sequence through non-overlapping score windows.
pub fn score_sequence(model: &PrModel, seq: &PoseSequence) -> Result<Vec<f64>> {
    let windows = window_sequence(seq, model.t, Purpose::Score)?;
    let per: Vec<Vec<f64>> = windows
        .iter()
        .map(|w| score_pr(model, w))
        .collect::<Result<_>>()?;
    reassemble_scores(&windows, &per, seq.len())
}

/// Un-averaged reconstruction loss summed over windows, frames and keypoints.
pub fn dataset_loss(model: &PrModel, windows: &[Window]) -> Result<f64> {
    let mut total = 0.0;
    for w in windows {
        model.check_window(w)?;
        let f = forward(model, w)?;
        for (t, r) in f.recon.iter().enumerate() {
            let v = w.flat(t);
            total += r.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    Ok(total)
}

/// Backward pass for one window; accumulates parameter gradients scaled by
/// `scale` and returns the window's un-averaged loss.
fn backward(model: &PrModel, w: &Window, grads: &mut PrGrads, scale: f64) -> Result<f64> {
    let t = model.t;
    let h = model.hidden_dim;
    let f = forward(model, w)?;

    let mut loss = 0.0;
    // recon residuals -> decoder hidden gradients per step.
    let mut d_hidden = vec![vec![0.0; h]; t];
    for step in 0..t {
        let frame = t - 1 - step;
        let r = &f.recon[frame];
        let v = w.flat(frame);
        let mut dr = Vec::with_capacity(r.len());
        for (a, b) in r.iter().zip(v) {
            let e = a - b;
            loss += e * e;
            dr.push(2.0 * e * scale);
        }
        model
            .output_proj
            .backward(&f.dec_hidden[step], &dr, &mut grads.output_proj, &mut d_hidden[step])?;
    }

    // Decoder BPTT; the context input gradient accumulates across steps.
    let mut d_context = vec![0.0; h];
    let mut dh = vec![0.0; h];
    let mut dc = vec![0.0; h];
    for step in (0..t).rev() {
        let mut dh_total = d_hidden[step].clone();
        crate::numkit::ops::add_assign(&mut dh_total, &dh);
        let (dx, dh_prev, dc_prev) =
            cell_backward(&model.decoder, &f.dec_caches[step], &dh_total, &dc, &mut grads.decoder)?;
        crate::numkit::ops::add_assign(&mut d_context, &dx);
        dh = dh_prev;
        dc = dc_prev;
    }

    // Encoder BPTT from the context gradient.
    let mut dh = d_context;
    let mut dc = vec![0.0; h];
    for step in (0..t).rev() {
        let (dx, dh_prev, dc_prev) =
            cell_backward(&model.encoder, &f.enc_caches[step], &dh, &dc, &mut grads.encoder)?;
        let mut sink = vec![0.0; model.k * model.d];
        model.input_proj.backward(w.flat(step), &dx, &mut grads.input_proj, &mut sink)?;
        dh = dh_prev;
        dc = dc_prev;
    }

    Ok(loss)
}

/// Un-averaged loss and flat gradient for one window, for gradient checking.
pub fn window_loss_and_grad(model: &PrModel, w: &Window) -> Result<(f64, Vec<f64>)> {
    let mut grads = PrGrads::zeros_like(model);
    let loss = backward(model, w, &mut grads, 1.0)?;
    Ok((loss, grads.to_flat()))
}

/// Trains the autoencoder with shuffled mini-batch Adam. Deterministic under
/// the hyperparameter seed. Returns the model and the per-epoch loss curve
/// (un-averaged totals).
pub fn train_pr(windows: &[Window], hyper: &PrHyper) -> Result<(PrModel, Vec<f64>)> {
    let first = windows
        .first()
        .ok_or_else(|| Error::Usage("empty training set for the reconstruction stream".into()))?;
    let (k, d, t) = (first.k(), first.d(), first.t());
    for w in windows {
        if w.k() != k || w.d() != d || w.t() != t {
            return Err(Error::Dimension(
                "training windows must share K, d and T".into(),
            ));
        }
    }
    let mut model = PrModel::init(k, d, t, hyper.hidden_dim, hyper.seed);
    let curve = run_training(
        &mut model,
        windows.len(),
        hyper.lr,
        hyper.batch_size,
        hyper.epochs,
        seeds::derive(hyper.seed, "pr-shuffle"),
        |m, batch| {
            let mut grads = PrGrads::zeros_like(m);
            let scale = 1.0 / (batch.len() * t) as f64;
            let mut loss = 0.0;
            for &idx in batch {
                loss += backward(m, &windows[idx], &mut grads, scale)?;
            }
            Ok((loss, grads.to_flat()))
        },
    )?;
    model.meta = TrainMeta {
        epochs_run: hyper.epochs,
        final_loss: curve.last().copied(),
        seed: hyper.seed,
    };
    Ok((model, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PoseFrame;
    use crate::numkit::grad_check;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn window_from(frames: Vec<Vec<f64>>, k: usize, d: usize) -> Window {
        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(i, c)| PoseFrame::new(i, k, d, c).unwrap())
            .collect();
        Window { video_id: "w".into(), start: 0, frames }
    }

    fn random_window(rng: &mut ChaCha8Rng, t: usize, k: usize, d: usize) -> Window {
        window_from(
            (0..t)
                .map(|_| (0..k * d).map(|_| rng.gen_range(-0.5..0.5)).collect())
                .collect(),
            k,
            d,
        )
    }

    fn constant_window(t: usize) -> Window {
        // Already-normalized constant pose: two keypoints at +-(0.3, 0.4).
        window_from(vec![vec![-0.3, -0.4, 0.3, 0.4]; t], 2, 2)
    }

    #[test]
    fn empty_training_set_is_usage_error() {
        assert!(matches!(
            train_pr(&[], &PrHyper::default()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn same_seed_gives_bit_identical_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let windows: Vec<Window> = (0..4).map(|_| random_window(&mut rng, 6, 2, 2)).collect();
        let hyper = PrHyper { epochs: 3, batch_size: 2, hidden_dim: 8, ..PrHyper::default() };
        let (a, curve_a) = train_pr(&windows, &hyper).unwrap();
        let (b, curve_b) = train_pr(&windows, &hyper).unwrap();
        assert_eq!(a, b);
        assert_eq!(curve_a, curve_b);
    }

    #[test]
    fn overfits_one_constant_window() {
        let w = constant_window(8);
        let hyper = PrHyper {
            lr: 0.01,
            batch_size: 1,
            epochs: 500,
            hidden_dim: 16,
            seed: 3,
        };
        let (model, curve) = train_pr(std::slice::from_ref(&w), &hyper).unwrap();
        let final_loss = dataset_loss(&model, std::slice::from_ref(&w)).unwrap();
        assert!(final_loss < 1e-3, "final loss {final_loss}");
        assert!(curve[0] > final_loss);
        // Smoothed over 10-epoch spans the curve does not increase.
        let blocks: Vec<f64> = curve
            .chunks(10)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        for pair in blocks.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9,
                "smoothed loss rose: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn injected_residual_scores_exactly() {
        let w = constant_window(4);
        // Pretend the model reconstructed perfectly except frame 2, which is
        // off by r; the score must be |r|^2 exactly.
        let mut recon: Vec<Vec<f64>> = (0..4).map(|i| w.flat(i).to_vec()).collect();
        let r = [0.1, -0.2, 0.3, 0.05];
        for (a, b) in recon[2].iter_mut().zip(&r) {
            *a += b;
        }
        let scores = scores_from_reconstruction(&recon, &w).unwrap();
        let expect: f64 = r.iter().map(|x| x * x).sum();
        assert_eq!(scores[0], 0.0);
        assert_eq!(scores[1], 0.0);
        assert!((scores[2] - expect).abs() < 1e-12);
        assert_eq!(scores[3], 0.0);
    }

    #[test]
    fn scores_reassemble_to_sequence_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frames: Vec<PoseFrame> = (0..53)
            .map(|i| {
                let coords: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                PoseFrame::new(i, 2, 2, coords).unwrap()
            })
            .collect();
        let seq = PoseSequence::new("v".into(), frames, None).unwrap();
        let model = PrModel::init(2, 2, 16, 8, 11);
        let scores = score_sequence(&model, &seq).unwrap();
        assert_eq!(scores.len(), 53);
        assert!(scores.iter().all(|s| *s >= 0.0 && s.is_finite()));
    }

    #[test]
    fn window_shape_mismatch_is_dimension_error() {
        let model = PrModel::init(2, 2, 8, 8, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_window(&mut rng, 8, 3, 2);
        assert!(matches!(score_pr(&model, &w), Err(Error::Dimension(_))));
    }

    #[test]
    fn frame_scores_sum_to_window_loss() {
        // The per-frame score is the per-frame slice of the training loss:
        // summed over a training set they agree.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let windows: Vec<Window> = (0..3).map(|_| random_window(&mut rng, 6, 2, 2)).collect();
        let model = PrModel::init(2, 2, 6, 8, 9);
        let loss = dataset_loss(&model, &windows).unwrap();
        let mut total = 0.0;
        for w in &windows {
            total += score_pr(&model, w).unwrap().iter().sum::<f64>();
        }
        assert!((loss - total).abs() < 1e-9, "{loss} vs {total}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = random_window(&mut rng, 2, 2, 2);
        let mut model = PrModel::init(2, 2, 2, 4, 13);
        let flat = model.to_flat();
        let (_, analytic) = window_loss_and_grad(&model, &w).unwrap();
        let report = grad_check(
            |p| {
                let mut m = model.clone();
                m.set_params_flat(p);
                dataset_loss(&m, std::slice::from_ref(&w)).unwrap()
            },
            &flat,
            &analytic,
            1e-5,
            1e-4,
        );
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
        model.load_flat(&flat);
    }
}
