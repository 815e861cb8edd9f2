//! Repetition detection stream.
//!
//! Each window frame is embedded by a small feed-forward map over its pose
//! features (positions plus one-frame velocities). The pairwise negative
//! squared distances between embeddings form a temporal self-similarity
//! matrix; after a row-wise softmax, periodic motion shows up as off-diagonal
//! stripes. A two-layer classifier reads one matrix row and emits the
//! probability that the frame belongs to repetitive motion. Training data is
//! synthesized from the normal training set by splicing looped sub-segments.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{
    normalize_frames, reassemble_scores, window_sequence, PoseFrame, PoseSequence, Purpose, Window,
};
use crate::error::{Error, Result};
use crate::numkit::ops::{add_assign, sigmoid, softmax_row, softmax_row_backward};
use crate::numkit::{Linear, LinearGrads, Matrix};
use crate::pr::TrainMeta;
use crate::seeds;
use crate::train_loop::{run_training, FlatParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdHyper {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub embed_dim: usize,
    pub seed: u64,
}

impl Default for RdHyper {
    fn default() -> Self {
        RdHyper { lr: 0.004, batch_size: 60, epochs: 30, embed_dim: 32, seed: 7 }
    }
}

/// Per-frame slope of the slow linear drift layered over spliced loops,
/// sized to the wander speed of normal data.
const DRIFT_PER_FRAME: f64 = 0.003;
/// Amplification range for looped content: repetitive behaviour is vigorous,
/// while normal content sampled for splicing is mostly gentle.
const LOOP_GAIN: (f64, f64) = (2.0, 5.0);
/// Largest playback stride used for time-subsampled corpus windows.
const MAX_STRIDE: usize = 3;

/// How repetition-training windows are synthesized from normal sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RdCorpusConfig {
    /// Inclusive range of spliced loop lengths, in frames. Clamped to
    /// [2, T/2] so every positive window holds at least two full loops.
    pub loop_lo: usize,
    pub loop_hi: usize,
    pub positives_fraction: f64,
    pub seed: u64,
}

impl Default for RdCorpusConfig {
    fn default() -> Self {
        RdCorpusConfig { loop_lo: 6, loop_hi: 32, positives_fraction: 0.5, seed: 7 }
    }
}

/// T x T row-stochastic self-similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrix {
    t: usize,
    data: Vec<f64>,
}

impl SimMatrix {
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.t..(i + 1) * self.t]
    }

    /// Plain-text T x T grid, one row per line, for inspection.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.t {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdModel {
    pub k: usize,
    pub d: usize,
    pub t: usize,
    pub embed_dim: usize,
    pub embed_hidden: usize,
    pub cls_hidden: usize,
    pub emb1: Linear,
    pub emb2: Linear,
    pub cls1: Linear,
    pub cls2: Linear,
    pub meta: TrainMeta,
}

impl RdModel {
    pub fn init(k: usize, d: usize, t: usize, embed_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, "rd-init"));
        let feat = 2 * k * d;
        let embed_hidden = (2 * embed_dim).max(8);
        let cls_hidden = t.max(8);
        RdModel {
            k,
            d,
            t,
            embed_dim,
            embed_hidden,
            cls_hidden,
            emb1: Linear::xavier(embed_hidden, feat, &mut rng),
            emb2: Linear::xavier(embed_dim, embed_hidden, &mut rng),
            cls1: Linear::xavier(cls_hidden, t, &mut rng),
            cls2: Linear::xavier(1, cls_hidden, &mut rng),
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

impl RdModel {
    /// Trainable parameters flattened in a fixed order.
    pub fn params_flat(&self) -> Vec<f64> {
        self.to_flat()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        self.load_flat(flat);
    }
}

impl FlatParams for RdModel {
    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.emb1.write_flat(&mut out);
        self.emb2.write_flat(&mut out);
        self.cls1.write_flat(&mut out);
        self.cls2.write_flat(&mut out);
        out
    }

    fn load_flat(&mut self, flat: &[f64]) {
        let mut pos = 0;
        self.emb1.read_flat(flat, &mut pos);
        self.emb2.read_flat(flat, &mut pos);
        self.cls1.read_flat(flat, &mut pos);
        self.cls2.read_flat(flat, &mut pos);
        debug_assert_eq!(pos, flat.len());
    }
}

/// Gain on the velocity half of the embedder features. Velocities run one
/// to two orders of magnitude below positions in normalized coordinates;
/// without rescaling they are invisible to the embedding distances that
/// drive the similarity matrix.
const VELOCITY_GAIN: f64 = 10.0;

/// Pose features of window frame `i`: flattened keypoints concatenated with
/// their rescaled one-frame velocity (zero for the first frame).
fn frame_features(w: &Window, i: usize) -> Vec<f64> {
    let cur = w.flat(i);
    let mut feat = Vec::with_capacity(2 * cur.len());
    feat.extend_from_slice(cur);
    if i == 0 {
        feat.extend(std::iter::repeat_n(0.0, cur.len()));
    } else {
        let prev = w.flat(i - 1);
        feat.extend(cur.iter().zip(prev).map(|(a, b)| VELOCITY_GAIN * (a - b)));
    }
    feat
}

/// Per-frame latent feature vector of dimension e.
pub type FrameEmbedding = Vec<f64>;

/// Smoothing constant inside the embedding normalization.
const NORM_EPS: f64 = 1e-8;

/// L2-normalizes an embedding (smoothly, so the map stays differentiable at
/// the origin). Bounded embeddings keep the pairwise distances in [0, 4+],
/// so the row softmax can never collapse to one-hot no matter how large the
/// motion is; only embedding directions carry information.
fn normalize_embedding(raw: &[f64]) -> (Vec<f64>, f64) {
    let n2: f64 = raw.iter().map(|v| v * v).sum::<f64>() + NORM_EPS;
    let inv = 1.0 / n2.sqrt();
    (raw.iter().map(|v| v * inv).collect(), inv)
}

/// Embeds every frame of a window. Pure function of the window content.
pub fn embed_frames(model: &RdModel, w: &Window) -> Result<Vec<FrameEmbedding>> {
    model.check_window(w)?;
    (0..w.t())
        .map(|i| {
            let feat = frame_features(w, i);
            let mut hid = model.emb1.forward(&feat)?;
            crate::numkit::ops::tanh_vec(&mut hid);
            let raw = model.emb2.forward(&hid)?;
            Ok(normalize_embedding(&raw).0)
        })
        .collect()
}

/// Pairwise pre-softmax similarities: entry (i, j) is -|x_i - x_j|^2.
/// Exactly symmetric with an exactly zero diagonal: each pair is computed
/// once and mirrored.
pub fn pre_softmax_distances(embeddings: &[FrameEmbedding]) -> Result<Matrix> {
    let t = embeddings.len();
    if t < 2 {
        return Err(Error::Usage(format!(
            "self-similarity needs at least 2 embeddings, got {t}"
        )));
    }
    let e = embeddings[0].len();
    if embeddings.iter().any(|x| x.len() != e) {
        return Err(Error::Dimension("embeddings must share one dimension".into()));
    }
    let mut m = Matrix::zeros(t, t);
    for i in 0..t {
        for j in i + 1..t {
            let d2: f64 = embeddings[i]
                .iter()
                .zip(&embeddings[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            m.set(i, j, -d2);
            m.set(j, i, -d2);
        }
    }
    Ok(m)
}

/// Temporal self-similarity matrix: row-wise softmax over the negative
/// squared embedding distances.
pub fn self_similarity(embeddings: &[FrameEmbedding]) -> Result<SimMatrix> {
    let pre = pre_softmax_distances(embeddings)?;
    let t = pre.rows();
    debug_assert!((0..t).all(|i| pre.get(i, i) == 0.0));
    debug_assert!((0..t).all(|i| (0..t).all(|j| pre.get(i, j) == pre.get(j, i))));
    let mut data = Vec::with_capacity(t * t);
    for i in 0..t {
        data.extend(softmax_row(pre.row(i))?);
    }
    Ok(SimMatrix { t, data })
}

/// Rotates row `i` into lag coordinates: entry `l` is the similarity of the
/// frame to the frame `l` steps later (wrapping). The diagonal lands at
/// position 0 for every row, so one shared-weight classifier sees stripes of
/// a period-p window at the same inputs regardless of the frame's position.
fn lag_row(row: &[f64], i: usize) -> Vec<f64> {
    let t = row.len();
    (0..t).map(|l| row[(i + l) % t]).collect()
}

fn classify_row(model: &RdModel, row: &[f64], i: usize) -> Result<f64> {
    let shifted = lag_row(row, i);
    let mut hid = model.cls1.forward(&shifted)?;
    crate::numkit::ops::tanh_vec(&mut hid);
    Ok(model.cls2.forward(&hid)?[0])
}

/// Per-frame repetition probabilities for one window: the classifier applied
/// to each row of the window's self-similarity matrix, through a sigmoid.
pub fn score_rd(model: &RdModel, w: &Window) -> Result<Vec<f64>> {
    let embeddings = embed_frames(model, w)?;
    let sim = self_similarity(&embeddings)?;
    (0..w.t())
        .map(|i| Ok(sigmoid(classify_row(model, sim.row(i), i)?)))
        .collect()
}

/// Scores every frame of a sequence through non-overlapping score windows.
pub fn score_sequence(model: &RdModel, seq: &PoseSequence) -> Result<Vec<f64>> {
    let windows = window_sequence(seq, model.t, Purpose::Score)?;
    let per: Vec<Vec<f64>> = windows
        .iter()
        .map(|w| score_rd(model, w))
        .collect::<Result<_>>()?;
    reassemble_scores(&windows, &per, seq.len())
}

/// One labeled training window for the repetition classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusWindow {
    pub window: Window,
    /// Per-frame repetition labels; 1 marks frames inside the spliced loop.
    pub frame_labels: Vec<u8>,
    /// Splice loop length for positives.
    pub loop_len: Option<usize>,
    /// Which keypoints loop in a positive window; empty for negatives.
    pub looped_keypoints: Vec<bool>,
    /// Uniform noise amplitude that was added to this window's frames.
    pub noise_amp: f64,
}

impl CorpusWindow {
    /// A window holding any repetitive frames counts as positive.
    pub fn positive(&self) -> bool {
        self.frame_labels.contains(&1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionCorpus {
    pub items: Vec<CorpusWindow>,
    pub t: usize,
}

/// Stable numerically: log(1 + exp(-|l|)) + max(l, 0) - l*y.
fn bce_with_logit(logit: f64, y: f64) -> f64 {
    logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p()
}

/// Synthesizes a labeled corpus from normal training sequences. A positive
/// takes a normal window and splices a randomly chosen sub-segment of a
/// random keypoint subset, repeated end-to-end, across the whole window
/// while the remaining keypoints keep their natural motion; real repetitive
/// behaviour is a limb looping over ongoing body motion, not a frozen whole
/// pose. Negatives are normal windows. Three equalizers keep
/// periodicity the only systematic difference between the classes, so the
/// classifier cannot shortcut through side channels: both classes draw a
/// playback stride from the same range (time-subsampled splicing, covering
/// the speed range of real repetitive motion), both get the same small
/// per-frame noise (10% of content RMS), and spliced regions get a slow
/// per-keypoint linear drift restoring the temporal spread that splicing
/// would otherwise freeze.
pub fn make_repetition_corpus(
    train: &[PoseSequence],
    cfg: &RdCorpusConfig,
    t: usize,
) -> Result<RepetitionCorpus> {
    if train.is_empty() {
        return Err(Error::Usage("no training sequences for the repetition corpus".into()));
    }
    if !(0.0..=1.0).contains(&cfg.positives_fraction) {
        return Err(Error::Config(format!(
            "positives fraction must be in [0, 1], got {}",
            cfg.positives_fraction
        )));
    }
    if cfg.loop_lo > cfg.loop_hi {
        return Err(Error::Config(format!(
            "loop range [{}, {}] is empty",
            cfg.loop_lo, cfg.loop_hi
        )));
    }
    let max_loop = (t / 2).max(2);
    let lo = cfg.loop_lo.clamp(2, max_loop);
    let hi = cfg.loop_hi.clamp(2, max_loop);
    if train.iter().all(|s| s.len() < lo) {
        return Err(Error::Usage(format!(
            "every training sequence is shorter than the minimum loop length {lo}"
        )));
    }

    // Two corpus items per available training window: synthesis is cheap
    // and positive variety drives the classifier's generalization.
    let pool_size: usize = 2 * train.iter().map(|s| s.len() / t).sum::<usize>();
    if pool_size == 0 {
        return Err(Error::Usage(format!(
            "no training windows of length {t}; sequences are too short"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, "rd-corpus"));
    let n_pos = (cfg.positives_fraction * pool_size as f64).round() as usize;

    if train.iter().all(|s| s.len() < hi.max(lo)) {
        return Err(Error::Usage(
            "no training sequence is long enough to splice a loop from".into(),
        ));
    }

    let mut items = Vec::with_capacity(pool_size);
    for _ in 0..n_pos {
        // One normal source stretch at some playback stride; the loop
        // content comes from a random offset inside it.
        let loop_len = rng.gen_range(lo..=hi);
        let eligible: Vec<usize> = (0..train.len())
            .filter(|&s| train[s].len() >= t.max(loop_len))
            .collect();
        if eligible.is_empty() {
            return Err(Error::Usage(format!(
                "no training sequence can hold both a {t}-frame window and a {loop_len}-frame loop"
            )));
        }
        let seq = &train[eligible[rng.gen_range(0..eligible.len())]];
        let max_stride = (seq.len() / t).clamp(1, MAX_STRIDE);
        let stride = rng.gen_range(1..=max_stride);
        let start = rng.gen_range(0..=seq.len() - t * stride);
        let src: Vec<PoseFrame> =
            (0..t).map(|m| seq.frames[start + m * stride].clone()).collect();
        let base = normalize_frames(&src)?;

        let loop_len = loop_len.min(t);
        let offset = rng.gen_range(0..=t - loop_len);
        let (k, d) = (base[0].k, base[0].d);

        // Keypoints that loop; the rest keep the window's natural motion.
        let subset_size = rng.gen_range((k / 4).max(1)..=(k / 2).max(1));
        let mut looped = vec![false; k];
        let mut picked = 0;
        while picked < subset_size {
            let j = rng.gen_range(0..k);
            if !looped[j] {
                looped[j] = true;
                picked += 1;
            }
        }

        let noise_amp = noise_amplitude(&base);
        let drift: Vec<f64> =
            (0..k * d).map(|_| rng.gen_range(-DRIFT_PER_FRAME..=DRIFT_PER_FRAME)).collect();
        let gain = rng.gen_range(LOOP_GAIN.0..LOOP_GAIN.1);
        // Temporal mean of the looped snippet, the anchor the amplified
        // loop content swings around.
        let snippet: Vec<&PoseFrame> =
            (0..loop_len).map(|m| &base[offset + (offset + m) % loop_len]).collect();
        let mut anchor = vec![0.0; k * d];
        for f in &snippet {
            add_assign(&mut anchor, &f.keypoints);
        }
        for a in &mut anchor {
            *a /= loop_len as f64;
        }
        let frames: Vec<PoseFrame> = (0..t)
            .map(|s| {
                // Cycles through base[offset..offset+loop_len]; the phase
                // origin of the rotation is arbitrary.
                let loop_src = &base[offset + (s + t - offset) % loop_len];
                let coords: Vec<f64> = (0..k * d)
                    .map(|c| {
                        let v = if looped[c / d] {
                            anchor[c]
                                + gain * (loop_src.keypoints[c] - anchor[c])
                                + drift[c] * s as f64
                        } else {
                            base[s].keypoints[c]
                        };
                        v + rng.gen_range(-noise_amp..=noise_amp)
                    })
                    .collect();
                PoseFrame::new(s, k, d, coords).expect("splice emits valid frames")
            })
            .collect();
        items.push(CorpusWindow {
            window: Window { video_id: format!("splice_{}", items.len()), start: 0, frames },
            frame_labels: vec![1; t],
            loop_len: Some(loop_len),
            looped_keypoints: looped,
            noise_amp,
        });
    }

    // Negatives: normal stretches at the same stride distribution and noise
    // treatment, never looped.
    for neg in 0..pool_size - n_pos {
        let eligible: Vec<usize> = (0..train.len()).filter(|&s| train[s].len() >= t).collect();
        if eligible.is_empty() {
            return Err(Error::Usage(format!(
                "no training sequence holds a full {t}-frame window"
            )));
        }
        let seq = &train[eligible[rng.gen_range(0..eligible.len())]];
        let max_stride = (seq.len() / t).clamp(1, MAX_STRIDE);
        let stride = rng.gen_range(1..=max_stride);
        let span = t * stride;
        let start = rng.gen_range(0..=seq.len() - span);
        let src: Vec<PoseFrame> =
            (0..t).map(|m| seq.frames[start + m * stride].clone()).collect();
        let normalized = normalize_frames(&src)?;
        let noise_amp = noise_amplitude(&normalized);
        let frames: Vec<PoseFrame> = normalized
            .iter()
            .enumerate()
            .map(|(s, f)| {
                let coords: Vec<f64> = f
                    .keypoints
                    .iter()
                    .map(|v| v + rng.gen_range(-noise_amp..=noise_amp))
                    .collect();
                PoseFrame::new(s, f.k, f.d, coords).expect("noise keeps frames valid")
            })
            .collect();
        items.push(CorpusWindow {
            window: Window { video_id: format!("normal_{neg}_{}", seq.video_id), start, frames },
            frame_labels: vec![0; t],
            loop_len: None,
            looped_keypoints: Vec::new(),
            noise_amp,
        });
    }

    Ok(RepetitionCorpus { items, t })
}

/// 10% of the frames' RMS deviation from their per-coordinate temporal mean,
/// floored so exactly constant content still gets broken up.
fn noise_amplitude(frames: &[PoseFrame]) -> f64 {
    let dim = frames[0].keypoints.len();
    let mut mean = vec![0.0; dim];
    for f in frames {
        add_assign(&mut mean, &f.keypoints);
    }
    for m in &mut mean {
        *m /= frames.len() as f64;
    }
    let mut ss = 0.0;
    for f in frames {
        ss += f
            .keypoints
            .iter()
            .zip(&mean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    let scale = (ss / (frames.len() * dim) as f64).sqrt();
    (0.1 * scale).max(1e-4)
}

/// Trains the repetition classifier with per-frame binary cross-entropy.
/// Deterministic under the seed.
pub fn train_rd(corpus: &RepetitionCorpus, hyper: &RdHyper) -> Result<(RdModel, Vec<f64>)> {
    if corpus.items.is_empty() {
        return Err(Error::Usage("empty repetition corpus".into()));
    }
    let any_pos = corpus.items.iter().any(|i| i.frame_labels.contains(&1));
    let any_neg = corpus.items.iter().any(|i| i.frame_labels.contains(&0));
    if !any_pos || !any_neg {
        return Err(Error::Usage(
            "repetition corpus must contain both repetitive and non-repetitive frames".into(),
        ));
    }
    let first = &corpus.items[0].window;
    let (k, d, t) = (first.k(), first.d(), first.t());
    for item in &corpus.items {
        let w = &item.window;
        if w.k() != k || w.d() != d || w.t() != t {
            return Err(Error::Dimension("corpus windows must share K, d and T".into()));
        }
    }

    let mut model = RdModel::init(k, d, t, hyper.embed_dim, hyper.seed);
    let curve = run_training(
        &mut model,
        corpus.items.len(),
        hyper.lr,
        hyper.batch_size,
        hyper.epochs,
        seeds::derive(hyper.seed, "rd-shuffle"),
        |m, batch| {
            let mut grads = RdGrads::zeros_like(m);
            let scale = 1.0 / (batch.len() * t) as f64;
            let mut loss = 0.0;
            for &idx in batch {
                let item = &corpus.items[idx];
                loss += backward(m, &item.window, &item.frame_labels, &mut grads, scale)?;
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

struct RdGrads {
    emb1: LinearGrads,
    emb2: LinearGrads,
    cls1: LinearGrads,
    cls2: LinearGrads,
}

impl RdGrads {
    fn zeros_like(m: &RdModel) -> Self {
        RdGrads {
            emb1: LinearGrads::zeros_like(&m.emb1),
            emb2: LinearGrads::zeros_like(&m.emb2),
            cls1: LinearGrads::zeros_like(&m.cls1),
            cls2: LinearGrads::zeros_like(&m.cls2),
        }
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.emb1.write_flat(&mut out);
        self.emb2.write_flat(&mut out);
        self.cls1.write_flat(&mut out);
        self.cls2.write_flat(&mut out);
        out
    }
}

/// Per-frame BCE backward through the classifier, the row softmax, the
/// pairwise distances and the embedder. Accumulates gradients scaled by
/// `scale` and returns the window's un-averaged loss.
fn backward(
    model: &RdModel,
    w: &Window,
    frame_labels: &[u8],
    grads: &mut RdGrads,
    scale: f64,
) -> Result<f64> {
    model.check_window(w)?;
    let t = model.t;
    if frame_labels.len() != t {
        return Err(Error::Dimension(format!(
            "{} labels for a {t}-frame window",
            frame_labels.len()
        )));
    }

    // Forward with caches.
    let feats: Vec<Vec<f64>> = (0..t).map(|i| frame_features(w, i)).collect();
    let mut emb_hidden = Vec::with_capacity(t);
    let mut raw_embeddings = Vec::with_capacity(t);
    let mut inv_norms = Vec::with_capacity(t);
    let mut embeddings = Vec::with_capacity(t);
    for feat in &feats {
        let mut hid = model.emb1.forward(feat)?;
        crate::numkit::ops::tanh_vec(&mut hid);
        let raw = model.emb2.forward(&hid)?;
        let (x, inv) = normalize_embedding(&raw);
        emb_hidden.push(hid);
        raw_embeddings.push(raw);
        inv_norms.push(inv);
        embeddings.push(x);
    }
    let pre = pre_softmax_distances(&embeddings)?;
    let mut sim_rows = Vec::with_capacity(t);
    for i in 0..t {
        sim_rows.push(softmax_row(pre.row(i))?);
    }

    let mut loss = 0.0;
    let mut d_pre = Matrix::zeros(t, t);
    for i in 0..t {
        let y = f64::from(frame_labels[i]);
        let row = &sim_rows[i];
        let shifted = lag_row(row, i);
        let mut cls_hid = model.cls1.forward(&shifted)?;
        crate::numkit::ops::tanh_vec(&mut cls_hid);
        let logit = model.cls2.forward(&cls_hid)?[0];
        loss += bce_with_logit(logit, y);

        let d_logit = (sigmoid(logit) - y) * scale;
        let mut d_cls_hid = vec![0.0; model.cls_hidden];
        model.cls2.backward(&cls_hid, &[d_logit], &mut grads.cls2, &mut d_cls_hid)?;
        for (g, h) in d_cls_hid.iter_mut().zip(&cls_hid) {
            *g *= 1.0 - h * h;
        }
        let mut d_shifted = vec![0.0; t];
        model.cls1.backward(&shifted, &d_cls_hid, &mut grads.cls1, &mut d_shifted)?;
        let mut d_row = vec![0.0; t];
        for (l, v) in d_shifted.iter().enumerate() {
            d_row[(i + l) % t] += v;
        }
        let d_pre_row = softmax_row_backward(row, &d_row);
        for (j, v) in d_pre_row.iter().enumerate() {
            d_pre.set(i, j, *v);
        }
    }

    // Distances to embeddings: pre(i,j) = -|x_i - x_j|^2, the diagonal is
    // constant zero and carries no gradient.
    let e = model.embed_dim;
    let mut d_emb = vec![vec![0.0; e]; t];
    for i in 0..t {
        for j in i + 1..t {
            let g = d_pre.get(i, j) + d_pre.get(j, i);
            if g == 0.0 {
                continue;
            }
            for a in 0..e {
                let diff = embeddings[i][a] - embeddings[j][a];
                d_emb[i][a] -= 2.0 * g * diff;
                d_emb[j][a] += 2.0 * g * diff;
            }
        }
    }

    // Embedder backward, through the normalization first:
    // y = raw * inv, inv = (|raw|^2 + eps)^-1/2, so
    // d_raw = inv * d_y - inv^3 * raw * (raw . d_y).
    for i in 0..t {
        let raw = &raw_embeddings[i];
        let inv = inv_norms[i];
        let dot: f64 = raw.iter().zip(&d_emb[i]).map(|(a, b)| a * b).sum();
        let d_raw: Vec<f64> = raw
            .iter()
            .zip(&d_emb[i])
            .map(|(r, dy)| inv * dy - inv * inv * inv * r * dot)
            .collect();
        let mut d_hid = vec![0.0; model.embed_hidden];
        model.emb2.backward(&emb_hidden[i], &d_raw, &mut grads.emb2, &mut d_hid)?;
        for (g, h) in d_hid.iter_mut().zip(&emb_hidden[i]) {
            *g *= 1.0 - h * h;
        }
        let mut sink = vec![0.0; feats[i].len()];
        model.emb1.backward(&feats[i], &d_hid, &mut grads.emb1, &mut sink)?;
    }

    Ok(loss)
}

/// Un-averaged BCE loss of one labeled window, for gradient checking.
pub fn window_loss(model: &RdModel, w: &Window, frame_labels: &[u8]) -> Result<f64> {
    let embeddings = embed_frames(model, w)?;
    let sim = self_similarity(&embeddings)?;
    let mut loss = 0.0;
    for i in 0..w.t() {
        let y = f64::from(frame_labels[i]);
        loss += bce_with_logit(classify_row(model, sim.row(i), i)?, y);
    }
    Ok(loss)
}

/// Un-averaged loss and flat gradient for one labeled window.
pub fn window_loss_and_grad(
    model: &RdModel,
    w: &Window,
    frame_labels: &[u8],
) -> Result<(f64, Vec<f64>)> {
    let mut grads = RdGrads::zeros_like(model);
    let loss = backward(model, w, frame_labels, &mut grads, 1.0)?;
    Ok((loss, grads.to_flat()))
}
