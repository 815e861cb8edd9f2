//! Seeded synthetic pose data.
//!
//! Normal motion is a sum of slow drifts (a global center path plus small
//! per-keypoint wander), occasional fast aperiodic gestures (smooth one-shot
//! bumps of a few keypoints), and observation noise. Drift periods sit above
//! the plantable anomaly band and gestures do not repeat, so normal windows
//! contain no short-scale periodicity; gestures make speed alone useless as
//! an anomaly cue. Test videos carry one contiguous anomalous segment in
//! which a subset of keypoints oscillates sinusoidally with a period drawn
//! from the configured range: sustained, fast and periodic, mimicking short
//! repetitive limb motion.

use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

use super::pose::{PoseFrame, PoseSequence};

/// Amplitude of the planted sinusoidal limb oscillation, in base-pose units.
const OSC_AMPLITUDE: f64 = 0.22;
/// Global drift: component count, amplitude range, period range (frames).
const DRIFT_COMPONENTS: usize = 2;
const DRIFT_AMP: (f64, f64) = (0.10, 0.35);
const DRIFT_PERIOD: (f64, f64) = (256.0, 1024.0);
/// Per-keypoint wander: component count, amplitude range, period range.
const WANDER_COMPONENTS: usize = 2;
const WANDER_AMP: (f64, f64) = (0.03, 0.08);
const WANDER_PERIOD: (f64, f64) = (64.0, 256.0);
/// Per-video jitter applied to the shared canonical skeleton.
const SKELETON_JITTER: f64 = 0.03;
/// Gestures: mean spacing (frames), duration range, amplitude range,
/// keypoints moved per gesture.
const GESTURE_SPACING: usize = 64;
const GESTURE_DURATION: (usize, usize) = (10, 30);
const GESTURE_AMP: (f64, f64) = (0.15, 0.30);
const GESTURE_MAX_KEYPOINTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub train_videos: usize,
    pub test_videos: usize,
    pub frames_per_video: usize,
    pub keypoints: usize,
    pub dims: usize,
    /// Inclusive range of anomaly oscillation periods, in frames.
    pub period_lo: usize,
    pub period_hi: usize,
    /// Fraction of each test video covered by the anomalous segment.
    pub anomaly_fraction: f64,
    /// Uniform observation noise amplitude added to every coordinate.
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            train_videos: 40,
            test_videos: 10,
            frames_per_video: 512,
            keypoints: 17,
            dims: 2,
            period_lo: 8,
            period_hi: 32,
            anomaly_fraction: 0.3,
            noise_amplitude: 0.004,
            seed: 7,
        }
    }
}

impl SynthConfig {
    /// The planted segment length for one test video.
    pub fn segment_len(&self) -> usize {
        (self.anomaly_fraction * self.frames_per_video as f64).round() as usize
    }

    /// Validates against the window length `t` the data will be cut at.
    pub fn validate(&self, t: usize) -> Result<()> {
        if self.train_videos == 0 || self.test_videos == 0 || self.frames_per_video == 0 {
            return Err(Error::Config("video and frame counts must be positive".into()));
        }
        if self.keypoints < 2 {
            return Err(Error::Config(format!("keypoints must be >= 2, got {}", self.keypoints)));
        }
        if self.dims != 2 && self.dims != 3 {
            return Err(Error::Config(format!("dims must be 2 or 3, got {}", self.dims)));
        }
        if self.period_lo < 4 || self.period_hi > t || self.period_lo > self.period_hi {
            return Err(Error::Config(format!(
                "period range [{}, {}] must lie within [4, {t}]",
                self.period_lo, self.period_hi
            )));
        }
        if !(0.0..1.0).contains(&self.anomaly_fraction) {
            return Err(Error::Config(format!(
                "anomaly fraction must be in [0, 1), got {}",
                self.anomaly_fraction
            )));
        }
        if self.anomaly_fraction > 0.0 {
            let seg = self.segment_len();
            if seg == 0 || seg >= self.frames_per_video {
                return Err(Error::Config(format!(
                    "anomaly fraction {} leaves no room for a {}-frame segment plus normal frames \
                     in a {}-frame video",
                    self.anomaly_fraction, seg, self.frames_per_video
                )));
            }
        }
        if !self.noise_amplitude.is_finite() || self.noise_amplitude < 0.0 {
            return Err(Error::Config("noise amplitude must be finite and >= 0".into()));
        }
        Ok(())
    }
}

struct Sinusoid {
    amp: f64,
    period: f64,
    phase: f64,
}

impl Sinusoid {
    fn draw(rng: &mut ChaCha8Rng, amp: (f64, f64), period: (f64, f64)) -> Self {
        Sinusoid {
            amp: rng.gen_range(amp.0..amp.1),
            period: rng.gen_range(period.0..period.1),
            phase: rng.gen_range(0.0..TAU),
        }
    }

    fn at(&self, t: f64) -> f64 {
        self.amp * (TAU * t / self.period + self.phase).sin()
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Canonical skeleton shared by every video: keypoints on an ellipse with
/// alternating radii (and a height spiral in 3D), jittered per video. A
/// shared geometry matters: models must generalize across videos, the way
/// human skeletons share proportions.
fn base_pose(rng: &mut ChaCha8Rng, k: usize, d: usize) -> Vec<f64> {
    let mut pose = vec![0.0; k * d];
    for j in 0..k {
        let ang = TAU * j as f64 / k as f64;
        let radius = if j % 2 == 0 { 0.42 } else { 0.28 };
        pose[j * d] = radius * ang.cos();
        pose[j * d + 1] = radius * ang.sin();
        if d == 3 {
            pose[j * d + 2] = -0.3 + 0.6 * j as f64 / (k - 1).max(1) as f64;
        }
    }
    for v in &mut pose {
        *v += rng.gen_range(-SKELETON_JITTER..SKELETON_JITTER);
    }
    pose
}

/// A one-shot smooth movement of a few keypoints: sin^2 bump, zero velocity
/// at both ends, never repeated.
struct Gesture {
    start: usize,
    duration: usize,
    amp: f64,
    /// (keypoint index, direction) per moved keypoint.
    targets: Vec<(usize, Vec<f64>)>,
}

impl Gesture {
    fn draw(rng: &mut ChaCha8Rng, n: usize, k: usize, d: usize) -> Self {
        let duration = rng.gen_range(GESTURE_DURATION.0..=GESTURE_DURATION.1).min(n);
        let start = rng.gen_range(0..=n - duration);
        let amp = rng.gen_range(GESTURE_AMP.0..GESTURE_AMP.1);
        let count = rng.gen_range(1..=GESTURE_MAX_KEYPOINTS.min(k));
        let mut picked = Vec::new();
        while picked.len() < count {
            let j = rng.gen_range(0..k);
            if !picked.contains(&j) {
                picked.push(j);
            }
        }
        let targets = picked.into_iter().map(|j| (j, unit_vector(rng, d))).collect();
        Gesture { start, duration, amp, targets }
    }

    fn offset(&self, t: usize) -> Option<f64> {
        if t < self.start || t >= self.start + self.duration {
            return None;
        }
        let phase = (t - self.start) as f64 / self.duration as f64;
        Some(self.amp * (std::f64::consts::PI * phase).sin().powi(2))
    }
}

struct Anomaly {
    start: usize,
    len: usize,
    period: usize,
    /// (keypoint index, direction, phase) per oscillating keypoint.
    limbs: Vec<(usize, Vec<f64>, f64)>,
}

fn generate_video(
    cfg: &SynthConfig,
    video_id: String,
    rng: &mut ChaCha8Rng,
    anomalous: bool,
) -> PoseSequence {
    let (k, d, n) = (cfg.keypoints, cfg.dims, cfg.frames_per_video);
    let base = base_pose(rng, k, d);

    let drift: Vec<Vec<Sinusoid>> = (0..d)
        .map(|_| {
            (0..DRIFT_COMPONENTS)
                .map(|_| Sinusoid::draw(rng, DRIFT_AMP, DRIFT_PERIOD))
                .collect()
        })
        .collect();
    let wander: Vec<Vec<Sinusoid>> = (0..k * d)
        .map(|_| {
            (0..WANDER_COMPONENTS)
                .map(|_| Sinusoid::draw(rng, WANDER_AMP, WANDER_PERIOD))
                .collect()
        })
        .collect();
    let gestures: Vec<Gesture> =
        (0..n.div_ceil(GESTURE_SPACING)).map(|_| Gesture::draw(rng, n, k, d)).collect();

    let anomaly = if anomalous && cfg.anomaly_fraction > 0.0 {
        let len = cfg.segment_len();
        let start = rng.gen_range(0..=n - len);
        let period = rng.gen_range(cfg.period_lo..=cfg.period_hi);
        let limb_count = k.div_ceil(4);
        let mut picked = Vec::new();
        while picked.len() < limb_count {
            let j = rng.gen_range(0..k);
            if !picked.contains(&j) {
                picked.push(j);
            }
        }
        let limbs = picked
            .into_iter()
            .map(|j| (j, unit_vector(rng, d), rng.gen_range(0.0..TAU)))
            .collect();
        Some(Anomaly { start, len, period, limbs })
    } else {
        None
    };

    let mut frames = Vec::with_capacity(n);
    let mut labels = vec![0u8; n];
    for t in 0..n {
        let tf = t as f64;
        let mut coords = vec![0.0; k * d];
        for j in 0..k {
            for a in 0..d {
                let mut v = base[j * d + a];
                for s in &drift[a] {
                    v += s.at(tf);
                }
                for s in &wander[j * d + a] {
                    v += s.at(tf);
                }
                v += rng.gen_range(-cfg.noise_amplitude..=cfg.noise_amplitude);
                coords[j * d + a] = v;
            }
        }
        for g in &gestures {
            if let Some(bump) = g.offset(t) {
                for (j, dir) in &g.targets {
                    for a in 0..d {
                        coords[j * d + a] += bump * dir[a];
                    }
                }
            }
        }
        if let Some(an) = &anomaly {
            if t >= an.start && t < an.start + an.len {
                labels[t] = 1;
                let local = (t - an.start) as f64;
                for (j, dir, phase) in &an.limbs {
                    let osc = OSC_AMPLITUDE * (TAU * local / an.period as f64 + phase).sin();
                    for a in 0..d {
                        coords[j * d + a] += osc * dir[a];
                    }
                }
            }
        }
        frames.push(PoseFrame::new(t, k, d, coords).expect("generator emits valid frames"));
    }

    let labels = anomalous.then_some(labels);
    PoseSequence::new(video_id, frames, labels).expect("generator emits valid sequences")
}

/// Generates the train and test splits. Train sequences contain only normal
/// motion and carry no labels; test sequences carry per-frame labels marking
/// the planted segment. Identical seed, identical dataset.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<(Vec<PoseSequence>, Vec<PoseSequence>)> {
    cfg.validate(cfg.period_hi.max(4))?;
    let train = (0..cfg.train_videos)
        .map(|i| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seeds::derive_indexed(cfg.seed, "synth-train", i as u64));
            generate_video(cfg, format!("train_{i:03}"), &mut rng, false)
        })
        .collect();
    let test = (0..cfg.test_videos)
        .map(|i| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seeds::derive_indexed(cfg.seed, "synth-test", i as u64));
            generate_video(cfg, format!("test_{i:03}"), &mut rng, true)
        })
        .collect();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = SynthConfig {
            train_videos: 3,
            test_videos: 2,
            frames_per_video: 96,
            period_lo: 8,
            period_hi: 16,
            ..SynthConfig::default()
        };
        let (tr1, te1) = synth_dataset(&cfg).unwrap();
        let (tr2, te2) = synth_dataset(&cfg).unwrap();
        assert_eq!(tr1, tr2);
        assert_eq!(te1, te2);
    }

    #[test]
    fn labeled_fraction_matches_config() {
        let cfg = SynthConfig {
            train_videos: 1,
            test_videos: 4,
            frames_per_video: 200,
            anomaly_fraction: 0.25,
            period_lo: 8,
            period_hi: 16,
            ..SynthConfig::default()
        };
        let (_, test) = synth_dataset(&cfg).unwrap();
        for seq in &test {
            let labels = seq.labels.as_ref().unwrap();
            let count: usize = labels.iter().map(|l| *l as usize).sum();
            assert_eq!(count, cfg.segment_len());
            // One contiguous segment.
            let first = labels.iter().position(|l| *l == 1).unwrap();
            assert!(labels[first..first + count].iter().all(|l| *l == 1));
        }
    }

    #[test]
    fn train_videos_are_unlabeled_and_shaped() {
        let cfg = SynthConfig {
            train_videos: 2,
            test_videos: 1,
            frames_per_video: 64,
            period_lo: 8,
            period_hi: 16,
            ..SynthConfig::default()
        };
        let (train, _) = synth_dataset(&cfg).unwrap();
        assert_eq!(train.len(), 2);
        for seq in &train {
            assert!(seq.labels.is_none());
            assert_eq!(seq.len(), 64);
            assert_eq!(seq.k(), cfg.keypoints);
            assert_eq!(seq.d(), cfg.dims);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let ok = SynthConfig::default();
        assert!(ok.validate(64).is_ok());
        let mut c = ok.clone();
        c.anomaly_fraction = 0.9999;
        assert!(matches!(c.validate(64), Err(Error::Config(_))));
        c = ok.clone();
        c.period_lo = 2;
        assert!(c.validate(64).is_err());
        c = ok.clone();
        c.period_hi = 128;
        assert!(c.validate(64).is_err());
        c = ok.clone();
        c.dims = 4;
        assert!(c.validate(64).is_err());
        c = ok.clone();
        c.keypoints = 1;
        assert!(c.validate(64).is_err());
        c = ok;
        c.noise_amplitude = -0.1;
        assert!(c.validate(64).is_err());
    }

    /// Naive DFT magnitudes of a real trace.
    fn dft_magnitudes(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n / 2 + 1)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let ang = TAU * k as f64 * t as f64 / n as f64;
                    re += v * ang.cos();
                    im -= v * ang.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    fn detrend(x: &[f64]) -> Vec<f64> {
        let n = x.len() as f64;
        let mean_t = (n - 1.0) / 2.0;
        let mean_x = x.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut den = 0.0;
        for (t, &v) in x.iter().enumerate() {
            let dt = t as f64 - mean_t;
            num += dt * (v - mean_x);
            den += dt * dt;
        }
        let slope = num / den;
        x.iter()
            .enumerate()
            .map(|(t, &v)| v - mean_x - slope * (t as f64 - mean_t))
            .collect()
    }

    #[test]
    fn planted_segment_has_the_configured_period() {
        // Degenerate period range pins the expected period; the segment is an
        // exact multiple of it so the spectral peak falls on a bin.
        let period = 16usize;
        let cfg = SynthConfig {
            train_videos: 1,
            test_videos: 3,
            frames_per_video: 256,
            anomaly_fraction: 0.25,
            period_lo: period,
            period_hi: period,
            ..SynthConfig::default()
        };
        let (_, test) = synth_dataset(&cfg).unwrap();
        for seq in &test {
            let labels = seq.labels.as_ref().unwrap();
            let start = labels.iter().position(|l| *l == 1).unwrap();
            let len: usize = labels.iter().map(|l| *l as usize).sum();

            // Band of bins whose period lies in the plantable range [4, 64].
            let band = |k: usize| -> bool {
                let p = len as f64 / k as f64;
                (4.0..=64.0).contains(&p)
            };

            let mut best_energy = -1.0;
            let mut best_bin = 0;
            for j in 0..seq.k() {
                for a in 0..seq.d() {
                    let trace: Vec<f64> = (start..start + len)
                        .map(|t| seq.frames[t].coord(j, a))
                        .collect();
                    let mags = dft_magnitudes(&detrend(&trace));
                    let energy: f64 =
                        (1..mags.len()).filter(|k| band(*k)).map(|k| mags[k] * mags[k]).sum();
                    if energy > best_energy {
                        best_energy = energy;
                        best_bin = (1..mags.len())
                            .filter(|k| band(*k))
                            .max_by(|a, b| mags[*a].partial_cmp(&mags[*b]).unwrap())
                            .unwrap();
                    }
                }
            }
            let estimated = len as f64 / best_bin as f64;
            assert!(
                (estimated - period as f64).abs() <= 1.0,
                "video {}: estimated period {estimated}, expected {period}",
                seq.video_id
            );
        }
    }
}
