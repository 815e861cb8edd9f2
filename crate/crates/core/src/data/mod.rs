//! Pose-sequence data model: ingestion, per-frame normalization, windowing,
//! and the seeded synthetic dataset generator.

pub mod io;
pub mod pose;
pub mod synth;
pub mod window;

pub use io::{load_pose_sequence, parse_pose_sequence, render_pose_sequence, write_pose_sequence};
pub use pose::{normalize_frames, normalize_pose, PoseFrame, PoseSequence};
pub use synth::{synth_dataset, SynthConfig};
pub use window::{reassemble_scores, window_sequence, Purpose, Window};
