//! Shared seeded mini-batch training loop used by the three streams.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numkit::{adam_step, clip_l2, AdamHyper, AdamState, GRAD_CLIP_NORM};

/// A model whose trainable parameters round-trip through one flat vector.
pub(crate) trait FlatParams {
    fn to_flat(&self) -> Vec<f64>;
    fn load_flat(&mut self, flat: &[f64]);
}

/// Runs `epochs` of shuffled mini-batch Adam. `batch_grad` returns the
/// un-averaged loss over the batch items plus the flat gradient (scaled
/// however the stream defines its objective). Returns the per-epoch loss
/// curve, un-averaged totals over the training set.
pub(crate) fn run_training<M: FlatParams>(
    model: &mut M,
    n_items: usize,
    lr: f64,
    batch_size: usize,
    epochs: usize,
    shuffle_seed: u64,
    mut batch_grad: impl FnMut(&M, &[usize]) -> Result<(f64, Vec<f64>)>,
) -> Result<Vec<f64>> {
    if n_items == 0 {
        return Err(Error::Usage("empty training set".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut flat = model.to_flat();
    let mut adam = AdamState::new(flat.len(), AdamHyper::with_lr(lr));
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    let mut order: Vec<usize> = (0..n_items).collect();
    let mut curve = Vec::with_capacity(epochs);

    for epoch in 1..=epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(batch_size) {
            let (loss, mut grads) = batch_grad(model, batch)?;
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    msg: format!("loss became non-finite ({loss})"),
                });
            }
            epoch_loss += loss;
            clip_l2(&mut grads, GRAD_CLIP_NORM);
            let (new_flat, new_adam) = adam_step(&flat, &grads, &adam)?;
            flat = new_flat;
            adam = new_adam;
            model.load_flat(&flat);
        }
        curve.push(epoch_loss);
    }
    Ok(curve)
}
