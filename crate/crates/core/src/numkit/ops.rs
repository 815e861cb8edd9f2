//! Elementwise vector helpers shared by the recurrent kernels.

use crate::error::{Error, Result};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn sigmoid_vec(v: &mut [f64]) {
    for x in v {
        *x = sigmoid(*x);
    }
}

pub fn tanh_vec(v: &mut [f64]) {
    for x in v {
        *x = x.tanh();
    }
}

pub fn add_assign(a: &mut [f64], b: &[f64]) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Numerically stabilized softmax over one score vector.
pub fn softmax_row(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Dimension("softmax of an empty vector".into()));
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for x in &mut out {
        *x /= sum;
    }
    Ok(out)
}

/// Backward pass of `softmax_row`: given y = softmax(v) and dL/dy, returns dL/dv.
pub fn softmax_row_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    debug_assert_eq!(y.len(), dy.len());
    let dot: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
    y.iter().zip(dy).map(|(&yi, &dyi)| yi * (dyi - dot)).collect()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scale `v` in place so its global L2 norm does not exceed `max_norm`.
pub fn clip_l2(v: &mut [f64], max_norm: f64) {
    let norm = l2_norm(v);
    if norm > max_norm {
        let s = max_norm / norm;
        for x in v {
            *x *= s;
        }
    }
}
