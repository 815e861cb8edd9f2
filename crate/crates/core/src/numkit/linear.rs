use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::Result;

/// Affine map y = W x + b.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Matrix,
    pub b: Vec<f64>,
}

/// Gradients of a [`Linear`] layer, same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Linear {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Linear { w: Matrix::zeros(out_dim, in_dim), b: vec![0.0; out_dim] }
    }

    pub fn xavier<R: Rng>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        Linear { w: Matrix::xavier(out_dim, in_dim, rng), b: vec![0.0; out_dim] }
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.w.matvec(x)?;
        super::ops::add_assign(&mut y, &self.b);
        Ok(y)
    }

    /// Accumulates parameter gradients for upstream `dy` at input `x` and
    /// adds the input gradient W^T dy into `dx`.
    pub fn backward(
        &self,
        x: &[f64],
        dy: &[f64],
        grads: &mut LinearGrads,
        dx: &mut [f64],
    ) -> Result<()> {
        grads.w.add_outer(dy, x)?;
        super::ops::add_assign(&mut grads.b, dy);
        self.w.matvec_t_acc(dy, dx)?;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.w.rows() * self.w.cols() + self.b.len()
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w.data());
        out.extend_from_slice(&self.b);
    }

    pub fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        let wn = self.w.rows() * self.w.cols();
        self.w.data_mut().copy_from_slice(&src[*pos..*pos + wn]);
        *pos += wn;
        let bn = self.b.len();
        self.b.copy_from_slice(&src[*pos..*pos + bn]);
        *pos += bn;
    }
}

impl LinearGrads {
    pub fn zeros_like(l: &Linear) -> Self {
        LinearGrads { w: Matrix::zeros(l.w.rows(), l.w.cols()), b: vec![0.0; l.b.len()] }
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w.data());
        out.extend_from_slice(&self.b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_applies_bias() {
        let mut l = Linear::zeros(2, 2);
        l.w = Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        l.b = vec![0.5, -0.5];
        assert_eq!(l.forward(&[1.0, 2.0]).unwrap(), vec![1.5, 1.5]);
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let l = Linear::xavier(3, 4, &mut rng);
        let mut flat = Vec::new();
        l.write_flat(&mut flat);
        let mut l2 = Linear::zeros(3, 4);
        let mut pos = 0;
        l2.read_flat(&flat, &mut pos);
        assert_eq!(pos, l.param_count());
        assert_eq!(l, l2);
    }

    use rand::SeedableRng;
}
