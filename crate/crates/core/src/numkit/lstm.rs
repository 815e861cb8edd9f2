use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::ops;
use crate::error::{Error, Result};

/// Parameters of one LSTM cell: per-gate input weights W (hidden x input),
/// recurrent weights U (hidden x hidden) and biases b (hidden).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_g: Matrix,
    pub w_o: Matrix,
    pub u_i: Matrix,
    pub u_f: Matrix,
    pub u_g: Matrix,
    pub u_o: Matrix,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_g: Vec<f64>,
    pub b_o: Vec<f64>,
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c_new: Vec<f64>,
}

/// Gradients of [`LstmParams`], same shapes.
#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_g: Matrix,
    pub w_o: Matrix,
    pub u_i: Matrix,
    pub u_f: Matrix,
    pub u_g: Matrix,
    pub u_o: Matrix,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_g: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmParams {
            input_dim,
            hidden_dim,
            w_i: Matrix::zeros(hidden_dim, input_dim),
            w_f: Matrix::zeros(hidden_dim, input_dim),
            w_g: Matrix::zeros(hidden_dim, input_dim),
            w_o: Matrix::zeros(hidden_dim, input_dim),
            u_i: Matrix::zeros(hidden_dim, hidden_dim),
            u_f: Matrix::zeros(hidden_dim, hidden_dim),
            u_g: Matrix::zeros(hidden_dim, hidden_dim),
            u_o: Matrix::zeros(hidden_dim, hidden_dim),
            b_i: vec![0.0; hidden_dim],
            b_f: vec![0.0; hidden_dim],
            b_g: vec![0.0; hidden_dim],
            b_o: vec![0.0; hidden_dim],
        }
    }

    /// Xavier-uniform weights, zero biases except the forget bias at 1.0.
    pub fn xavier<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut p = LstmParams {
            input_dim,
            hidden_dim,
            w_i: Matrix::xavier(hidden_dim, input_dim, rng),
            w_f: Matrix::xavier(hidden_dim, input_dim, rng),
            w_g: Matrix::xavier(hidden_dim, input_dim, rng),
            w_o: Matrix::xavier(hidden_dim, input_dim, rng),
            u_i: Matrix::xavier(hidden_dim, hidden_dim, rng),
            u_f: Matrix::xavier(hidden_dim, hidden_dim, rng),
            u_g: Matrix::xavier(hidden_dim, hidden_dim, rng),
            u_o: Matrix::xavier(hidden_dim, hidden_dim, rng),
            b_i: vec![0.0; hidden_dim],
            b_f: vec![0.0; hidden_dim],
            b_g: vec![0.0; hidden_dim],
            b_o: vec![0.0; hidden_dim],
        };
        p.b_f = vec![1.0; hidden_dim];
        p
    }

    fn check_shapes(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<()> {
        if x.len() != self.input_dim || h.len() != self.hidden_dim || c.len() != self.hidden_dim {
            return Err(Error::Dimension(format!(
                "lstm cell expects x[{}], h[{}], c[{}]; got x[{}], h[{}], c[{}]",
                self.input_dim,
                self.hidden_dim,
                self.hidden_dim,
                x.len(),
                h.len(),
                c.len()
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        4 * self.hidden_dim * self.input_dim + 4 * self.hidden_dim * self.hidden_dim
            + 4 * self.hidden_dim
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for m in [&self.w_i, &self.w_f, &self.w_g, &self.w_o, &self.u_i, &self.u_f, &self.u_g,
            &self.u_o]
        {
            out.extend_from_slice(m.data());
        }
        for b in [&self.b_i, &self.b_f, &self.b_g, &self.b_o] {
            out.extend_from_slice(b);
        }
    }

    pub fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        for m in [&mut self.w_i, &mut self.w_f, &mut self.w_g, &mut self.w_o, &mut self.u_i,
            &mut self.u_f, &mut self.u_g, &mut self.u_o]
        {
            let n = m.rows() * m.cols();
            m.data_mut().copy_from_slice(&src[*pos..*pos + n]);
            *pos += n;
        }
        for b in [&mut self.b_i, &mut self.b_f, &mut self.b_g, &mut self.b_o] {
            let n = b.len();
            b.copy_from_slice(&src[*pos..*pos + n]);
            *pos += n;
        }
    }
}

/// One gated recurrence step; returns the new hidden and cell vectors.
pub fn cell_forward(
    p: &LstmParams,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (h2, c2, _) = cell_forward_cached(p, x, h, c)?;
    Ok((h2, c2))
}

/// Forward step that also returns the cache consumed by [`cell_backward`].
pub fn cell_forward_cached(
    p: &LstmParams,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, LstmCache)> {
    p.check_shapes(x, h, c)?;

    let gate = |w: &Matrix, u: &Matrix, b: &[f64]| -> Result<Vec<f64>> {
        let mut a = w.matvec(x)?;
        let rec = u.matvec(h)?;
        ops::add_assign(&mut a, &rec);
        ops::add_assign(&mut a, b);
        Ok(a)
    };

    let mut i = gate(&p.w_i, &p.u_i, &p.b_i)?;
    let mut f = gate(&p.w_f, &p.u_f, &p.b_f)?;
    let mut g = gate(&p.w_g, &p.u_g, &p.b_g)?;
    let mut o = gate(&p.w_o, &p.u_o, &p.b_o)?;
    ops::sigmoid_vec(&mut i);
    ops::sigmoid_vec(&mut f);
    ops::tanh_vec(&mut g);
    ops::sigmoid_vec(&mut o);

    let mut c_new = vec![0.0; p.hidden_dim];
    let mut h_new = vec![0.0; p.hidden_dim];
    for k in 0..p.hidden_dim {
        c_new[k] = f[k] * c[k] + i[k] * g[k];
        h_new[k] = o[k] * c_new[k].tanh();
    }

    let cache = LstmCache {
        x: x.to_vec(),
        h_prev: h.to_vec(),
        c_prev: c.to_vec(),
        i,
        f,
        g,
        o,
        c_new: c_new.clone(),
    };
    Ok((h_new, c_new, cache))
}

/// Backward step. Accumulates parameter gradients into `grads` and returns
/// (dx, dh_prev, dc_prev) for the upstream gradients (dh, dc).
pub fn cell_backward(
    p: &LstmParams,
    cache: &LstmCache,
    dh: &[f64],
    dc: &[f64],
    grads: &mut LstmGrads,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = p.hidden_dim;
    if dh.len() != n || dc.len() != n {
        return Err(Error::Dimension(format!(
            "lstm backward expects dh[{n}], dc[{n}]; got dh[{}], dc[{}]",
            dh.len(),
            dc.len()
        )));
    }

    let mut da_i = vec![0.0; n];
    let mut da_f = vec![0.0; n];
    let mut da_g = vec![0.0; n];
    let mut da_o = vec![0.0; n];
    let mut dc_prev = vec![0.0; n];

    for k in 0..n {
        let tc = cache.c_new[k].tanh();
        let do_k = dh[k] * tc;
        let dc_total = dc[k] + dh[k] * cache.o[k] * (1.0 - tc * tc);
        let di = dc_total * cache.g[k];
        let df = dc_total * cache.c_prev[k];
        let dg = dc_total * cache.i[k];
        dc_prev[k] = dc_total * cache.f[k];

        da_i[k] = di * cache.i[k] * (1.0 - cache.i[k]);
        da_f[k] = df * cache.f[k] * (1.0 - cache.f[k]);
        da_g[k] = dg * (1.0 - cache.g[k] * cache.g[k]);
        da_o[k] = do_k * cache.o[k] * (1.0 - cache.o[k]);
    }

    let mut dx = vec![0.0; p.input_dim];
    let mut dh_prev = vec![0.0; n];

    grads.w_i.add_outer(&da_i, &cache.x)?;
    grads.w_f.add_outer(&da_f, &cache.x)?;
    grads.w_g.add_outer(&da_g, &cache.x)?;
    grads.w_o.add_outer(&da_o, &cache.x)?;
    grads.u_i.add_outer(&da_i, &cache.h_prev)?;
    grads.u_f.add_outer(&da_f, &cache.h_prev)?;
    grads.u_g.add_outer(&da_g, &cache.h_prev)?;
    grads.u_o.add_outer(&da_o, &cache.h_prev)?;
    ops::add_assign(&mut grads.b_i, &da_i);
    ops::add_assign(&mut grads.b_f, &da_f);
    ops::add_assign(&mut grads.b_g, &da_g);
    ops::add_assign(&mut grads.b_o, &da_o);

    p.w_i.matvec_t_acc(&da_i, &mut dx)?;
    p.w_f.matvec_t_acc(&da_f, &mut dx)?;
    p.w_g.matvec_t_acc(&da_g, &mut dx)?;
    p.w_o.matvec_t_acc(&da_o, &mut dx)?;
    p.u_i.matvec_t_acc(&da_i, &mut dh_prev)?;
    p.u_f.matvec_t_acc(&da_f, &mut dh_prev)?;
    p.u_g.matvec_t_acc(&da_g, &mut dh_prev)?;
    p.u_o.matvec_t_acc(&da_o, &mut dh_prev)?;

    Ok((dx, dh_prev, dc_prev))
}

impl LstmGrads {
    pub fn zeros_like(p: &LstmParams) -> Self {
        let h = p.hidden_dim;
        let i = p.input_dim;
        LstmGrads {
            w_i: Matrix::zeros(h, i),
            w_f: Matrix::zeros(h, i),
            w_g: Matrix::zeros(h, i),
            w_o: Matrix::zeros(h, i),
            u_i: Matrix::zeros(h, h),
            u_f: Matrix::zeros(h, h),
            u_g: Matrix::zeros(h, h),
            u_o: Matrix::zeros(h, h),
            b_i: vec![0.0; h],
            b_f: vec![0.0; h],
            b_g: vec![0.0; h],
            b_o: vec![0.0; h],
        }
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for m in [&self.w_i, &self.w_f, &self.w_g, &self.w_o, &self.u_i, &self.u_f, &self.u_g,
            &self.u_o]
        {
            out.extend_from_slice(m.data());
        }
        for b in [&self.b_i, &self.b_f, &self.b_g, &self.b_o] {
            out.extend_from_slice(b);
        }
    }
}
