//! Single-layer LSTM over a `(T, C_in)` sequence, returning every hidden state.
//!
//! Gate layout inside the `4H` axis is `[input, forget, candidate, output]`.

use crate::error::{Error, Result};
use crate::nn::activation::sigmoid;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
pub struct LstmParams<'a> {
    /// `(C_in, 4H)`
    pub w_ih: &'a Tensor,
    /// `(H, 4H)`
    pub w_hh: &'a Tensor,
    /// `(4H,)`
    pub bias: &'a Tensor,
}

impl LstmParams<'_> {
    pub fn hidden(&self) -> usize {
        self.w_hh.rows()
    }

    fn check(&self, c_in: usize) -> Result<usize> {
        let h = self.w_hh.shape().first().copied().unwrap_or(0);
        if h == 0 {
            return Err(Error::config("LSTM hidden size must be positive"));
        }
        self.w_ih.expect_shape(&[c_in, 4 * h], "lstm.w_ih")?;
        self.w_hh.expect_shape(&[h, 4 * h], "lstm.w_hh")?;
        self.bias.expect_shape(&[4 * h], "lstm.bias")?;
        Ok(h)
    }
}

/// Everything backpropagation through time needs from the forward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    inputs: Tensor,
    /// Post-activation gates, `(T, 4H)`.
    gates: Tensor,
    cells: Tensor,
    hidden: Tensor,
    tanh_cells: Tensor,
    h0: Vec<f64>,
    c0: Vec<f64>,
}

impl LstmCache {
    pub fn hidden(&self) -> &Tensor {
        &self.hidden
    }

    pub fn into_hidden(self) -> Tensor {
        self.hidden
    }

    pub fn cells(&self) -> &Tensor {
        &self.cells
    }
}

pub fn lstm_forward(
    inputs: &Tensor,
    params: LstmParams<'_>,
    h0: Option<&[f64]>,
    c0: Option<&[f64]>,
) -> Result<LstmCache> {
    let (t_len, c_in) = (inputs.rows(), inputs.cols());
    let h = params.check(c_in)?;
    let h0 = h0.map_or_else(|| vec![0.0; h], <[f64]>::to_vec);
    let c0 = c0.map_or_else(|| vec![0.0; h], <[f64]>::to_vec);
    if h0.len() != h || c0.len() != h {
        return Err(Error::config("LSTM initial state has wrong length"));
    }

    let mut gates = Tensor::zeros(&[t_len, 4 * h]);
    let mut cells = Tensor::zeros(&[t_len, h]);
    let mut hidden = Tensor::zeros(&[t_len, h]);
    let mut tanh_cells = Tensor::zeros(&[t_len, h]);
    let mut z = vec![0.0; 4 * h];
    let mut h_prev = h0.clone();
    let mut c_prev = c0.clone();
    let w_ih = params.w_ih.data();
    let w_hh = params.w_hh.data();

    for t in 0..t_len {
        z.copy_from_slice(params.bias.data());
        for (c, &x) in inputs.row(t).iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let w = &w_ih[c * 4 * h..(c + 1) * 4 * h];
            z.iter_mut().zip(w).for_each(|(zi, wi)| *zi += x * wi);
        }
        for (j, &hv) in h_prev.iter().enumerate() {
            if hv == 0.0 {
                continue;
            }
            let w = &w_hh[j * 4 * h..(j + 1) * 4 * h];
            z.iter_mut().zip(w).for_each(|(zi, wi)| *zi += hv * wi);
        }
        let g_row = gates.row_mut(t);
        for k in 0..h {
            g_row[k] = sigmoid(z[k]);
            g_row[h + k] = sigmoid(z[h + k]);
            g_row[2 * h + k] = z[2 * h + k].tanh();
            g_row[3 * h + k] = sigmoid(z[3 * h + k]);
        }
        for k in 0..h {
            let (i, f, g, o) = (g_row[k], g_row[h + k], g_row[2 * h + k], g_row[3 * h + k]);
            let c = f * c_prev[k] + i * g;
            let tc = c.tanh();
            cells.set(t, k, c);
            tanh_cells.set(t, k, tc);
            hidden.set(t, k, o * tc);
        }
        h_prev.copy_from_slice(hidden.row(t));
        c_prev.copy_from_slice(cells.row(t));
    }

    Ok(LstmCache {
        inputs: inputs.clone(),
        gates,
        cells,
        hidden,
        tanh_cells,
        h0,
        c0,
    })
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub inputs: Tensor,
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub bias: Tensor,
}

/// Exact backpropagation through time for [`lstm_forward`].
pub fn lstm_backward(
    cache: Option<&LstmCache>,
    params: LstmParams<'_>,
    upstream: &Tensor,
) -> Result<LstmGrads> {
    let cache =
        cache.ok_or_else(|| Error::usage("LSTM backward called without a forward cache"))?;
    let (t_len, c_in) = (cache.inputs.rows(), cache.inputs.cols());
    let h = params.check(c_in)?;
    upstream.expect_shape(&[t_len, h], "LSTM upstream gradient")?;

    let w_ih = params.w_ih.data();
    let w_hh = params.w_hh.data();
    let mut g_in = Tensor::zeros(&[t_len, c_in]);
    let mut g_wih = Tensor::zeros(&[c_in, 4 * h]);
    let mut g_whh = Tensor::zeros(&[h, 4 * h]);
    let mut g_b = Tensor::zeros(&[4 * h]);
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];

    for t in (0..t_len).rev() {
        let gates = cache.gates.row(t);
        let tc = cache.tanh_cells.row(t);
        let c_prev: &[f64] = if t == 0 {
            &cache.c0
        } else {
            cache.cells.row(t - 1)
        };
        let h_prev: &[f64] = if t == 0 {
            &cache.h0
        } else {
            cache.hidden.row(t - 1)
        };
        let up = upstream.row(t);
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let dh = up[k] + dh_next[k];
            let d_o = dh * tc[k];
            let dc = dh * o * (1.0 - tc[k] * tc[k]) + dc_next[k];
            let di = dc * g;
            let dg = dc * i;
            let df = dc * c_prev[k];
            dc_next[k] = dc * f;
            dz[k] = di * i * (1.0 - i);
            dz[h + k] = df * f * (1.0 - f);
            dz[2 * h + k] = dg * (1.0 - g * g);
            dz[3 * h + k] = d_o * o * (1.0 - o);
        }
        g_b.data_mut()
            .iter_mut()
            .zip(&dz)
            .for_each(|(b, d)| *b += d);

        let x = cache.inputs.row(t);
        for c in 0..c_in {
            let w = &w_ih[c * 4 * h..(c + 1) * 4 * h];
            let gw = &mut g_wih.data_mut()[c * 4 * h..(c + 1) * 4 * h];
            let mut acc = 0.0;
            for m in 0..4 * h {
                gw[m] += x[c] * dz[m];
                acc += w[m] * dz[m];
            }
            g_in.data_mut()[t * c_in + c] = acc;
        }
        for j in 0..h {
            let w = &w_hh[j * 4 * h..(j + 1) * 4 * h];
            let gw = &mut g_whh.data_mut()[j * 4 * h..(j + 1) * 4 * h];
            let mut acc = 0.0;
            for m in 0..4 * h {
                gw[m] += h_prev[j] * dz[m];
                acc += w[m] * dz[m];
            }
            dh_next[j] = acc;
        }
    }

    Ok(LstmGrads {
        inputs: g_in,
        w_ih: g_wih,
        w_hh: g_whh,
        bias: g_b,
    })
}
