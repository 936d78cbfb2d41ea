//! Stride-1 one-dimensional convolution over a `(T, C_in)` sequence.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Source frame feeding output step `t` at kernel tap `k`.
///
/// Causal padding places `K-1` copies of the first frame on the left, so
/// `out[t]` only reads frames `<= t`. Centered padding replicates both edges.
#[inline]
fn source_index(t: usize, k: usize, taps: usize, len: usize, causal: bool) -> usize {
    let left = if causal { taps - 1 } else { (taps - 1) / 2 };
    let j = t as isize + k as isize - left as isize;
    j.clamp(0, len as isize - 1) as usize
}

fn check_shapes(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
) -> Result<(usize, usize, usize, usize)> {
    if input.shape().len() != 2 || kernel.shape().len() != 3 || bias.shape().len() != 1 {
        return Err(Error::config(
            "conv1d expects (T,C_in) input, (K,C_in,C_out) kernel, (C_out,) bias",
        ));
    }
    let (t_len, c_in) = (input.rows(), input.cols());
    let (taps, k_in, c_out) = (kernel.shape()[0], kernel.shape()[1], kernel.shape()[2]);
    if taps == 0 {
        return Err(Error::config("conv1d kernel needs at least one tap"));
    }
    if k_in != c_in {
        return Err(Error::config(format!(
            "conv1d input has {c_in} channels but kernel expects {k_in}"
        )));
    }
    if bias.shape()[0] != c_out {
        return Err(Error::config("conv1d bias length differs from C_out"));
    }
    if t_len == 0 {
        return Err(Error::config("conv1d input is empty"));
    }
    Ok((t_len, c_in, taps, c_out))
}

pub fn conv1d_forward(
    input: &Tensor,
    kernel: &Tensor,
    bias: &Tensor,
    causal: bool,
) -> Result<Tensor> {
    let (t_len, c_in, taps, c_out) = check_shapes(input, kernel, bias)?;
    let w = kernel.data();
    let mut out = Tensor::zeros(&[t_len, c_out]);
    for t in 0..t_len {
        let row = out.row_mut(t);
        row.copy_from_slice(bias.data());
        for k in 0..taps {
            let src = input.row(source_index(t, k, taps, t_len, causal));
            for (c, &x) in src.iter().enumerate() {
                if x == 0.0 {
                    continue;
                }
                let wk = &w[(k * c_in + c) * c_out..(k * c_in + c + 1) * c_out];
                for (o, &wv) in row.iter_mut().zip(wk) {
                    *o += x * wv;
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv1d_forward`].
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub kernel: Tensor,
    pub bias: Tensor,
}

pub fn conv1d_backward(
    input: &Tensor,
    kernel: &Tensor,
    upstream: &Tensor,
    causal: bool,
) -> Result<ConvGrads> {
    let c_out = kernel.shape().get(2).copied().unwrap_or(0);
    let bias_probe = Tensor::zeros(&[c_out]);
    let (t_len, c_in, taps, c_out) = check_shapes(input, kernel, &bias_probe)?;
    upstream.expect_shape(&[t_len, c_out], "conv1d upstream gradient")?;

    let w = kernel.data();
    let mut g_in = Tensor::zeros(&[t_len, c_in]);
    let mut g_k = Tensor::zeros(kernel.shape());
    let mut g_b = Tensor::zeros(&[c_out]);
    for t in 0..t_len {
        let up = upstream.row(t);
        for (b, &u) in g_b.data_mut().iter_mut().zip(up) {
            *b += u;
        }
        for k in 0..taps {
            let s = source_index(t, k, taps, t_len, causal);
            for c in 0..c_in {
                let base = (k * c_in + c) * c_out;
                let x = input.at(s, c);
                let wk = &w[base..base + c_out];
                let gk = &mut g_k.data_mut()[base..base + c_out];
                let mut acc = 0.0;
                for o in 0..c_out {
                    gk[o] += x * up[o];
                    acc += wk[o] * up[o];
                }
                g_in.data_mut()[s * c_in + c] += acc;
            }
        }
    }
    Ok(ConvGrads {
        input: g_in,
        kernel: g_k,
        bias: g_b,
    })
}
