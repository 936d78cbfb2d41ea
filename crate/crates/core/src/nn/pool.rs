//! Stride-1 max pooling that preserves sequence length.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Pooled output plus the source row chosen for every output cell.
#[derive(Debug, Clone)]
pub struct PoolOutput {
    pub values: Tensor,
    pub argmax: Vec<usize>,
}

/// `out[t, c]` is the max over the `window` frames ending at `t` (causal) or
/// centered on `t`; out-of-range frames replicate the nearest edge frame.
/// Ties resolve to the earliest source index.
pub fn maxpool1d(input: &Tensor, window: usize, causal: bool) -> Result<PoolOutput> {
    if window == 0 {
        return Err(Error::config("max-pool window must be at least 1"));
    }
    let (t_len, c) = (input.rows(), input.cols());
    let left = if causal { window - 1 } else { (window - 1) / 2 };
    let mut values = Tensor::zeros(&[t_len, c]);
    let mut argmax = vec![0; t_len * c];
    for t in 0..t_len {
        for ch in 0..c {
            let mut best_idx = usize::MAX;
            let mut best = f64::NEG_INFINITY;
            for w in 0..window {
                let j =
                    (t as isize + w as isize - left as isize).clamp(0, t_len as isize - 1) as usize;
                let v = input.at(j, ch);
                if best_idx == usize::MAX || v > best || (v == best && j < best_idx) {
                    best = v;
                    best_idx = j;
                }
            }
            values.set(t, ch, best);
            argmax[t * c + ch] = best_idx;
        }
    }
    Ok(PoolOutput { values, argmax })
}

/// Routes each upstream cell to the input row that won the max.
pub fn maxpool1d_backward(argmax: &[usize], upstream: &Tensor) -> Tensor {
    let (t_len, c) = (upstream.rows(), upstream.cols());
    let mut g = Tensor::zeros(&[t_len, c]);
    for t in 0..t_len {
        for ch in 0..c {
            let src = argmax[t * c + ch];
            g.data_mut()[src * c + ch] += upstream.at(t, ch);
        }
    }
    g
}
