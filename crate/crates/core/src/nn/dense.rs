//! Affine layer applied independently at every time step.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `input (T, C_in) · weight (C_in, C_out) + bias` row by row. A single
/// vector is the `T = 1` case.
pub fn dense_forward(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (t_len, c_in) = (input.rows(), input.cols());
    if weight.shape().len() != 2 || weight.rows() != c_in {
        return Err(Error::config(format!(
            "dense weight shape {:?} incompatible with {c_in} inputs",
            weight.shape()
        )));
    }
    let c_out = weight.cols();
    bias.expect_shape(&[c_out], "dense bias")?;
    let w = weight.data();
    let mut out = Tensor::zeros(&[t_len, c_out]);
    for t in 0..t_len {
        let row = out.row_mut(t);
        row.copy_from_slice(bias.data());
        for (c, &x) in input.row(t).iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            row.iter_mut()
                .zip(&w[c * c_out..(c + 1) * c_out])
                .for_each(|(o, wv)| *o += x * wv);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(input: &Tensor, weight: &Tensor, upstream: &Tensor) -> Result<DenseGrads> {
    let (t_len, c_in) = (input.rows(), input.cols());
    let c_out = weight.cols();
    weight.expect_shape(&[c_in, c_out], "dense weight")?;
    upstream.expect_shape(&[t_len, c_out], "dense upstream gradient")?;
    let w = weight.data();
    let mut g_in = Tensor::zeros(&[t_len, c_in]);
    let mut g_w = Tensor::zeros(&[c_in, c_out]);
    let mut g_b = Tensor::zeros(&[c_out]);
    for t in 0..t_len {
        let up = upstream.row(t);
        g_b.data_mut().iter_mut().zip(up).for_each(|(b, u)| *b += u);
        let x = input.row(t);
        for c in 0..c_in {
            let wr = &w[c * c_out..(c + 1) * c_out];
            let gw = &mut g_w.data_mut()[c * c_out..(c + 1) * c_out];
            let mut acc = 0.0;
            for o in 0..c_out {
                gw[o] += x[c] * up[o];
                acc += wr[o] * up[o];
            }
            g_in.data_mut()[t * c_in + c] = acc;
        }
    }
    Ok(DenseGrads {
        input: g_in,
        weight: g_w,
        bias: g_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weight_is_identity() {
        let x = Tensor::from_rows(&[vec![0.5, -2.0, 3.0]]).unwrap();
        let mut w = Tensor::zeros(&[3, 3]);
        (0..3).for_each(|i| w.set(i, i, 1.0));
        assert_eq!(dense_forward(&x, &w, &Tensor::zeros(&[3])).unwrap(), x);
    }

    #[test]
    fn zero_weight_yields_bias() {
        let x = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Tensor::from_vec(&[3], vec![0.1, 0.2, 0.3]).unwrap();
        let out = dense_forward(&x, &Tensor::zeros(&[2, 3]), &b).unwrap();
        assert_eq!(out.data(), b.data());
    }

    #[test]
    fn mismatch_is_config_error() {
        let x = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let err = dense_forward(&x, &Tensor::zeros(&[3, 1]), &Tensor::zeros(&[1])).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
