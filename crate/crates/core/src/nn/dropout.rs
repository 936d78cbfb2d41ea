//! Inverted dropout: kept units are divided by `keep_prob`, so inference is
//! the identity map.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub keep_prob: f64,
    /// Multiplier per unit: `0` for dropped units, `1/keep_prob` for kept
    /// ones, all ones in inference mode.
    pub mask: Tensor,
    pub train_mode: bool,
}

impl DropoutMask {
    pub fn kept_fraction(&self) -> f64 {
        let kept = self.mask.data().iter().filter(|&&m| m != 0.0).count();
        kept as f64 / self.mask.len().max(1) as f64
    }
}

pub fn check_keep_prob(keep_prob: f64) -> Result<()> {
    if !(keep_prob > 0.0 && keep_prob <= 1.0) {
        return Err(Error::config(format!(
            "keep_prob {keep_prob} outside (0, 1]"
        )));
    }
    Ok(())
}

pub fn dropout(
    input: &Tensor,
    keep_prob: f64,
    train_mode: bool,
    rng: Option<&mut Rng>,
) -> Result<(Tensor, DropoutMask)> {
    check_keep_prob(keep_prob)?;
    let mut mask = Tensor::zeros(input.shape());
    match rng {
        Some(rng) if train_mode && keep_prob < 1.0 => {
            let scale = 1.0 / keep_prob;
            for m in mask.data_mut() {
                *m = if rng.random::<f64>() < keep_prob {
                    scale
                } else {
                    0.0
                };
            }
        }
        None if train_mode && keep_prob < 1.0 => {
            return Err(Error::usage("train-mode dropout needs a random stream"));
        }
        _ => mask.fill(1.0),
    }
    let mut out = input.clone();
    out.data_mut()
        .iter_mut()
        .zip(mask.data())
        .for_each(|(v, m)| *v *= m);
    Ok((
        out,
        DropoutMask {
            keep_prob,
            mask,
            train_mode,
        },
    ))
}

pub fn dropout_backward(mask: &DropoutMask, upstream: &Tensor) -> Tensor {
    let mut g = upstream.clone();
    g.data_mut()
        .iter_mut()
        .zip(mask.mask.data())
        .for_each(|(v, m)| *v *= m);
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn keep_one_is_identity_in_both_modes() {
        let x = Tensor::from_vec(&[4], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let mut r = rng::rng(1);
        assert_eq!(dropout(&x, 1.0, true, Some(&mut r)).unwrap().0, x);
        assert_eq!(dropout(&x, 1.0, false, None).unwrap().0, x);
    }

    #[test]
    fn inference_is_identity() {
        let x = Tensor::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let (y, m) = dropout(&x, 0.3, false, None).unwrap();
        assert_eq!(y, x);
        assert!(m.mask.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn keep_rate_within_three_sigma() {
        let x = Tensor::zeros(&[100_000]);
        let mut r = rng::rng(42);
        let (_, m) = dropout(&x, 0.8, true, Some(&mut r)).unwrap();
        let rate = m.kept_fraction();
        assert!((rate - 0.8).abs() <= 0.004, "keep rate {rate}");
    }

    #[test]
    fn invalid_keep_prob() {
        let x = Tensor::zeros(&[2]);
        assert!(dropout(&x, 0.0, false, None).is_err());
        assert!(dropout(&x, 1.5, false, None).is_err());
    }

    #[test]
    fn same_seed_same_mask() {
        let x = Tensor::from_vec(&[50], vec![1.0; 50]).unwrap();
        let a = dropout(&x, 0.8, true, Some(&mut rng::rng(7))).unwrap().0;
        let b = dropout(&x, 0.8, true, Some(&mut rng::rng(7))).unwrap().0;
        assert_eq!(a, b);
    }
}
