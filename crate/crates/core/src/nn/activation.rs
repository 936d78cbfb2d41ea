use crate::tensor::Tensor;

/// SELU scale.
pub const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
/// SELU negative-branch coefficient.
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;

#[inline]
pub fn selu_scalar(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA * x
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
    }
}

#[inline]
pub fn selu_derivative(x: f64) -> f64 {
    if x > 0.0 {
        SELU_LAMBDA
    } else {
        SELU_LAMBDA * SELU_ALPHA * x.exp()
    }
}

pub fn selu(x: &Tensor) -> Tensor {
    x.map(selu_scalar)
}

/// Chain rule through SELU given the pre-activation input.
pub fn selu_backward(pre: &Tensor, upstream: &Tensor) -> Tensor {
    let mut g = upstream.clone();
    g.data_mut()
        .iter_mut()
        .zip(pre.data())
        .for_each(|(u, &x)| *u *= selu_derivative(x));
    g
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selu_fixed_points() {
        assert_eq!(selu_scalar(0.0), 0.0);
        let slope = (selu_scalar(1e6 + 1.0) - selu_scalar(1e6)) / 1.0;
        assert!((slope - SELU_LAMBDA).abs() < 1e-9);
        assert!((selu_scalar(-20.0) + SELU_LAMBDA * SELU_ALPHA).abs() < 1e-8);
    }

    #[test]
    fn selu_derivative_matches_finite_difference() {
        for &x in &[-3.0, -0.4, 0.3, 2.5] {
            let h = 1e-6;
            let fd = (selu_scalar(x + h) - selu_scalar(x - h)) / (2.0 * h);
            assert!((fd - selu_derivative(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(-800.0) < 1e-300);
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
