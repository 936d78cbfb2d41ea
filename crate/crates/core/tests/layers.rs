//! Finite-difference checks of every layer's backward pass, plus causality of
//! the assembled network.

use icu_adapt::model::{build_model, ModelConfig};
use icu_adapt::nn::*;
use icu_adapt::optim::relative_error;
use icu_adapt::Tensor;
use proptest::prelude::*;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn pseudo(shape: &[usize], salt: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|i| ((i as f64 + 1.0) * 0.733 + salt).sin() * 0.9)
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Largest relative error between `analytic` and central differences of `f`
/// around `x`.
fn worst(x: &Tensor, analytic: &Tensor, f: impl Fn(&Tensor) -> f64) -> f64 {
    assert_eq!(x.shape(), analytic.shape());
    let mut probe = x.clone();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + STEP;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - STEP;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        worst = worst.max(relative_error(
            analytic.data()[i],
            (plus - minus) / (2.0 * STEP),
        ));
    }
    worst
}

#[test]
fn conv1d_backward_matches_differences() {
    for causal in [true, false] {
        let x = pseudo(&[7, 3], 0.1);
        let k = pseudo(&[3, 3, 4], 0.2);
        let b = pseudo(&[4], 0.3);
        let up = pseudo(&[7, 4], 0.4);
        let g = conv1d_backward(&x, &k, &up, causal).unwrap();
        let loss = |x: &Tensor, k: &Tensor, b: &Tensor| {
            dot(&conv1d_forward(x, k, b, causal).unwrap(), &up)
        };
        assert!(worst(&x, &g.input, |p| loss(p, &k, &b)) < TOL);
        assert!(worst(&k, &g.kernel, |p| loss(&x, p, &b)) < TOL);
        assert!(worst(&b, &g.bias, |p| loss(&x, &k, p)) < TOL);
    }
}

#[test]
fn maxpool_backward_matches_differences() {
    // distinct values keep the argmax away from ties
    let x = Tensor::from_vec(
        &[9, 2],
        (0..18).map(|i| ((i * 7) % 18) as f64 * 0.1).collect(),
    )
    .unwrap();
    let up = pseudo(&[9, 2], 0.5);
    let out = maxpool1d(&x, 4, true).unwrap();
    let g = maxpool1d_backward(&out.argmax, &up);
    assert!(worst(&x, &g, |p| dot(&maxpool1d(p, 4, true).unwrap().values, &up)) < TOL);
}

#[test]
fn selu_backward_matches_differences() {
    let x = pseudo(&[6, 3], 0.6);
    let up = pseudo(&[6, 3], 0.7);
    let g = selu_backward(&x, &up);
    assert!(worst(&x, &g, |p| dot(&selu(p), &up)) < TOL);
}

#[test]
fn dropout_backward_matches_differences() {
    let x = pseudo(&[5, 4], 0.8);
    let up = pseudo(&[5, 4], 0.9);
    let mut r = icu_adapt::rng::rng(3);
    let (_, mask) = dropout(&x, 0.6, true, Some(&mut r)).unwrap();
    let g = dropout_backward(&mask, &up);
    let apply = |p: &Tensor| {
        let mut o = p.clone();
        o.data_mut()
            .iter_mut()
            .zip(mask.mask.data())
            .for_each(|(v, m)| *v *= m);
        dot(&o, &up)
    };
    assert!(worst(&x, &g, apply) < TOL);
}

#[test]
fn dense_backward_matches_differences() {
    let x = pseudo(&[5, 3], 1.0);
    let w = pseudo(&[3, 2], 1.1);
    let b = pseudo(&[2], 1.2);
    let up = pseudo(&[5, 2], 1.3);
    let g = dense_backward(&x, &w, &up).unwrap();
    let loss = |x: &Tensor, w: &Tensor, b: &Tensor| dot(&dense_forward(x, w, b).unwrap(), &up);
    assert!(worst(&x, &g.input, |p| loss(p, &w, &b)) < TOL);
    assert!(worst(&w, &g.weight, |p| loss(&x, p, &b)) < TOL);
    assert!(worst(&b, &g.bias, |p| loss(&x, &w, p)) < TOL);
}

#[test]
fn lstm_backward_matches_differences() {
    let (t, c, h) = (6, 3, 4);
    let x = pseudo(&[t, c], 1.4);
    let w_ih = pseudo(&[c, 4 * h], 1.5);
    let w_hh = pseudo(&[h, 4 * h], 1.6);
    let bias = pseudo(&[4 * h], 1.7);
    let up = pseudo(&[t, h], 1.8);
    let loss = |x: &Tensor, w_ih: &Tensor, w_hh: &Tensor, bias: &Tensor| {
        let cache = lstm_forward(x, LstmParams { w_ih, w_hh, bias }, None, None).unwrap();
        dot(cache.hidden(), &up)
    };
    let cache = lstm_forward(
        &x,
        LstmParams {
            w_ih: &w_ih,
            w_hh: &w_hh,
            bias: &bias,
        },
        None,
        None,
    )
    .unwrap();
    let g = lstm_backward(
        Some(&cache),
        LstmParams {
            w_ih: &w_ih,
            w_hh: &w_hh,
            bias: &bias,
        },
        &up,
    )
    .unwrap();
    assert!(worst(&x, &g.inputs, |p| loss(p, &w_ih, &w_hh, &bias)) < TOL);
    assert!(worst(&w_ih, &g.w_ih, |p| loss(&x, p, &w_hh, &bias)) < TOL);
    assert!(worst(&w_hh, &g.w_hh, |p| loss(&x, &w_ih, p, &bias)) < TOL);
    assert!(worst(&bias, &g.bias, |p| loss(&x, &w_ih, &w_hh, p)) < TOL);
}

fn small_net() -> (ParamStore, icu_adapt::model::CnnLstm) {
    let mut c = ModelConfig::with_features(3);
    c.conv_filters = 5;
    c.lstm_hidden = 4;
    c.dense_hidden = 3;
    build_model(&c, 21).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn risk_at_hour_t_ignores_later_hours(
        values in proptest::collection::vec(0.0f64..1.0, 12 * 3),
        hour in 0usize..12,
        channel in 0usize..3,
        bump in 0.05f64..1.0,
    ) {
        let (params, net) = small_net();
        let x = Tensor::from_vec(&[12, 3], values).unwrap();
        let mut y = x.clone();
        y.set(hour, channel, y.at(hour, channel) + bump);
        let a = net.risks(&params, &x).unwrap();
        let b = net.risks(&params, &y).unwrap();
        for t in 0..hour {
            prop_assert_eq!(a[t].to_bits(), b[t].to_bits());
        }
    }
}
