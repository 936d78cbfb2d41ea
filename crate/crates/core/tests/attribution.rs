mod common;

use icu_adapt::attribution::{ranking_at_hour, shapley_mc_all, Trained};
use icu_adapt::data::channel_index;
use icu_adapt::model::build_model;
use icu_adapt::Tensor;

#[test]
fn standard_error_scales_with_inverse_root_of_permutations() {
    let cfg = common::narrow_config(5, 4);
    let (params, net) = build_model(&cfg, 2).unwrap();
    let values = Tensor::from_vec(
        &[10, 5],
        (0..50).map(|i| ((i * 13) % 11) as f64 / 11.0).collect(),
    )
    .unwrap();
    let model = Trained {
        net: &net,
        params: &params,
    };
    let se = |m: usize| {
        let a = shapley_mc_all(&model, "p", &values, m, 3).unwrap();
        a.std_errors.data().iter().sum::<f64>()
    };
    let (s1, s4) = (se(400), se(1600));
    let ratio = s4 / s1;
    assert!((ratio - 0.5).abs() < 0.1, "SE(4M)/SE(M) = {ratio}");
}

#[test]
fn lactate_drift_ranks_high_for_doomed_patients() {
    let lactate = channel_index("Lactate").unwrap();
    let mut hits = 0;
    let mut ranks = Vec::new();
    for seed in 0..10u64 {
        let spec = common::small_spec(100, 0.3, 0.08);
        let data = common::prepare(&spec, 300 + seed);
        let n = data.episodes.len();
        let (train, test) = data.episodes.split_at(n * 4 / 5);
        let cfg = common::narrow_config(train[0].n_channels(), 12);
        let (net, params) = common::train(train, &cfg, 25, seed);
        let model = Trained {
            net: &net,
            params: &params,
        };
        let doomed = test.iter().find(|e| e.outcome).unwrap();
        let attr = shapley_mc_all(&model, &doomed.patient_id, &doomed.values, 100, seed).unwrap();
        let rank = ranking_at_hour(&attr, 48)
            .unwrap()
            .iter()
            .position(|&c| c == lactate)
            .unwrap();
        ranks.push(rank + 1);
        hits += usize::from(rank < 3);
    }
    assert!(hits >= 8, "lactate ranks per seed: {ranks:?}");
}
