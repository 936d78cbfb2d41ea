use icu_adapt::data::{make_folds, Cohort, Domain};
use icu_adapt::eval::{paired_ttest, t_cdf};
use icu_adapt::synth::{generate_cohort, SynthCohortSpec};

/// Student-t density integrated with composite Simpson from 0 to |t|.
fn two_sided_p_by_quadrature(t: f64, df: f64) -> f64 {
    let ln_c = stirling_ln_gamma((df + 1.0) / 2.0)
        - stirling_ln_gamma(df / 2.0)
        - 0.5 * (df * std::f64::consts::PI).ln();
    let pdf = |x: f64| (ln_c - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp();
    let n = 20_000;
    let h = t.abs() / n as f64;
    let mut s = pdf(0.0) + pdf(t.abs());
    for k in 1..n {
        s += pdf(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    1.0 - 2.0 * s * h / 3.0
}

/// Stirling series for ln Gamma, only used at the half-integers the test needs.
fn stirling_ln_gamma(x: f64) -> f64 {
    // shift up so the asymptotic series is accurate
    let mut shift = 0.0;
    let mut z = x;
    while z < 15.0 {
        shift -= z.ln();
        z += 1.0;
    }
    let series =
        (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * z)
            - 1.0 / (360.0 * z.powi(3))
            + 1.0 / (1260.0 * z.powi(5))
            - 1.0 / (1680.0 * z.powi(7));
    series + shift
}

#[test]
fn paired_ttest_matches_quadrature() {
    let a = [0.80, 0.82, 0.79, 0.81, 0.83];
    let b = [0.76, 0.77, 0.75, 0.78, 0.74];
    let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / 5.0;
    let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
    let t = mean / (sd / 5f64.sqrt());
    let p = paired_ttest(&a, &b).unwrap();
    let oracle = two_sided_p_by_quadrature(t, 4.0);
    assert!((p - oracle).abs() < 1e-10, "p {p} quadrature {oracle}");
    assert!((t_cdf(t, 4.0) - (1.0 - oracle / 2.0)).abs() < 1e-10);
    for (t, df) in [(0.3, 1.0), (1.7, 3.0), (2.5, 9.0), (4.0, 20.0)] {
        let q = two_sided_p_by_quadrature(t, df);
        assert!((t_cdf(-t, df) - q / 2.0).abs() < 1e-10, "t {t} df {df}");
    }
}

#[test]
fn reference_cohort_matches_population_rates() {
    let spec = SynthCohortSpec::reference();
    let synth = generate_cohort(&spec, 2024).unwrap();
    let cohort = Cohort::from_records(&synth.records);
    let summary = cohort.summary();
    let sizes: Vec<usize> = summary.iter().map(|s| s.n).collect();
    assert_eq!(sizes, vec![874, 577, 1481, 1067]);
    for (s, d) in summary.iter().zip(&spec.domains) {
        let n = s.n as f64;
        let expected = n * d.mortality_rate;
        let sigma = (n * d.mortality_rate * (1.0 - d.mortality_rate)).sqrt();
        assert!(
            (s.deaths as f64 - expected).abs() <= 3.0 * sigma,
            "{}: {} deaths, expected {expected:.0}",
            s.domain,
            s.deaths
        );
    }

    // stratified folds keep each domain's mortality
    let keys: Vec<_> = cohort.entries.iter().map(|e| e.key()).collect();
    let plan = make_folds(&keys, 5).unwrap();
    let medical = cohort
        .summary()
        .into_iter()
        .find(|s| s.domain == Domain::Medical)
        .unwrap();
    for f in &plan.folds {
        let (mut n, mut deaths) = (0, 0);
        for id in &f.test_ids {
            let e = cohort.find(id).unwrap();
            if e.domain == Domain::Medical {
                n += 1;
                deaths += usize::from(e.outcome);
            }
        }
        let rate = deaths as f64 / n as f64;
        assert!(
            (rate - medical.mortality_rate).abs() < 0.01,
            "fold {}: {rate:.3}",
            f.fold_id
        );
    }
}
