//! Analytic-versus-finite-difference gradient comparison.

use rand_distr::{Distribution, Uniform};

use crate::error::Result;
use crate::model::{build_model, Mode, ModelConfig};
use crate::nn::{Grads, ParamStore};
use crate::optim::loss::bce_loss;
use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst_entry: String,
    pub worst_index: usize,
    pub n_checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

/// Denominator floor of the relative error; entries whose analytic and
/// numeric gradients are both below it are compared in absolute terms.
/// Central differences of an O(1) loss with step 1e-5 carry roundoff near
/// 1e-11, so relative errors of gradients much smaller than this are noise.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Which coordinates to probe.
#[derive(Debug, Clone, Copy)]
pub enum Coverage {
    All,
    /// Every `k`-th coordinate of each entry (always including index 0).
    Stride(usize),
}

/// Central differences with step `step` on every probed coordinate.
pub fn gradient_check<F>(
    params: &ParamStore,
    analytic: &Grads,
    loss: F,
    step: f64,
    tolerance: f64,
    coverage: Coverage,
) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<f64>,
{
    analytic.check_against(params)?;
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_entry: String::new(),
        worst_index: 0,
        n_checked: 0,
        tolerance,
    };
    let names: Vec<String> = params.names().map(str::to_string).collect();
    let stride = match coverage {
        Coverage::All => 1,
        Coverage::Stride(k) => k.max(1),
    };
    for name in names {
        let len = params.get(&name)?.len();
        for i in (0..len).step_by(stride) {
            let orig = params.get(&name)?.data()[i];
            probe.get_mut(&name).expect("cloned").data_mut()[i] = orig + step;
            let plus = loss(&probe)?;
            probe.get_mut(&name).expect("cloned").data_mut()[i] = orig - step;
            let minus = loss(&probe)?;
            probe.get_mut(&name).expect("cloned").data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic.get(&name).expect("checked").data()[i];
            let rel = relative_error(a, numeric);
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_entry = name.clone();
                report.worst_index = i;
            }
            report.n_checked += 1;
        }
    }
    Ok(report)
}

/// Checks the whole network's loss gradient on a random `(hours, F)` input in
/// training mode. Every loss evaluation redraws the same dropout masks.
pub fn check_model(
    config: &ModelConfig,
    hours: usize,
    seed: u64,
    coverage: Coverage,
) -> Result<GradCheckReport> {
    let (params, net) = build_model(config, seed)?;
    let mut r = rng::rng(rng::derive_str(seed, "input"));
    let u = Uniform::new(0.0, 1.0).expect("valid range");
    let values = Tensor::from_vec(
        &[hours, config.n_features],
        (0..hours * config.n_features)
            .map(|_| u.sample(&mut r))
            .collect(),
    )?;
    let dropout_seed = rng::derive_str(seed, "dropout");
    let label = true;
    let (_, grads) = net.loss_and_grads(
        &params,
        &values,
        label,
        Mode::Train(&mut rng::rng(dropout_seed)),
    )?;
    let loss = |p: &ParamStore| -> Result<f64> {
        let mut m = rng::rng(dropout_seed);
        let pass = net.forward_pass(p, &values, Mode::Train(&mut m), false)?;
        Ok(bce_loss(&pass.risks, label)?.0)
    };
    gradient_check(&params, &grads, loss, 1e-5, 1e-4, coverage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn linear_store() -> ParamStore {
        let mut p = ParamStore::new(0);
        p.insert(
            "dense1.weight",
            Tensor::from_vec(&[3], vec![0.5, -1.0, 2.0]).unwrap(),
        )
        .unwrap();
        p
    }

    fn linear_loss(p: &ParamStore) -> Result<f64> {
        let w = p.get("dense1.weight")?.data();
        Ok(w[0] * 1.5 + w[1] * -0.5 + w[2] * 0.25)
    }

    fn linear_grad(p: &ParamStore, scale: f64) -> Grads {
        let mut g = p.zeros_like();
        g.slot("dense1.weight").data_mut().copy_from_slice(&[
            1.5 * scale,
            -0.5 * scale,
            0.25 * scale,
        ]);
        g
    }

    #[test]
    fn linear_layer_checks_to_roundoff() {
        let p = linear_store();
        let r = gradient_check(
            &p,
            &linear_grad(&p, 1.0),
            linear_loss,
            1e-5,
            1e-4,
            Coverage::All,
        )
        .unwrap();
        assert!(r.passed());
        assert!(r.max_rel_error < 1e-9, "{}", r.max_rel_error);
        assert_eq!(r.n_checked, 3);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let p = linear_store();
        let r = gradient_check(
            &p,
            &linear_grad(&p, 2.0),
            linear_loss,
            1e-5,
            1e-4,
            Coverage::All,
        )
        .unwrap();
        assert!(!r.passed());
        assert!((r.max_rel_error - 0.5).abs() < 1e-6);
    }
}
