use crate::error::{Error, Result};

pub const PROB_FLOOR: f64 = 1e-7;

/// Mean binary cross-entropy over per-hour predictions sharing one label,
/// with its exact gradient. Probabilities are clamped to
/// `[1e-7, 1 - 1e-7]`; the clamp has zero derivative outside that band.
pub fn bce_loss(predictions: &[f64], label: bool) -> Result<(f64, Vec<f64>)> {
    if predictions.is_empty() {
        return Err(Error::usage("binary cross-entropy of an empty sequence"));
    }
    let n = predictions.len() as f64;
    let y = if label { 1.0 } else { 0.0 };
    let mut loss = 0.0;
    let grad = predictions
        .iter()
        .map(|&p| {
            let q = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            loss -= y * q.ln() + (1.0 - y) * (1.0 - q).ln();
            if !(PROB_FLOOR..=1.0 - PROB_FLOOR).contains(&p) {
                0.0
            } else {
                (-y / q + (1.0 - y) / (1.0 - q)) / n
            }
        })
        .collect();
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_predictions_hit_clamp_floor() {
        let (l, _) = bce_loss(&[1.0, 1.0], true).unwrap();
        assert!(l > 0.0 && l < 1e-6);
        let (l, _) = bce_loss(&[0.0], false).unwrap();
        assert!(l < 1e-6);
    }

    #[test]
    fn half_gives_ln2() {
        for label in [true, false] {
            let (l, _) = bce_loss(&[0.5; 7], label).unwrap();
            assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn two_step_hand_value() {
        let (l, _) = bce_loss(&[0.9, 0.6], true).unwrap();
        let expected = -(0.9f64.ln() + 0.6f64.ln()) / 2.0;
        assert!((l - expected).abs() < 1e-15);
        assert!((l - 0.308093).abs() < 1e-6);
    }

    #[test]
    fn empty_is_usage_error() {
        assert!(matches!(bce_loss(&[], true), Err(Error::Usage(_))));
    }

    #[test]
    fn per_term_bounded_by_clamp() {
        let (l, _) = bce_loss(&[0.0, 1e-300], true).unwrap();
        assert!(l <= -(PROB_FLOOR.ln()) + 1e-12);
    }
}
