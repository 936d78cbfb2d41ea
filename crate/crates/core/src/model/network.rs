//! The CNN-LSTM: conv1d -> maxpool -> SELU -> dropout -> LSTM -> dropout ->
//! dense(SELU) -> dropout -> dense(1) -> sigmoid, evaluated at every hour.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::nn::{self, Grads, Group, LstmCache, LstmParams, ParamStore};
use crate::optim::loss::bce_loss;
use crate::rng::{self, Rng};
use crate::tensor::Tensor;

pub const CONV_KERNEL: &str = "conv.kernel";
pub const CONV_BIAS: &str = "conv.bias";
pub const LSTM_W_IH: &str = "lstm.w_ih";
pub const LSTM_W_HH: &str = "lstm.w_hh";
pub const LSTM_BIAS: &str = "lstm.bias";
pub const DENSE1_WEIGHT: &str = "dense1.weight";
pub const DENSE1_BIAS: &str = "dense1.bias";
pub const DENSE2_WEIGHT: &str = "dense2.weight";
pub const DENSE2_BIAS: &str = "dense2.bias";

/// Forward-pass mode. Training draws dropout masks from the given stream.
pub enum Mode<'a> {
    Inference,
    Train(&'a mut Rng),
}

/// Per-hour risks and LSTM states for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicPrediction {
    pub patient_id: String,
    pub risks: Vec<f64>,
    /// `(T, H)` LSTM hidden states.
    pub representations: Tensor,
}

struct Cache {
    input: Tensor,
    pooled: Tensor,
    pool_argmax: Vec<usize>,
    drop1: nn::DropoutMask,
    lstm: LstmCache,
    drop2: nn::DropoutMask,
    lstm_dropped: Tensor,
    dense1_pre: Tensor,
    drop3: nn::DropoutMask,
    dense1_dropped: Tensor,
}

/// Result of a forward pass; holds the backward cache when one was requested.
pub struct ForwardPass {
    pub risks: Vec<f64>,
    pub representations: Tensor,
    cache: Option<Cache>,
}

impl ForwardPass {
    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }
}

/// Model wiring; parameters live in a separate [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct CnnLstm {
    config: ModelConfig,
}

/// Fresh parameters for one group, normal with std `1/sqrt(fan_in)` and zero biases.
pub fn init_group(config: &ModelConfig, group: Group, seed: u64) -> Vec<(&'static str, Tensor)> {
    let mut r = rng::rng(rng::derive_str(seed, group.as_str()));
    let mut normal = |shape: &[usize], fan_in: usize| {
        let dist = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).expect("finite std");
        let n = shape.iter().product();
        let data = (0..n).map(|_| dist.sample(&mut r)).collect();
        Tensor::from_vec(shape, data).expect("shape matches")
    };
    let (f, k, c, h, d) = (
        config.n_features,
        config.kernel,
        config.conv_filters,
        config.lstm_hidden,
        config.dense_hidden,
    );
    match group {
        Group::Conv => vec![
            (CONV_KERNEL, normal(&[k, f, c], k * f)),
            (CONV_BIAS, Tensor::zeros(&[c])),
        ],
        Group::Lstm => vec![
            (LSTM_W_IH, normal(&[c, 4 * h], c)),
            (LSTM_W_HH, normal(&[h, 4 * h], h)),
            (LSTM_BIAS, Tensor::zeros(&[4 * h])),
        ],
        Group::Dense => vec![
            (DENSE1_WEIGHT, normal(&[h, d], h)),
            (DENSE1_BIAS, Tensor::zeros(&[d])),
            (DENSE2_WEIGHT, normal(&[d, 1], d)),
            (DENSE2_BIAS, Tensor::zeros(&[1])),
        ],
    }
}

/// Registers all three parameter groups with seeded initialization.
pub fn build_model(config: &ModelConfig, seed: u64) -> Result<(ParamStore, CnnLstm)> {
    config.validate()?;
    let mut store = ParamStore::new(seed);
    for g in Group::ALL {
        for (name, t) in init_group(config, g, seed) {
            store.insert(name, t)?;
        }
    }
    Ok((
        store,
        CnnLstm {
            config: config.clone(),
        },
    ))
}

impl CnnLstm {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(CnnLstm { config })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn lstm_params<'a>(&self, p: &'a ParamStore) -> Result<LstmParams<'a>> {
        Ok(LstmParams {
            w_ih: p.get(LSTM_W_IH)?,
            w_hh: p.get(LSTM_W_HH)?,
            bias: p.get(LSTM_BIAS)?,
        })
    }

    /// Runs the network over a `(T, F)` episode. A backward cache is kept only
    /// when `keep_cache` is set.
    pub fn forward_pass(
        &self,
        params: &ParamStore,
        values: &Tensor,
        mode: Mode<'_>,
        keep_cache: bool,
    ) -> Result<ForwardPass> {
        if values.shape().len() != 2 || values.cols() != self.config.n_features {
            return Err(Error::usage(format!(
                "episode has shape {:?}, model expects (T, {})",
                values.shape(),
                self.config.n_features
            )));
        }
        if values.rows() == 0 {
            return Err(Error::usage("episode has no time steps"));
        }
        let keep = self.config.keep_prob();
        let (train, mut rng) = match mode {
            Mode::Inference => (false, None),
            Mode::Train(r) => (true, Some(r)),
        };

        let conv_out = nn::conv1d_forward(
            values,
            params.get(CONV_KERNEL)?,
            params.get(CONV_BIAS)?,
            true,
        )?;
        let pooled = nn::maxpool1d(&conv_out, self.config.pool, true)?;
        let activated = nn::selu(&pooled.values);
        let (x1, drop1) = nn::dropout(&activated, keep, train, rng.as_deref_mut())?;
        let lstm = nn::lstm_forward(&x1, self.lstm_params(params)?, None, None)?;
        let (x2, drop2) = nn::dropout(lstm.hidden(), keep, train, rng.as_deref_mut())?;
        let dense1_pre =
            nn::dense_forward(&x2, params.get(DENSE1_WEIGHT)?, params.get(DENSE1_BIAS)?)?;
        let dense1_act = nn::selu(&dense1_pre);
        let (x3, drop3) = nn::dropout(&dense1_act, keep, train, rng.as_deref_mut())?;
        let logits = nn::dense_forward(&x3, params.get(DENSE2_WEIGHT)?, params.get(DENSE2_BIAS)?)?;
        let risks: Vec<f64> = logits.data().iter().map(|&z| nn::sigmoid(z)).collect();

        let representations = lstm.hidden().clone();
        let cache = keep_cache.then(|| Cache {
            input: values.clone(),
            pool_argmax: pooled.argmax,
            pooled: pooled.values,
            drop1,
            lstm,
            drop2,
            lstm_dropped: x2,
            dense1_pre,
            drop3,
            dense1_dropped: x3,
        });
        Ok(ForwardPass {
            risks,
            representations,
            cache,
        })
    }

    /// Per-hour risks and representations; deterministic in inference mode.
    pub fn forward(
        &self,
        params: &ParamStore,
        patient_id: &str,
        values: &Tensor,
        mode: Mode<'_>,
    ) -> Result<DynamicPrediction> {
        let pass = self.forward_pass(params, values, mode, false)?;
        Ok(DynamicPrediction {
            patient_id: patient_id.to_string(),
            risks: pass.risks,
            representations: pass.representations,
        })
    }

    /// Inference-mode risks only.
    pub fn risks(&self, params: &ParamStore, values: &Tensor) -> Result<Vec<f64>> {
        Ok(self
            .forward_pass(params, values, Mode::Inference, false)?
            .risks)
    }

    /// Risk after the first `hours` hours (1-based).
    pub fn predict_at_horizon(
        &self,
        params: &ParamStore,
        values: &Tensor,
        hours: usize,
    ) -> Result<f64> {
        if hours == 0 || hours > values.rows() {
            return Err(Error::usage(format!(
                "horizon {hours} outside 1..={}",
                values.rows()
            )));
        }
        // Causal layers: the first `hours` rows determine risk at that hour.
        let prefix = values.head_rows(hours);
        Ok(*self.risks(params, &prefix)?.last().expect("non-empty"))
    }

    /// Parameter gradients given `d loss / d risk[t]`.
    pub fn backward(
        &self,
        params: &ParamStore,
        pass: &ForwardPass,
        grad_risks: &[f64],
    ) -> Result<Grads> {
        let cache = pass
            .cache
            .as_ref()
            .ok_or_else(|| Error::usage("backward needs a forward pass with a retained cache"))?;
        let t_len = pass.risks.len();
        if grad_risks.len() != t_len {
            return Err(Error::usage(
                "risk gradient length differs from sequence length",
            ));
        }
        let dlogit: Vec<f64> = pass
            .risks
            .iter()
            .zip(grad_risks)
            .map(|(&p, &g)| g * p * (1.0 - p))
            .collect();
        let dlogit = Tensor::from_vec(&[t_len, 1], dlogit)?;

        let mut grads = params.zeros_like();
        let w2 = params.get(DENSE2_WEIGHT)?;
        let g2 = nn::dense_backward(&cache.dense1_dropped, w2, &dlogit)?;
        *grads.slot(DENSE2_WEIGHT) = g2.weight;
        *grads.slot(DENSE2_BIAS) = g2.bias;

        let d = nn::dropout_backward(&cache.drop3, &g2.input);
        let d = nn::selu_backward(&cache.dense1_pre, &d);
        let g1 = nn::dense_backward(&cache.lstm_dropped, params.get(DENSE1_WEIGHT)?, &d)?;
        *grads.slot(DENSE1_WEIGHT) = g1.weight;
        *grads.slot(DENSE1_BIAS) = g1.bias;

        let d = nn::dropout_backward(&cache.drop2, &g1.input);
        let gl = nn::lstm_backward(Some(&cache.lstm), self.lstm_params(params)?, &d)?;
        *grads.slot(LSTM_W_IH) = gl.w_ih;
        *grads.slot(LSTM_W_HH) = gl.w_hh;
        *grads.slot(LSTM_BIAS) = gl.bias;

        let d = nn::dropout_backward(&cache.drop1, &gl.inputs);
        let d = nn::selu_backward(&cache.pooled, &d);
        let d = nn::maxpool1d_backward(&cache.pool_argmax, &d);
        let gc = nn::conv1d_backward(&cache.input, params.get(CONV_KERNEL)?, &d, true)?;
        *grads.slot(CONV_KERNEL) = gc.kernel;
        *grads.slot(CONV_BIAS) = gc.bias;
        Ok(grads)
    }

    /// Mean per-hour BCE for one labelled episode plus its parameter gradients.
    pub fn loss_and_grads(
        &self,
        params: &ParamStore,
        values: &Tensor,
        label: bool,
        mode: Mode<'_>,
    ) -> Result<(f64, Grads)> {
        let pass = self.forward_pass(params, values, mode, true)?;
        let (loss, grad) = bce_loss(&pass.risks, label)?;
        let grads = self.backward(params, &pass, &grad)?;
        Ok((loss, grads))
    }

    /// Mean per-hour BCE in inference mode.
    pub fn loss(&self, params: &ParamStore, values: &Tensor, label: bool) -> Result<f64> {
        let risks = self.risks(params, values)?;
        Ok(bce_loss(&risks, label)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config(f: usize) -> ModelConfig {
        ModelConfig {
            n_features: f,
            conv_filters: 4,
            kernel: 3,
            pool: 2,
            lstm_hidden: 5,
            dense_hidden: 3,
            ..Default::default()
        }
    }

    fn episode(t: usize, f: usize, seed: u64) -> Tensor {
        use rand::Rng as _;
        let mut r = rng::rng(seed);
        Tensor::from_vec(&[t, f], (0..t * f).map(|_| r.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn same_seed_same_store() {
        let c = ModelConfig::default();
        assert_eq!(
            build_model(&c, 11).unwrap().0,
            build_model(&c, 11).unwrap().0
        );
        assert_ne!(
            build_model(&c, 11).unwrap().0,
            build_model(&c, 12).unwrap().0
        );
    }

    #[test]
    fn single_feature_smoke() {
        let (p, m) = build_model(&toy_config(1), 3).unwrap();
        let pred = m
            .forward(&p, "x", &episode(8, 1, 1), Mode::Inference)
            .unwrap();
        assert_eq!(pred.risks.len(), 8);
        assert_eq!(pred.representations.shape(), &[8, 5]);
        assert!(pred.risks.iter().all(|&r| r > 0.0 && r < 1.0));
    }

    #[test]
    fn feature_mismatch_is_usage_error() {
        let (p, m) = build_model(&toy_config(3), 3).unwrap();
        let err = m
            .forward(&p, "x", &episode(8, 2, 1), Mode::Inference)
            .unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn untrained_first_hour_near_half() {
        let (p, m) = build_model(&ModelConfig::default(), 5).unwrap();
        let r = m.risks(&p, &episode(48, 41, 2)).unwrap();
        assert!((r[0] - 0.5).abs() < 0.25, "risk {}", r[0]);
    }

    #[test]
    fn truncation_consistency() {
        let (p, m) = build_model(&toy_config(3), 9).unwrap();
        let x = episode(12, 3, 4);
        let full = m.risks(&p, &x).unwrap();
        for t in 1..=12 {
            let head = m.risks(&p, &x.head_rows(t)).unwrap();
            assert_eq!(&head[..], &full[..t]);
            assert_eq!(m.predict_at_horizon(&p, &x, t).unwrap(), full[t - 1]);
        }
        assert!(m.predict_at_horizon(&p, &x, 0).is_err());
        assert!(m.predict_at_horizon(&p, &x, 13).is_err());
    }

    #[test]
    fn backward_without_cache_is_usage_error() {
        let (p, m) = build_model(&toy_config(2), 1).unwrap();
        let pass = m
            .forward_pass(&p, &episode(4, 2, 1), Mode::Inference, false)
            .unwrap();
        assert!(matches!(
            m.backward(&p, &pass, &[0.0; 4]),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn train_mode_is_reproducible_per_stream() {
        let (p, m) = build_model(&toy_config(2), 1).unwrap();
        let x = episode(6, 2, 8);
        let a = m
            .forward(&p, "a", &x, Mode::Train(&mut rng::rng(5)))
            .unwrap();
        let b = m
            .forward(&p, "a", &x, Mode::Train(&mut rng::rng(5)))
            .unwrap();
        assert_eq!(a, b);
    }
}
