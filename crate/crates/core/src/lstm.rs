//! Single-layer LSTM sequence classifier trained with backpropagation through time.
//!
//! Gate pre-activations are stacked in the order input, forget, candidate, output:
//! rows `[0, H)` of every stacked weight belong to the input gate, `[H, 2H)` to the
//! forget gate and so on. The classifier reads out the final hidden state through a
//! logistic unit.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;
use crate::series::MultiSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LstmParams<T: Scalar> {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// 4H×D input weights.
    pub w_input: Matrix<T>,
    /// 4H×H recurrent weights.
    pub w_recurrent: Matrix<T>,
    /// 4H gate biases.
    pub bias: Vec<T>,
    /// H readout weights.
    pub w_out: Vec<T>,
    pub b_out: T,
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let g = 4 * hidden_dim;
        Self {
            input_dim,
            hidden_dim,
            w_input: Matrix::zeros(g, input_dim),
            w_recurrent: Matrix::zeros(g, hidden_dim),
            bias: vec![T::zero(); g],
            w_out: vec![T::zero(); hidden_dim],
            b_out: T::zero(),
        }
    }

    /// Xavier-uniform weights, forget-gate bias 1, all other biases 0.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        let mut uniform = |limit: f64| T::of(rng.random_range(-limit..=limit));
        let lim_in = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        for w in p.w_input.as_mut_slice() {
            *w = uniform(lim_in);
        }
        let lim_rec = (6.0 / (2 * hidden_dim) as f64).sqrt();
        for w in p.w_recurrent.as_mut_slice() {
            *w = uniform(lim_rec);
        }
        let lim_out = (6.0 / (hidden_dim + 1) as f64).sqrt();
        for w in &mut p.w_out {
            *w = uniform(lim_out);
        }
        for b in &mut p.bias[hidden_dim..2 * hidden_dim] {
            *b = T::one();
        }
        p
    }

    pub fn n_params(&self) -> usize {
        self.w_input.as_slice().len() + self.w_recurrent.as_slice().len() + self.bias.len() + self.w_out.len() + 1
    }

    /// All parameters in a fixed order: input weights, recurrent weights, biases, readout
    /// weights, readout bias.
    pub fn flatten(&self) -> Vec<T> {
        let mut flat = Vec::with_capacity(self.n_params());
        flat.extend_from_slice(self.w_input.as_slice());
        flat.extend_from_slice(self.w_recurrent.as_slice());
        flat.extend_from_slice(&self.bias);
        flat.extend_from_slice(&self.w_out);
        flat.push(self.b_out);
        flat
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn assign_flat(&mut self, flat: &[T]) {
        assert_eq!(flat.len(), self.n_params(), "flat parameter length");
        let mut rest = flat;
        for dst in [self.w_input.as_mut_slice(), self.w_recurrent.as_mut_slice(), &mut self.bias, &mut self.w_out] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        self.b_out = rest[0];
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }

    fn check_input(&self, series: &MultiSeries<T>) -> Result<()> {
        if series.dim() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, actual: series.dim() });
        }
        Ok(())
    }
}

/// Activations recorded by [`lstm_forward`] for reuse by [`lstm_backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// Per step: post-activation gates, stacked like the weights.
    pub gates: Vec<Vec<T>>,
    /// Cell states c_1..c_T.
    pub cells: Vec<Vec<T>>,
    /// Hidden states h_1..h_T.
    pub hidden: Vec<Vec<T>>,
    pub logit: T,
}

/// Runs the recurrence from zero state and returns the positive-class probability.
pub fn lstm_forward<T: Scalar>(params: &LstmParams<T>, series: &MultiSeries<T>) -> Result<(T, ForwardCache<T>)> {
    params.check_input(series)?;
    let h_dim = params.hidden_dim;
    let mut h = vec![T::zero(); h_dim];
    let mut c = vec![T::zero(); h_dim];
    let mut cache = ForwardCache {
        gates: Vec::with_capacity(series.len()),
        cells: Vec::with_capacity(series.len()),
        hidden: Vec::with_capacity(series.len()),
        logit: T::zero(),
    };
    for x in series.steps() {
        let mut z = params.bias.clone();
        for (r, zr) in z.iter_mut().enumerate() {
            let wi = params.w_input.row(r);
            let wr = params.w_recurrent.row(r);
            let mut acc = *zr;
            for (w, &xi) in wi.iter().zip(x) {
                acc += *w * xi;
            }
            for (w, &hi) in wr.iter().zip(&h) {
                acc += *w * hi;
            }
            *zr = acc;
        }
        for k in 0..h_dim {
            z[k] = sigmoid(z[k]);
            z[h_dim + k] = sigmoid(z[h_dim + k]);
            z[2 * h_dim + k] = z[2 * h_dim + k].tanh();
            z[3 * h_dim + k] = sigmoid(z[3 * h_dim + k]);
        }
        for k in 0..h_dim {
            c[k] = z[h_dim + k] * c[k] + z[k] * z[2 * h_dim + k];
            h[k] = z[3 * h_dim + k] * c[k].tanh();
        }
        cache.gates.push(z);
        cache.cells.push(c.clone());
        cache.hidden.push(h.clone());
    }
    let logit = params.w_out.iter().zip(&h).fold(params.b_out, |acc, (&w, &hk)| acc + w * hk);
    cache.logit = logit;
    Ok((sigmoid(logit), cache))
}

/// Binary cross-entropy of the classifier on one labeled sequence.
pub fn lstm_loss<T: Scalar>(params: &LstmParams<T>, series: &MultiSeries<T>, label: u8) -> Result<T> {
    let (_, cache) = lstm_forward(params, series)?;
    Ok(bce_from_logit(cache.logit, label))
}

fn bce_from_logit<T: Scalar>(logit: T, label: u8) -> T {
    let y = if label > 0 { T::one() } else { T::zero() };
    softplus(logit) - y * logit
}

/// Loss and full-BPTT gradients (same shape as the parameters).
pub fn lstm_backward<T: Scalar>(
    params: &LstmParams<T>,
    series: &MultiSeries<T>,
    label: u8,
) -> Result<(LstmParams<T>, T)> {
    let (prob, cache) = lstm_forward(params, series)?;
    let y = if label > 0 { T::one() } else { T::zero() };
    let loss = bce_from_logit(cache.logit, label);
    let h_dim = params.hidden_dim;
    let steps = series.len();
    let mut grad = LstmParams::zeros(params.input_dim, h_dim);

    let dlogit = prob - y;
    grad.b_out = dlogit;
    let last_h = &cache.hidden[steps - 1];
    for k in 0..h_dim {
        grad.w_out[k] = dlogit * last_h[k];
    }
    let mut dh: Vec<T> = params.w_out.iter().map(|&w| dlogit * w).collect();
    let mut dc_next = vec![T::zero(); h_dim];
    let mut dz = vec![T::zero(); 4 * h_dim];
    let zero_state = vec![T::zero(); h_dim];

    for t in (0..steps).rev() {
        let gates = &cache.gates[t];
        let c_t = &cache.cells[t];
        let c_prev = if t > 0 { &cache.cells[t - 1] } else { &zero_state };
        let h_prev = if t > 0 { &cache.hidden[t - 1] } else { &zero_state };
        for k in 0..h_dim {
            let (i, f, g, o) = (gates[k], gates[h_dim + k], gates[2 * h_dim + k], gates[3 * h_dim + k]);
            let tc = c_t[k].tanh();
            let d_o = dh[k] * tc;
            let dc = dc_next[k] + dh[k] * o * (T::one() - tc * tc);
            dz[k] = dc * g * i * (T::one() - i);
            dz[h_dim + k] = dc * c_prev[k] * f * (T::one() - f);
            dz[2 * h_dim + k] = dc * i * (T::one() - g * g);
            dz[3 * h_dim + k] = d_o * o * (T::one() - o);
            dc_next[k] = dc * f;
        }
        let x = series.step(t);
        for (r, &dzr) in dz.iter().enumerate() {
            grad.bias[r] += dzr;
            for (gw, &xi) in grad.w_input.row_mut(r).iter_mut().zip(x) {
                *gw += dzr * xi;
            }
            for (gw, &hp) in grad.w_recurrent.row_mut(r).iter_mut().zip(h_prev) {
                *gw += dzr * hp;
            }
        }
        dh.fill(T::zero());
        for (r, &dzr) in dz.iter().enumerate() {
            for (dhk, &u) in dh.iter_mut().zip(params.w_recurrent.row(r)) {
                *dhk += dzr * u;
            }
        }
    }
    Ok((grad, loss))
}

/// Outcome of thresholding the classifier probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification<T> {
    pub positive: bool,
    pub probability: T,
}

/// Positive iff the probability is at least `threshold`.
pub fn classify<T: Scalar>(params: &LstmParams<T>, series: &MultiSeries<T>, threshold: T) -> Result<Classification<T>> {
    let (probability, _) = lstm_forward(params, series)?;
    Ok(Classification { positive: probability >= threshold, probability })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay: f64,
    pub seed: u64,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    /// Stop after this many epochs without improvement; `None` runs every epoch.
    pub patience: Option<usize>,
    pub validation_fraction: f64,
    /// Sequences per update; 1 is per-sequence stochastic training.
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            epochs: 40,
            learning_rate: 5e-3,
            lr_decay: 0.97,
            seed: 0,
            clip_norm: 5.0,
            patience: Some(12),
            validation_fraction: 0.2,
            batch_size: 1,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!("validation fraction {} outside [0, 1)", self.validation_fraction));
        }
        if !(self.learning_rate > 0.0) || !(self.clip_norm > 0.0) || self.batch_size == 0 {
            return bad("learning rate, clip norm and batch size must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub validation_loss: Option<f64>,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub n_train: usize,
    pub n_validation: usize,
}

struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    step: i32,
}

impl<T: Scalar> Adam<T> {
    fn new(n: usize) -> Self {
        Self { m: vec![T::zero(); n], v: vec![T::zero(); n], step: 0 }
    }

    fn update(&mut self, params: &mut [T], grads: &[T], lr: f64, cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
        let c1 = T::one() - b1.powi(self.step);
        let c2 = T::one() - b2.powi(self.step);
        let (lr, eps) = (T::of(lr), T::of(cfg.adam_eps));
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

fn evaluate<T: Scalar>(params: &LstmParams<T>, samples: &[(MultiSeries<T>, u8)], idx: &[usize]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for &i in idx {
        let (series, label) = &samples[i];
        let (p, cache) = lstm_forward(params, series)?;
        loss += bce_from_logit(cache.logit, *label).as_f64();
        if (p >= T::of(0.5)) == (*label > 0) {
            correct += 1;
        }
    }
    let n = idx.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains a classifier on labeled sequences and returns the best-validation parameters.
///
/// The validation split is stratified by label. Without a validation split the
/// parameters with the lowest training loss are returned.
pub fn train<T: Scalar>(samples: &[(MultiSeries<T>, u8)], cfg: &TrainConfig) -> Result<(LstmParams<T>, TrainingLog)> {
    cfg.validate()?;
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {}", samples.len())));
    }
    let input_dim = samples[0].0.dim();
    if let Some((s, _)) = samples.iter().find(|(s, _)| s.dim() != input_dim) {
        return Err(Error::DimensionMismatch { expected: input_dim, actual: s.dim() });
    }
    let positives: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].1 > 0).collect();
    let negatives: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].1 == 0).collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::SingleClass);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for mut class in [positives, negatives] {
        class.shuffle(&mut rng);
        let n_val = ((class.len() as f64) * cfg.validation_fraction).floor() as usize;
        let n_val = n_val.min(class.len() - 1);
        val_idx.extend_from_slice(&class[..n_val]);
        train_idx.extend_from_slice(&class[n_val..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();

    let mut params = LstmParams::<T>::init(input_dim, cfg.hidden_dim, &mut rng);
    let mut adam = Adam::new(params.n_params());
    let mut lr = cfg.learning_rate;
    let mut log = TrainingLog { epochs: Vec::new(), best_epoch: 0, n_train: train_idx.len(), n_validation: val_idx.len() };
    let mut best: Option<(LstmParams<T>, f64, f64)> = None;
    let mut since_best = 0usize;
    let clip = T::of(cfg.clip_norm);

    let mut order = train_idx.clone();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut acc = vec![T::zero(); params.n_params()];
            for &i in batch {
                let (g, _) = lstm_backward(&params, &samples[i].0, samples[i].1)?;
                for (a, v) in acc.iter_mut().zip(g.flatten()) {
                    *a += v;
                }
            }
            let scale = T::one() / T::of(batch.len() as f64);
            for a in &mut acc {
                *a *= scale;
            }
            let norm = acc.iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
            if norm > clip {
                let f = clip / norm;
                for a in &mut acc {
                    *a *= f;
                }
            }
            let mut flat = params.flatten();
            adam.update(&mut flat, &acc, lr, cfg);
            params.assign_flat(&flat);
        }

        let (train_loss, train_accuracy) = evaluate(&params, samples, &train_idx)?;
        let (validation_loss, validation_accuracy) = if val_idx.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate(&params, samples, &val_idx)?;
            (Some(l), Some(a))
        };
        log.epochs.push(EpochLog { epoch, learning_rate: lr, train_loss, train_accuracy, validation_loss, validation_accuracy });

        // higher score wins, lower loss breaks ties
        let (score, loss) = match (validation_accuracy, validation_loss) {
            (Some(a), Some(l)) => (a, l),
            _ => (-train_loss, train_loss),
        };
        let improved = match &best {
            None => true,
            Some((_, s, l)) => score > *s || (score == *s && loss < *l),
        };
        if improved {
            best = Some((params.clone(), score, loss));
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience.is_some_and(|p| since_best >= p) {
                break;
            }
        }
        lr *= cfg.lr_decay;
    }
    let (best_params, _, _) = best.expect("at least one epoch ran");
    Ok((best_params, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(rows: &[[f64; 1]]) -> MultiSeries<f64> {
        MultiSeries::from_rows(rows).unwrap()
    }

    #[test]
    fn zero_params_give_half() {
        let p = LstmParams::<f64>::zeros(3, 4);
        let s = MultiSeries::from_rows(&[[1.0, -2.0, 0.5], [3.0, 0.0, 1.0]]).unwrap();
        let (prob, cache) = lstm_forward(&p, &s).unwrap();
        assert_eq!(prob, 0.5);
        for gates in &cache.gates {
            for (r, &g) in gates.iter().enumerate() {
                // candidate rows are tanh(0); the others sigmoid(0)
                let want = if (8..12).contains(&r) { 0.0 } else { 0.5 };
                assert_eq!(g, want);
            }
        }
        assert!(cache.cells.iter().flatten().all(|&c| c == 0.0));
        assert!(cache.hidden.iter().flatten().all(|&h| h == 0.0));
        let (grad, loss) = lstm_backward(&p, &s, 1).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(grad.b_out, -0.5);
    }

    #[test]
    fn scalar_recurrence_matches_hand_evaluation() {
        let mut p = LstmParams::<f64>::zeros(1, 1);
        // gates i, f, g, o
        p.w_input = Matrix::from_vec(4, 1, vec![0.5, -0.3, 0.8, 0.2]).unwrap();
        p.w_recurrent = Matrix::from_vec(4, 1, vec![0.1, 0.4, -0.6, 0.7]).unwrap();
        p.bias = vec![0.05, 1.0, -0.1, 0.0];
        p.w_out = vec![1.5];
        p.b_out = -0.2;
        let xs = [0.7, -1.2];

        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let (mut h, mut c) = (0.0f64, 0.0f64);
        for &x in &xs {
            let i = sig(0.5 * x + 0.1 * h + 0.05);
            let f = sig(-0.3 * x + 0.4 * h + 1.0);
            let g = (0.8 * x - 0.6 * h - 0.1).tanh();
            let o = sig(0.2 * x + 0.7 * h);
            c = f * c + i * g;
            h = o * c.tanh();
        }
        let want = sig(1.5 * h - 0.2);
        let (got, _) = lstm_forward(&p, &series(&[[xs[0]], [xs[1]]])).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn output_bias_gradient_is_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LstmParams::<f64>::init(2, 3, &mut rng);
        let s = MultiSeries::from_rows(&[[0.1, 0.2], [0.3, -0.4], [1.0, 0.0]]).unwrap();
        let (prob, _) = lstm_forward(&p, &s).unwrap();
        for label in [0u8, 1] {
            let (g, _) = lstm_backward(&p, &s, label).unwrap();
            assert!((g.b_out - (prob - label as f64)).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = LstmParams::<f64>::zeros(2, 2);
        assert!(lstm_forward(&p, &series(&[[1.0]])).is_err());
    }

    #[test]
    fn classify_threshold_boundary() {
        let p = LstmParams::<f64>::zeros(1, 2);
        let s = series(&[[1.0]]);
        assert!(classify(&p, &s, 0.5).unwrap().positive);
        assert!(!classify(&p, &s, 0.6).unwrap().positive);
        assert!(classify(&p, &s, 0.0).unwrap().positive);
    }

    #[test]
    fn flatten_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = LstmParams::<f64>::init(3, 2, &mut rng);
        let mut q = LstmParams::<f64>::zeros(3, 2);
        q.assign_flat(&p.flatten());
        assert_eq!(p, q);
    }

    #[test]
    fn single_class_rejected() {
        let samples = vec![(series(&[[1.0]]), 1u8), (series(&[[2.0]]), 1u8)];
        assert!(matches!(train(&samples, &TrainConfig::default()), Err(Error::SingleClass)));
    }

    #[test]
    fn learns_constant_sequences() {
        let samples: Vec<(MultiSeries<f64>, u8)> = (0..40)
            .map(|i| {
                let label = (i % 2) as u8;
                let v = if label == 1 { 1.0 } else { -1.0 };
                let len = 3 + i % 5;
                (MultiSeries::from_rows(&vec![[v]; len]).unwrap(), label)
            })
            .collect();
        let cfg = TrainConfig { epochs: 50, hidden_dim: 4, validation_fraction: 0.0, ..TrainConfig::default() };
        let (params, log) = train(&samples, &cfg).unwrap();
        let correct = samples
            .iter()
            .filter(|(s, l)| classify(&params, s, 0.5).unwrap().positive == (*l == 1))
            .count();
        assert!(correct as f64 / samples.len() as f64 >= 0.99, "log: {:?}", log.epochs.last());
    }

    #[test]
    fn training_is_deterministic() {
        let samples: Vec<(MultiSeries<f64>, u8)> = (0..12)
            .map(|i| (MultiSeries::from_rows(&vec![[i as f64 * 0.1 - 0.6, 1.0]; 2 + i % 3]).unwrap(), (i >= 6) as u8))
            .collect();
        let cfg = TrainConfig { epochs: 5, hidden_dim: 3, seed: 11, ..TrainConfig::default() };
        let (p1, l1) = train(&samples, &cfg).unwrap();
        let (p2, l2) = train(&samples, &cfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(l1, l2);
    }
}
