use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Wire width of one parameter when models are shipped between peers.
pub const DEFAULT_BYTES_PER_ELEMENT: u64 = 4;

/// A flat parameter vector together with the size it occupies on the wire.
///
/// `byte_size` is normally `values.len() * 4`, but runs that only care about
/// communication accounting pin it to a fixed size (e.g. 25 MiB) while
/// training a much smaller model. Either way it stays constant for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub values: Vec<f64>,
    pub byte_size: u64,
}

impl ModelWeights {
    pub fn new(values: Vec<f64>) -> Self {
        let byte_size = values.len() as u64 * DEFAULT_BYTES_PER_ELEMENT;
        ModelWeights { values, byte_size }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len])
    }

    pub fn with_byte_size(mut self, byte_size: u64) -> Self {
        self.byte_size = byte_size;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the first non-finite parameter, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }

    pub fn ensure_finite(&self, device: Option<usize>) -> Result<()> {
        match self.first_non_finite() {
            Some(index) => Err(Error::Diverged { index, device }),
            None => Ok(()),
        }
    }
}

/// Model architecture. Both variants end in a softmax over `classes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Multinomial logistic regression: `W x + b`.
    Logistic { features: usize, classes: usize },
    /// One tanh hidden layer: `W2 tanh(W1 x + b1) + b2`.
    Mlp {
        features: usize,
        hidden: usize,
        classes: usize,
    },
}

impl ModelSpec {
    pub fn features(&self) -> usize {
        match *self {
            ModelSpec::Logistic { features, .. } | ModelSpec::Mlp { features, .. } => features,
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            ModelSpec::Logistic { classes, .. } | ModelSpec::Mlp { classes, .. } => classes,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            ModelSpec::Logistic { features, classes } => classes * features + classes,
            ModelSpec::Mlp {
                features,
                hidden,
                classes,
            } => hidden * features + hidden + classes * hidden + classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ModelSpec::Logistic { features, classes } => features > 0 && classes >= 2,
            ModelSpec::Mlp {
                features,
                hidden,
                classes,
            } => features > 0 && hidden > 0 && classes >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("degenerate model spec {self:?}")))
        }
    }

    /// Initial weights. Logistic models start at zero; the MLP gets a scaled
    /// normal initialisation so the hidden units are not symmetric.
    pub fn init(&self, seed: u64) -> ModelWeights {
        match *self {
            ModelSpec::Logistic { .. } => ModelWeights::zeros(self.param_count()),
            ModelSpec::Mlp {
                features,
                hidden,
                classes,
            } => {
                let mut rng = seed::rng_from(seed);
                let mut values = Vec::with_capacity(self.param_count());
                let s1 = Normal::new(0.0, (1.0 / features as f64).sqrt()).unwrap();
                values.extend((0..hidden * features).map(|_| s1.sample(&mut rng)));
                values.extend(std::iter::repeat_n(0.0, hidden));
                let s2 = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).unwrap();
                values.extend((0..classes * hidden).map(|_| s2.sample(&mut rng)));
                values.extend(std::iter::repeat_n(0.0, classes));
                ModelWeights::new(values)
            }
        }
    }

    /// Random weights drawn uniformly from `[-scale, scale]`.
    pub fn random(&self, scale: f64, rng: &mut impl Rng) -> ModelWeights {
        ModelWeights::new(
            (0..self.param_count())
                .map(|_| rng.random_range(-scale..=scale))
                .collect(),
        )
    }

    fn check_len(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                found: w.len(),
            });
        }
        Ok(())
    }

    /// Class scores for one input row. `scratch` must hold `hidden` entries
    /// for the MLP (ignored for logistic).
    fn logits_into(&self, w: &[f64], x: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        match *self {
            ModelSpec::Logistic { features, classes } => {
                let (weights, bias) = w.split_at(classes * features);
                for c in 0..classes {
                    let row = &weights[c * features..(c + 1) * features];
                    out[c] = bias[c] + dot(row, x);
                }
            }
            ModelSpec::Mlp {
                features,
                hidden,
                classes,
            } => {
                let (w1, rest) = w.split_at(hidden * features);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(classes * hidden);
                for h in 0..hidden {
                    scratch[h] = (b1[h] + dot(&w1[h * features..(h + 1) * features], x)).tanh();
                }
                for c in 0..classes {
                    out[c] = b2[c] + dot(&w2[c * hidden..(c + 1) * hidden], &scratch[..hidden]);
                }
            }
        }
    }

    fn hidden_len(&self) -> usize {
        match *self {
            ModelSpec::Logistic { .. } => 0,
            ModelSpec::Mlp { hidden, .. } => hidden,
        }
    }

    /// Predicted class for each row of `features` (row-major, `self.features()`
    /// columns). Ties go to the lowest class index.
    pub fn predict(&self, w: &ModelWeights, features: &[f64]) -> Result<Vec<usize>> {
        self.check_len(&w.values)?;
        let d = self.features();
        let mut scratch = vec![0.0; self.hidden_len()];
        let mut logits = vec![0.0; self.classes()];
        Ok(features
            .chunks_exact(d)
            .map(|x| {
                self.logits_into(&w.values, x, &mut scratch, &mut logits);
                argmax(&logits)
            })
            .collect())
    }

    /// Mean softmax cross-entropy over the selected rows.
    pub fn loss(&self, w: &[f64], features: &[f64], labels: &[usize], rows: &[usize]) -> Result<f64> {
        self.check_len(w)?;
        let d = self.features();
        let mut scratch = vec![0.0; self.hidden_len()];
        let mut logits = vec![0.0; self.classes()];
        let mut total = 0.0;
        for &r in rows {
            self.logits_into(w, &features[r * d..(r + 1) * d], &mut scratch, &mut logits);
            let lse = log_sum_exp(&logits);
            total += lse - logits[labels[r]];
        }
        Ok(total / rows.len() as f64)
    }

    /// Mean cross-entropy and its gradient over the selected rows. `grad` is
    /// overwritten.
    pub fn loss_and_grad(
        &self,
        w: &[f64],
        features: &[f64],
        labels: &[usize],
        rows: &[usize],
        grad: &mut [f64],
    ) -> Result<f64> {
        self.check_len(w)?;
        if grad.len() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                found: grad.len(),
            });
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let d = self.features();
        let k = self.classes();
        let mut hidden_act = vec![0.0; self.hidden_len()];
        let mut logits = vec![0.0; k];
        let mut total = 0.0;

        for &r in rows {
            let x = &features[r * d..(r + 1) * d];
            self.logits_into(w, x, &mut hidden_act, &mut logits);
            let lse = log_sum_exp(&logits);
            total += lse - logits[labels[r]];
            // logits <- softmax - onehot
            for (c, z) in logits.iter_mut().enumerate() {
                *z = (*z - lse).exp() - if c == labels[r] { 1.0 } else { 0.0 };
            }

            match *self {
                ModelSpec::Logistic { features, classes } => {
                    let (gw, gb) = grad.split_at_mut(classes * features);
                    for c in 0..classes {
                        let dz = logits[c];
                        axpy(dz, x, &mut gw[c * features..(c + 1) * features]);
                        gb[c] += dz;
                    }
                }
                ModelSpec::Mlp {
                    features,
                    hidden,
                    classes,
                } => {
                    let w2 = &w[hidden * features + hidden..hidden * features + hidden + classes * hidden];
                    let (gw1, rest) = grad.split_at_mut(hidden * features);
                    let (gb1, rest) = rest.split_at_mut(hidden);
                    let (gw2, gb2) = rest.split_at_mut(classes * hidden);
                    for c in 0..classes {
                        axpy(logits[c], &hidden_act, &mut gw2[c * hidden..(c + 1) * hidden]);
                        gb2[c] += logits[c];
                    }
                    for h in 0..hidden {
                        let back: f64 = (0..classes).map(|c| w2[c * hidden + h] * logits[c]).sum();
                        let dz = back * (1.0 - hidden_act[h] * hidden_act[h]);
                        axpy(dz, x, &mut gw1[h * features..(h + 1) * features]);
                        gb1[h] += dz;
                    }
                }
            }
        }

        let scale = 1.0 / rows.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        Ok(total * scale)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_counts() {
        let l = ModelSpec::Logistic { features: 4, classes: 4 };
        assert_eq!(l.param_count(), 20);
        let m = ModelSpec::Mlp {
            features: 3,
            hidden: 5,
            classes: 2,
        };
        assert_eq!(m.param_count(), 15 + 5 + 10 + 2);
        assert_eq!(m.init(1).len(), m.param_count());
    }

    #[test]
    fn byte_size_tracks_length_unless_pinned() {
        let w = ModelWeights::zeros(10);
        assert_eq!(w.byte_size, 40);
        assert_eq!(w.with_byte_size(25 << 20).byte_size, 25 << 20);
    }

    #[test]
    fn zero_logistic_loss_is_log_classes() {
        let spec = ModelSpec::Logistic { features: 2, classes: 4 };
        let w = spec.init(0);
        let x = [1.0, -2.0, 0.5, 0.5];
        let loss = spec.loss(&w.values, &x, &[0, 3], &[0, 1]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn predict_breaks_ties_low() {
        let spec = ModelSpec::Logistic { features: 1, classes: 3 };
        let w = ModelWeights::zeros(spec.param_count());
        assert_eq!(spec.predict(&w, &[1.0, 2.0]).unwrap(), vec![0, 0]);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let spec = ModelSpec::Logistic { features: 2, classes: 2 };
        let w = ModelWeights::zeros(5);
        assert!(matches!(
            spec.predict(&w, &[0.0, 0.0]),
            Err(Error::DimensionMismatch { expected: 6, found: 5 })
        ));
    }

    #[test]
    fn non_finite_detected() {
        let mut w = ModelWeights::zeros(3);
        w.values[2] = f64::NAN;
        assert!(matches!(
            w.ensure_finite(Some(4)),
            Err(Error::Diverged { index: 2, device: Some(4) })
        ));
    }
}
