//! One-hidden-layer feedforward classifier over fixed input vectors, used
//! for comparisons between static syllable representations.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedForwardSpec {
    pub input_width: usize,
    pub hidden: usize,
    pub output_width: usize,
    pub weight_init_range: f64,
}

impl FeedForwardSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_width == 0 || self.hidden == 0 || self.output_width == 0 {
            return Err(Error::Config("feedforward layers must be non-empty".into()));
        }
        if !(self.weight_init_range >= 0.0 && self.weight_init_range.is_finite()) {
            return Err(Error::Config("weight_init_range must be >= 0".into()));
        }
        Ok(())
    }

    /// Parameter count: input->hidden and hidden->output weights plus biases.
    pub fn param_count(&self) -> usize {
        self.hidden * (self.input_width + 1) + self.output_width * (self.hidden + 1)
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Parameters are stored as `[W1 | b1 | W2 | b2]`, weights row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedForward {
    pub spec: FeedForwardSpec,
    pub params: Vec<f64>,
    #[serde(skip)]
    velocity: Vec<f64>,
}

impl FeedForward {
    pub fn new(spec: FeedForwardSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = spec.weight_init_range;
        let params = (0..spec.param_count())
            .map(|_| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 })
            .collect();
        Self::from_params(spec, params)
    }

    pub fn from_params(spec: FeedForwardSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::Shape {
                expected: spec.param_count(),
                actual: params.len(),
            });
        }
        let velocity = vec![0.0; params.len()];
        Ok(FeedForward {
            spec,
            params,
            velocity,
        })
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let s = &self.spec;
        let b1 = s.hidden * s.input_width;
        let w2 = b1 + s.hidden;
        let b2 = w2 + s.output_width * s.hidden;
        (b1, w2, b2)
    }

    /// Hidden and output activations for `x`.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = &self.spec;
        if x.len() != s.input_width {
            return Err(Error::Shape {
                expected: s.input_width,
                actual: x.len(),
            });
        }
        let (b1, w2, b2) = self.offsets();
        let p = &self.params;
        let hidden: Vec<f64> = (0..s.hidden)
            .map(|j| {
                let row = &p[j * s.input_width..(j + 1) * s.input_width];
                sigmoid(row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + p[b1 + j])
            })
            .collect();
        let output = (0..s.output_width)
            .map(|k| {
                let row = &p[w2 + k * s.hidden..w2 + (k + 1) * s.hidden];
                sigmoid(row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + p[b2 + k])
            })
            .collect();
        Ok((hidden, output))
    }

    /// Half summed squared error on one pattern.
    pub fn loss(&self, x: &[f64], target: &[f64]) -> Result<f64> {
        let (_, y) = self.forward(x)?;
        Ok(0.5 * y.iter().zip(target).map(|(a, t)| (a - t) * (a - t)).sum::<f64>())
    }

    /// Loss gradient for one pattern, with `slope_offset` added to the
    /// output derivative (zero gives the exact gradient).
    pub fn gradient(&self, x: &[f64], target: &[f64], slope_offset: f64) -> Result<Vec<f64>> {
        let s = &self.spec;
        if target.len() != s.output_width {
            return Err(Error::Shape {
                expected: s.output_width,
                actual: target.len(),
            });
        }
        let (h, y) = self.forward(x)?;
        let (b1, w2, b2) = self.offsets();
        let mut g = vec![0.0; self.params.len()];
        let d_out: Vec<f64> = y
            .iter()
            .zip(target)
            .map(|(&a, &t)| (a - t) * (a * (1.0 - a) + slope_offset))
            .collect();
        let mut d_hid = vec![0.0; s.hidden];
        for (k, &dk) in d_out.iter().enumerate() {
            for j in 0..s.hidden {
                g[w2 + k * s.hidden + j] = dk * h[j];
                d_hid[j] += dk * self.params[w2 + k * s.hidden + j];
            }
            g[b2 + k] = dk;
        }
        for j in 0..s.hidden {
            let dj = d_hid[j] * h[j] * (1.0 - h[j]);
            for i in 0..s.input_width {
                g[j * s.input_width + i] = dj * x[i];
            }
            g[b1 + j] = dj;
        }
        Ok(g)
    }

    /// One online momentum step on a single pattern. Returns the loss
    /// before the update.
    pub fn train_pattern(&mut self, x: &[f64], target: &[f64], config: &TrainConfig) -> Result<f64> {
        let loss = self.loss(x, target)?;
        let g = self.gradient(x, target, config.slope_offset)?;
        if self.velocity.len() != self.params.len() {
            self.velocity = vec![0.0; self.params.len()];
        }
        for ((p, v), gi) in self.params.iter_mut().zip(&mut self.velocity).zip(g) {
            *v = config.momentum * *v - config.learning_rate * gi;
            *p += *v;
        }
        Ok(loss)
    }

    /// One pass over `data` in `order`, single-output targets 0 or 1.
    /// Returns the mean pattern loss.
    pub fn train_epoch(
        &mut self,
        data: &[(Vec<f64>, bool)],
        order: &[usize],
        config: &TrainConfig,
    ) -> Result<f64> {
        let mut total = 0.0;
        for &i in order {
            let (x, label) = &data[i];
            total += self.train_pattern(x, &[*label as u8 as f64], config)?;
        }
        Ok(total / order.len().max(1) as f64)
    }

    /// Single-output decision with a 0.5 threshold.
    pub fn predict_binary(&self, x: &[f64]) -> Result<bool> {
        Ok(self.forward(x)?.1[0] >= 0.5)
    }
}

/// Trains a fresh single-output network on labelled patterns for
/// `config.epochs` shuffled passes.
pub fn train_binary(
    spec: FeedForwardSpec,
    data: &[(Vec<f64>, bool)],
    config: &TrainConfig,
) -> Result<FeedForward> {
    config.validate()?;
    if spec.output_width != 1 {
        return Err(Error::Config("binary classifier needs exactly one output".into()));
    }
    let mut net = FeedForward::new(spec, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        net.train_epoch(data, &order, config)?;
    }
    Ok(net)
}

/// Fraction of patterns whose thresholded output matches the label.
pub fn binary_accuracy(net: &FeedForward, data: &[(Vec<f64>, bool)]) -> Result<f64> {
    let mut correct = 0usize;
    for (x, label) in data {
        if net.predict_binary(x)? == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len().max(1) as f64)
}
