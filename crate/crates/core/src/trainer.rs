//! Word-level training and end-of-word evaluation.
//!
//! A [`Sample`] is an encoded phone sequence plus one label per task head.
//! While a word is presented the task targets stay constant and the phone
//! head is trained to reproduce the current input.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphogen::{Corpus, Word};
use crate::net::{HeadRole, Network, NetworkSpec, StepState, TrainConfig};
use crate::par::{self, Execution};
use crate::phonology::Inventory;

/// Encoded input sequence (boundary first) with labels for every task head,
/// in head order. Phone-copy heads take no label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub phones: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Sample {
    /// Encodes a word; with `end_boundary` a closing boundary phone follows
    /// the last segment and the word is scored there.
    pub fn from_word(inventory: &Inventory, word: &Word, end_boundary: bool) -> Result<Self> {
        let mut phones: Vec<Vec<f64>> = inventory
            .encode_word(&word.surface)?
            .into_iter()
            .map(|p| p.0)
            .collect();
        if end_boundary {
            phones.push(inventory.boundary().0);
        }
        let mut labels = vec![word.root_id];
        labels.extend(&word.inflection_ids);
        Ok(Sample { phones, labels })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainSet {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl TrainSet {
    pub fn from_corpus(corpus: &Corpus, inventory: &Inventory, end_boundary: bool) -> Result<Self> {
        let enc = |ws: &[Word]| -> Result<Vec<Sample>> {
            ws.iter()
                .map(|w| Sample::from_word(inventory, w, end_boundary))
                .collect()
        };
        Ok(TrainSet {
            train: enc(&corpus.train)?,
            test: enc(&corpus.test)?,
        })
    }
}

/// Constant per-word targets for every head; phone-copy slots stay empty
/// and are filled with the current input at each step.
#[derive(Debug, Clone, PartialEq)]
pub struct WordTargets {
    pub heads: Vec<Option<Vec<f64>>>,
}

impl WordTargets {
    pub fn new(spec: &NetworkSpec, labels: &[usize]) -> Result<Self> {
        let mut labels = labels.iter();
        let heads = spec
            .heads
            .iter()
            .map(|h| {
                if h.role == HeadRole::PhoneCopy {
                    return Ok(None);
                }
                let &label = labels.next().ok_or_else(|| {
                    Error::Contract(format!("no label for head `{}`", h.name))
                })?;
                let mut t = vec![0.0; h.width];
                match h.role {
                    HeadRole::Binary if h.width == 1 => t[0] = (label != 0) as u8 as f64,
                    _ if label < h.width => t[label] = 1.0,
                    _ => {
                        return Err(Error::Contract(format!(
                            "label {label} out of range for head `{}` of width {}",
                            h.name, h.width
                        )))
                    }
                }
                Ok(Some(t))
            })
            .collect::<Result<Vec<_>>>()?;
        if labels.next().is_some() {
            return Err(Error::Contract("more labels than task heads".into()));
        }
        Ok(WordTargets { heads })
    }

    /// Targets for one step given the current input phone.
    pub fn at<'a>(&'a self, input: &'a [f64]) -> Vec<&'a [f64]> {
        self.heads
            .iter()
            .map(|t| t.as_deref().unwrap_or(input))
            .collect()
    }
}

/// Trains on one word from a fresh context. Returns the summed step loss.
pub fn train_word(net: &mut Network, sample: &Sample, config: &TrainConfig) -> Result<f64> {
    let targets = WordTargets::new(net.spec(), &sample.labels)?;
    net.reset_context();
    let mut total = 0.0;
    for x in &sample.phones {
        net.forward_step(x)?;
        total += net.backward_step(&targets.at(x), config)?;
    }
    Ok(total)
}

/// Distances this close count as ties; summation order alone can separate
/// mathematically equal distances by a few ulps.
const TIE_EPS: f64 = 1e-12;

fn closer(d: f64, best: f64) -> bool {
    d < best - TIE_EPS * (1.0 + best.abs())
}

/// Index of the candidate nearest to `output` in Euclidean distance; ties
/// go to the lowest index.
pub fn classify(output: &[f64], candidates: &[Vec<f64>]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.len() != output.len() {
            return Err(Error::Shape {
                expected: output.len(),
                actual: c.len(),
            });
        }
        let d: f64 = output.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.is_none_or(|(_, bd)| closer(d, bd)) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::Contract("no candidate targets".into()))
}

/// [`classify`] against the one-hot vectors of width `output.len()`,
/// without materializing them.
pub fn classify_one_hot(output: &[f64]) -> Result<usize> {
    let total: f64 = output.iter().map(|y| y * y).sum();
    let mut best: Option<(usize, f64)> = None;
    for (i, &y) in output.iter().enumerate() {
        let d = total - y * y + (y - 1.0) * (y - 1.0);
        if best.is_none_or(|(_, bd)| closer(d, bd)) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| Error::Contract("empty output vector".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub split: Split,
    /// `None` when the network has no root head.
    pub root_accuracy: Option<f64>,
    /// One entry per inflection (or binary) head, in head order.
    pub inflection_accuracy: Vec<f64>,
    /// Mean over words of the summed step loss.
    pub mean_error: f64,
}

/// Scores every word at its final phone. Weights are never touched.
pub fn evaluate(net: &Network, samples: &[Sample], split: Split) -> Result<EvalResult> {
    let spec = net.spec();
    let task_heads: Vec<(usize, HeadRole)> = spec
        .heads
        .iter()
        .enumerate()
        .filter(|(_, h)| h.role != HeadRole::PhoneCopy)
        .map(|(i, h)| (i, h.role))
        .collect();
    let mut correct = vec![0usize; task_heads.len()];
    let mut error = 0.0;
    for s in samples {
        let targets = WordTargets::new(spec, &s.labels)?;
        let states = net.infer_all(&s.phones)?;
        for (x, st) in s.phones.iter().zip(&states) {
            error += Network::loss(st, &targets.at(x));
        }
        let Some(last) = states.last() else {
            return Err(Error::Contract("cannot evaluate an empty sequence".into()));
        };
        for (k, &(h, role)) in task_heads.iter().enumerate() {
            if predict(last, h, role)? == s.labels[k] {
                correct[k] += 1;
            }
        }
    }
    let n = samples.len().max(1) as f64;
    let mut root_accuracy = None;
    let mut inflection_accuracy = Vec::new();
    for (k, &(_, role)) in task_heads.iter().enumerate() {
        let acc = correct[k] as f64 / n;
        if role == HeadRole::Root {
            root_accuracy = Some(acc);
        } else {
            inflection_accuracy.push(acc);
        }
    }
    Ok(EvalResult {
        split,
        root_accuracy,
        inflection_accuracy,
        mean_error: error / n,
    })
}

fn predict(state: &StepState, head: usize, role: HeadRole) -> Result<usize> {
    let y = &state.outputs[head];
    match role {
        HeadRole::Binary if y.len() == 1 => Ok((y[0] >= 0.5) as usize),
        _ => classify_one_hot(y),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean summed loss over the epoch's training presentations.
    pub train_error: f64,
    pub train: EvalResult,
    pub test: EvalResult,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub history: Vec<EpochRecord>,
}

/// Online training for `config.epochs` passes over a per-epoch shuffle of
/// the training words, scoring both splits after every epoch.
pub fn train(set: &TrainSet, spec: &NetworkSpec, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let mut net = Network::new(spec.clone(), config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..set.train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut err = 0.0;
        for &i in &order {
            err += train_word(&mut net, &set.train[i], config)?;
        }
        history.push(EpochRecord {
            epoch,
            train_error: err / set.train.len().max(1) as f64,
            train: evaluate(&net, &set.train, Split::Train)?,
            test: evaluate(&net, &set.test, Split::Test)?,
        });
    }
    Ok(TrainOutcome {
        network: net,
        history,
    })
}

/// Accuracy of untrained networks: `networks` independent initializations,
/// each scored on every sample. Returns (root accuracy, per-head inflection
/// accuracy, evaluation count).
pub fn chance_accuracy(
    spec: &NetworkSpec,
    samples: &[Sample],
    networks: usize,
    seed: u64,
    exec: Execution,
) -> Result<(Option<f64>, Vec<f64>, usize)> {
    let seeds: Vec<u64> = (0..networks as u64).map(|i| seed.wrapping_add(i)).collect();
    let results = par::map(exec, &seeds, |&s| {
        let net = Network::new(spec.clone(), s)?;
        evaluate(&net, samples, Split::Test)
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let n = results.len().max(1) as f64;
    let root = results
        .iter()
        .map(|r| r.root_accuracy)
        .sum::<Option<f64>>()
        .map(|s| s / n);
    let heads = results.first().map_or(0, |r| r.inflection_accuracy.len());
    let infl = (0..heads)
        .map(|k| results.iter().map(|r| r.inflection_accuracy[k]).sum::<f64>() / n)
        .collect();
    Ok((root, infl, networks * samples.len()))
}
