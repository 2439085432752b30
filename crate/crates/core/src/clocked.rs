//! Two-clock network: a segment module that steps on every phone and a
//! syllable module that steps once per completed syllable.
//!
//! A syllable encoder runs alongside the segment module but restarts from
//! the boundary pattern at every syllable onset, so its state at the end of
//! a syllable summarizes that syllable alone. That summary is the syllable
//! module's input; the syllable module's recurrent input is likewise the
//! boundary pattern at each new syllable. The word head reads the segment
//! module and the most recent syllable-module state after every phone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphogen::Syllable;
use crate::phonology::Inventory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockedSpec {
    pub input_width: usize,
    pub segment_hidden: usize,
    pub encoder_hidden: usize,
    pub syllable_hidden: usize,
    pub word_width: usize,
    pub weight_init_range: f64,
}

impl ClockedSpec {
    pub fn validate(&self) -> Result<()> {
        let widths = [
            self.input_width,
            self.segment_hidden,
            self.encoder_hidden,
            self.syllable_hidden,
            self.word_width,
        ];
        if widths.contains(&0) {
            return Err(Error::Config("clocked network layers must be non-empty".into()));
        }
        if !(self.weight_init_range >= 0.0 && self.weight_init_range.is_finite()) {
            return Err(Error::Config("weight_init_range must be >= 0".into()));
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Fully connected logistic layer over the concatenation of its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    fn new(rows: usize, cols: usize, r: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut draw = || if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
        let weights = (0..rows * cols).map(|_| draw()).collect();
        let bias = (0..rows).map(|_| draw()).collect();
        Dense {
            rows,
            cols,
            weights,
            bias,
        }
    }

    fn apply(&self, parts: &[&[f64]]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                let row = &self.weights[i * self.cols..(i + 1) * self.cols];
                let mut z = self.bias[i];
                let mut k = 0;
                for part in parts {
                    for &v in *part {
                        z += row[k] * v;
                        k += 1;
                    }
                }
                sigmoid(z)
            })
            .collect()
    }
}

/// Phones with syllable boundary marks. `syllable_ends[k]` is the exclusive
/// end index of syllable `k` in `phones`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedSequence {
    pub phones: Vec<Vec<f64>>,
    pub syllable_ends: Vec<usize>,
}

impl MarkedSequence {
    pub fn from_syllables(inventory: &Inventory, syllables: &[Syllable]) -> Result<Self> {
        let mut phones = Vec::new();
        let mut syllable_ends = Vec::with_capacity(syllables.len());
        for s in syllables {
            for sym in s.symbols() {
                phones.push(inventory.encode_phone(&sym)?.0);
            }
            syllable_ends.push(phones.len());
        }
        Ok(MarkedSequence {
            phones,
            syllable_ends,
        })
    }

    /// The marks must be strictly increasing and end exactly at the last phone.
    pub fn validate(&self) -> Result<()> {
        if self.phones.is_empty() || self.syllable_ends.is_empty() {
            return Err(Error::Contract("sequence carries no syllable marks".into()));
        }
        let mut prev = 0;
        for &e in &self.syllable_ends {
            if e <= prev {
                return Err(Error::Contract(format!("syllable mark {e} does not advance")));
            }
            prev = e;
        }
        if prev != self.phones.len() {
            return Err(Error::Contract(format!(
                "syllable marks end at {prev} but the sequence has {} phones",
                self.phones.len()
            )));
        }
        Ok(())
    }
}

/// Everything one clocked pass produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockedTrace {
    /// Segment-module updates, the leading boundary included.
    pub segment_steps: usize,
    pub syllable_steps: usize,
    /// Encoder summaries handed to the syllable module, one per syllable.
    pub syllable_inputs: Vec<Vec<f64>>,
    /// Recurrent input the syllable module received at each of its steps.
    pub syllable_contexts: Vec<Vec<f64>>,
    pub syllable_states: Vec<Vec<f64>>,
    /// Word-head output after every segment step.
    pub word_outputs: Vec<Vec<f64>>,
}

impl ClockedTrace {
    pub fn final_output(&self) -> &[f64] {
        self.word_outputs.last().map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockedNetwork {
    spec: ClockedSpec,
    segment: Dense,
    encoder: Dense,
    syllable: Dense,
    word: Dense,
}

impl ClockedNetwork {
    pub fn new(spec: ClockedSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = spec.weight_init_range;
        let x = spec.input_width;
        Ok(ClockedNetwork {
            segment: Dense::new(spec.segment_hidden, x + spec.segment_hidden, r, &mut rng),
            encoder: Dense::new(spec.encoder_hidden, x + spec.encoder_hidden, r, &mut rng),
            syllable: Dense::new(
                spec.syllable_hidden,
                spec.encoder_hidden + spec.syllable_hidden,
                r,
                &mut rng,
            ),
            word: Dense::new(
                spec.word_width,
                spec.segment_hidden + spec.syllable_hidden,
                r,
                &mut rng,
            ),
            spec,
        })
    }

    pub fn spec(&self) -> &ClockedSpec {
        &self.spec
    }

    /// Runs a leading boundary and then the marked phones from zero state.
    pub fn forward_clocked(&self, seq: &MarkedSequence) -> Result<ClockedTrace> {
        seq.validate()?;
        let s = &self.spec;
        for p in &seq.phones {
            if p.len() != s.input_width {
                return Err(Error::Shape {
                    expected: s.input_width,
                    actual: p.len(),
                });
            }
        }
        let boundary_in = vec![0.0; s.input_width];
        let encoder_rest = vec![0.0; s.encoder_hidden];
        let syllable_rest = vec![0.0; s.syllable_hidden];

        let mut seg = vec![0.0; s.segment_hidden];
        let mut enc = encoder_rest.clone();
        let mut syl = syllable_rest.clone();
        let mut trace = ClockedTrace {
            segment_steps: 0,
            syllable_steps: 0,
            syllable_inputs: Vec::new(),
            syllable_contexts: Vec::new(),
            syllable_states: Vec::new(),
            word_outputs: Vec::new(),
        };

        seg = self.segment.apply(&[&boundary_in, &seg]);
        trace.segment_steps += 1;
        trace.word_outputs.push(self.word.apply(&[&seg, &syl]));

        let mut start = 0;
        for &end in &seq.syllable_ends {
            enc.copy_from_slice(&encoder_rest);
            for x in &seq.phones[start..end] {
                seg = self.segment.apply(&[x, &seg]);
                enc = self.encoder.apply(&[x, &enc]);
                trace.segment_steps += 1;
                trace.word_outputs.push(self.word.apply(&[&seg, &syl]));
            }
            let context = syllable_rest.clone();
            syl = self.syllable.apply(&[&enc, &context]);
            trace.syllable_steps += 1;
            trace.syllable_inputs.push(enc.clone());
            trace.syllable_contexts.push(context);
            trace.syllable_states.push(syl.clone());
            // the syllable-final phone already sees the finished syllable
            if let Some(last) = trace.word_outputs.last_mut() {
                *last = self.word.apply(&[&seg, &syl]);
            }
            start = end;
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phonology::{build_inventory, InventoryKind};

    fn syl(o: &str, v: &str, c: Option<&str>) -> Syllable {
        Syllable {
            onset: o.into(),
            vowel: v.into(),
            coda: c.map(Into::into),
        }
    }

    fn setup() -> (Inventory, ClockedNetwork) {
        let inv = build_inventory(InventoryKind::Reduplication).unwrap();
        let spec = ClockedSpec {
            input_width: inv.feature_count(),
            segment_hidden: 6,
            encoder_hidden: 5,
            syllable_hidden: 4,
            word_width: 3,
            weight_init_range: 0.5,
        };
        (inv, ClockedNetwork::new(spec, 9).unwrap())
    }

    #[test]
    fn two_closed_syllables_clock_correctly() {
        let (inv, net) = setup();
        let seq =
            MarkedSequence::from_syllables(&inv, &[syl("t", "a", Some("n")), syl("k", "a", Some("s"))])
                .unwrap();
        let tr = net.forward_clocked(&seq).unwrap();
        assert_eq!(tr.segment_steps, 7);
        assert_eq!(tr.syllable_steps, 2);
        assert_eq!(tr.word_outputs.len(), 7);
        assert!(tr.syllable_contexts.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn first_syllable_ignores_second() {
        let (inv, net) = setup();
        let a = MarkedSequence::from_syllables(&inv, &[syl("t", "a", None), syl("k", "o", None)]);
        let b = MarkedSequence::from_syllables(&inv, &[syl("t", "a", None), syl("ŋ", "i", Some("s"))]);
        let ta = net.forward_clocked(&a.unwrap()).unwrap();
        let tb = net.forward_clocked(&b.unwrap()).unwrap();
        assert_eq!(ta.syllable_states[0], tb.syllable_states[0]);
        assert_ne!(ta.syllable_states[1], tb.syllable_states[1]);
    }

    #[test]
    fn repeated_syllable_gives_repeated_input() {
        let (inv, net) = setup();
        let s = syl("m", "u", Some("n"));
        let seq = MarkedSequence::from_syllables(&inv, &[s.clone(), s]).unwrap();
        let tr = net.forward_clocked(&seq).unwrap();
        assert_eq!(tr.syllable_inputs[0], tr.syllable_inputs[1]);
        assert_eq!(tr.syllable_states[0], tr.syllable_states[1]);
    }

    #[test]
    fn unmarked_or_misaligned_sequences_are_rejected() {
        let (inv, net) = setup();
        let mut seq = MarkedSequence::from_syllables(&inv, &[syl("t", "a", None)]).unwrap();
        seq.syllable_ends.clear();
        assert!(matches!(net.forward_clocked(&seq), Err(Error::Contract(_))));
        seq.syllable_ends = vec![1];
        assert!(matches!(net.forward_clocked(&seq), Err(Error::Contract(_))));
        seq.syllable_ends = vec![2, 2];
        assert!(matches!(net.forward_clocked(&seq), Err(Error::Contract(_))));
    }
}
