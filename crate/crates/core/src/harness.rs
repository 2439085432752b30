//! Seeded replicate suites: corpus generation, training, evaluation and the
//! artifact files written for each run.
//!
//! Every (condition, replicate) cell derives its seeds from the master seed
//! with [`derive_seed`], so any cell can be re-run on its own and a whole
//! suite is reproducible from one number.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{autosegment_score, collect_states, test_roots, PcaModel};
use crate::error::{Error, Result};
use crate::feedforward::{binary_accuracy, FeedForward, FeedForwardSpec};
use crate::io::{
    feature_table_hash, metrics_csv, metrics_rows, write_file, CorpusFile, MetricsRow, ModelFile,
    Provenance,
};
use crate::morphogen::{
    build_pair_corpus, enumerate_syllables, generate_corpus, Corpus, PairCorpus, PairTask, Rule,
    RuleKind, Syllable,
};
use crate::net::{
    HeadRole, HeadSpec, Network, NetworkSpec, TrainConfig, DEFAULT_INIT_RANGE, ROOT_MODULE,
};
use crate::par::{self, Execution};
use crate::phonology::{FeatureTable, Inventory, InventoryKind};
use crate::trainer::{train, EpochRecord, EvalResult, Sample, Split, TrainOutcome, TrainSet};

pub const MANIFEST_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Figure2,
    Template3,
    Constraints,
    Reduplication,
}

impl Suite {
    pub const ALL: [Suite; 4] = [
        Suite::Figure2,
        Suite::Template3,
        Suite::Constraints,
        Suite::Reduplication,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Figure2 => "figure2",
            Suite::Template3 => "template3",
            Suite::Constraints => "constraints",
            Suite::Reduplication => "reduplication",
        }
    }

    pub fn conditions(self) -> Vec<Condition> {
        let morph = |rule: RuleKind, inventory| Condition::Morphology { rule, inventory };
        match self {
            Suite::Figure2 => RuleKind::GENERAL
                .iter()
                .map(|&r| morph(r, r.inventory_kind()))
                .collect(),
            Suite::Template3 => vec![morph(RuleKind::Template3Favored, InventoryKind::TemplateCc)],
            Suite::Constraints => vec![
                morph(RuleKind::Template3Favored, InventoryKind::ConstraintCc),
                morph(RuleKind::Template3Disfavored, InventoryKind::ConstraintCc),
            ],
            Suite::Reduplication => vec![
                Condition::Sequential(PairTask::Onset),
                Condition::Sequential(PairTask::Rime),
                Condition::Static(PairTask::Onset),
                Condition::Static(PairTask::Rime),
            ],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

/// One experimental condition within a suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// A modular network trained on one morphological rule.
    Morphology {
        rule: RuleKind,
        inventory: InventoryKind,
    },
    /// A recurrent network hearing two-syllable words one phone at a time.
    Sequential(PairTask),
    /// A feedforward network comparing two static syllable representations.
    Static(PairTask),
}

impl Condition {
    pub fn name(&self) -> String {
        match self {
            Condition::Morphology { rule, .. } => rule.name().to_string(),
            Condition::Sequential(t) => format!("{}_seq", t.name()),
            Condition::Static(t) => format!("{}_ff", t.name()),
        }
    }
}

/// Every tunable knob of a suite. Unset `epochs` means each rule's own
/// schedule (150 for tense-only rules, 100 for tense-aspect rules).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub slope_offset: f64,
    pub weight_init_range: f64,
    pub root_hidden: usize,
    pub inflection_hidden: usize,
    /// Close every word with a boundary phone and score it there.
    pub end_boundary: bool,
    pub epochs: Option<usize>,
    pub sequence_hidden: usize,
    pub sequence_epochs: usize,
    pub syllable_hidden: usize,
    pub syllable_epochs: usize,
    pub pair_hidden: usize,
    pub pair_epochs: usize,
    pub pair_train: usize,
    pub pair_test: usize,
    /// Use only the first `n` enumerated syllables.
    pub syllable_limit: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        ExperimentConfig {
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            slope_offset: t.slope_offset,
            weight_init_range: DEFAULT_INIT_RANGE,
            root_hidden: 15,
            inflection_hidden: 15,
            end_boundary: true,
            epochs: None,
            sequence_hidden: 15,
            sequence_epochs: 150,
            syllable_hidden: 30,
            syllable_epochs: 100,
            pair_hidden: 20,
            pair_epochs: 150,
            pair_train: 200,
            pair_test: 50,
            syllable_limit: None,
        }
    }
}

impl ExperimentConfig {
    pub fn train_config(&self, epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            epochs,
            seed,
            slope_offset: self.slope_offset,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config(1, 0).validate()?;
        let widths = [
            self.root_hidden,
            self.inflection_hidden,
            self.sequence_hidden,
            self.syllable_hidden,
            self.pair_hidden,
        ];
        if widths.contains(&0) {
            return Err(Error::Config("hidden widths must be >= 1".into()));
        }
        if [self.sequence_epochs, self.syllable_epochs, self.pair_epochs].contains(&0)
            || self.epochs == Some(0)
        {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.syllable_limit == Some(0) {
            return Err(Error::Config("syllable limit must be >= 1".into()));
        }
        Ok(())
    }

    /// Modular network for `corpus` under this configuration.
    pub fn morphology_spec(&self, inventory: &Inventory, rule: &Rule, roots: usize) -> NetworkSpec {
        let cats: Vec<(&str, usize)> = rule
            .categories
            .iter()
            .map(|c| (c.name.as_str(), c.values.len()))
            .collect();
        NetworkSpec::modular(
            inventory.feature_count(),
            roots,
            &cats,
            self.root_hidden,
            self.inflection_hidden,
        )
        .with_init_range(self.weight_init_range)
    }
}

/// Everything needed to run one suite.
#[derive(Debug, Clone)]
pub struct SuiteSpec {
    pub suite: Suite,
    pub replicates: usize,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub features: Arc<FeatureTable>,
    pub execution: Execution,
}

impl SuiteSpec {
    /// Ten replicates, master seed 1, default configuration, shipped features.
    pub fn new(suite: Suite) -> Self {
        SuiteSpec {
            suite,
            replicates: 10,
            master_seed: 1,
            config: ExperimentConfig::default(),
            features: Arc::new(FeatureTable::shipped()),
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        self.config.validate()
    }

    fn inventory(&self, kind: InventoryKind) -> Result<Inventory> {
        Inventory::build(kind, self.features.clone())
    }
}

/// Seed for a named cell component: FNV-1a over the parts (each followed by
/// a 0xff separator), starting from the FNV offset basis xor the master
/// seed, then finished with the splitmix64 mixer.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ master;
    for part in parts {
        for &b in part.as_bytes().iter().chain(&[0xff]) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Outcome of one (condition, replicate) cell. A failed cell keeps its
/// seeds and error text and has an empty history.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub condition: String,
    pub replicate: usize,
    pub seed: u64,
    pub corpus_seed: u64,
    pub history: Vec<EpochRecord>,
    /// Share of test roots whose root-consonant states cluster (template rules).
    pub autosegment: Option<f64>,
    pub error: Option<String>,
    pub corpus: Option<CorpusFile>,
    pub model: Option<ModelFile>,
}

impl CellResult {
    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.history.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (zero for a single value).
    pub std: f64,
    pub n: usize,
}

pub fn stat(values: &[f64]) -> Option<Stat> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(Stat { mean, std, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Root,
    /// Inflection head `k`; single-output tasks use `Inflection(0)`.
    Inflection(usize),
}

impl Metric {
    fn of(self, r: &EvalResult) -> Option<f64> {
        match self {
            Metric::Root => r.root_accuracy,
            Metric::Inflection(k) => r.inflection_accuracy.get(k).copied(),
        }
    }
}

/// Syllable-network trained once per replicate for the static conditions.
#[derive(Debug, Clone)]
pub struct SyllableReps {
    pub syllables: Vec<Syllable>,
    pub vectors: Vec<Vec<f64>>,
    index: HashMap<Syllable, usize>,
}

impl SyllableReps {
    pub fn get(&self, s: &Syllable) -> Option<&[f64]> {
        self.index.get(s).map(|&i| self.vectors[i].as_slice())
    }

    pub fn width(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub suite: Suite,
    pub master_seed: u64,
    pub replicates: usize,
    pub config: ExperimentConfig,
    pub features_sha256: String,
    pub cells: Vec<CellResult>,
    /// Per replicate, the syllable-identification model (reduplication only).
    pub syllable_models: Vec<Option<ModelFile>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub condition: String,
    pub replicate: usize,
    pub seed: u64,
    pub corpus_seed: u64,
    pub corpus: Option<String>,
    pub model: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub suite: Suite,
    pub master_seed: u64,
    pub replicates: usize,
    pub config: ExperimentConfig,
    pub features_sha256: String,
    pub code_version: String,
    pub cells: Vec<ManifestCell>,
}

fn cell_stem(condition: &str, replicate: usize) -> String {
    format!("{condition}-r{replicate:02}")
}

impl RunResult {
    /// Condition names in suite order.
    pub fn condition_names(&self) -> Vec<String> {
        self.suite.conditions().iter().map(Condition::name).collect()
    }

    /// Metric values over the successful replicates of `condition`, at
    /// 1-based `epoch` or at the final epoch for `None`.
    pub fn values(&self, condition: &str, epoch: Option<usize>, split: Split, metric: Metric) -> Vec<f64> {
        self.cells
            .iter()
            .filter(|c| c.condition == condition && c.error.is_none())
            .filter_map(|c| match epoch {
                None => c.history.last(),
                Some(e) => c.history.iter().find(|r| r.epoch == e),
            })
            .filter_map(|r| {
                metric.of(match split {
                    Split::Train => &r.train,
                    Split::Test => &r.test,
                })
            })
            .collect()
    }

    pub fn stat(&self, condition: &str, epoch: Option<usize>, split: Split, metric: Metric) -> Option<Stat> {
        stat(&self.values(condition, epoch, split, metric))
    }

    pub fn autosegment(&self, condition: &str) -> Option<Stat> {
        let v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.condition == condition)
            .filter_map(|c| c.autosegment)
            .collect();
        stat(&v)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.error.is_some())
    }

    pub fn metrics_rows(&self) -> Vec<MetricsRow> {
        self.cells
            .iter()
            .flat_map(|c| metrics_rows(self.suite.name(), &c.condition, c.seed, &c.history))
            .collect()
    }

    /// Every epoch of every cell, in suite order.
    pub fn results_csv(&self) -> Result<String> {
        metrics_csv(&self.metrics_rows())
    }

    /// Final-epoch test means and standard deviations per condition.
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "suite", "rule", "replicates", "failed", "root_mean", "root_std", "tense_mean",
            "tense_std", "aspect_mean", "aspect_std", "autosegment_mean",
        ])?;
        let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for name in self.condition_names() {
            let failed = self.failures().filter(|c| c.condition == name).count();
            let ok = self
                .cells
                .iter()
                .filter(|c| c.condition == name && c.error.is_none())
                .count();
            let s = |m| self.stat(&name, None, Split::Test, m);
            let (root, tense, aspect) = (
                s(Metric::Root),
                s(Metric::Inflection(0)),
                s(Metric::Inflection(1)),
            );
            w.write_record([
                self.suite.name().to_string(),
                name.clone(),
                ok.to_string(),
                failed.to_string(),
                f(root.map(|s| s.mean)),
                f(root.map(|s| s.std)),
                f(tense.map(|s| s.mean)),
                f(tense.map(|s| s.std)),
                f(aspect.map(|s| s.mean)),
                f(aspect.map(|s| s.std)),
                f(self.autosegment(&name).map(|s| s.mean)),
            ])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Contract(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn manifest(&self) -> Manifest {
        let cells = self
            .cells
            .iter()
            .map(|c| {
                let stem = cell_stem(&c.condition, c.replicate);
                ManifestCell {
                    condition: c.condition.clone(),
                    replicate: c.replicate,
                    seed: c.seed,
                    corpus_seed: c.corpus_seed,
                    corpus: c.corpus.as_ref().map(|_| format!("corpora/{stem}.json")),
                    model: c.model.as_ref().map(|_| format!("models/{stem}.json")),
                    error: c.error.clone(),
                }
            })
            .collect();
        Manifest {
            version: MANIFEST_VERSION,
            suite: self.suite,
            master_seed: self.master_seed,
            replicates: self.replicates,
            config: self.config.clone(),
            features_sha256: self.features_sha256.clone(),
            code_version: CODE_VERSION.to_string(),
            cells,
        }
    }

    /// Writes `results.csv`, `summary.csv`, `manifest.json` and the
    /// per-cell corpus and model files under `dir`.
    pub fn write_artifacts(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_file(dir.join("results.csv"), &self.results_csv()?)?;
        write_file(dir.join("summary.csv"), &self.summary_csv()?)?;
        let manifest = serde_json::to_string_pretty(&self.manifest())?;
        write_file(dir.join("manifest.json"), &manifest)?;
        for c in &self.cells {
            let stem = cell_stem(&c.condition, c.replicate);
            if let Some(corpus) = &c.corpus {
                corpus.save(dir.join("corpora").join(format!("{stem}.json")))?;
            }
            if let Some(model) = &c.model {
                model.save(dir.join("models").join(format!("{stem}.json")))?;
            }
        }
        for (r, m) in self.syllable_models.iter().enumerate() {
            if let Some(m) = m {
                m.save(dir.join("models").join(format!("{}.json", cell_stem("syllable_id", r))))?;
            }
        }
        Ok(())
    }
}

fn provenance(
    spec: &SuiteSpec,
    config: TrainConfig,
    end_boundary: bool,
    corpus: Option<&CorpusFile>,
) -> Provenance {
    Provenance {
        seed: config.seed,
        config,
        end_boundary,
        corpus_sha256: corpus.map(CorpusFile::content_hash),
        features_sha256: feature_table_hash(&spec.features),
        code_version: CODE_VERSION.to_string(),
    }
}

/// Corpus for a morphology cell. Roots come from `inventory`, so rules that
/// share an inventory and a seed share roots and split.
pub fn morphology_corpus(rule: RuleKind, inventory: &Inventory, seed: u64) -> Result<Corpus> {
    let mut corpus = generate_corpus(&Rule::new(rule), inventory, seed)?;
    corpus.inventory = inventory.kind;
    Ok(corpus)
}

/// Fraction of `corpus`'s test roots whose root-consonant states cluster in
/// PC1-2 of `module`, with PCA fitted on the training words.
pub fn autosegment_share(net: &Network, inventory: &Inventory, corpus: &Corpus, module: &str) -> Result<f64> {
    let words: Vec<Vec<String>> = corpus.train.iter().map(|w| w.surface.clone()).collect();
    let states = collect_states(net, inventory, &words, module)?;
    let pca = PcaModel::fit(&states)?;
    let ids = test_roots(corpus);
    let mut hits = 0usize;
    for &id in &ids {
        let root = corpus
            .roots
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| Error::Contract(format!("corpus has no root {id}")))?;
        if autosegment_score(net, inventory, &corpus.rule, root, &pca, module)?.clusters() {
            hits += 1;
        }
    }
    Ok(hits as f64 / ids.len().max(1) as f64)
}

fn run_morphology(
    spec: &SuiteSpec,
    rule: RuleKind,
    inventory: InventoryKind,
    seed: u64,
    corpus_seed: u64,
) -> Result<(Vec<EpochRecord>, Option<f64>, CorpusFile, ModelFile)> {
    let cfg = &spec.config;
    let inv = spec.inventory(inventory)?;
    let corpus = morphology_corpus(rule, &inv, corpus_seed)?;
    let set = TrainSet::from_corpus(&corpus, &inv, cfg.end_boundary)?;
    let net_spec = cfg.morphology_spec(&inv, &corpus.rule, corpus.root_count());
    let epochs = cfg.epochs.unwrap_or(corpus.rule.default_epochs());
    let tc = cfg.train_config(epochs, seed);
    let TrainOutcome { network, history } = train(&set, &net_spec, &tc)?;
    let autosegment = match rule {
        RuleKind::Template3Favored | RuleKind::Template3Disfavored => {
            Some(autosegment_share(&network, &inv, &corpus, ROOT_MODULE)?)
        }
        _ => None,
    };
    let file = CorpusFile::from_corpus(&corpus);
    let model = ModelFile::recurrent(&network, provenance(spec, tc, cfg.end_boundary, Some(&file)));
    Ok((history, autosegment, file, model))
}

/// Syllables available to the reduplication suite.
pub fn suite_syllables(inventory: &Inventory, limit: Option<usize>) -> Vec<Syllable> {
    let mut all = enumerate_syllables(inventory);
    if let Some(n) = limit {
        all.truncate(n);
    }
    all
}

/// Encodes two-syllable words for a single-output recurrent network.
pub fn pair_samples(
    inventory: &Inventory,
    pairs: &[crate::morphogen::SyllablePair],
    end_boundary: bool,
) -> Result<Vec<Sample>> {
    pairs
        .iter()
        .map(|p| {
            let mut phones: Vec<Vec<f64>> = inventory
                .encode_word(&p.surface())?
                .into_iter()
                .map(|v| v.0)
                .collect();
            if end_boundary {
                phones.push(inventory.boundary().0);
            }
            Ok(Sample {
                phones,
                labels: vec![p.label as usize],
            })
        })
        .collect()
}

/// Recurrent network with one output unit trained on two-syllable words.
pub fn run_sequential_pair_task(
    inventory: &Inventory,
    corpus: &PairCorpus,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    let set = TrainSet {
        train: pair_samples(inventory, &corpus.train, config.end_boundary)?,
        test: pair_samples(inventory, &corpus.test, config.end_boundary)?,
    };
    let head = HeadSpec {
        name: corpus.task.name().into(),
        width: 1,
        role: HeadRole::Binary,
    };
    let spec = NetworkSpec::single(inventory.feature_count(), config.sequence_hidden, head)
        .with_init_range(config.weight_init_range);
    train(&set, &spec, &config.train_config(config.sequence_epochs, seed))
}

/// Trains the syllable-identification network: every syllable is a word
/// followed by a boundary, with one output unit per syllable.
pub fn train_syllable_network(
    inventory: &Inventory,
    syllables: &[Syllable],
    config: &ExperimentConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    let samples = syllables
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut phones: Vec<Vec<f64>> = inventory
                .encode_word(&s.symbols())?
                .into_iter()
                .map(|v| v.0)
                .collect();
            phones.push(inventory.boundary().0);
            Ok(Sample {
                phones,
                labels: vec![i],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let head = HeadSpec {
        name: "syllable".into(),
        width: syllables.len(),
        role: HeadRole::Root,
    };
    let spec = NetworkSpec::single(inventory.feature_count(), config.syllable_hidden, head)
        .with_init_range(config.weight_init_range);
    let set = TrainSet {
        train: samples,
        test: Vec::new(),
    };
    train(&set, &spec, &config.train_config(config.syllable_epochs, seed))
}

/// Hidden state at the end of each syllable-plus-boundary sequence of a
/// trained syllable network.
pub fn static_syllable_representations(
    outcome: &TrainOutcome,
    inventory: &Inventory,
    syllables: &[Syllable],
) -> Result<SyllableReps> {
    if outcome.history.is_empty() {
        return Err(Error::Contract("syllable network has not been trained".into()));
    }
    let mut vectors = Vec::with_capacity(syllables.len());
    for s in syllables {
        let mut phones: Vec<Vec<f64>> = inventory
            .encode_word(&s.symbols())?
            .into_iter()
            .map(|v| v.0)
            .collect();
        phones.push(inventory.boundary().0);
        vectors.push(outcome.network.infer(&phones)?.hidden[0].clone());
    }
    let index = syllables.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    Ok(SyllableReps {
        syllables: syllables.to_vec(),
        vectors,
        index,
    })
}

/// Trains a syllable network with `seed` and reads off its representations.
pub fn build_static_syllable_representations(
    inventory: &Inventory,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(SyllableReps, TrainOutcome)> {
    let syllables = suite_syllables(inventory, config.syllable_limit);
    let outcome = train_syllable_network(inventory, &syllables, config, seed)?;
    let reps = static_syllable_representations(&outcome, inventory, &syllables)?;
    Ok((reps, outcome))
}

fn pair_patterns(reps: &SyllableReps, pairs: &[crate::morphogen::SyllablePair]) -> Result<Vec<(Vec<f64>, bool)>> {
    pairs
        .iter()
        .map(|p| {
            let (a, b) = match (reps.get(&p.first), reps.get(&p.second)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::Contract(format!(
                        "no representation for pair {}+{}",
                        p.first.text(),
                        p.second.text()
                    )))
                }
            };
            Ok(([a, b].concat(), p.label))
        })
        .collect()
}

fn binary_eval(net: &FeedForward, data: &[(Vec<f64>, bool)], split: Split) -> Result<EvalResult> {
    let mut err = 0.0;
    for (x, label) in data {
        err += net.loss(x, &[*label as u8 as f64])?;
    }
    Ok(EvalResult {
        split,
        root_accuracy: None,
        inflection_accuracy: vec![binary_accuracy(net, data)?],
        mean_error: err / data.len().max(1) as f64,
    })
}

/// Feedforward network over concatenated pair representations (two syllable
/// vectors in, `pair_hidden` hidden units, one output), scored every epoch.
pub fn run_feedforward_pair_task(
    reps: &SyllableReps,
    corpus: &PairCorpus,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(FeedForward, Vec<EpochRecord>)> {
    let train_data = pair_patterns(reps, &corpus.train)?;
    let test_data = pair_patterns(reps, &corpus.test)?;
    let spec = FeedForwardSpec {
        input_width: 2 * reps.width(),
        hidden: config.pair_hidden,
        output_width: 1,
        weight_init_range: config.weight_init_range,
    };
    let tc = config.train_config(config.pair_epochs, seed);
    tc.validate()?;
    let mut net = FeedForward::new(spec, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut history = Vec::with_capacity(tc.epochs);
    for epoch in 1..=tc.epochs {
        order.shuffle(&mut rng);
        let train_error = net.train_epoch(&train_data, &order, &tc)?;
        history.push(EpochRecord {
            epoch,
            train_error,
            train: binary_eval(&net, &train_data, Split::Train)?,
            test: binary_eval(&net, &test_data, Split::Test)?,
        });
    }
    Ok((net, history))
}

type CellOutput = (Vec<EpochRecord>, Option<f64>, Option<CorpusFile>, Option<ModelFile>);

fn run_cell(
    spec: &SuiteSpec,
    condition: Condition,
    seed: u64,
    corpus_seed: u64,
    reps: Option<&Result<(SyllableReps, TrainOutcome)>>,
) -> Result<CellOutput> {
    let cfg = &spec.config;
    match condition {
        Condition::Morphology { rule, inventory } => {
            let (h, a, c, m) = run_morphology(spec, rule, inventory, seed, corpus_seed)?;
            Ok((h, a, Some(c), Some(m)))
        }
        Condition::Sequential(task) | Condition::Static(task) => {
            let inv = spec.inventory(InventoryKind::Reduplication)?;
            let syllables = suite_syllables(&inv, cfg.syllable_limit);
            let corpus = build_pair_corpus(&syllables, task, cfg.pair_train, cfg.pair_test, corpus_seed)?;
            let file = CorpusFile::from_pairs(&corpus, inv.kind);
            if let Condition::Sequential(_) = condition {
                let out = run_sequential_pair_task(&inv, &corpus, cfg, seed)?;
                let tc = cfg.train_config(cfg.sequence_epochs, seed);
                let model = ModelFile::recurrent(
                    &out.network,
                    provenance(spec, tc, cfg.end_boundary, Some(&file)),
                );
                return Ok((out.history, None, Some(file), Some(model)));
            }
            let (reps, _) = match reps {
                Some(Ok(r)) => r,
                Some(Err(e)) => return Err(Error::Contract(format!("syllable network failed: {e}"))),
                None => return Err(Error::Contract("static condition without representations".into())),
            };
            let (net, history) = run_feedforward_pair_task(reps, &corpus, cfg, seed)?;
            let tc = cfg.train_config(cfg.pair_epochs, seed);
            let model = ModelFile::feedforward(&net, provenance(spec, tc, false, Some(&file)));
            Ok((history, None, Some(file), Some(model)))
        }
    }
}

/// Seeds for one cell: (network seed, corpus seed). Conditions that must
/// see the same material share the corpus seed: all morphology rules of a
/// replicate, and both reduplication models of a task.
pub fn cell_seeds(suite: Suite, master: u64, condition: &Condition, replicate: usize) -> (u64, u64) {
    let rep = replicate.to_string();
    let net = derive_seed(master, &[suite.name(), &condition.name(), "net", &rep]);
    let corpus = match condition {
        Condition::Morphology { .. } => derive_seed(master, &[suite.name(), "corpus", &rep]),
        Condition::Sequential(t) | Condition::Static(t) => {
            derive_seed(master, &[suite.name(), "corpus", t.name(), &rep])
        }
    };
    (net, corpus)
}

/// Runs every cell of the suite. A failing cell is recorded and the rest
/// of the suite still runs.
pub fn run_suite(spec: &SuiteSpec) -> Result<RunResult> {
    spec.validate()?;
    let conditions = spec.suite.conditions();
    let needs_reps = conditions.iter().any(|c| matches!(c, Condition::Static(_)));
    let replicate_ids: Vec<usize> = (0..spec.replicates).collect();

    let reps: Vec<Option<Result<(SyllableReps, TrainOutcome)>>> = if needs_reps {
        par::map(spec.execution, &replicate_ids, |&r| {
            let seed = derive_seed(spec.master_seed, &[spec.suite.name(), "syllables", &r.to_string()]);
            Some(
                spec.inventory(InventoryKind::Reduplication)
                    .and_then(|inv| build_static_syllable_representations(&inv, &spec.config, seed)),
            )
        })
    } else {
        replicate_ids.iter().map(|_| None).collect()
    };

    let jobs: Vec<(Condition, usize)> = conditions
        .iter()
        .flat_map(|&c| replicate_ids.iter().map(move |&r| (c, r)))
        .collect();
    let cells = par::map(spec.execution, &jobs, |&(condition, replicate)| {
        let (seed, corpus_seed) = cell_seeds(spec.suite, spec.master_seed, &condition, replicate);
        let out = run_cell(spec, condition, seed, corpus_seed, reps[replicate].as_ref());
        let mut cell = CellResult {
            condition: condition.name(),
            replicate,
            seed,
            corpus_seed,
            history: Vec::new(),
            autosegment: None,
            error: None,
            corpus: None,
            model: None,
        };
        match out {
            Ok((history, autosegment, corpus, model)) => {
                cell.history = history;
                cell.autosegment = autosegment;
                cell.corpus = corpus;
                cell.model = model;
            }
            Err(e) => cell.error = Some(e.to_string()),
        }
        cell
    });

    let syllable_models = reps
        .iter()
        .enumerate()
        .map(|(r, rep)| match rep {
            Some(Ok((_, outcome))) => {
                let seed = derive_seed(spec.master_seed, &[spec.suite.name(), "syllables", &r.to_string()]);
                let tc = spec.config.train_config(spec.config.syllable_epochs, seed);
                Some(ModelFile::recurrent(&outcome.network, provenance(spec, tc, true, None)))
            }
            _ => None,
        })
        .collect();

    Ok(RunResult {
        suite: spec.suite,
        master_seed: spec.master_seed,
        replicates: spec.replicates,
        config: spec.config.clone(),
        features_sha256: feature_table_hash(&spec.features),
        cells,
        syllable_models,
    })
}
