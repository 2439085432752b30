//! Versioned JSON files for corpora and trained models, plus the metrics
//! and trajectory CSV tables.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::Trajectory;
use crate::error::{io_err, Error, Result};
use crate::feedforward::{FeedForward, FeedForwardSpec};
use crate::morphogen::{Corpus, PairCorpus, PairTask, Root, Rule, Syllable, SyllablePair, Word};
use crate::net::{Network, NetworkSpec, TrainConfig};
use crate::phonology::{FeatureTable, InventoryKind};
use crate::trainer::{EpochRecord, Split};

pub const CORPUS_FORMAT_VERSION: u32 = 1;
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a feature table's canonical JSON form.
pub fn feature_table_hash(table: &FeatureTable) -> String {
    sha256_hex(serde_json::to_string(table).expect("feature table serializes").as_bytes())
}

fn check_version(what: &'static str, found: u32, expected: u32) -> Result<()> {
    if found != expected {
        return Err(Error::Version {
            what,
            found,
            expected,
        });
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, text).map_err(io_err(path))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordRecord {
    pub surface: String,
    pub segments: Vec<String>,
    pub root_id: usize,
    pub inflection_ids: Vec<usize>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub surface: String,
    pub first: Syllable,
    pub second: Syllable,
    pub label: bool,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorpusBody {
    Morphology {
        rule: Rule,
        roots: Vec<Root>,
        words: Vec<WordRecord>,
    },
    Pairs {
        task: PairTask,
        pairs: Vec<PairRecord>,
    },
}

/// On-disk corpus: train and test items in one list, each tagged with its
/// split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFile {
    pub version: u32,
    pub inventory: InventoryKind,
    pub seed: u64,
    #[serde(flatten)]
    pub body: CorpusBody,
}

impl CorpusFile {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let record = |w: &Word, split| WordRecord {
            surface: w.text(),
            segments: w.surface.clone(),
            root_id: w.root_id,
            inflection_ids: w.inflection_ids.clone(),
            split,
        };
        let words = corpus
            .train
            .iter()
            .map(|w| record(w, Split::Train))
            .chain(corpus.test.iter().map(|w| record(w, Split::Test)))
            .collect();
        CorpusFile {
            version: CORPUS_FORMAT_VERSION,
            inventory: corpus.inventory,
            seed: corpus.seed,
            body: CorpusBody::Morphology {
                rule: corpus.rule.clone(),
                roots: corpus.roots.clone(),
                words,
            },
        }
    }

    pub fn from_pairs(corpus: &PairCorpus, inventory: InventoryKind) -> Self {
        let record = |p: &SyllablePair, split| PairRecord {
            surface: p.surface().concat(),
            first: p.first.clone(),
            second: p.second.clone(),
            label: p.label,
            split,
        };
        let pairs = corpus
            .train
            .iter()
            .map(|p| record(p, Split::Train))
            .chain(corpus.test.iter().map(|p| record(p, Split::Test)))
            .collect();
        CorpusFile {
            version: CORPUS_FORMAT_VERSION,
            inventory,
            seed: corpus.seed,
            body: CorpusBody::Pairs {
                task: corpus.task,
                pairs,
            },
        }
    }

    pub fn to_corpus(&self) -> Result<Corpus> {
        let CorpusBody::Morphology { rule, roots, words } = &self.body else {
            return Err(Error::Contract("corpus file holds syllable pairs, not words".into()));
        };
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for w in words {
            let word = Word {
                surface: w.segments.clone(),
                root_id: w.root_id,
                inflection_ids: w.inflection_ids.clone(),
            };
            match w.split {
                Split::Train => train.push(word),
                Split::Test => test.push(word),
            }
        }
        Ok(Corpus {
            inventory: self.inventory,
            rule: rule.clone(),
            roots: roots.clone(),
            train,
            test,
            seed: self.seed,
        })
    }

    pub fn to_pairs(&self) -> Result<PairCorpus> {
        let CorpusBody::Pairs { task, pairs } = &self.body else {
            return Err(Error::Contract("corpus file holds words, not syllable pairs".into()));
        };
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for p in pairs {
            let pair = SyllablePair {
                first: p.first.clone(),
                second: p.second.clone(),
                label: p.label,
            };
            match p.split {
                Split::Train => train.push(pair),
                Split::Test => test.push(pair),
            }
        }
        Ok(PairCorpus {
            task: *task,
            train,
            test,
            seed: self.seed,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("corpus serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CorpusFile = serde_json::from_str(text)?;
        check_version("corpus file", file.version, CORPUS_FORMAT_VERSION)?;
        Ok(file)
    }

    /// Digest of the serialized corpus, recorded in model provenance.
    pub fn content_hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read_text(path.as_ref())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelBody {
    Recurrent {
        spec: NetworkSpec,
        params: Vec<f64>,
    },
    Feedforward {
        spec: FeedForwardSpec,
        params: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config: TrainConfig,
    /// Whether words were closed by a boundary phone during training.
    pub end_boundary: bool,
    pub corpus_sha256: Option<String>,
    pub features_sha256: String,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    #[serde(flatten)]
    pub body: ModelBody,
    pub provenance: Provenance,
}

impl ModelFile {
    pub fn recurrent(net: &Network, provenance: Provenance) -> Self {
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            body: ModelBody::Recurrent {
                spec: net.spec().clone(),
                params: net.params().to_vec(),
            },
            provenance,
        }
    }

    pub fn feedforward(net: &FeedForward, provenance: Provenance) -> Self {
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            body: ModelBody::Feedforward {
                spec: net.spec,
                params: net.params.clone(),
            },
            provenance,
        }
    }

    pub fn to_network(&self) -> Result<Network> {
        match &self.body {
            ModelBody::Recurrent { spec, params } => Network::from_params(spec.clone(), params.clone()),
            ModelBody::Feedforward { .. } => {
                Err(Error::Contract("model file holds a feedforward network".into()))
            }
        }
    }

    pub fn to_feedforward(&self) -> Result<FeedForward> {
        match &self.body {
            ModelBody::Feedforward { spec, params } => FeedForward::from_params(*spec, params.clone()),
            ModelBody::Recurrent { .. } => {
                Err(Error::Contract("model file holds a recurrent network".into()))
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        check_version("model file", file.version, MODEL_FORMAT_VERSION)?;
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&read_text(path.as_ref())?)
    }
}

pub const METRICS_HEADER: [&str; 9] = [
    "suite", "rule", "seed", "epoch", "split", "root_acc", "tense_acc", "aspect_acc", "mean_err",
];

/// One metrics line. Single-output tasks report their accuracy as `tense_acc`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub suite: String,
    pub rule: String,
    pub seed: u64,
    pub epoch: usize,
    pub split: Split,
    pub root_acc: Option<f64>,
    pub tense_acc: Option<f64>,
    pub aspect_acc: Option<f64>,
    pub mean_err: f64,
}

/// Two rows (train, test) per epoch.
pub fn metrics_rows(suite: &str, rule: &str, seed: u64, history: &[EpochRecord]) -> Vec<MetricsRow> {
    let mut rows = Vec::with_capacity(2 * history.len());
    for rec in history {
        for r in [&rec.train, &rec.test] {
            rows.push(MetricsRow {
                suite: suite.to_string(),
                rule: rule.to_string(),
                seed,
                epoch: rec.epoch,
                split: r.split,
                root_acc: r.root_accuracy,
                tense_acc: r.inflection_accuracy.first().copied(),
                aspect_acc: r.inflection_accuracy.get(1).copied(),
                mean_err: r.mean_error,
            });
        }
    }
    rows
}

/// Fixed six-decimal rendering keeps tables byte-stable across runs.
fn fmt_num(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub fn metrics_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.suite.clone(),
            r.rule.clone(),
            r.seed.to_string(),
            r.epoch.to_string(),
            r.split.name().to_string(),
            fmt_opt(r.root_acc),
            fmt_opt(r.tense_acc),
            fmt_opt(r.aspect_acc),
            fmt_num(r.mean_err),
        ])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Contract(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Columns `word, step, phone, pc1..pck`.
pub fn trajectory_csv(trajectories: &[Trajectory]) -> Result<String> {
    let k = trajectories
        .iter()
        .flat_map(|t| t.points.first())
        .map(|p| p.coords.len())
        .next()
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["word".to_string(), "step".into(), "phone".into()];
    header.extend((1..=k).map(|i| format!("pc{i}")));
    w.write_record(&header)?;
    for t in trajectories {
        for p in &t.points {
            let mut rec = vec![t.word.clone(), p.step.to_string(), p.phone.clone()];
            rec.extend(p.coords.iter().map(|&c| fmt_num(c)));
            w.write_record(&rec)?;
        }
    }
    finish(w)
}

pub fn write_file(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_text(path.as_ref(), text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::TrajectoryPoint;
    use crate::morphogen::{build_reduplication_corpus, generate_corpus, RuleKind};
    use crate::phonology::build_inventory;
    use crate::trainer::EvalResult;

    fn corpus() -> Corpus {
        let inv = build_inventory(InventoryKind::Mutation).unwrap();
        generate_corpus(&Rule::new(RuleKind::Mutation), &inv, 3).unwrap()
    }

    #[test]
    fn corpus_round_trips() {
        let c = corpus();
        let file = CorpusFile::from_corpus(&c);
        let back = CorpusFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_corpus().unwrap(), c);
        assert!(back.to_pairs().is_err());
        assert_eq!(file.content_hash(), back.content_hash());
        assert_eq!(file.content_hash().len(), 64);
    }

    #[test]
    fn pair_corpus_round_trips() {
        let inv = build_inventory(InventoryKind::Reduplication).unwrap();
        let p = build_reduplication_corpus(&inv, PairTask::Rime, 20, 10, 8).unwrap();
        let file = CorpusFile::from_pairs(&p, inv.kind);
        let text = file.to_json();
        assert!(text.contains("\"kind\": \"pairs\""));
        let back = CorpusFile::from_json(&text).unwrap();
        assert_eq!(back.to_pairs().unwrap(), p);
        assert!(back.to_corpus().is_err());
    }

    #[test]
    fn unknown_versions_are_refused() {
        let mut file = CorpusFile::from_corpus(&corpus());
        file.version = 99;
        let err = CorpusFile::from_json(&file.to_json()).unwrap_err();
        assert!(matches!(err, Error::Version { found: 99, .. }));
    }

    #[test]
    fn model_round_trips_exactly() {
        let spec = NetworkSpec::modular(10, 4, &[("tense", 2)], 3, 3);
        let net = Network::new(spec, 11).unwrap();
        let prov = Provenance {
            seed: 11,
            config: TrainConfig::default(),
            end_boundary: true,
            corpus_sha256: None,
            features_sha256: feature_table_hash(&FeatureTable::shipped()),
            code_version: "test".into(),
        };
        let file = ModelFile::recurrent(&net, prov);
        let back = ModelFile::from_json(&file.to_json()).unwrap();
        assert_eq!(back.to_network().unwrap().params(), net.params());
        assert!(back.to_feedforward().is_err());
    }

    #[test]
    fn metrics_table_layout() {
        let eval = |split| EvalResult {
            split,
            root_accuracy: Some(0.5),
            inflection_accuracy: vec![1.0 / 3.0],
            mean_error: 2.0,
        };
        let hist = vec![EpochRecord {
            epoch: 1,
            train_error: 0.0,
            train: eval(Split::Train),
            test: eval(Split::Test),
        }];
        let text = metrics_csv(&metrics_rows("figure2", "suffix", 7, &hist)).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "suite,rule,seed,epoch,split,root_acc,tense_acc,aspect_acc,mean_err");
        assert_eq!(lines[1], "figure2,suffix,7,1,train,0.500000,0.333333,,2.000000");
        assert_eq!(lines[2], "figure2,suffix,7,1,test,0.500000,0.333333,,2.000000");
    }

    #[test]
    fn trajectory_table_layout() {
        let t = Trajectory {
            word: "padasa".into(),
            points: vec![TrajectoryPoint {
                step: 0,
                phone: "#".into(),
                coords: vec![0.25, -1.0],
            }],
        };
        let text = trajectory_csv(&[t]).unwrap();
        assert_eq!(text, "word,step,phone,pc1,pc2\npadasa,0,#,0.250000,-1.000000\n");
    }
}
