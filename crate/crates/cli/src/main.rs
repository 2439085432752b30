//! Command-line front end: corpus generation, single training runs, hidden
//! state PCA, replicate suites and syllable listing.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use mcnam::analysis::{collect_states, project_trajectories, PcaModel};
use mcnam::harness::{
    morphology_corpus, run_sequential_pair_task, run_suite, suite_syllables, ExperimentConfig,
    Suite, SuiteSpec,
};
use mcnam::io::{
    feature_table_hash, metrics_csv, metrics_rows, trajectory_csv, write_file, CorpusBody,
    CorpusFile, ModelFile, Provenance,
};
use mcnam::morphogen::{build_pair_corpus, RuleKind};
use mcnam::net::{gradient_check, NetworkSpec};
use mcnam::par::{self, Execution};
use mcnam::phonology::{FeatureTable, Inventory, InventoryKind};
use mcnam::trainer::{train, TrainSet};

#[derive(Parser)]
#[command(name = "mcnam", version, about = "Modular recurrent networks for receptive morphology")]
struct Cli {
    /// Phonetic feature table (JSON) replacing the shipped one.
    #[arg(long, global = true, value_name = "PATH")]
    features: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitSet {
    Train,
    Test,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a corpus for one rule and write it as JSON.
    Gen {
        #[arg(long)]
        rule: RuleKind,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override the rule's own inventory (e.g. constraint_cc).
        #[arg(long)]
        inventory: Option<InventoryKind>,
        /// Training pairs for reduplication rules.
        #[arg(long, default_value_t = 200)]
        n_train: usize,
        /// Test pairs for reduplication rules.
        #[arg(long, default_value_t = 50)]
        n_test: usize,
        /// Use only the first N syllables for reduplication rules.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Train one network on a corpus file.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Experiment configuration JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_model: PathBuf,
        #[arg(long)]
        out_metrics: PathBuf,
    },
    /// Project hidden-state trajectories of chosen words onto principal components.
    Pca {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "root")]
        module: String,
        /// Comma-separated roots (all their forms) or surface words.
        #[arg(long)]
        words: String,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        /// Words whose states the components are fitted on.
        #[arg(long, value_enum, default_value = "train")]
        fit_set: FitSet,
    },
    /// Run a replicate suite and write its artifacts.
    Experiment {
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 10)]
        replicates: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run cells one after another.
        #[arg(long)]
        sequential: bool,
    },
    /// List the syllables of the reduplication language.
    Syllables {
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Compare analytic and finite-difference gradients on a small network.
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
    },
}

/// Training configuration file: experiment knobs plus an optional seed.
#[derive(Deserialize, Default)]
struct TrainFile {
    #[serde(flatten)]
    experiment: ExperimentConfig,
    seed: Option<u64>,
}

fn load_features(path: Option<&Path>) -> Result<Arc<FeatureTable>> {
    Ok(Arc::new(match path {
        Some(p) => FeatureTable::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => FeatureTable::shipped(),
    }))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let features = load_features(cli.features.as_deref())?;
    match cli.command {
        Command::Gen {
            rule,
            seed,
            out,
            inventory,
            n_train,
            n_test,
            limit,
        } => {
            let inv = Inventory::build(inventory.unwrap_or(rule.inventory_kind()), features)?;
            let file = match rule.pair_task() {
                Some(task) => {
                    let syllables = suite_syllables(&inv, limit);
                    let pairs = build_pair_corpus(&syllables, task, n_train, n_test, seed)?;
                    CorpusFile::from_pairs(&pairs, inv.kind)
                }
                None => CorpusFile::from_corpus(&morphology_corpus(rule, &inv, seed)?),
            };
            file.save(&out)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Train {
            corpus,
            config,
            seed,
            out_model,
            out_metrics,
        } => {
            let tf: TrainFile = match &config {
                Some(p) => read_json(p)?,
                None => TrainFile::default(),
            };
            let cfg = tf.experiment;
            cfg.validate()?;
            let seed = seed.or(tf.seed).unwrap_or(0);
            let file = CorpusFile::load(&corpus)?;
            let inv = Inventory::build(file.inventory, features.clone())?;
            let (name, outcome, tc) = match &file.body {
                CorpusBody::Morphology { rule, .. } => {
                    let c = file.to_corpus()?;
                    let set = TrainSet::from_corpus(&c, &inv, cfg.end_boundary)?;
                    let spec = cfg.morphology_spec(&inv, rule, c.root_count());
                    let tc = cfg.train_config(cfg.epochs.unwrap_or(rule.default_epochs()), seed);
                    (rule.kind.name().to_string(), train(&set, &spec, &tc)?, tc)
                }
                CorpusBody::Pairs { task, .. } => {
                    let pairs = file.to_pairs()?;
                    let out = run_sequential_pair_task(&inv, &pairs, &cfg, seed)?;
                    let tc = cfg.train_config(cfg.sequence_epochs, seed);
                    (format!("{}_seq", task.name()), out, tc)
                }
            };
            let prov = Provenance {
                seed,
                config: tc,
                end_boundary: cfg.end_boundary,
                corpus_sha256: Some(file.content_hash()),
                features_sha256: feature_table_hash(&features),
                code_version: mcnam::harness::CODE_VERSION.to_string(),
            };
            ModelFile::recurrent(&outcome.network, prov).save(&out_model)?;
            let rows = metrics_rows("train", &name, seed, &outcome.history);
            write_file(&out_metrics, &metrics_csv(&rows)?)?;
            if let Some(last) = outcome.history.last() {
                println!(
                    "epoch {} test root {} inflection {:?}",
                    last.epoch,
                    last.test
                        .root_accuracy
                        .map_or("-".into(), |a| format!("{a:.3}")),
                    last.test.inflection_accuracy
                );
            }
        }
        Command::Pca {
            model,
            corpus,
            module,
            words,
            k,
            out,
            fit_set,
        } => {
            let net = ModelFile::load(&model)?.to_network()?;
            let c = CorpusFile::load(&corpus)?.to_corpus()?;
            let inv = Inventory::build(c.inventory, features)?;
            let fit_words: Vec<Vec<String>> = match fit_set {
                FitSet::Train => c.train.iter().map(|w| w.surface.clone()).collect(),
                FitSet::Test => c.test.iter().map(|w| w.surface.clone()).collect(),
                FitSet::All => c.all_words().map(|w| w.surface.clone()).collect(),
            };
            let pca = PcaModel::fit(&collect_states(&net, &inv, &fit_words, &module)?)?;
            let mut chosen: Vec<Vec<String>> = Vec::new();
            for item in words.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let by_root: Vec<usize> = c
                    .roots
                    .iter()
                    .filter(|r| r.text() == item)
                    .map(|r| r.id)
                    .collect();
                let forms: Vec<Vec<String>> = c
                    .all_words()
                    .filter(|w| by_root.contains(&w.root_id) || w.text() == item)
                    .map(|w| w.surface.clone())
                    .collect();
                if forms.is_empty() {
                    bail!("`{item}` is neither a root nor a word of the corpus");
                }
                chosen.extend(forms);
            }
            let traj = project_trajectories(&net, &inv, &chosen, &pca, k, &module)?;
            write_file(&out, &trajectory_csv(&traj)?)?;
            eprintln!(
                "wrote {} ({} words, PC1-{k} explain {:.1}% of variance)",
                out.display(),
                traj.len(),
                100.0 * pca.variance_share(k)
            );
        }
        Command::Experiment {
            suite,
            replicates,
            seed,
            jobs,
            out_dir,
            config,
            sequential,
        } => {
            let mut spec = SuiteSpec::new(suite);
            spec.replicates = replicates;
            spec.master_seed = seed;
            spec.features = features;
            if let Some(p) = &config {
                spec.config = read_json(p)?;
            }
            spec.execution = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let run = par::with_jobs(jobs, || run_suite(&spec))?;
            run.write_artifacts(&out_dir)?;
            print!("{}", run.summary_csv()?);
            for c in run.failures() {
                eprintln!(
                    "cell {} replicate {} failed: {}",
                    c.condition,
                    c.replicate,
                    c.error.as_deref().unwrap_or_default()
                );
            }
        }
        Command::Syllables { limit } => {
            let inv = Inventory::build(InventoryKind::Reduplication, features)?;
            for s in suite_syllables(&inv, limit) {
                println!("{}", s.text());
            }
        }
        Command::Gradcheck { seed, epsilon } => {
            let spec = NetworkSpec::modular(3, 3, &[("tense", 2)], 4, 4);
            let dev = gradient_check(&spec, seed, epsilon)?;
            println!("max relative deviation {dev:.3e}");
        }
    }
    Ok(())
}
