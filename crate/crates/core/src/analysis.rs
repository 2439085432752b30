//! Principal components of hidden-layer trajectories.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphogen::{inflect, Corpus, Root, Rule};
use crate::net::Network;
use crate::phonology::{Inventory, BOUNDARY};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateTag {
    pub word_index: usize,
    pub word: String,
    /// 0 is the leading boundary.
    pub step: usize,
    pub phone: String,
}

/// Hidden vectors of one module, one row per phone presentation.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    pub width: usize,
    pub rows: Vec<Vec<f64>>,
    pub tags: Vec<StateTag>,
}

fn module_of(net: &Network, module: &str) -> Result<usize> {
    net.spec()
        .module_index(module)
        .ok_or_else(|| Error::Contract(format!("network has no module `{module}`")))
}

/// Runs each word from a zero context and records `module`'s activation
/// after every phone, boundary included.
pub fn collect_states<S: AsRef<str>>(
    net: &Network,
    inventory: &Inventory,
    words: &[Vec<S>],
    module: &str,
) -> Result<StateMatrix> {
    let m = module_of(net, module)?;
    let width = net.spec().modules[m].width;
    let mut rows = Vec::new();
    let mut tags = Vec::new();
    for (wi, word) in words.iter().enumerate() {
        let phones: Vec<Vec<f64>> = inventory
            .encode_word(word)?
            .into_iter()
            .map(|p| p.0)
            .collect();
        let text: String = word.iter().map(|s| s.as_ref()).collect();
        for (step, st) in net.infer_all(&phones)?.into_iter().enumerate() {
            let phone = if step == 0 {
                BOUNDARY.to_string()
            } else {
                word[step - 1].as_ref().to_string()
            };
            tags.push(StateTag {
                word_index: wi,
                word: text.clone(),
                step,
                phone,
            });
            rows.push(st.hidden[m].clone());
        }
    }
    Ok(StateMatrix { width, rows, tags })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Unit-norm, mutually orthogonal, by decreasing variance.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

/// Eigendecomposition of the sample covariance (n - 1 denominator) of
/// mean-centred rows. Each component is signed so that its largest-magnitude
/// coefficient is positive.
pub fn fit_pca(rows: &[Vec<f64>]) -> Result<PcaModel> {
    if rows.len() < 2 {
        return Err(Error::Contract("PCA needs at least two rows".into()));
    }
    let width = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::Shape {
            expected: width,
            actual: bad.len(),
        });
    }
    let n = rows.len() as f64;
    let mut mean = vec![0.0; width];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let centred = DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j] - mean[j]);
    let cov = (centred.transpose() * &centred) / (n - 1.0);
    let total: f64 = cov.diagonal().iter().sum();
    if total.is_nan() || total <= 1e-14 {
        return Err(Error::Degenerate("data has no variance".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..width).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = Vec::with_capacity(width);
    let mut explained_variance = Vec::with_capacity(width);
    for &k in &order {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        let lead = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(eig.eigenvalues[k].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

impl PcaModel {
    pub fn fit(states: &StateMatrix) -> Result<Self> {
        fit_pca(&states.rows)
    }

    pub fn total_variance(&self) -> f64 {
        self.explained_variance.iter().sum()
    }

    pub fn variance_share(&self, k: usize) -> f64 {
        self.explained_variance[k] / self.total_variance()
    }

    /// Coordinates of `x` on the first `k` components.
    pub fn project(&self, x: &[f64], k: usize) -> Vec<f64> {
        self.components[..k]
            .iter()
            .map(|c| {
                c.iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(ci, (xi, mi))| ci * (xi - mi))
                    .sum()
            })
            .collect()
    }

    /// Inverse of [`PcaModel::project`] over the first `coords.len()` components.
    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, &a) in self.components.iter().zip(coords) {
            for (o, ci) in out.iter_mut().zip(c) {
                *o += a * ci;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub phone: String,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub word: String,
    pub points: Vec<TrajectoryPoint>,
}

/// Path of each word through the space of the first `k` components.
pub fn project_trajectories<S: AsRef<str>>(
    net: &Network,
    inventory: &Inventory,
    words: &[Vec<S>],
    pca: &PcaModel,
    k: usize,
    module: &str,
) -> Result<Vec<Trajectory>> {
    if k == 0 || k > pca.components.len() {
        return Err(Error::Contract(format!(
            "k = {k} but the model has {} components",
            pca.components.len()
        )));
    }
    let states = collect_states(net, inventory, words, module)?;
    let mut out: Vec<Trajectory> = Vec::with_capacity(words.len());
    for (row, tag) in states.rows.iter().zip(states.tags) {
        if out.len() <= tag.word_index {
            out.push(Trajectory {
                word: tag.word.clone(),
                points: Vec::new(),
            });
        }
        out[tag.word_index].points.push(TrajectoryPoint {
            step: tag.step,
            phone: tag.phone,
            coords: pca.project(row, k),
        });
    }
    Ok(out)
}

/// Clustering of root-consonant states for one root, in PC1-2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutosegmentScore {
    pub root_id: usize,
    /// Mean distance between states at the same root consonant.
    pub within: f64,
    /// Mean distance between states at different root consonants.
    pub between: f64,
}

impl AutosegmentScore {
    pub fn clusters(&self) -> bool {
        self.within < self.between
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean distances between same-label and different-label points.
pub fn within_between(points: &[(usize, Vec<f64>)]) -> (f64, f64) {
    let (mut w, mut nw, mut b, mut nb) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = dist(&points[i].1, &points[j].1);
            if points[i].0 == points[j].0 {
                w += d;
                nw += 1;
            } else {
                b += d;
                nb += 1;
            }
        }
    }
    (w / nw.max(1) as f64, b / nb.max(1) as f64)
}

/// For every form of `root` under a template rule, projects the `module`
/// state reached right after each root consonant onto PC1-2 and compares
/// same-consonant against different-consonant spread.
pub fn autosegment_score(
    net: &Network,
    inventory: &Inventory,
    rule: &Rule,
    root: &Root,
    pca: &PcaModel,
    module: &str,
) -> Result<AutosegmentScore> {
    let m = module_of(net, module)?;
    let k = 2.min(pca.components.len());
    let mut points = Vec::new();
    for tense in 0..rule.categories[0].values.len() {
        let positions = rule.kind.consonant_positions(tense).ok_or_else(|| {
            Error::Domain(format!("{} is not a template rule", rule.kind))
        })?;
        let surface = inflect(root, rule, &[tense])?;
        let phones: Vec<Vec<f64>> = inventory
            .encode_word(&surface)?
            .into_iter()
            .map(|p| p.0)
            .collect();
        let states = net.infer_all(&phones)?;
        for (c, &pos) in positions.iter().enumerate() {
            points.push((c, pca.project(&states[pos + 1].hidden[m], k)));
        }
    }
    let (within, between) = within_between(&points);
    Ok(AutosegmentScore {
        root_id: root.id,
        within,
        between,
    })
}

/// Ids of roots that have at least one word in the test split.
pub fn test_roots(corpus: &Corpus) -> Vec<usize> {
    let mut ids: Vec<usize> = corpus.test.iter().map(|w| w.root_id).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}
