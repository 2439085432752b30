//! Artificial-language stimuli: roots, morphological rules, corpora and
//! the two-syllable pair sets used by the reduplication experiments.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phonology::{Inventory, InventoryKind, NASAL_MARK, VOWELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootPattern {
    Cvc,
    Cvcvc,
    Ccc,
}

impl RootPattern {
    fn slots(self) -> &'static [bool] {
        // true = consonant
        match self {
            RootPattern::Cvc => &[true, false, true],
            RootPattern::Cvcvc => &[true, false, true, false, true],
            RootPattern::Ccc => &[true, true, true],
        }
    }

    fn space(self, consonants: usize, vowels: usize) -> u128 {
        self.slots()
            .iter()
            .map(|&c| if c { consonants as u128 } else { vowels as u128 })
            .product()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Root {
    pub id: usize,
    pub symbols: Vec<String>,
}

impl Root {
    pub fn text(&self) -> String {
        self.symbols.concat()
    }

    fn consonants(&self) -> Vec<&str> {
        self.symbols
            .iter()
            .map(String::as_str)
            .filter(|s| !is_vowel(s))
            .collect()
    }
}

fn is_vowel(sym: &str) -> bool {
    VOWELS.contains(&sym.trim_end_matches(NASAL_MARK))
}

/// Draws `count` distinct roots per pattern in quota order; ids run from 0.
pub fn generate_roots(
    quota: &[(RootPattern, usize)],
    inventory: &Inventory,
    seed: u64,
) -> Result<Vec<Root>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut roots = Vec::new();
    for &(pattern, count) in quota {
        let space = pattern.space(inventory.consonants.len(), inventory.vowels.len());
        if count as u128 > space {
            return Err(Error::Generation(format!(
                "{count} distinct {pattern:?} roots requested but only {space} exist"
            )));
        }
        let mut made = 0;
        while made < count {
            let symbols: Vec<String> = pattern
                .slots()
                .iter()
                .map(|&cons| {
                    let pool = if cons { &inventory.consonants } else { &inventory.vowels };
                    pool[rng.random_range(0..pool.len())].clone()
                })
                .collect();
            if seen.insert(symbols.clone()) {
                roots.push(Root {
                    id: roots.len(),
                    symbols,
                });
                made += 1;
            }
        }
    }
    Ok(roots)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Suffix,
    Prefix,
    Infix,
    Circumfix,
    Mutation,
    Deletion,
    Template2,
    TwoSuffix,
    TwoPrefix,
    PrefixSuffix,
    Template3Favored,
    Template3Disfavored,
    ReduplicationOnset,
    ReduplicationRime,
}

impl RuleKind {
    pub const ALL: [RuleKind; 14] = [
        RuleKind::Suffix,
        RuleKind::Prefix,
        RuleKind::Infix,
        RuleKind::Circumfix,
        RuleKind::Mutation,
        RuleKind::Deletion,
        RuleKind::Template2,
        RuleKind::TwoSuffix,
        RuleKind::TwoPrefix,
        RuleKind::PrefixSuffix,
        RuleKind::Template3Favored,
        RuleKind::Template3Disfavored,
        RuleKind::ReduplicationOnset,
        RuleKind::ReduplicationRime,
    ];

    /// The ten rules of the general-performance study, in presentation order.
    pub const GENERAL: [RuleKind; 10] = [
        RuleKind::Suffix,
        RuleKind::Prefix,
        RuleKind::Infix,
        RuleKind::Circumfix,
        RuleKind::Mutation,
        RuleKind::Deletion,
        RuleKind::Template2,
        RuleKind::TwoSuffix,
        RuleKind::TwoPrefix,
        RuleKind::PrefixSuffix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Suffix => "suffix",
            RuleKind::Prefix => "prefix",
            RuleKind::Infix => "infix",
            RuleKind::Circumfix => "circumfix",
            RuleKind::Mutation => "mutation",
            RuleKind::Deletion => "deletion",
            RuleKind::Template2 => "template2",
            RuleKind::TwoSuffix => "two_suffix",
            RuleKind::TwoPrefix => "two_prefix",
            RuleKind::PrefixSuffix => "prefix_suffix",
            RuleKind::Template3Favored => "template3_favored",
            RuleKind::Template3Disfavored => "template3_disfavored",
            RuleKind::ReduplicationOnset => "reduplication_onset",
            RuleKind::ReduplicationRime => "reduplication_rime",
        }
    }

    pub fn inventory_kind(self) -> InventoryKind {
        match self {
            RuleKind::Mutation => InventoryKind::Mutation,
            RuleKind::Template3Favored | RuleKind::Template3Disfavored => InventoryKind::TemplateCc,
            RuleKind::ReduplicationOnset | RuleKind::ReduplicationRime => {
                InventoryKind::Reduplication
            }
            _ => InventoryKind::Standard,
        }
    }

    /// Root quota used when this rule is run on its own.
    pub fn default_quota(self) -> Vec<(RootPattern, usize)> {
        match self {
            RuleKind::Template2 => vec![(RootPattern::Cvcvc, 30)],
            RuleKind::Template3Favored | RuleKind::Template3Disfavored => {
                vec![(RootPattern::Ccc, 30)]
            }
            _ => vec![(RootPattern::Cvc, 15), (RootPattern::Cvcvc, 15)],
        }
    }

    pub fn pair_task(self) -> Option<PairTask> {
        match self {
            RuleKind::ReduplicationOnset => Some(PairTask::Onset),
            RuleKind::ReduplicationRime => Some(PairTask::Rime),
            _ => None,
        }
    }

    /// Consonant-and-vowel template of a tense form, for template rules.
    /// Digits name root consonants (1-based); letters are literal vowels.
    pub fn template(self, tense: usize) -> Option<&'static str> {
        let forms: &[&str] = match self {
            RuleKind::Template2 => &["1a2a3", "12aa3"],
            RuleKind::Template3Favored => &["1a2a3a", "a12aa3", "a1a23a"],
            RuleKind::Template3Disfavored => &["1a23aa", "a12a3a", "a1a3a2"],
            _ => return None,
        };
        forms.get(tense).copied()
    }

    /// Surface positions of root consonants 1, 2, 3 in a template form.
    pub fn consonant_positions(self, tense: usize) -> Option<[usize; 3]> {
        let template = self.template(tense)?;
        let mut pos = [0; 3];
        for (i, c) in template.chars().enumerate() {
            if let Some(d) = c.to_digit(10) {
                pos[d as usize - 1] = i;
            }
        }
        Some(pos)
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RuleKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown rule `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub values: Vec<String>,
}

impl Category {
    fn new(name: &str, values: &[&str]) -> Self {
        Category {
            name: name.into(),
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }
}

/// A morphological rule and the inflectional categories it realizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub kind: RuleKind,
    pub categories: Vec<Category>,
}

impl Rule {
    pub fn new(kind: RuleKind) -> Self {
        let tense = Category::new("tense", &["present", "past"]);
        let aspect = Category::new("aspect", &["perfect", "progressive"]);
        let categories = match kind {
            RuleKind::TwoSuffix | RuleKind::TwoPrefix | RuleKind::PrefixSuffix => {
                vec![tense, aspect]
            }
            RuleKind::Template3Favored | RuleKind::Template3Disfavored => {
                vec![Category::new("tense", &["present", "past", "future"])]
            }
            RuleKind::ReduplicationOnset => vec![Category::new("same_onset", &["no", "yes"])],
            RuleKind::ReduplicationRime => vec![Category::new("same_rime", &["no", "yes"])],
            _ => vec![tense],
        };
        Rule { kind, categories }
    }

    pub fn category_sizes(&self) -> Vec<usize> {
        self.categories.iter().map(|c| c.values.len()).collect()
    }

    /// 150 epochs for one-category rules, 100 for tense-aspect rules.
    pub fn default_epochs(&self) -> usize {
        if self.categories.len() == 2 {
            100
        } else {
            150
        }
    }

    /// Every combination of inflection values, first category slowest.
    pub fn inflection_combinations(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for size in self.category_sizes() {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..size).map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }

    pub fn describe(&self, inflections: &[usize]) -> String {
        self.categories
            .iter()
            .zip(inflections)
            .map(|(c, &v)| c.values[v].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn syms(s: &str) -> Vec<String> {
    s.chars().map(String::from).collect()
}

/// Applies `rule` to `root` for the given inflection value per category.
pub fn inflect(root: &Root, rule: &Rule, inflections: &[usize]) -> Result<Vec<String>> {
    let sizes = rule.category_sizes();
    if inflections.len() != sizes.len() || inflections.iter().zip(&sizes).any(|(v, n)| v >= n) {
        return Err(Error::Domain(format!(
            "inflections {inflections:?} do not fit rule {}",
            rule.kind
        )));
    }
    let r = &root.symbols;
    let tense = inflections[0];
    let pick = |a: &str, b: &str| if tense == 0 { syms(a) } else { syms(b) };
    let cat = |parts: &[&[String]]| parts.concat();
    let out = match rule.kind {
        RuleKind::Suffix => cat(&[r, &pick("i", "a")]),
        RuleKind::Prefix => cat(&[&pick("i", "a"), r]),
        RuleKind::Circumfix => {
            let v = pick("i", "a");
            cat(&[&v, r, &v])
        }
        RuleKind::Infix => {
            let at = r
                .iter()
                .position(|s| is_vowel(s))
                .ok_or_else(|| Error::Domain(format!("root {} has no vowel", root.text())))?;
            cat(&[&r[..=at], &pick("k", "n"), &r[at + 1..]])
        }
        RuleKind::Mutation => {
            let mut out = r.clone();
            if tense == 1 {
                let at = r
                    .iter()
                    .rposition(|s| VOWELS.contains(&s.as_str()))
                    .ok_or_else(|| Error::Domain(format!("root {} has no vowel", root.text())))?;
                out[at] = format!("{}{NASAL_MARK}", out[at]);
            }
            out
        }
        RuleKind::Deletion => {
            if r.is_empty() {
                return Err(Error::Domain("cannot delete from an empty root".into()));
            }
            if tense == 0 {
                r.clone()
            } else {
                r[..r.len() - 1].to_vec()
            }
        }
        RuleKind::Template2 | RuleKind::Template3Favored | RuleKind::Template3Disfavored => {
            let consonants = root.consonants();
            if consonants.len() != 3 {
                return Err(Error::Domain(format!(
                    "template rule {} needs three root consonants, {} has {}",
                    rule.kind,
                    root.text(),
                    consonants.len()
                )));
            }
            let template = rule.kind.template(tense).expect("tense checked above");
            template
                .chars()
                .map(|c| match c.to_digit(10) {
                    Some(d) => consonants[d as usize - 1].to_string(),
                    None => c.to_string(),
                })
                .collect()
        }
        RuleKind::TwoSuffix => {
            let aspect = if inflections[1] == 0 { "k" } else { "s" };
            cat(&[r, &pick("a", "i"), &syms(aspect)])
        }
        RuleKind::TwoPrefix => {
            // tense outermost (k/s), then aspect (a/i), as in kavibun / sivibun
            let aspect = if inflections[1] == 0 { "a" } else { "i" };
            cat(&[&pick("k", "s"), &syms(aspect), r])
        }
        RuleKind::PrefixSuffix => {
            let aspect = if inflections[1] == 0 { "e" } else { "u" };
            cat(&[&pick("a", "o"), r, &syms(aspect)])
        }
        RuleKind::ReduplicationOnset | RuleKind::ReduplicationRime => {
            return Err(Error::Domain(format!(
                "{} words are syllable pairs, not inflected roots",
                rule.kind
            )))
        }
    };
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    pub surface: Vec<String>,
    pub root_id: usize,
    pub inflection_ids: Vec<usize>,
}

impl Word {
    pub fn text(&self) -> String {
        self.surface.concat()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub inventory: InventoryKind,
    pub rule: Rule,
    pub roots: Vec<Root>,
    pub train: Vec<Word>,
    pub test: Vec<Word>,
    pub seed: u64,
}

impl Corpus {
    pub fn all_words(&self) -> impl Iterator<Item = &Word> {
        self.train.iter().chain(&self.test)
    }

    pub fn root_count(&self) -> usize {
        self.roots.len()
    }
}

/// Number of items that go to training out of `total` (two thirds, rounded).
pub fn train_share(total: usize) -> usize {
    (2 * total + 1) / 3
}

/// Enumerates every root x inflection word and splits 2/3 train, 1/3 test.
/// Both splits keep enumeration order (root-major).
pub fn build_corpus(rule: &Rule, roots: &[Root], seed: u64) -> Result<Corpus> {
    if rule.kind.pair_task().is_some() {
        return Err(Error::Domain(format!("{} uses pair corpora", rule.kind)));
    }
    let combos = rule.inflection_combinations();
    let mut words = Vec::with_capacity(roots.len() * combos.len());
    for root in roots {
        for infl in &combos {
            words.push(Word {
                surface: inflect(root, rule, infl)?,
                root_id: root.id,
                inflection_ids: infl.clone(),
            });
        }
    }
    let mut order: Vec<usize> = (0..words.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_train = vec![false; words.len()];
    for &i in &order[..train_share(words.len())] {
        in_train[i] = true;
    }
    let (train, test): (Vec<_>, Vec<_>) = words
        .into_iter()
        .zip(in_train)
        .partition(|(_, t)| *t);
    Ok(Corpus {
        inventory: rule.kind.inventory_kind(),
        rule: rule.clone(),
        roots: roots.to_vec(),
        train: train.into_iter().map(|(w, _)| w).collect(),
        test: test.into_iter().map(|(w, _)| w).collect(),
        seed,
    })
}

/// Generates roots with the rule's default quota and builds its corpus.
pub fn generate_corpus(rule: &Rule, inventory: &Inventory, seed: u64) -> Result<Corpus> {
    let roots = generate_roots(&rule.kind.default_quota(), inventory, seed)?;
    build_corpus(rule, &roots, seed.wrapping_add(1))
}

pub const CODAS: [&str; 2] = ["n", "s"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Syllable {
    pub onset: String,
    pub vowel: String,
    pub coda: Option<String>,
}

impl Syllable {
    pub fn symbols(&self) -> Vec<String> {
        let mut out = vec![self.onset.clone(), self.vowel.clone()];
        out.extend(self.coda.clone());
        out
    }

    pub fn text(&self) -> String {
        self.symbols().concat()
    }

    pub fn rime(&self) -> (&str, Option<&str>) {
        (&self.vowel, self.coda.as_deref())
    }
}

/// Onset x vowel x (no coda, n, s), in inventory order.
pub fn enumerate_syllables(inventory: &Inventory) -> Vec<Syllable> {
    let codas = std::iter::once(None).chain(CODAS.iter().map(|c| Some(c.to_string())));
    let codas: Vec<Option<String>> = codas.collect();
    let mut out = Vec::new();
    for onset in &inventory.consonants {
        for vowel in &inventory.vowels {
            for coda in &codas {
                out.push(Syllable {
                    onset: onset.clone(),
                    vowel: vowel.clone(),
                    coda: coda.clone(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairTask {
    Onset,
    Rime,
}

impl PairTask {
    pub fn name(self) -> &'static str {
        match self {
            PairTask::Onset => "onset",
            PairTask::Rime => "rime",
        }
    }

    pub fn label(self, first: &Syllable, second: &Syllable) -> bool {
        match self {
            PairTask::Onset => first.onset == second.onset,
            PairTask::Rime => first.rime() == second.rime(),
        }
    }
}

impl FromStr for PairTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "onset" => Ok(PairTask::Onset),
            "rime" => Ok(PairTask::Rime),
            _ => Err(Error::Config(format!("unknown reduplication task `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyllablePair {
    pub first: Syllable,
    pub second: Syllable,
    pub label: bool,
}

impl SyllablePair {
    /// The two-syllable word heard by the sequential network.
    pub fn surface(&self) -> Vec<String> {
        let mut s = self.first.symbols();
        s.extend(self.second.symbols());
        s
    }
}

/// Balanced, disjoint train/test sets of labelled syllable pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorpus {
    pub task: PairTask,
    pub train: Vec<SyllablePair>,
    pub test: Vec<SyllablePair>,
    pub seed: u64,
}

/// Samples `n_train + n_test` distinct ordered pairs over `syllables`, half
/// of each split positive. Train and test never share a pair.
pub fn build_pair_corpus(
    syllables: &[Syllable],
    task: PairTask,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<PairCorpus> {
    if !n_train.is_multiple_of(2) || !n_test.is_multiple_of(2) {
        return Err(Error::Contract(format!(
            "split sizes must be even, got {n_train}/{n_test}"
        )));
    }
    if syllables.is_empty() {
        return Err(Error::Generation("no syllables to pair".into()));
    }
    let half = (n_train + n_test) / 2;
    let n = syllables.len();
    let mut positives_avail = 0usize;
    for a in syllables {
        positives_avail += syllables.iter().filter(|b| task.label(a, b)).count();
    }
    if positives_avail < half || n * n - positives_avail < half {
        return Err(Error::Generation(format!(
            "cannot draw {half} distinct positive and negative {} pairs from {n} syllables",
            task.name()
        )));
    }
    let partners: Vec<Vec<usize>> = syllables
        .iter()
        .map(|a| (0..n).filter(|&j| task.label(a, &syllables[j])).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = BTreeSet::new();
    let mut draw = |rng: &mut ChaCha8Rng, positive: bool| -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(half);
        while out.len() < half {
            let i = rng.random_range(0..n);
            let j = if positive {
                partners[i][rng.random_range(0..partners[i].len())]
            } else {
                rng.random_range(0..n)
            };
            if task.label(&syllables[i], &syllables[j]) == positive && taken.insert((i, j)) {
                out.push((i, j));
            }
        }
        out
    };
    let pos = draw(&mut rng, true);
    let neg = draw(&mut rng, false);
    let make = |&(i, j): &(usize, usize), label| SyllablePair {
        first: syllables[i].clone(),
        second: syllables[j].clone(),
        label,
    };
    let (tp, tn) = (n_train / 2, n_train / 2);
    let mut train: Vec<SyllablePair> = pos[..tp]
        .iter()
        .map(|p| make(p, true))
        .chain(neg[..tn].iter().map(|p| make(p, false)))
        .collect();
    let mut test: Vec<SyllablePair> = pos[tp..]
        .iter()
        .map(|p| make(p, true))
        .chain(neg[tn..].iter().map(|p| make(p, false)))
        .collect();
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok(PairCorpus {
        task,
        train,
        test,
        seed,
    })
}

/// Two-syllable words for the sequential network. Uses the same sampler as
/// [`build_syllable_pair_corpus`], so equal seeds give the same pairs.
pub fn build_reduplication_corpus(
    inventory: &Inventory,
    task: PairTask,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<PairCorpus> {
    build_pair_corpus(&enumerate_syllables(inventory), task, n_train, n_test, seed)
}

pub fn build_syllable_pair_corpus(
    inventory: &Inventory,
    task: PairTask,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<PairCorpus> {
    build_pair_corpus(&enumerate_syllables(inventory), task, n_train, n_test, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phonology::build_inventory;

    fn root(id: usize, s: &str) -> Root {
        Root {
            id,
            symbols: syms(s),
        }
    }

    fn form(r: &str, kind: RuleKind, infl: &[usize]) -> String {
        inflect(&root(0, r), &Rule::new(kind), infl).unwrap().concat()
    }

    #[test]
    fn printed_examples() {
        use RuleKind::*;
        let cases: &[(RuleKind, &[usize], &str)] = &[
            (Suffix, &[0], "vibuni"),
            (Suffix, &[1], "vibuna"),
            (Prefix, &[0], "ivibun"),
            (Prefix, &[1], "avibun"),
            (Infix, &[0], "vikbun"),
            (Infix, &[1], "vinbun"),
            (Circumfix, &[0], "ivibuni"),
            (Circumfix, &[1], "avibuna"),
            (Mutation, &[0], "vibun"),
            (Mutation, &[1], "vibu~n"),
            (Deletion, &[0], "vibun"),
            (Deletion, &[1], "vibu"),
            (Template2, &[0], "vaban"),
            (Template2, &[1], "vbaan"),
            (TwoSuffix, &[0, 0], "vibunak"),
            (TwoSuffix, &[0, 1], "vibunas"),
            (TwoSuffix, &[1, 0], "vibunik"),
            (TwoSuffix, &[1, 1], "vibunis"),
            (TwoPrefix, &[0, 0], "kavibun"),
            (TwoPrefix, &[0, 1], "kivibun"),
            (TwoPrefix, &[1, 0], "savibun"),
            (TwoPrefix, &[1, 1], "sivibun"),
            (PrefixSuffix, &[0, 0], "avibune"),
            (PrefixSuffix, &[0, 1], "avibunu"),
            (PrefixSuffix, &[1, 0], "ovibune"),
            (PrefixSuffix, &[1, 1], "ovibunu"),
        ];
        for (kind, infl, want) in cases {
            assert_eq!(&form("vibun", *kind, infl), want, "{kind} {infl:?}");
        }
    }

    #[test]
    fn template3_examples() {
        let fav = RuleKind::Template3Favored;
        assert_eq!(form("pmn", fav, &[0]), "pamana");
        assert_eq!(form("pmn", fav, &[1]), "apmaan");
        assert_eq!(form("pmn", fav, &[2]), "apamna");
        assert_eq!(form("pmm", fav, &[1]), "apmaam");
        assert_eq!(form("pds", fav, &[0]), "padasa");
        assert_eq!(form("pds", fav, &[1]), "apdaas");
        assert_eq!(form("pds", fav, &[2]), "apadsa");
        let dis = RuleKind::Template3Disfavored;
        assert_eq!(form("pds", dis, &[0]), "padsaa");
        assert_eq!(form("pds", dis, &[1]), "apdasa");
        assert_eq!(form("pds", dis, &[2]), "apasad");
    }

    #[test]
    fn cvc_design_choices() {
        assert_eq!(form("tam", RuleKind::Infix, &[0]), "takm");
        assert_eq!(form("tam", RuleKind::Infix, &[1]), "tanm");
        assert_eq!(form("tam", RuleKind::Deletion, &[1]), "ta");
        assert_eq!(form("tam", RuleKind::Mutation, &[1]), "ta~m");
    }

    #[test]
    fn incompatible_roots_are_domain_errors() {
        let r = root(0, "tam");
        assert!(matches!(
            inflect(&r, &Rule::new(RuleKind::Template2), &[0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            inflect(&r, &Rule::new(RuleKind::Suffix), &[2]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            inflect(&r, &Rule::new(RuleKind::TwoSuffix), &[0]),
            Err(Error::Domain(_))
        ));
        assert!(inflect(&root(0, "pds"), &Rule::new(RuleKind::Infix), &[0]).is_err());
    }

    #[test]
    fn consonant_positions_follow_templates() {
        let fav = RuleKind::Template3Favored;
        assert_eq!(fav.consonant_positions(0), Some([0, 2, 4]));
        assert_eq!(fav.consonant_positions(1), Some([1, 2, 5]));
        assert_eq!(fav.consonant_positions(2), Some([1, 3, 4]));
        assert_eq!(RuleKind::Template3Disfavored.consonant_positions(2), Some([1, 5, 3]));
        assert_eq!(RuleKind::Suffix.consonant_positions(0), None);
    }

    #[test]
    fn root_generation() {
        let std = build_inventory(InventoryKind::Standard).unwrap();
        let quota = [(RootPattern::Cvc, 15), (RootPattern::Cvcvc, 15)];
        let roots = generate_roots(&quota, &std, 3).unwrap();
        assert_eq!(roots.len(), 30);
        assert_eq!(roots.iter().filter(|r| r.symbols.len() == 3).count(), 15);
        assert_eq!(roots.iter().filter(|r| r.symbols.len() == 5).count(), 15);
        let distinct: BTreeSet<_> = roots.iter().map(|r| r.symbols.clone()).collect();
        assert_eq!(distinct.len(), 30);
        assert!(roots.iter().enumerate().all(|(i, r)| r.id == i));
        assert_eq!(roots, generate_roots(&quota, &std, 3).unwrap());
        assert_ne!(roots, generate_roots(&quota, &std, 4).unwrap());

        let cc = build_inventory(InventoryKind::TemplateCc).unwrap();
        let ccc = generate_roots(&[(RootPattern::Ccc, 30)], &cc, 1).unwrap();
        assert_eq!(ccc.len(), 30);
        for r in &ccc {
            assert_eq!(r.symbols.len(), 3);
            assert!(r.symbols.iter().all(|s| cc.is_consonant(s)));
        }
    }

    #[test]
    fn infeasible_quota() {
        let cc = build_inventory(InventoryKind::ConstraintCc).unwrap();
        assert!(matches!(
            generate_roots(&[(RootPattern::Ccc, 513)], &cc, 0),
            Err(Error::Generation(_))
        ));
        assert!(generate_roots(&[(RootPattern::Ccc, 512)], &cc, 0).is_ok());
    }

    #[test]
    fn corpus_sizes() {
        let std = build_inventory(InventoryKind::Standard).unwrap();
        let c = generate_corpus(&Rule::new(RuleKind::Suffix), &std, 9).unwrap();
        assert_eq!((c.train.len(), c.test.len()), (40, 20));
        let c = generate_corpus(&Rule::new(RuleKind::TwoSuffix), &std, 9).unwrap();
        assert_eq!((c.train.len(), c.test.len()), (80, 40));
        let cc = build_inventory(InventoryKind::ConstraintCc).unwrap();
        let c = generate_corpus(&Rule::new(RuleKind::Template3Disfavored), &cc, 9).unwrap();
        assert_eq!((c.train.len(), c.test.len()), (60, 30));
    }

    #[test]
    fn corpus_partition_covers_cross_product() {
        let std = build_inventory(InventoryKind::Standard).unwrap();
        let rule = Rule::new(RuleKind::PrefixSuffix);
        let c = generate_corpus(&rule, &std, 21).unwrap();
        let key = |w: &Word| (w.root_id, w.inflection_ids.clone());
        let train: BTreeSet<_> = c.train.iter().map(key).collect();
        let test: BTreeSet<_> = c.test.iter().map(key).collect();
        assert!(train.is_disjoint(&test));
        assert_eq!(train.len() + test.len(), 120);
        for w in c.all_words() {
            assert_eq!(
                w.surface,
                inflect(&c.roots[w.root_id], &rule, &w.inflection_ids).unwrap()
            );
        }
        assert_eq!(c, generate_corpus(&rule, &std, 21).unwrap());
    }

    #[test]
    fn syllable_enumeration() {
        let red = build_inventory(InventoryKind::Reduplication).unwrap();
        let syl = enumerate_syllables(&red);
        assert_eq!(syl.len(), 225);
        let set: BTreeSet<_> = syl.iter().collect();
        assert_eq!(set.len(), 225);
        for s in &syl {
            assert_eq!(red.encode_word(&s.symbols()).unwrap().len(), s.symbols().len() + 1);
        }
    }

    fn syl(onset: &str, vowel: &str, coda: Option<&str>) -> Syllable {
        Syllable {
            onset: onset.into(),
            vowel: vowel.into(),
            coda: coda.map(String::from),
        }
    }

    #[test]
    fn pair_labels() {
        let tam = syl("t", "a", Some("m"));
        let kam = syl("k", "a", Some("m"));
        assert!(PairTask::Rime.label(&tam, &kam));
        assert!(!PairTask::Onset.label(&tam, &kam));
        let ta = syl("t", "a", None);
        assert!(PairTask::Onset.label(&tam, &ta));
        assert!(!PairTask::Rime.label(&tam, &ta));
    }

    #[test]
    fn pair_corpora_are_balanced_and_disjoint() {
        let red = build_inventory(InventoryKind::Reduplication).unwrap();
        for task in [PairTask::Onset, PairTask::Rime] {
            let c = build_reduplication_corpus(&red, task, 200, 50, 5).unwrap();
            assert_eq!((c.train.len(), c.test.len()), (200, 50));
            assert_eq!(c.train.iter().filter(|p| p.label).count(), 100);
            assert_eq!(c.test.iter().filter(|p| p.label).count(), 25);
            for p in c.train.iter().chain(&c.test) {
                assert_eq!(p.label, task.label(&p.first, &p.second));
            }
            let key = |p: &SyllablePair| (p.first.clone(), p.second.clone());
            let tr: BTreeSet<_> = c.train.iter().map(key).collect();
            let te: BTreeSet<_> = c.test.iter().map(key).collect();
            assert_eq!(tr.len(), 200);
            assert!(tr.is_disjoint(&te));
            assert_eq!(c, build_syllable_pair_corpus(&red, task, 200, 50, 5).unwrap());
        }
        assert!(matches!(
            build_reduplication_corpus(&red, PairTask::Onset, 201, 50, 5),
            Err(Error::Contract(_))
        ));
    }
}
