//! Plan corpora: the action vocabulary, ground-truth plan sequences, corpus
//! I/O (line-delimited JSON), transition heatmaps, and a synthetic generator
//! that stands in for video-derived start/goal observations.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense integer index of an action step. Ids are contiguous `0..|A|-1`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ActionId(pub u32);

impl ActionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bijective mapping between action-step names and their dense ids,
/// in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct ActionVocabulary {
    names: Vec<String>,
    index: HashMap<String, ActionId>,
}

impl ActionVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary from an ordered list of unique names.
    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for name in names {
            let name = name.into();
            if vocab.index.contains_key(&name) {
                return Err(Error::InvalidConfig(format!("duplicate action `{name}`")));
            }
            vocab.intern(&name);
        }
        Ok(vocab)
    }

    /// Returns the id for `name`, assigning the next free id on first sight.
    pub fn intern(&mut self, name: &str) -> ActionId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = ActionId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<ActionId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ActionId) -> Option<&str> {
        self.names.get(id.index()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// JSON array of names, index position = id.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.names)?)
    }
}

/// One ground-truth plan: an ordered action sequence of length >= 2.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlanSequence {
    pub steps: Vec<ActionId>,
    pub task_tag: Option<String>,
}

impl PlanSequence {
    pub fn new(steps: Vec<ActionId>, task_tag: Option<String>) -> Result<Self> {
        if steps.len() < 2 {
            return Err(Error::PlanTooShort { got: steps.len() });
        }
        Ok(Self { steps, task_tag })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn first(&self) -> ActionId {
        self.steps[0]
    }

    pub fn last(&self) -> ActionId {
        *self.steps.last().expect("plan has at least two steps")
    }
}

/// A set of plans over a shared vocabulary.
#[derive(Debug, Clone)]
pub struct PlanCorpus {
    pub plans: Vec<PlanSequence>,
    pub vocabulary: ActionVocabulary,
}

impl PlanCorpus {
    pub fn new(plans: Vec<PlanSequence>, vocabulary: ActionVocabulary) -> Result<Self> {
        if plans.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let n = vocabulary.len() as u32;
        for plan in &plans {
            if let Some(&bad) = plan.steps.iter().find(|id| id.0 >= n) {
                return Err(Error::UnknownNode(bad));
            }
        }
        Ok(Self { plans, vocabulary })
    }

    pub fn num_actions(&self) -> usize {
        self.vocabulary.len()
    }
}

/// Supported corpus file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorpusFormat {
    /// One JSON record per line: `{"task": string?, "steps": [string, ...]}`.
    #[default]
    Jsonl,
}

#[derive(Serialize, Deserialize)]
struct PlanRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    task: Option<String>,
    steps: Vec<String>,
}

/// Loads a corpus, building the vocabulary from distinct step names in
/// first-seen order. Blank lines are skipped; any malformed record is
/// reported with its 1-based line number.
pub fn load_corpus<P: AsRef<Path>>(path: P, format: CorpusFormat) -> Result<PlanCorpus> {
    let CorpusFormat::Jsonl = format;
    let file = File::open(path.as_ref())?;
    parse_jsonl(BufReader::new(file))
}

fn parse_jsonl<R: BufRead>(reader: R) -> Result<PlanCorpus> {
    let mut vocabulary = ActionVocabulary::new();
    let mut plans = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PlanRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: line_no,
                msg: e.to_string(),
            })?;
        if record.steps.is_empty() {
            return Err(Error::MalformedRecord {
                line: line_no,
                msg: "empty step list".to_string(),
            });
        }
        let steps: Vec<ActionId> = record
            .steps
            .iter()
            .map(|name| vocabulary.intern(name))
            .collect();
        let plan = PlanSequence::new(steps, record.task).map_err(|e| Error::MalformedRecord {
            line: line_no,
            msg: e.to_string(),
        })?;
        plans.push(plan);
    }
    if plans.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    PlanCorpus::new(plans, vocabulary)
}

/// Serializes a corpus back to the line-delimited JSON format.
pub fn corpus_to_jsonl(corpus: &PlanCorpus) -> Result<String> {
    let mut out = String::new();
    for plan in &corpus.plans {
        let record = PlanRecord {
            task: plan.task_tag.clone(),
            steps: plan
                .steps
                .iter()
                .map(|&id| {
                    corpus
                        .vocabulary
                        .name(id)
                        .expect("corpus ids are in-vocabulary")
                        .to_string()
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    Ok(out)
}

/// `|A| x |A|` matrix where entry `(i, j)` is the probability of moving from
/// action `i` to action `j`, counted over adjacent pairs in all plans. Rows
/// without outgoing transitions are all-zero; every other row sums to 1.
pub fn transition_heatmap(corpus: &PlanCorpus) -> Result<Vec<Vec<f64>>> {
    if corpus.plans.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n = corpus.num_actions();
    let mut counts = vec![vec![0u64; n]; n];
    for plan in &corpus.plans {
        for pair in plan.steps.windows(2) {
            counts[pair[0].index()][pair[1].index()] += 1;
        }
    }
    let mut heatmap = vec![vec![0.0; n]; n];
    for (row, count_row) in heatmap.iter_mut().zip(&counts) {
        let total: u64 = count_row.iter().sum();
        if total == 0 {
            continue;
        }
        for (cell, &c) in row.iter_mut().zip(count_row) {
            *cell = c as f64 / total as f64;
        }
    }
    Ok(heatmap)
}

/// Renders a heatmap as CSV, one row per from-action.
pub fn heatmap_to_csv(heatmap: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in heatmap {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// A start- or goal-state feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub features: Vec<f64>,
}

impl Observation {
    pub fn new(features: Vec<f64>) -> Result<Self> {
        if features.is_empty() || features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "observation features must be nonempty and finite".to_string(),
            ));
        }
        Ok(Self { features })
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// How synthetic observations embed actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    /// Fixed random Gaussian embedding matrix.
    #[default]
    Random,
    /// Identity embedding; requires `observation_dim == |A|`.
    Identity,
}

/// One plan template for the synthetic generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    pub steps: Vec<String>,
    /// Relative branch weight; weights are normalized over all templates.
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

/// Specification of a synthetic task distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub templates: Vec<TemplateSpec>,
    pub num_plans: usize,
    pub observation_dim: usize,
    /// Gaussian noise level added to observations.
    pub noise_sigma: f64,
    #[serde(default)]
    pub embedding: EmbeddingKind,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::InvalidConfig("no plan templates".to_string()));
        }
        for t in &self.templates {
            if t.steps.len() < 2 {
                return Err(Error::InvalidConfig(format!(
                    "template has {} steps, need at least 2",
                    t.steps.len()
                )));
            }
            if !(t.weight >= 0.0) || !t.weight.is_finite() {
                return Err(Error::InvalidConfig(
                    "template weight must be finite and nonnegative".to_string(),
                ));
            }
        }
        if self.templates.iter().map(|t| t.weight).sum::<f64>() <= 0.0 {
            return Err(Error::InvalidConfig(
                "template weights sum to zero".to_string(),
            ));
        }
        if self.num_plans == 0 {
            return Err(Error::InvalidConfig("num_plans must be >= 1".to_string()));
        }
        if self.observation_dim == 0 {
            return Err(Error::InvalidConfig(
                "observation_dim must be >= 1".to_string(),
            ));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidConfig(
                "noise_sigma must be finite and >= 0".to_string(),
            ));
        }
        Ok(())
    }
}

/// Draws a corpus from the template distribution together with one
/// (start, goal) observation pair per plan, aligned by index.
///
/// Observations are `embed(first_step) + sigma * gaussian` and
/// `embed(last_step) + sigma * gaussian` for a fixed embedding matrix drawn
/// once per seed. The whole construction is deterministic given the seed.
pub fn generate_synthetic_corpus(
    spec: &SyntheticSpec,
    seed: u64,
) -> Result<(PlanCorpus, Vec<(Observation, Observation)>)> {
    spec.validate()?;

    let mut vocabulary = ActionVocabulary::new();
    let template_plans: Vec<(Vec<ActionId>, Option<String>)> = spec
        .templates
        .iter()
        .map(|t| {
            (
                t.steps.iter().map(|s| vocabulary.intern(s)).collect(),
                t.task.clone(),
            )
        })
        .collect();
    let num_actions = vocabulary.len();

    if spec.embedding == EmbeddingKind::Identity && spec.observation_dim != num_actions {
        return Err(Error::InvalidConfig(format!(
            "identity embedding needs observation_dim == |A| ({num_actions}), got {}",
            spec.observation_dim
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.observation_dim;
    let embedding: Vec<Vec<f64>> = match spec.embedding {
        EmbeddingKind::Identity => (0..num_actions)
            .map(|a| (0..d).map(|j| if j == a { 1.0 } else { 0.0 }).collect())
            .collect(),
        EmbeddingKind::Random => (0..num_actions)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect(),
    };

    let total_weight: f64 = spec.templates.iter().map(|t| t.weight).sum();
    let mut plans = Vec::with_capacity(spec.num_plans);
    let mut observations = Vec::with_capacity(spec.num_plans);
    for _ in 0..spec.num_plans {
        let mut pick = rng.random::<f64>() * total_weight;
        let mut chosen = template_plans.len() - 1;
        for (i, t) in spec.templates.iter().enumerate() {
            if pick < t.weight {
                chosen = i;
                break;
            }
            pick -= t.weight;
        }
        let (steps, task) = &template_plans[chosen];
        let plan = PlanSequence::new(steps.clone(), task.clone())?;

        let noisy = |id: ActionId, rng: &mut ChaCha8Rng| -> Result<Observation> {
            let base = &embedding[id.index()];
            let features = base
                .iter()
                .map(|&v| {
                    let g: f64 = StandardNormal.sample(rng);
                    v + spec.noise_sigma * g
                })
                .collect();
            Observation::new(features)
        };
        let start = noisy(plan.first(), &mut rng)?;
        let goal = noisy(plan.last(), &mut rng)?;
        plans.push(plan);
        observations.push((start, goal));
    }

    Ok((PlanCorpus::new(plans, vocabulary)?, observations))
}

/// On-disk form of per-plan observation pairs, aligned with corpus line order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationSet {
    pub dim: usize,
    pub pairs: Vec<ObservationPair>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationPair {
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
}

impl ObservationSet {
    pub fn from_pairs(pairs: &[(Observation, Observation)]) -> Result<Self> {
        let dim = pairs
            .first()
            .map(|(s, _)| s.dim())
            .ok_or_else(|| Error::InvalidConfig("no observation pairs".to_string()))?;
        Ok(Self {
            dim,
            pairs: pairs
                .iter()
                .map(|(s, g)| ObservationPair {
                    start: s.features.clone(),
                    goal: g.features.clone(),
                })
                .collect(),
        })
    }

    pub fn to_pairs(&self) -> Result<Vec<(Observation, Observation)>> {
        self.pairs
            .iter()
            .map(|p| {
                if p.start.len() != self.dim || p.goal.len() != self.dim {
                    return Err(Error::ShapeMismatch(format!(
                        "observation pair dim {} / {} != declared {}",
                        p.start.len(),
                        p.goal.len(),
                        self.dim
                    )));
                }
                Ok((
                    Observation::new(p.start.clone())?,
                    Observation::new(p.goal.clone())?,
                ))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
