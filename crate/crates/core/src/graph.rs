//! The procedure knowledge graph: directed transition counts extracted from a
//! plan corpus, plus the two normalizations used downstream — out-edge
//! probabilities (every non-sink node's outgoing weights sum to 1) and global
//! min-max scaling of the raw counts.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::corpus::{ActionId, ActionVocabulary, PlanCorpus};
use crate::error::{Error, Result};

/// Raw transition counts. One edge per adjacent step pair seen in a plan;
/// repeated pairs bump the count. Self-loops are ordinary edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyGraph {
    nodes: BTreeSet<ActionId>,
    counts: BTreeMap<(ActionId, ActionId), u64>,
    num_actions: usize,
}

impl FrequencyGraph {
    /// Counts every adjacent pair `(a_t, a_{t+1})` across all plans.
    pub fn from_corpus(corpus: &PlanCorpus) -> Result<Self> {
        if corpus.plans.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut nodes = BTreeSet::new();
        let mut counts = BTreeMap::new();
        for plan in &corpus.plans {
            nodes.extend(plan.steps.iter().copied());
            for pair in plan.steps.windows(2) {
                *counts.entry((pair[0], pair[1])).or_insert(0) += 1;
            }
        }
        Ok(Self {
            nodes,
            counts,
            num_actions: corpus.num_actions(),
        })
    }

    fn from_parts(
        nodes: BTreeSet<ActionId>,
        counts: BTreeMap<(ActionId, ActionId), u64>,
        num_actions: usize,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        for (&(from, to), &count) in &counts {
            if !nodes.contains(&from) || !nodes.contains(&to) {
                return Err(Error::UnknownNode(if nodes.contains(&from) { to } else { from }));
            }
            if count == 0 {
                return Err(Error::InvalidConfig("edge with zero count".to_string()));
            }
        }
        Ok(Self {
            nodes,
            counts,
            num_actions,
        })
    }

    pub fn nodes(&self) -> &BTreeSet<ActionId> {
        &self.nodes
    }

    pub fn contains_node(&self, id: ActionId) -> bool {
        self.nodes.contains(&id)
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn count(&self, from: ActionId, to: ActionId) -> u64 {
        self.counts.get(&(from, to)).copied().unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = (ActionId, ActionId, u64)> + '_ {
        self.counts.iter().map(|(&(f, t), &c)| (f, t, c))
    }

    pub fn num_edges(&self) -> usize {
        self.counts.len()
    }

    /// Out-edge normalization: each edge count divided by the total outgoing
    /// count of its source node.
    pub fn normalize_probabilistic(&self) -> ProbabilisticGraph {
        let mut out_totals: BTreeMap<ActionId, u64> = BTreeMap::new();
        for (&(from, _), &c) in &self.counts {
            *out_totals.entry(from).or_insert(0) += c;
        }
        let mut prob = BTreeMap::new();
        let mut out_adj: BTreeMap<ActionId, Vec<(ActionId, f64)>> = BTreeMap::new();
        for (&(from, to), &c) in &self.counts {
            let p = c as f64 / out_totals[&from] as f64;
            prob.insert((from, to), p);
            out_adj.entry(from).or_default().push((to, p));
        }
        ProbabilisticGraph {
            nodes: self.nodes.clone(),
            counts: self.counts.clone(),
            prob,
            out_adj,
            num_actions: self.num_actions,
        }
    }

    /// Global min-max scaling of counts over the whole graph. When all counts
    /// are equal the range is degenerate and every weight is defined as 1.
    pub fn normalize_minmax(&self) -> MinMaxGraph {
        let min = self.counts.values().copied().min().unwrap_or(0);
        let max = self.counts.values().copied().max().unwrap_or(0);
        let mut weight = BTreeMap::new();
        let mut out_adj: BTreeMap<ActionId, Vec<(ActionId, f64)>> = BTreeMap::new();
        for (&(from, to), &c) in &self.counts {
            let w = if max == min {
                1.0
            } else {
                (c - min) as f64 / (max - min) as f64
            };
            weight.insert((from, to), w);
            out_adj.entry(from).or_default().push((to, w));
        }
        MinMaxGraph {
            nodes: self.nodes.clone(),
            weight,
            out_adj,
            num_actions: self.num_actions,
        }
    }
}

/// The probabilistic graph: counts retained for provenance, edge weights
/// normalized so each non-sink node's outgoing probabilities sum to 1.
#[derive(Debug, Clone)]
pub struct ProbabilisticGraph {
    nodes: BTreeSet<ActionId>,
    counts: BTreeMap<(ActionId, ActionId), u64>,
    prob: BTreeMap<(ActionId, ActionId), f64>,
    out_adj: BTreeMap<ActionId, Vec<(ActionId, f64)>>,
    num_actions: usize,
}

impl ProbabilisticGraph {
    pub fn nodes(&self) -> &BTreeSet<ActionId> {
        &self.nodes
    }

    pub fn contains_node(&self, id: ActionId) -> bool {
        self.nodes.contains(&id)
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn probability(&self, from: ActionId, to: ActionId) -> Option<f64> {
        self.prob.get(&(from, to)).copied()
    }

    pub fn count(&self, from: ActionId, to: ActionId) -> u64 {
        self.counts.get(&(from, to)).copied().unwrap_or(0)
    }

    /// Outgoing edges of `from`, sorted by target id.
    pub fn out_edges(&self, from: ActionId) -> &[(ActionId, f64)] {
        self.out_adj.get(&from).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn edges(&self) -> impl Iterator<Item = (ActionId, ActionId, f64)> + '_ {
        self.prob.iter().map(|(&(f, t), &p)| (f, t, p))
    }
}

/// Min-max scaled frequency graph used by the ablation planner, where the
/// best walk maximizes the sum of edge weights.
#[derive(Debug, Clone)]
pub struct MinMaxGraph {
    nodes: BTreeSet<ActionId>,
    weight: BTreeMap<(ActionId, ActionId), f64>,
    out_adj: BTreeMap<ActionId, Vec<(ActionId, f64)>>,
    num_actions: usize,
}

impl MinMaxGraph {
    pub fn nodes(&self) -> &BTreeSet<ActionId> {
        &self.nodes
    }

    pub fn contains_node(&self, id: ActionId) -> bool {
        self.nodes.contains(&id)
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn weight(&self, from: ActionId, to: ActionId) -> Option<f64> {
        self.weight.get(&(from, to)).copied()
    }

    pub fn out_edges(&self, from: ActionId) -> &[(ActionId, f64)] {
        self.out_adj.get(&from).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn edges(&self) -> impl Iterator<Item = (ActionId, ActionId, f64)> + '_ {
        self.weight.iter().map(|(&(f, t), &w)| (f, t, w))
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    nodes: Vec<String>,
    edges: Vec<EdgeRecord>,
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    from: u32,
    to: u32,
    count: u64,
}

/// Serializes the count graph together with its action names. Probabilities
/// are never persisted; they are recomputed on load.
pub fn graph_to_json(graph: &FrequencyGraph, vocabulary: &ActionVocabulary) -> Result<String> {
    if vocabulary.len() != graph.num_actions() {
        return Err(Error::ShapeMismatch(format!(
            "vocabulary has {} names, graph expects {}",
            vocabulary.len(),
            graph.num_actions()
        )));
    }
    let file = GraphFile {
        nodes: vocabulary.names().to_vec(),
        edges: graph
            .edges()
            .map(|(f, t, c)| EdgeRecord {
                from: f.0,
                to: t.0,
                count: c,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Loads a persisted graph. Every listed node is a graph node even when it
/// has no edges.
pub fn graph_from_json(text: &str) -> Result<(FrequencyGraph, ActionVocabulary)> {
    let file: GraphFile = serde_json::from_str(text)?;
    let vocabulary = ActionVocabulary::from_names(file.nodes.iter().cloned())?;
    let n = vocabulary.len() as u32;
    let nodes: BTreeSet<ActionId> = (0..n).map(ActionId).collect();
    let mut counts = BTreeMap::new();
    for e in &file.edges {
        if e.from >= n || e.to >= n {
            return Err(Error::UnknownNode(ActionId(e.from.max(e.to))));
        }
        if e.count == 0 {
            return Err(Error::InvalidConfig("edge with zero count".to_string()));
        }
        counts.insert((ActionId(e.from), ActionId(e.to)), e.count);
    }
    let graph = FrequencyGraph::from_parts(nodes, counts, n as usize)?;
    Ok((graph, vocabulary))
}

/// How DOT edge labels are rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DotWeights {
    Count,
    Probability,
    MinMax,
}

/// Options for [`export_dot`].
#[derive(Debug, Clone, Copy, Default)]
pub struct DotOptions<'a> {
    pub vocabulary: Option<&'a ActionVocabulary>,
    /// Restrict output to the k-hop neighborhood (in- and out-neighbors)
    /// around a node.
    pub neighborhood: Option<(ActionId, usize)>,
}

/// A graph view that can be rendered to DOT.
pub trait DotView {
    fn view_nodes(&self) -> Vec<ActionId>;
    fn view_edges(&self) -> Vec<(ActionId, ActionId, String)>;
}

impl DotView for FrequencyGraph {
    fn view_nodes(&self) -> Vec<ActionId> {
        self.nodes.iter().copied().collect()
    }
    fn view_edges(&self) -> Vec<(ActionId, ActionId, String)> {
        self.edges().map(|(f, t, c)| (f, t, c.to_string())).collect()
    }
}

impl DotView for ProbabilisticGraph {
    fn view_nodes(&self) -> Vec<ActionId> {
        self.nodes.iter().copied().collect()
    }
    fn view_edges(&self) -> Vec<(ActionId, ActionId, String)> {
        self.edges()
            .map(|(f, t, p)| (f, t, format!("{p:.3}")))
            .collect()
    }
}

impl DotView for MinMaxGraph {
    fn view_nodes(&self) -> Vec<ActionId> {
        self.nodes.iter().copied().collect()
    }
    fn view_edges(&self) -> Vec<(ActionId, ActionId, String)> {
        self.edges()
            .map(|(f, t, w)| (f, t, format!("{w:.3}")))
            .collect()
    }
}

/// Renders the graph as a DOT digraph with labeled edges, optionally
/// restricted to a node's k-hop neighborhood.
pub fn export_dot<G: DotView>(graph: &G, options: &DotOptions) -> Result<String> {
    let all_nodes = graph.view_nodes();
    let all_edges = graph.view_edges();

    let keep: BTreeSet<ActionId> = match options.neighborhood {
        None => all_nodes.iter().copied().collect(),
        Some((center, depth)) => {
            if !all_nodes.contains(&center) {
                return Err(Error::UnknownNode(center));
            }
            let mut undirected: BTreeMap<ActionId, BTreeSet<ActionId>> = BTreeMap::new();
            for (f, t, _) in &all_edges {
                undirected.entry(*f).or_default().insert(*t);
                undirected.entry(*t).or_default().insert(*f);
            }
            let mut seen = BTreeSet::from([center]);
            let mut queue = VecDeque::from([(center, 0usize)]);
            while let Some((node, d)) = queue.pop_front() {
                if d == depth {
                    continue;
                }
                for &next in undirected.get(&node).into_iter().flatten() {
                    if seen.insert(next) {
                        queue.push_back((next, d + 1));
                    }
                }
            }
            seen
        }
    };

    let render = |id: ActionId| -> String {
        match options.vocabulary.and_then(|v| v.name(id)) {
            Some(name) => format!("\"{}\"", name.replace('"', "\\\"")),
            None => format!("\"{}\"", id.0),
        }
    };

    let mut out = String::from("digraph plans {\n");
    for &node in &keep {
        out.push_str(&format!("  {};\n", render(node)));
    }
    for (from, to, label) in &all_edges {
        if keep.contains(from) && keep.contains(to) {
            out.push_str(&format!(
                "  {} -> {} [label=\"{}\"];\n",
                render(*from),
                render(*to),
                label
            ));
        }
    }
    out.push_str("}\n");
    Ok(out)
}
