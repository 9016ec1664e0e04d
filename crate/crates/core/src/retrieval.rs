//! Bounded-length walk retrieval between two actions, and the aggregation of
//! the top-R walks into a per-timestep action distribution that conditions
//! the planning model.
//!
//! Walks allow repeated nodes (self-loops are real transitions), so the
//! horizon bound is what guarantees termination. Because every edge
//! probability is at most 1, extending a walk never increases its product
//! probability; best-first expansion therefore emits complete walks in
//! globally sorted order without enumerating the whole space first.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::Serialize;

use crate::corpus::{ActionId, PlanSequence};
use crate::error::{Error, Result};
use crate::graph::{MinMaxGraph, ProbabilisticGraph};

/// A retrieved walk and its product probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredWalk {
    pub steps: Vec<ActionId>,
    pub probability: f64,
}

/// Query parameters: planning horizon, number of recommendations, and
/// optional explicit aggregation weights.
#[derive(Debug, Clone)]
pub struct RetrievalConfig {
    horizon: usize,
    num_recommendations: usize,
    weights: Option<Vec<f64>>,
}

impl RetrievalConfig {
    pub fn new(horizon: usize, num_recommendations: usize) -> Result<Self> {
        if horizon < 2 {
            return Err(Error::InvalidConfig(format!(
                "horizon must be >= 2, got {horizon}"
            )));
        }
        if num_recommendations < 1 {
            return Err(Error::InvalidConfig(
                "num_recommendations must be >= 1".to_string(),
            ));
        }
        Ok(Self {
            horizon,
            num_recommendations,
            weights: None,
        })
    }

    /// Overrides the default linear weighting with explicit weights, which
    /// must be nonnegative, sum to 1, and have one entry per recommendation.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.num_recommendations {
            return Err(Error::InvalidConfig(format!(
                "{} weights for {} recommendations",
                weights.len(),
                self.num_recommendations
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidConfig(
                "weights must be finite and nonnegative".to_string(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("weights sum to {sum}, not 1")));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_recommendations(&self) -> usize {
        self.num_recommendations
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }
}

/// T x |A| row-stochastic matrix: row t is the action distribution
/// recommended for timestep t.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendationMatrix {
    rows: Vec<Vec<f64>>,
}

impl RecommendationMatrix {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    pub fn num_actions(&self) -> usize {
        self.rows.first().map(Vec::len).unwrap_or(0)
    }

    pub fn row_argmax(&self, t: usize) -> ActionId {
        let row = &self.rows[t];
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        ActionId(best as u32)
    }
}

struct HeapEntry {
    probability: f64,
    steps: Vec<ActionId>,
}

// Max-heap order: higher probability first, then fewer nodes, then
// lexicographically smaller step sequence.
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.probability
            .total_cmp(&other.probability)
            .then_with(|| other.steps.len().cmp(&self.steps.len()))
            .then_with(|| other.steps.cmp(&self.steps))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

/// Lazily yields all walks from `start` to `end` with between 2 and
/// `horizon` nodes, in descending probability order (ties: fewer nodes
/// first, then lexicographic by step ids).
pub struct WalkIter<'g> {
    graph: &'g ProbabilisticGraph,
    end: ActionId,
    horizon: usize,
    heap: BinaryHeap<HeapEntry>,
}

impl Iterator for WalkIter<'_> {
    type Item = ScoredWalk;

    fn next(&mut self) -> Option<ScoredWalk> {
        while let Some(entry) = self.heap.pop() {
            let last = *entry.steps.last().expect("heap entries are nonempty");
            if entry.steps.len() < self.horizon {
                for &(to, p) in self.graph.out_edges(last) {
                    let mut steps = entry.steps.clone();
                    steps.push(to);
                    self.heap.push(HeapEntry {
                        probability: entry.probability * p,
                        steps,
                    });
                }
            }
            if entry.steps.len() >= 2 && last == self.end {
                return Some(ScoredWalk {
                    steps: entry.steps,
                    probability: entry.probability,
                });
            }
        }
        None
    }
}

/// Starts a best-first walk search; see [`WalkIter`] for the emission order.
pub fn walk_iter(
    graph: &ProbabilisticGraph,
    start: ActionId,
    end: ActionId,
    horizon: usize,
) -> Result<WalkIter<'_>> {
    if horizon < 2 {
        return Err(Error::InvalidConfig(format!(
            "horizon must be >= 2, got {horizon}"
        )));
    }
    if !graph.contains_node(start) {
        return Err(Error::UnknownNode(start));
    }
    if !graph.contains_node(end) {
        return Err(Error::UnknownNode(end));
    }
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        probability: 1.0,
        steps: vec![start],
    });
    Ok(WalkIter {
        graph,
        end,
        horizon,
        heap,
    })
}

/// All walks from `start` to `end` with at most `horizon` nodes, sorted.
pub fn enumerate_walks(
    graph: &ProbabilisticGraph,
    start: ActionId,
    end: ActionId,
    horizon: usize,
) -> Result<Vec<ScoredWalk>> {
    Ok(walk_iter(graph, start, end, horizon)?.collect())
}

/// The top R walks. When fewer than R walks exist the available ones repeat
/// cyclically to fill R slots; when none exist the result is empty and the
/// caller is expected to fall back to [`fallback_paths`].
pub fn top_r_walks(
    graph: &ProbabilisticGraph,
    start: ActionId,
    end: ActionId,
    horizon: usize,
    r: usize,
) -> Result<Vec<ScoredWalk>> {
    if r < 1 {
        return Err(Error::InvalidConfig("r must be >= 1".to_string()));
    }
    let available: Vec<ScoredWalk> = walk_iter(graph, start, end, horizon)?.take(r).collect();
    if available.is_empty() || available.len() == r {
        return Ok(available);
    }
    let filled = (0..r)
        .map(|i| available[i % available.len()].clone())
        .collect();
    Ok(filled)
}

// Compositions of `extra` into `slots` parts, lexicographically descending,
// so the variant that duplicates leftmost positions comes first.
fn compositions(extra: usize, slots: usize) -> Vec<Vec<usize>> {
    fn rec(extra: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(extra);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=extra).rev() {
            prefix.push(first);
            rec(extra - first, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(extra, slots, &mut Vec::new(), &mut out);
    out
}

/// All distinct ways of stretching a walk to exactly `horizon` steps by
/// repeating steps in place, endpoints kept fixed. A walk already at the
/// horizon yields itself. Variants are ordered leftmost-duplication-first.
pub fn pad_walk(walk: &ScoredWalk, horizon: usize) -> Result<Vec<PlanSequence>> {
    let steps = &walk.steps;
    if steps.len() > horizon {
        return Err(Error::WalkTooLong {
            len: steps.len(),
            horizon,
        });
    }
    let extra = horizon - steps.len();
    let mut seen = std::collections::HashSet::new();
    let mut variants = Vec::new();
    for counts in compositions(extra, steps.len()) {
        let mut padded = Vec::with_capacity(horizon);
        for (step, c) in steps.iter().zip(&counts) {
            for _ in 0..=*c {
                padded.push(*step);
            }
        }
        if seen.insert(padded.clone()) {
            variants.push(PlanSequence::new(padded, None)?);
        }
    }
    Ok(variants)
}

// The leftmost-duplication variant without enumerating all compositions.
fn first_padded(steps: &[ActionId], horizon: usize) -> Vec<ActionId> {
    let extra = horizon - steps.len();
    let mut padded = Vec::with_capacity(horizon);
    padded.extend(std::iter::repeat(steps[0]).take(extra + 1));
    padded.extend_from_slice(&steps[1..]);
    padded
}

/// Endpoint-repetition sequences used when no walk connects the endpoints:
/// with `M = horizon / 2`, the two variations are `start^(T-M) ++ end^M` and
/// `start^M ++ end^(T-M)`, cycled to fill R slots.
pub fn fallback_paths(
    start: ActionId,
    end: ActionId,
    horizon: usize,
    r: usize,
) -> Result<Vec<PlanSequence>> {
    if horizon < 2 {
        return Err(Error::InvalidConfig(format!(
            "horizon must be >= 2, got {horizon}"
        )));
    }
    if r < 1 {
        return Err(Error::InvalidConfig("r must be >= 1".to_string()));
    }
    let m = horizon / 2;
    let make = |n_start: usize| -> Result<PlanSequence> {
        let mut steps = Vec::with_capacity(horizon);
        steps.extend(std::iter::repeat(start).take(n_start));
        steps.extend(std::iter::repeat(end).take(horizon - n_start));
        PlanSequence::new(steps, None)
    };
    let variations = [make(horizon - m)?, make(m)?];
    Ok((0..r).map(|i| variations[i % 2].clone()).collect())
}

/// Linear aggregation weights for R recommendations: `[1]` for R = 1,
/// otherwise `R/(2R-1)` for the top walk and `1/(2R-1)` for each of the rest.
///
/// # Panics
/// Panics when `r` is zero.
pub fn aggregation_weights(r: usize) -> Vec<f64> {
    assert!(r >= 1, "need at least one recommendation");
    if r == 1 {
        return vec![1.0];
    }
    let denom = (2 * r - 1) as f64;
    let mut weights = vec![1.0 / denom; r];
    weights[0] = r as f64 / denom;
    weights
}

/// Weighted sum of one-hot rows: row t of the result is
/// `sum_i weights[i] * one_hot(plans[i][t])`.
pub fn aggregate(
    plans: &[PlanSequence],
    weights: &[f64],
    num_actions: usize,
) -> Result<RecommendationMatrix> {
    if plans.is_empty() {
        return Err(Error::InvalidConfig("no plans to aggregate".to_string()));
    }
    if plans.len() != weights.len() {
        return Err(Error::LengthMismatch(format!(
            "{} plans vs {} weights",
            plans.len(),
            weights.len()
        )));
    }
    let horizon = plans[0].len();
    if plans.iter().any(|p| p.len() != horizon) {
        return Err(Error::LengthMismatch(
            "plans must share one length".to_string(),
        ));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("weights sum to {sum}, not 1")));
    }
    let mut rows = vec![vec![0.0; num_actions]; horizon];
    for (plan, &w) in plans.iter().zip(weights) {
        for (t, step) in plan.steps.iter().enumerate() {
            if step.index() >= num_actions {
                return Err(Error::UnknownNode(*step));
            }
            rows[t][step.index()] += w;
        }
    }
    Ok(RecommendationMatrix { rows })
}

/// A recommendation with its provenance.
#[derive(Debug, Clone, Serialize)]
pub struct Recommendation {
    pub matrix: RecommendationMatrix,
    /// The length-T sequences that were aggregated.
    pub selected: Vec<Vec<ActionId>>,
    pub walks_found: usize,
    pub fallback_used: bool,
}

/// End-to-end retrieval: top-R walks, each stretched to the horizon by its
/// first padding variant (endpoint-repetition fallback when no walk exists),
/// aggregated under the linear weighting scheme.
pub fn recommendation(
    graph: &ProbabilisticGraph,
    start: ActionId,
    end: ActionId,
    config: &RetrievalConfig,
) -> Result<Recommendation> {
    let r = config.num_recommendations();
    let horizon = config.horizon();
    let walks = top_r_walks(graph, start, end, horizon, r)?;
    let walks_found = walks.len();
    let (selected, fallback_used) = if walks.is_empty() {
        (fallback_paths(start, end, horizon, r)?, true)
    } else {
        let padded = walks
            .iter()
            .map(|w| PlanSequence::new(first_padded(&w.steps, horizon), None))
            .collect::<Result<Vec<_>>>()?;
        (padded, false)
    };
    let weights = match config.weights() {
        Some(w) => w.to_vec(),
        None => aggregation_weights(r),
    };
    let matrix = aggregate(&selected, &weights, graph.num_actions())?;
    Ok(Recommendation {
        matrix,
        selected: selected.into_iter().map(|p| p.steps).collect(),
        walks_found,
        fallback_used,
    })
}

/// The walk with at most `horizon` nodes maximizing the *sum* of min-max
/// edge weights (the frequency-graph ablation). Ties break like
/// [`enumerate_walks`]: fewer nodes first, then lexicographic.
///
/// Sums only grow along extensions, so best-first pruning does not apply;
/// this runs a length-layered dynamic program instead. Keeping one best
/// (score, lexicographically smallest) walk per (length, node) is exact
/// because extending two same-length walks at the same node by the same
/// suffix preserves both their score order and their lexicographic order.
pub fn max_weight_walk_minmax(
    graph: &MinMaxGraph,
    start: ActionId,
    end: ActionId,
    horizon: usize,
) -> Result<PlanSequence> {
    if horizon < 2 {
        return Err(Error::InvalidConfig(format!(
            "horizon must be >= 2, got {horizon}"
        )));
    }
    if !graph.contains_node(start) {
        return Err(Error::UnknownNode(start));
    }
    if !graph.contains_node(end) {
        return Err(Error::UnknownNode(end));
    }

    // better(a, b): does candidate a beat candidate b at equal length?
    let better = |score_a: f64, steps_a: &[ActionId], score_b: f64, steps_b: &[ActionId]| -> bool {
        match score_a.total_cmp(&score_b) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => steps_a < steps_b,
        }
    };

    let mut layer: BTreeMap<ActionId, (f64, Vec<ActionId>)> =
        BTreeMap::from([(start, (0.0, vec![start]))]);
    let mut best: Option<(f64, Vec<ActionId>)> = None;

    for _len in 2..=horizon {
        let mut next: BTreeMap<ActionId, (f64, Vec<ActionId>)> = BTreeMap::new();
        for (node, (score, steps)) in &layer {
            for &(to, w) in graph.out_edges(*node) {
                let cand_score = score + w;
                let mut cand_steps = steps.clone();
                cand_steps.push(to);
                let is_better = match next.get(&to) {
                    None => true,
                    Some((s, st)) => better(cand_score, &cand_steps, *s, st),
                };
                if is_better {
                    next.insert(to, (cand_score, cand_steps));
                }
            }
        }
        if let Some((score, steps)) = next.get(&end) {
            let replace = match &best {
                None => true,
                // Earlier (shorter) layers win ties, so only a strictly
                // greater score replaces the incumbent.
                Some((s, _)) => score.total_cmp(s) == Ordering::Greater,
            };
            if replace {
                best = Some((*score, steps.clone()));
            }
        }
        layer = next;
    }

    match best {
        Some((_, steps)) => PlanSequence::new(steps, None),
        None => Err(Error::NoWalk),
    }
}
