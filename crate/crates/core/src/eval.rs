//! The three sequence metrics — success rate (exact match), mean accuracy
//! (per-position match), mean IoU over action sets — plus a batch evaluation
//! harness for any planner, parallel over samples when the `parallel`
//! feature is enabled.

use std::collections::HashSet;
use std::hash::Hash;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Observation, PlanSequence};
use crate::error::{Error, Result};
use crate::planner::PlanResult;

fn check_pairs<A>(preds: &[Vec<A>], gts: &[Vec<A>]) -> Result<()> {
    if preds.len() != gts.len() {
        return Err(Error::LengthMismatch(format!(
            "{} predictions vs {} ground truths",
            preds.len(),
            gts.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InvalidConfig("no prediction pairs".to_string()));
    }
    for (i, (p, g)) in preds.iter().zip(gts).enumerate() {
        if p.len() != g.len() {
            return Err(Error::LengthMismatch(format!(
                "pair {i}: prediction of {} steps vs ground truth of {}",
                p.len(),
                g.len()
            )));
        }
    }
    Ok(())
}

/// Fraction of pairs that match the ground truth exactly, elementwise.
pub fn success_rate<A: PartialEq>(preds: &[Vec<A>], gts: &[Vec<A>]) -> Result<f64> {
    check_pairs(preds, gts)?;
    let hits = preds.iter().zip(gts).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Mean over pairs of the fraction of positions predicted correctly.
pub fn mean_accuracy<A: PartialEq>(preds: &[Vec<A>], gts: &[Vec<A>]) -> Result<f64> {
    check_pairs(preds, gts)?;
    let total: f64 = preds
        .iter()
        .zip(gts)
        .map(|(p, g)| {
            let matches = p.iter().zip(g).filter(|(a, b)| a == b).count();
            matches as f64 / p.len() as f64
        })
        .sum();
    Ok(total / preds.len() as f64)
}

/// How IoU is aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiouMode {
    /// IoU per pair, averaged over pairs.
    PerSequence,
    /// Action sets unioned within each batch of the given size, IoU per
    /// batch, averaged over batches.
    PerBatch(usize),
}

fn set_iou<A: Eq + Hash>(pred: HashSet<&A>, gt: HashSet<&A>) -> f64 {
    let inter = pred.intersection(&gt).count();
    let union = pred.union(&gt).count();
    inter as f64 / union as f64
}

/// Order-insensitive overlap between predicted and ground-truth action sets
/// (duplicates collapse).
pub fn miou<A: Eq + Hash>(preds: &[Vec<A>], gts: &[Vec<A>], mode: MiouMode) -> Result<f64> {
    check_pairs(preds, gts)?;
    let batch = match mode {
        MiouMode::PerSequence => 1,
        MiouMode::PerBatch(b) => {
            if b == 0 {
                return Err(Error::InvalidConfig("batch size must be >= 1".to_string()));
            }
            b
        }
    };
    let mut total = 0.0;
    let mut batches = 0usize;
    for (pred_chunk, gt_chunk) in preds.chunks(batch).zip(gts.chunks(batch)) {
        let pred_set: HashSet<&A> = pred_chunk.iter().flatten().collect();
        let gt_set: HashSet<&A> = gt_chunk.iter().flatten().collect();
        total += set_iou(pred_set, gt_set);
        batches += 1;
    }
    Ok(total / batches as f64)
}

/// One test case: the observation pair and the ground-truth plan.
#[derive(Debug, Clone)]
pub struct EvalSample {
    pub start: Observation,
    pub goal: Observation,
    pub target: PlanSequence,
}

/// Aggregate metrics plus provenance counters from a planner run.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub success_rate: f64,
    pub mean_accuracy: f64,
    pub mean_iou: f64,
    pub n_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// How the planner behaved across the split: endpoint prediction accuracy
/// and how often retrieval fell back to endpoint repetition.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub fallback_count: usize,
    pub start_accuracy: f64,
    pub end_accuracy: f64,
}

impl MetricsReport {
    /// Metrics over already-produced prediction/ground-truth pairs.
    pub fn from_pairs<A: Eq + Hash>(
        preds: &[Vec<A>],
        gts: &[Vec<A>],
        mode: MiouMode,
    ) -> Result<Self> {
        Ok(Self {
            success_rate: success_rate(preds, gts)?,
            mean_accuracy: mean_accuracy(preds, gts)?,
            mean_iou: miou(preds, gts, mode)?,
            n_samples: preds.len(),
            provenance: None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Single-row CSV with a header line.
    pub fn to_csv(&self) -> String {
        let (fallbacks, start_acc, end_acc) = match &self.provenance {
            Some(p) => (
                p.fallback_count.to_string(),
                p.start_accuracy.to_string(),
                p.end_accuracy.to_string(),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        format!(
            "success_rate,mean_accuracy,mean_iou,n_samples,fallback_count,start_accuracy,end_accuracy\n{},{},{},{},{},{},{}\n",
            self.success_rate,
            self.mean_accuracy,
            self.mean_iou,
            self.n_samples,
            fallbacks,
            start_acc,
            end_acc,
        )
    }
}

fn sample_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 over (seed, index) keeps per-sample seeds independent of
    // thread scheduling.
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn summarize(results: Vec<PlanResult>, split: &[EvalSample], mode: MiouMode) -> Result<MetricsReport> {
    let preds: Vec<Vec<_>> = results.iter().map(|r| r.steps.clone()).collect();
    let gts: Vec<Vec<_>> = split.iter().map(|s| s.target.steps.clone()).collect();
    let fallback_count = results.iter().filter(|r| r.fallback_used).count();
    let start_hits = results
        .iter()
        .zip(split)
        .filter(|(r, s)| r.endpoints.0 == s.target.first())
        .count();
    let end_hits = results
        .iter()
        .zip(split)
        .filter(|(r, s)| r.endpoints.1 == s.target.last())
        .count();
    Ok(MetricsReport {
        success_rate: success_rate(&preds, &gts)?,
        mean_accuracy: mean_accuracy(&preds, &gts)?,
        mean_iou: miou(&preds, &gts, mode)?,
        n_samples: split.len(),
        provenance: Some(Provenance {
            fallback_count,
            start_accuracy: start_hits as f64 / split.len() as f64,
            end_accuracy: end_hits as f64 / split.len() as f64,
        }),
    })
}

/// Runs `planner` over the split sequentially and reports the metrics.
/// Per-sample seeds derive from `seed` and the sample index, so the result
/// matches [`evaluate_par`] exactly.
pub fn evaluate_seq<P>(
    planner: P,
    split: &[EvalSample],
    mode: MiouMode,
    seed: u64,
) -> Result<MetricsReport>
where
    P: Fn(&EvalSample, u64) -> Result<PlanResult>,
{
    if split.is_empty() {
        return Err(Error::InvalidConfig("empty evaluation split".to_string()));
    }
    let results: Vec<PlanResult> = split
        .iter()
        .enumerate()
        .map(|(i, s)| planner(s, sample_seed(seed, i)))
        .collect::<Result<_>>()?;
    summarize(results, split, mode)
}

/// Rayon-parallel twin of [`evaluate_seq`]; identical output, sample order
/// preserved by the indexed collect.
#[cfg(feature = "parallel")]
pub fn evaluate_par<P>(
    planner: P,
    split: &[EvalSample],
    mode: MiouMode,
    seed: u64,
) -> Result<MetricsReport>
where
    P: Fn(&EvalSample, u64) -> Result<PlanResult> + Sync,
{
    if split.is_empty() {
        return Err(Error::InvalidConfig("empty evaluation split".to_string()));
    }
    let results: Vec<PlanResult> = split
        .par_iter()
        .enumerate()
        .map(|(i, s)| planner(s, sample_seed(seed, i)))
        .collect::<Result<_>>()?;
    summarize(results, split, mode)
}

/// Batch evaluation of a planner; parallel when the feature is on.
#[cfg(feature = "parallel")]
pub fn evaluate<P>(planner: P, split: &[EvalSample], mode: MiouMode, seed: u64) -> Result<MetricsReport>
where
    P: Fn(&EvalSample, u64) -> Result<PlanResult> + Sync,
{
    evaluate_par(planner, split, mode, seed)
}

/// Batch evaluation of a planner; parallel when the feature is on.
#[cfg(not(feature = "parallel"))]
pub fn evaluate<P>(planner: P, split: &[EvalSample], mode: MiouMode, seed: u64) -> Result<MetricsReport>
where
    P: Fn(&EvalSample, u64) -> Result<PlanResult> + Sync,
{
    evaluate_seq(planner, split, mode, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ActionId;
    use proptest::prelude::*;

    fn seqs(v: &[&[u32]]) -> Vec<Vec<u32>> {
        v.iter().map(|s| s.to_vec()).collect()
    }

    #[test]
    fn success_rate_fixtures() {
        let gt = seqs(&[&[1, 2, 3]]);
        assert_eq!(success_rate(&gt, &gt).unwrap(), 1.0);
        assert_eq!(success_rate(&seqs(&[&[1, 2, 4]]), &gt).unwrap(), 0.0);
        let preds = seqs(&[&[1, 2, 3], &[9, 9, 9]]);
        let gts = seqs(&[&[1, 2, 3], &[1, 2, 3]]);
        assert_eq!(success_rate(&preds, &gts).unwrap(), 0.5);
    }

    #[test]
    fn mean_accuracy_fixtures() {
        let gt = seqs(&[&[1, 2, 3]]);
        assert!((mean_accuracy(&seqs(&[&[1, 2, 4]]), &gt).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            mean_accuracy(&seqs(&[&[2, 1]]), &seqs(&[&[1, 2]])).unwrap(),
            0.0
        );
        assert_eq!(mean_accuracy(&gt, &gt).unwrap(), 1.0);
    }

    #[test]
    fn miou_fixtures() {
        assert_eq!(
            miou(&seqs(&[&[2, 1]]), &seqs(&[&[1, 2]]), MiouMode::PerSequence).unwrap(),
            1.0
        );
        assert_eq!(
            miou(
                &seqs(&[&[1, 2, 4]]),
                &seqs(&[&[1, 2, 3]]),
                MiouMode::PerSequence
            )
            .unwrap(),
            0.5
        );
        let batch = seqs(&[&[1, 2], &[3, 4], &[5, 6]]);
        assert_eq!(
            miou(&batch, &batch, MiouMode::PerBatch(2)).unwrap(),
            1.0
        );
    }

    #[test]
    fn metrics_reject_mismatched_lengths() {
        assert!(success_rate(&seqs(&[&[1]]), &seqs(&[&[1, 2]])).is_err());
        assert!(mean_accuracy(&seqs(&[&[1]]), &seqs(&[])).is_err());
        assert!(miou(&seqs(&[&[1]]), &seqs(&[&[1, 2]]), MiouMode::PerSequence).is_err());
    }

    #[test]
    fn report_from_pairs_is_all_ones_on_identical_input() {
        let gt = seqs(&[&[1, 2, 3], &[4, 5, 6]]);
        let report = MetricsReport::from_pairs(&gt, &gt, MiouMode::PerSequence).unwrap();
        assert_eq!(report.success_rate, 1.0);
        assert_eq!(report.mean_accuracy, 1.0);
        assert_eq!(report.mean_iou, 1.0);
        assert_eq!(report.n_samples, 2);
    }

    fn constant_planner(steps: Vec<ActionId>) -> impl Fn(&EvalSample, u64) -> Result<PlanResult> + Sync {
        move |_sample, _seed| {
            Ok(PlanResult {
                steps: steps.clone(),
                endpoints: (steps[0], *steps.last().unwrap()),
                recommendation: None,
                walks_found: 1,
                fallback_used: false,
            })
        }
    }

    fn toy_split() -> Vec<EvalSample> {
        let mk = |steps: &[u32]| EvalSample {
            start: Observation::new(vec![0.0, 1.0]).unwrap(),
            goal: Observation::new(vec![1.0, 0.0]).unwrap(),
            target: PlanSequence::new(steps.iter().map(|&i| ActionId(i)).collect(), None)
                .unwrap(),
        };
        vec![mk(&[0, 1, 2]), mk(&[0, 2, 2]), mk(&[1, 1, 2])]
    }

    #[test]
    fn constant_planner_metrics_match_hand_computation() {
        let split = toy_split();
        let planner = constant_planner(vec![ActionId(0), ActionId(1), ActionId(2)]);
        let report = evaluate_seq(planner, &split, MiouMode::PerSequence, 0).unwrap();
        // Exact match on sample 0 only.
        assert!((report.success_rate - 1.0 / 3.0).abs() < 1e-12);
        // Position matches per pair: 3/3, 2/3, 2/3.
        assert!((report.mean_accuracy - (1.0 + 2.0 / 3.0 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
        // Sets: {0,1,2} vs {0,1,2}=1, vs {0,2}=2/3, vs {1,2}=2/3.
        assert!((report.mean_iou - (1.0 + 2.0 / 3.0 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
        let prov = report.provenance.unwrap();
        assert_eq!(prov.fallback_count, 0);
        assert!((prov.start_accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert!((prov.end_accuracy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_is_deterministic_and_matches_sequential() {
        let split = toy_split();
        // A planner that actually uses its seed.
        let planner = |sample: &EvalSample, seed: u64| {
            let flip = seed % 2 == 0;
            let mut steps = sample.target.steps.clone();
            if flip {
                steps.reverse();
            }
            Ok(PlanResult {
                steps: steps.clone(),
                endpoints: (steps[0], *steps.last().unwrap()),
                recommendation: None,
                walks_found: 0,
                fallback_used: flip,
            })
        };
        let a = evaluate(planner, &split, MiouMode::PerSequence, 7).unwrap();
        let b = evaluate(planner, &split, MiouMode::PerSequence, 7).unwrap();
        let c = evaluate_seq(planner, &split, MiouMode::PerSequence, 7).unwrap();
        assert_eq!(a.success_rate, b.success_rate);
        assert_eq!(a.success_rate, c.success_rate);
        assert_eq!(
            a.provenance.as_ref().unwrap().fallback_count,
            c.provenance.as_ref().unwrap().fallback_count
        );
    }

    #[test]
    fn perfect_planner_scores_all_ones() {
        let split = toy_split();
        let planner = |sample: &EvalSample, _seed: u64| {
            Ok(PlanResult {
                steps: sample.target.steps.clone(),
                endpoints: (sample.target.first(), sample.target.last()),
                recommendation: None,
                walks_found: 1,
                fallback_used: false,
            })
        };
        let report = evaluate(planner, &split, MiouMode::PerBatch(2), 0).unwrap();
        assert_eq!(report.success_rate, 1.0);
        assert_eq!(report.mean_accuracy, 1.0);
        assert_eq!(report.mean_iou, 1.0);
    }

    fn pair_strategy() -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
        (1usize..8).prop_flat_map(|len| {
            (
                proptest::collection::vec(0u32..5, len),
                proptest::collection::vec(0u32..5, len),
            )
        })
    }

    proptest! {
        #[test]
        fn per_sample_sr_bounds_macc(pairs in proptest::collection::vec(pair_strategy(), 1..20)) {
            let preds: Vec<Vec<u32>> = pairs.iter().map(|(p, _)| p.clone()).collect();
            let gts: Vec<Vec<u32>> = pairs.iter().map(|(_, g)| g.clone()).collect();
            let sr = success_rate(&preds, &gts).unwrap();
            let macc = mean_accuracy(&preds, &gts).unwrap();
            prop_assert!(sr <= macc + 1e-12);
            // On exact matches all three metrics are 1.
            for (p, g) in &pairs {
                if p == g {
                    let one = miou(&[p.clone()], &[g.clone()], MiouMode::PerSequence).unwrap();
                    prop_assert_eq!(one, 1.0);
                }
            }
        }

        #[test]
        fn permuting_prediction_keeps_per_sequence_miou(
            (pred, gt) in pair_strategy(),
            rotation in 0usize..8,
        ) {
            let mut rotated = pred.clone();
            rotated.rotate_left(rotation % pred.len().max(1));
            let a = miou(&[pred], &[gt.clone()], MiouMode::PerSequence).unwrap();
            let b = miou(&[rotated], &[gt], MiouMode::PerSequence).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn batch_size_one_equals_per_sequence(pairs in proptest::collection::vec(pair_strategy(), 1..15)) {
            let preds: Vec<Vec<u32>> = pairs.iter().map(|(p, _)| p.clone()).collect();
            let gts: Vec<Vec<u32>> = pairs.iter().map(|(_, g)| g.clone()).collect();
            let a = miou(&preds, &gts, MiouMode::PerSequence).unwrap();
            let b = miou(&preds, &gts, MiouMode::PerBatch(1)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
