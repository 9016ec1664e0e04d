//! Sequential vs rayon-parallel batch evaluation on the two workload shapes
//! that dominate in practice: retrieval-bound zero-shot planning and
//! diffusion-bound model sampling.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use procplan_core::corpus::{generate_synthetic_corpus, SyntheticSpec, TemplateSpec};
use procplan_core::eval::{evaluate_par, evaluate_seq, EvalSample, MiouMode};
use procplan_core::graph::FrequencyGraph;
use procplan_core::planner::{
    plan_with_endpoints, zero_shot_plan, ModelSpec, PlanResult, PlanningModel,
};
use procplan_core::retrieval::RetrievalConfig;

fn bench_spec(num_templates: usize, horizon: usize) -> SyntheticSpec {
    let templates = (0..num_templates)
        .map(|t| TemplateSpec {
            task: Some(format!("task{t}")),
            steps: (0..horizon).map(|s| format!("a{}", t * horizon + s)).collect(),
            weight: 1.0,
        })
        .collect();
    SyntheticSpec {
        templates,
        num_plans: 256,
        observation_dim: 8,
        noise_sigma: 0.0,
        embedding: Default::default(),
    }
}

fn build_split(spec: &SyntheticSpec) -> (procplan_core::graph::ProbabilisticGraph, Vec<EvalSample>) {
    let (corpus, observations) = generate_synthetic_corpus(spec, 17).unwrap();
    let graph = FrequencyGraph::from_corpus(&corpus)
        .unwrap()
        .normalize_probabilistic();
    let split: Vec<EvalSample> = corpus
        .plans
        .iter()
        .zip(&observations)
        .map(|(plan, (s, g))| EvalSample {
            start: s.clone(),
            goal: g.clone(),
            target: plan.clone(),
        })
        .collect();
    (graph, split)
}

fn zero_shot_eval(c: &mut Criterion) {
    let spec = bench_spec(6, 4);
    let (graph, split) = build_split(&spec);
    let planner = |sample: &EvalSample, _seed: u64| {
        let plan = zero_shot_plan(&graph, sample.target.first(), sample.target.last(), 4)?;
        Ok(PlanResult {
            endpoints: (plan.first(), plan.last()),
            steps: plan.steps,
            recommendation: None,
            walks_found: 1,
            fallback_used: false,
        })
    };

    let mut group = c.benchmark_group("zero_shot_eval");
    group.bench_with_input(BenchmarkId::new("seq", split.len()), &split, |b, split| {
        b.iter(|| evaluate_seq(planner, split, MiouMode::PerSequence, 3).unwrap())
    });
    group.bench_with_input(BenchmarkId::new("par", split.len()), &split, |b, split| {
        b.iter(|| evaluate_par(planner, split, MiouMode::PerSequence, 3).unwrap())
    });
    group.finish();
}

fn diffusion_eval(c: &mut Criterion) {
    let spec = bench_spec(5, 4);
    let (graph, split) = build_split(&spec);
    let split = &split[..64];
    let model_spec = ModelSpec {
        observation_dim: 8,
        num_actions: 20,
        horizon: 4,
        diffusion_steps: 24,
        beta_start: 1e-4,
        beta_end: 0.02,
        hidden_dim: 64,
        time_embed_dim: 16,
    };
    // Untrained weights; sampling cost is identical either way.
    let model = PlanningModel::new(model_spec, true, 5).unwrap();
    let config = RetrievalConfig::new(4, 2).unwrap();
    let planner = |sample: &EvalSample, seed: u64| {
        plan_with_endpoints(
            &model,
            &graph,
            (sample.target.first(), sample.target.last()),
            &sample.start,
            &sample.goal,
            &config,
            seed,
        )
    };

    let mut group = c.benchmark_group("diffusion_eval");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("seq", split.len()), &split, |b, split| {
        b.iter(|| evaluate_seq(planner, split, MiouMode::PerSequence, 3).unwrap())
    });
    group.bench_with_input(BenchmarkId::new("par", split.len()), &split, |b, split| {
        b.iter(|| evaluate_par(planner, split, MiouMode::PerSequence, 3).unwrap())
    });
    group.finish();
}

criterion_group!(benches, zero_shot_eval, diffusion_eval);
criterion_main!(benches);
