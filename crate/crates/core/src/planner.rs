//! End-to-end planning: a step model predicting the first and last actions
//! from the start/goal observations, recommendation retrieval between those
//! endpoints, and a planning model denoising the full action sequence. Also
//! hosts the parameter-free zero-shot planner (emit the top graph walk
//! directly) and training-set assembly, including the ground-truth endpoint
//! augmentation ablation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ActionId, Observation, PlanCorpus, PlanSequence};
use crate::diffusion::{
    sample, CellKind, ConditionMatrix, DenoiserCheckpoint, Grid, GridLayout, LossWeights,
    MlpDenoiser, NoiseSchedule, TrainConfig, TrainReport,
};
use crate::error::{Error, Result};
use crate::graph::ProbabilisticGraph;
use crate::retrieval::{
    fallback_paths, pad_walk, walk_iter, recommendation, Recommendation, RecommendationMatrix,
    RetrievalConfig,
};

/// Shape and schedule parameters shared by both diffusion models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub observation_dim: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub diffusion_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub hidden_dim: usize,
    pub time_embed_dim: usize,
}

impl ModelSpec {
    fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::InvalidConfig("horizon must be >= 2".to_string()));
        }
        if self.observation_dim == 0 || self.num_actions == 0 {
            return Err(Error::InvalidConfig(
                "observation_dim and num_actions must be positive".to_string(),
            ));
        }
        Ok(())
    }

    fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.diffusion_steps, self.beta_start, self.beta_end)
    }
}

// Observation rows: features at the first and last columns, zero-padded in
// between. Shared by every layout.
fn push_observation_rows(kinds: &mut Vec<CellKind>, obs_dim: usize, horizon: usize) {
    for _ in 0..obs_dim {
        for col in 0..horizon {
            kinds.push(if col == 0 || col == horizon - 1 {
                CellKind::Observation
            } else {
                CellKind::ZeroPad
            });
        }
    }
}

/// Step-model layout: observation rows over action rows whose interior
/// columns are zero-padded, so only the endpoint actions are denoised.
pub fn step_layout(obs_dim: usize, num_actions: usize, horizon: usize) -> Result<GridLayout> {
    let rows = obs_dim + num_actions;
    let mut kinds = Vec::with_capacity(rows * horizon);
    push_observation_rows(&mut kinds, obs_dim, horizon);
    for _ in 0..num_actions {
        for col in 0..horizon {
            kinds.push(if col == 0 || col == horizon - 1 {
                CellKind::Action
            } else {
                CellKind::ZeroPad
            });
        }
    }
    GridLayout::new(rows, horizon, kinds, obs_dim..rows)
}

/// Planning-model layout: observation rows, recommendation rows (all fixed
/// by projection), then fully denoised action rows.
pub fn planning_layout(obs_dim: usize, num_actions: usize, horizon: usize) -> Result<GridLayout> {
    let rows = obs_dim + 2 * num_actions;
    let mut kinds = Vec::with_capacity(rows * horizon);
    push_observation_rows(&mut kinds, obs_dim, horizon);
    for _ in 0..num_actions {
        kinds.extend(std::iter::repeat(CellKind::Recommendation).take(horizon));
    }
    for _ in 0..num_actions {
        kinds.extend(std::iter::repeat(CellKind::Action).take(horizon));
    }
    GridLayout::new(rows, horizon, kinds, (obs_dim + num_actions)..rows)
}

/// Ablation layout without the recommendation block: observations condition
/// the model and every action column is denoised.
pub fn unconditioned_layout(
    obs_dim: usize,
    num_actions: usize,
    horizon: usize,
) -> Result<GridLayout> {
    let rows = obs_dim + num_actions;
    let mut kinds = Vec::with_capacity(rows * horizon);
    push_observation_rows(&mut kinds, obs_dim, horizon);
    for _ in 0..num_actions {
        kinds.extend(std::iter::repeat(CellKind::Action).take(horizon));
    }
    GridLayout::new(rows, horizon, kinds, obs_dim..rows)
}

fn check_observation(obs: &Observation, dim: usize) -> Result<()> {
    if obs.dim() != dim {
        return Err(Error::ShapeMismatch(format!(
            "observation dim {} != expected {dim}",
            obs.dim()
        )));
    }
    Ok(())
}

fn fill_observation_cells(values: &mut Grid, v_s: &Observation, v_g: &Observation, horizon: usize) {
    for (row, (&s, &g)) in v_s.features.iter().zip(&v_g.features).enumerate() {
        values.set(row, 0, s);
        values.set(row, horizon - 1, g);
    }
}

/// Eq.-style step template: `[v_s, 0, ..., 0, v_g]` over zero action cells.
pub fn build_step_template(
    v_s: &Observation,
    v_g: &Observation,
    num_actions: usize,
    horizon: usize,
) -> Result<ConditionMatrix> {
    check_observation(v_g, v_s.dim())?;
    let layout = step_layout(v_s.dim(), num_actions, horizon)?;
    let mut values = Grid::zeros(layout.rows(), layout.cols());
    fill_observation_cells(&mut values, v_s, v_g, horizon);
    ConditionMatrix::new(layout, values)
}

/// Planning template with the recommendation distribution transposed into
/// its condition rows.
pub fn build_planning_template(
    v_s: &Observation,
    v_g: &Observation,
    rec: &RecommendationMatrix,
    horizon: usize,
) -> Result<ConditionMatrix> {
    check_observation(v_g, v_s.dim())?;
    if rec.horizon() != horizon {
        return Err(Error::ShapeMismatch(format!(
            "recommendation horizon {} != {horizon}",
            rec.horizon()
        )));
    }
    let num_actions = rec.num_actions();
    let obs_dim = v_s.dim();
    let layout = planning_layout(obs_dim, num_actions, horizon)?;
    let mut values = Grid::zeros(layout.rows(), layout.cols());
    fill_observation_cells(&mut values, v_s, v_g, horizon);
    for (t, row) in rec.rows().iter().enumerate() {
        for (a, &p) in row.iter().enumerate() {
            values.set(obs_dim + a, t, p);
        }
    }
    ConditionMatrix::new(layout, values)
}

/// Template for the unconditioned ablation planner.
pub fn build_unconditioned_template(
    v_s: &Observation,
    v_g: &Observation,
    num_actions: usize,
    horizon: usize,
) -> Result<ConditionMatrix> {
    check_observation(v_g, v_s.dim())?;
    let layout = unconditioned_layout(v_s.dim(), num_actions, horizon)?;
    let mut values = Grid::zeros(layout.rows(), layout.cols());
    fill_observation_cells(&mut values, v_s, v_g, horizon);
    ConditionMatrix::new(layout, values)
}

// Writes one-hot action targets into the action rows of a template, turning
// it into a training sample.
fn set_action_targets(
    template: &ConditionMatrix,
    steps: &[(usize, ActionId)],
    action_row_start: usize,
) -> Result<ConditionMatrix> {
    let mut values = template.values().clone();
    for &(col, action) in steps {
        values.set(action_row_start + action.index(), col, 1.0);
    }
    ConditionMatrix::new(template.layout().clone(), values)
}

fn decode_column(grid: &Grid, action_rows: std::ops::Range<usize>, col: usize) -> ActionId {
    let mut best = action_rows.start;
    for row in action_rows.clone() {
        if grid.get(row, col) > grid.get(best, col) {
            best = row;
        }
    }
    ActionId((best - action_rows.start) as u32)
}

/// Diffusion model that predicts only the endpoint actions.
#[derive(Debug, Clone)]
pub struct StepModel {
    spec: ModelSpec,
    schedule: NoiseSchedule,
    denoiser: MlpDenoiser,
}

impl StepModel {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layout = step_layout(spec.observation_dim, spec.num_actions, spec.horizon)?;
        let denoiser = MlpDenoiser::new(
            layout.rows(),
            layout.cols(),
            spec.hidden_dim,
            spec.time_embed_dim,
            seed,
        )?;
        Ok(Self {
            schedule: spec.schedule()?,
            spec,
            denoiser,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn template(&self, v_s: &Observation, v_g: &Observation) -> Result<ConditionMatrix> {
        check_observation(v_s, self.spec.observation_dim)?;
        build_step_template(v_s, v_g, self.spec.num_actions, self.spec.horizon)
    }

    /// Training sample: the template plus one-hot endpoint targets.
    pub fn training_sample(
        &self,
        v_s: &Observation,
        v_g: &Observation,
        first: ActionId,
        last: ActionId,
    ) -> Result<ConditionMatrix> {
        let template = self.template(v_s, v_g)?;
        set_action_targets(
            &template,
            &[(0, first), (self.spec.horizon - 1, last)],
            self.spec.observation_dim,
        )
    }

    pub fn train(&mut self, dataset: &[ConditionMatrix], config: &TrainConfig) -> Result<TrainReport> {
        let weights =
            LossWeights::endpoint_weighted(self.spec.horizon, LossWeights::STEP_ENDPOINT_WEIGHT);
        crate::diffusion::train(&mut self.denoiser, dataset, &self.schedule, &weights, config)
    }

    /// Samples a grid and decodes the endpoint columns by argmax.
    pub fn predict_endpoints(
        &self,
        v_s: &Observation,
        v_g: &Observation,
        seed: u64,
    ) -> Result<(ActionId, ActionId)> {
        let template = self.template(v_s, v_g)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = sample(&self.denoiser, &template, &self.schedule, &mut rng)?;
        let rows = template.layout().action_rows();
        let first = decode_column(&grid, rows.clone(), 0);
        let last = decode_column(&grid, rows, self.spec.horizon - 1);
        Ok((first, last))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            kind: ModelKind::Step,
            spec: self.spec.clone(),
            conditioned: true,
            checkpoint: self.denoiser.to_checkpoint(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.kind != ModelKind::Step {
            return Err(Error::InvalidConfig(
                "checkpoint is not a step model".to_string(),
            ));
        }
        file.spec.validate()?;
        Ok(Self {
            schedule: file.spec.schedule()?,
            denoiser: MlpDenoiser::from_checkpoint(&file.checkpoint)?,
            spec: file.spec,
        })
    }
}

/// Diffusion model that denoises the full action sequence, optionally
/// conditioned on a graph recommendation.
#[derive(Debug, Clone)]
pub struct PlanningModel {
    spec: ModelSpec,
    conditioned: bool,
    schedule: NoiseSchedule,
    denoiser: MlpDenoiser,
}

impl PlanningModel {
    pub fn new(spec: ModelSpec, conditioned: bool, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layout = if conditioned {
            planning_layout(spec.observation_dim, spec.num_actions, spec.horizon)?
        } else {
            unconditioned_layout(spec.observation_dim, spec.num_actions, spec.horizon)?
        };
        let denoiser = MlpDenoiser::new(
            layout.rows(),
            layout.cols(),
            spec.hidden_dim,
            spec.time_embed_dim,
            seed,
        )?;
        Ok(Self {
            schedule: spec.schedule()?,
            spec,
            conditioned,
            denoiser,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn is_conditioned(&self) -> bool {
        self.conditioned
    }

    fn action_row_start(&self) -> usize {
        if self.conditioned {
            self.spec.observation_dim + self.spec.num_actions
        } else {
            self.spec.observation_dim
        }
    }

    pub fn template(
        &self,
        v_s: &Observation,
        v_g: &Observation,
        rec: Option<&RecommendationMatrix>,
    ) -> Result<ConditionMatrix> {
        check_observation(v_s, self.spec.observation_dim)?;
        match (self.conditioned, rec) {
            (true, Some(rec)) => {
                if rec.num_actions() != self.spec.num_actions {
                    return Err(Error::ShapeMismatch(format!(
                        "recommendation over {} actions, model expects {}",
                        rec.num_actions(),
                        self.spec.num_actions
                    )));
                }
                build_planning_template(v_s, v_g, rec, self.spec.horizon)
            }
            (false, None) => build_unconditioned_template(
                v_s,
                v_g,
                self.spec.num_actions,
                self.spec.horizon,
            ),
            (true, None) => Err(Error::InvalidConfig(
                "conditioned model needs a recommendation".to_string(),
            )),
            (false, Some(_)) => Err(Error::InvalidConfig(
                "unconditioned model takes no recommendation".to_string(),
            )),
        }
    }

    /// Training sample: the template plus the full one-hot plan target.
    pub fn training_sample(
        &self,
        v_s: &Observation,
        v_g: &Observation,
        rec: Option<&RecommendationMatrix>,
        plan: &[ActionId],
    ) -> Result<ConditionMatrix> {
        if plan.len() != self.spec.horizon {
            return Err(Error::LengthMismatch(format!(
                "plan of {} steps for horizon {}",
                plan.len(),
                self.spec.horizon
            )));
        }
        let template = self.template(v_s, v_g, rec)?;
        let targets: Vec<(usize, ActionId)> =
            plan.iter().copied().enumerate().collect();
        set_action_targets(&template, &targets, self.action_row_start())
    }

    pub fn train(&mut self, dataset: &[ConditionMatrix], config: &TrainConfig) -> Result<TrainReport> {
        let weights = LossWeights::endpoint_weighted(
            self.spec.horizon,
            LossWeights::PLANNING_ENDPOINT_WEIGHT,
        );
        crate::diffusion::train(&mut self.denoiser, dataset, &self.schedule, &weights, config)
    }

    /// Samples a grid and decodes every action column by argmax.
    pub fn sample_plan(
        &self,
        v_s: &Observation,
        v_g: &Observation,
        rec: Option<&RecommendationMatrix>,
        seed: u64,
    ) -> Result<Vec<ActionId>> {
        let template = self.template(v_s, v_g, rec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = sample(&self.denoiser, &template, &self.schedule, &mut rng)?;
        let rows = template.layout().action_rows();
        Ok((0..self.spec.horizon)
            .map(|col| decode_column(&grid, rows.clone(), col))
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            kind: ModelKind::Planning,
            spec: self.spec.clone(),
            conditioned: self.conditioned,
            checkpoint: self.denoiser.to_checkpoint(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.kind != ModelKind::Planning {
            return Err(Error::InvalidConfig(
                "checkpoint is not a planning model".to_string(),
            ));
        }
        file.spec.validate()?;
        Ok(Self {
            schedule: file.spec.schedule()?,
            denoiser: MlpDenoiser::from_checkpoint(&file.checkpoint)?,
            conditioned: file.conditioned,
            spec: file.spec,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModelKind {
    Step,
    Planning,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    kind: ModelKind,
    spec: ModelSpec,
    conditioned: bool,
    checkpoint: DenoiserCheckpoint,
}

/// A produced plan with its provenance.
#[derive(Debug, Clone, Serialize)]
pub struct PlanResult {
    pub steps: Vec<ActionId>,
    pub endpoints: (ActionId, ActionId),
    pub recommendation: Option<RecommendationMatrix>,
    pub walks_found: usize,
    pub fallback_used: bool,
}

/// Full inference: predict endpoints, retrieve a recommendation between
/// them, and denoise the plan under that condition.
pub fn plan(
    step_model: &StepModel,
    planning_model: &PlanningModel,
    graph: &ProbabilisticGraph,
    v_s: &Observation,
    v_g: &Observation,
    config: &RetrievalConfig,
    seed: u64,
) -> Result<PlanResult> {
    let endpoints = step_model.predict_endpoints(v_s, v_g, seed)?;
    plan_with_endpoints(planning_model, graph, endpoints, v_s, v_g, config, seed)
}

/// Inference with externally supplied endpoints (the flawless-step-model
/// oracle mode).
pub fn plan_with_endpoints(
    planning_model: &PlanningModel,
    graph: &ProbabilisticGraph,
    endpoints: (ActionId, ActionId),
    v_s: &Observation,
    v_g: &Observation,
    config: &RetrievalConfig,
    seed: u64,
) -> Result<PlanResult> {
    let (rec, steps) = if planning_model.is_conditioned() {
        let rec = recommendation(graph, endpoints.0, endpoints.1, config)?;
        let steps = planning_model.sample_plan(v_s, v_g, Some(&rec.matrix), seed)?;
        (Some(rec), steps)
    } else {
        let steps = planning_model.sample_plan(v_s, v_g, None, seed)?;
        (None, steps)
    };
    let (walks_found, fallback_used, matrix) = match rec {
        Some(Recommendation {
            matrix,
            walks_found,
            fallback_used,
            ..
        }) => (walks_found, fallback_used, Some(matrix)),
        None => (0, false, None),
    };
    Ok(PlanResult {
        steps,
        endpoints,
        recommendation: matrix,
        walks_found,
        fallback_used,
    })
}

/// Parameter-free planner: the first padding variant of the most probable
/// walk between the endpoints, or the endpoint-repetition fallback when the
/// graph has no connecting walk.
pub fn zero_shot_plan(
    graph: &ProbabilisticGraph,
    start: ActionId,
    end: ActionId,
    horizon: usize,
) -> Result<PlanSequence> {
    match walk_iter(graph, start, end, horizon)?.next() {
        Some(walk) => {
            let variants = pad_walk(&walk, horizon)?;
            Ok(variants.into_iter().next().expect("padding never empty"))
        }
        None => {
            let mut paths = fallback_paths(start, end, horizon, 1)?;
            Ok(paths.remove(0))
        }
    }
}

/// Where planning-model conditions get their endpoints during training.
#[derive(Debug, Clone, Copy)]
pub enum EndpointSource<'a> {
    /// Endpoints predicted by a trained step model (the default regime).
    Predicted(&'a StepModel),
    /// Ground-truth endpoints from the corpus.
    GroundTruth,
}

/// Step-model training set: one endpoint-target grid per plan whose length
/// matches the horizon.
pub fn make_step_training_set(
    corpus: &PlanCorpus,
    observations: &[(Observation, Observation)],
    spec: &ModelSpec,
) -> Result<Vec<ConditionMatrix>> {
    let proto = StepModel::new(spec.clone(), 0)?;
    let mut out = Vec::new();
    for (plan, (v_s, v_g)) in matched_plans(corpus, observations, spec.horizon)? {
        out.push(proto.training_sample(v_s, v_g, plan.first(), plan.last())?);
    }
    Ok(out)
}

/// Planning-model training set. Conditions come from retrieval between the
/// chosen endpoints; with `gt_augment` every sample expands into the four
/// endpoint combinations over {predicted, ground-truth}.
pub fn make_planning_training_set(
    corpus: &PlanCorpus,
    observations: &[(Observation, Observation)],
    graph: &ProbabilisticGraph,
    model: &PlanningModel,
    config: &RetrievalConfig,
    endpoints: EndpointSource,
    gt_augment: bool,
    seed: u64,
) -> Result<Vec<ConditionMatrix>> {
    let horizon = model.spec().horizon;
    let mut out = Vec::new();
    for (i, (plan, (v_s, v_g))) in matched_plans(corpus, observations, horizon)?
        .into_iter()
        .enumerate()
    {
        let gt = (plan.first(), plan.last());
        let predicted = match endpoints {
            EndpointSource::Predicted(step_model) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                step_model.predict_endpoints(v_s, v_g, derive_seed(&mut rng))?
            }
            EndpointSource::GroundTruth => gt,
        };
        let variants: Vec<(ActionId, ActionId)> = if gt_augment {
            vec![
                predicted,
                (predicted.0, gt.1),
                (gt.0, predicted.1),
                gt,
            ]
        } else {
            vec![predicted]
        };
        for (first, last) in variants {
            let rec = if model.is_conditioned() {
                Some(recommendation(graph, first, last, config)?.matrix)
            } else {
                None
            };
            out.push(model.training_sample(v_s, v_g, rec.as_ref(), &plan.steps)?);
        }
    }
    Ok(out)
}

/// Assembles both training sets in one pass (step grids carry ground-truth
/// endpoint targets; planning grids are conditioned per `endpoints`).
pub fn make_training_sets(
    corpus: &PlanCorpus,
    observations: &[(Observation, Observation)],
    graph: &ProbabilisticGraph,
    planning_model: &PlanningModel,
    config: &RetrievalConfig,
    endpoints: EndpointSource,
    gt_augment: bool,
    seed: u64,
) -> Result<(Vec<ConditionMatrix>, Vec<ConditionMatrix>)> {
    let step = make_step_training_set(corpus, observations, planning_model.spec())?;
    let planning = make_planning_training_set(
        corpus,
        observations,
        graph,
        planning_model,
        config,
        endpoints,
        gt_augment,
        seed,
    )?;
    Ok((step, planning))
}

fn matched_plans<'a>(
    corpus: &'a PlanCorpus,
    observations: &'a [(Observation, Observation)],
    horizon: usize,
) -> Result<Vec<(&'a PlanSequence, &'a (Observation, Observation))>> {
    if corpus.plans.len() != observations.len() {
        return Err(Error::LengthMismatch(format!(
            "{} plans vs {} observation pairs",
            corpus.plans.len(),
            observations.len()
        )));
    }
    let matched: Vec<_> = corpus
        .plans
        .iter()
        .zip(observations)
        .filter(|(plan, _)| plan.len() == horizon)
        .collect();
    if matched.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no plans of horizon {horizon} in the corpus"
        )));
    }
    Ok(matched)
}

fn derive_seed(rng: &mut ChaCha8Rng) -> u64 {
    use rand::Rng;
    rng.random()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::fixture_corpus;
    use crate::graph::FrequencyGraph;

    fn a(i: u32) -> ActionId {
        ActionId(i)
    }

    fn fixture_graph() -> ProbabilisticGraph {
        FrequencyGraph::from_corpus(&fixture_corpus())
            .unwrap()
            .normalize_probabilistic()
    }

    fn obs(values: &[f64]) -> Observation {
        Observation::new(values.to_vec()).unwrap()
    }

    fn toy_spec(horizon: usize) -> ModelSpec {
        ModelSpec {
            observation_dim: 3,
            num_actions: 4,
            horizon,
            diffusion_steps: 6,
            beta_start: 1e-3,
            beta_end: 0.05,
            hidden_dim: 8,
            time_embed_dim: 4,
        }
    }

    #[test]
    fn step_template_interior_columns_are_fully_zero_padded() {
        let template =
            build_step_template(&obs(&[1.0, 2.0, 3.0]), &obs(&[4.0, 5.0, 6.0]), 4, 4).unwrap();
        let layout = template.layout();
        for row in 0..layout.rows() {
            for col in [1, 2] {
                assert_eq!(layout.kind(row, col), CellKind::ZeroPad);
                assert_eq!(template.values().get(row, col), 0.0);
            }
        }
        assert_eq!(template.values().get(0, 0), 1.0);
        assert_eq!(template.values().get(2, 3), 6.0);
    }

    #[test]
    fn step_template_minimal_horizon_has_no_padding_columns() {
        let template =
            build_step_template(&obs(&[1.0, 2.0]), &obs(&[3.0, 4.0]), 3, 2).unwrap();
        let layout = template.layout();
        for row in 0..layout.rows() {
            for col in 0..2 {
                assert_ne!(layout.kind(row, col), CellKind::ZeroPad);
            }
        }
    }

    #[test]
    fn step_template_accepts_identical_endpoints() {
        let o = obs(&[0.5, 0.5]);
        assert!(build_step_template(&o, &o, 3, 4).is_ok());
    }

    #[test]
    fn templates_reject_dimension_mismatch() {
        assert!(build_step_template(&obs(&[1.0]), &obs(&[1.0, 2.0]), 3, 4).is_err());
        let model = StepModel::new(toy_spec(4), 0).unwrap();
        assert!(model.template(&obs(&[1.0]), &obs(&[1.0])).is_err());
    }

    #[test]
    fn planning_template_pins_recommendation_rows() {
        let graph = fixture_graph();
        let config = RetrievalConfig::new(4, 1).unwrap();
        let rec = recommendation(&graph, a(0), a(3), &config).unwrap();
        let template =
            build_planning_template(&obs(&[1.0, 2.0, 3.0]), &obs(&[4.0, 5.0, 6.0]), &rec.matrix, 4)
                .unwrap();
        let layout = template.layout();
        // Recommendation block sits between observations and actions.
        for t in 0..4 {
            for act in 0..4 {
                assert_eq!(layout.kind(3 + act, t), CellKind::Recommendation);
                assert_eq!(
                    template.values().get(3 + act, t),
                    rec.matrix.rows()[t][act]
                );
            }
        }
        assert_eq!(layout.action_rows(), 7..11);
    }

    #[test]
    fn predict_endpoints_is_deterministic_per_seed() {
        let model = StepModel::new(toy_spec(4), 3).unwrap();
        let v_s = obs(&[0.3, -0.7, 0.2]);
        let v_g = obs(&[-1.0, 0.4, 0.9]);
        let a1 = model.predict_endpoints(&v_s, &v_g, 42).unwrap();
        let a2 = model.predict_endpoints(&v_s, &v_g, 42).unwrap();
        assert_eq!(a1, a2);
    }

    #[test]
    fn zero_shot_matches_fixture_walks() {
        let graph = fixture_graph();
        assert_eq!(
            zero_shot_plan(&graph, a(0), a(3), 4).unwrap().steps,
            vec![a(0), a(1), a(2), a(3)]
        );
        assert_eq!(
            zero_shot_plan(&graph, a(0), a(3), 3).unwrap().steps,
            vec![a(0), a(1), a(3)]
        );
        // Unreachable pair falls back to endpoint repetition.
        assert_eq!(
            zero_shot_plan(&graph, a(3), a(0), 4).unwrap().steps,
            vec![a(3), a(3), a(0), a(0)]
        );
    }

    #[test]
    fn zero_shot_has_queried_endpoints_and_exact_length() {
        let graph = fixture_graph();
        for (s, e) in [(0, 3), (3, 0), (1, 1), (2, 3)] {
            for horizon in 2..=5 {
                let plan = zero_shot_plan(&graph, a(s), a(e), horizon).unwrap();
                assert_eq!(plan.len(), horizon);
                assert_eq!(plan.first(), a(s));
                assert_eq!(plan.last(), a(e));
            }
        }
    }

    #[test]
    fn plan_sets_fallback_flag_for_unreachable_endpoints() {
        let graph = fixture_graph();
        let planning = PlanningModel::new(toy_spec(4), true, 1).unwrap();
        let config = RetrievalConfig::new(4, 1).unwrap();
        let v_s = obs(&[0.1, 0.2, 0.3]);
        let v_g = obs(&[0.4, 0.5, 0.6]);
        let result =
            plan_with_endpoints(&planning, &graph, (a(3), a(0)), &v_s, &v_g, &config, 7).unwrap();
        assert!(result.fallback_used);
        assert_eq!(result.walks_found, 0);
        assert_eq!(result.steps.len(), 4);
    }

    #[test]
    fn model_json_round_trip_preserves_behavior() {
        let model = StepModel::new(toy_spec(4), 5).unwrap();
        let json = model.to_json().unwrap();
        let back = StepModel::from_json(&json).unwrap();
        let v_s = obs(&[0.3, -0.7, 0.2]);
        let v_g = obs(&[-1.0, 0.4, 0.9]);
        assert_eq!(
            model.predict_endpoints(&v_s, &v_g, 9).unwrap(),
            back.predict_endpoints(&v_s, &v_g, 9).unwrap()
        );

        let planning = PlanningModel::new(toy_spec(4), false, 2).unwrap();
        let json = planning.to_json().unwrap();
        let back = PlanningModel::from_json(&json).unwrap();
        assert_eq!(
            planning.sample_plan(&v_s, &v_g, None, 3).unwrap(),
            back.sample_plan(&v_s, &v_g, None, 3).unwrap()
        );

        assert!(StepModel::from_json(&planning.to_json().unwrap()).is_err());
    }

    #[test]
    fn gt_augmentation_quadruples_the_planning_set() {
        let corpus = fixture_corpus();
        let graph = fixture_graph();
        // Observations aligned with the three fixture plans.
        let observations: Vec<_> = (0..3)
            .map(|i| {
                (
                    obs(&[i as f64, 0.0, 1.0]),
                    obs(&[0.0, i as f64, -1.0]),
                )
            })
            .collect();
        let spec = ModelSpec {
            horizon: 3,
            ..toy_spec(3)
        };
        let model = PlanningModel::new(spec.clone(), true, 0).unwrap();
        let step_model = StepModel::new(spec, 1).unwrap();
        let config = RetrievalConfig::new(3, 1).unwrap();

        let plain = make_planning_training_set(
            &corpus,
            &observations,
            &graph,
            &model,
            &config,
            EndpointSource::Predicted(&step_model),
            false,
            11,
        )
        .unwrap();
        assert_eq!(plain.len(), 3);

        let augmented = make_planning_training_set(
            &corpus,
            &observations,
            &graph,
            &model,
            &config,
            EndpointSource::Predicted(&step_model),
            true,
            11,
        )
        .unwrap();
        assert_eq!(augmented.len(), 12);
    }

    #[test]
    fn gt_endpoint_source_collapses_augmentation_variants() {
        let corpus = fixture_corpus();
        let graph = fixture_graph();
        let observations: Vec<_> = (0..3)
            .map(|i| (obs(&[i as f64, 0.0, 1.0]), obs(&[0.0, i as f64, -1.0])))
            .collect();
        let spec = ModelSpec {
            horizon: 3,
            ..toy_spec(3)
        };
        let model = PlanningModel::new(spec, true, 0).unwrap();
        let config = RetrievalConfig::new(3, 1).unwrap();
        let augmented = make_planning_training_set(
            &corpus,
            &observations,
            &graph,
            &model,
            &config,
            EndpointSource::GroundTruth,
            true,
            0,
        )
        .unwrap();
        // All four variants share the ground-truth endpoints, so the grids
        // within each group of four are identical.
        for group in augmented.chunks(4) {
            for sample in &group[1..] {
                assert_eq!(sample, &group[0]);
            }
        }
    }

    #[test]
    fn training_set_requires_matching_observation_count() {
        let corpus = fixture_corpus();
        let spec = ModelSpec {
            horizon: 3,
            ..toy_spec(3)
        };
        let err = make_step_training_set(&corpus, &[], &spec).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch(_)));
    }
}
