//! Deterministic synthetic tool environment and toy categorical policy.
//!
//! Each query is a four-option multiple-choice item with a hidden correct
//! option. The agent acts at phase level: it picks one macro-action at a
//! time from a tabular softmax policy whose state is the last emitted phase
//! plus whether a tool has revealed the answer so far. Every macro-action
//! renders to tagged text, so rollouts go through the same parser and
//! reward as real transcripts.
//!
//! Tool outcomes are drawn once per query (pre-extracted tool outputs), so
//! repeating a call returns the same response.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, RunConfig};
use crate::grpo::{
    group_advantages, policy_gradient_step, surrogate_objective, PolicyRole, PolicySnapshot, Step,
    Trajectory, TrajectoryGroup,
};
use crate::reward::{RewardBreakdown, RewardEngine};
use crate::structure::Template;
use crate::transcript::{parse_transcript, CorpusRecord, ToolRegistry, Transcript};

pub const OPTIONS: [char; 4] = ['A', 'B', 'C', 'D'];

/// Dataset labels assigned round-robin to generated samples.
pub const DATASETS: [&str; 4] = ["sim_a", "sim_b", "sim_c", "sim_d"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    /// Probability that a call succeeds.
    pub reliability: f64,
    /// Probability that a successful response reveals the correct option.
    pub informativeness: f64,
}

impl ToolSpec {
    fn new(name: &str, reliability: f64, informativeness: f64) -> Self {
        Self {
            name: name.into(),
            reliability,
            informativeness,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub tools: Vec<ToolSpec>,
    /// Probability that a query can be answered correctly without evidence.
    pub prior_answerable: f64,
    /// Initial logit bonus on the format's canonical next phase.
    pub format_prior: f64,
}

pub const FORMAT_PRIOR: f64 = 2.5;

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            tools: vec![
                ToolSpec::new("captioning_tool", 0.85, 0.3),
                ToolSpec::new("ocr_tool", 0.5, 0.1),
                ToolSpec::new("detection_tool", 0.7, 0.25),
                ToolSpec::new("perception_tool", 0.9, 0.8),
            ],
            prior_answerable: 0.25,
            format_prior: FORMAT_PRIOR,
        }
    }
}

impl EnvConfig {
    pub fn registry(&self) -> ToolRegistry {
        ToolRegistry::new(self.tools.iter().map(|t| t.name.clone())).expect("environment has tools")
    }

    pub fn num_actions(&self) -> usize {
        self.tools.len() + OPTIONS.len() + 4
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolEvidence {
    pub success: bool,
    pub reveals_answer: bool,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryInstance {
    pub sample_id: String,
    pub dataset: String,
    /// Index into [`OPTIONS`].
    pub correct: usize,
    pub prior_answerable: bool,
    /// One entry per environment tool, in [`EnvConfig::tools`] order.
    pub evidence: Vec<ToolEvidence>,
}

impl QueryInstance {
    pub fn generate(sample_id: String, dataset: String, env: &EnvConfig, rng: &mut impl Rng) -> Self {
        let correct = rng.gen_range(0..OPTIONS.len());
        let prior_answerable = rng.gen_bool(env.prior_answerable);
        let evidence = env
            .tools
            .iter()
            .map(|tool| {
                let success = rng.gen_bool(tool.reliability);
                let reveals_answer = success && rng.gen_bool(tool.informativeness);
                let message = match (success, reveals_answer) {
                    (true, true) => format!(
                        "the image supports option ({}) {}",
                        OPTIONS[correct],
                        option_text(correct)
                    ),
                    (true, false) => format!("{} found nothing specific to the question", tool.name),
                    (false, _) => format!(
                        "{} is incapable of processing this image. Please try another tool.",
                        tool.name
                    ),
                };
                ToolEvidence {
                    success,
                    reveals_answer,
                    message,
                }
            })
            .collect();
        Self {
            sample_id,
            dataset,
            correct,
            prior_answerable,
            evidence,
        }
    }

    pub fn ground_truth(&self) -> String {
        OPTIONS[self.correct].to_string()
    }
}

fn option_text(option: usize) -> &'static str {
    ["first choice", "second choice", "third choice", "fourth choice"][option]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MacroAction {
    EmitReasoning,
    CallTool(usize),
    EmitPerception,
    Answer(usize),
    AnswerFromEvidence,
    StopWithoutAnswer,
}

impl MacroAction {
    /// Layout: reasoning, one call per tool, perception, one answer per
    /// option, answer-from-evidence, stop.
    pub fn from_index(index: usize, num_tools: usize) -> Self {
        let answers = num_tools + 2;
        match index {
            0 => MacroAction::EmitReasoning,
            i if i <= num_tools => MacroAction::CallTool(i - 1),
            i if i == num_tools + 1 => MacroAction::EmitPerception,
            i if i < answers + OPTIONS.len() => MacroAction::Answer(i - answers),
            i if i == answers + OPTIONS.len() => MacroAction::AnswerFromEvidence,
            _ => MacroAction::StopWithoutAnswer,
        }
    }

    pub fn index(self, num_tools: usize) -> usize {
        match self {
            MacroAction::EmitReasoning => 0,
            MacroAction::CallTool(k) => 1 + k,
            MacroAction::EmitPerception => num_tools + 1,
            MacroAction::Answer(o) => num_tools + 2 + o,
            MacroAction::AnswerFromEvidence => num_tools + 2 + OPTIONS.len(),
            MacroAction::StopWithoutAnswer => num_tools + 3 + OPTIONS.len(),
        }
    }

    pub fn ends_episode(self) -> bool {
        matches!(
            self,
            MacroAction::Answer(_) | MacroAction::AnswerFromEvidence | MacroAction::StopWithoutAnswer
        )
    }
}

/// Decision points: start; reasoning before any tool call; then reasoning,
/// tool response and perception, each split by whether a tool has revealed
/// the answer.
pub const NUM_STATES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Start,
    Reasoning,
    ToolResponse,
    Perception,
}

/// What the policy conditions on: the last phase and the evidence so far.
#[derive(Clone, Copy, Debug)]
struct Cursor {
    phase: Phase,
    used_tool: bool,
    evidence: bool,
}

impl Cursor {
    const START: Cursor = Cursor {
        phase: Phase::Start,
        used_tool: false,
        evidence: false,
    };

    fn state(self) -> usize {
        let ev = usize::from(self.evidence);
        match self.phase {
            Phase::Start => 0,
            Phase::Reasoning if !self.used_tool => 1,
            Phase::Reasoning => 2 + ev,
            Phase::ToolResponse => 4 + ev,
            Phase::Perception => 6 + ev,
        }
    }

    fn advance(&mut self, action: MacroAction, q: &QueryInstance) {
        match action {
            MacroAction::EmitReasoning => self.phase = Phase::Reasoning,
            MacroAction::CallTool(k) => {
                self.phase = Phase::ToolResponse;
                self.used_tool = true;
                self.evidence |= q.evidence[k].reveals_answer;
            }
            MacroAction::EmitPerception => self.phase = Phase::Perception,
            _ => {}
        }
    }
}

/// Cold-start policy: uniform logits plus `env.format_prior` on the phase
/// the prompted format asks for next (reason, call a tool, read the result,
/// reason again, answer from what was seen).
pub fn initial_policy(env: &EnvConfig) -> PolicySnapshot {
    let num_tools = env.tools.len();
    let mut policy = PolicySnapshot::uniform(PolicyRole::Current, NUM_STATES, env.num_actions());
    let mut favor = |state: usize, action: MacroAction| {
        policy.logits[state][action.index(num_tools)] += env.format_prior;
    };
    favor(0, MacroAction::EmitReasoning);
    for k in 0..num_tools {
        favor(1, MacroAction::CallTool(k));
    }
    for state in [2, 3] {
        favor(state, MacroAction::AnswerFromEvidence);
    }
    for state in [4, 5] {
        favor(state, MacroAction::EmitPerception);
    }
    for state in [6, 7] {
        favor(state, MacroAction::EmitReasoning);
    }
    policy
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub raw: String,
    pub transcript: Transcript,
    pub actions: Vec<MacroAction>,
    pub steps: Vec<Step>,
}

fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Text a macro-action renders to, including the environment's response to
/// a tool call. Returns the option answered, if any.
fn render_action(
    action: MacroAction,
    turn: usize,
    q: &QueryInstance,
    env: &EnvConfig,
    evidence: bool,
    rng: &mut impl Rng,
    out: &mut String,
) -> Option<usize> {
    if !out.is_empty() {
        out.push('\n');
    }
    match action {
        MacroAction::EmitReasoning => {
            out.push_str(&format!(
                "<think_reasoning>Step {turn}: weighing the options for {} and what evidence is still missing.</think_reasoning>",
                q.sample_id
            ));
            None
        }
        MacroAction::CallTool(k) => {
            let call = serde_json::json!({
                "name": env.tools[k].name,
                "arguments": {"image_url": q.sample_id},
            });
            let ev = &q.evidence[k];
            let response = serde_json::json!({"success": ev.success, "message": ev.message});
            out.push_str(&format!("<tool_call>{call}</tool_call>\n<tool_response>{response}</tool_response>"));
            None
        }
        MacroAction::EmitPerception => {
            let note = if evidence {
                "The tool output points to a specific option."
            } else {
                "The tool output does not settle the question."
            };
            out.push_str(&format!("<think_perception>{note}</think_perception>"));
            None
        }
        MacroAction::Answer(o) => {
            push_answer(o, out);
            Some(o)
        }
        MacroAction::AnswerFromEvidence => {
            let o = if evidence || q.prior_answerable {
                q.correct
            } else {
                rng.gen_range(0..OPTIONS.len())
            };
            push_answer(o, out);
            Some(o)
        }
        MacroAction::StopWithoutAnswer => {
            out.push_str("I cannot determine the answer.");
            None
        }
    }
}

fn push_answer(option: usize, out: &mut String) {
    out.push_str(&format!(
        "<answer>\\boxed{{({}) {}}}</answer>",
        OPTIONS[option],
        option_text(option)
    ));
}

/// Samples one episode from `policy`, stopping at an answer, an explicit
/// stop, or after `max_turns` macro-actions.
pub fn rollout(
    policy: &PolicySnapshot,
    q: &QueryInstance,
    env: &EnvConfig,
    registry: &ToolRegistry,
    max_turns: usize,
    rng: &mut impl Rng,
) -> Rollout {
    let num_tools = env.tools.len();
    let mut raw = String::new();
    let mut actions = Vec::new();
    let mut steps = Vec::new();
    let mut cursor = Cursor::START;

    for turn in 0..max_turns {
        let state = cursor.state();
        let log_probs = policy.log_probs(state);
        let probs: Vec<f64> = log_probs.iter().map(|l| l.exp()).collect();
        let index = sample_categorical(&probs, rng);
        let action = MacroAction::from_index(index, num_tools);
        steps.push(Step {
            state,
            action: index,
            logp_old: log_probs[index],
        });
        actions.push(action);

        render_action(action, turn + 1, q, env, cursor.evidence, rng, &mut raw);
        cursor.advance(action, q);
        if action.ends_episode() {
            break;
        }
    }

    let mut transcript = parse_transcript(&raw, registry);
    transcript.sample_id = q.sample_id.clone();
    transcript.dataset = q.dataset.clone();
    transcript.ground_truth = q.ground_truth();
    Rollout {
        raw,
        transcript,
        actions,
        steps,
    }
}

/// Independent generator for a labelled substream of `seed`.
pub fn substream(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let mixed = labels.iter().fold(splitmix(seed), |h, &l| splitmix(h ^ splitmix(l)));
    ChaCha8Rng::seed_from_u64(mixed)
}

const STREAM_QUERY: u64 = 1;
const STREAM_ROLLOUT: u64 = 2;
const STREAM_CORPUS_QUERY: u64 = 3;
const STREAM_CORPUS_ROLLOUT: u64 = 4;

fn make_query(seed: u64, stream: u64, index: usize, env: &EnvConfig) -> QueryInstance {
    let mut rng = substream(seed, &[stream, index as u64]);
    QueryInstance::generate(
        format!("sim-{index:05}"),
        DATASETS[index % DATASETS.len()].to_string(),
        env,
        &mut rng,
    )
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub mean_total_scaled_reward: f64,
    pub mean_struct_reward: f64,
    pub clip_fraction: f64,
    pub kl_value: f64,
    pub z1_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingOutcome {
    pub log: Vec<IterationLog>,
    pub policy: PolicySnapshot,
    pub reference: PolicySnapshot,
}

impl TrainingOutcome {
    pub fn write_log(&self, mut out: impl Write) -> std::io::Result<()> {
        for line in &self.log {
            serde_json::to_writer(&mut out, line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Samples `G` rollouts for every training query under `behavior` and
/// scores them; advantages use the raw total reward.
pub fn sample_groups(
    cfg: &RunConfig,
    engine: &RewardEngine,
    queries: &[QueryInstance],
    behavior: &PolicySnapshot,
) -> Vec<(TrajectoryGroup, Vec<RewardBreakdown>)> {
    queries
        .iter()
        .enumerate()
        .map(|(p, q)| {
            let mut scores = Vec::with_capacity(cfg.grpo.group_size);
            let mut trajectories = Vec::with_capacity(cfg.grpo.group_size);
            for g in 0..cfg.grpo.group_size {
                let mut rng = substream(cfg.seed, &[STREAM_ROLLOUT, p as u64, g as u64]);
                let r = rollout(behavior, q, &cfg.env, engine.registry(), cfg.max_turns, &mut rng);
                let score = engine.score(&r.transcript);
                trajectories.push(Trajectory {
                    steps: r.steps,
                    reward: score.total_raw,
                    advantage: 0.0,
                });
                scores.push(score);
            }
            let rewards: Vec<f64> = trajectories.iter().map(|t| t.reward).collect();
            for (t, a) in trajectories.iter_mut().zip(group_advantages(&rewards, cfg.grpo.delta)) {
                t.advantage = a;
            }
            (
                TrajectoryGroup {
                    query_id: q.sample_id.clone(),
                    trajectories,
                },
                scores,
            )
        })
        .collect()
}

/// Runs the cold-start loop: snapshot the behavior policy, sample `G`
/// rollouts per training query, score, standardize within groups and take
/// one ascent step on the surrogate objective.
///
/// The training set is a fixed set of `batch` queries, and rollout
/// randomness is keyed by (query, group slot), so every iteration replays
/// the same random numbers against the current policy.
pub fn train(cfg: &RunConfig) -> Result<TrainingOutcome, ConfigError> {
    let engine = RewardEngine::new(cfg.reward.clone(), cfg.registry()).map_err(|e| match e {
        crate::reward::RewardError::Invalid(fields) => ConfigError::Invalid(fields),
        other => ConfigError::Invalid(vec![crate::config::FieldError::new("n_norm", other.to_string())]),
    })?;
    cfg.grpo.validate().map_err(ConfigError::Invalid)?;

    let reference = initial_policy(&cfg.env).with_role(PolicyRole::Reference);
    let mut policy = initial_policy(&cfg.env);
    let queries: Vec<QueryInstance> = (0..cfg.batch)
        .map(|i| make_query(cfg.seed, STREAM_QUERY, i, &cfg.env))
        .collect();

    let mut log = Vec::with_capacity(cfg.iterations);
    for iteration in 0..cfg.iterations {
        let behavior = policy.with_role(PolicyRole::Behavior);
        let sampled = sample_groups(cfg, &engine, &queries, &behavior);

        let scores: Vec<&RewardBreakdown> = sampled.iter().flat_map(|(_, s)| s).collect();
        let n = scores.len().max(1) as f64;
        let mean_scaled = scores.iter().map(|s| s.total_scaled).sum::<f64>() / n;
        let mean_struct = scores.iter().map(|s| s.r_struct).sum::<f64>() / n;
        let z1 = scores.iter().filter(|s| s.template == Template::Z1Optimal).count() as f64 / n;

        let groups: Vec<TrajectoryGroup> = sampled.into_iter().map(|(g, _)| g).collect();
        policy = policy_gradient_step(&policy, &reference, &groups, &cfg.grpo);
        let eval = surrogate_objective(&policy, &reference, &groups, &cfg.grpo);

        log.push(IterationLog {
            iteration,
            mean_total_scaled_reward: mean_scaled,
            mean_struct_reward: mean_struct,
            clip_fraction: eval.clip_fraction,
            kl_value: eval.kl,
            z1_fraction: z1,
        });
    }

    Ok(TrainingOutcome {
        log,
        policy,
        reference,
    })
}

/// `n` single-rollout records from `policy`, deterministic under `seed`.
pub fn generate_corpus(cfg: &RunConfig, policy: &PolicySnapshot, n: usize) -> Vec<CorpusRecord> {
    let registry = cfg.registry();
    (0..n)
        .map(|i| {
            let q = make_query(cfg.seed, STREAM_CORPUS_QUERY, i, &cfg.env);
            let mut rng = substream(cfg.seed, &[STREAM_CORPUS_ROLLOUT, i as u64]);
            let r = rollout(policy, &q, &cfg.env, &registry, cfg.max_turns, &mut rng);
            CorpusRecord {
                sample_id: q.sample_id.clone(),
                dataset: q.dataset.clone(),
                ground_truth: q.ground_truth(),
                raw: r.raw,
            }
        })
        .collect()
}

pub fn write_corpus(records: &[CorpusRecord], mut out: impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Policy that deterministically plays `script` (one action per turn),
/// assigning probability ~1 to the scripted action at each visited state.
/// Only valid when no decision state repeats with a different action.
pub fn scripted_policy(env: &EnvConfig, script: &[MacroAction], q: &QueryInstance) -> PolicySnapshot {
    let num_tools = env.tools.len();
    let mut policy = PolicySnapshot::uniform(PolicyRole::Current, NUM_STATES, env.num_actions());
    for row in &mut policy.logits {
        row.iter_mut().for_each(|z| *z = -60.0);
    }
    let mut cursor = Cursor::START;
    for &action in script {
        policy.logits[cursor.state()][action.index(num_tools)] = 60.0;
        cursor.advance(action, q);
    }
    policy
}
