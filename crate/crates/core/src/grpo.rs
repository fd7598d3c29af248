//! Group-relative advantages and the clipped, KL-regularized surrogate
//! objective over categorical (tabular softmax) policies.
//!
//! For a batch of groups, each holding `G` trajectories sampled for the same
//! query under the behavior policy:
//!
//! ```text
//! A_i   = (R_i - mean(R)) / (std(R) + delta)                  population std
//! rho   = exp(log pi(a|s) - log pi_old(a|s))
//! J     = mean_groups[ 1/G sum_i 1/|tau_i| sum_t min(rho A_i, clip(rho, 1-eps_low, 1+eps_high) A_i) ]
//!         - psi * mean_{visited s} KL(pi(.|s) || pi_ref(.|s))
//! ```
//!
//! The gradient with respect to the logits is exact; [`policy_gradient_step`]
//! performs one plain ascent step.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::FieldError;

#[derive(Debug, Error, PartialEq)]
pub enum GrpoError {
    #[error("trajectory {index}: {new} log-probs under the current policy but {old} under the behavior policy")]
    LengthMismatch { index: usize, new: usize, old: usize },
    #[error("{trajectories} trajectories but {advantages} advantages")]
    AdvantageCount {
        trajectories: usize,
        advantages: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub eps_low: f64,
    pub eps_high: f64,
    /// KL coefficient.
    pub psi: f64,
    /// Added to the group standard deviation.
    pub delta: f64,
    pub learning_rate: f64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            eps_low: 0.2,
            eps_high: 0.4,
            psi: 0.001,
            delta: 1e-8,
            learning_rate: 4.0,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), Vec<FieldError>> {
        let mut errors = Vec::new();
        if self.group_size < 2 {
            errors.push(FieldError::new("g", format!("must be >= 2, got {}", self.group_size)));
        }
        for (field, v) in [("eps_low", self.eps_low), ("eps_high", self.eps_high)] {
            if !(v > 0.0 && v <= 1.0) {
                errors.push(FieldError::new(field, format!("must be in (0, 1], got {v}")));
            }
        }
        if !(self.psi >= 0.0 && self.psi.is_finite()) {
            errors.push(FieldError::new("psi", format!("must be >= 0, got {}", self.psi)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            errors.push(FieldError::new("delta", format!("must be > 0, got {}", self.delta)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            errors.push(FieldError::new(
                "learning_rate",
                format!("must be >= 0, got {}", self.learning_rate),
            ));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

/// `(R_i - mean) / (std + delta)` with the population standard deviation.
pub fn group_advantages(rewards: &[f64], delta: f64) -> Vec<f64> {
    if rewards.is_empty() {
        return Vec::new();
    }
    // a summed mean can drift off a constant group by an ulp, which δ would
    // then blow up into a visible advantage
    if rewards.iter().all(|&r| r == rewards[0]) {
        return vec![0.0; rewards.len()];
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + delta;
    rewards.iter().map(|r| (r - mean) / denom).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyRole {
    Current,
    Behavior,
    Reference,
}

/// Tabular softmax policy: one logit row per state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySnapshot {
    pub role: PolicyRole,
    pub logits: Vec<Vec<f64>>,
}

impl PolicySnapshot {
    pub fn uniform(role: PolicyRole, states: usize, actions: usize) -> Self {
        Self {
            role,
            logits: vec![vec![0.0; actions]; states],
        }
    }

    pub fn with_role(&self, role: PolicyRole) -> Self {
        Self {
            role,
            logits: self.logits.clone(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.logits.len()
    }

    pub fn num_actions(&self) -> usize {
        self.logits.first().map_or(0, Vec::len)
    }

    pub fn log_probs(&self, state: usize) -> Vec<f64> {
        let row = &self.logits[state];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        row.iter().map(|z| z - lse).collect()
    }

    pub fn probs(&self, state: usize) -> Vec<f64> {
        self.log_probs(state).into_iter().map(f64::exp).collect()
    }

    pub fn log_prob(&self, state: usize, action: usize) -> f64 {
        self.log_probs(state)[action]
    }

    /// Exact `KL(self(.|s) || other(.|s))`.
    pub fn kl_at(&self, other: &PolicySnapshot, state: usize) -> f64 {
        let lp = self.log_probs(state);
        let lq = other.log_probs(state);
        lp.iter()
            .zip(&lq)
            .map(|(p, q)| p.exp() * (p - q))
            .sum::<f64>()
            .max(0.0)
    }

    /// KL averaged uniformly over `states`; zero when `states` is empty.
    pub fn mean_kl<'a>(&self, other: &PolicySnapshot, states: impl IntoIterator<Item = &'a usize>) -> f64 {
        let (sum, n) = states
            .into_iter()
            .fold((0.0, 0usize), |(s, n), &st| (s + self.kl_at(other, st), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// One sampled decision with its behavior-policy log-probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub logp_old: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub reward: f64,
    pub advantage: f64,
}

/// Sibling trajectories sampled for one query.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryGroup {
    pub query_id: String,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryGroup {
    pub fn assign_advantages(&mut self, delta: f64) {
        let rewards: Vec<f64> = self.trajectories.iter().map(|t| t.reward).collect();
        for (t, a) in self.trajectories.iter_mut().zip(group_advantages(&rewards, delta)) {
            t.advantage = a;
        }
    }
}

/// `min(rho*A, clip(rho, 1-eps_low, 1+eps_high)*A)`.
pub fn clipped_term(ratio: f64, advantage: f64, eps_low: f64, eps_high: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps_low, 1.0 + eps_high);
    (ratio * advantage).min(clipped * advantage)
}

/// True when the clipped branch is selected and its value is flat in rho.
fn clip_active(ratio: f64, advantage: f64, cfg: &GrpoConfig) -> bool {
    (advantage > 0.0 && ratio > 1.0 + cfg.eps_high) || (advantage < 0.0 && ratio < 1.0 - cfg.eps_low)
}

/// Policy term of the objective for one group, from raw log-prob arrays.
pub fn surrogate_policy_term(
    logp_new: &[Vec<f64>],
    logp_old: &[Vec<f64>],
    advantages: &[f64],
    cfg: &GrpoConfig,
) -> Result<f64, GrpoError> {
    if logp_new.len() != logp_old.len() || logp_new.len() != advantages.len() {
        return Err(GrpoError::AdvantageCount {
            trajectories: logp_new.len().max(logp_old.len()),
            advantages: advantages.len(),
        });
    }
    if advantages.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (i, ((new, old), &adv)) in logp_new.iter().zip(logp_old).zip(advantages).enumerate() {
        if new.len() != old.len() {
            return Err(GrpoError::LengthMismatch {
                index: i,
                new: new.len(),
                old: old.len(),
            });
        }
        if new.is_empty() {
            continue;
        }
        let sum: f64 = new
            .iter()
            .zip(old)
            .map(|(n, o)| clipped_term((n - o).exp(), adv, cfg.eps_low, cfg.eps_high))
            .sum();
        total += sum / new.len() as f64;
    }
    Ok(total / advantages.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveEval {
    pub objective: f64,
    pub policy_term: f64,
    pub kl: f64,
    /// Fraction of steps where clipping zeroes the gradient.
    pub clip_fraction: f64,
}

fn visited_states(groups: &[TrajectoryGroup]) -> BTreeSet<usize> {
    groups
        .iter()
        .flat_map(|g| &g.trajectories)
        .flat_map(|t| &t.steps)
        .map(|s| s.state)
        .collect()
}

/// Walks every step with its weight in the objective, ratio and advantage.
fn for_each_step(
    policy: &PolicySnapshot,
    groups: &[TrajectoryGroup],
    mut f: impl FnMut(&Step, f64, f64, f64, &[f64]),
) {
    let live: Vec<&TrajectoryGroup> = groups.iter().filter(|g| !g.trajectories.is_empty()).collect();
    if live.is_empty() {
        return;
    }
    let per_group = 1.0 / live.len() as f64;
    for group in live {
        let per_traj = per_group / group.trajectories.len() as f64;
        for traj in &group.trajectories {
            if traj.steps.is_empty() {
                continue;
            }
            let w = per_traj / traj.steps.len() as f64;
            for step in &traj.steps {
                let lp = policy.log_probs(step.state);
                let ratio = (lp[step.action] - step.logp_old).exp();
                f(step, w, ratio, traj.advantage, &lp);
            }
        }
    }
}

pub fn surrogate_objective(
    policy: &PolicySnapshot,
    reference: &PolicySnapshot,
    groups: &[TrajectoryGroup],
    cfg: &GrpoConfig,
) -> ObjectiveEval {
    let mut policy_term = 0.0;
    let mut steps = 0usize;
    let mut clipped = 0usize;
    for_each_step(policy, groups, |_, w, ratio, adv, _| {
        policy_term += w * clipped_term(ratio, adv, cfg.eps_low, cfg.eps_high);
        steps += 1;
        if clip_active(ratio, adv, cfg) {
            clipped += 1;
        }
    });
    let kl = policy.mean_kl(reference, &visited_states(groups));
    ObjectiveEval {
        objective: policy_term - cfg.psi * kl,
        policy_term,
        kl,
        clip_fraction: if steps == 0 {
            0.0
        } else {
            clipped as f64 / steps as f64
        },
    }
}

/// Exact gradient of [`surrogate_objective`] with respect to `policy.logits`.
pub fn surrogate_gradient(
    policy: &PolicySnapshot,
    reference: &PolicySnapshot,
    groups: &[TrajectoryGroup],
    cfg: &GrpoConfig,
) -> Vec<Vec<f64>> {
    let mut grad = vec![vec![0.0; policy.num_actions()]; policy.num_states()];

    for_each_step(policy, groups, |step, w, ratio, adv, lp| {
        if adv == 0.0 || clip_active(ratio, adv, cfg) {
            return;
        }
        // d rho / d z_j = rho * (1[j == a] - pi_j)
        let scale = w * adv * ratio;
        let row = &mut grad[step.state];
        for (j, g) in row.iter_mut().enumerate() {
            let indicator = if j == step.action { 1.0 } else { 0.0 };
            *g += scale * (indicator - lp[j].exp());
        }
    });

    if cfg.psi != 0.0 {
        let states = visited_states(groups);
        let per_state = cfg.psi / states.len().max(1) as f64;
        for &s in &states {
            // d KL_s / d z_j = pi_j * (log pi_j - log ref_j - KL_s)
            let lp = policy.log_probs(s);
            let lq = reference.log_probs(s);
            let kl: f64 = lp.iter().zip(&lq).map(|(p, q)| p.exp() * (p - q)).sum();
            for (j, g) in grad[s].iter_mut().enumerate() {
                *g -= per_state * lp[j].exp() * (lp[j] - lq[j] - kl);
            }
        }
    }
    grad
}

/// One ascent step `z <- z + learning_rate * grad J(z)`.
pub fn policy_gradient_step(
    policy: &PolicySnapshot,
    reference: &PolicySnapshot,
    groups: &[TrajectoryGroup],
    cfg: &GrpoConfig,
) -> PolicySnapshot {
    let grad = surrogate_gradient(policy, reference, groups, cfg);
    let mut next = policy.clone();
    for (row, g_row) in next.logits.iter_mut().zip(&grad) {
        for (z, g) in row.iter_mut().zip(g_row) {
            *z += cfg.learning_rate * g;
        }
    }
    next
}
