//! Multi-objective trajectory reward.
//!
//! ```text
//! total_raw    = l1*r_corr + l2*r_struct + l3*r_tool + l4*r_term
//! total_scaled = S * total_raw / n_norm
//! ```
//!
//! `n_norm` defaults to the largest attainable `total_raw` under the active
//! weights, `l1*C1 + l2*alpha + l3*(2 + eta) + l4*C2`, which is 21.6 with the
//! stock constants.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::FieldError;
use crate::structure::{classify_structure, struct_reward, StructParams, Template};
use crate::transcript::{answer_matches, extract_answer, ToolRegistry, Transcript};

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("invalid reward configuration: {}", format_fields(.0))]
    Invalid(Vec<FieldError>),
    #[error("normalization factor is zero")]
    ZeroNormalization,
}

fn format_fields(fields: &[FieldError]) -> String {
    fields
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    /// Correctness magnitude.
    pub c1: f64,
    /// Terminal-answer magnitude.
    pub c2: f64,
    /// Diversity reward per distinct tool call.
    pub beta: f64,
    /// Per-tool saturation cap on counted calls.
    pub kappa: u32,
    /// Global cap on the diversity bonus.
    pub eta: f64,
    /// Output scale.
    pub s: f64,
    /// Pins the normalization factor instead of computing it.
    pub n_norm: Option<f64>,
    pub structure: StructParams,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 2.0,
            lambda4: 3.0,
            c1: 8.0,
            c2: 2.0,
            beta: 0.1,
            kappa: 2,
            eta: 0.8,
            s: 2.5,
            n_norm: None,
            structure: StructParams::default(),
        }
    }
}

impl RewardWeights {
    /// Maximum attainable raw total under these weights.
    pub fn computed_n_norm(&self) -> f64 {
        self.lambda1 * self.c1
            + self.lambda2 * self.structure.alpha
            + self.lambda3 * (2.0 + self.eta)
            + self.lambda4 * self.c2
    }

    pub fn effective_n_norm(&self) -> f64 {
        self.n_norm.unwrap_or_else(|| self.computed_n_norm())
    }

    /// Largest diversity bonus any transcript can collect: `beta*kappa*|T|`.
    pub fn diversity_reachable(&self, registry: &ToolRegistry) -> f64 {
        self.beta * f64::from(self.kappa) * registry.len() as f64
    }

    pub fn validate(&self) -> Result<(), Vec<FieldError>> {
        let mut errors = Vec::new();
        let non_negative = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("lambda4", self.lambda4),
            ("c1", self.c1),
            ("c2", self.c2),
            ("beta", self.beta),
            ("eta", self.eta),
            ("s", self.s),
        ];
        for (field, value) in non_negative {
            if !(value >= 0.0 && value.is_finite()) {
                errors.push(FieldError::new(field, format!("must be a finite value >= 0, got {value}")));
            }
        }
        if self.kappa < 1 {
            errors.push(FieldError::new("kappa", "must be an integer >= 1"));
        }
        if let Some(n) = self.n_norm {
            if !(n > 0.0 && n.is_finite()) {
                errors.push(FieldError::new("n_norm", format!("must be > 0, got {n}")));
            }
        }
        if !(self.structure.alpha > 0.0 && self.structure.alpha.is_finite()) {
            errors.push(FieldError::new("alpha", format!("must be > 0, got {}", self.structure.alpha)));
        }
        if !(self.structure.gamma > 0.0 && self.structure.gamma <= 1.0) {
            errors.push(FieldError::new("gamma", format!("must be in (0, 1], got {}", self.structure.gamma)));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ToolReward {
    pub syntax_indicator: f64,
    pub success_indicator: f64,
    pub r_div: f64,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_corr: f64,
    pub r_struct: f64,
    pub r_tool: ToolReward,
    pub r_term: f64,
    pub total_raw: f64,
    pub total_scaled: f64,
    pub template: Template,
}

pub fn corr_reward(t: &Transcript, w: &RewardWeights) -> f64 {
    if answer_matches(extract_answer(t), &t.ground_truth) {
        w.c1
    } else {
        0.0
    }
}

/// Syntax is strict (every call usable), success is lenient (any response
/// succeeded), and only usable calls feed the diversity bonus. A transcript
/// without tool calls scores zero on all three.
pub fn tool_reward(t: &Transcript, w: &RewardWeights, registry: &ToolRegistry) -> ToolReward {
    let calls: Vec<_> = t.tool_calls().collect();
    if calls.is_empty() {
        return ToolReward::default();
    }
    let usable = |c: &&crate::transcript::ToolCallPayload| {
        c.syntactically_valid && registry.contains(&c.tool_name)
    };
    let syntax_indicator = if calls.iter().all(&usable) { 1.0 } else { 0.0 };
    let success_indicator = if t.tool_responses().any(|r| r.success) {
        1.0
    } else {
        0.0
    };

    // summed in registry order so results are reproducible bit for bit
    let mut counts = vec![0u32; registry.len()];
    for call in calls.iter().copied().filter(|c| usable(c)) {
        if let Some(k) = registry.index_of(&call.tool_name) {
            counts[k] += 1;
        }
    }
    let bonus: f64 = counts
        .iter()
        .map(|&n| w.beta * f64::from(n.min(w.kappa)))
        .sum();
    let r_div = bonus.min(w.eta);

    ToolReward {
        syntax_indicator,
        success_indicator,
        r_div,
        total: syntax_indicator + success_indicator + r_div,
    }
}

/// Fires on any well-formed answer segment, extractable letter or not.
pub fn term_reward(t: &Transcript, w: &RewardWeights) -> f64 {
    if t.has_answer() {
        w.c2
    } else {
        0.0
    }
}

pub fn total_reward(
    t: &Transcript,
    w: &RewardWeights,
    registry: &ToolRegistry,
) -> Result<RewardBreakdown, RewardError> {
    Ok(RewardEngine::new(w.clone(), registry.clone())?.score(t))
}

/// Validated weights plus registry, with the normalization factor resolved.
#[derive(Clone, Debug)]
pub struct RewardEngine {
    weights: RewardWeights,
    registry: ToolRegistry,
    n_norm: f64,
}

impl RewardEngine {
    pub fn new(weights: RewardWeights, registry: ToolRegistry) -> Result<Self, RewardError> {
        weights.validate().map_err(RewardError::Invalid)?;
        let n_norm = weights.effective_n_norm();
        if n_norm == 0.0 {
            return Err(RewardError::ZeroNormalization);
        }
        Ok(Self {
            weights,
            registry,
            n_norm,
        })
    }

    pub fn weights(&self) -> &RewardWeights {
        &self.weights
    }

    pub fn registry(&self) -> &ToolRegistry {
        &self.registry
    }

    pub fn n_norm(&self) -> f64 {
        self.n_norm
    }

    pub fn score(&self, t: &Transcript) -> RewardBreakdown {
        let w = &self.weights;
        let class = classify_structure(t);
        let r_corr = corr_reward(t, w);
        let r_struct = struct_reward(&class, &w.structure);
        let r_tool = tool_reward(t, w, &self.registry);
        let r_term = term_reward(t, w);
        let total_raw =
            w.lambda1 * r_corr + w.lambda2 * r_struct + w.lambda3 * r_tool.total + w.lambda4 * r_term;
        RewardBreakdown {
            r_corr,
            r_struct,
            r_tool,
            r_term,
            total_raw,
            total_scaled: w.s * total_raw / self.n_norm,
            template: class.template,
        }
    }
}
