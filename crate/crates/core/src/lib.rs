//! Trajectory machinery for tool-using agents trained with cold-start RL.
//!
//! The crate covers the whole path from a raw tagged rollout to a policy
//! update:
//!
//! - [`transcript`] parses `<think_reasoning>`, `<tool_call>`, `<tool_response>`,
//!   `<think_perception>` and `<answer>` regions into typed segments.
//! - [`structure`] classifies the segment topology against the Z1/Z2/Z3
//!   templates and grades it with a geometric decay.
//! - [`reward`] combines correctness, structure, tool utility and terminal
//!   delimitation into one normalized, scaled trajectory reward.
//! - [`grpo`] computes group-relative advantages and the clipped,
//!   KL-regularized surrogate objective with its exact gradient.
//! - [`metrics`] implements TER, TTAC, TSS, TIU and differential
//!   state-transition analysis.
//! - [`simenv`] is a deterministic synthetic tool environment with a toy
//!   categorical policy, used to run the training loop end to end.
//! - [`cli`] backs the `tooltraj` binary.

pub mod cli;
pub mod config;
pub mod grpo;
pub mod metrics;
pub mod reward;
pub mod simenv;
pub mod structure;
pub mod transcript;

pub use config::{ConfigError, RunConfig};
pub use grpo::{GrpoConfig, PolicySnapshot, TrajectoryGroup};
pub use metrics::{TiuReport, TransitionTable};
pub use reward::{RewardBreakdown, RewardEngine, RewardWeights};
pub use structure::{StructParams, StructureClass, Template};
pub use transcript::{Segment, SegmentKind, ToolRegistry, Transcript};
