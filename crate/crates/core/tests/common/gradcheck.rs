//! Central finite differences against the analytic surrogate gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tooltraj::grpo::{
    surrogate_gradient, surrogate_objective, PolicyRole, PolicySnapshot, Step, Trajectory, TrajectoryGroup,
};
use tooltraj::GrpoConfig;

pub const H: f64 = 1e-5;

pub struct Problem {
    pub policy: PolicySnapshot,
    pub reference: PolicySnapshot,
    pub groups: Vec<TrajectoryGroup>,
    pub cfg: GrpoConfig,
}

fn random_logits(rng: &mut impl Rng, states: usize, actions: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..states)
        .map(|_| (0..actions).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect()
}

/// A random 4-state / 3-action problem whose behavior policy is a perturbed
/// copy of the current one, so ratios spread around 1 and some steps clip.
pub fn random_problem(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (states, actions) = (4, 3);
    let policy = PolicySnapshot {
        role: PolicyRole::Current,
        logits: random_logits(&mut rng, states, actions, 1.5),
    };
    let mut behavior = policy.with_role(PolicyRole::Behavior);
    for row in &mut behavior.logits {
        for z in row {
            *z += rng.gen_range(-0.4..0.4);
        }
    }
    let reference = PolicySnapshot {
        role: PolicyRole::Reference,
        logits: random_logits(&mut rng, states, actions, 1.0),
    };
    let cfg = GrpoConfig {
        group_size: 4,
        psi: [0.0, 0.001, 0.3][rng.gen_range(0..3)],
        ..GrpoConfig::default()
    };
    let groups = (0..rng.gen_range(1..4))
        .map(|q| {
            let mut g = TrajectoryGroup {
                query_id: format!("q{q}"),
                trajectories: (0..cfg.group_size)
                    .map(|_| Trajectory {
                        steps: (0..rng.gen_range(1..6))
                            .map(|_| {
                                let state = rng.gen_range(0..states);
                                let action = rng.gen_range(0..actions);
                                Step {
                                    state,
                                    action,
                                    logp_old: behavior.log_prob(state, action),
                                }
                            })
                            .collect(),
                        reward: rng.gen_range(0.0..20.0),
                        advantage: 0.0,
                    })
                    .collect(),
            };
            g.assign_advantages(cfg.delta);
            g
        })
        .collect();
    Problem {
        policy,
        reference,
        groups,
        cfg,
    }
}

/// True when some step at `state` sits within reach of a clip edge, where
/// the objective has a kink and differences are meaningless.
fn near_clip_edge(p: &Problem, state: usize) -> bool {
    p.groups.iter().flat_map(|g| &g.trajectories).any(|t| {
        t.steps.iter().any(|s| {
            let ratio = (p.policy.log_prob(s.state, s.action) - s.logp_old).exp();
            s.state == state
                && [1.0 - p.cfg.eps_low, 1.0 + p.cfg.eps_high]
                    .iter()
                    .any(|edge| (ratio - edge).abs() < 1e-4)
        })
    })
}

pub struct CheckResult {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

pub fn check(p: &Problem) -> CheckResult {
    let analytic = surrogate_gradient(&p.policy, &p.reference, &p.groups, &p.cfg);
    let objective = |policy: &PolicySnapshot| surrogate_objective(policy, &p.reference, &p.groups, &p.cfg).objective;
    let mut out = CheckResult {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for s in 0..p.policy.num_states() {
        if near_clip_edge(p, s) {
            out.skipped += p.policy.num_actions();
            continue;
        }
        for j in 0..p.policy.num_actions() {
            let mut plus = p.policy.clone();
            plus.logits[s][j] += H;
            let mut minus = p.policy.clone();
            minus.logits[s][j] -= H;
            let numeric = (objective(&plus) - objective(&minus)) / (2.0 * H);
            let a = analytic[s][j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            out.max_rel_error = out.max_rel_error.max(rel);
            out.checked += 1;
        }
    }
    out
}
