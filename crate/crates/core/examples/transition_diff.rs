//! Differential state-transition analysis between an untrained and a
//! briefly trained policy in the simulated environment.
//!
//! ```text
//! cargo run --release --example transition_diff -- [cutoff]
//! ```

use tooltraj::metrics::{diff_to_csv, transition_diff, transition_table};
use tooltraj::simenv::{generate_corpus, initial_policy, train};
use tooltraj::transcript::{answer_matches, extract_answer, parse_transcript, Transcript};
use tooltraj::{PolicySnapshot, RunConfig};

fn corpus(cfg: &RunConfig, policy: &PolicySnapshot) -> Vec<(Transcript, bool)> {
    let registry = cfg.registry();
    generate_corpus(cfg, policy, 800)
        .iter()
        .map(|rec| {
            let t = parse_transcript(&rec.raw, &registry);
            let correct = answer_matches(extract_answer(&t), &rec.ground_truth);
            (t, correct)
        })
        .collect()
}

fn main() {
    let cutoff: u64 = std::env::args().nth(1).map_or(5, |s| s.parse().expect("cutoff is an integer"));
    let cfg = RunConfig {
        iterations: 30,
        ..RunConfig::default()
    };
    let trained = train(&cfg).expect("valid config").policy;

    let before = corpus(&cfg, &initial_policy(&cfg.env));
    let after = corpus(&cfg, &trained);
    let a = transition_table(before.iter().map(|(t, c)| (t, *c)));
    let b = transition_table(after.iter().map(|(t, c)| (t, *c)));
    print!("{}", diff_to_csv(&transition_diff(&a, &b, cutoff)));
}
