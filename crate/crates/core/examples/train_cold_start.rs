//! Cold-start training in the simulated environment.
//!
//! Runs the default configuration for a few seeds and compares the first and
//! last ten iterations of the log.
//!
//! ```text
//! cargo run --release --example train_cold_start -- [seed ...]
//! ```

use tooltraj::simenv::{train, IterationLog};
use tooltraj::RunConfig;

fn window_mean(log: &[IterationLog], f: impl Fn(&IterationLog) -> f64) -> f64 {
    log.iter().map(f).sum::<f64>() / log.len() as f64
}

fn main() {
    let seeds: Vec<u64> = std::env::args()
        .skip(1)
        .map(|s| s.parse().expect("seeds are integers"))
        .collect();
    let seeds = if seeds.is_empty() { vec![42, 7, 1234] } else { seeds };

    for seed in seeds {
        let cfg = RunConfig {
            seed,
            ..RunConfig::default()
        };
        let start = std::time::Instant::now();
        let outcome = train(&cfg).expect("default config is valid");
        let log = &outcome.log;
        let w = 10.min(log.len());
        let (first, last) = (&log[..w], &log[log.len() - w..]);
        let r0 = window_mean(first, |l| l.mean_total_scaled_reward);
        let r1 = window_mean(last, |l| l.mean_total_scaled_reward);
        let z0 = window_mean(first, |l| l.z1_fraction);
        let z1 = window_mean(last, |l| l.z1_fraction);
        println!(
            "seed {seed}: reward {r0:.4} -> {r1:.4} ({:+.1}%), Z1 fraction {z0:.3} -> {z1:.3}, final KL {:.4}, {:.1?}",
            100.0 * (r1 / r0 - 1.0),
            log.last().map_or(0.0, |l| l.kl_value),
            start.elapsed()
        );
    }
}
