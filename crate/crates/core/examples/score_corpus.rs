//! Score a JSONL corpus in process, the library side of `tooltraj score`.
//!
//! ```text
//! cargo run --example score_corpus -- corpus.jsonl
//! ```
//!
//! Without an argument a small corpus is generated from the simulated
//! environment's initial policy.

use tooltraj::cli::score_corpus;
use tooltraj::simenv::{generate_corpus, initial_policy, write_corpus};
use tooltraj::{RewardEngine, RunConfig};

fn main() {
    let cfg = RunConfig::default();
    let text = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path).expect("readable corpus"),
        None => {
            let records = generate_corpus(&cfg, &initial_policy(&cfg.env), 20);
            let mut buf = Vec::new();
            write_corpus(&records, &mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        }
    };

    let engine = RewardEngine::new(cfg.reward.clone(), cfg.registry()).unwrap();
    let (scored, malformed) = score_corpus(&text, &engine);
    let mut totals = Vec::new();
    for line in scored.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        if let Some(r) = v.get("reward") {
            println!(
                "{:<12} {:<14} raw {:>7.3}  scaled {:.4}",
                v["sample_id"].as_str().unwrap_or("?"),
                r["template"].as_str().unwrap_or("?"),
                r["total_raw"].as_f64().unwrap(),
                r["total_scaled"].as_f64().unwrap()
            );
            totals.push(r["total_scaled"].as_f64().unwrap());
        }
    }
    let mean = totals.iter().sum::<f64>() / totals.len().max(1) as f64;
    println!("\n{} scored, {malformed} malformed, mean scaled reward {mean:.4}", totals.len());
}
