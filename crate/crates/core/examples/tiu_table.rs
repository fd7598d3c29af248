//! Tool Instrumental Utility, two ways: straight from published component
//! values, and from usage records of simulated rollouts grouped by dataset.
//!
//! ```text
//! cargo run --example tiu_table
//! ```

use tooltraj::metrics::{TiuRow, UsageRecord};
use tooltraj::simenv::{generate_corpus, initial_policy};
use tooltraj::transcript::{answer_matches, extract_answer, parse_transcript};
use tooltraj::{RunConfig, TiuReport};

fn main() {
    // (dataset, TER, TTAC, TSS) of the untrained agent
    let published = [
        ("AI2D", 0.7708, -0.051, 1.32),
        ("TQA", 0.7892, 0.078, 2.96),
        ("OK-VQA", 0.8013, 0.009, 2.78),
        ("SCIENCE-QA", 0.7308, -0.049, 1.14),
    ];
    let rows = published
        .iter()
        .map(|&(name, ter, ttac, tss)| TiuRow::from_components(name, Some(ter), Some(ttac), Some(tss)))
        .collect();
    println!("from components:\n{}", TiuReport::from_rows(rows).render_text());

    let cfg = RunConfig::default();
    let registry = cfg.registry();
    let records: Vec<UsageRecord> = generate_corpus(&cfg, &initial_policy(&cfg.env), 400)
        .iter()
        .map(|rec| {
            let t = parse_transcript(&rec.raw, &registry);
            let correct = answer_matches(extract_answer(&t), &rec.ground_truth);
            let mut u = UsageRecord::from_transcript(&t, &registry, correct);
            u.sample_id = rec.sample_id.clone();
            u.dataset = rec.dataset.clone();
            u
        })
        .collect();
    let report = TiuReport::from_records(&records, &registry, |r| r.dataset.clone());
    println!("simulated, initial policy:\n{}", report.render_text());
}
