//! Parse a raw rollout, print its segments, structure class and reward.
//!
//! ```text
//! cargo run --example parse_transcript            # built-in rollout
//! cargo run --example parse_transcript -- file.txt A
//! ```

use tooltraj::structure::classify_structure;
use tooltraj::transcript::{extract_answer, parse_transcript, serialize_transcript};
use tooltraj::{RewardEngine, RewardWeights, ToolRegistry};

const BUILTIN: &str = r#"<think_reasoning>The diagram labels are hard to read; try OCR.</think_reasoning>
<tool_call>{"name": "ocr_tool", "arguments": {"image": "img_0"}}</tool_call>
<tool_response>{"success": true, "message": "stage 3: pupa"}</tool_response>
stray text the model emitted between phases
<think_perception>Stage 3 is labelled pupa.</think_perception>
<think_reasoning>Option C names the pupa.</think_reasoning>
<answer>\boxed{(C)}</answer>"#;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (raw, ground_truth) = match args.as_slice() {
        [path, gt, ..] => (std::fs::read_to_string(path).expect("readable transcript"), gt.clone()),
        [path] => (std::fs::read_to_string(path).expect("readable transcript"), "C".to_string()),
        [] => (BUILTIN.to_string(), "C".to_string()),
    };

    let engine = RewardEngine::new(RewardWeights::default(), ToolRegistry::default()).unwrap();
    let mut t = parse_transcript(&raw, engine.registry());
    t.ground_truth = ground_truth;

    for s in &t.segments {
        let preview: String = s.content.chars().take(60).collect();
        println!("{:<14} {:?}", format!("{:?}", s.kind), preview);
    }
    let class = classify_structure(&t);
    println!("\nstructure: {:?} (phi = {:?})", class.template, class.phi());
    println!("answer: {:?}", extract_answer(&t));
    let reward = engine.score(&t);
    println!("{}", serde_json::to_string_pretty(&reward).unwrap());

    let again = parse_transcript(&serialize_transcript(&t), engine.registry());
    assert_eq!(
        t.kinds().collect::<Vec<_>>(),
        again.kinds().collect::<Vec<_>>(),
        "serialized form re-parses to the same kinds"
    );
}
