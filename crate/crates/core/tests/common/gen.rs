//! Seeded random transcripts covering every template class and the usual
//! ways real rollouts go wrong: bad tool payloads, unknown tags, stray
//! text, abandoned regions and truncation.

use rand::seq::SliceRandom;
use rand::Rng;

pub struct Sample {
    pub raw: String,
    pub ground_truth: String,
}

const WORDS: &[&str] = &[
    "the", "diagram", "shows", "grass", "arrow", "energy", "option", "likely", "because", "so",
    "caption", "é", "→", "{", "}", "(B)", "\\boxed", "<", ">", "tool", "\"", "\\",
];

const STRAY: &[&str] = &[
    "addCriterion",
    "addCriterion: The image is a food web diagram.",
    "</captioning_tool>",
    "<captioning_tool>",
    "<Answer>A</Answer>",
    "<think>",
    "</think_reasoning>",
    "</answer>",
    "user",
    "assistant <",
    "Repeat N times",
    "<tool_call",
    "[End of context]",
];

const SEPARATORS: &[&str] = &["\n", "", " ", "\n\n", "\r\n", "\nuser\n", "\nassistant\n", "\t"];

fn prose(rng: &mut impl Rng) -> String {
    let n = rng.gen_range(0..12);
    let mut words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    if rng.gen_bool(0.15) {
        words.push(STRAY.choose(rng).unwrap());
    }
    words.join(" ")
}

fn skeleton(rng: &mut impl Rng) -> String {
    let cycle = |rng: &mut dyn rand::RngCore| "CS".repeat(rng.gen_range(1..4)) + "PR";
    let mut s = match rng.gen_range(0..7) {
        0 | 1 => "R".to_string() + &(0..rng.gen_range(1..3)).map(|_| cycle(rng)).collect::<String>() + "A",
        2 => "R".to_string() + &"PR".repeat(rng.gen_range(1..4)) + "A",
        3 => "RA".to_string(),
        _ => (0..rng.gen_range(0..10))
            .map(|_| *['R', 'C', 'S', 'P', 'A'].choose(rng).unwrap())
            .collect(),
    };
    // occasional single-letter mutation of a well-formed skeleton
    if rng.gen_bool(0.2) && !s.is_empty() {
        let i = rng.gen_range(0..s.len());
        let c = *['R', 'C', 'S', 'P', 'A'].choose(rng).unwrap();
        match rng.gen_range(0..3) {
            0 => s.insert(i, c),
            1 => {
                s.remove(i);
            }
            _ => s.replace_range(i..i + 1, &c.to_string()),
        }
    }
    s
}

fn tool_call(rng: &mut impl Rng) -> String {
    let tool = *["captioning_tool", "ocr_tool", "detection_tool", "perception_tool"]
        .choose(rng)
        .unwrap();
    match rng.gen_range(0..10) {
        0 => r#"{"name": "None", "arguments": {}}"#.to_string(),
        1 => format!(r#"{{"name": "{tool}", "arguments": {{"image_url": "x"}}"#),
        2 => format!(r#"[{{"name": "{tool}", "arguments": {{}}}}]"#),
        3 => format!(r#"{{"name": "{tool}", "arguments": {{}}}}{{"name": "{tool}", "arguments": {{}}}}"#),
        4 => format!(r#"{{"name": "{tool}"}}"#),
        5 => format!(r#"{{"name": "{tool}", "arguments": "image"}}"#),
        6 => r#"{"name": 3, "arguments": {}}"#.to_string(),
        7 => format!("\n  {{\"name\": \"{tool}\", \"arguments\": {{\"image_url\": \"ai2d/{}\"}}}} \n", rng.gen::<u16>()),
        _ => format!(r#"{{"name": "{tool}", "arguments": {{"image_url": "img_{}"}}}}"#, rng.gen::<u8>()),
    }
}

fn tool_response(rng: &mut impl Rng) -> String {
    match rng.gen_range(0..7) {
        0 | 1 => r#"{"success": true, "message": "a diagram of animals"}"#.to_string(),
        2 => r#"{"success": false, "message": "tool is incapable of processing this image"}"#.to_string(),
        3 => "Error when executing tool: 'None'".to_string(),
        4 => r#"{"success": true}"#.to_string(),
        5 => r#"{"success": "true", "message": "x"}"#.to_string(),
        _ => "\n{\"success\": true, \"message\": \"objects: grass, deer\"}\n".to_string(),
    }
}

fn answer(rng: &mut impl Rng, truth: char) -> String {
    let letter = if rng.gen_bool(0.5) { truth } else { *['A', 'B', 'C', 'D'].choose(rng).unwrap() };
    let lower = letter.to_ascii_lowercase();
    match rng.gen_range(0..10) {
        0 | 1 => format!("\\boxed{{({letter}) producer}}"),
        2 => format!("\\boxed{{{letter}}}"),
        3 => format!(" \\boxed{{\\text{{{letter}}}}}answer "),
        4 => format!("\\boxed{{({lower}) lower case}}"),
        5 => format!("{letter}) written without a box"),
        6 => "\\boxed{none of these}".to_string(),
        7 => String::new(),
        8 => format!("\\boxed{{\\frac{{1}}{{2}} then ({letter})}}"),
        _ => format!("\\boxed{{(A) first}} no wait \\boxed{{({letter}) second}}"),
    }
}

fn render(kind: char, rng: &mut impl Rng, truth: char) -> String {
    let (open, close, body) = match kind {
        'R' => ("<think_reasoning>", "</think_reasoning>", prose(rng)),
        'C' => ("<tool_call>", "</tool_call>", tool_call(rng)),
        'S' => ("<tool_response>", "</tool_response>", tool_response(rng)),
        'P' => ("<think_perception>", "</think_perception>", prose(rng)),
        _ => ("<answer>", "</answer>", answer(rng, truth)),
    };
    format!("{open}{body}{close}")
}

pub fn random_sample(rng: &mut impl Rng) -> Sample {
    let truth = *['A', 'B', 'C', 'D'].choose(rng).unwrap();
    let mut raw = String::new();
    if rng.gen_bool(0.2) {
        raw.push_str("system\nYou are a helpful assistant.\nuser\n<image> Which option?\nassistant\n");
    }
    for kind in skeleton(rng).chars() {
        if rng.gen_bool(0.1) {
            // region abandoned when the next tag opens
            let open = *["<think_reasoning>", "<think_perception>", "<tool_call>"].choose(rng).unwrap();
            raw.push_str(open);
            raw.push_str(&prose(rng));
        }
        raw.push_str(&render(kind, rng, truth));
        if rng.gen_bool(0.2) {
            raw.push_str(STRAY.choose(rng).unwrap());
        }
        raw.push_str(SEPARATORS.choose(rng).unwrap());
    }
    if rng.gen_bool(0.1) {
        raw.push_str(*["<think_reasoning>", "<answer>\\boxed{(", "<tool_response>"].choose(rng).unwrap());
        raw.push_str(&prose(rng));
    }
    if rng.gen_bool(0.1) && !raw.is_empty() {
        let mut cut = rng.gen_range(0..raw.len());
        while !raw.is_char_boundary(cut) {
            cut -= 1;
        }
        raw.truncate(cut);
    }
    Sample {
        raw,
        ground_truth: truth.to_string(),
    }
}
