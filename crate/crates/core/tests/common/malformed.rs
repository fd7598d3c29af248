//! Hand-labelled malformation corpus.
//!
//! Twenty base rollouts with a hand-assigned template, each rendered in ten
//! damaged variants. Every case is assembled piece by piece, so the segment
//! list it must parse to is known from construction rather than from any
//! parser: tagged pieces are claimed verbatim, and everything between two
//! claimed pieces is one noise segment (trimmed, dropped when blank).

use tooltraj::structure::Template;

pub struct Case {
    pub name: String,
    pub raw: String,
    pub expected: Vec<(char, String)>,
    pub template: Template,
}

#[derive(Default)]
struct Builder {
    raw: String,
    expected: Vec<(char, String)>,
    gap: String,
}

fn tags(letter: char) -> (&'static str, &'static str) {
    match letter {
        'R' => ("<think_reasoning>", "</think_reasoning>"),
        'C' => ("<tool_call>", "</tool_call>"),
        'S' => ("<tool_response>", "</tool_response>"),
        'P' => ("<think_perception>", "</think_perception>"),
        'A' => ("<answer>", "</answer>"),
        _ => unreachable!(),
    }
}

impl Builder {
    fn flush(&mut self) {
        let text = self.gap.trim();
        if !text.is_empty() {
            self.expected.push(('N', text.to_string()));
        }
        self.gap.clear();
    }

    fn tagged(&mut self, letter: char, content: &str) {
        self.flush();
        let (open, close) = tags(letter);
        self.raw.push_str(&format!("{open}{content}{close}"));
        self.expected.push((letter, content.to_string()));
    }

    /// Unclaimed text, including unknown tags and abandoned regions.
    fn text(&mut self, text: &str) {
        self.raw.push_str(text);
        self.gap.push_str(text);
    }

    fn finish(mut self) -> (String, Vec<(char, String)>) {
        self.flush();
        (self.raw, self.expected)
    }
}

const BASES: [(&str, Template); 20] = [
    ("RA", Template::Z3Alternative),
    ("RCSPRA", Template::Z1Optimal),
    ("RPRA", Template::Z2Valid),
    ("RCSCSPRA", Template::Z1Optimal),
    ("RCSPRCSPRA", Template::Z1Optimal),
    ("RPRPRA", Template::Z2Valid),
    ("RCSA", Template::Deviant),
    ("RCSPA", Template::Deviant),
    ("A", Template::Deviant),
    ("R", Template::Deviant),
    ("CSPRA", Template::Deviant),
    ("RPPRA", Template::Deviant),
    ("RCSPRAA", Template::Deviant),
    ("RRA", Template::Deviant),
    ("RCSPRCSA", Template::Deviant),
    ("RCSCSCSPRA", Template::Z1Optimal),
    ("RPA", Template::Deviant),
    ("RCPRA", Template::Deviant),
    ("", Template::Deviant),
    ("RCSPRPRA", Template::Deviant),
];

const VARIANTS: [&str; 10] = [
    "clean",
    "interleaved_noise",
    "hallucinated_tags_between",
    "chat_preamble_and_trailer",
    "hallucinated_tags_inside",
    "truncated_before_answer",
    "abandoned_region",
    "trailing_unclosed_tag",
    "bad_tool_payloads",
    "no_separators",
];

fn content(letter: char, variant: &str, index: usize) -> String {
    let inside = variant == "hallucinated_tags_inside";
    match letter {
        'R' if inside => format!("step {index} </captioning_tool> addCriterion <think_reasoning> nested"),
        'R' => format!("Step {index}: grass sits at the base of the web."),
        'P' if inside => "the caption says <Captioning_Tool> grass </think>".to_string(),
        'P' => "The caption shows arrows from grass to deer.".to_string(),
        'C' if variant == "bad_tool_payloads" => match index % 3 {
            0 => r#"{"name": "None", "arguments": {}}"#.to_string(),
            1 => r#"{"name": "captioning_tool", "arguments": {"#.to_string(),
            _ => r#"[{"name": "ocr_tool", "arguments": {}}]"#.to_string(),
        },
        'C' => format!(r#"{{"name": "captioning_tool", "arguments": {{"image_url": "ai2d/test_image_{index}"}}}}"#),
        'S' if variant == "bad_tool_payloads" => "Error when executing tool: 'None'".to_string(),
        'S' => r#"{"success": true, "message": "a diagram of the different types of animals"}"#.to_string(),
        'A' if inside => "\\boxed{\\text{A}}answer </captioning_tool>".to_string(),
        'A' => "\\boxed{(A) Producer and source of energy}".to_string(),
        _ => unreachable!(),
    }
}

const BETWEEN: [&str; 4] = ["addCriterion", "Let me think again.", "user", "assistant"];
const HALLUCINATED: [&str; 5] = ["</captioning_tool>", "<captioning_tool>", "<Answer>", "<think>", "</answer>"];

fn build(letters: &str, variant: &str) -> (String, Vec<(char, String)>) {
    let mut b = Builder::default();
    let mut letters: Vec<char> = letters.chars().collect();
    let truncated = variant == "truncated_before_answer";
    if truncated {
        if let Some(first) = letters.iter().position(|&c| c == 'A') {
            letters.truncate(first);
        }
    }
    let sep = if variant == "no_separators" { "" } else { "\n" };
    if variant == "chat_preamble_and_trailer" {
        b.text("system\nYou are a helpful assistant.\nuser\n<image> What does grass do?\nassistant\n");
    }
    for (i, &letter) in letters.iter().enumerate() {
        match variant {
            "interleaved_noise" => b.text(&format!(" {} \n", BETWEEN[i % BETWEEN.len()])),
            "hallucinated_tags_between" => b.text(HALLUCINATED[i % HALLUCINATED.len()]),
            "no_separators" if i % 2 == 1 => b.text("\r\n\t"),
            _ => {}
        }
        if variant == "abandoned_region" && i + 1 == letters.len() {
            // opened, never closed, cut off by the next tag of another kind
            let opener = if letter == 'P' { "<think_reasoning>" } else { "<think_perception>" };
            b.text(&format!("{opener}half-written thought "));
        }
        b.tagged(letter, &content(letter, variant, i));
        b.text(sep);
    }
    match variant {
        "chat_preamble_and_trailer" => b.text("<|im_end|> [End of context]"),
        "trailing_unclosed_tag" => b.text("<answer>\\boxed{("),
        "truncated_before_answer" => b.text("<think_reasoning>Therefore, the correct answer is"),
        "abandoned_region" if letters.is_empty() => b.text("<think_perception>half-written thought"),
        _ => {}
    }
    b.finish()
}

/// The 200 labelled cases.
pub fn corpus() -> Vec<Case> {
    let mut out = Vec::new();
    for (letters, template) in BASES {
        for variant in VARIANTS {
            let (raw, expected) = build(letters, variant);
            let template = if variant == "truncated_before_answer" { Template::Deviant } else { template };
            out.push(Case {
                name: format!("{}/{variant}", if letters.is_empty() { "empty" } else { letters }),
                raw,
                expected,
                template,
            });
        }
    }
    out
}
