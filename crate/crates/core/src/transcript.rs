//! Tagged rollout transcripts.
//!
//! A rollout is free text in which the agent wraps each phase in one of five
//! tags:
//!
//! ```text
//! <think_reasoning>...</think_reasoning>
//! <tool_call>{"name": "...", "arguments": {...}}</tool_call>
//! <tool_response>{"success": true, "message": "..."}</tool_response>
//! <think_perception>...</think_perception>
//! <answer>\boxed{(B) ...}</answer>
//! ```
//!
//! [`parse_transcript`] is total: anything that is not a well-formed region of
//! one of those tags (stray text, hallucinated tags such as
//! `</captioning_tool>`, unclosed regions) ends up in a [`SegmentKind::Noise`]
//! segment. Tag names are matched exactly and case-sensitively.

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Tools the simulated environment and the default registry expose.
pub const DEFAULT_TOOLS: [&str; 4] = [
    "captioning_tool",
    "ocr_tool",
    "detection_tool",
    "perception_tool",
];

/// Ordered set of tool names an agent is allowed to call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolRegistry {
    names: Vec<String>,
}

impl ToolRegistry {
    /// Builds a registry, dropping duplicate names. Returns `None` when no
    /// names remain.
    pub fn new<I, S>(names: I) -> Option<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut seen = HashSet::new();
        let names: Vec<String> = names
            .into_iter()
            .map(Into::into)
            .filter(|n| seen.insert(n.clone()))
            .collect();
        if names.is_empty() {
            None
        } else {
            Some(Self { names })
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl Default for ToolRegistry {
    fn default() -> Self {
        Self {
            names: DEFAULT_TOOLS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SegmentKind {
    Reasoning,
    ToolCall,
    ToolResponse,
    Perception,
    Answer,
    Noise,
}

impl SegmentKind {
    /// The five kinds that have a tag.
    pub const TAGGED: [SegmentKind; 5] = [
        SegmentKind::Reasoning,
        SegmentKind::ToolCall,
        SegmentKind::ToolResponse,
        SegmentKind::Perception,
        SegmentKind::Answer,
    ];

    pub fn open_tag(self) -> Option<&'static str> {
        Some(match self {
            SegmentKind::Reasoning => "<think_reasoning>",
            SegmentKind::ToolCall => "<tool_call>",
            SegmentKind::ToolResponse => "<tool_response>",
            SegmentKind::Perception => "<think_perception>",
            SegmentKind::Answer => "<answer>",
            SegmentKind::Noise => return None,
        })
    }

    pub fn close_tag(self) -> Option<&'static str> {
        Some(match self {
            SegmentKind::Reasoning => "</think_reasoning>",
            SegmentKind::ToolCall => "</tool_call>",
            SegmentKind::ToolResponse => "</tool_response>",
            SegmentKind::Perception => "</think_perception>",
            SegmentKind::Answer => "</answer>",
            SegmentKind::Noise => return None,
        })
    }

    /// Single-letter code used by the structure grammar.
    pub fn letter(self) -> char {
        match self {
            SegmentKind::Reasoning => 'R',
            SegmentKind::ToolCall => 'C',
            SegmentKind::ToolResponse => 'S',
            SegmentKind::Perception => 'P',
            SegmentKind::Answer => 'A',
            SegmentKind::Noise => 'N',
        }
    }
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SegmentKind::Reasoning => "reasoning",
            SegmentKind::ToolCall => "tool_call",
            SegmentKind::ToolResponse => "tool_response",
            SegmentKind::Perception => "perception",
            SegmentKind::Answer => "answer",
            SegmentKind::Noise => "noise",
        };
        f.write_str(name)
    }
}

/// Parsed body of a `<tool_call>` region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolCallPayload {
    /// Empty when the body carried no string `name` field.
    pub tool_name: String,
    pub arguments: Map<String, Value>,
    /// The body is exactly one JSON object with a string `name` and an
    /// object `arguments`.
    pub syntactically_valid: bool,
    pub registered: bool,
}

impl ToolCallPayload {
    pub fn parse(body: &str, registry: &ToolRegistry) -> Self {
        // from_str rejects trailing content, so concatenated objects fail here.
        let object = match serde_json::from_str::<Value>(body.trim()) {
            Ok(Value::Object(map)) => Some(map),
            _ => None,
        };
        let name = object
            .as_ref()
            .and_then(|m| m.get("name"))
            .and_then(Value::as_str)
            .map(str::to_owned);
        let arguments = object
            .as_ref()
            .and_then(|m| m.get("arguments"))
            .and_then(Value::as_object)
            .cloned();
        let syntactically_valid = name.is_some() && arguments.is_some();
        let tool_name = name.unwrap_or_default();
        let registered = !tool_name.is_empty() && registry.contains(&tool_name);
        Self {
            tool_name,
            arguments: arguments.unwrap_or_default(),
            syntactically_valid,
            registered,
        }
    }

    /// Counts toward tool rewards and selectivity.
    pub fn is_usable(&self) -> bool {
        self.syntactically_valid && self.registered
    }
}

/// Parsed body of a `<tool_response>` region.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolResponsePayload {
    pub success: bool,
    pub message: String,
}

impl ToolResponsePayload {
    pub fn parse(body: &str) -> Self {
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(body.trim()) {
            if let (Some(Value::Bool(success)), Some(Value::String(message))) =
                (map.get("success"), map.get("message"))
            {
                return Self {
                    success: *success,
                    message: message.clone(),
                };
            }
        }
        Self {
            success: false,
            message: body.to_owned(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    None,
    ToolCall(ToolCallPayload),
    ToolResponse(ToolResponsePayload),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Text between the tags, or the trimmed unclaimed text for noise.
    pub content: String,
    /// Byte range in the source, including the tags themselves.
    pub span: Range<usize>,
    pub payload: Payload,
}

impl Segment {
    pub fn tool_call(&self) -> Option<&ToolCallPayload> {
        match &self.payload {
            Payload::ToolCall(p) => Some(p),
            _ => None,
        }
    }

    pub fn tool_response(&self) -> Option<&ToolResponsePayload> {
        match &self.payload {
            Payload::ToolResponse(p) => Some(p),
            _ => None,
        }
    }

    fn render(&self, out: &mut String) {
        match (self.kind.open_tag(), self.kind.close_tag()) {
            (Some(open), Some(close)) => {
                out.push_str(open);
                out.push_str(&self.content);
                out.push_str(close);
            }
            _ => out.push_str(&self.content),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub segments: Vec<Segment>,
    pub sample_id: String,
    pub dataset: String,
    pub ground_truth: String,
    pub raw_length: usize,
}

impl Transcript {
    pub fn from_record(record: &CorpusRecord, registry: &ToolRegistry) -> Self {
        let mut t = parse_transcript(&record.raw, registry);
        t.sample_id = record.sample_id.clone();
        t.dataset = record.dataset.clone();
        t.ground_truth = record.ground_truth.clone();
        t
    }

    pub fn kinds(&self) -> impl Iterator<Item = SegmentKind> + '_ {
        self.segments.iter().map(|s| s.kind)
    }

    pub fn tool_calls(&self) -> impl Iterator<Item = &ToolCallPayload> + '_ {
        self.segments.iter().filter_map(Segment::tool_call)
    }

    pub fn tool_responses(&self) -> impl Iterator<Item = &ToolResponsePayload> + '_ {
        self.segments.iter().filter_map(Segment::tool_response)
    }

    pub fn has_answer(&self) -> bool {
        self.kinds().any(|k| k == SegmentKind::Answer)
    }
}

/// One line of a JSONL corpus file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub sample_id: String,
    pub dataset: String,
    pub ground_truth: String,
    pub raw: String,
}

fn find_open_tag(raw: &str, from: usize) -> Option<(usize, SegmentKind)> {
    let mut i = from;
    while let Some(off) = raw[i..].find('<') {
        let at = i + off;
        let rest = &raw[at..];
        for kind in SegmentKind::TAGGED {
            if rest.starts_with(kind.open_tag().unwrap()) {
                return Some((at, kind));
            }
        }
        i = at + 1;
    }
    None
}

enum RegionEnd {
    /// Content ends at the first field, the close tag ends at the second.
    Closed(usize, usize),
    /// An open tag of another kind starts here before any close tag.
    Interrupted(usize),
    Unclosed,
}

fn find_region_end(raw: &str, content_start: usize, kind: SegmentKind) -> RegionEnd {
    let close = kind.close_tag().unwrap();
    let mut i = content_start;
    while let Some(off) = raw[i..].find('<') {
        let at = i + off;
        let rest = &raw[at..];
        if rest.starts_with(close) {
            return RegionEnd::Closed(at, at + close.len());
        }
        let interrupted = SegmentKind::TAGGED
            .iter()
            .any(|&other| other != kind && rest.starts_with(other.open_tag().unwrap()));
        if interrupted {
            return RegionEnd::Interrupted(at);
        }
        i = at + 1;
    }
    RegionEnd::Unclosed
}

fn push_noise(raw: &str, range: Range<usize>, segments: &mut Vec<Segment>) {
    let slice = &raw[range.clone()];
    let trimmed = slice.trim();
    if trimmed.is_empty() {
        return;
    }
    let start = range.start + (slice.len() - slice.trim_start().len());
    segments.push(Segment {
        kind: SegmentKind::Noise,
        content: trimmed.to_owned(),
        span: start..start + trimmed.len(),
        payload: Payload::None,
    });
}

/// Parses a raw rollout. Never fails; malformation shows up as noise
/// segments or invalid tool-call payloads.
pub fn parse_transcript(raw: &str, registry: &ToolRegistry) -> Transcript {
    let mut segments = Vec::new();
    let mut claimed_end = 0;
    let mut pos = 0;

    while let Some((open_at, kind)) = find_open_tag(raw, pos) {
        let content_start = open_at + kind.open_tag().unwrap().len();
        match find_region_end(raw, content_start, kind) {
            RegionEnd::Closed(content_end, end) => {
                push_noise(raw, claimed_end..open_at, &mut segments);
                let content = &raw[content_start..content_end];
                let payload = match kind {
                    SegmentKind::ToolCall => {
                        Payload::ToolCall(ToolCallPayload::parse(content, registry))
                    }
                    SegmentKind::ToolResponse => {
                        Payload::ToolResponse(ToolResponsePayload::parse(content))
                    }
                    _ => Payload::None,
                };
                segments.push(Segment {
                    kind,
                    content: content.to_owned(),
                    span: open_at..end,
                    payload,
                });
                claimed_end = end;
                pos = end;
            }
            // the interrupted prefix stays unclaimed and becomes noise
            RegionEnd::Interrupted(at) => pos = at,
            RegionEnd::Unclosed => break,
        }
    }
    push_noise(raw, claimed_end..raw.len(), &mut segments);

    Transcript {
        segments,
        raw_length: raw.len(),
        ..Transcript::default()
    }
}

/// Renders segments back to tagged text, one segment per line.
pub fn serialize_transcript(t: &Transcript) -> String {
    let mut out = String::new();
    for (i, seg) in t.segments.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        seg.render(&mut out);
    }
    out
}

/// Returns the brace-balanced body of the last `\boxed{...}` in `text`.
fn boxed_body(text: &str) -> Option<&str> {
    let start = text.rfind("\\boxed{")? + "\\boxed{".len();
    let mut depth = 1usize;
    for (i, c) in text[start..].char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i]);
                }
            }
            _ => {}
        }
    }
    // unbalanced: take everything after the opener
    Some(&text[start..])
}

fn strip_latex_text(body: &str) -> String {
    let mut s = body.to_owned();
    while let Some(at) = s.find("\\text{") {
        let inner_start = at + "\\text{".len();
        match s[inner_start..].find('}') {
            Some(close) => {
                let inner = s[inner_start..inner_start + close].to_owned();
                s.replace_range(at..inner_start + close + 1, &inner);
            }
            None => {
                s.replace_range(at..inner_start, "");
            }
        }
    }
    s
}

fn option_letter(body: &str) -> Option<char> {
    let body = body.trim();
    let chars: Vec<char> = body.chars().collect();
    // "(X)" anywhere
    for w in chars.windows(3) {
        if w[0] == '(' && w[1].is_ascii_alphabetic() && w[2] == ')' {
            return Some(w[1].to_ascii_uppercase());
        }
    }
    // leading "X)"
    if chars.len() >= 2 && chars[0].is_ascii_alphabetic() && chars[1] == ')' {
        return Some(chars[0].to_ascii_uppercase());
    }
    // bare letter
    if chars.len() == 1 && chars[0].is_ascii_alphabetic() {
        return Some(chars[0].to_ascii_uppercase());
    }
    None
}

/// Option letter from the last answer segment, upper-cased.
///
/// Looks inside the last `\boxed{...}` when present, otherwise at the whole
/// answer body. Accepts `(X)` anywhere, a leading `X)`, or a bare letter.
pub fn extract_answer(t: &Transcript) -> Option<char> {
    let answer = t
        .segments
        .iter()
        .rev()
        .find(|s| s.kind == SegmentKind::Answer)?;
    let body = boxed_body(&answer.content).unwrap_or(&answer.content);
    option_letter(&strip_latex_text(body))
}

/// Case-insensitive comparison of an extracted letter with a ground-truth
/// label such as `"B"` or `"(b)"`.
pub fn answer_matches(predicted: Option<char>, ground_truth: &str) -> bool {
    match (predicted, option_letter(ground_truth)) {
        (Some(p), Some(g)) => p == g,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(raw: &str) -> Transcript {
        parse_transcript(raw, &ToolRegistry::default())
    }

    fn kinds(t: &Transcript) -> Vec<SegmentKind> {
        t.kinds().collect()
    }

    #[test]
    fn minimal_reason_answer() {
        let t = parse("<think_reasoning>x</think_reasoning><answer>\\boxed{(A)foo}</answer>");
        assert_eq!(kinds(&t), vec![SegmentKind::Reasoning, SegmentKind::Answer]);
        assert_eq!(t.segments[0].content, "x");
        assert_eq!(t.segments[1].content, "\\boxed{(A)foo}");
        assert_eq!(extract_answer(&t), Some('A'));
    }

    #[test]
    fn unregistered_tool_call_is_valid_json() {
        let t = parse(r#"<tool_call>{"name":"None","arguments":{}}</tool_call>"#);
        let call = t.segments[0].tool_call().unwrap();
        assert!(call.syntactically_valid);
        assert!(!call.registered);
        assert_eq!(call.tool_name, "None");
    }

    #[test]
    fn tool_call_payload_rejections() {
        let reg = ToolRegistry::default();
        for body in [
            r#"[{"name":"ocr_tool","arguments":{}}]"#,
            r#"{"name":"ocr_tool","arguments":{}}{"name":"ocr_tool","arguments":{}}"#,
            r#"{"name":"ocr_tool","arguments":"x"}"#,
            r#"{"name":3,"arguments":{}}"#,
            r#"{"arguments":{}}"#,
            "not json",
        ] {
            assert!(!ToolCallPayload::parse(body, &reg).syntactically_valid, "{body}");
        }
        let ok = ToolCallPayload::parse(
            r#" {"name": "ocr_tool", "arguments": {"image_url": "x"}} "#,
            &reg,
        );
        assert!(ok.is_usable());
        assert_eq!(ok.arguments["image_url"], "x");
    }

    #[test]
    fn tool_response_non_json_is_failure() {
        let r = ToolResponsePayload::parse("\nError when executing tool: 'None'\n");
        assert!(!r.success);
        assert!(r.message.contains("Error when executing tool"));
        let r = ToolResponsePayload::parse(r#"{"success": true, "message": "a diagram"}"#);
        assert!(r.success);
        assert_eq!(r.message, "a diagram");
        // success must be a boolean
        assert!(!ToolResponsePayload::parse(r#"{"success": "true", "message": "m"}"#).success);
    }

    #[test]
    fn unclosed_region_becomes_trailing_noise() {
        let raw = "<think_reasoning>a</think_reasoning>\n<think_reasoning>never closed";
        let t = parse(raw);
        assert_eq!(kinds(&t), vec![SegmentKind::Reasoning, SegmentKind::Noise]);
        assert_eq!(t.segments[1].content, "<think_reasoning>never closed");
        assert_eq!(t.segments[1].span.end, raw.len());
    }

    #[test]
    fn interrupted_region_is_noise() {
        let t = parse("<think_reasoning>abc<answer>\\boxed{B}</answer>");
        assert_eq!(kinds(&t), vec![SegmentKind::Noise, SegmentKind::Answer]);
        assert_eq!(t.segments[0].content, "<think_reasoning>abc");
    }

    #[test]
    fn hallucinated_tags_are_noise() {
        let raw = "<think_reasoning>r</think_reasoning>\naddCriterion: text\n</captioning_tool>\n<answer>(C)</answer>";
        let t = parse(raw);
        assert_eq!(
            kinds(&t),
            vec![SegmentKind::Reasoning, SegmentKind::Noise, SegmentKind::Answer]
        );
        assert_eq!(t.segments[1].content, "addCriterion: text\n</captioning_tool>");
    }

    #[test]
    fn tag_names_are_case_sensitive() {
        let t = parse("<Think_Reasoning>x</Think_Reasoning><ANSWER>A</ANSWER>");
        assert_eq!(kinds(&t), vec![SegmentKind::Noise]);
    }

    #[test]
    fn spans_reconstruct_source() {
        let raw = "  pre <think_reasoning>x</think_reasoning> mid <answer>A</answer>  ";
        let t = parse(raw);
        let mut last = 0;
        for seg in &t.segments {
            assert!(seg.span.start >= last);
            assert!(raw[last..seg.span.start].trim().is_empty());
            last = seg.span.end;
        }
        assert!(raw[last..].trim().is_empty());
        assert_eq!(t.raw_length, raw.len());
    }

    #[test]
    fn answer_extraction_rules() {
        let cases = [
            ("<answer>\\boxed{(B) D}</answer>", Some('B')),
            ("<answer>\\boxed{A}</answer>", Some('A')),
            ("<answer> \\boxed{B) adult} </answer>", Some('B')),
            ("<answer> \\boxed{\\text{A}}answer </answer>", Some('A')),
            ("<answer>\\boxed{(d) nymphal}</answer>", Some('D')),
            ("<answer>\\boxed{adult}</answer>", None),
            ("<answer>(C) without box</answer>", Some('C')),
            ("<answer>\\boxed{A}</answer><answer>\\boxed{(C)}</answer>", Some('C')),
        ];
        for (raw, want) in cases {
            assert_eq!(extract_answer(&parse(raw)), want, "{raw}");
        }
        assert_eq!(extract_answer(&parse("<think_reasoning>x</think_reasoning>")), None);
    }

    #[test]
    fn ground_truth_matching() {
        assert!(answer_matches(Some('A'), "A"));
        assert!(answer_matches(Some('A'), "a"));
        assert!(answer_matches(Some('B'), "(B)"));
        assert!(!answer_matches(Some('B'), "A"));
        assert!(!answer_matches(None, "A"));
    }

    #[test]
    fn empty_round_trip() {
        let t = parse("");
        assert!(t.segments.is_empty());
        assert_eq!(serialize_transcript(&t), "");
    }

    #[test]
    fn registry_dedups_and_rejects_empty() {
        let r = ToolRegistry::new(["a", "b", "a"]).unwrap();
        assert_eq!(r.len(), 2);
        assert!(ToolRegistry::new(Vec::<String>::new()).is_none());
    }
}
