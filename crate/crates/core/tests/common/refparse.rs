//! Brute-force reference parser.
//!
//! Tries every byte offset against every tag, with no search shortcuts.
//! Output is a list of (kind letter, content); noise is 'N'.

const TAGS: [(char, &str, &str); 5] = [
    ('R', "<think_reasoning>", "</think_reasoning>"),
    ('C', "<tool_call>", "</tool_call>"),
    ('S', "<tool_response>", "</tool_response>"),
    ('P', "<think_perception>", "</think_perception>"),
    ('A', "<answer>", "</answer>"),
];

fn at(bytes: &[u8], i: usize, pat: &str) -> bool {
    bytes[i..].starts_with(pat.as_bytes())
}

fn flush_noise(raw: &str, from: usize, to: usize, out: &mut Vec<(char, String)>) {
    let text = raw[from..to].trim();
    if !text.is_empty() {
        out.push(('N', text.to_string()));
    }
}

pub fn reference_parse(raw: &str) -> Vec<(char, String)> {
    let bytes = raw.as_bytes();
    let mut out = Vec::new();
    let mut unclaimed_from = 0;
    let mut i = 0;
    'scan: while i < bytes.len() {
        for (letter, open, close) in TAGS {
            if !at(bytes, i, open) {
                continue;
            }
            let body = i + open.len();
            let mut j = body;
            while j < bytes.len() {
                if at(bytes, j, close) {
                    flush_noise(raw, unclaimed_from, i, &mut out);
                    out.push((letter, raw[body..j].to_string()));
                    i = j + close.len();
                    unclaimed_from = i;
                    continue 'scan;
                }
                let other_open = TAGS.iter().any(|&(l, o, _)| l != letter && at(bytes, j, o));
                if other_open {
                    // region abandoned; resume at the interrupting tag
                    i = j;
                    continue 'scan;
                }
                j += 1;
            }
            // never closed: nothing after this point can be claimed
            break 'scan;
        }
        i += 1;
    }
    flush_noise(raw, unclaimed_from, raw.len(), &mut out);
    out
}
