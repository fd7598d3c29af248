//! Naive reward evaluator, written straight from the reward definitions with
//! stock constants. Works on the reference parser's output, not on the
//! library's segment types.

use serde_json::Value;

use super::refparse::reference_parse;

pub const TOOLS: [&str; 4] = ["captioning_tool", "ocr_tool", "detection_tool", "perception_tool"];
const L: [f64; 4] = [1.0, 1.0, 2.0, 3.0];
const C1: f64 = 8.0; const C2: f64 = 2.0; const ALPHA: f64 = 2.0; const GAMMA: f64 = 0.75;
const BETA: f64 = 0.1; const KAPPA: usize = 2; const ETA: f64 = 0.8; const S: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReward {
    pub corr: f64,
    pub structure: f64,
    pub syntax: f64,
    pub success: f64,
    pub div: f64,
    pub term: f64,
    pub raw: f64,
    pub scaled: f64,
}

/// Letter from the last answer: inside the last `\boxed{}` if any, with
/// `\text{}` unwrapped; "(X)" anywhere, else leading "X)", else a lone letter.
pub fn answer_letter(content: &str) -> Option<char> {
    let mut body = content.to_string();
    if let Some(p) = content.rfind("\\boxed{") {
        let rest: Vec<char> = content[p + 7..].chars().collect();
        let mut depth = 1;
        let mut end = rest.len();
        for (k, &c) in rest.iter().enumerate() {
            depth += (c == '{') as i32 - (c == '}') as i32;
            if depth == 0 {
                end = k;
                break;
            }
        }
        body = rest[..end].iter().collect();
    }
    while let Some(p) = body.find("\\text{") {
        match body[p + 6..].find('}') {
            Some(q) => body = format!("{}{}{}", &body[..p], &body[p + 6..p + 6 + q], &body[p + 7 + q..]),
            None => body = format!("{}{}", &body[..p], &body[p + 6..]),
        }
    }
    let c: Vec<char> = body.trim().chars().collect();
    for k in 0..c.len().saturating_sub(2) {
        if c[k] == '(' && c[k + 1].is_ascii_alphabetic() && c[k + 2] == ')' {
            return Some(c[k + 1].to_ascii_uppercase());
        }
    }
    if c.len() >= 2 && c[0].is_ascii_alphabetic() && c[1] == ')' {
        return Some(c[0].to_ascii_uppercase());
    }
    if c.len() == 1 && c[0].is_ascii_alphabetic() {
        return Some(c[0].to_ascii_uppercase());
    }
    None
}

/// phi of the kind string (noise removed), or None when deviant.
pub fn phi(k: &str) -> Option<i32> {
    if k == "RA" {
        return Some(2);
    }
    let Some(mid) = k.strip_prefix('R').and_then(|m| m.strip_suffix('A')) else { return None };
    if !mid.is_empty() && mid.len() % 2 == 0 && mid.as_bytes().chunks(2).all(|c| c == b"PR") {
        return Some(1);
    }
    // ((CS)+ P R)+
    let mut rest = mid;
    let mut blocks = 0;
    while !rest.is_empty() {
        let mut calls = 0;
        while let Some(r) = rest.strip_prefix("CS") {
            rest = r;
            calls += 1;
        }
        match rest.strip_prefix("PR") {
            Some(r) if calls > 0 => rest = r,
            _ => return None,
        }
        blocks += 1;
    }
    (blocks > 0).then_some(0)
}

pub fn oracle_reward(raw: &str, ground_truth: &str) -> OracleReward {
    let segs = reference_parse(raw);
    let kinds: String = segs.iter().map(|s| s.0).filter(|&c| c != 'N').collect();

    let last_answer = segs.iter().rev().find(|s| s.0 == 'A');
    let predicted = last_answer.and_then(|s| answer_letter(&s.1));
    let truth = answer_letter(ground_truth);
    let corr = if predicted.is_some() && predicted == truth { C1 } else { 0.0 };

    let structure = match phi(&kinds) {
        Some(p) => ALPHA * GAMMA.powi(p),
        None => 0.0,
    };

    let mut counts = [0usize; 4];
    let mut calls = 0;
    let mut all_ok = true;
    for (_, body) in segs.iter().filter(|s| s.0 == 'C') {
        calls += 1;
        let v: Option<Value> = serde_json::from_str(body.trim()).ok();
        let name = v.as_ref().and_then(|v| v.get("name")).and_then(|n| n.as_str());
        let args_ok = v.as_ref().and_then(|v| v.get("arguments")).is_some_and(|a| a.is_object());
        let slot = name.and_then(|n| TOOLS.iter().position(|t| *t == n));
        match (v.as_ref().is_some_and(|v| v.is_object()) && args_ok, slot) {
            (true, Some(k)) => counts[k] += 1,
            _ => all_ok = false,
        }
    }
    let any_success = segs.iter().filter(|s| s.0 == 'S').any(|(_, body)| {
        let v: Option<Value> = serde_json::from_str(body.trim()).ok();
        let v = v.as_ref();
        v.and_then(|v| v.get("message")).is_some_and(|m| m.is_string())
            && v.and_then(|v| v.get("success")) == Some(&Value::Bool(true))
    });
    let (syntax, success, div) = if calls == 0 {
        (0.0, 0.0, 0.0)
    } else {
        let mut bonus = 0.0;
        for n in counts {
            bonus += BETA * n.min(KAPPA) as f64;
        }
        (all_ok as u8 as f64, any_success as u8 as f64, f64::min(ETA, bonus))
    };

    let term = if last_answer.is_some() { C2 } else { 0.0 };
    let r_tool = syntax + success + div;
    let raw_total = L[0] * corr + L[1] * structure + L[2] * r_tool + L[3] * term;
    let n_norm = L[0] * C1 + L[1] * ALPHA + L[2] * (2.0 + ETA) + L[3] * C2;
    OracleReward {
        corr,
        structure,
        syntax,
        success,
        div,
        term,
        raw: raw_total,
        scaled: S * raw_total / n_norm,
    }
}
