//! Rollout topology classification and the structural reward.
//!
//! Segments are reduced to a letter string (R reasoning, C tool call,
//! S tool response, P perception, A answer; noise is dropped) and matched
//! against three templates:
//!
//! | template | grammar              | phi |
//! |----------|----------------------|-----|
//! | Z1       | `R ((C S)+ P R)+ A`  | 0   |
//! | Z2       | `R (P R)+ A`         | 1   |
//! | Z3       | `R A`                | 2   |
//!
//! Anything else is [`Template::Deviant`] and earns no structural reward.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::transcript::{SegmentKind, Transcript};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Template {
    Z1Optimal,
    Z2Valid,
    Z3Alternative,
    Deviant,
}

impl Template {
    /// Hierarchy level; `None` stands for an unbounded level (deviant).
    pub fn phi(self) -> Option<u32> {
        match self {
            Template::Z1Optimal => Some(0),
            Template::Z2Valid => Some(1),
            Template::Z3Alternative => Some(2),
            Template::Deviant => None,
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Template::Z1Optimal => "Z1",
            Template::Z2Valid => "Z2",
            Template::Z3Alternative => "Z3",
            Template::Deviant => "deviant",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureClass {
    pub template: Template,
    /// Completed reason/tool/perception cycles; zero outside Z1.
    pub cycles: u32,
}

impl StructureClass {
    pub fn phi(&self) -> Option<u32> {
        self.template.phi()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for StructParams {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            gamma: 0.75,
        }
    }
}

impl StructParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        Ok(())
    }
}

/// Letter string of the non-noise segments.
pub fn kind_letters(t: &Transcript) -> Vec<char> {
    t.kinds()
        .filter(|&k| k != SegmentKind::Noise)
        .map(SegmentKind::letter)
        .collect()
}

/// Number of `((C S)+ P R)` cycles when `body` is exactly a sequence of them.
fn tool_cycles(mut body: &[char]) -> Option<u32> {
    let mut cycles = 0;
    while !body.is_empty() {
        let mut calls = 0;
        while let ['C', 'S', rest @ ..] = body {
            body = rest;
            calls += 1;
        }
        match body {
            ['P', 'R', rest @ ..] if calls > 0 => body = rest,
            _ => return None,
        }
        cycles += 1;
    }
    (cycles > 0).then_some(cycles)
}

fn perception_cycles(body: &[char]) -> bool {
    !body.is_empty() && body.len().is_multiple_of(2) && body.chunks(2).all(|c| c == ['P', 'R'])
}

/// Classifies a letter string (see module docs for the grammar).
pub fn classify_letters(letters: &[char]) -> StructureClass {
    let deviant = StructureClass {
        template: Template::Deviant,
        cycles: 0,
    };
    let body = match letters {
        ['R', body @ .., 'A'] => body,
        _ => return deviant,
    };
    if body.is_empty() {
        return StructureClass {
            template: Template::Z3Alternative,
            cycles: 0,
        };
    }
    if let Some(cycles) = tool_cycles(body) {
        return StructureClass {
            template: Template::Z1Optimal,
            cycles,
        };
    }
    if perception_cycles(body) {
        return StructureClass {
            template: Template::Z2Valid,
            cycles: 0,
        };
    }
    deviant
}

pub fn classify_structure(t: &Transcript) -> StructureClass {
    classify_letters(&kind_letters(t))
}

/// `alpha * gamma^phi` for the three templates, zero for deviant rollouts.
pub fn struct_reward(class: &StructureClass, params: &StructParams) -> f64 {
    match class.phi() {
        Some(phi) => params.alpha * params.gamma.powi(phi as i32),
        None => 0.0,
    }
}
