//! Prompt construction and answer-block parsing.
//!
//! The prompt asks for a machine-readable block:
//!
//! ```text
//! SELECTIONS:
//! 17
//! 4
//! END_SELECTIONS
//! JUSTIFICATIONS:
//! 17: ...
//! END_JUSTIFICATIONS
//! COMPATIBILITY:
//! free text until the end of the reply
//! ```
//!
//! Only the `SELECTIONS` block is required. A selection line may hold an id
//! (`17`, `[17]`, `17.`), an id followed by the constraint's text, or the
//! constraint's text alone, which is resolved by exact match.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pool::{ConstraintId, ConstraintPool, Permutation};

use super::Instruction;

pub const SELECTIONS_OPEN: &str = "SELECTIONS:";
pub const SELECTIONS_CLOSE: &str = "END_SELECTIONS";
pub const JUSTIFICATIONS_OPEN: &str = "JUSTIFICATIONS:";
pub const JUSTIFICATIONS_CLOSE: &str = "END_JUSTIFICATIONS";
pub const COMPATIBILITY_OPEN: &str = "COMPATIBILITY:";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectionError {
    #[error("no {SELECTIONS_OPEN} … {SELECTIONS_CLOSE} answer block found")]
    NoAnswerBlock,
    #[error("unmatched constraint reference {0:?}")]
    Unmatched(String),
    #[error("selection count mismatch: expected {expected}, found {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("duplicate selection of constraint {0}")]
    Duplicate(ConstraintId),
    #[error("out-of-pool id {0}")]
    OutOfPool(u64),
}

impl SelectionError {
    /// Count, duplicate and range violations are retried with a fresh
    /// permutation; the rest mean the reply could not be read at all.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SelectionError::CountMismatch { .. }
                | SelectionError::Duplicate(_)
                | SelectionError::OutOfPool(_)
        )
    }
}

/// A parsed and validated reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResponse {
    /// Selected ids in the order the model listed them.
    pub selected: Vec<ConstraintId>,
    /// One entry per selection; empty when the model gave none.
    pub justifications: Vec<String>,
    pub compatibility: String,
    /// Full completion text, when the backend produced one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_payload: Option<String>,
}

impl SelectionResponse {
    pub fn validate(&self, pool: &ConstraintPool, budget: usize) -> Result<(), SelectionError> {
        validate_ids(&self.selected, pool, budget)
    }
}

pub fn validate_ids(
    ids: &[ConstraintId],
    pool: &ConstraintPool,
    budget: usize,
) -> Result<(), SelectionError> {
    let mut seen = vec![false; pool.len()];
    for &id in ids {
        if !pool.contains(id) {
            return Err(SelectionError::OutOfPool(id as u64));
        }
        if std::mem::replace(&mut seen[id as usize - 1], true) {
            return Err(SelectionError::Duplicate(id));
        }
    }
    if ids.len() != budget {
        return Err(SelectionError::CountMismatch {
            expected: budget,
            found: ids.len(),
        });
    }
    Ok(())
}

/// System and user texts for one isolated elicitation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

/// Builds the prompt with constraints in permutation order and no element
/// or category labels.
///
/// The task wording is a stand-in for the original study's template, which
/// is not distributed with this crate.
pub fn build_prompt(
    pool: &ConstraintPool,
    permutation: &Permutation,
    instruction: &Instruction,
    budget: usize,
) -> Prompt {
    let mut user = format!(
        "Below is a pool of {n} narrative constraints. Read the full pool, then select exactly \
         {budget} constraints that you consider most useful for planning a single fictional \
         narrative. Give a brief justification for each selection, then finish with a \
         compatibility assessment of how the selected constraints work together.\n\n\
         Constraint pool:\n",
        n = pool.len()
    );
    for &id in &permutation.order {
        let c = pool.get(id).expect("permutation matches pool");
        user.push_str(&format!("[{id}] {}\n", c.text.trim()));
    }
    user.push_str(&format!(
        "\nAnswer in exactly this format:\n\
         {SELECTIONS_OPEN}\n<one constraint id per line, {budget} lines>\n{SELECTIONS_CLOSE}\n\
         {JUSTIFICATIONS_OPEN}\n<id>: <brief justification>\n{JUSTIFICATIONS_CLOSE}\n\
         {COMPATIBILITY_OPEN}\n<your compatibility assessment>\n"
    ));
    Prompt {
        system: instruction.text.clone(),
        user,
    }
}

fn marker(line: &str) -> String {
    line.trim()
        .trim_matches(|c| c == '*' || c == '#' || c == '`')
        .trim()
        .to_ascii_uppercase()
}

/// Splits `[17] text`, `17. text`, `17: text`, `- 17` into the id and the
/// remaining text.
fn leading_id(line: &str) -> Option<(u64, &str)> {
    let s = line.trim_start_matches('[');
    let digits = s.bytes().take_while(u8::is_ascii_digit).count();
    if digits == 0 {
        return None;
    }
    let id = s[..digits].parse::<u64>().ok()?;
    let rest = &s[digits..];
    match rest.chars().next() {
        None => Some((id, "")),
        Some(c) if c.is_whitespace() || matches!(c, ']' | '.' | ')' | ':') => {
            Some((id, rest[c.len_utf8()..].trim()))
        }
        // "12abc" is text, not an id token
        Some(_) => None,
    }
}

fn strip_bullet(line: &str) -> &str {
    line.trim().trim_start_matches(['-', '*', '•']).trim()
}

fn block<'a>(lines: &[&'a str], open: &str, close: &str) -> Option<Vec<&'a str>> {
    let start = lines.iter().position(|l| marker(l) == open)?;
    let len = lines[start + 1..].iter().position(|l| marker(l) == close)?;
    Some(lines[start + 1..start + 1 + len].to_vec())
}

fn resolve(line: &str, pool: &ConstraintPool) -> Result<ConstraintId, SelectionError> {
    let unquoted = line.trim_matches('"');
    if let Some(c) = pool.find_by_text(unquoted) {
        return Ok(c.id);
    }
    let Some((id, rest)) = leading_id(line) else {
        return Err(SelectionError::Unmatched(line.to_string()));
    };
    if id == 0 || id > pool.len() as u64 {
        return Err(SelectionError::OutOfPool(id));
    }
    let id = id as ConstraintId;
    let echoed = rest.trim_matches('"');
    if echoed.is_empty() || pool.get(id).is_some_and(|c| c.text.trim() == echoed) {
        Ok(id)
    } else {
        // "[3] text" where the text belongs to another constraint
        Err(SelectionError::Unmatched(line.to_string()))
    }
}

/// Parses a completion into a validated [`SelectionResponse`].
pub fn parse_selection(
    raw: &str,
    pool: &ConstraintPool,
    budget: usize,
) -> Result<SelectionResponse, SelectionError> {
    let lines: Vec<&str> = raw.lines().collect();
    let selection_lines =
        block(&lines, SELECTIONS_OPEN, SELECTIONS_CLOSE).ok_or(SelectionError::NoAnswerBlock)?;

    let mut selected = Vec::with_capacity(budget);
    for line in selection_lines {
        let line = strip_bullet(line);
        if line.is_empty() {
            continue;
        }
        selected.push(resolve(line, pool)?);
    }
    validate_ids(&selected, pool, budget)?;

    let mut by_id: HashMap<ConstraintId, String> = HashMap::new();
    if let Some(just) = block(&lines, JUSTIFICATIONS_OPEN, JUSTIFICATIONS_CLOSE) {
        for line in just {
            if let Some((id, rest)) = leading_id(strip_bullet(line)) {
                if let Ok(id) = ConstraintId::try_from(id) {
                    by_id.insert(id, rest.to_string());
                }
            }
        }
    }
    let justifications = selected
        .iter()
        .map(|id| by_id.remove(id).unwrap_or_default())
        .collect();

    let compatibility = lines
        .iter()
        .position(|l| marker(l) == COMPATIBILITY_OPEN)
        .map(|i| lines[i + 1..].join("\n").trim().to_string())
        .unwrap_or_default();

    Ok(SelectionResponse {
        selected,
        justifications,
        compatibility,
        raw_payload: Some(raw.to_string()),
    })
}
