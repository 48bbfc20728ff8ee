//! Unified line-diff rendering for LLM prompts.

use super::{DiffError, DiffResult, Granularity, OpTag};

pub const DEFAULT_CONTEXT_LINES: usize = 1;

/// Split text into lines, normalizing `\r\n` to `\n`.
pub fn split_lines(text: &str) -> Vec<String> {
    text.replace("\r\n", "\n").split('\n').map(String::from).collect()
}

/// Line splitting for prompt diffs: blank-line runs collapse to one so the
/// rendered diff stays short.
pub fn split_lines_for_prompt(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut prev_blank = false;
    for line in split_lines(text) {
        let blank = line.trim().is_empty();
        if blank && prev_blank {
            continue;
        }
        prev_blank = blank;
        out.push(line);
    }
    out
}

/// Render a line-level diff as `-`/`+` prefixed change blocks with `context`
/// equal lines around each change. Hunks are separated by an `@@` line.
/// Identical inputs render as the empty string.
pub fn render_unified(
    diff: &DiffResult,
    a_lines: &[String],
    b_lines: &[String],
    context: usize,
) -> Result<String, DiffError> {
    if diff.granularity != Granularity::Line {
        return Err(DiffError::WrongGranularity {
            expected: Granularity::Line,
            actual: diff.granularity,
        });
    }
    if diff.opcodes.iter().all(|op| op.tag == OpTag::Equal) {
        return Ok(String::new());
    }

    // group opcodes into hunks separated by equal runs longer than 2*context
    let mut hunks: Vec<Vec<super::Opcode>> = Vec::new();
    let mut current: Vec<super::Opcode> = Vec::new();
    for (idx, op) in diff.opcodes.iter().enumerate() {
        match op.tag {
            OpTag::Equal => {
                let len = op.a_end - op.a_start;
                let first = idx == 0;
                let last = idx == diff.opcodes.len() - 1;
                let mut op = *op;
                if first {
                    op.a_start = op.a_end.saturating_sub(context).max(op.a_start);
                    op.b_start = op.b_end.saturating_sub(context).max(op.b_start);
                    current.push(op);
                } else if last {
                    op.a_end = (op.a_start + context).min(op.a_end);
                    op.b_end = (op.b_start + context).min(op.b_end);
                    if !current.is_empty() {
                        current.push(op);
                    }
                } else if len > 2 * context {
                    let mut head = op;
                    head.a_end = op.a_start + context;
                    head.b_end = op.b_start + context;
                    current.push(head);
                    hunks.push(std::mem::take(&mut current));
                    let mut tail = op;
                    tail.a_start = op.a_end - context;
                    tail.b_start = op.b_end - context;
                    current.push(tail);
                } else {
                    current.push(op);
                }
            }
            _ => current.push(*op),
        }
    }
    if current.iter().any(|op| op.tag != OpTag::Equal) {
        hunks.push(current);
    }

    let mut out = String::new();
    for (h, hunk) in hunks.iter().enumerate() {
        if h > 0 {
            out.push_str("@@\n");
        }
        for op in hunk {
            match op.tag {
                OpTag::Equal => {
                    for line in &a_lines[op.a_start..op.a_end] {
                        out.push_str("  ");
                        out.push_str(line);
                        out.push('\n');
                    }
                }
                OpTag::Delete | OpTag::Replace | OpTag::Insert => {
                    for line in &a_lines[op.a_start..op.a_end] {
                        out.push_str("- ");
                        out.push_str(line);
                        out.push('\n');
                    }
                    for line in &b_lines[op.b_start..op.b_end] {
                        out.push_str("+ ");
                        out.push_str(line);
                        out.push('\n');
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::diff;

    fn render(a: &str, b: &str, context: usize) -> String {
        let al = split_lines(a);
        let bl = split_lines(b);
        let d = diff(&al, &bl, Granularity::Line);
        render_unified(&d, &al, &bl, context).unwrap()
    }

    #[test]
    fn identical_versions_render_empty() {
        assert_eq!(render("a\nb", "a\nb", 1), "");
    }

    #[test]
    fn single_replace_with_context() {
        let got = render("keep\nold line\ntail", "keep\nnew line\ntail", 1);
        assert_eq!(got, "  keep\n- old line\n+ new line\n  tail\n");
    }

    #[test]
    fn two_separated_changes_make_two_hunks() {
        let a = "l0\nl1\nl2\nl3\nl4\nl5\nl6\nl7";
        let b = "l0\nX1\nl2\nl3\nl4\nl5\nY6\nl7";
        let got = render(a, b, 1);
        let hunks: Vec<&str> = got.split("@@\n").collect();
        assert_eq!(hunks.len(), 2);
        assert!(hunks[0].contains("- l1") && hunks[0].contains("+ X1"));
        assert!(hunks[1].contains("- l6") && hunks[1].contains("+ Y6"));
    }

    #[test]
    fn rejects_token_granularity() {
        let a = vec!["x".to_string()];
        let d = diff(&a, &a, Granularity::Token);
        assert!(render_unified(&d, &a, &a, 1).is_err());
    }

    #[test]
    fn prompt_lines_collapse_blank_runs() {
        assert_eq!(
            split_lines_for_prompt("a\n\n\n\nb"),
            vec!["a", "", "b"]
        );
    }
}
