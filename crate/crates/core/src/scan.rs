//! Line classification shared by the TOC parser and the token filter:
//! YAML front matter (only at byte offset 0) and fenced code blocks.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LineKind {
    /// One of the `---` lines delimiting front matter.
    FrontMatterFence,
    /// A line inside the front matter block.
    FrontMatter,
    /// An opening or closing code fence line (``` or ~~~).
    Fence,
    /// A line inside a fenced code block.
    Code,
    Text,
}

fn fence_marker(line: &str) -> Option<(char, usize)> {
    // Up to three leading spaces, then three or more backticks or tildes.
    let trimmed = line.strip_prefix("   ").unwrap_or(
        line.strip_prefix("  ")
            .unwrap_or(line.strip_prefix(' ').unwrap_or(line)),
    );
    let mut chars = trimmed.chars();
    let first = chars.next()?;
    if first != '`' && first != '~' {
        return None;
    }
    let run = 1 + chars.take_while(|c| *c == first).count();
    if run >= 3 {
        Some((first, run))
    } else {
        None
    }
}

fn is_closing_fence(line: &str, open: (char, usize)) -> bool {
    match fence_marker(line) {
        Some((c, n)) if c == open.0 && n >= open.1 => {
            line.trim().chars().all(|ch| ch == c || ch.is_whitespace())
        }
        _ => false,
    }
}

/// Splits `text` into lines (CRLF tolerated) and tags each with its region.
pub(crate) fn classify_lines(text: &str) -> Vec<(LineKind, &str)> {
    let lines: Vec<&str> = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    let mut kinds = vec![LineKind::Text; lines.len()];

    let mut start = 0;
    // Front matter must begin on the very first line.
    if !lines.is_empty() && lines[0].trim_end() == "---" {
        if let Some(close) = lines[1..].iter().position(|l| l.trim_end() == "---") {
            let close = close + 1;
            kinds[0] = LineKind::FrontMatterFence;
            kinds[close] = LineKind::FrontMatterFence;
            for k in kinds.iter_mut().take(close).skip(1) {
                *k = LineKind::FrontMatter;
            }
            start = close + 1;
        }
    }

    let mut open_fence: Option<(char, usize)> = None;
    for i in start..lines.len() {
        match open_fence {
            None => {
                if let Some(marker) = fence_marker(lines[i]) {
                    kinds[i] = LineKind::Fence;
                    open_fence = Some(marker);
                }
            }
            Some(open) => {
                if is_closing_fence(lines[i], open) {
                    kinds[i] = LineKind::Fence;
                    open_fence = None;
                } else {
                    kinds[i] = LineKind::Code;
                }
            }
        }
    }

    kinds.into_iter().zip(lines).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn front_matter_only_at_offset_zero() {
        let classified = classify_lines("x\n---\ny\n---\n");
        assert!(classified.iter().all(|(k, _)| *k == LineKind::Text));
    }

    #[test]
    fn front_matter_then_fence() {
        let classified = classify_lines("---\ntags: x\n---\n```\ncode\n```");
        let kinds: Vec<LineKind> = classified.iter().map(|(k, _)| *k).collect();
        assert_eq!(
            kinds,
            vec![
                LineKind::FrontMatterFence,
                LineKind::FrontMatter,
                LineKind::FrontMatterFence,
                LineKind::Fence,
                LineKind::Code,
                LineKind::Fence,
            ]
        );
    }

    #[test]
    fn unclosed_front_matter_is_text() {
        let classified = classify_lines("---\ntags: x\n# heading");
        assert!(classified.iter().all(|(k, _)| *k == LineKind::Text));
    }

    #[test]
    fn unclosed_fence_runs_to_eof() {
        let classified = classify_lines("```\n# not a heading\nstill code");
        let kinds: Vec<LineKind> = classified.iter().map(|(k, _)| *k).collect();
        assert_eq!(kinds, vec![LineKind::Fence, LineKind::Code, LineKind::Code]);
    }

    #[test]
    fn tilde_fence_closed_by_longer_run() {
        let classified = classify_lines("~~~~\nbody\n~~~~~\nafter");
        let kinds: Vec<LineKind> = classified.iter().map(|(k, _)| *k).collect();
        assert_eq!(
            kinds,
            vec![LineKind::Fence, LineKind::Code, LineKind::Fence, LineKind::Text]
        );
    }
}
