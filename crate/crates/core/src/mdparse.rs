//! Markdown table-of-contents extraction: parses ATX and setext headings
//! into a tree, generates root-to-node heading-path strings, and exports
//! trees as DOT or JSON.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scan::{classify_lines, LineKind};

/// One heading in the document hierarchy. The root node has level 0 and an
/// empty heading text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TocNode {
    pub heading_text: String,
    pub level: u8,
    pub children: Vec<TocNode>,
}

impl TocNode {
    fn new(heading_text: String, level: u8) -> Self {
        TocNode {
            heading_text,
            level,
            children: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TocTree {
    pub root: TocNode,
}

impl TocTree {
    /// Number of headings (nodes excluding the document root).
    pub fn heading_count(&self) -> usize {
        fn count(node: &TocNode) -> usize {
            node.children.iter().map(|c| 1 + count(c)).sum()
        }
        count(&self.root)
    }
}

/// The space-joined heading string from the top-level ancestor down to one
/// node; the unit of all TOC string comparisons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadingPath {
    pub text: String,
    /// Document-order position of the originating node (0-based, root excluded).
    pub node_index: usize,
}

impl HeadingPath {
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.text.split_whitespace()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Json,
}

impl ExportFormat {
    pub fn parse(s: &str) -> Result<ExportFormat> {
        match s {
            "dot" => Ok(ExportFormat::Dot),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

static MD_IMAGE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"!\[([^\]]*)\]\(([^)]*)\)").expect("image regex"));
static MD_LINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[([^\]]*)\]\(([^)]*)\)").expect("link regex"));

/// Strips inline Markdown styling from a heading: links and images keep
/// their text, emphasis and code markers are deleted, whitespace collapses.
fn clean_heading_text(raw: &str) -> String {
    let s = MD_IMAGE.replace_all(raw, "$1");
    let s = MD_LINK.replace_all(&s, "$1");
    let s: String = s
        .chars()
        .filter(|c| !matches!(c, '*' | '_' | '`'))
        .collect();
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses an ATX heading line: up to three leading spaces, 1-6 hashes, then
/// a space or end of line. Returns (level, raw text without closing hashes).
fn atx_heading(line: &str) -> Option<(u8, &str)> {
    let mut rest = line;
    for _ in 0..3 {
        rest = rest.strip_prefix(' ').unwrap_or(rest);
    }
    let hashes = rest.chars().take_while(|c| *c == '#').count();
    if hashes == 0 || hashes > 6 {
        return None;
    }
    let after = &rest[hashes..];
    if !(after.is_empty() || after.starts_with(' ') || after.starts_with('\t')) {
        return None;
    }
    let mut text = after.trim();
    // A trailing run of hashes closes the heading when preceded by a space
    // (or when the text is nothing but hashes).
    let trailing = text.chars().rev().take_while(|c| *c == '#').count();
    if trailing > 0 {
        let cut = text.len() - trailing;
        if cut == 0 {
            text = "";
        } else if text[..cut].ends_with(' ') || text[..cut].ends_with('\t') {
            text = text[..cut].trim_end();
        }
    }
    Some((hashes as u8, text))
}

/// A setext underline: all '=' (level 1) or two or more '-' (level 2), with
/// up to three leading spaces. A single dash is left alone so list bullets
/// are not misread.
fn setext_level(line: &str) -> Option<u8> {
    let t = line.trim();
    if !t.is_empty() && t.chars().all(|c| c == '=') {
        Some(1)
    } else if t.len() >= 2 && t.chars().all(|c| c == '-') {
        Some(2)
    } else {
        None
    }
}

/// Extracts the heading tree. Front matter at byte offset 0 is skipped,
/// headings inside fenced code blocks are ignored, and a heading whose
/// level jumps by more than one attaches to the nearest shallower ancestor.
/// Any text yields a tree, possibly root-only.
pub fn parse_toc(markdown: &str) -> TocTree {
    let mut headings: Vec<(u8, String)> = Vec::new();
    let mut pending: Option<&str> = None;
    for (kind, line) in classify_lines(markdown) {
        if kind != LineKind::Text {
            pending = None;
            continue;
        }
        if let Some((level, text)) = atx_heading(line) {
            headings.push((level, clean_heading_text(text)));
            pending = None;
        } else if let Some(level) = setext_level(line) {
            if let Some(para) = pending.take() {
                headings.push((level, clean_heading_text(para)));
            }
        } else if line.trim().is_empty() {
            pending = None;
        } else {
            pending = Some(line);
        }
    }

    let mut stack: Vec<TocNode> = vec![TocNode::new(String::new(), 0)];
    for (level, text) in headings {
        while stack.last().map(|n| n.level).unwrap_or(0) >= level {
            let done = stack.pop().expect("root stays on stack");
            stack.last_mut().expect("root stays on stack").children.push(done);
        }
        stack.push(TocNode::new(text, level));
    }
    while stack.len() > 1 {
        let done = stack.pop().expect("len checked");
        stack.last_mut().expect("len checked").children.push(done);
    }
    TocTree {
        root: stack.pop().expect("root"),
    }
}

/// One path per non-root node, in document order. Empty heading texts do
/// not contribute words but keep their node.
pub fn heading_paths(tree: &TocTree) -> Vec<HeadingPath> {
    fn walk(node: &TocNode, ancestors: &mut Vec<String>, out: &mut Vec<HeadingPath>) {
        for child in &node.children {
            let mut parts: Vec<&str> = ancestors.iter().map(String::as_str).collect();
            if !child.heading_text.is_empty() {
                parts.push(&child.heading_text);
            }
            out.push(HeadingPath {
                text: parts.join(" "),
                node_index: out.len(),
            });
            let pushed = !child.heading_text.is_empty();
            if pushed {
                ancestors.push(child.heading_text.clone());
            }
            walk(child, ancestors, out);
            if pushed {
                ancestors.pop();
            }
        }
    }
    let mut out = Vec::new();
    let mut ancestors = Vec::new();
    walk(&tree.root, &mut ancestors, &mut out);
    out
}

fn level_color(level: u8) -> &'static str {
    match level {
        0 => "gray",
        1 => "green",
        2 => "yellow",
        3 => "orange",
        _ => "red",
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Serializes a tree for external tools: DOT colored by heading level
/// (root gray, then green, yellow, orange, red) or nested JSON.
pub fn export_tree(tree: &TocTree, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Json => {
            serde_json::to_string(&tree.root).map_err(|e| Error::InvalidArgument(e.to_string()))
        }
        ExportFormat::Dot => {
            let mut out = String::from("digraph toc {\n  node [style=filled];\n");
            let mut next_id = 0usize;
            fn emit(node: &TocNode, id: usize, next_id: &mut usize, out: &mut String) {
                out.push_str(&format!(
                    "  n{} [label=\"{}\", fillcolor=\"{}\"];\n",
                    id,
                    dot_escape(&node.heading_text),
                    level_color(node.level)
                ));
                for child in &node.children {
                    *next_id += 1;
                    let child_id = *next_id;
                    emit(child, child_id, next_id, out);
                    out.push_str(&format!("  n{} -> n{};\n", id, child_id));
                }
            }
            emit(&tree.root, 0, &mut next_id, &mut out);
            out.push_str("}\n");
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(nodes: &[TocNode]) -> Vec<&str> {
        nodes.iter().map(|n| n.heading_text.as_str()).collect()
    }

    #[test]
    fn nested_atx_headings() {
        let tree = parse_toc("# Evaluation\n## Metric\n## Speed");
        assert_eq!(tree.root.children.len(), 1);
        let eval = &tree.root.children[0];
        assert_eq!(eval.heading_text, "Evaluation");
        assert_eq!(texts(&eval.children), vec!["Metric", "Speed"]);
    }

    #[test]
    fn code_fence_excludes_headings() {
        let tree = parse_toc("```\n# not a heading\n```");
        assert_eq!(tree.heading_count(), 0);
    }

    #[test]
    fn front_matter_skipped_and_level_jump_tolerated() {
        let tree = parse_toc("---\ntags: x\n---\n# A\n### B");
        let a = &tree.root.children[0];
        assert_eq!(a.heading_text, "A");
        assert_eq!(texts(&a.children), vec!["B"]);
        assert_eq!(a.children[0].level, 3);
    }

    #[test]
    fn setext_headings() {
        let tree = parse_toc("Title\n=====\n\nSection\n-------\n");
        let title = &tree.root.children[0];
        assert_eq!(title.heading_text, "Title");
        assert_eq!(title.level, 1);
        assert_eq!(texts(&title.children), vec!["Section"]);
        assert_eq!(title.children[0].level, 2);
    }

    #[test]
    fn inline_styling_stripped() {
        let tree = parse_toc("# **Model** `ID` with [link](http://x.test)\n");
        assert_eq!(tree.root.children[0].heading_text, "Model ID with link");
    }

    #[test]
    fn closing_hashes_removed() {
        let tree = parse_toc("## Uses ##\n");
        assert_eq!(tree.root.children[0].heading_text, "Uses");
    }

    #[test]
    fn hash_without_space_is_not_heading() {
        let tree = parse_toc("#tag\n");
        assert_eq!(tree.heading_count(), 0);
    }

    #[test]
    fn paths_for_simple_tree() {
        let tree = parse_toc("# A\n## B");
        let paths: Vec<String> = heading_paths(&tree).into_iter().map(|p| p.text).collect();
        assert_eq!(paths, vec!["A", "A B"]);
    }

    #[test]
    fn paths_empty_for_root_only() {
        let tree = parse_toc("plain text only");
        assert!(heading_paths(&tree).is_empty());
    }

    #[test]
    fn default_template_card_contains_expected_path() {
        let card = include_str!("../tests/fixtures/pharia_card.md");
        let paths = heading_paths(&parse_toc(card));
        assert!(paths
            .iter()
            .any(|p| p.text == "Model Card for Model ID Uses Out-of-Scope Use"));
    }

    #[test]
    fn dot_export_colors_levels() {
        let dot = export_tree(&parse_toc("# A\n## B"), ExportFormat::Dot).unwrap();
        assert_eq!(dot.matches("->").count(), 2);
        assert!(dot.contains("fillcolor=\"gray\""));
        assert!(dot.contains("[label=\"A\", fillcolor=\"green\"]"));
        assert!(dot.contains("[label=\"B\", fillcolor=\"yellow\"]"));
    }

    #[test]
    fn dot_export_root_only() {
        let dot = export_tree(&parse_toc(""), ExportFormat::Dot).unwrap();
        assert_eq!(dot.matches("fillcolor").count(), 1);
        assert!(dot.contains("\"gray\""));
    }

    #[test]
    fn json_round_trips_byte_identically() {
        let tree = parse_toc("# A\n## B\ntext\n### C\n## D");
        let json = export_tree(&tree, ExportFormat::Json).unwrap();
        let parsed: TocNode = serde_json::from_str(&json).unwrap();
        let again = export_tree(&TocTree { root: parsed }, ExportFormat::Json).unwrap();
        assert_eq!(json, again);
    }
}
