//! Token filtering pipeline that turns raw card text into the word stream
//! consumed by histograms and per-file word statistics.
//!
//! The pipeline order is fixed: strip front matter and code-fence lines,
//! delete Markdown styling characters, split on whitespace, trim edge
//! punctuation, lowercase, drop stop words, drop tokens breaking the
//! letter-x rule, drop empties.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::scan::{classify_lines, LineKind};

/// The stop-word snapshot shipped with the artifact (198 lowercase entries).
pub const BUILTIN_STOP_WORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Clone)]
pub struct FilterConfig {
    pub stop_words: HashSet<String>,
    /// Tokens with more than this many occurrences of 'x'/'X' are dropped.
    pub max_x_occurrences: usize,
    pub lowercase: bool,
    pub strip_markdown: bool,
}

impl FilterConfig {
    pub fn new(stop_words: HashSet<String>) -> Self {
        FilterConfig {
            stop_words,
            max_x_occurrences: 2,
            lowercase: true,
            strip_markdown: true,
        }
    }

    pub fn with_builtin_stop_words() -> Self {
        Self::new(builtin_stop_words())
    }
}

/// Where a stop-word list comes from: the bundled snapshot or a file with
/// one word per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopWordSource {
    Builtin,
    File(PathBuf),
}

impl StopWordSource {
    /// Parses the CLI spelling: the literal `builtin` or a path.
    pub fn parse(s: &str) -> StopWordSource {
        if s == "builtin" {
            StopWordSource::Builtin
        } else {
            StopWordSource::File(PathBuf::from(s))
        }
    }
}

pub fn builtin_stop_words() -> HashSet<String> {
    parse_stop_words(BUILTIN_STOP_WORDS, Path::new("<builtin>"))
        .expect("bundled stop-word list is valid")
}

/// Loads a lowercase, deduplicated stop-word set. An empty list is an error:
/// silently filtering nothing is a footgun.
pub fn load_stop_words(source: &StopWordSource) -> Result<HashSet<String>> {
    match source {
        StopWordSource::Builtin => Ok(builtin_stop_words()),
        StopWordSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_stop_words(&text, path)
        }
    }
}

fn parse_stop_words(text: &str, origin: &Path) -> Result<HashSet<String>> {
    let set: HashSet<String> = text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect();
    if set.is_empty() {
        return Err(Error::EmptyInput(format!(
            "stop-word list {} has no entries",
            origin.display()
        )));
    }
    Ok(set)
}

static LINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"!?\[([^\]]*)\]\(([^)]*)\)").expect("link regex"));
static HYPHEN_RUN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-{3,}").expect("hyphen regex"));

/// Removes front matter and fence lines (code block contents are kept: logs
/// and snippets count as card text), then deletes styling characters.
fn strip_structure(text: &str) -> String {
    let mut body = String::with_capacity(text.len());
    for (kind, line) in classify_lines(text) {
        match kind {
            LineKind::Text | LineKind::Code => {
                body.push_str(line);
                body.push('\n');
            }
            _ => {}
        }
    }
    let body = LINK.replace_all(&body, "$1 $2");
    let body = HYPHEN_RUN.replace_all(&body, " ");
    let mut out = String::with_capacity(body.len());
    for c in body.chars() {
        match c {
            '#' | '*' | '_' | '`' | '>' | '[' | ']' => {}
            '|' => out.push(' '),
            _ => out.push(c),
        }
    }
    out
}

fn x_count(token: &str) -> usize {
    token.chars().filter(|c| *c == 'x' || *c == 'X').count()
}

/// Runs the full filtering pipeline over `text`.
pub fn tokenize(text: &str, cfg: &FilterConfig) -> Vec<String> {
    let body = if cfg.strip_markdown {
        strip_structure(text)
    } else {
        text.to_string()
    };
    let mut tokens = Vec::new();
    for raw in body.split_whitespace() {
        let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
        if trimmed.is_empty() {
            continue;
        }
        let token = if cfg.lowercase {
            trimmed.to_lowercase()
        } else {
            trimmed.to_string()
        };
        if cfg.stop_words.contains(&token) {
            continue;
        }
        if x_count(&token) > cfg.max_x_occurrences {
            continue;
        }
        tokens.push(token);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> FilterConfig {
        FilterConfig::with_builtin_stop_words()
    }

    #[test]
    fn strips_styling_and_stop_words() {
        assert_eq!(
            tokenize("The **model** uses data", &cfg()),
            vec!["model", "uses", "data"]
        );
    }

    #[test]
    fn drops_hex_escape_tokens() {
        assert_eq!(tokenize(r"\x6a\x6b\x6c", &cfg()), Vec::<String>::new());
    }

    #[test]
    fn x_rule_boundary_keeps_two_occurrences() {
        assert_eq!(tokenize("xerox exec", &cfg()), vec!["xerox", "exec"]);
    }

    #[test]
    fn front_matter_removed_code_content_kept() {
        let text = "---\ntags: zzz\n---\nbody\n```\nnan loss\n```\n";
        assert_eq!(tokenize(text, &cfg()), vec!["body", "nan", "loss"]);
    }

    #[test]
    fn links_keep_text_and_target() {
        let tokens = tokenize("[docs](https://example.com/page) end", &cfg());
        assert_eq!(tokens, vec!["docs", "https://example.com/page", "end"]);
    }

    #[test]
    fn interior_hyphens_kept_edge_punctuation_trimmed() {
        assert_eq!(
            tokenize("(Out-of-Scope), use.", &cfg()),
            vec!["out-of-scope", "use"]
        );
    }

    #[test]
    fn table_pipes_and_rules_split_tokens() {
        assert_eq!(tokenize("alpha|beta\n---\ngamma---delta", &cfg()), vec![
            "alpha", "beta", "gamma", "delta"
        ]);
    }

    #[test]
    fn crlf_equals_lf() {
        let a = tokenize("alpha\r\nbeta gamma\r\n", &cfg());
        let b = tokenize("alpha\nbeta gamma\n", &cfg());
        assert_eq!(a, b);
    }

    #[test]
    fn no_lowercase_keeps_case_and_misses_stop_words() {
        let mut c = cfg();
        c.lowercase = false;
        assert_eq!(tokenize("The Model", &c), vec!["The", "Model"]);
    }

    #[test]
    fn builtin_list_has_198_entries() {
        assert_eq!(builtin_stop_words().len(), 198);
    }

    #[test]
    fn stop_word_file_dedup_and_lowercase() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stops.txt");
        std::fs::write(&path, "a\nA\na\n").unwrap();
        let set = load_stop_words(&StopWordSource::File(path)).unwrap();
        assert_eq!(set, HashSet::from(["a".to_string()]));
    }

    #[test]
    fn empty_stop_word_file_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stops.txt");
        std::fs::write(&path, "\n\n").unwrap();
        assert!(load_stop_words(&StopWordSource::File(path)).is_err());
    }

    #[test]
    fn idempotent_on_clean_text() {
        let text = "# Title\nSome *styled* text with [a link](http://x.test) and code:\n```py\nprint('loss: nan')\n```\n";
        let once = tokenize(text, &cfg());
        let again = tokenize(&once.join(" "), &cfg());
        assert_eq!(once, again);
    }
}
