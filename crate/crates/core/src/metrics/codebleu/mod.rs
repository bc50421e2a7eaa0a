//! CodeBLEU over Rust sources.
//!
//! Four components are combined linearly: plain BLEU over whitespace tokens,
//! BLEU with keyword-weighted unigram recall, the fraction of reference
//! syntax subtrees found in the candidate, and data-flow match. The behaviour
//! follows the widely used `codebleu` Python package (tree-sitter grammar,
//! smoothing, keyword weights, the data-flow extraction quirks) so scores agree
//! with it numerically.

mod dataflow;
mod ngram;

use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use tree_sitter::{Node, Parser, Tree};

use crate::error::{Error, Result};

pub use ngram::{bleu, weighted_bleu, RUST_KEYWORDS};

pub const DEFAULT_WEIGHTS: [f64; 4] = [0.25, 0.25, 0.25, 0.25];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeBleu {
    pub ngram_match: f64,
    pub weighted_ngram_match: f64,
    pub syntax_match: f64,
    /// Raw data-flow score; 0 when the reference has no flows.
    pub dataflow_match: f64,
    pub score: f64,
}

/// Scores `candidate` against `reference`. Both must parse as Rust.
///
/// A data-flow score of exactly 0 contributes as 1 to the total, as in the
/// reference implementation (references without any flow would otherwise
/// cap every candidate at 0.75).
pub fn codebleu(candidate: &str, reference: &str, weights: [f64; 4]) -> Result<CodeBleu> {
    let candidate = py_strip(candidate);
    let reference = py_strip(reference);
    let cand_tokens = py_split(candidate);
    let ref_tokens = py_split(reference);
    let ngram_match = bleu(&ref_tokens, &cand_tokens);
    let weighted_ngram_match = weighted_bleu(&ref_tokens, &cand_tokens);

    let cand_clean = remove_comments(candidate);
    let ref_clean = remove_comments(reference);
    let cand_tree = parse(&cand_clean, "candidate")?;
    let ref_tree = parse(&ref_clean, "reference")?;
    let syntax_match = syntax_match(&cand_tree, &ref_tree);
    let dataflow_match = dataflow::dataflow_match(&cand_tree, &cand_clean, &ref_tree, &ref_clean);

    let [a, b, g, t] = weights;
    let df = if dataflow_match == 0.0 { 1.0 } else { dataflow_match };
    let score = a * ngram_match + b * weighted_ngram_match + g * syntax_match + t * df;
    Ok(CodeBleu {
        ngram_match,
        weighted_ngram_match,
        syntax_match,
        dataflow_match,
        score,
    })
}

fn is_py_space(c: char) -> bool {
    c.is_whitespace() || ('\x1c'..='\x1f').contains(&c)
}

fn py_strip(s: &str) -> &str {
    s.trim_matches(is_py_space)
}

fn py_split(s: &str) -> Vec<&str> {
    s.split(is_py_space).filter(|t| !t.is_empty()).collect()
}

/// Blanks out `//` and `/* */` comments (string and char literals are matched
/// first so their contents survive), then drops blank lines.
pub fn remove_comments(source: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r#"(?ms)//.*?$|/\*.*?\*/|'(?:\\.|[^\\'])*'|"(?:\\.|[^\\"])*""#).expect("static regex")
    });
    let replaced = re.replace_all(source, |caps: &regex::Captures| {
        let m = &caps[0];
        if m.starts_with('/') {
            " ".to_string()
        } else {
            m.to_string()
        }
    });
    replaced
        .split('\n')
        .filter(|l| !py_strip(l).is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn parse(text: &str, what: &str) -> Result<Tree> {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_rust::language())
        .map_err(|e| Error::ParseFailed(format!("tree-sitter grammar: {e}")))?;
    let tree = parser
        .parse(text, None)
        .ok_or_else(|| Error::ParseFailed(format!("{what}: parser gave up")))?;
    if tree.root_node().has_error() {
        return Err(Error::ParseFailed(format!("{what} has syntax errors")));
    }
    Ok(tree)
}

/// The s-expressions of the root and of every descendant that has children.
fn subtree_sexps(root: Node) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        out.push(node.to_sexp());
        let mut cursor = node.walk();
        for child in node.children(&mut cursor) {
            if child.child_count() != 0 {
                stack.push(child);
            }
        }
    }
    out
}

fn syntax_match(candidate: &Tree, reference: &Tree) -> f64 {
    let cand: HashSet<String> = subtree_sexps(candidate.root_node()).into_iter().collect();
    let refs = subtree_sexps(reference.root_node());
    let matched = refs.iter().filter(|s| cand.contains(*s)).count();
    matched as f64 / refs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_are_blanked_but_literals_survive() {
        let src = "fn f() { // note\n    let s = \"// not a comment\";\n\n    /* gone */ g(); }";
        assert_eq!(
            remove_comments(src),
            "fn f() {  \n    let s = \"// not a comment\";\n      g(); }"
        );
    }

    #[test]
    fn identical_inputs_score_one() {
        let src = "pub fn add(a: i32, b: i32) -> i32 {\n    a + b\n}";
        let s = codebleu(src, src, DEFAULT_WEIGHTS).unwrap();
        assert!((s.score - 1.0).abs() < 1e-12, "{s:?}");
    }

    #[test]
    fn unparsable_input_is_rejected() {
        assert!(matches!(
            codebleu("fn (", "fn f() {}", DEFAULT_WEIGHTS),
            Err(Error::ParseFailed(_))
        ));
    }
}
