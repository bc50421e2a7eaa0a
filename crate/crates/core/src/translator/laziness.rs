use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use syn::visit::Visit;

use crate::c_frontend::module::count_statements;
use crate::c_frontend::parser::{parse_function, parse_statements};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LazinessConfig {
    /// Case-insensitive substrings that mark a placeholder comment.
    pub patterns: Vec<String>,
    pub ratio_threshold: f64,
    /// The ratio rule only applies to C functions with at least this many statements.
    pub min_c_statements: usize,
}

impl Default for LazinessConfig {
    fn default() -> Self {
        LazinessConfig {
            patterns: ["rest of", "remaining", "omitted", "similar to above"]
                .map(String::from)
                .to_vec(),
            ratio_threshold: 0.4,
            min_c_statements: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Evidence {
    PlaceholderComment {
        pattern: String,
        line: usize,
        comment: String,
    },
    StatementRatio {
        rust: usize,
        c: usize,
        ratio: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LazinessVerdict {
    pub lazy: bool,
    /// The rules that fired.
    pub evidence: Vec<Evidence>,
    pub c_statements: usize,
    pub rust_statements: Option<usize>,
    pub ratio: Option<f64>,
}

impl LazinessVerdict {
    pub fn not_lazy() -> Self {
        LazinessVerdict {
            lazy: false,
            evidence: Vec::new(),
            c_statements: 0,
            rust_statements: None,
            ratio: None,
        }
    }
}

/// Comments in Rust source with their 1-based line, skipping string and char literals.
pub fn rust_comments(text: &str) -> Vec<(usize, String)> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    while i < b.len() {
        match b[i] {
            b'\n' => {
                line += 1;
                i += 1;
            }
            b'/' if b.get(i + 1) == Some(&b'/') => {
                let end = text[i..].find('\n').map(|e| i + e).unwrap_or(b.len());
                out.push((line, text[i + 2..end].to_string()));
                i = end;
            }
            b'/' if b.get(i + 1) == Some(&b'*') => {
                let start_line = line;
                let mut depth = 1;
                let mut j = i + 2;
                while j < b.len() && depth > 0 {
                    if b[j] == b'/' && b.get(j + 1) == Some(&b'*') {
                        depth += 1;
                        j += 2;
                    } else if b[j] == b'*' && b.get(j + 1) == Some(&b'/') {
                        depth -= 1;
                        j += 2;
                    } else {
                        if b[j] == b'\n' {
                            line += 1;
                        }
                        j += 1;
                    }
                }
                let inner_end = if depth == 0 { j - 2 } else { j };
                out.push((start_line, text[i + 2..inner_end].to_string()));
                i = j;
            }
            b'"' => {
                i += 1;
                while i < b.len() && b[i] != b'"' {
                    if b[i] == b'\\' {
                        i += 1;
                    }
                    if i < b.len() && b[i] == b'\n' {
                        line += 1;
                    }
                    i += 1;
                }
                i += 1;
            }
            b'r' if matches!(b.get(i + 1), Some(b'"' | b'#')) && (i == 0 || !is_ident_byte(b[i - 1])) => {
                // raw string r#"..."#
                let mut j = i + 1;
                let mut hashes = 0;
                while b.get(j) == Some(&b'#') {
                    hashes += 1;
                    j += 1;
                }
                if b.get(j) != Some(&b'"') {
                    i += 1;
                    continue;
                }
                let close = format!("\"{}", "#".repeat(hashes));
                let end = text[j + 1..]
                    .find(&close)
                    .map(|e| j + 1 + e + close.len())
                    .unwrap_or(b.len());
                line += text[i..end].matches('\n').count();
                i = end;
            }
            b'\'' => {
                // char literal vs lifetime: a char literal closes within a few bytes
                if b.get(i + 1) == Some(&b'\\') {
                    let end = text[i + 2..].find('\'').map(|e| i + 2 + e + 1).unwrap_or(b.len());
                    i = end;
                } else if let Some(c) = text[i + 1..].chars().next() {
                    let after = i + 1 + c.len_utf8();
                    if b.get(after) == Some(&b'\'') {
                        i = after + 1;
                    } else {
                        i += 1;
                    }
                } else {
                    i += 1;
                }
            }
            _ => i += 1,
        }
    }
    out
}

fn is_ident_byte(c: u8) -> bool {
    c == b'_' || c.is_ascii_alphanumeric()
}

struct StmtCounter(usize);

impl<'ast> Visit<'ast> for StmtCounter {
    fn visit_stmt(&mut self, s: &'ast syn::Stmt) {
        self.0 += 1;
        syn::visit::visit_stmt(self, s);
    }
}

/// Statement nodes in all function bodies of `rust_text`; `None` if it does not parse.
pub fn count_rust_statements(rust_text: &str) -> Option<usize> {
    let file = syn::parse_str::<syn::File>(rust_text).ok()?;
    let mut c = StmtCounter(0);
    c.visit_file(&file);
    Some(c.0)
}

/// Statement count of a C function (or bare statement list).
pub fn count_c_statements(c_body: &str) -> usize {
    let typedefs = HashSet::new();
    if let Ok(def) = parse_function(c_body, &typedefs) {
        return count_statements(&def.body);
    }
    if let Ok(stmts) = parse_statements(c_body, &typedefs) {
        return count_statements(&stmts);
    }
    c_body.matches(';').count()
}

fn placeholder_hit(comment: &str, cfg: &LazinessConfig) -> Option<String> {
    let lower = comment.to_lowercase();
    let trimmed = lower.trim().trim_start_matches(['/', '*', '!']).trim();
    if trimmed == "..." || trimmed == "…" {
        return Some("...".into());
    }
    cfg.patterns.iter().find(|p| lower.contains(&p.to_lowercase())).cloned()
}

pub fn detect_laziness(c_body: &str, rust_text: &str, cfg: &LazinessConfig) -> LazinessVerdict {
    let mut evidence = Vec::new();
    for (line, comment) in rust_comments(rust_text) {
        if let Some(pattern) = placeholder_hit(&comment, cfg) {
            evidence.push(Evidence::PlaceholderComment {
                pattern,
                line,
                comment: comment.trim().to_string(),
            });
        }
    }
    // A bare `...` line is also a placeholder, even though it does not parse.
    for (i, l) in rust_text.lines().enumerate() {
        if matches!(l.trim(), "..." | "...;" | "…") {
            evidence.push(Evidence::PlaceholderComment {
                pattern: "...".into(),
                line: i + 1,
                comment: l.trim().to_string(),
            });
        }
    }
    let c = count_c_statements(c_body);
    let rust = count_rust_statements(rust_text);
    let ratio = rust.filter(|_| c > 0).map(|r| r as f64 / c as f64);
    if let (Some(r), Some(ratio)) = (rust, ratio) {
        if c >= cfg.min_c_statements && ratio < cfg.ratio_threshold {
            evidence.push(Evidence::StatementRatio { rust: r, c, ratio });
        }
    }
    LazinessVerdict {
        lazy: !evidence.is_empty(),
        evidence,
        c_statements: c,
        rust_statements: rust,
        ratio,
    }
}
