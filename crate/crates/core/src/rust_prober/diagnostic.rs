use serde::{Deserialize, Serialize};

/// Error codes that mean "a name could not be resolved"; the prober handles
/// these by appending definitions, everything else goes to repair.
pub const RESOLUTION_CODES: &[&str] = &["E0425", "E0412", "E0433", "E0609", "E0573", "E0574", "E0689", "E0422"];

pub fn is_resolution_code(code: &str) -> bool {
    RESOLUTION_CODES.contains(&code)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagSpan {
    pub file: String,
    pub line_start: usize,
    pub column_start: usize,
    pub line_end: usize,
    pub column_end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    /// Compiler error code, empty when the compiler gave none.
    pub code: String,
    pub message: String,
    pub primary_symbol: Option<String>,
    pub span: Option<DiagSpan>,
    /// The compiler's own human-readable rendering.
    pub rendered: String,
}

impl Diagnostic {
    pub fn is_resolution(&self) -> bool {
        is_resolution_code(&self.code)
    }

    pub fn new(code: &str, message: &str, span: Option<DiagSpan>, rendered: &str) -> Self {
        let primary_symbol = if is_resolution_code(code) {
            first_backticked_ident(message).or_else(|| {
                span.as_ref()
                    .map(|s| s.text.trim().to_string())
                    .filter(|s| !s.is_empty())
            })
        } else {
            None
        };
        Diagnostic {
            code: code.to_string(),
            message: message.to_string(),
            primary_symbol,
            span,
            rendered: rendered.to_string(),
        }
    }
}

/// First identifier quoted in backticks, e.g. `helper` in
/// "cannot find function `helper` in this scope". Path-qualified names keep
/// their last segment.
pub fn first_backticked_ident(message: &str) -> Option<String> {
    let mut rest = message;
    while let Some(open) = rest.find('`') {
        let after = &rest[open + 1..];
        let close = after.find('`')?;
        let quoted = &after[..close];
        let last = quoted.rsplit("::").next().unwrap_or(quoted);
        if !last.is_empty() && last.chars().all(|c| c == '_' || c.is_alphanumeric()) {
            return Some(last.to_string());
        }
        rest = &after[close + 1..];
    }
    None
}

/// Parses `--error-format=json` output, keeping error-level diagnostics only.
pub fn parse_rustc_json(stderr: &str) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for line in stderr.lines() {
        let Ok(v) = serde_json::from_str::<serde_json::Value>(line) else {
            continue;
        };
        if v["$message_type"] != "diagnostic" || v["level"] != "error" {
            continue;
        }
        let message = v["message"].as_str().unwrap_or_default();
        if message.starts_with("aborting due to") {
            continue;
        }
        let code = v["code"]["code"].as_str().unwrap_or_default();
        let span = v["spans"]
            .as_array()
            .and_then(|spans| spans.iter().find(|s| s["is_primary"] == true))
            .map(|s| {
                let text = s["text"].as_array().and_then(|t| t.first()).map(|t| {
                    let full = t["text"].as_str().unwrap_or_default();
                    let hs = t["highlight_start"].as_u64().unwrap_or(1) as usize;
                    let he = t["highlight_end"].as_u64().unwrap_or(1) as usize;
                    full.chars()
                        .skip(hs.saturating_sub(1))
                        .take(he.saturating_sub(hs))
                        .collect::<String>()
                });
                DiagSpan {
                    file: s["file_name"].as_str().unwrap_or_default().to_string(),
                    line_start: s["line_start"].as_u64().unwrap_or(0) as usize,
                    column_start: s["column_start"].as_u64().unwrap_or(0) as usize,
                    line_end: s["line_end"].as_u64().unwrap_or(0) as usize,
                    column_end: s["column_end"].as_u64().unwrap_or(0) as usize,
                    text: text.unwrap_or_default(),
                }
            });
        let rendered = v["rendered"].as_str().unwrap_or(message);
        out.push(Diagnostic::new(code, message, span, rendered));
    }
    out
}
