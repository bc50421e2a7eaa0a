use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::context_prober::{Declaration, TranslationUnit};

/// The default project requirement: the output must build without `std`.
pub const NO_STD_RULE: &str =
    "Do not use the `std` crate: the code is built with `#![no_std]`, so only `core` is available.";

pub fn default_rules() -> Vec<String> {
    vec![NO_STD_RULE.to_string()]
}

/// A rendered prompt. `tag` identifies the request independently of its text
/// (`translate:<id>` or `repair:<id>:<round>`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub text: String,
    pub tag: String,
}

impl PromptText {
    pub fn hash(&self) -> String {
        sha256_hex(&self.text)
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub(crate) fn fenced(lang: &str, body: &str) -> String {
    let body = body.trim_end_matches('\n');
    if body.is_empty() {
        format!("```{lang}\n(none)\n```\n")
    } else {
        format!("```{lang}\n{body}\n```\n")
    }
}

fn block(decls: &[Declaration], seen: &mut std::collections::BTreeSet<String>) -> String {
    let mut out = Vec::new();
    for d in decls {
        if seen.insert(d.decl_text.clone()) {
            out.push(d.decl_text.as_str());
        }
    }
    out.join("\n")
}

pub(crate) fn rules_section(rules: &[String]) -> String {
    let mut out = String::from("## Project requirements\n\n");
    if rules.is_empty() {
        out.push_str("- (none)\n");
    }
    for r in rules {
        out.push_str(&format!("- {r}\n"));
    }
    out
}

pub fn render_translation_prompt(unit: &TranslationUnit, rules: &[String]) -> PromptText {
    let name = &unit.core.name;
    let mut seen = Default::default();
    let types = block(&unit.types_and_macros, &mut seen);
    let vars = block(&unit.external_variables, &mut seen);
    let funcs = block(&unit.called_functions, &mut seen);

    let mut text = String::new();
    text.push_str(
        "You are migrating a C code base to Rust one function at a time. \
         Convert the C function below into an equivalent Rust function.\n\n",
    );
    text.push_str("## Code context\n\n");
    text.push_str(
        "The declarations below are supplied for reference only. \
                   They already exist on the Rust side under the same names.\n\n",
    );
    text.push_str("### Types and macros\n\n");
    text.push_str(&fenced("c", &types));
    text.push_str("\n### External variables\n\n");
    text.push_str(&fenced("c", &vars));
    text.push_str("\n### Called functions\n\n");
    text.push_str(&fenced("c", &funcs));
    text.push_str("\n### Function to convert\n\n");
    text.push_str(&fenced("c", &unit.core.body_text));
    text.push_str("\n## Conversion guidelines\n\n");
    for g in [
        format!("Convert only `{name}`. Do not emit Rust definitions for anything listed in the context sections."),
        format!("Keep the function name `{name}` and its parameter order unchanged."),
        "Convert every statement. Never abbreviate the body or leave placeholder comments in place of code."
            .to_string(),
        "Prefer safe Rust; use `unsafe` only where raw pointers, globals or foreign calls require it.".to_string(),
        "Answer with exactly one fenced ```rust code block.".to_string(),
    ] {
        text.push_str(&format!("- {g}\n"));
    }
    text.push('\n');
    text.push_str(&rules_section(rules));
    PromptText {
        text,
        tag: format!("translate:{}", unit.core.id),
    }
}
