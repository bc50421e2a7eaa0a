//! Small helpers over `syn` for slicing, naming and renaming Rust items.

use proc_macro2::Span;
use serde::{Deserialize, Serialize};
use syn::spanned::Spanned;
use syn::{ForeignItem, Item};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Fn,
    Struct,
    Union,
    Enum,
    Const,
    Static,
    TypeAlias,
    ExternFn,
    ExternStatic,
    Other,
}

impl ItemKind {
    pub fn is_type(self) -> bool {
        matches!(
            self,
            ItemKind::Struct | ItemKind::Union | ItemKind::Enum | ItemKind::TypeAlias
        )
    }
}

/// One top-level item with its verbatim text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemInfo {
    pub name: String,
    pub kind: ItemKind,
    pub text: String,
    pub is_unsafe_fn: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxIssue {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Returns an empty list iff `text` parses as a sequence of Rust items.
pub fn check_syntax(text: &str) -> Vec<SyntaxIssue> {
    match syn::parse_str::<syn::File>(text) {
        Ok(_) => Vec::new(),
        Err(e) => e
            .into_iter()
            .map(|e| {
                let start = e.span().start();
                SyntaxIssue {
                    line: start.line,
                    column: start.column + 1,
                    message: e.to_string(),
                }
            })
            .collect(),
    }
}

pub fn parse_file(text: &str) -> Result<syn::File> {
    syn::parse_str::<syn::File>(text).map_err(|e| {
        let s = e.span().start();
        Error::ParseFailed(format!("{}:{}: {e}", s.line, s.column + 1))
    })
}

/// Text of the first fenced code block, or the whole completion when there is none.
pub fn extract_code_block(completion: &str) -> &str {
    let Some(open) = completion.find("```") else {
        return completion;
    };
    let after = &completion[open + 3..];
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

pub fn span_text(text: &str, span: Span) -> &str {
    let r = span.byte_range();
    &text[r.start.min(text.len())..r.end.min(text.len())]
}

/// Splits `text` into top-level items, keeping each item's verbatim source.
pub fn split_items(text: &str) -> Result<Vec<ItemInfo>> {
    let file = parse_file(text)?;
    Ok(file.items.iter().map(|item| item_info(text, item)).collect())
}

fn item_info(text: &str, item: &Item) -> ItemInfo {
    let (name, kind, is_unsafe_fn) = match item {
        Item::Fn(f) => (f.sig.ident.to_string(), ItemKind::Fn, f.sig.unsafety.is_some()),
        Item::Struct(s) => (s.ident.to_string(), ItemKind::Struct, false),
        Item::Union(u) => (u.ident.to_string(), ItemKind::Union, false),
        Item::Enum(e) => (e.ident.to_string(), ItemKind::Enum, false),
        Item::Const(c) => (c.ident.to_string(), ItemKind::Const, false),
        Item::Static(s) => (s.ident.to_string(), ItemKind::Static, false),
        Item::Type(t) => (t.ident.to_string(), ItemKind::TypeAlias, false),
        Item::ForeignMod(m) => {
            let names: Vec<(String, ItemKind)> = m
                .items
                .iter()
                .filter_map(|fi| match fi {
                    ForeignItem::Fn(f) => Some((f.sig.ident.to_string(), ItemKind::ExternFn)),
                    ForeignItem::Static(s) => Some((s.ident.to_string(), ItemKind::ExternStatic)),
                    _ => None,
                })
                .collect();
            let kind = names.first().map(|n| n.1).unwrap_or(ItemKind::Other);
            let name = names.into_iter().map(|n| n.0).collect::<Vec<_>>().join("+");
            (name, kind, false)
        }
        Item::Mod(m) => (m.ident.to_string(), ItemKind::Other, false),
        Item::Trait(t) => (t.ident.to_string(), ItemKind::Other, false),
        Item::Use(u) => (
            format!("use@{}", span_text(text, u.span()).trim()),
            ItemKind::Other,
            false,
        ),
        Item::Impl(i) => (
            format!("impl@{}", span_text(text, i.self_ty.span()).trim()),
            ItemKind::Other,
            false,
        ),
        Item::Macro(m) => (
            m.ident
                .as_ref()
                .map(|i| i.to_string())
                .unwrap_or_else(|| format!("macro@{}", span_text(text, m.span()).trim())),
            ItemKind::Other,
            false,
        ),
        other => (
            format!("item@{}", span_text(text, other.span()).trim()),
            ItemKind::Other,
            false,
        ),
    };
    ItemInfo {
        name,
        kind,
        text: span_text(text, item.span()).to_string(),
        is_unsafe_fn,
    }
}

/// Renames the function item in `text` (a single fn item) to `new_name`.
pub fn rename_fn(text: &str, new_name: &str) -> Result<String> {
    let file = parse_file(text)?;
    let Some(Item::Fn(f)) = file.items.first() else {
        return Err(Error::ParseFailed("expected a function item".into()));
    };
    let r = f.sig.ident.span().byte_range();
    Ok(format!("{}{}{}", &text[..r.start], new_name, &text[r.end..]))
}

/// Name of the single item in `text`, if it parses as exactly one item.
pub fn single_item(text: &str) -> Result<ItemInfo> {
    let items = split_items(text)?;
    match items.len() {
        1 => Ok(items.into_iter().next().unwrap()),
        n => Err(Error::ParseFailed(format!("expected one item, found {n}"))),
    }
}

/// Whitespace-insensitive item comparison.
pub fn same_tokens(a: &str, b: &str) -> bool {
    match (
        a.parse::<proc_macro2::TokenStream>(),
        b.parse::<proc_macro2::TokenStream>(),
    ) {
        (Ok(x), Ok(y)) => x.to_string() == y.to_string(),
        _ => a == b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syntax_ok_and_error() {
        assert!(check_syntax("fn f() -> i32 { 0 }").is_empty());
        let issues = check_syntax("fn f( { }");
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].line, 1);
    }

    #[test]
    fn fenced_block() {
        let c = "Here you go:\n```rust\nfn a() {}\n```\nand\n```rust\nfn b() {}\n```";
        assert_eq!(extract_code_block(c), "fn a() {}\n");
        assert_eq!(extract_code_block("fn x() {}"), "fn x() {}");
    }

    #[test]
    fn split_keeps_text() {
        let src = "/// doc\n#[repr(C)]\npub struct S { a: i32 }\n\nextern \"C\" { fn ext(x: i32) -> i32; }\nconst N: usize = 3;\nfn f() {}\n";
        let items = split_items(src).unwrap();
        let names: Vec<_> = items.iter().map(|i| (i.name.as_str(), i.kind)).collect();
        assert_eq!(
            names,
            [
                ("S", ItemKind::Struct),
                ("ext", ItemKind::ExternFn),
                ("N", ItemKind::Const),
                ("f", ItemKind::Fn)
            ]
        );
        assert_eq!(items[0].text, "/// doc\n#[repr(C)]\npub struct S { a: i32 }");
    }

    #[test]
    fn rename() {
        assert_eq!(
            rename_fn("pub fn Foo(x: i32) -> i32 { x }", "foo").unwrap(),
            "pub fn foo(x: i32) -> i32 { x }"
        );
    }

    #[test]
    fn non_ascii_offsets() {
        let src = "// héllo ✓\nfn g() { let _s = \"é\"; }";
        let items = split_items(src).unwrap();
        assert_eq!(items[0].text, "fn g() { let _s = \"é\"; }");
    }
}
