use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use syn::spanned::Spanned;
use syn::visit::{self, Visit};

use crate::error::Result;
use crate::rust_syntax::parse_file;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafeCount {
    pub safe: usize,
    pub total: usize,
}

impl SafeCount {
    pub fn unsafe_lines(&self) -> usize {
        self.total - self.safe
    }
}

struct UnsafeSpans {
    ranges: Vec<std::ops::Range<usize>>,
}

impl<'ast> Visit<'ast> for UnsafeSpans {
    fn visit_expr_unsafe(&mut self, e: &'ast syn::ExprUnsafe) {
        self.ranges.push(e.span().byte_range());
        visit::visit_expr_unsafe(self, e);
    }

    fn visit_item_fn(&mut self, f: &'ast syn::ItemFn) {
        if f.sig.unsafety.is_some() {
            self.ranges.push(f.block.span().byte_range());
        }
        visit::visit_item_fn(self, f);
    }

    fn visit_impl_item_fn(&mut self, f: &'ast syn::ImplItemFn) {
        if f.sig.unsafety.is_some() {
            self.ranges.push(f.block.span().byte_range());
        }
        visit::visit_impl_item_fn(self, f);
    }

    fn visit_trait_item_fn(&mut self, f: &'ast syn::TraitItemFn) {
        if let (Some(_), Some(body)) = (f.sig.unsafety, &f.default) {
            self.ranges.push(body.span().byte_range());
        }
        visit::visit_trait_item_fn(self, f);
    }
}

/// Counts non-blank lines and those outside every unsafe block and
/// unsafe-fn body. The lines holding a region's opening and closing
/// delimiters count as unsafe.
pub fn count_safe_lines(rust_text: &str) -> Result<SafeCount> {
    let file = parse_file(rust_text)?;
    let mut spans = UnsafeSpans { ranges: Vec::new() };
    spans.visit_file(&file);

    let line_starts: Vec<usize> = std::iter::once(0)
        .chain(rust_text.match_indices('\n').map(|(i, _)| i + 1))
        .collect();
    let line_of = |offset: usize| line_starts.partition_point(|&s| s <= offset) - 1;
    let mut unsafe_lines = BTreeSet::new();
    for r in spans.ranges.iter().filter(|r| !r.is_empty()) {
        unsafe_lines.extend(line_of(r.start)..=line_of(r.end - 1));
    }

    let mut total = 0;
    let mut safe = 0;
    for (i, line) in rust_text.split('\n').enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        total += 1;
        if !unsafe_lines.contains(&i) {
            safe += 1;
        }
    }
    Ok(SafeCount { safe, total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_unsafe_is_all_safe() {
        let c = count_safe_lines("fn f() -> i32 {\n    1\n}\n").unwrap();
        assert_eq!(c, SafeCount { safe: 3, total: 3 });
    }

    #[test]
    fn unsafe_block_counts_delimiter_lines() {
        let src = "pub fn f(p: *mut i32) -> i32 {\n    let a = 1;\n    unsafe {\n        *p = a;\n        *p += 1;\n        *p\n    }\n}\n";
        let c = count_safe_lines(src).unwrap();
        assert_eq!(c.unsafe_lines(), 5);
        assert_eq!(c.total, 8);
    }

    #[test]
    fn unsafe_fn_body_is_unsafe() {
        let src = "pub unsafe fn g(p: *const u8) -> u8 {\n\n    *p\n}\nfn h() {}";
        let c = count_safe_lines(src).unwrap();
        assert_eq!(c, SafeCount { safe: 1, total: 4 });
    }
}
