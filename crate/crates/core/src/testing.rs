//! Helpers for tests and benchmarks: a random mini-C module generator that
//! records the calls it wrote, and a compiler stand-in driven by markers.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::c_frontend::{function_id, SourceFile};
use crate::error::Result;
use crate::rust_prober::{Compiler, Diagnostic};
use crate::rust_syntax::single_item;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedFn {
    pub id: String,
    pub name: String,
    pub file: String,
    pub is_static: bool,
    /// Module functions called, by name, without duplicates.
    pub calls: BTreeSet<String>,
    /// Functions called that the module does not define.
    pub externals: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct GeneratedModule {
    pub files: Vec<SourceFile>,
    /// In file order, then definition order: the order the parser reports them.
    pub functions: Vec<GeneratedFn>,
}

/// A module of 1..=`max_functions` functions spread over up to three files.
/// Names are unique and static functions are only called from their own
/// file, so every call has exactly one possible target.
pub fn random_module(rng: &mut impl Rng, max_functions: usize) -> GeneratedModule {
    let n = rng.random_range(1..=max_functions.max(1));
    let n_files = rng.random_range(1..=3.min(n));
    let mut fns: Vec<GeneratedFn> = (0..n)
        .map(|i| {
            let file = format!("m{}.c", rng.random_range(0..n_files));
            GeneratedFn {
                id: String::new(),
                name: format!("fn_{i}"),
                is_static: rng.random_bool(0.2),
                file,
                calls: BTreeSet::new(),
                externals: BTreeSet::new(),
            }
        })
        .collect();
    fns.sort_by(|a, b| a.file.cmp(&b.file));
    for f in &mut fns {
        f.id = function_id(&f.file, &f.name);
    }

    let callable: Vec<Vec<String>> = fns
        .iter()
        .map(|caller| {
            fns.iter()
                .filter(|g| !g.is_static || g.file == caller.file)
                .map(|g| g.name.clone())
                .collect()
        })
        .collect();
    let mut bodies = Vec::with_capacity(fns.len());
    for (i, f) in fns.iter_mut().enumerate() {
        let mut body = String::from("    int acc = a;\n");
        for _ in 0..rng.random_range(0..5) {
            let callee = if rng.random_bool(0.2) {
                let e = format!("ext_{}", rng.random_range(0..4));
                f.externals.insert(e.clone());
                e
            } else {
                let c = callable[i]
                    .choose(rng)
                    .expect("a function can always call itself")
                    .clone();
                f.calls.insert(c.clone());
                c
            };
            match rng.random_range(0..4) {
                0 => writeln!(body, "    acc += {callee}(acc);"),
                1 => writeln!(
                    body,
                    "    if (acc > {}) {{\n        acc = {callee}(acc - 1);\n    }}",
                    rng.random_range(0..9)
                ),
                2 => writeln!(
                    body,
                    "    while (acc < 3) {{\n        acc = acc + 1 + {callee}(acc);\n    }}"
                ),
                _ => writeln!(body, "    acc = acc * 2 + {callee}(acc) * {callee}(1);"),
            }
            .expect("writing to a String");
        }
        body.push_str("    return acc;\n");
        bodies.push(body);
    }

    let mut files = Vec::new();
    let names: BTreeSet<&String> = fns.iter().map(|f| &f.file).collect();
    for file in names {
        let mut text = String::new();
        for e in 0..4 {
            writeln!(text, "int ext_{e}(int x);").expect("writing to a String");
        }
        for f in fns.iter().filter(|f| !f.is_static || &f.file == file) {
            let st = if f.is_static { "static " } else { "" };
            writeln!(text, "{st}int {}(int a);", f.name).expect("writing to a String");
        }
        for (f, body) in fns.iter().zip(&bodies).filter(|(f, _)| &f.file == file) {
            let st = if f.is_static { "static " } else { "" };
            write!(text, "\n{st}int {}(int a)\n{{\n{body}}}\n", f.name).expect("writing to a String");
        }
        files.push(SourceFile::new(file.clone(), text));
    }
    GeneratedModule { files, functions: fns }
}

/// A [`Compiler`] that never runs rustc. Items declare what they use with
/// `// needs: a b` comments; every name that no item defines yields an
/// E0425 diagnostic, and an item containing `// broken` yields an E0308.
#[derive(Debug, Default)]
pub struct MarkerCompiler {
    calls: AtomicUsize,
}

impl MarkerCompiler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of `check` calls so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Compiler for MarkerCompiler {
    fn check(&self, items: &[String], _label: &str) -> Result<Vec<Diagnostic>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let defined: BTreeSet<String> = items
            .iter()
            .filter_map(|t| single_item(t).ok())
            .map(|i| i.name)
            .collect();
        let mut out = Vec::new();
        let mut missing = BTreeSet::new();
        for text in items {
            for line in text.lines() {
                if let Some(rest) = line.trim().strip_prefix("// needs:") {
                    for name in rest.split_whitespace() {
                        if !defined.contains(name) && missing.insert(name.to_string()) {
                            let msg = format!("cannot find value `{name}` in this scope");
                            out.push(Diagnostic::new("E0425", &msg, None, &msg));
                        }
                    }
                }
                if line.trim() == "// broken" {
                    out.push(Diagnostic::new("E0308", "mismatched types", None, "mismatched types"));
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn generated_modules_parse_with_the_recorded_functions() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let g = random_module(&mut rng, 12);
            let m = crate::c_frontend::parse_sources(g.files.clone()).unwrap();
            let ids: Vec<_> = m.functions.iter().map(|f| f.id.clone()).collect();
            let want: Vec<_> = g.functions.iter().map(|f| f.id.clone()).collect();
            assert_eq!(ids, want);
        }
    }

    #[test]
    fn marker_compiler_reports_missing_names_once() {
        let c = MarkerCompiler::new();
        let items = vec!["fn a() {\n    // needs: b c\n}".to_string(), "fn c() {}".to_string()];
        let d = c.check(&items, "x").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].primary_symbol.as_deref(), Some("b"));
        assert_eq!(c.calls(), 1);
    }
}
