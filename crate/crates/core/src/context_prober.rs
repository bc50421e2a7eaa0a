//! Resolves the free identifiers of each extracted function against the whole
//! codebase and assembles the declaration-only context that accompanies it.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::c_frontend::ast::TopLevelKind;
use crate::c_frontend::lexer::{is_keyword, tokenize, TokenKind};
use crate::c_frontend::module::{known_typedefs, DeclKind, FunctionId, FunctionUnit, ModuleIR};
use crate::error::{Error, Result};

pub const DEFAULT_BUDGET: usize = 200;

/// Identifiers that never need a declaration.
pub const DEFAULT_BUILTINS: &[&str] = &[
    "NULL",
    "true",
    "false",
    "__func__",
    "__FILE__",
    "__LINE__",
    "__builtin_expect",
    "__builtin_memcpy",
    "__builtin_memset",
    "__builtin_unreachable",
    "offsetof",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolKind {
    Macro,
    Type,
    Variable,
    Function,
    FieldUnknown,
}

impl SymbolKind {
    fn decl_kind(self) -> Option<DeclKind> {
        match self {
            SymbolKind::Macro => Some(DeclKind::Macro),
            SymbolKind::Type => Some(DeclKind::Type),
            SymbolKind::Variable => Some(DeclKind::Variable),
            SymbolKind::Function => Some(DeclKind::Function),
            SymbolKind::FieldUnknown => None,
        }
    }

    fn from_decl(kind: DeclKind) -> Self {
        match kind {
            DeclKind::Macro => SymbolKind::Macro,
            DeclKind::Type => SymbolKind::Type,
            DeclKind::Variable => SymbolKind::Variable,
            DeclKind::Function => SymbolKind::Function,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SymbolRef {
    pub name: String,
    pub kind: SymbolKind,
    pub origin: FunctionId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Declaration {
    pub symbol: SymbolRef,
    pub decl_text: String,
    pub source: (String, u32),
}

impl Declaration {
    pub fn line_count(&self) -> usize {
        text_lines(&self.decl_text)
    }
}

fn text_lines(s: &str) -> usize {
    s.trim_end_matches('\n').lines().count().max(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ambiguity {
    pub name: String,
    pub chosen: (String, u32),
    pub candidates: Vec<(String, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationUnit {
    pub core: FunctionUnit,
    /// Macros first, then types.
    pub types_and_macros: Vec<Declaration>,
    pub external_variables: Vec<Declaration>,
    pub called_functions: Vec<Declaration>,
    pub context_line_count: usize,
    pub unresolved: Vec<SymbolRef>,
    #[serde(default)]
    pub ambiguities: Vec<Ambiguity>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl TranslationUnit {
    pub fn declarations(&self) -> impl Iterator<Item = &Declaration> {
        self.types_and_macros
            .iter()
            .chain(&self.external_variables)
            .chain(&self.called_functions)
    }

    /// Distinct declaration texts in render order.
    pub fn context_texts(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.declarations()
            .map(|d| d.decl_text.as_str())
            .filter(|t| seen.insert(*t))
            .collect()
    }

    /// The unit as C text in declaration order: context first, core last.
    pub fn render_c(&self) -> String {
        let mut out = String::new();
        let mut seen = BTreeSet::new();
        let blocks = [
            ("types and macros", &self.types_and_macros),
            ("external variables", &self.external_variables),
            ("called functions", &self.called_functions),
        ];
        for (title, decls) in blocks {
            out.push_str(&format!("/* {title} */\n"));
            for d in decls {
                if seen.insert(d.decl_text.as_str()) {
                    out.push_str(&d.decl_text);
                    out.push('\n');
                }
            }
            out.push('\n');
        }
        out.push_str("/* core */\n");
        out.push_str(&self.core.body_text);
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    kind: DeclKind,
    file: String,
    line: u32,
    text: String,
}

/// Declaration index over a whole codebase.
#[derive(Debug, Clone)]
pub struct ContextProber {
    index: HashMap<String, Vec<Candidate>>,
    macros: BTreeSet<String>,
    /// file → (file → include distance)
    distances: HashMap<String, HashMap<String, usize>>,
    builtins: BTreeSet<String>,
    pub budget: usize,
}

impl ContextProber {
    pub fn new(module: &ModuleIR) -> Self {
        Self::with_config(module, &[], DEFAULT_BUDGET)
    }

    pub fn with_config(module: &ModuleIR, extra_builtins: &[String], budget: usize) -> Self {
        let mut index: HashMap<String, Vec<Candidate>> = HashMap::new();
        let mut has_prototype = BTreeSet::new();
        let mut macros = BTreeSet::new();
        for d in &module.decls {
            if d.kind == DeclKind::Function {
                has_prototype.insert(d.name.clone());
            }
            if matches!(d.item, TopLevelKind::Macro(_)) {
                macros.insert(d.name.clone());
            }
            index.entry(d.name.clone()).or_default().push(Candidate {
                kind: d.kind,
                file: d.file.clone(),
                line: d.line,
                text: d.text.clone(),
            });
        }
        for f in &module.functions {
            if has_prototype.contains(&f.name) {
                continue;
            }
            index.entry(f.name.clone()).or_default().push(Candidate {
                kind: DeclKind::Function,
                file: f.file.clone(),
                line: f.body_span.0,
                text: format!("{};", f.signature),
            });
        }
        for c in index.values_mut() {
            c.sort_by(|a, b| (&a.file, a.line).cmp(&(&b.file, b.line)));
            c.dedup_by(|a, b| a.kind == b.kind && a.text == b.text);
        }

        let mut distances = HashMap::new();
        for f in &module.files {
            let mut dist = HashMap::from([(f.path.clone(), 0usize)]);
            let mut queue = VecDeque::from([f.path.clone()]);
            while let Some(cur) = queue.pop_front() {
                let d = dist[&cur];
                for inc in module.includes.get(&cur).into_iter().flatten() {
                    if let Some(target) = module.resolve_include(&cur, inc) {
                        if !dist.contains_key(target) {
                            dist.insert(target.to_string(), d + 1);
                            queue.push_back(target.to_string());
                        }
                    }
                }
            }
            distances.insert(f.path.clone(), dist);
        }

        let mut builtins: BTreeSet<String> = DEFAULT_BUILTINS.iter().map(|s| s.to_string()).collect();
        builtins.extend(known_typedefs());
        builtins.extend(extra_builtins.iter().cloned());
        ContextProber {
            index,
            macros,
            distances,
            builtins,
            budget,
        }
    }

    pub fn is_builtin(&self, name: &str) -> bool {
        is_keyword(name) || self.builtins.contains(name) || name.starts_with("__builtin_")
    }

    /// Free identifiers of `core` that need a declaration, classified by usage.
    pub fn collect_unresolved(&self, core: &FunctionUnit) -> Vec<SymbolRef> {
        core.referenced
            .iter()
            .filter(|n| !self.is_builtin(n))
            .map(|name| SymbolRef {
                name: name.clone(),
                kind: self.classify(core, name),
                origin: core.id.clone(),
            })
            .collect()
    }

    fn classify(&self, core: &FunctionUnit, name: &str) -> SymbolKind {
        if name.contains(' ') || core.type_names.contains(name) {
            SymbolKind::Type
        } else if self.macros.contains(name) {
            SymbolKind::Macro
        } else if core.calls.contains(name) {
            SymbolKind::Function
        } else if is_all_caps(name) {
            SymbolKind::Macro
        } else {
            SymbolKind::Variable
        }
    }

    /// Finds the declaration for `sym`, as seen from `from_file`. Falls back to
    /// other kinds when nothing of the classified kind exists.
    pub fn global_search(&self, sym: &SymbolRef, from_file: &str) -> Result<(Declaration, Option<Ambiguity>)> {
        let cands = self
            .index
            .get(&sym.name)
            .ok_or_else(|| Error::SymbolNotFound(sym.name.clone()))?;
        let mut kinds: Vec<DeclKind> = sym.kind.decl_kind().into_iter().collect();
        for k in [DeclKind::Macro, DeclKind::Type, DeclKind::Variable, DeclKind::Function] {
            if !kinds.contains(&k) {
                kinds.push(k);
            }
        }
        for kind in kinds {
            let mut matching: Vec<&Candidate> = cands.iter().filter(|c| c.kind == kind).collect();
            if matching.is_empty() {
                continue;
            }
            let dist = self.distances.get(from_file);
            matching.sort_by_key(|c| {
                let d = dist.and_then(|m| m.get(&c.file)).copied().unwrap_or(usize::MAX);
                (d, c.file.clone(), c.line)
            });
            let best = matching[0];
            let ambiguity = (matching.len() > 1).then(|| {
                let candidates = matching.iter().map(|c| (c.file.clone(), c.line)).collect();
                log::info!(
                    "ambiguous symbol `{}` for {}: candidates {:?}, chose {}:{}",
                    sym.name,
                    sym.origin,
                    candidates,
                    best.file,
                    best.line
                );
                Ambiguity {
                    name: sym.name.clone(),
                    chosen: (best.file.clone(), best.line),
                    candidates,
                }
            });
            let decl = Declaration {
                symbol: SymbolRef {
                    name: sym.name.clone(),
                    kind: SymbolKind::from_decl(kind),
                    origin: sym.origin.clone(),
                },
                decl_text: best.text.clone(),
                source: (best.file.clone(), best.line),
            };
            return Ok((decl, ambiguity));
        }
        Err(Error::SymbolNotFound(sym.name.clone()))
    }

    /// Names of types and macros mentioned inside a declaration's text.
    fn dependencies(&self, decl: &Declaration) -> Vec<(String, SymbolKind)> {
        let Ok(toks) = tokenize(&decl.decl_text) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        // Function-like macro parameters are not free names.
        let mut params = BTreeSet::new();
        if decl.symbol.kind == SymbolKind::Macro {
            if let Some(t) = toks.first().filter(|t| t.kind == TokenKind::Directive) {
                if let Some(open) = t.text.find(&format!("{}(", decl.symbol.name)) {
                    let rest = &t.text[open + decl.symbol.name.len() + 1..];
                    if let Some(close) = rest.find(')') {
                        params.extend(rest[..close].split(',').map(|p| p.trim().to_string()));
                    }
                }
                return self.directive_dependencies(&t.text, &decl.symbol.name, &params);
            }
        }
        for (i, t) in toks.iter().enumerate() {
            if t.kind != TokenKind::Ident {
                continue;
            }
            if matches!(t.text.as_str(), "struct" | "union" | "enum") {
                if let Some(n) = toks.get(i + 1).filter(|n| n.is_ident()) {
                    out.push((format!("{} {}", t.text, n.text), SymbolKind::Type));
                }
                continue;
            }
            if !t.is_ident() || (i > 0 && matches!(toks[i - 1].text.as_str(), "struct" | "union" | "enum" | "." | "->"))
            {
                continue;
            }
            if let Some(cands) = self.index.get(&t.text) {
                if cands.iter().any(|c| c.kind == DeclKind::Type) {
                    out.push((t.text.clone(), SymbolKind::Type));
                } else if cands.iter().any(|c| c.kind == DeclKind::Macro) {
                    out.push((t.text.clone(), SymbolKind::Macro));
                }
            }
        }
        out.retain(|(n, _)| *n != decl.symbol.name);
        out
    }

    fn directive_dependencies(&self, text: &str, own: &str, params: &BTreeSet<String>) -> Vec<(String, SymbolKind)> {
        let body = text.trim_start_matches('#').trim_start();
        let body = body.strip_prefix("define").unwrap_or(body);
        let Ok(toks) = tokenize(body) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (i, t) in toks.iter().enumerate() {
            if !t.is_ident() || t.text == own || params.contains(&t.text) {
                continue;
            }
            if i > 0 && matches!(toks[i - 1].text.as_str(), "." | "->") {
                continue;
            }
            if let Some(cands) = self.index.get(&t.text) {
                if cands.iter().any(|c| c.kind == DeclKind::Type) {
                    out.push((t.text.clone(), SymbolKind::Type));
                } else if cands.iter().any(|c| c.kind == DeclKind::Macro) {
                    out.push((t.text.clone(), SymbolKind::Macro));
                }
            }
        }
        out
    }

    /// Resolves every free identifier of `core` and assembles the unit. The
    /// budget is not enforced here; see [`ContextProber::probe_within_budget`].
    pub fn resolve(&self, core: &FunctionUnit) -> (Vec<Declaration>, Vec<SymbolRef>, Vec<Ambiguity>) {
        let mut decls = Vec::new();
        let mut unresolved = Vec::new();
        let mut ambiguities = Vec::new();
        for sym in self.collect_unresolved(core) {
            match self.global_search(&sym, &core.file) {
                Ok((d, amb)) => {
                    decls.push(d);
                    ambiguities.extend(amb);
                }
                Err(_) => unresolved.push(sym),
            }
        }
        (decls, unresolved, ambiguities)
    }

    /// Orders, deduplicates and closes `decls` over the types and macros they
    /// mention; fails when context plus core exceed the line budget.
    pub fn assemble_context(&self, core: &FunctionUnit, decls: &[Declaration]) -> Result<TranslationUnit> {
        let unit = self.assemble_unchecked(core, decls, Vec::new());
        let total = unit.context_line_count + core.line_count as usize;
        if total > self.budget {
            return Err(Error::ContextBudgetExceeded {
                lines: total,
                budget: self.budget,
            });
        }
        Ok(unit)
    }

    fn assemble_unchecked(
        &self,
        core: &FunctionUnit,
        decls: &[Declaration],
        mut unresolved: Vec<SymbolRef>,
    ) -> TranslationUnit {
        let mut by_key: BTreeMap<(String, SymbolKind), Declaration> = BTreeMap::new();
        let mut queue: VecDeque<Declaration> = decls.iter().cloned().collect();
        while let Some(d) = queue.pop_front() {
            let key = (d.symbol.name.clone(), d.symbol.kind);
            if by_key.contains_key(&key) {
                continue;
            }
            for (name, kind) in self.dependencies(&d) {
                if by_key.contains_key(&(name.clone(), kind)) || self.is_builtin(&name) {
                    continue;
                }
                let sym = SymbolRef {
                    name,
                    kind,
                    origin: core.id.clone(),
                };
                match self.global_search(&sym, &d.source.0) {
                    Ok((dep, _)) => queue.push_back(dep),
                    Err(_) => {
                        if !unresolved.iter().any(|u| u.name == sym.name) {
                            unresolved.push(sym)
                        }
                    }
                }
            }
            by_key.insert(key, d);
        }
        let mut all: Vec<Declaration> = by_key.into_values().collect();
        all.sort_by(|a, b| (&a.source.0, a.source.1, &a.symbol.name).cmp(&(&b.source.0, b.source.1, &b.symbol.name)));
        let pick = |k: SymbolKind| -> Vec<Declaration> { all.iter().filter(|d| d.symbol.kind == k).cloned().collect() };
        let mut types_and_macros = pick(SymbolKind::Macro);
        types_and_macros.extend(pick(SymbolKind::Type));
        let mut unit = TranslationUnit {
            core: core.clone(),
            types_and_macros,
            external_variables: pick(SymbolKind::Variable),
            called_functions: pick(SymbolKind::Function),
            context_line_count: 0,
            unresolved,
            ambiguities: Vec::new(),
            warnings: Vec::new(),
        };
        unit.unresolved.sort();
        unit.context_line_count = unit.context_texts().iter().map(|t| text_lines(t)).sum();
        unit
    }

    /// Full probing for one function. When the budget is exceeded the
    /// external variables are dropped last-first until it fits, and a warning
    /// is recorded.
    pub fn probe(&self, core: &FunctionUnit) -> TranslationUnit {
        let (decls, unresolved, ambiguities) = self.resolve(core);
        let mut unit = self.assemble_unchecked(core, &decls, unresolved);
        unit.ambiguities = ambiguities;
        let over = |u: &TranslationUnit| u.context_line_count + core.line_count as usize > self.budget;
        if over(&unit) {
            let before = unit.context_line_count + core.line_count as usize;
            let mut dropped = Vec::new();
            while over(&unit) {
                let Some(v) = unit.external_variables.pop() else { break };
                dropped.push(v.symbol.name);
                unit.context_line_count = unit.context_texts().iter().map(|t| text_lines(t)).sum();
            }
            unit.warnings.push(format!(
                "context of {before} lines exceeds the budget of {}; dropped variables: [{}]",
                self.budget,
                dropped.join(", ")
            ));
            log::warn!("{}: {}", core.id, unit.warnings.last().unwrap());
        }
        unit
    }
}

fn is_all_caps(name: &str) -> bool {
    name.chars().any(|c| c.is_ascii_uppercase())
        && name
            .chars()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c_frontend::module::{parse_sources, SourceFile};

    fn module(files: &[(&str, &str)]) -> ModuleIR {
        parse_sources(files.iter().map(|(p, t)| SourceFile::new(*p, *t)).collect()).unwrap()
    }

    #[test]
    fn own_parameters_only() {
        let m = module(&[("a.c", "int add(int a, int b) { return a + b; }")]);
        let p = ContextProber::new(&m);
        assert!(p.collect_unresolved(&m.functions[0]).is_empty());
        let unit = p.probe(&m.functions[0]);
        assert_eq!(unit.context_line_count, 0);
        assert!(unit.declarations().next().is_none());
    }

    #[test]
    fn macro_and_function_kinds() {
        let m = module(&[(
            "a.c",
            "#define PAGE_SIZE 4096\nvoid *kmalloc(unsigned long n, int flags);\nvoid *grab(void) { return kmalloc(PAGE_SIZE, 0); }",
        )]);
        let p = ContextProber::new(&m);
        let syms = p.collect_unresolved(&m.functions[0]);
        let kinds: Vec<_> = syms.iter().map(|s| (s.name.as_str(), s.kind)).collect();
        assert_eq!(
            kinds,
            [("PAGE_SIZE", SymbolKind::Macro), ("kmalloc", SymbolKind::Function)]
        );
        let unit = p.probe(&m.functions[0]);
        assert_eq!(unit.context_line_count, 2);
    }

    #[test]
    fn prototype_is_synthesized_without_body() {
        let m = module(&[(
            "a.c",
            "int sort(int *v, int n)\n{\n  return n;\n}\nint use(int *v) { return sort(v, 3); }",
        )]);
        let p = ContextProber::new(&m);
        let unit = p.probe(m.function("a.c::use").unwrap());
        assert_eq!(unit.called_functions.len(), 1);
        assert_eq!(unit.called_functions[0].decl_text, "int sort(int *v, int n);");
        assert!(!unit.called_functions[0].decl_text.contains('{'));
    }

    #[test]
    fn struct_block_is_copied_verbatim_with_closure() {
        let header = "typedef unsigned int gfp_flags;\nstruct inode {\n\tgfp_flags mode;\n\tlong size;\n};\n";
        let m = module(&[
            ("fs.h", header),
            ("a.c", "#include \"fs.h\"\nlong sz(struct inode *i) { return i->size; }"),
        ]);
        let p = ContextProber::new(&m);
        let unit = p.probe(&m.functions[0]);
        let texts = unit.context_texts();
        assert!(texts.contains(&"struct inode {\n\tgfp_flags mode;\n\tlong size;\n};"));
        assert!(texts.contains(&"typedef unsigned int gfp_flags;"));
    }

    #[test]
    fn nearest_include_wins() {
        let m = module(&[
            ("a.h", "#define LIMIT 1\n"),
            ("b.h", "#define LIMIT 2\n"),
            ("x.c", "#include \"b.h\"\nint f(void) { return LIMIT; }"),
        ]);
        let p = ContextProber::new(&m);
        let unit = p.probe(&m.functions[0]);
        assert_eq!(unit.types_and_macros[0].source.0, "b.h");
        assert_eq!(unit.ambiguities.len(), 1);
        assert_eq!(unit.ambiguities[0].candidates.len(), 2);
    }

    #[test]
    fn missing_symbol_goes_to_report() {
        let m = module(&[("a.c", "int f(void) { return missing_var; }")]);
        let unit = ContextProber::new(&m).probe(&m.functions[0]);
        assert_eq!(unit.unresolved.len(), 1);
        assert_eq!(unit.unresolved[0].name, "missing_var");
    }

    #[test]
    fn budget_exceeded() {
        let body: String = (0..150).map(|i| format!("  x += {i};\n")).collect();
        let vars: String = (0..80).map(|i| format!("int g{i};\n")).collect();
        let uses: String = (0..80).map(|i| format!("  x += g{i};\n")).collect();
        let src = format!("{vars}int f(int x) {{\n{body}{uses}return x;\n}}\n");
        let m = module(&[("a.c", &src)]);
        let p = ContextProber::new(&m);
        let (decls, _, _) = p.resolve(&m.functions[0]);
        assert!(matches!(
            p.assemble_context(&m.functions[0], &decls),
            Err(Error::ContextBudgetExceeded { budget: 200, .. })
        ));
        let unit = p.probe(&m.functions[0]);
        assert_eq!(unit.warnings.len(), 1);
    }

    #[test]
    fn assemble_is_idempotent() {
        let m = module(&[(
            "a.c",
            "#define N 4\ntypedef struct { int v[N]; } box_t;\nbox_t g;\nint h(int);\nint f(void) { return g.v[0] + h(N); }",
        )]);
        let p = ContextProber::new(&m);
        let unit = p.probe(m.function("a.c::f").unwrap());
        let decls: Vec<_> = unit.declarations().cloned().collect();
        let again = p.assemble_context(&unit.core, &decls).unwrap();
        assert_eq!(
            again.declarations().collect::<Vec<_>>(),
            unit.declarations().collect::<Vec<_>>()
        );
        assert_eq!(again.context_line_count, unit.context_line_count);
    }
}
