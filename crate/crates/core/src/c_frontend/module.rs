use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::parser::{builtin_typedefs, parse_translation_unit, ParseError};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    Source,
    Header,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    /// Path relative to the codebase root, always with `/` separators.
    pub path: String,
    pub text: String,
    pub kind: FileKind,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        let path = path.into();
        let kind = if path.ends_with(".h") {
            FileKind::Header
        } else {
            FileKind::Source
        };
        SourceFile {
            path,
            text: text.into(),
            kind,
        }
    }
}

/// Stable function identity: `<relative path>::<name>`.
pub type FunctionId = String;

pub fn function_id(file: &str, name: &str) -> FunctionId {
    format!("{file}::{name}")
}

/// A file-system safe stem for per-function artifacts.
pub fn id_stem(id: &str) -> String {
    id.chars()
        .map(|c| match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' | '_' | '-' => c,
            _ => '_',
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionUnit {
    pub id: FunctionId,
    pub name: String,
    pub file: String,
    /// Inclusive 1-based line span.
    pub body_span: (u32, u32),
    /// Byte range in the owning file.
    pub byte_range: (usize, usize),
    pub body_text: String,
    /// Everything before the opening brace, whitespace-normalised.
    pub signature: String,
    pub is_static: bool,
    pub locals: BTreeSet<String>,
    /// Free identifiers. Record and enum tags are spelled `struct foo`, `union foo`, `enum foo`.
    pub referenced: BTreeSet<String>,
    /// Identifiers applied directly to an argument list.
    pub calls: BTreeSet<String>,
    /// Calls through a member or dereferenced pointer, keyed by the pointer's name.
    pub indirect_calls: BTreeSet<String>,
    /// Identifiers that appear in a type position (typedef names and tags).
    pub type_names: BTreeSet<String>,
    pub statement_count: usize,
    pub line_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclKind {
    Macro,
    Type,
    Variable,
    Function,
}

/// A module-level declaration that is not a function definition.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleDecl {
    pub name: String,
    pub kind: DeclKind,
    pub file: String,
    pub line: u32,
    /// Exact source slice of the whole declaration.
    pub text: String,
    pub item: TopLevelKind,
}

#[derive(Debug, Clone)]
pub struct ModuleIR {
    pub files: Vec<SourceFile>,
    pub functions: Vec<FunctionUnit>,
    pub decls: Vec<ModuleDecl>,
    /// Parsed definitions, parallel to `functions`.
    pub defs: Vec<FunctionDef>,
    /// file → include paths as written.
    pub includes: BTreeMap<String, Vec<String>>,
    pub typedefs: BTreeSet<String>,
}

impl ModuleIR {
    pub fn function(&self, id: &str) -> Option<&FunctionUnit> {
        self.functions.iter().find(|f| f.id == id)
    }

    pub fn def(&self, id: &str) -> Option<&FunctionDef> {
        self.functions.iter().position(|f| f.id == id).map(|i| &self.defs[i])
    }

    pub fn file(&self, path: &str) -> Option<&SourceFile> {
        self.files.iter().find(|f| f.path == path)
    }

    pub fn macros(&self) -> impl Iterator<Item = &MacroDef> {
        self.decls.iter().filter_map(|d| match &d.item {
            TopLevelKind::Macro(m) => Some(m),
            _ => None,
        })
    }

    /// Resolves an include path written in `from` to a file of the module.
    pub fn resolve_include(&self, from: &str, include: &str) -> Option<&str> {
        let dir = Path::new(from).parent().unwrap_or(Path::new(""));
        let joined = normalize(&dir.join(include));
        if let Some(f) = self.files.iter().find(|f| f.path == joined) {
            return Some(&f.path);
        }
        if let Some(f) = self.files.iter().find(|f| f.path == include) {
            return Some(&f.path);
        }
        let base = Path::new(include).file_name()?.to_str()?;
        self.files
            .iter()
            .find(|f| Path::new(&f.path).file_name().and_then(|n| n.to_str()) == Some(base))
            .map(|f| f.path.as_str())
    }

    /// Text outside every function definition, in file order, interleaved with the
    /// function bodies: concatenating the pieces reproduces the file.
    pub fn pieces(&self, path: &str) -> Vec<(bool, &str)> {
        let Some(file) = self.file(path) else {
            return Vec::new();
        };
        let mut spans: Vec<_> = self
            .functions
            .iter()
            .filter(|f| f.file == path)
            .map(|f| f.byte_range)
            .collect();
        spans.sort();
        let mut out = Vec::new();
        let mut pos = 0;
        for (s, e) in spans {
            out.push((false, &file.text[pos..s]));
            out.push((true, &file.text[s..e]));
            pos = e;
        }
        out.push((false, &file.text[pos..]));
        out
    }
}

fn normalize(p: &Path) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for c in p.components() {
        match c {
            std::path::Component::ParentDir => {
                parts.pop();
            }
            std::path::Component::Normal(s) => parts.push(s.to_str().unwrap_or("")),
            _ => {}
        }
    }
    parts.join("/")
}

/// Expands directories recursively and returns `.c`/`.h` files sorted by path.
pub fn collect_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        let meta = fs::metadata(p).map_err(|e| Error::io(p, e))?;
        if meta.is_dir() {
            walk_dir(p, &mut out)?;
        } else {
            out.push(p.clone());
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn walk_dir(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            walk_dir(&path, out)?;
        } else if matches!(path.extension().and_then(|e| e.to_str()), Some("c" | "h")) {
            out.push(path);
        }
    }
    Ok(())
}

/// Reads and parses the given files (or directories). Paths are recorded
/// relative to `root`.
pub fn parse_module(root: &Path, paths: &[PathBuf]) -> Result<ModuleIR> {
    let files = collect_paths(paths)?;
    let mut sources = Vec::new();
    for p in files {
        let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        let text = String::from_utf8(bytes).map_err(|_| Error::Parse {
            file: p.display().to_string(),
            line: 1,
            message: "file is not valid UTF-8".into(),
        })?;
        let rel = p.strip_prefix(root).unwrap_or(&p).to_string_lossy().replace('\\', "/");
        sources.push(SourceFile::new(rel, text));
    }
    parse_sources(sources)
}

/// Parses in-memory files. Headers are parsed before sources so typedef
/// names are known when bodies are parsed.
pub fn parse_sources(mut files: Vec<SourceFile>) -> Result<ModuleIR> {
    files.sort_by(|a, b| a.path.cmp(&b.path));
    if files.windows(2).any(|w| w[0].path == w[1].path) {
        return Err(Error::Config("duplicate path in module".into()));
    }
    if !files.iter().any(|f| f.kind == FileKind::Source) {
        return Err(Error::Config("module has no source file".into()));
    }
    if let Some(f) = files.iter().find(|f| f.text.is_empty()) {
        return Err(Error::Parse {
            file: f.path.clone(),
            line: 1,
            message: "empty file".into(),
        });
    }
    let mut typedefs: HashSet<String> = HashSet::new();
    let mut order: Vec<usize> = (0..files.len()).collect();
    order.sort_by_key(|&i| (files[i].kind != FileKind::Header, files[i].path.clone()));

    let mut parsed: Vec<Option<Vec<TopLevel>>> = vec![None; files.len()];
    let mut failed = Vec::new();
    for &i in &order {
        match parse_translation_unit(&files[i].text, &mut typedefs) {
            Ok(items) => parsed[i] = Some(items),
            Err(e) => failed.push((i, e)),
        }
    }
    // A later file may declare a typedef an earlier one needed.
    for (i, first_err) in failed {
        match parse_translation_unit(&files[i].text, &mut typedefs) {
            Ok(items) => parsed[i] = Some(items),
            Err(_) => return Err(parse_error(&files[i].path, first_err)),
        }
    }

    let mut module = ModuleIR {
        files: Vec::new(),
        functions: Vec::new(),
        decls: Vec::new(),
        defs: Vec::new(),
        includes: BTreeMap::new(),
        typedefs: typedefs.into_iter().collect(),
    };
    for (file, items) in files.iter().zip(parsed) {
        let items = items.expect("every file parsed");
        let mut includes = Vec::new();
        for item in items {
            let text = &file.text[item.start..item.end];
            match item.kind {
                TopLevelKind::Function(def) => {
                    let unit = analyze_function(file, &def);
                    module.functions.push(unit);
                    module.defs.push(def);
                }
                TopLevelKind::Include { ref path, .. } => includes.push(path.clone()),
                TopLevelKind::OtherDirective => {}
                kind => {
                    for (name, dk) in decl_names(&kind) {
                        module.decls.push(ModuleDecl {
                            name,
                            kind: dk,
                            file: file.path.clone(),
                            line: item.line,
                            text: text.to_string(),
                            item: kind.clone(),
                        });
                    }
                }
            }
        }
        module.includes.insert(file.path.clone(), includes);
    }
    module.files = files;
    Ok(module)
}

fn parse_error(file: &str, e: ParseError) -> Error {
    Error::Parse {
        file: file.to_string(),
        line: e.line,
        message: e.message,
    }
}

/// Names (with their kind) introduced by a top-level declaration.
pub fn decl_names(kind: &TopLevelKind) -> Vec<(String, DeclKind)> {
    match kind {
        TopLevelKind::Macro(m) => vec![(m.name.clone(), DeclKind::Macro)],
        TopLevelKind::Typedef { name, .. } => vec![(name.clone(), DeclKind::Type)],
        TopLevelKind::Variable { name, .. } => vec![(name.clone(), DeclKind::Variable)],
        TopLevelKind::Prototype { name, .. } => vec![(name.clone(), DeclKind::Function)],
        TopLevelKind::Record { ty } => {
            let mut out = Vec::new();
            if let CType::Base { base, .. } = ty {
                match base {
                    BaseType::Struct(r) => {
                        if let Some(t) = &r.tag {
                            out.push((format!("struct {t}"), DeclKind::Type));
                        }
                    }
                    BaseType::Union(r) => {
                        if let Some(t) = &r.tag {
                            out.push((format!("union {t}"), DeclKind::Type));
                        }
                    }
                    BaseType::Enum(e) => {
                        if let Some(t) = &e.tag {
                            out.push((format!("enum {t}"), DeclKind::Type));
                        }
                        // Enumerators behave like integer constants.
                        for (v, _) in e.variants.iter().flatten() {
                            out.push((v.clone(), DeclKind::Macro));
                        }
                    }
                    _ => {}
                }
            }
            out
        }
        _ => Vec::new(),
    }
}

fn line_of(text: &str, byte: usize) -> u32 {
    text.as_bytes()[..byte].iter().filter(|&&b| b == b'\n').count() as u32 + 1
}

fn analyze_function(file: &SourceFile, def: &FunctionDef) -> FunctionUnit {
    let start_line = line_of(&file.text, def.start);
    let end_line = line_of(&file.text, def.end.saturating_sub(1).max(def.start));
    let signature = file.text[def.start..def.body_start]
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");

    let mut idents = IdentCollector::default();
    for p in &def.params {
        if let Some(n) = &p.name {
            idents.locals.insert(n.clone());
        }
        idents.ty(&p.ty);
    }
    idents.ty(&def.ret);
    for s in &def.body {
        idents.stmt(s);
    }
    let locals = idents.locals;
    let referenced: BTreeSet<String> = idents.used.into_iter().filter(|n| !locals.contains(n)).collect();
    let mut calls = BTreeSet::new();
    let mut indirect_calls = idents.indirect_calls;
    for c in idents.calls {
        if locals.contains(&c) {
            indirect_calls.insert(c);
        } else {
            calls.insert(c);
        }
    }

    FunctionUnit {
        id: function_id(&file.path, &def.name),
        name: def.name.clone(),
        file: file.path.clone(),
        body_span: (start_line, end_line),
        byte_range: (def.start, def.end),
        body_text: file.text[def.start..def.end].to_string(),
        signature,
        is_static: def.is_static,
        locals,
        referenced,
        calls,
        indirect_calls,
        type_names: idents.types,
        statement_count: count_statements(&def.body),
        line_count: end_line - start_line + 1,
    }
}

/// Counts parser-level statements, ignoring blocks, empty statements and labels.
pub fn count_statements(body: &[Stmt]) -> usize {
    let mut n = 0;
    for s in body {
        s.walk(&mut |s| {
            if !matches!(
                s,
                Stmt::Compound(_) | Stmt::Empty | Stmt::Labeled { .. } | Stmt::Case { .. } | Stmt::Default(_)
            ) {
                n += 1;
            }
        });
    }
    n
}

#[derive(Default)]
struct IdentCollector {
    locals: BTreeSet<String>,
    used: BTreeSet<String>,
    calls: BTreeSet<String>,
    indirect_calls: BTreeSet<String>,
    types: BTreeSet<String>,
}

impl IdentCollector {
    fn ty(&mut self, ty: &CType) {
        match ty {
            CType::Base { base, .. } => self.base(base),
            CType::Pointer { pointee, .. } => self.ty(pointee),
            CType::Array { elem, len } => {
                self.ty(elem);
                if let Some(l) = len {
                    self.expr(l);
                }
            }
            CType::Function(ft) => {
                self.ty(&ft.ret);
                for p in &ft.params {
                    self.ty(&p.ty);
                }
            }
        }
    }

    fn base(&mut self, base: &BaseType) {
        let tagged = |kw: &str, tag: &Option<String>| tag.as_ref().map(|t| format!("{kw} {t}"));
        let name = match base {
            BaseType::Named(n) => Some(n.clone()),
            BaseType::Struct(r) => {
                for f in r.fields.iter().flatten() {
                    self.ty(&f.ty);
                }
                tagged("struct", &r.tag)
            }
            BaseType::Union(r) => {
                for f in r.fields.iter().flatten() {
                    self.ty(&f.ty);
                }
                tagged("union", &r.tag)
            }
            BaseType::Enum(e) => tagged("enum", &e.tag),
            _ => None,
        };
        if let Some(n) = name {
            self.used.insert(n.clone());
            self.types.insert(n);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        s.walk(&mut |s| {
            if let Stmt::Decl(ds) = s {
                for d in ds {
                    self.locals.insert(d.name.clone());
                    self.ty(&d.ty);
                }
            }
            for e in s.exprs() {
                self.expr(e);
            }
        });
    }

    fn expr(&mut self, e: &Expr) {
        let mut types = Vec::new();
        e.walk(&mut |e| match e {
            Expr::Ident(n) => {
                self.used.insert(n.clone());
            }
            Expr::Call { callee, .. } => match &**callee {
                Expr::Ident(n) => {
                    self.calls.insert(n.clone());
                }
                other => {
                    if let Some(n) = pointer_name(other) {
                        self.indirect_calls.insert(n);
                    }
                }
            },
            Expr::Cast { ty, .. } | Expr::SizeofType(ty) | Expr::CompoundLiteral { ty, .. } => types.push(ty.clone()),
            _ => {}
        });
        for t in types {
            self.ty(&t);
        }
    }
}

/// Name under which an indirect call is recorded: the member or the
/// dereferenced variable.
fn pointer_name(e: &Expr) -> Option<String> {
    match e {
        Expr::Ident(n) => Some(n.clone()),
        Expr::Member { field, .. } => Some(field.clone()),
        Expr::Unary {
            op: UnaryOp::Deref,
            expr,
        } => pointer_name(expr),
        Expr::Index { base, .. } => pointer_name(base),
        _ => None,
    }
}

/// Typedef names always known to the parser (fixed-width integers and kernel aliases).
pub fn known_typedefs() -> BTreeSet<String> {
    builtin_typedefs().map(String::from).collect()
}
