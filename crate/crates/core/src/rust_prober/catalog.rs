use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::c_frontend::ast::*;
use crate::c_frontend::module::ModuleIR;
use crate::c_frontend::parser::parse_expression;
use crate::error::{Error, Result};
use crate::rust_syntax::split_items;
use crate::typemap::{eval_const, int_literal, rust_type, ConstEnv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CatalogKind {
    ExternFn,
    Variable,
    MacroConst,
    Type,
}

impl CatalogKind {
    /// Higher wins when several kinds share a name.
    pub fn priority(self) -> u8 {
        match self {
            CatalogKind::ExternFn => 0,
            CatalogKind::Variable => 1,
            CatalogKind::MacroConst => 2,
            CatalogKind::Type => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CatalogProvenance {
    Generated,
    Translated,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub kind: CatalogKind,
    pub rust_text: String,
    pub provenance: CatalogProvenance,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContextCatalog {
    pub entries: Vec<CatalogEntry>,
}

impl ContextCatalog {
    /// Builds a catalog, checking that every entry is one parseable item and
    /// that names are unique per kind.
    pub fn new(entries: Vec<CatalogEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert((e.name.clone(), e.kind)) {
                return Err(Error::Catalog(format!("duplicate {:?} entry `{}`", e.kind, e.name)));
            }
            let items = split_items(&e.rust_text)
                .map_err(|err| Error::Catalog(format!("entry `{}` does not parse: {err}", e.name)))?;
            if items.len() != 1 {
                return Err(Error::Catalog(format!(
                    "entry `{}` must hold exactly one item, found {}",
                    e.name,
                    items.len()
                )));
            }
        }
        Ok(ContextCatalog { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries: Vec<CatalogEntry> =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Self::new(entries)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("catalog serializes") + "\n"
    }

    /// The entry for `name` with the highest kind priority.
    pub fn get(&self, name: &str) -> Option<&CatalogEntry> {
        self.entries
            .iter()
            .filter(|e| e.name == name)
            .max_by_key(|e| e.kind.priority())
    }

    /// Adds entries from `other` whose (name, kind) is not present yet.
    pub fn merge(&mut self, other: ContextCatalog) {
        let have: HashSet<_> = self.entries.iter().map(|e| (e.name.clone(), e.kind)).collect();
        self.entries.extend(
            other
                .entries
                .into_iter()
                .filter(|e| !have.contains(&(e.name.clone(), e.kind))),
        );
    }
}

const RUST_KEYWORDS: &[&str] = &[
    "as", "async", "await", "box", "crate", "dyn", "fn", "impl", "in", "let", "loop", "match", "mod", "move", "mut",
    "pub", "ref", "self", "trait", "type", "unsafe", "use", "where", "abstract", "become", "final", "macro",
    "override", "priv", "try", "typeof", "unsized", "virtual", "yield",
];

/// Escapes C identifiers that are Rust keywords.
pub fn rust_ident(name: &str) -> String {
    if RUST_KEYWORDS.contains(&name) {
        format!("r#{name}")
    } else {
        name.to_string()
    }
}

/// Integer constants known from object-like macros and enumerators.
pub fn const_env(module: &ModuleIR) -> ConstEnv {
    let typedefs: HashSet<String> = module.typedefs.iter().cloned().collect();
    let mut env = ConstEnv::default();
    let mut macro_exprs = Vec::new();
    for d in &module.decls {
        if let TopLevelKind::Macro(MacroDef {
            name,
            params: None,
            body,
        }) = &d.item
        {
            if let Ok(e) = parse_expression(body, &typedefs) {
                macro_exprs.push((name.clone(), e));
            }
        }
    }
    // Iterate to a fixpoint so definitions may appear in any order.
    loop {
        let before = env.values.len();
        for (name, e) in &macro_exprs {
            if !env.values.contains_key(name) {
                if let Some(v) = eval_const(e, &env) {
                    env.values.insert(name.clone(), v);
                }
            }
        }
        for d in &module.decls {
            if let TopLevelKind::Record {
                ty:
                    CType::Base {
                        base: BaseType::Enum(EnumDef { variants: Some(vs), .. }),
                        ..
                    },
            } = &d.item
            {
                let mut next = Some(0i128);
                for (v, init) in vs {
                    let val = match init {
                        Some(e) => eval_const(e, &env),
                        None => next,
                    };
                    if let Some(val) = val {
                        env.values.entry(v.clone()).or_insert(val);
                    }
                    next = val.map(|x| x + 1);
                }
            }
        }
        if env.values.len() == before {
            return env;
        }
    }
}

fn int_const_type(value: i128, unsigned: bool) -> &'static str {
    match (unsigned, value) {
        (false, v) if i32::try_from(v).is_ok() => "i32",
        (_, v) if u32::try_from(v).is_ok() && unsigned => "u32",
        (false, v) if i64::try_from(v).is_ok() => "i64",
        _ => "u64",
    }
}

fn struct_text(keyword: &str, name: &str, fields: &[Field], env: &ConstEnv) -> String {
    let mut s = format!(
        "#[repr(C)]\n#[derive(Clone, Copy)]\npub {keyword} {} {{\n",
        rust_ident(name)
    );
    for f in fields {
        s.push_str(&format!(
            "    pub {}: {},\n",
            rust_ident(&f.name),
            rust_type(&f.ty, env)
        ));
    }
    s.push('}');
    s
}

fn static_init(ty: &CType, init: Option<&Expr>, env: &ConstEnv) -> String {
    if let (CType::Base { base, .. }, Some(e)) = (ty, init) {
        let rt = rust_type(ty, env);
        match base {
            BaseType::Float | BaseType::Double => {
                if let Expr::FloatLit(t) = e {
                    return format!("{}{rt}", t.trim_end_matches(['f', 'F', 'l', 'L']));
                }
            }
            BaseType::Bool => {
                if let Some(v) = eval_const(e, env) {
                    return (v != 0).to_string();
                }
            }
            BaseType::Struct(_) | BaseType::Union(_) | BaseType::Void => {}
            _ => {
                if let Some(v) = eval_const(e, env) {
                    return format!("{v} as {rt}");
                }
            }
        }
    }
    "unsafe { core::mem::zeroed() }".into()
}

fn extern_fn_text(name: &str, ft: &FnType, env: &ConstEnv) -> String {
    let mut params: Vec<String> = ft
        .params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let n = p.name.as_deref().map(rust_ident).unwrap_or_else(|| format!("arg{i}"));
            format!("{n}: {}", rust_type(&p.ty, env))
        })
        .collect();
    if ft.variadic {
        params.push("...".into());
    }
    let ret = if ft.ret.is_void() {
        String::new()
    } else {
        format!(" -> {}", rust_type(&ft.ret, env))
    };
    format!(
        "extern \"C\" {{\n    pub fn {}({}){ret};\n}}",
        rust_ident(name),
        params.join(", ")
    )
}

/// The built-in binding generator for the supported C subset: records become
/// `repr(C)` structs, object-like macros and enumerators constants, globals
/// `static mut` items, and prototypes of functions defined outside the module
/// `extern "C"` declarations.
pub fn generate_catalog(module: &ModuleIR) -> ContextCatalog {
    let env = const_env(module);
    let defined: BTreeSet<&str> = module.functions.iter().map(|f| f.name.as_str()).collect();
    let mut out: BTreeMap<(String, CatalogKind), String> = BTreeMap::new();
    let mut order: Vec<(String, CatalogKind)> = Vec::new();
    let mut var_has_init: HashSet<String> = HashSet::new();
    let mut push = |out: &mut BTreeMap<_, _>, name: &str, kind, text: String, replace: bool| {
        let key = (name.to_string(), kind);
        match out.entry(key) {
            std::collections::btree_map::Entry::Vacant(v) => {
                order.push(v.key().clone());
                v.insert(text);
            }
            std::collections::btree_map::Entry::Occupied(mut o) if replace => {
                o.insert(text);
            }
            std::collections::btree_map::Entry::Occupied(_) => {}
        }
    };

    for d in &module.decls {
        match &d.item {
            TopLevelKind::Macro(MacroDef {
                name,
                params: None,
                body,
            }) => {
                if let Some(v) = env.get(name) {
                    let unsigned = int_literal(body.trim_matches(['(', ')'])).is_some_and(|x| x.1);
                    let ty = int_const_type(v, unsigned || v > i64::MAX as i128);
                    push(
                        &mut out,
                        name,
                        CatalogKind::MacroConst,
                        format!("pub const {}: {ty} = {v};", rust_ident(name)),
                        false,
                    );
                } else if let Ok(Expr::FloatLit(t)) = parse_expression(body, &Default::default()) {
                    let lit = t.trim_end_matches(['f', 'F', 'l', 'L']);
                    push(
                        &mut out,
                        name,
                        CatalogKind::MacroConst,
                        format!("pub const {}: f64 = {lit};", rust_ident(name)),
                        false,
                    );
                }
            }
            TopLevelKind::Record {
                ty: CType::Base { base, .. },
            } => match base {
                BaseType::Struct(Record {
                    tag: Some(t),
                    fields: Some(fs),
                }) => push(
                    &mut out,
                    t,
                    CatalogKind::Type,
                    struct_text("struct", t, fs, &env),
                    false,
                ),
                BaseType::Union(Record {
                    tag: Some(t),
                    fields: Some(fs),
                }) => push(&mut out, t, CatalogKind::Type, struct_text("union", t, fs, &env), false),
                BaseType::Enum(EnumDef {
                    tag,
                    variants: Some(vs),
                }) => {
                    if let Some(t) = tag {
                        push(
                            &mut out,
                            t,
                            CatalogKind::Type,
                            format!("pub type {} = i32;", rust_ident(t)),
                            false,
                        );
                    }
                    for (v, _) in vs {
                        if let Some(val) = env.get(v) {
                            push(
                                &mut out,
                                v,
                                CatalogKind::MacroConst,
                                format!("pub const {}: i32 = {val};", rust_ident(v)),
                                false,
                            );
                        }
                    }
                }
                _ => {}
            },
            TopLevelKind::Typedef { name, ty } => {
                let text = match ty {
                    CType::Base {
                        base:
                            BaseType::Struct(Record {
                                tag: None,
                                fields: Some(fs),
                            }),
                        ..
                    } => struct_text("struct", name, fs, &env),
                    CType::Base {
                        base:
                            BaseType::Union(Record {
                                tag: None,
                                fields: Some(fs),
                            }),
                        ..
                    } => struct_text("union", name, fs, &env),
                    CType::Base {
                        base: BaseType::Enum(EnumDef { tag: None, .. }),
                        ..
                    } => {
                        format!("pub type {} = i32;", rust_ident(name))
                    }
                    _ => {
                        let rt = rust_type(ty, &env);
                        if rt == *name {
                            continue;
                        }
                        format!("pub type {} = {rt};", rust_ident(name))
                    }
                };
                push(&mut out, name, CatalogKind::Type, text, false);
            }
            TopLevelKind::Variable {
                name,
                ty,
                is_extern,
                init,
                ..
            } => {
                if matches!(ty, CType::Function(_)) {
                    continue;
                }
                let text = format!(
                    "pub static mut {}: {} = {};",
                    rust_ident(name),
                    rust_type(ty, &env),
                    static_init(ty, init.as_ref(), &env)
                );
                let better = init.is_some() || !is_extern;
                let replace = better && !var_has_init.contains(name);
                if init.is_some() {
                    var_has_init.insert(name.clone());
                }
                push(&mut out, name, CatalogKind::Variable, text, replace);
            }
            TopLevelKind::Prototype { name, fn_type, .. } if !defined.contains(name.as_str()) => {
                push(
                    &mut out,
                    name,
                    CatalogKind::ExternFn,
                    extern_fn_text(name, fn_type, &env),
                    false,
                );
            }
            _ => {}
        }
    }
    let entries = order
        .into_iter()
        .map(|key| CatalogEntry {
            rust_text: out[&key].clone(),
            name: key.0,
            kind: key.1,
            provenance: CatalogProvenance::Generated,
        })
        .filter(|e| split_items(&e.rust_text).is_ok_and(|i| i.len() == 1))
        .collect();
    ContextCatalog { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c_frontend::module::{parse_sources, SourceFile};

    fn catalog(src: &str) -> ContextCatalog {
        generate_catalog(&parse_sources(vec![SourceFile::new("a.c", src)]).unwrap())
    }

    #[test]
    fn generated_items() {
        let c = catalog(
            "#define SHIFT 4\n#define SIZE (1 << SHIFT)\nenum color { RED, GREEN = 5, BLUE };\n\
             struct node { int v; struct node *next; char name[SIZE]; };\ntypedef struct node node_t;\n\
             int counter = 3;\nextern int counter;\nint printf(const char *fmt, ...);\nint local(void);\nint local(void) { return 0; }\n",
        );
        let get = |n: &str| c.get(n).map(|e| e.rust_text.clone()).unwrap_or_default();
        assert_eq!(get("SIZE"), "pub const SIZE: i32 = 16;");
        assert_eq!(get("BLUE"), "pub const BLUE: i32 = 6;");
        assert_eq!(get("color"), "pub type color = i32;");
        assert!(get("node").contains("pub name: [i8; 16],"));
        assert!(get("node").contains("pub next: *mut node,"));
        assert_eq!(get("node_t"), "pub type node_t = node;");
        assert_eq!(get("counter"), "pub static mut counter: i32 = 3 as i32;");
        assert!(get("printf").contains("pub fn printf(fmt: *const i8, ...) -> i32;"));
        assert!(c.get("local").is_none());
        ContextCatalog::new(c.entries.clone()).unwrap();
    }

    #[test]
    fn kind_priority() {
        let c = ContextCatalog::new(vec![
            CatalogEntry {
                name: "x".into(),
                kind: CatalogKind::ExternFn,
                rust_text: "extern \"C\" { pub fn x(); }".into(),
                provenance: CatalogProvenance::Generated,
            },
            CatalogEntry {
                name: "x".into(),
                kind: CatalogKind::Type,
                rust_text: "pub type x = i32;".into(),
                provenance: CatalogProvenance::Generated,
            },
        ])
        .unwrap();
        assert_eq!(c.get("x").unwrap().kind, CatalogKind::Type);
    }

    #[test]
    fn invalid_entry_rejected() {
        let bad = vec![CatalogEntry {
            name: "x".into(),
            kind: CatalogKind::Type,
            rust_text: "pub type x = ;".into(),
            provenance: CatalogProvenance::Manual,
        }];
        assert!(matches!(ContextCatalog::new(bad), Err(Error::Catalog(_))));
    }
}
