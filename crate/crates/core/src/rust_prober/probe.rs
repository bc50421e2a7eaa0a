use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::catalog::{CatalogKind, ContextCatalog};
use super::compile::Compiler;
use super::diagnostic::Diagnostic;
use crate::error::Result;
use crate::rust_syntax::{single_item, ItemKind};

pub const DEFAULT_MAX_ITERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemProvenance {
    Translated,
    Catalog,
    Fallback,
    Manual,
}

/// One Rust item of a unit or module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitItem {
    pub name: String,
    pub kind: ItemKind,
    pub text: String,
    pub provenance: ItemProvenance,
}

impl UnitItem {
    /// Parses `text` as a single item; the name and kind come from the syntax.
    pub fn parse(text: &str, provenance: ItemProvenance) -> Result<Self> {
        let info = single_item(text)?;
        Ok(UnitItem {
            name: info.name,
            kind: info.kind,
            text: info.text,
            provenance,
        })
    }

    pub fn is_fn(&self) -> bool {
        self.kind == ItemKind::Fn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeStatus {
    Compiles,
    UnresolvedRemaining,
    CompileError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedUnit {
    pub core_id: String,
    /// Name of the core function item.
    pub name: String,
    /// Context items in the order they were appended, then the core item.
    pub items: Vec<UnitItem>,
    /// Diagnostics of the last compile.
    pub diagnostics: Vec<Diagnostic>,
    pub iterations_used: usize,
    pub status: ProbeStatus,
    /// Symbols that neither callees nor the catalog define.
    pub unresolved: Vec<String>,
    /// Set when the core or any pulled-in callee was flagged lazy.
    pub lazy: bool,
}

impl ResolvedUnit {
    pub fn core(&self) -> &UnitItem {
        self.items.last().expect("a resolved unit always holds its core item")
    }

    pub fn core_mut(&mut self) -> &mut UnitItem {
        self.items
            .last_mut()
            .expect("a resolved unit always holds its core item")
    }

    pub fn context(&self) -> &[UnitItem] {
        &self.items[..self.items.len() - 1]
    }

    pub fn texts(&self) -> Vec<String> {
        self.items.iter().map(|i| i.text.clone()).collect()
    }

    /// The unit as one Rust source text.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (i, item) in self.items.iter().enumerate() {
            if i > 0 {
                s.push('\n');
            }
            s.push_str(item.text.trim_end());
            s.push('\n');
        }
        s
    }
}

/// A translated function offered to probing as a definition of its name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Callee {
    pub item: UnitItem,
    pub lazy: bool,
}

fn catalog_item_kind(kind: CatalogKind, text: &str) -> ItemKind {
    single_item(text).map(|i| i.kind).unwrap_or(match kind {
        CatalogKind::Type => ItemKind::TypeAlias,
        CatalogKind::MacroConst => ItemKind::Const,
        CatalogKind::Variable => ItemKind::Static,
        CatalogKind::ExternFn => ItemKind::ExternFn,
    })
}

/// Finds a definition for `name`: translated callees first, then the catalog
/// (type over macro constant over variable over extern function).
pub fn lookup_definition(
    name: &str,
    catalog: &ContextCatalog,
    callees: &BTreeMap<String, Callee>,
) -> Option<(UnitItem, bool)> {
    if let Some(c) = callees.get(name) {
        return Some((c.item.clone(), c.lazy));
    }
    catalog.get(name).map(|e| {
        (
            UnitItem {
                name: e.name.clone(),
                kind: catalog_item_kind(e.kind, &e.rust_text),
                text: e.rust_text.clone(),
                provenance: ItemProvenance::Catalog,
            },
            false,
        )
    })
}

/// Everything probing looks definitions up in, plus the compiler.
#[derive(Clone, Copy)]
pub struct ProbeEnv<'a> {
    pub catalog: &'a ContextCatalog,
    pub callees: &'a BTreeMap<String, Callee>,
    pub compiler: &'a dyn Compiler,
    pub max_iters: usize,
}

/// Compiles `core` alone and keeps appending definitions for the symbols the
/// compiler reports as unresolved until the unit compiles, an iteration adds
/// nothing, or `max_iters` compiles have run.
pub fn probe(core_id: &str, core: UnitItem, core_lazy: bool, env: &ProbeEnv, label: &str) -> Result<ResolvedUnit> {
    probe_from(core_id, Vec::new(), core, core_lazy, env, label)
}

/// Like [`probe`], starting from an existing list of context items.
pub fn probe_from(
    core_id: &str,
    mut context: Vec<UnitItem>,
    core: UnitItem,
    core_lazy: bool,
    env: &ProbeEnv,
    label: &str,
) -> Result<ResolvedUnit> {
    let (catalog, callees, compiler, max_iters) = (env.catalog, env.callees, env.compiler, env.max_iters);
    let max_iters = max_iters.max(1);
    context.retain(|i| i.name != core.name);
    let mut present: BTreeSet<String> = context.iter().map(|i| i.name.clone()).collect();
    present.insert(core.name.clone());
    let mut lazy = core_lazy;
    let mut unresolved = BTreeSet::new();
    let mut iterations = 0;
    let mut diagnostics;
    loop {
        iterations += 1;
        let texts: Vec<String> = context
            .iter()
            .chain(std::iter::once(&core))
            .map(|i| i.text.clone())
            .collect();
        diagnostics = compiler.check(&texts, label)?;
        if diagnostics.is_empty() {
            break;
        }
        let mut added = false;
        for d in diagnostics.iter().filter(|d| d.is_resolution()) {
            let Some(sym) = &d.primary_symbol else { continue };
            if present.contains(sym) {
                continue;
            }
            match lookup_definition(sym, catalog, callees) {
                Some((item, item_lazy)) => {
                    log::debug!("{core_id}: appending {} for `{sym}`", item.name);
                    present.insert(sym.clone());
                    present.insert(item.name.clone());
                    lazy |= item_lazy;
                    context.push(item);
                    added = true;
                }
                None => {
                    unresolved.insert(sym.clone());
                }
            }
        }
        if !added || iterations >= max_iters {
            break;
        }
    }
    let status = if diagnostics.is_empty() {
        unresolved.clear();
        ProbeStatus::Compiles
    } else if !unresolved.is_empty() {
        ProbeStatus::UnresolvedRemaining
    } else {
        ProbeStatus::CompileError
    };
    let name = core.name.clone();
    context.push(core);
    Ok(ResolvedUnit {
        core_id: core_id.to_string(),
        name,
        items: context,
        diagnostics,
        iterations_used: iterations,
        status,
        unresolved: unresolved.into_iter().collect(),
        lazy,
    })
}
