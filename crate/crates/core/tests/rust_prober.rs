use std::collections::BTreeMap;

use migratekit_core::c_frontend::{parse_sources, SourceFile};
use migratekit_core::rust_prober::*;

fn compiler(dir: &tempfile::TempDir) -> RustcCompiler {
    RustcCompiler::new(ScaffoldConfig {
        scratch_root: dir.path().to_path_buf(),
        ..ScaffoldConfig::default()
    })
}

fn env<'a>(
    catalog: &'a ContextCatalog,
    callees: &'a BTreeMap<String, Callee>,
    compiler: &'a RustcCompiler,
) -> ProbeEnv<'a> {
    ProbeEnv {
        catalog,
        callees,
        compiler,
        max_iters: DEFAULT_MAX_ITERS,
    }
}

fn item(text: &str) -> UnitItem {
    UnitItem::parse(text, ItemProvenance::Translated).unwrap()
}

#[test]
fn self_contained_item_has_no_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let d = compiler(&dir).check(&["fn f() -> i32 { 0 }".into()], "a").unwrap();
    assert!(d.is_empty(), "{d:?}");
}

#[test]
fn undeclared_call_is_resolution_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = compiler(&dir)
        .check(&["pub fn f() -> i32 { helper() }".into()], "a")
        .unwrap();
    assert_eq!(d.len(), 1);
    assert!(d[0].is_resolution(), "{}", d[0].code);
    assert_eq!(d[0].code, "E0425");
    assert_eq!(d[0].primary_symbol.as_deref(), Some("helper"));
}

#[test]
fn type_mismatch_is_e0308() {
    let dir = tempfile::tempdir().unwrap();
    let d = compiler(&dir)
        .check(&["pub fn f() { let x: u32 = \"s\"; let _ = x; }".into()], "a")
        .unwrap();
    assert_eq!(d[0].code, "E0308");
    assert!(!d[0].is_resolution());
    assert!(d[0].primary_symbol.is_none());
}

#[test]
fn negative_unsigned_literal() {
    // `let x: u32 = -1;` is reported by rustc as E0600 (unary negation on an
    // unsigned type), not as a mismatch; record what the toolchain says.
    let dir = tempfile::tempdir().unwrap();
    let d = compiler(&dir)
        .check(&["pub fn f() { let x: u32 = -1; let _ = x; }".into()], "a")
        .unwrap();
    assert_eq!(d[0].code, "E0600");
    assert!(!d[0].is_resolution());
}

#[test]
fn missing_tool_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let c = RustcCompiler::new(ScaffoldConfig {
        rustc: "/nonexistent/rustc".into(),
        scratch_root: dir.path().to_path_buf(),
        ..ScaffoldConfig::default()
    });
    assert!(matches!(
        c.check(&["fn f() {}".into()], "a"),
        Err(migratekit_core::Error::ToolchainMissing(_))
    ));
}

#[test]
fn probe_trivial_core() {
    let dir = tempfile::tempdir().unwrap();
    let cat = ContextCatalog::default();
    let u = probe(
        "a.c::f",
        item("pub fn f() -> i32 { 0 }"),
        false,
        &env(&cat, &BTreeMap::new(), &compiler(&dir)),
        "f",
    )
    .unwrap();
    assert_eq!(u.status, ProbeStatus::Compiles);
    assert_eq!(u.iterations_used, 1);
    assert_eq!(u.items.len(), 1);
}

#[test]
fn probe_pulls_in_translated_callee_before_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let cat = ContextCatalog::new(vec![CatalogEntry {
        name: "c".into(),
        kind: CatalogKind::ExternFn,
        rust_text: "extern \"C\" { pub fn c() -> i32; }".into(),
        provenance: CatalogProvenance::Generated,
    }])
    .unwrap();
    let callees = BTreeMap::from([(
        "c".to_string(),
        Callee {
            item: item("pub fn c() -> i32 { 1 }"),
            lazy: true,
        },
    )]);
    let core = item("pub fn b() -> i32 { c() + 1 }");
    let u = probe(
        "a.c::b",
        core.clone(),
        false,
        &env(&cat, &callees, &compiler(&dir)),
        "b",
    )
    .unwrap();
    assert_eq!(u.status, ProbeStatus::Compiles);
    assert_eq!(u.iterations_used, 2);
    let names: Vec<_> = u.items.iter().map(|i| i.name.as_str()).collect();
    assert_eq!(names, ["c", "b"]);
    assert_eq!(u.items[0].provenance, ItemProvenance::Translated);
    assert_eq!(u.core().text, core.text);
    assert!(u.lazy);
    // Oracle: the manual assembly compiles as one crate.
    let oracle = compiler(&dir)
        .check(
            &["pub fn c() -> i32 { 1 }".into(), "pub fn b() -> i32 { c() + 1 }".into()],
            "oracle",
        )
        .unwrap();
    assert!(oracle.is_empty());
}

#[test]
fn probe_reports_unknown_names() {
    let dir = tempfile::tempdir().unwrap();
    let u = probe(
        "a.c::f",
        item("pub fn f() -> i32 { mystery() }"),
        false,
        &env(&ContextCatalog::default(), &BTreeMap::new(), &compiler(&dir)),
        "f",
    )
    .unwrap();
    assert_eq!(u.status, ProbeStatus::UnresolvedRemaining);
    assert_eq!(u.unresolved, ["mystery"]);
    assert_eq!(u.iterations_used, 1);
}

#[test]
fn generated_catalog_resolves_struct_chain() {
    let src = "#define CAP 8\nstruct inner { int v; };\nstruct outer { struct inner in[CAP]; int n; };\n\
               struct outer table;\nint get(int i) { return table.in[i].v + CAP; }\n";
    let module = parse_sources(vec![SourceFile::new("m.c", src)]).unwrap();
    let cat = generate_catalog(&module);
    let dir = tempfile::tempdir().unwrap();
    let core = item("pub fn get(i: i32) -> i32 { unsafe { table.r#in[i as usize].v + CAP } }");
    let u = probe(
        "m.c::get",
        core,
        false,
        &env(&cat, &BTreeMap::new(), &compiler(&dir)),
        "get",
    )
    .unwrap();
    assert_eq!(u.status, ProbeStatus::Compiles, "{:#?}", u.diagnostics);
    assert!(u.iterations_used <= 5);
    let mut names: Vec<_> = u.context().iter().map(|i| i.name.as_str()).collect();
    names.sort();
    assert_eq!(names, ["CAP", "inner", "outer", "table"]);
}
