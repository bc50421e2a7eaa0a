//! Rendered prompts against reviewed golden files. Set `MIGRATEKIT_BLESS=1`
//! to rewrite the files after an intended template change.

use std::path::{Path, PathBuf};

use migratekit_core::c_frontend::parse_module;
use migratekit_core::context_prober::ContextProber;
use migratekit_core::repairer::render_repair_prompt;
use migratekit_core::rust_prober::{Diagnostic, ItemProvenance, ProbeStatus, ResolvedUnit, UnitItem};
use migratekit_core::translator::{default_rules, render_translation_prompt};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn check_golden(name: &str, actual: &str) {
    let path = fixtures().join("golden").join(name);
    if std::env::var_os("MIGRATEKIT_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} differs from its golden file");
}

#[test]
fn translation_prompt_matches_golden() {
    let root = fixtures().join("minic/src");
    let module = parse_module(&root, std::slice::from_ref(&root)).unwrap();
    let prober = ContextProber::new(&module);
    let unit = prober.probe(module.function("stats.c::get").unwrap());
    let prompt = render_translation_prompt(&unit, &default_rules());
    assert_eq!(prompt.tag, "translate:stats.c::get");
    check_golden("translate_stats_get.txt", &prompt.text);
}

#[test]
fn repair_prompt_matches_golden() {
    let msg = "cannot find function `greatest_common_divisor` in this scope";
    let unit = ResolvedUnit {
        core_id: "numbers.c::lcm".into(),
        name: "lcm".into(),
        items: vec![
            UnitItem::parse(
                "pub fn gcd(mut a: u32, mut b: u32) -> u32 {\n    while b != 0 {\n        let t = a % b;\n        a = b;\n        b = t;\n    }\n    a\n}",
                ItemProvenance::Translated,
            )
            .unwrap(),
            UnitItem::parse(
                "pub fn lcm(a: u32, b: u32) -> u32 {\n    if a == 0 || b == 0 {\n        return 0;\n    }\n    a / greatest_common_divisor(a, b) * b\n}",
                ItemProvenance::Translated,
            )
            .unwrap(),
        ],
        diagnostics: vec![Diagnostic::new("E0425", msg, None, &format!("error[E0425]: {msg}"))],
        iterations_used: 1,
        status: ProbeStatus::UnresolvedRemaining,
        unresolved: vec!["greatest_common_divisor".into()],
        lazy: false,
    };
    let prompt = render_repair_prompt(&unit, &unit.diagnostics, 1, &default_rules());
    assert_eq!(prompt.tag, "repair:numbers.c::lcm:1");
    check_golden("repair_lcm_round1.txt", &prompt.text);
}

#[test]
fn prompt_hash_is_stable_for_identical_input() {
    let root = fixtures().join("minic/src");
    let module = parse_module(&root, std::slice::from_ref(&root)).unwrap();
    let f = module.function("numbers.c::gcd").unwrap();
    let a = render_translation_prompt(&ContextProber::new(&module).probe(f), &default_rules());
    let b = render_translation_prompt(&ContextProber::new(&module).probe(f), &default_rules());
    assert_eq!(a.hash(), b.hash());
}
