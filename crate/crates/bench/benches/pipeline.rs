use std::collections::BTreeMap;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use migratekit_bench::{edited, module_of_size, rust_function};
use migratekit_core::c_frontend::build_call_graph;
use migratekit_core::context_prober::ContextProber;
use migratekit_core::metrics::{codebleu, compute_mml, count_safe_lines, DEFAULT_WEIGHTS};
use migratekit_core::rust_prober::{probe, ContextCatalog, ItemProvenance, ProbeEnv, UnitItem};
use migratekit_core::testing::MarkerCompiler;

fn call_graph(c: &mut Criterion) {
    let mut g = c.benchmark_group("call_graph");
    for size in [4, 16, 64] {
        let module = module_of_size(1, size);
        g.bench_with_input(BenchmarkId::from_parameter(module.functions.len()), &module, |b, m| {
            b.iter(|| build_call_graph(black_box(m)))
        });
    }
    g.finish();
}

fn context_probe(c: &mut Criterion) {
    let module = module_of_size(2, 16);
    let prober = ContextProber::new(&module);
    c.bench_function("context_probe/all_functions", |b| {
        b.iter(|| {
            for f in &module.functions {
                black_box(prober.probe(f));
            }
        })
    });
}

fn metrics(c: &mut Criterion) {
    let mut g = c.benchmark_group("metrics");
    for n in [50, 400] {
        let text = rust_function(n);
        let changed = edited(&text);
        g.bench_with_input(BenchmarkId::new("mml", n), &(&text, &changed), |b, (x, y)| {
            b.iter(|| compute_mml(black_box(x), black_box(y)))
        });
        g.bench_with_input(BenchmarkId::new("safe_lines", n), &text, |b, t| {
            b.iter(|| count_safe_lines(black_box(t)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("codebleu", n), &(&text, &changed), |b, (x, y)| {
            b.iter(|| codebleu(black_box(y), black_box(x), DEFAULT_WEIGHTS).unwrap())
        });
    }
    g.finish();
}

fn probing(c: &mut Criterion) {
    // A chain of callees, each needing the next: one probe iteration per link.
    let mut callees = BTreeMap::new();
    for i in 0..19 {
        let text = format!("pub fn f{i}() -> i32 {{\n    // needs: f{}\n    0\n}}", i + 1);
        let item = UnitItem::parse(&text, ItemProvenance::Translated).unwrap();
        callees.insert(
            format!("f{i}"),
            migratekit_core::rust_prober::Callee { item, lazy: false },
        );
    }
    let catalog = ContextCatalog::default();
    let core = UnitItem::parse(
        "pub fn core_fn() -> i32 {\n    // needs: f0\n    0\n}",
        ItemProvenance::Translated,
    )
    .unwrap();
    c.bench_function("probe/chain_of_20", |b| {
        b.iter(|| {
            let compiler = MarkerCompiler::new();
            let env = ProbeEnv {
                catalog: &catalog,
                callees: &callees,
                compiler: &compiler,
                max_iters: 20,
            };
            probe("b.c::core_fn", core.clone(), false, &env, "bench").unwrap()
        })
    });
}

criterion_group!(benches, call_graph, context_probe, metrics, probing);
criterion_main!(benches);
