//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). The process fails when a
//! criterion fails unless it is listed in `KNOWN_UNATTAINABLE`, in which
//! case the failure is still printed as FAIL.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use migratekit_core::c_frontend::{build_call_graph, parse_sources};
use migratekit_core::fusor::{ModuleStatus, RustModule};
use migratekit_core::metrics::{codebleu, compute_mml, count_safe_lines, laziness_rate, SummaryRow, DEFAULT_WEIGHTS};
use migratekit_core::pipeline::review::open_issues;
use migratekit_core::repairer::{repair, FinalStatus, RepairConfig, RepairOutcome};
use migratekit_core::rust_prober::{
    probe, Callee, CatalogEntry, CatalogKind, CatalogProvenance, Compiler, ContextCatalog, ItemProvenance, ProbeEnv,
    ProbeStatus, RustcCompiler, ScaffoldConfig, UnitItem, DEFAULT_MAX_ITERS,
};
use migratekit_core::testing::{random_module, MarkerCompiler};
use migratekit_core::translator::{detect_laziness, LazinessConfig, ReplayBackend};
use proptest::test_runner::{Config as PropConfig, RngAlgorithm, TestRng, TestRunner};
use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use serde::Deserialize;

type Outcome = Result<String, String>;
type Criterion = (u8, &'static str, fn() -> Outcome);

/// Criteria whose published numbers cannot all be reproduced; see the
/// criterion's own failure detail for the reason.
const KNOWN_UNATTAINABLE: &[u8] = &[3];

const MAX_RUNTIME: Duration = Duration::from_secs(120);
const CODEBLEU_TOLERANCE: f64 = 1e-6;
const REPAIR_CAP: usize = 3;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "end-to-end golden run", c1_golden_run),
        (2, "repair trajectory", c2_trajectory),
        (3, "metric arithmetic", c3_table_arithmetic),
        (4, "laziness detector", c4_laziness),
        (5, "call-graph oracle", c5_callgraph),
        (6, "probe/repair bounds", c6_bounds),
        (7, "metrics properties", c7_metrics),
        (8, "fusion invariants", c8_fusion),
    ];
    let mut unexpected = 0;
    for (n, name, f) in criteria {
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match res {
            Ok(detail) => {
                println!("criterion {n} ({name}): PASS - {detail}");
                if KNOWN_UNATTAINABLE.contains(&n) {
                    println!("  note: criterion {n} is listed as unattainable but passed");
                }
            }
            Err(detail) => {
                let known = KNOWN_UNATTAINABLE.contains(&n);
                println!(
                    "criterion {n} ({name}): FAIL{} - {detail}",
                    if known { " (known unattainable)" } else { "" }
                );
                if !known {
                    unexpected += 1;
                }
            }
        }
    }
    if unexpected > 0 {
        println!("{unexpected} criteria failed unexpectedly");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- helpers

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn cli(args: &[&str], workdir: &Path, config: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_migratekit"));
    c.args(args)
        .arg("--config")
        .arg(config)
        .arg("--workdir")
        .arg(workdir)
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    c
}

fn run_fixture(name: &str, workdir: &Path) -> Result<Output, String> {
    let config = fixture(name).join("config.toml");
    cli(&["run"], workdir, &config)
        .output()
        .map_err(|e| format!("cannot start migratekit: {e}"))
}

fn expect_exit(out: &Output, code: i32, what: &str) -> Result<(), String> {
    ensure!(
        out.status.code() == Some(code),
        "{what}: exit {:?}, expected {code}; stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

/// Every artifact under `root` except compiler scratch space.
fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            if rel == "scratch" {
                continue;
            }
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn tree_diff(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).cloned().collect()
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn tempdir() -> tempfile::TempDir {
    tempfile::tempdir().expect("temporary directory")
}

// ---------------------------------------------------------------- criterion 1

fn c1_golden_run() -> Outcome {
    let dirs: Vec<_> = (0..3).map(|_| tempdir()).collect();
    let mut slowest = Duration::ZERO;
    for (i, d) in dirs.iter().enumerate() {
        let t = Instant::now();
        let out = run_fixture("minic", d.path())?;
        slowest = slowest.max(t.elapsed());
        expect_exit(&out, 0, &format!("run {}", i + 1))?;
    }
    ensure!(slowest < MAX_RUNTIME, "slowest run took {slowest:?}");
    let base = tree(dirs[0].path());
    for (i, d) in dirs.iter().enumerate().skip(1) {
        let diff = tree_diff(&base, &tree(d.path()));
        ensure!(diff.is_empty(), "run {} differs from run 1 in {diff:?}", i + 1);
    }

    // Interrupt a run halfway through its usual duration, then resume it.
    let resumed = tempdir();
    let config = fixture("minic").join("config.toml");
    let mut child = cli(&["run"], resumed.path(), &config)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    std::thread::sleep(slowest / 2);
    let interrupted = child.try_wait().map_err(|e| e.to_string())?.is_none();
    child.kill().ok();
    child.wait().map_err(|e| e.to_string())?;
    let out = run_fixture("minic", resumed.path())?;
    expect_exit(&out, 0, "resumed run")?;
    let diff = tree_diff(&base, &tree(resumed.path()));
    ensure!(diff.is_empty(), "kill-and-resume run differs in {diff:?}");

    // Golden module and an independent compile check.
    let module_rs = std::fs::read_to_string(dirs[0].path().join("module.rs")).map_err(|e| e.to_string())?;
    let golden = fixture("minic").join("expected/module.rs");
    if std::env::var_os("MIGRATEKIT_BLESS").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).map_err(|e| e.to_string())?;
        std::fs::write(&golden, &module_rs).map_err(|e| e.to_string())?;
    }
    let expected = std::fs::read_to_string(&golden).map_err(|e| format!("{}: {e}", golden.display()))?;
    ensure!(module_rs == expected, "module.rs differs from {}", golden.display());
    let module: RustModule = read_json(&dirs[0].path().join("module.json"))?;
    ensure!(
        module.status == ModuleStatus::Compiles,
        "module status {:?}",
        module.status
    );
    let compiler = RustcCompiler::new(ScaffoldConfig {
        scratch_root: dirs[0].path().join("acceptance-scratch"),
        ..ScaffoldConfig::default()
    });
    let diags = compiler
        .check(&module.texts(), "acceptance")
        .map_err(|e| e.to_string())?;
    ensure!(
        diags.is_empty(),
        "module.rs does not compile: {:?}",
        diags.iter().map(|d| &d.message).collect::<Vec<_>>()
    );

    // The corpus has the required shape.
    let cg: serde_json::Value = read_json(&dirs[0].path().join("callgraph.json"))?;
    let nodes = cg["graph"]["nodes"].as_array().map_or(0, Vec::len);
    let edges: BTreeSet<(String, String)> = cg["graph"]["edges"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|e| (e[0].as_str().unwrap().to_string(), e[1].as_str().unwrap().to_string()))
        .collect();
    let two_cycle = cg["schedule"]
        .as_array()
        .into_iter()
        .flatten()
        .any(|g| g.as_array().map_or(0, Vec::len) == 2);
    let diamond = has_diamond(&edges);
    ensure!(
        nodes >= 10 && two_cycle && diamond,
        "corpus: {nodes} functions, 2-cycle {two_cycle}, diamond {diamond}"
    );

    Ok(format!(
        "3 runs byte-identical, resume after kill{} identical, module compiles and matches golden, slowest run {:.2}s",
        if interrupted {
            ""
        } else {
            " (process had already finished)"
        },
        slowest.as_secs_f64()
    ))
}

fn has_diamond(edges: &BTreeSet<(String, String)>) -> bool {
    let succ = |n: &str| -> BTreeSet<&str> { edges.iter().filter(|(a, _)| a == n).map(|(_, b)| b.as_str()).collect() };
    edges.iter().map(|(a, _)| a.as_str()).any(|top| {
        let mids: Vec<&str> = succ(top).into_iter().filter(|m| *m != top).collect();
        mids.iter().enumerate().any(|(i, b)| {
            mids[i + 1..].iter().any(|c| {
                let sb = succ(b);
                succ(c).iter().any(|d| sb.contains(d) && ![top, *b, *c].contains(d))
            })
        })
    })
}

// ---------------------------------------------------------------- criterion 2

fn c2_trajectory() -> Outcome {
    const EXPECTED: [(u64, u64); 4] = [(7, 18), (12, 18), (14, 18), (15, 18)];
    let d = tempdir();
    let out = run_fixture("math18", d.path())?;
    expect_exit(&out, 0, "math18 run")?;
    let report: serde_json::Value = read_json(&d.path().join("report.json"))?;
    let got: Vec<(u64, u64)> = report["csr_by_round"]
        .as_array()
        .ok_or("report.json has no csr_by_round")?
        .iter()
        .map(|r| (r["num"].as_u64().unwrap(), r["den"].as_u64().unwrap()))
        .collect();
    let show = |v: &[(u64, u64)]| {
        v.iter()
            .map(|(n, d)| format!("{n}/{d}"))
            .collect::<Vec<_>>()
            .join(" -> ")
    };
    ensure!(
        got == EXPECTED,
        "CSR by round {}, expected {}",
        show(&got),
        show(&EXPECTED)
    );
    Ok(format!("CSR by round {}", show(&got)))
}

// ---------------------------------------------------------------- criterion 3

fn c3_table_arithmetic() -> Outcome {
    // (dataset, # Line, # Line-LLM, # MML, # SC, # SC-LLM, printed percentages)
    const ROWS: [(&str, [u64; 5], [&str; 3]); 3] = [
        ("math", [570, 535, 74, 564, 529], ["12.98", "98.94", "98.88"]),
        ("sort", [321, 293, 46, 134, 106], ["14.33", "41.74", "36.18"]),
        ("ramfs", [5803, 421, 277, 4786, 265], ["4.77", "82.47", "62.95"]),
    ];
    const COLUMNS: [&str; 3] = ["% MML", "% SC", "% SC-LLM"];
    let mut mismatches = Vec::new();
    let mut cells = 0;
    for (name, [lines, llm_lines, mml, sc, sc_llm], printed) in ROWS {
        let row = SummaryRow {
            lines,
            llm_lines,
            mml,
            sc,
            sc_llm,
        };
        for ((col, got), want) in COLUMNS.iter().zip(row.percentages()).zip(printed) {
            cells += 1;
            if got.trim_end_matches('%') != want {
                mismatches.push(format!("{name} {col}: computed {got}, published {want}"));
            }
        }
    }
    ensure!(
        mismatches.is_empty(),
        "{}/{cells} cells reproduced; {} (the published counts round to a different value, and no single rounding rule fits every cell)",
        cells - mismatches.len(),
        mismatches.join("; ")
    );
    Ok(format!("{cells}/{cells} cells reproduced"))
}

// ---------------------------------------------------------------- criterion 4

#[derive(Deserialize)]
struct LabeledPair {
    name: String,
    c: String,
    rust: String,
    lazy: bool,
}

fn c4_laziness() -> Outcome {
    let pairs: Vec<LabeledPair> = read_json(&fixture("laziness/labeled.json"))?;
    ensure!(pairs.len() >= 40, "only {} labeled pairs", pairs.len());
    let cfg = LazinessConfig::default();
    let wrong: Vec<String> = pairs
        .iter()
        .filter(|p| detect_laziness(&p.c, &p.rust, &cfg).lazy != p.lazy)
        .map(|p| format!("{} (labeled {})", p.name, if p.lazy { "lazy" } else { "faithful" }))
        .collect();
    ensure!(
        wrong.is_empty(),
        "{} of {} pairs disagree: {}",
        wrong.len(),
        pairs.len(),
        wrong.join(", ")
    );

    let (verdicts, lines, bins) = synthetic_laziness_corpus();
    let rates = laziness_rate(&verdicts, &lines, &bins).map_err(|e| e.to_string())?;
    let per_bin: Vec<f64> = rates.bins.iter().map(|b| b.rate.unwrap_or(0.0)).collect();
    let shown = rates
        .bins
        .iter()
        .map(|b| format!("{}-{}: {}/{}", b.lines.start, b.lines.end, b.lazy, b.members))
        .collect::<Vec<_>>()
        .join(", ");
    ensure!(
        per_bin.windows(2).all(|w| w[0] <= w[1]) && per_bin.last() > per_bin.first(),
        "per-bin rates not rising: {shown}"
    );
    Ok(format!(
        "{}/{} labels agree; synthetic bins {shown}",
        pairs.len(),
        pairs.len()
    ))
}

/// Functions of growing length, "translated" by a simulated model whose
/// chance of cutting a translation short grows with the function's length.
fn synthetic_laziness_corpus() -> (
    Vec<migratekit_core::translator::LazinessVerdict>,
    Vec<usize>,
    Vec<std::ops::Range<usize>>,
) {
    let bins = vec![0..10, 10..20, 20..40, 40..80, 80..160];
    let mut rng = StdRng::seed_from_u64(0x1a2b);
    let cfg = LazinessConfig::default();
    let (mut verdicts, mut lines) = (Vec::new(), Vec::new());
    for bin in &bins {
        for _ in 0..80 {
            // A function of n statements spans n + 4 lines.
            let total = rng.random_range(bin.start.max(5)..bin.end);
            let n = total - 4;
            let stmts: Vec<String> = (0..n).map(|i| format!("acc = acc * {} + x;", i % 7 + 2)).collect();
            let c = format!(
                "int f(int x)\n{{\n    int acc = 0;\n{}    return acc;\n}}\n",
                stmts.iter().map(|s| format!("    {s}\n")).collect::<String>()
            );
            let cut_short = rng.random_bool(n as f64 / (n as f64 + 30.0));
            let kept: Vec<&String> = if cut_short {
                stmts.iter().take(n / 4).collect()
            } else {
                stmts.iter().collect()
            };
            let mut body: String = kept.iter().map(|s| format!("    {s}\n")).collect();
            if cut_short && rng.random_bool(0.5) {
                body.push_str("    // remaining statements follow the same pattern\n");
            }
            let rust = format!("pub fn f(x: i32) -> i32 {{\n    let mut acc = 0;\n{body}    acc\n}}\n");
            verdicts.push(detect_laziness(&c, &rust, &cfg));
            lines.push(c.lines().count());
        }
    }
    (verdicts, lines, bins)
}

// ---------------------------------------------------------------- criterion 5

fn c5_callgraph() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0005);
    let mut edges_total = 0;
    let mut cyclic = 0;
    for case in 0..200 {
        let g = random_module(&mut rng, 12);
        let module = parse_sources(g.files.clone()).map_err(|e| format!("case {case}: {e}"))?;
        let graph = build_call_graph(&module);

        let ids: Vec<String> = g.functions.iter().map(|f| f.id.clone()).collect();
        ensure!(
            graph.nodes == ids,
            "case {case}: nodes {:?}, expected {ids:?}",
            graph.nodes
        );
        let by_name: BTreeMap<&str, &str> = g.functions.iter().map(|f| (f.name.as_str(), f.id.as_str())).collect();
        let want_edges: BTreeSet<(String, String)> = g
            .functions
            .iter()
            .flat_map(|f| f.calls.iter().map(|c| (f.id.clone(), by_name[c.as_str()].to_string())))
            .collect();
        ensure!(
            graph.edges == want_edges,
            "case {case}: edges differ from the generated calls"
        );
        for f in &g.functions {
            let got = graph.external_calls.get(&f.id).cloned().unwrap_or_default();
            ensure!(got == f.externals, "case {case}: external calls of {} differ", f.id);
        }
        edges_total += want_edges.len();

        let want_schedule = oracle_schedule(&ids, &want_edges);
        ensure!(
            graph.scc_order == want_schedule,
            "case {case}: schedule {:?}, oracle {want_schedule:?}",
            graph.scc_order
        );
        cyclic += usize::from(want_schedule.iter().any(|s| s.len() > 1));
        check_schedule_sound(&ids, &want_edges, &graph.scc_order).map_err(|e| format!("case {case}: {e}"))?;
    }
    Ok(format!(
        "200 modules, {edges_total} edges, {cyclic} with multi-function SCCs"
    ))
}

/// Groups by mutual reachability (transitive closure), emitted leaves first,
/// the ready group holding the lowest node index going first.
#[allow(clippy::needless_range_loop)] // adjacency-matrix code reads best with indices
fn oracle_schedule(nodes: &[String], edges: &BTreeSet<(String, String)>) -> Vec<Vec<String>> {
    let n = nodes.len();
    let idx: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for (a, b) in edges {
        reach[idx[a.as_str()]][idx[b.as_str()]] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if !groups.iter().any(|g| g.contains(&i)) {
            groups.push((0..n).filter(|&j| reach[i][j] && reach[j][i]).collect());
        }
    }
    let mut done = vec![false; n];
    let mut order = Vec::new();
    while order.len() < groups.len() {
        let next = groups
            .iter()
            .filter(|g| !done[g[0]])
            .filter(|g| {
                g.iter()
                    .all(|&a| (0..n).all(|b| !reach[a][b] || g.contains(&b) || done[b]))
            })
            .min_by_key(|g| g[0])
            .expect("a DAG of groups always has a ready group");
        for &m in next {
            done[m] = true;
        }
        order.push(next.iter().map(|&i| nodes[i].clone()).collect());
    }
    order
}

fn check_schedule_sound(
    nodes: &[String],
    edges: &BTreeSet<(String, String)>,
    schedule: &[Vec<String>],
) -> Result<(), String> {
    let mut position = BTreeMap::new();
    for (gi, g) in schedule.iter().enumerate() {
        for m in g {
            ensure!(position.insert(m.clone(), gi).is_none(), "{m} scheduled twice");
        }
    }
    ensure!(
        position.len() == nodes.len(),
        "schedule covers {} of {} functions",
        position.len(),
        nodes.len()
    );
    for (a, b) in edges {
        ensure!(position[b] <= position[a], "{b} is scheduled after its caller {a}");
    }
    Ok(())
}

// ---------------------------------------------------------------- criterion 6

const CORE_ID: &str = "t.c::core_fn";

fn needs_line(rng: &mut StdRng, pool: &[String]) -> String {
    let k = rng.random_range(0..=3);
    let names: Vec<&str> = pool.choose_multiple(rng, k).map(String::as_str).collect();
    if names.is_empty() {
        String::new()
    } else {
        format!("    // needs: {}\n", names.join(" "))
    }
}

fn core_text(needs: &str, broken: bool) -> String {
    format!(
        "pub fn core_fn() -> i32 {{\n{needs}{}    0\n}}",
        if broken { "    // broken\n" } else { "" }
    )
}

/// One random probing/repair scenario; returns a description of what went wrong.
fn bounds_case(seed: u64) -> Result<(usize, FinalStatus), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    // Names the scenario can mention; `missing_*` are never defined.
    let mut pool: Vec<String> = (0..6).map(|i| format!("c{i}")).collect();
    pool.extend((0..4).map(|i| format!("f{i}")));
    pool.extend((0..2).map(|i| format!("missing_{i}")));

    let mut entries = Vec::new();
    for i in 0..6 {
        if rng.random_bool(0.8) {
            entries.push(CatalogEntry {
                name: format!("c{i}"),
                kind: CatalogKind::MacroConst,
                rust_text: format!("pub const c{i}: i32 = {{\n{}    0\n}};", needs_line(&mut rng, &pool)),
                provenance: CatalogProvenance::Generated,
            });
        }
    }
    entries.shuffle(&mut rng);
    let catalog = ContextCatalog::new(entries).map_err(|e| e.to_string())?;
    let mut callees = BTreeMap::new();
    for i in 0..4 {
        if !rng.random_bool(0.7) {
            continue;
        }
        let text = format!("pub fn f{i}() -> i32 {{\n{}    0\n}}", needs_line(&mut rng, &pool));
        let item = UnitItem::parse(&text, ItemProvenance::Translated).map_err(|e| e.to_string())?;
        callees.insert(
            format!("f{i}"),
            Callee {
                item,
                lazy: rng.random_bool(0.2),
            },
        );
    }
    let max_iters = rng.random_range(1..=DEFAULT_MAX_ITERS);
    let compiler = MarkerCompiler::new();
    let env = ProbeEnv {
        catalog: &catalog,
        callees: &callees,
        compiler: &compiler,
        max_iters,
    };

    let core_needs = needs_line(&mut rng, &pool);
    let core = UnitItem::parse(
        &core_text(&core_needs, rng.random_bool(0.4)),
        ItemProvenance::Translated,
    )
    .map_err(|e| e.to_string())?;
    let unit = probe(CORE_ID, core, false, &env, "case").map_err(|e| e.to_string())?;
    ensure!(
        unit.iterations_used <= max_iters,
        "probe used {} of {max_iters} iterations",
        unit.iterations_used
    );
    ensure!(
        compiler.calls() == unit.iterations_used,
        "{} compiles for {} iterations",
        compiler.calls(),
        unit.iterations_used
    );

    let mut replies = BTreeMap::new();
    for round in 1..=REPAIR_CAP {
        let reply = match rng.random_range(0..5) {
            0 => core_text("", false),
            1 => core_text(&needs_line(&mut rng, &pool), rng.random_bool(0.5)),
            2 => format!("{}\n\npub const c0: i32 = 42;", core_text("", false)),
            3 => "pub fn renamed() -> i32 {\n    1\n}".to_string(),
            _ => "I cannot fix this.".to_string(),
        };
        replies.insert(
            format!("repair:{CORE_ID}:{round}"),
            vec![format!("```rust\n{reply}\n```")],
        );
    }
    let backend = ReplayBackend::new(replies);
    let fallback = rng
        .random_bool(0.5)
        .then_some("pub unsafe fn core_fn() -> i32 {\n    0\n}");
    let cfg = RepairConfig {
        cap: REPAIR_CAP,
        ..RepairConfig::default()
    };
    let out: RepairOutcome = repair(&unit, &backend, &env, &cfg, fallback, "case").map_err(|e| e.to_string())?;
    ensure!(out.attempts.len() <= REPAIR_CAP, "{} repair rounds", out.attempts.len());
    ensure!(
        out.final_unit.iterations_used <= max_iters,
        "re-probe used {} of {max_iters} iterations",
        out.final_unit.iterations_used
    );
    match out.final_status {
        FinalStatus::Repaired => {
            ensure!(
                unit.status == ProbeStatus::Compiles || out.final_unit.status == ProbeStatus::Compiles,
                "repaired unit does not compile"
            );
        }
        FinalStatus::FallbackApplied => ensure!(fallback.is_some(), "fallback applied without one"),
        FinalStatus::ManualRequired => {
            ensure!(fallback.is_none(), "manual required although a fallback exists");
            ensure!(
                out.attempts.len() == REPAIR_CAP,
                "gave up after {} rounds",
                out.attempts.len()
            );
        }
    }
    Ok((out.attempts.len(), out.final_status))
}

fn c6_bounds() -> Outcome {
    let config = PropConfig {
        cases: 512,
        failure_persistence: None,
        ..PropConfig::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let stats = std::cell::RefCell::new(BTreeMap::<String, usize>::new());
    runner
        .run(&proptest::num::u64::ANY, |seed| {
            let (_, status) = bounds_case(seed)
                .map_err(|e| proptest::test_runner::TestCaseError::fail(format!("seed {seed}: {e}")))?;
            *stats.borrow_mut().entry(format!("{status:?}")).or_default() += 1;
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    // The bundled fixtures obey the same bounds.
    let mut fixture_units = 0;
    for name in ["minic", "math18", "conflict"] {
        let d = tempdir();
        let out = run_fixture(name, d.path())?;
        ensure!(
            matches!(out.status.code(), Some(0)),
            "{name}: exit {:?}",
            out.status.code()
        );
        for o in outcomes(d.path())? {
            ensure!(
                o.attempts.len() <= REPAIR_CAP,
                "{name} {}: {} rounds",
                o.core_id,
                o.attempts.len()
            );
            ensure!(
                o.final_unit.iterations_used <= DEFAULT_MAX_ITERS,
                "{name} {}: {} probe iterations",
                o.core_id,
                o.final_unit.iterations_used
            );
            fixture_units += 1;
        }
    }
    let stats = stats.into_inner();
    Ok(format!(
        "512 generated scenarios {stats:?}; {fixture_units} fixture units within bounds"
    ))
}

fn outcomes(workdir: &Path) -> Result<Vec<RepairOutcome>, String> {
    let mut out = Vec::new();
    let dir = workdir.join("functions");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(".outcome.json"))
        .collect();
    paths.sort();
    for p in paths {
        out.push(read_json(&p)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------- criterion 7

fn c7_metrics() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x7007);

    // MML: identity, and edits whose minimal diff is known by construction.
    for case in 0..100 {
        let (before, after, want, kept) = edited_lines(&mut rng);
        ensure!(compute_mml(&before, &before) == 0, "case {case}: mml(x, x) != 0");
        let lcs = lcs_len(&before.lines().collect::<Vec<_>>(), &after.lines().collect::<Vec<_>>());
        ensure!(lcs == kept, "case {case}: LCS {lcs}, construction kept {kept}");
        let got = compute_mml(&before, &after);
        ensure!(got == want, "case {case}: mml {got}, oracle {want}");
    }

    // Safe-line counts against the generator's own record of unsafe lines.
    let mut unsafe_total = 0;
    for case in 0..100 {
        let (text, total, unsafe_lines) = safety_snippet(&mut rng);
        let got = count_safe_lines(&text).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(
            got.total == total && got.unsafe_lines() == unsafe_lines && got.safe + got.unsafe_lines() == got.total,
            "case {case}: counted {}/{} unsafe, oracle {unsafe_lines}/{total}\n{text}",
            got.unsafe_lines(),
            got.total
        );
        unsafe_total += unsafe_lines;
    }

    // CodeBLEU against frozen scores of an independent implementation.
    #[derive(Deserialize)]
    struct Pair {
        name: String,
        candidate: String,
        reference: String,
        expected: Expected,
    }
    #[derive(Deserialize)]
    struct Expected {
        score: f64,
    }
    let pairs: Vec<Pair> = read_json(&fixture("codebleu/pairs.json"))?;
    ensure!(pairs.len() == 20, "{} CodeBLEU pairs", pairs.len());
    let mut worst = 0f64;
    for p in &pairs {
        let got = codebleu(&p.candidate, &p.reference, DEFAULT_WEIGHTS).map_err(|e| e.to_string())?;
        worst = worst.max((got.score - p.expected.score).abs());
        ensure!(
            (got.score - p.expected.score).abs() <= CODEBLEU_TOLERANCE,
            "{}: {} vs {}",
            p.name,
            got.score,
            p.expected.score
        );
        let own = codebleu(&p.reference, &p.reference, DEFAULT_WEIGHTS).map_err(|e| e.to_string())?;
        ensure!(
            (own.score - 1.0).abs() <= CODEBLEU_TOLERANCE,
            "{}: codebleu(x, x) = {}",
            p.name,
            own.score
        );
    }
    Ok(format!(
        "mml on 100 edit pairs, safe lines on 100 snippets ({unsafe_total} unsafe lines), CodeBLEU max deviation {worst:.1e}"
    ))
}

/// A text of unique lines and an edited copy. Edit sites are separated by
/// unchanged lines and new lines never equal old ones, so the minimal diff
/// is unique. Returns (before, after, expected MML, unchanged line count).
fn edited_lines(rng: &mut StdRng) -> (String, String, usize, usize) {
    let n = rng.random_range(1..40);
    let old: Vec<String> = (0..n).map(|i| format!("let v{i} = {i};")).collect();
    let mut new = Vec::new();
    let (mut want, mut kept, mut fresh) = (0, 0, 0);
    let mut fresh_line = || {
        fresh += 1;
        format!("let w{fresh} = {fresh} * 2;")
    };
    let mut i = 0;
    let mut previous_edited = false;
    while i <= n {
        if !previous_edited && rng.random_bool(0.25) {
            previous_edited = true;
            let deleted = rng.random_range(0..=3.min(n - i));
            let inserted = rng.random_range(usize::from(deleted == 0)..=3);
            for _ in 0..inserted {
                new.push(fresh_line());
            }
            want += inserted + usize::from(deleted > inserted);
            i += deleted;
            continue;
        }
        if i < n {
            new.push(old[i].clone());
            kept += 1;
        }
        previous_edited = false;
        i += 1;
    }
    let join = |v: &[String]| v.iter().map(|l| format!("{l}\n")).collect::<String>();
    (join(&old), join(&new), want, kept)
}

fn lcs_len(a: &[&str], b: &[&str]) -> usize {
    let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in (0..a.len()).rev() {
        for j in (0..b.len()).rev() {
            dp[i][j] = if a[i] == b[j] {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }
    dp[0][0]
}

/// Random Rust items with the generator tracking which non-blank lines lie
/// in an unsafe region. Returns (text, non-blank lines, unsafe lines).
fn safety_snippet(rng: &mut StdRng) -> (String, usize, usize) {
    let mut lines: Vec<(String, bool)> = Vec::new();
    let blank = |rng: &mut StdRng, lines: &mut Vec<(String, bool)>| {
        if rng.random_bool(0.2) {
            lines.push((String::new(), false));
        }
    };
    for f in 0..rng.random_range(1..4) {
        if rng.random_bool(0.3) {
            lines.push((format!("/// Item {f}."), false));
        }
        let unsafe_fn = rng.random_bool(0.3);
        lines.push((
            format!(
                "pub {}fn f{f}(x: i32) -> i32 {{",
                if unsafe_fn { "unsafe " } else { "" }
            ),
            unsafe_fn,
        ));
        lines.push(("    let mut acc = x;".into(), unsafe_fn));
        for s in 0..rng.random_range(0..6) {
            blank(rng, &mut lines);
            match rng.random_range(0..5) {
                0 => lines.push((format!("    acc += {s};"), unsafe_fn)),
                1 => lines.push((format!("    // step {s}"), unsafe_fn)),
                2 => lines.push((format!("    acc += unsafe {{ core::ptr::read(&{s}) }};"), true)),
                _ => {
                    let binding = rng.random_bool(0.5);
                    lines.push((
                        if binding {
                            format!("    let u{s} = unsafe {{")
                        } else {
                            "    unsafe {".into()
                        },
                        true,
                    ));
                    for k in 0..rng.random_range(1..4) {
                        blank(rng, &mut lines);
                        lines.push((format!("        acc += {k};"), true));
                    }
                    lines.push((
                        if binding {
                            "        acc\n    };".into()
                        } else {
                            "    }".into()
                        },
                        true,
                    ));
                    if binding {
                        lines.push((format!("    acc += u{s};"), unsafe_fn));
                    }
                }
            }
        }
        lines.push(("    acc".into(), unsafe_fn));
        lines.push(("}".into(), unsafe_fn));
        lines.push((String::new(), false));
    }
    let mut text = String::new();
    let (mut total, mut unsafe_lines) = (0, 0);
    for (l, is_unsafe) in &lines {
        for part in l.split('\n') {
            text.push_str(part);
            text.push('\n');
            if !part.trim().is_empty() {
                total += 1;
                unsafe_lines += usize::from(*is_unsafe);
            }
        }
    }
    (text, total, unsafe_lines)
}

// ---------------------------------------------------------------- criterion 8

fn c8_fusion() -> Outcome {
    let mut summary = Vec::new();
    for name in ["minic", "math18", "conflict"] {
        let d = tempdir();
        let out = run_fixture(name, d.path())?;
        expect_exit(&out, 0, name)?;
        let module: RustModule = read_json(&d.path().join("module.json"))?;
        let module_names: BTreeSet<&str> = module.items.iter().map(|i| i.name.as_str()).collect();
        ensure!(
            module_names.len() == module.items.len(),
            "{name}: module defines a name twice"
        );
        let outcomes = outcomes(d.path())?;
        let union: BTreeSet<&str> = outcomes
            .iter()
            .flat_map(|o| o.final_unit.items.iter().map(|i| i.name.as_str()))
            .collect();
        ensure!(
            module_names == union,
            "{name}: module-only {:?}, units-only {:?}",
            module_names.difference(&union).collect::<Vec<_>>(),
            union.difference(&module_names).collect::<Vec<_>>()
        );

        // Every disagreement between units is either a recorded conflict or
        // the documented own-core-wins case.
        let mut texts: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for o in &outcomes {
            for i in &o.final_unit.items {
                if i.name != o.final_unit.name {
                    texts.entry(&i.name).or_default().insert(&i.text);
                }
            }
        }
        let conflicts: BTreeSet<&str> = module.conflicts.iter().map(|c| c.name.as_str()).collect();
        for (item, set) in &texts {
            let own_core = outcomes.iter().any(|o| o.final_unit.name == *item);
            ensure!(
                set.len() == 1 || own_core || conflicts.contains(item),
                "{name}: `{item}` has {} different texts and no conflict",
                set.len()
            );
        }
        if name == "conflict" {
            let c = module
                .conflicts
                .iter()
                .find(|c| c.name == "scale")
                .ok_or("conflict fixture: duplicate `scale` was not reported")?;
            ensure!(
                c.kept_text != c.other_text,
                "conflict fixture: conflict holds identical texts"
            );
            let issues = open_issues(&module);
            ensure!(
                issues.iter().any(|i| i.contains("`scale`")),
                "conflict not offered for review: {issues:?}"
            );
            let on_disk: serde_json::Value = read_json(&d.path().join("conflicts.json"))?;
            ensure!(
                on_disk.as_array().is_some_and(|a| !a.is_empty()),
                "conflicts.json is empty"
            );
        }
        summary.push(format!(
            "{name}: {} items, {} conflicts",
            module.items.len(),
            module.conflicts.len()
        ));
    }
    Ok(summary.join("; "))
}
