//! The staged driver: every stage reads its inputs from and writes its
//! outputs to the working directory, so a run can stop after any stage and
//! resume later. Per-function stages skip functions whose inputs did not change.

pub mod config;
pub mod review;
pub mod state;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::c_frontend::{
    build_call_graph, id_stem, leaves_first_schedule, parse_module, parse_sources, FunctionUnit, ModuleIR, SourceFile,
};
use crate::context_prober::{ContextProber, TranslationUnit};
use crate::error::{Error, Result};
use crate::fusor::{fuse_module, RustModule};
use crate::metrics::{
    codebleu, compute_csr, compute_mml, count_safe_lines, csr_trajectory, laziness_rate, significant_lines,
    FunctionMetrics, MetricsReport, ModuleMetrics, SummaryRow, DEFAULT_WEIGHTS,
};
use crate::repairer::{fallback_item, naive_fallbacks, repair, FinalStatus, RepairConfig, RepairOutcome};
use crate::rust_prober::{
    generate_catalog, probe, Callee, Compiler, ContextCatalog, ItemProvenance, ProbeEnv, ProbeStatus, ResolvedUnit,
    RustcCompiler, UnitItem,
};
use crate::translator::prompt::sha256_hex;
use crate::translator::{
    translate, Backend, BackendKind, FallbackRuleBackend, HttpBackend, ReplayBackend, TranslateConfig,
    TranslatedFunction,
};

pub use config::Config;
pub use review::{ManualEdit, ReviewLog};
use state::*;
pub use state::{combined_hash, LaneState, PipelineState, Stage, Workspace};

/// Per-function artifact suffixes, under `functions/`.
pub mod ext {
    pub const C: &str = "c";
    pub const CTX: &str = "ctx.c";
    pub const UNIT: &str = "unit.json";
    pub const TRANSLATION: &str = "translation.json";
    pub const CORE: &str = "core.rs";
    pub const RESOLVED: &str = "resolved.json";
    pub const RESOLVED_RS: &str = "resolved.rs";
    pub const DIAG: &str = "diag.jsonl";
    pub const REPAIR: &str = "repair.jsonl";
    pub const OUTCOME: &str = "outcome.json";
}

/// A probed unit plus whether its core came from the fallback store because
/// the translation did not parse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub unit: ResolvedUnit,
    pub from_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallGraphArtifact {
    pub graph: crate::c_frontend::CallGraph,
    pub schedule: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HaltedLane {
    pub id: String,
    pub stage: Stage,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StageReport {
    pub ran: Vec<String>,
    pub skipped: Vec<String>,
    pub halted: Vec<HaltedLane>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report: MetricsReport,
    pub halted: Vec<HaltedLane>,
}

impl RunSummary {
    /// 0 when every lane finished, 2 when some lane halted.
    pub fn exit_code(&self) -> i32 {
        if self.halted.is_empty() {
            0
        } else {
            2
        }
    }
}

/// Errors that stop one function's lane; everything else aborts the stage.
fn halts_lane(e: &Error) -> bool {
    matches!(
        e,
        Error::FixtureMiss { .. }
            | Error::BackendUnavailable(_)
            | Error::FallbackMissing(_)
            | Error::ParseFailed(_)
            | Error::ContextBudgetExceeded { .. }
            | Error::SymbolNotFound(_)
            | Error::Unsupported(_)
            | Error::ConflictingDefinition { .. }
    )
}

pub struct Pipeline {
    pub config: Config,
    pub ws: Workspace,
    config_hash: String,
    compiler: Box<dyn Compiler>,
}

enum LaneResult {
    Ran(String),
    Skipped,
    Halted(String),
}

impl Pipeline {
    pub fn open(config_path: &Path, workdir: impl Into<PathBuf>) -> Result<Self> {
        Self::new(Config::load(config_path)?, workdir)
    }

    pub fn new(config: Config, workdir: impl Into<PathBuf>) -> Result<Self> {
        let ws = Workspace::new(workdir)?;
        let compiler = Box::new(RustcCompiler::new(config.compile.scaffold(ws.scratch())));
        let config_hash = sha256_hex(&serde_json::to_string(&config).map_err(|e| Error::json("config", e))?);
        Ok(Pipeline {
            config,
            ws,
            config_hash,
            compiler,
        })
    }

    /// Replaces the compiler (tests use a fake one).
    pub fn with_compiler(mut self, compiler: Box<dyn Compiler>) -> Self {
        self.compiler = compiler;
        self
    }

    pub fn compiler(&self) -> &dyn Compiler {
        &*self.compiler
    }

    pub fn state(&self) -> Result<PipelineState> {
        self.ws.load_state()
    }

    fn backend(&self) -> Result<Box<dyn Backend>> {
        let b = &self.config.backend;
        Ok(match b.kind {
            BackendKind::Replay => {
                let path = b
                    .replay
                    .as_ref()
                    .ok_or_else(|| Error::Config("replay path missing".into()))?;
                Box::new(ReplayBackend::from_file(path)?)
            }
            BackendKind::LiveHttp => {
                let http = b
                    .http
                    .clone()
                    .ok_or_else(|| Error::Config("http table missing".into()))?;
                Box::new(HttpBackend::new(http))
            }
            BackendKind::FallbackRule => {
                let store: BTreeMap<String, String> = self.ws.read_json(&self.ws.path(FALLBACKS))?;
                Box::new(FallbackRuleBackend::new(store.into_iter().collect::<HashMap<_, _>>()))
            }
        })
    }

    fn load_module(&self) -> Result<ModuleIR> {
        let files: Vec<SourceFile> = self.ws.read_json(&self.ws.path(SOURCES))?;
        parse_sources(files)
    }

    fn functions(&self) -> Result<Vec<FunctionUnit>> {
        self.ws.read_json(&self.ws.path(FUNCTIONS))
    }

    fn require(&self, state: &PipelineState, prev: Stage, artifact: &str) -> Result<()> {
        if state.stage.is_some_and(|s| s >= prev) {
            Ok(())
        } else {
            Err(Error::MissingPrerequisite(PathBuf::from(artifact)))
        }
    }

    /// Runs `stage` over every lane that completed `prev`. A lane is skipped
    /// when its input hash matches the last successful run and its outputs exist.
    fn run_lanes(
        &self,
        state: &mut PipelineState,
        stage: Stage,
        prev: Stage,
        outputs: &[&str],
        hash: impl Fn(&str) -> Result<String> + Sync,
        work: impl Fn(&str) -> Result<()> + Sync,
    ) -> Result<StageReport> {
        let eligible: Vec<String> = state
            .functions
            .iter()
            .filter(|(_, l)| {
                // A lane halted here (or later) in an earlier run is retried.
                l.stage.is_some_and(|s| s >= prev) && l.halted.as_ref().is_none_or(|(s, _)| *s >= stage)
            })
            .map(|(id, _)| id.clone())
            .collect();
        let hashes = eligible.iter().map(|id| hash(id)).collect::<Result<Vec<_>>>()?;
        let lanes = &state.functions;
        let results: Vec<(String, Result<LaneResult>)> = eligible
            .par_iter()
            .zip(hashes)
            .map(|(id, h)| {
                let lane = &lanes[id];
                let fresh = lane.completed(stage)
                    && lane.input_hashes.get(&stage) == Some(&h)
                    && outputs.iter().all(|e| self.ws.function_path(id, e).exists());
                let r = if fresh {
                    Ok(LaneResult::Skipped)
                } else {
                    match work(id) {
                        Ok(()) => Ok(LaneResult::Ran(h)),
                        Err(e) if halts_lane(&e) => Ok(LaneResult::Halted(e.to_string())),
                        Err(e) => Err(e),
                    }
                };
                (id.clone(), r)
            })
            .collect();
        let mut report = StageReport::default();
        let mut fatal = None;
        for (id, r) in results {
            let lane = state.functions.get_mut(&id).expect("eligible lanes exist");
            match r {
                Ok(LaneResult::Skipped) => report.skipped.push(id),
                Ok(LaneResult::Ran(h)) => {
                    lane.stage = Some(stage);
                    lane.halted = None;
                    lane.input_hashes.retain(|s, _| *s < stage);
                    lane.input_hashes.insert(stage, h);
                    report.ran.push(id);
                }
                Ok(LaneResult::Halted(msg)) => {
                    log::warn!("{id}: halted in {}: {msg}", stage.name());
                    lane.stage = Some(prev);
                    lane.halted = Some((stage, msg.clone()));
                    lane.input_hashes.retain(|s, _| *s < stage);
                    report.halted.push(HaltedLane { id, stage, error: msg });
                }
                Err(e) => {
                    fatal.get_or_insert(e);
                }
            }
        }
        if let Some(e) = fatal {
            self.ws.save_state(state)?;
            return Err(e);
        }
        state.advance(stage);
        self.ws.save_state(state)?;
        log::info!(
            "{}: {} ran, {} skipped, {} halted",
            stage.name(),
            report.ran.len(),
            report.skipped.len(),
            report.halted.len()
        );
        Ok(report)
    }

    /// Runs one stage. `Review` needs an interactive session and is rejected here.
    pub fn run_stage(&self, stage: Stage) -> Result<StageReport> {
        let mut state = self.ws.load_state()?;
        match stage {
            Stage::Split => self.split(&mut state),
            Stage::CProbe => self.cprobe(&mut state),
            Stage::Translate => self.translate(&mut state),
            Stage::RustProbe => self.rustprobe(&mut state),
            Stage::Repair => self.repair(&mut state),
            Stage::Fuse => self.fuse(&mut state),
            Stage::Review => Err(Error::Config("review runs through `Pipeline::review`".into())),
            Stage::Report => self.report(&mut state).map(|_| StageReport::default()),
        }
    }

    /// Every stage except review, then the report.
    pub fn run_all(&self) -> Result<RunSummary> {
        for stage in [
            Stage::Split,
            Stage::CProbe,
            Stage::Translate,
            Stage::RustProbe,
            Stage::Repair,
            Stage::Fuse,
        ] {
            self.run_stage(stage)?;
        }
        let mut state = self.ws.load_state()?;
        let report = self.report(&mut state)?;
        Ok(RunSummary {
            report,
            halted: halted_lanes(&state),
        })
    }

    fn split(&self, state: &mut PipelineState) -> Result<StageReport> {
        let module = parse_module(&self.config.root, &self.config.module_paths())?;
        let ws = &self.ws;
        ws.write_json(&ws.path(SOURCES), &module.files)?;
        ws.write_json(&ws.path(FUNCTIONS), &module.functions)?;
        let graph = build_call_graph(&module);
        let schedule = leaves_first_schedule(&graph);
        ws.write_json(&ws.path(CALLGRAPH), &CallGraphArtifact { graph, schedule })?;
        for f in &module.functions {
            let file = module
                .files
                .iter()
                .find(|s| s.path == f.file)
                .expect("functions come from module files");
            ws.write(
                &ws.function_path(&f.id, ext::C),
                &file.text.as_bytes()[f.byte_range.0..f.byte_range.1],
            )?;
        }

        let mut catalog = match &self.config.catalog {
            Some(p) => ContextCatalog::load(p)?,
            None => ContextCatalog::new(Vec::new())?,
        };
        catalog.merge(generate_catalog(&module));
        ws.write(&ws.path(CATALOG), catalog.to_json().as_bytes())?;

        let mut fallbacks: BTreeMap<String, String> = match &self.config.fallbacks {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Error::json(p.display().to_string(), e))?
            }
            None => BTreeMap::new(),
        };
        if self.config.naive_fallbacks {
            for (id, text) in naive_fallbacks(&module) {
                fallbacks.entry(id).or_insert(text);
            }
        }
        ws.write_json(&ws.path(FALLBACKS), &fallbacks)?;

        let ids: BTreeSet<&String> = module.functions.iter().map(|f| &f.id).collect();
        state.functions.retain(|id, _| ids.contains(id));
        let mut report = StageReport::default();
        for id in ids {
            let lane = state.functions.entry(id.clone()).or_default();
            if lane.stage.is_none() {
                lane.stage = Some(Stage::Split);
            }
            report.ran.push(id.clone());
        }
        state.config_hash = self.config_hash.clone();
        state.advance(Stage::Split);
        ws.save_state(state)?;
        Ok(report)
    }

    fn cprobe(&self, state: &mut PipelineState) -> Result<StageReport> {
        self.require(state, Stage::Split, SOURCES)?;
        let sources = self.ws.read(&self.ws.path(SOURCES))?;
        let module = self.load_module()?;
        let prober = ContextProber::with_config(&module, &self.config.extra_builtins, self.config.caps.context_budget);
        let base = combined_hash([("config", self.config_hash.as_str()), ("sources", sources.as_str())]);
        self.run_lanes(
            state,
            Stage::CProbe,
            Stage::Split,
            &[ext::CTX, ext::UNIT],
            |id| Ok(combined_hash([("base", base.as_str()), ("id", id)])),
            |id| {
                let f = module
                    .function(id)
                    .ok_or_else(|| Error::SymbolNotFound(id.to_string()))?;
                let unit = prober.probe(f);
                self.ws
                    .write(&self.ws.function_path(id, ext::CTX), unit.render_c().as_bytes())?;
                self.ws.write_json(&self.ws.function_path(id, ext::UNIT), &unit)
            },
        )
    }

    fn translate(&self, state: &mut PipelineState) -> Result<StageReport> {
        self.require(state, Stage::CProbe, "functions/*.unit.json")?;
        let backend = self.backend()?;
        let cfg = TranslateConfig {
            retry_cap: self.config.caps.retry_cap,
            rules: self.config.rules(),
            laziness: self.config.laziness.clone(),
        };
        self.run_lanes(
            state,
            Stage::Translate,
            Stage::CProbe,
            &[ext::TRANSLATION, ext::CORE],
            |id| {
                let unit = self.ws.read(&self.ws.function_path(id, ext::UNIT))?;
                Ok(combined_hash([
                    ("config", self.config_hash.as_str()),
                    ("unit", unit.as_str()),
                ]))
            },
            |id| {
                let unit: TranslationUnit = self.ws.read_json(&self.ws.function_path(id, ext::UNIT))?;
                let t = translate(&unit, &*backend, &cfg)?;
                self.ws.write_json(&self.ws.function_path(id, ext::TRANSLATION), &t)?;
                let mut core = t.rust_text.trim_end().to_string();
                core.push('\n');
                self.ws.write(&self.ws.function_path(id, ext::CORE), core.as_bytes())
            },
        )
    }

    /// Inputs shared by the probe and repair stages.
    fn probe_inputs(&self, state: &PipelineState) -> Result<ProbeInputs> {
        let catalog_text = self.ws.read(&self.ws.path(CATALOG))?;
        let catalog: ContextCatalog = serde_json::from_str(&catalog_text).map_err(|e| Error::json(CATALOG, e))?;
        let fallbacks_text = self.ws.read(&self.ws.path(FALLBACKS))?;
        let fallbacks: BTreeMap<String, String> =
            serde_json::from_str(&fallbacks_text).map_err(|e| Error::json(FALLBACKS, e))?;
        let mut translations = BTreeMap::new();
        let mut hash_parts = vec![
            ("config".to_string(), self.config_hash.clone()),
            ("catalog".to_string(), catalog_text),
            ("fallbacks".to_string(), fallbacks_text),
        ];
        for (id, lane) in &state.functions {
            if !lane.completed(Stage::Translate) {
                continue;
            }
            let path = self.ws.function_path(id, ext::TRANSLATION);
            let text = self.ws.read(&path)?;
            let t: TranslatedFunction =
                serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
            hash_parts.push((id.clone(), text));
            translations.insert(id.clone(), t);
        }
        // Every parsing translation is offered as the definition of its name;
        // the first function (by id) wins a name shared by static functions.
        let mut callees = BTreeMap::new();
        for t in translations.values() {
            if !t.status.parses() || callees.contains_key(&t.name) {
                continue;
            }
            if let Ok(item) = UnitItem::parse(&t.rust_text, ItemProvenance::Translated) {
                callees.insert(
                    t.name.clone(),
                    Callee {
                        item,
                        lazy: t.laziness.lazy,
                    },
                );
            }
        }
        let hash = combined_hash(hash_parts.iter().map(|(a, b)| (a.as_str(), b.as_str())));
        Ok(ProbeInputs {
            catalog,
            fallbacks,
            translations,
            callees,
            hash,
        })
    }

    fn env<'a>(&'a self, inputs: &'a ProbeInputs) -> ProbeEnv<'a> {
        ProbeEnv {
            catalog: &inputs.catalog,
            callees: &inputs.callees,
            compiler: &*self.compiler,
            max_iters: self.config.caps.max_iters,
        }
    }

    fn rustprobe(&self, state: &mut PipelineState) -> Result<StageReport> {
        self.require(state, Stage::Translate, "functions/*.translation.json")?;
        let inputs = self.probe_inputs(state)?;
        let env = self.env(&inputs);
        self.run_lanes(
            state,
            Stage::RustProbe,
            Stage::Translate,
            &[ext::RESOLVED, ext::RESOLVED_RS, ext::DIAG],
            |id| Ok(combined_hash([("inputs", inputs.hash.as_str()), ("id", id)])),
            |id| {
                let t = &inputs.translations[id];
                let label = id_stem(id);
                let record = if t.status.parses() {
                    let core = UnitItem::parse(&t.rust_text, ItemProvenance::Translated)?;
                    ProbeRecord {
                        unit: probe(id, core, t.laziness.lazy, &env, &label)?,
                        from_fallback: false,
                    }
                } else {
                    let text = inputs
                        .fallbacks
                        .get(id)
                        .ok_or_else(|| Error::FallbackMissing(id.to_string()))?;
                    log::info!("{id}: translation does not parse, probing the stored fallback");
                    ProbeRecord {
                        unit: probe(id, fallback_item(text, &t.name)?, false, &env, &label)?,
                        from_fallback: true,
                    }
                };
                self.ws.write_json(&self.ws.function_path(id, ext::RESOLVED), &record)?;
                self.ws.write(
                    &self.ws.function_path(id, ext::RESOLVED_RS),
                    record.unit.render().as_bytes(),
                )?;
                self.ws
                    .write_jsonl(&self.ws.function_path(id, ext::DIAG), &record.unit.diagnostics)
            },
        )
    }

    fn repair(&self, state: &mut PipelineState) -> Result<StageReport> {
        self.require(state, Stage::RustProbe, "functions/*.resolved.json")?;
        let inputs = self.probe_inputs(state)?;
        let env = self.env(&inputs);
        let backend = self.backend()?;
        let cfg = RepairConfig {
            cap: self.config.caps.repair_cap,
            rules: self.config.rules(),
        };
        self.run_lanes(
            state,
            Stage::Repair,
            Stage::RustProbe,
            &[ext::REPAIR, ext::OUTCOME],
            |id| {
                let resolved = self.ws.read(&self.ws.function_path(id, ext::RESOLVED))?;
                Ok(combined_hash([
                    ("inputs", inputs.hash.as_str()),
                    ("resolved", resolved.as_str()),
                ]))
            },
            |id| {
                let record: ProbeRecord = self.ws.read_json(&self.ws.function_path(id, ext::RESOLVED))?;
                let outcome = if record.from_fallback {
                    let compiles = record.unit.status == ProbeStatus::Compiles;
                    RepairOutcome {
                        core_id: id.to_string(),
                        final_status: if compiles {
                            FinalStatus::FallbackApplied
                        } else {
                            FinalStatus::ManualRequired
                        },
                        attempts: Vec::new(),
                        final_unit: record.unit,
                    }
                } else {
                    let fallback = inputs.fallbacks.get(id).map(String::as_str);
                    repair(&record.unit, &*backend, &env, &cfg, fallback, &id_stem(id))?
                };
                self.ws
                    .write_jsonl(&self.ws.function_path(id, ext::REPAIR), &outcome.attempts)?;
                self.ws.write_json(&self.ws.function_path(id, ext::OUTCOME), &outcome)
            },
        )
    }

    /// Outcomes of every lane that finished repair, by id.
    pub fn outcomes(&self, state: &PipelineState) -> Result<BTreeMap<String, RepairOutcome>> {
        state
            .functions
            .iter()
            .filter(|(_, l)| l.completed(Stage::Repair))
            .map(|(id, _)| Ok((id.clone(), self.ws.read_json(&self.ws.function_path(id, ext::OUTCOME))?)))
            .collect()
    }

    fn fuse(&self, state: &mut PipelineState) -> Result<StageReport> {
        self.require(state, Stage::Repair, "functions/*.outcome.json")?;
        let graph_text = self.ws.read(&self.ws.path(CALLGRAPH))?;
        let graph: CallGraphArtifact = serde_json::from_str(&graph_text).map_err(|e| Error::json(CALLGRAPH, e))?;
        let mut parts = vec![
            ("config".to_string(), self.config_hash.clone()),
            ("callgraph".to_string(), graph_text),
        ];
        for (id, lane) in &state.functions {
            if lane.completed(Stage::Repair) {
                parts.push((id.clone(), self.ws.read(&self.ws.function_path(id, ext::OUTCOME))?));
            }
        }
        let hash = combined_hash(parts.iter().map(|(a, b)| (a.as_str(), b.as_str())));
        let mut report = StageReport::default();
        if state.fuse_input.as_deref() == Some(hash.as_str())
            && self.ws.path(MODULE_JSON).exists()
            && self.ws.path(MODULE_RS).exists()
        {
            log::info!("fuse: inputs unchanged, skipped");
            report.skipped.push("module".into());
            state.advance(Stage::Fuse);
            self.ws.save_state(state)?;
            return Ok(report);
        }
        let outcomes = self.outcomes(state)?;
        let schedule: Vec<Vec<String>> = graph
            .schedule
            .iter()
            .map(|wave| {
                wave.iter()
                    .filter(|id| outcomes.contains_key(*id))
                    .cloned()
                    .collect::<Vec<_>>()
            })
            .filter(|w| !w.is_empty())
            .collect();
        let manual: BTreeSet<String> = outcomes
            .iter()
            .filter(|(_, o)| o.final_unit.status != ProbeStatus::Compiles)
            .map(|(id, _)| id.clone())
            .collect();
        let units: BTreeMap<String, ResolvedUnit> = outcomes.into_iter().map(|(id, o)| (id, o.final_unit)).collect();
        let mut module = fuse_module(&schedule, &units, &manual, Some(&*self.compiler), "module")?;
        let log_path = self.ws.path(REVIEW);
        if log_path.exists() {
            let log: ReviewLog = self.ws.read_json(&log_path)?;
            review::reapply(&mut module, &log, &*self.compiler)?;
        }
        self.write_module(state, &module)?;
        state.fuse_input = Some(hash);
        state.advance(Stage::Fuse);
        self.ws.save_state(state)?;
        report.ran.push("module".into());
        Ok(report)
    }

    /// Writes `module.rs` and its JSON companions and records the module hash.
    fn write_module(&self, state: &mut PipelineState, module: &RustModule) -> Result<()> {
        let text = module.render();
        self.ws.write(&self.ws.path(MODULE_RS), text.as_bytes())?;
        self.ws.write_json(&self.ws.path(MODULE_JSON), module)?;
        self.ws.write_json(&self.ws.path(FUSION_LOG), &module.fusion_log)?;
        self.ws.write_json(&self.ws.path(CONFLICTS), &module.conflicts)?;
        state.module_hash = Some(sha256_hex(&text));
        Ok(())
    }

    pub fn load_fused(&self, state: &PipelineState) -> Result<RustModule> {
        self.require(state, Stage::Fuse, MODULE_JSON)?;
        self.ws.read_json(&self.ws.path(MODULE_JSON))
    }

    fn report(&self, state: &mut PipelineState) -> Result<MetricsReport> {
        let module = self.load_fused(state)?;
        let text = self.ws.read(&self.ws.path(MODULE_RS))?;
        let functions = self.functions()?;
        let outcomes = self.outcomes(state)?;
        let review: ReviewLog = if self.ws.path(REVIEW).exists() {
            self.ws.read_json(&self.ws.path(REVIEW))?
        } else {
            ReviewLog::default()
        };
        let mut flags = Vec::new();

        let mut mml = review.edits.iter().map(|e| e.mml).sum::<usize>();
        let mut mml_by_name: BTreeMap<&str, usize> = BTreeMap::new();
        for e in &review.edits {
            *mml_by_name.entry(e.name.as_str()).or_default() += e.mml;
        }
        if state.module_hash.as_deref() != Some(sha256_hex(&text).as_str()) {
            let outside = compute_mml(&module.render(), &text);
            flags.push(format!(
                "module.rs was edited outside the review session ({outside} lines)"
            ));
            mml += outside;
        }

        let safe = count_safe_lines(&text)?;
        let (mut llm_lines, mut sc_llm) = (0, 0);
        for item in module
            .items
            .iter()
            .filter(|i| i.provenance == ItemProvenance::Translated)
        {
            let c = count_safe_lines(&item.text)?;
            llm_lines += c.total;
            sc_llm += c.safe;
        }
        let row = SummaryRow {
            lines: significant_lines(&text).len() as u64,
            llm_lines: llm_lines as u64,
            mml: mml as u64,
            sc: safe.safe as u64,
            sc_llm: sc_llm as u64,
        };

        let mut translations = BTreeMap::new();
        for (id, lane) in &state.functions {
            if lane.completed(Stage::Translate) {
                let t: TranslatedFunction = self.ws.read_json(&self.ws.function_path(id, ext::TRANSLATION))?;
                translations.insert(id.clone(), t);
            }
            if let Some((stage, err)) = &lane.halted {
                flags.push(format!("{id} halted in {}: {err}", stage.name()));
            }
        }

        let compiled: Vec<bool> = functions
            .iter()
            .map(|f| {
                outcomes
                    .get(&f.id)
                    .is_some_and(|o| o.final_unit.status == ProbeStatus::Compiles)
            })
            .collect();
        let csr = compute_csr(&compiled).ok();
        let rounds: Vec<Option<usize>> = functions
            .iter()
            .map(|f| outcomes.get(&f.id).and_then(RepairOutcome::compiled_at_round))
            .collect();
        let csr_by_round = csr_trajectory(&rounds, self.config.caps.repair_cap).unwrap_or_default();

        let (mut verdicts, mut c_lines) = (Vec::new(), Vec::new());
        for f in &functions {
            if let Some(t) = translations.get(&f.id) {
                verdicts.push(t.laziness.clone());
                c_lines.push((f.body_span.1 - f.body_span.0 + 1) as usize);
            }
        }
        let lr = laziness_rate(&verdicts, &c_lines, &self.config.bins())?;

        let cb = match &self.config.reference {
            Some(p) => {
                let reference = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                match codebleu(&text, &reference, DEFAULT_WEIGHTS) {
                    Ok(c) => Some(c.score),
                    Err(e) => {
                        flags.push(format!("CodeBLEU not computed: {e}"));
                        None
                    }
                }
            }
            None => None,
        };

        let mut per_function = BTreeMap::new();
        for f in &functions {
            let Some(o) = outcomes.get(&f.id) else { continue };
            let item_text = module
                .item(&f.name)
                .map(|i| i.text.clone())
                .unwrap_or_else(|| o.final_unit.core().text.clone());
            per_function.insert(
                f.id.clone(),
                FunctionMetrics {
                    line_count: significant_lines(&item_text).len(),
                    safe_lines: count_safe_lines(&item_text).ok().map(|c| c.safe),
                    lazy: translations.get(&f.id).is_some_and(|t| t.laziness.lazy),
                    compiled: o.final_unit.status == ProbeStatus::Compiles,
                    mml: mml_by_name.get(f.name.as_str()).copied().unwrap_or(0),
                },
            );
        }

        let raw_lines = text.lines().count();
        let report = MetricsReport {
            per_function,
            module: ModuleMetrics::new(raw_lines, row, csr, lr, cb),
            csr_by_round,
            flags,
        };
        self.ws.write(&self.ws.path(REPORT_JSON), report.to_json().as_bytes())?;
        self.ws.write(
            &self.ws.path(REPORT_MD),
            report.to_markdown(&self.config.dataset).as_bytes(),
        )?;
        state.advance(Stage::Report);
        self.ws.save_state(state)?;
        Ok(report)
    }
}

struct ProbeInputs {
    catalog: ContextCatalog,
    fallbacks: BTreeMap<String, String>,
    translations: BTreeMap<String, TranslatedFunction>,
    callees: BTreeMap<String, Callee>,
    hash: String,
}

pub fn halted_lanes(state: &PipelineState) -> Vec<HaltedLane> {
    state
        .functions
        .iter()
        .filter_map(|(id, l)| {
            l.halted.as_ref().map(|(stage, e)| HaltedLane {
                id: id.clone(),
                stage: *stage,
                error: e.clone(),
            })
        })
        .collect()
}
