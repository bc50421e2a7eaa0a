use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::c_frontend::id_stem;
use crate::error::{Error, Result};
use crate::translator::prompt::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Split,
    CProbe,
    Translate,
    RustProbe,
    Repair,
    Fuse,
    Review,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Split,
        Stage::CProbe,
        Stage::Translate,
        Stage::RustProbe,
        Stage::Repair,
        Stage::Fuse,
        Stage::Review,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Split => "split",
            Stage::CProbe => "cprobe",
            Stage::Translate => "translate",
            Stage::RustProbe => "rustprobe",
            Stage::Repair => "repair",
            Stage::Fuse => "fuse",
            Stage::Review => "review",
            Stage::Report => "report",
        }
    }
}

/// Progress of one function's lane.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaneState {
    /// Last per-function stage completed.
    pub stage: Option<Stage>,
    /// Error that stopped the lane, with the stage it happened in.
    pub halted: Option<(Stage, String)>,
    /// Input hash each completed stage ran on.
    pub input_hashes: BTreeMap<Stage, String>,
}

impl LaneState {
    pub fn completed(&self, stage: Stage) -> bool {
        self.halted.is_none() && self.stage.is_some_and(|s| s >= stage)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineState {
    /// Last module-wide stage completed.
    pub stage: Option<Stage>,
    pub config_hash: String,
    pub functions: BTreeMap<String, LaneState>,
    /// Input hash of the last fusion.
    pub fuse_input: Option<String>,
    /// Hash of `module.rs` as last written by fuse or review.
    pub module_hash: Option<String>,
}

impl PipelineState {
    pub fn advance(&mut self, stage: Stage) {
        if self.stage.is_none_or(|s| s < stage) {
            self.stage = Some(stage);
        }
    }
}

/// The working directory of a run and its fixed layout.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
}

pub const STATE: &str = "state.json";
pub const SOURCES: &str = "sources.json";
pub const FUNCTIONS: &str = "functions.json";
pub const CALLGRAPH: &str = "callgraph.json";
pub const CATALOG: &str = "catalog.json";
pub const FALLBACKS: &str = "fallbacks.json";
pub const MODULE_RS: &str = "module.rs";
pub const MODULE_JSON: &str = "module.json";
pub const FUSION_LOG: &str = "fusion_log.json";
pub const CONFLICTS: &str = "conflicts.json";
pub const REVIEW: &str = "review.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("functions")).map_err(|e| Error::io(&root, e))?;
        Ok(Workspace { root })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// `functions/<stem>.<ext>` for a function id.
    pub fn function_path(&self, id: &str, ext: &str) -> PathBuf {
        self.root.join("functions").join(format!("{}.{ext}", id_stem(id)))
    }

    pub fn scratch(&self) -> PathBuf {
        self.root.join("scratch")
    }

    /// Replaces `path` atomically: the bytes go to a sibling temp file first.
    pub fn write(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
        text.push('\n');
        self.write(path, text.as_bytes())
    }

    pub fn write_jsonl<T: Serialize>(&self, path: &Path, values: &[T]) -> Result<()> {
        let mut text = String::new();
        for v in values {
            text.push_str(&serde_json::to_string(v).map_err(|e| Error::json(path.display().to_string(), e))?);
            text.push('\n');
        }
        self.write(path, text.as_bytes())
    }

    /// Reads a prerequisite artifact; a missing file is `MissingPrerequisite`.
    pub fn read(&self, path: &Path) -> Result<String> {
        match fs::read_to_string(path) {
            Ok(t) => Ok(t),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingPrerequisite(
                path.strip_prefix(&self.root).unwrap_or(path).to_path_buf(),
            )),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn read_json<T: DeserializeOwned>(&self, path: &Path) -> Result<T> {
        let text = self.read(path)?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn hash_of(&self, path: &Path) -> Result<String> {
        Ok(sha256_hex(&self.read(path)?))
    }

    pub fn load_state(&self) -> Result<PipelineState> {
        let p = self.path(STATE);
        if !p.exists() {
            return Ok(PipelineState::default());
        }
        self.read_json(&p)
    }

    pub fn save_state(&self, state: &PipelineState) -> Result<()> {
        self.write_json(&self.path(STATE), state)
    }
}

/// Hash of several labelled parts, order-sensitive.
pub fn combined_hash<'a>(parts: impl IntoIterator<Item = (&'a str, &'a str)>) -> String {
    let mut s = String::new();
    for (label, value) in parts {
        s.push_str(label);
        s.push('\0');
        s.push_str(&sha256_hex(value));
        s.push('\n');
    }
    sha256_hex(&s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_and_missing_prerequisite() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(dir.path()).unwrap();
        let p = ws.function_path("a.c::f", "core.rs");
        assert!(
            matches!(ws.read(&p), Err(Error::MissingPrerequisite(m)) if m == Path::new("functions/a_c__f.core.rs"))
        );
        ws.write(&p, b"fn f() {}").unwrap();
        assert_eq!(ws.read(&p).unwrap(), "fn f() {}");
        assert!(!p.with_extension("rs.tmp").exists());
    }

    #[test]
    fn stages_are_ordered() {
        let mut s = PipelineState::default();
        s.advance(Stage::Translate);
        s.advance(Stage::CProbe);
        assert_eq!(s.stage, Some(Stage::Translate));
        let json = serde_json::to_string(&Stage::RustProbe).unwrap();
        assert_eq!(json, "\"rust-probe\"");
    }
}
