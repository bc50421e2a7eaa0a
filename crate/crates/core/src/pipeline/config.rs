use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::context_prober::DEFAULT_BUDGET;
use crate::error::{Error, Result};
use crate::repairer::DEFAULT_REPAIR_CAP;
use crate::rust_prober::{ScaffoldConfig, DEFAULT_MAX_ITERS};
use crate::translator::{BackendKind, HttpConfig, LazinessConfig, DEFAULT_RETRY_CAP};

/// Pipeline configuration, read from a TOML file. Relative paths are
/// resolved against the directory holding the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Root of the C codebase; artifact paths and function ids are relative to it.
    pub root: PathBuf,
    /// Files or directories of the module. Empty means everything under `root`.
    #[serde(default)]
    pub files: Vec<PathBuf>,
    /// Name used in the report table.
    #[serde(default = "default_dataset")]
    pub dataset: String,
    pub backend: BackendConfig,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default)]
    pub laziness: LazinessConfig,
    /// Line-count bins of the laziness report, as half-open `[lo, hi)` pairs.
    #[serde(default = "default_bins")]
    pub laziness_bins: Vec<[usize; 2]>,
    /// Rule strings appended to translation and repair prompts; defaults apply when absent.
    #[serde(default)]
    pub rules: Option<Vec<String>>,
    /// Hand-written catalog entries; they take precedence over generated ones.
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    /// Fallback store: JSON object from function id to an unsafe Rust item.
    #[serde(default)]
    pub fallbacks: Option<PathBuf>,
    /// Fill the fallback store with the built-in naive transpiler's output
    /// for functions the configured store does not cover.
    #[serde(default = "yes")]
    pub naive_fallbacks: bool,
    /// Identifiers treated as provided by the environment during C probing.
    #[serde(default)]
    pub extra_builtins: Vec<String>,
    #[serde(default)]
    pub compile: CompileConfig,
    /// Ground-truth Rust module for CodeBLEU.
    #[serde(default)]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Recorded completions for the replay backend.
    #[serde(default)]
    pub replay: Option<PathBuf>,
    #[serde(default)]
    pub http: Option<HttpConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Caps {
    pub retry_cap: usize,
    pub repair_cap: usize,
    pub max_iters: usize,
    pub context_budget: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            retry_cap: DEFAULT_RETRY_CAP,
            repair_cap: DEFAULT_REPAIR_CAP,
            max_iters: DEFAULT_MAX_ITERS,
            context_budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompileConfig {
    pub rustc: PathBuf,
    pub no_std: bool,
    pub prelude: String,
    pub edition: String,
}

impl Default for CompileConfig {
    fn default() -> Self {
        let s = ScaffoldConfig::default();
        CompileConfig {
            rustc: s.rustc,
            no_std: s.no_std,
            prelude: s.prelude,
            edition: s.edition,
        }
    }
}

impl CompileConfig {
    pub fn scaffold(&self, scratch_root: PathBuf) -> ScaffoldConfig {
        ScaffoldConfig {
            no_std: self.no_std,
            prelude: self.prelude.clone(),
            rustc: self.rustc.clone(),
            edition: self.edition.clone(),
            scratch_root,
        }
    }
}

fn default_dataset() -> String {
    "module".into()
}

fn default_bins() -> Vec<[usize; 2]> {
    vec![[0, 50], [50, 100], [100, 200], [200, usize::MAX]]
}

fn yes() -> bool {
    true
}

impl Config {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    fn resolve(&mut self, base: &Path) {
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        abs(&mut self.root);
        for f in &mut self.files {
            if f.is_relative() {
                *f = self.root.join(&*f);
            }
        }
        for p in [
            &mut self.catalog,
            &mut self.fallbacks,
            &mut self.reference,
            &mut self.backend.replay,
        ]
        .into_iter()
        .flatten()
        {
            abs(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.caps;
        for (name, v) in [
            ("retry_cap", c.retry_cap),
            ("repair_cap", c.repair_cap),
            ("max_iters", c.max_iters),
            ("context_budget", c.context_budget),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        let t = self.laziness.ratio_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Config(format!("laziness ratio_threshold {t} is outside (0, 1]")));
        }
        if let Some(b) = self.laziness_bins.iter().find(|b| b[0] >= b[1]) {
            return Err(Error::Config(format!("empty laziness bin [{}, {})", b[0], b[1])));
        }
        match self.backend.kind {
            BackendKind::Replay if self.backend.replay.is_none() => {
                Err(Error::Config("the replay backend needs `backend.replay`".into()))
            }
            BackendKind::LiveHttp if self.backend.http.is_none() => Err(Error::Config(
                "the live-http backend needs a `[backend.http]` table".into(),
            )),
            _ => Ok(()),
        }
    }

    /// The module's paths (files or directories) to parse.
    pub fn module_paths(&self) -> Vec<PathBuf> {
        if self.files.is_empty() {
            vec![self.root.clone()]
        } else {
            self.files.clone()
        }
    }

    pub fn rules(&self) -> Vec<String> {
        self.rules.clone().unwrap_or_else(crate::translator::default_rules)
    }

    pub fn bins(&self) -> Vec<std::ops::Range<usize>> {
        self.laziness_bins.iter().map(|b| b[0]..b[1]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_the_config_file() {
        let cfg = Config::from_toml(
            "root = \"src\"\n[backend]\nkind = \"replay\"\nreplay = \"replay.json\"\n",
            Path::new("/work/fixture"),
        )
        .unwrap();
        assert_eq!(cfg.root, Path::new("/work/fixture/src"));
        assert_eq!(
            cfg.backend.replay.as_deref(),
            Some(Path::new("/work/fixture/replay.json"))
        );
        assert_eq!(cfg.caps, Caps::default());
        assert!(cfg.naive_fallbacks);
    }

    #[test]
    fn zero_caps_are_rejected() {
        let err = Config::from_toml(
            "root = \".\"\n[backend]\nkind = \"replay\"\nreplay = \"r.json\"\n[caps]\nrepair_cap = 0\n",
            Path::new("/x"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("repair_cap"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::from_toml(
            "root = \".\"\nbogus = 1\n[backend]\nkind = \"replay\"\n",
            Path::new("/x")
        )
        .is_err());
    }
}
