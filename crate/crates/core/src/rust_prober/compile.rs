use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::diagnostic::{parse_rustc_json, Diagnostic};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaffoldConfig {
    /// Adds `#![no_std]` to every scratch crate.
    pub no_std: bool,
    /// Text placed before the items (e.g. `use` lines).
    pub prelude: String,
    pub rustc: PathBuf,
    pub edition: String,
    /// Directory that holds one sub-directory per compile label.
    pub scratch_root: PathBuf,
}

impl Default for ScaffoldConfig {
    fn default() -> Self {
        ScaffoldConfig {
            no_std: true,
            prelude: String::new(),
            rustc: PathBuf::from("rustc"),
            edition: "2021".into(),
            scratch_root: std::env::temp_dir().join("migratekit-scratch"),
        }
    }
}

/// Check-only compilation of a list of items.
pub trait Compiler: Send + Sync {
    /// `label` names the private scratch directory of this call; concurrent
    /// callers must use distinct labels.
    fn check(&self, items: &[String], label: &str) -> Result<Vec<Diagnostic>>;
}

pub struct RustcCompiler {
    pub config: ScaffoldConfig,
}

impl RustcCompiler {
    pub fn new(config: ScaffoldConfig) -> Self {
        RustcCompiler { config }
    }

    /// The `lib.rs` text a scratch crate is built from.
    pub fn crate_source(&self, items: &[String]) -> String {
        let mut src = String::new();
        if self.config.no_std {
            src.push_str("#![no_std]\n");
        }
        if !self.config.prelude.is_empty() {
            src.push_str(&self.config.prelude);
            if !self.config.prelude.ends_with('\n') {
                src.push('\n');
            }
        }
        for item in items {
            src.push('\n');
            src.push_str(item.trim_end());
            src.push('\n');
        }
        src
    }

    fn scaffold(&self, dir: &Path, source: &str) -> Result<()> {
        let err = |e: std::io::Error| Error::Scaffold(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir.join("src")).map_err(err)?;
        let manifest = format!(
            "[package]\nname = \"scratch\"\nversion = \"0.0.0\"\nedition = \"{}\"\n\n[lib]\npath = \"src/lib.rs\"\n",
            self.config.edition
        );
        fs::write(dir.join("Cargo.toml"), manifest).map_err(err)?;
        fs::write(dir.join("src/lib.rs"), source).map_err(err)?;
        Ok(())
    }
}

impl Compiler for RustcCompiler {
    fn check(&self, items: &[String], label: &str) -> Result<Vec<Diagnostic>> {
        let dir = self.config.scratch_root.join(label);
        let source = self.crate_source(items);
        self.scaffold(&dir, &source)?;
        let output = Command::new(&self.config.rustc)
            .current_dir(&dir)
            .args([
                "--edition",
                &self.config.edition,
                "--crate-type",
                "lib",
                "--crate-name",
                "scratch",
                "--emit=metadata",
                "-o",
                "scratch.rmeta",
                "--error-format=json",
                "--cap-lints",
                "allow",
                "src/lib.rs",
            ])
            .output()
            .map_err(|e| match e.kind() {
                ErrorKind::NotFound => Error::ToolchainMissing(self.config.rustc.display().to_string()),
                _ => Error::Scaffold(format!("running {}: {e}", self.config.rustc.display())),
            })?;
        let stderr = String::from_utf8_lossy(&output.stderr);
        let diags = parse_rustc_json(&stderr);
        if !output.status.success() && diags.is_empty() {
            return Err(Error::Scaffold(format!(
                "compiler failed without diagnostics: {stderr}"
            )));
        }
        Ok(diags)
    }
}
