//! Compiler-driven completion of translated functions into compilable units.

pub mod catalog;
pub mod compile;
pub mod diagnostic;
pub mod probe;

pub use catalog::{generate_catalog, CatalogEntry, CatalogKind, CatalogProvenance, ContextCatalog};
pub use compile::{Compiler, RustcCompiler, ScaffoldConfig};
pub use diagnostic::{is_resolution_code, parse_rustc_json, DiagSpan, Diagnostic, RESOLUTION_CODES};
pub use probe::{
    lookup_definition, probe, probe_from, Callee, ItemProvenance, ProbeEnv, ProbeStatus, ResolvedUnit, UnitItem,
    DEFAULT_MAX_ITERS,
};
