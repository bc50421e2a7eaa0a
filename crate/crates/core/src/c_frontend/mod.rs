//! C side of the pipeline: lexing, parsing the supported subset, function
//! extraction and the call graph.

pub mod ast;
pub mod callgraph;
pub mod lexer;
pub mod module;
pub mod parser;

pub use callgraph::{build_call_graph, leaves_first_schedule, CallGraph, MacroCall};
pub use module::{
    function_id, id_stem, parse_module, parse_sources, DeclKind, FileKind, FunctionId, FunctionUnit, ModuleDecl,
    ModuleIR, SourceFile,
};
