pub mod c_frontend;
pub mod context_prober;
pub mod error;
pub mod fusor;
pub mod metrics;
pub mod pipeline;
pub mod repairer;
pub mod rust_prober;
pub mod rust_syntax;
#[cfg(feature = "test-support")]
pub mod testing;
pub mod translator;
pub mod typemap;

pub use error::{Error, Result};
