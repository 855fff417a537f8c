//! Executable model of a programmable switch data plane: packet formats,
//! pipeline components, fixed-function engines, the switch step relation
//! and a trace checker.

pub mod apps;
pub mod bits;
pub mod checker;
pub mod config;
pub mod engines;
pub mod error;
pub mod format;
pub mod gen;
pub mod headers;
pub mod packets;
pub mod pipeline;
pub mod schema;
pub mod switch;

pub use bits::BitString;
pub use error::{EngineError, FormatError, StepError};
