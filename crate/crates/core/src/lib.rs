//! Look-compute-move robots on graphs: simulator, problem monitors and a
//! bounded verifier.

pub mod algorithms;
pub mod checker;
pub mod engine;
pub mod graph;
pub mod problems;
pub mod report;
pub mod scenario;
pub mod simulate;
mod text;

pub use text::ParseError;
