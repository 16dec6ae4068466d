//! LT (Luby transform) codec over a binary symmetric channel.

mod decoder;
mod degree;
mod encoder;
mod graph;
mod session;

pub use decoder::{decode_ternary, DecodeOutcome, TernaryDecoder};
pub use degree::{degree_stats, DegreeDistribution, DegreeStats};
pub use encoder::{encode_block, CodedBit, LtEncoder};
pub use graph::{BipartiteGraph, GraphStream};
pub use session::{default_rate_grid, run_session, LtSessionResult, SessionConfig, RATE_CAP};
