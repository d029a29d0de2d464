//! Deletion-correcting codes over binary strings: confusability graphs, the
//! priority-driven greedy construction, VT codes, and the pure parts of the
//! program search (scoring, program database, prompts, analysis).
#![no_std]

extern crate alloc;

pub mod analysis;
pub mod bitseq;
pub mod confgraph;
pub mod error;
pub mod greedy;
pub mod priolib;
pub mod progdb;
pub mod prompt;
pub mod scoring;
pub mod vtcodes;

pub use bitseq::{BitString, MAX_LEN};
pub use confgraph::{build_graph, ConfusabilityGraph};
pub use error::{Error, Result};
pub use greedy::{greedy_construct, Code, PriorityFunction, PriorityValue};
pub use priolib::Builtin;
pub use progdb::{Database, SearchConfig};
pub use scoring::{EvalInput, EvalResult, EvalStatus, ScoreSpec};
