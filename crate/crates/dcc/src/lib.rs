pub mod cli;
pub mod config;
pub mod evaluator;
pub mod graphs;
pub mod io;
pub mod llm;
pub mod orchestrator;
pub mod sandbox;
pub mod transport;
