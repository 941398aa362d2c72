//! Visual-program debugging toolkit: a Python-subset interpreter over scene
//! graphs with step tracing, error injection driven by a token-level
//! language model, and a critic-refiner repair loop.

pub mod debugger;
pub mod dsl;
pub mod exec;
pub mod harness;
pub mod inject;
pub mod jsonl;
pub mod model;
pub mod pyfmt;
pub mod remote;
pub mod service;
pub mod world;
