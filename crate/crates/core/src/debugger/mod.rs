//! The critic-refiner debugging loop.
//!
//! Each iteration executes the program, renders feedback, asks a [`Critic`]
//! for a correctness score and an error location, and on rejection asks a
//! [`Refiner`] to rewrite the located span. Locations travel as text with
//! `<BUG>`/`<BUG/>` markers ([`encode_loc`], [`decode_loc`]).

pub mod backends;
pub mod codec;
pub mod session;

pub use backends::{
    BackendError, Critic, CriticRequest, CriticResponse, CriticVerdict, FixedCritic,
    IdentityRefiner, OracleCritic, OracleRefiner, RefineRequest, RefineResponse, Refiner,
    RemoteCritic, RemoteRefiner,
};
pub use codec::{decode_loc, encode_loc, LocError};
pub use session::{
    run_debug_loop, whole_body_span, ContainmentPolicy, DebugIteration, DebugSessionConfig,
    DebugTranscript, SessionConfigError, Termination,
};
