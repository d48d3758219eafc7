//! Simulation of quantum processors built from giant atoms coupled to
//! waveguides at multiple points.
//!
//! Interference between the coupling points makes decay rates and
//! atom-atom couplings strong, tunable functions of frequency. This crate
//! models the full stack that falls out of that tunability:
//!
//! - [`geometry`]: coupling-point layouts, the interference rate formulas,
//!   decoherence-free frequency finding, and the two-atom / chain / grid
//!   presets.
//! - [`lindblad`]: the time-dependent N-atom three-level master equation,
//!   integrated over piecewise-constant frequency schedules.
//! - [`gates`]: R_XY, CZ, and CZ_φ protocols, Choi-matrix process
//!   tomography, fidelities, and nearest-neighbor addressing.
//! - [`trotter`]: compiling dissipative XXZ spin-chain dynamics into gate
//!   schedules and scanning the Trotter/gate error tradeoff.
//! - [`oracle`]: independent reference solvers (exact spin-model Lindblad,
//!   ideal-gate circuits, closed-form two-level blocks) used to validate
//!   the engine.
//!
//! The `book/` directory holds a narrative guide whose code blocks are
//! compiled and executed as part of `cargo test --doc`, through the hidden
//! modules below.

pub mod error;
pub mod export;
pub mod gates;
pub mod geometry;
pub mod linalg;
pub mod lindblad;
pub mod oracle;
pub mod schedule;
pub mod trotter;
pub mod units;

pub use error::{Error, Result};

// Keep the guide's code blocks honest: each chapter with runnable snippets
// is included as a doc-test here.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/layouts.md")]
    mod layouts {}
    #[doc = include_str!("../../../book/src/master-equation.md")]
    mod master_equation {}
    #[doc = include_str!("../../../book/src/gates.md")]
    mod gates_chapter {}
    #[doc = include_str!("../../../book/src/spin-chain.md")]
    mod spin_chain {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli_reference {}
}
