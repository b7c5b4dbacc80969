//! Toolkit for guarded fixpoint logics over relational structures.
//!
//! The crate is organized around a back-and-forth between two worlds:
//!
//! * **Structures and formulas** — relational structures, guarded and
//!   guarded-negation formulas with least fixpoints, normal forms, model
//!   checking, bisimulation games, and unravellings ([`syntax`],
//!   [`semantics`], [`games`], [`unravel`]).
//! * **Tree codes and automata** — bounded-width tree encodings of
//!   structures, consistency checking, decoding, and mu-automata that run
//!   on codes ([`codes`], [`automata`], [`backward`]).
//!
//! The [`pipeline`] module ties both worlds together into decision
//! procedures: definability of a sentence in the guarded (fixpoint)
//! fragment, and acyclic rewritings of conjunctive queries under guarded
//! constraints. The `gfpkit` binary in the companion CLI crate exposes the
//! same operations as subcommands.
//!
//! Data-parallel sweeps (structure enumeration, batch consistency checks)
//! run on rayon when the default `parallel` feature is enabled and fall
//! back to sequential iteration otherwise.

pub mod symbols;
pub mod syntax;
pub mod semantics;
pub mod codes;
pub mod games;
pub mod unravel;
pub mod automata;
pub mod backward;
pub mod pipeline;

pub(crate) mod par;

pub use symbols::Symbols;
