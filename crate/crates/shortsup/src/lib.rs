//! Generalised arc consistency with short supports.
//!
//! A short support is a partial assignment, at most one literal per variable,
//! whose every valid full extension satisfies the constraint. This crate
//! implements the short-support propagation algorithms SHORTGAC, HAGGISGAC
//! and HAGGISGAC-STABLE over a shared support store, together with baseline
//! propagators (GAC-Schema, constructive or, direct GAC filters), pluggable
//! support-finding functions, brute-force verification oracles and a
//! benchmark harness with three case-study model families.
//!
//! Entry points:
//! - [`engine::Solver`] — backtracking all-solutions search.
//! - [`config::build_solver`] — wire a model to a propagator configuration.
//! - [`instances`] — QG3, BIBD and rectangle packing model builders.
//! - [`oracle`] — brute-force GAC / enumeration / short-support checkers.
//! - [`bench`] — repeated runs, medians, MAD, CSV/JSON output.

pub mod bench;
pub mod config;
pub mod domain;
pub mod engine;
pub mod instances;
pub mod literal;
pub mod model;
pub mod oracle;
pub mod sources;
pub mod store;
pub mod trigger;

pub mod baselines;
pub mod haggisgac;
pub mod harness;
pub mod shortgac;
pub mod stable;

pub use engine::{SearchResult, SearchStats, SearchStatus, Solver, SolverOptions};
pub use literal::{Lit, Val, VarId};
pub use model::{ConstraintDef, ElemTarget, Model, Role, Support};
