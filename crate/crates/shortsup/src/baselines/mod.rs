//! Comparison propagators and model plumbing: direct GAC filters for every
//! constraint kind, the constructive-or propagator for disjunctive
//! constraints, and GAC-Schema over full-length supports.

mod builtin;
mod constructive_or;
mod gac_schema;

pub use builtin::BuiltinGac;
pub use constructive_or::ConstructiveOr;
pub use gac_schema::GacSchema;
