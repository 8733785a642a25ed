//! Wiring between models and propagators.
//!
//! A propagator choice applies to the *study* constraints of a model (the
//! element, lex, non-overlap or table constraints under comparison); plumbing
//! constraints (all-different, sums, and-gates, linear aux) always use the
//! direct GAC propagators so that node-count comparisons vary exactly one
//! thing. All configurations establish GAC, so search trees are identical
//! across them.

use std::fmt;
use std::str::FromStr;

use crate::baselines::{BuiltinGac, ConstructiveOr, GacSchema};
use crate::engine::{Solver, SolverOptions};
use crate::haggisgac::HaggisGac;
use crate::model::{ConstraintDef, Model, Role};
use crate::shortgac::ShortGac;
use crate::sources::{
    specific_source, support_table, ListSource, LongSource, NdListSource, SourceError,
    SupportSource,
};
use crate::stable::HaggisGacStable;
use crate::store::SupportStore;
use thiserror::Error;

/// How `find_new_support` is instantiated for the short-support propagators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Instantiation {
    /// Constraint-specific function (table constraints fall back to List).
    Specific,
    /// Per-literal support lists with circular resumption.
    List,
    /// Single shared list with next-difference jumps.
    NdList,
    /// Specific function with results extended to full length.
    Long,
}

impl Instantiation {
    pub const ALL: [Instantiation; 4] = [
        Instantiation::Specific,
        Instantiation::List,
        Instantiation::NdList,
        Instantiation::Long,
    ];
}

impl fmt::Display for Instantiation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Instantiation::Specific => "specific",
            Instantiation::List => "list",
            Instantiation::NdList => "ndlist",
            Instantiation::Long => "long",
        })
    }
}

impl FromStr for Instantiation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "specific" => Ok(Instantiation::Specific),
            "list" => Ok(Instantiation::List),
            "ndlist" => Ok(Instantiation::NdList),
            "long" => Ok(Instantiation::Long),
            other => Err(format!("unknown instantiation `{other}`")),
        }
    }
}

/// Propagation algorithm for the study constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PropChoice {
    ShortGac(Instantiation),
    HaggisGac(Instantiation),
    HaggisGacStable(Instantiation),
    GacSchema,
    ConstructiveOr,
    Builtin,
}

impl PropChoice {
    /// The full comparison matrix: three short-support algorithms by four
    /// instantiations, plus the three baselines.
    pub fn all() -> Vec<PropChoice> {
        let mut out = Vec::new();
        for inst in Instantiation::ALL {
            out.push(PropChoice::ShortGac(inst));
        }
        for inst in Instantiation::ALL {
            out.push(PropChoice::HaggisGac(inst));
        }
        for inst in Instantiation::ALL {
            out.push(PropChoice::HaggisGacStable(inst));
        }
        out.push(PropChoice::GacSchema);
        out.push(PropChoice::ConstructiveOr);
        out.push(PropChoice::Builtin);
        out
    }

    pub fn from_flags(prop: &str, inst: Instantiation) -> Result<PropChoice, String> {
        match prop {
            "shortgac" => Ok(PropChoice::ShortGac(inst)),
            "haggisgac" => Ok(PropChoice::HaggisGac(inst)),
            "haggisgac-stable" => Ok(PropChoice::HaggisGacStable(inst)),
            "gac-schema" => Ok(PropChoice::GacSchema),
            "constructive-or" => Ok(PropChoice::ConstructiveOr),
            "builtin" => Ok(PropChoice::Builtin),
            other => Err(format!("unknown propagator `{other}`")),
        }
    }
}

impl fmt::Display for PropChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropChoice::ShortGac(i) => write!(f, "shortgac-{i}"),
            PropChoice::HaggisGac(i) => write!(f, "haggisgac-{i}"),
            PropChoice::HaggisGacStable(i) => write!(f, "haggisgac-stable-{i}"),
            PropChoice::GacSchema => f.write_str("gac-schema"),
            PropChoice::ConstructiveOr => f.write_str("constructive-or"),
            PropChoice::Builtin => f.write_str("builtin"),
        }
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error("building support list: {0}")]
    Source(#[from] SourceError),
}

/// Default cap on generic support-list sizes.
pub const DEFAULT_SUPPORT_CAP: usize = 200_000;

fn make_source(
    def: &ConstraintDef,
    inst: Instantiation,
    stable: bool,
    initial_doms: &[Vec<crate::literal::Val>],
    cap: usize,
) -> Result<Box<dyn SupportSource>, SourceError> {
    Ok(match inst {
        Instantiation::Specific => specific_source(def, initial_doms, stable, cap)?,
        Instantiation::List => Box::new(ListSource::new(
            def.scope(),
            support_table(def, initial_doms, cap)?,
            initial_doms,
        )),
        Instantiation::NdList => Box::new(NdListSource::new(
            def.scope(),
            support_table(def, initial_doms, cap)?,
            initial_doms,
        )),
        Instantiation::Long => Box::new(LongSource {
            inner: specific_source(def, initial_doms, stable, cap)?,
            scope: def.scope(),
        }),
    })
}

/// Build a solver for `model` propagating study constraints with `choice`.
pub fn build_solver(
    model: &Model,
    choice: PropChoice,
    options: SolverOptions,
    support_cap: usize,
) -> Result<Solver, BuildError> {
    model.validate()?;
    let mut solver = Solver::new(model.clone(), options);
    let initial = &model.initial_domains;
    for c in &model.constraints {
        let pid = solver.next_prop_id();
        let def = &c.def;
        let effective = match c.role {
            Role::Plumbing => PropChoice::Builtin,
            Role::Study => choice,
        };
        let prop: Box<dyn crate::engine::Propagator> = match effective {
            PropChoice::Builtin => Box::new(BuiltinGac::new(def.clone(), pid)),
            PropChoice::ConstructiveOr => Box::new(ConstructiveOr::new(def, pid)),
            PropChoice::GacSchema => match def {
                ConstraintDef::Table { vars, supports } => Box::new(GacSchema::new_table(
                    vars.clone(),
                    initial,
                    supports.clone(),
                    pid,
                )),
                _ => Box::new(GacSchema::new(
                    def.scope(),
                    initial,
                    specific_source(def, initial, false, support_cap)?,
                    pid,
                )),
            },
            PropChoice::ShortGac(inst) => {
                let source = make_source(def, inst, false, initial, support_cap)?;
                let store = SupportStore::new(&solver.core, pid, &def.scope(), false, true);
                Box::new(ShortGac::new(store, source))
            }
            PropChoice::HaggisGac(inst) => {
                let source = make_source(def, inst, false, initial, support_cap)?;
                let store = SupportStore::new(&solver.core, pid, &def.scope(), true, true);
                Box::new(HaggisGac::new(store, source))
            }
            PropChoice::HaggisGacStable(inst) => {
                let source = make_source(def, inst, true, initial, support_cap)?;
                let store = SupportStore::new(&solver.core, pid, &def.scope(), true, false);
                Box::new(HaggisGacStable::new(store, source))
            }
        };
        let got = solver.add_propagator(prop);
        debug_assert_eq!(got, pid);
    }
    Ok(solver)
}
