//! Declarative constraint definitions and models.
//!
//! Every constraint kind carries a declarative satisfaction predicate over
//! full assignments to its scope. The predicates are the ground truth used by
//! the brute-force oracles and by solution verification; propagators must
//! agree with them.

use crate::literal::{Val, VarId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A set of literals, at most one per variable: the unit stored, searched for
/// and returned by `find_new_support` functions.
pub type Support = Vec<(VarId, Val)>;

/// Result slot of an `element` constraint: either a variable or a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElemTarget {
    Var(VarId),
    Const(Val),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ConstraintDef {
    /// array[index] = result
    Element {
        array: Vec<VarId>,
        index: VarId,
        result: ElemTarget,
    },
    /// xs <=lex ys
    LexLeq { xs: Vec<VarId>, ys: Vec<VarId> },
    /// Non-overlap of two squares of sizes `si`, `sj`:
    /// (xi+si<=xj) or (xj+sj<=xi) or (yi+si<=yj) or (yj+sj<=yi)
    NonOverlap {
        xi: VarId,
        xj: VarId,
        yi: VarId,
        yj: VarId,
        si: Val,
        sj: Val,
    },
    /// A tuple satisfies iff it extends at least one of the listed supports.
    Table { vars: Vec<VarId>, supports: Vec<Support> },
    AllDifferent { vars: Vec<VarId> },
    /// Sum of 0/1 variables equals `sum`.
    BoolSumEq { vars: Vec<VarId>, sum: u32 },
    /// r = a AND b over 0/1 variables.
    BoolAnd { a: VarId, b: VarId, r: VarId },
    /// aux = coeff * p + q
    LinearAux {
        coeff: u32,
        p: VarId,
        q: VarId,
        aux: VarId,
    },
}

/// How a constraint is propagated in benchmark models: `Study` constraints
/// follow the configured propagator, `Plumbing` constraints always use the
/// direct GAC propagators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Study,
    Plumbing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constraint {
    pub def: ConstraintDef,
    pub role: Role,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model has no variables")]
    Empty,
    #[error("variable {0} has an empty initial domain")]
    EmptyDomain(String),
    #[error("constraint references unknown variable id {0}")]
    BadVar(u32),
    #[error("invalid parameter: {0}")]
    BadParam(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Model {
    pub var_names: Vec<String>,
    pub initial_domains: Vec<Vec<Val>>,
    pub constraints: Vec<Constraint>,
    /// Static branching order; variables not listed are never branched on.
    pub branch_order: Vec<VarId>,
}

impl Model {
    pub fn new() -> Self {
        Model::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, domain: Vec<Val>) -> VarId {
        let id = VarId(self.var_names.len() as u32);
        self.var_names.push(name.into());
        self.initial_domains.push(domain);
        id
    }

    pub fn add_range_var(&mut self, name: impl Into<String>, lo: Val, hi: Val) -> VarId {
        self.add_var(name, (lo..=hi).collect())
    }

    pub fn add_constraint(&mut self, def: ConstraintDef, role: Role) {
        self.constraints.push(Constraint { def, role });
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.var_names.is_empty() {
            return Err(ModelError::Empty);
        }
        for (x, d) in self.initial_domains.iter().enumerate() {
            if d.is_empty() {
                return Err(ModelError::EmptyDomain(self.var_names[x].clone()));
            }
        }
        let n = self.num_vars() as u32;
        for c in &self.constraints {
            for v in c.def.scope() {
                if v.0 >= n {
                    return Err(ModelError::BadVar(v.0));
                }
            }
        }
        Ok(())
    }

    /// True iff `assignment` (indexed by variable id) satisfies every
    /// constraint. Used to verify reported solutions.
    pub fn satisfies(&self, assignment: &[Val]) -> bool {
        self.constraints
            .iter()
            .all(|c| c.def.satisfied_by(|x| assignment[x.idx()]))
    }
}

impl ConstraintDef {
    /// Scope variables in a fixed, deterministic order.
    pub fn scope(&self) -> Vec<VarId> {
        match self {
            ConstraintDef::Element { array, index, result } => {
                let mut s = array.clone();
                s.push(*index);
                if let ElemTarget::Var(z) = result {
                    s.push(*z);
                }
                s
            }
            ConstraintDef::LexLeq { xs, ys } => {
                xs.iter().chain(ys.iter()).copied().collect()
            }
            ConstraintDef::NonOverlap { xi, xj, yi, yj, .. } => vec![*xi, *xj, *yi, *yj],
            ConstraintDef::Table { vars, .. } => vars.clone(),
            ConstraintDef::AllDifferent { vars } => vars.clone(),
            ConstraintDef::BoolSumEq { vars, .. } => vars.clone(),
            ConstraintDef::BoolAnd { a, b, r } => vec![*a, *b, *r],
            ConstraintDef::LinearAux { p, q, aux, .. } => vec![*p, *q, *aux],
        }
    }

    /// Evaluate the constraint on a full assignment, reading values through
    /// `value`.
    pub fn satisfied_by(&self, value: impl Fn(VarId) -> Val) -> bool {
        match self {
            ConstraintDef::Element { array, index, result } => {
                let i = value(*index) as usize;
                if i >= array.len() {
                    return false;
                }
                let target = match result {
                    ElemTarget::Var(z) => value(*z),
                    ElemTarget::Const(c) => *c,
                };
                value(array[i]) == target
            }
            ConstraintDef::LexLeq { xs, ys } => {
                for (x, y) in xs.iter().zip(ys.iter()) {
                    let (vx, vy) = (value(*x), value(*y));
                    if vx < vy {
                        return true;
                    }
                    if vx > vy {
                        return false;
                    }
                }
                true
            }
            ConstraintDef::NonOverlap { xi, xj, yi, yj, si, sj } => {
                value(*xi) + si <= value(*xj)
                    || value(*xj) + sj <= value(*xi)
                    || value(*yi) + si <= value(*yj)
                    || value(*yj) + sj <= value(*yi)
            }
            ConstraintDef::Table { supports, .. } => supports
                .iter()
                .any(|s| s.iter().all(|&(x, v)| value(x) == v)),
            ConstraintDef::AllDifferent { vars } => {
                for (k, x) in vars.iter().enumerate() {
                    for y in &vars[k + 1..] {
                        if value(*x) == value(*y) {
                            return false;
                        }
                    }
                }
                true
            }
            ConstraintDef::BoolSumEq { vars, sum } => {
                vars.iter().map(|x| value(*x)).sum::<u32>() == *sum
            }
            ConstraintDef::BoolAnd { a, b, r } => {
                (value(*a) != 0 && value(*b) != 0) == (value(*r) != 0)
            }
            ConstraintDef::LinearAux { coeff, p, q, aux } => {
                value(*aux) == coeff * value(*p) + value(*q)
            }
        }
    }

    /// Sound consistency check on a partial assignment: returns `false` only
    /// when no completion can satisfy the constraint. On full assignments it
    /// coincides with `satisfied_by`.
    pub fn partial_consistent(&self, value: impl Fn(VarId) -> Option<Val>) -> bool {
        match self {
            ConstraintDef::Element { array, index, result } => {
                let Some(i) = value(*index) else { return true };
                let i = i as usize;
                if i >= array.len() {
                    return false;
                }
                let target = match result {
                    ElemTarget::Var(z) => value(*z),
                    ElemTarget::Const(c) => Some(*c),
                };
                match (value(array[i]), target) {
                    (Some(av), Some(t)) => av == t,
                    _ => true,
                }
            }
            ConstraintDef::LexLeq { xs, ys } => {
                for (x, y) in xs.iter().zip(ys.iter()) {
                    match (value(*x), value(*y)) {
                        (Some(vx), Some(vy)) if vx < vy => return true,
                        (Some(vx), Some(vy)) if vx > vy => return false,
                        (Some(_), Some(_)) => {} // equal, keep scanning
                        _ => return true,
                    }
                }
                true
            }
            ConstraintDef::NonOverlap { xi, xj, yi, yj, si, sj } => {
                match (value(*xi), value(*xj), value(*yi), value(*yj)) {
                    (Some(a), Some(b), Some(c), Some(d)) => {
                        a + si <= b || b + sj <= a || c + si <= d || d + sj <= c
                    }
                    _ => true,
                }
            }
            ConstraintDef::Table { supports, .. } => supports.iter().any(|s| {
                s.iter()
                    .all(|&(x, v)| value(x).map_or(true, |got| got == v))
            }),
            ConstraintDef::AllDifferent { vars } => {
                for (k, x) in vars.iter().enumerate() {
                    let Some(vx) = value(*x) else { continue };
                    for y in &vars[k + 1..] {
                        if value(*y) == Some(vx) {
                            return false;
                        }
                    }
                }
                true
            }
            ConstraintDef::BoolSumEq { vars, sum } => {
                let mut assigned = 0u32;
                let mut free = 0u32;
                for x in vars {
                    match value(*x) {
                        Some(v) => assigned += v,
                        None => free += 1,
                    }
                }
                assigned <= *sum && assigned + free >= *sum
            }
            ConstraintDef::BoolAnd { a, b, r } => match (value(*a), value(*b), value(*r)) {
                (Some(a), Some(b), Some(r)) => ((a != 0) && (b != 0)) == (r != 0),
                (Some(0), _, Some(r)) | (_, Some(0), Some(r)) => r == 0,
                _ => true,
            },
            ConstraintDef::LinearAux { coeff, p, q, aux } => {
                match (value(*p), value(*q), value(*aux)) {
                    (Some(p), Some(q), Some(a)) => a == coeff * p + q,
                    _ => true,
                }
            }
        }
    }

    /// Decompose into a disjunction of conjunctions of atomic relations, when
    /// the constraint has a natural one. Used by the constructive-or
    /// propagator and by the disjunction-based short support set builder.
    pub fn disjuncts(&self) -> Option<Vec<Disjunct>> {
        match self {
            ConstraintDef::Element { array, index, result } => Some(
                array
                    .iter()
                    .enumerate()
                    .map(|(i, &xi)| {
                        let mut atoms = vec![Atom::EqConst(*index, i as Val)];
                        match result {
                            ElemTarget::Var(z) => atoms.push(Atom::EqVar(xi, *z)),
                            ElemTarget::Const(c) => atoms.push(Atom::EqConst(xi, *c)),
                        }
                        Disjunct::new(atoms)
                    })
                    .collect(),
            ),
            ConstraintDef::LexLeq { xs, ys } => {
                let n = xs.len();
                let mut out = Vec::with_capacity(n + 1);
                for i in 0..n {
                    let mut atoms: Vec<Atom> =
                        (0..i).map(|j| Atom::EqVar(xs[j], ys[j])).collect();
                    atoms.push(Atom::LtVar(xs[i], ys[i]));
                    out.push(Disjunct::new(atoms));
                }
                out.push(Disjunct::new(
                    (0..n).map(|j| Atom::EqVar(xs[j], ys[j])).collect(),
                ));
                Some(out)
            }
            ConstraintDef::NonOverlap { xi, xj, yi, yj, si, sj } => Some(vec![
                Disjunct::new(vec![Atom::OffsetLe(*xi, *si, *xj)]),
                Disjunct::new(vec![Atom::OffsetLe(*xj, *sj, *xi)]),
                Disjunct::new(vec![Atom::OffsetLe(*yi, *si, *yj)]),
                Disjunct::new(vec![Atom::OffsetLe(*yj, *sj, *yi)]),
            ]),
            ConstraintDef::Table { supports, .. } => Some(
                supports
                    .iter()
                    .map(|s| {
                        Disjunct::new(s.iter().map(|&(x, v)| Atom::EqConst(x, v)).collect())
                    })
                    .collect(),
            ),
            _ => None,
        }
    }
}

/// A binary or unary atomic relation inside a disjunct.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Atom {
    EqConst(VarId, Val),
    EqVar(VarId, VarId),
    LtVar(VarId, VarId),
    /// x + s <= y
    OffsetLe(VarId, Val, VarId),
}

impl Atom {
    pub fn vars(&self) -> Vec<VarId> {
        match *self {
            Atom::EqConst(x, _) => vec![x],
            Atom::EqVar(x, y) | Atom::LtVar(x, y) | Atom::OffsetLe(x, _, y) => vec![x, y],
        }
    }

    pub fn holds(&self, value: impl Fn(VarId) -> Val) -> bool {
        match *self {
            Atom::EqConst(x, k) => value(x) == k,
            Atom::EqVar(x, y) => value(x) == value(y),
            Atom::LtVar(x, y) => value(x) < value(y),
            Atom::OffsetLe(x, s, y) => value(x) + s <= value(y),
        }
    }
}

/// A conjunction of atoms over a sub-scope.
#[derive(Debug, Clone)]
pub struct Disjunct {
    pub atoms: Vec<Atom>,
    pub scope: Vec<VarId>,
}

impl Disjunct {
    pub fn new(atoms: Vec<Atom>) -> Self {
        let mut scope: Vec<VarId> = Vec::new();
        for a in &atoms {
            for v in a.vars() {
                if !scope.contains(&v) {
                    scope.push(v);
                }
            }
        }
        Disjunct { atoms, scope }
    }

    pub fn holds(&self, value: impl Fn(VarId) -> Val) -> bool {
        self.atoms.iter().all(|a| a.holds(&value))
    }

    /// Full-length supports of this disjunct (over its own scope) under the
    /// given domains, in lexicographic scope order. Returns `None` when the
    /// enumeration would exceed `cap` tuples.
    pub fn full_supports(
        &self,
        domains: impl Fn(VarId) -> Vec<Val>,
        cap: usize,
    ) -> Option<Vec<Support>> {
        let doms: Vec<Vec<Val>> = self.scope.iter().map(|&x| domains(x)).collect();
        let mut size = 1usize;
        for d in &doms {
            size = size.saturating_mul(d.len());
            if size > cap {
                return None;
            }
        }
        let mut out = Vec::new();
        let mut tuple = vec![0 as Val; self.scope.len()];
        self.enumerate(&doms, 0, &mut tuple, &mut out);
        Some(out)
    }

    fn enumerate(&self, doms: &[Vec<Val>], k: usize, tuple: &mut Vec<Val>, out: &mut Vec<Support>) {
        if k == self.scope.len() {
            let value = |x: VarId| {
                let pos = self.scope.iter().position(|&y| y == x).unwrap();
                tuple[pos]
            };
            if self.holds(value) {
                out.push(self.scope.iter().copied().zip(tuple.iter().copied()).collect());
            }
            return;
        }
        for &v in &doms[k] {
            tuple[k] = v;
            self.enumerate(doms, k + 1, tuple, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_oracle() {
        // array[index] = result with a constant result
        let def = ConstraintDef::Element {
            array: vec![VarId(0), VarId(1)],
            index: VarId(2),
            result: ElemTarget::Const(1),
        };
        assert!(def.satisfied_by(|x| [1, 0, 0][x.idx()]));
        assert!(!def.satisfied_by(|x| [0, 1, 0][x.idx()]));
        // partial: index unassigned is always consistent
        assert!(def.partial_consistent(|x| [Some(0), None, None][x.idx()]));
        assert!(!def.partial_consistent(|x| [Some(0), None, Some(0)][x.idx()]));
    }

    #[test]
    fn lex_oracle() {
        let def = ConstraintDef::LexLeq {
            xs: vec![VarId(0), VarId(1)],
            ys: vec![VarId(2), VarId(3)],
        };
        assert!(def.satisfied_by(|x| [0, 5, 0, 5][x.idx()]));
        assert!(def.satisfied_by(|x| [0, 9, 1, 0][x.idx()]));
        assert!(!def.satisfied_by(|x| [1, 0, 0, 9][x.idx()]));
        // prefix already decides
        assert!(!def.partial_consistent(|x| [Some(2), None, Some(1), None][x.idx()]));
        assert!(def.partial_consistent(|x| [Some(1), None, Some(1), None][x.idx()]));
    }

    #[test]
    fn lemma_disjunction_supports() {
        // (x1 < x2) or (x2 < x3) over {0,1} domains: full supports of each
        // disjunct enumerate to {{x1->0,x2->1},{x2->0,x3->1}}.
        let d1 = Disjunct::new(vec![Atom::LtVar(VarId(0), VarId(1))]);
        let d2 = Disjunct::new(vec![Atom::LtVar(VarId(1), VarId(2))]);
        let dom = |_: VarId| vec![0, 1];
        assert_eq!(
            d1.full_supports(dom, 100).unwrap(),
            vec![vec![(VarId(0), 0), (VarId(1), 1)]]
        );
        assert_eq!(
            d2.full_supports(dom, 100).unwrap(),
            vec![vec![(VarId(1), 0), (VarId(2), 1)]]
        );
    }

    #[test]
    fn bool_sum_partial_bounds() {
        let def = ConstraintDef::BoolSumEq {
            vars: vec![VarId(0), VarId(1), VarId(2)],
            sum: 2,
        };
        assert!(!def.partial_consistent(|x| [Some(0), Some(0), None][x.idx()]));
        assert!(def.partial_consistent(|x| [Some(1), None, None][x.idx()]));
        assert!(!def.partial_consistent(|x| [Some(1), Some(1), Some(1)][x.idx()]));
    }
}
