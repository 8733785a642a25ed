//! Brute-force oracles and checkers.
//!
//! Everything here is pure: enumeration over domain boxes against the
//! declarative constraint predicates, independent of any propagator data
//! structure. These are the ground truth for the propagator equivalence and
//! support validity tests.

use crate::literal::{Val, VarId};
use crate::model::{ConstraintDef, Model, Support};
use thiserror::Error;

/// Default bound on enumerated extensions/assignments.
pub const DEFAULT_CAP: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("enumeration of ~{0} tuples exceeds the configured cap; unverifiable at this size")]
    CapExceeded(usize),
}

fn box_size(doms: &[Vec<Val>], vars: &[VarId], fixed: &[(VarId, Val)]) -> usize {
    let mut size = 1usize;
    for &x in vars {
        if fixed.iter().any(|&(y, _)| y == x) {
            continue;
        }
        size = size.saturating_mul(doms[x.idx()].len());
    }
    size
}

/// Enumerate all full assignments to `vars` drawn from `doms`, with some
/// variables pre-fixed, calling `f` until it returns `false`.
fn for_each_extension(
    doms: &[Vec<Val>],
    vars: &[VarId],
    fixed: &[(VarId, Val)],
    f: &mut impl FnMut(&dyn Fn(VarId) -> Val) -> bool,
) -> bool {
    fn rec(
        doms: &[Vec<Val>],
        vars: &[VarId],
        vals: &mut Vec<Val>,
        fixed: &[(VarId, Val)],
        f: &mut impl FnMut(&dyn Fn(VarId) -> Val) -> bool,
    ) -> bool {
        let k = vals.len();
        if k == vars.len() {
            let vars = vars.to_vec();
            let snapshot = vals.clone();
            let value = move |x: VarId| {
                let pos = vars.iter().position(|&y| y == x).expect("var in scope");
                snapshot[pos]
            };
            return f(&value);
        }
        let x = vars[k];
        if let Some(&(_, v)) = fixed.iter().find(|&&(y, _)| y == x) {
            vals.push(v);
            let cont = rec(doms, vars, vals, fixed, f);
            vals.pop();
            return cont;
        }
        for &v in &doms[x.idx()] {
            vals.push(v);
            let cont = rec(doms, vars, vals, fixed, f);
            vals.pop();
            if !cont {
                return false;
            }
        }
        true
    }
    let mut vals = Vec::with_capacity(vars.len());
    rec(doms, vars, &mut vals, fixed, f)
}

/// Does `(var, val)` have a full-length support in `def` under `doms`?
pub fn has_full_support(
    def: &ConstraintDef,
    doms: &[Vec<Val>],
    var: VarId,
    val: Val,
    cap: usize,
) -> Result<bool, OracleError> {
    let scope = def.scope();
    debug_assert!(scope.contains(&var));
    let size = box_size(doms, &scope, &[(var, val)]);
    if size > cap {
        return Err(OracleError::CapExceeded(size));
    }
    let mut found = false;
    for_each_extension(doms, &scope, &[(var, val)], &mut |value| {
        if def.satisfied_by(value) {
            found = true;
            false
        } else {
            true
        }
    });
    Ok(found)
}

/// Definition of short support, checked by exhaustive extension: all literals
/// valid, one per scope variable, and every valid full extension satisfies
/// the constraint.
pub fn is_short_support(
    def: &ConstraintDef,
    doms: &[Vec<Val>],
    s: &Support,
    cap: usize,
) -> Result<bool, OracleError> {
    let scope = def.scope();
    for (i, &(x, v)) in s.iter().enumerate() {
        if !scope.contains(&x) || !doms[x.idx()].contains(&v) {
            return Ok(false);
        }
        if s[i + 1..].iter().any(|&(y, _)| y == x) {
            return Ok(false);
        }
    }
    let size = box_size(doms, &scope, s);
    if size > cap {
        return Err(OracleError::CapExceeded(size));
    }
    let mut all = true;
    for_each_extension(doms, &scope, s, &mut |value| {
        if def.satisfied_by(value) {
            true
        } else {
            all = false;
            false
        }
    });
    Ok(all)
}

/// All full-length supports of `def` under `doms`, in lexicographic scope
/// order.
pub fn all_full_supports(
    def: &ConstraintDef,
    doms: &[Vec<Val>],
    cap: usize,
) -> Result<Vec<Vec<Val>>, OracleError> {
    let scope = def.scope();
    let size = box_size(doms, &scope, &[]);
    if size > cap {
        return Err(OracleError::CapExceeded(size));
    }
    let mut out = Vec::new();
    for_each_extension(doms, &scope, &[], &mut |value| {
        if def.satisfied_by(value) {
            out.push(scope.iter().map(|&x| value(x)).collect());
        }
        true
    });
    Ok(out)
}

/// Definition of a short support set: every member is a short support and
/// every full-length support is a superset of at least one member.
pub fn is_short_support_set(
    def: &ConstraintDef,
    doms: &[Vec<Val>],
    set: &[Support],
    cap: usize,
) -> Result<bool, OracleError> {
    for s in set {
        if !is_short_support(def, doms, s, cap)? {
            return Ok(false);
        }
    }
    let scope = def.scope();
    let full = all_full_supports(def, doms, cap)?;
    for tuple in &full {
        let contains = |s: &Support| {
            s.iter().all(|&(x, v)| {
                let pos = scope.iter().position(|&y| y == x).unwrap();
                tuple[pos] == v
            })
        };
        if !set.iter().any(contains) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Backtrack-stability check via the sufficient condition: a support that is
/// a short support with respect to the *initial* domains remains one at every
/// ancestor node, because domains never grow beyond the initial ones.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub stable: bool,
    pub note: &'static str,
}

pub fn is_backtrack_stable(
    def: &ConstraintDef,
    initial_doms: &[Vec<Val>],
    s: &Support,
    cap: usize,
) -> Result<StabilityReport, OracleError> {
    let stable = is_short_support(def, initial_doms, s, cap)?;
    Ok(StabilityReport {
        stable,
        note: "sufficient condition: short support w.r.t. initial domains",
    })
}

/// The master fixpoint oracle: remove every literal of the scope lacking a
/// full-length support. A single simultaneous pass suffices (surviving
/// literals keep their supports since those supports' own literals survive),
/// which also makes the operation idempotent.
pub fn brute_force_gac(
    def: &ConstraintDef,
    doms: &[Vec<Val>],
    cap: usize,
) -> Result<Vec<Vec<Val>>, OracleError> {
    let mut out = doms.to_vec();
    for &x in &def.scope() {
        let mut keep = Vec::new();
        for &v in &doms[x.idx()] {
            if has_full_support(def, doms, x, v, cap)? {
                keep.push(v);
            }
        }
        out[x.idx()] = keep;
    }
    Ok(out)
}

/// All solutions of the model by backtracking over a derived variable order,
/// with sound partial-consistency pruning. Results are sorted
/// lexicographically by variable id.
pub fn brute_force_solve_all(model: &Model, node_cap: u64) -> Result<Vec<Vec<Val>>, OracleError> {
    let order = oracle_order(model);
    let n = model.num_vars();
    // constraints touching each variable, to check incrementally
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ci, c) in model.constraints.iter().enumerate() {
        for x in c.def.scope() {
            touching[x.idx()].push(ci);
        }
    }
    let mut assignment: Vec<Option<Val>> = vec![None; n];
    let mut out = Vec::new();
    let mut nodes = 0u64;

    fn rec(
        model: &Model,
        order: &[VarId],
        touching: &[Vec<usize>],
        depth: usize,
        assignment: &mut Vec<Option<Val>>,
        out: &mut Vec<Vec<Val>>,
        nodes: &mut u64,
        node_cap: u64,
    ) -> Result<(), OracleError> {
        if depth == order.len() {
            let full: Vec<Val> = assignment.iter().map(|v| v.unwrap()).collect();
            debug_assert!(model.satisfies(&full));
            out.push(full);
            return Ok(());
        }
        let x = order[depth];
        let domain = model.initial_domains[x.idx()].clone();
        for v in domain {
            *nodes += 1;
            if *nodes > node_cap {
                return Err(OracleError::CapExceeded(node_cap as usize));
            }
            assignment[x.idx()] = Some(v);
            let ok = touching[x.idx()].iter().all(|&ci| {
                model.constraints[ci]
                    .def
                    .partial_consistent(|y| assignment[y.idx()])
            });
            if ok {
                rec(model, order, touching, depth + 1, assignment, out, nodes, node_cap)?;
            }
            assignment[x.idx()] = None;
        }
        Ok(())
    }

    rec(
        model,
        &order,
        &touching,
        0,
        &mut assignment,
        &mut out,
        &mut nodes,
        node_cap,
    )?;
    out.sort();
    Ok(out)
}

/// Assignment order for the enumeration oracle: the model's branch order, but
/// with functionally determined variables (and-gates, linear aux) hoisted to
/// just after their inputs so their constraints prune immediately.
fn oracle_order(model: &Model) -> Vec<VarId> {
    let n = model.num_vars();
    // output var -> input vars, for functional constraints
    let mut determined: Vec<Option<Vec<VarId>>> = vec![None; n];
    for c in &model.constraints {
        match &c.def {
            ConstraintDef::BoolAnd { a, b, r } => determined[r.idx()] = Some(vec![*a, *b]),
            ConstraintDef::LinearAux { p, q, aux, .. } => {
                determined[aux.idx()] = Some(vec![*p, *q])
            }
            _ => {}
        }
    }
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let place = |x: VarId, order: &mut Vec<VarId>, placed: &mut Vec<bool>| {
        if !placed[x.idx()] {
            placed[x.idx()] = true;
            order.push(x);
        }
    };
    let all_placed =
        |vars: &[VarId], placed: &[bool]| vars.iter().all(|v| placed[v.idx()]);
    for &x in &model.branch_order {
        place(x, &mut order, &mut placed);
        loop {
            let mut changed = false;
            for y in 0..n {
                if placed[y] {
                    continue;
                }
                if let Some(inputs) = &determined[y] {
                    if all_placed(inputs, &placed) {
                        place(VarId(y as u32), &mut order, &mut placed);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }
    for y in 0..n {
        if !placed[y] {
            order.push(VarId(y as u32));
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ElemTarget, Role};

    /// The element constraint x_y = z with domains x0..x2 in {0..2},
    /// y in {0..2}, z in {0..3}: the running worked example.
    pub fn element_example() -> (ConstraintDef, Vec<Vec<Val>>) {
        let def = ConstraintDef::Element {
            array: vec![VarId(0), VarId(1), VarId(2)],
            index: VarId(3),
            result: ElemTarget::Var(VarId(4)),
        };
        let doms = vec![
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2, 3],
        ];
        (def, doms)
    }

    #[test]
    fn short_support_examples() {
        let (def, doms) = element_example();
        // {x0 -> 1, y -> 0, z -> 1} is a short support
        let a = vec![(VarId(0), 1), (VarId(3), 0), (VarId(4), 1)];
        assert!(is_short_support(&def, &doms, &a, DEFAULT_CAP).unwrap());
        // {x0 -> 0} alone is not: y and z extensions can violate
        let bad = vec![(VarId(0), 0)];
        assert!(!is_short_support(&def, &doms, &bad, DEFAULT_CAP).unwrap());
    }

    #[test]
    fn empty_support_iff_entailed() {
        // entailed: x < y with D(x)={0}, D(y)={1}
        let def = ConstraintDef::Table {
            vars: vec![VarId(0), VarId(1)],
            supports: vec![vec![(VarId(0), 0)]],
        };
        let doms = vec![vec![0], vec![1]];
        assert!(is_short_support(&def, &doms, &vec![], DEFAULT_CAP).unwrap());
        let doms2 = vec![vec![0, 1], vec![1]];
        let def2 = ConstraintDef::Table {
            vars: vec![VarId(0), VarId(1)],
            supports: vec![vec![(VarId(0), 0)]],
        };
        assert!(!is_short_support(&def2, &doms2, &vec![], DEFAULT_CAP).unwrap());
    }

    #[test]
    fn gac_on_element_removes_unsupported_result() {
        let (def, doms) = element_example();
        let gac = brute_force_gac(&def, &doms, DEFAULT_CAP).unwrap();
        // z -> 3 has no support; everything else does
        assert_eq!(gac[4], vec![0, 1, 2]);
        for x in 0..4 {
            assert_eq!(gac[x], doms[x]);
        }
        // idempotence
        let again = brute_force_gac(&def, &gac, DEFAULT_CAP).unwrap();
        assert_eq!(again, gac);
    }

    #[test]
    fn gac_on_lex_pair() {
        let def = ConstraintDef::LexLeq {
            xs: vec![VarId(0)],
            ys: vec![VarId(1)],
        };
        let doms = vec![vec![2, 3], vec![1, 2]];
        let gac = brute_force_gac(&def, &doms, DEFAULT_CAP).unwrap();
        assert_eq!(gac[0], vec![2]);
        assert_eq!(gac[1], vec![2]);
    }

    #[test]
    fn short_support_set_of_disjunction() {
        // (x1 < x2) or (x2 < x3), all domains {0,1}
        let def = ConstraintDef::Table {
            vars: vec![VarId(0), VarId(1), VarId(2)],
            supports: vec![
                vec![(VarId(0), 0), (VarId(1), 1)],
                vec![(VarId(1), 0), (VarId(2), 1)],
            ],
        };
        let doms = vec![vec![0, 1]; 3];
        let set = vec![
            vec![(VarId(0), 0), (VarId(1), 1)],
            vec![(VarId(1), 0), (VarId(2), 1)],
        ];
        assert!(is_short_support_set(&def, &doms, &set, DEFAULT_CAP).unwrap());
        // dropping one disjunct's supports leaves full supports uncovered
        let partial = vec![vec![(VarId(0), 0), (VarId(1), 1)]];
        assert!(!is_short_support_set(&def, &doms, &partial, DEFAULT_CAP).unwrap());
        // the set of all full-length supports is trivially a short support set
        let full: Vec<Support> = all_full_supports(&def, &doms, DEFAULT_CAP)
            .unwrap()
            .into_iter()
            .map(|t| {
                def.scope()
                    .iter()
                    .copied()
                    .zip(t.into_iter())
                    .collect::<Support>()
            })
            .collect();
        assert!(is_short_support_set(&def, &doms, &full, DEFAULT_CAP).unwrap());
    }

    #[test]
    fn stability_examples() {
        // any full-length support is backtrack stable
        let (def, doms) = element_example();
        let full = vec![
            (VarId(0), 1),
            (VarId(1), 0),
            (VarId(2), 0),
            (VarId(3), 0),
            (VarId(4), 1),
        ];
        assert!(is_backtrack_stable(&def, &doms, &full, DEFAULT_CAP)
            .unwrap()
            .stable);
        // b -> (m = y): entailed when b=0, so {} is a short support under
        // current domains where b is fixed to 0, but not under initial ones.
        let def = ConstraintDef::Table {
            vars: vec![VarId(0), VarId(1), VarId(2)],
            supports: vec![
                vec![(VarId(0), 0)],
                vec![(VarId(1), 0), (VarId(2), 0)],
                vec![(VarId(1), 1), (VarId(2), 1)],
            ],
        };
        let initial = vec![vec![0, 1], vec![0, 1], vec![0, 1]];
        let current = vec![vec![0], vec![0, 1], vec![0, 1]];
        assert!(is_short_support(&def, &current, &vec![], DEFAULT_CAP).unwrap());
        assert!(!is_backtrack_stable(&def, &initial, &vec![], DEFAULT_CAP)
            .unwrap()
            .stable);
    }

    #[test]
    fn solve_all_trivial_models() {
        let mut model = Model::new();
        let x = model.add_var("x", vec![0, 1]);
        model.branch_order = vec![x];
        let sols = brute_force_solve_all(&model, 1_000).unwrap();
        assert_eq!(sols, vec![vec![0], vec![1]]);

        let mut unsat = Model::new();
        let a = unsat.add_var("a", vec![0]);
        let b = unsat.add_var("b", vec![0]);
        unsat.add_constraint(
            ConstraintDef::AllDifferent { vars: vec![a, b] },
            Role::Plumbing,
        );
        unsat.branch_order = vec![a, b];
        assert!(brute_force_solve_all(&unsat, 1_000).unwrap().is_empty());
    }
}
