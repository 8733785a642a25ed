//! Constructive disjunction.
//!
//! Each disjunct keeps a trailed local view of the domains over its own
//! scope, propagated to arc consistency of its atoms (the disjuncts are
//! conjunctions of unary and binary relations over tree-shaped scopes, so arc
//! consistency is GAC per disjunct). A disjunct whose view wipes out is dead
//! for the rest of the branch. A value is pruned globally when every live
//! disjunct mentioning its variable has locally removed it and no live
//! disjunct omits the variable; the constraint fails when all disjuncts die.
//! No entailment-detection rule is applied.

use crate::engine::{Core, Failure, PropResult, Propagator};
use crate::literal::{Lit, Val, VarId};
use crate::model::{Atom, ConstraintDef, Disjunct};
use crate::trigger::PropId;

struct View {
    /// one value set per disjunct-scope variable, aligned with scope order
    vals: Vec<Vec<bool>>,
    sizes: Vec<u32>,
    alive: bool,
}

enum TrailOp {
    Removed { d: usize, slot: usize, val: Val },
    Died { d: usize },
}

pub struct ConstructiveOr {
    scope: Vec<VarId>,
    disjuncts: Vec<Disjunct>,
    views: Vec<View>,
    prop: PropId,
    trail: Vec<TrailOp>,
    markers: Vec<usize>,
}

impl ConstructiveOr {
    pub fn new(def: &ConstraintDef, prop: PropId) -> Self {
        let disjuncts = def
            .disjuncts()
            .expect("constructive or needs a disjunctive constraint");
        ConstructiveOr {
            scope: def.scope(),
            disjuncts,
            views: Vec::new(),
            prop,
            trail: Vec::new(),
            markers: Vec::new(),
        }
    }

    fn slot(&self, d: usize, x: VarId) -> Option<usize> {
        self.disjuncts[d].scope.iter().position(|&y| y == x)
    }

    fn view_contains(&self, d: usize, slot: usize, v: Val) -> bool {
        self.views[d]
            .vals[slot]
            .get(v as usize)
            .copied()
            .unwrap_or(false)
    }

    fn view_min(&self, d: usize, slot: usize) -> Option<Val> {
        self.views[d].vals[slot]
            .iter()
            .position(|&b| b)
            .map(|i| i as Val)
    }

    fn view_max(&self, d: usize, slot: usize) -> Option<Val> {
        self.views[d].vals[slot]
            .iter()
            .rposition(|&b| b)
            .map(|i| i as Val)
    }

    fn view_remove(&mut self, d: usize, slot: usize, v: Val) {
        debug_assert!(self.view_contains(d, slot, v));
        self.views[d].vals[slot][v as usize] = false;
        self.views[d].sizes[slot] -= 1;
        self.trail.push(TrailOp::Removed { d, slot, val: v });
    }

    fn kill(&mut self, d: usize) {
        self.views[d].alive = false;
        self.trail.push(TrailOp::Died { d });
    }

    /// Arc consistency of one disjunct's atoms over its local view. Returns
    /// false when the view wiped out (the disjunct is then marked dead).
    fn revise_disjunct(&mut self, d: usize) -> bool {
        loop {
            let mut changed = false;
            for ai in 0..self.disjuncts[d].atoms.len() {
                let atom = self.disjuncts[d].atoms[ai];
                match atom {
                    Atom::EqConst(x, k) => {
                        let sx = self.slot(d, x).unwrap();
                        for v in self.view_values(d, sx) {
                            if v != k {
                                self.view_remove(d, sx, v);
                                changed = true;
                            }
                        }
                    }
                    Atom::EqVar(x, y) => {
                        let (sx, sy) = (self.slot(d, x).unwrap(), self.slot(d, y).unwrap());
                        for v in self.view_values(d, sx) {
                            if !self.view_contains(d, sy, v) {
                                self.view_remove(d, sx, v);
                                changed = true;
                            }
                        }
                        for v in self.view_values(d, sy) {
                            if !self.view_contains(d, sx, v) {
                                self.view_remove(d, sy, v);
                                changed = true;
                            }
                        }
                    }
                    Atom::LtVar(x, y) => {
                        let (sx, sy) = (self.slot(d, x).unwrap(), self.slot(d, y).unwrap());
                        if let (Some(lo), Some(hi)) = (self.view_min(d, sx), self.view_max(d, sy)) {
                            for v in self.view_values(d, sx) {
                                if v >= hi {
                                    self.view_remove(d, sx, v);
                                    changed = true;
                                }
                            }
                            for v in self.view_values(d, sy) {
                                if v <= lo {
                                    self.view_remove(d, sy, v);
                                    changed = true;
                                }
                            }
                        }
                    }
                    Atom::OffsetLe(x, s, y) => {
                        let (sx, sy) = (self.slot(d, x).unwrap(), self.slot(d, y).unwrap());
                        if let (Some(lo), Some(hi)) = (self.view_min(d, sx), self.view_max(d, sy)) {
                            for v in self.view_values(d, sx) {
                                if v + s > hi {
                                    self.view_remove(d, sx, v);
                                    changed = true;
                                }
                            }
                            for v in self.view_values(d, sy) {
                                if v < lo + s {
                                    self.view_remove(d, sy, v);
                                    changed = true;
                                }
                            }
                        }
                    }
                }
                if self.views[d].sizes.iter().any(|&s| s == 0) {
                    self.kill(d);
                    return false;
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn view_values(&self, d: usize, slot: usize) -> Vec<Val> {
        self.views[d].vals[slot]
            .iter()
            .enumerate()
            .filter(|&(_, &b)| b)
            .map(|(v, _)| v as Val)
            .collect()
    }

    /// The union rule: prune a global value when no live disjunct justifies
    /// it; fail when no disjunct is alive.
    fn prune_globally(&mut self, core: &mut Core) -> PropResult {
        if self.views.iter().all(|v| !v.alive) {
            return Err(Failure);
        }
        let mut prunes: Vec<(VarId, Val)> = Vec::new();
        for &x in &self.scope {
            let mut relevant = false; // some live disjunct mentions x
            let mut omitted = false; // some live disjunct omits x
            for d in 0..self.disjuncts.len() {
                if !self.views[d].alive {
                    continue;
                }
                if self.slot(d, x).is_some() {
                    relevant = true;
                } else {
                    omitted = true;
                }
            }
            if !relevant || omitted {
                continue;
            }
            for v in core.doms.iter(x) {
                let justified = (0..self.disjuncts.len()).any(|d| {
                    self.views[d].alive
                        && self
                            .slot(d, x)
                            .map_or(false, |s| self.view_contains(d, s, v))
                });
                if !justified {
                    prunes.push((x, v));
                }
            }
        }
        for (x, v) in prunes {
            core.prune(x, v)?;
        }
        Ok(())
    }

    /// Remove `val` from every live view mentioning `var` and re-establish
    /// per-disjunct consistency.
    fn sync_removal(&mut self, core: &mut Core, var: VarId, val: Val) -> PropResult {
        for d in 0..self.disjuncts.len() {
            if !self.views[d].alive {
                continue;
            }
            if let Some(slot) = self.slot(d, var) {
                if self.view_contains(d, slot, val) {
                    self.view_remove(d, slot, val);
                    if self.views[d].sizes[slot] == 0 {
                        self.kill(d);
                    } else {
                        self.revise_disjunct(d);
                    }
                }
            }
        }
        self.prune_globally(core)
    }
}

impl Propagator for ConstructiveOr {
    fn initialise(&mut self, core: &mut Core) -> PropResult {
        for &x in &self.scope.clone() {
            let vals: Vec<Val> = core.doms.iter(x).collect();
            for v in vals {
                core.triggers.attach(self.prop, core.litmap.encode(x, v));
            }
        }
        self.views = self
            .disjuncts
            .iter()
            .map(|d| {
                let vals: Vec<Vec<bool>> = d
                    .scope
                    .iter()
                    .map(|&x| {
                        let span = core.doms.max(x).map_or(0, |m| m as usize + 1);
                        let mut bits = vec![false; span];
                        for v in core.doms.iter(x) {
                            bits[v as usize] = true;
                        }
                        bits
                    })
                    .collect();
                let sizes = vals
                    .iter()
                    .map(|b| b.iter().filter(|&&x| x).count() as u32)
                    .collect();
                View {
                    vals,
                    sizes,
                    alive: true,
                }
            })
            .collect();
        for d in 0..self.disjuncts.len() {
            self.revise_disjunct(d);
        }
        self.prune_globally(core)
    }

    fn propagate(&mut self, core: &mut Core, lit: Lit) -> PropResult {
        let (x, v) = core.litmap.decode(lit);
        self.sync_removal(core, x, v)
    }

    fn on_push(&mut self) {
        self.markers.push(self.trail.len());
    }

    fn on_backtrack(&mut self, _core: &mut Core) {
        let mark = self.markers.pop().expect("backtrack without marker");
        while self.trail.len() > mark {
            match self.trail.pop().unwrap() {
                TrailOp::Removed { d, slot, val } => {
                    self.views[d].vals[slot][val as usize] = true;
                    self.views[d].sizes[slot] += 1;
                }
                TrailOp::Died { d } => {
                    self.views[d].alive = true;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_force_gac, DEFAULT_CAP};

    fn fixpoint(def: &ConstraintDef, doms: &[Vec<Val>]) -> Result<Vec<Vec<Val>>, ()> {
        let mut core = Core::new(doms);
        let mut prop = ConstructiveOr::new(def, PropId(0));
        prop.initialise(&mut core).map_err(|_| ())?;
        while let Some((_, lit)) = core.queue.pop_front() {
            prop.propagate(&mut core, lit).map_err(|_| ())?;
        }
        Ok(core.doms.snapshot())
    }

    #[test]
    fn two_way_disjunction_keeps_everything() {
        // (x < y) or (y < x), domains {0,1}: each value justified by a side
        let def = ConstraintDef::Table {
            vars: vec![VarId(0), VarId(1)],
            supports: vec![
                vec![(VarId(0), 0), (VarId(1), 1)],
                vec![(VarId(0), 1), (VarId(1), 0)],
            ],
        };
        let doms = vec![vec![0, 1], vec![0, 1]];
        assert_eq!(fixpoint(&def, &doms).unwrap(), doms);
    }

    #[test]
    fn single_live_disjunct_is_plain_gac() {
        // non-overlap with one satisfiable disjunct prunes like that disjunct
        let def = ConstraintDef::NonOverlap {
            xi: VarId(0),
            xj: VarId(1),
            yi: VarId(2),
            yj: VarId(3),
            si: 2,
            sj: 2,
            // squares of size 2 on a line of 4: y dimensions pinned
        };
        let doms = vec![vec![0, 1, 2], vec![0, 1, 2], vec![0], vec![0]];
        let got = fixpoint(&def, &doms).unwrap();
        let expect = brute_force_gac(&def, &doms, DEFAULT_CAP).unwrap();
        assert_eq!(got, expect);
    }

    #[test]
    fn all_disjuncts_dead_fails() {
        let def = ConstraintDef::NonOverlap {
            xi: VarId(0),
            xj: VarId(1),
            yi: VarId(2),
            yj: VarId(3),
            si: 3,
            sj: 3,
        };
        let doms = vec![vec![0, 1], vec![0, 1], vec![0, 1], vec![0, 1]];
        assert!(fixpoint(&def, &doms).is_err());
    }

    #[test]
    fn matches_oracle_with_backtracking() {
        let def = ConstraintDef::LexLeq {
            xs: vec![VarId(0), VarId(1)],
            ys: vec![VarId(2), VarId(3)],
        };
        let doms = vec![vec![0, 1, 2], vec![0, 1, 2], vec![0, 1, 2], vec![0, 1, 2]];
        let mut core = Core::new(&doms);
        let mut prop = ConstructiveOr::new(&def, PropId(0));
        prop.initialise(&mut core).unwrap();
        core.queue.clear();
        let root = core.doms.snapshot();

        prop.on_push();
        core.doms.push_marker();
        core.prune(VarId(2), 2).unwrap();
        core.prune(VarId(2), 1).unwrap();
        let before = core.doms.snapshot();
        let mut ok = true;
        while let Some((_, lit)) = core.queue.pop_front() {
            if prop.propagate(&mut core, lit).is_err() {
                ok = false;
                break;
            }
        }
        assert!(ok);
        assert_eq!(
            core.doms.snapshot(),
            brute_force_gac(&def, &before, DEFAULT_CAP).unwrap()
        );
        prop.on_backtrack(&mut core);
        core.doms.restore_to_marker();
        core.queue.clear();
        assert_eq!(core.doms.snapshot(), root);
    }
}
