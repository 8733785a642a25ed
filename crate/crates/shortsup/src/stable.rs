//! The HAGGISGAC-STABLE propagator.
//!
//! Requires every support returned by the source to be backtrack stable (a
//! short support with respect to the initial domains). Active supports are
//! then never deleted on backtracking. Instead, when a literal is pruned the
//! support whose loss condemned it is labelled as its *prime support* and the
//! pair goes onto a backtrack stack; unwinding a node restores the prime
//! support only if the literal is not already covered, and otherwise drops
//! the label, reclaiming the support when its label count reaches zero.
//!
//! The assigned-literal stripping of the other propagators is disabled here
//! (a stripped literal's variable may be unassigned again after
//! backtracking); the full-length fast path is kept.
//!
//! Storage is bounded: at most 2z supports are stored per constraint, where z
//! is the number of scope literals.

use crate::engine::{Core, Failure, PropResult, Propagator};
use crate::literal::Lit;
use crate::model::Support;
use crate::sources::SupportSource;
use crate::store::{DeleteMode, LocalLit, LocalVar, Scratch, SlotState, StableAux, SupportId, SupportStore};

pub struct HaggisGacStable {
    store: SupportStore,
    source: Box<dyn SupportSource>,
    scratch: Scratch,
    aux: StableAux,
    /// Pairs of (pruned literal, prime support), segmented by node markers.
    stack: Vec<(LocalLit, SupportId)>,
    markers: Vec<usize>,
    deleted_this_call: Vec<SupportId>,
    /// zero_lits removals of the current call, for the failure unwind.
    zl_removed_this_call: Vec<LocalLit>,
    stack_start_this_call: usize,
    initialising: bool,
}

impl HaggisGacStable {
    pub fn new(store: SupportStore, source: Box<dyn SupportSource>) -> Self {
        debug_assert!(store.fast_path);
        let aux = StableAux::new(store.num_lit_slots(), store.arity() as usize);
        HaggisGacStable {
            store,
            source,
            scratch: Scratch::default(),
            aux,
            stack: Vec::new(),
            markers: Vec::new(),
            deleted_this_call: Vec::new(),
            zl_removed_this_call: Vec::new(),
            stack_start_this_call: 0,
            initialising: false,
        }
    }

    pub fn store(&self) -> &SupportStore {
        &self.store
    }

    pub fn stack_len(&self) -> usize {
        self.stack.len()
    }

    fn install(&mut self, core: &mut Core, found: &Support) -> SupportId {
        // no assigned-literal stripping in stable mode
        let local: Vec<(LocalVar, _)> = found
            .iter()
            .map(|&(x, v)| (self.store.local_var(x).expect("scope var"), v))
            .collect();
        let id = self.store.allocate(core, &local, found.len() as u32);
        self.store.add_support(core, id);
        id
    }

    fn push_pair(&mut self, lit: LocalLit, sup: SupportId) {
        self.store.bump_num_prime(sup);
        self.stack.push((lit, sup));
    }

    fn remove_from_zero_lits(&mut self, x: LocalVar, i: usize) {
        let lit = self.store.zero_lits_get(x, i);
        self.store.zero_lits_remove_at(x, i);
        self.zl_removed_this_call.push(lit);
    }

    /// Repair a literal that lost its last explicit support; when the repair
    /// fails (or the literal was already pruned externally) the deleted
    /// support becomes its prime support.
    fn literal_update(&mut self, core: &mut Core, lit: LocalLit) -> PropResult {
        let (lx, v) = self.store.decode_local(lit);
        let gx = self.store.global_var(lx);
        if core.doms.contains(gx, v) {
            if self.store.supports_per_var[lx as usize] == self.store.num_supports
                && self.store.list_empty(lit)
            {
                match self.source.find(&core.doms, gx, v) {
                    None => {
                        self.push_pair(lit, self.aux.fresh_lit(lit));
                        core.prune(gx, v)?;
                    }
                    Some(found) => {
                        self.install(core, &found);
                    }
                }
            }
        } else {
            // pruned externally while its last explicit support died: label
            // an arbitrary deleted support, the last to be deleted
            self.push_pair(lit, self.aux.fresh_lit(lit));
        }
        Ok(())
    }

    /// Repair a variable that lost its last implicit support. Invalid
    /// literals found in its zero-literal stack carry the deleted implicit
    /// support as their prime and leave the stack (they return on backtrack).
    fn variable_update(&mut self, core: &mut Core, x: LocalVar) -> Result<(), Failure> {
        let mut i = self.store.zero_lits_len(x);
        while i > 0 {
            i -= 1;
            if self.store.supports_per_var[x as usize] < self.store.num_supports {
                return Ok(());
            }
            let lit = self.store.zero_lits_get(x, i);
            if !self.store.list_empty(lit) {
                self.store.zero_lits_remove_at(x, i);
                continue;
            }
            let (_, v) = self.store.decode_local(lit);
            let gx = self.store.global_var(x);
            if core.doms.contains(gx, v) {
                match self.source.find(&core.doms, gx, v) {
                    None => {
                        // root prunings are never restored mid-search, so
                        // initialisation labels no prime support
                        if !self.initialising {
                            self.push_pair(lit, self.aux.fresh_var(x));
                        }
                        self.remove_from_zero_lits(x, i);
                        core.prune(gx, v)?;
                    }
                    Some(found) => {
                        self.install(core, &found);
                    }
                }
            } else if self.initialising {
                // root-pruned literals are never restored mid-search; no
                // deleted support exists yet to label
                self.remove_from_zero_lits(x, i);
            } else {
                self.push_pair(lit, self.aux.fresh_var(x));
                self.remove_from_zero_lits(x, i);
            }
        }
        Ok(())
    }

    fn run_updates(&mut self, core: &mut Core) -> PropResult {
        let mut i = 0;
        while i < self.scratch.lits_lost.len() {
            let lit = self.scratch.lits_lost[i];
            self.literal_update(core, lit)?;
            i += 1;
        }
        let mut i = 0;
        while i < self.scratch.vars_lost.len() {
            let x = self.scratch.vars_lost[i];
            self.variable_update(core, x)?;
            i += 1;
        }
        Ok(())
    }

    /// Reclaim every support deleted in this call that ended up labelling
    /// nothing; the rest stay referenced by exactly their prime pairs.
    fn reclaim_pass(&mut self, core: &mut Core) {
        for sup in std::mem::take(&mut self.deleted_this_call) {
            if self.store.slot_state(sup) == SlotState::Deleted && self.store.num_prime(sup) == 0 {
                self.store.reclaim(core, sup);
            }
        }
        if core.audit {
            assert!(
                self.store.stored_count() <= 2 * self.store.num_scope_lits as u64,
                "stored supports exceed the 2z bound"
            );
        }
    }

    /// A failed call must leave the store exactly as it found it: active
    /// supports are never deleted on backtracking, so the engine's unwind
    /// cannot repair a half-processed deletion. Re-add this call's
    /// deletions, drop its pairs and restore its zero-literal removals.
    fn unwind_failed_call(&mut self, core: &mut Core) {
        while self.stack.len() > self.stack_start_this_call {
            let (_, sup) = self.stack.pop().unwrap();
            let _ = sup;
        }
        for sup in std::mem::take(&mut self.deleted_this_call).into_iter().rev() {
            debug_assert_eq!(self.store.slot_state(sup), SlotState::Deleted);
            self.store.set_num_prime_zero(sup);
            self.store.add_support(core, sup);
        }
        for lit in std::mem::take(&mut self.zl_removed_this_call) {
            if self.store.list_empty(lit) {
                self.store.zero_lits_push(lit);
            }
        }
    }

    fn begin_call(&mut self) {
        self.scratch.clear();
        self.deleted_this_call.clear();
        self.zl_removed_this_call.clear();
        self.stack_start_this_call = self.stack.len();
    }
}

impl Propagator for HaggisGacStable {
    fn initialise(&mut self, core: &mut Core) -> PropResult {
        self.begin_call();
        self.initialising = true;
        let mut result = Ok(());
        for x in 0..self.store.arity() {
            result = self.variable_update(core, x);
            if result.is_err() {
                break;
            }
        }
        self.initialising = false;
        // root failure is terminal; no unwind needed
        self.reclaim_pass(core);
        result
    }

    fn propagate(&mut self, core: &mut Core, lit: Lit) -> PropResult {
        let (gx, v) = core.litmap.decode(lit);
        let lx = self.store.local_var(gx).expect("trigger on scope literal");
        let local = self.store.local_lit(lx, v);
        self.begin_call();
        while let Some(sup) = self.store.first_support_of(local) {
            self.store.delete_support(
                core,
                sup,
                DeleteMode::ScratchAll,
                Some(&mut self.scratch),
                Some(&mut self.aux),
            );
            self.deleted_this_call.push(sup);
        }
        let result = self.run_updates(core);
        if result.is_err() {
            self.unwind_failed_call(core);
            return result;
        }
        self.reclaim_pass(core);
        result
    }

    fn on_push(&mut self) {
        self.markers.push(self.stack.len());
    }

    /// Pop prime pairs down to the node marker: restore the support when its
    /// literal is otherwise unsupported, else drop the label. Popped literals
    /// re-enter their zero-literal stacks when their lists are empty.
    fn on_backtrack(&mut self, core: &mut Core) {
        let mark = self.markers.pop().expect("backtrack without node marker");
        while self.stack.len() > mark {
            let (lit, sup) = self.stack.pop().unwrap();
            if !self.store.restored_flag(sup) {
                let (x, _) = self.store.decode_local(lit);
                if self.store.supports_per_var[x as usize] == self.store.num_supports
                    && self.store.list_empty(lit)
                {
                    self.store.add_support(core, sup);
                    self.store.mark_restored(sup);
                } else if self.store.dec_num_prime(sup) == 0 {
                    self.store.reclaim(core, sup);
                }
            }
            if self.store.list_empty(lit) {
                self.store.zero_lits_push(lit);
            }
        }
    }

    fn audit(&self, core: &Core) -> Result<(), String> {
        self.store.audit(core, true)?;
        // a literal is labelled by at most two pairs at once
        let mut counts = std::collections::HashMap::new();
        for &(lit, sup) in &self.stack {
            *counts.entry(lit).or_insert(0u32) += 1;
            if self.store.slot_state(sup) == SlotState::Free {
                return Err(format!("pair references a reclaimed support {sup}"));
            }
        }
        if let Some((lit, n)) = counts.iter().find(|&(_, &n)| n > 2) {
            return Err(format!("literal {lit} labelled by {n} pairs"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::literal::{Val, VarId};
    use crate::model::{ConstraintDef, ElemTarget};
    use crate::oracle::{brute_force_gac, DEFAULT_CAP};
    use crate::sources::ElementSource;
    use crate::trigger::PropId;

    fn element_def() -> ConstraintDef {
        ConstraintDef::Element {
            array: vec![VarId(0), VarId(1), VarId(2)],
            index: VarId(3),
            result: ElemTarget::Var(VarId(4)),
        }
    }

    fn element_doms() -> Vec<Vec<Val>> {
        vec![
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2, 3],
        ]
    }

    fn make(core: &Core) -> HaggisGacStable {
        let store = SupportStore::new(core, PropId(0), &element_def().scope(), true, false);
        let source = Box::new(ElementSource {
            array: vec![VarId(0), VarId(1), VarId(2)],
            index: VarId(3),
            result: ElemTarget::Var(VarId(4)),
        });
        HaggisGacStable::new(store, source)
    }

    fn drain(core: &mut Core, prop: &mut HaggisGacStable) -> PropResult {
        while let Some((_, lit)) = core.queue.pop_front() {
            prop.propagate(core, lit)?;
        }
        Ok(())
    }

    #[test]
    fn fixpoint_and_backtrack_round_trip() {
        let mut core = Core::new(&element_doms());
        core.audit = true;
        let mut prop = make(&core);
        prop.on_push();
        core.doms.push_marker();
        prop.initialise(&mut core).unwrap();
        assert_eq!(
            core.doms.snapshot(),
            brute_force_gac(&element_def(), &element_doms(), DEFAULT_CAP).unwrap()
        );
        let root = core.doms.snapshot();

        // descend: prune y -> 0, then y -> 1 (assigning y to 2)
        prop.on_push();
        core.doms.push_marker();
        core.prune(VarId(3), 0).unwrap();
        core.prune(VarId(3), 1).unwrap();
        let before = core.doms.snapshot();
        drain(&mut core, &mut prop).unwrap();
        assert_eq!(
            core.doms.snapshot(),
            brute_force_gac(&element_def(), &before, DEFAULT_CAP).unwrap()
        );
        prop.audit(&core).unwrap();

        // backtrack: domains restored, supports never deleted by the unwind
        prop.on_backtrack(&mut core);
        core.doms.restore_to_marker();
        core.queue.clear();
        assert_eq!(core.doms.snapshot(), root);
        prop.audit(&core).unwrap();

        // the restored state still propagates correctly
        prop.on_push();
        core.doms.push_marker();
        core.prune(VarId(4), 0).unwrap();
        let before = core.doms.snapshot();
        drain(&mut core, &mut prop).unwrap();
        assert_eq!(
            core.doms.snapshot(),
            brute_force_gac(&element_def(), &before, DEFAULT_CAP).unwrap()
        );
        prop.on_backtrack(&mut core);
        core.doms.restore_to_marker();
        prop.audit(&core).unwrap();
    }

    #[test]
    fn storage_stays_within_twice_the_scope_literals() {
        let mut core = Core::new(&element_doms());
        core.audit = true;
        let mut prop = make(&core);
        prop.on_push();
        core.doms.push_marker();
        prop.initialise(&mut core).unwrap();
        let z = prop.store.num_scope_lits as u64;
        // a deep dive with several prunings per node
        for (x, v) in [(3u32, 0u32), (4, 1), (0, 0), (3, 1), (4, 2), (1, 1)] {
            prop.on_push();
            core.doms.push_marker();
            if core.doms.contains(VarId(x), v) && core.doms.size(VarId(x)) > 1 {
                core.prune(VarId(x), v).unwrap();
                let _ = drain(&mut core, &mut prop);
            }
            assert!(prop.store.stored_count() <= 2 * z);
        }
        for _ in 0..6 {
            prop.on_backtrack(&mut core);
            core.doms.restore_to_marker();
            core.queue.clear();
            assert!(prop.store.stored_count() <= 2 * z);
            prop.audit(&core).unwrap();
        }
    }
}
