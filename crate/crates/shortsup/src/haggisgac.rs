//! The HAGGISGAC propagator.
//!
//! The deletion procedure itself detects lost support: a literal whose list
//! empties while its variable has no implicit support is scratched, and the
//! variables compacted into the lost-implicit region of the partition are
//! scratched. After all supports containing the pruned literal are deleted,
//! the scratched literals are repaired first, then the scratched variables.
//! There is no outer restart loop, and full-length supports bypass the
//! counter machinery entirely.

use crate::engine::{Core, Failure, PropResult, Propagator};
use crate::literal::Lit;
use crate::model::Support;
use crate::sources::{strip_assigned, SupportSource};
use crate::store::{DeleteMode, LocalLit, LocalVar, Scratch, SupportId, SupportStore};

/// Where the repair loops run relative to the deletion loop. The fixpoint is
/// the same either way; the prose order (after all deletions) is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdatePlacement {
    AfterAllDeletions,
    PerDeletion,
}

pub struct HaggisGac {
    store: SupportStore,
    source: Box<dyn SupportSource>,
    scratch: Scratch,
    placement: UpdatePlacement,
}

impl HaggisGac {
    pub fn new(store: SupportStore, source: Box<dyn SupportSource>) -> Self {
        Self::with_placement(store, source, UpdatePlacement::AfterAllDeletions)
    }

    pub fn with_placement(
        store: SupportStore,
        source: Box<dyn SupportSource>,
        placement: UpdatePlacement,
    ) -> Self {
        debug_assert!(store.fast_path);
        HaggisGac {
            store,
            source,
            scratch: Scratch::default(),
            placement,
        }
    }

    pub fn store(&self) -> &SupportStore {
        &self.store
    }

    fn install(&mut self, core: &mut Core, found: &Support) -> SupportId {
        let original = found.len() as u32;
        let stripped = strip_assigned(found, &core.doms);
        let local: Vec<(LocalVar, _)> = stripped
            .iter()
            .map(|&(x, v)| (self.store.local_var(x).expect("scope var"), v))
            .collect();
        let id = self.store.allocate(core, &local, original);
        self.store.add_support(core, id);
        id
    }

    /// Repair one literal that lost its last explicit support. A support
    /// found for an earlier scratched literal may already cover this one, so
    /// the guard re-checks everything.
    fn literal_update(&mut self, core: &mut Core, lit: LocalLit) -> PropResult {
        let (lx, v) = self.store.decode_local(lit);
        let gx = self.store.global_var(lx);
        if core.doms.contains(gx, v)
            && self.store.supports_per_var[lx as usize] == self.store.num_supports
            && self.store.list_empty(lit)
        {
            match self.source.find(&core.doms, gx, v) {
                None => core.prune(gx, v)?,
                Some(found) => {
                    self.install(core, &found);
                }
            }
        }
        Ok(())
    }

    /// Repair one variable that lost its last implicit support, exiting as
    /// soon as it regains one. Literals re-supported merely explicitly stay
    /// in zero_lits for lazy removal by a later call.
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
            if !core.doms.contains(gx, v) {
                continue;
            }
            match self.source.find(&core.doms, gx, v) {
                None => core.prune(gx, v)?,
                Some(found) => {
                    self.install(core, &found);
                }
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
}

impl Propagator for HaggisGac {
    fn initialise(&mut self, core: &mut Core) -> PropResult {
        // every variable starts with supports_per_var = num_supports = 0
        for x in 0..self.store.arity() {
            self.variable_update(core, x)?;
        }
        Ok(())
    }

    fn propagate(&mut self, core: &mut Core, lit: Lit) -> PropResult {
        let (gx, v) = core.litmap.decode(lit);
        let lx = self.store.local_var(gx).expect("trigger on scope literal");
        let local = self.store.local_lit(lx, v);
        self.scratch.clear();
        match self.placement {
            UpdatePlacement::AfterAllDeletions => {
                while let Some(sup) = self.store.first_support_of(local) {
                    self.store.delete_support(
                        core,
                        sup,
                        DeleteMode::ScratchValidOnly,
                        Some(&mut self.scratch),
                        None,
                    );
                }
                self.run_updates(core)?;
            }
            UpdatePlacement::PerDeletion => {
                while let Some(sup) = self.store.first_support_of(local) {
                    self.store.delete_support(
                        core,
                        sup,
                        DeleteMode::ScratchValidOnly,
                        Some(&mut self.scratch),
                        None,
                    );
                    self.run_updates(core)?;
                    self.scratch.clear();
                }
            }
        }
        Ok(())
    }

    fn on_push(&mut self) {
        self.store.push_marker();
    }

    fn on_backtrack(&mut self, core: &mut Core) {
        self.store.replay_to_marker(core);
    }

    fn audit(&self, core: &Core) -> Result<(), String> {
        self.store.audit(core, false)
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

    /// Four variables in {0..3} under the all-different-except-zero style
    /// fixture: five active supports A-E, then y -> 0 is pruned. Deleting
    /// D = {x->0, y->0, z->0} scratches exactly the literal z->0 and the
    /// variable w.
    #[test]
    fn scratch_sets_after_single_deletion() {
        let doms: Vec<Vec<Val>> = (0..4).map(|_| (0..4).collect()).collect();
        let mut core = Core::new(&doms);
        let scope: Vec<VarId> = (0..4).map(VarId).collect();
        // counted semantics for every support (no fast path): the fixture's
        // A, B, C and E are full length
        let mut store = SupportStore::new(&core, PropId(0), &scope, false, true);
        // w=0, x=1, y=2, z=3
        let table: [&[(LocalVar, Val)]; 5] = [
            &[(0, 0), (1, 2), (2, 3), (3, 1)], // A
            &[(0, 0), (1, 3), (2, 2), (3, 1)], // B
            &[(0, 3), (1, 0), (2, 1), (3, 2)], // C
            &[(1, 0), (2, 0), (3, 0)],         // D
            &[(0, 0), (1, 1), (2, 2), (3, 3)], // E
        ];
        let mut ids = Vec::new();
        for pairs in table {
            let id = store.allocate(&mut core, pairs, pairs.len() as u32);
            store.add_support(&mut core, id);
            ids.push(id);
        }
        assert_eq!(store.num_supports, 5);
        assert_eq!(store.supports_per_var, vec![4, 5, 5, 5]);
        // the lazily maintained zero_lits still hold stale entries from
        // initialisation; flush them so the fixture matches the narrative
        for x in 0..4 {
            store.zero_lits_iterate(x, |_| {});
        }
        assert_eq!(store.zero_lits_len(0), 2, "w->1 and w->2 lack explicit support");

        core.prune(VarId(2), 0).unwrap(); // y -> 0
        let mut scratch = Scratch::default();
        core.audit = true;
        store.delete_support(
            &mut core,
            ids[3],
            DeleteMode::ScratchValidOnly,
            Some(&mut scratch),
            None,
        );
        let z0 = store.local_lit(3, 0);
        assert_eq!(scratch.lits_lost, vec![z0], "only z->0 lost explicit support");
        assert_eq!(scratch.vars_lost, vec![0], "only w lost implicit support");
        store.audit(&core, false).unwrap();
    }

    #[test]
    fn fixpoint_matches_brute_force_on_element() {
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
        let mut core = Core::new(&doms);
        core.audit = true;
        let store = SupportStore::new(&core, PropId(0), &def.scope(), true, true);
        let source = Box::new(ElementSource {
            array: vec![VarId(0), VarId(1), VarId(2)],
            index: VarId(3),
            result: ElemTarget::Var(VarId(4)),
        });
        let mut prop = HaggisGac::new(store, source);
        prop.initialise(&mut core).unwrap();
        assert_eq!(
            core.doms.snapshot(),
            brute_force_gac(&def, &doms, DEFAULT_CAP).unwrap()
        );
        // drive a few prunes through the event loop
        for (x, v) in [(3u32, 0u32), (0, 1), (4, 2)] {
            if !core.doms.contains(VarId(x), v) || core.doms.size(VarId(x)) == 1 {
                continue;
            }
            core.prune(VarId(x), v).unwrap();
            let before = core.doms.snapshot();
            let events: Vec<(PropId, Lit)> = core.queue.drain(..).collect();
            for (_, lit) in events {
                prop.propagate(&mut core, lit).unwrap();
            }
            assert_eq!(
                core.doms.snapshot(),
                brute_force_gac(&def, &before, DEFAULT_CAP).unwrap()
            );
            prop.audit(&core).unwrap();
        }
    }

    #[test]
    fn both_update_placements_reach_the_same_fixpoint() {
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
        let run = |placement: UpdatePlacement, prunes: &[(u32, Val)]| {
            let mut core = Core::new(&doms);
            let store = SupportStore::new(&core, PropId(0), &def.scope(), true, true);
            let source = Box::new(ElementSource {
                array: vec![VarId(0), VarId(1), VarId(2)],
                index: VarId(3),
                result: ElemTarget::Var(VarId(4)),
            });
            let mut prop = HaggisGac::with_placement(store, source, placement);
            prop.initialise(&mut core).unwrap();
            for &(x, v) in prunes {
                if !core.doms.contains(VarId(x), v) || core.doms.size(VarId(x)) == 1 {
                    continue;
                }
                core.prune(VarId(x), v).unwrap();
                let events: Vec<(PropId, Lit)> = core.queue.drain(..).collect();
                for (_, lit) in events {
                    prop.propagate(&mut core, lit).unwrap();
                }
            }
            core.doms.snapshot()
        };
        let prunes = [(3u32, 1u32), (4, 0), (0, 2), (1, 0)];
        assert_eq!(
            run(UpdatePlacement::AfterAllDeletions, &prunes),
            run(UpdatePlacement::PerDeletion, &prunes)
        );
    }
}
