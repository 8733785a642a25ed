//! The SHORTGAC propagator.
//!
//! On a pruned literal it deletes every active support containing it, then
//! repeatedly scans the variables with no implicit support (the partition
//! cell at `num_supports`), restarting the scan from scratch whenever a
//! variable update changes the data structures. The restart is deliberate;
//! the event-driven HAGGISGAC variant removes it.

use crate::engine::{Core, PropResult, Propagator};
use crate::literal::Lit;
use crate::model::Support;
use crate::sources::{strip_assigned, SupportSource};
use crate::store::{DeleteMode, LocalVar, SupportId, SupportStore};

pub struct ShortGac {
    store: SupportStore,
    source: Box<dyn SupportSource>,
}

impl ShortGac {
    pub fn new(store: SupportStore, source: Box<dyn SupportSource>) -> Self {
        debug_assert!(!store.fast_path, "no full-length fast path in this propagator");
        ShortGac { store, source }
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

    /// One pass over the literals of `x` that may lack explicit support.
    /// Returns true as soon as a new support was added (the caller restarts
    /// its scan), false when nothing changed.
    fn variable_update(&mut self, core: &mut Core, x: LocalVar) -> Result<bool, crate::engine::Failure> {
        let mut i = self.store.zero_lits_len(x);
        while i > 0 {
            i -= 1;
            let lit = self.store.zero_lits_get(x, i);
            if !self.store.list_empty(lit) {
                self.store.zero_lits_remove_at(x, i);
                continue;
            }
            let (lx, v) = self.store.decode_local(lit);
            let gx = self.store.global_var(lx);
            if !core.doms.contains(gx, v) {
                continue;
            }
            match self.source.find(&core.doms, gx, v) {
                None => core.prune(gx, v)?,
                Some(found) => {
                    self.install(core, &found);
                    // the new support must support the literal, but it may do
                    // so implicitly and not appear in its list
                    if !self.store.list_empty(lit) {
                        self.store.zero_lits_remove_at(x, i);
                    }
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// Scan the variables with `supports_per_var = num_supports` until a full
    /// pass reports no change.
    fn scan_to_fixpoint(&mut self, core: &mut Core) -> PropResult {
        loop {
            let mut changed = false;
            let lo = self.store.support_num_low_idx[self.store.num_supports as usize];
            let hi = self.store.support_num_low_idx[self.store.num_supports as usize + 1];
            for i in lo..hi {
                let y = self.store.vars_by_support[i as usize];
                if self.variable_update(core, y)? {
                    changed = true;
                    break;
                }
            }
            if !changed {
                return Ok(());
            }
        }
    }

    fn check_nonempty_invariant(&self, core: &Core) {
        // after initialisation, every exit leaves at least one active short
        // support unless a domain emptied (and then we failed instead)
        if core.audit {
            assert!(
                self.store.num_supports >= 1,
                "no active short support at propagator exit"
            );
        }
    }
}

impl Propagator for ShortGac {
    fn initialise(&mut self, core: &mut Core) -> PropResult {
        self.scan_to_fixpoint(core)?;
        self.check_nonempty_invariant(core);
        Ok(())
    }

    fn propagate(&mut self, core: &mut Core, lit: Lit) -> PropResult {
        let (gx, v) = core.litmap.decode(lit);
        let lx = self.store.local_var(gx).expect("trigger on scope literal");
        let local = self.store.local_lit(lx, v);
        while let Some(sup) = self.store.first_support_of(local) {
            self.store
                .delete_support(core, sup, DeleteMode::Plain, None, None);
        }
        self.scan_to_fixpoint(core)?;
        self.check_nonempty_invariant(core);
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
    use crate::model::Support;
    use crate::sources::ElementSource;
    use crate::trigger::PropId;

    fn element_core() -> Core {
        Core::new(&[
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2, 3],
        ])
    }

    fn element_source() -> Box<dyn SupportSource> {
        Box::new(ElementSource {
            array: vec![VarId(0), VarId(1), VarId(2)],
            index: VarId(3),
            result: crate::model::ElemTarget::Var(VarId(4)),
        })
    }

    #[test]
    fn initialise_prunes_unsupported_result_value() {
        let mut core = element_core();
        core.audit = true;
        let scope: Vec<VarId> = (0..5).map(VarId).collect();
        let store = SupportStore::new(&core, PropId(0), &scope, false, true);
        let mut prop = ShortGac::new(store, element_source());
        prop.initialise(&mut core).unwrap();
        assert!(!core.doms.contains(VarId(4), 3), "z -> 3 pruned");
        for v in 0..3 {
            assert!(core.doms.contains(VarId(4), v));
        }
        prop.audit(&core).unwrap();
        assert!(prop.store.num_supports >= 1);
    }

    /// A scripted source exercising the update cases directly: a support
    /// that covers the queried literal implicitly leaves it in zero_lits.
    struct Scripted(Vec<Option<Support>>);
    impl SupportSource for Scripted {
        fn find(
            &mut self,
            _doms: &crate::domain::DomainStore,
            _var: VarId,
            _val: Val,
        ) -> Option<Support> {
            self.0.pop().flatten()
        }
    }

    #[test]
    fn implicit_answer_keeps_literal_in_zero_lits() {
        let mut core = Core::new(&[vec![0], vec![0, 1]]);
        let scope = vec![VarId(0), VarId(1)];
        let store = SupportStore::new(&core, PropId(0), &scope, false, true);
        // answer every query with the empty support (implicit for everyone)
        struct AlwaysEmpty;
        impl SupportSource for AlwaysEmpty {
            fn find(
                &mut self,
                _doms: &crate::domain::DomainStore,
                _var: VarId,
                _val: Val,
            ) -> Option<Support> {
                Some(Vec::new())
            }
        }
        let mut prop = ShortGac::new(store, Box::new(AlwaysEmpty));
        prop.initialise(&mut core).unwrap();
        // one empty support covers everything; queried literals stay queued
        // in zero_lits but every variable is implicitly supported
        assert_eq!(prop.store.num_supports, 1);
        assert!(prop.store.zero_lits_len(0) > 0);
        prop.audit(&core).unwrap();
    }

    #[test]
    fn unsatisfiable_source_wipes_out_at_root() {
        let mut core = Core::new(&[vec![0, 1]]);
        let scope = vec![VarId(0)];
        let store = SupportStore::new(&core, PropId(0), &scope, false, true);
        let mut prop = ShortGac::new(store, Box::new(Scripted(vec![None, None])));
        assert!(prop.initialise(&mut core).is_err());
    }

    #[test]
    fn propagate_after_prune_reaches_gac() {
        let mut core = element_core();
        core.audit = true;
        let scope: Vec<VarId> = (0..5).map(VarId).collect();
        let store = SupportStore::new(&core, PropId(0), &scope, false, true);
        let mut prop = ShortGac::new(store, element_source());
        prop.initialise(&mut core).unwrap();
        // externally prune y -> 0 and deliver events for it
        core.prune(VarId(3), 0).unwrap();
        let after_prune = core.doms.snapshot();
        let events: Vec<(crate::trigger::PropId, Lit)> = core.queue.drain(..).collect();
        for (_, lit) in events {
            prop.propagate(&mut core, lit).unwrap();
        }
        // fixpoint equals brute-force GAC of the post-prune domains
        let def = crate::model::ConstraintDef::Element {
            array: vec![VarId(0), VarId(1), VarId(2)],
            index: VarId(3),
            result: crate::model::ElemTarget::Var(VarId(4)),
        };
        let expect =
            crate::oracle::brute_force_gac(&def, &after_prune, crate::oracle::DEFAULT_CAP).unwrap();
        assert_eq!(core.doms.snapshot(), expect);
        prop.audit(&core).unwrap();
    }
}
