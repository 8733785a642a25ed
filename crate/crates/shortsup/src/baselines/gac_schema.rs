//! GAC-Schema over full-length supports.
//!
//! Every literal keeps a *current* support, one of the active supports
//! containing it; `sof` lists the literals anchored to each support. When a
//! support is invalidated, each literal anchored to it first eagerly scans
//! its other active supports for a valid one (an O(n) validity check apiece),
//! then falls back to the find function, pruning on failure. Newly found
//! supports are recorded in the support lists of all their member literals
//! (multidirectionality).
//!
//! The find function is the constraint-specific short-support source with
//! results extended to full length; table constraints scan their support
//! list from a per-literal position that is trailed and restored exactly on
//! backtracking (no circular wrap).

use crate::engine::{Core, Failure, PropResult, Propagator};
use crate::literal::{Lit, Val, VarId};
use crate::model::Support;
use crate::sources::{longify_for_query, ScopeLits, SupportSource};
use crate::trigger::{PropId, TriggerHandle};

type SupId = u32;

enum FindFn {
    /// Specific source, longified (pinning the query literal).
    Source(Box<dyn SupportSource>),
    /// Table scan from a trailed per-literal position to the end of the list.
    Table(Vec<Support>),
}

struct Slot {
    tuple: Vec<Val>, // full-length, aligned with scope order
    active: bool,
    sof: Vec<u32>, // local literals anchored here
}

enum TrailOp {
    Added(SupId),
    Removed(SupId),
    Current { lit: u32, old: Option<SupId> },
    ListPos { lit: u32, old: u32 },
}

pub struct GacSchema {
    scope: Vec<VarId>,
    lits: ScopeLits,
    slots: Vec<Slot>,
    free: Vec<SupId>,
    sc: Vec<Vec<SupId>>,
    current: Vec<Option<SupId>>,
    list_pos: Vec<u32>,
    find: FindFn,
    prop: PropId,
    handles: Vec<Option<TriggerHandle>>,
    trail: Vec<TrailOp>,
    markers: Vec<usize>,
}

impl GacSchema {
    pub fn new(
        scope: Vec<VarId>,
        initial_doms: &[Vec<Val>],
        source: Box<dyn SupportSource>,
        prop: PropId,
    ) -> Self {
        let lits = ScopeLits::new(scope.clone(), initial_doms);
        let n = lits.num_lits();
        GacSchema {
            scope,
            lits,
            slots: Vec::new(),
            free: Vec::new(),
            sc: vec![Vec::new(); n],
            current: vec![None; n],
            list_pos: vec![0; n],
            find: FindFn::Source(source),
            prop,
            handles: vec![None; n],
            trail: Vec::new(),
            markers: Vec::new(),
        }
    }

    pub fn new_table(
        scope: Vec<VarId>,
        initial_doms: &[Vec<Val>],
        table: Vec<Support>,
        prop: PropId,
    ) -> Self {
        let mut s = Self::new(scope, initial_doms, Box::new(NeverFind), prop);
        s.find = FindFn::Table(table);
        s
    }

    /// Exposed for the trail-restore invariant test.
    pub fn list_positions(&self) -> &[u32] {
        &self.list_pos
    }

    fn lit_of(&self, x: VarId, v: Val) -> u32 {
        self.lits.lit(x, v) as u32
    }

    fn decode(&self, lit: u32) -> (VarId, Val) {
        // scope literal spans are small; a linear scan is fine here
        for (i, &x) in self.lits.scope.iter().enumerate() {
            let base = self.lits.lit(x, 0) as u32;
            let next = if i + 1 < self.lits.scope.len() {
                self.lits.lit(self.lits.scope[i + 1], 0) as u32
            } else {
                self.lits.num_lits() as u32
            };
            if lit >= base && lit < next {
                return (x, lit - base);
            }
        }
        unreachable!("literal out of range")
    }

    fn tuple_valid(&self, core: &Core, sup: SupId) -> bool {
        self.slots[sup as usize]
            .tuple
            .iter()
            .zip(self.scope.iter())
            .all(|(&v, &x)| core.doms.contains(x, v))
    }

    fn set_current(&mut self, lit: u32, new: Option<SupId>) {
        let old = self.current[lit as usize];
        if old == new {
            return;
        }
        if let Some(o) = old {
            let sof = &mut self.slots[o as usize].sof;
            if let Some(p) = sof.iter().position(|&l| l == lit) {
                sof.swap_remove(p);
            }
        }
        if let Some(nw) = new {
            self.slots[nw as usize].sof.push(lit);
        }
        self.current[lit as usize] = new;
        self.trail.push(TrailOp::Current { lit, old });
    }

    fn set_list_pos(&mut self, lit: u32, pos: u32) {
        let old = self.list_pos[lit as usize];
        if old != pos {
            self.trail.push(TrailOp::ListPos { lit, old });
            self.list_pos[lit as usize] = pos;
        }
    }

    /// Record a full-length tuple as active: into the support lists of every
    /// member literal, attaching triggers on lists that were empty.
    fn add_tuple(&mut self, core: &mut Core, tuple: Vec<Val>) -> SupId {
        let id = match self.free.pop() {
            Some(id) => id,
            None => {
                self.slots.push(Slot {
                    tuple: Vec::new(),
                    active: false,
                    sof: Vec::new(),
                });
                self.slots.len() as u32 - 1
            }
        };
        self.slots[id as usize].tuple = tuple;
        self.slots[id as usize].active = true;
        self.slots[id as usize].sof.clear();
        core.gauge.add(1);
        for i in 0..self.scope.len() {
            let lit = self.lit_of(self.scope[i], self.slots[id as usize].tuple[i]);
            if self.sc[lit as usize].is_empty() {
                let g = core.litmap.encode(self.scope[i], self.slots[id as usize].tuple[i]);
                self.handles[lit as usize] = Some(core.triggers.attach(self.prop, g));
            }
            self.sc[lit as usize].push(id);
        }
        self.trail.push(TrailOp::Added(id));
        id
    }

    fn unlink_tuple(&mut self, core: &mut Core, sup: SupId) {
        for i in 0..self.scope.len() {
            let lit = self.lit_of(self.scope[i], self.slots[sup as usize].tuple[i]);
            let sc = &mut self.sc[lit as usize];
            let p = sc.iter().position(|&s| s == sup).expect("support listed");
            sc.swap_remove(p);
            if sc.is_empty() {
                let h = self.handles[lit as usize].take().expect("trigger attached");
                core.triggers.remove(h);
            }
        }
        self.slots[sup as usize].active = false;
    }

    fn find_support(&mut self, core: &Core, x: VarId, v: Val) -> Option<Vec<Val>> {
        match &mut self.find {
            FindFn::Source(src) => src.find(&core.doms, x, v).map(|s| {
                let full = longify_for_query(&s, &self.scope, &core.doms, x, v);
                self.order_tuple(&full)
            }),
            FindFn::Table(table) => {
                let lit = self.lits.lit(x, v) as u32;
                let start = self.list_pos[lit as usize] as usize;
                for j in start..table.len() {
                    let s = &table[j];
                    let valid = s.iter().all(|&(y, b)| core.doms.contains(y, b));
                    let covers = s
                        .iter()
                        .find(|&&(y, _)| y == x)
                        .map_or(true, |&(_, b)| b == v);
                    if valid && covers {
                        let full = longify_for_query(s, &self.scope, &core.doms, x, v);
                        let tuple = self.order_tuple(&full);
                        self.set_list_pos(lit, j as u32);
                        return Some(tuple);
                    }
                }
                None
            }
        }
    }

    fn order_tuple(&self, full: &Support) -> Vec<Val> {
        self.scope
            .iter()
            .map(|&x| {
                full.iter()
                    .find(|&&(y, _)| y == x)
                    .map(|&(_, v)| v)
                    .expect("full-length support")
            })
            .collect()
    }

    /// Re-anchor or repair one literal whose current support died.
    fn repair(&mut self, core: &mut Core, lit: u32) -> PropResult {
        let (x, v) = self.decode(lit);
        if !core.doms.contains(x, v) {
            self.set_current(lit, None);
            return Ok(());
        }
        // eager validity scan over the remaining active supports of the
        // literal, before any search for a new one
        let found = self.sc[lit as usize]
            .iter()
            .copied()
            .find(|&s| self.tuple_valid(core, s));
        if let Some(s) = found {
            self.set_current(lit, Some(s));
            return Ok(());
        }
        match self.find_support(core, x, v) {
            Some(tuple) => {
                let id = self.add_tuple(core, tuple);
                self.set_current(lit, Some(id));
                Ok(())
            }
            None => {
                self.set_current(lit, None);
                core.prune(x, v)
            }
        }
    }
}

/// Placeholder find function for the table constructor.
struct NeverFind;
impl SupportSource for NeverFind {
    fn find(&mut self, _d: &crate::domain::DomainStore, _x: VarId, _v: Val) -> Option<Support> {
        None
    }
}

impl Propagator for GacSchema {
    fn initialise(&mut self, core: &mut Core) -> PropResult {
        for i in 0..self.scope.len() {
            let x = self.scope[i];
            let vals: Vec<Val> = core.doms.iter(x).collect();
            for v in vals {
                let lit = self.lit_of(x, v);
                if self.current[lit as usize].is_some() {
                    continue;
                }
                if !core.doms.contains(x, v) {
                    continue; // pruned by an earlier repair in this loop
                }
                self.repair(core, lit)?;
            }
        }
        Ok(())
    }

    fn propagate(&mut self, core: &mut Core, lit: Lit) -> PropResult {
        let (x, v) = core.litmap.decode(lit);
        let local = self.lit_of(x, v);
        while let Some(&sup) = self.sc[local as usize].first() {
            self.unlink_tuple(core, sup);
            self.trail.push(TrailOp::Removed(sup));
            let anchored = std::mem::take(&mut self.slots[sup as usize].sof);
            for l in anchored {
                // set_current trails the detachment so sof is rebuilt on
                // backtracking; detach by hand first
                self.current[l as usize] = None;
                self.trail.push(TrailOp::Current { lit: l, old: Some(sup) });
                self.repair(core, l)?;
            }
        }
        Ok(())
    }

    fn on_push(&mut self) {
        self.markers.push(self.trail.len());
    }

    fn on_backtrack(&mut self, core: &mut Core) {
        let mark = self.markers.pop().expect("backtrack without marker");
        while self.trail.len() > mark {
            match self.trail.pop().unwrap() {
                TrailOp::Added(sup) => {
                    debug_assert!(self.slots[sup as usize].sof.is_empty());
                    self.unlink_tuple(core, sup);
                    self.free.push(sup);
                    core.gauge.sub(1);
                }
                TrailOp::Removed(sup) => {
                    let tuple = std::mem::take(&mut self.slots[sup as usize].tuple);
                    for (i, &v) in tuple.iter().enumerate() {
                        let lit = self.lit_of(self.scope[i], v);
                        if self.sc[lit as usize].is_empty() {
                            let g = core.litmap.encode(self.scope[i], v);
                            self.handles[lit as usize] =
                                Some(core.triggers.attach(self.prop, g));
                        }
                        self.sc[lit as usize].push(sup);
                    }
                    self.slots[sup as usize].tuple = tuple;
                    self.slots[sup as usize].active = true;
                }
                TrailOp::Current { lit, old } => {
                    let cur = self.current[lit as usize];
                    if let Some(c) = cur {
                        let sof = &mut self.slots[c as usize].sof;
                        if let Some(p) = sof.iter().position(|&l| l == lit) {
                            sof.swap_remove(p);
                        }
                    }
                    if let Some(o) = old {
                        self.slots[o as usize].sof.push(lit);
                    }
                    self.current[lit as usize] = old;
                }
                TrailOp::ListPos { lit, old } => {
                    self.list_pos[lit as usize] = old;
                }
            }
        }
    }

    fn audit(&self, core: &Core) -> Result<(), String> {
        // every valid literal's current support is active, valid and
        // contains the literal
        for (i, &x) in self.scope.iter().enumerate() {
            for v in core.doms.iter(x) {
                let lit = self.lits.lit(x, v) as u32;
                match self.current[lit as usize] {
                    None => return Err(format!("valid literal {x}->{v} has no current support")),
                    Some(s) => {
                        if !self.slots[s as usize].active {
                            return Err("current support inactive".into());
                        }
                        if !self.tuple_valid(core, s) {
                            return Err("current support invalid".into());
                        }
                        if self.slots[s as usize].tuple[i] != v {
                            return Err("current support does not contain its literal".into());
                        }
                        if !self.slots[s as usize].sof.contains(&lit) {
                            return Err("sof missing anchored literal".into());
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstraintDef, ElemTarget};
    use crate::oracle::{brute_force_gac, DEFAULT_CAP};
    use crate::sources::ElementSource;

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

    fn make(core: &Core) -> GacSchema {
        GacSchema::new(
            element_def().scope(),
            &element_doms(),
            Box::new(ElementSource {
                array: vec![VarId(0), VarId(1), VarId(2)],
                index: VarId(3),
                result: ElemTarget::Var(VarId(4)),
            }),
            PropId(0),
        )
    }

    #[test]
    fn init_and_incremental_fixpoints_match_oracle() {
        let mut core = Core::new(&element_doms());
        let mut prop = make(&core);
        prop.on_push();
        core.doms.push_marker();
        prop.initialise(&mut core).unwrap();
        core.queue.clear();
        assert_eq!(
            core.doms.snapshot(),
            brute_force_gac(&element_def(), &element_doms(), DEFAULT_CAP).unwrap()
        );
        prop.audit(&core).unwrap();
        let root = core.doms.snapshot();

        prop.on_push();
        core.doms.push_marker();
        core.prune(VarId(3), 0).unwrap();
        let before = core.doms.snapshot();
        let mut failed = false;
        while let Some((_, lit)) = core.queue.pop_front() {
            if prop.propagate(&mut core, lit).is_err() {
                failed = true;
                break;
            }
        }
        assert!(!failed);
        assert_eq!(
            core.doms.snapshot(),
            brute_force_gac(&element_def(), &before, DEFAULT_CAP).unwrap()
        );
        prop.audit(&core).unwrap();

        prop.on_backtrack(&mut core);
        core.doms.restore_to_marker();
        core.queue.clear();
        assert_eq!(core.doms.snapshot(), root);
        prop.audit(&core).unwrap();
    }

    #[test]
    fn table_list_pos_is_restored_exactly() {
        // single-literal supports: every x1 literal is supported implicitly,
        // so pruning x0 -> 0 re-anchors them further along the list
        let scope = vec![VarId(0), VarId(1)];
        let doms = vec![vec![0, 1, 2], vec![0, 1, 2]];
        let table: Vec<Support> = vec![
            vec![(VarId(0), 0)],
            vec![(VarId(0), 1)],
            vec![(VarId(0), 2)],
        ];
        let mut core = Core::new(&doms);
        let mut prop = GacSchema::new_table(scope, &doms, table, PropId(0));
        prop.on_push();
        core.doms.push_marker();
        prop.initialise(&mut core).unwrap();
        core.queue.clear();
        let at_root: Vec<u32> = prop.list_positions().to_vec();

        prop.on_push();
        core.doms.push_marker();
        core.prune(VarId(0), 0).unwrap();
        while let Some((_, lit)) = core.queue.pop_front() {
            prop.propagate(&mut core, lit).unwrap();
        }
        assert_ne!(prop.list_positions(), at_root.as_slice(), "positions moved");
        prop.on_backtrack(&mut core);
        core.doms.restore_to_marker();
        assert_eq!(prop.list_positions(), at_root.as_slice(), "restored exactly");
    }
}
