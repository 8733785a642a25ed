//! The shared short-support bookkeeping used by SHORTGAC, HAGGISGAC and
//! HAGGISGAC-STABLE.
//!
//! One store belongs to exactly one constraint instance. It maintains, over
//! the constraint's scope:
//!
//! - `num_supports` and `supports_per_var`: counters of active supports in
//!   total and per variable. A variable `x` with `supports_per_var[x] <
//!   num_supports` is *implicitly* supported: some active support omits it.
//! - `list_per_lit`: per-literal doubly-linked lists of support cells, giving
//!   the active supports containing each literal (*explicit* support).
//! - `vars_by_support` / `vars_by_sup_inv` / `support_num_low_idx`: a
//!   partition of the scope variables by support count, ordered
//!   non-decreasing, with O(1) moves between adjacent cells.
//! - `zero_lits` / `in_zero_lits`: per-variable stacks of literals that may
//!   have no explicit support. Maintained lazily: stale entries are removed
//!   only during iteration, and the stacks are never unwound on backtracking
//!   (HAGGISGAC-STABLE re-inserts entries explicitly).
//!
//! Supports live in an arena with a free list; a reclaimed slot keeps its
//! cell capacity, which only ever grows.
//!
//! Literals here are scope-local dense indices; the store translates to
//! global literals only to attach and remove triggers.

use crate::engine::Core;
use crate::literal::{Lit, Val, VarId};
use crate::trigger::{PropId, TriggerHandle};

pub type LocalVar = u32;
pub type LocalLit = u32;
pub type SupportId = u32;

const NONE_SUP: u32 = u32::MAX;
const NONE_VAR: u32 = u32::MAX;

/// Reference to one cell: (owning support, cell index within it).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRef {
    sup: u32,
    idx: u32,
}

impl CellRef {
    const NONE: CellRef = CellRef {
        sup: NONE_SUP,
        idx: 0,
    };

    #[inline]
    fn is_none(self) -> bool {
        self.sup == NONE_SUP
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    lit: LocalLit,
    prev: CellRef,
    next: CellRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotState {
    Free,
    Active,
    /// Deleted but retained: referenced from the trail (replay modes) or the
    /// backtrack stack (stable mode).
    Deleted,
}

#[derive(Debug)]
struct Slot {
    cells: Vec<Cell>,
    original_arity: u32,
    state: SlotState,
    /// Stable mode only: prime-support reference count.
    num_prime: u32,
    /// Stable mode only: set when re-activated by backtracking, cleared on
    /// the next deletion.
    restored: bool,
}

/// Scratch sets filled by a HAGGISGAC-style deletion: literals that lost
/// their last explicit support (while their variable had no implicit one)
/// and variables that lost their last implicit support.
#[derive(Debug, Default)]
pub struct Scratch {
    pub lits_lost: Vec<LocalLit>,
    pub vars_lost: Vec<LocalVar>,
}

impl Scratch {
    pub fn clear(&mut self) {
        self.lits_lost.clear();
        self.vars_lost.clear();
    }
}

/// Stable-mode bookkeeping written during deletions: for each literal whose
/// list emptied, the support whose removal emptied it; for each variable that
/// lost implicit support, the deleted support that provided it. Entries are
/// only ever read in the same propagate call that wrote them (enforced by
/// call stamps in debug builds).
#[derive(Debug)]
pub struct StableAux {
    pub last_by_lit: Vec<SupportId>,
    pub last_by_var: Vec<SupportId>,
    stamp_by_lit: Vec<u64>,
    stamp_by_var: Vec<u64>,
    pub call: u64,
}

impl StableAux {
    pub fn new(num_lits: usize, num_vars: usize) -> Self {
        StableAux {
            last_by_lit: vec![NONE_SUP; num_lits],
            last_by_var: vec![NONE_SUP; num_vars],
            stamp_by_lit: vec![0; num_lits],
            stamp_by_var: vec![0; num_vars],
            call: 0,
        }
    }

    pub fn fresh_lit(&self, lit: LocalLit) -> SupportId {
        debug_assert_eq!(
            self.stamp_by_lit[lit as usize], self.call,
            "stale lastSupportPerLit read"
        );
        self.last_by_lit[lit as usize]
    }

    pub fn fresh_var(&self, var: LocalVar) -> SupportId {
        debug_assert_eq!(
            self.stamp_by_var[var as usize], self.call,
            "stale lastSupportPerVar read"
        );
        self.last_by_var[var as usize]
    }
}

/// Undoable store operations, replayed in reverse on backtracking: an added
/// support is deleted again, a deleted support is re-added.
#[derive(Debug, Clone, Copy)]
enum TrailOp {
    Added(SupportId),
    Deleted(SupportId),
}

/// Controls deletion-time extras.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeleteMode {
    /// Zero-literal maintenance only.
    Plain,
    /// Fill scratch sets; skip invalid literals in `lits_lost` (they need no
    /// new support and no prime labelling in this mode).
    ScratchValidOnly,
    /// Fill scratch sets including invalid literals (stable mode labels their
    /// prime supports).
    ScratchAll,
}

pub struct SupportStore {
    pub scope: Vec<VarId>,
    /// Per-scope-variable base into the local literal space.
    local_base: Vec<u32>,
    /// Scope-local index of each model variable, NONE_VAR when out of scope.
    local_of_global: Vec<u32>,
    global_lit_of_local: Vec<Lit>,
    /// Which local literal slots denote values of the initial domain.
    in_initial: Vec<bool>,
    /// Number of scope literals (valid slots), the `z` of the storage bound.
    pub num_scope_lits: u32,

    pub num_supports: u32,
    pub supports_per_var: Vec<u32>,
    list_per_lit: Vec<CellRef>,
    pub vars_by_support: Vec<LocalVar>,
    pub vars_by_sup_inv: Vec<u32>,
    pub support_num_low_idx: Vec<u32>,
    zero_lits: Vec<Vec<LocalLit>>,
    in_zero_lits: Vec<bool>,
    trigger_handles: Vec<Option<TriggerHandle>>,

    slots: Vec<Slot>,
    free: Vec<SupportId>,
    stored: u64,

    prop: PropId,
    /// Full-length fast path: supports whose original arity equals the
    /// constraint arity skip all counter and partition updates.
    pub fast_path: bool,
    /// When false (stable mode) nothing is recorded for replay.
    trailing: bool,
    trail: Vec<TrailOp>,
    markers: Vec<usize>,
}

impl SupportStore {
    pub fn new(
        core: &Core,
        prop: PropId,
        scope: &[VarId],
        fast_path: bool,
        trailing: bool,
    ) -> Self {
        let k = scope.len();
        let mut local_base = Vec::with_capacity(k + 1);
        let mut global_lit_of_local = Vec::new();
        let mut in_initial = Vec::new();
        let mut acc = 0u32;
        let mut z = 0u32;
        for &x in scope {
            local_base.push(acc);
            let lo = core.litmap.encode(x, 0).0;
            let hi = if x.idx() + 1 < core.litmap.num_vars() {
                core.litmap.encode(VarId(x.0 + 1), 0).0
            } else {
                core.litmap.num_lits() as u32
            };
            let span_len = hi - lo;
            for v in 0..span_len {
                global_lit_of_local.push(core.litmap.encode(x, v));
                let valid = core.doms.contains(x, v);
                in_initial.push(valid);
                if valid {
                    z += 1;
                }
            }
            acc += span_len;
        }
        local_base.push(acc);
        let num_lits = acc as usize;

        let mut local_of_global = vec![NONE_VAR; core.litmap.num_vars()];
        for (i, &x) in scope.iter().enumerate() {
            local_of_global[x.idx()] = i as u32;
        }

        let mut zero_lits: Vec<Vec<LocalLit>> = vec![Vec::new(); k];
        let mut in_zero_lits = vec![false; num_lits];
        for i in 0..k {
            for lit in local_base[i]..local_base[i + 1] {
                if in_initial[lit as usize] {
                    zero_lits[i].push(lit);
                    in_zero_lits[lit as usize] = true;
                }
            }
        }

        let mut snli = vec![k as u32; z as usize + 2];
        snli[0] = 0;

        SupportStore {
            scope: scope.to_vec(),
            local_base,
            local_of_global,
            global_lit_of_local,
            in_initial,
            num_scope_lits: z,
            num_supports: 0,
            supports_per_var: vec![0; k],
            list_per_lit: vec![CellRef::NONE; num_lits],
            vars_by_support: (0..k as u32).collect(),
            vars_by_sup_inv: (0..k as u32).collect(),
            support_num_low_idx: snli,
            zero_lits,
            in_zero_lits,
            trigger_handles: vec![None; num_lits],
            slots: Vec::new(),
            free: Vec::new(),
            stored: 0,
            prop,
            fast_path,
            trailing,
            trail: Vec::new(),
            markers: Vec::new(),
        }
    }

    #[inline]
    pub fn arity(&self) -> u32 {
        self.scope.len() as u32
    }

    #[inline]
    pub fn local_lit(&self, var: LocalVar, val: Val) -> LocalLit {
        self.local_base[var as usize] + val
    }

    #[inline]
    pub fn decode_local(&self, lit: LocalLit) -> (LocalVar, Val) {
        let mut var = match self.local_base.binary_search(&lit) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        // empty spans share a base value; step back to the variable that
        // actually owns this slot
        while self.local_base[var + 1] <= lit {
            var += 1;
        }
        while self.local_base[var] > lit {
            var -= 1;
        }
        (var as u32, lit - self.local_base[var])
    }

    #[inline]
    pub fn local_var(&self, var: VarId) -> Option<LocalVar> {
        let v = self.local_of_global[var.idx()];
        (v != NONE_VAR).then_some(v)
    }

    #[inline]
    pub fn global_var(&self, var: LocalVar) -> VarId {
        self.scope[var as usize]
    }

    #[inline]
    pub fn global_lit(&self, lit: LocalLit) -> Lit {
        self.global_lit_of_local[lit as usize]
    }

    #[inline]
    pub fn lit_valid(&self, core: &Core, lit: LocalLit) -> bool {
        let (var, val) = self.decode_local(lit);
        core.doms.contains(self.global_var(var), val)
    }

    #[inline]
    pub fn list_empty(&self, lit: LocalLit) -> bool {
        self.list_per_lit[lit as usize].is_none()
    }

    /// Owner of the first cell of the literal's support list.
    pub fn first_support_of(&self, lit: LocalLit) -> Option<SupportId> {
        let head = self.list_per_lit[lit as usize];
        (!head.is_none()).then_some(head.sup)
    }

    pub fn slot_state(&self, sup: SupportId) -> SlotState {
        self.slots[sup as usize].state
    }

    pub fn original_arity(&self, sup: SupportId) -> u32 {
        self.slots[sup as usize].original_arity
    }

    pub fn num_prime(&self, sup: SupportId) -> u32 {
        self.slots[sup as usize].num_prime
    }

    pub fn dec_num_prime(&mut self, sup: SupportId) -> u32 {
        let slot = &mut self.slots[sup as usize];
        debug_assert!(slot.num_prime > 0);
        slot.num_prime -= 1;
        slot.num_prime
    }

    pub fn bump_num_prime(&mut self, sup: SupportId) {
        self.slots[sup as usize].num_prime += 1;
    }

    pub fn set_num_prime_zero(&mut self, sup: SupportId) {
        self.slots[sup as usize].num_prime = 0;
    }

    /// Size of the local literal slot space (spans, including slots for
    /// values outside the initial domains).
    pub fn num_lit_slots(&self) -> usize {
        self.list_per_lit.len()
    }

    pub fn restored_flag(&self, sup: SupportId) -> bool {
        self.slots[sup as usize].restored
    }

    pub fn mark_restored(&mut self, sup: SupportId) {
        self.slots[sup as usize].restored = true;
    }

    /// Literals of a support, in stored (deletion) order.
    pub fn support_lits(&self, sup: SupportId) -> Vec<LocalLit> {
        self.slots[sup as usize].cells.iter().map(|c| c.lit).collect()
    }

    pub fn support_pairs(&self, sup: SupportId) -> Vec<(VarId, Val)> {
        self.support_lits(sup)
            .iter()
            .map(|&l| {
                let (x, v) = self.decode_local(l);
                (self.global_var(x), v)
            })
            .collect()
    }

    /// Whether the full-length fast path applies to this support.
    #[inline]
    fn is_full_length(&self, sup: SupportId) -> bool {
        self.fast_path && self.slots[sup as usize].original_arity == self.arity()
    }

    pub fn stored_count(&self) -> u64 {
        self.stored
    }

    // ----- allocation ------------------------------------------------------

    /// Take a support object from the free list (or allocate a fresh one) and
    /// fill its cells. The object is not yet linked anywhere.
    pub fn allocate(
        &mut self,
        core: &mut Core,
        lits: &[(LocalVar, Val)],
        original_arity: u32,
    ) -> SupportId {
        let id = match self.free.pop() {
            Some(id) => id,
            None => {
                self.slots.push(Slot {
                    cells: Vec::new(),
                    original_arity: 0,
                    state: SlotState::Free,
                    num_prime: 0,
                    restored: false,
                });
                self.slots.len() as u32 - 1
            }
        };
        let base = self.local_base.clone();
        let slot = &mut self.slots[id as usize];
        debug_assert_eq!(slot.state, SlotState::Free);
        slot.cells.clear();
        for &(var, val) in lits {
            slot.cells.push(Cell {
                lit: base[var as usize] + val,
                prev: CellRef::NONE,
                next: CellRef::NONE,
            });
        }
        slot.original_arity = original_arity;
        slot.num_prime = 0;
        slot.restored = false;
        slot.state = SlotState::Deleted; // allocated but not yet active
        self.stored += 1;
        core.gauge.add(1);
        id
    }

    /// Return an inactive support to the pool.
    pub fn reclaim(&mut self, core: &mut Core, sup: SupportId) {
        let slot = &mut self.slots[sup as usize];
        debug_assert_ne!(slot.state, SlotState::Active, "reclaiming an active support");
        debug_assert_ne!(slot.state, SlotState::Free, "double reclaim");
        debug_assert_eq!(slot.num_prime, 0);
        slot.state = SlotState::Free;
        self.free.push(sup);
        self.stored -= 1;
        core.gauge.sub(1);
    }

    // ----- triggers --------------------------------------------------------

    fn attach_trigger(&mut self, core: &mut Core, lit: LocalLit) {
        debug_assert!(self.trigger_handles[lit as usize].is_none());
        let handle = core
            .triggers
            .attach(self.prop, self.global_lit_of_local[lit as usize]);
        self.trigger_handles[lit as usize] = Some(handle);
    }

    fn remove_trigger(&mut self, core: &mut Core, lit: LocalLit) {
        let handle = self.trigger_handles[lit as usize]
            .take()
            .expect("removing absent trigger");
        core.triggers.remove(handle);
    }

    // ----- partition -------------------------------------------------------

    fn swap_into_position(&mut self, var: LocalVar, pos: u32) {
        let cur = self.vars_by_sup_inv[var as usize];
        let other = self.vars_by_support[pos as usize];
        self.vars_by_support.swap(cur as usize, pos as usize);
        self.vars_by_sup_inv[var as usize] = pos;
        self.vars_by_sup_inv[other as usize] = cur;
    }

    /// Move `var` one cell up after its support count was incremented: swap
    /// with the element at the top boundary of its old cell, then move the
    /// boundary down over it.
    pub fn partition_swap_up(&mut self, var: LocalVar) {
        let sx = self.supports_per_var[var as usize];
        let cell_end = self.support_num_low_idx[sx as usize] - 1;
        self.swap_into_position(var, cell_end);
        self.support_num_low_idx[sx as usize] -= 1;
    }

    /// Move `var` one cell down; call before its support count is
    /// decremented: swap with the element at the bottom boundary of its cell,
    /// then move the boundary up over it.
    pub fn partition_swap_down(&mut self, var: LocalVar) {
        let sx = self.supports_per_var[var as usize];
        let cell_start = self.support_num_low_idx[sx as usize];
        self.swap_into_position(var, cell_start);
        self.support_num_low_idx[sx as usize] += 1;
    }

    // ----- zero literals ---------------------------------------------------

    pub fn zero_lits_len(&self, var: LocalVar) -> usize {
        self.zero_lits[var as usize].len()
    }

    pub fn zero_lits_get(&self, var: LocalVar, i: usize) -> LocalLit {
        self.zero_lits[var as usize][i]
    }

    pub fn in_zero_lits(&self, lit: LocalLit) -> bool {
        self.in_zero_lits[lit as usize]
    }

    /// Remove the entry at position `i` by swapping it to the top and
    /// popping.
    pub fn zero_lits_remove_at(&mut self, var: LocalVar, i: usize) {
        let stack = &mut self.zero_lits[var as usize];
        let lit = stack[i];
        let last = stack.len() - 1;
        stack.swap(i, last);
        stack.pop();
        self.in_zero_lits[lit as usize] = false;
    }

    pub fn zero_lits_push(&mut self, lit: LocalLit) {
        if !self.in_zero_lits[lit as usize] {
            self.in_zero_lits[lit as usize] = true;
            let (var, _) = self.decode_local(lit);
            self.zero_lits[var as usize].push(lit);
        }
    }

    /// Visit the literals of `var` that truly have no explicit support,
    /// lazily dropping stale entries.
    pub fn zero_lits_iterate(&mut self, var: LocalVar, mut f: impl FnMut(LocalLit)) {
        let mut i = self.zero_lits[var as usize].len();
        while i > 0 {
            i -= 1;
            let lit = self.zero_lits[var as usize][i];
            if !self.list_empty(lit) {
                self.zero_lits_remove_at(var, i);
            } else {
                f(lit);
            }
        }
    }

    // ----- add / delete ----------------------------------------------------

    /// Link an allocated support into the store: cells into their literal
    /// lists (attaching triggers on lists that were empty) and, unless the
    /// full-length fast path applies, counter and partition updates.
    pub fn add_support(&mut self, core: &mut Core, sup: SupportId) {
        debug_assert_ne!(self.slots[sup as usize].state, SlotState::Active);
        let full = self.is_full_length(sup);
        let ncells = self.slots[sup as usize].cells.len();
        for i in 0..ncells {
            let lit = self.slots[sup as usize].cells[i].lit;
            debug_assert!(
                self.in_initial[lit as usize],
                "support contains a literal outside the initial domain"
            );
            let head = self.list_per_lit[lit as usize];
            if head.is_none() {
                self.attach_trigger(core, lit);
            }
            let me = CellRef { sup, idx: i as u32 };
            self.slots[sup as usize].cells[i].prev = CellRef::NONE;
            self.slots[sup as usize].cells[i].next = head;
            if !head.is_none() {
                self.slots[head.sup as usize].cells[head.idx as usize].prev = me;
            }
            self.list_per_lit[lit as usize] = me;
            if !full {
                let (var, _) = self.decode_local(lit);
                self.supports_per_var[var as usize] += 1;
                self.partition_swap_up(var);
            }
        }
        if !full {
            self.num_supports += 1;
        }
        self.slots[sup as usize].state = SlotState::Active;
        if self.trailing {
            self.trail.push(TrailOp::Added(sup));
        }
    }

    fn unlink_cell(&mut self, sup: SupportId, idx: usize) -> LocalLit {
        let Cell { lit, prev, next } = self.slots[sup as usize].cells[idx];
        if prev.is_none() {
            self.list_per_lit[lit as usize] = next;
        } else {
            self.slots[prev.sup as usize].cells[prev.idx as usize].next = next;
        }
        if !next.is_none() {
            self.slots[next.sup as usize].cells[next.idx as usize].prev = prev;
        }
        lit
    }

    /// Unlink an active support. In the scratch modes the deletion also
    /// detects which literals lost their last explicit support and, via the
    /// partition compaction of the swaps, which variables lost their last
    /// implicit support, appending them to `scratch` (and recording the
    /// deleted support in `stable` when given).
    pub fn delete_support(
        &mut self,
        core: &mut Core,
        sup: SupportId,
        mode: DeleteMode,
        mut scratch: Option<&mut Scratch>,
        mut stable: Option<&mut StableAux>,
    ) {
        debug_assert_eq!(self.slots[sup as usize].state, SlotState::Active);
        let full = self.is_full_length(sup);
        let audit_pre = if core.audit && !full {
            Some(self.vars_at_num_supports())
        } else {
            None
        };
        let old_index = self.support_num_low_idx[self.num_supports as usize];
        if let Some(st) = stable.as_deref_mut() {
            self.slots[sup as usize].num_prime = 0;
            st.call += 1;
        }
        self.slots[sup as usize].restored = false;
        let ncells = self.slots[sup as usize].cells.len();
        for i in 0..ncells {
            let lit = self.unlink_cell(sup, i);
            if self.list_empty(lit) {
                self.remove_trigger(core, lit);
                self.zero_lits_push(lit);
                // The scratch insertion must not depend on zero_lits
                // membership: a stale entry (left rather than removed when a
                // repair found an explicit support) would otherwise mask the
                // loss. A list empties at most once per propagation call, so
                // no duplicates arise.
                let (var, _) = self.decode_local(lit);
                if mode != DeleteMode::Plain
                    && self.supports_per_var[var as usize] == self.num_supports
                {
                    let keep = mode == DeleteMode::ScratchAll || self.lit_valid(core, lit);
                    if keep {
                        if let Some(sc) = scratch.as_deref_mut() {
                            sc.lits_lost.push(lit);
                        }
                        if let Some(st) = stable.as_deref_mut() {
                            st.last_by_lit[lit as usize] = sup;
                            st.stamp_by_lit[lit as usize] = st.call;
                        }
                    }
                }
            }
            if !full {
                let (var, _) = self.decode_local(lit);
                self.partition_swap_down(var);
                self.supports_per_var[var as usize] -= 1;
            }
        }
        if !full {
            self.num_supports -= 1;
            if mode != DeleteMode::Plain {
                let lo = self.support_num_low_idx[self.num_supports as usize];
                for i in lo..old_index {
                    let var = self.vars_by_support[i as usize];
                    if let Some(sc) = scratch.as_deref_mut() {
                        sc.vars_lost.push(var);
                    }
                    if let Some(st) = stable.as_deref_mut() {
                        st.last_by_var[var as usize] = sup;
                        st.stamp_by_var[var as usize] = st.call;
                    }
                }
                if let Some(pre) = audit_pre {
                    self.audit_lost_implicit_region(&pre, lo, old_index, sup);
                }
            }
        }
        self.slots[sup as usize].state = SlotState::Deleted;
        if self.trailing {
            self.trail.push(TrailOp::Deleted(sup));
        }
    }

    /// Variables currently at `supports_per_var = num_supports` (no implicit
    /// support), recomputed directly. Used by the deletion-region audit.
    fn vars_at_num_supports(&self) -> Vec<LocalVar> {
        (0..self.arity())
            .filter(|&x| self.supports_per_var[x as usize] == self.num_supports)
            .collect()
    }

    fn audit_lost_implicit_region(&self, pre: &[LocalVar], lo: u32, hi: u32, sup: SupportId) {
        let post = self.vars_at_num_supports();
        let mut expected: Vec<LocalVar> = post
            .iter()
            .copied()
            .filter(|x| !pre.contains(x))
            .collect();
        let mut region: Vec<LocalVar> = (lo..hi)
            .map(|i| self.vars_by_support[i as usize])
            .collect();
        expected.sort_unstable();
        region.sort_unstable();
        assert_eq!(
            region, expected,
            "lost-implicit region mismatch deleting support {sup}: \
             reported {region:?}, recomputed {expected:?}"
        );
        // each region variable has exactly the new num_supports explicit
        // supports, i.e. one fewer than the pre-deletion total, before and
        // after the deletion
        for &x in &region {
            assert_eq!(
                self.supports_per_var[x as usize], self.num_supports,
                "region variable {x} does not sit at the new support count"
            );
        }
    }

    // ----- trail -----------------------------------------------------------

    pub fn push_marker(&mut self) {
        self.markers.push(self.trail.len());
    }

    /// Reverse the support additions and deletions of the current node: an
    /// added support is deleted (and reclaimed), a deleted one re-added.
    pub fn replay_to_marker(&mut self, core: &mut Core) {
        let mark = self.markers.pop().expect("backtrack without marker");
        debug_assert!(self.trailing);
        self.trailing = false;
        while self.trail.len() > mark {
            match self.trail.pop().unwrap() {
                TrailOp::Added(sup) => {
                    self.delete_support(core, sup, DeleteMode::Plain, None, None);
                    self.reclaim(core, sup);
                }
                TrailOp::Deleted(sup) => {
                    self.add_support(core, sup);
                }
            }
        }
        self.trailing = true;
    }

    // ----- audits ----------------------------------------------------------

    /// Full recomputation of every index invariant from the ground truth of
    /// the arena. `stable_mode` relaxes the zero-literal coverage to valid
    /// literals (stable backtracking removes invalid ones deliberately) and
    /// additionally checks the 2z storage bound.
    pub fn audit(&self, core: &Core, stable_mode: bool) -> Result<(), String> {
        let k = self.arity() as usize;
        let mut counts = vec![0u32; k];
        let mut active_counted = 0u32;
        let mut member: Vec<Vec<SupportId>> = vec![Vec::new(); self.list_per_lit.len()];
        for (id, slot) in self.slots.iter().enumerate() {
            if slot.state != SlotState::Active {
                continue;
            }
            let full = self.fast_path && slot.original_arity == self.arity();
            if !full {
                active_counted += 1;
            }
            for c in &slot.cells {
                member[c.lit as usize].push(id as u32);
                if !full {
                    let (var, _) = self.decode_local(c.lit);
                    counts[var as usize] += 1;
                }
            }
        }
        if active_counted != self.num_supports {
            return Err(format!(
                "num_supports {} but {} counted active supports",
                self.num_supports, active_counted
            ));
        }
        if counts != self.supports_per_var {
            return Err(format!(
                "supports_per_var {:?} but recomputed {:?}",
                self.supports_per_var, counts
            ));
        }
        for lit in 0..self.list_per_lit.len() {
            let mut walked = Vec::new();
            let mut cur = self.list_per_lit[lit];
            while !cur.is_none() {
                walked.push(cur.sup);
                let cell = self.slots[cur.sup as usize].cells[cur.idx as usize];
                if cell.lit as usize != lit {
                    return Err(format!("cell in list {lit} claims literal {}", cell.lit));
                }
                cur = cell.next;
            }
            let mut expect = member[lit].clone();
            walked.sort_unstable();
            expect.sort_unstable();
            if walked != expect {
                return Err(format!(
                    "list for literal {lit} holds {walked:?}, arena says {expect:?}"
                ));
            }
            let has_list = !self.list_per_lit[lit].is_none();
            if self.trigger_handles[lit].is_some() != has_list {
                return Err(format!(
                    "trigger presence for literal {lit} disagrees with list emptiness"
                ));
            }
        }
        let mut seen = vec![false; k];
        for (pos, &x) in self.vars_by_support.iter().enumerate() {
            if seen[x as usize] {
                return Err("vars_by_support is not a permutation".into());
            }
            seen[x as usize] = true;
            if self.vars_by_sup_inv[x as usize] != pos as u32 {
                return Err("vars_by_sup_inv out of sync".into());
            }
        }
        for w in self.vars_by_support.windows(2) {
            if self.supports_per_var[w[0] as usize] > self.supports_per_var[w[1] as usize] {
                return Err("vars_by_support not sorted by support count".into());
            }
        }
        for i in 0..self.support_num_low_idx.len() {
            let expect = self
                .vars_by_support
                .iter()
                .take_while(|&&x| (self.supports_per_var[x as usize] as usize) < i)
                .count() as u32;
            if self.support_num_low_idx[i] != expect {
                return Err(format!(
                    "support_num_low_idx[{i}] = {}, expected {expect}",
                    self.support_num_low_idx[i]
                ));
            }
        }
        for lit in 0..self.list_per_lit.len() {
            if !self.in_initial[lit] {
                continue;
            }
            let (var, _) = self.decode_local(lit as u32);
            let in_stack = self.zero_lits[var as usize].contains(&(lit as u32));
            if in_stack != self.in_zero_lits[lit] {
                return Err(format!("in_zero_lits flag wrong for literal {lit}"));
            }
            if self.list_per_lit[lit].is_none() {
                let exempt = stable_mode && !self.lit_valid(core, lit as u32);
                if !in_stack && !exempt {
                    return Err(format!(
                        "literal {lit} has an empty list but is missing from zero_lits"
                    ));
                }
            }
        }
        let non_free = self
            .slots
            .iter()
            .filter(|s| s.state != SlotState::Free)
            .count() as u64;
        if non_free != self.stored {
            return Err(format!(
                "stored count {} but {} non-free slots",
                self.stored, non_free
            ));
        }
        if stable_mode && self.stored > 2 * self.num_scope_lits as u64 {
            return Err(format!(
                "stored supports {} exceed the 2z bound (z = {})",
                self.stored, self.num_scope_lits
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn element_core() -> Core {
        // x0,x1,x2,y in {0..2}, z in {0..3}
        Core::new(&[
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2, 3],
        ])
    }

    fn scope5() -> Vec<VarId> {
        (0..5).map(VarId).collect()
    }

    fn add(store: &mut SupportStore, core: &mut Core, pairs: &[(u32, Val)]) -> SupportId {
        let id = store.allocate(core, pairs, pairs.len() as u32);
        store.add_support(core, id);
        id
    }

    /// The worked element example: data structure states after adding
    /// supports A then B, then the final A-D table.
    #[test]
    fn element_tables() {
        let mut core = element_core();
        let mut store = SupportStore::new(&core, PropId(0), &scope5(), false, true);
        assert_eq!(store.num_scope_lits, 16);

        // A = {x0 -> 1, y -> 0, z -> 1}
        let _a = add(&mut store, &mut core, &[(0, 1), (3, 0), (4, 1)]);
        assert_eq!(store.num_supports, 1);
        assert_eq!(store.supports_per_var, vec![1, 0, 0, 1, 1]);

        // B = {x1 -> 0, y -> 1, z -> 0}
        let _b = add(&mut store, &mut core, &[(1, 0), (3, 1), (4, 0)]);
        assert_eq!(store.num_supports, 2);
        assert_eq!(store.supports_per_var, vec![1, 1, 0, 2, 2]);

        // C = {x0 -> 2, y -> 0, z -> 2}, D = {x2 -> 0, y -> 2, z -> 0}
        let _c = add(&mut store, &mut core, &[(0, 2), (3, 0), (4, 2)]);
        let d = add(&mut store, &mut core, &[(2, 0), (3, 2), (4, 0)]);
        assert_eq!(store.num_supports, 4);
        assert_eq!(store.supports_per_var, vec![2, 1, 1, 4, 4]);
        store.audit(&core, false).unwrap();

        // deleting D: the lists of x2->0 and y->2 empty; z->0 keeps B
        store.delete_support(&mut core, d, DeleteMode::Plain, None, None);
        assert_eq!(store.num_supports, 3);
        assert_eq!(store.supports_per_var, vec![2, 1, 0, 3, 3]);
        let x2_0 = store.local_lit(2, 0);
        let y_2 = store.local_lit(3, 2);
        let z_0 = store.local_lit(4, 0);
        assert!(store.in_zero_lits(x2_0));
        assert!(store.in_zero_lits(y_2));
        assert!(!store.list_empty(z_0), "z->0 still has B");
        store.audit(&core, false).unwrap();

        // triggers: x0->1 attached (A active), so pruning it wakes us
        let x0_1 = store.global_lit(store.local_lit(0, 1));
        assert!(core.triggers.has_subscribers(x0_1));
    }

    #[test]
    fn add_then_delete_restores_counts() {
        let mut core = element_core();
        let mut store = SupportStore::new(&core, PropId(0), &scope5(), false, true);
        let _a = add(&mut store, &mut core, &[(0, 1), (3, 0), (4, 1)]);
        let before_counts = store.supports_per_var.clone();
        let b = add(&mut store, &mut core, &[(1, 0), (3, 1), (4, 0)]);
        store.delete_support(&mut core, b, DeleteMode::Plain, None, None);
        assert_eq!(store.supports_per_var, before_counts);
        assert_eq!(store.num_supports, 1);
        store.audit(&core, false).unwrap();
    }

    #[test]
    fn empty_support_changes_only_num_supports() {
        let mut core = element_core();
        let mut store = SupportStore::new(&core, PropId(0), &scope5(), false, true);
        let e = store.allocate(&mut core, &[], 0);
        store.add_support(&mut core, e);
        assert_eq!(store.num_supports, 1);
        assert_eq!(store.supports_per_var, vec![0; 5]);
        store.delete_support(&mut core, e, DeleteMode::Plain, None, None);
        assert_eq!(store.num_supports, 0);
        store.audit(&core, false).unwrap();
    }

    #[test]
    fn free_list_reuse_keeps_capacity() {
        let mut core = element_core();
        let mut store = SupportStore::new(&core, PropId(0), &scope5(), false, true);
        let a = store.allocate(&mut core, &[(0, 0), (3, 0), (4, 0)], 3);
        let cap = {
            let c = store.slots[a as usize].cells.capacity();
            assert!(c >= 3);
            c
        };
        store.reclaim(&mut core, a);
        let b = store.allocate(&mut core, &[(0, 1), (3, 1)], 2);
        assert_eq!(a, b, "pooled object reused");
        assert!(store.slots[b as usize].cells.capacity() >= cap);
        // pool now empty: next allocation is fresh
        let c = store.allocate(&mut core, &[(1, 0)], 1);
        assert_ne!(b, c);
    }

    #[test]
    fn zero_lits_lazy_cleanup() {
        let mut core = element_core();
        let mut store = SupportStore::new(&core, PropId(0), &scope5(), false, true);
        let mut seen = Vec::new();
        store.zero_lits_iterate(0, |l| seen.push(l));
        assert_eq!(seen.len(), 3);
        add(&mut store, &mut core, &[(0, 1), (3, 0), (4, 1)]);
        let mut seen = Vec::new();
        store.zero_lits_iterate(0, |l| seen.push(l));
        let x0_1 = store.local_lit(0, 1);
        assert!(!seen.contains(&x0_1));
        assert_eq!(store.zero_lits_len(0), 2, "stale entry dropped");
        while store.zero_lits_len(0) > 0 {
            store.zero_lits_remove_at(0, store.zero_lits_len(0) - 1);
        }
        let mut n = 0;
        store.zero_lits_iterate(0, |_| n += 1);
        assert_eq!(n, 0);
    }

    #[test]
    fn partition_self_swap_and_double_move() {
        let mut core = element_core();
        let mut store = SupportStore::new(&core, PropId(0), &scope5(), false, true);
        // single support on x0 only: x0 alone in its new cell, self-swap
        let s = store.allocate(&mut core, &[(0, 0)], 1);
        store.add_support(&mut core, s);
        store.audit(&core, false).unwrap();
        // a second increment gives a net two-cell move
        let t = store.allocate(&mut core, &[(0, 1)], 1);
        store.add_support(&mut core, t);
        assert_eq!(store.supports_per_var[0], 2);
        store.audit(&core, false).unwrap();
        assert_eq!(store.vars_by_sup_inv[0], 4, "x0 sits at the top of the order");
    }

    /// The eleven-variable deletion walkthrough: deleting a support over
    /// {x1,x2,x3,z1,z2,z3} (cells in the order x2,x3,z2,x1,z3,z1) from the
    /// state where the w's have 6 supports, x/y's 7 and z's 8 compacts
    /// exactly the y variables into the lost-implicit region [5, 8).
    #[test]
    fn eleven_variable_deletion_trace() {
        let names = ["w1", "w2", "y1", "x1", "x2", "y2", "y3", "x3", "z1", "z2", "z3"];
        let doms: Vec<Vec<Val>> = (0..11).map(|_| (0..9).collect()).collect();
        let mut core = Core::new(&doms);
        let scope: Vec<VarId> = (0..11).map(VarId).collect();
        let mut store = SupportStore::new(&core, PropId(0), &scope, false, true);

        // Build 8 active supports giving counts w=6, x/y=7, z=8, where the
        // deletion target contributes one to each of x1,x2,x3,z1,z2,z3.
        // Background supports use distinct values per variable so cell lists
        // stay disjoint.
        let counts = [6u32, 6, 7, 7, 7, 7, 7, 7, 8, 8, 8];
        let target_vars = [4u32, 7, 9, 3, 10, 8]; // x2,x3,z2,x1,z3,z1
        let mut background: Vec<Vec<(u32, Val)>> = vec![Vec::new(); 7];
        for (x, &c) in counts.iter().enumerate() {
            let in_target = target_vars.contains(&(x as u32));
            let need = (c - u32::from(in_target)) as usize;
            assert!(need <= 7);
            for (s, bg) in background.iter_mut().enumerate().take(need) {
                bg.push((x as u32, (s + 1) as Val));
            }
        }
        for pairs in &background {
            let id = store.allocate(&mut core, pairs, pairs.len() as u32);
            store.add_support(&mut core, id);
        }
        let target_pairs: Vec<(u32, Val)> = target_vars.iter().map(|&x| (x, 0)).collect();
        let target = store.allocate(&mut core, &target_pairs, 6);
        store.add_support(&mut core, target);
        assert_eq!(store.num_supports, 8);
        assert_eq!(store.supports_per_var.as_slice(), &counts);
        // reorder within cells to the documented starting permutation
        force_layout(&mut store, &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        store.audit(&core, false).unwrap();

        let mut scratch = Scratch::default();
        core.audit = true;
        store.delete_support(
            &mut core,
            target,
            DeleteMode::ScratchAll,
            Some(&mut scratch),
            None,
        );
        assert_eq!(store.num_supports, 7);
        let final_names: Vec<&str> = store
            .vars_by_support
            .iter()
            .map(|&x| names[x as usize])
            .collect();
        assert_eq!(
            final_names,
            vec!["w1", "w2", "x2", "x3", "x1", "y2", "y3", "y1", "z2", "z3", "z1"]
        );
        let mut lost: Vec<&str> = scratch
            .vars_lost
            .iter()
            .map(|&x| names[x as usize])
            .collect();
        lost.sort_unstable();
        assert_eq!(lost, vec!["y1", "y2", "y3"]);
        assert_eq!(store.support_num_low_idx[7], 5);
        store.audit(&core, false).unwrap();
    }

    /// Rearrange vars_by_support within cells (fixture setup only).
    fn force_layout(store: &mut SupportStore, layout: &[u32]) {
        for (pos, &x) in layout.iter().enumerate() {
            let cur = store.vars_by_sup_inv[x as usize] as usize;
            if cur != pos {
                let other = store.vars_by_support[pos];
                assert_eq!(
                    store.supports_per_var[x as usize],
                    store.supports_per_var[other as usize],
                    "layout must respect cells"
                );
                store.vars_by_support.swap(cur, pos);
                store.vars_by_sup_inv[x as usize] = pos as u32;
                store.vars_by_sup_inv[other as usize] = cur as u32;
            }
        }
    }

    #[test]
    fn replay_restores_store() {
        let mut core = element_core();
        let mut store = SupportStore::new(&core, PropId(0), &scope5(), false, true);
        let a = add(&mut store, &mut core, &[(0, 1), (3, 0), (4, 1)]);
        store.push_marker();
        core.doms.push_marker();
        let b = add(&mut store, &mut core, &[(1, 0), (3, 1), (4, 0)]);
        store.delete_support(&mut core, a, DeleteMode::Plain, None, None);
        store.replay_to_marker(&mut core);
        core.doms.restore_to_marker();
        assert_eq!(store.slot_state(a), SlotState::Active);
        assert_eq!(store.slot_state(b), SlotState::Free);
        assert_eq!(store.num_supports, 1);
        assert_eq!(store.supports_per_var, vec![1, 0, 0, 1, 1]);
        store.audit(&core, false).unwrap();
    }

    #[test]
    fn full_length_fast_path_skips_counters() {
        let mut core = element_core();
        let mut store = SupportStore::new(&core, PropId(0), &scope5(), true, true);
        // a full-length support (original arity 5): lists maintained,
        // counters untouched
        let pairs: Vec<(u32, Val)> = vec![(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)];
        let s = store.allocate(&mut core, &pairs, 5);
        store.add_support(&mut core, s);
        assert_eq!(store.num_supports, 0);
        assert_eq!(store.supports_per_var, vec![0; 5]);
        assert!(!store.list_empty(store.local_lit(0, 0)));
        // a stripped full-length support (3 cells, original arity 5) also
        // takes the fast path
        let t = store.allocate(&mut core, &[(0, 1), (3, 1), (4, 1)], 5);
        store.add_support(&mut core, t);
        assert_eq!(store.num_supports, 0);
        // a strict short support takes the normal path
        let u = store.allocate(&mut core, &[(0, 2), (3, 2)], 2);
        store.add_support(&mut core, u);
        assert_eq!(store.num_supports, 1);
        assert_eq!(store.supports_per_var, vec![1, 0, 0, 1, 0]);
        store.audit(&core, false).unwrap();
        let mut scratch = Scratch::default();
        store.delete_support(&mut core, s, DeleteMode::ScratchValidOnly, Some(&mut scratch), None);
        assert_eq!(store.num_supports, 1, "fast-path delete leaves counters");
        store.audit(&core, false).unwrap();
    }
}
