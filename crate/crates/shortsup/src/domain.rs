//! Current domains with trailed removal.
//!
//! Each variable's current domain is a bitset over its initial domain,
//! supporting O(1) membership and removal. Removals are recorded on a trail;
//! restoring to a marker reproduces the exact domain state at that marker.

use crate::literal::{Val, VarId};

#[derive(Debug, Clone)]
struct VarDomain {
    // one bit per value in 0..span
    words: Vec<u64>,
    size: u32,
    span: u32,
}

impl VarDomain {
    fn new(span: u32, values: &[Val]) -> Self {
        let mut words = vec![0u64; (span as usize + 63) / 64];
        for &v in values {
            words[(v / 64) as usize] |= 1u64 << (v % 64);
        }
        VarDomain {
            words,
            size: values.len() as u32,
            span,
        }
    }

    #[inline]
    fn contains(&self, v: Val) -> bool {
        v < self.span && self.words[(v / 64) as usize] & (1u64 << (v % 64)) != 0
    }

    #[inline]
    fn remove(&mut self, v: Val) {
        self.words[(v / 64) as usize] &= !(1u64 << (v % 64));
        self.size -= 1;
    }

    #[inline]
    fn insert(&mut self, v: Val) {
        self.words[(v / 64) as usize] |= 1u64 << (v % 64);
        self.size += 1;
    }
}

/// The store of current domains for all variables, plus the deletion trail.
#[derive(Debug, Clone)]
pub struct DomainStore {
    doms: Vec<VarDomain>,
    trail: Vec<(VarId, Val)>,
    markers: Vec<usize>,
}

impl DomainStore {
    /// Build from each variable's initial domain (sorted sets of values).
    pub fn new(initial: &[Vec<Val>]) -> Self {
        let doms = initial
            .iter()
            .map(|vals| {
                let span = vals.iter().copied().max().map_or(0, |m| m + 1);
                VarDomain::new(span, vals)
            })
            .collect();
        DomainStore {
            doms,
            trail: Vec::new(),
            markers: Vec::new(),
        }
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.doms.len()
    }

    #[inline]
    pub fn contains(&self, var: VarId, val: Val) -> bool {
        self.doms[var.idx()].contains(val)
    }

    #[inline]
    pub fn size(&self, var: VarId) -> u32 {
        self.doms[var.idx()].size
    }

    /// True iff the domain is a singleton.
    #[inline]
    pub fn is_assigned(&self, var: VarId) -> bool {
        self.size(var) == 1
    }

    /// The only value of an assigned variable.
    pub fn assigned_value(&self, var: VarId) -> Option<Val> {
        if self.is_assigned(var) {
            self.iter(var).next()
        } else {
            None
        }
    }

    pub fn min(&self, var: VarId) -> Option<Val> {
        self.iter(var).next()
    }

    pub fn max(&self, var: VarId) -> Option<Val> {
        let d = &self.doms[var.idx()];
        for (w, &word) in d.words.iter().enumerate().rev() {
            if word != 0 {
                return Some(w as u32 * 64 + 63 - word.leading_zeros());
            }
        }
        None
    }

    /// Ascending iteration over the current domain.
    pub fn iter(&self, var: VarId) -> impl Iterator<Item = Val> + '_ {
        let d = &self.doms[var.idx()];
        (0..d.span).filter(move |&v| d.contains(v))
    }

    pub fn values(&self, var: VarId) -> Vec<Val> {
        self.iter(var).collect()
    }

    /// Remove `val`, recording the deletion on the trail. The value must be
    /// present (asserted in debug builds).
    #[inline]
    pub fn remove(&mut self, var: VarId, val: Val) {
        debug_assert!(self.contains(var, val), "removing absent value");
        self.doms[var.idx()].remove(val);
        self.trail.push((var, val));
    }

    /// Record a restore point.
    pub fn push_marker(&mut self) {
        self.markers.push(self.trail.len());
    }

    /// Undo every removal back to the most recent marker.
    pub fn restore_to_marker(&mut self) {
        let mark = self.markers.pop().expect("restore without marker");
        while self.trail.len() > mark {
            let (var, val) = self.trail.pop().unwrap();
            self.doms[var.idx()].insert(val);
        }
    }

    /// Snapshot of all current domains (for oracles and tests).
    pub fn snapshot(&self) -> Vec<Vec<Val>> {
        (0..self.num_vars())
            .map(|x| self.values(VarId(x as u32)))
            .collect()
    }
}
