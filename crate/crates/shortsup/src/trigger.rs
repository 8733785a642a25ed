//! Per-literal trigger subscriptions.
//!
//! A propagator attaches a trigger to a literal to be woken when that literal
//! is pruned. Attach returns a handle; both attach and removal by handle are
//! O(1) (intrusive doubly-linked lists over a slab). Subscriptions are a
//! multiset: two propagators may watch the same literal independently.

use crate::literal::Lit;

const NONE: u32 = u32::MAX;

/// Identifies one propagator instance within a solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PropId(pub u32);

/// Handle to one attached trigger, used to remove it in O(1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriggerHandle(u32);

#[derive(Debug, Clone)]
struct Node {
    prev: u32,
    next: u32,
    prop: PropId,
    lit: Lit,
}

#[derive(Debug, Clone)]
pub struct TriggerTable {
    heads: Vec<u32>,
    nodes: Vec<Node>,
    free: Vec<u32>,
}

impl TriggerTable {
    pub fn new(num_lits: usize) -> Self {
        TriggerTable {
            heads: vec![NONE; num_lits],
            nodes: Vec::new(),
            free: Vec::new(),
        }
    }

    pub fn attach(&mut self, prop: PropId, lit: Lit) -> TriggerHandle {
        let idx = match self.free.pop() {
            Some(i) => i,
            None => {
                self.nodes.push(Node {
                    prev: NONE,
                    next: NONE,
                    prop,
                    lit,
                });
                self.nodes.len() as u32 - 1
            }
        };
        let head = self.heads[lit.idx()];
        self.nodes[idx as usize] = Node {
            prev: NONE,
            next: head,
            prop,
            lit,
        };
        if head != NONE {
            self.nodes[head as usize].prev = idx;
        }
        self.heads[lit.idx()] = idx;
        TriggerHandle(idx)
    }

    pub fn remove(&mut self, handle: TriggerHandle) {
        let idx = handle.0;
        let Node {
            prev, next, lit, ..
        } = self.nodes[idx as usize];
        if prev != NONE {
            self.nodes[prev as usize].next = next;
        } else {
            debug_assert_eq!(self.heads[lit.idx()], idx, "removing absent trigger");
            self.heads[lit.idx()] = next;
        }
        if next != NONE {
            self.nodes[next as usize].prev = prev;
        }
        self.free.push(idx);
    }

    /// All propagators currently subscribed to `lit`.
    pub fn subscribers(&self, lit: Lit) -> impl Iterator<Item = PropId> + '_ {
        let mut cur = self.heads[lit.idx()];
        std::iter::from_fn(move || {
            if cur == NONE {
                None
            } else {
                let node = &self.nodes[cur as usize];
                cur = node.next;
                Some(node.prop)
            }
        })
    }

    pub fn has_subscribers(&self, lit: Lit) -> bool {
        self.heads[lit.idx()] != NONE
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attach_then_remove_restores_table() {
        let mut t = TriggerTable::new(4);
        let h = t.attach(PropId(0), Lit(2));
        assert_eq!(t.subscribers(Lit(2)).collect::<Vec<_>>(), vec![PropId(0)]);
        t.remove(h);
        assert!(!t.has_subscribers(Lit(2)));
    }

    #[test]
    fn multiset_semantics() {
        // Two propagators on the same literal; one removes, other still woken.
        let mut t = TriggerTable::new(4);
        let h0 = t.attach(PropId(0), Lit(1));
        let _h1 = t.attach(PropId(1), Lit(1));
        t.remove(h0);
        assert_eq!(t.subscribers(Lit(1)).collect::<Vec<_>>(), vec![PropId(1)]);
    }

    #[test]
    fn removal_from_middle_of_list() {
        let mut t = TriggerTable::new(2);
        let _a = t.attach(PropId(0), Lit(0));
        let b = t.attach(PropId(1), Lit(0));
        let _c = t.attach(PropId(2), Lit(0));
        t.remove(b);
        let subs: Vec<_> = t.subscribers(Lit(0)).collect();
        assert_eq!(subs, vec![PropId(2), PropId(0)]);
    }
}
