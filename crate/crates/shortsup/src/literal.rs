//! Variables, values and the integer literal encoding.
//!
//! A literal is a variable-value pair `x ↦ v`. Literals are encoded as a
//! single dense integer so that per-literal tables can be flat arrays, and
//! both components are recoverable in constant time.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Index of a variable in a model. Dense, assigned in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub u32);

impl VarId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Domain values are small non-negative integers.
pub type Val = u32;

/// A variable-value pair encoded as one integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(pub u32);

impl Lit {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Bidirectional mapping between `(var, val)` pairs and dense literal ids.
///
/// Literal ids are laid out per variable: variable `x` with value span
/// `0..=max` occupies the contiguous block `base[x] .. base[x] + max + 1`.
/// Spans cover `0..=max(initial domain)` so that gaps in a domain still get
/// (unused) ids; this keeps both encode and decode O(1).
#[derive(Debug, Clone)]
pub struct LitMap {
    base: Vec<u32>,
    // var of each literal id, for O(1) decode
    var_of: Vec<u32>,
}

impl LitMap {
    /// Build from the value span (max value + 1) of each variable.
    pub fn new(spans: &[u32]) -> Self {
        let mut base = Vec::with_capacity(spans.len() + 1);
        let mut var_of = Vec::new();
        let mut acc = 0u32;
        for (x, &span) in spans.iter().enumerate() {
            base.push(acc);
            for _ in 0..span {
                var_of.push(x as u32);
            }
            acc += span;
        }
        base.push(acc);
        LitMap { base, var_of }
    }

    #[inline]
    pub fn encode(&self, var: VarId, val: Val) -> Lit {
        debug_assert!(val < self.base[var.idx() + 1] - self.base[var.idx()]);
        Lit(self.base[var.idx()] + val)
    }

    #[inline]
    pub fn decode(&self, lit: Lit) -> (VarId, Val) {
        let var = self.var_of[lit.idx()];
        (VarId(var), lit.0 - self.base[var as usize])
    }

    /// Total number of literal ids (sum of spans).
    #[inline]
    pub fn num_lits(&self) -> usize {
        *self.base.last().unwrap() as usize
    }

    #[inline]
    pub fn num_vars(&self) -> usize {
        self.base.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encode_decode_round_trip() {
        let map = LitMap::new(&[3, 1, 4]);
        assert_eq!(map.num_lits(), 8);
        for (x, span) in [(0u32, 3u32), (1, 1), (2, 4)] {
            for v in 0..span {
                let lit = map.encode(VarId(x), v);
                assert_eq!(map.decode(lit), (VarId(x), v));
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_random(spans in proptest::collection::vec(1u32..6, 1..8)) {
            let map = LitMap::new(&spans);
            for id in 0..map.num_lits() {
                let lit = Lit(id as u32);
                let (x, v) = map.decode(lit);
                prop_assert_eq!(map.encode(x, v), lit);
            }
        }
    }
}
