//! Direct GAC propagators, one algorithm per constraint kind: matching-based
//! filtering for all-different, counting for boolean sums, bounds reasoning
//! for the non-overlap disjunction, a pointer-free lex filter, and value-wise
//! support scans for element, linear-aux, and table constraints.
//!
//! These are model plumbing and cross-checks, re-establishing GAC from the
//! current domains on every wake-up. They keep no backtrackable state.

use crate::engine::{Core, PropResult, Propagator};
use crate::literal::{Lit, Val, VarId};
use crate::model::ConstraintDef;
use crate::trigger::PropId;

pub struct BuiltinGac {
    def: ConstraintDef,
    scope: Vec<VarId>,
    prop: PropId,
    // persistent warm-start matching for all-different
    matching: Vec<Option<Val>>,
}

impl BuiltinGac {
    pub fn new(def: ConstraintDef, prop: PropId) -> Self {
        let scope = def.scope();
        let n = scope.len();
        BuiltinGac {
            def,
            scope,
            prop,
            matching: vec![None; n],
        }
    }

    fn fixpoint(&mut self, core: &mut Core) -> PropResult {
        loop {
            if !self.filter_once(core)? {
                return Ok(());
            }
        }
    }

    fn filter_once(&mut self, core: &mut Core) -> Result<bool, crate::engine::Failure> {
        match &self.def.clone() {
            ConstraintDef::Element { array, index, result } => {
                self.filter_element(core, array, *index, *result)
            }
            ConstraintDef::LexLeq { xs, ys } => self.filter_lex(core, xs, ys),
            ConstraintDef::AllDifferent { vars } => self.filter_all_different(core, vars),
            ConstraintDef::BoolSumEq { vars, sum } => self.filter_bool_sum(core, vars, *sum),
            ConstraintDef::BoolAnd { a, b, r } => self.filter_bool_and(core, *a, *b, *r),
            ConstraintDef::LinearAux { coeff, p, q, aux } => {
                self.filter_linear_aux(core, *coeff, *p, *q, *aux)
            }
            ConstraintDef::NonOverlap { xi, xj, yi, yj, si, sj } => {
                self.filter_non_overlap(core, [*xi, *xj, *yi, *yj], *si, *sj)
            }
            ConstraintDef::Table { vars, supports } => self.filter_table(core, vars, supports),
        }
    }

    fn prune_all(
        core: &mut Core,
        prunes: &[(VarId, Val)],
    ) -> Result<bool, crate::engine::Failure> {
        for &(x, v) in prunes {
            core.prune(x, v)?;
        }
        Ok(!prunes.is_empty())
    }

    fn filter_element(
        &self,
        core: &mut Core,
        array: &[VarId],
        index: VarId,
        result: crate::model::ElemTarget,
    ) -> Result<bool, crate::engine::Failure> {
        use crate::model::ElemTarget;
        let target_contains = |core: &Core, v: Val| match result {
            ElemTarget::Const(c) => v == c,
            ElemTarget::Var(z) => core.doms.contains(z, v),
        };
        // indices whose array variable can meet the target
        let valid: Vec<Val> = core
            .doms
            .iter(index)
            .filter(|&i| {
                (i as usize) < array.len()
                    && core
                        .doms
                        .iter(array[i as usize])
                        .any(|v| target_contains(core, v))
            })
            .collect();
        let mut prunes: Vec<(VarId, Val)> = core
            .doms
            .iter(index)
            .filter(|i| !valid.contains(i))
            .map(|i| (index, i))
            .collect();
        if let ElemTarget::Var(z) = result {
            for v in core.doms.iter(z) {
                let supported = valid
                    .iter()
                    .any(|&i| core.doms.contains(array[i as usize], v));
                if !supported {
                    prunes.push((z, v));
                }
            }
        }
        // an array variable is only constrained once the index pins it
        if valid.len() == 1 {
            let k = valid[0] as usize;
            for v in core.doms.iter(array[k]) {
                if !target_contains(core, v) {
                    prunes.push((array[k], v));
                }
            }
        }
        if valid.is_empty() {
            // wipe the index variable to fail the node
            let all: Vec<(VarId, Val)> = core.doms.iter(index).map(|i| (index, i)).collect();
            for (x, v) in all {
                core.prune(x, v)?;
            }
            unreachable!("wiping a non-empty domain must fail");
        }
        Self::prune_all(core, &prunes)
    }

    /// A literal survives iff some satisfying tuple extends it: either a
    /// strict position k with an equal prefix exists before, at, or after its
    /// own index, or the two sides can be equal everywhere. `femp` is the
    /// first index where equality is impossible; a strict witness at k needs
    /// k <= femp so the prefix can be made equal.
    fn filter_lex(
        &self,
        core: &mut Core,
        xs: &[VarId],
        ys: &[VarId],
    ) -> Result<bool, crate::engine::Failure> {
        let n = xs.len();
        let femp = (0..n)
            .find(|&j| !core.doms.iter(xs[j]).any(|v| core.doms.contains(ys[j], v)))
            .unwrap_or(n);
        let witness: Vec<bool> = (0..n)
            .map(|k| k <= femp && core.doms.min(xs[k]).unwrap() < core.doms.max(ys[k]).unwrap())
            .collect();
        // prefix[i]: witness below i; suffix[i]: witness at i or above
        let mut prefix = vec![false; n + 1];
        for i in 0..n {
            prefix[i + 1] = prefix[i] || witness[i];
        }
        let mut suffix = vec![false; n + 1];
        for i in (0..n).rev() {
            suffix[i] = suffix[i + 1] || witness[i];
        }
        let all_equal = femp == n;
        let mut prunes: Vec<(VarId, Val)> = Vec::new();
        for i in 0..n {
            for v in core.doms.iter(xs[i]) {
                let keep = prefix[i]
                    || (i <= femp && v < core.doms.max(ys[i]).unwrap())
                    || (core.doms.contains(ys[i], v) && (suffix[i + 1] || all_equal));
                if !keep {
                    prunes.push((xs[i], v));
                }
            }
            for v in core.doms.iter(ys[i]) {
                let keep = prefix[i]
                    || (i <= femp && core.doms.min(xs[i]).unwrap() < v)
                    || (core.doms.contains(xs[i], v) && (suffix[i + 1] || all_equal));
                if !keep {
                    prunes.push((ys[i], v));
                }
            }
        }
        Self::prune_all(core, &prunes)
    }

    fn filter_all_different(
        &mut self,
        core: &mut Core,
        vars: &[VarId],
    ) -> Result<bool, crate::engine::Failure> {
        let n = vars.len();
        // repair the warm-start matching against current domains
        for (i, m) in self.matching.iter_mut().enumerate() {
            if let Some(v) = *m {
                if !core.doms.contains(vars[i], v) {
                    *m = None;
                }
            }
        }
        // dense value ids
        let mut vals: Vec<Val> = Vec::new();
        for &x in vars {
            for v in core.doms.iter(x) {
                if !vals.contains(&v) {
                    vals.push(v);
                }
            }
        }
        vals.sort_unstable();
        let vid = |v: Val| vals.binary_search(&v).unwrap();
        let mut val_of: Vec<Option<usize>> = vec![None; vals.len()]; // value -> var
        for i in 0..n {
            if let Some(v) = self.matching[i] {
                let j = vid(v);
                if val_of[j].is_none() {
                    val_of[j] = Some(i);
                } else {
                    self.matching[i] = None;
                }
            }
        }
        // Kuhn's augmenting search
        fn try_augment(
            core: &Core,
            vars: &[VarId],
            vals: &[Val],
            val_of: &mut Vec<Option<usize>>,
            matching: &mut Vec<Option<Val>>,
            seen: &mut Vec<bool>,
            x: usize,
        ) -> bool {
            for v in core.doms.iter(vars[x]) {
                let j = vals.binary_search(&v).unwrap();
                if seen[j] {
                    continue;
                }
                seen[j] = true;
                let free = val_of[j].is_none();
                if free
                    || try_augment(core, vars, vals, val_of, matching, seen, val_of[j].unwrap())
                {
                    val_of[j] = Some(x);
                    matching[x] = Some(v);
                    return true;
                }
            }
            false
        }
        for i in 0..n {
            if self.matching[i].is_none() {
                let mut seen = vec![false; vals.len()];
                if !try_augment(
                    core,
                    vars,
                    &vals,
                    &mut val_of,
                    &mut self.matching,
                    &mut seen,
                    i,
                ) {
                    return Err(crate::engine::Failure);
                }
            }
        }
        // directed graph: var -> value for unmatched edges, value -> var for
        // matched ones. An unmatched edge is usable iff it closes a cycle
        // (same SCC) or its value forward-reaches a free value.
        let nv = vals.len();
        let node_var = |i: usize| i; // 0..n
        let node_val = |j: usize| n + j; // n..n+nv
        let total = n + nv;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); total];
        for i in 0..n {
            let m = self.matching[i];
            for v in core.doms.iter(vars[i]) {
                let j = vid(v);
                if m == Some(v) {
                    adj[node_val(j)].push(node_var(i));
                } else {
                    adj[node_var(i)].push(node_val(j));
                }
            }
        }
        // forward-reaches-free: reverse BFS from free values
        let mut radj: Vec<Vec<usize>> = vec![Vec::new(); total];
        for (u, outs) in adj.iter().enumerate() {
            for &w in outs {
                radj[w].push(u);
            }
        }
        let mut reaches_free = vec![false; total];
        let mut stack: Vec<usize> = (0..nv)
            .filter(|&j| val_of[j].is_none())
            .map(node_val)
            .collect();
        for &s in &stack {
            reaches_free[s] = true;
        }
        while let Some(u) = stack.pop() {
            for &w in &radj[u] {
                if !reaches_free[w] {
                    reaches_free[w] = true;
                    stack.push(w);
                }
            }
        }
        let scc = kosaraju(&adj, &radj);
        let mut prunes: Vec<(VarId, Val)> = Vec::new();
        for i in 0..n {
            for v in core.doms.iter(vars[i]) {
                if self.matching[i] == Some(v) {
                    continue;
                }
                let j = vid(v);
                let usable =
                    scc[node_var(i)] == scc[node_val(j)] || reaches_free[node_val(j)];
                if !usable {
                    prunes.push((vars[i], v));
                }
            }
        }
        Self::prune_all(core, &prunes)
    }

    fn filter_bool_sum(
        &self,
        core: &mut Core,
        vars: &[VarId],
        sum: u32,
    ) -> Result<bool, crate::engine::Failure> {
        let mut lo = 0u32;
        let mut hi = 0u32;
        for &x in vars {
            lo += core.doms.min(x).unwrap();
            hi += core.doms.max(x).unwrap();
        }
        if sum < lo || sum > hi {
            return Err(crate::engine::Failure);
        }
        let mut prunes = Vec::new();
        if lo == sum {
            for &x in vars {
                if !core.doms.is_assigned(x) {
                    prunes.push((x, 1));
                }
            }
        } else if hi == sum {
            for &x in vars {
                if !core.doms.is_assigned(x) {
                    prunes.push((x, 0));
                }
            }
        }
        Self::prune_all(core, &prunes)
    }

    fn filter_bool_and(
        &self,
        core: &mut Core,
        a: VarId,
        b: VarId,
        r: VarId,
    ) -> Result<bool, crate::engine::Failure> {
        let mut prunes = Vec::new();
        for (x, others) in [(a, (b, r)), (b, (a, r)), (r, (a, b))] {
            for v in core.doms.iter(x) {
                let (y, z) = others;
                let mut supported = false;
                for vy in core.doms.iter(y) {
                    for vz in core.doms.iter(z) {
                        let (va, vb, vr) = if x == r {
                            (vy, vz, v)
                        } else if x == a {
                            (v, vy, vz)
                        } else {
                            (vy, v, vz)
                        };
                        if ((va != 0) && (vb != 0)) == (vr != 0) {
                            supported = true;
                            break;
                        }
                    }
                    if supported {
                        break;
                    }
                }
                if !supported {
                    prunes.push((x, v));
                }
            }
        }
        Self::prune_all(core, &prunes)
    }

    fn filter_linear_aux(
        &self,
        core: &mut Core,
        coeff: u32,
        p: VarId,
        q: VarId,
        aux: VarId,
    ) -> Result<bool, crate::engine::Failure> {
        let mut prunes = Vec::new();
        for v in core.doms.iter(aux) {
            let ok = core
                .doms
                .iter(p)
                .any(|vp| coeff * vp <= v && core.doms.contains(q, v - coeff * vp));
            if !ok {
                prunes.push((aux, v));
            }
        }
        for vp in core.doms.iter(p) {
            let ok = core
                .doms
                .iter(q)
                .any(|vq| core.doms.contains(aux, coeff * vp + vq));
            if !ok {
                prunes.push((p, vp));
            }
        }
        for vq in core.doms.iter(q) {
            let ok = core
                .doms
                .iter(p)
                .any(|vp| core.doms.contains(aux, coeff * vp + vq));
            if !ok {
                prunes.push((q, vq));
            }
        }
        Self::prune_all(core, &prunes)
    }

    fn filter_non_overlap(
        &self,
        core: &mut Core,
        [xi, xj, yi, yj]: [VarId; 4],
        si: Val,
        sj: Val,
    ) -> Result<bool, crate::engine::Failure> {
        // disjuncts in written order: lhs + s <= rhs
        let disjuncts = [(xi, si, xj), (xj, sj, xi), (yi, si, yj), (yj, sj, yi)];
        let satisfiable = |core: &Core, (l, s, r): (VarId, Val, VarId)| {
            core.doms.min(l).unwrap() + s <= core.doms.max(r).unwrap()
        };
        if !disjuncts.iter().any(|&d| satisfiable(core, d)) {
            return Err(crate::engine::Failure);
        }
        let mut prunes = Vec::new();
        for &x in &[xi, xj, yi, yj] {
            for v in core.doms.iter(x) {
                let mut supported = false;
                for &(l, s, r) in &disjuncts {
                    let ok = if x == l {
                        v + s <= core.doms.max(r).unwrap()
                    } else if x == r {
                        core.doms.min(l).unwrap() + s <= v
                    } else {
                        satisfiable(core, (l, s, r))
                    };
                    if ok {
                        supported = true;
                        break;
                    }
                }
                if !supported {
                    prunes.push((x, v));
                }
            }
        }
        Self::prune_all(core, &prunes)
    }

    fn filter_table(
        &self,
        core: &mut Core,
        vars: &[VarId],
        supports: &[crate::model::Support],
    ) -> Result<bool, crate::engine::Failure> {
        let valid =
            |core: &Core, s: &crate::model::Support| s.iter().all(|&(x, v)| core.doms.contains(x, v));
        let mut prunes = Vec::new();
        for &x in vars {
            for v in core.doms.iter(x) {
                let supported = supports.iter().any(|s| {
                    valid(core, s)
                        && s.iter()
                            .find(|&&(y, _)| y == x)
                            .map_or(true, |&(_, w)| w == v)
                });
                if !supported {
                    prunes.push((x, v));
                }
            }
        }
        Self::prune_all(core, &prunes)
    }
}

/// Kosaraju strongly connected components over a small graph.
fn kosaraju(adj: &[Vec<usize>], radj: &[Vec<usize>]) -> Vec<u32> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for s in 0..n {
        if seen[s] {
            continue;
        }
        // iterative post-order
        let mut stack = vec![(s, 0usize)];
        seen[s] = true;
        while let Some(&mut (u, ref mut i)) = stack.last_mut() {
            if *i < adj[u].len() {
                let w = adj[u][*i];
                *i += 1;
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(u);
                stack.pop();
            }
        }
    }
    let mut comp = vec![u32::MAX; n];
    let mut c = 0u32;
    for &s in order.iter().rev() {
        if comp[s] != u32::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = c;
        while let Some(u) = stack.pop() {
            for &w in &radj[u] {
                if comp[w] == u32::MAX {
                    comp[w] = c;
                    stack.push(w);
                }
            }
        }
        c += 1;
    }
    comp
}

impl Propagator for BuiltinGac {
    fn initialise(&mut self, core: &mut Core) -> PropResult {
        for &x in &self.scope.clone() {
            let vals: Vec<Val> = core.doms.iter(x).collect();
            for v in vals {
                core.triggers.attach(self.prop, core.litmap.encode(x, v));
            }
        }
        self.fixpoint(core)
    }

    fn propagate(&mut self, core: &mut Core, _lit: Lit) -> PropResult {
        self.fixpoint(core)
    }

    fn on_push(&mut self) {}

    fn on_backtrack(&mut self, _core: &mut Core) {}
}
