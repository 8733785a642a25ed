//! Support-finding functions.
//!
//! A `SupportSource` answers queries `(x, v)` with a support for the literal
//! (explicit or implicit) under the current domains, or `None` when no
//! support exists. Queries force the queried variable's domain to `{v}`, so
//! any returned support is guaranteed to support the query literal: if the
//! support mentions `x` it can only assign `v`, and otherwise it supports all
//! of `x`'s literals implicitly.
//!
//! Provided sources: constraint-specific functions for element, lex-ordering
//! and square non-overlap; a generic per-literal list scan with circular
//! resumption; a next-difference-list scan over a single shared list; and a
//! wrapper that extends any source's results to full length.

use crate::domain::DomainStore;
use crate::literal::{Val, VarId};
use crate::model::{ConstraintDef, Disjunct, ElemTarget, Support};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("support set would exceed the configured cap of {0} entries")]
    TooLarge(usize),
    #[error("constraint kind has no generic support list")]
    NoSupportList,
}

/// Current domains with the query variable forced to the query value.
#[derive(Clone, Copy)]
pub struct QueryDoms<'a> {
    doms: &'a DomainStore,
    var: VarId,
    val: Val,
}

impl<'a> QueryDoms<'a> {
    pub fn new(doms: &'a DomainStore, var: VarId, val: Val) -> Self {
        debug_assert!(doms.contains(var, val), "query literal must be valid");
        QueryDoms { doms, var, val }
    }

    pub fn contains(&self, x: VarId, v: Val) -> bool {
        if x == self.var {
            v == self.val
        } else {
            self.doms.contains(x, v)
        }
    }

    pub fn min(&self, x: VarId) -> Val {
        if x == self.var {
            self.val
        } else {
            self.doms.min(x).expect("non-empty domain")
        }
    }

    pub fn max(&self, x: VarId) -> Val {
        if x == self.var {
            self.val
        } else {
            self.doms.max(x).expect("non-empty domain")
        }
    }

    pub fn iter(&self, x: VarId) -> Box<dyn Iterator<Item = Val> + 'a> {
        if x == self.var {
            Box::new(std::iter::once(self.val))
        } else {
            Box::new(self.doms.iter(x))
        }
    }
}

pub trait SupportSource {
    /// A support for the valid literal `(var, val)`, or `None` when no
    /// support exists under the current domains.
    fn find(&mut self, doms: &DomainStore, var: VarId, val: Val) -> Option<Support>;
}

// ----- constraint-specific sources ------------------------------------------

/// Supports of the form {array[i] -> j, index -> i, result -> j}, scanning
/// indices ascending then values ascending.
pub struct ElementSource {
    pub array: Vec<VarId>,
    pub index: VarId,
    pub result: ElemTarget,
}

impl SupportSource for ElementSource {
    fn find(&mut self, doms: &DomainStore, var: VarId, val: Val) -> Option<Support> {
        let q = QueryDoms::new(doms, var, val);
        for i in q.iter(self.index) {
            let i = i as usize;
            if i >= self.array.len() {
                continue;
            }
            let xi = self.array[i];
            match self.result {
                ElemTarget::Const(c) => {
                    if q.contains(xi, c) {
                        return Some(vec![(xi, c), (self.index, i as Val)]);
                    }
                }
                ElemTarget::Var(z) => {
                    for j in q.iter(z) {
                        if q.contains(xi, j) {
                            return Some(vec![(xi, j), (self.index, i as Val), (z, j)]);
                        }
                    }
                }
            }
        }
        None
    }
}

/// Lex-ordering supports: at the lowest index `i` where min(x_i) < max(y_i)
/// the support pins x_i and y_i to those bounds plus the forced equal pairs
/// before `i`; when no strict position exists a support for X = Y is sought
/// using the smallest common value at every index.
pub struct LexSource {
    pub xs: Vec<VarId>,
    pub ys: Vec<VarId>,
}

impl SupportSource for LexSource {
    fn find(&mut self, doms: &DomainStore, var: VarId, val: Val) -> Option<Support> {
        let q = QueryDoms::new(doms, var, val);
        let n = self.xs.len();
        let strict = (0..n).find(|&i| q.min(self.xs[i]) < q.max(self.ys[i]));
        match strict {
            Some(i) => {
                let mut sup = Vec::with_capacity(2 * (i + 1));
                for j in 0..i {
                    let (mx, my) = (q.min(self.xs[j]), q.max(self.ys[j]));
                    if mx != my {
                        return None;
                    }
                    sup.push((self.xs[j], mx));
                    sup.push((self.ys[j], my));
                }
                sup.push((self.xs[i], q.min(self.xs[i])));
                sup.push((self.ys[i], q.max(self.ys[i])));
                Some(sup)
            }
            None => {
                // X = Y: smallest common value per index
                let mut sup = Vec::with_capacity(2 * n);
                for j in 0..n {
                    let v = q
                        .iter(self.xs[j])
                        .find(|&v| q.contains(self.ys[j], v))?;
                    sup.push((self.xs[j], v));
                    sup.push((self.ys[j], v));
                }
                Some(sup)
            }
        }
    }
}

/// Square non-overlap supports: the empty support when a disjunct is entailed
/// (or, in the stable variant, a two-literal witness of the entailed
/// disjunct), else a two-literal witness of the first satisfiable disjunct,
/// using the minimum for the left variable and the maximum for the right.
pub struct RectSource {
    pub xi: VarId,
    pub xj: VarId,
    pub yi: VarId,
    pub yj: VarId,
    pub si: Val,
    pub sj: Val,
    /// The backtrack-stable variant never returns the empty support.
    pub no_empty: bool,
}

impl RectSource {
    fn disjuncts(&self) -> [(VarId, Val, VarId); 4] {
        [
            (self.xi, self.si, self.xj),
            (self.xj, self.sj, self.xi),
            (self.yi, self.si, self.yj),
            (self.yj, self.sj, self.yi),
        ]
    }
}

impl SupportSource for RectSource {
    fn find(&mut self, doms: &DomainStore, var: VarId, val: Val) -> Option<Support> {
        let q = QueryDoms::new(doms, var, val);
        // Entailment must hold under the true current domains: the empty
        // support justifies every literal, not only the queried one. The
        // query forcing applies to the witness values.
        for (lhs, s, rhs) in self.disjuncts() {
            let entailed =
                doms.max(lhs).expect("non-empty") + s <= doms.min(rhs).expect("non-empty");
            if entailed {
                return if self.no_empty {
                    Some(vec![(lhs, q.min(lhs)), (rhs, q.max(rhs))])
                } else {
                    Some(Vec::new())
                };
            }
        }
        for (lhs, s, rhs) in self.disjuncts() {
            if q.min(lhs) + s <= q.max(rhs) {
                return Some(vec![(lhs, q.min(lhs)), (rhs, q.max(rhs))]);
            }
        }
        None
    }
}

// ----- generic list sources --------------------------------------------------

/// Scope-local literal indexing shared by the list sources and GAC-Schema.
pub(crate) struct ScopeLits {
    pub(crate) scope: Vec<VarId>,
    base: Vec<u32>,
}

impl ScopeLits {
    pub(crate) fn new(scope: Vec<VarId>, initial_doms: &[Vec<Val>]) -> Self {
        let mut base = Vec::with_capacity(scope.len() + 1);
        let mut acc = 0u32;
        for &x in &scope {
            base.push(acc);
            acc += initial_doms[x.idx()].iter().copied().max().map_or(0, |m| m + 1);
        }
        base.push(acc);
        ScopeLits { scope, base }
    }

    pub(crate) fn lit(&self, var: VarId, val: Val) -> usize {
        let i = self.scope.iter().position(|&x| x == var).expect("scope var");
        (self.base[i] + val) as usize
    }

    pub(crate) fn num_lits(&self) -> usize {
        *self.base.last().unwrap() as usize
    }
}

/// Per-literal lists of supports with a persistent scan position. The
/// position is not unwound on backtracking; scans wrap circularly instead.
pub struct ListSource {
    supports: Vec<Support>,
    lits: ScopeLits,
    /// For each scope literal, indices into `supports` of every support that
    /// supports it (contains it, or omits its variable entirely).
    per_lit: Vec<Vec<u32>>,
    list_pos: Vec<u32>,
}

impl ListSource {
    pub fn new(scope: Vec<VarId>, supports: Vec<Support>, initial_doms: &[Vec<Val>]) -> Self {
        let lits = ScopeLits::new(scope.clone(), initial_doms);
        let mut per_lit: Vec<Vec<u32>> = vec![Vec::new(); lits.num_lits()];
        for (si, sup) in supports.iter().enumerate() {
            for &x in &scope {
                let lit_of = sup.iter().find(|&&(y, _)| y == x);
                for &v in &initial_doms[x.idx()] {
                    let compatible = match lit_of {
                        Some(&(_, w)) => w == v,
                        None => true,
                    };
                    if compatible {
                        per_lit[lits.lit(x, v)].push(si as u32);
                    }
                }
            }
        }
        let n = lits.num_lits();
        ListSource {
            supports,
            lits,
            per_lit,
            list_pos: vec![0; n],
        }
    }

    pub fn supports(&self) -> &[Support] {
        &self.supports
    }

    fn valid(sup: &Support, doms: &DomainStore) -> bool {
        sup.iter().all(|&(x, v)| doms.contains(x, v))
    }
}

impl SupportSource for ListSource {
    fn find(&mut self, doms: &DomainStore, var: VarId, val: Val) -> Option<Support> {
        let lit = self.lits.lit(var, val);
        let list = &self.per_lit[lit];
        let start = self.list_pos[lit] as usize;
        for j in (start..list.len()).chain(0..start) {
            let sup = &self.supports[list[j] as usize];
            if Self::valid(sup, doms) {
                self.list_pos[lit] = j as u32;
                return Some(sup.clone());
            }
        }
        None
    }
}

/// A single shared list of supports with next-difference jump tables:
/// `nd[j][k]` is the index of the next support after `j` that does not
/// contain the k-th literal of support `j`, letting the scan skip every
/// support invalidated by the same literal.
pub struct NdListSource {
    supports: Vec<Support>,
    nd: Vec<Vec<u32>>,
    lits: ScopeLits,
    list_pos: Vec<u32>,
}

impl NdListSource {
    pub fn new(scope: Vec<VarId>, supports: Vec<Support>, initial_doms: &[Vec<Val>]) -> Self {
        let lits = ScopeLits::new(scope.clone(), initial_doms);
        let nd = build_nd_list(&supports);
        let n = lits.num_lits();
        NdListSource {
            supports,
            nd,
            lits,
            list_pos: vec![0; n],
        }
    }

    pub fn supports(&self) -> &[Support] {
        &self.supports
    }

    pub fn nd_table(&self) -> &[Vec<u32>] {
        &self.nd
    }

    /// Scan `range`, jumping over supports sharing an invalid literal.
    /// Returns the index of the first support valid under the query-forced
    /// domains, or the index the scan ran off to.
    fn scan(&self, doms: &DomainStore, var: VarId, val: Val, mut j: usize, end: usize) -> Option<usize> {
        'outer: while j < end {
            let sup = &self.supports[j];
            for (k, &(y, b)) in sup.iter().enumerate() {
                if !doms.contains(y, b) || (y == var && b != val) {
                    j = self.nd[j][k] as usize;
                    continue 'outer;
                }
            }
            return Some(j);
        }
        None
    }
}

/// Backward sweep: `nd[j][k]` is `j+1` when the next support lacks the
/// literal, else that support's own jump for the same literal.
pub fn build_nd_list(supports: &[Support]) -> Vec<Vec<u32>> {
    let t = supports.len();
    let mut nd: Vec<Vec<u32>> = vec![Vec::new(); t];
    for j in (0..t).rev() {
        let sup = &supports[j];
        nd[j] = sup
            .iter()
            .map(|lit| {
                if j + 1 >= t {
                    t as u32
                } else if let Some(k2) = supports[j + 1].iter().position(|l2| l2 == lit) {
                    nd[j + 1][k2]
                } else {
                    (j + 1) as u32
                }
            })
            .collect();
    }
    nd
}

impl SupportSource for NdListSource {
    fn find(&mut self, doms: &DomainStore, var: VarId, val: Val) -> Option<Support> {
        let lit = self.lits.lit(var, val);
        let start = self.list_pos[lit] as usize;
        if let Some(j) = self.scan(doms, var, val, start, self.supports.len()) {
            self.list_pos[lit] = j as u32;
            return Some(self.supports[j].clone());
        }
        if let Some(j) = self.scan(doms, var, val, 0, start) {
            self.list_pos[lit] = j as u32;
            return Some(self.supports[j].clone());
        }
        None
    }
}

// ----- full-length wrapper ----------------------------------------------------

/// Extend a support to full length with the minimum value of each absent
/// scope variable.
pub fn longify(support: &Support, scope: &[VarId], doms: &DomainStore) -> Support {
    let mut out = support.clone();
    for &x in scope {
        if !support.iter().any(|&(y, _)| y == x) {
            out.push((x, doms.min(x).expect("non-empty domain")));
        }
    }
    out
}

/// As `longify`, but an absent query variable is pinned to the query value so
/// the result supports the queried literal explicitly.
pub fn longify_for_query(
    support: &Support,
    scope: &[VarId],
    doms: &DomainStore,
    var: VarId,
    val: Val,
) -> Support {
    let mut out = support.clone();
    for &x in scope {
        if !support.iter().any(|&(y, _)| y == x) {
            out.push((x, if x == var { val } else { doms.min(x).expect("non-empty domain") }));
        }
    }
    out
}

/// Remove literals of assigned variables. Sound because the variable can
/// take no other value; the caller keeps the pre-strip arity for the
/// full-length fast path.
pub fn strip_assigned(support: &Support, doms: &DomainStore) -> Support {
    support
        .iter()
        .copied()
        .filter(|&(x, v)| !(doms.is_assigned(x) && doms.assigned_value(x) == Some(v)))
        .collect()
}

/// Wraps a source so every result is extended to full length (pinning the
/// query literal).
pub struct LongSource {
    pub inner: Box<dyn SupportSource>,
    pub scope: Vec<VarId>,
}

impl SupportSource for LongSource {
    fn find(&mut self, doms: &DomainStore, var: VarId, val: Val) -> Option<Support> {
        self.inner
            .find(doms, var, val)
            .map(|s| longify_for_query(&s, &self.scope, doms, var, val))
    }
}

// ----- support set construction -------------------------------------------------

/// Short support set of a disjunction: the union over disjuncts of their
/// full-length supports under the given domains, deduplicated. Refuses when
/// the set would exceed `cap`.
pub fn disjunction_support_set(
    disjuncts: &[Disjunct],
    domains: impl Fn(VarId) -> Vec<Val> + Copy,
    cap: usize,
) -> Result<Vec<Support>, SourceError> {
    let mut out: Vec<Support> = Vec::new();
    let mut seen: std::collections::HashSet<Vec<(u32, Val)>> = std::collections::HashSet::new();
    for d in disjuncts {
        let supports = d
            .full_supports(domains, cap)
            .ok_or(SourceError::TooLarge(cap))?;
        for s in supports {
            let mut key: Vec<(u32, Val)> = s.iter().map(|&(x, v)| (x.0, v)).collect();
            key.sort_unstable();
            if seen.insert(key) {
                out.push(s);
            }
            if out.len() > cap {
                return Err(SourceError::TooLarge(cap));
            }
        }
    }
    Ok(out)
}

/// The generic short support list for a constraint under its initial
/// domains, used by the list and next-difference instantiations.
pub fn support_table(
    def: &ConstraintDef,
    initial_doms: &[Vec<Val>],
    cap: usize,
) -> Result<Vec<Support>, SourceError> {
    match def {
        ConstraintDef::Table { supports, .. } => Ok(supports.clone()),
        _ => {
            let disjuncts = def.disjuncts().ok_or(SourceError::NoSupportList)?;
            disjunction_support_set(&disjuncts, |x| initial_doms[x.idx()].clone(), cap)
        }
    }
}

/// Build the constraint-specific source, when one exists. Table constraints
/// have no specific function and fall back to the list scan.
pub fn specific_source(
    def: &ConstraintDef,
    initial_doms: &[Vec<Val>],
    stable: bool,
    cap: usize,
) -> Result<Box<dyn SupportSource>, SourceError> {
    match def {
        ConstraintDef::Element { array, index, result } => Ok(Box::new(ElementSource {
            array: array.clone(),
            index: *index,
            result: *result,
        })),
        ConstraintDef::LexLeq { xs, ys } => Ok(Box::new(LexSource {
            xs: xs.clone(),
            ys: ys.clone(),
        })),
        ConstraintDef::NonOverlap { xi, xj, yi, yj, si, sj } => Ok(Box::new(RectSource {
            xi: *xi,
            xj: *xj,
            yi: *yi,
            yj: *yj,
            si: *si,
            sj: *sj,
            no_empty: stable,
        })),
        ConstraintDef::Table { vars, supports } => Ok(Box::new(ListSource::new(
            vars.clone(),
            supports.clone(),
            initial_doms,
        ))),
        _ => {
            // fall back to a list over the generic support set
            let table = support_table(def, initial_doms, cap)?;
            Ok(Box::new(ListSource::new(def.scope(), table, initial_doms)))
        }
    }
}

// ----- support list text format ---------------------------------------------

#[derive(Debug, Error)]
pub enum SupportFileError {
    #[error("missing `scope` header line")]
    MissingScope,
    #[error("line {0}: unknown variable `{1}`")]
    UnknownVar(usize, String),
    #[error("line {0}: malformed pair `{1}` (expected var=val)")]
    BadPair(usize, String),
    #[error("line {0}: variable `{1}` repeated within one support")]
    DupVar(usize, String),
}

/// Parsed support list file: scope variable names and supports given as
/// (scope index, value) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportFile {
    pub scope: Vec<String>,
    pub supports: Vec<Vec<(usize, Val)>>,
}

/// One constraint block per file: a `scope v0 v1 ...` header, then one
/// support per line as space-separated `var=val` pairs. `#` starts a
/// comment; blank lines are skipped.
pub fn parse_support_file(text: &str) -> Result<SupportFile, SupportFileError> {
    let mut scope: Option<Vec<String>> = None;
    let mut supports = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if scope.is_none() {
            let mut toks = line.split_whitespace();
            if toks.next() != Some("scope") {
                return Err(SupportFileError::MissingScope);
            }
            scope = Some(toks.map(str::to_string).collect());
            continue;
        }
        let names = scope.as_ref().unwrap();
        let mut sup: Vec<(usize, Val)> = Vec::new();
        for pair in line.split_whitespace() {
            let (name, val) = pair
                .split_once('=')
                .ok_or_else(|| SupportFileError::BadPair(ln + 1, pair.to_string()))?;
            let idx = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| SupportFileError::UnknownVar(ln + 1, name.to_string()))?;
            let val: Val = val
                .parse()
                .map_err(|_| SupportFileError::BadPair(ln + 1, pair.to_string()))?;
            if sup.iter().any(|&(i, _)| i == idx) {
                return Err(SupportFileError::DupVar(ln + 1, name.to_string()));
            }
            sup.push((idx, val));
        }
        supports.push(sup);
    }
    match scope {
        Some(scope) => Ok(SupportFile { scope, supports }),
        None => Err(SupportFileError::MissingScope),
    }
}

pub fn format_support_file(file: &SupportFile) -> String {
    let mut out = String::from("scope");
    for n in &file.scope {
        out.push(' ');
        out.push_str(n);
    }
    out.push('\n');
    for sup in &file.supports {
        let line: Vec<String> = sup
            .iter()
            .map(|&(i, v)| format!("{}={}", file.scope[i], v))
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{has_full_support, is_short_support, DEFAULT_CAP};

    fn element_doms() -> Vec<Vec<Val>> {
        vec![
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2],
            vec![0, 1, 2, 3],
        ]
    }

    fn element_def() -> ConstraintDef {
        ConstraintDef::Element {
            array: vec![VarId(0), VarId(1), VarId(2)],
            index: VarId(3),
            result: ElemTarget::Var(VarId(4)),
        }
    }

    #[test]
    fn element_source_scan_order() {
        let doms = element_doms();
        let store = DomainStore::new(&doms);
        let mut src = ElementSource {
            array: vec![VarId(0), VarId(1), VarId(2)],
            index: VarId(3),
            result: ElemTarget::Var(VarId(4)),
        };
        // query (z, 0): ascending scan finds {x0->0, y->0, z->0}
        let sup = src.find(&store, VarId(4), 0).unwrap();
        assert_eq!(sup, vec![(VarId(0), 0), (VarId(3), 0), (VarId(4), 0)]);
        // no support for z -> 3
        assert!(src.find(&store, VarId(4), 3).is_none());
        assert!(!has_full_support(&element_def(), &doms, VarId(4), 3, DEFAULT_CAP).unwrap());
        // index assigned: query (x_1, v) yields {x1->v, y->1, z->v}
        let mut doms2 = doms.clone();
        doms2[3] = vec![1];
        let store2 = DomainStore::new(&doms2);
        let sup = src.find(&store2, VarId(1), 2).unwrap();
        assert_eq!(sup, vec![(VarId(1), 2), (VarId(3), 1), (VarId(4), 2)]);
        assert!(is_short_support(&element_def(), &doms2, &sup, DEFAULT_CAP).unwrap());
    }

    #[test]
    fn lex_source_recipe() {
        // n=2, D(x0)={1,2}, D(y0)={0,1}, D(x1)={0}, D(y1)={2}
        let doms = vec![vec![1, 2], vec![0], vec![0, 1], vec![2]];
        let store = DomainStore::new(&doms);
        let mut src = LexSource {
            xs: vec![VarId(0), VarId(1)],
            ys: vec![VarId(2), VarId(3)],
        };
        let sup = src.find(&store, VarId(0), 1).unwrap();
        assert_eq!(
            sup,
            vec![(VarId(0), 1), (VarId(2), 1), (VarId(1), 0), (VarId(3), 2)]
        );
        let def = ConstraintDef::LexLeq {
            xs: vec![VarId(0), VarId(1)],
            ys: vec![VarId(2), VarId(3)],
        };
        assert!(is_short_support(&def, &doms, &sup, DEFAULT_CAP).unwrap());

        // strict at index 0: all x = {0}, all y = {1}
        let doms = vec![vec![0], vec![0], vec![1], vec![1]];
        let store = DomainStore::new(&doms);
        let sup = src.find(&store, VarId(0), 0).unwrap();
        assert_eq!(sup, vec![(VarId(0), 0), (VarId(2), 1)]);

        // n=1, D(x0)={2}, D(y0)={1}: no strict position and no equal value
        let doms = vec![vec![2], vec![0], vec![1], vec![0]];
        let store = DomainStore::new(&doms);
        let mut src1 = LexSource {
            xs: vec![VarId(0)],
            ys: vec![VarId(2)],
        };
        assert_eq!(src1.find(&store, VarId(0), 2), None);
    }

    #[test]
    fn rect_source_entailment_and_witness() {
        // sizes i=3, j=2; D(x_i)={0..2}, D(x_j)={5..7}: first disjunct entailed
        let doms = vec![vec![0, 1, 2], vec![5, 6, 7], vec![0], vec![0]];
        let store = DomainStore::new(&doms);
        let mut src = RectSource {
            xi: VarId(0),
            xj: VarId(1),
            yi: VarId(2),
            yj: VarId(3),
            si: 3,
            sj: 2,
            no_empty: false,
        };
        assert_eq!(src.find(&store, VarId(0), 1).unwrap(), Vec::new());
        // stable variant returns a two-literal witness instead
        src.no_empty = true;
        let sup = src.find(&store, VarId(0), 1).unwrap();
        assert_eq!(sup, vec![(VarId(0), 1), (VarId(1), 7)]);

        // nothing entailed: first satisfiable disjunct with extreme witnesses
        let doms = vec![vec![0, 1, 2, 3], vec![0, 1, 2, 3, 4], vec![0, 1], vec![0, 1]];
        let store = DomainStore::new(&doms);
        let mut src = RectSource {
            xi: VarId(0),
            xj: VarId(1),
            yi: VarId(2),
            yj: VarId(3),
            si: 4,
            sj: 4,
            no_empty: false,
        };
        let sup = src.find(&store, VarId(2), 0).unwrap();
        assert_eq!(sup, vec![(VarId(0), 0), (VarId(1), 4)]);

        // all four disjuncts unsatisfiable: squares forced to overlap
        let doms = vec![vec![0, 1], vec![0, 1], vec![0, 1], vec![0, 1]];
        let store = DomainStore::new(&doms);
        let mut src = RectSource {
            xi: VarId(0),
            xj: VarId(1),
            yi: VarId(2),
            yj: VarId(3),
            si: 3,
            sj: 3,
            no_empty: false,
        };
        assert_eq!(src.find(&store, VarId(0), 0), None);
    }

    #[test]
    fn list_source_circular_scan() {
        // supports S0={a->0}, S1={a->1}, S2={a->2} over one variable b free
        let scope = vec![VarId(0), VarId(1)];
        let doms = vec![vec![0, 1, 2], vec![0, 1]];
        let supports: Vec<Support> = (0..3).map(|v| vec![(VarId(0), v)]).collect();
        let mut src = ListSource::new(scope, supports, &doms);
        // position the pointer at 1 by querying (a,1)
        let store = DomainStore::new(&doms);
        assert_eq!(src.find(&store, VarId(0), 1).unwrap(), vec![(VarId(0), 1)]);
        // S1, S2 invalid; S0 valid: wrap-around finds it and resets the pos
        let doms2 = vec![vec![0], vec![0, 1]];
        let store2 = DomainStore::new(&doms2);
        let lit_b0 = (VarId(1), 0);
        let sup = src.find(&store2, lit_b0.0, lit_b0.1).unwrap();
        assert_eq!(sup, vec![(VarId(0), 0)]);
        // all invalid -> None; the position is untouched by failed scans
        let doms3 = vec![vec![0, 1, 2], vec![0, 1]];
        let mut src3 = ListSource::new(
            vec![VarId(0), VarId(1)],
            vec![vec![(VarId(0), 0)], vec![(VarId(0), 1)]],
            &doms3,
        );
        let store3 = DomainStore::new(&vec![vec![2], vec![0, 1]]);
        assert_eq!(src3.find(&store3, VarId(1), 0), None);
    }

    #[test]
    fn nd_list_construction_and_jumps() {
        // S0={a->1,b->1}, S1={a->1,b->2}, S2={a->2,b->1}
        let (a, b) = (VarId(0), VarId(1));
        let supports: Vec<Support> = vec![
            vec![(a, 1), (b, 1)],
            vec![(a, 1), (b, 2)],
            vec![(a, 2), (b, 1)],
        ];
        let nd = build_nd_list(&supports);
        assert_eq!(nd[0], vec![2, 1]);
        assert_eq!(nd[1], vec![2, 2]);
        assert_eq!(nd[2], vec![3, 3]);

        // single support: sentinel everywhere
        let single = vec![vec![(a, 0), (b, 0)]];
        assert_eq!(build_nd_list(&single)[0], vec![1, 1]);

        // supports sharing no literals: nd[j][k] = j+1 everywhere
        let disjoint: Vec<Support> = vec![vec![(a, 0)], vec![(b, 0)], vec![(a, 1)]];
        let nd = build_nd_list(&disjoint);
        assert_eq!(nd, vec![vec![1], vec![2], vec![3]]);

        // a->1 invalid at j=0 jumps straight to j=2
        let doms = vec![vec![0, 1, 2], vec![0, 1, 2]];
        let mut src = NdListSource::new(vec![a, b], supports, &doms);
        let cur = vec![vec![2], vec![0, 1, 2]];
        let store = DomainStore::new(&cur);
        let sup = src.find(&store, b, 1).unwrap();
        assert_eq!(sup, vec![(a, 2), (b, 1)]);
        // query (a,2) from the start: line-7 condition fires on a->1
        let store_full = DomainStore::new(&doms);
        let mut src2 = NdListSource::new(
            vec![a, b],
            vec![
                vec![(a, 1), (b, 1)],
                vec![(a, 1), (b, 2)],
                vec![(a, 2), (b, 1)],
            ],
            &doms,
        );
        let sup = src2.find(&store_full, a, 2).unwrap();
        assert_eq!(sup, vec![(a, 2), (b, 1)]);
    }

    #[test]
    fn longify_and_strip() {
        let doms = element_doms();
        let store = DomainStore::new(&doms);
        let scope: Vec<VarId> = (0..5).map(VarId).collect();
        let sup = vec![(VarId(0), 1), (VarId(3), 0), (VarId(4), 1)];
        assert_eq!(
            longify(&sup, &scope, &store),
            vec![
                (VarId(0), 1),
                (VarId(3), 0),
                (VarId(4), 1),
                (VarId(1), 0),
                (VarId(2), 0)
            ]
        );
        // already full length: unchanged
        let full = longify(&sup, &scope, &store);
        assert_eq!(longify(&full, &scope, &store), full);
        // empty support: all-minimum tuple
        assert_eq!(
            longify(&Vec::new(), &scope, &store).len(),
            5
        );

        // stripping removes assigned literals and preserves the rest
        let mut doms2 = doms.clone();
        doms2[0] = vec![1];
        let store2 = DomainStore::new(&doms2);
        let stripped = strip_assigned(&sup, &store2);
        assert_eq!(stripped, vec![(VarId(3), 0), (VarId(4), 1)]);
        // no assigned variables: unchanged
        assert_eq!(strip_assigned(&sup, &store), sup);
        // all assigned: empty
        let all = vec![vec![1], vec![0], vec![0], vec![0], vec![1]];
        let store3 = DomainStore::new(&all);
        assert_eq!(strip_assigned(&full, &store3), Vec::new());
    }

    #[test]
    fn disjunction_set_matches_oracle() {
        // (x1 < x2) or (x2 < x3) over {0,1}
        use crate::model::Atom;
        let d1 = Disjunct::new(vec![Atom::LtVar(VarId(0), VarId(1))]);
        let d2 = Disjunct::new(vec![Atom::LtVar(VarId(1), VarId(2))]);
        let set =
            disjunction_support_set(&[d1, d2], |_| vec![0, 1], 100).unwrap();
        assert_eq!(
            set,
            vec![
                vec![(VarId(0), 0), (VarId(1), 1)],
                vec![(VarId(1), 0), (VarId(2), 1)],
            ]
        );
        // the element table lists all supports of the index/result form
        let table = support_table(&element_def(), &element_doms(), 10_000).unwrap();
        assert_eq!(table.len(), 3 * 3); // i in 0..3, j in common values
        // cap refusal
        assert!(matches!(
            support_table(&element_def(), &element_doms(), 2),
            Err(SourceError::TooLarge(_))
        ));
    }

    #[test]
    fn support_file_round_trip() {
        let text = "# block\nscope a b c\na=1 c=0\nb=2\n\n# trailing comment\n";
        let parsed = parse_support_file(text).unwrap();
        assert_eq!(parsed.scope, vec!["a", "b", "c"]);
        assert_eq!(parsed.supports, vec![vec![(0, 1), (2, 0)], vec![(1, 2)]]);
        let rendered = format_support_file(&parsed);
        assert_eq!(parse_support_file(&rendered).unwrap(), parsed);
        assert!(parse_support_file("a=1\n").is_err());
        assert!(parse_support_file("scope a\nb=1\n").is_err());
    }
}
