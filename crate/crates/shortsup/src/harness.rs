//! Randomized verification drivers grounding the correctness claims: every
//! propagator configuration against the brute-force GAC oracle on random
//! constraints, support-source validity and completeness, backtrack
//! stability, the lemma audits under fuzzed event sequences, and whole-search
//! equivalence across configurations on the bundled instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{build_solver, Instantiation, PropChoice, DEFAULT_SUPPORT_CAP};
use crate::engine::{SolverOptions, Solver};
use crate::instances;
use crate::literal::{Val, VarId};
use crate::model::{ConstraintDef, ElemTarget, Model, Role, Support};
use crate::oracle;
use crate::sources::{self, SupportSource};

/// Outcome of one verification suite.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: String,
    pub cases: u64,
    pub failures: Vec<String>,
}

impl CheckReport {
    pub fn new(name: &str) -> Self {
        CheckReport {
            name: name.to_string(),
            cases: 0,
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, msg: String) {
        if self.failures.len() < 20 {
            self.failures.push(msg);
        }
    }
}

/// The bundled desk-scale instances: QG3 orders 2-4, the smallest BIBD, and
/// two small rectangle packings.
pub fn bundled_suite() -> Vec<(String, Model)> {
    vec![
        ("qg3-2".into(), instances::build_qg3(2).unwrap()),
        ("qg3-3".into(), instances::build_qg3(3).unwrap()),
        ("qg3-4".into(), instances::build_qg3(4).unwrap()),
        ("bibd-1".into(), instances::build_bibd(1).unwrap()),
        ("rect-2-3-3".into(), instances::build_rect_pack(2, 3, 3).unwrap()),
        ("rect-3-5-4".into(), instances::build_rect_pack(3, 5, 4).unwrap()),
    ]
}

// ----- random constraint generation ---------------------------------------

fn random_subset(rng: &mut ChaCha8Rng, lo: Val, hi: Val) -> Vec<Val> {
    loop {
        let vals: Vec<Val> = (lo..=hi).filter(|_| rng.gen_bool(0.7)).collect();
        if !vals.is_empty() {
            return vals;
        }
    }
}

/// Constraint kinds exercised by the randomized suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Element,
    LexLeq,
    NonOverlap,
    Table,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::Element, Kind::LexLeq, Kind::NonOverlap, Kind::Table];
}

/// A random single-constraint model of the given kind. Domains are the
/// model's initial domains; the drive may prune them further.
pub fn random_case(kind: Kind, rng: &mut ChaCha8Rng) -> Model {
    let mut m = Model::new();
    match kind {
        Kind::Element => {
            let len = rng.gen_range(2..=3);
            let d = rng.gen_range(2..=4);
            let array: Vec<VarId> = (0..len)
                .map(|i| m.add_var(format!("x{i}"), random_subset(rng, 0, d - 1)))
                .collect();
            // index values may exceed the array length
            let index = m.add_var("y", random_subset(rng, 0, len));
            let result = if rng.gen_bool(0.7) {
                ElemTarget::Var(m.add_var("z", random_subset(rng, 0, d - 1)))
            } else {
                ElemTarget::Const(rng.gen_range(0..d))
            };
            m.add_constraint(ConstraintDef::Element { array, index, result }, Role::Study);
        }
        Kind::LexLeq => {
            let n = rng.gen_range(1..=4);
            let d = rng.gen_range(2..=4);
            let xs: Vec<VarId> = (0..n)
                .map(|i| m.add_var(format!("x{i}"), random_subset(rng, 0, d - 1)))
                .collect();
            let ys: Vec<VarId> = (0..n)
                .map(|i| m.add_var(format!("y{i}"), random_subset(rng, 0, d - 1)))
                .collect();
            m.add_constraint(ConstraintDef::LexLeq { xs, ys }, Role::Study);
        }
        Kind::NonOverlap => {
            let si = rng.gen_range(1..=3);
            let sj = rng.gen_range(1..=3);
            let span = rng.gen_range(3..=6);
            let xi = m.add_var("xi", random_subset(rng, 0, span));
            let xj = m.add_var("xj", random_subset(rng, 0, span));
            let yi = m.add_var("yi", random_subset(rng, 0, span));
            let yj = m.add_var("yj", random_subset(rng, 0, span));
            m.add_constraint(
                ConstraintDef::NonOverlap { xi, xj, yi, yj, si, sj },
                Role::Study,
            );
        }
        Kind::Table => {
            let arity = rng.gen_range(3..=4);
            let d = rng.gen_range(2..=4);
            let count = rng.gen_range(1..=12);
            let seed = rng.gen::<u64>();
            return instances::random_table_model(seed, arity, d, count);
        }
    }
    m.branch_order = (0..m.num_vars() as u32).map(VarId).collect();
    m
}

// ----- single-constraint GAC equivalence -----------------------------------

/// Drive one (case, config) pair: root fixpoint, then random prunes with
/// pushes and backtracks, comparing every fixpoint against the brute-force
/// oracle and every backtrack against the recorded snapshot.
#[doc(hidden)]
pub fn drive_case(
    model: &Model,
    choice: PropChoice,
    rng: &mut ChaCha8Rng,
    steps: u32,
    report: &mut CheckReport,
) {
    let options = SolverOptions {
        audit: true,
        ..Default::default()
    };
    let mut solver = match build_solver(model, choice, options, DEFAULT_SUPPORT_CAP) {
        Ok(s) => s,
        Err(e) => {
            report.fail(format!("{choice}: build failed: {e}"));
            return;
        }
    };
    let def = &model.constraints[0].def;
    let expect_root = oracle::brute_force_gac(def, &model.initial_domains, oracle::DEFAULT_CAP)
        .expect("cases are below the cap");
    let root_wipes = expect_root.iter().any(|d| d.is_empty());

    solver.push_node();
    if solver.initialise().is_err() {
        if !root_wipes {
            report.fail(format!("{choice}: failed at root, oracle kept {expect_root:?}"));
        }
        return;
    }
    if root_wipes {
        report.fail(format!("{choice}: root fixpoint missed a wipeout"));
        return;
    }
    if solver.core.doms.snapshot() != expect_root {
        report.fail(format!(
            "{choice}: root fixpoint {:?} differs from oracle {expect_root:?}",
            solver.core.doms.snapshot()
        ));
        return;
    }

    let mut snapshots = vec![solver.core.doms.snapshot()];
    for _ in 0..steps {
        let depth = snapshots.len() - 1;
        let backtrack = depth > 0 && rng.gen_bool(0.3);
        if backtrack {
            solver.backtrack_node();
            snapshots.pop();
            if solver.core.doms.snapshot() != *snapshots.last().unwrap() {
                report.fail(format!("{choice}: backtrack did not restore the snapshot"));
                return;
            }
            continue;
        }
        // pick a random prunable literal
        let candidates: Vec<(VarId, Val)> = (0..model.num_vars() as u32)
            .map(VarId)
            .filter(|&x| solver.core.doms.size(x) > 1)
            .flat_map(|x| {
                solver
                    .core
                    .doms
                    .values(x)
                    .into_iter()
                    .map(move |v| (x, v))
            })
            .collect();
        let Some(&(x, v)) = candidates.get(rng.gen_range(0..candidates.len().max(1))) else {
            break;
        };
        let mut after_prune = solver.core.doms.snapshot();
        after_prune[x.idx()].retain(|&w| w != v);
        let expect = oracle::brute_force_gac(def, &after_prune, oracle::DEFAULT_CAP)
            .expect("below cap");
        let wipes = expect.iter().any(|d| d.is_empty());

        solver.push_node();
        let ok = solver
            .prune_external(x, v)
            .and_then(|_| solver.drain());
        match ok {
            Err(_) => {
                if !wipes {
                    report.fail(format!(
                        "{choice}: failed pruning {x}->{v}, oracle kept {expect:?}"
                    ));
                    return;
                }
                solver.backtrack_node();
                if solver.core.doms.snapshot() != *snapshots.last().unwrap() {
                    report.fail(format!("{choice}: post-failure backtrack mismatch"));
                    return;
                }
            }
            Ok(()) => {
                if wipes {
                    report.fail(format!("{choice}: missed wipeout after pruning {x}->{v}"));
                    return;
                }
                if solver.core.doms.snapshot() != expect {
                    report.fail(format!(
                        "{choice}: fixpoint {:?} differs from oracle {expect:?} after pruning {x}->{v}",
                        solver.core.doms.snapshot()
                    ));
                    return;
                }
                snapshots.push(expect);
            }
        }
    }
}

/// Randomized fixpoint equivalence of every configuration against the
/// brute-force GAC oracle, including incremental propagation and
/// backtracking.
pub fn check_single_constraint_gac(cases_per_kind: u32, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("single-constraint GAC equivalence");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs = PropChoice::all();
    for kind in Kind::ALL {
        for _ in 0..cases_per_kind {
            let model = random_case(kind, &mut rng);
            for &choice in &configs {
                report.cases += 1;
                let mut case_rng = ChaCha8Rng::seed_from_u64(rng.gen());
                drive_case(&model, choice, &mut case_rng, 12, &mut report);
                if !report.passed() {
                    return report;
                }
            }
        }
    }
    report
}

// ----- support source validity ----------------------------------------------

fn sources_for(
    def: &ConstraintDef,
    initial: &[Vec<Val>],
) -> Vec<(&'static str, Box<dyn SupportSource>)> {
    let mut out: Vec<(&'static str, Box<dyn SupportSource>)> = Vec::new();
    out.push((
        "specific",
        sources::specific_source(def, initial, false, DEFAULT_SUPPORT_CAP).unwrap(),
    ));
    if let Ok(table) = sources::support_table(def, initial, DEFAULT_SUPPORT_CAP) {
        out.push((
            "list",
            Box::new(sources::ListSource::new(def.scope(), table.clone(), initial)),
        ));
        out.push((
            "ndlist",
            Box::new(sources::NdListSource::new(def.scope(), table, initial)),
        ));
    }
    out.push((
        "long",
        Box::new(sources::LongSource {
            inner: sources::specific_source(def, initial, false, DEFAULT_SUPPORT_CAP).unwrap(),
            scope: def.scope(),
        }),
    ));
    out.push((
        "stable-specific",
        sources::specific_source(def, initial, true, DEFAULT_SUPPORT_CAP).unwrap(),
    ));
    out
}

/// Reduce domains randomly, keeping every variable non-empty.
fn random_reduction(model: &Model, rng: &mut ChaCha8Rng) -> Vec<Vec<Val>> {
    model
        .initial_domains
        .iter()
        .map(|dom| {
            let keep: Vec<Val> = dom.iter().copied().filter(|_| rng.gen_bool(0.75)).collect();
            if keep.is_empty() {
                vec![dom[rng.gen_range(0..dom.len())]]
            } else {
                keep
            }
        })
        .collect()
}

/// Every non-NULL result of every source is a short support that supports the
/// queried literal; every NULL is confirmed by the exhaustive oracle.
pub fn check_source_validity(target_queries: u64, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("support source validity");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while report.cases < target_queries {
        let kind = Kind::ALL[rng.gen_range(0..Kind::ALL.len())];
        let model = random_case(kind, &mut rng);
        let def = &model.constraints[0].def;
        let current = random_reduction(&model, &mut rng);
        let doms = crate::domain::DomainStore::new(&current);
        for (name, mut src) in sources_for(def, &model.initial_domains) {
            for &x in &def.scope() {
                for v in doms.values(x) {
                    report.cases += 1;
                    let found = src.find(&doms, x, v);
                    match found {
                        Some(s) => {
                            let is_short =
                                oracle::is_short_support(def, &current, &s, oracle::DEFAULT_CAP)
                                    .expect("below cap");
                            if !is_short {
                                report.fail(format!(
                                    "{name} on {def:?} domains {current:?}: {s:?} is not a short support for query {x}->{v}"
                                ));
                            }
                            let covers = s
                                .iter()
                                .find(|&&(y, _)| y == x)
                                .map_or(true, |&(_, w)| w == v);
                            if !covers {
                                report.fail(format!(
                                    "{name}: result {s:?} does not support {x}->{v}"
                                ));
                            }
                        }
                        None => {
                            let has = oracle::has_full_support(
                                def,
                                &current,
                                x,
                                v,
                                oracle::DEFAULT_CAP,
                            )
                            .expect("below cap");
                            if has {
                                report.fail(format!(
                                    "{name} on {def:?} domains {current:?}: NULL for {x}->{v} but a full support exists"
                                ));
                            }
                        }
                    }
                    if !report.passed() {
                        return report;
                    }
                }
            }
        }
    }
    report
}

// ----- backtrack stability -----------------------------------------------------

/// Element and lex sources produce backtrack-stable supports (short supports
/// under the initial domains); the standard rectangle source's empty support
/// is not stable off the root, and the stable variant never returns it.
pub fn check_stability(cases: u32, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("backtrack stability");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        for kind in [Kind::Element, Kind::LexLeq] {
            let model = random_case(kind, &mut rng);
            let def = &model.constraints[0].def;
            let current = random_reduction(&model, &mut rng);
            let doms = crate::domain::DomainStore::new(&current);
            let mut src =
                sources::specific_source(def, &model.initial_domains, false, DEFAULT_SUPPORT_CAP)
                    .unwrap();
            for &x in &def.scope() {
                for v in doms.values(x) {
                    if let Some(s) = src.find(&doms, x, v) {
                        report.cases += 1;
                        let stable = oracle::is_backtrack_stable(
                            def,
                            &model.initial_domains,
                            &s,
                            oracle::DEFAULT_CAP,
                        )
                        .expect("below cap");
                        if !stable.stable {
                            report.fail(format!(
                                "{kind:?} source result {s:?} is not stable under initial domains {:?}",
                                model.initial_domains
                            ));
                            return report;
                        }
                    }
                }
            }
        }
    }

    // the standard rectangle source returns {} off the root, and {} fails
    // the initial-domain condition there
    let def = ConstraintDef::NonOverlap {
        xi: VarId(0),
        xj: VarId(1),
        yi: VarId(2),
        yj: VarId(3),
        si: 3,
        sj: 2,
    };
    let initial: Vec<Vec<Val>> = vec![
        (0..=4).collect(),
        (0..=7).collect(),
        vec![0],
        vec![0],
    ];
    let current: Vec<Vec<Val>> = vec![vec![0, 1, 2], vec![5, 6, 7], vec![0], vec![0]];
    let doms = crate::domain::DomainStore::new(&current);
    let mut standard = sources::RectSource {
        xi: VarId(0),
        xj: VarId(1),
        yi: VarId(2),
        yj: VarId(3),
        si: 3,
        sj: 2,
        no_empty: false,
    };
    report.cases += 1;
    match standard.find(&doms, VarId(0), 0) {
        Some(s) if s.is_empty() => {
            let stable =
                oracle::is_backtrack_stable(&def, &initial, &s, oracle::DEFAULT_CAP).unwrap();
            if stable.stable {
                report.fail("expected the empty support to fail the stability check".into());
            }
        }
        other => report.fail(format!(
            "expected the standard rectangle source to return the empty support, got {other:?}"
        )),
    }

    // the stable variant never returns the empty support off the root
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151);
    for _ in 0..cases {
        let model = random_case(Kind::NonOverlap, &mut rng);
        let def = &model.constraints[0].def;
        let current = random_reduction(&model, &mut rng);
        let doms = crate::domain::DomainStore::new(&current);
        let mut src =
            sources::specific_source(def, &model.initial_domains, true, DEFAULT_SUPPORT_CAP)
                .unwrap();
        for &x in &def.scope() {
            for v in doms.values(x) {
                report.cases += 1;
                if let Some(s) = src.find(&doms, x, v) {
                    if s.is_empty() {
                        report.fail("stable rectangle source returned the empty support".into());
                        return report;
                    }
                }
            }
        }
    }
    report
}

// ----- lemma audits -------------------------------------------------------------

/// Fuzz the short-support propagators with the recomputation audits enabled:
/// the lost-implicit region equality on every deletion, the full index
/// recomputation at every fixpoint, and the stable storage gauge. Audits
/// abort the process on discrepancy, so completing the run is the check.
pub fn check_lemma_audits(events: u64, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("lemma audits under fuzz");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs = [
        PropChoice::HaggisGac(Instantiation::List),
        PropChoice::HaggisGac(Instantiation::Specific),
        PropChoice::HaggisGacStable(Instantiation::List),
        PropChoice::HaggisGacStable(Instantiation::Specific),
        PropChoice::ShortGac(Instantiation::List),
    ];
    let mut done = 0u64;
    while done < events {
        let model = random_case(Kind::Table, &mut rng);
        for &choice in &configs {
            let mut case_rng = ChaCha8Rng::seed_from_u64(rng.gen());
            let before = report.failures.len();
            drive_case(&model, choice, &mut case_rng, 40, &mut report);
            if report.failures.len() > before {
                return report;
            }
            done += 40;
            report.cases += 40;
        }
    }
    report
}

// ----- whole-search equivalence ----------------------------------------------------

pub struct SearchRun {
    pub instance: String,
    pub config: String,
    pub nodes: u64,
    pub solutions: u64,
    pub solution_set: Vec<Vec<Val>>,
}

/// Search every bundled instance under every configuration: node counts and
/// solution multisets identical across configurations, counts equal to the
/// enumeration oracle.
pub fn check_search_equivalence(
    suite: &[(String, Model)],
    configs: &[PropChoice],
    audit: bool,
) -> (CheckReport, Vec<SearchRun>) {
    let mut report = CheckReport::new("cross-configuration search equivalence");
    let mut runs = Vec::new();
    for (name, model) in suite {
        let oracle_solutions = match oracle::brute_force_solve_all(model, 500_000_000) {
            Ok(s) => s,
            Err(e) => {
                report.fail(format!("{name}: enumeration oracle gave up: {e}"));
                continue;
            }
        };
        let mut reference: Option<(u64, Vec<Vec<Val>>)> = None;
        for &choice in configs {
            report.cases += 1;
            let options = SolverOptions {
                collect_solutions: true,
                audit,
                ..Default::default()
            };
            let mut solver = match build_solver(model, choice, options, DEFAULT_SUPPORT_CAP) {
                Ok(s) => s,
                Err(e) => {
                    report.fail(format!("{name}/{choice}: build failed: {e}"));
                    continue;
                }
            };
            let res = solver.solve_all();
            let mut sols = res.solutions.unwrap_or_default();
            sols.sort();
            if res.stats.status != crate::engine::SearchStatus::Complete {
                report.fail(format!("{name}/{choice}: hit a limit"));
                continue;
            }
            if sols != oracle_solutions {
                report.fail(format!(
                    "{name}/{choice}: {} solutions vs oracle {}",
                    sols.len(),
                    oracle_solutions.len()
                ));
            }
            match &reference {
                None => reference = Some((res.stats.nodes, sols.clone())),
                Some((nodes, ref_sols)) => {
                    if res.stats.nodes != *nodes {
                        report.fail(format!(
                            "{name}/{choice}: {} nodes vs reference {nodes}",
                            res.stats.nodes
                        ));
                    }
                    if &sols != ref_sols {
                        report.fail(format!("{name}/{choice}: solution multiset differs"));
                    }
                }
            }
            runs.push(SearchRun {
                instance: name.clone(),
                config: choice.to_string(),
                nodes: res.stats.nodes,
                solutions: res.stats.solutions,
                solution_set: sols,
            });
        }
    }
    (report, runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_gac_equivalence() {
        let report = check_single_constraint_gac(2, 11);
        assert!(report.passed(), "{:?}", report.failures);
        assert!(report.cases > 0);
    }

    #[test]
    fn quick_source_validity() {
        let report = check_source_validity(400, 12);
        assert!(report.passed(), "{:?}", report.failures);
    }

    #[test]
    fn quick_stability() {
        let report = check_stability(10, 13);
        assert!(report.passed(), "{:?}", report.failures);
    }
}
