//! Solver core: trailed domains, literal-triggered propagation dispatch and
//! depth-first all-solutions search with binary branching.
//!
//! Branching is `var = val` / `var != val` over a static variable order with
//! smallest-value-first selection. Every branching decision (assign and
//! refute alike) counts as one search node. All propagators establish GAC, so
//! node counts are identical across propagator configurations.

use std::collections::VecDeque;
use std::time::Instant;

use crate::domain::DomainStore;
use crate::literal::{Lit, LitMap, Val, VarId};
use crate::model::Model;
use crate::trigger::{PropId, TriggerTable};

/// Node failure: a domain wiped out (or a constraint became unsatisfiable).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Failure;

pub type PropResult = Result<(), Failure>;

/// Gauge of stored supports, updated by the support stores.
#[derive(Debug, Clone, Copy, Default)]
pub struct StoredGauge {
    pub current: u64,
    pub peak: u64,
}

impl StoredGauge {
    #[inline]
    pub fn add(&mut self, n: u64) {
        self.current += n;
        if self.current > self.peak {
            self.peak = self.current;
        }
    }

    #[inline]
    pub fn sub(&mut self, n: u64) {
        debug_assert!(self.current >= n);
        self.current -= n;
    }
}

/// Mutable state shared by all propagators of one solver.
pub struct Core {
    pub doms: DomainStore,
    pub triggers: TriggerTable,
    pub litmap: LitMap,
    pub queue: VecDeque<(PropId, Lit)>,
    pub gauge: StoredGauge,
    /// Enables the expensive recomputation audits (lemma region checks,
    /// gauge bounds, full index recomputation).
    pub audit: bool,
}

impl Core {
    pub fn new(initial_domains: &[Vec<Val>]) -> Self {
        let spans: Vec<u32> = initial_domains
            .iter()
            .map(|d| d.iter().copied().max().map_or(0, |m| m + 1))
            .collect();
        let litmap = LitMap::new(&spans);
        Core {
            doms: DomainStore::new(initial_domains),
            triggers: TriggerTable::new(litmap.num_lits()),
            litmap,
            queue: VecDeque::new(),
            gauge: StoredGauge::default(),
            audit: false,
        }
    }

    /// Remove `val` from the domain of `var`, trail the deletion and schedule
    /// every propagator holding a trigger on the literal. Fails the node when
    /// the domain wipes out.
    pub fn prune(&mut self, var: VarId, val: Val) -> PropResult {
        debug_assert!(self.doms.contains(var, val), "pruning absent value");
        self.doms.remove(var, val);
        let lit = self.litmap.encode(var, val);
        let queue = &mut self.queue;
        for p in self.triggers.subscribers(lit) {
            queue.push_back((p, lit));
        }
        if self.doms.size(var) == 0 {
            return Err(Failure);
        }
        Ok(())
    }
}

/// A constraint propagator attached to one solver.
pub trait Propagator {
    /// Establish the constraint's data structures and GAC at the root.
    fn initialise(&mut self, core: &mut Core) -> PropResult;

    /// React to the pruned literal the propagator held a trigger on.
    fn propagate(&mut self, core: &mut Core, lit: Lit) -> PropResult;

    /// A new search node was entered.
    fn on_push(&mut self);

    /// Unwind per-propagator state to the most recent node marker.
    fn on_backtrack(&mut self, core: &mut Core);

    /// Full recomputation audit of internal invariants; returns a diagnostic
    /// on any discrepancy. Only meaningful after a successful propagation
    /// fixpoint.
    fn audit(&self, _core: &Core) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SearchStatus {
    Complete,
    NodeLimit,
    TimeLimit,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SearchStats {
    pub nodes: u64,
    pub solutions: u64,
    pub peak_stored_supports: u64,
    pub wall_time: f64,
    pub status: SearchStatus,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub stats: SearchStats,
    /// Collected solutions (full assignments by variable id), when requested.
    pub solutions: Option<Vec<Vec<Val>>>,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub node_limit: u64,
    pub time_limit: f64,
    pub audit: bool,
    pub collect_solutions: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            node_limit: 1_000_000,
            time_limit: 3600.0,
            audit: false,
            collect_solutions: false,
        }
    }
}

enum Abort {
    Nodes,
    Time,
}

/// One backtracking solver instance. Owns all of its state; instances share
/// nothing, so independent instances may run on separate threads.
pub struct Solver {
    pub core: Core,
    props: Vec<Box<dyn Propagator>>,
    model: Model,
    options: SolverOptions,
    nodes: u64,
    solutions: u64,
    collected: Vec<Vec<Val>>,
    deadline: Option<Instant>,
    started: Option<Instant>,
}

impl Solver {
    pub fn new(model: Model, options: SolverOptions) -> Self {
        let mut core = Core::new(&model.initial_domains);
        core.audit = options.audit;
        Solver {
            core,
            props: Vec::new(),
            model,
            options,
            nodes: 0,
            solutions: 0,
            collected: Vec::new(),
            deadline: None,
            started: None,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// The id the next registered propagator will get. Propagators are
    /// constructed with their id (they write it into trigger subscriptions),
    /// so builders reserve it before construction.
    pub fn next_prop_id(&self) -> PropId {
        PropId(self.props.len() as u32)
    }

    /// Register a propagator; returns the id used in trigger subscriptions.
    pub fn add_propagator(&mut self, prop: Box<dyn Propagator>) -> PropId {
        self.props.push(prop);
        PropId(self.props.len() as u32 - 1)
    }

    /// Record a restore point on the domain trail and in every propagator.
    pub fn push_node(&mut self) {
        self.core.doms.push_marker();
        for p in &mut self.props {
            p.on_push();
        }
    }

    /// Unwind propagators (in reverse registration order) and domains to the
    /// most recent marker.
    pub fn backtrack_node(&mut self) {
        self.core.queue.clear();
        for p in self.props.iter_mut().rev() {
            p.on_backtrack(&mut self.core);
        }
        self.core.doms.restore_to_marker();
    }

    /// Run every propagator's `initialise` followed by a propagation
    /// fixpoint. Returns `Err(Failure)` when the root is inconsistent.
    pub fn initialise(&mut self) -> PropResult {
        for i in 0..self.props.len() {
            self.props[i].initialise(&mut self.core)?;
        }
        self.drain()
    }

    /// Process the event queue to fixpoint.
    pub fn drain(&mut self) -> PropResult {
        while let Some((pid, lit)) = self.core.queue.pop_front() {
            let r = self.props[pid.0 as usize].propagate(&mut self.core, lit);
            if r.is_err() {
                self.core.queue.clear();
                return r;
            }
        }
        if self.core.audit {
            self.run_audits();
        }
        Ok(())
    }

    fn run_audits(&self) {
        for (i, p) in self.props.iter().enumerate() {
            if let Err(msg) = p.audit(&self.core) {
                panic!("propagator {i} state audit failed: {msg}");
            }
        }
    }

    /// Prune a value as an external event (a branching decision or a test
    /// driver) and leave the resulting events on the queue.
    pub fn prune_external(&mut self, var: VarId, val: Val) -> PropResult {
        self.core.prune(var, val)
    }

    /// Depth-first search for all solutions. The solver must be fresh; the
    /// root node is pushed, initialised and fully restored before returning.
    pub fn solve_all(&mut self) -> SearchResult {
        let start = Instant::now();
        self.started = Some(start);
        self.deadline = Some(start + std::time::Duration::from_secs_f64(self.options.time_limit));
        self.nodes = 0;
        self.solutions = 0;
        self.collected.clear();

        self.push_node();
        let status = if self.initialise().is_ok() {
            match self.dfs() {
                Ok(()) => SearchStatus::Complete,
                Err(Abort::Nodes) => SearchStatus::NodeLimit,
                Err(Abort::Time) => SearchStatus::TimeLimit,
            }
        } else {
            SearchStatus::Complete
        };
        self.backtrack_node();

        let stats = SearchStats {
            nodes: self.nodes,
            solutions: self.solutions,
            peak_stored_supports: self.core.gauge.peak,
            wall_time: start.elapsed().as_secs_f64(),
            status,
        };
        SearchResult {
            stats,
            solutions: if self.options.collect_solutions {
                Some(std::mem::take(&mut self.collected))
            } else {
                None
            },
        }
    }

    fn next_branch_var(&self) -> Option<VarId> {
        self.model
            .branch_order
            .iter()
            .copied()
            .find(|&x| self.core.doms.size(x) > 1)
    }

    fn dfs(&mut self) -> Result<(), Abort> {
        let Some(var) = self.next_branch_var() else {
            self.record_solution();
            return Ok(());
        };
        let val = self.core.doms.min(var).expect("non-empty domain");
        self.branch(var, val, true)?;
        self.branch(var, val, false)
    }

    fn branch(&mut self, var: VarId, val: Val, assign: bool) -> Result<(), Abort> {
        self.nodes += 1;
        if self.nodes > self.options.node_limit {
            return Err(Abort::Nodes);
        }
        if self.nodes % 64 == 0 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    return Err(Abort::Time);
                }
            }
        }
        self.push_node();
        let consistent = self.apply_branch(var, val, assign).and_then(|_| self.drain());
        let r = if consistent.is_ok() { self.dfs() } else { Ok(()) };
        self.backtrack_node();
        r
    }

    fn apply_branch(&mut self, var: VarId, val: Val, assign: bool) -> PropResult {
        if assign {
            let others: Vec<Val> = self.core.doms.iter(var).filter(|&v| v != val).collect();
            for v in others {
                self.core.prune(var, v)?;
            }
            Ok(())
        } else {
            self.core.prune(var, val)
        }
    }

    fn record_solution(&mut self) {
        let assignment: Vec<Val> = (0..self.model.num_vars())
            .map(|x| {
                self.core
                    .doms
                    .assigned_value(VarId(x as u32))
                    .expect("all variables assigned at a leaf")
            })
            .collect();
        // Guard against propagator unsoundness: every reported solution is
        // re-checked against the declarative constraint definitions.
        assert!(
            self.model.satisfies(&assignment),
            "solver produced an assignment violating the model: {assignment:?}"
        );
        self.solutions += 1;
        if self.options.collect_solutions {
            self.collected.push(assignment);
        }
    }
}
