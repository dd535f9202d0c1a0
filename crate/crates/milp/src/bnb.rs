//! Best-first branch-and-bound over LP relaxations.
//!
//! Until the first incumbent is known the search dives depth-first, always
//! taking the `x = 1` child first. After that, open nodes are expanded in
//! order of their parent's relaxation bound (deeper nodes, then older nodes,
//! win ties). Each child is re-solved from its parent's optimal basis with the
//! dual simplex when the parent is still in the warm-start cache, otherwise
//! from the root basis.

use std::cmp::Ordering as CmpOrdering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::MilpError;
use crate::model::{IpInstance, Sense};
use crate::simplex::{Clock, LpOutcome, LpProblem, LpState};

/// Distance from 0/1 under which a relaxation value counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Relative slack used when comparing objective values.
pub const OBJECTIVE_TOL: f64 = 1e-9;

/// Node budget for completing a start assignment.
const START_NODES: u64 = 200;

const CACHE_BYTES: usize = 256 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    FeasibleIncumbent,
    Infeasible,
    TimeoutNoIncumbent,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleIncumbent)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleIncumbent => "feasible-incumbent",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::TimeoutNoIncumbent => "timeout-no-incumbent",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub values: Option<Vec<bool>>,
    pub objective_value: Option<f64>,
    pub nodes_explored: u64,
    pub wall_time: Duration,
}

impl fmt::Display for SolveResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let obj = self
            .objective_value
            .map_or_else(|| "-".to_string(), |v| format!("{v}"));
        write!(
            f,
            "status={} objective={} nodes={} time={:.3}s",
            self.status,
            obj,
            self.nodes_explored,
            self.wall_time.as_secs_f64()
        )
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub time_limit: Duration,
    /// Set from another thread to stop the search at the next check.
    pub cancel: Option<Arc<AtomicBool>>,
    pub node_limit: Option<u64>,
    /// Partial assignment to complete into a first incumbent before the
    /// main search. Ignored when no feasible completion turns up in time.
    pub start: Option<Vec<(usize, bool)>>,
}

impl SolverOptions {
    pub fn with_time_limit(time_limit: Duration) -> Self {
        Self {
            time_limit,
            cancel: None,
            node_limit: None,
            start: None,
        }
    }
}

/// Optimal value and point of the continuous relaxation `0 <= x <= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpRelaxation {
    pub bound: f64,
    pub values: Vec<f64>,
}

/// Solves the LP relaxation of `ip` with every variable boxed to `[0, 1]`.
pub fn lp_relax_solve(ip: &IpInstance) -> Result<LpRelaxation, MilpError> {
    ip.validate()?;
    let prob = LpProblem::from_ip(ip);
    let lo = vec![0.0; prob.n];
    let hi = vec![1.0; prob.n];
    let (state, outcome) = LpState::solve_from_scratch(&prob, &lo, &hi, &Clock::default());
    match outcome {
        LpOutcome::Optimal => Ok(LpRelaxation {
            bound: to_user(ip.sense, state.objective(&prob)),
            values: state.structural_values(&prob).to_vec(),
        }),
        LpOutcome::Infeasible => Err(MilpError::RelaxationInfeasible),
        _ => Err(MilpError::IterationLimit(state.iterations)),
    }
}

pub fn solve(ip: &IpInstance, time_limit: Duration) -> Result<SolveResult, MilpError> {
    solve_with(ip, &SolverOptions::with_time_limit(time_limit))
}

pub fn solve_with(ip: &IpInstance, opts: &SolverOptions) -> Result<SolveResult, MilpError> {
    ip.validate()?;
    if opts.time_limit.is_zero() {
        return Err(MilpError::ZeroTimeLimit);
    }
    let started = Instant::now();
    let clock = Clock {
        deadline: started.checked_add(opts.time_limit),
        cancel: opts.cancel.clone(),
    };
    let mut incumbent = None;
    if let Some(start) = &opts.start {
        if let Some(&(var, _)) = start.iter().find(|(v, _)| *v >= ip.num_vars) {
            return Err(MilpError::StartOutOfRange { var, num_vars: ip.num_vars });
        }
        let mut completion = Search::new(ip, clock.clone(), Some(START_NODES));
        completion.fixings = start.clone();
        completion.run()?;
        incumbent = completion.incumbent;
    }
    let mut search = Search::new(ip, clock, opts.node_limit);
    search.incumbent = incumbent;
    search.run()?;
    let result = search.finish(started.elapsed());
    if let Some(values) = &result.values {
        debug_assert!(ip.is_feasible(values), "solver returned an infeasible point");
    }
    Ok(result)
}

fn to_user(sense: Sense, internal: f64) -> f64 {
    match sense {
        Sense::Minimize => internal,
        Sense::Maximize => -internal,
    }
}

#[derive(Clone, Debug)]
struct Node {
    id: u64,
    parent: Option<u64>,
    /// Full path of fixings from the root; the last entry is this node's branch.
    fixings: Vec<(usize, bool)>,
    /// Parent relaxation value (internal minimization form).
    bound: f64,
}

impl Node {
    fn depth(&self) -> usize {
        self.fixings.len()
    }
}

/// Heap wrapper: smallest bound first, then deeper, then older.
struct Queued(Node);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == CmpOrdering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<CmpOrdering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> CmpOrdering {
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then(self.0.depth().cmp(&other.0.depth()))
            .then(other.0.id.cmp(&self.0.id))
    }
}

enum Frontier {
    Dive(Vec<Node>),
    Best(BinaryHeap<Queued>),
}

impl Frontier {
    fn pop(&mut self) -> Option<Node> {
        match self {
            Frontier::Dive(stack) => stack.pop(),
            Frontier::Best(heap) => heap.pop().map(|q| q.0),
        }
    }

    fn push(&mut self, node: Node) {
        match self {
            Frontier::Dive(stack) => stack.push(node),
            Frontier::Best(heap) => heap.push(Queued(node)),
        }
    }

    fn switch_to_best_first(&mut self) {
        if let Frontier::Dive(stack) = self {
            let heap = stack.drain(..).map(Queued).collect();
            *self = Frontier::Best(heap);
        }
    }
}

/// Optimal bases of recently branched nodes, keyed by node id.
struct WarmCache {
    states: HashMap<u64, (LpState, u8)>,
    order: VecDeque<u64>,
    capacity: usize,
}

impl WarmCache {
    fn new(capacity: usize) -> Self {
        Self {
            states: HashMap::new(),
            order: VecDeque::new(),
            capacity: capacity.max(1),
        }
    }

    fn insert(&mut self, id: u64, state: LpState, children: u8) {
        while self.states.len() >= self.capacity {
            match self.order.pop_front() {
                Some(old) => {
                    self.states.remove(&old);
                }
                None => break,
            }
        }
        self.order.push_back(id);
        self.states.insert(id, (state, children));
    }

    /// Clone of the parent's state; drops the entry once every child has used it.
    fn take_for_child(&mut self, parent: u64) -> Option<LpState> {
        let (state, remaining) = self.states.get_mut(&parent)?;
        *remaining -= 1;
        if *remaining == 0 {
            self.order.retain(|id| *id != parent);
            return self.states.remove(&parent).map(|(s, _)| s);
        }
        Some(state.clone())
    }
}

struct Search<'a> {
    ip: &'a IpInstance,
    prob: LpProblem,
    clock: Clock,
    node_limit: Option<u64>,
    root: Option<LpState>,
    cache: WarmCache,
    incumbent: Option<(Vec<bool>, f64)>,
    /// Fixed at the root and inherited by every node.
    fixings: Vec<(usize, bool)>,
    nodes: u64,
    next_id: u64,
    exhausted: bool,
}

impl<'a> Search<'a> {
    fn new(ip: &'a IpInstance, clock: Clock, node_limit: Option<u64>) -> Self {
        Self {
            ip,
            prob: LpProblem::from_ip(ip),
            clock,
            node_limit,
            root: None,
            cache: WarmCache::new(1),
            incumbent: None,
            fixings: Vec::new(),
            nodes: 0,
            next_id: 1,
            exhausted: false,
        }
    }

    fn internal_objective(&self, values: &[bool]) -> f64 {
        let user = self.ip.objective_value(values);
        match self.ip.sense {
            Sense::Minimize => user,
            Sense::Maximize => -user,
        }
    }

    fn prunable(&self, bound: f64) -> bool {
        match &self.incumbent {
            Some((_, best)) => bound >= best - OBJECTIVE_TOL * (1.0 + best.abs()),
            None => false,
        }
    }

    fn run(&mut self) -> Result<(), MilpError> {
        let root_node = Node {
            id: 0,
            parent: None,
            fixings: self.fixings.clone(),
            bound: f64::NEG_INFINITY,
        };
        let (lo, hi) = self.node_box(&root_node);
        let (root, outcome) = LpState::solve_from_scratch(&self.prob, &lo, &hi, &self.clock);
        self.nodes = 1;
        match outcome {
            LpOutcome::Optimal => {}
            LpOutcome::Infeasible => {
                self.exhausted = true;
                return Ok(());
            }
            LpOutcome::Interrupted => return Ok(()),
            LpOutcome::IterationLimit | LpOutcome::Unbounded => {
                return Err(MilpError::IterationLimit(root.iterations))
            }
        }
        let per_state = root.footprint_bytes().max(1);
        self.cache = WarmCache::new((CACHE_BYTES / per_state).clamp(1, 64));

        let root_node = Node {
            bound: root.objective(&self.prob),
            ..root_node
        };
        let mut frontier = if self.incumbent.is_some() {
            Frontier::Best(BinaryHeap::new())
        } else {
            Frontier::Dive(Vec::new())
        };
        self.examine(root_node, root.clone(), &mut frontier);
        self.root = Some(root);

        while let Some(node) = frontier.pop() {
            if self.clock.expired() || self.node_limit.is_some_and(|l| self.nodes >= l) {
                return Ok(());
            }
            if self.prunable(node.bound) {
                continue;
            }
            self.nodes += 1;
            let mut state = match node.parent.and_then(|p| self.cache.take_for_child(p)) {
                Some(mut s) => {
                    let &(var, up) = node.fixings.last().expect("child node has a fixing");
                    let v = if up { 1.0 } else { 0.0 };
                    s.set_bounds(&self.prob, var, v, v);
                    s
                }
                None => {
                    let mut s = self.root.clone().expect("root solved");
                    for &(var, up) in &node.fixings {
                        let v = if up { 1.0 } else { 0.0 };
                        s.set_bounds(&self.prob, var, v, v);
                    }
                    s
                }
            };
            match state.reoptimize(&self.prob, &self.clock) {
                LpOutcome::Optimal => {}
                LpOutcome::Infeasible => continue,
                LpOutcome::Interrupted => return Ok(()),
                LpOutcome::IterationLimit | LpOutcome::Unbounded => {
                    // Numerically stuck warm start: retry this node cold.
                    let (lo, hi) = self.node_box(&node);
                    let (s, o) = LpState::solve_from_scratch(&self.prob, &lo, &hi, &self.clock);
                    match o {
                        LpOutcome::Optimal => state = s,
                        LpOutcome::Infeasible => continue,
                        LpOutcome::Interrupted => return Ok(()),
                        _ => return Err(MilpError::IterationLimit(s.iterations)),
                    }
                }
            }
            let had_incumbent = self.incumbent.is_some();
            self.examine(node, state, &mut frontier);
            if !had_incumbent && self.incumbent.is_some() {
                frontier.switch_to_best_first();
            }
        }
        self.exhausted = true;
        Ok(())
    }

    fn node_box(&self, node: &Node) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![0.0; self.prob.n];
        let mut hi = vec![1.0; self.prob.n];
        for &(var, up) in &node.fixings {
            let v = if up { 1.0 } else { 0.0 };
            lo[var] = v;
            hi[var] = v;
        }
        (lo, hi)
    }

    /// Bound check, incumbent update or branching for a solved node.
    fn examine(&mut self, node: Node, state: LpState, frontier: &mut Frontier) {
        let value = state.objective(&self.prob);
        if self.prunable(value) {
            return;
        }
        let x = state.structural_values(&self.prob);
        let mut branch: Option<(usize, f64)> = None;
        for (j, &v) in x.iter().enumerate() {
            let frac = (v - v.round()).abs();
            if frac > INTEGRALITY_TOL {
                let closeness = (v - 0.5).abs();
                if branch.is_none_or(|(_, c)| closeness < c - 1e-12) {
                    branch = Some((j, closeness));
                }
            }
        }
        match branch {
            None => {
                let values: Vec<bool> = x.iter().map(|v| *v > 0.5).collect();
                if !self.ip.is_feasible(&values) {
                    return;
                }
                let obj = self.internal_objective(&values);
                let better = match &self.incumbent {
                    None => true,
                    Some((_, best)) => obj < best - OBJECTIVE_TOL * (1.0 + best.abs()),
                };
                if better {
                    self.incumbent = Some((values, obj));
                }
            }
            Some((var, _)) => {
                let mut fix_down = node.fixings.clone();
                fix_down.push((var, false));
                let mut fix_up = node.fixings;
                fix_up.push((var, true));
                let down = Node {
                    id: self.next_id,
                    parent: Some(node.id),
                    fixings: fix_down,
                    bound: value,
                };
                let up = Node {
                    id: self.next_id + 1,
                    parent: Some(node.id),
                    fixings: fix_up,
                    bound: value,
                };
                self.next_id += 2;
                self.cache.insert(node.id, state, 2);
                // Dive stack pops the up-branch first.
                frontier.push(down);
                frontier.push(up);
            }
        }
    }

    fn finish(self, wall_time: Duration) -> SolveResult {
        let status = match (&self.incumbent, self.exhausted) {
            (Some(_), true) => SolveStatus::Optimal,
            (Some(_), false) => SolveStatus::FeasibleIncumbent,
            (None, true) => SolveStatus::Infeasible,
            (None, false) => SolveStatus::TimeoutNoIncumbent,
        };
        let (values, objective_value) = match self.incumbent {
            Some((values, _)) => {
                let obj = self.ip.objective_value(&values);
                (Some(values), Some(obj))
            }
            None => (None, None),
        };
        SolveResult {
            status,
            values,
            objective_value,
            nodes_explored: self.nodes,
            wall_time,
        }
    }
}
