//! Bounded-variable revised simplex over a product-form basis inverse.
//!
//! The relaxation is put into the form `A x + s = b` where every row owns one
//! logical variable `s`. Its bounds encode the row relation: `<=` rows get
//! `s in [0, inf)`, `>=` rows `s in (-inf, 0]`, and equality rows the fixed
//! box `[0, 0]`. Structural columns carry their own `[lower, upper]` box, so
//! branching only ever tightens bounds and never adds rows.
//!
//! Phase one introduces one artificial column per row whose logical starts
//! outside its box and minimizes their sum. Re-optimization after a bound
//! change runs the dual simplex from the previous optimal basis.
//!
//! The inverse lives in an eta file that is rebuilt from the identity every
//! `REFRESH_EVERY` pivots, so its size tracks the sparsity of the basis.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use crate::factor::EtaFile;
use crate::model::{IpInstance, Relation, Sense};

const PIVOT_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PHASE_ONE_TOL: f64 = 1e-7;
const REFRESH_EVERY: u64 = 100;
const DRIFT_TOL: f64 = 1e-7;
const BLAND_AFTER: u32 = 40;

/// Deadline plus optional cooperative cancellation flag.
#[derive(Clone, Debug, Default)]
pub(crate) struct Clock {
    pub deadline: Option<Instant>,
    pub cancel: Option<Arc<AtomicBool>>,
}

impl Clock {
    pub fn expired(&self) -> bool {
        if let Some(flag) = &self.cancel {
            if flag.load(Ordering::Relaxed) {
                return true;
            }
        }
        matches!(self.deadline, Some(d) if Instant::now() >= d)
    }
}

/// Immutable column-wise copy of the constraint matrix.
#[derive(Debug)]
pub(crate) struct LpProblem {
    pub n: usize,
    pub m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    slack_lo: Vec<f64>,
    slack_hi: Vec<f64>,
    /// Minimization costs of the structural columns.
    cost: Vec<f64>,
}

impl LpProblem {
    pub fn from_ip(ip: &IpInstance) -> Self {
        let n = ip.num_vars;
        let m = ip.constraints.len();
        let mut cols = vec![Vec::new(); n];
        let mut rhs = Vec::with_capacity(m);
        let mut slack_lo = Vec::with_capacity(m);
        let mut slack_hi = Vec::with_capacity(m);
        for (i, row) in ip.constraints.iter().enumerate() {
            for &(j, a) in &row.terms {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
            rhs.push(row.rhs);
            let (lo, hi) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            slack_lo.push(lo);
            slack_hi.push(hi);
        }
        let sign = match ip.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; n];
        for &(j, c) in &ip.objective {
            cost[j] = sign * c;
        }
        Self {
            n,
            m,
            cols,
            rhs,
            slack_lo,
            slack_hi,
            cost,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum VarStatus {
    Basic(usize),
    AtLower,
    AtUpper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LpOutcome {
    Optimal,
    Infeasible,
    Interrupted,
    IterationLimit,
    Unbounded,
}

enum PrimalStep {
    Optimal,
    Unbounded,
    Continue,
}

enum DualStep {
    Feasible,
    Infeasible,
    Continue,
}

/// Simplex working state: bounds, values, basis and its inverse.
#[derive(Clone, Debug)]
pub(crate) struct LpState {
    m: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    status: Vec<VarStatus>,
    basis: Vec<usize>,
    etas: EtaFile,
    /// Artificial columns as `(row, sign)`.
    artificials: Vec<(usize, f64)>,
    since_refresh: u64,
    /// Eta count and fill right after the last rebuild.
    fresh_len: usize,
    fresh_nnz: usize,
    degenerate_streak: u32,
    bland: bool,
    pub iterations: u64,
}

impl LpState {
    /// Approximate heap footprint, used to size warm-start caches.
    pub fn footprint_bytes(&self) -> usize {
        self.etas.bytes() + 8 * (5 * self.x.len() + self.basis.len())
    }

    /// Solves the relaxation with the given structural bounds from a slack basis.
    pub fn solve_from_scratch(
        prob: &LpProblem,
        lower: &[f64],
        upper: &[f64],
        clock: &Clock,
    ) -> (LpState, LpOutcome) {
        let mut state = Self::initial(prob, lower, upper);
        let outcome = state.two_phase(prob, clock);
        (state, outcome)
    }

    fn initial(prob: &LpProblem, lower: &[f64], upper: &[f64]) -> Self {
        let (n, m) = (prob.n, prob.m);
        let mut lo: Vec<f64> = lower.to_vec();
        let mut hi: Vec<f64> = upper.to_vec();
        lo.extend_from_slice(&prob.slack_lo);
        hi.extend_from_slice(&prob.slack_hi);
        let mut x: Vec<f64> = lower.to_vec();
        x.resize(n + m, 0.0);
        let mut status = vec![VarStatus::AtLower; n + m];

        let mut activity = prob.rhs.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for &(r, a) in &prob.cols[j] {
                    activity[r] -= a * x[j];
                }
            }
        }

        let mut basis = vec![0; m];
        let mut etas = EtaFile::default();
        let mut artificials = Vec::new();
        for i in 0..m {
            let r = activity[i];
            let s = n + i;
            if r >= lo[s] - PRIMAL_TOL && r <= hi[s] + PRIMAL_TOL {
                x[s] = r;
                status[s] = VarStatus::Basic(i);
                basis[i] = s;
            } else {
                let clamped = r.clamp(lo[s], hi[s]);
                x[s] = clamped;
                status[s] = if clamped == lo[s] {
                    VarStatus::AtLower
                } else {
                    VarStatus::AtUpper
                };
                let sign = if r > clamped { 1.0 } else { -1.0 };
                let a = n + m + artificials.len();
                artificials.push((i, sign));
                lo.push(0.0);
                hi.push(f64::INFINITY);
                x.push((r - clamped).abs());
                status.push(VarStatus::Basic(i));
                basis[i] = a;
                etas.push_unit(i, sign);
            }
        }

        let total = x.len();
        let mut cost = vec![0.0; total];
        for c in cost.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        LpState {
            m,
            lower: lo,
            upper: hi,
            cost,
            x,
            status,
            basis,
            etas,
            artificials,
            since_refresh: 0,
            fresh_len: 0,
            fresh_nnz: 0,
            degenerate_streak: 0,
            bland: false,
            iterations: 0,
        }
    }

    fn two_phase(&mut self, prob: &LpProblem, clock: &Clock) -> LpOutcome {
        if !self.artificials.is_empty() {
            match self.primal(prob, clock) {
                LpOutcome::Optimal => {}
                other => return other,
            }
            let infeasibility: f64 = (prob.n + prob.m..self.x.len()).map(|j| self.x[j]).sum();
            if infeasibility > PHASE_ONE_TOL {
                return LpOutcome::Infeasible;
            }
            self.retire_artificials(prob);
        }
        self.install_phase_two_costs(prob);
        self.primal(prob, clock)
    }

    fn install_phase_two_costs(&mut self, prob: &LpProblem) {
        for c in self.cost.iter_mut() {
            *c = 0.0;
        }
        self.cost[..prob.n].copy_from_slice(&prob.cost);
    }

    /// Fixes artificials at zero, pivoting basic ones out where possible.
    fn retire_artificials(&mut self, prob: &LpProblem) {
        let first = prob.n + prob.m;
        for a in first..self.x.len() {
            if let VarStatus::Basic(r) = self.status[a] {
                let row = self.binv_row(r);
                let mut best: Option<(usize, f64)> = None;
                for j in 0..first {
                    if matches!(self.status[j], VarStatus::Basic(_)) || self.lower[j] == self.upper[j] {
                        continue;
                    }
                    let alpha = self.row_entry(prob, &row, j);
                    if alpha.abs() > 1e-7 && best.is_none_or(|(_, b)| alpha.abs() > b.abs()) {
                        best = Some((j, alpha));
                    }
                }
                if let Some((j, _)) = best {
                    let w = self.ftran(prob, j);
                    self.pivot(r, j, &w);
                    self.x[a] = 0.0;
                    self.status[a] = VarStatus::AtLower;
                }
            }
            self.lower[a] = 0.0;
            self.upper[a] = 0.0;
            if !matches!(self.status[a], VarStatus::Basic(_)) {
                self.x[a] = 0.0;
            }
        }
        self.refresh(prob);
    }

    /// Objective of the structural part under the minimization costs.
    pub fn objective(&self, prob: &LpProblem) -> f64 {
        (0..prob.n).map(|j| prob.cost[j] * self.x[j]).sum()
    }

    pub fn structural_values(&self, prob: &LpProblem) -> &[f64] {
        &self.x[..prob.n]
    }

    /// Tightens the box of structural column `j`. Only valid on a state whose
    /// last solve finished with `Optimal`; call [`LpState::reoptimize`] afterwards.
    pub fn set_bounds(&mut self, prob: &LpProblem, j: usize, lo: f64, hi: f64) {
        self.lower[j] = lo;
        self.upper[j] = hi;
        if let VarStatus::Basic(_) = self.status[j] {
            return;
        }
        let target = match self.status[j] {
            VarStatus::AtUpper if hi.is_finite() && lo != hi => hi,
            _ => lo,
        };
        let delta = target - self.x[j];
        if delta != 0.0 {
            let w = self.ftran(prob, j);
            for (i, wi) in w.iter().enumerate() {
                if *wi != 0.0 {
                    self.x[self.basis[i]] -= wi * delta;
                }
            }
            self.x[j] = target;
        }
        self.status[j] = if target == lo {
            VarStatus::AtLower
        } else {
            VarStatus::AtUpper
        };
    }

    /// Restores optimality after bound changes: dual simplex, then a primal cleanup.
    pub fn reoptimize(&mut self, prob: &LpProblem, clock: &Clock) -> LpOutcome {
        self.bland = false;
        self.degenerate_streak = 0;
        match self.dual(prob, clock) {
            LpOutcome::Optimal => self.primal(prob, clock),
            other => other,
        }
    }

    fn iteration_cap(&self) -> u64 {
        20 * self.x.len() as u64 + 10_000
    }

    fn primal(&mut self, prob: &LpProblem, clock: &Clock) -> LpOutcome {
        let cap = self.iterations + self.iteration_cap();
        loop {
            if self.iterations % 32 == 0 && clock.expired() {
                return LpOutcome::Interrupted;
            }
            if self.iterations > cap {
                return LpOutcome::IterationLimit;
            }
            match self.primal_step(prob) {
                PrimalStep::Optimal => {
                    self.refresh(prob);
                    return LpOutcome::Optimal;
                }
                PrimalStep::Unbounded => return LpOutcome::Unbounded,
                PrimalStep::Continue => {}
            }
        }
    }

    fn primal_step(&mut self, prob: &LpProblem) -> PrimalStep {
        let y = self.duals();
        let mut entering: Option<(usize, f64, f64)> = None; // (var, score, direction)
        for j in 0..self.x.len() {
            let dir = match self.status[j] {
                VarStatus::Basic(_) => continue,
                _ if self.lower[j] == self.upper[j] => continue,
                VarStatus::AtLower => 1.0,
                VarStatus::AtUpper => -1.0,
            };
            let d = self.reduced_cost(prob, &y, j);
            let score = -dir * d;
            if score > DUAL_TOL {
                if self.bland {
                    entering = Some((j, score, dir));
                    break;
                }
                if entering.is_none_or(|(_, s, _)| score > s) {
                    entering = Some((j, score, dir));
                }
            }
        }
        let Some((q, _, dir)) = entering else {
            return PrimalStep::Optimal;
        };

        let w = self.ftran(prob, q);
        let leaving = self.primal_ratio(&w, dir);
        let flip = self.upper[q] - self.lower[q];
        self.iterations += 1;

        let (t, row) = match leaving {
            Some((r, t)) if t < flip => (t, Some(r)),
            _ if flip.is_finite() => (flip, None),
            _ => return PrimalStep::Unbounded,
        };

        for (i, wi) in w.iter().enumerate() {
            if *wi != 0.0 {
                self.x[self.basis[i]] -= dir * wi * t;
            }
        }
        match row {
            None => {
                if dir > 0.0 {
                    self.x[q] = self.upper[q];
                    self.status[q] = VarStatus::AtUpper;
                } else {
                    self.x[q] = self.lower[q];
                    self.status[q] = VarStatus::AtLower;
                }
            }
            Some(r) => {
                self.x[q] += dir * t;
                let k = self.basis[r];
                if -dir * w[r] < 0.0 {
                    self.x[k] = self.lower[k];
                    self.status[k] = VarStatus::AtLower;
                } else {
                    self.x[k] = self.upper[k];
                    self.status[k] = VarStatus::AtUpper;
                }
                self.pivot(r, q, &w);
            }
        }
        self.note_step(t, prob);
        PrimalStep::Continue
    }

    /// Two-pass (Harris) ratio test; Bland mode uses the exact minimum with
    /// lowest-index ties.
    fn primal_ratio(&self, w: &[f64], dir: f64) -> Option<(usize, f64)> {
        let limit = |i: usize, tol: f64| -> Option<f64> {
            let delta = -dir * w[i];
            if delta.abs() <= PIVOT_TOL {
                return None;
            }
            let k = self.basis[i];
            if delta < 0.0 {
                self.lower[k]
                    .is_finite()
                    .then(|| (self.x[k] - self.lower[k] + tol) / -delta)
            } else {
                self.upper[k]
                    .is_finite()
                    .then(|| (self.upper[k] - self.x[k] + tol) / delta)
            }
        };

        if self.bland {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if let Some(r) = limit(i, 0.0) {
                    let r = r.max(0.0);
                    let better = match best {
                        None => true,
                        Some((bi, br)) => r < br - 1e-12 || (r <= br + 1e-12 && self.basis[i] < self.basis[bi]),
                    };
                    if better {
                        best = Some((i, r));
                    }
                }
            }
            return best;
        }

        let mut theta_max = f64::INFINITY;
        for i in 0..self.m {
            if let Some(r) = limit(i, PRIMAL_TOL) {
                theta_max = theta_max.min(r);
            }
        }
        if !theta_max.is_finite() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            if let Some(r) = limit(i, 0.0) {
                if r <= theta_max && best.is_none_or(|(bi, _)| w[i].abs() > w[bi].abs()) {
                    best = Some((i, r.max(0.0)));
                }
            }
        }
        best
    }

    fn dual(&mut self, prob: &LpProblem, clock: &Clock) -> LpOutcome {
        let cap = self.iterations + self.iteration_cap();
        loop {
            if self.iterations % 32 == 0 && clock.expired() {
                return LpOutcome::Interrupted;
            }
            if self.iterations > cap {
                return LpOutcome::IterationLimit;
            }
            match self.dual_step(prob) {
                DualStep::Feasible => return LpOutcome::Optimal,
                DualStep::Infeasible => return LpOutcome::Infeasible,
                DualStep::Continue => {}
            }
        }
    }

    fn dual_step(&mut self, prob: &LpProblem) -> DualStep {
        // Leaving row: largest bound violation.
        let mut leaving: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let k = self.basis[i];
            let viol = if self.x[k] < self.lower[k] - PRIMAL_TOL {
                self.lower[k] - self.x[k]
            } else if self.x[k] > self.upper[k] + PRIMAL_TOL {
                self.x[k] - self.upper[k]
            } else {
                continue;
            };
            let better = match leaving {
                None => true,
                Some((li, v)) if self.bland => k < self.basis[li] && v.is_finite(),
                Some((_, v)) => viol > v,
            };
            if better {
                leaving = Some((i, viol));
            }
        }
        let Some((r, _)) = leaving else {
            return DualStep::Feasible;
        };
        let k = self.basis[r];
        let below = self.x[k] < self.lower[k];
        let target = if below { self.lower[k] } else { self.upper[k] };

        let rho = self.binv_row(r);
        let y = self.duals();
        let mut entering: Option<(usize, f64, f64)> = None; // (var, ratio, |alpha|)
        for j in 0..self.x.len() {
            let at_lower = match self.status[j] {
                VarStatus::Basic(_) => continue,
                _ if self.lower[j] == self.upper[j] => continue,
                VarStatus::AtLower => true,
                VarStatus::AtUpper => false,
            };
            let alpha = self.row_entry(prob, &rho, j);
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            // x_r moves by -alpha * dx_j; at-lower columns may only increase.
            let eligible = match (below, at_lower) {
                (true, true) => alpha < 0.0,
                (true, false) => alpha > 0.0,
                (false, true) => alpha > 0.0,
                (false, false) => alpha < 0.0,
            };
            if !eligible {
                continue;
            }
            let d = self.reduced_cost(prob, &y, j);
            let slack = if at_lower { d.max(0.0) } else { (-d).max(0.0) };
            let ratio = slack / alpha.abs();
            let better = match entering {
                None => true,
                Some((_, br, ba)) => {
                    if self.bland {
                        ratio < br - 1e-12
                    } else {
                        ratio < br - 1e-12 || (ratio <= br + 1e-12 && alpha.abs() > ba)
                    }
                }
            };
            if better {
                entering = Some((j, ratio, alpha.abs()));
            }
        }
        let Some((q, ratio, _)) = entering else {
            return DualStep::Infeasible;
        };

        let w = self.ftran(prob, q);
        if w[r].abs() <= PIVOT_TOL {
            // Stale inverse: rebuild it and retry from fresh values.
            self.reinvert(prob);
            self.refresh(prob);
            self.iterations += 1;
            return DualStep::Continue;
        }
        let theta = (self.x[k] - target) / w[r];
        for (i, wi) in w.iter().enumerate() {
            if *wi != 0.0 {
                self.x[self.basis[i]] -= wi * theta;
            }
        }
        self.x[q] += theta;
        self.x[k] = target;
        self.status[k] = if below {
            VarStatus::AtLower
        } else {
            VarStatus::AtUpper
        };
        self.pivot(r, q, &w);
        self.iterations += 1;
        self.note_step(ratio, prob);
        DualStep::Continue
    }

    fn note_step(&mut self, step: f64, prob: &LpProblem) {
        if step <= 1e-12 {
            self.degenerate_streak += 1;
            if self.degenerate_streak > BLAND_AFTER {
                self.bland = true;
            }
        } else {
            self.degenerate_streak = 0;
            self.bland = false;
        }
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_EVERY {
            self.refresh(prob);
        }
    }

    #[inline]
    fn for_col(&self, prob: &LpProblem, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < prob.n {
            for &(r, a) in &prob.cols[j] {
                f(r, a);
            }
        } else if j < prob.n + prob.m {
            f(j - prob.n, 1.0);
        } else {
            let (r, s) = self.artificials[j - prob.n - prob.m];
            f(r, s);
        }
    }

    /// `B^-1 a_j`.
    fn ftran(&self, prob: &LpProblem, j: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        self.for_col(prob, j, |r, a| w[r] += a);
        self.etas.ftran(&mut w);
        w
    }

    /// Row `r` of `B^-1`.
    fn binv_row(&self, r: usize) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        y[r] = 1.0;
        self.etas.btran(&mut y);
        y
    }

    fn row_entry(&self, prob: &LpProblem, row: &[f64], j: usize) -> f64 {
        let mut alpha = 0.0;
        self.for_col(prob, j, |r, a| alpha += row[r] * a);
        alpha
    }

    /// Dual vector `c_B^T B^-1`.
    fn duals(&self) -> Vec<f64> {
        let mut y: Vec<f64> = self.basis.iter().map(|&k| self.cost[k]).collect();
        if y.iter().any(|c| *c != 0.0) {
            self.etas.btran(&mut y);
        }
        y
    }

    fn reduced_cost(&self, prob: &LpProblem, y: &[f64], j: usize) -> f64 {
        let mut d = self.cost[j];
        self.for_col(prob, j, |r, a| d -= y[r] * a);
        d
    }

    /// Basis change at row `r`: column `q` enters with `w = B^-1 a_q`.
    fn pivot(&mut self, r: usize, q: usize, w: &[f64]) {
        self.etas.push(r, w);
        let old = self.basis[r];
        if self.status[old] == VarStatus::Basic(r) {
            // Caller sets the leaving status; this guards the degenerate swap.
            self.status[old] = VarStatus::AtLower;
        }
        self.basis[r] = q;
        self.status[q] = VarStatus::Basic(r);
    }

    /// Rebuilds the inverse if it has grown and recomputes basic values.
    fn refresh(&mut self, prob: &LpProblem) {
        self.since_refresh = 0;
        if self.etas.len() > self.fresh_len || self.etas.nnz() > 2 * self.fresh_nnz + self.m {
            self.reinvert(prob);
        }
        let drift = self.recompute_basics(prob);
        if drift > DRIFT_TOL && self.reinvert(prob) {
            self.recompute_basics(prob);
        }
    }

    fn recompute_basics(&mut self, prob: &LpProblem) -> f64 {
        let m = self.m;
        let mut r = prob.rhs.clone();
        for j in 0..self.x.len() {
            if matches!(self.status[j], VarStatus::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            let xj = self.x[j];
            self.for_col(prob, j, |row, a| r[row] -= a * xj);
        }
        self.etas.ftran(&mut r);
        let mut drift: f64 = 0.0;
        for (i, v) in r.into_iter().enumerate().take(m) {
            let k = self.basis[i];
            drift = drift.max((self.x[k] - v).abs());
            self.x[k] = v;
        }
        drift
    }

    /// Rebuilds the eta file from the identity by pivoting every non-slack
    /// basic column into a row whose slack is nonbasic. Columns that turn out
    /// dependent are swapped for slacks; returns false when that happened.
    fn reinvert(&mut self, prob: &LpProblem) -> bool {
        let (n, m) = (prob.n, self.m);
        let is_slack = |k: usize| k >= n && k < n + m;
        let mut taken = vec![false; m];
        let mut columns = Vec::new();
        for &k in &self.basis {
            if is_slack(k) {
                taken[k - n] = true;
            } else {
                columns.push(k);
            }
        }
        let nnz = |k: usize| {
            let mut c = 0;
            self.for_col(prob, k, |_, _| c += 1);
            c
        };
        columns.sort_by_key(|&k| (nnz(k), k));

        let mut basis: Vec<usize> = (0..m).map(|i| n + i).collect();
        self.etas.clear();
        let mut dropped = Vec::new();
        for k in columns {
            let w = self.ftran(prob, k);
            let mut best: Option<(usize, f64)> = None;
            for (i, wi) in w.iter().enumerate() {
                if !taken[i] && wi.abs() > best.map_or(1e-9, |(_, b)| b) {
                    best = Some((i, wi.abs()));
                }
            }
            match best {
                Some((r, _)) => {
                    self.etas.push(r, &w);
                    taken[r] = true;
                    basis[r] = k;
                }
                None => dropped.push(k),
            }
        }
        for k in &dropped {
            let target = if self.x[*k] >= self.upper[*k] { self.upper[*k] } else { self.lower[*k] };
            let target = if target.is_finite() { target } else { 0.0 };
            self.x[*k] = target;
            self.status[*k] = if target == self.upper[*k] && target != self.lower[*k] {
                VarStatus::AtUpper
            } else {
                VarStatus::AtLower
            };
        }
        for (i, &k) in basis.iter().enumerate() {
            self.status[k] = VarStatus::Basic(i);
        }
        self.basis = basis;
        self.fresh_len = self.etas.len();
        self.fresh_nnz = self.etas.nnz();
        dropped.is_empty()
    }
}
