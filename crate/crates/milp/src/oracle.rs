//! Exhaustive enumeration and random instance generation used to check the
//! solver against ground truth (`selftest` and the integration tests).

use rand::Rng;

use crate::model::{IpInstance, Relation, Sense};

/// Largest instance [`brute_force`] will enumerate.
pub const MAX_ENUM_VARS: usize = 20;

/// Optimal objective and the first optimal assignment in counting order, or
/// `None` when no assignment is feasible.
pub fn brute_force(ip: &IpInstance) -> Option<(f64, Vec<bool>)> {
    assert!(ip.num_vars <= MAX_ENUM_VARS, "too many variables to enumerate");
    let mut best: Option<(f64, Vec<bool>)> = None;
    let mut values = vec![false; ip.num_vars];
    for mask in 0u32..(1u32 << ip.num_vars) {
        for (i, v) in values.iter_mut().enumerate() {
            *v = mask >> i & 1 == 1;
        }
        if !ip.is_feasible(&values) {
            continue;
        }
        let obj = ip.objective_value(&values);
        let better = match &best {
            None => true,
            Some((b, _)) => match ip.sense {
                Sense::Maximize => obj > *b,
                Sense::Minimize => obj < *b,
            },
        };
        if better {
            best = Some((obj, values.clone()));
        }
    }
    best
}

/// A random pure 0/1 program with integer coefficients in `[-10, 10]`.
///
/// Right-hand sides are drawn around the row's activity at a random point so
/// that a good share of instances is feasible.
pub fn random_ip<R: Rng + ?Sized>(rng: &mut R, max_vars: usize, max_rows: usize) -> IpInstance {
    let n = rng.random_range(1..=max_vars);
    let sense = if rng.random_bool(0.5) {
        Sense::Maximize
    } else {
        Sense::Minimize
    };
    let mut ip = IpInstance::new(n, sense);
    ip.objective = (0..n)
        .map(|i| (i, rng.random_range(-10..=10) as f64))
        .filter(|&(_, c)| c != 0.0)
        .collect();
    let anchor: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let rows = rng.random_range(0..=max_rows);
    for _ in 0..rows {
        let mut terms = Vec::new();
        for i in 0..n {
            if rng.random_bool(0.6) {
                let c = rng.random_range(-10..=10);
                if c != 0 {
                    terms.push((i, c as f64));
                }
            }
        }
        if terms.is_empty() {
            terms.push((rng.random_range(0..n), rng.random_range(1..=10) as f64));
        }
        let at_anchor: f64 = terms
            .iter()
            .filter(|&&(i, _)| anchor[i])
            .map(|&(_, c)| c)
            .sum();
        let relation = match rng.random_range(0..10) {
            0 => Relation::Eq,
            1..=6 => Relation::Le,
            _ => Relation::Ge,
        };
        let jitter = rng.random_range(-4..=4) as f64;
        let rhs = match relation {
            Relation::Eq if rng.random_bool(0.7) => at_anchor,
            _ => at_anchor + jitter,
        };
        ip.add_constraint(terms, relation, rhs);
    }
    ip
}
