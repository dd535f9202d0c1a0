//! 0/1 linear program representation.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;

use crate::error::ModelError;

/// Optimization direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// A single row `sum(coef * x[var]) <relation> rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Self {
            terms,
            relation,
            rhs,
        }
    }

    /// Row activity for a 0/1 assignment.
    pub fn activity(&self, values: &[bool]) -> f64 {
        self.terms
            .iter()
            .filter(|(v, _)| values[*v])
            .map(|(_, c)| *c)
            .sum()
    }

    /// True when the row holds for `values` up to a `1e-9` relative tolerance.
    pub fn is_satisfied(&self, values: &[bool]) -> bool {
        let lhs = self.activity(values);
        let tol = 1e-9 * (1.0 + self.rhs.abs());
        match self.relation {
            Relation::Le => lhs <= self.rhs + tol,
            Relation::Ge => lhs >= self.rhs - tol,
            Relation::Eq => (lhs - self.rhs).abs() <= tol,
        }
    }
}

/// A pure binary linear program.
///
/// Every variable is implicitly bounded to `{0, 1}`. Constraint rows and the
/// objective are stored sparsely as `(variable index, coefficient)` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpInstance {
    pub num_vars: usize,
    pub objective: Vec<(usize, f64)>,
    pub sense: Sense,
    pub constraints: Vec<LinearConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_names: Option<Vec<String>>,
}

impl IpInstance {
    pub fn new(num_vars: usize, sense: Sense) -> Self {
        Self {
            num_vars,
            objective: Vec::new(),
            sense,
            constraints: Vec::new(),
            var_names: None,
        }
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints
            .push(LinearConstraint::new(terms, relation, rhs));
    }

    /// Name of variable `var`, falling back to the synthetic `x{var}`.
    pub fn var_name(&self, var: usize) -> String {
        match &self.var_names {
            Some(names) => names[var].clone(),
            None => format!("x{var}"),
        }
    }

    /// Number of non-zero entries across the constraint matrix.
    pub fn num_nonzeros(&self) -> usize {
        self.constraints.iter().map(|c| c.terms.len()).sum()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if let Some(names) = &self.var_names {
            if names.len() != self.num_vars {
                return Err(ModelError::NameCount {
                    expected: self.num_vars,
                    found: names.len(),
                });
            }
        }
        check_terms(&self.objective, self.num_vars, None)?;
        for (row, c) in self.constraints.iter().enumerate() {
            if c.terms.is_empty() {
                return Err(ModelError::EmptyRow { row });
            }
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFinite { row: Some(row) });
            }
            check_terms(&c.terms, self.num_vars, Some(row))?;
        }
        Ok(())
    }

    /// Objective value of a 0/1 assignment.
    pub fn objective_value(&self, values: &[bool]) -> f64 {
        self.objective
            .iter()
            .filter(|(v, _)| values[*v])
            .map(|(_, c)| *c)
            .sum()
    }

    /// Index of the first violated row, if any.
    pub fn first_violation(&self, values: &[bool]) -> Option<usize> {
        self.constraints
            .iter()
            .position(|c| !c.is_satisfied(values))
    }

    pub fn is_feasible(&self, values: &[bool]) -> bool {
        values.len() == self.num_vars && self.first_violation(values).is_none()
    }

    /// True when `a` is strictly better than `b` under this instance's sense.
    pub fn improves(&self, a: f64, b: f64) -> bool {
        let tol = 1e-9 * (1.0 + b.abs());
        match self.sense {
            Sense::Maximize => a > b + tol,
            Sense::Minimize => a < b - tol,
        }
    }
}

fn check_terms(terms: &[(usize, f64)], num_vars: usize, row: Option<usize>) -> Result<(), ModelError> {
    let mut seen = HashSet::with_capacity(terms.len());
    for &(var, coef) in terms {
        if var >= num_vars {
            return Err(ModelError::VarOutOfRange { var, num_vars, row });
        }
        if !seen.insert(var) {
            return Err(ModelError::DuplicateVar { var, row });
        }
        if !coef.is_finite() {
            return Err(ModelError::NonFinite { row });
        }
    }
    Ok(())
}
