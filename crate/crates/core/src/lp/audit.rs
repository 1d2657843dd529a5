use std::fmt;

use super::{LpError, StandardLp};

/// Which constraint of a [`StandardLp`] a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintRef {
    Equality(usize),
    Inequality(usize),
    LowerBound(usize),
    UpperBound(usize),
}

impl fmt::Display for ConstraintRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintRef::Equality(i) => write!(f, "equality row {i}"),
            ConstraintRef::Inequality(i) => write!(f, "inequality row {i}"),
            ConstraintRef::LowerBound(j) => write!(f, "lower bound of column {j}"),
            ConstraintRef::UpperBound(j) => write!(f, "upper bound of column {j}"),
        }
    }
}

/// A violated constraint. For rows the residual is `row·x − rhs`; for bounds
/// it is `x − bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub constraint: ConstraintRef,
    pub residual: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} residual {:+.3e}", self.constraint, self.residual)
    }
}

/// Lists every row and bound of `problem` that `x` violates by more than
/// `feas_tol`.
pub fn check_feasible(
    problem: &StandardLp,
    x: &[f64],
    feas_tol: f64,
) -> Result<Vec<Violation>, LpError> {
    if x.len() != problem.num_vars {
        return Err(LpError::Structural(format!(
            "point has {} entries, problem has {} variables",
            x.len(),
            problem.num_vars
        )));
    }
    let mut report = Vec::new();
    for (i, row) in problem.eq_rows.iter().enumerate() {
        let residual = row.dot(x) - row.rhs;
        if residual.abs() > feas_tol || residual.is_nan() {
            report.push(Violation {
                constraint: ConstraintRef::Equality(i),
                residual,
            });
        }
    }
    for (i, row) in problem.ub_rows.iter().enumerate() {
        let residual = row.dot(x) - row.rhs;
        if residual > feas_tol || residual.is_nan() {
            report.push(Violation {
                constraint: ConstraintRef::Inequality(i),
                residual,
            });
        }
    }
    for (j, (&v, &(lo, hi))) in x.iter().zip(&problem.var_bounds).enumerate() {
        if v < lo - feas_tol || v.is_nan() {
            report.push(Violation {
                constraint: ConstraintRef::LowerBound(j),
                residual: v - lo,
            });
        }
        if v > hi + feas_tol {
            report.push(Violation {
                constraint: ConstraintRef::UpperBound(j),
                residual: v - hi,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::SparseRow;

    fn segment() -> StandardLp {
        // x1 + x2 = 1, x1 - x2 <= 0.5, x >= 0
        let mut lp = StandardLp::with_generic_vars(2);
        lp.eq_rows
            .push(SparseRow::new(vec![(0, 1.0), (1, 1.0)], 1.0));
        lp.ub_rows
            .push(SparseRow::new(vec![(0, 1.0), (1, -1.0)], 0.5));
        lp
    }

    #[test]
    fn feasible_point_has_empty_report() {
        assert!(check_feasible(&segment(), &[0.5, 0.5], 1e-7)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn equality_violation_reports_exact_residual() {
        let report = check_feasible(&segment(), &[0.75, 0.75], 1e-7).unwrap();
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].constraint, ConstraintRef::Equality(0));
        assert_eq!(report[0].residual, 0.5);
    }

    #[test]
    fn bound_violation_is_reported() {
        let report = check_feasible(&segment(), &[1.25, -0.25], 1e-7).unwrap();
        assert!(report
            .iter()
            .any(|v| v.constraint == ConstraintRef::LowerBound(1) && v.residual == -0.25));
        assert!(report
            .iter()
            .any(|v| v.constraint == ConstraintRef::Inequality(0)));
    }

    #[test]
    fn length_mismatch_is_structural() {
        assert!(matches!(
            check_feasible(&segment(), &[0.0], 1e-7),
            Err(LpError::Structural(_))
        ));
    }
}
