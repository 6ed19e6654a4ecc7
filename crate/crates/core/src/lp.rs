//! Minimal dense linear-program solver: maximize a linear objective over
//! nonnegative variables subject to `<=` / `=` / `>=` constraints.
//!
//! Two-phase simplex on a full tableau. Rational mode pivots exactly with
//! Bland's anti-cycling rule; float mode picks the largest reduced cost and
//! falls back to Bland when the objective stalls. Problem sizes here are
//! tiny (tens of variables), so a dense tableau is the simplest correct
//! choice.

use std::fmt::Write as _;

use thiserror::Error;

use crate::num::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LpError {
    #[error("constraint {index} has {found} coefficients, expected {expected}")]
    BadShape {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("objective has {found} coefficients, expected {expected}")]
    BadObjective { found: usize, expected: usize },
    #[error("pivoting stalled after {0} iterations; numerically unstable, rerun in rational mode")]
    NumericalInstability(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint<R: Scalar> {
    pub coeffs: Vec<R>,
    pub relation: Relation,
    pub constant: R,
}

/// Maximize `objective . x` subject to the constraints, `x >= 0` implicit.
#[derive(Debug, Clone)]
pub struct LinearProgram<R: Scalar> {
    pub variables: Vec<String>,
    pub objective: Vec<R>,
    pub constraints: Vec<Constraint<R>>,
}

impl<R: Scalar> LinearProgram<R> {
    pub fn new(variables: Vec<String>, objective: Vec<R>) -> Self {
        LinearProgram {
            variables,
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn constrain(&mut self, coeffs: Vec<R>, relation: Relation, constant: R) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            constant,
        });
    }

    fn validate(&self) -> Result<(), LpError> {
        let expected = self.variables.len();
        if self.objective.len() != expected {
            return Err(LpError::BadObjective {
                found: self.objective.len(),
                expected,
            });
        }
        for (index, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != expected {
                return Err(LpError::BadShape {
                    index,
                    found: c.coeffs.len(),
                    expected,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct LpSolution<R: Scalar> {
    pub status: LpStatus,
    pub objective_value: R,
    /// One value per declared variable; all-zero unless `status` is optimal.
    pub assignment: Vec<R>,
}

/// Re-evaluates a claimed solution against the program, independently of any
/// solver state: feasibility of every constraint, nonnegativity, and the
/// stated objective value.
pub fn verify<R: Scalar>(lp: &LinearProgram<R>, sol: &LpSolution<R>) -> bool {
    if sol.status != LpStatus::Optimal {
        return false;
    }
    if sol.assignment.len() != lp.variables.len() {
        return false;
    }
    let tol = feasibility_tolerance::<R>();
    for v in &sol.assignment {
        if v.is_negative() && v.abs() > tol {
            return false;
        }
    }
    for c in &lp.constraints {
        let lhs: R = c
            .coeffs
            .iter()
            .zip(&sol.assignment)
            .map(|(a, x)| a.clone() * x.clone())
            .sum();
        let diff = lhs - c.constant.clone();
        let ok = match c.relation {
            Relation::Le => diff <= tol,
            Relation::Ge => diff >= -tol.clone(),
            Relation::Eq => diff.abs() <= tol,
        };
        if !ok {
            return false;
        }
    }
    let value: R = lp
        .objective
        .iter()
        .zip(&sol.assignment)
        .map(|(a, x)| a.clone() * x.clone())
        .sum();
    (value - sol.objective_value.clone()).abs() <= tol
}

fn feasibility_tolerance<R: Scalar>() -> R {
    if R::EXACT {
        R::zero()
    } else {
        R::from_ratio(1, 10_000_000) // 1e-7
    }
}

pub fn solve<R: Scalar>(lp: &LinearProgram<R>) -> Result<LpSolution<R>, LpError> {
    solve_traced(lp, None)
}

/// Like [`solve`], optionally appending a textual tableau trace for audits.
pub fn solve_traced<R: Scalar>(
    lp: &LinearProgram<R>,
    mut trace: Option<&mut String>,
) -> Result<LpSolution<R>, LpError> {
    lp.validate()?;
    let n = lp.variables.len();
    let m = lp.constraints.len();

    // Column layout: structural | slack/surplus | artificial, then rhs.
    let mut num_slack = 0usize;
    let mut num_artificial = 0usize;
    for c in &lp.constraints {
        let flipped = c.constant.is_negative();
        let relation = effective_relation(c.relation, flipped);
        match relation {
            Relation::Le => num_slack += 1,
            Relation::Eq => num_artificial += 1,
            Relation::Ge => {
                num_slack += 1;
                num_artificial += 1;
            }
        }
    }
    let total = n + num_slack + num_artificial;
    let rhs_col = total;
    let art_start = n + num_slack;

    let mut tableau: Vec<Vec<R>> = vec![vec![R::zero(); total + 1]; m];
    let mut basis: Vec<usize> = vec![0; m];
    let mut next_slack = n;
    let mut next_art = art_start;

    for (i, c) in lp.constraints.iter().enumerate() {
        let flipped = c.constant.is_negative();
        let relation = effective_relation(c.relation, flipped);
        for (j, a) in c.coeffs.iter().enumerate() {
            tableau[i][j] = if flipped { -a.clone() } else { a.clone() };
        }
        tableau[i][rhs_col] = if flipped {
            -c.constant.clone()
        } else {
            c.constant.clone()
        };
        match relation {
            Relation::Le => {
                tableau[i][next_slack] = R::one();
                basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                tableau[i][next_slack] = -R::one();
                next_slack += 1;
                tableau[i][next_art] = R::one();
                basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                tableau[i][next_art] = R::one();
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }

    let zero_assignment = vec![R::zero(); n];

    if num_artificial > 0 {
        // Phase 1: maximize minus the sum of artificials.
        let mut cost = vec![R::zero(); total + 1];
        for cell in cost.iter_mut().take(total).skip(art_start) {
            *cell = -R::one();
        }
        price_out(&mut cost, &tableau, &basis);
        let outcome = run_simplex(
            &mut tableau,
            &mut basis,
            &mut cost,
            art_start,
            trace.as_deref_mut(),
            "phase1",
        )?;
        debug_assert!(matches!(outcome, SimplexOutcome::Optimal));
        // cost[rhs] holds the phase-1 objective value.
        if cost[rhs_col].abs() > feasibility_tolerance::<R>() {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective_value: R::zero(),
                assignment: zero_assignment,
            });
        }
        // Drive any artificial still basic (at zero) out of the basis.
        for i in 0..m {
            if basis[i] >= art_start {
                let eps = R::pivot_epsilon();
                if let Some(j) = (0..art_start).find(|&j| tableau[i][j].abs() > eps) {
                    pivot(&mut tableau, &mut basis, Some(&mut cost), i, j);
                }
                // A row with no usable column is redundant; its artificial
                // stays basic at value zero and never re-enters elsewhere.
            }
        }
    }

    // Phase 2: the real objective over structural variables.
    let mut cost = vec![R::zero(); total + 1];
    for (j, c) in lp.objective.iter().enumerate() {
        cost[j] = c.clone();
    }
    price_out(&mut cost, &tableau, &basis);
    let outcome = run_simplex(
        &mut tableau,
        &mut basis,
        &mut cost,
        art_start,
        trace,
        "phase2",
    )?;
    if matches!(outcome, SimplexOutcome::Unbounded) {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective_value: R::zero(),
            assignment: zero_assignment,
        });
    }

    let mut assignment = vec![R::zero(); n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            assignment[b] = tableau[i][rhs_col].clone();
        }
    }
    let objective_value: R = lp
        .objective
        .iter()
        .zip(&assignment)
        .map(|(a, x)| a.clone() * x.clone())
        .sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value,
        assignment,
    })
}

fn effective_relation(rel: Relation, flipped: bool) -> Relation {
    if !flipped {
        return rel;
    }
    match rel {
        Relation::Le => Relation::Ge,
        Relation::Ge => Relation::Le,
        Relation::Eq => Relation::Eq,
    }
}

/// Makes the reduced-cost row consistent with the current basis by
/// subtracting each basic column's contribution.
fn price_out<R: Scalar>(cost: &mut [R], tableau: &[Vec<R>], basis: &[usize]) {
    for (i, &b) in basis.iter().enumerate() {
        if !cost[b].is_zero() {
            let factor = cost[b].clone();
            for (j, cell) in cost.iter_mut().enumerate() {
                *cell = cell.clone() - factor.clone() * tableau[i][j].clone();
            }
        }
    }
}

enum SimplexOutcome {
    Optimal,
    Unbounded,
}

fn run_simplex<R: Scalar>(
    tableau: &mut [Vec<R>],
    basis: &mut [usize],
    cost: &mut [R],
    art_start: usize,
    mut trace: Option<&mut String>,
    phase: &str,
) -> Result<SimplexOutcome, LpError> {
    let m = tableau.len();
    let total = cost.len() - 1;
    let eps = R::pivot_epsilon();
    let iteration_cap = 1000 + 200 * (m + total);
    let mut stalled = 0usize;
    let mut use_bland = R::EXACT;
    let mut last_value = cost[total].clone();

    for iteration in 0..iteration_cap {
        if let Some(t) = trace.as_deref_mut() {
            let _ = writeln!(t, "{phase} iter {iteration}: basis {basis:?} obj {}", cost[total]);
        }
        // Entering column: never an artificial once phase 1 is done.
        let candidate = if use_bland {
            (0..art_start).find(|&j| cost[j] > eps && !basis.contains(&j))
        } else {
            let mut best: Option<(usize, &R)> = None;
            for (j, value) in cost.iter().enumerate().take(art_start) {
                if *value > eps && !basis.contains(&j) {
                    match &best {
                        Some((_, incumbent)) if value <= incumbent => {}
                        _ => best = Some((j, value)),
                    }
                }
            }
            best.map(|(j, _)| j)
        };
        let Some(entering) = candidate else {
            return Ok(SimplexOutcome::Optimal);
        };

        // Ratio test; ties resolved toward the smallest basic index.
        let mut leaving: Option<(usize, R)> = None;
        for (i, row) in tableau.iter().enumerate() {
            if row[entering] > eps {
                let ratio = row[total].clone() / row[entering].clone();
                match &leaving {
                    Some((best_i, best_ratio)) => {
                        if ratio < *best_ratio
                            || (ratio == *best_ratio && basis[i] < basis[*best_i])
                        {
                            leaving = Some((i, ratio));
                        }
                    }
                    None => leaving = Some((i, ratio)),
                }
            }
        }
        let Some((pivot_row, _)) = leaving else {
            return Ok(SimplexOutcome::Unbounded);
        };

        pivot(tableau, basis, Some(cost), pivot_row, entering);

        if !R::EXACT {
            // Largest-coefficient pricing can cycle on degenerate bases;
            // switch to Bland when the objective stops moving.
            if cost[total] == last_value {
                stalled += 1;
                if stalled > 2 * (m + total) {
                    use_bland = true;
                }
            } else {
                stalled = 0;
                last_value = cost[total].clone();
            }
        }
    }
    Err(LpError::NumericalInstability(iteration_cap))
}

fn pivot<R: Scalar>(
    tableau: &mut [Vec<R>],
    basis: &mut [usize],
    cost: Option<&mut [R]>,
    row: usize,
    col: usize,
) {
    let pivot_value = tableau[row][col].clone();
    for cell in tableau[row].iter_mut() {
        *cell = cell.clone() / pivot_value.clone();
    }
    let pivot_row = tableau[row].clone();
    for (i, other) in tableau.iter_mut().enumerate() {
        if i != row && !other[col].is_zero() {
            let factor = other[col].clone();
            for (j, cell) in other.iter_mut().enumerate() {
                *cell = cell.clone() - factor.clone() * pivot_row[j].clone();
            }
        }
    }
    if let Some(cost) = cost {
        if !cost[col].is_zero() {
            let factor = cost[col].clone();
            for (j, cell) in cost.iter_mut().enumerate() {
                *cell = cell.clone() - factor.clone() * pivot_row[j].clone();
            }
        }
    }
    basis[row] = col;
}
