//! Causal fractions: how much of an empirical model is explainable by a
//! model compatible with a given causal order.
//!
//! The fraction of a model `e` for an order is the largest `gamma` in [0,1]
//! such that `gamma * w <= e` cell-wise for some model `w` whose marginals
//! are well-defined on every lowerset of that order. Three routes compute
//! it: a closed form for two-event chains with binary alphabets (which also
//! yields an explicit witness), a marginal-difference upper bound valid for
//! every order, and exact linear programs (the defining marginal-constraint
//! program, plus an independent section-mixture program used for
//! cross-checking; the two agree on chain orders).

use thiserror::Error;

use crate::lp::{self, LinearProgram, LpError, LpStatus, Relation};
use crate::model::{EmpiricalModel, ModelError};
use crate::num::Scalar;
use crate::scenario::{Assignment, CausalScenario, ScenarioError};

#[derive(Debug, Error)]
pub enum FractionError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("model shape not supported: {0}")]
    Shape(String),
    #[error("unknown event `{0}` in order specification")]
    UnknownEvent(String),
    #[error("solver failed: {0}")]
    Solver(String),
}

/// The causal order a fraction is measured against. Resolved against the
/// model's events; the model's own declared order is irrelevant to its rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CausalOrder {
    /// Two-event total order `first -> second`, by event id.
    Chain { first: String, second: String },
    /// The discrete order: no event precedes any other.
    NoSignalling,
    /// Arbitrary order given as directed id pairs.
    Poset(Vec<(String, String)>),
}

impl CausalOrder {
    pub fn chain(first: impl Into<String>, second: impl Into<String>) -> Self {
        CausalOrder::Chain {
            first: first.into(),
            second: second.into(),
        }
    }

    /// Stable report key, e.g. `A->B` or `no_signalling`.
    pub fn key(&self) -> String {
        match self {
            CausalOrder::Chain { first, second } => format!("{first}->{second}"),
            CausalOrder::NoSignalling => "no_signalling".into(),
            CausalOrder::Poset(pairs) => {
                let body: Vec<String> =
                    pairs.iter().map(|(a, b)| format!("{a}->{b}")).collect();
                format!("poset({})", body.join(";"))
            }
        }
    }

    /// Directed index pairs of this order on the given scenario's events.
    pub fn resolve(&self, scenario: &CausalScenario) -> Result<Vec<(usize, usize)>, FractionError> {
        let index_of = |id: &String| {
            scenario
                .event_index(id)
                .ok_or_else(|| FractionError::UnknownEvent(id.clone()))
        };
        match self {
            CausalOrder::NoSignalling => Ok(vec![]),
            CausalOrder::Chain { first, second } => {
                if scenario.event_count() != 2 {
                    return Err(FractionError::Shape(format!(
                        "chain orders apply to two-event models, found {} events",
                        scenario.event_count()
                    )));
                }
                Ok(vec![(index_of(first)?, index_of(second)?)])
            }
            CausalOrder::Poset(pairs) => pairs
                .iter()
                .map(|(a, b)| Ok((index_of(a)?, index_of(b)?)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FractionMethod {
    ClosedForm,
    UpperBound,
    Lp,
}

impl FractionMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            FractionMethod::ClosedForm => "closed_form",
            FractionMethod::UpperBound => "upper_bound",
            FractionMethod::Lp => "lp",
        }
    }
}

/// A computed causal fraction, with the attaining witness model when one is
/// available and `gamma > 0`.
#[derive(Debug, Clone)]
pub struct FractionResult<R: Scalar> {
    pub order: CausalOrder,
    pub gamma: R,
    pub method: FractionMethod,
    pub witness: Option<EmpiricalModel<R>>,
}

/// Marginal-difference upper bound on the causal fraction, valid for every
/// order: one minus the largest disagreement between marginals of rows that
/// share their inputs on a lowerset of the order.
pub fn upper_bound_fraction<R: Scalar>(
    model: &EmpiricalModel<R>,
    order: &CausalOrder,
) -> Result<R, FractionError> {
    let pairs = order.resolve(model.scenario())?;
    let reordered = model.with_scenario_order(&pairs)?;
    let worst = reordered.max_incompatibility(&R::zero())?;
    Ok(R::one() - worst)
}

fn require_bell222<R: Scalar>(model: &EmpiricalModel<R>) -> Result<(), FractionError> {
    let s = model.scenario();
    let ok = s.event_count() == 2
        && s.events()
            .iter()
            .all(|e| e.inputs.len() == 2 && e.outputs.len() == 2);
    if ok {
        Ok(())
    } else {
        Err(FractionError::Shape(
            "closed form requires two events with binary inputs and outputs".into(),
        ))
    }
}

/// Closed-form causal fraction for a two-event chain on binary alphabets,
/// together with the explicit witness model that attains it.
///
/// The fraction is the worst case over the first event's inputs and outputs
/// of one minus the first-event marginal shift induced by the second event's
/// input. The witness keeps the original conditional of the second event's
/// output given the first and rescales the first-event marginal so that
/// `gamma * witness` sits under the model everywhere.
pub fn bell222_fraction<R: Scalar>(
    model: &EmpiricalModel<R>,
    order: &CausalOrder,
) -> Result<FractionResult<R>, FractionError> {
    require_bell222(model)?;
    let CausalOrder::Chain { first, second } = order else {
        return Err(FractionError::Shape(
            "closed form applies to chain orders only".into(),
        ));
    };
    let scenario = model.scenario();
    let ex = scenario
        .event_index(first)
        .ok_or_else(|| FractionError::UnknownEvent(first.clone()))?;
    let ey = scenario
        .event_index(second)
        .ok_or_else(|| FractionError::UnknownEvent(second.clone()))?;
    if ex == ey {
        return Err(FractionError::Shape("chain endpoints must differ".into()));
    }

    // marg[i_x][i_y][o_x]: first-event marginal of the row at (i_x, i_y).
    let marginal = |ix: u16, iy: u16, ox: u16| -> R {
        let mut input = vec![0u16; 2];
        input[ex] = ix;
        input[ey] = iy;
        let row = model.row(&input).expect("model rows are total");
        row.probs()
            .iter()
            .filter(|(out, _)| out[ex] == ox)
            .map(|(_, p)| p.clone())
            .sum()
    };

    let mut gamma = R::one();
    for ix in 0..2u16 {
        for ox in 0..2u16 {
            let shift = (marginal(ix, 0, ox) - marginal(ix, 1, ox)).abs();
            let term = R::one() - shift;
            if term < gamma {
                gamma = term;
            }
        }
    }
    // Float rows are only normalized to within tolerance, so the shift can
    // exceed 1 by rounding; exact arithmetic cannot reach this branch.
    if gamma < R::zero() {
        gamma = R::zero();
    }

    let chain_pairs = vec![(ex, ey)];
    let witness = if gamma.is_zero() {
        None
    } else {
        // New first-event marginal per i_x: put min_{i_y} marginal / gamma on
        // the output where that minimum is smallest (lexicographically first
        // on ties), the remainder on the other output.
        let mut new_marginal = vec![[R::zero(), R::zero()]; 2];
        for ix in 0..2u16 {
            let min_over_iy = |ox: u16| -> R {
                let a = marginal(ix, 0, ox);
                let b = marginal(ix, 1, ox);
                if a <= b {
                    a
                } else {
                    b
                }
            };
            let m0 = min_over_iy(0);
            let m1 = min_over_iy(1);
            let star: u16 = if m0 <= m1 { 0 } else { 1 };
            let at_star = if star == 0 { m0 } else { m1 };
            // Any value in [1 - (1 - max marginal)/gamma, at_star/gamma]
            // dominates both outputs; at inputs where the fraction is not
            // tight the upper end can pass 1, so clamp to stay a
            // distribution.
            let mut scaled = at_star / gamma.clone();
            if scaled > R::one() {
                scaled = R::one();
            }
            new_marginal[ix as usize][star as usize] = scaled.clone();
            new_marginal[ix as usize][1 - star as usize] = R::one() - scaled;
        }
        let inputs = model.scenario().joint_inputs();
        let outputs = model.scenario().joint_outputs();
        let y_outputs = R::from_int(model.scenario().events()[ey].outputs.len() as i64);
        let mut table = Vec::with_capacity(inputs.len());
        for input in &inputs {
            let ix = input[ex];
            let row = model.row(input).expect("model rows are total");
            let mut cells = Vec::with_capacity(outputs.len());
            for output in &outputs {
                let ox = output[ex];
                let denom = marginal(ix, input[ey], ox);
                let target = new_marginal[ix as usize][ox as usize].clone();
                let cell = if denom.is_zero() {
                    // The conditional is undefined on zero-probability
                    // outputs; spread the new marginal uniformly.
                    target / y_outputs.clone()
                } else {
                    row.get(output).cloned().unwrap_or_else(R::zero) * target / denom
                };
                cells.push(cell);
            }
            table.push(cells);
        }
        let chain_scenario = model.scenario().with_order(&chain_pairs)?;
        Some(EmpiricalModel::from_table(chain_scenario, &table)?)
    };

    Ok(FractionResult {
        order: order.clone(),
        gamma,
        method: FractionMethod::ClosedForm,
        witness,
    })
}

/// `gamma * witness <= model` cell-wise, and the witness is a compatible
/// family for the order its own scenario declares. Exact in rational mode,
/// within `tolerance` in float mode.
pub fn witness_check<R: Scalar>(
    model: &EmpiricalModel<R>,
    gamma: &R,
    witness: &EmpiricalModel<R>,
    tolerance: &R,
) -> Result<bool, FractionError> {
    if !model.scenario().same_shape(witness.scenario()) {
        return Err(FractionError::Shape(
            "witness events or alphabets differ from the model".into(),
        ));
    }
    for (input, dist) in model.rows() {
        let w = witness
            .row(input)
            .ok_or_else(|| FractionError::Shape(format!("witness missing row {input:?}")))?;
        for (output, p) in dist.probs() {
            let scaled = gamma.clone() * w.get(output).cloned().unwrap_or_else(R::zero);
            if scaled > p.clone() + tolerance.clone() {
                return Ok(false);
            }
        }
    }
    Ok(witness.max_incompatibility(tolerance)? <= *tolerance)
}

fn gamma_from_lp(status: LpStatus, context: &str) -> Result<(), FractionError> {
    match status {
        LpStatus::Optimal => Ok(()),
        LpStatus::Infeasible => Err(FractionError::Solver(format!(
            "{context}: reported infeasible, but gamma = 0 is always feasible"
        ))),
        LpStatus::Unbounded => Err(FractionError::Solver(format!(
            "{context}: reported unbounded, but gamma <= 1 always"
        ))),
    }
}

/// The defining linear program for the causal fraction: maximize the common
/// row mass `gamma` of a subnormalized family that sits under the model and
/// has input-independent marginals on every lowerset of the order.
pub fn lp_fraction<R: Scalar>(
    model: &EmpiricalModel<R>,
    order: &CausalOrder,
) -> Result<FractionResult<R>, FractionError> {
    let pairs = order.resolve(model.scenario())?;
    lp_fraction_with_extra_orders(model, order, &pairs, &[])
}

/// Same program with compatibility rows for additional orders stacked on
/// top. Used to cross-check the no-signalling fraction against both chains.
fn lp_fraction_with_extra_orders<R: Scalar>(
    model: &EmpiricalModel<R>,
    order: &CausalOrder,
    pairs: &[(usize, usize)],
    extra_orders: &[Vec<(usize, usize)>],
) -> Result<FractionResult<R>, FractionError> {
    let reordered = model.with_scenario_order(pairs)?;
    let scenario = reordered.scenario();
    let inputs = scenario.joint_inputs();
    let outputs = scenario.joint_outputs();
    let n_cells = inputs.len() * outputs.len();

    // Variable 0 is gamma; then one variable per (input, output) cell.
    let cell_var = |ii: usize, oo: usize| 1 + ii * outputs.len() + oo;
    let mut names = Vec::with_capacity(1 + n_cells);
    names.push("gamma".to_string());
    for ii in 0..inputs.len() {
        for oo in 0..outputs.len() {
            names.push(format!("c[{ii}|{oo}]"));
        }
    }
    let mut objective = vec![R::zero(); 1 + n_cells];
    objective[0] = R::one();
    let mut program = LinearProgram::new(names, objective);

    // Each row's mass equals gamma.
    for (ii, _) in inputs.iter().enumerate() {
        let mut coeffs = vec![R::zero(); 1 + n_cells];
        coeffs[0] = -R::one();
        for oo in 0..outputs.len() {
            coeffs[cell_var(ii, oo)] = R::one();
        }
        program.constrain(coeffs, Relation::Eq, R::zero());
    }
    // Dominated by the model cell-wise.
    for (ii, input) in inputs.iter().enumerate() {
        let row = reordered.row(input).expect("model rows are total");
        for (oo, output) in outputs.iter().enumerate() {
            let mut coeffs = vec![R::zero(); 1 + n_cells];
            coeffs[cell_var(ii, oo)] = R::one();
            program.constrain(
                coeffs,
                Relation::Le,
                row.get(output).cloned().unwrap_or_else(R::zero),
            );
        }
    }
    // Well-defined marginals on each proper lowerset of each order: within
    // a group of inputs agreeing on the lowerset, every member's marginal
    // must match the first member's, cell for cell.
    let mut order_scenarios = vec![scenario.clone()];
    for extra in extra_orders {
        order_scenarios.push(scenario.with_order(extra)?);
    }
    for order_scenario in &order_scenarios {
        for low in order_scenario.lowersets() {
            if low.is_empty() || low.len() == scenario.event_count() {
                continue;
            }
            let on = low.members().to_vec();
            let mut groups: std::collections::BTreeMap<Assignment, Vec<usize>> =
                std::collections::BTreeMap::new();
            for (ii, input) in inputs.iter().enumerate() {
                let key: Assignment = on.iter().map(|&k| input[k]).collect();
                groups.entry(key).or_default().push(ii);
            }
            for members in groups.values() {
                let (reference, rest) = members.split_first().expect("groups are nonempty");
                for &other in rest {
                    for low_out in scenario.outputs_on(&low) {
                        let mut coeffs = vec![R::zero(); 1 + n_cells];
                        for (oo, output) in outputs.iter().enumerate() {
                            let projected: Assignment = on.iter().map(|&k| output[k]).collect();
                            if projected == low_out {
                                coeffs[cell_var(*reference, oo)] = R::one();
                                coeffs[cell_var(other, oo)] =
                                    coeffs[cell_var(other, oo)].clone() - R::one();
                            }
                        }
                        program.constrain(coeffs, Relation::Eq, R::zero());
                    }
                }
            }
        }
    }

    let solution = lp::solve(&program)?;
    gamma_from_lp(solution.status, "marginal-constraint fraction program")?;
    let gamma = solution.objective_value.clone();
    let witness = if gamma.is_zero() {
        None
    } else {
        let mut table = Vec::with_capacity(inputs.len());
        for ii in 0..inputs.len() {
            let row: Vec<R> = (0..outputs.len())
                .map(|oo| solution.assignment[cell_var(ii, oo)].clone() / gamma.clone())
                .collect();
            table.push(row);
        }
        Some(EmpiricalModel::from_table(scenario.clone(), &table)?)
    };
    Ok(FractionResult {
        order: order.clone(),
        gamma,
        method: FractionMethod::Lp,
        witness,
    })
}

/// Independent route: maximize the total weight of a subconvex mixture of
/// deterministic sections of the order that fits under the model. Equals
/// [`lp_fraction`] on chain orders; on orders with incomparable events it is
/// a (possibly strict) lower bound, since mixtures of sections cannot
/// correlate incomparable events the way a merely no-signalling family can.
pub fn lp_fraction_via_sections<R: Scalar>(
    model: &EmpiricalModel<R>,
    order: &CausalOrder,
) -> Result<FractionResult<R>, FractionError> {
    let pairs = order.resolve(model.scenario())?;
    let reordered = model.with_scenario_order(&pairs)?;
    let scenario = reordered.scenario();
    let full = scenario.full_inputs_on(&scenario.full_lowerset());
    let sections = scenario.enumerate_sections(&full)?;
    let inputs = scenario.joint_inputs();
    let outputs = scenario.joint_outputs();

    let names: Vec<String> = (0..sections.len()).map(|k| format!("w{k}")).collect();
    let objective = vec![R::one(); sections.len()];
    let mut program = LinearProgram::new(names, objective);
    for input in &inputs {
        let row = reordered.row(input).expect("model rows are total");
        for output in &outputs {
            let coeffs: Vec<R> = sections
                .iter()
                .map(|f| {
                    if f.table.get(input) == Some(output) {
                        R::one()
                    } else {
                        R::zero()
                    }
                })
                .collect();
            program.constrain(
                coeffs,
                Relation::Le,
                row.get(output).cloned().unwrap_or_else(R::zero),
            );
        }
    }
    let solution = lp::solve(&program)?;
    gamma_from_lp(solution.status, "section-mixture fraction program")?;
    let gamma = solution.objective_value.clone();
    let witness = if gamma.is_zero() {
        None
    } else {
        let mut table = vec![vec![R::zero(); outputs.len()]; inputs.len()];
        for (k, f) in sections.iter().enumerate() {
            let weight = solution.assignment[k].clone();
            if weight.is_zero() {
                continue;
            }
            for (ii, input) in inputs.iter().enumerate() {
                let out = f.table.get(input).expect("sections are total");
                let oo = outputs.iter().position(|o| o == out).expect("valid output");
                table[ii][oo] = table[ii][oo].clone() + weight.clone();
            }
        }
        for row in table.iter_mut() {
            for cell in row.iter_mut() {
                *cell = cell.clone() / gamma.clone();
            }
        }
        Some(EmpiricalModel::from_table(scenario.clone(), &table)?)
    };
    Ok(FractionResult {
        order: order.clone(),
        gamma,
        method: FractionMethod::Lp,
        witness,
    })
}

/// Fraction against the discrete (no-signalling) order. On two-event models
/// with binary alphabets the result is cross-checked against an equivalent
/// program that imposes both chain orders' marginal constraints at once.
pub fn nosignalling_fraction<R: Scalar>(
    model: &EmpiricalModel<R>,
) -> Result<FractionResult<R>, FractionError> {
    let result = lp_fraction(model, &CausalOrder::NoSignalling)?;
    if require_bell222(model).is_ok() {
        let ids: Vec<String> = model
            .scenario()
            .events()
            .iter()
            .map(|e| e.id.clone())
            .collect();
        let forward = vec![(0usize, 1usize)];
        let backward = vec![(1usize, 0usize)];
        let combined = lp_fraction_with_extra_orders(
            model,
            &CausalOrder::NoSignalling,
            &forward,
            &[backward],
        )?;
        if combined_disagrees(&result.gamma, &combined.gamma) {
            return Err(FractionError::Solver(format!(
                "no-signalling fraction {} disagrees with the combined-chain program {} for events {ids:?}",
                result.gamma.render(),
                combined.gamma.render()
            )));
        }
    }
    Ok(result)
}

fn combined_disagrees<R: Scalar>(a: &R, b: &R) -> bool {
    if R::EXACT {
        a != b
    } else {
        (a.clone() - b.clone()).abs() > R::from_ratio(1, 1_000_000_000)
    }
}

/// All three standard orders of a two-event binary model: both chains (by
/// closed form unless overridden) and no-signalling (always by LP).
pub fn full_report<R: Scalar>(
    model: &EmpiricalModel<R>,
) -> Result<Vec<FractionResult<R>>, FractionError> {
    full_report_with_method(model, ReportMethod::Auto)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportMethod {
    /// Closed form for chains, LP for no-signalling.
    Auto,
    Closed,
    Lp,
    Bound,
}

pub fn full_report_with_method<R: Scalar>(
    model: &EmpiricalModel<R>,
    method: ReportMethod,
) -> Result<Vec<FractionResult<R>>, FractionError> {
    require_bell222(model)?;
    let ids: Vec<String> = model
        .scenario()
        .events()
        .iter()
        .map(|e| e.id.clone())
        .collect();
    let orders = [
        CausalOrder::chain(ids[0].clone(), ids[1].clone()),
        CausalOrder::chain(ids[1].clone(), ids[0].clone()),
        CausalOrder::NoSignalling,
    ];
    let mut results = Vec::with_capacity(orders.len());
    for order in orders {
        let result = match (method, &order) {
            (ReportMethod::Bound, _) => FractionResult {
                gamma: upper_bound_fraction(model, &order)?,
                order: order.clone(),
                method: FractionMethod::UpperBound,
                witness: None,
            },
            (ReportMethod::Lp, CausalOrder::NoSignalling) => nosignalling_fraction(model)?,
            (ReportMethod::Lp, _) => lp_fraction(model, &order)?,
            (ReportMethod::Closed, CausalOrder::NoSignalling) => {
                return Err(FractionError::Shape(
                    "no closed form for the no-signalling order; use auto or lp".into(),
                ))
            }
            (ReportMethod::Closed, _) | (ReportMethod::Auto, CausalOrder::Chain { .. }) => {
                bell222_fraction(model, &order)?
            }
            (ReportMethod::Auto, _) => nosignalling_fraction(model)?,
        };
        results.push(result);
    }
    Ok(results)
}
