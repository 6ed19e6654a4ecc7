//! Shared fixtures for unit tests: the two worked two-event reference
//! models and small construction helpers.

use crate::model::EmpiricalModel;
use crate::num::{ratio, Rational};
use crate::scenario::{CausalScenario, Event};

pub fn chain_ab() -> CausalScenario {
    CausalScenario::new(
        vec![Event::binary("A"), Event::binary("B")],
        &[("A".into(), "B".into())],
    )
    .unwrap()
}

pub fn antichain_ab() -> CausalScenario {
    CausalScenario::new(vec![Event::binary("A"), Event::binary("B")], &[]).unwrap()
}

/// The worked model that is exactly compatible with the chain A -> B; its
/// first-event marginals are (6/13, 7/13) and (23/65, 42/65).
pub fn compatible_chain_model() -> EmpiricalModel<Rational> {
    EmpiricalModel::from_table(
        chain_ab(),
        &[
            vec![ratio(0, 1), ratio(6, 13), ratio(0, 1), ratio(7, 13)],
            vec![ratio(24, 65), ratio(6, 65), ratio(7, 13), ratio(0, 1)],
            vec![ratio(23, 65), ratio(0, 1), ratio(14, 65), ratio(28, 65)],
            vec![ratio(23, 260), ratio(69, 260), ratio(42, 65), ratio(0, 1)],
        ],
    )
    .unwrap()
}

/// The worked signalling model: its A -> B fraction is exactly 13/42 and
/// the compatible model above attains it as a witness.
pub fn signalling_model() -> EmpiricalModel<Rational> {
    EmpiricalModel::from_table(
        chain_ab(),
        &[
            vec![ratio(0, 1), ratio(1, 7), ratio(0, 1), ratio(6, 7)],
            vec![ratio(2, 3), ratio(1, 6), ratio(1, 6), ratio(0, 1)],
            vec![ratio(1, 4), ratio(0, 1), ratio(1, 4), ratio(1, 2)],
            vec![ratio(1, 5), ratio(3, 5), ratio(1, 5), ratio(0, 1)],
        ],
    )
    .unwrap()
}

pub fn uniform_model() -> EmpiricalModel<Rational> {
    let rows: Vec<Vec<Rational>> = (0..4).map(|_| vec![ratio(1, 4); 4]).collect();
    EmpiricalModel::from_table(chain_ab(), &rows).unwrap()
}

/// Random two-event binary model with cells k/denominator, rows normalized.
pub fn random_bell_model(
    rng: &mut impl rand::Rng,
    scenario: CausalScenario,
) -> EmpiricalModel<Rational> {
    let inputs = scenario.joint_inputs().len();
    let outputs = scenario.joint_outputs().len();
    let mut table = Vec::with_capacity(inputs);
    for _ in 0..inputs {
        let weights: Vec<i64> = (0..outputs).map(|_| rng.gen_range(0..=12)).collect();
        let total: i64 = weights.iter().sum::<i64>().max(1);
        let mut row: Vec<Rational> = weights.iter().map(|&w| ratio(w, total)).collect();
        if weights.iter().sum::<i64>() == 0 {
            row[0] = ratio(1, 1);
        }
        table.push(row);
    }
    EmpiricalModel::from_table(scenario, &table).unwrap()
}
