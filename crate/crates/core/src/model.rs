//! Empirical models: one outcome distribution per joint input assignment,
//! with marginalization onto lowersets and compatibility checking.
//!
//! A model is compatible with its scenario's order when the marginal on each
//! lowerset does not depend on inputs outside the lowerset. Rational-mode
//! models check this exactly; float-mode models within a tolerance.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map as JsonMap, Value};
use thiserror::Error;

use crate::num::{ParseNumberError, Rational, Scalar};
use crate::scenario::{
    Assignment, CausalFunction, CausalScenario, Event, Lowerset, ScenarioError, ScenarioSpec,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("table shape mismatch: {0}")]
    Shape(String),
    #[error("row `{row}` sums to {sum}, not 1")]
    Normalization { row: String, sum: String },
    #[error("negative entry {value} in row `{row}`, cell `{cell}`")]
    NegativeEntry {
        row: String,
        cell: String,
        value: String,
    },
    #[error("missing row for joint input `{0}`")]
    MissingRow(String),
    #[error("unknown {kind} label `{label}` for event `{event}`")]
    UnknownLabel {
        kind: &'static str,
        event: String,
        label: String,
    },
    #[error("bad row or cell key `{0}`")]
    BadKey(String),
    #[error(transparent)]
    ParseNumber(#[from] ParseNumberError),
    #[error("malformed model JSON: {0}")]
    Json(String),
    #[error("malformed model CSV: {0}")]
    Csv(String),
}

/// A probability distribution over joint output assignments of some event
/// scope. Every cell of the scope's output product is present, zeros
/// included, so tables compare bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<R: Scalar> {
    scope: Vec<usize>,
    probs: BTreeMap<Assignment, R>,
}

impl<R: Scalar> Distribution<R> {
    pub fn new(scope: Vec<usize>, probs: BTreeMap<Assignment, R>) -> Self {
        Distribution { scope, probs }
    }

    /// The point distribution on the empty assignment (scope `[]`).
    pub fn point_on_empty() -> Self {
        let mut probs = BTreeMap::new();
        probs.insert(vec![], R::one());
        Distribution {
            scope: vec![],
            probs,
        }
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn probs(&self) -> &BTreeMap<Assignment, R> {
        &self.probs
    }

    pub fn get(&self, outputs: &Assignment) -> Option<&R> {
        self.probs.get(outputs)
    }

    pub fn total(&self) -> R {
        self.probs.values().cloned().sum()
    }

    /// Marginal onto a sub-scope (indices must form a subset of `scope`).
    pub fn marginal_to(&self, sub_scope: &[usize]) -> Distribution<R> {
        let keep: Vec<usize> = self
            .scope
            .iter()
            .enumerate()
            .filter(|(_, e)| sub_scope.contains(e))
            .map(|(k, _)| k)
            .collect();
        let mut probs: BTreeMap<Assignment, R> = BTreeMap::new();
        for (out, p) in &self.probs {
            let key: Assignment = keep.iter().map(|&k| out[k]).collect();
            let entry = probs.entry(key).or_insert_with(R::zero);
            *entry = entry.clone() + p.clone();
        }
        Distribution {
            scope: sub_scope.to_vec(),
            probs,
        }
    }

    /// Largest absolute cell difference against another distribution on the
    /// same scope.
    pub fn max_abs_difference(&self, other: &Distribution<R>) -> R {
        let mut worst = R::zero();
        for (out, p) in &self.probs {
            let q = other.probs.get(out).cloned().unwrap_or_else(R::zero);
            let d = (p.clone() - q).abs();
            if d > worst {
                worst = d;
            }
        }
        for (out, q) in &other.probs {
            if !self.probs.contains_key(out) {
                let d = q.clone().abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }
}

/// Linguistic side labels carried by pipeline-built models. Opaque to all
/// numeric operations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub model_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phrase_type: Option<PhraseType>,
    /// Ambiguity tag of each word on the noun event, input order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noun_ambiguity: Option<[Ambiguity; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verb_ambiguity: Option<[Ambiguity; 2]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
}

impl ModelMeta {
    pub fn bare(model_id: impl Into<String>) -> Self {
        ModelMeta {
            model_id: model_id.into(),
            phrase_type: None,
            noun_ambiguity: None,
            verb_ambiguity: None,
            labels: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhraseType {
    SubjectVerb,
    VerbObject,
}

impl PhraseType {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhraseType::SubjectVerb => "subject_verb",
            PhraseType::VerbObject => "verb_object",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ambiguity {
    Homonymous,
    Polysemous,
}

/// One input assignment's marginals within a compatibility report, keyed by
/// the inputs outside the target lowerset.
#[derive(Debug, Clone)]
pub struct MarginalGroup<R: Scalar> {
    /// Inputs on the lowerset's events (the shared context).
    pub context: Assignment,
    /// Off-lowerset input assignment to that member's marginal.
    pub members: Vec<(Assignment, Distribution<R>)>,
    /// Largest cell difference between any two members.
    pub discrepancy: R,
}

/// Result of checking whether marginals on a lowerset are well-defined.
#[derive(Debug, Clone)]
pub struct MarginalReport<R: Scalar> {
    pub lowerset: Lowerset,
    pub groups: Vec<MarginalGroup<R>>,
    pub max_discrepancy: R,
    pub tolerance: R,
    pub compatible: bool,
}

/// A family of outcome distributions, one per full joint input assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel<R: Scalar> {
    scenario: CausalScenario,
    rows: BTreeMap<Assignment, Distribution<R>>,
    meta: Option<ModelMeta>,
}

impl<R: Scalar> EmpiricalModel<R> {
    /// Builds a model from a row-major table: one row per joint input (in
    /// lexicographic order), one column per joint output.
    pub fn from_table(scenario: CausalScenario, table: &[Vec<R>]) -> Result<Self, ModelError> {
        Self::from_table_with_tolerance(scenario, table, &R::default_tolerance())
    }

    pub fn from_table_with_tolerance(
        scenario: CausalScenario,
        table: &[Vec<R>],
        tolerance: &R,
    ) -> Result<Self, ModelError> {
        let inputs = scenario.joint_inputs();
        let outputs = scenario.joint_outputs();
        if table.len() != inputs.len() {
            return Err(ModelError::Shape(format!(
                "expected {} rows, found {}",
                inputs.len(),
                table.len()
            )));
        }
        let mut rows = BTreeMap::new();
        for (input, cells) in inputs.iter().zip(table) {
            if cells.len() != outputs.len() {
                return Err(ModelError::Shape(format!(
                    "row `{}` has {} cells, expected {}",
                    render_assignment(&scenario, input, LabelKind::Input),
                    cells.len(),
                    outputs.len()
                )));
            }
            let mut probs = BTreeMap::new();
            for (output, value) in outputs.iter().zip(cells) {
                if value.is_negative() && value.abs() > *tolerance {
                    return Err(ModelError::NegativeEntry {
                        row: render_assignment(&scenario, input, LabelKind::Input),
                        cell: render_assignment(&scenario, output, LabelKind::Output),
                        value: value.render(),
                    });
                }
                probs.insert(output.clone(), value.clone());
            }
            let dist = Distribution::new((0..scenario.event_count()).collect(), probs);
            let sum = dist.total();
            if (sum.clone() - R::one()).abs() > *tolerance {
                return Err(ModelError::Normalization {
                    row: render_assignment(&scenario, input, LabelKind::Input),
                    sum: sum.render(),
                });
            }
            rows.insert(input.clone(), dist);
        }
        Ok(EmpiricalModel {
            scenario,
            rows,
            meta: None,
        })
    }

    /// The deterministic model of a causal section over the full scenario:
    /// each row is the point mass on the section's output.
    pub fn point_mass(scenario: CausalScenario, section: &CausalFunction) -> Result<Self, ModelError> {
        let outputs = scenario.joint_outputs();
        let inputs = scenario.joint_inputs();
        let mut table = Vec::with_capacity(inputs.len());
        for input in &inputs {
            let out = section
                .table
                .get(input)
                .ok_or_else(|| ModelError::MissingRow(format!("{input:?}")))?;
            let row: Vec<R> = outputs
                .iter()
                .map(|o| if o == out { R::one() } else { R::zero() })
                .collect();
            table.push(row);
        }
        Self::from_table(scenario, &table)
    }

    /// Convex combination `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &EmpiricalModel<R>, lambda: &R) -> Result<Self, ModelError> {
        if !self.scenario.same_shape(&other.scenario) {
            return Err(ModelError::Shape("mixing models over different shapes".into()));
        }
        let one_minus = R::one() - lambda.clone();
        let mut rows = BTreeMap::new();
        for (input, dist) in &self.rows {
            let theirs = other
                .rows
                .get(input)
                .ok_or_else(|| ModelError::MissingRow(format!("{input:?}")))?;
            let probs: BTreeMap<Assignment, R> = dist
                .probs
                .iter()
                .map(|(out, p)| {
                    let q = theirs.probs.get(out).cloned().unwrap_or_else(R::zero);
                    (out.clone(), lambda.clone() * p.clone() + one_minus.clone() * q)
                })
                .collect();
            rows.insert(input.clone(), Distribution::new(dist.scope.clone(), probs));
        }
        Ok(EmpiricalModel {
            scenario: self.scenario.clone(),
            rows,
            meta: None,
        })
    }

    pub fn scenario(&self) -> &CausalScenario {
        &self.scenario
    }

    pub fn rows(&self) -> &BTreeMap<Assignment, Distribution<R>> {
        &self.rows
    }

    pub fn row(&self, input: &Assignment) -> Option<&Distribution<R>> {
        self.rows.get(input)
    }

    pub fn meta(&self) -> Option<&ModelMeta> {
        self.meta.as_ref()
    }

    pub fn with_meta(mut self, meta: ModelMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    /// Reinterprets the same rows over a scenario with a different order on
    /// the same events (marginalization targets change, the data does not).
    pub fn with_scenario_order(&self, order: &[(usize, usize)]) -> Result<Self, ModelError> {
        let scenario = self.scenario.with_order(order)?;
        Ok(EmpiricalModel {
            scenario,
            rows: self.rows.clone(),
            meta: self.meta.clone(),
        })
    }

    /// Marginal of one row onto a lowerset: sums over outputs of events
    /// outside the target.
    pub fn marginalize(
        &self,
        input: &Assignment,
        target: &Lowerset,
    ) -> Result<Distribution<R>, ModelError> {
        self.scenario.lowerset(target.members().iter().copied())?;
        let row = self
            .rows
            .get(input)
            .ok_or_else(|| ModelError::MissingRow(format!("{input:?}")))?;
        Ok(row.marginal_to(target.members()))
    }

    /// Groups rows by their inputs on the lowerset and measures how far the
    /// marginals are from agreeing within each group.
    pub fn check_compatibility(
        &self,
        target: &Lowerset,
        tolerance: &R,
    ) -> Result<MarginalReport<R>, ModelError> {
        self.scenario.lowerset(target.members().iter().copied())?;
        let on: Vec<usize> = target.members().to_vec();
        let off: Vec<usize> = (0..self.scenario.event_count())
            .filter(|k| !target.contains(*k))
            .collect();
        let mut grouped: BTreeMap<Assignment, Vec<(Assignment, Distribution<R>)>> = BTreeMap::new();
        for (input, row) in &self.rows {
            let context: Assignment = on.iter().map(|&k| input[k]).collect();
            let rest: Assignment = off.iter().map(|&k| input[k]).collect();
            grouped
                .entry(context)
                .or_default()
                .push((rest, row.marginal_to(&on)));
        }
        let mut groups = Vec::with_capacity(grouped.len());
        let mut max_discrepancy = R::zero();
        for (context, members) in grouped {
            let mut discrepancy = R::zero();
            for (k, (_, a)) in members.iter().enumerate() {
                for (_, b) in members.iter().skip(k + 1) {
                    let d = a.max_abs_difference(b);
                    if d > discrepancy {
                        discrepancy = d;
                    }
                }
            }
            if discrepancy > max_discrepancy {
                max_discrepancy = discrepancy.clone();
            }
            groups.push(MarginalGroup {
                context,
                members,
                discrepancy,
            });
        }
        Ok(MarginalReport {
            lowerset: target.clone(),
            groups,
            compatible: max_discrepancy <= *tolerance,
            max_discrepancy,
            tolerance: tolerance.clone(),
        })
    }

    /// Compatibility against every lowerset of the scenario's order at once;
    /// the largest discrepancy over all of them.
    pub fn max_incompatibility(&self, tolerance: &R) -> Result<R, ModelError> {
        let mut worst = R::zero();
        for low in self.scenario.lowersets() {
            let report = self.check_compatibility(&low, tolerance)?;
            if report.max_discrepancy > worst {
                worst = report.max_discrepancy;
            }
        }
        Ok(worst)
    }

    // -- wire format ------------------------------------------------------

    /// Serializes to the model JSON layout: scenario block plus label-keyed
    /// rows. Rational cells render as fraction strings, float cells as JSON
    /// numbers.
    pub fn to_json_value(&self) -> Value {
        let mut rows = JsonMap::new();
        for (input, dist) in &self.rows {
            let mut cells = JsonMap::new();
            for (output, p) in &dist.probs {
                let key = render_assignment(&self.scenario, output, LabelKind::Output);
                let value = if R::EXACT {
                    Value::String(p.render())
                } else {
                    json!(p.to_f64())
                };
                cells.insert(key, value);
            }
            rows.insert(
                render_assignment(&self.scenario, input, LabelKind::Input),
                Value::Object(cells),
            );
        }
        let mut root = JsonMap::new();
        if let Some(meta) = &self.meta {
            root.insert("meta".into(), serde_json::to_value(meta).unwrap_or(Value::Null));
        }
        root.insert("rows".into(), Value::Object(rows));
        root.insert(
            "scenario".into(),
            serde_json::to_value(ScenarioSpec::from_scenario(&self.scenario)).unwrap_or(Value::Null),
        );
        Value::Object(root)
    }

    pub fn to_json_string(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.to_json_value())
            .expect("model JSON serialization cannot fail");
        text.push('\n');
        text
    }
}

enum LabelKind {
    Input,
    Output,
}

fn render_assignment(scenario: &CausalScenario, assignment: &Assignment, kind: LabelKind) -> String {
    assignment
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let ev = &scenario.events()[k];
            let labels = match kind {
                LabelKind::Input => &ev.inputs,
                LabelKind::Output => &ev.outputs,
            };
            labels[v as usize].clone()
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_assignment(
    scenario: &CausalScenario,
    key: &str,
    kind: LabelKind,
) -> Result<Assignment, ModelError> {
    let parts: Vec<&str> = key.split(',').collect();
    if parts.len() != scenario.event_count() {
        return Err(ModelError::BadKey(key.to_string()));
    }
    let mut assignment = Vec::with_capacity(parts.len());
    for (k, part) in parts.iter().enumerate() {
        let ev = &scenario.events()[k];
        let (labels, name) = match kind {
            LabelKind::Input => (&ev.inputs, "input"),
            LabelKind::Output => (&ev.outputs, "output"),
        };
        let idx = labels.iter().position(|l| l == part.trim()).ok_or_else(|| {
            ModelError::UnknownLabel {
                kind: name,
                event: ev.id.clone(),
                label: part.trim().to_string(),
            }
        })?;
        assignment.push(idx as u16);
    }
    Ok(assignment)
}

/// A model in whichever arithmetic mode its source file dictated: any JSON
/// number in the rows selects float mode, all-string cells stay rational.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Rational(EmpiricalModel<Rational>),
    Float(EmpiricalModel<f64>),
}

impl AnyModel {
    pub fn meta(&self) -> Option<&ModelMeta> {
        match self {
            AnyModel::Rational(m) => m.meta(),
            AnyModel::Float(m) => m.meta(),
        }
    }

    pub fn scenario(&self) -> &CausalScenario {
        match self {
            AnyModel::Rational(m) => m.scenario(),
            AnyModel::Float(m) => m.scenario(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, AnyModel::Rational(_))
    }

    /// Drops exactness: rational models converted cell-wise to floats.
    pub fn into_float(self) -> EmpiricalModel<f64> {
        match self {
            AnyModel::Float(m) => m,
            AnyModel::Rational(m) => {
                let table = model_table(&m, |p| p.to_f64());
                let mut out = EmpiricalModel::from_table(m.scenario().clone(), &table)
                    .expect("valid rational model converts to float");
                if let Some(meta) = m.meta() {
                    out = out.with_meta(meta.clone());
                }
                out
            }
        }
    }

    /// Forces exact arithmetic. Float cells are read back through their
    /// shortest decimal rendering, so `0.25` becomes 1/4; rows are then
    /// renormalized by scaling the largest cell so they sum to exactly 1.
    pub fn into_rational(self) -> Result<EmpiricalModel<Rational>, ModelError> {
        match self {
            AnyModel::Rational(m) => Ok(m),
            AnyModel::Float(m) => {
                let mut table: Vec<Vec<Rational>> = model_table(&m, |p| {
                    Rational::parse_text(&p.render()).expect("rendered floats parse")
                })
                .into_iter()
                .collect();
                for row in table.iter_mut() {
                    let total: Rational = row.iter().cloned().sum();
                    let drift = Rational::one() - total;
                    if !drift.is_zero() {
                        let largest = row
                            .iter()
                            .enumerate()
                            .max_by(|(_, a), (_, b)| a.partial_cmp(b).expect("rationals compare"))
                            .map(|(k, _)| k)
                            .expect("rows are nonempty");
                        row[largest] = row[largest].clone() + drift;
                    }
                }
                let mut out = EmpiricalModel::from_table(m.scenario().clone(), &table)?;
                if let Some(meta) = m.meta() {
                    out = out.with_meta(meta.clone());
                }
                Ok(out)
            }
        }
    }

    pub fn to_json_string(&self) -> String {
        match self {
            AnyModel::Rational(m) => m.to_json_string(),
            AnyModel::Float(m) => m.to_json_string(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<AnyModel, ModelError> {
        Self::from_json_str_with(text, None)
    }

    /// `float_tolerance` overrides the float-mode row normalization
    /// tolerance (default 1e-9); exact mode ignores it.
    pub fn from_json_str_with(
        text: &str,
        float_tolerance: Option<f64>,
    ) -> Result<AnyModel, ModelError> {
        let value: Value = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        Self::from_json_value_with(&value, float_tolerance)
    }

    pub fn from_json_value(value: &Value) -> Result<AnyModel, ModelError> {
        Self::from_json_value_with(value, None)
    }

    pub fn from_json_value_with(
        value: &Value,
        float_tolerance: Option<f64>,
    ) -> Result<AnyModel, ModelError> {
        let obj = value
            .as_object()
            .ok_or_else(|| ModelError::Json("top level must be an object".into()))?;
        let scenario_value = obj
            .get("scenario")
            .ok_or_else(|| ModelError::Json("missing `scenario` block".into()))?;
        let spec: ScenarioSpec = serde_json::from_value(scenario_value.clone())
            .map_err(|e| ModelError::Json(format!("scenario block: {e}")))?;
        let scenario = spec.build()?;
        let rows_value = obj
            .get("rows")
            .and_then(Value::as_object)
            .ok_or_else(|| ModelError::Json("missing `rows` object".into()))?;
        let meta: Option<ModelMeta> = match obj.get("meta") {
            Some(v) => Some(
                serde_json::from_value(v.clone())
                    .map_err(|e| ModelError::Json(format!("meta block: {e}")))?,
            ),
            None => None,
        };
        let float_mode = rows_value
            .values()
            .filter_map(Value::as_object)
            .flat_map(|cells| cells.values())
            .any(Value::is_number);
        let model = if float_mode {
            AnyModel::Float(build_from_json_rows_with::<f64>(
                &scenario,
                rows_value,
                float_tolerance,
            )?)
        } else {
            AnyModel::Rational(build_from_json_rows::<Rational>(&scenario, rows_value)?)
        };
        Ok(match (model, meta) {
            (AnyModel::Rational(m), Some(meta)) => AnyModel::Rational(m.with_meta(meta)),
            (AnyModel::Float(m), Some(meta)) => AnyModel::Float(m.with_meta(meta)),
            (m, None) => m,
        })
    }

    /// Reads the table CSV layout: first column holds joint-input labels,
    /// header holds joint-output labels, events and alphabets are inferred
    /// in order of appearance (no order relation). Cells containing `.` or
    /// an exponent select float mode unless `force_exact` is set.
    pub fn from_csv_str(text: &str, force_exact: Option<bool>) -> Result<AnyModel, ModelError> {
        Self::from_csv_str_with(text, force_exact, None)
    }

    pub fn from_csv_str_with(
        text: &str,
        force_exact: Option<bool>,
        float_tolerance: Option<f64>,
    ) -> Result<AnyModel, ModelError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut records: Vec<Vec<String>> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| ModelError::Csv(e.to_string()))?;
            records.push(record.iter().map(|s| s.to_string()).collect());
        }
        if records.len() < 2 || records[0].len() < 2 {
            return Err(ModelError::Csv("need a header row and at least one data row".into()));
        }
        let output_keys: Vec<String> = records[0][1..].to_vec();
        let input_keys: Vec<String> = records[1..].iter().map(|r| r[0].clone()).collect();
        let arity = output_keys
            .first()
            .map(|k| k.split(',').count())
            .unwrap_or(0);
        if arity == 0 {
            return Err(ModelError::Csv("empty output header".into()));
        }
        let mut input_alphabets: Vec<Vec<String>> = vec![Vec::new(); arity];
        let mut output_alphabets: Vec<Vec<String>> = vec![Vec::new(); arity];
        for (keys, alphabets) in [
            (&input_keys, &mut input_alphabets),
            (&output_keys, &mut output_alphabets),
        ] {
            for key in keys.iter() {
                let parts: Vec<&str> = key.split(',').map(str::trim).collect();
                if parts.len() != arity {
                    return Err(ModelError::Csv(format!(
                        "label `{key}` has {} components, expected {arity}",
                        parts.len()
                    )));
                }
                for (k, part) in parts.iter().enumerate() {
                    if !alphabets[k].iter().any(|l| l == part) {
                        alphabets[k].push(part.to_string());
                    }
                }
            }
        }
        let events: Vec<Event> = (0..arity)
            .map(|k| {
                let id = char::from(b'A' + (k as u8 % 26)).to_string();
                Event::new(id, input_alphabets[k].clone(), output_alphabets[k].clone())
            })
            .collect();
        let scenario = CausalScenario::new(events, &[])?;
        let float_mode = match force_exact {
            Some(true) => false,
            Some(false) => true,
            None => records[1..]
                .iter()
                .flat_map(|r| r[1..].iter())
                .any(|cell| cell.contains('.') || cell.contains('e') || cell.contains('E')),
        };
        let mut rows = JsonMap::new();
        for record in &records[1..] {
            if record.len() != output_keys.len() + 1 {
                return Err(ModelError::Csv(format!(
                    "row `{}` has {} cells, expected {}",
                    record[0],
                    record.len() - 1,
                    output_keys.len()
                )));
            }
            let mut cells = JsonMap::new();
            for (key, cell) in output_keys.iter().zip(&record[1..]) {
                cells.insert(key.clone(), Value::String(cell.clone()));
            }
            rows.insert(record[0].clone(), Value::Object(cells));
        }
        if float_mode {
            Ok(AnyModel::Float(build_from_json_rows_with::<f64>(
                &scenario,
                &rows,
                float_tolerance,
            )?))
        } else {
            Ok(AnyModel::Rational(build_from_json_rows::<Rational>(
                &scenario, &rows,
            )?))
        }
    }
}

fn build_from_json_rows<R: Scalar>(
    scenario: &CausalScenario,
    rows_value: &JsonMap<String, Value>,
) -> Result<EmpiricalModel<R>, ModelError> {
    build_from_json_rows_with(scenario, rows_value, None)
}

fn build_from_json_rows_with<R: Scalar>(
    scenario: &CausalScenario,
    rows_value: &JsonMap<String, Value>,
    float_tolerance: Option<f64>,
) -> Result<EmpiricalModel<R>, ModelError> {
    let inputs = scenario.joint_inputs();
    let outputs = scenario.joint_outputs();
    let mut table: BTreeMap<Assignment, Vec<R>> = BTreeMap::new();
    for (row_key, cells) in rows_value {
        let input = parse_assignment(scenario, row_key, LabelKind::Input)?;
        let cells = cells
            .as_object()
            .ok_or_else(|| ModelError::Json(format!("row `{row_key}` is not an object")))?;
        let mut row = vec![R::zero(); outputs.len()];
        let mut seen = vec![false; outputs.len()];
        for (cell_key, cell_value) in cells {
            let output = parse_assignment(scenario, cell_key, LabelKind::Output)?;
            let pos = outputs
                .iter()
                .position(|o| o == &output)
                .expect("parsed assignment is a valid output");
            let parsed = match cell_value {
                Value::String(s) => R::parse_text(s)?,
                Value::Number(n) => {
                    let f = n
                        .as_f64()
                        .ok_or_else(|| ModelError::Json(format!("bad number in `{row_key}`")))?;
                    R::parse_text(&f.to_string())?
                }
                _ => {
                    return Err(ModelError::Json(format!(
                        "cell `{cell_key}` in row `{row_key}` must be a string or number"
                    )))
                }
            };
            if seen[pos] {
                return Err(ModelError::Json(format!(
                    "duplicate cell `{cell_key}` in row `{row_key}`"
                )));
            }
            seen[pos] = true;
            row[pos] = parsed;
        }
        if table.insert(input, row).is_some() {
            return Err(ModelError::Json(format!("duplicate row key `{row_key}`")));
        }
    }
    for input in &inputs {
        if !table.contains_key(input) {
            return Err(ModelError::MissingRow(render_assignment(
                scenario,
                input,
                LabelKind::Input,
            )));
        }
    }
    let ordered: Vec<Vec<R>> = inputs.iter().map(|i| table[i].clone()).collect();
    let tolerance = match float_tolerance {
        Some(t) if !R::EXACT => R::parse_text(&t.to_string())?,
        _ => R::default_tolerance(),
    };
    EmpiricalModel::from_table_with_tolerance(scenario.clone(), &ordered, &tolerance)
}

/// Cell-wise view of a model as a row-major table (test and conversion aid).
pub fn model_table<R: Scalar, T>(model: &EmpiricalModel<R>, f: impl Fn(&R) -> T) -> Vec<Vec<T>> {
    let outputs = model.scenario().joint_outputs();
    model
        .scenario()
        .joint_inputs()
        .iter()
        .map(|input| {
            let row = model.row(input).expect("model rows are total");
            outputs
                .iter()
                .map(|o| f(row.get(o).expect("distributions are total")))
                .collect()
        })
        .collect()
}
