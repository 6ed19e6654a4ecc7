//! Causal scenarios: finite posets of events with per-event input and output
//! alphabets, their lowersets, and the causal functions over them.
//!
//! A causal function maps joint inputs to joint outputs such that the output
//! of an event depends only on inputs of events at or below it in the order.
//! For every downward-closed set of events paired with nonempty input
//! restrictions (a locale element) the causal functions form the sections of
//! the event sheaf; [`CausalScenario::enumerate_sections`] lists them and
//! [`CausalScenario::restrict_section`] is the sheaf restriction map.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard limit on event count; every downstream analysis enumerates subsets
/// or sections, so larger posets are rejected up front.
pub const MAX_EVENTS: usize = 20;

/// Default cap on how many sections [`CausalScenario::enumerate_sections`]
/// will materialize.
pub const DEFAULT_SECTION_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("directed cycle through events `{0}` and `{1}`")]
    Cycle(String, String),
    #[error("event `{event}` has an empty {kind} alphabet")]
    EmptyAlphabet { event: String, kind: &'static str },
    #[error("unknown event `{0}` in order relation")]
    UnknownEvent(String),
    #[error("duplicate event id `{0}`")]
    DuplicateEvent(String),
    #[error("duplicate {kind} label `{label}` on event `{event}`")]
    DuplicateLabel {
        event: String,
        kind: &'static str,
        label: String,
    },
    #[error("{kind} label `{label}` on event `{event}` must be nonempty and comma-free")]
    BadLabel {
        event: String,
        kind: &'static str,
        label: String,
    },
    #[error("scenario has {0} events, more than the supported {MAX_EVENTS}")]
    TooManyEvents(usize),
    #[error("event set is not downward closed: `{member}` requires `{missing}`")]
    NotLowerset { member: String, missing: String },
    #[error("empty input restriction on event `{0}`")]
    EmptyInputRestriction(String),
    #[error("input restriction on `{event}` references input index {index} out of range")]
    BadInputIndex { event: String, index: u16 },
    #[error("section enumeration would produce {required} functions, above the cap of {cap}")]
    SizeLimit { required: u128, cap: usize },
    #[error("function domain does not match the requested scenario: {0}")]
    DomainMismatch(String),
    #[error("restriction target is not below the source in the locale order")]
    NotBelow,
}

/// One event of a scenario: an id plus its input and output alphabets.
///
/// Alphabet order is significant; joint assignments are canonicalized by the
/// declared event order and by each alphabet's label order so that tables
/// compare bit for bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub id: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl Event {
    pub fn new(
        id: impl Into<String>,
        inputs: impl IntoIterator<Item = impl Into<String>>,
        outputs: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        Event {
            id: id.into(),
            inputs: inputs.into_iter().map(Into::into).collect(),
            outputs: outputs.into_iter().map(Into::into).collect(),
        }
    }

    /// Binary-input, binary-output event with labels `0` and `1`.
    pub fn binary(id: impl Into<String>) -> Self {
        Event::new(id, ["0", "1"], ["0", "1"])
    }
}

/// A joint assignment over some list of events: one alphabet index per event.
/// The event scope is carried by context (full scenario or a lowerset).
pub type Assignment = Vec<u16>;

/// A validated causal scenario: events with alphabets and a partial order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalScenario {
    events: Vec<Event>,
    declared_order: Vec<(usize, usize)>,
    /// Reflexive-transitive closure; `leq[a][b]` means a precedes-or-equals b.
    leq: Vec<Vec<bool>>,
}

/// A downward-closed set of events, stored as sorted scenario indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lowerset {
    members: Vec<usize>,
}

impl Lowerset {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, event: usize) -> bool {
        self.members.binary_search(&event).is_ok()
    }

    pub fn is_subset_of(&self, other: &Lowerset) -> bool {
        self.members.iter().all(|m| other.contains(*m))
    }
}

/// A lowerset together with a nonempty input restriction per member event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocaleElement {
    pub lowerset: Lowerset,
    /// For each member (aligned with `lowerset.members()`), the sorted set of
    /// allowed input indices. Always nonempty.
    pub inputs: Vec<Vec<u16>>,
}

impl LocaleElement {
    /// `(U, underline-U) <= (V, underline-V)` in the locale order.
    pub fn is_below(&self, other: &LocaleElement) -> bool {
        if !self.lowerset.is_subset_of(&other.lowerset) {
            return false;
        }
        for (k, event) in self.lowerset.members().iter().enumerate() {
            let pos = other
                .lowerset
                .members()
                .iter()
                .position(|m| m == event)
                .expect("subset checked");
            let ours = &self.inputs[k];
            let theirs = &other.inputs[pos];
            if !ours.iter().all(|i| theirs.contains(i)) {
                return false;
            }
        }
        true
    }
}

/// A causal function: a total map from joint inputs to joint outputs over the
/// events of some lowerset, satisfying the causality condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalFunction {
    /// Scenario indices of the in-scope events, sorted ascending.
    pub events: Vec<usize>,
    /// Input assignment (aligned with `events`) to output assignment.
    pub table: BTreeMap<Assignment, Assignment>,
}

impl fmt::Display for CausalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (inp, out) in &self.table {
            writeln!(f, "{inp:?} -> {out:?}")?;
        }
        Ok(())
    }
}

/// Iterates the cartesian product of per-position domains in lexicographic
/// order. `domains[k]` lists the allowed values at position k.
pub fn product_assignments(domains: &[Vec<u16>]) -> Vec<Assignment> {
    let mut out = vec![vec![]];
    for dom in domains {
        let mut next = Vec::with_capacity(out.len() * dom.len());
        for prefix in &out {
            for &v in dom {
                let mut item = prefix.clone();
                item.push(v);
                next.push(item);
            }
        }
        out = next;
    }
    out
}

fn full_range(n: usize) -> Vec<u16> {
    (0..n as u16).collect()
}

impl CausalScenario {
    /// Validates events and order pairs into a scenario.
    ///
    /// The order is given as directed pairs of event ids ("first precedes
    /// second"); its reflexive-transitive closure must be antisymmetric.
    pub fn new(
        events: Vec<Event>,
        order: &[(String, String)],
    ) -> Result<CausalScenario, ScenarioError> {
        if events.len() > MAX_EVENTS {
            return Err(ScenarioError::TooManyEvents(events.len()));
        }
        let mut index = BTreeMap::new();
        for (k, ev) in events.iter().enumerate() {
            if index.insert(ev.id.clone(), k).is_some() {
                return Err(ScenarioError::DuplicateEvent(ev.id.clone()));
            }
            if ev.inputs.is_empty() {
                return Err(ScenarioError::EmptyAlphabet {
                    event: ev.id.clone(),
                    kind: "input",
                });
            }
            if ev.outputs.is_empty() {
                return Err(ScenarioError::EmptyAlphabet {
                    event: ev.id.clone(),
                    kind: "output",
                });
            }
            for (kind, labels) in [("input", &ev.inputs), ("output", &ev.outputs)] {
                let mut seen = BTreeSet::new();
                for label in labels {
                    // Labels become components of comma-joined row keys.
                    if label.is_empty() || label.contains(',') {
                        return Err(ScenarioError::BadLabel {
                            event: ev.id.clone(),
                            kind,
                            label: label.clone(),
                        });
                    }
                    if !seen.insert(label) {
                        return Err(ScenarioError::DuplicateLabel {
                            event: ev.id.clone(),
                            kind,
                            label: label.clone(),
                        });
                    }
                }
            }
        }
        let n = events.len();
        let mut declared = Vec::with_capacity(order.len());
        let mut leq = vec![vec![false; n]; n];
        for (k, row) in leq.iter_mut().enumerate() {
            row[k] = true;
        }
        for (a, b) in order {
            let ia = *index
                .get(a)
                .ok_or_else(|| ScenarioError::UnknownEvent(a.clone()))?;
            let ib = *index
                .get(b)
                .ok_or_else(|| ScenarioError::UnknownEvent(b.clone()))?;
            declared.push((ia, ib));
            leq[ia][ib] = true;
        }
        // Warshall closure, then antisymmetry.
        for k in 0..n {
            for i in 0..n {
                if leq[i][k] {
                    let via: Vec<bool> = leq[k].clone();
                    for (j, reachable) in via.iter().enumerate() {
                        if *reachable {
                            leq[i][j] = true;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if leq[i][j] && leq[j][i] {
                    return Err(ScenarioError::Cycle(
                        events[i].id.clone(),
                        events[j].id.clone(),
                    ));
                }
            }
        }
        Ok(CausalScenario {
            events,
            declared_order: declared,
            leq,
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn event_index(&self, id: &str) -> Option<usize> {
        self.events.iter().position(|e| e.id == id)
    }

    pub fn declared_order(&self) -> &[(usize, usize)] {
        &self.declared_order
    }

    /// `a` precedes-or-equals `b` in the closure of the declared order.
    pub fn leq(&self, a: usize, b: usize) -> bool {
        self.leq[a][b]
    }

    /// The down-set of an event: every event at or below it.
    pub fn down_set(&self, event: usize) -> Vec<usize> {
        (0..self.events.len())
            .filter(|&other| self.leq[other][event])
            .collect()
    }

    /// True when the same events carry the same alphabets (order relation may
    /// differ). Models over equal shapes are comparable cell by cell.
    pub fn same_shape(&self, other: &CausalScenario) -> bool {
        self.events == other.events
    }

    /// Rebuilds this scenario with a different order on the same events.
    pub fn with_order(&self, order: &[(usize, usize)]) -> Result<CausalScenario, ScenarioError> {
        let named: Vec<(String, String)> = order
            .iter()
            .map(|&(a, b)| (self.events[a].id.clone(), self.events[b].id.clone()))
            .collect();
        CausalScenario::new(self.events.clone(), &named)
    }

    /// Builds a lowerset from member indices, rejecting sets that are not
    /// downward closed.
    pub fn lowerset(&self, members: impl IntoIterator<Item = usize>) -> Result<Lowerset, ScenarioError> {
        let set: BTreeSet<usize> = members.into_iter().collect();
        for &m in &set {
            for below in self.down_set(m) {
                if !set.contains(&below) {
                    return Err(ScenarioError::NotLowerset {
                        member: self.events[m].id.clone(),
                        missing: self.events[below].id.clone(),
                    });
                }
            }
        }
        Ok(Lowerset {
            members: set.into_iter().collect(),
        })
    }

    pub fn full_lowerset(&self) -> Lowerset {
        Lowerset {
            members: (0..self.events.len()).collect(),
        }
    }

    pub fn empty_lowerset(&self) -> Lowerset {
        Lowerset { members: vec![] }
    }

    /// All lowersets, sorted by size then lexicographically by members.
    pub fn lowersets(&self) -> Vec<Lowerset> {
        let n = self.events.len();
        let mut found = Vec::new();
        for mask in 0u32..(1u32 << n) {
            let members: Vec<usize> = (0..n).filter(|k| mask & (1 << k) != 0).collect();
            let closed = members.iter().all(|&m| {
                self.down_set(m)
                    .into_iter()
                    .all(|below| mask & (1 << below) != 0)
            });
            if closed {
                found.push(Lowerset { members });
            }
        }
        found.sort_by(|a, b| {
            a.members
                .len()
                .cmp(&b.members.len())
                .then_with(|| a.members.cmp(&b.members))
        });
        found
    }

    /// The largest locale element below both arguments: intersect input sets,
    /// drop events whose intersection is empty, then prune upward-dangling
    /// events until the member set is downward closed again.
    pub fn locale_meet(&self, a: &LocaleElement, b: &LocaleElement) -> LocaleElement {
        let mut keep: BTreeMap<usize, Vec<u16>> = BTreeMap::new();
        for (k, event) in a.lowerset.members().iter().enumerate() {
            if let Some(pos) = b.lowerset.members().iter().position(|m| m == event) {
                let shared: Vec<u16> = a.inputs[k]
                    .iter()
                    .copied()
                    .filter(|i| b.inputs[pos].contains(i))
                    .collect();
                if !shared.is_empty() {
                    keep.insert(*event, shared);
                }
            }
        }
        loop {
            let dangling: Vec<usize> = keep
                .keys()
                .copied()
                .filter(|&m| self.down_set(m).iter().any(|below| !keep.contains_key(below)))
                .collect();
            if dangling.is_empty() {
                break;
            }
            for m in dangling {
                keep.remove(&m);
            }
        }
        let members: Vec<usize> = keep.keys().copied().collect();
        let inputs: Vec<Vec<u16>> = keep.into_values().collect();
        LocaleElement {
            lowerset: Lowerset { members },
            inputs,
        }
    }

    /// Componentwise union of two locale elements.
    pub fn locale_join(&self, a: &LocaleElement, b: &LocaleElement) -> LocaleElement {
        let mut union: BTreeMap<usize, BTreeSet<u16>> = BTreeMap::new();
        for (elem, _) in [(a, 0), (b, 1)] {
            for (k, event) in elem.lowerset.members().iter().enumerate() {
                union
                    .entry(*event)
                    .or_default()
                    .extend(elem.inputs[k].iter().copied());
            }
        }
        let members: Vec<usize> = union.keys().copied().collect();
        let inputs: Vec<Vec<u16>> = union.into_values().map(|s| s.into_iter().collect()).collect();
        LocaleElement {
            lowerset: Lowerset { members },
            inputs,
        }
    }

    /// Locale element with the full input alphabet on each member of `low`.
    pub fn full_inputs_on(&self, low: &Lowerset) -> LocaleElement {
        LocaleElement {
            inputs: low
                .members()
                .iter()
                .map(|&m| full_range(self.events[m].inputs.len()))
                .collect(),
            lowerset: low.clone(),
        }
    }

    /// Validates a locale element against this scenario.
    pub fn check_locale_element(&self, elem: &LocaleElement) -> Result<(), ScenarioError> {
        self.lowerset(elem.lowerset.members().iter().copied())?;
        if elem.inputs.len() != elem.lowerset.len() {
            return Err(ScenarioError::DomainMismatch(
                "input restriction count does not match lowerset size".into(),
            ));
        }
        for (k, &m) in elem.lowerset.members().iter().enumerate() {
            if elem.inputs[k].is_empty() {
                return Err(ScenarioError::EmptyInputRestriction(self.events[m].id.clone()));
            }
            for &i in &elem.inputs[k] {
                if i as usize >= self.events[m].inputs.len() {
                    return Err(ScenarioError::BadInputIndex {
                        event: self.events[m].id.clone(),
                        index: i,
                    });
                }
            }
        }
        Ok(())
    }

    /// Every full joint input assignment, lexicographic.
    pub fn joint_inputs(&self) -> Vec<Assignment> {
        product_assignments(
            &self
                .events
                .iter()
                .map(|e| full_range(e.inputs.len()))
                .collect::<Vec<_>>(),
        )
    }

    /// Every full joint output assignment, lexicographic.
    pub fn joint_outputs(&self) -> Vec<Assignment> {
        product_assignments(
            &self
                .events
                .iter()
                .map(|e| full_range(e.outputs.len()))
                .collect::<Vec<_>>(),
        )
    }

    /// Output assignments over the members of a lowerset, lexicographic.
    pub fn outputs_on(&self, low: &Lowerset) -> Vec<Assignment> {
        product_assignments(
            &low.members()
                .iter()
                .map(|&m| full_range(self.events[m].outputs.len()))
                .collect::<Vec<_>>(),
        )
    }

    /// Checks the causality condition: for every event, inputs outside its
    /// down-set have no influence on its output. `f` must be total on the
    /// full joint input domain of this scenario.
    pub fn is_causal_function(&self, f: &CausalFunction) -> Result<bool, ScenarioError> {
        let all: Vec<usize> = (0..self.events.len()).collect();
        if f.events != all {
            return Err(ScenarioError::DomainMismatch(
                "function scope is not the full event set".into(),
            ));
        }
        let domain = self.joint_inputs();
        if f.table.len() != domain.len() {
            return Err(ScenarioError::DomainMismatch(format!(
                "expected {} table rows, found {}",
                domain.len(),
                f.table.len()
            )));
        }
        for inp in &domain {
            let Some(out) = f.table.get(inp) else {
                return Err(ScenarioError::DomainMismatch(format!(
                    "missing table row for input {inp:?}"
                )));
            };
            if out.len() != self.events.len() {
                return Err(ScenarioError::DomainMismatch(format!(
                    "output arity mismatch at input {inp:?}"
                )));
            }
            for (k, ev) in self.events.iter().enumerate() {
                if inp[k] as usize >= ev.inputs.len() || out[k] as usize >= ev.outputs.len() {
                    return Err(ScenarioError::DomainMismatch(format!(
                        "assignment out of alphabet range at input {inp:?}"
                    )));
                }
            }
        }
        Ok(Self::causal_on_table(
            &f.events,
            |event: usize| self.down_set(event),
            &f.table,
        ))
    }

    /// Causality of a table over `scope` (sorted scenario indices): each
    /// event's output must be constant across inputs agreeing on its down-set.
    fn causal_on_table(
        scope: &[usize],
        down_set: impl Fn(usize) -> Vec<usize>,
        table: &BTreeMap<Assignment, Assignment>,
    ) -> bool {
        for (pos, &event) in scope.iter().enumerate() {
            let down = down_set(event);
            let down_positions: Vec<usize> = scope
                .iter()
                .enumerate()
                .filter(|(_, e)| down.contains(e))
                .map(|(k, _)| k)
                .collect();
            let mut seen: BTreeMap<Assignment, u16> = BTreeMap::new();
            for (inp, out) in table {
                let key: Assignment = down_positions.iter().map(|&k| inp[k]).collect();
                match seen.get(&key) {
                    Some(&prev) if prev != out[pos] => return false,
                    Some(_) => {}
                    None => {
                        seen.insert(key, out[pos]);
                    }
                }
            }
        }
        true
    }

    /// Number of sections over a locale element, without enumerating them.
    pub fn section_count(&self, elem: &LocaleElement) -> Result<u128, ScenarioError> {
        self.check_locale_element(elem)?;
        let mut total: u128 = 1;
        for (k, &event) in elem.lowerset.members().iter().enumerate() {
            let mut domain: u128 = 1;
            for (j, &other) in elem.lowerset.members().iter().enumerate() {
                if self.leq[other][event] {
                    domain = domain.saturating_mul(elem.inputs[j].len() as u128);
                }
            }
            let outputs = self.events[event].outputs.len() as u128;
            let choices = outputs
                .checked_pow(u32::try_from(domain).unwrap_or(u32::MAX))
                .unwrap_or(u128::MAX);
            total = total.saturating_mul(choices);
            let _ = k;
        }
        Ok(total)
    }

    /// All sections of the event sheaf over a locale element, in a fixed
    /// deterministic order, duplicate-free.
    pub fn enumerate_sections(
        &self,
        elem: &LocaleElement,
    ) -> Result<Vec<CausalFunction>, ScenarioError> {
        self.enumerate_sections_capped(elem, DEFAULT_SECTION_CAP)
    }

    pub fn enumerate_sections_capped(
        &self,
        elem: &LocaleElement,
        cap: usize,
    ) -> Result<Vec<CausalFunction>, ScenarioError> {
        let required = self.section_count(elem)?;
        if required > cap as u128 {
            return Err(ScenarioError::SizeLimit { required, cap });
        }
        let members = elem.lowerset.members();
        // Per-event local domains: inputs of the event's down-set within the
        // lowerset, in member order.
        let mut local_domains: Vec<Vec<Assignment>> = Vec::with_capacity(members.len());
        let mut local_positions: Vec<Vec<usize>> = Vec::with_capacity(members.len());
        for &event in members {
            let positions: Vec<usize> = members
                .iter()
                .enumerate()
                .filter(|(_, &other)| self.leq[other][event])
                .map(|(j, _)| j)
                .collect();
            let domains: Vec<Vec<u16>> = positions.iter().map(|&j| elem.inputs[j].clone()).collect();
            local_domains.push(product_assignments(&domains));
            local_positions.push(positions);
        }
        // A section is one output-choice vector per event over its local
        // domain; enumerate the product in mixed-radix order.
        let out_sizes: Vec<usize> = members
            .iter()
            .map(|&m| self.events[m].outputs.len())
            .collect();
        let mut per_event_tables: Vec<Vec<Vec<u16>>> = Vec::with_capacity(members.len());
        for (k, domain) in local_domains.iter().enumerate() {
            let arity = domain.len();
            let outs = out_sizes[k] as u16;
            let mut tables = Vec::new();
            let mut current = vec![0u16; arity];
            loop {
                tables.push(current.clone());
                let mut pos = arity;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    current[pos] += 1;
                    if current[pos] < outs {
                        break;
                    }
                    current[pos] = 0;
                    if pos == 0 {
                        pos = usize::MAX;
                        break;
                    }
                }
                if arity == 0 || pos == usize::MAX {
                    break;
                }
            }
            if arity == 0 {
                // No inputs in scope means exactly one (empty) choice table,
                // which the loop above already produced once.
                tables.truncate(1);
            }
            per_event_tables.push(tables);
        }
        let joint_domain = product_assignments(&elem.inputs);
        let mut sections = Vec::new();
        let combo_counts: Vec<usize> = per_event_tables.iter().map(|t| t.len()).collect();
        let mut combo = vec![0usize; members.len()];
        loop {
            let mut table = BTreeMap::new();
            for joint in &joint_domain {
                let mut out = Vec::with_capacity(members.len());
                for (k, positions) in local_positions.iter().enumerate() {
                    let local: Assignment = positions.iter().map(|&j| joint[j]).collect();
                    let idx = local_domains[k]
                        .iter()
                        .position(|d| d == &local)
                        .expect("local assignment in enumerated domain");
                    out.push(per_event_tables[k][combo[k]][idx]);
                }
                table.insert(joint.clone(), out);
            }
            sections.push(CausalFunction {
                events: members.to_vec(),
                table,
            });
            let mut pos = members.len();
            loop {
                if pos == 0 {
                    return Ok(sections);
                }
                pos -= 1;
                combo[pos] += 1;
                if combo[pos] < combo_counts[pos] {
                    break;
                }
                combo[pos] = 0;
                if pos == 0 {
                    return Ok(sections);
                }
            }
        }
    }

    /// Sheaf restriction: shrink a section's domain to a smaller locale
    /// element, projecting outputs onto the smaller lowerset. `f` must be a
    /// section over `from`.
    pub fn restrict_section(
        &self,
        f: &CausalFunction,
        from: &LocaleElement,
        to: &LocaleElement,
    ) -> Result<CausalFunction, ScenarioError> {
        self.check_locale_element(from)?;
        self.check_locale_element(to)?;
        if !to.is_below(from) {
            return Err(ScenarioError::NotBelow);
        }
        if f.events != from.lowerset.members() {
            return Err(ScenarioError::DomainMismatch(
                "function scope does not match the source locale element".into(),
            ));
        }
        let from_members = from.lowerset.members();
        let to_members = to.lowerset.members();
        let keep: Vec<usize> = from_members
            .iter()
            .enumerate()
            .filter(|(_, m)| to_members.contains(m))
            .map(|(k, _)| k)
            .collect();
        let mut table = BTreeMap::new();
        for reduced in product_assignments(&to.inputs) {
            // Extend to the source domain; causality makes the choice of
            // filler inputs irrelevant to the projected outputs.
            let mut extended = Vec::with_capacity(from_members.len());
            for (k, event) in from_members.iter().enumerate() {
                match to_members.iter().position(|m| m == event) {
                    Some(j) => extended.push(reduced[j]),
                    None => extended.push(from.inputs[k][0]),
                }
            }
            let out = f.table.get(&extended).ok_or_else(|| {
                ScenarioError::DomainMismatch(format!("missing table row for input {extended:?}"))
            })?;
            let projected: Assignment = keep.iter().map(|&k| out[k]).collect();
            table.insert(reduced, projected);
        }
        Ok(CausalFunction {
            events: to_members.to_vec(),
            table,
        })
    }
}

// ---------------------------------------------------------------------------
// JSON wire format
// ---------------------------------------------------------------------------

/// Serialized scenario: `{"events":[...],"order":[["A","B"]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub events: Vec<Event>,
    pub order: Vec<(String, String)>,
}

impl ScenarioSpec {
    pub fn from_scenario(scenario: &CausalScenario) -> Self {
        ScenarioSpec {
            events: scenario.events().to_vec(),
            order: scenario
                .declared_order()
                .iter()
                .map(|&(a, b)| {
                    (
                        scenario.events()[a].id.clone(),
                        scenario.events()[b].id.clone(),
                    )
                })
                .collect(),
        }
    }

    pub fn build(&self) -> Result<CausalScenario, ScenarioError> {
        CausalScenario::new(self.events.clone(), &self.order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_ab() -> CausalScenario {
        CausalScenario::new(
            vec![Event::binary("A"), Event::binary("B")],
            &[("A".into(), "B".into())],
        )
        .unwrap()
    }

    fn antichain_ab() -> CausalScenario {
        CausalScenario::new(vec![Event::binary("A"), Event::binary("B")], &[]).unwrap()
    }

    #[test]
    fn validates_two_chain() {
        let s = chain_ab();
        assert!(s.leq(0, 1));
        assert!(!s.leq(1, 0));
        assert_eq!(s.down_set(1), vec![0, 1]);
    }

    #[test]
    fn rejects_cycles_and_empty_alphabets() {
        let err = CausalScenario::new(
            vec![Event::binary("A"), Event::binary("B")],
            &[("A".into(), "B".into()), ("B".into(), "A".into())],
        )
        .unwrap_err();
        assert!(matches!(err, ScenarioError::Cycle(..)));

        let err = CausalScenario::new(
            vec![Event::new("A", ["0"], Vec::<String>::new())],
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, ScenarioError::EmptyAlphabet { kind: "output", .. }));

        let err = CausalScenario::new(
            vec![Event::binary("A")],
            &[("A".into(), "Z".into())],
        )
        .unwrap_err();
        assert!(matches!(err, ScenarioError::UnknownEvent(..)));
    }

    #[test]
    fn lowersets_of_chain_are_prefixes() {
        let s = chain_ab();
        let lows = s.lowersets();
        let as_sets: Vec<Vec<usize>> = lows.iter().map(|l| l.members().to_vec()).collect();
        assert_eq!(as_sets, vec![vec![], vec![0], vec![0, 1]]);
    }

    #[test]
    fn lowersets_of_antichain_are_all_subsets() {
        let s = antichain_ab();
        assert_eq!(s.lowersets().len(), 4);
    }

    #[test]
    fn lowersets_of_three_chain() {
        let s = CausalScenario::new(
            vec![Event::binary("A"), Event::binary("B"), Event::binary("C")],
            &[("A".into(), "B".into()), ("B".into(), "C".into())],
        )
        .unwrap();
        assert_eq!(s.lowersets().len(), 4);
    }

    #[test]
    fn constant_function_is_causal_on_chain() {
        let s = chain_ab();
        let table: BTreeMap<_, _> = s
            .joint_inputs()
            .into_iter()
            .map(|i| (i, vec![0u16, 0u16]))
            .collect();
        let f = CausalFunction {
            events: vec![0, 1],
            table,
        };
        assert!(s.is_causal_function(&f).unwrap());
    }

    #[test]
    fn first_output_copying_second_input_is_not_causal() {
        // o_A = i_B steers a preceding output by a succeeding input.
        for s in [chain_ab(), antichain_ab()] {
            let table: BTreeMap<_, _> = s
                .joint_inputs()
                .into_iter()
                .map(|i| {
                    let o = vec![i[1], 0u16];
                    (i, o)
                })
                .collect();
            let f = CausalFunction {
                events: vec![0, 1],
                table,
            };
            assert!(!s.is_causal_function(&f).unwrap());
        }
    }

    #[test]
    fn second_output_copying_first_input_is_causal_only_on_chain() {
        let build = |s: &CausalScenario| {
            let table: BTreeMap<_, _> = s
                .joint_inputs()
                .into_iter()
                .map(|i| {
                    let o = vec![0u16, i[0]];
                    (i, o)
                })
                .collect();
            CausalFunction {
                events: vec![0, 1],
                table,
            }
        };
        let chain = chain_ab();
        assert!(chain.is_causal_function(&build(&chain)).unwrap());
        let anti = antichain_ab();
        assert!(!anti.is_causal_function(&build(&anti)).unwrap());
    }

    #[test]
    fn section_counts_match_formula() {
        let chain = chain_ab();
        let full = chain.full_inputs_on(&chain.full_lowerset());
        // 4 choices for the first event's table, 16 for the second.
        assert_eq!(chain.section_count(&full).unwrap(), 64);
        assert_eq!(chain.enumerate_sections(&full).unwrap().len(), 64);

        let anti = antichain_ab();
        let full = anti.full_inputs_on(&anti.full_lowerset());
        assert_eq!(anti.section_count(&full).unwrap(), 16);
        assert_eq!(anti.enumerate_sections(&full).unwrap().len(), 16);
    }

    #[test]
    fn sections_match_brute_force_filter() {
        // Independent oracle: enumerate all functions from joint inputs to
        // joint outputs and keep those where each output coordinate is a
        // function of its down-set inputs only.
        for s in [chain_ab(), antichain_ab()] {
            let inputs = s.joint_inputs();
            let outputs = s.joint_outputs();
            let mut all = 0usize;
            let mut causal = Vec::new();
            let mut pick = vec![0usize; inputs.len()];
            'outer: loop {
                all += 1;
                let table: BTreeMap<_, _> = inputs
                    .iter()
                    .cloned()
                    .zip(pick.iter().map(|&p| outputs[p].clone()))
                    .collect();
                let mut ok = true;
                for (pos, _) in s.events().iter().enumerate() {
                    let down = s.down_set(pos);
                    let mut seen: BTreeMap<Assignment, u16> = BTreeMap::new();
                    for (inp, out) in &table {
                        let key: Assignment = down.iter().map(|&d| inp[d]).collect();
                        if *seen.entry(key).or_insert(out[pos]) != out[pos] {
                            ok = false;
                        }
                    }
                }
                if ok {
                    causal.push(table);
                }
                let mut k = inputs.len();
                loop {
                    if k == 0 {
                        break 'outer;
                    }
                    k -= 1;
                    pick[k] += 1;
                    if pick[k] < outputs.len() {
                        break;
                    }
                    pick[k] = 0;
                    if k == 0 {
                        break 'outer;
                    }
                }
            }
            assert_eq!(all, outputs.len().pow(inputs.len() as u32));
            let full = s.full_inputs_on(&s.full_lowerset());
            let sections = s.enumerate_sections(&full).unwrap();
            assert_eq!(sections.len(), causal.len());
            // Same set of tables, and is_causal_function agrees with
            // membership.
            for sec in &sections {
                assert!(causal.contains(&sec.table));
                assert!(s.is_causal_function(sec).unwrap());
            }
        }
    }

    #[test]
    fn single_event_sections() {
        let s = CausalScenario::new(vec![Event::new("A", ["0"], ["0", "1"])], &[]).unwrap();
        let full = s.full_inputs_on(&s.full_lowerset());
        assert_eq!(s.enumerate_sections(&full).unwrap().len(), 2);
    }

    #[test]
    fn size_limit_is_enforced() {
        let s = CausalScenario::new(
            vec![
                Event::new("A", ["0", "1", "2", "3"], ["0", "1", "2", "3"]),
                Event::new("B", ["0", "1", "2", "3"], ["0", "1", "2", "3"]),
            ],
            &[("A".into(), "B".into())],
        )
        .unwrap();
        let full = s.full_inputs_on(&s.full_lowerset());
        // 4^4 * 4^16 sections, far beyond the cap.
        let err = s.enumerate_sections(&full).unwrap_err();
        assert!(matches!(err, ScenarioError::SizeLimit { .. }));
    }

    #[test]
    fn restriction_to_empty_lowerset_is_unique_empty_function() {
        let s = chain_ab();
        let full = s.full_inputs_on(&s.full_lowerset());
        let empty = s.full_inputs_on(&s.empty_lowerset());
        let sections = s.enumerate_sections(&full).unwrap();
        for f in &sections {
            let r = s.restrict_section(f, &full, &empty).unwrap();
            assert_eq!(r.events, Vec::<usize>::new());
            assert_eq!(r.table.len(), 1);
            assert_eq!(r.table.get(&vec![]), Some(&vec![]));
        }
    }

    #[test]
    fn restriction_keeps_first_event_column_on_chain() {
        let s = chain_ab();
        let full = s.full_inputs_on(&s.full_lowerset());
        let first = s.full_inputs_on(&s.lowerset([0]).unwrap());
        for f in s.enumerate_sections(&full).unwrap() {
            let r = s.restrict_section(&f, &full, &first).unwrap();
            for (inp, out) in &r.table {
                let full_inp = vec![inp[0], 0u16];
                assert_eq!(out[0], f.table[&full_inp][0]);
            }
        }
    }

    #[test]
    fn double_restriction_equals_direct_restriction() {
        let s = chain_ab();
        let full = s.full_inputs_on(&s.full_lowerset());
        let mid = LocaleElement {
            lowerset: s.lowerset([0, 1]).unwrap(),
            inputs: vec![vec![0, 1], vec![0]],
        };
        let bottom = s.full_inputs_on(&s.lowerset([0]).unwrap());
        for f in s.enumerate_sections(&full).unwrap() {
            let via_mid = s
                .restrict_section(&s.restrict_section(&f, &full, &mid).unwrap(), &mid, &bottom)
                .unwrap();
            let direct = s.restrict_section(&f, &full, &bottom).unwrap();
            assert_eq!(via_mid, direct);
        }
    }

    #[test]
    fn restricted_sections_are_sections_of_the_target() {
        // Sheaf closure under restriction: restricting any section lands in
        // the target element's section set.
        for s in [chain_ab(), antichain_ab()] {
            let full = s.full_inputs_on(&s.full_lowerset());
            let targets = [
                s.full_inputs_on(&s.lowerset([0]).unwrap()),
                s.full_inputs_on(&s.empty_lowerset()),
                LocaleElement {
                    lowerset: s.full_lowerset(),
                    inputs: vec![vec![0], vec![0, 1]],
                },
            ];
            for target in &targets {
                let members = s.enumerate_sections(target).unwrap();
                for f in s.enumerate_sections(&full).unwrap() {
                    let restricted = s.restrict_section(&f, &full, target).unwrap();
                    assert!(members.contains(&restricted));
                }
            }
        }
    }

    #[test]
    fn restriction_rejects_non_below_targets() {
        let s = chain_ab();
        let full = s.full_inputs_on(&s.full_lowerset());
        let sections = s.enumerate_sections(&full).unwrap();
        let narrow = LocaleElement {
            lowerset: s.full_lowerset(),
            inputs: vec![vec![0], vec![0]],
        };
        let f = s.restrict_section(&sections[0], &full, &narrow).unwrap();
        let err = s.restrict_section(&f, &narrow, &full).unwrap_err();
        assert!(matches!(err, ScenarioError::NotBelow));
    }

    #[test]
    fn meet_prunes_to_a_lowerset() {
        let s = chain_ab();
        let u = LocaleElement {
            lowerset: s.full_lowerset(),
            inputs: vec![vec![0], vec![0]],
        };
        let v = LocaleElement {
            lowerset: s.full_lowerset(),
            inputs: vec![vec![1], vec![0]],
        };
        // First coordinates are disjoint, so the second event dangles and is
        // pruned; the meet collapses to the empty element.
        let meet = s.locale_meet(&u, &v);
        assert!(meet.lowerset.is_empty());

        let w = LocaleElement {
            lowerset: s.full_lowerset(),
            inputs: vec![vec![0, 1], vec![1]],
        };
        let meet = s.locale_meet(&u, &w);
        assert_eq!(meet.lowerset.members(), &[0]);
        assert_eq!(meet.inputs, vec![vec![0]]);
    }

    #[test]
    fn lowersets_closed_under_union_and_meet() {
        let s = CausalScenario::new(
            vec![Event::binary("A"), Event::binary("B"), Event::binary("C")],
            &[("A".into(), "C".into()), ("B".into(), "C".into())],
        )
        .unwrap();
        let lows = s.lowersets();
        for a in &lows {
            for b in &lows {
                let union: BTreeSet<usize> = a
                    .members()
                    .iter()
                    .chain(b.members())
                    .copied()
                    .collect();
                assert!(s.lowerset(union).is_ok());
                let meet = s.locale_meet(&s.full_inputs_on(a), &s.full_inputs_on(b));
                assert!(s.lowerset(meet.lowerset.members().iter().copied()).is_ok());
                let join = s.locale_join(&s.full_inputs_on(a), &s.full_inputs_on(b));
                assert!(s.lowerset(join.lowerset.members().iter().copied()).is_ok());
            }
        }
    }

    #[test]
    fn scenario_spec_round_trips() {
        let s = chain_ab();
        let spec = ScenarioSpec::from_scenario(&s);
        let json = serde_json::to_string(&spec).unwrap();
        let back: ScenarioSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.build().unwrap(), s);
    }
}
