//! Phrase-annotation ingestion: plausibility scores per sense combination
//! are averaged and normalized into per-phrase distributions, then four
//! phrases at a time are assembled into two-event empirical models whose
//! inputs are word choices and whose outputs are sense choices.
//!
//! Combination ids 1..=4 enumerate (noun sense, verb sense) pairs in
//! noun-major order: 1 = (0,0), 2 = (0,1), 3 = (1,0), 4 = (1,1).

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{Ambiguity, EmpiricalModel, ModelError, ModelMeta, PhraseType};
use crate::num::Scalar;
use crate::scenario::{CausalScenario, Event, ScenarioError};

#[derive(Debug, Error)]
pub enum LinguisticsError {
    #[error("phrase `{phrase}`: no records for combination {combination}")]
    MissingCombination { phrase: String, combination: u8 },
    #[error("phrase `{phrase}`: every combination averaged to zero")]
    Degenerate { phrase: String },
    #[error("model `{model}`: unresolved phrase id `{phrase}`")]
    UnresolvedPhrase { model: String, phrase: String },
    #[error("model `{model}`: phrase `{phrase}` is {found} but the spec says {expected}")]
    TypeMix {
        model: String,
        phrase: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("model `{model}`: {0}", .detail)]
    LabelConflict { model: String, detail: String },
    #[error("model has no linguistic meta block")]
    MissingMeta,
    #[error("{file} line {line}: {message}")]
    Parse {
        file: &'static str,
        line: u64,
        message: String,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One worker's plausibility score for one sense combination of a phrase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub worker_id: String,
    pub phrase_id: String,
    /// 1..=4, noun-major over (noun sense, verb sense).
    pub combination_id: u8,
    /// 0..=7 on the eight-grade plausibility scale; 4 is the neutral grade.
    pub score: u8,
}

pub const NEUTRAL_SCORE: u8 = 4;

/// Dataset row describing one two-word phrase and its word-level labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseEntry {
    pub phrase_id: String,
    pub phrase_type: PhraseType,
    pub noun: String,
    pub verb: String,
    pub noun_ambiguity: Ambiguity,
    pub verb_ambiguity: Ambiguity,
    pub glosses: [String; 4],
}

/// Normalized plausibility distribution over a phrase's four combinations.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseDistribution<R: Scalar> {
    pub phrase_id: String,
    pub probs: [R; 4],
    pub n_annotators: usize,
}

/// Recipe for one two-event model: which phrase fills each (word1, word2)
/// input cell. For subject-verb models word1 ranges over nouns; for
/// verb-object models word1 ranges over verbs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BellModelSpec {
    pub model_id: String,
    pub phrase_type: PhraseType,
    /// Phrase ids for input cells (0,0), (0,1), (1,0), (1,1).
    pub cells: [String; 4],
}

/// Per-combination mean score, then normalization by the sum of the means.
/// With `drop_neutral` the neutral grade's records are excluded first.
pub fn aggregate_scores<R: Scalar>(
    records: &[AnnotationRecord],
    drop_neutral: bool,
) -> Result<PhraseDistribution<R>, LinguisticsError> {
    let phrase_id = records
        .first()
        .map(|r| r.phrase_id.clone())
        .unwrap_or_default();
    let mut sums = [0u64; 4];
    let mut counts = [0u64; 4];
    let mut workers = BTreeSet::new();
    for record in records {
        debug_assert_eq!(record.phrase_id, phrase_id);
        if drop_neutral && record.score == NEUTRAL_SCORE {
            continue;
        }
        let slot = (record.combination_id - 1) as usize;
        sums[slot] += record.score as u64;
        counts[slot] += 1;
        workers.insert(record.worker_id.clone());
    }
    for (slot, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(LinguisticsError::MissingCombination {
                phrase: phrase_id,
                combination: slot as u8 + 1,
            });
        }
    }
    // mean_k = sums_k / counts_k; prob_k = mean_k / sum of means.
    let means: Vec<R> = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| R::from_ratio(s as i64, c as i64))
        .collect();
    let total: R = means.iter().cloned().sum();
    if total.is_zero() {
        return Err(LinguisticsError::Degenerate { phrase: phrase_id });
    }
    let probs: Vec<R> = means.into_iter().map(|m| m / total.clone()).collect();
    Ok(PhraseDistribution {
        phrase_id,
        probs: probs.try_into().expect("four combinations"),
        n_annotators: workers.len(),
    })
}

/// Sense-pair layout of a phrase distribution's four entries.
fn combination_for(noun_sense: u16, verb_sense: u16) -> usize {
    (noun_sense * 2 + verb_sense) as usize
}

/// Assembles a two-event model from four phrase distributions.
///
/// The first event is the choice of word1 (nouns for subject-verb models,
/// verbs for verb-object ones), the second the choice of word2; outputs `0`
/// and `1` are each chosen word's two senses. Each row is the corresponding
/// phrase's distribution reordered to (word1 sense, word2 sense).
pub fn build_bell_model<R: Scalar>(
    spec: &BellModelSpec,
    phrases: &BTreeMap<String, PhraseEntry>,
    dists: &BTreeMap<String, PhraseDistribution<R>>,
) -> Result<EmpiricalModel<R>, LinguisticsError> {
    let resolve = |cell: &String| -> Result<(&PhraseEntry, &PhraseDistribution<R>), LinguisticsError> {
        let entry = phrases
            .get(cell)
            .ok_or_else(|| LinguisticsError::UnresolvedPhrase {
                model: spec.model_id.clone(),
                phrase: cell.clone(),
            })?;
        let dist = dists
            .get(cell)
            .ok_or_else(|| LinguisticsError::UnresolvedPhrase {
                model: spec.model_id.clone(),
                phrase: cell.clone(),
            })?;
        if entry.phrase_type != spec.phrase_type {
            return Err(LinguisticsError::TypeMix {
                model: spec.model_id.clone(),
                phrase: cell.clone(),
                expected: spec.phrase_type.as_str(),
                found: entry.phrase_type.as_str(),
            });
        }
        Ok((entry, dist))
    };
    let cells: Vec<(&PhraseEntry, &PhraseDistribution<R>)> = spec
        .cells
        .iter()
        .map(resolve)
        .collect::<Result<_, _>>()?;

    let conflict = |detail: String| LinguisticsError::LabelConflict {
        model: spec.model_id.clone(),
        detail,
    };
    // word1 must agree along rows of the 2x2 grid, word2 along columns.
    let word1_of = |e: &PhraseEntry| match spec.phrase_type {
        PhraseType::SubjectVerb => (e.noun.clone(), e.noun_ambiguity),
        PhraseType::VerbObject => (e.verb.clone(), e.verb_ambiguity),
    };
    let word2_of = |e: &PhraseEntry| match spec.phrase_type {
        PhraseType::SubjectVerb => (e.verb.clone(), e.verb_ambiguity),
        PhraseType::VerbObject => (e.noun.clone(), e.noun_ambiguity),
    };
    for (a, b, axis) in [(0usize, 1usize, "word1"), (2, 3, "word1"), (0, 2, "word2"), (1, 3, "word2")] {
        let (pick, other): ((String, Ambiguity), (String, Ambiguity)) = if axis == "word1" {
            (word1_of(cells[a].0), word1_of(cells[b].0))
        } else {
            (word2_of(cells[a].0), word2_of(cells[b].0))
        };
        if pick != other {
            return Err(conflict(format!(
                "cells {a} and {b} disagree on {axis}: `{}`/{:?} vs `{}`/{:?}",
                pick.0, pick.1, other.0, other.1
            )));
        }
    }
    let word1 = [word1_of(cells[0].0), word1_of(cells[2].0)];
    let word2 = [word2_of(cells[0].0), word2_of(cells[1].0)];

    let (first_id, second_id) = match spec.phrase_type {
        PhraseType::SubjectVerb => ("S", "V"),
        PhraseType::VerbObject => ("V", "O"),
    };
    let events = vec![
        Event::new(
            first_id,
            [word1[0].0.clone(), word1[1].0.clone()],
            ["0", "1"],
        ),
        Event::new(
            second_id,
            [word2[0].0.clone(), word2[1].0.clone()],
            ["0", "1"],
        ),
    ];
    // No order is assumed; fraction analysis decides that later.
    let scenario = CausalScenario::new(events, &[])?;

    let mut table = Vec::with_capacity(4);
    for w1 in 0..2u16 {
        for w2 in 0..2u16 {
            let (_, dist) = cells[(w1 * 2 + w2) as usize];
            let mut row = Vec::with_capacity(4);
            for o1 in 0..2u16 {
                for o2 in 0..2u16 {
                    // Model outputs are (word1 sense, word2 sense); the
                    // stored combinations are noun-major.
                    let (noun_sense, verb_sense) = match spec.phrase_type {
                        PhraseType::SubjectVerb => (o1, o2),
                        PhraseType::VerbObject => (o2, o1),
                    };
                    row.push(dist.probs[combination_for(noun_sense, verb_sense)].clone());
                }
            }
            table.push(row);
        }
    }
    let model = EmpiricalModel::from_table(scenario, &table)?;

    let (noun_pair, verb_pair) = match spec.phrase_type {
        PhraseType::SubjectVerb => (&word1, &word2),
        PhraseType::VerbObject => (&word2, &word1),
    };
    let mut labels = BTreeMap::new();
    labels.insert("noun_0".into(), noun_pair[0].0.clone());
    labels.insert("noun_1".into(), noun_pair[1].0.clone());
    labels.insert("verb_0".into(), verb_pair[0].0.clone());
    labels.insert("verb_1".into(), verb_pair[1].0.clone());
    for (k, cell) in spec.cells.iter().enumerate() {
        labels.insert(format!("phrase_{}{}", k / 2, k % 2), cell.clone());
    }
    let meta = ModelMeta {
        model_id: spec.model_id.clone(),
        phrase_type: Some(spec.phrase_type),
        noun_ambiguity: Some([noun_pair[0].1, noun_pair[1].1]),
        verb_ambiguity: Some([verb_pair[0].1, verb_pair[1].1]),
        labels,
    };
    Ok(model.with_meta(meta))
}

/// Homonymous/polysemous word counts per grammatical role, read off a
/// model's meta block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AmbiguityCounts {
    pub noun_homonymous: u8,
    pub noun_polysemous: u8,
    pub verb_homonymous: u8,
    pub verb_polysemous: u8,
}

impl AmbiguityCounts {
    pub fn total_homonymous(&self) -> u8 {
        self.noun_homonymous + self.verb_homonymous
    }

    pub fn total_polysemous(&self) -> u8 {
        self.noun_polysemous + self.verb_polysemous
    }
}

pub fn ambiguity_counts(meta: Option<&ModelMeta>) -> Result<AmbiguityCounts, LinguisticsError> {
    let meta = meta.ok_or(LinguisticsError::MissingMeta)?;
    let (nouns, verbs) = match (&meta.noun_ambiguity, &meta.verb_ambiguity) {
        (Some(n), Some(v)) => (n, v),
        _ => return Err(LinguisticsError::MissingMeta),
    };
    let count = |pair: &[Ambiguity; 2], kind: Ambiguity| {
        pair.iter().filter(|&&a| a == kind).count() as u8
    };
    Ok(AmbiguityCounts {
        noun_homonymous: count(nouns, Ambiguity::Homonymous),
        noun_polysemous: count(nouns, Ambiguity::Polysemous),
        verb_homonymous: count(verbs, Ambiguity::Homonymous),
        verb_polysemous: count(verbs, Ambiguity::Polysemous),
    })
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_error(file: &'static str, line: u64, message: impl Into<String>) -> LinguisticsError {
    LinguisticsError::Parse {
        file,
        line,
        message: message.into(),
    }
}

/// `worker_id,phrase_id,combination_id,score`
pub fn parse_annotations_csv(text: &str) -> Result<Vec<AnnotationRecord>, LinguisticsError> {
    const FILE: &str = "annotations";
    let mut reader = csv_reader(text);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(FILE, 0, e.to_string()))?;
        let line = line_of(&record);
        if record.len() != 4 {
            return Err(parse_error(FILE, line, "expected 4 columns"));
        }
        let combination_id: u8 = record[2]
            .parse()
            .map_err(|_| parse_error(FILE, line, format!("bad combination_id `{}`", &record[2])))?;
        if !(1..=4).contains(&combination_id) {
            return Err(parse_error(
                FILE,
                line,
                format!("combination_id {combination_id} outside 1..=4"),
            ));
        }
        let score: u8 = record[3]
            .parse()
            .map_err(|_| parse_error(FILE, line, format!("bad score `{}`", &record[3])))?;
        if score > 7 {
            return Err(parse_error(FILE, line, format!("score {score} outside 0..=7")));
        }
        out.push(AnnotationRecord {
            worker_id: record[0].to_string(),
            phrase_id: record[1].to_string(),
            combination_id,
            score,
        });
    }
    Ok(out)
}

fn parse_phrase_type(
    text: &str,
    file: &'static str,
    line: u64,
) -> Result<PhraseType, LinguisticsError> {
    match text {
        "subject_verb" => Ok(PhraseType::SubjectVerb),
        "verb_object" => Ok(PhraseType::VerbObject),
        other => Err(parse_error(file, line, format!("bad phrase_type `{other}`"))),
    }
}

fn parse_ambiguity(
    text: &str,
    file: &'static str,
    line: u64,
) -> Result<Ambiguity, LinguisticsError> {
    match text {
        "homonymous" => Ok(Ambiguity::Homonymous),
        "polysemous" => Ok(Ambiguity::Polysemous),
        other => Err(parse_error(file, line, format!("bad ambiguity `{other}`"))),
    }
}

/// `phrase_id,phrase_type,noun,verb,noun_ambiguity,verb_ambiguity,gloss1..gloss4`
pub fn parse_phrases_csv(text: &str) -> Result<BTreeMap<String, PhraseEntry>, LinguisticsError> {
    const FILE: &str = "phrases";
    let mut reader = csv_reader(text);
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(FILE, 0, e.to_string()))?;
        let line = line_of(&record);
        if record.len() != 10 {
            return Err(parse_error(FILE, line, "expected 10 columns"));
        }
        let entry = PhraseEntry {
            phrase_id: record[0].to_string(),
            phrase_type: parse_phrase_type(&record[1], FILE, line)?,
            noun: record[2].to_string(),
            verb: record[3].to_string(),
            noun_ambiguity: parse_ambiguity(&record[4], FILE, line)?,
            verb_ambiguity: parse_ambiguity(&record[5], FILE, line)?,
            glosses: [
                record[6].to_string(),
                record[7].to_string(),
                record[8].to_string(),
                record[9].to_string(),
            ],
        };
        if out.insert(entry.phrase_id.clone(), entry).is_some() {
            return Err(parse_error(FILE, line, format!("duplicate phrase_id `{}`", &record[0])));
        }
    }
    Ok(out)
}

/// `model_id,phrase_type,cell_00,cell_01,cell_10,cell_11`
pub fn parse_specs_csv(text: &str) -> Result<Vec<BellModelSpec>, LinguisticsError> {
    const FILE: &str = "specs";
    let mut reader = csv_reader(text);
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(FILE, 0, e.to_string()))?;
        let line = line_of(&record);
        if record.len() != 6 {
            return Err(parse_error(FILE, line, "expected 6 columns"));
        }
        let spec = BellModelSpec {
            model_id: record[0].to_string(),
            phrase_type: parse_phrase_type(&record[1], FILE, line)?,
            cells: [
                record[2].to_string(),
                record[3].to_string(),
                record[4].to_string(),
                record[5].to_string(),
            ],
        };
        if !seen.insert(spec.model_id.clone()) {
            return Err(parse_error(FILE, line, format!("duplicate model_id `{}`", &record[0])));
        }
        out.push(spec);
    }
    Ok(out)
}

/// Why a model was skipped during batch assembly.
#[derive(Debug, Clone)]
pub struct SkipReport {
    pub model_id: String,
    pub reason: String,
}

/// Aggregates every phrase's annotations and builds one model per spec.
/// Phrases whose means are all zero abort only the models that reference
/// them; those models are reported in the skip list.
pub fn build_models<R: Scalar>(
    annotations: &[AnnotationRecord],
    phrases: &BTreeMap<String, PhraseEntry>,
    specs: &[BellModelSpec],
    drop_neutral: bool,
) -> Result<(Vec<EmpiricalModel<R>>, Vec<SkipReport>), LinguisticsError> {
    let mut grouped: BTreeMap<String, Vec<AnnotationRecord>> = BTreeMap::new();
    for record in annotations {
        grouped
            .entry(record.phrase_id.clone())
            .or_default()
            .push(record.clone());
    }
    let mut dists: BTreeMap<String, PhraseDistribution<R>> = BTreeMap::new();
    let mut degenerate: BTreeMap<String, String> = BTreeMap::new();
    for (phrase_id, records) in &grouped {
        match aggregate_scores::<R>(records, drop_neutral) {
            Ok(dist) => {
                dists.insert(phrase_id.clone(), dist);
            }
            Err(err @ LinguisticsError::Degenerate { .. }) => {
                degenerate.insert(phrase_id.clone(), err.to_string());
            }
            Err(other) => return Err(other),
        }
    }
    let mut models = Vec::new();
    let mut skipped = Vec::new();
    for spec in specs {
        if let Some(cell) = spec.cells.iter().find(|c| degenerate.contains_key(*c)) {
            skipped.push(SkipReport {
                model_id: spec.model_id.clone(),
                reason: degenerate[cell].clone(),
            });
            continue;
        }
        models.push(build_bell_model(spec, phrases, &dists)?);
    }
    Ok((models, skipped))
}
