//! The fractions report JSON: per model, one fraction per causal order,
//! the method that produced it, the model's meta block, and optionally the
//! witness models. Rational-mode values are fraction strings, float-mode
//! values plain numbers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use caufrac_core::linguistics::{ambiguity_counts, AmbiguityCounts};
use caufrac_core::model::{ModelMeta, PhraseType};
use caufrac_core::num::{Rational, Scalar};
use caufrac_core::plot::ScatterSeries;
use caufrac_core::stats::{
    correlation_table, summarize_fractions, CorrelationOutcome, FractionSummary,
    LabeledCorrelation, ModelStat, Sidedness,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelReport {
    /// Order key (e.g. `S->V`) to the fraction value.
    pub fractions: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<ModelMeta>,
    pub methods: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub witnesses: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FractionReport {
    pub arithmetic: String,
    pub models: BTreeMap<String, ModelReport>,
}

impl FractionReport {
    pub fn to_json_string(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        text.push('\n');
        text
    }

    pub fn from_json_str(text: &str) -> Result<FractionReport, String> {
        serde_json::from_str(text).map_err(|e| format!("malformed fractions report: {e}"))
    }
}

/// Numeric view of a reported fraction value.
pub fn fraction_as_f64(value: &Value) -> Option<f64> {
    match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => Rational::parse_text(s).ok().map(|r| r.to_f64()),
        _ => None,
    }
}

/// The noun-to-verb chain key for a phrase type: `S->V` for subject-verb
/// models, `O->V` for verb-object ones.
pub fn noun_to_verb_key(phrase_type: PhraseType) -> &'static str {
    match phrase_type {
        PhraseType::SubjectVerb => "S->V",
        PhraseType::VerbObject => "O->V",
    }
}

/// Everything the stats stage derives from a report.
pub struct Analysis {
    pub summary: FractionSummary,
    pub correlations: Vec<LabeledCorrelation>,
    pub scatters: Vec<ScatterSeries>,
    pub stats: Vec<ModelStat>,
}

pub fn analyze(
    report: &FractionReport,
    bins: usize,
    threshold: f64,
    sidedness: Sidedness,
) -> Analysis {
    let mut grouped: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut stats: Vec<ModelStat> = Vec::new();
    for (model_id, model) in &report.models {
        let type_key = model
            .meta
            .as_ref()
            .and_then(|m| m.phrase_type)
            .map(|t| t.as_str())
            .unwrap_or("all");
        for (order, value) in &model.fractions {
            if let Some(v) = fraction_as_f64(value) {
                grouped
                    .entry(format!("{type_key}:{order}"))
                    .or_default()
                    .push(v);
            }
        }
        if let Some(meta) = &model.meta {
            if let (Some(phrase_type), Ok(counts)) =
                (meta.phrase_type, ambiguity_counts(Some(meta)))
            {
                let key = noun_to_verb_key(phrase_type);
                if let Some(fraction) = model.fractions.get(key).and_then(fraction_as_f64) {
                    stats.push(ModelStat {
                        model_id: model_id.clone(),
                        phrase_type,
                        noun_to_verb_fraction: fraction,
                        counts,
                    });
                }
            }
        }
    }
    let summary = summarize_fractions(&grouped, bins, threshold);
    let correlations = correlation_table(&stats, sidedness);
    let scatters = scatter_series(&stats);
    Analysis {
        summary,
        correlations,
        scatters,
        stats,
    }
}

fn count_for(counts: &AmbiguityCounts, x_label: &str) -> f64 {
    match x_label {
        "homonymous_total" => counts.total_homonymous() as f64,
        "homonymous_verb" => counts.verb_homonymous as f64,
        _ => counts.noun_homonymous as f64,
    }
}

fn scatter_series(stats: &[ModelStat]) -> Vec<ScatterSeries> {
    let mut out = Vec::new();
    for phrase_type in [PhraseType::SubjectVerb, PhraseType::VerbObject] {
        let group: Vec<&ModelStat> = stats
            .iter()
            .filter(|s| s.phrase_type == phrase_type)
            .collect();
        if group.is_empty() {
            continue;
        }
        for x_label in caufrac_core::stats::X_LABELS {
            out.push(ScatterSeries {
                key: phrase_type.as_str().to_string(),
                x_label: x_label.to_string(),
                y_label: format!("{} fraction", noun_to_verb_key(phrase_type)),
                points: group
                    .iter()
                    .map(|s| (count_for(&s.counts, x_label), s.noun_to_verb_fraction))
                    .collect(),
            });
        }
    }
    out
}

/// `phrase_type,x_label,n,rho_vs_homonymous,rho_vs_polysemous,p_value,sidedness,method,note`
///
/// Coefficients are reported against the homonymous count; the polysemous
/// column is its exact negation (each word is one or the other).
pub fn correlations_csv(correlations: &[LabeledCorrelation]) -> String {
    let mut out = String::from(
        "phrase_type,x_label,n,rho_vs_homonymous,rho_vs_polysemous,p_value,sidedness,method,note\n",
    );
    for row in correlations {
        match &row.outcome {
            CorrelationOutcome::Computed(r) => {
                out.push_str(&format!(
                    "{},{},{},{:.6},{:.6},{:.6},{},{},\n",
                    row.phrase_type.as_str(),
                    row.x_label,
                    r.n,
                    r.rho,
                    -r.rho,
                    r.p_value,
                    r.sidedness.as_str(),
                    r.method.as_str(),
                ));
            }
            CorrelationOutcome::Skipped { reason } => {
                out.push_str(&format!(
                    "{},{},{},,,,,,\"{}\"\n",
                    row.phrase_type.as_str(),
                    row.x_label,
                    row.n,
                    reason.replace('"', "'"),
                ));
            }
        }
    }
    out
}

/// Per-model stats feeding the correlations: one row per model with a
/// phrase type, its noun-to-verb fraction, and its ambiguity counts.
pub fn model_stats_csv(stats: &[ModelStat]) -> String {
    let mut out = String::from(
        "model_id,phrase_type,noun_to_verb_fraction,homonymous_noun,homonymous_verb,homonymous_total\n",
    );
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.model_id,
            s.phrase_type.as_str(),
            s.noun_to_verb_fraction,
            s.counts.noun_homonymous,
            s.counts.verb_homonymous,
            s.counts.total_homonymous(),
        ));
    }
    out
}

pub fn summary_json(summary: &FractionSummary) -> String {
    let mut groups = serde_json::Map::new();
    for g in &summary.groups {
        let mut obj = serde_json::Map::new();
        obj.insert("bin_edges".into(), serde_json::json!(g.bin_edges));
        obj.insert("counts".into(), serde_json::json!(g.counts));
        obj.insert("median".into(), serde_json::json!(g.median));
        obj.insert("n".into(), serde_json::json!(g.n));
        obj.insert(
            "share_above_threshold".into(),
            serde_json::json!(g.share_above_threshold),
        );
        obj.insert("threshold".into(), serde_json::json!(g.threshold));
        groups.insert(g.key.clone(), Value::Object(obj));
    }
    let root = serde_json::json!({ "groups": Value::Object(groups) });
    let mut text = serde_json::to_string_pretty(&root).expect("summary serialization");
    text.push('\n');
    text
}
