//! Rank statistics over computed fractions: tie-corrected Spearman
//! correlation with permutation or t-approximated p-values, histogram
//! summaries, and the fraction-vs-ambiguity correlation table.
//!
//! Ambiguity counts take only the values 0..=2, so ties dominate; rho is
//! therefore the Pearson correlation of mid-ranks rather than the
//! no-ties difference formula.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::linguistics::AmbiguityCounts;
use crate::model::PhraseType;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 paired observations, found {0}")]
    TooFew(usize),
    #[error("constant input: {0} has zero rank variance")]
    ConstantInput(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sidedness {
    TwoSided,
    OneSided,
}

impl Sidedness {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sidedness::TwoSided => "two_sided",
            Sidedness::OneSided => "one_sided",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PValueMethod {
    ExactPermutation,
    TApproximation,
}

impl PValueMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            PValueMethod::ExactPermutation => "exact_permutation",
            PValueMethod::TApproximation => "t_approximation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
    pub method: PValueMethod,
    pub sidedness: Sidedness,
}

/// Sample size at or below which the permutation distribution is enumerated
/// exactly instead of using the t approximation.
pub const EXACT_PERMUTATION_MAX_N: usize = 9;

/// Mid-ranks (1-based); tied values share the average of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = shared;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    if da == 0.0 || db == 0.0 {
        return None;
    }
    Some(num / (da * db).sqrt())
}

/// Tie-corrected Spearman rank correlation with a p-value: exact
/// permutation enumeration for n <= 9, two-sided t approximation with
/// `t = rho * sqrt((n-2)/(1-rho^2))` above that.
///
/// One-sided p-values test the direction of the observed coefficient.
pub fn spearman(x: &[f64], y: &[f64], sidedness: Sidedness) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFew(n));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite("x"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite("y"));
    }
    let rx = midranks(x);
    let ry = midranks(y);
    let rho = match pearson(&rx, &ry) {
        Some(r) => r,
        None => {
            let side = if rx.iter().all(|v| *v == rx[0]) { "x" } else { "y" };
            return Err(StatsError::ConstantInput(side));
        }
    };
    let (p_two, method) = if n <= EXACT_PERMUTATION_MAX_N {
        (permutation_p_two_sided(&rx, &ry, rho), PValueMethod::ExactPermutation)
    } else {
        (t_approx_p_two_sided(rho, n), PValueMethod::TApproximation)
    };
    let p_value = match sidedness {
        Sidedness::TwoSided => p_two,
        Sidedness::OneSided => {
            if method == PValueMethod::ExactPermutation {
                permutation_p_one_sided(&rx, &ry, rho)
            } else {
                p_two / 2.0
            }
        }
    };
    Ok(CorrelationResult {
        rho,
        p_value: p_value.clamp(0.0, 1.0),
        n,
        method,
        sidedness,
    })
}

const PERM_EPS: f64 = 1e-12;

fn for_each_permutation(items: &mut Vec<f64>, visit: &mut impl FnMut(&[f64])) {
    // Heap's algorithm.
    fn recurse(k: usize, items: &mut Vec<f64>, visit: &mut impl FnMut(&[f64])) {
        if k <= 1 {
            visit(items);
            return;
        }
        for i in 0..k {
            recurse(k - 1, items, visit);
            if k.is_multiple_of(2) {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    let k = items.len();
    recurse(k, items, visit);
}

fn permutation_p_two_sided(rx: &[f64], ry: &[f64], observed: f64) -> f64 {
    let mut perm = ry.to_vec();
    let mut hits = 0u64;
    let mut total = 0u64;
    for_each_permutation(&mut perm, &mut |p| {
        total += 1;
        if let Some(r) = pearson(rx, p) {
            if r.abs() >= observed.abs() - PERM_EPS {
                hits += 1;
            }
        }
    });
    hits as f64 / total as f64
}

fn permutation_p_one_sided(rx: &[f64], ry: &[f64], observed: f64) -> f64 {
    let mut perm = ry.to_vec();
    let mut hits = 0u64;
    let mut total = 0u64;
    let positive = observed >= 0.0;
    for_each_permutation(&mut perm, &mut |p| {
        total += 1;
        if let Some(r) = pearson(rx, p) {
            let extreme = if positive {
                r >= observed - PERM_EPS
            } else {
                r <= observed + PERM_EPS
            };
            if extreme {
                hits += 1;
            }
        }
    });
    hits as f64 / total as f64
}

fn t_approx_p_two_sided(rho: f64, n: usize) -> f64 {
    if rho.abs() >= 1.0 {
        return 0.0;
    }
    let dof = (n - 2) as f64;
    let t = rho * (dof / (1.0 - rho * rho)).sqrt();
    // P(|T| > t) = I_{nu/(nu+t^2)}(nu/2, 1/2).
    regularized_incomplete_beta(dof / (dof + t * t), dof / 2.0, 0.5)
}

/// Natural log of the gamma function (Lanczos, g = 7, n = 9).
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        return std::f64::consts::PI.ln() - (std::f64::consts::PI * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.999_999_999_999_809_9;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front.exp() / a) * beta_cf(x, a, b)
    } else {
        1.0 - (ln_front.exp() / b) * beta_cf(1.0 - x, b, a)
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const TINY: f64 = 1e-30;
    const EPS: f64 = 1e-14;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

// ---------------------------------------------------------------------------
// Fraction summaries
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FractionGroupSummary {
    /// Grouping key, e.g. `subject_verb:S->V`.
    pub key: String,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub median: f64,
    pub threshold: f64,
    pub share_above_threshold: f64,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct FractionSummary {
    pub groups: Vec<FractionGroupSummary>,
}

pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_THRESHOLD: f64 = 0.7;

/// Histograms on [0, 1] (left-closed bins, the last right-closed so exact
/// ones land in the top bin), medians, and the share strictly above the
/// threshold, per group key.
pub fn summarize_fractions(
    grouped: &BTreeMap<String, Vec<f64>>,
    bins: usize,
    threshold: f64,
) -> FractionSummary {
    let bins = bins.max(1);
    let edges: Vec<f64> = (0..=bins).map(|k| k as f64 / bins as f64).collect();
    let mut groups = Vec::with_capacity(grouped.len());
    for (key, values) in grouped {
        let mut counts = vec![0usize; bins];
        for &v in values {
            let idx = ((v * bins as f64).floor() as isize).clamp(0, bins as isize - 1) as usize;
            counts[idx] += 1;
        }
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite fractions"));
        let median = if sorted.is_empty() {
            f64::NAN
        } else if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2]) / 2.0
        };
        let above = values.iter().filter(|&&v| v > threshold).count();
        groups.push(FractionGroupSummary {
            key: key.clone(),
            bin_edges: edges.clone(),
            counts,
            median,
            threshold,
            share_above_threshold: if values.is_empty() {
                0.0
            } else {
                above as f64 / values.len() as f64
            },
            n: values.len(),
        });
    }
    FractionSummary { groups }
}

// ---------------------------------------------------------------------------
// Correlation table
// ---------------------------------------------------------------------------

/// Per-model inputs to the correlation analysis: the noun-to-verb chain
/// fraction and the model's ambiguity counts.
#[derive(Debug, Clone)]
pub struct ModelStat {
    pub model_id: String,
    pub phrase_type: PhraseType,
    pub noun_to_verb_fraction: f64,
    pub counts: AmbiguityCounts,
}

#[derive(Debug, Clone)]
pub enum CorrelationOutcome {
    Computed(CorrelationResult),
    Skipped { reason: String },
}

#[derive(Debug, Clone)]
pub struct LabeledCorrelation {
    pub phrase_type: PhraseType,
    /// Which homonymous count the fraction is correlated against.
    pub x_label: &'static str,
    pub n: usize,
    pub outcome: CorrelationOutcome,
}

pub const X_LABELS: [&str; 3] = ["homonymous_total", "homonymous_verb", "homonymous_noun"];

/// The six correlations of noun-to-verb fractions against homonymous-word
/// counts: each phrase type against the total, verb-only, and noun-only
/// counts. The coefficient against the polysemous count is exactly the
/// negation, since each word is one or the other.
pub fn correlation_table(stats: &[ModelStat], sidedness: Sidedness) -> Vec<LabeledCorrelation> {
    let mut out = Vec::with_capacity(6);
    for phrase_type in [PhraseType::SubjectVerb, PhraseType::VerbObject] {
        let group: Vec<&ModelStat> = stats.iter().filter(|s| s.phrase_type == phrase_type).collect();
        let y: Vec<f64> = group.iter().map(|s| s.noun_to_verb_fraction).collect();
        for x_label in X_LABELS {
            let x: Vec<f64> = group
                .iter()
                .map(|s| match x_label {
                    "homonymous_total" => s.counts.total_homonymous() as f64,
                    "homonymous_verb" => s.counts.verb_homonymous as f64,
                    _ => s.counts.noun_homonymous as f64,
                })
                .collect();
            let outcome = match spearman(&x, &y, sidedness) {
                Ok(result) => CorrelationOutcome::Computed(result),
                Err(err) => CorrelationOutcome::Skipped {
                    reason: err.to_string(),
                },
            };
            out.push(LabeledCorrelation {
                phrase_type,
                x_label,
                n: group.len(),
                outcome,
            });
        }
    }
    out
}
