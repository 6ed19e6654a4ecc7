//! Implementations of the CLI subcommands. Every command that emits files
//! stages them in memory first and writes in one pass, so a failing run
//! leaves nothing half-written; a manifest lists whatever was emitted.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use caufrac_core::fraction::{
    bell222_fraction, full_report_with_method, CausalOrder, FractionError, FractionResult,
    ReportMethod,
};
use caufrac_core::linguistics::{
    build_models, parse_annotations_csv, parse_phrases_csv, parse_specs_csv, SkipReport,
};
use caufrac_core::model::{AnyModel, EmpiricalModel};
use caufrac_core::num::Scalar;
use caufrac_core::plot::emit_plots;
use caufrac_core::stats::Sidedness;

use crate::report::{analyze, correlations_csv, model_stats_csv, summary_json, FractionReport, ModelReport};

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing input: exit code 1.
    Input(String),
    /// Solver or environment failure: exit code 2.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Internal(m) => m,
        }
    }
}

fn input_err(context: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{context}: {err}"))
}

fn fraction_err(context: &str, err: FractionError) -> CliError {
    match &err {
        FractionError::Solver(_) | FractionError::Lp(_) => {
            CliError::Internal(format!("{context}: {err}"))
        }
        _ => CliError::Input(format!("{context}: {err}")),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input_err(&path.display().to_string(), e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithmeticChoice {
    Auto,
    Rational,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Auto,
    Closed,
    Lp,
    Bound,
}

/// Staged output files, written in one pass with a manifest.
struct Outputs {
    root: PathBuf,
    command: &'static str,
    files: BTreeMap<String, String>,
    skipped: Vec<SkipReport>,
    model_count: usize,
}

impl Outputs {
    fn new(root: &Path, command: &'static str) -> Self {
        Outputs {
            root: root.to_path_buf(),
            command,
            files: BTreeMap::new(),
            skipped: Vec::new(),
            model_count: 0,
        }
    }

    fn stage(&mut self, rel: impl Into<String>, contents: String) {
        self.files.insert(rel.into(), contents);
    }

    fn write_all(mut self) -> Result<PathBuf, CliError> {
        let manifest = json!({
            "command": self.command,
            "files": self.files.keys().chain(["manifest.json".to_string()].iter()).collect::<Vec<_>>(),
            "model_count": self.model_count,
            "skipped": self.skipped.iter().map(|s| json!({
                "model_id": s.model_id,
                "reason": s.reason,
            })).collect::<Vec<_>>(),
        });
        let mut manifest_text =
            serde_json::to_string_pretty(&manifest).expect("manifest serialization");
        manifest_text.push('\n');
        self.files.insert("manifest.json".into(), manifest_text);
        for (rel, contents) in &self.files {
            let path = self.root.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)
                    .map_err(|e| CliError::Internal(format!("creating {}: {e}", parent.display())))?;
            }
            fs::write(&path, contents)
                .map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))?;
        }
        Ok(self.root)
    }
}

fn load_model(path: &Path, arithmetic: ArithmeticChoice, tolerance: Option<f64>) -> Result<AnyModel, CliError> {
    let text = read_file(path)?;
    let context = path.display().to_string();
    let is_csv = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false);
    let loaded = if is_csv {
        let force_exact = match arithmetic {
            ArithmeticChoice::Auto => None,
            ArithmeticChoice::Rational => Some(true),
            ArithmeticChoice::Float => Some(false),
        };
        AnyModel::from_csv_str_with(&text, force_exact, tolerance)
    } else {
        AnyModel::from_json_str_with(&text, tolerance)
    }
    .map_err(|e| input_err(&context, e))?;
    let converted = match arithmetic {
        ArithmeticChoice::Auto => loaded,
        ArithmeticChoice::Float => AnyModel::Float(loaded.into_float()),
        ArithmeticChoice::Rational => AnyModel::Rational(
            loaded
                .into_rational()
                .map_err(|e| input_err(&context, e))?,
        ),
    };
    Ok(converted)
}

fn model_id_for(model: &AnyModel, path: &Path) -> String {
    model
        .meta()
        .map(|m| m.model_id.clone())
        .unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| path.display().to_string())
        })
}

fn fraction_rows<R: Scalar>(
    model: &EmpiricalModel<R>,
    method: MethodChoice,
    want_witness: bool,
) -> Result<ModelReport, FractionError> {
    let results: Vec<FractionResult<R>> = match method {
        MethodChoice::Auto => full_report_with_method(model, ReportMethod::Auto)?,
        MethodChoice::Lp => full_report_with_method(model, ReportMethod::Lp)?,
        MethodChoice::Bound => full_report_with_method(model, ReportMethod::Bound)?,
        MethodChoice::Closed => {
            // No closed form exists for the no-signalling order; report the
            // two chains only.
            let ids: Vec<String> = model
                .scenario()
                .events()
                .iter()
                .map(|e| e.id.clone())
                .collect();
            vec![
                bell222_fraction(model, &CausalOrder::chain(ids[0].clone(), ids[1].clone()))?,
                bell222_fraction(model, &CausalOrder::chain(ids[1].clone(), ids[0].clone()))?,
            ]
        }
    };
    let mut fractions = BTreeMap::new();
    let mut methods = BTreeMap::new();
    let mut witnesses = BTreeMap::new();
    for result in &results {
        let key = result.order.key();
        let value = if R::EXACT {
            Value::String(result.gamma.render())
        } else {
            json!(result.gamma.to_f64())
        };
        fractions.insert(key.clone(), value);
        methods.insert(key.clone(), result.method.as_str().to_string());
        if want_witness {
            if let Some(w) = &result.witness {
                witnesses.insert(key, w.to_json_value());
            }
        }
    }
    Ok(ModelReport {
        fractions,
        meta: model.meta().cloned(),
        methods,
        witnesses,
    })
}

fn model_report(
    model: &AnyModel,
    method: MethodChoice,
    want_witness: bool,
    context: &str,
) -> Result<ModelReport, CliError> {
    match model {
        AnyModel::Rational(m) => fraction_rows(m, method, want_witness),
        AnyModel::Float(m) => fraction_rows(m, method, want_witness),
    }
    .map_err(|e| fraction_err(context, e))
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

fn diagnostic(file: &Path, status: &str, kind: &str, detail: Option<String>) {
    let mut obj = serde_json::Map::new();
    obj.insert("file".into(), json!(file.display().to_string()));
    obj.insert("status".into(), json!(status));
    obj.insert("kind".into(), json!(kind));
    if let Some(d) = detail {
        obj.insert("error".into(), json!(d));
    }
    eprintln!("{}", Value::Object(obj));
}

fn sniff_csv_kind(text: &str) -> &'static str {
    let header = text.lines().next().unwrap_or("").to_ascii_lowercase();
    if header.starts_with("worker_id") {
        "annotations"
    } else if header.starts_with("phrase_id") {
        "phrases"
    } else if header.starts_with("model_id") {
        "specs"
    } else {
        "model_csv"
    }
}

pub fn cmd_validate(files: &[PathBuf]) -> Result<(), CliError> {
    if files.is_empty() {
        return Err(CliError::Input("no files to validate".into()));
    }
    let mut failures = 0usize;
    let mut phrase_ids: Vec<String> = Vec::new();
    let mut pending_specs: Vec<(PathBuf, Vec<caufrac_core::linguistics::BellModelSpec>)> =
        Vec::new();
    for path in files {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                diagnostic(path, "error", "unreadable", Some(e.to_string()));
                failures += 1;
                continue;
            }
        };
        let is_json = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("json"))
            .unwrap_or(false);
        if is_json {
            let parsed: Result<Value, _> = serde_json::from_str(&text);
            match parsed {
                Err(e) => {
                    diagnostic(path, "error", "json", Some(e.to_string()));
                    failures += 1;
                }
                Ok(value) if value.get("rows").is_some() => {
                    match AnyModel::from_json_value(&value) {
                        Ok(_) => diagnostic(path, "ok", "model", None),
                        Err(e) => {
                            diagnostic(path, "error", "model", Some(e.to_string()));
                            failures += 1;
                        }
                    }
                }
                Ok(value) if value.get("events").is_some() => {
                    let spec: Result<caufrac_core::scenario::ScenarioSpec, _> =
                        serde_json::from_value(value);
                    match spec.map_err(|e| e.to_string()).and_then(|s| {
                        s.build().map(|_| ()).map_err(|e| e.to_string())
                    }) {
                        Ok(()) => diagnostic(path, "ok", "scenario", None),
                        Err(e) => {
                            diagnostic(path, "error", "scenario", Some(e));
                            failures += 1;
                        }
                    }
                }
                Ok(_) => {
                    diagnostic(
                        path,
                        "error",
                        "json",
                        Some("neither a model (`rows`) nor a scenario (`events`)".into()),
                    );
                    failures += 1;
                }
            }
            continue;
        }
        match sniff_csv_kind(&text) {
            "annotations" => match parse_annotations_csv(&text) {
                Ok(records) => {
                    diagnostic(path, "ok", "annotations", None);
                    log::info!("{}: {} annotation records", path.display(), records.len());
                }
                Err(e) => {
                    diagnostic(path, "error", "annotations", Some(e.to_string()));
                    failures += 1;
                }
            },
            "phrases" => match parse_phrases_csv(&text) {
                Ok(parsed) => {
                    phrase_ids.extend(parsed.keys().cloned());
                    diagnostic(path, "ok", "phrases", None);
                }
                Err(e) => {
                    diagnostic(path, "error", "phrases", Some(e.to_string()));
                    failures += 1;
                }
            },
            "specs" => match parse_specs_csv(&text) {
                Ok(specs) => pending_specs.push((path.clone(), specs)),
                Err(e) => {
                    diagnostic(path, "error", "specs", Some(e.to_string()));
                    failures += 1;
                }
            },
            _ => match AnyModel::from_csv_str(&text, None) {
                Ok(_) => diagnostic(path, "ok", "model_csv", None),
                Err(e) => {
                    diagnostic(path, "error", "model_csv", Some(e.to_string()));
                    failures += 1;
                }
            },
        }
    }
    // Cross-file check: spec cells must name known phrases when a phrase
    // file was part of the same invocation.
    for (path, specs) in pending_specs {
        let mut bad = None;
        if !phrase_ids.is_empty() {
            'outer: for spec in &specs {
                for cell in &spec.cells {
                    if !phrase_ids.contains(cell) {
                        bad = Some(format!(
                            "model `{}`: unresolved phrase id `{cell}`",
                            spec.model_id
                        ));
                        break 'outer;
                    }
                }
            }
        }
        match bad {
            None => diagnostic(&path, "ok", "specs", None),
            Some(detail) => {
                diagnostic(&path, "error", "specs", Some(detail));
                failures += 1;
            }
        }
    }
    if failures > 0 {
        return Err(CliError::Input(format!("{failures} file(s) failed validation")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fractions
// ---------------------------------------------------------------------------

pub struct FractionsOpts {
    pub method: MethodChoice,
    pub arithmetic: ArithmeticChoice,
    pub witness: bool,
    pub tolerance: Option<f64>,
    pub out: PathBuf,
}

pub fn cmd_fractions(files: &[PathBuf], opts: &FractionsOpts) -> Result<(), CliError> {
    if files.is_empty() {
        return Err(CliError::Input("no model files given".into()));
    }
    let mut loaded = Vec::with_capacity(files.len());
    let mut exact = true;
    for path in files {
        let model = load_model(path, opts.arithmetic, opts.tolerance)?;
        exact &= model.is_exact();
        loaded.push((model_id_for(&model, path), model, path.clone()));
    }
    {
        let mut seen = BTreeMap::new();
        for (id, _, path) in &loaded {
            if let Some(previous) = seen.insert(id.clone(), path.clone()) {
                return Err(CliError::Input(format!(
                    "duplicate model id `{id}` from {} and {}",
                    previous.display(),
                    path.display()
                )));
            }
        }
    }
    let computed: Result<Vec<(String, ModelReport)>, CliError> = loaded
        .par_iter()
        .map(|(id, model, path)| {
            model_report(model, opts.method, opts.witness, &path.display().to_string())
                .map(|r| (id.clone(), r))
        })
        .collect();
    let mut models: Vec<(String, ModelReport)> = computed?;
    models.sort_by(|a, b| a.0.cmp(&b.0));
    let report = FractionReport {
        arithmetic: if exact { "rational" } else { "float" }.into(),
        models: models.into_iter().collect(),
    };
    let mut outputs = Outputs::new(&opts.out, "fractions");
    outputs.model_count = report.models.len();
    outputs.stage("report.json", report.to_json_string());
    let root = outputs.write_all()?;
    println!(
        "wrote {} with {} model(s)",
        root.join("report.json").display(),
        report.models.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

pub struct PipelineOpts {
    pub drop_neutral: bool,
    pub arithmetic: ArithmeticChoice,
    pub threshold: f64,
    pub tolerance: Option<f64>,
    pub one_sided: bool,
    pub out: PathBuf,
}

pub fn cmd_pipeline(
    annotations_path: &Path,
    phrases_path: &Path,
    specs_path: &Path,
    opts: &PipelineOpts,
) -> Result<(), CliError> {
    let annotations = parse_annotations_csv(&read_file(annotations_path)?)
        .map_err(|e| input_err(&annotations_path.display().to_string(), e))?;
    if annotations.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no annotation records",
            annotations_path.display()
        )));
    }
    let phrases = parse_phrases_csv(&read_file(phrases_path)?)
        .map_err(|e| input_err(&phrases_path.display().to_string(), e))?;
    let specs = parse_specs_csv(&read_file(specs_path)?)
        .map_err(|e| input_err(&specs_path.display().to_string(), e))?;

    // Aggregate and assemble; float is the survey default, rational is
    // available for exact auditing.
    let exact = matches!(opts.arithmetic, ArithmeticChoice::Rational);
    let (models, skipped): (Vec<AnyModel>, Vec<SkipReport>) = if exact {
        let (models, skipped) =
            build_models::<caufrac_core::Rational>(&annotations, &phrases, &specs, opts.drop_neutral)
                .map_err(|e| input_err("pipeline", e))?;
        (models.into_iter().map(AnyModel::Rational).collect(), skipped)
    } else {
        let (models, skipped) =
            build_models::<f64>(&annotations, &phrases, &specs, opts.drop_neutral)
                .map_err(|e| input_err("pipeline", e))?;
        (models.into_iter().map(AnyModel::Float).collect(), skipped)
    };

    if let Some(tolerance) = opts.tolerance {
        for model in &models {
            if let AnyModel::Float(m) = model {
                for (input, dist) in m.rows() {
                    let drift = (dist.total() - 1.0).abs();
                    if drift > tolerance {
                        let id = model.meta().map(|x| x.model_id.clone()).unwrap_or_default();
                        return Err(CliError::Input(format!(
                            "model `{id}` row {input:?} drifts {drift:e} from 1, beyond --tolerance {tolerance:e}"
                        )));
                    }
                }
            }
        }
    }

    let computed: Result<Vec<(String, String, ModelReport)>, CliError> = models
        .par_iter()
        .map(|model| {
            let id = model
                .meta()
                .map(|m| m.model_id.clone())
                .unwrap_or_default();
            let report = model_report(model, MethodChoice::Auto, false, &id)?;
            Ok((id, model.to_json_string(), report))
        })
        .collect();
    let mut computed = computed?;
    computed.sort_by(|a, b| a.0.cmp(&b.0));

    let mut outputs = Outputs::new(&opts.out, "pipeline");
    outputs.model_count = computed.len();
    outputs.skipped = skipped;
    let mut report_models = BTreeMap::new();
    for (id, model_json, model_report) in computed {
        outputs.stage(format!("models/{id}.json"), model_json);
        report_models.insert(id, model_report);
    }
    let report = FractionReport {
        arithmetic: if exact { "rational" } else { "float" }.into(),
        models: report_models,
    };
    outputs.stage("report.json", report.to_json_string());
    stage_analysis(&mut outputs, &report, opts.threshold, opts.one_sided);
    let model_count = outputs.model_count;
    let skip_count = outputs.skipped.len();
    let root = outputs.write_all()?;
    println!(
        "pipeline wrote {} model(s) to {} ({} skipped)",
        model_count,
        root.display(),
        skip_count
    );
    Ok(())
}

fn stage_analysis(outputs: &mut Outputs, report: &FractionReport, threshold: f64, one_sided: bool) {
    let sidedness = if one_sided {
        Sidedness::OneSided
    } else {
        Sidedness::TwoSided
    };
    let analysis = analyze(report, caufrac_core::stats::DEFAULT_BINS, threshold, sidedness);
    outputs.stage("summary.json", summary_json(&analysis.summary));
    outputs.stage("correlations.csv", correlations_csv(&analysis.correlations));
    outputs.stage("model_stats.csv", model_stats_csv(&analysis.stats));
    for file in emit_plots(&analysis.summary, &analysis.scatters) {
        outputs.stage(format!("plots/{}", file.name), file.contents);
    }
}

// ---------------------------------------------------------------------------
// report / plot
// ---------------------------------------------------------------------------

pub fn cmd_report(
    fractions: &Path,
    threshold: f64,
    one_sided: bool,
    out: &Path,
) -> Result<(), CliError> {
    let report = FractionReport::from_json_str(&read_file(fractions)?)
        .map_err(CliError::Input)?;
    let sidedness = if one_sided {
        Sidedness::OneSided
    } else {
        Sidedness::TwoSided
    };
    let analysis = analyze(&report, caufrac_core::stats::DEFAULT_BINS, threshold, sidedness);
    let mut outputs = Outputs::new(out, "report");
    outputs.model_count = report.models.len();
    outputs.stage("summary.json", summary_json(&analysis.summary));
    outputs.stage("correlations.csv", correlations_csv(&analysis.correlations));
    outputs.stage("model_stats.csv", model_stats_csv(&analysis.stats));
    let root = outputs.write_all()?;
    println!("report wrote summary and correlations to {}", root.display());
    Ok(())
}

pub fn cmd_plot(fractions: &Path, threshold: f64, out: &Path) -> Result<(), CliError> {
    let report = FractionReport::from_json_str(&read_file(fractions)?)
        .map_err(CliError::Input)?;
    let analysis = analyze(
        &report,
        caufrac_core::stats::DEFAULT_BINS,
        threshold,
        Sidedness::TwoSided,
    );
    let mut outputs = Outputs::new(out, "plot");
    outputs.model_count = report.models.len();
    for file in emit_plots(&analysis.summary, &analysis.scatters) {
        outputs.stage(format!("plots/{}", file.name), file.contents);
    }
    let file_count = outputs.files.len();
    let root = outputs.write_all()?;
    println!("plot wrote {} file(s) to {}", file_count, root.display());
    Ok(())
}

