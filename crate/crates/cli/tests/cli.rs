//! Black-box tests of the `caufrac` binary: exit codes, exact report
//! values, golden-file pipeline output, and batch behavior.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_caufrac"))
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(rel)
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("caufrac_cli_{name}_{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn validate_accepts_the_fixture_files() {
    let output = run(&[
        "validate",
        data("model_signalling.json").to_str().unwrap(),
        data("model_compatible.json").to_str().unwrap(),
        data("mini/annotations.csv").to_str().unwrap(),
        data("mini/phrases.csv").to_str().unwrap(),
        data("mini/specs.csv").to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert_eq!(stderr.lines().filter(|l| l.contains("\"ok\"")).count(), 5);
}

#[test]
fn validate_rejects_denormalized_rows_with_exit_1() {
    let dir = temp_dir("badrow");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    let text = fs::read_to_string(data("model_signalling.json"))
        .unwrap()
        .replace("\"1/7\"", "\"1/8\"");
    fs::write(&path, text).unwrap();
    let output = run(&["validate", path.to_str().unwrap()]);
    assert_exit(&output, 1);
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("sums to"), "stderr: {stderr}");
    assert!(stderr.contains("0,0"), "diagnostic names the row: {stderr}");
}

#[test]
fn validate_rejects_unresolved_spec_phrases_with_exit_1() {
    let dir = temp_dir("badspec");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join("specs.csv");
    fs::write(
        &path,
        "model_id,phrase_type,cell_00,cell_01,cell_10,cell_11\nm1,subject_verb,sv_paper_bored,sv_paper_launched,sv_plant_bored,missing_phrase\n",
    )
    .unwrap();
    let output = run(&[
        "validate",
        data("mini/phrases.csv").to_str().unwrap(),
        path.to_str().unwrap(),
    ]);
    assert_exit(&output, 1);
    assert!(String::from_utf8_lossy(&output.stderr).contains("unresolved phrase id"));
}

#[test]
fn fractions_reports_exact_rational_values() {
    let out = temp_dir("fractions");
    let output = run(&[
        "fractions",
        data("model_signalling.json").to_str().unwrap(),
        data("model_compatible.json").to_str().unwrap(),
        "--witness",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["arithmetic"], "rational");
    let signalling = &report["models"]["model_signalling"];
    assert_eq!(signalling["fractions"]["A->B"], "13/42");
    assert_eq!(signalling["fractions"]["B->A"], "1/2");
    assert_eq!(signalling["fractions"]["no_signalling"], "1/5");
    assert_eq!(signalling["methods"]["A->B"], "closed_form");
    assert_eq!(signalling["methods"]["no_signalling"], "lp");
    // The embedded chain witness is the compatible reference table.
    assert_eq!(
        signalling["witnesses"]["A->B"]["rows"]["0,0"]["0,1"],
        "6/13"
    );
    let compatible = &report["models"]["model_compatible"];
    assert_eq!(compatible["fractions"]["A->B"], "1");
    assert_eq!(compatible["fractions"]["B->A"], "28/65");
}

#[test]
fn fractions_accepts_csv_tables() {
    let dir = temp_dir("csvmodel");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join("table.csv");
    fs::write(
        &path,
        "input,\"0,0\",\"0,1\",\"1,0\",\"1,1\"\n\
         \"0,0\",0,1/7,0,6/7\n\
         \"0,1\",2/3,1/6,1/6,0\n\
         \"1,0\",1/4,0,1/4,1/2\n\
         \"1,1\",1/5,3/5,1/5,0\n",
    )
    .unwrap();
    let out = dir.join("out");
    let output = run(&[
        "fractions",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["models"]["table"]["fractions"]["A->B"], "13/42");
}

#[test]
fn fractions_bound_method_reports_bounds() {
    let out = temp_dir("bounds");
    let output = run(&[
        "fractions",
        data("model_signalling.json").to_str().unwrap(),
        "--method",
        "bound",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let m = &report["models"]["model_signalling"];
    assert_eq!(m["fractions"]["no_signalling"], "13/42");
    assert_eq!(m["methods"]["no_signalling"], "upper_bound");
}

fn run_pipeline(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "pipeline".to_string(),
        "--annotations".into(),
        data("mini/annotations.csv").display().to_string(),
        "--phrases".into(),
        data("mini/phrases.csv").display().to_string(),
        "--specs".into(),
        data("mini/specs.csv").display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    bin().args(&args).output().expect("binary runs")
}

fn collect_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().to_string();
                files.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn pipeline_output_matches_the_golden_snapshot() {
    let out = temp_dir("golden");
    assert_exit(&run_pipeline(&out, &[]), 0);
    let golden_root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/mini");
    let got = collect_files(&out);
    let want = collect_files(&golden_root);
    assert_eq!(
        got.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        want.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "file sets differ"
    );
    for ((name, bytes), (_, golden)) in got.iter().zip(&want) {
        assert_eq!(bytes, golden, "contents differ for {name}");
    }
}

#[test]
fn report_and_plot_commands_work_from_an_existing_report() {
    let base = temp_dir("twostage");
    assert_exit(&run_pipeline(&base.join("pipeline"), &[]), 0);
    let report_path = base.join("pipeline/report.json");

    let report_out = base.join("report");
    let output = run(&[
        "report",
        "--fractions",
        report_path.to_str().unwrap(),
        "--out",
        report_out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    assert!(report_out.join("summary.json").exists());
    assert!(report_out.join("correlations.csv").exists());
    // Same inputs, same analysis: summary matches the pipeline's.
    assert_eq!(
        fs::read(base.join("pipeline/summary.json")).unwrap(),
        fs::read(report_out.join("summary.json")).unwrap()
    );

    let plot_out = base.join("plots");
    let output = run(&[
        "plot",
        "--fractions",
        report_path.to_str().unwrap(),
        "--out",
        plot_out.to_str().unwrap(),
    ]);
    assert_exit(&output, 0);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(plot_out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f.as_str().unwrap().ends_with(".svg")));
}

#[test]
fn pipeline_with_empty_annotations_exits_1_and_writes_nothing() {
    let dir = temp_dir("emptyann");
    fs::create_dir_all(&dir).unwrap();
    let ann = dir.join("annotations.csv");
    fs::write(&ann, "worker_id,phrase_id,combination_id,score\n").unwrap();
    let out = dir.join("out");
    let output = bin()
        .args([
            "pipeline",
            "--annotations",
            ann.to_str().unwrap(),
            "--phrases",
            data("mini/phrases.csv").to_str().unwrap(),
            "--specs",
            data("mini/specs.csv").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_exit(&output, 1);
    assert!(!out.exists(), "no output directory on abort");
}

#[test]
fn drop_neutral_changes_the_aggregation() {
    let keep = temp_dir("neutral_keep");
    let drop = temp_dir("neutral_drop");
    assert_exit(&run_pipeline(&keep, &[]), 0);
    assert_exit(&run_pipeline(&drop, &["--drop-neutral"]), 0);
    let a = fs::read_to_string(keep.join("models/sv_model_1.json")).unwrap();
    let b = fs::read_to_string(drop.join("models/sv_model_1.json")).unwrap();
    assert_ne!(a, b, "neutral scores must affect the averages");
}

#[test]
fn batch_of_many_generated_models_emits_one_row_each() {
    let dir = temp_dir("batch");
    fs::create_dir_all(&dir).unwrap();
    let mut files = Vec::new();
    // Deterministic synthetic batch; float tables keep the LPs cheap.
    let mut state = 0x243f6a8885a308d3u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for k in 0..644 {
        let mut rows = String::new();
        for (r, input) in ["0,0", "0,1", "1,0", "1,1"].iter().enumerate() {
            let mut cells: Vec<f64> = (0..4).map(|_| next() + 1e-3).collect();
            let total: f64 = cells.iter().sum();
            for c in cells.iter_mut() {
                *c /= total;
            }
            // Close the row to exactly 1 against float drift.
            let drift = 1.0 - cells.iter().sum::<f64>();
            cells[3] += drift;
            rows.push_str(&format!(
                "    \"{input}\": {{\"0,0\": {}, \"0,1\": {}, \"1,0\": {}, \"1,1\": {}}}{}\n",
                cells[0],
                cells[1],
                cells[2],
                cells[3],
                if r == 3 { "" } else { "," }
            ));
        }
        let text = format!(
            "{{\n  \"rows\": {{\n{rows}  }},\n  \"scenario\": {{\n    \"events\": [\n      {{\"id\": \"A\", \"inputs\": [\"0\", \"1\"], \"outputs\": [\"0\", \"1\"]}},\n      {{\"id\": \"B\", \"inputs\": [\"0\", \"1\"], \"outputs\": [\"0\", \"1\"]}}\n    ],\n    \"order\": []\n  }}\n}}\n"
        );
        let path = dir.join(format!("model_{k:03}.json"));
        fs::write(&path, text).unwrap();
        files.push(path.display().to_string());
    }
    let out = dir.join("out");
    let mut args = vec!["fractions".to_string()];
    args.extend(files);
    args.push("--out".into());
    args.push(out.display().to_string());
    let output = bin().args(&args).output().unwrap();
    assert_exit(&output, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let models = report["models"].as_object().unwrap();
    assert_eq!(models.len(), 644);
    assert!(models
        .values()
        .all(|m| m["fractions"].as_object().unwrap().len() == 3));
}
