use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rcpgm::analysis::Convention;
use rcpgm::config::RunEntry;
use rcpgm::experiment::{summary_tsv, Manifest, ManifestRun};
use rcpgm::noise::NoiseRates;
use rcpgm::observables::{DisorderAverage, Estimate};
use rcpgm::ModelKind;

fn rcpgm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rcpgm"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn tables_match_golden_transcription() {
    let golden = include_str!("../../core/tests/data/cnot_tables.tsv");
    assert_eq!(stdout(&rcpgm(&["tables"])), golden);
    let single = stdout(&rcpgm(&["tables", "--single-qubit"]));
    assert_eq!(single.lines().count(), 49);
}

#[test]
fn reduce_prints_exact_coefficients() {
    let text = stdout(&rcpgm(&["reduce", "--target", "rpgm", "--p", "0.015"]));
    assert!(text.contains("px_h = 0.088 # 88/15 p"), "{text}");
    assert!(text.contains("q = 0.088 # 88/15 p"), "{text}");
    let text = stdout(&rcpgm(&["reduce", "--target", "rcpgm", "--p", "0.015"]));
    assert!(text.contains("# 52/15 p"), "{text}");
    assert!(text.contains("py_h = 0.036 # 12/5 p"), "{text}");
    assert!(!rcpgm(&["reduce", "--target", "rcpgm", "--p", "1.5"]).status.success());
}

fn write_config(path: &Path, out: &Path, extra: &str) {
    fs::write(
        path,
        format!(
            r#"model = "rcpgm"
master_seed = 9
n_disorder_samples = 2
output_dir = "{}"
convention = "normalized"
thermalization_sweeps = 5
{extra}
[noise]
kind = "symmetric"
p = 0.05

[[runs]]
L = 3
n_sweep = 20
n_met = 1
t_step = 4
t_min = 1.0
t_max = 2.0
"#,
            out.display()
        ),
    )
    .unwrap();
}

fn observable_files(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(dir.join("L3_run0"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "tsv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn run_is_deterministic_and_seed_can_be_overridden() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = tmp.path().join("run.toml");
    write_config(&cfg, &out, "");
    let cfg = cfg.to_str().unwrap();
    stdout(&rcpgm(&["run", cfg]));
    let first = observable_files(&out);
    assert_eq!(first.len(), 3);
    fs::remove_dir_all(&out).unwrap();
    stdout(&rcpgm(&["run", cfg, "--workers", "2"]));
    assert_eq!(observable_files(&out), first);

    fs::remove_dir_all(&out).unwrap();
    stdout(&rcpgm(&["run", cfg, "--seed", "10"]));
    let other = observable_files(&out);
    assert!(other[0].1.contains("master_seed=10"));
    assert_ne!(other, first);

    let csv = stdout(&rcpgm(&["analyze", out.to_str().unwrap()]));
    assert!(csv.starts_with("label,model,p,"));
    let plot = stdout(&rcpgm(&["plot-data", out.to_str().unwrap()]));
    assert!(plot.lines().any(|l| l.contains(",order_vs_t,3,")));
}

#[test]
fn invalid_config_fails_with_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    write_config(&cfg, &tmp.path().join("out"), "");
    let text = fs::read_to_string(&cfg).unwrap().replace("t_min = 1.0", "t_min = 3.0");
    fs::write(&cfg, text).unwrap();
    let out = rcpgm(&["run", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("runs[0].t_min"));
    assert!(!rcpgm(&["run", "/nonexistent.toml"]).status.success());
    assert!(!rcpgm(&["analyze", tmp.path().to_str().unwrap()]).status.success());
}

/// A results directory whose B3 curves cross zero at a L^-b + T_c.
fn fixture(dir: &Path, sizes: &[usize], a: f64, b: f64, tc: f64) {
    let mut runs = Vec::new();
    for (index, &l) in sizes.iter().enumerate() {
        let cross = a * (l as f64).powf(-b) + tc;
        let rows: Vec<DisorderAverage> = (0..16)
            .map(|n| {
                let t = 0.6 + 0.05 * n as f64;
                let e = |v: f64| Estimate { value: v, error: 0.02 };
                DisorderAverage {
                    temperature: t,
                    samples: 50,
                    order: e(0.5),
                    chi: e(1.0 - (t - cross).powi(2)),
                    b3: Some(e(2.0 * (t - cross))),
                    b3_samples: 50,
                    binder: Some(e(0.5)),
                    energy: e(-t),
                }
            })
            .collect();
        let entry = RunEntry { size: l, n_sweep: 1, n_met: 1, t_step: 16, t_min: 0.6, t_max: 1.35 };
        let sub = format!("L{l}_run{index}");
        fs::create_dir_all(dir.join(&sub)).unwrap();
        fs::write(dir.join(&sub).join("summary.tsv"), summary_tsv("# fixture", &rows)).unwrap();
        runs.push(ManifestRun { index, size: l, dir: sub, entry });
    }
    let manifest = Manifest {
        config_hash: "fixture".into(),
        master_seed: 0,
        model: ModelKind::Rcpgm,
        convention: Convention::Unnormalized,
        p: Some(0.02),
        rates: NoiseRates::symmetric(0.02),
        couplings: Default::default(),
        t_nishimori: Some(1.0),
        n_disorder_samples: 50,
        runs,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string(&manifest).unwrap()).unwrap();
}

#[test]
fn analyze_echoes_known_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("p0.02");
    fixture(&dir, &[8, 12, 16, 24], 1.5, 1.2, 1.05);
    let csv = stdout(&rcpgm(&["analyze", tmp.path().to_str().unwrap()]));
    let fit = csv.lines().find(|l| l.contains(",inf,fit,")).unwrap();
    let cols: Vec<&str> = fit.split(',').collect();
    let tc: f64 = cols[6].parse().unwrap();
    assert!((tc - 1.05).abs() < 1e-6, "{fit}");
    assert_eq!(cols[10], "below");

    let json = stdout(&rcpgm(&["analyze", dir.to_str().unwrap(), "--format", "json"]));
    let rows: serde_json::Value = serde_json::from_str(&json).unwrap();
    let b = rows[0]["fit"]["b"].as_f64().unwrap();
    assert!((b - 1.2).abs() < 1e-5);
    assert_eq!(rows[0]["sizes"].as_array().unwrap().len(), 4);

    let out = tmp.path().join("plot.csv");
    stdout(&rcpgm(&["plot-data", tmp.path().to_str().unwrap(), "-o", out.to_str().unwrap()]));
    let plot = fs::read_to_string(out).unwrap();
    assert_eq!(plot.lines().filter(|l| l.contains(",tc_vs_inv_l,")).count(), 4);
    assert!(plot.lines().any(|l| l.starts_with("p0.02,0.02,p_vs_tc,inf,0.02,")));
}
