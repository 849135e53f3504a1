mod common;

use rcpgm::analysis::{fit_finite_size, threshold_verdict, Verdict};
use rcpgm::experiment::{analyze, parse_summary, summary_tsv, SummaryRow};
use rcpgm::observables::{DisorderAverage, Estimate};
use rcpgm::ModelKind;

#[test]
fn noiseless_power_laws_are_recovered() {
    for (a, b, tc) in [(0.8, 2.0, 1.0), (-1.3, 0.7, 2.2692), (3.0, 1.0, 0.4)] {
        let y: Vec<f64> = common::FIT_SIZES.iter().map(|l: &f64| a * l.powf(-b) + tc).collect();
        let f = fit_finite_size(&common::FIT_SIZES, &y, None).unwrap();
        assert!((f.a - a).abs() <= 1e-6, "a {} vs {a}", f.a);
        assert!((f.b - b).abs() <= 1e-6, "b {} vs {b}", f.b);
        assert!((f.tc - tc).abs() <= 1e-6, "tc {} vs {tc}", f.tc);
    }
}

#[test]
fn noisy_fits_cover_the_truth() {
    let covered = common::fit_coverage(100, 2024);
    println!("3σ coverage: {covered}/100");
    assert!(covered >= 95, "{covered}/100");
}

/// Summary rows whose B3 changes sign at `tc` with slope `-s`, and whose χ
/// peaks at `peak`.
fn synthetic(tc: f64, peak: f64) -> Vec<SummaryRow> {
    (0..21)
        .map(|n| {
            let t = 0.8 + 0.04 * n as f64;
            let e = |v: f64| Estimate { value: v, error: 0.01 };
            SummaryRow::from_average(&DisorderAverage {
                temperature: t,
                samples: 50,
                order: e(1.0 / (1.0 + t)),
                chi: e(2.0 - (t - peak).powi(2)),
                b3: Some(e(3.0 * (t - tc))),
                b3_samples: 50,
                binder: Some(e(0.6 - (t - tc))),
                energy: e(-t),
            })
        })
        .collect()
}

#[test]
fn power_law_fixture_is_echoed() {
    let (a, b, tc) = (0.9, 1.5, 1.1);
    let runs: Vec<(usize, Vec<SummaryRow>)> = [8usize, 12, 16, 20]
        .iter()
        .map(|&l| {
            let t = a * (l as f64).powf(-b) + tc;
            (l, synthetic(t, t))
        })
        .collect();
    let row = analyze("fixture", ModelKind::Rcpgm, Some(0.03), Some(1.0), &runs).unwrap();
    for (s, (l, _)) in row.sizes.iter().zip(&runs) {
        let want = a * (*l as f64).powf(-b) + tc;
        let b3 = s.b3.unwrap();
        assert!((b3.temperature - want).abs() < 1e-9);
        assert!((s.chi.unwrap().temperature - want).abs() < 1e-9);
    }
    let fit = row.fit.unwrap();
    assert!((fit.tc - tc).abs() < 1e-6 && (fit.b - b).abs() < 1e-5 && (fit.a - a).abs() < 1e-5);
    assert_eq!(row.verdict, Verdict::Below);
    assert_eq!(threshold_verdict(Some(&fit), 1.2), Verdict::Inconclusive);
}

#[test]
fn missing_crossings_mean_above_threshold() {
    let rows: Vec<SummaryRow> = synthetic(5.0, 1.0);
    let runs = vec![(8, rows.clone()), (12, rows)];
    let row = analyze("none", ModelKind::Rcpgm, Some(0.09), Some(0.8), &runs).unwrap();
    assert!(row.sizes.iter().all(|s| s.b3.is_none()));
    assert_eq!(row.verdict, Verdict::Above);
}

#[test]
fn summary_round_trips() {
    let rows = synthetic(1.0, 1.2);
    let avgs: Vec<DisorderAverage> = rows
        .iter()
        .map(|r| DisorderAverage {
            temperature: r.temperature,
            samples: 3,
            order: r.order,
            chi: r.chi,
            b3: if r.temperature > 1.5 { None } else { r.b3 },
            b3_samples: r.b3_samples,
            binder: r.binder,
            energy: r.energy,
        })
        .collect();
    let text = summary_tsv("# test", &avgs);
    let back = parse_summary(&text).unwrap();
    assert_eq!(back.len(), avgs.len());
    for (x, y) in back.iter().zip(&avgs) {
        assert_eq!(*x, SummaryRow::from_average(y));
    }
    assert!(parse_summary("temperature\n1\n").is_err());
}
