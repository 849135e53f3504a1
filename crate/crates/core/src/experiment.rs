//! Experiment orchestration: disorder sampling, tempering jobs over a worker
//! pool, persistence of per-sample series and summaries, and the analysis of
//! a results directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    find_b3_zero_crossing, find_chi_peak, find_curve_crossing, fit_finite_size, nishimori_temperature,
    threshold_verdict, Convention, CurvePoint, ScalingFit, TransitionEstimate, Verdict,
};
use crate::circuit::{emit_location_tables, reduce_to_rates, UnitCellCircuit};
use crate::config::{NoiseSource, RunConfig, RunEntry};
use crate::error::{domain, Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::model::ModelKind;
use crate::noise::{
    couplings_symmetric_depolarizing, sample_disorder, symmetric_depolarizing_family, CouplingSet, NoiseRates,
};
use crate::observables::{disorder_average, DisorderAverage, Estimate, ObservableSeries};
use crate::ptmc::{run_disorder_sample, CheckpointPolicy, TemperatureLadder};
use crate::rng::derive_seed;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "RCPGM_WORKERS";

pub fn resolve_rates(cfg: &RunConfig) -> Result<NoiseRates> {
    match &cfg.noise {
        NoiseSource::Symmetric { p } => Ok(NoiseRates::symmetric(*p)),
        NoiseSource::Explicit { rates } => Ok(*rates),
        NoiseSource::Circuit { p, target } => {
            let tables = emit_location_tables(&UnitCellCircuit::toric())?;
            reduce_to_rates(&tables, *target, *p)
        }
    }
}

/// Couplings for the configured convention. An explicit `couplings` table
/// wins. Normalized symmetric noise uses J = 1, with the coupled gauge model
/// on its temperature family βJq = 2β - ln(3)/2; every other normalized case
/// divides the Nishimori couplings by the horizontal X coupling.
pub fn resolve_couplings(cfg: &RunConfig, rates: &NoiseRates) -> Result<CouplingSet> {
    if let Some(c) = cfg.couplings {
        return Ok(c);
    }
    match (cfg.convention, &cfg.noise) {
        (Convention::Unnormalized, _) => CouplingSet::from_rates(cfg.model, rates),
        (Convention::Normalized, NoiseSource::Symmetric { p }) => match cfg.model {
            ModelKind::Rcpgm => {
                couplings_symmetric_depolarizing(*p, true)?;
                Ok(symmetric_depolarizing_family())
            }
            ModelKind::R8vm => couplings_symmetric_depolarizing(*p, true),
            ModelKind::Rbim | ModelKind::Rpgm if *p == 0.0 => Ok(CouplingSet::uniform(1.0, 1.0)),
            ModelKind::Rbim | ModelKind::Rpgm => CouplingSet::from_rates(cfg.model, rates)?.normalized(),
        },
        (Convention::Normalized, _) => CouplingSet::from_rates(cfg.model, rates)?.normalized(),
    }
}

fn worker_count(requested: Option<usize>) -> Result<usize> {
    if let Some(n) = requested {
        return Ok(n.max(1));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|n| n.max(1))
            .map_err(|_| Error::Config {
                field: WORKERS_ENV.into(),
                message: format!("not a worker count: {v:?}"),
            }),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOptions {
    /// Write series, checkpoints, summaries and the manifest under the
    /// configured output directory.
    pub write: bool,
    pub workers: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub index: usize,
    pub entry: RunEntry,
    pub temperatures: Vec<f64>,
    /// Per disorder sample, per temperature.
    pub samples: Vec<Vec<ObservableSeries>>,
    pub averages: Vec<DisorderAverage>,
}

#[derive(Clone, Debug)]
pub struct ResultSet {
    pub config_hash: String,
    pub master_seed: u64,
    pub rates: NoiseRates,
    pub couplings: CouplingSet,
    pub t_nishimori: Option<f64>,
    pub runs: Vec<RunResult>,
}

pub fn run_dir(output: &Path, entry: &RunEntry, index: usize) -> PathBuf {
    output.join(format!("L{}_run{}", entry.size, index))
}

fn provenance(hash: &str, seed: u64) -> String {
    format!("# config_hash={hash} master_seed={seed}")
}

/// Run every configured (L, disorder sample) job and average the results.
pub fn run_experiment(cfg: &RunConfig, opts: &ExperimentOptions) -> Result<ResultSet> {
    cfg.validate()?;
    let rates = resolve_rates(cfg)?;
    let couplings = resolve_couplings(cfg, &rates)?;
    let t_nishimori = nishimori_temperature(cfg.model, &rates, cfg.convention).ok();
    let hash = cfg.hash();
    let seed = cfg.master_seed;
    let header = provenance(&hash, seed);
    log::info!(
        "{} with {} runs x {} samples, config {}",
        cfg.model,
        cfg.runs.len(),
        cfg.n_disorder_samples,
        &hash[..12]
    );

    if opts.write {
        for (i, e) in cfg.runs.iter().enumerate() {
            fs::create_dir_all(run_dir(&cfg.output_dir, e, i))?;
        }
        fs::write(cfg.output_dir.join("config.toml"), cfg.to_toml())?;
    }

    let jobs: Vec<(usize, usize)> = (0..cfg.runs.len())
        .flat_map(|r| (0..cfg.n_disorder_samples).map(move |s| (r, s)))
        .collect();
    let job = |&(run, sample): &(usize, usize)| -> Result<Vec<ObservableSeries>> {
        let entry = cfg.runs[run];
        let path = [run as u64, sample as u64];
        let disorder_seed = derive_seed(seed, &[path[0], path[1], 0]);
        let sim_seed = derive_seed(seed, &[path[0], path[1], 1]);
        let disorder = sample_disorder(cfg.model, &rates, &couplings, entry.size, disorder_seed)?;
        let ham = Hamiltonian::new(&disorder, cfg.geometry)?;
        let ladder = TemperatureLadder::geometric(entry.t_min, entry.t_max, entry.t_step)?;
        let params = cfg.run_parameters(run, sim_seed);
        let dir = run_dir(&cfg.output_dir, &entry, run);
        let policy = opts.write.then(|| CheckpointPolicy {
            path: dir.join(format!("sample_{sample}.ckpt")),
            every: if cfg.checkpoint_every == 0 { u64::MAX } else { cfg.checkpoint_every },
            halt_after: None,
        });
        let series = run_disorder_sample(&params, &ham, &ladder, sample, policy.as_ref())?;
        if opts.write {
            let mut out = format!(
                "{header} run={run} L={} sample={sample} disorder_seed={disorder_seed} sim_seed={sim_seed}\n\
                 t_index\ttemperature\tbin\torder\tenergy\n",
                entry.size
            );
            for (t, s) in series.iter().enumerate() {
                for b in 0..s.bins() {
                    writeln!(out, "{t}\t{}\t{b}\t{}\t{}", s.temperature, s.order[b], s.energy[b]).unwrap();
                }
            }
            fs::write(dir.join(format!("sample_{sample}.tsv")), out)?;
        }
        log::info!("run {run} (L = {}) sample {sample} done", entry.size);
        Ok(series)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(opts.workers)?)
        .build()
        .map_err(|e| domain(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<Vec<ObservableSeries>>> = pool.install(|| jobs.par_iter().map(job).collect());

    let mut per_run: Vec<Vec<Vec<ObservableSeries>>> = vec![Vec::new(); cfg.runs.len()];
    for ((run, sample), out) in jobs.iter().zip(outcomes) {
        match out {
            Ok(series) => per_run[*run].push(series),
            Err(e) => {
                return Err(Error::Sample {
                    index: *sample,
                    source: Box::new(e),
                })
            }
        }
    }

    let mut runs = Vec::with_capacity(cfg.runs.len());
    for (index, samples) in per_run.into_iter().enumerate() {
        let entry = cfg.runs[index];
        let temperatures: Vec<f64> = samples[0].iter().map(|s| s.temperature).collect();
        let mut averages = Vec::with_capacity(temperatures.len());
        for t in 0..temperatures.len() {
            let at_t: Vec<&ObservableSeries> = samples.iter().map(|s| &s[t]).collect();
            averages.push(disorder_average(&at_t, cfg.averaging)?);
        }
        if opts.write {
            let dir = run_dir(&cfg.output_dir, &entry, index);
            fs::write(dir.join("summary.tsv"), summary_tsv(&header, &averages))?;
        }
        runs.push(RunResult {
            index,
            entry,
            temperatures,
            samples,
            averages,
        });
    }

    if opts.write {
        let manifest = Manifest {
            config_hash: hash.clone(),
            master_seed: seed,
            model: cfg.model,
            convention: cfg.convention,
            p: cfg.noise.p(),
            rates,
            couplings: cfg
                .model
                .terms()
                .iter()
                .map(|t| (t.name().to_string(), couplings.magnitude(*t).to_string()))
                .chain((couplings.jq_bias != 0.0).then(|| ("jq_bias".to_string(), couplings.jq_bias.to_string())))
                .collect(),
            t_nishimori,
            n_disorder_samples: cfg.n_disorder_samples,
            runs: runs
                .iter()
                .map(|r| ManifestRun {
                    index: r.index,
                    size: r.entry.size,
                    dir: run_dir(Path::new(""), &r.entry, r.index)
                        .to_string_lossy()
                        .into_owned(),
                    entry: r.entry,
                })
                .collect(),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| domain(e.to_string()))?;
        fs::write(cfg.output_dir.join("manifest.json"), text + "\n")?;
    }

    Ok(ResultSet {
        config_hash: hash,
        master_seed: seed,
        rates,
        couplings,
        t_nishimori,
        runs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub model: ModelKind,
    pub convention: Convention,
    pub p: Option<f64>,
    pub rates: NoiseRates,
    /// Magnitude per term kind of the model, as text so frozen terms
    /// survive as `inf`.
    pub couplings: BTreeMap<String, String>,
    pub t_nishimori: Option<f64>,
    pub n_disorder_samples: usize,
    pub runs: Vec<ManifestRun>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub index: usize,
    #[serde(rename = "L")]
    pub size: usize,
    pub dir: String,
    pub entry: RunEntry,
}

pub const SUMMARY_COLUMNS: &str = "temperature\torder\torder_err\tchi\tchi_err\tb3\tb3_err\tb3_samples\tbinder\tbinder_err\tenergy\tenergy_err";

fn est(e: Option<Estimate>) -> (f64, f64) {
    e.map_or((f64::NAN, f64::NAN), |e| (e.value, e.error))
}

pub fn summary_tsv(header: &str, averages: &[DisorderAverage]) -> String {
    let mut out = format!("{header}\n{SUMMARY_COLUMNS}\n");
    for a in averages {
        let (b3, b3e) = est(a.b3);
        let (u, ue) = est(a.binder);
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            a.temperature,
            a.order.value,
            a.order.error,
            a.chi.value,
            a.chi.error,
            b3,
            b3e,
            a.b3_samples,
            u,
            ue,
            a.energy.value,
            a.energy.error
        )
        .unwrap();
    }
    out
}

/// One row of a summary table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub temperature: f64,
    pub order: Estimate,
    pub chi: Estimate,
    pub b3: Option<Estimate>,
    pub b3_samples: usize,
    pub binder: Option<Estimate>,
    pub energy: Estimate,
}

impl SummaryRow {
    pub fn from_average(a: &DisorderAverage) -> SummaryRow {
        SummaryRow {
            temperature: a.temperature,
            order: a.order,
            chi: a.chi,
            b3: a.b3,
            b3_samples: a.b3_samples,
            binder: a.binder,
            energy: a.energy,
        }
    }
}

pub fn parse_summary(text: &str) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line != SUMMARY_COLUMNS {
                return Err(Error::Parse(format!("line {}: unexpected summary header", n + 1)));
            }
            seen_header = true;
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 12 {
            return Err(Error::Parse(format!("line {}: expected 12 columns, got {}", n + 1, f.len())));
        }
        let num = |i: usize| -> Result<f64> {
            f[i].parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {}: bad number {:?}", n + 1, f[i])))
        };
        let opt = |v: f64, e: f64| (!v.is_nan()).then_some(Estimate { value: v, error: e });
        rows.push(SummaryRow {
            temperature: num(0)?,
            order: Estimate { value: num(1)?, error: num(2)? },
            chi: Estimate { value: num(3)?, error: num(4)? },
            b3: opt(num(5)?, num(6)?),
            b3_samples: f[7]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad count {:?}", n + 1, f[7])))?,
            binder: opt(num(8)?, num(9)?),
            energy: Estimate { value: num(10)?, error: num(11)? },
        });
    }
    if !seen_header {
        return Err(Error::Parse("summary has no header".into()));
    }
    Ok(rows)
}

/// A results directory read back from disk.
#[derive(Clone, Debug)]
pub struct LoadedExperiment {
    pub label: String,
    pub manifest: Manifest,
    /// Per run, in manifest order.
    pub summaries: Vec<Vec<SummaryRow>>,
}

pub fn load_experiment(dir: &Path) -> Result<LoadedExperiment> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", dir.join("manifest.json").display())))?;
    let mut summaries = Vec::with_capacity(manifest.runs.len());
    for r in &manifest.runs {
        let path = dir.join(&r.dir).join("summary.tsv");
        let text = fs::read_to_string(&path)?;
        summaries.push(parse_summary(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?);
    }
    let label = dir
        .file_name()
        .map_or_else(|| dir.display().to_string(), |n| n.to_string_lossy().into_owned());
    Ok(LoadedExperiment {
        label,
        manifest,
        summaries,
    })
}

/// Experiments under `dir`: the directory itself if it holds a manifest,
/// otherwise each immediate subdirectory that does, sorted by name.
pub fn find_experiments(dir: &Path) -> Result<Vec<LoadedExperiment>> {
    if dir.join("manifest.json").exists() {
        return Ok(vec![load_experiment(dir)?]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("manifest.json").exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(domain(format!("no results found under {}", dir.display())));
    }
    dirs.iter().map(|d| load_experiment(d)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeEstimates {
    #[serde(rename = "L")]
    pub size: usize,
    pub b3: Option<TransitionEstimate>,
    pub chi: Option<TransitionEstimate>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinderCrossing {
    pub sizes: (usize, usize),
    pub estimate: TransitionEstimate,
}

/// Transition estimates of one experiment (one noise strength).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseRow {
    pub label: String,
    pub model: ModelKind,
    pub p: Option<f64>,
    pub t_nishimori: Option<f64>,
    pub sizes: Vec<SizeEstimates>,
    pub binder_crossings: Vec<BinderCrossing>,
    pub fit: Option<ScalingFit>,
    pub verdict: Verdict,
}

fn curve(rows: &[SummaryRow], f: impl Fn(&SummaryRow) -> Option<Estimate>) -> Vec<CurvePoint> {
    rows.iter()
        .filter_map(|r| f(r).map(|e| CurvePoint::new(r.temperature, e.value, e.error)))
        .collect()
}

pub fn b3_curve(rows: &[SummaryRow]) -> Vec<CurvePoint> {
    curve(rows, |r| r.b3)
}

pub fn chi_curve(rows: &[SummaryRow]) -> Vec<CurvePoint> {
    curve(rows, |r| Some(r.chi))
}

pub fn binder_curve(rows: &[SummaryRow]) -> Vec<CurvePoint> {
    curve(rows, |r| r.binder)
}

/// B3 crossings and χ peaks per size, Binder crossings of consecutive sizes,
/// the finite-size extrapolation of the B3 crossings, and the verdict.
pub fn analyze(
    label: &str,
    model: ModelKind,
    p: Option<f64>,
    t_nishimori: Option<f64>,
    runs: &[(usize, Vec<SummaryRow>)],
) -> Result<PhaseRow> {
    let mut sizes = Vec::with_capacity(runs.len());
    for (size, rows) in runs {
        let b3 = b3_curve(rows);
        let b3 = if b3.len() >= 2 {
            find_b3_zero_crossing(&b3)?.map(|e| e.with_size(*size))
        } else {
            None
        };
        let chi = chi_curve(rows);
        let chi = if chi.len() >= 3 {
            Some(find_chi_peak(&chi)?.with_size(*size))
        } else {
            None
        };
        sizes.push(SizeEstimates { size: *size, b3, chi });
    }

    let mut by_size: BTreeMap<usize, &Vec<SummaryRow>> = BTreeMap::new();
    for (size, rows) in runs {
        by_size.entry(*size).or_insert(rows);
    }
    let ordered: Vec<(usize, &Vec<SummaryRow>)> = by_size.into_iter().collect();
    let mut binder_crossings = Vec::new();
    for w in ordered.windows(2) {
        let (a, b) = (binder_curve(w[0].1), binder_curve(w[1].1));
        if a.len() >= 2 && a.len() == b.len() {
            if let Ok(Some(e)) = find_curve_crossing(&a, &b) {
                binder_crossings.push(BinderCrossing {
                    sizes: (w[0].0, w[1].0),
                    estimate: e,
                });
            }
        }
    }

    let found: Vec<&TransitionEstimate> = sizes.iter().filter_map(|s| s.b3.as_ref()).collect();
    let fit = {
        let l: Vec<f64> = found.iter().map(|e| e.size.unwrap_or(0) as f64).collect();
        let t: Vec<f64> = found.iter().map(|e| e.temperature).collect();
        let err: Vec<f64> = found.iter().map(|e| e.uncertainty).collect();
        let weighted = err.iter().all(|e| *e > 0.0 && e.is_finite());
        fit_finite_size(&l, &t, weighted.then_some(err.as_slice())).ok()
    };
    let verdict = if found.is_empty() {
        Verdict::Above
    } else {
        match (fit.as_ref(), t_nishimori) {
            (Some(f), Some(tn)) => threshold_verdict(Some(f), tn),
            _ => Verdict::Inconclusive,
        }
    };
    Ok(PhaseRow {
        label: label.to_string(),
        model,
        p,
        t_nishimori,
        sizes,
        binder_crossings,
        fit,
        verdict,
    })
}

pub fn analyze_experiment(exp: &LoadedExperiment) -> Result<PhaseRow> {
    let runs: Vec<(usize, Vec<SummaryRow>)> = exp
        .manifest
        .runs
        .iter()
        .zip(&exp.summaries)
        .map(|(r, s)| (r.size, s.clone()))
        .collect();
    analyze(
        &exp.label,
        exp.manifest.model,
        exp.manifest.p,
        exp.manifest.t_nishimori,
        &runs,
    )
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub const PHASE_COLUMNS: &str =
    "label,model,p,t_nishimori,L,method,t_c,t_c_err,boundary,multiple_crossings,verdict";

/// Phase-diagram rows: one line per size and method, then the
/// extrapolation (L = inf) carrying the verdict.
pub fn phase_csv(rows: &[PhaseRow]) -> String {
    let mut out = format!("{PHASE_COLUMNS}\n");
    for r in rows {
        let lead = format!("{},{},{},{}", r.label, r.model, opt(r.p), opt(r.t_nishimori));
        for s in &r.sizes {
            for (method, e) in [("b3-zero", &s.b3), ("chi-peak", &s.chi)] {
                match e {
                    Some(e) => writeln!(
                        out,
                        "{lead},{},{method},{},{},{},{},",
                        s.size, e.temperature, e.uncertainty, e.boundary, e.multiple_crossings
                    ),
                    None => writeln!(out, "{lead},{},{method},,,,,", s.size),
                }
                .unwrap();
            }
        }
        for c in &r.binder_crossings {
            writeln!(
                out,
                "{lead},{}x{},binder-crossing,{},{},false,{},",
                c.sizes.0, c.sizes.1, c.estimate.temperature, c.estimate.uncertainty, c.estimate.multiple_crossings
            )
            .unwrap();
        }
        let verdict = serde_json::to_value(r.verdict)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        match &r.fit {
            Some(f) => writeln!(out, "{lead},inf,fit,{},{},{},false,{verdict}", f.tc, f.tc_err, f.at_bracket_edge),
            None => writeln!(out, "{lead},inf,fit,,,,,{verdict}"),
        }
        .unwrap();
    }
    out
}

pub const PLOT_COLUMNS: &str = "label,p,panel,L,x,y,err";

/// Tidy table for plotting: observables against T per size, B3 crossings
/// against 1/L, and extrapolated T_c against p.
pub fn plot_csv(exps: &[LoadedExperiment], rows: &[PhaseRow]) -> String {
    let mut out = format!("{PLOT_COLUMNS}\n");
    for (exp, row) in exps.iter().zip(rows) {
        let p = opt(exp.manifest.p);
        for (r, summary) in exp.manifest.runs.iter().zip(&exp.summaries) {
            for s in summary {
                let panels: [(&str, Option<Estimate>); 5] = [
                    ("order_vs_t", Some(s.order)),
                    ("b3_vs_t", s.b3),
                    ("chi_vs_t", Some(s.chi)),
                    ("binder_vs_t", s.binder),
                    ("energy_vs_t", Some(s.energy)),
                ];
                for (panel, e) in panels {
                    if let Some(e) = e {
                        writeln!(out, "{},{p},{panel},{},{},{},{}", exp.label, r.size, s.temperature, e.value, e.error)
                            .unwrap();
                    }
                }
            }
        }
        for s in &row.sizes {
            if let Some(e) = &s.b3 {
                writeln!(
                    out,
                    "{},{p},tc_vs_inv_l,{},{},{},{}",
                    exp.label,
                    s.size,
                    1.0 / s.size as f64,
                    e.temperature,
                    e.uncertainty
                )
                .unwrap();
            }
        }
        if let (Some(pv), Some(f)) = (exp.manifest.p, &row.fit) {
            writeln!(out, "{},{p},p_vs_tc,inf,{pv},{},{}", exp.label, f.tc, f.tc_err).unwrap();
        }
    }
    out
}
