//! Command-line driver: ingestion, the analysis pipeline and report files.

mod artifacts;
mod ingest;
mod svg;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::json;

pub use artifacts::{format_num, Artifacts, Cell, Format, Table};
pub use ingest::{ingest_csv, parse_csv, Ingested};

use crate::align::{align_set, AlignmentResult, DEFAULT_ALIGN_MAX_ITER, DEFAULT_ALIGN_TOL};
use crate::baselines::{mse_comparison, Method, MseCurve};
use crate::error::{Error, Result};
use crate::fccca::{canonical_mode, fit_cca};
use crate::fcpca::{estimate_c, fit_eigen, mode_of_variation};
use crate::fungeom::{SampledCurve, TimeGrid};
use crate::simgen::{generate, SimConfig, SimDataset, SimModel, DEFAULT_K, DEFAULT_NOISE_SD};
use crate::smooth::RawRecord;
use crate::workflow::smooth_records;
use svg::{line_plot, Series};

pub const THREADS_ENV: &str = "FCPCA_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Smooth,
    Align,
    Fcpca,
    Fccca,
    Simulate,
    Benchmark,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Smooth => "smooth",
            Command::Align => "align",
            Command::Fcpca => "fcpca",
            Command::Fccca => "fccca",
            Command::Simulate => "simulate",
            Command::Benchmark => "benchmark",
        }
    }
}

fn parse_model(s: &str) -> std::result::Result<SimModel, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Clone, Debug, Parser)]
#[command(name = "fcpca", version, about = "Combined amplitude/phase PCA and CCA for functional data")]
pub struct Cli {
    /// Pipeline stage to run.
    #[arg(value_enum)]
    pub command: Command,
    /// Wide CSV: header `id,t1,...,tk`, one subject per row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "fcpca-out")]
    pub out: PathBuf,
    /// Evaluation grid size.
    #[arg(long, default_value_t = DEFAULT_K)]
    pub grid_k: usize,
    /// Components (fcpca), canonical pairs (fccca) or largest m (benchmark).
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    /// CCA smoothing parameter; cross-validated when absent.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Simulation model: pca_model, cca_model, toy_linear or toy_quadratic.
    #[arg(long, value_parser = parse_model)]
    pub model: Option<SimModel>,
    /// Simulated sample size.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Simulated replicates (benchmark).
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = DEFAULT_NOISE_SD)]
    pub noise_sd: f64,
    /// Format of tabular artifacts.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub input_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub grid_k: usize,
    pub m: usize,
    pub lambda: Option<f64>,
    pub seed: u64,
    pub model: Option<SimModel>,
    pub n: usize,
    pub reps: usize,
    pub noise_sd: f64,
    pub format: Format,
}

impl From<Cli> for RunConfig {
    fn from(c: Cli) -> Self {
        Self {
            command: c.command,
            input_path: c.input,
            output_dir: c.out,
            grid_k: c.grid_k,
            m: c.m,
            lambda: c.lambda,
            seed: c.seed,
            model: c.model,
            n: c.n,
            reps: c.reps,
            noise_sd: c.noise_sd,
            format: c.format,
        }
    }
}

impl RunConfig {
    /// Defaults for `command` writing into `output_dir`.
    pub fn new(command: Command, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            command,
            input_path: None,
            output_dir: output_dir.into(),
            grid_k: DEFAULT_K,
            m: 2,
            lambda: None,
            seed: 0,
            model: None,
            n: 100,
            reps: 1,
            noise_sd: DEFAULT_NOISE_SD,
            format: Format::Csv,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_k < 11 {
            return Err(Error::InvalidParameter(format!("grid_k must be at least 11, got {}", self.grid_k)));
        }
        if self.m == 0 {
            return Err(Error::InvalidParameter("m must be at least 1".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidParameter("reps must be at least 1".into()));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::InvalidParameter(format!("lambda must be a nonnegative number, got {l}")));
            }
        }
        Ok(())
    }

    fn sim_config(&self, model: SimModel, seed: u64) -> SimConfig {
        SimConfig {
            n: self.n,
            k: self.grid_k,
            seed,
            noise_sd: self.noise_sd,
            model,
        }
    }
}

/// Everything a run produces before anything is written.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub artifacts: Artifacts,
    pub timings: Vec<(String, f64)>,
    pub warnings: Vec<String>,
    pub summary: serde_json::Value,
}

impl RunOutput {
    fn timed<R>(&mut self, stage: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let r = f();
        self.timings.push((stage.to_string(), start.elapsed().as_secs_f64()));
        r
    }

    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    /// Records a warning already logged elsewhere.
    fn note(&mut self, msg: String) {
        self.warnings.push(msg);
    }
}

struct Input {
    ids: Vec<String>,
    records: Vec<RawRecord<f64>>,
}

fn records_of(ds: &SimDataset<f64>) -> Result<Input> {
    let ids: Vec<String> = (1..=ds.fs.len()).map(|i| i.to_string()).collect();
    let records = ids
        .iter()
        .zip(&ds.fs)
        .map(|(id, f)| RawRecord::new(id.clone(), f.grid().points().to_vec(), f.values().to_vec()))
        .collect::<Result<_>>()?;
    Ok(Input { ids, records })
}

fn load_input(cfg: &RunConfig, out: &mut RunOutput) -> Result<Input> {
    match (&cfg.input_path, cfg.model) {
        (Some(path), _) => {
            let data = out.timed("ingest", || ingest_csv(path))?;
            if data.rescaled {
                out.note("header times rescaled to [0, 1]".into());
            }
            Ok(Input {
                records: data.records()?,
                ids: data.ids,
            })
        }
        (None, Some(model)) => {
            let ds = out.timed("simulate", || generate::<f64>(&cfg.sim_config(model, cfg.seed)))?;
            records_of(&ds)
        }
        (None, None) => Err(Error::InvalidParameter("either --input or --model is required".into())),
    }
}

struct Prepared {
    grid: TimeGrid<f64>,
    smoothed: Vec<SampledCurve<f64>>,
    lambdas: Vec<f64>,
}

fn smooth_stage(cfg: &RunConfig, input: &Input, out: &mut RunOutput) -> Result<Prepared> {
    let grid = TimeGrid::uniform(cfg.grid_k)?;
    let (smoothed, lambdas) = out.timed("smooth", || smooth_records(&input.records, &grid))?;
    Ok(Prepared { grid, smoothed, lambdas })
}

fn align_stage(prep: &Prepared, out: &mut RunOutput) -> Result<AlignmentResult<f64>> {
    let al = out.timed("align", || align_set(&prep.smoothed, DEFAULT_ALIGN_TOL, DEFAULT_ALIGN_MAX_ITER))?;
    if !al.converged {
        out.note(format!("template did not settle within {} iterations", al.iterations));
    }
    Ok(al)
}

fn labelled<'a>(ids: &'a [String], curves: impl Iterator<Item = &'a [f64]> + 'a) -> impl Iterator<Item = (String, &'a [f64])> + 'a {
    ids.iter().cloned().zip(curves)
}

/// Runs one command and collects its artifacts in memory.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mut out = RunOutput::default();
    match cfg.command {
        Command::Simulate => simulate(cfg, &mut out)?,
        Command::Benchmark => benchmark(cfg, &mut out)?,
        cmd => {
            let input = load_input(cfg, &mut out)?;
            let prep = smooth_stage(cfg, &input, &mut out)?;
            let times = prep.grid.points().to_vec();
            if cmd == Command::Smooth {
                let t = Table::wide("id", &times, labelled(&input.ids, prep.smoothed.iter().map(|c| c.values())));
                out.artifacts.table("smoothed", &t, cfg.format);
                out.summary = json!({ "n": input.ids.len(), "gcv_lambdas": prep.lambdas });
                return Ok(out);
            }
            let al = align_stage(&prep, &mut out)?;
            match cmd {
                Command::Align => write_alignment(cfg, &input.ids, &times, &al, &mut out),
                Command::Fcpca => run_fcpca(cfg, &input.ids, &prep, &al, &mut out)?,
                Command::Fccca => run_fccca(cfg, &prep, &al, &mut out)?,
                _ => unreachable!("handled above"),
            }
        }
    }
    Ok(out)
}

fn write_alignment(cfg: &RunConfig, ids: &[String], times: &[f64], al: &AlignmentResult<f64>, out: &mut RunOutput) {
    let aligned = Table::wide("id", times, labelled(ids, al.aligned.iter().map(|c| c.values())));
    let warps = Table::wide("id", times, labelled(ids, al.warps.iter().map(|w| w.values())));
    let phases = Table::wide("id", times, labelled(ids, al.phases.iter().map(|x| x.values())));
    out.artifacts.table("aligned", &aligned, cfg.format);
    out.artifacts.table("warps", &warps, cfg.format);
    out.artifacts.table("phases", &phases, cfg.format);
    out.summary = json!({
        "n": ids.len(),
        "iterations": al.iterations,
        "converged": al.converged,
    });
}

fn run_fcpca(cfg: &RunConfig, ids: &[String], prep: &Prepared, al: &AlignmentResult<f64>, out: &mut RunOutput) -> Result<()> {
    let (ys, xs, fs) = (&al.aligned, &al.phases, &prep.smoothed);
    let est = out.timed("estimate_c", || estimate_c(ys, xs, fs, cfg.m))?;
    if est.degenerate {
        out.warn("reconstruction error is flat in C; using C = 1".into());
    }
    let model = out.timed("fcpca", || fit_eigen(ys, xs, est.c))?;
    let r = model.n_components();
    let k = prep.grid.len();
    let times = prep.grid.points();

    let mut eig = Table::new(["component", "eigenvalue"]);
    for (j, v) in model.eigenvalues.iter().enumerate() {
        eig.push(vec![(j + 1).into(), (*v).into()]);
    }
    out.artifacts.table("eigenvalues", &eig, cfg.format);

    let mut header = vec!["component".to_string(), "part".to_string()];
    header.extend(times.iter().map(|t| format_num(*t)));
    let mut ef = Table::new(header);
    for j in 0..r {
        let e = model.eigenfunction(j);
        for (part, vals) in [("amplitude", &e[..k]), ("phase", &e[k..])] {
            let mut row: Vec<Cell> = vec![(j + 1).into(), part.into()];
            row.extend(vals.iter().map(|v| Cell::Num(*v)));
            ef.push(row);
        }
    }
    out.artifacts.table("eigenfunctions", &ef, cfg.format);

    let mut header = vec!["id".to_string()];
    header.extend((1..=r).map(|j| format!("pc{j}")));
    let mut sc = Table::new(header);
    for (i, id) in ids.iter().enumerate() {
        let mut row: Vec<Cell> = vec![id.clone().into()];
        row.extend((0..r).map(|j| Cell::Num(model.scores[(i, j)])));
        sc.push(row);
    }
    out.artifacts.table("scores", &sc, cfg.format);

    out.artifacts.json(
        "C.json",
        &json!({
            "c": est.c,
            "mse": est.mse,
            "m": cfg.m,
            "degenerate": est.degenerate,
            "scan": est.scan,
        }),
    );

    for j in 0..cfg.m.min(r) {
        let mut series = Vec::new();
        for z in [-1.0, 0.0, 1.0] {
            match mode_of_variation(&model, j, z) {
                Ok(c) => series.push(Series {
                    label: format!("z = {z}"),
                    xs: times.to_vec(),
                    ys: c.values().to_vec(),
                }),
                Err(e) => out.warn(format!("mode {} at z = {z} skipped: {e}", j + 1)),
            }
        }
        let title = format!("Combined mode {} (C = {:.3})", j + 1, est.c);
        out.artifacts
            .add(format!("modes_pc{}.svg", j + 1), line_plot(&title, "t", "f(t)", &series).into_bytes());
    }
    out.summary = json!({
        "n": ids.len(),
        "c": est.c,
        "mse": est.mse,
        "eigenvalues": model.eigenvalues.iter().take(cfg.m.max(5)).collect::<Vec<_>>(),
        "alignment_iterations": al.iterations,
    });
    Ok(())
}

fn run_fccca(cfg: &RunConfig, prep: &Prepared, al: &AlignmentResult<f64>, out: &mut RunOutput) -> Result<()> {
    let (ys, xs) = (&al.aligned, &al.phases);
    let model = out.timed("fccca", || fit_cca(ys, xs, cfg.lambda, cfg.m))?;
    if model.truncated {
        out.warn(format!("only {} canonical pairs available", model.n_pairs()));
    }
    let times = prep.grid.points();
    let mut header = vec!["pair".to_string(), "block".to_string()];
    header.extend(times.iter().map(|t| format_num(*t)));
    let mut wt = Table::new(header);
    for (i, (py, px)) in model.weight_pairs.iter().enumerate() {
        for (block, w) in [("amplitude", py), ("phase", px)] {
            let mut row: Vec<Cell> = vec![(i + 1).into(), block.into()];
            row.extend(w.values().iter().map(|v| Cell::Num(*v)));
            wt.push(row);
        }
    }
    out.artifacts.table("cca_weights", &wt, cfg.format);
    let report = json!({
        "lambda": model.lambda,
        "lambda_selected_by_cv": cfg.lambda.is_none(),
        "correlations": model.correlations,
        "slopes": model.slopes,
        "n_pairs": model.n_pairs(),
        "truncated": model.truncated,
        "cv": model.cv,
    });
    out.artifacts.json("cca_report.json", &report);

    for i in 0..model.n_pairs() {
        // spread of the amplitudes along the unit direction of psi_y
        let psi = &model.weight_pairs[i].0;
        let norm = psi.norm();
        let proj: Vec<f64> = ys
            .iter()
            .map(|y| y.sub(&model.mean_amplitude).and_then(|d| d.inner(psi)).map(|v| v / norm))
            .collect::<Result<_>>()?;
        let n = proj.len() as f64;
        let sd = (proj.iter().map(|v| v * v).sum::<f64>() / (n - 1.0)).sqrt();
        let mut series = Vec::new();
        for mult in [-2.0, 0.0, 2.0] {
            let a = mult * sd / norm;
            match canonical_mode(&model, i, a, None) {
                Ok(c) => series.push(Series {
                    label: format!("a = {mult} sd"),
                    xs: times.to_vec(),
                    ys: c.values().to_vec(),
                }),
                Err(e) => out.warn(format!("canonical mode {} at a = {mult} sd skipped: {e}", i + 1)),
            }
        }
        let title = format!("Canonical mode {} (rho = {:.3})", i + 1, model.correlations[i]);
        out.artifacts
            .add(format!("cca_mode{}.svg", i + 1), line_plot(&title, "t", "f(t)", &series).into_bytes());
    }
    out.summary = report;
    Ok(())
}

fn simulate(cfg: &RunConfig, out: &mut RunOutput) -> Result<()> {
    let model = cfg
        .model
        .ok_or_else(|| Error::InvalidParameter("simulate requires --model".into()))?;
    let ds = out.timed("simulate", || generate::<f64>(&cfg.sim_config(model, cfg.seed)))?;
    let input = records_of(&ds)?;
    let times = ds.grid.points().to_vec();
    let t = Table::wide("id", &times, labelled(&input.ids, ds.fs.iter().map(|c| c.values())));
    out.artifacts.table("dataset", &t, cfg.format);
    let truth = &ds.truth;
    out.artifacts.json(
        "truth.json",
        &json!({
            "config": ds.config,
            "grid": times,
            "mean": truth.mean,
            "amplitude_basis": truth.amplitude_basis,
            "phase_basis": truth.phase_basis,
            "glued_components": truth.glued_components,
            "variances": truth.variances,
            "scores": ds.scores_true,
            "resampled": ds.resampled,
        }),
    );
    out.summary = json!({ "model": model.name(), "n": ds.fs.len(), "resampled": ds.resampled });
    Ok(())
}

fn benchmark(cfg: &RunConfig, out: &mut RunOutput) -> Result<()> {
    let runs: Vec<(u64, Input)> = match (&cfg.input_path, cfg.model) {
        (Some(_), _) => {
            if cfg.reps > 1 {
                out.warn("--reps ignored for file input".into());
            }
            vec![(cfg.seed, load_input(cfg, out)?)]
        }
        (None, Some(model)) => (0..cfg.reps as u64)
            .map(|r| {
                let seed = cfg.seed.wrapping_add(r);
                let ds = generate::<f64>(&cfg.sim_config(model, seed))?;
                Ok((seed, records_of(&ds)?))
            })
            .collect::<Result<_>>()?,
        (None, None) => return Err(Error::InvalidParameter("benchmark requires --input or --model".into())),
    };
    let mut per_rep = Table::new(["replicate", "seed", "method", "m", "mse"]);
    let mut all: Vec<[MseCurve<f64>; 3]> = Vec::new();
    for (r, (seed, input)) in runs.iter().enumerate() {
        let prep = smooth_stage(cfg, input, out)?;
        let al = align_stage(&prep, out)?;
        let curves = out.timed("mse_comparison", || mse_comparison(&al.aligned, &al.phases, &prep.smoothed, cfg.m))?;
        for c in &curves {
            for (m, v) in c.m_values.iter().zip(&c.mse) {
                per_rep.push(vec![(r + 1).into(), Cell::Text(seed.to_string()), c.method.name().into(), (*m).into(), (*v).into()]);
            }
        }
        all.push(curves);
    }
    let reps = all.len() as f64;
    let methods = [Method::Fcpca, Method::Fpca, Method::Composite];
    let mut mean = Table::new(["method", "m", "mse"]);
    let mut series = Vec::new();
    let mut summary = serde_json::Map::new();
    for (k, method) in methods.iter().enumerate() {
        let m_values = all[0][k].m_values.clone();
        let avg: Vec<f64> = (0..m_values.len())
            .map(|j| all.iter().map(|c| c[k].mse[j]).sum::<f64>() / reps)
            .collect();
        for (m, v) in m_values.iter().zip(&avg) {
            mean.push(vec![method.name().into(), (*m).into(), (*v).into()]);
        }
        summary.insert(method.name().into(), json!(avg));
        series.push(Series {
            label: method.name().into(),
            xs: m_values.iter().map(|m| *m as f64).collect(),
            ys: avg,
        });
    }
    out.artifacts.table("mse_comparison", &mean, cfg.format);
    if all.len() > 1 {
        out.artifacts.table("mse_replicates", &per_rep, cfg.format);
    }
    out.artifacts.add(
        "mse_plot.svg".into(),
        line_plot("Reconstruction error", "m", "MSE", &series).into_bytes(),
    );
    summary.insert("replicates".into(), json!(all.len()));
    out.summary = serde_json::Value::Object(summary);
    Ok(())
}

fn manifest(cfg: &RunConfig, out: Option<&RunOutput>, err: Option<&Error>) -> serde_json::Value {
    let mut v = json!({
        "status": if err.is_some() { "error" } else { "ok" },
        "command": cfg.command.name(),
        "config": cfg,
        "versions": { "fcpca": env!("CARGO_PKG_VERSION") },
        "seed": cfg.seed,
    });
    if let Some(out) = out {
        v["timings"] = json!(out.timings.iter().map(|(k, s)| json!({ "stage": k, "seconds": s })).collect::<Vec<_>>());
        v["artifacts"] = json!(out.artifacts.names());
        v["warnings"] = json!(out.warnings);
        v["summary"] = out.summary.clone();
    }
    if let Some(e) = err {
        v["error"] = error_json(e);
    }
    v
}

pub fn error_json(e: &Error) -> serde_json::Value {
    json!({ "kind": e.kind(), "message": e.to_string() })
}

fn prepare_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".fcpca-write-test");
    std::fs::write(&probe, b"").map_err(|e| Error::io(dir, format!("not writable: {e}")))?;
    let _ = std::fs::remove_file(&probe);
    Ok(())
}

fn write_manifest(dir: &Path, value: &serde_json::Value) -> Result<()> {
    let path = dir.join("run.json");
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Runs `cfg`, writes its artifacts and `run.json`. On failure the manifest
/// records the error whenever the output directory is usable.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput> {
    prepare_dir(&cfg.output_dir)?;
    let result = run_pipeline(cfg).and_then(|out| {
        out.artifacts.write_all(&cfg.output_dir)?;
        Ok(out)
    });
    match result {
        Ok(out) => {
            write_manifest(&cfg.output_dir, &manifest(cfg, Some(&out), None))?;
            Ok(out)
        }
        Err(e) => {
            let _ = write_manifest(&cfg.output_dir, &manifest(cfg, None, Some(&e)));
            Err(e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))
}

/// Process entry point; returns the exit code.
pub fn main_entry() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cfg = RunConfig::from(Cli::parse());
    let result = configure_threads().and_then(|_| execute(&cfg));
    match result {
        Ok(out) => {
            println!("{}", json!({ "status": "ok", "command": cfg.command.name(), "artifacts": out.artifacts.names() }));
            0
        }
        Err(e) => {
            println!("{}", json!({ "status": "error", "error": error_json(&e) }));
            1
        }
    }
}
