//! Config-driven experiment execution.
//!
//! Every run writes `results.csv` (one row per trial and method, fixed
//! header, 17-significant-digit reals) and `summary.json` with
//! per-group statistics; solve and theory-report modes on synthetic
//! data also write `theory.json`. Trials may execute in parallel but
//! rows are emitted in plan order, so identical configs reproduce
//! results.csv bit-for-bit. Per-trial wall-clock is only recorded when
//! `timing` is set, precisely to keep that reproducibility.
//!
//! Seeding: trial `t` uses `seed + t` for instance generation, solver
//! initialization and sampling. All methods inside a trial see the same
//! instance and draw columns from the same stream, so comparisons are
//! paired (the full-budget baseline sees exactly the solver's columns;
//! half-budget baselines see a prefix subset).

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use rayon::prelude::*;

use colcomplete_core::curplus::{self, CurVariant};
use colcomplete_core::datagen::{self, NoiseMode, SyntheticSpec};
use colcomplete_core::io::format_real;
use colcomplete_core::metrics;
use colcomplete_core::polybasis::PolyBasis;
use colcomplete_core::qpma::{self, QpmaConfig, QpmaModel};
use colcomplete_core::sampling::{sample_columns, ColumnSampler};
use colcomplete_core::theory::{self, ReportContext, TheoryReport};
use colcomplete_core::DenseMatrix;

use crate::config::{DataSpec, ExperimentConfig, GridSpec, Method, Mode};

pub const RESULTS_HEADER: &str =
    "mode,method,n,m,r,l,k_proxy,d,sigma,seed,nmse,sq_spectral_err,iters,wallclock,error";

/// Success threshold for the minimal-d sweep: a trial counts as exact
/// recovery when its normalized error is below this.
pub const MIN_D_SUCCESS_NMSE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct TrialRow {
    pub method: &'static str,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub l: usize,
    pub k_proxy: usize,
    pub d: usize,
    pub sigma: Option<f64>,
    pub seed: u64,
    pub nmse: Option<f64>,
    pub sq_spectral_err: Option<f64>,
    pub iters: Option<usize>,
    pub wallclock: Option<f64>,
    pub error: Option<String>,
}

impl TrialRow {
    fn csv_line(&self, mode: Mode) -> String {
        let opt_real = |v: &Option<f64>| v.map(format_real).unwrap_or_default();
        let opt_int = |v: &Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        let err = self
            .error
            .as_deref()
            .map(|e| e.replace([',', '\n'], ";"))
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            mode.as_str(),
            self.method,
            self.n,
            self.m,
            self.r,
            self.l,
            self.k_proxy,
            self.d,
            opt_real(&self.sigma),
            self.seed,
            opt_real(&self.nmse),
            opt_real(&self.sq_spectral_err),
            opt_int(&self.iters),
            opt_real(&self.wallclock),
            err,
        )
    }
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub results_csv: PathBuf,
    pub summary_json: PathBuf,
    pub theory_json: Option<PathBuf>,
    pub row_count: usize,
    pub summary: serde_json::Value,
}

/// Execute the configured experiment and write its artifacts.
pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<RunArtifacts> {
    let out_dir = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}", cfg.mode.as_str())));
    if out_dir.exists() {
        let occupied = fs::read_dir(&out_dir)?.next().is_some();
        if occupied && !cfg.force {
            bail!(
                "output directory {} is not empty; pass --force to overwrite",
                out_dir.display()
            );
        }
    }
    fs::create_dir_all(&out_dir)?;

    let started = Instant::now();
    let execute = || -> anyhow::Result<(Vec<TrialRow>, serde_json::Value)> {
        match cfg.mode {
            Mode::SweepD => sweep_d(cfg, &out_dir),
            Mode::SweepNoise => sweep_noise(cfg, &out_dir),
            Mode::SweepMinD => sweep_min_d(cfg),
            Mode::Solve | Mode::TheoryReport => solve_mode(cfg, &out_dir),
        }
    };
    let (rows, mut summary) = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .context("building thread pool")?
            .install(execute),
        None => execute(),
    }?;

    let results_csv = out_dir.join("results.csv");
    let mut csv = String::from(RESULTS_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.csv_line(cfg.mode));
        csv.push('\n');
    }
    fs::write(&results_csv, csv)?;

    summary["mode"] = serde_json::json!(cfg.mode.as_str());
    summary["rows"] = serde_json::json!(rows.len());
    summary["total_wallclock_s"] = serde_json::json!(started.elapsed().as_secs_f64());
    let summary_json = out_dir.join("summary.json");
    fs::write(&summary_json, serde_json::to_string_pretty(&summary)?)?;

    // diagnostic report for single-instance modes with a known instance
    let theory_json = if matches!(cfg.mode, Mode::Solve | Mode::TheoryReport) {
        match theory_for_first_trial(cfg)? {
            Some(report) => {
                let path = out_dir.join("theory.json");
                fs::write(&path, report.to_json()?)?;
                Some(path)
            }
            None => None,
        }
    } else {
        None
    };

    Ok(RunArtifacts {
        out_dir,
        results_csv,
        summary_json,
        theory_json,
        row_count: rows.len(),
        summary,
    })
}

fn synthetic_parts(
    cfg: &ExperimentConfig,
) -> anyhow::Result<(usize, usize, f64, NoiseMode, GridSpec)> {
    match &cfg.data {
        DataSpec::Synthetic {
            n,
            m,
            sigma,
            noise,
            grid,
        } => Ok((
            *n,
            *m,
            *sigma,
            noise.clone().unwrap_or(NoiseMode::DenseGaussian),
            grid.clone().unwrap_or_default(),
        )),
        DataSpec::File { .. } => bail!("{} requires synthetic data", cfg.mode.as_str()),
    }
}

fn instance_for_trial(
    cfg: &ExperimentConfig,
    grid: &[f64],
    sigma: f64,
    noise: &NoiseMode,
    degree: usize,
    trial_seed: u64,
) -> anyhow::Result<datagen::Instance> {
    let (n, m, ..) = synthetic_parts(cfg)?;
    let spec = SyntheticSpec {
        n,
        m,
        degree,
        grid: Some(grid.to_vec()),
        q_seed: trial_seed,
        noise_sigma: sigma,
        noise_seed: trial_seed,
        noise_mode: noise.clone(),
    };
    Ok(datagen::generate(&spec)?)
}

/// Run one method on one synthetic trial. All methods share the trial's
/// instance and column stream.
#[allow(clippy::too_many_arguments)]
fn run_method_synthetic(
    cfg: &ExperimentConfig,
    inst: &datagen::Instance,
    method: Method,
    target_rank: usize,
    d: usize,
    trial_seed: u64,
    save_dir: Option<PathBuf>,
) -> TrialRow {
    let (n, m) = (inst.m_true.rows(), inst.m_true.cols());
    let solver = &cfg.solver;
    let mut row = TrialRow {
        method: method.as_str(),
        n,
        m,
        r: target_rank,
        l: inst.spec.degree,
        k_proxy: inst.spec.rank_proxy(),
        d,
        sigma: Some(inst.spec.noise_sigma),
        seed: trial_seed,
        nmse: None,
        sq_spectral_err: None,
        iters: None,
        wallclock: None,
        error: None,
    };

    let clock = Instant::now();
    let outcome: Result<(DenseMatrix, usize), colcomplete_core::Error> = (|| match method {
        Method::Qpma => {
            let sampler = curplus::planned_column_sampler(trial_seed, m, d)?;
            let a = sample_columns(&inst.m_true, &sampler)?;
            let qcfg = QpmaConfig {
                target_rank,
                degree: inst.spec.degree,
                step_size: solver.step_size,
                max_iters: solver.max_iters,
                grad_tol: solver.grad_tol,
                seed: trial_seed,
                normalize_basis: solver.normalize_basis,
            };
            let model = qpma::solve(&a, &sampler, &inst.s, &qcfg)?;
            if let Some(dir) = &save_dir {
                model.save_dir(dir, &qcfg)?;
            }
            let iters = model.iters_q + model.iters_z;
            Ok((model.m_hat, iters))
        }
        Method::Cur1 | Method::Cur2 | Method::Cur3 => {
            let variant = match method {
                Method::Cur1 => CurVariant::Type1,
                Method::Cur2 => CurVariant::Type2,
                _ => CurVariant::Type3,
            };
            let mut spec = curplus::make_type(variant, n, m, d, target_rank, trial_seed)?;
            spec.step_size = solver.step_size;
            spec.max_iters = solver.max_iters;
            let model = curplus::cur_solve(&inst.m_true, &spec)?;
            if let Some(dir) = &save_dir {
                model.save_dir(dir, &spec)?;
            }
            Ok((model.m_hat, model.iters))
        }
    })();

    match outcome {
        Ok((m_hat, iters)) => {
            row.iters = Some(iters);
            match metrics::nmse(&m_hat, &inst.m_true) {
                Ok(v) => row.nmse = Some(v),
                Err(e) => row.error = Some(e.to_string()),
            }
            match metrics::spectral_sq_error(&m_hat, &inst.m_true) {
                Ok(v) => row.sq_spectral_err = Some(v),
                Err(e) => row.error = Some(e.to_string()),
            }
            if cfg.timing {
                row.wallclock = Some(clock.elapsed().as_secs_f64());
            }
            row
        }
        Err(e) => {
            row.error = Some(e.to_string());
            if cfg.timing {
                row.wallclock = Some(clock.elapsed().as_secs_f64());
            }
            row
        }
    }
}

fn model_dir(cfg: &ExperimentConfig, out: &std::path::Path, tag: &str) -> Option<PathBuf> {
    if cfg.save_models {
        Some(out.join("models").join(tag))
    } else {
        None
    }
}

fn sweep_d(
    cfg: &ExperimentConfig,
    out: &std::path::Path,
) -> anyhow::Result<(Vec<TrialRow>, serde_json::Value)> {
    let (_, m, sigma, noise, grid_spec) = synthetic_parts(cfg)?;
    let d_values = cfg.d_values.clone().context("sweep-d requires d_values")?;
    let grid = grid_spec.resolve(m)?;

    let plan: Vec<(usize, usize)> = d_values
        .iter()
        .enumerate()
        .flat_map(|(di, _)| (0..cfg.trials).map(move |t| (di, t)))
        .collect();
    let chunks: Vec<anyhow::Result<Vec<TrialRow>>> = plan
        .par_iter()
        .map(|&(di, t)| {
            let d = d_values[di];
            let trial_seed = cfg.seed.wrapping_add(t as u64);
            let inst =
                instance_for_trial(cfg, &grid, sigma, &noise, cfg.solver.degree, trial_seed)?;
            let mut rows = Vec::new();
            for method in cfg.methods() {
                let tag = format!("d{d}_t{t}_{}", method.as_str());
                let dir = model_dir(cfg, out, &tag);
                rows.push(run_method_synthetic(
                    cfg,
                    &inst,
                    method,
                    cfg.solver.target_rank,
                    d,
                    trial_seed,
                    dir,
                ));
            }
            Ok(rows)
        })
        .collect();

    let mut rows = Vec::new();
    for chunk in chunks {
        rows.extend(chunk?);
    }
    let summary = summarize(&rows);
    Ok((rows, summary))
}

fn sweep_noise(
    cfg: &ExperimentConfig,
    out: &std::path::Path,
) -> anyhow::Result<(Vec<TrialRow>, serde_json::Value)> {
    let (_, m, _, noise, grid_spec) = synthetic_parts(cfg)?;
    let d = cfg.d.context("sweep-noise requires d")?;
    let sigmas = cfg
        .sigma_values
        .clone()
        .context("sweep-noise requires sigma_values")?;
    let grid = grid_spec.resolve(m)?;

    let plan: Vec<(usize, usize)> = sigmas
        .iter()
        .enumerate()
        .flat_map(|(si, _)| (0..cfg.trials).map(move |t| (si, t)))
        .collect();
    let chunks: Vec<anyhow::Result<Vec<TrialRow>>> = plan
        .par_iter()
        .map(|&(si, t)| {
            let sigma = sigmas[si];
            let trial_seed = cfg.seed.wrapping_add(t as u64);
            let inst =
                instance_for_trial(cfg, &grid, sigma, &noise, cfg.solver.degree, trial_seed)?;
            let mut rows = Vec::new();
            for method in cfg.methods() {
                let tag = format!("s{si}_t{t}_{}", method.as_str());
                let dir = model_dir(cfg, out, &tag);
                rows.push(run_method_synthetic(
                    cfg,
                    &inst,
                    method,
                    cfg.solver.target_rank,
                    d,
                    trial_seed,
                    dir,
                ));
            }
            Ok(rows)
        })
        .collect();

    let mut rows = Vec::new();
    for chunk in chunks {
        rows.extend(chunk?);
    }
    let summary = summarize(&rows);
    Ok((rows, summary))
}

/// Noiseless recovery probes: for each target rank, expand and then
/// bisect over d for the smallest column budget where every trial seed
/// recovers the instance below [`MIN_D_SUCCESS_NMSE`].
fn sweep_min_d(cfg: &ExperimentConfig) -> anyhow::Result<(Vec<TrialRow>, serde_json::Value)> {
    let (_, m, _, noise, grid_spec) = synthetic_parts(cfg)?;
    let r_values = cfg
        .r_values
        .clone()
        .context("sweep-min-d requires r_values")?;
    let grid = grid_spec.resolve(m)?;

    let mut rows = Vec::new();
    let mut minimal = serde_json::Map::new();

    for &r in &r_values {
        let degree = r - 1; // exact-recovery regime: basis rank equals target rank
        let probe = |d: usize, rows: &mut Vec<TrialRow>| -> anyhow::Result<bool> {
            let mut all_ok = true;
            for t in 0..cfg.trials {
                let trial_seed = cfg.seed.wrapping_add(t as u64);
                let inst = instance_for_trial(cfg, &grid, 0.0, &noise, degree, trial_seed)?;
                let row = run_method_synthetic(cfg, &inst, Method::Qpma, r, d, trial_seed, None);
                let ok = row.nmse.is_some_and(|v| v < MIN_D_SUCCESS_NMSE);
                rows.push(row);
                all_ok &= ok;
            }
            Ok(all_ok)
        };

        // expand the budget until recovery succeeds
        let mut hi = r;
        let mut last_fail = None;
        let mut found = probe(hi, &mut rows)?;
        while !found && hi < m {
            last_fail = Some(hi);
            let stride = (hi - r).max(1);
            hi = (hi + stride).min(m);
            found = probe(hi, &mut rows)?;
        }
        if !found {
            minimal.insert(r.to_string(), serde_json::Value::Null);
            continue;
        }
        // bisect between the last failure and the first success
        let mut lo = last_fail.unwrap_or(hi);
        while hi > lo + 1 {
            let mid = (lo + hi) / 2;
            if probe(mid, &mut rows)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        minimal.insert(r.to_string(), serde_json::json!(hi));
    }

    let mut summary = summarize(&rows);
    summary["minimal_d"] = serde_json::Value::Object(minimal);
    Ok((rows, summary))
}

fn solve_mode(
    cfg: &ExperimentConfig,
    out: &std::path::Path,
) -> anyhow::Result<(Vec<TrialRow>, serde_json::Value)> {
    match &cfg.data {
        DataSpec::Synthetic {
            m,
            sigma,
            noise,
            grid,
            ..
        } => {
            let d = cfg.d.context("solve on synthetic data requires d")?;
            let sigma = *sigma;
            let noise = noise.clone().unwrap_or(NoiseMode::DenseGaussian);
            let grid = grid.clone().unwrap_or_default().resolve(*m)?;

            let chunks: Vec<anyhow::Result<Vec<TrialRow>>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let trial_seed = cfg.seed.wrapping_add(t as u64);
                    let inst = instance_for_trial(
                        cfg,
                        &grid,
                        sigma,
                        &noise,
                        cfg.solver.degree,
                        trial_seed,
                    )?;
                    let mut rows = Vec::new();
                    for method in cfg.methods() {
                        let tag = format!("t{t}_{}", method.as_str());
                        let dir = model_dir(cfg, out, &tag);
                        rows.push(run_method_synthetic(
                            cfg,
                            &inst,
                            method,
                            cfg.solver.target_rank,
                            d,
                            trial_seed,
                            dir,
                        ));
                    }
                    Ok(rows)
                })
                .collect();
            let mut rows = Vec::new();
            for chunk in chunks {
                rows.extend(chunk?);
            }
            let summary = summarize(&rows);
            Ok((rows, summary))
        }
        DataSpec::File {
            path,
            columns,
            grid,
        } => {
            let matrix = colcomplete_core::io::load_csv(path)?;
            let m = matrix.cols();
            let grid = grid.clone().unwrap_or_default().resolve(m)?;
            let basis = PolyBasis::new(grid, cfg.solver.degree)?;
            let sampler = ColumnSampler::new(m, columns.clone())?;
            let d = sampler.len();

            let methods = cfg.methods();
            let wants_qpma = methods.contains(&Method::Qpma);
            let needs_model = wants_qpma || cfg.hybrid_rows;
            let mut rows = Vec::new();
            for t in 0..cfg.trials {
                let trial_seed = cfg.seed.wrapping_add(t as u64);
                let mut model = None;
                if needs_model {
                    let (qpma_row, fitted) =
                        run_qpma_on_file(cfg, &matrix, &basis, &sampler, trial_seed, out, t)?;
                    if wants_qpma {
                        rows.push(qpma_row);
                    }
                    model = fitted;
                }
                for method in &methods {
                    let variant = match method {
                        Method::Qpma => continue, // already run
                        Method::Cur1 => CurVariant::Type1,
                        Method::Cur2 => CurVariant::Type2,
                        Method::Cur3 => CurVariant::Type3,
                    };
                    rows.push(run_cur_on_file(
                        cfg,
                        &matrix,
                        variant,
                        *method,
                        d,
                        trial_seed,
                        model.as_ref(),
                        &basis,
                    ));
                }
            }
            let summary = summarize(&rows);
            Ok((rows, summary))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_qpma_on_file(
    cfg: &ExperimentConfig,
    matrix: &DenseMatrix,
    basis: &PolyBasis,
    sampler: &ColumnSampler,
    trial_seed: u64,
    out: &std::path::Path,
    trial: usize,
) -> anyhow::Result<(TrialRow, Option<QpmaModel>)> {
    let (n, m) = (matrix.rows(), matrix.cols());
    let solver = &cfg.solver;
    let mut row = TrialRow {
        method: "qpma",
        n,
        m,
        r: solver.target_rank,
        l: solver.degree,
        k_proxy: n.min(m),
        d: sampler.len(),
        sigma: None,
        seed: trial_seed,
        nmse: None,
        sq_spectral_err: None,
        iters: None,
        wallclock: None,
        error: None,
    };
    let clock = Instant::now();
    let qcfg = QpmaConfig {
        target_rank: solver.target_rank,
        degree: solver.degree,
        step_size: solver.step_size,
        max_iters: solver.max_iters,
        grad_tol: solver.grad_tol,
        seed: trial_seed,
        normalize_basis: solver.normalize_basis,
    };
    let result = (|| -> colcomplete_core::Result<QpmaModel> {
        let a = sample_columns(matrix, sampler)?;
        qpma::solve(&a, sampler, basis, &qcfg)
    })();
    match result {
        Ok(model) => {
            if let Some(dir) = model_dir(cfg, out, &format!("t{trial}_qpma")) {
                model.save_dir(dir, &qcfg)?;
            }
            row.nmse = metrics::nmse(&model.m_hat, matrix).ok();
            row.sq_spectral_err = metrics::spectral_sq_error(&model.m_hat, matrix).ok();
            row.iters = Some(model.iters_q + model.iters_z);
            if cfg.timing {
                row.wallclock = Some(clock.elapsed().as_secs_f64());
            }
            Ok((row, Some(model)))
        }
        Err(e) => {
            row.error = Some(e.to_string());
            Ok((row, None))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_cur_on_file(
    cfg: &ExperimentConfig,
    matrix: &DenseMatrix,
    variant: CurVariant,
    method: Method,
    d: usize,
    trial_seed: u64,
    qpma_model: Option<&QpmaModel>,
    basis: &PolyBasis,
) -> TrialRow {
    let (n, m) = (matrix.rows(), matrix.cols());
    let solver = &cfg.solver;
    let mut row = TrialRow {
        method: method.as_str(),
        n,
        m,
        r: solver.target_rank,
        l: solver.degree,
        k_proxy: n.min(m),
        d,
        sigma: None,
        seed: trial_seed,
        nmse: None,
        sq_spectral_err: None,
        iters: None,
        wallclock: None,
        error: None,
    };
    let clock = Instant::now();
    let result = (|| -> colcomplete_core::Result<curplus::CurPlusModel> {
        let mut spec = curplus::make_type(variant, n, m, d, solver.target_rank, trial_seed)?;
        spec.step_size = solver.step_size;
        spec.max_iters = solver.max_iters;
        if cfg.hybrid_rows {
            let model = qpma_model.ok_or_else(|| {
                colcomplete_core::Error::Argument(
                    "hybrid rows need a fitted polynomial model".into(),
                )
            })?;
            let row_source = model.q_hat.matmul(basis.matrix());
            curplus::cur_solve_hybrid(matrix, &spec, &row_source)
        } else {
            curplus::cur_solve(matrix, &spec)
        }
    })();
    match result {
        Ok(model) => {
            row.nmse = metrics::nmse(&model.m_hat, matrix).ok();
            row.sq_spectral_err = metrics::spectral_sq_error(&model.m_hat, matrix).ok();
            row.iters = Some(model.iters);
            if cfg.timing {
                row.wallclock = Some(clock.elapsed().as_secs_f64());
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Recompute the first trial's solve and assemble the diagnostic
/// report. Synthetic data gets the full report; file data omits the
/// quantities that need the planted decomposition.
fn theory_for_first_trial(cfg: &ExperimentConfig) -> anyhow::Result<Option<TheoryReport>> {
    let trial_seed = cfg.seed;
    match &cfg.data {
        DataSpec::Synthetic {
            m,
            sigma,
            noise,
            grid,
            ..
        } => {
            let d = match cfg.d {
                Some(d) => d,
                None => return Ok(None),
            };
            let noise = noise.clone().unwrap_or(NoiseMode::DenseGaussian);
            let grid = grid.clone().unwrap_or_default().resolve(*m)?;
            let inst =
                instance_for_trial(cfg, &grid, *sigma, &noise, cfg.solver.degree, trial_seed)?;
            let sampler = curplus::planned_column_sampler(trial_seed, *m, d)?;
            let a = sample_columns(&inst.m_true, &sampler)?;
            let qcfg = QpmaConfig {
                target_rank: cfg.solver.target_rank,
                degree: cfg.solver.degree,
                step_size: cfg.solver.step_size,
                max_iters: cfg.solver.max_iters,
                grad_tol: cfg.solver.grad_tol,
                seed: trial_seed,
                normalize_basis: cfg.solver.normalize_basis,
            };
            let model = match qpma::solve(&a, &sampler, &inst.s, &qcfg) {
                Ok(m) => m,
                Err(e) => {
                    log::warn!("theory report skipped: {e}");
                    return Ok(None);
                }
            };
            let qs = inst.qs();
            let report = theory::theory_report(&ReportContext {
                m_true: &inst.m_true,
                qs: Some(&qs),
                e: Some(&inst.e_true),
                model: &model,
                sampler: &sampler,
                target_rank: cfg.solver.target_rank,
            })?;
            Ok(Some(report))
        }
        DataSpec::File {
            path,
            columns,
            grid,
        } => {
            let matrix = colcomplete_core::io::load_csv(path)?;
            let m = matrix.cols();
            let grid = grid.clone().unwrap_or_default().resolve(m)?;
            let basis = PolyBasis::new(grid, cfg.solver.degree)?;
            let sampler = ColumnSampler::new(m, columns.clone())?;
            let a = sample_columns(&matrix, &sampler)?;
            let qcfg = QpmaConfig {
                target_rank: cfg.solver.target_rank,
                degree: cfg.solver.degree,
                step_size: cfg.solver.step_size,
                max_iters: cfg.solver.max_iters,
                grad_tol: cfg.solver.grad_tol,
                seed: trial_seed,
                normalize_basis: cfg.solver.normalize_basis,
            };
            let model = match qpma::solve(&a, &sampler, &basis, &qcfg) {
                Ok(m) => m,
                Err(e) => {
                    log::warn!("theory report skipped: {e}");
                    return Ok(None);
                }
            };
            let report = theory::theory_report(&ReportContext {
                m_true: &matrix,
                qs: None,
                e: None,
                model: &model,
                sampler: &sampler,
                target_rank: cfg.solver.target_rank,
            })?;
            Ok(Some(report))
        }
    }
}

/// Group rows by (method, d, sigma) and report mean/stddev of the
/// normalized error plus failure counts.
fn summarize(rows: &[TrialRow]) -> serde_json::Value {
    use std::collections::BTreeMap;
    #[derive(Default)]
    struct Acc {
        nmse: Vec<f64>,
        spectral: Vec<f64>,
        failures: usize,
    }
    let mut groups: BTreeMap<(String, usize, u64), Acc> = BTreeMap::new();
    for row in rows {
        let key = (
            row.method.to_string(),
            row.d,
            row.sigma.unwrap_or(f64::NAN).to_bits(),
        );
        let acc = groups.entry(key).or_default();
        match (row.nmse, &row.error) {
            (Some(v), None) => {
                acc.nmse.push(v);
                if let Some(s) = row.sq_spectral_err {
                    acc.spectral.push(s);
                }
            }
            _ => acc.failures += 1,
        }
    }
    let list: Vec<serde_json::Value> = groups
        .into_iter()
        .map(|((method, d, sigma_bits), acc)| {
            let mean_nmse = mean(&acc.nmse);
            serde_json::json!({
                "method": method,
                "d": d,
                "sigma": f64::from_bits(sigma_bits),
                "trials": acc.nmse.len() + acc.failures,
                "failures": acc.failures,
                "mean_nmse": mean_nmse,
                "std_nmse": stddev(&acc.nmse, mean_nmse),
                "mean_sq_spectral_err": mean(&acc.spectral),
            })
        })
        .collect();
    serde_json::json!({ "groups": list })
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

fn stddev(xs: &[f64], mean_val: Option<f64>) -> Option<f64> {
    let m = mean_val?;
    if xs.len() < 2 {
        return Some(0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    Some(var.sqrt())
}
