//! The five subcommands. Each writes into its own run directory and
//! finishes it with a manifest.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::sync::Arc;

use kinex_core::io::{read_pdf, write_pdf, write_population, PdfRecord, PopulationRecord};
use kinex_core::kinetics::{
    default_seed, oscillatory_perturbation, relaxation_time_with, solve_steady, FixedPointReport, RelaxationFit,
    RelaxationOptions,
};
use kinex_core::models::{gamma_residual, gamma_shape};
use kinex_core::montecarlo::{run_ensemble, run_replica, EnsembleConfig, WealthHistogram};
use kinex_core::{distance, GridPdf, ModelKind, ModelParams, WealthGrid};
use rayon::prelude::*;

use crate::config::{ModelName, Settings};
use crate::error::{CliError, CliResult};
use crate::manifest::RunDir;

/// Defaults of the Monte Carlo run: the ensemble of the equilibrium figures.
pub const DEFAULT_AGENTS: usize = 10_000;
pub const DEFAULT_STEPS: u64 = 10_000_000;
pub const DEFAULT_REPLICAS: usize = 20;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_BINS: usize = 200;
/// Population size `N` of the relaxation measurement.
pub const DEFAULT_EVOLVE_AGENTS: usize = 1000;
/// Default fixed-point tolerance; tight enough to serve as the relaxation target.
pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 400;
/// Oscillatory perturbation used to start the relaxation, relative to `<u>`.
pub const PERTURBATION_AMPLITUDE: f64 = 0.1;
pub const PERTURBATION_PERIOD: f64 = 0.1;
pub const PERTURBATION_MOMENTS: usize = 5;
/// Residual curves cover `[0.05, 6] <u>` in steps of `0.01 <u>`.
pub const RESIDUAL_RANGE: (f64, f64) = (0.05, 6.0);
pub const RESIDUAL_STEP: f64 = 0.01;

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn key_values(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

fn pdf_bytes(record: &PdfRecord) -> kinex_core::Result<Vec<u8>> {
    let mut bytes = Vec::new();
    write_pdf(&mut bytes, record)?;
    Ok(bytes)
}

fn record(model: ModelParams, pdf: GridPdf) -> PdfRecord {
    PdfRecord {
        model,
        pdf,
        iterations: None,
        residual: None,
        extra: Vec::new(),
    }
}

pub fn simulate(settings: &Settings) -> CliResult<PathBuf> {
    let model = settings.model()?;
    let agents = settings.agents.unwrap_or(DEFAULT_AGENTS);
    let steps = settings.steps.unwrap_or(DEFAULT_STEPS);
    let replicas = settings.replicas.unwrap_or(DEFAULT_REPLICAS);
    let seed = settings.seed.unwrap_or(DEFAULT_SEED);
    let bins = settings.bins.unwrap_or(DEFAULT_BINS);
    if agents < 2 {
        return Err(CliError::Config(format!("agents: need at least 2, got {agents}")));
    }
    if replicas == 0 {
        return Err(CliError::Config("replicas: need at least 1".into()));
    }
    let range = kinex_core::montecarlo::DEFAULT_RANGE * model.mean_wealth();
    let edges = WealthHistogram::uniform(0.0, range, bins)
        .map_err(|e| CliError::Config(format!("bins: {e}")))?
        .edges()
        .to_vec();
    let mut config = EnsembleConfig::new(agents, model, steps, replicas, seed)?;
    config.edges = edges;

    let mut run = RunDir::create(settings.out_dir("kinex-simulate"))?;
    let (histogram, populations, mean_square) = if steps == 0 {
        // identity run: histogram of the initial populations
        let outcomes = (0..replicas)
            .map(|k| run_replica(&config, k))
            .collect::<Result<Vec<_>, _>>()?;
        let mut histogram = WealthHistogram::new(config.edges.clone())?;
        for outcome in &outcomes {
            histogram.record_all(outcome.population.wealth());
        }
        (histogram, outcomes, f64::NAN)
    } else {
        let outcome = run_ensemble(&config)?;
        let mean_square = outcome.mean_square_wealth();
        (outcome.histogram, outcome.replicas, mean_square)
    };

    let drift = populations
        .iter()
        .map(|r| ((r.population.total_wealth() - r.initial_total) / r.initial_total).abs())
        .fold(0.0, f64::max);
    let grid = Arc::new(settings.grid_for(&model)?);
    let pdf = histogram.to_grid_pdf(grid.clone(), model.mean_wealth())?;
    let (reference_name, reference) = reference_density(&model, grid)?;
    let l1 = distance(&pdf, &reference)?.l1;

    let mut table = String::from("bin_lo,bin_hi,count,density\n");
    let density = histogram.density()?;
    for ((w, count), d) in histogram.edges().windows(2).zip(histogram.counts()).zip(&density) {
        let _ = writeln!(table, "{},{},{count},{}", num(w[0]), num(w[1]), num(*d));
    }
    run.write("histogram.csv", table.as_bytes())?;

    let mut pdf_record = record(model, pdf);
    pdf_record.extra = vec![
        ("source".into(), "monte-carlo".into()),
        ("agents".into(), agents.to_string()),
        ("steps".into(), steps.to_string()),
        ("replicas".into(), replicas.to_string()),
        ("seed".into(), seed.to_string()),
    ];
    run.write("pdf.csv", &pdf_bytes(&pdf_record)?)?;

    let first = &populations[0];
    run.write_with("population.csv", |out| {
        write_population(
            out,
            &PopulationRecord {
                population: first.population.clone(),
                seed: first.seed,
            },
        )
    })?;

    let summary = key_values(&[
        ("samples", histogram.samples().to_string()),
        ("underflow", histogram.underflow().to_string()),
        ("overflow", histogram.overflow().to_string()),
        ("mean_square_wealth", num(mean_square)),
        ("max_relative_wealth_drift", num(drift)),
        ("reference", reference_name.to_string()),
        ("l1_to_reference", num(l1)),
    ]);
    run.write("summary.txt", summary.as_bytes())?;
    run.finish(
        "simulate",
        &with_defaults(
            settings,
            &[
                ("agents", agents.to_string()),
                ("steps", steps.to_string()),
                ("replicas", replicas.to_string()),
                ("seed", seed.to_string()),
                ("bins", bins.to_string()),
            ],
        ),
    )
}

/// The exponential for pure exchange, the model's Gamma approximation otherwise.
fn reference_density(model: &ModelParams, grid: Arc<WealthGrid>) -> CliResult<(&'static str, GridPdf)> {
    let name = match model.kind() {
        ModelKind::PureRandom => "exponential",
        _ => "gamma",
    };
    Ok((name, default_seed(model, grid)?))
}

fn with_defaults(settings: &Settings, resolved: &[(&str, String)]) -> Vec<(String, String)> {
    let mut echo = settings.echo();
    for (key, value) in resolved {
        if !echo.iter().any(|(k, _)| k == key) {
            echo.push((key.to_string(), value.clone()));
        }
    }
    echo
}

/// What `steady` reports, also used by `sweep`.
pub struct SteadyOutcome {
    pub solved: GridPdf,
    pub report: FixedPointReport,
    pub l1_gamma_vs_solved: f64,
}

fn fixed_point_settings(settings: &Settings) -> CliResult<(f64, usize)> {
    Ok((
        settings.positive_tol(DEFAULT_TOL)?,
        settings.max_iter.unwrap_or(DEFAULT_MAX_ITER),
    ))
}

/// Loads a Monte Carlo pdf CSV and resamples it onto `grid`.
fn load_mc(path: &PathBuf, model: &ModelParams, grid: Arc<WealthGrid>) -> CliResult<GridPdf> {
    let file =
        File::open(path).map_err(|e| CliError::Config(format!("mc-hist: cannot open {}: {e}", path.display())))?;
    let mc = read_pdf(BufReader::new(file)).map_err(|e| CliError::Config(format!("mc-hist: {e}")))?;
    if mc.model != *model {
        return Err(CliError::Config(format!(
            "mc-hist: file holds {} but the run is {}",
            mc.model, model
        )));
    }
    let resampled = GridPdf::from_fn(grid, model.mean_wealth(), |u| mc.pdf.interpolate(u).unwrap_or(0.0))?;
    Ok(resampled.normalize()?)
}

fn steady_into(run: &mut RunDir, settings: &Settings, model: ModelParams) -> CliResult<SteadyOutcome> {
    let (tol, max_iter) = fixed_point_settings(settings)?;
    let grid = Arc::new(settings.grid_for(&model)?);
    let seed = default_seed(&model, grid.clone())?;
    let mc = settings
        .mc_hist
        .as_ref()
        .map(|p| load_mc(p, &model, grid.clone()))
        .transpose()?;
    let (solved, report) = solve_steady(&model, &seed, max_iter, tol)?;
    if !report.converged {
        eprintln!(
            "warning: {model}: no convergence after {} iterations (residual {:e} > {tol:e})",
            report.iterations, report.final_sup_residual
        );
    }
    let l1_gamma_vs_solved = distance(&seed, &solved)?.l1;

    let mut seed_record = record(model, seed.clone());
    seed_record.extra.push(("role".into(), "seed".into()));
    run.write("seed.csv", &pdf_bytes(&seed_record)?)?;
    let mut solved_record = record(model, solved.clone());
    solved_record.iterations = Some(report.iterations);
    solved_record.residual = Some(report.final_sup_residual);
    solved_record
        .extra
        .push(("converged".into(), report.converged.to_string()));
    run.write("steady.csv", &pdf_bytes(&solved_record)?)?;

    let mut table = String::from(if mc.is_some() {
        "u,f_gamma,f_solved,f_mc\n"
    } else {
        "u,f_gamma,f_solved\n"
    });
    for (i, u) in grid.nodes().iter().enumerate() {
        let _ = write!(
            table,
            "{},{},{}",
            num(*u),
            num(seed.values()[i]),
            num(solved.values()[i])
        );
        if let Some(mc) = &mc {
            let _ = write!(table, ",{}", num(mc.values()[i]));
        }
        table.push('\n');
    }
    run.write("comparison.csv", table.as_bytes())?;

    let residuals: Vec<String> = report.residuals.iter().map(|r| num(*r)).collect();
    let mut pairs = vec![
        ("iterations", report.iterations.to_string()),
        ("final_sup_residual", num(report.final_sup_residual)),
        ("converged", report.converged.to_string()),
        ("damped", report.damped.to_string()),
        ("tol", num(tol)),
        ("residuals", residuals.join(",")),
        ("l1_gamma_vs_solved", num(l1_gamma_vs_solved)),
    ];
    if let Some(mc) = &mc {
        pairs.push(("l1_solved_vs_mc", num(distance(&solved, mc)?.l1)));
        pairs.push(("l1_gamma_vs_mc", num(distance(&seed, mc)?.l1)));
    }
    run.write("report.txt", key_values(&pairs).as_bytes())?;
    Ok(SteadyOutcome {
        solved,
        report,
        l1_gamma_vs_solved,
    })
}

pub fn steady(settings: &Settings) -> CliResult<PathBuf> {
    let model = settings.model()?;
    let mut run = RunDir::create(settings.out_dir("kinex-steady"))?;
    steady_into(&mut run, settings, model)?;
    run.finish("steady", &settings.echo())
}

fn relaxation_options(settings: &Settings, n_agents: usize) -> CliResult<RelaxationOptions> {
    let n = n_agents as f64;
    let dt = settings.dt.unwrap_or(0.1 * n);
    if !(dt > 0.0 && dt <= 0.25 * n) {
        return Err(CliError::Config(format!(
            "dt: {dt} violates the stability bound 0 < dt <= N/4 = {}",
            0.25 * n
        )));
    }
    Ok(RelaxationOptions {
        step_fraction: dt / n,
        ..RelaxationOptions::default()
    })
}

fn evolve_into(run: &mut RunDir, settings: &Settings, model: ModelParams, f_eq: &GridPdf) -> CliResult<RelaxationFit> {
    let n_agents = settings.agents.unwrap_or(DEFAULT_EVOLVE_AGENTS);
    if n_agents < 2 {
        return Err(CliError::Config(format!("agents: need at least 2, got {n_agents}")));
    }
    let options = relaxation_options(settings, n_agents)?;
    let f0 = oscillatory_perturbation(
        f_eq,
        PERTURBATION_AMPLITUDE,
        PERTURBATION_PERIOD * model.mean_wealth(),
        PERTURBATION_MOMENTS,
    )?;
    let fit = relaxation_time_with(&model, &f0, f_eq, n_agents, options)?;

    let mut series = String::from("t,l1_distance\n");
    for (t, d) in &fit.samples {
        let _ = writeln!(series, "{},{}", num(*t), num(*d));
    }
    run.write("relaxation.csv", series.as_bytes())?;
    let mut initial = record(model, f0);
    initial.extra.push(("role".into(), "initial".into()));
    run.write("initial.csv", &pdf_bytes(&initial)?)?;
    let summary = key_values(&[
        ("agents", n_agents.to_string()),
        ("dt", num(options.step_fraction * n_agents as f64)),
        ("tau", num(fit.tau)),
        ("tau_over_n", num(fit.tau_over_n)),
        ("rms_residual", num(fit.rms_residual)),
        ("window_start", num(fit.window.0)),
        ("window_end", num(fit.window.1)),
        ("samples", fit.samples.len().to_string()),
    ]);
    run.write("fit.txt", summary.as_bytes())?;
    Ok(fit)
}

pub fn evolve(settings: &Settings) -> CliResult<PathBuf> {
    let model = settings.model()?;
    // validate the step before the fixed point is solved
    relaxation_options(settings, settings.agents.unwrap_or(DEFAULT_EVOLVE_AGENTS).max(2))?;
    let mut run = RunDir::create(settings.out_dir("kinex-evolve"))?;
    let steady = steady_into(&mut run, settings, model)?;
    evolve_into(&mut run, settings, model, &steady.solved)?;
    run.finish("evolve", &settings.echo())
}

pub fn residual(settings: &Settings) -> CliResult<PathBuf> {
    if settings.model_name()? != ModelName::Angle {
        return Err(CliError::Config(
            "model: the Gamma residual is defined for the angle model only".into(),
        ));
    }
    let models = settings.models()?;
    let mean = settings.mean_wealth();
    let (lo, hi) = RESIDUAL_RANGE;
    let count = ((hi - lo) / RESIDUAL_STEP).round() as usize + 1;
    let points: Vec<f64> = (0..count).map(|k| (lo + k as f64 * RESIDUAL_STEP) * mean).collect();

    let mut curves = Vec::with_capacity(models.len());
    for model in &models {
        let curve = points
            .iter()
            .map(|&u| gamma_residual(u, model))
            .collect::<Result<Vec<_>, _>>()?;
        curves.push(curve);
    }
    let omegas: Vec<f64> = models.iter().filter_map(|m| m.parameter().map(|p| p.1)).collect();

    let mut run = RunDir::create(settings.out_dir("kinex-residual"))?;
    let mut table = String::from("u");
    for omega in &omegas {
        let _ = write!(table, ",omega={omega}");
    }
    table.push('\n');
    for (i, u) in points.iter().enumerate() {
        table.push_str(&num(*u));
        for curve in &curves {
            let _ = write!(table, ",{}", num(curve[i]));
        }
        table.push('\n');
    }
    run.write("residual.csv", table.as_bytes())?;
    let mut summary = String::new();
    for ((omega, curve), model) in omegas.iter().zip(&curves).zip(&models) {
        let shape = gamma_shape(model)?;
        let max = curve.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let _ = writeln!(summary, "max_abs_residual.omega_{omega}={}", num(max));
        let _ = writeln!(summary, "gamma_shape.omega_{omega}={}", num(shape));
    }
    run.write("summary.txt", summary.as_bytes())?;
    run.finish("residual", &settings.echo())
}

struct PointResult {
    label: String,
    outcome: CliResult<(f64, f64, f64)>,
}

fn point_label(model: &ModelParams) -> String {
    match model.parameter() {
        Some((name, value)) => format!("{}-{name}-{value}", model.kind().name()),
        None => model.kind().name().to_string(),
    }
}

fn sweep_point(settings: &Settings, root: &std::path::Path, model: ModelParams) -> PointResult {
    let label = point_label(&model);
    let outcome = (|| {
        let mut run = RunDir::create(root.join(&label))?;
        let steady = steady_into(&mut run, settings, model)?;
        let fit = evolve_into(&mut run, settings, model, &steady.solved)?;
        let mut echo = settings.echo();
        if let Some((name, value)) = model.parameter() {
            echo.retain(|(k, _)| k != name);
            echo.push((name.to_string(), value.to_string()));
        }
        run.finish("sweep-point", &echo)?;
        Ok((
            steady.l1_gamma_vs_solved,
            steady.report.final_sup_residual,
            fit.tau_over_n,
        ))
    })();
    PointResult { label, outcome }
}

/// Runs `steady` and `evolve` for every listed parameter value. Completed
/// points are kept when others fail; the index records which failed.
pub fn sweep(settings: &Settings) -> CliResult<PathBuf> {
    let models = settings.models()?;
    fixed_point_settings(settings)?;
    relaxation_options(settings, settings.agents.unwrap_or(DEFAULT_EVOLVE_AGENTS).max(2))?;
    let mut run = RunDir::create(settings.out_dir("kinex-sweep"))?;
    let root = run.path().to_path_buf();
    let results: Vec<PointResult> = models.par_iter().map(|m| sweep_point(settings, &root, *m)).collect();

    let mut index = String::from("point,status,l1_gamma_vs_solved,residual_sup,tau_over_n,error\n");
    let mut failed = 0;
    for result in &results {
        match &result.outcome {
            Ok((l1, residual, tau)) => {
                let _ = writeln!(
                    index,
                    "{},ok,{},{},{},",
                    result.label,
                    num(*l1),
                    num(*residual),
                    num(*tau)
                );
            }
            Err(e) => {
                failed += 1;
                let message = e.to_string().replace([',', '\n'], ";");
                let _ = writeln!(index, "{},failed,,,,{message}", result.label);
            }
        }
    }
    run.write("index.csv", index.as_bytes())?;
    let path = run.finish("sweep", &settings.echo())?;
    if failed > 0 {
        return Err(CliError::PartialSweep {
            failed,
            total: results.len(),
        });
    }
    Ok(path)
}
