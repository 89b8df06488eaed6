//! Command-line front end: `run`, `study` and `spectrum`.
//!
//! Exit codes: 0 when the estimate converged, 1 when a non-converged
//! estimate was produced, 2 for usage, configuration or runtime errors.

mod config;
mod output;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

pub use config::{Method, Problem, ProblemSpec, RunConfig};
pub use output::{fmt_float, result_json, study_row, study_summary, STUDY_HEADER};

use crate::error::{Error, Result};
use crate::estimators::{run_ce, run_ice, run_icered, run_icered_traced, run_mc, EstimationResult};
use crate::seeded_rng;

#[derive(Debug, Parser)]
#[command(name = "icered", version, about = "Rare-event probability estimation by cross-entropy importance sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one estimation and write its result as JSON.
    Run(CommonArgs),
    /// Repeat the estimation with consecutive seeds and write a CSV table.
    Study(CommonArgs),
    /// Run iCEred and write the eigenvalues of every level as CSV.
    Spectrum(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
}

/// Parses `args` (including the program name) and executes the command.
/// Returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => load(&a).and_then(|c| cmd_run(&c)),
        Command::Study(a) => load(&a).and_then(|c| cmd_study(&c)),
        Command::Spectrum(a) => load(&a).and_then(|c| cmd_spectrum(&c)),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn load(args: &CommonArgs) -> Result<RunConfig> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        cfg.solver.seed = seed;
    }
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(r) = args.runs {
        cfg.runs = r;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the configured method once with `seed`.
pub fn estimate(cfg: &RunConfig, problem: &Problem, seed: u64) -> Result<EstimationResult> {
    let lsf = problem.as_limit_state();
    let mut solver = cfg.solver.clone();
    solver.seed = seed;
    let mut rng = seeded_rng(seed);
    match cfg.method {
        Method::Mc => run_mc(lsf, cfg.mc_samples.unwrap_or(solver.n_per_level), &mut rng),
        Method::Ce => run_ce(lsf, &solver, &mut rng),
        Method::Ice => run_ice(lsf, &solver, &mut rng),
        Method::Icered => run_icered(lsf, &solver, &mut rng),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidConfig(format!("cannot write output: {e}"));
    match path {
        Some(p) => fs::write(p, text).map_err(io),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io),
    }
}

fn csv_text(rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn cmd_run(cfg: &RunConfig) -> Result<bool> {
    let problem = cfg.problem.build()?;
    let seed = cfg.solver.seed;
    let result = estimate(cfg, &problem, seed)?;
    let reference = problem.as_limit_state().reference_probability();
    eprintln!(
        "p_hat = {}  cv_hat = {}  lsf_calls = {}  grad_calls = {}",
        fmt_float(result.p_hat),
        fmt_float(result.cv_hat),
        result.lsf_calls,
        result.grad_calls
    );
    write_output(cfg.output.as_deref(), &result_json(&result, cfg.method.name(), seed, reference))?;
    Ok(result.converged)
}

fn cmd_study(cfg: &RunConfig) -> Result<bool> {
    let problem = cfg.problem.build()?;
    let base = cfg.solver.seed;
    let results: Vec<EstimationResult> = (0..cfg.runs)
        .into_par_iter()
        .map(|i| {
            let seed = base.wrapping_add(i as u64);
            estimate(cfg, &problem, seed).unwrap_or_else(|e| EstimationResult {
                p_hat: f64::NAN,
                cv_hat: f64::NAN,
                n_levels: 0,
                lsf_calls: 0,
                grad_calls: 0,
                converged: false,
                per_level: Vec::new(),
                cv_before_refine: None,
                note: Some(e.to_string()),
            })
        })
        .collect();
    let mut rows = vec![STUDY_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for (i, r) in results.iter().enumerate() {
        rows.push(study_row(i, base.wrapping_add(i as u64), r));
    }
    rows.push(study_summary(&results));
    write_output(cfg.output.as_deref(), &csv_text(&rows)?)?;
    Ok(results.iter().all(|r| r.converged))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}{ext}"))
}

fn cmd_spectrum(cfg: &RunConfig) -> Result<bool> {
    if cfg.method != Method::Icered {
        return Err(Error::InvalidConfig("spectrum requires method icered".into()));
    }
    let problem = cfg.problem.build()?;
    let mut rng = seeded_rng(cfg.solver.seed);
    let trace = run_icered_traced(problem.as_limit_state(), &cfg.solver, &mut rng)?;

    let mut rows =
        vec![["level", "index", "eigenvalue", "rank", "eps"].iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for level_spectrum in &trace.spectra {
        for (i, v) in level_spectrum.eigvals.iter().enumerate() {
            rows.push(vec![
                level_spectrum.level.to_string(),
                i.to_string(),
                fmt_float(*v),
                level_spectrum.rank.to_string(),
                fmt_float(cfg.solver.eps),
            ]);
        }
    }
    write_output(cfg.output.as_deref(), &csv_text(&rows)?)?;

    if let Some(out) = cfg.output.as_deref() {
        if let Some(basis) = &trace.final_basis {
            let modes = basis.dim().min(2);
            let mut header = vec!["index".to_string()];
            header.extend((1..=modes).map(|m| format!("v{m}")));
            let mut vrows = vec![header];
            for i in 0..basis.dim() {
                let mut row = vec![i.to_string()];
                row.extend((0..modes).map(|m| fmt_float(basis.vectors()[(i, m)])));
                vrows.push(row);
            }
            fs::write(sibling(out, "eigvecs"), csv_text(&vrows)?)
                .map_err(|e| Error::InvalidConfig(format!("cannot write eigenvectors: {e}")))?;
        }
        if let Problem::Bar(bar) = &problem {
            let kl = &bar.field.kl;
            let mut krows = vec![vec!["index".to_string(), "eigenvalue".into(), "captured_variance_ratio".into()]];
            for (k, a) in kl.eigvals.iter().enumerate() {
                krows.push(vec![k.to_string(), fmt_float(*a), fmt_float(kl.captured_variance_ratio(k + 1))]);
            }
            fs::write(sibling(out, "kl"), csv_text(&krows)?)
                .map_err(|e| Error::InvalidConfig(format!("cannot write KL spectrum: {e}")))?;
        }
    }
    let r = &trace.result;
    let ranks: Vec<String> = trace.spectra.iter().map(|s| s.rank.to_string()).collect();
    eprintln!("p_hat = {}  ranks per level = [{}]", fmt_float(r.p_hat), ranks.join(", "));
    Ok(r.converged)
}
