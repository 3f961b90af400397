//! Implementation of the `ocpph` command line: argument surface, command
//! dispatch, and the exit-code contract.
//!
//! Exit codes: 0 success, 2 input error, 3 fit did not converge (the
//! best-so-far model is still written), 4 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ocpph::fit::{
    bootstrap_ci_cutpoint, fit_ocp_erlang, fit_ph_erlang, select_phases, select_phases_ph, CiFlag,
    FitConfig, FitResult, FittedModel,
};
use ocpph::gof::ad_pvalue_bootstrap;
use ocpph::io::{read_samples, CurvesTable, Model, ModelFile, ModelKind};
use ocpph::{Dataset, Error};

const EXIT_INPUT: u8 = 2;
const EXIT_NON_CONVERGENCE: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(
    name = "ocpph",
    version,
    about = "One cut-point phase-type distributions: fitting, evaluation, sampling, goodness of fit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Fit a model to sample data by maximum likelihood.
    Fit {
        /// Sample file: one nonnegative decimal per line, '#' comments.
        #[arg(long)]
        data: PathBuf,
        /// Model family: ph-erlang or ocp-erlang.
        #[arg(long, default_value = "ocp-erlang")]
        kind: String,
        /// Phase count, or "auto" to search by likelihood.
        #[arg(long, default_value = "auto")]
        phases: String,
        /// Number of interior-quantile cut-point candidates.
        #[arg(long = "a-grid")]
        a_grid: Option<usize>,
        /// Bootstrap replicates for the cut-point confidence interval
        /// (0 skips the interval).
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Confidence level for the interval.
        #[arg(long)]
        level: Option<f64>,
        /// Master seed for bootstrap replicate streams.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the fitted model file.
        #[arg(long, default_value = "model.ocpph")]
        out: PathBuf,
        /// Omit the timestamp line from the report (for reproducible output).
        #[arg(long = "no-timestamp")]
        no_timestamp: bool,
    },
    /// Evaluate measures of a stored model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Evaluation point for the pointwise measures.
        #[arg(long)]
        x: Option<f64>,
        /// Comma-separated list: pdf, cdf, reliability, hazard, cum-hazard,
        /// mean, sd, second-moment.
        #[arg(long, default_value = "mean,sd")]
        measures: String,
    },
    /// Write a CSV table of model curves (and empirical overlays).
    Curves {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        xmin: Option<f64>,
        #[arg(long)]
        xmax: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Optional sample file; adds ecdf, Nelson-Aalen, kernel density,
        /// and kernel hazard columns.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw samples from a stored model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Anderson-Darling goodness of fit with a bootstrap p-value.
    Gof {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Bootstrap replicates; below 99 only the statistic is reported.
        #[arg(long, default_value_t = 199)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_)
        | Error::InvalidRepresentation(_)
        | Error::Domain(_)
        | Error::Parse { .. }
        | Error::Io(_)
        | Error::DegenerateData(_)
        | Error::DegenerateBandwidth(_)
        | Error::UnfittableData(_) => EXIT_INPUT,
        Error::SingularMatrix(_)
        | Error::TailUnderflow { .. }
        | Error::InvalidStart(_)
        | Error::UnreliableCi { .. }
        | Error::UnreliablePValue { .. }
        | Error::CdfBoundary { .. } => EXIT_NUMERIC,
    }
}

pub fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Fit {
            data,
            kind,
            phases,
            a_grid,
            bootstrap,
            level,
            seed,
            out,
            no_timestamp,
        } => cmd_fit(data, kind, phases, a_grid, bootstrap, level, seed, out, no_timestamp),
        Command::Eval { model, x, measures } => cmd_eval(model, x, measures),
        Command::Curves { model, xmin, xmax, points, data, out } => {
            cmd_curves(model, xmin, xmax, points, data, out)
        }
        Command::Sample { model, count, seed, out } => cmd_sample(model, count, seed, out),
        Command::Gof { model, data, bootstrap, seed } => cmd_gof(model, data, bootstrap, seed),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    data_path: PathBuf,
    kind: String,
    phases: String,
    a_grid: Option<usize>,
    bootstrap: Option<usize>,
    level: Option<f64>,
    seed: u64,
    out: PathBuf,
    no_timestamp: bool,
) -> Result<ExitCode, Error> {
    let data = read_samples(&data_path)?;
    let mut config = FitConfig { seed, ..FitConfig::default() };
    if let Some(g) = a_grid {
        config.cutpoint_grid_size = g;
    }
    if let Some(b) = bootstrap {
        config.bootstrap_reps = b;
    }
    if let Some(l) = level {
        config.confidence_level = l;
    }

    let phase_choice: Option<usize> = match phases.as_str() {
        "auto" => None,
        n => Some(n.parse().map_err(|_| {
            Error::InvalidInput(format!("--phases must be `auto` or a positive integer, got `{n}`"))
        })?),
    };

    let mut fit: FitResult = match (kind.as_str(), phase_choice) {
        ("ocp-erlang", Some(n)) => fit_ocp_erlang(&data, n, &config)?,
        ("ocp-erlang", None) => select_phases(&data, &config)?,
        ("ph-erlang", Some(n)) => fit_ph_erlang(&data, n)?,
        ("ph-erlang", None) => select_phases_ph(&data, &config)?,
        (other, _) => {
            return Err(Error::InvalidInput(format!(
                "--kind must be ph-erlang or ocp-erlang for fitting, got `{other}`"
            )))
        }
    };

    let mut ci_note = String::new();
    if matches!(fit.model, FittedModel::OcpErlang(_)) && config.bootstrap_reps > 0 {
        let ci = bootstrap_ci_cutpoint(&data, &fit, &config)?;
        fit.cutpoint_ci = ci.interval;
        ci_note = match ci.flag {
            CiFlag::Ok => format!(
                " (parametric bootstrap, {} replicates)",
                ci.replicates_used
            ),
            CiFlag::Skipped => " (skipped)".to_string(),
            CiFlag::PointEstimateOutside => format!(
                " (parametric bootstrap, {} replicates; warning: point estimate outside interval)",
                ci.replicates_used
            ),
        };
    }

    let model_file = ModelFile::new(match fit.model {
        FittedModel::PhErlang(spec) => ModelKind::PhErlang(spec),
        FittedModel::OcpErlang(spec) => ModelKind::OcpErlang(spec),
    });
    model_file.write(&out)?;

    if !no_timestamp {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        println!("fitted_at_unix: {now}");
    }
    println!("kind: {}", model_file.model.kind_name());
    println!("observations: {}", data.len());
    match fit.model {
        FittedModel::PhErlang(spec) => {
            println!("phases: {}", spec.phases());
            println!("rate: {}", spec.rate());
        }
        FittedModel::OcpErlang(spec) => {
            println!("cut_point: {}", spec.cut_point());
            println!("phases: {}", spec.phases());
            println!("rate1: {}", spec.rate1());
            println!("rate2: {}", spec.rate2());
        }
    }
    println!("log_likelihood: {}", fit.log_likelihood);
    match fit.cutpoint_ci {
        Some((lo, hi)) => println!(
            "cutpoint_ci: [{lo}; {hi}] at {}%{}",
            100.0 * config.confidence_level,
            ci_note
        ),
        None => println!("cutpoint_ci: none"),
    }
    println!("converged: {}", fit.converged);
    println!("evaluations: {}", fit.evaluations);
    if fit.trace.len() > 1 {
        println!("phase_trace:");
        for (n, ll) in &fit.trace {
            println!("  n={n} loglik={ll}");
        }
    }
    println!("model_written: {}", out.display());

    if fit.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("warning: optimizer did not reach tolerance; best-so-far model written");
        Ok(ExitCode::from(EXIT_NON_CONVERGENCE))
    }
}

fn cmd_eval(model_path: PathBuf, x: Option<f64>, measures: String) -> Result<ExitCode, Error> {
    let model = ModelFile::read(&model_path)?.instantiate()?;
    let names: Vec<&str> = measures.split(',').map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    if names.is_empty() {
        return Err(Error::InvalidInput("--measures list is empty".into()));
    }
    let pointwise = |x: Option<f64>| -> Result<f64, Error> {
        x.ok_or_else(|| Error::InvalidInput("this measure needs --x".into()))
    };
    for name in names {
        match name {
            "pdf" => println!("pdf {}", model.pdf(pointwise(x)?)?),
            "cdf" => println!("cdf {}", model.cdf(pointwise(x)?)?),
            "reliability" => println!("reliability {}", model.reliability(pointwise(x)?)?),
            "hazard" => println!("hazard {}", model.measures_at(pointwise(x)?)?.hazard),
            "cum-hazard" | "cum_hazard" => {
                println!("cum_hazard {}", model.measures_at(pointwise(x)?)?.cum_hazard)
            }
            "mean" => println!("mean {}", model.mean()?),
            "sd" => println!("sd {}", model.sd()?),
            "second-moment" | "second_moment" => {
                println!("second_moment {}", model.second_moment()?)
            }
            other => {
                return Err(Error::InvalidInput(format!("unknown measure `{other}`")));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_curves(
    model_path: PathBuf,
    xmin: Option<f64>,
    xmax: Option<f64>,
    points: Option<usize>,
    data_path: Option<PathBuf>,
    out: PathBuf,
) -> Result<ExitCode, Error> {
    let model: Model = ModelFile::read(&model_path)?.instantiate()?;
    let data = data_path.map(read_samples).transpose()?;
    let xmin = xmin.unwrap_or(0.0);
    let xmax = match xmax {
        Some(v) => v,
        None => model.quantile(0.9999)?,
    };
    let points = points.unwrap_or(512);
    let table = CurvesTable::evaluate(&model, xmin, xmax, points, data.as_ref())?;
    std::fs::write(&out, table.to_csv())?;
    if data.is_some() {
        eprintln!(
            "note: empirical hazard column is an Epanechnikov smoother with one global bandwidth"
        );
    }
    println!("curves_written: {} ({} rows)", out.display(), table.rows.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_sample(model_path: PathBuf, count: usize, seed: u64, out: PathBuf) -> Result<ExitCode, Error> {
    if count == 0 {
        return Err(Error::InvalidInput("--count must be >= 1".into()));
    }
    let model = ModelFile::read(&model_path)?.instantiate()?;
    let data: Dataset = model.sample(count, seed);
    let mut text = String::new();
    for v in data.values() {
        text.push_str(&v.to_string());
        text.push('\n');
    }
    std::fs::write(&out, text)?;
    println!("samples_written: {} ({count} values, seed {seed})", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_gof(model_path: PathBuf, data_path: PathBuf, bootstrap: usize, seed: u64) -> Result<ExitCode, Error> {
    let file = ModelFile::read(&model_path)?;
    let data = read_samples(&data_path)?;
    let fitted = match &file.model {
        ModelKind::PhErlang(spec) => FittedModel::PhErlang(*spec),
        ModelKind::OcpErlang(spec) => FittedModel::OcpErlang(*spec),
        other => {
            return Err(Error::InvalidInput(format!(
                "gof needs a refittable model kind (ph-erlang or ocp-erlang), got {}",
                other.kind_name()
            )))
        }
    };

    if bootstrap < 99 {
        let model = file.instantiate()?;
        let a2 = ocpph::gof::anderson_darling(&data, |x| model.cdf(x))?;
        println!("a_squared: {a2}");
        println!("p_value: none");
        eprintln!("warning: --bootstrap {bootstrap} is below 99; statistic only, no p-value");
        return Ok(ExitCode::SUCCESS);
    }

    let config = FitConfig { bootstrap_reps: bootstrap, seed, ..FitConfig::default() };
    let report = ad_pvalue_bootstrap(&data, &fitted, &config)?;
    println!("a_squared: {}", report.a_squared);
    println!("p_value: {}", report.p_value);
    println!("bootstrap_reps: {}", report.bootstrap_reps);
    println!("note: p-value from parametric bootstrap with per-replicate refit");
    Ok(ExitCode::SUCCESS)
}
