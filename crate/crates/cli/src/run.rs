use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono_tz::Tz;
use daynmf::analysis::{
    component_summaries, reconstruction_report, weight_activations, ComponentSummary, MINUTES_PER_DAY,
};
use daynmf::ingest::{dedupe, parse_csv, IngestReport, RejectedRow};
use daynmf::io::{component_header, day_header, fmt_f64, read_data_matrix, read_matrix_csv, write_data_matrix, write_matrix_csv, write_series_csv};
use daynmf::rank::{sweep, FitMeta};
use daynmf::resample::{embed_days, interpolate, DroppedDay};
use daynmf::synth::{generate, Scenario};
use daynmf::{DataMatrix, DayPolicy, Factorization, GapPolicy, IngestOptions, NmfConfig, RawSeries};
use serde::{Deserialize, Serialize};

use crate::args::{AnalyzeCmd, FitCmd, GridArgs, IngestArgs, IngestCmd, Job, SourceArgs, SweepCmd, SynthArgs};
use crate::error::{CliError, Result};
use crate::output::{read_json, write_atomic, write_json, SCHEMA};
use crate::plots;

pub const MANIFEST: &str = "run_manifest.json";
pub const BUILTIN_SCENARIO: &str = "norlin-like";

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub job: Job,
}

#[derive(Deserialize)]
struct StoredManifest {
    schema: u32,
    #[serde(flatten)]
    manifest: Manifest,
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let stored: StoredManifest = read_json(path)?;
    if stored.schema != SCHEMA {
        return Err(CliError::validation(format!(
            "manifest schema {} is not supported (expected {SCHEMA})",
            stored.schema
        ))
        .at(path));
    }
    let m = stored.manifest;
    if m.version != env!("CARGO_PKG_VERSION") {
        log::warn!(
            "manifest was written by version {}, this is {}",
            m.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    Ok(m)
}

fn absolute(path: &Path) -> Result<PathBuf> {
    fs::canonicalize(path).map_err(|e| CliError::input(path, e))
}

fn absolute_input(input: &mut String) -> Result<()> {
    if input != "-" {
        *input = absolute(Path::new(input))?.to_string_lossy().into_owned();
    }
    Ok(())
}

impl Job {
    /// Rewrites input paths as absolute ones so the manifest replays from
    /// any working directory. Fails on inputs that do not exist.
    pub fn resolve_paths(&mut self) -> Result<()> {
        match self {
            Job::Synth(a) => {
                if a.scenario != BUILTIN_SCENARIO {
                    a.scenario = absolute(Path::new(&a.scenario))?.to_string_lossy().into_owned();
                }
            }
            Job::Ingest(c) => absolute_input(&mut c.input)?,
            Job::Fit(FitCmd { source, .. }) | Job::Sweep(SweepCmd { source, .. }) => {
                if let Some(m) = &source.matrix {
                    source.matrix = Some(absolute(m)?);
                } else if let Some(input) = source.input.as_mut() {
                    absolute_input(input)?;
                }
            }
            Job::Analyze(c) => {
                c.factorization = absolute(&c.factorization)?;
                if let Some(m) = &c.matrix {
                    c.matrix = Some(absolute(m)?);
                }
            }
        }
        Ok(())
    }

    /// Points the job's raw input somewhere else.
    pub fn replace_input(&mut self, input: String) -> Result<()> {
        match self {
            Job::Ingest(c) => c.input = input,
            Job::Fit(FitCmd { source, .. }) | Job::Sweep(SweepCmd { source, .. }) if source.matrix.is_none() => {
                source.input = Some(input)
            }
            _ => return Err(CliError::validation("--input only applies to jobs that read a raw series")),
        }
        Ok(())
    }

    /// Checks settings that do not depend on the data, before any input is read.
    fn precheck(&self) -> Result<()> {
        match self {
            Job::Fit(c) => c.nmf.config().validate_params()?,
            Job::Sweep(c) => {
                if c.kmin < 1 || c.kmin > c.kmax {
                    return Err(CliError::validation(format!(
                        "sweep range {}..={} invalid: need 1 <= kmin <= kmax < min(n, m)",
                        c.kmin, c.kmax
                    )));
                }
                NmfConfig { k: c.kmin, ..c.nmf.config() }.validate_params()?;
            }
            _ => {}
        }
        Ok(())
    }
}

/// Runs `job` into `out_dir` and records its manifest there.
pub fn execute(job: &Job, out_dir: &Path) -> Result<()> {
    job.precheck()?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::output(out_dir, e))?;
    match job {
        Job::Synth(a) => synth(a, out_dir)?,
        Job::Ingest(c) => ingest(c, out_dir)?,
        Job::Fit(c) => fit(c, out_dir)?,
        Job::Sweep(c) => run_sweep(c, out_dir)?,
        Job::Analyze(c) => analyze(c, out_dir)?,
    }
    let manifest = Manifest {
        tool: "nmf".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        job: job.clone(),
    };
    write_json(&out_dir.join(MANIFEST), &manifest)
}

fn synth(args: &SynthArgs, out_dir: &Path) -> Result<()> {
    let scenario = if args.scenario == BUILTIN_SCENARIO {
        Scenario::norlin_like()
    } else {
        read_json::<Scenario>(Path::new(&args.scenario))?
    };
    let series = generate(&scenario, args.seed)?;
    if let Some(path) = &args.emit_scenario {
        write_json(path, &scenario)?;
    }
    match args.out.as_deref() {
        Some("-") => {
            let stdout = std::io::stdout();
            let mut lock = std::io::BufWriter::new(stdout.lock());
            let stdout_err = |e: &dyn std::fmt::Display| CliError::io(format!("cannot write to stdout: {e}"));
            write_series_csv(&mut lock, &series).map_err(|e| stdout_err(&e))?;
            lock.flush().map_err(|e| stdout_err(&e))?;
        }
        Some(path) => write_series(Path::new(path), &series)?,
        None => write_series(&out_dir.join("synth.csv"), &series)?,
    }
    log::info!("generated {} samples over {} days", series.len(), scenario.n_days);
    Ok(())
}

fn write_series(path: &Path, series: &RawSeries) -> Result<()> {
    write_atomic(path, |w| Ok(write_series_csv(w, series)?))
}

struct Loaded {
    series: Option<RawSeries>,
    report: Option<IngestReport>,
    dropped: Option<Vec<DroppedDay>>,
    matrix: DataMatrix,
}

fn read_input(input: &str) -> Result<Vec<u8>> {
    if input == "-" {
        let mut buf = Vec::new();
        std::io::stdin()
            .read_to_end(&mut buf)
            .map_err(|e| CliError::validation(format!("cannot read stdin: {e}")))?;
        Ok(buf)
    } else {
        let path = Path::new(input);
        fs::read(path).map_err(|e| CliError::input(path, e))
    }
}

fn ingest_options(args: &IngestArgs) -> Result<IngestOptions> {
    let timezone: Tz = args
        .timezone
        .parse()
        .map_err(|_| CliError::validation(format!("unknown IANA timezone {:?}", args.timezone)))?;
    Ok(IngestOptions {
        site_id: args.site_id.clone(),
        timestamp_column: args.timestamp_column.clone(),
        count_column: args.count_column.clone(),
        timezone,
        assume_utc: args.assume_utc,
        zeros_as_gaps: args.zeros_as_gaps,
    })
}

fn load_raw(input: &str, ingest: &IngestArgs, grid: &GridArgs) -> Result<Loaded> {
    let options = ingest_options(ingest)?;
    if grid.step_minutes == 0 {
        return Err(CliError::validation("step_minutes must be positive"));
    }
    if let Some(g) = grid.max_gap_minutes.filter(|g| *g <= 0) {
        return Err(CliError::validation(format!("max_gap_minutes must be positive, got {g}")));
    }
    if !(0.0..=1.0).contains(&grid.min_coverage) {
        return Err(CliError::validation(format!(
            "min_coverage must lie in [0, 1], got {}",
            grid.min_coverage
        )));
    }
    let bytes = read_input(input)?;
    let (series, report) = parse_csv(bytes.as_slice(), &options).map_err(|e| tag_input(e.into(), input))?;
    if !report.rejected.is_empty() {
        log::warn!("{} of {} rows rejected", report.rejected.len(), report.rows_read);
    }
    let series = dedupe(series, ingest.dedupe);
    let gaps = GapPolicy {
        max_gap_secs: grid.max_gap_minutes.map(|m| m * 60),
    };
    let grid_series = interpolate(&series, grid.step_minutes * 60, &gaps)?;
    let (matrix, dropped) = embed_days(
        &grid_series,
        &DayPolicy {
            min_coverage: grid.min_coverage,
        },
    )?;
    Ok(Loaded {
        series: Some(series),
        report: Some(report),
        dropped: Some(dropped),
        matrix,
    })
}

fn tag_input(err: CliError, input: &str) -> CliError {
    if input == "-" {
        err
    } else {
        err.at(Path::new(input))
    }
}

fn load_matrix(path: &Path) -> Result<DataMatrix> {
    let file = fs::File::open(path).map_err(|e| CliError::input(path, e))?;
    read_data_matrix(file).map_err(|e| CliError::from(e).at(path))
}

fn load_source(src: &SourceArgs) -> Result<Loaded> {
    match &src.matrix {
        Some(path) => Ok(Loaded {
            series: None,
            report: None,
            dropped: None,
            matrix: load_matrix(path)?,
        }),
        None => load_raw(src.input.as_deref().unwrap_or("-"), &src.ingest, &src.grid),
    }
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    rows_read: usize,
    rows_accepted: usize,
    rows_rejected: usize,
    rejected: &'a [RejectedRow],
}

#[derive(Serialize)]
struct DroppedDays<'a> {
    dropped: &'a [DroppedDay],
}

fn write_loaded(out_dir: &Path, loaded: &Loaded) -> Result<()> {
    let path = out_dir.join("matrix.csv");
    write_atomic(&path, |w| Ok(write_data_matrix(w, &loaded.matrix)?))?;
    if let Some(dropped) = &loaded.dropped {
        write_json(&out_dir.join("dropped_days.json"), &DroppedDays { dropped })?;
    }
    if let Some(r) = &loaded.report {
        write_json(
            &out_dir.join("ingest_report.json"),
            &IngestSummary {
                rows_read: r.rows_read,
                rows_accepted: r.rows_accepted,
                rows_rejected: r.rejected.len(),
                rejected: &r.rejected,
            },
        )?;
    }
    Ok(())
}

fn data_plots(out_dir: &Path, loaded: &Loaded) -> Result<()> {
    if let Some(series) = &loaded.series {
        plots::raw_series(&out_dir.join("raw_series.svg"), series)?;
    }
    plots::daily_overlay(&out_dir.join("daily_overlay.svg"), &loaded.matrix)
}

fn ingest(cmd: &IngestCmd, out_dir: &Path) -> Result<()> {
    let loaded = load_raw(&cmd.input, &cmd.ingest, &cmd.grid)?;
    write_loaded(out_dir, &loaded)?;
    if cmd.plots {
        data_plots(out_dir, &loaded)?;
    }
    eprintln!(
        "matrix: {} slots x {} days ({} dropped)",
        loaded.matrix.n(),
        loaded.matrix.m(),
        loaded.dropped.as_ref().map_or(0, Vec::len)
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitRecord {
    pub config: NmfConfig,
    pub n: usize,
    pub m: usize,
    pub step_minutes: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub global_mse: f64,
    pub objective_trace: Vec<f64>,
}

/// Minutes per grid slot for a matrix with `n` slots per day.
fn step_minutes(n: usize) -> f64 {
    MINUTES_PER_DAY / n as f64
}

fn fit(cmd: &FitCmd, out_dir: &Path) -> Result<()> {
    let loaded = load_source(&cmd.source)?;
    let x = &loaded.matrix.x;
    let config = cmd.nmf.config();
    config.validate(loaded.matrix.n(), loaded.matrix.m())?;
    write_loaded(out_dir, &loaded)?;

    let fact = daynmf::fit(x, &config)?;
    let days = day_header(&loaded.matrix.day_labels);
    let components = component_header(fact.k());
    write_csv_matrix(&out_dir.join("W.csv"), &components, &fact.w)?;
    write_csv_matrix(&out_dir.join("H.csv"), &days, &fact.h)?;

    let report = analyze_into(out_dir, &loaded.matrix, &fact, cmd.active_fraction, cmd.plots)?;
    let record = FitRecord {
        config,
        n: loaded.matrix.n(),
        m: loaded.matrix.m(),
        step_minutes: step_minutes(loaded.matrix.n()),
        iterations: fact.iterations,
        converged: fact.converged,
        final_objective: fact.final_objective(),
        global_mse: report,
        objective_trace: fact.objective_trace.clone(),
    };
    write_json(&out_dir.join("fit.json"), &record)?;
    if cmd.plots {
        data_plots(out_dir, &loaded)?;
    }
    if !fact.converged {
        log::warn!("no convergence within {} iterations", fact.iterations);
    }
    eprintln!(
        "k = {}: {} iterations, converged = {}, mse = {}",
        fact.k(),
        fact.iterations,
        fact.converged,
        report
    );
    Ok(())
}

fn write_csv_matrix(path: &Path, header: &[String], m: &ndarray::Array2<f64>) -> Result<()> {
    write_atomic(path, |w| Ok(write_matrix_csv(w, header, m)?))
}

#[derive(Serialize)]
struct Components<'a> {
    step_minutes: f64,
    minutes_per_day: f64,
    active_fraction: f64,
    components: &'a [ComponentSummary],
}

/// Writes H_weighted.csv, components.json and residuals.csv; returns the global MSE.
fn analyze_into(out_dir: &Path, data: &DataMatrix, fact: &Factorization, active_fraction: f64, plots: bool) -> Result<f64> {
    if !(0.0..=1.0).contains(&active_fraction) {
        return Err(CliError::validation(format!(
            "active_fraction must lie in [0, 1], got {active_fraction}"
        )));
    }
    let step = step_minutes(data.n());
    let weighted = weight_activations(fact, step)?;
    let days = day_header(&data.day_labels);
    write_csv_matrix(&out_dir.join("H_weighted.csv"), &days, &weighted.hw)?;

    let summaries = component_summaries(fact, &weighted, active_fraction, MINUTES_PER_DAY);
    write_json(
        &out_dir.join("components.json"),
        &Components {
            step_minutes: step,
            minutes_per_day: MINUTES_PER_DAY,
            active_fraction,
            components: &summaries,
        },
    )?;

    let report = reconstruction_report(&data.x, fact)?;
    let path = out_dir.join("residuals.csv");
    write_atomic(&path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["day", "residual_l2", "relative_error", "rank"])?;
        for (d, label) in report.days.iter().zip(&days) {
            wtr.write_record([
                label.clone(),
                fmt_f64(d.residual_l2),
                d.relative_error.map(fmt_f64).unwrap_or_default(),
                d.rank.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    })?;

    if plots {
        plots::components(&out_dir.join("components.svg"), fact)?;
        plots::weighted_activations(&out_dir.join("weighted_activations.svg"), &weighted.hw, &data.day_labels)?;
    }
    Ok(report.global_mse)
}

#[derive(Serialize)]
struct SweepRecord<'a> {
    config: &'a NmfConfig,
    kmin: usize,
    kmax: usize,
    ks: &'a [usize],
    mse: &'a [Option<f64>],
    relative_error: &'a [Option<f64>],
    suggested_k: Option<usize>,
    suggestion_is_advisory: bool,
    per_k_fit_meta: &'a [FitMeta],
}

fn run_sweep(cmd: &SweepCmd, out_dir: &Path) -> Result<()> {
    let loaded = load_source(&cmd.source)?;
    let config = NmfConfig { k: cmd.kmin, ..cmd.nmf.config() };
    let result = sweep(&loaded.matrix.x, cmd.kmin, cmd.kmax, &config)?;
    write_loaded(out_dir, &loaded)?;

    let path = out_dir.join("sweep.csv");
    write_atomic(&path, |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["k", "mse", "relative_error", "iterations", "converged"])?;
        for (i, k) in result.ks.iter().enumerate() {
            let meta = &result.per_k_fit_meta[i];
            wtr.write_record([
                k.to_string(),
                result.mse[i].map(fmt_f64).unwrap_or_default(),
                result.relative_error[i].map(fmt_f64).unwrap_or_default(),
                meta.iterations.to_string(),
                meta.converged.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    write_json(
        &out_dir.join("sweep.json"),
        &SweepRecord {
            config: &config,
            kmin: cmd.kmin,
            kmax: cmd.kmax,
            ks: &result.ks,
            mse: &result.mse,
            relative_error: &result.relative_error,
            suggested_k: result.suggested_k,
            suggestion_is_advisory: true,
            per_k_fit_meta: &result.per_k_fit_meta,
        },
    )?;
    if cmd.plots {
        plots::mse_vs_k(&out_dir.join("mse_vs_k.svg"), &result)?;
    }

    let mut out = String::from("k\tmse\trelative_error\titerations\tconverged\n");
    for (i, k) in result.ks.iter().enumerate() {
        let meta = &result.per_k_fit_meta[i];
        let show = |v: Option<f64>| v.map_or("failed".to_string(), |v| format!("{v:.6e}"));
        out.push_str(&format!(
            "{k}\t{}\t{}\t{}\t{}\n",
            show(result.mse[i]),
            show(result.relative_error[i]),
            meta.iterations,
            meta.converged
        ));
    }
    match result.suggested_k {
        Some(k) => out.push_str(&format!(
            "suggested_k = {k} (advisory: elbow heuristic, confirm on the MSE curve before choosing k)\n"
        )),
        None => out.push_str("suggested_k = none (advisory: no clear elbow in this range)\n"),
    }
    print!("{out}");
    Ok(())
}

fn analyze(cmd: &AnalyzeCmd, out_dir: &Path) -> Result<()> {
    let dir = &cmd.factorization;
    let record: FitRecord = read_json(&dir.join("fit.json"))?;
    let matrix_path = cmd.matrix.clone().unwrap_or_else(|| dir.join("matrix.csv"));
    let data = load_matrix(&matrix_path)?;
    let w = read_factor(&dir.join("W.csv"))?;
    let h = read_factor(&dir.join("H.csv"))?;
    let (n, m) = data.x.dim();
    if w.nrows() != n || h.ncols() != m || w.ncols() != h.nrows() {
        return Err(CliError::validation(format!(
            "factor shapes {:?} and {:?} do not match a {n} x {m} matrix",
            w.dim(),
            h.dim()
        ))
        .at(dir));
    }
    let fact = Factorization {
        w,
        h,
        objective_trace: record.objective_trace,
        iterations: record.iterations,
        converged: record.converged,
    };
    let mse = analyze_into(out_dir, &data, &fact, cmd.active_fraction, cmd.plots)?;
    eprintln!("k = {}: mse = {mse}", fact.k());
    Ok(())
}

fn read_factor(path: &Path) -> Result<ndarray::Array2<f64>> {
    let file = fs::File::open(path).map_err(|e| CliError::input(path, e))?;
    let (_, m) = read_matrix_csv(file).map_err(|e| CliError::from(e).at(path))?;
    if m.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(CliError::validation("factor entries must be finite and non-negative").at(path));
    }
    Ok(m)
}
