//! `mclink`: command-line front end for the microfluidic molecular-
//! communication link simulator.
//!
//! Subcommands cover the whole experiment surface: a device physics report
//! (`physchem`), a seeded end-to-end frame simulation with full artifact
//! output (`simulate`), equilibrium and transient model fitting
//! (`fit-isotherm`, `fit-kinetics`), receive-side decoding of recorded
//! traces (`detect`), payload comparison (`ber`), and plot-data emission
//! (`plotdata`).
//!
//! The experiment configuration is one TOML file resolved in order from
//! `--config`, the `MCLINK_CONFIG` environment variable, then
//! `configs/reference.toml`. Exit codes: 0 success, 2 configuration or
//! usage error, 3 data or I/O error, 4 fit non-convergence.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mclink_core::config::{Buffer, ConfigError, ExperimentConfig};
use mclink_core::fitting::{fit_isotherm, fit_kinetics, FitError, FitOptions};
use mclink_core::io::{
    read_any_trace_csv, read_bits_file, read_points_csv, read_trace_csv, sha256_hex,
    write_bits_file, write_decisions_csv, write_manifest, write_normalized_csv, write_points_csv,
    write_trace_csv, IoError, RunManifest, NORMALIZED_HEADER,
};
use mclink_core::kinetics::SensingPoint;
use mclink_core::txrx::{
    bit_error_rate, decision_indices, detect_bits, moving_mean, run_link, window_samples,
    TxRxError,
};

const CONFIG_ENV: &str = "MCLINK_CONFIG";
const DEFAULT_CONFIG: &str = "configs/reference.toml";

#[derive(Parser)]
#[command(name = "mclink", version, about = "Microfluidic molecular-communication link simulator")]
struct Cli {
    /// Experiment config TOML; falls back to $MCLINK_CONFIG, then
    /// configs/reference.toml.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print derived flow, screening, capacitance, and charge quantities
    /// for the configured device (key = value lines, units in key names).
    Physchem,
    /// Run one seeded frame end to end and write every artifact (traces,
    /// bits, decision samples, report, manifest) into a directory.
    Simulate {
        /// Output directory (created if missing).
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        /// Override the config's tx seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's bit period [s].
        #[arg(long, value_name = "SECONDS")]
        bit_period_s: Option<f64>,
    },
    /// Fit the Langmuir isotherm to equilibrium sensing points
    /// (`concentration_M,delta_i_uA` CSV); writes report + residuals.
    FitIsotherm {
        /// Input points CSV.
        points: PathBuf,
        /// Directory for report.txt and residuals.csv.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        /// Cap on solver iterations.
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Fit association/dissociation rate constants to one switching
    /// transient (`time_s,current_uA` CSV); writes report + residuals.
    FitKinetics {
        /// Input trace CSV (association from t = 0, release at the switch).
        trace: PathBuf,
        /// Target concentration during association [M].
        #[arg(long, value_name = "MOLAR")]
        concentration_molar: f64,
        /// Instant the flow switches to buffer-only [s].
        #[arg(long, value_name = "SECONDS")]
        switch_time_s: f64,
        /// Relative weight of residuals after the switch.
        #[arg(long, default_value_t = 1.0)]
        dissociation_weight: f64,
        /// Baseline current subtracted from the trace before fitting [µA];
        /// leave at 0 when the trace already records the current step.
        #[arg(long, default_value_t = 0.0)]
        baseline_ua: f64,
        /// Directory for report.txt and residuals.csv.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
        /// Cap on solver iterations.
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// Decode a received trace (`time_s,current_uA`) into bits using the
    /// configured frame timing and filter settings.
    Detect {
        /// Input trace CSV; pass the unfiltered received trace, the
        /// configured filter is applied here.
        trace: PathBuf,
        /// Also write the decoded bits to this file.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Compare two single-line 0/1 bit files and print the error rate.
    Ber {
        /// Transmitted bits file.
        sent: PathBuf,
        /// Detected bits file.
        detected: PathBuf,
    },
    /// Re-emit a trace CSV for plotting, optionally filtered with a
    /// moving mean and downsampled; with no options the copy is identical.
    Plotdata {
        /// Input trace CSV (current or normalized header).
        trace: PathBuf,
        /// Output CSV path.
        out: PathBuf,
        /// Keep every Nth row (starting at the first).
        #[arg(long, value_name = "N")]
        downsample: Option<usize>,
        /// Apply a centered moving mean of this width [s] before any
        /// downsampling.
        #[arg(long, value_name = "SECONDS")]
        filter_window_s: Option<f64>,
    },
}

/// CLI failure carrying its process exit code.
enum CliError {
    /// Bad configuration or parameters (exit 2).
    Config(String),
    /// Unreadable, unwritable, or malformed data (exit 3).
    Data(String),
    /// A fit finished without meeting a convergence criterion (exit 4).
    NonConvergence(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::NonConvergence(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::NonConvergence(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TxRxError> for CliError {
    fn from(e: TxRxError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn data_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Physchem => cmd_physchem(&load_config(cli.config.as_deref())?),
        Command::Simulate {
            ref out_dir,
            seed,
            bit_period_s,
        } => {
            let mut cfg = load_config(cli.config.as_deref())?;
            if let Some(seed) = seed {
                cfg.tx.seed = seed;
            }
            if let Some(t_b) = bit_period_s {
                cfg.tx.bit_period_s = t_b;
                cfg.validate()
                    .map_err(|e| CliError::Config(format!("--bit-period-s {t_b}: {e}")))?;
            }
            cmd_simulate(&cfg, out_dir)
        }
        Command::FitIsotherm {
            ref points,
            ref out_dir,
            max_iterations,
        } => cmd_fit_isotherm(points, out_dir, fit_options(max_iterations)),
        Command::FitKinetics {
            ref trace,
            concentration_molar,
            switch_time_s,
            dissociation_weight,
            baseline_ua,
            ref out_dir,
            max_iterations,
        } => cmd_fit_kinetics(
            trace,
            concentration_molar,
            switch_time_s,
            dissociation_weight,
            baseline_ua,
            out_dir,
            fit_options(max_iterations),
        ),
        Command::Detect { ref trace, ref out } => {
            cmd_detect(&load_config(cli.config.as_deref())?, trace, out.as_deref())
        }
        Command::Ber {
            ref sent,
            ref detected,
        } => cmd_ber(sent, detected),
        Command::Plotdata {
            ref trace,
            ref out,
            downsample,
            filter_window_s,
        } => cmd_plotdata(trace, out, downsample, filter_window_s),
    }
}

fn fit_options(max_iterations: Option<usize>) -> FitOptions {
    let mut options = FitOptions::default();
    if let Some(n) = max_iterations {
        options.max_iterations = n;
    }
    options
}

/// Resolve, parse, and validate the experiment config.
fn load_config(flag: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    let path = flag
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CONFIG));
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read config `{}`: {e}", path.display())))?;
    let cfg = ExperimentConfig::from_toml_str(&text)
        .map_err(|e| CliError::Config(format!("config `{}`: {e}", path.display())))?;
    cfg.validate()
        .map_err(|e| CliError::Config(format!("config `{}`: {e}", path.display())))?;
    Ok(cfg)
}

fn cmd_physchem(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let ch = cfg.channel()?;
    let recv = cfg.receiver()?;
    let mut out = String::new();
    let _ = writeln!(out, "reynolds_number = {}", ch.reynolds_number());
    let _ = writeln!(out, "hydraulic_diameter_um = {}", ch.hydraulic_diameter_um());
    let _ = writeln!(out, "mean_velocity_um_per_s = {}", ch.linear_velocity_um_per_s());
    let _ = writeln!(out, "wall_shear_rate_per_s = {}", ch.wall_shear_rate_per_s());
    let _ = writeln!(out, "quantum_capacitance_nf = {}", recv.quantum_capacitance_nf());
    for (name, buffer) in [
        ("hybridization", Buffer::Hybridization),
        ("measurement", Buffer::Measurement),
    ] {
        let lambda = cfg.debye_length_nm(buffer)?;
        let _ = writeln!(out, "debye_length_{name}_nm = {lambda}");
        let _ = writeln!(
            out,
            "edl_capacitance_{name}_nf = {}",
            recv.graphene_edl_capacitance_nf(lambda)
                .map_err(|e| CliError::Config(format!("config section [receiver]: {e}")))?
        );
        let _ = writeln!(out, "gate_capacitance_{name}_nf = {}", cfg.gate_capacitance_nf(buffer)?);
        let _ = writeln!(out, "effective_charge_{name}_c = {}", cfg.effective_charge_c(buffer)?);
    }
    let _ = writeln!(out, "probe_density_per_um2 = {}", cfg.probe_density_per_um2()?);
    print!("{out}");
    Ok(())
}

fn cmd_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let params = cfg.link_params()?;
    let run = run_link(&params, cfg.tx.seed)?;
    std::fs::create_dir_all(out_dir).map_err(|e| data_err(out_dir, e))?;

    write_trace_csv(out_dir.join("clean.csv"), &run.times_s, &run.clean_ua)?;
    write_trace_csv(out_dir.join("noisy.csv"), &run.times_s, &run.noisy_ua)?;
    write_trace_csv(out_dir.join("filtered.csv"), &run.times_s, &run.received_ua)?;
    let baseline = cfg.receiver.baseline_current_ua;
    let normalized: Vec<f64> = run.clean_ua.iter().map(|&i| i / baseline).collect();
    write_normalized_csv(out_dir.join("normalized.csv"), &run.times_s, &normalized)?;
    write_bits_file(out_dir.join("sent.bits"), &run.bits)?;
    write_bits_file(out_dir.join("decoded.bits"), &run.detected)?;
    let (d_times, d_currents): (Vec<f64>, Vec<f64>) = run
        .decision_indices
        .iter()
        .map(|&i| (run.times_s[i], run.received_ua[i]))
        .unzip();
    write_decisions_csv(out_dir.join("decisions.csv"), &d_times, &d_currents)?;

    let errors = run
        .bits
        .iter()
        .zip(&run.detected)
        .filter(|(a, b)| a != b)
        .count();
    let mut report = String::new();
    let _ = writeln!(report, "bits = {}", run.bits.len());
    let _ = writeln!(report, "errors = {errors}");
    let _ = writeln!(report, "ber = {}", run.ber);
    let _ = writeln!(report, "bit_period_s = {}", cfg.tx.bit_period_s);
    let _ = writeln!(report, "tx_seed = {}", cfg.tx.seed);
    let _ = writeln!(report, "noise_seed = {}", run.noise_seed);
    let _ = writeln!(report, "filter_window_samples = {}", params.filter_window);
    let _ = writeln!(report, "decision_offset_s = {}", params.decision_offset_s);
    let report_path = out_dir.join("report.txt");
    std::fs::write(&report_path, &report).map_err(|e| data_err(&report_path, e))?;

    let artifacts = [
        "clean.csv",
        "noisy.csv",
        "filtered.csv",
        "normalized.csv",
        "sent.bits",
        "decoded.bits",
        "decisions.csv",
        "report.txt",
    ];
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(cfg.to_toml_string()?.as_bytes()),
        tx_seed: cfg.tx.seed,
        noise_seed: run.noise_seed,
        artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
    };
    write_manifest(out_dir.join("manifest.toml"), &manifest)?;

    print!("{report}");
    println!("out_dir = {}", out_dir.display());
    Ok(())
}

fn cmd_fit_isotherm(
    points_path: &Path,
    out_dir: &Path,
    options: FitOptions,
) -> Result<(), CliError> {
    let points = read_points_csv(points_path)?;
    let fit = fit_isotherm(&points, &options)?;

    let mut report = String::new();
    let _ = writeln!(report, "kd_molar = {}", fit.kd_molar);
    let _ = writeln!(report, "delta_i_sat_ua = {}", fit.delta_i_sat_ua);
    let _ = writeln!(report, "kd_stderr_molar = {}", fit.kd_stderr_molar);
    let _ = writeln!(report, "delta_i_sat_stderr_ua = {}", fit.sat_stderr_ua);
    let _ = writeln!(report, "cost_ua2 = {}", fit.cost);
    let _ = writeln!(report, "iterations = {}", fit.iterations);
    let _ = writeln!(report, "converged = {}", fit.converged);
    print!("{report}");

    std::fs::create_dir_all(out_dir).map_err(|e| data_err(out_dir, e))?;
    let report_path = out_dir.join("report.txt");
    std::fs::write(&report_path, &report).map_err(|e| data_err(&report_path, e))?;
    // Residuals (observed − fitted) on the same concentration axis.
    let residuals: Vec<SensingPoint> = points
        .iter()
        .map(|p| SensingPoint {
            concentration_molar: p.concentration_molar,
            delta_i_ua: p.delta_i_ua - fit.model_ua(p.concentration_molar),
        })
        .collect();
    write_points_csv(out_dir.join("residuals.csv"), &residuals)?;

    if fit.converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!(
            "isotherm fit did not converge within {} iterations (report and residuals written to {})",
            fit.iterations,
            out_dir.display()
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit_kinetics(
    trace_path: &Path,
    concentration_molar: f64,
    switch_time_s: f64,
    dissociation_weight: f64,
    baseline_ua: f64,
    out_dir: &Path,
    options: FitOptions,
) -> Result<(), CliError> {
    let (times, currents) = read_trace_csv(trace_path)?;
    let values: Vec<f64> = currents.iter().map(|&v| v - baseline_ua).collect();
    let fit = fit_kinetics(
        &times,
        &values,
        concentration_molar,
        switch_time_s,
        dissociation_weight,
        &options,
    )?;

    let mut report = String::new();
    let _ = writeln!(report, "k_on_per_molar_s = {}", fit.k_on_per_molar_s);
    let _ = writeln!(report, "k_off_per_s = {}", fit.k_off_per_s);
    let _ = writeln!(report, "kd_molar = {}", fit.kd_molar);
    let _ = writeln!(report, "delta_i_eq_ua = {}", fit.delta_i_eq_ua);
    let _ = writeln!(report, "k_on_stderr_per_molar_s = {}", fit.k_on_stderr);
    let _ = writeln!(report, "k_off_stderr_per_s = {}", fit.k_off_stderr);
    let _ = writeln!(report, "delta_i_eq_stderr_ua = {}", fit.delta_i_eq_stderr);
    let _ = writeln!(report, "cost_ua2 = {}", fit.cost);
    let _ = writeln!(report, "iterations = {}", fit.iterations);
    let _ = writeln!(report, "converged = {}", fit.converged);
    print!("{report}");

    std::fs::create_dir_all(out_dir).map_err(|e| data_err(out_dir, e))?;
    let report_path = out_dir.join("report.txt");
    std::fs::write(&report_path, &report).map_err(|e| data_err(&report_path, e))?;
    // Residuals (observed − fitted) on the trace's time grid.
    let residuals: Vec<f64> = times
        .iter()
        .zip(&values)
        .map(|(&t, &v)| v - fit.model_ua(t, switch_time_s, concentration_molar))
        .collect();
    write_trace_csv(out_dir.join("residuals.csv"), &times, &residuals)?;

    if fit.converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!(
            "kinetics fit did not converge within {} iterations (report and residuals written to {})",
            fit.iterations,
            out_dir.display()
        )))
    }
}

/// Grid spacing of a uniformly sampled trace; names the first line whose
/// spacing disagrees.
fn uniform_dt(path: &Path, times: &[f64]) -> Result<f64, CliError> {
    if times.len() < 2 {
        return Err(CliError::Data(format!(
            "{}: need at least 2 samples to infer the grid spacing",
            path.display()
        )));
    }
    let dt = times[1] - times[0];
    if !(dt.is_finite() && dt > 0.0) {
        return Err(CliError::Data(format!(
            "{}:3: time must increase along the grid (spacing {dt})",
            path.display()
        )));
    }
    for (i, pair) in times.windows(2).enumerate() {
        let step = pair[1] - pair[0];
        if (step - dt).abs() > 1e-6 * dt {
            return Err(CliError::Data(format!(
                "{}:{}: non-uniform time grid (spacing {step}, expected {dt})",
                path.display(),
                i + 3 // +1 header line, +1 one-based, +1 second row of the pair
            )));
        }
    }
    Ok(dt)
}

fn cmd_detect(cfg: &ExperimentConfig, trace_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let (times, currents) = read_trace_csv(trace_path)?;
    let dt = uniform_dt(trace_path, &times)?;
    let filtered = moving_mean(&currents, cfg.filter_window_samples()?)?;
    let indices = decision_indices(
        &cfg.scheme()?,
        cfg.rx.decision_offset_s,
        times[0],
        dt,
        times.len(),
        cfg.tx.n_bits,
    )?;
    let bits = detect_bits(&filtered, &indices);
    let text: String = bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
    println!("{text}");
    if let Some(path) = out {
        write_bits_file(path, &bits)?;
    }
    Ok(())
}

fn cmd_ber(sent_path: &Path, detected_path: &Path) -> Result<(), CliError> {
    let sent = read_bits_file(sent_path)?;
    let detected = read_bits_file(detected_path)?;
    let ber = bit_error_rate(&sent, &detected)?;
    let errors = sent
        .iter()
        .zip(&detected)
        .filter(|(a, b)| a != b)
        .count();
    println!("bits = {}", sent.len());
    println!("errors = {errors}");
    println!("ber = {ber}");
    Ok(())
}

fn cmd_plotdata(
    trace_path: &Path,
    out_path: &Path,
    downsample: Option<usize>,
    filter_window_s: Option<f64>,
) -> Result<(), CliError> {
    let (header, times, values) = read_any_trace_csv(trace_path)?;
    let values = match filter_window_s {
        Some(window_s) => {
            let dt = uniform_dt(trace_path, &times)?;
            let width = window_samples(window_s, dt)
                .map_err(|e| CliError::Config(format!("--filter-window-s {window_s}: {e}")))?;
            moving_mean(&values, width)?
        }
        None => values,
    };
    let (times, values) = match downsample {
        Some(0) => {
            return Err(CliError::Config(
                "--downsample must be at least 1".to_string(),
            ))
        }
        Some(n) => (
            times.iter().copied().step_by(n).collect::<Vec<f64>>(),
            values.iter().copied().step_by(n).collect::<Vec<f64>>(),
        ),
        None => (times, values),
    };
    if header == NORMALIZED_HEADER {
        write_normalized_csv(out_path, &times, &values)?;
    } else {
        write_trace_csv(out_path, &times, &values)?;
    }
    println!("rows = {}", times.len());
    println!("out = {}", out_path.display());
    Ok(())
}
