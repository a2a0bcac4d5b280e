//! Command-line front end for the satkey finite-key simulator.
//!
//! Every subcommand loads a mission config (a built-in preset name or a JSON
//! file), applies `--override` patches, runs one study, writes the result
//! atomically into `--out-dir`, and prints a one-line summary to stdout.
//!
//! Exit codes: 0 on success (including a zero-length key), 1 for argument,
//! config, or validation problems, 2 for runtime failures (the message names
//! the module that failed). Outputs depend only on the arguments: no
//! environment variables, no clocks, no machine state.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use satkey::detstats::CountMode;
use satkey::missions::{
    accumulation_study, altitude_study, elevation_sweep, run_pass, tradeoff_map, MissionConfig,
    MissionError, PassOutcome, Provenance, StudyResult, StudyRow,
};

// ----------------------------------------------------------------------------
// Argument grammar
// ----------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "satkey",
    version,
    about = "Finite-block secret key prediction for satellite QKD links",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Options shared by every subcommand.
#[derive(Args)]
struct ConfigArgs {
    /// Built-in preset name or path to a mission config JSON file.
    #[arg(long)]
    config: String,

    /// Patch one config value by dotted path, e.g.
    /// --override protocol.source.pair_rate_hz=2e8. The path must name an
    /// existing key. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Draw one random block per grid point instead of expectation values.
    #[arg(long, requires = "seed")]
    sampled: bool,

    /// RNG seed for --sampled runs.
    #[arg(long, requires = "sampled")]
    seed: Option<u64>,

    /// Directory for the output file (created if missing).
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Output format.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline for a single pass.
    Pass {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Peak elevation of the pass in degrees.
        #[arg(long)]
        elevation: f64,
        /// Extra loss added to every sample, in dB.
        #[arg(long, default_value_t = 0.0)]
        extra_loss_db: f64,
    },
    /// Secret key length over a peak-elevation x extra-loss grid.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated peak elevations in degrees, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        elevations: Vec<f64>,
        /// Comma-separated extra losses in dB, strictly increasing.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        extra_losses: Vec<f64>,
    },
    /// Zenith link loss over an altitude ladder (physical chains only).
    Altitude {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated orbit altitudes in km, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        altitudes: Vec<f64>,
    },
    /// Zenith link gain over a transmit-aperture x pointing-jitter grid.
    Tradeoff {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated transmitter apertures in metres.
        #[arg(long, value_delimiter = ',', required = true)]
        apertures: Vec<f64>,
        /// Comma-separated RMS pointing jitters in microradians.
        #[arg(long, value_delimiter = ',', required = true)]
        pointings: Vec<f64>,
        /// Orbit altitude in km; defaults to the config's altitude.
        #[arg(long)]
        altitude: Option<f64>,
    },
    /// Accumulate a synthetic year of passes per altitude.
    Accumulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated orbit altitudes in km, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        altitudes: Vec<f64>,
        /// Discard passes whose measured key-basis QBER exceeds this.
        #[arg(long)]
        qber_cutoff: f64,
        /// Pass-schedule preset.
        #[arg(long, default_value = "mid-latitude")]
        schedule: String,
        /// Seed for the synthetic schedule.
        #[arg(long)]
        schedule_seed: u64,
    },
    /// Parse and validate a config; optionally write the normalized form.
    Validate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

// ----------------------------------------------------------------------------
// Error taxonomy
// ----------------------------------------------------------------------------

#[derive(Debug)]
enum CliError {
    /// Bad arguments, unreadable or invalid config: exit 1.
    Config(String),
    /// A study failed while running: exit 2, naming the failing module.
    Runtime {
        module: &'static str,
        message: String,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime { .. } => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(message) => write!(f, "error: {message}"),
            CliError::Runtime { module, message } => {
                write!(f, "runtime error in {module}: {message}")
            }
        }
    }
}

/// Split study errors into bad-input (exit 1) and genuine runtime failures
/// (exit 2, attributed to the module that raised them).
fn study_error(err: MissionError) -> CliError {
    let module = match &err {
        // Bad axes, cutoffs, or schedule arguments are validation problems.
        MissionError::EmptyAxis(_)
        | MissionError::AxisNotIncreasing { .. }
        | MissionError::AltitudeBelowFloor(_)
        | MissionError::BadCutoff(_)
        | MissionError::EmptySchedule
        | MissionError::UnknownSchedulePreset(_)
        | MissionError::RequiresPhysicalLink(_)
        | MissionError::UnknownPreset(_)
        | MissionError::BadTimeStep(_)
        | MissionError::ConfigParse(_) => return CliError::Config(err.to_string()),
        MissionError::Orbit(_) => "orbit",
        MissionError::Link(_) => "linkbudget",
        MissionError::DetStats(_) => "detstats",
        MissionError::FiniteKey(_) => "finitekey",
        MissionError::Io(_) => "io",
        MissionError::CurveNotFound(_) => "missions",
    };
    CliError::Runtime {
        module,
        message: err.to_string(),
    }
}

/// Argument-level range checks, so malformed grids fail before any study
/// starts.
fn check_elevation(value: f64, flag: &str) -> Result<(), CliError> {
    if !(0.0..=90.0).contains(&value) || !value.is_finite() {
        return Err(CliError::Config(format!(
            "{flag} {value} outside [0, 90] degrees"
        )));
    }
    Ok(())
}

fn check_finite(value: f64, flag: &str) -> Result<(), CliError> {
    if !value.is_finite() {
        return Err(CliError::Config(format!("{flag} must be finite")));
    }
    Ok(())
}

fn check_positive(value: f64, flag: &str) -> Result<(), CliError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(CliError::Config(format!("{flag} {value} must be positive")));
    }
    Ok(())
}

// ----------------------------------------------------------------------------
// Config loading and overrides
// ----------------------------------------------------------------------------

/// Replace the value at a dotted path in a JSON tree. Every path segment
/// must already exist; array segments are zero-based indices.
fn patch_json(
    root: &mut serde_json::Value,
    path: &str,
    new_value: serde_json::Value,
) -> Result<(), CliError> {
    let segments: Vec<&str> = path.split('.').collect();
    let mut cursor = root;
    for (i, segment) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        match cursor {
            serde_json::Value::Object(map) => {
                if !map.contains_key(*segment) {
                    return Err(CliError::Config(format!(
                        "override path '{path}': no key '{segment}' in the config"
                    )));
                }
                if last {
                    map.insert((*segment).to_string(), new_value);
                    return Ok(());
                }
                cursor = map.get_mut(*segment).expect("key checked above");
            }
            serde_json::Value::Array(items) => {
                let index: usize = segment.parse().map_err(|_| {
                    CliError::Config(format!(
                        "override path '{path}': '{segment}' is not an array index"
                    ))
                })?;
                if index >= items.len() {
                    return Err(CliError::Config(format!(
                        "override path '{path}': index {index} out of range"
                    )));
                }
                if last {
                    items[index] = new_value;
                    return Ok(());
                }
                cursor = &mut items[index];
            }
            _ => {
                return Err(CliError::Config(format!(
                    "override path '{path}': '{segment}' descends into a scalar"
                )));
            }
        }
    }
    Ok(())
}

/// Load the config (preset name or file), apply overrides, and fix the
/// count mode from --sampled/--seed.
fn load_config(cfg: &ConfigArgs) -> Result<MissionConfig, CliError> {
    let path = Path::new(&cfg.config);
    let (text, base_dir) = if path.is_file() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read '{}': {e}", cfg.config)))?;
        (text, path.parent().map(Path::to_path_buf))
    } else {
        let preset = MissionConfig::builtin_preset(&cfg.config)
            .map_err(|e| CliError::Config(e.to_string()))?;
        (preset.to_json_string(), None)
    };

    let mut tree: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config parse: {e}")))?;
    for item in &cfg.overrides {
        let (key, raw) = item.split_once('=').ok_or_else(|| {
            CliError::Config(format!("override '{item}' is not of the form KEY=VALUE"))
        })?;
        // Values parse as JSON when possible (numbers, booleans, structures)
        // and fall back to plain strings.
        let value = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        patch_json(&mut tree, key, value)?;
    }

    let mut config = MissionConfig::from_json_str(&tree.to_string())
        .map_err(|e| CliError::Config(e.to_string()))?;
    config.base_dir = base_dir;
    if cfg.sampled {
        let seed = cfg.seed.expect("clap enforces --seed with --sampled");
        config.count_mode = CountMode::Sampled { seed };
    }
    config
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

// ----------------------------------------------------------------------------
// Output plumbing
// ----------------------------------------------------------------------------

/// The exact invocation, recorded in every output's metadata.
fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

/// Write via a temporary file and rename, so readers never observe a
/// partially written output.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    let io_err = |e: std::io::Error| CliError::Runtime {
        module: "io",
        message: format!("writing '{}': {e}", path.display()),
    };
    std::fs::write(&tmp, bytes).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)?;
    Ok(())
}

/// Render a study in the chosen format and write it under out_dir (if any).
fn emit_study(study: &StudyResult, cfg: &ConfigArgs, file_stem: &str) -> Result<(), CliError> {
    let Some(out_dir) = &cfg.out_dir else {
        return Ok(());
    };
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Config(format!("cannot create '{}': {e}", out_dir.display())))?;
    let (name, bytes) = match cfg.format {
        Format::Csv => {
            let mut buf = Vec::new();
            study.write_csv(&mut buf).map_err(|e| CliError::Runtime {
                module: "io",
                message: e.to_string(),
            })?;
            (format!("{file_stem}.csv"), buf)
        }
        Format::Json => (
            format!("{file_stem}.json"),
            study.to_json_string().into_bytes(),
        ),
    };
    write_atomic(&out_dir.join(name), &bytes)
}

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.6}"),
        None => "n/a".to_string(),
    }
}

fn pass_study(config: &MissionConfig, outcome: &PassOutcome, cmd: String) -> StudyResult {
    let mut provenance = Provenance {
        config_hash: config.config_hash(),
        seed: match config.count_mode {
            CountMode::Sampled { seed } => Some(seed),
            CountMode::Expected => None,
        },
        version: env!("CARGO_PKG_VERSION").to_string(),
        command_line: None,
    };
    provenance.command_line = Some(cmd);
    StudyResult {
        study: "pass".to_string(),
        x_name: "max_elevation_deg".to_string(),
        y_name: None,
        provenance,
        rows: vec![StudyRow {
            x: outcome.max_elevation_deg,
            y: None,
            band: None,
            skl_bits: Some(outcome.key.secret_key_length),
            raw_bits: Some(outcome.raw_bits),
            qber: outcome.qber,
            loss_db: outcome.min_loss_db,
            gain_db: None,
            duration_s: Some(outcome.duration_s),
            passes_total: None,
            passes_kept: None,
            skl_sum_bits: None,
            key: Some(outcome.key.clone()),
        }],
    }
}

// ----------------------------------------------------------------------------
// Subcommand drivers
// ----------------------------------------------------------------------------

fn run(cli: Cli) -> Result<(), CliError> {
    let cmd = command_line();
    match cli.command {
        Command::Pass {
            cfg,
            elevation,
            extra_loss_db,
        } => {
            check_elevation(elevation, "--elevation")?;
            check_finite(extra_loss_db, "--extra-loss-db")?;
            let config = load_config(&cfg)?;
            let outcome = run_pass(&config, elevation, extra_loss_db).map_err(study_error)?;
            let study = pass_study(&config, &outcome, cmd);
            emit_study(&study, &cfg, "pass")?;
            println!(
                "pass: skl_bits={} qber={} raw_bits={:.0} min_loss_db={} duration_s={:.0}",
                outcome.key.secret_key_length,
                fmt_opt(outcome.qber),
                outcome.raw_bits,
                fmt_opt(outcome.min_loss_db),
                outcome.duration_s
            );
            Ok(())
        }
        Command::Sweep {
            cfg,
            elevations,
            extra_losses,
        } => {
            for &e in &elevations {
                check_elevation(e, "--elevations")?;
            }
            for &o in &extra_losses {
                check_finite(o, "--extra-losses")?;
            }
            let config = load_config(&cfg)?;
            let mut study =
                elevation_sweep(&config, &elevations, &extra_losses).map_err(study_error)?;
            study.provenance.command_line = Some(cmd);
            emit_study(&study, &cfg, "sweep")?;
            let best = study
                .rows
                .iter()
                .max_by_key(|r| r.skl_bits.unwrap_or(0))
                .expect("sweep rows are never empty");
            println!(
                "sweep: rows={} best_skl_bits={} at max_elevation_deg={} extra_loss_db={} qber={} raw_bits={:.0}",
                study.rows.len(),
                best.skl_bits.unwrap_or(0),
                best.x,
                best.y.unwrap_or(0.0),
                fmt_opt(best.qber),
                best.raw_bits.unwrap_or(0.0)
            );
            Ok(())
        }
        Command::Altitude { cfg, altitudes } => {
            let config = load_config(&cfg)?;
            let mut study = altitude_study(&config, &altitudes).map_err(study_error)?;
            study.provenance.command_line = Some(cmd);
            emit_study(&study, &cfg, "altitude")?;
            let first = study.rows.first().expect("rows checked by validate");
            let last = study.rows.last().expect("rows checked by validate");
            println!(
                "altitude: rows={} zenith_loss_db {:.4} ({} km) .. {:.4} ({} km)",
                study.rows.len(),
                first.loss_db.unwrap_or(f64::NAN),
                first.x,
                last.loss_db.unwrap_or(f64::NAN),
                last.x
            );
            Ok(())
        }
        Command::Tradeoff {
            cfg,
            apertures,
            pointings,
            altitude,
        } => {
            for &a in &apertures {
                check_positive(a, "--apertures")?;
            }
            for &p in &pointings {
                check_positive(p, "--pointings")?;
            }
            if let Some(a) = altitude {
                check_positive(a, "--altitude")?;
            }
            let config = load_config(&cfg)?;
            let altitude_km = altitude.unwrap_or(config.altitude_km);
            let mut study =
                tradeoff_map(&config, &apertures, &pointings, altitude_km).map_err(study_error)?;
            study.provenance.command_line = Some(cmd);
            emit_study(&study, &cfg, "tradeoff")?;
            let best = study
                .rows
                .iter()
                .max_by(|a, b| a.gain_db.partial_cmp(&b.gain_db).expect("finite gains"))
                .expect("tradeoff rows are never empty");
            println!(
                "tradeoff: rows={} best_gain_db={:.4} at tx_aperture_m={} pointing_jitter_urad={}",
                study.rows.len(),
                best.gain_db.unwrap_or(f64::NAN),
                best.x,
                best.y.unwrap_or(f64::NAN)
            );
            Ok(())
        }
        Command::Accumulate {
            cfg,
            altitudes,
            qber_cutoff,
            schedule,
            schedule_seed,
        } => {
            let config = load_config(&cfg)?;
            let mut study =
                accumulation_study(&config, &altitudes, qber_cutoff, &schedule, schedule_seed)
                    .map_err(study_error)?;
            study.provenance.command_line = Some(cmd);
            emit_study(&study, &cfg, "accumulate")?;
            let mut summary = String::new();
            let skl_total: u64 = study.rows.iter().filter_map(|r| r.skl_bits).sum();
            let raw_total: f64 = study.rows.iter().filter_map(|r| r.raw_bits).sum();
            write!(
                summary,
                "accumulate: rows={} skl_bits_total={} raw_bits_total={:.3e}",
                study.rows.len(),
                skl_total,
                raw_total
            )
            .expect("write to string");
            println!("{summary}");
            Ok(())
        }
        Command::Validate { cfg } => {
            let config = load_config(&cfg)?;
            if let Some(out_dir) = &cfg.out_dir {
                std::fs::create_dir_all(out_dir).map_err(|e| {
                    CliError::Config(format!("cannot create '{}': {e}", out_dir.display()))
                })?;
                write_atomic(
                    &out_dir.join("validated.json"),
                    config.to_json_string().as_bytes(),
                )?;
            }
            println!(
                "validate: ok name={} config_hash={} version={}",
                config.name,
                config.config_hash(),
                env!("CARGO_PKG_VERSION")
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; everything else is a
            // usage error.
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            // clap pre-formats its own message.
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}

// ----------------------------------------------------------------------------
// Tests
// ----------------------------------------------------------------------------
