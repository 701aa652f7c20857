//! `coop`: simulate, filter, judge and evaluate cue-response trials.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or validation error,
//! 3 trial cannot be judged (no cue, or too short for the delay).

use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use coop_core::evaluation::{evaluate_labeled, render_report, sweep_thresholds, threshold_sweep, SweepPoint};
use coop_core::judgment::detect_cue_onset;
use coop_core::trial_io::{
    manifest_trial_paths, read_manifest, write_json, write_manifest, write_plot_csv, write_trace, ManifestEntry,
    SuiteManifest, FORMAT_VERSION,
};
use coop_core::{
    filter_trial, generate_trial_suite, judge, read_params, read_trial, simulate_trial, write_trial, BehaviorMode,
    Cooperativeness, Error, JudgmentConfig, ModelParams, PhysicalIntensity, StateEstimate, TrialRecord, TrialSpec,
    VerbalCue,
};

#[derive(Debug)]
enum CliError {
    Core(Error),
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_io() => 1,
            CliError::Core(Error::NoCue | Error::TraceTooShort { .. }) => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Usage(msg) => f.write_str(msg),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "coop",
    version,
    about = "Cooperativeness estimation from cue-response trials"
)]
struct Cli {
    /// Model parameter file (JSON); missing fields take default values.
    #[arg(long, global = true, env = "COOP_FILTER_CONFIG")]
    params: Option<PathBuf>,

    /// Log progress (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Physical {
    None,
    Soft,
    Hard,
}

impl From<Physical> for PhysicalIntensity {
    fn from(p: Physical) -> Self {
        match p {
            Physical::None => PhysicalIntensity::None,
            Physical::Soft => PhysicalIntensity::Soft,
            Physical::Hard => PhysicalIntensity::Hard,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Verbal {
    None,
    Back,
    Forward,
}

impl From<Verbal> for VerbalCue {
    fn from(v: Verbal) -> Self {
        match v {
            Verbal::None => VerbalCue::None,
            Verbal::Back => VerbalCue::Back,
            Verbal::Forward => VerbalCue::Forward,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Behavior {
    Model,
    FrozenUncooperative,
}

impl From<Behavior> for BehaviorMode {
    fn from(b: Behavior) -> Self {
        match b {
            Behavior::Model => BehaviorMode::Model,
            Behavior::FrozenUncooperative => BehaviorMode::FrozenUncooperative,
        }
    }
}

#[derive(clap::Args)]
struct JudgeArgs {
    /// Seconds between cue onset and the ξ̂ sample.
    #[arg(long, default_value_t = JudgmentConfig::default().delay)]
    delay: f64,
    /// Dead-band half-width.
    #[arg(long, default_value_t = JudgmentConfig::default().threshold)]
    threshold: f64,
}

impl JudgeArgs {
    fn config(&self) -> CliResult<JudgmentConfig> {
        Ok(JudgmentConfig::new(self.delay, self.threshold)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trial and write it with a one-entry manifest.
    Simulate {
        /// Requested cooperativeness: -1, 0 or 1.
        #[arg(long, allow_hyphen_values = true)]
        xi: i8,
        #[arg(long, value_enum, default_value = "none")]
        physical: Physical,
        #[arg(long, value_enum, default_value = "none")]
        verbal: Verbal,
        /// Seconds between the cues; positive means the push comes first.
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        timing: i8,
        #[arg(long, default_value_t = TrialSpec::DEFAULT_DURATION)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "S1")]
        subject: String,
        #[arg(long, value_enum, default_value = "model")]
        behavior: Behavior,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Basename of the written files.
        #[arg(long, default_value = "trial")]
        name: String,
        #[arg(long)]
        force: bool,
    },
    /// Filter a trial; writes `<base>.trace.json` and `<base>.plot.csv`.
    Filter {
        trial: PathBuf,
        /// Output directory (defaults to the trial's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Judge a trial: prints the verdict, then a JSON detail line.
    Judge {
        trial: PathBuf,
        #[command(flatten)]
        judgment: JudgeArgs,
    },
    /// Simulate a suite of subjects x trials into a directory with a manifest.
    Suite {
        #[arg(long, default_value_t = 4)]
        subjects: usize,
        #[arg(long, default_value_t = 25)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "suite")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "model")]
        behavior: Behavior,
        #[arg(long)]
        force: bool,
    },
    /// Judge every trial in a manifest and print the summary tables.
    Evaluate {
        manifest: PathBuf,
        #[command(flatten)]
        judgment: JudgeArgs,
        /// JSON report path (defaults to `report.json` beside the manifest).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Accuracy versus threshold, as `lo:hi:step`; written to `sweep.csv` beside the report.
        #[arg(long, value_name = "LO:HI:STEP")]
        sweep_threshold: Option<String>,
    },
}

fn load_params(path: Option<&Path>) -> CliResult<ModelParams> {
    match path {
        Some(p) => {
            log::info!("model parameters from {}", p.display());
            Ok(read_params(p)?)
        }
        None => Ok(ModelParams::default()),
    }
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|source| {
        CliError::Core(Error::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

fn filter_record(record: &TrialRecord, params: &ModelParams) -> CliResult<coop_core::FilterTrace> {
    let y0 = *record
        .measurements
        .first()
        .ok_or_else(|| CliError::Usage("trial has no samples".into()))?;
    Ok(filter_trial(record, params, StateEstimate::from_first_measurement(y0))?)
}

fn base_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "trial".into(), |s| s.to_string_lossy().into_owned())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    params: &ModelParams,
    xi: i8,
    physical: Physical,
    verbal: Verbal,
    timing: i8,
    duration: f64,
    seed: u64,
    subject: String,
    behavior: Behavior,
    out: &Path,
    name: &str,
    force: bool,
) -> CliResult<String> {
    let spec = TrialSpec {
        requested_xi: Cooperativeness::try_from(xi)?,
        physical_intensity: physical.into(),
        verbal_cue: verbal.into(),
        relative_timing: timing,
        duration,
        seed,
    };
    spec.validate()?;
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(CliError::Usage(format!("invalid trial name `{name}`")));
    }
    let mut record = simulate_trial(&spec, params, behavior.into())?;
    record.subject_id = subject.clone();

    create_dir(out)?;
    let file = format!("{name}.csv");
    let path = out.join(&file);
    let manifest_path = out.join(format!("{name}.manifest.json"));
    if !force && manifest_path.exists() {
        return Err(Error::AlreadyExists(manifest_path).into());
    }
    write_trial(&record, &path, force)?;
    write_manifest(
        &SuiteManifest {
            format_version: FORMAT_VERSION,
            master_seed: None,
            n_subjects: 1,
            trials_per_subject: 1,
            behavior: behavior.into(),
            params: *params,
            trials: vec![ManifestEntry {
                file,
                subject_id: subject,
                trial_index: 0,
                spec,
            }],
        },
        &manifest_path,
    )?;
    Ok(format!("{}\n{}\n", path.display(), manifest_path.display()))
}

fn cmd_filter(params: &ModelParams, trial: &Path, out: Option<&Path>) -> CliResult<String> {
    let record = read_trial(trial)?;
    let trace = filter_record(&record, params)?;
    let dir = match out {
        Some(d) => {
            create_dir(d)?;
            d.to_path_buf()
        }
        None => trial.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    let base = base_name(trial);
    let trace_path = dir.join(format!("{base}.trace.json"));
    let plot_path = dir.join(format!("{base}.plot.csv"));
    write_trace(&trace, &trace_path)?;
    write_plot_csv(&trace, &record.measurements, &plot_path)?;
    Ok(format!("{}\n{}\n", trace_path.display(), plot_path.display()))
}

#[derive(Serialize)]
struct JudgeOutput {
    verdict: Cooperativeness,
    sampled_xi: f64,
    sample_time: f64,
    onset: f64,
    delay: f64,
    threshold: f64,
    requested_xi: Option<Cooperativeness>,
}

fn cmd_judge(params: &ModelParams, trial: &Path, cfg: JudgmentConfig) -> CliResult<String> {
    let record = read_trial(trial)?;
    let onset = detect_cue_onset(&record.cues)?;
    let trace = filter_record(&record, params)?;
    let verdict = judge(&trace, &record.cues, &cfg)?;
    let detail = JudgeOutput {
        verdict: verdict.value,
        sampled_xi: verdict.sampled_xi,
        sample_time: verdict.sample_time,
        onset,
        delay: cfg.delay,
        threshold: cfg.threshold,
        requested_xi: record.requested_xi,
    };
    let json = serde_json::to_string(&detail).expect("verdict serialises");
    Ok(format!("{}\n{json}\n", verdict.value))
}

fn cmd_suite(
    params: &ModelParams,
    subjects: usize,
    trials: usize,
    seed: u64,
    out: &Path,
    behavior: Behavior,
    force: bool,
) -> CliResult<String> {
    let entries = generate_trial_suite(subjects, trials, seed)?;
    let manifest_path = out.join("manifest.json");
    if !force && manifest_path.exists() {
        return Err(Error::AlreadyExists(manifest_path).into());
    }
    create_dir(out)?;
    let width = (trials - 1).to_string().len().max(2);
    let mut listed = Vec::with_capacity(entries.len());
    for entry in entries {
        let mut record = simulate_trial(&entry.spec, params, behavior.into())?;
        record.subject_id = entry.subject_id.clone();
        let file = format!("{}_t{:0width$}.csv", entry.subject_id, entry.trial_index);
        write_trial(&record, &out.join(&file), force)?;
        listed.push(ManifestEntry {
            file,
            subject_id: entry.subject_id,
            trial_index: entry.trial_index,
            spec: entry.spec,
        });
    }
    log::info!("wrote {} trials to {}", listed.len(), out.display());
    // The manifest goes last so a complete manifest implies complete trials.
    write_manifest(
        &SuiteManifest {
            format_version: FORMAT_VERSION,
            master_seed: Some(seed),
            n_subjects: subjects,
            trials_per_subject: trials,
            behavior: behavior.into(),
            params: *params,
            trials: listed,
        },
        &manifest_path,
    )?;
    Ok(format!("{}\n", manifest_path.display()))
}

fn parse_sweep(text: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--sweep-threshold expects lo:hi:step, got `{text}`")))?;
    match nums[..] {
        [lo, hi, step] => Ok(sweep_thresholds(lo, hi, step)?),
        _ => Err(CliError::Usage(format!(
            "--sweep-threshold expects lo:hi:step, got `{text}`"
        ))),
    }
}

fn sweep_csv(points: &[SweepPoint]) -> String {
    let cell = |v: Option<f64>| v.map_or_else(String::new, |a| a.to_string());
    let mut out = String::from("threshold,overall,uncooperative,unresponsive,cooperative\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.threshold,
            cell(p.overall_accuracy),
            cell(p.class_accuracy.uncooperative),
            cell(p.class_accuracy.unresponsive),
            cell(p.class_accuracy.cooperative)
        ));
    }
    out
}

fn cmd_evaluate(
    params: &ModelParams,
    manifest_path: &Path,
    cfg: JudgmentConfig,
    report_path: Option<&Path>,
    sweep: Option<&str>,
) -> CliResult<String> {
    let thresholds = sweep.map(parse_sweep).transpose()?;
    let manifest = read_manifest(manifest_path)?;
    if manifest.trials.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: manifest lists no trials",
            manifest_path.display()
        )));
    }
    let records = manifest_trial_paths(&manifest, manifest_path)
        .iter()
        .map(|p| read_trial(p))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<String> = manifest
        .trials
        .iter()
        .map(|e| format!("{}#{}", e.subject_id, e.trial_index))
        .collect();

    let report = evaluate_labeled(&records, &labels, params, &cfg)?;
    let mut stdout = render_report(&report);

    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let report_path = report_path.map_or_else(|| dir.join("report.json"), Path::to_path_buf);
    write_json(&report, &report_path)?;
    stdout.push_str(&format!("\nreport: {}\n", report_path.display()));

    if let Some(thresholds) = thresholds {
        let points = threshold_sweep(&records, params, cfg.delay, &thresholds)?;
        let csv = sweep_csv(&points);
        let sweep_path = report_path.parent().unwrap_or(Path::new(".")).join("sweep.csv");
        std::fs::write(&sweep_path, &csv).map_err(|source| Error::Io {
            path: sweep_path.clone(),
            source,
        })?;
        stdout.push_str(&format!("sweep: {}\n", sweep_path.display()));
    }
    Ok(stdout)
}

fn run(cli: Cli) -> CliResult<String> {
    // Validate judgment overrides before touching any file.
    let judgment = match &cli.command {
        Command::Judge { judgment, .. } | Command::Evaluate { judgment, .. } => Some(judgment.config()?),
        _ => None,
    };
    let params = load_params(cli.params.as_deref())?;
    match cli.command {
        Command::Simulate {
            xi,
            physical,
            verbal,
            timing,
            duration,
            seed,
            subject,
            behavior,
            out,
            name,
            force,
        } => cmd_simulate(
            &params, xi, physical, verbal, timing, duration, seed, subject, behavior, &out, &name, force,
        ),
        Command::Filter { trial, out } => cmd_filter(&params, &trial, out.as_deref()),
        Command::Judge { trial, .. } => cmd_judge(&params, &trial, judgment.expect("validated above")),
        Command::Suite {
            subjects,
            trials,
            seed,
            out,
            behavior,
            force,
        } => cmd_suite(&params, subjects, trials, seed, &out, behavior, force),
        Command::Evaluate {
            manifest,
            report,
            sweep_threshold,
            ..
        } => cmd_evaluate(
            &params,
            &manifest,
            judgment.expect("validated above"),
            report.as_deref(),
            sweep_threshold.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(text) => {
            // A closed pipe (e.g. `| head`) is not an error worth reporting.
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = e.exit_code();
            if code == 3 {
                eprintln!("coop: unjudgeable: {e}");
            } else {
                eprintln!("coop: {e}");
            }
            ExitCode::from(code)
        }
    }
}
