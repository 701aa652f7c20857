//! On-disk formats.
//!
//! A trial is stored as up to three files sharing one basename:
//!
//! * `<base>.csv`: header `t,c_p,c_v,y`, one row per tick, LF endings,
//!   shortest round-trip decimal floats.
//! * `<base>.meta.json`: [`TrialFileHeader`].
//! * `<base>.truth.csv`: header `t,x,x_dot,eta,xi`, simulated trials only.
//!
//! Every write goes through a temp file in the target directory followed by a
//! rename, so readers never observe a half-written file.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{check_uniform_grid, FilterTrace, StateEstimate};
use crate::model::{Cooperativeness, CueSample, ModelParams, StateVector};
use crate::simulator::{BehaviorMode, CueTrace, Provenance, TrialRecord, TrialSpec};

pub const FORMAT_VERSION: u32 = 1;
pub const TRIAL_COLUMNS: [&str; 4] = ["t", "c_p", "c_v", "y"];
pub const TRUTH_COLUMNS: [&str; 5] = ["t", "x", "x_dot", "eta", "xi"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialFileHeader {
    pub format_version: u32,
    pub dt: f64,
    pub subject_id: String,
    #[serde(default)]
    pub requested_xi: Option<Cooperativeness>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<TrialSpec>,
}

pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn truth_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("truth.csv")
}

pub(crate) fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, None, e.to_string()))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::format(path, None, format!("not UTF-8 text: {e}")))
}

// ---------------------------------------------------------------------------
// trials

pub fn write_trial(record: &TrialRecord, path: &Path, force: bool) -> Result<()> {
    if record.is_empty() {
        return Err(Error::InvalidValue {
            field: "measurements",
            reason: "record has no samples".into(),
        });
    }
    record.validate_shape()?;
    if !(record.dt.is_finite() && record.dt > 0.0) {
        return Err(Error::InvalidValue {
            field: "dt",
            reason: format!("must be > 0, got {}", record.dt),
        });
    }
    let meta = meta_path(path);
    let truth = truth_path(path);
    if !force {
        for p in [path, meta.as_path(), truth.as_path()] {
            if p.exists() {
                return Err(Error::AlreadyExists(p.to_path_buf()));
            }
        }
    }

    let mut csv = TRIAL_COLUMNS.join(",");
    csv.push('\n');
    for ((t, cue), y) in record
        .cues
        .times
        .iter()
        .zip(&record.cues.samples)
        .zip(&record.measurements)
    {
        writeln!(csv, "{t},{},{},{y}", cue.c_p, cue.c_v).expect("writing to a String");
    }

    let header = TrialFileHeader {
        format_version: FORMAT_VERSION,
        dt: record.dt,
        subject_id: record.subject_id.clone(),
        requested_xi: record.requested_xi,
        provenance: record.provenance,
        spec: record.spec,
    };

    atomic_write(path, csv.as_bytes())?;
    write_json(&header, &meta)?;
    match &record.truth {
        Some(states) => {
            let mut text = TRUTH_COLUMNS.join(",");
            text.push('\n');
            for (t, s) in record.cues.times.iter().zip(states) {
                writeln!(text, "{t},{},{},{},{}", s.x, s.x_dot, s.eta, s.xi).expect("writing to a String");
            }
            atomic_write(&truth, text.as_bytes())?;
        }
        None if truth.exists() => {
            std::fs::remove_file(&truth).map_err(|e| Error::io(&truth, e))?;
        }
        None => {}
    }
    Ok(())
}

/// Parses a numeric CSV with an exact header into rows of finite floats.
fn read_numeric_csv(path: &Path, columns: &[&str]) -> Result<Vec<Vec<f64>>> {
    let text = read_text(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::format(path, Some(1), e.to_string()))?
        .clone();
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != columns {
        return Err(Error::format(
            path,
            Some(1),
            format!("expected header `{}`, found `{}`", columns.join(","), found.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for result in reader.records() {
        let rec = result.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize);
            Error::format(path, line, format!("malformed row: {e}"))
        })?;
        let line = rec.position().map(|p| p.line() as usize);
        let mut row = Vec::with_capacity(columns.len());
        for (col, field) in columns.iter().zip(rec.iter()) {
            let value: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(path, line, format!("column {col}: `{field}` is not a number")))?;
            if !value.is_finite() {
                return Err(Error::format(
                    path,
                    line,
                    format!("column {col}: non-finite value `{field}`"),
                ));
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::format(path, None, "no data rows"));
    }
    Ok(rows)
}

pub fn read_trial_header(csv_path: &Path) -> Result<TrialFileHeader> {
    let meta = meta_path(csv_path);
    let text = read_text(&meta)?;
    let header: TrialFileHeader =
        serde_json::from_str(&text).map_err(|e| Error::format(&meta, Some(e.line()), e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::format(
            &meta,
            None,
            format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                header.format_version
            ),
        ));
    }
    if !(header.dt.is_finite() && header.dt > 0.0) {
        return Err(Error::format(&meta, None, format!("dt must be > 0, got {}", header.dt)));
    }
    if let (Some(spec), Some(xi)) = (&header.spec, header.requested_xi) {
        if spec.requested_xi != xi {
            return Err(Error::format(
                &meta,
                None,
                "requested_xi disagrees with spec.requested_xi",
            ));
        }
    }
    if let Some(spec) = &header.spec {
        spec.validate().map_err(|e| Error::format(&meta, None, e.to_string()))?;
    }
    Ok(header)
}

pub fn read_trial(path: &Path) -> Result<TrialRecord> {
    let header = read_trial_header(path)?;
    let rows = read_numeric_csv(path, &TRIAL_COLUMNS)?;

    let mut times = Vec::with_capacity(rows.len());
    let mut samples = Vec::with_capacity(rows.len());
    let mut measurements = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let cue = CueSample {
            c_p: row[1],
            c_v: row[2],
        };
        cue.validate()
            .map_err(|e| Error::format(path, Some(i + 2), e.to_string()))?;
        times.push(row[0]);
        samples.push(cue);
        measurements.push(row[3]);
    }
    check_uniform_grid(&times, header.dt).map_err(|e| Error::format(path, None, e.to_string()))?;

    let truth = match header.provenance {
        Provenance::Recorded => None,
        Provenance::Simulated => {
            let tp = truth_path(path);
            if tp.exists() {
                let truth_rows = read_numeric_csv(&tp, &TRUTH_COLUMNS)?;
                if truth_rows.len() != rows.len() {
                    return Err(Error::format(
                        &tp,
                        None,
                        format!("{} rows but trial has {}", truth_rows.len(), rows.len()),
                    ));
                }
                for (i, (tr, t)) in truth_rows.iter().zip(&times).enumerate() {
                    if tr[0] != *t {
                        return Err(Error::format(&tp, Some(i + 2), "time column disagrees with trial file"));
                    }
                }
                Some(
                    truth_rows
                        .iter()
                        .map(|r| StateVector::new(r[1], r[2], r[3], r[4]))
                        .collect(),
                )
            } else {
                None
            }
        }
    };

    Ok(TrialRecord {
        subject_id: header.subject_id,
        requested_xi: header.requested_xi,
        provenance: header.provenance,
        dt: header.dt,
        spec: header.spec,
        cues: CueTrace { times, samples },
        truth,
        measurements,
    })
}

// ---------------------------------------------------------------------------
// params

/// Parses a params JSON object. Returns the params and the names of fields
/// that were missing and filled from defaults.
pub fn parse_params(text: &str, origin: &Path) -> Result<(ModelParams, Vec<&'static str>)> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::format(origin, Some(e.line()), e.to_string()))?;
    let serde_json::Value::Object(map) = value else {
        return Err(Error::format(origin, None, "params file must be a JSON object"));
    };
    if let Some(unknown) = map.keys().find(|k| !ModelParams::FIELD_NAMES.contains(&k.as_str())) {
        return Err(Error::format(origin, None, format!("unknown parameter `{unknown}`")));
    }

    let defaults = serde_json::to_value(ModelParams::default()).expect("params serialise");
    let mut merged = serde_json::Map::new();
    let mut missing = Vec::new();
    for name in ModelParams::FIELD_NAMES {
        match map.get(name) {
            Some(v) if v.is_number() => {
                merged.insert(name.to_string(), v.clone());
            }
            Some(v) => {
                return Err(Error::format(
                    origin,
                    None,
                    format!("parameter `{name}` must be a number, got {v}"),
                ));
            }
            None => {
                missing.push(name);
                merged.insert(name.to_string(), defaults[name].clone());
            }
        }
    }
    let params: ModelParams = serde_json::from_value(serde_json::Value::Object(merged))
        .map_err(|e| Error::format(origin, None, e.to_string()))?;
    params.validate()?;
    Ok((params, missing))
}

pub fn read_params(path: &Path) -> Result<ModelParams> {
    let text = read_text(path)?;
    let (params, missing) = parse_params(&text, path)?;
    if !missing.is_empty() {
        log::warn!(
            "{}: using defaults for missing parameters: {}",
            path.display(),
            missing.join(", ")
        );
    }
    Ok(params)
}

pub fn write_params(params: &ModelParams, path: &Path) -> Result<()> {
    params.validate()?;
    write_json(params, path)
}

// ---------------------------------------------------------------------------
// filter traces

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFile {
    pub format_version: u32,
    pub times: Vec<f64>,
    /// `[x, ẋ, η, ξ]` per tick.
    pub means: Vec<[f64; 4]>,
    /// Row-major 4×4 covariance per tick.
    pub covariances: Vec<[[f64; 4]; 4]>,
    pub innovations: Vec<f64>,
    pub innovation_vars: Vec<f64>,
}

impl From<&FilterTrace> for TraceFile {
    fn from(trace: &FilterTrace) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            times: trace.times.clone(),
            means: trace.estimates.iter().map(|e| e.mean.into()).collect(),
            covariances: trace
                .estimates
                .iter()
                .map(|e| std::array::from_fn(|i| std::array::from_fn(|j| e.cov[(i, j)])))
                .collect(),
            innovations: trace.innovations.clone(),
            innovation_vars: trace.innovation_vars.clone(),
        }
    }
}

impl TraceFile {
    pub fn into_trace(self) -> FilterTrace {
        let estimates = self
            .means
            .iter()
            .zip(&self.covariances)
            .map(|(m, c)| StateEstimate::new(nalgebra::Vector4::from(*m), nalgebra::Matrix4::from_fn(|i, j| c[i][j])))
            .collect();
        FilterTrace {
            times: self.times,
            estimates,
            innovations: self.innovations,
            innovation_vars: self.innovation_vars,
        }
    }
}

pub fn write_trace(trace: &FilterTrace, path: &Path) -> Result<()> {
    write_json(&TraceFile::from(trace), path)
}

pub fn read_trace(path: &Path) -> Result<FilterTrace> {
    let text = read_text(path)?;
    let file: TraceFile =
        serde_json::from_str(&text).map_err(|e| Error::format(path, Some(e.line()), e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::format(
            path,
            None,
            format!("unsupported format_version {}", file.format_version),
        ));
    }
    let n = file.times.len();
    if [
        file.means.len(),
        file.covariances.len(),
        file.innovations.len(),
        file.innovation_vars.len(),
    ]
    .iter()
    .any(|&l| l != n)
    {
        return Err(Error::format(path, None, "trace arrays differ in length"));
    }
    Ok(file.into_trace())
}

pub const PLOT_COLUMNS: [&str; 13] = [
    "t",
    "y",
    "x_hat",
    "x_lo",
    "x_hi",
    "x_dot_hat",
    "eta_hat",
    "eta_lo",
    "eta_hi",
    "xi_hat",
    "xi_lo",
    "xi_hi",
    "innovation",
];

/// Flattens a trace into plot-ready rows with ±2σ bands.
pub fn plot_csv(trace: &FilterTrace, measurements: &[f64]) -> String {
    let mut out = PLOT_COLUMNS.join(",");
    out.push('\n');
    for (i, est) in trace.estimates.iter().enumerate() {
        let band = |k: usize| (est.mean[k] - 2.0 * est.std_dev(k), est.mean[k] + 2.0 * est.std_dev(k));
        let (x_lo, x_hi) = band(0);
        let (eta_lo, eta_hi) = band(2);
        let (xi_lo, xi_hi) = band(3);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            trace.times[i],
            measurements.get(i).copied().unwrap_or(f64::NAN),
            est.mean[0],
            x_lo,
            x_hi,
            est.mean[1],
            est.mean[2],
            eta_lo,
            eta_hi,
            est.mean[3],
            xi_lo,
            xi_hi,
            trace.innovations[i],
        )
        .expect("writing to a String");
    }
    out
}

pub fn write_plot_csv(trace: &FilterTrace, measurements: &[f64], path: &Path) -> Result<()> {
    atomic_write(path, plot_csv(trace, measurements).as_bytes())
}

// ---------------------------------------------------------------------------
// suite manifests

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Trial CSV path, relative to the manifest's directory.
    pub file: String,
    pub subject_id: String,
    pub trial_index: usize,
    pub spec: TrialSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteManifest {
    pub format_version: u32,
    pub master_seed: Option<u64>,
    pub n_subjects: usize,
    pub trials_per_subject: usize,
    pub behavior: BehaviorMode,
    pub params: ModelParams,
    pub trials: Vec<ManifestEntry>,
}

pub fn write_manifest(manifest: &SuiteManifest, path: &Path) -> Result<()> {
    write_json(manifest, path)
}

pub fn read_manifest(path: &Path) -> Result<SuiteManifest> {
    let text = read_text(path)?;
    let manifest: SuiteManifest =
        serde_json::from_str(&text).map_err(|e| Error::format(path, Some(e.line()), e.to_string()))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::format(
            path,
            None,
            format!("unsupported format_version {}", manifest.format_version),
        ));
    }
    Ok(manifest)
}

/// Resolves each manifest entry to a path next to the manifest.
pub fn manifest_trial_paths(manifest: &SuiteManifest, manifest_path: &Path) -> Vec<PathBuf> {
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    manifest.trials.iter().map(|e| base.join(&e.file)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{simulate_trial, PhysicalIntensity, VerbalCue};

    fn sample_record() -> TrialRecord {
        let spec = TrialSpec {
            requested_xi: Cooperativeness::Cooperative,
            physical_intensity: PhysicalIntensity::Hard,
            verbal_cue: VerbalCue::Forward,
            relative_timing: 1,
            duration: 3.0,
            seed: 3,
        };
        let mut rec = simulate_trial(&spec, &ModelParams::default(), BehaviorMode::Model).unwrap();
        rec.subject_id = "S1".into();
        rec
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trial.csv");
        let rec = sample_record();
        write_trial(&rec, &path, false).unwrap();
        let back = read_trial(&path).unwrap();
        assert_eq!(back, rec);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,c_p,c_v,y\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn recorded_trials_have_no_truth() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.csv");
        let mut rec = sample_record();
        rec.provenance = Provenance::Recorded;
        rec.truth = None;
        rec.spec = None;
        write_trial(&rec, &path, false).unwrap();
        assert!(!truth_path(&path).exists());
        assert_eq!(read_trial(&path).unwrap(), rec);
    }

    #[test]
    fn refuses_overwrite_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trial.csv");
        let rec = sample_record();
        write_trial(&rec, &path, false).unwrap();
        assert!(matches!(write_trial(&rec, &path, false), Err(Error::AlreadyExists(_))));
        write_trial(&rec, &path, true).unwrap();
    }

    #[test]
    fn empty_record_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = sample_record();
        rec.measurements.clear();
        rec.cues = CueTrace {
            times: vec![],
            samples: vec![],
        };
        rec.truth = Some(vec![]);
        assert!(write_trial(&rec, &dir.path().join("t.csv"), false).is_err());
    }

    #[test]
    fn params_round_trip_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        write_params(&ModelParams::default(), &path).unwrap();
        assert_eq!(read_params(&path).unwrap(), ModelParams::default());

        let (p, missing) = parse_params(r#"{"r": 4e-6}"#, Path::new("x.json")).unwrap();
        assert_eq!(p.r, 4e-6);
        assert_eq!(p.k1, ModelParams::default().k1);
        assert_eq!(missing.len(), 9);
        assert!(!missing.contains(&"r"));
    }

    #[test]
    fn params_rejections() {
        let origin = Path::new("x.json");
        assert!(matches!(
            parse_params(r#"{"dt": 0}"#, origin),
            Err(Error::InvalidParam { name: "dt", .. })
        ));
        assert!(matches!(
            parse_params(r#"{"gain": 1}"#, origin),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            parse_params(r#"{"k1": "nine"}"#, origin),
            Err(Error::Format { .. })
        ));
        assert!(matches!(parse_params("[1, 2]", origin), Err(Error::Format { .. })));
        assert!(matches!(parse_params("{", origin), Err(Error::Format { .. })));
    }

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rec = sample_record();
        let p = ModelParams::default();
        let trace =
            crate::filter::filter_trial(&rec, &p, StateEstimate::from_first_measurement(rec.measurements[0])).unwrap();
        let path = dir.path().join("trace.json");
        write_trace(&trace, &path).unwrap();
        assert_eq!(read_trace(&path).unwrap(), trace);

        let csv = plot_csv(&trace, &rec.measurements);
        assert_eq!(csv.lines().count(), trace.len() + 1);
        assert!(csv.starts_with("t,y,x_hat"));
    }
}
