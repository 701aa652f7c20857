mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use proptest::prelude::*;

use coop_core::trial_io::{meta_path, parse_params, read_trace, truth_path, write_trace};
use coop_core::*;

const META: &str = r#"{"format_version":1,"dt":0.01,"subject_id":"S1","requested_xi":-1,"provenance":"recorded"}"#;

fn write_pair(dir: &Path, name: &str, csv: &[u8], meta: Option<&str>) -> PathBuf {
    let path = dir.join(format!("{name}.csv"));
    std::fs::write(&path, csv).unwrap();
    if let Some(m) = meta {
        std::fs::write(meta_path(&path), m).unwrap();
    }
    path
}

/// Reads `path` and insists on a structured error, never a panic.
fn rejected(path: &Path) -> Error {
    match catch_unwind(AssertUnwindSafe(|| read_trial(path))) {
        Ok(Err(e)) => e,
        Ok(Ok(r)) => panic!("{} accepted: {} samples", path.display(), r.len()),
        Err(_) => panic!("{} panicked", path.display()),
    }
}

#[test]
fn malformed_trials_yield_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&str, &[u8])] = &[
        ("ragged", b"t,c_p,c_v,y\n0,0,0,0\n0.01,8,0\n"),
        ("extra_column", b"t,c_p,c_v,y\n0,0,0,0,1\n"),
        ("verbal_two", b"t,c_p,c_v,y\n0,0,2,0\n"),
        ("verbal_half", b"t,c_p,c_v,y\n0,0,0.5,0\n"),
        ("nan", b"t,c_p,c_v,y\n0,0,0,NaN\n"),
        ("inf", b"t,c_p,c_v,y\n0,inf,0,0\n"),
        ("word", b"t,c_p,c_v,y\n0,0,0,abc\n"),
        ("blank_cell", b"t,c_p,c_v,y\n0,,0,0\n"),
        ("renamed_header", b"time,c_p,c_v,y\n0,0,0,0\n"),
        ("reordered_header", b"t,c_v,c_p,y\n0,0,0,0\n"),
        ("empty", b""),
        ("header_only", b"t,c_p,c_v,y\n"),
        ("skipped_tick", b"t,c_p,c_v,y\n0,0,0,0\n0.02,0,0,0\n"),
        ("backwards_time", b"t,c_p,c_v,y\n0,0,0,0\n-0.01,0,0,0\n"),
        ("binary", &[0xff, 0xfe, 0x00, 0x12]),
    ];
    for (name, csv) in cases {
        let path = write_pair(dir.path(), name, csv, Some(META));
        let err = rejected(&path);
        assert!(!err.is_io(), "{name}: {err}");
        assert!(!err.to_string().is_empty());
    }
}

#[test]
fn malformed_metadata_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = b"t,c_p,c_v,y\n0,0,0,0\n0.01,0,0,0\n";
    let metas = [
        (
            "version",
            r#"{"format_version":2,"dt":0.01,"subject_id":"","provenance":"recorded"}"#,
        ),
        (
            "negative_dt",
            r#"{"format_version":1,"dt":-0.01,"subject_id":"","provenance":"recorded"}"#,
        ),
        (
            "dt_mismatch",
            r#"{"format_version":1,"dt":0.02,"subject_id":"","provenance":"recorded"}"#,
        ),
        (
            "bad_xi",
            r#"{"format_version":1,"dt":0.01,"subject_id":"","requested_xi":3,"provenance":"recorded"}"#,
        ),
        (
            "unknown_field",
            r#"{"format_version":1,"dt":0.01,"subject_id":"","provenance":"recorded","x":1}"#,
        ),
        (
            "bad_provenance",
            r#"{"format_version":1,"dt":0.01,"subject_id":"","provenance":"guessed"}"#,
        ),
        ("not_json", "format_version = 1"),
        ("truncated", r#"{"format_version":1,"dt":0.01"#),
    ];
    for (name, meta) in metas {
        let path = write_pair(dir.path(), name, csv, Some(meta));
        let err = rejected(&path);
        assert!(!err.is_io(), "{name}: {err}");
    }
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let no_meta = write_pair(dir.path(), "no_meta", b"t,c_p,c_v,y\n0,0,0,0\n", None);
    assert!(rejected(&no_meta).is_io());
    assert!(rejected(&dir.path().join("absent.csv")).is_io());
}

#[test]
fn writing_refuses_to_clobber() {
    let dir = tempfile::tempdir().unwrap();
    let p = ModelParams::default();
    let spec = TrialSpec {
        requested_xi: Cooperativeness::Cooperative,
        physical_intensity: PhysicalIntensity::Soft,
        verbal_cue: VerbalCue::None,
        relative_timing: 0,
        duration: 1.5,
        seed: 2,
    };
    let record = simulate_trial(&spec, &p, BehaviorMode::Model).unwrap();
    let path = dir.path().join("t.csv");
    write_trial(&record, &path, false).unwrap();
    assert!(matches!(
        write_trial(&record, &path, false),
        Err(Error::AlreadyExists(_))
    ));
    write_trial(&record, &path, true).unwrap();
    assert!(truth_path(&path).exists());

    // Rewriting as a recorded trial drops the stale truth file.
    let recorded = TrialRecord {
        provenance: Provenance::Recorded,
        truth: None,
        spec: None,
        ..record
    };
    write_trial(&recorded, &path, true).unwrap();
    assert!(!truth_path(&path).exists());
    assert_eq!(read_trial(&path).unwrap(), recorded);
}

#[test]
fn params_files_are_checked() {
    let origin = Path::new("params.json");
    let (p, missing) = parse_params(r#"{"k4": 5.0}"#, origin).unwrap();
    assert_eq!(p.k4, 5.0);
    assert_eq!(missing.len(), ModelParams::FIELD_NAMES.len() - 1);
    assert!(parse_params(r#"{"k5": 1}"#, origin).is_err());
    assert!(parse_params(r#"{"k1": "nine"}"#, origin).is_err());
    assert!(parse_params(r#"{"dt": 0}"#, origin).is_err());
    assert!(parse_params("[1, 2]", origin).is_err());
}

#[test]
fn golden_fixture_judges_cooperative() {
    let path = common::fixtures_dir().join("coop_hard_forward.csv");
    let record = read_trial(&path).unwrap();
    assert_eq!(record.requested_xi, Some(Cooperativeness::Cooperative));
    assert_eq!(record.len(), 500);
    assert!(record.truth.is_some());
    let p = ModelParams::default();
    let trace = filter_trial(
        &record,
        &p,
        StateEstimate::from_first_measurement(record.measurements[0]),
    )
    .unwrap();
    let v = judge(&trace, &record.cues, &JudgmentConfig::default()).unwrap();
    assert_eq!(v.value, Cooperativeness::Cooperative);
    assert!(v.sampled_xi < 0.99);

    // The file is exactly what the simulator produces for its recorded spec.
    let spec = record.spec.unwrap();
    let mut again = simulate_trial(&spec, &p, BehaviorMode::Model).unwrap();
    again.subject_id = record.subject_id.clone();
    assert_eq!(again, record);
}

#[test]
fn trace_files_round_trip() {
    let path = common::fixtures_dir().join("coop_hard_forward.csv");
    let record = read_trial(&path).unwrap();
    let p = ModelParams::default();
    let trace = filter_trial(
        &record,
        &p,
        StateEstimate::from_first_measurement(record.measurements[0]),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.json");
    write_trace(&trace, &out).unwrap();
    assert_eq!(read_trace(&out).unwrap(), trace);
}

fn any_spec() -> impl Strategy<Value = TrialSpec> {
    (0usize..3, 0usize..3, 0usize..3, -4i8..=4, 2.0f64..6.0, any::<u64>()).prop_map(
        |(xi, p, v, timing, duration, seed)| TrialSpec {
            requested_xi: Cooperativeness::ALL[xi],
            physical_intensity: PhysicalIntensity::ALL[p],
            verbal_cue: VerbalCue::ALL[v],
            relative_timing: timing,
            duration,
            seed,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn simulated_trials_round_trip_exactly(spec in any_spec(), subject in "[A-Za-z0-9_ ,\"]{0,12}") {
        let p = ModelParams::default();
        // Some specs do not fit their cues into the duration; those are not trials.
        let Ok(mut record) = simulate_trial(&spec, &p, BehaviorMode::Model) else {
            return Ok(());
        };
        record.subject_id = subject;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trial.csv");
        write_trial(&record, &path, false).unwrap();
        prop_assert_eq!(read_trial(&path).unwrap(), record);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..400)) {
        let dir = tempfile::tempdir().unwrap();
        let mut csv = b"t,c_p,c_v,y\n".to_vec();
        csv.extend(&bytes);
        let path = write_pair(dir.path(), "fuzz", &csv, Some(META));
        let outcome = catch_unwind(AssertUnwindSafe(|| read_trial(&path)));
        prop_assert!(outcome.is_ok());
    }
}
