//! Joint and conditional tallies of requested versus judged cooperativeness.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{filter_trial, StateEstimate};
use crate::judgment::{classify, detect_cue_onset, judge, sample_index, JudgmentConfig, Verdict};
use crate::model::{Cooperativeness, ModelParams};
use crate::simulator::TrialRecord;

/// Rows are requested ξ, columns estimated ξ, both ordered (-1, 0, +1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 3]; 3]) -> Self {
        Self { counts }
    }

    pub fn record(&mut self, requested: Cooperativeness, estimated: Cooperativeness) {
        self.counts[requested.index()][estimated.index()] += 1;
    }

    pub fn get(&self, requested: Cooperativeness, estimated: Cooperativeness) -> u64 {
        self.counts[requested.index()][estimated.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, row: usize) -> u64 {
        self.counts[row].iter().sum()
    }

    pub fn col_sum(&self, col: usize) -> u64 {
        self.counts.iter().map(|r| r[col]).sum()
    }

    pub fn transpose(&self) -> Self {
        Self {
            counts: std::array::from_fn(|i| std::array::from_fn(|j| self.counts[j][i])),
        }
    }

    /// Fraction of trials requested as `class` that were judged as `class`.
    pub fn class_accuracy(&self, class: Cooperativeness) -> Option<f64> {
        let i = class.index();
        let n = self.row_sum(i);
        (n > 0).then(|| self.counts[i][i] as f64 / n as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        let hits: u64 = (0..3).map(|i| self.counts[i][i]).sum();
        (n > 0).then(|| hits as f64 / n as f64)
    }
}

/// Tallies `(requested, estimated)` pairs given as raw values in {-1, 0, 1}.
pub fn confusion_matrix<I>(pairs: I) -> Result<ConfusionMatrix>
where
    I: IntoIterator<Item = (i8, i8)>,
{
    let mut m = ConfusionMatrix::default();
    for (req, est) in pairs {
        m.record(Cooperativeness::try_from(req)?, Cooperativeness::try_from(est)?);
    }
    Ok(m)
}

/// Percentage rounded to one decimal, half away from zero, in exact integer arithmetic.
pub fn percent_one_decimal(part: u64, whole: u64) -> f64 {
    assert!(whole > 0);
    let tenths = (2000 * part + whole) / (2 * whole);
    tenths as f64 / 10.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    Requested,
    Estimated,
}

/// Conditional distribution in percent. Undefined (zero-count) slices are `None`.
///
/// `slices[k]` is the distribution given the k-th condition value; for
/// conditioning on the estimate the slices are the matrix columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    pub conditioned_on: Conditioning,
    pub slices: [Option<[f64; 3]>; 3],
}

impl ConditionalTable {
    /// Percentage at (requested, estimated) regardless of orientation.
    pub fn at(&self, requested: Cooperativeness, estimated: Cooperativeness) -> Option<f64> {
        match self.conditioned_on {
            Conditioning::Requested => self.slices[requested.index()].map(|s| s[estimated.index()]),
            Conditioning::Estimated => self.slices[estimated.index()].map(|s| s[requested.index()]),
        }
    }
}

fn normalize_rows(counts: &[[u64; 3]; 3]) -> [Option<[f64; 3]>; 3] {
    std::array::from_fn(|i| {
        let n: u64 = counts[i].iter().sum();
        (n > 0).then(|| std::array::from_fn(|j| percent_one_decimal(counts[i][j], n)))
    })
}

pub fn conditional_by_requested(m: &ConfusionMatrix) -> ConditionalTable {
    ConditionalTable {
        conditioned_on: Conditioning::Requested,
        slices: normalize_rows(&m.counts),
    }
}

pub fn conditional_by_estimated(m: &ConfusionMatrix) -> ConditionalTable {
    ConditionalTable {
        conditioned_on: Conditioning::Estimated,
        slices: normalize_rows(&m.transpose().counts),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedTrial {
    pub label: String,
    pub requested: Cooperativeness,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub label: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub uncooperative: Option<f64>,
    pub unresponsive: Option<f64>,
    pub cooperative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: JudgmentConfig,
    pub confusion: ConfusionMatrix,
    pub by_requested: ConditionalTable,
    pub by_estimated: ConditionalTable,
    pub class_accuracy: ClassAccuracy,
    pub overall_accuracy: Option<f64>,
    pub judged: Vec<JudgedTrial>,
    pub excluded: Vec<Exclusion>,
}

/// Default label for the i-th record of a suite.
pub fn record_label(record: &TrialRecord, index: usize) -> String {
    if record.subject_id.is_empty() {
        format!("#{index}")
    } else {
        format!("{}#{index}", record.subject_id)
    }
}

fn judge_record(
    record: &TrialRecord,
    params: &ModelParams,
    cfg: &JudgmentConfig,
) -> Result<(Cooperativeness, Verdict), String> {
    let requested = record
        .requested_xi
        .ok_or_else(|| "no requested cooperativeness".to_string())?;
    let y0 = *record.measurements.first().ok_or_else(|| "no samples".to_string())?;
    let trace = filter_trial(record, params, StateEstimate::from_first_measurement(y0)).map_err(|e| e.to_string())?;
    let verdict = judge(&trace, &record.cues, cfg).map_err(|e| e.to_string())?;
    Ok((requested, verdict))
}

/// Filters and judges every record. Per-trial failures become exclusions.
pub fn evaluate_suite(records: &[TrialRecord], params: &ModelParams, cfg: &JudgmentConfig) -> Result<EvaluationReport> {
    let labels: Vec<String> = records.iter().enumerate().map(|(i, r)| record_label(r, i)).collect();
    evaluate_labeled(records, &labels, params, cfg)
}

pub fn evaluate_labeled(
    records: &[TrialRecord],
    labels: &[String],
    params: &ModelParams,
    cfg: &JudgmentConfig,
) -> Result<EvaluationReport> {
    params.validate_for_filtering()?;
    cfg.validate()?;
    if labels.len() != records.len() {
        return Err(Error::LengthMismatch(format!(
            "{} records, {} labels",
            records.len(),
            labels.len()
        )));
    }
    let outcomes: Vec<_> = records.par_iter().map(|r| judge_record(r, params, cfg)).collect();

    let mut confusion = ConfusionMatrix::default();
    let mut judged = Vec::new();
    let mut excluded = Vec::new();
    for (label, outcome) in labels.iter().zip(outcomes) {
        match outcome {
            Ok((requested, verdict)) => {
                confusion.record(requested, verdict.value);
                judged.push(JudgedTrial {
                    label: label.clone(),
                    requested,
                    verdict,
                });
            }
            Err(reason) => excluded.push(Exclusion {
                label: label.clone(),
                reason,
            }),
        }
    }
    Ok(EvaluationReport {
        config: *cfg,
        by_requested: conditional_by_requested(&confusion),
        by_estimated: conditional_by_estimated(&confusion),
        class_accuracy: ClassAccuracy {
            uncooperative: confusion.class_accuracy(Cooperativeness::Uncooperative),
            unresponsive: confusion.class_accuracy(Cooperativeness::Unresponsive),
            cooperative: confusion.class_accuracy(Cooperativeness::Cooperative),
        },
        overall_accuracy: confusion.accuracy(),
        confusion,
        judged,
        excluded,
    })
}

/// Thresholds `lo, lo + step, ...` up to `hi`; `floor((hi - lo) / step) + 1` values.
pub fn sweep_thresholds(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) || !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::InvalidValue {
            field: "threshold sweep",
            reason: format!("need lo <= hi and step > 0, got {lo}:{hi}:{step}"),
        });
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let values: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
    for &t in &values {
        JudgmentConfig::new(0.0, t)?;
    }
    Ok(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub overall_accuracy: Option<f64>,
    pub class_accuracy: ClassAccuracy,
}

/// Accuracy as a function of threshold at a fixed delay. Each record is
/// filtered once; unjudgeable records are skipped.
pub fn threshold_sweep(
    records: &[TrialRecord],
    params: &ModelParams,
    delay: f64,
    thresholds: &[f64],
) -> Result<Vec<SweepPoint>> {
    params.validate_for_filtering()?;
    let samples: Vec<(Cooperativeness, f64)> = records
        .par_iter()
        .filter_map(|r| {
            let requested = r.requested_xi?;
            let y0 = *r.measurements.first()?;
            let trace = filter_trial(r, params, StateEstimate::from_first_measurement(y0)).ok()?;
            let onset = detect_cue_onset(&r.cues).ok()?;
            let idx = sample_index(&trace.times, onset, delay).ok()?;
            Some((requested, trace.estimates[idx].xi()))
        })
        .collect();
    thresholds
        .iter()
        .map(|&threshold| {
            JudgmentConfig::new(delay, threshold)?;
            let mut m = ConfusionMatrix::default();
            for &(req, xi) in &samples {
                m.record(req, classify(xi, threshold));
            }
            Ok(SweepPoint {
                threshold,
                overall_accuracy: m.accuracy(),
                class_accuracy: ClassAccuracy {
                    uncooperative: m.class_accuracy(Cooperativeness::Uncooperative),
                    unresponsive: m.class_accuracy(Cooperativeness::Unresponsive),
                    cooperative: m.class_accuracy(Cooperativeness::Cooperative),
                },
            })
        })
        .collect()
}

const CLASS_NAMES: [&str; 3] = ["uncooperative (-1)", "unresponsive (0)", "cooperative (+1)"];

/// Joint counts, rows requested, columns estimated.
pub fn render_counts(m: &ConfusionMatrix) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "Trials by requested (rows) and estimated (columns) cooperativeness, N={}",
        m.total()
    )
    .unwrap();
    writeln!(
        out,
        "{:<20}{:>8}{:>8}{:>8}{:>8}",
        "requested \\ est.", "-1", "0", "+1", "total"
    )
    .unwrap();
    for (i, name) in CLASS_NAMES.iter().enumerate() {
        let r = m.counts[i];
        writeln!(out, "{:<20}{:>8}{:>8}{:>8}{:>8}", name, r[0], r[1], r[2], m.row_sum(i)).unwrap();
    }
    writeln!(
        out,
        "{:<20}{:>8}{:>8}{:>8}{:>8}",
        "total",
        m.col_sum(0),
        m.col_sum(1),
        m.col_sum(2),
        m.total()
    )
    .unwrap();
    out
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |p| format!("{p:.1}%"))
}

/// Conditional table laid out with requested ξ as rows in both orientations.
pub fn render_conditional(table: &ConditionalTable) -> String {
    let mut out = String::new();
    let title = match table.conditioned_on {
        Conditioning::Requested => "Estimated cooperativeness given requested (rows sum to 100%)",
        Conditioning::Estimated => "Requested cooperativeness given estimated (columns sum to 100%)",
    };
    writeln!(out, "{title}").unwrap();
    writeln!(out, "{:<20}{:>9}{:>9}{:>9}", "requested \\ est.", "-1", "0", "+1").unwrap();
    for (i, name) in CLASS_NAMES.iter().enumerate() {
        let req = Cooperativeness::ALL[i];
        let cells: Vec<String> = Cooperativeness::ALL
            .iter()
            .map(|&est| fmt_pct(table.at(req, est)))
            .collect();
        writeln!(out, "{:<20}{:>9}{:>9}{:>9}", name, cells[0], cells[1], cells[2]).unwrap();
    }
    out
}

pub fn render_report(report: &EvaluationReport) -> String {
    let mut out = render_counts(&report.confusion);
    out.push('\n');
    out.push_str(&render_conditional(&report.by_requested));
    out.push('\n');
    out.push_str(&render_conditional(&report.by_estimated));
    out.push('\n');
    writeln!(
        out,
        "overall accuracy: {}",
        fmt_pct(report.overall_accuracy.map(|a| a * 100.0))
    )
    .unwrap();
    if !report.excluded.is_empty() {
        writeln!(out, "excluded {} trial(s):", report.excluded.len()).unwrap();
        for e in &report.excluded {
            writeln!(out, "  {}: {}", e.label, e.reason).unwrap();
        }
    }
    out
}
