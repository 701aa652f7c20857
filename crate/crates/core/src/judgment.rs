//! Delay-and-threshold judgment of the filtered cooperativeness.
//!
//! ξ̂ is sampled once, at the first tick at or after `onset + delay`, and
//! mapped through a symmetric dead band:
//!
//! ```text
//!   -1        |         0          |        +1
//! ------------]--------------------[------------  ξ̂
//!        -threshold            +threshold
//! ```
//!
//! Both band edges are inclusive toward the ±1 verdicts. Only the sampled
//! tick matters; the rest of the trajectory is ignored.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterTrace;
use crate::model::Cooperativeness;
use crate::simulator::CueTrace;

/// Slack when comparing tick times against `onset + delay`.
const SAMPLE_TIME_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgmentConfig {
    /// Seconds after cue onset.
    pub delay: f64,
    pub threshold: f64,
}

impl Default for JudgmentConfig {
    fn default() -> Self {
        Self {
            delay: 0.75,
            threshold: 0.3,
        }
    }
}

impl JudgmentConfig {
    pub fn new(delay: f64, threshold: f64) -> Result<Self> {
        let cfg = Self { delay, threshold };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delay.is_finite() && self.delay >= 0.0) {
            return Err(Error::InvalidValue {
                field: "delay",
                reason: format!("must be >= 0, got {}", self.delay),
            });
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidValue {
                field: "threshold",
                reason: format!("must lie in (0, 1), got {}", self.threshold),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: Cooperativeness,
    pub sampled_xi: f64,
    pub sample_time: f64,
}

/// Time of the first tick carrying a nonzero push or verbal symbol.
pub fn detect_cue_onset(cues: &CueTrace) -> Result<f64> {
    cues.samples
        .iter()
        .zip(&cues.times)
        .find(|(c, _)| c.is_active())
        .map(|(_, &t)| t)
        .ok_or(Error::NoCue)
}

pub fn classify(xi_hat: f64, threshold: f64) -> Cooperativeness {
    if xi_hat >= threshold {
        Cooperativeness::Cooperative
    } else if xi_hat <= -threshold {
        Cooperativeness::Uncooperative
    } else {
        Cooperativeness::Unresponsive
    }
}

/// Index of the tick whose ξ̂ the rule samples.
pub fn sample_index(times: &[f64], onset: f64, delay: f64) -> Result<usize> {
    let target = onset + delay;
    times
        .iter()
        .position(|&t| t >= target - SAMPLE_TIME_TOLERANCE)
        .ok_or_else(|| Error::TraceTooShort {
            required: target,
            available: times.last().copied().unwrap_or(f64::NEG_INFINITY),
        })
}

pub fn judge(trace: &FilterTrace, cues: &CueTrace, cfg: &JudgmentConfig) -> Result<Verdict> {
    cfg.validate()?;
    let onset = detect_cue_onset(cues)?;
    let idx = sample_index(&trace.times, onset, cfg.delay)?;
    let sampled_xi = trace.estimates[idx].xi();
    Ok(Verdict {
        value: classify(sampled_xi, cfg.threshold),
        sampled_xi,
        sample_time: trace.times[idx],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::StateEstimate;
    use crate::model::CueSample;
    use nalgebra::{Matrix4, Vector4};
    use proptest::prelude::*;

    const DT: f64 = 0.01;

    fn cue_trace(n: usize, cues: &[(usize, CueSample)]) -> CueTrace {
        let mut samples = vec![CueSample::NONE; n];
        for &(i, c) in cues {
            samples[i] = c;
        }
        CueTrace {
            times: (0..n).map(|i| i as f64 * DT).collect(),
            samples,
        }
    }

    fn trace_from_xi(xi: &[f64]) -> FilterTrace {
        FilterTrace {
            times: (0..xi.len()).map(|i| i as f64 * DT).collect(),
            estimates: xi
                .iter()
                .map(|&v| StateEstimate::new(Vector4::new(0.0, 0.0, 0.0, v), Matrix4::identity()))
                .collect(),
            innovations: vec![0.0; xi.len()],
            innovation_vars: vec![1.0; xi.len()],
        }
    }

    #[test]
    fn onset_of_push() {
        let cues = cue_trace(
            200,
            &[
                (50, CueSample { c_p: 8.0, c_v: 0.0 }),
                (51, CueSample { c_p: 8.0, c_v: 0.0 }),
            ],
        );
        assert!((detect_cue_onset(&cues).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn onset_is_earliest_cue() {
        let cues = cue_trace(
            200,
            &[
                (30, CueSample { c_p: 0.0, c_v: 1.0 }),
                (50, CueSample { c_p: 20.0, c_v: 0.0 }),
            ],
        );
        assert!((detect_cue_onset(&cues).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn no_cue_is_an_error() {
        assert!(matches!(detect_cue_onset(&cue_trace(100, &[])), Err(Error::NoCue)));
    }

    #[test]
    fn classification_points() {
        assert_eq!(classify(0.5, 0.3), Cooperativeness::Cooperative);
        assert_eq!(classify(0.0, 0.3), Cooperativeness::Unresponsive);
        assert_eq!(classify(-0.3, 0.3), Cooperativeness::Uncooperative);
        assert_eq!(classify(0.3, 0.3), Cooperativeness::Cooperative);
        assert_eq!(classify(0.2999, 0.3), Cooperativeness::Unresponsive);
    }

    #[test]
    fn samples_first_tick_at_or_after_delay() {
        let cues = cue_trace(200, &[(50, CueSample { c_p: 20.0, c_v: 0.0 })]);
        let xi: Vec<f64> = (0..200).map(|i| if i == 125 { 0.5 } else { 0.0 }).collect();
        let v = judge(&trace_from_xi(&xi), &cues, &JudgmentConfig::default()).unwrap();
        assert_eq!(v.value, Cooperativeness::Cooperative);
        assert_eq!(v.sampled_xi, 0.5);
        assert!((v.sample_time - 1.25).abs() < 1e-12);
    }

    #[test]
    fn short_trace_reports_required_duration() {
        let cues = cue_trace(100, &[(50, CueSample { c_p: 20.0, c_v: 0.0 })]);
        match judge(&trace_from_xi(&[0.0; 100]), &cues, &JudgmentConfig::default()) {
            Err(Error::TraceTooShort { required, .. }) => assert!((required - 1.25).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_invariants() {
        assert!(JudgmentConfig::new(-0.1, 0.3).is_err());
        assert!(JudgmentConfig::new(0.75, 0.0).is_err());
        assert!(JudgmentConfig::new(0.75, 1.0).is_err());
        assert!(JudgmentConfig::new(0.7, 0.3).is_ok());
    }

    proptest! {
        #[test]
        fn monotone_in_xi(a in -3.0f64..3.0, b in -3.0f64..3.0, thr in 0.01f64..0.99) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(classify(lo, thr) <= classify(hi, thr));
        }

        #[test]
        fn antisymmetric(x in -3.0f64..3.0, thr in 0.01f64..0.99) {
            prop_assert_eq!(classify(-x, thr).value(), -classify(x, thr).value());
        }

        #[test]
        fn only_sampled_tick_matters(
            xi in proptest::collection::vec(-2.0f64..2.0, 200),
            noise in proptest::collection::vec(-2.0f64..2.0, 200),
        ) {
            let cues = cue_trace(200, &[(40, CueSample { c_p: 0.0, c_v: -1.0 })]);
            let cfg = JudgmentConfig::default();
            let base = judge(&trace_from_xi(&xi), &cues, &cfg).unwrap();
            let idx = 40 + 75;
            let mut perturbed = noise.clone();
            perturbed[idx] = xi[idx];
            let other = judge(&trace_from_xi(&perturbed), &cues, &cfg).unwrap();
            prop_assert_eq!(base, other);

            let negated: Vec<f64> = xi.iter().map(|v| -v).collect();
            let neg = judge(&trace_from_xi(&negated), &cues, &cfg).unwrap();
            prop_assert_eq!(neg.value.value(), -base.value.value());
        }
    }
}
