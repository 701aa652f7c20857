//! Estimating a care recipient's cooperativeness from cue-response motion.
//!
//! The pipeline is: [`simulator`] (or recorded data via [`trial_io`]) →
//! [`filter`] over the [`model`]'s time-variant system → [`judgment`] of the
//! filtered ξ̂ → [`evaluation`] across a suite of trials.

pub mod error;
pub mod evaluation;
pub mod filter;
pub mod judgment;
pub mod model;
pub mod simulator;
pub mod trial_io;

pub use error::{Error, Result};
pub use evaluation::{
    conditional_by_estimated, conditional_by_requested, confusion_matrix, evaluate_suite, ConditionalTable,
    ConfusionMatrix, EvaluationReport,
};
pub use filter::{filter_trial, filter_trial_with, predict, update, CovarianceUpdate, FilterTrace, StateEstimate};
pub use judgment::{detect_cue_onset, judge, JudgmentConfig, Verdict};
pub use model::{
    assemble_transition, measure, step_truth, Cooperativeness, CueSample, ModelParams, NoiseDraw, StateVector,
    TransitionMatrices,
};
pub use simulator::{
    generate_cue_schedule, generate_trial_suite, simulate_trial, simulate_trial_with, BehaviorMode, CueTrace,
    PhysicalIntensity, Provenance, SimulationOptions, TrialRecord, TrialSpec, VerbalCue,
};
pub use trial_io::{read_params, read_trial, write_params, write_trial};
