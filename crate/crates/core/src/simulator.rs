//! Synthetic trials: cue schedules over the experimental grid and simulated
//! care-recipient responses.
//!
//! Every trial owns its RNG stream, seeded from `TrialSpec::seed`, so trials
//! can be generated in any order or in parallel with identical results.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{measure, step_truth, Cooperativeness, CueSample, ModelParams, NoiseDraw, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysicalIntensity {
    None,
    Soft,
    Hard,
}

impl PhysicalIntensity {
    pub const ALL: [PhysicalIntensity; 3] = [Self::None, Self::Soft, Self::Hard];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerbalCue {
    None,
    Back,
    Forward,
}

impl VerbalCue {
    pub const ALL: [VerbalCue; 3] = [Self::None, Self::Back, Self::Forward];

    pub fn symbol(self) -> f64 {
        match self {
            VerbalCue::None => 0.0,
            VerbalCue::Back => -1.0,
            VerbalCue::Forward => 1.0,
        }
    }
}

/// One cell of the experimental grid plus the trial's RNG seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub requested_xi: Cooperativeness,
    pub physical_intensity: PhysicalIntensity,
    pub verbal_cue: VerbalCue,
    /// Verbal onset minus physical onset, whole seconds; only used when both cues exist.
    pub relative_timing: i8,
    /// Seconds.
    pub duration: f64,
    pub seed: u64,
}

impl TrialSpec {
    pub const DEFAULT_DURATION: f64 = 5.0;
    pub const TIMING_RANGE: std::ops::RangeInclusive<i8> = -4..=4;

    pub fn validate(&self) -> Result<()> {
        if !Self::TIMING_RANGE.contains(&self.relative_timing) {
            return Err(Error::InvalidValue {
                field: "relative_timing",
                reason: format!("{} is outside [-4, 4]", self.relative_timing),
            });
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidValue {
                field: "duration",
                reason: format!("must be positive, got {}", self.duration),
            });
        }
        Ok(())
    }

    /// A trial with no cue at all cannot be judged.
    pub fn is_judgeable(&self) -> bool {
        self.physical_intensity != PhysicalIntensity::None || self.verbal_cue != VerbalCue::None
    }

    /// True when both cue kinds are present (relative timing matters).
    pub fn has_both_cues(&self) -> bool {
        self.physical_intensity != PhysicalIntensity::None && self.verbal_cue != VerbalCue::None
    }
}

/// Cue waveforms. The magnitudes are stand-ins for "soft" and "hard" pushes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CueShape {
    /// N.
    pub soft_force: f64,
    /// N.
    pub hard_force: f64,
    /// Length of the rectangular push, s.
    pub pulse_duration: f64,
    /// Onset of the earliest cue, s.
    pub lead_time: f64,
}

impl Default for CueShape {
    fn default() -> Self {
        Self {
            soft_force: 8.0,
            hard_force: 20.0,
            pulse_duration: 0.5,
            lead_time: 0.5,
        }
    }
}

impl CueShape {
    pub fn force(&self, intensity: PhysicalIntensity) -> f64 {
        match intensity {
            PhysicalIntensity::None => 0.0,
            PhysicalIntensity::Soft => self.soft_force,
            PhysicalIntensity::Hard => self.hard_force,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueTrace {
    pub times: Vec<f64>,
    pub samples: Vec<CueSample>,
}

impl CueTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Simulated,
    Recorded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub subject_id: String,
    pub requested_xi: Option<Cooperativeness>,
    pub provenance: Provenance,
    pub dt: f64,
    /// Present for simulated trials.
    pub spec: Option<TrialSpec>,
    pub cues: CueTrace,
    /// Ground truth; absent for recorded data.
    pub truth: Option<Vec<StateVector>>,
    /// Measured torso position, m.
    pub measurements: Vec<f64>,
}

impl TrialRecord {
    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    /// Checks that every series shares one time grid.
    pub fn validate_shape(&self) -> Result<()> {
        let n = self.measurements.len();
        if self.cues.times.len() != n || self.cues.samples.len() != n {
            return Err(Error::LengthMismatch(format!(
                "{} measurements vs {} cue samples / {} timestamps",
                n,
                self.cues.samples.len(),
                self.cues.times.len()
            )));
        }
        if let Some(truth) = &self.truth {
            if truth.len() != n {
                return Err(Error::LengthMismatch(format!(
                    "{} measurements vs {} truth states",
                    n,
                    truth.len()
                )));
            }
        }
        Ok(())
    }
}

/// How the simulated subject reacts to cues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorMode {
    /// Exactly the model the filter assumes.
    #[default]
    Model,
    /// Uncooperative subjects ignore verbal cues (η does not move) but
    /// still resist pushes.
    FrozenUncooperative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    pub behavior: BehaviorMode,
    pub shape: CueShape,
    /// Draw `w_x`, `w_η` (and `w_ξ` if enabled).
    pub process_noise: bool,
    pub measurement_noise: bool,
    /// Let ξ random-walk with `q_xi`; off by default so the requested ξ holds.
    pub xi_noise: bool,
    /// Overrides the rest state `(0, 0, 0, requested ξ)`.
    pub initial_state: Option<StateVector>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            behavior: BehaviorMode::Model,
            shape: CueShape::default(),
            process_noise: true,
            measurement_noise: true,
            xi_noise: false,
            initial_state: None,
        }
    }
}

impl SimulationOptions {
    pub fn noiseless() -> Self {
        Self {
            process_noise: false,
            measurement_noise: false,
            ..Self::default()
        }
    }
}

fn tick_count(duration: f64, dt: f64) -> usize {
    (duration / dt).round() as usize
}

fn tick_of(t: f64, dt: f64) -> usize {
    (t / dt).round() as usize
}

pub fn generate_cue_schedule(spec: &TrialSpec, params: &ModelParams) -> Result<CueTrace> {
    generate_cue_schedule_with(spec, params, &CueShape::default())
}

/// Rectangular push and one-tick verbal impulse. The earlier cue starts at
/// `shape.lead_time`; the later one follows by `|relative_timing|` seconds.
pub fn generate_cue_schedule_with(spec: &TrialSpec, params: &ModelParams, shape: &CueShape) -> Result<CueTrace> {
    spec.validate()?;
    params.validate()?;
    let dt = params.dt;
    let n = tick_count(spec.duration, dt);
    let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let mut samples = vec![CueSample::NONE; n];

    let lag = f64::from(spec.relative_timing.unsigned_abs());
    let (physical_onset, verbal_onset) = if !spec.has_both_cues() {
        (shape.lead_time, shape.lead_time)
    } else if spec.relative_timing >= 0 {
        (shape.lead_time, shape.lead_time + lag)
    } else {
        (shape.lead_time + lag, shape.lead_time)
    };

    if spec.physical_intensity != PhysicalIntensity::None {
        let start = tick_of(physical_onset, dt);
        let end = start + tick_of(shape.pulse_duration, dt);
        if end > n {
            return Err(Error::CuePlacement(format!(
                "push [{physical_onset}, {}) s does not fit in a {} s trial",
                physical_onset + shape.pulse_duration,
                spec.duration
            )));
        }
        let force = shape.force(spec.physical_intensity);
        for s in &mut samples[start..end] {
            s.c_p = force;
        }
    }
    if spec.verbal_cue != VerbalCue::None {
        let tick = tick_of(verbal_onset, dt);
        if tick >= n {
            return Err(Error::CuePlacement(format!(
                "verbal cue at {verbal_onset} s falls outside a {} s trial",
                spec.duration
            )));
        }
        samples[tick].c_v = spec.verbal_cue.symbol();
    }
    Ok(CueTrace { times, samples })
}

pub fn simulate_trial(spec: &TrialSpec, params: &ModelParams, behavior: BehaviorMode) -> Result<TrialRecord> {
    simulate_trial_with(
        spec,
        params,
        &SimulationOptions {
            behavior,
            ..SimulationOptions::default()
        },
    )
}

pub fn simulate_trial_with(spec: &TrialSpec, params: &ModelParams, opts: &SimulationOptions) -> Result<TrialRecord> {
    let cues = generate_cue_schedule_with(spec, params, &opts.shape)?;
    let n = cues.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let sd = |var: f64, on: bool| if on { var.sqrt() } else { 0.0 };
    let sd_v = sd(params.r, opts.measurement_noise);
    let sd_x = sd(params.dt * params.q_x, opts.process_noise);
    let sd_eta = sd(params.dt * params.q_eta, opts.process_noise);
    let sd_xi = sd(params.dt * params.q_xi, opts.process_noise && opts.xi_noise);

    let frozen =
        opts.behavior == BehaviorMode::FrozenUncooperative && spec.requested_xi == Cooperativeness::Uncooperative;

    let mut state = opts
        .initial_state
        .unwrap_or_else(|| StateVector::at_rest(spec.requested_xi));
    let mut truth = Vec::with_capacity(n);
    let mut measurements = Vec::with_capacity(n);
    for (t, cue) in cues.samples.iter().enumerate() {
        // Draw order is part of the determinism contract: v_t, then w_x, w_η, w_ξ.
        let v: f64 = rng.sample(StandardNormal);
        measurements.push(measure(&state, sd_v * v));
        truth.push(state);
        let wx: f64 = rng.sample(StandardNormal);
        let weta: f64 = rng.sample(StandardNormal);
        let wxi: f64 = rng.sample(StandardNormal);
        if t + 1 == n {
            break;
        }
        let felt = if frozen { CueSample { c_v: 0.0, ..*cue } } else { *cue };
        let noise = NoiseDraw {
            w_x: sd_x * wx,
            w_eta: sd_eta * weta,
            w_xi: sd_xi * wxi,
        };
        state = step_truth(state, felt, params, noise).map_err(|e| e.at_tick(t))?;
    }

    Ok(TrialRecord {
        subject_id: String::new(),
        requested_xi: Some(spec.requested_xi),
        provenance: Provenance::Simulated,
        dt: params.dt,
        spec: Some(*spec),
        cues,
        truth: Some(truth),
        measurements,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub subject_id: String,
    /// Position within the subject's trial list.
    pub trial_index: usize,
    pub spec: TrialSpec,
}

/// Draws one list of trial settings uniformly over the grid and replays it
/// for every subject, each subject getting fresh noise seeds.
pub fn generate_trial_suite(n_subjects: usize, trials_per_subject: usize, master_seed: u64) -> Result<Vec<SuiteEntry>> {
    if n_subjects == 0 || trials_per_subject == 0 {
        return Err(Error::InvalidValue {
            field: "suite size",
            reason: format!("need at least one subject and one trial, got {n_subjects} x {trials_per_subject}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let template: Vec<TrialSpec> = (0..trials_per_subject)
        .map(|_| TrialSpec {
            requested_xi: Cooperativeness::ALL[rng.random_range(0..3)],
            physical_intensity: PhysicalIntensity::ALL[rng.random_range(0..3)],
            verbal_cue: VerbalCue::ALL[rng.random_range(0..3)],
            relative_timing: rng.random_range(TrialSpec::TIMING_RANGE),
            duration: TrialSpec::DEFAULT_DURATION,
            seed: 0,
        })
        .collect();

    let mut suite = Vec::with_capacity(n_subjects * trials_per_subject);
    for subject in 0..n_subjects {
        for (trial_index, base) in template.iter().enumerate() {
            suite.push(SuiteEntry {
                subject_id: format!("S{}", subject + 1),
                trial_index,
                spec: TrialSpec {
                    seed: rng.next_u64(),
                    ..*base
                },
            });
        }
    }
    Ok(suite)
}
