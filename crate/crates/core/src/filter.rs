//! Kalman recursion over the time-variant cue-response model.
//!
//! Tick alignment: the initial estimate is the prior for tick 0, so tick 0 is
//! a pure measurement update. Every later tick `t` predicts with the cue of
//! tick `t - 1` (the cue that drove the transition into `t`) and then updates
//! with `y_t`.

use nalgebra::{Matrix4, RowVector4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{assemble_transition, ModelParams, TransitionMatrices};
use crate::simulator::TrialRecord;

/// Maximum deviation of a timestamp from the nominal grid.
pub const TIME_JITTER_TOLERANCE: f64 = 1e-6;

/// Default prior variances for `[x, ẋ, η, ξ]`.
pub const DEFAULT_INIT_VARIANCES: [f64; 4] = [1e-4, 1e-2, 1e-2, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateEstimate {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl StateEstimate {
    pub fn new(mean: Vector4<f64>, cov: Matrix4<f64>) -> Self {
        Self { mean, cov }
    }

    /// Position and intended position pinned to the first sample, zero
    /// velocity, ξ prior centred on 0 with unit variance.
    pub fn from_first_measurement(y0: f64) -> Self {
        Self {
            mean: Vector4::new(y0, 0.0, y0, 0.0),
            cov: Matrix4::from_diagonal(&Vector4::from(DEFAULT_INIT_VARIANCES)),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().all(|v| v.is_finite()) && self.cov.iter().all(|v| v.is_finite())
    }

    pub fn xi(&self) -> f64 {
        self.mean[3]
    }

    pub fn std_dev(&self, index: usize) -> f64 {
        self.cov[(index, index)].max(0.0).sqrt()
    }
}

fn symmetrize(m: &Matrix4<f64>) -> Matrix4<f64> {
    (m + m.transpose()) * 0.5
}

/// Which expression is used for the posterior covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceUpdate {
    /// `(I - KH) P (I - KH)ᵀ + K r Kᵀ`
    #[default]
    Joseph,
    /// `(I - KH) P`
    Simple,
}

pub fn predict(est: &StateEstimate, mats: &TransitionMatrices, c_p: f64) -> Result<StateEstimate> {
    let mean = mats.a * est.mean + mats.b * c_p;
    let cov = symmetrize(&(mats.a * est.cov * mats.a.transpose() + mats.q));
    let out = StateEstimate { mean, cov };
    if !out.is_finite() {
        return Err(Error::NonFinite {
            what: "predicted estimate",
            tick: None,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOutcome {
    pub estimate: StateEstimate,
    pub innovation: f64,
    pub innovation_var: f64,
}

pub fn update(
    prior: &StateEstimate,
    y: f64,
    h: &RowVector4<f64>,
    r: f64,
    form: CovarianceUpdate,
) -> Result<UpdateOutcome> {
    let innovation = y - (h * prior.mean)[0];
    let innovation_var = (h * prior.cov * h.transpose())[0] + r;
    if innovation_var.is_nan() || innovation_var <= 0.0 {
        return Err(Error::DegenerateInnovation(innovation_var));
    }
    let gain = prior.cov * h.transpose() / innovation_var;
    let mean = prior.mean + gain * innovation;
    let i_kh = Matrix4::identity() - gain * h;
    let cov = match form {
        CovarianceUpdate::Joseph => i_kh * prior.cov * i_kh.transpose() + gain * r * gain.transpose(),
        CovarianceUpdate::Simple => i_kh * prior.cov,
    };
    let estimate = StateEstimate {
        mean,
        cov: symmetrize(&cov),
    };
    if !estimate.is_finite() || !innovation.is_finite() {
        return Err(Error::NonFinite {
            what: "updated estimate",
            tick: None,
        });
    }
    Ok(UpdateOutcome {
        estimate,
        innovation,
        innovation_var,
    })
}

/// Per-tick record of a filter run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterTrace {
    pub times: Vec<f64>,
    pub estimates: Vec<StateEstimate>,
    pub innovations: Vec<f64>,
    pub innovation_vars: Vec<f64>,
}

impl FilterTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn xi_hat(&self) -> impl Iterator<Item = f64> + '_ {
        self.estimates.iter().map(StateEstimate::xi)
    }
}

/// Checks that `times` sits on the grid `t₀ + i·dt` within the jitter tolerance.
pub fn check_uniform_grid(times: &[f64], dt: f64) -> Result<()> {
    let Some(&t0) = times.first() else {
        return Ok(());
    };
    for (i, &t) in times.iter().enumerate() {
        let expected = t0 + i as f64 * dt;
        if !t.is_finite() || (t - expected).abs() > TIME_JITTER_TOLERANCE {
            return Err(Error::NonUniformTime {
                tick: i,
                expected,
                found: t,
            });
        }
    }
    Ok(())
}

/// Runs the filter over a trial with the default (Joseph) covariance update.
pub fn filter_trial(trial: &TrialRecord, params: &ModelParams, init: StateEstimate) -> Result<FilterTrace> {
    filter_trial_with(trial, params, init, CovarianceUpdate::Joseph)
}

pub fn filter_trial_with(
    trial: &TrialRecord,
    params: &ModelParams,
    init: StateEstimate,
    form: CovarianceUpdate,
) -> Result<FilterTrace> {
    params.validate_for_filtering()?;
    let n = trial.measurements.len();
    if trial.cues.samples.len() != n || trial.cues.times.len() != n {
        return Err(Error::LengthMismatch(format!(
            "{} measurements, {} cue samples, {} timestamps",
            n,
            trial.cues.samples.len(),
            trial.cues.times.len()
        )));
    }
    check_uniform_grid(&trial.cues.times, params.dt)?;
    if let Some(i) = trial.measurements.iter().position(|y| !y.is_finite()) {
        return Err(Error::NonFinite {
            what: "measurement",
            tick: Some(i),
        });
    }
    if !init.is_finite() {
        return Err(Error::NonFinite {
            what: "initial estimate",
            tick: None,
        });
    }

    let mut trace = FilterTrace {
        times: trial.cues.times.clone(),
        estimates: Vec::with_capacity(n),
        innovations: Vec::with_capacity(n),
        innovation_vars: Vec::with_capacity(n),
    };
    let mut est = init;
    for (t, &y) in trial.measurements.iter().enumerate() {
        if t > 0 {
            let cue = trial.cues.samples[t - 1];
            let mats = assemble_transition(params, cue).map_err(|e| e.at_tick(t))?;
            est = predict(&est, &mats, cue.c_p).map_err(|e| e.at_tick(t))?;
        }
        let out = update(&est, y, &crate::model::MEASUREMENT_ROW, params.r, form).map_err(|e| e.at_tick(t))?;
        est = out.estimate;
        trace.estimates.push(est);
        trace.innovations.push(out.innovation);
        trace.innovation_vars.push(out.innovation_var);
    }
    Ok(trace)
}

/// Normalised estimation error squared of `truth` under `est`.
pub fn nees(est: &StateEstimate, truth: &Vector4<f64>) -> Option<f64> {
    let err = truth - est.mean;
    let chol = est.cov.cholesky()?;
    Some(err.dot(&chol.solve(&err)))
}

/// Normalised innovation squared.
pub fn nis(innovation: f64, innovation_var: f64) -> f64 {
    innovation * innovation / innovation_var
}

/// Largest asymmetry `|P_ij - P_ji|` relative to the largest entry.
pub fn relative_asymmetry(cov: &Matrix4<f64>) -> f64 {
    let scale = cov.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (cov - cov.transpose()).amax() / scale
}

pub fn min_eigenvalue(cov: &Matrix4<f64>) -> f64 {
    symmetrize(cov).symmetric_eigenvalues().min()
}
