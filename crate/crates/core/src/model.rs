//! Cue-response model of a seated care recipient.
//!
//! Three coupled stages, discretised with forward Euler at `dt`:
//!
//! * torso dynamics: `ẍ = -λ₁ẋ + k₁(η - x) + k₂c_p + w_x`
//! * intention: `η⁺ = η + dt·ξ·(k₃c_p + k₄c_v) + w_η`
//! * cooperativeness: `ξ⁺ = ξ + w_ξ`
//!
//! Stacked as `s = [x, ẋ, η, ξ]ᵀ` this is the time-variant linear system
//! `s⁺ = A(c_p, c_v)·s + B·c_p + w`, `y = H·s + v` with `H = [1 0 0 0]`.
//!
//! Units of the entries of `A` (row unit / column unit):
//!
//! | row \ col | x (m)   | ẋ (m/s) | η (m)   | ξ (1)   |
//! |-----------|---------|---------|---------|---------|
//! | x (m)     | 1       | s       | -       | -       |
//! | ẋ (m/s)   | 1/s     | 1       | 1/s     | -       |
//! | η (m)     | -       | -       | 1       | m       |
//! | ξ (1)     | -       | -       | -       | 1       |
//!
//! `dt·k₁` carries 1/s, `dt·(k₃c_p + k₄c_v)` carries metres, `B = dt·k₂`
//! maps newtons to m/s. Positive values mean "forward" for x, c_p and c_v.

use std::fmt;

use nalgebra::{Matrix4, RowVector4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source of every default model constant.
pub const DEFAULT_PARAMS_JSON: &str = include_str!("../config/default_params.json");

/// Model constants. Field names double as the JSON keys of a params file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Damping rate, 1/s.
    pub lambda1: f64,
    /// Voluntary proportional gain toward η, 1/s².
    pub k1: f64,
    /// Mechanical compliance to the push, m/(s²·N).
    pub k2: f64,
    /// Physical-cue intention gain, m/(s·N).
    pub k3: f64,
    /// Verbal-cue intention gain, m/s per unit symbol.
    pub k4: f64,
    /// Sample period, s.
    pub dt: f64,
    /// Acceleration-level process noise intensity (variance per second on ẋ).
    pub q_x: f64,
    /// Intention process noise intensity (variance per second on η).
    pub q_eta: f64,
    /// Cooperativeness process noise intensity (variance per second on ξ).
    pub q_xi: f64,
    /// Measurement noise variance, m².
    pub r: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_PARAMS_JSON).expect("bundled default params are valid JSON")
    }
}

impl ModelParams {
    pub const FIELD_NAMES: [&'static str; 10] = ["lambda1", "k1", "k2", "k3", "k4", "dt", "q_x", "q_eta", "q_xi", "r"];

    fn fields(&self) -> [(&'static str, f64); 10] {
        [
            ("lambda1", self.lambda1),
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("dt", self.dt),
            ("q_x", self.q_x),
            ("q_eta", self.q_eta),
            ("q_xi", self.q_xi),
            ("r", self.r),
        ]
    }

    /// Checks every structural invariant. `r > 0` is enforced separately by
    /// the filter, since simulation with `r = 0` is legitimate.
    pub fn validate(&self) -> Result<()> {
        for (name, value) in self.fields() {
            if !value.is_finite() {
                return Err(invalid(name, format!("must be finite, got {value}")));
            }
        }
        for (name, value) in [
            ("lambda1", self.lambda1),
            ("k1", self.k1),
            ("k2", self.k2),
            ("q_x", self.q_x),
            ("q_eta", self.q_eta),
            ("q_xi", self.q_xi),
            ("r", self.r),
        ] {
            if value < 0.0 {
                return Err(invalid(name, format!("must be >= 0, got {value}")));
            }
        }
        if self.dt <= 0.0 {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if self.dt * self.lambda1 >= 2.0 {
            return Err(invalid(
                "lambda1",
                format!(
                    "discretised damping unstable: dt*lambda1 = {} must be < 2",
                    self.dt * self.lambda1
                ),
            ));
        }
        if self.dt * self.dt * self.k1 >= 4.0 {
            return Err(invalid(
                "k1",
                format!(
                    "discretised stiffness unstable: dt^2*k1 = {} must be < 4",
                    self.dt * self.dt * self.k1
                ),
            ));
        }
        Ok(())
    }

    /// Validation plus the filter's extra requirement of a positive `r`.
    pub fn validate_for_filtering(&self) -> Result<()> {
        self.validate()?;
        if self.r <= 0.0 {
            return Err(invalid("r", format!("must be > 0 for filtering, got {}", self.r)));
        }
        Ok(())
    }
}

fn invalid(name: &'static str, reason: String) -> Error {
    Error::InvalidParam { name, reason }
}

/// Discrete cooperativeness level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Cooperativeness {
    Uncooperative,
    Unresponsive,
    Cooperative,
}

impl Cooperativeness {
    pub const ALL: [Cooperativeness; 3] = [
        Cooperativeness::Uncooperative,
        Cooperativeness::Unresponsive,
        Cooperativeness::Cooperative,
    ];

    pub fn value(self) -> i8 {
        match self {
            Cooperativeness::Uncooperative => -1,
            Cooperativeness::Unresponsive => 0,
            Cooperativeness::Cooperative => 1,
        }
    }

    /// Position in `ALL`, used as a row/column index.
    pub fn index(self) -> usize {
        (self.value() + 1) as usize
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }
}

impl TryFrom<i8> for Cooperativeness {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        match v {
            -1 => Ok(Cooperativeness::Uncooperative),
            0 => Ok(Cooperativeness::Unresponsive),
            1 => Ok(Cooperativeness::Cooperative),
            other => Err(Error::InvalidValue {
                field: "cooperativeness",
                reason: format!("{other} is not in {{-1, 0, 1}}"),
            }),
        }
    }
}

impl From<Cooperativeness> for i8 {
    fn from(c: Cooperativeness) -> i8 {
        c.value()
    }
}

impl fmt::Display for Cooperativeness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cooperativeness::Uncooperative => "-1",
            Cooperativeness::Unresponsive => "0",
            Cooperativeness::Cooperative => "+1",
        })
    }
}

/// `[x, ẋ, η, ξ]` in m, m/s, m and dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector {
    pub x: f64,
    pub x_dot: f64,
    pub eta: f64,
    pub xi: f64,
}

impl StateVector {
    pub fn new(x: f64, x_dot: f64, eta: f64, xi: f64) -> Self {
        Self { x, x_dot, eta, xi }
    }

    /// Rest state with the given cooperativeness.
    pub fn at_rest(xi: Cooperativeness) -> Self {
        Self::new(0.0, 0.0, 0.0, xi.as_f64())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.x_dot.is_finite() && self.eta.is_finite() && self.xi.is_finite()
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.x, self.x_dot, self.eta, self.xi)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// One tick of cue input: push force in newtons and a verbal symbol in {-1, 0, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CueSample {
    pub c_p: f64,
    pub c_v: f64,
}

impl CueSample {
    pub const NONE: CueSample = CueSample { c_p: 0.0, c_v: 0.0 };

    pub fn new(c_p: f64, c_v: f64) -> Result<Self> {
        let cue = Self { c_p, c_v };
        cue.validate()?;
        Ok(cue)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.c_p.is_finite() {
            return Err(Error::InvalidValue {
                field: "c_p",
                reason: format!("must be finite, got {}", self.c_p),
            });
        }
        if !(self.c_v == -1.0 || self.c_v == 0.0 || self.c_v == 1.0) {
            return Err(Error::InvalidValue {
                field: "c_v",
                reason: format!("must be one of -1, 0, 1, got {}", self.c_v),
            });
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.c_p != 0.0 || self.c_v != 0.0
    }
}

/// Process-noise realisation for one step, already scaled to per-step variance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseDraw {
    pub w_x: f64,
    pub w_eta: f64,
    pub w_xi: f64,
}

impl NoiseDraw {
    pub const ZERO: NoiseDraw = NoiseDraw {
        w_x: 0.0,
        w_eta: 0.0,
        w_xi: 0.0,
    };
}

/// The per-tick linear system used by both the simulator check and the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrices {
    pub a: Matrix4<f64>,
    /// Input gain applied to the scalar push force.
    pub b: Vector4<f64>,
    pub h: RowVector4<f64>,
    pub q: Matrix4<f64>,
}

pub const MEASUREMENT_ROW: RowVector4<f64> = RowVector4::new(1.0, 0.0, 0.0, 0.0);

/// Builds `A(c_p, c_v)`, `B`, `H` and the per-step process covariance `Q`.
pub fn assemble_transition(params: &ModelParams, cue: CueSample) -> Result<TransitionMatrices> {
    params.validate()?;
    cue.validate()?;
    let dt = params.dt;
    let intent_gain = dt * (params.k3 * cue.c_p + params.k4 * cue.c_v);
    #[rustfmt::skip]
    let a = Matrix4::new(
        1.0,              dt,                        0.0,             0.0,
        -dt * params.k1,  1.0 - dt * params.lambda1, dt * params.k1,  0.0,
        0.0,              0.0,                       1.0,             intent_gain,
        0.0,              0.0,                       0.0,             1.0,
    );
    let b = Vector4::new(0.0, dt * params.k2, 0.0, 0.0);
    let q = Matrix4::from_diagonal(&Vector4::new(0.0, dt * params.q_x, dt * params.q_eta, dt * params.q_xi));
    Ok(TransitionMatrices {
        a,
        b,
        h: MEASUREMENT_ROW,
        q,
    })
}

/// Forward-Euler ground-truth step.
pub fn step_truth(state: StateVector, cue: CueSample, params: &ModelParams, noise: NoiseDraw) -> Result<StateVector> {
    if !state.is_finite() {
        return Err(Error::NonFinite {
            what: "state",
            tick: None,
        });
    }
    let dt = params.dt;
    let accel = -params.lambda1 * state.x_dot + params.k1 * (state.eta - state.x) + params.k2 * cue.c_p;
    let next = StateVector {
        x: state.x + dt * state.x_dot,
        x_dot: state.x_dot + dt * accel + noise.w_x,
        eta: state.eta + dt * state.xi * (params.k3 * cue.c_p + params.k4 * cue.c_v) + noise.w_eta,
        xi: state.xi + noise.w_xi,
    };
    if !next.is_finite() {
        return Err(Error::NonFinite {
            what: "state",
            tick: None,
        });
    }
    Ok(next)
}

/// `y = x + v`; only the torso position is observed.
pub fn measure(state: &StateVector, noise_v: f64) -> f64 {
    state.x + noise_v
}
