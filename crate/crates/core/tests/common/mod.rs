//! Test-only helpers: a deliberately naive Kalman reference built from plain
//! `Vec<Vec<f64>>` arithmetic, and fixture locations.

#![allow(dead_code)]

use std::path::PathBuf;

use coop_core::{ModelParams, TrialRecord};

pub type Mat = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for l in 0..k {
                acc += a[i][l] * b[l][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

pub fn transpose(a: &Mat) -> Mat {
    let mut out = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn scale(a: &Mat, s: f64) -> Mat {
    a.iter().map(|r| r.iter().map(|x| x * s).collect()).collect()
}

pub fn column(v: &[f64]) -> Mat {
    v.iter().map(|x| vec![*x]).collect()
}

/// Transition matrix written out directly from the torso, intention and
/// cooperativeness equations.
pub fn reference_transition(p: &ModelParams, c_p: f64, c_v: f64) -> (Mat, Vec<f64>, Mat) {
    let dt = p.dt;
    let a = vec![
        vec![1.0, dt, 0.0, 0.0],
        vec![-p.k1 * dt, 1.0 - p.lambda1 * dt, p.k1 * dt, 0.0],
        vec![0.0, 0.0, 1.0, (p.k3 * c_p + p.k4 * c_v) * dt],
        vec![0.0, 0.0, 0.0, 1.0],
    ];
    let b = vec![0.0, p.k2 * dt, 0.0, 0.0];
    let mut q = zeros(4, 4);
    q[1][1] = p.q_x * dt;
    q[2][2] = p.q_eta * dt;
    q[3][3] = p.q_xi * dt;
    (a, b, q)
}

pub struct ReferenceStep {
    pub mean: Vec<f64>,
    pub cov: Mat,
    pub innovation: f64,
    pub innovation_var: f64,
}

/// Joseph-form Kalman recursion: tick 0 updates the prior, later ticks
/// predict with the previous tick's cue and then update.
pub fn reference_filter(trial: &TrialRecord, p: &ModelParams, mean0: &[f64], cov0: &Mat) -> Vec<ReferenceStep> {
    let mut mean = mean0.to_vec();
    let mut cov = cov0.clone();
    let h = vec![vec![1.0, 0.0, 0.0, 0.0]];
    let mut out = Vec::new();
    for t in 0..trial.measurements.len() {
        if t > 0 {
            let cue = trial.cues.samples[t - 1];
            let (a, b, q) = reference_transition(p, cue.c_p, cue.c_v);
            let am = matmul(&a, &column(&mean));
            mean = (0..4).map(|i| am[i][0] + b[i] * cue.c_p).collect();
            cov = add(&matmul(&matmul(&a, &cov), &transpose(&a)), &q);
            cov = scale(&add(&cov, &transpose(&cov)), 0.5);
        }
        let y = trial.measurements[t];
        let z = y - mean[0];
        let s = cov[0][0] + p.r;
        let k: Vec<f64> = (0..4).map(|i| cov[i][0] / s).collect();
        mean = (0..4).map(|i| mean[i] + k[i] * z).collect();
        let kh = matmul(&column(&k), &h);
        let i_kh = add(&eye(4), &scale(&kh, -1.0));
        let krk = scale(&matmul(&column(&k), &transpose(&column(&k))), p.r);
        cov = add(&matmul(&matmul(&i_kh, &cov), &transpose(&i_kh)), &krk);
        cov = scale(&add(&cov, &transpose(&cov)), 0.5);
        out.push(ReferenceStep {
            mean: mean.clone(),
            cov: cov.clone(),
            innovation: z,
            innovation_var: s,
        });
    }
    out
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}
