//! Discretized Fenna-Matthews-Olson exciton dynamics as a Kraus map.
//!
//! Sites 0..=4 are the computational basis states 0..=4 of a 3-qubit
//! register; basis states 5..=7 are unused and only see the identity part of
//! `M_0`.

use serde::{Deserialize, Serialize};

use super::{apply_channel, validate_cptp, ChannelError, KrausSet, DEFAULT_CPTP_TOL};
use crate::linalg::{psd_sqrt, CMatrix, DEFAULT_PSD_TOL};
use crate::state::DensityMatrix;

pub const FMO_DIM: usize = 8;
pub const FMO_SITES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmoParams {
    /// Dephasing rate (fs⁻¹).
    pub alpha: f64,
    /// Recombination rate to the ground state (fs⁻¹).
    pub beta: f64,
    /// Relaxation rate into the sink site (fs⁻¹).
    pub gamma: f64,
    /// Time step (fs).
    pub dt: f64,
}

impl Default for FmoParams {
    fn default() -> Self {
        Self {
            alpha: 3e-3,
            beta: 5e-7,
            gamma: 6.28e-3,
            dt: 48.4,
        }
    }
}

impl FmoParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let fields = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("dt", self.dt),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(ChannelError::InvalidRates(format!("{name} = {v} must be non-negative")));
            }
        }
        for (name, rate) in &fields[..3] {
            let p = rate * self.dt;
            if p > 1.0 {
                return Err(ChannelError::InvalidRates(format!("{name}*dt = {p} exceeds 1")));
            }
        }
        Ok(())
    }
}

fn ket_bra(row: usize, col: usize, amp: f64) -> CMatrix {
    let mut m = CMatrix::zeros(FMO_DIM, FMO_DIM);
    m[(row, col)] = amp.into();
    m
}

/// The 8-operator FMO set, ordered `M_0, M_1, …, M_7`.
pub fn fmo_kraus_set(p: &FmoParams) -> Result<KrausSet, ChannelError> {
    p.validate()?;
    let dephase = (p.alpha * p.dt).sqrt();
    let recombine = (p.beta * p.dt).sqrt();
    let relax = (p.gamma * p.dt).sqrt();

    let mut jumps = Vec::with_capacity(7);
    for site in 1..=3 {
        jumps.push(ket_bra(site, site, dephase));
    }
    for site in 1..=3 {
        jumps.push(ket_bra(0, site, recombine));
    }
    jumps.push(ket_bra(4, 3, relax));

    let mut rest = CMatrix::identity(FMO_DIM);
    for m in &jumps {
        rest = &rest - &(m.adjoint() * m);
    }
    let m0 = psd_sqrt(&rest, DEFAULT_PSD_TOL)
        .map_err(|e| ChannelError::InvalidRates(format!("I - sum M_k^dag M_k is not PSD ({e})")))?;

    let mut ops = Vec::with_capacity(8);
    ops.push(m0);
    ops.extend(jumps);
    validate_cptp(ops, DEFAULT_CPTP_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub time_fs: f64,
    pub populations: [f64; FMO_SITES],
    pub trace: f64,
}

impl TrajectoryPoint {
    fn record(step: usize, dt: f64, rho: &DensityMatrix) -> Self {
        let mut populations = [0.0; FMO_SITES];
        for (s, p) in populations.iter_mut().enumerate() {
            *p = rho.population(s);
        }
        Self {
            step,
            time_fs: step as f64 * dt,
            populations,
            trace: rho.trace(),
        }
    }
}

/// Iterates the FMO channel `steps` times, recording the initial state and
/// every step after it.
pub fn fmo_trajectory(p: &FmoParams, rho0: &DensityMatrix, steps: usize) -> Result<Vec<TrajectoryPoint>, ChannelError> {
    if rho0.dim() != FMO_DIM {
        return Err(ChannelError::DimensionMismatch(format!(
            "FMO register has dimension {FMO_DIM}, initial state has {}",
            rho0.dim()
        )));
    }
    let k = fmo_kraus_set(p)?;
    let mut rho = rho0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(TrajectoryPoint::record(0, p.dt, &rho));
    for step in 1..=steps {
        rho = apply_channel(&k, &rho)?;
        out.push(TrajectoryPoint::record(step, p.dt, &rho));
    }
    Ok(out)
}

/// `(|001⟩ + |010⟩ + |100⟩)/√3`, i.e. equal amplitude on basis states 1, 2, 4.
pub fn fmo_initial_state() -> DensityMatrix {
    let mut amps = vec![crate::linalg::C64::new(0.0, 0.0); FMO_DIM];
    for idx in [1, 2, 4] {
        amps[idx] = (1.0 / 3f64.sqrt()).into();
    }
    DensityMatrix::from_pure(&amps).expect("normalized")
}
