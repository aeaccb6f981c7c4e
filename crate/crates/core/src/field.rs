//! Classical coherent-state amplitude of the driven readout resonator.
//!
//! `d alpha/dt = -i delta alpha - (kappa/2) alpha - i eps(t)` with
//! `delta = 2 pi (omega_r_dressed - omega_d)` and `eps` in rad/ns.
//! Frequencies in the config are linear (GHz); the 2 pi enters here only.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MistError, Result};

/// Default sampling interval of field trajectories, ns.
pub const DEFAULT_GRID_SPACING: f64 = 0.01;
/// Default drive duration, ns.
pub const DEFAULT_DURATION: f64 = 100.0;
const MAX_NUMERIC_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    /// Constant amplitude `epsilon` for `t >= 0`.
    Square,
    /// Piecewise-linear `eps(t)` in GHz; zero outside the table.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    /// Drive amplitude `eps / 2 pi`, GHz.
    pub epsilon: f64,
    /// Drive frequency, GHz.
    pub omega_d: f64,
    /// Dressed resonator frequency entering the field equation, GHz.
    pub omega_r_dressed: f64,
    /// Energy decay rate, 1/ns.
    pub kappa: f64,
    /// ns.
    pub duration: f64,
    pub envelope: Envelope,
}

impl DriveConfig {
    /// Square pulse resonant with the resonator.
    pub fn resonant_square(epsilon: f64, omega_r: f64, kappa: f64, duration: f64) -> Self {
        DriveConfig {
            epsilon,
            omega_d: omega_r,
            omega_r_dressed: omega_r,
            kappa,
            duration,
            envelope: Envelope::Square,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(MistError::invalid("kappa", format!("must be positive, got {}", self.kappa)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(MistError::invalid(
                "duration",
                format!("must be positive, got {}", self.duration),
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(MistError::invalid(
                "epsilon",
                format!("must be non-negative, got {}", self.epsilon),
            ));
        }
        if let Envelope::Tabulated { times, values } = &self.envelope {
            if times.len() != values.len() || times.is_empty() {
                return Err(MistError::invalid(
                    "envelope",
                    "tabulated envelope needs matching, non-empty time and value columns",
                ));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(MistError::invalid("envelope", "table times must be increasing"));
            }
        }
        Ok(())
    }

    /// `omega_r_dressed - omega_d` in rad/ns.
    pub fn detuning_angular(&self) -> f64 {
        TAU * (self.omega_r_dressed - self.omega_d)
    }

    pub fn epsilon_angular(&self) -> f64 {
        TAU * self.epsilon
    }

    /// `|alpha_ss|^2 = eps^2 / (delta^2 + kappa^2 / 4)` for a square pulse.
    pub fn steady_state_nbar(&self) -> f64 {
        let eps = self.epsilon_angular();
        let delta = self.detuning_angular();
        eps * eps / (delta * delta + 0.25 * self.kappa * self.kappa)
    }

    /// Drive amplitude at time `t`, rad/ns.
    fn drive_at(&self, t: f64) -> f64 {
        match &self.envelope {
            Envelope::Square => {
                if t >= 0.0 {
                    self.epsilon_angular()
                } else {
                    0.0
                }
            }
            Envelope::Tabulated { times, values } => TAU * interpolate_table(times, values, t),
        }
    }

    /// Largest admissible fixed step for the numeric integrator, ns.
    pub fn max_numeric_step(&self) -> f64 {
        (0.01 / self.kappa).min(MAX_NUMERIC_STEP)
    }
}

fn interpolate_table(times: &[f64], values: &[f64], t: f64) -> f64 {
    if t < times[0] || t > times[times.len() - 1] {
        return 0.0;
    }
    let i = times.partition_point(|&x| x <= t);
    if i == 0 {
        return values[0];
    }
    if i == times.len() {
        return values[times.len() - 1];
    }
    let (t0, t1) = (times[i - 1], times[i]);
    let w = (t - t0) / (t1 - t0);
    values[i - 1] + w * (values[i] - values[i - 1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrajectory {
    pub times: Vec<f64>,
    pub alpha: Vec<Complex64>,
    /// `|alpha|^2`, photons.
    pub nbar: Vec<f64>,
}

impl FieldTrajectory {
    fn from_alpha(times: Vec<f64>, alpha: Vec<Complex64>) -> Self {
        let nbar = alpha.iter().map(|a| a.norm_sqr()).collect();
        FieldTrajectory { times, alpha, nbar }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `0, spacing, 2 spacing, ...` up to and including `duration`.
pub fn uniform_grid(duration: f64, spacing: f64) -> Vec<f64> {
    let steps = (duration / spacing).round() as usize;
    (0..=steps).map(|i| i as f64 * spacing).collect()
}

/// Closed-form square-pulse amplitude for an arbitrary time.
pub fn closed_form_alpha(drive: &DriveConfig, t: f64) -> Complex64 {
    if t <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let rate = Complex64::new(0.5 * drive.kappa, drive.detuning_angular());
    let eps = drive.epsilon_angular();
    let prefactor = Complex64::new(0.0, -eps) / rate;
    prefactor * (1.0 - (-rate * t).exp())
}

/// Exact vacuum-start solution for a square pulse.
pub fn evolve_field_closed_form(drive: &DriveConfig, t_grid: &[f64]) -> Result<FieldTrajectory> {
    drive.validate()?;
    if drive.envelope != Envelope::Square {
        return Err(MistError::invalid(
            "envelope",
            "the closed form applies to square pulses only",
        ));
    }
    let alpha = t_grid.iter().map(|&t| closed_form_alpha(drive, t)).collect();
    Ok(FieldTrajectory::from_alpha(t_grid.to_vec(), alpha))
}

/// Fixed-step RK4 from vacuum at the largest admissible step.
pub fn evolve_field_numeric(drive: &DriveConfig, t_grid: &[f64]) -> Result<FieldTrajectory> {
    evolve_field_numeric_with(drive, t_grid, Complex64::new(0.0, 0.0), drive.max_numeric_step())
}

/// Fixed-step RK4 from `alpha0` at `t_grid[0]`; `step` must not exceed
/// `min(0.01 / kappa, 0.05 ns)`. Each grid interval is split into equal
/// substeps no longer than `step`.
pub fn evolve_field_numeric_with(
    drive: &DriveConfig,
    t_grid: &[f64],
    alpha0: Complex64,
    step: f64,
) -> Result<FieldTrajectory> {
    drive.validate()?;
    let limit = drive.max_numeric_step();
    if !(step > 0.0) || step > limit * (1.0 + 1e-12) {
        return Err(MistError::StepTooLarge { step, limit });
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(MistError::invalid("t_grid", "must be non-decreasing"));
    }
    let mut alpha = Vec::with_capacity(t_grid.len());
    let Some(&t_start) = t_grid.first() else {
        return Ok(FieldTrajectory::from_alpha(Vec::new(), Vec::new()));
    };
    let decay = Complex64::new(0.5 * drive.kappa, drive.detuning_angular());
    let rhs = |t: f64, a: Complex64| -> Complex64 {
        -decay * a - Complex64::new(0.0, drive.drive_at(t))
    };

    let mut a = alpha0;
    let mut t = t_start;
    alpha.push(a);
    for &t_next in &t_grid[1..] {
        let span = t_next - t;
        if span > 0.0 {
            let substeps = (span / step).ceil().max(1.0) as usize;
            let h = span / substeps as f64;
            for i in 0..substeps {
                let ti = t + i as f64 * h;
                let k1 = rhs(ti, a);
                let k2 = rhs(ti + 0.5 * h, a + k1 * (0.5 * h));
                let k3 = rhs(ti + 0.5 * h, a + k2 * (0.5 * h));
                let k4 = rhs(ti + h, a + k3 * h);
                a += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
            }
        }
        t = t_next;
        alpha.push(a);
    }
    Ok(FieldTrajectory::from_alpha(t_grid.to_vec(), alpha))
}

/// Closed form for square pulses, RK4 otherwise.
pub fn evolve_field(drive: &DriveConfig, t_grid: &[f64]) -> Result<FieldTrajectory> {
    match drive.envelope {
        Envelope::Square => evolve_field_closed_form(drive, t_grid),
        Envelope::Tabulated { .. } => evolve_field_numeric(drive, t_grid),
    }
}
