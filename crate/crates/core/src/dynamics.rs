//! Schrödinger propagation within the strip while the resonator rings up.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{MistError, Result};
use crate::field::{self, DriveConfig, FieldTrajectory};
use crate::strip::{self, InteractionModel, StripConfig, StripMatrix, MIN_TRACKING_OVERLAP};
use crate::transmon;

/// Propagation step, ns.
pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_SAMPLE_STRIDE: usize = 10;
/// Largest admissible propagation step, ns.
pub const MAX_DT: f64 = 0.05;
const NORM_TOLERANCE: f64 = 1e-6;

/// `{-0.50, -0.45, ..., 0.00}`.
pub fn default_offset_charge_grid() -> Vec<f64> {
    (0..=10).map(|i| (5 * i - 50) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub strip: StripConfig,
    pub drive: DriveConfig,
    pub initial_state: usize,
    /// ns.
    pub dt: f64,
    pub sample_stride: usize,
}

impl SimulationConfig {
    pub fn new(strip: StripConfig, drive: DriveConfig, initial_state: usize) -> Self {
        SimulationConfig {
            strip,
            drive,
            initial_state,
            dt: DEFAULT_DT,
            sample_stride: DEFAULT_SAMPLE_STRIDE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.drive.validate()?;
        check_stepping(self.dt, self.sample_stride)?;
        if self.initial_state >= self.strip.level_count {
            return Err(MistError::invalid(
                "initial_state",
                format!("must be below level_count {}, got {}", self.strip.level_count, self.initial_state),
            ));
        }
        Ok(())
    }
}

fn check_stepping(dt: f64, sample_stride: usize) -> Result<()> {
    if !(dt > 0.0) {
        return Err(MistError::invalid("dt", format!("must be positive, got {dt}")));
    }
    if dt > MAX_DT {
        return Err(MistError::StepTooLarge { step: dt, limit: MAX_DT });
    }
    if sample_stride == 0 {
        return Err(MistError::invalid("sample_stride", "must be at least 1"));
    }
    Ok(())
}

/// A strip Hamiltonian that depends on time, in GHz.
pub trait DrivenStrip: Sync {
    fn dim(&self) -> usize;
    fn hamiltonian(&self, t: f64) -> StripMatrix;
    /// Photon number reported alongside each sample.
    fn nbar(&self, t: f64) -> f64;
}

/// The strip driven by a field trajectory tabulated at half-step spacing.
struct FieldDriven<'a> {
    strip: &'a StripConfig,
    field: FieldTrajectory,
    half_step: f64,
}

impl FieldDriven<'_> {
    fn alpha(&self, t: f64) -> Complex64 {
        let i = (t / self.half_step).round() as usize;
        self.field.alpha[i.min(self.field.len() - 1)]
    }
}

impl DrivenStrip for FieldDriven<'_> {
    fn dim(&self) -> usize {
        self.strip.level_count
    }

    fn hamiltonian(&self, t: f64) -> StripMatrix {
        strip::strip_matrix(self.strip, self.alpha(t), t, InteractionModel::Truncated)
    }

    fn nbar(&self, t: f64) -> f64 {
        self.alpha(t).norm_sqr()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTrace {
    /// ns.
    pub times: Vec<f64>,
    pub nbar: Vec<f64>,
    /// `populations[i][label]`: population of the tracked branch `label`.
    pub populations: Vec<Vec<f64>>,
    /// Population of the branch connected to the initial state.
    pub survival: Vec<f64>,
    pub norm: Vec<f64>,
    /// `bare_populations[i][k]`: population of bare level `k`.
    pub bare_populations: Vec<Vec<f64>>,
    /// Sample indices where branch tracking fell below overlap 0.5.
    pub low_overlap_samples: Vec<usize>,
    /// Sample indices where tracking needed an index tie-break.
    pub ambiguous_samples: Vec<usize>,
}

impl PopulationTrace {
    pub fn is_flagged(&self) -> bool {
        !self.low_overlap_samples.is_empty() || !self.ambiguous_samples.is_empty()
    }
}

pub fn propagate(config: &SimulationConfig) -> Result<PopulationTrace> {
    config.validate()?;
    let steps = step_count(config.drive.duration, config.dt);
    let half_step = 0.5 * config.dt;
    let grid: Vec<f64> = (0..=2 * steps).map(|i| i as f64 * half_step).collect();
    let field = field::evolve_field(&config.drive, &grid)?;
    let system = FieldDriven {
        strip: &config.strip,
        field,
        half_step,
    };
    propagate_driven(&system, steps, config.dt, config.sample_stride, config.initial_state)
}

fn step_count(duration: f64, dt: f64) -> usize {
    (duration / dt).round().max(1.0) as usize
}

/// Propagates bare level `initial_state` from `t = 0` for `steps` steps of
/// `dt`, sampling every `sample_stride` steps and at the final step. Each step
/// applies `exp(-i 2 pi H dt)` with `H` taken at the step midpoint.
pub fn propagate_driven<S: DrivenStrip>(
    system: &S,
    steps: usize,
    dt: f64,
    sample_stride: usize,
    initial_state: usize,
) -> Result<PopulationTrace> {
    check_stepping(dt, sample_stride)?;
    let dim = system.dim();
    if initial_state >= dim {
        return Err(MistError::invalid(
            "initial_state",
            format!("must be below {dim}, got {initial_state}"),
        ));
    }
    let mut psi = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    psi[initial_state] = Complex64::new(1.0, 0.0);

    let mut tracker = Tracker::new(dim);
    let mut trace = PopulationTrace {
        times: Vec::new(),
        nbar: Vec::new(),
        populations: Vec::new(),
        survival: Vec::new(),
        norm: Vec::new(),
        bare_populations: Vec::new(),
        low_overlap_samples: Vec::new(),
        ambiguous_samples: Vec::new(),
    };
    tracker.sample(system, 0.0, &psi, initial_state, &mut trace)?;
    for step in 0..steps {
        let t = step as f64 * dt;
        step_exact(&system.hamiltonian(t + 0.5 * dt), dt, &mut psi)?;
        let done = step + 1;
        if done % sample_stride == 0 || done == steps {
            tracker.sample(system, done as f64 * dt, &psi, initial_state, &mut trace)?;
        }
    }
    Ok(trace)
}

/// `psi <- U W exp(-i 2 pi Lambda dt) W^T U^dagger psi` using the real
/// eigenvectors `W` of the gauged strip.
fn step_exact(h: &StripMatrix, dt: f64, psi: &mut DVector<Complex64>) -> Result<()> {
    let (values, w) = crate::linalg::symmetric_eigen(h.to_real(), "propagation step")?;
    let powers = h.phase_powers();
    let n = psi.len();
    let gauged: Vec<Complex64> = (0..n).map(|k| powers[k].conj() * psi[k]).collect();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for (j, c) in coeffs.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n {
            acc += gauged[k] * w[(k, j)];
        }
        *c = acc * Complex64::from_polar(1.0, -TAU * values[j] * dt);
    }
    for k in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, c) in coeffs.iter().enumerate() {
            acc += c * w[(k, j)];
        }
        psi[k] = powers[k] * acc;
    }
    Ok(())
}

/// Eigenvectors of the previous sample, columns ordered by branch label.
struct Tracker {
    previous: DMatrix<Complex64>,
}

impl Tracker {
    fn new(dim: usize) -> Self {
        Tracker {
            previous: DMatrix::identity(dim, dim),
        }
    }

    fn sample<S: DrivenStrip>(
        &mut self,
        system: &S,
        t: f64,
        psi: &DVector<Complex64>,
        initial_state: usize,
        trace: &mut PopulationTrace,
    ) -> Result<()> {
        let norm = psi.norm_squared();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(MistError::NormDrift { time: t, drift: norm - 1.0 });
        }
        let basis = system.hamiltonian(t).eigen()?;
        let matched = strip::match_branches(&self.previous, &basis.vectors);
        let index = trace.times.len();
        if matched.min_overlap < MIN_TRACKING_OVERLAP {
            trace.low_overlap_samples.push(index);
        }
        if matched.ambiguous {
            trace.ambiguous_samples.push(index);
        }
        let dim = psi.len();
        let mut labelled = DMatrix::zeros(dim, dim);
        for (label, &col) in matched.columns.iter().enumerate() {
            labelled.set_column(label, &basis.vectors.column(col));
        }
        let amplitudes = labelled.adjoint() * psi;
        let populations: Vec<f64> = amplitudes.iter().map(|a| a.norm_sqr()).collect();
        trace.times.push(t);
        trace.nbar.push(system.nbar(t));
        trace.survival.push(populations[initial_state]);
        trace.populations.push(populations);
        trace.norm.push(norm);
        trace.bare_populations.push(psi.iter().map(|a| a.norm_sqr()).collect());
        self.previous = labelled;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    /// Photons, non-decreasing.
    pub nbar_axis: Vec<f64>,
    /// Non-increasing along the axis.
    pub survival_running_min: Vec<f64>,
}

impl SurvivalCurve {
    /// Linear interpolation onto `axis`, clamped to the end values outside
    /// the curve's range.
    pub fn resample(&self, axis: &[f64]) -> SurvivalCurve {
        SurvivalCurve {
            nbar_axis: axis.to_vec(),
            survival_running_min: axis
                .iter()
                .map(|&x| interpolate(&self.nbar_axis, &self.survival_running_min, x))
                .collect(),
        }
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&v| v <= x);
    if i == 0 {
        return ys[0];
    }
    if i == xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    if x1 == x0 {
        return ys[i - 1];
    }
    let w = (x - x0) / (x1 - x0);
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

/// Survival against photon number with the running minimum applied.
pub fn survival_vs_nbar(trace: &PopulationTrace) -> Result<SurvivalCurve> {
    if let Some(i) = trace.nbar.windows(2).position(|w| w[1] < w[0]) {
        return Err(MistError::NonMonotonePhotonNumber { index: i + 1 });
    }
    let mut floor = f64::INFINITY;
    let survival_running_min = trace
        .survival
        .iter()
        .map(|&s| {
            floor = floor.min(s);
            floor.clamp(0.0, 1.0)
        })
        .collect();
    Ok(SurvivalCurve {
        nbar_axis: trace.nbar.clone(),
        survival_running_min,
    })
}

/// Survival of one member of an offset-charge average.
pub fn member_survival(base: &SimulationConfig, n_g: f64) -> Result<SurvivalCurve> {
    let wrap = |source: MistError| MistError::OffsetCharge {
        n_g,
        source: Box::new(source),
    };
    let eigen = transmon::diagonalize(&base.strip.eigen.params.with_offset_charge(n_g)).map_err(wrap)?;
    let member = SimulationConfig {
        strip: base.strip.with_eigen(eigen),
        ..base.clone()
    };
    propagate(&member).and_then(|trace| survival_vs_nbar(&trace)).map_err(wrap)
}

/// Uniform average over offset charge. Members run in parallel; every member
/// curve is interpolated onto the photon axis of the first.
pub fn charge_averaged_survival(base: &SimulationConfig, n_g_grid: &[f64]) -> Result<SurvivalCurve> {
    let curves: Vec<SurvivalCurve> = n_g_grid
        .par_iter()
        .map(|&n_g| member_survival(base, n_g))
        .collect::<Result<_>>()?;
    average_curves(&curves)
}

/// Averages curves on the axis of the first one, in input order.
pub fn average_curves(curves: &[SurvivalCurve]) -> Result<SurvivalCurve> {
    let first = curves
        .first()
        .ok_or_else(|| MistError::invalid("n_g_grid", "must not be empty"))?;
    let axis = &first.nbar_axis;
    let mut sum = vec![0.0; axis.len()];
    for curve in curves {
        let resampled = curve.resample(axis);
        for (s, v) in sum.iter_mut().zip(&resampled.survival_running_min) {
            *s += v;
        }
    }
    let count = curves.len() as f64;
    Ok(SurvivalCurve {
        nbar_axis: axis.clone(),
        survival_running_min: sum.into_iter().map(|s| s / count).collect(),
    })
}
