//! Detuning x offset-charge x initial-state sweeps and the spectral oracle check.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, OnsetPoint, TransitionBoundary, DEFAULT_THRESHOLD};
use crate::dynamics::{self, SimulationConfig, SurvivalCurve};
use crate::error::{MistError, Result};
use crate::field::{DriveConfig, Envelope};
use crate::linalg;
use crate::strip::{self, Coupling, InteractionModel, StripConfig};
use crate::transmon::{self, TransmonParams, DEFAULT_CHARGE_CUTOFF, DEFAULT_LEVEL_COUNT};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
/// Spacing of the common photon axis of heatmaps.
pub const DEFAULT_NBAR_STEP: f64 = 0.25;
pub const ORACLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// GHz.
    pub e_c: f64,
    pub coupling: Coupling,
    /// Bare resonator frequency, GHz. The drive is resonant with it.
    pub omega_r: f64,
    /// 1/ns.
    pub kappa: f64,
    /// `eps / 2 pi`, GHz.
    pub epsilon: f64,
    /// ns.
    pub duration: f64,
    /// `omega_q - omega_r`, GHz, ascending.
    pub delta_grid: Vec<f64>,
    pub n_g_grid: Vec<f64>,
    pub initial_states: Vec<usize>,
    pub level_count: usize,
    pub charge_cutoff: usize,
    /// ns.
    pub dt: f64,
    pub sample_stride: usize,
    pub threshold: f64,
    /// Photons.
    pub nbar_step: f64,
    /// Worker threads; `None` uses every available core.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            e_c: 0.194,
            coupling: Coupling::KEff(0.048),
            omega_r: 4.750,
            kappa: 1.0 / 22.0,
            epsilon: 0.045,
            duration: 100.0,
            delta_grid: (0..=50).map(|i| (60 + 2 * i) as f64 / 100.0).collect(),
            n_g_grid: dynamics::default_offset_charge_grid(),
            initial_states: vec![0, 1],
            level_count: DEFAULT_LEVEL_COUNT,
            charge_cutoff: DEFAULT_CHARGE_CUTOFF,
            dt: dynamics::DEFAULT_DT,
            sample_stride: dynamics::DEFAULT_SAMPLE_STRIDE,
            threshold: DEFAULT_THRESHOLD,
            nbar_step: DEFAULT_NBAR_STEP,
            workers: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_grid.is_empty() || self.n_g_grid.is_empty() || self.initial_states.is_empty() {
            return Err(MistError::invalid(
                "grids",
                "delta_grid, n_g_grid and initial_states must be non-empty",
            ));
        }
        if self.delta_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MistError::invalid("delta_grid", "must be strictly ascending"));
        }
        if let Some(&s) = self.initial_states.iter().find(|&&s| s >= self.level_count) {
            return Err(MistError::invalid(
                "initial_states",
                format!("state {s} is not below level_count {}", self.level_count),
            ));
        }
        if self.workers == Some(0) {
            return Err(MistError::invalid("workers", "must be at least 1"));
        }
        if !(self.nbar_step > 0.0) {
            return Err(MistError::invalid("nbar_step", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(MistError::invalid("threshold", "must lie in [0, 1]"));
        }
        TransmonParams::new(self.e_c, 1.0, 0.0)
            .with_truncation(self.charge_cutoff, self.level_count)
            .validate()?;
        self.drive().validate()
    }

    pub fn drive(&self) -> DriveConfig {
        DriveConfig {
            epsilon: self.epsilon,
            omega_d: self.omega_r,
            omega_r_dressed: self.omega_r,
            kappa: self.kappa,
            duration: self.duration,
            envelope: Envelope::Square,
        }
    }

    /// SHA-256 of the canonical JSON with the worker count removed.
    pub fn hash(&self) -> String {
        let canonical = SweepConfig {
            workers: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Strip at detuning `delta` with `E_J` solved at zero offset charge.
    pub fn strip_at(&self, delta: f64, n_g: f64) -> Result<StripConfig> {
        let e_j = transmon::ej_for_frequency_with(
            self.e_c,
            self.omega_r + delta,
            0.0,
            self.charge_cutoff,
            self.level_count,
        )?;
        let params = TransmonParams::new(self.e_c, e_j, 0.0).with_truncation(self.charge_cutoff, self.level_count);
        let reference = StripConfig::new(transmon::diagonalize(&params)?, self.coupling, self.omega_r, self.omega_r)?;
        if n_g == 0.0 {
            return Ok(reference);
        }
        Ok(reference.with_eigen(transmon::diagonalize(&params.with_offset_charge(n_g))?))
    }

    /// Single-member simulation at one detuning and offset charge.
    pub fn simulation_at(&self, delta: f64, n_g: f64, state: usize) -> Result<SimulationConfig> {
        Ok(self.simulation(self.strip_at(delta, n_g)?, state))
    }

    fn simulation(&self, strip: StripConfig, state: usize) -> SimulationConfig {
        SimulationConfig {
            dt: self.dt,
            sample_stride: self.sample_stride,
            ..SimulationConfig::new(strip, self.drive(), state)
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.workers {
            builder = builder.num_threads(n);
        }
        builder
            .build()
            .map_err(|e| MistError::invalid("workers", e.to_string()))
    }
}

/// Survival against photon number for one initial state; `values[delta][nbar]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub initial_state: usize,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryOutcome {
    Fitted(TransitionBoundary),
    Failed { kind: String, message: String },
}

impl BoundaryOutcome {
    pub fn fitted(&self) -> Option<&TransitionBoundary> {
        match self {
            BoundaryOutcome::Fitted(b) => Some(b),
            BoundaryOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemberId {
    pub delta: f64,
    pub n_g: f64,
    pub initial_state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    /// The input config without its worker count.
    pub config: SweepConfig,
    pub config_hash: String,
    pub tool_version: String,
    pub delta_grid: Vec<f64>,
    pub nbar_grid: Vec<f64>,
    pub initial_states: Vec<usize>,
    /// Junction energy per detuning, GHz.
    pub e_j: Vec<f64>,
    /// One per initial state, in `initial_states` order.
    pub heatmaps: Vec<Heatmap>,
    /// Onsets before the monotone filter, per initial state.
    pub raw_onsets: Vec<Vec<OnsetPoint>>,
    /// Onsets kept by the monotone filter, per initial state.
    pub onsets: Vec<Vec<OnsetPoint>>,
    pub boundaries: Vec<BoundaryOutcome>,
    /// Members whose branch tracking was flagged.
    pub flagged_members: Vec<MemberId>,
    /// Seconds. Excluded from every exported file except the manifest.
    #[serde(skip)]
    pub wall_time: f64,
}

struct MemberOutcome {
    curve: SurvivalCurve,
    flagged: bool,
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let start = Instant::now();
    let pool = config.pool()?;
    let (e_j, curves, flags) = pool.install(|| simulate_all(config))?;

    let states = &config.initial_states;
    let n_max = curves
        .first()
        .and_then(|c| c.nbar_axis.last().copied())
        .unwrap_or(0.0);
    let points = (n_max / config.nbar_step + 1e-9).floor() as usize;
    let nbar_grid: Vec<f64> = (0..=points).map(|i| i as f64 * config.nbar_step).collect();

    let mut heatmaps = Vec::with_capacity(states.len());
    let mut raw_onsets = Vec::with_capacity(states.len());
    let mut onsets = Vec::with_capacity(states.len());
    let mut boundaries = Vec::with_capacity(states.len());
    for (si, &state) in states.iter().enumerate() {
        let resampled: Vec<SurvivalCurve> = (0..config.delta_grid.len())
            .map(|di| curves[di * states.len() + si].resample(&nbar_grid))
            .collect();
        let raw: Vec<OnsetPoint> = config
            .delta_grid
            .iter()
            .zip(&resampled)
            .filter_map(|(&delta, curve)| {
                analysis::onset_photon_number(curve, config.threshold).map(|n| OnsetPoint::new(delta, n, state))
            })
            .collect();
        let kept = analysis::monotone_filter(&raw);
        boundaries.push(match analysis::fit_boundary(&kept) {
            Ok(b) => BoundaryOutcome::Fitted(b),
            Err(e) => BoundaryOutcome::Failed {
                kind: e.kind().to_string(),
                message: e.to_string(),
            },
        });
        heatmaps.push(Heatmap {
            initial_state: state,
            values: resampled.into_iter().map(|c| c.survival_running_min).collect(),
        });
        raw_onsets.push(raw);
        onsets.push(kept);
    }

    Ok(SweepResult {
        config: SweepConfig {
            workers: None,
            ..config.clone()
        },
        config_hash: config.hash(),
        tool_version: TOOL_VERSION.to_string(),
        delta_grid: config.delta_grid.clone(),
        nbar_grid,
        initial_states: states.clone(),
        e_j,
        heatmaps,
        raw_onsets,
        onsets,
        boundaries,
        flagged_members: flags,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Runs every member and returns, per detuning, `E_J` and the charge-averaged
/// curves ordered as `[delta][state]`.
fn simulate_all(config: &SweepConfig) -> Result<(Vec<f64>, Vec<SurvivalCurve>, Vec<MemberId>)> {
    let strips: Vec<Vec<StripConfig>> = config
        .delta_grid
        .par_iter()
        .map(|&delta| {
            config
                .n_g_grid
                .iter()
                .map(|&n_g| {
                    config.strip_at(delta, n_g).map_err(|e| MistError::Member {
                        delta,
                        n_g,
                        state: config.initial_states[0],
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let e_j = strips.iter().map(|row| row[0].eigen.params.e_j).collect();

    let jobs: Vec<(usize, usize, usize)> = (0..config.delta_grid.len())
        .flat_map(|di| {
            (0..config.initial_states.len())
                .flat_map(move |si| (0..config.n_g_grid.len()).map(move |gi| (di, si, gi)))
        })
        .collect();
    let outcomes: Vec<MemberOutcome> = jobs
        .par_iter()
        .map(|&(di, si, gi)| {
            let state = config.initial_states[si];
            let sim = config.simulation(strips[di][gi].clone(), state);
            dynamics::propagate(&sim)
                .and_then(|trace| {
                    Ok(MemberOutcome {
                        flagged: trace.is_flagged(),
                        curve: dynamics::survival_vs_nbar(&trace)?,
                    })
                })
                .map_err(|e| MistError::Member {
                    delta: config.delta_grid[di],
                    n_g: config.n_g_grid[gi],
                    state,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;

    let per_group = config.n_g_grid.len();
    let mut flagged = Vec::new();
    for (&(di, si, gi), outcome) in jobs.iter().zip(&outcomes) {
        if outcome.flagged {
            flagged.push(MemberId {
                delta: config.delta_grid[di],
                n_g: config.n_g_grid[gi],
                initial_state: config.initial_states[si],
            });
        }
    }
    let averaged = outcomes
        .chunks(per_group)
        .map(|group| {
            let curves: Vec<SurvivalCurve> = group.iter().map(|o| o.curve.clone()).collect();
            dynamics::average_curves(&curves)
        })
        .collect::<Result<_>>()?;
    Ok((e_j, averaged, flagged))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleEntry {
    pub delta: f64,
    pub n_g: f64,
    /// GHz.
    pub max_diff: f64,
    /// Excitation number at which `max_diff` occurred.
    pub worst_excitations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub model: InteractionModel,
    pub max_excitations: usize,
    pub tolerance: f64,
    /// GHz.
    pub max_diff: f64,
    pub pass: bool,
    pub entries: Vec<OracleEntry>,
}

/// Largest eigenvalue difference, over `N = 0..=max_excitations`, between the
/// strip at `|alpha|^2 = N` and the excitation-number strip with `N` quanta
/// plus the bare levels it leaves out. Returns `(max_diff, worst N)`.
pub fn strip_oracle(config: &StripConfig, max_excitations: usize, model: InteractionModel) -> Result<(f64, usize)> {
    let bare = config.bare_energies();
    let mut worst = (0.0, 0);
    for n in 0..=max_excitations {
        let alpha = Complex64::new((n as f64).sqrt(), 0.0);
        let (effective, _) = linalg::symmetric_eigen(strip::strip_matrix(config, alpha, 0.0, model).to_real(), "oracle")?;
        let jtc = strip::jtc_strip_hamiltonian(config, n);
        let dim = jtc.nrows();
        let (mut reference, _) = linalg::symmetric_eigen(jtc, "oracle")?;
        reference.extend_from_slice(&bare[dim..]);
        reference.sort_by(f64::total_cmp);
        let diff = effective
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if diff > worst.0 {
            worst = (diff, n);
        }
    }
    Ok(worst)
}

/// Oracle over every detuning and offset charge of the config, for
/// `N = 0..=3K`.
pub fn run_oracle_check(config: &SweepConfig, model: InteractionModel) -> Result<OracleReport> {
    config.validate()?;
    let max_excitations = 3 * config.level_count;
    let pool = config.pool()?;
    let pairs: Vec<(f64, f64)> = config
        .delta_grid
        .iter()
        .flat_map(|&d| config.n_g_grid.iter().map(move |&g| (d, g)))
        .collect();
    let entries: Vec<OracleEntry> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(delta, n_g)| {
                let strip = config.strip_at(delta, n_g)?;
                let (max_diff, worst_excitations) = strip_oracle(&strip, max_excitations, model)?;
                Ok(OracleEntry {
                    delta,
                    n_g,
                    max_diff,
                    worst_excitations,
                })
            })
            .collect::<Result<_>>()
    })?;
    let max_diff = entries.iter().map(|e| e.max_diff).fold(0.0, f64::max);
    Ok(OracleReport {
        model,
        max_excitations,
        tolerance: ORACLE_TOLERANCE,
        max_diff,
        pass: max_diff < ORACLE_TOLERANCE,
        entries,
    })
}
