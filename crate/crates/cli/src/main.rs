use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mist_core::analysis::{self, DispersiveParams};
use mist_core::io::{self, OutputFile};
use mist_core::strip::{self, Coupling, InteractionModel};
use mist_core::sweep::{self, SweepConfig};
use mist_core::{dynamics, field, transmon, MistError, Result};

/// Measurement-induced state transitions of a transmon under dispersive readout.
#[derive(Debug, Parser)]
#[command(name = "mist", version)]
struct Cli {
    /// Worker threads for parallel work (default: all cores).
    #[arg(long, global = true, env = "MIST_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detuning x photon-number survival heatmaps and transition boundaries.
    Sweep {
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fan diagram and avoided crossings at one detuning and offset charge.
    Fan {
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        point: Point,
        #[arg(long)]
        out: PathBuf,
        /// Largest photon number of the fan, photons.
        #[arg(long, default_value_t = 150.0)]
        nbar_max: f64,
        /// Smallest splitting reported as a crossing, GHz.
        #[arg(long, default_value_t = 1e-3)]
        min_gap: f64,
        /// Largest splitting reported as a crossing, GHz.
        #[arg(long, default_value_t = 0.1)]
        max_gap: f64,
    },
    /// Populations of one simulation.
    Trace {
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        point: Point,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        state: usize,
    },
    /// Dispersive quantities at one detuning, printed as JSON.
    Calibrate {
        #[command(flatten)]
        params: Params,
        /// Detuning omega_q - omega_r, GHz.
        #[arg(long)]
        delta: f64,
        /// Target level of the perturbative coupling from |0>.
        #[arg(long)]
        level: Option<usize>,
        /// Photon number at which the perturbative coupling is evaluated.
        #[arg(long, default_value_t = 40.0)]
        nbar: f64,
        /// AC-Stark shift to convert into photons, GHz.
        #[arg(long)]
        stark_shift: Option<f64>,
    },
    /// Compares the strip spectrum with the excitation-number strips.
    OracleCheck {
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Interaction::Truncated)]
        interaction: Interaction,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Interaction {
    Truncated,
    Unmodified,
}

#[derive(Debug, Args)]
struct Point {
    /// Detuning omega_q - omega_r, GHz.
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    n_g: f64,
}

/// Config file plus per-key overrides.
#[derive(Debug, Args)]
struct Params {
    /// JSON config; missing keys take the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    e_c: Option<f64>,
    #[arg(long, conflicts_with = "g")]
    k_eff: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    omega_r: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    /// Comma-separated detunings, GHz.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    delta_grid: Option<Vec<f64>>,
    /// Comma-separated offset charges.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    n_g_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    initial_states: Option<Vec<usize>>,
    #[arg(long)]
    level_count: Option<usize>,
    #[arg(long)]
    charge_cutoff: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
}

impl Params {
    fn resolve(&self, workers: Option<usize>) -> Result<SweepConfig> {
        let mut config: SweepConfig = match &self.config {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
            None => SweepConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    config.$field = v.clone();
                }
            )*};
        }
        apply!(e_c, omega_r, kappa, epsilon, duration, delta_grid, n_g_grid, initial_states, level_count, charge_cutoff, dt, threshold);
        if let Some(k) = self.k_eff {
            config.coupling = Coupling::KEff(k);
        }
        if let Some(g) = self.g {
            config.coupling = Coupling::G(g);
        }
        if workers.is_some() {
            config.workers = workers;
        }
        config.validate()?;
        Ok(config)
    }
}

fn photon_grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

fn emit(out: &Path, command: &str, hash: &str, files: Vec<OutputFile>, wall_time: f64) -> Result<()> {
    let mut all = files;
    let manifest = io::manifest_json(command, hash, &all, wall_time)?;
    all.push(OutputFile {
        name: "manifest.json".into(),
        contents: manifest,
    });
    io::write_files(out, &all)
}

#[derive(Serialize)]
struct Calibration {
    delta: f64,
    omega_q: f64,
    e_j: f64,
    g: f64,
    anharmonicity: f64,
    chi: f64,
    omega_r_dressed: [f64; 2],
    n_crit: f64,
    k_bend: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    g_eff: Option<GEff>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stark_photons: Option<f64>,
}

#[derive(Serialize)]
struct GEff {
    level: usize,
    nbar: f64,
    perturbative: f64,
    critical_photon_form: f64,
}

fn run(cli: Cli) -> Result<()> {
    let start = std::time::Instant::now();
    match cli.command {
        Command::Sweep { params, out } => {
            let config = params.resolve(cli.workers)?;
            let result = sweep::run_sweep(&config)?;
            let files = io::sweep_files(&result)?;
            emit(&out, "sweep", &result.config_hash, files, result.wall_time)?;
        }
        Command::Fan {
            params,
            point,
            out,
            nbar_max,
            min_gap,
            max_gap,
        } => {
            let config = params.resolve(cli.workers)?;
            let strip = config.strip_at(point.delta, point.n_g)?;
            let mut spectrum = strip::fan_diagram(&strip, &photon_grid(nbar_max, config.nbar_step))?;
            spectrum.crossings = strip::find_avoided_crossings(&spectrum, min_gap, max_gap);
            let hash = config.hash();
            let files = vec![
                OutputFile {
                    name: "fan.csv".into(),
                    contents: io::fan_csv(&spectrum, &hash),
                },
                OutputFile {
                    name: "crossings.json".into(),
                    contents: io::crossings_json(&spectrum, &hash)?,
                },
            ];
            emit(&out, "fan", &hash, files, start.elapsed().as_secs_f64())?;
        }
        Command::Trace {
            params,
            point,
            out,
            state,
        } => {
            let config = params.resolve(cli.workers)?;
            let sim = config.simulation_at(point.delta, point.n_g, state)?;
            let trace = dynamics::propagate(&sim)?;
            let hash = config.hash();
            let grid = field::uniform_grid(sim.drive.duration, field::DEFAULT_GRID_SPACING);
            let mut files = vec![
                OutputFile {
                    name: "field.csv".into(),
                    contents: io::field_csv(&field::evolve_field(&sim.drive, &grid)?, &hash),
                },
                OutputFile {
                    name: "trace.csv".into(),
                    contents: io::trace_csv(&trace, &hash),
                },
            ];
            if let Ok(curve) = dynamics::survival_vs_nbar(&trace) {
                files.push(OutputFile {
                    name: "survival.csv".into(),
                    contents: io::survival_csv(&curve, &hash),
                });
            }
            emit(&out, "trace", &hash, files, start.elapsed().as_secs_f64())?;
        }
        Command::Calibrate {
            params,
            delta,
            level,
            nbar,
            stark_shift,
        } => {
            let config = params.resolve(cli.workers)?;
            let strip = config.strip_at(delta, 0.0)?;
            let omega_q = strip.eigen.qubit_frequency();
            let eta = strip.eigen.anharmonicity();
            let dispersive = DispersiveParams::new(strip.g(), omega_q, config.omega_r, eta);
            let chi = analysis::chi(&dispersive)?;
            let (f0, f1) = analysis::dressed_frequencies(&dispersive)?;
            let g_eff = match level {
                Some(level) => Some(GEff {
                    level,
                    nbar,
                    perturbative: strip::g_eff_perturbative(&strip, level, nbar)?,
                    critical_photon_form: strip::g_eff_from_critical_photons(&strip, level, nbar)?,
                }),
                None => None,
            };
            let report = Calibration {
                delta,
                omega_q,
                e_j: strip.eigen.params.e_j,
                g: strip.g(),
                anharmonicity: eta,
                chi,
                omega_r_dressed: [f0, f1],
                n_crit: analysis::n_crit(dispersive.delta, strip.g())?,
                k_bend: transmon::k_bend(omega_q, config.omega_r, eta)?,
                g_eff,
                stark_photons: stark_shift.map(|s| analysis::stark_to_photons(s, chi)).transpose()?,
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::OracleCheck {
            params,
            out,
            interaction,
        } => {
            let config = params.resolve(cli.workers)?;
            let model = match interaction {
                Interaction::Truncated => InteractionModel::Truncated,
                Interaction::Unmodified => InteractionModel::Unmodified,
            };
            let report = sweep::run_oracle_check(&config, model)?;
            let hash = config.hash();
            let json = io::oracle_json(&report, &hash)?;
            print!("{json}");
            if let Some(out) = out {
                let files = vec![OutputFile {
                    name: "oracle.json".into(),
                    contents: json,
                }];
                emit(&out, "oracle-check", &hash, files, start.elapsed().as_secs_f64())?;
            }
            if !report.pass {
                return Err(MistError::OracleMismatch {
                    max_diff: report.max_diff,
                    tolerance: report.tolerance,
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
