//! CSV and JSON exports. Every file opens with a metadata header carrying the
//! tool version, config hash and units; CSV headers are `#` comment lines,
//! JSON documents carry a leading `meta` object.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::analysis::OnsetPoint;
use crate::dynamics::{PopulationTrace, SurvivalCurve};
use crate::error::Result;
use crate::field::FieldTrajectory;
use crate::strip::{CrossingRecord, SpectrumResult};
use crate::sweep::{BoundaryOutcome, MemberId, OracleReport, SweepResult, TOOL_VERSION};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

impl OutputFile {
    fn new(name: impl Into<String>, contents: String) -> Self {
        OutputFile {
            name: name.into(),
            contents,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_hash: &'a str,
    pub units: &'a str,
}

impl<'a> Meta<'a> {
    pub fn new(config_hash: &'a str, units: &'a str) -> Self {
        Meta {
            tool: "mist",
            version: TOOL_VERSION,
            config_hash,
            units,
        }
    }

    fn csv_header(&self) -> String {
        format!(
            "# {} {}\n# config_hash: {}\n# units: {}\n",
            self.tool, self.version, self.config_hash, self.units
        )
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn field_csv(trajectory: &FieldTrajectory, config_hash: &str) -> String {
    let mut out = Meta::new(config_hash, "t_ns: ns; alpha: sqrt(photons); nbar: photons").csv_header();
    out.push_str("t_ns,re_alpha,im_alpha,nbar\n");
    for ((t, a), n) in trajectory.times.iter().zip(&trajectory.alpha).zip(&trajectory.nbar) {
        let _ = writeln!(out, "{t},{},{},{n}", a.re, a.im);
    }
    out
}

pub fn fan_csv(spectrum: &SpectrumResult, config_hash: &str) -> String {
    let mut out = Meta::new(config_hash, "nbar: photons; branch energies: GHz, rotating frame").csv_header();
    out.push_str("nbar");
    for label in 0..spectrum.branch_count() {
        let _ = write!(out, ",branch_{label}");
    }
    out.push('\n');
    for (i, n) in spectrum.nbar_grid.iter().enumerate() {
        let _ = writeln!(out, "{n},{}", join(spectrum.branches.iter().map(|b| b[i])));
    }
    out
}

#[derive(Serialize)]
struct CrossingsDoc<'a> {
    meta: Meta<'a>,
    crossings: &'a [CrossingRecord],
    low_overlap_points: &'a [usize],
    ambiguous_points: &'a [usize],
}

pub fn crossings_json(spectrum: &SpectrumResult, config_hash: &str) -> Result<String> {
    to_json(&CrossingsDoc {
        meta: Meta::new(config_hash, "nbar_cross: photons; gap, g_eff: GHz"),
        crossings: &spectrum.crossings,
        low_overlap_points: &spectrum.low_overlap_points,
        ambiguous_points: &spectrum.ambiguous_points,
    })
}

pub fn trace_csv(trace: &PopulationTrace, config_hash: &str) -> String {
    let mut out = Meta::new(config_hash, "t_ns: ns; nbar: photons; populations: dimensionless").csv_header();
    let _ = writeln!(
        out,
        "# flagged_samples: low_overlap={:?} ambiguous={:?}",
        trace.low_overlap_samples, trace.ambiguous_samples
    );
    out.push_str("t_ns,nbar,norm");
    let dim = trace.populations.first().map_or(0, Vec::len);
    for label in 0..dim {
        let _ = write!(out, ",pop_branch_{label}");
    }
    out.push('\n');
    for (i, pops) in trace.populations.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            trace.times[i],
            trace.nbar[i],
            trace.norm[i],
            join(pops.iter().copied())
        );
    }
    out
}

pub fn survival_csv(curve: &SurvivalCurve, config_hash: &str) -> String {
    let mut out = Meta::new(config_hash, "nbar: photons; survival: running minimum, dimensionless").csv_header();
    out.push_str("nbar,survival\n");
    for (n, s) in curve.nbar_axis.iter().zip(&curve.survival_running_min) {
        let _ = writeln!(out, "{n},{s}");
    }
    out
}

/// First row: photon axis after a `delta` corner cell; first column: detuning.
pub fn heatmap_csv(result: &SweepResult, state_index: usize) -> String {
    let map = &result.heatmaps[state_index];
    let mut out = Meta::new(
        &result.config_hash,
        "rows: delta (GHz); columns: nbar (photons); values: charge-averaged running-min survival",
    )
    .csv_header();
    let _ = writeln!(out, "# initial_state: {}", map.initial_state);
    let _ = writeln!(out, "delta,{}", join(result.nbar_grid.iter().copied()));
    for (delta, row) in result.delta_grid.iter().zip(&map.values) {
        let _ = writeln!(out, "{delta},{}", join(row.iter().copied()));
    }
    out
}

#[derive(Serialize)]
struct PointDoc {
    delta: f64,
    nbar_onset: f64,
    uncertainty: f64,
}

#[derive(Serialize)]
struct SampleDoc {
    delta: f64,
    nbar: f64,
}

#[derive(Serialize)]
struct BoundaryDoc<'a> {
    meta: Meta<'a>,
    initial_state: usize,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none")]
    b: Option<f64>,
    threshold: f64,
    points: Vec<PointDoc>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    boundary_samples: Vec<SampleDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorDoc<'a>>,
}

#[derive(Serialize)]
struct ErrorDoc<'a> {
    kind: &'a str,
    message: &'a str,
}

pub fn boundary_json(result: &SweepResult, state_index: usize) -> Result<String> {
    let points = result.onsets[state_index]
        .iter()
        .map(|p| PointDoc {
            delta: p.delta,
            nbar_onset: p.nbar_onset,
            uncertainty: p.uncertainty,
        })
        .collect();
    let mut doc = BoundaryDoc {
        meta: Meta::new(&result.config_hash, "A, nbar: photons; B: 1/GHz; delta: GHz"),
        initial_state: result.initial_states[state_index],
        a: None,
        b: None,
        threshold: result.config.threshold,
        points,
        boundary_samples: Vec::new(),
        error: None,
    };
    match &result.boundaries[state_index] {
        BoundaryOutcome::Fitted(fit) => {
            doc.a = Some(fit.a);
            doc.b = Some(fit.b);
            doc.boundary_samples = result
                .delta_grid
                .iter()
                .map(|&delta| SampleDoc {
                    delta,
                    nbar: fit.boundary(delta),
                })
                .collect();
        }
        BoundaryOutcome::Failed { kind, message } => doc.error = Some(ErrorDoc { kind, message }),
    }
    to_json(&doc)
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    meta: Meta<'a>,
    config: &'a crate::sweep::SweepConfig,
    delta_grid: &'a [f64],
    nbar_grid_points: usize,
    nbar_max: f64,
    initial_states: &'a [usize],
    e_j: &'a [f64],
    raw_onsets: &'a [Vec<OnsetPoint>],
    onsets: &'a [Vec<OnsetPoint>],
    boundaries: &'a [BoundaryOutcome],
    flagged_members: &'a [MemberId],
}

/// Every sweep file except the manifest. Independent of worker count.
pub fn sweep_files(result: &SweepResult) -> Result<Vec<OutputFile>> {
    let mut files = Vec::new();
    for (i, state) in result.initial_states.iter().enumerate() {
        files.push(OutputFile::new(format!("heatmap_state{state}.csv"), heatmap_csv(result, i)));
        files.push(OutputFile::new(format!("boundary_state{state}.json"), boundary_json(result, i)?));
    }
    let summary = SummaryDoc {
        meta: Meta::new(&result.config_hash, "GHz, ns, photons"),
        config: &result.config,
        delta_grid: &result.delta_grid,
        nbar_grid_points: result.nbar_grid.len(),
        nbar_max: result.nbar_grid.last().copied().unwrap_or(0.0),
        initial_states: &result.initial_states,
        e_j: &result.e_j,
        raw_onsets: &result.raw_onsets,
        onsets: &result.onsets,
        boundaries: &result.boundaries,
        flagged_members: &result.flagged_members,
    };
    files.push(OutputFile::new("sweep.json", to_json(&summary)?));
    Ok(files)
}

#[derive(Serialize)]
struct ManifestDoc<'a> {
    meta: Meta<'a>,
    command: &'a str,
    files: Vec<&'a str>,
    wall_time_s: f64,
}

/// Lists the files of one run with its wall time; the only non-reproducible output.
pub fn manifest_json(command: &str, config_hash: &str, files: &[OutputFile], wall_time: f64) -> Result<String> {
    to_json(&ManifestDoc {
        meta: Meta::new(config_hash, "wall_time_s: s"),
        command,
        files: files.iter().map(|f| f.name.as_str()).collect(),
        wall_time_s: wall_time,
    })
}

#[derive(Serialize)]
struct OracleDoc<'a> {
    meta: Meta<'a>,
    #[serde(flatten)]
    report: &'a OracleReport,
}

pub fn oracle_json(report: &OracleReport, config_hash: &str) -> Result<String> {
    to_json(&OracleDoc {
        meta: Meta::new(config_hash, "diffs: GHz"),
        report,
    })
}

pub fn write_files(dir: &Path, files: &[OutputFile]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for file in files {
        fs::write(dir.join(&file.name), &file.contents)?;
    }
    Ok(())
}
