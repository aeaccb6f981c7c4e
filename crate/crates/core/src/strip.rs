//! Semi-classical RWA strip: the transmon in the rotating frame of the
//! resonator, driven by the coherent field through excitation-preserving
//! couplings.
//!
//! In the basis of bare transmon levels `|k>` the effective Hamiltonian is
//! tridiagonal: diagonal `E_k - k omega_r`, and bond `k -> k+1` equal to
//! `phase * Re(sqrt(|alpha|^2 - k)) * c_k * g`, where `c_k` are the normalized
//! charge matrix elements and `phase = alpha/|alpha| * exp(i 2 pi (omega_r - omega_d) t)`.
//! The truncated square root switches bond `k` off below `k` photons, which
//! makes the spectrum at `|alpha|^2 = N` coincide with the Jaynes-Cummings
//! strip holding `N` excitations.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{MistError, Result};
use crate::linalg;
use crate::transmon::{self, TransmonEigen};

/// Overlap below which a branch assignment is flagged.
pub const MIN_TRACKING_OVERLAP: f64 = 0.5;
const AMBIGUITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Qubit-resonator coupling `g / 2 pi`, GHz.
    G(f64),
    /// Coupling efficiency; `g = k_eff * sqrt(omega_q * omega_r) / 2`.
    KEff(f64),
}

/// How the field amplitude enters the bonds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionModel {
    /// `Re(sqrt(|alpha|^2 - k))`: bond `k` is off below `k` photons.
    #[default]
    Truncated,
    /// `|alpha|` on every bond. Breaks the correspondence with the
    /// excitation-number strip at low photon numbers; used to exercise the
    /// oracle check.
    Unmodified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StripConfig {
    pub eigen: TransmonEigen,
    pub coupling: Coupling,
    /// Bare resonator frequency, GHz.
    pub omega_r: f64,
    /// Drive frequency, GHz.
    pub omega_d: f64,
    /// Number of transmon levels in the strip (at most `eigen.level_count()`).
    pub level_count: usize,
    g: f64,
}

impl StripConfig {
    /// Resolves the coupling strength once. For `KEff` the qubit frequency is
    /// taken as `E_1 - E_0` at zero offset charge.
    pub fn new(eigen: TransmonEigen, coupling: Coupling, omega_r: f64, omega_d: f64) -> Result<Self> {
        if !(omega_r > 0.0) {
            return Err(MistError::invalid("omega_r", format!("must be positive, got {omega_r}")));
        }
        let g = match coupling {
            Coupling::G(g) => g,
            Coupling::KEff(k_eff) => {
                let reference = eigen.params.with_offset_charge(0.0);
                let omega_q = transmon::eigenenergies(&reference)?[1];
                k_eff * (omega_q * omega_r).sqrt() / 2.0
            }
        };
        if !(g > 0.0 && g.is_finite()) {
            return Err(MistError::invalid("g", format!("derived coupling must be positive, got {g}")));
        }
        let level_count = eigen.level_count();
        Ok(StripConfig {
            eigen,
            coupling,
            omega_r,
            omega_d,
            level_count,
            g,
        })
    }

    pub fn with_level_count(mut self, level_count: usize) -> Result<Self> {
        if level_count < 2 || level_count > self.eigen.level_count() {
            return Err(MistError::invalid(
                "level_count",
                format!("must lie in 2..={}, got {level_count}", self.eigen.level_count()),
            ));
        }
        self.level_count = level_count;
        Ok(self)
    }

    /// Same coupling and frequencies with a different transmon eigenstructure.
    /// The resolved `g` is kept.
    pub fn with_eigen(&self, eigen: TransmonEigen) -> Self {
        StripConfig {
            level_count: self.level_count.min(eigen.level_count()),
            eigen,
            coupling: Coupling::G(self.g),
            ..self.clone()
        }
    }

    /// Coupling strength `g / 2 pi`, GHz.
    pub fn g(&self) -> f64 {
        self.g
    }

    /// Rotating-frame bare energies `E_k - k omega_r`, GHz.
    pub fn bare_energies(&self) -> Vec<f64> {
        (0..self.level_count)
            .map(|k| self.eigen.energies[k] - k as f64 * self.omega_r)
            .collect()
    }

    /// Bond amplitudes `c_k g`, GHz.
    fn bond_scales(&self) -> Vec<f64> {
        (0..self.level_count - 1)
            .map(|k| self.eigen.couplings[k] * self.g)
            .collect()
    }
}

/// Tridiagonal Hermitian matrix whose lower bonds share one phase:
/// `H[k+1][k] = phase * bonds[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StripMatrix {
    pub diagonal: Vec<f64>,
    pub bonds: Vec<f64>,
    pub phase: Complex64,
}

/// Ascending eigenvalues with eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl StripMatrix {
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut h = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for (k, &d) in self.diagonal.iter().enumerate() {
            h[(k, k)] = Complex64::new(d, 0.0);
        }
        for (k, &b) in self.bonds.iter().enumerate() {
            h[(k + 1, k)] = self.phase * b;
            h[(k, k + 1)] = (self.phase * b).conj();
        }
        h
    }

    /// Real symmetric matrix with the common phase gauged away.
    pub fn to_real(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for (k, &d) in self.diagonal.iter().enumerate() {
            h[(k, k)] = d;
        }
        for (k, &b) in self.bonds.iter().enumerate() {
            h[(k + 1, k)] = b;
            h[(k, k + 1)] = b;
        }
        h
    }

    /// `H = U R U^dagger` with `U = diag(phase^k)` and `R` real symmetric, so
    /// eigenvectors of `H` are those of `R` with row `k` scaled by `phase^k`.
    pub fn eigen(&self) -> Result<EigenBasis> {
        let (values, real) = linalg::symmetric_eigen(self.to_real(), "strip Hamiltonian")?;
        let n = self.dim();
        let powers = self.phase_powers();
        let vectors = DMatrix::from_fn(n, n, |i, j| powers[i] * real[(i, j)]);
        Ok(EigenBasis { values, vectors })
    }

    /// `phase^k` for each row; unit phase when no bond is active.
    pub fn phase_powers(&self) -> Vec<Complex64> {
        let phase = if self.phase.norm() > 0.0 {
            self.phase / self.phase.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut powers = Vec::with_capacity(self.dim());
        let mut p = Complex64::new(1.0, 0.0);
        for _ in 0..self.dim() {
            powers.push(p);
            p *= phase;
        }
        powers
    }
}

/// Effective Hamiltonian for field amplitude `alpha` at time `t` (ns).
pub fn strip_matrix(
    config: &StripConfig,
    alpha: Complex64,
    t: f64,
    model: InteractionModel,
) -> StripMatrix {
    let nbar = alpha.norm_sqr();
    let diagonal = config.bare_energies();
    if nbar == 0.0 {
        return StripMatrix {
            bonds: vec![0.0; diagonal.len() - 1],
            diagonal,
            phase: Complex64::new(0.0, 0.0),
        };
    }
    let rotation = TAU * (config.omega_r - config.omega_d) * t;
    let phase = alpha / alpha.norm() * Complex64::from_polar(1.0, rotation);
    let bonds = config
        .bond_scales()
        .iter()
        .enumerate()
        .map(|(k, scale)| {
            let amplitude = match model {
                InteractionModel::Truncated => (nbar - k as f64).max(0.0).sqrt(),
                InteractionModel::Unmodified => nbar.sqrt(),
            };
            amplitude * scale
        })
        .collect();
    StripMatrix {
        diagonal,
        bonds,
        phase,
    }
}

/// Dense `K x K` effective Hamiltonian in GHz.
pub fn effective_hamiltonian(config: &StripConfig, alpha: Complex64, t: f64) -> DMatrix<Complex64> {
    strip_matrix(config, alpha, t, InteractionModel::Truncated).to_dense()
}

/// Excitation-number strip of the RWA Jaynes-Cummings ladder holding
/// `excitations` quanta, in the basis `|k, N - k>`, `k = 0..=min(K-1, N)`,
/// with the constant `N omega_r` removed.
pub fn jtc_strip_hamiltonian(config: &StripConfig, excitations: usize) -> DMatrix<f64> {
    let dim = config.level_count.min(excitations + 1);
    let bare = config.bare_energies();
    let scales = config.bond_scales();
    let mut h = DMatrix::zeros(dim, dim);
    for k in 0..dim {
        h[(k, k)] = bare[k];
        if k + 1 < dim {
            let b = scales[k] * ((excitations - k) as f64).sqrt();
            h[(k + 1, k)] = b;
            h[(k, k + 1)] = b;
        }
    }
    h
}

/// Result of matching eigenvectors at one point to the labelled branches of
/// the previous point.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchMatch {
    /// `columns[label]` is the new eigenvector column carrying `label`.
    pub columns: Vec<usize>,
    /// Smallest `|<prev|new>|^2` among accepted assignments.
    pub min_overlap: f64,
    /// Some label had two candidates within 1e-6 overlap; index order decided.
    pub ambiguous: bool,
}

/// Greedy maximal-overlap assignment: pairs are accepted in order of
/// descending `|<prev_i|new_j>|^2`, ties broken by `(i, j)` index order.
pub fn match_branches(previous: &DMatrix<Complex64>, current: &DMatrix<Complex64>) -> BranchMatch {
    let n = previous.ncols();
    let overlaps = previous.adjoint() * current;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            pairs.push((overlaps[(i, j)].norm_sqr(), i, j));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut columns = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    let mut min_overlap = f64::INFINITY;
    let mut remaining = n;
    for &(o, i, j) in &pairs {
        if remaining == 0 {
            break;
        }
        if columns[i] != usize::MAX || taken[j] {
            continue;
        }
        columns[i] = j;
        taken[j] = true;
        min_overlap = min_overlap.min(o);
        remaining -= 1;
    }

    let ambiguous = (0..n).any(|i| {
        let chosen = overlaps[(i, columns[i])].norm_sqr();
        chosen > AMBIGUITY_TOL
            && (0..n).any(|j| j != columns[i] && (overlaps[(i, j)].norm_sqr() - chosen).abs() < AMBIGUITY_TOL)
    });

    BranchMatch {
        columns,
        min_overlap: if n == 0 { 1.0 } else { min_overlap },
        ambiguous,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingRecord {
    pub branch_a: usize,
    pub branch_b: usize,
    /// Photons.
    pub nbar_cross: f64,
    /// Full splitting `2 g_eff`, GHz.
    pub gap: f64,
    /// GHz.
    pub g_eff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub nbar_grid: Vec<f64>,
    /// `branches[label][i]`: energy (GHz, rotating frame) of the branch
    /// anchored to bare level `label` at grid point `i`.
    pub branches: Vec<Vec<f64>>,
    pub crossings: Vec<CrossingRecord>,
    /// Grid indices where some branch continued with overlap below 0.5.
    pub low_overlap_points: Vec<usize>,
    /// Grid indices where the matching needed an index tie-break.
    pub ambiguous_points: Vec<usize>,
}

impl SpectrumResult {
    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn is_flagged(&self) -> bool {
        !self.low_overlap_points.is_empty() || !self.ambiguous_points.is_empty()
    }
}

/// Instantaneous spectrum against mean photon number with `omega_d = omega_r`
/// and real positive `alpha = sqrt(nbar)`. Branches are labelled by their bare
/// level at `nbar = 0` and continued by [`match_branches`]. Crossings are left
/// empty; see [`find_avoided_crossings`].
pub fn fan_diagram(config: &StripConfig, nbar_grid: &[f64]) -> Result<SpectrumResult> {
    if nbar_grid.first() != Some(&0.0) {
        return Err(MistError::invalid("nbar_grid", "must start at 0"));
    }
    if nbar_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MistError::invalid("nbar_grid", "must be strictly ascending"));
    }
    let resonant = StripConfig {
        omega_d: config.omega_r,
        ..config.clone()
    };
    let columns: Vec<EigenBasis> = nbar_grid
        .par_iter()
        .map(|&nbar| {
            strip_matrix(
                &resonant,
                Complex64::new(nbar.sqrt(), 0.0),
                0.0,
                InteractionModel::Truncated,
            )
            .eigen()
        })
        .collect::<Result<_>>()?;

    let k = config.level_count;
    let mut branches = vec![Vec::with_capacity(nbar_grid.len()); k];
    let mut low_overlap_points = Vec::new();
    let mut ambiguous_points = Vec::new();
    let mut previous = DMatrix::<Complex64>::identity(k, k);
    for (i, basis) in columns.iter().enumerate() {
        let matched = match_branches(&previous, &basis.vectors);
        if matched.min_overlap < MIN_TRACKING_OVERLAP {
            low_overlap_points.push(i);
        }
        if matched.ambiguous {
            ambiguous_points.push(i);
        }
        let mut next = DMatrix::zeros(k, k);
        for (label, &col) in matched.columns.iter().enumerate() {
            branches[label].push(basis.values[col]);
            next.set_column(label, &basis.vectors.column(col));
        }
        previous = next;
    }
    Ok(SpectrumResult {
        nbar_grid: nbar_grid.to_vec(),
        branches,
        crossings: Vec::new(),
        low_overlap_points,
        ambiguous_points,
    })
}

/// Local minima of the pairwise branch separation with full splitting inside
/// `[min_gap, max_gap]` (GHz).
///
/// The squared separation of two levels near an avoided crossing is a
/// parabola in the sweep parameter, so a parabola through the squared gaps of
/// the grid minimum and its neighbours locates `nbar_cross` and the splitting.
pub fn find_avoided_crossings(
    spectrum: &SpectrumResult,
    min_gap: f64,
    max_gap: f64,
) -> Vec<CrossingRecord> {
    let x = &spectrum.nbar_grid;
    if x.len() < 3 {
        return Vec::new();
    }
    let mut records = Vec::new();
    let n = spectrum.branches.len();
    for a in 0..n {
        for b in a + 1..n {
            let gap: Vec<f64> = spectrum.branches[a]
                .iter()
                .zip(&spectrum.branches[b])
                .map(|(ea, eb)| (ea - eb).abs())
                .collect();
            for i in 1..gap.len() - 1 {
                let tol = 1e-10 * gap[i].max(1.0);
                if !(gap[i - 1] - gap[i] > tol && gap[i + 1] - gap[i] >= -tol) {
                    continue;
                }
                let (nbar_cross, splitting) = refine_minimum(
                    [x[i - 1], x[i], x[i + 1]],
                    [gap[i - 1].powi(2), gap[i].powi(2), gap[i + 1].powi(2)],
                    gap[i],
                );
                if splitting > 0.0 && splitting >= min_gap && splitting <= max_gap {
                    records.push(CrossingRecord {
                        branch_a: a,
                        branch_b: b,
                        nbar_cross,
                        gap: splitting,
                        g_eff: 0.5 * splitting,
                    });
                }
            }
        }
    }
    records.sort_by(|p, q| {
        p.nbar_cross
            .total_cmp(&q.nbar_cross)
            .then(p.branch_a.cmp(&q.branch_a))
            .then(p.branch_b.cmp(&q.branch_b))
    });
    records
}

/// Vertex of the parabola through three `(x, gap^2)` points, as `(x, gap)`.
fn refine_minimum(x: [f64; 3], y: [f64; 3], fallback_gap: f64) -> (f64, f64) {
    let s01 = (y[1] - y[0]) / (x[1] - x[0]);
    let s12 = (y[2] - y[1]) / (x[2] - x[1]);
    let curvature = (s12 - s01) / (x[2] - x[0]);
    if !(curvature > 0.0) {
        return (x[1], fallback_gap);
    }
    let slope = s01 - curvature * (x[0] + x[1]);
    let vertex = (-slope / (2.0 * curvature)).clamp(x[0], x[2]);
    let value = y[0] + s01 * (vertex - x[0]) + curvature * (vertex - x[0]) * (vertex - x[1]);
    (vertex, value.max(0.0).sqrt())
}

/// Perturbative coupling between `|0>` and `|m>` through the virtual levels
/// `1..m`, in GHz:
/// `prod_{k<m} (c_k g) / prod_{0<k<m} Delta_{k,0} * nbar^{m/2}`,
/// with `Delta_{k,0} = (E_k - k omega_r) - E_0`. Returned as a magnitude.
pub fn g_eff_perturbative(config: &StripConfig, target_level: usize, nbar_cross: f64) -> Result<f64> {
    let (bond_product, detuning_product) = perturbative_products(config, target_level)?;
    Ok((bond_product / detuning_product * nbar_cross.powf(target_level as f64 / 2.0)).abs())
}

/// The same coupling written as `C (nbar/n_crit)^{(m-1)/2} g sqrt(nbar)`, with
/// `n_crit = (Delta/g)^2 / 4` and the dimensionless ladder factor
/// `C = prod c_k * prod (Delta / Delta_{k,0}) / 2^{m-1}`.
pub fn g_eff_from_critical_photons(
    config: &StripConfig,
    target_level: usize,
    nbar_cross: f64,
) -> Result<f64> {
    let m = target_level;
    perturbative_products(config, m)?;
    let g = config.g();
    let delta = config.eigen.energies[1] - config.omega_r;
    let n_crit = analysis::n_crit(delta, g)?;
    let bare = config.bare_energies();
    let coupling_product: f64 = config.eigen.couplings[..m].iter().product();
    let ladder: f64 = (1..m).map(|k| delta / (bare[k] - bare[0])).product();
    let factor = coupling_product * ladder / 2f64.powi(m as i32 - 1);
    Ok((factor * (nbar_cross / n_crit).powf((m as f64 - 1.0) / 2.0) * g * nbar_cross.sqrt()).abs())
}

fn perturbative_products(config: &StripConfig, m: usize) -> Result<(f64, f64)> {
    if m == 0 || m >= config.level_count {
        return Err(MistError::invalid(
            "target_level",
            format!("must lie in 1..{}, got {m}", config.level_count),
        ));
    }
    let bare = config.bare_energies();
    let mut detuning_product = 1.0;
    for k in 1..m {
        let detuning = bare[k] - bare[0];
        if detuning.abs() < 1e-12 {
            return Err(MistError::ResonantIntermediate { level: k, detuning });
        }
        detuning_product *= detuning;
    }
    let bond_product: f64 = config.bond_scales()[..m].iter().product();
    Ok((bond_product, detuning_product))
}

/// Rotating-frame energies against offset charge at fixed photon number.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetChargeSlice {
    pub n_g: f64,
    /// `E_k - k omega_r` at this offset charge.
    pub bare: Vec<f64>,
    /// Ascending eigenvalues of the effective Hamiltonian at `nbar`.
    pub dressed: Vec<f64>,
}

/// Bare and dressed strip energies over a scan of offset charge; the strip is
/// rebuilt from `config.eigen.params` at each point with `g` held fixed.
pub fn offset_charge_scan(config: &StripConfig, nbar: f64, n_g_grid: &[f64]) -> Result<Vec<OffsetChargeSlice>> {
    n_g_grid
        .par_iter()
        .map(|&n_g| {
            let eigen = transmon::diagonalize(&config.eigen.params.with_offset_charge(n_g))?;
            let member = config.with_eigen(eigen);
            let h = strip_matrix(&member, Complex64::new(nbar.sqrt(), 0.0), 0.0, InteractionModel::Truncated);
            let dressed = h.eigen()?.values;
            Ok(OffsetChargeSlice {
                n_g,
                bare: member.bare_energies(),
                dressed,
            })
        })
        .collect()
}
