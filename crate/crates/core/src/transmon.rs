//! Transmon eigenstructure in the charge basis.
//!
//! The Cooper-pair box Hamiltonian `4 E_C (n - n_g)^2 - E_J cos(phi)` is
//! tridiagonal in the charge basis `|n>`, `n = -N..=N`. All energies are
//! linear frequencies in GHz (`E / h`).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{MistError, Result};
use crate::linalg;

pub const DEFAULT_CHARGE_CUTOFF: usize = 30;
pub const DEFAULT_LEVEL_COUNT: usize = 20;
/// Points of the default offset-charge grid spanning one period.
pub const DEFAULT_DISPERSION_POINTS: usize = 21;

const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    /// Charging energy, GHz.
    pub e_c: f64,
    /// Josephson energy, GHz.
    pub e_j: f64,
    /// Offset charge in units of 2e. Wrapped into [-0.5, 0.5] on use.
    pub n_g: f64,
    /// Charge basis spans `-charge_cutoff..=charge_cutoff`.
    pub charge_cutoff: usize,
    /// Number of eigenstates kept.
    pub level_count: usize,
}

impl TransmonParams {
    pub fn new(e_c: f64, e_j: f64, n_g: f64) -> Self {
        TransmonParams {
            e_c,
            e_j,
            n_g,
            charge_cutoff: DEFAULT_CHARGE_CUTOFF,
            level_count: DEFAULT_LEVEL_COUNT,
        }
    }

    pub fn with_offset_charge(mut self, n_g: f64) -> Self {
        self.n_g = n_g;
        self
    }

    pub fn with_truncation(mut self, charge_cutoff: usize, level_count: usize) -> Self {
        self.charge_cutoff = charge_cutoff;
        self.level_count = level_count;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_c > 0.0 && self.e_c.is_finite()) {
            return Err(MistError::invalid("e_c", format!("must be positive, got {}", self.e_c)));
        }
        if !(self.e_j >= 0.0 && self.e_j.is_finite()) {
            return Err(MistError::invalid(
                "e_j",
                format!("must be non-negative, got {}", self.e_j),
            ));
        }
        if !self.n_g.is_finite() {
            return Err(MistError::invalid("n_g", "must be finite"));
        }
        if self.level_count < 2 {
            return Err(MistError::invalid(
                "level_count",
                format!("need at least 2 levels, got {}", self.level_count),
            ));
        }
        if self.charge_cutoff < self.level_count {
            return Err(MistError::CutoffTooSmall {
                cutoff: self.charge_cutoff,
                level_count: self.level_count,
            });
        }
        Ok(())
    }

    /// Offset charge mapped into the canonical period [-0.5, 0.5].
    pub fn wrapped_offset_charge(&self) -> f64 {
        wrap_offset_charge(self.n_g)
    }
}

pub fn wrap_offset_charge(n_g: f64) -> f64 {
    n_g - n_g.round()
}

/// Diagonalized transmon: the lowest `level_count` levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmonEigen {
    /// `E_k - E_0` in GHz, ascending.
    pub energies: Vec<f64>,
    /// `<k|n|k+1> / <0|n|1>`, gauge-fixed non-negative; `couplings[0] == 1`.
    pub couplings: Vec<f64>,
    /// `<0|n|1>` after gauge fixing.
    pub raw_n01: f64,
    /// Absolute ground energy in GHz, measured from the same origin as the
    /// cosine potential (whose maximum sits at `+E_J`).
    pub ground_energy: f64,
    /// Offset charge as prepared (unwrapped).
    pub n_g: f64,
    /// Set when two kept levels are closer than 1e-12 GHz.
    pub degenerate: bool,
    pub params: TransmonParams,
}

impl TransmonEigen {
    pub fn level_count(&self) -> usize {
        self.energies.len()
    }

    /// `E_1 - E_0` in GHz.
    pub fn qubit_frequency(&self) -> f64 {
        self.energies[1]
    }

    /// `(E_1 - E_0) - (E_2 - E_1)` in GHz.
    pub fn anharmonicity(&self) -> f64 {
        2.0 * self.energies[1] - self.energies[2]
    }

    /// Highest kept level whose absolute energy lies below the top of the
    /// cosine barrier.
    pub fn barrier_top_level(&self) -> usize {
        let top = self.params.e_j - self.ground_energy;
        self.energies
            .iter()
            .rposition(|&e| e <= top)
            .unwrap_or(0)
    }
}

/// Charge-basis matrix of dimension `2N + 1`, indexed `n = -N..=N`.
pub fn build_charge_hamiltonian(params: &TransmonParams) -> Result<DMatrix<f64>> {
    params.validate()?;
    let cutoff = params.charge_cutoff as i64;
    let dim = 2 * params.charge_cutoff + 1;
    let n_g = params.wrapped_offset_charge();
    let mut h = DMatrix::zeros(dim, dim);
    for (i, n) in (-cutoff..=cutoff).enumerate() {
        let dn = n as f64 - n_g;
        h[(i, i)] = 4.0 * params.e_c * dn * dn;
        if i + 1 < dim {
            h[(i, i + 1)] = -0.5 * params.e_j;
            h[(i + 1, i)] = -0.5 * params.e_j;
        }
    }
    Ok(h)
}

/// Lowest `level_count` absolute eigenenergies (GHz), no shift applied.
fn absolute_energies(params: &TransmonParams) -> Result<Vec<f64>> {
    let h = build_charge_hamiltonian(params)?;
    let (values, _) = linalg::symmetric_eigen(h, "transmon charge basis")?;
    Ok(values[..params.level_count].to_vec())
}

/// `E_k - E_0` for the kept levels; skips the eigenvector work of [`diagonalize`].
pub fn eigenenergies(params: &TransmonParams) -> Result<Vec<f64>> {
    let abs = absolute_energies(params)?;
    Ok(abs.iter().map(|e| e - abs[0]).collect())
}

pub fn diagonalize(params: &TransmonParams) -> Result<TransmonEigen> {
    let h = build_charge_hamiltonian(params)?;
    let (values, mut vectors) = linalg::symmetric_eigen(h, "transmon charge basis").map_err(
        |e| match e {
            MistError::EigenNonConvergence { .. } => MistError::EigenNonConvergence {
                context: format!("transmon {params:?}"),
            },
            other => other,
        },
    )?;
    let levels = params.level_count;
    let cutoff = params.charge_cutoff as i64;
    let charges: Vec<f64> = (-cutoff..=cutoff).map(|n| n as f64).collect();

    let charge_element = |v: &DMatrix<f64>, a: usize, b: usize| -> f64 {
        charges
            .iter()
            .enumerate()
            .map(|(i, &n)| n * v[(i, a)] * v[(i, b)])
            .sum()
    };

    // sequential gauge: flip |k+1> whenever <k|n|k+1> < 0
    let mut raw = Vec::with_capacity(levels - 1);
    for k in 0..levels - 1 {
        let mut m = charge_element(&vectors, k, k + 1);
        if m < 0.0 {
            vectors.column_mut(k + 1).neg_mut();
            m = -m;
        }
        raw.push(m);
    }
    let raw_n01 = raw[0];
    if raw_n01 <= f64::MIN_POSITIVE {
        return Err(MistError::VanishingChargeElement { e_j: params.e_j });
    }
    let couplings = raw.iter().map(|m| m / raw_n01).collect();

    let ground_energy = values[0];
    let energies: Vec<f64> = values[..levels].iter().map(|e| e - ground_energy).collect();
    let degenerate = energies.windows(2).any(|w| w[1] - w[0] < DEGENERACY_TOL);

    Ok(TransmonEigen {
        energies,
        couplings,
        raw_n01,
        ground_energy,
        n_g: params.n_g,
        degenerate,
        params: *params,
    })
}

/// Junction energy placing `E_1 - E_0` (at `n_g_ref`) on `target_omega_q`.
///
/// Brent's method on a bracket grown geometrically around the transmon-limit
/// seed `(f + E_C)^2 / (8 E_C)`; the qubit frequency rises monotonically with
/// `E_J` in the transmon regime, so the root is unique.
pub fn ej_for_frequency(e_c: f64, target_omega_q: f64, n_g_ref: f64) -> Result<f64> {
    ej_for_frequency_with(
        e_c,
        target_omega_q,
        n_g_ref,
        DEFAULT_CHARGE_CUTOFF,
        DEFAULT_LEVEL_COUNT,
    )
}

pub fn ej_for_frequency_with(
    e_c: f64,
    target_omega_q: f64,
    n_g_ref: f64,
    charge_cutoff: usize,
    level_count: usize,
) -> Result<f64> {
    if !(e_c > 0.0) {
        return Err(MistError::invalid("e_c", format!("must be positive, got {e_c}")));
    }
    if !(target_omega_q > 0.0 && target_omega_q.is_finite()) {
        return Err(MistError::invalid(
            "target_omega_q",
            format!("must be positive, got {target_omega_q}"),
        ));
    }
    let base = TransmonParams {
        e_c,
        e_j: 0.0,
        n_g: n_g_ref,
        charge_cutoff,
        level_count,
    };
    let omega_q = |e_j: f64| -> Result<f64> {
        let e = eigenenergies(&TransmonParams { e_j, ..base })?;
        Ok(e[1])
    };
    let residual = |e_j: f64| -> Result<f64> { Ok(omega_q(e_j)? - target_omega_q) };

    let seed = (target_omega_q + e_c).powi(2) / (8.0 * e_c);
    let (mut lo, mut hi) = (0.5 * seed, 2.0 * seed);
    let (mut f_lo, mut f_hi) = (residual(lo)?, residual(hi)?);
    let lo_floor = 1e-6 * e_c;
    let hi_ceiling = 1e5 * e_c;
    while f_lo > 0.0 && lo > lo_floor {
        lo = (0.25 * lo).max(lo_floor);
        f_lo = residual(lo)?;
    }
    while f_hi < 0.0 && hi < hi_ceiling {
        hi = (4.0 * hi).min(hi_ceiling);
        f_hi = residual(hi)?;
    }
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(MistError::BracketFailure {
            target: target_omega_q,
            min_achievable: f_lo + target_omega_q,
            max_achievable: f_hi + target_omega_q,
        });
    }
    brent(residual, lo, hi, f_lo, f_hi, 1e-12, 1e-11)
}

/// Brent's method; stops when the bracket is below `x_tol` or `|f| < f_tol`.
fn brent<F>(f: F, a: f64, b: f64, fa: f64, fb: f64, x_tol: f64, f_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..200 {
        if fb.abs() < f_tol || (b - a).abs() < x_tol * b.abs().max(1.0) {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lower = (3.0 * a + b) / 4.0;
        let outside = !((s > lower.min(b)) && (s < lower.max(b)));
        let slow = if bisected {
            (s - b).abs() >= (b - c).abs() / 2.0
        } else {
            (s - b).abs() >= (c - d).abs() / 2.0
        };
        if outside || slow {
            s = 0.5 * (a + b);
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s)?;
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Ok(b)
}

/// Uniform grid of `points` offset charges over [-0.5, 0.5].
pub fn default_dispersion_grid(points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|i| -0.5 + i as f64 / (points - 1) as f64)
        .collect()
}

/// Peak-to-peak variation of level `level` over `n_g_grid`, in GHz.
///
/// For `level >= 1` this is the spread of the transition energy `E_k - E_0`.
/// The ground level has no transition energy of its own, so level 0 reports
/// the spread of its absolute energy instead.
pub fn charge_dispersion(params: &TransmonParams, level: usize, n_g_grid: &[f64]) -> Result<f64> {
    if level >= params.level_count {
        return Err(MistError::invalid(
            "level",
            format!("{level} is not among the {} kept levels", params.level_count),
        ));
    }
    if n_g_grid.is_empty() {
        return Err(MistError::invalid("n_g_grid", "must not be empty"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &n_g in n_g_grid {
        let abs = absolute_energies(&params.with_offset_charge(n_g))?;
        let value = if level == 0 { abs[0] } else { abs[level] - abs[0] };
        lo = lo.min(value);
        hi = hi.max(value);
    }
    Ok(hi - lo)
}

/// Level index at which the RWA strip folds back: `round((omega_q - omega_r) / eta)`.
pub fn k_bend(omega_q: f64, omega_r: f64, eta: f64) -> Result<usize> {
    if !(omega_q > omega_r) {
        return Err(MistError::invalid(
            "omega_q",
            format!("must exceed omega_r ({omega_q} <= {omega_r})"),
        ));
    }
    if !(eta > 0.0) {
        return Err(MistError::invalid("eta", format!("must be positive, got {eta}")));
    }
    Ok(((omega_q - omega_r) / eta).round() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const E_C: f64 = 0.194;

    fn ratio_params(ratio: f64, n_g: f64) -> TransmonParams {
        TransmonParams::new(E_C, ratio * E_C, n_g)
    }

    #[test]
    fn free_charge_states_are_decoupled() {
        let h = build_charge_hamiltonian(&TransmonParams::new(E_C, 0.0, 0.1)).unwrap();
        for (i, n) in (-30i64..=30).enumerate() {
            let dn = n as f64 - 0.1;
            assert_eq!(h[(i, i)], 4.0 * E_C * dn * dn);
            for j in 0..h.ncols() {
                if j != i {
                    assert_eq!(h[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn hopping_entries() {
        let h = build_charge_hamiltonian(&TransmonParams::new(E_C, 20.0, 0.0)).unwrap();
        assert_eq!(h[(3, 4)], -10.0);
        assert_eq!(h[(4, 3)], -10.0);
        assert_eq!(h[(3, 5)], 0.0);
    }

    #[test]
    fn rejects_small_cutoff() {
        let p = TransmonParams::new(E_C, 20.0, 0.0).with_truncation(10, 20);
        assert!(matches!(
            build_charge_hamiltonian(&p),
            Err(MistError::CutoffTooSmall { cutoff: 10, level_count: 20 })
        ));
        let p = TransmonParams::new(E_C, 20.0, 0.0).with_truncation(30, 1);
        assert!(diagonalize(&p).is_err());
        assert!(diagonalize(&TransmonParams::new(-1.0, 20.0, 0.0)).is_err());
    }

    #[test]
    fn harmonic_limit_plasma_frequency() {
        let eig = diagonalize(&ratio_params(120.0, 0.0)).unwrap();
        let e_j = 120.0 * E_C;
        let oracle = (8.0 * e_j * E_C).sqrt() - E_C;
        assert!((eig.qubit_frequency() / oracle - 1.0).abs() < 0.02);
        assert!((eig.couplings[1] / 2f64.sqrt() - 1.0).abs() < 0.05);
    }

    #[test]
    fn gauge_is_fixed() {
        for n_g in [-0.5, -0.3, 0.0, 0.2, 0.5] {
            let eig = diagonalize(&ratio_params(120.0, n_g)).unwrap();
            assert_eq!(eig.couplings[0], 1.0);
            assert!(eig.couplings.iter().all(|&c| c >= 0.0));
            assert!(eig.raw_n01 > 0.0);
            assert_eq!(eig.energies[0], 0.0);
            assert!(eig.energies.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn couplings_follow_sqrt_k_deep_in_well() {
        let eig = diagonalize(&ratio_params(120.0, 0.0)).unwrap();
        for k in 0..5 {
            let ratio = eig.couplings[k] / ((k + 1) as f64).sqrt();
            assert!((ratio - 1.0).abs() < 0.10, "k={k} ratio={ratio}");
        }
    }

    #[test]
    fn harmonic_ratio_approaches_one_monotonically() {
        let deviation = |ratio: f64, k: usize| {
            let eig = diagonalize(&ratio_params(ratio, 0.0)).unwrap();
            (eig.couplings[k] / ((k + 1) as f64).sqrt() - 1.0).abs()
        };
        for k in 1..4 {
            let d: Vec<f64> = [50.0, 120.0, 500.0].iter().map(|&r| deviation(r, k)).collect();
            assert!(d[0] > d[1] && d[1] > d[2], "k={k}: {d:?}");
        }
    }

    #[test]
    fn cutoff_convergence() {
        for ratio in [50.0, 120.0] {
            let base = ratio_params(ratio, 0.2);
            let a = eigenenergies(&base).unwrap();
            let b = eigenenergies(&base.with_truncation(40, 20)).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn junction_energy_round_trip() {
        let e_j = ej_for_frequency(E_C, 5.850, 0.0).unwrap();
        let seed = (5.850f64 + E_C).powi(2) / (8.0 * E_C);
        assert!((seed - 23.537).abs() < 1e-3);
        assert!((e_j / seed - 1.0).abs() < 0.05);
        let eig = diagonalize(&TransmonParams::new(E_C, e_j, 0.0)).unwrap();
        assert!((eig.qubit_frequency() - 5.850).abs() < 1e-6);
        let anh = eig.anharmonicity();
        assert!((anh / E_C - 1.0).abs() < 0.15, "anharmonicity {anh}");

        for n_g in [0.2, -0.45] {
            let e_j = ej_for_frequency(E_C, 5.750, n_g).unwrap();
            let eig = diagonalize(&TransmonParams::new(E_C, e_j, n_g)).unwrap();
            assert!((eig.qubit_frequency() - 5.750).abs() < 1e-6);
        }
    }

    #[test]
    fn junction_energy_bracket_failure() {
        // below 4 E_C at n_g = 0 no junction energy fits in the charge regime
        let err = ej_for_frequency(E_C, 1e-4, 0.0).unwrap_err();
        assert!(matches!(err, MistError::BracketFailure { .. }), "{err}");
        assert!(ej_for_frequency(E_C, -1.0, 0.0).is_err());
    }

    #[test]
    fn dispersion_of_free_ground_band() {
        let p = TransmonParams::new(E_C, 0.0, 0.0);
        let grid = default_dispersion_grid(DEFAULT_DISPERSION_POINTS);
        let d = charge_dispersion(&p, 0, &grid).unwrap();
        assert!((d - E_C).abs() < 1e-12, "{d}");
    }

    #[test]
    fn dispersion_grows_toward_barrier_top() {
        let e_j = ej_for_frequency(E_C, 5.850, 0.0).unwrap();
        let p = TransmonParams::new(E_C, e_j, 0.0);
        let grid = default_dispersion_grid(DEFAULT_DISPERSION_POINTS);
        let low = charge_dispersion(&p, 1, &grid).unwrap();
        assert!(low < 1e-4, "level 1 dispersion {low} GHz");
        let top = diagonalize(&p).unwrap().barrier_top_level();
        assert!((9..=10).contains(&top), "barrier-top level {top}");
        let high = charge_dispersion(&p, top, &grid).unwrap();
        assert!(high > 1e-2 && high <= 1.0, "level {top} dispersion {high} GHz");
    }

    #[test]
    fn k_bend_examples() {
        assert_eq!(k_bend(5.750, 4.750, 0.200).unwrap(), 5);
        assert_eq!(k_bend(5.850, 4.750, 0.194).unwrap(), 6);
        assert_eq!(k_bend(4.950, 4.750, 0.200).unwrap(), 1);
        assert!(k_bend(4.0, 4.750, 0.2).is_err());
        assert!(k_bend(5.0, 4.750, 0.0).is_err());
    }

    #[test]
    fn degenerate_levels_flagged() {
        // free charges at n_g = 1/2 pair up
        let p = TransmonParams::new(E_C, 1e-9, 0.5);
        let eig = diagonalize(&p).unwrap();
        assert!(eig.degenerate);
        let eig = diagonalize(&ratio_params(120.0, 0.5)).unwrap();
        assert!(!eig.degenerate);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn periodic_and_parity_symmetric(n_g in -0.5f64..0.5, ratio in 50f64..150.0) {
            let base = diagonalize(&ratio_params(ratio, n_g)).unwrap();
            let shifted = diagonalize(&ratio_params(ratio, n_g + 1.0)).unwrap();
            let mirrored = diagonalize(&ratio_params(ratio, -n_g)).unwrap();
            for other in [&shifted, &mirrored] {
                for (a, b) in base.energies.iter().zip(&other.energies) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
                for (a, b) in base.couplings.iter().zip(&other.couplings) {
                    prop_assert!((a - b).abs() < 1e-8);
                }
            }
        }
    }
}
