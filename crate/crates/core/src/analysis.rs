//! Dispersive-regime utilities and extraction of the transition boundary.

use serde::{Deserialize, Serialize};

use crate::dynamics::SurvivalCurve;
use crate::error::{MistError, Result};

/// Default threshold on the charge-averaged running-minimum survival.
pub const DEFAULT_THRESHOLD: f64 = 0.9;

/// Inputs of the dispersive model, all linear frequencies in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersiveParams {
    pub g: f64,
    /// `omega_q - omega_r`.
    pub delta: f64,
    /// Anharmonicity `omega_q - omega_21`, positive for a transmon.
    pub eta: f64,
    pub omega_r: f64,
    pub omega_q: f64,
}

impl DispersiveParams {
    pub fn new(g: f64, omega_q: f64, omega_r: f64, eta: f64) -> Self {
        DispersiveParams {
            g,
            delta: omega_q - omega_r,
            eta,
            omega_r,
            omega_q,
        }
    }

    fn check(&self) -> Result<()> {
        if self.delta == 0.0 {
            return Err(MistError::invalid("delta", "qubit and resonator are degenerate"));
        }
        if !(self.omega_q > 0.0) {
            return Err(MistError::invalid("omega_q", format!("must be positive, got {}", self.omega_q)));
        }
        let scale = self.delta.abs().max(self.eta.abs());
        if (self.delta - self.eta).abs() <= 4.0 * f64::EPSILON * scale {
            return Err(MistError::StraddlingResonance { delta: self.delta });
        }
        Ok(())
    }
}

/// Dispersive shift `chi = g^2/Delta * eta/(Delta - eta) * omega_r/omega_q`, GHz.
pub fn chi(p: &DispersiveParams) -> Result<f64> {
    p.check()?;
    Ok(p.g * p.g / p.delta * (p.eta / (p.delta - p.eta)) * (p.omega_r / p.omega_q))
}

/// Resonator frequencies with the qubit in `|0>` and `|1>`, GHz:
/// `omega_r - g^2/Delta` and that minus `2 chi`.
pub fn dressed_frequencies(p: &DispersiveParams) -> Result<(f64, f64)> {
    let chi = chi(p)?;
    let ket0 = p.omega_r - p.g * p.g / p.delta;
    Ok((ket0, ket0 - 2.0 * chi))
}

/// Mean photon number from an AC-Stark shift `omega_q(0) - omega_q(nbar)`.
pub fn stark_to_photons(freq_shift: f64, chi: f64) -> Result<f64> {
    if !(chi > 0.0) {
        return Err(MistError::invalid("chi", format!("must be positive, got {chi}")));
    }
    if freq_shift < 0.0 {
        return Err(MistError::NegativeStarkShift { shift: freq_shift });
    }
    Ok(freq_shift / (2.0 * chi))
}

/// `(Delta / g)^2 / 4`.
pub fn n_crit(delta: f64, g: f64) -> Result<f64> {
    if !(g > 0.0) {
        return Err(MistError::invalid("g", format!("must be positive, got {g}")));
    }
    Ok((delta / g).powi(2) / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OnsetPoint {
    /// Detuning, GHz.
    pub delta: f64,
    /// Photons.
    pub nbar_onset: f64,
    /// `sqrt(nbar_onset)`, the coherent-state photon-number spread.
    pub uncertainty: f64,
    pub initial_state: usize,
}

impl OnsetPoint {
    pub fn new(delta: f64, nbar_onset: f64, initial_state: usize) -> Self {
        OnsetPoint {
            delta,
            nbar_onset,
            uncertainty: nbar_onset.max(0.0).sqrt(),
            initial_state,
        }
    }
}

/// Smallest axis photon number at which the curve is below `threshold`.
pub fn onset_photon_number(curve: &SurvivalCurve, threshold: f64) -> Option<f64> {
    curve
        .nbar_axis
        .iter()
        .zip(&curve.survival_running_min)
        .find(|(_, &s)| s < threshold)
        .map(|(&n, _)| n)
}

/// Onsets per detuning (curves in ascending detuning), followed by the
/// monotone filter: scanning upward in detuning, a point is kept only if its
/// onset strictly exceeds every onset kept before it.
pub fn extract_onsets(
    curves: &[(f64, SurvivalCurve)],
    threshold: f64,
    initial_state: usize,
) -> Vec<OnsetPoint> {
    let raw: Vec<OnsetPoint> = curves
        .iter()
        .filter_map(|(delta, curve)| {
            onset_photon_number(curve, threshold).map(|n| OnsetPoint::new(*delta, n, initial_state))
        })
        .collect();
    monotone_filter(&raw)
}

pub fn monotone_filter(points: &[OnsetPoint]) -> Vec<OnsetPoint> {
    let mut kept: Vec<OnsetPoint> = Vec::new();
    for p in points {
        if kept.last().map_or(true, |last| p.nbar_onset > last.nbar_onset) {
            kept.push(*p);
        }
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWeighting {
    #[default]
    Unweighted,
    /// Weights `nbar` in log space, i.e. `sigma_ln = 1/sqrt(nbar)` from the
    /// `+-sqrt(nbar)` photon-number spread.
    ShotNoise,
}

/// `n_fit(Delta) = A exp(B Delta)` and the operating limit `n_fit - sqrt(n_fit)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionBoundary {
    /// Photons.
    #[serde(rename = "A")]
    pub a: f64,
    /// 1/GHz.
    #[serde(rename = "B")]
    pub b: f64,
    pub points: Vec<OnsetPoint>,
    pub weighting: FitWeighting,
}

impl TransitionBoundary {
    pub fn n_fit(&self, delta: f64) -> f64 {
        self.a * (self.b * delta).exp()
    }

    pub fn boundary(&self, delta: f64) -> f64 {
        boundary_from_fit(self.n_fit(delta))
    }
}

pub fn boundary_from_fit(n_fit: f64) -> f64 {
    n_fit - n_fit.sqrt()
}

pub fn fit_boundary(points: &[OnsetPoint]) -> Result<TransitionBoundary> {
    fit_boundary_weighted(points, FitWeighting::Unweighted)
}

/// Least-squares line through `(Delta, ln nbar)`.
pub fn fit_boundary_weighted(points: &[OnsetPoint], weighting: FitWeighting) -> Result<TransitionBoundary> {
    if let Some(p) = points.iter().find(|p| !(p.nbar_onset > 0.0)) {
        return Err(MistError::NonPositiveOnset {
            delta: p.delta,
            nbar: p.nbar_onset,
        });
    }
    let mut deltas: Vec<f64> = points.iter().map(|p| p.delta).collect();
    deltas.sort_by(f64::total_cmp);
    deltas.dedup();
    if deltas.len() < 2 {
        return Err(MistError::InsufficientPoints {
            distinct: deltas.len(),
        });
    }

    let weight = |p: &OnsetPoint| match weighting {
        FitWeighting::Unweighted => 1.0,
        FitWeighting::ShotNoise => p.nbar_onset,
    };
    let w_sum: f64 = points.iter().map(weight).sum();
    let x_mean = points.iter().map(|p| weight(p) * p.delta).sum::<f64>() / w_sum;
    let y_mean = points.iter().map(|p| weight(p) * p.nbar_onset.ln()).sum::<f64>() / w_sum;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in points {
        let dx = p.delta - x_mean;
        sxy += weight(p) * dx * (p.nbar_onset.ln() - y_mean);
        sxx += weight(p) * dx * dx;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    Ok(TransitionBoundary {
        a: intercept.exp(),
        b: slope,
        points: points.to_vec(),
        weighting,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const G: f64 = 0.126513;

    fn readout_params() -> DispersiveParams {
        DispersiveParams::new(G, 5.850, 4.750, 0.194)
    }

    #[test]
    fn dispersive_shift_at_readout_parameters() {
        let chi = chi(&readout_params()).unwrap();
        let oracle = G * G / 1.1 * (0.194 / (1.1 - 0.194)) * (4.750 / 5.850);
        assert!((chi - oracle).abs() < 1e-15);
        assert!((chi - 2.53e-3).abs() < 0.01e-3, "{chi}");
        let doubled = DispersiveParams { g: 2.0 * G, ..readout_params() };
        assert!((super::chi(&doubled).unwrap() / chi - 4.0).abs() < 1e-12);
        let flat = DispersiveParams { eta: 0.0, ..readout_params() };
        assert_eq!(super::chi(&flat).unwrap(), 0.0);
    }

    #[test]
    fn straddling_resonance_rejected() {
        let p = DispersiveParams::new(G, 5.0, 4.8, 0.2);
        assert!(matches!(chi(&p), Err(MistError::StraddlingResonance { .. })));
        assert!(dressed_frequencies(&p).is_err());
    }

    #[test]
    fn dressed_resonator_frequencies() {
        let (f0, f1) = dressed_frequencies(&readout_params()).unwrap();
        assert!((f0 - 4.7354).abs() < 1e-4, "{f0}");
        assert!((f1 - 4.7304).abs() < 1e-4, "{f1}");
        assert!(f1 < f0);
        let uncoupled = DispersiveParams { g: 0.0, ..readout_params() };
        assert_eq!(dressed_frequencies(&uncoupled).unwrap(), (4.750, 4.750));
        let far = DispersiveParams::new(G, 4.750 + 1e6, 4.750, 0.194);
        let (a, b) = dressed_frequencies(&far).unwrap();
        assert!((a - 4.750).abs() < 1e-7 && (b - 4.750).abs() < 1e-7);
    }

    #[test]
    fn stark_conversion() {
        let chi = 2.53e-3;
        assert_eq!(stark_to_photons(0.0, chi).unwrap(), 0.0);
        assert!((stark_to_photons(2.0 * chi, chi).unwrap() - 1.0).abs() < 1e-12);
        assert!((stark_to_photons(50.6e-3, chi).unwrap() - 10.0).abs() < 1e-9);
        assert!(matches!(stark_to_photons(-1e-3, chi), Err(MistError::NegativeStarkShift { .. })));
        assert!(stark_to_photons(1e-3, 0.0).is_err());
    }

    #[test]
    fn critical_photon_number() {
        assert!((n_crit(0.2, 0.1).unwrap() - 1.0).abs() < 1e-12);
        let n = n_crit(1.1, G).unwrap();
        assert!((n - 18.9).abs() < 0.05, "{n}");
        assert!((n_crit(2.2, G).unwrap() / n - 4.0).abs() < 1e-12);
        assert!(n_crit(1.0, 0.0).is_err());
    }

    #[test]
    fn chi_positive_above_anharmonicity() {
        for delta in [0.3, 0.8, 1.6] {
            let p = DispersiveParams::new(G, 4.750 + delta, 4.750, 0.194);
            assert!(chi(&p).unwrap() > 0.0);
        }
    }

    fn step_curve(drop_at: f64, low: f64) -> SurvivalCurve {
        let axis: Vec<f64> = (0..=400).map(|i| i as f64 * 0.25).collect();
        let values = axis.iter().map(|&n| if n < drop_at { 1.0 } else { low }).collect();
        SurvivalCurve {
            nbar_axis: axis,
            survival_running_min: values,
        }
    }

    #[test]
    fn flat_curve_has_no_onset() {
        let curves = vec![(1.0, step_curve(1e9, 1.0))];
        assert!(extract_onsets(&curves, DEFAULT_THRESHOLD, 0).is_empty());
        assert!(extract_onsets(&[], DEFAULT_THRESHOLD, 0).is_empty());
    }

    #[test]
    fn monotone_filter_drops_dips() {
        let curves = vec![
            (1.0, step_curve(30.0, 0.5)),
            (1.1, step_curve(25.0, 0.5)),
            (1.2, step_curve(40.0, 0.5)),
        ];
        let kept = extract_onsets(&curves, DEFAULT_THRESHOLD, 1);
        let pairs: Vec<(f64, f64)> = kept.iter().map(|p| (p.delta, p.nbar_onset)).collect();
        assert_eq!(pairs, vec![(1.0, 30.0), (1.2, 40.0)]);
        assert!(kept.iter().all(|p| p.initial_state == 1));
        assert_eq!(kept[0].uncertainty, 30f64.sqrt());
    }

    #[test]
    fn plateau_keeps_first_point() {
        let pts = [
            OnsetPoint::new(1.0, 20.0, 0),
            OnsetPoint::new(1.1, 20.0, 0),
            OnsetPoint::new(1.2, 21.0, 0),
        ];
        let kept = monotone_filter(&pts);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].delta, 1.0);
    }

    fn exact_points(a: f64, b: f64, deltas: &[f64]) -> Vec<OnsetPoint> {
        deltas.iter().map(|&d| OnsetPoint::new(d, a * (b * d).exp(), 0)).collect()
    }

    #[test]
    fn exact_exponential_recovered() {
        let fit = fit_boundary(&exact_points(10.0, 2.0, &[0.8, 1.0, 1.2])).unwrap();
        assert!((fit.a / 10.0 - 1.0).abs() < 1e-10);
        assert!((fit.b / 2.0 - 1.0).abs() < 1e-10);
        let weighted =
            fit_boundary_weighted(&exact_points(10.0, 2.0, &[0.8, 1.0, 1.2]), FitWeighting::ShotNoise).unwrap();
        assert!((weighted.b / 2.0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn boundary_definition() {
        assert_eq!(boundary_from_fit(25.0), 20.0);
        let fit = fit_boundary(&exact_points(10.0, 2.0, &[0.8, 1.0])).unwrap();
        for d in [0.5, 1.0, 1.5] {
            assert!(fit.boundary(d) < fit.n_fit(d));
        }
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        let one = exact_points(10.0, 2.0, &[1.0, 1.0]);
        assert!(matches!(fit_boundary(&one), Err(MistError::InsufficientPoints { distinct: 1 })));
        assert!(matches!(fit_boundary(&[]), Err(MistError::InsufficientPoints { distinct: 0 })));
        let bad = [OnsetPoint::new(1.0, 0.0, 0), OnsetPoint::new(1.2, 5.0, 0)];
        assert!(matches!(fit_boundary(&bad), Err(MistError::NonPositiveOnset { .. })));
    }

    /// Fraction of noisy trials whose slope lands within 15% of the truth.
    fn noisy_slope_hits(deltas: &[f64], trials: usize, seed: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..trials)
            .filter(|_| {
                let pts: Vec<OnsetPoint> = deltas
                    .iter()
                    .map(|&d| OnsetPoint::new(d, 10.0 * (2.0 * d).exp() * rng.gen_range(0.9..1.1), 0))
                    .collect();
                let b = fit_boundary(&pts).unwrap().b;
                (b / 2.0 - 1.0).abs() <= 0.15
            })
            .count()
    }

    #[test]
    fn three_point_noise_matches_triangular_oracle() {
        // With three points the slope error is (ln u3 - ln u1)/0.4, close to a
        // triangular law of half-width 0.5; P(|err| <= 0.3) = 1 - (0.2/0.5)^2 = 0.84.
        let hits = noisy_slope_hits(&[0.8, 1.0, 1.2], 2000, 7);
        let fraction = hits as f64 / 2000.0;
        assert!((fraction - 0.84).abs() < 0.03, "{fraction}");
    }

    #[test]
    fn dense_grid_noise_recovers_slope() {
        let deltas: Vec<f64> = (0..13).map(|i| 0.8 + 0.05 * i as f64).collect();
        assert!(noisy_slope_hits(&deltas, 100, 11) >= 95);
    }

    proptest! {
        #[test]
        fn fit_is_scale_equivariant(
            scale in 0.1f64..10.0,
            noise in proptest::collection::vec(0.8f64..1.2, 4),
        ) {
            let pts: Vec<OnsetPoint> = [0.8, 1.0, 1.2, 1.4]
                .iter()
                .zip(&noise)
                .map(|(&d, &u)| OnsetPoint::new(d, 5.0 * (1.7 * d).exp() * u, 0))
                .collect();
            let scaled: Vec<OnsetPoint> = pts
                .iter()
                .map(|p| OnsetPoint::new(p.delta, p.nbar_onset * scale, 0))
                .collect();
            let f = fit_boundary(&pts).unwrap();
            let g = fit_boundary(&scaled).unwrap();
            prop_assert!((g.a / (f.a * scale) - 1.0).abs() < 1e-9);
            prop_assert!((g.b - f.b).abs() < 1e-9);
        }

        #[test]
        fn kept_onsets_strictly_increase(onsets in proptest::collection::vec(1f64..100.0, 0..20)) {
            let pts: Vec<OnsetPoint> = onsets
                .iter()
                .enumerate()
                .map(|(i, &n)| OnsetPoint::new(0.6 + 0.05 * i as f64, n, 0))
                .collect();
            let kept = monotone_filter(&pts);
            prop_assert!(kept.windows(2).all(|w| w[1].nbar_onset > w[0].nbar_onset && w[1].delta > w[0].delta));
        }
    }
}
