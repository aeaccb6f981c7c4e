use thiserror::Error;

pub type Result<T, E = MistError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MistError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("charge cutoff {cutoff} is smaller than the number of kept levels {level_count}")]
    CutoffTooSmall { cutoff: usize, level_count: usize },

    #[error("eigensolver did not converge ({context})")]
    EigenNonConvergence { context: String },

    #[error("<0|n|1> vanishes (E_J = {e_j} GHz); normalized couplings are undefined")]
    VanishingChargeElement { e_j: f64 },

    #[error(
        "no junction energy reaches {target} GHz; achievable qubit frequencies span \
         [{min_achievable}, {max_achievable}] GHz"
    )]
    BracketFailure {
        target: f64,
        min_achievable: f64,
        max_achievable: f64,
    },

    #[error("integration step {step} ns exceeds the limit {limit} ns")]
    StepTooLarge { step: f64, limit: f64 },

    #[error("intermediate level {level} is resonant with level 0 (detuning {detuning} GHz)")]
    ResonantIntermediate { level: usize, detuning: f64 },

    #[error("Δ = η = {delta} GHz: the dispersive shift diverges at the straddling resonance")]
    StraddlingResonance { delta: f64 },

    #[error("negative Stark shift {shift} GHz: qubit above its zero-photon frequency")]
    NegativeStarkShift { shift: f64 },

    #[error("state norm drifted by {drift:e} at t = {time} ns")]
    NormDrift { time: f64, drift: f64 },

    #[error("photon number is not monotone in time (sample {index}); use the time axis")]
    NonMonotonePhotonNumber { index: usize },

    #[error("insufficient points for a boundary fit: {distinct} distinct detuning(s), need 2")]
    InsufficientPoints { distinct: usize },

    #[error("non-positive onset photon number {nbar} at Δ = {delta} GHz")]
    NonPositiveOnset { delta: f64, nbar: f64 },

    #[error("strip spectrum deviates from the excitation-number strips by {max_diff:e} GHz (tolerance {tolerance:e})")]
    OracleMismatch { max_diff: f64, tolerance: f64 },

    #[error("simulation failed at Δ = {delta} GHz, n_g = {n_g}, initial state {state}: {source}")]
    Member {
        delta: f64,
        n_g: f64,
        state: usize,
        #[source]
        source: Box<MistError>,
    },

    #[error("offset charge {n_g}: {source}")]
    OffsetCharge {
        n_g: f64,
        #[source]
        source: Box<MistError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl MistError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        MistError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            MistError::InvalidParameter { .. } => "invalid_parameter",
            MistError::CutoffTooSmall { .. } => "cutoff_too_small",
            MistError::EigenNonConvergence { .. } => "eigen_non_convergence",
            MistError::VanishingChargeElement { .. } => "vanishing_charge_element",
            MistError::BracketFailure { .. } => "bracket_failure",
            MistError::StepTooLarge { .. } => "step_too_large",
            MistError::ResonantIntermediate { .. } => "resonant_intermediate",
            MistError::StraddlingResonance { .. } => "straddling_resonance",
            MistError::NegativeStarkShift { .. } => "negative_stark_shift",
            MistError::NormDrift { .. } => "norm_drift",
            MistError::NonMonotonePhotonNumber { .. } => "non_monotone_photon_number",
            MistError::InsufficientPoints { .. } => "insufficient_points",
            MistError::NonPositiveOnset { .. } => "non_positive_onset",
            MistError::OracleMismatch { .. } => "oracle_mismatch",
            MistError::Member { .. } => "member_failure",
            MistError::OffsetCharge { .. } => "offset_charge_failure",
            MistError::Io(_) => "io",
            MistError::Json(_) => "json",
        }
    }
}
