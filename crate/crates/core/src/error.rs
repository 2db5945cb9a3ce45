use thiserror::Error;

/// Errors produced by the simulation and reconstruction layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A frequency does not land on an integer bin of the analysis grid.
    #[error("{what} not on analysis grid: {freq_hz} Hz is not a multiple of {resolution_hz} Hz")]
    OffGrid {
        what: &'static str,
        freq_hz: f64,
        resolution_hz: f64,
    },

    /// A parameter failed validation.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// Two waveforms that must share a sample rate or length do not.
    #[error("waveform mismatch: {0}")]
    Mismatch(String),

    /// An envelope was used in the wrong processing domain.
    #[error("domain mismatch: expected {expected:?}, got {got:?}")]
    Domain {
        expected: crate::signals::Domain,
        got: crate::signals::Domain,
    },

    /// The modulation period does not divide the record evenly.
    #[error("comb spacing {spacing_hz} Hz does not give an integer number of samples and periods per record")]
    NonIntegerPeriod { spacing_hz: f64 },

    /// Decimation from the simulation rate to the ADC rate is not integer.
    #[error("decimation from {sim_rate} Sa/s to {adc_rate} Sa/s is not an integer factor")]
    NonIntegerDecimation { sim_rate: f64, adc_rate: f64 },

    /// The requested coset offset aliases onto itself and has no full-rank
    /// complex system; use the dedicated degenerate builders.
    #[error("degenerate coset: offset {offset_hz} Hz is a multiple of half the comb spacing")]
    DegenerateCoset { offset_hz: f64 },

    /// Exhaustive search size beyond the supported bound.
    #[error("exhaustive search supports s_max <= {bound}, got {requested}")]
    SearchBound { bound: usize, requested: usize },

    /// A reference quantity needed for a relative measure is zero.
    #[error("zero-norm reference: {0}")]
    ZeroNorm(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
