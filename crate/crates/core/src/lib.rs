//! Digital twin of a photonic sub-Nyquist broadband spectrum analyzer.
//!
//! An electro-optic frequency comb samples a microwave waveform optically;
//! homodyne detection folds the full span into a narrow baseband, a slow ADC
//! captures it, and a sparse solver unfolds the overlapped spectrum again.
//! The crate models the whole chain on a common simulation grid and exposes
//! the reconstruction quality metrics used to judge it.

pub mod error;
pub mod frontend;
pub mod pipeline;
pub mod recon;
pub mod signals;
pub mod stimulus;

pub use error::{Error, Result};
