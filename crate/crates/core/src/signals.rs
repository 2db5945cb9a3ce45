//! Sample grids, waveform containers, and DFT plumbing shared by the whole
//! simulation chain.
//!
//! Spectra are stored two-sided with the center bin at index `n/2`, forward
//! transforms carry the `1/n` scale so a unit complex tone shows magnitude 1
//! in its bin, and all power readouts assume volts into a 50 ohm reference.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Reference impedance for every dBm/volt conversion.
pub const R_REF_OHM: f64 = 50.0;

/// Display clamp for log readouts of empty bins.
pub const DBM_DISPLAY_FLOOR: f64 = -400.0;

/// Which physical layer a complex envelope belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Optical field envelope relative to the laser carrier.
    Optical,
    /// Electrical I/Q pair after the homodyne receiver.
    ElectricalBaseband,
}

/// Uniform time grid of the simulation: sample rate and record length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationGrid {
    pub sample_rate_hz: f64,
    pub n_samples: usize,
}

impl SimulationGrid {
    pub fn new(sample_rate_hz: f64, n_samples: usize) -> Result<Self> {
        if !(sample_rate_hz > 0.0) || n_samples == 0 {
            return Err(Error::Invalid {
                what: "simulation grid",
                reason: format!("rate {sample_rate_hz} Hz, {n_samples} samples"),
            });
        }
        Ok(Self { sample_rate_hz, n_samples })
    }

    /// Frequency resolution of the record, `rate / n`.
    pub fn resolution_hz(&self) -> f64 {
        self.sample_rate_hz / self.n_samples as f64
    }

    /// Record duration in seconds.
    pub fn capture_time_s(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate_hz
    }

    /// Time of sample `i`.
    pub fn time_at(&self, i: usize) -> f64 {
        i as f64 / self.sample_rate_hz
    }

    /// Signed bin index of `freq_hz`, or an error if it is off-grid.
    pub fn bin_of(&self, freq_hz: f64, what: &'static str) -> Result<i64> {
        let res = self.resolution_hz();
        let bin = (freq_hz / res).round();
        if (freq_hz - bin * res).abs() > res * 1e-9 {
            return Err(Error::OffGrid { what, freq_hz, resolution_hz: res });
        }
        Ok(bin as i64)
    }
}

/// Real-valued waveform on a uniform grid.
#[derive(Debug, Clone)]
pub struct RealWaveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
}

/// Complex envelope on a uniform grid, tagged with its physical domain.
#[derive(Debug, Clone)]
pub struct ComplexEnvelope {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
    pub domain: Domain,
}

impl ComplexEnvelope {
    pub fn expect_domain(&self, expected: Domain) -> Result<()> {
        if self.domain != expected {
            return Err(Error::Domain { expected, got: self.domain });
        }
        Ok(())
    }

    /// Mean of `|x|^2` over the record.
    pub fn mean_square(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

impl RealWaveform {
    /// Mean of `x^2` over the record.
    pub fn mean_square(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64
    }
}

/// Two-sided spectrum with the zero-offset bin at index `n/2`.
///
/// Bin `m` sits at `center_hz + (m - n/2) * resolution_hz`. Values keep the
/// `1/n`-scaled DFT convention, so `|X|^2` is mean-square volts per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub values: Vec<Complex64>,
    pub resolution_hz: f64,
    pub center_hz: f64,
}

impl SpectrumGrid {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    fn center_index(&self) -> usize {
        self.n() / 2
    }

    /// Absolute frequency of bin `m`.
    pub fn freq_of_bin(&self, m: usize) -> f64 {
        self.center_hz + (m as f64 - self.center_index() as f64) * self.resolution_hz
    }

    /// Bin index of `freq_hz` if it lies on the grid and inside the record.
    pub fn bin_of_freq(&self, freq_hz: f64) -> Option<usize> {
        let offset = (freq_hz - self.center_hz) / self.resolution_hz;
        let rounded = offset.round();
        if (offset - rounded).abs() > 1e-6 {
            return None;
        }
        let idx = rounded as i64 + self.center_index() as i64;
        if idx < 0 || idx >= self.n() as i64 {
            return None;
        }
        Some(idx as usize)
    }

    /// Complex value at an on-grid frequency; zero outside the record.
    pub fn value_at_hz(&self, freq_hz: f64) -> Complex64 {
        match self.bin_of_freq(freq_hz) {
            Some(m) => self.values[m],
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Per-bin power in dBm; negative infinity for an empty bin.
    pub fn bin_power_dbm(&self, m: usize) -> f64 {
        dbm_from_mean_square(self.values[m].norm_sqr())
    }

    /// Sum of `|X|^2` over all bins (equals the time-domain mean square).
    pub fn total_mean_square(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Total power in dBm integrated over bins `lo..=hi`.
    pub fn band_power_dbm(&self, lo: usize, hi: usize) -> f64 {
        let msq: f64 = self.values[lo..=hi.min(self.n() - 1)]
            .iter()
            .map(|v| v.norm_sqr())
            .sum();
        dbm_from_mean_square(msq)
    }
}

/// Convert mean-square volts to dBm on the 50 ohm reference.
pub fn dbm_from_mean_square(msq_volts: f64) -> f64 {
    if msq_volts <= 0.0 {
        return f64::NEG_INFINITY;
    }
    10.0 * (msq_volts / R_REF_OHM / 1e-3).log10()
}

/// Convert a dBm level to mean-square volts on the 50 ohm reference.
pub fn mean_square_from_dbm(dbm: f64) -> f64 {
    if dbm == f64::NEG_INFINITY {
        return 0.0;
    }
    10f64.powf(dbm / 10.0) * 1e-3 * R_REF_OHM
}

/// dBm readout clamped to the display floor, for report files.
pub fn dbm_clamped(dbm: f64) -> f64 {
    dbm.max(DBM_DISPLAY_FLOOR)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let fft = if inverse {
            planner.plan_fft_inverse(buf.len())
        } else {
            planner.plan_fft_forward(buf.len())
        };
        fft.process(buf);
    });
}

fn shift_to_centered(raw: &[Complex64]) -> Vec<Complex64> {
    let n = raw.len();
    let c = n / 2;
    (0..n).map(|i| raw[(i + n - c) % n]).collect()
}

fn shift_from_centered(centered: &[Complex64]) -> Vec<Complex64> {
    let n = centered.len();
    let c = n / 2;
    (0..n).map(|k| centered[(k + c) % n]).collect()
}

/// Forward DFT of a complex envelope, `1/n`-scaled and center-shifted.
pub fn dft_forward(envelope: &ComplexEnvelope) -> SpectrumGrid {
    let n = envelope.samples.len();
    let mut buf = envelope.samples.clone();
    fft_in_place(&mut buf, false);
    let scale = 1.0 / n as f64;
    for v in &mut buf {
        *v *= scale;
    }
    SpectrumGrid {
        values: shift_to_centered(&buf),
        resolution_hz: envelope.sample_rate_hz / n as f64,
        center_hz: 0.0,
    }
}

/// Forward DFT of a real waveform; the result is conjugate-symmetric.
pub fn dft_forward_real(waveform: &RealWaveform) -> SpectrumGrid {
    let env = ComplexEnvelope {
        samples: waveform.samples.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        sample_rate_hz: waveform.sample_rate_hz,
        domain: Domain::ElectricalBaseband,
    };
    dft_forward(&env)
}

/// Inverse of [`dft_forward`]; returns an envelope in the given domain.
pub fn dft_inverse(spectrum: &SpectrumGrid, domain: Domain) -> ComplexEnvelope {
    let mut buf = shift_from_centered(&spectrum.values);
    fft_in_place(&mut buf, true);
    ComplexEnvelope {
        sample_rate_hz: spectrum.resolution_hz * spectrum.values.len() as f64,
        samples: buf,
        domain,
    }
}

/// Filter an envelope by a complex frequency response `h(f_offset_hz)`.
pub fn apply_freq_response<H>(envelope: &ComplexEnvelope, h: H) -> ComplexEnvelope
where
    H: Fn(f64) -> Complex64,
{
    let mut spec = dft_forward(envelope);
    for m in 0..spec.n() {
        let f = spec.freq_of_bin(m);
        spec.values[m] *= h(f);
    }
    let mut out = dft_inverse(&spec, envelope.domain);
    out.sample_rate_hz = envelope.sample_rate_hz;
    out
}

/// Hann window of length `n`, for leakage-controlled display spectra.
pub fn hann_window(n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![1.0; n];
    }
    (0..n)
        .map(|i| {
            let x = std::f64::consts::PI * i as f64 / n as f64;
            x.sin().powi(2)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tone_envelope(n: usize, rate: f64, freq: f64, amp: f64) -> ComplexEnvelope {
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                Complex64::from_polar(amp, 2.0 * std::f64::consts::PI * freq * t)
            })
            .collect();
        ComplexEnvelope { samples, sample_rate_hz: rate, domain: Domain::Optical }
    }

    #[test]
    fn unit_tone_lands_in_its_bin_with_magnitude_one() {
        let rate = 160e9;
        let n = 12800;
        let env = tone_envelope(n, rate, 1.0e9, 1.0);
        let spec = dft_forward(&env);
        let m = spec.bin_of_freq(1.0e9).unwrap();
        assert_relative_eq!(spec.values[m].norm(), 1.0, epsilon = 1e-12);
        let off_grid: f64 = (0..spec.n())
            .filter(|&i| i != m)
            .map(|i| spec.values[i].norm_sqr())
            .sum();
        assert!(off_grid < 1e-20);
    }

    #[test]
    fn center_bin_is_dc() {
        let env = tone_envelope(64, 64.0, 0.0, 2.5);
        let spec = dft_forward(&env);
        assert_eq!(spec.bin_of_freq(0.0), Some(32));
        assert_relative_eq!(spec.freq_of_bin(32), 0.0);
        assert_relative_eq!(spec.values[32].re, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn parseval_holds_for_a_random_record() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<Complex64> = (0..4096)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let env = ComplexEnvelope { samples, sample_rate_hz: 1e6, domain: Domain::Optical };
        let spec = dft_forward(&env);
        assert_relative_eq!(spec.total_mean_square(), env.mean_square(), max_relative = 1e-12);
    }

    #[test]
    fn forward_inverse_round_trip_is_exact() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let samples: Vec<Complex64> = (0..1000)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let env = ComplexEnvelope { samples, sample_rate_hz: 5e5, domain: Domain::Optical };
        let back = dft_inverse(&dft_forward(&env), Domain::Optical);
        for (a, b) in env.samples.iter().zip(&back.samples) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn real_waveform_spectrum_is_conjugate_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let w = RealWaveform {
            samples: (0..512).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            sample_rate_hz: 1e3,
        };
        let spec = dft_forward_real(&w);
        let c = spec.n() / 2;
        for m in 1..c {
            let pos = spec.values[c + m];
            let neg = spec.values[c - m];
            assert!((pos - neg.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn power_conversions_match_hand_values() {
        // 16 dBm on 50 ohm is 39.81 mW, i.e. mean-square 1.9905 V^2.
        let msq = mean_square_from_dbm(16.0);
        assert_relative_eq!(msq / R_REF_OHM, 39.81e-3, max_relative = 1e-3);
        assert_relative_eq!(dbm_from_mean_square(msq), 16.0, epsilon = 1e-12);
        assert_eq!(dbm_from_mean_square(0.0), f64::NEG_INFINITY);
        assert_eq!(dbm_clamped(f64::NEG_INFINITY), DBM_DISPLAY_FLOOR);
    }

    #[test]
    fn off_grid_frequency_is_rejected() {
        let g = SimulationGrid::new(160e9, 128_000).unwrap();
        assert_eq!(g.bin_of(7.52e9, "carrier").unwrap(), 6016);
        let err = g.bin_of(7.52e9 + 0.3e6, "carrier").unwrap_err();
        assert!(matches!(err, Error::OffGrid { what: "carrier", .. }));
    }

    #[test]
    fn identity_response_is_bit_for_bit_stable() {
        let env = tone_envelope(256, 256.0, 3.0, 0.7);
        let out = apply_freq_response(&env, |_| Complex64::new(1.0, 0.0));
        for (a, b) in env.samples.iter().zip(&out.samples) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn hann_window_endpoints_and_peak() {
        let w = hann_window(8);
        assert_relative_eq!(w[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(w[4], 1.0, epsilon = 1e-15);
    }
}
