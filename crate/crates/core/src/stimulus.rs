//! Multiband test-signal synthesis: NRZ-modulated carriers plus a white
//! noise floor with an exact target SNR.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::signals::{
    dft_forward_real, dft_inverse, mean_square_from_dbm, Domain, RealWaveform, SimulationGrid,
    SpectrumGrid,
};

/// One NRZ-keyed carrier band.
#[derive(Debug, Clone, Copy)]
pub struct BandSpec {
    pub carrier_hz: f64,
    /// One-sided modulation bandwidth; the bit rate equals this value and the
    /// synthesized band is confined to `carrier +/- bandwidth`.
    pub bandwidth_hz: f64,
    /// Power of this band relative to the others, applied as a field gain.
    pub relative_power_db: f64,
    /// Seed of the band's bit stream.
    pub bit_seed: u64,
}

/// Full stimulus description: bands, analysis span, and noise floor.
#[derive(Debug, Clone)]
pub struct MultibandSpec {
    pub bands: Vec<BandSpec>,
    /// One-sided analysis span; all band content must stay inside it.
    pub span_hz: f64,
    /// White noise density; `f64::NEG_INFINITY` disables the floor.
    pub noise_psd_dbm_hz: f64,
    /// Total signal to total noise ratio imposed on the output.
    pub target_snr_db: f64,
    pub noise_seed: u64,
}

/// Generated stimulus with its known signal/noise decomposition.
#[derive(Debug, Clone)]
pub struct Stimulus {
    /// The combined waveform fed to the front-end.
    pub waveform: RealWaveform,
    /// Band sum after the SNR gain (zero waveform when no bands).
    pub signal: RealWaveform,
    /// Noise part (zero waveform when the floor is disabled).
    pub noise: RealWaveform,
    /// Gain applied to the band sum to hit the target SNR.
    pub applied_gain: f64,
    pub warnings: Vec<String>,
}

impl BandSpec {
    pub fn validate(&self, grid: &SimulationGrid, span_hz: f64) -> Result<()> {
        grid.bin_of(self.carrier_hz, "carrier")?;
        if self.bandwidth_hz < grid.resolution_hz() {
            return Err(Error::Invalid {
                what: "band bandwidth",
                reason: format!(
                    "{} Hz is below the grid resolution {} Hz",
                    self.bandwidth_hz,
                    grid.resolution_hz()
                ),
            });
        }
        if self.carrier_hz - self.bandwidth_hz <= 0.0
            || self.carrier_hz + self.bandwidth_hz > span_hz
        {
            return Err(Error::Invalid {
                what: "band placement",
                reason: format!(
                    "carrier {} Hz with bandwidth {} Hz leaves (0, {}) Hz",
                    self.carrier_hz, self.bandwidth_hz, span_hz
                ),
            });
        }
        Ok(())
    }
}

impl MultibandSpec {
    pub fn validate(&self, grid: &SimulationGrid) -> Result<()> {
        grid.bin_of(self.span_hz, "span")?;
        if self.span_hz <= 0.0 || self.span_hz > grid.sample_rate_hz / 2.0 {
            return Err(Error::Invalid {
                what: "span",
                reason: format!(
                    "{} Hz must lie in (0, {}] Hz",
                    self.span_hz,
                    grid.sample_rate_hz / 2.0
                ),
            });
        }
        for b in &self.bands {
            b.validate(grid, self.span_hz)?;
        }
        Ok(())
    }
}

fn zero_waveform(grid: &SimulationGrid) -> RealWaveform {
    RealWaveform {
        samples: vec![0.0; grid.n_samples],
        sample_rate_hz: grid.sample_rate_hz,
    }
}

/// Synthesize one band: a random bipolar NRZ stream at bit rate
/// `bandwidth_hz` mixed onto the carrier, then confined to
/// `carrier +/- bandwidth` so its energy stays inside the band.
pub fn gen_nrz_band(band: &BandSpec, grid: &SimulationGrid) -> Result<RealWaveform> {
    band.validate(grid, f64::INFINITY)?;
    let mut rng = ChaCha8Rng::seed_from_u64(band.bit_seed);
    let n_bits = (grid.capture_time_s() * band.bandwidth_hz).ceil().max(1.0) as usize;
    let bits: Vec<f64> = (0..n_bits)
        .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();

    let mut samples = Vec::with_capacity(grid.n_samples);
    for i in 0..grid.n_samples {
        let t = grid.time_at(i);
        let idx = ((t * band.bandwidth_hz) as usize).min(n_bits - 1);
        samples.push(bits[idx] * (2.0 * std::f64::consts::PI * band.carrier_hz * t).cos());
    }
    let raw = RealWaveform { samples, sample_rate_hz: grid.sample_rate_hz };

    let mut spec = dft_forward_real(&raw);
    let edge = band.bandwidth_hz + grid.resolution_hz() * 1e-6;
    for m in 0..spec.n() {
        let f = spec.freq_of_bin(m).abs();
        if (f - band.carrier_hz).abs() > edge {
            spec.values[m] = Complex64::new(0.0, 0.0);
        }
    }
    let env = dft_inverse(&spec, Domain::ElectricalBaseband);
    Ok(RealWaveform {
        samples: env.samples.iter().map(|v| v.re).collect(),
        sample_rate_hz: grid.sample_rate_hz,
    })
}

/// Synthesize a white floor of the given density over `(0, span)`.
///
/// Noise is drawn per frequency bin (ascending, real then imaginary part)
/// as iid complex Gaussian with conjugate-symmetric negative frequencies,
/// so the expected density is exactly flat and the realization depends only
/// on the seed.
pub fn gen_noise(
    psd_dbm_hz: f64,
    span_hz: f64,
    seed: u64,
    grid: &SimulationGrid,
) -> Result<RealWaveform> {
    if psd_dbm_hz == f64::NEG_INFINITY {
        return Ok(zero_waveform(grid));
    }
    let span_bins = grid.bin_of(span_hz, "span")?;
    if span_bins <= 0 || span_hz > grid.sample_rate_hz / 2.0 {
        return Err(Error::Invalid {
            what: "span",
            reason: format!("{span_hz} Hz"),
        });
    }
    let res = grid.resolution_hz();
    // Per-bin mean-square is psd * resolution / 2 per side; each quadrature
    // then carries half of that.
    let per_quad_var = mean_square_from_dbm(psd_dbm_hz) * res / 4.0;
    let sigma = per_quad_var.sqrt();

    let n = grid.n_samples;
    let center = n / 2;
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite");
    for m in 1..span_bins as usize {
        let re = normal.sample(&mut rng);
        let im = normal.sample(&mut rng);
        values[center + m] = Complex64::new(re, im);
        values[center - m] = Complex64::new(re, -im);
    }
    let spec = SpectrumGrid { values, resolution_hz: res, center_hz: 0.0 };
    let env = dft_inverse(&spec, Domain::ElectricalBaseband);
    Ok(RealWaveform {
        samples: env.samples.iter().map(|v| v.re).collect(),
        sample_rate_hz: grid.sample_rate_hz,
    })
}

/// Synthesize the full stimulus and scale the band sum so the measured
/// SNR equals the target exactly. With the floor disabled the output is
/// the unscaled band sum.
pub fn gen_multiband(spec: &MultibandSpec, grid: &SimulationGrid) -> Result<Stimulus> {
    spec.validate(grid)?;
    let mut warnings = Vec::new();
    for (i, a) in spec.bands.iter().enumerate() {
        for b in spec.bands.iter().skip(i + 1) {
            if (a.carrier_hz - b.carrier_hz).abs() < a.bandwidth_hz + b.bandwidth_hz {
                warnings.push(format!(
                    "bands at {} Hz and {} Hz overlap",
                    a.carrier_hz, b.carrier_hz
                ));
            }
        }
    }

    let mut signal = zero_waveform(grid);
    for band in &spec.bands {
        let w = gen_nrz_band(band, grid)?;
        let gain = 10f64.powf(band.relative_power_db / 20.0);
        for (s, x) in signal.samples.iter_mut().zip(&w.samples) {
            *s += gain * x;
        }
    }

    let noise = gen_noise(spec.noise_psd_dbm_hz, spec.span_hz, spec.noise_seed, grid)?;
    let noise_msq = noise.mean_square();
    let sig_msq = signal.mean_square();

    let applied_gain = if noise_msq > 0.0 && sig_msq > 0.0 {
        (noise_msq * 10f64.powf(spec.target_snr_db / 10.0) / sig_msq).sqrt()
    } else {
        1.0
    };
    if applied_gain != 1.0 {
        for s in &mut signal.samples {
            *s *= applied_gain;
        }
    }

    let mut waveform = signal.clone();
    for (w, nz) in waveform.samples.iter_mut().zip(&noise.samples) {
        *w += nz;
    }
    Ok(Stimulus { waveform, signal, noise, applied_gain, warnings })
}

/// SNR of a generated stimulus from its known decomposition; infinite when
/// the noise part is empty.
pub fn measure_snr(stim: &Stimulus) -> f64 {
    let n = stim.noise.mean_square();
    let s = stim.signal.mean_square();
    if n <= 0.0 {
        return f64::INFINITY;
    }
    10.0 * (s / n).log10()
}

/// SNR estimated from the spectrum alone: in-band energy above the
/// out-of-band floor, against the floor extrapolated over the span.
pub fn measure_snr_spectral(
    waveform: &RealWaveform,
    spec: &MultibandSpec,
    grid: &SimulationGrid,
) -> Result<f64> {
    let spectrum = dft_forward_real(waveform);
    let span_bins = grid.bin_of(spec.span_hz, "span")? as usize;
    let center = spectrum.n() / 2;

    let in_band = |f: f64| {
        spec.bands
            .iter()
            .any(|b| (f - b.carrier_hz).abs() <= b.bandwidth_hz)
    };
    let mut sig_sum = 0.0;
    let mut sig_count = 0usize;
    let mut floor_sum = 0.0;
    let mut floor_count = 0usize;
    for m in 1..span_bins {
        let e = spectrum.values[center + m].norm_sqr();
        if in_band(spectrum.freq_of_bin(center + m)) {
            sig_sum += e;
            sig_count += 1;
        } else {
            floor_sum += e;
            floor_count += 1;
        }
    }
    if floor_count == 0 || floor_sum <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let per_bin = floor_sum / floor_count as f64;
    let signal = (sig_sum - per_bin * sig_count as f64).max(0.0);
    let noise = per_bin * (span_bins - 1) as f64;
    Ok(10.0 * (signal / noise).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::signals::dbm_from_mean_square;

    fn test_grid() -> SimulationGrid {
        SimulationGrid::new(160e9, 128_000).unwrap()
    }

    fn reference_bands() -> Vec<BandSpec> {
        vec![
            BandSpec { carrier_hz: 7.52e9, bandwidth_hz: 50e6, relative_power_db: 0.0, bit_seed: 11 },
            BandSpec { carrier_hz: 10.25e9, bandwidth_hz: 50e6, relative_power_db: 0.0, bit_seed: 12 },
            BandSpec { carrier_hz: 19.7e9, bandwidth_hz: 50e6, relative_power_db: 0.0, bit_seed: 13 },
        ]
    }

    fn reference_multiband() -> MultibandSpec {
        MultibandSpec {
            bands: reference_bands(),
            span_hz: 20e9,
            noise_psd_dbm_hz: -146.0,
            target_snr_db: 61.0,
            noise_seed: 42,
        }
    }

    #[test]
    fn bandwidth_equal_to_resolution_degenerates_to_a_tone() {
        let g = test_grid();
        let band = BandSpec {
            carrier_hz: 10e9,
            bandwidth_hz: g.resolution_hz(),
            relative_power_db: 0.0,
            bit_seed: 1,
        };
        let w = gen_nrz_band(&band, &g).unwrap();
        let spec = dft_forward_real(&w);
        let m = spec.bin_of_freq(10e9).unwrap();
        // A +/-1-bit NRZ stream one bit long is a plain cosine; nearly all
        // power sits in the carrier bin pair.
        let carrier = 2.0 * spec.values[m].norm_sqr();
        assert_relative_eq!(carrier, w.mean_square(), max_relative = 1e-2);
    }

    #[test]
    fn band_energy_stays_inside_the_band() {
        let g = test_grid();
        let band = reference_bands()[0];
        let w = gen_nrz_band(&band, &g).unwrap();
        let spec = dft_forward_real(&w);
        let mut outside = 0.0;
        for m in 0..spec.n() {
            let f = spec.freq_of_bin(m).abs();
            if (f - band.carrier_hz).abs() > band.bandwidth_hz + g.resolution_hz() {
                outside += spec.values[m].norm_sqr();
            }
        }
        assert!(outside < 1e-20 * w.mean_square().max(1.0));
    }

    #[test]
    fn off_grid_carrier_is_rejected_by_name() {
        let g = test_grid();
        let band = BandSpec {
            carrier_hz: 10e9 + 0.4e6,
            bandwidth_hz: 50e6,
            relative_power_db: 0.0,
            bit_seed: 1,
        };
        let msg = gen_nrz_band(&band, &g).unwrap_err().to_string();
        assert!(msg.contains("carrier not on analysis grid"), "{msg}");
    }

    #[test]
    fn sub_resolution_bandwidth_is_rejected() {
        let g = test_grid();
        let band = BandSpec {
            carrier_hz: 10e9,
            bandwidth_hz: 0.4e6,
            relative_power_db: 0.0,
            bit_seed: 1,
        };
        assert!(gen_nrz_band(&band, &g).is_err());
    }

    #[test]
    fn generated_snr_matches_the_target_exactly() {
        let g = test_grid();
        let stim = gen_multiband(&reference_multiband(), &g).unwrap();
        assert_relative_eq!(measure_snr(&stim), 61.0, epsilon = 1e-9);
        let combined_minus_parts: f64 = stim
            .waveform
            .samples
            .iter()
            .zip(stim.signal.samples.iter().zip(&stim.noise.samples))
            .map(|(w, (s, n))| (w - (s + n)).abs())
            .fold(0.0, f64::max);
        assert_eq!(combined_minus_parts, 0.0);
    }

    #[test]
    fn disabled_noise_returns_the_unscaled_band_sum() {
        let g = test_grid();
        let mut spec = reference_multiband();
        spec.noise_psd_dbm_hz = f64::NEG_INFINITY;
        let stim = gen_multiband(&spec, &g).unwrap();
        assert_eq!(stim.applied_gain, 1.0);
        assert_eq!(measure_snr(&stim), f64::INFINITY);
        assert!(stim.noise.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn noise_only_total_power_matches_the_density() {
        let g = test_grid();
        let mut spec = reference_multiband();
        spec.bands.clear();
        let stim = gen_multiband(&spec, &g).unwrap();
        // -146 dBm/Hz over 20 GHz integrates to -42.99 dBm.
        let total = dbm_from_mean_square(stim.waveform.mean_square());
        assert_relative_eq!(total, -42.99, epsilon = 0.2);
    }

    #[test]
    fn same_seeds_reproduce_the_same_waveform() {
        let g = test_grid();
        let a = gen_multiband(&reference_multiband(), &g).unwrap();
        let b = gen_multiband(&reference_multiband(), &g).unwrap();
        assert_eq!(a.waveform.samples, b.waveform.samples);
    }

    #[test]
    fn spectral_snr_estimate_is_close_for_the_headline_scenario() {
        let g = test_grid();
        let spec = reference_multiband();
        let stim = gen_multiband(&spec, &g).unwrap();
        let est = measure_snr_spectral(&stim.waveform, &spec, &g).unwrap();
        assert_relative_eq!(est, 61.0, epsilon = 0.5);
    }

    #[test]
    fn overlapping_bands_warn_but_still_generate() {
        let g = test_grid();
        let mut spec = reference_multiband();
        spec.bands[1].carrier_hz = 7.55e9;
        let stim = gen_multiband(&spec, &g).unwrap();
        assert_eq!(stim.warnings.len(), 1);
        assert!(stim.warnings[0].contains("overlap"));
    }
}
