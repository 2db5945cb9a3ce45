//! Electro-optic front end: comb source (phase modulator plus intensity
//! modulator in series), optical sampling, homodyne receiver, and the
//! band-limited sub-Nyquist acquisition path.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signals::{
    apply_freq_response, dft_forward, mean_square_from_dbm, ComplexEnvelope, Domain, RealWaveform,
    SimulationGrid, SpectrumGrid,
};

/// Continuous-wave source feeding both branches.
#[derive(Debug, Clone, Copy)]
pub struct LaserSpec {
    pub power_dbm: f64,
    /// Absolute optical carrier, used only for absolute-frequency reports.
    pub frequency_hz: f64,
}

/// Phase modulator driven by a cosine at the comb spacing.
#[derive(Debug, Clone, Copy)]
pub struct PmSpec {
    pub mod_index_rad: f64,
    pub drive_freq_hz: f64,
}

/// Mach-Zehnder intensity modulator.
///
/// The output field is `il * (a * e^{i*phi} + b * e^{-i*phi})` with
/// `phi(t) = mod_index * drive(t) + bias`, `a + b = 1`, and
/// `a - b = 10^(-ER/20)`; in the ideal-extinction limit this reduces to
/// `il * cos(phi)`.
#[derive(Debug, Clone, Copy)]
pub struct MzmSpec {
    pub mod_index_rad: f64,
    pub bias_rad: f64,
    /// Phase offset of the MZM RF drive relative to the PM drive.
    pub drive_phase_rad: f64,
    pub insertion_loss_db: f64,
    pub extinction_ratio_db: f64,
}

impl MzmSpec {
    /// Arm split fractions `(a, b)` from the extinction ratio.
    pub fn arm_fractions(&self) -> (f64, f64) {
        let d = 10f64.powf(-self.extinction_ratio_db / 20.0);
        ((1.0 + d) / 2.0, (1.0 - d) / 2.0)
    }

    fn field_gain(&self) -> f64 {
        10f64.powf(-self.insertion_loss_db / 20.0)
    }
}

/// Extracted comb: complex line weights keyed by harmonic index.
#[derive(Debug, Clone)]
pub struct CombLines {
    pub weights: BTreeMap<i32, Complex64>,
    pub spacing_hz: f64,
}

impl CombLines {
    /// Weight of line `k`; zero for absent lines.
    pub fn weight(&self, k: i32) -> Complex64 {
        self.weights.get(&k).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Magnitude of the strongest line in `k_lo..=k_hi`.
    pub fn max_abs(&self, k_lo: i32, k_hi: i32) -> f64 {
        (k_lo..=k_hi).map(|k| self.weight(k).norm()).fold(0.0, f64::max)
    }

    /// Line magnitude in dB relative to the strongest line of the range.
    pub fn magnitude_db(&self, k: i32, k_lo: i32, k_hi: i32) -> f64 {
        let w = self.weight(k).norm();
        let peak = self.max_abs(k_lo, k_hi);
        if w <= 0.0 || peak <= 0.0 {
            return f64::NEG_INFINITY;
        }
        20.0 * (w / peak).log10()
    }

    /// Number of lines in `k_lo..=k_hi` within `window_db` of the strongest.
    pub fn lines_within_window_db(&self, k_lo: i32, k_hi: i32, window_db: f64) -> usize {
        (k_lo..=k_hi)
            .filter(|&k| self.magnitude_db(k, k_lo, k_hi) >= -window_db)
            .count()
    }

    /// Peak-to-trough magnitude spread over `k_lo..=k_hi` in dB.
    pub fn range_db(&self, k_lo: i32, k_hi: i32) -> f64 {
        let lowest = (k_lo..=k_hi)
            .map(|k| self.magnitude_db(k, k_lo, k_hi))
            .fold(f64::INFINITY, f64::min);
        -lowest
    }
}

/// Homodyne receiver and digitizer parameters.
#[derive(Debug, Clone, Copy)]
pub struct ReceiverSpec {
    /// Local-oscillator branch amplitude in volts.
    pub lo_amplitude_volts: f64,
    /// Photodiode single-pole 3 dB bandwidth.
    pub pd_bandwidth_hz: f64,
    /// Anti-alias brick-wall cutoff ahead of the ADC.
    pub lpf_cutoff_hz: f64,
    pub adc_rate_hz: f64,
    /// Mid-rise quantizer resolution; `None` is an ideal ADC.
    pub adc_bits: Option<u32>,
}

/// Amplitude of one splitter branch in volts: `sqrt(R * P * fraction)`.
pub fn branch_amplitude_volts(laser_power_dbm: f64, split_fraction: f64) -> f64 {
    (mean_square_from_dbm(laser_power_dbm) * split_fraction).sqrt()
}

/// Constant envelope of one CW branch.
pub fn cw_envelope(laser: &LaserSpec, split_fraction: f64, grid: &SimulationGrid) -> ComplexEnvelope {
    let amp = branch_amplitude_volts(laser.power_dbm, split_fraction);
    ComplexEnvelope {
        samples: vec![Complex64::new(amp, 0.0); grid.n_samples],
        sample_rate_hz: grid.sample_rate_hz,
        domain: Domain::Optical,
    }
}

/// Phase-modulate an optical envelope: `x * exp(i * beta0 * cos(2*pi*df*t))`.
pub fn modulate_phase(envelope: &ComplexEnvelope, pm: &PmSpec) -> Result<ComplexEnvelope> {
    envelope.expect_domain(Domain::Optical)?;
    let rate = envelope.sample_rate_hz;
    let samples = envelope
        .samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let t = i as f64 / rate;
            let phase = pm.mod_index_rad * (2.0 * std::f64::consts::PI * pm.drive_freq_hz * t).cos();
            x * Complex64::from_polar(1.0, phase)
        })
        .collect();
    Ok(ComplexEnvelope { samples, sample_rate_hz: rate, domain: Domain::Optical })
}

/// Intensity-modulate an optical envelope with a per-sample drive waveform.
pub fn modulate_intensity(
    envelope: &ComplexEnvelope,
    mz: &MzmSpec,
    drive: &[f64],
) -> Result<ComplexEnvelope> {
    envelope.expect_domain(Domain::Optical)?;
    if drive.len() != envelope.samples.len() {
        return Err(Error::Mismatch(format!(
            "drive has {} samples, envelope has {}",
            drive.len(),
            envelope.samples.len()
        )));
    }
    let (a, b) = mz.arm_fractions();
    let il = mz.field_gain();
    let samples = envelope
        .samples
        .iter()
        .zip(drive)
        .map(|(&x, &d)| {
            let phi = mz.mod_index_rad * d + mz.bias_rad;
            let gate = a * Complex64::from_polar(1.0, phi) + b * Complex64::from_polar(1.0, -phi);
            x * il * gate
        })
        .collect();
    Ok(ComplexEnvelope {
        samples,
        sample_rate_hz: envelope.sample_rate_hz,
        domain: Domain::Optical,
    })
}

/// Generate the optical frequency comb: CW branch through the phase
/// modulator (with its static quarter-wave offset) and then the intensity
/// modulator, whose RF drive is `cos(2*pi*df*t + drive_phase)`.
pub fn generate_ofc(
    laser: &LaserSpec,
    pm: &PmSpec,
    mz: &MzmSpec,
    grid: &SimulationGrid,
) -> Result<(ComplexEnvelope, CombLines)> {
    grid.bin_of(pm.drive_freq_hz, "comb spacing")?;
    let cw = cw_envelope(laser, 0.5, grid);
    let mut phased = modulate_phase(&cw, pm)?;
    let quarter = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
    for v in &mut phased.samples {
        *v *= quarter;
    }
    let drive: Vec<f64> = (0..grid.n_samples)
        .map(|i| {
            let t = grid.time_at(i);
            (2.0 * std::f64::consts::PI * pm.drive_freq_hz * t + mz.drive_phase_rad).cos()
        })
        .collect();
    let comb_envelope = modulate_intensity(&phased, mz, &drive)?;
    let lines = extract_comb_lines(&comb_envelope, pm.drive_freq_hz)?;
    Ok((comb_envelope, lines))
}

/// Recover the comb line weights by averaging one exact modulation period.
///
/// Lines below -200 dB of the strongest are clamped to exactly zero so the
/// comb support is finite and reproducible.
pub fn extract_comb_lines(envelope: &ComplexEnvelope, spacing_hz: f64) -> Result<CombLines> {
    let rate = envelope.sample_rate_hz;
    let spp_f = rate / spacing_hz;
    let spp = spp_f.round() as usize;
    if spp == 0
        || (spp_f - spp as f64).abs() > 1e-9 * spp_f
        || envelope.samples.len() % spp != 0
    {
        return Err(Error::NonIntegerPeriod { spacing_hz });
    }
    let period = &envelope.samples[..spp];
    let half = (spp / 2) as i32;
    let mut raw: Vec<(i32, Complex64)> = Vec::with_capacity(spp);
    for k in -half..(spp as i32 - half) {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &p) in period.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * k as f64 * i as f64 / spp as f64;
            acc += p * Complex64::from_polar(1.0, ang);
        }
        raw.push((k, acc / spp as f64));
    }
    let peak = raw.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
    let clamp = peak * 1e-10;
    let weights = raw
        .into_iter()
        .filter(|(_, v)| v.norm() >= clamp && v.norm() > 0.0)
        .collect();
    Ok(CombLines { weights, spacing_hz })
}

/// Imprint the electrical waveform on the comb: literal product `p * x`.
pub fn optical_sample(comb: &ComplexEnvelope, x: &RealWaveform) -> Result<ComplexEnvelope> {
    comb.expect_domain(Domain::Optical)?;
    if x.samples.len() != comb.samples.len() || x.sample_rate_hz != comb.sample_rate_hz {
        return Err(Error::Mismatch(
            "sampled waveform and comb envelope differ in rate or length".into(),
        ));
    }
    let samples = comb.samples.iter().zip(&x.samples).map(|(&p, &v)| p * v).collect();
    Ok(ComplexEnvelope {
        samples,
        sample_rate_hz: comb.sample_rate_hz,
        domain: Domain::Optical,
    })
}

/// Physical variant of [`optical_sample`]: the waveform drives a sampling
/// MZM instead of multiplying the field directly. With a small modulation
/// index this reduces to a carrier term plus the literal product.
pub fn optical_sample_physical(
    comb: &ComplexEnvelope,
    x: &RealWaveform,
    sampler: &MzmSpec,
) -> Result<ComplexEnvelope> {
    comb.expect_domain(Domain::Optical)?;
    if x.samples.len() != comb.samples.len() || x.sample_rate_hz != comb.sample_rate_hz {
        return Err(Error::Mismatch(
            "sampled waveform and comb envelope differ in rate or length".into(),
        ));
    }
    modulate_intensity(comb, sampler, &x.samples)
}

/// Homodyne the optical envelope against the LO branch and apply the
/// photodiode's single-pole response; output is the complex I/Q baseband.
pub fn homodyne_receive(y: &ComplexEnvelope, recv: &ReceiverSpec) -> Result<ComplexEnvelope> {
    y.expect_domain(Domain::Optical)?;
    let gain = 2.0 * recv.lo_amplitude_volts;
    let scaled = ComplexEnvelope {
        samples: y.samples.iter().map(|&v| v * gain).collect(),
        sample_rate_hz: y.sample_rate_hz,
        domain: Domain::ElectricalBaseband,
    };
    let pd = recv.pd_bandwidth_hz;
    Ok(apply_freq_response(&scaled, |f| {
        Complex64::new(1.0, 0.0) / Complex64::new(1.0, f / pd)
    }))
}

/// Single-pole photodiode response at offset `f`, shared with the
/// reconstruction side so measurement equalization is exactly inverse.
pub fn pd_response(f_hz: f64, pd_bandwidth_hz: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) / Complex64::new(1.0, f_hz / pd_bandwidth_hz)
}

fn quantize_midrise(samples: &mut [Complex64], bits: u32) {
    let fs = samples
        .iter()
        .map(|v| v.re.abs().max(v.im.abs()))
        .fold(0.0, f64::max);
    if fs <= 0.0 {
        return;
    }
    let levels = 2f64.powi(bits as i32);
    let step = 2.0 * fs / levels;
    let code_max = levels / 2.0 - 1.0;
    let code_min = -levels / 2.0;
    let q = |v: f64| {
        let code = (v / step).floor().clamp(code_min, code_max);
        (code + 0.5) * step
    };
    for v in samples.iter_mut() {
        *v = Complex64::new(q(v.re), q(v.im));
    }
}

/// Anti-alias filter, integer decimation to the ADC rate, optional mid-rise
/// quantization, and the DFT of the captured record.
pub fn acquire(
    v: &ComplexEnvelope,
    recv: &ReceiverSpec,
    grid: &SimulationGrid,
) -> Result<SpectrumGrid> {
    v.expect_domain(Domain::ElectricalBaseband)?;
    let factor_f = grid.sample_rate_hz / recv.adc_rate_hz;
    let factor = factor_f.round() as usize;
    if factor == 0 || (factor_f - factor as f64).abs() > 1e-9 * factor_f {
        return Err(Error::NonIntegerDecimation {
            sim_rate: grid.sample_rate_hz,
            adc_rate: recv.adc_rate_hz,
        });
    }
    let cutoff = recv.lpf_cutoff_hz;
    let filtered = apply_freq_response(v, |f| {
        if f.abs() < cutoff {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let mut decimated: Vec<Complex64> =
        filtered.samples.iter().step_by(factor).copied().collect();
    if let Some(bits) = recv.adc_bits {
        quantize_midrise(&mut decimated, bits);
    }
    let env = ComplexEnvelope {
        samples: decimated,
        sample_rate_hz: recv.adc_rate_hz,
        domain: Domain::ElectricalBaseband,
    };
    Ok(dft_forward(&env))
}

/// Full measurement chain: optical sampling, homodyne receive, acquisition.
pub fn capture_baseband(
    x: &RealWaveform,
    comb_envelope: &ComplexEnvelope,
    recv: &ReceiverSpec,
    grid: &SimulationGrid,
) -> Result<SpectrumGrid> {
    let sampled = optical_sample(comb_envelope, x)?;
    let baseband = homodyne_receive(&sampled, recv)?;
    acquire(&baseband, recv, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn test_grid() -> SimulationGrid {
        SimulationGrid::new(160e9, 128_000).unwrap()
    }

    fn reference_laser() -> LaserSpec {
        LaserSpec { power_dbm: 16.0, frequency_hz: 193.1e12 }
    }

    fn reference_pm() -> PmSpec {
        PmSpec { mod_index_rad: 7.25 * std::f64::consts::PI, drive_freq_hz: 1e9 }
    }

    fn reference_mzm() -> MzmSpec {
        MzmSpec {
            mod_index_rad: 0.3 * std::f64::consts::PI,
            bias_rad: std::f64::consts::FRAC_PI_4,
            drive_phase_rad: 0.1,
            insertion_loss_db: 5.0,
            extinction_ratio_db: 30.0,
        }
    }

    fn unit_cw(grid: &SimulationGrid) -> ComplexEnvelope {
        ComplexEnvelope {
            samples: vec![Complex64::new(1.0, 0.0); grid.n_samples],
            sample_rate_hz: grid.sample_rate_hz,
            domain: Domain::Optical,
        }
    }

    #[test]
    fn branch_amplitude_matches_hand_value() {
        // 16 dBm split 50/50: sqrt(50 * 39.81 mW / 2) = 0.99763 V.
        assert_relative_eq!(branch_amplitude_volts(16.0, 0.5), 0.99763, epsilon = 1e-4);
    }

    #[test]
    fn zero_index_phase_modulator_is_transparent() {
        let g = SimulationGrid::new(160e9, 1600).unwrap();
        let cw = unit_cw(&g);
        let pm = PmSpec { mod_index_rad: 0.0, drive_freq_hz: 1e9 };
        let out = modulate_phase(&cw, &pm).unwrap();
        assert_eq!(out.samples, cw.samples);
    }

    #[test]
    fn phase_modulation_conserves_power() {
        let g = SimulationGrid::new(160e9, 1600).unwrap();
        let cw = unit_cw(&g);
        let out = modulate_phase(&cw, &reference_pm()).unwrap();
        assert_relative_eq!(out.mean_square(), cw.mean_square(), max_relative = 1e-12);
    }

    /// Bessel function of the first kind by Simpson quadrature of
    /// (1/pi) * int_0^pi cos(k*tau - x*sin(tau)) dtau.
    fn bessel_j(k: i32, x: f64) -> f64 {
        let n = 4000;
        let h = std::f64::consts::PI / n as f64;
        let f = |tau: f64| (k as f64 * tau - x * tau.sin()).cos();
        let mut acc = f(0.0) + f(std::f64::consts::PI);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0 / std::f64::consts::PI
    }

    #[test]
    fn phase_modulated_comb_matches_bessel_weights() {
        // exp(i*b*cos(theta)) = sum_k i^k J_k(b) e^{i*k*theta}.
        let g = SimulationGrid::new(160e9, 1600).unwrap();
        let pm = PmSpec { mod_index_rad: 2.0, drive_freq_hz: 1e9 };
        let out = modulate_phase(&unit_cw(&g), &pm).unwrap();
        let lines = extract_comb_lines(&out, 1e9).unwrap();
        for k in -8..=8 {
            let expected = Complex64::i().powi(k) * bessel_j(k, 2.0);
            assert!(
                (lines.weight(k) - expected).norm() < 1e-10,
                "line {k}: {} vs {expected}",
                lines.weight(k)
            );
        }
    }

    #[test]
    fn mzm_at_quadrature_rest_matches_hand_values() {
        let g = SimulationGrid::new(160e9, 160).unwrap();
        let cw = unit_cw(&g);
        let drive = vec![0.0; g.n_samples];
        let ideal = MzmSpec {
            mod_index_rad: 0.0,
            bias_rad: std::f64::consts::FRAC_PI_4,
            drive_phase_rad: 0.0,
            insertion_loss_db: 0.0,
            extinction_ratio_db: f64::INFINITY,
        };
        let out = modulate_intensity(&cw, &ideal, &drive).unwrap();
        assert_relative_eq!(out.samples[0].re, 0.70711, epsilon = 1e-5);
        assert_relative_eq!(out.samples[0].im, 0.0, epsilon = 1e-12);

        let lossy = MzmSpec { insertion_loss_db: 5.0, ..ideal };
        let out = modulate_intensity(&cw, &lossy, &drive).unwrap();
        assert_relative_eq!(out.samples[0].re, 0.39764, epsilon = 1e-5);
    }

    #[test]
    fn mzm_arm_fractions_and_extinction_floor() {
        let mz = reference_mzm();
        let (a, b) = mz.arm_fractions();
        assert_relative_eq!(a, 0.51581, epsilon = 1e-5);
        assert_relative_eq!(b, 0.48419, epsilon = 1e-5);

        // Transmission extrema sit at phi = 0 and phi = pi/2; their power
        // ratio is the extinction floor 10^(-ER/10).
        let g = SimulationGrid::new(4.0, 4).unwrap();
        let cw = unit_cw(&g);
        let probe = MzmSpec { mod_index_rad: 1.0, bias_rad: 0.0, ..mz };
        let drive = vec![0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI, 0.0];
        let out = modulate_intensity(&cw, &probe, &drive).unwrap();
        let max = out.samples[0].norm_sqr();
        let min = out.samples[1].norm_sqr();
        assert!((min / max - 1e-3).abs() < 1e-6);
    }

    #[test]
    fn trivial_comb_is_a_single_line() {
        let g = test_grid();
        let laser = reference_laser();
        let pm = PmSpec { mod_index_rad: 0.0, drive_freq_hz: 1e9 };
        let mz = MzmSpec {
            mod_index_rad: 0.0,
            bias_rad: 0.0,
            drive_phase_rad: 0.0,
            insertion_loss_db: 0.0,
            extinction_ratio_db: f64::INFINITY,
        };
        let (_, lines) = generate_ofc(&laser, &pm, &mz, &g).unwrap();
        assert_eq!(lines.weights.len(), 1);
        let expected = branch_amplitude_volts(16.0, 0.5);
        // The only line is DC at the branch amplitude (pi/4 static phase).
        assert_relative_eq!(lines.weight(0).norm(), expected, max_relative = 1e-12);
        assert_relative_eq!(lines.weight(0).arg(), std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn comb_extraction_matches_whole_record_dft() {
        let g = test_grid();
        let (envelope, lines) = generate_ofc(&reference_laser(), &reference_pm(), &reference_mzm(), &g).unwrap();
        let spec = dft_forward(&envelope);
        let per_spacing = (1e9 / g.resolution_hz()).round() as i64;
        for k in -30i64..=30 {
            let m = (spec.n() as i64 / 2 + k * per_spacing) as usize;
            let diff = (lines.weight(k as i32) - spec.values[m]).norm();
            assert!(diff < 1e-10, "line {k} differs by {diff}");
        }
    }

    #[test]
    fn comb_lines_capture_all_envelope_power() {
        let g = test_grid();
        let (envelope, lines) = generate_ofc(&reference_laser(), &reference_pm(), &reference_mzm(), &g).unwrap();
        let line_power: f64 = lines.weights.values().map(|v| v.norm_sqr()).sum();
        assert_relative_eq!(line_power, envelope.mean_square(), max_relative = 1e-9);
    }

    #[test]
    fn non_integer_period_is_rejected() {
        let g = test_grid();
        let cw = unit_cw(&g);
        assert!(matches!(
            extract_comb_lines(&cw, 0.9e9),
            Err(Error::NonIntegerPeriod { .. })
        ));
        let short = ComplexEnvelope {
            samples: cw.samples[..300].to_vec(),
            sample_rate_hz: 160e9,
            domain: Domain::Optical,
        };
        assert!(matches!(
            extract_comb_lines(&short, 1e9),
            Err(Error::NonIntegerPeriod { .. })
        ));
    }

    #[test]
    fn optical_sampling_of_a_tone_by_one_line_shifts_it() {
        let g = SimulationGrid::new(160e9, 16_000).unwrap();
        // Comb with the single line k = +1: p = e^{i*2*pi*df*t}.
        let p = ComplexEnvelope {
            samples: (0..g.n_samples)
                .map(|i| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 1e9 * g.time_at(i)))
                .collect(),
            sample_rate_hz: g.sample_rate_hz,
            domain: Domain::Optical,
        };
        let x = RealWaveform {
            samples: (0..g.n_samples)
                .map(|i| (2.0 * std::f64::consts::PI * 1.3e9 * g.time_at(i)).cos())
                .collect(),
            sample_rate_hz: g.sample_rate_hz,
        };
        let y = optical_sample(&p, &x).unwrap();
        let spec = dft_forward(&y);
        // cos splits into +/-1.3 GHz halves; the line shifts both by +1 GHz.
        let hi = spec.bin_of_freq(2.3e9).unwrap();
        let lo = spec.bin_of_freq(-0.3e9).unwrap();
        assert_relative_eq!(spec.values[hi].norm(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(spec.values[lo].norm(), 0.5, epsilon = 1e-12);
        let rest: f64 = (0..spec.n())
            .filter(|&m| m != hi && m != lo)
            .map(|m| spec.values[m].norm_sqr())
            .sum();
        assert!(rest < 1e-20);
    }

    #[test]
    fn zero_waveform_samples_to_zero() {
        let g = SimulationGrid::new(160e9, 160).unwrap();
        let p = unit_cw(&g);
        let x = RealWaveform { samples: vec![0.0; 160], sample_rate_hz: 160e9 };
        let y = optical_sample(&p, &x).unwrap();
        assert!(y.samples.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn small_signal_physical_sampling_approaches_the_product() {
        let g = SimulationGrid::new(160e9, 16_000).unwrap();
        let p = unit_cw(&g);
        let x = RealWaveform {
            samples: (0..g.n_samples)
                .map(|i| (2.0 * std::f64::consts::PI * 1.3e9 * g.time_at(i)).cos())
                .collect(),
            sample_rate_hz: g.sample_rate_hz,
        };
        let eps = 1e-3;
        let sampler = MzmSpec {
            mod_index_rad: eps,
            bias_rad: std::f64::consts::FRAC_PI_4,
            drive_phase_rad: 0.0,
            insertion_loss_db: 0.0,
            extinction_ratio_db: f64::INFINITY,
        };
        let y = optical_sample_physical(&p, &x, &sampler).unwrap();
        // cos(eps*x + pi/4) ~= cos(pi/4) - eps*sin(pi/4)*x + O(eps^2).
        let c = std::f64::consts::FRAC_1_SQRT_2;
        for (i, v) in y.samples.iter().enumerate().step_by(173) {
            let linear = c - eps * c * x.samples[i];
            assert!((v.re - linear).abs() < 2.0 * eps * eps);
        }
    }

    fn test_receiver() -> ReceiverSpec {
        ReceiverSpec {
            lo_amplitude_volts: branch_amplitude_volts(16.0, 0.5),
            pd_bandwidth_hz: 2.5e9,
            lpf_cutoff_hz: 2e9,
            adc_rate_hz: 4e9,
            adc_bits: None,
        }
    }

    #[test]
    fn homodyne_dc_gain_is_twice_the_lo_amplitude() {
        let g = SimulationGrid::new(160e9, 1600).unwrap();
        let y = ComplexEnvelope {
            samples: vec![Complex64::new(0.25, 0.0); g.n_samples],
            sample_rate_hz: g.sample_rate_hz,
            domain: Domain::Optical,
        };
        let recv = test_receiver();
        let v = homodyne_receive(&y, &recv).unwrap();
        let expected = 2.0 * recv.lo_amplitude_volts * 0.25;
        assert_relative_eq!(v.samples[37].re, expected, max_relative = 1e-9);
    }

    #[test]
    fn photodiode_rolls_off_three_db_at_its_bandwidth() {
        let g = SimulationGrid::new(160e9, 16_000).unwrap();
        let recv = test_receiver();
        let tone = |f: f64| ComplexEnvelope {
            samples: (0..g.n_samples)
                .map(|i| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * g.time_at(i)))
                .collect(),
            sample_rate_hz: g.sample_rate_hz,
            domain: Domain::Optical,
        };
        let at = |f: f64| {
            let v = homodyne_receive(&tone(f), &recv).unwrap();
            let spec = dft_forward(&v);
            spec.values[spec.bin_of_freq(f).unwrap()].norm()
        };
        let ratio_db = 20.0 * (at(2.5e9) / at(0.0)).log10();
        assert_relative_eq!(ratio_db, -3.01, epsilon = 0.1);
    }

    #[test]
    fn acquisition_decimates_to_the_adc_grid() {
        let g = test_grid();
        let v = ComplexEnvelope {
            samples: vec![Complex64::new(1e-3, 0.0); g.n_samples],
            sample_rate_hz: g.sample_rate_hz,
            domain: Domain::ElectricalBaseband,
        };
        let spec = acquire(&v, &test_receiver(), &g).unwrap();
        assert_eq!(spec.n(), 3200);
        assert_relative_eq!(spec.resolution_hz, g.resolution_hz(), max_relative = 1e-12);
    }

    #[test]
    fn out_of_band_tone_is_rejected_outright() {
        let g = test_grid();
        let v = ComplexEnvelope {
            samples: (0..g.n_samples)
                .map(|i| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * 3e9 * g.time_at(i)))
                .collect(),
            sample_rate_hz: g.sample_rate_hz,
            domain: Domain::ElectricalBaseband,
        };
        let spec = acquire(&v, &test_receiver(), &g).unwrap();
        let peak = spec.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        // The masking itself is exact; what survives is forward/inverse
        // transform roundoff, so the bound is roundoff-sized, not zero.
        assert!(peak < 1e-12, "residual peak {peak}");
    }

    #[test]
    fn ideal_adc_equals_the_unquantized_path_and_quantizer_is_close() {
        let g = test_grid();
        let v = ComplexEnvelope {
            samples: (0..g.n_samples)
                .map(|i| Complex64::from_polar(0.8, 2.0 * std::f64::consts::PI * 1.5e9 * g.time_at(i)))
                .collect(),
            sample_rate_hz: g.sample_rate_hz,
            domain: Domain::ElectricalBaseband,
        };
        let ideal = acquire(&v, &test_receiver(), &g).unwrap();
        let mut recv = test_receiver();
        recv.adc_bits = Some(12);
        let quantized = acquire(&v, &recv, &g).unwrap();
        let err: f64 = ideal
            .values
            .iter()
            .zip(&quantized.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let norm = ideal.total_mean_square().sqrt();
        // 12 bits leave roughly -70 dB of quantization error.
        assert!(err / norm < 1e-3, "quantization error {}", err / norm);
        assert!(err > 0.0);
    }

    #[test]
    fn acquisition_is_linear_with_quantization_off() {
        let g = SimulationGrid::new(160e9, 16_000).unwrap();
        let mk = |f: f64, a: f64| ComplexEnvelope {
            samples: (0..g.n_samples)
                .map(|i| Complex64::from_polar(a, 2.0 * std::f64::consts::PI * f * g.time_at(i)))
                .collect(),
            sample_rate_hz: g.sample_rate_hz,
            domain: Domain::ElectricalBaseband,
        };
        let recv = ReceiverSpec { adc_rate_hz: 4e9, ..test_receiver() };
        let a = mk(0.5e9, 1.0);
        let b = mk(-1.2e9, 0.7);
        let sum = ComplexEnvelope {
            samples: a.samples.iter().zip(&b.samples).map(|(x, y)| x + y).collect(),
            sample_rate_hz: g.sample_rate_hz,
            domain: Domain::ElectricalBaseband,
        };
        let sa = acquire(&a, &recv, &g).unwrap();
        let sb = acquire(&b, &recv, &g).unwrap();
        let ss = acquire(&sum, &recv, &g).unwrap();
        for m in 0..ss.n() {
            assert!((ss.values[m] - sa.values[m] - sb.values[m]).norm() < 1e-9);
        }
    }
}
