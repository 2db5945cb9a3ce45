//! End-to-end scenario orchestration: build the front end once, run
//! stimuli through capture and reconstruction, and derive quality metrics.

use crate::error::Result;
use crate::frontend::{
    capture_baseband, generate_ofc, CombLines, LaserSpec, MzmSpec, PmSpec, ReceiverSpec,
};
use crate::recon::{
    detect_bands, reconstruct_full, relative_error, relative_error_downconverted, sfdr_report,
    DetectedBand, MatrixSpec, ReconOptions, Reconstruction, SfdrReport,
};
use crate::signals::{dft_forward_real, ComplexEnvelope, SimulationGrid, SpectrumGrid};
use crate::stimulus::{gen_multiband, measure_snr, BandSpec, MultibandSpec, Stimulus};

/// Comb harmonics used by the reconstruction matrix.
pub const DEFAULT_K_USE: i32 = 21;

/// Gap tolerance (in bins) when grouping reconstructed bins into bands.
pub const BAND_GAP_BINS: i64 = 2;

/// Full description of one simulated measurement.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub grid: SimulationGrid,
    pub laser: LaserSpec,
    pub pm: PmSpec,
    pub mzm: MzmSpec,
    pub receiver: ReceiverSpec,
    pub stimulus: MultibandSpec,
    pub recon: ReconOptions,
    /// Highest comb harmonic the reconstruction matrix keeps.
    pub k_use: i32,
}

impl ScenarioSpec {
    /// The showcase configuration: a 47-line comb at 1 GHz spacing scanning
    /// a 20 GHz span, three NRZ bands at 7.52, 10.25 and 19.7 GHz, and a
    /// 4 GSa/s capture behind a 2 GHz low-pass filter. This is also what the
    /// command-line tool runs when given an empty config file.
    pub fn reference() -> Self {
        use crate::frontend::branch_amplitude_volts;
        let laser = LaserSpec { power_dbm: 16.0, frequency_hz: 193.1e12 };
        ScenarioSpec {
            grid: SimulationGrid::new(160e9, 128_000).expect("static grid"),
            pm: PmSpec { mod_index_rad: 7.25 * std::f64::consts::PI, drive_freq_hz: 1e9 },
            mzm: MzmSpec {
                mod_index_rad: 0.3 * std::f64::consts::PI,
                bias_rad: std::f64::consts::FRAC_PI_4,
                drive_phase_rad: 0.1,
                insertion_loss_db: 5.0,
                extinction_ratio_db: 30.0,
            },
            receiver: ReceiverSpec {
                lo_amplitude_volts: branch_amplitude_volts(laser.power_dbm, 0.5),
                pd_bandwidth_hz: 2.5e9,
                lpf_cutoff_hz: 2e9,
                adc_rate_hz: 4e9,
                adc_bits: None,
            },
            stimulus: MultibandSpec {
                bands: vec![
                    BandSpec {
                        carrier_hz: 7.52e9,
                        bandwidth_hz: 100e6,
                        relative_power_db: 0.0,
                        bit_seed: 11,
                    },
                    BandSpec {
                        carrier_hz: 10.25e9,
                        bandwidth_hz: 50e6,
                        relative_power_db: 0.0,
                        bit_seed: 12,
                    },
                    BandSpec {
                        carrier_hz: 19.7e9,
                        bandwidth_hz: 30e6,
                        relative_power_db: 0.0,
                        bit_seed: 13,
                    },
                ],
                span_hz: 20e9,
                noise_psd_dbm_hz: -146.0,
                target_snr_db: 61.0,
                noise_seed: 42,
            },
            laser,
            recon: ReconOptions::default(),
            k_use: DEFAULT_K_USE,
        }
    }
}

/// The stimulus-independent half of a scenario: comb and matrix.
pub struct FrontEnd {
    pub grid: SimulationGrid,
    pub receiver: ReceiverSpec,
    pub comb_envelope: ComplexEnvelope,
    pub comb: CombLines,
    pub matrix: MatrixSpec,
    pub span_hz: f64,
}

impl FrontEnd {
    pub fn new(spec: &ScenarioSpec) -> Result<Self> {
        let (comb_envelope, comb) = generate_ofc(&spec.laser, &spec.pm, &spec.mzm, &spec.grid)?;
        let matrix = MatrixSpec::new(
            comb.clone(),
            &spec.receiver,
            spec.stimulus.span_hz,
            spec.grid.resolution_hz(),
            spec.k_use,
        );
        Ok(Self {
            grid: spec.grid,
            receiver: spec.receiver,
            comb_envelope,
            comb,
            matrix,
            span_hz: spec.stimulus.span_hz,
        })
    }
}

/// One stimulus pushed through the whole chain.
pub struct ScenarioRun {
    pub stimulus: Stimulus,
    pub input_spectrum: SpectrumGrid,
    pub measured: SpectrumGrid,
    pub reconstruction: Reconstruction,
}

/// Simulate a stimulus through an already-built front end.
pub fn run_scenario(
    fe: &FrontEnd,
    stimulus_spec: &MultibandSpec,
    recon: &ReconOptions,
) -> Result<ScenarioRun> {
    let stimulus = gen_multiband(stimulus_spec, &fe.grid)?;
    let input_spectrum = dft_forward_real(&stimulus.waveform);
    let measured = capture_baseband(&stimulus.waveform, &fe.comb_envelope, &fe.receiver, &fe.grid)?;
    let reconstruction = reconstruct_full(&measured, &fe.matrix, recon)?;
    Ok(ScenarioRun { stimulus, input_spectrum, measured, reconstruction })
}

/// Nyquist-rate-to-ADC-rate compression of the acquisition.
pub fn compression_ratio(span_hz: f64, adc_rate_hz: f64) -> f64 {
    2.0 * span_hz / adc_rate_hz
}

/// Quality metrics of one run.
#[derive(Debug, Clone)]
pub struct ScenarioMetrics {
    pub snr_db: f64,
    /// Relative error against the true input spectrum; absent when the
    /// stimulus carries no energy.
    pub e_r: Option<f64>,
    /// Relative error of the estimate pushed back through the model,
    /// against the measured baseband.
    pub e_r_downconverted: Option<f64>,
    pub support_size: usize,
    pub detected: Vec<DetectedBand>,
    pub sfdr_raw: SfdrReport,
    pub sfdr_alias_excluded: SfdrReport,
    /// Reconstructed bins outside every stimulus band.
    pub spur_bins: usize,
}

/// Frequency extent of each stimulus band.
pub fn band_ranges(spec: &MultibandSpec) -> Vec<(f64, f64)> {
    spec.bands
        .iter()
        .map(|b: &BandSpec| (b.carrier_hz - b.bandwidth_hz, b.carrier_hz + b.bandwidth_hz))
        .collect()
}

/// Derive the metric set from a finished run.
pub fn compute_metrics(
    fe: &FrontEnd,
    stimulus_spec: &MultibandSpec,
    run: &ScenarioRun,
) -> ScenarioMetrics {
    let ranges = band_ranges(stimulus_spec);
    let e_r = relative_error(&run.input_spectrum, &run.reconstruction).ok();
    let e_r_down =
        relative_error_downconverted(&run.measured, &fe.matrix, &run.reconstruction).ok();
    let sfdr_raw = sfdr_report(&run.reconstruction, &fe.matrix, &ranges, false);
    let sfdr_excl = sfdr_report(&run.reconstruction, &fe.matrix, &ranges, true);
    ScenarioMetrics {
        snr_db: measure_snr(&run.stimulus),
        e_r,
        e_r_downconverted: e_r_down,
        support_size: run.reconstruction.support_size(),
        detected: detect_bands(&run.reconstruction, BAND_GAP_BINS),
        spur_bins: sfdr_raw.spur_bins,
        sfdr_raw,
        sfdr_alias_excluded: sfdr_excl,
    }
}

/// One point of the detection-rate sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub detected: usize,
    pub trials: usize,
}

impl SweepPoint {
    pub fn rate(&self) -> f64 {
        self.detected as f64 / self.trials as f64
    }
}

/// Detection-rate sweep outcome.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub tone_hz: f64,
    pub points: Vec<SweepPoint>,
    /// Smallest swept SNR with at least 90% detections, if any reached it.
    pub limit_db: Option<f64>,
}

/// Sweep a single tone across per-bin SNR values and count how often the
/// reconstruction recovers it at the exact bin.
///
/// Per-bin SNR means the tone's one-sided bin power over the per-bin noise
/// floor; each trial rescales the tone and redraws the noise.
pub fn detection_limit_sweep(
    fe: &FrontEnd,
    noise_psd_dbm_hz: f64,
    tone_hz: f64,
    snr_list_db: &[f64],
    seeds_per_point: usize,
    base_seed: u64,
    recon: &ReconOptions,
) -> Result<SweepResult> {
    let res = fe.grid.resolution_hz();
    let tone_bin = fe.grid.bin_of(tone_hz, "sweep tone")?;
    // Total-power SNR that yields the requested per-bin SNR: the tone holds
    // two half-power bins against noise spread across span/resolution bins.
    let per_bin_to_total = 10.0 * (res / fe.span_hz).log10();

    let mut points = Vec::with_capacity(snr_list_db.len());
    for (i, &snr) in snr_list_db.iter().enumerate() {
        if i > 0 && snr <= snr_list_db[i - 1] {
            return Err(crate::error::Error::Invalid {
                what: "sweep SNR list",
                reason: "must be strictly increasing".into(),
            });
        }
        let mut detected = 0usize;
        for trial in 0..seeds_per_point {
            let stim_spec = MultibandSpec {
                bands: vec![BandSpec {
                    carrier_hz: tone_hz,
                    bandwidth_hz: res,
                    relative_power_db: 0.0,
                    bit_seed: 7,
                }],
                span_hz: fe.span_hz,
                noise_psd_dbm_hz,
                target_snr_db: snr + per_bin_to_total,
                noise_seed: base_seed
                    .wrapping_add((i * seeds_per_point + trial) as u64)
                    .wrapping_mul(2654435761),
            };
            let run = run_scenario(fe, &stim_spec, recon)?;
            if run.reconstruction.support.contains_key(&tone_bin) {
                detected += 1;
            }
        }
        points.push(SweepPoint { snr_db: snr, detected, trials: seeds_per_point });
    }
    let limit_db = points.iter().find(|p| p.rate() >= 0.9).map(|p| p.snr_db);
    Ok(SweepResult { tone_hz, points, limit_db })
}
