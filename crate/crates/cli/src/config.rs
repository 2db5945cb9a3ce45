//! Flat `key = value` configuration files.
//!
//! Dotted prefixes group related keys (`grid.*`, `mzm.*`, `band.2.*`); `#`
//! starts a comment. Every omitted key falls back to the built-in reference
//! scenario, so an empty file is a valid configuration. Unknown and
//! duplicated keys are rejected by name.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use bmsm_core::frontend::branch_amplitude_volts;
use bmsm_core::pipeline::ScenarioSpec;
use bmsm_core::recon::oracle::OracleOptions;
use bmsm_core::recon::SolverChoice;
use bmsm_core::signals::SimulationGrid;
use bmsm_core::stimulus::BandSpec;

/// Everything the subcommands need, assembled from one file.
#[derive(Debug, Clone)]
pub struct Config {
    pub scenario: ScenarioSpec,
    pub sweep: SweepConfig,
    pub oracle: OracleOptions,
}

/// Single-tone detection sweep parameters.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub tone_hz: f64,
    pub noise_psd_dbm_hz: f64,
    /// Per-bin SNR values, strictly increasing.
    pub snr_list_db: Vec<f64>,
    pub seeds_per_point: usize,
    pub base_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            tone_hz: 10.25e9,
            noise_psd_dbm_hz: -146.0,
            snr_list_db: vec![-20.0, 0.0, 6.0, 12.0, 20.0, 26.0, 28.0, 30.0, 32.0, 61.0],
            seeds_per_point: 20,
            base_seed: 1000,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// One `key = value` line, kept in file order for error reporting.
struct RawEntry {
    key: String,
    value: String,
    line: usize,
    used: bool,
}

struct Raw(Vec<RawEntry>);

impl Raw {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<RawEntry> = Vec::new();
        let mut seen = BTreeSet::new();
        for (idx, full_line) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match full_line.find('#') {
                Some(pos) => &full_line[..pos],
                None => full_line,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let Some((key, value)) = stripped.split_once('=') else {
                return err(format!("line {line}: expected `key = value`, got `{stripped}`"));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return err(format!("line {line}: empty key or value"));
            }
            if !seen.insert(key.clone()) {
                return err(format!("line {line}: duplicate key `{key}`"));
            }
            entries.push(RawEntry { key, value, line, used: false });
        }
        Ok(Self(entries))
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        for e in &mut self.0 {
            if e.key == key {
                e.used = true;
                return Some((e.value.clone(), e.line));
            }
        }
        None
    }

    fn first_unused(&self) -> Option<&RawEntry> {
        self.0.iter().find(|e| !e.used)
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.0.iter().any(|e| e.key.starts_with(prefix))
    }
}

fn parse_f64(value: &str, key: &str, line: usize) -> Result<f64, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError(format!("line {line}: `{key}` wants a number, got `{value}`")))
}

fn parse_int<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError(format!("line {line}: `{key}` wants an integer, got `{value}`")))
}

/// Pull a float-valued key into `slot` if present.
fn apply_f64(raw: &mut Raw, key: &str, slot: &mut f64) -> Result<(), ConfigError> {
    if let Some((v, line)) = raw.take(key) {
        *slot = parse_f64(&v, key, line)?;
    }
    Ok(())
}

/// An angle given either in radians or in units of pi; both at once is
/// ambiguous and rejected.
fn apply_angle(raw: &mut Raw, base: &str, slot: &mut f64) -> Result<(), ConfigError> {
    let rad_key = format!("{base}_rad");
    let pi_key = format!("{base}_pi_units");
    let rad = raw.take(&rad_key);
    let pi = raw.take(&pi_key);
    match (rad, pi) {
        (Some(_), Some((_, line))) => {
            err(format!("line {line}: `{pi_key}` conflicts with `{rad_key}`"))
        }
        (Some((v, line)), None) => {
            *slot = parse_f64(&v, &rad_key, line)?;
            Ok(())
        }
        (None, Some((v, line))) => {
            *slot = parse_f64(&v, &pi_key, line)? * std::f64::consts::PI;
            Ok(())
        }
        (None, None) => Ok(()),
    }
}

pub fn load_config(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    config_from_str(&text)
}

pub fn config_from_str(text: &str) -> Result<Config, ConfigError> {
    let mut raw = Raw::parse(text)?;
    let mut sc = ScenarioSpec::reference();
    let mut sweep = SweepConfig::default();
    let mut oracle = OracleOptions::default();

    // Grid.
    let mut sample_rate = sc.grid.sample_rate_hz;
    let mut n_samples = sc.grid.n_samples as u64;
    apply_f64(&mut raw, "grid.sample_rate_hz", &mut sample_rate)?;
    if let Some((v, line)) = raw.take("grid.n_samples") {
        n_samples = parse_int(&v, "grid.n_samples", line)?;
    }
    sc.grid = SimulationGrid::new(sample_rate, n_samples as usize)
        .map_err(|e| ConfigError(format!("grid: {e}")))?;

    // Laser and modulators.
    apply_f64(&mut raw, "laser.power_dbm", &mut sc.laser.power_dbm)?;
    apply_f64(&mut raw, "laser.frequency_hz", &mut sc.laser.frequency_hz)?;
    apply_angle(&mut raw, "pm.beta0", &mut sc.pm.mod_index_rad)?;
    apply_f64(&mut raw, "pm.drive_freq_hz", &mut sc.pm.drive_freq_hz)?;
    apply_angle(&mut raw, "mzm.beta1", &mut sc.mzm.mod_index_rad)?;
    apply_angle(&mut raw, "mzm.bias", &mut sc.mzm.bias_rad)?;
    apply_angle(&mut raw, "mzm.drive_phase", &mut sc.mzm.drive_phase_rad)?;
    apply_f64(&mut raw, "mzm.insertion_loss_db", &mut sc.mzm.insertion_loss_db)?;
    apply_f64(&mut raw, "mzm.extinction_ratio_db", &mut sc.mzm.extinction_ratio_db)?;

    // Receiver. The local oscillator amplitude follows the laser unless set
    // explicitly.
    let lo_key = raw.take("receiver.lo_amplitude_volts");
    apply_f64(&mut raw, "receiver.pd_bandwidth_hz", &mut sc.receiver.pd_bandwidth_hz)?;
    apply_f64(&mut raw, "receiver.lpf_cutoff_hz", &mut sc.receiver.lpf_cutoff_hz)?;
    apply_f64(&mut raw, "receiver.adc_rate_hz", &mut sc.receiver.adc_rate_hz)?;
    sc.receiver.lo_amplitude_volts = match lo_key {
        Some((v, line)) => parse_f64(&v, "receiver.lo_amplitude_volts", line)?,
        None => branch_amplitude_volts(sc.laser.power_dbm, 0.5),
    };
    if let Some((v, line)) = raw.take("receiver.adc_bits") {
        sc.receiver.adc_bits = if v == "off" {
            None
        } else {
            let bits: u32 = parse_int(&v, "receiver.adc_bits", line)?;
            if !(2..=32).contains(&bits) {
                return err(format!("line {line}: `receiver.adc_bits` wants 2..=32 or `off`"));
            }
            Some(bits)
        };
    }

    // Signal and bands.
    apply_f64(&mut raw, "signal.span_hz", &mut sc.stimulus.span_hz)?;
    if let Some((v, line)) = raw.take("signal.noise_psd_dbm_hz") {
        sc.stimulus.noise_psd_dbm_hz = if v == "off" {
            f64::NEG_INFINITY
        } else {
            parse_f64(&v, "signal.noise_psd_dbm_hz", line)?
        };
    }
    apply_f64(&mut raw, "signal.target_snr_db", &mut sc.stimulus.target_snr_db)?;
    if let Some((v, line)) = raw.take("signal.noise_seed") {
        sc.stimulus.noise_seed = parse_int(&v, "signal.noise_seed", line)?;
    }

    if raw.has_prefix("band.") {
        let Some((v, line)) = raw.take("band.count") else {
            return err("`band.count` is required when band.* keys are present");
        };
        let count: usize = parse_int(&v, "band.count", line)?;
        if count > 64 {
            return err(format!("line {line}: `band.count` of {count} is unreasonable"));
        }
        let mut bands = Vec::with_capacity(count);
        for i in 0..count {
            let carrier_key = format!("band.{i}.carrier_hz");
            let Some((v, line)) = raw.take(&carrier_key) else {
                return err(format!("missing `{carrier_key}`"));
            };
            let carrier_hz = parse_f64(&v, &carrier_key, line)?;
            let bw_key = format!("band.{i}.bandwidth_hz");
            let Some((v, line)) = raw.take(&bw_key) else {
                return err(format!("missing `{bw_key}`"));
            };
            let bandwidth_hz = parse_f64(&v, &bw_key, line)?;
            let mut relative_power_db = 0.0;
            apply_f64(&mut raw, &format!("band.{i}.relative_power_db"), &mut relative_power_db)?;
            let mut bit_seed = 11 + i as u64;
            if let Some((v, line)) = raw.take(&format!("band.{i}.bit_seed")) {
                bit_seed = parse_int(&v, &format!("band.{i}.bit_seed"), line)?;
            }
            bands.push(BandSpec { carrier_hz, bandwidth_hz, relative_power_db, bit_seed });
        }
        sc.stimulus.bands = bands;
    }

    // Reconstruction.
    if let Some((v, line)) = raw.take("recon.solver") {
        sc.recon.solver = match v.as_str() {
            "exhaustive" => SolverChoice::Exhaustive,
            "omp" => SolverChoice::Omp,
            other => {
                return err(format!(
                    "line {line}: `recon.solver` wants `exhaustive` or `omp`, got `{other}`"
                ))
            }
        };
    }
    if let Some((v, line)) = raw.take("recon.s_max") {
        sc.recon.s_max = parse_int(&v, "recon.s_max", line)?;
    }
    if let Some((v, line)) = raw.take("recon.max_support") {
        sc.recon.max_support = parse_int(&v, "recon.max_support", line)?;
    }
    apply_f64(&mut raw, "recon.gate_safety", &mut sc.recon.gate_safety)?;
    apply_f64(&mut raw, "recon.threshold_dbm", &mut sc.recon.threshold_dbm)?;
    if let Some((v, line)) = raw.take("recon.k_use") {
        sc.k_use = parse_int(&v, "recon.k_use", line)?;
        if sc.k_use < 0 {
            return err(format!("line {line}: `recon.k_use` wants a nonnegative harmonic count"));
        }
    }

    // Sweep.
    apply_f64(&mut raw, "sweep.tone_hz", &mut sweep.tone_hz)?;
    if let Some((v, line)) = raw.take("sweep.noise_psd_dbm_hz") {
        sweep.noise_psd_dbm_hz = if v == "off" {
            f64::NEG_INFINITY
        } else {
            parse_f64(&v, "sweep.noise_psd_dbm_hz", line)?
        };
    }
    if let Some((v, line)) = raw.take("sweep.snr_list_db") {
        let mut list = Vec::new();
        for part in v.split(',') {
            list.push(parse_f64(part.trim(), "sweep.snr_list_db", line)?);
        }
        if list.is_empty() {
            return err(format!("line {line}: `sweep.snr_list_db` is empty"));
        }
        if list.windows(2).any(|w| w[1] <= w[0]) {
            return err(format!("line {line}: `sweep.snr_list_db` must be strictly increasing"));
        }
        sweep.snr_list_db = list;
    }
    if let Some((v, line)) = raw.take("sweep.seeds_per_point") {
        sweep.seeds_per_point = parse_int(&v, "sweep.seeds_per_point", line)?;
        if sweep.seeds_per_point == 0 {
            return err(format!("line {line}: `sweep.seeds_per_point` must be at least 1"));
        }
    }
    if let Some((v, line)) = raw.take("sweep.base_seed") {
        sweep.base_seed = parse_int(&v, "sweep.base_seed", line)?;
    }

    // Oracle.
    if let Some((v, line)) = raw.take("oracle.trials") {
        oracle.trials = parse_int(&v, "oracle.trials", line)?;
        if oracle.trials == 0 {
            return err(format!("line {line}: `oracle.trials` must be at least 1"));
        }
    }
    if let Some((v, line)) = raw.take("oracle.seed") {
        oracle.seed = parse_int(&v, "oracle.seed", line)?;
    }
    apply_f64(&mut raw, "oracle.snr_lo_db", &mut oracle.snr_range_db.0)?;
    apply_f64(&mut raw, "oracle.snr_hi_db", &mut oracle.snr_range_db.1)?;
    apply_f64(&mut raw, "oracle.gate_safety", &mut oracle.gate_safety)?;
    if let Some((v, line)) = raw.take("oracle.s_max") {
        oracle.s_max = parse_int(&v, "oracle.s_max", line)?;
    }
    if let Some((v, line)) = raw.take("oracle.max_support") {
        oracle.omp_max_support = parse_int(&v, "oracle.max_support", line)?;
    }

    if let Some(e) = raw.first_unused() {
        return err(format!("line {}: unknown key `{}`", e.line, e.key));
    }

    validate(&sc)?;
    if oracle.snr_range_db.1 < oracle.snr_range_db.0 {
        return err("oracle SNR range is inverted");
    }
    Ok(Config { scenario: sc, sweep, oracle })
}

/// Cross-field checks, so every subcommand fails before doing any work.
fn validate(sc: &ScenarioSpec) -> Result<(), ConfigError> {
    let grid = &sc.grid;
    sc.stimulus.validate(grid).map_err(|e| ConfigError(e.to_string()))?;
    grid.bin_of(sc.pm.drive_freq_hz, "comb spacing")
        .map_err(|e| ConfigError(e.to_string()))?;
    let ratio = grid.sample_rate_hz / sc.receiver.adc_rate_hz;
    if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
        return err(format!(
            "ADC rate {} Hz must divide the simulation rate {} Hz",
            sc.receiver.adc_rate_hz, grid.sample_rate_hz
        ));
    }
    if sc.receiver.lpf_cutoff_hz <= 0.0
        || sc.receiver.lpf_cutoff_hz > sc.receiver.adc_rate_hz / 2.0
    {
        return err(format!(
            "low-pass cutoff {} Hz must lie in (0, {}] Hz",
            sc.receiver.lpf_cutoff_hz,
            sc.receiver.adc_rate_hz / 2.0
        ));
    }
    if sc.receiver.lo_amplitude_volts <= 0.0 {
        return err("local oscillator amplitude must be positive");
    }
    Ok(())
}

/// Apply the `--seed` override: every stochastic stream restarts from `n`.
pub fn override_seeds(cfg: &mut Config, n: u64) {
    cfg.scenario.stimulus.noise_seed = n;
    for (i, band) in cfg.scenario.stimulus.bands.iter_mut().enumerate() {
        band.bit_seed = n.wrapping_add(1 + i as u64);
    }
    cfg.sweep.base_seed = n;
    cfg.oracle.seed = n;
}

/// Apply the `--quantize` override.
pub fn override_quantize(cfg: &mut Config, value: &str) -> Result<(), ConfigError> {
    cfg.scenario.receiver.adc_bits = if value == "off" {
        None
    } else {
        let bits: u32 = value
            .parse()
            .map_err(|_| ConfigError(format!("--quantize wants `off` or a bit depth, got `{value}`")))?;
        if !(2..=32).contains(&bits) {
            return err("--quantize bit depth must lie in 2..=32");
        }
        Some(bits)
    };
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_yields_the_reference_scenario() {
        let cfg = config_from_str("").unwrap();
        let reference = ScenarioSpec::reference();
        assert_eq!(cfg.scenario.grid.n_samples, reference.grid.n_samples);
        assert_eq!(cfg.scenario.stimulus.bands.len(), 3);
        assert_eq!(cfg.scenario.stimulus.bands[0].carrier_hz, 7.52e9);
        assert_eq!(cfg.scenario.k_use, reference.k_use);
        assert_eq!(cfg.oracle.trials, 200);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = config_from_str(
            "# a comment\n\nsignal.target_snr_db = 40 # trailing\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.stimulus.target_snr_db, 40.0);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let e = config_from_str("grid.sample_rat_hz = 1e9\n").unwrap_err();
        assert!(e.0.contains("unknown key `grid.sample_rat_hz`"), "{e}");
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let e = config_from_str("laser.power_dbm = 10\nlaser.power_dbm = 11\n").unwrap_err();
        assert!(e.0.contains("duplicate key `laser.power_dbm`"), "{e}");
    }

    #[test]
    fn angles_accept_pi_units_but_not_both_forms() {
        let cfg = config_from_str("pm.beta0_pi_units = 0.5\n").unwrap();
        assert!((cfg.scenario.pm.mod_index_rad - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let cfg = config_from_str("mzm.bias_rad = 0.1\n").unwrap();
        assert_eq!(cfg.scenario.mzm.bias_rad, 0.1);
        let e = config_from_str("pm.beta0_rad = 1\npm.beta0_pi_units = 0.5\n").unwrap_err();
        assert!(e.0.contains("conflicts"), "{e}");
    }

    #[test]
    fn off_grid_carrier_is_rejected_with_the_documented_message() {
        let text = "band.count = 1\nband.0.carrier_hz = 7.5201e9\nband.0.bandwidth_hz = 50e6\n";
        let e = config_from_str(text).unwrap_err();
        assert!(e.0.contains("carrier not on analysis grid"), "{e}");
    }

    #[test]
    fn band_list_replaces_the_default_bands() {
        let text = "band.count = 1\nband.0.carrier_hz = 5e9\nband.0.bandwidth_hz = 80e6\n";
        let cfg = config_from_str(text).unwrap();
        assert_eq!(cfg.scenario.stimulus.bands.len(), 1);
        assert_eq!(cfg.scenario.stimulus.bands[0].carrier_hz, 5e9);
        assert_eq!(cfg.scenario.stimulus.bands[0].bit_seed, 11);

        let empty = config_from_str("band.count = 0\n").unwrap();
        assert!(empty.scenario.stimulus.bands.is_empty());
    }

    #[test]
    fn band_keys_without_count_are_rejected() {
        let e = config_from_str("band.0.carrier_hz = 5e9\n").unwrap_err();
        assert!(e.0.contains("band.count"), "{e}");
    }

    #[test]
    fn noise_and_quantizer_accept_off() {
        let cfg = config_from_str("signal.noise_psd_dbm_hz = off\nreceiver.adc_bits = off\n")
            .unwrap();
        assert_eq!(cfg.scenario.stimulus.noise_psd_dbm_hz, f64::NEG_INFINITY);
        assert_eq!(cfg.scenario.receiver.adc_bits, None);
        let cfg = config_from_str("receiver.adc_bits = 12\n").unwrap();
        assert_eq!(cfg.scenario.receiver.adc_bits, Some(12));
    }

    #[test]
    fn lo_amplitude_tracks_the_laser_unless_pinned() {
        let cfg = config_from_str("laser.power_dbm = 10\n").unwrap();
        assert!((cfg.scenario.receiver.lo_amplitude_volts
            - branch_amplitude_volts(10.0, 0.5))
        .abs()
            < 1e-12);
        let cfg = config_from_str("laser.power_dbm = 10\nreceiver.lo_amplitude_volts = 2.5\n")
            .unwrap();
        assert_eq!(cfg.scenario.receiver.lo_amplitude_volts, 2.5);
    }

    #[test]
    fn sweep_list_must_increase() {
        let e = config_from_str("sweep.snr_list_db = 0, 10, 10\n").unwrap_err();
        assert!(e.0.contains("strictly increasing"), "{e}");
        let cfg = config_from_str("sweep.snr_list_db = -5, 0, 3.5\n").unwrap();
        assert_eq!(cfg.sweep.snr_list_db, vec![-5.0, 0.0, 3.5]);
    }

    #[test]
    fn solver_choice_parses() {
        let cfg = config_from_str("recon.solver = omp\n").unwrap();
        assert_eq!(cfg.scenario.recon.solver, SolverChoice::Omp);
        let e = config_from_str("recon.solver = fastest\n").unwrap_err();
        assert!(e.0.contains("recon.solver"), "{e}");
    }

    #[test]
    fn seed_override_touches_every_stream() {
        let mut cfg = config_from_str("").unwrap();
        override_seeds(&mut cfg, 500);
        assert_eq!(cfg.scenario.stimulus.noise_seed, 500);
        assert_eq!(cfg.scenario.stimulus.bands[0].bit_seed, 501);
        assert_eq!(cfg.scenario.stimulus.bands[2].bit_seed, 503);
        assert_eq!(cfg.sweep.base_seed, 500);
        assert_eq!(cfg.oracle.seed, 500);
    }

    #[test]
    fn bad_adc_ratio_is_rejected() {
        let e = config_from_str("receiver.adc_rate_hz = 3e9\n").unwrap_err();
        assert!(e.0.contains("must divide"), "{e}");
    }

    #[test]
    fn malformed_lines_name_the_line() {
        let e = config_from_str("just some words\n").unwrap_err();
        assert!(e.0.contains("line 1"), "{e}");
        let e = config_from_str("laser.power_dbm = strong\n").unwrap_err();
        assert!(e.0.contains("wants a number"), "{e}");
    }
}
