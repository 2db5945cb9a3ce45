//! Randomized cross-check of the two sparse solvers on synthetic coset
//! instances with known ground truth.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::recon::solver::{solve_exhaustive_l0, solve_omp};
use crate::recon::{build_coset_system, CosetSystem, MatrixSpec};
use crate::signals::SpectrumGrid;

/// Oracle run parameters.
#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub trials: usize,
    pub seed: u64,
    /// Per-instance SNR drawn uniformly from this range (dB).
    pub snr_range_db: (f64, f64),
    /// Gate constant shared with the reconstruction (`safety * rows * sigma^2`).
    pub gate_safety: f64,
    /// Greedy budget for the support-agreement comparison.
    pub omp_max_support: usize,
    /// Exhaustive depth for both comparisons.
    pub s_max: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 1,
            snr_range_db: (30.0, 50.0),
            gate_safety: 4.0,
            omp_max_support: 4,
            s_max: 3,
        }
    }
}

/// Outcome counts of an oracle run.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub trials: usize,
    /// Instances where greedy and exhaustive selected the same support.
    pub support_matches: usize,
    /// Instances where the exhaustive residual was no worse than greedy's
    /// at the same support budget.
    pub dominance_holds: usize,
    /// Largest value of (exhaustive residual - greedy residual), relative
    /// to the measurement energy; nonpositive when dominance holds.
    pub max_residual_gap: f64,
    pub one_sparse_trials: usize,
    pub one_sparse_matches: usize,
    pub two_sparse_trials: usize,
    pub two_sparse_matches: usize,
}

impl OracleReport {
    pub fn match_rate(&self) -> f64 {
        self.support_matches as f64 / self.trials as f64
    }

    pub fn dominance_rate(&self) -> f64 {
        self.dominance_holds as f64 / self.trials as f64
    }
}

/// Run the solver cross-check on random sparse instances of the coset
/// system: supports of size 1 or 2, unit-magnitude random-phase
/// coefficients, iid complex row noise at a random SNR.
pub fn run_support_oracle(spec: &MatrixSpec, opts: &OracleOptions) -> Result<OracleReport> {
    let n = (2.0 * spec.lpf_cutoff_hz / spec.resolution_hz).round() as usize;
    let blank = SpectrumGrid {
        values: vec![Complex64::new(0.0, 0.0); n],
        resolution_hz: spec.resolution_hz,
        center_hz: 0.0,
    };
    // The whitened matrix is offset-independent, so one representative
    // system serves every trial.
    let sys: CosetSystem = build_coset_system(spec, 173.0 * spec.resolution_hz, &blank)?;
    let rows = sys.rows.len();
    let ncols = sys.columns.len();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let unit_normal = Normal::new(0.0, 1.0).expect("unit sigma");

    let mut report = OracleReport {
        trials: opts.trials,
        support_matches: 0,
        dominance_holds: 0,
        max_residual_gap: f64::NEG_INFINITY,
        one_sparse_trials: 0,
        one_sparse_matches: 0,
        two_sparse_trials: 0,
        two_sparse_matches: 0,
    };

    for _ in 0..opts.trials {
        let s = if rng.gen_bool(0.5) { 1 } else { 2 };
        let mut cols: Vec<usize> = Vec::with_capacity(s);
        while cols.len() < s {
            let c = rng.gen_range(0..ncols);
            if !cols.contains(&c) {
                cols.push(c);
            }
        }
        let coeffs: Vec<Complex64> = (0..s)
            .map(|_| Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect();

        let mut clean = vec![Complex64::new(0.0, 0.0); rows];
        for (i, &c) in cols.iter().enumerate() {
            for r in 0..rows {
                clean[r] += sys.matrix[r][c] * coeffs[i];
            }
        }
        let signal_energy: f64 = clean.iter().map(|v| v.norm_sqr()).sum();
        let snr_db = rng.gen_range(opts.snr_range_db.0..opts.snr_range_db.1);
        let sigma_sq = signal_energy / (rows as f64 * 10f64.powf(snr_db / 10.0));
        let quad = (sigma_sq / 2.0).sqrt();
        let y: Vec<Complex64> = clean
            .iter()
            .map(|v| {
                v + Complex64::new(
                    quad * unit_normal.sample(&mut rng),
                    quad * unit_normal.sample(&mut rng),
                )
            })
            .collect();
        let y2: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        let tol = opts.gate_safety * rows as f64 * sigma_sq;

        let omp = solve_omp(&sys.matrix, &y, opts.omp_max_support, tol);
        let exh = solve_exhaustive_l0(&sys.matrix, &y, opts.s_max, tol)?;
        let omp_support: Vec<usize> = omp.coeffs.keys().copied().collect();
        let exh_support: Vec<usize> = exh.coeffs.keys().copied().collect();
        let matched = omp_support == exh_support;
        if matched {
            report.support_matches += 1;
        }
        if s == 1 {
            report.one_sparse_trials += 1;
            report.one_sparse_matches += usize::from(matched);
        } else {
            report.two_sparse_trials += 1;
            report.two_sparse_matches += usize::from(matched);
        }

        // Dominance: at the same support budget and no gate, exhaustive
        // search can never leave a larger residual than the greedy pick.
        let omp_budget = solve_omp(&sys.matrix, &y, opts.s_max, 0.0);
        let exh_pure = solve_exhaustive_l0(&sys.matrix, &y, opts.s_max, 0.0)?;
        let gap = (exh_pure.residual_sq - omp_budget.residual_sq) / y2.max(f64::MIN_POSITIVE);
        if gap <= 1e-9 {
            report.dominance_holds += 1;
        }
        report.max_residual_gap = report.max_residual_gap.max(gap);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::ReceiverSpec;
    use std::collections::BTreeMap;

    fn toy_spec() -> MatrixSpec {
        let mut weights = BTreeMap::new();
        for k in -25i32..=25 {
            let mag = 0.2 / (1.0 + 0.08 * k.abs() as f64);
            weights.insert(k, Complex64::from_polar(mag, 0.21 * k as f64));
        }
        let comb = crate::frontend::CombLines { weights, spacing_hz: 1e9 };
        let receiver = ReceiverSpec {
            lo_amplitude_volts: 0.5,
            pd_bandwidth_hz: 2.5e9,
            lpf_cutoff_hz: 2e9,
            adc_rate_hz: 4e9,
            adc_bits: None,
        };
        MatrixSpec::new(comb, &receiver, 20e9, 1.25e6, 21)
    }

    #[test]
    fn oracle_runs_and_dominance_always_holds() {
        let spec = toy_spec();
        let opts = OracleOptions { trials: 60, seed: 9, ..OracleOptions::default() };
        let report = run_support_oracle(&spec, &opts).unwrap();
        assert_eq!(report.trials, 60);
        assert_eq!(report.dominance_holds, 60);
        assert!(report.max_residual_gap <= 1e-9);
        assert_eq!(report.one_sparse_trials + report.two_sparse_trials, 60);
        // 1-sparse instances are easy even for the greedy solver.
        assert_eq!(report.one_sparse_matches, report.one_sparse_trials);
    }

    #[test]
    fn report_rates_divide_by_trials() {
        let r = OracleReport {
            trials: 10,
            support_matches: 7,
            dominance_holds: 10,
            max_residual_gap: -0.5,
            one_sparse_trials: 5,
            one_sparse_matches: 5,
            two_sparse_trials: 5,
            two_sparse_matches: 2,
        };
        assert!((r.match_rate() - 0.7).abs() < 1e-12);
        assert!((r.dominance_rate() - 1.0).abs() < 1e-12);
    }
}
