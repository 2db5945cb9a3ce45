//! The four subcommands: comb report, full simulation, solver oracle, and
//! detection sweep. Every output file is a pure function of the
//! configuration, so repeated runs are byte-identical; wall-clock timings go
//! to stdout only.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use bmsm_core::frontend::generate_ofc;
use bmsm_core::pipeline::{
    compression_ratio, compute_metrics, detection_limit_sweep, run_scenario, FrontEnd,
};
use bmsm_core::recon::oracle::run_support_oracle;

use crate::config::Config;
use crate::csv::{self, SpectrumRow};

/// Harmonic window of the comb report; the instrument is designed around
/// this 47-line span.
const COMB_REPORT_HALF_WIDTH: i32 = 23;

pub fn cmd_comb(cfg: &Config, out: &Path) -> Result<()> {
    let sc = &cfg.scenario;
    let t0 = Instant::now();
    let (_, comb) = generate_ofc(&sc.laser, &sc.pm, &sc.mzm, &sc.grid)?;
    let elapsed = t0.elapsed();

    let rows: Vec<(i32, f64, f64, f64)> = comb
        .weights
        .iter()
        .filter(|(_, w)| w.norm() > 0.0)
        .map(|(&k, w)| {
            (
                k,
                (sc.laser.frequency_hz + k as f64 * comb.spacing_hz) / 1e12,
                comb.magnitude_db(k, COMB_REPORT_HALF_WIDTH * -1, COMB_REPORT_HALF_WIDTH),
                w.arg(),
            )
        })
        .collect();
    csv::write_comb_csv(&out.join("comb.csv"), &rows).context("writing comb.csv")?;

    let lo = -COMB_REPORT_HALF_WIDTH;
    let hi = COMB_REPORT_HALF_WIDTH;
    let within = comb.lines_within_window_db(lo, hi, 5.0);
    let span = hi - lo + 1;
    let summary = format!(
        "{within} of {span} lines within 5.0 dB of the strongest over k in [{lo}, {hi}]; \
         peak-to-trough {:.2} dB\n",
        comb.range_db(lo, hi)
    );
    std::fs::write(out.join("comb_summary.txt"), &summary).context("writing comb_summary.txt")?;
    print!("{summary}");
    println!("comb generated in {:.1} ms", elapsed.as_secs_f64() * 1e3);
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6e}"),
        None => "n/a".into(),
    }
}

pub fn cmd_simulate(cfg: &Config, out: &Path) -> Result<()> {
    let sc = &cfg.scenario;
    let t0 = Instant::now();
    let fe = FrontEnd::new(sc)?;
    let run = run_scenario(&fe, &sc.stimulus, &sc.recon)?;
    let metrics = compute_metrics(&fe, &sc.stimulus, &run);
    let elapsed = t0.elapsed();

    for w in &run.stimulus.warnings {
        eprintln!("warning: {w}");
    }

    let res = sc.grid.resolution_hz();
    let span_bins = (sc.stimulus.span_hz / res).round() as usize;
    let center = run.input_spectrum.n() / 2;
    let input_rows: Vec<SpectrumRow> = (0..=span_bins)
        .map(|m| SpectrumRow {
            frequency_hz: m as f64 * res,
            value: run.input_spectrum.values[center + m],
        })
        .collect();
    csv::write_spectrum_csv(&out.join("input_spectrum.csv"), &input_rows)
        .context("writing input_spectrum.csv")?;

    let down_rows: Vec<SpectrumRow> = (0..run.measured.n())
        .map(|m| SpectrumRow {
            frequency_hz: run.measured.freq_of_bin(m),
            value: run.measured.values[m],
        })
        .collect();
    csv::write_spectrum_csv(&out.join("downconverted_spectrum.csv"), &down_rows)
        .context("writing downconverted_spectrum.csv")?;

    let rec_rows: Vec<SpectrumRow> = run
        .reconstruction
        .support
        .iter()
        .map(|(&bin, &v)| SpectrumRow { frequency_hz: bin as f64 * res, value: v })
        .collect();
    csv::write_spectrum_csv(&out.join("reconstructed_spectrum.csv"), &rec_rows)
        .context("writing reconstructed_spectrum.csv")?;

    let mut report = String::new();
    let w = &mut report;
    let _ = writeln!(w, "snr_db = {:.6e}", metrics.snr_db);
    let _ = writeln!(w, "e_r = {}", fmt_opt(metrics.e_r));
    let _ = writeln!(w, "e_r_downconverted = {}", fmt_opt(metrics.e_r_downconverted));
    let _ = writeln!(w, "support_bins = {}", metrics.support_size);
    let _ = writeln!(w, "spurious_bins = {}", metrics.spur_bins);
    let _ = writeln!(w, "sfdr_db = {:.6e}", metrics.sfdr_raw.sfdr_db);
    let _ = writeln!(w, "sfdr_alias_excluded_db = {:.6e}", metrics.sfdr_alias_excluded.sfdr_db);
    let _ = writeln!(
        w,
        "compression_ratio = {:.6e}",
        compression_ratio(sc.stimulus.span_hz, sc.receiver.adc_rate_hz)
    );
    let _ = writeln!(w, "threshold_dbm = {:.6e}", sc.recon.threshold_dbm);
    let _ = writeln!(w, "quiet_cosets = {}", run.reconstruction.quiet_cosets);
    let _ = writeln!(w, "dropped_columns = {}", run.reconstruction.dropped_columns);
    let _ = writeln!(w, "detected_band_count = {}", metrics.detected.len());
    for (i, b) in metrics.detected.iter().enumerate() {
        let _ = writeln!(w, "band.{i}.lo_hz = {:.6e}", b.lo_hz);
        let _ = writeln!(w, "band.{i}.hi_hz = {:.6e}", b.hi_hz);
        let _ = writeln!(w, "band.{i}.center_hz = {:.6e}", b.center_hz);
        let _ = writeln!(w, "band.{i}.peak_dbm = {:.6e}", b.peak_dbm);
        let _ = writeln!(w, "band.{i}.power_dbm = {:.6e}", b.power_dbm);
        let _ = writeln!(w, "band.{i}.bins = {}", b.bin_count);
    }
    std::fs::write(out.join("metrics.txt"), &report).context("writing metrics.txt")?;

    println!(
        "simulate: E_r {} | support {} bins | {} detected bands | {:.1} ms",
        fmt_opt(metrics.e_r),
        metrics.support_size,
        metrics.detected.len(),
        elapsed.as_secs_f64() * 1e3
    );
    Ok(())
}

pub fn cmd_oracle(cfg: &Config, out: &Path) -> Result<()> {
    let t0 = Instant::now();
    let fe = FrontEnd::new(&cfg.scenario)?;
    let report = run_support_oracle(&fe.matrix, &cfg.oracle)?;
    let elapsed = t0.elapsed();

    let mut text = String::new();
    let w = &mut text;
    let _ = writeln!(w, "trials = {}", report.trials);
    let _ = writeln!(w, "support_matches = {}", report.support_matches);
    let _ = writeln!(w, "support_match_rate = {:.6e}", report.match_rate());
    let _ = writeln!(w, "one_sparse = {} of {}", report.one_sparse_matches, report.one_sparse_trials);
    let _ = writeln!(w, "two_sparse = {} of {}", report.two_sparse_matches, report.two_sparse_trials);
    let _ = writeln!(w, "dominance_holds = {}", report.dominance_holds);
    let _ = writeln!(w, "dominance_rate = {:.6e}", report.dominance_rate());
    let _ = writeln!(w, "max_residual_gap = {:.6e}", report.max_residual_gap);
    std::fs::write(out.join("oracle_report.txt"), &text).context("writing oracle_report.txt")?;

    print!("{text}");
    println!("oracle: {} trials in {:.1} ms", report.trials, elapsed.as_secs_f64() * 1e3);
    Ok(())
}

pub fn cmd_sweep(cfg: &Config, out: &Path) -> Result<()> {
    let sc = &cfg.scenario;
    let t0 = Instant::now();
    let fe = FrontEnd::new(sc)?;
    let result = detection_limit_sweep(
        &fe,
        cfg.sweep.noise_psd_dbm_hz,
        cfg.sweep.tone_hz,
        &cfg.sweep.snr_list_db,
        cfg.sweep.seeds_per_point,
        cfg.sweep.base_seed,
        &sc.recon,
    )?;
    let elapsed = t0.elapsed();

    let points: Vec<(f64, usize, usize)> =
        result.points.iter().map(|p| (p.snr_db, p.detected, p.trials)).collect();
    csv::write_sweep_csv(&out.join("sweep.csv"), &points).context("writing sweep.csv")?;

    let limit_line = match result.limit_db {
        Some(db) => format!("limit_db = {db:.6e}\n"),
        None => "limit_db = not reached\n".to_string(),
    };
    let summary = format!(
        "tone_hz = {:.6e}\nseeds_per_point = {}\n{limit_line}",
        result.tone_hz, cfg.sweep.seeds_per_point
    );
    std::fs::write(out.join("sweep_summary.txt"), &summary)
        .context("writing sweep_summary.txt")?;

    print!("{summary}");
    println!(
        "sweep: {} points in {:.1} s",
        result.points.len(),
        elapsed.as_secs_f64()
    );
    Ok(())
}
