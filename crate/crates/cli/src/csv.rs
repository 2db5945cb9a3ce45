//! CSV emission and reloading.
//!
//! Floats are written with 17 significant digits so a reload reproduces the
//! in-memory values bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use bmsm_core::signals::{dbm_clamped, dbm_from_mean_square};
use num_complex::Complex64;

/// One spectrum row: frequency, complex value, and its power for plotting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub frequency_hz: f64,
    pub value: Complex64,
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_spectrum_csv(path: &Path, rows: &[SpectrumRow]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "frequency_hz,re,im,power_dbm")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{}",
            fmt_f64(row.frequency_hz),
            fmt_f64(row.value.re),
            fmt_f64(row.value.im),
            fmt_f64(dbm_clamped(dbm_from_mean_square(row.value.norm_sqr())))
        )?;
    }
    w.flush()
}

pub fn read_spectrum_csv(path: &Path) -> std::io::Result<Vec<SpectrumRow>> {
    let r = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if idx == 0 {
            continue;
        }
        let mut parts = line.split(',');
        let mut next = || -> std::io::Result<f64> {
            parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| std::io::Error::other(format!("bad row {}", idx + 1)))
        };
        let frequency_hz = next()?;
        let re = next()?;
        let im = next()?;
        rows.push(SpectrumRow { frequency_hz, value: Complex64::new(re, im) });
    }
    Ok(rows)
}

/// Comb report row: harmonic index, absolute optical frequency, magnitude
/// relative to the strongest line, and phase.
pub fn write_comb_csv(
    path: &Path,
    rows: &[(i32, f64, f64, f64)],
) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "k,frequency_thz,magnitude_db,phase_rad")?;
    for &(k, f_thz, mag_db, phase) in rows {
        writeln!(w, "{k},{},{},{}", fmt_f64(f_thz), fmt_f64(mag_db), fmt_f64(phase))?;
    }
    w.flush()
}

/// Detection-sweep table.
pub fn write_sweep_csv(
    path: &Path,
    points: &[(f64, usize, usize)],
) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "snr_db,detected,trials,rate")?;
    for &(snr, detected, trials) in points {
        writeln!(
            w,
            "{},{detected},{trials},{}",
            fmt_f64(snr),
            fmt_f64(detected as f64 / trials as f64)
        )?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_rows_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spectrum.csv");
        let rows: Vec<SpectrumRow> = (0..50)
            .map(|i| SpectrumRow {
                frequency_hz: i as f64 * 1.25e6,
                value: Complex64::new(
                    (i as f64 * 0.7311).sin() * 1e-7,
                    (i as f64 * 1.9127).cos() * 3.3e4,
                ),
            })
            .collect();
        write_spectrum_csv(&path, &rows).unwrap();
        let back = read_spectrum_csv(&path).unwrap();
        assert_eq!(rows.len(), back.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.frequency_hz.to_bits(), b.frequency_hz.to_bits());
            assert_eq!(a.value.re.to_bits(), b.value.re.to_bits());
            assert_eq!(a.value.im.to_bits(), b.value.im.to_bits());
        }
    }

    #[test]
    fn seventeen_digits_survive_the_worst_cases() {
        for &v in &[
            f64::MIN_POSITIVE,
            f64::EPSILON,
            1.0 + f64::EPSILON,
            -1.2345678901234567e300,
            std::f64::consts::PI,
        ] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{s}");
        }
    }
}
