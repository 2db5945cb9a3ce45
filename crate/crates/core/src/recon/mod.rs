//! Sparse spectrum reconstruction from the sub-Nyquist baseband capture.
//!
//! The comb folds every input bin at `j*spacing +/- f` onto the baseband
//! offset `+/-f`, so bins sharing an offset form one small linear system
//! ("coset"). Measured baseband bins are equalized by the photodiode
//! response while building, which makes every matrix entry exactly
//! `scale * S_k` for a comb weight `S_k` and keeps the per-row noise iid.

pub mod oracle;
pub mod solver;

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frontend::{pd_response, CombLines, ReceiverSpec};
use crate::signals::{dbm_from_mean_square, SpectrumGrid};
use solver::{
    noise_sigma_sq_from_energies, solve_exhaustive_groups, solve_exhaustive_l0, solve_omp,
    solve_omp_groups,
};

/// Everything needed to assemble the measurement matrix of any coset.
#[derive(Debug, Clone)]
pub struct MatrixSpec {
    pub comb: CombLines,
    /// Highest comb harmonic entering the matrix; higher lines mix only
    /// content from outside the span and are excluded.
    pub k_use: i32,
    /// Net complex gain of the receive chain applied to every entry.
    pub scale: Complex64,
    pub pd_bandwidth_hz: f64,
    pub lpf_cutoff_hz: f64,
    pub span_hz: f64,
    pub resolution_hz: f64,
}

impl MatrixSpec {
    pub fn new(
        comb: CombLines,
        receiver: &ReceiverSpec,
        span_hz: f64,
        resolution_hz: f64,
        k_use: i32,
    ) -> Self {
        Self {
            comb,
            k_use,
            scale: Complex64::new(2.0 * receiver.lo_amplitude_volts, 0.0),
            pd_bandwidth_hz: receiver.pd_bandwidth_hz,
            lpf_cutoff_hz: receiver.lpf_cutoff_hz,
            span_hz,
            resolution_hz,
        }
    }

    pub fn spacing_hz(&self) -> f64 {
        self.comb.spacing_hz
    }

    /// Comb weight used by the matrix: zero beyond `k_use`.
    fn weight(&self, k: i64) -> Complex64 {
        if k.unsigned_abs() > self.k_use as u64 {
            return Complex64::new(0.0, 0.0);
        }
        self.comb.weight(k as i32)
    }

    pub fn bins_per_spacing(&self) -> i64 {
        (self.spacing_hz() / self.resolution_hz).round() as i64
    }

    /// Inverse of the photodiode response at a baseband offset.
    fn equalizer(&self, f_hz: f64) -> Complex64 {
        Complex64::new(1.0, 0.0) / pd_response(f_hz, self.pd_bandwidth_hz)
    }
}

/// One measured baseband row of a coset system.
#[derive(Debug, Clone, Copy)]
pub struct RowInfo {
    /// Baseband offset of the measured bin (signed).
    pub freq_hz: f64,
    pub l: i64,
    /// Whether the row equation was conjugated to share the columns.
    pub conjugated: bool,
}

/// One unknown input bin of a coset system.
#[derive(Debug, Clone, Copy)]
pub struct UnknownBin {
    /// Input frequency of the bin, in `(0, span)`.
    pub freq_hz: f64,
    pub j: i64,
    /// Whether the column stands for the conjugate of the input bin.
    pub conjugated: bool,
}

/// Linear system tying the measured baseband bins of one coset offset to
/// the input bins that fold onto it.
#[derive(Debug, Clone)]
pub struct CosetSystem {
    pub f_offset_hz: f64,
    pub rows: Vec<RowInfo>,
    pub columns: Vec<UnknownBin>,
    /// Row-major matrix; every entry is `scale * S_k` or its conjugate.
    pub matrix: Vec<Vec<Complex64>>,
    /// Equalized measured values, conjugated on conjugated rows.
    pub y: Vec<Complex64>,
}

impl CosetSystem {
    pub fn measured_energy(&self) -> f64 {
        self.y.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Build the coset system at a non-degenerate offset `0 < f < spacing/2`.
pub fn build_coset_system(
    spec: &MatrixSpec,
    f_offset_hz: f64,
    measured: &SpectrumGrid,
) -> Result<CosetSystem> {
    let res = spec.resolution_hz;
    let b_off = (f_offset_hz / res).round() as i64;
    if (f_offset_hz - b_off as f64 * res).abs() > res * 1e-9 {
        return Err(Error::OffGrid {
            what: "coset offset",
            freq_hz: f_offset_hz,
            resolution_hz: res,
        });
    }
    let per = spec.bins_per_spacing();
    if b_off < 0 || b_off > per / 2 {
        return Err(Error::Invalid {
            what: "coset offset",
            reason: format!("{f_offset_hz} Hz outside [0, spacing/2]"),
        });
    }
    if b_off == 0 || (per % 2 == 0 && b_off == per / 2) {
        return Err(Error::DegenerateCoset { offset_hz: f_offset_hz });
    }

    let spacing = spec.spacing_hz();
    let cutoff = spec.lpf_cutoff_hz;
    let max_l = (cutoff / spacing).ceil() as i64 + 1;

    let mut rows: Vec<RowInfo> = Vec::new();
    for l in -max_l..=max_l {
        let plus = l as f64 * spacing + f_offset_hz;
        if plus.abs() < cutoff {
            rows.push(RowInfo { freq_hz: plus, l, conjugated: false });
        }
        let minus = l as f64 * spacing - f_offset_hz;
        if minus.abs() < cutoff {
            rows.push(RowInfo { freq_hz: minus, l, conjugated: true });
        }
    }
    rows.sort_by(|a, b| a.freq_hz.partial_cmp(&b.freq_hz).expect("finite freqs"));

    let mut columns: Vec<UnknownBin> = Vec::new();
    let mut j = 0i64;
    while j as f64 * spacing + f_offset_hz < spec.span_hz {
        columns.push(UnknownBin { freq_hz: j as f64 * spacing + f_offset_hz, j, conjugated: false });
        j += 1;
    }
    let mut j = 1i64;
    while j as f64 * spacing - f_offset_hz < spec.span_hz {
        columns.push(UnknownBin { freq_hz: j as f64 * spacing - f_offset_hz, j, conjugated: true });
        j += 1;
    }
    columns.sort_by(|a, b| a.freq_hz.partial_cmp(&b.freq_hz).expect("finite freqs"));

    let mut matrix = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    for row in &rows {
        let mut out = Vec::with_capacity(columns.len());
        for col in &columns {
            let k = if row.conjugated == col.conjugated { row.l - col.j } else { row.l + col.j };
            let mut e = spec.scale * spec.weight(k);
            if row.conjugated {
                e = e.conj();
            }
            out.push(e);
        }
        matrix.push(out);
        let mut v = measured.value_at_hz(row.freq_hz) * spec.equalizer(row.freq_hz);
        if row.conjugated {
            v = v.conj();
        }
        y.push(v);
    }
    Ok(CosetSystem { f_offset_hz, rows, columns, matrix, y })
}

/// One unknown group of a real-expanded degenerate system.
#[derive(Debug, Clone)]
pub struct GroupInfo {
    /// Input frequency the group reconstructs.
    pub freq_hz: f64,
    /// Real column indices: `[re, im]`, or `[re]` for the real-valued DC bin.
    pub columns: Vec<usize>,
}

/// Real-expanded system for the self-aliasing offsets (`f = 0` and
/// `f = spacing/2`), where each input bin pairs with its own mirror and the
/// complex system degenerates.
#[derive(Debug, Clone)]
pub struct GroupSystem {
    pub f_offset_hz: f64,
    /// Number of complex measured bins behind the real rows.
    pub complex_rows: usize,
    pub row_freqs_hz: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub groups: Vec<GroupInfo>,
}

impl GroupSystem {
    pub fn measured_energy(&self) -> f64 {
        self.y.iter().map(|v| v * v).sum()
    }
}

fn push_complex_row(matrix: &mut Vec<Vec<f64>>, y: &mut Vec<f64>, row: &[Complex64], v: Complex64) {
    matrix.push(row.iter().map(|c| c.re).collect());
    y.push(v.re);
    matrix.push(row.iter().map(|c| c.im).collect());
    y.push(v.im);
}

/// Build the half-spacing system: bins at `j*spacing + spacing/2` alias
/// pairwise with their mirrors, leaving 2 real unknowns per bin.
pub fn build_half_spacing_system(spec: &MatrixSpec, measured: &SpectrumGrid) -> Result<GroupSystem> {
    let per = spec.bins_per_spacing();
    if per % 2 != 0 {
        return Err(Error::Invalid {
            what: "half-spacing coset",
            reason: "comb spacing is an odd number of bins".into(),
        });
    }
    let spacing = spec.spacing_hz();
    let f = spacing / 2.0;
    let cutoff = spec.lpf_cutoff_hz;
    let max_l = (cutoff / spacing).ceil() as i64 + 1;

    let mut row_l: Vec<i64> = (-max_l..=max_l)
        .filter(|&l| (l as f64 * spacing + f).abs() < cutoff)
        .collect();
    row_l.sort_by(|a, b| {
        (*a as f64 * spacing + f)
            .partial_cmp(&(*b as f64 * spacing + f))
            .expect("finite freqs")
    });

    let mut freqs = Vec::new();
    let mut jj = 0i64;
    while jj as f64 * spacing + f < spec.span_hz {
        freqs.push(jj as f64 * spacing + f);
        jj += 1;
    }
    let groups: Vec<GroupInfo> = freqs
        .iter()
        .enumerate()
        .map(|(g, &freq)| GroupInfo { freq_hz: freq, columns: vec![2 * g, 2 * g + 1] })
        .collect();

    let mut matrix = Vec::new();
    let mut y = Vec::new();
    let mut row_freqs = Vec::new();
    for &l in &row_l {
        let nu = l as f64 * spacing + f;
        row_freqs.push(nu);
        let mut row = Vec::with_capacity(2 * freqs.len());
        for (j, _) in freqs.iter().enumerate() {
            let j = j as i64;
            // X(nu - k*spacing) folds the bin at j*spacing + f (k = l - j)
            // together with its conjugate mirror (k = l + j + 1).
            let cu = spec.scale * (spec.weight(l - j) + spec.weight(l + j + 1));
            let cw = spec.scale * (spec.weight(l - j) - spec.weight(l + j + 1)) * Complex64::i();
            row.push(cu);
            row.push(cw);
        }
        let v = measured.value_at_hz(nu) * spec.equalizer(nu);
        push_complex_row(&mut matrix, &mut y, &row, v);
    }
    Ok(GroupSystem {
        f_offset_hz: f,
        complex_rows: row_l.len(),
        row_freqs_hz: row_freqs,
        matrix,
        y,
        groups,
    })
}

/// Build the zero-offset system: bins at exact comb multiples alias with
/// their own conjugates; the DC bin stays real.
pub fn build_dc_system(spec: &MatrixSpec, measured: &SpectrumGrid) -> Result<GroupSystem> {
    let spacing = spec.spacing_hz();
    let cutoff = spec.lpf_cutoff_hz;
    let max_l = (cutoff / spacing).ceil() as i64 + 1;
    let row_l: Vec<i64> = (-max_l..=max_l)
        .filter(|&l| (l as f64 * spacing).abs() < cutoff)
        .collect();

    let mut freqs = vec![0.0];
    let mut jj = 1i64;
    while jj as f64 * spacing < spec.span_hz {
        freqs.push(jj as f64 * spacing);
        jj += 1;
    }
    let mut groups = Vec::with_capacity(freqs.len());
    let mut col = 0usize;
    for &freq in &freqs {
        if freq == 0.0 {
            groups.push(GroupInfo { freq_hz: freq, columns: vec![col] });
            col += 1;
        } else {
            groups.push(GroupInfo { freq_hz: freq, columns: vec![col, col + 1] });
            col += 2;
        }
    }
    let n_cols = col;

    let mut matrix = Vec::new();
    let mut y = Vec::new();
    let mut row_freqs = Vec::new();
    for &l in &row_l {
        let nu = l as f64 * spacing;
        row_freqs.push(nu);
        let mut row = Vec::with_capacity(n_cols);
        for (g, info) in groups.iter().enumerate() {
            let j = g as i64;
            if info.columns.len() == 1 {
                row.push(spec.scale * spec.weight(l));
            } else {
                let cu = spec.scale * (spec.weight(l - j) + spec.weight(l + j));
                let cw = spec.scale * (spec.weight(l - j) - spec.weight(l + j)) * Complex64::i();
                row.push(cu);
                row.push(cw);
            }
        }
        let v = measured.value_at_hz(nu) * spec.equalizer(nu);
        push_complex_row(&mut matrix, &mut y, &row, v);
    }
    Ok(GroupSystem {
        f_offset_hz: 0.0,
        complex_rows: row_l.len(),
        row_freqs_hz: row_freqs,
        matrix,
        y,
        groups,
    })
}

/// Floor on the solver gate, relative to the coset energy. On noise-free
/// captures the estimated noise power collapses to roundoff scale and the
/// gate with it; without a floor the search then rejects the true support
/// (whose residual is cancellation noise from the Gram form, about
/// `eps * energy`, not zero) and escalates until it merely interpolates the
/// equations. 120 dB below the record is far beyond any physical dynamic
/// range, yet safely above that cancellation noise; it also matches the
/// solver's tie-breaking epsilon.
const RESIDUAL_FLOOR_REL: f64 = 1e-12;

/// Which sparse solver drives the reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Exhaustive,
    Omp,
}

/// Reconstruction parameters.
#[derive(Debug, Clone, Copy)]
pub struct ReconOptions {
    pub solver: SolverChoice,
    /// Exhaustive search depth per coset.
    pub s_max: usize,
    /// Greedy support budget per coset.
    pub max_support: usize,
    /// Residual gate is `safety * rows * noise_power`.
    pub gate_safety: f64,
    /// Final per-bin detection threshold.
    pub threshold_dbm: f64,
    /// Per-row noise power, when known; estimated from the coset energies
    /// otherwise.
    pub noise_power_override: Option<f64>,
}

impl Default for ReconOptions {
    fn default() -> Self {
        Self {
            solver: SolverChoice::Exhaustive,
            s_max: 3,
            max_support: 4,
            gate_safety: 4.0,
            threshold_dbm: -88.0,
            noise_power_override: None,
        }
    }
}

/// Sparse estimate of the one-sided input spectrum.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Bin index on the one-sided grid (`freq = bin * resolution`) to the
    /// estimated complex value.
    pub support: BTreeMap<i64, Complex64>,
    pub resolution_hz: f64,
    pub span_hz: f64,
    pub threshold_dbm: f64,
    /// Per-row noise power used for the residual gate.
    pub noise_power: f64,
    /// Cosets whose measured energy already passed the gate untouched.
    pub quiet_cosets: usize,
    /// Columns dropped by the greedy solver for rank deficiency.
    pub dropped_columns: usize,
}

impl Reconstruction {
    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    /// Estimated value at a signed bin (conjugate symmetry below DC).
    pub fn value_at_bin(&self, bin: i64) -> Complex64 {
        if bin >= 0 {
            self.support.get(&bin).copied().unwrap_or(Complex64::new(0.0, 0.0))
        } else {
            self.support
                .get(&(-bin))
                .map(|v| v.conj())
                .unwrap_or(Complex64::new(0.0, 0.0))
        }
    }

    pub fn bin_power_dbm(&self, bin: i64) -> f64 {
        dbm_from_mean_square(self.value_at_bin(bin).norm_sqr())
    }
}

/// Reconstruct the full one-sided spectrum from a baseband capture: solve
/// every coset independently, then prune to the detection threshold.
pub fn reconstruct_full(
    measured: &SpectrumGrid,
    spec: &MatrixSpec,
    opts: &ReconOptions,
) -> Result<Reconstruction> {
    if (measured.resolution_hz - spec.resolution_hz).abs() > spec.resolution_hz * 1e-9 {
        return Err(Error::Mismatch(
            "measured spectrum resolution differs from the matrix grid".into(),
        ));
    }
    let res = spec.resolution_hz;
    let per = spec.bins_per_spacing();
    let half = per / 2;

    let mut systems = Vec::with_capacity((half - 1).max(0) as usize);
    for b in 1..half {
        systems.push(build_coset_system(spec, b as f64 * res, measured)?);
    }
    let energies: Vec<f64> = systems.iter().map(|s| s.measured_energy()).collect();
    let rows = systems.first().map_or(8, |s| s.rows.len());
    let noise_power = opts
        .noise_power_override
        .unwrap_or_else(|| noise_sigma_sq_from_energies(&energies, rows));

    let mut support: BTreeMap<i64, Complex64> = BTreeMap::new();
    let mut quiet = 0usize;
    let mut dropped = 0usize;

    for sys in &systems {
        let tol = opts.gate_safety * sys.rows.len() as f64 * noise_power;
        let energy = sys.measured_energy();
        if energy <= tol {
            quiet += 1;
            continue;
        }
        let gate = tol.max(RESIDUAL_FLOOR_REL * energy);
        let sol = match opts.solver {
            SolverChoice::Exhaustive => solve_exhaustive_l0(&sys.matrix, &sys.y, opts.s_max, gate)?,
            SolverChoice::Omp => solve_omp(&sys.matrix, &sys.y, opts.max_support, gate),
        };
        dropped += sol.dropped_columns;
        for (c, coeff) in &sol.coeffs {
            let col = &sys.columns[*c];
            let bin = (col.freq_hz / res).round() as i64;
            let value = if col.conjugated { coeff.conj() } else { *coeff };
            support.insert(bin, value);
        }
    }

    let mut place_groups = |sys: &GroupSystem, sol: &solver::GroupSolution| {
        for (g, coeffs) in &sol.coeffs {
            let info = &sys.groups[*g];
            let bin = (info.freq_hz / res).round() as i64;
            let value = if coeffs.len() == 2 {
                Complex64::new(coeffs[0], coeffs[1])
            } else {
                Complex64::new(coeffs[0], 0.0)
            };
            support.insert(bin, value);
        }
    };

    let solve_degenerate = |sys: &GroupSystem| -> Result<Option<solver::GroupSolution>> {
        let tol = opts.gate_safety * sys.complex_rows as f64 * noise_power;
        let energy = sys.measured_energy();
        if energy <= tol {
            return Ok(None);
        }
        let gate = tol.max(RESIDUAL_FLOOR_REL * energy);
        let groups = sys.column_groups();
        let sol = match opts.solver {
            SolverChoice::Exhaustive => {
                solve_exhaustive_groups(&sys.matrix, &sys.y, &groups, opts.s_max, gate)?
            }
            SolverChoice::Omp => {
                solve_omp_groups(&sys.matrix, &sys.y, &groups, opts.max_support, gate)
            }
        };
        Ok(Some(sol))
    };

    if per % 2 == 0 {
        let sys = build_half_spacing_system(spec, measured)?;
        match solve_degenerate(&sys)? {
            None => quiet += 1,
            Some(sol) => {
                dropped += sol.dropped_columns;
                place_groups(&sys, &sol);
            }
        }
    }
    {
        let sys = build_dc_system(spec, measured)?;
        match solve_degenerate(&sys)? {
            None => quiet += 1,
            Some(sol) => {
                dropped += sol.dropped_columns;
                place_groups(&sys, &sol);
            }
        }
    }

    support.retain(|_, v| dbm_from_mean_square(v.norm_sqr()) >= opts.threshold_dbm);

    Ok(Reconstruction {
        support,
        resolution_hz: res,
        span_hz: spec.span_hz,
        threshold_dbm: opts.threshold_dbm,
        noise_power,
        quiet_cosets: quiet,
        dropped_columns: dropped,
    })
}

impl GroupSystem {
    /// Column index lists in group order, as the group solvers expect.
    pub fn column_groups(&self) -> Vec<Vec<usize>> {
        self.groups.iter().map(|g| g.columns.clone()).collect()
    }
}

/// Relative L2 error between the true one-sided spectrum and the sparse
/// estimate, over all grid bins from DC to the span edge.
pub fn relative_error(truth: &SpectrumGrid, rec: &Reconstruction) -> Result<f64> {
    if (truth.resolution_hz - rec.resolution_hz).abs() > rec.resolution_hz * 1e-9 {
        return Err(Error::Mismatch("truth spectrum is on a different grid".into()));
    }
    let n_span = (rec.span_hz / rec.resolution_hz).round() as i64;
    let center = truth.n() as i64 / 2;
    let mut num = 0.0;
    let mut den = 0.0;
    for m in 0..=n_span {
        let t = if center + m < truth.n() as i64 {
            truth.values[(center + m) as usize]
        } else {
            Complex64::new(0.0, 0.0)
        };
        let e = rec.support.get(&m).copied().unwrap_or(Complex64::new(0.0, 0.0));
        num += (t - e).norm_sqr();
        den += t.norm_sqr();
    }
    if den <= 0.0 {
        return Err(Error::ZeroNorm("true spectrum"));
    }
    Ok((num / den).sqrt())
}

/// Relative L2 error between the measured baseband spectrum and the
/// estimate pushed back through the measurement model.
pub fn relative_error_downconverted(
    measured: &SpectrumGrid,
    spec: &MatrixSpec,
    rec: &Reconstruction,
) -> Result<f64> {
    let res = spec.resolution_hz;
    let per = spec.bins_per_spacing();
    let den: f64 = measured.total_mean_square();
    if den <= 0.0 {
        return Err(Error::ZeroNorm("measured spectrum"));
    }
    let mut num = 0.0;
    for m in 0..measured.n() {
        let nu = measured.freq_of_bin(m);
        let mut pred = Complex64::new(0.0, 0.0);
        if nu.abs() < spec.lpf_cutoff_hz {
            let nu_bin = (nu / res).round() as i64;
            let mut acc = Complex64::new(0.0, 0.0);
            for k in -(spec.k_use as i64)..=(spec.k_use as i64) {
                let w = spec.weight(k);
                if w.norm_sqr() == 0.0 {
                    continue;
                }
                acc += w * rec.value_at_bin(nu_bin - k * per);
            }
            pred = pd_response(nu, spec.pd_bandwidth_hz) * spec.scale * acc;
        }
        num += (measured.values[m] - pred).norm_sqr();
    }
    Ok((num / den).sqrt())
}

/// Spur-free dynamic range of a reconstruction against known band limits.
#[derive(Debug, Clone)]
pub struct SfdrReport {
    /// Strongest reconstructed bin inside the bands.
    pub peak_dbm: f64,
    /// Strongest out-of-band bin, after any alias exclusion.
    pub worst_spur_dbm: Option<f64>,
    /// Peak minus worst spur; positive infinity when no spur remains.
    pub sfdr_db: f64,
    pub spur_bins: usize,
    /// Out-of-band bins discarded because they share a coset with a band.
    pub excluded_alias_bins: usize,
    pub alias_exclusion: bool,
}

fn folded_coset(bin: i64, per: i64) -> i64 {
    let c = bin.rem_euclid(per);
    c.min(per - c)
}

/// Rank every out-of-band support bin against the in-band peak.
///
/// With `exclude_aliases` set, out-of-band bins sharing a coset with any
/// in-band grid bin are reported separately instead of counting as spurs
/// (reconstruction ambiguity inside a coset is not a distortion product).
pub fn sfdr_report(
    rec: &Reconstruction,
    spec: &MatrixSpec,
    band_ranges_hz: &[(f64, f64)],
    exclude_aliases: bool,
) -> SfdrReport {
    let res = rec.resolution_hz;
    let per = spec.bins_per_spacing();
    let in_band = |f: f64| band_ranges_hz.iter().any(|&(lo, hi)| f >= lo - res * 0.5 && f <= hi + res * 0.5);

    let mut band_cosets: Vec<bool> = vec![false; (per / 2 + 1) as usize];
    if exclude_aliases {
        for &(lo, hi) in band_ranges_hz {
            let b_lo = (lo / res).floor() as i64;
            let b_hi = (hi / res).ceil() as i64;
            for b in b_lo..=b_hi {
                band_cosets[folded_coset(b, per) as usize] = true;
            }
        }
    }

    let mut peak = f64::NEG_INFINITY;
    let mut worst: Option<f64> = None;
    let mut spur_bins = 0usize;
    let mut excluded = 0usize;
    for (&bin, v) in &rec.support {
        let f = bin as f64 * res;
        let dbm = dbm_from_mean_square(v.norm_sqr());
        if in_band(f) {
            peak = peak.max(dbm);
        } else if exclude_aliases && band_cosets[folded_coset(bin, per) as usize] {
            excluded += 1;
        } else {
            spur_bins += 1;
            worst = Some(worst.map_or(dbm, |w: f64| w.max(dbm)));
        }
    }
    let sfdr_db = match worst {
        None => f64::INFINITY,
        Some(w) => peak - w,
    };
    SfdrReport {
        peak_dbm: peak,
        worst_spur_dbm: worst,
        sfdr_db,
        spur_bins,
        excluded_alias_bins: excluded,
        alias_exclusion: exclude_aliases,
    }
}

/// A contiguous run of reconstructed bins.
#[derive(Debug, Clone)]
pub struct DetectedBand {
    pub lo_hz: f64,
    pub hi_hz: f64,
    /// Power-weighted centroid.
    pub center_hz: f64,
    pub peak_dbm: f64,
    pub power_dbm: f64,
    pub bin_count: usize,
}

/// Group the support into bands, merging runs separated by at most
/// `gap_bins` missing bins.
pub fn detect_bands(rec: &Reconstruction, gap_bins: i64) -> Vec<DetectedBand> {
    let res = rec.resolution_hz;
    let mut out = Vec::new();
    let mut run: Vec<(i64, f64)> = Vec::new();
    let close = |run: &mut Vec<(i64, f64)>, out: &mut Vec<DetectedBand>| {
        if run.is_empty() {
            return;
        }
        let total: f64 = run.iter().map(|(_, e)| e).sum();
        // The energy-weighted centroid lies inside the run by construction;
        // the clamp only stops roundoff from pushing it an ulp outside.
        let centroid = (run.iter().map(|(b, e)| *b as f64 * e).sum::<f64>() / total)
            .clamp(run[0].0 as f64, run[run.len() - 1].0 as f64);
        let peak = run.iter().map(|(_, e)| dbm_from_mean_square(*e)).fold(f64::NEG_INFINITY, f64::max);
        out.push(DetectedBand {
            lo_hz: run[0].0 as f64 * res,
            hi_hz: run[run.len() - 1].0 as f64 * res,
            center_hz: centroid * res,
            peak_dbm: peak,
            power_dbm: dbm_from_mean_square(total),
            bin_count: run.len(),
        });
        run.clear();
    };
    for (&bin, v) in &rec.support {
        if let Some(&(prev, _)) = run.last() {
            if bin - prev > gap_bins + 1 {
                close(&mut run, &mut out);
            }
        }
        run.push((bin, v.norm_sqr()));
    }
    close(&mut run, &mut out);
    out
}
