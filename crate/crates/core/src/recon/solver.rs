//! Sparse solvers for the small dense coset systems: greedy orthogonal
//! matching pursuit, exhaustive minimum-residual search over bounded support
//! sizes, group-structured variants for the real-expanded degenerate systems,
//! and the shared noise-gate calibration.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hard bound on the exhaustive search depth; combinations beyond this are
/// impractical over 40 columns and not needed for the supported scenarios.
pub const EXHAUSTIVE_SMAX_BOUND: usize = 3;

/// Output of a sparse solve over a complex system.
#[derive(Debug, Clone)]
pub struct SparseSolution {
    /// Column index to coefficient, empty when nothing was selected.
    pub coeffs: BTreeMap<usize, Complex64>,
    pub residual_sq: f64,
    /// Whether the residual passed the gate (as opposed to running out of
    /// support budget and returning the best effort).
    pub met_tolerance: bool,
    /// Columns discarded because they made the normal equations singular.
    pub dropped_columns: usize,
}

/// Output of a group-sparse solve over a real system.
#[derive(Debug, Clone)]
pub struct GroupSolution {
    /// Group index to the coefficients of that group's columns, in the
    /// group's column order.
    pub coeffs: BTreeMap<usize, Vec<f64>>,
    pub residual_sq: f64,
    pub met_tolerance: bool,
    pub dropped_columns: usize,
}

fn lu_solve_complex(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.norm()))
        .fold(0.0, f64::max);
    let pivot_tol = scale * 1e-12;
    for col in 0..n {
        let mut piv = col;
        let mut mx = a[col][col].norm();
        for r in col + 1..n {
            let m = a[r][col].norm();
            if m > mx {
                piv = r;
                mx = m;
            }
        }
        if mx <= pivot_tol {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / d;
            if f.norm() == 0.0 {
                continue;
            }
            for c in col + 1..n {
                let v = a[col][c] * f;
                a[r][c] -= v;
            }
            let v = b[col] * f;
            b[r] -= v;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in col + 1..n {
            acc -= a[col][c] * x[c];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

fn lu_solve_real(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    let pivot_tol = scale * 1e-12;
    for col in 0..n {
        let mut piv = col;
        let mut mx = a[col][col].abs();
        for r in col + 1..n {
            let m = a[r][col].abs();
            if m > mx {
                piv = r;
                mx = m;
            }
        }
        if mx <= pivot_tol {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let d = a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col + 1..n {
                a[r][c] -= a[col][c] * f;
            }
            b[r] -= b[col] * f;
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in col + 1..n {
            acc -= a[col][c] * x[c];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

fn columns_of(a: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let nrows = a.len();
    let ncols = if nrows == 0 { 0 } else { a[0].len() };
    (0..ncols)
        .map(|c| (0..nrows).map(|r| a[r][c]).collect())
        .collect()
}

fn gram_and_correlations(
    cols: &[Vec<Complex64>],
    y: &[Complex64],
) -> (Vec<Vec<Complex64>>, Vec<Complex64>, f64) {
    let n = cols.len();
    let mut gram = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in i..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..cols[i].len() {
                acc += cols[i][r].conj() * cols[j][r];
            }
            gram[i][j] = acc;
            gram[j][i] = acc.conj();
        }
    }
    let bvec: Vec<Complex64> = cols
        .iter()
        .map(|col| col.iter().zip(y).map(|(a, v)| a.conj() * v).sum())
        .collect();
    let y2 = y.iter().map(|v| v.norm_sqr()).sum();
    (gram, bvec, y2)
}

/// Least-squares coefficients and residual energy of `y` on the given
/// columns, from the precomputed Gram matrix and correlations.
fn subset_least_squares(
    gram: &[Vec<Complex64>],
    bvec: &[Complex64],
    y2: f64,
    support: &[usize],
) -> Option<(Vec<Complex64>, f64)> {
    let s = support.len();
    let sub_g: Vec<Vec<Complex64>> = support
        .iter()
        .map(|&i| support.iter().map(|&j| gram[i][j]).collect())
        .collect();
    let sub_b: Vec<Complex64> = support.iter().map(|&i| bvec[i]).collect();
    let z = lu_solve_complex(sub_g, sub_b)?;
    let mut explained = 0.0;
    for i in 0..s {
        explained += (bvec[support[i]].conj() * z[i]).re;
    }
    Some((z, (y2 - explained).max(0.0)))
}

fn enumerate_combinations(n: usize, s: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if left == 0 {
            f(cur);
            return;
        }
        for i in start..=n.saturating_sub(left) {
            cur.push(i);
            rec(i + 1, n, left - 1, cur, f);
            cur.pop();
        }
    }
    if s <= n {
        rec(0, n, s, &mut Vec::with_capacity(s), f);
    }
}

/// Greedy orthogonal matching pursuit with least-squares refit per step.
///
/// Stops when the residual energy reaches `residual_tol_sq` or the support
/// hits `max_support`. A column whose addition makes the normal equations
/// singular is dropped and excluded from later picks.
pub fn solve_omp(
    a: &[Vec<Complex64>],
    y: &[Complex64],
    max_support: usize,
    residual_tol_sq: f64,
) -> SparseSolution {
    let cols = columns_of(a);
    let ncols = cols.len();
    let col_norm_sq: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|v| v.norm_sqr()).sum())
        .collect();
    let (gram, bvec, y2) = gram_and_correlations(&cols, y);

    let mut residual: Vec<Complex64> = y.to_vec();
    let mut selected: Vec<usize> = Vec::new();
    let mut banned = vec![false; ncols];
    let mut coeffs: Vec<Complex64> = Vec::new();
    let mut dropped = 0usize;
    let mut residual_sq = y2;

    loop {
        if residual_sq <= residual_tol_sq || selected.len() >= max_support {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for c in 0..ncols {
            if banned[c] || selected.contains(&c) || col_norm_sq[c] <= 0.0 {
                continue;
            }
            let corr: Complex64 = cols[c].iter().zip(&residual).map(|(a, r)| a.conj() * r).sum();
            let metric = corr.norm_sqr() / col_norm_sq[c];
            if best.map_or(true, |(_, m)| metric > m) {
                best = Some((c, metric));
            }
        }
        let Some((pick, metric)) = best else { break };
        if metric <= residual_sq * 1e-24 {
            break;
        }
        selected.push(pick);
        match subset_least_squares(&gram, &bvec, y2, &selected) {
            Some((z, rr)) => {
                coeffs = z;
                residual_sq = rr;
                for (r, res) in residual.iter_mut().enumerate() {
                    let mut acc = y[r];
                    for (i, &c) in selected.iter().enumerate() {
                        acc -= cols[c][r] * coeffs[i];
                    }
                    *res = acc;
                }
            }
            None => {
                selected.pop();
                banned[pick] = true;
                dropped += 1;
            }
        }
    }

    let mut map = BTreeMap::new();
    for (i, &c) in selected.iter().enumerate() {
        map.insert(c, coeffs[i]);
    }
    SparseSolution {
        coeffs: map,
        residual_sq,
        met_tolerance: residual_sq <= residual_tol_sq,
        dropped_columns: dropped,
    }
}

/// Exhaustive minimum-residual search over supports of size up to `s_max`.
///
/// Sizes are tried in ascending order; the result is the best support of the
/// smallest size whose least-squares residual passes `residual_tol_sq`. If no
/// size passes, the global minimum-residual support is returned (ties prefer
/// the smaller support, then the first in enumeration order). A tolerance of
/// zero therefore degenerates to the plain global minimum.
pub fn solve_exhaustive_l0(
    a: &[Vec<Complex64>],
    y: &[Complex64],
    s_max: usize,
    residual_tol_sq: f64,
) -> Result<SparseSolution> {
    if s_max > EXHAUSTIVE_SMAX_BOUND {
        return Err(Error::SearchBound { bound: EXHAUSTIVE_SMAX_BOUND, requested: s_max });
    }
    let cols = columns_of(a);
    let ncols = cols.len();
    let (gram, bvec, y2) = gram_and_correlations(&cols, y);

    let empty = |met: bool| SparseSolution {
        coeffs: BTreeMap::new(),
        residual_sq: y2,
        met_tolerance: met,
        dropped_columns: 0,
    };
    if y2 <= residual_tol_sq {
        return Ok(empty(true));
    }

    let tie_eps = 1e-12 * y2.max(f64::MIN_POSITIVE);
    let mut global_best: (f64, Vec<usize>) = (y2, Vec::new());
    for s in 1..=s_max.min(ncols) {
        let mut size_best: Option<(f64, Vec<usize>)> = None;
        enumerate_combinations(ncols, s, &mut |support| {
            let Some((_, rr)) = subset_least_squares(&gram, &bvec, y2, support) else {
                return;
            };
            if size_best.as_ref().map_or(true, |(b, _)| rr < *b) {
                size_best = Some((rr, support.to_vec()));
            }
            if rr < global_best.0 - tie_eps {
                global_best = (rr, support.to_vec());
            }
        });
        if let Some((rr, support)) = &size_best {
            if *rr <= residual_tol_sq {
                let (z, rr) = subset_least_squares(&gram, &bvec, y2, support)
                    .expect("support solved once already");
                let mut map = BTreeMap::new();
                for (i, &c) in support.iter().enumerate() {
                    map.insert(c, z[i]);
                }
                return Ok(SparseSolution {
                    coeffs: map,
                    residual_sq: rr,
                    met_tolerance: true,
                    dropped_columns: 0,
                });
            }
        }
    }

    let (rr, support) = global_best;
    if support.is_empty() {
        return Ok(empty(rr <= residual_tol_sq));
    }
    let (z, rr) = subset_least_squares(&gram, &bvec, y2, &support)
        .expect("support solved once already");
    let mut map = BTreeMap::new();
    for (i, &c) in support.iter().enumerate() {
        map.insert(c, z[i]);
    }
    Ok(SparseSolution {
        coeffs: map,
        residual_sq: rr,
        met_tolerance: rr <= residual_tol_sq,
        dropped_columns: 0,
    })
}

fn real_gram_and_correlations(a: &[Vec<f64>], y: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let nrows = a.len();
    let ncols = if nrows == 0 { 0 } else { a[0].len() };
    let mut gram = vec![vec![0.0; ncols]; ncols];
    for i in 0..ncols {
        for j in i..ncols {
            let mut acc = 0.0;
            for row in a {
                acc += row[i] * row[j];
            }
            gram[i][j] = acc;
            gram[j][i] = acc;
        }
    }
    let bvec: Vec<f64> = (0..ncols)
        .map(|c| a.iter().zip(y).map(|(row, v)| row[c] * v).sum())
        .collect();
    let y2 = y.iter().map(|v| v * v).sum();
    (gram, bvec, y2)
}

fn group_least_squares(
    gram: &[Vec<f64>],
    bvec: &[f64],
    y2: f64,
    groups: &[Vec<usize>],
    support: &[usize],
) -> Option<(Vec<f64>, f64)> {
    let cols: Vec<usize> = support.iter().flat_map(|&g| groups[g].iter().copied()).collect();
    let sub_g: Vec<Vec<f64>> = cols
        .iter()
        .map(|&i| cols.iter().map(|&j| gram[i][j]).collect())
        .collect();
    let sub_b: Vec<f64> = cols.iter().map(|&i| bvec[i]).collect();
    let z = lu_solve_real(sub_g, sub_b)?;
    let explained: f64 = cols.iter().zip(&z).map(|(&i, zi)| bvec[i] * zi).sum();
    Some((z, (y2 - explained).max(0.0)))
}

/// Exhaustive group-sparse search over a real-expanded system; groups play
/// the role of columns and share the size bound of [`solve_exhaustive_l0`].
pub fn solve_exhaustive_groups(
    a: &[Vec<f64>],
    y: &[f64],
    groups: &[Vec<usize>],
    s_max: usize,
    residual_tol_sq: f64,
) -> Result<GroupSolution> {
    if s_max > EXHAUSTIVE_SMAX_BOUND {
        return Err(Error::SearchBound { bound: EXHAUSTIVE_SMAX_BOUND, requested: s_max });
    }
    let (gram, bvec, y2) = real_gram_and_correlations(a, y);
    let empty = |met: bool| GroupSolution {
        coeffs: BTreeMap::new(),
        residual_sq: y2,
        met_tolerance: met,
        dropped_columns: 0,
    };
    if y2 <= residual_tol_sq {
        return Ok(empty(true));
    }
    let tie_eps = 1e-12 * y2.max(f64::MIN_POSITIVE);
    let mut global_best: (f64, Vec<usize>) = (y2, Vec::new());
    for s in 1..=s_max.min(groups.len()) {
        let mut size_best: Option<(f64, Vec<usize>)> = None;
        enumerate_combinations(groups.len(), s, &mut |support| {
            let Some((_, rr)) = group_least_squares(&gram, &bvec, y2, groups, support) else {
                return;
            };
            if size_best.as_ref().map_or(true, |(b, _)| rr < *b) {
                size_best = Some((rr, support.to_vec()));
            }
            if rr < global_best.0 - tie_eps {
                global_best = (rr, support.to_vec());
            }
        });
        if let Some((rr, support)) = &size_best {
            if *rr <= residual_tol_sq {
                return Ok(finish_group_solution(&gram, &bvec, y2, groups, support, residual_tol_sq));
            }
        }
    }
    let (_, support) = global_best;
    if support.is_empty() {
        return Ok(empty(false));
    }
    Ok(finish_group_solution(&gram, &bvec, y2, groups, &support, residual_tol_sq))
}

fn finish_group_solution(
    gram: &[Vec<f64>],
    bvec: &[f64],
    y2: f64,
    groups: &[Vec<usize>],
    support: &[usize],
    residual_tol_sq: f64,
) -> GroupSolution {
    let (z, rr) = group_least_squares(gram, bvec, y2, groups, support)
        .expect("support solved once already");
    let mut map = BTreeMap::new();
    let mut at = 0;
    for &g in support {
        let width = groups[g].len();
        map.insert(g, z[at..at + width].to_vec());
        at += width;
    }
    GroupSolution {
        coeffs: map,
        residual_sq: rr,
        met_tolerance: rr <= residual_tol_sq,
        dropped_columns: 0,
    }
}

/// Greedy group-sparse pursuit: each step selects the group with the largest
/// exact energy reduction on the current residual, then refits over the
/// selected groups.
pub fn solve_omp_groups(
    a: &[Vec<f64>],
    y: &[f64],
    groups: &[Vec<usize>],
    max_support: usize,
    residual_tol_sq: f64,
) -> GroupSolution {
    let (gram, bvec, y2) = real_gram_and_correlations(a, y);
    let mut selected: Vec<usize> = Vec::new();
    let mut banned = vec![false; groups.len()];
    let mut dropped = 0usize;
    let mut residual_sq = y2;
    let mut best_fit: Option<Vec<f64>> = None;

    // Correlations of the residual against every column, updated by refit.
    let mut res_b = bvec.clone();

    loop {
        if residual_sq <= residual_tol_sq || selected.len() >= max_support {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for (g, cols) in groups.iter().enumerate() {
            if banned[g] || selected.contains(&g) {
                continue;
            }
            let sub_g: Vec<Vec<f64>> = cols
                .iter()
                .map(|&i| cols.iter().map(|&j| gram[i][j]).collect())
                .collect();
            let sub_b: Vec<f64> = cols.iter().map(|&i| res_b[i]).collect();
            let Some(z) = lu_solve_real(sub_g, sub_b.clone()) else { continue };
            let gain: f64 = sub_b.iter().zip(&z).map(|(b, zi)| b * zi).sum();
            if best.map_or(true, |(_, m)| gain > m) {
                best = Some((g, gain));
            }
        }
        let Some((pick, gain)) = best else { break };
        if gain <= residual_sq * 1e-24 {
            break;
        }
        selected.push(pick);
        match group_least_squares(&gram, &bvec, y2, groups, &selected) {
            Some((z, rr)) => {
                residual_sq = rr;
                // res_b = bvec - Gram * (expanded z) over the selected columns.
                let cols: Vec<usize> =
                    selected.iter().flat_map(|&g| groups[g].iter().copied()).collect();
                for c in 0..res_b.len() {
                    let mut acc = bvec[c];
                    for (i, &ci) in cols.iter().enumerate() {
                        acc -= gram[c][ci] * z[i];
                    }
                    res_b[c] = acc;
                }
                best_fit = Some(z);
            }
            None => {
                selected.pop();
                banned[pick] = true;
                dropped += 1;
            }
        }
    }

    let mut map = BTreeMap::new();
    if let Some(z) = best_fit {
        let mut at = 0;
        for &g in &selected {
            let width = groups[g].len();
            map.insert(g, z[at..at + width].to_vec());
            at += width;
        }
    }
    GroupSolution {
        coeffs: map,
        residual_sq,
        met_tolerance: residual_sq <= residual_tol_sq,
        dropped_columns: dropped,
    }
}

/// Lower quantile of the Gamma(shape, 1) distribution, by bisection on the
/// regularized lower incomplete gamma function (integer shape form
/// `P(k, x) = 1 - e^{-x} * sum_{j<k} x^j / j!`).
pub fn gamma_lower_quantile(shape: usize, p: f64) -> f64 {
    assert!(shape >= 1 && p > 0.0 && p < 1.0);
    let cdf = |x: f64| {
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..shape {
            term *= x / j as f64;
            sum += term;
        }
        1.0 - (-x).exp() * sum
    };
    let mut lo = 0.0;
    let mut hi = shape as f64 * 10.0 + 50.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Linearly interpolated percentile of a sample, `q` in [0, 1].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite energies"));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Per-row noise power estimated from per-coset measurement energies.
///
/// The lower quartile of the energies is noise-only in any usefully sparse
/// scenario; for iid complex rows that quartile sits at the Gamma(rows) 25%
/// quantile times the per-row power.
pub fn noise_sigma_sq_from_energies(energies: &[f64], rows: usize) -> f64 {
    let p25 = percentile(energies, 0.25);
    p25 / gamma_lower_quantile(rows, 0.25)
}
