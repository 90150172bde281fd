//! Bloch band sweeps, critical-point location, simplicity checks, and
//! finite-difference band curvature.
//!
//! Real coefficients make the symmetry points `theta = 0` and `theta = 1/2`
//! stationary for every band, so those are the default critical-point
//! candidates; an interior golden-section refinement is available when a
//! sweep shows an interior extremum.

use num_complex::Complex64;

use crate::cell::{assemble_cell_operator, fix_gauge, solve_cell_eigen, CellEigenpair};
#[cfg(test)]
use crate::linalg::dot;
use crate::error::{Error, Result};
use crate::map_indexed;
use crate::periodic::PeriodicFunction;

#[derive(Debug, Clone)]
pub struct BandStructure {
    pub theta_grid: Vec<f64>,
    /// `bands[n-1][j] = lambda_n(theta_j)`.
    pub bands: Vec<Vec<f64>>,
    /// Eigenvector coefficients per grid point and band, gauge aligned along
    /// the sweep; `eigvecs[j][n-1]`. Stored on request.
    pub eigvecs: Option<Vec<Vec<Vec<Complex64>>>>,
    pub k_max: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CriticalPoint {
    pub n: usize,
    pub theta: f64,
    pub lambda: f64,
    /// Distance to the nearest adjacent band at `theta`.
    pub gap: f64,
    /// Centered-difference second derivative with Richardson refinement.
    pub lambda_pp_fd: f64,
    pub lambda_pp_error_estimate: f64,
    /// Centered-difference first derivative, a stationarity diagnostic.
    pub derivative: f64,
    pub simple: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct CriticalSearch {
    pub gap_tol: f64,
    /// Stationarity tolerance scale: `|lambda'| <= scale * (1 + |lambda|)`.
    pub derivative_tol_scale: f64,
    pub fd_step: f64,
}

impl Default for CriticalSearch {
    fn default() -> Self {
        // fd_step balances stencil truncation against eigenvalue roundoff
        // amplified by 1/h^2; 1e-2 with Richardson refinement keeps both
        // below 1e-6 relative for the truncations used here.
        Self { gap_tol: 1e-6, derivative_tol_scale: 1e-7, fd_step: 1e-2 }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SimplicityReport {
    pub n: usize,
    pub theta: f64,
    pub lambda: f64,
    pub gap: f64,
    pub simple: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SecondDerivative {
    /// Richardson-extrapolated value.
    pub value: f64,
    pub coarse: f64,
    pub fine: f64,
    pub error_estimate: f64,
    pub h: f64,
}

/// Symmetric dual-cell grid with `n_points` nodes covering `[-1/2, 1/2]`.
pub fn symmetric_grid(n_points: usize) -> Vec<f64> {
    assert!(n_points >= 2);
    (0..n_points).map(|j| -0.5 + j as f64 / (n_points - 1) as f64).collect()
}

pub fn compute_band_structure(
    sigma: &PeriodicFunction,
    c: &PeriodicFunction,
    theta_grid: &[f64],
    n_bands: usize,
    k_max: usize,
    store_vectors: bool,
) -> Result<BandStructure> {
    let solved: Vec<Result<Vec<CellEigenpair>>> = map_indexed(theta_grid, |_, &theta| {
        let op = assemble_cell_operator(sigma, c, theta, k_max)?;
        solve_cell_eigen(&op, n_bands)
    });

    let mut bands = vec![vec![0.0; theta_grid.len()]; n_bands];
    let mut eigvecs: Vec<Vec<Vec<Complex64>>> = Vec::new();
    for (j, res) in solved.into_iter().enumerate() {
        let pairs = res?;
        for (n_idx, pair) in pairs.iter().enumerate() {
            bands[n_idx][j] = pair.lambda;
        }
        if store_vectors {
            eigvecs.push(pairs.into_iter().map(|p| p.psi).collect());
        }
    }

    if store_vectors {
        // Align gauges along the sweep so consecutive overlaps have
        // nonnegative real part.
        for j in 1..eigvecs.len() {
            for n_idx in 0..n_bands {
                let prev = eigvecs[j - 1][n_idx].clone();
                eigvecs[j][n_idx] = fix_gauge(&eigvecs[j][n_idx], Some(&prev))?;
            }
        }
    }

    Ok(BandStructure {
        theta_grid: theta_grid.to_vec(),
        bands,
        eigvecs: store_vectors.then_some(eigvecs),
        k_max,
    })
}

fn solve_band_values(
    sigma: &PeriodicFunction,
    c: &PeriodicFunction,
    theta: f64,
    k_max: usize,
    n_bands: usize,
) -> Result<Vec<f64>> {
    let op = assemble_cell_operator(sigma, c, theta, k_max)?;
    Ok(solve_cell_eigen(&op, n_bands)?.into_iter().map(|p| p.lambda).collect())
}

fn lambda_n(
    sigma: &PeriodicFunction,
    c: &PeriodicFunction,
    theta: f64,
    k_max: usize,
    n: usize,
) -> Result<f64> {
    Ok(solve_band_values(sigma, c, theta, k_max, n)?[n - 1])
}

/// Refine a critical point of band `n` near `theta_init`.
///
/// Candidates within one grid step of a symmetry point snap to it (those are
/// exactly stationary for real coefficients). Otherwise an interior extremum
/// is bracketed on the sweep grid and refined by golden-section search with
/// fresh eigensolves at the probe points; when no interior bracket exists the
/// nearest symmetry point inside the grid hull is reported instead.
pub fn locate_critical_point(
    sigma: &PeriodicFunction,
    c: &PeriodicFunction,
    band: &BandStructure,
    n: usize,
    theta_init: f64,
    search: &CriticalSearch,
) -> Result<CriticalPoint> {
    if n == 0 || n > band.bands.len() {
        return Err(Error::BandOutOfRange { n, available: band.bands.len() });
    }
    let grid = &band.theta_grid;
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if theta_init < lo - 1e-12 || theta_init > hi + 1e-12 {
        return Err(Error::NoBracket { n, theta_init });
    }
    let step = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);

    let symmetry_points = [0.0, 0.5, -0.5];
    let snap = symmetry_points
        .iter()
        .copied()
        .filter(|s| *s >= lo - 1e-12 && *s <= hi + 1e-12)
        .find(|s| (theta_init - s).abs() <= step + 1e-12);

    let theta_star = if let Some(s) = snap {
        s
    } else {
        let values = &band.bands[n - 1];
        let j0 = grid
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (*a - theta_init).abs().partial_cmp(&(*b - theta_init).abs()).unwrap()
            })
            .map(|(j, _)| j)
            .unwrap();
        match find_bracket(values, j0) {
            Some((ja, _, jc, minimum)) => golden_section(
                |theta| lambda_n(sigma, c, theta, band.k_max, n),
                grid[ja],
                grid[jc],
                minimum,
                1e-10,
            )?,
            None => symmetry_points
                .iter()
                .copied()
                .filter(|s| *s >= lo - 1e-12 && *s <= hi + 1e-12)
                .min_by(|a, b| {
                    (a - theta_init).abs().partial_cmp(&(b - theta_init).abs()).unwrap()
                })
                .ok_or(Error::NoBracket { n, theta_init })?,
        }
    };

    critical_point_at(sigma, c, theta_star, n, band.k_max, search)
}

/// Assemble the critical-point record at a fixed `theta`.
pub fn critical_point_at(
    sigma: &PeriodicFunction,
    c: &PeriodicFunction,
    theta: f64,
    n: usize,
    k_max: usize,
    search: &CriticalSearch,
) -> Result<CriticalPoint> {
    let report = check_simplicity(sigma, c, theta, n, k_max, search.gap_tol)?;
    let fd = second_derivative_fd(sigma, c, n, theta, search.fd_step, k_max, search.gap_tol)?;
    let h = search.fd_step;
    let lp = lambda_n(sigma, c, theta + h, k_max, n)?;
    let lm = lambda_n(sigma, c, theta - h, k_max, n)?;
    let derivative = (lp - lm) / (2.0 * h);
    Ok(CriticalPoint {
        n,
        theta,
        lambda: report.lambda,
        gap: report.gap,
        lambda_pp_fd: fd.value,
        lambda_pp_error_estimate: fd.error_estimate,
        derivative,
        simple: report.simple,
    })
}

fn find_bracket(values: &[f64], j0: usize) -> Option<(usize, usize, usize, bool)> {
    let n = values.len();
    let is_min = |j: usize| values[j] < values[j - 1] && values[j] < values[j + 1];
    let is_max = |j: usize| values[j] > values[j - 1] && values[j] > values[j + 1];
    for radius in 0..n {
        for j in [j0.saturating_sub(radius), (j0 + radius).min(n - 1)] {
            if j >= 1 && j + 1 < n {
                if is_min(j) {
                    return Some((j - 1, j, j + 1, true));
                }
                if is_max(j) {
                    return Some((j - 1, j, j + 1, false));
                }
            }
        }
    }
    None
}

fn golden_section<F>(f: F, a: f64, c: f64, minimum: bool, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let sign = if minimum { 1.0 } else { -1.0 };
    let g = |x: f64| -> Result<f64> { Ok(sign * f(x)?) };
    const RATIO: f64 = 0.381_966_011_250_105_2; // 2 - golden ratio
    let (mut lo, mut hi) = (a, c);
    let mut x1 = lo + RATIO * (hi - lo);
    let mut x2 = hi - RATIO * (hi - lo);
    let mut f1 = g(x1)?;
    let mut f2 = g(x2)?;
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + RATIO * (hi - lo);
            f1 = g(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = hi - RATIO * (hi - lo);
            f2 = g(x2)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Gap of band `n` to its neighbors at `theta`, and the simplicity verdict.
pub fn check_simplicity(
    sigma: &PeriodicFunction,
    c: &PeriodicFunction,
    theta: f64,
    n: usize,
    k_max: usize,
    gap_tol: f64,
) -> Result<SimplicityReport> {
    let dim = 2 * k_max + 1;
    if n == 0 || n > dim {
        return Err(Error::BandOutOfRange { n, available: dim });
    }
    let upto = (n + 1).min(dim);
    let values = solve_band_values(sigma, c, theta, k_max, upto)?;
    let lambda = values[n - 1];
    let mut gap = f64::INFINITY;
    if n >= 2 {
        gap = gap.min(lambda - values[n - 2]);
    }
    if n < upto {
        gap = gap.min(values[n] - lambda);
    }
    Ok(SimplicityReport { n, theta, lambda, gap, simple: gap > gap_tol })
}

/// Centered second difference of `lambda_n` with one step halving and a
/// Richardson error estimate. Probe points must stay clear of band
/// crossings, otherwise the stencil mixes branches.
pub fn second_derivative_fd(
    sigma: &PeriodicFunction,
    c: &PeriodicFunction,
    n: usize,
    theta: f64,
    h: f64,
    k_max: usize,
    gap_tol: f64,
) -> Result<SecondDerivative> {
    assert!(h > 0.0, "finite-difference step must be positive");
    for probe in [theta, theta - h, theta + h, theta - 0.5 * h, theta + 0.5 * h] {
        let report = check_simplicity(sigma, c, probe, n, k_max, gap_tol)?;
        if !report.simple {
            return Err(Error::BandCrossing { theta: probe, gap: report.gap });
        }
    }
    let l0 = lambda_n(sigma, c, theta, k_max, n)?;
    let stencil = |hh: f64| -> Result<f64> {
        let lp = lambda_n(sigma, c, theta + hh, k_max, n)?;
        let lm = lambda_n(sigma, c, theta - hh, k_max, n)?;
        Ok((lp - 2.0 * l0 + lm) / (hh * hh))
    };
    let coarse = stencil(h)?;
    let fine = stencil(0.5 * h)?;
    let value = (4.0 * fine - coarse) / 3.0;
    let error_estimate = (fine - coarse).abs() / 3.0;
    Ok(SecondDerivative { value, coarse, fine, error_estimate, h })
}
