//! Homogenized coefficients and the effective model record.
//!
//! The effective equation replaces the oscillating coefficients by
//! cell averages weighted with the Bloch density `|psi_n|^2`:
//! `d*(x) = ∫ d(x,y) |psi_n(y)|^2 dy`, `g* = ∫ g(y) |psi_n(y)|^2 dy`,
//! while the dispersion constant `sigma*` comes out of the corrector
//! pipeline as one eighth of the band curvature over `pi^2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bands::{check_simplicity, critical_point_at, CriticalSearch};
use crate::cell::{assemble_cell_operator, solve_cell_eigen, CellEigenpair};
use crate::correctors::{solve_correctors, CorrectorReport, CorrectorSet};
use crate::error::{Error, Result};
use crate::periodic::{dft_inverse, PeriodicFunction};
use crate::profile::MacroProfile;

const PI2_8: f64 = 8.0 * std::f64::consts::PI * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Off,
    Additive,
    Multiplicative,
}

/// Two-scale macroscopic potential `d(x, y)`.
#[derive(Debug, Clone)]
pub enum MacroPotential {
    Zero,
    /// `d(x, y) = a(x) b(y)`.
    Separable { a: MacroProfile, b: PeriodicFunction },
    /// Samples `values[i][m] = d(x_i, y_m)` on a sorted `x_grid` and a
    /// uniform torus grid; bilinear in `x`, uniform-rule quadrature in `y`.
    Grid { x_grid: Vec<f64>, values: Vec<Vec<f64>> },
}

impl MacroPotential {
    pub fn eval(&self, x: f64, y: f64, domain_len: f64) -> f64 {
        match self {
            MacroPotential::Zero => 0.0,
            MacroPotential::Separable { a, b } => a.eval(x, domain_len) * b.eval(y.rem_euclid(1.0)).re,
            MacroPotential::Grid { x_grid, values } => {
                let row = |i: usize| -> f64 {
                    let ys = &values[i];
                    let m = ys.len() as f64;
                    let pos = y.rem_euclid(1.0) * m;
                    let j = pos.floor() as usize % ys.len();
                    let frac = pos - pos.floor();
                    ys[j] * (1.0 - frac) + ys[(j + 1) % ys.len()] * frac
                };
                match x_grid.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
                    Ok(i) => row(i),
                    Err(0) => row(0),
                    Err(i) if i >= x_grid.len() => row(x_grid.len() - 1),
                    Err(i) => {
                        let t = (x - x_grid[i - 1]) / (x_grid[i] - x_grid[i - 1]);
                        row(i - 1) * (1.0 - t) + row(i) * t
                    }
                }
            }
        }
    }

    /// Supremum of `|d|` over a sampling of the domain, the bound the
    /// effective potential must respect.
    pub fn bound(&self, domain_len: f64) -> f64 {
        match self {
            MacroPotential::Zero => 0.0,
            MacroPotential::Separable { a, b } => {
                let amax = (0..=256)
                    .map(|i| a.eval(domain_len * i as f64 / 256.0, domain_len).abs())
                    .fold(0.0f64, f64::max);
                amax * b.max_abs_sample()
            }
            MacroPotential::Grid { values, .. } => values
                .iter()
                .flat_map(|row| row.iter())
                .map(|v| v.abs())
                .fold(0.0, f64::max),
        }
    }
}

/// `|psi|^2` on a torus grid fine enough to integrate products with `f`.
fn density_on_grid(psi: &[Complex64], extra_k: usize) -> Result<(Vec<f64>, usize)> {
    let k_max = psi.len() / 2;
    let m = 2 * (2 * k_max + extra_k) + 3;
    let grid = dft_inverse(psi, m)?;
    Ok((grid.iter().map(|z| z.norm_sqr()).collect(), m))
}

/// `d*(x_j) = ∫ d(x_j, y) |psi(y)|^2 dy` on the given solver grid.
pub fn effective_d(
    d: &MacroPotential,
    psi: &[Complex64],
    x_grid: &[f64],
    domain_len: f64,
) -> Result<Vec<f64>> {
    match d {
        MacroPotential::Zero => Ok(vec![0.0; x_grid.len()]),
        MacroPotential::Separable { a, b } => {
            let factor = weighted_density_average(b, psi)?;
            Ok(x_grid.iter().map(|&x| a.eval(x, domain_len) * factor).collect())
        }
        MacroPotential::Grid { x_grid: d_grid, values } => {
            // Quadrature on the potential's own y samples; the density is
            // band limited, so the uniform rule is exact once the tabulated
            // grid resolves 2K wavenumbers. Coarser tables alias, which is
            // the documented projection behavior for tabulated data.
            let my = values.first().map(|r| r.len()).unwrap_or(0);
            if my == 0 || values.len() != d_grid.len() {
                return Err(Error::LengthMismatch {
                    what: "tabulated potential grid",
                    left: values.len(),
                    right: d_grid.len(),
                });
            }
            let density: Vec<f64> = (0..my)
                .map(|m| crate::periodic::eval_coeffs(psi, m as f64 / my as f64).norm_sqr())
                .collect();
            let averaged_rows: Vec<f64> = values
                .iter()
                .map(|row| {
                    row.iter().zip(&density).map(|(v, w)| v * w).sum::<f64>() / my as f64
                })
                .collect();
            Ok(x_grid
                .iter()
                .map(|&x| match d_grid.binary_search_by(|p| p.partial_cmp(&x).unwrap()) {
                    Ok(i) => averaged_rows[i],
                    Err(0) => averaged_rows[0],
                    Err(i) if i >= d_grid.len() => averaged_rows[d_grid.len() - 1],
                    Err(i) => {
                        let t = (x - d_grid[i - 1]) / (d_grid[i] - d_grid[i - 1]);
                        averaged_rows[i - 1] * (1.0 - t) + averaged_rows[i] * t
                    }
                })
                .collect())
        }
    }
}

/// `∫ f(y) |psi(y)|^2 dy` for a real periodic weight.
pub fn weighted_density_average(f: &PeriodicFunction, psi: &[Complex64]) -> Result<f64> {
    let (density, m) = density_on_grid(psi, f.k_max())?;
    let fg = f.eval_on_grid(m)?;
    let mut acc = Complex64::ZERO;
    for j in 0..m {
        acc += fg[j] * density[j];
    }
    Ok(acc.re / m as f64)
}

/// Effective noise amplitude `g* = ∫ g(y) |psi(y)|^2 dy`. The amplitude
/// must be real-valued.
pub fn effective_g(g: &PeriodicFunction, psi: &[Complex64]) -> Result<f64> {
    if !g.is_real() {
        return Err(Error::NotRealValued { what: "noise amplitude g", imag_max: f64::NAN });
    }
    weighted_density_average(g, psi)
}

/// Everything the homogenized solve needs, plus the cross-checked curvature
/// data for reporting.
#[derive(Debug, Clone)]
pub struct EffectiveModel {
    pub band: usize,
    pub theta_n: f64,
    pub lambda_n: f64,
    pub sigma_star: f64,
    pub lambda_pp_compat: f64,
    pub lambda_pp_fd: f64,
    pub g_star: f64,
    pub noise_kind: NoiseKind,
    pub psi: CellEigenpair,
    pub correctors: CorrectorSet,
    d_star: DStar,
    domain_len: f64,
}

#[derive(Debug, Clone)]
enum DStar {
    Zero,
    /// Separable potentials average to `a(x)` times a constant.
    Scaled { factor: f64, a: MacroProfile },
    /// General potentials are averaged per solver node on demand.
    General { potential: MacroPotential, psi: Vec<Complex64> },
}

impl EffectiveModel {
    /// The effective potential sampled on a solver grid.
    pub fn d_star_on(&self, x_grid: &[f64]) -> Result<Vec<f64>> {
        match &self.d_star {
            DStar::Zero => Ok(vec![0.0; x_grid.len()]),
            DStar::Scaled { factor, a } => {
                Ok(x_grid.iter().map(|&x| a.eval(x, self.domain_len) * factor).collect())
            }
            DStar::General { potential, psi } => {
                effective_d(potential, psi, x_grid, self.domain_len)
            }
        }
    }

    pub fn domain_len(&self) -> f64 {
        self.domain_len
    }

    pub fn corrector_report(&self) -> CorrectorReport {
        CorrectorReport {
            theta_n: self.theta_n,
            lambda_n: self.lambda_n,
            lambda_pp_compat: self.lambda_pp_compat,
            lambda_pp_fd: self.lambda_pp_fd,
            sigma_star_formula: self.sigma_star,
            sigma_star_ratio: self.sigma_star / (self.lambda_pp_compat / PI2_8),
            compat_residuals: [
                self.correctors.compat_residual_zeta,
                self.correctors.compat_residual_chi,
            ],
        }
    }

    /// JSON-facing export with the effective potential materialized.
    pub fn export(&self, x_grid: &[f64]) -> Result<EffectiveModelExport> {
        Ok(EffectiveModelExport {
            band: self.band,
            theta_n: self.theta_n,
            lambda_n: self.lambda_n,
            sigma_star: self.sigma_star,
            sigma_star_positive: self.sigma_star > 0.0,
            lambda_pp_compat: self.lambda_pp_compat,
            lambda_pp_fd: self.lambda_pp_fd,
            g_star: self.g_star,
            noise_kind: self.noise_kind,
            x_grid: x_grid.to_vec(),
            d_star: self.d_star_on(x_grid)?,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectiveModelExport {
    pub band: usize,
    pub theta_n: f64,
    pub lambda_n: f64,
    pub sigma_star: f64,
    pub sigma_star_positive: bool,
    pub lambda_pp_compat: f64,
    pub lambda_pp_fd: f64,
    pub g_star: f64,
    pub noise_kind: NoiseKind,
    pub x_grid: Vec<f64>,
    pub d_star: Vec<f64>,
}

pub struct EffectiveModelInputs<'a> {
    pub sigma: &'a PeriodicFunction,
    pub c: &'a PeriodicFunction,
    pub d: &'a MacroPotential,
    pub g: Option<&'a PeriodicFunction>,
    pub noise_kind: NoiseKind,
    pub band: usize,
    pub theta_n: f64,
    pub k_max: usize,
    pub domain_len: f64,
    pub search: CriticalSearch,
}

/// Assemble the full effective model at a located critical point. The
/// simplicity and stationarity requirements are enforced here; the
/// curvature cross-check between the solvability route and the averaged
/// formula is enforced inside the corrector solve.
pub fn build_effective_model(inputs: &EffectiveModelInputs) -> Result<EffectiveModel> {
    let EffectiveModelInputs {
        sigma, c, d, g, noise_kind, band, theta_n, k_max, domain_len, search,
    } = inputs;
    let simplicity = check_simplicity(sigma, c, *theta_n, *band, *k_max, search.gap_tol)?;
    if !simplicity.simple {
        return Err(Error::NotSimple {
            n: *band,
            theta: *theta_n,
            gap: simplicity.gap,
            tol: search.gap_tol,
        });
    }
    let cp = critical_point_at(sigma, c, *theta_n, *band, *k_max, search)?;
    let derivative_tol = search.derivative_tol_scale * (1.0 + cp.lambda.abs());
    if cp.derivative.abs() > derivative_tol {
        return Err(Error::BandCrossing { theta: *theta_n, gap: cp.derivative.abs() });
    }

    let op = assemble_cell_operator(sigma, c, *theta_n, *k_max)?;
    let pair = solve_cell_eigen(&op, *band)?.remove(*band - 1);
    let correctors = solve_correctors(sigma, c, &pair, *k_max)?;
    let sigma_star = correctors.sigma_star_formula;

    let g_star = match (g, noise_kind) {
        (Some(gf), NoiseKind::Additive | NoiseKind::Multiplicative) => {
            effective_g(gf, &pair.psi)?
        }
        _ => 0.0,
    };
    if let Some(gf) = g {
        debug_assert!(g_star.abs() <= gf.max_abs_sample() + 1e-12);
    }

    let d_star = match d {
        MacroPotential::Zero => DStar::Zero,
        MacroPotential::Separable { a, b } => {
            DStar::Scaled { factor: weighted_density_average(b, &pair.psi)?, a: a.clone() }
        }
        other => DStar::General { potential: (*other).clone(), psi: pair.psi.clone() },
    };

    Ok(EffectiveModel {
        band: *band,
        theta_n: *theta_n,
        lambda_n: pair.lambda,
        sigma_star,
        lambda_pp_compat: correctors.lambda_pp_compat,
        lambda_pp_fd: cp.lambda_pp_fd,
        g_star,
        noise_kind: *noise_kind,
        psi: pair,
        correctors,
        d_star,
        domain_len: *domain_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(v: f64) -> PeriodicFunction {
        PeriodicFunction::constant(v, 64)
    }

    fn mathieu_c() -> PeriodicFunction {
        PeriodicFunction::cosine(0.0, 2.0, 1, 64).unwrap()
    }

    fn ground_pair(c: &PeriodicFunction, k_max: usize) -> CellEigenpair {
        let op = assemble_cell_operator(&constant(1.0), c, 0.0, k_max).unwrap();
        solve_cell_eigen(&op, 1).unwrap().remove(0)
    }

    fn unit_psi(k_max: usize) -> Vec<Complex64> {
        let mut psi = vec![Complex64::ZERO; 2 * k_max + 1];
        psi[k_max] = Complex64::ONE;
        psi
    }

    #[test]
    fn y_independent_potential_passes_through() {
        let d = MacroPotential::Separable {
            a: MacroProfile::Linear { slope: 2.0, intercept: -0.5 },
            b: constant(1.0),
        };
        let psi = ground_pair(&mathieu_c(), 12).psi;
        let grid: Vec<f64> = (1..8).map(|i| i as f64 / 8.0).collect();
        let ds = effective_d(&d, &psi, &grid, 1.0).unwrap();
        for (x, v) in grid.iter().zip(&ds) {
            assert!((v - (2.0 * x - 0.5)).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_mean_oscillation_averages_out_for_flat_state() {
        let d = MacroPotential::Separable {
            a: MacroProfile::Constant { value: 1.0 },
            b: PeriodicFunction::cosine(0.0, 1.0, 1, 64).unwrap(),
        };
        let psi = unit_psi(6);
        let ds = effective_d(&d, &psi, &[0.25, 0.5], 1.0).unwrap();
        assert!(ds.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn separable_matches_fine_quadrature_oracle() {
        // d(x, y) = x cos(2 pi y) against the Bloch ground state: slope is
        // the direct fine-grid quadrature of cos |psi|^2.
        let b = PeriodicFunction::cosine(0.0, 1.0, 1, 64).unwrap();
        let d = MacroPotential::Separable { a: MacroProfile::Linear { slope: 1.0, intercept: 0.0 }, b: b.clone() };
        let psi = ground_pair(&mathieu_c(), 16).psi;
        let grid = [0.2, 0.8];
        let ds = effective_d(&d, &psi, &grid, 1.0).unwrap();

        let m = 4096;
        let psig = dft_inverse(&psi, m).unwrap();
        let mut oracle = 0.0;
        for j in 0..m {
            let y = j as f64 / m as f64;
            oracle += (std::f64::consts::TAU * y).cos() * psig[j].norm_sqr();
        }
        oracle /= m as f64;
        for (x, v) in grid.iter().zip(&ds) {
            assert!((v - x * oracle).abs() < 1e-10, "{v} vs {}", x * oracle);
        }
        // Averaging property: between the extremes of d(x, .).
        for (x, v) in grid.iter().zip(&ds) {
            assert!(*v >= -x.abs() - 1e-12 && *v <= x.abs() + 1e-12);
        }
    }

    #[test]
    fn effective_g_examples() {
        let psi_flat = unit_psi(4);
        assert!((effective_g(&constant(0.7), &psi_flat).unwrap() - 0.7).abs() < 1e-12);
        let cosf = PeriodicFunction::cosine(0.0, 1.0, 1, 64).unwrap();
        assert!(effective_g(&cosf, &psi_flat).unwrap().abs() < 1e-12);

        let psi = ground_pair(&mathieu_c(), 16).psi;
        let got = effective_g(&cosf, &psi).unwrap();
        let m = 4096;
        let psig = dft_inverse(&psi, m).unwrap();
        let mut oracle = 0.0;
        for j in 0..m {
            oracle += (std::f64::consts::TAU * j as f64 / m as f64).cos() * psig[j].norm_sqr();
        }
        oracle /= m as f64;
        assert!((got - oracle).abs() < 1e-10);
    }

    #[test]
    fn complex_g_rejected() {
        let g = PeriodicFunction::from_coeff_list(&[(1, Complex64::ONE)], 16).unwrap();
        assert!(matches!(
            effective_g(&g, &unit_psi(4)),
            Err(Error::NotRealValued { .. })
        ));
    }

    #[test]
    fn free_case_model() {
        let inputs = EffectiveModelInputs {
            sigma: &constant(1.0),
            c: &constant(0.0),
            d: &MacroPotential::Zero,
            g: Some(&constant(1.0)),
            noise_kind: NoiseKind::Additive,
            band: 1,
            theta_n: 0.0,
            k_max: 8,
            domain_len: 1.0,
            search: CriticalSearch::default(),
        };
        let model = build_effective_model(&inputs).unwrap();
        assert!((model.sigma_star - 1.0).abs() < 1e-10);
        assert!(model.lambda_n.abs() < 1e-10);
        assert!((model.g_star - 1.0).abs() < 1e-12);
        let ds = model.d_star_on(&[0.3, 0.6]).unwrap();
        assert!(ds.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn constant_shift_changes_only_lambda() {
        let c0 = 5.0;
        let base = build_effective_model(&EffectiveModelInputs {
            sigma: &constant(1.0),
            c: &constant(0.0),
            d: &MacroPotential::Zero,
            g: None,
            noise_kind: NoiseKind::Off,
            band: 1,
            theta_n: 0.0,
            k_max: 8,
            domain_len: 1.0,
            search: CriticalSearch::default(),
        })
        .unwrap();
        let shifted = build_effective_model(&EffectiveModelInputs {
            sigma: &constant(1.0),
            c: &constant(c0),
            d: &MacroPotential::Zero,
            g: None,
            noise_kind: NoiseKind::Off,
            band: 1,
            theta_n: 0.0,
            k_max: 8,
            domain_len: 1.0,
            search: CriticalSearch::default(),
        })
        .unwrap();
        assert!((shifted.lambda_n - base.lambda_n - c0).abs() < 1e-10);
        assert!((shifted.sigma_star - base.sigma_star).abs() < 1e-10);
        assert!((shifted.g_star - base.g_star).abs() < 1e-12);
    }

    #[test]
    fn degenerate_band_rejected() {
        // Band 2 of the free operator at theta = 0 is a double eigenvalue.
        let err = build_effective_model(&EffectiveModelInputs {
            sigma: &constant(1.0),
            c: &constant(0.0),
            d: &MacroPotential::Zero,
            g: None,
            noise_kind: NoiseKind::Off,
            band: 2,
            theta_n: 0.0,
            k_max: 8,
            domain_len: 1.0,
            search: CriticalSearch::default(),
        });
        assert!(matches!(err, Err(Error::NotSimple { n: 2, .. })));
    }

    #[test]
    fn mathieu_model_fields_match_per_operation_oracles() {
        let b = PeriodicFunction::cosine(0.0, 1.0, 1, 64).unwrap();
        let model = build_effective_model(&EffectiveModelInputs {
            sigma: &constant(1.0),
            c: &mathieu_c(),
            d: &MacroPotential::Separable {
                a: MacroProfile::Linear { slope: 1.0, intercept: 0.0 },
                b: b.clone(),
            },
            g: Some(&b),
            noise_kind: NoiseKind::Additive,
            band: 1,
            theta_n: 0.0,
            k_max: 16,
            domain_len: 1.0,
            search: CriticalSearch::default(),
        })
        .unwrap();

        assert!((model.sigma_star - model.lambda_pp_compat / PI2_8).abs() < 1e-10);
        assert!((model.sigma_star - model.lambda_pp_fd / PI2_8).abs() < 1e-6 * model.sigma_star);

        let gauge_weight = effective_g(&b, &model.psi.psi).unwrap();
        assert!((model.g_star - gauge_weight).abs() < 1e-14);
        let ds = model.d_star_on(&[0.5]).unwrap();
        assert!((ds[0] - 0.5 * gauge_weight).abs() < 1e-12);

        let report = model.corrector_report();
        assert!((report.sigma_star_ratio - 1.0).abs() < 1e-8);
    }

    #[test]
    fn grid_potential_quadrature() {
        // Tabulated d(x, y) = (1 + x) cos(2 pi y) on a coarse grid.
        let nx = 9;
        let my = 64;
        let x_grid: Vec<f64> = (0..nx).map(|i| i as f64 / (nx - 1) as f64).collect();
        let values: Vec<Vec<f64>> = x_grid
            .iter()
            .map(|&x| {
                (0..my)
                    .map(|m| (1.0 + x) * (std::f64::consts::TAU * m as f64 / my as f64).cos())
                    .collect()
            })
            .collect();
        let d = MacroPotential::Grid { x_grid: x_grid.clone(), values };
        let psi = unit_psi(4);
        let ds = effective_d(&d, &psi, &x_grid, 1.0).unwrap();
        // cos has zero mean against the flat density.
        assert!(ds.iter().all(|v| v.abs() < 1e-10));
    }
}
