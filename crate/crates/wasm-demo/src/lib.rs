//! Browser bindings for the effwave pipeline. Three interactive operations,
//! each returning a JSON payload for the static page in `www/`: Bloch band
//! structures over the dual cell, the homogenized constants at the band
//! bottom, and a desk-scale factorization run comparing the fast field with
//! its carrier-times-envelope approximation.

use num_complex::Complex64;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use effwave::bands::{compute_band_structure, symmetric_grid, CriticalSearch};
use effwave::effective::MacroPotential;
use effwave::error::Result;
use effwave::harness::{build_model_from_candidates, factorization_error, well_prepared_initial, HomGrid, SweepConfig};
use effwave::periodic::{eval_coeffs, PeriodicFunction};
use effwave::profile::MacroProfile;
use effwave::spde::{integrate_eps, integrate_homogenized, mass_diagnostics, EpsProblem, Noise};
use effwave::wiener::sample_wiener_path;

const GRID_M: usize = 128;

fn sigma_fn(sigma_amplitude: f64) -> Result<PeriodicFunction> {
    PeriodicFunction::cosine(1.0, sigma_amplitude, 1, GRID_M)
}

fn c_fn(c_amplitude: f64) -> Result<PeriodicFunction> {
    PeriodicFunction::cosine(0.0, c_amplitude, 1, GRID_M)
}

fn json_or_error<T: Serialize>(result: Result<T>) -> String {
    match result {
        Ok(value) => serde_json::to_string(&value).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(message: &str) -> String {
    serde_json::to_string(&serde_json::json!({ "error": message })).unwrap()
}

#[derive(Serialize)]
struct BandsPayload {
    theta: Vec<f64>,
    bands: Vec<Vec<f64>>,
}

/// Bloch bands of `-(d/dy + 2 pi i theta) sigma (d/dy + 2 pi i theta) + c`
/// with `sigma = 1 + sigma_amplitude cos(2 pi y)` and
/// `c = c_amplitude cos(2 pi y)`.
#[wasm_bindgen]
pub fn band_structure_json(
    sigma_amplitude: f64,
    c_amplitude: f64,
    k_max: usize,
    n_points: usize,
    n_bands: usize,
) -> String {
    let compute = || -> Result<BandsPayload> {
        let k_max = k_max.clamp(4, 24);
        let n_bands = n_bands.clamp(1, 8);
        let grid = symmetric_grid(n_points.clamp(17, 129));
        let structure = compute_band_structure(
            &sigma_fn(sigma_amplitude)?,
            &c_fn(c_amplitude)?,
            &grid,
            n_bands,
            k_max,
            false,
        )?;
        Ok(BandsPayload { theta: structure.theta_grid, bands: structure.bands })
    };
    json_or_error(compute())
}

#[derive(Serialize)]
struct EffectivePayload {
    theta_n: f64,
    lambda_n: f64,
    sigma_star: f64,
    lambda_pp_compat: f64,
    lambda_pp_fd: f64,
    g_star: f64,
    effective_mass: f64,
    psi_y: Vec<f64>,
    psi_abs: Vec<f64>,
}

fn demo_sweep(sigma_amplitude: f64, c_amplitude: f64, k_max: usize, noise: Noise) -> Result<SweepConfig> {
    Ok(SweepConfig {
        sigma: sigma_fn(sigma_amplitude)?,
        c: c_fn(c_amplitude)?,
        d: MacroPotential::Zero,
        noise,
        band: 1,
        theta_candidates: vec![0.0],
        k_max: k_max.clamp(4, 24),
        domain_len: 1.0,
        t_final: 0.25,
        dt: 5e-4,
        cells_list: vec![8],
        replicas: 1,
        seed: 1,
        points_per_cell: 32,
        hom_grid: HomGrid::Coarse(255),
        v0: MacroProfile::Bump { center: 0.5, width: 0.6, amplitude: 1.0 },
        n_snapshots: 26,
        search: CriticalSearch::default(),
        use_discrete_shift: true,
    })
}

/// Homogenized constants at the bottom of band 1, with the Bloch density
/// profile for display.
#[wasm_bindgen]
pub fn effective_model_json(sigma_amplitude: f64, c_amplitude: f64, k_max: usize) -> String {
    let compute = || -> Result<EffectivePayload> {
        let sweep = demo_sweep(sigma_amplitude, c_amplitude, k_max, Noise::Off)?;
        let model = build_model_from_candidates(&sweep)?;
        let samples = 128usize;
        let psi_y: Vec<f64> = (0..=samples).map(|j| j as f64 / samples as f64).collect();
        let psi_abs: Vec<f64> =
            psi_y.iter().map(|&y| eval_coeffs(&model.psi.psi, y).norm()).collect();
        Ok(EffectivePayload {
            theta_n: model.theta_n,
            lambda_n: model.lambda_n,
            sigma_star: model.sigma_star,
            lambda_pp_compat: model.lambda_pp_compat,
            lambda_pp_fd: model.lambda_pp_fd,
            g_star: model.g_star,
            effective_mass: 1.0 / model.sigma_star,
            psi_y,
            psi_abs,
        })
    };
    json_or_error(compute())
}

#[derive(Serialize)]
struct FactorizationPayload {
    eps: f64,
    sigma_star: f64,
    lambda_n: f64,
    g_star: f64,
    times: Vec<f64>,
    errors: Vec<f64>,
    x: Vec<f64>,
    v_eps_abs: Vec<f64>,
    envelope_abs: Vec<f64>,
    mass_times: Vec<f64>,
    mass_observed: Vec<f64>,
    mass_predicted: Vec<f64>,
    mass_law: String,
}

/// One shared-path factorization run at `eps = 1/cells`: the fast field, the
/// carrier-times-envelope product, the error history and the mass law.
#[wasm_bindgen]
pub fn factorization_demo_json(
    sigma_amplitude: f64,
    c_amplitude: f64,
    cells: u32,
    noise_kind: &str,
    g_amplitude: f64,
    seed: u64,
) -> String {
    let compute = || -> Result<FactorizationPayload> {
        let cells = cells.clamp(2, 16);
        let noise = match noise_kind {
            "additive" => Noise::Additive(PeriodicFunction::cosine(0.0, g_amplitude, 1, GRID_M)?),
            "multiplicative" => {
                Noise::Multiplicative(PeriodicFunction::cosine(0.0, g_amplitude, 1, GRID_M)?)
            }
            _ => Noise::Off,
        };
        let mut sweep = demo_sweep(sigma_amplitude, c_amplitude, 16, noise)?;
        sweep.cells_list = vec![cells];
        sweep.seed = seed;
        let model = build_model_from_candidates(&sweep)?;

        let q = cells;
        let n = sweep.points_per_cell * q as usize - 1;
        let dx = 1.0 / (n + 1) as f64;
        let x_grid: Vec<f64> = (1..=n).map(|j| j as f64 * dx).collect();
        let v0 = well_prepared_initial(&model.psi.psi, q, &sweep.v0, &x_grid, 1.0)?;
        let path = sample_wiener_path(sweep.t_final, sweep.dt, sweep.seed, 0)?;
        let steps = path.n_steps();
        let snaps: Vec<f64> = (0..sweep.n_snapshots)
            .map(|i| ((i * steps) / (sweep.n_snapshots - 1)) as f64 * sweep.dt)
            .collect();

        let problem = EpsProblem {
            domain_len: 1.0,
            t_final: sweep.t_final,
            cells_per_unit: q,
            sigma: sweep.sigma.clone(),
            c: sweep.c.clone(),
            d: MacroPotential::Zero,
            noise: sweep.noise.clone(),
            theta_n: model.theta_n,
            lambda_n: model.lambda_n,
            n_interior: n,
            dt: sweep.dt,
            use_discrete_shift: true,
        };
        let traj_eps = integrate_eps(&problem, &path, &v0, &snaps)?;
        let n_hom = 255;
        let dx_hom = 1.0 / (n_hom + 1) as f64;
        let v0_hom: Vec<Complex64> = (1..=n_hom)
            .map(|j| Complex64::new(sweep.v0.eval(j as f64 * dx_hom, 1.0), 0.0))
            .collect();
        let traj_hom = integrate_homogenized(&model, &path, &v0_hom, sweep.dt, n_hom, &snaps)?;
        let fe = factorization_error(&traj_eps, &traj_hom, &model.psi.psi, q)?;

        let final_envelope = effwave::harness::cubic_lift(
            traj_hom.final_state(),
            traj_hom.dx,
            1.0,
            &x_grid,
        );
        let psi_samples: Vec<Complex64> = x_grid
            .iter()
            .map(|&x| eval_coeffs(&model.psi.psi, (x * q as f64).rem_euclid(1.0)))
            .collect();
        let envelope_abs: Vec<f64> = final_envelope
            .iter()
            .zip(&psi_samples)
            .map(|(v, p)| (v * p).norm())
            .collect();
        let v_eps_abs: Vec<f64> = traj_eps.final_state().iter().map(|z| z.norm()).collect();

        let diag = mass_diagnostics(&traj_eps, Some(&path));
        let stride = (diag.times.len() / 200).max(1);
        let mass_times: Vec<f64> = diag.times.iter().step_by(stride).copied().collect();
        let mass_observed: Vec<f64> = diag.observed.iter().step_by(stride).copied().collect();
        let mass_predicted: Vec<f64> = diag.predicted.iter().step_by(stride).copied().collect();

        Ok(FactorizationPayload {
            eps: 1.0 / q as f64,
            sigma_star: model.sigma_star,
            lambda_n: model.lambda_n,
            g_star: model.g_star,
            times: fe.times,
            errors: fe.l2,
            x: x_grid,
            v_eps_abs,
            envelope_abs,
            mass_times,
            mass_observed,
            mass_predicted,
            mass_law: diag.law,
        })
    };
    json_or_error(compute())
}
