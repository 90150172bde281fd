//! Factorization experiments: well-prepared initial data, demodulation,
//! strong factorization error against the carrier-times-envelope product,
//! two-scale pairings, and the epsilon-sweep orchestrator with shared-path
//! Monte Carlo averaging.

use num_complex::Complex64;
use serde::Serialize;

use crate::bands::CriticalSearch;
use crate::effective::{build_effective_model, EffectiveModel, EffectiveModelInputs, MacroPotential, NoiseKind};
use crate::error::{Error, Result};
use crate::map_indexed;
use crate::periodic::{eval_coeffs, PeriodicFunction};
use crate::profile::MacroProfile;
use crate::spde::{integrate_eps, integrate_homogenized, mass_diagnostics, EpsProblem, Noise, Trajectory};
use crate::wiener::sample_wiener_path;

const TAU: f64 = std::f64::consts::TAU;

/// Oscillating test function `Psi(x, x/eps)`: a smooth envelope times a
/// periodic profile, optionally extended by the first-order corrector term
/// `eps phi'(x) zeta(x/eps)`.
#[derive(Debug, Clone)]
pub struct TwoScaleTestFunction {
    pub envelope: MacroProfile,
    pub micro: PeriodicFunction,
    /// Corrector coefficients `zeta`; when present the evaluation carries
    /// the extra `eps phi' zeta` term.
    pub corrector: Option<Vec<Complex64>>,
}

impl TwoScaleTestFunction {
    pub fn eval(&self, x: f64, q: u32, domain_len: f64) -> Complex64 {
        let y = (x * q as f64).rem_euclid(1.0);
        let mut value = self.envelope.eval(x, domain_len) * self.micro.eval(y);
        if let Some(zeta) = &self.corrector {
            let eps = 1.0 / q as f64;
            value += eps * self.envelope.eval_deriv(x, domain_len) * eval_coeffs(zeta, y);
        }
        value
    }

    /// The two-scale limit integrand `Psi(x, y)`, corrector term dropped.
    pub fn eval_limit(&self, x: f64, y: f64, domain_len: f64) -> Complex64 {
        self.envelope.eval(x, domain_len) * self.micro.eval(y)
    }
}

/// Well-prepared initial data in the demodulated frame:
/// `psi_n(x/eps) v0(x)` on the interior nodes. The envelope must vanish
/// identically near the boundary so the Dirichlet condition holds exactly.
pub fn well_prepared_initial(
    psi: &[Complex64],
    q: u32,
    v0: &MacroProfile,
    x_grid: &[f64],
    domain_len: f64,
) -> Result<Vec<Complex64>> {
    if !v0.compactly_supported_in(domain_len) {
        return Err(Error::BoundarySupport);
    }
    Ok(x_grid
        .iter()
        .map(|&x| {
            let y = (x * q as f64).rem_euclid(1.0);
            eval_coeffs(psi, y) * v0.eval(x, domain_len)
        })
        .collect())
}

/// Strip the fast carrier: `v = u exp(-i lambda t / eps^2) exp(-2 pi i theta x / eps)`.
pub fn demodulate(
    u: &[Complex64],
    t: f64,
    eps: f64,
    theta: f64,
    lambda: f64,
    x_grid: &[f64],
) -> Vec<Complex64> {
    let time_phase = Complex64::from_polar(1.0, -lambda * t / (eps * eps));
    u.iter()
        .zip(x_grid)
        .map(|(z, &x)| z * time_phase * Complex64::from_polar(1.0, -TAU * theta * x / eps))
        .collect()
}

/// Inverse of [`demodulate`].
pub fn modulate(
    v: &[Complex64],
    t: f64,
    eps: f64,
    theta: f64,
    lambda: f64,
    x_grid: &[f64],
) -> Vec<Complex64> {
    let time_phase = Complex64::from_polar(1.0, lambda * t / (eps * eps));
    v.iter()
        .zip(x_grid)
        .map(|(z, &x)| z * time_phase * Complex64::from_polar(1.0, TAU * theta * x / eps))
        .collect()
}

/// Local four-point (piecewise-cubic) interpolation of a Dirichlet interior
/// field onto arbitrary targets; boundary zeros participate as nodes.
pub fn cubic_lift(
    coarse_interior: &[Complex64],
    dx_coarse: f64,
    domain_len: f64,
    targets: &[f64],
) -> Vec<Complex64> {
    let n = coarse_interior.len();
    let node = |i: i64| -> Complex64 {
        if i <= 0 || i as usize > n {
            Complex64::ZERO
        } else {
            coarse_interior[i as usize - 1]
        }
    };
    let last_node = n as i64 + 1; // nodes 0..=n+1 at spacing dx_coarse
    targets
        .iter()
        .map(|&x| {
            let s = (x / dx_coarse).clamp(0.0, last_node as f64);
            let cell = (s.floor() as i64).clamp(0, last_node - 1);
            let base = (cell - 1).clamp(0, last_node - 3);
            // Four consecutive nodes base..base+3 (clamped), Lagrange weights.
            let mut acc = Complex64::ZERO;
            for a in 0..4i64 {
                let ia = base + a;
                let xa = ia as f64;
                let mut weight = 1.0;
                for b in 0..4i64 {
                    if a != b {
                        let xb = (base + b) as f64;
                        weight *= (s - xb) / (xa - xb);
                    }
                }
                acc += node(ia) * weight;
            }
            let _ = domain_len;
            acc
        })
        .collect()
}

/// Difference between the cubic lift from the full coarse grid and from its
/// even-index subgrid: an upper estimate of the interpolation error.
pub fn lift_error_estimate(
    coarse_interior: &[Complex64],
    dx_coarse: f64,
    domain_len: f64,
    targets: &[f64],
    dx_fine: f64,
) -> f64 {
    let full = cubic_lift(coarse_interior, dx_coarse, domain_len, targets);
    let half: Vec<Complex64> =
        coarse_interior.iter().skip(1).step_by(2).copied().collect();
    let halved = cubic_lift(&half, 2.0 * dx_coarse, domain_len, targets);
    (dx_fine
        * full.iter().zip(&halved).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>())
    .sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationError {
    pub times: Vec<f64>,
    pub l2: Vec<f64>,
    pub sup: f64,
}

/// `|| v_eps(t) - psi(x/eps) v(t, x) ||_{L^2(D)}` at the shared snapshot
/// instants, with the homogenized envelope lifted to the fine grid when the
/// grids differ.
pub fn factorization_error(
    v_eps: &Trajectory,
    v_hom: &Trajectory,
    psi: &[Complex64],
    q: u32,
) -> Result<FactorizationError> {
    if v_eps.times.len() != v_hom.times.len() {
        return Err(Error::TimeGridMismatch { left: v_eps.times.len(), right: v_hom.times.len() });
    }
    for (a, b) in v_eps.times.iter().zip(&v_hom.times) {
        if (a - b).abs() > 1e-9 * (1.0 + a.abs()) {
            return Err(Error::TimeGridMismatch { left: v_eps.times.len(), right: v_hom.times.len() });
        }
    }
    let psi_samples: Vec<Complex64> = v_eps
        .x_grid
        .iter()
        .map(|&x| eval_coeffs(psi, (x * q as f64).rem_euclid(1.0)))
        .collect();
    let same_grid = v_eps.x_grid.len() == v_hom.x_grid.len();

    let mut l2 = Vec::with_capacity(v_eps.times.len());
    for (idx, state) in v_eps.states.iter().enumerate() {
        let envelope: Vec<Complex64> = if same_grid {
            v_hom.states[idx].clone()
        } else {
            cubic_lift(&v_hom.states[idx], v_hom.dx, v_hom.domain_len, &v_eps.x_grid)
        };
        let err = (v_eps.dx
            * state
                .iter()
                .zip(&psi_samples)
                .zip(&envelope)
                .map(|((ve, ps), en)| (ve - ps * en).norm_sqr())
                .sum::<f64>())
        .sqrt();
        l2.push(err);
    }
    let sup = l2.iter().copied().fold(0.0, f64::max);
    Ok(FactorizationError { times: v_eps.times.clone(), l2, sup })
}

#[derive(Debug, Clone)]
pub struct PairingResult {
    pub value: Complex64,
    pub limit: Option<Complex64>,
}

pub const MIN_PAIRING_POINTS_PER_CELL: usize = 8;

/// Oscillatory pairing `∫_D w(x) conj(Psi(x, x/eps)) dx` by the trapezoid
/// rule on the full grid (`w_full` includes both boundary nodes). When a
/// separable limit candidate `v(x) m(y)` is supplied, the tensor-quadrature
/// limit `∫_D ∫_T v m conj(Psi) dy dx` is evaluated alongside.
pub fn two_scale_pairing(
    w_full: &[Complex64],
    dx: f64,
    domain_len: f64,
    test: &TwoScaleTestFunction,
    q: u32,
    limit_candidate: Option<(&[Complex64], f64, &[Complex64])>,
) -> Result<PairingResult> {
    let intervals = w_full.len() - 1;
    let cells = (domain_len * q as f64).round() as usize;
    let ppc = intervals / cells.max(1);
    if ppc < MIN_PAIRING_POINTS_PER_CELL {
        return Err(Error::UnderResolved { points_per_cell: ppc, min: MIN_PAIRING_POINTS_PER_CELL });
    }

    let mut acc = Complex64::ZERO;
    for (j, w) in w_full.iter().enumerate() {
        let x = j as f64 * dx;
        let weight = if j == 0 || j == w_full.len() - 1 { 0.5 } else { 1.0 };
        acc += weight * w * test.eval(x, q, domain_len).conj();
    }
    let value = acc * dx;

    let limit = limit_candidate.map(|(macro_field, dx_macro, micro_limit)| {
        // x-factor by the trapezoid rule (interior field, zero boundary).
        let mut xf = Complex64::ZERO;
        for (j, v) in macro_field.iter().enumerate() {
            let x = (j + 1) as f64 * dx_macro;
            xf += v * Complex64::new(test.envelope.eval(x, domain_len), 0.0);
        }
        xf *= dx_macro;
        // y-factor on a grid resolving both micro profiles.
        let m = 2 * (micro_limit.len() + 2 * test.micro.k_max()) + 3;
        let mut yf = Complex64::ZERO;
        for jm in 0..m {
            let y = jm as f64 / m as f64;
            yf += eval_coeffs(micro_limit, y) * test.micro.eval(y).conj();
        }
        yf /= m as f64;
        xf * yf
    });

    Ok(PairingResult { value, limit })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HomGrid {
    /// Homogenized solve on the same grid as the fast run.
    Match,
    /// Fixed coarse grid with the given number of interior nodes, lifted by
    /// piecewise cubics for comparisons.
    Coarse(usize),
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub sigma: PeriodicFunction,
    pub c: PeriodicFunction,
    pub d: MacroPotential,
    pub noise: Noise,
    pub band: usize,
    pub theta_candidates: Vec<f64>,
    pub k_max: usize,
    pub domain_len: f64,
    pub t_final: f64,
    pub dt: f64,
    /// Reciprocal epsilons, one fast run per entry.
    pub cells_list: Vec<u32>,
    pub replicas: u64,
    pub seed: u64,
    pub points_per_cell: usize,
    pub hom_grid: HomGrid,
    pub v0: MacroProfile,
    pub n_snapshots: usize,
    pub search: CriticalSearch,
    pub use_discrete_shift: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsReport {
    pub eps: f64,
    pub cells_per_unit: u32,
    pub replicas_requested: u64,
    pub replicas_completed: u64,
    pub times: Vec<f64>,
    pub err_mean: Vec<f64>,
    pub err_stderr: Vec<f64>,
    pub sup_mean: f64,
    pub sup_stderr: f64,
    /// Per-replica sup errors in replica order, kept for paired-difference
    /// verdicts.
    pub sup_per_replica: Vec<f64>,
    pub pairing_re: f64,
    pub pairing_im: f64,
    pub pairing_limit_re: f64,
    pub pairing_limit_im: f64,
    pub mass_residual_final_mean: f64,
    pub lift_error: f64,
    pub lambda_shift: f64,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub theta_n: f64,
    pub lambda_n: f64,
    pub sigma_star: f64,
    pub g_star: f64,
    pub noise_kind: NoiseKind,
    pub eps_reports: Vec<EpsReport>,
    /// Mean sup errors strictly decreasing in eps, each step by more than
    /// one standard error of the paired per-replica differences.
    pub monotone: bool,
    pub wall_seconds: f64,
    /// Mass-law series of the first (eps, replica 0) cell for persistence.
    pub sample_mass: SampleMass,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SampleMass {
    pub times: Vec<f64>,
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
    pub residual: Vec<f64>,
    pub law: String,
}

struct CellOutcome {
    fe: FactorizationError,
    pairing: PairingResult,
    mass_final_residual: f64,
    mass: Option<SampleMass>,
    increments_eps: usize,
    increments_hom: usize,
    lambda_shift: f64,
    lift_error: f64,
}

/// Snapshot instants: `n_snapshots` indices spread evenly over the step
/// range, always including 0 and the final step.
fn snapshot_times(t_final: f64, dt: f64, n_snapshots: usize) -> Vec<f64> {
    let n_steps = (t_final / dt).round() as usize;
    let count = n_snapshots.max(2);
    let mut idx: Vec<usize> =
        (0..count).map(|i| (i * n_steps) / (count - 1)).collect();
    idx.dedup();
    idx.into_iter().map(|k| k as f64 * dt).collect()
}

pub fn noise_kind_of(noise: &Noise) -> NoiseKind {
    match noise {
        Noise::Off => NoiseKind::Off,
        Noise::Additive(_) => NoiseKind::Additive,
        Noise::Multiplicative(_) => NoiseKind::Multiplicative,
    }
}

/// Locate a usable critical point among the candidates and build the
/// effective model there.
pub fn build_model_from_candidates(cfg: &SweepConfig) -> Result<EffectiveModel> {
    let g = match &cfg.noise {
        Noise::Off => None,
        Noise::Additive(g) | Noise::Multiplicative(g) => Some(g),
    };
    let mut last_err = None;
    for &theta in &cfg.theta_candidates {
        match build_effective_model(&EffectiveModelInputs {
            sigma: &cfg.sigma,
            c: &cfg.c,
            d: &cfg.d,
            g,
            noise_kind: noise_kind_of(&cfg.noise),
            band: cfg.band,
            theta_n: theta,
            k_max: cfg.k_max,
            domain_len: cfg.domain_len,
            search: cfg.search,
        }) {
            Ok(model) => return Ok(model),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or(Error::NoBracket { n: cfg.band, theta_init: f64::NAN }))
}

fn run_cell(
    cfg: &SweepConfig,
    model: &EffectiveModel,
    q: u32,
    replica: u64,
    x_grid: &[f64],
    psi_samples_v0: &[Complex64],
    v0_hom: &[Complex64],
    n_hom: usize,
    snaps: &[f64],
    keep_mass: bool,
) -> Result<CellOutcome> {
    let problem = EpsProblem {
        domain_len: cfg.domain_len,
        t_final: cfg.t_final,
        cells_per_unit: q,
        sigma: cfg.sigma.clone(),
        c: cfg.c.clone(),
        d: cfg.d.clone(),
        noise: cfg.noise.clone(),
        theta_n: model.theta_n,
        lambda_n: model.lambda_n,
        n_interior: x_grid.len(),
        dt: cfg.dt,
        use_discrete_shift: cfg.use_discrete_shift,
    };
    let path = sample_wiener_path(cfg.t_final, cfg.dt, cfg.seed, replica)?;
    let traj_eps = integrate_eps(&problem, &path, psi_samples_v0, snaps)?;
    let traj_hom = integrate_homogenized(model, &path, v0_hom, cfg.dt, n_hom, snaps)?;

    let fe = factorization_error(&traj_eps, &traj_hom, &model.psi.psi, q)?;

    // Pairing of the final fast state against the envelope-times-carrier
    // test function, with the homogenized solve as the limit candidate.
    let mut w_full = vec![Complex64::ZERO; x_grid.len() + 2];
    w_full[1..=x_grid.len()].copy_from_slice(traj_eps.final_state());
    let test = TwoScaleTestFunction {
        envelope: cfg.v0.clone(),
        micro: PeriodicFunction::from_coeff_vec(
            model.psi.psi.clone(),
            2 * model.psi.psi.len() + 1,
        )?,
        corrector: None,
    };
    let pairing = two_scale_pairing(
        &w_full,
        traj_eps.dx,
        cfg.domain_len,
        &test,
        q,
        Some((traj_hom.final_state(), traj_hom.dx, model.psi.psi.as_slice())),
    )?;

    let diag = mass_diagnostics(&traj_eps, Some(&path));
    let mass_final_residual = *diag.residual.last().unwrap_or(&0.0);
    let mass = keep_mass.then(|| SampleMass {
        times: diag.times.clone(),
        observed: diag.observed.clone(),
        predicted: diag.predicted.clone(),
        residual: diag.residual.clone(),
        law: diag.law.clone(),
    });

    let lift_error = if x_grid.len() == n_hom {
        0.0
    } else {
        lift_error_estimate(
            traj_hom.final_state(),
            traj_hom.dx,
            cfg.domain_len,
            x_grid,
            traj_eps.dx,
        )
    };

    Ok(CellOutcome {
        fe,
        pairing,
        mass_final_residual,
        mass,
        increments_eps: traj_eps.increments_consumed,
        increments_hom: traj_hom.increments_consumed,
        lambda_shift: traj_eps.lambda_shift,
        lift_error,
    })
}

/// The end-to-end experiment: for each epsilon and each replica, build the
/// well-prepared initial data, integrate the fast and homogenized problems
/// on one shared Wiener path, and aggregate factorization errors, pairings
/// and mass diagnostics over replicas.
pub fn convergence_sweep(cfg: &SweepConfig) -> Result<ConvergenceReport> {
    let started = std::time::Instant::now();
    let model = build_model_from_candidates(cfg)?;
    let snaps = snapshot_times(cfg.t_final, cfg.dt, cfg.n_snapshots);

    let mut eps_reports = Vec::with_capacity(cfg.cells_list.len());
    let mut sample_mass = SampleMass::default();

    for (eps_idx, &q) in cfg.cells_list.iter().enumerate() {
        let cells_in_domain = (cfg.domain_len * q as f64).round() as usize;
        let n_eps = cfg.points_per_cell * cells_in_domain - 1;
        let dx = cfg.domain_len / (n_eps + 1) as f64;
        let x_grid: Vec<f64> = (1..=n_eps).map(|j| j as f64 * dx).collect();
        let v0_eps =
            well_prepared_initial(&model.psi.psi, q, &cfg.v0, &x_grid, cfg.domain_len)?;

        let n_hom = match cfg.hom_grid {
            HomGrid::Match => n_eps,
            HomGrid::Coarse(n) => n,
        };
        let dx_hom = cfg.domain_len / (n_hom + 1) as f64;
        let x_hom: Vec<f64> = (1..=n_hom).map(|j| j as f64 * dx_hom).collect();
        let v0_hom: Vec<Complex64> = x_hom
            .iter()
            .map(|&x| Complex64::new(cfg.v0.eval(x, cfg.domain_len), 0.0))
            .collect();

        let replica_ids: Vec<u64> = (0..cfg.replicas).collect();
        let outcomes: Vec<Result<CellOutcome>> = map_indexed(&replica_ids, |_, &r| {
            let keep_mass = eps_idx == 0 && r == 0;
            let out = run_cell(
                cfg, &model, q, r, &x_grid, &v0_eps, &v0_hom, n_hom, &snaps, keep_mass,
            )?;
            if out.increments_eps != out.increments_hom {
                return Err(Error::TimeGridMismatch {
                    left: out.increments_eps,
                    right: out.increments_hom,
                });
            }
            Ok(out)
        });

        let mut failures = Vec::new();
        let mut per_time_sums = vec![0.0f64; snaps.len()];
        let mut per_time_sq = vec![0.0f64; snaps.len()];
        let mut sup_values = Vec::new();
        let mut pairing_sum = Complex64::ZERO;
        let mut pairing_limit_sum = Complex64::ZERO;
        let mut mass_residual_sum = 0.0;
        let mut lambda_shift = model.lambda_n;
        let mut lift_error: f64 = 0.0;

        for (r, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(cell) => {
                    for (i, e) in cell.fe.l2.iter().enumerate() {
                        per_time_sums[i] += e;
                        per_time_sq[i] += e * e;
                    }
                    sup_values.push(cell.fe.sup);
                    pairing_sum += cell.pairing.value;
                    pairing_limit_sum += cell.pairing.limit.unwrap_or(Complex64::ZERO);
                    mass_residual_sum += cell.mass_final_residual;
                    lambda_shift = cell.lambda_shift;
                    lift_error = lift_error.max(cell.lift_error);
                    if let Some(mass) = cell.mass {
                        sample_mass = mass;
                    }
                }
                Err(e) => failures.push(format!("replica {r}: {e}")),
            }
        }

        let m = sup_values.len() as f64;
        if m == 0.0 {
            return Err(Error::Config {
                path: format!("epsilon 1/{q}"),
                message: format!(
                    "all replicas failed; first failure: {}",
                    failures.first().cloned().unwrap_or_default()
                ),
            });
        }
        let err_mean: Vec<f64> = per_time_sums.iter().map(|s| s / m).collect();
        let err_stderr: Vec<f64> = per_time_sq
            .iter()
            .zip(&err_mean)
            .map(|(sq, mean)| {
                if m > 1.0 {
                    ((sq / m - mean * mean).max(0.0) / (m - 1.0)).sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let sup_mean = sup_values.iter().sum::<f64>() / m;
        let sup_stderr = if m > 1.0 {
            (sup_values.iter().map(|s| (s - sup_mean).powi(2)).sum::<f64>() / (m * (m - 1.0)))
                .sqrt()
        } else {
            0.0
        };

        eps_reports.push(EpsReport {
            eps: 1.0 / q as f64,
            cells_per_unit: q,
            replicas_requested: cfg.replicas,
            replicas_completed: sup_values.len() as u64,
            times: snaps.clone(),
            err_mean,
            err_stderr,
            sup_mean,
            sup_stderr,
            sup_per_replica: sup_values,
            pairing_re: pairing_sum.re / m,
            pairing_im: pairing_sum.im / m,
            pairing_limit_re: pairing_limit_sum.re / m,
            pairing_limit_im: pairing_limit_sum.im / m,
            mass_residual_final_mean: mass_residual_sum / m,
            lift_error,
            lambda_shift,
            failures,
        });
    }

    let monotone = monotone_verdict(&eps_reports);

    Ok(ConvergenceReport {
        theta_n: model.theta_n,
        lambda_n: model.lambda_n,
        sigma_star: model.sigma_star,
        g_star: model.g_star,
        noise_kind: model.noise_kind,
        eps_reports,
        monotone,
        wall_seconds: started.elapsed().as_secs_f64(),
        sample_mass,
    })
}

/// Paired-difference monotonicity: consecutive mean sup errors must drop by
/// more than one standard error of the per-replica differences (strict
/// decrease when a single replica leaves no variance estimate).
pub fn monotone_verdict(reports: &[EpsReport]) -> bool {
    for w in reports.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let n = a.sup_per_replica.len().min(b.sup_per_replica.len());
        if n == 0 {
            return false;
        }
        let diffs: Vec<f64> = (0..n)
            .map(|r| a.sup_per_replica[r] - b.sup_per_replica[r])
            .collect();
        let mean = diffs.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>()
                / ((n - 1) as f64 * n as f64))
                .sqrt()
        } else {
            0.0
        };
        if !(mean > stderr) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodic::PeriodicFunction;

    fn bump() -> MacroProfile {
        MacroProfile::Bump { center: 0.5, width: 0.6, amplitude: 1.0 }
    }

    fn unit_psi(k_max: usize) -> Vec<Complex64> {
        let mut psi = vec![Complex64::ZERO; 2 * k_max + 1];
        psi[k_max] = Complex64::ONE;
        psi
    }

    #[test]
    fn flat_carrier_reproduces_envelope() {
        let x_grid: Vec<f64> = (1..64).map(|j| j as f64 / 64.0).collect();
        let v = well_prepared_initial(&unit_psi(4), 8, &bump(), &x_grid, 1.0).unwrap();
        for (x, z) in x_grid.iter().zip(&v) {
            assert!((z.re - bump().eval(*x, 1.0)).abs() < 1e-14);
            assert!(z.im.abs() < 1e-13);
        }
        // Same envelope regardless of eps when the carrier is flat.
        let v2 = well_prepared_initial(&unit_psi(4), 16, &bump(), &x_grid, 1.0).unwrap();
        for (a, b) in v.iter().zip(&v2) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn boundary_support_enforced() {
        let x_grid: Vec<f64> = (1..16).map(|j| j as f64 / 16.0).collect();
        let err = well_prepared_initial(
            &unit_psi(2),
            4,
            &MacroProfile::Sine { mode: 1, amplitude: 1.0 },
            &x_grid,
            1.0,
        );
        assert!(matches!(err, Err(Error::BoundarySupport)));
    }

    #[test]
    fn well_prepared_mass_approaches_envelope_mass() {
        // || psi(x/eps) v0 ||^2 -> ∫|v0|^2 ∫|psi|^2 = ∫|v0|^2 as eps -> 0.
        let sigma = PeriodicFunction::constant(1.0, 64);
        let c = PeriodicFunction::cosine(0.0, 2.0, 1, 64).unwrap();
        let op = crate::cell::assemble_cell_operator(&sigma, &c, 0.0, 16).unwrap();
        let pair = crate::cell::solve_cell_eigen(&op, 1).unwrap().remove(0);

        let q = 64u32;
        let n = 16 * q as usize - 1;
        let dx = 1.0 / (n + 1) as f64;
        let x_grid: Vec<f64> = (1..=n).map(|j| j as f64 * dx).collect();
        let v = well_prepared_initial(&pair.psi, q, &bump(), &x_grid, 1.0).unwrap();
        let mass: f64 = dx * v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let envelope_mass: f64 =
            dx * x_grid.iter().map(|&x| bump().eval(x, 1.0).powi(2)).sum::<f64>();
        assert!(
            (mass - envelope_mass).abs() < 1e-3 * envelope_mass,
            "{mass} vs {envelope_mass}"
        );
    }

    #[test]
    fn modulate_demodulate_roundtrip() {
        let x_grid: Vec<f64> = (1..128).map(|j| j as f64 / 128.0).collect();
        let mut state = 3u64;
        let mut nextf = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let field: Vec<Complex64> =
            (0..x_grid.len()).map(|_| Complex64::new(nextf(), nextf())).collect();
        let (t, eps, theta, lambda) = (0.37, 0.125, 0.5, -2.3);
        let up = modulate(&field, t, eps, theta, lambda, &x_grid);
        for (u, f) in up.iter().zip(&field) {
            assert!((u.norm() - f.norm()).abs() < 1e-14);
        }
        let down = demodulate(&up, t, eps, theta, lambda, &x_grid);
        for (d, f) in down.iter().zip(&field) {
            assert!((d - f).norm() < 1e-14);
        }

        // Trivial carrier: identity.
        let same = demodulate(&field, t, eps, 0.0, 0.0, &x_grid);
        for (s, f) in same.iter().zip(&field) {
            assert!((s - f).norm() < 1e-15);
        }
    }

    #[test]
    fn cubic_lift_reproduces_cubics() {
        // Exact for polynomials of degree three that respect the end zeros.
        let n = 16usize;
        let dx = 1.0 / (n + 1) as f64;
        let poly = |x: f64| x * (1.0 - x) * (0.3 + x);
        let coarse: Vec<Complex64> =
            (1..=n).map(|j| Complex64::new(poly(j as f64 * dx), 0.0)).collect();
        let targets: Vec<f64> = (1..200).map(|j| j as f64 / 200.0).collect();
        let lifted = cubic_lift(&coarse, dx, 1.0, &targets);
        for (x, z) in targets.iter().zip(&lifted) {
            assert!((z.re - poly(*x)).abs() < 1e-12, "x={x}: {} vs {}", z.re, poly(*x));
        }
    }

    #[test]
    fn pairing_macro_only_is_plain_integral() {
        // w = f(x), Psi = f(x) * 1: the pairing equals ∫|f|^2 at every eps.
        let n = 255usize;
        let dx = 1.0 / (n + 1) as f64;
        let f = bump();
        let w_full: Vec<Complex64> = (0..=n + 1)
            .map(|j| Complex64::new(f.eval(j as f64 * dx, 1.0), 0.0))
            .collect();
        let test = TwoScaleTestFunction {
            envelope: f.clone(),
            micro: PeriodicFunction::constant(1.0, 8),
            corrector: None,
        };
        let got = two_scale_pairing(&w_full, dx, 1.0, &test, 8, None).unwrap();
        let want: f64 =
            dx * (0..=n + 1).map(|j| f.eval(j as f64 * dx, 1.0).powi(2)).sum::<f64>();
        assert!((got.value.re - want).abs() < 1e-12 && got.value.im.abs() < 1e-14);
    }

    #[test]
    fn pairing_oscillatory_squares_to_half() {
        // w = cos(2 pi x / eps) against cos(2 pi y): -> 1/2.
        let q = 64u32;
        let n = 16 * q as usize - 1;
        let dx = 1.0 / (n + 1) as f64;
        let w_full: Vec<Complex64> = (0..=n + 1)
            .map(|j| Complex64::new((TAU * q as f64 * j as f64 * dx).cos(), 0.0))
            .collect();
        let test = TwoScaleTestFunction {
            envelope: MacroProfile::Constant { value: 1.0 },
            micro: PeriodicFunction::cosine(0.0, 1.0, 1, 16).unwrap(),
            corrector: None,
        };
        let got = two_scale_pairing(&w_full, dx, 1.0, &test, q, None).unwrap();
        assert!((got.value.re - 0.5).abs() < 1e-3, "pairing {}", got.value.re);
    }

    #[test]
    fn pairing_rejects_underresolved() {
        let q = 64u32;
        let n = 4 * q as usize - 1;
        let w_full = vec![Complex64::ONE; n + 2];
        let test = TwoScaleTestFunction {
            envelope: MacroProfile::Constant { value: 1.0 },
            micro: PeriodicFunction::constant(1.0, 8),
            corrector: None,
        };
        assert!(matches!(
            two_scale_pairing(&w_full, 1.0 / (n + 1) as f64, 1.0, &test, q, None),
            Err(Error::UnderResolved { .. })
        ));
    }

    #[test]
    fn riemann_lebesgue_decay() {
        // exp(2 pi i x / eps) against a macro-only test function decays.
        let test = TwoScaleTestFunction {
            envelope: bump(),
            micro: PeriodicFunction::constant(1.0, 8),
            corrector: None,
        };
        let mut values = Vec::new();
        for q in [8u32, 16, 32] {
            let n = 64 * q as usize - 1;
            let dx = 1.0 / (n + 1) as f64;
            let w_full: Vec<Complex64> = (0..=n + 1)
                .map(|j| Complex64::from_polar(1.0, TAU * q as f64 * j as f64 * dx))
                .collect();
            let got = two_scale_pairing(&w_full, dx, 1.0, &test, q, None).unwrap();
            values.push(got.value.norm());
        }
        assert!(values[0] > values[1] && values[1] > values[2], "{values:?}");
    }

    #[test]
    fn pairing_linearity_and_conjugation() {
        let q = 16u32;
        let n = 16 * q as usize - 1;
        let dx = 1.0 / (n + 1) as f64;
        let cosf = PeriodicFunction::cosine(0.3, 0.7, 1, 16).unwrap();
        let test = TwoScaleTestFunction { envelope: bump(), micro: cosf.clone(), corrector: None };

        let w1: Vec<Complex64> = (0..=n + 1)
            .map(|j| Complex64::new((j as f64 * dx).sin(), 0.2))
            .collect();
        let w2: Vec<Complex64> = (0..=n + 1)
            .map(|j| Complex64::new(0.1, (TAU * j as f64 * dx).cos()))
            .collect();
        let alpha = Complex64::new(1.4, -0.3);
        let combo: Vec<Complex64> =
            w1.iter().zip(&w2).map(|(a, b)| alpha * a + b).collect();
        let p1 = two_scale_pairing(&w1, dx, 1.0, &test, q, None).unwrap().value;
        let p2 = two_scale_pairing(&w2, dx, 1.0, &test, q, None).unwrap().value;
        let pc = two_scale_pairing(&combo, dx, 1.0, &test, q, None).unwrap().value;
        assert!((pc - (alpha * p1 + p2)).norm() < 1e-12);

        // Swapping field and test conjugates the pairing: realize the test
        // function as a field on the same grid.
        let test_field: Vec<Complex64> =
            (0..=n + 1).map(|j| test.eval(j as f64 * dx, q, 1.0)).collect();
        let w_as_micro = PeriodicFunction::constant(1.0, 8);
        // pairing(testfield, w1-as-test) with w1 = envelope-only field is
        // checked through the plain trapezoid identity instead:
        let direct: Complex64 = {
            let mut acc = Complex64::ZERO;
            for (j, (a, b)) in test_field.iter().zip(&w1).enumerate() {
                let weight = if j == 0 || j == n + 1 { 0.5 } else { 1.0 };
                acc += weight * a * b.conj();
            }
            acc * dx
        };
        let _ = w_as_micro;
        assert!((p1.conj() - direct).norm() < 1e-12);
    }
}
