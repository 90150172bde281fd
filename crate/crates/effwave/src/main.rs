use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};

use effwave::bands::{compute_band_structure, locate_critical_point, symmetric_grid};
use effwave::config::{parse_config, RunConfig};
use effwave::error::{Error, Result};
use effwave::harness::{build_model_from_candidates, convergence_sweep, well_prepared_initial, HomGrid};
use effwave::plot::emit_plot_data;
use effwave::report::{trajectory_csv, write_named, write_report, BandsExport, RunReport};
use effwave::spde::{integrate_eps, integrate_homogenized, mass_diagnostics, EpsProblem};
use effwave::wiener::sample_wiener_path;
use num_complex::Complex64;

/// Bloch-band and effective-wave toolkit for Schrödinger equations with a
/// strong periodic potential and scalar white noise.
#[derive(Parser)]
#[command(name = "effwave", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed override for all stochastic stages.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel cells (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,

    /// Run this stage instead of the subcommand's.
    #[arg(long, global = true, value_enum)]
    stage: Option<Stage>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sweep the Bloch parameter and export the band structure.
    Bands,
    /// Locate and characterize the critical point of the selected band.
    Critical,
    /// Solve the corrector problems and report the curvature consistency.
    Correctors,
    /// Assemble the homogenized coefficients.
    Effective,
    /// Integrate one fast problem (first epsilon, replica 0).
    SimulateEps,
    /// Integrate the homogenized problem on the same path.
    SimulateHomog,
    /// Full epsilon sweep with Monte Carlo averaging.
    Converge,
    /// Everything: bands, critical point, correctors, effective model,
    /// convergence sweep.
    All,
}

#[derive(ValueEnum, Clone, Copy)]
enum Stage {
    Bands,
    Critical,
    Correctors,
    Effective,
    SimulateEps,
    SimulateHomog,
    Converge,
    All,
}

impl From<Stage> for Command {
    fn from(stage: Stage) -> Self {
        match stage {
            Stage::Bands => Command::Bands,
            Stage::Critical => Command::Critical,
            Stage::Correctors => Command::Correctors,
            Stage::Effective => Command::Effective,
            Stage::SimulateEps => Command::SimulateEps,
            Stage::SimulateHomog => Command::SimulateHomog,
            Stage::Converge => Command::Converge,
            Stage::All => Command::All,
        }
    }
}

struct Context {
    config: RunConfig,
    seed: u64,
    out_dir: PathBuf,
    quiet: bool,
}

impl Context {
    fn log(&self, message: &str) {
        if !self.quiet {
            eprintln!("[effwave] {message}");
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        configure_threads(threads);
    }
    let config_path = cli.config.ok_or_else(|| Error::Config {
        path: "--config".into(),
        message: "a JSON configuration file is required".into(),
    })?;
    let text = std::fs::read_to_string(&config_path)
        .map_err(|e| Error::Io { path: config_path.display().to_string(), source: e })?;
    let config = parse_config(&text)?;
    let out_dir = cli
        .out
        .or_else(|| config.output_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&config.scenario));
    let seed = cli.seed.unwrap_or(config.numerics.seed);
    let ctx = Context { config, seed, out_dir, quiet: cli.quiet };

    let command = cli.stage.map(Command::from).unwrap_or(cli.command);
    let started_at = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default().as_secs();
    let timer = Instant::now();

    let mut report = RunReport { scenario: ctx.config.scenario.clone(), ..Default::default() };
    match command {
        Command::Bands => stage_bands(&ctx, &mut report)?,
        Command::Critical => stage_critical(&ctx, &mut report)?,
        Command::Correctors => stage_correctors(&ctx, &mut report)?,
        Command::Effective => stage_effective(&ctx, &mut report)?,
        Command::SimulateEps => stage_simulate(&ctx, &mut report, false)?,
        Command::SimulateHomog => stage_simulate(&ctx, &mut report, true)?,
        Command::Converge => stage_converge(&ctx, &mut report)?,
        Command::All => {
            stage_bands(&ctx, &mut report)?;
            stage_critical(&ctx, &mut report)?;
            stage_correctors(&ctx, &mut report)?;
            stage_effective(&ctx, &mut report)?;
            stage_converge(&ctx, &mut report)?;
        }
    }

    let written = write_report(
        &report,
        &ctx.config,
        ctx.seed,
        &ctx.out_dir,
        started_at,
        timer.elapsed().as_secs_f64(),
    )?;
    let (plots, notices) = emit_plot_data(&report, &ctx.out_dir)?;
    for notice in notices {
        ctx.log(&notice);
    }
    for path in written.iter().chain(&plots) {
        ctx.log(&format!("wrote {}", path.display()));
    }
    Ok(())
}

fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

fn stage_bands(ctx: &Context, report: &mut RunReport) -> Result<()> {
    let cfg = &ctx.config;
    ctx.log(&format!(
        "bands: {} grid points, {} bands, K = {}",
        cfg.numerics.theta_grid, cfg.numerics.n_bands, cfg.numerics.k_max
    ));
    let grid = symmetric_grid(cfg.numerics.theta_grid);
    let bands = compute_band_structure(
        &cfg.sigma_fn()?,
        &cfg.c_fn()?,
        &grid,
        cfg.numerics.n_bands,
        cfg.numerics.k_max,
        false,
    )?;
    report.bands = Some(BandsExport { theta: bands.theta_grid, bands: bands.bands });
    Ok(())
}

fn stage_critical(ctx: &Context, report: &mut RunReport) -> Result<()> {
    let cfg = &ctx.config;
    let sigma = cfg.sigma_fn()?;
    let c = cfg.c_fn()?;
    let grid = symmetric_grid(cfg.numerics.theta_grid);
    let structure = compute_band_structure(
        &sigma,
        &c,
        &grid,
        cfg.numerics.n_bands.max(cfg.band.n + 1),
        cfg.numerics.k_max,
        false,
    )?;
    let theta_init = cfg.band.theta_candidates.first().copied().unwrap_or(0.0);
    let cp =
        locate_critical_point(&sigma, &c, &structure, cfg.band.n, theta_init, &cfg.search())?;
    ctx.log(&format!(
        "critical point: band {} at theta = {} (lambda = {:.6}, curvature = {:.6}, simple = {})",
        cp.n, cp.theta, cp.lambda, cp.lambda_pp_fd, cp.simple
    ));
    report.critical = Some(cp);
    Ok(())
}

fn stage_correctors(ctx: &Context, report: &mut RunReport) -> Result<()> {
    let sweep = ctx.config.to_sweep_config(Some(ctx.seed))?;
    let model = build_model_from_candidates(&sweep)?;
    let corr = model.corrector_report();
    ctx.log(&format!(
        "correctors: sigma* = {:.8}, curvature ratio deviation = {:.3e}",
        corr.sigma_star_formula,
        corr.sigma_star_ratio - 1.0
    ));
    report.correctors = Some(corr);
    Ok(())
}

fn stage_effective(ctx: &Context, report: &mut RunReport) -> Result<()> {
    let sweep = ctx.config.to_sweep_config(Some(ctx.seed))?;
    let model = build_model_from_candidates(&sweep)?;
    let n_export = match sweep.hom_grid {
        HomGrid::Coarse(n) => n,
        HomGrid::Match => 255,
    };
    let dx = sweep.domain_len / (n_export + 1) as f64;
    let x_grid: Vec<f64> = (1..=n_export).map(|j| j as f64 * dx).collect();
    let export = model.export(&x_grid)?;
    ctx.log(&format!(
        "effective model: sigma* = {:.8}, g* = {:.8}, lambda = {:.8}",
        export.sigma_star, export.g_star, export.lambda_n
    ));
    report.effective = Some(export);
    Ok(())
}

fn stage_simulate(ctx: &Context, report: &mut RunReport, homogenized: bool) -> Result<()> {
    let cfg = &ctx.config;
    let sweep = cfg.to_sweep_config(Some(ctx.seed))?;
    let model = build_model_from_candidates(&sweep)?;
    let q = *sweep.cells_list.first().expect("validated epsilon list");
    let cells_in_domain = (sweep.domain_len * q as f64).round() as usize;
    let n_eps = sweep.points_per_cell * cells_in_domain - 1;
    let path = sample_wiener_path(sweep.t_final, sweep.dt, sweep.seed, 0)?;
    let snaps: Vec<f64> = {
        let steps = (sweep.t_final / sweep.dt).round() as usize;
        let count = sweep.n_snapshots.max(2);
        (0..count).map(|i| ((i * steps) / (count - 1)) as f64 * sweep.dt).collect()
    };

    let traj = if homogenized {
        let n_hom = match sweep.hom_grid {
            HomGrid::Match => n_eps,
            HomGrid::Coarse(n) => n,
        };
        let dx = sweep.domain_len / (n_hom + 1) as f64;
        let v0: Vec<Complex64> = (1..=n_hom)
            .map(|j| Complex64::new(sweep.v0.eval(j as f64 * dx, sweep.domain_len), 0.0))
            .collect();
        integrate_homogenized(&model, &path, &v0, sweep.dt, n_hom, &snaps)?
    } else {
        let dx = sweep.domain_len / (n_eps + 1) as f64;
        let x_grid: Vec<f64> = (1..=n_eps).map(|j| j as f64 * dx).collect();
        let v0 = well_prepared_initial(&model.psi.psi, q, &sweep.v0, &x_grid, sweep.domain_len)?;
        let problem = EpsProblem {
            domain_len: sweep.domain_len,
            t_final: sweep.t_final,
            cells_per_unit: q,
            sigma: sweep.sigma.clone(),
            c: sweep.c.clone(),
            d: sweep.d.clone(),
            noise: sweep.noise.clone(),
            theta_n: model.theta_n,
            lambda_n: model.lambda_n,
            n_interior: n_eps,
            dt: sweep.dt,
            use_discrete_shift: sweep.use_discrete_shift,
        };
        integrate_eps(&problem, &path, &v0, &snaps)?
    };

    let label = if homogenized { "homogenized" } else { "fast" };
    ctx.log(&format!(
        "{label} run: {} nodes, {} steps, final mass {:.6}",
        traj.x_grid.len(),
        path.n_steps(),
        traj.mass.last().unwrap()
    ));
    let diag = mass_diagnostics(&traj, Some(&path));
    let name = if homogenized { "trajectory_homog.csv" } else { "trajectory_eps.csv" };
    write_named(&ctx.out_dir, name, &trajectory_csv(&traj))?;
    let mut mass_text = String::from("t,mass,predicted,residual\n");
    for (i, t) in diag.times.iter().enumerate() {
        mass_text.push_str(&format!(
            "{},{},{},{}\n",
            t, diag.observed[i], diag.predicted[i], diag.residual[i]
        ));
    }
    write_named(&ctx.out_dir, "mass.csv", &mass_text)?;
    report.effective = Some(model.export(&traj.x_grid)?);
    Ok(())
}

fn stage_converge(ctx: &Context, report: &mut RunReport) -> Result<()> {
    let sweep = ctx.config.to_sweep_config(Some(ctx.seed))?;
    ctx.log(&format!(
        "converge: {} epsilon values, {} replicas, T = {}, dt = {}",
        sweep.cells_list.len(),
        sweep.replicas,
        sweep.t_final,
        sweep.dt
    ));
    let conv = convergence_sweep(&sweep)?;
    for eps in &conv.eps_reports {
        ctx.log(&format!(
            "eps = {:.5}: sup error {:.6e} +- {:.1e} ({} replicas{})",
            eps.eps,
            eps.sup_mean,
            eps.sup_stderr,
            eps.replicas_completed,
            if eps.failures.is_empty() {
                String::new()
            } else {
                format!(", {} failed", eps.failures.len())
            }
        ));
    }
    ctx.log(&format!("monotone decrease: {}", conv.monotone));
    report.convergence = Some(conv);
    Ok(())
}
