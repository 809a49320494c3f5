use clap::{Args, Parser, Subcommand, ValueEnum};
use solmanifold_core::experiments::{self, DataFamily, ExperimentConfig, ExperimentKind, ExperimentReport};
use solmanifold_core::families::gaussian;
use solmanifold_core::modulation::{
    evolve_nonlinear, shoot_h, FlowMode, ManifoldQuery, ModulationTrajectory, NonlinearOptions, PicardContext, ShootOptions,
};
use solmanifold_core::norms::{mixed_norm, NormReport, SpaceNorm, TimeNorm};
use solmanifold_core::soliton::phi;
use solmanifold_core::{ground_state, ground_state_at, Error, RadialField, RadialGrid};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "solmanifold", version, about = "Soliton stability experiments for the radial quintic wave equation in 3D")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides output_dir in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweep points.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ground state of the linearized operator.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long = "R", default_value_t = 50.0)]
        radius: f64,
        #[arg(long, default_value_t = 8001)]
        n: usize,
        /// Soliton scales.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 4.0])]
        a: Vec<f64>,
    },
    /// Nonlinear evolution from ψ₀ = λφ, ψ₁ = 0.
    Evolve {
        #[command(flatten)]
        common: Common,
        #[arg(long = "R", default_value_t = 40.0)]
        radius: f64,
        #[arg(long, default_value_t = 1601)]
        n: usize,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "T", default_value_t = 20.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.9)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = Flow::Raw)]
        mode: Flow,
    },
    /// Manifold offset h and the modulated trajectory for ε-sized data.
    Manifold {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, value_enum, default_value_t = Fam::Bump)]
        family: Fam,
        #[arg(long = "R", default_value_t = 40.0)]
        radius: f64,
        #[arg(long, default_value_t = 1601)]
        n: usize,
        #[arg(long = "T", default_value_t = 20.0)]
        horizon: f64,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, value_enum, default_value_t = Method::Both)]
        method: Method,
    },
    /// Reverse Strichartz norms over a seeded family.
    Strichartz {
        #[command(flatten)]
        common: Common,
        #[arg(long = "R")]
        radius: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long, value_enum)]
        family: Option<Fam>,
        #[arg(long, value_enum, default_value_t = Mode::Free)]
        mode: Mode,
    },
    /// Run any experiment; without --config, the default for --experiment.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        experiment: Option<String>,
    },
    /// Static checks of a config without running it.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Flow {
    Raw,
    Perturbative,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fam {
    Ball,
    Bump,
    Phi5,
    Random,
}

impl From<Fam> for DataFamily {
    fn from(f: Fam) -> Self {
        match f {
            Fam::Ball => DataFamily::Ball,
            Fam::Bump => DataFamily::Bump,
            Fam::Phi5 => DataFamily::Phi5,
            Fam::Random => DataFamily::Random,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Method {
    Shoot,
    Picard,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Free,
    Perturbed,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Usage(m) => Failure::Usage(m),
            Error::Config { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn load(common: &Common, fallback: impl FnOnce() -> ExperimentConfig) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => fallback(),
    };
    if let Some(o) = &common.out {
        cfg.output_dir = Some(o.clone());
    }
    if common.workers.is_some() {
        cfg.workers = common.workers;
    }
    Ok(cfg)
}

fn expect_kind(cfg: &ExperimentConfig, allowed: &[ExperimentKind], sub: &str) -> Result<(), Failure> {
    if allowed.contains(&cfg.experiment) {
        Ok(())
    } else {
        Err(Failure::Usage(format!("experiment `{}` cannot run under `{sub}`", cfg.experiment.name())))
    }
}

fn finish(report: ExperimentReport) -> bool {
    print!("{}", report.summary());
    report.passed
}

fn dispatch(cmd: Cmd) -> Result<bool, Failure> {
    match cmd {
        Cmd::Spectrum { common, radius, n, a } => {
            if common.config.is_some() {
                let cfg = load(&common, || unreachable!())?;
                expect_kind(&cfg, &[ExperimentKind::Spectrum], "spectrum")?;
                return Ok(finish(experiments::run(&cfg)?));
            }
            let grid = RadialGrid::new(radius, n)?;
            let mut rows = Vec::new();
            for &scale in &a {
                let s = ground_state_at(&grid, scale)?;
                println!(
                    "a = {scale}: k = {:.12}, residual = {:.3e}, negative eigenvalues = {}, ⟨g,∂ₐφ⟩ = {:.3e}, c_Q = {:.10}",
                    s.k,
                    s.residual,
                    s.negative_count,
                    s.overlap_g_resonance(),
                    s.c_q()
                );
                rows.push(serde_json::json!({
                    "a": scale, "k": s.k, "residual": s.residual, "negative_count": s.negative_count,
                    "overlap": s.overlap_g_resonance(), "c_q": s.c_q(), "pairing_v_dadphi": s.pairing_v_dadphi,
                }));
                if let Some(dir) = &common.out {
                    write(dir, &format!("g_a{scale}.csv"), &s.g.to_csv())?;
                }
            }
            if let Some(dir) = &common.out {
                write(dir, "spectrum.json", &serde_json::to_string_pretty(&rows).unwrap())?;
            }
            Ok(true)
        }
        Cmd::Evolve { common, radius, n, dt, horizon, lambda, mode } => {
            if common.config.is_some() {
                let cfg = load(&common, || unreachable!())?;
                expect_kind(&cfg, &[ExperimentKind::Stationarity, ExperimentKind::EnergyConservation], "evolve")?;
                return Ok(finish(experiments::run(&cfg)?));
            }
            let grid = RadialGrid::new(radius, n)?;
            let dt = dt.unwrap_or(grid.dr());
            let steps = (horizon / dt).round() as usize;
            let opts = NonlinearOptions {
                mode: match mode {
                    Flow::Raw => FlowMode::Raw,
                    Flow::Perturbative => FlowMode::Perturbative,
                },
                energy: true,
                stride: (steps / 400).max(1),
                ..Default::default()
            };
            let s = ground_state(&grid)?;
            let psi0 = RadialField::from_fn(grid, |r| lambda * phi(r, 1.0).unwrap_or(0.0));
            let run = evolve_nonlinear(&psi0, &RadialField::zeros(grid), horizon, dt, Some(&s), opts)?;
            let e0 = run.energy.first().copied().unwrap_or(f64::NAN);
            let drift = run.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0.abs();
            println!("exit: {:?}; E(0) = {e0:.12}; max relative drift = {drift:.3e}", run.exit);
            if let Some(dir) = &common.out {
                let sdt = dt * opts.stride as f64;
                let mut csv = String::from("t,energy,g_overlap\n");
                for (i, e) in run.energy.iter().enumerate() {
                    let m = (i * opts.stride).min(run.g_overlap.len() - 1);
                    csv.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", i as f64 * sdt, e, run.g_overlap[m]));
                }
                write(dir, "evolve.csv", &csv)?;
            }
            Ok(true)
        }
        Cmd::Manifold { common, eps, family, radius, n, horizon, dt, method } => {
            if common.config.is_some() {
                let cfg = load(&common, || unreachable!())?;
                expect_kind(
                    &cfg,
                    &[
                        ExperimentKind::HScaling,
                        ExperimentKind::Codim1,
                        ExperimentKind::Lipschitz,
                        ExperimentKind::Contraction,
                        ExperimentKind::AdotL1,
                        ExperimentKind::WeightedGrowth,
                    ],
                    "manifold",
                )?;
                return Ok(finish(experiments::run(&cfg)?));
            }
            let eps = eps.ok_or_else(|| Failure::Usage("--eps is required without --config".into()))?;
            manifold(&common, eps, family, radius, n, horizon, dt, method)
        }
        Cmd::Strichartz { common, radius, n, dt, horizon, family, mode } => {
            let kind = match mode {
                Mode::Free => ExperimentKind::StrichartzFree,
                Mode::Perturbed => ExperimentKind::StrichartzPerturbed,
            };
            let mut cfg = load(&common, || ExperimentConfig::default_for(kind))?;
            expect_kind(&cfg, &[ExperimentKind::StrichartzFree, ExperimentKind::StrichartzPerturbed], "strichartz")?;
            if let Some(r) = radius {
                cfg.grid.radius = r;
            }
            if let Some(n) = n {
                cfg.grid.n = n;
            }
            if dt.is_some() {
                cfg.time.dt = dt;
            }
            if let Some(t) = horizon {
                cfg.time.horizon = t;
                cfg.time.r_obs = t;
            }
            if let Some(f) = family {
                cfg.data_family.family = f.into();
            }
            Ok(finish(experiments::run(&cfg)?))
        }
        Cmd::Sweep { common, experiment } => {
            let cfg = match (&common.config, experiment) {
                (Some(_), _) => load(&common, || unreachable!())?,
                (None, Some(e)) => {
                    let kind: ExperimentKind = e.parse()?;
                    load(&common, || ExperimentConfig::default_for(kind))?
                }
                (None, None) => return Err(Failure::Usage("sweep needs --config or --experiment".into())),
            };
            Ok(finish(experiments::run(&cfg)?))
        }
        Cmd::Validate { common } => {
            let path = common.config.clone().ok_or_else(|| Failure::Usage("validate needs --config".into()))?;
            let cfg = ExperimentConfig::load(&path)?;
            let bad = experiments::validate(&cfg);
            if bad.is_empty() {
                println!("{}: runnable", path.display());
                Ok(true)
            } else {
                for v in &bad {
                    println!("{v}");
                }
                Err(Failure::Usage(format!("{} violation(s)", bad.len())))
            }
        }
    }
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(dir.join(name), body))
        .map_err(|e| Failure::Run(format!("{}: {e}", dir.display())))
}

#[allow(clippy::too_many_arguments)]
fn manifold(
    common: &Common,
    eps: f64,
    family: Fam,
    radius: f64,
    n: usize,
    horizon: f64,
    dt: Option<f64>,
    method: Method,
) -> Result<bool, Failure> {
    let grid = RadialGrid::new(radius, n)?;
    let dt = dt.unwrap_or(grid.dr());
    if radius < horizon + 1.0 {
        return Err(Failure::Usage(format!("grid.R = {radius} must be at least T + 1 = {}", horizon + 1.0)));
    }
    let s = ground_state(&grid)?;
    let zero = RadialField::zeros(grid);
    let (u0, u1) = match family {
        Fam::Bump => (s.project_continuous(&gaussian(grid, 1.0, 1.0))?.scale(eps), zero),
        Fam::Ball => (s.project_continuous(&RadialField::from_fn(grid, |r| if r <= 1.0 { 1.0 } else { 0.0 }))?.scale(eps), zero),
        Fam::Phi5 => (zero, RadialField::from_fn(grid, |r| eps * phi(r, 1.0).unwrap_or(0.0).powi(5))),
        Fam::Random => {
            let b = solmanifold_core::families::random_bumps(grid, 2, 20240601, 3.0, 0.5, 1.5);
            (s.project_continuous(&b[0])?.scale(eps), b[1].scale(eps))
        }
    };
    let q = ManifoldQuery::new(u0, u1, &s)?;
    println!("data norm ‖(ψ₀−φ, ψ₁)‖ = {:.6e}; constraint residual = {:.3e}", q.epsilon, q.constraint_residual(&s)?);
    let mut reports = Vec::new();
    let mut norms = Vec::new();
    if method != Method::Picard {
        let mut o = ShootOptions::new(horizon, dt);
        o.tol = Some(1e-12 * eps);
        let sh = shoot_h(&q, &s, &o)?;
        println!("shoot:  h = {:+.12e} (bracket {:.2e}, {} bisections)", sh.h, sh.bracket_width, sh.iterations);
        reports.push(serde_json::json!({"method": "shoot", "h": sh.h, "bracket_width": sh.bracket_width, "tail_bound": null}));
    }
    if method != Method::Shoot {
        let ctx = PicardContext::new(&s, q.clone(), horizon, dt, 10.0_f64.min(radius - horizon))?;
        let sol = ctx.solve(1e-9 * eps, 20)?;
        println!("picard: h = {:+.12e} (tail bound {:.2e}, {} iterations)", sol.h, sol.tail_bound, sol.distances.len());
        reports.push(serde_json::json!({"method": "picard", "h": sol.h, "bracket_width": null, "tail_bound": sol.tail_bound}));
        let traj = ModulationTrajectory::from_picard(&sol, &s, 0)?;
        let u = &sol.state.u;
        let ball = u.restrict(grid.ball_len(ctx.r_obs))?;
        for (space, time, name) in
            [(SpaceNorm::Lorentz { p: 6.0, q: 2.0 }, TimeNorm::Sup, "L^{6,2}_x L^inf_t"), (SpaceNorm::Sup, TimeNorm::L2, "L^inf_x L^2_t")]
        {
            let r = NormReport::of(name, mixed_norm(&ball, space, time)?, &ball);
            println!("‖u‖ {name} on B = {:.6e}", r.value);
            norms.push(r);
        }
        println!("‖ȧ‖_L¹ = {:.6e}, ‖ȧ‖_∞ = {:.6e}", traj.adot_l1(), traj.adot_sup());
        if let Some(dir) = &common.out {
            write(dir, "trajectory.csv", &traj.to_csv())?;
        }
    }
    if let Some(dir) = &common.out {
        write(dir, "h_report.json", &serde_json::to_string_pretty(&reports).unwrap())?;
        write(dir, "norms.json", &serde_json::to_string_pretty(&norms).unwrap())?;
    }
    Ok(true)
}
