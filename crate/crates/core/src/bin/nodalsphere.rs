use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nodalsphere::diagnostics::{certify_original, decay_fit, peak_admissibility, R_EXCL};
use nodalsphere::energy::{coercivity_check, descent_direction_check, psi_surface, EnergyFunctional};
use nodalsphere::error::{Error, Result};
use nodalsphere::geometry::{validate_config, ProblemConfig, RawConfig};
use nodalsphere::grid::ReducedField;
use nodalsphere::harness::{default_eps_list, emit_plot_data, report_from_files, run_sweep, write_solution, CachePolicy, SweepPlan};
use nodalsphere::limit::{aux_potential, build_ground_energy_table, compute_aux_potential, table_for_config, GroundProfile, RadialParams};
use nodalsphere::nonlinearity::{verify_penalization, PenalizedNonlinearity};
use nodalsphere::solver::{default_centres, solve_nodal, DescentOptions, NodalSolution};

#[derive(Parser, Debug)]
#[command(name = "nodalsphere", version, about = "Sign-changing standing waves concentrating on spheres")]
struct Cli {
    /// Problem configuration (key = value); the built-in default when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check every hypothesis on the configuration.
    Validate,
    /// Tabulate the constraint violations of the penalized nonlinearity.
    CheckNonlinearity {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.2, 0.1])]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
    },
    /// Ground energies E(a) of the limit problem.
    GroundEnergy {
        /// Values of a; defaults to the range of V over the region.
        #[arg(long, value_delimiter = ',')]
        a: Vec<f64>,
        #[command(flatten)]
        radial: RadialArgs,
    },
    /// Auxiliary potential M over the region and its minimizer.
    AuxPotential {
        #[command(flatten)]
        radial: RadialArgs,
    },
    /// One nodal solve.
    Solve {
        #[arg(long)]
        eps: f64,
        /// Prefix for the .csv/.bin/.json outputs (default OUT/solution_eps<eps>).
        #[arg(long)]
        out_prefix: Option<PathBuf>,
        #[arg(long, default_value_t = 20_000)]
        max_iters: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol_grad: f64,
    },
    /// Concentration report from saved solution fields (.bin).
    Report {
        #[arg(required = true)]
        solutions: Vec<PathBuf>,
    },
    /// The full eps sweep.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
        /// Disable the solve cache.
        #[arg(long)]
        no_cache: bool,
    },
    /// psi(t, s) surface, coercivity and descent-direction checks.
    NehariDiagnostics(NehariArgs),
}

#[derive(Args, Debug)]
struct RadialArgs {
    #[arg(long, default_value_t = 0.01)]
    radial_h: f64,
    #[arg(long, default_value_t = 20.0)]
    radial_r_max: f64,
}

impl RadialArgs {
    fn params(&self) -> RadialParams {
        RadialParams { h: self.radial_h, r_max: self.radial_r_max }
    }
}

#[derive(Args, Debug)]
struct NehariArgs {
    #[arg(long)]
    eps: f64,
    /// Start from this saved field instead of solving.
    #[arg(long)]
    solution: Option<PathBuf>,
    #[arg(long, default_value_t = 41)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.5])]
    window: Vec<f64>,
}

fn load_config(path: Option<&Path>) -> Result<ProblemConfig> {
    let raw = match path {
        Some(p) => RawConfig::from_file(p)?,
        None => RawConfig::desk_default(),
    };
    validate_config(raw)
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn pretty(value: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn run(cli: Cli) -> Result<u8> {
    let out = cli.out.as_path();
    let cache = CachePolicy::from_env(out);
    let cache_dir = match &cache {
        CachePolicy::Dir(d) => Some(d.as_path()),
        CachePolicy::Off => None,
    };
    if cli.jobs > 0 {
        // ignore the error when a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    }
    match cli.command {
        Command::Validate => {
            let config = load_config(cli.config.as_deref())?;
            println!("configuration valid");
            println!("{}", config.to_raw().to_config_text().trim_end());
        }
        Command::CheckNonlinearity { eps, samples } => {
            let config = load_config(cli.config.as_deref())?;
            let mut worst: f64 = 0.0;
            for e in eps {
                let pn = PenalizedNonlinearity::from_config(e, &config)?;
                let report = verify_penalization(&pn, samples);
                write(&out.join(format!("nonlinearity_eps{e}.csv")), &report.to_csv())?;
                println!("eps = {e}: delta = {:e}, r_eps = {:e}", pn.delta, pn.r_eps);
                for row in &report.rows {
                    if row.arg_max.is_finite() {
                        println!("  {:<30} {:>12.3e} at s = {:.3e}", row.constraint, row.max_violation, row.arg_max);
                    } else {
                        println!("  {:<30} {:>12.3e}", row.constraint, row.max_violation);
                    }
                }
                worst = worst.max(report.max_violation());
            }
            if worst > 1e-12 {
                return Ok(2);
            }
        }
        Command::GroundEnergy { a, radial } => {
            let config = load_config(cli.config.as_deref())?;
            let table = if a.is_empty() {
                table_for_config(&config, radial.params(), cache_dir)?
            } else {
                build_ground_energy_table(&a, config.limit_dim(), config.p, radial.params())?
            };
            write(&out.join("ground_energy.csv"), &table.to_csv())?;
            print!("{}", table.to_csv());
        }
        Command::AuxPotential { radial } => {
            let config = load_config(cli.config.as_deref())?;
            let table = table_for_config(&config, radial.params(), cache_dir)?;
            let map = compute_aux_potential(&config, &table);
            write(&out.join("aux_potential.csv"), &map.to_csv())?;
            let summary = pretty(&map.summary_json())?;
            write(&out.join("aux_potential.json"), &summary)?;
            println!("{summary}");
            aux_potential(&config, &table)?;
        }
        Command::Solve { eps, out_prefix, max_iters, tol_grad } => {
            let config = load_config(cli.config.as_deref())?;
            let (f, sol) = solve_at(&config, eps, max_iters, tol_grad, cache_dir)?;
            let prefix = out_prefix.unwrap_or_else(|| out.join(format!("solution_eps{eps}")));
            write_solution(&sol, &prefix)?;
            print_solution(&f, &sol, &config);
            if !sol.converged {
                return Ok(2);
            }
        }
        Command::Report { solutions } => {
            let config = load_config(cli.config.as_deref())?;
            let (report, sols) = report_from_files(&config, &solutions, RadialParams::default(), cache_dir)?;
            write(&out.join("concentration.csv"), &report.to_csv())?;
            write(&out.join("trends.json"), &pretty(&report.trend_json())?)?;
            let refs: Vec<&NodalSolution> = sols.iter().collect();
            emit_plot_data(&report, &refs, out)?;
            print!("{}", report.to_csv());
        }
        Command::Sweep { eps, no_cache } => {
            let raw = match cli.config.as_deref() {
                Some(p) => RawConfig::from_file(p)?,
                None => RawConfig::desk_default(),
            };
            let eps_list = if eps.is_empty() { default_eps_list() } else { eps };
            let mut plan = SweepPlan::new(raw, eps_list, out);
            plan.config_path = cli.config.clone();
            plan.jobs = cli.jobs;
            if no_cache {
                plan.cache = CachePolicy::Off;
            }
            let outcome = run_sweep(&plan)?;
            for s in &outcome.statuses {
                let state = if s.ok { "ok" } else { "FAILED" };
                let cached = if s.cached { " (cached)" } else { "" };
                println!("eps = {:<6} {state}{cached} {}", s.eps, s.error.clone().unwrap_or_default());
            }
            if let Some(v) = outcome.summary.get("verdicts") {
                println!("verdicts: {}", serde_json::to_string(v)?);
            }
            println!("solves performed: {}", outcome.solves_performed);
            return Ok(outcome.exit_code as u8);
        }
        Command::NehariDiagnostics(args) => {
            let config = load_config(cli.config.as_deref())?;
            let f = EnergyFunctional::new(&config, args.eps)?;
            let field = match &args.solution {
                Some(path) => {
                    let loaded = ReducedField::read_binary(path)?;
                    if *loaded.grid != *f.grid {
                        return Err(Error::Format { path: path.clone(), message: "grid does not match the configuration".into() });
                    }
                    f.field(loaded.values)
                }
                None => solve_at(&config, args.eps, 20_000, 1e-7, cache_dir)?.1.field,
            };
            let proj = f.nodal_nehari_project(&field)?;
            if args.window.len() != 2 {
                return Err(Error::Usage("--window takes two values".into()));
            }
            let range = (args.window[0], args.window[1]);
            let surface = psi_surface(&f, &proj.field, range, range, args.n)?;
            write(&out.join("psi_surface.csv"), &surface.to_csv())?;
            let (_, on_nehari) = f.scalar_nehari_project(&proj.field)?;
            let coercivity = coercivity_check(&f, &on_nehari, &config);
            let descent = descent_direction_check(&f, &proj.field.scaled(1.5))?;
            let summary = serde_json::json!({
                "argmax": surface.argmax,
                "hessian": surface.hessian,
                "residuals": surface.residuals,
                "projection": { "t": proj.t, "s": proj.s },
                "coercivity": coercivity,
                "descent_direction": descent,
            });
            let text = pretty(&summary)?;
            write(&out.join("nehari_diagnostics.json"), &text)?;
            println!("{text}");
        }
    }
    Ok(0)
}

fn solve_at(config: &ProblemConfig, eps: f64, max_iters: usize, tol_grad: f64, cache_dir: Option<&Path>) -> Result<(EnergyFunctional, NodalSolution)> {
    let radial = RadialParams::default();
    let table = table_for_config(config, radial, cache_dir)?;
    let aux = aux_potential(config, &table)?;
    let profile = GroundProfile::for_dimension(config.limit_dim(), config.p, radial)?;
    let (z1, z2) = default_centres(config, &aux.x0);
    let opts = DescentOptions { max_iters, tol_grad, ..DescentOptions::default() };
    solve_nodal(config, eps, &profile, (&z1, &z2), &opts)
}

fn print_solution(f: &EnergyFunctional, sol: &NodalSolution, config: &ProblemConfig) {
    let s = sol.summary();
    println!("eps = {}  converged = {}  iterations = {}", s.eps, s.converged, s.iterations);
    println!("d_eps = {:.10e}  eps^k d_eps = {:.10e}", s.d_eps, s.eps_k_d_eps);
    println!("residuals: pde = {:.3e}, nehari = ({:.3e}, {:.3e})", s.residuals.pde, s.residuals.nehari_plus, s.residuals.nehari_minus);
    println!("P1: r = {:.6} (v = {:.6})   P2: r = {:.6} (v = {:.6})", s.p1.r, s.v_p1, s.p2.r, s.v_p2);
    let adm = peak_admissibility(sol, config);
    let cert = certify_original(sol, f, config);
    println!("peaks admissible: {}  certified: {} (margin {:.3e})", adm.pass, cert.certified, cert.margin);
    if let Ok(fit) = decay_fit(sol, R_EXCL) {
        println!("decay: beta = {:.4}, R^2 = {:.4}", fit.beta, fit.r_squared);
    }
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
