//! The eps-sweep pipeline: validate, ground energies, auxiliary potential,
//! per-eps solves (in parallel, cached), concentration report.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::{decay_fit, eps_record, ConcentrationReport, R_EXCL};
use crate::energy::EnergyFunctional;
use crate::error::{Error, Result};
use crate::geometry::{sphere_distance, ProblemConfig, RawConfig, SpherePoint};
use crate::grid::ReducedField;
use crate::limit::{aux_potential, table_for_config, AuxPotentialMap, GroundEnergyTable, GroundProfile, RadialParams};
use crate::solver::{default_centres, solve_nodal, DescentOptions, NodalSolution, SolveMeta};

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "NODALSPHERE_CACHE";

pub fn default_eps_list() -> Vec<f64> {
    vec![0.5, 0.4, 0.3, 0.2, 0.15, 0.1]
}

#[derive(Debug, Clone, PartialEq)]
pub enum CachePolicy {
    Off,
    Dir(PathBuf),
}

impl CachePolicy {
    /// `$NODALSPHERE_CACHE` if set, else `out_dir/cache`.
    pub fn from_env(out_dir: &Path) -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => CachePolicy::Dir(PathBuf::from(dir)),
            _ => CachePolicy::Dir(out_dir.join("cache")),
        }
    }

    fn dir(&self) -> Option<&Path> {
        match self {
            CachePolicy::Off => None,
            CachePolicy::Dir(d) => Some(d),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub config_path: Option<PathBuf>,
    pub raw: RawConfig,
    pub eps_list: Vec<f64>,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub cache: CachePolicy,
    pub descent: DescentOptions,
    pub radial: RadialParams,
}

impl SweepPlan {
    pub fn new(raw: RawConfig, eps_list: Vec<f64>, out_dir: impl Into<PathBuf>) -> Self {
        let out_dir = out_dir.into();
        Self {
            config_path: None,
            raw,
            eps_list,
            cache: CachePolicy::from_env(&out_dir),
            out_dir,
            jobs: 0,
            descent: DescentOptions::default(),
            radial: RadialParams::default(),
        }
    }

    /// Checks the eps sequence against the validated configuration.
    pub fn check(&self, config: &ProblemConfig) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::Usage("empty eps list".into()));
        }
        for w in self.eps_list.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Usage(format!("eps list must be strictly decreasing ({} then {})", w[0], w[1])));
            }
        }
        for &eps in &self.eps_list {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::Usage(format!("eps = {eps} outside (0, 1)")));
            }
            let slope = eps.powf(config.tau);
            if slope >= config.v0 {
                return Err(Error::Usage(format!("eps = {eps}: eps^tau = {slope} is not below V0 = {}", config.v0)));
            }
            let delta = eps.powf(config.tau / (config.nu - 1.0));
            if delta.powf(config.p - 1.0) >= slope {
                return Err(Error::Usage(format!("eps = {eps}: delta^(p-1) is not below eps^tau")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsStatus {
    pub eps: f64,
    pub ok: bool,
    pub cached: bool,
    pub converged: bool,
    pub error: Option<String>,
    pub files: Vec<String>,
}

pub struct SweepOutcome {
    pub config: ProblemConfig,
    pub table: GroundEnergyTable,
    pub aux: AuxPotentialMap,
    pub solutions: Vec<(EnergyFunctional, NodalSolution)>,
    pub statuses: Vec<EpsStatus>,
    pub report: Option<ConcentrationReport>,
    pub solves_performed: usize,
    pub exit_code: i32,
    pub summary: serde_json::Value,
}

const CACHE_FORMAT: &str = "nodal-solve-v1";

/// Key for one solve: digest of the canonical configuration, eps, and the
/// solver options.
pub fn cache_key(config: &ProblemConfig, eps: f64, descent: &DescentOptions, radial: &RadialParams) -> String {
    let mut hasher = Sha256::new();
    hasher.update(CACHE_FORMAT.as_bytes());
    hasher.update(config.to_raw().to_config_text().as_bytes());
    hasher.update(eps.to_le_bytes());
    hasher.update(serde_json::to_string(descent).unwrap_or_default().as_bytes());
    hasher.update(serde_json::to_string(radial).unwrap_or_default().as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn eps_tag(eps: f64) -> String {
    format!("eps_{eps}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn load_cached(dir: &Path, key: &str, config: &ProblemConfig, eps: f64) -> Option<(EnergyFunctional, NodalSolution)> {
    let field = ReducedField::read_binary(dir.join(format!("{key}.bin"))).ok()?;
    let meta: SolveMeta = serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{key}.json"))).ok()?).ok()?;
    let f = EnergyFunctional::new(config, eps).ok()?;
    if *f.grid != *field.grid {
        return None;
    }
    let field = f.field(field.values);
    let sol = NodalSolution::assemble(&f, config, field, meta).ok()?;
    Some((f, sol))
}

fn store_cached(dir: &Path, key: &str, sol: &NodalSolution) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    sol.field.write_binary(dir.join(format!("{key}.bin")))?;
    let meta = SolveMeta {
        iterations: sol.iterations,
        descent_converged: sol.descent_converged,
        energy_trace: sol.energy_trace.clone(),
        newton_history: sol.newton_history.clone(),
        warnings: sol.warnings.iter().filter(|w| !w.contains("outer boundary")).cloned().collect(),
    };
    write_text(&dir.join(format!("{key}.json")), &serde_json::to_string(&meta)?)
}

/// Writes the field (CSV and binary) and its JSON summary under `prefix`.
pub fn write_solution(sol: &NodalSolution, prefix: &Path) -> Result<Vec<String>> {
    if let Some(parent) = prefix.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let with_ext = |ext: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(ext);
        PathBuf::from(p)
    };
    let csv = with_ext(".csv");
    let bin = with_ext(".bin");
    let json = with_ext(".json");
    sol.field.write_csv(&csv)?;
    sol.field.write_binary(&bin)?;
    write_text(&json, &serde_json::to_string_pretty(&sol.summary())?)?;
    Ok([csv, bin, json].iter().map(|p| p.display().to_string()).collect())
}

fn solve_one(plan: &SweepPlan, config: &ProblemConfig, profile: &GroundProfile, x0: &SpherePoint, eps: f64) -> (EpsStatus, Option<(EnergyFunctional, NodalSolution)>, bool) {
    let key = cache_key(config, eps, &plan.descent, &plan.radial);
    let cache_dir = plan.cache.dir();
    let mut status = EpsStatus { eps, ok: false, cached: false, converged: false, error: None, files: Vec::new() };
    let mut performed = false;
    let solved = match cache_dir.and_then(|d| load_cached(d, &key, config, eps)) {
        Some(hit) => {
            status.cached = true;
            Ok(hit)
        }
        None => {
            performed = true;
            let (z1, z2) = default_centres(config, x0);
            solve_nodal(config, eps, profile, (&z1, &z2), &plan.descent)
        }
    };
    match solved {
        Ok((f, sol)) => {
            if performed {
                if let Some(d) = cache_dir {
                    if let Err(e) = store_cached(d, &key, &sol) {
                        status.error = Some(format!("cache write failed: {e}"));
                    }
                }
            }
            let prefix = plan.out_dir.join(eps_tag(eps)).join("solution");
            match write_solution(&sol, &prefix) {
                Ok(files) => status.files = files,
                Err(e) => status.error = Some(e.to_string()),
            }
            status.converged = sol.converged;
            status.ok = sol.converged && status.error.is_none();
            if !sol.converged && status.error.is_none() {
                status.error = Some(format!("not converged (PDE residual {:e})", sol.pde_residual_norm));
            }
            (status, Some((f, sol)), performed)
        }
        Err(e) => {
            status.error = Some(e.to_string());
            (status, None, performed)
        }
    }
}

/// Runs the whole pipeline. Configuration-level failures (rejected
/// hypotheses, (M1)) return `Err`; per-eps failures are recorded and the
/// remaining eps values still run.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepOutcome> {
    let config = crate::geometry::validate_config(plan.raw.clone())?;
    plan.check(&config)?;
    std::fs::create_dir_all(&plan.out_dir).map_err(|e| Error::io(&plan.out_dir, e))?;
    let table = table_for_config(&config, plan.radial, plan.cache.dir())?;
    let aux = aux_potential(&config, &table)?;
    let profile = GroundProfile::for_dimension(config.limit_dim(), config.p, plan.radial)?;

    let jobs = if plan.jobs == 0 { rayon::current_num_threads() } else { plan.jobs };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
    let results: Vec<_> = pool.install(|| {
        plan.eps_list
            .par_iter()
            .map(|&eps| solve_one(plan, &config, &profile, &aux.x0, eps))
            .collect()
    });

    let mut statuses = Vec::new();
    let mut solutions = Vec::new();
    let mut solves_performed = 0;
    for (status, sol, performed) in results {
        if performed {
            solves_performed += 1;
        }
        statuses.push(status);
        if let Some(s) = sol {
            solutions.push(s);
        }
    }

    let records: Vec<_> = solutions
        .iter()
        .filter(|(_, s)| s.converged)
        .filter_map(|(f, s)| eps_record(s, f, &config, aux.m0).ok())
        .collect();
    let report = if records.is_empty() {
        None
    } else {
        Some(ConcentrationReport::build(records, aux.x0.clone(), aux.m0, &config, &table)?)
    };
    if let Some(r) = &report {
        write_text(&plan.out_dir.join("concentration.csv"), &r.to_csv())?;
        let converged: Vec<&NodalSolution> = solutions.iter().map(|(_, s)| s).filter(|s| s.converged).collect();
        emit_plot_data(r, &converged, &plan.out_dir)?;
    }

    let n_ok = statuses.iter().filter(|s| s.ok).count();
    let exit_code = if n_ok == statuses.len() {
        0
    } else if n_ok == 0 {
        1
    } else {
        2
    };
    let summary = serde_json::json!({
        "config": config.to_raw().to_config_text(),
        "config_path": plan.config_path.as_ref().map(|p| p.display().to_string()),
        "eps_list": plan.eps_list,
        "stages": {
            "validate": "ok",
            "ground_energy": { "status": "ok", "m": table.m, "reference": table.reference, "sigma": table.sigma },
            "aux_potential": aux.summary_json(),
            "solves": statuses,
            "report": if report.is_some() { "ok" } else { "no converged solves" },
        },
        "solves_performed": solves_performed,
        "verdicts": report.as_ref().map(|r| serde_json::json!({
            "energy_scaling": r.scaling.pass,
            "peak_migration": r.migration.pass,
            "peak_gap_increasing": r.migration.gap_increasing,
            "decay_fit": r.decay_pass,
            "certification": r.certification.pass,
        })),
        "trends": report.as_ref().map(|r| r.trend_json()),
        "exit_code": exit_code,
    });
    write_text(&plan.out_dir.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    solutions.sort_by(|a, b| b.1.eps.partial_cmp(&a.1.eps).unwrap());
    Ok(SweepOutcome { config, table, aux, solutions, statuses, report, solves_performed, exit_code, summary })
}

/// Writes `ratio_vs_eps.csv`, `peak_radius_vs_eps.csv` and
/// `decay_profile.csv` (tail points of every solution used in the fits).
pub fn emit_plot_data(report: &ConcentrationReport, solutions: &[&NodalSolution], out_dir: &Path) -> Result<()> {
    let mut ratio = String::from("# eps, ratio = eps^k d_eps / (2 omega_k M0), |ratio - 1|\neps,ratio,deviation\n");
    for r in &report.records {
        ratio.push_str(&format!("{},{:.12e},{:.12e}\n", r.eps, r.ratio, (r.ratio - 1.0).abs()));
    }
    write_text(&out_dir.join("ratio_vs_eps.csv"), &ratio)?;

    let mut radius = String::from("# eps, radii |eps P1''| and |eps P2''| of the peaks, target radius r0\neps,r_p1,r_p2,r0\n");
    for r in &report.records {
        radius.push_str(&format!("{},{:.12e},{:.12e},{:.12e}\n", r.eps, r.p1.r, r.p2.r, report.x0.r));
    }
    write_text(&out_dir.join("peak_radius_vs_eps.csv"), &radius)?;

    let mut decay = String::from("# eps, d_k = scaled sphere distance to the nearest peak, log|v|; only |v| > 1e-12 and d_k > exclusion radius\neps,d_k,log_abs_v\n");
    for sol in solutions {
        if decay_fit(sol, R_EXCL).is_err() {
            continue;
        }
        let peaks = [sol.p1.scaled(1.0 / sol.eps), sol.p2.scaled(1.0 / sol.eps)];
        for (i, &v) in sol.field.values.iter().enumerate() {
            if v.abs() <= 1e-12 {
                continue;
            }
            let node = sol.field.grid.node_point(i);
            let d = peaks.iter().map(|p| sphere_distance(&node, p)).fold(f64::INFINITY, f64::min);
            if d > R_EXCL {
                decay.push_str(&format!("{},{:.12e},{:.12e}\n", sol.eps, d, v.abs().ln()));
            }
        }
    }
    write_text(&out_dir.join("decay_profile.csv"), &decay)
}

/// Recomputes records from saved solution fields.
pub fn report_from_files(config: &ProblemConfig, files: &[PathBuf], radial: RadialParams, cache: Option<&Path>) -> Result<(ConcentrationReport, Vec<NodalSolution>)> {
    let table = table_for_config(config, radial, cache)?;
    let aux = aux_potential(config, &table)?;
    let mut records = Vec::new();
    let mut sols = Vec::new();
    for path in files {
        let field = ReducedField::read_binary(path)?;
        let eps = field.grid.eps();
        let f = EnergyFunctional::new(config, eps)?;
        if *f.grid != *field.grid {
            return Err(Error::Format { path: path.clone(), message: "grid does not match the configuration".into() });
        }
        let field = f.field(field.values);
        let sol = NodalSolution::assemble(&f, config, field, SolveMeta::default())?;
        records.push(eps_record(&sol, &f, config, aux.m0)?);
        sols.push(sol);
    }
    let report = ConcentrationReport::build(records, aux.x0.clone(), aux.m0, config, &table)?;
    Ok((report, sols))
}
