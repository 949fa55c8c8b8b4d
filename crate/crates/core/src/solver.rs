//! Least-energy nodal solutions: two-bump initialization, Sobolev-gradient
//! descent with reprojection onto the nodal Nehari set, and a Newton polish.

use serde::Serialize;

use crate::energy::EnergyFunctional;
use crate::error::{Error, Result};
use crate::geometry::{sphere_distance, ProblemConfig, SpherePoint};
use crate::grid::ReducedField;
use crate::limit::GroundProfile;
use crate::linalg::{dot, minres};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DescentOptions {
    pub max_iters: usize,
    /// Stop when the dual gradient norm is below `tol_grad * ||v||_eps`.
    pub tol_grad: f64,
    pub armijo: f64,
    pub shrink: f64,
    pub alpha0: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self { max_iters: 20_000, tol_grad: 1e-7, armijo: 1e-4, shrink: 0.5, alpha0: 1.0 }
    }
}

const ALPHA_MIN: f64 = 1e-12;

/// Outcome of a projected descent.
#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub field: ReducedField,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    /// Energies of the accepted iterates, starting with the initial one.
    pub energy_trace: Vec<f64>,
    /// Last projection factors `(t, s)`.
    pub last_factors: (f64, f64),
}

// Dual norm of I'(v) and the Sobolev direction.
fn sobolev_direction(f: &EnergyFunctional, v: &[f64]) -> Result<(Vec<f64>, f64)> {
    let e = f.euclidean_gradient(v);
    let s = f.sobolev_solve(&e)?;
    let gn = dot(&s, &e).max(0.0).sqrt();
    Ok((s, gn))
}

/// Descent on the Nehari set for single-sign states: each trial point is
/// rescaled back onto the set before the Armijo test.
pub fn descend_on_nehari(f: &EnergyFunctional, init: ReducedField, tol_grad: f64, max_iters: usize) -> Result<DescentOutcome> {
    let opts = DescentOptions { max_iters, tol_grad, ..DescentOptions::default() };
    let (_, mut v) = f.scalar_nehari_project(&init)?;
    let mut energy = f.value(&v.values);
    let mut trace = vec![energy];
    let mut last = (1.0, 1.0);
    for it in 0..opts.max_iters {
        let (s, gn) = sobolev_direction(f, &v.values)?;
        if gn < opts.tol_grad * f.norm_sq(&v.values).sqrt() {
            return Ok(DescentOutcome { field: v, iterations: it, gradient_norm: gn, converged: true, energy_trace: trace, last_factors: last });
        }
        let mut alpha = opts.alpha0;
        loop {
            let trial = v.with_values(v.values.iter().zip(&s).map(|(a, b)| a - alpha * b).collect());
            if let Ok((t, cand)) = f.scalar_nehari_project(&trial) {
                let e = f.value(&cand.values);
                if e <= energy - opts.armijo * alpha * gn * gn {
                    v = cand;
                    energy = e;
                    trace.push(e);
                    last = (t, t);
                    break;
                }
            }
            alpha *= opts.shrink;
            if alpha < ALPHA_MIN {
                return Ok(DescentOutcome { field: v, iterations: it, gradient_norm: gn, converged: false, energy_trace: trace, last_factors: last });
            }
        }
    }
    let (_, gn) = sobolev_direction(f, &v.values)?;
    Ok(DescentOutcome { field: v, iterations: opts.max_iters, gradient_norm: gn, converged: false, energy_trace: trace, last_factors: last })
}

/// Descent on the nodal Nehari set: Armijo backtracking on `I`, each trial
/// point reprojected by `t v+ + s v-`.
pub fn minimize_nodal(f: &EnergyFunctional, init: &ReducedField, opts: &DescentOptions) -> Result<DescentOutcome> {
    let proj = f.nodal_nehari_project(init)?;
    let mut v = proj.field;
    let mut last = (proj.t, proj.s);
    let mut energy = f.value(&v.values);
    let mut trace = vec![energy];
    let mut gn = f64::INFINITY;
    for it in 0..opts.max_iters {
        let (s, g) = sobolev_direction(f, &v.values)?;
        gn = g;
        let settled = (1.0 - last.0).abs() + (1.0 - last.1).abs() < 1e-9;
        if gn < opts.tol_grad * f.norm_sq(&v.values).sqrt() && (settled || it == 0) {
            return Ok(DescentOutcome { field: v, iterations: it, gradient_norm: gn, converged: true, energy_trace: trace, last_factors: last });
        }
        let mut alpha = opts.alpha0;
        let mut degeneracy = None;
        loop {
            let trial = v.with_values(v.values.iter().zip(&s).map(|(a, b)| a - alpha * b).collect());
            match f.nodal_nehari_project(&trial) {
                Ok(p) => {
                    let e = f.value(&p.field.values);
                    if e <= energy - opts.armijo * alpha * gn * gn {
                        v = p.field;
                        energy = e;
                        trace.push(e);
                        last = (p.t, p.s);
                        break;
                    }
                }
                Err(err @ Error::NodalDegeneracy(_)) => degeneracy = Some(err),
                Err(_) => {}
            }
            alpha *= opts.shrink;
            if alpha < ALPHA_MIN {
                if let Some(err) = degeneracy {
                    return Err(err);
                }
                return Ok(DescentOutcome { field: v, iterations: it, gradient_norm: gn, converged: false, energy_trace: trace, last_factors: last });
            }
        }
    }
    Ok(DescentOutcome { field: v, iterations: opts.max_iters, gradient_norm: gn, converged: false, energy_trace: trace, last_factors: last })
}

#[derive(Debug, Clone)]
pub struct PolishOutcome {
    pub field: ReducedField,
    /// Weighted `L^2` residual norms, one per Newton iterate.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub warning: Option<String>,
}

/// Damped Newton on `-Delta v + V v - g(v) = 0`. Linear systems are solved
/// by MINRES preconditioned with `(K + W V)^{-1}`. Returns the input when
/// no iterate improves on it.
pub fn polish_newton(f: &EnergyFunctional, v: &ReducedField, tol: f64, max_iters: usize) -> PolishOutcome {
    let mut current = v.values.clone();
    let mut res = f.residual_norm(&current);
    let mut history = vec![res];
    let mut iterations = 0;
    let mut warning = None;
    while res > tol && iterations < max_iters {
        let e = f.euclidean_gradient(&current);
        let rhs: Vec<f64> = e.iter().map(|x| -x).collect();
        let apply = |w: &[f64], out: &mut [f64]| f.hessian_apply(&current, w, out);
        let precond = |r: &[f64], z: &mut [f64]| match f.sobolev_solve(r) {
            Ok(sol) => z.copy_from_slice(&sol),
            Err(_) => z.copy_from_slice(r),
        };
        let (step, outcome) = minres(apply, precond, &rhs, 1e-13, 4 * current.len().max(50));
        if !step.iter().all(|x| x.is_finite()) || outcome.iterations == 0 {
            warning = Some("Newton linear solve broke down".to_string());
            break;
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1.0 / 1024.0 {
            let trial: Vec<f64> = current.iter().zip(&step).map(|(a, b)| a + lambda * b).collect();
            let r = f.residual_norm(&trial);
            if r < res {
                current = trial;
                res = r;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        iterations += 1;
        if !accepted {
            warning = Some(format!("Newton stalled at residual {res:e}"));
            break;
        }
        history.push(res);
    }
    let converged = res <= tol;
    if !converged && warning.is_none() {
        warning = Some(format!("Newton stopped at residual {res:e} after {iterations} iterations"));
    }
    PolishOutcome { field: v.with_values(current), residual_history: history, iterations, converged, warning }
}

/// `S(x) = 1` for `x >= 1`, `0` for `x <= 0`, smooth in between.
fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// Positive ground-state bump at `z1`, negative at `z2`, each cut off
/// smoothly inside a ball of radius `d_k(z1, z2) / 2` (original units),
/// projected onto the nodal Nehari set.
pub fn initial_guess(
    f: &EnergyFunctional,
    config: &ProblemConfig,
    profile: &GroundProfile,
    z1: &SpherePoint,
    z2: &SpherePoint,
) -> Result<ReducedField> {
    let eps = f.eps();
    for (name, z) in [("z1", z1), ("z2", z2)] {
        if !config.in_omega(z) {
            return Err(Error::Initialization(format!("{name} = {z:?} lies outside the concentration region")));
        }
        if z.xprime.len() != config.xprime_dim() {
            return Err(Error::Initialization(format!("{name} has the wrong number of x' coordinates")));
        }
    }
    if z1.r == z2.r {
        return Err(Error::Initialization("the two centres must have distinct radii".into()));
    }
    let sep = sphere_distance(z1, z2);
    let radius = 0.5 * sep;
    for z in [z1, z2] {
        let omega = config.omega;
        let lateral = z.xprime_norm_sq().sqrt() + radius;
        if z.r - radius < omega.r_lo - 1e-12 || z.r + radius > omega.r_hi + 1e-12 || (config.xprime_dim() > 0 && lateral > omega.s_max + 1e-12) {
            return Err(Error::Initialization(format!(
                "cutoff ball of radius {radius} around {z:?} leaves the concentration region"
            )));
        }
    }
    let a1 = config.potential.eval(z1);
    let a2 = config.potential.eval(z2);
    let c1 = z1.scaled(1.0 / eps);
    let c2 = z2.scaled(1.0 / eps);
    let cut = radius / eps;
    let mut overlap = false;
    let values: Vec<f64> = (0..f.grid.len())
        .map(|i| {
            let x = f.grid.node_point(i);
            let d1 = sphere_distance(&x, &c1);
            let d2 = sphere_distance(&x, &c2);
            let w1 = profile.eval(a1, d1) * smooth_step(2.0 * (cut - d1) / cut);
            let w2 = profile.eval(a2, d2) * smooth_step(2.0 * (cut - d2) / cut);
            if w1 > 0.0 && w2 > 0.0 {
                overlap = true;
            }
            w1 - w2
        })
        .collect();
    if overlap {
        return Err(Error::Initialization("the two cutoff bumps overlap".into()));
    }
    let proj = f.nodal_nehari_project(&f.field(values))?;
    Ok(proj.field)
}

/// Default centres: on the `x' = 0` axis at `r0 +- 0.15 (r_hi - r_lo)`.
pub fn default_centres(config: &ProblemConfig, x0: &SpherePoint) -> (SpherePoint, SpherePoint) {
    let offset = 0.15 * (config.omega.r_hi - config.omega.r_lo);
    let d = config.xprime_dim();
    (SpherePoint::on_axis(d, x0.r - offset), SpherePoint::on_axis(d, x0.r + offset))
}

/// A computed nodal critical point and its certificates.
#[derive(Debug, Clone)]
pub struct NodalSolution {
    pub field: ReducedField,
    pub eps: f64,
    pub d_eps: f64,
    /// `eps^k d_eps`
    pub eps_k_d_eps: f64,
    pub nehari_residuals: (f64, f64),
    pub pde_residual_norm: f64,
    /// Location of the maximum, original units.
    pub p1: SpherePoint,
    /// Location of the minimum, original units.
    pub p2: SpherePoint,
    pub iterations: usize,
    pub converged: bool,
    pub descent_converged: bool,
    pub gradient_norm: f64,
    pub energy_trace: Vec<f64>,
    pub newton_history: Vec<f64>,
    pub sign_regions: usize,
    pub truncation_warning: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    pub eps: f64,
    pub d_eps: f64,
    pub eps_k_d_eps: f64,
    pub residuals: SummaryResiduals,
    #[serde(rename = "P1")]
    pub p1: SpherePoint,
    #[serde(rename = "P2")]
    pub p2: SpherePoint,
    pub v_p1: f64,
    pub v_p2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub sign_regions: usize,
    pub truncation_warning: bool,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryResiduals {
    pub nehari_plus: f64,
    pub nehari_minus: f64,
    pub pde: f64,
    pub gradient: f64,
}

/// Residual level below which a solve counts as converged.
pub const PDE_TOL: f64 = 1e-6;

impl NodalSolution {
    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            eps: self.eps,
            d_eps: self.d_eps,
            eps_k_d_eps: self.eps_k_d_eps,
            residuals: SummaryResiduals {
                nehari_plus: self.nehari_residuals.0,
                nehari_minus: self.nehari_residuals.1,
                pde: self.pde_residual_norm,
                gradient: self.gradient_norm,
            },
            p1: self.p1.clone(),
            p2: self.p2.clone(),
            v_p1: self.field.values[self.field.argmax()],
            v_p2: self.field.values[self.field.argmin()],
            iterations: self.iterations,
            converged: self.converged,
            sign_regions: self.sign_regions,
            truncation_warning: self.truncation_warning,
            warnings: self.warnings.clone(),
        }
    }

    /// Collects certificates for a field on `f`'s grid.
    pub fn from_field(f: &EnergyFunctional, config: &ProblemConfig, field: ReducedField) -> Result<Self> {
        let eps = f.eps();
        let d_eps = f.value(&field.values);
        let (_, gn) = sobolev_direction(f, &field.values)?;
        let pde = f.residual_norm(&field.values);
        Ok(Self {
            eps,
            d_eps,
            eps_k_d_eps: eps.powi(config.sphere_dim() as i32) * d_eps,
            nehari_residuals: f.nehari_residuals(&field),
            pde_residual_norm: pde,
            p1: f.grid.unscaled_point(field.argmax()),
            p2: f.grid.unscaled_point(field.argmin()),
            iterations: 0,
            converged: pde < PDE_TOL,
            descent_converged: false,
            gradient_norm: gn,
            energy_trace: Vec::new(),
            newton_history: Vec::new(),
            sign_regions: count_sign_regions(&field),
            truncation_warning: field.truncation_flag(),
            warnings: Vec::new(),
            field,
        })
    }
}

/// Number of connected components of `{v > 0}` plus those of `{v < 0}`,
/// with grid-neighbour connectivity.
pub fn count_sign_regions(v: &ReducedField) -> usize {
    let g = &v.grid;
    let n = v.values.len();
    let n_r = g.n_r();
    let n_xp = g.n_xp();
    let d = g.xprime_dim();
    let sign = |i: usize| v.values[i].partial_cmp(&0.0).unwrap_or(std::cmp::Ordering::Equal);
    let mut seen = vec![false; n];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] || v.values[start] == 0.0 {
            continue;
        }
        count += 1;
        let s0 = sign(start);
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let mut neighbours = Vec::with_capacity(2 + 2 * d);
            let j = i % n_r;
            if j > 0 {
                neighbours.push(i - 1);
            }
            if j + 1 < n_r {
                neighbours.push(i + 1);
            }
            let mut stride = n_r;
            for _ in 0..d {
                let c = (i / stride) % n_xp;
                if c > 0 {
                    neighbours.push(i - stride);
                }
                if c + 1 < n_xp {
                    neighbours.push(i + stride);
                }
                stride *= n_xp;
            }
            for nb in neighbours {
                if !seen[nb] && v.values[nb] != 0.0 && sign(nb) == s0 {
                    seen[nb] = true;
                    stack.push(nb);
                }
            }
        }
    }
    count
}

/// Full pipeline at one `eps`: initial guess around `(z1, z2)`, descent,
/// Newton polish, certificates.
pub fn solve_nodal(
    config: &ProblemConfig,
    eps: f64,
    profile: &GroundProfile,
    centres: (&SpherePoint, &SpherePoint),
    opts: &DescentOptions,
) -> Result<(EnergyFunctional, NodalSolution)> {
    let f = EnergyFunctional::new(config, eps)?;
    let init = initial_guess(&f, config, profile, centres.0, centres.1)?;
    let descent = minimize_nodal(&f, &init, opts)?;
    let polish = if f.residual_norm(&descent.field.values) < 1e-3 {
        polish_newton(&f, &descent.field, 1e-10, 30)
    } else {
        PolishOutcome {
            field: descent.field.clone(),
            residual_history: vec![],
            iterations: 0,
            converged: false,
            warning: Some("residual outside the Newton basin; polish skipped".into()),
        }
    };
    let mut warnings: Vec<String> = polish.warning.iter().cloned().collect();
    // keep the polished field only if it is still sign-changing
    let field = if count_sign_regions(&polish.field) >= 2 {
        polish.field
    } else {
        warnings.push("polished field lost its sign structure; kept the descent output".into());
        descent.field.clone()
    };
    let meta = SolveMeta {
        iterations: descent.iterations + polish.iterations,
        descent_converged: descent.converged,
        energy_trace: descent.energy_trace,
        newton_history: polish.residual_history,
        warnings,
    };
    let sol = NodalSolution::assemble(&f, config, field, meta)?;
    Ok((f, sol))
}

/// Bookkeeping of a solve, kept alongside cached fields.
#[derive(Debug, Clone, Default, Serialize, serde::Deserialize)]
pub struct SolveMeta {
    pub iterations: usize,
    pub descent_converged: bool,
    pub energy_trace: Vec<f64>,
    pub newton_history: Vec<f64>,
    pub warnings: Vec<String>,
}

impl NodalSolution {
    /// Certificates for `field` plus the solve bookkeeping. A solution counts
    /// as converged when the residual is below [`PDE_TOL`], both Nehari
    /// residuals are below `1e-8` and the field changes sign.
    pub fn assemble(f: &EnergyFunctional, config: &ProblemConfig, field: ReducedField, meta: SolveMeta) -> Result<Self> {
        let mut sol = NodalSolution::from_field(f, config, field)?;
        let mut warnings = meta.warnings;
        if sol.truncation_warning {
            warnings.push("solution does not vanish to 1e-10 relative at the outer boundary".into());
        }
        let nehari_ok = sol.nehari_residuals.0.abs() < 1e-8 && sol.nehari_residuals.1.abs() < 1e-8;
        sol.iterations = meta.iterations;
        sol.descent_converged = meta.descent_converged;
        sol.converged = sol.pde_residual_norm < PDE_TOL && nehari_ok && sol.sign_regions >= 2;
        sol.energy_trace = meta.energy_trace;
        sol.newton_history = meta.newton_history;
        sol.warnings = warnings;
        Ok(sol)
    }
}

/// Energy trace check: nonincreasing across accepted steps.
pub fn trace_is_monotone(trace: &[f64]) -> bool {
    trace.windows(2).all(|w| w[1] <= w[0])
}
