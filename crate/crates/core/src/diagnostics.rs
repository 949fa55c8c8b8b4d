//! Post-processing of nodal solutions along a sequence `eps -> 0`: peak
//! admissibility, energy scaling against `2 omega_k M0`, peak migration,
//! tail decay, and certification that the penalized solution solves the
//! original equation.

use serde::Serialize;

use crate::energy::EnergyFunctional;
use crate::error::{Error, Result};
use crate::geometry::{sphere_distance, unit_sphere_measure, ProblemConfig, SpherePoint};
use crate::grid::ReducedField;
use crate::limit::{aux_value, GroundEnergyTable};
use crate::nonlinearity::f_eval;
use crate::solver::NodalSolution;

/// Default radius (scaled units) excluded around each peak in decay fits.
pub const R_EXCL: f64 = 3.0;

/// `a` with `f(a)/a = V0/2`.
pub fn threshold_a(v0: f64, p: f64) -> f64 {
    (0.5 * v0).powf(1.0 / (p - 1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct PeakAdmissibility {
    pub a: f64,
    pub v_p1: f64,
    pub v_p2: f64,
    pub p1_in_omega: bool,
    pub p2_in_omega: bool,
    pub amplitudes_ok: bool,
    pub pass: bool,
}

pub fn peak_admissibility(sol: &NodalSolution, config: &ProblemConfig) -> PeakAdmissibility {
    let a = threshold_a(config.v0, config.p);
    let v_p1 = sol.field.values[sol.field.argmax()];
    let v_p2 = sol.field.values[sol.field.argmin()];
    let p1_in_omega = config.in_omega(&sol.p1);
    let p2_in_omega = config.in_omega(&sol.p2);
    let amplitudes_ok = v_p1 >= a && v_p2 <= -a;
    PeakAdmissibility { a, v_p1, v_p2, p1_in_omega, p2_in_omega, amplitudes_ok, pass: p1_in_omega && p2_in_omega && amplitudes_ok }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub beta: f64,
    pub log_c: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares fit of `log|v| = log C - beta * min_i d_k(x, P^i)` over
/// nodes with `|v| > 1e-12` farther than `r_excl` from every peak. Peaks and
/// distances are in scaled units.
pub fn decay_fit_field(field: &ReducedField, peaks: &[SpherePoint], r_excl: f64) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &v) in field.values.iter().enumerate() {
        if v.abs() <= 1e-12 {
            continue;
        }
        let node = field.grid.node_point(i);
        let d = peaks.iter().map(|p| sphere_distance(&node, p)).fold(f64::INFINITY, f64::min);
        if d > r_excl {
            xs.push(-d);
            ys.push(v.abs().ln());
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::Fit(format!("only {n} usable tail points")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("tail points have no spread in distance".into()));
    }
    let beta = sxy / sxx;
    let log_c = my - beta * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(DecayFit { beta, log_c, r_squared, points: n })
}

pub fn decay_fit(sol: &NodalSolution, r_excl: f64) -> Result<DecayFit> {
    let peaks = [sol.p1.scaled(1.0 / sol.eps), sol.p2.scaled(1.0 / sol.eps)];
    decay_fit_field(&sol.field, &peaks, r_excl)
}

#[derive(Debug, Clone, Serialize)]
pub struct Certification {
    /// `max |v|` over nodes whose unscaled position is outside the region.
    pub outside_sup: f64,
    /// `delta / 2 = eps^{tau/(nu-1)} / 2`
    pub delta_half: f64,
    pub margin: f64,
    pub certified: bool,
    /// Residual norm with `f` in place of `g_eps` everywhere.
    pub unpenalized_residual: f64,
}

pub fn certify_original(sol: &NodalSolution, f: &EnergyFunctional, config: &ProblemConfig) -> Certification {
    let v = &sol.field.values;
    let outside_sup = (0..v.len()).filter(|&i| !f.inside[i]).map(|i| v[i].abs()).fold(0.0, f64::max);
    let delta_half = 0.5 * sol.eps.powf(config.tau / (config.nu - 1.0));
    let grid = &f.grid;
    let mut kv = vec![0.0; v.len()];
    grid.stiffness_apply(v, &mut kv);
    let unpenalized_residual = (0..v.len())
        .map(|i| {
            let w = f.weights()[i];
            let r = kv[i] / w + f.potential[i] * v[i] - f_eval(v[i], config.p);
            w * r * r
        })
        .sum::<f64>()
        .sqrt();
    Certification {
        outside_sup,
        delta_half,
        margin: delta_half - outside_sup,
        certified: outside_sup <= delta_half,
        unpenalized_residual,
    }
}

/// One row of the concentration report.
#[derive(Debug, Clone, Serialize)]
pub struct EpsRecord {
    pub eps: f64,
    pub d_eps: f64,
    pub eps_k_d_eps: f64,
    pub target: f64,
    pub ratio: f64,
    #[serde(rename = "P1")]
    pub p1: SpherePoint,
    #[serde(rename = "P2")]
    pub p2: SpherePoint,
    pub peak_gap_rescaled: f64,
    pub abs_v_p1: f64,
    pub abs_v_p2: f64,
    pub a_threshold: f64,
    pub beta_fit: f64,
    pub outside_sup: f64,
    pub delta_half: f64,
    pub certified: bool,
    // extra per-eps data kept for trend evaluation
    pub r_squared: f64,
    pub converged: bool,
    pub pde_residual_norm: f64,
    pub sign_regions: usize,
    pub peaks_admissible: bool,
    pub unpenalized_residual: f64,
}

/// `2 omega_k M0`
pub fn energy_target(config: &ProblemConfig, m0: f64) -> Result<f64> {
    Ok(2.0 * unit_sphere_measure(config.sphere_dim())? * m0)
}

pub fn eps_record(sol: &NodalSolution, f: &EnergyFunctional, config: &ProblemConfig, m0: f64) -> Result<EpsRecord> {
    let target = energy_target(config, m0)?;
    let cert = certify_original(sol, f, config);
    let adm = peak_admissibility(sol, config);
    let (beta, r2) = match decay_fit(sol, R_EXCL) {
        Ok(fit) => (fit.beta, fit.r_squared),
        Err(_) => (f64::NAN, f64::NAN),
    };
    Ok(EpsRecord {
        eps: sol.eps,
        d_eps: sol.d_eps,
        eps_k_d_eps: sol.eps_k_d_eps,
        target,
        ratio: sol.eps_k_d_eps / target,
        p1: sol.p1.clone(),
        p2: sol.p2.clone(),
        peak_gap_rescaled: sphere_distance(&sol.p1, &sol.p2) / sol.eps,
        abs_v_p1: adm.v_p1.abs(),
        abs_v_p2: adm.v_p2.abs(),
        a_threshold: adm.a,
        beta_fit: beta,
        outside_sup: cert.outside_sup,
        delta_half: cert.delta_half,
        certified: cert.certified,
        r_squared: r2,
        converged: sol.converged,
        pde_residual_norm: sol.pde_residual_norm,
        sign_regions: sol.sign_regions,
        peaks_admissible: adm.pass,
        unpenalized_residual: cert.unpenalized_residual,
    })
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingTrend {
    pub eps: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `|ratio - 1|`
    pub deviations: Vec<f64>,
    /// Slope of `log|ratio - 1|` against `log eps`.
    pub loglog_slope: f64,
    pub strictly_decreasing: bool,
    /// Fewer than three points: trend not judged.
    pub report_only: bool,
    pub pass: bool,
}

/// `ratio_eps = eps^k d_eps / (2 omega_k M0)` along the sequence.
pub fn energy_scaling(records: &[EpsRecord]) -> ScalingTrend {
    let eps: Vec<f64> = records.iter().map(|r| r.eps).collect();
    let ratios: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    let deviations: Vec<f64> = ratios.iter().map(|r| (r - 1.0).abs()).collect();
    let report_only = records.len() < 3;
    let loglog_slope = loglog_slope(&eps, &deviations);
    let decreasing = strictly_decreasing(&deviations);
    ScalingTrend { eps, ratios, deviations, loglog_slope, strictly_decreasing: decreasing, report_only, pass: !report_only && decreasing }
}

fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct MigrationTrend {
    pub eps: Vec<f64>,
    /// `d_k(eps P^1, x0)` and `d_k(eps P^2, x0)`.
    pub distances: [Vec<f64>; 2],
    /// `M(eps P^i) - M0`.
    pub excess: [Vec<f64>; 2],
    pub peak_radii: [Vec<f64>; 2],
    pub gaps: Vec<f64>,
    pub distances_decreasing: [bool; 2],
    pub excess_decreasing: [bool; 2],
    pub gap_increasing: bool,
    pub pass: bool,
}

pub fn peak_migration(records: &[EpsRecord], x0: &SpherePoint, config: &ProblemConfig, table: &GroundEnergyTable, m0: f64) -> MigrationTrend {
    let eps: Vec<f64> = records.iter().map(|r| r.eps).collect();
    let pick = |i: usize, r: &EpsRecord| if i == 0 { r.p1.clone() } else { r.p2.clone() };
    let distances = [0, 1].map(|i| records.iter().map(|r| sphere_distance(&pick(i, r), x0)).collect::<Vec<_>>());
    let excess = [0, 1].map(|i| records.iter().map(|r| aux_value(config, table, &pick(i, r)) - m0).collect::<Vec<_>>());
    let peak_radii = [0, 1].map(|i| records.iter().map(|r| pick(i, r).r).collect::<Vec<_>>());
    let gaps: Vec<f64> = records.iter().map(|r| r.peak_gap_rescaled).collect();
    let distances_decreasing = [strictly_decreasing(&distances[0]), strictly_decreasing(&distances[1])];
    let excess_decreasing = [strictly_decreasing(&excess[0]), strictly_decreasing(&excess[1])];
    let gap_increasing = strictly_increasing(&gaps);
    let pass = distances_decreasing.iter().chain(&excess_decreasing).all(|&b| b);
    MigrationTrend { eps, distances, excess, peak_radii, gaps, distances_decreasing, excess_decreasing, gap_increasing, pass }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificationTrend {
    pub margins: Vec<f64>,
    pub certified: Vec<bool>,
    /// Largest `eps` from which every smaller `eps` in the sweep is certified.
    pub eps0: Option<f64>,
    pub margin_increasing: bool,
    pub pass: bool,
}

pub fn certification_trend(records: &[EpsRecord]) -> CertificationTrend {
    let margins: Vec<f64> = records.iter().map(|r| r.delta_half - r.outside_sup).collect();
    let certified: Vec<bool> = records.iter().map(|r| r.certified).collect();
    let mut eps0 = None;
    for (r, c) in records.iter().zip(&certified).rev() {
        if *c {
            eps0 = Some(r.eps);
        } else {
            break;
        }
    }
    let margin_increasing = strictly_increasing(&margins);
    CertificationTrend { pass: eps0.is_some() && margin_increasing, margins, certified, eps0, margin_increasing }
}

/// Per-eps records plus the trend verdicts.
#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub target: f64,
    pub m0: f64,
    pub x0: SpherePoint,
    pub records: Vec<EpsRecord>,
    pub scaling: ScalingTrend,
    pub migration: MigrationTrend,
    pub certification: CertificationTrend,
    /// `beta > 0` and `R^2 > 0.95` at every converged `eps`.
    pub decay_pass: bool,
}

impl ConcentrationReport {
    /// Sorts records by decreasing `eps` and evaluates the trends.
    pub fn build(mut records: Vec<EpsRecord>, x0: SpherePoint, m0: f64, config: &ProblemConfig, table: &GroundEnergyTable) -> Result<Self> {
        records.sort_by(|a, b| b.eps.partial_cmp(&a.eps).unwrap());
        let target = energy_target(config, m0)?;
        let scaling = energy_scaling(&records);
        let migration = peak_migration(&records, &x0, config, table, m0);
        let certification = certification_trend(&records);
        let decay_pass = !records.is_empty()
            && records.iter().filter(|r| r.converged).all(|r| r.beta_fit > 0.0 && r.r_squared > 0.95);
        Ok(Self { target, m0, x0, records, scaling, migration, certification, decay_pass })
    }

    /// Columns in the order of [`EpsRecord`]; peak points are flattened to
    /// `P1_xprime1.., P1_r`.
    pub fn to_csv(&self) -> String {
        let d = self.x0.xprime.len();
        let point_cols = |name: &str| {
            let mut cols: Vec<String> = (1..=d).map(|a| format!("{name}_xprime{a}")).collect();
            cols.push(format!("{name}_r"));
            cols.join(",")
        };
        let mut out = format!(
            "eps,d_eps,eps_k_d_eps,target,ratio,{},{},peak_gap_rescaled,abs_v_P1,abs_v_P2,a_threshold,beta_fit,outside_sup,delta_half,certified\n",
            point_cols("P1"),
            point_cols("P2")
        );
        let point = |p: &SpherePoint| {
            let mut cols: Vec<String> = p.xprime.iter().map(|x| format!("{x:.12e}")).collect();
            cols.push(format!("{:.12e}", p.r));
            cols.join(",")
        };
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}\n",
                r.eps,
                r.d_eps,
                r.eps_k_d_eps,
                r.target,
                r.ratio,
                point(&r.p1),
                point(&r.p2),
                r.peak_gap_rescaled,
                r.abs_v_p1,
                r.abs_v_p2,
                r.a_threshold,
                r.beta_fit,
                r.outside_sup,
                r.delta_half,
                r.certified
            ));
        }
        out
    }

    pub fn trend_json(&self) -> serde_json::Value {
        serde_json::json!({
            "target": self.target,
            "M0": self.m0,
            "x0": self.x0,
            "energy_scaling": self.scaling,
            "peak_migration": self.migration,
            "certification": self.certification,
            "decay_pass": self.decay_pass,
        })
    }
}
