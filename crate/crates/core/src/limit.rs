//! Ground states of `-Delta w + a w = f(w)` in `R^m` and the ground-energy
//! function `E(a)`; the auxiliary potential `M(x) = r^k E(V(x))` and its
//! minimum over the concentration region.
//!
//! For a pure power `w_a(x) = a^{1/(p-1)} w_1(sqrt(a) x)`, hence
//! `E(a) = a^sigma E(1)` with `sigma = (p+1)/(p-1) - m/2`.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::energy::EnergyFunctional;
use crate::error::{Error, Result};
use crate::geometry::{subcritical_bound, ProblemConfig, SpherePoint};
use crate::grid::{ReducedField, ReducedGrid};
use crate::quadrature::integrate_to_infinity;
use crate::solver::{descend_on_nehari, polish_newton};

/// Radial discretization for ground-state solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialParams {
    pub h: f64,
    pub r_max: f64,
}

impl Default for RadialParams {
    fn default() -> Self {
        Self { h: 0.01, r_max: 20.0 }
    }
}

pub fn scaling_exponent(m: usize, p: f64) -> f64 {
    (p + 1.0) / (p - 1.0) - 0.5 * m as f64
}

/// The one-dimensional soliton
/// `w(x) = ((p+1)a/2)^{1/(p-1)} sech^{2/(p-1)}((p-1) sqrt(a) x / 2)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Soliton {
    pub a: f64,
    pub p: f64,
    pub amplitude: f64,
    pub rate: f64,
    pub energy: f64,
}

impl Soliton {
    pub fn profile(&self, x: f64) -> f64 {
        self.amplitude * (1.0 / (self.rate * x).cosh()).powf(2.0 / (self.p - 1.0))
    }
}

pub fn soliton_1d(a: f64, p: f64, m: usize) -> Result<Soliton> {
    if m != 1 {
        return Err(Error::Usage(format!("closed-form soliton exists only for m = 1, got m = {m}")));
    }
    if !(a > 0.0 && p > 1.0) {
        return Err(Error::Usage(format!("soliton needs a > 0 and p > 1 (a = {a}, p = {p})")));
    }
    let amplitude = ((p + 1.0) * a / 2.0).powf(1.0 / (p - 1.0));
    let rate = (p - 1.0) * a.sqrt() / 2.0;
    let mut sol = Soliton { a, p, amplitude, rate, energy: 0.0 };
    // E = (p-1)/(2(p+1)) int_R w^{p+1}
    let half = integrate_to_infinity(|x| sol.profile(x).powf(p + 1.0), 0.0, 1e-14 * amplitude.powf(p + 1.0))?;
    sol.energy = (p - 1.0) / (2.0 * (p + 1.0)) * 2.0 * half;
    Ok(sol)
}

/// A converged radial ground state.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub a: f64,
    pub m: usize,
    pub p: f64,
    pub profile: ReducedField,
    pub energy: f64,
    /// Dual norm of `I'(w)` at exit.
    pub gradient_norm: f64,
    /// `(||w||^2 - int w^{p+1}) / ||w||^2`.
    pub nehari_residual: f64,
    pub iterations: usize,
}

pub fn solve_ground_state(a: f64, m: usize, p: f64, params: RadialParams) -> Result<GroundState> {
    if !(1..=3).contains(&m) {
        return Err(Error::Usage(format!("ground states supported for 1 <= m <= 3, got {m}")));
    }
    if !(a > 0.0) {
        return Err(Error::Usage(format!("a must be positive, got {a}")));
    }
    if let Some(bound) = subcritical_bound(m) {
        if p >= bound {
            return Err(Error::config("f2", format!("p = {p} is not subcritical in dimension {m}")));
        }
    }
    let n_r = (params.r_max / params.h).round() as usize;
    let grid = Arc::new(ReducedGrid::radial(m - 1, n_r, params.h)?);
    let functional = EnergyFunctional::limit(grid.clone(), a, p);
    let init = ReducedField::from_fn(grid, |pt| (-0.5 * a * pt.r * pt.r).exp());
    let descent = descend_on_nehari(&functional, init, 1e-5, 20_000)?;
    let polish = polish_newton(&functional, &descent.field, 1e-11, 30);
    let w = polish.field;
    let e = functional.euclidean_gradient(&w.values);
    let sob = functional.sobolev_solve(&e)?;
    let gradient_norm = sob.iter().zip(&e).map(|(x, y)| x * y).sum::<f64>().max(0.0).sqrt();
    let norm_sq = functional.norm_sq(&w.values);
    let nehari_residual = functional.derivative(&w.values, &w.values) / norm_sq;
    if gradient_norm >= 1e-8 || nehari_residual.abs() >= 1e-10 {
        return Err(Error::Numeric(format!(
            "ground state for a = {a}, m = {m} not converged: gradient {gradient_norm:e}, \
             Nehari residual {nehari_residual:e}, {} descent steps",
            descent.iterations
        )));
    }
    Ok(GroundState {
        a,
        m,
        p,
        energy: functional.value(&w.values),
        profile: w,
        gradient_norm,
        nehari_residual,
        iterations: descent.iterations + polish.iterations,
    })
}

/// The `a = 1` ground-state profile, evaluated at any `a` by scaling.
#[derive(Debug, Clone)]
pub enum GroundProfile {
    Soliton(Soliton),
    Radial { p: f64, h: f64, values: Vec<f64> },
}

impl GroundProfile {
    pub fn for_dimension(m: usize, p: f64, params: RadialParams) -> Result<Self> {
        if m == 1 {
            Ok(GroundProfile::Soliton(soliton_1d(1.0, p, 1)?))
        } else {
            let gs = solve_ground_state(1.0, m, p, params)?;
            Ok(GroundProfile::Radial { p, h: params.h, values: gs.profile.values })
        }
    }

    /// `w_a(rho)` for the radial distance `rho`.
    pub fn eval(&self, a: f64, rho: f64) -> f64 {
        match self {
            GroundProfile::Soliton(s) => a.powf(1.0 / (s.p - 1.0)) * s.profile(a.sqrt() * rho),
            GroundProfile::Radial { p, h, values } => {
                let x = a.sqrt() * rho / h - 0.5;
                let base = a.powf(1.0 / (p - 1.0));
                if x <= 0.0 {
                    return base * values[0];
                }
                let j = x.floor() as usize;
                if j + 1 >= values.len() {
                    return 0.0;
                }
                let frac = x - j as f64;
                base * ((1.0 - frac) * values[j] + frac * values[j + 1])
            }
        }
    }
}

/// `E(a)` for a pure power in dimension `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundEnergyTable {
    pub m: usize,
    pub p: f64,
    pub params: RadialParams,
    pub sigma: f64,
    /// `E(1)`
    pub reference: f64,
    pub a_values: Vec<f64>,
    pub energies: Vec<f64>,
}

/// Relative tolerance of the spot checks against the scaling law.
pub const TABLE_TOL: f64 = 1e-3;

impl GroundEnergyTable {
    /// `E(a) = a^sigma E(1)`.
    pub fn energy_at(&self, a: f64) -> f64 {
        a.powf(self.sigma) * self.reference
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# ground-energy table\n");
        out.push_str(&format!("# m = {}\n# p = {}\n", self.m, self.p));
        out.push_str(&format!("# h = {}\n# r_max = {}\n", self.params.h, self.params.r_max));
        out.push_str(&format!("# sigma = {:.17e}\n# reference = {:.17e}\n", self.sigma, self.reference));
        out.push_str(&self.to_csv());
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("a,E\n");
        for (a, e) in self.a_values.iter().zip(&self.energies) {
            out.push_str(&format!("{a:.17e},{e:.17e}\n"));
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut header = std::collections::HashMap::new();
        let mut a_values = Vec::new();
        let mut energies = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    header.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if line.is_empty() || line == "a,E" {
                continue;
            }
            let (a, e) = line.split_once(',').ok_or_else(|| Error::Table(format!("bad row `{line}`")))?;
            a_values.push(a.trim().parse::<f64>().map_err(|e| Error::Table(e.to_string()))?);
            energies.push(e.trim().parse::<f64>().map_err(|e| Error::Table(e.to_string()))?);
        }
        let get = |k: &str| -> Result<f64> {
            header
                .get(k)
                .ok_or_else(|| Error::Table(format!("missing header `{k}`")))?
                .parse::<f64>()
                .map_err(|e| Error::Table(format!("header `{k}`: {e}")))
        };
        let table = Self {
            m: get("m")? as usize,
            p: get("p")?,
            params: RadialParams { h: get("h")?, r_max: get("r_max")? },
            sigma: get("sigma")?,
            reference: get("reference")?,
            a_values,
            energies,
        };
        table.check()?;
        Ok(table)
    }

    /// Positivity, strict monotonicity and scaling consistency.
    pub fn check(&self) -> Result<()> {
        if self.a_values.is_empty() || self.a_values.len() != self.energies.len() {
            return Err(Error::Table("empty or ragged table".into()));
        }
        if (self.sigma - scaling_exponent(self.m, self.p)).abs() > 1e-12 {
            return Err(Error::Table(format!("sigma {} does not match m and p", self.sigma)));
        }
        for w in self.a_values.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Table("a values not strictly increasing".into()));
            }
        }
        for (i, (&a, &e)) in self.a_values.iter().zip(&self.energies).enumerate() {
            if !(a > 0.0 && e > 0.0) {
                return Err(Error::Table(format!("row {i}: non-positive entry")));
            }
            if i > 0 && !(e > self.energies[i - 1]) {
                return Err(Error::Table(format!("row {i}: energies not increasing")));
            }
            let expected = self.energy_at(a);
            if (e - expected).abs() > TABLE_TOL * expected {
                return Err(Error::Table(format!("row {i}: E({a}) = {e} departs from scaling law {expected}")));
            }
        }
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// File name under which a table with these parameters is cached.
    pub fn cache_name(m: usize, p: f64, params: RadialParams) -> String {
        format!("ground_m{m}_p{p}_h{}_R{}.txt", params.h, params.r_max)
    }
}

/// Closed form for `m = 1`; otherwise one reference solve at `a = 1` plus
/// the scaling law, confirmed by three further solves.
pub fn build_ground_energy_table(a_grid: &[f64], m: usize, p: f64, params: RadialParams) -> Result<GroundEnergyTable> {
    let mut a_values: Vec<f64> = a_grid.to_vec();
    a_values.sort_by(|x, y| x.partial_cmp(y).unwrap());
    a_values.dedup();
    if a_values.is_empty() || a_values[0] <= 0.0 {
        return Err(Error::Usage("a grid must be non-empty and positive".into()));
    }
    let sigma = scaling_exponent(m, p);
    let reference = if m == 1 {
        soliton_1d(1.0, p, 1)?.energy
    } else {
        let reference = solve_ground_state(1.0, m, p, params)?.energy;
        let lo = a_values[0];
        let hi = *a_values.last().unwrap();
        let mut spots = vec![lo, (lo * hi).sqrt(), hi];
        for s in spots.iter_mut() {
            if (*s - 1.0).abs() < 1e-6 {
                *s = 1.5;
            }
        }
        let checks: Vec<Result<(f64, f64)>> = spots
            .par_iter()
            .map(|&a| solve_ground_state(a, m, p, params).map(|g| (a, g.energy)))
            .collect();
        for check in checks {
            let (a, e) = check?;
            let expected = a.powf(sigma) * reference;
            if (e - expected).abs() > TABLE_TOL * expected {
                return Err(Error::Table(format!(
                    "spot check at a = {a}: solved E = {e}, scaling law gives {expected}"
                )));
            }
        }
        reference
    };
    let energies = a_values.iter().map(|a| a.powf(sigma) * reference).collect();
    let table = GroundEnergyTable { m, p, params, sigma, reference, a_values, energies };
    table.check()?;
    Ok(table)
}

/// Table for `config` covering the range of `V` over the closure of the
/// concentration region, loaded from `cache_dir` when present.
pub fn table_for_config(config: &ProblemConfig, params: RadialParams, cache_dir: Option<&Path>) -> Result<GroundEnergyTable> {
    let m = config.limit_dim();
    if let Some(dir) = cache_dir {
        let path = dir.join(GroundEnergyTable::cache_name(m, config.p, params));
        if path.exists() {
            if let Ok(table) = GroundEnergyTable::read(&path) {
                return Ok(table);
            }
        }
    }
    let (lo, hi) = potential_range(config);
    let a_grid: Vec<f64> = (0..9).map(|i| lo * (hi / lo).powf(i as f64 / 8.0)).collect();
    let table = build_ground_energy_table(&a_grid, m, config.p, params)?;
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        table.write(dir.join(GroundEnergyTable::cache_name(m, config.p, params)))?;
    }
    Ok(table)
}

fn potential_range(config: &ProblemConfig) -> (f64, f64) {
    let samples = sample_region(config, 50);
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), pt| {
        let v = config.potential.eval(pt);
        (lo.min(v), hi.max(v))
    });
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo * 1.5)
    }
}

// Tensor grid over the closed box [r_lo, r_hi] x [-s_max, s_max]^{d'},
// restricted to |x'| <= s_max.
fn sample_region(config: &ProblemConfig, per_axis: usize) -> Vec<SpherePoint> {
    let omega = config.omega;
    let d = config.xprime_dim();
    let lin = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (per_axis - 1) as f64;
    let rows = per_axis.pow(d as u32);
    let mut out = Vec::with_capacity(rows * per_axis);
    for row in 0..rows {
        let mut rem = row;
        let mut xp = vec![0.0; d];
        for x in xp.iter_mut() {
            *x = lin(-omega.s_max, omega.s_max, rem % per_axis);
            rem /= per_axis;
        }
        if xp.iter().map(|x| x * x).sum::<f64>() > omega.s_max * omega.s_max * (1.0 + 1e-12) {
            continue;
        }
        for i in 0..per_axis {
            out.push(SpherePoint::new(xp.clone(), lin(omega.r_lo, omega.r_hi, i)));
        }
    }
    out
}

fn boundary_mesh(config: &ProblemConfig, per_axis: usize) -> Vec<SpherePoint> {
    let omega = config.omega;
    let d = config.xprime_dim();
    let mut out: Vec<SpherePoint> = sample_region(config, per_axis)
        .into_iter()
        .filter(|pt| pt.r == omega.r_lo || pt.r == omega.r_hi)
        .collect();
    if d > 0 {
        // points of the lateral surface |x'| = s_max, by radial projection
        for pt in sample_region(config, per_axis) {
            let n = pt.xprime_norm_sq().sqrt();
            if n > 0.0 {
                let xp = pt.xprime.iter().map(|x| x * omega.s_max / n).collect();
                out.push(SpherePoint::new(xp, pt.r));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct AuxPotentialMap {
    pub samples: Vec<(SpherePoint, f64)>,
    pub x0: SpherePoint,
    pub m0: f64,
    pub boundary_inf: f64,
    /// Infimum over the slice `x' = 0` of the region.
    pub axis_inf: f64,
    pub m1_satisfied: bool,
}

impl AuxPotentialMap {
    pub fn to_csv(&self) -> String {
        let d = self.x0.xprime.len();
        let mut out = String::new();
        for a in 0..d {
            out.push_str(&format!("xprime{},", a + 1));
        }
        out.push_str("r,M\n");
        for (pt, m) in &self.samples {
            for x in &pt.xprime {
                out.push_str(&format!("{x:.10},"));
            }
            out.push_str(&format!("{:.10},{m:.15e}\n", pt.r));
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "x0": self.x0,
            "M0": self.m0,
            "boundary_inf": self.boundary_inf,
            "axis_inf": self.axis_inf,
            "M1_satisfied": self.m1_satisfied,
        })
    }
}

/// `M(x) = r^k E(V(x))`.
pub fn aux_value(config: &ProblemConfig, table: &GroundEnergyTable, pt: &SpherePoint) -> f64 {
    pt.r.powi(config.sphere_dim() as i32) * table.energy_at(config.potential.eval(pt))
}

const SCAN_PER_AXIS: usize = 200;
const GOLDEN_TOL: f64 = 1e-10;

/// Scans `M` over the closed region, refines the minimizer by coordinate
/// golden-section search, and compares against the boundary infimum.
pub fn compute_aux_potential(config: &ProblemConfig, table: &GroundEnergyTable) -> AuxPotentialMap {
    let omega = config.omega;
    let d = config.xprime_dim();
    let samples: Vec<(SpherePoint, f64)> = sample_region(config, SCAN_PER_AXIS)
        .into_par_iter()
        .map(|pt| {
            let m = aux_value(config, table, &pt);
            (pt, m)
        })
        .collect();
    let (best, _) = samples
        .iter()
        .enumerate()
        .fold((0usize, f64::INFINITY), |(bi, bm), (i, (_, m))| if *m < bm { (i, *m) } else { (bi, bm) });
    let mut x0 = samples[best].0.clone();
    let step_r = (omega.r_hi - omega.r_lo) / (SCAN_PER_AXIS - 1) as f64;
    let step_x = 2.0 * omega.s_max / (SCAN_PER_AXIS - 1) as f64;
    let m_at = |pt: &SpherePoint| aux_value(config, table, pt);
    for _sweep in 0..20 {
        let before = x0.clone();
        let lo = (x0.r - step_r).max(omega.r_lo);
        let hi = (x0.r + step_r).min(omega.r_hi);
        x0.r = golden_section(|r| m_at(&SpherePoint::new(x0.xprime.clone(), r)), lo, hi);
        for axis in 0..d {
            let lo = (x0.xprime[axis] - step_x).max(-omega.s_max);
            let hi = (x0.xprime[axis] + step_x).min(omega.s_max);
            let base = x0.clone();
            x0.xprime[axis] = golden_section(
                |x| {
                    let mut p = base.clone();
                    p.xprime[axis] = x;
                    m_at(&p)
                },
                lo,
                hi,
            );
        }
        let moved = (x0.r - before.r).abs()
            + x0.xprime.iter().zip(&before.xprime).map(|(a, b)| (a - b).abs()).sum::<f64>();
        if moved < 1e-12 {
            break;
        }
    }
    let m0 = m_at(&x0);
    let boundary_inf = boundary_mesh(config, SCAN_PER_AXIS)
        .par_iter()
        .map(|pt| aux_value(config, table, pt))
        .reduce(|| f64::INFINITY, f64::min);
    let axis_inf = samples
        .iter()
        .filter(|(pt, _)| pt.xprime_norm_sq() == 0.0)
        .map(|(_, m)| *m)
        .fold(f64::INFINITY, f64::min)
        .min(if x0.xprime_norm_sq() == 0.0 { m0 } else { f64::INFINITY });
    let on_boundary = x0.r <= omega.r_lo + 1e-9
        || x0.r >= omega.r_hi - 1e-9
        || x0.xprime_norm_sq().sqrt() >= omega.s_max - 1e-9;
    let m1_satisfied = !on_boundary && m0 < boundary_inf * (1.0 - 1e-9);
    AuxPotentialMap { samples, x0, m0, boundary_inf, axis_inf, m1_satisfied }
}

/// [`compute_aux_potential`], rejecting configurations whose minimum sits on
/// the boundary.
pub fn aux_potential(config: &ProblemConfig, table: &GroundEnergyTable) -> Result<AuxPotentialMap> {
    let map = compute_aux_potential(config, table);
    if !map.m1_satisfied {
        return Err(Error::config(
            "M1",
            format!(
                "minimum of M is not interior: inf over region = {:.10}, inf over boundary = {:.10}",
                map.m0, map.boundary_inf
            ),
        ));
    }
    Ok(map)
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // keep the endpoints competitive so boundary minima are found exactly
    [a, mid, b]
        .into_iter()
        .min_by(|x, y| f(*x).partial_cmp(&f(*y)).unwrap())
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{validate_config, Potential, RawConfig};

    #[test]
    fn soliton_closed_forms() {
        let s = soliton_1d(1.0, 3.0, 1).unwrap();
        assert!((s.profile(0.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.energy - 4.0 / 3.0).abs() < 1e-10);
        assert_eq!(s.profile(-0.7), s.profile(0.7));
        let s4 = soliton_1d(4.0, 3.0, 1).unwrap();
        assert!((s4.energy - 32.0 / 3.0).abs() < 1e-9);
        assert!(matches!(soliton_1d(1.0, 3.0, 2), Err(Error::Usage(_))));
    }

    #[test]
    fn one_dimensional_ground_state_matches_soliton() {
        let gs = solve_ground_state(1.0, 1, 3.0, RadialParams::default()).unwrap();
        assert!((gs.energy - 4.0 / 3.0).abs() < 1e-3 * 4.0 / 3.0, "{}", gs.energy);
        // Nehari identity and shape
        assert!(gs.nehari_residual.abs() < 1e-9);
        let v = &gs.profile.values;
        assert!(v.iter().all(|&x| x > 0.0));
        assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    }

    #[test]
    fn table_values_for_line() {
        let t = build_ground_energy_table(&[1.0, 2.0, 4.0], 1, 3.0, RadialParams::default()).unwrap();
        let expected = [4.0 / 3.0, 3.771236166328254, 32.0 / 3.0];
        for (e, x) in t.energies.iter().zip(expected) {
            assert!((e - x).abs() < 1e-4, "{e} vs {x}");
        }
        let parsed = GroundEnergyTable::parse_text(&t.to_text()).unwrap();
        assert_eq!(parsed, t);
        let broken = t.to_text().replace("a,E\n", "a,E\n5.0e-1,9.0e0\n");
        assert!(matches!(GroundEnergyTable::parse_text(&broken), Err(Error::Table(_))));
    }

    #[test]
    fn default_aux_potential() {
        let config = ProblemConfig::desk_default();
        let table = table_for_config(&config, RadialParams::default(), None).unwrap();
        let map = aux_potential(&config, &table).unwrap();
        let r_star = (7.0 + 7f64.sqrt()) / 5.0;
        assert!((map.x0.r - r_star).abs() < 1e-6, "{}", map.x0.r);
        let m0 = 4.0 / 3.0 * r_star * r_star * (1.0 + 5.0 * (r_star - 2.0f64).powi(2)).powf(1.5);
        assert!((map.m0 - m0).abs() < 1e-9 * m0);
        assert!((map.m0 - 5.15015).abs() < 1e-3 * 5.15015);
        assert!(map.m1_satisfied && map.boundary_inf > map.m0);
    }

    #[test]
    fn constant_potential_fails_m1() {
        let mut raw = RawConfig::desk_default();
        raw.potential = Potential::Constant { c0: 1.0 };
        raw.v0 = None;
        let config = validate_config(raw).unwrap();
        let table = table_for_config(&config, RadialParams::default(), None).unwrap();
        match aux_potential(&config, &table) {
            Err(Error::Config { hypothesis: "M1", .. }) => {}
            other => panic!("expected M1 rejection, got {other:?}"),
        }
    }
}
