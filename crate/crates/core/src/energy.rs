//! The penalized functional
//!
//! ```text
//! I(v) = 1/2 int |grad v|^2 + V(eps x) v^2  -  int G_eps(eps x, v)
//! ```
//!
//! on a [`ReducedGrid`], its derivative, and projections onto the Nehari
//! set and the nodal Nehari set.
//!
//! On the grid `v+` and `v-` have disjoint nodal supports, but the face sum
//! of the kinetic term still couples them across the faces where `v`
//! changes sign. The nodal projection therefore solves the coupled 2x2
//! system for `(t, s)` instead of two independent scalar problems.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ProblemConfig;
use crate::grid::{build_grid, ReducedField, ReducedGrid};
use crate::linalg::{pcg, thomas_solve};
use crate::nonlinearity::{big_f_eval, f_eval, f_prime, PenalizedNonlinearity};

/// Relative tolerance on Nehari residuals after projection.
pub const NEHARI_TOL: f64 = 1e-10;

const T_MIN: f64 = 1e-8;
const T_MAX: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    /// `1/2 ||v||_eps^2`
    pub kinetic_potential: f64,
    /// `int G_eps(eps x, v)`
    pub nonlinear: f64,
    pub total: f64,
    /// `I'(v) v+`
    pub nehari_plus: f64,
    /// `I'(v) v-`
    pub nehari_minus: f64,
    /// `||v+||_eps`
    pub plus_norm: f64,
    /// `||v-||_eps`
    pub minus_norm: f64,
}

#[derive(Debug, Clone)]
enum Source {
    Penalized(PenalizedNonlinearity),
    Power(f64),
}

/// Everything needed to evaluate the functional on one grid.
#[derive(Debug, Clone)]
pub struct EnergyFunctional {
    pub grid: Arc<ReducedGrid>,
    /// `V(eps x)` at the nodes.
    pub potential: Vec<f64>,
    /// `eps x in Omega` at the nodes.
    pub inside: Vec<bool>,
    source: Source,
    weights: Vec<f64>,
    // diagonal of K + W V, the metric of the Sobolev gradient
    metric_diag: Vec<f64>,
}

/// Result of the nodal projection `t v+ + s v-`.
#[derive(Debug, Clone)]
pub struct NodalProjection {
    pub t: f64,
    pub s: f64,
    pub field: ReducedField,
    /// `I'(u) u+ / ||u+||^2` and `I'(u) u- / ||u-||^2` for the projected `u`.
    pub residuals: (f64, f64),
}

// Quadratic data of the pair (v+, v-) for the map (t, s) -> I(t v+ + s v-).
struct PartPair {
    plus: Vec<f64>,
    minus: Vec<f64>,
    a_pp: f64,
    a_pm: f64,
    a_mm: f64,
}

impl EnergyFunctional {
    /// Penalized functional for `config` at parameter `eps`.
    pub fn new(config: &ProblemConfig, eps: f64) -> Result<Self> {
        let grid = Arc::new(build_grid(config, eps)?);
        let pn = PenalizedNonlinearity::from_config(eps, config)?;
        Self::penalized(grid, config, pn)
    }

    pub fn penalized(grid: Arc<ReducedGrid>, config: &ProblemConfig, pn: PenalizedNonlinearity) -> Result<Self> {
        let potential = grid.potential_at_nodes(config);
        let inside = grid.omega_mask(config);
        Ok(Self::assemble(grid, potential, inside, Source::Penalized(pn)))
    }

    /// Unpenalized functional `1/2 int |grad w|^2 + a w^2 - int F(w)` with
    /// constant potential `a`, as used for the limit problem.
    pub fn limit(grid: Arc<ReducedGrid>, a: f64, p: f64) -> Self {
        let n = grid.len();
        Self::assemble(grid, vec![a; n], vec![true; n], Source::Power(p))
    }

    fn assemble(grid: Arc<ReducedGrid>, potential: Vec<f64>, inside: Vec<bool>, source: Source) -> Self {
        let weights = grid.weights();
        let metric_diag = grid
            .stiffness_diagonal()
            .iter()
            .zip(&weights)
            .zip(&potential)
            .map(|((k, w), v)| k + w * v)
            .collect();
        Self { grid, potential, inside, source, weights, metric_diag }
    }

    pub fn nonlinearity(&self) -> Option<&PenalizedNonlinearity> {
        match &self.source {
            Source::Penalized(pn) => Some(pn),
            Source::Power(_) => None,
        }
    }

    pub fn eps(&self) -> f64 {
        self.grid.eps()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn g(&self, idx: usize, s: f64) -> f64 {
        match &self.source {
            Source::Penalized(pn) => pn.g_switch(self.inside[idx], s),
            Source::Power(p) => f_eval(s, *p),
        }
    }

    #[inline]
    pub fn g_prime(&self, idx: usize, s: f64) -> f64 {
        match &self.source {
            Source::Penalized(pn) => pn.g_prime_switch(self.inside[idx], s),
            Source::Power(p) => f_prime(s, *p),
        }
    }

    #[inline]
    pub fn big_g(&self, idx: usize, s: f64) -> f64 {
        match &self.source {
            Source::Penalized(pn) => pn.big_g_switch(self.inside[idx], s),
            Source::Power(p) => big_f_eval(s, *p),
        }
    }

    pub fn field(&self, values: Vec<f64>) -> ReducedField {
        ReducedField { values, grid: Arc::clone(&self.grid) }
    }

    /// `<u, w>_eps = int grad u . grad w + V u w`.
    pub fn bilinear(&self, u: &[f64], w: &[f64]) -> f64 {
        let mass: f64 = (0..u.len()).map(|i| self.weights[i] * self.potential[i] * u[i] * w[i]).sum();
        self.grid.gradient_pairing(u, w) + mass
    }

    pub fn norm_sq(&self, v: &[f64]) -> f64 {
        self.bilinear(v, v)
    }

    /// `int G(eps x, v)`
    pub fn nonlinear_integral(&self, v: &[f64]) -> f64 {
        (0..v.len()).map(|i| self.weights[i] * self.big_g(i, v[i])).sum()
    }

    /// `I(v)`
    pub fn value(&self, v: &[f64]) -> f64 {
        0.5 * self.norm_sq(v) - self.nonlinear_integral(v)
    }

    /// `I'(v) w`
    pub fn derivative(&self, v: &[f64], w: &[f64]) -> f64 {
        let nonlinear: f64 = (0..v.len()).map(|i| self.weights[i] * self.g(i, v[i]) * w[i]).sum();
        self.bilinear(v, w) - nonlinear
    }

    pub fn energy(&self, v: &ReducedField) -> EnergyBreakdown {
        let values = &v.values;
        let norm_sq = self.norm_sq(values);
        let nonlinear = self.nonlinear_integral(values);
        let kinetic_potential = 0.5 * norm_sq;
        let plus = v.positive_part().values;
        let minus = v.negative_part().values;
        EnergyBreakdown {
            kinetic_potential,
            nonlinear,
            total: kinetic_potential - nonlinear,
            nehari_plus: self.derivative(values, &plus),
            nehari_minus: self.derivative(values, &minus),
            plus_norm: self.norm_sq(&plus).sqrt(),
            minus_norm: self.norm_sq(&minus).sqrt(),
        }
    }

    /// Coefficient vector of `I'(v)`: `(I'(v) w) = e . w` for every `w`.
    pub fn euclidean_gradient(&self, v: &[f64]) -> Vec<f64> {
        let mut e = vec![0.0; v.len()];
        self.grid.stiffness_apply(v, &mut e);
        for i in 0..v.len() {
            e[i] += self.weights[i] * (self.potential[i] * v[i] - self.g(i, v[i]));
        }
        e
    }

    /// Representative of `I'(v)` in the weighted `L^2` product, which is the
    /// residual `-Delta v + V v - g(v)` at each node.
    pub fn gradient(&self, v: &ReducedField) -> ReducedField {
        let e = self.euclidean_gradient(&v.values);
        self.field(e.iter().zip(&self.weights).map(|(x, w)| x / w).collect())
    }

    /// Weighted `L^2` norm of the residual `-Delta v + V v - g(v)`.
    pub fn residual_norm(&self, v: &[f64]) -> f64 {
        let e = self.euclidean_gradient(v);
        e.iter().zip(&self.weights).map(|(x, w)| x * x / w).sum::<f64>().sqrt()
    }

    /// Solves `(K + W V) s = e`, i.e. the Riesz representative of `e` in the
    /// `<.,.>_eps` product.
    pub fn sobolev_solve(&self, e: &[f64]) -> Result<Vec<f64>> {
        if self.grid.xprime_dim() == 0 {
            thomas_solve(&self.metric_diag, &self.grid.radial_off_diagonal(), e)
        } else {
            let apply = |x: &[f64], out: &mut [f64]| self.metric_apply(x, out);
            let jacobi = |r: &[f64], z: &mut [f64]| {
                for i in 0..r.len() {
                    z[i] = r[i] / self.metric_diag[i];
                }
            };
            let (s, outcome) = pcg(apply, jacobi, e, 1e-12, 20 * e.len().max(100));
            if outcome.converged {
                Ok(s)
            } else {
                Err(Error::Numeric(format!(
                    "metric solve stalled after {} iterations (residual {:e})",
                    outcome.iterations, outcome.residual
                )))
            }
        }
    }

    /// `(K + W V) x`
    pub fn metric_apply(&self, x: &[f64], out: &mut [f64]) {
        self.grid.stiffness_apply(x, out);
        for i in 0..x.len() {
            out[i] += self.weights[i] * self.potential[i] * x[i];
        }
    }

    /// Second derivative applied to `w`: `(K + W (V - g'(v))) w`.
    pub fn hessian_apply(&self, v: &[f64], w: &[f64], out: &mut [f64]) {
        self.grid.stiffness_apply(w, out);
        for i in 0..w.len() {
            out[i] += self.weights[i] * (self.potential[i] - self.g_prime(i, v[i])) * w[i];
        }
    }

    /// Finds `t > 0` with `I'(t v)(t v) = 0`.
    pub fn scalar_nehari_project(&self, v: &ReducedField) -> Result<(f64, ReducedField)> {
        let t = self.scalar_factor(&v.values)?;
        Ok((t, v.scaled(t)))
    }

    fn scalar_factor(&self, v: &[f64]) -> Result<f64> {
        let a = self.norm_sq(v);
        if !(a > 0.0) {
            return Err(Error::Usage("cannot project the zero field".into()));
        }
        let support: Vec<usize> = (0..v.len()).filter(|&i| v[i] != 0.0).collect();
        self.solve_part(a, v, &support, 0.0, |_| 0.0)
    }

    // Root in t of  t a + c(t) - int g(t v) v  where c is a (monotone)
    // coupling term; returns t.
    fn solve_part<C: Fn(f64) -> f64>(&self, a: f64, v: &[f64], support: &[usize], c_slope: f64, coupling: C) -> Result<f64> {
        // divided by t: h(t) = a + c(t)/t - int g(tv) v / t, nonincreasing
        let h = |t: f64| -> (f64, f64) {
            let mut nl = 0.0;
            let mut dnl = 0.0;
            for &i in support {
                let x = v[i];
                let w = self.weights[i];
                let gv = self.g(i, t * x);
                nl += w * gv * x;
                dnl += w * self.g_prime(i, t * x) * x * x;
            }
            let c = coupling(t);
            let value = a + (c - nl) / t;
            // derivative of (c(t) - nl(t)) / t
            let deriv = ((c_slope - dnl) * t - (c - nl)) / (t * t);
            (value, deriv)
        };
        let tol = NEHARI_TOL * a;
        let (mut lo, mut hi);
        let (h1, _) = h(1.0);
        if h1.abs() <= tol {
            return Ok(1.0);
        }
        if h1 > 0.0 {
            lo = 1.0;
            hi = 10.0;
            while h(hi).0 > 0.0 {
                lo = hi;
                hi *= 10.0;
                if hi > T_MAX {
                    return Err(Error::Projection(format!(
                        "no sign change of the Nehari residual in [{T_MIN:e}, {T_MAX:e}]: \
                         the nonlinearity never dominates the quadratic part"
                    )));
                }
            }
        } else {
            hi = 1.0;
            lo = 0.1;
            while h(lo).0 < 0.0 {
                hi = lo;
                lo /= 10.0;
                if lo < T_MIN {
                    return Err(Error::Projection(format!(
                        "no sign change of the Nehari residual in [{T_MIN:e}, {T_MAX:e}]"
                    )));
                }
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..300 {
            let (value, deriv) = h(t);
            if value.abs() <= tol {
                return Ok(t);
            }
            if value > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let newton = t - value / deriv;
            t = if deriv < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(t);
            }
        }
        Err(Error::Projection(format!("Nehari root not resolved in [{lo:e}, {hi:e}]")))
    }

    fn part_pair(&self, v: &[f64]) -> Result<PartPair> {
        let plus: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
        let minus: Vec<f64> = v.iter().map(|x| x.min(0.0)).collect();
        let mass = |u: &[f64]| (0..u.len()).map(|i| self.weights[i] * u[i] * u[i]).sum::<f64>();
        if !(mass(&plus) > 0.0) || !(mass(&minus) > 0.0) {
            return Err(Error::NodalDegeneracy(format!(
                "signed part vanished (positive mass {:e}, negative mass {:e})",
                mass(&plus),
                mass(&minus)
            )));
        }
        Ok(PartPair {
            a_pp: self.norm_sq(&plus),
            a_pm: self.bilinear(&plus, &minus),
            a_mm: self.norm_sq(&minus),
            plus,
            minus,
        })
    }

    // (F1, F2) = (I'(t v+ + s v-) v+, I'(t v+ + s v-) v-) and its Jacobian.
    fn pair_system(&self, pair: &PartPair, t: f64, s: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let mut g_p = 0.0;
        let mut dg_p = 0.0;
        let mut g_m = 0.0;
        let mut dg_m = 0.0;
        for i in 0..pair.plus.len() {
            let w = self.weights[i];
            let a = pair.plus[i];
            if a != 0.0 {
                g_p += w * self.g(i, t * a) * a;
                dg_p += w * self.g_prime(i, t * a) * a * a;
            }
            let b = pair.minus[i];
            if b != 0.0 {
                g_m += w * self.g(i, s * b) * b;
                dg_m += w * self.g_prime(i, s * b) * b * b;
            }
        }
        let f = [
            t * pair.a_pp + s * pair.a_pm - g_p,
            t * pair.a_pm + s * pair.a_mm - g_m,
        ];
        let jac = [[pair.a_pp - dg_p, pair.a_pm], [pair.a_pm, pair.a_mm - dg_m]];
        (f, jac)
    }

    /// Finds `(t, s)` with `t v+ + s v-` in the nodal Nehari set.
    pub fn nodal_nehari_project(&self, v: &ReducedField) -> Result<NodalProjection> {
        let pair = self.part_pair(&v.values)?;
        let support_p: Vec<usize> = (0..pair.plus.len()).filter(|&i| pair.plus[i] != 0.0).collect();
        let support_m: Vec<usize> = (0..pair.minus.len()).filter(|&i| pair.minus[i] != 0.0).collect();
        let mut t = self.solve_part(pair.a_pp, &pair.plus, &support_p, 0.0, |_| 0.0)?;
        let mut s = self.solve_part(pair.a_mm, &pair.minus, &support_m, 0.0, |_| 0.0)?;

        let scaled_residual = |f: [f64; 2], t: f64, s: f64| -> f64 {
            (f[0] / (t * pair.a_pp)).abs().max((f[1] / (s * pair.a_mm)).abs())
        };
        let (mut f, mut jac) = self.pair_system(&pair, t, s);
        let mut res = scaled_residual(f, t, s);
        let mut iterations = 0;
        while res > NEHARI_TOL {
            iterations += 1;
            if iterations > 200 {
                // alternate exact one-dimensional solves as a fallback
                for _ in 0..500 {
                    let s_fixed = s;
                    t = self.solve_part(pair.a_pp, &pair.plus, &support_p, 0.0, |_| s_fixed * pair.a_pm)?;
                    let t_fixed = t;
                    s = self.solve_part(pair.a_mm, &pair.minus, &support_m, 0.0, |_| t_fixed * pair.a_pm)?;
                    let (f2, _) = self.pair_system(&pair, t, s);
                    res = scaled_residual(f2, t, s);
                    if res <= NEHARI_TOL {
                        break;
                    }
                }
                if res > NEHARI_TOL {
                    return Err(Error::Projection(format!("nodal projection stalled at residual {res:e}")));
                }
                break;
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det == 0.0 || !det.is_finite() {
                return Err(Error::Projection("singular Jacobian in the nodal projection".into()));
            }
            let dt = (f[0] * jac[1][1] - f[1] * jac[0][1]) / det;
            let ds = (jac[0][0] * f[1] - jac[1][0] * f[0]) / det;
            let mut lambda = 1.0;
            loop {
                let (nt, ns) = (t - lambda * dt, s - lambda * ds);
                if nt > 0.0 && ns > 0.0 {
                    let (nf, nj) = self.pair_system(&pair, nt, ns);
                    let nres = scaled_residual(nf, nt, ns);
                    if nres < res || lambda < 1e-6 {
                        t = nt;
                        s = ns;
                        f = nf;
                        jac = nj;
                        res = nres;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 1e-12 {
                    iterations = usize::MAX / 2;
                    break;
                }
            }
        }
        let values: Vec<f64> = (0..pair.plus.len()).map(|i| t * pair.plus[i] + s * pair.minus[i]).collect();
        let (f, _) = self.pair_system(&pair, t, s);
        let residuals = (f[0] / (t * pair.a_pp), f[1] / (s * pair.a_mm));
        Ok(NodalProjection { t, s, field: self.field(values), residuals })
    }

    /// `I'(v) v+ / ||v+||^2` and `I'(v) v- / ||v-||^2`.
    pub fn nehari_residuals(&self, v: &ReducedField) -> (f64, f64) {
        let b = self.energy(v);
        let rel = |r: f64, n: f64| if n > 0.0 { r / (n * n) } else { 0.0 };
        (rel(b.nehari_plus, b.plus_norm), rel(b.nehari_minus, b.minus_norm))
    }
}

/// Tabulated `psi(t, s) = I(t v+ + s v-)`.
#[derive(Debug, Clone, Serialize)]
pub struct PsiSurface {
    pub t_values: Vec<f64>,
    pub s_values: Vec<f64>,
    /// Row-major, `values[i][j] = psi(t_i, s_j)`.
    pub values: Vec<Vec<f64>>,
    pub argmax: (f64, f64),
    /// Central-difference Hessian at `(1, 1)` with step `1e-4`.
    pub hessian: [[f64; 2]; 2],
    pub residuals: (f64, f64),
}

impl PsiSurface {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,s,psi\n");
        for (i, t) in self.t_values.iter().enumerate() {
            for (j, s) in self.s_values.iter().enumerate() {
                out.push_str(&format!("{t:.10},{s:.10},{:.15e}\n", self.values[i][j]));
            }
        }
        out
    }

    pub fn hessian_negative_definite(&self) -> bool {
        let h = self.hessian;
        h[0][0] < 0.0 && h[1][1] < 0.0 && h[0][0] * h[1][1] - h[0][1] * h[1][0] > 0.0
    }
}

/// Tabulates `psi_v` on an `n x n` grid over `t_range x s_range`.
pub fn psi_surface(
    functional: &EnergyFunctional,
    v: &ReducedField,
    t_range: (f64, f64),
    s_range: (f64, f64),
    n: usize,
) -> Result<PsiSurface> {
    if n < 2 {
        return Err(Error::Usage("psi surface needs at least 2 samples per axis".into()));
    }
    let pair = functional.part_pair(&v.values)?;
    // psi(t,s) = q(t,s) - P(t) - M(s) with q quadratic and the parts disjoint
    let p_part = |t: f64| functional.nonlinear_integral(&pair.plus.iter().map(|a| t * a).collect::<Vec<_>>());
    let m_part = |s: f64| functional.nonlinear_integral(&pair.minus.iter().map(|b| s * b).collect::<Vec<_>>());
    let psi = |t: f64, s: f64, pt: f64, ms: f64| {
        0.5 * (t * t * pair.a_pp + 2.0 * t * s * pair.a_pm + s * s * pair.a_mm) - pt - ms
    };
    let axis = |(a, b): (f64, f64)| -> Vec<f64> { (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect() };
    let t_values = axis(t_range);
    let s_values = axis(s_range);
    let pt: Vec<f64> = t_values.iter().map(|&t| p_part(t)).collect();
    let ms: Vec<f64> = s_values.iter().map(|&s| m_part(s)).collect();
    let mut values = vec![vec![0.0; n]; n];
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let val = psi(t_values[i], s_values[j], pt[i], ms[j]);
            values[i][j] = val;
            if val > best.0 {
                best = (val, t_values[i], s_values[j]);
            }
        }
    }
    let step = 1e-4;
    let full = |t: f64, s: f64| psi(t, s, p_part(t), m_part(s));
    let c = full(1.0, 1.0);
    let htt = (full(1.0 + step, 1.0) - 2.0 * c + full(1.0 - step, 1.0)) / (step * step);
    let hss = (full(1.0, 1.0 + step) - 2.0 * c + full(1.0, 1.0 - step)) / (step * step);
    let hts = (full(1.0 + step, 1.0 + step) - full(1.0 + step, 1.0 - step) - full(1.0 - step, 1.0 + step)
        + full(1.0 - step, 1.0 - step))
        / (4.0 * step * step);
    Ok(PsiSurface {
        t_values,
        s_values,
        values,
        argmax: (best.1, best.2),
        hessian: [[htt, hts], [hts, hss]],
        residuals: functional.nehari_residuals(v),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub pass: bool,
    /// Set when `eps^tau >= V0`, where the bound is not available.
    pub skipped: Option<String>,
}

/// `(theta - 2) / (2 theta) * (1 - eps^tau / V0)`.
pub fn coercivity_constant(theta: f64, eps: f64, tau: f64, v0: f64) -> f64 {
    (theta - 2.0) / (2.0 * theta) * (1.0 - eps.powf(tau) / v0)
}

/// Checks `I(v) >= C ||v||_eps^2` for `v` on the Nehari set.
pub fn coercivity_check(functional: &EnergyFunctional, v: &ReducedField, config: &ProblemConfig) -> CoercivityReport {
    let eps = functional.eps();
    let slope = eps.powf(config.tau);
    if slope >= config.v0 {
        return CoercivityReport {
            lhs: f64::NAN,
            rhs: f64::NAN,
            constant: f64::NAN,
            pass: false,
            skipped: Some(format!("eps^tau = {slope} >= V0 = {}: eps is not small enough", config.v0)),
        };
    }
    let constant = coercivity_constant(config.theta, eps, config.tau, config.v0);
    let lhs = functional.value(&v.values);
    let rhs = constant * functional.norm_sq(&v.values);
    CoercivityReport { lhs, rhs, constant, pass: lhs >= rhs, skipped: None }
}

#[derive(Debug, Clone, Serialize)]
pub struct DescentDirectionReport {
    pub nehari_plus: f64,
    pub nehari_minus: f64,
    pub t: f64,
    pub s: f64,
    pub pass: bool,
    pub skipped: bool,
}

/// When `I'(v) v+ <= 0` and `I'(v) v- <= 0` the nodal projection must
/// shrink both parts: `t, s <= 1`.
pub fn descent_direction_check(functional: &EnergyFunctional, v: &ReducedField) -> Result<DescentDirectionReport> {
    let b = functional.energy(v);
    let scale_p = b.plus_norm * b.plus_norm;
    let scale_m = b.minus_norm * b.minus_norm;
    if b.nehari_plus > NEHARI_TOL * scale_p || b.nehari_minus > NEHARI_TOL * scale_m {
        return Ok(DescentDirectionReport {
            nehari_plus: b.nehari_plus,
            nehari_minus: b.nehari_minus,
            t: f64::NAN,
            s: f64::NAN,
            pass: false,
            skipped: true,
        });
    }
    let proj = functional.nodal_nehari_project(v)?;
    Ok(DescentDirectionReport {
        nehari_plus: b.nehari_plus,
        nehari_minus: b.nehari_minus,
        t: proj.t,
        s: proj.s,
        pass: proj.t <= 1.0 + 1e-9 && proj.s <= 1.0 + 1e-9,
        skipped: false,
    })
}
