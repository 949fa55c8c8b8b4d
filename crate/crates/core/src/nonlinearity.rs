//! The power nonlinearity `f(s) = |s|^{p-1} s`, its odd `C^1` truncation
//! `f~_eps`, and the spatially switched `g_eps = chi_Omega f + (1 - chi_Omega) f~_eps`.
//!
//! With `delta = eps^{tau/(nu-1)}` and `H = delta/2` the truncation is
//!
//! ```text
//! f~(s) = f(s)          |s| <= H
//!         band(s)       H < |s| < delta
//!         eps^tau * s   |s| >= delta
//! ```
//!
//! The band is built from its derivative, a trapezoid: `f~'` ramps linearly
//! from `f'(H)` to a plateau `L`, stays at `L`, and ramps down to `eps^tau`
//! at `delta`. The ramp width `w` and `L` are fixed by the two endpoint
//! values of `f~` so that `L < 2 eps^tau`. Because the plateau exceeds
//! `eps^tau` the quotient `f~(s)/s` stays below `eps^tau` and is monotone.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ProblemConfig, SpherePoint};

#[inline]
pub fn f_eval(s: f64, p: f64) -> f64 {
    s.abs().powf(p - 1.0) * s
}

#[inline]
pub fn big_f_eval(s: f64, p: f64) -> f64 {
    s.abs().powf(p + 1.0) / (p + 1.0)
}

#[inline]
pub fn f_prime(s: f64, p: f64) -> f64 {
    p * s.abs().powf(p - 1.0)
}

/// Positive root of `f(r)/r = eps^tau` for the power nonlinearity.
pub fn compute_r_eps(eps: f64, tau: f64, p: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Usage(format!("eps must be positive, got {eps}")));
    }
    let root = eps.powf(tau / (p - 1.0));
    let target = eps.powf(tau);
    let check = f_eval(root, p) / root;
    if !((check - target).abs() <= 1e-12 * target.max(1e-300) || (check - target).abs() < 1e-12) {
        return Err(Error::Numeric(format!(
            "r_eps = {root} does not solve f(r)/r = eps^tau ({check} vs {target})"
        )));
    }
    Ok(root)
}

/// Trapezoidal derivative profile on `[delta/2, delta]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BandProfile {
    /// Ramp width at both ends of the band.
    pub ramp: f64,
    /// Plateau value of `f~'`.
    pub plateau: f64,
    // f~ and F~ at the knots H, H + w, delta - w, delta
    f_knots: [f64; 4],
    big_f_knots: [f64; 4],
}

#[derive(Debug, Clone, Serialize)]
pub struct PenalizedNonlinearity {
    pub eps: f64,
    pub tau: f64,
    pub nu: f64,
    pub p: f64,
    /// `eps^tau`
    pub slope: f64,
    /// `delta = eps^{tau/(nu-1)}`
    pub delta: f64,
    pub r_eps: f64,
    pub band: BandProfile,
}

impl PenalizedNonlinearity {
    pub fn new(eps: f64, tau: f64, nu: f64, p: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Usage(format!("eps must be positive, got {eps}")));
        }
        let r_eps = compute_r_eps(eps, tau, p)?;
        let slope = eps.powf(tau);
        let delta = eps.powf(tau / (nu - 1.0));
        if delta > r_eps * (1.0 + 1e-12) {
            return Err(Error::Construction {
                constraint: "delta<=r_eps",
                message: format!("delta = {delta} exceeds r_eps = {r_eps}"),
            });
        }
        let half = 0.5 * delta;
        let q0 = half.powf(p - 1.0);
        if !(q0 * (6.0 + p) <= 5.0 * slope) {
            return Err(Error::Construction {
                constraint: "eps-small",
                message: format!(
                    "f(delta/2)/(delta/2) = {q0:e} too close to eps^tau = {slope:e}; decrease eps"
                ),
            });
        }

        // integral of f~' over the band must equal eps^tau*delta - f(H) = H (2 slope - q0)
        let deficit_rate = 1.5 * slope - 0.5 * p * q0;
        let ramp = if deficit_rate > 0.0 {
            (0.5 * half * q0 / deficit_rate).min(half / 3.0)
        } else {
            half / 3.0
        };
        let plateau = (half * (2.0 * slope - q0) - 0.5 * ramp * (p * q0 + slope)) / (half - ramp);
        let band = BandProfile::build(half, delta, ramp, plateau, slope, p);

        let pn = Self {
            eps,
            tau,
            nu,
            p,
            slope,
            delta,
            r_eps,
            band,
        };
        pn.check_construction()?;
        Ok(pn)
    }

    pub fn from_config(eps: f64, config: &ProblemConfig) -> Result<Self> {
        Self::new(eps, config.tau, config.nu, config.p)
    }

    /// Replaces the plateau of `f~'` without re-balancing the band. Only
    /// useful as a negative control for [`verify_penalization`].
    pub fn with_plateau(mut self, plateau: f64) -> Self {
        let half = 0.5 * self.delta;
        self.band = BandProfile::build(half, self.delta, self.band.ramp, plateau, self.slope, self.p);
        self
    }

    fn check_construction(&self) -> Result<()> {
        let report = verify_penalization(self, 2_000);
        for row in &report.rows {
            if row.constraint == "theta_G_le_g_s_inside" {
                continue;
            }
            if row.max_violation > 1e-10 {
                return Err(Error::Construction {
                    constraint: row.constraint,
                    message: format!("violation {:e} at s = {:e}", row.max_violation, row.arg_max),
                });
            }
        }
        Ok(())
    }

    #[inline]
    fn half(&self) -> f64 {
        0.5 * self.delta
    }

    /// `f~_eps(s)`
    pub fn f_tilde(&self, s: f64) -> f64 {
        let a = s.abs();
        let value = if a <= self.half() {
            return f_eval(s, self.p);
        } else if a >= self.delta {
            return self.slope * s;
        } else {
            self.band.value(a, self.half(), self.delta, self.slope, self.p)
        };
        value.copysign(s)
    }

    /// `f~_eps'(s)`, continuous, evaluated analytically.
    pub fn f_tilde_prime(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= self.half() {
            f_prime(s, self.p)
        } else if a >= self.delta {
            self.slope
        } else {
            self.band.derivative(a, self.half(), self.delta, self.slope, self.p)
        }
    }

    /// `F~_eps(s) = int_0^s f~_eps`, exact.
    pub fn big_f_tilde(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= self.half() {
            big_f_eval(a, self.p)
        } else if a >= self.delta {
            self.band.big_f_knots[3] + 0.5 * self.slope * (a * a - self.delta * self.delta)
        } else {
            self.band.primitive(a, self.half(), self.delta, self.slope, self.p)
        }
    }

    /// `g_eps(x, s)` for the unscaled point `x`.
    pub fn g_eval(&self, point: &SpherePoint, s: f64, config: &ProblemConfig) -> f64 {
        self.g_switch(config.in_omega(point), s)
    }

    /// `G_eps(x, s)` for the unscaled point `x`.
    pub fn big_g_eval(&self, point: &SpherePoint, s: f64, config: &ProblemConfig) -> f64 {
        self.big_g_switch(config.in_omega(point), s)
    }

    #[inline]
    pub fn g_switch(&self, inside: bool, s: f64) -> f64 {
        if inside {
            f_eval(s, self.p)
        } else {
            self.f_tilde(s)
        }
    }

    #[inline]
    pub fn g_prime_switch(&self, inside: bool, s: f64) -> f64 {
        if inside {
            f_prime(s, self.p)
        } else {
            self.f_tilde_prime(s)
        }
    }

    #[inline]
    pub fn big_g_switch(&self, inside: bool, s: f64) -> f64 {
        if inside {
            big_f_eval(s, self.p)
        } else {
            self.big_f_tilde(s)
        }
    }
}

impl BandProfile {
    fn build(half: f64, delta: f64, ramp: f64, plateau: f64, slope: f64, p: f64) -> Self {
        let mut band = Self {
            ramp,
            plateau,
            f_knots: [0.0; 4],
            big_f_knots: [0.0; 4],
        };
        let s1 = half + ramp;
        let s2 = delta - ramp;
        band.f_knots = [
            f_eval(half, p),
            band.value(s1, half, delta, slope, p),
            band.value(s2, half, delta, slope, p),
            slope * delta,
        ];
        let q0 = half.powf(p - 1.0);
        let w = ramp;
        // F~ on the rising ramp, from the left
        let big_f1 = big_f_eval(half, p) + band.f_knots[0] * w + 0.5 * p * q0 * w * w + (plateau - p * q0) * w * w / 6.0;
        band.big_f_knots[0] = big_f_eval(half, p);
        band.big_f_knots[1] = big_f1;
        band.big_f_knots[2] = big_f1 + band.plateau_integral(s1, s2, delta, slope);
        band.big_f_knots[3] = band.big_f_knots[2] + band.falling_integral(s2, delta, delta, slope);
        band
    }

    // f~(s) on the plateau: eps^tau s - (L - eps^tau)(delta - s - w/2)
    #[inline]
    fn plateau_value(&self, s: f64, delta: f64, slope: f64) -> f64 {
        slope * s - (self.plateau - slope) * (delta - s - 0.5 * self.ramp)
    }

    fn plateau_integral(&self, a: f64, b: f64, delta: f64, slope: f64) -> f64 {
        let c = delta - 0.5 * self.ramp;
        0.5 * slope * (b * b - a * a) - (self.plateau - slope) * (c * (b - a) - 0.5 * (b * b - a * a))
    }

    // int_a^b of eps^tau t - (L - eps^tau)(delta - t)^2 / (2w)
    fn falling_integral(&self, a: f64, b: f64, delta: f64, slope: f64) -> f64 {
        let ua = delta - a;
        let ub = delta - b;
        0.5 * slope * (b * b - a * a) - (self.plateau - slope) / (2.0 * self.ramp) * (ua.powi(3) - ub.powi(3)) / 3.0
    }

    fn value(&self, s: f64, half: f64, delta: f64, slope: f64, p: f64) -> f64 {
        let w = self.ramp;
        if s < half + w {
            let u = s - half;
            let q0 = half.powf(p - 1.0);
            f_eval(half, p) + p * q0 * u + (self.plateau - p * q0) * u * u / (2.0 * w)
        } else if s <= delta - w {
            self.plateau_value(s, delta, slope)
        } else {
            let u = delta - s;
            slope * s - (self.plateau - slope) * u * u / (2.0 * w)
        }
    }

    fn derivative(&self, s: f64, half: f64, delta: f64, slope: f64, p: f64) -> f64 {
        let w = self.ramp;
        if s < half + w {
            let pq0 = p * half.powf(p - 1.0);
            pq0 + (self.plateau - pq0) * (s - half) / w
        } else if s <= delta - w {
            self.plateau
        } else {
            slope + (self.plateau - slope) * (delta - s) / w
        }
    }

    fn primitive(&self, s: f64, half: f64, delta: f64, slope: f64, p: f64) -> f64 {
        let w = self.ramp;
        if s < half + w {
            let u = s - half;
            let q0 = half.powf(p - 1.0);
            self.big_f_knots[0] + self.f_knots[0] * u + 0.5 * p * q0 * u * u + (self.plateau - p * q0) * u * u * u / (6.0 * w)
        } else if s <= delta - w {
            self.big_f_knots[1] + self.plateau_integral(half + w, s, delta, slope)
        } else {
            self.big_f_knots[2] + self.falling_integral(delta - w, s, delta, slope)
        }
    }
}

/// One line of the constraint report.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintRow {
    pub constraint: &'static str,
    /// Violation relative to the natural scale of the constraint.
    pub max_violation: f64,
    pub arg_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PenalizationReport {
    pub eps: f64,
    pub rows: Vec<ConstraintRow>,
}

impl PenalizationReport {
    pub fn max_violation(&self) -> f64 {
        self.rows.iter().map(|r| r.max_violation).fold(0.0, f64::max)
    }

    pub fn get(&self, constraint: &str) -> Option<&ConstraintRow> {
        self.rows.iter().find(|r| r.constraint == constraint)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("constraint,max_violation,arg_max\n");
        for row in &self.rows {
            out.push_str(&format!("{},{:e},{:e}\n", row.constraint, row.max_violation, row.arg_max));
        }
        out
    }
}

/// Samples `s` log-uniformly on `[1e-3 delta, 10 r_eps]` (and the band
/// uniformly) and reports the worst violation of each constraint. Every
/// violation is scaled by `eps^tau |s|` (or `eps^tau` for derivative bounds).
pub fn verify_penalization(pn: &PenalizedNonlinearity, n_samples: usize) -> PenalizationReport {
    let n = n_samples.max(16);
    let lo = 1e-3 * pn.delta;
    let hi = 10.0 * pn.r_eps.max(pn.delta);
    let mut samples: Vec<f64> = (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    let half = 0.5 * pn.delta;
    samples.extend((0..=n).map(|i| half + half * i as f64 / n as f64));
    let w = pn.band.ramp;
    samples.extend((0..=n / 4).map(|i| half + w * i as f64 / (n / 4) as f64));
    samples.extend((0..=n / 4).map(|i| pn.delta - w * i as f64 / (n / 4) as f64));
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    samples.dedup();

    let e = pn.slope;
    let theta = pn.p + 1.0;
    let mut rows = vec![
        ConstraintRow { constraint: "abs_f_tilde_le_eps_tau_s", max_violation: 0.0, arg_max: f64::NAN },
        ConstraintRow { constraint: "f_tilde_prime_nonneg", max_violation: 0.0, arg_max: f64::NAN },
        ConstraintRow { constraint: "f_tilde_prime_le_2_eps_tau", max_violation: 0.0, arg_max: f64::NAN },
        ConstraintRow { constraint: "quotient_monotone", max_violation: 0.0, arg_max: f64::NAN },
        ConstraintRow { constraint: "two_G_le_g_s_outside", max_violation: 0.0, arg_max: f64::NAN },
        ConstraintRow { constraint: "theta_G_le_g_s_inside", max_violation: 0.0, arg_max: f64::NAN },
        ConstraintRow { constraint: "odd", max_violation: 0.0, arg_max: f64::NAN },
    ];
    let mut bump = |idx: usize, violation: f64, s: f64| {
        if violation > rows[idx].max_violation {
            rows[idx].max_violation = violation;
            rows[idx].arg_max = s;
        }
    };

    let mut prev_q: Option<f64> = None;
    for &s in &samples {
        let ft = pn.f_tilde(s);
        let fp = pn.f_tilde_prime(s);
        let scale = e * s;
        bump(0, (ft.abs() - e * s) / scale, s);
        bump(1, -fp / e, s);
        bump(2, (fp - 2.0 * e) / e, s);
        let q = ft / s;
        if let Some(prev) = prev_q {
            bump(3, (prev - q) / e, s);
        }
        prev_q = Some(q);
        // q' >= 0 pointwise, i.e. f~' >= f~/s
        bump(3, (q - fp) / e, s);
        bump(4, (2.0 * pn.big_f_tilde(s) - ft * s) / (scale * s), s);
        let f = f_eval(s, pn.p);
        let denom = (f * s).abs().max(f64::MIN_POSITIVE);
        bump(5, (theta * big_f_eval(s, pn.p) - f * s) / denom, s);
        bump(6, (pn.f_tilde(-s) + ft).abs() / scale, s);
    }
    PenalizationReport { eps: pn.eps, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk(eps: f64) -> PenalizedNonlinearity {
        PenalizedNonlinearity::new(eps, 3.0, 2.0, 3.0).unwrap()
    }

    #[test]
    fn power_nonlinearity_values() {
        assert_eq!(f_eval(2.0, 3.0), 8.0);
        assert_eq!(big_f_eval(2.0, 3.0), 4.0);
        assert_eq!(f_prime(2.0, 3.0), 12.0);
        assert_eq!(f_eval(-2.0, 3.0), -8.0);
        for p in [1.5, 2.0, 3.0, 4.2] {
            let s = 1.7;
            let lhs = (p + 1.0) * big_f_eval(s, p);
            assert!((lhs - f_eval(s, p) * s).abs() < 1e-12 * lhs);
        }
    }

    #[test]
    fn r_eps_closed_form() {
        assert!((compute_r_eps(0.1, 3.0, 3.0).unwrap() - 0.1f64.powf(1.5)).abs() < 1e-15);
        assert!((compute_r_eps(0.1, 3.0, 3.0).unwrap() - 0.0316228).abs() < 1e-7);
        assert_eq!(compute_r_eps(1.0, 3.0, 3.0).unwrap(), 1.0);
        assert!((compute_r_eps(0.2, 3.0, 3.0).unwrap() - 0.0894427).abs() < 1e-7);
        assert!(compute_r_eps(0.0, 3.0, 3.0).is_err());
    }

    #[test]
    fn branches_at_eps_one_tenth() {
        let pn = desk(0.1);
        assert!((pn.delta - 1e-3).abs() < 1e-18);
        assert!((pn.f_tilde(0.0004) - 6.4e-11).abs() < 1e-24);
        assert!((pn.f_tilde(0.002) - 2.0e-6).abs() < 1e-19);
        assert_eq!(pn.f_tilde(-0.0007), -pn.f_tilde(0.0007));
        assert!(pn.delta <= pn.r_eps);
    }

    #[test]
    fn band_is_c1_at_knots() {
        for eps in [0.5, 0.2, 0.1] {
            let pn = desk(eps);
            let half = 0.5 * pn.delta;
            let tiny = 1e-9 * pn.band.ramp;
            for knot in [half, half + pn.band.ramp, pn.delta - pn.band.ramp, pn.delta] {
                let l = pn.f_tilde(knot - tiny);
                let r = pn.f_tilde(knot + tiny);
                assert!((l - r).abs() < 1e-6 * pn.slope * pn.delta, "value jump at {knot}");
                let dl = pn.f_tilde_prime(knot - tiny);
                let dr = pn.f_tilde_prime(knot + tiny);
                assert!((dl - dr).abs() < 1e-5 * pn.slope, "slope jump at {knot}: {dl} vs {dr}");
            }
            // f~(delta) lands exactly on the linear branch
            let v = pn.band.value(pn.delta, half, pn.delta, pn.slope, pn.p);
            assert!((v - pn.slope * pn.delta).abs() < 1e-12 * pn.slope * pn.delta);
        }
    }

    #[test]
    fn report_is_clean_for_default_eps() {
        for eps in [0.5, 0.2, 0.1] {
            let report = verify_penalization(&desk(eps), 10_000);
            for row in &report.rows {
                assert!(row.max_violation <= 1e-12, "eps={eps} {}: {:e}", row.constraint, row.max_violation);
            }
        }
    }

    #[test]
    fn corrupted_plateau_is_flagged() {
        let bad = desk(0.1).with_plateau(2.5 * 1e-3);
        let report = verify_penalization(&bad, 4_000);
        assert!(report.get("f_tilde_prime_le_2_eps_tau").unwrap().max_violation > 0.1);
    }

    #[test]
    fn primitive_matches_central_differences() {
        for eps in [0.5, 0.1] {
            let pn = desk(eps);
            let lo = 1e-2 * pn.delta;
            let hi = 5.0 * pn.delta;
            for i in 0..1000 {
                let s = lo + (hi - lo) * i as f64 / 999.0;
                let step = 1e-6 * pn.delta;
                let fd = (pn.big_f_tilde(s + step) - pn.big_f_tilde(s - step)) / (2.0 * step);
                let g = pn.f_tilde(s);
                // compare on the natural scale eps^tau * s
                assert!((fd - g).abs() < 1e-9 * pn.slope * s.max(pn.delta), "s={s}: {fd} vs {g}");
            }
        }
    }

    #[test]
    fn quotient_ordering_against_f() {
        // f~/s <= eps^tau everywhere; f~ = f below delta/2 and f~ >= f on [delta, r_eps]
        let pn = desk(0.2);
        let n = 2000;
        for i in 1..=n {
            let s = 2.0 * pn.r_eps * i as f64 / n as f64;
            assert!(pn.f_tilde(s) / s <= pn.slope * (1.0 + 1e-14));
            if s >= pn.delta && s <= pn.r_eps {
                assert!(pn.f_tilde(s) >= f_eval(s, 3.0) * (1.0 - 1e-14));
            }
            if s >= pn.r_eps {
                assert!(pn.f_tilde(s) <= f_eval(s, 3.0) * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn g_switches_on_omega() {
        let config = ProblemConfig::desk_default();
        let pn = PenalizedNonlinearity::from_config(0.1, &config).unwrap();
        let inside = SpherePoint::new(vec![], 2.0);
        let outside = SpherePoint::new(vec![], 4.0);
        assert_eq!(pn.g_eval(&inside, 0.5, &config), 0.125);
        assert!((pn.g_eval(&outside, 0.5, &config) - 5e-4).abs() < 1e-18);
        assert_eq!(pn.g_eval(&outside, 0.0, &config), 0.0);
        assert_eq!(pn.big_g_eval(&inside, 0.0, &config), 0.0);
        assert_eq!(pn.big_g_eval(&outside, 0.0, &config), 0.0);
    }
}
