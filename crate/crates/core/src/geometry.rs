//! Problem configuration, the split `x = (x', x'')` and the distance between
//! concentric spheres.
//!
//! The subspace `H` is always the span of the first `N - k - 1` coordinate
//! axes; `x''` collects the remaining `k + 1` coordinates and only its norm
//! `r = |x''|` survives the cylindrical reduction.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in reduced coordinates `(x', |x''|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint {
    pub xprime: Vec<f64>,
    pub r: f64,
}

impl SpherePoint {
    pub fn new(xprime: Vec<f64>, r: f64) -> Self {
        debug_assert!(r >= 0.0, "sphere radius must be nonnegative");
        Self { xprime, r }
    }

    /// Point on the symmetry axis block `x' = 0`.
    pub fn on_axis(xprime_dim: usize, r: f64) -> Self {
        Self::new(vec![0.0; xprime_dim], r)
    }

    pub fn xprime_norm_sq(&self) -> f64 {
        self.xprime.iter().map(|c| c * c).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            xprime: self.xprime.iter().map(|c| c * factor).collect(),
            r: self.r * factor,
        }
    }
}

/// Cylindrically symmetric potential families `V(x', r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential {
    /// `c0 + c1 (r - c2)^2 + c3 |x'|^2`
    ShiftedParabola { c0: f64, c1: f64, c2: f64, c3: f64 },
    Constant { c0: f64 },
}

impl Potential {
    pub fn from_kind(kind: &str, params: &[f64]) -> Result<Self> {
        match kind {
            "shifted_parabola" => {
                if params.len() != 4 {
                    return Err(Error::config(
                        "potential",
                        format!("shifted_parabola takes 4 params, got {}", params.len()),
                    ));
                }
                Ok(Potential::ShiftedParabola {
                    c0: params[0],
                    c1: params[1],
                    c2: params[2],
                    c3: params[3],
                })
            }
            "constant" => {
                if params.len() != 1 {
                    return Err(Error::config(
                        "potential",
                        format!("constant takes 1 param, got {}", params.len()),
                    ));
                }
                Ok(Potential::Constant { c0: params[0] })
            }
            other => Err(Error::config(
                "potential",
                format!("unknown potential kind `{other}`"),
            )),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Potential::ShiftedParabola { .. } => "shifted_parabola",
            Potential::Constant { .. } => "constant",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Potential::ShiftedParabola { c0, c1, c2, c3 } => vec![c0, c1, c2, c3],
            Potential::Constant { c0 } => vec![c0],
        }
    }

    /// Evaluates `V` from `|x'|^2` and `r`.
    #[inline]
    pub fn eval_parts(&self, xprime_norm_sq: f64, r: f64) -> f64 {
        match *self {
            Potential::ShiftedParabola { c0, c1, c2, c3 } => {
                c0 + c1 * (r - c2) * (r - c2) + c3 * xprime_norm_sq
            }
            Potential::Constant { c0 } => c0,
        }
    }

    pub fn eval(&self, point: &SpherePoint) -> f64 {
        self.eval_parts(point.xprime_norm_sq(), point.r)
    }

    /// Infimum over `x' in R^{N-k-1}`, `r >= 0`, or `None` when unbounded below.
    pub fn infimum(&self) -> Option<f64> {
        match *self {
            Potential::ShiftedParabola { c0, c1, c2, c3 } => {
                if c1 < 0.0 || c3 < 0.0 {
                    None
                } else if c2 >= 0.0 {
                    Some(c0)
                } else {
                    Some(c0 + c1 * c2 * c2)
                }
            }
            Potential::Constant { c0 } => Some(c0),
        }
    }
}

/// Product annulus `{r_lo < r < r_hi} x {|x'| < s_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnularRegion {
    pub r_lo: f64,
    pub r_hi: f64,
    pub s_max: f64,
}

impl AnnularRegion {
    #[inline]
    pub fn contains_parts(&self, xprime_norm_sq: f64, r: f64) -> bool {
        r > self.r_lo && r < self.r_hi && xprime_norm_sq < self.s_max * self.s_max
    }

    pub fn contains(&self, point: &SpherePoint) -> bool {
        self.contains_parts(point.xprime_norm_sq(), point.r)
    }
}

/// Discretization parameters. `h` is measured in the rescaled variable
/// `x / eps`; `r_max` and `xprime_extent` in the original variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_max: f64,
    pub h: f64,
    pub xprime_extent: f64,
}

/// Parsed but not yet validated configuration. `theta` and `v0` may be left
/// out and are then derived during validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawConfig {
    pub ambient_dim: usize,
    pub sphere_dim: usize,
    pub p: f64,
    pub nu: f64,
    pub theta: Option<f64>,
    pub tau: f64,
    pub potential: Potential,
    pub v0: Option<f64>,
    pub omega: AnnularRegion,
    pub grid: GridSpec,
}

impl RawConfig {
    /// N=3, k=2, p=3, nu=2, theta=4, tau=3, V = 1 + 5 (r - 2)^2, Omega = {1 < r < 3}.
    pub fn desk_default() -> Self {
        Self {
            ambient_dim: 3,
            sphere_dim: 2,
            p: 3.0,
            nu: 2.0,
            theta: Some(4.0),
            tau: 3.0,
            potential: Potential::ShiftedParabola {
                c0: 1.0,
                c1: 5.0,
                c2: 2.0,
                c3: 0.0,
            },
            v0: None,
            omega: AnnularRegion {
                r_lo: 1.0,
                r_hi: 3.0,
                s_max: 1.0,
            },
            grid: GridSpec {
                r_max: 6.0,
                h: 0.05,
                xprime_extent: 1.5,
            },
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses the line-based `key = value` format. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            if entries.iter().any(|(_, k, _)| *k == key) {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
            entries.push((idx + 1, key, value.trim().to_string()));
        }

        let lookup = |key: &str| entries.iter().find(|(_, k, _)| k == key);
        let required = |key: &str| {
            lookup(key).ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("missing required key `{key}`"),
            })
        };
        let real = |key: &str| -> Result<f64> {
            let (line, _, v) = required(key)?;
            v.parse::<f64>().map_err(|_| Error::Parse {
                line: *line,
                message: format!("`{key}` is not a real number: `{v}`"),
            })
        };
        let opt_real = |key: &str| -> Result<Option<f64>> {
            match lookup(key) {
                None => Ok(None),
                Some(_) => real(key).map(Some),
            }
        };
        let integer = |key: &str| -> Result<usize> {
            let (line, _, v) = required(key)?;
            v.parse::<usize>().map_err(|_| Error::Parse {
                line: *line,
                message: format!("`{key}` is not a nonnegative integer: `{v}`"),
            })
        };

        let known = [
            "N",
            "k",
            "p",
            "nu",
            "theta",
            "tau",
            "V0",
            "potential.kind",
            "potential.params",
            "omega.r_lo",
            "omega.r_hi",
            "omega.s_max",
            "grid.R_max",
            "grid.h",
            "grid.xprime_extent",
        ];
        if let Some((line, key, _)) = entries.iter().find(|(_, k, _)| !known.contains(&k.as_str())) {
            return Err(Error::Parse {
                line: *line,
                message: format!("unknown key `{key}`"),
            });
        }

        let (_, _, kind) = required("potential.kind")?;
        let (pline, _, params_text) = required("potential.params")?;
        let params = params_text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Parse {
                line: *pline,
                message: format!("potential.params must be comma-separated reals: `{params_text}`"),
            })?;

        Ok(Self {
            ambient_dim: integer("N")?,
            sphere_dim: integer("k")?,
            p: real("p")?,
            nu: real("nu")?,
            theta: opt_real("theta")?,
            tau: real("tau")?,
            potential: Potential::from_kind(kind, &params)?,
            v0: opt_real("V0")?,
            omega: AnnularRegion {
                r_lo: real("omega.r_lo")?,
                r_hi: real("omega.r_hi")?,
                s_max: real("omega.s_max")?,
            },
            grid: GridSpec {
                r_max: real("grid.R_max")?,
                h: real("grid.h")?,
                xprime_extent: real("grid.xprime_extent")?,
            },
        })
    }

    /// Serializes back to the `key = value` format (round-trips through [`RawConfig::parse`]).
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "N = {}", self.ambient_dim);
        let _ = writeln!(s, "k = {}", self.sphere_dim);
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "nu = {}", self.nu);
        if let Some(theta) = self.theta {
            let _ = writeln!(s, "theta = {theta}");
        }
        let _ = writeln!(s, "tau = {}", self.tau);
        if let Some(v0) = self.v0 {
            let _ = writeln!(s, "V0 = {v0}");
        }
        let _ = writeln!(s, "potential.kind = {}", self.potential.kind());
        let params: Vec<String> = self.potential.params().iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "potential.params = {}", params.join(", "));
        let _ = writeln!(s, "omega.r_lo = {}", self.omega.r_lo);
        let _ = writeln!(s, "omega.r_hi = {}", self.omega.r_hi);
        let _ = writeln!(s, "omega.s_max = {}", self.omega.s_max);
        let _ = writeln!(s, "grid.R_max = {}", self.grid.r_max);
        let _ = writeln!(s, "grid.h = {}", self.grid.h);
        let _ = writeln!(s, "grid.xprime_extent = {}", self.grid.xprime_extent);
        s
    }
}

/// Validated problem description. Only obtainable through [`validate_config`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    ambient_dim: usize,
    sphere_dim: usize,
    pub p: f64,
    pub nu: f64,
    pub theta: f64,
    pub tau: f64,
    pub potential: Potential,
    pub v0: f64,
    pub omega: AnnularRegion,
    pub grid: GridSpec,
}

impl ProblemConfig {
    /// `N`
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// `k`, the dimension of the concentration spheres.
    pub fn sphere_dim(&self) -> usize {
        self.sphere_dim
    }

    /// `N - k - 1`, dimension of `H`.
    pub fn xprime_dim(&self) -> usize {
        self.ambient_dim - self.sphere_dim - 1
    }

    /// `N - k`, dimension of the limit problem.
    pub fn limit_dim(&self) -> usize {
        self.ambient_dim - self.sphere_dim
    }

    pub fn potential_at(&self, point: &SpherePoint) -> f64 {
        self.potential.eval(point)
    }

    pub fn in_omega(&self, point: &SpherePoint) -> bool {
        self.omega.contains(point)
    }

    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            ambient_dim: self.ambient_dim,
            sphere_dim: self.sphere_dim,
            p: self.p,
            nu: self.nu,
            theta: Some(self.theta),
            tau: self.tau,
            potential: self.potential.clone(),
            v0: Some(self.v0),
            omega: self.omega,
            grid: self.grid,
        }
    }

    pub fn desk_default() -> Self {
        validate_config(RawConfig::desk_default()).expect("default config is valid")
    }
}

/// Splits `x in R^N` into `(x', |x''|)`.
pub fn split_coords(x: &[f64], config: &ProblemConfig) -> Result<SpherePoint> {
    if x.len() != config.ambient_dim() {
        return Err(Error::config(
            "dimension",
            format!("point has {} coordinates, expected N = {}", x.len(), config.ambient_dim()),
        ));
    }
    let d = config.xprime_dim();
    let r = x[d..].iter().map(|c| c * c).sum::<f64>().sqrt();
    Ok(SpherePoint::new(x[..d].to_vec(), r))
}

/// `d_k(x, y) = sqrt(|x' - y'|^2 + (|x''| - |y''|)^2)`.
pub fn sphere_distance(x: &SpherePoint, y: &SpherePoint) -> f64 {
    debug_assert_eq!(x.xprime.len(), y.xprime.len());
    let dx: f64 = x
        .xprime
        .iter()
        .zip(&y.xprime)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let dr = x.r - y.r;
    (dx + dr * dr).sqrt()
}

/// Surface measure of the unit `k`-sphere in `R^{k+1}`.
pub fn unit_sphere_measure(k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::config("k>=1", "sphere dimension must be at least 1"));
    }
    Ok(sphere_measure(k))
}

/// Same as [`unit_sphere_measure`] but also accepts `k = 0` (two points).
pub(crate) fn sphere_measure(k: usize) -> f64 {
    let n = k + 1;
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half_integer(n)
}

/// `Gamma(n / 2)` for a positive integer `n`.
fn gamma_half_integer(n: usize) -> f64 {
    let (mut value, mut arg) = if n % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = n as f64 / 2.0;
    while arg < target - 0.25 {
        value *= arg;
        arg += 1.0;
    }
    value
}

/// Critical exponent bound for `p` in dimension `m = N - k`, if any.
pub fn subcritical_bound(limit_dim: usize) -> Option<f64> {
    if limit_dim >= 3 {
        let m = limit_dim as f64;
        Some((m + 2.0) / (m - 2.0))
    } else {
        None
    }
}

const POTENTIAL_SAMPLES_PER_AXIS: usize = 400;

/// Checks every hypothesis the construction relies on and fills in the
/// derived defaults (`theta = p + 1`, `V0 = inf V`).
pub fn validate_config(raw: RawConfig) -> Result<ProblemConfig> {
    let mut violations: Vec<(&'static str, String)> = Vec::new();
    let n = raw.ambient_dim;
    let k = raw.sphere_dim;

    if n < 3 {
        violations.push(("N>=3", format!("ambient dimension N = {n} must be at least 3")));
    }
    if k < 1 || k + 1 > n {
        violations.push(("1<=k<=N-1", format!("sphere dimension k = {k} outside [1, N-1]")));
    }
    let dims_ok = n >= 3 && k >= 1 && k < n;

    if !(raw.p > 1.0) {
        violations.push(("f2", format!("p = {} must exceed 1", raw.p)));
    } else if dims_ok {
        if let Some(bound) = subcritical_bound(n - k) {
            if raw.p >= bound {
                violations.push((
                    "f2",
                    format!("p = {} is not subcritical: need p < (N-k+2)/(N-k-2) = {bound}", raw.p),
                ));
            }
        }
    }
    if !(raw.nu > 1.0 && raw.nu < raw.p) {
        violations.push((
            "f1",
            format!("nu = {} must satisfy 1 < nu < p so that |s|^(p-1) s = o(|s|^nu)", raw.nu),
        ));
    }

    let theta = raw.theta.unwrap_or(raw.p + 1.0);
    if !(theta > 2.0 && theta <= raw.p + 1.0) {
        violations.push((
            "f3",
            format!("theta = {theta} must satisfy 2 < theta <= p + 1 for f(s) = |s|^(p-1) s"),
        ));
    }
    if !(raw.tau > 2.0 && raw.tau < theta) {
        violations.push(("tau<theta", format!("need 2 < tau < theta, got tau = {}, theta = {theta}", raw.tau)));
    }

    let omega = raw.omega;
    if !(omega.r_lo >= 0.0 && omega.r_hi > omega.r_lo && omega.r_hi.is_finite()) {
        violations.push(("omega", format!("need 0 <= r_lo < r_hi < inf, got ({}, {})", omega.r_lo, omega.r_hi)));
    }
    if !(omega.s_max > 0.0 && omega.s_max.is_finite()) {
        violations.push(("omega", format!("s_max must be positive and finite, got {}", omega.s_max)));
    }
    let grid = raw.grid;
    if !(grid.h > 0.0 && grid.h.is_finite()) {
        violations.push(("grid", format!("mesh width h = {} must be positive", grid.h)));
    }
    if !(grid.r_max > omega.r_hi) {
        violations.push(("grid", format!("R_max = {} must exceed r_hi = {}", grid.r_max, omega.r_hi)));
    }
    if dims_ok && n - k - 1 > 0 && !(grid.xprime_extent > omega.s_max) {
        violations.push((
            "grid",
            format!("xprime_extent = {} must exceed s_max = {}", grid.xprime_extent, omega.s_max),
        ));
    }

    let v0 = match raw.v0.or_else(|| raw.potential.infimum()) {
        Some(v0) => v0,
        None => {
            violations.push(("V1", "potential is unbounded below".to_string()));
            f64::NAN
        }
    };
    if !(v0 > 0.0) {
        violations.push(("V1", format!("lower bound V0 = {v0} must be positive")));
    } else if dims_ok {
        // sample V over the (unscaled) truncated reduced domain
        let d = n - k - 1;
        let steps = POTENTIAL_SAMPLES_PER_AXIS;
        let r_at = |i: usize| grid.r_max * i as f64 / (steps - 1) as f64;
        let x_at = |i: usize| -grid.xprime_extent + 2.0 * grid.xprime_extent * i as f64 / (steps - 1) as f64;
        let mut worst = f64::INFINITY;
        for ir in 0..steps {
            let r = r_at(ir);
            if d == 0 {
                worst = worst.min(raw.potential.eval_parts(0.0, r));
            } else {
                // |x'|^2 ranges over [0, d L^2] on the box; the families are monotone in it
                for ix in 0..steps {
                    let s = x_at(ix);
                    worst = worst.min(raw.potential.eval_parts(s * s * d as f64, r));
                    worst = worst.min(raw.potential.eval_parts(s * s, r));
                }
            }
        }
        if worst < v0 {
            violations.push(("V1", format!("sampled min V = {worst} falls below V0 = {v0}")));
        }
    }

    if let Some((hypothesis, first)) = violations.first() {
        let mut message = first.clone();
        for (h, m) in &violations[1..] {
            message.push_str(&format!("; [{h}] {m}"));
        }
        return Err(Error::Config {
            hypothesis,
            message,
        });
    }

    Ok(ProblemConfig {
        ambient_dim: n,
        sphere_dim: k,
        p: raw.p,
        nu: raw.nu,
        theta,
        tau: raw.tau,
        potential: raw.potential,
        v0,
        omega,
        grid,
    })
}
