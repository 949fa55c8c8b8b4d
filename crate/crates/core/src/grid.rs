//! Finite-volume discretization of the reduced domain `(x', r)` with the
//! cylindrical measure `omega_k r^k dr dx'`.
//!
//! Radial cells are `[jh, (j+1)h]` with centres `r_j = (j + 1/2) h`; each cell
//! carries its exact measure, so `sum_j W_j` integrates `r^k` exactly. The
//! stiffness form is a sum over cell faces,
//!
//! ```text
//! <grad u, grad w> = sum_faces a_f (u_i - u_j)(w_i - w_j),
//! ```
//!
//! with `a_f = omega_k r_f^k h^{d'} / h` on radial faces and `W_j / h^2` on
//! `x'` faces. The face at `r = 0` is omitted (zero flux). On the outer
//! boundary the ghost value is zero at distance `h/2`, i.e. the coefficient
//! doubles. `-Delta_red v = K v / W` is then symmetric in the weighted inner
//! product and integration by parts holds exactly.
//!
//! Node layout: the `x'` multi-index is outer (row-major), `r` is inner.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{sphere_measure, ProblemConfig, SpherePoint};
use crate::nonlinearity::PenalizedNonlinearity;

/// Default cap on the total number of nodes.
pub const DEFAULT_NODE_CAP: usize = 4_000_000;

const BINARY_MAGIC: &[u8; 8] = b"NSFIELD1";

#[derive(Debug, Clone)]
pub struct ReducedGrid {
    sphere_dim: usize,
    xprime_dim: usize,
    h: f64,
    eps: f64,
    r_nodes: Vec<f64>,
    xprime_nodes: Vec<f64>,
    /// half-width of the `x'` box in scaled units
    xprime_half_width: f64,
    // measure of radial cell j times h^{d'}
    weights_r: Vec<f64>,
    // coefficient of face j + 1/2, the last one already doubled
    radial_faces: Vec<f64>,
}

impl PartialEq for ReducedGrid {
    fn eq(&self, other: &Self) -> bool {
        self.sphere_dim == other.sphere_dim
            && self.xprime_dim == other.xprime_dim
            && self.h == other.h
            && self.eps == other.eps
            && self.r_nodes.len() == other.r_nodes.len()
            && self.xprime_nodes.len() == other.xprime_nodes.len()
            && self.xprime_half_width == other.xprime_half_width
    }
}

impl ReducedGrid {
    /// Builds a grid with `n_r` radial cells of width `h` and `n_xp` cells per
    /// `x'` axis covering `[-half_width, half_width]`.
    pub fn new(
        sphere_dim: usize,
        xprime_dim: usize,
        n_r: usize,
        n_xp: usize,
        h: f64,
        eps: f64,
        node_cap: usize,
    ) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) || !(eps > 0.0) {
            return Err(Error::Usage(format!("invalid mesh: h = {h}, eps = {eps}")));
        }
        if n_r < 2 || (xprime_dim > 0 && n_xp < 2) {
            return Err(Error::Usage("grid needs at least two cells per axis".into()));
        }
        let rows = if xprime_dim == 0 { Some(1usize) } else { n_xp.checked_pow(xprime_dim as u32) };
        let total = rows.and_then(|r| r.checked_mul(n_r));
        match total {
            Some(t) if t <= node_cap => {}
            _ => {
                return Err(Error::Resource(format!(
                    "grid needs {n_r} radial x {n_xp}^{xprime_dim} nodes, above the cap of {node_cap}; \
                     increase grid.h or eps"
                )))
            }
        }
        let omega = sphere_measure(sphere_dim);
        let kp1 = (sphere_dim + 1) as i32;
        let cross = h.powi(xprime_dim as i32);
        let r_nodes: Vec<f64> = (0..n_r).map(|j| (j as f64 + 0.5) * h).collect();
        let weights_r = (0..n_r)
            .map(|j| {
                let lo = j as f64 * h;
                let hi = lo + h;
                omega * (hi.powi(kp1) - lo.powi(kp1)) / kp1 as f64 * cross
            })
            .collect();
        let mut radial_faces: Vec<f64> = (0..n_r)
            .map(|j| omega * ((j + 1) as f64 * h).powi(sphere_dim as i32) * cross / h)
            .collect();
        radial_faces[n_r - 1] *= 2.0;
        let half_width = 0.5 * n_xp as f64 * h;
        let xprime_nodes = if xprime_dim == 0 {
            Vec::new()
        } else {
            (0..n_xp).map(|i| -half_width + (i as f64 + 0.5) * h).collect()
        };
        Ok(Self {
            sphere_dim,
            xprime_dim,
            h,
            eps,
            r_nodes,
            xprime_nodes,
            xprime_half_width: if xprime_dim == 0 { 0.0 } else { half_width },
            weights_r,
            radial_faces,
        })
    }

    /// Purely radial grid of `n_r` cells, unscaled.
    pub fn radial(sphere_dim: usize, n_r: usize, h: f64) -> Result<Self> {
        Self::new(sphere_dim, 0, n_r, 0, h, 1.0, usize::MAX)
    }

    pub fn sphere_dim(&self) -> usize {
        self.sphere_dim
    }

    pub fn xprime_dim(&self) -> usize {
        self.xprime_dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn n_r(&self) -> usize {
        self.r_nodes.len()
    }

    /// Cells per `x'` axis (0 when there is no `x'` axis).
    pub fn n_xp(&self) -> usize {
        self.xprime_nodes.len()
    }

    pub fn n_rows(&self) -> usize {
        if self.xprime_dim == 0 {
            1
        } else {
            self.n_xp().pow(self.xprime_dim as u32)
        }
    }

    pub fn len(&self) -> usize {
        self.n_rows() * self.n_r()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn r_nodes(&self) -> &[f64] {
        &self.r_nodes
    }

    pub fn xprime_nodes(&self) -> &[f64] {
        &self.xprime_nodes
    }

    /// Outer radius in scaled units.
    pub fn r_extent(&self) -> f64 {
        self.n_r() as f64 * self.h
    }

    pub fn xprime_half_width(&self) -> f64 {
        self.xprime_half_width
    }

    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        self.weights_r[idx % self.n_r()]
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    pub fn total_measure(&self) -> f64 {
        self.n_rows() as f64 * self.weights_r.iter().sum::<f64>()
    }

    /// `x'` cell indices of the row containing `idx`.
    pub fn xprime_index(&self, idx: usize) -> Vec<usize> {
        let mut row = idx / self.n_r();
        let n = self.n_xp();
        let mut out = vec![0; self.xprime_dim];
        for slot in out.iter_mut().rev() {
            *slot = row % n;
            row /= n;
        }
        out
    }

    /// Node coordinates in scaled units.
    pub fn node_point(&self, idx: usize) -> SpherePoint {
        let xprime = self.xprime_index(idx).into_iter().map(|i| self.xprime_nodes[i]).collect();
        SpherePoint::new(xprime, self.r_nodes[idx % self.n_r()])
    }

    /// Node coordinates in the original variable, `eps * node`.
    pub fn unscaled_point(&self, idx: usize) -> SpherePoint {
        self.node_point(idx).scaled(self.eps)
    }

    fn row_xprime_norm_sq(&self, row: usize) -> f64 {
        let mut row = row;
        let n = self.n_xp().max(1);
        let mut acc = 0.0;
        for _ in 0..self.xprime_dim {
            let x = self.xprime_nodes[row % n];
            acc += x * x;
            row /= n;
        }
        acc
    }

    /// `V(eps x)` at every node.
    pub fn potential_at_nodes(&self, config: &ProblemConfig) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let e2 = self.eps * self.eps;
        for row in 0..self.n_rows() {
            let s2 = self.row_xprime_norm_sq(row) * e2;
            out.extend(self.r_nodes.iter().map(|&r| config.potential.eval_parts(s2, self.eps * r)));
        }
        out
    }

    /// Whether `eps x` lies in the concentration region, per node.
    pub fn omega_mask(&self, config: &ProblemConfig) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.len());
        let e2 = self.eps * self.eps;
        for row in 0..self.n_rows() {
            let s2 = self.row_xprime_norm_sq(row) * e2;
            out.extend(self.r_nodes.iter().map(|&r| config.omega.contains_parts(s2, self.eps * r)));
        }
        out
    }

    /// Nodes adjacent to the Dirichlet boundary (outer radius or `x'` box).
    pub fn is_boundary_node(&self, idx: usize) -> bool {
        if idx % self.n_r() == self.n_r() - 1 {
            return true;
        }
        let last = self.n_xp().saturating_sub(1);
        self.xprime_index(idx).iter().any(|&i| i == 0 || i == last)
    }

    fn axis_stride(&self, axis: usize) -> usize {
        self.n_r() * self.n_xp().pow((self.xprime_dim - 1 - axis) as u32)
    }

    /// `out = K v`, the stiffness matrix applied to `v`.
    pub fn stiffness_apply(&self, v: &[f64], out: &mut [f64]) {
        let n_r = self.n_r();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (vrow, orow) in v.chunks_exact(n_r).zip(out.chunks_exact_mut(n_r)) {
            for j in 0..n_r - 1 {
                let flux = self.radial_faces[j] * (vrow[j] - vrow[j + 1]);
                orow[j] += flux;
                orow[j + 1] -= flux;
            }
            orow[n_r - 1] += self.radial_faces[n_r - 1] * vrow[n_r - 1];
        }
        let n = self.n_xp();
        let h2 = self.h * self.h;
        for axis in 0..self.xprime_dim {
            let stride = self.axis_stride(axis);
            for idx in 0..v.len() {
                let c = (idx / stride) % n;
                let face = self.weights_r[idx % n_r] / h2;
                if c + 1 < n {
                    let flux = face * (v[idx] - v[idx + stride]);
                    out[idx] += flux;
                    out[idx + stride] -= flux;
                }
                if c == 0 || c + 1 == n {
                    out[idx] += 2.0 * face * v[idx];
                }
            }
        }
    }

    /// Diagonal of the stiffness matrix.
    pub fn stiffness_diagonal(&self) -> Vec<f64> {
        let n_r = self.n_r();
        let n = self.n_xp();
        let h2 = self.h * self.h;
        (0..self.len())
            .map(|idx| {
                let j = idx % n_r;
                let mut d = self.radial_faces[j];
                if j > 0 {
                    d += self.radial_faces[j - 1];
                }
                if self.xprime_dim > 0 {
                    let face = self.weights_r[j] / h2;
                    for c in self.xprime_index(idx) {
                        d += 2.0 * face;
                        if c == 0 || c + 1 == n {
                            d += face;
                        }
                    }
                }
                d
            })
            .collect()
    }

    /// Sub-diagonal of the radial stiffness block, `-a_{j+1/2}` for
    /// `j = 0..n_r - 1`.
    pub fn radial_off_diagonal(&self) -> Vec<f64> {
        self.radial_faces[..self.n_r() - 1].iter().map(|a| -a).collect()
    }

    /// `<grad u, grad w>` as a face sum.
    pub fn gradient_pairing(&self, u: &[f64], w: &[f64]) -> f64 {
        let n_r = self.n_r();
        let mut acc = 0.0;
        for (urow, wrow) in u.chunks_exact(n_r).zip(w.chunks_exact(n_r)) {
            for j in 0..n_r - 1 {
                acc += self.radial_faces[j] * (urow[j] - urow[j + 1]) * (wrow[j] - wrow[j + 1]);
            }
            acc += self.radial_faces[n_r - 1] * urow[n_r - 1] * wrow[n_r - 1];
        }
        let n = self.n_xp();
        let h2 = self.h * self.h;
        for axis in 0..self.xprime_dim {
            let stride = self.axis_stride(axis);
            for idx in 0..u.len() {
                let c = (idx / stride) % n;
                let face = self.weights_r[idx % n_r] / h2;
                if c + 1 < n {
                    acc += face * (u[idx] - u[idx + stride]) * (w[idx] - w[idx + stride]);
                }
                if c == 0 || c + 1 == n {
                    acc += 2.0 * face * u[idx] * w[idx];
                }
            }
        }
        acc
    }

    /// `sum_n W_n values_n`.
    pub fn weighted_integral(&self, values: &[f64]) -> f64 {
        let n_r = self.n_r();
        values
            .chunks_exact(n_r)
            .map(|row| row.iter().zip(&self.weights_r).map(|(v, w)| v * w).sum::<f64>())
            .sum()
    }

    /// Weighted integral of `expr(idx)` over all nodes.
    pub fn integrate<F: Fn(usize) -> f64>(&self, expr: F) -> f64 {
        (0..self.len()).map(|i| self.weight(i) * expr(i)).sum()
    }
}

/// Builds the scaled grid for `config` at semiclassical parameter `eps`.
pub fn build_grid(config: &ProblemConfig, eps: f64) -> Result<ReducedGrid> {
    build_grid_capped(config, eps, DEFAULT_NODE_CAP)
}

pub fn build_grid_capped(config: &ProblemConfig, eps: f64, node_cap: usize) -> Result<ReducedGrid> {
    if !(eps > 0.0) {
        return Err(Error::Usage(format!("eps must be positive, got {eps}")));
    }
    let h = config.grid.h;
    let n_r = cells(config.grid.r_max / eps, h)?;
    let n_xp = if config.xprime_dim() == 0 {
        0
    } else {
        cells(2.0 * config.grid.xprime_extent / eps, h)?
    };
    ReducedGrid::new(config.sphere_dim(), config.xprime_dim(), n_r, n_xp, h, eps, node_cap)
}

fn cells(length: f64, h: f64) -> Result<usize> {
    let n = (length / h).round();
    if !(n.is_finite() && n >= 2.0) {
        return Err(Error::Usage(format!("extent {length} too short for h = {h}")));
    }
    if n > 1e12 {
        return Err(Error::Resource(format!("{n} cells along one axis; increase grid.h or eps")));
    }
    Ok(n as usize)
}

/// Nodal values on a shared grid.
#[derive(Debug, Clone)]
pub struct ReducedField {
    pub values: Vec<f64>,
    pub grid: Arc<ReducedGrid>,
}

impl ReducedField {
    pub fn zeros(grid: Arc<ReducedGrid>) -> Self {
        Self { values: vec![0.0; grid.len()], grid }
    }

    pub fn from_values(grid: Arc<ReducedGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Usage(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite field value at node {i}")));
        }
        Ok(Self { values, grid })
    }

    /// Samples `f` at the scaled node coordinates.
    pub fn from_fn<F: Fn(&SpherePoint) -> f64>(grid: Arc<ReducedGrid>, f: F) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.node_point(i))).collect();
        Self { values, grid }
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self { values, grid: Arc::clone(&self.grid) }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    /// `min(v, 0)`, so that `v = v+ + v-`.
    pub fn negative_part(&self) -> Self {
        self.map(|v| v.min(0.0))
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::Usage("fields live on different grids".into()))
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// First node attaining the maximum (lexicographic order).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// First node attaining the minimum (lexicographic order).
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Largest `|v|` on nodes next to the Dirichlet boundary.
    pub fn boundary_max_abs(&self) -> f64 {
        (0..self.values.len())
            .filter(|&i| self.grid.is_boundary_node(i))
            .fold(0.0, |m, i| m.max(self.values[i].abs()))
    }

    /// Truncation warning: boundary values not negligible against the peak.
    pub fn truncation_flag(&self) -> bool {
        self.boundary_max_abs() >= 1e-10 * self.max_abs()
    }

    pub fn to_csv(&self) -> String {
        let d = self.grid.xprime_dim();
        let mut out = String::new();
        for a in 0..d {
            out.push_str(&format!("xprime{},", a + 1));
        }
        out.push_str("r,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.node_point(i);
            for x in &p.xprime {
                out.push_str(&format!("{x:.17e},"));
            }
            out.push_str(&format!("{:.17e},{:.17e}\n", p.r, v));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Raw little-endian block: magic, `k, d', n_r, n_xp` as `u64`,
    /// `h, eps` as `f64`, then the values in node order.
    pub fn to_binary(&self) -> Vec<u8> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(56 + 8 * self.values.len());
        out.extend_from_slice(BINARY_MAGIC);
        for n in [g.sphere_dim(), g.xprime_dim(), g.n_r(), g.n_xp()] {
            out.extend_from_slice(&(n as u64).to_le_bytes());
        }
        out.extend_from_slice(&g.h().to_le_bytes());
        out.extend_from_slice(&g.eps().to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&self.to_binary()).map_err(|e| Error::io(path, e))
    }

    pub fn from_binary(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < 56 || &bytes[..8] != BINARY_MAGIC {
            return Err("missing field header".into());
        }
        let word = |i: usize| -> [u8; 8] { bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap() };
        let k = u64::from_le_bytes(word(0)) as usize;
        let d = u64::from_le_bytes(word(1)) as usize;
        let n_r = u64::from_le_bytes(word(2)) as usize;
        let n_xp = u64::from_le_bytes(word(3)) as usize;
        let h = f64::from_le_bytes(word(4));
        let eps = f64::from_le_bytes(word(5));
        let grid = ReducedGrid::new(k, d, n_r, n_xp, h, eps, DEFAULT_NODE_CAP).map_err(|e| e.to_string())?;
        let payload = &bytes[56..];
        if payload.len() != 8 * grid.len() {
            return Err(format!("payload holds {} bytes, expected {}", payload.len(), 8 * grid.len()));
        }
        let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        ReducedField::from_values(Arc::new(grid), values).map_err(|e| e.to_string())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_binary(&bytes).map_err(|message| Error::Format { path: path.to_path_buf(), message })
    }
}

/// `<u, w>` in the weighted `L^2` product.
pub fn inner_product(u: &ReducedField, w: &ReducedField) -> Result<f64> {
    u.same_grid(w)?;
    let prod: Vec<f64> = u.values.iter().zip(&w.values).map(|(a, b)| a * b).collect();
    Ok(u.grid.weighted_integral(&prod))
}

/// `||v||_eps^2 = int |grad v|^2 + V(eps x) v^2`.
pub fn norm_eps_sq(v: &ReducedField, potential: &[f64]) -> f64 {
    let g = &v.grid;
    let mass: Vec<f64> = v.values.iter().zip(potential).map(|(x, p)| p * x * x).collect();
    g.gradient_pairing(&v.values, &v.values) + g.weighted_integral(&mass)
}

pub fn norm_eps(v: &ReducedField, potential: &[f64]) -> f64 {
    norm_eps_sq(v, potential).sqrt()
}

/// `-Delta_red v + V(eps x) v - g_eps(eps x, v)` at every node.
pub fn apply_operator(
    field: &ReducedField,
    potential: &[f64],
    inside: &[bool],
    pn: Option<&PenalizedNonlinearity>,
) -> ReducedField {
    let g = &field.grid;
    let mut out = vec![0.0; g.len()];
    g.stiffness_apply(&field.values, &mut out);
    for (i, o) in out.iter_mut().enumerate() {
        let v = field.values[i];
        let nonlinear = pn.map_or(0.0, |pn| pn.g_switch(inside[i], v));
        *o = *o / g.weight(i) + potential[i] * v - nonlinear;
    }
    field.with_values(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RawConfig, validate_config};
    use crate::quadrature::adaptive_simpson;
    use std::f64::consts::PI;

    fn gaussian_error(h: f64) -> f64 {
        let n_r = (8.0 / h).round() as usize;
        let grid = Arc::new(ReducedGrid::radial(2, n_r, h).unwrap());
        let v = ReducedField::from_fn(grid.clone(), |p| (-p.r * p.r).exp());
        let ones = vec![1.0; grid.len()];
        let mask = vec![true; grid.len()];
        let lv = apply_operator(&v, &ones, &mask, None);
        grid.r_nodes()
            .iter()
            .zip(&lv.values)
            .filter(|(r, _)| **r < 5.0)
            .map(|(r, val)| {
                let exact = (6.0 - 4.0 * r * r) * (-r * r).exp() + (-r * r).exp();
                (val - exact).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn radial_node_counts() {
        let config = ProblemConfig::desk_default();
        let g = build_grid(&config, 0.5).unwrap();
        assert_eq!(g.n_r(), 240);
        assert_eq!(g.n_xp(), 0);
        assert!(g.r_nodes().iter().all(|&r| r > 0.0));
    }

    #[test]
    fn cylinder_node_counts() {
        let mut raw = RawConfig::desk_default();
        raw.sphere_dim = 1;
        raw.grid.h = 0.1;
        raw.grid.xprime_extent = 2.0;
        let config = validate_config(raw).unwrap();
        let g = build_grid(&config, 0.5).unwrap();
        assert_eq!(g.n_r(), 120);
        assert_eq!(g.n_xp(), 80);
        assert_eq!(g.len(), 9600);
    }

    #[test]
    fn node_cap_is_enforced() {
        let config = ProblemConfig::desk_default();
        match build_grid_capped(&config, 0.5, 100) {
            Err(Error::Resource(msg)) => assert!(msg.contains("increase")),
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn total_measure_is_exact() {
        for (k, d, n_xp) in [(2usize, 0usize, 0usize), (1, 1, 10), (1, 2, 6), (3, 0, 0)] {
            let h = 0.1;
            let n_r = 60;
            let g = ReducedGrid::new(k, d, n_r, n_xp, h, 1.0, usize::MAX).unwrap();
            let r_max = n_r as f64 * h;
            let side = n_xp as f64 * h;
            let exact = sphere_measure(k) * r_max.powi(k as i32 + 1) / (k as f64 + 1.0) * side.powi(d as i32);
            assert!((g.total_measure() - exact).abs() < 1e-10 * exact, "k={k} d={d}");
            assert!(g.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn unit_ball_volume() {
        let g = Arc::new(ReducedGrid::radial(2, 100, 0.01).unwrap());
        let one = ReducedField::from_fn(g.clone(), |_| 1.0);
        let vol = inner_product(&one, &one).unwrap();
        assert!((vol - 4.0 * PI / 3.0).abs() < 1e-6);
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = Arc::new(ReducedGrid::radial(2, 50, 0.1).unwrap());
        let z = ReducedField::zeros(g.clone());
        let pot = vec![1.0; g.len()];
        let mask = vec![false; g.len()];
        let pn = PenalizedNonlinearity::new(0.2, 3.0, 2.0, 3.0).unwrap();
        assert!(apply_operator(&z, &pot, &mask, Some(&pn)).values.iter().all(|&x| x == 0.0));
        assert_eq!(norm_eps(&z, &pot), 0.0);
    }

    #[test]
    fn gaussian_second_order() {
        let coarse = gaussian_error(0.1);
        let fine = gaussian_error(0.05);
        let ratio = coarse / fine;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn weighted_norm_against_quadrature() {
        // v = exp(-r^2/2), k = 2, V = 1: ||v||^2 = 4 pi int (r^2 + 1) r^2 e^{-r^2} dr
        let oracle = 4.0 * PI * adaptive_simpson(|r| (r * r + 1.0) * r * r * (-r * r).exp(), 0.0, 10.0, 1e-14).unwrap();
        let norm_at = |h: f64| {
            let g = Arc::new(ReducedGrid::radial(2, (10.0 / h).round() as usize, h).unwrap());
            let v = ReducedField::from_fn(g.clone(), |p| (-0.5 * p.r * p.r).exp());
            norm_eps_sq(&v, &vec![1.0; g.len()])
        };
        // one Richardson step removes the h^2 term of the face quadrature
        let extrapolated = (4.0 * norm_at(0.0025) - norm_at(0.005)) / 3.0;
        assert!((extrapolated - oracle).abs() < 1e-8 * oracle, "{extrapolated} vs {oracle}");
    }

    fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
        let mut state = seed;
        (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect()
    }

    #[test]
    fn integration_by_parts_and_symmetry() {
        for (k, d, n_xp) in [(2usize, 0usize, 0usize), (1, 1, 12), (1, 2, 5)] {
            let g = Arc::new(ReducedGrid::new(k, d, 40, n_xp, 0.1, 1.0, usize::MAX).unwrap());
            let u = ReducedField::from_values(g.clone(), pseudo_random(g.len(), 7)).unwrap();
            let w = ReducedField::from_values(g.clone(), pseudo_random(g.len(), 11)).unwrap();
            let zero = vec![0.0; g.len()];
            let mask = vec![true; g.len()];
            let au = apply_operator(&u, &zero, &mask, None);
            let aw = apply_operator(&w, &zero, &mask, None);
            let lhs = inner_product(&au, &w).unwrap();
            let rhs = inner_product(&u, &aw).unwrap();
            let grad = g.gradient_pairing(&u.values, &w.values);
            let scale = grad.abs().max(1.0);
            assert!((lhs - rhs).abs() < 1e-11 * scale, "symmetry k={k} d={d}");
            assert!((lhs - grad).abs() < 1e-10 * scale, "ibp k={k} d={d}");
            let diag = g.stiffness_diagonal();
            let mut e = vec![0.0; g.len()];
            let mut ke = vec![0.0; g.len()];
            for i in [0, g.len() / 2, g.len() - 1] {
                e.iter_mut().for_each(|x| *x = 0.0);
                e[i] = 1.0;
                g.stiffness_apply(&e, &mut ke);
                assert!((ke[i] - diag[i]).abs() < 1e-12 * diag[i]);
            }
        }
    }

    #[test]
    fn grid_mismatch_is_usage_error() {
        let a = Arc::new(ReducedGrid::radial(2, 50, 0.1).unwrap());
        let b = Arc::new(ReducedGrid::radial(2, 60, 0.1).unwrap());
        let u = ReducedField::zeros(a);
        let w = ReducedField::zeros(b);
        assert!(matches!(inner_product(&u, &w), Err(Error::Usage(_))));
    }

    #[test]
    fn binary_round_trip() {
        let g = Arc::new(ReducedGrid::new(1, 1, 20, 8, 0.25, 0.3, usize::MAX).unwrap());
        let v = ReducedField::from_values(g.clone(), pseudo_random(g.len(), 3)).unwrap();
        let back = ReducedField::from_binary(&v.to_binary()).unwrap();
        assert_eq!(back.values, v.values);
        assert_eq!(*back.grid, *g);
        assert!(ReducedField::from_binary(b"garbage").is_err());
        let csv = v.to_csv();
        assert!(csv.starts_with("xprime1,r,value\n"));
        assert_eq!(csv.lines().count(), g.len() + 1);
    }

    #[test]
    fn truncation_flag_detects_boundary_mass() {
        let g = Arc::new(ReducedGrid::radial(2, 100, 0.1).unwrap());
        let tight = ReducedField::from_fn(g.clone(), |p| (-(p.r - 3.0).powi(2)).exp());
        let wide = ReducedField::from_fn(g.clone(), |p| (-(p.r - 3.0).powi(2) / 20.0).exp());
        assert!(!tight.truncation_flag());
        assert!(wide.truncation_flag());
    }
}
