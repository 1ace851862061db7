//! Radial discretization of ℝ^N.
//!
//! A [`RadialGrid`] samples `[0, R]` at `K` nodes and represents a profile by
//! its piecewise linear interpolant. The Dirichlet form is the exact energy
//! of that interpolant, `Σ c_i (u_{i+1} − u_i)²` with
//! `c_i = ω_{N-1} (r_{i+1}^N − r_i^N) / (N h_i²)`, and integrals of nonlinear
//! functions of `u` use 5-point Gauss–Legendre rules on every element, also
//! on the interpolant. Discrete energies are therefore energies of an actual
//! H¹ function, and concentration into a single node costs what it costs in
//! the continuum.
//!
//! Node weights `w_i` (mass, inner products) are fixed by asking the
//! negative Laplacian, the weighted gradient of the Dirichlet form, to be
//! exact on `r²`; the Dirichlet node takes the remainder so `Σ w_i` is the
//! ball volume. The summation-by-parts identity
//! `grad_norm_sq(u) = ⟨neg_laplacian(u), u⟩_w` holds exactly, the last node
//! carries a homogeneous Dirichlet condition, and at `r = 0` the stencil is
//! the symmetric ghost-node form `2N (u_0 − u_1) / h²`.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::quad::GaussLegendre;

/// Smallest admissible node count.
pub const MIN_NODES: usize = 16;

/// Surface measure of the unit sphere in ℝ^N, `2π^{N/2}/Γ(N/2)`.
pub fn sphere_measure(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        0 => panic!("dimension must be positive"),
        1 => 2.0,
        2 => 2.0 * PI,
        n => 2.0 * PI * sphere_measure(n - 2) / (n - 2) as f64,
    }
}

/// Volume of the ball of radius `r` in ℝ^N.
pub fn ball_volume(dim: usize, r: f64) -> f64 {
    sphere_measure(dim) * r.powi(dim as i32) / dim as f64
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    dim: usize,
    radius: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `ω (r_{i+1}^N − r_i^N) / (N h_i²)` for the element between nodes `i` and `i+1`.
    couplings: Vec<f64>,
    /// Gauss points: `(element, local coordinate in [0, 1], weight)`.
    points: Vec<(usize, f64, f64)>,
    stretch: Option<f64>,
}

/// Gauss points per element.
pub const POINTS_PER_ELEMENT: usize = 5;

/// Builds a grid on `[0, radius]` with `nodes` points.
///
/// Without `stretch` the nodes are uniform. With `stretch = L` they are the
/// images of a uniform parameter grid under `ξ ↦ Rξ(1+L)/(1+Lξ)`; `L ∈ (-1, 0)`
/// clusters nodes near the origin, `L > 0` near `R`.
pub fn make_grid(
    dim: usize,
    radius: f64,
    nodes: usize,
    stretch: Option<f64>,
) -> Result<Arc<RadialGrid>> {
    RadialGrid::new(dim, radius, nodes, stretch).map(Arc::new)
}

impl RadialGrid {
    pub fn new(dim: usize, radius: f64, count: usize, stretch: Option<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Config(format!("radius must be positive, got {radius}")));
        }
        if count < MIN_NODES {
            return Err(Error::Config(format!(
                "need at least {MIN_NODES} nodes, got {count}"
            )));
        }
        if let Some(l) = stretch {
            if !(l.is_finite() && l > -1.0) {
                return Err(Error::Config(format!(
                    "stretch must be a finite number greater than -1, got {l}"
                )));
            }
        }
        let last = (count - 1) as f64;
        let mut nodes: Vec<f64> = (0..count)
            .map(|i| {
                let xi = i as f64 / last;
                match stretch {
                    None => radius * xi,
                    Some(l) => radius * xi * (1.0 + l) / (1.0 + l * xi),
                }
            })
            .collect();
        nodes[0] = 0.0;
        nodes[count - 1] = radius;
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "stretch produces non-increasing nodes at this resolution".into(),
            ));
        }
        let grid = Self::from_nodes(dim, nodes, stretch);
        if grid.weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Config(
                "grid too strongly stretched: a node weight is not positive".into(),
            ));
        }
        Ok(grid)
    }

    fn from_nodes(dim: usize, nodes: Vec<f64>, stretch: Option<f64>) -> Self {
        let omega = sphere_measure(dim);
        let n = dim as i32;
        let nf = dim as f64;
        let k = nodes.len();
        let radius = nodes[k - 1];
        let couplings: Vec<f64> = nodes
            .windows(2)
            .map(|e| {
                let h = e[1] - e[0];
                omega * (e[1].powi(n) - e[0].powi(n)) / (nf * h * h)
            })
            .collect();
        let mut weights = vec![0.0; k];
        for i in 0..k - 1 {
            let right = couplings[i] * (nodes[i + 1].powi(2) - nodes[i].powi(2));
            let left = if i > 0 {
                couplings[i - 1] * (nodes[i].powi(2) - nodes[i - 1].powi(2))
            } else {
                0.0
            };
            weights[i] = (right - left) / (2.0 * nf);
        }
        let interior: f64 = weights[..k - 1].iter().sum();
        weights[k - 1] = ball_volume(dim, radius) - interior;
        let rule = GaussLegendre::new(POINTS_PER_ELEMENT);
        let mut points = Vec::with_capacity(POINTS_PER_ELEMENT * (k - 1));
        for (e, pair) in nodes.windows(2).enumerate() {
            let h = pair[1] - pair[0];
            for (x, gw) in rule.nodes().iter().zip(rule.weights()) {
                let t = 0.5 * (x + 1.0);
                let r = pair[0] + t * h;
                points.push((e, t, 0.5 * h * gw * omega * r.powi(n - 1)));
            }
        }
        RadialGrid {
            dim,
            radius,
            nodes,
            weights,
            couplings,
            points,
            stretch,
        }
    }

    /// The same grid with every radius multiplied by `factor`.
    ///
    /// Discrete quantities transform exactly under this map, which is what makes
    /// the dilation `s ⋆ u` representable without interpolation.
    pub fn scaled(&self, factor: f64) -> RadialGrid {
        assert!(factor.is_finite() && factor > 0.0);
        let nodes = self.nodes.iter().map(|r| r * factor).collect();
        Self::from_nodes(self.dim, nodes, self.stretch)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// Gauss points `(element, local coordinate, weight)` for integrating
    /// functions of the interpolant.
    pub fn points(&self) -> &[(usize, f64, f64)] {
        &self.points
    }

    /// Interpolant values at the Gauss points, the Dirichlet node read as 0.
    pub fn point_values(&self, u: &[f64]) -> Vec<f64> {
        let k = u.len();
        let at = |i: usize| if i == k - 1 { 0.0 } else { u[i] };
        self.points
            .iter()
            .map(|&(e, t, _)| (1.0 - t) * at(e) + t * at(e + 1))
            .collect()
    }

    /// `∫ G(u)` over the interpolant.
    pub fn integrate(&self, u: &[f64], g: impl Fn(f64) -> f64) -> f64 {
        self.point_values(u)
            .iter()
            .zip(&self.points)
            .map(|(&v, p)| p.2 * g(v))
            .sum()
    }

    /// Weighted-L² representative of `u ↦ ∫ G(u)` when `g = G'`:
    /// `(1/w_i) ∫ g(u) φ_i` with `φ_i` the hat function of node `i`, and 0 at
    /// the Dirichlet node.
    pub fn load(&self, u: &[f64], g: impl Fn(f64) -> f64) -> Vec<f64> {
        let k = u.len();
        let mut out = vec![0.0; k];
        for (&v, &(e, t, w)) in self.point_values(u).iter().zip(&self.points) {
            let gv = w * g(v);
            out[e] += (1.0 - t) * gv;
            out[e + 1] += t * gv;
        }
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o /= w;
        }
        out[k - 1] = 0.0;
        out
    }

    pub fn stretch(&self) -> Option<f64> {
        self.stretch
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Solves `(a·(-Δ) + b)x = rhs` with the Dirichlet node pinned to zero.
    ///
    /// Requires `a ≥ 0`, `b > 0` (or `a > 0`); the system is symmetric positive
    /// definite after multiplying by the weights, so the Thomas sweep is stable.
    pub fn shifted_laplacian_solve(&self, a: f64, b: f64, rhs: &[f64]) -> Vec<f64> {
        let k = self.len();
        let m = k - 1; // unknowns 0..m
        let c = &self.couplings;
        let w = &self.weights;
        let mut diag = vec![0.0; m];
        let mut off = vec![0.0; m];
        let mut y = vec![0.0; m];
        for i in 0..m {
            let left = if i > 0 { c[i - 1] } else { 0.0 };
            diag[i] = a * (left + c[i]) + b * w[i];
            if i + 1 < m {
                off[i] = -a * c[i];
            }
            y[i] = w[i] * rhs[i];
        }
        // forward elimination
        for i in 1..m {
            let factor = off[i - 1] / diag[i - 1];
            diag[i] -= factor * off[i - 1];
            y[i] -= factor * y[i - 1];
        }
        let mut x = vec![0.0; k];
        x[m - 1] = y[m - 1] / diag[m - 1];
        for i in (0..m - 1).rev() {
            x[i] = (y[i] - off[i] * x[i + 1]) / diag[i];
        }
        x
    }
}

/// A radial profile sampled on a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {i}")));
        }
        Ok(GridFunction { grid, values })
    }

    /// Samples `f` at every node and pins the Dirichlet node to zero.
    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let mut values: Vec<f64> = grid.nodes().iter().map(|&r| f(r)).collect();
        *values.last_mut().unwrap() = 0.0;
        GridFunction { grid, values }
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        GridFunction { grid, values }
    }

    pub(crate) fn from_parts_unchecked(grid: Arc<RadialGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|&v| f(v)).collect();
        GridFunction {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c·other` on the same grid.
    pub fn axpy(&self, c: f64, other: &GridFunction) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        GridFunction {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Weighted inner product `Σ w_i u_i v_i`.
    pub fn dot(&self, other: &GridFunction) -> f64 {
        weighted_dot(self.grid.weights(), &self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Monotone cubic interpolant of the profile, even about `r = 0` and
    /// extended by zero beyond `R`.
    pub fn interpolant(&self) -> MonotoneCubic {
        MonotoneCubic::new_even(self.grid.nodes(), &self.values)
    }

    /// Resamples the profile onto another grid of the same dimension.
    pub fn resample_onto(&self, grid: Arc<RadialGrid>) -> GridFunction {
        if grid.nodes() == self.grid.nodes() {
            return GridFunction {
                grid,
                values: self.values.clone(),
            };
        }
        let interp = self.interpolant();
        GridFunction::from_fn(grid, |r| interp.eval(r))
    }

    /// Writes the profile as CSV with header `r,u` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["r", "u"])?;
        for (r, u) in self.grid.nodes().iter().zip(&self.values) {
            w.write_record([format!("{r:.16e}"), format!("{u:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads an `r,u` CSV onto `grid`. Rows matching the grid nodes are copied
    /// verbatim; otherwise the data are interpolated.
    pub fn read_csv<R: Read>(reader: R, grid: Arc<RadialGrid>) -> Result<GridFunction> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "r" || &headers[1] != "u" {
            return Err(Error::Parse("expected CSV header `r,u`".into()));
        }
        let mut rs = Vec::new();
        let mut us = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad number `{s}`: {e}")))
            };
            rs.push(parse(&record[0])?);
            us.push(parse(&record[1])?);
        }
        if rs.is_empty() {
            return Err(Error::Insufficient("profile file has no rows".into()));
        }
        if rs.as_slice() == grid.nodes() {
            return GridFunction::new(grid, us);
        }
        if rs.len() < 2 || rs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parse(
                "profile radii must be strictly increasing".into(),
            ));
        }
        let interp = MonotoneCubic::new_even(&rs, &us);
        Ok(GridFunction::from_fn(grid, |r| interp.eval(r)))
    }
}

pub(crate) fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Discrete squared L² norm `Σ w_i u_i²`.
pub fn mass(u: &GridFunction) -> f64 {
    u.dot(u)
}

/// Discrete Dirichlet energy `Σ c_{i+1/2} (u_{i+1} - u_i)²`, Dirichlet node read as 0.
pub fn grad_norm_sq(u: &GridFunction) -> f64 {
    dirichlet_form(u.grid.couplings(), &u.values)
}

pub(crate) fn dirichlet_form(c: &[f64], u: &[f64]) -> f64 {
    let k = u.len();
    let mut acc = 0.0;
    for i in 0..k - 1 {
        let next = if i + 1 == k - 1 { 0.0 } else { u[i + 1] };
        let d = next - u[i];
        acc += c[i] * d * d;
    }
    acc
}

/// Discrete `-(1/r^{N-1})(r^{N-1}u')'`; zero at the Dirichlet node.
pub fn neg_laplacian(u: &GridFunction) -> GridFunction {
    let values = neg_laplacian_values(&u.grid, &u.values);
    GridFunction {
        grid: u.grid.clone(),
        values,
    }
}

pub(crate) fn neg_laplacian_values(grid: &RadialGrid, u: &[f64]) -> Vec<f64> {
    let k = u.len();
    let c = grid.couplings();
    let w = grid.weights();
    let at = |i: usize| if i == k - 1 { 0.0 } else { u[i] };
    let mut out = vec![0.0; k];
    for i in 0..k - 1 {
        let mut flux = c[i] * (at(i) - at(i + 1));
        if i > 0 {
            flux += c[i - 1] * (at(i) - at(i - 1));
        }
        out[i] = flux / w[i];
    }
    out
}
