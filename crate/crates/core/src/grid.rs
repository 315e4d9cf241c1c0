//! Uniform periodic grids on `[-L, L)^n`, real and spectral fields, and the
//! discrete Fourier transform used everywhere else in the crate.
//!
//! The transform is scaled so that dual values approximate the continuum
//! transform `f̂(ξ) = ∫ f(x) e^{-i⟨ξ,x⟩} dx`:
//!
//! ```text
//! f̂(ξ_j) = Σ_m f(x_m) e^{-i⟨ξ_j, x_m⟩} h^n,     x_m = -L + m h,  ξ_j = π j / L
//! ```
//!
//! Dual samples are stored in FFT order: index `q` along an axis carries the
//! integer frequency `j = q` for `q < N/2` and `j = q - N` otherwise.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::GridError;

/// A uniform tensor grid with `N` points per axis on `[-L, L)^n`.
#[derive(Clone)]
pub struct UniformGrid {
    dim: usize,
    half_width: f64,
    points: usize,
    forward: Arc<dyn Fft<f64>>,
    backward: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for UniformGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UniformGrid")
            .field("dim", &self.dim)
            .field("half_width", &self.half_width)
            .field("points", &self.points)
            .finish()
    }
}

impl PartialEq for UniformGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points && self.half_width == other.half_width
    }
}

/// Builds a grid, validating the dimension, point count and half-width.
pub fn make_grid(dim: usize, half_width: f64, points: usize) -> Result<UniformGrid, GridError> {
    UniformGrid::new(dim, half_width, points)
}

impl UniformGrid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self, GridError> {
        if !(1..=3).contains(&dim) {
            return Err(GridError::Dimension(dim));
        }
        if points < 8 || points % 2 != 0 {
            return Err(GridError::PointCount(points));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GridError::HalfWidth(half_width));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            dim,
            half_width,
            points,
            forward: planner.plan_fft_forward(points),
            backward: planner.plan_fft_inverse(points),
        })
    }

    /// Default grid for the rescaled variable in dimension `dim`.
    pub fn default_for(dim: usize) -> Result<Self, GridError> {
        match dim {
            1 => Self::new(1, 30.0, 2048),
            2 => Self::new(2, 20.0, 256),
            3 => Self::new(3, 15.0, 96),
            d => Err(GridError::Dimension(d)),
        }
    }

    /// Same node layout on a box scaled by `factor`; dual frequencies scale by `1/factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, GridError> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(GridError::HalfWidth(self.half_width * factor));
        }
        Ok(Self {
            half_width: self.half_width * factor,
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn node_count(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    /// Cell volume `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Box volume `(2L)^n`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// Multi-index of a flat node index; axis 0 varies slowest.
    pub fn multi_index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            idx[axis] = rem % self.points;
            rem /= self.points;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().take(self.dim).fold(0, |acc, &i| acc * self.points + i)
    }

    /// Coordinates `x_m = -L + m h` of a node.
    pub fn node(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = -self.half_width + idx[axis] as f64 * h;
        }
        x
    }

    /// Signed integer index `j` of FFT-order position `q`.
    pub fn frequency_index(&self, q: usize) -> i64 {
        if q < self.points / 2 {
            q as i64
        } else {
            q as i64 - self.points as i64
        }
    }

    /// Dual frequency vector `ξ = π j / L` of a flat dual index.
    pub fn frequency(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let scale = std::f64::consts::PI / self.half_width;
        let mut xi = [0.0; 3];
        for axis in 0..self.dim {
            xi[axis] = self.frequency_index(idx[axis]) as f64 * scale;
        }
        xi
    }

    pub fn frequency_sq(&self, flat: usize) -> f64 {
        self.frequency(flat)[..self.dim].iter().map(|v| v * v).sum()
    }

    /// `|ξ|²` at every dual node.
    pub fn frequency_sq_all(&self) -> Vec<f64> {
        (0..self.node_count()).map(|q| self.frequency_sq(q)).collect()
    }

    /// Largest resolved frequency magnitude per axis, `π N / (2L)`.
    pub fn max_frequency(&self) -> f64 {
        std::f64::consts::PI * self.points as f64 / (2.0 * self.half_width)
    }

    fn transform_axes(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.points;
        let plan = if inverse { &self.backward } else { &self.forward };
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        let total = self.node_count();
        for axis in 0..self.dim {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = stride * n;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (i, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + i * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (i, v) in line.iter().enumerate() {
                        data[base + i * stride] = *v;
                    }
                }
            }
        }
    }

    fn parity(&self, flat: usize) -> f64 {
        let idx = self.multi_index(flat);
        let s: usize = idx[..self.dim].iter().sum();
        if s % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Forward transform of one real scalar component.
    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut data);
        data
    }

    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.node_count(), "field does not match grid");
        self.transform_axes(data, false);
        let cell = self.cell_volume();
        for (q, v) in data.iter_mut().enumerate() {
            *v *= cell * self.parity(q);
        }
    }

    /// Inverse transform of one dual component, returning the complex samples.
    pub fn inverse_complex(&self, dual: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(dual.len(), self.node_count(), "dual field does not match grid");
        let mut data: Vec<Complex64> = dual
            .iter()
            .enumerate()
            .map(|(q, v)| v * self.parity(q))
            .collect();
        self.transform_axes(&mut data, true);
        let scale = 1.0 / self.volume();
        for v in data.iter_mut() {
            *v *= scale;
        }
        data
    }

    /// Inverse transform, keeping the real part.
    pub fn inverse_real(&self, dual: &[Complex64]) -> Vec<f64> {
        self.inverse_complex(dual).into_iter().map(|v| v.re).collect()
    }

    /// Applies a scalar symbol sampled on the dual grid.
    pub fn apply_scalar_symbol(&self, values: &[f64], symbol: &[Complex64]) -> Vec<f64> {
        let mut hat = self.forward_real(values);
        for (v, s) in hat.iter_mut().zip(symbol) {
            *v *= s;
        }
        self.inverse_real(&hat)
    }

    /// Applies a real scalar symbol sampled on the dual grid.
    pub fn apply_real_symbol(&self, values: &[f64], symbol: &[f64]) -> Vec<f64> {
        let mut hat = self.forward_real(values);
        for (v, s) in hat.iter_mut().zip(symbol) {
            *v *= s;
        }
        self.inverse_real(&hat)
    }

    /// Spectral Laplacian.
    pub fn laplacian(&self, values: &[f64]) -> Vec<f64> {
        let symbol: Vec<f64> = self.frequency_sq_all().into_iter().map(|k| -k).collect();
        self.apply_real_symbol(values, &symbol)
    }

    /// Discrete Sobolev norm of one scalar component.
    pub fn sobolev_norm_scalar(&self, values: &[f64], order: u32) -> f64 {
        let hat = self.forward_real(values);
        self.sobolev_norm_dual(&hat, order)
    }

    pub fn sobolev_norm_dual(&self, hat: &[Complex64], order: u32) -> f64 {
        let sum: f64 = hat
            .iter()
            .enumerate()
            .map(|(q, v)| (1.0 + self.frequency_sq(q)).powi(order as i32) * v.norm_sqr())
            .sum();
        (sum / self.volume()).sqrt()
    }

    /// Quadrature `∫ f dx ≈ Σ f h^n`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.cell_volume()
    }
}

/// Real `k`-vector samples at every physical node, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: UniformGrid,
    components: usize,
    values: Vec<f64>,
}

/// Complex `k`-vector samples at every dual node, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField {
    grid: UniformGrid,
    components: usize,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: &UniformGrid, components: usize, values: Vec<f64>) -> Result<Self, GridError> {
        let expected = grid.node_count() * components;
        if values.len() != expected {
            return Err(GridError::Shape {
                expected,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        Ok(Self {
            grid: grid.clone(),
            components,
            values,
        })
    }

    pub fn zeros(grid: &UniformGrid, components: usize) -> Self {
        Self {
            grid: grid.clone(),
            components,
            values: vec![0.0; grid.node_count() * components],
        }
    }

    /// Scalar field sampled from a function of the node coordinates.
    pub fn from_fn(grid: &UniformGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|m| f(&grid.node(m)[..grid.dim()]))
            .collect();
        Self {
            grid: grid.clone(),
            components: 1,
            values,
        }
    }

    /// Stacks scalar component arrays into one field.
    pub fn from_components(grid: &UniformGrid, comps: &[Vec<f64>]) -> Result<Self, GridError> {
        let values: Vec<f64> = comps.iter().flatten().copied().collect();
        Self::new(grid, comps.len(), values)
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.node_count();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dual(&self) -> DualField {
        let values = (0..self.components)
            .flat_map(|c| self.grid.forward_real(self.component(c)))
            .collect();
        DualField {
            grid: self.grid.clone(),
            components: self.components,
            values,
        }
    }

    /// Writes node coordinates followed by one column per component.
    pub fn write_csv<W: Write>(&self, out: &mut W, coordinate_scale: &[f64]) -> std::io::Result<()> {
        let dim = self.grid.dim();
        let axes = ["x", "y", "z"];
        let mut header: Vec<String> = axes[..dim].iter().map(|s| s.to_string()).collect();
        header.extend((0..self.components).map(|c| format!("u{c}")));
        writeln!(out, "{}", header.join(","))?;
        for m in 0..self.grid.node_count() {
            let x = self.grid.node(m);
            let mut row: Vec<String> = (0..dim)
                .map(|a| format!("{:.12e}", x[a] * coordinate_scale.get(a).copied().unwrap_or(1.0)))
                .collect();
            row.extend((0..self.components).map(|c| format!("{:.15e}", self.component(c)[m])));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_profile(&self) -> FieldProfile {
        FieldProfile {
            dim: self.grid.dim(),
            half_width: self.grid.half_width(),
            points: self.grid.points(),
            components: self.components,
            values: self.values.clone(),
        }
    }

    pub fn from_profile(profile: &FieldProfile) -> Result<Self, GridError> {
        let grid = UniformGrid::new(profile.dim, profile.half_width, profile.points)?;
        Self::new(&grid, profile.components, profile.values.clone())
    }
}

impl DualField {
    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.node_count();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn to_physical(&self) -> Field {
        let values = (0..self.components)
            .flat_map(|c| self.grid.inverse_real(self.component(c)))
            .collect();
        Field {
            grid: self.grid.clone(),
            components: self.components,
            values,
        }
    }

    /// Largest conjugate-symmetry defect `|û(-ξ) - conj(û(ξ))|`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let n = self.grid.node_count();
        let p = self.grid.points();
        let dim = self.grid.dim();
        let mut worst: f64 = 0.0;
        for c in 0..self.components {
            let comp = &self.values[c * n..(c + 1) * n];
            for q in 0..n {
                let idx = self.grid.multi_index(q);
                let mut neg = [0usize; 3];
                for a in 0..dim {
                    neg[a] = (p - idx[a]) % p;
                }
                let qn = self.grid.flat_index(&neg[..dim]);
                worst = worst.max((comp[qn] - comp[q].conj()).norm());
            }
        }
        worst
    }
}

/// Physical → dual transform of every component.
pub fn to_dual(f: &Field) -> DualField {
    f.to_dual()
}

/// Dual → physical transform of every component (real part).
pub fn from_dual(g: &DualField) -> Field {
    g.to_physical()
}

/// `‖f‖_{H^ℓ}` via `Σ_ξ (1+|ξ|²)^ℓ |f̂(ξ)|² (2L)^{-n}`, summed over components.
pub fn sobolev_norm(f: &Field, order: u32) -> f64 {
    let grid = f.grid();
    (0..f.components())
        .map(|c| grid.sobolev_norm_scalar(f.component(c), order).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `k×k` complex matrix samples at every dual node, node-major and row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSymbol {
    pub k: usize,
    pub samples: Vec<Complex64>,
}

impl MatrixSymbol {
    pub fn identity(grid: &UniformGrid, k: usize) -> Self {
        let mut samples = vec![Complex64::new(0.0, 0.0); grid.node_count() * k * k];
        for node in 0..grid.node_count() {
            for i in 0..k {
                samples[node * k * k + i * k + i] = Complex64::new(1.0, 0.0);
            }
        }
        Self { k, samples }
    }

    /// Scalar symbol times the identity.
    pub fn from_scalar(grid: &UniformGrid, k: usize, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut samples = vec![Complex64::new(0.0, 0.0); grid.node_count() * k * k];
        for node in 0..grid.node_count() {
            let value = f(&grid.frequency(node)[..grid.dim()]);
            for i in 0..k {
                samples[node * k * k + i * k + i] = value;
            }
        }
        Self { k, samples }
    }

    pub fn at(&self, node: usize, i: usize, j: usize) -> Complex64 {
        self.samples[node * self.k * self.k + i * self.k + j]
    }

    /// Node-wise product `self(ξ) · other(ξ)`.
    pub fn compose(&self, other: &MatrixSymbol) -> MatrixSymbol {
        let k = self.k;
        let nodes = self.samples.len() / (k * k);
        let mut samples = vec![Complex64::new(0.0, 0.0); self.samples.len()];
        for node in 0..nodes {
            let base = node * k * k;
            for i in 0..k {
                for j in 0..k {
                    samples[base + i * k + j] = (0..k)
                        .map(|l| self.samples[base + i * k + l] * other.samples[base + l * k + j])
                        .sum();
                }
            }
        }
        MatrixSymbol { k, samples }
    }
}

/// `ĝ(ξ) = symbol(ξ) · f̂(ξ)`.
pub fn apply_multiplier(symbol: &MatrixSymbol, f: &Field) -> Result<Field, GridError> {
    let grid = f.grid();
    let k = f.components();
    let expected = grid.node_count() * k * k;
    if symbol.k != k || symbol.samples.len() != expected {
        return Err(GridError::Shape {
            expected,
            got: symbol.samples.len(),
        });
    }
    if let Some(i) = symbol.samples.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(GridError::NonFinite(i));
    }
    let n = grid.node_count();
    let hats: Vec<Vec<Complex64>> = (0..k).map(|c| grid.forward_real(f.component(c))).collect();
    let mut values = Vec::with_capacity(n * k);
    for i in 0..k {
        let out: Vec<Complex64> = (0..n)
            .map(|q| (0..k).map(|j| symbol.at(q, i, j) * hats[j][q]).sum())
            .collect();
        values.extend(grid.inverse_real(&out));
    }
    Ok(Field {
        grid: grid.clone(),
        components: k,
        values,
    })
}

/// Binary-free JSON profile: grid metadata plus the flattened value array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldProfile {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
    pub components: usize,
    pub values: Vec<f64>,
}
