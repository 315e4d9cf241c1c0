//! Matrix convolution kernels with closed-form or gridded Fourier symbols.
//!
//! Symbols use `K̂(ξ) = ∫ K(x) e^{-i⟨ξ,x⟩} dx`, so that
//! `K̂(ξ) = M0 - i⟨ξ, M1⟩ - ½ ξᵀ M2 ξ + o(|ξ|²)` in terms of the moments.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::KernelError;
use crate::grid::{Field, FieldProfile, MatrixSymbol, UniformGrid};
use crate::symmetry::SymmetryGroup;

/// `∫_{ℝⁿ} e^{-|x|} dx`.
fn exponential_mass(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 8.0 * PI,
        _ => f64::NAN,
    }
}

/// Normalizer making `c (1 + |x|²/σ²)^{-p}` integrate to one.
pub fn algebraic_normalizer(dim: usize, width: f64, p: f64) -> f64 {
    let n = dim as f64;
    gamma(p) / (PI.powf(n / 2.0) * gamma(p - n / 2.0) * width.powf(n))
}

/// `2^{1-ν}/Γ(ν) · s^ν K_ν(s)`, the transform of the normalized algebraic kernel.
/// Equals 1 at `s = 0`.
pub fn matern(nu: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    // K_ν(s) = ∫_0^∞ e^{-s cosh t} cosh(νt) dt, trapezoid rule in log space.
    let h = 0.05 / (s / 40.0).sqrt().max(1.0);
    let log_pref = nu * s.ln();
    let log_term = |t: f64| log_pref - s * t.cosh() + nu * t;
    let mut peak = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut i = 0usize;
    loop {
        let t = i as f64 * h;
        let lt = log_term(t);
        peak = peak.max(lt);
        let w = if i == 0 { 0.5 } else { 1.0 };
        sum += w * (lt.exp()) * 0.5 * (1.0 + (-2.0 * nu * t).exp());
        let falling = nu - s * t.sinh() < 0.0;
        if falling && lt < peak - 45.0 {
            break;
        }
        i += 1;
        if i > 200_000 {
            break;
        }
    }
    let k_scaled = sum * h;
    2f64.powf(1.0 - nu) / gamma(nu) * k_scaled
}

/// A scalar kernel entry.
#[derive(Debug, Clone)]
pub enum KernelEntry {
    Zero,
    /// `a e^{-|x|/σ} / (C_n σⁿ)`, integrating to `a`.
    Exponential { amplitude: f64, width: f64 },
    /// `a Π_i (2π σ_i²)^{-1/2} e^{-x_i²/(2σ_i²)}`; a single width means isotropic.
    Gaussian { amplitude: f64, widths: Vec<f64> },
    /// `a c_{n,p} (1 + |x|²/σ²)^{-p}`.
    Algebraic { amplitude: f64, width: f64, exponent: f64 },
    Sum(Vec<KernelEntry>),
    Grid(Arc<GriddedEntry>),
}

/// Kernel samples on a uniform grid together with their discrete transform.
#[derive(Debug, Clone)]
pub struct GriddedEntry {
    grid: UniformGrid,
    values: Vec<f64>,
    symbol: Vec<Complex64>,
}

impl GriddedEntry {
    pub fn new(grid: &UniformGrid, values: Vec<f64>) -> Result<Self, KernelError> {
        if values.len() != grid.node_count() {
            return Err(KernelError::Descriptor(format!(
                "gridded kernel has {} samples, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::Descriptor("gridded kernel has non-finite samples".into()));
        }
        let symbol = grid.forward_real(&values);
        Ok(Self {
            grid: grid.clone(),
            values,
            symbol,
        })
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest sample magnitude on the outermost layer of nodes, relative to the peak.
    pub fn boundary_mass(&self) -> f64 {
        let peak = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let n = self.grid.points();
        let edge = (0..self.grid.node_count())
            .filter(|&m| {
                let idx = self.grid.multi_index(m);
                idx[..self.grid.dim()].iter().any(|&i| i == 0 || i == n - 1)
            })
            .fold(0.0_f64, |m, i| m.max(self.values[i].abs()));
        if peak > 0.0 {
            edge / peak
        } else {
            0.0
        }
    }

    fn symbol_at(&self, xi: &[f64]) -> Result<Complex64, KernelError> {
        let max = self.grid.max_frequency();
        let dim = self.grid.dim();
        if let Some(&bad) = xi[..dim].iter().find(|v| v.abs() > max * (1.0 + 1e-12)) {
            return Err(KernelError::UnderResolved {
                requested: bad.abs(),
                max,
            });
        }
        let scale = self.grid.half_width() / PI;
        let n = self.grid.points() as i64;
        let mut idx = [0usize; 3];
        let mut aligned = true;
        for a in 0..dim {
            let j = xi[a] * scale;
            let r = j.round();
            if (j - r).abs() > 1e-9 || r as i64 >= n / 2 {
                aligned = false;
                break;
            }
            idx[a] = (r as i64).rem_euclid(n) as usize;
        }
        if aligned {
            return Ok(self.symbol[self.grid.flat_index(&idx[..dim])]);
        }
        let cell = self.grid.cell_volume();
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, v) in self.values.iter().enumerate() {
            let x = self.grid.node(m);
            let phase: f64 = (0..dim).map(|a| xi[a] * x[a]).sum();
            acc += Complex64::from_polar(*v, -phase);
        }
        Ok(acc * cell)
    }

    fn moments(&self) -> (f64, Vec<f64>, DMatrix<f64>) {
        let dim = self.grid.dim();
        let cell = self.grid.cell_volume();
        let mut m0 = 0.0;
        let mut m1 = vec![0.0; dim];
        let mut m2 = DMatrix::zeros(dim, dim);
        for (m, v) in self.values.iter().enumerate() {
            let x = self.grid.node(m);
            m0 += v;
            for i in 0..dim {
                m1[i] += x[i] * v;
                for j in 0..dim {
                    m2[(i, j)] += x[i] * x[j] * v;
                }
            }
        }
        (m0 * cell, m1.into_iter().map(|v| v * cell).collect(), m2 * cell)
    }
}

impl KernelEntry {
    fn validate(&self, dim: usize) -> Result<(), KernelError> {
        let bad = |msg: String| Err(KernelError::Descriptor(msg));
        match self {
            Self::Zero => Ok(()),
            Self::Exponential { amplitude, width } => {
                if !amplitude.is_finite() || !(width.is_finite() && *width > 0.0) {
                    return bad(format!("exponential entry needs finite amplitude and positive width, got a = {amplitude}, σ = {width}"));
                }
                Ok(())
            }
            Self::Gaussian { amplitude, widths } => {
                if !amplitude.is_finite() {
                    return bad(format!("gaussian amplitude {amplitude} is not finite"));
                }
                if widths.len() != 1 && widths.len() != dim {
                    return bad(format!("gaussian entry has {} widths in dimension {dim}", widths.len()));
                }
                if widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return bad("gaussian widths must be positive".into());
                }
                Ok(())
            }
            Self::Algebraic {
                amplitude,
                width,
                exponent,
            } => {
                if !amplitude.is_finite() || !(width.is_finite() && *width > 0.0) {
                    return bad("algebraic entry needs finite amplitude and positive width".into());
                }
                let min = (dim as f64 + 2.0) / 2.0;
                if !(exponent.is_finite() && *exponent > min) {
                    return bad(format!(
                        "algebraic exponent p = {exponent} must exceed (n+2)/2 = {min} for finite second moments"
                    ));
                }
                Ok(())
            }
            Self::Sum(terms) => terms.iter().try_for_each(|t| t.validate(dim)),
            Self::Grid(g) => {
                if g.grid.dim() != dim {
                    return bad(format!("gridded entry has dimension {}, kernel has {dim}", g.grid.dim()));
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Sum(t) => t.iter().all(|e| e.is_zero()),
            _ => false,
        }
    }

    pub fn is_gridded(&self) -> bool {
        match self {
            Self::Grid(_) => true,
            Self::Sum(t) => t.iter().any(|e| e.is_gridded()),
            _ => false,
        }
    }

    fn widths(widths: &[f64], dim: usize) -> Vec<f64> {
        if widths.len() == 1 {
            vec![widths[0]; dim]
        } else {
            widths.to_vec()
        }
    }

    pub fn symbol(&self, dim: usize, xi: &[f64]) -> Result<Complex64, KernelError> {
        let r2: f64 = xi[..dim].iter().map(|v| v * v).sum();
        let real = |v: f64| Ok(Complex64::new(v, 0.0));
        match self {
            Self::Zero => real(0.0),
            Self::Exponential { amplitude, width } => {
                real(amplitude * (1.0 + width * width * r2).powf(-(dim as f64 + 1.0) / 2.0))
            }
            Self::Gaussian { amplitude, widths } => {
                let w = Self::widths(widths, dim);
                let q: f64 = (0..dim).map(|i| w[i] * w[i] * xi[i] * xi[i]).sum();
                real(amplitude * (-q / 2.0).exp())
            }
            Self::Algebraic {
                amplitude,
                width,
                exponent,
            } => {
                let nu = exponent - dim as f64 / 2.0;
                real(amplitude * matern(nu, width * r2.sqrt()))
            }
            Self::Sum(terms) => terms.iter().map(|t| t.symbol(dim, xi)).sum(),
            Self::Grid(g) => g.symbol_at(xi),
        }
    }

    /// Real-space value, when a closed form is available.
    pub fn value(&self, dim: usize, x: &[f64]) -> Option<f64> {
        let r2: f64 = x[..dim].iter().map(|v| v * v).sum();
        match self {
            Self::Zero => Some(0.0),
            Self::Exponential { amplitude, width } => Some(
                amplitude * (-r2.sqrt() / width).exp() / (exponential_mass(dim) * width.powi(dim as i32)),
            ),
            Self::Gaussian { amplitude, widths } => {
                let w = Self::widths(widths, dim);
                Some(
                    (0..dim)
                        .map(|i| (-x[i] * x[i] / (2.0 * w[i] * w[i])).exp() / (2.0 * PI * w[i] * w[i]).sqrt())
                        .product::<f64>()
                        * amplitude,
                )
            }
            Self::Algebraic {
                amplitude,
                width,
                exponent,
            } => Some(
                amplitude
                    * algebraic_normalizer(dim, *width, *exponent)
                    * (1.0 + r2 / (width * width)).powf(-exponent),
            ),
            Self::Sum(terms) => terms.iter().map(|t| t.value(dim, x)).sum(),
            Self::Grid(_) => None,
        }
    }

    /// `(∫K, ∫xK, ∫x xᵀK)`.
    pub fn moments(&self, dim: usize) -> (f64, Vec<f64>, DMatrix<f64>) {
        let zero = || (0.0, vec![0.0; dim], DMatrix::zeros(dim, dim));
        match self {
            Self::Zero => zero(),
            Self::Exponential { amplitude, width } => (
                *amplitude,
                vec![0.0; dim],
                DMatrix::identity(dim, dim) * (amplitude * (dim as f64 + 1.0) * width * width),
            ),
            Self::Gaussian { amplitude, widths } => {
                let w = Self::widths(widths, dim);
                (
                    *amplitude,
                    vec![0.0; dim],
                    DMatrix::from_diagonal(&DVector::from_iterator(dim, w.iter().map(|s| amplitude * s * s))),
                )
            }
            Self::Algebraic {
                amplitude,
                width,
                exponent,
            } => {
                let nu = exponent - dim as f64 / 2.0;
                (
                    *amplitude,
                    vec![0.0; dim],
                    DMatrix::identity(dim, dim) * (amplitude * width * width / (2.0 * (nu - 1.0))),
                )
            }
            Self::Sum(terms) => terms.iter().fold(zero(), |(a0, a1, a2), t| {
                let (b0, b1, b2) = t.moments(dim);
                (a0 + b0, a1.iter().zip(&b1).map(|(x, y)| x + y).collect(), a2 + b2)
            }),
            Self::Grid(g) => g.moments(),
        }
    }

    fn max_frequency(&self) -> f64 {
        match self {
            Self::Grid(g) => g.grid.max_frequency(),
            Self::Sum(t) => t.iter().map(|e| e.max_frequency()).fold(f64::INFINITY, f64::min),
            _ => f64::INFINITY,
        }
    }

    /// Samples a closed-form entry on a grid.
    pub fn sample(&self, grid: &UniformGrid) -> Result<GriddedEntry, KernelError> {
        let dim = grid.dim();
        let values = (0..grid.node_count())
            .map(|m| self.value(dim, &grid.node(m)[..dim]))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| KernelError::Descriptor("entry has no closed-form real-space values".into()))?;
        GriddedEntry::new(grid, values)
    }

    pub fn from_descriptor(desc: &KernelDescriptor, dim: usize, base: &Path) -> Result<Self, KernelError> {
        let width = || desc.width.unwrap_or(1.0);
        let entry = match desc.family.as_str() {
            "zero" => Self::Zero,
            "exponential" => Self::Exponential {
                amplitude: desc.amplitude,
                width: width(),
            },
            "gaussian" => Self::Gaussian {
                amplitude: desc.amplitude,
                widths: desc.widths.clone().unwrap_or_else(|| vec![width()]),
            },
            "algebraic" => Self::Algebraic {
                amplitude: desc.amplitude,
                width: width(),
                exponent: desc
                    .p
                    .ok_or_else(|| KernelError::Descriptor("algebraic entry requires \"p\"".into()))?,
            },
            "sum" => Self::Sum(
                desc.terms
                    .as_deref()
                    .unwrap_or(&[])
                    .iter()
                    .map(|t| Self::from_descriptor(t, dim, base))
                    .collect::<Result<_, _>>()?,
            ),
            "grid" => {
                let file = desc
                    .file
                    .as_ref()
                    .ok_or_else(|| KernelError::Descriptor("grid entry requires \"file\"".into()))?;
                let path = if file.is_absolute() { file.clone() } else { base.join(file) };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| KernelError::Descriptor(format!("{}: {e}", path.display())))?;
                let profile: FieldProfile = serde_json::from_str(&text)
                    .map_err(|e| KernelError::Descriptor(format!("{}: {e}", path.display())))?;
                if profile.components != 1 {
                    return Err(KernelError::Descriptor("gridded kernel entries must be scalar".into()));
                }
                let field = Field::from_profile(&profile).map_err(|e| KernelError::Descriptor(e.to_string()))?;
                let values: Vec<f64> = field.values().iter().map(|v| v * desc.amplitude).collect();
                Self::Grid(Arc::new(GriddedEntry::new(field.grid(), values)?))
            }
            other => {
                return Err(KernelError::Descriptor(format!(
                    "unknown family \"{other}\" (expected zero, exponential, gaussian, algebraic, sum or grid)"
                )))
            }
        };
        entry.validate(dim)?;
        Ok(entry)
    }
}

/// JSON form of a kernel entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDescriptor {
    pub family: String,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<KernelDescriptor>>,
}

fn one() -> f64 {
    1.0
}

impl KernelDescriptor {
    pub fn analytic(family: &str, amplitude: f64, width: f64) -> Self {
        Self {
            family: family.into(),
            amplitude,
            width: Some(width),
            widths: None,
            p: None,
            file: None,
            terms: None,
        }
    }
}

/// Result of a kernel symmetry check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub deviation: f64,
    pub tolerance: f64,
    pub symmetric: bool,
    pub group_order: usize,
    pub compared: &'static str,
}

/// A `k×k` kernel on `ℝⁿ`, optionally composed with a linear frequency map
/// (`ξ ↦ K̂(Aξ)`) and a traveling-wave factor `1/(1 - icξ)`.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    dim: usize,
    k: usize,
    entries: Vec<KernelEntry>,
    symmetry: SymmetryGroup,
    frequency_map: Option<DMatrix<f64>>,
    speed: f64,
}

impl KernelSpec {
    pub fn new(dim: usize, k: usize, entries: Vec<KernelEntry>, symmetry: SymmetryGroup) -> Result<Self, KernelError> {
        if !(1..=3).contains(&dim) {
            return Err(KernelError::Descriptor(format!("unsupported dimension {dim}")));
        }
        if k == 0 || entries.len() != k * k {
            return Err(KernelError::Descriptor(format!(
                "expected {} entries for k = {k}, got {}",
                k * k,
                entries.len()
            )));
        }
        if symmetry.dim() != dim {
            return Err(KernelError::Generator(format!(
                "symmetry group acts on dimension {}, kernel on {dim}",
                symmetry.dim()
            )));
        }
        for e in &entries {
            e.validate(dim)?;
        }
        Ok(Self {
            dim,
            k,
            entries,
            symmetry,
            frequency_map: None,
            speed: 0.0,
        })
    }

    pub fn scalar(dim: usize, entry: KernelEntry, symmetry: SymmetryGroup) -> Result<Self, KernelError> {
        Self::new(dim, 1, vec![entry], symmetry)
    }

    pub fn diagonal(dim: usize, diag: Vec<KernelEntry>, symmetry: SymmetryGroup) -> Result<Self, KernelError> {
        let k = diag.len();
        let mut entries = vec![KernelEntry::Zero; k * k];
        for (i, e) in diag.into_iter().enumerate() {
            entries[i * k + i] = e;
        }
        Self::new(dim, k, entries, symmetry)
    }

    pub fn from_descriptors(
        dim: usize,
        rows: &[Vec<KernelDescriptor>],
        symmetry: SymmetryGroup,
        base: &Path,
    ) -> Result<Self, KernelError> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(KernelError::Descriptor("kernel entry table must be square".into()));
        }
        let entries = rows
            .iter()
            .flatten()
            .map(|d| KernelEntry::from_descriptor(d, dim, base))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dim, k, entries, symmetry)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.k
    }

    pub fn entry(&self, i: usize, j: usize) -> &KernelEntry {
        &self.entries[i * self.k + j]
    }

    pub fn symmetry(&self) -> &SymmetryGroup {
        &self.symmetry
    }

    pub fn with_symmetry(&self, symmetry: SymmetryGroup) -> Result<Self, KernelError> {
        if symmetry.dim() != self.dim {
            return Err(KernelError::Generator("symmetry dimension mismatch".into()));
        }
        Ok(Self {
            symmetry,
            ..self.clone()
        })
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn frequency_map(&self) -> Option<&DMatrix<f64>> {
        self.frequency_map.as_ref()
    }

    pub fn is_gridded(&self) -> bool {
        self.entries.iter().any(|e| e.is_gridded())
    }

    /// Largest frequency magnitude per axis at which the symbol is resolved.
    pub fn max_frequency(&self) -> f64 {
        self.entries.iter().map(|e| e.max_frequency()).fold(f64::INFINITY, f64::min)
    }

    fn mapped(&self, xi: &[f64]) -> Vec<f64> {
        match &self.frequency_map {
            None => xi[..self.dim].to_vec(),
            Some(a) => (0..self.dim)
                .map(|i| (0..self.dim).map(|j| a[(i, j)] * xi[j]).sum())
                .collect(),
        }
    }

    /// `K̂(ξ)`.
    pub fn eval_symbol(&self, xi: &[f64]) -> Result<DMatrix<Complex64>, KernelError> {
        if xi.len() < self.dim || xi[..self.dim].iter().any(|v| !v.is_finite()) {
            return Err(KernelError::Descriptor(format!("frequency {xi:?} is not a finite {}-vector", self.dim)));
        }
        let eta = self.mapped(xi);
        let travel = Complex64::new(1.0, -self.speed * eta[0]);
        let mut out = DMatrix::from_element(self.k, self.k, Complex64::new(0.0, 0.0));
        for i in 0..self.k {
            for j in 0..self.k {
                out[(i, j)] = self.entry(i, j).symbol(self.dim, &eta)? / travel;
            }
        }
        Ok(out)
    }

    /// Real-space values `K(x)` when every entry has a closed form.
    pub fn value(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        if self.speed != 0.0 {
            return None;
        }
        let (y, jac) = match &self.frequency_map {
            None => (x[..self.dim].to_vec(), 1.0),
            Some(a) => {
                let inv_t = a.transpose().try_inverse()?;
                let y = (0..self.dim)
                    .map(|i| (0..self.dim).map(|j| inv_t[(i, j)] * x[j]).sum())
                    .collect();
                (y, 1.0 / a.determinant().abs())
            }
        };
        let mut out = DMatrix::zeros(self.k, self.k);
        for i in 0..self.k {
            for j in 0..self.k {
                out[(i, j)] = self.entry(i, j).value(self.dim, &y)? * jac;
            }
        }
        Some(out)
    }

    /// Moment matrices `(M0, [M1_a], [[M2_ab]])`, entrywise.
    pub fn moments(&self) -> (DMatrix<f64>, Vec<DMatrix<f64>>, Vec<Vec<DMatrix<f64>>>) {
        let (n, k) = (self.dim, self.k);
        let mut m0 = DMatrix::zeros(k, k);
        let mut m1 = vec![DMatrix::zeros(k, k); n];
        let mut m2 = vec![vec![DMatrix::zeros(k, k); n]; n];
        for i in 0..k {
            for j in 0..k {
                let (a0, a1, a2) = self.entry(i, j).moments(n);
                m0[(i, j)] = a0;
                for a in 0..n {
                    m1[a][(i, j)] = a1[a];
                    for b in 0..n {
                        m2[a][b][(i, j)] = a2[(a, b)];
                    }
                }
            }
        }
        if self.speed != 0.0 {
            let c = self.speed;
            let new_m1 = &m1[0] - &m0 * c;
            m2[0][0] = &m2[0][0] - &m1[0] * (2.0 * c) + &m0 * (2.0 * c * c);
            m1[0] = new_m1;
        }
        if let Some(a) = &self.frequency_map {
            let mut t1 = vec![DMatrix::zeros(k, k); n];
            let mut t2 = vec![vec![DMatrix::zeros(k, k); n]; n];
            for p in 0..n {
                for a_idx in 0..n {
                    t1[p] += &m1[a_idx] * a[(a_idx, p)];
                    for q in 0..n {
                        for b_idx in 0..n {
                            t2[p][q] += &m2[a_idx][b_idx] * (a[(a_idx, p)] * a[(b_idx, q)]);
                        }
                    }
                }
            }
            m1 = t1;
            m2 = t2;
        }
        (m0, m1, m2)
    }

    /// Entrywise `∫ x^α K(x) dx` for a multi-index with `|α| ≤ 2`.
    pub fn moment(&self, alpha: &[usize]) -> Result<DMatrix<f64>, KernelError> {
        if alpha.len() != self.dim {
            return Err(KernelError::Descriptor(format!(
                "multi-index {alpha:?} has wrong length for dimension {}",
                self.dim
            )));
        }
        let order: usize = alpha.iter().sum();
        let (m0, m1, m2) = self.moments();
        let axes: Vec<usize> = alpha.iter().enumerate().flat_map(|(a, &c)| std::iter::repeat(a).take(c)).collect();
        match order {
            0 => Ok(m0),
            1 => Ok(m1[axes[0]].clone()),
            2 => Ok(m2[axes[0]][axes[1]].clone()),
            _ => Err(KernelError::Descriptor(format!("moment order {order} exceeds 2"))),
        }
    }

    /// Deviation of `K` from `Γ`-invariance; errors when `Fix Γ ≠ {0}`.
    pub fn check_symmetry(&self, group: &SymmetryGroup) -> Result<SymmetryReport, KernelError> {
        if group.dim() != self.dim {
            return Err(KernelError::Generator("symmetry dimension mismatch".into()));
        }
        group.check_fixed_space()?;
        let n = self.dim;
        let mut directions: Vec<Vec<f64>> = Vec::new();
        for a in 0..n {
            let mut d = vec![0.0; n];
            d[a] = 1.0;
            directions.push(d);
        }
        let irrational = [0.83, -0.31, 0.46];
        directions.push(irrational[..n].to_vec());
        directions.push((0..n).map(|i| 1.0 / (1.0 + i as f64)).collect());
        let closed_form = self.value(&vec![0.0; n]).is_some();
        let (radii, tolerance, compared): (&[f64], f64, &'static str) = if closed_form {
            (&[0.3, 0.7, 1.3, 2.1], 1e-10, "real-space values")
        } else {
            (&[0.2, 0.5, 1.0, 2.0], if self.is_gridded() { 1e-8 } else { 1e-10 }, "symbols")
        };
        let band = self.max_frequency();
        let mut deviation: f64 = 0.0;
        for d in &directions {
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            for &r in radii {
                let p: Vec<f64> = d.iter().map(|v| v * r / norm).collect();
                for g in group.elements() {
                    let gp = g.apply(&p);
                    let dev = if closed_form {
                        let a = self.value(&p).expect("closed form");
                        let b = self.value(&gp).expect("closed form");
                        (a - b).abs().max()
                    } else {
                        if p.iter().chain(&gp).any(|v| v.abs() > band) {
                            continue;
                        }
                        let a = self.eval_symbol(&p)?;
                        let b = self.eval_symbol(&gp)?;
                        (a - b).iter().fold(0.0_f64, |m, v| m.max(v.norm()))
                    };
                    deviation = deviation.max(dev);
                }
            }
        }
        Ok(SymmetryReport {
            deviation,
            tolerance,
            symmetric: deviation <= tolerance,
            group_order: group.order(),
            compared,
        })
    }

    /// `(1 - c∂_x)^{-1} ∗ K`, symbol `K̂(ξ)/(1 - icξ)`.
    pub fn traveling_transform(&self, c: f64) -> Result<Self, KernelError> {
        if self.dim != 1 {
            return Err(KernelError::NotOneDimensional(self.dim));
        }
        if self.frequency_map.is_some() {
            return Err(KernelError::Descriptor(
                "apply the traveling transform before normalizing the kernel".into(),
            ));
        }
        if !c.is_finite() {
            return Err(KernelError::Descriptor(format!("wave speed {c} is not finite")));
        }
        Ok(Self {
            speed: self.speed + c,
            ..self.clone()
        })
    }

    /// `K̃(y) = |det T| K(T y)`, with symbol `K̂(T^{-T} ξ)`.
    pub fn normalized(&self, t: &DMatrix<f64>) -> Result<Self, KernelError> {
        let inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| KernelError::Descriptor("normalization matrix is singular".into()))?;
        let a_new = inv.transpose();
        let map = match &self.frequency_map {
            None => a_new,
            Some(a) => a * a_new,
        };
        Ok(Self {
            frequency_map: Some(map),
            ..self.clone()
        })
    }

    /// Symbol samples at `scale · ξ_q` on every dual node of `grid`.
    pub fn sample_symbol(&self, grid: &UniformGrid, scale: f64) -> Result<MatrixSymbol, KernelError> {
        let k = self.k;
        let mut samples = Vec::with_capacity(grid.node_count() * k * k);
        for q in 0..grid.node_count() {
            let xi: Vec<f64> = grid.frequency(q)[..self.dim].iter().map(|v| v * scale).collect();
            let m = self.eval_symbol(&xi)?;
            for i in 0..k {
                for j in 0..k {
                    samples.push(m[(i, j)]);
                }
            }
        }
        Ok(MatrixSymbol { k, samples })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn exp1(a: f64) -> KernelSpec {
        KernelSpec::scalar(
            1,
            KernelEntry::Exponential {
                amplitude: a,
                width: 1.0,
            },
            SymmetryGroup::plus_minus(1),
        )
        .unwrap()
    }

    fn gauss1(a: f64) -> KernelSpec {
        KernelSpec::scalar(
            1,
            KernelEntry::Gaussian {
                amplitude: a,
                widths: vec![1.0],
            },
            SymmetryGroup::plus_minus(1),
        )
        .unwrap()
    }

    #[test]
    fn exponential_symbol_values() {
        let k = exp1(-1.0);
        assert!((k.eval_symbol(&[0.0]).unwrap()[(0, 0)].re + 1.0).abs() < 1e-15);
        assert!((k.eval_symbol(&[1.0]).unwrap()[(0, 0)].re + 0.5).abs() < 1e-15);
        assert!((k.value(&[0.0]).unwrap()[(0, 0)] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_symbol_values() {
        let k = gauss1(-1.0);
        for xi in [0.0, 0.5, 2.0] {
            let s = k.eval_symbol(&[xi]).unwrap()[(0, 0)].re;
            assert!((s + (-xi * xi / 2.0f64).exp()).abs() < 1e-15);
        }
        assert!((k.value(&[0.0]).unwrap()[(0, 0)] + 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn moments_match_closed_forms() {
        assert!((exp1(-1.0).moment(&[2]).unwrap()[(0, 0)] + 2.0).abs() < 1e-15);
        assert!((gauss1(-1.0).moment(&[2]).unwrap()[(0, 0)] + 1.0).abs() < 1e-15);
        assert_eq!(exp1(-1.0).moment(&[1]).unwrap()[(0, 0)], 0.0);
        assert!(exp1(-1.0).moment(&[3]).is_err());
    }

    #[test]
    fn matern_half_integer_orders() {
        for s in [0.0, 1e-6, 0.3, 1.0, 4.0, 20.0] {
            assert!((matern(0.5, s) - (-s).exp()).abs() < 1e-13, "s = {s}");
            assert!((matern(1.5, s) - (1.0 + s) * (-s).exp()).abs() < 1e-13, "s = {s}");
            let five_halves = (1.0 + s + s * s / 3.0) * (-s).exp();
            assert!((matern(2.5, s) - five_halves).abs() < 1e-13, "s = {s}");
        }
    }

    #[test]
    fn algebraic_normalization_integrates_to_amplitude() {
        for (dim, p) in [(1usize, 2.5), (2, 2.5), (3, 3.0)] {
            let e = KernelEntry::Algebraic {
                amplitude: 1.0,
                width: 1.0,
                exponent: p,
            };
            let c = algebraic_normalizer(dim, 1.0, p);
            let n = dim as f64;
            // radial integral ∫ r^{n-1} (1+r²)^{-p} dr by substitution
            let surface = 2.0 * PI.powf(n / 2.0) / gamma(n / 2.0);
            let radial = 0.5 * gamma(n / 2.0) * gamma(p - n / 2.0) / gamma(p);
            assert!((c * surface * radial - 1.0).abs() < 1e-13);
            assert!(e.validate(dim).is_ok());
        }
        let bad = KernelEntry::Algebraic {
            amplitude: 1.0,
            width: 1.0,
            exponent: 1.4,
        };
        assert!(bad.validate(1).is_err());
    }

    #[test]
    fn analytic_symbols_match_gridded_sampling() {
        let grid = make_grid(1, 60.0, 4096).unwrap();
        // the exponential has a cusp at the origin, so node sampling is only O(h²) accurate
        let cusp = KernelEntry::Exponential {
            amplitude: -1.0,
            width: 1.0,
        };
        let g = cusp.sample(&grid).unwrap();
        for q in [0usize, 3, 40] {
            let exact = cusp.symbol(1, &grid.frequency(q)).unwrap();
            assert!((g.symbol[q] - exact).norm() < 1e-3);
        }
        let entries = [KernelEntry::Gaussian {
            amplitude: 1.0,
            widths: vec![0.7],
        }];
        for e in entries {
            let g = e.sample(&grid).unwrap();
            for q in [0usize, 3, 40, 200] {
                let xi = grid.frequency(q);
                let exact = e.symbol(1, &xi).unwrap();
                assert!((g.symbol[q] - exact).norm() < 1e-8);
            }
            let (m0, _, m2) = e.moments(1);
            let (g0, _, g2) = g.moments();
            assert!((m0 - g0).abs() < 1e-8);
            assert!((m2[(0, 0)] - g2[(0, 0)]).abs() < 1e-7);
        }
        let alg = KernelEntry::Algebraic {
            amplitude: 1.0,
            width: 1.0,
            exponent: 2.5,
        };
        let big = make_grid(1, 400.0, 16384).unwrap();
        let g = alg.sample(&big).unwrap();
        for q in [0usize, 30, 200] {
            let exact = alg.symbol(1, &big.frequency(q)).unwrap();
            assert!((g.symbol[q] - exact).norm() < 1e-8, "q = {q}");
        }
    }

    #[test]
    fn gridded_entries_reject_unresolved_frequencies() {
        let grid = make_grid(1, 10.0, 64).unwrap();
        let g = KernelEntry::Gaussian {
            amplitude: 1.0,
            widths: vec![1.0],
        }
        .sample(&grid)
        .unwrap();
        let spec = KernelSpec::scalar(1, KernelEntry::Grid(Arc::new(g)), SymmetryGroup::plus_minus(1)).unwrap();
        assert!(matches!(
            spec.eval_symbol(&[100.0]),
            Err(KernelError::UnderResolved { .. })
        ));
        let off_node = spec.eval_symbol(&[0.123]).unwrap()[(0, 0)];
        assert!((off_node.re - (-0.123f64.powi(2) / 2.0).exp()).abs() < 1e-12);
        assert!(off_node.im.abs() < 1e-12);
    }

    #[test]
    fn symmetry_checks() {
        let radial = exp1(-0.5);
        let rep = radial.check_symmetry(&SymmetryGroup::plus_minus(1)).unwrap();
        assert_eq!(rep.deviation, 0.0);
        assert_eq!(
            radial.check_symmetry(&SymmetryGroup::trivial(1)).unwrap_err(),
            KernelError::NontrivialFixedSpace(1)
        );
        let aniso = KernelSpec::scalar(
            2,
            KernelEntry::Gaussian {
                amplitude: 1.0,
                widths: vec![1.0, 2.0],
            },
            SymmetryGroup::axis_reflections(2),
        )
        .unwrap();
        let rep = aniso.check_symmetry(&SymmetryGroup::axis_reflections(2)).unwrap();
        assert!(rep.symmetric && rep.deviation == 0.0);
        let swap = crate::symmetry::SignedPermutation::new(2, vec![0, 1, 1, 0]).unwrap();
        let group = SymmetryGroup::new(2, vec![swap, crate::symmetry::SignedPermutation::negation(2)]).unwrap();
        assert!(!aniso.check_symmetry(&group).unwrap().symmetric);
    }

    #[test]
    fn traveling_transform_examples() {
        let k = exp1(-1.0);
        let t0 = k.traveling_transform(0.0).unwrap();
        assert_eq!(t0.eval_symbol(&[0.7]).unwrap(), k.eval_symbol(&[0.7]).unwrap());
        let t1 = k.traveling_transform(1.0).unwrap();
        let s = t1.eval_symbol(&[1.0]).unwrap()[(0, 0)];
        assert!((s - Complex64::new(-0.25, -0.25)).norm() < 1e-15);
        assert_eq!(t1.eval_symbol(&[0.0]).unwrap(), k.eval_symbol(&[0.0]).unwrap());
        // moments of the Green's function of 1 - c∂x composed with K
        let (m0, m1, m2) = t1.moments();
        assert_eq!(m0[(0, 0)], -1.0);
        assert!((m1[0][(0, 0)] - 1.0).abs() < 1e-15);
        assert!((m2[0][0][(0, 0)] - (-2.0 - 2.0)).abs() < 1e-15);
        let two_d = aniso_two_d();
        assert_eq!(two_d.traveling_transform(1.0).unwrap_err(), KernelError::NotOneDimensional(2));
    }

    fn aniso_two_d() -> KernelSpec {
        KernelSpec::scalar(
            2,
            KernelEntry::Gaussian {
                amplitude: -1.0,
                widths: vec![1.0, 2.0],
            },
            SymmetryGroup::axis_reflections(2),
        )
        .unwrap()
    }

    #[test]
    fn normalization_maps_moments_and_values() {
        let k = aniso_two_d();
        let t = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / 2f64.sqrt(), 2f64.sqrt()]));
        let kn = k.normalized(&t).unwrap();
        let (m0, _, m2) = kn.moments();
        assert!((m0[(0, 0)] + 1.0).abs() < 1e-15);
        assert!((m2[0][0][(0, 0)] + 2.0).abs() < 1e-14);
        assert!((m2[1][1][(0, 0)] + 2.0).abs() < 1e-14);
        assert!(m2[0][1][(0, 0)].abs() < 1e-15);
        let y = [0.4, -0.3];
        let x = [y[0] * t[(0, 0)], y[1] * t[(1, 1)]];
        let direct = k.value(&x).unwrap()[(0, 0)] * t.determinant().abs();
        assert!((kn.value(&y).unwrap()[(0, 0)] - direct).abs() < 1e-15);
    }
}
