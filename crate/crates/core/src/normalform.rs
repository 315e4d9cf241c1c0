//! Second-moment normalization, the `P T̂(0) Q` factorization and the
//! multiplier blocks `L̂(εξ)` sampled on a dual grid.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::NormalFormError;
use crate::grid::UniformGrid;
use crate::hypotheses::fd_hessian;
use crate::kernel::KernelSpec;

/// `T₀ = (S/2)^{1/2}`, so that `x = T₀ y` turns the effective Hessian into `2I`.
pub fn compute_t0(s_eff: &DMatrix<f64>) -> Result<DMatrix<f64>, NormalFormError> {
    let sym = (s_eff + s_eff.transpose()) * 0.5;
    if (&sym - s_eff).norm() > 1e-12 * (1.0 + s_eff.norm()) {
        return Err(NormalFormError::NotPositiveDefinite(vec![]));
    }
    let eig = sym.symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !(*v > 0.0)) {
        return Err(NormalFormError::NotPositiveDefinite(eig.eigenvalues.iter().copied().collect()));
    }
    let root = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|v| (v / 2.0).sqrt()));
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&root) * v.transpose())
}

/// `T̂(ξ) = s (I + K̂(ξ))`.
pub fn linear_symbol(kernel: &KernelSpec, sign: f64, xi: &[f64]) -> Result<DMatrix<Complex64>, NormalFormError> {
    let k = kernel.components();
    let mut m = kernel.eval_symbol(xi)?;
    for i in 0..k {
        m[(i, i)] += Complex64::new(1.0, 0.0);
    }
    Ok(m * Complex64::new(sign, 0.0))
}

/// Orthonormal basis of the complement of the unit vector `e` (Gram–Schmidt on
/// the coordinate axes, most independent first).
pub fn orthonormal_complement(e: &DVector<f64>) -> DMatrix<f64> {
    let k = e.len();
    let mut basis: Vec<DVector<f64>> = vec![e.normalize()];
    let mut axes: Vec<usize> = (0..k).collect();
    axes.sort_by(|&a, &b| e[a].abs().partial_cmp(&e[b].abs()).expect("finite"));
    for &a in &axes {
        if basis.len() == k {
            break;
        }
        let mut v = DVector::zeros(k);
        v[a] = 1.0;
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        if v.norm() > 1e-8 {
            basis.push(v.normalize());
        }
    }
    DMatrix::from_fn(k, k - 1, |i, j| basis[j + 1][i])
}

/// `P, Q` with `P T̂(0) Q = diag{0, I_{k-1}}`, `Q = [e | W]`, `P = [e*ᵀ; Z]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub condition: f64,
}

pub fn compute_pq(
    linear0: &DMatrix<f64>,
    e: &DVector<f64>,
    e_star: &DVector<f64>,
) -> Result<Factorization, NormalFormError> {
    let k = e.len();
    if k == 1 {
        return Ok(Factorization {
            p: DMatrix::from_element(1, 1, e_star[0]),
            q: DMatrix::from_element(1, 1, e[0]),
            condition: 1.0,
        });
    }
    let w = orthonormal_complement(e);
    let b = linear0 * &w;
    let svd = b.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond_b = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond_b > 1e8 {
        return Err(NormalFormError::IllConditioned(cond_b));
    }
    let btb = b.transpose() * &b;
    let z = btb
        .try_inverse()
        .ok_or(NormalFormError::IllConditioned(f64::INFINITY))?
        * b.transpose();
    let mut p = DMatrix::zeros(k, k);
    p.row_mut(0).copy_from(&e_star.transpose());
    p.view_mut((1, 0), (k - 1, k)).copy_from(&z);
    let mut q = DMatrix::zeros(k, k);
    q.column_mut(0).copy_from(e);
    q.view_mut((0, 1), (k, k - 1)).copy_from(&w);
    let cond = |m: &DMatrix<f64>| {
        let s = m.clone().svd(false, false).singular_values;
        s.max() / s.min()
    };
    let condition = cond(&p).max(cond(&q));
    if !condition.is_finite() || condition > 1e8 {
        return Err(NormalFormError::IllConditioned(condition));
    }
    Ok(Factorization { p, q, condition })
}

/// Rescaled multiplier samples on a dual grid.
#[derive(Debug, Clone)]
pub struct MultiplierSet {
    eps: f64,
    k: usize,
    grid: UniformGrid,
    /// Node-major row-major `k×k` samples of `L̂(εξ)`.
    l: Vec<Complex64>,
    /// `m(εξ) = |εξ|²/(1+|εξ|²)`.
    pub m_eps: Vec<f64>,
    /// `1 + |εξ|²`.
    pub precond: Vec<f64>,
    /// Per-node condition number of `P T̂ Q H`.
    pub condition: Vec<f64>,
    /// Spread of the directional limits of `L_hc` at `ξ = 0`.
    pub lhc_spread: f64,
}

fn h_matrix(k: usize, xi2: f64) -> DMatrix<Complex64> {
    let mut h = DMatrix::identity(k, k);
    h[(0, 0)] = Complex64::new((1.0 + xi2) / xi2, 0.0);
    h
}

fn complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `P T̂(ξ) Q H(ξ)` at `ξ ≠ 0`.
pub fn factor_product(
    kernel: &KernelSpec,
    sign: f64,
    f: &Factorization,
    xi: &[f64],
) -> Result<DMatrix<Complex64>, NormalFormError> {
    let k = kernel.components();
    let xi2: f64 = xi.iter().map(|v| v * v).sum();
    let t = linear_symbol(kernel, sign, xi)?;
    Ok(complex(&f.p) * t * complex(&f.q) * h_matrix(k, xi2))
}

fn matrix_condition(m: &DMatrix<Complex64>) -> f64 {
    let s = m.clone().svd(false, false).singular_values;
    s.max() / s.min()
}

/// `L̂(εξ)` at every dual node of `grid`, with the limit values at `ξ = 0`.
pub fn build_multipliers(
    kernel: &KernelSpec,
    sign: f64,
    f: &Factorization,
    eps: f64,
    grid: &UniformGrid,
) -> Result<MultiplierSet, NormalFormError> {
    let k = kernel.components();
    let n = kernel.dim();
    let nodes = grid.node_count();
    let mut l = vec![Complex64::new(0.0, 0.0); nodes * k * k];
    let mut m_eps = vec![0.0; nodes];
    let mut precond = vec![1.0; nodes];
    let mut condition = vec![1.0; nodes];
    for q in 0..nodes {
        let xi: Vec<f64> = grid.frequency(q)[..n].iter().map(|v| v * eps).collect();
        let xi2: f64 = xi.iter().map(|v| v * v).sum();
        m_eps[q] = xi2 / (1.0 + xi2);
        precond[q] = 1.0 + xi2;
        if xi2 == 0.0 {
            continue;
        }
        let a = factor_product(kernel, sign, f, &xi)?;
        let fail = || NormalFormError::Inversion {
            node: q,
            xi: xi.clone(),
        };
        let inv = a.clone().try_inverse().ok_or_else(fail)?;
        if inv.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(fail());
        }
        condition[q] = if k == 1 { 1.0 } else { matrix_condition(&a) };
        for i in 0..k {
            for j in 0..k {
                l[q * k * k + i * k + j] = inv[(i, j)];
            }
        }
    }
    // ξ = 0: [[1, 0], [-t, I]] with t = lim T_hc(ξ)(1+|ξ|²)/|ξ|², ray-averaged.
    let mut lhc_spread: f64 = 0.0;
    for i in 0..k {
        l[i * k + i] = Complex64::new(1.0, 0.0);
    }
    for r in 1..k {
        let entry = |xi: &[f64]| -> f64 {
            let t = linear_symbol(kernel, sign, xi).expect("symbol near zero");
            let m = complex(&f.p) * t * complex(&f.q);
            m[(r, 0)].re
        };
        let hess = fd_hessian(&entry, n, 1e-3);
        let t = hess.trace() / (2.0 * n as f64);
        let dirs: Vec<f64> = (0..n).map(|a| hess[(a, a)] / 2.0).collect();
        let spread = dirs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - dirs.iter().cloned().fold(f64::INFINITY, f64::min);
        lhc_spread = lhc_spread.max(spread);
        l[r * k] = Complex64::new(-t, 0.0);
    }
    Ok(MultiplierSet {
        eps,
        k,
        grid: grid.clone(),
        l,
        m_eps,
        precond,
        condition,
        lhc_spread,
    })
}

impl MultiplierSet {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn components(&self) -> usize {
        self.k
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }

    pub fn entry(&self, node: usize, i: usize, j: usize) -> Complex64 {
        self.l[node * self.k * self.k + i * self.k + j]
    }

    pub fn matrix(&self, node: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.k, self.k, |i, j| self.entry(node, i, j))
    }

    /// Row `row` of `L̂` applied to dual samples `hats[j]`.
    pub fn apply_row(&self, row: usize, hats: &[Vec<Complex64>]) -> Vec<Complex64> {
        let nodes = self.grid.node_count();
        (0..nodes)
            .map(|q| (0..self.k).map(|j| self.entry(q, row, j) * hats[j][q]).sum())
            .collect()
    }

    /// Max node deviations `(|L_cc - 1|, |L_ch|, |L_hh - I|, |L_hc|)`.
    pub fn block_deviations(&self) -> (f64, f64, f64, f64) {
        let k = self.k;
        let mut d = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
        for q in 0..self.grid.node_count() {
            d.0 = d.0.max((self.entry(q, 0, 0) - 1.0).norm());
            for j in 1..k {
                d.1 = d.1.max(self.entry(q, 0, j).norm());
                d.3 = d.3.max(self.entry(q, j, 0).norm());
                for i in 1..k {
                    let id = if i == j { 1.0 } else { 0.0 };
                    d.2 = d.2.max((self.entry(q, i, j) - id).norm());
                }
            }
        }
        d
    }

    /// Per-node CSV of condition numbers and block magnitudes.
    pub fn write_diagnostics<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "node,xi_norm,condition,l_cc_re,l_cc_im,l_ch_norm,l_hc_norm")?;
        for q in 0..self.grid.node_count() {
            let xi = self.grid.frequency_sq(q).sqrt() * self.eps;
            let ch: f64 = (1..self.k).map(|j| self.entry(q, 0, j).norm_sqr()).sum::<f64>().sqrt();
            let hc: f64 = (1..self.k).map(|j| self.entry(q, j, 0).norm_sqr()).sum::<f64>().sqrt();
            let cc = self.entry(q, 0, 0);
            writeln!(
                out,
                "{q},{xi:.12e},{:.6e},{:.15e},{:.15e},{ch:.6e},{hc:.6e}",
                self.condition[q], cc.re, cc.im
            )?;
        }
        Ok(())
    }
}

/// Max over `ξ ≠ 0` nodes of `‖L̂ · P T̂ Q H - I‖`.
pub fn factorization_defect(
    kernel: &KernelSpec,
    sign: f64,
    f: &Factorization,
    set: &MultiplierSet,
) -> Result<f64, NormalFormError> {
    let k = set.k;
    let n = kernel.dim();
    let id = DMatrix::<Complex64>::identity(k, k);
    let mut worst: f64 = 0.0;
    for q in 1..set.grid.node_count() {
        let xi: Vec<f64> = set.grid.frequency(q)[..n].iter().map(|v| v * set.eps).collect();
        if xi.iter().all(|v| *v == 0.0) {
            continue;
        }
        let a = factor_product(kernel, sign, f, &xi)?;
        let d = set.matrix(q) * a - &id;
        worst = worst.max(d.iter().fold(0.0_f64, |m, v| m.max(v.norm())));
    }
    Ok(worst)
}

/// `sup_ξ |εξ|²/(1+|ξ|²)` over the dual grid: the `H^ℓ → H^{ℓ-2}` norm of
/// `(M^ε)^{-1} - I`.
pub fn preconditioner_gap(eps: f64, grid: &UniformGrid, ell: u32) -> f64 {
    assert!(ell >= 2, "order must be at least 2");
    (0..grid.node_count())
        .map(|q| {
            let x = grid.frequency_sq(q);
            eps * eps * x / (1.0 + x)
        })
        .fold(0.0, f64::max)
}

/// `‖((M^ε)^{-1} - I) v‖_{H^{ℓ-2}} / ‖v‖_{H^ℓ}` for one scalar field.
pub fn preconditioner_ratio(eps: f64, grid: &UniformGrid, values: &[f64], ell: u32) -> f64 {
    let hat = grid.forward_real(values);
    let out: Vec<Complex64> = hat
        .iter()
        .enumerate()
        .map(|(q, v)| v * (eps * eps * grid.frequency_sq(q)))
        .collect();
    grid.sobolev_norm_dual(&out, ell - 2) / grid.sobolev_norm_dual(&hat, ell)
}
