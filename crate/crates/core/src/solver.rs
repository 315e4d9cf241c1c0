//! Rescaled spike system on the `z`-grid: the reduced `h`-equation solved by
//! frozen Newton, the preconditioned corrector iteration for `w`, and assembly
//! of the physical profile.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::SolverError;
use crate::grid::{Field, UniformGrid};
use crate::groundstate::GroundState;
use crate::hypotheses::{linear_part_at_zero, BifurcationData, Scaling};
use crate::kernel::KernelSpec;
use crate::krylov::{gmres, GmresOptions};
use crate::nonlinearity::{eval_vec, mu_jacobian, second_derivative, third_derivative, Nonlinearity};
use crate::normalform::{build_multipliers, compute_pq, Factorization, MultiplierSet};
use crate::symmetry::SymmetryGroup;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Sobolev order of the working norms.
    pub ell: u32,
    pub tol_inner: f64,
    pub tol_outer: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub neumann_tol: f64,
    pub full_newton: bool,
    pub symmetry_drift: f64,
    pub gmres: GmresOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            ell: 2,
            tol_inner: 1e-11,
            tol_outer: 1e-10,
            inner_radius: 1.0,
            outer_radius: 1.0,
            max_inner: 60,
            max_outer: 30,
            neumann_tol: 1e-14,
            full_newton: false,
            symmetry_drift: 1e-6,
            gmres: GmresOptions {
                tol: 1e-12,
                restart: 80,
                max_iter: 800,
            },
        }
    }
}

/// Second- and third-order Taylor data of `H(V; μ) = P s N(QV; μ)` at the origin.
/// Index `j` runs over rows of `H`, the `h`-directions over columns `1..k` of `Q`.
#[derive(Debug, Clone, Serialize)]
pub struct Taylor {
    pub a101: Vec<f64>,
    pub a011: Vec<Vec<f64>>,
    pub a200: Vec<f64>,
    pub a110: Vec<Vec<f64>>,
    pub a020: Vec<Vec<Vec<f64>>>,
    pub a300: Vec<f64>,
}

fn taylor_coefficients(n: &dyn Nonlinearity, sign: f64, p: &DMatrix<f64>, q: &DMatrix<f64>) -> Taylor {
    let k = q.nrows();
    let zero = vec![0.0; k];
    let col = |c: usize| -> Vec<f64> { q.column(c).iter().copied().collect() };
    let project = |v: Vec<f64>| -> Vec<f64> { (p * DVector::from_vec(v) * sign).iter().copied().collect() };
    let dmu = p * mu_jacobian(n, &zero, 0.0) * q * sign;
    let e = col(0);
    let a101 = dmu.column(0).iter().copied().collect();
    let a011 = (0..k).map(|j| (1..k).map(|c| dmu[(j, c)]).collect()).collect();
    let a200 = project(second_derivative(n, &zero, 0.0, &e, &e)).iter().map(|v| v / 2.0).collect();
    let mixed: Vec<Vec<f64>> = (1..k).map(|c| project(second_derivative(n, &zero, 0.0, &e, &col(c)))).collect();
    let a110 = (0..k).map(|j| mixed.iter().map(|m| m[j]).collect()).collect();
    let mut a020 = vec![vec![vec![0.0; k - 1]; k - 1]; k];
    for a in 1..k {
        for b in 1..k {
            let d = project(second_derivative(n, &zero, 0.0, &col(a), &col(b)));
            for (j, dj) in d.iter().enumerate() {
                a020[j][a - 1][b - 1] = dj / 2.0;
            }
        }
    }
    let a300 = project(third_derivative(n, &zero, 0.0, &e)).iter().map(|v| v / 6.0).collect();
    Taylor {
        a101,
        a011,
        a200,
        a110,
        a020,
        a300,
    }
}

/// Per-node derivatives of `Φ`: `du[node*k + j]`, `dv[(node*k + j)*(k-1) + i]`.
#[derive(Debug, Clone)]
struct PhiDerivatives {
    du: Vec<f64>,
    dv: Vec<f64>,
}

/// The rescaled system at one parameter value.
#[derive(Debug, Clone)]
pub struct RescaledSystem {
    pub mu: f64,
    pub eps: f64,
    pub scaling: Scaling,
    /// Amplitude factor `c` in `V_c = c ε^q ṽ_c`.
    pub amplitude: f64,
    pub sign: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub grid_z: UniformGrid,
    pub grid_y: UniformGrid,
    pub multipliers: MultiplierSet,
    pub factorization: Factorization,
    pub taylor: Taylor,
    pub t0: DMatrix<f64>,
    pub group: SymmetryGroup,
    pub opts: SolverOptions,
    kernel: KernelSpec,
    nonlinearity: Arc<dyn Nonlinearity>,
    e: Vec<f64>,
    lap: Vec<f64>,
    precond: Vec<f64>,
}

/// Elements of `group` that commute with `t0`, so they act on the normalized
/// coordinates as they do on the original ones.
fn compatible_subgroup(group: &SymmetryGroup, t0: &DMatrix<f64>) -> Result<SymmetryGroup, SolverError> {
    let keep: Vec<_> = group
        .elements()
        .iter()
        .filter(|g| {
            let m = g.to_matrix();
            (&m * t0 - t0 * &m).amax() < 1e-12 * (1.0 + t0.amax())
        })
        .cloned()
        .collect();
    Ok(SymmetryGroup::new(t0.nrows(), keep)?)
}

pub fn build_rescaled(
    kernel: &KernelSpec,
    bif: &BifurcationData,
    nonlinearity: Arc<dyn Nonlinearity>,
    mu: f64,
    grid_z: &UniformGrid,
    opts: SolverOptions,
) -> Result<RescaledSystem, SolverError> {
    if !(bif.alpha * mu > 0.0) {
        return Err(SolverError::Precondition { alpha: bif.alpha, mu });
    }
    if grid_z.dim() != kernel.dim() {
        return Err(SolverError::GridMismatch(format!(
            "grid dimension {} but kernel dimension {}",
            grid_z.dim(),
            kernel.dim()
        )));
    }
    let eps = (bif.alpha * mu).sqrt();
    let sign = bif.sign();
    let t0 = bif.t0_matrix();
    let normalized = kernel.normalized(&t0)?;
    let linear0 = linear_part_at_zero(&normalized)? * sign;
    let factorization = compute_pq(&linear0, &bif.e_vec(), &bif.e_star_vec())?;
    let multipliers = build_multipliers(&normalized, sign, &factorization, eps, grid_z)?;
    let taylor = taylor_coefficients(nonlinearity.as_ref(), sign, &factorization.p, &factorization.q);
    let amplitude = match bif.scaling {
        Scaling::Quadratic => -1.0 / bif.beta,
        Scaling::Cubic => {
            if bif.beta.abs() > 1e-6 {
                return Err(SolverError::CubicQuadratic(bif.beta));
            }
            1.0 / (-bif.gamma).sqrt()
        }
    };
    let group = compatible_subgroup(kernel.symmetry(), &t0)?;
    let lap: Vec<f64> = grid_z.frequency_sq_all().iter().map(|x| -x).collect();
    let precond = grid_z.frequency_sq_all().iter().map(|x| 1.0 / (1.0 + x)).collect();
    Ok(RescaledSystem {
        mu,
        eps,
        scaling: bif.scaling,
        amplitude,
        sign,
        alpha: bif.alpha,
        beta: bif.beta,
        gamma: bif.gamma,
        grid_z: grid_z.clone(),
        grid_y: grid_z.scaled(1.0 / eps)?,
        multipliers,
        factorization,
        taylor,
        t0,
        group,
        opts,
        kernel: kernel.clone(),
        nonlinearity,
        e: bif.e.clone(),
        lap,
        precond,
    })
}

/// Result of the reduced `h`-equation at one `ṽ_c`.
#[derive(Debug, Clone)]
pub struct PsiSolve {
    pub v: Vec<Vec<f64>>,
    pub iterations: usize,
    pub residual: f64,
}

impl RescaledSystem {
    pub fn components(&self) -> usize {
        self.factorization.q.nrows()
    }

    fn q_power(&self) -> i32 {
        self.scaling.amplitude_exponent()
    }

    /// `c ε^{q+2}`, the size of `P N(QV)` in rescaled units.
    pub fn phi_scale(&self) -> f64 {
        self.amplitude * self.eps.powi(self.q_power() + 2)
    }

    /// `U = Q (c ε^q u, ε^q v)` at one node.
    fn physical_state(&self, u: f64, v: &[Vec<f64>], node: usize) -> Vec<f64> {
        let k = self.components();
        let s = self.eps.powi(self.q_power());
        let mut vv = DVector::zeros(k);
        vv[0] = self.amplitude * s * u;
        for i in 1..k {
            vv[i] = s * v[i - 1][node];
        }
        (&self.factorization.q * vv).iter().copied().collect()
    }

    /// `Φ = P s N(QV; μ) / (c ε^{q+2})` at every node of `grid_z`.
    pub fn phi(&self, u: &[f64], v: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = self.components();
        let scale = self.sign / self.phi_scale();
        let mut out = vec![vec![0.0; u.len()]; k];
        let mut buf = vec![0.0; k];
        for node in 0..u.len() {
            let state = self.physical_state(u[node], v, node);
            self.nonlinearity.eval(&state, self.mu, &mut buf);
            let projected = &self.factorization.p * DVector::from_column_slice(&buf);
            for j in 0..k {
                out[j][node] = projected[j] * scale;
            }
        }
        out
    }

    fn phi_derivatives(&self, u: &[f64], v: &[Vec<f64>]) -> PhiDerivatives {
        let k = self.components();
        let s = self.eps.powi(self.q_power());
        let scale = self.sign / self.phi_scale();
        let mut du = vec![0.0; u.len() * k];
        let mut dv = vec![0.0; u.len() * k * k.saturating_sub(1)];
        for node in 0..u.len() {
            let state = self.physical_state(u[node], v, node);
            let m = &self.factorization.p * self.nonlinearity.jacobian(&state, self.mu) * &self.factorization.q * scale;
            for j in 0..k {
                du[node * k + j] = m[(j, 0)] * self.amplitude * s;
                for i in 1..k {
                    dv[(node * k + j) * (k - 1) + i - 1] = m[(j, i)] * s;
                }
            }
        }
        PhiDerivatives { du, dv }
    }

    /// Estimated floor of `‖F‖` set by roundoff in the evaluation of `N`.
    pub fn noise_floor(&self, u: &[f64], v: &[Vec<f64>]) -> f64 {
        let scale = (0..u.len())
            .map(|node| {
                let state = self.physical_state(u[node], v, node);
                self.nonlinearity.roundoff_scale(&state, self.mu)
            })
            .fold(0.0, f64::max);
        let xi = self.grid_z.max_frequency();
        10.0 * f64::EPSILON * scale / self.phi_scale().abs() * (1.0 + (self.eps * xi).powi(2)) * self.grid_z.volume().sqrt()
    }

    /// Rows `rows` of `L̂(εξ)` applied to `phi`; the critical row, if present,
    /// also gets the `(M^ε)^{-1}` factor when `precondition` is set.
    fn apply_rows(&self, rows: std::ops::Range<usize>, phi: &[Vec<f64>], precondition: bool) -> Vec<Vec<f64>> {
        let hats: Vec<Vec<Complex64>> = phi.iter().map(|c| self.grid_z.forward_real(c)).collect();
        rows.map(|r| {
            let mut row = self.multipliers.apply_row(r, &hats);
            if r == 0 && precondition {
                row.iter_mut().zip(&self.multipliers.precond).for_each(|(a, m)| *a *= m);
            }
            self.grid_z.inverse_real(&row)
        })
        .collect()
    }

    /// `(Σ_c ‖f_c‖²_{H^s})^{1/2}`.
    pub fn norm(&self, comps: &[Vec<f64>], order: u32) -> f64 {
        comps
            .iter()
            .map(|c| self.grid_z.sobolev_norm_scalar(c, order).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `G(v; u) = v + c ε² L_h Φ(u, v)`.
    pub fn g_residual(&self, u: &[f64], v: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = self.components();
        let phi = self.phi(u, v);
        let lh = self.apply_rows(1..k, &phi, false);
        let f = self.amplitude * self.eps * self.eps;
        lh.iter()
            .zip(v)
            .map(|(l, vi)| l.iter().zip(vi).map(|(a, b)| b + f * a).collect())
            .collect()
    }

    /// `B η = c ε² L_h (D_vΦ η)`.
    fn apply_b(&self, d: &PhiDerivatives, eta: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = self.components();
        let nodes = self.grid_z.node_count();
        let mut full = vec![vec![0.0; nodes]; k];
        for node in 0..nodes {
            for j in 0..k {
                full[j][node] = (0..k - 1).map(|i| d.dv[(node * k + j) * (k - 1) + i] * eta[i][node]).sum();
            }
        }
        let f = self.amplitude * self.eps * self.eps;
        self.apply_rows(1..k, &full, false)
            .into_iter()
            .map(|c| c.into_iter().map(|x| x * f).collect())
            .collect()
    }

    /// `(I + B)^{-1} rhs` by Neumann series.
    fn neumann(&self, d: &PhiDerivatives, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, SolverError> {
        let mut x = rhs.to_vec();
        let mut term = rhs.to_vec();
        let size = |t: &[Vec<f64>]| t.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
        let start = size(rhs);
        for _ in 0..400 {
            let mut next = self.apply_b(d, &term);
            next.iter_mut().flatten().for_each(|v| *v = -*v);
            let s = size(&next);
            for (xc, nc) in x.iter_mut().zip(&next) {
                xc.iter_mut().zip(nc).for_each(|(a, b)| *a += b);
            }
            if s < self.opts.neumann_tol {
                return Ok(x);
            }
            if s > 1e3 * start.max(self.opts.neumann_tol) || !s.is_finite() {
                return Err(SolverError::NoContraction {
                    stage: "neumann",
                    norm: s,
                    radius: start,
                });
            }
            term = next;
        }
        Err(SolverError::MaxIterations {
            stage: "neumann",
            iterations: 400,
            residual: size(&term),
        })
    }

    /// `ψ(u)`: frozen Newton on `G(·; u) = 0` with `D_vG(0; u)` inverted by Neumann series.
    pub fn solve_vh(&self, u: &[f64], warm: Option<&[Vec<f64>]>) -> Result<PsiSolve, SolverError> {
        let k = self.components();
        let nodes = self.grid_z.node_count();
        if k == 1 {
            return Ok(PsiSolve {
                v: Vec::new(),
                iterations: 0,
                residual: 0.0,
            });
        }
        let zero = vec![vec![0.0; nodes]; k - 1];
        let frozen = self.phi_derivatives(u, &zero);
        let mut v = warm.map(|w| w.to_vec()).unwrap_or_else(|| zero.clone());
        let ell = self.opts.ell;
        let xi = self.grid_z.max_frequency();
        let floor = self.amplitude.abs() * self.eps * self.eps * self.noise_floor(u, &v) * (1.0 + xi * xi).powf(ell as f64 / 2.0);
        let tol = self.opts.tol_inner.max(floor);
        let mut residual = f64::INFINITY;
        for it in 0..=self.opts.max_inner {
            let g = self.g_residual(u, &v);
            residual = self.norm(&g, ell);
            if residual < tol {
                return Ok(PsiSolve {
                    v,
                    iterations: it,
                    residual,
                });
            }
            if it == self.opts.max_inner {
                break;
            }
            let delta = self.neumann(&frozen, &g)?;
            for (vc, dc) in v.iter_mut().zip(&delta) {
                vc.iter_mut().zip(dc).for_each(|(a, b)| *a -= b);
            }
            let size = self.norm(&v, ell);
            if !(size <= self.opts.inner_radius) {
                return Err(SolverError::NoContraction {
                    stage: "psi",
                    norm: size,
                    radius: self.opts.inner_radius,
                });
            }
        }
        Err(SolverError::MaxIterations {
            stage: "psi",
            iterations: self.opts.max_inner,
            residual,
        })
    }

    /// `F(w) = -Δṽ_c + (M^ε)^{-1}(L_cc Φ_c + L_ch Φ_h)` at `ṽ_c = v* + w`, `ṽ_h = ψ(ṽ_c)`.
    pub fn residual_f(&self, vstar: &[f64], w: &[f64], warm: Option<&[Vec<f64>]>) -> Result<(Vec<f64>, PsiSolve), SolverError> {
        let vc: Vec<f64> = vstar.iter().zip(w).map(|(a, b)| a + b).collect();
        let psi = self.solve_vh(&vc, warm)?;
        let phi = self.phi(&vc, &psi.v);
        let lc = self.apply_rows(0..1, &phi, true).pop().expect("critical row");
        let lap = self.grid_z.apply_real_symbol(&vc, &self.lap);
        Ok((lap.iter().zip(&lc).map(|(l, c)| -l + c).collect(), psi))
    }

    /// `Φ - B̃` at one node: the part of `Φ` beyond the quadratic (or cubic) model.
    pub fn remainder(&self, u: f64, v: &[f64]) -> Vec<f64> {
        let k = self.components();
        let cols: Vec<Vec<f64>> = v.iter().map(|x| vec![*x]).collect();
        let phi: Vec<f64> = self.phi(&[u], &cols).iter().map(|c| c[0]).collect();
        let t = &self.taylor;
        let c = self.amplitude;
        let s = self.eps.powi(self.q_power());
        let ps = self.phi_scale();
        (0..k)
            .map(|j| {
                // B̃ collects the terms of the Taylor model that survive as ε → 0
                let mut b = t.a101[j] * self.mu * c * s * u / ps;
                for i in 0..k - 1 {
                    b += t.a011[j][i] * self.mu * s * v[i] / ps;
                }
                match self.scaling {
                    Scaling::Quadratic => {
                        b += t.a200[j] * c * c * s * s * u * u / ps;
                        for i in 0..k - 1 {
                            b += t.a110[j][i] * c * s * s * u * v[i] / ps;
                            for l in 0..k - 1 {
                                b += t.a020[j][i][l] * s * s * v[i] * v[l] / ps;
                            }
                        }
                    }
                    Scaling::Cubic => b += t.a300[j] * (c * s * u).powi(3) / ps,
                }
                phi[j] - b
            })
            .collect()
    }
}

/// `D_wF` frozen at one state, with the `ψ` coupling linearized exactly.
struct FrozenJacobian<'a> {
    sys: &'a RescaledSystem,
    d: PhiDerivatives,
}

impl FrozenJacobian<'_> {
    fn apply(&self, delta: &[f64]) -> Vec<f64> {
        let sys = self.sys;
        let k = sys.components();
        let nodes = delta.len();
        let mut total: Vec<Vec<f64>> = (0..k).map(|j| (0..nodes).map(|q| self.d.du[q * k + j] * delta[q]).collect()).collect();
        if k > 1 {
            let f = sys.amplitude * sys.eps * sys.eps;
            let rhs: Vec<Vec<f64>> = sys
                .apply_rows(1..k, &total, false)
                .into_iter()
                .map(|c| c.into_iter().map(|x| -x * f).collect())
                .collect();
            let eta = sys.neumann(&self.d, &rhs).unwrap_or_else(|_| vec![vec![f64::NAN; nodes]; k - 1]);
            for (j, tj) in total.iter_mut().enumerate() {
                for (q, t) in tj.iter_mut().enumerate() {
                    *t += (0..k - 1).map(|i| self.d.dv[(q * k + j) * (k - 1) + i] * eta[i][q]).sum::<f64>();
                }
            }
        }
        let lc = sys.apply_rows(0..1, &total, true).pop().expect("critical row");
        let lap = sys.grid_z.apply_real_symbol(delta, &sys.lap);
        lap.iter().zip(&lc).map(|(l, c)| -l + c).collect()
    }
}

/// Converged corrector iteration on `grid_z`.
#[derive(Debug, Clone)]
pub struct CorrectorOutcome {
    pub vstar: Vec<f64>,
    pub w: Vec<f64>,
    pub psi: Vec<Vec<f64>>,
    /// `‖F(w_j)‖_{H^{ℓ-2}}` per outer iterate.
    pub history: Vec<f64>,
    pub iterations_outer: usize,
    pub iterations_inner: usize,
    pub gmres_iterations: usize,
    pub tolerance: f64,
    pub transfer_residual: f64,
}

impl RescaledSystem {
    fn jacobian_at(&self, vc: &[f64], psi: &[Vec<f64>]) -> FrozenJacobian<'_> {
        let v = if psi.is_empty() { Vec::new() } else { psi.to_vec() };
        FrozenJacobian {
            sys: self,
            d: self.phi_derivatives(vc, &v),
        }
    }

    /// `D_wF(0)` applied to `delta`, with `ψ` frozen at `ψ(v*)`.
    pub fn frozen_jacobian_apply(&self, vstar: &[f64], delta: &[f64]) -> Result<Vec<f64>, SolverError> {
        let psi = self.solve_vh(vstar, None)?;
        Ok(self.jacobian_at(vstar, &psi.v).apply(delta))
    }

    /// Ground state `v*` sampled on `grid_z` and its tensor-grid residual.
    pub fn transfer_groundstate(&self, gs: &GroundState) -> Result<(Vec<f64>, f64), SolverError> {
        if gs.dim() != self.grid_z.dim() || gs.power() != self.scaling.power() {
            return Err(SolverError::GridMismatch(format!(
                "ground state (n = {}, p = {}) does not match system (n = {}, p = {})",
                gs.dim(),
                gs.power(),
                self.grid_z.dim(),
                self.scaling.power()
            )));
        }
        let v = gs.sample(&self.grid_z);
        let lap = self.grid_z.laplacian(&v);
        let p = gs.power() as i32;
        let res = lap.iter().zip(&v).map(|(l, u)| (l - u + u.powi(p)).abs()).fold(0.0, f64::max);
        Ok((v, res))
    }

    /// Frozen-Jacobian Newton for `F(w) = 0`, Krylov-solved with the `(-Δ+1)^{-1}`
    /// preconditioner and `Γ`-projection after every update.
    pub fn solve_corrector(&self, gs: &GroundState) -> Result<CorrectorOutcome, SolverError> {
        self.solve_corrector_from(gs, None)
    }

    /// As `solve_corrector`, starting from `w0` instead of `0`.
    pub fn solve_corrector_from(&self, gs: &GroundState, w0: Option<&[f64]>) -> Result<CorrectorOutcome, SolverError> {
        let (vstar, transfer_residual) = self.transfer_groundstate(gs)?;
        let nodes = vstar.len();
        let ell = self.opts.ell;
        let mut w = match w0 {
            Some(w0) if w0.len() == nodes => w0.to_vec(),
            Some(w0) => {
                return Err(SolverError::GridMismatch(format!(
                    "warm start has {} values, grid has {nodes}",
                    w0.len()
                )))
            }
            None => vec![0.0; nodes],
        };
        let mut psi: Option<Vec<Vec<f64>>> = None;
        let mut history = Vec::new();
        let mut inner = 0;
        let mut gmres_total = 0;
        let mut jac: Option<FrozenJacobian<'_>> = None;
        let mut tolerance = self.opts.tol_outer;
        for it in 0..=self.opts.max_outer {
            let (f, ps) = self.residual_f(&vstar, &w, psi.as_deref())?;
            inner += ps.iterations;
            let vc: Vec<f64> = vstar.iter().zip(&w).map(|(a, b)| a + b).collect();
            if it == 0 {
                tolerance = tolerance.max(self.noise_floor(&vc, &ps.v));
            }
            let res = self.grid_z.sobolev_norm_scalar(&f, ell - 2);
            history.push(res);
            if res < tolerance {
                return Ok(CorrectorOutcome {
                    vstar,
                    w,
                    psi: ps.v,
                    history,
                    iterations_outer: it,
                    iterations_inner: inner,
                    gmres_iterations: gmres_total,
                    tolerance,
                    transfer_residual,
                });
            }
            if it == self.opts.max_outer {
                return Err(SolverError::MaxIterations {
                    stage: "corrector",
                    iterations: it,
                    residual: res,
                });
            }
            if jac.is_none() || self.opts.full_newton {
                jac = Some(self.jacobian_at(&vc, &ps.v));
            }
            let j = jac.as_ref().expect("jacobian set");
            let rhs = self.group.project_values(&self.grid_z, &f);
            let out = gmres(
                |x| self.group.project_values(&self.grid_z, &j.apply(x)),
                |x| self.grid_z.apply_real_symbol(x, &self.precond),
                &rhs,
                None,
                self.opts.gmres,
            );
            gmres_total += out.iterations;
            if !out.converged {
                return Err(SolverError::KrylovStagnation(out.relative_residual));
            }
            let next: Vec<f64> = w.iter().zip(&out.x).map(|(a, b)| a - b).collect();
            let projected = self.group.project_values(&self.grid_z, &next);
            let drift = projected.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if drift > self.opts.symmetry_drift {
                return Err(SolverError::SymmetryDrift(drift));
            }
            w = projected;
            let size = self.grid_z.sobolev_norm_scalar(&w, ell);
            if !(size <= self.opts.outer_radius) {
                return Err(SolverError::NoContraction {
                    stage: "corrector",
                    norm: size,
                    radius: self.opts.outer_radius,
                });
            }
            psi = Some(ps.v);
        }
        unreachable!("loop returns on the final iteration")
    }
}

/// Per-solve diagnostics record.
#[derive(Debug, Clone, Serialize)]
pub struct SolveDiagnostics {
    pub mu: f64,
    pub eps: f64,
    pub iterations_inner: usize,
    pub iterations_outer: usize,
    pub norm_w: f64,
    pub norm_vh: f64,
    pub norm_uperp: f64,
    pub residual_original: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct SpikeSolution {
    pub mu: f64,
    pub eps: f64,
    pub v_c: Vec<f64>,
    pub w: Vec<f64>,
    pub v_h: Vec<Vec<f64>>,
    /// `U` sampled on `grid_y`; physical coordinates are `x = T₀ y`.
    pub u_phys: Field,
    pub grid_z: UniformGrid,
    pub t0: DMatrix<f64>,
    pub norm_w: f64,
    pub norm_vh: f64,
    pub norm_uperp: f64,
    pub residual_original: f64,
    pub symmetry_defect: f64,
    pub peak: f64,
    pub history: Vec<f64>,
    pub iterations_inner: usize,
    pub iterations_outer: usize,
    pub gmres_iterations: usize,
    pub tolerance: f64,
    pub transfer_residual: f64,
    pub wall_time: f64,
}

impl SpikeSolution {
    pub fn diagnostics(&self) -> SolveDiagnostics {
        SolveDiagnostics {
            mu: self.mu,
            eps: self.eps,
            iterations_inner: self.iterations_inner,
            iterations_outer: self.iterations_outer,
            norm_w: self.norm_w,
            norm_vh: self.norm_vh,
            norm_uperp: self.norm_uperp,
            residual_original: self.residual_original,
            wall_time: self.wall_time,
        }
    }

    /// Physical coordinates of the nodes of `u_phys`.
    pub fn physical_node(&self, flat: usize) -> Vec<f64> {
        let grid = self.u_phys.grid();
        let n = grid.dim();
        let y = DVector::from_column_slice(&grid.node(flat)[..n]);
        (&self.t0 * y).iter().copied().collect()
    }
}

impl RescaledSystem {
    /// `‖U + K∗U + N(U; μ)‖_∞` on `grid_y`, using the unnormalized kernel at the
    /// mapped frequencies `T₀^{-T} ξ_y` and the unsigned nonlinearity.
    pub fn residual_original(&self, u: &Field) -> Result<f64, SolverError> {
        let grid = u.grid();
        let k = u.components();
        let n = grid.dim();
        let map = self
            .t0
            .clone()
            .try_inverse()
            .ok_or_else(|| SolverError::GridMismatch("T₀ is singular".into()))?
            .transpose();
        let hats: Vec<Vec<Complex64>> = (0..k).map(|c| grid.forward_real(u.component(c))).collect();
        let mut conv = vec![vec![Complex64::new(0.0, 0.0); grid.node_count()]; k];
        for q in 0..grid.node_count() {
            let xi = map.clone() * DVector::from_column_slice(&grid.frequency(q)[..n]);
            let sym = self.kernel.eval_symbol(xi.as_slice())?;
            for i in 0..k {
                conv[i][q] = (0..k).map(|j| sym[(i, j)] * hats[j][q]).sum();
            }
        }
        let conv: Vec<Vec<f64>> = conv.iter().map(|c| grid.inverse_real(c)).collect();
        let mut worst: f64 = 0.0;
        let mut state = vec![0.0; k];
        for q in 0..grid.node_count() {
            for c in 0..k {
                state[c] = u.component(c)[q];
            }
            let nl = eval_vec(self.nonlinearity.as_ref(), &state, self.mu);
            for c in 0..k {
                worst = worst.max((state[c] + conv[c][q] + nl[c]).abs());
            }
        }
        Ok(worst)
    }

    /// `U = Q (c ε^q ṽ_c, ε^q ṽ_h)` on `grid_y` with norms and the end-to-end residual.
    pub fn assemble(&self, out: CorrectorOutcome, started: Instant) -> Result<SpikeSolution, SolverError> {
        let k = self.components();
        let nodes = self.grid_z.node_count();
        let vc: Vec<f64> = out.vstar.iter().zip(&out.w).map(|(a, b)| a + b).collect();
        let mut comps = vec![vec![0.0; nodes]; k];
        for q in 0..nodes {
            let s = self.physical_state(vc[q], &out.psi, q);
            for c in 0..k {
                comps[c][q] = s[c];
            }
        }
        let u_phys = Field::from_components(&self.grid_y, &comps)?;
        let e = DVector::from_column_slice(&self.e);
        let ee = e.dot(&e);
        let mut perp = comps.clone();
        for q in 0..nodes {
            let uq = DVector::from_iterator(k, (0..k).map(|c| comps[c][q]));
            let r = &uq - &e * (uq.dot(&e) / ee);
            for c in 0..k {
                perp[c][q] = r[c];
            }
        }
        let ell = self.opts.ell;
        let norm_uperp = if k == 1 { 0.0 } else { self.norm(&perp, ell) };
        let residual_original = self.residual_original(&u_phys)?;
        let symmetry_defect = self.group.deviation(&u_phys);
        let peak = u_phys.max_abs();
        Ok(SpikeSolution {
            mu: self.mu,
            eps: self.eps,
            norm_w: self.grid_z.sobolev_norm_scalar(&out.w, ell),
            norm_vh: if k == 1 { 0.0 } else { self.norm(&out.psi, ell) },
            norm_uperp,
            residual_original,
            symmetry_defect,
            peak,
            v_c: vc,
            w: out.w,
            v_h: out.psi,
            u_phys,
            grid_z: self.grid_z.clone(),
            t0: self.t0.clone(),
            history: out.history,
            iterations_inner: out.iterations_inner,
            iterations_outer: out.iterations_outer,
            gmres_iterations: out.gmres_iterations,
            tolerance: out.tolerance,
            transfer_residual: out.transfer_residual,
            wall_time: started.elapsed().as_secs_f64(),
        })
    }

    /// Corrector iteration followed by assembly.
    pub fn solve(&self, gs: &GroundState) -> Result<SpikeSolution, SolverError> {
        self.solve_from(gs, None)
    }

    pub fn solve_from(&self, gs: &GroundState, w0: Option<&[f64]>) -> Result<SpikeSolution, SolverError> {
        let started = Instant::now();
        let out = self.solve_corrector_from(gs, w0)?;
        self.assemble(out, started)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groundstate::{solve_groundstate, DEFAULT_NODES, DEFAULT_R_MAX};
    use crate::hypotheses::{check_hypotheses, CheckOptions};
    use crate::kernel::KernelEntry;
    use crate::nonlinearity::{Monomial, Polynomial};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exp(a: f64) -> KernelEntry {
        KernelEntry::Exponential { amplitude: a, width: 1.0 }
    }

    fn scalar_system(mu: f64, points: usize) -> RescaledSystem {
        let kernel = KernelSpec::scalar(1, exp(-1.0), SymmetryGroup::plus_minus(1)).unwrap();
        let n: Arc<dyn Nonlinearity> = Arc::new(Polynomial::scalar(&[(1.0, 1, 1), (-1.0, 0, 2)]));
        let (_, bif) = check_hypotheses(&kernel, n.as_ref(), &CheckOptions::default());
        let grid = UniformGrid::new(1, 30.0, points).unwrap();
        build_rescaled(&kernel, &bif.unwrap(), n, mu, &grid, SolverOptions::default()).unwrap()
    }

    fn k2_system(mu: f64, points: usize) -> RescaledSystem {
        let kernel = KernelSpec::diagonal(1, vec![exp(-1.0), exp(-0.5)], SymmetryGroup::plus_minus(1)).unwrap();
        let m = |row, coeff, mu_power, powers: Vec<u32>| Monomial { row, coeff, mu_power, powers };
        let n: Arc<dyn Nonlinearity> = Arc::new(
            Polynomial::new(
                2,
                vec![m(0, 1.0, 1, vec![1, 0]), m(0, -1.0, 0, vec![2, 0]), m(0, 1.0, 0, vec![1, 1]), m(1, 1.0, 0, vec![2, 0])],
            )
            .unwrap(),
        );
        let (_, bif) = check_hypotheses(&kernel, n.as_ref(), &CheckOptions::default());
        let grid = UniformGrid::new(1, 30.0, points).unwrap();
        build_rescaled(&kernel, &bif.unwrap(), n, mu, &grid, SolverOptions::default()).unwrap()
    }

    fn gs1() -> GroundState {
        solve_groundstate(1, 2, DEFAULT_R_MAX, DEFAULT_NODES).unwrap()
    }

    #[test]
    fn scalar_rescaling_is_exact() {
        let sys = scalar_system(0.01, 256);
        assert!((sys.eps - 0.1).abs() < 1e-12);
        assert!((sys.amplitude - 1.0).abs() < 1e-9);
        for u in [0.3, -1.2, 2.0] {
            let phi = sys.phi(&[u], &[])[0][0];
            assert!((phi - (u - u * u)).abs() < 1e-10);
            assert!(sys.remainder(u, &[])[0].abs() < 1e-8);
        }
        assert!((sys.taylor.a101[0] / sys.alpha - 1.0).abs() < 1e-8);
        assert!((sys.taylor.a200[0] / -sys.beta + 1.0).abs() < 1e-8);
    }

    #[test]
    fn precondition_requires_positive_product() {
        let kernel = KernelSpec::scalar(1, exp(-1.0), SymmetryGroup::plus_minus(1)).unwrap();
        let n: Arc<dyn Nonlinearity> = Arc::new(Polynomial::scalar(&[(1.0, 1, 1), (-1.0, 0, 2)]));
        let (_, bif) = check_hypotheses(&kernel, n.as_ref(), &CheckOptions::default());
        let grid = UniformGrid::new(1, 30.0, 64).unwrap();
        let err = build_rescaled(&kernel, &bif.unwrap(), n, -0.01, &grid, SolverOptions::default());
        assert!(matches!(err, Err(SolverError::Precondition { .. })));
    }

    #[test]
    fn scalar_spike_amplitude_and_residual() {
        let sys = scalar_system(0.01, 512);
        let sol = sys.solve(&gs1()).unwrap();
        assert!((sol.peak - 0.015).abs() < 0.0015, "peak {}", sol.peak);
        assert!(sol.residual_original < 1e-8 * sol.peak.max(1.0), "residual {:e}", sol.residual_original);
        assert!(sol.symmetry_defect < 1e-9);
        assert!(sol.history.windows(2).all(|h| h[1] < h[0]));
        assert!(sol.peak > 0.5 * 0.01 * 1.5);
    }

    #[test]
    fn frozen_jacobian_matches_finite_differences() {
        for sys in [scalar_system(0.01, 256), k2_system(0.01, 256)] {
            let (vstar, _) = sys.transfer_groundstate(&gs1()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let raw: Vec<f64> = sys.grid_z.node_count().pipe(|n| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            // smooth, decaying direction
            let dir: Vec<f64> = sys.grid_z.apply_real_symbol(&raw, &sys.precond).iter().zip(&vstar).map(|(a, b)| a * b).collect();
            let exact = sys.frozen_jacobian_apply(&vstar, &dir).unwrap();
            let h = 1e-5;
            let plus: Vec<f64> = dir.iter().map(|d| d * h).collect();
            let minus: Vec<f64> = dir.iter().map(|d| -d * h).collect();
            let fp = sys.residual_f(&vstar, &plus, None).unwrap().0;
            let fm = sys.residual_f(&vstar, &minus, None).unwrap().0;
            let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let diff: Vec<f64> = fd.iter().zip(&exact).map(|(a, b)| a - b).collect();
            let rel = sys.grid_z.sobolev_norm_scalar(&diff, 0) / sys.grid_z.sobolev_norm_scalar(&exact, 0);
            assert!(rel < 1e-6, "relative gradient mismatch {rel:e}");
        }
    }

    trait Pipe: Sized {
        fn pipe<T>(self, f: impl FnOnce(Self) -> T) -> T {
            f(self)
        }
    }
    impl Pipe for usize {}

    #[test]
    fn two_component_reduction_scales() {
        let gs = gs1();
        let norms: Vec<(f64, f64)> = [0.04, 0.01, 0.0025]
            .iter()
            .map(|&mu| {
                let sol = k2_system(mu, 512).solve(&gs).unwrap();
                assert!(sol.residual_original < 1e-8 * sol.peak.max(1.0));
                (sol.norm_vh, sol.norm_uperp)
            })
            .collect();
        eprintln!("{norms:?}");
        let slope = (norms[0].0 / norms[2].0).ln() / 16f64.ln();
        assert!((slope - 1.0).abs() < 0.15, "psi slope {slope}");
    }

    #[test]
    fn empty_reduction_for_scalar_systems() {
        let sys = scalar_system(0.01, 64);
        let psi = sys.solve_vh(&vec![0.5; 64], None).unwrap();
        assert!(psi.v.is_empty() && psi.iterations == 0);
        let sys = k2_system(0.01, 64);
        let psi = sys.solve_vh(&vec![0.0; 64], None).unwrap();
        assert!(psi.v[0].iter().all(|v| *v == 0.0));
    }
}
