//! Radial ground states of `Δu - u + u^p = 0` and the linearization
//! `L = -Δ + 1 - p u^{p-1}`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::GroundStateError;
use crate::grid::{Field, UniformGrid};
use crate::krylov::{gmres, GmresOptions};
use crate::symmetry::SymmetryGroup;

pub const DEFAULT_R_MAX: f64 = 30.0;
pub const DEFAULT_NODES: usize = 128;
const NEWTON_CAP: usize = 50;

/// Chebyshev nodes on `[0, r_max]` (`r_0 = 0`) and the first two
/// differentiation matrices in `r`.
fn chebyshev(r_max: f64, n: usize) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let x: Vec<f64> = (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect();
    let c = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 };
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = c(i) / c(j) * sign / (x[i] - x[j]);
            }
        }
        // negative-sum trick keeps row sums exactly zero
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    let scale = -2.0 / r_max;
    let d1 = d * scale;
    let d2 = &d1 * &d1;
    let r = x.iter().map(|xi| r_max * (1.0 - xi) / 2.0).collect();
    (r, d1, d2)
}

/// Clenshaw–Curtis weights for the nodes of `chebyshev`, scaled to `[0, r_max]`.
fn clenshaw_curtis(r_max: f64, n: usize) -> Vec<f64> {
    let theta: Vec<f64> = (0..=n).map(|j| PI * j as f64 / n as f64).collect();
    let mut w = vec![0.0; n + 1];
    let mut v = vec![1.0; n - 1];
    if n % 2 == 0 {
        w[0] = 1.0 / ((n * n - 1) as f64);
        w[n] = w[0];
        for k in 1..n / 2 {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * k as f64 * theta[i + 1]).cos() / ((4 * k * k - 1) as f64);
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= (n as f64 * theta[i + 1]).cos() / ((n * n - 1) as f64);
        }
    } else {
        w[0] = 1.0 / ((n * n) as f64);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * k as f64 * theta[i + 1]).cos() / ((4 * k * k - 1) as f64);
            }
        }
    }
    for i in 1..n {
        w[i] = 2.0 * v[i - 1] / n as f64;
    }
    w.iter().map(|wi| wi * r_max / 2.0).collect()
}

/// Surface area of the unit sphere in `ℝⁿ`.
pub fn sphere_area(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    2.0 * PI.powf(half) / statrs::function::gamma::gamma(half)
}

/// Closed-form one-dimensional profiles.
pub fn closed_form_1d(p: u32, r: f64) -> f64 {
    match p {
        2 => 1.5 / (r / 2.0).cosh().powi(2),
        _ => 2f64.sqrt() / r.cosh(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundState {
    n: usize,
    p: u32,
    r_max: f64,
    r: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
    /// `u*(r) ≈ C r^{-(n-1)/2} e^{-rate r}` for large `r`.
    pub decay: (f64, f64),
    pub residual: f64,
    pub newton_iterations: usize,
}

fn residual_and_jacobian(
    d: f64,
    p: u32,
    r: &[f64],
    d1: &DMatrix<f64>,
    d2: &DMatrix<f64>,
    u: &DVector<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let m = r.len();
    let lap_d1 = d1 * u;
    let mut f = d2 * u;
    let mut jac = d2.clone();
    for i in 1..m - 1 {
        let c = (d - 1.0) / r[i];
        f[i] += c * lap_d1[i] - u[i] + u[i].powi(p as i32);
        for j in 0..m {
            jac[(i, j)] += c * d1[(i, j)];
        }
        jac[(i, i)] += -1.0 + p as f64 * u[i].powi(p as i32 - 1);
    }
    f[0] = lap_d1[0];
    jac.row_mut(0).copy_from(&d1.row(0));
    f[m - 1] = u[m - 1];
    jac.row_mut(m - 1).fill(0.0);
    jac[(m - 1, m - 1)] = 1.0;
    (f, jac)
}

fn interior_max(f: &DVector<f64>) -> f64 {
    f.iter().skip(1).take(f.len() - 2).fold(0.0_f64, |a, v| a.max(v.abs()))
}

fn newton(
    d: f64,
    p: u32,
    r: &[f64],
    d1: &DMatrix<f64>,
    d2: &DMatrix<f64>,
    mut u: DVector<f64>,
) -> Result<(DVector<f64>, usize), GroundStateError> {
    let floor = |u: &DVector<f64>| u.iter().cloned().fold(f64::INFINITY, f64::min);
    for it in 0..NEWTON_CAP {
        let (f, jac) = residual_and_jacobian(d, p, r, d1, d2, &u);
        let res = f.amax();
        if res < 1e-12 {
            return Ok((u, it));
        }
        let step = jac.lu().solve(&f).ok_or(GroundStateError::Divergence {
            iterations: it,
            residual: res,
        })?;
        if step.amax() < 1e-13 * (1.0 + u.amax()) {
            return Ok((u - step, it + 1));
        }
        let mut t = 1.0;
        loop {
            let trial = &u - &step * t;
            let peak = trial.amax();
            if floor(&trial) > -1e-8 * peak.max(1.0) {
                let (ft, _) = residual_and_jacobian(d, p, r, d1, d2, &trial);
                if ft.amax() < res || t < 1e-3 {
                    u = trial;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-6 {
                return Err(GroundStateError::Divergence {
                    iterations: it,
                    residual: res,
                });
            }
        }
    }
    let (f, _) = residual_and_jacobian(d, p, r, d1, d2, &u);
    if f.amax() < 1e-10 {
        return Ok((u, NEWTON_CAP));
    }
    Err(GroundStateError::Divergence {
        iterations: NEWTON_CAP,
        residual: f.amax(),
    })
}

/// `Δu - u + u^p = 0` in `ℝⁿ` on Chebyshev nodes of `[0, r_max]`, by damped
/// Newton with continuation in the dimension parameter from the 1D profile.
pub fn solve_groundstate(n: usize, p: u32, r_max: f64, nodes: usize) -> Result<GroundState, GroundStateError> {
    if !(1..=5).contains(&n) {
        return Err(GroundStateError::Parameters(format!("dimension {n} outside 1..=5")));
    }
    if p != 2 && p != 3 {
        return Err(GroundStateError::Parameters(format!("power {p} must be 2 or 3")));
    }
    if !(r_max >= 20.0 && r_max.is_finite()) {
        return Err(GroundStateError::Parameters(format!("r_max = {r_max} must be at least 20")));
    }
    if nodes < 16 {
        return Err(GroundStateError::Parameters(format!("{nodes} radial nodes, need at least 16")));
    }
    let (r, d1, d2) = chebyshev(r_max, nodes);
    let mut u = DVector::from_iterator(r.len(), r.iter().map(|&ri| closed_form_1d(p, ri)));
    let last = r.len() - 1;
    u[last] = 0.0;
    let mut iterations = 0;
    let steps = 4 * (n - 1);
    for s in 0..=steps {
        let d = 1.0 + s as f64 * 0.25;
        let (next, it) = newton(d, p, &r, &d1, &d2, u)?;
        u = next;
        iterations += it;
    }
    let floor = u.iter().cloned().fold(f64::INFINITY, f64::min);
    let peak = u[0];
    if floor < -1e-9 * peak.abs().max(1.0) || peak <= 0.0 {
        return Err(GroundStateError::NotPositive { min: floor.min(peak) });
    }
    let (f, _) = residual_and_jacobian(n as f64, p, &r, &d1, &d2, &u);
    let du = (&d1 * &u).iter().copied().collect();
    let mut gs = GroundState {
        n,
        p,
        r_max,
        r,
        u: u.iter().copied().collect(),
        du,
        decay: (0.0, 1.0),
        residual: interior_max(&f),
        newton_iterations: iterations,
    };
    gs.decay = gs.fit_decay(8.0, 16.0);
    Ok(gs)
}

impl GroundState {
    /// The degenerate zero profile, for which `L = -Δ + 1`.
    pub fn trivial(n: usize, p: u32) -> Self {
        let (r, _, _) = chebyshev(DEFAULT_R_MAX, 16);
        let m = r.len();
        Self {
            n,
            p,
            r_max: DEFAULT_R_MAX,
            r,
            u: vec![0.0; m],
            du: vec![0.0; m],
            decay: (0.0, 1.0),
            residual: 0.0,
            newton_iterations: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn power(&self) -> u32 {
        self.p
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn nodes(&self) -> &[f64] {
        &self.r
    }

    pub fn samples(&self) -> &[f64] {
        &self.u
    }

    pub fn peak(&self) -> f64 {
        self.u[0]
    }

    pub fn is_monotone(&self) -> bool {
        self.u.windows(2).all(|w| w[1] < w[0] || w[0].abs() < 1e-12)
    }

    fn fit_decay(&self, lo: f64, hi: f64) -> (f64, f64) {
        let half = (self.n as f64 - 1.0) / 2.0;
        let pts: Vec<(f64, f64)> = self
            .r
            .iter()
            .zip(&self.u)
            .filter(|(r, u)| **r >= lo && **r <= hi && **u > 0.0)
            .map(|(r, u)| (*r, (u * r.powf(half)).ln()))
            .collect();
        if pts.len() < 2 {
            return (0.0, 1.0);
        }
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        let icpt = (sy - slope * sx) / m;
        (icpt.exp(), -slope)
    }

    fn barycentric(&self, data: &[f64], r: f64) -> f64 {
        let m = self.r.len() - 1;
        let x = 1.0 - 2.0 * r / self.r_max;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..=m {
            let xj = (PI * j as f64 / m as f64).cos();
            let dx = x - xj;
            if dx == 0.0 {
                return data[j];
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == m {
                w *= 0.5;
            }
            num += w / dx * data[j];
            den += w / dx;
        }
        num / den
    }

    /// `u*(r)`, with the fitted exponential tail beyond `r_max`.
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        if r <= self.r_max {
            return self.barycentric(&self.u, r);
        }
        let (c, rate) = self.decay;
        c * r.powf(-(self.n as f64 - 1.0) / 2.0) * (-rate * r).exp()
    }

    /// `u*'(r)`.
    pub fn eval_derivative(&self, r: f64) -> f64 {
        let r = r.abs();
        if r <= self.r_max {
            return self.barycentric(&self.du, r);
        }
        let (_, rate) = self.decay;
        let half = (self.n as f64 - 1.0) / 2.0;
        -(rate + half / r) * self.eval(r)
    }

    /// `u*(|x|)` at the nodes of a centred grid.
    pub fn sample(&self, grid: &UniformGrid) -> Vec<f64> {
        (0..grid.node_count())
            .map(|q| {
                let x = grid.node(q);
                self.eval(x[..grid.dim()].iter().map(|v| v * v).sum::<f64>().sqrt())
            })
            .collect()
    }

    /// `∂_{x_axis} u*` at the grid nodes.
    pub fn sample_partial(&self, grid: &UniformGrid, axis: usize) -> Vec<f64> {
        (0..grid.node_count())
            .map(|q| {
                let x = grid.node(q);
                let r = x[..grid.dim()].iter().map(|v| v * v).sum::<f64>().sqrt();
                if r == 0.0 {
                    0.0
                } else {
                    self.eval_derivative(r) * x[axis] / r
                }
            })
            .collect()
    }

    /// `p u*^{p-1}` at the grid nodes.
    pub fn potential(&self, grid: &UniformGrid) -> Vec<f64> {
        self.sample(grid).iter().map(|u| self.p as f64 * u.powi(self.p as i32 - 1)).collect()
    }

    /// `∫|∇u|² + ∫u² - ∫u^{p+1}` by Clenshaw–Curtis in `r`.
    pub fn nehari_defect(&self) -> f64 {
        let m = self.r.len() - 1;
        let w = clenshaw_curtis(self.r_max, m);
        let area = sphere_area(self.n);
        let mut total = 0.0;
        for j in 0..=m {
            let jac = area * self.r[j].powi(self.n as i32 - 1);
            let u = self.u[j];
            total += w[j] * jac * (self.du[j].powi(2) + u * u - u.powi(self.p as i32 + 1));
        }
        total
    }

    /// `(r, u*(r))` rows.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "r,u")?;
        for (r, u) in self.r.iter().zip(&self.u) {
            writeln!(out, "{r:.12e},{u:.15e}")?;
        }
        Ok(())
    }
}

/// `-Δh + h - V h` for a sampled potential `V`.
pub fn linearization_values(grid: &UniformGrid, potential: &[f64], h: &[f64]) -> Vec<f64> {
    let lap = grid.laplacian(h);
    lap.iter().zip(h).zip(potential).map(|((l, v), w)| -l + v - w * v).collect()
}

/// `L h = -Δh + h - p u*^{p-1} h` with `u*` interpolated at each node.
pub fn apply_linearization(gs: &GroundState, h: &Field) -> Field {
    let grid = h.grid();
    let pot = gs.potential(grid);
    let comps: Vec<Vec<f64>> = (0..h.components())
        .map(|c| linearization_values(grid, &pot, h.component(c)))
        .collect();
    Field::from_components(grid, &comps).expect("shape preserved")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondegeneracyOptions {
    pub margin: f64,
    pub shift: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for NondegeneracyOptions {
    fn default() -> Self {
        Self {
            margin: 0.05,
            shift: -0.05,
            max_iter: 80,
            tol: 1e-9,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TranslationMode {
    pub eigenvalue: f64,
    /// Fraction of the Ritz vector lying in `span{∂_i u*}`.
    pub overlap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NondegeneracyReport {
    /// Ritz value of smallest modulus on the symmetric subspace.
    pub symmetric_ritz: f64,
    pub symmetric_iterations: usize,
    pub translation_modes: Vec<TranslationMode>,
    pub margin: f64,
    pub passed: bool,
}

struct ShiftedSolver<'a> {
    grid: &'a UniformGrid,
    potential: Vec<f64>,
    shift: f64,
    precond: Vec<f64>,
}

impl ShiftedSolver<'_> {
    fn apply(&self, h: &[f64]) -> Vec<f64> {
        linearization_values(self.grid, &self.potential, h)
            .iter()
            .zip(h)
            .map(|(l, v)| l - self.shift * v)
            .collect()
    }

    fn solve(&self, b: &[f64]) -> Result<Vec<f64>, GroundStateError> {
        let out = gmres(
            |x| self.apply(x),
            |x| self.grid.apply_real_symbol(x, &self.precond),
            b,
            None,
            GmresOptions {
                tol: 1e-11,
                restart: 80,
                max_iter: 800,
            },
        );
        if !out.converged {
            return Err(GroundStateError::Krylov(out.relative_residual));
        }
        Ok(out.x)
    }
}

fn normalize(grid: &UniformGrid, v: &mut [f64]) {
    let n = grid.inner(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn gram_schmidt(grid: &UniformGrid, block: &mut [Vec<f64>]) {
    for i in 0..block.len() {
        for j in 0..i {
            let c = grid.inner(&block[i], &block[j]);
            let (head, tail) = block.split_at_mut(i);
            tail[0].iter_mut().zip(&head[j]).for_each(|(a, b)| *a -= c * b);
        }
        normalize(grid, &mut block[i]);
    }
}

/// Shifted inverse iteration for `L` on the `Γ`-symmetric subspace, plus block
/// inverse iteration for the unrestricted near-kernel.
pub fn check_nondegeneracy(
    gs: &GroundState,
    group: &SymmetryGroup,
    grid: &UniformGrid,
    opts: NondegeneracyOptions,
) -> Result<NondegeneracyReport, GroundStateError> {
    let solver = ShiftedSolver {
        grid,
        potential: gs.potential(grid),
        shift: opts.shift,
        precond: grid.frequency_sq_all().iter().map(|x| 1.0 / (1.0 + x)).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let nodes = grid.node_count();
    let noise = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..nodes).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let rayleigh = |v: &[f64]| grid.inner(v, &linearization_values(grid, &solver.potential, v)) / grid.inner(v, v);

    let mut v = group.project_values(grid, &noise(&mut rng));
    normalize(grid, &mut v);
    let mut lambda = rayleigh(&v);
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        let mut next = group.project_values(grid, &solver.solve(&v)?);
        normalize(grid, &mut next);
        let l = rayleigh(&next);
        v = next;
        iterations = it;
        let done = (l - lambda).abs() < opts.tol * (1.0 + l.abs());
        lambda = l;
        if done {
            break;
        }
    }

    let n = gs.dim();
    let mut tangents: Vec<Vec<f64>> = (0..n).map(|a| gs.sample_partial(grid, a)).collect();
    let tangents_ok = tangents.iter().all(|t| grid.inner(t, t) > 0.0);
    if tangents_ok {
        gram_schmidt(grid, &mut tangents);
    }
    let mut block: Vec<Vec<f64>> = (0..n).map(|_| noise(&mut rng)).collect();
    gram_schmidt(grid, &mut block);
    let mut ritz = vec![f64::INFINITY; n];
    let mut vectors = block.clone();
    for _ in 0..opts.max_iter {
        let mut next: Vec<Vec<f64>> = block.iter().map(|b| solver.solve(b)).collect::<Result<_, _>>()?;
        gram_schmidt(grid, &mut next);
        let lv: Vec<Vec<f64>> = next.iter().map(|b| linearization_values(grid, &solver.potential, b)).collect();
        let h = DMatrix::from_fn(n, n, |i, j| 0.5 * (grid.inner(&next[i], &lv[j]) + grid.inner(&next[j], &lv[i])));
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite"));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        vectors = order
            .iter()
            .map(|&c| (0..nodes).map(|q| (0..n).map(|i| eig.eigenvectors[(i, c)] * next[i][q]).sum()).collect())
            .collect();
        let change = values.iter().zip(&ritz).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ritz = values;
        block = next;
        if change < opts.tol {
            break;
        }
    }
    let translation_modes = ritz
        .iter()
        .zip(&vectors)
        .map(|(&eigenvalue, v)| {
            let overlap = if tangents_ok {
                let proj: f64 = tangents.iter().map(|t| grid.inner(v, t).powi(2)).sum();
                (proj / grid.inner(v, v)).sqrt()
            } else {
                0.0
            };
            TranslationMode { eigenvalue, overlap }
        })
        .collect();
    let passed = lambda.abs() > opts.margin;
    let report = NondegeneracyReport {
        symmetric_ritz: lambda,
        symmetric_iterations: iterations,
        translation_modes,
        margin: opts.margin,
        passed,
    };
    if !passed {
        return Err(GroundStateError::NondegeneracyFailure { value: lambda.abs() });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent RK4 shooting on `u(0)`: overshoot crosses zero, undershoot turns up.
    fn shoot(n: usize, p: u32, r_end: f64) -> (f64, impl Fn(f64) -> f64) {
        let rhs = |r: f64, y: [f64; 2]| -> [f64; 2] { [y[1], -(n as f64 - 1.0) / r * y[1] + y[0] - y[0].powi(p as i32)] };
        let integrate = move |a: f64, record: bool| -> (i32, Vec<(f64, f64)>) {
            let r0 = 1e-4;
            let mut r = r0;
            let mut y = [a + (a.powi(p as i32) - a) * -r0 * r0 / (2.0 * n as f64), (a - a.powi(p as i32)) * r0 / n as f64];
            let h = 1e-3;
            let mut path = vec![(0.0, a)];
            while r < r_end {
                let k1 = rhs(r, y);
                let k2 = rhs(r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
                let k3 = rhs(r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
                let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
                for i in 0..2 {
                    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                r += h;
                if record {
                    path.push((r, y[0]));
                }
                if y[0] < 0.0 {
                    return (1, path);
                }
                if y[1] > 0.0 {
                    return (-1, path);
                }
            }
            (0, path)
        };
        let (mut lo, mut hi) = (1.0, 20.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            match integrate(mid, false).0 {
                1 => hi = mid,
                _ => lo = mid,
            }
        }
        let a = 0.5 * (lo + hi);
        let path = integrate(a, true).1;
        (a, move |r: f64| {
            let i = path.partition_point(|(ri, _)| *ri < r).clamp(1, path.len() - 1);
            let (r0, u0) = path[i - 1];
            let (r1, u1) = path[i];
            u0 + (u1 - u0) * (r - r0) / (r1 - r0)
        })
    }

    #[test]
    fn one_dimensional_closed_forms() {
        for p in [2, 3] {
            let gs = solve_groundstate(1, p, DEFAULT_R_MAX, DEFAULT_NODES).unwrap();
            let err = gs.nodes().iter().zip(gs.samples()).map(|(r, u)| (u - closed_form_1d(p, *r)).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "p = {p}: {err:e}");
            assert!(gs.residual < 1e-10, "residual {:e}", gs.residual);
            assert!((gs.decay.1 - 1.0).abs() < 0.01);
            let off = (0..50).map(|i| 0.37 * i as f64).map(|r| (gs.eval(r) - closed_form_1d(p, r)).abs()).fold(0.0, f64::max);
            assert!(off < 1e-10);
        }
        let gs = solve_groundstate(1, 2, DEFAULT_R_MAX, DEFAULT_NODES).unwrap();
        assert!((gs.peak() - 1.5).abs() < 1e-12);
        assert!(gs.is_monotone());
        assert!(gs.nehari_defect().abs() < 1e-8);
    }

    #[test]
    fn higher_dimensions_match_shooting() {
        for n in [2, 3] {
            let gs = solve_groundstate(n, 2, DEFAULT_R_MAX, DEFAULT_NODES).unwrap();
            let (a, path) = shoot(n, 2, 25.0);
            assert!((gs.peak() - a).abs() < 1e-6, "n = {n}: {} vs {a}", gs.peak());
            for r in [0.5, 1.0, 2.0, 4.0, 6.0] {
                assert!((gs.eval(r) - path(r)).abs() < 1e-5, "n = {n}, r = {r}");
            }
            assert!(gs.residual < 1e-10 && gs.is_monotone());
            assert!((gs.decay.1 - 1.0).abs() < 0.01, "rate {}", gs.decay.1);
            assert!(gs.nehari_defect().abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(solve_groundstate(6, 2, 30.0, 128).is_err());
        assert!(solve_groundstate(1, 4, 30.0, 128).is_err());
        assert!(solve_groundstate(1, 2, 10.0, 128).is_err());
    }

    #[test]
    fn linearization_identities() {
        let gs = solve_groundstate(1, 2, DEFAULT_R_MAX, DEFAULT_NODES).unwrap();
        let grid = UniformGrid::new(1, 30.0, 1024).unwrap();
        let u = gs.sample(&grid);
        let du = gs.sample_partial(&grid, 0);
        let lu = linearization_values(&grid, &gs.potential(&grid), &u);
        let err = lu.iter().zip(&u).map(|(l, v)| (l + v * v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8);
        let ldu = linearization_values(&grid, &gs.potential(&grid), &du);
        let ratio = grid.sobolev_norm_scalar(&ldu, 0) / grid.sobolev_norm_scalar(&du, 2);
        assert!(ratio < 1e-6);
        // tensor-grid residual of the profile itself
        let lap = grid.laplacian(&u);
        let res = lap.iter().zip(&u).map(|(l, v)| (l - v + v * v).abs()).fold(0.0, f64::max);
        assert!(res < 1e-8);
        let zero = GroundState::trivial(1, 2);
        let cosx = Field::from_fn(&grid, |x| (x[0] * PI / 30.0 * 10.0).cos());
        let out = apply_linearization(&zero, &cosx);
        let k2 = (PI / 3.0).powi(2);
        let err = out.values().iter().zip(cosx.values()).map(|(a, b)| (a - (1.0 + k2) * b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn nondegeneracy_on_symmetric_subspace() {
        let gs = solve_groundstate(1, 2, DEFAULT_R_MAX, DEFAULT_NODES).unwrap();
        let grid = UniformGrid::new(1, 30.0, 512).unwrap();
        let rep = check_nondegeneracy(&gs, &SymmetryGroup::plus_minus(1), &grid, NondegeneracyOptions::default()).unwrap();
        assert!((rep.symmetric_ritz - 0.75).abs() < 1e-4, "{}", rep.symmetric_ritz);
        assert!(rep.translation_modes[0].eigenvalue.abs() < 1e-6, "{:?}", rep.translation_modes);
        assert!(rep.translation_modes[0].overlap > 0.99);
        let err = check_nondegeneracy(&gs, &SymmetryGroup::trivial(1), &grid, NondegeneracyOptions::default());
        assert!(matches!(err, Err(GroundStateError::NondegeneracyFailure { .. })));
        let zero = GroundState::trivial(1, 2);
        let rep = check_nondegeneracy(&zero, &SymmetryGroup::plus_minus(1), &grid, NondegeneracyOptions::default()).unwrap();
        assert!((rep.symmetric_ritz - 1.0).abs() < 0.02, "{}", rep.symmetric_ritz);
    }
}
