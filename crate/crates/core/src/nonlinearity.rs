//! Pointwise nonlinearities `N(U; μ)` and their derivatives.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::HypothesisError;

/// Central-difference step for first derivatives.
pub const FD_STEP: f64 = 1e-5;

/// A smooth pointwise map `ℝᵏ × ℝ → ℝᵏ`.
pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn components(&self) -> usize;

    fn eval(&self, u: &[f64], mu: f64, out: &mut [f64]);

    /// `D_U N(U; μ)`; central differences with one Richardson level unless overridden.
    fn jacobian(&self, u: &[f64], mu: f64) -> DMatrix<f64> {
        fd_jacobian(self, u, mu)
    }

    fn describe(&self) -> String {
        format!("{self:?}")
    }

    /// Size of the terms summed in `eval` at `u`, for roundoff estimates.
    fn roundoff_scale(&self, u: &[f64], mu: f64) -> f64 {
        let j = self.jacobian(u, mu);
        let umax = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let fmax = eval_vec(self, u, mu).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        fmax + j.amax() * umax
    }
}

pub fn eval_vec<N: Nonlinearity + ?Sized>(n: &N, u: &[f64], mu: f64) -> Vec<f64> {
    let mut out = vec![0.0; n.components()];
    n.eval(u, mu, &mut out);
    out
}

pub fn fd_jacobian<N: Nonlinearity + ?Sized>(n: &N, u: &[f64], mu: f64) -> DMatrix<f64> {
    let k = n.components();
    let mut jac = DMatrix::zeros(k, k);
    let mut up = u.to_vec();
    let mut fp = vec![0.0; k];
    let mut fm = vec![0.0; k];
    let central = |h: f64, j: usize, up: &mut Vec<f64>, fp: &mut Vec<f64>, fm: &mut Vec<f64>| {
        up[j] = u[j] + h;
        n.eval(up, mu, fp);
        up[j] = u[j] - h;
        n.eval(up, mu, fm);
        up[j] = u[j];
        (0..k).map(|i| (fp[i] - fm[i]) / (2.0 * h)).collect::<Vec<f64>>()
    };
    for j in 0..k {
        let d1 = central(FD_STEP, j, &mut up, &mut fp, &mut fm);
        let d2 = central(FD_STEP / 2.0, j, &mut up, &mut fp, &mut fm);
        for i in 0..k {
            jac[(i, j)] = (4.0 * d2[i] - d1[i]) / 3.0;
        }
    }
    jac
}

/// `∂_μ D_U N(U; μ)` by Richardson-refined central differences of the Jacobian.
pub fn mu_jacobian<N: Nonlinearity + ?Sized>(n: &N, u: &[f64], mu: f64) -> DMatrix<f64> {
    let d = |h: f64| (n.jacobian(u, mu + h) - n.jacobian(u, mu - h)) / (2.0 * h);
    let step = 1e-4;
    (d(step / 2.0) * 4.0 - d(step)) / 3.0
}

/// `D²_U N(U; μ)[a, b]`.
pub fn second_derivative<N: Nonlinearity + ?Sized>(n: &N, u: &[f64], mu: f64, a: &[f64], b: &[f64]) -> Vec<f64> {
    let bv = DVector::from_column_slice(b);
    let d = |h: f64| {
        let up: Vec<f64> = u.iter().zip(a).map(|(x, y)| x + h * y).collect();
        let um: Vec<f64> = u.iter().zip(a).map(|(x, y)| x - h * y).collect();
        (n.jacobian(&up, mu) - n.jacobian(&um, mu)) * &bv / (2.0 * h)
    };
    let step = 1e-4;
    let r = (d(step / 2.0) * 4.0 - d(step)) / 3.0;
    r.iter().copied().collect()
}

/// `D³_U N(U; μ)[a, a, a]`.
pub fn third_derivative<N: Nonlinearity + ?Sized>(n: &N, u: &[f64], mu: f64, a: &[f64]) -> Vec<f64> {
    let av = DVector::from_column_slice(a);
    let d = |h: f64| {
        let shift = |s: f64| -> Vec<f64> { u.iter().zip(a).map(|(x, y)| x + s * y).collect() };
        let jp = n.jacobian(&shift(h), mu);
        let j0 = n.jacobian(u, mu);
        let jm = n.jacobian(&shift(-h), mu);
        (jp - j0 * 2.0 + jm) * &av / (h * h)
    };
    let step = 1e-3;
    let r = (d(step / 2.0) * 4.0 - d(step)) / 3.0;
    r.iter().copied().collect()
}

/// One monomial `coeff · μ^mu_power · Π_j u_j^{powers_j}` contributing to row `row`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub row: usize,
    pub coeff: f64,
    #[serde(default)]
    pub mu_power: u32,
    pub powers: Vec<u32>,
}

/// A polynomial nonlinearity with exact derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    k: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(k: usize, terms: Vec<Monomial>) -> Result<Self, String> {
        for t in &terms {
            if t.row >= k {
                return Err(format!("monomial row {} out of range for k = {k}", t.row));
            }
            if t.powers.len() != k {
                return Err(format!("monomial has {} powers, expected {k}", t.powers.len()));
            }
            if !t.coeff.is_finite() {
                return Err("monomial coefficient is not finite".into());
            }
        }
        Ok(Self { k, terms })
    }

    /// Scalar polynomial from `(coeff, mu_power, u_power)` triples.
    pub fn scalar(terms: &[(f64, u32, u32)]) -> Self {
        let terms = terms
            .iter()
            .map(|&(coeff, mu_power, p)| Monomial {
                row: 0,
                coeff,
                mu_power,
                powers: vec![p],
            })
            .collect();
        Self { k: 1, terms }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    /// Multiplies every coefficient by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Monomial {
                coeff: t.coeff * s,
                ..t.clone()
            })
            .collect();
        Self { k: self.k, terms }
    }
}

impl Nonlinearity for Polynomial {
    fn components(&self) -> usize {
        self.k
    }

    fn eval(&self, u: &[f64], mu: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for t in &self.terms {
            let mut v = t.coeff * mu.powi(t.mu_power as i32);
            for (x, &p) in u.iter().zip(&t.powers) {
                v *= x.powi(p as i32);
            }
            out[t.row] += v;
        }
    }

    fn jacobian(&self, u: &[f64], mu: f64) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.k, self.k);
        for t in &self.terms {
            let base = t.coeff * mu.powi(t.mu_power as i32);
            for j in 0..self.k {
                if t.powers[j] == 0 {
                    continue;
                }
                let mut v = base * t.powers[j] as f64;
                for (l, (x, &p)) in u.iter().zip(&t.powers).enumerate() {
                    let e = if l == j { p - 1 } else { p };
                    v *= x.powi(e as i32);
                }
                jac[(t.row, j)] += v;
            }
        }
        jac
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                let mut s = format!("{:+}", t.coeff);
                if t.mu_power > 0 {
                    s.push_str(&format!("·μ^{}", t.mu_power));
                }
                for (j, &p) in t.powers.iter().enumerate() {
                    if p > 0 {
                        s.push_str(&format!("·u{j}^{p}"));
                    }
                }
                format!("[{}] {s}", t.row)
            })
            .collect();
        format!("polynomial: {}", parts.join(" "))
    }
}

type EvalFn = dyn Fn(&[f64], f64, &mut [f64]) + Send + Sync;
type JacFn = dyn Fn(&[f64], f64) -> DMatrix<f64> + Send + Sync;

/// A nonlinearity given by closures, with an optional analytic Jacobian.
#[derive(Clone)]
pub struct FnNonlinearity {
    k: usize,
    name: String,
    eval: Arc<EvalFn>,
    jacobian: Option<Arc<JacFn>>,
}

impl fmt::Debug for FnNonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnNonlinearity({}, k = {})", self.name, self.k)
    }
}

impl FnNonlinearity {
    pub fn new(
        k: usize,
        name: impl Into<String>,
        eval: impl Fn(&[f64], f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            k,
            name: name.into(),
            eval: Arc::new(eval),
            jacobian: None,
        }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64], f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jacobian = Some(Arc::new(jac));
        self
    }
}

impl Nonlinearity for FnNonlinearity {
    fn components(&self) -> usize {
        self.k
    }

    fn eval(&self, u: &[f64], mu: f64, out: &mut [f64]) {
        (self.eval)(u, mu, out)
    }

    fn jacobian(&self, u: &[f64], mu: f64) -> DMatrix<f64> {
        match &self.jacobian {
            Some(j) => j(u, mu),
            None => fd_jacobian(self, u, mu),
        }
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// `s · N(U_0 + U; μ_0 + σ μ)`: recentering at a reference state.
#[derive(Debug, Clone)]
pub struct Recentered {
    pub base: Arc<dyn Nonlinearity>,
    pub state: Vec<f64>,
    pub mu0: f64,
    pub mu_scale: f64,
    pub sign: f64,
}

impl Recentered {
    fn shift(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.state).map(|(a, b)| a + b).collect()
    }
}

impl Nonlinearity for Recentered {
    fn components(&self) -> usize {
        self.base.components()
    }

    fn eval(&self, u: &[f64], mu: f64, out: &mut [f64]) {
        self.base.eval(&self.shift(u), self.mu0 + self.mu_scale * mu, out);
        out.iter_mut().for_each(|v| *v *= self.sign);
    }

    fn jacobian(&self, u: &[f64], mu: f64) -> DMatrix<f64> {
        self.base.jacobian(&self.shift(u), self.mu0 + self.mu_scale * mu) * self.sign
    }

    fn roundoff_scale(&self, u: &[f64], mu: f64) -> f64 {
        self.base.roundoff_scale(&self.shift(u), self.mu0 + self.mu_scale * mu)
    }

    fn describe(&self) -> String {
        format!(
            "{} recentered at U = {:?}, μ = {} + {}·μ'",
            self.base.describe(),
            self.state,
            self.mu0,
            self.mu_scale
        )
    }
}

/// Source of the constant-state branch `U_b(μ̃)` removed by [`BranchShifted`].
#[derive(Clone)]
pub enum Branch {
    Zero,
    Closed(Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>),
    /// Damped Newton on `A U + N(U; μ̃²) = 0` from the supplied guess.
    RootFind {
        linear: DMatrix<f64>,
        guess: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    },
}

impl fmt::Debug for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Closed(_) => write!(f, "Closed"),
            Self::RootFind { linear, .. } => write!(f, "RootFind(A = {linear:?})"),
        }
    }
}

/// `Ñ(V; μ̃) = N(U_b + V; μ̃²) - N(U_b; μ̃²)`.
#[derive(Debug)]
pub struct BranchShifted {
    base: Arc<dyn Nonlinearity>,
    branch: Branch,
    cache: Mutex<HashMap<u64, Vec<f64>>>,
}

impl BranchShifted {
    pub fn new(base: Arc<dyn Nonlinearity>, branch: Branch) -> Self {
        Self {
            base,
            branch,
            cache: Mutex::new(HashMap::new()),
        }
    }

    /// The subtracted constant state at `μ̃`.
    pub fn branch_at(&self, mu_t: f64) -> Result<Vec<f64>, HypothesisError> {
        if let Some(v) = self.cache.lock().expect("cache lock").get(&mu_t.to_bits()) {
            return Ok(v.clone());
        }
        let k = self.base.components();
        let value = match &self.branch {
            Branch::Zero => vec![0.0; k],
            Branch::Closed(f) => f(mu_t),
            Branch::RootFind { linear, guess } => constant_state(self.base.as_ref(), linear, mu_t * mu_t, guess(mu_t))
                .map_err(|last| HypothesisError::BranchDivergence { mu: mu_t * mu_t, last })?,
        };
        self.cache.lock().expect("cache lock").insert(mu_t.to_bits(), value.clone());
        Ok(value)
    }
}

impl Nonlinearity for BranchShifted {
    fn components(&self) -> usize {
        self.base.components()
    }

    fn eval(&self, v: &[f64], mu_t: f64, out: &mut [f64]) {
        let k = self.components();
        let ub = self.branch_at(mu_t).unwrap_or_else(|_| vec![f64::NAN; k]);
        let shifted: Vec<f64> = ub.iter().zip(v).map(|(a, b)| a + b).collect();
        let mut at_branch = vec![0.0; k];
        self.base.eval(&shifted, mu_t * mu_t, out);
        self.base.eval(&ub, mu_t * mu_t, &mut at_branch);
        for (o, b) in out.iter_mut().zip(&at_branch) {
            *o -= b;
        }
    }

    fn jacobian(&self, v: &[f64], mu_t: f64) -> DMatrix<f64> {
        let k = self.components();
        let ub = self.branch_at(mu_t).unwrap_or_else(|_| vec![f64::NAN; k]);
        let shifted: Vec<f64> = ub.iter().zip(v).map(|(a, b)| a + b).collect();
        self.base.jacobian(&shifted, mu_t * mu_t)
    }

    fn roundoff_scale(&self, v: &[f64], mu_t: f64) -> f64 {
        let k = self.components();
        let ub = self.branch_at(mu_t).unwrap_or_else(|_| vec![f64::NAN; k]);
        let shifted: Vec<f64> = ub.iter().zip(v).map(|(a, b)| a + b).collect();
        self.base.roundoff_scale(&shifted, mu_t * mu_t) + self.base.roundoff_scale(&ub, mu_t * mu_t)
    }

    fn describe(&self) -> String {
        format!("{} with constant branch removed (μ = μ̃²)", self.base.describe())
    }
}

/// Damped Newton for `A U + N(U; μ) = 0`. On failure returns the last iterate.
pub fn constant_state<N: Nonlinearity + ?Sized>(
    n: &N,
    linear: &DMatrix<f64>,
    mu: f64,
    guess: Vec<f64>,
) -> Result<Vec<f64>, Vec<f64>> {
    let k = n.components();
    let residual = |u: &[f64]| -> DVector<f64> {
        let lin = linear * DVector::from_column_slice(u);
        DVector::from_iterator(k, eval_vec(n, u, mu).into_iter().zip(lin.iter()).map(|(a, b)| a + b))
    };
    let mut u = guess;
    let mut r = residual(&u);
    for _ in 0..60 {
        if !r.iter().all(|v| v.is_finite()) {
            return Err(u);
        }
        if r.norm() < 1e-15 {
            return Ok(u);
        }
        let jac = linear + n.jacobian(&u, mu);
        let Some(step) = jac.lu().solve(&r) else {
            return Err(u);
        };
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a - t * b).collect();
            let rt = residual(&trial);
            if rt.iter().all(|v| v.is_finite()) && rt.norm() < r.norm() * (1.0 - 1e-4 * t) {
                u = trial;
                r = rt;
                break;
            }
            t *= 0.5;
            if t < 1e-6 {
                return if r.norm() < 1e-12 { Ok(u) } else { Err(u) };
            }
        }
    }
    if r.norm() < 1e-12 {
        Ok(u)
    } else {
        Err(u)
    }
}

/// Fold `(U_f, μ_f)` of the scalar constant states `a U + N(U; μ) = 0`, from Newton on
/// `(g, g_U) = 0`.
pub fn locate_fold<N: Nonlinearity + ?Sized>(
    n: &N,
    linear: f64,
    guess: (f64, f64),
) -> Result<(f64, f64), HypothesisError> {
    if n.components() != 1 {
        return Err(HypothesisError::FoldNotFound("fold location requires a scalar system".into()));
    }
    let g = |u: f64, mu: f64| linear * u + eval_vec(n, &[u], mu)[0];
    let gu = |u: f64, mu: f64| linear + n.jacobian(&[u], mu)[(0, 0)];
    let (mut u, mut mu) = guess;
    for _ in 0..100 {
        let f = [g(u, mu), gu(u, mu)];
        if f[0].abs() < 1e-14 && f[1].abs() < 1e-12 {
            return Ok((u, mu));
        }
        let h = 1e-6;
        let j = [
            [
                (g(u + h, mu) - g(u - h, mu)) / (2.0 * h),
                (g(u, mu + h) - g(u, mu - h)) / (2.0 * h),
            ],
            [
                (gu(u + h, mu) - gu(u - h, mu)) / (2.0 * h),
                (gu(u, mu + h) - gu(u, mu - h)) / (2.0 * h),
            ],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !det.is_finite() || det.abs() < 1e-300 {
            return Err(HypothesisError::FoldNotFound(format!("singular fold system at U = {u}, μ = {mu}")));
        }
        let du = (f[0] * j[1][1] - f[1] * j[0][1]) / det;
        let dmu = (j[0][0] * f[1] - j[1][0] * f[0]) / det;
        u -= du;
        mu -= dmu;
        if !(u.is_finite() && mu.is_finite()) {
            return Err(HypothesisError::FoldNotFound("Newton iterates diverged".into()));
        }
        if du.abs() < 1e-15 * (1.0 + u.abs()) && dmu.abs() < 1e-15 * (1.0 + mu.abs()) {
            return Ok((u, mu));
        }
    }
    let (r0, r1) = (g(u, mu), gu(u, mu));
    if r0.abs() < 1e-12 && r1.abs() < 1e-9 {
        Ok((u, mu))
    } else {
        Err(HypothesisError::FoldNotFound(format!("no convergence (g = {r0:.3e}, g_U = {r1:.3e})")))
    }
}

/// Turns a scalar saddle-node at `(U_f, μ_f)` into a transcritical problem in `(V, μ̃)`.
///
/// The recentered parameter direction is chosen so that two constant branches exist for
/// `μ̃ > 0`, and the removed branch is the one giving a positive unfolding coefficient.
pub fn fold_to_transcritical(
    n: Arc<dyn Nonlinearity>,
    linear: f64,
    fold: (f64, f64),
) -> Result<(Arc<dyn Nonlinearity>, FoldInfo), HypothesisError> {
    let (u_f, mu_f) = fold;
    let g_mu = {
        let h = 1e-6;
        (eval_vec(n.as_ref(), &[u_f], mu_f + h)[0] - eval_vec(n.as_ref(), &[u_f], mu_f - h)[0]) / (2.0 * h)
    };
    let b = 0.5 * second_derivative(n.as_ref(), &[u_f], mu_f, &[1.0], &[1.0])[0];
    if g_mu.abs() < 1e-10 || b.abs() < 1e-10 {
        return Err(HypothesisError::FoldNotFound(format!(
            "degenerate fold (∂_μ N = {g_mu:.3e}, ½ ∂²N = {b:.3e})"
        )));
    }
    let mu_scale = -(g_mu * b).signum();
    let c = (-g_mu * mu_scale / b).sqrt();
    let s = b.signum();
    let recentered: Arc<dyn Nonlinearity> = Arc::new(Recentered {
        base: n,
        state: vec![u_f],
        mu0: mu_f,
        mu_scale,
        sign: 1.0,
    });
    let branch = Branch::RootFind {
        linear: DMatrix::from_element(1, 1, linear),
        guess: Arc::new(move |mt: f64| vec![s * c * mt]),
    };
    let shifted = Arc::new(BranchShifted::new(recentered, branch));
    Ok((
        shifted,
        FoldInfo {
            state: u_f,
            mu: mu_f,
            mu_scale,
            branch_slope: s * c,
        },
    ))
}

/// Where and how a saddle-node was unfolded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldInfo {
    pub state: f64,
    pub mu: f64,
    pub mu_scale: f64,
    pub branch_slope: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives_are_exact() {
        let p = Polynomial::new(
            2,
            vec![
                Monomial { row: 0, coeff: 1.0, mu_power: 1, powers: vec![1, 0] },
                Monomial { row: 0, coeff: -1.0, mu_power: 0, powers: vec![2, 0] },
                Monomial { row: 0, coeff: 1.0, mu_power: 0, powers: vec![1, 1] },
                Monomial { row: 1, coeff: 1.0, mu_power: 0, powers: vec![2, 0] },
            ],
        )
        .unwrap();
        let u = [0.3, -0.2];
        let exact = p.jacobian(&u, 0.1);
        let fd = fd_jacobian(&p, &u, 0.1);
        assert!((exact - fd).abs().max() < 1e-9);
        assert_eq!(eval_vec(&p, &u, 0.1), vec![0.03 - 0.09 - 0.06, 0.09]);
        assert!(Polynomial::new(1, vec![Monomial { row: 1, coeff: 1.0, mu_power: 0, powers: vec![1] }]).is_err());
    }

    #[test]
    fn derivative_helpers() {
        let p = Polynomial::scalar(&[(2.0, 1, 1), (3.0, 0, 2), (-1.0, 0, 3)]);
        assert!((mu_jacobian(&p, &[0.0], 0.0)[(0, 0)] - 2.0).abs() < 1e-9);
        assert!((second_derivative(&p, &[0.0], 0.0, &[1.0], &[1.0])[0] - 6.0).abs() < 1e-8);
        assert!((third_derivative(&p, &[0.0], 0.0, &[1.0])[0] + 6.0).abs() < 1e-6);
    }

    #[test]
    fn saddle_node_branch_subtraction() {
        // μ - u² with branch -√μ: Ñ = 2μ̃v - v²
        let base: Arc<dyn Nonlinearity> = Arc::new(Polynomial::scalar(&[(1.0, 1, 0), (-1.0, 0, 2)]));
        let shifted = BranchShifted::new(base.clone(), Branch::Closed(Arc::new(|mt: f64| vec![-mt])));
        for (v, mt) in [(0.1, 0.2), (-0.3, 0.05), (0.0, 0.4)] {
            let got = eval_vec(&shifted, &[v], mt)[0];
            assert!((got - (2.0 * mt * v - v * v)).abs() < 1e-14);
        }
        let root = BranchShifted::new(
            base.clone(),
            Branch::RootFind {
                linear: DMatrix::zeros(1, 1),
                guess: Arc::new(|mt: f64| vec![-0.8 * mt]),
            },
        );
        assert!((root.branch_at(0.3).unwrap()[0] + 0.3).abs() < 1e-13);
        let zero = BranchShifted::new(base.clone(), Branch::Zero);
        let expect = eval_vec(base.as_ref(), &[0.2], 0.25)[0] - eval_vec(base.as_ref(), &[0.0], 0.25)[0];
        assert!((eval_vec(&zero, &[0.2], 0.5)[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn branch_failure_reports_last_iterate() {
        // μ + u² has no real constant states for μ > 0
        let base: Arc<dyn Nonlinearity> = Arc::new(Polynomial::scalar(&[(1.0, 1, 0), (1.0, 0, 2)]));
        let b = BranchShifted::new(
            base,
            Branch::RootFind {
                linear: DMatrix::zeros(1, 1),
                guess: Arc::new(|_| vec![0.1]),
            },
        );
        let mt = 0.5f64.sqrt();
        match b.branch_at(mt) {
            Err(HypothesisError::BranchDivergence { mu, last }) => {
                assert!((mu - 0.5).abs() < 1e-12);
                assert_eq!(last.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cubic_fold_unfolds_to_transcritical() {
        // u³ - u + μ folds at u = 1/√3, μ = 2/(3√3)
        let base: Arc<dyn Nonlinearity> = Arc::new(Polynomial::scalar(&[(1.0, 0, 3), (-1.0, 0, 1), (1.0, 1, 0)]));
        let fold = locate_fold(base.as_ref(), 0.0, (0.5, 0.3)).unwrap();
        assert!((fold.0 - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((fold.1 - 2.0 / (3.0 * 3f64.sqrt())).abs() < 1e-12);
        let (n, _) = fold_to_transcritical(base, 0.0, fold).unwrap();
        for mt in [0.0, 0.05, 0.1] {
            assert!(eval_vec(n.as_ref(), &[0.0], mt)[0].abs() < 1e-14);
        }
        let alpha = mu_jacobian(n.as_ref(), &[0.0], 0.0)[(0, 0)];
        assert!(alpha > 0.0);
    }
}
