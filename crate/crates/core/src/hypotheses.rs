//! Quantitative checks of the linear and transcritical hypotheses, and
//! extraction of the bifurcation data `(e, e*, S_eff, α, β)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::HypothesisError;
use crate::kernel::KernelSpec;
use crate::nonlinearity::{eval_vec, mu_jacobian, second_derivative, third_derivative, Nonlinearity};
use crate::normalform::compute_t0;

pub const TOL_NULL: f64 = 1e-8;
pub const TOL_DET: f64 = 1e-8;
pub const TOL_DEGENERATE: f64 = 1e-6;

/// Order of the leading nonlinearity in the critical direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    Quadratic,
    Cubic,
}

impl Scaling {
    /// Power `p` of the ground-state nonlinearity.
    pub fn power(self) -> u32 {
        match self {
            Self::Quadratic => 2,
            Self::Cubic => 3,
        }
    }

    /// Exponent of `ε` in the amplitude ansatz.
    pub fn amplitude_exponent(self) -> i32 {
        match self {
            Self::Quadratic => 2,
            Self::Cubic => 1,
        }
    }
}

/// Right and left null vectors of `I + K̂(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullVectors {
    pub e: DVector<f64>,
    pub e_star: DVector<f64>,
    pub smallest: f64,
    pub second: Option<f64>,
    pub pairing: f64,
}

/// `I + K̂(0)` as a real matrix.
pub fn linear_part_at_zero(kernel: &KernelSpec) -> Result<DMatrix<f64>, HypothesisError> {
    let k = kernel.components();
    let sym = kernel.eval_symbol(&vec![0.0; kernel.dim()])?;
    Ok(DMatrix::from_fn(k, k, |i, j| sym[(i, j)].re) + DMatrix::identity(k, k))
}

fn sorted_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).expect("finite"));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u_sorted = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v_sorted = DMatrix::from_fn(vt.ncols(), order.len(), |r, c| vt[(order[c], r)]);
    (values, u_sorted, v_sorted)
}

/// Simple kernel of `I + K̂(0)`, with `|e| = 1` and `⟨e, e*⟩ = 1`.
pub fn null_vectors(kernel: &KernelSpec) -> Result<NullVectors, HypothesisError> {
    let a = linear_part_at_zero(kernel)?;
    let (values, u, v) = sorted_svd(&a);
    let smallest = values[0];
    if smallest > TOL_NULL {
        return Err(HypothesisError::NoNullspace { smallest });
    }
    let second = values.get(1).copied();
    if let Some(s) = second {
        if s < TOL_NULL {
            return Err(HypothesisError::ExcessNullspace { second: s });
        }
    }
    let mut e = v.column(0).into_owned();
    // deterministic orientation: largest entry positive
    let imax = e.iamax();
    if e[imax] < 0.0 {
        e = -e;
    }
    let e_star_raw = u.column(0).into_owned();
    let pairing = e.dot(&e_star_raw);
    if pairing.abs() < TOL_NULL {
        return Err(HypothesisError::DegeneratePairing { pairing });
    }
    let e_star = e_star_raw / pairing;
    Ok(NullVectors {
        e,
        e_star,
        smallest,
        second,
        pairing: pairing.abs(),
    })
}

/// Options for the Fourier-determinant scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanOptions {
    /// Radius of the excluded ball around `ξ = 0`.
    pub xi_min: f64,
    pub xi_max: f64,
    pub samples: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            xi_min: 0.5,
            xi_max: 40.0,
            samples: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayScan {
    pub direction: Vec<f64>,
    pub min_abs: f64,
    pub argmin_radius: f64,
    /// `lim_{t→0} D(t ξ̂)/t²`.
    pub quadratic_coefficient: f64,
    /// Smallest `|D(t ξ̂)|/t²` inside the excluded ball.
    pub inner_ratio_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub rays: Vec<RayScan>,
    pub min_abs: f64,
    pub argmin_radius: f64,
    pub violation: Option<(f64, f64)>,
}

/// `D(ξ) = det(I + K̂(ξ))`.
pub fn fourier_determinant(kernel: &KernelSpec, xi: &[f64]) -> Result<Complex64, HypothesisError> {
    let k = kernel.components();
    let mut m = kernel.eval_symbol(xi)?;
    for i in 0..k {
        m[(i, i)] += Complex64::new(1.0, 0.0);
    }
    Ok(m.determinant())
}

fn scan_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    match dim {
        1 => {
            dirs.push(vec![1.0]);
            dirs.push(vec![-1.0]);
        }
        2 => {
            for i in 0..16 {
                let t = std::f64::consts::PI * i as f64 / 8.0;
                dirs.push(vec![t.cos(), t.sin()]);
            }
        }
        _ => {
            // Fibonacci sphere plus the coordinate axes
            let m = 32;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            for i in 0..m {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
                let r = (1.0 - z * z).sqrt();
                let t = golden * i as f64;
                dirs.push(vec![r * t.cos(), r * t.sin(), z]);
            }
            for a in 0..3 {
                let mut d = vec![0.0; 3];
                d[a] = 1.0;
                dirs.push(d);
            }
        }
    }
    dirs
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Samples `|D|` along rays; does not raise on violations.
pub fn scan_determinant(kernel: &KernelSpec, opts: &ScanOptions) -> Result<ScanReport, HypothesisError> {
    let dim = kernel.dim();
    let band = kernel.max_frequency();
    let xi_max = opts.xi_max.min(band);
    let mut rays = Vec::new();
    let mut violation: Option<(f64, f64)> = None;
    for dir in scan_directions(dim) {
        let at = |t: f64| -> Result<Complex64, HypothesisError> {
            let xi: Vec<f64> = dir.iter().map(|d| d * t).collect();
            fourier_determinant(kernel, &xi)
        };
        let abs_at = |t: f64| at(t).map(|v| v.norm()).unwrap_or(f64::INFINITY);
        let n = opts.samples.max(16);
        let radii: Vec<f64> = (0..n)
            .map(|i| opts.xi_min + (xi_max - opts.xi_min) * i as f64 / (n - 1) as f64)
            .collect();
        let values = radii.iter().map(|&t| at(t)).collect::<Result<Vec<_>, _>>()?;
        let abs: Vec<f64> = values.iter().map(|v| v.norm()).collect();
        let mut best = (abs[0], radii[0]);
        for (i, (&t, &a)) in radii.iter().zip(&abs).enumerate() {
            if a < best.0 {
                best = (a, t);
            }
            if i + 1 < n {
                // real sign change: bisect for the root
                let (v0, v1) = (values[i], values[i + 1]);
                if v0.re * v1.re < 0.0 && v0.im.abs() < 1e-12 && v1.im.abs() < 1e-12 {
                    let (mut lo, mut hi) = (t, radii[i + 1]);
                    for _ in 0..100 {
                        let mid = 0.5 * (lo + hi);
                        if at(mid)?.re * v0.re > 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let r = 0.5 * (lo + hi);
                    let v = abs_at(r);
                    if v < best.0 {
                        best = (v, r);
                    }
                }
                // interior local minimum: refine
                if i > 0 && a <= abs[i - 1] && a <= abs[i + 1] {
                    let (r, v) = golden_min(&abs_at, radii[i - 1], radii[i + 1]);
                    if v < best.0 {
                        best = (v, r);
                    }
                }
            }
        }
        let ratio = |t: f64| at(t).map(|v| v.re / (t * t)).unwrap_or(f64::NAN);
        let t0 = 1e-2 * opts.xi_min.max(1e-3);
        let q1 = ratio(t0);
        let q2 = ratio(t0 / 2.0);
        let quadratic = (4.0 * q2 - q1) / 3.0;
        let inner_ratio_min = (1..=20)
            .map(|i| {
                let t = opts.xi_min * i as f64 / 20.0;
                abs_at(t) / (t * t)
            })
            .fold(f64::INFINITY, f64::min);
        if (best.0 < TOL_DET || inner_ratio_min < TOL_DET) && violation.is_none() {
            violation = Some(if best.0 < TOL_DET {
                (best.1, best.0)
            } else {
                (0.0, inner_ratio_min)
            });
        }
        rays.push(RayScan {
            direction: dir,
            min_abs: best.0,
            argmin_radius: best.1,
            quadratic_coefficient: quadratic,
            inner_ratio_min,
        });
    }
    let (min_abs, argmin_radius) = rays
        .iter()
        .map(|r| (r.min_abs, r.argmin_radius))
        .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
    Ok(ScanReport {
        rays,
        min_abs,
        argmin_radius,
        violation,
    })
}

/// Scan that raises `InvertibilityViolation`.
pub fn fourier_determinant_scan(kernel: &KernelSpec, opts: &ScanOptions) -> Result<ScanReport, HypothesisError> {
    let report = scan_determinant(kernel, opts)?;
    if let Some((radius, value)) = report.violation {
        return Err(HypothesisError::InvertibilityViolation { radius, value });
    }
    Ok(report)
}

/// Hessian at 0 of a smooth scalar function by central differences with two
/// Richardson levels.
pub fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, dim: usize, h: f64) -> DMatrix<f64> {
    let level = |h: f64| {
        let mut m = DMatrix::zeros(dim, dim);
        let f0 = f(&vec![0.0; dim]);
        for i in 0..dim {
            let mut x = vec![0.0; dim];
            x[i] = h;
            let fp = f(&x);
            x[i] = -h;
            let fm = f(&x);
            m[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
            for j in 0..i {
                let mut pp = vec![0.0; dim];
                pp[i] = h;
                pp[j] = h;
                let mut pm = pp.clone();
                pm[j] = -h;
                let mut mp = pp.clone();
                mp[i] = -h;
                let mm: Vec<f64> = pp.iter().map(|v| -v).collect();
                let v = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    };
    let (a, b, c) = (level(h), level(h / 2.0), level(h / 4.0));
    let r1 = (&b * 4.0 - &a) / 3.0;
    let r2 = (&c * 4.0 - &b) / 3.0;
    (r2 * 16.0 - r1) / 15.0
}

/// `S_eff = D²_ξ ⟨e*, (I + K̂(ξ)) e⟩ |_{ξ=0}` and whether it had to be negated.
pub fn effective_hessian(
    kernel: &KernelSpec,
    e: &DVector<f64>,
    e_star: &DVector<f64>,
) -> Result<(DMatrix<f64>, bool), HypothesisError> {
    let n = kernel.dim();
    let mut s = if kernel.is_gridded() {
        let proj = |xi: &[f64]| -> f64 {
            let m = kernel.eval_symbol(xi).expect("frequency within band");
            let k = e.len();
            let mut v = 0.0;
            for i in 0..k {
                for j in 0..k {
                    v += e_star[i] * m[(i, j)].re * e[j];
                }
            }
            v
        };
        fd_hessian(&proj, n, 1e-3)
    } else {
        let (_, _, m2) = kernel.moments();
        DMatrix::from_fn(n, n, |a, b| -(e_star.transpose() * &m2[a][b] * e)[(0, 0)])
    };
    s = (&s + s.transpose()) * 0.5;
    let eig = s.clone().symmetric_eigen();
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if values.iter().any(|v| v.abs() < TOL_NULL) || (values.iter().any(|v| *v > 0.0) && values.iter().any(|v| *v < 0.0)) {
        return Err(HypothesisError::IndefiniteHessian { eigenvalues: values });
    }
    if values[0] < 0.0 {
        Ok((-s, true))
    } else {
        Ok((s, false))
    }
}

/// Unfolding and leading nonlinear coefficients of the critical direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TcCoefficients {
    pub alpha: f64,
    pub beta: f64,
    /// `(1/6)⟨e*, D³N[e,e,e]⟩`.
    pub gamma: f64,
    pub criticality: f64,
    pub trivial_deviation: f64,
}

/// Checks `N(0; μ) = 0` on `[-μ_max, μ_max]` and `D_U N(0;0) = 0`, then computes
/// `α = ⟨D_μ D_U N(0;0) e, e*⟩`, `β = ½⟨D²N(0;0)[e,e], e*⟩` and the cubic coefficient.
pub fn tc_raw<N: Nonlinearity + ?Sized>(
    n: &N,
    e: &DVector<f64>,
    e_star: &DVector<f64>,
    mu_max: f64,
) -> Result<TcCoefficients, HypothesisError> {
    let k = n.components();
    if e.len() != k {
        return Err(HypothesisError::ComponentMismatch {
            kernel: e.len(),
            nonlinearity: k,
        });
    }
    let zero = vec![0.0; k];
    let mut trivial_deviation: f64 = 0.0;
    for i in 0..=20 {
        let mu = -mu_max + 2.0 * mu_max * i as f64 / 20.0;
        let v = eval_vec(n, &zero, mu);
        trivial_deviation = trivial_deviation.max(v.iter().fold(0.0_f64, |m, x| m.max(x.abs())));
    }
    if trivial_deviation > 1e-10 {
        return Err(HypothesisError::TrivialSolution {
            deviation: trivial_deviation,
        });
    }
    let criticality = n.jacobian(&zero, 0.0).norm();
    if criticality > TOL_DEGENERATE {
        return Err(HypothesisError::CriticalityViolation { norm: criticality });
    }
    let ev: Vec<f64> = e.iter().copied().collect();
    let alpha = e_star.dot(&(mu_jacobian(n, &zero, 0.0) * e));
    let d2 = DVector::from_vec(second_derivative(n, &zero, 0.0, &ev, &ev));
    let beta = 0.5 * e_star.dot(&d2);
    let d3 = DVector::from_vec(third_derivative(n, &zero, 0.0, &ev));
    let gamma = e_star.dot(&d3) / 6.0;
    if alpha.abs() < TOL_DEGENERATE {
        return Err(HypothesisError::DegenerateUnfolding { alpha });
    }
    Ok(TcCoefficients {
        alpha,
        beta: if beta.abs() < 1e-9 { 0.0 } else { beta },
        gamma,
        criticality,
        trivial_deviation,
    })
}

/// `(α, β)` for a transcritical bifurcation; rejects `|β| < 1e-6`.
pub fn tc_coefficients<N: Nonlinearity + ?Sized>(
    n: &N,
    e: &DVector<f64>,
    e_star: &DVector<f64>,
) -> Result<TcCoefficients, HypothesisError> {
    let c = tc_raw(n, e, e_star, 0.05)?;
    if c.beta.abs() < TOL_DEGENERATE {
        return Err(HypothesisError::DegenerateQuadratic { beta: c.beta });
    }
    Ok(c)
}

/// Everything the normal form and solver need from the hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationData {
    pub e: Vec<f64>,
    pub e_star: Vec<f64>,
    pub s_eff: Vec<Vec<f64>>,
    pub t0: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sign_flip: bool,
    pub scaling: Scaling,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(r: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(r.len(), r.first().map_or(0, |x| x.len()), |i, j| r[i][j])
}

impl BifurcationData {
    pub fn e_vec(&self) -> DVector<f64> {
        DVector::from_vec(self.e.clone())
    }

    pub fn e_star_vec(&self) -> DVector<f64> {
        DVector::from_vec(self.e_star.clone())
    }

    pub fn s_eff_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.s_eff)
    }

    pub fn t0_matrix(&self) -> DMatrix<f64> {
        from_rows(&self.t0)
    }

    /// `+1`, or `-1` when the working system is the negated one.
    pub fn sign(&self) -> f64 {
        if self.sign_flip {
            -1.0
        } else {
            1.0
        }
    }

    /// Leading coefficient of the critical nonlinearity in the working system.
    pub fn leading(&self) -> f64 {
        match self.scaling {
            Scaling::Quadratic => self.beta,
            Scaling::Cubic => self.gamma,
        }
    }
}

/// One line of the hypothesis report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clause {
    pub name: &'static str,
    pub passed: bool,
    pub margin: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub clauses: Vec<Clause>,
    pub data: Option<BifurcationData>,
    pub error_code: Option<&'static str>,
    pub error: Option<String>,
    pub scan: Option<ScanReport>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.error_code.is_none()
    }
}

/// Options for [`check_hypotheses`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub scan: ScanOptions,
    pub scaling: Scaling,
    pub mu_max: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            scan: ScanOptions::default(),
            scaling: Scaling::Quadratic,
            mu_max: 0.05,
        }
    }
}

/// Runs every check in order and returns the report together with the outcome.
pub fn check_hypotheses(
    kernel: &KernelSpec,
    n: &dyn Nonlinearity,
    opts: &CheckOptions,
) -> (HypothesisReport, Result<BifurcationData, HypothesisError>) {
    let mut report = HypothesisReport {
        clauses: Vec::new(),
        data: None,
        error_code: None,
        error: None,
        scan: None,
    };
    let result = run_checks(kernel, n, opts, &mut report);
    match &result {
        Ok(data) => report.data = Some(data.clone()),
        Err(err) => {
            report.error_code = Some(err.code());
            report.error = Some(err.to_string());
        }
    }
    (report, result)
}

fn clause(report: &mut HypothesisReport, name: &'static str, passed: bool, margin: Option<f64>, detail: String) {
    report.clauses.push(Clause {
        name,
        passed,
        margin,
        detail,
    });
}

fn run_checks(
    kernel: &KernelSpec,
    n: &dyn Nonlinearity,
    opts: &CheckOptions,
    report: &mut HypothesisReport,
) -> Result<BifurcationData, HypothesisError> {
    if kernel.components() != n.components() {
        let err = HypothesisError::ComponentMismatch {
            kernel: kernel.components(),
            nonlinearity: n.components(),
        };
        clause(report, "components", false, None, err.to_string());
        return Err(err);
    }
    let sym = kernel.check_symmetry(kernel.symmetry());
    match &sym {
        Ok(r) => clause(
            report,
            "symmetry",
            r.symmetric,
            Some(r.deviation),
            format!("|Γ| = {}, compared {}", r.group_order, r.compared),
        ),
        Err(e) => {
            clause(report, "symmetry", false, None, e.to_string());
            return Err(HypothesisError::Kernel(e.clone()));
        }
    }
    let scan = scan_determinant(kernel, &opts.scan)?;
    let scan_ok = scan.violation.is_none();
    clause(
        report,
        "fourier_determinant",
        scan_ok,
        Some(scan.min_abs - TOL_DET),
        format!("min |D| = {:.3e} at |ξ| = {:.4}", scan.min_abs, scan.argmin_radius),
    );
    let violation = scan.violation;
    report.scan = Some(scan);
    if let Some((radius, value)) = violation {
        return Err(HypothesisError::InvertibilityViolation { radius, value });
    }
    let nv = null_vectors(kernel).inspect_err(|e| clause(report, "nullspace", false, None, e.to_string()))?;
    clause(
        report,
        "nullspace",
        true,
        nv.second.map(|s| s - TOL_NULL),
        format!("smallest singular value {:.3e}, pairing {:.3e}", nv.smallest, nv.pairing),
    );
    let (s_eff, sign_flip) = effective_hessian(kernel, &nv.e, &nv.e_star)
        .inspect_err(|e| clause(report, "second_moments", false, None, e.to_string()))?;
    let min_eig = s_eff.clone().symmetric_eigen().eigenvalues.min();
    clause(
        report,
        "second_moments",
        true,
        Some(min_eig),
        format!("S_eff = {:?}{}", rows(&s_eff), if sign_flip { " (system negated)" } else { "" }),
    );
    let t0 = compute_t0(&s_eff).map_err(|_| HypothesisError::IndefiniteHessian {
        eigenvalues: vec![min_eig],
    })?;
    let sign = if sign_flip { -1.0 } else { 1.0 };
    let tc = tc_raw(n, &nv.e, &nv.e_star, opts.mu_max).inspect_err(|e| clause(report, "transcritical", false, None, e.to_string()))?;
    clause(
        report,
        "trivial_state",
        true,
        Some(1e-10 - tc.trivial_deviation),
        format!("max |N(0; μ)| = {:.3e}", tc.trivial_deviation),
    );
    clause(
        report,
        "criticality",
        true,
        Some(TOL_DEGENERATE - tc.criticality),
        format!("|D_U N(0;0)| = {:.3e}", tc.criticality),
    );
    clause(report, "unfolding", true, Some(tc.alpha.abs() - TOL_DEGENERATE), format!("α = {}", tc.alpha * sign));
    match opts.scaling {
        Scaling::Quadratic => {
            if tc.beta.abs() < TOL_DEGENERATE {
                let err = HypothesisError::DegenerateQuadratic { beta: tc.beta };
                clause(report, "quadratic", false, Some(tc.beta.abs() - TOL_DEGENERATE), err.to_string());
                return Err(err);
            }
            clause(report, "quadratic", true, Some(tc.beta.abs() - TOL_DEGENERATE), format!("β = {}", tc.beta * sign));
        }
        Scaling::Cubic => {
            let g = tc.gamma * sign;
            if g >= -TOL_DEGENERATE {
                let err = HypothesisError::DefocusingCubic { gamma: g };
                clause(report, "cubic", false, Some(-g), err.to_string());
                return Err(err);
            }
            clause(report, "cubic", true, Some(-g), format!("γ = {g}, β = {}", tc.beta * sign));
        }
    }
    Ok(BifurcationData {
        e: nv.e.iter().copied().collect(),
        e_star: nv.e_star.iter().copied().collect(),
        s_eff: rows(&s_eff),
        t0: rows(&t0),
        alpha: tc.alpha * sign,
        beta: tc.beta * sign,
        gamma: tc.gamma * sign,
        sign_flip,
        scaling: opts.scaling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelEntry;
    use crate::nonlinearity::Polynomial;
    use crate::symmetry::SymmetryGroup;

    fn scalar(entry: KernelEntry) -> KernelSpec {
        KernelSpec::scalar(1, entry, SymmetryGroup::plus_minus(1)).unwrap()
    }

    fn exp(a: f64) -> KernelEntry {
        KernelEntry::Exponential { amplitude: a, width: 1.0 }
    }

    fn gauss(a: f64, widths: Vec<f64>) -> KernelEntry {
        KernelEntry::Gaussian { amplitude: a, widths }
    }

    #[test]
    fn null_vector_examples() {
        let nv = null_vectors(&scalar(exp(-1.0))).unwrap();
        assert!((nv.e[0] - 1.0).abs() < 1e-15 && (nv.e_star[0] - 1.0).abs() < 1e-15);
        let diag = KernelSpec::diagonal(1, vec![exp(-1.0), exp(-0.5)], SymmetryGroup::plus_minus(1)).unwrap();
        let nv = null_vectors(&diag).unwrap();
        assert!((nv.e - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-15);
        assert!((nv.e_star - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-15);
        match null_vectors(&scalar(exp(-0.9))) {
            Err(HypothesisError::NoNullspace { smallest }) => assert!((smallest - 0.1).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let double = KernelSpec::diagonal(1, vec![exp(-1.0), exp(-1.0)], SymmetryGroup::plus_minus(1)).unwrap();
        assert_eq!(null_vectors(&double).unwrap_err().code(), "ExcessNullspace");
    }

    #[test]
    fn determinant_scan_examples() {
        let opts = ScanOptions::default();
        let rep = fourier_determinant_scan(&scalar(exp(-1.0)), &opts).unwrap();
        assert!((rep.min_abs - 0.2).abs() < 1e-12);
        assert!((rep.argmin_radius - 0.5).abs() < 1e-12);
        for r in &rep.rays {
            assert!((r.quadratic_coefficient - 1.0).abs() < 1e-6);
        }
        match fourier_determinant_scan(&scalar(exp(-2.0)), &opts) {
            Err(HypothesisError::InvertibilityViolation { radius, .. }) => assert!((radius - 1.0).abs() < 1e-8),
            other => panic!("{other:?}"),
        }
        let rep = fourier_determinant_scan(&scalar(gauss(-1.0, vec![1.0])), &opts).unwrap();
        assert!(rep.violation.is_none());
    }

    #[test]
    fn effective_hessian_examples() {
        let one = DVector::from_vec(vec![1.0]);
        let (s, flip) = effective_hessian(&scalar(exp(-1.0)), &one, &one).unwrap();
        assert!((s[(0, 0)] - 2.0).abs() < 1e-14 && !flip);
        let (s, _) = effective_hessian(&scalar(gauss(-1.0, vec![1.0])), &one, &one).unwrap();
        assert!((s[(0, 0)] - 1.0).abs() < 1e-14);
        let aniso = KernelSpec::scalar(2, gauss(-1.0, vec![1.0, 2.0]), SymmetryGroup::axis_reflections(2)).unwrap();
        let (s, _) = effective_hessian(&aniso, &one, &one).unwrap();
        assert!((s - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0])).norm() < 1e-14);
        let (s, flip) = effective_hessian(&scalar(exp(1.0)), &one, &one).unwrap();
        assert!(flip && (s[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gridded_hessian_uses_finite_differences() {
        let grid = crate::grid::make_grid(1, 40.0, 2048).unwrap();
        let g = gauss(-1.0, vec![1.0]).sample(&grid).unwrap();
        let spec = scalar(KernelEntry::Grid(std::sync::Arc::new(g)));
        let one = DVector::from_vec(vec![1.0]);
        let (s, _) = effective_hessian(&spec, &one, &one).unwrap();
        assert!((s[(0, 0)] - 1.0).abs() < 1e-6, "{}", s[(0, 0)]);
    }

    #[test]
    fn tc_examples() {
        let one = DVector::from_vec(vec![1.0]);
        let c = tc_coefficients(&Polynomial::scalar(&[(1.0, 1, 1), (-1.0, 0, 2)]), &one, &one).unwrap();
        assert!((c.alpha - 1.0).abs() < 1e-7 && (c.beta + 1.0).abs() < 1e-7);
        let c = tc_coefficients(&Polynomial::scalar(&[(2.0, 1, 1), (3.0, 0, 2)]), &one, &one).unwrap();
        assert!((c.alpha - 2.0).abs() < 1e-7 && (c.beta - 3.0).abs() < 1e-7);
        let err = tc_coefficients(&Polynomial::scalar(&[(1.0, 1, 1), (-1.0, 0, 3)]), &one, &one).unwrap_err();
        assert_eq!(err.code(), "DegenerateQuadratic");
        let err = tc_coefficients(&Polynomial::scalar(&[(1.0, 0, 1), (-1.0, 0, 2)]), &one, &one).unwrap_err();
        assert_eq!(err.code(), "CriticalityViolation");
        let err = tc_coefficients(&Polynomial::scalar(&[(1.0, 1, 0), (-1.0, 0, 2)]), &one, &one).unwrap_err();
        assert_eq!(err.code(), "TrivialSolution");
    }

    #[test]
    fn full_check_reports_component_mismatch() {
        let diag = KernelSpec::diagonal(1, vec![exp(-1.0), exp(-0.5)], SymmetryGroup::plus_minus(1)).unwrap();
        let n = Polynomial::scalar(&[(1.0, 1, 1), (-1.0, 0, 2)]);
        let (rep, res) = check_hypotheses(&diag, &n, &CheckOptions::default());
        assert_eq!(res.unwrap_err().code(), "ComponentMismatch");
        assert_eq!(rep.error_code, Some("ComponentMismatch"));
    }

    #[test]
    fn full_check_passes_scalar_exponential() {
        let n = Polynomial::scalar(&[(1.0, 1, 1), (-1.0, 0, 2)]);
        let (rep, res) = check_hypotheses(&scalar(exp(-1.0)), &n, &CheckOptions::default());
        let data = res.unwrap();
        assert!(rep.passed() && rep.clauses.iter().all(|c| c.passed));
        assert!((data.alpha - 1.0).abs() < 1e-9 && (data.beta + 1.0).abs() < 1e-9);
        assert!((data.t0[0][0] - 1.0).abs() < 1e-14);
    }
}
