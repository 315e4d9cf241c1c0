//! Parameter sweeps with warm starts, log-log rate fits, tail classification
//! and the large-period study.

use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{ContinuationError, SolverError};
use crate::grid::UniformGrid;
use crate::groundstate::{solve_groundstate, GroundState, DEFAULT_NODES, DEFAULT_R_MAX};
use crate::hypotheses::BifurcationData;
use crate::kernel::{KernelEntry, KernelSpec};
use crate::nonlinearity::Nonlinearity;
use crate::solver::{build_rescaled, RescaledSystem, SolveDiagnostics, SolverOptions, SpikeSolution};

/// Everything needed to solve at any admissible `μ`.
#[derive(Clone)]
pub struct SpikeProblem {
    pub kernel: KernelSpec,
    pub bifurcation: BifurcationData,
    pub nonlinearity: Arc<dyn Nonlinearity>,
    pub grid_z: UniformGrid,
    pub options: SolverOptions,
    pub groundstate: GroundState,
}

impl SpikeProblem {
    pub fn new(
        kernel: KernelSpec,
        bifurcation: BifurcationData,
        nonlinearity: Arc<dyn Nonlinearity>,
        grid_z: UniformGrid,
        options: SolverOptions,
    ) -> Result<Self, ContinuationError> {
        let gs = solve_groundstate(kernel.dim(), bifurcation.scaling.power(), DEFAULT_R_MAX, DEFAULT_NODES)
            .map_err(SolverError::from)?;
        Ok(Self {
            kernel,
            bifurcation,
            nonlinearity,
            grid_z,
            options,
            groundstate: gs,
        })
    }

    pub fn with_grid(&self, grid_z: UniformGrid) -> Self {
        Self { grid_z, ..self.clone() }
    }

    pub fn system(&self, mu: f64) -> Result<RescaledSystem, SolverError> {
        build_rescaled(&self.kernel, &self.bifurcation, self.nonlinearity.clone(), mu, &self.grid_z, self.options)
    }

    pub fn solve(&self, mu: f64, warm: Option<&[f64]>) -> Result<SpikeSolution, SolverError> {
        self.system(mu)?.solve_from(&self.groundstate, warm)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub mu: f64,
    pub eps: f64,
    pub amplitude: f64,
    pub symmetry_defect: f64,
    pub warm_started: bool,
    pub diagnostics: SolveDiagnostics,
}

impl SweepEntry {
    pub fn new(sol: &SpikeSolution, warm_started: bool) -> Self {
        Self {
            mu: sol.mu,
            eps: sol.eps,
            amplitude: sol.peak,
            symmetry_defect: sol.symmetry_defect,
            warm_started,
            diagnostics: sol.diagnostics(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepFailure {
    pub mu: f64,
    pub reason: String,
}

/// Log-log slopes; `None` when fewer than two usable points remain.
#[derive(Debug, Clone, Default, Serialize)]
pub struct FittedSlopes {
    pub norm_w_vs_eps: Option<f64>,
    pub norm_uperp_vs_mu: Option<f64>,
    pub amplitude_vs_mu: Option<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailEntry {
    pub mu: f64,
    pub report: Option<TailReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationResult {
    /// Converged entries, decreasing `μ`.
    pub entries: Vec<SweepEntry>,
    pub failures: Vec<SweepFailure>,
    pub fitted_slopes: FittedSlopes,
    pub tail: Vec<TailEntry>,
    /// Largest converged `μ`.
    pub practical_mu0: f64,
    pub norm_w_decreasing: bool,
}

/// Least-squares line `y = a + b x`; returns `(b, a, R²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sse: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Some((b, a, r2))
}

/// Slope of `log y` against `log x` over pairs with both values positive.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    linear_fit(&lx, &ly).map(|f| f.0)
}

pub fn fit_slopes(entries: &[SweepEntry], components: usize) -> FittedSlopes {
    // the largest μ carries the strongest higher-order contamination
    let used = entries.get(1..).unwrap_or(&[]);
    let col = |f: fn(&SweepEntry) -> f64| used.iter().map(f).collect::<Vec<_>>();
    let mu = col(|e| e.mu);
    FittedSlopes {
        norm_w_vs_eps: loglog_slope(&col(|e| e.eps), &col(|e| e.diagnostics.norm_w)),
        norm_uperp_vs_mu: if components > 1 {
            loglog_slope(&mu, &col(|e| e.diagnostics.norm_uperp))
        } else {
            None
        },
        amplitude_vs_mu: loglog_slope(&mu, &col(|e| e.amplitude)),
        points: used.len(),
    }
}

/// Solves at every `μ` in decreasing order, carrying `w` forward; a failed warm
/// start is retried cold.
pub fn sweep(
    problem: &SpikeProblem,
    mus: &[f64],
    tail: Option<KernelTail>,
) -> Result<(ContinuationResult, Vec<SpikeSolution>), ContinuationError> {
    let mut order: Vec<f64> = mus.to_vec();
    order.sort_by(|a, b| b.total_cmp(a));
    order.dedup();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    let mut solutions: Vec<SpikeSolution> = Vec::new();
    let mut tails = Vec::new();
    for &mu in &order {
        let warm = solutions.last().map(|s| s.w.clone());
        let mut warm_started = warm.is_some();
        let mut outcome = problem.solve(mu, warm.as_deref());
        if outcome.is_err() && warm.is_some() {
            warm_started = false;
            outcome = problem.solve(mu, None);
        }
        match outcome {
            Ok(sol) => {
                entries.push(SweepEntry::new(&sol, warm_started));
                if let Some(class) = tail {
                    let (report, error) = match tail_analysis(&sol, class) {
                        Ok(r) => (Some(r), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    tails.push(TailEntry { mu, report, error });
                }
                solutions.push(sol);
            }
            Err(e) => failures.push(SweepFailure { mu, reason: e.to_string() }),
        }
    }
    if entries.is_empty() {
        return Err(ContinuationError::AllFailed);
    }
    let norm_w_decreasing = entries.windows(2).all(|p| p[1].diagnostics.norm_w < p[0].diagnostics.norm_w);
    let result = ContinuationResult {
        fitted_slopes: fit_slopes(&entries, problem.kernel.components()),
        practical_mu0: entries[0].mu,
        norm_w_decreasing,
        entries,
        failures,
        tail: tails,
    };
    Ok((result, solutions))
}

pub fn write_sweep_csv<W: Write>(result: &ContinuationResult, out: &mut W) -> std::io::Result<()> {
    write_entries_csv(&result.entries, out)
}

/// One row per entry; wall time is left out so reruns are byte-identical.
pub fn write_entries_csv<W: Write>(entries: &[SweepEntry], out: &mut W) -> std::io::Result<()> {
    writeln!(
        out,
        "mu,eps,amplitude,norm_w,norm_vh,norm_uperp,residual_original,symmetry_defect,iterations_inner,iterations_outer,warm_started"
    )?;
    for e in entries {
        let d = &e.diagnostics;
        writeln!(
            out,
            "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.3e},{:.3e},{},{},{}",
            e.mu,
            e.eps,
            e.amplitude,
            d.norm_w,
            d.norm_vh,
            d.norm_uperp,
            d.residual_original,
            e.symmetry_defect,
            d.iterations_inner,
            d.iterations_outer,
            e.warm_started
        )?;
    }
    Ok(())
}

/// Far-field behavior of the kernel, used to set the predicted tail exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KernelTail {
    Exponential,
    /// Kernel decays like `|x|^{-exponent}`.
    Algebraic { exponent: f64 },
}

impl KernelTail {
    /// The slowest algebraic decay among the entries, if any.
    pub fn of(kernel: &KernelSpec) -> Self {
        fn slowest(e: &KernelEntry) -> Option<f64> {
            match e {
                KernelEntry::Algebraic { amplitude, exponent, .. } if *amplitude != 0.0 => Some(2.0 * exponent),
                KernelEntry::Sum(parts) => parts.iter().filter_map(slowest).reduce(f64::min),
                _ => None,
            }
        }
        let k = kernel.components();
        let found = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .filter_map(|(i, j)| slowest(kernel.entry(i, j)))
            .reduce(f64::min);
        match found {
            Some(exponent) => Self::Algebraic { exponent },
            None => Self::Exponential,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TailClass {
    Exponential,
    Algebraic,
    Inconclusive,
}

pub const TAIL_NOISE_FLOOR: f64 = 1e-13;
pub const ALGEBRAIC_MARGIN: f64 = 0.02;
pub const TIE_TOLERANCE: f64 = 1e-3;
const MIN_TAIL_SAMPLES: usize = 4;

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub class: TailClass,
    /// `λ` in `|U| ~ e^{-λ|x|}`.
    pub rate: f64,
    pub rate_r2: f64,
    /// `s` in `|U| ~ |x|^{-s}`.
    pub exponent: f64,
    pub exponent_r2: f64,
    pub window: [f64; 2],
    pub samples: usize,
    pub predicted_exponent: Option<f64>,
    pub exponent_error: Option<f64>,
    /// `(|x|, max |U|)` over radial shells.
    pub profile: Vec<[f64; 2]>,
}

/// Maximum of `max_c |U_c|` over shells of physical radius `|T₀ y|`.
pub fn radial_profile(sol: &SpikeSolution) -> (Vec<[f64; 2]>, f64) {
    let grid = sol.u_phys.grid();
    let smin = sol.t0.clone().svd(false, false).singular_values.min();
    let h = grid.spacing() * smin;
    let k = sol.u_phys.components();
    let mut shells: Vec<f64> = Vec::new();
    for q in 0..grid.node_count() {
        let x = sol.physical_node(q);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let b = (r / h).round() as usize;
        if b >= shells.len() {
            shells.resize(b + 1, f64::NAN);
        }
        let v = (0..k).map(|c| sol.u_phys.component(c)[q].abs()).fold(0.0, f64::max);
        shells[b] = if shells[b].is_nan() { v } else { shells[b].max(v) };
    }
    let profile = shells
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .map(|(b, v)| [b as f64 * h, *v])
        .collect();
    (profile, grid.half_width() * smin)
}

/// Semilog and log-log fits of the radial profile on `[0.5 L_x, 0.9 L_x]`.
pub fn tail_analysis(sol: &SpikeSolution, kernel: KernelTail) -> Result<TailReport, ContinuationError> {
    let (profile, lx) = radial_profile(sol);
    let window = [0.5 * lx, 0.9 * lx];
    let inside: Vec<[f64; 2]> = profile
        .iter()
        .filter(|p| p[0] >= window[0] && p[0] <= window[1])
        .copied()
        .collect();
    let top = inside.iter().map(|p| p[1]).fold(0.0, f64::max);
    let usable: Vec<[f64; 2]> = inside.into_iter().filter(|p| p[1] > TAIL_NOISE_FLOOR).collect();
    if usable.len() < MIN_TAIL_SAMPLES {
        return Err(ContinuationError::WindowUnderResolved(top));
    }
    let r: Vec<f64> = usable.iter().map(|p| p[0]).collect();
    let lr: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let lu: Vec<f64> = usable.iter().map(|p| p[1].ln()).collect();
    let (b_exp, _, r2_exp) = linear_fit(&r, &lu).ok_or(ContinuationError::WindowUnderResolved(top))?;
    let (b_alg, _, r2_alg) = linear_fit(&lr, &lu).ok_or(ContinuationError::WindowUnderResolved(top))?;
    let d = r2_alg - r2_exp;
    let class = if d > ALGEBRAIC_MARGIN {
        TailClass::Algebraic
    } else if d < -TIE_TOLERANCE {
        TailClass::Exponential
    } else {
        TailClass::Inconclusive
    };
    let predicted = match kernel {
        KernelTail::Algebraic { exponent } => Some(exponent),
        KernelTail::Exponential => None,
    };
    Ok(TailReport {
        class,
        rate: -b_exp,
        rate_r2: r2_exp,
        exponent: -b_alg,
        exponent_r2: r2_alg,
        window,
        samples: usable.len(),
        predicted_exponent: predicted,
        exponent_error: predicted.map(|p| (-b_alg - p).abs() / p),
        profile,
    })
}

pub fn write_tail_csv<W: Write>(report: &TailReport, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "r,max_abs,in_window")?;
    for p in &report.profile {
        let inside = p[0] >= report.window[0] && p[0] <= report.window[1] && p[1] > TAIL_NOISE_FLOOR;
        writeln!(out, "{:.10e},{:.10e},{}", p[0], p[1], inside as u8)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicEntry {
    pub l0: f64,
    /// Half-width in the unnormalized `y` coordinates, `L₀/√(αμ)`.
    pub half_width: f64,
    pub points: usize,
    pub amplitude: f64,
    pub residual_original: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicReport {
    pub mu: f64,
    pub entries: Vec<PeriodicEntry>,
    /// `(√(L₀_i L₀_{i+1}), |A(L₀_{i+1}) − A(L₀_i)|)`.
    pub increments: Vec<[f64; 2]>,
    pub semilog_slope: Option<f64>,
    pub loglog_slope: Option<f64>,
    /// `|A(L₀_i) − A(L₀_max)|` is nonincreasing.
    pub monotone: bool,
}

/// Solves at fixed spacing on periods `2L₀/√(αμ)`, `L₀` increasing.
pub fn periodic_study(problem: &SpikeProblem, mu: f64, l0s: &[f64]) -> Result<PeriodicReport, ContinuationError> {
    let mut l0s = l0s.to_vec();
    l0s.sort_by(f64::total_cmp);
    l0s.dedup();
    let h = problem.grid_z.spacing();
    let dim = problem.grid_z.dim();
    let mut entries = Vec::new();
    for &l0 in &l0s {
        let points = 2 * (l0 / h).ceil() as usize;
        let grid = UniformGrid::new(dim, l0, points).map_err(SolverError::from)?;
        let sol = problem.with_grid(grid).solve(mu, None)?;
        entries.push(PeriodicEntry {
            l0,
            half_width: sol.u_phys.grid().half_width(),
            points,
            amplitude: sol.peak,
            residual_original: sol.residual_original,
        });
    }
    let increments: Vec<[f64; 2]> = entries
        .windows(2)
        .map(|p| [(p[0].l0 * p[1].l0).sqrt(), (p[1].amplitude - p[0].amplitude).abs()])
        .collect();
    let positive: Vec<[f64; 2]> = increments.iter().filter(|p| p[1] > 0.0).copied().collect();
    let semilog_slope = linear_fit(
        &positive.iter().map(|p| p[0]).collect::<Vec<_>>(),
        &positive.iter().map(|p| p[1].ln()).collect::<Vec<_>>(),
    )
    .map(|f| f.0);
    let loglog_slope = loglog_slope(
        &positive.iter().map(|p| p[0]).collect::<Vec<_>>(),
        &positive.iter().map(|p| p[1]).collect::<Vec<_>>(),
    );
    let last = entries.last().map_or(0.0, |e| e.amplitude);
    let gaps: Vec<f64> = entries.iter().map(|e| (e.amplitude - last).abs()).collect();
    let monotone = gaps.windows(2).all(|g| g[1] <= g[0]);
    Ok(PeriodicReport {
        mu,
        entries,
        increments,
        semilog_slope,
        loglog_slope,
        monotone,
    })
}

pub fn write_periodic_csv<W: Write>(report: &PeriodicReport, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "l0,half_width,points,amplitude,increment,residual_original")?;
    for (i, e) in report.entries.iter().enumerate() {
        let inc = report.increments.get(i).map_or(String::new(), |p| format!("{:.10e}", p[1]));
        writeln!(
            out,
            "{},{:.6},{},{:.15e},{},{:.3e}",
            e.l0, e.half_width, e.points, e.amplitude, inc, e.residual_original
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Field;
    use crate::hypotheses::{check_hypotheses, CheckOptions};
    use crate::nonlinearity::Polynomial;
    use crate::symmetry::SymmetryGroup;

    fn scalar_problem(entry: KernelEntry, half_width: f64, points: usize) -> SpikeProblem {
        let kernel = KernelSpec::scalar(1, entry, SymmetryGroup::plus_minus(1)).unwrap();
        let nl: Arc<dyn Nonlinearity> = Arc::new(Polynomial::scalar(&[(1.0, 1, 1), (-1.0, 0, 2)]));
        let (_, bif) = check_hypotheses(&kernel, nl.as_ref(), &CheckOptions::default());
        let grid = UniformGrid::new(1, half_width, points).unwrap();
        SpikeProblem::new(kernel, bif.unwrap(), nl, grid, SolverOptions::default()).unwrap()
    }

    fn exponential() -> KernelEntry {
        KernelEntry::Exponential { amplitude: -1.0, width: 1.0 }
    }

    #[test]
    fn fits_recover_exact_lines() {
        let x = [1.0, 2.0, 3.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let (b, a, r2) = linear_fit(&x, &y).unwrap();
        assert!((b + 0.5).abs() < 1e-14 && (a - 2.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
        let y3: Vec<f64> = x.iter().map(|v| 7.0 * v * v * v).collect();
        assert!((loglog_slope(&x, &y3).unwrap() - 3.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn first_entry_is_excluded_from_fits() {
        let entry = |mu: f64, amp: f64| SweepEntry {
            mu,
            eps: mu.sqrt(),
            amplitude: amp,
            symmetry_defect: 0.0,
            warm_started: false,
            diagnostics: SolveDiagnostics {
                mu,
                eps: mu.sqrt(),
                iterations_inner: 0,
                iterations_outer: 0,
                norm_w: mu,
                norm_vh: 0.0,
                norm_uperp: 0.0,
                residual_original: 0.0,
                wall_time: 0.0,
            },
        };
        let entries = vec![entry(0.04, 1.0), entry(0.02, 0.02), entry(0.01, 0.01)];
        let fit = fit_slopes(&entries, 1);
        assert_eq!(fit.points, 2);
        assert!((fit.amplitude_vs_mu.unwrap() - 1.0).abs() < 1e-12);
        assert!((fit.norm_w_vs_eps.unwrap() - 2.0).abs() < 1e-12);
        assert!(fit.norm_uperp_vs_mu.is_none());
    }

    #[test]
    fn kernel_tail_detects_algebraic_entries() {
        let alg = KernelEntry::Algebraic { amplitude: -1.0, width: 1.0, exponent: 2.5 };
        let k = KernelSpec::scalar(1, KernelEntry::Sum(vec![exponential(), alg]), SymmetryGroup::plus_minus(1)).unwrap();
        assert_eq!(KernelTail::of(&k), KernelTail::Algebraic { exponent: 5.0 });
        let k = KernelSpec::scalar(1, exponential(), SymmetryGroup::plus_minus(1)).unwrap();
        assert_eq!(KernelTail::of(&k), KernelTail::Exponential);
    }

    #[test]
    fn sweep_rates_and_ordering() {
        let p = scalar_problem(exponential(), 30.0, 1024);
        let (r, sols) = sweep(&p, &[0.005, 0.04, 0.01, 0.02], None).unwrap();
        let mus: Vec<f64> = r.entries.iter().map(|e| e.mu).collect();
        assert_eq!(mus, vec![0.04, 0.02, 0.01, 0.005]);
        assert!(r.failures.is_empty() && sols.len() == 4);
        assert!(r.entries[1..].iter().all(|e| e.warm_started));
        assert!((r.fitted_slopes.amplitude_vs_mu.unwrap() - 1.0).abs() < 0.05);
        assert!(r.fitted_slopes.norm_w_vs_eps.unwrap() >= 1.5);
        assert!(r.norm_w_decreasing);
        assert_eq!(r.practical_mu0, 0.04);
    }

    #[test]
    fn warm_and_cold_solves_agree() {
        let p = scalar_problem(exponential(), 30.0, 1024);
        let seed = p.solve(0.02, None).unwrap();
        let warm = p.solve(0.01, Some(&seed.w)).unwrap();
        let cold = p.solve(0.01, None).unwrap();
        let diff = warm
            .u_phys
            .values()
            .iter()
            .zip(cold.u_phys.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff:e}");
    }

    #[test]
    fn no_admissible_parameter_fails_all() {
        let p = scalar_problem(exponential(), 30.0, 256);
        assert!(matches!(sweep(&p, &[-0.01, -0.02], None), Err(ContinuationError::AllFailed)));
    }

    #[test]
    fn gaussian_tail_is_exponential() {
        let g = KernelEntry::Gaussian { amplitude: -1.0, widths: vec![2f64.sqrt()] };
        let p = scalar_problem(g, 20.0, 1024);
        let sol = p.solve(0.01, None).unwrap();
        let r = tail_analysis(&sol, KernelTail::Exponential).unwrap();
        assert_eq!(r.class, TailClass::Exponential);
        assert!((r.rate - 0.1).abs() < 0.01, "{}", r.rate);
        assert!(r.predicted_exponent.is_none());
    }

    #[test]
    fn zero_field_tail_is_unresolved() {
        let p = scalar_problem(exponential(), 30.0, 256);
        let mut sol = p.solve(0.01, None).unwrap();
        sol.u_phys = Field::zeros(sol.u_phys.grid(), 1);
        assert!(matches!(
            tail_analysis(&sol, KernelTail::Exponential),
            Err(ContinuationError::WindowUnderResolved(_))
        ));
    }

    #[test]
    fn single_period_has_no_fit() {
        let p = scalar_problem(exponential(), 30.0, 1024);
        let r = periodic_study(&p, 0.01, &[8.0]).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert!(r.increments.is_empty() && r.semilog_slope.is_none() && r.loglog_slope.is_none());
    }

    #[test]
    fn periodic_increments_decay_exponentially() {
        let p = scalar_problem(exponential(), 30.0, 2048);
        let r = periodic_study(&p, 0.01, &[6.0, 7.0, 8.0, 9.0]).unwrap();
        assert!(r.monotone);
        let s = r.semilog_slope.unwrap();
        assert!((s + 2.0).abs() < 0.1, "{s}");
    }
}
