//! Named application problems. Kernels follow the solver convention
//! `U + K∗U + N(U; μ) = 0`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nspike_core::kernel::{KernelDescriptor, KernelSpec};
use nspike_core::nonlinearity::{
    eval_vec, fold_to_transcritical, locate_fold, FnNonlinearity, FoldInfo, Monomial, Nonlinearity, Polynomial,
};
use serde::Serialize;

use crate::config::{ConfigError, ScalingChoice};

pub const PRESETS: [&str; 5] = ["scalar_exponential", "k2_test", "nls_cubic", "neural_field", "cahn_morral_like"];

#[derive(Debug, Clone)]
pub struct PresetDefaults {
    pub kernel: Vec<Vec<KernelDescriptor>>,
    pub symmetry: &'static str,
    pub scaling: ScalingChoice,
    pub components: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PresetNotes {
    pub name: String,
    pub parameters: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub fold: Option<FoldInfo>,
}

fn unknown_preset(name: &str) -> ConfigError {
    ConfigError::new("preset", format!("unknown preset '{name}'; available: {}", PRESETS.join(", ")))
}

fn exponential(amplitude: f64) -> KernelDescriptor {
    KernelDescriptor::analytic("exponential", amplitude, 1.0)
}

fn zero() -> KernelDescriptor {
    KernelDescriptor::analytic("zero", 0.0, 1.0)
}

/// Parameters accepted by each preset, with defaults.
fn accepted(name: &str) -> &'static [(&'static str, f64)] {
    match name {
        "neural_field" => &[("theta", 10.0), ("h", 0.35)],
        _ => &[],
    }
}

pub fn resolve_parameters(name: &str, given: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>, ConfigError> {
    if !PRESETS.contains(&name) {
        return Err(unknown_preset(name));
    }
    let table = accepted(name);
    let mut out: BTreeMap<String, f64> = table.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in given {
        if !table.iter().any(|(n, _)| n == k) {
            let names: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
            return Err(ConfigError::new(
                format!("parameters.{k}"),
                format!("not a parameter of preset '{name}' (accepted: [{}])", names.join(", ")),
            ));
        }
        if !v.is_finite() {
            return Err(ConfigError::new(format!("parameters.{k}"), "must be finite"));
        }
        out.insert(k.clone(), *v);
    }
    Ok(out)
}

pub fn defaults(name: &str) -> Result<PresetDefaults, ConfigError> {
    let scalar = |kernel: KernelDescriptor, scaling| PresetDefaults {
        kernel: vec![vec![kernel]],
        symmetry: "plus_minus",
        scaling,
        components: 1,
    };
    Ok(match name {
        "scalar_exponential" | "neural_field" | "cahn_morral_like" => scalar(exponential(-1.0), ScalingChoice::Quadratic),
        "nls_cubic" => scalar(KernelDescriptor::analytic("gaussian", -1.0, 1.0), ScalingChoice::Cubic),
        "k2_test" => PresetDefaults {
            kernel: vec![vec![exponential(-1.0), zero()], vec![zero(), exponential(-0.5)]],
            symmetry: "plus_minus",
            scaling: ScalingChoice::Quadratic,
            components: 2,
        },
        other => return Err(unknown_preset(other)),
    })
}

/// `U − Ψ(U; μ)` sign-adjusted to the solver convention, `Ψ` the inverse of
/// `S(u) = 1/(1 + e^{−θ(u − h − μ)})`.
pub fn neural_nonlinearity(theta: f64, h: f64) -> FnNonlinearity {
    FnNonlinearity::new(1, format!("Ψ(U; μ) − U, θ = {theta}, h = {h}"), move |u, mu, out| {
        let x = u[0];
        out[0] = if x > 0.0 && x < 1.0 {
            h + mu + (x / (1.0 - x)).ln() / theta - x
        } else {
            f64::NAN
        };
    })
    .with_jacobian(move |u, _| {
        let x = u[0];
        let d = if x > 0.0 && x < 1.0 { 1.0 / (theta * x * (1.0 - x)) - 1.0 } else { f64::NAN };
        nalgebra::DMatrix::from_element(1, 1, d)
    })
}

/// Fold of `linear·U + N(U; μ) = 0` nearest `μ = 0`, scanning `U` over `range`.
pub fn nearest_fold(n: &dyn Nonlinearity, linear: f64, range: (f64, f64)) -> Option<(f64, f64)> {
    let gu = |u: f64| linear + n.jacobian(&[u], 0.0)[(0, 0)];
    let g = |u: f64, mu: f64| linear * u + eval_vec(n, &[u], mu)[0];
    let samples = 2000;
    let at = |i: usize| range.0 + (range.1 - range.0) * i as f64 / samples as f64;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..samples {
        let (a, b) = (at(i), at(i + 1));
        let (fa, fb) = (gu(a), gu(b));
        if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
            continue;
        }
        let (mut lo, mut hi) = (a, b);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if gu(mid).signum() == fa.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let u = 0.5 * (lo + hi);
        let mut mu = 0.0;
        for _ in 0..30 {
            let d = 1e-6;
            let slope = (g(u, mu + d) - g(u, mu - d)) / (2.0 * d);
            if slope == 0.0 || !slope.is_finite() {
                break;
            }
            mu -= g(u, mu) / slope;
        }
        if let Ok(fold) = locate_fold(n, linear, (u, mu)) {
            if best.map_or(true, |b| fold.1.abs() < b.1.abs()) {
                best = Some(fold);
            }
        }
    }
    best
}

/// Builds the nonlinearity for `name` against the resolved scalar or vector kernel.
pub fn nonlinearity(
    name: &str,
    params: &BTreeMap<String, f64>,
    kernel: &KernelSpec,
) -> Result<(Arc<dyn Nonlinearity>, PresetNotes), ConfigError> {
    let mut notes = PresetNotes {
        name: name.into(),
        parameters: params.clone(),
        notes: Vec::new(),
        fold: None,
    };
    let scalar_only = |n: &str| -> Result<(), ConfigError> {
        if kernel.components() != 1 {
            return Err(ConfigError::new(
                "kernel",
                format!("preset '{n}' is scalar but the kernel has {} components", kernel.components()),
            ));
        }
        Ok(())
    };
    let linear = || 1.0 + kernel.moments().0[(0, 0)];
    let n: Arc<dyn Nonlinearity> = match name {
        "scalar_exponential" => {
            scalar_only(name)?;
            notes.notes.push("N(u; μ) = μu − u²".into());
            Arc::new(Polynomial::scalar(&[(1.0, 1, 1), (-1.0, 0, 2)]))
        }
        "nls_cubic" => {
            scalar_only(name)?;
            notes.notes.push("−u + J∗u − μu + u³ = 0 with J = −K; cubic amplitude scaling ε".into());
            Arc::new(Polynomial::scalar(&[(1.0, 1, 1), (-1.0, 0, 3)]))
        }
        "k2_test" => {
            if kernel.components() != 2 {
                return Err(ConfigError::new("kernel", "preset 'k2_test' needs a 2-component kernel"));
            }
            notes.notes.push("N = (μu₁ − u₁² + u₁u₂, u₁²)".into());
            let m = |row, coeff, mu_power, powers: Vec<u32>| Monomial { row, coeff, mu_power, powers };
            Arc::new(
                Polynomial::new(
                    2,
                    vec![m(0, 1.0, 1, vec![1, 0]), m(0, -1.0, 0, vec![2, 0]), m(0, 1.0, 0, vec![1, 1]), m(1, 1.0, 0, vec![2, 0])],
                )
                .map_err(|e| ConfigError::new("preset", e))?,
            )
        }
        "neural_field" | "cahn_morral_like" => {
            scalar_only(name)?;
            let (base, range): (Arc<dyn Nonlinearity>, (f64, f64)) = if name == "neural_field" {
                let (theta, h) = (params["theta"], params["h"]);
                if theta <= 4.0 {
                    return Err(ConfigError::new("parameters.theta", "the sigmoid has no fold for θ ≤ 4"));
                }
                notes.notes.push(format!(
                    "stationary neural field u = J∗S(u) in U = S(u), threshold h + μ; S(u) = 1/(1 + e^(−{theta}(u − {h} − μ)))"
                ));
                (Arc::new(neural_nonlinearity(theta, h)), (1e-6, 1.0 - 1e-6))
            } else {
                notes.notes.push("−u + J∗u − W′(u) = μ with W′(u) = u³ − u".into());
                (Arc::new(Polynomial::scalar(&[(1.0, 0, 3), (-1.0, 0, 1), (1.0, 1, 0)])), (-3.0, 3.0))
            };
            let lin = linear();
            let fold = nearest_fold(base.as_ref(), lin, range)
                .ok_or_else(|| ConfigError::new("preset", format!("no fold of the constant states for '{name}'")))?;
            let (n, info) = fold_to_transcritical(base, lin, fold).map_err(|e| ConfigError::new("preset", e.to_string()))?;
            notes.notes.push(format!(
                "unfolded about U = {:.12}, μ = {:.12}; μ = μ_f + {}·μ̃², spike variable V = U − U_branch(μ̃)",
                info.state, info.mu, info.mu_scale
            ));
            notes.fold = Some(info);
            n
        }
        other => return Err(unknown_preset(other)),
    };
    Ok((n, notes))
}
