//! Pipeline orchestration: hypotheses, ground state, solves, artifacts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use nspike_core::continuation::{
    periodic_study, sweep, tail_analysis, write_entries_csv, write_periodic_csv, write_tail_csv, KernelTail, SpikeProblem,
    SweepEntry,
};
use nspike_core::groundstate::{check_nondegeneracy, NondegeneracyOptions};
use nspike_core::solver::SpikeSolution;
use nspike_core::hypotheses::{check_hypotheses, CheckOptions, Scaling};
use nspike_core::nonlinearity::{Nonlinearity, Polynomial};
use nspike_core::{KernelSpec, SolverOptions, SymmetryGroup, UniformGrid};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, Mode, RunConfig, ScalingChoice, SymmetryConfig};
use crate::output::{gnuplot_script, mu_tag, profile_csv, Artifacts};
use crate::presets::{self, PresetNotes};

/// Command-line overrides of the configuration.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub config: PathBuf,
    pub mode: Option<Mode>,
    pub out: Option<PathBuf>,
    pub mu: Option<f64>,
    pub full_newton: bool,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Hypothesis(String),
    Solver(String),
    Io(anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Hypothesis(_) => 2,
            Self::Solver(_) | Self::Io(_) => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "{e}"),
            Self::Hypothesis(e) => write!(f, "hypothesis failure: {e}"),
            Self::Solver(e) => write!(f, "solver failure: {e}"),
            Self::Io(e) => write!(f, "output failure: {e:#}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        Self::Io(e)
    }
}

/// The configuration turned into solver objects.
pub struct Resolved {
    pub kernel: KernelSpec,
    pub nonlinearity: Arc<dyn Nonlinearity>,
    pub scaling: Scaling,
    pub grid: UniformGrid,
    pub options: SolverOptions,
    pub preset: Option<PresetNotes>,
}

fn symmetry(cfg: &SymmetryConfig, dim: usize) -> Result<SymmetryGroup, ConfigError> {
    match cfg {
        SymmetryConfig::Named(name) => match name.as_str() {
            "plus_minus" => Ok(SymmetryGroup::plus_minus(dim)),
            "axis_reflections" => Ok(SymmetryGroup::axis_reflections(dim)),
            "trivial" => Ok(SymmetryGroup::trivial(dim)),
            other => Err(ConfigError::new(
                "symmetry",
                format!("unknown group '{other}' (expected plus_minus, axis_reflections, trivial or generator matrices)"),
            )),
        },
        SymmetryConfig::Generators(g) => {
            SymmetryGroup::from_rows(dim, g).map_err(|e| ConfigError::new("symmetry", e.to_string()))
        }
    }
}

pub fn resolve(cfg: &RunConfig, base: &Path) -> Result<Resolved, ConfigError> {
    let dim = cfg.dimension.unwrap_or(1);
    if !(1..=3).contains(&dim) {
        return Err(ConfigError::new("dimension", format!("expected 1, 2 or 3, got {dim}")));
    }
    let defaults = cfg.preset.as_deref().map(presets::defaults).transpose()?;
    let params = match cfg.preset.as_deref() {
        Some(name) => presets::resolve_parameters(name, &cfg.parameters)?,
        None if !cfg.parameters.is_empty() => {
            return Err(ConfigError::new("parameters", "parameters are only meaningful with a 'preset'"))
        }
        None => Default::default(),
    };
    let rows = cfg
        .kernel
        .clone()
        .or_else(|| defaults.as_ref().map(|d| d.kernel.clone()))
        .ok_or_else(|| ConfigError::new("kernel", "missing; give 'kernel' or a 'preset'"))?;
    let group = match &cfg.symmetry {
        Some(s) => symmetry(s, dim)?,
        None => symmetry(
            &SymmetryConfig::Named(defaults.as_ref().map_or("plus_minus", |d| d.symmetry).into()),
            dim,
        )?,
    };
    let kernel = KernelSpec::from_descriptors(dim, &rows, group, base).map_err(|e| ConfigError::new("kernel", e.to_string()))?;
    let (nonlinearity, preset): (Arc<dyn Nonlinearity>, Option<PresetNotes>) = match (&cfg.nonlinearity, &cfg.preset) {
        (Some(n), _) => {
            let p = Polynomial::new(n.components, n.terms.clone()).map_err(|e| ConfigError::new("nonlinearity", e))?;
            let notes = cfg.preset.as_ref().map(|name| PresetNotes {
                name: name.clone(),
                parameters: params.clone(),
                notes: vec!["nonlinearity overridden by the configuration".into()],
                fold: None,
            });
            (Arc::new(p), notes)
        }
        (None, Some(name)) => {
            let (n, notes) = presets::nonlinearity(name, &params, &kernel)?;
            (n, Some(notes))
        }
        (None, None) => return Err(ConfigError::new("nonlinearity", "missing; give 'nonlinearity' or a 'preset'")),
    };
    if nonlinearity.components() != kernel.components() {
        return Err(ConfigError::new(
            "kernel, nonlinearity",
            format!(
                "kernel has {} components but nonlinearity has {}",
                kernel.components(),
                nonlinearity.components()
            ),
        ));
    }
    let scaling = match cfg.scaling.or(defaults.as_ref().map(|d| d.scaling)) {
        Some(ScalingChoice::Cubic) => Scaling::Cubic,
        _ => Scaling::Quadratic,
    };
    let grid = match &cfg.grid {
        Some(g) => UniformGrid::new(dim, g.half_width, g.points),
        None => UniformGrid::default_for(dim),
    }
    .map_err(|e| ConfigError::new("grid", e.to_string()))?;
    if cfg.ell < 2 {
        return Err(ConfigError::new("ell", format!("expected ℓ ≥ 2, got {}", cfg.ell)));
    }
    let t = &cfg.tolerances;
    let mut options = SolverOptions {
        ell: cfg.ell,
        full_newton: cfg.full_newton,
        ..SolverOptions::default()
    };
    let set = |field: &str, v: Option<f64>, slot: &mut f64| -> Result<(), ConfigError> {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::new(format!("tolerances.{field}"), format!("expected a positive number, got {v}")));
            }
            *slot = v;
        }
        Ok(())
    };
    set("tol_inner", t.tol_inner, &mut options.tol_inner)?;
    set("tol_outer", t.tol_outer, &mut options.tol_outer)?;
    set("inner_radius", t.inner_radius, &mut options.inner_radius)?;
    set("outer_radius", t.outer_radius, &mut options.outer_radius)?;
    set("gmres_tol", t.gmres_tol, &mut options.gmres.tol)?;
    set("symmetry_drift", t.symmetry_drift, &mut options.symmetry_drift)?;
    if let Some(m) = t.max_inner {
        options.max_inner = m;
    }
    if let Some(m) = t.max_outer {
        options.max_outer = m;
    }
    Ok(Resolved {
        kernel,
        nonlinearity,
        scaling,
        grid,
        options,
        preset,
    })
}

/// Output directory: `--out`, then `NSPIKE_OUT`, then the config, then `nspike_out`.
pub fn output_dir(inv: &Invocation, cfg: &RunConfig) -> PathBuf {
    inv.out
        .clone()
        .or_else(|| std::env::var_os("NSPIKE_OUT").filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("nspike_out"))
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    status: &'a str,
    exit_code: i32,
    error: Option<String>,
    mode: Mode,
    config: &'a RunConfig,
    preset: Option<&'a PresetNotes>,
    hypotheses_passed: Option<bool>,
    results: Value,
    files: &'a [crate::output::FileRecord],
    /// Wall-clock seconds; excluded from the reproducible artifacts.
    timing: Value,
}

/// What a finished run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub out_dir: PathBuf,
    pub error: Option<RunError>,
}

pub fn run(inv: &Invocation) -> RunOutcome {
    let mut cfg = match RunConfig::from_path(&inv.config) {
        Ok(c) => c,
        Err(e) => {
            return RunOutcome {
                exit_code: 1,
                out_dir: PathBuf::new(),
                error: Some(e.into()),
            }
        }
    };
    if let Some(m) = inv.mode {
        cfg.mode = m;
    }
    if let Some(mu) = inv.mu {
        cfg.mu = Some(mu);
    }
    cfg.full_newton |= inv.full_newton;
    let out_dir = output_dir(inv, &cfg);
    let base = inv.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolved = match resolve(&cfg, &base) {
        Ok(r) => r,
        Err(e) => {
            return RunOutcome {
                exit_code: 1,
                out_dir,
                error: Some(e.into()),
            }
        }
    };
    let mut artifacts = match Artifacts::create(&out_dir) {
        Ok(a) => a,
        Err(e) => {
            return RunOutcome {
                exit_code: 3,
                out_dir,
                error: Some(e.into()),
            }
        }
    };
    let mut state = RunState::default();
    let result = execute(&cfg, &resolved, &mut artifacts, &mut state);
    let (status, exit_code, error) = match &result {
        Ok(()) => ("success", 0, None),
        Err(e) => (
            match e {
                RunError::Config(_) => "config_error",
                RunError::Hypothesis(_) => "hypothesis_failure",
                _ => "solver_failure",
            },
            e.exit_code(),
            Some(e.to_string()),
        ),
    };
    let dim = resolved.kernel.dim();
    let finish = (|| -> anyhow::Result<()> {
        let script = gnuplot_script(artifacts.files(), dim);
        artifacts.write("plots.gp", &script)?;
        let summary = Summary {
            status,
            exit_code,
            error,
            mode: cfg.mode,
            config: &cfg,
            preset: resolved.preset.as_ref(),
            hypotheses_passed: state.hypotheses_passed,
            results: state.results.take().unwrap_or(Value::Null),
            files: artifacts.files(),
            timing: Value::Object(state.timing.clone()),
        };
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        artifacts.write_unlisted("summary.json", text.as_bytes())
    })();
    match (result, finish) {
        (Err(e), _) => RunOutcome {
            exit_code,
            out_dir,
            error: Some(e),
        },
        (Ok(()), Err(e)) => RunOutcome {
            exit_code: 3,
            out_dir,
            error: Some(RunError::Io(e)),
        },
        (Ok(()), Ok(())) => RunOutcome {
            exit_code: 0,
            out_dir,
            error: None,
        },
    }
}

#[derive(Default)]
struct RunState {
    hypotheses_passed: Option<bool>,
    results: Option<Value>,
    timing: serde_json::Map<String, Value>,
}

impl RunState {
    fn time(&mut self, key: &str, start: Instant) {
        self.timing.insert(key.into(), json!(start.elapsed().as_secs_f64()));
    }
}

fn solver_err(e: impl fmt::Display) -> RunError {
    RunError::Solver(e.to_string())
}

fn solution_json(sol: &SpikeSolution) -> Value {
    json!({
        "mu": sol.mu,
        "eps": sol.eps,
        "peak": sol.peak,
        "norm_w": sol.norm_w,
        "norm_vh": sol.norm_vh,
        "norm_uperp": sol.norm_uperp,
        "residual_original": sol.residual_original,
        "symmetry_defect": sol.symmetry_defect,
        "iterations_inner": sol.iterations_inner,
        "iterations_outer": sol.iterations_outer,
        "gmres_iterations": sol.gmres_iterations,
        "tolerance": sol.tolerance,
        "transfer_residual": sol.transfer_residual,
        "residual_history": sol.history,
    })
}

fn write_entries(art: &mut Artifacts, entries: &[SweepEntry]) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    write_entries_csv(entries, &mut buf)?;
    art.write("diagnostics.csv", &buf)
}

fn write_profile(art: &mut Artifacts, sol: &SpikeSolution) -> anyhow::Result<()> {
    art.write(&format!("profile_mu_{}.csv", mu_tag(sol.mu)), &profile_csv(sol))
}

fn execute(cfg: &RunConfig, r: &Resolved, art: &mut Artifacts, state: &mut RunState) -> Result<(), RunError> {
    let start = Instant::now();
    let opts = CheckOptions {
        scaling: r.scaling,
        ..CheckOptions::default()
    };
    let (report, outcome) = check_hypotheses(&r.kernel, r.nonlinearity.as_ref(), &opts);
    art.write_json("hypotheses.json", &report)?;
    state.hypotheses_passed = Some(outcome.is_ok());
    state.time("hypotheses", start);
    let bif = outcome.map_err(|e| RunError::Hypothesis(format!("{e} [{}]", e.code())))?;
    let mut results = serde_json::Map::new();
    results.insert("bifurcation".into(), json!(bif));
    state.results = Some(Value::Object(results.clone()));
    if cfg.mode == Mode::HypothesesOnly {
        return Ok(());
    }

    let start = Instant::now();
    let problem = SpikeProblem::new(r.kernel.clone(), bif, r.nonlinearity.clone(), r.grid.clone(), r.options)
        .map_err(solver_err)?;
    state.time("ground_state", start);
    let first_mu = match cfg.mode {
        Mode::Sweep => cfg.sweep_mus()?.into_iter().fold(f64::NEG_INFINITY, f64::max),
        _ => cfg.single_mu()?,
    };
    if cfg.nondegeneracy {
        let start = Instant::now();
        let group = problem.system(first_mu).map_err(solver_err)?.group;
        let nd_opts = NondegeneracyOptions {
            seed: cfg.seed,
            ..NondegeneracyOptions::default()
        };
        let nd = check_nondegeneracy(&problem.groundstate, &group, &r.grid, nd_opts);
        state.time("nondegeneracy", start);
        match nd {
            Ok(rep) => {
                results.insert("nondegeneracy".into(), json!(rep));
            }
            Err(e) => {
                state.results = Some(Value::Object(results));
                return Err(RunError::Hypothesis(format!("ground-state nondegeneracy: {e}")));
            }
        }
    }
    state.results = Some(Value::Object(results.clone()));

    let start = Instant::now();
    let outcome = match cfg.mode {
        Mode::Solve => {
            let sol = problem.solve(first_mu, None).map_err(solver_err)?;
            write_entries(art, &[SweepEntry::new(&sol, false)])?;
            write_profile(art, &sol)?;
            results.insert("solution".into(), solution_json(&sol));
            Ok(())
        }
        Mode::Tail => {
            let sol = problem.solve(first_mu, None).map_err(solver_err)?;
            write_entries(art, &[SweepEntry::new(&sol, false)])?;
            write_profile(art, &sol)?;
            results.insert("solution".into(), solution_json(&sol));
            match tail_analysis(&sol, KernelTail::of(&r.kernel)) {
                Ok(tail) => {
                    let mut buf = Vec::new();
                    write_tail_csv(&tail, &mut buf).map_err(anyhow::Error::from)?;
                    art.write(&format!("tail_mu_{}.csv", mu_tag(sol.mu)), &buf)?;
                    results.insert("tail".into(), json!(tail));
                    Ok(())
                }
                Err(e) => Err(solver_err(e)),
            }
        }
        Mode::Sweep => {
            let mus = cfg.sweep_mus()?;
            let (result, solutions) = sweep(&problem, &mus, Some(KernelTail::of(&r.kernel))).map_err(solver_err)?;
            write_entries(art, &result.entries)?;
            for sol in &solutions {
                write_profile(art, sol)?;
            }
            for t in &result.tail {
                if let Some(rep) = &t.report {
                    let mut buf = Vec::new();
                    write_tail_csv(rep, &mut buf).map_err(anyhow::Error::from)?;
                    art.write(&format!("tail_mu_{}.csv", mu_tag(t.mu)), &buf)?;
                }
            }
            let failed = result.failures.len();
            results.insert("continuation".into(), json!(result));
            if failed > 0 {
                Err(RunError::Solver(format!("{failed} of {} parameter values failed", mus.len())))
            } else {
                Ok(())
            }
        }
        Mode::Periodic => {
            let report = periodic_study(&problem, first_mu, &cfg.l0s()?).map_err(solver_err)?;
            let mut buf = Vec::new();
            write_periodic_csv(&report, &mut buf).map_err(anyhow::Error::from)?;
            art.write("periodic.csv", &buf)?;
            results.insert("periodic".into(), json!(report));
            Ok(())
        }
        Mode::HypothesesOnly => Ok(()),
    };
    state.time("solve", start);
    state.results = Some(Value::Object(results));
    outcome
}
