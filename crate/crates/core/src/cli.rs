//! Config-driven runs: a JSON [`RunConfig`] selects a task, the task writes
//! its CSV artifacts and a JSON [`RunReport`] into the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::hopf::{
    registry, residual_convergence, verify_weak_solution, FieldGrid, HopfField, HopfOptions,
    HopfSolver, LinearTable, Profile, SeparableInitialData, WeakSolutionTolerances,
};
use crate::interp::uniform_nodes;
use crate::model::{empirical_rho, ModelSpec, RhoSequence};
use crate::potentials::{psi0, psi_layer, PotentialRules, QuadratureOrders};
use crate::quadrature::GaussHermiteRule;
use crate::recursion::{compute_rho, DEFAULT_RHO_ORDER};
use crate::saddle::{
    solve_fixed_point, solve_grid, Diagnostic, FixedPointOptions, GridOptions, Method,
    SaddlePointResult, SaddleProblem,
};
use crate::simulate::{estimate_free_energy, FreeEnergyEstimate};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Rho,
    PsiTable,
    Saddle,
    HopfCheck,
    Simulate,
    Compare,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmpiricalParams {
    pub n: usize,
    pub replications: usize,
}

impl Default for EmpiricalParams {
    fn default() -> Self {
        EmpiricalParams { n: 200, replications: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsiTableParams {
    /// Layer `l` of `Psi_l`; 0 tabulates only `Psi_0`.
    pub layer: usize,
    pub h1_cells: usize,
    pub h2_cells: usize,
    pub h2_max: f64,
}

impl Default for PsiTableParams {
    fn default() -> Self {
        PsiTableParams { layer: 1, h1_cells: 10, h2_cells: 10, h2_max: 4.0 }
    }
}

/// Initial data of a Hopf check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HopfDataSource {
    Registry { name: String },
    /// `psi1 = alpha_1 Psi_1(., beta; rho_0)`, `psi2 = Psi_0` of a depth-1 model,
    /// tabulated on `cells + 1` nodes each.
    Model { cells: usize, y2_max: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HopfCheckParams {
    pub data: HopfDataSource,
    pub options: HopfOptions,
    /// Cells per axis of the field grid.
    pub cells: usize,
    /// Also computes the field at half the spacing and compares residuals.
    pub convergence: bool,
    pub tolerances: WeakSolutionTolerances,
}

impl Default for HopfCheckParams {
    fn default() -> Self {
        HopfCheckParams {
            data: HopfDataSource::Registry { name: "quadratic-hyperbolic".into() },
            options: HopfOptions::default(),
            cells: 32,
            convergence: false,
            tolerances: WeakSolutionTolerances::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateParams {
    pub n: Vec<usize>,
    pub replications: usize,
}

impl Default for SimulateParams {
    fn default() -> Self {
        SimulateParams { n: vec![8, 12], replications: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareParams {
    /// Finite-size slack added to the statistical band.
    pub slack: f64,
    pub stderr_multiplier: f64,
}

impl Default for CompareParams {
    fn default() -> Self {
        CompareParams { slack: 0.05, stderr_multiplier: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskParams {
    pub orders: QuadratureOrders,
    pub rho_order: usize,
    pub empirical: Option<EmpiricalParams>,
    pub psi_table: PsiTableParams,
    pub methods: Vec<Method>,
    pub grid: GridOptions,
    /// The restart seed is taken from the run seed.
    pub fixed_point: FixedPointOptions,
    pub hopf: HopfCheckParams,
    pub simulate: SimulateParams,
    pub compare: CompareParams,
}

impl Default for TaskParams {
    fn default() -> Self {
        TaskParams {
            orders: QuadratureOrders::default(),
            rho_order: DEFAULT_RHO_ORDER,
            empirical: None,
            psi_table: PsiTableParams::default(),
            methods: vec![Method::Grid, Method::FixedPoint],
            grid: GridOptions::default(),
            fixed_point: FixedPointOptions::default(),
            hopf: HopfCheckParams::default(),
            simulate: SimulateParams::default(),
            compare: CompareParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub task: Task,
    pub model: ModelSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub params: TaskParams,
}

impl RunConfig {
    /// Parses and validates a config given as JSON.
    pub fn from_value(value: Value) -> Result<Self> {
        let config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::invalid(path, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        self.model.validate().map_err(|e| e.within("model"))?;
        PotentialRules::new(self.params.orders).map_err(|e| match e {
            Error::Precondition(reason) => Error::invalid("params.orders", reason),
            other => other,
        })?;
        Ok(())
    }
}

/// Command-line adjustments applied on top of the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// `dotted.key=value` pairs; the value is parsed as JSON when possible.
    pub set: Vec<String>,
}

fn set_path(root: &mut Value, dotted: &str, new: Value) -> Result<()> {
    let normalized = dotted.replace('[', ".").replace(']', "");
    let keys: Vec<&str> = normalized.split('.').filter(|k| !k.is_empty()).collect();
    if keys.is_empty() {
        return Err(Error::invalid(dotted, "empty override key"));
    }
    let mut node = root;
    for (i, key) in keys.iter().enumerate() {
        let last = i + 1 == keys.len();
        node = match node {
            Value::Array(items) => {
                let idx: usize = key
                    .parse()
                    .map_err(|_| Error::invalid(dotted, format!("`{key}` is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| Error::invalid(dotted, format!("index {idx} out of range ({len})")))?
            }
            Value::Object(map) => {
                if last {
                    map.insert(key.to_string(), Value::Null);
                }
                map.entry(key.to_string()).or_insert_with(|| json!({}))
            }
            _ => return Err(Error::invalid(dotted, format!("`{key}` is not inside an object or array"))),
        };
    }
    *node = new;
    Ok(())
}

/// Reads `path`, applies `overrides` and validates.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let mut value: Value = serde_json::from_str(&text)?;
    for item in &overrides.set {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::invalid(item.as_str(), "override must look like key=value"))?;
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut value, key, parsed)?;
    }
    if let Some(seed) = overrides.seed {
        set_path(&mut value, "seed", json!(seed))?;
    }
    if let Some(out) = &overrides.out {
        set_path(&mut value, "output.dir", json!(out))?;
    }
    RunConfig::from_value(value)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub software_version: String,
    pub config: RunConfig,
    pub results: Value,
    pub diagnostics: Vec<Diagnostic>,
    /// Files written next to the report, relative to the output directory.
    pub artifacts: Vec<String>,
    pub wall_time_seconds: f64,
}

struct TaskOutput {
    results: Value,
    diagnostics: Vec<Diagnostic>,
    artifacts: Vec<String>,
}

/// Loads the config, runs its task, and writes `report.json` plus the task
/// artifacts into the output directory.
pub fn run(config_path: &Path, overrides: &Overrides) -> Result<RunReport> {
    let config = load_config(config_path, overrides)?;
    run_config(&config)
}

pub fn run_config(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let dir = &config.output.dir;
    fs::create_dir_all(dir)?;
    let out = match config.task {
        Task::Rho => task_rho(config, dir)?,
        Task::PsiTable => task_psi_table(config, dir)?,
        Task::Saddle => task_saddle(config, dir)?,
        Task::HopfCheck => task_hopf(config, dir)?,
        Task::Simulate => task_simulate(config, dir)?,
        Task::Compare => task_compare(config, dir)?,
    };
    let report = RunReport {
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        results: out.results,
        diagnostics: out.diagnostics,
        artifacts: out.artifacts,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(dir.join("report.json"), text)?;
    Ok(report)
}

fn rho_of(config: &RunConfig) -> Result<RhoSequence> {
    compute_rho(&config.model, &GaussHermiteRule::new(config.params.rho_order)?)
}

fn task_rho(config: &RunConfig, dir: &Path) -> Result<TaskOutput> {
    let rho = rho_of(config)?;
    let mut results = json!({ "rho": rho.values });
    let mut diagnostics = Vec::new();
    let mut w = csv::Writer::from_path(dir.join("rho.csv"))?;
    w.write_record(["layer", "rho"])?;
    for (l, r) in rho.values.iter().enumerate() {
        w.write_record([l.to_string(), r.to_string()])?;
    }
    w.flush()?;
    let mut artifacts = vec!["rho.csv".to_string()];
    if let Some(e) = &config.params.empirical {
        let emp = empirical_rho(&config.model, e.n, e.replications, config.seed)?;
        let stderr = (emp.variance / emp.values.len() as f64).sqrt();
        let rho_l = rho.get(config.model.depth());
        diagnostics.push(Diagnostic::new(
            "empirical-rho-z",
            (emp.mean - rho_l) / stderr,
            format!("(empirical mean - rho_L) / stderr at n = {}", e.n),
        ));
        results["empirical"] = json!({
            "n": emp.n,
            "replications": emp.values.len(),
            "mean": emp.mean,
            "variance": emp.variance,
            "stderr": stderr,
        });
        let mut w = csv::Writer::from_path(dir.join("rho_empirical.csv"))?;
        w.write_record(["rep", "value", "seed"])?;
        for (r, v) in emp.values.iter().enumerate() {
            w.write_record([r.to_string(), v.to_string(), config.seed.to_string()])?;
        }
        w.flush()?;
        artifacts.push("rho_empirical.csv".into());
    }
    Ok(TaskOutput { results, diagnostics, artifacts })
}

fn task_psi_table(config: &RunConfig, dir: &Path) -> Result<TaskOutput> {
    let p = &config.params.psi_table;
    let rules = PotentialRules::new(config.params.orders)?;
    let rho = rho_of(config)?;
    let mut artifacts = Vec::new();

    let r_nodes = uniform_nodes(0.0, p.h2_max, p.h2_cells);
    let psi0_values = r_nodes
        .iter()
        .map(|&r| psi0(r, &config.model.prior, &rules.prior))
        .collect::<Result<Vec<f64>>>()?;
    let mut w = csv::Writer::from_path(dir.join("psi0.csv"))?;
    w.write_record(["r", "psi0"])?;
    for (r, v) in r_nodes.iter().zip(&psi0_values) {
        w.write_record([r.to_string(), v.to_string()])?;
    }
    w.flush()?;
    artifacts.push("psi0.csv".to_string());

    let mut results = json!({ "psi0_points": r_nodes.len() });
    if p.layer >= 1 {
        if p.layer > config.model.depth() {
            return Err(Error::invalid(
                "params.psi_table.layer",
                format!("model has {} layers", config.model.depth()),
            ));
        }
        let r = rho.get(p.layer - 1);
        let act = config.model.activation(p.layer);
        let points: Vec<(f64, f64)> = uniform_nodes(0.0, r, p.h1_cells)
            .into_iter()
            .flat_map(|h1| r_nodes.iter().map(move |&h2| (h1, h2)))
            .collect();
        let values = points
            .par_iter()
            .map(|&(h1, h2)| psi_layer(h1, h2, r, act, &rules))
            .collect::<Result<Vec<f64>>>()?;
        let mut w = csv::Writer::from_path(dir.join("psi_layer.csv"))?;
        w.write_record(["h1", "h2", "rho", "psi"])?;
        for ((h1, h2), v) in points.iter().zip(&values) {
            w.write_record([h1.to_string(), h2.to_string(), r.to_string(), v.to_string()])?;
        }
        w.flush()?;
        artifacts.push("psi_layer.csv".to_string());
        results["layer"] = json!(p.layer);
        results["rho"] = json!(r);
        results["psi_layer_points"] = json!(points.len());
    }
    Ok(TaskOutput { results, diagnostics: Vec::new(), artifacts })
}

fn saddle_problem(config: &RunConfig) -> Result<SaddleProblem> {
    SaddleProblem::new(
        config.model.clone(),
        rho_of(config)?,
        PotentialRules::new(config.params.orders)?,
    )
}

struct SaddleRun {
    grid: Option<SaddlePointResult>,
    fixed_point: Option<SaddlePointResult>,
}

impl SaddleRun {
    /// Fixed-point value when available, else the grid value.
    fn value(&self) -> f64 {
        self.fixed_point
            .as_ref()
            .or(self.grid.as_ref())
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    }
}

fn run_saddle(config: &RunConfig) -> Result<SaddleRun> {
    let problem = saddle_problem(config)?;
    let methods = &config.params.methods;
    if methods.is_empty() {
        return Err(Error::invalid("params.methods", "no saddle method selected"));
    }
    let grid = if methods.contains(&Method::Grid) {
        Some(solve_grid(&problem, &config.params.grid)?)
    } else {
        None
    };
    let fixed_point = if methods.contains(&Method::FixedPoint) {
        let options = FixedPointOptions { seed: config.seed, ..config.params.fixed_point };
        Some(solve_fixed_point(&problem, &options)?)
    } else {
        None
    };
    Ok(SaddleRun { grid, fixed_point })
}

fn write_saddle_csv(run: &SaddleRun, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "layer", "y1", "y2", "z1", "z2", "value"])?;
    for (name, r) in [("grid", &run.grid), ("fixed-point", &run.fixed_point)] {
        if let Some(r) = r {
            for (i, v) in r.variables.layers.iter().enumerate() {
                w.write_record([
                    name.to_string(),
                    (i + 1).to_string(),
                    v.y1.to_string(),
                    v.y2.to_string(),
                    v.z1.to_string(),
                    v.z2.to_string(),
                    r.value.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn saddle_results(run: &SaddleRun) -> (Value, Vec<Diagnostic>) {
    let mut diagnostics = Vec::new();
    for r in [&run.grid, &run.fixed_point].into_iter().flatten() {
        let tag = match r.method {
            Method::Grid => "grid",
            Method::FixedPoint => "fixed-point",
        };
        for d in &r.diagnostics {
            diagnostics.push(Diagnostic::new(&format!("{tag}.{}", d.name), d.value, d.detail.clone()));
        }
    }
    let mut results = json!({ "grid": run.grid, "fixed_point": run.fixed_point });
    if let (Some(g), Some(f)) = (&run.grid, &run.fixed_point) {
        let variation = g.diagnostic("cell-variation").map(|d| d.value).unwrap_or(0.0);
        let tolerance = (3e-3f64).max(2.0 * variation);
        results["difference"] = json!(g.value - f.value);
        results["agreement_tolerance"] = json!(tolerance);
        results["agree"] = json!((g.value - f.value).abs() <= tolerance);
    }
    (results, diagnostics)
}

fn task_saddle(config: &RunConfig, dir: &Path) -> Result<TaskOutput> {
    let run = run_saddle(config)?;
    write_saddle_csv(&run, &dir.join("saddle.csv"))?;
    let (results, diagnostics) = saddle_results(&run);
    Ok(TaskOutput { results, diagnostics, artifacts: vec!["saddle.csv".into()] })
}

/// `alpha_1 Psi_1(., beta; rho_0)` and `Psi_0` of a depth-1 model as tables.
pub fn model_initial_data(
    model: &ModelSpec,
    rho: &RhoSequence,
    rules: &PotentialRules,
    cells: usize,
    y2_max: f64,
) -> Result<SeparableInitialData> {
    if model.depth() != 1 {
        return Err(Error::Unsupported(format!(
            "model-derived Hopf data needs a depth-1 model (got depth {})",
            model.depth()
        )));
    }
    let r = rho.get(0);
    let act = model.activation(1);
    let y1 = uniform_nodes(0.0, r, cells);
    let v1 = y1
        .par_iter()
        .map(|&y| Ok(model.alpha(1) * psi_layer(y, model.beta, r, act, rules)?))
        .collect::<Result<Vec<f64>>>()?;
    let y2 = uniform_nodes(0.0, y2_max, cells);
    let v2 = y2
        .iter()
        .map(|&y| psi0(y, &model.prior, &rules.prior))
        .collect::<Result<Vec<f64>>>()?;
    SeparableInitialData::new(
        Profile::Table(LinearTable::new(y1, v1)?),
        Profile::Table(LinearTable::new(y2, v2)?),
        model.alpha(0),
        r,
    )
}

fn task_hopf(config: &RunConfig, dir: &Path) -> Result<TaskOutput> {
    let p = &config.params.hopf;
    let data = match &p.data {
        HopfDataSource::Registry { name } => registry()
            .into_iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d)
            .ok_or_else(|| {
                let names: Vec<&str> = registry().iter().map(|(n, _)| *n).collect();
                Error::invalid("params.hopf.data.name", format!("unknown entry; known: {names:?}"))
            })?,
        HopfDataSource::Model { cells, y2_max } => {
            let rules = PotentialRules::new(config.params.orders)?;
            model_initial_data(&config.model, &rho_of(config)?, &rules, *cells, *y2_max)?
        }
    };
    let solver = HopfSolver::new(data.clone(), &p.options)?;

    let mut initial_error: f64 = 0.0;
    let n0 = p.cells;
    for i in 0..=n0 {
        for j in 0..=n0 {
            let x = [data.rho * i as f64 / n0 as f64, solver.h2_max() * j as f64 / n0 as f64];
            let f = solver.evaluate(0.0, x)?.value;
            initial_error = initial_error.max((f - data.eval(x)).abs());
        }
    }
    let at_one = solver.evaluate(1.0, [0.0, 0.0])?;

    let grid = FieldGrid::cubic(p.cells);
    let (field, study): (HopfField, Option<_>) = if p.convergence {
        let (study, coarse, _) = residual_convergence(&solver, grid, p.tolerances.band_cells)?;
        (coarse, Some(study))
    } else {
        (HopfField::compute(&solver, grid)?, None)
    };
    let report = verify_weak_solution(&field, &p.tolerances);
    field.write_csv(&dir.join("hopf_field.csv"))?;
    let results = json!({
        "r_cap": solver.r_cap(),
        "y_max": solver.y_max(),
        "h2_max": solver.h2_max(),
        "initial_condition_max_error": initial_error,
        "value_at_t1_origin": at_one.value,
        "weak_solution": report,
        "convergence": study,
    });
    Ok(TaskOutput { results, diagnostics: Vec::new(), artifacts: vec!["hopf_field.csv".into()] })
}

fn run_simulations(config: &RunConfig, dir: &Path) -> Result<(Vec<FreeEnergyEstimate>, Vec<String>)> {
    let p = &config.params.simulate;
    if p.n.is_empty() {
        return Err(Error::invalid("params.simulate.n", "no system size given"));
    }
    let mut estimates = Vec::new();
    let mut artifacts = Vec::new();
    for &n in &p.n {
        let e = estimate_free_energy(&config.model, n, p.replications, config.seed)?;
        let name = format!("simulate_n{n}.csv");
        e.write_csv(&dir.join(&name))?;
        artifacts.push(name);
        estimates.push(e);
    }
    Ok((estimates, artifacts))
}

fn estimate_summary(e: &FreeEnergyEstimate) -> Value {
    json!({ "n": e.n, "replications": e.replications, "mean": e.mean, "stderr": e.stderr })
}

fn task_simulate(config: &RunConfig, dir: &Path) -> Result<TaskOutput> {
    let (estimates, artifacts) = run_simulations(config, dir)?;
    let results = json!({ "estimates": estimates.iter().map(estimate_summary).collect::<Vec<_>>() });
    Ok(TaskOutput { results, diagnostics: Vec::new(), artifacts })
}

fn task_compare(config: &RunConfig, dir: &Path) -> Result<TaskOutput> {
    let saddle = run_saddle(config)?;
    write_saddle_csv(&saddle, &dir.join("saddle.csv"))?;
    let (saddle_json, mut diagnostics) = saddle_results(&saddle);
    let (estimates, mut artifacts) = run_simulations(config, dir)?;
    artifacts.insert(0, "saddle.csv".into());
    let limit = saddle.value();
    let c = &config.params.compare;
    let rows: Vec<Value> = estimates
        .iter()
        .map(|e| {
            let gap = e.mean - limit;
            let band = c.stderr_multiplier * e.stderr + c.slack;
            json!({
                "n": e.n,
                "mean": e.mean,
                "stderr": e.stderr,
                "difference": gap,
                "band": band,
                "pass": gap.abs() <= band,
            })
        })
        .collect();
    let gaps: Vec<f64> = estimates.iter().map(|e| (e.mean - limit).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    diagnostics.push(Diagnostic::new(
        "gap-nonincreasing",
        if monotone { 1.0 } else { 0.0 },
        format!("|MC mean - limit| by n: {gaps:?}"),
    ));
    let results = json!({ "limit": limit, "saddle": saddle_json, "comparison": rows });
    Ok(TaskOutput { results, diagnostics, artifacts })
}
