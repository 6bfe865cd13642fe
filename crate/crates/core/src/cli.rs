//! Commands behind the `mimo-ilc` binary: configuration, file loading and output writing.

use std::f64::consts::PI;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{self, ConvergenceReport, DiagResponse};
use crate::casestudy::{self, CaseStudyError, ScenarioOptions, ScenarioReport, SurrogateParams};
use crate::frf::{self, FrequencyGrid, FrfError, FrfMatrix};
use crate::lti::{evaluate_frf, FrequencyResponse, LtiError, LtiSystem, TransferMatrix};
use crate::sim::{self, LiftedIlc, LiftedPlant, SimError, TrialRun};
use crate::synthesis::{self, DesignFilters, DesignMode, DesignOptions, IlcDesign, Models, SynthesisError, TuneTarget};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const TOOL: &str = "mimo-ilc";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Verdict(String),
    #[error("{0}")]
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Verdict(_) => 4,
            CliError::Infeasible(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::NoFeasibleCutoff(_) => CliError::Infeasible(e.to_string()),
            SynthesisError::ModelMissing(_)
            | SynthesisError::InvalidOption(_)
            | SynthesisError::CutoffOutOfRange(_)
            | SynthesisError::NonUniformGrid => CliError::Input(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<CaseStudyError> for CliError {
    fn from(e: CaseStudyError) -> Self {
        match e {
            CaseStudyError::Synthesis(s) => s.into(),
            CaseStudyError::Data(_) | CaseStudyError::Io(_) => CliError::Input(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::DimensionMismatch(_) => CliError::Input(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<LtiError> for CliError {
    fn from(e: LtiError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<FrfError> for CliError {
    fn from(e: FrfError) -> Self {
        match e {
            FrfError::InvalidGrid(_) | FrfError::Parse(_) | FrfError::Io(_) => CliError::Input(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<analysis::AnalysisError> for CliError {
    fn from(e: analysis::AnalysisError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

fn write_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("cannot write '{}': {e}", path.display()))
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// Frequency grid in rad/sample. Log spacing with a zero lower bound places ω = 0 first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub points: Option<usize>,
    pub spacing: Spacing,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
}

impl GridSpec {
    pub fn build(&self, ts: f64) -> Result<FrequencyGrid> {
        let n = self.points.unwrap_or(frf::DEFAULT_GRID_POINTS);
        let lo = self.omega_min.unwrap_or(0.0);
        let hi = self.omega_max.unwrap_or(PI);
        let omega: Vec<f64> = match self.spacing {
            Spacing::Linear => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
            Spacing::Log => {
                let (mut omega, count, start) = if lo > 0.0 {
                    (Vec::new(), n, lo)
                } else {
                    let low = (2.0 * PI * frf::DEFAULT_GRID_LOW_HZ * ts).min(hi / 10.0);
                    (vec![0.0], n - 1, low)
                };
                let (a, b) = (start.ln(), hi.ln());
                if count == 1 {
                    omega.push(hi);
                } else {
                    omega.extend((0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()));
                    *omega.last_mut().expect("non-empty") = hi;
                }
                omega
            }
        };
        Ok(FrequencyGrid::new(omega, ts)?)
    }

    fn validate(&self) -> Result<()> {
        if let Some(p) = self.points {
            if !(2..=1_000_000).contains(&p) {
                return Err(CliError::Input(format!("grid.points = {p} outside [2, 1000000]")));
            }
        }
        for (name, v) in [("grid.omega_min", self.omega_min), ("grid.omega_max", self.omega_max)] {
            if let Some(w) = v {
                if !(w >= 0.0) {
                    return Err(CliError::Input(format!("{name} = {w} is below the lower bound 0")));
                }
                if w > PI {
                    return Err(CliError::Input(format!("{name} = {w} exceeds the upper bound pi")));
                }
            }
        }
        if self.omega_min.unwrap_or(0.0) >= self.omega_max.unwrap_or(PI) {
            return Err(CliError::Input("grid.omega_min must be below grid.omega_max".into()));
        }
        Ok(())
    }
}

/// Run configuration. Paths are resolved relative to the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Full process-sensitivity model Ĵ (transfer-matrix JSON).
    pub model: Option<PathBuf>,
    /// Per-loop SISO models Ĵ_ii.
    pub loop_models: Option<Vec<PathBuf>>,
    /// Measured J (FRF CSV or JSON).
    pub frf: Option<PathBuf>,
    /// Design file written by `design`.
    pub design: Option<PathBuf>,
    /// True J for simulation; defaults to `model`.
    pub plant: Option<PathBuf>,
    /// Sensitivity S for simulation; identity when absent.
    pub sensitivity: Option<PathBuf>,
    /// Reference CSV `k,r_1,...,r_n`.
    pub reference: Option<PathBuf>,
    /// Case-study surrogate data; the frozen set when absent.
    pub surrogate: Option<PathBuf>,
    pub grid: GridSpec,
    pub mode: DesignMode,
    /// Case-study modes; all when absent.
    pub modes: Option<Vec<DesignMode>>,
    pub target: TuneTarget,
    pub order: u32,
    pub preview: Option<usize>,
    pub regularization: Option<f64>,
    pub fit_bound: Option<f64>,
    pub trials: usize,
    pub out: PathBuf,
    pub seed: u64,
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: None,
            loop_models: None,
            frf: None,
            design: None,
            plant: None,
            sensitivity: None,
            reference: None,
            surrogate: None,
            grid: GridSpec::default(),
            mode: DesignMode::Alg2,
            modes: None,
            target: TuneTarget::Convergent,
            order: 1,
            preview: None,
            regularization: None,
            fit_bound: None,
            trials: casestudy::DEFAULT_TRIALS,
            out: PathBuf::from("out"),
            seed: 0,
            strict: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| CliError::Input(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("config: cannot read '{}': {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(1..=8).contains(&self.order) {
            return Err(CliError::Input(format!("order = {} outside [1, 8]", self.order)));
        }
        if let Some(k) = self.preview {
            if k > 100_000 {
                return Err(CliError::Input(format!("preview = {k} exceeds 100000")));
            }
        }
        if let Some(l) = self.regularization {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(CliError::Input(format!("regularization = {l} must be finite and non-negative")));
            }
        }
        if let Some(b) = self.fit_bound {
            if !(b > 0.0) {
                return Err(CliError::Input(format!("fit_bound = {b} must be positive")));
            }
        }
        if !(1..=10_000).contains(&self.trials) {
            return Err(CliError::Input(format!("trials = {} outside [1, 10000]", self.trials)));
        }
        if matches!(&self.modes, Some(m) if m.is_empty()) {
            return Err(CliError::Input("modes must not be empty".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let canonical = RunConfig { out: PathBuf::new(), ..self.clone() };
        let json = serde_json::to_string(&canonical).expect("serializable");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Comment lines carried by every output file.
    pub fn header(&self) -> Vec<String> {
        vec![format!("{TOOL} {VERSION}"), format!("config_sha256 {}", self.hash())]
    }

    pub fn meta(&self) -> serde_json::Value {
        serde_json::json!({ "tool": TOOL, "version": VERSION, "config_sha256": self.hash() })
    }

    fn design_options(&self, defaults: DesignOptions) -> DesignOptions {
        DesignOptions {
            preview: self.preview.unwrap_or(defaults.preview),
            regularization: self.regularization.unwrap_or(defaults.regularization),
            target: self.target,
            order: self.order,
            fit_bound: self.fit_bound,
            ..defaults
        }
    }
}

// ---------------------------------------------------------------------------
// Loading

fn required<'a>(v: &'a Option<PathBuf>, key: &str, cmd: &str) -> Result<&'a PathBuf> {
    v.as_ref().ok_or_else(|| CliError::Input(format!("{cmd} requires '{key}' in the config")))
}

fn read(path: &Path, key: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{key}: cannot read '{}': {e}", path.display())))
}

pub fn load_model(path: &Path, key: &str) -> Result<TransferMatrix> {
    TransferMatrix::from_json(&read(path, key)?).map_err(|e| CliError::Input(format!("{key} '{}': {e}", path.display())))
}

/// FRF from `.json`, otherwise CSV.
pub fn load_frf(path: &Path) -> Result<FrfMatrix> {
    let named = |e: FrfError| CliError::Input(format!("frf '{}': {e}", path.display()));
    if path.extension().is_some_and(|e| e == "json") {
        FrfMatrix::from_json(&read(path, "frf")?).map_err(named)
    } else {
        let f = fs::File::open(path).map_err(|e| CliError::Input(format!("frf: cannot read '{}': {e}", path.display())))?;
        FrfMatrix::read_csv(BufReader::new(f)).map_err(named)
    }
}

pub fn load_design(path: &Path) -> Result<DesignFilters> {
    DesignFilters::from_json(&read(path, "design")?)
        .map_err(|e| CliError::Input(format!("design '{}': {e}", path.display())))
}

/// Reference CSV with header `k,r_1,...,r_n`; returned channel-major with its horizon.
pub fn load_reference(path: &Path) -> Result<(Vec<f64>, usize)> {
    let text = read(path, "reference")?;
    let body: String = text.lines().filter(|l| !l.trim_start().starts_with('#')).map(|l| format!("{l}\n")).collect();
    let bad = |m: String| CliError::Input(format!("reference '{}': {m}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let n = headers.len().saturating_sub(1);
    if headers.get(0) != Some("k") || n == 0 || (1..=n).any(|c| headers.get(c) != Some(format!("r_{c}").as_str())) {
        return Err(bad("header must be k,r_1,...,r_n".into()));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let v = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        rows.push(v);
    }
    if rows.is_empty() {
        return Err(bad("no samples".into()));
    }
    let horizon = rows.len();
    let mut r = vec![0.0; n * horizon];
    for (t, row) in rows.iter().enumerate() {
        for c in 0..n {
            r[c * horizon + t] = row[c];
        }
    }
    Ok((r, horizon))
}

pub fn write_reference<W: std::io::Write>(mut w: W, r: &[f64], horizon: usize, header: &[String]) -> std::io::Result<()> {
    for h in header {
        writeln!(w, "# {h}")?;
    }
    let n = r.len() / horizon;
    let cols: Vec<String> = (1..=n).map(|c| format!("r_{c}")).collect();
    writeln!(w, "k,{}", cols.join(","))?;
    for t in 0..horizon {
        write!(w, "{t}")?;
        for c in 0..n {
            write!(w, ",{:e}", r[c * horizon + t])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Measured J when given, otherwise the model sampled on the configured grid.
fn j_frf(cfg: &RunConfig, model: Option<&TransferMatrix>, cmd: &str) -> Result<FrfMatrix> {
    if let Some(p) = &cfg.frf {
        return load_frf(p);
    }
    let m = model.ok_or_else(|| CliError::Input(format!("{cmd} requires 'frf' or 'model' in the config")))?;
    let grid = cfg.grid.build(m.ts())?;
    Ok(evaluate_frf(m, &grid)?)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
    let p = dir.join(name);
    fs::write(&p, bytes).map_err(|e| write_err(&p, e))?;
    Ok(p)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

pub fn q_response(filters: &DesignFilters, grid: &FrequencyGrid) -> DiagResponse {
    grid.omega.iter().map(|w| filters.q.iter().map(|q| q.response(*w)).collect()).collect()
}

fn write_report(cfg: &RunConfig, report: &ConvergenceReport) -> Result<()> {
    let csv = csv_bytes(|b| report.write_csv(b, &cfg.header()));
    write_file(&cfg.out, "analysis.csv", &csv)?;
    let json = serde_json::json!({ "meta": cfg.meta(), "summary": report.summary });
    write_file(&cfg.out, "analysis.json", serde_json::to_string_pretty(&json).expect("serializable").as_bytes())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands

/// Samples the model on the grid; writes frf.csv and frf.json.
pub fn cmd_frf(cfg: &RunConfig) -> Result<FrfMatrix> {
    let model = load_model(required(&cfg.model, "model", "frf")?, "model")?;
    let grid = cfg.grid.build(model.ts())?;
    let frf = evaluate_frf(&model, &grid)?;
    write_file(&cfg.out, "frf.csv", &csv_bytes(|b| frf.write_csv(b, &cfg.header())))?;
    write_file(&cfg.out, "frf.json", frf.to_json_with_meta(Some(cfg.meta())).as_bytes())?;
    Ok(frf)
}

/// Analyzes a stored design against J; writes analysis.csv and analysis.json.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<ConvergenceReport> {
    let design = load_design(required(&cfg.design, "design", "analyze")?)?;
    let model = cfg.model.as_ref().map(|p| load_model(p, "model")).transpose()?;
    let j = j_frf(cfg, model.as_ref(), "analyze")?;
    if (design.l.rows(), design.l.cols()) != (j.nu(), j.ny()) || design.q.len() != j.ny() {
        return Err(CliError::Input(format!(
            "design is {}x{} with {} Q filters but J is {}x{}",
            design.l.rows(),
            design.l.cols(),
            design.q.len(),
            j.ny(),
            j.nu()
        )));
    }
    let l = evaluate_frf(&design.l, &j.grid)?;
    let report = analysis::analyze(&q_response(&design, &j.grid), &l, &j)?;
    write_report(cfg, &report)?;
    if cfg.strict && !synthesis::target_verdict(design.mode, design.target, &report.summary) {
        return Err(CliError::Verdict(format!("strict: {} verdict false ({})", design.target.name(), report.verdict_line())));
    }
    Ok(report)
}

/// Runs one design mode; writes design.json and analysis.csv/json.
pub fn cmd_design(cfg: &RunConfig) -> Result<IlcDesign> {
    let model = cfg.model.as_ref().map(|p| load_model(p, "model")).transpose()?;
    let loops = cfg
        .loop_models
        .as_ref()
        .map(|ps| ps.iter().enumerate().map(|(i, p)| load_model(p, &format!("loop_models[{i}]"))).collect::<Result<Vec<_>>>())
        .transpose()?;
    if let Some(ls) = &loops {
        if let Some((i, _)) = ls.iter().enumerate().find(|(_, m)| m.ny() != 1 || m.nu() != 1) {
            return Err(CliError::Input(format!("loop_models[{i}] must be SISO")));
        }
    }
    if cfg.mode == DesignMode::Alg3 && model.is_none() {
        return Err(CliError::Input(synthesis::MODEL_MISSING_MSG.into()));
    }
    let j = j_frf(cfg, model.as_ref(), "design")?;
    let models = Models {
        full: model.as_ref().map(|m| m as &dyn FrequencyResponse),
        loops: loops.as_ref().map(|ls| ls.iter().map(|m| m as &dyn FrequencyResponse).collect()),
    };
    let opts = cfg.design_options(DesignOptions::default());
    let design = synthesis::build_design(cfg.mode, &models, &j, &opts)?;
    write_file(&cfg.out, "design.json", design.to_json(&cfg.meta()).as_bytes())?;
    write_report(cfg, &design.report)?;
    if cfg.strict && !design.target_met() {
        return Err(CliError::Verdict(format!("strict: {} target not met", design.target.name())));
    }
    Ok(design)
}

/// Outcome of `simulate`.
pub struct SimulationSummary {
    pub run: TrialRun,
    pub contraction: sim::Contraction,
    pub fixed: Option<sim::FixedPoint>,
    pub audit: Option<sim::MonotonicityAudit>,
}

impl SimulationSummary {
    /// No divergence and ‖f∞ − f_j‖ decreasing every trial.
    pub fn monotone(&self) -> bool {
        !self.run.diverged && self.audit.as_ref().is_some_and(|a| a.ratios.iter().all(|r| *r < 1.0))
    }

    pub fn verdict_line(&self) -> String {
        format!(
            "diverged={} monotone={} gamma_lift={:.6} rho_lift={:.6} e_last={:e}",
            self.run.diverged,
            self.monotone(),
            self.contraction.gamma,
            self.contraction.rho,
            self.run.records.last().map(|r| r.e_norm).unwrap_or(f64::NAN)
        )
    }
}

fn as_system(t: TransferMatrix) -> LtiSystem {
    LtiSystem::Transfer(t)
}

/// Lifted trials of a stored design; writes trace.csv, the last trial's signals and summary.json.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulationSummary> {
    let design = load_design(required(&cfg.design, "design", "simulate")?)?;
    let jp = cfg
        .plant
        .as_ref()
        .or(cfg.model.as_ref())
        .ok_or_else(|| CliError::Input("simulate requires 'plant' or 'model' in the config".into()))?;
    let j = load_model(jp, "plant")?;
    let s = match &cfg.sensitivity {
        Some(p) => load_model(p, "sensitivity")?,
        None => TransferMatrix::identity(j.ny(), j.ts()),
    };
    let (r, horizon) = load_reference(required(&cfg.reference, "reference", "simulate")?)?;
    let plant = LiftedPlant::from_systems(&as_system(s), &as_system(j), horizon)?;
    let ilc = LiftedIlc::from_filters(&design, horizon);
    let contraction = sim::lifted_contraction(&ilc, &plant)?;
    let fixed = if contraction.rho < 1.0 { Some(sim::fixed_points(&ilc, &plant, &r)?) } else { None };
    let run = sim::run_trials(&ilc, &plant, &r, cfg.trials, None, fixed.as_ref().map(|f| f.f.as_slice()))?;
    let audit = fixed.as_ref().map(|f| sim::monotonicity_audit(&run.records, &f.f, contraction.gamma, 0.0));
    let out = SimulationSummary { run, contraction, fixed, audit };

    let header = cfg.header();
    write_file(&cfg.out, "trace.csv", &csv_bytes(|b| out.run.write_trace_csv(b, &header)))?;
    if let Some(last) = out.run.records.last() {
        let sig = csv_bytes(|b| out.run.write_signals_csv(last, b, &header));
        write_file(&cfg.out, &format!("trial_{}_signals.csv", last.trial + 1), &sig)?;
    }
    let summary = serde_json::json!({
        "meta": cfg.meta(),
        "trials": out.run.records.len(),
        "diverged": out.run.diverged,
        "growth": out.run.growth,
        "gamma_lift": out.contraction.gamma,
        "rho_lift": out.contraction.rho,
        "e_inf_F": out.fixed.as_ref().map(|f| sim::norm(&f.e)),
        "audit_ratios": out.audit.as_ref().map(|a| a.ratios.clone()),
        "audit_within_gamma": out.audit.as_ref().map(|a| a.monotone),
        "monotone": out.monotone(),
    });
    write_file(&cfg.out, "summary.json", serde_json::to_string_pretty(&summary).expect("serializable").as_bytes())?;
    Ok(out)
}

/// Surrogate case study: every design mode, then table1.csv, fig3.csv and per-mode files.
pub fn cmd_casestudy(cfg: &RunConfig) -> Result<ScenarioReport> {
    let params = match &cfg.surrogate {
        Some(p) => SurrogateParams::from_json(&read(p, "surrogate")?)?,
        None => SurrogateParams::frozen(),
    };
    let defaults = ScenarioOptions::default();
    let options = ScenarioOptions {
        modes: cfg.modes.clone().unwrap_or(defaults.modes),
        trials: cfg.trials,
        design: cfg.design_options(defaults.design),
        grid_points: cfg.grid.points.unwrap_or(defaults.grid_points),
    };
    let sc = casestudy::build_scenario(casestudy::build_surrogate_from(params)?, options)?;
    let report = casestudy::run_procedure2(&sc)?;
    casestudy::write_outputs(&sc, &report, &cfg.out, &cfg.header())?;
    Ok(report)
}

/// Table rows as printed by the binary.
pub fn table_lines(report: &ScenarioReport) -> Vec<String> {
    report
        .modes
        .iter()
        .map(|m| {
            let cut: Vec<String> = m.cutoffs.iter().map(|f| format!("{f:.1}")).collect();
            format!(
                "{:<6} fc=[{}] e_inf_F={} diverged={} monotone={}",
                m.mode.name(),
                cut.join(", "),
                m.e_inf_norm().map(|v| format!("{v:.4e}")).unwrap_or_else(|| "NaN".into()),
                m.run.diverged,
                m.converged_monotonically()
            )
        })
        .collect()
}
