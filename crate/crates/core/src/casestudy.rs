//! Two-axis flatbed-printer surrogate: frozen plant data, references, and the end-to-end
//! design procedure over all design modes.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frf::{self, FrequencyGrid, FrfError, FrfMatrix};
use crate::lti::{
    closed_loop_maps, evaluate_frf, system_transmission_zeros, zoh_discretize, FrequencyResponse, LtiError,
    LtiSystem, RationalTransfer, StateSpace, TransferMatrix,
};
use crate::sim::{
    self, fixed_points, lifted_contraction, monotonicity_audit, run_trials, FixedPoint, LiftedIlc, LiftedPlant,
    MonotonicityAudit, SimError, TrialRun,
};
use crate::synthesis::{build_design, DesignFilters, DesignMode, DesignOptions, Models, SynthesisError, TuneTarget};

pub const SURROGATE_JSON: &str = include_str!("../data/surrogate.json");
pub const DEFAULT_TRIALS: usize = 10;
pub const PREACTUATION_WINDOW: usize = 50;
pub const DOMINANCE_HZ: f64 = 10.0;
pub const INTERACTION_HZ: f64 = 20.0;
/// Preview length for the surrogate inverse; its anti-resonance tails decay slowly.
pub const CASE_PREVIEW: usize = 800;
pub const CASE_REGULARIZATION: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum CaseStudyError {
    #[error("surrogate data: {0}")]
    Data(String),
    #[error("scenario invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Lti(#[from] LtiError),
    #[error(transparent)]
    Frf(#[from] FrfError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CaseStudyError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeParams {
    pub freq_hz: f64,
    pub damping: f64,
    /// Modal input gains in decoupled coordinates.
    pub input: [f64; 2],
    /// Modal contribution to each output.
    pub output: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelError {
    pub mode: usize,
    pub freq_scale: f64,
}

/// c(z) = gain·(z − zero)/(z − pole).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeadLag {
    pub gain: f64,
    pub zero: f64,
    pub pole: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Move {
    pub start: f64,
    pub duration: f64,
    pub displacement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelReference {
    pub moves: Vec<Move>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateParams {
    pub version: u32,
    pub ts: f64,
    pub horizon: usize,
    /// Rigid-body gains per decoupled direction.
    pub rigid_gain: [f64; 2],
    pub modes: Vec<ModeParams>,
    pub model_error: ModelError,
    /// Maps physical forces to decoupled coordinates: G_o = G_dec · mixing⁻¹.
    pub input_mixing: [[f64; 2]; 2],
    pub controllers: Vec<LeadLag>,
    pub references: Vec<ChannelReference>,
}

impl SurrogateParams {
    pub fn frozen() -> Self {
        Self::from_json(SURROGATE_JSON).expect("frozen surrogate data is valid")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: SurrogateParams = serde_json::from_str(s).map_err(|e| CaseStudyError::Data(e.to_string()))?;
        if p.controllers.len() != 2 || p.references.len() != 2 {
            return Err(CaseStudyError::Data("expected two controllers and two reference channels".into()));
        }
        if p.model_error.mode >= p.modes.len() {
            return Err(CaseStudyError::Data("model-error mode index out of range".into()));
        }
        if !(p.ts > 0.0) || p.horizon == 0 {
            return Err(CaseStudyError::Data("sample time and horizon must be positive".into()));
        }
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    fn mixing(&self) -> DMatrix<f64> {
        let m = &self.input_mixing;
        DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])
    }

    /// Continuous plant with physical inputs; `shift` scales the model-error mode frequency.
    pub fn plant(&self, shift: f64) -> Result<StateSpace> {
        let n = 4 + 2 * self.modes.len();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, 2);
        let mut c = DMatrix::zeros(2, n);
        for ch in 0..2 {
            a[(2 * ch, 2 * ch + 1)] = 1.0;
            b[(2 * ch + 1, ch)] = self.rigid_gain[ch];
            c[(ch, 2 * ch)] = 1.0;
        }
        for (k, m) in self.modes.iter().enumerate() {
            let scale = if k == self.model_error.mode { shift } else { 1.0 };
            let w = 2.0 * std::f64::consts::PI * m.freq_hz * scale;
            let i = 4 + 2 * k;
            a[(i, i + 1)] = 1.0;
            a[(i + 1, i)] = -w * w;
            a[(i + 1, i + 1)] = -2.0 * m.damping * w;
            for ch in 0..2 {
                b[(i + 1, ch)] = m.input[ch];
                c[(ch, i)] = m.output[ch];
            }
        }
        let dec = StateSpace::new(a, b, c, DMatrix::zeros(2, 2), None)?;
        let inv = self.mixing().try_inverse().ok_or_else(|| CaseStudyError::Data("input mixing is singular".into()))?;
        Ok(dec.with_input_transform(&inv))
    }

    pub fn controller(&self) -> Result<TransferMatrix> {
        let entries = self
            .controllers
            .iter()
            .map(|c| RationalTransfer::new(vec![c.gain, -c.gain * c.zero], vec![1.0, -c.pole], self.ts))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(TransferMatrix::diagonal(self.ts, entries)?)
    }

    pub fn model_error_hz(&self) -> f64 {
        self.modes[self.model_error.mode].freq_hz
    }
}

/// Fifth-to-seventh order rest-to-rest profile on [0, 1] with zero velocity, acceleration
/// and jerk at both ends.
pub fn septic(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    let t4 = t.powi(4);
    t4 * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t)
}

/// Channel-major references of length `horizon` per channel.
pub fn build_references(p: &SurrogateParams) -> Vec<f64> {
    let n = p.horizon;
    let mut r = vec![0.0; n * p.references.len()];
    for (ch, refs) in p.references.iter().enumerate() {
        for k in 0..n {
            let t = k as f64 * p.ts;
            r[ch * n + k] = refs.moves.iter().map(|m| m.displacement * septic((t - m.start) / m.duration)).sum();
        }
    }
    r
}

/// Sample indices at which a motion task begins, over all channels.
pub fn task_starts(p: &SurrogateParams) -> Vec<usize> {
    let mut s: Vec<usize> = p
        .references
        .iter()
        .flat_map(|c| c.moves.iter().map(|m| (m.start / p.ts).round() as usize))
        .collect();
    s.sort_unstable();
    s.dedup();
    s
}

/// Continuous physical plant, its model with the resonance error, and the controllers.
#[derive(Debug, Clone)]
pub struct Surrogate {
    pub params: SurrogateParams,
    pub g_o: StateSpace,
    pub g_hat: StateSpace,
    pub controller: TransferMatrix,
}

pub fn build_surrogate() -> Result<Surrogate> {
    build_surrogate_from(SurrogateParams::frozen())
}

pub fn build_surrogate_from(params: SurrogateParams) -> Result<Surrogate> {
    let g_o = params.plant(1.0)?;
    let g_hat = params.plant(params.model_error.freq_scale)?;
    let controller = params.controller()?;
    Ok(Surrogate { params, g_o, g_hat, controller })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioChecks {
    pub bandwidth_hz: [f64; 2],
    /// max σ̄(E) of the decoupled plant below the dominance frequency.
    pub low_interaction: f64,
    /// max σ̄(E) of the decoupled plant above the interaction frequency.
    pub high_interaction: f64,
    /// Physical plant before decoupling.
    pub raw_interaction: f64,
    pub nmp_zeros: Vec<[f64; 2]>,
    pub model_error_peak_hz: f64,
    pub model_error_mode_hz: f64,
    pub reference_peaks: Vec<f64>,
}

impl ScenarioChecks {
    pub fn verify(&self) -> Result<()> {
        let nominal = [3.0, 1.5];
        for (bw, nom) in self.bandwidth_hz.iter().zip(nominal) {
            if (bw - nom).abs() > 0.3 * nom {
                return Err(CaseStudyError::Invariant(format!("bandwidth {bw:.2} Hz not within 30% of {nom} Hz")));
            }
        }
        if self.low_interaction >= 0.1 {
            return Err(CaseStudyError::Invariant(format!(
                "decoupled plant not dominant below {DOMINANCE_HZ} Hz (interaction {:.3})",
                self.low_interaction
            )));
        }
        if self.high_interaction <= 0.5 {
            return Err(CaseStudyError::Invariant(format!(
                "interaction above {INTERACTION_HZ} Hz too weak ({:.3})",
                self.high_interaction
            )));
        }
        if self.nmp_zeros.is_empty() {
            return Err(CaseStudyError::Invariant("J has no non-minimum-phase transmission zero".into()));
        }
        if (self.model_error_peak_hz - self.model_error_mode_hz).abs() > 0.2 * self.model_error_mode_hz {
            return Err(CaseStudyError::Invariant(format!(
                "largest model error at {:.2} Hz, expected near {:.2} Hz",
                self.model_error_peak_hz, self.model_error_mode_hz
            )));
        }
        let (lo, hi) = self
            .reference_peaks
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(l, h), v| (l.min(*v), h.max(*v)));
        if hi > 3.0 * lo {
            return Err(CaseStudyError::Invariant("reference amplitudes differ by more than a factor 3".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOptions {
    pub modes: Vec<DesignMode>,
    pub trials: usize,
    pub design: DesignOptions,
    pub grid_points: usize,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            modes: DesignMode::all().to_vec(),
            trials: DEFAULT_TRIALS,
            design: DesignOptions {
                target: TuneTarget::Convergent,
                preview: CASE_PREVIEW,
                regularization: CASE_REGULARIZATION,
                ..DesignOptions::default()
            },
            grid_points: frf::DEFAULT_GRID_POINTS,
        }
    }
}

/// Discrete, decoupled scenario ready for design and simulation.
pub struct Scenario {
    pub surrogate: Surrogate,
    pub options: ScenarioOptions,
    pub decoupling: frf::DecouplingTransform,
    pub g: StateSpace,
    pub g_hat: StateSpace,
    pub s: LtiSystem,
    pub j: LtiSystem,
    pub j_hat: LtiSystem,
    pub grid: FrequencyGrid,
    pub j_frf: FrfMatrix,
    pub r: Vec<f64>,
    pub checks: ScenarioChecks,
}

fn interaction_max(frf: &FrfMatrix, keep: impl Fn(f64) -> bool) -> Result<f64> {
    let rep = frf::interaction_measure(frf, frf::DEFAULT_INTERACTION_THRESHOLD)?;
    Ok(rep
        .sigma
        .iter()
        .enumerate()
        .filter(|(k, _)| keep(frf.grid.hz(*k)))
        .fold(0.0_f64, |a, (_, s)| a.max(*s)))
}

pub fn build_scenario(surrogate: Surrogate, options: ScenarioOptions) -> Result<Scenario> {
    let p = &surrogate.params;
    let ts = p.ts;
    let grid = FrequencyGrid::log_with_endpoints(options.grid_points, frf::DEFAULT_GRID_LOW_HZ, ts)?;
    let open_grid = grid.filtered(|w| w > 0.0)?;

    let g_od = zoh_discretize(&surrogate.g_o, ts)?;
    let g_hatd = zoh_discretize(&surrogate.g_hat, ts)?;
    let g_o_frf = evaluate_frf(&g_od, &open_grid)?;
    let raw_interaction = frf::interaction_measure(&g_o_frf, frf::DEFAULT_INTERACTION_THRESHOLD)?.summary;
    let decoupling = frf::static_decoupling(&g_o_frf, open_grid.nearest(frf::DEFAULT_ANCHOR_HZ))?;
    let g = g_od.with_input_transform(&decoupling.t);
    let g_hat = g_hatd.with_input_transform(&decoupling.t);

    let c = LtiSystem::Transfer(surrogate.controller.clone());
    let (s, j) = closed_loop_maps(&LtiSystem::State(g.clone()), &c)?;
    let (_, j_hat) = closed_loop_maps(&LtiSystem::State(g_hat.clone()), &c)?;
    let j_frf = evaluate_frf(&j, &grid)?;

    let g_frf = evaluate_frf(&g, &open_grid)?;
    let c_frf = evaluate_frf(&surrogate.controller, &open_grid)?;
    let mut bandwidth_hz = [0.0; 2];
    for (ch, bw) in bandwidth_hz.iter_mut().enumerate() {
        let k = (0..open_grid.len())
            .find(|k| (g_frf.data[*k][(ch, ch)] * c_frf.data[*k][(ch, ch)]).norm() < 1.0)
            .unwrap_or(open_grid.len() - 1);
        *bw = open_grid.hz(k);
    }
    let low_interaction = interaction_max(&g_frf, |hz| hz <= DOMINANCE_HZ)?;
    let high_interaction = interaction_max(&g_frf, |hz| hz >= INTERACTION_HZ)?;

    let nmp_zeros = system_transmission_zeros(&j)?
        .into_iter()
        .filter(|z| z.nonminimum_phase)
        .map(|z| [z.z.re, z.z.im])
        .collect();

    let j_hat_frf = evaluate_frf(&j_hat, &grid)?;
    let (mut peak, mut peak_k) = (0.0_f64, 0);
    for k in 0..grid.len() {
        let jt = j_frf.data[k][(1, 1)];
        let rel = (j_hat_frf.data[k][(1, 1)] - jt).norm() / jt.norm();
        if rel > peak {
            peak = rel;
            peak_k = k;
        }
    }

    let r = build_references(p);
    let n = p.horizon;
    let reference_peaks = (0..p.references.len())
        .map(|ch| r[ch * n..(ch + 1) * n].iter().fold(0.0_f64, |a, v| a.max(v.abs())))
        .collect();

    let checks = ScenarioChecks {
        bandwidth_hz,
        low_interaction,
        high_interaction,
        raw_interaction,
        nmp_zeros,
        model_error_peak_hz: grid.hz(peak_k),
        model_error_mode_hz: p.model_error_hz(),
        reference_peaks,
    };
    checks.verify()?;
    Ok(Scenario { surrogate, options, decoupling, g, g_hat, s, j, j_hat, grid, j_frf, r, checks })
}

#[derive(Debug, Clone)]
pub struct ModeResult {
    pub mode: DesignMode,
    pub cutoffs: Vec<f64>,
    pub fit_error: f64,
    pub convergent: bool,
    pub monotone_bound: bool,
    pub target_met: bool,
    pub gamma: f64,
    pub rho_max: f64,
    pub worst_hz: f64,
    pub run: TrialRun,
    pub gamma_lift: f64,
    pub rho_lift: f64,
    pub fixed: Option<FixedPoint>,
    pub audit: Option<MonotonicityAudit>,
    /// Per task start: max|f∞| in the preceding window over max|f∞|.
    pub preactuation: Option<Vec<f64>>,
    /// Per task start: window energy of f∞ over its squared peak.
    pub preactuation_energy: Option<Vec<f64>>,
    pub filters: DesignFilters,
}

impl ModeResult {
    pub fn e_inf_norm(&self) -> Option<f64> {
        self.fixed.as_ref().map(|f| sim::norm(&f.e))
    }

    /// Converged per the simulation: no divergence and ‖f∞ − f_j‖ decreasing every trial.
    pub fn converged_monotonically(&self) -> bool {
        !self.run.diverged && self.audit.as_ref().is_some_and(|a| a.ratios.iter().all(|r| *r < 1.0))
    }
}

pub struct ScenarioReport {
    pub modes: Vec<ModeResult>,
}

impl ScenarioReport {
    pub fn mode(&self, m: DesignMode) -> Option<&ModeResult> {
        self.modes.iter().find(|r| r.mode == m)
    }
}

fn window_ratios(f: &[f64], horizon: usize, starts: &[usize], window: usize, stat: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let channels = f.len() / horizon;
    let peak = f.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    starts
        .iter()
        .map(|&s| {
            let lo = s.saturating_sub(window);
            let w: Vec<f64> = (0..channels).flat_map(|c| f[c * horizon + lo..c * horizon + s].iter().copied()).collect();
            if peak > 0.0 {
                stat(&w) / peak
            } else {
                0.0
            }
        })
        .collect()
}

/// Per task start: max|f| over the preceding window (all channels) relative to max|f|.
pub fn preactuation_ratios(f: &[f64], horizon: usize, starts: &[usize], window: usize) -> Vec<f64> {
    window_ratios(f, horizon, starts, window, |w| w.iter().fold(0.0_f64, |a, v| a.max(v.abs())))
}

/// Per task start: window energy Σf² relative to the squared peak of f.
pub fn preactuation_energy_ratios(f: &[f64], horizon: usize, starts: &[usize], window: usize) -> Vec<f64> {
    let peak = f.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    window_ratios(f, horizon, starts, window, |w| w.iter().map(|v| v * v).sum::<f64>() / peak)
}

/// Designs, simulates and evaluates one mode.
pub fn run_mode(sc: &Scenario, plant: &LiftedPlant, mode: DesignMode) -> Result<ModeResult> {
    let models = Models { full: Some(&sc.j_hat as &dyn FrequencyResponse), loops: None };
    let design = build_design(mode, &models, &sc.j_frf, &sc.options.design)?;
    let filters = DesignFilters::from(&design);
    let horizon = sc.surrogate.params.horizon;
    let ilc = LiftedIlc::from_filters(&filters, horizon);
    let contraction = lifted_contraction(&ilc, plant)?;
    let fixed = if contraction.rho < 1.0 { Some(fixed_points(&ilc, plant, &sc.r)?) } else { None };
    let run = run_trials(&ilc, plant, &sc.r, sc.options.trials, None, fixed.as_ref().map(|f| f.f.as_slice()))?;
    let audit = fixed.as_ref().map(|f| monotonicity_audit(&run.records, &f.f, contraction.gamma, 0.0));
    let starts = task_starts(&sc.surrogate.params);
    let preactuation = fixed.as_ref().map(|f| preactuation_ratios(&f.f, horizon, &starts, PREACTUATION_WINDOW));
    let preactuation_energy =
        fixed.as_ref().map(|f| preactuation_energy_ratios(&f.f, horizon, &starts, PREACTUATION_WINDOW));
    let s = design.summary();
    Ok(ModeResult {
        mode,
        cutoffs: design.cutoffs(),
        fit_error: design.fit_error,
        convergent: s.convergent,
        monotone_bound: s.monotone,
        target_met: design.target_met(),
        gamma: s.gamma,
        rho_max: s.rho_max,
        worst_hz: s.worst_hz,
        run,
        gamma_lift: contraction.gamma,
        rho_lift: contraction.rho,
        fixed,
        audit,
        preactuation,
        preactuation_energy,
        filters,
    })
}

/// Non-parametric J, interaction and decoupling (in `build_scenario`), then every design mode.
pub fn run_procedure2(sc: &Scenario) -> Result<ScenarioReport> {
    let plant = LiftedPlant::from_systems(&sc.s, &sc.j, sc.surrogate.params.horizon)?;
    let modes = sc.options.modes.iter().map(|m| run_mode(sc, &plant, *m)).collect::<Result<Vec<_>>>()?;
    Ok(ScenarioReport { modes })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_else(|| "NaN".into())
}

/// Writes table1.csv, fig3.csv, scenario.json and per-mode trace and signal files.
pub fn write_outputs(sc: &Scenario, report: &ScenarioReport, dir: &Path, header: &[String]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let head = |w: &mut dyn Write| -> std::io::Result<()> {
        for h in header {
            writeln!(w, "# {h}")?;
        }
        Ok(())
    };

    let mut t = Vec::new();
    head(&mut t)?;
    writeln!(t, "mode,fc_1,fc_2,e_inf_F,convergent,monotone")?;
    for m in &report.modes {
        writeln!(
            t,
            "{},{:.3},{:.3},{},{},{}",
            m.mode.name(),
            m.cutoffs[0],
            m.cutoffs[1],
            fmt_opt(m.e_inf_norm()),
            m.convergent,
            m.converged_monotonically()
        )?;
    }
    fs::write(dir.join("table1.csv"), t)?;

    let mut f = Vec::new();
    head(&mut f)?;
    writeln!(f, "mode,trial,e_norm_F")?;
    for m in &report.modes {
        for r in &m.run.records {
            writeln!(f, "{},{},{:e}", m.mode.name(), r.trial + 1, r.e_norm)?;
        }
    }
    fs::write(dir.join("fig3.csv"), f)?;

    let scenario = serde_json::json!({
        "surrogate": sc.surrogate.params,
        "decoupling": sc.decoupling,
        "checks": sc.checks,
        "grid_points": sc.grid.len(),
        "trials": sc.options.trials,
        "preview": sc.options.design.preview,
        "regularization": sc.options.design.regularization,
        "target": sc.options.design.target,
    });
    fs::write(dir.join("scenario.json"), serde_json::to_string_pretty(&scenario).expect("serializable"))?;

    for m in &report.modes {
        let sub = dir.join(m.mode.name());
        fs::create_dir_all(&sub)?;
        let mut trace = Vec::new();
        m.run.write_trace_csv(&mut trace, header)?;
        fs::write(sub.join("trace.csv"), trace)?;
        if let Some(last) = m.run.records.last() {
            let mut sig = Vec::new();
            m.run.write_signals_csv(last, &mut sig, header)?;
            fs::write(sub.join(format!("trial_{}_signals.csv", last.trial + 1)), sig)?;
        }
        let summary = serde_json::json!({
            "mode": m.mode,
            "cutoffs": m.cutoffs,
            "fit_error": m.fit_error,
            "convergent": m.convergent,
            "monotone_bound": m.monotone_bound,
            "target_met": m.target_met,
            "gamma": m.gamma,
            "rho_max": m.rho_max,
            "worst_hz": m.worst_hz,
            "gamma_lift": m.gamma_lift,
            "rho_lift": m.rho_lift,
            "diverged": m.run.diverged,
            "growth": m.run.growth,
            "e_inf_F": m.e_inf_norm(),
            "audit_max_ratio": m.audit.as_ref().map(|a| a.max_ratio),
            "preactuation": m.preactuation,
            "preactuation_energy": m.preactuation_energy,
        });
        fs::write(sub.join("summary.json"), serde_json::to_string_pretty(&summary).expect("serializable"))?;
    }
    Ok(())
}

/// Complex zero as a pair, for reports.
pub fn zero_pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_data_loads() {
        let p = SurrogateParams::frozen();
        assert_eq!(p.horizon, 3001);
        assert_eq!(p.ts, 1e-3);
        let back = SurrogateParams::from_json(&p.to_json()).unwrap();
        assert_eq!(p, back);
        assert!(SurrogateParams::from_json(r#"{"version":1}"#).is_err());
    }

    #[test]
    fn septic_is_rest_to_rest() {
        assert_eq!(septic(0.0), 0.0);
        assert_eq!(septic(1.0), 1.0);
        assert_eq!(septic(-1.0), 0.0);
        assert!((septic(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn references_start_and_end_at_rest() {
        let p = SurrogateParams::frozen();
        let r = build_references(&p);
        let n = p.horizon;
        assert_eq!(r.len(), 2 * n);
        for ch in 0..2 {
            let x = &r[ch * n..(ch + 1) * n];
            assert_eq!(x[1] - x[0], 0.0);
            assert_eq!(x[n - 1] - x[n - 2], 0.0);
        }
    }

    #[test]
    fn controller_matches_data() {
        let p = SurrogateParams::frozen();
        let c = p.controller().unwrap();
        let dc = c.entry(0, 0).eval(Complex64::new(1.0, 0.0)).re;
        assert!((dc - 5e4 * 0.012 / 0.061).abs() < 1e-6);
    }

    #[test]
    fn preactuation_window() {
        let mut f = vec![0.0; 20];
        f[5] = 0.5;
        f[12] = 1.0;
        let r = preactuation_ratios(&f, 20, &[8, 13], 3);
        assert_eq!(r, vec![0.5, 1.0]);
        let e = preactuation_energy_ratios(&f, 20, &[8, 13], 3);
        assert_eq!(e, vec![0.25, 1.0]);
    }
}
