//! Learning and robustness filter design: two-sided FIR inversion for L, zero-phase
//! low-pass Q filters, and cut-off tuning for the four design modes.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{self, AnalysisError, ConvergenceReport, DiagResponse, JointBounds, ReportSummary};
use crate::frf::{FrequencyGrid, FrfMatrix};
use crate::linalg::{self, CMat};
use crate::lti::{evaluate_frf, FrequencyResponse, LtiError};

pub const DEFAULT_PREVIEW: usize = 200;
pub const DEFAULT_REGULARIZATION: f64 = 1e-8;
pub const DEFAULT_UNIFORM_POINTS: usize = 8192;
pub const TUNE_RESOLUTION_HZ: f64 = 0.1;
pub const TUNE_LOW_HZ: f64 = 0.5;
pub const ILL_CONDITIONED: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("cut-off {0} Hz outside (0, Nyquist)")]
    CutoffOutOfRange(f64),
    #[error("target is ill-conditioned at omega = {0}")]
    IllConditioned(f64),
    #[error("fit error {error} exceeds bound {bound}")]
    FitTooCoarse { error: f64, bound: f64 },
    #[error("no feasible cut-off: even {0} Hz violates the bounds")]
    NoFeasibleCutoff(f64),
    #[error("{0}")]
    ModelMissing(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("target FRF must be sampled on a uniform half grid")]
    NonUniformGrid,
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Lti(#[from] LtiError),
}

pub type Result<T> = std::result::Result<T, SynthesisError>;

// ---------------------------------------------------------------------------
// Zero-phase robustness filter

/// Squared magnitude of a low-pass prototype, applied forward and backward.
/// The prototype is all-pole with |H(e^{iω})|² = 1/(1 + (sin(ω/2)/sin(ω_c/2))^{2·order}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroPhaseFilter {
    pub order: u32,
    pub fc_hz: f64,
    pub ts: f64,
}

pub fn design_zero_phase(fc_hz: f64, ts: f64, order: u32) -> Result<ZeroPhaseFilter> {
    if !(fc_hz > 0.0 && fc_hz < 0.5 / ts) || order == 0 {
        return Err(SynthesisError::CutoffOutOfRange(fc_hz));
    }
    Ok(ZeroPhaseFilter { order, fc_hz, ts })
}

impl ZeroPhaseFilter {
    pub fn omega_c(&self) -> f64 {
        2.0 * PI * self.fc_hz * self.ts
    }

    pub fn response(&self, omega: f64) -> f64 {
        let r = (omega * 0.5).sin() / (self.omega_c() * 0.5).sin();
        1.0 / (1.0 + r.powi(2 * self.order as i32))
    }

    pub fn response_on(&self, grid: &FrequencyGrid) -> Vec<f64> {
        grid.omega.iter().map(|w| self.response(*w)).collect()
    }

    /// Prototype H(z) = g / (1 + a₁z⁻¹ + … + a_n z⁻ⁿ): returns (g, [1, a₁, …, a_n]).
    pub fn prototype(&self) -> (f64, Vec<f64>) {
        let n = self.order as usize;
        let xc = (self.omega_c() * 0.5).sin().powi(2);
        let mut poles = Vec::with_capacity(n);
        for k in 0..n {
            let xk = Complex64::from_polar(xc, PI * (2 * k + 1) as f64 / n as f64);
            let w = Complex64::new(1.0, 0.0) - xk * 2.0;
            let s = (w * w - 1.0).sqrt();
            let (z1, z2) = (w + s, w - s);
            poles.push(if z1.norm() < z2.norm() { z1 } else { z2 });
        }
        let a = crate::poly::from_roots(&poles);
        let g: f64 = a.iter().sum();
        (g, a)
    }

    /// Causal prototype filtering with zero initial conditions.
    pub fn filter_forward(&self, x: &[f64]) -> Vec<f64> {
        let (g, a) = self.prototype();
        let mut y = vec![0.0; x.len()];
        for t in 0..x.len() {
            let mut acc = g * x[t];
            for i in 1..a.len() {
                if t >= i {
                    acc -= a[i] * y[t - i];
                }
            }
            y[t] = acc;
        }
        y
    }

    /// Forward pass, then the time-reversed pass: the finite-horizon operator FᵀF.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.filter_forward(x);
        y.reverse();
        let mut z = self.filter_forward(&y);
        z.reverse();
        z
    }
}

// ---------------------------------------------------------------------------
// Two-sided FIR

#[derive(Debug, Clone, PartialEq)]
pub struct NoncausalFir {
    pub preview: usize,
    /// Taps for lags −K..=K; `taps[m + K]` multiplies x(t − m).
    pub taps: Vec<DMatrix<f64>>,
    pub ts: f64,
}

#[derive(Serialize, Deserialize)]
struct FirDoc {
    preview: usize,
    ny: usize,
    nu: usize,
    ts: f64,
    /// One row-major matrix per lag, from −K to K.
    taps: Vec<Vec<f64>>,
}

impl NoncausalFir {
    pub fn identity(n: usize, ts: f64) -> Self {
        NoncausalFir { preview: 0, taps: vec![DMatrix::identity(n, n)], ts }
    }

    pub fn tap(&self, lag: i64) -> Option<&DMatrix<f64>> {
        let idx = lag + self.preview as i64;
        if idx < 0 {
            return None;
        }
        self.taps.get(idx as usize)
    }

    pub fn rows(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.taps[0].ncols()
    }

    /// Block-diagonal combination of SISO filters sharing one preview length.
    pub fn diagonal(filters: &[NoncausalFir]) -> Self {
        let n = filters.len();
        let k = filters[0].preview;
        let taps = (0..2 * k + 1)
            .map(|t| DMatrix::from_fn(n, n, |i, j| if i == j { filters[i].taps[t][(0, 0)] } else { 0.0 }))
            .collect();
        NoncausalFir { preview: k, taps, ts: filters[0].ts }
    }

    pub fn to_doc(&self) -> serde_json::Value {
        let doc = FirDoc {
            preview: self.preview,
            ny: self.rows(),
            nu: self.cols(),
            ts: self.ts,
            taps: self
                .taps
                .iter()
                .map(|m| {
                    let mut v = Vec::with_capacity(m.len());
                    for i in 0..m.nrows() {
                        for j in 0..m.ncols() {
                            v.push(m[(i, j)]);
                        }
                    }
                    v
                })
                .collect(),
        };
        serde_json::to_value(doc).expect("serializable")
    }

    pub fn from_doc(v: &serde_json::Value) -> std::result::Result<Self, String> {
        let doc: FirDoc = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
        if doc.taps.len() != 2 * doc.preview + 1 || doc.taps.iter().any(|t| t.len() != doc.ny * doc.nu) {
            return Err("tap array does not match preview and dimensions".into());
        }
        Ok(NoncausalFir {
            preview: doc.preview,
            taps: doc.taps.iter().map(|t| DMatrix::from_row_slice(doc.ny, doc.nu, t)).collect(),
            ts: doc.ts,
        })
    }
}

impl FrequencyResponse for NoncausalFir {
    fn ny(&self) -> usize {
        self.rows()
    }
    fn nu(&self) -> usize {
        self.cols()
    }
    fn ts(&self) -> f64 {
        self.ts
    }
    fn response(&self, omega: f64) -> std::result::Result<CMat, LtiError> {
        let k = self.preview as i64;
        let mut out = CMat::zeros(self.rows(), self.cols());
        for (idx, h) in self.taps.iter().enumerate() {
            let lag = idx as i64 - k;
            let ph = Complex64::from_polar(1.0, -omega * lag as f64);
            for (o, v) in out.iter_mut().zip(h.iter()) {
                *o += ph * *v;
            }
        }
        Ok(out)
    }
}

fn uniform_size(grid: &FrequencyGrid) -> Option<usize> {
    let len = grid.len();
    if len < 2 {
        return None;
    }
    let m = 2 * (len - 1);
    let ok = grid
        .omega
        .iter()
        .enumerate()
        .all(|(k, w)| (w - 2.0 * PI * k as f64 / m as f64).abs() <= 1e-12);
    ok.then_some(m)
}

/// Regularized inverse W = (TᴴT + λσ̄²_peak I)⁻¹Tᴴ on a uniform half grid, synthesized into
/// taps −K..K by inverse DFT. Returns the filter and max_ω σ̄(I − L·T) on that grid.
pub fn invert_frf_to_fir(target: &FrfMatrix, preview: usize, lambda: f64) -> Result<(NoncausalFir, f64)> {
    let m = uniform_size(&target.grid).ok_or(SynthesisError::NonUniformGrid)?;
    if !(lambda >= 0.0) {
        return Err(SynthesisError::InvalidOption(format!("regularization must be nonnegative, got {lambda}")));
    }
    if 2 * preview + 1 > m {
        return Err(SynthesisError::InvalidOption("preview too long for the uniform grid".into()));
    }
    let n = target.nu();
    let peak = target.data.iter().map(linalg::sigma_max).fold(0.0_f64, f64::max);
    if peak == 0.0 {
        return Err(SynthesisError::IllConditioned(0.0));
    }
    let reg = lambda * peak * peak;
    let w: Vec<CMat> = target
        .data
        .iter()
        .zip(target.grid.omega.iter())
        .map(|(t, om)| {
            if lambda == 0.0 && linalg::sigma_min(t) < ILL_CONDITIONED * peak {
                return Err(SynthesisError::IllConditioned(*om));
            }
            let th = t.adjoint();
            let gram = &th * t + CMat::identity(n, n) * Complex64::new(reg, 0.0);
            linalg::solve(&gram, &th).ok_or(SynthesisError::IllConditioned(*om))
        })
        .collect::<Result<Vec<_>>>()?;
    let half = m / 2;
    let ny = w[0].nrows();
    let nu = w[0].ncols();
    let mut taps = Vec::with_capacity(2 * preview + 1);
    for lag in -(preview as i64)..=(preview as i64) {
        let mut h = DMatrix::<f64>::zeros(ny, nu);
        for (q, wq) in w.iter().enumerate() {
            let weight = if q == 0 || q == half { 1.0 } else { 2.0 };
            let ph = Complex64::from_polar(1.0, 2.0 * PI * (q as f64) * (lag as f64) / m as f64);
            for i in 0..ny {
                for j in 0..nu {
                    h[(i, j)] += weight * (wq[(i, j)] * ph).re;
                }
            }
        }
        taps.push(h / m as f64);
    }
    let fir = NoncausalFir { preview, taps, ts: target.grid.ts };
    let err = fit_error(&fir, target)?;
    Ok((fir, err))
}

/// max_ω σ̄(I − L(ω)T(ω)).
pub fn fit_error(l: &NoncausalFir, target: &FrfMatrix) -> Result<f64> {
    let mut worst = 0.0_f64;
    for (t, w) in target.data.iter().zip(target.grid.omega.iter()) {
        let lr = l.response(*w)?;
        let e = CMat::identity(lr.nrows(), t.ncols()) - lr * t;
        worst = worst.max(linalg::sigma_max(&e));
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Tuning

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TuneTarget {
    Convergent,
    Monotone,
}

impl TuneTarget {
    pub fn name(self) -> &'static str {
        match self {
            TuneTarget::Convergent => "convergent",
            TuneTarget::Monotone => "monotone",
        }
    }
}

impl std::str::FromStr for TuneTarget {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "convergent" => Ok(TuneTarget::Convergent),
            "monotone" => Ok(TuneTarget::Monotone),
            other => Err(format!("unknown target '{other}' (expected convergent or monotone)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignMode {
    Naive,
    Alg1,
    Alg2,
    Alg3,
}

impl DesignMode {
    pub fn name(self) -> &'static str {
        match self {
            DesignMode::Naive => "naive",
            DesignMode::Alg1 => "alg1",
            DesignMode::Alg2 => "alg2",
            DesignMode::Alg3 => "alg3",
        }
    }

    pub fn all() -> [DesignMode; 4] {
        [DesignMode::Naive, DesignMode::Alg1, DesignMode::Alg2, DesignMode::Alg3]
    }
}

impl std::str::FromStr for DesignMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "naive" => Ok(DesignMode::Naive),
            "alg1" => Ok(DesignMode::Alg1),
            "alg2" => Ok(DesignMode::Alg2),
            "alg3" => Ok(DesignMode::Alg3),
            other => Err(format!("unknown mode '{other}' (expected naive, alg1, alg2 or alg3)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneRange {
    pub low_hz: f64,
    pub high_hz: f64,
    pub resolution_hz: f64,
}

impl TuneRange {
    pub fn for_ts(ts: f64) -> Self {
        TuneRange { low_hz: TUNE_LOW_HZ, high_hz: 0.5 / ts - TUNE_RESOLUTION_HZ, resolution_hz: TUNE_RESOLUTION_HZ }
    }
}

/// Largest value in [lo, hi] for which a monotone predicate holds, to `res`.
pub fn bisect_max<F: Fn(f64) -> bool>(feasible: F, lo: f64, hi: f64, res: f64) -> Option<f64> {
    if feasible(hi) {
        return Some(hi);
    }
    if !feasible(lo) {
        return None;
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > res {
        let mid = 0.5 * (a + b);
        if feasible(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    Some(a)
}

/// Largest common cut-off with |q_d| below the spectral-radius (convergent) or singular-value (monotone) bound.
pub fn autotune_qd(
    m: &[CMat],
    grid: &FrequencyGrid,
    target: TuneTarget,
    order: u32,
    range: TuneRange,
) -> Result<f64> {
    let denom: Vec<f64> = m
        .iter()
        .map(|mk| match target {
            TuneTarget::Convergent => linalg::spectral_radius(mk),
            TuneTarget::Monotone => linalg::sigma_max(mk),
        })
        .collect();
    let feasible = |fc: f64| {
        let q = ZeroPhaseFilter { order, fc_hz: fc, ts: grid.ts };
        grid.omega.iter().zip(&denom).all(|(w, d)| analysis::lt_one(q.response(*w) * d))
    };
    bisect_max(feasible, range.low_hz, range.high_hz, range.resolution_hz)
        .ok_or(SynthesisError::NoFeasibleCutoff(range.low_hz))
}

pub fn q_response(grid: &FrequencyGrid, fc: &[f64], order: u32) -> DiagResponse {
    grid.omega
        .iter()
        .map(|w| {
            fc.iter()
                .map(|f| ZeroPhaseFilter { order, fc_hz: *f, ts: grid.ts }.response(*w))
                .collect()
        })
        .collect()
}

fn joint_ok(bounds: &JointBounds, grid: &FrequencyGrid, fc: &[f64], order: u32, target: TuneTarget) -> bool {
    let q = q_response(grid, fc, order);
    match target {
        TuneTarget::Convergent => bounds.convergent_everywhere(&q),
        TuneTarget::Monotone => bounds.monotone_everywhere(&q),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecentralizedTuning {
    pub cutoffs: Vec<f64>,
    /// True when the common starting point had to be lowered below the common-Q result.
    pub lowered_start: bool,
    pub sweeps: usize,
}

/// Coordinate ascent on per-loop cut-offs under the joint condition, loops in order 1..n.
pub fn autotune_decentralized(
    bounds: &JointBounds,
    grid: &FrequencyGrid,
    start_hz: f64,
    target: TuneTarget,
    order: u32,
    range: TuneRange,
) -> Result<DecentralizedTuning> {
    let n = bounds.md_abs.first().map(Vec::len).unwrap_or(0);
    let mut lowered_start = false;
    let start = if joint_ok(bounds, grid, &vec![start_hz; n], order, target) {
        start_hz
    } else {
        lowered_start = true;
        bisect_max(
            |f| joint_ok(bounds, grid, &vec![f; n], order, target),
            range.low_hz,
            start_hz.min(range.high_hz),
            range.resolution_hz,
        )
        .ok_or(SynthesisError::NoFeasibleCutoff(range.low_hz))?
    };
    let mut fc = vec![start; n];
    let mut sweeps = 0;
    for _ in 0..100 {
        sweeps += 1;
        let mut improved = false;
        for i in 0..n {
            let base = fc.clone();
            let best = bisect_max(
                |x| {
                    let mut f = base.clone();
                    f[i] = x;
                    joint_ok(bounds, grid, &f, order, target)
                },
                fc[i],
                range.high_hz,
                range.resolution_hz,
            )
            .unwrap_or(fc[i]);
            if best > fc[i] + range.resolution_hz {
                improved = true;
            }
            fc[i] = fc[i].max(best);
        }
        if !improved {
            break;
        }
    }
    Ok(DecentralizedTuning { cutoffs: fc, lowered_start, sweeps })
}

// ---------------------------------------------------------------------------
// Designs

#[derive(Debug, Clone)]
pub struct DesignOptions {
    pub preview: usize,
    pub regularization: f64,
    pub target: TuneTarget,
    pub order: u32,
    pub uniform_points: usize,
    pub fit_bound: Option<f64>,
    pub range: Option<TuneRange>,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            preview: DEFAULT_PREVIEW,
            regularization: DEFAULT_REGULARIZATION,
            target: TuneTarget::Convergent,
            order: 1,
            uniform_points: DEFAULT_UNIFORM_POINTS,
            fit_bound: None,
            range: None,
        }
    }
}

/// Process-sensitivity models available for L design.
#[derive(Default)]
pub struct Models<'a> {
    pub full: Option<&'a dyn FrequencyResponse>,
    pub loops: Option<Vec<&'a dyn FrequencyResponse>>,
}

/// Verdict on the tuning target: the joint condition for the decentralized mode,
/// the spectral-radius or singular-value test otherwise.
pub fn target_verdict(mode: DesignMode, target: TuneTarget, s: &ReportSummary) -> bool {
    match (mode, target) {
        (DesignMode::Alg2, TuneTarget::Convergent) => s.joint_convergent,
        (DesignMode::Alg2, TuneTarget::Monotone) => s.joint_monotone,
        (_, TuneTarget::Convergent) => s.convergent,
        (_, TuneTarget::Monotone) => s.monotone,
    }
}

pub const MODEL_MISSING_MSG: &str = "centralized mode requires full MIMO model";

#[derive(Debug, Clone)]
pub struct IlcDesign {
    pub mode: DesignMode,
    pub target: TuneTarget,
    pub l: NoncausalFir,
    pub q: Vec<ZeroPhaseFilter>,
    pub regularization: f64,
    pub fit_error: f64,
    pub lowered_start: bool,
    pub report: ConvergenceReport,
}

impl IlcDesign {
    pub fn cutoffs(&self) -> Vec<f64> {
        self.q.iter().map(|q| q.fc_hz).collect()
    }

    pub fn summary(&self) -> &ReportSummary {
        &self.report.summary
    }

    pub fn target_met(&self) -> bool {
        target_verdict(self.mode, self.target, &self.report.summary)
    }

    pub fn to_json(&self, meta: &serde_json::Value) -> String {
        let v = serde_json::json!({
            "meta": meta,
            "mode": self.mode,
            "target": self.target,
            "ts": self.l.ts,
            "preview": self.l.preview,
            "regularization": self.regularization,
            "fit_error": self.fit_error,
            "q": self.q.iter().map(|q| serde_json::json!({"order": q.order, "fc_hz": q.fc_hz})).collect::<Vec<_>>(),
            "l": self.l.to_doc(),
            "report": self.report.summary,
        });
        serde_json::to_string_pretty(&v).expect("serializable")
    }
}

/// Filters loaded back from a design file.
#[derive(Debug, Clone)]
pub struct DesignFilters {
    pub mode: DesignMode,
    pub target: TuneTarget,
    pub l: NoncausalFir,
    pub q: Vec<ZeroPhaseFilter>,
}

impl DesignFilters {
    pub fn from_json(s: &str) -> std::result::Result<Self, String> {
        let v: serde_json::Value = serde_json::from_str(s).map_err(|e| format!("json: {e}"))?;
        let mode: DesignMode = serde_json::from_value(v["mode"].clone()).map_err(|e| format!("mode: {e}"))?;
        let target: TuneTarget = serde_json::from_value(v["target"].clone()).map_err(|e| format!("target: {e}"))?;
        let l = NoncausalFir::from_doc(&v["l"]).map_err(|e| format!("l: {e}"))?;
        let q = v["q"]
            .as_array()
            .ok_or("q: expected an array")?
            .iter()
            .map(|e| {
                let order = e["order"].as_u64().ok_or("q.order missing")? as u32;
                let fc = e["fc_hz"].as_f64().ok_or("q.fc_hz missing")?;
                design_zero_phase(fc, l.ts, order).map_err(|e| e.to_string())
            })
            .collect::<std::result::Result<Vec<_>, String>>()?;
        Ok(DesignFilters { mode, target, l, q })
    }
}

impl From<&IlcDesign> for DesignFilters {
    fn from(d: &IlcDesign) -> Self {
        DesignFilters { mode: d.mode, target: d.target, l: d.l.clone(), q: d.q.clone() }
    }
}

fn sample_uniform(sys: &dyn FrequencyResponse, points: usize) -> Result<FrfMatrix> {
    let grid = FrequencyGrid::uniform_half(points, sys.ts()).map_err(|e| SynthesisError::InvalidOption(e.to_string()))?;
    Ok(evaluate_frf(sys, &grid)?)
}

fn siso_entry(frf: &FrfMatrix, i: usize) -> FrfMatrix {
    FrfMatrix::from_fn(&frf.grid, |k, _| CMat::from_element(1, 1, frf.data[k][(i, i)]))
}

/// L from the per-loop models (diagonal) or from the full model.
pub fn design_learning_filter(mode: DesignMode, models: &Models, n: usize, opts: &DesignOptions) -> Result<(NoncausalFir, f64)> {
    match mode {
        DesignMode::Alg3 => {
            let full = models.full.ok_or_else(|| SynthesisError::ModelMissing(MODEL_MISSING_MSG.into()))?;
            let t = sample_uniform(full, opts.uniform_points)?;
            invert_frf_to_fir(&t, opts.preview, opts.regularization)
        }
        _ => {
            let targets: Vec<FrfMatrix> = if let Some(loops) = &models.loops {
                if loops.len() != n {
                    return Err(SynthesisError::ModelMissing(format!("expected {n} loop models, got {}", loops.len())));
                }
                loops.iter().map(|m| sample_uniform(*m, opts.uniform_points)).collect::<Result<_>>()?
            } else if let Some(full) = models.full {
                let t = sample_uniform(full, opts.uniform_points)?;
                (0..n).map(|i| siso_entry(&t, i)).collect()
            } else {
                return Err(SynthesisError::ModelMissing("per-loop or full model required".into()));
            };
            let mut filters = Vec::with_capacity(n);
            let mut worst = 0.0_f64;
            for t in &targets {
                let (f, e) = invert_frf_to_fir(t, opts.preview, opts.regularization)?;
                worst = worst.max(e);
                filters.push(f);
            }
            Ok((NoncausalFir::diagonal(&filters), worst))
        }
    }
}

/// Runs one design mode: learning filter, robustness filter tuning and the attached report.
pub fn build_design(mode: DesignMode, models: &Models, j_frf: &FrfMatrix, opts: &DesignOptions) -> Result<IlcDesign> {
    if !j_frf.is_square() {
        return Err(SynthesisError::InvalidOption("J must be square".into()));
    }
    let n = j_frf.ny();
    let grid = &j_frf.grid;
    let range = opts.range.unwrap_or_else(|| TuneRange::for_ts(grid.ts));
    let (l, fit) = design_learning_filter(mode, models, n, opts)?;
    if let Some(bound) = opts.fit_bound {
        if fit > bound {
            return Err(SynthesisError::FitTooCoarse { error: fit, bound });
        }
    }
    let l_frf = evaluate_frf(&l, grid)?;
    let m = analysis::iteration_matrix(&l_frf, j_frf)?;
    let factors = analysis::factorize_m(grid, m.clone())?;
    let bounds = JointBounds::new(&factors);
    let mut lowered_start = false;
    let cutoffs: Vec<f64> = match mode {
        DesignMode::Naive => (0..n)
            .map(|i| {
                let mii: Vec<f64> = m.iter().map(|mk| mk[(i, i)].norm()).collect();
                bisect_max(
                    |fc| {
                        let q = ZeroPhaseFilter { order: opts.order, fc_hz: fc, ts: grid.ts };
                        grid.omega.iter().zip(&mii).all(|(w, d)| analysis::lt_one(q.response(*w) * d))
                    },
                    range.low_hz,
                    range.high_hz,
                    range.resolution_hz,
                )
                .ok_or(SynthesisError::NoFeasibleCutoff(range.low_hz))
            })
            .collect::<Result<_>>()?,
        DesignMode::Alg1 | DesignMode::Alg3 => vec![autotune_qd(&m, grid, opts.target, opts.order, range)?; n],
        DesignMode::Alg2 => {
            let start = autotune_qd(&m, grid, opts.target, opts.order, range)?;
            let t = autotune_decentralized(&bounds, grid, start, opts.target, opts.order, range)?;
            lowered_start = t.lowered_start;
            t.cutoffs
        }
    };
    let q: Vec<ZeroPhaseFilter> =
        cutoffs.iter().map(|f| design_zero_phase(*f, grid.ts, opts.order)).collect::<Result<_>>()?;
    let report = analysis::analyze_with_bounds(&q_response(grid, &cutoffs, opts.order), &factors, bounds)?;
    Ok(IlcDesign {
        mode,
        target: opts.target,
        l,
        q,
        regularization: opts.regularization,
        fit_error: fit,
        lowered_start,
        report,
    })
}
