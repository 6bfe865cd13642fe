//! Finite-horizon trial-domain simulation in lifted form.
//!
//! Signals over a horizon of N samples with n channels are stored channel-major:
//! entry `c * N + t` is channel c at sample t.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::linalg;
use crate::lti::{LtiError, LtiSystem, ImpulseResponse, STABILITY_TOL};
use crate::synthesis::{DesignFilters, NoncausalFir, ZeroPhaseFilter};

pub const DENSE_LIMIT: usize = 2048;
pub const DIVERGENCE_CAP: f64 = 1e12;
pub const GROWTH_FLAG: f64 = 10.0;
pub const SOLVE_TOL: f64 = 1e-10;
pub const AUDIT_SKIP: f64 = 1e-12;
const GMRES_RESTART: usize = 120;
const GMRES_MAX_ITER: usize = 6000;
const KRYLOV_STEPS: usize = 160;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("operator is unstable (pole radius {0})")]
    UnstableOperator(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("lifted iteration is not contractive (spectral radius {0})")]
    NonContractive(f64),
    #[error("linear solve did not reach tolerance (relative residual {0:e})")]
    SolveFailed(f64),
    #[error(transparent)]
    Lti(#[from] LtiError),
}

pub type Result<T> = std::result::Result<T, SimError>;

// ---------------------------------------------------------------------------
// Lifted operators

#[derive(Debug, Clone, PartialEq)]
pub enum LiftedOperator {
    Identity { channels: usize, horizon: usize },
    /// Causal block-Toeplitz convolution by Markov parameters h₀..h_{N−1}.
    Convolution { markov: Vec<DMatrix<f64>>, horizon: usize },
    /// Banded block-Toeplitz operator of a two-sided FIR.
    Fir { fir: NoncausalFir, horizon: usize },
    /// Per-channel forward-backward filtering.
    ZeroPhase { filters: Vec<ZeroPhaseFilter>, horizon: usize },
    Dense { matrix: DMatrix<f64>, outputs: usize, inputs: usize, horizon: usize },
}

impl LiftedOperator {
    pub fn horizon(&self) -> usize {
        match self {
            LiftedOperator::Identity { horizon, .. }
            | LiftedOperator::Convolution { horizon, .. }
            | LiftedOperator::Fir { horizon, .. }
            | LiftedOperator::ZeroPhase { horizon, .. }
            | LiftedOperator::Dense { horizon, .. } => *horizon,
        }
    }

    pub fn outputs(&self) -> usize {
        match self {
            LiftedOperator::Identity { channels, .. } => *channels,
            LiftedOperator::Convolution { markov, .. } => markov[0].nrows(),
            LiftedOperator::Fir { fir, .. } => fir.rows(),
            LiftedOperator::ZeroPhase { filters, .. } => filters.len(),
            LiftedOperator::Dense { outputs, .. } => *outputs,
        }
    }

    pub fn inputs(&self) -> usize {
        match self {
            LiftedOperator::Identity { channels, .. } => *channels,
            LiftedOperator::Convolution { markov, .. } => markov[0].ncols(),
            LiftedOperator::Fir { fir, .. } => fir.cols(),
            LiftedOperator::ZeroPhase { filters, .. } => filters.len(),
            LiftedOperator::Dense { inputs, .. } => *inputs,
        }
    }

    pub fn rows(&self) -> usize {
        self.outputs() * self.horizon()
    }

    pub fn cols(&self) -> usize {
        self.inputs() * self.horizon()
    }

    /// Wraps a dense matrix acting on `channels`-channel signals.
    pub fn dense(matrix: DMatrix<f64>, outputs: usize, inputs: usize) -> Self {
        let horizon = matrix.nrows() / outputs.max(1);
        LiftedOperator::Dense { matrix, outputs, inputs, horizon }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols(), "lifted operand length");
        let n = self.horizon();
        match self {
            LiftedOperator::Identity { .. } => x.to_vec(),
            LiftedOperator::Convolution { markov, .. } => {
                let (ny, nu) = (markov[0].nrows(), markov[0].ncols());
                let mut y = vec![0.0; ny * n];
                for i in 0..ny {
                    for j in 0..nu {
                        let h: Vec<f64> = markov.iter().map(|m| m[(i, j)]).collect();
                        if h.iter().all(|v| *v == 0.0) {
                            continue;
                        }
                        let xj = &x[j * n..(j + 1) * n];
                        let yi = &mut y[i * n..(i + 1) * n];
                        for (t, out) in yi.iter_mut().enumerate() {
                            let mut acc = 0.0;
                            for s in 0..=t {
                                acc += h[s] * xj[t - s];
                            }
                            *out += acc;
                        }
                    }
                }
                y
            }
            LiftedOperator::Fir { fir, .. } => {
                let (ny, nu) = (fir.rows(), fir.cols());
                let k = fir.preview as i64;
                let mut y = vec![0.0; ny * n];
                for i in 0..ny {
                    for j in 0..nu {
                        let h: Vec<f64> = fir.taps.iter().map(|m| m[(i, j)]).collect();
                        if h.iter().all(|v| *v == 0.0) {
                            continue;
                        }
                        let xj = &x[j * n..(j + 1) * n];
                        for t in 0..n as i64 {
                            let mut acc = 0.0;
                            let lo = (-k).max(t - n as i64 + 1);
                            let hi = k.min(t);
                            for m in lo..=hi {
                                acc += h[(m + k) as usize] * xj[(t - m) as usize];
                            }
                            y[i * n + t as usize] += acc;
                        }
                    }
                }
                y
            }
            LiftedOperator::ZeroPhase { filters, .. } => {
                let mut y = Vec::with_capacity(x.len());
                for (c, f) in filters.iter().enumerate() {
                    y.extend(f.apply(&x[c * n..(c + 1) * n]));
                }
                y
            }
            LiftedOperator::Dense { matrix, .. } => (matrix * DVector::from_column_slice(x)).as_slice().to_vec(),
        }
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows(), "lifted operand length");
        let n = self.horizon();
        match self {
            LiftedOperator::Identity { .. } | LiftedOperator::ZeroPhase { .. } => self.apply(x),
            LiftedOperator::Convolution { markov, .. } => {
                let (ny, nu) = (markov[0].nrows(), markov[0].ncols());
                let mut y = vec![0.0; nu * n];
                for i in 0..ny {
                    for j in 0..nu {
                        let h: Vec<f64> = markov.iter().map(|m| m[(i, j)]).collect();
                        if h.iter().all(|v| *v == 0.0) {
                            continue;
                        }
                        let xi = &x[i * n..(i + 1) * n];
                        let yj = &mut y[j * n..(j + 1) * n];
                        for (s, out) in yj.iter_mut().enumerate() {
                            let mut acc = 0.0;
                            for t in s..n {
                                acc += h[t - s] * xi[t];
                            }
                            *out += acc;
                        }
                    }
                }
                y
            }
            LiftedOperator::Fir { fir, .. } => {
                let (ny, nu) = (fir.rows(), fir.cols());
                let k = fir.preview as i64;
                let mut y = vec![0.0; nu * n];
                for i in 0..ny {
                    for j in 0..nu {
                        let h: Vec<f64> = fir.taps.iter().map(|m| m[(i, j)]).collect();
                        if h.iter().all(|v| *v == 0.0) {
                            continue;
                        }
                        let xi = &x[i * n..(i + 1) * n];
                        for s in 0..n as i64 {
                            let mut acc = 0.0;
                            let lo = (-k).max(-s);
                            let hi = k.min(n as i64 - 1 - s);
                            for m in lo..=hi {
                                acc += h[(m + k) as usize] * xi[(s + m) as usize];
                            }
                            y[j * n + s as usize] += acc;
                        }
                    }
                }
                y
            }
            LiftedOperator::Dense { matrix, .. } => {
                (matrix.transpose() * DVector::from_column_slice(x)).as_slice().to_vec()
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.horizon();
        match self {
            LiftedOperator::Identity { .. } => DMatrix::identity(self.rows(), self.cols()),
            LiftedOperator::Dense { matrix, .. } => matrix.clone(),
            LiftedOperator::Convolution { markov, .. } => {
                let mut m = DMatrix::zeros(self.rows(), self.cols());
                for (s, h) in markov.iter().enumerate().take(n) {
                    for i in 0..h.nrows() {
                        for j in 0..h.ncols() {
                            for t in s..n {
                                m[(i * n + t, j * n + t - s)] = h[(i, j)];
                            }
                        }
                    }
                }
                m
            }
            LiftedOperator::Fir { fir, .. } => {
                let mut m = DMatrix::zeros(self.rows(), self.cols());
                let k = fir.preview as i64;
                for (idx, h) in fir.taps.iter().enumerate() {
                    let lag = idx as i64 - k;
                    for i in 0..h.nrows() {
                        for j in 0..h.ncols() {
                            for t in 0..n as i64 {
                                let s = t - lag;
                                if (0..n as i64).contains(&s) {
                                    m[(i * n + t as usize, j * n + s as usize)] = h[(i, j)];
                                }
                            }
                        }
                    }
                }
                m
            }
            LiftedOperator::ZeroPhase { .. } => {
                let cols = self.cols();
                let mut m = DMatrix::zeros(self.rows(), cols);
                let mut e = vec![0.0; cols];
                for c in 0..cols {
                    e[c] = 1.0;
                    m.set_column(c, &DVector::from_vec(self.apply(&e)));
                    e[c] = 0.0;
                }
                m
            }
        }
    }
}

/// Lifts a stable discrete-time system over `horizon` samples.
pub fn lift(sys: &LtiSystem, horizon: usize) -> Result<LiftedOperator> {
    if horizon == 0 {
        return Err(SimError::DimensionMismatch("horizon must be positive".into()));
    }
    let radius = match sys {
        LtiSystem::Transfer(t) => t.poles().iter().fold(0.0_f64, |a, p| a.max(p.norm())),
        LtiSystem::State(s) => {
            if s.is_continuous() {
                return Err(SimError::Lti(LtiError::Unsupported("lifting a continuous-time system".into())));
            }
            s.pole_radius()
        }
    };
    if radius >= 1.0 - STABILITY_TOL {
        return Err(SimError::UnstableOperator(radius));
    }
    Ok(LiftedOperator::Convolution { markov: sys.markov(horizon)?, horizon })
}

pub fn lift_fir(fir: &NoncausalFir, horizon: usize) -> LiftedOperator {
    LiftedOperator::Fir { fir: fir.clone(), horizon }
}

pub fn lift_zero_phase(filters: &[ZeroPhaseFilter], horizon: usize) -> LiftedOperator {
    LiftedOperator::ZeroPhase { filters: filters.to_vec(), horizon }
}

// ---------------------------------------------------------------------------
// Trial iteration

/// Lifted process maps S (r → e) and J (f → −e).
#[derive(Debug, Clone)]
pub struct LiftedPlant {
    pub s: LiftedOperator,
    pub j: LiftedOperator,
}

impl LiftedPlant {
    pub fn new(s: LiftedOperator, j: LiftedOperator) -> Result<Self> {
        if s.horizon() != j.horizon() || s.outputs() != j.outputs() || j.outputs() != j.inputs() {
            return Err(SimError::DimensionMismatch("S and J must share horizon and square channel count".into()));
        }
        Ok(LiftedPlant { s, j })
    }

    pub fn from_systems(s: &LtiSystem, j: &LtiSystem, horizon: usize) -> Result<Self> {
        LiftedPlant::new(lift(s, horizon)?, lift(j, horizon)?)
    }

    pub fn horizon(&self) -> usize {
        self.j.horizon()
    }

    pub fn channels(&self) -> usize {
        self.j.outputs()
    }
}

/// Lifted learning and robustness filters.
#[derive(Debug, Clone)]
pub struct LiftedIlc {
    pub q: LiftedOperator,
    pub l: LiftedOperator,
}

impl LiftedIlc {
    pub fn from_filters(d: &DesignFilters, horizon: usize) -> Self {
        LiftedIlc { q: lift_zero_phase(&d.q, horizon), l: lift_fir(&d.l, horizon) }
    }

    fn check(&self, plant: &LiftedPlant) -> Result<()> {
        let dim = plant.j.cols();
        for (name, op) in [("Q", &self.q), ("L", &self.l)] {
            if op.rows() != dim || op.cols() != dim {
                return Err(SimError::DimensionMismatch(format!("{name} does not match J")));
            }
        }
        Ok(())
    }

    /// A f = Q(f − L J f).
    pub fn iterate(&self, plant: &LiftedPlant, f: &[f64]) -> Vec<f64> {
        let lj = self.l.apply(&plant.j.apply(f));
        let d: Vec<f64> = f.iter().zip(&lj).map(|(a, b)| a - b).collect();
        self.q.apply(&d)
    }

    /// Aᵀ g = g − Jᵀ Lᵀ Qᵀ g, with Qᵀ applied first.
    pub fn iterate_transpose(&self, plant: &LiftedPlant, g: &[f64]) -> Vec<f64> {
        let qg = self.q.apply_transpose(g);
        let t = plant.j.apply_transpose(&self.l.apply_transpose(&qg));
        qg.iter().zip(&t).map(|(a, b)| a - b).collect()
    }

    pub fn iteration_dense(&self, plant: &LiftedPlant) -> DMatrix<f64> {
        let q = self.q.to_dense();
        let l = self.l.to_dense();
        let j = plant.j.to_dense();
        let dim = j.nrows();
        &q * (DMatrix::identity(dim, dim) - l * j)
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub e: Vec<f64>,
    pub f: Vec<f64>,
    pub e_norm: f64,
    pub f_dist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub records: Vec<TrialRecord>,
    pub channels: usize,
    pub horizon: usize,
    /// Set when ‖e_j‖ overflowed the cap or grew by `GROWTH_FLAG` over its running minimum.
    pub diverged: bool,
    pub truncated: bool,
    /// Largest ‖e_j‖ / min_{i ≤ j} ‖e_i‖ over the run.
    pub growth: f64,
}

impl TrialRun {
    pub fn error_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.e_norm).collect()
    }

    pub fn write_trace_csv<W: Write>(&self, mut w: W, header: &[String]) -> std::io::Result<()> {
        for h in header {
            writeln!(w, "# {h}")?;
        }
        writeln!(w, "trial,e_norm_F,f_dist_to_fixed,diverged")?;
        for r in &self.records {
            let d = r.f_dist.map(|v| format!("{v:e}")).unwrap_or_default();
            writeln!(w, "{},{:e},{},{}", r.trial, r.e_norm, d, self.diverged)?;
        }
        Ok(())
    }

    pub fn write_signals_csv<W: Write>(&self, record: &TrialRecord, mut w: W, header: &[String]) -> std::io::Result<()> {
        for h in header {
            writeln!(w, "# {h}")?;
        }
        let n = self.channels;
        let cols: Vec<String> = (1..=n).map(|c| format!("e_{c}")).chain((1..=n).map(|c| format!("f_{c}"))).collect();
        writeln!(w, "k,{}", cols.join(","))?;
        for t in 0..self.horizon {
            write!(w, "{t}")?;
            for c in 0..n {
                write!(w, ",{:e}", record.e[c * self.horizon + t])?;
            }
            for c in 0..n {
                write!(w, ",{:e}", record.f[c * self.horizon + t])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Iterates e_j = S r − J f_j and f_{j+1} = Q(f_j + L e_j) for j = 0..trials−1.
pub fn run_trials(
    ilc: &LiftedIlc,
    plant: &LiftedPlant,
    r: &[f64],
    trials: usize,
    f0: Option<&[f64]>,
    f_inf: Option<&[f64]>,
) -> Result<TrialRun> {
    ilc.check(plant)?;
    let dim = plant.j.cols();
    if r.len() != plant.s.cols() {
        return Err(SimError::DimensionMismatch(format!("reference has {} entries, expected {}", r.len(), plant.s.cols())));
    }
    let sr = plant.s.apply(r);
    let mut f = f0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; dim]);
    if f.len() != dim {
        return Err(SimError::DimensionMismatch("initial feedforward length".into()));
    }
    let mut records = Vec::with_capacity(trials);
    let mut diverged = false;
    let mut truncated = false;
    let mut growth = 1.0_f64;
    let mut running_min = f64::INFINITY;
    for trial in 0..trials {
        let jf = plant.j.apply(&f);
        let e: Vec<f64> = sr.iter().zip(&jf).map(|(a, b)| a - b).collect();
        let e_norm = norm(&e);
        let f_dist = f_inf.map(|fi| dist(fi, &f));
        let next = if trial + 1 < trials && e_norm.is_finite() && e_norm <= DIVERGENCE_CAP {
            let le = ilc.l.apply(&e);
            let u: Vec<f64> = f.iter().zip(&le).map(|(a, b)| a + b).collect();
            Some(ilc.q.apply(&u))
        } else {
            None
        };
        running_min = running_min.min(e_norm);
        if running_min > 0.0 {
            growth = growth.max(e_norm / running_min);
        }
        let overflow = !e_norm.is_finite() || e_norm > DIVERGENCE_CAP;
        records.push(TrialRecord { trial, e, f, e_norm, f_dist });
        if overflow {
            diverged = true;
            truncated = trial + 1 < trials;
            break;
        }
        match next {
            Some(n) => f = n,
            None => break,
        }
    }
    if growth >= GROWTH_FLAG {
        diverged = true;
    }
    Ok(TrialRun { records, channels: plant.channels(), horizon: plant.horizon(), diverged, truncated, growth })
}

// ---------------------------------------------------------------------------
// Spectral quantities of the lifted iteration

/// σ̄ of the lifted iteration operator, by Lanczos on AᵀA with full reorthogonalization.
pub fn lifted_gamma(ilc: &LiftedIlc, plant: &LiftedPlant) -> Result<f64> {
    ilc.check(plant)?;
    let dim = plant.j.cols();
    let op = |x: &[f64]| ilc.iterate_transpose(plant, &ilc.iterate(plant, x));
    Ok(lanczos_max(op, dim).sqrt())
}

fn start_vector(dim: usize) -> Vec<f64> {
    // Deterministic, non-degenerate start.
    let v: Vec<f64> = (0..dim).map(|i| 1.0 + ((i as f64 * 0.618_033_988_75).fract() - 0.5)).collect();
    let nv = norm(&v);
    v.iter().map(|x| x / nv).collect()
}

/// Largest eigenvalue of a symmetric positive semidefinite operator.
pub fn lanczos_max<F: Fn(&[f64]) -> Vec<f64>>(op: F, dim: usize) -> f64 {
    let steps = KRYLOV_STEPS.min(dim);
    let mut basis: Vec<Vec<f64>> = vec![start_vector(dim)];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    for k in 0..steps {
        let mut w = op(&basis[k]);
        let a: f64 = w.iter().zip(&basis[k]).map(|(x, y)| x * y).sum();
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bnorm = norm(&w);
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let top = SymmetricEigen::new(t).eigenvalues.iter().fold(f64::MIN, |a, v| a.max(*v));
        if bnorm <= 1e-14 * top.abs().max(1e-300) || (top - last).abs() <= 1e-13 * top.abs() {
            return top.max(0.0);
        }
        last = top;
        beta.push(bnorm);
        basis.push(w.iter().map(|x| x / bnorm).collect());
    }
    last.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoMethod {
    /// ρ ≤ σ̄ < 1.
    NormBound,
    Dense,
    Arnoldi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contraction {
    pub gamma: f64,
    /// Spectral radius, or the norm bound when that already certifies contraction.
    pub rho: f64,
    pub method: RhoMethod,
}

pub fn lifted_contraction(ilc: &LiftedIlc, plant: &LiftedPlant) -> Result<Contraction> {
    let gamma = lifted_gamma(ilc, plant)?;
    if gamma < 1.0 {
        return Ok(Contraction { gamma, rho: gamma, method: RhoMethod::NormBound });
    }
    let dim = plant.j.cols();
    if dim <= 512 {
        let a = ilc.iteration_dense(plant);
        let rho = a.complex_eigenvalues().iter().fold(0.0_f64, |m, l| m.max(l.norm()));
        return Ok(Contraction { gamma, rho, method: RhoMethod::Dense });
    }
    let rho = arnoldi_rho(|x| ilc.iterate(plant, x), dim);
    Ok(Contraction { gamma, rho, method: RhoMethod::Arnoldi })
}

/// Largest Ritz value modulus of a nonsymmetric operator.
pub fn arnoldi_rho<F: Fn(&[f64]) -> Vec<f64>>(op: F, dim: usize) -> f64 {
    let steps = KRYLOV_STEPS.min(dim);
    let mut v = vec![start_vector(dim)];
    let mut h = DMatrix::<f64>::zeros(steps + 1, steps);
    let mut m = steps;
    for k in 0..steps {
        let mut w = op(&v[k]);
        for _ in 0..2 {
            for (i, vi) in v.iter().enumerate() {
                let c: f64 = w.iter().zip(vi).map(|(x, y)| x * y).sum();
                h[(i, k)] += c;
                w.iter_mut().zip(vi).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = norm(&w);
        h[(k + 1, k)] = b;
        if b < 1e-14 {
            m = k + 1;
            break;
        }
        v.push(w.iter().map(|x| x / b).collect());
    }
    let hm = h.view((0, 0), (m, m)).into_owned();
    hm.complex_eigenvalues().iter().fold(0.0_f64, |a, l| a.max(l.norm()))
}

// ---------------------------------------------------------------------------
// Fixed points

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub f: Vec<f64>,
    pub e: Vec<f64>,
    pub residual: f64,
    pub contraction: Contraction,
}

/// Solves (I − Q(I − LJ)) f = Q L S r and returns e = S r − J f.
pub fn fixed_points(ilc: &LiftedIlc, plant: &LiftedPlant, r: &[f64]) -> Result<FixedPoint> {
    ilc.check(plant)?;
    let contraction = lifted_contraction(ilc, plant)?;
    if contraction.rho >= 1.0 {
        return Err(SimError::NonContractive(contraction.rho));
    }
    let dim = plant.j.cols();
    let sr = plant.s.apply(r);
    let b = ilc.q.apply(&ilc.l.apply(&sr));
    let apply = |x: &[f64]| -> Vec<f64> {
        let ax = ilc.iterate(plant, x);
        x.iter().zip(&ax).map(|(a, b)| a - b).collect()
    };
    let f = if norm(&b) == 0.0 {
        vec![0.0; dim]
    } else if dim <= DENSE_LIMIT {
        let a = DMatrix::identity(dim, dim) - ilc.iteration_dense(plant);
        let lu = a.lu();
        let mut x = lu.solve(&DVector::from_column_slice(&b)).ok_or(SimError::SolveFailed(f64::INFINITY))?;
        // One step of iterative refinement.
        let res = DVector::from_vec(apply(x.as_slice()));
        let corr = lu.solve(&(DVector::from_column_slice(&b) - res)).ok_or(SimError::SolveFailed(f64::INFINITY))?;
        x += corr;
        x.as_slice().to_vec()
    } else {
        gmres(apply, &b, SOLVE_TOL * 0.1)?
    };
    let res = apply(&f);
    let bn = norm(&b);
    let residual = if bn == 0.0 { 0.0 } else { dist(&res, &b) / bn };
    if residual > SOLVE_TOL {
        return Err(SimError::SolveFailed(residual));
    }
    let jf = plant.j.apply(&f);
    let e = sr.iter().zip(&jf).map(|(a, b)| a - b).collect();
    Ok(FixedPoint { f, e, residual, contraction })
}

/// Restarted GMRES from a zero initial guess.
pub fn gmres<F: Fn(&[f64]) -> Vec<f64>>(op: F, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let dim = b.len();
    let bn = norm(b);
    let mut x = vec![0.0; dim];
    let mut total = 0;
    let mut rel = 1.0;
    while total < GMRES_MAX_ITER {
        let ax = op(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        let beta = norm(&r);
        rel = beta / bn;
        if rel <= tol {
            return Ok(x);
        }
        let m = GMRES_RESTART.min(dim);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut h = DMatrix::<f64>::zeros(m + 1, m);
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            total += 1;
            let mut w = op(&v[k]);
            for (i, vi) in v.iter().enumerate() {
                let c: f64 = w.iter().zip(vi).map(|(p, q)| p * q).sum();
                h[(i, k)] = c;
                w.iter_mut().zip(vi).for_each(|(p, q)| *p -= c * q);
            }
            for (i, vi) in v.iter().enumerate() {
                let c: f64 = w.iter().zip(vi).map(|(p, q)| p * q).sum();
                h[(i, k)] += c;
                w.iter_mut().zip(vi).for_each(|(p, q)| *p -= c * q);
            }
            let hn = norm(&w);
            h[(k + 1, k)] = hn;
            for i in 0..k {
                let t = cs[i] * h[(i, k)] + sn[i] * h[(i + 1, k)];
                h[(i + 1, k)] = -sn[i] * h[(i, k)] + cs[i] * h[(i + 1, k)];
                h[(i, k)] = t;
            }
            let d = (h[(k, k)].powi(2) + h[(k + 1, k)].powi(2)).sqrt();
            cs[k] = h[(k, k)] / d;
            sn[k] = h[(k + 1, k)] / d;
            h[(k, k)] = d;
            h[(k + 1, k)] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() / bn <= tol || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|z| z / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[(i, j)] * y[j];
            }
            y[i] = s / h[(i, i)];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&v[j]).for_each(|(p, q)| *p += yj * q);
        }
    }
    Err(SimError::SolveFailed(rel))
}

// ---------------------------------------------------------------------------
// Monotonicity audit

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityAudit {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub gamma: f64,
    pub monotone: bool,
}

/// Ratios ‖f∞ − f_{j+1}‖ / ‖f∞ − f_j‖, checked against γ + tol.
pub fn monotonicity_audit(records: &[TrialRecord], f_inf: &[f64], gamma: f64, tol: f64) -> MonotonicityAudit {
    let d: Vec<f64> = records.iter().map(|r| dist(f_inf, &r.f)).collect();
    let ratios: Vec<f64> = d
        .windows(2)
        .filter(|w| w[0] >= AUDIT_SKIP)
        .map(|w| w[1] / w[0])
        .collect();
    let max_ratio = ratios.iter().fold(0.0_f64, |a, r| a.max(*r));
    let monotone = ratios.iter().all(|r| *r <= gamma + tol);
    MonotonicityAudit { ratios, max_ratio, gamma, monotone }
}

/// Spectral radius of a dense real matrix.
pub fn dense_spectral_radius(a: &DMatrix<f64>) -> f64 {
    let c = a.map(|v| linalg::c(v, 0.0));
    linalg::spectral_radius(&c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::{RationalTransfer, TransferMatrix};

    fn siso(num: Vec<f64>, den: Vec<f64>) -> LtiSystem {
        LtiSystem::Transfer(TransferMatrix::diagonal(1e-3, vec![RationalTransfer::new(num, den, 1e-3).unwrap()]).unwrap())
    }

    #[test]
    fn delay_lifts_to_shift() {
        let op = lift(&siso(vec![1.0], vec![1.0, 0.0]), 3).unwrap();
        let m = op.to_dense();
        assert_eq!(m, DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn advance_lifts_to_transpose_shift() {
        let mut taps = vec![DMatrix::zeros(1, 1); 3];
        taps[0][(0, 0)] = 1.0;
        let fir = NoncausalFir { preview: 1, taps, ts: 1e-3 };
        let m = lift_fir(&fir, 3).to_dense();
        assert_eq!(m, DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn unstable_operator_rejected() {
        assert!(matches!(lift(&siso(vec![1.0], vec![1.0, -1.2]), 8), Err(SimError::UnstableOperator(_))));
    }

    #[test]
    fn matrix_free_matches_dense_and_transpose() {
        let g = TransferMatrix::from_entries(
            1e-3,
            vec![
                vec![(vec![0.3, 0.1], vec![1.0, -0.5]), (vec![0.2], vec![1.0, 0.3])],
                vec![(vec![-0.1, 0.05], vec![1.0, -0.2, 0.1]), (vec![1.0], vec![1.0, -0.7])],
            ],
        )
        .unwrap();
        let n = 17;
        let ops = vec![
            lift(&LtiSystem::Transfer(g), n).unwrap(),
            lift_fir(
                &NoncausalFir {
                    preview: 3,
                    taps: (0..7).map(|k| DMatrix::from_fn(2, 2, |i, j| (k * 3 + i * 2 + j) as f64 * 0.1 - 0.7)).collect(),
                    ts: 1e-3,
                },
                n,
            ),
            lift_zero_phase(
                &[
                    crate::synthesis::design_zero_phase(50.0, 1e-3, 1).unwrap(),
                    crate::synthesis::design_zero_phase(120.0, 1e-3, 2).unwrap(),
                ],
                n,
            ),
        ];
        let x: Vec<f64> = (0..2 * n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        for op in &ops {
            let d = op.to_dense();
            let y = op.apply(&x);
            let yd = &d * DVector::from_column_slice(&x);
            assert!(dist(&y, yd.as_slice()) < 1e-12);
            let yt = op.apply_transpose(&x);
            let ytd = d.transpose() * DVector::from_column_slice(&x);
            assert!(dist(&yt, ytd.as_slice()) < 1e-12);
        }
    }

    fn scalar_plant(n: usize) -> LiftedPlant {
        let s = siso(vec![1.0, -0.5], vec![1.0, 0.0]);
        let j = siso(vec![1.0, 0.2], vec![1.0, -0.5]);
        LiftedPlant::from_systems(&s, &j, n).unwrap()
    }

    #[test]
    fn deadbeat_and_zero_q() {
        let n = 20;
        let plant = scalar_plant(n);
        let jinv = plant.j.to_dense().try_inverse().unwrap();
        let ilc = LiftedIlc { q: LiftedOperator::Identity { channels: 1, horizon: n }, l: LiftedOperator::dense(jinv, 1, 1) };
        let r: Vec<f64> = (0..n).map(|t| (t as f64 * 0.3).sin()).collect();
        let run = run_trials(&ilc, &plant, &r, 3, None, None).unwrap();
        assert!(run.records[1].e_norm < 1e-12);
        let fp = fixed_points(&ilc, &plant, &r).unwrap();
        assert!(norm(&fp.e) < 1e-8 * norm(&plant.s.apply(&r)));
        let audit = monotonicity_audit(&run.records, &fp.f, fp.contraction.gamma, 1e-9);
        assert!(audit.ratios.iter().all(|r| *r < 1e-9));

        let zero = LiftedIlc {
            q: LiftedOperator::dense(DMatrix::zeros(n, n), 1, 1),
            l: LiftedOperator::Identity { channels: 1, horizon: n },
        };
        let run = run_trials(&zero, &plant, &r, 4, None, None).unwrap();
        let sr = plant.s.apply(&r);
        for rec in &run.records[1..] {
            assert!(rec.f.iter().all(|v| *v == 0.0));
            assert!(dist(&rec.e, &sr) == 0.0);
        }
        let fp = fixed_points(&zero, &plant, &r).unwrap();
        assert!(fp.f.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn contraction_bound_holds() {
        let n = 64;
        let plant = scalar_plant(n);
        let ilc = LiftedIlc {
            q: LiftedOperator::Identity { channels: 1, horizon: n },
            l: LiftedOperator::dense(DMatrix::identity(n, n) * 0.5, 1, 1),
        };
        let gamma = lifted_gamma(&ilc, &plant).unwrap();
        let dense = ilc.iteration_dense(&plant);
        let exact = dense.singular_values().max();
        assert!((gamma - exact).abs() < 1e-9 * exact);
        let r: Vec<f64> = (0..n).map(|t| if t > 10 { 1.0 } else { 0.0 }).collect();
        let fp = fixed_points(&ilc, &plant, &r).unwrap();
        let run = run_trials(&ilc, &plant, &r, 51, None, Some(&fp.f)).unwrap();
        let d0 = run.records[0].f_dist.unwrap();
        let d50 = run.records[50].f_dist.unwrap();
        assert!(d50 <= gamma.powi(50) * d0 + 1e-8);
    }

    #[test]
    fn gmres_matches_dense_solve() {
        let n = 40;
        let a = DMatrix::from_fn(n, n, |i, j| if i == j { 2.0 } else { 0.3 / (1.0 + (i as f64 - j as f64).abs()) * if i > j { 1.0 } else { -0.5 } });
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let x = gmres(|v| (&a * DVector::from_column_slice(v)).as_slice().to_vec(), &b, 1e-12).unwrap();
        let xd = a.lu().solve(&DVector::from_column_slice(&b)).unwrap();
        assert!(dist(&x, xd.as_slice()) < 1e-10);
    }

    #[test]
    fn divergence_is_flagged() {
        let n = 32;
        let plant = scalar_plant(n);
        let ilc = LiftedIlc {
            q: LiftedOperator::Identity { channels: 1, horizon: n },
            l: LiftedOperator::dense(DMatrix::identity(n, n) * 3.0, 1, 1),
        };
        let r = vec![1.0; n];
        let run = run_trials(&ilc, &plant, &r, 40, None, None).unwrap();
        assert!(run.diverged);
    }
}
