//! Convergence and robustness conditions for the iteration f ↦ Q(I − LJ)f.
//!
//! Per frequency: spectral radius and largest singular value of Q(I − LJ), the admissible
//! common robustness filter magnitudes, the factorization M = M_d(I + E) with its
//! Gershgorin-type and D-scaled structured-singular-value right-hand sides, and the joint
//! per-loop check that certifies a diagonal Q.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frf::{FrequencyGrid, FrfMatrix};
use crate::linalg::{self, CMat};

/// Open inequalities `x < 1` are checked as `x ≤ 1 − STRICT_MARGIN`.
pub const STRICT_MARGIN: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("diagonal entry M_{loop_index}{loop_index} is zero at omega = {omega} while its row is not")]
    ZeroDiagonalM { loop_index: usize, omega: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// Diagonal filter magnitudes per grid point: `q[k][i]` for loop i at ω_k.
pub type DiagResponse = Vec<Vec<f64>>;

pub fn lt_one(x: f64) -> bool {
    x <= 1.0 - STRICT_MARGIN
}

/// |lhs| < rhs in the strict numerical sense.
pub fn below(lhs: f64, rhs: f64) -> bool {
    lhs <= (1.0 - STRICT_MARGIN) * rhs
}

fn check_dims(l: &FrfMatrix, j: &FrfMatrix) -> Result<usize> {
    if !j.is_square() || !l.is_square() || l.ny() != j.ny() {
        return Err(AnalysisError::DimensionMismatch(format!(
            "L is {}x{}, J is {}x{}",
            l.ny(),
            l.nu(),
            j.ny(),
            j.nu()
        )));
    }
    if l.len() != j.len() {
        return Err(AnalysisError::DimensionMismatch("L and J are sampled on different grids".into()));
    }
    Ok(j.ny())
}

/// M(ω) = I − L(ω)J(ω).
pub fn iteration_matrix(l: &FrfMatrix, j: &FrfMatrix) -> Result<Vec<CMat>> {
    let n = check_dims(l, j)?;
    Ok(l.data
        .iter()
        .zip(j.data.iter())
        .map(|(lk, jk)| linalg::identity(n) - lk * jk)
        .collect())
}

fn apply_q(q: &[f64], m: &CMat) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * q[i])
}

fn check_q(q: &DiagResponse, k: usize, n: usize) -> Result<()> {
    if q.len() != k || q.iter().any(|v| v.len() != n) {
        return Err(AnalysisError::DimensionMismatch(format!("Q response must be {k} x {n}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct IterationFactors {
    pub grid: FrequencyGrid,
    pub m: Vec<CMat>,
    pub md: Vec<Vec<Complex64>>,
    pub e: Vec<CMat>,
}

/// Splits M = M_d(I + E). A row of M that is entirely zero gets a zero row in E.
pub fn factorize_m(grid: &FrequencyGrid, m: Vec<CMat>) -> Result<IterationFactors> {
    let mut md = Vec::with_capacity(m.len());
    let mut e = Vec::with_capacity(m.len());
    for (k, mk) in m.iter().enumerate() {
        let n = mk.nrows();
        let d: Vec<Complex64> = (0..n).map(|i| mk[(i, i)]).collect();
        for i in 0..n {
            if d[i].norm() == 0.0 && (0..n).any(|j| mk[(i, j)].norm() != 0.0) {
                return Err(AnalysisError::ZeroDiagonalM { loop_index: i + 1, omega: grid.omega[k] });
            }
        }
        e.push(CMat::from_fn(n, n, |i, j| {
            if i == j || d[i].norm() == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                mk[(i, j)] / d[i]
            }
        }));
        md.push(d);
    }
    Ok(IterationFactors { grid: grid.clone(), m, md, e })
}

pub fn factorize(l: &FrfMatrix, j: &FrfMatrix) -> Result<IterationFactors> {
    factorize_m(&j.grid, iteration_matrix(l, j)?)
}

#[derive(Debug, Clone)]
pub struct Thm1 {
    pub rho: Vec<f64>,
    pub verdict: bool,
}

pub fn check_convergence_thm1(q: &DiagResponse, l: &FrfMatrix, j: &FrfMatrix) -> Result<Thm1> {
    let m = iteration_matrix(l, j)?;
    check_q(q, m.len(), j.ny())?;
    let rho: Vec<f64> = m.iter().zip(q).map(|(mk, qk)| linalg::spectral_radius(&apply_q(qk, mk))).collect();
    let verdict = rho.iter().all(|r| lt_one(*r));
    Ok(Thm1 { rho, verdict })
}

#[derive(Debug, Clone)]
pub struct Thm2 {
    pub sigma: Vec<f64>,
    pub gamma: f64,
    pub verdict: bool,
}

pub fn check_monotonic_thm2(q: &DiagResponse, l: &FrfMatrix, j: &FrfMatrix) -> Result<Thm2> {
    let m = iteration_matrix(l, j)?;
    check_q(q, m.len(), j.ny())?;
    let sigma: Vec<f64> = m.iter().zip(q).map(|(mk, qk)| linalg::sigma_max(&apply_q(qk, mk))).collect();
    let gamma = sigma.iter().fold(0.0_f64, |a, s| a.max(*s));
    Ok(Thm2 { sigma, gamma, verdict: lt_one(gamma) })
}

/// Per frequency (1/ρ(I − LJ), 1/σ̄(I − LJ)); +∞ where the denominator vanishes.
pub fn qd_feasible_bound(l: &FrfMatrix, j: &FrfMatrix) -> Result<Vec<(f64, f64)>> {
    Ok(iteration_matrix(l, j)?
        .iter()
        .map(|m| {
            let r = linalg::spectral_radius(m);
            let s = linalg::sigma_max(m);
            (recip(r), recip(s))
        })
        .collect())
}

fn recip(x: f64) -> f64 {
    if x == 0.0 {
        f64::INFINITY
    } else {
        1.0 / x
    }
}

#[derive(Debug, Clone)]
pub struct GershgorinBounds {
    /// `rhs20[k][i]` = 1/Σ_j |I+E|_ij.
    pub rhs20: Vec<Vec<f64>>,
    /// `rhs21[k][i]` = 1/Σ_j |I+E|_ji.
    pub rhs21: Vec<Vec<f64>>,
    /// `rhs22[k][i]` = 1/√(Σ_j |(I+E)(I+E)ᴴ|_ij).
    pub rhs22: Vec<Vec<f64>>,
}

fn i_plus(e: &CMat) -> CMat {
    e + linalg::identity(e.nrows())
}

pub fn gershgorin_bounds_thm4(f: &IterationFactors) -> GershgorinBounds {
    let mut rhs20 = Vec::with_capacity(f.e.len());
    let mut rhs21 = Vec::with_capacity(f.e.len());
    let mut rhs22 = Vec::with_capacity(f.e.len());
    for e in &f.e {
        let a = i_plus(e);
        let n = a.nrows();
        let aah = &a * a.adjoint();
        rhs20.push((0..n).map(|i| 1.0 / (0..n).map(|j| a[(i, j)].norm()).sum::<f64>()).collect());
        rhs21.push((0..n).map(|i| 1.0 / (0..n).map(|j| a[(j, i)].norm()).sum::<f64>()).collect());
        rhs22.push((0..n).map(|i| 1.0 / (0..n).map(|j| aah[(i, j)].norm()).sum::<f64>().sqrt()).collect());
    }
    GershgorinBounds { rhs20, rhs21, rhs22 }
}

#[derive(Debug, Clone)]
pub struct SsvBounds {
    /// 1/μ̂(I + E).
    pub rhs24: Vec<f64>,
    /// 1/√μ̂((I + E)(I + E)ᴴ).
    pub rhs25: Vec<f64>,
    /// Grid points where the scaling iteration hit its cap.
    pub warnings: usize,
}

pub fn ssv_bounds_thm5(f: &IterationFactors) -> SsvBounds {
    let mut warnings = 0;
    let mut rhs24 = Vec::with_capacity(f.e.len());
    let mut rhs25 = Vec::with_capacity(f.e.len());
    for e in &f.e {
        let a = i_plus(e);
        let m1 = linalg::mu_upper_diag(&a);
        let m2 = linalg::mu_upper_diag(&(&a * a.adjoint()));
        warnings += usize::from(!m1.converged) + usize::from(!m2.converged);
        rhs24.push(1.0 / m1.value);
        rhs25.push(1.0 / m2.value.sqrt());
    }
    SsvBounds { rhs24, rhs25, warnings }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    Eq20,
    Eq21,
    Eq22,
    Eq24,
    Eq25,
}

impl Criterion {
    pub fn label(self) -> &'static str {
        match self {
            Criterion::Eq20 => "Eq20",
            Criterion::Eq21 => "Eq21",
            Criterion::Eq22 => "Eq22",
            Criterion::Eq24 => "Eq24",
            Criterion::Eq25 => "Eq25",
        }
    }
}

/// Precomputed, Q-independent right-hand sides together with |M_ii|.
#[derive(Debug, Clone)]
pub struct JointBounds {
    pub md_abs: Vec<Vec<f64>>,
    pub thm4: GershgorinBounds,
    pub thm5: SsvBounds,
}

impl JointBounds {
    pub fn new(f: &IterationFactors) -> Self {
        JointBounds {
            md_abs: f.md.iter().map(|d| d.iter().map(|z| z.norm()).collect()).collect(),
            thm4: gershgorin_bounds_thm4(f),
            thm5: ssv_bounds_thm5(f),
        }
    }

    pub fn len(&self) -> usize {
        self.md_abs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.md_abs.is_empty()
    }

    fn all_loops(&self, k: usize, q: &[f64], rhs: impl Fn(usize) -> f64) -> bool {
        (0..q.len()).all(|i| below(q[i].abs() * self.md_abs[k][i], rhs(i)))
    }

    fn slack(&self, k: usize, q: &[f64], rhs: impl Fn(usize) -> f64) -> f64 {
        (0..q.len())
            .map(|i| rhs(i) - q[i].abs() * self.md_abs[k][i])
            .fold(f64::INFINITY, f64::min)
    }

    /// First convergence criterion (Eq20, Eq21, Eq24 order) satisfied for every loop at ω_k.
    pub fn convergence_label(&self, k: usize, q: &[f64]) -> Option<Criterion> {
        let t4 = &self.thm4;
        if self.all_loops(k, q, |i| t4.rhs20[k][i]) {
            Some(Criterion::Eq20)
        } else if self.all_loops(k, q, |i| t4.rhs21[k][i]) {
            Some(Criterion::Eq21)
        } else if self.all_loops(k, q, |_| self.thm5.rhs24[k]) {
            Some(Criterion::Eq24)
        } else {
            None
        }
    }

    /// First monotonicity criterion (Eq22, Eq25 order) satisfied for every loop at ω_k.
    pub fn monotone_label(&self, k: usize, q: &[f64]) -> Option<Criterion> {
        if self.all_loops(k, q, |i| self.thm4.rhs22[k][i]) {
            Some(Criterion::Eq22)
        } else if self.all_loops(k, q, |_| self.thm5.rhs25[k]) {
            Some(Criterion::Eq25)
        } else {
            None
        }
    }

    pub fn convergence_slack(&self, k: usize, q: &[f64]) -> f64 {
        let t4 = &self.thm4;
        self.slack(k, q, |i| t4.rhs20[k][i])
            .max(self.slack(k, q, |i| t4.rhs21[k][i]))
            .max(self.slack(k, q, |_| self.thm5.rhs24[k]))
    }

    pub fn monotone_slack(&self, k: usize, q: &[f64]) -> f64 {
        self.slack(k, q, |i| self.thm4.rhs22[k][i]).max(self.slack(k, q, |_| self.thm5.rhs25[k]))
    }

    /// Fast path for tuning: does the convergence joint condition hold at every grid point?
    pub fn convergent_everywhere(&self, q: &DiagResponse) -> bool {
        (0..self.len()).all(|k| self.convergence_label(k, &q[k]).is_some())
    }

    pub fn monotone_everywhere(&self, q: &DiagResponse) -> bool {
        (0..self.len()).all(|k| self.monotone_label(k, &q[k]).is_some())
    }
}

#[derive(Debug, Clone)]
pub struct JointCheck {
    pub convergent: Vec<bool>,
    pub monotone: Vec<bool>,
    pub convergence_label: Vec<Option<Criterion>>,
    pub monotone_label: Vec<Option<Criterion>>,
    pub verdict_convergent: bool,
    pub verdict_monotone: bool,
    pub margin_convergent: f64,
    pub margin_monotone: f64,
    /// Grid index with the smallest convergence slack.
    pub worst_index: usize,
}

pub fn joint_condition_check(bounds: &JointBounds, q: &DiagResponse) -> JointCheck {
    let k = bounds.len();
    let convergence_label: Vec<_> = (0..k).map(|i| bounds.convergence_label(i, &q[i])).collect();
    let monotone_label: Vec<_> = (0..k).map(|i| bounds.monotone_label(i, &q[i])).collect();
    let cs: Vec<f64> = (0..k).map(|i| bounds.convergence_slack(i, &q[i])).collect();
    let ms: Vec<f64> = (0..k).map(|i| bounds.monotone_slack(i, &q[i])).collect();
    let mut worst_index = 0;
    for (i, s) in cs.iter().enumerate() {
        if *s < cs[worst_index] {
            worst_index = i;
        }
    }
    JointCheck {
        convergent: convergence_label.iter().map(Option::is_some).collect(),
        monotone: monotone_label.iter().map(Option::is_some).collect(),
        verdict_convergent: convergence_label.iter().all(Option::is_some),
        verdict_monotone: monotone_label.iter().all(Option::is_some),
        convergence_label,
        monotone_label,
        margin_convergent: cs.iter().copied().fold(f64::INFINITY, f64::min),
        margin_monotone: ms.iter().copied().fold(f64::INFINITY, f64::min),
        worst_index,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub gamma: f64,
    pub rho_max: f64,
    /// ρ(Q(I − LJ)) < 1 on the grid.
    pub convergent: bool,
    /// σ̄(Q(I − LJ)) < 1 on the grid.
    pub monotone: bool,
    pub joint_convergent: bool,
    pub joint_monotone: bool,
    /// Frequency with the largest ρ(Q(I − LJ)).
    pub worst_omega: f64,
    pub worst_hz: f64,
    /// Frequency with the smallest joint convergence slack.
    pub joint_worst_omega: f64,
    pub margin_rho: f64,
    pub margin_sigma: f64,
    pub margin_joint_convergent: f64,
    pub margin_joint_monotone: f64,
    pub mu_warnings: usize,
    /// D-scaling is exact for at most three scalar blocks.
    pub mu_bound_exact: bool,
    pub loops: usize,
    pub grid_points: usize,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub grid: FrequencyGrid,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    pub qm_abs: Vec<Vec<f64>>,
    pub bounds: JointBounds,
    pub joint: JointCheck,
    pub summary: ReportSummary,
}

/// Full analysis of a diagonal Q with arbitrary L against sampled J.
pub fn analyze(q: &DiagResponse, l: &FrfMatrix, j: &FrfMatrix) -> Result<ConvergenceReport> {
    let factors = factorize(l, j)?;
    let bounds = JointBounds::new(&factors);
    analyze_with_bounds(q, &factors, bounds)
}

pub fn analyze_with_bounds(q: &DiagResponse, f: &IterationFactors, bounds: JointBounds) -> Result<ConvergenceReport> {
    let n = f.m.first().map(|m| m.nrows()).unwrap_or(0);
    check_q(q, f.m.len(), n)?;
    let qm: Vec<CMat> = f.m.iter().zip(q).map(|(m, qk)| apply_q(qk, m)).collect();
    let rho: Vec<f64> = qm.iter().map(linalg::spectral_radius).collect();
    let sigma: Vec<f64> = qm.iter().map(linalg::sigma_max).collect();
    let qm_abs: Vec<Vec<f64>> = (0..q.len())
        .map(|k| (0..n).map(|i| q[k][i].abs() * bounds.md_abs[k][i]).collect())
        .collect();
    let joint = joint_condition_check(&bounds, q);
    let mut worst = 0;
    for (k, r) in rho.iter().enumerate() {
        if *r > rho[worst] {
            worst = k;
        }
    }
    let gamma = sigma.iter().fold(0.0_f64, |a, s| a.max(*s));
    let rho_max = rho[worst];
    let summary = ReportSummary {
        gamma,
        rho_max,
        convergent: rho.iter().all(|r| lt_one(*r)),
        monotone: lt_one(gamma),
        joint_convergent: joint.verdict_convergent,
        joint_monotone: joint.verdict_monotone,
        worst_omega: f.grid.omega[worst],
        worst_hz: f.grid.hz(worst),
        joint_worst_omega: f.grid.omega[joint.worst_index],
        margin_rho: 1.0 - rho_max,
        margin_sigma: 1.0 - gamma,
        margin_joint_convergent: joint.margin_convergent,
        margin_joint_monotone: joint.margin_monotone,
        mu_warnings: bounds.thm5.warnings,
        mu_bound_exact: n <= 3,
        loops: n,
        grid_points: f.grid.len(),
    };
    Ok(ConvergenceReport { grid: f.grid.clone(), rho, sigma, qm_abs, bounds, joint, summary })
}

impl ConvergenceReport {
    pub fn loops(&self) -> usize {
        self.summary.loops
    }

    pub fn label(&self, k: usize) -> String {
        let c = self.joint.convergence_label[k].map(Criterion::label).unwrap_or("none");
        match self.joint.monotone_label[k] {
            Some(m) => format!("{c}+{}", m.label()),
            None => c.to_string(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        let n = self.loops();
        let mut cols = vec!["omega".to_string(), "rho".into(), "sigma_max".into()];
        for i in 1..=n {
            cols.push(format!("q{i}M{i}{i}_abs"));
        }
        for name in ["rhs_eq20", "rhs_eq21", "rhs_eq22"] {
            for i in 1..=n {
                cols.push(format!("{name}_{i}"));
            }
        }
        cols.extend(["rhs_eq24", "rhs_eq25", "criterion_label", "convergent", "monotone"].map(String::from));
        writeln!(w, "{}", cols.join(","))?;
        let t4 = &self.bounds.thm4;
        for k in 0..self.grid.len() {
            let mut row = vec![
                format!("{}", self.grid.omega[k]),
                format!("{}", self.rho[k]),
                format!("{}", self.sigma[k]),
            ];
            row.extend(self.qm_abs[k].iter().map(|v| format!("{v}")));
            for src in [&t4.rhs20, &t4.rhs21, &t4.rhs22] {
                row.extend(src[k].iter().map(|v| format!("{v}")));
            }
            row.push(format!("{}", self.bounds.thm5.rhs24[k]));
            row.push(format!("{}", self.bounds.thm5.rhs25[k]));
            row.push(self.label(k));
            row.push(self.joint.convergent[k].to_string());
            row.push(self.joint.monotone[k].to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// `convergent=<bool> monotone=<bool> gamma=<val> worst_omega=<val>`
    pub fn verdict_line(&self) -> String {
        format!(
            "convergent={} monotone={} gamma={:.6} worst_omega={:.6}",
            self.summary.convergent, self.summary.monotone, self.summary.gamma, self.summary.worst_omega
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn grid1() -> FrequencyGrid {
        FrequencyGrid::new(vec![0.5], 1e-3).unwrap()
    }

    fn frf1(m: CMat) -> FrfMatrix {
        FrfMatrix::new(grid1(), vec![m]).unwrap()
    }

    fn real2(a: [f64; 4]) -> CMat {
        CMat::from_row_slice(2, 2, &[c(a[0], 0.0), c(a[1], 0.0), c(a[2], 0.0), c(a[3], 0.0)])
    }

    #[test]
    fn zero_diagonal_error_path() {
        let j = frf1(real2([1.0, 0.2, 0.3, 1.0]));
        let l = frf1(linalg::identity(2));
        let err = factorize(&l, &j).unwrap_err();
        assert!(matches!(err, AnalysisError::ZeroDiagonalM { loop_index: 1, .. }));
    }

    #[test]
    fn no_learning_gives_identity_factors() {
        let j = frf1(real2([1.0, 0.2, 0.3, 1.0]));
        let l = frf1(CMat::zeros(2, 2));
        let f = factorize(&l, &j).unwrap();
        assert_eq!(f.e[0], CMat::zeros(2, 2));
        assert_eq!(f.md[0], vec![c(1.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn diagonal_inputs_give_zero_interaction() {
        let j = frf1(real2([0.5, 0.0, 0.0, 2.0]));
        let l = frf1(real2([1.0, 0.0, 0.0, 0.25]));
        let f = factorize(&l, &j).unwrap();
        assert_eq!(f.e[0], CMat::zeros(2, 2));
    }

    #[test]
    fn q_zero_and_exact_inverse() {
        let j = frf1(real2([1.0, 0.2, 0.3, 1.0]));
        let jinv = frf1(linalg::inverse(&j.data[0]).unwrap());
        let t1 = check_convergence_thm1(&vec![vec![0.0, 0.0]], &jinv, &j).unwrap();
        assert_eq!(t1.rho[0], 0.0);
        let t2 = check_monotonic_thm2(&vec![vec![1.0, 1.0]], &jinv, &j).unwrap();
        assert!(t2.gamma < 1e-15 && t2.verdict);
        let b = qd_feasible_bound(&frf1(linalg::identity(2)), &frf1(linalg::identity(2))).unwrap();
        assert!(b[0].0.is_infinite() && b[0].1.is_infinite());
    }

    #[test]
    fn diagonal_bound_values() {
        // I − LJ = diag(0.5, 0.25) with L = I, J = diag(0.5, 0.75).
        let j = frf1(real2([0.5, 0.0, 0.0, 0.75]));
        let b = qd_feasible_bound(&frf1(linalg::identity(2)), &j).unwrap();
        assert!((b[0].0 - 2.0).abs() < 1e-15 && (b[0].1 - 2.0).abs() < 1e-15);
    }

    fn factors_for(ie: CMat) -> IterationFactors {
        let e = &ie - linalg::identity(2);
        IterationFactors { grid: grid1(), m: vec![ie], md: vec![vec![c(1.0, 0.0); 2]], e: vec![e] }
    }

    #[test]
    fn gershgorin_hand_values() {
        let f = factors_for(real2([1.0, 0.5, 0.5, 1.0]));
        let g = gershgorin_bounds_thm4(&f);
        for i in 0..2 {
            assert!((g.rhs20[0][i] - 1.0 / 1.5).abs() < 1e-15);
            assert!((g.rhs21[0][i] - 1.0 / 1.5).abs() < 1e-15);
            assert!((g.rhs22[0][i] - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ssv_hand_value() {
        let f = factors_for(real2([1.0, 0.5, 0.5, 1.0]));
        let s = ssv_bounds_thm5(&f);
        assert!((s.rhs24[0] - 2.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn siso_recovery_all_bounds_one() {
        let f = factors_for(linalg::identity(2));
        let g = gershgorin_bounds_thm4(&f);
        let s = ssv_bounds_thm5(&f);
        assert_eq!(g.rhs20[0], vec![1.0, 1.0]);
        assert_eq!(g.rhs22[0], vec![1.0, 1.0]);
        assert_eq!(s.rhs24[0], 1.0);
        assert_eq!(s.rhs25[0], 1.0);
    }

    #[test]
    fn joint_labels() {
        // Row sums violate Eq20 for loop 1 but the SSV bound certifies both loops.
        let f = factors_for(real2([1.0, 4.0, 0.01, 1.0]));
        let b = JointBounds::new(&f);
        let q = vec![vec![0.45, 0.45]];
        assert!(!b.all_loops(0, &q[0], |i| b.thm4.rhs20[0][i]));
        let chk = joint_condition_check(&b, &q);
        assert!(chk.verdict_convergent);
        assert_ne!(chk.convergence_label[0], Some(Criterion::Eq20));

        let f = factors_for(linalg::identity(2));
        let b = JointBounds::new(&f);
        let chk = joint_condition_check(&b, &vec![vec![0.9, 0.9]]);
        assert_eq!(chk.convergence_label[0], Some(Criterion::Eq20));

        let chk = joint_condition_check(&b, &vec![vec![1.5, 0.9]]);
        assert!(!chk.verdict_convergent && chk.worst_index == 0);
    }
}
