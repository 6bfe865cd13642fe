//! Discrete-time LTI models: rational transfer functions, transfer matrices and
//! state-space realizations, with closed-loop interconnection, ZOH discretization,
//! frequency evaluation and transmission zeros.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frf::{FrequencyGrid, FrfMatrix};
use crate::linalg::CMat;
use crate::poly;

/// Poles with modulus at or above `1 - STABILITY_TOL` count as unstable.
pub const STABILITY_TOL: f64 = 1e-9;
/// Root-matching tolerance for common-factor cancellation.
pub const CANCEL_TOL: f64 = 1e-8;
/// Relative denominator magnitude below which a grid point is treated as a pole.
pub const POLE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtiError {
    #[error("pole on grid: entry ({row},{col}) at omega = {omega}")]
    PoleOnGrid { row: usize, col: usize, omega: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unstable closed loop: pole modulus {0}")]
    UnstableClosedLoop(f64),
    #[error("return difference I + GC is singular")]
    SingularReturnDifference,
    #[error("determinant is identically zero")]
    RankDeficient,
    #[error("invalid transfer function: {0}")]
    InvalidTransfer(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("unstable operator")]
    UnstableOperator,
}

pub type Result<T> = std::result::Result<T, LtiError>;

/// Anything that can be sampled on the unit circle.
pub trait FrequencyResponse {
    fn ny(&self) -> usize;
    fn nu(&self) -> usize;
    fn ts(&self) -> f64;
    /// Response at z = e^{iω}.
    fn response(&self, omega: f64) -> Result<CMat>;
}

/// Anything with a causal impulse response (Markov parameters h₀, h₁, ...).
pub trait ImpulseResponse {
    fn ny(&self) -> usize;
    fn nu(&self) -> usize;
    fn markov(&self, n: usize) -> Result<Vec<DMatrix<f64>>>;
}

// ---------------------------------------------------------------------------
// SISO rational transfer function

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalTransfer {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    #[serde(default = "default_ts")]
    pub ts: f64,
}

fn default_ts() -> f64 {
    1.0
}

impl RationalTransfer {
    pub fn new(num: Vec<f64>, den: Vec<f64>, ts: f64) -> Result<Self> {
        if !(ts > 0.0) {
            return Err(LtiError::InvalidTransfer(format!("sample time must be positive, got {ts}")));
        }
        if num.is_empty() || den.is_empty() {
            return Err(LtiError::InvalidTransfer("empty coefficient list".into()));
        }
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(LtiError::InvalidTransfer("non-finite coefficient".into()));
        }
        let den = poly::trim(&den);
        if den[0] == 0.0 {
            return Err(LtiError::InvalidTransfer("denominator is identically zero".into()));
        }
        Ok(Self { num: poly::trim(&num), den, ts })
    }

    pub fn gain(k: f64, ts: f64) -> Self {
        Self { num: vec![k], den: vec![1.0], ts }
    }

    pub fn causal(&self) -> bool {
        poly::is_zero(&self.num) || poly::degree(&self.num) <= poly::degree(&self.den)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        poly::eval(&self.num, z) / poly::eval(&self.den, z)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        poly::roots(&self.den)
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        if poly::is_zero(&self.num) {
            return Vec::new();
        }
        poly::roots(&self.num)
    }

    fn at_frequency(&self, omega: f64) -> std::result::Result<Complex64, ()> {
        let z = Complex64::from_polar(1.0, omega);
        let d = poly::eval(&self.den, z);
        let scale = self.den.iter().map(|c| c.abs()).sum::<f64>();
        if d.norm() <= POLE_TOL * scale {
            return Err(());
        }
        Ok(poly::eval(&self.num, z) / d)
    }

    /// Controllable canonical realization (A, B, C, D); requires a causal entry.
    pub fn realize(&self) -> Result<StateSpace> {
        if !self.causal() {
            return Err(LtiError::InvalidTransfer("non-causal entry cannot be realized".into()));
        }
        let a0 = self.den[0];
        let den: Vec<f64> = self.den.iter().map(|c| c / a0).collect();
        let n = den.len() - 1;
        let mut num = vec![0.0; n + 1 - self.num.len().min(n + 1)];
        num.extend(self.num.iter().map(|c| c / a0));
        let d = num[0];
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, 1);
        let mut cm = DMatrix::zeros(1, n);
        for j in 0..n {
            a[(0, j)] = -den[j + 1];
            cm[(0, j)] = num[j + 1] - d * den[j + 1];
        }
        for i in 1..n {
            a[(i, i - 1)] = 1.0;
        }
        if n > 0 {
            b[(0, 0)] = 1.0;
        }
        Ok(StateSpace {
            a,
            b,
            c: cm,
            d: DMatrix::from_element(1, 1, d),
            ts: Some(self.ts),
        })
    }

    fn impulse(&self, n: usize) -> Result<Vec<f64>> {
        if !self.causal() {
            return Err(LtiError::InvalidTransfer("non-causal entry has no causal impulse response".into()));
        }
        let nd = self.den.len() - 1;
        let mut b = vec![0.0; nd + 1 - self.num.len().min(nd + 1)];
        b.extend(self.num.iter().copied());
        let a = &self.den;
        let mut y = vec![0.0; n];
        for t in 0..n {
            let mut acc = if t < b.len() { b[t] } else { 0.0 };
            for i in 1..a.len() {
                if t >= i {
                    acc -= a[i] * y[t - i];
                }
            }
            y[t] = acc / a[0];
        }
        Ok(y)
    }
}

// ---------------------------------------------------------------------------
// Rational arithmetic used by the symbolic closed-loop path

#[derive(Debug, Clone)]
struct Rat {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl Rat {
    fn zero() -> Self {
        Rat { num: vec![0.0], den: vec![1.0] }
    }
    fn one() -> Self {
        Rat { num: vec![1.0], den: vec![1.0] }
    }
    fn from_tf(t: &RationalTransfer) -> Self {
        Rat { num: t.num.clone(), den: t.den.clone() }.pruned()
    }
    fn is_zero(&self) -> bool {
        poly::is_zero(&self.num)
    }
    fn pruned(self) -> Self {
        if self.is_zero() {
            return Rat::zero();
        }
        let num = poly::trim_rel(&self.num, 1e-14);
        let den = poly::trim_rel(&self.den, 1e-14);
        let (n, d) = poly::cancel_common(&num, &den, CANCEL_TOL);
        let lead = d[0];
        Rat { num: poly::scale(&n, 1.0 / lead), den: poly::scale(&d, 1.0 / lead) }
    }
    fn mul(&self, o: &Rat) -> Rat {
        if self.is_zero() || o.is_zero() {
            return Rat::zero();
        }
        Rat { num: poly::mul(&self.num, &o.num), den: poly::mul(&self.den, &o.den) }.pruned()
    }
    fn add(&self, o: &Rat) -> Rat {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        if self.den == o.den {
            return Rat { num: poly::add(&self.num, &o.num), den: self.den.clone() }.pruned();
        }
        Rat {
            num: poly::add(&poly::mul(&self.num, &o.den), &poly::mul(&o.num, &self.den)),
            den: poly::mul(&self.den, &o.den),
        }
        .pruned()
    }
    fn neg(&self) -> Rat {
        Rat { num: poly::scale(&self.num, -1.0), den: self.den.clone() }
    }
    fn inv(&self) -> Option<Rat> {
        if self.is_zero() {
            return None;
        }
        Some(Rat { num: self.den.clone(), den: self.num.clone() }.pruned())
    }
    fn to_tf(&self, ts: f64) -> RationalTransfer {
        RationalTransfer { num: self.num.clone(), den: self.den.clone(), ts }
    }
}

fn rat_det(m: &[Vec<Rat>]) -> Rat {
    let n = m.len();
    match n {
        1 => m[0][0].clone(),
        2 => m[0][0].mul(&m[1][1]).add(&m[0][1].mul(&m[1][0]).neg()),
        _ => {
            let mut acc = Rat::zero();
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let minor = rat_minor(m, 0, j);
                let term = m[0][j].mul(&rat_det(&minor));
                acc = if j % 2 == 0 { acc.add(&term) } else { acc.add(&term.neg()) };
            }
            acc
        }
    }
}

fn rat_minor(m: &[Vec<Rat>], r: usize, c: usize) -> Vec<Vec<Rat>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != r)
        .map(|(_, row)| {
            row.iter()
                .enumerate()
                .filter(|(j, _)| *j != c)
                .map(|(_, x)| x.clone())
                .collect()
        })
        .collect()
}

fn rat_matmul(a: &[Vec<Rat>], b: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = Rat::zero();
                    for l in 0..k {
                        acc = acc.add(&a[i][l].mul(&b[l][j]));
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Transfer matrices

#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub ts: f64,
    pub entries: Vec<Vec<RationalTransfer>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    num: Vec<f64>,
    den: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransferMatrixDoc {
    ts: f64,
    ny: usize,
    nu: usize,
    entries: Vec<Vec<EntryDoc>>,
}

impl TransferMatrix {
    pub fn new(ts: f64, entries: Vec<Vec<RationalTransfer>>) -> Result<Self> {
        if entries.is_empty() || entries[0].is_empty() {
            return Err(LtiError::DimensionMismatch("transfer matrix needs at least one entry".into()));
        }
        let nu = entries[0].len();
        for (i, row) in entries.iter().enumerate() {
            if row.len() != nu {
                return Err(LtiError::DimensionMismatch(format!("row {i} has {} entries, expected {nu}", row.len())));
            }
            for (k, e) in row.iter().enumerate() {
                if (e.ts - ts).abs() > 1e-15 * ts.abs().max(1.0) {
                    return Err(LtiError::DimensionMismatch(format!("entry ({i},{k}) has a different sample time")));
                }
            }
        }
        Ok(Self { ts, entries })
    }

    pub fn from_entries(ts: f64, polys: Vec<Vec<(Vec<f64>, Vec<f64>)>>) -> Result<Self> {
        let entries = polys
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|(n, d)| RationalTransfer::new(n, d, ts))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(ts, entries)
    }

    pub fn diagonal(ts: f64, diag: Vec<RationalTransfer>) -> Result<Self> {
        let n = diag.len();
        let entries = (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| if i == k { diag[i].clone() } else { RationalTransfer::gain(0.0, ts) })
                    .collect()
            })
            .collect();
        Self::new(ts, entries)
    }

    pub fn identity(n: usize, ts: f64) -> Self {
        Self::diagonal(ts, vec![RationalTransfer::gain(1.0, ts); n]).expect("identity is well formed")
    }

    pub fn ny(&self) -> usize {
        self.entries.len()
    }

    pub fn nu(&self) -> usize {
        self.entries[0].len()
    }

    pub fn entry(&self, i: usize, k: usize) -> &RationalTransfer {
        &self.entries[i][k]
    }

    pub fn to_json(&self) -> String {
        let doc = TransferMatrixDoc {
            ts: self.ts,
            ny: self.ny(),
            nu: self.nu(),
            entries: self
                .entries
                .iter()
                .map(|row| row.iter().map(|e| EntryDoc { num: e.num.clone(), den: e.den.clone() }).collect())
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: TransferMatrixDoc =
            serde_json::from_str(s).map_err(|e| LtiError::InvalidTransfer(format!("json: {e}")))?;
        if doc.entries.len() != doc.ny || doc.entries.iter().any(|r| r.len() != doc.nu) {
            return Err(LtiError::DimensionMismatch(format!(
                "declared {}x{} does not match entries",
                doc.ny, doc.nu
            )));
        }
        let entries = doc
            .entries
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(k, e)| {
                        RationalTransfer::new(e.num, e.den, doc.ts).map_err(|err| {
                            LtiError::InvalidTransfer(format!("entry ({},{}): {err}", i + 1, k + 1))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.ts, entries)
    }

    /// Block realization with one controllable canonical block per entry.
    pub fn realize(&self) -> Result<StateSpace> {
        let (ny, nu) = (self.ny(), self.nu());
        let blocks: Vec<(usize, usize, StateSpace)> = self
            .entries
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(k, e)| (i, k, e)))
            .map(|(i, k, e)| e.realize().map(|s| (i, k, s)))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = blocks.iter().map(|(_, _, s)| s.a.nrows()).sum();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, nu);
        let mut c = DMatrix::zeros(ny, n);
        let mut d = DMatrix::zeros(ny, nu);
        let mut off = 0;
        for (i, k, s) in blocks {
            let m = s.a.nrows();
            a.view_mut((off, off), (m, m)).copy_from(&s.a);
            b.view_mut((off, k), (m, 1)).copy_from(&s.b);
            c.view_mut((i, off), (1, m)).copy_from(&s.c);
            d[(i, k)] = s.d[(0, 0)];
            off += m;
        }
        Ok(StateSpace { a, b, c, d, ts: Some(self.ts) })
    }

    fn rat(&self) -> Vec<Vec<Rat>> {
        self.entries.iter().map(|r| r.iter().map(Rat::from_tf).collect()).collect()
    }

    fn from_rat(ts: f64, m: &[Vec<Rat>]) -> Self {
        TransferMatrix { ts, entries: m.iter().map(|r| r.iter().map(|x| x.to_tf(ts)).collect()).collect() }
    }

    /// Poles of every entry.
    pub fn poles(&self) -> Vec<Complex64> {
        self.entries.iter().flatten().flat_map(|e| e.poles()).collect()
    }
}

impl FrequencyResponse for TransferMatrix {
    fn ny(&self) -> usize {
        self.ny()
    }
    fn nu(&self) -> usize {
        self.nu()
    }
    fn ts(&self) -> f64 {
        self.ts
    }
    fn response(&self, omega: f64) -> Result<CMat> {
        let mut out = CMat::zeros(self.ny(), self.nu());
        for (i, row) in self.entries.iter().enumerate() {
            for (k, e) in row.iter().enumerate() {
                out[(i, k)] = e
                    .at_frequency(omega)
                    .map_err(|_| LtiError::PoleOnGrid { row: i + 1, col: k + 1, omega })?;
            }
        }
        Ok(out)
    }
}

impl ImpulseResponse for TransferMatrix {
    fn ny(&self) -> usize {
        self.ny()
    }
    fn nu(&self) -> usize {
        self.nu()
    }
    fn markov(&self, n: usize) -> Result<Vec<DMatrix<f64>>> {
        let mut h = vec![DMatrix::zeros(self.ny(), self.nu()); n];
        for (i, row) in self.entries.iter().enumerate() {
            for (k, e) in row.iter().enumerate() {
                for (t, v) in e.impulse(n)?.into_iter().enumerate() {
                    h[t][(i, k)] = v;
                }
            }
        }
        Ok(h)
    }
}

// ---------------------------------------------------------------------------
// State space

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// `None` for continuous time.
    pub ts: Option<f64>,
}

impl StateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        ts: Option<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(LtiError::DimensionMismatch(format!(
                "A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        if let Some(t) = ts {
            if !(t > 0.0) {
                return Err(LtiError::InvalidTransfer(format!("sample time must be positive, got {t}")));
            }
        }
        Ok(Self { a, b, c, d, ts })
    }

    pub fn is_continuous(&self) -> bool {
        self.ts.is_none()
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        let mut p: Vec<Complex64> = self.a.clone().complex_eigenvalues().iter().copied().collect();
        poly::sort_roots(&mut p);
        p
    }

    /// Largest pole modulus (discrete time).
    pub fn pole_radius(&self) -> f64 {
        self.poles().iter().fold(0.0, |m, p| m.max(p.norm()))
    }

    /// Multiplies the input by a constant matrix: x⁺ = Ax + B·T·u.
    pub fn with_input_transform(&self, t: &DMatrix<f64>) -> Self {
        StateSpace { a: self.a.clone(), b: &self.b * t, c: self.c.clone(), d: &self.d * t, ts: self.ts }
    }

    /// Transmission zeros. Supports invertible D, or D = 0 with CB invertible.
    pub fn transmission_zeros(&self) -> Result<Vec<Zero>> {
        let (ny, nu) = (self.c.nrows(), self.b.ncols());
        if ny != nu {
            return Err(LtiError::DimensionMismatch("transmission zeros need a square system".into()));
        }
        let mut z: Vec<Complex64> = if let Some(dinv) = self.d.clone().try_inverse().filter(|_| self.d.norm() > 0.0) {
            let m = &self.a - &self.b * dinv * &self.c;
            m.complex_eigenvalues().iter().copied().collect()
        } else if self.d.iter().all(|v| *v == 0.0) {
            let cb = &self.c * &self.b;
            let cbinv = cb
                .clone()
                .try_inverse()
                .ok_or_else(|| LtiError::Unsupported("CB is singular".into()))?;
            let n = self.order();
            let p = DMatrix::<f64>::identity(n, n) - &self.b * cbinv * &self.c;
            // Orthonormal basis of ker C: eigenvectors of the orthogonal projector onto it.
            let cct = (&self.c * self.c.transpose())
                .try_inverse()
                .ok_or_else(|| LtiError::Unsupported("C has dependent rows".into()))?;
            let proj = DMatrix::<f64>::identity(n, n) - self.c.transpose() * cct * &self.c;
            let eig = nalgebra::SymmetricEigen::new(proj);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
            let basis = DMatrix::from_fn(n, n - ny, |i, j| eig.eigenvectors[(i, idx[j])]);
            let reduced = basis.transpose() * p * &self.a * &basis;
            reduced.complex_eigenvalues().iter().copied().collect()
        } else {
            return Err(LtiError::Unsupported("zeros need invertible D or D = 0".into()));
        };
        poly::sort_roots(&mut z);
        Ok(z.into_iter().map(Zero::new).collect())
    }
}

impl FrequencyResponse for StateSpace {
    fn ny(&self) -> usize {
        self.c.nrows()
    }
    fn nu(&self) -> usize {
        self.b.ncols()
    }
    fn ts(&self) -> f64 {
        self.ts.unwrap_or(f64::NAN)
    }
    fn response(&self, omega: f64) -> Result<CMat> {
        if self.ts.is_none() {
            return Err(LtiError::Unsupported("continuous-time frequency response".into()));
        }
        let n = self.order();
        let z = Complex64::from_polar(1.0, omega);
        let zi_a = CMat::from_fn(n, n, |i, j| {
            let v = Complex64::new(-self.a[(i, j)], 0.0);
            if i == j {
                v + z
            } else {
                v
            }
        });
        let bc = self.b.map(|v| Complex64::new(v, 0.0));
        let x = zi_a
            .lu()
            .solve(&bc)
            .filter(|x| x.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
            .ok_or(LtiError::PoleOnGrid { row: 1, col: 1, omega })?;
        let cc = self.c.map(|v| Complex64::new(v, 0.0));
        Ok(cc * x + self.d.map(|v| Complex64::new(v, 0.0)))
    }
}

impl ImpulseResponse for StateSpace {
    fn ny(&self) -> usize {
        self.c.nrows()
    }
    fn nu(&self) -> usize {
        self.b.ncols()
    }
    fn markov(&self, n: usize) -> Result<Vec<DMatrix<f64>>> {
        if self.ts.is_none() {
            return Err(LtiError::Unsupported("continuous-time impulse response".into()));
        }
        let mut h = Vec::with_capacity(n);
        if n == 0 {
            return Ok(h);
        }
        h.push(self.d.clone());
        let mut x = self.b.clone();
        for _ in 1..n {
            h.push(&self.c * &x);
            x = &self.a * x;
        }
        Ok(h)
    }
}

// ---------------------------------------------------------------------------
// Either representation

#[derive(Debug, Clone, PartialEq)]
pub enum LtiSystem {
    Transfer(TransferMatrix),
    State(StateSpace),
}

impl LtiSystem {
    pub fn to_state_space(&self) -> Result<StateSpace> {
        match self {
            LtiSystem::Transfer(t) => t.realize(),
            LtiSystem::State(s) => Ok(s.clone()),
        }
    }
}

impl FrequencyResponse for LtiSystem {
    fn ny(&self) -> usize {
        match self {
            LtiSystem::Transfer(t) => t.ny(),
            LtiSystem::State(s) => s.c.nrows(),
        }
    }
    fn nu(&self) -> usize {
        match self {
            LtiSystem::Transfer(t) => t.nu(),
            LtiSystem::State(s) => s.b.ncols(),
        }
    }
    fn ts(&self) -> f64 {
        match self {
            LtiSystem::Transfer(t) => t.ts,
            LtiSystem::State(s) => FrequencyResponse::ts(s),
        }
    }
    fn response(&self, omega: f64) -> Result<CMat> {
        match self {
            LtiSystem::Transfer(t) => t.response(omega),
            LtiSystem::State(s) => s.response(omega),
        }
    }
}

impl ImpulseResponse for LtiSystem {
    fn ny(&self) -> usize {
        FrequencyResponse::ny(self)
    }
    fn nu(&self) -> usize {
        FrequencyResponse::nu(self)
    }
    fn markov(&self, n: usize) -> Result<Vec<DMatrix<f64>>> {
        match self {
            LtiSystem::Transfer(t) => t.markov(n),
            LtiSystem::State(s) => s.markov(n),
        }
    }
}

// ---------------------------------------------------------------------------
// Operations

/// Samples a system on a frequency grid.
pub fn evaluate_frf<S: FrequencyResponse + ?Sized>(sys: &S, grid: &FrequencyGrid) -> Result<FrfMatrix> {
    let data = grid
        .omega
        .iter()
        .map(|&w| sys.response(w))
        .collect::<Result<Vec<_>>>()?;
    Ok(FrfMatrix::new(grid.clone(), data).expect("uniform dimensions by construction"))
}

/// S = (I + GC)⁻¹ and J = SG. Transfer matrices up to 3×3 are handled symbolically,
/// everything else through a state-space interconnection.
pub fn closed_loop_maps(g: &LtiSystem, c: &LtiSystem) -> Result<(LtiSystem, LtiSystem)> {
    let (gy, gu) = (FrequencyResponse::ny(g), FrequencyResponse::nu(g));
    let (cy, cu) = (FrequencyResponse::ny(c), FrequencyResponse::nu(c));
    if cy != gu || cu != gy {
        return Err(LtiError::DimensionMismatch(format!("G is {gy}x{gu}, C is {cy}x{cu}")));
    }
    if (FrequencyResponse::ts(g) - FrequencyResponse::ts(c)).abs() > 1e-15 {
        return Err(LtiError::DimensionMismatch("G and C have different sample times".into()));
    }
    match (g, c) {
        (LtiSystem::Transfer(gt), LtiSystem::Transfer(ct)) if gy <= 3 => {
            let (s, j) = closed_loop_symbolic(gt, ct)?;
            Ok((LtiSystem::Transfer(s), LtiSystem::Transfer(j)))
        }
        _ => {
            let (s, j) = closed_loop_state_space(&g.to_state_space()?, &c.to_state_space()?)?;
            Ok((LtiSystem::State(s), LtiSystem::State(j)))
        }
    }
}

fn closed_loop_symbolic(g: &TransferMatrix, c: &TransferMatrix) -> Result<(TransferMatrix, TransferMatrix)> {
    let n = g.ny();
    let gc = rat_matmul(&g.rat(), &c.rat());
    let r: Vec<Vec<Rat>> = (0..n)
        .map(|i| (0..n).map(|k| if i == k { gc[i][k].add(&Rat::one()) } else { gc[i][k].clone() }).collect())
        .collect();
    let det = rat_det(&r);
    let det_inv = det.inv().ok_or(LtiError::SingularReturnDifference)?;
    let s: Vec<Vec<Rat>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| {
                    // adj(R)_{ik} = (-1)^{i+k} det(minor_{k,i})
                    let cof = if n == 1 { Rat::one() } else { rat_det(&rat_minor(&r, k, i)) };
                    let cof = if (i + k) % 2 == 1 { cof.neg() } else { cof };
                    cof.mul(&det_inv)
                })
                .collect()
        })
        .collect();
    let j = rat_matmul(&s, &g.rat());
    let radius = s
        .iter()
        .chain(j.iter())
        .flatten()
        .flat_map(|e| poly::roots(&e.den))
        .fold(0.0_f64, |m, p| m.max(p.norm()));
    if radius >= 1.0 - STABILITY_TOL {
        return Err(LtiError::UnstableClosedLoop(radius));
    }
    Ok((TransferMatrix::from_rat(g.ts, &s), TransferMatrix::from_rat(g.ts, &j)))
}

/// State-space interconnection for e = r − y, y = G(u + f), u = C e.
/// Returns S (r → e) and J (f → −e).
pub fn closed_loop_state_space(g: &StateSpace, c: &StateSpace) -> Result<(StateSpace, StateSpace)> {
    let (ng, nc) = (g.order(), c.order());
    let ny = g.c.nrows();
    let nu = g.b.ncols();
    let phi = (DMatrix::<f64>::identity(ny, ny) + &g.d * &c.d)
        .try_inverse()
        .ok_or(LtiError::SingularReturnDifference)?;
    let n = ng + nc;
    let mut cx = DMatrix::zeros(ny, n);
    cx.view_mut((0, 0), (ny, ng)).copy_from(&(-&g.c));
    cx.view_mut((0, ng), (ny, nc)).copy_from(&(-&g.d * &c.c));
    let ce = &phi * cx;
    let de_r = phi.clone();
    let de_f = -&phi * &g.d;
    let mut cu = DMatrix::zeros(nu, n);
    cu.view_mut((0, ng), (nu, nc)).copy_from(&c.c);
    let cu = cu + &c.d * &ce;
    let du_r = &c.d * &de_r;
    let du_f = &c.d * &de_f;
    let mut bp = DMatrix::zeros(n, nu);
    bp.view_mut((0, 0), (ng, nu)).copy_from(&g.b);
    let mut bc = DMatrix::zeros(n, ny);
    bc.view_mut((ng, 0), (nc, ny)).copy_from(&c.b);
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (ng, ng)).copy_from(&g.a);
    a.view_mut((ng, ng), (nc, nc)).copy_from(&c.a);
    let a = a + &bp * &cu + &bc * &ce;
    let b_s = &bp * &du_r + &bc * &de_r;
    let b_f = &bp * (du_f + DMatrix::<f64>::identity(nu, nu)) + &bc * &de_f;
    let s = StateSpace { a: a.clone(), b: b_s, c: ce.clone(), d: de_r, ts: g.ts };
    let j = StateSpace { a, b: b_f, c: -ce, d: -de_f, ts: g.ts };
    let radius = s.pole_radius();
    if radius >= 1.0 - STABILITY_TOL {
        return Err(LtiError::UnstableClosedLoop(radius));
    }
    Ok((s, j))
}

/// Zero-order-hold discretization through one augmented matrix exponential.
pub fn zoh_discretize(sys: &StateSpace, ts: f64) -> Result<StateSpace> {
    if !sys.is_continuous() {
        return Err(LtiError::Unsupported("system is already discrete".into()));
    }
    if !(ts > 0.0) {
        return Err(LtiError::InvalidTransfer(format!("sample time must be positive, got {ts}")));
    }
    let (n, m) = (sys.order(), sys.b.ncols());
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&sys.a * ts));
    aug.view_mut((0, n), (n, m)).copy_from(&(&sys.b * ts));
    let e = aug.exp();
    Ok(StateSpace {
        a: e.view((0, 0), (n, n)).into_owned(),
        b: e.view((0, n), (n, m)).into_owned(),
        c: sys.c.clone(),
        d: sys.d.clone(),
        ts: Some(ts),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zero {
    pub z: Complex64,
    pub nonminimum_phase: bool,
}

impl Zero {
    pub fn new(z: Complex64) -> Self {
        Zero { z, nonminimum_phase: z.norm() >= 1.0 }
    }
}

/// Roots of the numerator of det G after clearing denominators.
pub fn transmission_zeros(sys: &TransferMatrix) -> Result<Vec<Zero>> {
    if sys.ny() != sys.nu() {
        return Err(LtiError::DimensionMismatch("transmission zeros need a square system".into()));
    }
    let det = rat_det(&sys.rat());
    let num = poly::trim_rel(&det.num, 1e-13);
    if det.is_zero() || num.iter().all(|c| c.abs() < 1e-300) {
        return Err(LtiError::RankDeficient);
    }
    Ok(poly::roots(&num).into_iter().map(Zero::new).collect())
}

pub fn system_transmission_zeros(sys: &LtiSystem) -> Result<Vec<Zero>> {
    match sys {
        LtiSystem::Transfer(t) => transmission_zeros(t),
        LtiSystem::State(s) => s.transmission_zeros(),
    }
}
