//! Frequency grids, sampled frequency-response matrices, interaction measures and
//! static input decoupling.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMat};

pub const DEFAULT_GRID_POINTS: usize = 2000;
pub const DEFAULT_GRID_LOW_HZ: f64 = 0.1;
pub const DEFAULT_ANCHOR_HZ: f64 = 1.0;
pub const DEFAULT_INTERACTION_THRESHOLD: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrfError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("zero diagonal entry {entry} at omega = {omega}")]
    ZeroDiagonal { entry: usize, omega: f64 },
    #[error("real part of the response is singular at the anchor omega = {0}")]
    SingularAtAnchor(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, FrfError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    /// Frequencies in rad/sample.
    pub omega: Vec<f64>,
    pub ts: f64,
}

impl FrequencyGrid {
    pub fn new(omega: Vec<f64>, ts: f64) -> Result<Self> {
        if !(ts > 0.0) {
            return Err(FrfError::InvalidGrid(format!("sample time must be positive, got {ts}")));
        }
        if omega.is_empty() {
            return Err(FrfError::InvalidGrid("grid is empty".into()));
        }
        if let Some(w) = omega.iter().find(|w| !(**w >= 0.0)) {
            return Err(FrfError::InvalidGrid(format!("frequency {w} is below the lower bound 0")));
        }
        if let Some(w) = omega.iter().find(|w| **w > PI) {
            return Err(FrfError::InvalidGrid(format!("frequency {w} exceeds the upper bound pi")));
        }
        if omega.windows(2).any(|p| p[1] <= p[0]) {
            return Err(FrfError::InvalidGrid("frequencies must be strictly increasing".into()));
        }
        Ok(Self { omega, ts })
    }

    pub fn from_hz(hz: &[f64], ts: f64) -> Result<Self> {
        Self::new(hz.iter().map(|f| 2.0 * PI * f * ts).collect(), ts)
    }

    /// `points` log-spaced frequencies from `low_hz` to Nyquist, preceded by ω = 0.
    pub fn log_with_endpoints(points: usize, low_hz: f64, ts: f64) -> Result<Self> {
        if points < 2 {
            return Err(FrfError::InvalidGrid("need at least two log-spaced points".into()));
        }
        let lo = (2.0 * PI * low_hz * ts).ln();
        if !(lo < PI.ln()) {
            return Err(FrfError::InvalidGrid(format!("low frequency {low_hz} Hz is not below Nyquist")));
        }
        let hi = PI.ln();
        let mut omega = vec![0.0];
        for k in 0..points {
            let t = k as f64 / (points - 1) as f64;
            omega.push((lo + t * (hi - lo)).exp());
        }
        *omega.last_mut().unwrap() = PI;
        Self::new(omega, ts)
    }

    pub fn default_for(ts: f64) -> Self {
        Self::log_with_endpoints(DEFAULT_GRID_POINTS, DEFAULT_GRID_LOW_HZ, ts).expect("default grid is valid")
    }

    /// Uniform grid ω_m = 2πm/M for m = 0..=M/2.
    pub fn uniform_half(m: usize, ts: f64) -> Result<Self> {
        if m < 2 || !m.is_multiple_of(2) {
            return Err(FrfError::InvalidGrid("uniform grid needs an even point count".into()));
        }
        Self::new((0..=m / 2).map(|k| 2.0 * PI * k as f64 / m as f64).collect(), ts)
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn hz(&self, k: usize) -> f64 {
        self.omega[k] / (2.0 * PI * self.ts)
    }

    pub fn nyquist_hz(&self) -> f64 {
        0.5 / self.ts
    }

    /// Index of the grid point closest to `hz`.
    pub fn nearest(&self, hz: f64) -> usize {
        let w = 2.0 * PI * hz * self.ts;
        let mut best = 0;
        for (k, o) in self.omega.iter().enumerate() {
            if (o - w).abs() < (self.omega[best] - w).abs() {
                best = k;
            }
        }
        best
    }

    /// Drops the points for which `keep` is false.
    pub fn filtered<F: Fn(f64) -> bool>(&self, keep: F) -> Result<Self> {
        Self::new(self.omega.iter().copied().filter(|w| keep(*w)).collect(), self.ts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrfMatrix {
    pub grid: FrequencyGrid,
    pub data: Vec<CMat>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrfDoc {
    ts: f64,
    ny: usize,
    nu: usize,
    omega: Vec<f64>,
    /// Per frequency, row-major (re, im) pairs.
    data: Vec<Vec<f64>>,
    /// Provenance (tool version, config hash); ignored on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

impl FrfMatrix {
    pub fn new(grid: FrequencyGrid, data: Vec<CMat>) -> Result<Self> {
        if grid.len() != data.len() {
            return Err(FrfError::DimensionMismatch(format!(
                "{} grid points but {} matrices",
                grid.len(),
                data.len()
            )));
        }
        let (r, c) = data[0].shape();
        if data.iter().any(|m| m.shape() != (r, c)) {
            return Err(FrfError::DimensionMismatch("matrices differ in shape".into()));
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn<F: FnMut(usize, f64) -> CMat>(grid: &FrequencyGrid, mut f: F) -> Self {
        let data = grid.omega.iter().enumerate().map(|(k, w)| f(k, *w)).collect();
        Self::new(grid.clone(), data).expect("uniform shapes")
    }

    pub fn ny(&self) -> usize {
        self.data[0].nrows()
    }

    pub fn nu(&self) -> usize {
        self.data[0].ncols()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_square(&self) -> bool {
        self.ny() == self.nu()
    }

    /// Pointwise product self·other.
    pub fn mul(&self, other: &FrfMatrix) -> Result<FrfMatrix> {
        if self.nu() != other.ny() || self.len() != other.len() {
            return Err(FrfError::DimensionMismatch("incompatible FRF product".into()));
        }
        Ok(FrfMatrix::from_fn(&self.grid, |k, _| &self.data[k] * &other.data[k]))
    }

    /// Pointwise product with a constant real matrix on the right.
    pub fn mul_const(&self, t: &DMatrix<f64>) -> FrfMatrix {
        let tc = t.map(|v| Complex64::new(v, 0.0));
        FrfMatrix::from_fn(&self.grid, |k, _| &self.data[k] * &tc)
    }

    /// Diagonal part, as a square FRF.
    pub fn diagonal(&self) -> FrfMatrix {
        FrfMatrix::from_fn(&self.grid, |k, _| {
            let m = &self.data[k];
            CMat::from_fn(m.nrows(), m.ncols(), |i, j| if i == j { m[(i, j)] } else { Complex64::new(0.0, 0.0) })
        })
    }

    pub fn max_abs_diff(&self, other: &FrfMatrix) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).iter().fold(0.0_f64, |m, z| m.max(z.norm())))
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# ts = {}", self.grid.ts)?;
        let mut cols = vec!["omega".to_string()];
        for i in 0..self.ny() {
            for j in 0..self.nu() {
                cols.push(format!("re_{}{}", i + 1, j + 1));
                cols.push(format!("im_{}{}", i + 1, j + 1));
            }
        }
        writeln!(w, "{}", cols.join(","))?;
        for (k, m) in self.data.iter().enumerate() {
            let mut row = vec![format!("{}", self.grid.omega[k])];
            for i in 0..self.ny() {
                for j in 0..self.nu() {
                    row.push(format!("{}", m[(i, j)].re));
                    row.push(format!("{}", m[(i, j)].im));
                }
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut text = String::new();
        let mut ts = None;
        for line in r.lines() {
            let line = line.map_err(|e| FrfError::Io(e.to_string()))?;
            if let Some(rest) = line.trim_start().strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("ts =") {
                    ts = Some(v.trim().parse::<f64>().map_err(|e| FrfError::Parse(format!("ts: {e}")))?);
                }
                continue;
            }
            text.push_str(&line);
            text.push('\n');
        }
        let ts = ts.ok_or_else(|| FrfError::Parse("missing '# ts = ...' line".into()))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| FrfError::Parse(e.to_string()))?.clone();
        if headers.get(0) != Some("omega") || headers.len() < 3 || (headers.len() - 1) % 2 != 0 {
            return Err(FrfError::Parse("header must be omega, re_11, im_11, ...".into()));
        }
        let entries = (headers.len() - 1) / 2;
        let (ny, nu) = infer_shape(&headers, entries)?;
        let mut omega = Vec::new();
        let mut data = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| FrfError::Parse(e.to_string()))?;
            let vals = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| FrfError::Parse(format!("row {}: {e}", line + 1)))?;
            if vals.len() != headers.len() {
                return Err(FrfError::Parse(format!("row {} has {} fields", line + 1, vals.len())));
            }
            omega.push(vals[0]);
            data.push(CMat::from_fn(ny, nu, |i, j| {
                let p = 1 + 2 * (i * nu + j);
                Complex64::new(vals[p], vals[p + 1])
            }));
        }
        FrfMatrix::new(FrequencyGrid::new(omega, ts)?, data)
    }

    pub fn to_json(&self) -> String {
        self.to_json_with_meta(None)
    }

    pub fn to_json_with_meta(&self, meta: Option<serde_json::Value>) -> String {
        let doc = FrfDoc {
            meta,
            ts: self.grid.ts,
            ny: self.ny(),
            nu: self.nu(),
            omega: self.grid.omega.clone(),
            data: self
                .data
                .iter()
                .map(|m| {
                    let mut v = Vec::with_capacity(2 * m.len());
                    for i in 0..m.nrows() {
                        for j in 0..m.ncols() {
                            v.push(m[(i, j)].re);
                            v.push(m[(i, j)].im);
                        }
                    }
                    v
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: FrfDoc = serde_json::from_str(s).map_err(|e| FrfError::Parse(format!("json: {e}")))?;
        if doc.omega.len() != doc.data.len() {
            return Err(FrfError::Parse("omega and data lengths differ".into()));
        }
        let data = doc
            .data
            .iter()
            .enumerate()
            .map(|(k, v)| {
                if v.len() != 2 * doc.ny * doc.nu {
                    return Err(FrfError::Parse(format!("frequency {k}: expected {} values", 2 * doc.ny * doc.nu)));
                }
                Ok(CMat::from_fn(doc.ny, doc.nu, |i, j| {
                    let p = 2 * (i * doc.nu + j);
                    Complex64::new(v[p], v[p + 1])
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        FrfMatrix::new(FrequencyGrid::new(doc.omega, doc.ts)?, data)
    }
}

fn infer_shape(headers: &csv::StringRecord, entries: usize) -> Result<(usize, usize)> {
    let mut ny = 0;
    let mut nu = 0;
    for k in 0..entries {
        let name = headers.get(1 + 2 * k).unwrap_or("");
        let idx = name
            .strip_prefix("re_")
            .ok_or_else(|| FrfError::Parse(format!("unexpected column {name}")))?;
        let (i, j) = if idx.len() == 2 {
            (idx[..1].parse::<usize>(), idx[1..].parse::<usize>())
        } else {
            let mut parts = idx.split('_');
            (
                parts.next().unwrap_or("").parse::<usize>(),
                parts.next().unwrap_or("").parse::<usize>(),
            )
        };
        let (i, j) = (i.map_err(|e| FrfError::Parse(e.to_string()))?, j.map_err(|e| FrfError::Parse(e.to_string()))?);
        ny = ny.max(i);
        nu = nu.max(j);
    }
    if ny * nu != entries {
        return Err(FrfError::Parse("column count does not match a full matrix".into()));
    }
    Ok((ny, nu))
}

#[derive(Debug, Clone)]
pub struct InteractionReport {
    /// E(ω) = diag(F)⁻¹(F − diag(F)).
    pub e: Vec<CMat>,
    /// σ̄(E(ω)).
    pub sigma: Vec<f64>,
    pub summary: f64,
    pub decoupled: bool,
}

pub fn interaction_matrix(m: &CMat, omega: f64) -> Result<CMat> {
    let n = m.nrows();
    for i in 0..n {
        if m[(i, i)].norm() == 0.0 {
            return Err(FrfError::ZeroDiagonal { entry: i + 1, omega });
        }
    }
    Ok(CMat::from_fn(n, n, |i, j| if i == j { Complex64::new(0.0, 0.0) } else { m[(i, j)] / m[(i, i)] }))
}

pub fn interaction_measure(frf: &FrfMatrix, threshold: f64) -> Result<InteractionReport> {
    if !frf.is_square() {
        return Err(FrfError::DimensionMismatch("interaction measure needs a square FRF".into()));
    }
    let e = frf
        .data
        .iter()
        .zip(frf.grid.omega.iter())
        .map(|(m, w)| interaction_matrix(m, *w))
        .collect::<Result<Vec<_>>>()?;
    let sigma: Vec<f64> = e.iter().map(linalg::sigma_max).collect();
    let summary = sigma.iter().fold(0.0_f64, |a, s| a.max(*s));
    Ok(InteractionReport { e, sigma, summary, decoupled: summary < threshold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingTransform {
    pub t: DMatrix<f64>,
    pub omega0: f64,
    pub condition: f64,
}

/// T_u = Re(G_o(ω₀))⁻¹ with every column scaled to unit max-abs entry. The column sign is
/// chosen so that each diagonal entry of Re(G_o T_u)(ω₀) keeps the sign of the
/// corresponding diagonal entry of Re(G_o)(ω₀).
pub fn static_decoupling(frf: &FrfMatrix, anchor: usize) -> Result<DecouplingTransform> {
    if !frf.is_square() {
        return Err(FrfError::DimensionMismatch("decoupling needs a square FRF".into()));
    }
    let omega0 = frf.grid.omega[anchor];
    let g0 = &frf.data[anchor];
    let re = g0.map(|z| z.re);
    let inv = re.clone().try_inverse().ok_or(FrfError::SingularAtAnchor(omega0))?;
    let n = inv.nrows();
    let mut t = inv;
    for j in 0..n {
        let scale = (0..n).fold(0.0_f64, |m, i| m.max(t[(i, j)].abs()));
        if scale == 0.0 || !scale.is_finite() {
            return Err(FrfError::SingularAtAnchor(omega0));
        }
        // Re(G_o)·T = I before scaling, so the diagonal of the product is 1/scale·sign.
        let prod_jj: f64 = (0..n).map(|i| re[(j, i)] * t[(i, j)]).sum();
        let sign = if (prod_jj >= 0.0) == (re[(j, j)] >= 0.0) { 1.0 } else { -1.0 };
        for i in 0..n {
            t[(i, j)] *= sign / scale;
        }
    }
    let sv = t.clone().singular_values();
    let smax = sv.iter().fold(0.0_f64, |a, s| a.max(*s));
    let smin = sv.iter().fold(f64::INFINITY, |a, s| a.min(*s));
    Ok(DecouplingTransform { t, omega0, condition: smax / smin })
}
