//! Small dense complex linear algebra: spectral radius, largest singular value and
//! the diagonal D-scaling upper bound of the structured singular value.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Eigenvalues of a complex square matrix. 2×2 inputs use the quadratic formula.
pub fn eigenvalues(m: &CMat) -> Vec<Complex64> {
    let n = m.nrows();
    match n {
        0 => Vec::new(),
        1 => vec![m[(0, 0)]],
        2 => eig2(m).to_vec(),
        _ => eigenvalues_general(m),
    }
}

pub fn eigenvalues_general(m: &CMat) -> Vec<Complex64> {
    Schur::new(m.clone())
        .eigenvalues()
        .map(|v| v.iter().copied().collect())
        .unwrap_or_default()
}

fn eig2(m: &CMat) -> [Complex64; 2] {
    let (a, b, cc, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powi(2) + b * cc;
    let s = disc.sqrt();
    [half_tr + s, half_tr - s]
}

pub fn spectral_radius(m: &CMat) -> f64 {
    eigenvalues(m).iter().fold(0.0, |acc, l| acc.max(l.norm()))
}

/// Largest singular value. 2×2 inputs use the closed form of the Gram matrix.
pub fn sigma_max(m: &CMat) -> f64 {
    if m.nrows() == 2 && m.ncols() == 2 {
        return sigma_max2(m);
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    if m.is_square() {
        let gram = m.adjoint() * m;
        return gram.symmetric_eigenvalues().max().max(0.0).sqrt();
    }
    m.clone().singular_values().iter().fold(0.0_f64, |a, s| a.max(*s))
}

fn sigma_max2(m: &CMat) -> f64 {
    let fro2: f64 = m.iter().map(|z| z.norm_sqr()).sum();
    let det = (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).norm();
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    ((fro2 + disc) * 0.5).sqrt()
}

pub fn sigma_max_general(m: &CMat) -> f64 {
    m.clone().singular_values().iter().fold(0.0_f64, |a, s| a.max(*s))
}

pub fn sigma_min(m: &CMat) -> f64 {
    m.clone()
        .singular_values()
        .iter()
        .fold(f64::INFINITY, |a, s| a.min(*s))
}

/// Scales rows by `d` and columns by `1/d`.
pub fn similarity_diag(a: &CMat, d: &[f64]) -> CMat {
    let n = a.nrows();
    CMat::from_fn(n, n, |i, j| a[(i, j)] * (d[i] / d[j]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuBound {
    pub value: f64,
    pub scaling: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration cap was hit before the relative improvement fell below tolerance.
    pub converged: bool,
}

pub const MU_REL_TOL: f64 = 1e-8;
pub const MU_MAX_ITER: usize = 200;

/// Upper bound on the structured singular value for a diagonal complex structure:
/// the infimum over positive diagonal D of σ̄(D A D⁻¹), approached by Osborne balancing
/// sweeps followed by convex line searches in log D. Steps are kept only when σ̄ drops.
pub fn mu_upper_diag(a: &CMat) -> MuBound {
    let n = a.nrows();
    let sig0 = sigma_max(a);
    if n <= 1 || sig0 == 0.0 {
        return MuBound { value: sig0, scaling: vec![1.0; n], iterations: 0, converged: true };
    }
    let mut logd = vec![0.0; n];
    let mut best = sig0;
    let eval = |ld: &[f64]| -> f64 {
        let d: Vec<f64> = ld.iter().map(|x| x.exp()).collect();
        sigma_max(&similarity_diag(a, &d))
    };

    let mut converged = false;
    let mut iterations = 0;
    for it in 0..MU_MAX_ITER {
        iterations = it + 1;
        let start = best;

        let cand = osborne_sweep(a, &logd);
        let v = eval(&cand);
        if v < best {
            best = v;
            logd = cand;
        }

        for k in 1..n {
            let (x, v) = line_search(&eval, &logd, k, best);
            if v < best {
                best = v;
                logd[k] = x;
            }
        }
        if n > 2 {
            let g = gradient_step(a, &logd, best, &eval);
            if let Some((cand, v)) = g {
                best = v;
                logd = cand;
            }
        }

        if start - best <= MU_REL_TOL * start {
            converged = true;
            break;
        }
    }
    let shift = logd[0];
    let scaling = logd.iter().map(|x| (x - shift).exp()).collect();
    MuBound { value: best, scaling, iterations, converged }
}

fn osborne_sweep(a: &CMat, logd: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    let mut ld = logd.to_vec();
    for i in 0..n {
        let mut r = 0.0;
        let mut cc = 0.0;
        for j in 0..n {
            if j != i {
                r += (a[(i, j)].norm() * (ld[i] - ld[j]).exp()).powi(2);
                cc += (a[(j, i)].norm() * (ld[j] - ld[i]).exp()).powi(2);
            }
        }
        if r > 0.0 && cc > 0.0 {
            ld[i] += 0.25 * (cc / r).ln();
        }
    }
    let shift = ld[0];
    ld.iter().map(|x| x - shift).collect()
}

/// Golden-section search over one coordinate of log D. σ̄(e^S A e^-S) is convex in S.
fn line_search<F: Fn(&[f64]) -> f64>(f: &F, logd: &[f64], k: usize, fx: f64) -> (f64, f64) {
    let x0 = logd[k];
    let at = |x: f64| {
        let mut ld = logd.to_vec();
        ld[k] = x;
        f(&ld)
    };
    // Expand a bracket around the current point.
    let mut step = 1.0;
    let (mut lo, mut hi) = (x0 - step, x0 + step);
    let (mut flo, mut fhi) = (at(lo), at(hi));
    let mut guard = 0;
    while (flo < fx || fhi < fx) && guard < 60 {
        if flo < fhi {
            step *= 2.0;
            lo = x0 - step;
            flo = at(lo);
            if flo >= fx {
                break;
            }
        } else {
            step *= 2.0;
            hi = x0 + step;
            fhi = at(hi);
            if fhi >= fx {
                break;
            }
        }
        guard += 1;
    }
    let _ = (flo, fhi);
    let g = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (at(x1), at(x2));
    for _ in 0..80 {
        if (b - a).abs() < 1e-7 * (1.0 + x0.abs()) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = at(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Steepest descent on log D using the top singular pair: ∂σ̄/∂log dᵢ = σ̄(|uᵢ|² − |vᵢ|²).
fn gradient_step<F: Fn(&[f64]) -> f64>(
    a: &CMat,
    logd: &[f64],
    fx: f64,
    f: &F,
) -> Option<(Vec<f64>, f64)> {
    let d: Vec<f64> = logd.iter().map(|x| x.exp()).collect();
    let x = similarity_diag(a, &d);
    let svd = x.svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, s)| if *s > acc.1 { (i, *s) } else { acc })
        .0;
    let n = a.nrows();
    let grad: Vec<f64> = (0..n)
        .map(|i| u[(i, k)].norm_sqr() - vt[(k, i)].norm_sqr())
        .collect();
    let gn = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if gn < 1e-14 {
        return None;
    }
    let mut t = 1.0;
    for _ in 0..40 {
        let cand: Vec<f64> = logd.iter().zip(&grad).map(|(l, g)| l - t * g / gn).collect();
        let v = f(&cand);
        if v < fx {
            return Some((cand, v));
        }
        t *= 0.5;
    }
    None
}

/// Solves a complex linear system through LU; `None` if singular.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    a.clone().lu().solve(b)
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    a.clone().try_inverse()
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}
