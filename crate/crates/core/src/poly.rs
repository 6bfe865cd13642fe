//! Real polynomials stored as coefficient vectors in descending powers.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Removes leading coefficients that are exactly zero, keeping at least one entry.
pub fn trim(p: &[f64]) -> Vec<f64> {
    let first = p.iter().position(|c| *c != 0.0).unwrap_or(p.len().saturating_sub(1));
    if p.is_empty() {
        return vec![0.0];
    }
    p[first..].to_vec()
}

/// Removes leading coefficients that are negligible relative to the largest one.
pub fn trim_rel(p: &[f64], rel: f64) -> Vec<f64> {
    let scale = p.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return vec![0.0];
    }
    let first = p
        .iter()
        .position(|c| c.abs() > rel * scale)
        .unwrap_or(p.len() - 1);
    p[first..].to_vec()
}

pub fn degree(p: &[f64]) -> usize {
    trim(p).len() - 1
}

pub fn is_zero(p: &[f64]) -> bool {
    p.iter().all(|c| *c == 0.0)
}

/// Horner evaluation at a complex point.
pub fn eval(p: &[f64], z: Complex64) -> Complex64 {
    p.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (i, c) in a.iter().enumerate() {
        out[n - a.len() + i] += c;
    }
    for (i, c) in b.iter().enumerate() {
        out[n - b.len() + i] += c;
    }
    out
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    add(a, &scale(b, -1.0))
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|c| c * s).collect()
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Roots through the eigenvalues of the companion matrix.
pub fn roots(p: &[f64]) -> Vec<Complex64> {
    let p = trim(p);
    let n = p.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = p[0];
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        comp[(0, j)] = -p[j + 1] / lead;
    }
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    let mut r: Vec<Complex64> = comp.complex_eigenvalues().iter().copied().collect();
    sort_roots(&mut r);
    r
}

/// Deterministic ordering: by modulus, then argument.
pub fn sort_roots(r: &mut [Complex64]) {
    r.sort_by(|a, b| {
        a.norm()
            .partial_cmp(&b.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.arg().partial_cmp(&b.arg()).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Monic real polynomial with the given roots; conjugate pairs are assumed present.
pub fn from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (i, c) in acc.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        acc = next;
    }
    acc.iter().map(|c| c.re).collect()
}

/// Cancels roots shared by `num` and `den` within `tol` (relative to max(1, |root|)).
pub fn cancel_common(num: &[f64], den: &[f64], tol: f64) -> (Vec<f64>, Vec<f64>) {
    let num = trim(num);
    let den = trim(den);
    if is_zero(&num) {
        return (vec![0.0], vec![1.0]);
    }
    let mut nr = roots(&num);
    let mut dr = roots(&den);
    let mut changed = false;
    let mut i = 0;
    while i < nr.len() {
        let z = nr[i];
        let hit = dr
            .iter()
            .enumerate()
            .filter(|(_, p)| (**p - z).norm() <= tol * z.norm().max(1.0))
            .min_by(|a, b| {
                (*a.1 - z)
                    .norm()
                    .partial_cmp(&(*b.1 - z).norm())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(k, _)| k);
        if let Some(k) = hit {
            nr.remove(i);
            dr.remove(k);
            changed = true;
        } else {
            i += 1;
        }
    }
    if !changed {
        return (num, den);
    }
    let gain = num[0] / den[0];
    (scale(&from_roots(&nr), gain), from_roots(&dr))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_matches_expansion() {
        let p = [2.0, -3.0, 1.0];
        let z = Complex64::new(0.3, -0.7);
        let direct = z * z * 2.0 - z * 3.0 + 1.0;
        assert!((eval(&p, z) - direct).norm() < 1e-15);
    }

    #[test]
    fn roots_of_quadratic() {
        let r = roots(&[1.0, -3.0, 2.0]);
        assert!((r[0].re - 1.0).abs() < 1e-12 && (r[1].re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn from_roots_inverts_roots() {
        let p = [1.0, -0.4, 0.29, -0.1];
        let q = from_roots(&roots(&p));
        for (a, b) in p.iter().zip(q.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cancellation_removes_shared_factor() {
        let num = mul(&[1.0, -0.5], &[1.0, -0.2]);
        let den = mul(&[1.0, -0.5], &[1.0, 0.3]);
        let (n, d) = cancel_common(&num, &den, 1e-8);
        assert_eq!(n.len(), 2);
        assert!((n[1] + 0.2).abs() < 1e-12 && (d[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn add_aligns_lowest_power() {
        assert_eq!(add(&[1.0, 2.0, 3.0], &[1.0]), vec![1.0, 2.0, 4.0]);
    }
}
