//! Dense 4×4 complex linear algebra: eigenvalues by Hessenberg reduction and
//! shifted QR, matrix exponential by scaling and squaring, spectral norm.

use num_complex::Complex64;
use thiserror::Error;

pub type CMat4 = [[Complex64; 4]; 4];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("QR iteration did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("matrix has non-finite entries")]
    NonFinite,
}

pub fn identity() -> CMat4 {
    let mut m = [[ZERO; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m
}

pub fn mul(a: &CMat4, b: &CMat4) -> CMat4 {
    let mut c = [[ZERO; 4]; 4];
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            for j in 0..4 {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn scale(a: &CMat4, s: Complex64) -> CMat4 {
    a.map(|row| row.map(|v| v * s))
}

pub fn adjoint(a: &CMat4) -> CMat4 {
    let mut c = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = a[j][i].conj();
        }
    }
    c
}

pub fn trace(a: &CMat4) -> Complex64 {
    (0..4).map(|i| a[i][i]).sum()
}

/// Maximum absolute column sum.
pub fn norm1(a: &CMat4) -> f64 {
    (0..4)
        .map(|j| (0..4).map(|i| a[i][j].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Reduces `a` to upper Hessenberg form by Householder similarity.
fn hessenberg(a: &mut CMat4) {
    for k in 0..2 {
        let norm_x: f64 = (k + 1..4).map(|i| a[i][k].norm_sqr()).sum::<f64>().sqrt();
        if norm_x == 0.0 {
            continue;
        }
        let x0 = a[k + 1][k];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let mut v = [ZERO; 4];
        for i in k + 1..4 {
            v[i] = a[i][k];
        }
        v[k + 1] += phase * norm_x;
        let vn: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if vn == 0.0 {
            continue;
        }
        for c in v.iter_mut() {
            *c /= vn;
        }
        // a ← (I − 2vv^H) a
        for j in 0..4 {
            let s: Complex64 = (k + 1..4).map(|i| v[i].conj() * a[i][j]).sum();
            for i in k + 1..4 {
                a[i][j] -= 2.0 * v[i] * s;
            }
        }
        // a ← a (I − 2vv^H)
        for row in a.iter_mut() {
            let s: Complex64 = (k + 1..4).map(|j| row[j] * v[j]).sum();
            for j in k + 1..4 {
                row[j] -= 2.0 * s * v[j].conj();
            }
        }
    }
}

/// Rotation `[[c, s], [−conj(s), c]]` mapping `(x, y)` to `(r, 0)`.
fn givens(x: Complex64, y: Complex64) -> (f64, Complex64) {
    let ax = x.norm();
    let r = ax.hypot(y.norm());
    if r == 0.0 {
        return (1.0, ZERO);
    }
    if ax == 0.0 {
        return (0.0, ONE);
    }
    (ax / r, (x / ax) * y.conj() / r)
}

/// Eigenvalues of a general complex 4×4 matrix, sorted by imaginary part
/// then real part.
pub fn eigenvalues(m: &CMat4) -> Result<[Complex64; 4], LinalgError> {
    if m.iter().flatten().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    let mut h = *m;
    hessenberg(&mut h);
    let eps = f64::EPSILON;
    let mut hi = 3usize;
    let mut iter = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let s = h[l][l].norm() + h[l - 1][l - 1].norm();
            let s = if s == 0.0 { norm1(&h) } else { s };
            if h[l][l - 1].norm() <= eps * s {
                h[l][l - 1] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total += 1;
        if total > 400 {
            return Err(LinalgError::NoConvergence(total));
        }
        let shift = if iter % 11 == 10 {
            h[hi][hi] + h[hi][hi - 1].norm()
        } else {
            let (a, b, c, d) = (h[hi - 1][hi - 1], h[hi - 1][hi], h[hi][hi - 1], h[hi][hi]);
            let tr = 0.5 * (a + d);
            let disc = (0.25 * (a - d) * (a - d) + b * c).sqrt();
            let (e1, e2) = (tr + disc, tr - disc);
            if (e1 - d).norm() < (e2 - d).norm() {
                e1
            } else {
                e2
            }
        };
        for i in l..=hi {
            h[i][i] -= shift;
        }
        let mut rots = [(0.0, ZERO); 3];
        for k in l..hi {
            let (c, s) = givens(h[k][k], h[k + 1][k]);
            rots[k] = (c, s);
            for j in k..=hi {
                let (x, y) = (h[k][j], h[k + 1][j]);
                h[k][j] = c * x + s * y;
                h[k + 1][j] = -s.conj() * x + c * y;
            }
        }
        for k in l..hi {
            let (c, s) = rots[k];
            for row in h.iter_mut().take((k + 2).min(hi) + 1).skip(l) {
                let (u, v) = (row[k], row[k + 1]);
                row[k] = u * c + v * s.conj();
                row[k + 1] = -u * s + v * c;
            }
        }
        for i in l..=hi {
            h[i][i] += shift;
        }
    }
    let mut ev = [h[0][0], h[1][1], h[2][2], h[3][3]];
    ev.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    Ok(ev)
}

/// `exp(a)` by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &CMat4) -> CMat4 {
    let n = norm1(a);
    let s = if n > 0.5 { (n / 0.5).log2().ceil() as i32 } else { 0 };
    let b = scale(a, Complex64::new(0.5f64.powi(s), 0.0));
    let mut sum = identity();
    let mut term = identity();
    for k in 1..=30 {
        term = scale(&mul(&term, &b), Complex64::new(1.0 / k as f64, 0.0));
        for i in 0..4 {
            for j in 0..4 {
                sum[i][j] += term[i][j];
            }
        }
        if norm1(&term) <= 1e-18 * norm1(&sum) {
            break;
        }
    }
    for _ in 0..s {
        sum = mul(&sum, &sum);
    }
    sum
}

/// Operator 2-norm, the square root of the largest eigenvalue of `a^H a`.
pub fn norm2(a: &CMat4) -> Result<f64, LinalgError> {
    let g = mul(&adjoint(a), a);
    let ev = eigenvalues(&g)?;
    Ok(ev.iter().map(|e| e.re).fold(0.0, f64::max).sqrt())
}
