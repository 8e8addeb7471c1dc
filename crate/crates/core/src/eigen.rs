//! Dense symmetric eigenvalue routines.
//!
//! Two independent ways to get at the spectrum: Householder tridiagonalisation
//! followed by implicit QL with Wilkinson shifts (full spectrum, `O(n³)`), and
//! shifted power iteration on the complement of a known top eigenvector.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> SymmetricMatrix<S> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![S::zero(); n * n],
        }
    }

    /// Builds the matrix from `f(i, j)`, evaluated for `i <= j` and mirrored,
    /// so the result is symmetric bit for bit.
    pub fn from_upper(n: usize, f: impl Fn(usize, usize) -> S) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, x: &[S], out: &mut [S]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum();
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn max_abs_diff(&self, other: &Self) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(S::zero(), S::max)
    }

    /// `self - c·11ᵀ`
    pub fn minus_constant(&self, c: S) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&v| v - c).collect(),
        }
    }
}

/// All eigenvalues, sorted in decreasing order.
pub fn symmetric_eigenvalues<S: Scalar>(m: &SymmetricMatrix<S>) -> Result<Vec<S>> {
    let (mut d, mut e) = tridiagonalize(m);
    tridiagonal_ql(&mut d, &mut e)?;
    d.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(d)
}

/// Householder reduction to tridiagonal form. Returns the diagonal and the
/// sub-diagonal (`e[i]` couples `i` and `i+1`, `e[n-1] = 0`).
fn tridiagonalize<S: Scalar>(m: &SymmetricMatrix<S>) -> (Vec<S>, Vec<S>) {
    let n = m.n;
    let mut a = m.data.clone();
    let mut d = vec![S::zero(); n];
    let mut e = vec![S::zero(); n];
    let two = S::lit(2.0);
    let mut v = vec![S::zero(); n];
    let mut p = vec![S::zero(); n];

    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let norm = (lo..n)
            .map(|i| a[i * n + k] * a[i * n + k])
            .sum::<S>()
            .sqrt();
        d[k] = a[k * n + k];
        if norm == S::zero() {
            e[k] = S::zero();
            continue;
        }
        let x0 = a[lo * n + k];
        let alpha = if x0 > S::zero() { -norm } else { norm };
        for i in lo..n {
            v[i] = a[i * n + k];
        }
        v[lo] = v[lo] - alpha;
        let vnorm = (lo..n).map(|i| v[i] * v[i]).sum::<S>().sqrt();
        e[k] = alpha;
        if vnorm == S::zero() {
            continue;
        }
        for i in lo..n {
            v[i] = v[i] / vnorm;
        }
        // p = A v, K = vᵀp, q = p - K v, A -= 2(v qᵀ + q vᵀ) on the trailing block.
        for i in lo..n {
            let row = &a[i * n..(i + 1) * n];
            p[i] = (lo..n).map(|j| row[j] * v[j]).sum();
        }
        let kk: S = (lo..n).map(|i| v[i] * p[i]).sum();
        for i in lo..n {
            p[i] = p[i] - kk * v[i];
        }
        for i in lo..n {
            for j in lo..n {
                a[i * n + j] = a[i * n + j] - two * (v[i] * p[j] + p[i] * v[j]);
            }
        }
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2) * n + (n - 2)];
        e[n - 2] = a[(n - 1) * n + (n - 2)];
    }
    if n >= 1 {
        d[n - 1] = a[(n - 1) * n + (n - 1)];
    }
    (d, e)
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
/// Overwrites `d` with the eigenvalues (unsorted).
fn tridiagonal_ql<S: Scalar>(d: &mut [S], e: &mut [S]) -> Result<()> {
    const MAX_SWEEPS: usize = 64;
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = S::zero();
    let two = S::lit(2.0);
    let eps = S::epsilon();
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::NumericalFailure(format!(
                    "QL iteration did not converge for eigenvalue {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(S::one());
            g = d[m] - d[l] + e[l] / (g + r.copysign_of(g));
            let (mut s, mut c, mut p) = (S::one(), S::one(), S::zero());
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == S::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = S::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = S::zero();
        }
    }
    Ok(())
}

trait CopySign {
    fn copysign_of(self, sign: Self) -> Self;
}

impl<S: Scalar> CopySign for S {
    fn copysign_of(self, sign: Self) -> Self {
        if sign >= S::zero() {
            self.abs()
        } else {
            -self.abs()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    pub max_iters: usize,
    /// Stop once `‖Bv - ρv‖₂` falls below this.
    pub residual_tol: f64,
    /// Lower bound on the spectrum used as the shift. Defaults to Gershgorin;
    /// a tighter bound speeds convergence considerably.
    pub shift: Option<f64>,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            max_iters: 500_000,
            residual_tol: 1e-12,
            shift: None,
        }
    }
}

/// Largest eigenvalue of `m` on the orthogonal complement of `1`.
///
/// `m` is first deflated to `m - c·11ᵀ` (with `c` its `1`-Rayleigh quotient
/// over `n`), and iterates are kept orthogonal to `1`. A Gershgorin shift moves
/// the whole spectrum to the non-negative axis so the iteration converges to
/// the top eigenvalue rather than the one of largest magnitude. The shift must
/// not exceed the smallest eigenvalue on the complement.
pub fn deflated_power_iteration<S: Scalar>(
    m: &SymmetricMatrix<S>,
    opts: PowerOptions,
) -> Result<S> {
    let n = m.n;
    if n < 2 {
        return Err(Error::input("complement of 1 is empty for n < 2"));
    }
    let nf = S::of_usize(n);
    let ones_quotient = (0..n)
        .map(|i| m.row(i).iter().copied().sum::<S>())
        .sum::<S>()
        / nf;
    let b = m.minus_constant(ones_quotient / nf);

    let gershgorin = || {
        (0..n)
            .map(|i| {
                let off: S = b
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, v)| v.abs())
                    .sum();
                b.get(i, i) - off
            })
            .fold(S::infinity(), S::min)
    };
    let shift = opts.shift.map(S::lit).unwrap_or_else(gershgorin);

    let tol = S::lit(opts.residual_tol).max(S::lit(100.0) * S::epsilon());
    // Deterministic start vector with no special alignment.
    let mut v: Vec<S> = (0..n)
        .map(|i| S::lit(((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5))
        .collect();
    project_and_normalize(&mut v)?;
    let mut w = vec![S::zero(); n];
    for _ in 0..opts.max_iters {
        b.matvec(&v, &mut w);
        let mean = w.iter().copied().sum::<S>() / nf;
        for x in w.iter_mut() {
            *x = *x - mean;
        }
        let rho: S = v.iter().zip(&w).map(|(&a, &c)| a * c).sum();
        let residual = v
            .iter()
            .zip(&w)
            .map(|(&a, &c)| (c - rho * a) * (c - rho * a))
            .sum::<S>()
            .sqrt();
        if residual <= tol {
            return Ok(rho);
        }
        for (wi, &vi) in w.iter_mut().zip(&v) {
            *wi = *wi - shift * vi;
        }
        std::mem::swap(&mut v, &mut w);
        project_and_normalize(&mut v)?;
    }
    Err(Error::NumericalFailure(format!(
        "power iteration did not reach residual {} in {} iterations",
        opts.residual_tol, opts.max_iters
    )))
}

fn project_and_normalize<S: Scalar>(v: &mut [S]) -> Result<()> {
    let mean = v.iter().copied().sum::<S>() / S::of_usize(v.len());
    for x in v.iter_mut() {
        *x = *x - mean;
    }
    let norm = v.iter().map(|&x| x * x).sum::<S>().sqrt();
    if !(norm > S::zero()) {
        return Err(Error::NumericalFailure(
            "power iterate collapsed to zero".into(),
        ));
    }
    for x in v.iter_mut() {
        *x = *x / norm;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    /// Cyclic Jacobi rotations: slow but simple, used as an oracle.
    fn jacobi_eigenvalues(m: &SymmetricMatrix<f64>) -> Vec<f64> {
        let n = m.dim();
        let mut a: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut d: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        d.sort_by(|a, b| b.partial_cmp(a).unwrap());
        d
    }

    fn random_symmetric(n: usize, seed: u64) -> SymmetricMatrix<f64> {
        let mut r = rng::stream(seed, 0);
        let vals: Vec<f64> = (0..n * n).map(|_| r.gen::<f64>() - 0.5).collect();
        SymmetricMatrix::from_upper(n, |i, j| vals[i * n + j])
    }

    #[test]
    fn small_cases() {
        let m = SymmetricMatrix::<f64>::from_upper(2, |i, j| if i == j { 0.75 } else { 0.25 });
        let ev = symmetric_eigenvalues(&m).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-15 && (ev[1] - 0.5).abs() < 1e-15);
        let one = SymmetricMatrix::from_upper(1, |_, _| 3.0);
        assert_eq!(symmetric_eigenvalues(&one).unwrap(), vec![3.0]);
        let diag = SymmetricMatrix::from_upper(4, |i, j| if i == j { i as f64 } else { 0.0 });
        assert_eq!(
            symmetric_eigenvalues(&diag).unwrap(),
            vec![3.0, 2.0, 1.0, 0.0]
        );
    }

    #[test]
    fn ql_matches_jacobi_oracle() {
        for (n, seed) in [(3, 1), (7, 2), (20, 3), (45, 4)] {
            let m = random_symmetric(n, seed);
            let ql = symmetric_eigenvalues(&m).unwrap();
            let jac = jacobi_eigenvalues(&m);
            for (a, b) in ql.iter().zip(&jac) {
                assert!((a - b).abs() < 1e-11, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn trace_is_preserved() {
        let m = random_symmetric(120, 9);
        let trace: f64 = (0..120).map(|i| m.get(i, i)).sum();
        let sum: f64 = symmetric_eigenvalues(&m).unwrap().iter().sum();
        assert!((trace - sum).abs() < 1e-10);
    }

    #[test]
    fn power_iteration_on_complement() {
        // Doubly stochastic: 1 is an eigenvector, so the complement route is valid.
        let n = 30;
        let m = SymmetricMatrix::from_upper(n, |i, j| {
            if i == j {
                0.5 + (i as f64) / (4.0 * n as f64)
            } else {
                0.0
            }
        });
        // Diagonal matrix: 1 is not an eigenvector, but the largest eigenvalue on
        // the complement of 1 still lies between the two top diagonal entries.
        let top = deflated_power_iteration(&m, PowerOptions::default()).unwrap();
        let d: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
        assert!(top <= d[n - 1] + 1e-12 && top >= d[n - 2] - 1e-12, "{top}");
    }
}
