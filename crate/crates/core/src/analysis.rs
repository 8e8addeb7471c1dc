//! Expected update matrix of geographic gossip and its spectral predictions.
//!
//! When node `i` activates and pairs with `j` drawn from `q`, the expected
//! one-tick update is
//! `W = I - (1/2n)·diag(1 + n·q) + (1/2n)(1qᵀ + q1ᵀ)`,
//! which is the general `I + (1/2n)[P + Pᵀ - D]` with `P = 1qᵀ` and
//! `D_i = Σ_j (P_ij + P_ji) = 1 + n·q_i`. `W` is symmetric, doubly stochastic
//! and positive semidefinite, and its second eigenvalue sets the averaging time.

use serde::Serialize;

use crate::eigen::{self, PowerOptions, SymmetricMatrix};
use crate::error::{Error, Result};
use crate::sampling::distance_to_uniform;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct ExpectedUpdateMatrix<S> {
    pub w: SymmetricMatrix<S>,
    pub lambda2: S,
    pub q: Vec<S>,
}

fn check_distribution<S: Scalar>(q: &[S]) -> Result<()> {
    if q.is_empty() {
        return Err(Error::input("empty sampling distribution"));
    }
    if q.iter().any(|&v| !(v >= S::zero()) || !v.is_finite()) {
        return Err(Error::input(
            "sampling distribution has negative or non-finite entries",
        ));
    }
    let total: S = q.iter().copied().sum();
    if (total - S::one()).abs().to_f64_lossy() > 1e-9 {
        return Err(Error::input(format!(
            "sampling distribution sums to {total}"
        )));
    }
    Ok(())
}

/// `W` from the outer-product form.
pub fn w_matrix<S: Scalar>(q: &[S]) -> Result<SymmetricMatrix<S>> {
    check_distribution(q)?;
    let n = q.len();
    let nf = S::of_usize(n);
    let inv_2n = S::one() / (S::lit(2.0) * nf);
    Ok(SymmetricMatrix::from_upper(n, |i, j| {
        let coupling = (q[i] + q[j]) * inv_2n;
        if i == j {
            S::one() - (S::one() + nf * q[i]) * inv_2n + coupling
        } else {
            coupling
        }
    }))
}

/// `W = I + (1/2n)[P + Pᵀ - D]` assembled entry by entry from `P = 1qᵀ`.
pub fn w_matrix_from_definition<S: Scalar>(q: &[S]) -> Result<SymmetricMatrix<S>> {
    check_distribution(q)?;
    let n = q.len();
    let p = |_i: usize, j: usize| q[j];
    let d: Vec<S> = (0..n)
        .map(|i| (0..n).map(|j| p(i, j) + p(j, i)).sum())
        .collect();
    let inv_2n = S::one() / (S::lit(2.0) * S::of_usize(n));
    Ok(SymmetricMatrix::from_upper(n, |i, j| {
        let identity = if i == j { S::one() } else { S::zero() };
        let diag = if i == j { d[i] } else { S::zero() };
        identity + (p(i, j) + p(j, i) - diag) * inv_2n
    }))
}

/// Builds `W` for `q` and its second-largest eigenvalue.
pub fn build_w<S: Scalar>(q: &[S]) -> Result<ExpectedUpdateMatrix<S>> {
    let w = w_matrix(q)?;
    let lambda2 = second_eigenvalue(&w)?;
    Ok(ExpectedUpdateMatrix {
        w,
        lambda2,
        q: q.to_vec(),
    })
}

fn second_eigenvalue<S: Scalar>(w: &SymmetricMatrix<S>) -> Result<S> {
    let ev = eigen::symmetric_eigenvalues(w)?;
    ev.get(1)
        .copied()
        .ok_or_else(|| Error::input("second eigenvalue undefined for n < 2"))
}

/// Second-largest eigenvalue of `W` by full symmetric eigensolve.
pub fn lambda2<S: Scalar>(w: &ExpectedUpdateMatrix<S>) -> Result<S> {
    second_eigenvalue(&w.w)
}

/// Second-largest eigenvalue of `W` as the top eigenvalue of `W - (1/n)11ᵀ`
/// restricted to the complement of `1`, by power iteration.
pub fn lambda2_power<S: Scalar>(w: &ExpectedUpdateMatrix<S>) -> Result<S> {
    let opts = PowerOptions {
        shift: Some(spectrum_lower_bound(&w.q)),
        ..PowerOptions::default()
    };
    eigen::deflated_power_iteration(&w.w, opts)
}

/// Weyl lower bound on the spectrum of `W`: the smallest diagonal entry of
/// `I - (1/2n)diag(1 + nq)`, minus the spectral radius `√n·‖q - 1/n‖₂/(2n)` of
/// the rank-two part (the `11ᵀ/n²` remainder is positive semidefinite).
pub fn spectrum_lower_bound<S: Scalar>(q: &[S]) -> f64 {
    let n = q.len() as f64;
    let q_max = q.iter().map(|v| v.to_f64_lossy()).fold(0.0, f64::max);
    let (_, l2) = distance_to_uniform(q);
    let diag_min = 1.0 - (1.0 + n * q_max) / (2.0 * n);
    diag_min - n.sqrt() * l2.to_f64_lossy() / (2.0 * n) - 1e-12
}

/// All eigenvalues of `W`, decreasing.
pub fn spectrum<S: Scalar>(w: &ExpectedUpdateMatrix<S>) -> Result<Vec<S>> {
    eigen::symmetric_eigenvalues(&w.w)
}

/// Weyl/Rayleigh upper bound on `λ₂(W)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylCertificate {
    /// `√n·‖q - 1/n‖₂`
    pub eps2: f64,
    /// `(1 - 1/(2n)) + eps2/n`
    pub bound: f64,
    pub lambda2: f64,
    pub holds: bool,
}

/// Splits `W - (1/n²)11ᵀ` into the diagonal `I - (1/2n)diag(1 + nq)`, whose
/// top eigenvalue is at most `1 - 1/(2n)`, plus a symmetric rank-two part whose
/// top eigenvalue is at most `eps2/n` by Cauchy-Schwarz, and checks the
/// resulting bound against the computed `λ₂`.
pub fn weyl_certificate<S: Scalar>(q: &[S]) -> Result<WeylCertificate> {
    let w = build_w(q)?;
    Ok(certificate_for(&w))
}

pub fn certificate_for<S: Scalar>(w: &ExpectedUpdateMatrix<S>) -> WeylCertificate {
    let n = w.q.len() as f64;
    let (_, l2) = distance_to_uniform(&w.q);
    let eps2 = n.sqrt() * l2.to_f64_lossy();
    let bound = (1.0 - 1.0 / (2.0 * n)) + eps2 / n;
    let lambda2 = w.lambda2.to_f64_lossy();
    WeylCertificate {
        eps2,
        bound,
        lambda2,
        holds: lambda2 <= bound + 1e-9,
    }
}

/// Order-of-magnitude averaging time `log(1/ε) / log(1/λ₂)`.
pub fn predict_tave(lambda2: f64, epsilon: f64) -> Result<f64> {
    if !(lambda2 > 0.0 && lambda2 < 1.0) {
        return Err(Error::input(format!(
            "lambda2 must lie in (0, 1), got {lambda2}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(epsilon.ln() / lambda2.ln())
}

/// Expected transmissions to reach `ε`: queries per round × hops per query ×
/// averaging time. `n` and `ε` only enter through the other arguments.
pub fn predict_cost(n: usize, epsilon: f64, mean_hops: f64, mean_q: f64, tave: f64) -> Result<f64> {
    if n == 0 || !(epsilon > 0.0) || !(mean_hops > 0.0) || !(mean_q > 0.0) || !(tave > 0.0) {
        return Err(Error::param("cost prediction inputs must be positive"));
    }
    Ok(mean_q * mean_hops * tave)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub n: usize,
    pub lambda2: f64,
    pub one_minus_lambda2_times_n: f64,
    pub weyl_bound: f64,
    pub certificate_holds: bool,
    pub tave_prediction: f64,
}

pub fn spectral_report<S: Scalar>(q: &[S], epsilon: f64) -> Result<SpectralReport> {
    let w = build_w(q)?;
    let cert = certificate_for(&w);
    let n = q.len();
    let l2 = w.lambda2.to_f64_lossy();
    Ok(SpectralReport {
        n,
        lambda2: l2,
        one_minus_lambda2_times_n: n as f64 * (1.0 - l2),
        weyl_bound: cert.bound,
        certificate_holds: cert.holds,
        tave_prediction: predict_tave(l2, epsilon)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    #[test]
    fn uniform_closed_form() {
        for n in [2usize, 3, 10, 37] {
            let w = build_w(&uniform(n)).unwrap();
            let nf = n as f64;
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 - 1.0 / nf } else { 0.0 } + 1.0 / (nf * nf);
                    assert!((w.w.get(i, j) - expect).abs() < 1e-15);
                }
            }
            assert!((w.lambda2 - (1.0 - 1.0 / nf)).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn point_mass_pair() {
        let w = build_w(&[1.0f64, 0.0]).unwrap();
        assert_eq!(w.w.get(0, 0), 0.75);
        assert_eq!(w.w.get(1, 1), 0.75);
        assert_eq!(w.w.get(0, 1), 0.25);
        assert!((w.lambda2 - 0.5).abs() < 1e-15);
        assert!((lambda2_power(&w).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_q_rejected() {
        assert!(matches!(build_w(&[0.5, 0.6]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn prediction_values() {
        assert!((predict_tave(0.3, 0.3).unwrap() - 1.0).abs() < 1e-15);
        let n = 1e6;
        let t = predict_tave(1.0 - 1.0 / n, 1.0 / n).unwrap();
        assert!((t / (n * n.ln()) - 1.0).abs() < 1e-5);
        assert!(predict_tave(1.0, 0.1).is_err());
        assert_eq!(predict_cost(10, 0.1, 1.0, 1.0, 57.0).unwrap(), 57.0);
        assert_eq!(predict_cost(10, 0.1, 10.0, 2.0, 100.0).unwrap(), 2000.0);
        assert!(predict_cost(10, 0.1, 0.0, 2.0, 100.0).is_err());
    }

    #[test]
    fn uniform_certificate() {
        let n = 50;
        let c = weyl_certificate(&uniform(n)).unwrap();
        assert_eq!(c.eps2, 0.0);
        assert!((c.bound - (1.0 - 1.0 / 100.0)).abs() < 1e-15);
        assert!(c.holds);
    }

    #[test]
    fn report_fields() {
        let r = spectral_report(&uniform(10), 0.01).unwrap();
        assert!((r.lambda2 - 0.9).abs() < 1e-12);
        assert!((r.one_minus_lambda2_times_n - 1.0).abs() < 1e-10);
        let v = serde_json::to_value(&r).unwrap();
        for k in [
            "n",
            "lambda2",
            "one_minus_lambda2_times_n",
            "weyl_bound",
            "certificate_holds",
            "tave_prediction",
        ] {
            assert!(v.get(k).is_some());
        }
    }
}
