use geogossip::analysis::{
    build_w, lambda2, lambda2_power, predict_cost, predict_tave, spectrum, w_matrix,
    w_matrix_from_definition, weyl_certificate,
};
use geogossip::experiments::connected_network;
use geogossip::sampling::distance_to_uniform;
use geogossip::{rng, SamplingPolicy};
use rand::Rng;

fn random_q(n: usize, seed: u64) -> Vec<f64> {
    let mut g = rng::stream(seed, 0);
    let raw: Vec<f64> = (0..n).map(|_| g.gen_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn rgg_q(n: usize, seed: u64) -> Vec<f64> {
    let (net, _) = connected_network::<f64>(n, seed, 0).unwrap();
    SamplingPolicy::with_defaults(&net.areas).unwrap().q
}

#[test]
fn both_constructions_agree() {
    for (n, seed) in [(2, 1), (17, 2), (150, 3), (500, 4)] {
        let q = random_q(n, seed);
        let a = w_matrix(&q).unwrap();
        let b = w_matrix_from_definition(&q).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-14, "n = {n}");
    }
}

#[test]
fn w_is_symmetric_doubly_stochastic_and_psd() {
    for (n, seed) in [(40, 5), (120, 6)] {
        for q in [random_q(n, seed), rgg_q(n, seed)] {
            let w = build_w(&q).unwrap();
            assert!(w.w.is_symmetric());
            for i in 0..n {
                let row: f64 = w.w.row(i).iter().sum();
                assert!((row - 1.0).abs() <= 1e-12);
            }
            let mut ones = vec![0.0; n];
            w.w.matvec(&vec![1.0; n], &mut ones);
            assert!(ones.iter().all(|v| (v - 1.0).abs() <= 1e-12));
            let spec = spectrum(&w).unwrap();
            assert!((spec[0] - 1.0).abs() <= 1e-10);
            assert!(*spec.last().unwrap() >= -1e-10);
            assert_eq!(spec[1], w.lambda2);
        }
    }
}

#[test]
fn uniform_q_closed_form() {
    for n in [2usize, 10, 100] {
        let w = build_w(&vec![1.0 / n as f64; n]).unwrap();
        assert!(
            (w.lambda2 - (1.0 - 1.0 / n as f64)).abs() <= 1e-9,
            "n = {n}"
        );
        let cert = weyl_certificate(&w.q).unwrap();
        assert!(cert.eps2.abs() <= 1e-12);
        assert!((cert.bound - (1.0 - 0.5 / n as f64)).abs() <= 1e-12);
        assert!(cert.holds);
    }
}

#[test]
fn point_mass_on_two_nodes() {
    let w = build_w(&[1.0f64, 0.0]).unwrap();
    let (a, b, d) = (w.w.get(0, 0), w.w.get(0, 1), w.w.get(1, 1));
    assert_eq!((a, b, d), (0.75, 0.25, 0.75));
    // Closed-form eigenvalues of a symmetric 2x2 matrix.
    let mid = (a + d) / 2.0;
    let rad = (((a - d) / 2.0).powi(2) + b * b).sqrt();
    assert!((mid - rad - 0.5).abs() < 1e-15);
    assert!((w.lambda2 - (mid - rad)).abs() <= 1e-12);
}

#[test]
fn rejects_unnormalized_q() {
    assert!(build_w(&[0.5f64, 0.4]).is_err());
}

#[test]
fn power_iteration_matches_full_eigensolve() {
    for (n, seed) in [(30, 1), (100, 2), (250, 3)] {
        for q in [random_q(n, seed), rgg_q(n, seed)] {
            let w = build_w(&q).unwrap();
            let ql = lambda2(&w).unwrap();
            let pw = lambda2_power(&w).unwrap();
            assert!((ql - pw).abs() <= 1e-9, "n = {n}: {ql} vs {pw}");
        }
    }
}

#[test]
fn weyl_certificate_on_rgg_instances() {
    let n = 200;
    for trial in 0..50 {
        let (net, _) = connected_network::<f64>(n, 2024, trial).unwrap();
        let p = SamplingPolicy::with_defaults(&net.areas).unwrap();
        let cert = weyl_certificate(&p.q).unwrap();
        assert!(cert.holds, "trial {trial}: {cert:?}");
        let (_, l2) = distance_to_uniform(&p.q);
        assert!((cert.eps2 - (n as f64).sqrt() * l2).abs() < 1e-12);
        assert!(cert.eps2 <= (0.1f64 + 0.01).sqrt());
    }
}

#[test]
fn gap_scales_like_one_over_n() {
    let mut scaled = Vec::new();
    for n in [100usize, 200, 400] {
        for seed in 0..3 {
            let w = build_w(&rgg_q(n, seed)).unwrap();
            scaled.push(n as f64 * (1.0 - w.lambda2));
        }
    }
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().cloned().fold(0.0, f64::max);
    assert!(hi / lo < 3.0, "{scaled:?}");
}

#[test]
fn predictions() {
    assert!((predict_tave(0.7, 0.7).unwrap() - 1.0).abs() < 1e-15);
    let n = 10_000.0;
    let t = predict_tave(1.0 - 1.0 / n, 1.0 / n).unwrap();
    assert!((t / (n * n.ln()) - 1.0).abs() < 1e-3);
    assert!(predict_tave(1.0, 0.1).is_err());
    assert_eq!(predict_cost(10, 0.1, 1.0, 1.0, 77.0).unwrap(), 77.0);
    assert_eq!(predict_cost(10, 0.1, 10.0, 2.0, 100.0).unwrap(), 2000.0);
}
