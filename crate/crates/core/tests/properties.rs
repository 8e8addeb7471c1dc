use geogossip::analysis::{build_w, w_matrix, w_matrix_from_definition};
use geogossip::engine::activate_tick;
use geogossip::geometry::voronoi_areas;
use geogossip::sampling::choose_threshold;
use geogossip::{rng, GossipState, Network, Point, ProtocolKind, SamplingPolicy};
use proptest::collection::vec;
use proptest::prelude::*;

fn sites(max: usize) -> impl Strategy<Value = Vec<Point>> {
    vec((0.0..1.0f64, 0.0..1.0f64), 1..max).prop_map(|raw| {
        let mut pts: Vec<Point> = raw.into_iter().map(|(x, y)| Point::new(x, y)).collect();
        pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
        pts.dedup_by(|a, b| a.distance_sq(b) < 1e-18);
        pts
    })
}

fn distribution(max: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(0.0..1.0f64, 2..max).prop_filter_map("all zero", |raw| {
        let s: f64 = raw.iter().sum();
        (s > 1e-6).then(|| raw.iter().map(|v| v / s).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn voronoi_areas_partition_the_square(pts in sites(60)) {
        let areas = voronoi_areas(&pts).unwrap();
        prop_assert!((areas.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(areas.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn adjacency_is_symmetric_and_follows_the_radius(pts in sites(80), r in 0.01..1.5f64) {
        let net = Network::from_positions(pts, r).unwrap();
        for i in 0..net.n {
            for &j in &net.adjacency[i] {
                prop_assert!(net.adjacency[j].contains(&i));
                prop_assert!(net.positions[i].distance(&net.positions[j]) <= r);
            }
        }
    }

    #[test]
    fn policy_formulas_hold(pts in sites(80), nu in 0.01..0.99f64, mu in 0.01..5.0f64) {
        prop_assume!(pts.len() >= 2);
        let areas = voronoi_areas(&pts).unwrap();
        let p = SamplingPolicy::new(&areas, nu, mu).unwrap();
        prop_assert!(p.tau > 0.0);
        prop_assert!((p.q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.p_accept > 0.0 && p.p_accept <= 1.0 + 1e-12);
        let pa: f64 = areas.iter().map(|&a| a.min(p.tau)).sum();
        prop_assert!((p.p_accept - pa).abs() < 1e-12);
        for (v, &a) in areas.iter().enumerate() {
            prop_assert!((p.accept_prob[v] - (p.tau / a).min(1.0)).abs() < 1e-12);
            prop_assert!((p.q[v] - a.min(p.tau) / pa).abs() < 1e-12);
        }
    }

    #[test]
    fn threshold_respects_the_quantile_level(areas in distribution(120), nu in 0.01..0.99f64, mu in 0.01..5.0f64) {
        prop_assume!(areas.iter().all(|&a| a > 0.0));
        let tau = choose_threshold(&areas, nu, mu).unwrap();
        let level = nu.min(mu / (1.0 + mu));
        let at_or_below = areas.iter().filter(|&&a| a <= tau).count() as f64;
        prop_assert!(at_or_below <= level * areas.len() as f64 + 1e-9);
    }

    #[test]
    fn w_is_doubly_stochastic_and_forms_agree(q in distribution(60)) {
        let w = build_w(&q).unwrap();
        let n = q.len();
        prop_assert!(w.w.is_symmetric());
        for i in 0..n {
            prop_assert!((w.w.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let a = w_matrix(&q).unwrap();
        let b = w_matrix_from_definition(&q).unwrap();
        prop_assert!(a.max_abs_diff(&b) <= 1e-14);
        prop_assert!(w.lambda2 <= 1.0 + 1e-12);
    }

    #[test]
    fn gossip_rounds_conserve_mass(pts in sites(40), seed in any::<u64>(), x in vec(-100.0..100.0f64, 40)) {
        prop_assume!(pts.len() >= 2);
        let n = pts.len();
        let net = Network::from_positions(pts, 0.4).unwrap();
        let p = SamplingPolicy::with_defaults(&net.areas).unwrap();
        let x0 = x[..n].to_vec();
        prop_assume!(x0.iter().any(|&v| v != 0.0));
        let sum0: f64 = x0.iter().sum();
        let scale: f64 = x0.iter().map(|v| v.abs()).sum();
        let mut g = rng::stream(seed, 0);
        for kind in ProtocolKind::ALL {
            let mut st = GossipState::new(x0.clone()).unwrap();
            for _ in 0..200 {
                activate_tick(&mut st, &net, &p, kind, &mut g);
            }
            prop_assert!((st.sum() - sum0).abs() <= 1e-12 * scale);
        }
    }
}
