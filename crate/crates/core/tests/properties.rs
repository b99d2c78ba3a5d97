use proptest::prelude::*;

use stablefront::field::{Preset, ScalarField2};
use stablefront::front::{build_front, polar_dual, polygon_distance};
use stablefront::geodesic::{action_dominates_length, adjust, energy_matched_durations, exact_sum, find_crossings, PathRecord};
use stablefront::hamiltonian::hbar_dual;
use stablefront::lattice::{primitive_directions, EngineParams, LatticePoint, LatticeWindow};
use stablefront::shortest_path::{extract_path, sssp, Engine};
use stablefront::stable_norm::synthetic_table;

fn bumps(amp: f64, sigma: f64) -> ScalarField2 {
    ScalarField2::speed(Preset::Bumps { base: 1.0, amp, sigma }).unwrap()
}

fn small() -> EngineParams {
    EngineParams::default().with_n(8)
}

fn point() -> impl Strategy<Value = LatticePoint> {
    (-12i64..12, -12i64..12).prop_map(|(i, j)| LatticePoint::new(i, j))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn distance_is_symmetric_and_translation_invariant(
        amp in 0.0f64..4.0, sigma in 0.05f64..0.4, x in point(), y in point(), k in (-3i64..3, -3i64..3)
    ) {
        let engine = Engine::new(&bumps(amp, sigma), small()).unwrap();
        let d = engine.node_distance(x, y).unwrap();
        let back = engine.node_distance(y, x).unwrap();
        prop_assert!((d - back).abs() <= 1e-12 * d);
        let shift = [k.0 * 8, k.1 * 8];
        prop_assert_eq!(d.to_bits(), engine.node_distance(x.offset(shift), y.offset(shift)).unwrap().to_bits());
    }

    #[test]
    fn triangle_inequality(amp in 0.0f64..4.0, x in point(), y in point(), z in point()) {
        let engine = Engine::new(&bumps(amp, 0.2), small()).unwrap();
        let xz = engine.node_distance(x, z).unwrap();
        let via = engine.node_distance(x, y).unwrap() + engine.node_distance(y, z).unwrap();
        prop_assert!(xz <= via * (1.0 + 1e-12));
    }

    #[test]
    fn quadratic_norm_front_is_symmetric_and_self_dual(
        a in 0.5f64..4.0, c in 0.5f64..4.0, t in -0.9f64..0.9, p in (-3.0f64..3.0, -3.0f64..3.0)
    ) {
        let b = t * (a * c).sqrt();
        let norm = |q: [i64; 2]| {
            let (x, y) = (q[0] as f64, q[1] as f64);
            (a * x * x + 2.0 * b * x * y + c * y * y).sqrt()
        };
        let entries: Vec<([i64; 2], f64)> = primitive_directions(4).into_iter().map(|q| (q, norm(q))).collect();
        let front = build_front(&synthetic_table(&entries), 10.0).unwrap();
        let pts = front.hull_points();
        for v in &pts {
            prop_assert!(pts.iter().any(|w| w[0] == -v[0] && w[1] == -v[1]));
        }
        prop_assert!(polygon_distance(&polar_dual(&front.s_polygon).unwrap(), &pts) <= 1e-9);
        let p = [p.0, p.1];
        prop_assert_eq!(hbar_dual(&front, p).to_bits(), hbar_dual(&front, [-p[0], -p[1]]).to_bits());
        for (q, v) in &entries {
            prop_assert!(front.s_support([q[0] as f64, q[1] as f64]) <= v * (1.0 + 1e-12));
        }
    }

    #[test]
    fn exact_sum_matches_integer_oracle(xs in prop::collection::vec(-1i64 << 40..1i64 << 40, 0..60), seed in any::<u64>()) {
        let scale = 2f64.powi(-30);
        let vals: Vec<f64> = xs.iter().map(|&x| x as f64 * scale).collect();
        let expected = xs.iter().sum::<i64>() as f64 * scale;
        prop_assert_eq!(exact_sum(vals.iter().copied()), expected);
        let mut shuffled = vals.clone();
        let len = shuffled.len().max(1);
        shuffled.rotate_left(seed as usize % len);
        shuffled.reverse();
        prop_assert_eq!(exact_sum(shuffled).to_bits(), exact_sum(vals).to_bits());
    }

    #[test]
    fn action_dominates_and_matches_at_energy(
        start in point(), moves in prop::collection::vec(0usize..32, 1..30),
        taus in prop::collection::vec(1e-3f64..1.0, 30), c in 1.1f64..4.0
    ) {
        let v = ScalarField2::preset(Preset::Layered { mean: 0.0, amplitude: 1.0 }).unwrap();
        let engine = Engine::new(&stablefront::field::mechanical_to_metric(&v, c).unwrap(), small()).unwrap();
        let offsets = engine.weights().stencil().offsets().to_vec();
        let mut nodes = vec![start];
        for m in &moves {
            nodes.push(nodes.last().unwrap().offset(offsets[m % offsets.len()]));
        }
        let path = PathRecord::from_nodes(nodes, engine.weights(), engine.params().quad).unwrap();
        let r = action_dominates_length(&taus[..moves.len()], &path, &v, c).unwrap();
        prop_assert!(r.action >= r.maupertuis - 1e-12 * (r.action + r.maupertuis));
        let m = action_dominates_length(&energy_matched_durations(&path, &v, c), &path, &v, c).unwrap();
        prop_assert!((m.action - m.maupertuis).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn splicing_shortest_paths_conserves_length(
        amp in 1.0f64..4.0, targets in prop::collection::vec((0i64..=16, 0i64..=16), 2)
    ) {
        let engine = Engine::new(&bumps(amp, 0.15), small()).unwrap();
        let graph = engine.graph(LatticeWindow::new([-1, -1], [3, 3], 8).unwrap()).unwrap();
        let map = sssp(&graph, LatticePoint::new(0, 0)).unwrap();
        let p1 = extract_path(&map, LatticePoint::new(targets[0].0, targets[0].1)).unwrap();
        let p2 = extract_path(&map, LatticePoint::new(targets[1].0, targets[1].1)).unwrap();
        let cs = find_crossings(&p1, &p2).unwrap();
        prop_assume!(cs.len() >= 2 && cs[0].node != cs[cs.len() - 1].node);
        let (a, b) = adjust(&p1, &p2, cs[0], cs[cs.len() - 1]).unwrap();
        let before = exact_sum(p1.steps.iter().chain(&p2.steps).copied());
        let after = exact_sum(a.steps.iter().chain(&b.steps).copied());
        prop_assert_eq!(before.to_bits(), after.to_bits());
        for path in [&a, &b] {
            let d = map.distance(path.last());
            prop_assert!((path.length() - d).abs() <= 1e-12 * d.max(1e-300));
        }
    }
}
