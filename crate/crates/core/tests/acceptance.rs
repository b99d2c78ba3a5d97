//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stablefront::cli::run_command;
use stablefront::field::{Preset, ScalarField2};
use stablefront::front::{build_front, facet_report, polar_dual, polygon_distance, CornerClass, FacetCriteria, FrontModel};
use stablefront::geodesic::{
    action_dominates_length, adjust, energy_matched_durations, exact_sum, find_crossings, PathRecord,
};
use stablefront::hamiltonian::{convexity_probe, hbar_dual, hbar_mechanical, infmax_upper, level_set, InfmaxConfig, MechanicalConfig};
use stablefront::lattice::{EngineParams, LatticePoint, LatticeWindow};
use stablefront::shortest_path::{extract_path, sssp, sssp_to, Engine};
use stablefront::stable_norm::{burago_gap, direction_sweep, fekete_refine, norm_estimate, SweepStrategy};
use stablefront::Result;

type Outcome = Result<(bool, String)>;

fn speed(p: Preset) -> ScalarField2 {
    ScalarField2::speed(p).unwrap()
}

fn constant() -> ScalarField2 {
    speed(Preset::Constant { value: 2.0 })
}

fn layered() -> ScalarField2 {
    speed(Preset::Layered { mean: 2.0, amplitude: 1.0 })
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn front_of(field: &ScalarField2, params: EngineParams, q: u32) -> Result<FrontModel> {
    let engine = Engine::new(field, params)?;
    build_front(&direction_sweep(&engine, q, 8, SweepStrategy::SharedSource)?, 10.0)
}

fn c1_constant() -> Outcome {
    let field = constant();
    let engine = Engine::new(&field, EngineParams::default())?;
    let v = norm_estimate(&engine, [1, 0], 8)?.value;
    let h = hbar_dual(&front_of(&field, EngineParams::default(), 4)?, [1.0, 0.0]);
    let ok = rel(v, 0.5) <= 0.01 && rel(h, 2.0) <= 0.015;
    Ok((ok, format!("norm {v:.6}, hbar {h:.6}")))
}

fn c2_layered() -> Outcome {
    let field = layered();
    let engine = Engine::new(&field, EngineParams::default())?;
    let v1 = norm_estimate(&engine, [1, 0], 8)?.value;
    let v2 = norm_estimate(&engine, [0, 1], 8)?.value;
    let front = front_of(&field, EngineParams::default(), 4)?;
    let near = |t: [f64; 2]| {
        let r = t[0].hypot(t[1]);
        front.hull_points().iter().any(|p| (p[0] - t[0]).hypot(p[1] - t[1]) <= 0.02 * r)
    };
    let r3 = 3f64.sqrt();
    let ok = rel(v1, 1.0 / r3) <= 0.02 && rel(v2, 1.0 / 3.0) <= 0.02 && near([r3, 0.0]) && near([0.0, 3.0]);
    Ok((ok, format!("|(1,0)| {v1:.6}, |(0,1)| {v2:.6}")))
}

fn c3_duality() -> Outcome {
    let presets = [
        Preset::Constant { value: 2.0 },
        Preset::Layered { mean: 2.0, amplitude: 1.0 },
        Preset::Channel { base: 1.0, boost: 4.0, width: 0.2 },
        Preset::Bumps { base: 1.0, amp: 4.0, sigma: 0.15 },
    ];
    let (mut round, mut support) = (0.0f64, 0.0f64);
    let mut over = false;
    for p in presets {
        let engine = Engine::new(&speed(p), EngineParams::default())?;
        let table = direction_sweep(&engine, 4, 8, SweepStrategy::SharedSource)?;
        let front = build_front(&table, 10.0)?;
        round = round.max(polygon_distance(&polar_dual(&front.s_polygon)?, &front.hull_points()));
        for e in &table.estimates {
            let s = front.s_support([e.q[0] as f64, e.q[1] as f64]);
            over |= s > e.value * (1.0 + 1e-9);
            support = support.max(1.0 - s / e.value);
        }
    }
    let ok = round <= 1e-9 && !over && support <= 0.02;
    Ok((ok, format!("round trip {round:.2e}, support deficit {support:.2e}")))
}

fn c4_sandwich() -> Outcome {
    let field = layered();
    let dual = hbar_dual(&front_of(&field, EngineParams::default(), 4)?, [1.0, 0.0]);
    let r = infmax_upper(&field, [1.0, 0.0], &InfmaxConfig { nv: 64, iters: 500, ..InfmaxConfig::default() })?;
    let hi = 1.10 * 3f64.sqrt();
    let ok = r.value >= dual * 0.97 && r.value <= hi && r.initial == 3.0;
    Ok((ok, format!("inf-max {:.6} in [{:.6}, {hi:.6}], initial {}", r.value, dual * 0.97, r.initial)))
}

fn c5_mechanical() -> Outcome {
    let zero = ScalarField2::preset(Preset::Constant { value: 0.0 })?;
    let cfg = MechanicalConfig::default();
    let h = hbar_mechanical(&zero, [1.0, 0.0], &cfg)?.value;
    let ls = level_set(&zero, 1.0, cfg.q_m, &cfg)?;
    let r2 = 2f64.sqrt();
    let radius = (0..64)
        .map(|k| {
            let t = k as f64 * std::f64::consts::TAU / 64.0;
            rel(ls.s_support([t.cos(), t.sin()]), r2)
        })
        .fold(0.0, f64::max);
    let probe = convexity_probe(&zero, [1.0, 0.0], [2.0, 0.0], 1, &cfg)?;
    let gap = probe.gaps[0].1;
    let ok = (h - 0.5).abs() <= 0.02 && radius <= 0.02 && (gap - 0.125).abs() <= 0.03 && probe.passed;
    Ok((ok, format!("H(1,0) {h:.5}, radius deviation {radius:.2e}, gap {gap:.5}")))
}

fn c6_splice() -> Outcome {
    let field = speed(Preset::Bumps { base: 1.0, amp: 4.0, sigma: 0.15 });
    let params = EngineParams::default();
    let n = params.n as i64;
    let engine = Engine::new(&field, params)?;
    let graph = engine.graph(LatticeWindow::new([-1, -1], [3, 3], params.n)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pick = |rng: &mut ChaCha8Rng| LatticePoint::new(rng.gen_range(0..=2 * n), rng.gen_range(0..=2 * n));
    let sources: Vec<LatticePoint> = (0..12).map(|_| pick(&mut rng)).collect();
    let maps = sources.iter().map(|&x| sssp(&graph, x)).collect::<Result<Vec<_>>>()?;
    let (mut built, mut attempts, mut case2, mut worst) = (0, 0, 0, 0.0f64);
    let mut conserved = true;
    while built < 50 && attempts < 100_000 {
        attempts += 1;
        let (s1, s2) = (rng.gen_range(0..sources.len()), rng.gen_range(0..sources.len()));
        if s1 == s2 {
            continue;
        }
        let (y1, y2) = (pick(&mut rng), pick(&mut rng));
        let p1 = extract_path(&maps[s1], y1)?;
        let mut p2 = extract_path(&maps[s2], y2)?;
        if rng.gen_bool(0.5) {
            p2 = p2.reversed(graph.weights())?;
        }
        let cs = find_crossings(&p1, &p2)?;
        if cs.len() < 2 || cs[0].node == cs[cs.len() - 1].node {
            continue;
        }
        let (c1, c2) = (cs[0], cs[cs.len() - 1]);
        if c1.j > c2.j {
            case2 += 1;
        }
        let (a, b) = adjust(&p1, &p2, c1, c2)?;
        let before = exact_sum(p1.steps.iter().chain(&p2.steps).copied());
        let after = exact_sum(a.steps.iter().chain(&b.steps).copied());
        conserved &= before.to_bits() == after.to_bits();
        for path in [&a, &b] {
            let d = sssp_to(&graph, path.first(), &[path.last()])?.distance(path.last());
            worst = worst.max((path.length() - d).abs() / d.max(f64::MIN_POSITIVE));
        }
        built += 1;
    }
    let ok = built == 50 && conserved && worst <= 1e-12;
    Ok((ok, format!("{built} pairs ({case2} reversed order), max rel dev {worst:.2e}, conserved {conserved}")))
}

fn c7_fekete() -> Outcome {
    let engine = Engine::new(&layered(), EngineParams::default())?;
    let f = fekete_refine(&engine, [0, 1], 4)?;
    let s = &f.fekete_sequence;
    let mono = s.len() == 5 && s.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9);
    let g = burago_gap(&engine, [0, 1], &[5, 6, 7, 8], 4)?;
    let ok = mono && g.slope.abs() <= 0.02 * g.best;
    Ok((ok, format!("s_k {:?}, gap slope {:.2e} vs norm {:.6}", s.iter().map(|p| p.1).collect::<Vec<_>>(), g.slope, g.best)))
}

fn facet_history(field: &ScalarField2, stencil_follows_q: bool) -> Result<Vec<FrontModel>> {
    [4u32, 8]
        .iter()
        .map(|&q| {
            let params = EngineParams::default();
            front_of(field, if stencil_follows_q { params.with_stencil(q) } else { params }, q)
        })
        .collect()
}

fn c8_facets() -> Outcome {
    let criteria = FacetCriteria::default();
    let channel = facet_report(&facet_history(&speed(Preset::Channel { base: 1.0, boost: 4.0, width: 0.2 }), false)?, &criteria)?;
    let axis = channel.corners.iter().find(|c| c.q == [1, 0]);
    let axis_ok = axis.is_some_and(|c| c.class == CornerClass::Persistent && c.angles.iter().all(|a| a.1 >= 10.0));
    let flat = facet_report(&facet_history(&constant(), true)?, &criteria)?;
    let shrink = flat
        .corners
        .iter()
        .map(|c| c.angles[0].1 / c.angles[1].1.max(f64::MIN_POSITIVE))
        .fold(f64::INFINITY, f64::min);
    let all_artifacts = !flat.corners.is_empty() && flat.corners.iter().all(|c| c.class == CornerClass::Artifact);
    let ok = axis_ok && all_artifacts && shrink >= 1.8;
    Ok((
        ok,
        format!(
            "channel (1,0) angles {:?}, constant: {} corners, min shrink {shrink:.3}",
            axis.map(|c| c.angles.clone()),
            flat.corners.len()
        ),
    ))
}

fn c9_maupertuis() -> Outcome {
    let v = ScalarField2::preset(Preset::Layered { mean: 0.0, amplitude: 1.0 })?;
    let c = 2.0;
    let engine = Engine::new(&stablefront::field::mechanical_to_metric(&v, c)?, EngineParams::default())?;
    let offsets = engine.weights().stencil().offsets().to_vec();
    let quad = engine.params().quad;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut ok, mut worst_eq, mut min_margin) = (true, 0.0f64, f64::INFINITY);
    for _ in 0..1000 {
        let mut nodes = vec![LatticePoint::new(rng.gen_range(-64..64), rng.gen_range(-64..64))];
        for _ in 0..rng.gen_range(1..40) {
            let k = offsets[rng.gen_range(0..offsets.len())];
            nodes.push(nodes.last().unwrap().offset(k));
        }
        let path = PathRecord::from_nodes(nodes, engine.weights(), quad)?;
        let durations: Vec<f64> = (0..path.steps.len()).map(|_| rng.gen_range(1e-3..0.5)).collect();
        let r = match action_dominates_length(&durations, &path, &v, c) {
            Ok(r) => r,
            Err(_) => {
                ok = false;
                continue;
            }
        };
        let scale = r.action.abs() + r.maupertuis.abs();
        min_margin = min_margin.min((r.action - r.maupertuis) / scale);
        ok &= r.action >= r.maupertuis - 1e-12 * scale;
        let m = action_dominates_length(&energy_matched_durations(&path, &v, c), &path, &v, c)?;
        let dev = (m.action - m.maupertuis).abs();
        worst_eq = worst_eq.max(dev);
        ok &= dev <= 1e-9;
    }
    Ok((ok, format!("min relative margin {min_margin:.2e}, matched deviation {worst_eq:.2e}")))
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        out.insert(entry.file_name().to_string_lossy().into_owned(), std::fs::read(entry.path()).unwrap());
    }
    out
}

fn c10_determinism() -> Outcome {
    let mut trees = Vec::new();
    let mut codes = Vec::new();
    for threads in ["1", "8"] {
        let dir = tempfile::tempdir()?;
        let out = dir.path().to_str().unwrap().to_string();
        codes.push(run_command(["stablefront", "validate", "--threads", threads, "--out", &out]));
        trees.push(read_tree(dir.path()));
    }
    let ok = codes == [0, 0] && !trees[0].is_empty() && trees[0] == trees[1];
    Ok((ok, format!("exit codes {codes:?}, {} artifacts", trees[0].len())))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 constant metric oracles", c1_constant),
        ("2 layered metric closed forms", c2_layered),
        ("3 duality round trip and support consistency", c3_duality),
        ("4 inf-max sandwich", c4_sandwich),
        ("5 mechanical consistency", c5_mechanical),
        ("6 crossing join", c6_splice),
        ("7 dyadic monotonicity and gap slope", c7_fekete),
        ("8 facet persistence", c8_facets),
        ("9 action versus length", c9_maupertuis),
        ("10 determinism across thread counts", c10_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!("{} criterion {name}: {detail} [{:.1}s]", if ok { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
