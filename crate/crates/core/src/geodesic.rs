//! Distance-realizing lattice paths: lengths and actions, crossings and
//! splicing, periodicity, and minimal closed geodesics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::field::{mechanical_to_metric, ScalarField2};
use crate::io::{gray, Svg};
use crate::lattice::{lattice_edge_weight, LatticePoint};
use crate::par;
pub use crate::shortest_path::PathRecord;
use crate::shortest_path::Engine;

/// Correctly rounded sum of `xs` (Shewchuk partials with a final
/// half-even correction), so equal multisets give bit-equal sums.
pub fn exact_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in xs {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

pub fn path_length(path: &PathRecord) -> f64 {
    path.length()
}

/// Concatenates two paths that meet at `a.last() == b.first()`.
pub fn concat(a: &PathRecord, b: &PathRecord) -> Result<PathRecord> {
    if !a.compatible(b) {
        return Err(Error::ParamMismatch);
    }
    if a.last() != b.first() {
        return Err(Error::InvalidSplice("paths do not meet".into()));
    }
    let mut nodes = a.nodes.clone();
    nodes.extend_from_slice(&b.nodes[1..]);
    let mut steps = a.steps.clone();
    steps.extend_from_slice(&b.steps);
    Ok(rebuild(a, nodes, steps))
}

fn rebuild(like: &PathRecord, nodes: Vec<LatticePoint>, steps: Vec<f64>) -> PathRecord {
    let mut cumulative = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    cumulative.push(acc);
    for s in &steps {
        acc += s;
        cumulative.push(acc);
    }
    PathRecord { nodes, steps, cumulative, ..like.clone() }
}

fn step_offset(path: &PathRecord, m: usize) -> [i64; 2] {
    let (a, b) = (path.nodes[m], path.nodes[m + 1]);
    [b.i - a.i, b.j - a.j]
}

/// Energy-`c` action of the path run at speed `√(2(c − V))`: its length in
/// the metric `a_c = 1/√(2(c − V))`, with the same quadrature as the path's
/// own weights.
pub fn action_of_path(path: &PathRecord, v: &ScalarField2, c: f64) -> Result<f64> {
    let a_c = mechanical_to_metric(v, c)?;
    let mut acc = 0.0;
    for m in 0..path.steps.len() {
        acc += lattice_edge_weight(&a_c, path.nodes[m], step_offset(path, m), path.n, path.quad)?;
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionComparison {
    pub action: f64,
    pub maupertuis: f64,
}

/// Action `Σ τ_m(½(ℓ_m/τ_m)² + c − V_m)` for segment durations `τ_m`, and
/// the reparametrization-free bound `Σ √2·√(c − V_m)·ℓ_m`, with `V_m` the
/// potential at the segment midpoint and `ℓ_m` its Euclidean length.
pub fn action_dominates_length(
    durations: &[f64],
    path: &PathRecord,
    v: &ScalarField2,
    c: f64,
) -> Result<ActionComparison> {
    let segments = path.steps.len();
    if durations.len() != segments {
        return Err(Error::DimensionMismatch { expected: segments, got: durations.len() });
    }
    let (_, vmax) = v.extrema();
    if c <= vmax {
        return Err(Error::EnergyBelowPotential { c, max_v: vmax });
    }
    let h = 1.0 / path.n as f64;
    let mut action = Vec::with_capacity(segments);
    let mut maupertuis = Vec::with_capacity(segments);
    for (m, &tau) in durations.iter().enumerate() {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!("duration {m} is not positive: {tau}")));
        }
        let (ell, vm) = segment_geometry(path, m, h, v);
        action.push(ell * ell / (2.0 * tau) + tau * (c - vm));
        maupertuis.push(std::f64::consts::SQRT_2 * (c - vm).sqrt() * ell);
    }
    let out = ActionComparison { action: exact_sum(action), maupertuis: exact_sum(maupertuis) };
    let scale = out.action.abs() + out.maupertuis.abs();
    if out.action < out.maupertuis - 1e-12 * scale {
        return Err(Error::Postcondition(format!(
            "action {} below length bound {}",
            out.action, out.maupertuis
        )));
    }
    Ok(out)
}

fn segment_geometry(path: &PathRecord, m: usize, h: f64, v: &ScalarField2) -> (f64, f64) {
    let (a, b) = (path.nodes[m], path.nodes[m + 1]);
    let k = [b.i - a.i, b.j - a.j];
    let ell = h * ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
    let mid = [(a.i + b.i) as f64 * 0.5 * h, (a.j + b.j) as f64 * 0.5 * h];
    (ell, v.sample(mid))
}

/// Durations that make the action equal the length bound segment-wise:
/// `τ_m = ℓ_m/√(2(c − V_m))`.
pub fn energy_matched_durations(path: &PathRecord, v: &ScalarField2, c: f64) -> Vec<f64> {
    let h = 1.0 / path.n as f64;
    (0..path.steps.len())
        .map(|m| {
            let (ell, vm) = segment_geometry(path, m, h, v);
            ell / (2.0 * (c - vm)).sqrt()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossingPair {
    pub i: usize,
    pub j: usize,
    pub node: LatticePoint,
}

/// Every pair of indices at which the two paths visit the same lifted node,
/// ordered by index in `p1`, then in `p2`.
pub fn find_crossings(p1: &PathRecord, p2: &PathRecord) -> Result<Vec<CrossingPair>> {
    if !p1.compatible(p2) {
        return Err(Error::ParamMismatch);
    }
    let mut index: HashMap<LatticePoint, Vec<usize>> = HashMap::new();
    for (j, p) in p2.nodes.iter().enumerate() {
        index.entry(*p).or_default().push(j);
    }
    let mut out = Vec::new();
    for (i, p) in p1.nodes.iter().enumerate() {
        if let Some(js) = index.get(p) {
            out.extend(js.iter().map(|&j| CrossingPair { i, j, node: *p }));
        }
    }
    Ok(out)
}

fn reversed_steps(steps: &[f64]) -> Vec<f64> {
    steps.iter().rev().copied().collect()
}

/// Exchanges the stretches of `p1` and `p2` between two shared nodes.
/// When `p2` visits the crossings in the opposite order its stretch is
/// inserted reversed, and vice versa. Edge weights are carried over, so the
/// multiset of weights of the two paths is unchanged.
pub fn adjust(
    p1: &PathRecord,
    p2: &PathRecord,
    c1: CrossingPair,
    c2: CrossingPair,
) -> Result<(PathRecord, PathRecord)> {
    if !p1.compatible(p2) {
        return Err(Error::ParamMismatch);
    }
    for c in [c1, c2] {
        let ok = c.i < p1.len() && c.j < p2.len() && p1.nodes[c.i] == p2.nodes[c.j] && p1.nodes[c.i] == c.node;
        if !ok {
            return Err(Error::InvalidSplice(format!("({}, {}) is not a shared node", c.i, c.j)));
        }
    }
    if c1.node == c2.node {
        return Err(Error::InvalidSplice("crossings coincide".into()));
    }
    if c1.i >= c2.i {
        return Err(Error::InvalidSplice("crossings are not ordered along the first path".into()));
    }
    let (i1, i2) = (c1.i, c2.i);
    let (n1, s1) = (&p1.nodes, &p1.steps);
    let (n2, s2) = (&p2.nodes, &p2.steps);
    let splice = |head_n: &[LatticePoint],
                  head_s: &[f64],
                  mid_n: Vec<LatticePoint>,
                  mid_s: Vec<f64>,
                  tail_n: &[LatticePoint],
                  tail_s: &[f64]| {
        let mut nodes = head_n.to_vec();
        nodes.extend(mid_n);
        nodes.extend_from_slice(tail_n);
        let mut steps = head_s.to_vec();
        steps.extend(mid_s);
        steps.extend_from_slice(tail_s);
        (nodes, steps)
    };
    let ((a_n, a_s), (b_n, b_s)) = if c1.j < c2.j {
        let (j1, j2) = (c1.j, c2.j);
        (
            splice(&n1[..i1], &s1[..i1], n2[j1..=j2].to_vec(), s2[j1..j2].to_vec(), &n1[i2 + 1..], &s1[i2..]),
            splice(&n2[..j1], &s2[..j1], n1[i1..=i2].to_vec(), s1[i1..i2].to_vec(), &n2[j2 + 1..], &s2[j2..]),
        )
    } else {
        let (j1, j2) = (c2.j, c1.j);
        let mid2: Vec<LatticePoint> = n2[j1..=j2].iter().rev().copied().collect();
        let mid1: Vec<LatticePoint> = n1[i1..=i2].iter().rev().copied().collect();
        (
            splice(&n1[..i1], &s1[..i1], mid2, reversed_steps(&s2[j1..j2]), &n1[i2 + 1..], &s1[i2..]),
            splice(&n2[..j1], &s2[..j1], mid1, reversed_steps(&s1[i1..i2]), &n2[j2 + 1..], &s2[j2..]),
        )
    };
    Ok((rebuild(p1, a_n, a_s), rebuild(p2, b_n, b_s)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub q: [i64; 2],
    pub i: usize,
    pub j: usize,
}

/// First repeat of a torus-reduced node along the path: the smallest `j`
/// with an earlier `i` at the same residue; `q` is the lattice translation
/// between them.
pub fn detect_period(path: &PathRecord) -> Option<Period> {
    let n = path.n as i64;
    let mut seen: HashMap<(u32, u32), usize> = HashMap::new();
    for (j, p) in path.nodes.iter().enumerate() {
        let r = p.residue(path.n);
        if let Some(&i) = seen.get(&r) {
            let a = path.nodes[i];
            return Some(Period { q: [(p.i - a.i) / n, (p.j - a.j) / n], i, j });
        }
        seen.insert(r, j);
    }
    None
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosedGeodesic {
    pub q: [i64; 2],
    pub value: f64,
    pub base: LatticePoint,
    pub cycle: PathRecord,
    pub bases_scanned: usize,
}

/// Minimum over base nodes `x` of one unit cell (every `stride`-th node in
/// each axis) of `d(x, x + q)`, with a realizing path.
pub fn min_closed_geodesic(engine: &Engine, q: [i64; 2], stride: u32) -> Result<ClosedGeodesic> {
    if q == [0, 0] {
        return Err(Error::ZeroDirection);
    }
    if stride == 0 {
        return Err(Error::Config("stride must be at least 1".into()));
    }
    let n = engine.params().n as i64;
    let lift = [q[0] * n, q[1] * n];
    let bases: Vec<LatticePoint> = (0..n)
        .step_by(stride as usize)
        .flat_map(|j| (0..n).step_by(stride as usize).map(move |i| LatticePoint::new(i, j)))
        .collect();
    let values = par::map(engine.params().exec, &bases, |x| engine.node_distance(*x, x.offset(lift)));
    let mut best: Option<(f64, LatticePoint)> = None;
    for (x, v) in bases.iter().zip(values) {
        let v = v?;
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, *x));
        }
    }
    let (value, base) = best.expect("at least one base node");
    let cycle = engine.node_path(base, base.offset(lift))?;
    Ok(ClosedGeodesic { q, value, base, cycle, bases_scanned: bases.len() })
}

pub fn path_to_json(path: &PathRecord) -> Value {
    json!({
        "nodes": path.nodes.iter().map(|p| [p.i, p.j]).collect::<Vec<_>>(),
        "h": 1.0 / path.n as f64,
        "length": path.length(),
        "displacement": path.displacement(),
    })
}

/// Paths drawn over a gray-scale rendering of `field` on their bounding box.
pub fn paths_to_svg(field: &ScalarField2, paths: &[&PathRecord]) -> String {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for path in paths {
        for p in &path.nodes {
            let x = p.position(path.n);
            for a in 0..2 {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
        }
    }
    if !lo[0].is_finite() {
        lo = [0.0, 0.0];
        hi = [1.0, 1.0];
    }
    let radius = 0.5 * (hi[0] - lo[0]).max(hi[1] - lo[1]) + 0.25;
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let mut svg = Svg::new(600.0, center, radius);
    let (fmin, fmax) = field.extrema();
    let span = if fmax > fmin { fmax - fmin } else { 1.0 };
    let cells = 60;
    let cell = 2.0 * radius / cells as f64;
    for j in 0..cells {
        for i in 0..cells {
            let x0 = [center[0] - radius + i as f64 * cell, center[1] - radius + j as f64 * cell];
            let v = field.sample([x0[0] + 0.5 * cell, x0[1] + 0.5 * cell]);
            svg.rect(x0, [cell, cell], &gray((v - fmin) / span));
        }
    }
    let colors = ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e"];
    for (k, path) in paths.iter().enumerate() {
        let pts: Vec<[f64; 2]> = path.nodes.iter().map(|p| p.position(path.n)).collect();
        svg.polyline(&pts, colors[k % colors.len()], 2.0);
    }
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Preset;
    use crate::lattice::{EngineParams, LatticeWindow};
    use crate::shortest_path::{extract_path, sssp};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn engine(p: Preset, n: u32) -> Engine {
        Engine::new(&ScalarField2::speed(p).unwrap(), EngineParams::default().with_n(n)).unwrap()
    }

    fn cosine() -> ScalarField2 {
        ScalarField2::preset(Preset::Layered { mean: 0.0, amplitude: 1.0 }).unwrap()
    }

    fn zero() -> ScalarField2 {
        ScalarField2::preset(Preset::Constant { value: 0.0 }).unwrap()
    }

    fn straight(e: &Engine, from: LatticePoint, k: [i64; 2], count: usize) -> PathRecord {
        let nodes: Vec<LatticePoint> = (0..=count as i64).map(|s| LatticePoint::new(from.i + s * k[0], from.j + s * k[1])).collect();
        PathRecord::from_nodes(nodes, e.weights(), e.params().quad).unwrap()
    }

    #[test]
    fn exact_sum_is_order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..500).map(|_| rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-8..8))).collect();
        let mut ys = xs.clone();
        ys.reverse();
        ys.swap(3, 77);
        assert_eq!(exact_sum(xs.iter().copied()).to_bits(), exact_sum(ys).to_bits());
        assert_eq!(exact_sum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
    }

    #[test]
    fn length_examples() {
        let e = engine(Preset::Constant { value: 2.0 }, 8);
        let single = straight(&e, LatticePoint::new(0, 0), [1, 0], 0);
        assert_eq!(path_length(&single), 0.0);
        let p = straight(&e, LatticePoint::new(0, 0), [1, 0], 8);
        assert!((path_length(&p) - 0.5).abs() < 1e-12);
        let q = straight(&e, LatticePoint::new(8, 0), [0, 1], 5);
        let pq = concat(&p, &q).unwrap();
        assert_eq!(path_length(&pq), path_length(&p) + path_length(&q));
    }

    #[test]
    fn action_examples_and_identity() {
        let e = engine(Preset::Constant { value: 1.0 }, 16);
        let p = straight(&e, LatticePoint::new(0, 0), [1, 0], 16);
        assert!((action_of_path(&p, &zero(), 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!((action_of_path(&p, &zero(), 2.0).unwrap() - 2.0).abs() < 1e-12);
        let a = action_of_path(&p, &cosine(), 2.0).unwrap();
        let m = 200_000;
        let oracle: f64 = (0..m)
            .map(|s| {
                let t = (s as f64 + 0.5) / m as f64;
                (2.0 * (2.0 - (2.0 * std::f64::consts::PI * t).cos())).sqrt()
            })
            .sum::<f64>()
            / m as f64;
        assert!((a - oracle).abs() < 1e-3, "{a} vs {oracle}");
        assert!(matches!(action_of_path(&p, &cosine(), 1.0), Err(Error::EnergyBelowPotential { .. })));

        // Length under a_c of a Dijkstra path equals its action.
        let a_c = mechanical_to_metric(&cosine(), 2.0).unwrap();
        let ec = Engine::new(&a_c, EngineParams::default().with_n(16)).unwrap();
        let path = ec.node_path(LatticePoint::new(0, 0), LatticePoint::new(37, 21)).unwrap();
        let act = action_of_path(&path, &cosine(), 2.0).unwrap();
        assert!((act - path.length()).abs() <= 1e-12 * act);
    }

    #[test]
    fn maupertuis_examples() {
        let e = engine(Preset::Constant { value: 1.0 }, 16);
        let p = straight(&e, LatticePoint::new(0, 0), [1, 1], 10);
        let d = energy_matched_durations(&p, &zero(), 0.5);
        let r = action_dominates_length(&d, &p, &zero(), 0.5).unwrap();
        let eu = 10.0 * 2f64.sqrt() / 16.0;
        assert!((r.action - eu).abs() < 1e-12 && (r.maupertuis - eu).abs() < 1e-12);
        let halved: Vec<f64> = d.iter().map(|t| 0.5 * t).collect();
        let r2 = action_dominates_length(&halved, &p, &zero(), 0.5).unwrap();
        assert!(r2.action > r.action);
        assert!(matches!(
            action_dominates_length(&d[1..], &p, &zero(), 0.5),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn crossings_examples() {
        let e = engine(Preset::Constant { value: 1.0 }, 8);
        let p = straight(&e, LatticePoint::new(0, 0), [1, 0], 8);
        assert_eq!(find_crossings(&p, &p).unwrap().len(), p.len());
        let q = straight(&e, LatticePoint::new(0, 1), [1, 0], 8);
        assert!(find_crossings(&p, &q).unwrap().is_empty());
        let other = engine(Preset::Constant { value: 2.0 }, 8);
        let r = straight(&other, LatticePoint::new(0, 0), [1, 0], 8);
        assert!(matches!(find_crossings(&p, &r), Err(Error::ParamMismatch)));
    }

    #[test]
    fn dijkstra_paths_with_swapped_endpoints_cross() {
        let b = engine(Preset::Bumps { base: 1.0, amp: 4.0, sigma: 0.15 }, 16);
        let w = LatticeWindow::new([-1, -1], [3, 3], 16).unwrap();
        let g = b.graph(w).unwrap();
        let (x1, y1) = (LatticePoint::new(0, 0), LatticePoint::new(32, 32));
        let (x2, y2) = (LatticePoint::new(0, 32), LatticePoint::new(32, 0));
        let p1 = extract_path(&sssp(&g, x1).unwrap(), y1).unwrap();
        let p2 = extract_path(&sssp(&g, x2).unwrap(), y2).unwrap();
        assert!(!find_crossings(&p1, &p2).unwrap().is_empty());
    }

    #[test]
    fn adjust_examples() {
        let e = engine(Preset::Constant { value: 1.0 }, 8);
        let p = straight(&e, LatticePoint::new(0, 0), [1, 0], 8);
        let cs = find_crossings(&p, &p).unwrap();
        let (a, b) = adjust(&p, &p, cs[1], cs[5]).unwrap();
        assert_eq!(a, p);
        assert_eq!(b, p);
        assert!(matches!(adjust(&p, &p, cs[5], cs[1]), Err(Error::InvalidSplice(_))));
        assert!(matches!(adjust(&p, &p, cs[2], cs[2]), Err(Error::InvalidSplice(_))));
        let q = straight(&e, LatticePoint::new(0, 1), [1, 0], 8);
        let fake = CrossingPair { i: 0, j: 0, node: p.nodes[0] };
        let fake2 = CrossingPair { i: 3, j: 3, node: p.nodes[3] };
        assert!(matches!(adjust(&p, &q, fake, fake2), Err(Error::InvalidSplice(_))));
    }

    #[test]
    fn adjust_keeps_paths_distance_realizing_in_both_orientations() {
        let b = engine(Preset::Bumps { base: 1.0, amp: 4.0, sigma: 0.15 }, 16);
        let w = LatticeWindow::new([-1, -1], [3, 3], 16).unwrap();
        let g = b.graph(w).unwrap();
        let src = LatticePoint::new(0, 0);
        let map = sssp(&g, src).unwrap();
        let p1 = extract_path(&map, LatticePoint::new(32, 30)).unwrap();
        let p2 = extract_path(&map, LatticePoint::new(30, 32)).unwrap();
        let cs = find_crossings(&p1, &p2).unwrap();
        assert!(cs.len() >= 2);
        let (c1, c2) = (cs[0], *cs.last().unwrap());
        let total = exact_sum(p1.steps.iter().chain(&p2.steps).copied());
        for (q1, q2) in [(p1.clone(), p2.clone()), (p1.clone(), p2.reversed(b.weights()).unwrap())] {
            let cs = find_crossings(&q1, &q2).unwrap();
            let c1 = *cs.iter().find(|c| c.node == c1.node).unwrap();
            let c2 = *cs.iter().find(|c| c.node == c2.node).unwrap();
            let (a, bb) = adjust(&q1, &q2, c1, c2).unwrap();
            assert_eq!(exact_sum(a.steps.iter().chain(&bb.steps).copied()).to_bits(), total.to_bits());
            for path in [&a, &bb] {
                let d = extract_path(&sssp(&g, path.first()).unwrap(), path.last()).unwrap().length();
                assert!((path.length() - d).abs() <= 1e-12 * d);
                for w in path.nodes.windows(2) {
                    assert!(b.weights().stencil().index_of([w[1].i - w[0].i, w[1].j - w[0].j]).is_some());
                }
            }
        }
    }

    #[test]
    fn period_examples() {
        let e = engine(Preset::Constant { value: 2.0 }, 8);
        let p = straight(&e, LatticePoint::new(0, 0), [1, 0], 16);
        assert_eq!(detect_period(&p), Some(Period { q: [1, 0], i: 0, j: 8 }));
        let short = straight(&e, LatticePoint::new(0, 0), [1, 0], 7);
        assert_eq!(detect_period(&short), None);
        let ch = engine(Preset::Channel { base: 1.0, boost: 4.0, width: 0.2 }, 8);
        let path = ch.node_path(LatticePoint::new(0, 0), LatticePoint::new(64, 0)).unwrap();
        let per = detect_period(&path).unwrap();
        assert_eq!(per.q, [1, 0]);
        assert_eq!(per.j - per.i, 8);
    }

    #[test]
    fn closed_geodesic_examples() {
        let c = engine(Preset::Constant { value: 2.0 }, 16);
        let r = min_closed_geodesic(&c, [1, 0], 8).unwrap();
        assert!((r.value - 0.5).abs() < 0.005);
        let l = engine(Preset::Layered { mean: 2.0, amplitude: 1.0 }, 16);
        let r = min_closed_geodesic(&l, [0, 1], 4).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 0.02 / 3.0);
        assert_eq!(r.base.i, 0);
        let neg = min_closed_geodesic(&l, [0, -1], 4).unwrap();
        assert!((neg.value - r.value).abs() <= 1e-12 * r.value);
        let r = min_closed_geodesic(&l, [1, 0], 8).unwrap();
        assert!((r.value - 1.0 / 3f64.sqrt()).abs() < 0.02 / 3f64.sqrt());
        assert!(r.value <= l.node_distance(LatticePoint::new(0, 0), LatticePoint::new(16, 0)).unwrap());
        assert!(matches!(min_closed_geodesic(&l, [0, 0], 1), Err(Error::ZeroDirection)));
    }

    #[test]
    fn path_json_and_svg() {
        let e = engine(Preset::Constant { value: 2.0 }, 8);
        let p = straight(&e, LatticePoint::new(0, 0), [1, 1], 4);
        let v = path_to_json(&p);
        assert_eq!(v["nodes"][4], json!([4, 4]));
        assert_eq!(v["displacement"], json!([0.5, 0.5]));
        let svg = paths_to_svg(e.field(), &[&p]);
        assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
    }
}
