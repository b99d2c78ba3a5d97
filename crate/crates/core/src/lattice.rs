//! Lifted lattice graphs discretizing the length functional
//! `L[γ] = ∫ |γ̇| / a(γ) dt`.
//!
//! Edge weights depend only on the residue of the edge's base node modulo the
//! period, so they are tabulated once per `(field, N, S, M)` in
//! [`PeriodicWeights`] and shared by every window. Windows that are integer
//! translates of each other therefore carry bit-identical weights.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField2;
use crate::par::{self, Exec};

pub const DEFAULT_N: u32 = 64;
pub const DEFAULT_STENCIL: u32 = 3;
pub const DEFAULT_QUAD: u32 = 8;
pub const DEFAULT_NODE_LIMIT: u64 = 1 << 34;

/// Discretization knobs shared by every distance computation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    /// Nodes per unit cell edge; grid spacing is `1/n`.
    pub n: u32,
    /// Stencil order `S`.
    pub stencil: u32,
    /// Midpoint quadrature points per edge.
    pub quad: u32,
    /// Upper bound on the number of nodes in a lattice window.
    pub node_limit: u64,
    /// Recompute every point-to-point distance with a margin one unit wider
    /// and fail if the value changes.
    pub check_window: bool,
    pub exec: Exec,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            n: DEFAULT_N,
            stencil: DEFAULT_STENCIL,
            quad: DEFAULT_QUAD,
            node_limit: DEFAULT_NODE_LIMIT,
            check_window: false,
            exec: Exec::default(),
        }
    }
}

impl EngineParams {
    pub fn with_n(mut self, n: u32) -> Self {
        self.n = n;
        self
    }

    pub fn with_stencil(mut self, s: u32) -> Self {
        self.stencil = s;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn is_primitive(k: [i64; 2]) -> bool {
    gcd(k[0], k[1]) == 1
}

/// Canonical half-plane representative: `k₁ > 0`, or `k₁ = 0` and `k₂ > 0`.
pub fn is_canonical(k: [i64; 2]) -> bool {
    k[0] > 0 || (k[0] == 0 && k[1] > 0)
}

/// Counterclockwise angle of `k` in `[0, 2π)`, used to order directions.
pub fn angle_of(k: [i64; 2]) -> f64 {
    let t = (k[1] as f64).atan2(k[0] as f64);
    if t < 0.0 {
        t + 2.0 * std::f64::consts::PI
    } else {
        t
    }
}

/// All primitive integer vectors with Chebyshev norm `<= order`, sorted by
/// angle starting at `(1, 0)`.
pub fn primitive_directions(order: u32) -> Vec<[i64; 2]> {
    let s = order as i64;
    let mut out = Vec::new();
    for k2 in -s..=s {
        for k1 in -s..=s {
            if (k1, k2) != (0, 0) && is_primitive([k1, k2]) {
                out.push([k1, k2]);
            }
        }
    }
    out.sort_by(|a, b| angle_of(*a).total_cmp(&angle_of(*b)));
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stencil {
    order: u32,
    offsets: Vec<[i64; 2]>,
    /// `reverse[k]` is the index of `-offsets[k]`.
    reverse: Vec<usize>,
}

impl Stencil {
    pub fn new(order: u32) -> Result<Stencil> {
        if order == 0 {
            return Err(Error::Config("stencil order must be >= 1".into()));
        }
        let offsets = primitive_directions(order);
        let reverse = offsets
            .iter()
            .map(|k| offsets.iter().position(|m| *m == [-k[0], -k[1]]).expect("stencil closed under negation"))
            .collect();
        Ok(Stencil { order, offsets, reverse })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn offsets(&self) -> &[[i64; 2]] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn reverse_of(&self, kidx: usize) -> usize {
        self.reverse[kidx]
    }

    pub fn index_of(&self, k: [i64; 2]) -> Option<usize> {
        self.offsets.iter().position(|m| *m == k)
    }
}

/// Rectangular window `[lo, hi]` of the lifted plane in lattice (cell) units.
/// Node `(i, j)` sits at `(i / n, j / n)` for `i ∈ [lo₀ n, hi₀ n]` and
/// `j ∈ [lo₁ n, hi₁ n]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeWindow {
    pub lo: [i64; 2],
    pub hi: [i64; 2],
    pub n: u32,
}

impl LatticeWindow {
    pub fn new(lo: [i64; 2], hi: [i64; 2], n: u32) -> Result<Self> {
        if n < 1 || hi[0] - lo[0] < 1 || hi[1] - lo[1] < 1 {
            return Err(Error::WindowTooSmall(format!("lo = {lo:?}, hi = {hi:?}, n = {n}")));
        }
        Ok(LatticeWindow { lo, hi, n })
    }

    /// Nodes along each axis.
    pub fn dims(&self) -> [u64; 2] {
        let n = self.n as i64;
        [((self.hi[0] - self.lo[0]) * n + 1) as u64, ((self.hi[1] - self.lo[1]) * n + 1) as u64]
    }

    pub fn node_count(&self) -> u64 {
        let [nx, ny] = self.dims();
        nx.saturating_mul(ny)
    }

    pub fn origin(&self) -> [i64; 2] {
        [self.lo[0] * self.n as i64, self.lo[1] * self.n as i64]
    }

    pub fn contains(&self, p: LatticePoint) -> bool {
        let o = self.origin();
        let [nx, ny] = self.dims();
        let (li, lj) = (p.i - o[0], p.j - o[1]);
        li >= 0 && lj >= 0 && (li as u64) < nx && (lj as u64) < ny
    }

    /// Row-major index from `lo`.
    pub fn index_of(&self, p: LatticePoint) -> Option<u64> {
        if !self.contains(p) {
            return None;
        }
        let o = self.origin();
        Some((p.j - o[1]) as u64 * self.dims()[0] + (p.i - o[0]) as u64)
    }

    pub fn point_of(&self, idx: u64) -> LatticePoint {
        let nx = self.dims()[0];
        let o = self.origin();
        LatticePoint { i: o[0] + (idx % nx) as i64, j: o[1] + (idx / nx) as i64 }
    }

    pub fn translated(&self, k: [i64; 2]) -> Self {
        LatticeWindow { lo: [self.lo[0] + k[0], self.lo[1] + k[1]], hi: [self.hi[0] + k[0], self.hi[1] + k[1]], n: self.n }
    }
}

/// A node of the lifted lattice in absolute grid units (`h = 1/n`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    pub i: i64,
    pub j: i64,
}

impl LatticePoint {
    pub fn new(i: i64, j: i64) -> Self {
        LatticePoint { i, j }
    }

    /// Nearest node to a point of the plane.
    pub fn snap(y: [f64; 2], n: u32) -> Self {
        LatticePoint { i: (y[0] * n as f64).round() as i64, j: (y[1] * n as f64).round() as i64 }
    }

    pub fn position(&self, n: u32) -> [f64; 2] {
        [self.i as f64 / n as f64, self.j as f64 / n as f64]
    }

    pub fn offset(&self, k: [i64; 2]) -> Self {
        LatticePoint { i: self.i + k[0], j: self.j + k[1] }
    }

    /// Residue modulo the period.
    pub fn residue(&self, n: u32) -> (u32, u32) {
        (self.i.rem_euclid(n as i64) as u32, self.j.rem_euclid(n as i64) as u32)
    }

    /// Unit cell containing the node.
    pub fn cell(&self, n: u32) -> [i64; 2] {
        [self.i.div_euclid(n as i64), self.j.div_euclid(n as i64)]
    }
}

/// Composite-midpoint approximation of `∫₀¹ h|k| / a(x + t h k) dt` with `m`
/// subintervals.
pub fn edge_weight(field: &ScalarField2, x: [f64; 2], k: [i64; 2], h: f64, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::Config("quadrature needs at least one point".into()));
    }
    let len = h * ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
    let mut acc = 0.0;
    for s in 0..m {
        let t = (s as f64 + 0.5) / m as f64;
        let a = field.sample([x[0] + t * h * k[0] as f64, x[1] + t * h * k[1] as f64]);
        if !(a > 0.0) {
            return Err(Error::NonPositiveSpeed(a));
        }
        acc += 1.0 / a;
    }
    Ok(len * acc / m as f64)
}

/// Weight of the edge `from → from + k` exactly as stored in a
/// [`PeriodicWeights`] table: evaluated at the residue of the canonical end.
pub fn lattice_edge_weight(field: &ScalarField2, from: LatticePoint, k: [i64; 2], n: u32, quad: u32) -> Result<f64> {
    let h = 1.0 / n as f64;
    let (start, dir) = if is_canonical(k) { (from, k) } else { (from.offset(k), [-k[0], -k[1]]) };
    let (ri, rj) = start.residue(n);
    edge_weight(field, [ri as f64 / n as f64, rj as f64 / n as f64], dir, h, quad)
}

/// Edge weights for every residue class and stencil offset.
#[derive(Debug)]
pub struct PeriodicWeights {
    n: u32,
    quad: u32,
    stencil: Stencil,
    /// `table[(rj * n + ri) * K + kidx]`.
    table: Vec<f64>,
    field_fingerprint: u64,
    a_min: f64,
    a_max: f64,
}

impl PeriodicWeights {
    pub fn build(field: &ScalarField2, params: &EngineParams) -> Result<Self> {
        if !field.positivity_required() {
            let (lo, _) = field.extrema();
            if !(lo > 0.0) {
                return Err(Error::NonPositiveSpeed(lo));
            }
        }
        if params.n < 1 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        let stencil = Stencil::new(params.stencil)?;
        let n = params.n;
        let h = params.h();
        let kk = stencil.len();
        let canonical: Vec<usize> = (0..kk).filter(|&k| is_canonical(stencil.offsets[k])).collect();

        // One row of canonical weights per residue, computed in parallel.
        let residues: Vec<u32> = (0..n * n).collect();
        let rows = par::map(params.exec, &residues, |&r| {
            let (ri, rj) = (r % n, r / n);
            let x = [ri as f64 / n as f64, rj as f64 / n as f64];
            canonical
                .iter()
                .map(|&k| edge_weight(field, x, stencil.offsets[k], h, params.quad))
                .collect::<Result<Vec<f64>>>()
        });
        let mut table = vec![f64::NAN; (n * n) as usize * kk];
        for (r, row) in rows.into_iter().enumerate() {
            let row = row?;
            for (w, &k) in row.into_iter().zip(&canonical) {
                table[r * kk + k] = w;
            }
        }
        // The reverse edge of (r, k) is the canonical edge (r + k, -k).
        let nn = n as i64;
        for r in 0..(n * n) as usize {
            let (ri, rj) = ((r as u32 % n) as i64, (r as u32 / n) as i64);
            for k in 0..kk {
                let off = stencil.offsets[k];
                if is_canonical(off) {
                    continue;
                }
                let rev = stencil.reverse[k];
                let si = (ri + off[0]).rem_euclid(nn);
                let sj = (rj + off[1]).rem_euclid(nn);
                table[r * kk + k] = table[(sj * nn + si) as usize * kk + rev];
            }
        }
        let (a_min, a_max) = field.extrema();
        let weights = PeriodicWeights { n, quad: params.quad, stencil, table, field_fingerprint: field.fingerprint(), a_min, a_max };
        debug_assert!(weights.check_bounds().is_ok());
        Ok(weights)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn quad(&self) -> u32 {
        self.quad
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn field_fingerprint(&self) -> u64 {
        self.field_fingerprint
    }

    pub fn speed_bounds(&self) -> (f64, f64) {
        (self.a_min, self.a_max)
    }

    /// Weights of all stencil edges leaving nodes with residue `(ri, rj)`.
    #[inline]
    pub fn row(&self, ri: u32, rj: u32) -> &[f64] {
        let kk = self.stencil.len();
        let base = (rj as usize * self.n as usize + ri as usize) * kk;
        &self.table[base..base + kk]
    }

    #[inline]
    pub fn weight(&self, from: LatticePoint, kidx: usize) -> f64 {
        let (ri, rj) = from.residue(self.n);
        self.row(ri, rj)[kidx]
    }

    /// Every weight lies in `[h|k|/a_max, h|k|/a_min]` up to rounding.
    pub fn check_bounds(&self) -> std::result::Result<(), String> {
        let h = 1.0 / self.n as f64;
        let kk = self.stencil.len();
        for (idx, &w) in self.table.iter().enumerate() {
            let k = self.stencil.offsets[idx % kk];
            let len = h * ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
            let (lo, hi) = (len / self.a_max, len / self.a_min);
            if !(w >= lo * (1.0 - 1e-12) && w <= hi * (1.0 + 1e-12)) {
                return Err(format!("weight {w} of offset {k:?} outside [{lo}, {hi}]"));
            }
        }
        Ok(())
    }
}

/// Weighted undirected graph over the nodes of a window, with one edge per
/// node per stencil offset whose endpoint lies in the window.
#[derive(Clone, Debug)]
pub struct LatticeGraph {
    window: LatticeWindow,
    weights: Arc<PeriodicWeights>,
}

impl LatticeGraph {
    pub fn new(weights: Arc<PeriodicWeights>, window: LatticeWindow, node_limit: u64) -> Result<Self> {
        if window.n != weights.n {
            return Err(Error::Config(format!("window resolution {} differs from weight table {}", window.n, weights.n)));
        }
        let [nx, ny] = window.dims();
        if nx < 2 || ny < 2 {
            return Err(Error::WindowTooSmall(format!("{nx} x {ny} nodes")));
        }
        let nodes = window.node_count();
        if nodes > node_limit {
            return Err(Error::CapacityExceeded { nodes, limit: node_limit });
        }
        Ok(LatticeGraph { window, weights })
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn weights(&self) -> &Arc<PeriodicWeights> {
        &self.weights
    }

    pub fn stencil(&self) -> &Stencil {
        self.weights.stencil()
    }

    pub fn node_count(&self) -> u64 {
        self.window.node_count()
    }

    pub fn field_fingerprint(&self) -> u64 {
        self.weights.field_fingerprint
    }

    /// In-window neighbours of `p` with their edge weights, in stencil order.
    pub fn neighbors(&self, p: LatticePoint) -> impl Iterator<Item = (LatticePoint, f64)> + '_ {
        let (ri, rj) = p.residue(self.weights.n);
        let row = self.weights.row(ri, rj);
        self.stencil()
            .offsets()
            .iter()
            .zip(row)
            .map(move |(k, &w)| (p.offset(*k), w))
            .filter(move |(q, _)| self.window.contains(*q))
    }

    /// Weight of the edge `p → p + k`, if `k` is a stencil offset.
    pub fn edge_weight_between(&self, p: LatticePoint, q: LatticePoint) -> Option<f64> {
        let k = [q.i - p.i, q.j - p.j];
        let kidx = self.stencil().index_of(k)?;
        Some(self.weights.weight(p, kidx))
    }

    /// Visits every undirected edge once (from its canonical end).
    pub fn for_each_edge(&self, mut f: impl FnMut(LatticePoint, LatticePoint, f64)) {
        for idx in 0..self.node_count() {
            let p = self.window.point_of(idx);
            let (ri, rj) = p.residue(self.weights.n);
            let row = self.weights.row(ri, rj);
            for (kidx, k) in self.stencil().offsets().iter().enumerate() {
                if !is_canonical(*k) {
                    continue;
                }
                let q = p.offset(*k);
                if self.window.contains(q) {
                    f(p, q, row[kidx]);
                }
            }
        }
    }
}

/// Builds the weight table for `field` and wraps it in a graph over `window`.
pub fn build_graph(field: &ScalarField2, window: LatticeWindow, params: &EngineParams) -> Result<LatticeGraph> {
    let weights = Arc::new(PeriodicWeights::build(field, &EngineParams { n: window.n, ..*params })?);
    LatticeGraph::new(weights, window, params.node_limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Preset;

    fn constant(v: f64) -> ScalarField2 {
        ScalarField2::speed(Preset::Constant { value: v }).unwrap()
    }

    fn layered() -> ScalarField2 {
        ScalarField2::speed(Preset::Layered { mean: 2.0, amplitude: 1.0 }).unwrap()
    }

    // Composite Simpson with many panels, independent of the midpoint path.
    fn simpson(f: impl Fn(f64) -> f64, panels: usize) -> f64 {
        let h = 1.0 / panels as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..panels {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn edge_weight_examples() {
        for m in [1, 3, 8] {
            assert!((edge_weight(&constant(2.0), [0.3, 0.1], [1, 0], 0.1, m).unwrap() - 0.05).abs() < 1e-15);
        }
        assert!((edge_weight(&constant(4.0), [0.0, 0.0], [1, 0], 1.0, 8).unwrap() - 0.25).abs() < 1e-15);
        let oracle = simpson(|t| 1.0 / (2.0 + (2.0 * std::f64::consts::PI * t).cos()), 20_000);
        assert!((oracle - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        let w = edge_weight(&layered(), [0.0, 0.0], [1, 0], 1.0, 64).unwrap();
        assert!((w - oracle).abs() < 1e-4);
    }

    #[test]
    fn stencil_counts_and_closure() {
        assert_eq!(Stencil::new(1).unwrap().len(), 8);
        let s3 = Stencil::new(3).unwrap();
        assert_eq!(s3.len(), 32);
        for (i, k) in s3.offsets().iter().enumerate() {
            assert_eq!(s3.offsets()[s3.reverse_of(i)], [-k[0], -k[1]]);
            assert!(is_primitive(*k) && k[0].abs().max(k[1].abs()) <= 3);
        }
        assert!(s3.index_of([1, 0]).is_some() && s3.index_of([0, 1]).is_some());
        assert_eq!(Stencil::new(8).unwrap().len(), 176);
    }

    #[test]
    fn build_graph_counts_and_constant_weights() {
        let f = constant(2.0);
        let w = LatticeWindow::new([0, 0], [1, 1], 2).unwrap();
        let g = build_graph(&f, w, &EngineParams::default().with_stencil(1)).unwrap();
        assert_eq!(g.node_count(), 9);
        let mut axis = 0;
        g.for_each_edge(|p, q, wt| {
            let k = [q.i - p.i, q.j - p.j];
            if k[0] * k[1] == 0 {
                axis += 1;
                assert!((wt - 0.25).abs() < 1e-15);
            }
        });
        assert_eq!(axis, 12);

        let g2 = build_graph(&f, w, &EngineParams::default().with_stencil(2)).unwrap();
        let knight = g2.edge_weight_between(LatticePoint::new(0, 0), LatticePoint::new(2, 1)).unwrap();
        assert!((knight - 0.5 * 5f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn symmetry_bounds_and_translation() {
        let f = ScalarField2::speed(Preset::Bumps { base: 1.0, amp: 4.0, sigma: 0.15 }).unwrap();
        let params = EngineParams::default().with_n(8);
        let weights = Arc::new(PeriodicWeights::build(&f, &params).unwrap());
        weights.check_bounds().unwrap();
        let w = LatticeWindow::new([0, 0], [2, 2], 8).unwrap();
        let g = LatticeGraph::new(weights.clone(), w, u64::MAX).unwrap();
        g.for_each_edge(|p, q, wt| {
            assert_eq!(g.edge_weight_between(q, p).unwrap().to_bits(), wt.to_bits());
        });

        let lf = layered();
        let a = build_graph(&lf, LatticeWindow::new([0, 0], [2, 1], 8).unwrap(), &params).unwrap();
        let b = build_graph(&lf, LatticeWindow::new([1, 0], [3, 1], 8).unwrap(), &params).unwrap();
        let collect = |g: &LatticeGraph| {
            let mut v = Vec::new();
            g.for_each_edge(|_, _, w| v.push(w.to_bits()));
            v
        };
        assert_eq!(collect(&a), collect(&b));
    }

    #[test]
    fn quadrature_refinement_halves_error() {
        // Each doubling of M shrinks the midpoint error by about 4x on smooth
        // integrands, so consecutive refinement differences shrink by ~4 and
        // the error relative to the finest value roughly halves per step at worst.
        let f = layered();
        let x = [0.1, 0.0];
        let k = [3, 1];
        let h = 0.25;
        let reference = edge_weight(&f, x, k, h, 4096).unwrap();
        let e: Vec<f64> = [4, 8, 16].iter().map(|&m| (edge_weight(&f, x, k, h, m).unwrap() - reference).abs()).collect();
        for pair in e.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!(ratio > 1.7, "refinement ratio {ratio}");
        }
    }

    #[test]
    fn small_windows_are_rejected() {
        assert!(LatticeWindow::new([0, 0], [0, 1], 4).is_err());
        let f = constant(1.0);
        let w = LatticeWindow::new([0, 0], [4, 4], 64).unwrap();
        let p = EngineParams { node_limit: 1000, ..EngineParams::default() };
        assert!(matches!(build_graph(&f, w, &p), Err(Error::CapacityExceeded { .. })));
    }
}
