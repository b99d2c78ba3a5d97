//! Deterministic Dijkstra on [`LatticeGraph`]s and point-to-point distances
//! with automatically sized windows.
//!
//! Per-node state lives in 64×64 tiles that are allocated on first touch, so
//! a query that settles a small ball inside a large window only pays for the
//! ball.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::ScalarField2;
use crate::lattice::{EngineParams, LatticeGraph, LatticePoint, LatticeWindow, PeriodicWeights};

const TILE_SHIFT: u64 = 6;
const TILE: u64 = 1 << TILE_SHIFT;
const TILE_MASK: u64 = TILE - 1;
const NO_PRED: u16 = u16::MAX;

struct Tile {
    dist: Box<[f64]>,
    pred: Box<[u16]>,
    done: Box<[bool]>,
}

impl Tile {
    fn new() -> Box<Tile> {
        let len = (TILE * TILE) as usize;
        Box::new(Tile {
            dist: vec![f64::INFINITY; len].into_boxed_slice(),
            pred: vec![NO_PRED; len].into_boxed_slice(),
            done: vec![false; len].into_boxed_slice(),
        })
    }
}

struct TileStore {
    tiles_x: u64,
    tiles: Vec<Option<Box<Tile>>>,
}

impl TileStore {
    fn new(dims: [u64; 2]) -> Self {
        let tiles_x = dims[0].div_ceil(TILE);
        let tiles_y = dims[1].div_ceil(TILE);
        let mut tiles = Vec::new();
        tiles.resize_with((tiles_x * tiles_y) as usize, || None);
        TileStore { tiles_x, tiles }
    }

    #[inline]
    fn locate(&self, li: u64, lj: u64) -> (usize, usize) {
        let t = (lj >> TILE_SHIFT) * self.tiles_x + (li >> TILE_SHIFT);
        let o = ((lj & TILE_MASK) << TILE_SHIFT) | (li & TILE_MASK);
        (t as usize, o as usize)
    }

    #[inline]
    fn get(&self, li: u64, lj: u64) -> Option<(&Tile, usize)> {
        let (t, o) = self.locate(li, lj);
        self.tiles[t].as_deref().map(|tile| (tile, o))
    }

    #[inline]
    fn get_mut(&mut self, li: u64, lj: u64) -> (&mut Tile, usize) {
        let (t, o) = self.locate(li, lj);
        (self.tiles[t].get_or_insert_with(Tile::new), o)
    }

    fn allocated_tiles(&self) -> usize {
        self.tiles.iter().filter(|t| t.is_some()).count()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    idx: u64,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Min-heap on (dist, idx).
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source distances on a lattice graph.
pub struct DistanceMap {
    source: LatticePoint,
    window: LatticeWindow,
    weights: Arc<PeriodicWeights>,
    store: TileStore,
    complete: bool,
}

impl DistanceMap {
    pub fn source(&self) -> LatticePoint {
        self.source
    }

    pub fn window(&self) -> &LatticeWindow {
        &self.window
    }

    pub fn weights(&self) -> &Arc<PeriodicWeights> {
        &self.weights
    }

    /// Whether every reachable node was settled (no early exit).
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    fn local(&self, p: LatticePoint) -> Option<(u64, u64)> {
        if !self.window.contains(p) {
            return None;
        }
        let o = self.window.origin();
        Some(((p.i - o[0]) as u64, (p.j - o[1]) as u64))
    }

    /// Tentative distance; exact once the node is settled. `∞` if untouched.
    pub fn distance(&self, p: LatticePoint) -> f64 {
        self.local(p)
            .and_then(|(li, lj)| self.store.get(li, lj))
            .map(|(tile, o)| tile.dist[o])
            .unwrap_or(f64::INFINITY)
    }

    pub fn is_settled(&self, p: LatticePoint) -> bool {
        self.local(p)
            .and_then(|(li, lj)| self.store.get(li, lj))
            .map(|(tile, o)| tile.done[o])
            .unwrap_or(false)
    }

    /// Stencil index of the edge that reaches `p` from its predecessor.
    pub fn predecessor_offset(&self, p: LatticePoint) -> Option<usize> {
        let (li, lj) = self.local(p)?;
        let (tile, o) = self.store.get(li, lj)?;
        (tile.pred[o] != NO_PRED).then_some(tile.pred[o] as usize)
    }

    pub fn predecessor(&self, p: LatticePoint) -> Option<LatticePoint> {
        let k = self.weights.stencil().offsets()[self.predecessor_offset(p)?];
        Some(LatticePoint::new(p.i - k[0], p.j - k[1]))
    }

    /// Number of 64×64 storage tiles touched by the search.
    pub fn touched_tiles(&self) -> usize {
        self.store.allocated_tiles()
    }
}

/// Full single-source Dijkstra: every node of the window is settled.
pub fn sssp(graph: &LatticeGraph, source: LatticePoint) -> Result<DistanceMap> {
    run_dijkstra(graph, source, &[])
}

/// Dijkstra that stops as soon as every node in `targets` is settled.
/// Distances of settled nodes are exact; others are upper bounds or `∞`.
pub fn sssp_to(graph: &LatticeGraph, source: LatticePoint, targets: &[LatticePoint]) -> Result<DistanceMap> {
    if targets.is_empty() {
        return Err(Error::Config("sssp_to needs at least one target".into()));
    }
    run_dijkstra(graph, source, targets)
}

fn run_dijkstra(graph: &LatticeGraph, source: LatticePoint, targets: &[LatticePoint]) -> Result<DistanceMap> {
    let window = *graph.window();
    let src_idx = window.index_of(source).ok_or(Error::NodeOutOfWindow(source.i, source.j))?;
    for t in targets {
        if !window.contains(*t) {
            return Err(Error::NodeOutOfWindow(t.i, t.j));
        }
    }
    let weights = graph.weights().clone();
    let n = weights.n() as u64;
    let offsets = weights.stencil().offsets();
    let [nx, ny] = window.dims();
    // `lo` is a whole number of cells, so local coordinates share residues
    // with absolute ones.
    let mut store = TileStore::new([nx, ny]);
    let mut remaining: Vec<u64> = targets.iter().filter_map(|t| window.index_of(*t)).collect();
    remaining.sort_unstable();
    remaining.dedup();

    let mut heap = BinaryHeap::new();
    {
        let (tile, o) = store.get_mut(src_idx % nx, src_idx / nx);
        tile.dist[o] = 0.0;
    }
    heap.push(Entry { dist: 0.0, idx: src_idx });

    let mut complete = true;
    while let Some(Entry { dist: d, idx }) = heap.pop() {
        let (li, lj) = (idx % nx, idx / nx);
        {
            let (tile, o) = store.get_mut(li, lj);
            if tile.done[o] || d > tile.dist[o] {
                continue;
            }
            tile.done[o] = true;
        }
        if !remaining.is_empty() {
            if let Ok(pos) = remaining.binary_search(&idx) {
                remaining.remove(pos);
                if remaining.is_empty() {
                    complete = heap.is_empty();
                    break;
                }
            }
        }
        let row = weights.row((li % n) as u32, (lj % n) as u32);
        for (kidx, k) in offsets.iter().enumerate() {
            let vi = li as i64 + k[0];
            let vj = lj as i64 + k[1];
            if vi < 0 || vj < 0 || vi as u64 >= nx || vj as u64 >= ny {
                continue;
            }
            let (vi, vj) = (vi as u64, vj as u64);
            let nd = d + row[kidx];
            let (tile, o) = store.get_mut(vi, vj);
            if tile.done[o] {
                continue;
            }
            let cur = tile.dist[o];
            if nd < cur {
                tile.dist[o] = nd;
                tile.pred[o] = kidx as u16;
                heap.push(Entry { dist: nd, idx: vj * nx + vi });
            } else if nd == cur {
                // Equal-length alternative: keep the smaller predecessor index.
                let old = offsets[tile.pred[o] as usize];
                let old_idx = (vj as i64 - old[1]) as u64 * nx + (vi as i64 - old[0]) as u64;
                if idx < old_idx {
                    tile.pred[o] = kidx as u16;
                }
            }
        }
    }
    Ok(DistanceMap { source, window, weights, store, complete })
}

/// A lattice polyline with per-edge weights and cumulative lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct PathRecord {
    pub nodes: Vec<LatticePoint>,
    /// Weight of edge `m` (from `nodes[m]` to `nodes[m + 1]`).
    pub steps: Vec<f64>,
    /// Partial sums of `steps`, starting at 0.
    pub cumulative: Vec<f64>,
    pub n: u32,
    pub stencil: u32,
    pub quad: u32,
    pub field_fingerprint: u64,
}

impl PathRecord {
    /// Builds a path from its nodes, looking weights up in `weights`.
    pub fn from_nodes(nodes: Vec<LatticePoint>, weights: &PeriodicWeights, quad: u32) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidSplice("empty path".into()));
        }
        let mut steps = Vec::with_capacity(nodes.len().saturating_sub(1));
        for w in nodes.windows(2) {
            let k = [w[1].i - w[0].i, w[1].j - w[0].j];
            let kidx = weights
                .stencil()
                .index_of(k)
                .ok_or_else(|| Error::InvalidSplice(format!("step {k:?} is not a stencil offset")))?;
            steps.push(weights.weight(w[0], kidx));
        }
        Ok(Self::from_steps(nodes, steps, weights, quad))
    }

    pub(crate) fn from_steps(nodes: Vec<LatticePoint>, steps: Vec<f64>, weights: &PeriodicWeights, quad: u32) -> Self {
        let mut cumulative = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        cumulative.push(acc);
        for s in &steps {
            acc += s;
            cumulative.push(acc);
        }
        PathRecord {
            nodes,
            steps,
            cumulative,
            n: weights.n(),
            stencil: weights.stencil().order(),
            quad,
            field_fingerprint: weights.field_fingerprint(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn first(&self) -> LatticePoint {
        self.nodes[0]
    }

    pub fn last(&self) -> LatticePoint {
        *self.nodes.last().expect("paths are non-empty")
    }

    /// Metric length: the last cumulative value.
    pub fn length(&self) -> f64 {
        *self.cumulative.last().expect("paths are non-empty")
    }

    /// `last − first` in grid units (exact).
    pub fn displacement_lattice(&self) -> [i64; 2] {
        [self.last().i - self.first().i, self.last().j - self.first().j]
    }

    pub fn displacement(&self) -> [f64; 2] {
        let d = self.displacement_lattice();
        [d[0] as f64 / self.n as f64, d[1] as f64 / self.n as f64]
    }

    /// Unit rotation direction `displacement / |displacement|`, if nonzero.
    pub fn rotation_direction(&self) -> Option<[f64; 2]> {
        let d = self.displacement();
        let norm = d[0].hypot(d[1]);
        (norm > 0.0).then(|| [d[0] / norm, d[1] / norm])
    }

    /// Nodes reduced to the torus, each with the unit cell it came from.
    pub fn reduced_trace(&self) -> Vec<((u32, u32), [i64; 2])> {
        self.nodes.iter().map(|p| (p.residue(self.n), p.cell(self.n))).collect()
    }

    /// Same field and grid parameters.
    pub fn compatible(&self, other: &PathRecord) -> bool {
        self.field_fingerprint == other.field_fingerprint
            && self.n == other.n
            && self.stencil == other.stencil
            && self.quad == other.quad
    }

    pub fn reversed(&self, weights: &PeriodicWeights) -> Result<PathRecord> {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        PathRecord::from_nodes(nodes, weights, self.quad)
    }
}

/// Follows predecessors back from `target` to the source.
pub fn extract_path(map: &DistanceMap, target: LatticePoint) -> Result<PathRecord> {
    if !map.is_settled(target) {
        return Err(Error::Unreachable(target.i, target.j));
    }
    let weights = map.weights();
    let mut nodes = vec![target];
    let mut steps = Vec::new();
    let mut cur = target;
    while cur != map.source() {
        let kidx = map.predecessor_offset(cur).ok_or(Error::Unreachable(target.i, target.j))?;
        let k = weights.stencil().offsets()[kidx];
        let prev = LatticePoint::new(cur.i - k[0], cur.j - k[1]);
        steps.push(weights.weight(prev, kidx));
        nodes.push(prev);
        cur = prev;
        if nodes.len() as u64 > map.window().node_count() {
            return Err(Error::Unreachable(target.i, target.j));
        }
    }
    nodes.reverse();
    steps.reverse();
    Ok(PathRecord::from_steps(nodes, steps, weights, weights.quad()))
}

/// Margin, in lattice units, around the bounding box of a point-to-point
/// query: a geodesic cannot leave the ellipse whose focal sum is the
/// straight-line cost, giving excursion `(a_max/a_min)|x − y|/2`; `+1` covers
/// snapping.
pub fn window_margin(a_min: f64, a_max: f64, x: [f64; 2], y: [f64; 2]) -> i64 {
    let dist = (x[0] - y[0]).hypot(x[1] - y[1]);
    (0.5 * (a_max / a_min) * dist + 1.0).ceil() as i64
}

/// Window covering the bounding box of `points` inflated by `margin`.
pub fn window_around(points: &[[f64; 2]], margin: i64, n: u32) -> Result<LatticeWindow> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    LatticeWindow::new(
        [lo[0].floor() as i64 - margin, lo[1].floor() as i64 - margin],
        [hi[0].ceil() as i64 + margin, hi[1].ceil() as i64 + margin],
        n,
    )
}

/// Cached weight table for one field and parameter set; answers repeated
/// distance queries without rebuilding it.
#[derive(Clone)]
pub struct Engine {
    field: ScalarField2,
    params: EngineParams,
    weights: Arc<PeriodicWeights>,
}

impl Engine {
    pub fn new(field: &ScalarField2, params: EngineParams) -> Result<Self> {
        let weights = Arc::new(PeriodicWeights::build(field, &params)?);
        Ok(Engine { field: field.clone(), params, weights })
    }

    pub fn field(&self) -> &ScalarField2 {
        &self.field
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn weights(&self) -> &Arc<PeriodicWeights> {
        &self.weights
    }

    pub fn graph(&self, window: LatticeWindow) -> Result<LatticeGraph> {
        LatticeGraph::new(self.weights.clone(), window, self.params.node_limit)
    }

    pub fn margin(&self, x: [f64; 2], y: [f64; 2]) -> i64 {
        let (lo, hi) = self.weights.speed_bounds();
        window_margin(lo, hi, x, y)
    }

    /// Window for a query between two nodes with the given extra margin.
    pub fn query_window(&self, x: LatticePoint, y: LatticePoint, extra: i64) -> Result<LatticeWindow> {
        let n = self.params.n;
        let (px, py) = (x.position(n), y.position(n));
        window_around(&[px, py], self.margin(px, py) + extra, n)
    }

    /// Graph distance between two nodes in an auto-sized window.
    pub fn node_distance(&self, x: LatticePoint, y: LatticePoint) -> Result<f64> {
        let d = self.node_distance_with_margin(x, y, 0)?;
        if self.params.check_window {
            let wider = self.node_distance_with_margin(x, y, 1)?;
            if wider != d {
                return Err(Error::WindowUnstable(d, wider));
            }
        }
        Ok(d)
    }

    fn node_distance_with_margin(&self, x: LatticePoint, y: LatticePoint, extra: i64) -> Result<f64> {
        let graph = self.graph(self.query_window(x, y, extra)?)?;
        let map = sssp_to(&graph, x, &[y])?;
        if !map.is_settled(y) {
            return Err(Error::Unreachable(y.i, y.j));
        }
        Ok(map.distance(y))
    }

    /// Distance-realizing path between two nodes in an auto-sized window.
    pub fn node_path(&self, x: LatticePoint, y: LatticePoint) -> Result<PathRecord> {
        let graph = self.graph(self.query_window(x, y, 0)?)?;
        let map = sssp_to(&graph, x, &[y])?;
        extract_path(&map, y)
    }

    /// Distances from `source` to several targets with one search in the
    /// union of their windows.
    pub fn node_distances(&self, source: LatticePoint, targets: &[LatticePoint]) -> Result<Vec<f64>> {
        let n = self.params.n;
        let mut window: Option<LatticeWindow> = None;
        for t in targets {
            let w = self.query_window(source, *t, 0)?;
            window = Some(match window {
                None => w,
                Some(u) => LatticeWindow::new(
                    [u.lo[0].min(w.lo[0]), u.lo[1].min(w.lo[1])],
                    [u.hi[0].max(w.hi[0]), u.hi[1].max(w.hi[1])],
                    n,
                )?,
            });
        }
        let window = window.ok_or_else(|| Error::Config("no targets".into()))?;
        let graph = self.graph(window)?;
        let map = sssp_to(&graph, source, targets)?;
        targets
            .iter()
            .map(|t| if map.is_settled(*t) { Ok(map.distance(*t)) } else { Err(Error::Unreachable(t.i, t.j)) })
            .collect()
    }

    /// Distance between two points of the plane (snapped to nodes).
    pub fn distance(&self, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
        let n = self.params.n;
        self.node_distance(LatticePoint::snap(x, n), LatticePoint::snap(y, n))
    }
}

/// Approximate metric distance `d_a(x, y)` on the default-style lattice
/// graph described by `params`.
pub fn distance(field: &ScalarField2, x: [f64; 2], y: [f64; 2], params: &EngineParams) -> Result<f64> {
    Engine::new(field, *params)?.distance(x, y)
}
