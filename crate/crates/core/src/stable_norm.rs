//! Stable-norm estimates `‖q‖ ≈ d(0, λq)/λ` for integer directions, with
//! dyadic refinement, gap diagnostics and direction sweeps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{csv_string, Cell};
use crate::lattice::{angle_of, is_canonical, is_primitive, primitive_directions, LatticePoint};
use crate::par;
use crate::shortest_path::Engine;

pub const DEFAULT_SWEEP_LAMBDA: u32 = 8;
pub const DEFAULT_KMAX: u32 = 4;

/// Slack allowed on subadditivity checks.
pub fn eps_quad(s0: f64) -> f64 {
    1e-9 * (1.0 + s0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub q: [i64; 2],
    pub lambda: u32,
    pub value: f64,
    /// `(k, s_k)` with `s_k = d(0, 2^k q)/2^k`; empty unless refined.
    pub fekete_sequence: Vec<(u32, f64)>,
    pub best: f64,
    pub n: u32,
    pub stencil: u32,
    pub quad: u32,
    pub field_fingerprint: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepStrategy {
    /// One multi-target search from the origin.
    #[default]
    SharedSource,
    /// An independent search per direction, mapped in parallel.
    PerDirection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormTable {
    pub q_max: u32,
    pub lambda: u32,
    /// Angle-sorted, closed under negation.
    pub estimates: Vec<NormEstimate>,
}

impl NormTable {
    pub fn get(&self, q: [i64; 2]) -> Option<&NormEstimate> {
        self.estimates.iter().find(|e| e.q == q)
    }

    pub fn field_fingerprint(&self) -> u64 {
        self.estimates.first().map(|e| e.field_fingerprint).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    /// CSV with columns `q1,q2,lambda,value,best,N,S,M`.
    pub fn to_csv(&self) -> Result<String> {
        let rows: Vec<Vec<Cell>> = self
            .estimates
            .iter()
            .map(|e| {
                vec![
                    e.q[0].into(),
                    e.q[1].into(),
                    e.lambda.into(),
                    e.value.into(),
                    e.best.into(),
                    e.n.into(),
                    e.stencil.into(),
                    e.quad.into(),
                ]
            })
            .collect();
        csv_string(&["q1", "q2", "lambda", "value", "best", "N", "S", "M"], &rows)
    }
}

fn check_direction(q: [i64; 2]) -> Result<()> {
    if q == [0, 0] {
        return Err(Error::ZeroDirection);
    }
    if !is_primitive(q) {
        return Err(Error::NonPrimitiveDirection(q[0], q[1]));
    }
    Ok(())
}

fn lift(engine: &Engine, q: [i64; 2], lambda: u64) -> LatticePoint {
    let n = engine.params().n as i64;
    let s = lambda as i64 * n;
    LatticePoint::new(q[0] * s, q[1] * s)
}

fn estimate(engine: &Engine, q: [i64; 2], lambda: u32, value: f64) -> NormEstimate {
    let p = engine.params();
    NormEstimate {
        q,
        lambda,
        value,
        fekete_sequence: Vec::new(),
        best: value,
        n: p.n,
        stencil: p.stencil,
        quad: p.quad,
        field_fingerprint: engine.field().fingerprint(),
    }
}

/// `d(0, λq)/λ` on an auto-sized window.
pub fn norm_estimate(engine: &Engine, q: [i64; 2], lambda: u32) -> Result<NormEstimate> {
    check_direction(q)?;
    if lambda == 0 {
        return Err(Error::Config("lambda must be at least 1".into()));
    }
    let d = engine.node_distance(LatticePoint::new(0, 0), lift(engine, q, lambda as u64))?;
    Ok(estimate(engine, q, lambda, d / lambda as f64))
}

/// Dyadic sequence `s_k = d(0, 2^k q)/2^k`, `k = 0..=kmax`, checked to be
/// non-increasing up to [`eps_quad`].
pub fn fekete_refine(engine: &Engine, q: [i64; 2], kmax: u32) -> Result<NormEstimate> {
    check_direction(q)?;
    if kmax > 20 {
        return Err(Error::Config(format!("kmax = {kmax} is too large")));
    }
    let origin = LatticePoint::new(0, 0);
    let mut seq = Vec::with_capacity(kmax as usize + 1);
    for k in 0..=kmax {
        let m = 1u64 << k;
        let s = engine.node_distance(origin, lift(engine, q, m))? / m as f64;
        if let Some(&(_, prev)) = seq.last() {
            let s0 = seq[0].1;
            if s > prev + eps_quad(s0) {
                return Err(Error::SubadditivityViolated { k: k - 1, prev, next: s });
            }
        }
        seq.push((k, s));
    }
    let best = seq.iter().map(|&(_, s)| s).fold(f64::INFINITY, f64::min);
    let last = seq.last().expect("kmax + 1 entries").1;
    let mut e = estimate(engine, q, 1 << kmax, last);
    e.fekete_sequence = seq;
    e.best = best;
    Ok(e)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuragoReport {
    pub q: [i64; 2],
    pub best: f64,
    /// `(n, d(0, nq) − n·best)`.
    pub gaps: Vec<(u32, f64)>,
    pub max_gap: f64,
    /// Least-squares slope of gap against n over the top half of `n_list`.
    pub slope: f64,
}

/// Additive gaps `d(0, nq) − n·best` against the refined norm value.
pub fn burago_gap(engine: &Engine, q: [i64; 2], n_list: &[u32], kmax: u32) -> Result<BuragoReport> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] == 0 {
        return Err(Error::Config("n_list must be non-empty, positive and strictly ascending".into()));
    }
    let best = fekete_refine(engine, q, kmax)?.best;
    let origin = LatticePoint::new(0, 0);
    let targets: Vec<LatticePoint> = n_list.iter().map(|&n| lift(engine, q, n as u64)).collect();
    let dists = engine.node_distances(origin, &targets)?;
    let gaps: Vec<(u32, f64)> = n_list.iter().zip(&dists).map(|(&n, d)| (n, d - n as f64 * best)).collect();
    let max_gap = gaps.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max);
    let top = &gaps[gaps.len() / 2..];
    Ok(BuragoReport { q, best, max_gap, slope: slope(top), gaps })
}

fn slope(points: &[(u32, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0 as f64).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 as f64 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
    sxy / sxx
}

/// Canonical half-plane primitive directions with Chebyshev norm ≤ `q_max`.
pub fn sweep_directions(q_max: u32) -> Vec<[i64; 2]> {
    primitive_directions(q_max).into_iter().filter(|q| is_canonical(*q)).collect()
}

/// Multiplier used for direction `q` so that `λ_q·q` has Chebyshev norm
/// about `lambda` for every direction of the sweep.
pub fn sweep_lambda(q: [i64; 2], lambda: u32) -> u32 {
    let cheb = q[0].abs().max(q[1].abs()) as u32;
    lambda.div_ceil(cheb).max(1)
}

/// Norm estimates for every primitive direction with Chebyshev norm ≤
/// `q_max`; the half-plane is computed and negations copied.
pub fn direction_sweep(engine: &Engine, q_max: u32, lambda: u32, strategy: SweepStrategy) -> Result<NormTable> {
    if q_max == 0 || lambda == 0 {
        return Err(Error::Config("Q and lambda must be at least 1".into()));
    }
    let dirs = sweep_directions(q_max);
    let lambdas: Vec<u32> = dirs.iter().map(|q| sweep_lambda(*q, lambda)).collect();
    let values: Vec<f64> = match strategy {
        SweepStrategy::SharedSource => {
            let targets: Vec<LatticePoint> =
                dirs.iter().zip(&lambdas).map(|(q, &l)| lift(engine, *q, l as u64)).collect();
            let d = engine.node_distances(LatticePoint::new(0, 0), &targets)?;
            d.iter().zip(&lambdas).map(|(d, &l)| d / l as f64).collect()
        }
        SweepStrategy::PerDirection => {
            let jobs: Vec<([i64; 2], u32)> = dirs.iter().copied().zip(lambdas.iter().copied()).collect();
            par::map(engine.params().exec, &jobs, |&(q, l)| {
                engine.node_distance(LatticePoint::new(0, 0), lift(engine, q, l as u64)).map(|d| d / l as f64)
            })
            .into_iter()
            .collect::<Result<_>>()?
        }
    };
    let mut estimates = Vec::with_capacity(2 * dirs.len());
    for ((q, l), v) in dirs.iter().zip(&lambdas).zip(&values) {
        estimates.push(estimate(engine, *q, *l, *v));
        estimates.push(estimate(engine, [-q[0], -q[1]], *l, *v));
    }
    estimates.sort_by(|a, b| angle_of(a.q).total_cmp(&angle_of(b.q)));
    Ok(NormTable { q_max, lambda, estimates })
}

/// Table with prescribed values, for synthetic fronts.
pub fn synthetic_table(entries: &[([i64; 2], f64)]) -> NormTable {
    let mut estimates: Vec<NormEstimate> = entries
        .iter()
        .map(|&(q, value)| NormEstimate {
            q,
            lambda: 1,
            value,
            fekete_sequence: Vec::new(),
            best: value,
            n: 0,
            stencil: 0,
            quad: 0,
            field_fingerprint: 0,
        })
        .collect();
    estimates.sort_by(|a, b| angle_of(a.q).total_cmp(&angle_of(b.q)));
    let q_max = entries.iter().map(|(q, _)| q[0].abs().max(q[1].abs()) as u32).max().unwrap_or(0);
    NormTable { q_max, lambda: 1, estimates }
}
