//! Effective Hamiltonian H̄ evaluated three ways: as the support function of
//! a computed front, as an upper bound from the inf-max variational formula,
//! and for mechanical systems by bisection on the energy level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{mechanical_to_metric, ScalarField2};
use crate::front::{build_front, FrontModel, DEFAULT_ANGLE_TOL_DEG};
use crate::lattice::EngineParams;
use crate::par::{self, Exec};
use crate::shortest_path::Engine;
use crate::stable_norm::{direction_sweep, SweepStrategy};

/// `max_{x ∈ D} p·x` over the hull vertices.
pub fn hbar_dual(front: &FrontModel, p: [f64; 2]) -> f64 {
    front.d_support(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfmaxConfig {
    pub nv: usize,
    pub iters: usize,
    /// Initial step; `None` means `0.01·|p|`.
    pub c0: Option<f64>,
    /// Softmax temperature relative to the current max.
    pub tau: f64,
    /// Divergence is reported after this many consecutive increases that end
    /// above the starting value.
    pub divergence_window: usize,
    pub exec: Exec,
}

impl Default for InfmaxConfig {
    fn default() -> Self {
        InfmaxConfig { nv: 64, iters: 500, c0: None, tau: 0.1, divergence_window: 50, exec: Exec::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfmaxResult {
    /// Best value seen; an upper bound on the discrete inf-max.
    pub value: f64,
    /// Value at `φ = 0`, i.e. `max a · |p|`.
    pub initial: f64,
    /// Objective per iterate, starting with `initial`.
    pub trace: Vec<f64>,
    pub nv: usize,
    /// Best iterate, `phi[j * nv + i]` at node `(i/nv, j/nv)`.
    pub phi: Vec<f64>,
}

struct NodeEval {
    f: f64,
    g: [f64; 2],
    norm: f64,
}

fn evaluate(a: &[f64], phi: &[f64], p: [f64; 2], nv: usize, exec: Exec) -> Vec<NodeEval> {
    let inv2h = nv as f64 / 2.0;
    let rows: Vec<usize> = (0..nv).collect();
    par::map(exec, &rows, |&j| {
        let jp = (j + 1) % nv;
        let jm = (j + nv - 1) % nv;
        (0..nv)
            .map(|i| {
                let ip = (i + 1) % nv;
                let im = (i + nv - 1) % nv;
                let g = [
                    p[0] + (phi[j * nv + ip] - phi[j * nv + im]) * inv2h,
                    p[1] + (phi[jp * nv + i] - phi[jm * nv + i]) * inv2h,
                ];
                let norm = g[0].hypot(g[1]);
                NodeEval { f: a[j * nv + i] * norm, g, norm }
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

struct DivergenceGuard {
    initial: f64,
    last: f64,
    rising: usize,
    window: usize,
}

impl DivergenceGuard {
    fn new(initial: f64, window: usize) -> Self {
        DivergenceGuard { initial, last: initial, rising: 0, window }
    }

    /// Records the next value; true after `window` consecutive increases
    /// that end above the starting value.
    fn diverged(&mut self, value: f64) -> bool {
        self.rising = if value > self.last { self.rising + 1 } else { 0 };
        self.last = value;
        self.rising >= self.window && value > self.initial
    }
}

/// Subgradient descent on `F(φ) = max_y a(y)|p + D_h φ(y)|` over periodic
/// grid functions, with centered differences. The descent direction averages
/// node gradients with softmax weights `exp((f − max f)/(τ·max f))`; steps are
/// `c₀/√t` in the max-norm.
pub fn infmax_upper(field: &ScalarField2, p: [f64; 2], cfg: &InfmaxConfig) -> Result<InfmaxResult> {
    let pn = p[0].hypot(p[1]);
    if pn == 0.0 {
        return Err(Error::ZeroDirection);
    }
    if cfg.nv < 3 {
        return Err(Error::Config("inf-max grid needs at least 3 nodes per side".into()));
    }
    let nv = cfg.nv;
    let mut a = Vec::with_capacity(nv * nv);
    for j in 0..nv {
        for i in 0..nv {
            let v = field.sample([i as f64 / nv as f64, j as f64 / nv as f64]);
            if !(v > 0.0) {
                return Err(Error::NonPositiveSpeed(v));
            }
            a.push(v);
        }
    }
    let c0 = cfg.c0.unwrap_or(0.01 * pn);
    let inv2h = nv as f64 / 2.0;
    let mut phi = vec![0.0; nv * nv];
    let mut best_phi = phi.clone();
    let mut trace = Vec::with_capacity(cfg.iters + 1);
    let mut evals = evaluate(&a, &phi, p, nv, cfg.exec);
    let max_of = |e: &[NodeEval]| e.iter().map(|n| n.f).fold(f64::NEG_INFINITY, f64::max);
    let initial = max_of(&evals);
    let mut best = initial;
    let mut current = initial;
    trace.push(initial);
    let mut guard = DivergenceGuard::new(initial, cfg.divergence_window);
    let mut grad = vec![0.0; nv * nv];
    for t in 1..=cfg.iters {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut wsum = 0.0;
        for (idx, e) in evals.iter().enumerate() {
            let w = ((e.f - current) / (cfg.tau * current)).exp();
            if w < 1e-300 || e.norm == 0.0 {
                continue;
            }
            wsum += w;
            let (i, j) = (idx % nv, idx / nv);
            let coef = w * a[idx] * inv2h / e.norm;
            grad[j * nv + (i + 1) % nv] += coef * e.g[0];
            grad[j * nv + (i + nv - 1) % nv] -= coef * e.g[0];
            grad[((j + 1) % nv) * nv + i] += coef * e.g[1];
            grad[((j + nv - 1) % nv) * nv + i] -= coef * e.g[1];
        }
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if wsum == 0.0 || gmax == 0.0 {
            break;
        }
        let step = c0 / (t as f64).sqrt() / gmax;
        for (f, g) in phi.iter_mut().zip(&grad) {
            *f -= step * g;
        }
        evals = evaluate(&a, &phi, p, nv, cfg.exec);
        let value = max_of(&evals);
        trace.push(value);
        if guard.diverged(value) {
            return Err(Error::Divergence(t));
        }
        current = value;
        if value < best {
            best = value;
            best_phi.copy_from_slice(&phi);
        }
    }
    Ok(InfmaxResult { value: best, initial, trace, nv, phi: best_phi })
}

/// Rig for the inner front sweeps of the mechanical bisection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanicalConfig {
    pub params: EngineParams,
    pub q_m: u32,
    pub lambda: u32,
    pub strategy: SweepStrategy,
    /// Tolerance on `|g(c) − 1|`.
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for MechanicalConfig {
    fn default() -> Self {
        MechanicalConfig {
            params: EngineParams::default().with_n(32),
            q_m: 4,
            lambda: 4,
            strategy: SweepStrategy::SharedSource,
            tol: 5e-3,
            max_steps: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanicalResult {
    pub value: f64,
    /// `g(value)`, or `g` at the lowest evaluated level when `flat`.
    pub g: f64,
    /// Estimated uncertainty of `value`.
    pub value_tol: f64,
    /// `H̄(p) = max V`: `g ≤ 1` already just above `max V`.
    pub flat: bool,
    /// Every `(c, g(c))` evaluated, in evaluation order.
    pub trace: Vec<(f64, f64)>,
    /// `(c_lo, c_hi)` after each bisection step.
    pub brackets: Vec<(f64, f64)>,
}

/// Front of the metric `a_c = 1/√(2(c − V))`.
pub fn level_set(v: &ScalarField2, c: f64, q: u32, cfg: &MechanicalConfig) -> Result<FrontModel> {
    let a = mechanical_to_metric(v, c)?;
    let engine = Engine::new(&a, cfg.params)?;
    let table = direction_sweep(&engine, q, cfg.lambda, cfg.strategy)?;
    build_front(&table, DEFAULT_ANGLE_TOL_DEG)
}

/// `g(c) = H̄_{a_c}(p)`; the energy level of `p` solves `g(c) = 1`.
pub fn g_of_c(v: &ScalarField2, p: [f64; 2], c: f64, q: u32, cfg: &MechanicalConfig) -> Result<f64> {
    Ok(hbar_dual(&level_set(v, c, q, cfg)?, p))
}

fn check_monotone(trace: &[(f64, f64)]) -> Result<()> {
    let mut sorted = trace.to_vec();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    for w in sorted.windows(2) {
        if w[1].0 > w[0].0 && w[1].1 >= w[0].1 + 1e-9 {
            return Err(Error::MonotonicityViolated { c0: w[0].0, g0: w[0].1, c1: w[1].0, g1: w[1].1 });
        }
    }
    Ok(())
}

/// Energy level `c` with `p ∈ F_c`, i.e. `H̄(p)` of the mechanical
/// Hamiltonian `½|p|² + V`.
pub fn hbar_mechanical(v: &ScalarField2, p: [f64; 2], cfg: &MechanicalConfig) -> Result<MechanicalResult> {
    let pn = p[0].hypot(p[1]);
    if pn == 0.0 {
        return Err(Error::ZeroDirection);
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let (vmin, vmax) = v.extrema();
    let delta0 = 1e-6 * (1.0 + vmax.abs());
    let delta_eval = delta0.max(1e-2 * (vmax - vmin));
    let mut trace: Vec<(f64, f64)> = Vec::new();
    let mut brackets = Vec::new();
    let eval = |c: f64, trace: &mut Vec<(f64, f64)>| -> Result<f64> {
        let g = g_of_c(v, p, c, cfg.q_m, cfg)?;
        trace.push((c, g));
        check_monotone(trace)?;
        Ok(g)
    };
    let done = |value: f64, g: f64, value_tol: f64, flat: bool, trace, brackets| {
        Ok(MechanicalResult { value, g, value_tol, flat, trace, brackets })
    };

    let c_floor = vmax + delta_eval;
    let g_floor = eval(c_floor, &mut trace)?;
    if (g_floor - 1.0).abs() <= cfg.tol {
        return done(c_floor, g_floor, delta_eval, false, trace, brackets);
    }
    if g_floor < 1.0 {
        return done(vmax, g_floor, delta_eval, true, trace, brackets);
    }

    let mut excess = (0.5 * pn * pn).max(delta_eval);
    let (mut hi, mut g_hi) = loop {
        let c = vmax + excess;
        let g = eval(c, &mut trace)?;
        if (g - 1.0).abs() <= cfg.tol {
            let tol_c = 2.0 * cfg.tol * (c - vmin);
            return done(c, g, tol_c, false, trace, brackets);
        }
        if g < 1.0 {
            break (c, g);
        }
        excess *= 2.0;
        if trace.len() > 64 {
            return Err(Error::EnergyBracketFailure(format!("g({c}) = {g} still above 1")));
        }
    };
    let (mut lo, mut g_lo) = (c_floor, g_floor);
    brackets.push((lo, hi));
    for _ in 0..cfg.max_steps {
        let mid = 0.5 * (lo + hi);
        if !(hi - lo > 1e-12 * (1.0 + hi.abs())) || mid <= lo || mid >= hi {
            return Err(Error::TolInfeasible { width: hi - lo, tol: cfg.tol });
        }
        let g = eval(mid, &mut trace)?;
        if (g - 1.0).abs() <= cfg.tol {
            let slope = ((g_hi - g_lo) / (hi - lo)).abs();
            let tol_c = if slope > 0.0 { cfg.tol / slope } else { 2.0 * cfg.tol * (mid - vmin) };
            return done(mid, g, tol_c, false, trace, brackets);
        }
        if g > 1.0 {
            lo = mid;
            g_lo = g;
        } else {
            hi = mid;
            g_hi = g;
        }
        brackets.push((lo, hi));
    }
    Err(Error::TolInfeasible { width: hi - lo, tol: cfg.tol })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub p0: [f64; 2],
    pub p1: [f64; 2],
    pub h0: f64,
    pub h1: f64,
    /// `(λ, λH̄(p1) + (1−λ)H̄(p0) − H̄(p_λ))`.
    pub gaps: Vec<(f64, f64)>,
    pub min_gap: f64,
    /// Largest value uncertainty among all evaluations.
    pub tol: f64,
    /// Endpoint levels differ by more than 4·tol, so strictness is checked.
    pub asserted: bool,
    /// `!asserted`, or every gap exceeds 2·tol.
    pub passed: bool,
}

/// Chord-minus-value gaps of H̄ along the segment from `p0` to `p1`.
pub fn convexity_probe(
    v: &ScalarField2,
    p0: [f64; 2],
    p1: [f64; 2],
    midpoints: usize,
    cfg: &MechanicalConfig,
) -> Result<ConvexityReport> {
    if midpoints == 0 {
        return Err(Error::Config("need at least one midpoint".into()));
    }
    let r0 = hbar_mechanical(v, p0, cfg)?;
    let r1 = hbar_mechanical(v, p1, cfg)?;
    let combined = r0.value_tol + r1.value_tol;
    if p0 == p1 || (r1.value - r0.value).abs() <= combined {
        return Err(Error::IndistinguishableLevels(r0.value, r1.value, combined));
    }
    let mut tol = r0.value_tol.max(r1.value_tol);
    let mut gaps = Vec::with_capacity(midpoints);
    for k in 1..=midpoints {
        let l = k as f64 / (midpoints + 1) as f64;
        let pl = [l * p1[0] + (1.0 - l) * p0[0], l * p1[1] + (1.0 - l) * p0[1]];
        let r = hbar_mechanical(v, pl, cfg)?;
        tol = tol.max(r.value_tol);
        gaps.push((l, l * r1.value + (1.0 - l) * r0.value - r.value));
    }
    let min_gap = gaps.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    let asserted = (r1.value - r0.value).abs() > 4.0 * tol;
    Ok(ConvexityReport {
        p0,
        p1,
        h0: r0.value,
        h1: r1.value,
        gaps,
        min_gap,
        tol,
        asserted,
        passed: !asserted || min_gap > 2.0 * tol,
    })
}
