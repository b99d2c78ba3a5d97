//! Z²-periodic scalar fields on the 2-torus: speeds `a(y) > 0` and
//! potentials `V(y)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Sampling resolution used to bound the extrema of analytic presets.
pub const EXTREMA_RESOLUTION: usize = 1024;

/// Analytic presets. Each has closed-form reference values somewhere in the
/// test suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", content = "params", rename_all = "lowercase")]
pub enum Preset {
    /// `value` everywhere.
    Constant { value: f64 },
    /// `mean + amplitude * cos(2π y₁)`.
    Layered { mean: f64, amplitude: f64 },
    /// `base + boost` on a horizontal strip around `y₂ ∈ Z` of half-width
    /// `width`, with a cosine ramp of half-width `width / 2` centred on the
    /// strip edge.
    Channel { base: f64, boost: f64, width: f64 },
    /// `base + amp * Σ exp(-|y - m|² / σ²)` over the 3×3 lattice images `m`
    /// nearest to the reduced point; bumps sit on the lattice points.
    Bumps { base: f64, amp: f64, sigma: f64 },
}

impl Preset {
    fn eval(&self, y: [f64; 2]) -> f64 {
        match *self {
            Preset::Constant { value } => value,
            Preset::Layered { mean, amplitude } => mean + amplitude * (2.0 * PI * y[0]).cos(),
            Preset::Channel { base, boost, width } => base + boost * channel_profile(y[1], width),
            Preset::Bumps { base, amp, sigma } => {
                let s2 = sigma * sigma;
                let mut acc = 0.0;
                for mj in -1..=1 {
                    for mi in -1..=1 {
                        let dx = y[0] - mi as f64;
                        let dy = y[1] - mj as f64;
                        acc += (-(dx * dx + dy * dy) / s2).exp();
                    }
                }
                base + amp * acc
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match *self {
            Preset::Constant { value } => finite(&[value]),
            Preset::Layered { mean, amplitude } => finite(&[mean, amplitude]),
            Preset::Channel { base, boost, width } => {
                finite(&[base, boost, width]) && width > 0.0 && width < 0.5
            }
            Preset::Bumps { base, amp, sigma } => finite(&[base, amp, sigma]) && sigma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidField(format!("bad preset parameters {self:?}")))
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Preset::Constant { .. } => "constant",
            Preset::Layered { .. } => "layered",
            Preset::Channel { .. } => "channel",
            Preset::Bumps { .. } => "bumps",
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            Preset::Constant { value } => vec![value],
            Preset::Layered { mean, amplitude } => vec![mean, amplitude],
            Preset::Channel { base, boost, width } => vec![base, boost, width],
            Preset::Bumps { base, amp, sigma } => vec![base, amp, sigma],
        }
    }

    /// Parses the compact `name:p1,p2,...` form used on the command line.
    /// `zero` is shorthand for `constant:0` and `cos:B` for `layered:0,B`.
    pub fn parse(spec: &str) -> Result<Preset> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let nums: Vec<f64> = if rest.trim().is_empty() {
            Vec::new()
        } else {
            rest.split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidField(format!("preset `{spec}`: {e}")))?
        };
        let want = |k: usize| -> Result<()> {
            if nums.len() == k {
                Ok(())
            } else {
                Err(Error::InvalidField(format!("preset `{name}` takes {k} parameters, got {}", nums.len())))
            }
        };
        let p = match name {
            "zero" => {
                want(0)?;
                Preset::Constant { value: 0.0 }
            }
            "constant" => {
                want(1)?;
                Preset::Constant { value: nums[0] }
            }
            "cos" => {
                want(1)?;
                Preset::Layered { mean: 0.0, amplitude: nums[0] }
            }
            "layered" => {
                want(2)?;
                Preset::Layered { mean: nums[0], amplitude: nums[1] }
            }
            "channel" => {
                want(3)?;
                Preset::Channel { base: nums[0], boost: nums[1], width: nums[2] }
            }
            "bumps" => {
                want(3)?;
                Preset::Bumps { base: nums[0], amp: nums[1], sigma: nums[2] }
            }
            other => return Err(Error::InvalidField(format!("unknown preset `{other}`"))),
        };
        p.validate()?;
        Ok(p)
    }
}

fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

fn channel_profile(y2: f64, width: f64) -> f64 {
    let f = frac(y2);
    let d = f.min(1.0 - f);
    let ramp = (0.5 * width).min(0.5 - width);
    let inner = width - ramp;
    let outer = width + ramp;
    if d <= inner {
        1.0
    } else if d >= outer {
        0.0
    } else {
        0.5 * (1.0 + (PI * (d - inner) / (outer - inner)).cos())
    }
}

/// Node values of a periodic grid, `values[j * n + i]` at `(i / n, j / n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridData {
    pub n: usize,
    pub values: Vec<f64>,
}

impl GridData {
    fn bilinear(&self, y: [f64; 2]) -> f64 {
        let n = self.n;
        let u = frac(y[0]) * n as f64;
        let v = frac(y[1]) * n as f64;
        let (uf, vf) = (u.floor(), v.floor());
        let (tx, ty) = (u - uf, v - vf);
        let i0 = (uf as usize) % n;
        let j0 = (vf as usize) % n;
        let i1 = (i0 + 1) % n;
        let j1 = (j0 + 1) % n;
        let at = |i: usize, j: usize| self.values[j * n + i];
        let bottom = at(i0, j0) * (1.0 - tx) + at(i1, j0) * tx;
        let top = at(i0, j1) * (1.0 - tx) + at(i1, j1) * tx;
        bottom * (1.0 - ty) + top * ty
    }
}

#[derive(Clone, Debug)]
pub enum FieldKind {
    Preset(Preset),
    Grid(GridData),
    /// Speed `1/√(2(c − V))` of a potential at energy `c`, evaluated pointwise.
    Mechanical { potential: Arc<ScalarField2>, energy: f64 },
}

/// A continuous Z²-periodic scalar field. Immutable after construction.
#[derive(Clone, Debug)]
pub struct ScalarField2 {
    kind: FieldKind,
    positivity_required: bool,
    min: f64,
    max: f64,
    fingerprint: u64,
}

impl ScalarField2 {
    /// A potential-like field (sign unrestricted).
    pub fn preset(p: Preset) -> Result<Self> {
        Self::from_kind(FieldKind::Preset(p), false)
    }

    /// A speed field; every value must be positive.
    pub fn speed(p: Preset) -> Result<Self> {
        Self::from_kind(FieldKind::Preset(p), true)
    }

    pub fn grid(n: usize, values: Vec<f64>, positivity_required: bool) -> Result<Self> {
        if n == 0 || values.len() != n * n {
            return Err(Error::InvalidField(format!(
                "grid of side {n} needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("grid contains non-finite values".into()));
        }
        Self::from_kind(FieldKind::Grid(GridData { n, values }), positivity_required)
    }

    fn from_kind(kind: FieldKind, positivity_required: bool) -> Result<Self> {
        if let FieldKind::Preset(p) = &kind {
            p.validate()?;
        }
        let (min, max) = compute_extrema(&kind);
        if positivity_required && !(min > 0.0) {
            return Err(Error::NonPositiveSpeed(min));
        }
        let fingerprint = fingerprint_of(&kind);
        Ok(ScalarField2 { kind, positivity_required, min, max, fingerprint })
    }

    /// Value at `y`, reduced mod Z².
    pub fn sample(&self, y: [f64; 2]) -> f64 {
        let r = [frac(y[0]), frac(y[1])];
        match &self.kind {
            FieldKind::Preset(p) => p.eval(r),
            FieldKind::Grid(g) => g.bilinear(r),
            FieldKind::Mechanical { potential, energy } => {
                1.0 / (2.0 * (energy - potential.sample(r))).sqrt()
            }
        }
    }

    /// Cached `(min, max)`. Exact node extrema for grids; extrema over an
    /// [`EXTREMA_RESOLUTION`]² sample grid for presets.
    pub fn extrema(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    pub fn positivity_required(&self) -> bool {
        self.positivity_required
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// JSON description: `{"preset": .., "params": {..}}` or `{"n": .., "values": [..]}`.
    pub fn to_json(&self) -> Value {
        match &self.kind {
            FieldKind::Preset(p) => serde_json::to_value(p).unwrap_or(Value::Null),
            FieldKind::Grid(g) => json!({ "n": g.n, "values": g.values }),
            FieldKind::Mechanical { potential, energy } => {
                json!({ "mechanical": { "potential": potential.to_json(), "energy": energy } })
            }
        }
    }

    /// Parses either a preset document or a grid file document.
    pub fn from_json(v: &Value, positivity_required: bool) -> Result<Self> {
        if v.get("preset").is_some() {
            let p: Preset = serde_json::from_value(v.clone())
                .map_err(|e| Error::InvalidField(format!("preset document: {e}")))?;
            Self::from_kind(FieldKind::Preset(p), positivity_required)
        } else {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct GridDoc {
                n: usize,
                values: Vec<f64>,
            }
            let g: GridDoc = serde_json::from_value(v.clone())
                .map_err(|e| Error::InvalidField(format!("grid document: {e}")))?;
            Self::grid(g.n, g.values, positivity_required)
        }
    }
}

impl fmt::Display for ScalarField2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FieldKind::Preset(p) => {
                let ps: Vec<String> = p.params().iter().map(|x| x.to_string()).collect();
                write!(f, "{}:{}", p.name(), ps.join(","))
            }
            FieldKind::Grid(g) => write!(f, "grid:{}", g.n),
            FieldKind::Mechanical { potential, energy } => write!(f, "mechanical({potential}, c={energy})"),
        }
    }
}

fn compute_extrema(kind: &FieldKind) -> (f64, f64) {
    match kind {
        FieldKind::Grid(g) => g
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        FieldKind::Preset(p) => {
            let n = EXTREMA_RESOLUTION;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for j in 0..n {
                for i in 0..n {
                    let v = p.eval([i as f64 / n as f64, j as f64 / n as f64]);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            (lo, hi)
        }
        FieldKind::Mechanical { potential, energy } => {
            let (vmin, vmax) = potential.extrema();
            (1.0 / (2.0 * (energy - vmin)).sqrt(), 1.0 / (2.0 * (energy - vmax)).sqrt())
        }
    }
}

fn fingerprint_of(kind: &FieldKind) -> u64 {
    let mut h = Sha256::new();
    match kind {
        FieldKind::Preset(p) => {
            h.update(b"preset:");
            h.update(p.name().as_bytes());
            for x in p.params() {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        FieldKind::Grid(g) => {
            h.update(b"grid:");
            h.update((g.n as u64).to_le_bytes());
            for x in &g.values {
                h.update(x.to_bits().to_le_bytes());
            }
        }
        FieldKind::Mechanical { potential, energy } => {
            h.update(b"mechanical:");
            h.update(potential.fingerprint().to_le_bytes());
            h.update(energy.to_bits().to_le_bytes());
        }
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}

/// Speed field `a_c = 1/√(2(c − V))` of the mechanical Hamiltonian
/// `½|p|² + V` at energy `c`.
///
/// Grids are mapped node-wise (and then bilinearly re-interpolated, which is
/// an approximation of the pointwise map between nodes); presets are composed
/// exactly.
pub fn mechanical_to_metric(potential: &ScalarField2, c: f64) -> Result<ScalarField2> {
    let (_, vmax) = potential.extrema();
    if !(c > vmax) {
        return Err(Error::EnergyBelowPotential { c, max_v: vmax });
    }
    match &potential.kind {
        FieldKind::Grid(g) => {
            let values = g.values.iter().map(|v| 1.0 / (2.0 * (c - v)).sqrt()).collect();
            ScalarField2::grid(g.n, values, true)
        }
        _ => ScalarField2::from_kind(
            FieldKind::Mechanical { potential: Arc::new(potential.clone()), energy: c },
            true,
        ),
    }
}
