//! Effective fronts: the hull `D` of the normalized points `q/‖q‖`, its polar
//! dual `S`, corner detection with integer directions, and facet reports
//! across sweep resolutions.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io::Svg;
use crate::lattice::gcd;
use crate::stable_norm::NormTable;

pub const DEFAULT_ANGLE_TOL_DEG: f64 = 10.0;
/// Minimum shrink factor per doubling of Q for a corner to count as a
/// sampling artifact.
pub const DEFAULT_ARTIFACT_RATIO: f64 = 1.8;
/// Maximum relative spread of a persistent corner's angle across Q.
pub const DEFAULT_PERSISTENCE_SPREAD: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullVertex {
    pub point: [f64; 2],
    pub q: [i64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub vertex: [f64; 2],
    pub q: [i64; 2],
    pub angle_deg: f64,
    pub denominator: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub endpoints: [[f64; 2]; 2],
    pub normal: [i64; 2],
    pub denominator: i64,
}

impl Facet {
    /// Exact edge direction, perpendicular to the normal.
    pub fn direction(&self) -> [i64; 2] {
        [-self.normal[1], self.normal[0]]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontModel {
    pub d_points: Vec<HullVertex>,
    /// Counterclockwise convex polygon.
    pub d_hull: Vec<HullVertex>,
    /// Vertex `i` is dual to hull edge `(i, i + 1)`.
    pub s_polygon: Vec<[f64; 2]>,
    pub corners: Vec<Corner>,
    /// Facet `i` is dual to hull vertex `i`.
    pub facets: Vec<Facet>,
    pub q_max: u32,
    pub angle_tol_deg: f64,
    pub field_fingerprint: u64,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull by monotone chain; collinear and near-collinear points
/// (within `1e-12·scale²`) are dropped. Counterclockwise, starting from the
/// lexicographically smallest point.
pub fn hull(points: &[HullVertex]) -> Result<Vec<HullVertex>> {
    let mut pts: Vec<HullVertex> = points.to_vec();
    pts.sort_by(|a, b| a.point[0].total_cmp(&b.point[0]).then(a.point[1].total_cmp(&b.point[1])));
    pts.dedup_by(|a, b| a.point == b.point);
    let scale = pts.iter().map(|p| p.point[0].abs().max(p.point[1].abs())).fold(0.0, f64::max);
    let tol = 1e-12 * scale * scale;
    if pts.len() < 3 {
        return Err(Error::DegenerateTable(format!("{} distinct points", pts.len())));
    }
    let mut lower: Vec<HullVertex> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2].point, lower[lower.len() - 1].point, p.point) <= tol {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<HullVertex> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2].point, upper[upper.len() - 1].point, p.point) <= tol {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(Error::DegenerateTable("all points are collinear".into()));
    }
    Ok(lower)
}

/// Exterior turning angle at each vertex of a counterclockwise polygon.
pub fn turning_angles(poly: &[[f64; 2]]) -> Vec<f64> {
    let m = poly.len();
    (0..m)
        .map(|i| {
            let a = poly[(i + m - 1) % m];
            let b = poly[i];
            let c = poly[(i + 1) % m];
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - b[0], c[1] - b[1]];
            let cr = u[0] * v[1] - u[1] * v[0];
            let dot = u[0] * v[0] + u[1] * v[1];
            cr.atan2(dot).to_degrees()
        })
        .collect()
}

/// Polar dual `{p : p·x ≤ 1}` of a counterclockwise polygon; vertex `i`
/// solves `p·x_i = p·x_{i+1} = 1`.
pub fn polar_dual(poly: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    let m = poly.len();
    if m < 3 {
        return Err(Error::OriginNotInterior);
    }
    let scale = poly.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let a = poly[i];
        let b = poly[(i + 1) % m];
        let det = a[0] * b[1] - a[1] * b[0];
        // Twice the area of the triangle (0, a, b); must be positive when the
        // origin is strictly inside.
        if !(det > 1e-12 * scale * scale) {
            return Err(Error::OriginNotInterior);
        }
        out.push([(b[1] - a[1]) / det, (a[0] - b[0]) / det]);
    }
    Ok(out)
}

/// Hull vertices whose turning angle is at least `angle_tol_deg`.
pub fn detect_corners(hull: &[HullVertex], angle_tol_deg: f64) -> Vec<Corner> {
    let pts: Vec<[f64; 2]> = hull.iter().map(|v| v.point).collect();
    turning_angles(&pts)
        .into_iter()
        .zip(hull)
        .filter(|(angle, _)| *angle >= angle_tol_deg)
        .map(|(angle_deg, v)| Corner { vertex: v.point, q: v.q, angle_deg, denominator: denominator(v.q) })
        .collect()
}

pub fn denominator(q: [i64; 2]) -> i64 {
    q[0].abs().max(q[1].abs())
}

/// Front of a norm table: `P_q = q/‖q‖`, hull, dual, corners and facets.
pub fn build_front(table: &NormTable, angle_tol_deg: f64) -> Result<FrontModel> {
    if table.len() < 4 {
        return Err(Error::DegenerateTable(format!("{} directions, need at least 4", table.len())));
    }
    let mut d_points = Vec::with_capacity(table.len());
    for e in &table.estimates {
        if !(e.value > 0.0 && e.value.is_finite()) {
            return Err(Error::DegenerateTable(format!("value {} for {:?}", e.value, e.q)));
        }
        d_points.push(HullVertex { point: [e.q[0] as f64 / e.value, e.q[1] as f64 / e.value], q: e.q });
    }
    let d_hull = hull(&d_points)?;
    let pts: Vec<[f64; 2]> = d_hull.iter().map(|v| v.point).collect();
    let s_polygon = polar_dual(&pts)?;
    let corners = detect_corners(&d_hull, angle_tol_deg);
    let m = d_hull.len();
    let facets = d_hull
        .iter()
        .enumerate()
        .map(|(i, v)| {
            assert_eq!(gcd(v.q[0], v.q[1]), 1, "facet normals are primitive integer vectors");
            Facet { endpoints: [s_polygon[(i + m - 1) % m], s_polygon[i]], normal: v.q, denominator: denominator(v.q) }
        })
        .collect();
    Ok(FrontModel {
        d_points,
        d_hull,
        s_polygon,
        corners,
        facets,
        q_max: table.q_max,
        angle_tol_deg,
        field_fingerprint: table.field_fingerprint(),
    })
}

fn pair(v: &Value) -> Option<[f64; 2]> {
    let a = v.as_array()?;
    Some([a.first()?.as_f64()?, a.get(1)?.as_f64()?])
}

fn ipair(v: &Value) -> Option<[i64; 2]> {
    let a = v.as_array()?;
    Some([a.first()?.as_i64()?, a.get(1)?.as_i64()?])
}

impl FrontModel {
    pub fn hull_points(&self) -> Vec<[f64; 2]> {
        self.d_hull.iter().map(|v| v.point).collect()
    }

    pub fn max_turning_angle(&self) -> f64 {
        turning_angles(&self.hull_points()).into_iter().fold(0.0, f64::max)
    }

    /// Turning angle at the hull vertex generated by `q`; 0 if `P_q` is not
    /// a hull vertex.
    pub fn angle_at(&self, q: [i64; 2]) -> f64 {
        let angles = turning_angles(&self.hull_points());
        self.d_hull.iter().zip(angles).find(|(v, _)| v.q == q).map(|(_, a)| a).unwrap_or(0.0)
    }

    /// `max_{x ∈ S} x·dir`.
    pub fn s_support(&self, dir: [f64; 2]) -> f64 {
        self.s_polygon.iter().map(|p| p[0] * dir[0] + p[1] * dir[1]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_{x ∈ D} x·dir`.
    pub fn d_support(&self, dir: [f64; 2]) -> f64 {
        self.d_hull.iter().map(|v| v.point[0] * dir[0] + v.point[1] * dir[1]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "d_points": self.d_points.iter().map(|v| json!({"q": v.q, "point": v.point})).collect::<Vec<_>>(),
            "d_hull": self.d_hull.iter().map(|v| v.point).collect::<Vec<_>>(),
            "d_hull_q": self.d_hull.iter().map(|v| v.q).collect::<Vec<_>>(),
            "s_polygon": self.s_polygon,
            "corners": self.corners.iter().map(|c| json!({
                "q": c.q, "angle_deg": c.angle_deg, "vertex": c.vertex, "denominator": c.denominator,
            })).collect::<Vec<_>>(),
            "facets": self.facets.iter().map(|f| json!({
                "normal": f.normal, "endpoints": f.endpoints, "denominator": f.denominator,
                "direction": f.direction(),
            })).collect::<Vec<_>>(),
            "q_max": self.q_max,
            "angle_tol_deg": self.angle_tol_deg,
            "field_fingerprint": format!("{:016x}", self.field_fingerprint),
        })
    }

    pub fn from_json(v: &Value) -> Result<FrontModel> {
        let bad = |what: &str| Error::Config(format!("front JSON: bad or missing {what}"));
        let arr = |key: &str| v.get(key).and_then(Value::as_array).ok_or_else(|| bad(key));
        let d_points = arr("d_points")?
            .iter()
            .map(|e| {
                Some(HullVertex { q: ipair(e.get("q")?)?, point: pair(e.get("point")?)? })
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad("d_points"))?;
        let hull_pts = arr("d_hull")?.iter().map(pair).collect::<Option<Vec<_>>>().ok_or_else(|| bad("d_hull"))?;
        let hull_q = arr("d_hull_q")?.iter().map(ipair).collect::<Option<Vec<_>>>().ok_or_else(|| bad("d_hull_q"))?;
        if hull_pts.len() != hull_q.len() {
            return Err(bad("d_hull_q length"));
        }
        let d_hull = hull_pts.into_iter().zip(hull_q).map(|(point, q)| HullVertex { point, q }).collect();
        let s_polygon =
            arr("s_polygon")?.iter().map(pair).collect::<Option<Vec<_>>>().ok_or_else(|| bad("s_polygon"))?;
        let corners = arr("corners")?
            .iter()
            .map(|c| {
                Some(Corner {
                    q: ipair(c.get("q")?)?,
                    angle_deg: c.get("angle_deg")?.as_f64()?,
                    vertex: pair(c.get("vertex")?)?,
                    denominator: c.get("denominator")?.as_i64()?,
                })
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad("corners"))?;
        let facets = arr("facets")?
            .iter()
            .map(|f| {
                let e = f.get("endpoints")?.as_array()?;
                Some(Facet {
                    normal: ipair(f.get("normal")?)?,
                    endpoints: [pair(e.first()?)?, pair(e.get(1)?)?],
                    denominator: f.get("denominator")?.as_i64()?,
                })
            })
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| bad("facets"))?;
        let q_max = v.get("q_max").and_then(Value::as_u64).ok_or_else(|| bad("q_max"))? as u32;
        let angle_tol_deg = v.get("angle_tol_deg").and_then(Value::as_f64).ok_or_else(|| bad("angle_tol_deg"))?;
        let field_fingerprint = v
            .get("field_fingerprint")
            .and_then(Value::as_str)
            .and_then(|s| u64::from_str_radix(s, 16).ok())
            .ok_or_else(|| bad("field_fingerprint"))?;
        Ok(FrontModel { d_points, d_hull, s_polygon, corners, facets, q_max, angle_tol_deg, field_fingerprint })
    }

    /// Both polygons on a fixed viewport, corners marked.
    pub fn to_svg(&self) -> String {
        let radius = self
            .d_hull
            .iter()
            .map(|v| v.point)
            .chain(self.s_polygon.iter().copied())
            .map(|p| p[0].abs().max(p[1].abs()))
            .fold(0.0, f64::max)
            * 1.1;
        let mut svg = Svg::new(600.0, [0.0, 0.0], radius);
        svg.polyline(&[[-radius, 0.0], [radius, 0.0]], "#cccccc", 1.0);
        svg.polyline(&[[0.0, -radius], [0.0, radius]], "#cccccc", 1.0);
        svg.polygon(&self.hull_points(), "#1f4e9c", "none", 2.0);
        svg.polygon(&self.s_polygon, "#b8471b", "none", 2.0);
        for c in &self.corners {
            svg.circle(c.vertex, 5.0, "#d62728");
        }
        svg.text([-radius * 0.95, radius * 0.9], &format!("D (blue), S (orange), Q = {}", self.q_max));
        svg.finish()
    }
}

/// Classification of a corner direction across a sweep history.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CornerClass {
    Persistent,
    Artifact,
    Unclassified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerTrack {
    pub q: [i64; 2],
    pub denominator: i64,
    /// `(Q, turning angle)`; 0 where `P_q` is not a hull vertex.
    pub angles: Vec<(u32, f64)>,
    pub class: CornerClass,
    /// Exact direction of the dual facet, perpendicular to `q`.
    pub facet_direction: [i64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacetReport {
    pub q_values: Vec<u32>,
    pub corners: Vec<CornerTrack>,
}

#[derive(Clone, Copy, Debug)]
pub struct FacetCriteria {
    pub angle_tol_deg: f64,
    pub artifact_ratio: f64,
    pub persistence_spread: f64,
}

impl Default for FacetCriteria {
    fn default() -> Self {
        FacetCriteria {
            angle_tol_deg: DEFAULT_ANGLE_TOL_DEG,
            artifact_ratio: DEFAULT_ARTIFACT_RATIO,
            persistence_spread: DEFAULT_PERSISTENCE_SPREAD,
        }
    }
}

/// Tracks every corner direction seen in `history` (ordered by increasing
/// Q) and classifies it.
pub fn facet_report(history: &[FrontModel], criteria: &FacetCriteria) -> Result<FacetReport> {
    if history.len() < 2 {
        return Err(Error::HistoryMismatch("need at least two fronts".into()));
    }
    let fp = history[0].field_fingerprint;
    if history.iter().any(|f| f.field_fingerprint != fp) {
        return Err(Error::HistoryMismatch("fronts come from different fields".into()));
    }
    if history.windows(2).any(|w| w[0].q_max >= w[1].q_max) {
        return Err(Error::HistoryMismatch("Q must be strictly increasing".into()));
    }
    let mut dirs: Vec<[i64; 2]> = Vec::new();
    for f in history {
        for c in detect_corners(&f.d_hull, criteria.angle_tol_deg) {
            if !dirs.contains(&c.q) {
                dirs.push(c.q);
            }
        }
    }
    dirs.sort_by(|a, b| crate::lattice::angle_of(*a).total_cmp(&crate::lattice::angle_of(*b)));
    let corners = dirs
        .into_iter()
        .map(|q| {
            let angles: Vec<(u32, f64)> = history.iter().map(|f| (f.q_max, f.angle_at(q))).collect();
            CornerTrack {
                q,
                denominator: denominator(q),
                class: classify(&angles, criteria),
                facet_direction: [-q[1], q[0]],
                angles,
            }
        })
        .collect();
    Ok(FacetReport { q_values: history.iter().map(|f| f.q_max).collect(), corners })
}

fn classify(angles: &[(u32, f64)], c: &FacetCriteria) -> CornerClass {
    let (lo, hi) = angles.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), a| (lo.min(a.1), hi.max(a.1)));
    if lo >= c.angle_tol_deg && hi <= lo * (1.0 + c.persistence_spread) {
        return CornerClass::Persistent;
    }
    let shrinking = angles.windows(2).all(|w| {
        let doublings = (w[1].0 as f64 / w[0].0 as f64).log2();
        w[1].1 * c.artifact_ratio.powf(doublings) <= w[0].1
    });
    if shrinking {
        CornerClass::Artifact
    } else {
        CornerClass::Unclassified
    }
}

/// Cyclic vertex-wise distance between two polygons with the same vertex
/// count, minimized over rotations; `∞` if counts differ.
pub fn polygon_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    if a.len() != b.len() || a.is_empty() {
        return f64::INFINITY;
    }
    let m = a.len();
    (0..m)
        .map(|r| {
            (0..m)
                .map(|i| {
                    let (p, q) = (a[i], b[(i + r) % m]);
                    (p[0] - q[0]).abs().max((p[1] - q[1]).abs())
                })
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}
