//! Curves, ray–curve intersections, the tangent-line mirror map, billiard
//! flow inside closed convex curves and artifact chains.
//!
//! Orientation: the left normal at `γ(s)` is `(-γ̇₂, γ̇₁)`. For a circle
//! traversed counterclockwise the interior is on the left.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

use crate::{Error, Result, Vec2};

/// Hits with `|cos angle|` below this are treated as tangent.
pub const TRANSVERSAL_TOL: f64 = 0.05;
/// Billiard trajectories closer than this to grazing are rejected.
pub const GRAZING_TOL: f64 = 1e-8;
/// Distance below which a point counts as lying on the curve.
pub const ON_CURVE_TOL: f64 = 1e-9;

const ROOT_TOL: f64 = 1e-12;

/// A point–direction pair in phase space. `xi` is a nonzero covector; only
/// its direction matters for the geometry, its length is carried along.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covector {
    pub x: Vec2,
    pub xi: Vec2,
}

impl Covector {
    pub fn new(x: Vec2, xi: Vec2) -> Result<Self> {
        if !(xi.norm() > 0.0) || !x.iter().chain(xi.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "covector needs finite x and nonzero xi, got x={:?} xi={:?}",
                x, xi
            )));
        }
        Ok(Self { x, xi })
    }

    pub fn from_components(x: f64, y: f64, xix: f64, xiy: f64) -> Result<Self> {
        Self::new(Vec2::new(x, y), Vec2::new(xix, xiy))
    }

    /// Unit direction of the line through the covector.
    pub fn direction(&self) -> Vec2 {
        self.xi / self.xi.norm()
    }

    pub fn distance_to(&self, other: &Covector) -> f64 {
        (self.x - other.x).norm().max((self.xi - other.xi).norm())
    }
}

impl fmt::Display for Covector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(({:.6}, {:.6}), ({:.6}, {:.6}))",
            self.x[0], self.x[1], self.xi[0], self.xi[1]
        )
    }
}

/// Intersection of the line `x + t·ξ/|ξ|` with the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Signed travel parameter along the unit direction.
    pub t: f64,
    /// Curve parameter of the intersection.
    pub s: f64,
    pub point: Vec2,
    /// `direction · left_normal(s)`; positive when the line crosses from the
    /// right side to the left side.
    pub cos_angle: f64,
}

/// Which side of the curve a transversal single hit comes from, and the
/// sign of the hit parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    SigmaLPlus,
    SigmaLMinus,
    SigmaRPlus,
    SigmaRMinus,
    Tangent,
    Multiple,
    NoHit,
}

impl Classification {
    pub fn is_left(self) -> bool {
        matches!(self, Classification::SigmaLPlus | Classification::SigmaLMinus)
    }

    pub fn is_single_transversal(self) -> bool {
        matches!(
            self,
            Classification::SigmaLPlus
                | Classification::SigmaLMinus
                | Classification::SigmaRPlus
                | Classification::SigmaRMinus
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

/// Samples of an arc-length parametrized curve with unit tangents.
/// Between samples the curve is the cubic Hermite interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    s: Vec<f64>,
    points: Vec<Vec2>,
    tangents: Vec<Vec2>,
    closed: bool,
    /// Parameter period for closed curves, parameter span otherwise.
    length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    Circle(Circle),
    Sampled(SampledCurve),
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn left_normal(t: Vec2) -> Vec2 {
    Vec2::new(-t[1], t[0])
}

/// Reflection of `v` across the line spanned by the unit vector `tau`.
pub fn reflect_across(v: Vec2, tau: Vec2) -> Vec2 {
    2.0 * v.dot(&tau) * tau - v
}

impl Curve {
    /// Counterclockwise circle with arc-length parameter:
    /// `γ(s) = center + radius·(cos(s/radius), sin(s/radius))`.
    pub fn circle(center: Vec2, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(format!("circle radius must be positive, got {radius}")));
        }
        Ok(Curve::Circle(Circle { center, radius }))
    }

    pub fn unit_circle() -> Self {
        Curve::Circle(Circle {
            center: Vec2::zeros(),
            radius: 1.0,
        })
    }

    /// Builds a sampled curve. For closed curves the period is the last
    /// parameter plus the closing chord.
    pub fn sampled(s: Vec<f64>, points: Vec<Vec2>, tangents: Vec<Vec2>, closed: bool) -> Result<Self> {
        let n = s.len();
        if n < 4 {
            return Err(Error::InvalidInput(format!("sampled curve needs at least 4 samples, got {n}")));
        }
        if points.len() != n || tangents.len() != n {
            return Err(Error::InvalidInput("sample arrays differ in length".into()));
        }
        crate::interp::check_grid(&s)?;
        let mut tangents = tangents;
        for (i, t) in tangents.iter_mut().enumerate() {
            let norm = t.norm();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidInput(format!("tangent {i} has norm {norm}, expected 1")));
            }
            *t /= norm;
        }
        let length = if closed {
            s[n - 1] - s[0] + (points[0] - points[n - 1]).norm()
        } else {
            s[n - 1] - s[0]
        };
        let curve = SampledCurve {
            s,
            points,
            tangents,
            closed,
            length,
        };
        curve.check_simple()?;
        Ok(Curve::Sampled(curve))
    }

    /// Samples a circle (counterclockwise, arc length) at `n` points.
    pub fn sampled_circle(center: Vec2, radius: f64, n: usize) -> Result<Self> {
        Self::sampled_arc(center, radius, 0.0, TAU, n, true)
    }

    /// Counterclockwise circular arc from polar angle `a0` to `a1`.
    pub fn sampled_arc(center: Vec2, radius: f64, a0: f64, a1: f64, n: usize, closed: bool) -> Result<Self> {
        let span = a1 - a0;
        let count = if closed { n } else { n.max(2) - 1 };
        let (mut s, mut p, mut t) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..n {
            let a = a0 + span * i as f64 / count as f64;
            s.push(radius * (a - a0));
            p.push(center + radius * Vec2::new(a.cos(), a.sin()));
            t.push(Vec2::new(-a.sin(), a.cos()));
        }
        Self::sampled(s, p, t, closed)
    }

    pub fn is_closed(&self) -> bool {
        match self {
            Curve::Circle(_) => true,
            Curve::Sampled(c) => c.closed,
        }
    }

    /// Total arc length (the parameter period for closed curves).
    pub fn length(&self) -> f64 {
        match self {
            Curve::Circle(c) => TAU * c.radius,
            Curve::Sampled(c) => c.length,
        }
    }

    /// Start of the parameter range.
    pub fn s_start(&self) -> f64 {
        match self {
            Curve::Circle(_) => 0.0,
            Curve::Sampled(c) => c.s[0],
        }
    }

    pub fn point(&self, s: f64) -> Vec2 {
        match self {
            Curve::Circle(c) => {
                let a = s / c.radius;
                c.center + c.radius * Vec2::new(a.cos(), a.sin())
            }
            Curve::Sampled(c) => c.eval(s).0,
        }
    }

    pub fn tangent(&self, s: f64) -> Vec2 {
        match self {
            Curve::Circle(c) => {
                let a = s / c.radius;
                Vec2::new(-a.sin(), a.cos())
            }
            Curve::Sampled(c) => c.eval(s).1,
        }
    }

    /// Left normal `γ̇⊥ = (-γ̇₂, γ̇₁)`.
    pub fn normal(&self, s: f64) -> Vec2 {
        left_normal(self.tangent(s))
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        match self {
            Curve::Circle(c) => (
                c.center - Vec2::new(c.radius, c.radius),
                c.center + Vec2::new(c.radius, c.radius),
            ),
            Curve::Sampled(c) => {
                let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
                let mut hi = -lo;
                for p in &c.points {
                    lo = lo.inf(p);
                    hi = hi.sup(p);
                }
                (lo, hi)
            }
        }
    }

    /// Uniform parameter samples `s_j = s_start + j·L/n` (the end point is
    /// excluded for closed curves and included for open ones).
    pub fn uniform_parameters(&self, n: usize) -> Vec<f64> {
        let s0 = self.s_start();
        let l = self.length();
        if self.is_closed() {
            (0..n).map(|j| s0 + l * j as f64 / n as f64).collect()
        } else {
            let d = (n.max(2) - 1) as f64;
            (0..n).map(|j| s0 + l * j as f64 / d).collect()
        }
    }

    /// Whether `x` lies strictly inside a closed curve.
    pub fn contains(&self, x: Vec2) -> bool {
        match self {
            Curve::Circle(c) => (x - c.center).norm() < c.radius,
            Curve::Sampled(c) => c.closed && c.winding_number(x) != 0,
        }
    }

    /// Distance to the curve and the parameter of the nearest point.
    pub fn nearest(&self, x: Vec2) -> (f64, f64) {
        match self {
            Curve::Circle(c) => {
                let d = x - c.center;
                let a = d[1].atan2(d[0]).rem_euclid(TAU);
                ((d.norm() - c.radius).abs(), a * c.radius)
            }
            Curve::Sampled(c) => c.nearest(x),
        }
    }

    /// Wraps a parameter into the curve's range (periodic for closed curves).
    pub fn wrap(&self, s: f64) -> f64 {
        if self.is_closed() {
            let s0 = self.s_start();
            s0 + (s - s0).rem_euclid(self.length())
        } else {
            s
        }
    }

    /// Curve samples written as CSV with header `s,x,y,tx,ty`.
    pub fn to_csv(&self, n: usize) -> String {
        let mut out = String::from("s,x,y,tx,ty\n");
        let params: Vec<f64> = match self {
            Curve::Sampled(c) => c.s.clone(),
            Curve::Circle(_) => self.uniform_parameters(n),
        };
        for s in params {
            let p = self.point(s);
            let t = self.tangent(s);
            out.push_str(&format!("{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n", s, p[0], p[1], t[0], t[1]));
        }
        out
    }

    /// Parses a curve CSV. The curve is treated as closed when the gap
    /// between the last and first sample is at most 1.5 sample spacings.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty curve file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["s", "x", "y", "tx", "ty"] {
            return Err(Error::Parse(format!("curve header must be s,x,y,tx,ty, got {header}")));
        }
        let (mut s, mut p, mut t) = (Vec::new(), Vec::new(), Vec::new());
        for (k, line) in lines.enumerate() {
            let v: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("curve row {}: {e}", k + 1)))?;
            if v.len() != 5 {
                return Err(Error::Parse(format!("curve row {} has {} fields", k + 1, v.len())));
            }
            s.push(v[0]);
            p.push(Vec2::new(v[1], v[2]));
            t.push(Vec2::new(v[3], v[4]));
        }
        if p.len() < 4 {
            return Err(Error::InvalidInput(format!("sampled curve needs at least 4 samples, got {}", p.len())));
        }
        let max_step = p.windows(2).map(|w| (w[1] - w[0]).norm()).fold(0.0, f64::max);
        let gap = (p[0] - p[p.len() - 1]).norm();
        let closed = gap <= 1.5 * max_step;
        Self::sampled(s, p, t, closed)
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text)
    }

    fn check_valid_line(&self, cv: &Covector) -> Result<()> {
        if !(cv.xi.norm() > 0.0) {
            return Err(Error::InvalidInput("covector xi must be nonzero".into()));
        }
        Ok(())
    }

    /// A parameter range long enough to contain every hit of any line
    /// through `x`.
    fn full_range(&self, x: Vec2) -> (f64, f64) {
        let (lo, hi) = self.bounding_box();
        let reach = (x - lo).norm().max((x - hi).norm()) + (hi - lo).norm() + 1.0;
        (-reach, reach)
    }
}

/// All hits of the line `x + t·ξ/|ξ|` with the curve for `t` in
/// `[t_range.0, t_range.1]`, sorted by `t`.
pub fn ray_curve_intersections(curve: &Curve, cv: &Covector, t_range: (f64, f64)) -> Result<Vec<Hit>> {
    curve.check_valid_line(cv)?;
    let (t0, t1) = t_range;
    if !t0.is_finite() || !t1.is_finite() || t1 < t0 {
        return Err(Error::InvalidInput(format!("t range must be finite and ordered, got {t_range:?}")));
    }
    let u = cv.direction();
    let mut hits = match curve {
        Curve::Circle(c) => circle_hits(c, cv.x, u),
        Curve::Sampled(c) => c.hits(cv.x, u),
    };
    hits.retain(|h| h.t >= t0 && h.t <= t1);
    hits.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(hits)
}

fn circle_hits(c: &Circle, x: Vec2, u: Vec2) -> Vec<Hit> {
    let d = x - c.center;
    let b = u.dot(&d);
    let q = d.norm_squared() - c.radius * c.radius;
    let disc = b * b - q;
    if disc < 0.0 {
        return Vec::new();
    }
    let root = disc.sqrt();
    let ts: Vec<f64> = if root == 0.0 {
        vec![-b]
    } else {
        // numerically stable pair
        let t_far = if b > 0.0 { -b - root } else { -b + root };
        let t_near = if t_far != 0.0 { q / t_far } else { -b - root.copysign(b) };
        vec![t_far, t_near]
    };
    ts.into_iter()
        .map(|t| {
            let p = x + t * u;
            let rel = p - c.center;
            let a = rel[1].atan2(rel[0]).rem_euclid(TAU);
            let s = a * c.radius;
            let tangent = Vec2::new(-a.sin(), a.cos());
            Hit {
                t,
                s,
                point: c.center + c.radius * Vec2::new(a.cos(), a.sin()),
                cos_angle: u.dot(&left_normal(tangent)),
            }
        })
        .collect()
}

impl SampledCurve {
    fn segment_count(&self) -> usize {
        if self.closed {
            self.s.len()
        } else {
            self.s.len() - 1
        }
    }

    /// Endpoints of segment `i` as (s_a, s_b, index_a, index_b), with
    /// `s_b` unwrapped for the closing segment.
    fn segment(&self, i: usize) -> (f64, f64, usize, usize) {
        let n = self.s.len();
        let j = (i + 1) % n;
        let sb = if j == 0 { self.s[0] + self.length } else { self.s[j] };
        (self.s[i], sb, i, j)
    }

    fn hermite(&self, i: usize, s: f64) -> (Vec2, Vec2) {
        let (sa, sb, a, b) = self.segment(i);
        let d = sb - sa;
        let u = ((s - sa) / d).clamp(0.0, 1.0);
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        let (p0, p1) = (self.points[a], self.points[b]);
        let (m0, m1) = (self.tangents[a] * d, self.tangents[b] * d);
        let p = h00 * p0 + h10 * m0 + h01 * p1 + h11 * m1;
        let dh00 = 6.0 * u2 - 6.0 * u;
        let dh10 = 3.0 * u2 - 4.0 * u + 1.0;
        let dh01 = -6.0 * u2 + 6.0 * u;
        let dh11 = 3.0 * u2 - 2.0 * u;
        let dp = dh00 * p0 + dh10 * m0 + dh01 * p1 + dh11 * m1;
        let norm = dp.norm();
        let t = if norm > 0.0 { dp / norm } else { self.tangents[a] };
        (p, t)
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let s = if self.closed {
            self.s[0] + (s - self.s[0]).rem_euclid(self.length)
        } else {
            s.clamp(self.s[0], self.s[self.s.len() - 1])
        };
        let i = match self.s.binary_search_by(|p| p.total_cmp(&s)) {
            Ok(i) => i.min(self.segment_count() - 1),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.segment_count() - 1),
        };
        (i, s)
    }

    fn eval(&self, s: f64) -> (Vec2, Vec2) {
        let (i, s) = self.locate(s);
        self.hermite(i, s)
    }

    fn check_simple(&self) -> Result<()> {
        let m = self.segment_count();
        let n = self.s.len();
        for i in 0..m {
            let (_, _, a, b) = self.segment(i);
            for k in i + 2..m {
                let (_, _, c, d) = self.segment(k);
                if self.closed && (d == a || b == c) {
                    continue;
                }
                if segments_cross(self.points[a], self.points[b], self.points[c], self.points[d]) {
                    return Err(Error::InvalidInput(format!(
                        "curve self-intersects between segments {i} and {k} (of {n} samples)"
                    )));
                }
            }
        }
        Ok(())
    }

    fn winding_number(&self, x: Vec2) -> i32 {
        let mut wn = 0;
        let n = self.points.len();
        for i in 0..n {
            let a = self.points[i] - x;
            let b = self.points[(i + 1) % n] - x;
            if a[1] <= 0.0 {
                if b[1] > 0.0 && cross(a, b) > 0.0 {
                    wn += 1;
                }
            } else if b[1] <= 0.0 && cross(a, b) < 0.0 {
                wn -= 1;
            }
        }
        wn
    }

    fn nearest(&self, x: Vec2) -> (f64, f64) {
        let mut best = (f64::INFINITY, self.s[0]);
        for i in 0..self.segment_count() {
            let (sa, sb, a, b) = self.segment(i);
            let (pa, pb) = (self.points[a], self.points[b]);
            let d = pb - pa;
            let lam = ((x - pa).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            let dist = (pa + lam * d - x).norm();
            if dist < best.0 {
                best = (dist, sa + lam * (sb - sa));
            }
        }
        // refine on the Hermite segment by a few Newton steps on (p(s)-x)·t(s)
        let (_, mut s) = best;
        let mut converged = false;
        let g = |s: f64| {
            let (p, t) = self.eval(s);
            (x - p).dot(&t)
        };
        for _ in 0..30 {
            let gs = g(s);
            let dg = (g(s + 1e-7) - g(s - 1e-7)) / 2e-7;
            let step = if dg < -1e-3 { -gs / dg } else { gs };
            s += step;
            if step.abs() < 1e-13 {
                converged = true;
                break;
            }
        }
        if !converged {
            return best;
        }
        let s = if self.closed {
            self.s[0] + (s - self.s[0]).rem_euclid(self.length)
        } else {
            s.clamp(self.s[0], self.s[self.s.len() - 1])
        };
        let (p, _) = self.eval(s);
        ((p - x).norm(), s)
    }

    /// Sign changes of the perpendicular offset `(γ(s) − x) × u`, bracketed on
    /// sub-samples of each Hermite segment and refined by bisection.
    fn hits(&self, x: Vec2, u: Vec2) -> Vec<Hit> {
        const SUB: usize = 4;
        let offset = |i: usize, s: f64| cross(self.hermite(i, s).0 - x, u);
        let mut hits: Vec<Hit> = Vec::new();
        for i in 0..self.segment_count() {
            let (sa, sb, _, _) = self.segment(i);
            let mut prev_s = sa;
            let mut prev_g = offset(i, sa);
            for k in 1..=SUB {
                let s = sa + (sb - sa) * k as f64 / SUB as f64;
                let g = offset(i, s);
                let root = if prev_g == 0.0 {
                    Some(prev_s)
                } else if prev_g * g < 0.0 {
                    let (mut lo, mut hi, mut glo) = (prev_s, s, prev_g);
                    while hi - lo > ROOT_TOL {
                        let mid = 0.5 * (lo + hi);
                        let gm = offset(i, mid);
                        if gm == 0.0 {
                            lo = mid;
                            hi = mid;
                            break;
                        }
                        if gm * glo < 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                            glo = gm;
                        }
                    }
                    Some(0.5 * (lo + hi))
                } else {
                    None
                };
                if let Some(sr) = root {
                    let (p, t) = self.hermite(i, sr);
                    let sr = if self.closed {
                        self.s[0] + (sr - self.s[0]).rem_euclid(self.length)
                    } else {
                        sr
                    };
                    let duplicate = hits.iter().any(|h| (h.point - p).norm() < 1e-9);
                    if !duplicate {
                        hits.push(Hit {
                            t: (p - x).dot(&u),
                            s: sr,
                            point: p,
                            cos_angle: u.dot(&left_normal(t)),
                        });
                    }
                }
                prev_s = s;
                prev_g = g;
            }
            // an exact zero at the open end point
            if !self.closed && i == self.segment_count() - 1 && prev_g == 0.0 {
                let (p, t) = self.hermite(i, sb);
                if !hits.iter().any(|h| (h.point - p).norm() < 1e-9) {
                    hits.push(Hit {
                        t: (p - x).dot(&u),
                        s: sb,
                        point: p,
                        cos_angle: u.dot(&left_normal(t)),
                    });
                }
            }
        }
        hits
    }
}

fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Classification over the whole line.
pub fn classify_covector(curve: &Curve, cv: &Covector, tol: f64) -> Result<Classification> {
    let range = curve.full_range(cv.x);
    classify_in_range(curve, cv, tol, range)
}

/// Classification restricted to hits with `|t| ≤ t_window` (the part of the
/// line an observation of duration `t_window` can see).
pub fn classify_covector_within(curve: &Curve, cv: &Covector, tol: f64, t_window: f64) -> Result<Classification> {
    classify_in_range(curve, cv, tol, (-t_window, t_window))
}

fn classify_in_range(curve: &Curve, cv: &Covector, tol: f64, range: (f64, f64)) -> Result<Classification> {
    let (dist, _) = curve.nearest(cv.x);
    if dist <= ON_CURVE_TOL {
        return Err(Error::OnCurve(dist));
    }
    let hits = ray_curve_intersections(curve, cv, range)?;
    if hits.iter().any(|h| h.cos_angle.abs() < tol) {
        return Ok(Classification::Tangent);
    }
    match hits.as_slice() {
        [] => Ok(Classification::NoHit),
        [h] => {
            let left = (cv.x - h.point).dot(&curve.normal(h.s)) > 0.0;
            Ok(match (left, h.t > 0.0) {
                (true, true) => Classification::SigmaLPlus,
                (true, false) => Classification::SigmaLMinus,
                (false, true) => Classification::SigmaRPlus,
                (false, false) => Classification::SigmaRMinus,
            })
        }
        _ => Ok(Classification::Multiple),
    }
}

/// Reflection of a covector across the tangent line at a given hit.
pub fn mirror_at(curve: &Curve, cv: &Covector, hit: &Hit) -> Covector {
    let tau = curve.tangent(hit.s);
    Covector {
        x: hit.point + reflect_across(cv.x - hit.point, tau),
        xi: reflect_across(cv.xi, tau),
    }
}

/// The hit the mirror map uses: the first one ahead of `x` (t > 0), or the
/// one nearest behind it when the line only meets the curve backwards.
pub fn mirror_hit(curve: &Curve, cv: &Covector) -> Result<Hit> {
    let range = curve.full_range(cv.x);
    let hits = ray_curve_intersections(curve, cv, range)?;
    let forward = hits.iter().find(|h| h.t > ON_CURVE_TOL);
    let hit = match forward {
        Some(h) => *h,
        None => *hits
            .iter()
            .rev()
            .find(|h| h.t < -ON_CURVE_TOL)
            .ok_or_else(|| Error::NotMirrorable("line does not meet the curve".into()))?,
    };
    if hit.cos_angle.abs() < TRANSVERSAL_TOL {
        return Err(Error::NotMirrorable(format!(
            "hit at s={:.6} is tangent (|cos| = {:.3e})",
            hit.s,
            hit.cos_angle.abs()
        )));
    }
    Ok(hit)
}

/// The mirror map: reflection of `(x, ξ)` across the tangent line of the
/// curve at the point where the line through the covector meets it.
pub fn mirror(curve: &Curve, cv: &Covector) -> Result<Covector> {
    let hit = mirror_hit(curve, cv)?;
    Ok(mirror_at(curve, cv, &hit))
}

/// Next boundary hit strictly ahead of a point inside (or on) a closed
/// convex curve.
fn next_exit(curve: &Curve, x: Vec2, u: Vec2) -> Result<Hit> {
    let hit = match curve {
        Curve::Circle(c) => {
            let d = x - c.center;
            let b = u.dot(&d);
            let q = d.norm_squared() - c.radius * c.radius;
            let disc = (b * b - q).max(0.0);
            let t = -b + disc.sqrt();
            let p = x + t * u;
            let rel = p - c.center;
            let a = rel[1].atan2(rel[0]).rem_euclid(TAU);
            let tangent = Vec2::new(-a.sin(), a.cos());
            Hit {
                t,
                s: a * c.radius,
                point: c.center + c.radius * Vec2::new(a.cos(), a.sin()),
                cos_angle: u.dot(&left_normal(tangent)),
            }
        }
        Curve::Sampled(c) => {
            let scale = curve.length().max(1.0);
            *c.hits(x, u)
                .iter()
                .filter(|h| h.t > 1e-9 * scale)
                .min_by(|a, b| a.t.total_cmp(&b.t))
                .ok_or_else(|| Error::InvalidInput("trajectory left the curve".into()))?
        }
    };
    if hit.cos_angle.abs() < GRAZING_TOL {
        return Err(Error::Tangency(hit.cos_angle.abs()));
    }
    Ok(hit)
}

fn require_billiard(curve: &Curve, cv: &Covector) -> Result<()> {
    if !curve.is_closed() {
        return Err(Error::InvalidInput("billiard flow needs a closed curve".into()));
    }
    if !curve.contains(cv.x) {
        return Err(Error::InvalidInput(format!("point ({}, {}) is not inside the curve", cv.x[0], cv.x[1])));
    }
    let (dist, _) = curve.nearest(cv.x);
    if dist <= ON_CURVE_TOL {
        return Err(Error::OnCurve(dist));
    }
    Ok(())
}

const MAX_REFLECTIONS: usize = 10_000_000;

/// `Φ_γ^t`: unit-speed motion with specular reflection. At an exact
/// reflection time the limit from the left (earlier times) is returned.
pub fn billiard_flow(curve: &Curve, cv: &Covector, t: f64) -> Result<Covector> {
    require_billiard(curve, cv)?;
    let speed = cv.xi.norm();
    let backward = t < 0.0;
    let mut u = cv.direction();
    if backward {
        u = -u;
    }
    let mut x = cv.x;
    let mut remaining = t.abs();
    for _ in 0..MAX_REFLECTIONS {
        let hit = next_exit(curve, x, u)?;
        // forward: stop before a reflection at exactly `remaining`;
        // backward: the left limit is the state past it
        let reflect = if backward { hit.t <= remaining } else { hit.t < remaining };
        if !reflect {
            x += remaining * u;
            let dir = if backward { -u } else { u };
            return Ok(Covector { x, xi: dir * speed });
        }
        remaining -= hit.t;
        x = hit.point;
        let n = curve.normal(hit.s);
        u -= 2.0 * u.dot(&n) * n;
        u /= u.norm();
    }
    Err(Error::InvalidInput("too many reflections".into()))
}

/// One element of an artifact chain: the constant value of `Φ^{-t}∘Φ_γ^t`
/// on one billiard segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArtifactElement {
    pub covector: Covector,
    /// 0 for the original segment, ±k after k reflections forward/backward.
    pub segment: i64,
    /// Billiard time at which the segment begins (0 for segment 0).
    pub reflection_time: f64,
    /// Boundary point where the segment begins, if any.
    pub reflection_point: Option<Vec2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactChain {
    pub elements: Vec<ArtifactElement>,
}

impl ArtifactChain {
    pub fn segment(&self, k: i64) -> Option<&ArtifactElement> {
        self.elements.iter().find(|e| e.segment == k)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// CSV with header `segment,t_reflect,x,y,xix,xiy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("segment,t_reflect,x,y,xix,xiy\n");
        // + 0.0 turns -0 into 0
        for e in &self.elements {
            out.push_str(&format!(
                "{},{:.12},{:.12},{:.12},{:.12},{:.12}\n",
                e.segment,
                e.reflection_time + 0.0,
                e.covector.x[0] + 0.0,
                e.covector.x[1] + 0.0,
                e.covector.xi[0] + 0.0,
                e.covector.xi[1] + 0.0
            ));
        }
        out
    }
}

/// All mirror covectors `Φ^{-t}∘Φ_γ^t(x, ξ)` for `|t| ≤ t_max`, one per
/// billiard segment, ordered by segment index.
pub fn artifact_set(curve: &Curve, cv: &Covector, t_max: f64) -> Result<ArtifactChain> {
    require_billiard(curve, cv)?;
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidInput(format!("t_max must be positive, got {t_max}")));
    }
    let speed = cv.xi.norm();
    let mut elements = vec![ArtifactElement {
        covector: *cv,
        segment: 0,
        reflection_time: 0.0,
        reflection_point: None,
    }];
    for sign in [1.0, -1.0] {
        let mut u = sign * cv.direction();
        let mut x = cv.x;
        let mut clock = 0.0;
        let mut k = 0i64;
        loop {
            let hit = next_exit(curve, x, u)?;
            clock += hit.t;
            if clock > t_max {
                break;
            }
            x = hit.point;
            let n = curve.normal(hit.s);
            u -= 2.0 * u.dot(&n) * n;
            u /= u.norm();
            k += 1;
            // physical direction on this segment and the unrolled base point
            let dir = sign * u;
            let base = x - clock * u;
            elements.push(ArtifactElement {
                covector: Covector { x: base, xi: dir * speed },
                segment: sign as i64 * k,
                reflection_time: sign * clock,
                reflection_point: Some(x),
            });
            if k as usize > MAX_REFLECTIONS {
                return Err(Error::InvalidInput("too many reflections".into()));
            }
        }
    }
    elements.sort_by_key(|e| e.segment);
    Ok(ArtifactChain { elements })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cv(x: f64, y: f64, a: f64, b: f64) -> Covector {
        Covector::from_components(x, y, a, b).unwrap()
    }

    #[test]
    fn radial_ray_hits_normally() {
        let c = Curve::unit_circle();
        let hits = ray_curve_intersections(&c, &cv(0.0, 0.0, 1.0, 0.0), (0.0, 10.0)).unwrap();
        assert_eq!(hits.len(), 1);
        assert_abs_diff_eq!(hits[0].t, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hits[0].point[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(hits[0].cos_angle.abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn offset_ray_matches_quadratic() {
        let c = Curve::unit_circle();
        let hits = ray_curve_intersections(&c, &cv(0.0, 0.5, 1.0, 0.0), (0.0, 10.0)).unwrap();
        assert_eq!(hits.len(), 1);
        let r3 = 3f64.sqrt() / 2.0;
        assert_abs_diff_eq!(hits[0].t, r3, epsilon = 1e-14);
        assert_abs_diff_eq!(hits[0].point[1], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(hits[0].cos_angle.abs(), r3, epsilon = 1e-14);
    }

    #[test]
    fn outward_ray_misses() {
        let c = Curve::unit_circle();
        let hits = ray_curve_intersections(&c, &cv(3.0, 0.0, 1.0, 0.0), (0.0, 10.0)).unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn sampled_circle_hits_agree_with_analytic() {
        let exact = Curve::unit_circle();
        let sampled = Curve::sampled_circle(Vec2::zeros(), 1.0, 400).unwrap();
        let c = cv(0.1, 0.5, 1.0, 0.3);
        let a = ray_curve_intersections(&exact, &c, (-10.0, 10.0)).unwrap();
        let b = ray_curve_intersections(&sampled, &c, (-10.0, 10.0)).unwrap();
        assert_eq!(a.len(), b.len());
        for (h, g) in a.iter().zip(&b) {
            assert!((h.t - g.t).abs() < 1e-7, "{} vs {}", h.t, g.t);
            assert!((h.cos_angle - g.cos_angle).abs() < 1e-5);
        }
    }

    #[test]
    fn classification_examples() {
        let c = Curve::unit_circle();
        assert_eq!(
            classify_covector(&c, &cv(0.5, 0.0, 1.0, 0.0), TRANSVERSAL_TOL).unwrap(),
            Classification::Multiple
        );
        assert_eq!(
            classify_covector(&c, &cv(0.0, 0.999, 1.0, 0.0), TRANSVERSAL_TOL).unwrap(),
            Classification::Tangent
        );
        let arc = Curve::sampled_arc(Vec2::zeros(), 1.0, 0.0, std::f64::consts::PI, 200, false).unwrap();
        let class = classify_covector(&arc, &cv(0.0, 0.0, 0.0, 1.0), TRANSVERSAL_TOL).unwrap();
        assert_eq!(class, Classification::SigmaLPlus);
        let hits = ray_curve_intersections(&arc, &cv(0.0, 0.0, 0.0, 1.0), (-5.0, 5.0)).unwrap();
        assert_eq!(hits.len(), 1);
        assert_abs_diff_eq!(hits[0].point[1], 1.0, epsilon = 1e-9);
        // reversed direction: the single hit is now behind the point
        let back = classify_covector(&arc, &cv(0.0, 0.0, 0.0, -1.0), TRANSVERSAL_TOL).unwrap();
        assert_eq!(back, Classification::SigmaLMinus);
        assert!(matches!(
            classify_covector(&c, &cv(1.0, 0.0, 0.0, 1.0), TRANSVERSAL_TOL),
            Err(Error::OnCurve(_))
        ));
        let outside = classify_covector(&arc, &cv(0.0, 2.0, 0.0, -1.0), TRANSVERSAL_TOL).unwrap();
        assert_eq!(outside, Classification::SigmaRPlus);
    }

    #[test]
    fn windowed_classification_sees_one_hit() {
        let c = Curve::unit_circle();
        let p = cv(0.7, 0.0, 1.0, 0.0);
        assert_eq!(classify_covector(&c, &p, TRANSVERSAL_TOL).unwrap(), Classification::Multiple);
        assert_eq!(
            classify_covector_within(&c, &p, TRANSVERSAL_TOL, 1.0).unwrap(),
            Classification::SigmaLPlus
        );
    }

    #[test]
    fn mirror_examples() {
        let c = Curve::unit_circle();
        let m = mirror(&c, &cv(0.0, 0.0, 1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(m.x[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.x[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m.xi[0], -1.0, epsilon = 1e-14);
        let back = mirror(&c, &m).unwrap();
        assert!(back.distance_to(&cv(0.0, 0.0, 1.0, 0.0)) < 1e-12);

        // Householder reflection across the tangent at (√3/2, 1/2)
        let start = cv(0.0, 0.5, 1.0, 0.0);
        let m = mirror(&c, &start).unwrap();
        let p = Vec2::new(3f64.sqrt() / 2.0, 0.5);
        let tau = Vec2::new(-0.5, 3f64.sqrt() / 2.0);
        let h = nalgebra::Matrix2::identity() - 2.0 * (Vec2::new(-tau[1], tau[0]) * Vec2::new(-tau[1], tau[0]).transpose());
        let expect_x = p + h * (start.x - p);
        assert!((m.x - expect_x).norm() < 1e-12);
        assert!(((m.x - p).norm() - (start.x - p).norm()).abs() < 1e-12);
        assert!((m.xi - h * start.xi).norm() < 1e-12);
    }

    #[test]
    fn tangent_line_is_not_mirrorable() {
        let c = Curve::unit_circle();
        assert!(matches!(
            mirror(&c, &cv(0.0, 0.9999, 1.0, 0.0)),
            Err(Error::NotMirrorable(_))
        ));
        assert!(matches!(mirror(&c, &cv(3.0, 3.0, 1.0, 0.0)), Err(Error::NotMirrorable(_))));
    }

    #[test]
    fn billiard_examples() {
        let c = Curve::unit_circle();
        let start = cv(0.0, 0.0, 1.0, 0.0);
        let a = billiard_flow(&c, &start, 0.5).unwrap();
        assert!((a.x - Vec2::new(0.5, 0.0)).norm() < 1e-14);
        let b = billiard_flow(&c, &start, 2.0).unwrap();
        assert!(b.x.norm() < 1e-14);
        assert!((b.xi - Vec2::new(-1.0, 0.0)).norm() < 1e-14);
        // exact reflection time: limit from the left keeps the old direction
        let at = billiard_flow(&c, &start, 1.0).unwrap();
        assert!((at.x - Vec2::new(1.0, 0.0)).norm() < 1e-14);
        assert!((at.xi - Vec2::new(1.0, 0.0)).norm() < 1e-14);
        let neg = billiard_flow(&c, &start, -1.0).unwrap();
        assert!((neg.x - Vec2::new(-1.0, 0.0)).norm() < 1e-14);
        assert!((neg.xi - Vec2::new(-1.0, 0.0)).norm() < 1e-14);
        let neg2 = billiard_flow(&c, &start, -2.0).unwrap();
        assert!(neg2.x.norm() < 1e-14);
        assert!((neg2.xi - Vec2::new(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn billiard_requires_interior_point() {
        let c = Curve::unit_circle();
        assert!(billiard_flow(&c, &cv(2.0, 0.0, 1.0, 0.0), 1.0).is_err());
        let arc = Curve::sampled_arc(Vec2::zeros(), 1.0, 0.0, 3.0, 50, false).unwrap();
        assert!(billiard_flow(&arc, &cv(0.0, 0.0, 1.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn artifact_set_examples() {
        let c = Curve::unit_circle();
        let start = cv(0.0, 0.0, 1.0, 0.0);
        let short = artifact_set(&c, &start, 0.9).unwrap();
        assert_eq!(short.len(), 1);
        assert_eq!(short.elements[0].covector, start);

        let two = artifact_set(&c, &start, 2.0).unwrap();
        let s1 = two.segment(1).unwrap();
        assert!((s1.covector.x - Vec2::new(2.0, 0.0)).norm() < 1e-12);
        assert!((s1.covector.xi - Vec2::new(-1.0, 0.0)).norm() < 1e-12);
        let m = mirror(&c, &start).unwrap();
        assert!(s1.covector.distance_to(&m) < 1e-12);

        let four = artifact_set(&c, &start, 4.0).unwrap();
        let s2 = four.segment(2).unwrap();
        assert!((s2.covector.x - Vec2::new(-4.0, 0.0)).norm() < 1e-12);
        assert!((s2.covector.xi - Vec2::new(1.0, 0.0)).norm() < 1e-12);
        assert_abs_diff_eq!(s2.reflection_time, 3.0, epsilon = 1e-12);
        let back = four.segment(-1).unwrap();
        assert!((back.covector.x - Vec2::new(-2.0, 0.0)).norm() < 1e-12);
        assert_abs_diff_eq!(back.reflection_time, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn curve_csv_round_trip_and_validation() {
        let c = Curve::sampled_circle(Vec2::new(0.2, -0.1), 0.8, 64).unwrap();
        let text = c.to_csv(0);
        let back = Curve::from_csv_str(&text).unwrap();
        assert!(back.is_closed());
        assert!((back.length() - c.length()).abs() < 1e-12);
        assert!(Curve::from_csv_str("s,x,y\n").is_err());
        assert!(Curve::from_csv_str("s,x,y,tx,ty\n0,0,0,1,0\n1,1,0,1,0\n").is_err());
        // figure-eight polyline crosses itself
        let pts = [(0.0, 0.0), (1.0, 1.0), (1.0, 0.0), (0.0, 1.0)];
        let mut text = String::from("s,x,y,tx,ty\n");
        for (i, (x, y)) in pts.iter().enumerate() {
            text.push_str(&format!("{},{},{},1,0\n", i, x, y));
        }
        assert!(Curve::from_csv_str(&text).is_err());
        assert!(Curve::circle(Vec2::zeros(), 0.0).is_err());
    }

    #[test]
    fn sampled_geometry_queries() {
        let c = Curve::sampled_circle(Vec2::zeros(), 1.0, 256).unwrap();
        assert!(c.contains(Vec2::new(0.3, 0.2)));
        assert!(!c.contains(Vec2::new(1.3, 0.2)));
        let (d, s) = c.nearest(Vec2::new(0.0, 0.5));
        assert!((d - 0.5).abs() < 1e-6);
        assert!((s - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
        let p = c.point(1.0);
        assert!((p - Vec2::new(1f64.cos(), 1f64.sin())).norm() < 1e-6);
        assert!((c.tangent(1.0) - Vec2::new(-1f64.sin(), 1f64.cos())).norm() < 1e-5);
    }
}
