//! Planar Jordan domains: the unit disk, power and iterated-logarithm cusps,
//! and simple polygons.
//!
//! A [`DomainSpec`] is the serialisable description; [`Domain`] is the
//! validated, ready-to-query object. Boundaries are stored as positively
//! oriented chains of analytic curves, so distances near cusp walls are
//! computed from the exact curve rather than from a sampled polyline.

use crate::orlicz::{iterated_exp, iterated_log};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Membership ties closer than this to the boundary count as exterior.
pub const TIE_TOL: f64 = 1e-9;

/// A point of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
    pub fn dist(self, o: Point2) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// Which power-cusp construction a [`DomainSpec::PowerCusp`] denotes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CuspModel {
    /// Region above the graph `y = |x|^s`, capped by a circular arc.
    #[default]
    Graph,
    /// Horn `{0 < x ≤ 1, |y| < x^{1/s}}` attached to a round bulb.
    Horn,
}

/// Serialisable domain description, e.g.
/// `{"variant":"power_cusp","s":0.5,"model":"graph"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DomainSpec {
    UnitDisk,
    PowerCusp {
        s: f64,
        #[serde(default)]
        model: CuspModel,
    },
    IteratedLogCusp {
        s: f64,
        sigma: Vec<f64>,
    },
    Polyline {
        vertices: Vec<Point2>,
    },
}

/// Increasing wall profile `x ↦ f(x)` on `x ≥ 0` with `f(0) = 0`.
#[derive(Debug, Clone)]
pub enum Profile {
    /// `f(x) = x^q`.
    Power { q: f64 },
    /// `f(x) = x^s Π log_(i)^{σ_i}(e_i + 1/x)`, i.e. `Ψ_{−s,σ}(1/x)`.
    IteratedLog {
        s: f64,
        sigma: Vec<f64>,
        /// `(ln x, ln f(x))` nodes used for fast approximate inversion.
        table: Vec<(f64, f64)>,
    },
}

impl Profile {
    fn iterated_log(s: f64, sigma: Vec<f64>) -> Result<Self> {
        let mut p = Profile::IteratedLog {
            s,
            sigma,
            table: Vec::new(),
        };
        let n = 4000;
        let (lo, hi) = ((1e-300f64).ln(), 0.0);
        let mut table = Vec::with_capacity(n);
        let mut prev = 0.0;
        for i in 0..n {
            let lx = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let fx = p.height(lx.exp());
            if !(fx > prev) || !fx.is_finite() {
                return Err(Error::InvalidParameter(
                    "cusp profile is not strictly increasing on (0,1]".into(),
                ));
            }
            prev = fx;
            table.push((lx, fx.ln()));
        }
        if let Profile::IteratedLog { table: t, .. } = &mut p {
            *t = table;
        }
        Ok(p)
    }

    /// `f(x)` for `x ≥ 0`.
    pub fn height(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            Profile::Power { q } => x.powf(*q),
            Profile::IteratedLog { s, sigma, .. } => {
                let t = 1.0 / x;
                let logs: f64 = sigma
                    .iter()
                    .enumerate()
                    .map(|(j, &e)| iterated_log(j + 1, iterated_exp(j + 1) + t).powf(e))
                    .product();
                x.powf(*s) * logs
            }
        }
    }

    /// Approximate inverse; exact for power profiles.
    pub fn inverse_approx(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        match self {
            Profile::Power { q } => y.powf(1.0 / q),
            Profile::IteratedLog { table, .. } => {
                let ly = y.ln();
                let i = table.partition_point(|&(_, lf)| lf < ly);
                if i == 0 {
                    return table[0].0.exp();
                }
                if i >= table.len() {
                    return table[table.len() - 1].0.exp();
                }
                let (x0, f0) = table[i - 1];
                let (x1, f1) = table[i];
                (x0 + (x1 - x0) * (ly - f0) / (f1 - f0)).exp()
            }
        }
    }

    /// Inverse to near machine precision.
    pub fn inverse(&self, y: f64) -> f64 {
        match self {
            Profile::Power { .. } => self.inverse_approx(y),
            Profile::IteratedLog { .. } => {
                if y <= 0.0 {
                    return 0.0;
                }
                let guess = self.inverse_approx(y);
                let (mut lo, mut hi) = (guess * 0.5, guess * 2.0);
                while self.height(lo) > y {
                    lo *= 0.5;
                }
                while self.height(hi) < y {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.height(mid) < y {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 4.0 * f64::EPSILON * hi {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

/// One analytic piece of a boundary chain, parametrised by `u ∈ [0,1]`.
#[derive(Debug, Clone)]
pub enum Curve {
    /// `center + radius·e^{i(start + u·sweep)}`.
    Arc {
        center: Point2,
        radius: f64,
        start: f64,
        sweep: f64,
    },
    Segment { a: Point2, b: Point2 },
    /// `(sx·x, sy·f(x))` with `x = x_from + u (x_to − x_from)`, `sx, sy = ±1`.
    Wall {
        profile: Arc<Profile>,
        sx: f64,
        sy: f64,
        x_from: f64,
        x_to: f64,
    },
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if (b - a).abs() <= 1e-15 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Nearest point on the graph `(x, f(x))`, `x ∈ [a, b]`, `0 ≤ a < b`.
/// Returns `(distance, x)`.
/// Points farther than `ub` may be reported inexactly (callers discard them).
fn nearest_on_graph(profile: &Profile, px: f64, py: f64, a: f64, b: f64, ub: f64) -> (f64, f64) {
    let d2 = |x: f64| {
        let dy = profile.height(x) - py;
        (x - px) * (x - px) + dy * dy
    };
    let (fa, fb) = (profile.height(a), profile.height(b));
    let mut samples: Vec<(f64, f64)> = vec![(a, d2(a)), (b, d2(b))];
    let mut best = samples[0].1.min(samples[1].1);
    let mut u = best.sqrt().min(ub);
    if px >= a && px <= b {
        u = u.min((profile.height(px) - py).abs());
    }
    if py >= fa && py <= fb {
        u = u.min((profile.inverse_approx(py) - px).abs());
    }
    const N: usize = 32;
    let (xl, xr) = ((px - u).max(a), (px + u).min(b));
    if xl < xr {
        for i in 0..=N {
            let x = xl + (xr - xl) * i as f64 / N as f64;
            samples.push((x, d2(x)));
        }
    }
    let (yl, yr) = ((py - u).max(fa), (py + u).min(fb));
    if yl < yr {
        for i in 0..=N {
            let y = yl + (yr - yl) * i as f64 / N as f64;
            let x = profile.inverse_approx(y).clamp(a, b);
            samples.push((x, d2(x)));
        }
    }
    samples.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (ib, _) = samples
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &(_, v))| {
            if v < bv {
                (i, v)
            } else {
                (bi, bv)
            }
        });
    let lo = samples[ib.saturating_sub(1)].0;
    let hi = samples[(ib + 1).min(samples.len() - 1)].0;
    let mut bx = samples[ib].0;
    best = best.min(samples[ib].1);
    if hi > lo {
        let (x, v) = golden_min(d2, lo, hi, 80);
        if v < best {
            best = v;
            bx = x;
        }
    }
    (best.sqrt(), bx)
}

fn wrap_angle(t: f64) -> f64 {
    t.rem_euclid(2.0 * PI)
}

impl Curve {
    pub fn point(&self, u: f64) -> Point2 {
        match self {
            Curve::Arc {
                center,
                radius,
                start,
                sweep,
            } => {
                let t = start + u * sweep;
                Point2::new(center.x + radius * t.cos(), center.y + radius * t.sin())
            }
            Curve::Segment { a, b } => *a + (*b - *a) * u,
            Curve::Wall {
                profile,
                sx,
                sy,
                x_from,
                x_to,
            } => {
                let x = x_from + u * (x_to - x_from);
                Point2::new(sx * x, sy * profile.height(x))
            }
        }
    }

    /// `(distance, u)` of the nearest point of the curve to `p`.
    pub fn nearest(&self, p: Point2) -> (f64, f64) {
        self.nearest_within(p, f64::INFINITY)
    }

    /// Lower bound on the distance from `p` to the curve.
    fn lower_bound(&self, p: Point2) -> f64 {
        match self {
            Curve::Wall {
                profile,
                sx,
                sy,
                x_from,
                x_to,
            } => {
                let (a, b) = (x_from.min(*x_to), x_from.max(*x_to));
                let (px, py) = (sx * p.x, sy * p.y);
                let (fa, fb) = (profile.height(a), profile.height(b));
                let dx = (a - px).max(px - b).max(0.0);
                let dy = (fa - py).max(py - fb).max(0.0);
                dx.hypot(dy)
            }
            _ => 0.0,
        }
    }

    /// Like [`Curve::nearest`], but results at distance `≥ ub` may be
    /// inexact; used to prune searches that already have a better candidate.
    pub fn nearest_within(&self, p: Point2, ub: f64) -> (f64, f64) {
        match self {
            Curve::Arc {
                center,
                radius,
                start,
                sweep,
            } => {
                let v = p - *center;
                let (a0, a1) = if *sweep >= 0.0 {
                    (*start, *sweep)
                } else {
                    (start + sweep, -sweep)
                };
                let rel = wrap_angle(v.y.atan2(v.x) - a0);
                let (d_end0, d_end1) = (p.dist(self.point(0.0)), p.dist(self.point(1.0)));
                let mut best = if d_end0 <= d_end1 {
                    (d_end0, 0.0)
                } else {
                    (d_end1, 1.0)
                };
                if rel <= a1 {
                    let d = (v.norm() - radius).abs();
                    if d < best.0 {
                        let frac = rel / a1;
                        let u = if *sweep >= 0.0 { frac } else { 1.0 - frac };
                        best = (d, u);
                    }
                }
                best
            }
            Curve::Segment { a, b } => {
                let ab = *b - *a;
                let len2 = ab.x * ab.x + ab.y * ab.y;
                let t = if len2 > 0.0 {
                    (((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (p.dist(*a + ab * t), t)
            }
            Curve::Wall {
                profile,
                sx,
                sy,
                x_from,
                x_to,
            } => {
                let (a, b) = (x_from.min(*x_to), x_from.max(*x_to));
                let (d, x) = nearest_on_graph(profile, sx * p.x, sy * p.y, a, b, ub);
                (d, (x - x_from) / (x_to - x_from))
            }
        }
    }

    /// Monotone table of `(u, arclength from u = 0)`.
    fn arclength_table(&self) -> Vec<(f64, f64)> {
        match self {
            Curve::Arc { radius, sweep, .. } => {
                vec![(0.0, 0.0), (1.0, radius * sweep.abs())]
            }
            Curve::Segment { a, b } => vec![(0.0, 0.0), (1.0, a.dist(*b))],
            Curve::Wall { x_from, x_to, .. } => {
                // Uniform nodes plus geometric nodes toward x = 0, where the
                // wall may be arbitrarily steep.
                let (a, b) = (x_from.min(*x_to), x_from.max(*x_to));
                let mut xs: Vec<f64> = (0..=4000).map(|i| a + (b - a) * i as f64 / 4000.0).collect();
                if a == 0.0 {
                    let n = 3000;
                    let lo = (1e-14 * b).ln();
                    xs.extend((0..n).map(|i| (lo + (b.ln() - lo) * i as f64 / n as f64).exp()));
                }
                let mut us: Vec<f64> = xs.iter().map(|x| (x - x_from) / (x_to - x_from)).collect();
                us.sort_by(f64::total_cmp);
                us.dedup();
                let mut out = Vec::with_capacity(us.len());
                let mut acc = 0.0;
                let mut prev = self.point(us[0]);
                for &u in &us {
                    let q = self.point(u);
                    acc += q.dist(prev);
                    prev = q;
                    out.push((u, acc));
                }
                out
            }
        }
    }
}

fn interp(table: &[(f64, f64)], x: f64, forward: bool) -> f64 {
    // forward: u → s; otherwise s → u.
    let key = |e: &(f64, f64)| if forward { e.0 } else { e.1 };
    let val = |e: &(f64, f64)| if forward { e.1 } else { e.0 };
    let i = table.partition_point(|e| key(e) < x);
    if i == 0 {
        return val(&table[0]);
    }
    if i >= table.len() {
        return val(&table[table.len() - 1]);
    }
    let (e0, e1) = (&table[i - 1], &table[i]);
    let (k0, k1) = (key(e0), key(e1));
    if k1 == k0 {
        return val(e0);
    }
    val(e0) + (val(e1) - val(e0)) * (x - k0) / (k1 - k0)
}

/// Nearest-boundary query result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryHit {
    pub distance: f64,
    pub curve: usize,
    pub u: f64,
    /// Arclength position along the whole boundary, from its start point.
    pub arclength: f64,
}

/// Positively oriented closed chain of curves.
#[derive(Debug, Clone)]
pub struct Boundary {
    pub curves: Vec<Curve>,
    tables: Vec<Vec<(f64, f64)>>,
    offsets: Vec<f64>,
    total: f64,
}

impl Boundary {
    fn new(curves: Vec<Curve>) -> Self {
        let tables: Vec<_> = curves.iter().map(Curve::arclength_table).collect();
        let mut offsets = Vec::with_capacity(curves.len());
        let mut total = 0.0;
        for t in &tables {
            offsets.push(total);
            total += t.last().map_or(0.0, |e| e.1);
        }
        Self {
            curves,
            tables,
            offsets,
            total,
        }
    }

    pub fn total_length(&self) -> f64 {
        self.total
    }

    /// Arclength position of parameter `u` on curve `i`.
    pub fn arclength_of(&self, i: usize, u: f64) -> f64 {
        self.offsets[i] + interp(&self.tables[i], u, true)
    }

    /// Point at arclength position `s` (taken modulo the total length).
    pub fn point_at(&self, s: f64) -> Point2 {
        let s = s.rem_euclid(self.total);
        let i = self.offsets.partition_point(|&o| o <= s).saturating_sub(1);
        let u = interp(&self.tables[i], s - self.offsets[i], false);
        self.curves[i].point(u)
    }

    /// Nearest boundary point over the curves selected by `filter`.
    pub fn locate_among(&self, p: Point2, filter: impl Fn(usize) -> bool) -> BoundaryHit {
        let mut best = BoundaryHit {
            distance: f64::INFINITY,
            curve: 0,
            u: 0.0,
            arclength: 0.0,
        };
        // Cheap analytic curves first, so walls can be pruned by bounds.
        for pass in 0..2 {
            for (i, c) in self.curves.iter().enumerate() {
                let is_wall = matches!(c, Curve::Wall { .. });
                if (pass == 0) == is_wall || !filter(i) {
                    continue;
                }
                if c.lower_bound(p) >= best.distance {
                    continue;
                }
                let (d, u) = c.nearest_within(p, best.distance);
                if d < best.distance {
                    best = BoundaryHit {
                        distance: d,
                        curve: i,
                        u,
                        arclength: 0.0,
                    };
                }
            }
        }
        best.arclength = self.arclength_of(best.curve, best.u);
        best
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Disk,
    /// Horn `{0<x≤1, |y|<x^{1/s}}` ∪ disk(center, radius).
    Horn {
        q: f64,
        center: f64,
        radius: f64,
    },
    /// `{|x|<1, y > f(|x|), |z| < radius}`.
    Graph { profile: Arc<Profile>, radius: f64 },
    Polygon { vertices: Vec<Point2> },
}

/// Validated domain ready for queries.
#[derive(Debug, Clone)]
pub struct Domain {
    spec: DomainSpec,
    shape: Shape,
    boundary: Boundary,
}

/// Radius of the bulb closing the horn model; its circle passes through
/// `(1, ±1)`.
pub const HORN_BULB_RADIUS: f64 = 2.0;

fn check_s(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("s must lie in (0,1), got {s}")))
    }
}

fn segments_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let orient = |p: Point2, q: Point2, r: Point2| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    let on = |p: Point2, q: Point2, r: Point2, o: f64| {
        o == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        let (shape, curves) = match &spec {
            DomainSpec::UnitDisk => (
                Shape::Disk,
                vec![Curve::Arc {
                    center: Point2::new(0.0, 0.0),
                    radius: 1.0,
                    start: 0.0,
                    sweep: 2.0 * PI,
                }],
            ),
            DomainSpec::PowerCusp {
                s,
                model: CuspModel::Graph,
            } => {
                check_s(*s)?;
                Self::graph_shape(Profile::Power { q: *s })
            }
            DomainSpec::IteratedLogCusp { s, sigma } => {
                check_s(*s)?;
                crate::orlicz::IteratedPsi::new(-s, sigma.clone())?;
                Self::graph_shape(Profile::iterated_log(*s, sigma.clone())?)
            }
            DomainSpec::PowerCusp {
                s,
                model: CuspModel::Horn,
            } => {
                check_s(*s)?;
                Self::horn_shape(*s)
            }
            DomainSpec::Polyline { vertices } => Self::polygon_shape(vertices)?,
        };
        Ok(Self {
            spec,
            shape,
            boundary: Boundary::new(curves),
        })
    }

    fn graph_shape(profile: Profile) -> (Shape, Vec<Curve>) {
        let profile = Arc::new(profile);
        let top = profile.height(1.0);
        let radius = top.hypot(1.0);
        let corner = top.atan2(1.0);
        let curves = vec![
            Curve::Wall {
                profile: profile.clone(),
                sx: 1.0,
                sy: 1.0,
                x_from: 0.0,
                x_to: 1.0,
            },
            Curve::Arc {
                center: Point2::new(0.0, 0.0),
                radius,
                start: corner,
                sweep: PI - 2.0 * corner,
            },
            Curve::Wall {
                profile: profile.clone(),
                sx: -1.0,
                sy: 1.0,
                x_from: 1.0,
                x_to: 0.0,
            },
        ];
        (Shape::Graph { profile, radius }, curves)
    }

    fn horn_shape(s: f64) -> (Shape, Vec<Curve>) {
        let q = 1.0 / s;
        let radius = HORN_BULB_RADIUS;
        let center = 1.0 + (radius * radius - 1.0).sqrt();
        // First x at which the horn wall enters the open bulb; beyond it the
        // wall is interior to the union.
        let inside = |x: f64| (x - center).powi(2) + x.powf(2.0 * q) < radius * radius;
        let x_left = center - radius;
        let n = 20000;
        let mut x_cross = 1.0;
        let mut prev = x_left;
        for i in 1..=n {
            let x = x_left + (1.0 - x_left) * i as f64 / n as f64;
            if x < 1.0 && inside(x) {
                let (mut lo, mut hi) = (prev, x);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if inside(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                x_cross = 0.5 * (lo + hi);
                break;
            }
            prev = x;
        }
        let yc = x_cross.powf(q);
        let theta = yc.atan2(x_cross - center);
        let profile = Arc::new(Profile::Power { q });
        let curves = vec![
            Curve::Wall {
                profile: profile.clone(),
                sx: 1.0,
                sy: -1.0,
                x_from: 0.0,
                x_to: x_cross,
            },
            Curve::Arc {
                center: Point2::new(center, 0.0),
                radius,
                start: -theta,
                sweep: 2.0 * theta,
            },
            Curve::Wall {
                profile,
                sx: 1.0,
                sy: 1.0,
                x_from: x_cross,
                x_to: 0.0,
            },
        ];
        (Shape::Horn { q, center, radius }, curves)
    }

    fn polygon_shape(vertices: &[Point2]) -> Result<(Shape, Vec<Curve>)> {
        let n = vertices.len();
        if n < 3 || vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "polyline needs at least 3 finite vertices".into(),
            ));
        }
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                if adjacent {
                    if a == b || c == d {
                        return Err(Error::NonSimplePolyline);
                    }
                    continue;
                }
                if segments_cross(a, b, c, d) {
                    return Err(Error::NonSimplePolyline);
                }
            }
        }
        let area2: f64 = (0..n)
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                a.x * b.y - b.x * a.y
            })
            .sum();
        if area2 <= 0.0 {
            return Err(Error::InvalidParameter(
                "polyline must be positively oriented".into(),
            ));
        }
        let curves = (0..n)
            .map(|i| Curve::Segment {
                a: vertices[i],
                b: vertices[(i + 1) % n],
            })
            .collect();
        Ok((
            Shape::Polygon {
                vertices: vertices.to_vec(),
            },
            curves,
        ))
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    /// Cusp wall profile for graph-type cusps.
    pub fn profile(&self) -> Option<&Profile> {
        match &self.shape {
            Shape::Graph { profile, .. } => Some(profile),
            _ => None,
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bbox(&self) -> (Point2, Point2) {
        match &self.shape {
            Shape::Disk => (Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
            Shape::Horn { center, radius, .. } => (
                Point2::new(0.0, -radius),
                Point2::new(center + radius, *radius),
            ),
            Shape::Graph { radius, .. } => (Point2::new(-1.0, 0.0), Point2::new(1.0, *radius)),
            Shape::Polygon { vertices } => {
                let mut lo = vertices[0];
                let mut hi = vertices[0];
                for v in vertices {
                    lo = Point2::new(lo.x.min(v.x), lo.y.min(v.y));
                    hi = Point2::new(hi.x.max(v.x), hi.y.max(v.y));
                }
                (lo, hi)
            }
        }
    }

    /// A convenient interior base point well away from the boundary.
    pub fn base_point(&self) -> Point2 {
        match &self.shape {
            Shape::Disk => Point2::new(0.0, 0.0),
            Shape::Horn { center, .. } => Point2::new(*center, 0.0),
            Shape::Graph { radius, .. } => Point2::new(0.0, 0.5 * radius),
            Shape::Polygon { vertices } => {
                // Interior point of maximal distance among a coarse sample.
                let (lo, hi) = self.bbox();
                let mut best = (vertices[0], -1.0);
                for i in 1..64 {
                    for j in 1..64 {
                        let p = Point2::new(
                            lo.x + (hi.x - lo.x) * i as f64 / 64.0,
                            lo.y + (hi.y - lo.y) * j as f64 / 64.0,
                        );
                        if self.contains(p) {
                            let d = self.boundary.locate_among(p, |_| true).distance;
                            if d > best.1 {
                                best = (p, d);
                            }
                        }
                    }
                }
                best.0
            }
        }
    }

    /// True iff `p` lies in the open domain (ties within [`TIE_TOL`] of the
    /// boundary count as exterior).
    pub fn contains(&self, p: Point2) -> bool {
        self.interior_distance(p).is_some()
    }

    /// Closed-form membership test without the tie slack; much cheaper than
    /// [`Domain::contains`].
    pub fn inside_predicate(&self, p: Point2) -> bool {
        match &self.shape {
            Shape::Disk => p.norm() < 1.0,
            Shape::Horn { q, center, radius } => {
                (p - Point2::new(*center, 0.0)).norm() < *radius
                    || (p.x > 0.0 && p.x <= 1.0 && p.y.abs() < p.x.powf(*q))
            }
            Shape::Graph { profile, radius } => {
                p.x.abs() < 1.0 && p.y > profile.height(p.x.abs()) && p.norm() < *radius
            }
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                let mut inside = false;
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    if (a.y > p.y) != (b.y > p.y) {
                        let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                        if p.x < x {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }

    /// Distance to the boundary if `p` is interior (by more than
    /// [`TIE_TOL`]), `None` otherwise. Cheaper than `contains` followed by
    /// `dist_to_boundary`.
    pub fn interior_distance(&self, p: Point2) -> Option<f64> {
        if !p.is_finite() || !self.inside_predicate(p) {
            return None;
        }
        let d = self.raw_distance(p);
        (d > TIE_TOL).then_some(d)
    }

    /// Nearest boundary point, without checking membership. For symmetric
    /// cusps only the wall on the same side as `p` can be nearest, so the
    /// opposite wall is skipped.
    pub fn locate(&self, p: Point2) -> BoundaryHit {
        match &self.shape {
            Shape::Graph { .. } => {
                let skip = if p.x >= 0.0 { 2 } else { 0 };
                self.boundary.locate_among(p, |i| i != skip)
            }
            Shape::Horn { .. } => {
                let skip = if p.y >= 0.0 { 0 } else { 2 };
                self.boundary.locate_among(p, |i| i != skip)
            }
            _ => self.boundary.locate_among(p, |_| true),
        }
    }

    /// Distance to the boundary without a membership check.
    pub fn raw_distance(&self, p: Point2) -> f64 {
        match &self.shape {
            Shape::Disk => (1.0 - p.norm()).abs(),
            _ => self.locate(p).distance,
        }
    }

    /// Euclidean distance from an interior point to the boundary.
    pub fn dist_to_boundary(&self, p: Point2) -> Result<f64> {
        self.interior_distance(p)
            .ok_or(Error::ExteriorPoint { x: p.x, y: p.y })
    }

    /// `n` samples `(arclength, point)` of the positively oriented
    /// arclength parametrisation, equally spaced, starting at arclength 0.
    pub fn boundary_param(&self, n: usize) -> Result<Vec<(f64, Point2)>> {
        if n < 16 {
            return Err(Error::InvalidParameter(format!("need n >= 16, got {n}")));
        }
        let total = self.boundary.total_length();
        Ok((0..n)
            .map(|i| {
                let s = total * i as f64 / n as f64;
                (s, self.boundary.point_at(s))
            })
            .collect())
    }

    /// Horizontal slicing of a graph cusp into the pieces `S_k`.
    pub fn cusp_pieces(&self, k_max: usize) -> Result<CuspPartition> {
        let profile = self.profile().ok_or_else(|| {
            Error::InvalidParameter("cusp pieces need a graph-type cusp domain".into())
        })?;
        CuspPartition::new(profile, k_max, self.piece_area_model())
    }

    fn piece_area_model(&self) -> AreaModel {
        match &self.spec {
            DomainSpec::IteratedLogCusp { s, sigma } => AreaModel::IteratedLog {
                s: *s,
                sigma: sigma.clone(),
            },
            DomainSpec::PowerCusp { s, .. } => AreaModel::Power { s: *s },
            _ => AreaModel::Power { s: 0.5 },
        }
    }
}

/// `Σ_{j > k} j^{-2}`, summed from the tail for full relative accuracy.
pub fn inverse_square_tail(k: usize) -> f64 {
    let n = (k + 1).max(1000) as f64;
    // Euler–Maclaurin remainder beyond n.
    let mut acc = 1.0 / n + 1.0 / (2.0 * n * n) + 1.0 / (6.0 * n * n * n);
    for j in ((k + 1)..(n as usize)).rev() {
        acc += 1.0 / (j as f64 * j as f64);
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
enum AreaModel {
    Power { s: f64 },
    IteratedLog { s: f64, sigma: Vec<f64> },
}

/// The region `S_k` between the horizontal cuts at levels `y_k < y_{k−1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub k: usize,
    pub y_lo: f64,
    pub y_hi: f64,
    /// Exact area `2∫ f^{-1}(y) dy` over `[y_lo, y_hi]`.
    pub area: f64,
    /// Asymptotic area model (`k^{−2−1/s}` for power cusps).
    pub area_model: f64,
}

impl Piece {
    pub fn contains_level(&self, y: f64) -> bool {
        y > self.y_lo && y < self.y_hi
    }
}

/// Horizontal partition of a graph cusp near its tip.
#[derive(Debug, Clone, PartialEq)]
pub struct CuspPartition {
    pub k_max: usize,
    /// `levels[k-1] = y_k = Σ_{j>k} j^{-2}` for `k = 1..=k_max`.
    pub levels: Vec<f64>,
    /// `eps[k-1] = ε_k = k^{-2}`; only `k ≥ 2` is used by the pieces.
    pub eps: Vec<f64>,
    /// Pieces `S_2, …, S_K`, ordered toward the tip.
    pub pieces: Vec<Piece>,
}

impl CuspPartition {
    fn new(profile: &Profile, k_max: usize, model: AreaModel) -> Result<Self> {
        if k_max < 2 {
            return Err(Error::InvalidParameter(format!("need K >= 2, got {k_max}")));
        }
        let levels: Vec<f64> = (1..=k_max).map(inverse_square_tail).collect();
        let eps: Vec<f64> = (1..=k_max).map(|k| 1.0 / (k as f64 * k as f64)).collect();
        if levels[0] >= profile.height(1.0) {
            return Err(Error::InvalidParameter(
                "first cut lies above the cusp graph".into(),
            ));
        }
        let mut pieces = Vec::with_capacity(k_max - 1);
        for k in 2..=k_max {
            let (y_lo, y_hi) = (levels[k - 1], levels[k - 2]);
            let width = 2.0 * profile.inverse(y_lo);
            if eps[k - 1] < 1e-12 || width < 1e-12 {
                return Err(Error::PieceBelowResolution { k });
            }
            let area = match profile {
                Profile::Power { q } => {
                    let e = 1.0 + 1.0 / q;
                    2.0 * (y_hi.powf(e) - y_lo.powf(e)) / e
                }
                Profile::IteratedLog { .. } => {
                    // Composite Simpson on the exact inverse.
                    let n = 400;
                    let h = (y_hi - y_lo) / n as f64;
                    let mut acc = 0.0;
                    for i in 0..=n {
                        let w = if i == 0 || i == n {
                            1.0
                        } else if i % 2 == 1 {
                            4.0
                        } else {
                            2.0
                        };
                        acc += w * profile.inverse(y_lo + h * i as f64);
                    }
                    2.0 * acc * h / 3.0
                }
            };
            let kf = k as f64;
            let area_model = match &model {
                AreaModel::Power { s } => kf.powf(-2.0 - 1.0 / s),
                AreaModel::IteratedLog { s, sigma } => {
                    let psi = crate::orlicz::IteratedPsi {
                        a: -1.0 / s,
                        sigma: sigma.iter().map(|v| -v / s).collect(),
                    };
                    eps[k - 1] * crate::orlicz::psi_eval(&psi, kf)
                }
            };
            pieces.push(Piece {
                k,
                y_lo,
                y_hi,
                area,
                area_model,
            });
        }
        Ok(Self {
            k_max,
            levels,
            eps,
            pieces,
        })
    }

    pub fn eps(&self, k: usize) -> f64 {
        self.eps[k - 1]
    }

    /// Index of the piece whose level band contains `y`.
    pub fn piece_of(&self, y: f64) -> Option<usize> {
        let i = self.pieces.partition_point(|p| p.y_lo >= y);
        self.pieces.get(i).filter(|p| p.contains_level(y)).map(|p| p.k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk() -> Domain {
        Domain::new(DomainSpec::UnitDisk).unwrap()
    }

    #[test]
    fn disk_membership_and_distance() {
        let d = disk();
        assert!(d.contains(Point2::new(0.0, 0.0)));
        assert!(!d.contains(Point2::new(1.0, 0.0)));
        assert_eq!(d.dist_to_boundary(Point2::new(0.0, 0.0)).unwrap(), 1.0);
        assert!((d.dist_to_boundary(Point2::new(0.6, 0.0)).unwrap() - 0.4).abs() < 1e-15);
        assert!(matches!(
            d.dist_to_boundary(Point2::new(2.0, 0.0)),
            Err(Error::ExteriorPoint { .. })
        ));
    }

    #[test]
    fn horn_membership() {
        let d = Domain::new(DomainSpec::PowerCusp {
            s: 0.5,
            model: CuspModel::Horn,
        })
        .unwrap();
        assert!(d.contains(Point2::new(0.5, 0.2)));
        assert!(!d.contains(Point2::new(0.5, 0.3)));
        assert!(d.contains(Point2::new(3.0, 1.5)));
        assert!(!d.contains(Point2::new(-0.1, 0.0)));
    }

    /// Brute-force oracle: dense sampling of the horn wall plus local
    /// ternary refinement.
    fn brute_wall_distance(p: Point2, q: f64, x_max: f64) -> f64 {
        let f = |x: f64| (x - p.x).hypot(x.powf(q) - p.y.abs());
        let n = 200_000;
        let mut best = (0.0, f64::INFINITY);
        for i in 0..=n {
            let x = x_max * i as f64 / n as f64;
            let v = f(x);
            if v < best.1 {
                best = (x, v);
            }
        }
        let h = x_max / n as f64;
        let (mut a, mut b) = ((best.0 - h).max(0.0), (best.0 + h).min(x_max));
        for _ in 0..200 {
            let (m1, m2) = (a + (b - a) / 3.0, b - (b - a) / 3.0);
            if f(m1) < f(m2) {
                b = m2;
            } else {
                a = m1;
            }
        }
        f(0.5 * (a + b)).min(best.1)
    }

    #[test]
    fn horn_distance_matches_brute_force() {
        let d = Domain::new(DomainSpec::PowerCusp {
            s: 0.5,
            model: CuspModel::Horn,
        })
        .unwrap();
        for &(x, y) in &[(0.5, 0.0), (0.3, 0.05), (0.1, 0.001), (0.7, -0.3)] {
            let p = Point2::new(x, y);
            let got = d.dist_to_boundary(p).unwrap();
            let want = brute_wall_distance(p, 2.0, 0.9);
            assert!((got - want).abs() < 1e-9, "{p:?}: {got} vs {want}");
        }
    }

    #[test]
    fn graph_cusp_distance_near_tip() {
        let d = Domain::new(DomainSpec::PowerCusp {
            s: 0.5,
            model: CuspModel::Graph,
        })
        .unwrap();
        // Oracle: wall y = sqrt(x) is x = y², parametrised by y.
        for &(x, y) in &[(0.0, 0.1), (0.001, 0.05), (-0.002, 0.3), (0.2, 0.5)] {
            let p = Point2::new(x, y);
            let f = |t: f64| (t * t - x.abs()).hypot(t - y);
            let n = 400_000;
            let want = (0..=n)
                .map(|i| f(i as f64 / n as f64))
                .fold(f64::INFINITY, f64::min);
            let got = d.dist_to_boundary(p).unwrap();
            assert!((got - want).abs() < 1e-6 * want.max(1e-3), "{p:?}: {got} vs {want}");
        }
    }

    #[test]
    fn boundary_param_lengths() {
        let d = disk();
        let samples = d.boundary_param(64).unwrap();
        assert!((d.boundary().total_length() - 2.0 * PI).abs() < 1e-12);
        for w in samples.windows(2) {
            assert!(w[1].0 > w[0].0);
        }
        assert!(d.boundary_param(8).is_err());

        let g = Domain::new(DomainSpec::PowerCusp {
            s: 0.5,
            model: CuspModel::Graph,
        })
        .unwrap();
        // Graph length of sqrt|x| on [-1,1]: ∫0^1 sqrt(1 + 4y²) dy per side.
        let n = 100_000;
        let side: f64 = (0..n)
            .map(|i| {
                let y = (i as f64 + 0.5) / n as f64;
                (1.0 + 4.0 * y * y).sqrt() / n as f64
            })
            .sum();
        assert!(g.boundary().total_length() >= 2.0 * side);
        let first = g.boundary_param(100).unwrap()[0].1;
        assert!(first.norm() < 1e-12);
    }

    #[test]
    fn spec_roundtrip_json() {
        let spec: DomainSpec =
            serde_json::from_str(r#"{"variant":"power_cusp","s":0.5,"model":"graph"}"#).unwrap();
        assert_eq!(
            spec,
            DomainSpec::PowerCusp {
                s: 0.5,
                model: CuspModel::Graph
            }
        );
        let text = serde_json::to_string(&DomainSpec::UnitDisk).unwrap();
        assert_eq!(text, r#"{"variant":"unit_disk"}"#);
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(Domain::new(DomainSpec::PowerCusp {
            s: 1.2,
            model: CuspModel::Graph
        })
        .is_err());
        let bow = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert_eq!(
            Domain::new(DomainSpec::Polyline { vertices: bow }).unwrap_err(),
            Error::NonSimplePolyline
        );
    }

    #[test]
    fn polygon_queries() {
        let sq = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(2.0, 2.0),
            Point2::new(0.0, 2.0),
        ];
        let d = Domain::new(DomainSpec::Polyline { vertices: sq }).unwrap();
        assert!(d.contains(Point2::new(1.0, 1.0)));
        assert!((d.dist_to_boundary(Point2::new(1.0, 0.5)).unwrap() - 0.5).abs() < 1e-15);
        assert!((d.boundary().total_length() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn partition_levels_and_eps() {
        let d = Domain::new(DomainSpec::PowerCusp {
            s: 0.5,
            model: CuspModel::Graph,
        })
        .unwrap();
        let part = d.cusp_pieces(5).unwrap();
        assert!((part.eps(3) - 1.0 / 9.0).abs() < 1e-15);
        let y1 = PI * PI / 6.0 - 1.0;
        assert!((part.levels[0] - y1).abs() < 1e-13);
        for p in &part.pieces {
            assert!((p.y_hi - p.y_lo - part.eps(p.k)).abs() < 1e-13);
        }
        for w in part.pieces.windows(2) {
            assert!(w[1].y_hi <= w[0].y_lo);
        }
        assert!(d.cusp_pieces(1).is_err());
        assert!(disk().cusp_pieces(5).is_err());
    }

    #[test]
    fn piece_area_slope() {
        let d = Domain::new(DomainSpec::PowerCusp {
            s: 0.5,
            model: CuspModel::Graph,
        })
        .unwrap();
        let part = d.cusp_pieces(8).unwrap();
        let (xs, ys): (Vec<f64>, Vec<f64>) = part
            .pieces
            .iter()
            .map(|p| ((p.k as f64).ln(), p.area.ln()))
            .unzip();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope + 4.0).abs() < 0.2, "{slope}");
    }

    #[test]
    fn iterated_log_cusp_builds() {
        let d = Domain::new(DomainSpec::IteratedLogCusp {
            s: 0.5,
            sigma: vec![1.0],
        })
        .unwrap();
        let prof = d.profile().unwrap();
        for &y in &[1e-3, 0.1, 0.9] {
            let x = prof.inverse(y);
            assert!((prof.height(x) - y).abs() < 1e-12 * y.max(1.0));
        }
        let part = d.cusp_pieces(6).unwrap();
        assert_eq!(part.pieces.len(), 5);
        assert!(d.contains(Point2::new(0.0, 0.5)));
    }

    #[test]
    fn tail_sum_matches_direct() {
        let direct: f64 = (3..2_000_000).map(|j| 1.0 / (j as f64 * j as f64)).sum::<f64>() + 1.0 / 2e6;
        assert!((inverse_square_tail(2) - direct).abs() < 1e-12);
    }
}
