//! Hyperbolic distance on the unit disk, quasihyperbolic distance on any
//! [`Domain`] via Dijkstra on a weighted lattice graph, and verifiers for
//! power-type and iterated-logarithm growth of the quasihyperbolic distance.
//!
//! The lattice is anchored at integer multiples of the resolution, so points
//! such as `(0.99, 0)` are nodes for dyadic fractions of `0.01`. Nodes closer
//! than two grid steps to the boundary are dropped. Edge weights are the
//! segment length divided by the boundary distance at the segment midpoint;
//! every stencil midpoint lies on the half-step lattice, where distances are
//! precomputed once.

use crate::geometry::{Domain, Point2};
use crate::orlicz::{psi_eval, IteratedPsi};
use crate::report::{Cell, Table};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// `j_𝔻(z1, z2) = log((|1−z̄1 z2| + |z1−z2|)/(|1−z̄1 z2| − |z1−z2|))`.
pub fn hyperbolic_disk_distance(z1: Point2, z2: Point2) -> Result<f64> {
    for z in [z1, z2] {
        if !(z.norm() < 1.0) {
            return Err(Error::ExteriorPoint { x: z.x, y: z.y });
        }
    }
    let re = 1.0 - (z1.x * z2.x + z1.y * z2.y);
    let im = -(z1.x * z2.y - z1.y * z2.x);
    let a = re.hypot(im);
    let b = z1.dist(z2);
    // log((a+b)/(a−b)) = 2 atanh(b/a), stable for small b.
    Ok(2.0 * (b / a).atanh())
}

/// Neighbourhood used by the lattice graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    Eight,
    #[default]
    Sixteen,
}

const OFFSETS: [(i64, i64); 16] = [
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (-1, 1),
    (-1, -1),
    (1, -1),
    (2, 1),
    (1, 2),
    (-1, 2),
    (-2, 1),
    (-2, -1),
    (-1, -2),
    (1, -2),
    (2, -1),
];

impl Stencil {
    fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Stencil::Eight => &OFFSETS[..8],
            Stencil::Sixteen => &OFFSETS[..],
        }
    }
}

/// A shortest-path approximation of the quasihyperbolic distance.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicResult {
    pub distance: f64,
    /// Polyline witness from the first to the second query point.
    pub path: Vec<Point2>,
    pub resolution: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: u32,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (dist, node) — ties broken by node index.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lattice graph over a domain at a fixed resolution.
#[derive(Debug)]
pub struct QhGrid<'a> {
    domain: &'a Domain,
    res: f64,
    stencil: Stencil,
    imin: i64,
    jmin: i64,
    nx: usize,
    ny: usize,
    /// Boundary distance on the half-step lattice, 0 outside the domain.
    half: Vec<f64>,
    hx: usize,
    node_ok: Vec<bool>,
}

/// Attachment of an off-lattice point: `(node, edge weight)` pairs.
type Attach = Vec<(u32, f64)>;

impl<'a> QhGrid<'a> {
    pub fn new(domain: &'a Domain, res: f64, stencil: Stencil) -> Result<Self> {
        if !(res > 0.0) || !res.is_finite() {
            return Err(Error::InvalidParameter(format!("resolution must be positive, got {res}")));
        }
        let (lo, hi) = domain.bbox();
        let imin = (lo.x / res).floor() as i64;
        let imax = (hi.x / res).ceil() as i64;
        let jmin = (lo.y / res).floor() as i64;
        let jmax = (hi.y / res).ceil() as i64;
        let nx = (imax - imin + 1) as usize;
        let ny = (jmax - jmin + 1) as usize;
        if nx.saturating_mul(ny) > 60_000_000 {
            return Err(Error::InvalidParameter(format!("grid of {nx}x{ny} nodes is too large")));
        }
        let (hx, hy) = (2 * nx - 1, 2 * ny - 1);
        let half: Vec<f64> = (0..hx * hy)
            .into_par_iter()
            .map(|k| {
                let (a, b) = ((k % hx) as i64, (k / hx) as i64);
                let p = Point2::new(
                    (2 * imin + a) as f64 * 0.5 * res,
                    (2 * jmin + b) as f64 * 0.5 * res,
                );
                domain.interior_distance(p).unwrap_or(0.0)
            })
            .collect();
        let node_ok = (0..nx * ny)
            .map(|k| half[2 * (k / nx) * hx + 2 * (k % nx)] >= 2.0 * res)
            .collect();
        Ok(Self {
            domain,
            res,
            stencil,
            imin,
            jmin,
            nx,
            ny,
            half,
            hx,
            node_ok,
        })
    }

    pub fn resolution(&self) -> f64 {
        self.res
    }

    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_node(&self, k: usize) -> bool {
        self.node_ok[k]
    }

    pub fn node_pos(&self, k: usize) -> Point2 {
        Point2::new(
            (self.imin + (k % self.nx) as i64) as f64 * self.res,
            (self.jmin + (k / self.nx) as i64) as f64 * self.res,
        )
    }

    /// Boundary distance at node `k` (0 outside the domain).
    pub fn node_distance(&self, k: usize) -> f64 {
        self.half[2 * (k / self.nx) * self.hx + 2 * (k % self.nx)]
    }

    fn index(&self, i: i64, j: i64) -> Option<usize> {
        let (a, b) = (i - self.imin, j - self.jmin);
        if a < 0 || b < 0 || a >= self.nx as i64 || b >= self.ny as i64 {
            None
        } else {
            Some(b as usize * self.nx + a as usize)
        }
    }

    /// The lattice node coinciding with `p`, if any.
    fn node_at(&self, p: Point2) -> Option<usize> {
        let (fi, fj) = (p.x / self.res, p.y / self.res);
        let (i, j) = (fi.round(), fj.round());
        if (fi - i).abs() > 1e-9 || (fj - j).abs() > 1e-9 {
            return None;
        }
        self.index(i as i64, j as i64).filter(|&k| self.node_ok[k])
    }

    fn check_query(&self, p: Point2) -> Result<f64> {
        let d = self.domain.dist_to_boundary(p)?;
        if d < 2.0 * self.res * (1.0 - 1e-12) {
            return Err(Error::InCollar { x: p.x, y: p.y });
        }
        Ok(d)
    }

    /// Edges from an off-lattice point to nearby nodes.
    fn attach(&self, p: Point2) -> Result<Attach> {
        if let Some(k) = self.node_at(p) {
            return Ok(vec![(k as u32, 0.0)]);
        }
        let reach = 2.0 * self.res;
        let (ci, cj) = ((p.x / self.res).round() as i64, (p.y / self.res).round() as i64);
        let mut out = Vec::new();
        for dj in -2..=2 {
            for di in -2..=2 {
                let Some(k) = self.index(ci + di, cj + dj) else { continue };
                if !self.node_ok[k] {
                    continue;
                }
                let q = self.node_pos(k);
                let len = p.dist(q);
                if len > reach {
                    continue;
                }
                let mid = (p + q) * 0.5;
                if let Some(dm) = self.domain.interior_distance(mid) {
                    out.push((k as u32, len / dm));
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Disconnected);
        }
        Ok(out)
    }

    fn for_each_edge(&self, k: usize, mut f: impl FnMut(usize, f64)) {
        let (i, j) = ((k % self.nx) as i64, (k / self.nx) as i64);
        for &(di, dj) in self.stencil.offsets() {
            let (ni, nj) = (i + di, j + dj);
            if ni < 0 || nj < 0 || ni >= self.nx as i64 || nj >= self.ny as i64 {
                continue;
            }
            let nk = nj as usize * self.nx + ni as usize;
            if !self.node_ok[nk] {
                continue;
            }
            let dm = self.half[(2 * nj - dj) as usize * self.hx + (2 * ni - di) as usize];
            if dm <= 0.0 {
                continue;
            }
            let len = ((di * di + dj * dj) as f64).sqrt() * self.res;
            f(nk, len / dm);
        }
    }

    /// Multi-source Dijkstra; stops early once every node in `stop_after`
    /// is settled (or runs to exhaustion when it is empty).
    fn dijkstra(&self, sources: &[(u32, f64)], stop_after: &[u32]) -> (Vec<f64>, Vec<u32>) {
        let n = self.node_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![u32::MAX; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        for &(k, w) in sources {
            if w < dist[k as usize] {
                dist[k as usize] = w;
                heap.push(HeapItem { dist: w, node: k });
            }
        }
        let mut remaining = stop_after.len();
        while let Some(HeapItem { dist: dk, node }) = heap.pop() {
            let k = node as usize;
            if done[k] {
                continue;
            }
            done[k] = true;
            if !stop_after.is_empty() && stop_after.contains(&node) {
                remaining -= 1;
                if remaining == 0 {
                    break;
                }
            }
            self.for_each_edge(k, |nk, w| {
                let nd = dk + w;
                if nd < dist[nk] {
                    dist[nk] = nd;
                    pred[nk] = node;
                    heap.push(HeapItem {
                        dist: nd,
                        node: nk as u32,
                    });
                }
            });
        }
        (dist, pred)
    }

    /// Shortest-path quasihyperbolic distance between two interior points.
    /// The computation always starts from the lexicographically smaller
    /// point, so swapping the arguments gives a bit-identical distance.
    pub fn distance(&self, z0: Point2, z1: Point2) -> Result<GeodesicResult> {
        self.check_query(z0)?;
        self.check_query(z1)?;
        if z0 == z1 {
            return Ok(GeodesicResult {
                distance: 0.0,
                path: vec![z0],
                resolution: self.res,
            });
        }
        let swap = (z1.x, z1.y) < (z0.x, z0.y);
        let (a, b) = if swap { (z1, z0) } else { (z0, z1) };
        let src = self.attach(a)?;
        let dst = self.attach(b)?;
        let stop: Vec<u32> = dst.iter().map(|e| e.0).collect();
        let (dist, pred) = self.dijkstra(&src, &stop);

        let mut best = (f64::INFINITY, u32::MAX);
        for &(k, w) in &dst {
            let v = dist[k as usize] + w;
            if v < best.0 || (v == best.0 && k < best.1) {
                best = (v, k);
            }
        }
        // A direct segment between nearby off-lattice points.
        let mut direct = None;
        if a.dist(b) <= 2.0 * self.res {
            if let Some(dm) = self.domain.interior_distance((a + b) * 0.5) {
                let w = a.dist(b) / dm;
                if w < best.0 {
                    direct = Some(w);
                }
            }
        }
        let (distance, mut path) = match direct {
            Some(w) => (w, vec![a, b]),
            None => {
                if !best.0.is_finite() {
                    return Err(Error::Disconnected);
                }
                let mut nodes = Vec::new();
                let mut k = best.1;
                while k != u32::MAX {
                    nodes.push(self.node_pos(k as usize));
                    k = pred[k as usize];
                }
                nodes.reverse();
                let mut path = Vec::with_capacity(nodes.len() + 2);
                if nodes.first() != Some(&a) {
                    path.push(a);
                }
                path.extend(nodes);
                if path.last() != Some(&b) {
                    path.push(b);
                }
                (best.0, path)
            }
        };
        if swap {
            path.reverse();
        }
        Ok(GeodesicResult {
            distance,
            path,
            resolution: self.res,
        })
    }

    /// Quasihyperbolic distance from `z0` to every lattice node.
    pub fn field_from(&self, z0: Point2) -> Result<Vec<f64>> {
        self.check_query(z0)?;
        let src = self.attach(z0)?;
        Ok(self.dijkstra(&src, &[]).0)
    }
}

/// One-shot distance query; builds a private lattice graph.
pub fn quasihyperbolic_distance(domain: &Domain, z0: Point2, z1: Point2, res: f64) -> Result<GeodesicResult> {
    QhGrid::new(domain, res, Stencil::default())?.distance(z0, z1)
}

/// Sampling and tolerance options for the growth verifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthOptions {
    /// Relative slack: a violation needs `lhs > rhs·(1 + tol)`.
    pub tol: f64,
    /// Multiplicative constant in front of the bound.
    pub constant: f64,
    pub seed: u64,
    pub stencil: Stencil,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        Self {
            tol: 0.05,
            constant: 1.0,
            seed: 0,
            stencil: Stencil::Sixteen,
        }
    }
}

/// Sampled comparison of `h(z0, z)` against a growth bound.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub sample_points: Vec<Point2>,
    pub d_boundary: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Indices into the sample lists with `lhs > rhs·(1 + tol)`.
    pub violations: Vec<usize>,
    pub max_ratio: f64,
    pub tol: f64,
}

impl GrowthReport {
    fn build(points: Vec<Point2>, d: Vec<f64>, lhs: Vec<f64>, rhs: Vec<f64>, tol: f64) -> Self {
        let mut violations = Vec::new();
        let mut max_ratio: f64 = 0.0;
        for i in 0..points.len() {
            let r = lhs[i] / rhs[i];
            max_ratio = max_ratio.max(r);
            if lhs[i] > rhs[i] * (1.0 + tol) {
                violations.push(i);
            }
        }
        Self {
            sample_points: points,
            d_boundary: d,
            lhs,
            rhs,
            violations,
            max_ratio,
            tol,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Columns `x, y, d_boundary, qh_distance, bound, ratio`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["x", "y", "d_boundary", "qh_distance", "bound", "ratio"]);
        for i in 0..self.sample_points.len() {
            let p = self.sample_points[i];
            t.push(vec![
                Cell::Real(p.x),
                Cell::Real(p.y),
                Cell::Real(self.d_boundary[i]),
                Cell::Real(self.lhs[i]),
                Cell::Real(self.rhs[i]),
                Cell::Real(self.lhs[i] / self.rhs[i]),
            ]);
        }
        t
    }
}

const GROWTH_BUCKETS: usize = 24;

/// Runs Dijkstra from `z0` and compares against `bound(d0, d)` on
/// `n_samples` nodes, stratified over logarithmic bands of boundary
/// distance so the thin parts of the domain are represented. The first
/// sample is `z0` itself.
fn verify_with_bound(
    domain: &Domain,
    z0: Point2,
    n_samples: usize,
    res: f64,
    opts: &GrowthOptions,
    bound: impl Fn(f64, f64) -> f64 + Sync,
) -> Result<GrowthReport> {
    let grid = QhGrid::new(domain, res, opts.stencil)?;
    let d0 = grid.check_query(z0)?;
    let field = grid.field_from(z0)?;

    let reachable: Vec<usize> = (0..grid.node_count()).filter(|&k| field[k].is_finite()).collect();
    if reachable.is_empty() {
        return Err(Error::Disconnected);
    }
    let (lo, hi) = reachable.iter().fold((f64::MAX, 0.0f64), |(l, h), &k| {
        let d = grid.node_distance(k);
        (l.min(d), h.max(d))
    });
    let (llo, lhi) = (lo.ln(), hi.ln().max(lo.ln() + 1e-12));
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); GROWTH_BUCKETS];
    for &k in &reachable {
        let t = (grid.node_distance(k).ln() - llo) / (lhi - llo);
        let b = ((t * GROWTH_BUCKETS as f64) as usize).min(GROWTH_BUCKETS - 1);
        buckets[b].push(k);
    }
    let buckets: Vec<Vec<usize>> = buckets.into_iter().filter(|b| !b.is_empty()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut points = vec![z0];
    let mut d = vec![d0];
    let mut lhs = vec![0.0];
    for i in 1..n_samples.max(1) {
        let b = &buckets[i % buckets.len()];
        let k = b[rng.gen_range(0..b.len())];
        points.push(grid.node_pos(k));
        d.push(grid.node_distance(k));
        lhs.push(field[k]);
    }
    let rhs: Vec<f64> = d.iter().map(|&dz| opts.constant * bound(d0, dz)).collect();
    Ok(GrowthReport::build(points, d, lhs, rhs, opts.tol))
}

/// Checks `h(z0, z) ≤ C·(d(z0)/d(z))^{1−s}` on sampled interior points.
pub fn verify_s_growth(
    domain: &Domain,
    z0: Point2,
    s: f64,
    n_samples: usize,
    res: f64,
    opts: &GrowthOptions,
) -> Result<GrowthReport> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("s must lie in (0,1), got {s}")));
    }
    verify_with_bound(domain, z0, n_samples, res, opts, |d0, d| (d0 / d).powf(1.0 - s))
}

/// Checks `h(z0, z) ≤ C·Ψ_{1−s,σ}(1/d(z))` on sampled interior points.
pub fn verify_generalized_growth(
    domain: &Domain,
    z0: Point2,
    s: f64,
    sigma: &[f64],
    n_samples: usize,
    res: f64,
    opts: &GrowthOptions,
) -> Result<GrowthReport> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("s must lie in (0,1), got {s}")));
    }
    let psi = IteratedPsi::new(1.0 - s, sigma.to_vec())?;
    verify_with_bound(domain, z0, n_samples, res, opts, move |_, d| psi_eval(&psi, 1.0 / d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CuspModel, DomainSpec};

    fn disk() -> Domain {
        Domain::new(DomainSpec::UnitDisk).unwrap()
    }

    #[test]
    fn hyperbolic_values() {
        let o = Point2::new(0.0, 0.0);
        assert_eq!(hyperbolic_disk_distance(o, o).unwrap(), 0.0);
        let d = hyperbolic_disk_distance(o, Point2::new(0.5, 0.0)).unwrap();
        assert!((d - 3f64.ln()).abs() < 1e-14);
        let (a, b) = (Point2::new(0.3, -0.2), Point2::new(-0.1, 0.6));
        let rot = |p: Point2, t: f64| Point2::new(p.x * t.cos() - p.y * t.sin(), p.x * t.sin() + p.y * t.cos());
        let d1 = hyperbolic_disk_distance(a, b).unwrap();
        let d2 = hyperbolic_disk_distance(rot(a, 1.1), rot(b, 1.1)).unwrap();
        assert!((d1 - d2).abs() < 1e-13);
        assert!(hyperbolic_disk_distance(o, Point2::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn radial_disk_distance() {
        let d = disk();
        let g = quasihyperbolic_distance(&d, Point2::new(0.0, 0.0), Point2::new(0.5, 0.0), 0.01).unwrap();
        assert!((g.distance - 2f64.ln()).abs() < 1e-3, "{}", g.distance);
        assert_eq!(g.path.first(), Some(&Point2::new(0.0, 0.0)));
        assert_eq!(g.path.last(), Some(&Point2::new(0.5, 0.0)));
        assert!(g.path.iter().all(|p| d.contains(*p)));
    }

    #[test]
    fn symmetric_exactly_and_zero_on_diagonal() {
        let d = disk();
        let grid = QhGrid::new(&d, 0.02, Stencil::Sixteen).unwrap();
        let (a, b) = (Point2::new(-0.313, 0.2), Point2::new(0.55, -0.41));
        let ab = grid.distance(a, b).unwrap().distance;
        let ba = grid.distance(b, a).unwrap().distance;
        assert_eq!(ab.to_bits(), ba.to_bits());
        assert_eq!(grid.distance(a, a).unwrap().distance, 0.0);
    }

    #[test]
    fn collar_and_exterior_queries_fail() {
        let d = disk();
        let grid = QhGrid::new(&d, 0.01, Stencil::Sixteen).unwrap();
        let o = Point2::new(0.0, 0.0);
        assert!(matches!(grid.distance(o, Point2::new(0.995, 0.0)), Err(Error::InCollar { .. })));
        assert!(matches!(grid.distance(o, Point2::new(1.5, 0.0)), Err(Error::ExteriorPoint { .. })));
    }

    #[test]
    fn log_ratio_lower_bound_on_horn() {
        let d = Domain::new(DomainSpec::PowerCusp {
            s: 0.5,
            model: CuspModel::Horn,
        })
        .unwrap();
        let grid = QhGrid::new(&d, 0.01, Stencil::Sixteen).unwrap();
        let z0 = d.base_point();
        for z in [Point2::new(0.6, 0.0), Point2::new(1.5, 0.5), Point2::new(3.5, -0.6)] {
            let h = grid.distance(z0, z).unwrap().distance;
            let lower = (d.dist_to_boundary(z0).unwrap() / d.dist_to_boundary(z).unwrap()).ln().abs();
            assert!(h >= lower - 1e-9, "{z:?}: {h} < {lower}");
        }
    }

    #[test]
    fn disk_growth_half() {
        let d = disk();
        let rep = verify_s_growth(&d, Point2::new(0.0, 0.0), 0.5, 200, 0.01, &GrowthOptions::default()).unwrap();
        assert!(rep.passed(), "max ratio {}", rep.max_ratio);
        assert_eq!(rep.lhs[0], 0.0);
        assert_eq!(rep.rhs[0], 1.0);
        assert_eq!(rep.to_table().rows.len(), 200);
    }

    #[test]
    fn generalized_growth_zero_sigma_is_power() {
        let d = disk();
        let opts = GrowthOptions::default();
        let rep = verify_generalized_growth(&d, Point2::new(0.0, 0.0), 0.5, &[0.0], 50, 0.02, &opts).unwrap();
        for (dz, r) in rep.d_boundary.iter().zip(&rep.rhs) {
            assert!((r - dz.powf(-0.5)).abs() < 1e-12 * r);
        }
    }
}
