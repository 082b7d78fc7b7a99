//! Poisson extension on the disk, a Dirichlet solver on lattice grids, and
//! the energy functionals of the extension.
//!
//! `|Dh|` is the operator norm of the Jacobian, `|h_z| + |h_z̄|`.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{CuspPartition, Domain, Point2};
use crate::orlicz::{phi_eval, psi_eval, IteratedPsi, YoungPhi};
use crate::report::{Cell, Table};
use crate::{Error, Result};

/// Relative residual the Dirichlet solver must reach.
pub const SOLVER_TOL: f64 = 1e-10;
/// Iteration cap of the Dirichlet solver.
pub const SOLVER_MAX_ITER: usize = 50_000;
/// Arms shorter than this fraction of `res` pin the node to the trace.
const MIN_ARM: f64 = 1e-6;
const BISECT_STEPS: usize = 60;
const CHUNK: usize = 8192;
const NONE: u32 = u32::MAX;

/// Boundary homeomorphism onto the unit circle, piecewise linear in
/// (arclength fraction of the source boundary, target angle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMap {
    samples: Vec<(f64, f64)>,
}

impl BoundaryMap {
    /// `samples` are `(fraction ∈ [0,1), angle)`, both strictly increasing,
    /// with total angular advance below one turn; the map closes by
    /// `(1 + u₀, θ₀ + 2π)`.
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("boundary map needs samples".into()));
        }
        if samples.iter().any(|&(u, a)| !(u.is_finite() && a.is_finite() && (0.0..1.0).contains(&u))) {
            return Err(Error::InvalidParameter("fractions must lie in [0,1)".into()));
        }
        let monotone = samples.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1);
        let first = samples[0].1;
        let last = samples[samples.len() - 1].1;
        if !monotone || last - first >= 2.0 * PI {
            return Err(Error::NonInvertible);
        }
        Ok(Self { samples })
    }

    /// `e^{2πiu}` on the circle's own arclength fraction.
    pub fn identity() -> Self {
        Self {
            samples: vec![(0.0, 0.0)],
        }
    }

    /// `e^{i(2πu + θ)}`.
    pub fn rotation(theta: f64) -> Self {
        Self {
            samples: vec![(0.0, theta)],
        }
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Strict monotonicity holds by construction.
    pub fn is_monotone(&self) -> bool {
        true
    }

    /// Target angle (unwrapped) at source fraction `u`.
    pub fn angle_at(&self, u: f64) -> f64 {
        let u = u.rem_euclid(1.0);
        let n = self.samples.len();
        let (u0, a0) = self.samples[0];
        let k = self.samples.partition_point(|&(x, _)| x <= u);
        let (lo, hi) = if k == 0 {
            let (ul, al) = self.samples[n - 1];
            ((ul - 1.0, al - 2.0 * PI), (u0, a0))
        } else if k == n {
            (self.samples[n - 1], (u0 + 1.0, a0 + 2.0 * PI))
        } else {
            (self.samples[k - 1], self.samples[k])
        };
        lo.1 + (hi.1 - lo.1) * (u - lo.0) / (hi.0 - lo.0)
    }

    pub fn target(&self, u: f64) -> Point2 {
        let a = self.angle_at(u);
        Point2::new(a.cos(), a.sin())
    }
}

/// `(1/2π)∫ P(z, ξ) φ(ξ)|dξ|` by the trapezoid rule; `trace` takes the
/// angle of `ξ`.
pub fn poisson_extend(trace: impl Fn(f64) -> Point2, z: Point2, n_quad: usize) -> Result<Point2> {
    let w = poisson_weights(z, n_quad)?;
    let mut acc = Point2::new(0.0, 0.0);
    for (j, wj) in w.iter().enumerate() {
        acc = acc + trace(2.0 * PI * j as f64 / n_quad as f64) * *wj;
    }
    Ok(acc)
}

/// Scalar Poisson integral.
pub fn poisson_scalar(trace: impl Fn(f64) -> f64, z: Point2, n_quad: usize) -> Result<f64> {
    let w = poisson_weights(z, n_quad)?;
    Ok(w.iter()
        .enumerate()
        .map(|(j, wj)| wj * trace(2.0 * PI * j as f64 / n_quad as f64))
        .sum())
}

fn poisson_weights(z: Point2, n: usize) -> Result<Vec<f64>> {
    if n < 64 {
        return Err(Error::InvalidParameter("n_quad must be at least 64".into()));
    }
    let r2 = z.x * z.x + z.y * z.y;
    if !(r2 < 1.0) {
        return Err(Error::ExteriorPoint { x: z.x, y: z.y });
    }
    Ok((0..n)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / n as f64;
            let d = Point2::new(z.x - t.cos(), z.y - t.sin());
            (1.0 - r2) / (d.x * d.x + d.y * d.y) / n as f64
        })
        .collect())
}

/// `∫₀^{2π} |ψ′(e^{it})| / |z − e^{it}| dt` from equispaced samples of
/// `|ψ′|` at `t_j = 2πj/n`.
pub fn poisson_derivative_bound(psi_prime: &[f64], z: Point2) -> Result<f64> {
    let n = psi_prime.len();
    if n == 0 {
        return Err(Error::InvalidParameter("no derivative samples".into()));
    }
    if !(z.norm() < 1.0) {
        return Err(Error::ExteriorPoint { x: z.x, y: z.y });
    }
    let h = 2.0 * PI / n as f64;
    Ok(psi_prime
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let t = h * j as f64;
            p.abs() / Point2::new(z.x - t.cos(), z.y - t.sin()).norm()
        })
        .sum::<f64>()
        * h)
}

/// Boundary datum at the point where a lattice arm leaves the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub position: Point2,
    pub value: [f64; 2],
}

/// Two-component field on the interior lattice nodes `(i·res, j·res)`.
#[derive(Debug, Clone)]
pub struct GridField {
    pub res: f64,
    i0: i64,
    j0: i64,
    nx: usize,
    ny: usize,
    index: Vec<u32>,
    pub nodes: Vec<(i64, i64)>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub d_boundary: Vec<f64>,
    pub trace: Vec<TracePoint>,
    pub residual: f64,
    pub iterations: usize,
}

impl GridField {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn position(&self, n: usize) -> Point2 {
        let (i, j) = self.nodes[n];
        Point2::new(i as f64 * self.res, j as f64 * self.res)
    }

    /// Index of the node at lattice offset `(di, dj)` from node `n`.
    pub fn neighbor(&self, n: usize, di: i64, dj: i64) -> Option<usize> {
        let (i, j) = self.nodes[n];
        self.lookup(i + di, j + dj)
    }

    fn lookup(&self, i: i64, j: i64) -> Option<usize> {
        let (a, b) = (i - self.i0, j - self.j0);
        if a < 0 || b < 0 || a as usize >= self.nx || b as usize >= self.ny {
            return None;
        }
        let k = self.index[b as usize * self.nx + a as usize];
        (k != NONE).then_some(k as usize)
    }

    /// Central-difference partials `[∂x h1, ∂x h2, ∂y h1, ∂y h2]`; `None`
    /// when a neighbor is missing.
    pub fn partials(&self, n: usize) -> Option<[f64; 4]> {
        let e = self.neighbor(n, 1, 0)?;
        let w = self.neighbor(n, -1, 0)?;
        let no = self.neighbor(n, 0, 1)?;
        let s = self.neighbor(n, 0, -1)?;
        let k = 0.5 / self.res;
        Some([
            (self.h1[e] - self.h1[w]) * k,
            (self.h2[e] - self.h2[w]) * k,
            (self.h1[no] - self.h1[s]) * k,
            (self.h2[no] - self.h2[s]) * k,
        ])
    }

    /// Jacobian determinant from central differences.
    pub fn jacobian(&self, n: usize) -> Option<f64> {
        self.partials(n).map(|[a, b, c, d]| a * d - b * c)
    }

    /// Componentwise `[min, max]` of the boundary trace.
    pub fn trace_range(&self) -> [(f64, f64); 2] {
        let mut out = [(f64::INFINITY, f64::NEG_INFINITY); 2];
        for t in &self.trace {
            for c in 0..2 {
                out[c].0 = out[c].0.min(t.value[c]);
                out[c].1 = out[c].1.max(t.value[c]);
            }
        }
        out
    }

    /// Discrete maximum principle, per component, with slack `tol`.
    pub fn max_principle_holds(&self, tol: f64) -> bool {
        let r = self.trace_range();
        [&self.h1, &self.h2]
            .iter()
            .zip(r)
            .all(|(h, (lo, hi))| h.iter().all(|&v| v >= lo - tol && v <= hi + tol))
    }

    /// CSV with columns `x, y, h1, h2, abs_dh, d_boundary`.
    pub fn to_table(&self, grad: &[Option<f64>]) -> Table {
        let mut t = Table::new(&["x", "y", "h1", "h2", "abs_dh", "d_boundary"]);
        for n in 0..self.node_count() {
            let p = self.position(n);
            t.push(vec![
                p.x.into(),
                p.y.into(),
                self.h1[n].into(),
                self.h2[n].into(),
                grad[n].unwrap_or(f64::NAN).into(),
                self.d_boundary[n].into(),
            ]);
        }
        t
    }
}

/// Row of the discrete Laplacian scaled to unit diagonal:
/// `u_n − Σ coef·u_nbr = rhs`. `diag` is the unscaled diagonal in units
/// of `1/res²`; pinned rows have no neighbors.
struct Row {
    nbr: [u32; 4],
    coef: [f64; 4],
    diag: f64,
    rhs: [f64; 2],
}

/// One lattice of spacing `res` over the domain.
struct Level {
    res: f64,
    i0: i64,
    j0: i64,
    nx: usize,
    ny: usize,
    index: Vec<u32>,
    nodes: Vec<(i64, i64)>,
    rows: Vec<Row>,
    /// Node indices by checkerboard colour.
    colors: [Vec<u32>; 2],
}

impl Level {
    fn lookup(&self, i: i64, j: i64) -> u32 {
        let (a, b) = (i - self.i0, j - self.j0);
        if a < 0 || b < 0 || a as usize >= self.nx || b as usize >= self.ny {
            NONE
        } else {
            self.index[b as usize * self.nx + a as usize]
        }
    }
}

type Trace<'a> = &'a (dyn Fn(Point2) -> [f64; 2] + Sync);

/// Builds the lattice, its cut-arm rows and, when `trace` is given, the
/// right-hand sides and boundary samples.
fn build_level(domain: &Domain, res: f64, trace: Option<Trace>) -> Result<(Level, Vec<TracePoint>)> {
    let (lo, hi) = domain.bbox();
    let i0 = (lo.x / res).floor() as i64 - 1;
    let j0 = (lo.y / res).floor() as i64 - 1;
    let nx = ((hi.x / res).ceil() as i64 + 2 - i0) as usize;
    let ny = ((hi.y / res).ceil() as i64 + 2 - j0) as usize;
    if nx.saturating_mul(ny) > 200_000_000 {
        return Err(Error::InvalidParameter("grid too large".into()));
    }
    let at = |i: i64, j: i64| Point2::new(i as f64 * res, j as f64 * res);
    let mask: Vec<bool> = (0..nx * ny)
        .into_par_iter()
        .with_min_len(4096)
        .map(|k| domain.inside_predicate(at(i0 + (k % nx) as i64, j0 + (k / nx) as i64)))
        .collect();
    let mut index = vec![NONE; nx * ny];
    let mut nodes = Vec::new();
    for (k, &m) in mask.iter().enumerate() {
        if m {
            if nodes.len() >= NONE as usize - 1 {
                return Err(Error::InvalidParameter("grid too large".into()));
            }
            index[k] = nodes.len() as u32;
            nodes.push((i0 + (k % nx) as i64, j0 + (k / nx) as i64));
        }
    }
    let mut level = Level {
        res,
        i0,
        j0,
        nx,
        ny,
        index,
        nodes,
        rows: Vec::new(),
        colors: [Vec::new(), Vec::new()],
    };
    const DIRS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    let assembled: Vec<(Row, Vec<TracePoint>)> = level
        .nodes
        .par_iter()
        .with_min_len(1024)
        .map(|&(i, j)| {
            let p = at(i, j);
            let mut arm = [1.0f64; 4];
            let mut nbr = [NONE; 4];
            let mut val = [[0.0; 2]; 4];
            let mut crossings = Vec::new();
            for (d, &(di, dj)) in DIRS.iter().enumerate() {
                let k = level.lookup(i + di, j + dj);
                if k != NONE {
                    nbr[d] = k;
                    continue;
                }
                let dir = Point2::new(di as f64 * res, dj as f64 * res);
                let (mut a, mut b) = (0.0, 1.0);
                for _ in 0..BISECT_STEPS {
                    let m = 0.5 * (a + b);
                    if domain.inside_predicate(p + dir * m) {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                arm[d] = 0.5 * (a + b);
                if let Some(tr) = trace {
                    let c = p + dir * arm[d];
                    val[d] = tr(c);
                    crossings.push(TracePoint { position: c, value: val[d] });
                }
            }
            let pinned = (0..4).find(|&d| nbr[d] == NONE && arm[d] < MIN_ARM);
            let row = match pinned {
                Some(d) => Row {
                    nbr: [NONE; 4],
                    coef: [0.0; 4],
                    diag: 1.0,
                    rhs: val[d],
                },
                None => {
                    // Nonuniform second difference per axis.
                    let mut coef = [0.0; 4];
                    for axis in 0..2 {
                        let (a, b) = (arm[2 * axis], arm[2 * axis + 1]);
                        coef[2 * axis] = 2.0 / (a * (a + b));
                        coef[2 * axis + 1] = 2.0 / (b * (a + b));
                    }
                    let diag: f64 = coef.iter().sum();
                    let mut rhs = [0.0; 2];
                    for d in 0..4 {
                        coef[d] /= diag;
                        if nbr[d] == NONE {
                            rhs[0] += coef[d] * val[d][0];
                            rhs[1] += coef[d] * val[d][1];
                            coef[d] = 0.0;
                        }
                    }
                    Row { nbr, coef, diag, rhs }
                }
            };
            (row, crossings)
        })
        .collect();
    let mut trace_pts = Vec::new();
    for (r, c) in assembled {
        level.rows.push(r);
        trace_pts.extend(c);
    }
    for (n, &(i, j)) in level.nodes.iter().enumerate() {
        level.colors[((i + j).rem_euclid(2)) as usize].push(n as u32);
    }
    Ok((level, trace_pts))
}

/// Harmonic extension of `φ` by the 5-point Laplacian.
pub fn solve_harmonic_dirichlet(domain: &Domain, phi: &BoundaryMap, res: f64) -> Result<GridField> {
    let total = domain.boundary().total_length();
    solve_dirichlet_trace(domain, res, &|c: Point2| {
        let u = domain.locate(c).arclength / total;
        let p = phi.target(u);
        [p.x, p.y]
    })
}

/// Coarsest level size; below it the hierarchy stops.
const COARSE_NODES: usize = 400;
const SMOOTH_SWEEPS: usize = 2;
const COARSE_SWEEPS: usize = 60;

/// Dirichlet problem with an arbitrary two-component trace, evaluated at
/// the exact boundary crossings of lattice arms (Shortley–Weller arms).
/// Solved by BiCGSTAB preconditioned with a geometric multigrid V-cycle.
pub fn solve_dirichlet_trace(domain: &Domain, res: f64, trace: Trace) -> Result<GridField> {
    if !(res.is_finite() && res > 0.0) {
        return Err(Error::InvalidParameter(format!("resolution must be positive, got {res}")));
    }
    let (fine, trace_pts) = build_level(domain, res, Some(trace))?;
    if fine.nodes.is_empty() {
        return Err(Error::InvalidParameter("resolution too coarse: no interior nodes".into()));
    }
    check_connected(&fine)?;
    let mut levels = vec![fine];
    loop {
        let last = levels.last().expect("nonempty");
        if last.nodes.len() <= COARSE_NODES {
            break;
        }
        let (coarse, _) = build_level(domain, last.res * 2.0, None)?;
        if coarse.nodes.len() < 4 {
            break;
        }
        levels.push(coarse);
    }
    let rows = &levels[0].rows;
    let b1: Vec<f64> = rows.iter().map(|r| r.rhs[0]).collect();
    let b2: Vec<f64> = rows.iter().map(|r| r.rhs[1]).collect();
    let ((h1, r1, it1), (h2, r2, it2)) =
        rayon::join(|| bicgstab(&levels, &b1), || bicgstab(&levels, &b2));
    let (residual, iterations) = (r1.max(r2), it1.max(it2));
    if !(residual < SOLVER_TOL) {
        return Err(Error::NotConverged { residual, iterations });
    }
    let fine = levels.swap_remove(0);
    let d_boundary: Vec<f64> = fine
        .nodes
        .par_iter()
        .with_min_len(256)
        .map(|&(i, j)| domain.raw_distance(Point2::new(i as f64 * res, j as f64 * res)))
        .collect();
    Ok(GridField {
        res,
        i0: fine.i0,
        j0: fine.j0,
        nx: fine.nx,
        ny: fine.ny,
        index: fine.index,
        nodes: fine.nodes,
        h1,
        h2,
        d_boundary,
        trace: trace_pts,
        residual,
        iterations,
    })
}

fn check_connected(level: &Level) -> Result<()> {
    let nodes = &level.nodes;
    let mut seen = vec![false; nodes.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(n) = queue.pop_front() {
        let (i, j) = nodes[n];
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let k = level.lookup(i + di, j + dj);
            if k != NONE && !seen[k as usize] {
                seen[k as usize] = true;
                count += 1;
                queue.push_back(k as usize);
            }
        }
    }
    if count == nodes.len() {
        Ok(())
    } else {
        Err(Error::Disconnected)
    }
}

fn apply(rows: &[Row], x: &[f64], out: &mut [f64]) {
    out.par_iter_mut()
        .with_min_len(CHUNK)
        .zip(rows.par_iter())
        .enumerate()
        .for_each(|(n, (o, r))| {
            let mut v = x[n];
            for d in 0..4 {
                if r.nbr[d] != NONE {
                    v -= r.coef[d] * x[r.nbr[d] as usize];
                }
            }
            *o = v;
        });
}

/// Red–black Gauss–Seidel sweeps on `u − Σ coef·u_nbr = b`.
fn smooth(level: &Level, b: &[f64], u: &mut [f64], sweeps: usize) {
    for _ in 0..sweeps {
        for color in &level.colors {
            let updates: Vec<f64> = color
                .par_iter()
                .with_min_len(CHUNK)
                .map(|&n| {
                    let r = &level.rows[n as usize];
                    let mut v = b[n as usize];
                    for d in 0..4 {
                        if r.nbr[d] != NONE {
                            v += r.coef[d] * u[r.nbr[d] as usize];
                        }
                    }
                    v
                })
                .collect();
            for (&n, v) in color.iter().zip(updates) {
                u[n as usize] = v;
            }
        }
    }
}

/// One V-cycle from a zero initial guess: an approximate inverse of the
/// level-`l` operator, linear in `b`.
fn v_cycle(levels: &[Level], l: usize, b: &[f64]) -> Vec<f64> {
    let level = &levels[l];
    let mut u = vec![0.0; b.len()];
    if l + 1 == levels.len() {
        smooth(level, b, &mut u, COARSE_SWEEPS);
        return u;
    }
    smooth(level, b, &mut u, SMOOTH_SWEEPS);
    let mut au = vec![0.0; b.len()];
    apply(&level.rows, &u, &mut au);
    // Residual of the unscaled equations, full-weighted onto the coarse lattice.
    let r: Vec<f64> = (0..b.len())
        .map(|n| (b[n] - au[n]) * level.rows[n].diag)
        .collect();
    let coarse = &levels[l + 1];
    let rc: Vec<f64> = coarse
        .nodes
        .par_iter()
        .zip(coarse.rows.par_iter())
        .with_min_len(1024)
        .map(|(&(ci, cj), row)| {
            let mut acc = 0.0;
            for a in -1i64..=1 {
                for bb in -1i64..=1 {
                    let k = level.lookup(2 * ci + a, 2 * cj + bb);
                    if k != NONE {
                        let w = ((2 - a.abs()) * (2 - bb.abs())) as f64 / 16.0;
                        acc += w * r[k as usize];
                    }
                }
            }
            // Coarse rows are scaled by their own diagonal at spacing 2·res.
            4.0 * acc / row.diag
        })
        .collect();
    let ec = v_cycle(levels, l + 1, &rc);
    // Bilinear prolongation; coarse nodes outside the domain carry zero.
    let corr: Vec<f64> = level
        .nodes
        .par_iter()
        .with_min_len(1024)
        .map(|&(i, j)| {
            let (qi, ri) = (i.div_euclid(2), i.rem_euclid(2));
            let (qj, rj) = (j.div_euclid(2), j.rem_euclid(2));
            let mut acc = 0.0;
            for a in 0..=ri {
                for bb in 0..=rj {
                    let k = coarse.lookup(qi + a, qj + bb);
                    if k != NONE {
                        acc += ec[k as usize];
                    }
                }
            }
            acc / ((1 + ri) * (1 + rj)) as f64
        })
        .collect();
    // Pinned rows are restored by the post-smoother.
    for (u, c) in u.iter_mut().zip(corr) {
        *u += c;
    }
    smooth(level, b, &mut u, SMOOTH_SWEEPS);
    u
}

/// Dot product with a fixed reduction order, independent of thread count.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let parts: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    parts.iter().sum()
}

/// `y ← y + a·x`.
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().with_min_len(CHUNK).zip(x.par_iter()).for_each(|(y, x)| *y += a * x);
}

/// Right-preconditioned BiCGSTAB on the finest level; returns the
/// solution, the true relative residual and the iteration count.
fn bicgstab(levels: &[Level], b: &[f64]) -> (Vec<f64>, f64, usize) {
    let rows = &levels[0].rows;
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return (x, 0.0, 0);
    }
    let precond = |v: &[f64]| v_cycle(levels, 0, v);
    let mut r = b.to_vec();
    let mut iterations = 0;
    let mut tmp = vec![0.0; n];
    // Restart from the true residual whenever the recursion stalls.
    while iterations < SOLVER_MAX_ITER {
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut t = vec![0.0; n];
        while iterations < SOLVER_MAX_ITER {
            iterations += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new == 0.0 || omega == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            p.par_iter_mut()
                .with_min_len(CHUNK)
                .zip(r.par_iter().zip(v.par_iter()))
                .for_each(|(p, (r, v))| *p = r + beta * (*p - omega * v));
            let y = precond(&p);
            apply(rows, &y, &mut v);
            let denom = dot(&r_hat, &v);
            if denom == 0.0 {
                break;
            }
            alpha = rho / denom;
            s.par_iter_mut()
                .with_min_len(CHUNK)
                .zip(r.par_iter().zip(v.par_iter()))
                .for_each(|(s, (r, v))| *s = r - alpha * v);
            let z = precond(&s);
            apply(rows, &z, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            axpy(alpha, &y, &mut x);
            axpy(omega, &z, &mut x);
            r.par_iter_mut()
                .with_min_len(CHUNK)
                .zip(s.par_iter().zip(t.par_iter()))
                .for_each(|(r, (s, t))| *r = s - omega * t);
            if dot(&r, &r).sqrt() < 0.5 * SOLVER_TOL * bnorm {
                break;
            }
        }
        apply(rows, &x, &mut tmp);
        r.par_iter_mut()
            .with_min_len(CHUNK)
            .zip(b.par_iter().zip(tmp.par_iter()))
            .for_each(|(r, (b, ax))| *r = b - ax);
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel < SOLVER_TOL {
            return (x, rel, iterations);
        }
    }
    let rel = dot(&r, &r).sqrt() / bnorm;
    (x, rel, iterations)
}

/// `|h_z| + |h_z̄|` at nodes with all four neighbors.
pub fn gradient_norm(f: &GridField) -> Vec<Option<f64>> {
    (0..f.node_count())
        .into_par_iter()
        .with_min_len(1024)
        .map(|n| f.partials(n).map(operator_norm))
        .collect()
}

/// Operator norm of `[[a, c], [b, d]]` given as `[h1_x, h2_x, h1_y, h2_y]`.
pub fn operator_norm([a, b, c, d]: [f64; 4]) -> f64 {
    let hz = 0.5 * (a + d).hypot(b - c);
    let hzbar = 0.5 * (a - d).hypot(b + c);
    hz + hzbar
}

/// A functional with an optional per-piece breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub functional: String,
    pub value: f64,
    /// `(k, value)` for each cusp piece.
    pub per_piece: Vec<(usize, f64)>,
    pub resolution: f64,
    pub s: Option<f64>,
    pub lambda: Option<f64>,
    /// Nodes closer than this to the boundary are excluded.
    pub collar: f64,
    pub cells: usize,
}

impl EnergyReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["functional", "piece", "value", "resolution", "collar", "cells"]);
        t.push(vec![
            self.functional.as_str().into(),
            "total".into(),
            self.value.into(),
            self.resolution.into(),
            self.collar.into(),
            self.cells.into(),
        ]);
        for &(k, v) in &self.per_piece {
            t.push(vec![
                self.functional.as_str().into(),
                Cell::Int(k as i64),
                v.into(),
                self.resolution.into(),
                self.collar.into(),
                Cell::Text(String::new()),
            ]);
        }
        t
    }
}

fn energy_sum(
    f: &GridField,
    grad: &[Option<f64>],
    partition: Option<&CuspPartition>,
    density: impl Fn(f64, f64) -> f64 + Sync,
) -> (f64, Vec<(usize, f64)>, usize) {
    let collar = 2.0 * f.res;
    let cell = f.res * f.res;
    let mut total = 0.0;
    let mut cells = 0;
    let mut pieces: Vec<(usize, f64)> = partition
        .map(|p| p.pieces.iter().map(|pc| (pc.k, 0.0)).collect())
        .unwrap_or_default();
    let values: Vec<Option<f64>> = (0..f.node_count())
        .into_par_iter()
        .with_min_len(1024)
        .map(|n| match grad[n] {
            Some(g) if f.d_boundary[n] >= collar => Some(density(g, f.d_boundary[n]) * cell),
            _ => None,
        })
        .collect();
    for (n, v) in values.iter().enumerate() {
        let Some(v) = *v else { continue };
        total += v;
        cells += 1;
        if let Some(part) = partition {
            if let Some(k) = part.piece_of(f.position(n).y) {
                if let Some(slot) = pieces.iter_mut().find(|e| e.0 == k) {
                    slot.1 += v;
                }
            }
        }
    }
    (total, pieces, cells)
}

/// `Σ Φ(|Dh|)·res²` over nodes outside the collar.
pub fn orlicz_energy(
    f: &GridField,
    grad: &[Option<f64>],
    phi: &YoungPhi,
    partition: Option<&CuspPartition>,
) -> EnergyReport {
    let (value, per_piece, cells) = energy_sum(f, grad, partition, |g, _| phi_eval(phi, g));
    EnergyReport {
        functional: "orlicz".into(),
        value,
        per_piece,
        resolution: f.res,
        s: None,
        lambda: Some(phi.lambda),
        collar: 2.0 * f.res,
        cells,
    }
}

/// `Σ Ψ(|Dh|)·res²` over nodes outside the collar, for iterated-log modulars.
pub fn modular_energy(
    f: &GridField,
    grad: &[Option<f64>],
    modular: &IteratedPsi,
    partition: Option<&CuspPartition>,
) -> EnergyReport {
    let (value, per_piece, cells) = energy_sum(f, grad, partition, |g, _| psi_eval(modular, g));
    EnergyReport {
        functional: "modular".into(),
        value,
        per_piece,
        resolution: f.res,
        s: Some(modular.a - 1.0),
        lambda: modular.sigma.first().copied(),
        collar: 2.0 * f.res,
        cells,
    }
}

/// `Σ |Dh|^{1+s} Ψ(1/d)·res²` over nodes outside the collar.
pub fn weighted_energy(
    f: &GridField,
    grad: &[Option<f64>],
    s: f64,
    weight: &IteratedPsi,
    partition: Option<&CuspPartition>,
) -> EnergyReport {
    let (value, per_piece, cells) =
        energy_sum(f, grad, partition, |g, d| g.powf(1.0 + s) * psi_eval(weight, 1.0 / d));
    EnergyReport {
        functional: "weighted".into(),
        value,
        per_piece,
        resolution: f.res,
        s: Some(s),
        lambda: weight.sigma.first().copied(),
        collar: 2.0 * f.res,
        cells,
    }
}

/// `log^λ(e + 1/d)` as a one-factor weight.
pub fn log_weight(lambda: f64) -> IteratedPsi {
    IteratedPsi {
        a: 0.0,
        sigma: vec![lambda],
    }
}
