//! Cusp counterexamples: graph-cusp domains sliced into pieces `S_k`, the
//! piecewise constant-speed boundary maps onto the circle, per-piece audits
//! of the flux, Jensen and Hölder lower bounds, and the critical series.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{CuspModel, CuspPartition, Domain, DomainSpec, Point2};
use crate::harmonic::{gradient_norm, BoundaryMap, GridField};
use crate::orlicz::{is_young, iterated_exp, iterated_log, psi_eval, IteratedPsi};
use crate::quadrature::{fit_against, ModelFit, Verdict};
use crate::report::{Cell, Table};
use crate::{Error, Result};

/// Largest admissible target gap; chords must stay inside the diameter.
pub const GAP_CAP: f64 = 1.9;
/// A piece is resolved when it spans at least this many lattice rows …
pub const MIN_ROWS: usize = 3;
/// … each holding at least this many audit cells.
pub const MIN_ROW_CELLS: usize = 4;
/// Smallest `k` entering trend fits.
pub const TREND_MIN_K: usize = 3;
/// Deepest admissible `n` for the iterated-log example (`e_{n+1}` finite).
pub const MAX_EXAMPLE_DEPTH: usize = 2;

/// The two cusp constructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Example {
    /// Boundary graph `y = |x|^s`.
    PowerCusp { s: f64 },
    /// Boundary graph `y = Ψ_{−s,σ}(1/|x|)` with `n = σ.len()` factors.
    IteratedLogCusp { s: f64, sigma: Vec<f64> },
}

impl Example {
    pub fn s(&self) -> f64 {
        match self {
            Example::PowerCusp { s } | Example::IteratedLogCusp { s, .. } => *s,
        }
    }

    /// Number of logarithmic exponents in `λ`.
    pub fn depth(&self) -> usize {
        match self {
            Example::PowerCusp { .. } => 1,
            Example::IteratedLogCusp { sigma, .. } => sigma.len(),
        }
    }

    pub fn domain_spec(&self) -> DomainSpec {
        match self {
            Example::PowerCusp { s } => DomainSpec::PowerCusp {
                s: *s,
                model: CuspModel::Graph,
            },
            Example::IteratedLogCusp { s, sigma } => DomainSpec::IteratedLogCusp {
                s: *s,
                sigma: sigma.clone(),
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let s = self.s();
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParameter(format!("need 0 < s < 1, got {s}")));
        }
        if let Example::IteratedLogCusp { sigma, .. } = self {
            if sigma.is_empty() || sigma.len() > MAX_EXAMPLE_DEPTH {
                return Err(Error::InvalidParameter(format!(
                    "iterated-log example needs 1..={MAX_EXAMPLE_DEPTH} exponents, got {}",
                    sigma.len()
                )));
            }
        }
        Ok(())
    }

    /// Raw gap formula; NaN where it is undefined.
    pub fn gap_formula(&self, k: usize) -> f64 {
        let kf = k as f64;
        let e = -1.0 / (1.0 + self.s());
        let base = match self {
            Example::PowerCusp { .. } => (1.0 + kf).ln().ln(),
            Example::IteratedLogCusp { sigma, .. } => {
                let n = sigma.len() + 1;
                iterated_log(n, iterated_exp(n) + kf)
            }
        };
        if base > 0.0 {
            base.powf(e)
        } else {
            f64::NAN
        }
    }

    fn check_lambda(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.depth() || lambda.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need {} finite log exponents, got {:?}",
                self.depth(),
                lambda
            )));
        }
        Ok(())
    }

    /// Orlicz modular `Ψ_{1+s,λ}`.
    pub fn modular(&self, lambda: &[f64]) -> Result<IteratedPsi> {
        self.check_lambda(lambda)?;
        IteratedPsi::new(1.0 + self.s(), lambda.to_vec())
    }

    /// Distance weight `Ψ_{0,λ}(1/d)` of the weighted energy.
    pub fn weight(&self, lambda: &[f64]) -> Result<IteratedPsi> {
        self.check_lambda(lambda)?;
        IteratedPsi::new(0.0, lambda.to_vec())
    }

    /// Hölder conjugate weight `Ψ_{0,−λ/s}`.
    pub fn conjugate_weight(&self, lambda: &[f64]) -> Result<IteratedPsi> {
        self.check_lambda(lambda)?;
        let s = self.s();
        IteratedPsi::new(0.0, lambda.iter().map(|l| -l / s).collect())
    }

    /// Asymptotic class of the critical per-piece terms at `λ`.
    pub fn series_class(&self, lambda: &[f64]) -> Result<LogSeriesClass> {
        self.check_lambda(lambda)?;
        let mut powers: Vec<f64> = match self {
            Example::PowerCusp { .. } => vec![-lambda[0]],
            Example::IteratedLogCusp { sigma, .. } => {
                sigma.iter().zip(lambda).map(|(s, l)| -(s + l)).collect()
            }
        };
        powers.push(1.0);
        Ok(LogSeriesClass { powers })
    }

    /// Series term of the audit table: `1/(k log k log log k)` for the
    /// power cusp (NaN below `k = 3`), the offset-log analogue otherwise.
    pub fn series_term(&self, k: usize) -> f64 {
        match self {
            Example::PowerCusp { .. } => SeriesModel::Critical.term(k),
            Example::IteratedLogCusp { sigma, .. } => {
                SeriesModel::IteratedCritical { n: sigma.len() }.term(k)
            }
        }
    }
}

/// Terms `1/k · Π log_(i)^{−q_i}(k)`; the integral test decides finiteness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSeriesClass {
    pub powers: Vec<f64>,
}

impl LogSeriesClass {
    /// Finite iff the first power differing from 1 exceeds 1.
    pub fn is_finite(&self) -> bool {
        for &q in &self.powers {
            if (q - 1.0).abs() > 1e-12 {
                return q > 1.0;
            }
        }
        false
    }
}

/// Circle points `a^±_k = (√(1 − (d_k/2)²), ±d_k/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetArcs {
    /// `gaps[k-1] = d_k`.
    pub gaps: Vec<f64>,
    /// `angles[k-1]`: polar angle of `a⁺_k`; `a⁻_k` sits at its negative.
    pub angles: Vec<f64>,
    /// First index from which the raw formula is used.
    pub formula_from: usize,
}

impl TargetArcs {
    /// Formula gaps from the first index after which they stay below
    /// [`GAP_CAP`]; earlier gaps interpolate linearly down from the cap.
    pub fn new(example: &Example, k_max: usize) -> Result<Self> {
        example.validate()?;
        let ok = |g: f64| g.is_finite() && g > 0.0 && g < GAP_CAP;
        let mut k0 = 1;
        while !ok(example.gap_formula(k0)) {
            k0 += 1;
            if k0 > 1_000_000 {
                return Err(Error::InvalidParameter("gap formula never drops below the cap".into()));
            }
        }
        let g0 = example.gap_formula(k0);
        let gaps: Vec<f64> = (1..=k_max)
            .map(|k| {
                if k >= k0 {
                    example.gap_formula(k)
                } else {
                    GAP_CAP + (g0 - GAP_CAP) * (k - 1) as f64 / (k0 - 1) as f64
                }
            })
            .collect();
        if gaps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidParameter("target gaps are not strictly decreasing".into()));
        }
        let angles = gaps.iter().map(|d| (0.5 * d).asin()).collect();
        Ok(Self {
            gaps,
            angles,
            formula_from: k0,
        })
    }

    pub fn gap(&self, k: usize) -> f64 {
        self.gaps[k - 1]
    }

    pub fn angle(&self, k: usize) -> f64 {
        self.angles[k - 1]
    }

    pub fn upper(&self, k: usize) -> Point2 {
        let a = self.angle(k);
        Point2::new(a.cos(), a.sin())
    }

    pub fn lower(&self, k: usize) -> Point2 {
        let a = self.angle(k);
        Point2::new(a.cos(), -a.sin())
    }
}

/// Everything [`build_example`] produces.
#[derive(Debug, Clone)]
pub struct BuiltExample {
    pub example: Example,
    pub spec: DomainSpec,
    pub domain: Domain,
    pub map: BoundaryMap,
    pub partition: CuspPartition,
    pub arcs: TargetArcs,
}

/// Cusp domain, its partition into `S_2 … S_K` and the boundary map.
///
/// The right wall arc `p⁺_k p⁺_{k−1}` goes to the upper circle arc
/// `a⁺_k a⁺_{k−1}` and the left wall arc to the lower one, each at constant
/// speed; the tip goes to `1`, and the rest of the boundary (above `p^±_1`)
/// goes at constant speed onto the arc through `−1`.
pub fn build_example(example: &Example, k_max: usize) -> Result<BuiltExample> {
    example.validate()?;
    if k_max < 3 {
        return Err(Error::InvalidParameter(format!("need K >= 3, got {k_max}")));
    }
    let spec = example.domain_spec();
    let domain = Domain::new(spec.clone())?;
    let partition = domain.cusp_pieces(k_max)?;
    let arcs = TargetArcs::new(example, k_max)?;
    let profile = domain
        .profile()
        .ok_or_else(|| Error::InvalidParameter("example domain has no cusp profile".into()))?;
    let boundary = domain.boundary();
    let total = boundary.total_length();
    let x_at = |k: usize| profile.inverse(partition.levels[k - 1]);
    let mut samples = vec![(0.0, 0.0)];
    for k in (1..=k_max).rev() {
        samples.push((boundary.arclength_of(0, x_at(k)) / total, arcs.angle(k)));
    }
    for k in 1..=k_max {
        samples.push((
            boundary.arclength_of(2, 1.0 - x_at(k)) / total,
            2.0 * PI - arcs.angle(k),
        ));
    }
    let map = BoundaryMap::new(samples)?;
    Ok(BuiltExample {
        example: example.clone(),
        spec,
        domain,
        map,
        partition,
        arcs,
    })
}

/// Convex minorant of a modular: the modular itself from `knee` on, its
/// tangent there (clipped at 0) below.
#[derive(Debug, Clone)]
pub struct ConvexMinorant {
    pub psi: IteratedPsi,
    pub knee: f64,
    value: f64,
    slope: f64,
}

impl ConvexMinorant {
    /// The knee is the first point at or beyond the convexity threshold of
    /// [`is_young`] whose tangent stays below the modular on `[0, knee]`.
    pub fn new(psi: &IteratedPsi) -> Result<Self> {
        let report = is_young(psi);
        let Some(t0) = report.convex_from else {
            return Err(Error::InvalidParameter("modular is never convex".into()));
        };
        if t0 <= 1e-12 {
            return Ok(Self {
                psi: psi.clone(),
                knee: 0.0,
                value: 0.0,
                slope: 0.0,
            });
        }
        let f = |t: f64| psi_eval(psi, t);
        let mut knee = t0;
        for _ in 0..400 {
            let h = 1e-6 * knee;
            let slope = (f(knee + h) - f(knee - h)) / (2.0 * h);
            let value = f(knee);
            let below = (0..=4000).all(|i| {
                let t = knee * i as f64 / 4000.0;
                (value + slope * (t - knee)).max(0.0) <= f(t) * (1.0 + 1e-12) + 1e-300
            });
            if below {
                return Ok(Self {
                    psi: psi.clone(),
                    knee,
                    value,
                    slope,
                });
            }
            knee *= 1.05;
        }
        Err(Error::InvalidParameter("no tangent minorant found".into()))
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t >= self.knee {
            psi_eval(&self.psi, t)
        } else {
            (self.value + self.slope * (t - self.knee)).max(0.0)
        }
    }
}

/// Audit of one piece `S_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceAudit {
    pub k: usize,
    pub resolved: bool,
    pub rows: usize,
    /// Fewest audit cells in any row of the piece.
    pub min_row_cells: usize,
    /// Row sums of `|∂h/∂x|·res²` over every piece node with a gradient.
    pub flux: f64,
    /// `ε_k·d_k`.
    pub flux_lower: f64,
    /// Interior node count times `res²`.
    pub area: f64,
    pub area_exact: f64,
    pub area_model: f64,
    /// Half-width of the cusp at the piece's lower cut.
    pub half_width: f64,
    /// Nodes with a gradient outside the collar `d ≥ 2·res`.
    pub audit_cells: usize,
    pub audit_area: f64,
    /// `Σ |Dh|·res²` over the audit cells.
    pub dh_integral: f64,
    /// `|A|·Φ̃(∫|Dh|/|A|)` over the audit cells, `Φ̃` a convex minorant of `Φ`.
    pub jensen: f64,
    /// `(∫|Dh|)^{1+s}·(∫ Ψ_{0,−λ/s}(1/d))^{−s}` over the audit cells.
    pub holder: f64,
    pub orlicz_energy: f64,
    pub weighted_energy: f64,
    /// `∫ Ψ_{0,−λ/s}(1/d)` over the audit cells.
    pub weight_integral: f64,
    /// `k^{−2−1/s}·Ψ_{0,−λ/s}(k)`.
    pub weight_model: f64,
    pub series_term: f64,
    /// `(|Dh|, d)` per audit cell, in node order.
    #[serde(skip)]
    pub cells: Vec<(f64, f64)>,
}

#[derive(Default)]
struct Bucket {
    nodes: usize,
    flux: f64,
    rows: BTreeMap<i64, usize>,
    cells: Vec<(f64, f64)>,
}

/// Per-piece `(dh_integral, jensen, holder, orlicz, weighted, weight_integral)`.
fn piece_terms(
    cells: &[(f64, f64)],
    cell_area: f64,
    s: f64,
    minorant: &ConvexMinorant,
    weight: &IteratedPsi,
    conjugate: &IteratedPsi,
) -> [f64; 6] {
    let area = cells.len() as f64 * cell_area;
    let (mut dh, mut orl, mut wgt, mut wint) = (0.0, 0.0, 0.0, 0.0);
    for &(g, d) in cells {
        dh += g * cell_area;
        orl += psi_eval(&minorant.psi, g) * cell_area;
        wgt += g.powf(1.0 + s) * psi_eval(weight, 1.0 / d) * cell_area;
        wint += psi_eval(conjugate, 1.0 / d) * cell_area;
    }
    let jensen = if area > 0.0 { area * minorant.eval(dh / area) } else { 0.0 };
    let holder = if wint > 0.0 { dh.powf(1.0 + s) * wint.powf(-s) } else { 0.0 };
    [dh, jensen, holder, orl, wgt, wint]
}

/// Audits every piece of `built` on a solved field at exponents `λ`.
pub fn audit_pieces(f: &GridField, built: &BuiltExample, lambda: &[f64]) -> Result<Vec<PieceAudit>> {
    let ex = &built.example;
    let s = ex.s();
    let minorant = ConvexMinorant::new(&ex.modular(lambda)?)?;
    let weight = ex.weight(lambda)?;
    let conjugate = ex.conjugate_weight(lambda)?;
    let part = &built.partition;
    let profile = built
        .domain
        .profile()
        .ok_or_else(|| Error::InvalidParameter("example domain has no cusp profile".into()))?;
    let grad = gradient_norm(f);
    let cell_area = f.res * f.res;
    let collar = 2.0 * f.res;
    let mut buckets: BTreeMap<usize, Bucket> = part.pieces.iter().map(|p| (p.k, Bucket::default())).collect();
    for n in 0..f.node_count() {
        let Some(k) = part.piece_of(f.position(n).y) else { continue };
        let b = buckets.get_mut(&k).expect("piece bucket");
        b.nodes += 1;
        let row = b.rows.entry(f.nodes[n].1).or_insert(0);
        if let Some([h1x, h2x, _, _]) = f.partials(n) {
            b.flux += h1x.hypot(h2x) * cell_area;
        }
        if let Some(g) = grad[n] {
            if f.d_boundary[n] >= collar {
                *row += 1;
                b.cells.push((g, f.d_boundary[n]));
            }
        }
    }
    let mut out = Vec::with_capacity(part.pieces.len());
    for piece in &part.pieces {
        let k = piece.k;
        let b = buckets.remove(&k).unwrap_or_default();
        let rows = b.rows.len();
        let min_row_cells = b.rows.values().copied().min().unwrap_or(0);
        let [dh_integral, jensen, holder, orlicz_energy, weighted_energy, weight_integral] =
            piece_terms(&b.cells, cell_area, s, &minorant, &weight, &conjugate);
        let kf = k as f64;
        out.push(PieceAudit {
            k,
            resolved: rows >= MIN_ROWS && min_row_cells >= MIN_ROW_CELLS,
            rows,
            min_row_cells,
            flux: b.flux,
            flux_lower: part.eps(k) * built.arcs.gap(k),
            area: b.nodes as f64 * cell_area,
            area_exact: piece.area,
            area_model: piece.area_model,
            half_width: profile.inverse(piece.y_lo),
            audit_cells: b.cells.len(),
            audit_area: b.cells.len() as f64 * cell_area,
            dh_integral,
            jensen,
            holder,
            orlicz_energy,
            weighted_energy,
            weight_integral,
            weight_model: kf.powf(-2.0 - 1.0 / s) * psi_eval(&conjugate, kf),
            series_term: ex.series_term(k),
            cells: b.cells,
        });
    }
    Ok(out)
}

/// Largest `k` such that every piece up to it is resolved.
pub fn largest_resolved(audits: &[PieceAudit]) -> Option<usize> {
    audits.iter().take_while(|a| a.resolved).last().map(|a| a.k)
}

/// Least-squares slope of `log area` against `log k` over resolved pieces
/// with `k ≥ k_min`.
pub fn area_exponent(audits: &[PieceAudit], k_min: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = audits
        .iter()
        .filter(|a| a.resolved && a.k >= k_min && a.area > 0.0)
        .map(|a| ((a.k as f64).ln(), a.area.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// CSV: `k, flux, eps_k_d_k, area, model, jensen, holder, series_term`,
/// followed by diagnostics.
pub fn audit_table(audits: &[PieceAudit]) -> Table {
    let mut t = Table::new(&[
        "k",
        "flux",
        "eps_k_d_k",
        "area",
        "model",
        "jensen",
        "holder",
        "series_term",
        "resolved",
        "area_exact",
        "dh_integral",
        "orlicz_energy",
        "weighted_energy",
        "weight_integral",
        "weight_model",
    ]);
    for a in audits {
        t.push(vec![
            a.k.into(),
            a.flux.into(),
            a.flux_lower.into(),
            a.area.into(),
            a.area_model.into(),
            a.jensen.into(),
            a.holder.into(),
            a.series_term.into(),
            Cell::Int(a.resolved as i64),
            a.area_exact.into(),
            a.dh_integral.into(),
            a.orlicz_energy.into(),
            a.weighted_energy.into(),
            a.weight_integral.into(),
            a.weight_model.into(),
        ]);
    }
    t
}

/// Running sums and trend verdicts at one `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub lambda: Vec<f64>,
    pub ks: Vec<usize>,
    pub jensen: Vec<f64>,
    pub holder: Vec<f64>,
    pub orlicz_energy: Vec<f64>,
    pub weighted_energy: Vec<f64>,
    pub jensen_running: Vec<f64>,
    pub holder_running: Vec<f64>,
    /// Analytic terms `|S_k|·Φ(ε_k d_k/|S_k|)`.
    pub jensen_model: Vec<f64>,
    /// Analytic terms `(ε_k d_k)^{1+s}·(|S_k|·Ψ_{0,−λ/s}(1/w_k))^{−s}`.
    pub holder_model: Vec<f64>,
    pub class: LogSeriesClass,
    pub jensen_fit: Option<ModelFit>,
    pub holder_fit: Option<ModelFit>,
    pub orlicz_verdict: Verdict,
    pub weighted_verdict: Verdict,
}

fn running(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

fn trend(ks: &[usize], measured: &[f64], model: &[f64], finite: bool) -> (Option<ModelFit>, Verdict) {
    if ks.len() < 3 || measured.iter().chain(model).any(|v| !(v.is_finite() && *v > 0.0)) {
        return (None, Verdict::Inconclusive);
    }
    let pts: Vec<(usize, f64)> = ks.iter().copied().zip(measured.iter().copied()).collect();
    let fit = fit_against(&pts, model, finite);
    let verdict = match (fit.agrees, finite) {
        (true, true) => Verdict::Convergent,
        (true, false) => Verdict::Divergent,
        _ => Verdict::Inconclusive,
    };
    (Some(fit), verdict)
}

/// For each `λ`, recomputes the Jensen and Hölder terms on the resolved
/// pieces with `k ≥ TREND_MIN_K`, fits them against the analytic per-piece
/// terms and takes the verdict of that model's integral test when the fitted
/// exponent agrees with 1.
pub fn divergence_demo(audits: &[PieceAudit], example: &Example, lambdas: &[Vec<f64>], res: f64) -> Result<Vec<TrendReport>> {
    let s = example.s();
    let cell_area = res * res;
    let used: Vec<&PieceAudit> = audits.iter().filter(|a| a.resolved && a.k >= TREND_MIN_K).collect();
    let ks: Vec<usize> = used.iter().map(|a| a.k).collect();
    let mut out = Vec::with_capacity(lambdas.len());
    for lambda in lambdas {
        let modular = example.modular(lambda)?;
        let minorant = ConvexMinorant::new(&modular)?;
        let weight = example.weight(lambda)?;
        let conjugate = example.conjugate_weight(lambda)?;
        let class = example.series_class(lambda)?;
        let finite = class.is_finite();
        let (mut jensen, mut holder, mut orl, mut wgt, mut jm, mut hm) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for a in &used {
            let t = piece_terms(&a.cells, cell_area, s, &minorant, &weight, &conjugate);
            jensen.push(t[1]);
            holder.push(t[2]);
            orl.push(t[3]);
            wgt.push(t[4]);
            let area = a.area_exact;
            jm.push(area * psi_eval(&modular, a.flux_lower / area));
            let wint = area * psi_eval(&conjugate, 1.0 / a.half_width);
            hm.push(a.flux_lower.powf(1.0 + s) * wint.powf(-s));
        }
        let (jensen_fit, orlicz_verdict) = trend(&ks, &jensen, &jm, finite);
        let (holder_fit, weighted_verdict) = trend(&ks, &holder, &hm, finite);
        out.push(TrendReport {
            lambda: lambda.clone(),
            ks: ks.clone(),
            jensen_running: running(&jensen),
            holder_running: running(&holder),
            jensen,
            holder,
            orlicz_energy: orl,
            weighted_energy: wgt,
            jensen_model: jm,
            holder_model: hm,
            class,
            jensen_fit,
            holder_fit,
            orlicz_verdict,
            weighted_verdict,
        });
    }
    Ok(out)
}

/// CSV of all trend reports: `lambda, k, jensen, jensen_running, jensen_model,
/// holder, holder_running, holder_model, orlicz_verdict, weighted_verdict`.
pub fn trend_table(reports: &[TrendReport]) -> Table {
    let mut t = Table::new(&[
        "lambda",
        "k",
        "jensen",
        "jensen_running",
        "jensen_model",
        "holder",
        "holder_running",
        "holder_model",
        "orlicz_verdict",
        "weighted_verdict",
    ]);
    for r in reports {
        let lam = r
            .lambda
            .iter()
            .map(|v| crate::report::format_real(*v))
            .collect::<Vec<_>>()
            .join(";");
        for i in 0..r.ks.len() {
            t.push(vec![
                lam.clone().into(),
                r.ks[i].into(),
                r.jensen[i].into(),
                r.jensen_running[i].into(),
                r.jensen_model[i].into(),
                r.holder[i].into(),
                r.holder_running[i].into(),
                r.holder_model[i].into(),
                r.orlicz_verdict.to_string().into(),
                r.weighted_verdict.to_string().into(),
            ]);
        }
    }
    t
}

/// Series whose partial sums are tracked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "series", rename_all = "snake_case")]
pub enum SeriesModel {
    /// `1/(k log k log log k)` from `k = 3`.
    Critical,
    /// `1/(k log^p k)` from `k = 2`, `p > 1`.
    Control { power: f64 },
    /// `1/(k Π_{i ≤ n+1} log_(i)(e_i + k))` from `k = 1`.
    IteratedCritical { n: usize },
}

impl SeriesModel {
    pub fn first_k(&self) -> usize {
        match self {
            SeriesModel::Critical => 3,
            SeriesModel::Control { .. } => 2,
            SeriesModel::IteratedCritical { .. } => 1,
        }
    }

    /// Term at `k`; NaN below [`Self::first_k`].
    pub fn term(&self, k: usize) -> f64 {
        if k < self.first_k() {
            return f64::NAN;
        }
        let kf = k as f64;
        match *self {
            SeriesModel::Critical => 1.0 / (kf * kf.ln() * kf.ln().ln()),
            SeriesModel::Control { power } => 1.0 / (kf * kf.ln().powf(power)),
            SeriesModel::IteratedCritical { n } => {
                let prod: f64 = (1..=n + 1).map(|i| iterated_log(i, iterated_exp(i) + kf)).product();
                1.0 / (kf * prod)
            }
        }
    }

    /// Antiderivative of the term, defining the companion model.
    pub fn model(&self, k: f64) -> f64 {
        match *self {
            SeriesModel::Critical => k.ln().ln().ln(),
            SeriesModel::Control { power } => -k.ln().powf(1.0 - power) / (power - 1.0),
            SeriesModel::IteratedCritical { n } => iterated_log(n + 1, iterated_exp(n + 1) + k).ln(),
        }
    }

    /// `∫_K^∞` of the term, when finite.
    pub fn tail_integral(&self, k: f64) -> Option<f64> {
        match *self {
            SeriesModel::Control { power } => Some(k.ln().powf(1.0 - power) / (power - 1.0)),
            _ => None,
        }
    }
}

/// One checkpoint of a partial-sum run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub k: usize,
    pub partial_sum: f64,
    pub model: f64,
    /// `partial_sum − model`.
    pub offset: f64,
    /// Tail-corrected limit `S_k + ∫_k^∞ − term(k)/2`; NaN for divergent series.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub model: SeriesModel,
    pub k_max: usize,
    /// Checkpoints at the powers of two and at `k_max`.
    pub checkpoints: Vec<SeriesPoint>,
}

impl SeriesReport {
    /// `max − min` of the offsets over checkpoints with `k ≥ from_k`.
    pub fn offset_bracket(&self, from_k: usize) -> f64 {
        let offs = self.checkpoints.iter().filter(|p| p.k >= from_k).map(|p| p.offset);
        let (lo, hi) = offs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        hi - lo
    }

    /// `(K, (S_{2K} − S_K)/(S_K − S_{K/2}))` over consecutive powers of two.
    pub fn doubling_ratios(&self) -> Vec<(usize, f64)> {
        let pow: Vec<&SeriesPoint> = self.checkpoints.iter().filter(|p| p.k.is_power_of_two()).collect();
        pow.windows(3)
            .map(|w| {
                let num = w[2].partial_sum - w[1].partial_sum;
                let den = w[1].partial_sum - w[0].partial_sum;
                (w[1].k, num / den)
            })
            .collect()
    }

    /// `|L(K) − L(K')|` for the last checkpoint `K` and the last power of
    /// two `K' ≤ K/2`.
    pub fn limit_drift(&self) -> f64 {
        let Some(last) = self.checkpoints.last() else { return f64::NAN };
        let prev = self
            .checkpoints
            .iter()
            .filter(|p| p.k.is_power_of_two() && 2 * p.k <= last.k)
            .last();
        prev.map_or(f64::NAN, |p| (last.limit - p.limit).abs())
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["k", "partial_sum", "model", "offset", "limit"]);
        for p in &self.checkpoints {
            t.push(vec![
                p.k.into(),
                p.partial_sum.into(),
                p.model.into(),
                p.offset.into(),
                p.limit.into(),
            ]);
        }
        t
    }
}

/// Compensated partial sums up to `k_max`, recorded at checkpoints.
pub fn series_partial_sums(model: SeriesModel, k_max: usize) -> Result<SeriesReport> {
    if k_max < 10 {
        return Err(Error::InvalidParameter(format!("need K >= 10, got {k_max}")));
    }
    if let SeriesModel::Control { power } = model {
        if !(power > 1.0) {
            return Err(Error::InvalidParameter("control power must exceed 1".into()));
        }
    }
    if let SeriesModel::IteratedCritical { n } = model {
        if n == 0 || n > MAX_EXAMPLE_DEPTH {
            return Err(Error::InvalidParameter(format!("need 1 <= n <= {MAX_EXAMPLE_DEPTH}")));
        }
    }
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut checkpoints = Vec::new();
    for k in model.first_k()..=k_max {
        let term = model.term(k);
        let t = sum + term;
        comp += if sum.abs() >= term.abs() { (sum - t) + term } else { (term - t) + sum };
        sum = t;
        if k.is_power_of_two() || k == k_max {
            let s = sum + comp;
            let kf = k as f64;
            let m = model.model(kf);
            let limit = model.tail_integral(kf).map_or(f64::NAN, |tail| s + tail - 0.5 * term);
            checkpoints.push(SeriesPoint {
                k,
                partial_sum: s,
                model: m,
                offset: s - m,
                limit,
            });
        }
    }
    Ok(SeriesReport {
        model,
        k_max,
        checkpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic::solve_harmonic_dirichlet;

    fn half() -> Example {
        Example::PowerCusp { s: 0.5 }
    }

    #[test]
    fn partition_eps_for_five_pieces() {
        let b = build_example(&half(), 5).unwrap();
        for k in 2..=5 {
            assert_eq!(b.partition.eps(k), 1.0 / (k * k) as f64);
        }
        assert_eq!(b.partition.pieces.len(), 4);
    }

    #[test]
    fn gap_formula_by_substitution() {
        let d2 = (3.0f64.ln().ln()).powf(-2.0 / 3.0);
        assert!((half().gap_formula(2) - d2).abs() < 1e-14);
        assert!(half().gap_formula(1).is_nan());
    }

    #[test]
    fn gaps_decrease_and_chords_match() {
        for ex in [half(), Example::PowerCusp { s: 0.25 }, Example::IteratedLogCusp { s: 0.5, sigma: vec![1.0] }] {
            let arcs = TargetArcs::new(&ex, 40).unwrap();
            assert!(arcs.gaps[0] <= GAP_CAP);
            for k in 1..=40 {
                let (u, l) = (arcs.upper(k), arcs.lower(k));
                assert!((u.y - l.y - arcs.gap(k)).abs() < 1e-12);
                assert!((u.x - l.x).abs() < 1e-15);
                if k >= arcs.formula_from {
                    assert_eq!(arcs.gap(k), ex.gap_formula(k));
                }
            }
        }
        assert_eq!(TargetArcs::new(&half(), 10).unwrap().formula_from, 4);
    }

    #[test]
    fn boundary_map_is_increasing() {
        let b = build_example(&half(), 8).unwrap();
        let s = b.map.samples();
        assert!(s.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1));
        assert!(s.last().unwrap().1 - s[0].1 < 2.0 * PI);
        // p⁺_k lands on a⁺_k.
        let total = b.domain.boundary().total_length();
        let x = b.domain.profile().unwrap().inverse(b.partition.levels[4]);
        let u = b.domain.boundary().arclength_of(0, x) / total;
        assert!((b.map.angle_at(u) - b.arcs.angle(5)).abs() < 1e-12);
    }

    #[test]
    fn small_k_rejected() {
        assert!(build_example(&half(), 2).is_err());
        assert!(build_example(&Example::PowerCusp { s: 1.0 }, 5).is_err());
        assert!(TargetArcs::new(&Example::IteratedLogCusp { s: 0.5, sigma: vec![1.0; 3] }, 5).is_err());
    }

    #[test]
    fn series_classes() {
        let ex = half();
        assert!(!ex.series_class(&[-1.0]).unwrap().is_finite());
        assert!(ex.series_class(&[-1.5]).unwrap().is_finite());
        assert!(!ex.series_class(&[-0.5]).unwrap().is_finite());
        let ex2 = Example::IteratedLogCusp { s: 0.5, sigma: vec![1.0] };
        assert!(!ex2.series_class(&[-2.0]).unwrap().is_finite());
        assert!(ex2.series_class(&[-2.5]).unwrap().is_finite());
        assert!(ex.series_class(&[-1.0, 0.0]).is_err());
    }

    #[test]
    fn minorant_lies_below_modular() {
        for (s, l) in [(0.5, -1.0), (0.5, -1.5), (0.25, -1.0), (0.25, -2.0)] {
            let psi = IteratedPsi::new(1.0 + s, vec![l]).unwrap();
            let m = ConvexMinorant::new(&psi).unwrap();
            for i in 0..=20000 {
                let t = 1e-6 * 1.002f64.powi(i);
                assert!(m.eval(t) <= psi_eval(&psi, t) * (1.0 + 1e-12), "s {s} l {l} t {t}");
            }
            // Convex: nondecreasing chord slopes on a fine grid.
            let ts: Vec<f64> = (0..4000).map(|i| 0.01 * i as f64).collect();
            for w in ts.windows(3) {
                let a = (m.eval(w[1]) - m.eval(w[0])) / (w[1] - w[0]);
                let b = (m.eval(w[2]) - m.eval(w[1])) / (w[2] - w[1]);
                assert!(b >= a - 1e-9 * a.abs().max(1.0), "s {s} l {l} t {}", w[1]);
            }
        }
    }

    #[test]
    fn series_terms_and_ratios() {
        let r = series_partial_sums(SeriesModel::Critical, 1 << 16).unwrap();
        for k in 16..2000 {
            let (a, b) = (SeriesModel::Critical.term(k), SeriesModel::Critical.term(k + 1));
            assert!(a > 0.0 && b < a);
        }
        let pts = &r.checkpoints;
        assert!(pts.windows(2).all(|w| w[1].partial_sum > w[0].partial_sum));
        // Increments between doublings vs the integral ∫ dk/(k log k log log k).
        for w in pts.windows(2).filter(|w| w[0].k >= 64) {
            let inc = w[1].partial_sum - w[0].partial_sum;
            let integral = w[1].model - w[0].model;
            assert!((inc / integral - 1.0).abs() < 0.05);
        }
        assert!(r.doubling_ratios().iter().all(|&(_, q)| q > 0.0 && q < 1.0));
    }

    #[test]
    fn control_limit_stabilises() {
        let r = series_partial_sums(SeriesModel::Control { power: 1.5 }, 1 << 18).unwrap();
        assert!(r.limit_drift() < 1e-4);
        assert!(series_partial_sums(SeriesModel::Critical, 5).is_err());
    }

    #[test]
    fn coarse_audit_bounds() {
        let b = build_example(&half(), 5).unwrap();
        let f = solve_harmonic_dirichlet(&b.domain, &b.map, 4e-3).unwrap();
        let audits = audit_pieces(&f, &b, &[-1.0]).unwrap();
        let grad = gradient_norm(&f);
        let phi = crate::orlicz::YoungPhi::new(1.5, -1.0).unwrap();
        let e = crate::harmonic::orlicz_energy(&f, &grad, &phi, Some(&b.partition));
        for a in &audits {
            assert!(a.flux >= 0.0 && a.area >= 0.0);
            assert!(a.jensen <= a.orlicz_energy * (1.0 + 1e-12));
            assert!(a.holder <= a.weighted_energy * (1.0 + 1e-12));
            let (_, v) = e.per_piece.iter().find(|p| p.0 == a.k).unwrap();
            assert!((v - a.orlicz_energy).abs() <= 1e-12 * v.abs());
        }
        assert!(audits[0].resolved);
    }
}
