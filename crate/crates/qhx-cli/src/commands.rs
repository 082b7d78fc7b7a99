//! Subcommands. Each returns `Ok(true)` when every checked statement holds,
//! `Ok(false)` on an assertion failure.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use qhx::counterexample::{
    area_exponent, audit_pieces, audit_table, build_example, divergence_demo, largest_resolved, series_partial_sums,
    trend_table, Example, SeriesModel, TREND_MIN_K,
};
use qhx::geometry::{CuspModel, Domain, DomainSpec, Point2, HORN_BULB_RADIUS};
use qhx::harmonic::{
    gradient_norm, modular_energy, orlicz_energy, solve_harmonic_dirichlet, weighted_energy, BoundaryMap,
};
use qhx::metrics::{hyperbolic_disk_distance, quasihyperbolic_distance, verify_generalized_growth, verify_s_growth, GrowthOptions, Stencil};
use qhx::orlicz::{Preset, YoungPhi};
use qhx::quadrature::{integrate_dyadic, thm31_condition_sup, GprimeModel, Integrand, Region, Verdict};
use qhx::report::{svg_loglog, Table};

use crate::config::{resolve, CliError, DomainArg, LambdaVec};

type Outcome = Result<bool, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_csv(dir: &Path, name: &str, t: &Table) -> Result<(), CliError> {
    let p = dir.join(name);
    t.write_csv(&p)?;
    println!("wrote {}", p.display());
    Ok(())
}

fn write_svg(dir: &Path, name: &str, svg: &str) -> Result<(), CliError> {
    let p = dir.join(name);
    std::fs::write(&p, svg)?;
    println!("wrote {}", p.display());
    Ok(())
}

fn point(v: &Option<Vec<f64>>, name: &str) -> Result<Option<Point2>, CliError> {
    match v {
        None => Ok(None),
        Some(c) if c.len() == 2 => Ok(Some(Point2::new(c[0], c[1]))),
        Some(_) => Err(usage(format!("--{name} needs two coordinates x,y"))),
    }
}

fn stencil(s: &Option<String>) -> Result<Stencil, CliError> {
    match s.as_deref() {
        None | Some("sixteen") | Some("16") => Ok(Stencil::Sixteen),
        Some("eight") | Some("8") => Ok(Stencil::Eight),
        Some(o) => Err(usage(format!("unknown stencil {o:?}"))),
    }
}

/// A well-inside point: the disk centre, the horn's bulb centre, a point on
/// the axis of a graph cusp, or the vertex centroid of a polygon.
fn base_point(spec: &DomainSpec) -> Point2 {
    match spec {
        DomainSpec::UnitDisk => Point2::new(0.0, 0.0),
        DomainSpec::PowerCusp {
            model: CuspModel::Horn, ..
        } => {
            let r = HORN_BULB_RADIUS;
            Point2::new(1.0 + (r * r - 1.0).sqrt(), 0.0)
        }
        DomainSpec::PowerCusp { .. } | DomainSpec::IteratedLogCusp { .. } => Point2::new(0.0, 0.9),
        DomainSpec::Polyline { vertices } => {
            let n = vertices.len().max(1) as f64;
            let sx: f64 = vertices.iter().map(|v| v.x).sum();
            let sy: f64 = vertices.iter().map(|v| v.y).sum();
            Point2::new(sx / n, sy / n)
        }
    }
}

fn domain_of(d: &Option<DomainArg>) -> Result<(DomainSpec, Domain), CliError> {
    let spec = d.clone().map(|d| d.0).unwrap_or(DomainSpec::UnitDisk);
    let dom = Domain::new(spec.clone())?;
    Ok((spec, dom))
}

// ---------------------------------------------------------------- growth

#[derive(Args, Serialize, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct GrowthArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG plot.
    #[arg(long)]
    #[serde(default)]
    pub svg: bool,
    /// Domain (JSON or short form such as `power_cusp:0.5:horn`).
    #[arg(long)]
    pub domain: Option<DomainArg>,
    /// Growth exponent s ∈ (0,1).
    #[arg(long)]
    pub s: Option<f64>,
    /// Log exponents σ; selects the generalized bound `Ψ_{1−s,σ}(1/d)`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub sigma: Option<Vec<f64>>,
    /// Base point `x,y`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub z0: Option<Vec<f64>>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub res: Option<f64>,
    /// Relative slack before a sample counts as a violation.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Constant in front of the bound.
    #[arg(long)]
    pub constant: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `eight` or `sixteen`.
    #[arg(long)]
    pub stencil: Option<String>,
}

pub fn growth(cli: GrowthArgs) -> Outcome {
    let a = resolve(&cli, cli.config.as_deref())?;
    let (spec, dom) = domain_of(&a.domain)?;
    let s = a.s.ok_or_else(|| usage("growth needs --s"))?;
    let z0 = point(&a.z0, "z0")?.unwrap_or_else(|| base_point(&spec));
    let mut opts = GrowthOptions {
        seed: a.seed.unwrap_or(0),
        stencil: stencil(&a.stencil)?,
        ..GrowthOptions::default()
    };
    if let Some(t) = a.tol {
        opts.tol = t;
    }
    if let Some(c) = a.constant {
        opts.constant = c;
    }
    let n = a.samples.unwrap_or(500);
    let res = a.res.unwrap_or(0.005);
    let rep = match &a.sigma {
        Some(sig) => verify_generalized_growth(&dom, z0, s, sig, n, res, &opts)?,
        None => verify_s_growth(&dom, z0, s, n, res, &opts)?,
    };
    let dir = out_dir(&a.out)?;
    write_csv(&dir, "growth.csv", &rep.to_table())?;
    if a.svg {
        let pts: Vec<(f64, f64)> = (1..rep.lhs.len()).map(|i| (rep.d_boundary[i], rep.lhs[i] / rep.rhs[i])).collect();
        write_svg(&dir, "growth.svg", &svg_loglog("growth ratio", "d(z)", "h / bound", &[("ratio", pts)]))?;
    }
    println!(
        "samples={} violations={} max_ratio={}",
        rep.lhs.len(),
        rep.violations.len(),
        rep.max_ratio
    );
    Ok(rep.passed())
}

// ---------------------------------------------------------------- qh-dist

#[derive(Args, Serialize, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct QhDistArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub domain: Option<DomainArg>,
    /// First point `x,y`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub z0: Option<Vec<f64>>,
    /// Second point `x,y`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub z1: Option<Vec<f64>>,
    #[arg(long)]
    pub res: Option<f64>,
}

pub fn qh_dist(cli: QhDistArgs) -> Outcome {
    let a = resolve(&cli, cli.config.as_deref())?;
    let (spec, dom) = domain_of(&a.domain)?;
    let z0 = point(&a.z0, "z0")?.unwrap_or_else(|| base_point(&spec));
    let z1 = point(&a.z1, "z1")?.ok_or_else(|| usage("qh-dist needs --z1"))?;
    let res = a.res.unwrap_or(0.005);
    let g = quasihyperbolic_distance(&dom, z0, z1, res)?;
    let hyp = match spec {
        DomainSpec::UnitDisk => hyperbolic_disk_distance(z0, z1)?,
        _ => f64::NAN,
    };
    let dir = out_dir(&a.out)?;
    let mut t = Table::new(&["x0", "y0", "x1", "y1", "resolution", "qh_distance", "hyperbolic"]);
    t.push(vec![z0.x.into(), z0.y.into(), z1.x.into(), z1.y.into(), res.into(), g.distance.into(), hyp.into()]);
    write_csv(&dir, "qh_dist.csv", &t)?;
    let mut p = Table::new(&["x", "y"]);
    for q in &g.path {
        p.push(vec![q.x.into(), q.y.into()]);
    }
    write_csv(&dir, "qh_path.csv", &p)?;
    println!("qh_distance={} hyperbolic={}", g.distance, hyp);
    Ok(true)
}

// ---------------------------------------------------------------- scan

#[derive(Args, Serialize, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct ScanArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    pub svg: bool,
    /// Integrand: `f`, `g` or `gsigma`.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub s: Option<f64>,
    /// Log-log exponent of `gsigma`.
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Comma-separated λ grid.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambda: Option<Vec<f64>>,
    /// `annulus`, `s1`, `s2`, `s3` or `disk`.
    #[arg(long)]
    pub region: Option<String>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub angular_n: Option<usize>,
}

fn region(r: &Option<String>) -> Result<Region, CliError> {
    Ok(match r.as_deref().unwrap_or("annulus") {
        "annulus" => Region::Annulus,
        "s1" => Region::S1,
        "s2" => Region::S2,
        "s3" => Region::S3,
        "disk" => Region::Disk,
        o => return Err(usage(format!("unknown region {o:?}"))),
    })
}

pub fn scan(cli: ScanArgs) -> Outcome {
    let a = resolve(&cli, cli.config.as_deref())?;
    let kind = a.kind.clone().unwrap_or_else(|| "g".into());
    let s = a.s.ok_or_else(|| usage("scan needs --s"))?;
    let sigma = a.sigma.unwrap_or(0.0);
    let lambdas = a.lambda.clone().unwrap_or_else(|| vec![-2.0, -1.5, -1.1, -1.0]);
    let reg = region(&a.region)?;
    let depth = a.depth.unwrap_or(40);
    let angular_n = a.angular_n.unwrap_or(12);
    let threshold = match kind.as_str() {
        "f" | "g" => -1.0,
        "gsigma" => -1.0 - sigma,
        o => return Err(usage(format!("unknown integrand {o:?}"))),
    };
    let mut table = Table::new(&[
        "kind", "s", "sigma", "lambda", "region", "total", "verdict", "expected", "gamma", "gamma_se",
    ]);
    let mut shells = Table::new(&["lambda", "m", "shell_sum", "partial_sum"]);
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut all_match = true;
    for &lambda in &lambdas {
        let i = match kind.as_str() {
            "f" => Integrand::F { s, lambda },
            "g" => Integrand::G { s, lambda },
            _ => Integrand::GSigma { s, sigma, lambda },
        };
        let rep = integrate_dyadic(&i, reg, depth, angular_n)?;
        let expected = if lambda < threshold { Verdict::Convergent } else { Verdict::Divergent };
        all_match &= rep.verdict == expected;
        let (gamma, se) = rep.model_fit.map_or((f64::NAN, f64::NAN), |f| (f.gamma, f.gamma_se));
        table.push(vec![
            kind.as_str().into(),
            s.into(),
            sigma.into(),
            lambda.into(),
            format!("{reg:?}").to_lowercase().into(),
            rep.total().into(),
            rep.verdict.to_string().into(),
            expected.to_string().into(),
            gamma.into(),
            se.into(),
        ]);
        for (j, &(m, v)) in rep.shells.iter().enumerate() {
            shells.push(vec![lambda.into(), m.into(), v.into(), rep.partial_sums[j].into()]);
        }
        series.push((format!("lambda {lambda}"), rep.shells.iter().map(|&(m, v)| ((m + 1) as f64, v)).collect()));
        println!("lambda={lambda} verdict={} expected={expected}", rep.verdict);
    }
    let dir = out_dir(&a.out)?;
    write_csv(&dir, "scan.csv", &table)?;
    write_csv(&dir, "scan_shells.csv", &shells)?;
    if a.svg {
        let refs: Vec<(&str, Vec<(f64, f64)>)> = series.iter().map(|(n, v)| (n.as_str(), v.clone())).collect();
        write_svg(&dir, "scan.svg", &svg_loglog("dyadic shell sums", "m + 1", "shell sum", &refs))?;
    }
    println!("threshold={threshold} all_match={all_match}");
    Ok(all_match)
}

// ---------------------------------------------------------------- thm31

#[derive(Args, Serialize, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct Thm31Args {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Φ(t) = t^{1+s} log^λ(e+t).
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// `koebe`, `koebe_loglog` or `identity`.
    #[arg(long)]
    pub gprime: Option<String>,
    /// Constant of the majorant.
    #[arg(long)]
    pub c: Option<f64>,
    /// σ of `koebe_loglog`.
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Number of boundary points w.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub angular_n: Option<usize>,
}

pub fn thm31(cli: Thm31Args) -> Outcome {
    let a = resolve(&cli, cli.config.as_deref())?;
    let s = a.s.ok_or_else(|| usage("thm31 needs --s"))?;
    let lambda = a.lambda.unwrap_or(-1.5);
    let c = a.c.unwrap_or(1.0);
    let phi = YoungPhi::new(1.0 + s, lambda)?;
    let gprime = match a.gprime.as_deref().unwrap_or("koebe") {
        "koebe" => GprimeModel::Koebe { s, c },
        "koebe_loglog" => GprimeModel::KoebeLogLog {
            s,
            sigma: a.sigma.unwrap_or(0.0),
            c,
        },
        "identity" => GprimeModel::Identity,
        o => return Err(usage(format!("unknown majorant {o:?}"))),
    };
    let i = Integrand::Condition { phi, gprime, w_angle: 0.0 };
    let rep = thm31_condition_sup(&i, a.samples.unwrap_or(8), a.depth.unwrap_or(40), a.angular_n.unwrap_or(12))?;
    let mut t = Table::new(&["w_angle", "value", "verdict"]);
    for j in 0..rep.values.len() {
        t.push(vec![rep.w_angles[j].into(), rep.values[j].into(), rep.verdicts[j].to_string().into()]);
    }
    let dir = out_dir(&a.out)?;
    write_csv(&dir, "thm31.csv", &t)?;
    println!("sup={} spread={} divergent={}", rep.sup, rep.spread, rep.divergent);
    Ok(true)
}

// ---------------------------------------------------------------- energy

#[derive(Args, Serialize, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct EnergyArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub domain: Option<DomainArg>,
    /// Boundary map: `identity` or `rotation:θ`.
    #[arg(long)]
    pub map: Option<String>,
    /// `thm1(s,λ)` or `cor35(s,[σ..],[λ..])`.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub res: Option<f64>,
    /// Cusp pieces S_2..S_K for a per-piece breakdown.
    #[arg(long)]
    pub pieces: Option<usize>,
    /// Also write the solved field.
    #[arg(long)]
    #[serde(default)]
    pub field: bool,
}

fn boundary_map(m: &Option<String>) -> Result<BoundaryMap, CliError> {
    let text = m.as_deref().unwrap_or("identity");
    if text == "identity" {
        return Ok(BoundaryMap::identity());
    }
    if let Some(th) = text.strip_prefix("rotation:") {
        let th: f64 = th.trim().parse().map_err(|_| usage(format!("bad rotation {th:?}")))?;
        return Ok(BoundaryMap::rotation(th));
    }
    Err(usage(format!("unknown boundary map {text:?}")))
}

pub fn energy(cli: EnergyArgs) -> Outcome {
    let a = resolve(&cli, cli.config.as_deref())?;
    let (_, dom) = domain_of(&a.domain)?;
    let map = boundary_map(&a.map)?;
    let preset = Preset::parse(a.preset.as_deref().unwrap_or("thm1(0.5,-1)"))?;
    let res = a.res.unwrap_or(0.01);
    let part = match a.pieces {
        Some(k) => Some(dom.cusp_pieces(k)?),
        None => None,
    };
    let f = solve_harmonic_dirichlet(&dom, &map, res)?;
    let grad = gradient_norm(&f);
    let modular = match preset {
        Preset::Thm1 { s, lambda } => orlicz_energy(&f, &grad, &YoungPhi::new(1.0 + s, lambda)?, part.as_ref()),
        Preset::Cor35 { .. } => modular_energy(&f, &grad, &preset.modular(), part.as_ref()),
    };
    let weighted = weighted_energy(&f, &grad, preset.s(), &preset.weight(), part.as_ref());
    let mut t = modular.to_table();
    t.rows.extend(weighted.to_table().rows);
    let dir = out_dir(&a.out)?;
    write_csv(&dir, "energy.csv", &t)?;
    if a.field {
        write_csv(&dir, "field.csv", &f.to_table(&grad))?;
    }
    let mp = f.max_principle_holds(1e-8);
    println!(
        "{}={} weighted={} cells={} iterations={} max_principle={mp}",
        modular.functional, modular.value, weighted.value, modular.cells, f.iterations
    );
    Ok(mp)
}

// ---------------------------------------------------------------- counterexample

#[derive(Args, Serialize, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    pub svg: bool,
    #[arg(long)]
    pub s: Option<f64>,
    /// Log exponents of the iterated-log cusp; absent means the power cusp.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub sigma: Option<Vec<f64>>,
    /// Number of cuts K.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub res: Option<f64>,
    /// Exponent vectors for the trend (repeatable; components joined by `:`).
    /// The first one is also used for the audit table.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<Vec<LambdaVec>>,
}

pub fn counterexample(cli: CounterexampleArgs) -> Outcome {
    let a = resolve(&cli, cli.config.as_deref())?;
    let s = a.s.unwrap_or(0.5);
    let example = match &a.sigma {
        Some(sigma) => Example::IteratedLogCusp { s, sigma: sigma.clone() },
        None => Example::PowerCusp { s },
    };
    let lambdas: Vec<Vec<f64>> = match &a.lambda {
        Some(l) if !l.is_empty() => l.iter().map(|v| v.0.clone()).collect(),
        _ => match &a.sigma {
            Some(sigma) => vec![
                sigma.iter().map(|v| -1.0 - v).collect(),
                sigma.iter().map(|v| -1.5 - v).collect(),
            ],
            None => vec![vec![-1.0], vec![-1.5]],
        },
    };
    let k_max = a.k.unwrap_or(8);
    let res = a.res.unwrap_or(1e-3);
    let built = build_example(&example, k_max)?;
    let f = solve_harmonic_dirichlet(&built.domain, &built.map, res)?;
    let audits = audit_pieces(&f, &built, &lambdas[0])?;
    let trends = divergence_demo(&audits, &example, &lambdas, res)?;

    let mut ok = true;
    let mut report = |name: &str, pass: bool| {
        println!("{} {name}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };
    let window: Vec<_> = audits.iter().filter(|p| p.resolved && p.k >= TREND_MIN_K).collect();
    report("resolved window nonempty", !window.is_empty());
    report("flux >= 0.5*eps_k*d_k", window.iter().all(|p| p.flux >= 0.5 * p.flux_lower));
    report(
        "jensen <= orlicz energy",
        window.iter().all(|p| p.jensen <= p.orlicz_energy * (1.0 + 1e-12)),
    );
    report(
        "holder <= weighted energy",
        window.iter().all(|p| p.holder <= p.weighted_energy * (1.0 + 1e-12)),
    );
    if let Example::PowerCusp { s } = example {
        let target = -2.0 - 1.0 / s;
        let slope = area_exponent(&audits, 2).unwrap_or(f64::NAN);
        println!("area_exponent={slope} target={target}");
        report("area exponent within 5%", ((slope - target) / target).abs() <= 0.05);
    }
    for t in &trends {
        let expected = if t.class.is_finite() { Verdict::Convergent } else { Verdict::Divergent };
        println!(
            "lambda={:?} orlicz_trend={} weighted_trend={} expected={expected}",
            t.lambda, t.orlicz_verdict, t.weighted_verdict
        );
        report(
            &format!("trend at lambda {:?}", t.lambda),
            t.orlicz_verdict == expected && t.weighted_verdict == expected,
        );
    }
    println!(
        "largest_resolved_k={} iterations={}",
        largest_resolved(&audits).map_or("none".into(), |k| k.to_string()),
        f.iterations
    );

    let dir = out_dir(&a.out)?;
    write_csv(&dir, "counterexample_audit.csv", &audit_table(&audits))?;
    write_csv(&dir, "counterexample_trend.csv", &trend_table(&trends))?;
    if a.svg {
        let area: Vec<(f64, f64)> = audits.iter().map(|p| (p.k as f64, p.area)).collect();
        let model: Vec<(f64, f64)> = audits.iter().map(|p| (p.k as f64, p.area_model)).collect();
        write_svg(
            &dir,
            "counterexample_area.svg",
            &svg_loglog("piece areas", "k", "area", &[("measured", area), ("model", model)]),
        )?;
    }
    Ok(ok)
}

// ---------------------------------------------------------------- series

#[derive(Args, Serialize, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct SeriesArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    pub svg: bool,
    /// `critical`, `control` or `iterated`.
    #[arg(long)]
    pub model: Option<String>,
    /// Log power of the control series.
    #[arg(long)]
    pub power: Option<f64>,
    /// Depth n of the iterated series.
    #[arg(long)]
    pub n: Option<usize>,
    /// Last index K.
    #[arg(long)]
    pub k: Option<usize>,
}

pub fn series(cli: SeriesArgs) -> Outcome {
    let a = resolve(&cli, cli.config.as_deref())?;
    let model = match a.model.as_deref().unwrap_or("critical") {
        "critical" => SeriesModel::Critical,
        "control" => SeriesModel::Control {
            power: a.power.unwrap_or(1.5),
        },
        "iterated" => SeriesModel::IteratedCritical { n: a.n.unwrap_or(1) },
        o => return Err(usage(format!("unknown series {o:?}"))),
    };
    let rep = series_partial_sums(model, a.k.unwrap_or(10_000_000))?;
    let dir = out_dir(&a.out)?;
    write_csv(&dir, "series.csv", &rep.to_table())?;
    if a.svg {
        let sums: Vec<(f64, f64)> = rep.checkpoints.iter().map(|p| (p.k as f64, p.partial_sum)).collect();
        let offs: Vec<(f64, f64)> = rep
            .checkpoints
            .iter()
            .filter(|p| p.offset > 0.0)
            .map(|p| (p.k as f64, p.offset))
            .collect();
        write_svg(
            &dir,
            "series.svg",
            &svg_loglog("partial sums", "K", "S_K", &[("partial sum", sums), ("S_K - model", offs)]),
        )?;
    }
    let last = rep.checkpoints.last().copied();
    let ratio = rep.doubling_ratios().last().map_or(f64::NAN, |r| r.1);
    println!(
        "partial_sum={} offset={} offset_bracket={} last_doubling_ratio={ratio} limit_drift={}",
        last.map_or(f64::NAN, |p| p.partial_sum),
        last.map_or(f64::NAN, |p| p.offset),
        rep.offset_bracket(16),
        rep.limit_drift()
    );
    if let Some(t) = model.tail_integral(rep.k_max as f64) {
        println!("tail_integral={t}");
    }
    Ok(true)
}
