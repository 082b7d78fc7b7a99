//! Young functions of power–logarithm type.
//!
//! Two families are provided:
//!
//! * [`YoungPhi`]: `Φ(t) = t^α · log^λ(e + t)` with `α > 1`;
//! * [`IteratedPsi`]: `Ψ_{a,σ}(t) = t^a · Π_i log_(i)^{σ_i}(e_i + t)` where
//!   `log_(i)` is the `i`-fold logarithm and `e_i` the `i`-fold exponential,
//!   so every logarithmic factor is at least 1 for `t ≥ 0`.
//!
//! Alongside evaluation the module checks the Young axioms numerically,
//! estimates Δ2 constants and inverts Ψ by bisection.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest number of iterated-logarithm factors: `e_4` overflows `f64`.
pub const MAX_LOG_DEPTH: usize = 3;

/// Relative tolerance of [`psi_inverse`].
pub const INVERSE_REL_TOL: f64 = 1e-10;
/// Iteration cap of [`psi_inverse`].
pub const INVERSE_MAX_ITER: usize = 200;

/// `e_i`: the `i`-fold iterated exponential, `e_0 = 1`, `e_{i+1} = exp(e_i)`.
pub fn iterated_exp(i: usize) -> f64 {
    (0..i).fold(1.0, |acc, _| acc.exp())
}

/// `log_(i)(x)`: the logarithm applied `i` times.
pub fn iterated_log(i: usize, x: f64) -> f64 {
    (0..i).fold(x, |acc, _| acc.ln())
}

/// Common interface of the scalar Young-type functions used in energies.
pub trait YoungFunction: Sync {
    /// Value at `t ≥ 0`.
    fn eval(&self, t: f64) -> f64;
    /// Leading power, which fixes the small-`t` limit of `f(2t)/f(t)`.
    fn power(&self) -> f64;
}

/// `Φ(t) = t^α log^λ(e + t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YoungPhi {
    pub alpha: f64,
    pub lambda: f64,
}

impl YoungPhi {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha.is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidParameter("non-finite exponent".into()));
        }
        if alpha <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha must exceed 1, got {alpha}"
            )));
        }
        Ok(Self { alpha, lambda })
    }

    /// The same function viewed as a one-factor iterated Ψ.
    pub fn as_psi(&self) -> IteratedPsi {
        IteratedPsi {
            a: self.alpha,
            sigma: vec![self.lambda],
        }
    }
}

/// Evaluates `Φ(t)`.
pub fn phi_eval(f: &YoungPhi, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    t.powf(f.alpha) * (std::f64::consts::E + t).ln().powf(f.lambda)
}

impl YoungFunction for YoungPhi {
    fn eval(&self, t: f64) -> f64 {
        phi_eval(self, t)
    }
    fn power(&self) -> f64 {
        self.alpha
    }
}

/// `Ψ_{a,σ}(t) = t^a Π log_(i)^{σ_i}(e_i + t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IteratedPsi {
    pub a: f64,
    pub sigma: Vec<f64>,
}

impl IteratedPsi {
    pub fn new(a: f64, sigma: Vec<f64>) -> Result<Self> {
        if sigma.is_empty() || sigma.len() > MAX_LOG_DEPTH {
            return Err(Error::InvalidParameter(format!(
                "need 1..={MAX_LOG_DEPTH} log exponents, got {}",
                sigma.len()
            )));
        }
        if !a.is_finite() || sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite exponent".into()));
        }
        Ok(Self { a, sigma })
    }

    /// Product of the logarithmic factors alone (the `a = 0` part).
    pub fn log_factor(&self, t: f64) -> f64 {
        self.sigma
            .iter()
            .enumerate()
            .map(|(j, &e)| {
                let i = j + 1;
                if e == 0.0 {
                    1.0
                } else {
                    iterated_log(i, iterated_exp(i) + t).powf(e)
                }
            })
            .product()
    }

    /// The asymptotic inverse of `Ψ_{a,σ}` for `a > 0`:
    /// `Ψ_{1/a, −σ/a}`. For `a = 1 − s` this is `Ψ_{1/(1−s), σ/(s−1)}`.
    pub fn asymptotic_inverse(&self) -> Result<IteratedPsi> {
        if self.a <= 0.0 {
            return Err(Error::NonInvertible);
        }
        IteratedPsi::new(
            1.0 / self.a,
            self.sigma.iter().map(|v| -v / self.a).collect(),
        )
    }
}

/// Evaluates `Ψ_{a,σ}(t)`; `t^0` is taken as 1 including at `t = 0`.
pub fn psi_eval(p: &IteratedPsi, t: f64) -> f64 {
    let t = t.max(0.0);
    let pow = if p.a == 0.0 {
        1.0
    } else if t == 0.0 {
        if p.a > 0.0 {
            return 0.0;
        }
        f64::INFINITY
    } else {
        t.powf(p.a)
    };
    pow * p.log_factor(t)
}

impl YoungFunction for IteratedPsi {
    fn eval(&self, t: f64) -> f64 {
        psi_eval(self, t)
    }
    fn power(&self) -> f64 {
        self.a
    }
}

/// Outcome of [`is_young`].
#[derive(Debug, Clone, PartialEq)]
pub struct YoungReport {
    pub pass: bool,
    pub zero_at_origin: bool,
    pub increasing: bool,
    /// Local log–log slope at the small end of the grid (must exceed 1).
    pub slope_small: f64,
    /// Local log–log slope at the large end of the grid (must exceed 1).
    pub slope_large: f64,
    /// Smallest grid point from which all second differences are nonnegative.
    pub convex_from: Option<f64>,
    /// Grid points where monotonicity or convexity fails.
    pub witnesses: Vec<f64>,
}

const YOUNG_GRID_LO: f64 = 1e-12;
const YOUNG_GRID_HI: f64 = 1e12;
const YOUNG_GRID_N: usize = 481;

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Numerically checks the Young axioms on a log-spaced grid over
/// `[1e-12, 1e12]`: `f(0) = 0`, strict increase, superlinear behaviour at
/// both ends (local power above 1) and eventual convexity.
pub fn is_young<F: YoungFunction + ?Sized>(f: &F) -> YoungReport {
    let ts = log_grid(YOUNG_GRID_LO, YOUNG_GRID_HI, YOUNG_GRID_N);
    let vs: Vec<f64> = ts.iter().map(|&t| f.eval(t)).collect();
    let zero_at_origin = f.eval(0.0) == 0.0;
    let mut witnesses = Vec::new();

    let mut increasing = true;
    for i in 1..ts.len() {
        if !(vs[i] > vs[i - 1]) {
            increasing = false;
            witnesses.push(ts[i]);
        }
    }

    let slope = |i: usize, j: usize| (vs[j].ln() - vs[i].ln()) / (ts[j].ln() - ts[i].ln());
    let slope_small = slope(0, 1);
    let n = ts.len();
    let slope_large = slope(n - 2, n - 1);

    // Second divided differences; a small relative slack absorbs rounding.
    let mut last_bad: Option<usize> = None;
    for i in 1..n - 1 {
        let s0 = (vs[i] - vs[i - 1]) / (ts[i] - ts[i - 1]);
        let s1 = (vs[i + 1] - vs[i]) / (ts[i + 1] - ts[i]);
        if s1 < s0 - 1e-9 * s0.abs() {
            last_bad = Some(i);
            witnesses.push(ts[i]);
        }
    }
    let convex_from = match last_bad {
        None => Some(0.0),
        Some(i) if i + 1 < n - 1 => Some(ts[i + 1]),
        Some(_) => None,
    };

    let pass = zero_at_origin
        && increasing
        && slope_small > 1.0
        && slope_large > 1.0
        && convex_from.is_some();
    YoungReport {
        pass,
        zero_at_origin,
        increasing,
        slope_small,
        slope_large,
        convex_from,
        witnesses,
    }
}

/// `sup f(2t)/f(t)` over a log grid on `(0, t_max]`, including the
/// `t → 0` limit `2^power`.
pub fn delta2_constant<F: YoungFunction + ?Sized>(f: &F, t_max: f64) -> Result<f64> {
    if !(t_max > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "t_max must exceed 1, got {t_max}"
        )));
    }
    if !t_max.is_finite() {
        return Err(Error::Overflow("t_max is not finite".into()));
    }
    let mut sup = 2f64.powf(f.power());
    for t in log_grid(1e-12, t_max, 2001) {
        let (num, den) = (f.eval(2.0 * t), f.eval(t));
        if !num.is_finite() || !den.is_finite() || den == 0.0 {
            return Err(Error::Overflow(format!("f(2t)/f(t) at t = {t:e}")));
        }
        sup = sup.max(num / den);
    }
    Ok(sup)
}

/// Solves `Ψ(t) = y` for `t ≥ 0` by monotone bisection (`a > 0` required).
pub fn psi_inverse(p: &IteratedPsi, y: f64) -> Result<f64> {
    if p.a <= 0.0 {
        return Err(Error::NonInvertible);
    }
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::InvalidParameter(format!("cannot invert at y = {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let f = |t: f64| psi_eval(p, t);
    // Bracket [lo, hi] with hi = 2·lo and f(lo) < y ≤ f(hi).
    let mut hi = 1.0f64;
    if f(hi) < y {
        while f(hi) < y {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Overflow(format!("inverse of {y:e}")));
            }
        }
    } else {
        while f(hi * 0.5) >= y {
            hi *= 0.5;
            if hi < f64::MIN_POSITIVE {
                return Err(Error::Underflow(format!("inverse of {y:e}")));
            }
        }
    }
    let mut lo = hi * 0.5;
    let mut mid = hi;
    for _ in 0..INVERSE_MAX_ITER {
        mid = 0.5 * (lo + hi);
        let v = f(mid);
        if (v - y).abs() <= INVERSE_REL_TOL * y {
            return Ok(mid);
        }
        if v < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(mid)
}

/// Named parameter presets accepted in configuration files.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    /// `thm1(s, λ)`: `Φ(t) = t^{1+s} log^λ(e+t)`.
    Thm1 { s: f64, lambda: f64 },
    /// `cor35(s, σ, λ)`: growth bound `Ψ_{1−s,σ}`, modular `Ψ_{1+s,λ}` and
    /// weight `Ψ_{0,λ}`. Vectors are written `[v1, v2, ...]`.
    Cor35 {
        s: f64,
        sigma: Vec<f64>,
        lambda: Vec<f64>,
    },
}

fn split_top_level(args: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, c) in args.char_indices() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(args[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(args[start..].trim());
    out
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidParameter(format!("not a number: {s:?}")))
}

fn parse_vec(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    match s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
        Some(inner) => inner.split(',').map(parse_num).collect(),
        None => Ok(vec![parse_num(s)?]),
    }
}

impl Preset {
    /// Parses `thm1(0.5,-1.5)` or `cor35(0.5,[1],[-2])`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::InvalidParameter(format!("unrecognised preset {text:?}"));
        let open = text.find('(').ok_or_else(bad)?;
        let name = &text[..open];
        let args = text[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let parts = split_top_level(args);
        let check_s = |s: f64| {
            if s > 0.0 && s < 1.0 {
                Ok(s)
            } else {
                Err(Error::InvalidParameter(format!("s must lie in (0,1), got {s}")))
            }
        };
        match (name, parts.len()) {
            ("thm1", 2) => Ok(Preset::Thm1 {
                s: check_s(parse_num(parts[0])?)?,
                lambda: parse_num(parts[1])?,
            }),
            ("cor35", 3) => {
                let s = check_s(parse_num(parts[0])?)?;
                let sigma = parse_vec(parts[1])?;
                let lambda = parse_vec(parts[2])?;
                if sigma.len() != lambda.len() {
                    return Err(Error::InvalidParameter(
                        "sigma and lambda must have equal length".into(),
                    ));
                }
                IteratedPsi::new(0.0, sigma.clone())?;
                Ok(Preset::Cor35 { s, sigma, lambda })
            }
            _ => Err(bad()),
        }
    }

    pub fn s(&self) -> f64 {
        match self {
            Preset::Thm1 { s, .. } | Preset::Cor35 { s, .. } => *s,
        }
    }

    /// The modular function applied to `|Dh|`.
    pub fn modular(&self) -> IteratedPsi {
        match self {
            Preset::Thm1 { s, lambda } => IteratedPsi {
                a: 1.0 + s,
                sigma: vec![*lambda],
            },
            Preset::Cor35 { s, lambda, .. } => IteratedPsi {
                a: 1.0 + s,
                sigma: lambda.clone(),
            },
        }
    }

    /// The distance weight `Ψ_{0,λ}` applied to `1/d`.
    pub fn weight(&self) -> IteratedPsi {
        match self {
            Preset::Thm1 { lambda, .. } => IteratedPsi {
                a: 0.0,
                sigma: vec![*lambda],
            },
            Preset::Cor35 { lambda, .. } => IteratedPsi {
                a: 0.0,
                sigma: lambda.clone(),
            },
        }
    }

    /// The growth bound `Ψ_{1−s,σ}` (σ = 0 for `thm1`).
    pub fn growth_bound(&self) -> IteratedPsi {
        match self {
            Preset::Thm1 { s, .. } => IteratedPsi {
                a: 1.0 - s,
                sigma: vec![0.0],
            },
            Preset::Cor35 { s, sigma, .. } => IteratedPsi {
                a: 1.0 - s,
                sigma: sigma.clone(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn phi_values() {
        let f = YoungPhi::new(2.0, 0.0).unwrap();
        assert_eq!(phi_eval(&f, 0.0), 0.0);
        assert!((phi_eval(&f, 1.0) - 1.0).abs() < 1e-15);
        let g = YoungPhi::new(1.5, -2.0).unwrap();
        let t = E * E - E;
        let expect = t.powf(1.5) / 4.0;
        assert!((phi_eval(&g, t) - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn phi_rejects_alpha_at_most_one() {
        assert!(YoungPhi::new(1.0, 0.0).is_err());
        assert!(YoungPhi::new(0.5, 1.0).is_err());
    }

    #[test]
    fn iterated_constants() {
        assert!((iterated_exp(1) - E).abs() < 1e-15);
        assert!((iterated_exp(2) - E.exp()).abs() < 1e-12);
        for i in 1..=3 {
            assert!((iterated_log(i, iterated_exp(i)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn psi_reduces_to_phi_for_one_factor() {
        let f = YoungPhi::new(1.7, -0.8).unwrap();
        for &t in &[0.0, 1e-3, 0.5, 3.0, 1e4] {
            let (a, b) = (phi_eval(&f, t), psi_eval(&f.as_psi(), t));
            assert!((a - b).abs() <= 1e-14 * a.max(1.0));
        }
    }

    #[test]
    fn psi_zero_power_is_pure_log_weight() {
        let p = IteratedPsi::new(0.0, vec![-1.5]).unwrap();
        for &t in &[0.0, 2.0, 1e6] {
            let expect = (E + t).ln().powf(-1.5);
            assert!((psi_eval(&p, t) - expect).abs() < 1e-14);
        }
        let q = IteratedPsi::new(0.7, vec![2.0, -1.0, 3.0]).unwrap();
        assert_eq!(psi_eval(&q, 0.0), 0.0);
    }

    #[test]
    fn psi_rejects_deep_logs() {
        assert!(IteratedPsi::new(1.0, vec![0.0; 4]).is_err());
        assert!(IteratedPsi::new(1.0, vec![]).is_err());
    }

    #[test]
    fn young_axioms_for_presets() {
        assert!(is_young(&YoungPhi::new(1.5, -1.0).unwrap()).pass);
        assert!(is_young(&IteratedPsi::new(1.5, vec![-1.0, -1.0]).unwrap()).pass);
        let sub = is_young(&IteratedPsi::new(0.5, vec![0.0]).unwrap());
        assert!(!sub.pass);
    }

    #[test]
    fn delta2_pure_power_is_exact() {
        let f = YoungPhi::new(2.0, 0.0).unwrap();
        let c = delta2_constant(&f, 1e6).unwrap();
        assert!((c - 4.0).abs() < 1e-12);
    }

    #[test]
    fn delta2_with_negative_log_power_below_three() {
        let f = YoungPhi::new(1.5, -2.0).unwrap();
        let c = delta2_constant(&f, 1e8).unwrap();
        assert!(c < 3.0 && c >= 2f64.powf(1.5) - 1e-12, "{c}");
        let c_small = delta2_constant(&f, 10.0).unwrap();
        assert!(c_small <= c);
    }

    #[test]
    fn delta2_rejects_bad_range() {
        let f = YoungPhi::new(2.0, 0.0).unwrap();
        assert!(delta2_constant(&f, 0.5).is_err());
        assert!(matches!(
            delta2_constant(&f, f64::INFINITY),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn inverse_identity_and_roundtrip() {
        let id = IteratedPsi::new(1.0, vec![0.0]).unwrap();
        for &y in &[1e-6, 0.3, 7.0, 1e9] {
            let t = psi_inverse(&id, y).unwrap();
            assert!((t - y).abs() <= 1e-9 * y);
        }
        let p = IteratedPsi::new(0.5, vec![1.0, 0.5]).unwrap();
        for &t in &[1e-4, 0.2, 5.0, 1e7] {
            let back = psi_inverse(&p, psi_eval(&p, t)).unwrap();
            assert!((back - t).abs() <= 1e-9 * t, "{t} -> {back}");
        }
        assert_eq!(
            psi_inverse(&IteratedPsi::new(0.0, vec![1.0]).unwrap(), 1.0),
            Err(Error::NonInvertible)
        );
    }

    #[test]
    fn inverse_tracks_asymptote() {
        // Ψ_{1/2,(1)} against Ψ_{2,(−2)}: independent oracle for the ratio
        // is that it converges (slowly) to a constant, so the sweep must stay
        // inside a fixed bracket.
        let p = IteratedPsi::new(0.5, vec![1.0]).unwrap();
        let asym = p.asymptotic_inverse().unwrap();
        assert_eq!(asym.a, 2.0);
        assert_eq!(asym.sigma, vec![-2.0]);
        let mut ratios = Vec::new();
        let mut y = 1e3;
        while y <= 1e9 {
            ratios.push(psi_inverse(&p, y).unwrap() / psi_eval(&asym, y));
            y *= 10.0;
        }
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
        assert!(lo > 0.25 && hi < 4.0, "{ratios:?}");
    }

    #[test]
    fn presets_parse() {
        let p = Preset::parse("thm1(0.5,-1.5)").unwrap();
        assert_eq!(p, Preset::Thm1 { s: 0.5, lambda: -1.5 });
        assert_eq!(p.modular().a, 1.5);
        let q = Preset::parse("cor35(0.25, [1, 0.5], [-2, -1.5])").unwrap();
        assert_eq!(q.growth_bound().sigma, vec![1.0, 0.5]);
        assert_eq!(q.weight().a, 0.0);
        assert!(Preset::parse("cor35(0.5,1,-2)").is_ok());
        assert!(Preset::parse("thm1(1.5,-1)").is_err());
        assert!(Preset::parse("foo(1)").is_err());
        assert!(Preset::parse("cor35(0.5,[1,2],[-1])").is_err());
    }
}
