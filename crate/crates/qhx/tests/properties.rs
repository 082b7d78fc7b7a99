//! Property tests for the invariants shared across modules.

use std::sync::OnceLock;

use proptest::prelude::*;

use qhx::counterexample::{build_example, series_partial_sums, Example, SeriesModel, TargetArcs};
use qhx::geometry::{Domain, DomainSpec, Point2};
use qhx::harmonic::{gradient_norm, orlicz_energy, solve_dirichlet_trace, weighted_energy, log_weight, GridField};
use qhx::metrics::{hyperbolic_disk_distance, QhGrid, Stencil};
use qhx::orlicz::{phi_eval, YoungPhi};
use qhx::quadrature::{integrate_dyadic, Integrand, Region};

fn disk() -> &'static Domain {
    static D: OnceLock<Domain> = OnceLock::new();
    D.get_or_init(|| Domain::new(DomainSpec::UnitDisk).unwrap())
}

fn qh_grid() -> &'static QhGrid<'static> {
    static G: OnceLock<QhGrid<'static>> = OnceLock::new();
    G.get_or_init(|| QhGrid::new(disk(), 0.01, Stencil::Sixteen).unwrap())
}

/// A rotation-like trace solved once on a coarse grid.
fn field() -> &'static (GridField, Vec<Option<f64>>) {
    static F: OnceLock<(GridField, Vec<Option<f64>>)> = OnceLock::new();
    F.get_or_init(|| {
        let trace = |c: Point2| {
            let a = c.y.atan2(c.x);
            [(a + 0.4 * a.sin()).cos(), (a + 0.4 * a.sin()).sin()]
        };
        let f = solve_dirichlet_trace(disk(), 0.02, &trace).unwrap();
        let g = gradient_norm(&f);
        (f, g)
    })
}

fn disk_point(r_max: f64) -> impl Strategy<Value = Point2> {
    (0.0..r_max, 0.0..std::f64::consts::TAU).prop_map(|(r, a)| Point2::new(r * a.cos(), r * a.sin()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn qh_distance_symmetric_and_triangle(a in disk_point(0.9), b in disk_point(0.9), c in disk_point(0.9)) {
        let g = qh_grid();
        let ab = g.distance(a, b).unwrap().distance;
        let ba = g.distance(b, a).unwrap().distance;
        let bc = g.distance(b, c).unwrap().distance;
        let ac = g.distance(a, c).unwrap().distance;
        prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1.0));
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!(ab >= 0.0);
    }

    #[test]
    fn qh_between_half_and_full_hyperbolic(a in disk_point(0.9), b in disk_point(0.9)) {
        let k = qh_grid().distance(a, b).unwrap().distance;
        let rho = hyperbolic_disk_distance(a, b).unwrap();
        prop_assert!(k >= 0.5 * rho * 0.98 - 1e-9, "k {k} rho {rho}");
        prop_assert!(k <= rho * 1.02 + 0.02, "k {k} rho {rho}");
    }

    #[test]
    fn hyperbolic_triangle(a in disk_point(0.95), b in disk_point(0.95), c in disk_point(0.95)) {
        let d = |p, q| hyperbolic_disk_distance(p, q).unwrap();
        prop_assert!(d(a, c) <= d(a, b) + d(b, c) + 1e-12);
        prop_assert!((d(a, b) - d(b, a)).abs() <= 1e-12);
    }

    #[test]
    fn young_phi_increasing_and_eventually_convex(alpha in 1.05f64..3.0, lambda in -3.0f64..3.0, t in 1e-3f64..1e3, f in 1.01f64..3.0) {
        let phi = YoungPhi::new(alpha, lambda).unwrap();
        prop_assert!(phi_eval(&phi, t) < phi_eval(&phi, t * f));
        prop_assert_eq!(phi_eval(&phi, 0.0), 0.0);
        let rep = qhx::orlicz::is_young(&phi);
        if let Some(t0) = rep.convex_from {
            let (u, v) = (t0.max(t), t0.max(t) * f);
            let m = 0.5 * (u + v);
            let chord = 0.5 * (phi_eval(&phi, u) + phi_eval(&phi, v));
            prop_assert!(phi_eval(&phi, m) <= chord * (1.0 + 1e-12));
        }
    }

    #[test]
    fn energies_monotone_in_lambda(s in 0.1f64..0.9, l1 in -3.0f64..1.0, dl in 0.0f64..2.0) {
        let (f, g) = field();
        let l2 = l1 + dl;
        let e1 = orlicz_energy(f, g, &YoungPhi::new(1.0 + s, l1).unwrap(), None).value;
        let e2 = orlicz_energy(f, g, &YoungPhi::new(1.0 + s, l2).unwrap(), None).value;
        prop_assert!(e1 <= e2 * (1.0 + 1e-12));
        let w1 = weighted_energy(f, g, s, &log_weight(l1), None).value;
        let w2 = weighted_energy(f, g, s, &log_weight(l2), None).value;
        prop_assert!(w1 <= w2 * (1.0 + 1e-12));
    }

    #[test]
    fn dyadic_partial_sums_monotone(s in 0.1f64..0.9, lambda in -2.5f64..-0.5) {
        let rep = integrate_dyadic(&Integrand::G { s, lambda }, Region::Annulus, 20, 8).unwrap();
        prop_assert!(rep.partial_sums.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(rep.shells.iter().all(|&(_, v)| v >= 0.0));
    }

    #[test]
    fn series_partial_sums_monotone(power in 1.1f64..3.0, k in 10usize..5000) {
        let r = series_partial_sums(SeriesModel::Control { power }, k).unwrap();
        prop_assert!(r.checkpoints.windows(2).all(|w| w[1].partial_sum > w[0].partial_sum));
    }

    #[test]
    fn boundary_maps_are_homeomorphisms(s in 0.2f64..0.9, k in 3usize..12) {
        let b = build_example(&Example::PowerCusp { s }, k).unwrap();
        let smp = b.map.samples();
        prop_assert!(smp.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1));
        prop_assert!(smp.last().unwrap().1 - smp[0].1 < std::f64::consts::TAU);
        let arcs = TargetArcs::new(&Example::PowerCusp { s }, 3 * k).unwrap();
        prop_assert!(arcs.gaps.windows(2).all(|w| w[1] < w[0]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn max_principle(c in -1.0f64..1.0, d in -1.0f64..1.0, n in 1u32..4) {
        // Harmonic polynomial trace Re/Im of (c + i d) zⁿ + z.
        let trace = move |p: Point2| {
            let (r, a) = (p.norm(), p.y.atan2(p.x));
            let (re, im) = (r.powi(n as i32) * (n as f64 * a).cos(), r.powi(n as i32) * (n as f64 * a).sin());
            [c * re - d * im + p.x, c * im + d * re + p.y]
        };
        let f = solve_dirichlet_trace(disk(), 0.05, &trace).unwrap();
        prop_assert!(f.max_principle_holds(1e-9));
    }
}
