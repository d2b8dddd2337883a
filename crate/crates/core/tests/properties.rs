//! Randomized invariant checks over the public API: metric axioms,
//! discretization containment, energy matrix structure, minimizer
//! feasibility, hit-rate monotonicity, and serialization round trips.

use proptest::prelude::*;
use proptest::sample::subsequence;

use thermcap::capacity::{
    build_energy_matrix, minimize_energy, quadratic_energy, DiagonalPolicy, SolverParams,
};
use thermcap::dimension::{
    box_dimension, gamma_star_bracket, gamma_star_closed_form, hit_dichotomy, product_dim_bounds,
    BoxMetric, HitVerdict,
};
use thermcap::experiments::parse_config;
use thermcap::geometry::{
    build_product_grid, discretize_set, parabolic_distance, DiscretizeLimits, GridLimits, SetSpec,
};
use thermcap::hitting::{estimate_hit_prob, HitParams};
use thermcap::Error;

fn coords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

/// Time points on a coarse 1-D lattice in (0, inf), pairwise distinct.
fn time_points() -> impl Strategy<Value = Vec<Vec<f64>>> {
    subsequence((0..10).collect::<Vec<usize>>(), 2..=4)
        .prop_map(|idx| idx.into_iter().map(|i| vec![1.0 + 0.2 * i as f64]).collect())
}

/// Space points on a coarse lattice in dimension 1 or 2, pairwise distinct.
fn space_points() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=2).prop_flat_map(|d| {
        subsequence((0..12).collect::<Vec<usize>>(), 1..=4).prop_map(move |idx| {
            idx.into_iter()
                .map(|i| {
                    if d == 1 {
                        vec![0.3 * i as f64 - 1.0]
                    } else {
                        vec![0.3 * (i % 4) as f64, 0.3 * (i / 4) as f64]
                    }
                })
                .collect()
        })
    })
}

/// Coarse binary fractions: their shortest decimal forms parse back to the
/// same double, so serialization round trips are exact. Arbitrary doubles
/// would test the JSON parser's last-ulp behavior instead of this crate.
fn qcoord(lo: i32, hi: i32) -> impl Strategy<Value = f64> {
    (lo..hi).prop_map(|i| f64::from(i) / 1024.0)
}

fn qcoords(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(qcoord(-2048, 2048), n)
}

fn leaf_spec() -> impl Strategy<Value = SetSpec> {
    prop_oneof![
        (1usize..=3).prop_flat_map(|n| (qcoords(n), prop::collection::vec(qcoord(11, 2048), n))
            .prop_map(|(lo, side)| {
                let hi = lo.iter().zip(&side).map(|(a, s)| a + s).collect();
                SetSpec::IntervalBox { lo, hi }
            })),
        (1usize..=3).prop_flat_map(|n| (qcoords(n), qcoord(11, 1536))
            .prop_map(|(center, radius)| SetSpec::Ball { center, radius })),
        (1usize..=3).prop_flat_map(|n| prop::collection::vec(qcoords(n), 1..4)
            .prop_map(|points| SetSpec::PointCloud { points })),
        (qcoord(52, 460), 1usize..=2, 1usize..=6).prop_flat_map(|(ratio, n, depth)| {
            prop::collection::vec(prop::collection::vec(qcoord(0, 2048), n), 2..4)
                .prop_map(move |offsets| SetSpec::SelfSimilarIfs { ratio, offsets, depth })
        }),
    ]
}

fn any_spec() -> impl Strategy<Value = SetSpec> {
    prop_oneof![
        4 => leaf_spec(),
        1 => prop::collection::vec(leaf_spec(), 2..4).prop_map(|parts| {
            // Union parts must share an ambient dimension to be meaningful;
            // serde does not care, but keep the instances honest.
            let n = parts[0].ambient_dim();
            let parts = parts.into_iter().filter(|p| p.ambient_dim() == n).collect();
            SetSpec::Union { parts }
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn parabolic_distance_is_a_metric(
        (s_pts, x_pts) in (1usize..=3, 1usize..=3).prop_flat_map(|(n, d)| (
            prop::collection::vec(coords(n), 3),
            prop::collection::vec(coords(d), 3),
        ))
    ) {
        let rho = |i: usize, j: usize| {
            parabolic_distance(&s_pts[i], &x_pts[i], &s_pts[j], &x_pts[j]).unwrap()
        };
        prop_assert_eq!(rho(0, 0), 0.0);
        prop_assert_eq!(rho(0, 1), rho(1, 0));
        // sqrt of a metric is a metric and max preserves the triangle
        // inequality, so this must hold up to roundoff.
        prop_assert!(rho(0, 2) <= rho(0, 1) + rho(1, 2) + 1e-12);
    }

    #[test]
    fn exponent_calculus_is_consistent(
        e in 0.0..2.0f64,
        f in 0.0..3.0f64,
        df in 0.0..1.0f64,
        d in 1usize..=4,
    ) {
        let gs = gamma_star_closed_form(e, f, d).unwrap();
        prop_assert!((0.0..=f).contains(&gs));
        // Monotone in the state dimension, antitone in the ambient one.
        prop_assert!(gamma_star_closed_form(e, f + df, d).unwrap() >= gs);
        prop_assert!(gamma_star_closed_form(e, f, d + 1).unwrap() <= gs);

        // With exact factor dimensions the bracket collapses onto the
        // closed form; the two are computed along different float routes.
        let rho = f + 2.0 * e;
        let bracket = gamma_star_bracket(rho, e, f, d).unwrap();
        prop_assert!(bracket.lower <= bracket.upper + 1e-12);
        prop_assert!((bracket.lower - gs).abs() <= 1e-9, "bracket {} vs closed form {gs}", bracket.lower);
        prop_assert!((bracket.upper - gs).abs() <= 1e-9);
        prop_assert!(bracket.closed_form.is_some());

        let (lo, hi) = product_dim_bounds(e, e, f, f).unwrap();
        prop_assert!((lo - rho).abs() <= 1e-12 && (hi - rho).abs() <= 1e-12);

        if rho > d as f64 + 1e-9 {
            prop_assert_eq!(hit_dichotomy(rho, d).unwrap(), HitVerdict::Hits);
        } else if rho < d as f64 - 1e-9 {
            prop_assert_eq!(hit_dichotomy(rho, d).unwrap(), HitVerdict::NoHit);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn interval_cells_stay_inside_the_box(
        (lo, side, resolution) in (1usize..=2).prop_flat_map(|n| (
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(0.05..1.2f64, n),
            0.05..1.0f64,
        ))
    ) {
        let hi: Vec<f64> = lo.iter().zip(&side).map(|(a, s)| a + s).collect();
        let spec = SetSpec::IntervalBox { lo: lo.clone(), hi: hi.clone() };
        let cells = discretize_set(&spec, resolution, &DiscretizeLimits::default()).unwrap();
        prop_assert!(!cells.is_empty());
        // Each cell is at most resolution wide per axis, so its half
        // diameter is bounded by half the diagonal of a resolution cube.
        let hd_cap = 0.5 * resolution * (lo.len() as f64).sqrt() + 1e-12;
        for cell in &cells {
            prop_assert!(cell.half_diameter > 0.0 && cell.half_diameter <= hd_cap);
            for ((&x, &a), &b) in cell.rep.iter().zip(&lo).zip(&hi) {
                prop_assert!(x >= a - 1e-12 && x <= b + 1e-12);
            }
        }

        // The cell budget is a hard contract: stay under it or refuse.
        let tight = DiscretizeLimits { max_cells: 8, ..DiscretizeLimits::default() };
        match discretize_set(&spec, resolution, &tight) {
            Ok(cells) => prop_assert!(cells.len() <= 8),
            Err(Error::ResourceLimit(_)) => {}
            Err(other) => prop_assert!(false, "unexpected error: {other}"),
        }
    }

    #[test]
    fn box_counts_respect_set_structure(
        points in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 2..20)
            .prop_map(|v| v.into_iter().map(|(a, b)| vec![a, b]).collect::<Vec<_>>())
    ) {
        let scales = [0.125, 0.0625, 0.03125, 0.015625];
        let report = box_dimension(&points, BoxMetric::Euclidean, &scales).unwrap();
        for &c in &report.counts {
            prop_assert!(c >= 1 && c <= points.len());
        }
        // Dyadic grids nest, so counts cannot drop as the scale shrinks.
        for pair in report.counts.windows(2) {
            prop_assert!(pair[0] <= pair[1]);
        }

        // Counting sees the set, not the multiset.
        let doubled: Vec<Vec<f64>> = points.iter().chain(&points).cloned().collect();
        let doubled_report = box_dimension(&doubled, BoxMetric::Euclidean, &scales).unwrap();
        prop_assert_eq!(&report.counts, &doubled_report.counts);
        prop_assert_eq!(report.estimate, doubled_report.estimate);

        // A subset occupies no more boxes at any scale.
        let half = &points[..points.len() / 2];
        if !half.is_empty() {
            let sub = box_dimension(half, BoxMetric::Euclidean, &scales).unwrap();
            for (s, f) in sub.counts.iter().zip(&report.counts) {
                prop_assert!(s <= f);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn energy_matrices_are_symmetric_nonnegative_and_finite(
        time in time_points(),
        space in space_points(),
        gamma in 0.0..1.5f64,
    ) {
        let e = SetSpec::PointCloud { points: time };
        let f = SetSpec::PointCloud { points: space };
        let grid = build_product_grid(&e, &f, 0.05, 0.05, &GridLimits::default()).unwrap();
        for policy in [DiagonalPolicy::Exclude, DiagonalPolicy::CellProxy] {
            let k = build_energy_matrix(&grid, gamma, policy).unwrap();
            prop_assert!(k.is_finite());
            let n = k.n();
            for a in 0..n {
                for b in 0..=a {
                    let v = k.entry(a, b);
                    prop_assert!(v >= 0.0);
                    prop_assert_eq!(v, k.entry(b, a));
                }
            }
            if policy == DiagonalPolicy::Exclude {
                for a in 0..n {
                    prop_assert_eq!(k.entry(a, a), 0.0);
                }
            }
        }
    }

    #[test]
    fn set_specs_round_trip_through_serde(spec in any_spec()) {
        let text = serde_json::to_string(&spec).unwrap();
        let back: SetSpec = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, spec);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn minimizer_returns_feasible_weights_no_worse_than_uniform(
        time in time_points(),
        space in space_points(),
        gamma in 0.0..1.2f64,
    ) {
        let e = SetSpec::PointCloud { points: time };
        let f = SetSpec::PointCloud { points: space };
        let grid = build_product_grid(&e, &f, 0.05, 0.05, &GridLimits::default()).unwrap();
        let k = build_energy_matrix(&grid, gamma, DiagonalPolicy::Exclude).unwrap();
        let params = SolverParams { max_iters: 20_000, ..SolverParams::default() };
        let report = minimize_energy(&k, &params).unwrap();

        let n = k.n();
        prop_assert_eq!(report.weights.len(), n);
        prop_assert!(report.weights.iter().all(|&w| w >= 0.0));
        let total: f64 = report.weights.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9, "mass {total}");
        for slice in report.weights.chunks(k.n_space()) {
            prop_assert!(slice.iter().sum::<f64>() <= params.slice_cap + 1e-9);
        }

        // The reported energy is the quadratic form at the reported point.
        let recomputed = quadratic_energy(&report.weights, &k).unwrap();
        prop_assert!((report.energy - recomputed).abs() <= 1e-7 * recomputed.abs().max(1.0));

        // Uniform weights are the solver's first start and line search never
        // increases the energy, so the result can only improve on them.
        let uniform = vec![1.0 / n as f64; n];
        let base = quadratic_energy(&uniform, &k).unwrap();
        prop_assert!(report.energy <= base + 1e-9 * base.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn config_digest_ignores_key_order(
        order in Just((0..7usize).collect::<Vec<_>>()).prop_shuffle(),
        refinement_variant in 0usize..2,
    ) {
        let refinements = [
            r#"{ "time_resolutions": [0.5, 0.25], "space_resolutions": [0.5, 0.25] }"#,
            r#"{ "space_resolutions": [0.5, 0.25], "time_resolutions": [0.5, 0.25] }"#,
        ];
        let fragments = [
            (r#""mode""#, r#""capacity""#),
            (r#""seed""#, "7"),
            (r#""out_prefix""#, r#""digest_probe""#),
            (r#""gamma""#, "0.25"),
            (r#""time_set""#, r#"{ "kind": "interval_box", "lo": [1.0], "hi": [2.0] }"#),
            (r#""space_set""#, r#"{ "kind": "interval_box", "lo": [0.0], "hi": [1.0] }"#),
            (r#""refinement""#, refinements[refinement_variant]),
        ];
        let render = |idx: &[usize]| {
            let body: Vec<String> = idx
                .iter()
                .map(|&i| format!("{}: {}", fragments[i].0, fragments[i].1))
                .collect();
            format!("{{ {} }}", body.join(", "))
        };
        let canonical: Vec<usize> = (0..7).collect();
        let a = parse_config(&render(&canonical)).unwrap();
        let b = parse_config(&render(&order)).unwrap();
        prop_assert_eq!(a.digest, b.digest);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn hit_rates_are_monotone_in_epsilon(
        seed in any::<u64>(),
        n_paths in 100usize..=250,
    ) {
        let time = SetSpec::IntervalBox { lo: vec![1.0], hi: vec![2.0] };
        let target = SetSpec::PointCloud { points: vec![vec![0.0]] };
        let eps = [0.5, 0.25, 0.125];
        let params = HitParams {
            n_paths,
            lattice_resolution: 0.0035,
            seed,
            max_nodes: 1 << 20,
        };
        let est = estimate_hit_prob(&time, &target, &eps, &params).unwrap();
        prop_assert_eq!(est.rates.len(), eps.len());
        for (rate, hw) in est.rates.iter().zip(&est.wilson_halfwidths) {
            prop_assert!((0.0..=1.0).contains(rate));
            prop_assert!(*hw > 0.0 && *hw < 1.0);
        }
        // All epsilons share one minimum distance per path, so shrinking
        // epsilon can only lose hits.
        for pair in est.rates.windows(2) {
            prop_assert!(pair[0] >= pair[1]);
        }
        prop_assert!(est.floor >= 0.0);
    }
}
