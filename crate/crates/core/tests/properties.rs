use bconf::branched_path::{compose, image_distance, one_sided_derivative, PathSegment, Side};
use bconf::charts::{build_chart, chart_apply, chart_invert, LocallyFiniteConfiguration};
use bconf::logistic::AttractorOptions;
use bconf::measure::{support_class, validate_constant_volume_path, GridFunction, Region};
use bconf::section::{branched_equilibrium_section, interval_grid};
use bconf::{
    canonicalize, dist_to_set, hausdorff_distance, hausdorff_distance_indexed, symmetrize,
    AmbientSpace, Configuration, Metric, OrderedConfiguration, Point, SpatialIndex,
};
use proptest::prelude::*;
use proptest::sample::Index;

fn metric() -> impl Strategy<Value = Metric> {
    prop_oneof![
        Just(Metric::Euclidean),
        Just(Metric::Manhattan),
        Just(Metric::Chebyshev)
    ]
}

fn rows(dim: usize, n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0..10.0f64, dim), n)
}

fn config(space: &AmbientSpace, rows: &[Vec<f64>]) -> Configuration {
    let pts: Vec<Point> = rows
        .iter()
        .map(|r| Point::new(r.clone()).unwrap())
        .collect();
    Configuration::from_points_dedup(space, &pts).unwrap()
}

prop_compose! {
    fn triple()(dim in 1usize..=3, m in metric())
        (a in rows(dim, 1..=20), b in rows(dim, 1..=20), c in rows(dim, 1..=20), dim in Just(dim), m in Just(m))
        -> (AmbientSpace, Configuration, Configuration, Configuration) {
        let space = AmbientSpace::euclidean(dim).with_metric(m);
        let (u, v, w) = (config(&space, &a), config(&space, &b), config(&space, &c));
        (space, u, v, w)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn hausdorff_metric_axioms((space, u, v, w) in triple()) {
        let d = |a: &Configuration, b: &Configuration| hausdorff_distance(space.metric, a, b).unwrap();
        prop_assert_eq!(d(&u, &v), d(&v, &u));
        prop_assert_eq!(d(&u, &u), 0.0);
        prop_assert!(d(&u, &w) <= d(&u, &v) + d(&v, &w) + 1e-12);
        if u != v {
            prop_assert!(d(&u, &v) > 0.0);
        }
    }

    #[test]
    fn indexed_matches_brute_force((space, u, v, _w) in triple()) {
        let iu = SpatialIndex::build(&u, space.metric);
        let iv = SpatialIndex::build(&v, space.metric);
        let fast = hausdorff_distance_indexed(&u, &v, &iu, &iv).unwrap();
        prop_assert_eq!(fast, hausdorff_distance(space.metric, &u, &v).unwrap());
    }

    #[test]
    fn adding_a_point_moves_by_its_distance(
        (space, u, _v, _w) in triple(),
        x in prop::collection::vec(-12.0..12.0f64, 3),
    ) {
        let x = Point::new(x[..space.dim].to_vec()).unwrap();
        prop_assume!(!u.contains(&space, x.coords()));
        let grown = u.with_point(&space, &x).unwrap();
        let expected = dist_to_set(space.metric, x.coords(), &u).unwrap();
        prop_assert_eq!(hausdorff_distance(space.metric, &u, &grown).unwrap(), expected);
    }

    #[test]
    fn canonical_form_ignores_order(r in rows(2, 1..=6), seed in any::<u64>()) {
        let space = AmbientSpace::euclidean(2);
        let o = OrderedConfiguration::from_rows(r.clone()).unwrap();
        let base = canonicalize(&o, &space.distinct());
        let mut perm: Vec<usize> = (0..o.len()).collect();
        let mut s = seed;
        for i in (1..perm.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = canonicalize(&o.permuted(&perm), &space.distinct());
        match (base, shuffled) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn symmetrization_ignores_order(r in rows(1, 1..=6), rot in any::<Index>()) {
        let o = OrderedConfiguration::from_rows(r.clone()).unwrap();
        let k = rot.index(o.len());
        let perm: Vec<usize> = (0..o.len()).map(|i| (i + k) % o.len()).collect();
        // an order-sensitive function: weighted by position
        let f = |pts: &[Point]| pts.iter().enumerate().map(|(i, p)| (i as f64 + 1.0) * p.coords()[0]).sum::<f64>();
        let a = symmetrize(f, &o).unwrap();
        let b = symmetrize(f, &o.permuted(&perm)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn chart_roundtrip(r in rows(2, 2..=60), z in prop::collection::vec(-0.6..0.6f64, 120)) {
        let space = AmbientSpace::euclidean(2);
        let u = config(&space, &r);
        prop_assume!(u.len() >= 2);
        let w = LocallyFiniteConfiguration::new(&space, u.flat().to_vec()).unwrap();
        let c = build_chart(&w).unwrap();
        prop_assert!(c.radii().iter().all(|&e| e > 0.0));
        prop_assert!(c.check_disjointness());
        let z = &z[..w.len() * 2];
        let v = chart_apply(&c, z).unwrap();
        let back = chart_invert(&c, &v).unwrap();
        for (i, (a, b)) in z.iter().zip(&back).enumerate() {
            let eps = c.radii()[i / 2];
            prop_assert!((a - b).abs() <= 1e-15 * 20.0 / eps + 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn composition_is_associative_up_to_image(
        ms in (8usize..40, 8usize..40, 8usize..40),
        k in prop::collection::vec(-2.0..2.0f64, 3),
    ) {
        let space = AmbientSpace::euclidean(2);
        let a = PathSegment::from_fn(ms.0, |t| vec![t, k[0] * t * t]).unwrap();
        let o = a.omega().to_vec();
        let b = PathSegment::from_fn(ms.1, |t| vec![o[0] + (k[1] * t).sin(), o[1] + t]).unwrap();
        let o = b.omega().to_vec();
        let c = PathSegment::from_fn(ms.2, |t| vec![o[0] - t, o[1] + k[2] * t * (1.0 - t)]).unwrap();
        let left = compose(&space, &compose(&space, &a, &b).unwrap(), &c).unwrap();
        let right = compose(&space, &a, &compose(&space, &b, &c).unwrap()).unwrap();
        prop_assert_eq!(left.alpha(), right.alpha());
        prop_assert_eq!(left.omega(), right.omega());
        // Both are piecewise-linear resamplings of one curve. Resampling cuts
        // the corners at the junctions, so the error is first order in the
        // step: each side stays within speed * step of the curve.
        let speed = [(1.0 + 4.0 * k[0] * k[0]).sqrt(), (k[1] * k[1] + 1.0).sqrt(), (1.0 + k[2] * k[2]).sqrt()]
            .into_iter()
            .fold(0.0, f64::max);
        let step = 1.0 / ms.0.min(ms.1).min(ms.2) as f64;
        let d = image_distance(&left, &right);
        prop_assert!(d <= 2.0 * speed * step, "{d}");
    }

    #[test]
    fn support_class_is_scale_invariant(
        dims in prop::collection::vec(3usize..8, 1..=3),
        seed in prop::collection::vec(-1.0..1.0f64, 512),
        lambda in prop_oneof![-1e6..-1e-3f64, 1e-3..1e6f64],
    ) {
        let interior = Region::interior(dims.clone()).unwrap();
        let values: Vec<f64> = interior
            .cells()
            .iter()
            .zip(seed.iter().cycle())
            .map(|(&inside, &s)| if inside && s > 0.0 { s + 0.01 } else { 0.0 })
            .collect();
        let origin = vec![0.0; dims.len()];
        let f = GridFunction::new(dims, 0.2, origin, values).unwrap();
        let a = support_class(&f).unwrap();
        let b = support_class(&f.scaled(lambda)).unwrap();
        prop_assert_eq!(&a.mask, &b.mask);
        prop_assert_eq!(&a.components, &b.components);
        let cells: usize = a.components.iter().map(Vec::len).sum();
        prop_assert_eq!(cells, a.cell_count());
        prop_assert!(a.volumes.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn volume_check_ignores_rescaling(
        steps in prop::collection::vec((0usize..4, 0usize..4, 1usize..3), 2..8),
        scales in prop::collection::vec(prop_oneof![-5.0..-0.1f64, 0.1..5.0f64], 8),
    ) {
        let region = Region::index_box(vec![10, 10], &[2, 2], &[8, 8]).unwrap();
        let frames: Vec<GridFunction> = steps
            .iter()
            .map(|&(i, j, s)| {
                let mut f = GridFunction::zeros(vec![10, 10], 0.1).unwrap();
                for a in 0..s {
                    for b in 0..s {
                        f.set(&[2 + i + a, 2 + j + b], 1.0);
                    }
                }
                f
            })
            .collect();
        let scaled: Vec<GridFunction> = frames.iter().zip(&scales).map(|(f, &l)| f.scaled(l)).collect();
        prop_assert_eq!(
            validate_constant_volume_path(&frames, &region).unwrap(),
            validate_constant_volume_path(&scaled, &region).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cardinality_changes_only_at_loci(a in 2.6..3.0f64, b in 0.0..0.55f64, down in any::<bool>()) {
        let grid = interval_grid(0.0, 1.0, 40).unwrap();
        let field = |x: &[f64]| if down { a + b * (1.0 - x[0]) } else { a + b * x[0] };
        let s = branched_equilibrium_section(field, &grid, AttractorOptions::default()).unwrap();
        let cards = s.sample.cardinalities();
        let changes: Vec<usize> = (0..cards.len() - 1).filter(|&i| cards[i] != cards[i + 1]).collect();
        let mut hit = vec![0usize; changes.len()];
        for l in &s.loci {
            let x = l.base_location[0];
            let k = changes.iter().position(|&i| {
                let (x0, x1) = (grid[i].coords()[0], grid[i + 1].coords()[0]);
                x >= x0 - 1e-12 && x <= x1 + 1e-12
            });
            prop_assert!(k.is_some(), "locus at {x} is not on a change");
            hit[k.unwrap()] += 1;
        }
        prop_assert!(hit.iter().all(|&h| h >= 1));
    }
}

#[test]
fn one_sided_jets_converge_at_second_order() {
    let exact = [2.0 * 2f64.cos(), -4.0 * 2f64.sin()];
    for (k, want) in [(1, exact[0]), (2, exact[1])] {
        let err = |m: usize| {
            let g = PathSegment::from_fn(m, |t| vec![(2.0 * t).sin(), t.cos()]).unwrap();
            (one_sided_derivative(&g, |p: &[f64]| p[0], k, Side::End) - want).abs()
        };
        let (e1, e2, e3) = (err(32), err(64), err(128));
        for ratio in [e1 / e2, e2 / e3] {
            assert!((3.5..4.5).contains(&ratio), "order {k}: ratio {ratio}");
        }
    }
}
