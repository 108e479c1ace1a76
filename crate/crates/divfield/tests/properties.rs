use divfield::decomp::BallBogovskii;
use divfield::domain::{rasterize, DomainSpec, GridDomain};
use divfield::field::{lp_norm, ScalarField};
use divfield::grid::{segment_in_mask, Grid};
use divfield::kernel::Kernel;
use divfield::paths::build_family;
use divfield::poincare::median_level;
use divfield::weight::{compute_weight_at, WeightOptions};
use divfield::whitney::{check, decompose, partition_of_unity, WhitneyCube};
use proptest::prelude::*;

fn small_spec() -> impl Strategy<Value = DomainSpec> {
    prop_oneof![
        (0.5f64..2.0).prop_map(|r| DomainSpec::disk(r).unwrap()),
        (0.5f64..2.0).prop_map(|s| DomainSpec::square(s).unwrap()),
        (0.3f64..0.9).prop_map(|a| DomainSpec::hoelder_cusp(a).unwrap()),
        (2.0f64..4.0).prop_map(|k| DomainSpec::friedrichs_cusp(k).unwrap()),
    ]
}

fn small_domain() -> impl Strategy<Value = GridDomain> {
    (small_spec(), 8usize..20).prop_filter_map("rasterizes", |(s, r)| rasterize(&s, r).ok())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spec_text_round_trips(spec in small_spec()) {
        let back: DomainSpec = spec.to_string().parse().unwrap();
        prop_assert_eq!(back.to_string(), spec.to_string());
    }

    #[test]
    fn cell_centers_map_back_to_their_cell(nx in 1usize..50, ny in 1usize..50, h in 0.01f64..1.0, i in 0usize..50, j in 0usize..50) {
        let g = Grid { nx, ny, h, origin: [-0.3, 0.7] };
        let (i, j) = (i % nx, j % ny);
        let c = g.index(i, j);
        prop_assert_eq!(g.coords(c), (i, j));
        prop_assert_eq!(g.cell_of(g.center(c)), (i as i64, j as i64));
    }

    #[test]
    fn lp_norm_is_homogeneous(v in prop::collection::vec(0.0f64..10.0, 1..40), a in -5.0f64..5.0, p in 1.0f64..6.0) {
        let base = lp_norm(v.iter().copied(), 0.1, p);
        let scaled = lp_norm(v.iter().map(|x| (a * x).abs()), 0.1, p);
        prop_assert!((scaled - a.abs() * base).abs() <= 1e-9 * (1.0 + scaled.abs()));
    }

    #[test]
    fn double_cubes_stay_inside(dom in small_domain()) {
        let dec = decompose(&dom).unwrap();
        prop_assert_eq!(check(&dom, &dec).double_failures, 0);
        for c in dom.true_cells() {
            prop_assert!(dec.locate(c).is_some());
        }
    }

    #[test]
    fn partition_of_unity_sums_to_one(dom in small_domain()) {
        let dec = decompose(&dom).unwrap();
        let pou = partition_of_unity(&dom, &dec);
        for c in dom.true_cells().filter(|&c| dec.covered[c]) {
            let total: f64 = (0..dec.len()).map(|j| pou.chi(&dom, &dec, j, c).0).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn paths_stay_inside_and_respect_the_ramp_cap(dom in small_domain(), pick in 0usize..1000) {
        let dec = decompose(&dom).unwrap();
        let fam = build_family(&dom, &dec).unwrap();
        let cells: Vec<usize> = dom.true_cells().collect();
        let y = cells[pick % cells.len()];
        let tr = fam.trace(&dom, &dec, y);
        prop_assert_eq!(*tr.points.last().unwrap(), dom.x0_point());
        for w in tr.points.windows(2) {
            prop_assert!(segment_in_mask(&dom.grid, &dom.mask, w[0], w[1]));
        }
        prop_assert!(tr.alpha <= 0.2 + 1e-9);
        prop_assert!(tr.tau <= tr.length + 1e-12);
    }

    #[test]
    fn weight_covers_the_inner_ball(dom in small_domain(), pick in 0usize..1000) {
        let dec = decompose(&dom).unwrap();
        let fam = build_family(&dom, &dec).unwrap();
        let cells: Vec<usize> = dom.true_cells().collect();
        let x = cells[pick % cells.len()];
        let w = compute_weight_at(&dom, &dec, &fam, WeightOptions::default(), &[x]).unwrap();
        let omega = w.get(x).unwrap();
        let p = dom.grid.center(x);
        let r = 0.5 * dom.d[x] - dom.h();
        let inside = cells.iter().filter(|&&y| {
            let q = dom.grid.center(y);
            (p[0] - q[0]).hypot(p[1] - q[1]) < r
        }).count() as f64 * dom.cell_volume();
        prop_assert!(omega >= inside);
        prop_assert!(omega <= dom.area() + 1e-12);
    }

    #[test]
    fn median_level_halves_the_cells(values in prop::collection::vec(-3i32..3, 256)) {
        let dom = rasterize(&DomainSpec::square(1.0).unwrap(), 16).unwrap();
        let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
        let lam = median_level(&dom, &v);
        let n = dom.true_count();
        prop_assert!(2 * dom.true_cells().filter(|&c| v[c] <= lam).count() >= n);
        prop_assert!(2 * dom.true_cells().filter(|&c| v[c] >= lam).count() >= n);
    }

    #[test]
    fn ball_operator_scales_like_inverse_length(scale in 0.1f64..10.0, t in 0.05f64..0.9, s in 0.05f64..0.9, angle in 0.0f64..std::f64::consts::TAU) {
        let unit = WhitneyCube { k: 0, cell_lo: [0, 0], side_cells: 1, center: [0.0, 0.0], side: 1.0 };
        let big = WhitneyCube { side: scale, ..unit };
        let (a, b) = (BallBogovskii::for_cube(&unit), BallBogovskii::for_cube(&big));
        let r = 0.5;
        let x = [t * r * angle.cos(), t * r * angle.sin()];
        let y = [-s * r * angle.sin(), s * r * angle.cos()];
        let g1 = a.kernel(x, y);
        let g2 = b.kernel([scale * x[0], scale * x[1]], [scale * y[0], scale * y[1]]);
        for k in 0..2 {
            prop_assert!((g2[k] * scale - g1[k]).abs() <= 1e-10 * (1.0 + g1[k].abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn kernel_solution_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let dom = rasterize(&DomainSpec::hoelder_cusp(0.5).unwrap(), 12).unwrap();
        let dec = decompose(&dom).unwrap();
        let fam = build_family(&dom, &dec).unwrap();
        let k = Kernel::new(&dom, &dec, &fam);
        let f = ScalarField::from_fn(&dom, |p| p[0]).mean_zero(&dom).unwrap();
        let g = ScalarField::from_fn(&dom, |p| p[1] * p[1]).mean_zero(&dom).unwrap();
        let (uf, ug) = (k.solve(&f).unwrap(), k.solve(&g).unwrap());
        let combo = k.solve(&f.combine(a, &g, b).unwrap()).unwrap();
        for c in dom.true_cells() {
            for i in 0..2 {
                let expect = a * uf.values[c][i] + b * ug.values[c][i];
                prop_assert!((combo.values[c][i] - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
            }
        }
    }
}
