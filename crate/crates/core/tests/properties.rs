use homog_core::cone::{homogeneity_exponents, sector_eigenvalues};
use homog_core::ensemble::{sample_field, EnsembleSpec};
use homog_core::harness::{decode_field, encode_field, parse_number, ConfigDocument};
use homog_core::meyers::{weight_eval, WeightSpec};
use homog_core::pde::{assemble_operator, Domain, DomainKind, FarBoundary, Grid, ScalarField};
use homog_core::stats::mean_stderr;
use proptest::prelude::*;

fn kinds() -> impl Strategy<Value = DomainKind> {
    prop_oneof![
        Just(DomainKind::Torus),
        Just(DomainKind::Box),
        Just(DomainKind::CornerBox),
        Just(DomainKind::Slab {
            far: FarBoundary::Neumann
        }),
        Just(DomainKind::Slab {
            far: FarBoundary::Dirichlet
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_index_roundtrip(n0 in 1usize..9, n1 in 1usize..9, n2 in 1usize..9, seed in any::<u64>()) {
        let g = Grid::new(3, &[n0, n1, n2], 0.5).unwrap();
        let c = (seed as usize) % g.len();
        prop_assert_eq!(g.index(g.coords(c)), c);
        prop_assert_eq!(g.locate_global(g.global(c)), Some(c));
    }

    #[test]
    fn exponents_solve_the_indicial_equation(lambda in 1e-3f64..200.0, d in 2usize..4) {
        let s = homogeneity_exponents(&[lambda], d).unwrap();
        let b = s.exponents[0];
        prop_assert!(b > 0.0);
        prop_assert!((b * (b + d as f64 - 2.0) - lambda).abs() <= 1e-9 * lambda.max(1.0));
    }

    #[test]
    fn sector_spectrum_is_increasing(omega in 0.05f64..6.2) {
        let q = sector_eigenvalues(omega, 6).unwrap();
        prop_assert!(q.windows(2).all(|w| w[1] > w[0]));
        // Wider sectors have smaller first eigenvalues.
        let wider = sector_eigenvalues((omega * 1.1).min(6.2), 1).unwrap();
        prop_assert!(wider[0] <= q[0]);
    }

    #[test]
    fn fractions_parse_exactly(p in 1i64..1000, q in 1i64..1000) {
        let v = parse_number(&format!("{p}/{q}")).unwrap();
        prop_assert_eq!(v, p as f64 / q as f64);
        prop_assert_eq!(parse_number(&format!("{}", v)).unwrap(), v);
    }

    #[test]
    fn config_hash_ignores_key_order(a in 1u32..100, b in 1u32..100) {
        let x = ConfigDocument::parse(&format!("[grid]\nn = {a}\nh = {b}\n")).unwrap();
        let y = ConfigDocument::parse(&format!("[grid]\nh = {b}\nn = {a}\n")).unwrap();
        prop_assert_eq!(x.hash(), y.hash());
    }

    #[test]
    fn dump_roundtrip_is_bit_exact(
        d in 2usize..4,
        n in 1usize..6,
        kind in kinds(),
        data in prop::collection::vec(any::<f64>(), 125),
    ) {
        let g = Grid::cube(d, n, 0.125).unwrap();
        let f = ScalarField::from_vec(g, data[..g.len()].to_vec()).unwrap();
        let (back, k) = decode_field(&encode_field(&f, kind)).unwrap();
        prop_assert_eq!(k, kind);
        prop_assert_eq!(back.grid.extents(), g.extents());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.data), bits(&f.data));
    }

    #[test]
    fn weights_are_at_least_one_and_radial(alpha in 0.0f64..4.0, r in 0.01f64..2.0, s in 0.0f64..5.0, t in 0.0f64..5.0) {
        let w = WeightSpec::new(alpha, r, [0.0; 3]).unwrap();
        let (lo, hi) = (s.min(t), s.max(t));
        let near = weight_eval(&w, &[lo, 0.0, 0.0]);
        let far = weight_eval(&w, &[0.0, hi, 0.0]);
        prop_assert!(near >= 1.0);
        prop_assert!(far >= near * (1.0 - 1e-12));
    }

    #[test]
    fn operator_is_symmetric(kind in kinds(), seed in 0u64..1000, massive in 0.0f64..2.0) {
        let g = Grid::new(2, &[7, 6], 0.5).unwrap();
        let dom = Domain::new(g, kind).unwrap();
        let a = sample_field(&EnsembleSpec::gaussian_clipped(0.2, seed), &g, seed).unwrap();
        let op = assemble_operator(&a, &dom, massive).unwrap();
        prop_assert!(op.system().is_symmetric(1e-13));
    }

    #[test]
    fn samples_depend_on_global_position_only(seed in 0u64..1000, shift in -8i64..8) {
        let spec = EnsembleSpec::checkerboard(0.25, seed);
        let base = Grid::new(2, &[12, 12], 0.25).unwrap();
        let moved = base.with_offset(&[shift, -shift]);
        let a = sample_field(&spec, &base, 3).unwrap();
        let b = sample_field(&spec, &moved, 3).unwrap();
        for c in 0..moved.len() {
            if let Some(src) = base.locate_global(moved.global(c)) {
                prop_assert_eq!(a.get(src, 0, 0), b.get(c, 0, 0));
            }
        }
    }

    #[test]
    fn mean_and_stderr_are_equivariant(xs in prop::collection::vec(-1e3f64..1e3, 2..40), k in -1e2f64..1e2) {
        let (m, s) = mean_stderr(&xs);
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + k).collect();
        let (m2, s2) = mean_stderr(&ys);
        prop_assert!((m2 - (2.0 * m + k)).abs() <= 1e-9 * (1.0 + m2.abs()));
        prop_assert!((s2 - 2.0 * s).abs() <= 1e-9 * (1.0 + s2));
    }
}
