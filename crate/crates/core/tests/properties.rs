use muckenhoupt::domain::{holder_conjugate, AveragingSet, DomainDescriptor, LebesgueExponent, RadiusLadder, SetFamily, Singularity};
use muckenhoupt::hermitian::{frobenius_norm, random_positive_definite, CMatrix, HermitianMatrix, C64};
use muckenhoupt::metrics::{roudenko_constant, MatrixNorm};
use muckenhoupt::projection::{
    coordinate_criterion, eigen_projection_check, projection_bound, projection_criterion, measure_ratio, CoordinateTarget, DirectionField,
    DiscreteVectorFunction,
};
use muckenhoupt::quadrature::{build_grid, set_grid, GridLadder, GridSpec, Resolution};
use muckenhoupt::tabulated::TabulatedWeight;
use muckenhoupt::transform::{
    apply_multiplier, hilbert_op, lifted_apply, truncated_convolution, weighted_operator_norm, DiscreteGridFunction, FourierMultiplierOp,
    Kernel, NormOptions, PeriodicGrid, TruncatedKernel,
};
use muckenhoupt::weight::{MatrixWeight, ScalarWeight};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    frobenius_norm(&(a - b)) / frobenius_norm(b).max(1e-300)
}

fn random_values(rng: &mut ChaCha8Rng, len: usize) -> Vec<C64> {
    (0..len).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conjugate_is_an_involution(p in 1.01f64..100.0) {
        let q = holder_conjugate(p).unwrap();
        prop_assert!((holder_conjugate(q).unwrap() - p).abs() <= 1e-12 * p);
    }

    #[test]
    fn set_quadrature_integrates_one(
        dim in 1usize..=2,
        count in 1usize..4,
        r_frac in 0.05f64..0.45,
        sing in 0.0f64..1.0,
    ) {
        let d = DomainDescriptor::euclidean(&vec![(0.0, 1.0); dim]).unwrap();
        let fam = SetFamily::lattice(vec![count; dim], RadiusLadder::new(r_frac * 0.5, r_frac, 2));
        let singular: Vec<Singularity> = (0..dim).map(|a| Singularity::new(a, sing)).collect();
        for set in fam.enumerate(&d).unwrap() {
            let g = set_grid(&set, &d, &singular, &Resolution::default()).unwrap();
            prop_assert!((g.total_weight() - set.volume).abs() <= 1e-10 * set.volume);
        }
    }

    #[test]
    fn enumeration_is_deterministic(count in 1usize..5, n in 1usize..5) {
        let d = DomainDescriptor::euclidean(&[(0.0, 2.0), (-1.0, 1.0)]).unwrap();
        let fam = SetFamily::lattice(vec![count, count], RadiusLadder::dyadic(0.9, n));
        prop_assert_eq!(fam.enumerate(&d).unwrap(), fam.enumerate(&d).unwrap());
    }

    #[test]
    fn powers_compose(seed in any::<u64>(), n in 1usize..=6, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let m = random_positive_definite(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let lhs = m.power(a).unwrap().power(b).unwrap();
        let rhs = m.power(a * b).unwrap();
        prop_assert!(rel(lhs.matrix(), rhs.matrix()) <= 1e-10, "{}", rel(lhs.matrix(), rhs.matrix()));
    }

    #[test]
    fn inverse_is_consistent(seed in any::<u64>(), n in 1usize..=6) {
        let m = random_positive_definite(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let prod = m.power(-1.0).unwrap().matrix() * m.matrix();
        prop_assert!(rel(&prod, &CMatrix::identity(n, n)) <= 1e-10);
    }

    #[test]
    fn outputs_stay_hermitian(seed in any::<u64>(), n in 1usize..=6, s in -2.0f64..2.0) {
        let m = random_positive_definite(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let out = m.power(s).unwrap();
        prop_assert!(HermitianMatrix::new(out.matrix().clone()).is_ok());
        prop_assert!(out.check_positive_definite().is_ok());
    }

    #[test]
    fn example_pointwise_identities(e in 0.0f64..5.0) {
        let x = 10f64.powf(-e);
        let w = MatrixWeight::paper_example_unit();
        let m = w.evaluate(&[x]).unwrap();
        prop_assert!((m.det() - 1.0).abs() <= 1e-10);
        let v = m.entry(0, 0).re * m.inverse().unwrap().entry(0, 0).re;
        prop_assert!((v - (1.0 + 1.0 / x)).abs() <= 1e-9 * (1.0 + 1.0 / x));
    }

    #[test]
    fn roudenko_is_scale_invariant(a1 in -0.45f64..0.45, a2 in -0.45f64..0.45, c in -3.0f64..3.0, p in 1.3f64..4.0) {
        let w = MatrixWeight::diag_power(vec![a1, a2], None, DomainDescriptor::unit_interval()).unwrap();
        let p = LebesgueExponent::new(p).unwrap();
        let fam = SetFamily::lattice(vec![3], RadiusLadder::new(0.1, 0.4, 2));
        let res = Resolution { floor: 1e-6, ..Resolution::default() };
        let base = roudenko_constant(&w, &p, &fam, &res, MatrixNorm::Spectral).unwrap().c_hat;
        let scaled = roudenko_constant(&w.scaled(10f64.powf(c)).unwrap(), &p, &fam, &res, MatrixNorm::Spectral).unwrap().c_hat;
        prop_assert!((base - scaled).abs() <= 1e-9 * base, "{base} vs {scaled}");
    }

    #[test]
    fn enlarging_the_family_never_lowers_the_constant(mask in proptest::collection::vec(any::<bool>(), 6), alpha in -0.5f64..0.5) {
        let w = MatrixWeight::diag_power(vec![alpha, 0.0], None, DomainDescriptor::unit_interval()).unwrap();
        let p = LebesgueExponent::new(2.0).unwrap();
        let all = SetFamily::lattice(vec![3], RadiusLadder::new(0.1, 0.4, 2)).enumerate(&w.domain).unwrap();
        let mut sub: Vec<AveragingSet> = all.iter().zip(&mask).filter(|(_, &k)| k).map(|(s, _)| s.clone()).collect();
        if sub.is_empty() {
            sub.push(all[0].clone());
        }
        let res = Resolution { floor: 1e-6, ..Resolution::default() };
        let small = roudenko_constant(&w, &p, &SetFamily::Explicit { sets: sub }, &res, MatrixNorm::Spectral).unwrap().c_hat;
        let big = roudenko_constant(&w, &p, &SetFamily::Explicit { sets: all }, &res, MatrixNorm::Spectral).unwrap().c_hat;
        prop_assert!(small <= big, "{small} vs {big}");
    }

    #[test]
    fn identity_roudenko_is_one(n in 1usize..=4, p in 1.1f64..6.0, floor_exp in 2i32..11, cells in 2usize..40) {
        let w = MatrixWeight::identity(n, DomainDescriptor::unit_interval());
        let p = LebesgueExponent::new(p).unwrap();
        let res = Resolution { cells, floor: 10f64.powi(-floor_exp), ..Resolution::default() };
        let fam = SetFamily::lattice(vec![2], RadiusLadder::new(0.1, 0.4, 2));
        for norm in [MatrixNorm::Spectral, MatrixNorm::Frobenius] {
            let c = roudenko_constant(&w, &p, &fam, &res, norm).unwrap().c_hat;
            let exact = match norm {
                MatrixNorm::Spectral => 1.0,
                MatrixNorm::Frobenius => (n as f64).powf(p.p() / 2.0),
            };
            prop_assert!((c - exact).abs() <= 1e-9 * exact, "{c} vs {exact}");
        }
    }

    #[test]
    fn coordinate_criterion_is_the_general_one(t in 0.001f64..1.0, angle in 0.0f64..3.0, k in 0usize..2, p in 1.2f64..4.0) {
        let w = MatrixWeight::rotated_power([0.4, -0.3], angle, None, DomainDescriptor::unit_interval()).unwrap();
        let entry = ScalarWeight::diagonal_entry(&w, k).unwrap();
        let r = DirectionField::coordinate(2, k).unwrap();
        let a = coordinate_criterion(&w, p, k, CoordinateTarget::EntryOfW, &[t]).unwrap();
        let b = projection_criterion(&w, &entry, p, &r, &[t]).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn diagonal_condition_one_is_identically_one(a1 in -0.9f64..0.9, a2 in -0.9f64..0.9, t in 0.001f64..1.0, p in 1.2f64..4.0) {
        let w = MatrixWeight::diag_power(vec![a1, a2], None, DomainDescriptor::unit_interval()).unwrap();
        for k in 0..2 {
            let g = coordinate_criterion(&w, p, k, CoordinateTarget::EntryOfPowerTarget, &[t]).unwrap();
            prop_assert!((g - 1.0).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn eigen_identity_on_tabulated_weights(seed in any::<u64>(), n in 2usize..=5, p in prop::sample::select(vec![1.5, 2.0, 3.0])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<HermitianMatrix> = (0..6).map(|_| random_positive_definite(&mut rng, n)).collect();
        let table = TabulatedWeight::new(DomainDescriptor::unit_interval(), vec![6], Vec::new(), samples).unwrap();
        let w = MatrixWeight::tabulated(table);
        let grid = build_grid(&w.domain, &GridSpec::uniform(vec![12])).unwrap();
        for i in 0..n {
            let rep = eigen_projection_check(&w, p, i, &grid).unwrap();
            prop_assert!(rep.max_deviation <= 1e-9, "{}", rep.max_deviation);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bounded_projection_dominates_test_functions(seed in any::<u64>()) {
        // W = diag(1, x^2), r = e_2, w = x^3: g(x) = sqrt(x), bounded by 1
        let d = DomainDescriptor::unit_interval();
        let w_mat = MatrixWeight::diag_power(vec![0.0, 2.0], None, d.clone()).unwrap();
        let w = ScalarWeight::power(3.0, None, d.clone()).unwrap();
        let r = DirectionField::coordinate(2, 1).unwrap();
        let ladder = GridLadder::default_for(1, w_mat.singular.clone());
        let est = projection_bound(&w_mat, &w, 2.0, &r, &ladder).unwrap();
        prop_assert!(est.verdict.is_bounded());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = build_grid(&d, &GridSpec::uniform(vec![64]).with_order(4)).unwrap();
        let values = (0..grid.len())
            .map(|_| muckenhoupt::hermitian::CVector::from_vec(random_values(&mut rng, 2)))
            .collect();
        let f = DiscreteVectorFunction { grid, values };
        let ratio = measure_ratio(&f, &w_mat, &w, 2.0, &r).unwrap();
        prop_assert!(ratio <= 1.05 * est.b_hat, "{ratio} vs {}", est.b_hat);
    }

    #[test]
    fn multipliers_are_linear(seed in any::<u64>(), n in 4usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = PeriodicGrid::new(vec![n]).unwrap();
        let op = hilbert_op(&grid, 0).unwrap();
        let (a, b) = (C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)), C64::new(rng.gen_range(-2.0..2.0), 0.3));
        let f = random_values(&mut rng, n);
        let g = random_values(&mut rng, n);
        let comb: Vec<C64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let apply = |v: Vec<C64>| apply_multiplier(&op, &DiscreteGridFunction::scalar(grid.clone(), v).unwrap()).unwrap().components[0].clone();
        let (tf, tg, tc) = (apply(f), apply(g), apply(comb));
        for i in 0..n {
            prop_assert!((tc[i] - (a * tf[i] + b * tg[i])).norm() <= 1e-10);
        }
    }

    #[test]
    fn truncated_convolution_is_linear(seed in any::<u64>(), e in 1usize..3, big in 3usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = PeriodicGrid::product(&[16], &[16]).unwrap();
        let h = 1.0 / 16.0;
        let tk = TruncatedKernel::new(Kernel::product_hilbert(), [e as f64 * h, e as f64 * h], [big as f64 * h; 2]).unwrap();
        let f = random_values(&mut rng, grid.len());
        let g = random_values(&mut rng, grid.len());
        let a = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let comb: Vec<C64> = f.iter().zip(&g).map(|(x, y)| a * x + y).collect();
        let conv = |v: Vec<C64>| truncated_convolution(&DiscreteGridFunction::scalar(grid.clone(), v).unwrap(), &tk).unwrap().components[0].clone();
        let (tf, tg, tc) = (conv(f), conv(g), conv(comb));
        for i in 0..grid.len() {
            prop_assert!((tc[i] - (a * tf[i] + tg[i])).norm() <= 1e-10 * (1.0 + tc[i].norm()));
        }
    }

    #[test]
    fn unimodular_multipliers_are_isometries(seed in any::<u64>(), n in 8usize..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = PeriodicGrid::new(vec![n]).unwrap();
        let phases: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let op = FourierMultiplierOp::from_symbol(grid, "phase", |k| C64::from_polar(1.0, phases[k]));
        let w = MatrixWeight::identity(1, DomainDescriptor::unit_interval());
        let est = weighted_operator_norm(&op, &w, &LebesgueExponent::new(2.0).unwrap(), &NormOptions { trials: 2, iterations: 50, ..NormOptions::default() }).unwrap();
        prop_assert!((est.estimate - 1.0).abs() <= 1e-6, "{}", est.estimate);
    }

    #[test]
    fn more_effort_never_lowers_estimates(seed in 0u64..1000, trials in 1usize..4, iters in 2usize..30, p in prop::sample::select(vec![1.5, 2.0, 3.0])) {
        let grid = PeriodicGrid::new(vec![32]).unwrap();
        let op = hilbert_op(&grid, 0).unwrap();
        let w = MatrixWeight::diag_power(vec![0.5], Some(vec![0.5]), DomainDescriptor::unit_interval()).unwrap();
        let p = LebesgueExponent::new(p).unwrap();
        let run = |t: usize, i: usize| weighted_operator_norm(&op, &w, &p, &NormOptions { trials: t, iterations: i, seed, tol: 0.0 }).unwrap().estimate;
        let base = run(trials, iters);
        prop_assert!(run(trials + 1, iters) >= base);
        prop_assert!(run(trials, iters + 5) >= base);
    }

    #[test]
    fn lifting_commutes_with_projection(seed in any::<u64>(), n_vec in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = PeriodicGrid::new(vec![24]).unwrap();
        let op = hilbert_op(&grid, 0).unwrap();
        let mut f = DiscreteGridFunction::zeros(grid.clone(), n_vec);
        for c in &mut f.components {
            *c = random_values(&mut rng, grid.len());
        }
        let lifted = lifted_apply(&op, &f).unwrap();
        for j in 0..n_vec {
            let direct = apply_multiplier(&op, &f.component(j).unwrap()).unwrap();
            prop_assert_eq!(&lifted.component(j).unwrap().components, &direct.components);
        }
    }

    #[test]
    fn hilbert_is_skew_adjoint(seed in any::<u64>(), n in 4usize..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = PeriodicGrid::new(vec![n]).unwrap();
        let op = hilbert_op(&grid, 0).unwrap();
        let f = random_values(&mut rng, n);
        let g = random_values(&mut rng, n);
        let apply = |v: &[C64]| apply_multiplier(&op, &DiscreteGridFunction::scalar(grid.clone(), v.to_vec()).unwrap()).unwrap().components[0].clone();
        let lhs = inner(&apply(&f), &g);
        let rhs = -inner(&f, &apply(&g));
        prop_assert!((lhs - rhs).norm() <= 1e-10 * n as f64);
    }
}
