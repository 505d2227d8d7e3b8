//! Property tests over random inputs.

use ainfty_lab::ainfty::{kbar, worst_ratio, worst_ratio_bruteforce};
use ainfty_lab::cover::{build_good_cover, verify_cover};
use ainfty_lab::dyadic::DyadicCube;
use ainfty_lab::measure::{make_measure, DataFunction, DiscreteMeasure, MeasureSpec};
use ainfty_lab::oscillate::{build_oscillating_data, oscillation_terms};
use ainfty_lab::pde::{assemble, operator_suite, BoundaryData, DirichletProblem, Grid, SolverOptions};
use ainfty_lab::Error;
use proptest::prelude::*;

fn measure_strategy() -> impl Strategy<Value = DiscreteMeasure> {
    (1u8..=2, 0usize..3, 0.1f64..0.9, 2.0f64..6.0, any::<u64>()).prop_map(|(dim, kind, p, kappa, seed)| {
        let depth = if dim == 1 { 8 } else { 4 };
        let spec = match kind {
            0 => MeasureSpec::Lebesgue,
            1 => MeasureSpec::Bernoulli { p },
            _ => MeasureSpec::RandomDoubling { kappa, seed },
        };
        make_measure(&spec, dim, depth).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn morton_round_trip(dim in 1u8..=2, level in 0u32..=10, raw in any::<u64>()) {
        let m = raw % (1u64 << (dim as u32 * level));
        let q = DyadicCube::from_morton(dim, level, m);
        prop_assert_eq!(q.morton(), m);
        if level > 0 {
            let p = q.parent().unwrap();
            prop_assert!(p.contains(&q));
            prop_assert!(q.cell_range(12).start >= p.cell_range(12).start);
            prop_assert!(q.cell_range(12).end <= p.cell_range(12).end);
        }
    }

    #[test]
    fn cube_masses_add_up(mu in measure_strategy(), level in 0u32..4, raw in any::<u64>()) {
        let m = raw % (1u64 << (mu.dim() as u32 * level));
        let q = DyadicCube::from_morton(mu.dim(), level, m);
        let direct: f64 = mu.cells()[q.cell_range(mu.depth())].iter().sum();
        prop_assert!((mu.cube_mass(&q).unwrap() - direct).abs() <= 1e-12 * direct.max(1e-300));
        prop_assert!(mu.doubling_constant() >= (1u32 << mu.dim()) as f64 * (1.0 - 1e-12));
    }

    #[test]
    fn covers_verify_and_repeat(mu in measure_strategy(), cells in prop::collection::vec(any::<usize>(), 1..4), frac in 0.1f64..0.95) {
        let n = mu.num_cells();
        let set = DataFunction::indicator(mu.dim(), mu.depth(), cells.iter().map(|c| c % n)).unwrap();
        let eps0p = frac / mu.doubling_constant();
        match build_good_cover(&mu, &set, eps0p) {
            Ok(c) => {
                let report = verify_cover(&mu, &c).unwrap();
                prop_assert!(report.passed(), "{:?}", report.failed_checks());
                let again = build_good_cover(&mu, &set, eps0p).unwrap();
                prop_assert_eq!(&c, &again);
                let f = build_oscillating_data(&c);
                prop_assert!(f.values().iter().all(|&v| v <= 1));
                let total: usize = oscillation_terms(&c).iter().map(|t| t.count()).sum();
                prop_assert_eq!(total, f.count());
            }
            Err(Error::SetTooLarge { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn removing_cells_never_shortens_cover(mu in measure_strategy(), a in any::<usize>(), b in any::<usize>()) {
        let n = mu.num_cells();
        let eps0p = 0.5 / mu.doubling_constant();
        let big = DataFunction::indicator(mu.dim(), mu.depth(), [a % n, b % n]).unwrap();
        let small = DataFunction::indicator(mu.dim(), mu.depth(), [a % n]).unwrap();
        if let (Ok(cb), Ok(cs)) = (build_good_cover(&mu, &big, eps0p), build_good_cover(&mu, &small, eps0p)) {
            prop_assert!(cs.k() >= cb.k());
        }
    }

    #[test]
    fn fractional_greedy_is_optimal(
        omega in prop::collection::vec(0.0f64..1.0, 1..9),
        sigma in prop::collection::vec(0.01f64..1.0, 8),
        delta in 0.001f64..1.0,
        scale in 0.01f64..100.0,
    ) {
        let sigma = &sigma[..omega.len()];
        if omega.iter().sum::<f64>() > 0.0 {
            let g = worst_ratio(&omega, sigma, delta, false).unwrap();
            let b = worst_ratio_bruteforce(&omega, sigma, delta, false).unwrap();
            prop_assert!((g - b).abs() <= 1e-12, "greedy {g} brute {b}");
            let scaled: Vec<f64> = omega.iter().map(|w| w * scale).collect();
            let s = worst_ratio(&scaled, sigma, delta, false).unwrap();
            prop_assert!((s - g).abs() <= 1e-12);
            let c = worst_ratio(&omega, sigma, delta, true).unwrap();
            prop_assert!(c <= g + 1e-12);
        }
    }

    #[test]
    fn kbar_is_floor_of_log(k in 0u32..30, frac in 0.0f64..0.999) {
        let omega = (-(k as f64 + frac)).exp();
        prop_assert_eq!(kbar(omega), k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn interior_rows_sum_to_zero(op in 0usize..5, k in 2u32..4) {
        let field = &operator_suite()[op];
        let grid = Grid::truncated(0.0, 1.0, k as f64, 1.0 / 8.0).unwrap();
        let sys = assemble(field, &grid).unwrap();
        for j in 1..grid.nt - 1 {
            for i in 1..grid.nx - 1 {
                let row = sys.stencil.row(i, j);
                let sum: f64 = row.iter().sum();
                prop_assert!(sum.abs() <= 1e-12 * row[0].abs(), "row ({i},{j}) sums to {sum}");
            }
        }
    }

    #[test]
    fn solutions_respect_data_range(op in 0usize..5, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let field = &operator_suite()[op];
        let grid = Grid::truncated(0.0, 1.0, 2.0, 1.0 / 8.0).unwrap();
        let data = BoundaryData {
            bottom: (0..grid.nx).map(|_| rng.gen_range(-2.0..3.0)).collect(),
            top: (0..grid.nx).map(|_| rng.gen_range(-2.0..3.0)).collect(),
            left: (0..grid.nt).map(|_| rng.gen_range(-2.0..3.0)).collect(),
            right: (0..grid.nt).map(|_| rng.gen_range(-2.0..3.0)).collect(),
        };
        let mut problem = DirichletProblem::new(field, &grid, SolverOptions::default()).unwrap();
        let sol = problem.solve(&data).unwrap();
        prop_assert!(sol.max_principle_excess() <= 1e-8);
    }
}
