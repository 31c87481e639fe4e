use classweight_core::optimizer::build_subset_qp;
use classweight_core::qp::{grid_oracle, grid_oracle_with_tol, kkt_residuals, solve_qp, QpProblem, QpStatus};
use classweight_core::{AccuracyMatrix, HyperParams};
use proptest::prelude::*;

const TOL: f64 = 1e-8;

fn accuracy(rows: Vec<Vec<f64>>) -> AccuracyMatrix {
    AccuracyMatrix::from_rows(&rows).unwrap()
}

/// Random n×m accuracy matrices.
fn matrix(n: usize, m: usize) -> impl Strategy<Value = AccuracyMatrix> {
    prop::collection::vec(prop::collection::vec(0.0..=1.0f64, m), n).prop_map(accuracy)
}

/// Simplex-constrained QPs with up to 6 variables in one or two blocks.
fn block_qp() -> impl Strategy<Value = QpProblem> {
    (1usize..=2, 2usize..=3).prop_flat_map(|(blocks, width)| {
        let dim = blocks * width;
        (prop::collection::vec(0.0..0.5f64, dim), prop::collection::vec(0.0..1.0f64, dim), 0.0..0.3f64).prop_map(
            move |(quad, linear, floor)| {
                let mut p = QpProblem::new(quad, linear);
                for b in 0..blocks {
                    let row: Vec<f64> = (0..dim).map(|k| if k / width == b { 1.0 } else { 0.0 }).collect();
                    p.push_equality(row, 1.0);
                }
                // Every block keeps at least `floor` on its first variable.
                let mut row = vec![0.0; dim];
                row[0] = 1.0;
                p.push_at_least(row, floor);
                p
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solver_matches_grid_on_block_problems(p in block_qp()) {
        let step = 0.01;
        let exact = solve_qp(&p, TOL).unwrap();
        let grid = grid_oracle(&p, step).unwrap();
        prop_assert_eq!(exact.status, QpStatus::Optimal);
        prop_assert_eq!(grid.status, QpStatus::Optimal);
        prop_assert!((exact.objective - grid.objective).abs() <= f64::max(1e-3, 2.0 * step),
            "solver {} grid {}", exact.objective, grid.objective);
    }

    #[test]
    fn no_feasible_grid_point_beats_the_solver(
        v in (2usize..=3).prop_flat_map(|m| matrix(3, m)),
        lambda in 0.0..1.0f64,
        alpha in 0.0..=1.0f64,
    ) {
        let params = HyperParams::new(2, lambda, alpha);
        let p = build_subset_qp(&v, &[0, 2], &params);
        let exact = solve_qp(&p, TOL).unwrap();
        let strict = grid_oracle_with_tol(&p, 0.01, 1e-12).unwrap();
        if strict.status == QpStatus::Optimal {
            prop_assert_eq!(exact.status, QpStatus::Optimal);
            prop_assert!(strict.objective <= exact.objective + 1e-9, "grid {} > solver {}", strict.objective, exact.objective);
        }
        if exact.status == QpStatus::Optimal {
            prop_assert!(exact.kkt.primal <= TOL);
        }
    }

    #[test]
    fn optimal_points_satisfy_kkt(p in block_qp()) {
        let sol = solve_qp(&p, TOL).unwrap();
        prop_assert_eq!(sol.status, QpStatus::Optimal);
        let kkt = kkt_residuals(&p, &sol.w, &sol.multipliers);
        prop_assert!(kkt.stationarity <= TOL, "{kkt:?}");
        prop_assert!(kkt.primal <= TOL, "{kkt:?}");
        prop_assert!(kkt.max() <= TOL, "{kkt:?}");
    }

    #[test]
    fn repeated_solves_are_bitwise_identical(p in block_qp()) {
        let a = solve_qp(&p, TOL).unwrap();
        let b = solve_qp(&p, TOL).unwrap();
        prop_assert_eq!(
            a.w.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.w.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        prop_assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }

    #[test]
    fn stronger_l2_never_increases_sum_of_squares(v in matrix(4, 3), q in 0.0..0.5f64, extra in 0.01..1.0f64) {
        let build = |quad: f64| {
            let params = HyperParams::new(4, 2.0 * quad, 0.0);
            build_subset_qp(&v, &[0, 1, 2, 3], &params)
        };
        let weak = solve_qp(&build(q), TOL).unwrap();
        let strong = solve_qp(&build(q + extra), TOL).unwrap();
        prop_assume!(weak.is_optimal() && strong.is_optimal());
        let sq = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>();
        prop_assert!(sq(&strong.w) <= sq(&weak.w) + 1e-6, "{} > {}", sq(&strong.w), sq(&weak.w));
    }
}

#[test]
fn three_by_two_instance_matches_grid() {
    // Fixed random 3×2 matrix; all three classifiers selected gives six variables.
    let v = accuracy(vec![vec![0.62, 0.91], vec![0.83, 0.47], vec![0.55, 0.78]]);
    let p = build_subset_qp(&v, &[0, 1, 2], &HyperParams::new(3, 0.95, 0.85));
    let exact = solve_qp(&p, TOL).unwrap();
    let grid = grid_oracle(&p, 0.01).unwrap();
    assert_eq!(exact.status, QpStatus::Optimal);
    assert!((exact.objective - grid.objective).abs() <= 1e-3, "{} vs {}", exact.objective, grid.objective);
}

#[test]
fn floor_case_objective_within_grid_step() {
    let eps = 1e-6;
    let p = QpProblem::new(vec![0.0, 0.0], vec![1.0, 0.0])
        .equality(vec![1.0, 1.0], 1.0)
        .at_least(vec![1.0, 0.0], eps)
        .at_least(vec![0.0, 1.0], eps);
    let exact = solve_qp(&p, TOL).unwrap();
    assert!((exact.w[0] - (1.0 - eps)).abs() < 1e-12 && (exact.w[1] - eps).abs() < 1e-12);
    let grid = grid_oracle(&p, 1e-3).unwrap();
    assert!((exact.objective - grid.objective).abs() <= 1e-3);
}

#[test]
fn contradictory_rows_infeasible_in_both() {
    let p = QpProblem::new(vec![0.1, 0.1], vec![1.0, 1.0]).equality(vec![1.0, 1.0], 1.0).at_least(vec![1.0, 1.0], 2.0);
    assert_eq!(solve_qp(&p, TOL).unwrap().status, QpStatus::Infeasible);
    assert_eq!(grid_oracle(&p, 0.01).unwrap().status, QpStatus::Infeasible);
}
