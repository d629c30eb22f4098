use conoloc::lp::{add_rows_resolve, change_bounds_resolve, solve_lp, LpProblem, LpRow, LpStatus};
use proptest::prelude::*;

/// Hyperplane `a . x = b`.
struct Plane {
    a: Vec<f64>,
    b: f64,
}

fn solve_dense(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-10 {
            return None;
        }
        m.swap(c, p);
        r.swap(c, p);
        for i in 0..n {
            if i != c {
                let f = m[i][c] / m[c][c];
                for k in c..n {
                    m[i][k] -= f * m[c][k];
                }
                r[i] -= f * r[c];
            }
        }
    }
    Some((0..n).map(|i| r[i] / m[i][i]).collect())
}

/// Minimum over feasible vertices of a box-bounded LP, `None` if infeasible.
fn vertex_oracle(lp: &LpProblem) -> Option<f64> {
    let n = lp.num_cols();
    let mut planes = Vec::new();
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        planes.push(Plane { a: a.clone(), b: lp.col_lower[j] });
        planes.push(Plane { a, b: lp.col_upper[j] });
    }
    for row in &lp.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &row.coefs {
            a[j] += v;
        }
        for b in [row.lower, row.upper] {
            if b.is_finite() {
                planes.push(Plane { a: a.clone(), b });
            }
        }
    }
    let k = planes.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let m: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].a.clone()).collect();
        let r: Vec<f64> = idx.iter().map(|&i| planes[i].b).collect();
        if let Some(x) = solve_dense(m, r) {
            if lp.max_violation(&x) <= 1e-8 {
                let obj = lp.objective_at(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for t in i + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

fn row_strategy(n: usize) -> impl Strategy<Value = LpRow> {
    (
        prop::collection::vec(-5i32..=5, n),
        -10i32..=10,
        0u8..3,
    )
        .prop_map(|(coefs, b, kind)| {
            let coefs: Vec<(usize, f64)> = coefs
                .into_iter()
                .enumerate()
                .filter(|(_, c)| *c != 0)
                .map(|(j, c)| (j, c as f64))
                .collect();
            let b = b as f64;
            let (lower, upper) = match kind {
                0 => (f64::NEG_INFINITY, b),
                1 => (b, f64::INFINITY),
                _ => (b - 2.0, b + 1.0),
            };
            LpRow { coefs, lower, upper }
        })
}

fn lp_strategy() -> impl Strategy<Value = LpProblem> {
    (1usize..=3).prop_flat_map(|n| {
        (
            prop::collection::vec(-5i32..=5, n),
            prop::collection::vec((-3i32..=0, 1i32..=4), n),
            prop::collection::vec(row_strategy(n), 0..=4),
        )
            .prop_map(|(cost, bounds, rows)| {
                let mut lp = LpProblem::new();
                for (c, (l, w)) in cost.iter().zip(bounds) {
                    lp.add_col(*c as f64, l as f64, (l + w) as f64);
                }
                lp.rows = rows;
                lp
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn agrees_with_vertex_enumeration(lp in lp_strategy()) {
        let sol = solve_lp(&lp, None).unwrap();
        match vertex_oracle(&lp) {
            Some(opt) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - opt).abs() <= 1e-7 * (1.0 + opt.abs()), "{} vs {}", sol.objective, opt);
                prop_assert!(lp.max_violation(&sol.primal) <= 1e-9);
                let dual = sol.dual_objective();
                prop_assert!((sol.objective - dual).abs() <= 1e-7 * (1.0 + sol.objective.abs()));
            }
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }

    #[test]
    fn warm_and_cold_resolve_agree(lp in lp_strategy(), extra in prop::collection::vec(row_strategy(3), 1..=3)) {
        let n = lp.num_cols();
        let extra: Vec<LpRow> = extra
            .into_iter()
            .map(|mut r| { r.coefs.retain(|&(j, _)| j < n); r })
            .collect();
        let first = solve_lp(&lp, None).unwrap();
        prop_assume!(first.status == LpStatus::Optimal);
        let mut warm_lp = lp.clone();
        let warm = add_rows_resolve(&mut warm_lp, &first, extra).unwrap();
        let cold = solve_lp(&warm_lp, None).unwrap();
        prop_assert_eq!(warm.status, cold.status);
        if warm.status == LpStatus::Optimal {
            prop_assert!((warm.objective - cold.objective).abs() <= 1e-8 * (1.0 + cold.objective.abs()));
            prop_assert!(warm.objective >= first.objective - 1e-9 * (1.0 + first.objective.abs()));
        }
    }

    #[test]
    fn tightening_bounds_never_lowers_objective(lp in lp_strategy(), j in 0usize..3, shrink in 0.0f64..1.0) {
        prop_assume!(j < lp.num_cols());
        let first = solve_lp(&lp, None).unwrap();
        prop_assume!(first.status == LpStatus::Optimal);
        let mut lp2 = lp.clone();
        let (l, u) = (lp.col_lower[j], lp.col_upper[j]);
        let sol = change_bounds_resolve(&mut lp2, &first, j, l + shrink * (u - l), u).unwrap();
        if sol.status == LpStatus::Optimal {
            prop_assert!(sol.objective >= first.objective - 1e-9 * (1.0 + first.objective.abs()));
            let cold = solve_lp(&lp2, None).unwrap();
            prop_assert!((cold.objective - sol.objective).abs() <= 1e-8 * (1.0 + cold.objective.abs()));
        } else {
            prop_assert_eq!(sol.status, LpStatus::Infeasible);
            prop_assert!(vertex_oracle(&lp2).is_none());
        }
    }

    #[test]
    fn solves_are_deterministic(lp in lp_strategy()) {
        let a = solve_lp(&lp, None).unwrap();
        let b = solve_lp(&lp, None).unwrap();
        prop_assert_eq!(a.iterations, b.iterations);
        prop_assert_eq!(a.status, b.status);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a.primal), bits(&b.primal));
    }
}

#[test]
fn moderate_transportation_lp() {
    // 12 x 10 transportation problem; total supply exceeds demand.
    let (ns, nd) = (12, 10);
    let mut lp = LpProblem::new();
    for i in 0..ns {
        for j in 0..nd {
            lp.add_col(((i * 7 + j * 3) % 11 + 1) as f64, 0.0, f64::INFINITY);
        }
    }
    for i in 0..ns {
        lp.add_row((0..nd).map(|j| (i * nd + j, 1.0)).collect(), f64::NEG_INFINITY, 10.0);
    }
    for j in 0..nd {
        lp.add_row((0..ns).map(|i| (i * nd + j, 1.0)).collect(), 9.0, 9.0);
    }
    let sol = solve_lp(&lp, None).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!(lp.max_violation(&sol.primal) <= 1e-9);
    assert!((sol.objective - sol.dual_objective()).abs() <= 1e-7 * (1.0 + sol.objective.abs()));
}
