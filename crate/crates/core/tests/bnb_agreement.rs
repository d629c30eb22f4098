use conoloc::bnb::{solve, solve_instance, MipStatus, NodeStrategy, SearchOrder, SolveConfig};
use conoloc::ccflp::{generate_instance, CcflpInstance, FormulationKind, GeneratorParams};
use conoloc::oracle::{brute_force, DEFAULT_TOL};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-5 * (1.0 + b.abs())
}

#[test]
fn strategies_agree_with_oracle_on_small_instances() {
    let params = GeneratorParams::new(8, 8, 3.0, 0.375);
    for seed in 0..20u64 {
        let inst = generate_instance(seed, &params).unwrap();
        assert_eq!(inst.p, 3);
        let oracle = brute_force(&inst, DEFAULT_TOL).unwrap();
        for kind in [FormulationKind::Perspective, FormulationKind::Natural] {
            let (m, map) = inst.build_model(kind).unwrap();
            for strategy in [NodeStrategy::LazyOA, NodeStrategy::ConvergedOA] {
                for search in [SearchOrder::BestBound, SearchOrder::DepthFirst] {
                    let cfg = SolveConfig {
                        node_strategy: strategy,
                        search,
                        ..SolveConfig::default()
                    };
                    let r = solve(&m, &map, &cfg).unwrap();
                    assert_eq!(r.status, MipStatus::Optimal, "seed {seed} {kind:?} {strategy:?}");
                    assert!(
                        close(r.ub, oracle.optimum),
                        "seed {seed} {kind:?} {strategy:?} {search:?}: ub {} oracle {}",
                        r.ub,
                        oracle.optimum
                    );
                    assert!(r.lb <= r.ub);
                    let inc = r.incumbent.as_ref().unwrap();
                    assert!(m.check_point(inc, 1e-4, 1e-6).unwrap().feasible);
                }
            }
        }
    }
}

#[test]
fn insufficient_capacity_is_infeasible() {
    let inst = CcflpInstance::from_data(
        "short",
        vec![10.0],
        vec![8.0, 8.0],
        vec![1.0, 1.0],
        vec![vec![0.1, 0.2]],
        0.01,
        0.1,
        1,
    )
    .unwrap();
    let r = solve_instance(&inst, FormulationKind::Perspective, &SolveConfig::default(), &mut |_| {}).unwrap();
    assert_eq!(r.status, MipStatus::Infeasible);
    assert!(r.incumbent.is_none());
}

#[test]
fn traces_are_monotone_and_runs_repeat() {
    for seed in 0..6u64 {
        let inst = generate_instance(seed, &GeneratorParams::new(10, 8, 3.0, 0.375)).unwrap();
        let (m, map) = inst.build_model(FormulationKind::Natural).unwrap();
        let cfg = SolveConfig {
            node_strategy: NodeStrategy::LazyOA,
            ..SolveConfig::default()
        };
        let a = solve(&m, &map, &cfg).unwrap();
        let b = solve(&m, &map, &cfg).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.lp_iterations, b.lp_iterations);
        assert_eq!(a.ub.to_bits(), b.ub.to_bits());
        for w in a.trace.windows(2) {
            assert!(w[1].lb >= w[0].lb, "seed {seed}");
            assert!(w[1].ub <= w[0].ub, "seed {seed}");
            assert!(w[1].time_s >= w[0].time_s);
        }
        for t in &a.trace {
            assert!(t.lb <= t.ub + 1e-9 * (1.0 + t.ub.abs()));
        }
    }
}
