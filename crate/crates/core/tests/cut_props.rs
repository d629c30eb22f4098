use conoloc::ccflp::{generate_instance, FormulationKind, GeneratorParams};
use conoloc::cuts::{converge_relaxation, separate_perspective, separate_soc, CutPool, OaRelaxation, CONE_TOL, ROUND_LIMIT};
use conoloc::model::{RotatedCone, VarId};
use conoloc::oracle::{brute_force, DEFAULT_TOL};
use conoloc::rng::SplitMix64;
use proptest::prelude::*;

const CONE: RotatedCone = RotatedCone {
    z: VarId(0),
    y: VarId(1),
    v: VarId(2),
};

fn cone_point(rng: &mut SplitMix64) -> (f64, f64, f64) {
    let z = 10f64.powf(rng.uniform(-3.0, 3.0));
    let y = rng.next_f64();
    let v = (z * y).sqrt() * rng.next_f64();
    (z, y, v)
}

#[test]
fn cuts_are_valid_on_sampled_cone_points() {
    let mut rng = SplitMix64::new(2024);
    let mut cuts = Vec::new();
    while cuts.len() < 1000 {
        let p = [rng.uniform(0.0, 10.0), rng.next_f64(), rng.uniform(0.0, 20.0)];
        if CONE.residual(&p) <= 1e-6 {
            continue;
        }
        cuts.extend(separate_soc(&CONE, 0, &p));
        cuts.extend(separate_perspective(&CONE, 0, &p, 20.0));
    }
    let mut worst = 0.0f64;
    for _ in 0..20_000 {
        let (z, y, v) = cone_point(&mut rng);
        for c in &cuts {
            worst = worst.max(c.violation_at(z, y, v));
        }
    }
    assert!(worst <= 1e-9, "worst violation {worst}");
}

proptest! {
    #[test]
    fn returned_cuts_separate_their_point(z in 0.0f64..10.0, y in 0.0f64..1.0, v in 0.0f64..20.0) {
        let p = [z, y, v];
        for cut in separate_soc(&CONE, 0, &p).into_iter().chain(separate_perspective(&CONE, 0, &p, 20.0)) {
            let [a, b, c] = cut.coefficients();
            // violation in the unnormalized form exceeds tol_sep; normalized it stays positive
            prop_assert!(a * z + b * y + c * v > 0.0);
            let (gz, gy, gv) = cut.generation_point;
            prop_assert_eq!((gz, gy, gv), (z, y, v));
            prop_assert!(CONE.residual(&p) > 0.0);
        }
    }

    #[test]
    fn pool_never_duplicates(z in 0.0f64..10.0, y in 0.0f64..1.0, v in 0.0f64..20.0) {
        let p = [z, y, v];
        let mut pool = CutPool::new();
        let mut inserted = 0;
        for _ in 0..2 {
            for cut in separate_soc(&CONE, 0, &p).into_iter().chain(separate_perspective(&CONE, 0, &p, 20.0)) {
                if pool.insert(cut) {
                    inserted += 1;
                }
            }
        }
        prop_assert!(inserted <= 2);
        prop_assert_eq!(pool.len(), inserted);
    }
}

#[test]
fn converge_objectives_are_monotone_and_below_optimum() {
    for seed in 0..15u64 {
        let inst = generate_instance(seed, &GeneratorParams::new(6, 5, 4.0, 0.4)).unwrap();
        let opt = brute_force(&inst, DEFAULT_TOL).unwrap().optimum;
        for kind in [FormulationKind::Perspective, FormulationKind::Natural] {
            let (m, _) = inst.build_model(kind).unwrap();
            let (out, pool) = converge_relaxation(&m, CONE_TOL, ROUND_LIMIT).unwrap();
            assert!(out.converged(CONE_TOL), "seed {seed} {kind:?}");
            for w in out.objectives.windows(2) {
                assert!(w[1] >= w[0] - 1e-8 * (1.0 + w[0].abs()), "seed {seed}: {w:?}");
            }
            assert!(out.solution.objective <= opt + 1e-6 * (1.0 + opt.abs()));
            assert_eq!(pool.len(), pool.cuts().len());
        }
    }
}

#[test]
fn separation_round_at_feasible_point_adds_nothing() {
    let inst = generate_instance(3, &GeneratorParams::new(4, 3, 4.0, 0.4)).unwrap();
    let (m, _) = inst.build_model(FormulationKind::Perspective).unwrap();
    let mut relax = OaRelaxation::new(&m).unwrap();
    let out = relax.converge(CONE_TOL, ROUND_LIMIT);
    let before = relax.pool.len();
    // repeating the final point cannot add cuts already in the pool
    relax.separate(&out.solution.primal, CONE_TOL);
    let again = relax.pool.len();
    relax.separate(&out.solution.primal, CONE_TOL);
    assert_eq!(relax.pool.len(), again);
    assert!(again >= before);
}
