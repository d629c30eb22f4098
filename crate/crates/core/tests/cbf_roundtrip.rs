use conoloc::cbf::{read_cbf, write_cbf, CbfError};
use conoloc::ccflp::{generate_instance, FormulationKind, GeneratorParams};
use conoloc::model::{Model, Point, VarId, VarKind};
use conoloc::rng::SplitMix64;

fn models() -> Vec<Model> {
    let mut out = Vec::new();
    for seed in 0..10u64 {
        let params = GeneratorParams::new(2 + seed as usize % 5, 3 + seed as usize % 4, 4.0, 0.5);
        let inst = generate_instance(seed, &params).unwrap();
        for kind in [FormulationKind::Perspective, FormulationKind::Natural] {
            let (mut m, map) = inst.build_model(kind).unwrap();
            if seed % 3 == 0 {
                m = m.with_bounds(map.y[0], 1.0, 1.0).unwrap();
            }
            out.push(m);
        }
    }
    out
}

fn sample_point(m: &Model, rng: &mut SplitMix64) -> Point {
    let vals = m
        .vars()
        .iter()
        .map(|v| {
            let lo = if v.lower.is_finite() { v.lower } else { -10.0 };
            let hi = if v.upper.is_finite() { v.upper } else { lo.max(0.0) + 50.0 };
            match v.kind {
                VarKind::Binary if rng.next_f64() < 0.7 => rng.int_in(lo as u64, hi as u64) as f64,
                _ => rng.uniform(lo - 0.1 * (hi - lo), hi + 0.1 * (hi - lo)),
            }
        })
        .collect();
    Point::new(vals)
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn round_trip_preserves_objective_and_feasibility() {
    let mut rng = SplitMix64::new(8);
    let ms = models();
    assert_eq!(ms.len(), 20);
    for (k, m) in ms.iter().enumerate() {
        let text = write_cbf(m).unwrap();
        let back = read_cbf(&text).unwrap();
        assert_eq!(back.num_vars(), m.num_vars());
        assert_eq!(back.cones().len(), m.cones().len());
        for _ in 0..1000 {
            let p = sample_point(m, &mut rng);
            let oa = m.evaluate_objective(&p).unwrap();
            let ob = back.evaluate_objective(&p).unwrap();
            assert!(near(oa, ob), "model {k}: {oa} vs {ob}");
            for (ft, it) in [(1e-4, 1e-6), (1e-9, 1e-9)] {
                let ra = m.check_point(&p, ft, it).unwrap();
                let rb = back.check_point(&p, ft, it).unwrap();
                assert_eq!(ra.feasible, rb.feasible, "model {k}");
                assert!(near(ra.max_lin_violation, rb.max_lin_violation));
                assert!(near(ra.max_cone_violation, rb.max_cone_violation));
                assert!(near(ra.max_int_violation, rb.max_int_violation));
            }
        }
        // writing the parsed model again gives the same text
        assert_eq!(write_cbf(&back).unwrap(), text, "model {k}");
    }
}

#[test]
fn kinds_survive_round_trip() {
    let m = &models()[0];
    let back = read_cbf(&write_cbf(m).unwrap()).unwrap();
    for j in 0..m.num_vars() {
        let (a, b) = (m.var(VarId(j)), back.var(VarId(j)));
        assert_eq!(a.kind, b.kind);
        assert_eq!(a.lower, b.lower);
        assert_eq!(a.upper, b.upper);
    }
}

#[test]
fn malformed_inputs_report_lines() {
    let text = write_cbf(&models()[1]).unwrap();
    let bad = text.replacen("OBJSENSE\nMIN", "OBJSENSE\nSIDEWAYS", 1);
    match read_cbf(&bad) {
        Err(CbfError::UnsupportedSection { line, .. }) => assert_eq!(line, 5),
        other => panic!("{other:?}"),
    }
    let cut: String = text.lines().take(9).map(|l| format!("{l}\n")).collect();
    match read_cbf(&cut) {
        Err(CbfError::Parse { line, .. }) => assert_eq!(line, 10),
        other => panic!("{other:?}"),
    }
}
