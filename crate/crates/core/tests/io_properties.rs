use gadop_core::scenario::two_point_spaces;
use gadop_core::solomon::{parse_solomon, to_instance, to_solomon_string, GadopParams, SolomonInstance, SolomonRow};
use gadop_core::{generate, FirstStagePlan, GeneratorConfig, ProblemFile};
use proptest::prelude::*;

fn row(id: usize) -> impl Strategy<Value = SolomonRow> {
    (-1e4f64..1e4, -1e4f64..1e4, 0.0f64..100.0, 0.0f64..500.0, 500.0f64..2000.0, 0.0f64..100.0).prop_map(
        move |(x, y, demand, ready, due, service)| SolomonRow { id, x, y, demand, ready, due, service },
    )
}

fn solomon() -> impl Strategy<Value = SolomonInstance> {
    (1usize..15)
        .prop_flat_map(|n| ((0..=n).map(row).collect::<Vec<_>>(), 1usize..100, 1.0f64..1e4))
        .prop_map(|(rows, vehicles, capacity)| SolomonInstance { name: "R".into(), vehicles, capacity, rows })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn solomon_text_round_trips_exactly(inst in solomon()) {
        let text = to_solomon_string(&inst);
        let back = parse_solomon(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(to_solomon_string(&back), text);
    }

    #[test]
    fn converted_instances_validate(inst in solomon(), drones in 0usize..4, scale in 0.001f64..2.0) {
        let subset: Vec<usize> = inst.rows.iter().skip(1).map(|r| r.id).collect();
        let params = GadopParams { drones, coordinate_scale_km: scale, ..GadopParams::default() };
        let out = to_instance(&inst, &subset, &params).unwrap();
        prop_assert!(out.validate().is_empty(), "{:?}", out.validate());
        for (i, a) in inst.rows.iter().enumerate() {
            for (j, b) in inst.rows.iter().enumerate() {
                let d = scale * (a.x - b.x).hypot(a.y - b.y);
                prop_assert!((out.distances_km[i][j] - d).abs() <= 1e-9 * d.max(1.0));
                prop_assert_eq!(out.distances_km[i][j], out.distances_km[j][i]);
            }
        }
    }

    #[test]
    fn problem_files_round_trip(seed in 0u64..1000, customers in 1usize..7) {
        let (inst, space) = generate(&GeneratorConfig { customers, seed, ..GeneratorConfig::default() });
        let f = ProblemFile::new(inst, space);
        prop_assert_eq!(ProblemFile::from_json(&f.to_json()).unwrap(), f);
    }
}

#[test]
fn problem_file_layout() {
    let (inst, _) = generate(&GeneratorConfig { customers: 3, drones: 2, seed: 5, ..GeneratorConfig::default() });
    let space = two_point_spaces(0.1, 0.2, 0.5, &inst).unwrap();
    let v: serde_json::Value = serde_json::from_str(&ProblemFile::new(inst, space).to_json()).unwrap();
    for key in ["customers", "trucks", "drones", "distances_km", "costs", "coordinates", "scenarios"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    for key in ["truck_arc_cost", "drone_roundtrip_cost", "penalty", "repair"] {
        assert!(v["costs"].get(key).is_some(), "missing costs.{key}");
    }
    let takeoff = &v["scenarios"]["takeoff"];
    assert_eq!(takeoff.as_array().unwrap().len(), 2);
    assert_eq!(takeoff[0]["grounded"], serde_json::json!([0, 0]));
    let breaks = &v["scenarios"]["breakdown"][1]["breaks"];
    assert_eq!(breaks.as_array().unwrap().len(), 3);
    assert!(breaks.as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).all(|b| b == 0 || b == 1));
    assert_eq!(v["customers"][0]["window_class"], "none");
}

#[test]
fn plan_document_layout() {
    let plan = FirstStagePlan::from_assignments(vec![vec![2, 1]], vec![vec![], vec![3]]);
    let v = serde_json::to_value(&plan).unwrap();
    assert_eq!(
        v,
        serde_json::json!({
            "trucks": [{"used": true, "route": [2, 1], "arcs": [[0, 2], [2, 1], [1, 0]]}],
            "drones": [{"used": false, "order": []}, {"used": true, "order": [3]}]
        })
    );
    let back: FirstStagePlan = serde_json::from_value(v).unwrap();
    assert_eq!(back, plan);
    let broken = serde_json::json!({
        "trucks": [{"used": true, "route": [2, 1], "arcs": [[0, 1], [1, 2], [2, 0]]}],
        "drones": []
    });
    assert!(serde_json::from_value::<FirstStagePlan>(broken).is_err());
}
