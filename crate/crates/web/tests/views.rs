use edgeplace_web::{compare_baselines_json, reward_surface_json, routing_explorer_json};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

#[test]
fn routing_explorer_routes_every_request() {
    let v = parse(routing_explorer_json("small-payload", 1, "10001", 0).unwrap());
    assert_eq!(v["feasible"], true);
    let routing = v["routing"].as_array().unwrap();
    for (i, row) in routing.iter().enumerate() {
        let fractions: Vec<f64> = row.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        let w = v["workload"][i].as_f64().unwrap();
        if w > 0.0 {
            assert!((fractions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        // only hosting nodes receive traffic
        for j in [1, 2, 3] {
            assert_eq!(fractions[j], 0.0);
        }
    }
    assert!(v["delay_ms_per_req"].as_f64().unwrap() >= 0.0);
}

#[test]
fn routing_explorer_reports_an_empty_placement_as_infeasible() {
    let v = parse(routing_explorer_json("small-payload", 0, "00000", 0).unwrap());
    assert_eq!(v["feasible"], false);
    assert!(v["total_delay"].is_null());
}

#[test]
fn routing_explorer_rejects_bad_input() {
    assert!(routing_explorer_json("small-payload", 0, "1001", 0).is_err());
    assert!(routing_explorer_json("small-payload", 0, "10x01", 0).is_err());
    assert!(routing_explorer_json("small-payload", 4, "10001", 0).is_err());
    assert!(routing_explorer_json("medium", 0, "10001", 0).is_err());
}

#[test]
fn reward_surface_corners() {
    let v = parse(reward_surface_json(0.25, 3).unwrap());
    let r = &v["reward"];
    // lowest delay and cost earn the top reward, highest earn the floor
    assert_eq!(r[0][0].as_f64().unwrap(), 1.0);
    assert_eq!(r[2][2].as_f64().unwrap(), -1.0);
    // middle of the cost axis, highest delay: -(0.25·0 + 0.75·1)
    assert!((r[1][2].as_f64().unwrap() + 0.75).abs() < 1e-12);
    assert_eq!(v["penalty"].as_f64().unwrap(), -2.0);
    assert!(reward_surface_json(1.5, 10).is_err());
    assert!(reward_surface_json(0.5, 1).is_err());
}

#[test]
fn baseline_comparison_lists_three_candidates() {
    let v = parse(compare_baselines_json("small-payload", 0.5, 2, 0, 200).unwrap());
    let names: Vec<&str> = v["rows"].as_array().unwrap().iter().map(|m| m["candidate"].as_str().unwrap()).collect();
    assert_eq!(names, ["neptune", "vsvbp", "creua"]);
    assert!(compare_baselines_json("small-payload", 0.5, 0, 0, 200).is_err());
}
