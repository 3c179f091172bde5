use edgeplace::bench::{
    emit_results, evaluate_candidate, generate_snapshot_sets, summarize, Candidate, EvalOptions, HarnessConfig,
    MetricsRow, RunMetadata, SnapshotRow,
};
use edgeplace::presets::Preset;
use proptest::prelude::*;

fn row() -> impl Strategy<Value = SnapshotRow> {
    (0.0f64..100.0, 0.0f64..1e4, 0.0f64..300.0, 0.0f64..10.0, any::<bool>()).prop_map(|(d, t, c, ms, valid)| SnapshotRow {
        candidate: "vsvbp".into(),
        alpha: 0.5,
        snapshot: 0,
        delay_ms_per_req: d,
        total_delay: t,
        cost: c,
        decision_time_ms: ms,
        valid,
    })
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-9 * x.abs().max(1.0),
        (None, None) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn averages_use_valid_rows_and_timing_uses_all(rows in prop::collection::vec(row(), 1..30)) {
        let m = summarize(&rows, Candidate::Vsvbp, 0.5);
        let valid: Vec<&SnapshotRow> = rows.iter().filter(|r| r.valid).collect();
        let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        prop_assert_eq!(m.snapshots, rows.len());
        prop_assert_eq!(m.valid_snapshots, valid.len());
        prop_assert!((m.invalid_rate - (rows.len() - valid.len()) as f64 / rows.len() as f64).abs() < 1e-15);
        prop_assert!(close(m.avg_delay_ms_per_req, mean(valid.iter().map(|r| r.delay_ms_per_req).collect())));
        prop_assert!(close(m.avg_total_delay, mean(valid.iter().map(|r| r.total_delay).collect())));
        prop_assert!(close(m.avg_cost, mean(valid.iter().map(|r| r.cost).collect())));
        prop_assert!(close(Some(m.avg_decision_time_ms), mean(rows.iter().map(|r| r.decision_time_ms).collect())));
    }
}

#[test]
fn emitted_files_agree_with_each_other() {
    let scenario = Preset::SmallPayload.scenario();
    let cfg = HarnessConfig {
        eval_snapshots: 6,
        train_snapshots: 1,
        milp_node_limit: 500,
        warmup_decisions: 0,
        ..HarnessConfig::default()
    };
    let (_, eval) = generate_snapshot_sets(&scenario, &cfg, 3).unwrap();
    let opts = EvalOptions::from_config(&cfg, false);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for alpha in [0.0, 1.0] {
        for c in [Candidate::Neptune, Candidate::Vsvbp, Candidate::Creua] {
            let (r, m) = evaluate_candidate(c, &scenario, &eval, alpha, None, &opts).unwrap();
            assert_eq!(r.len(), eval.len());
            assert!(r.iter().all(|x| x.decision_time_ms == 0.0));
            rows.extend(r);
            summary.push(m);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let meta = RunMetadata::new(3, "unknown", &cfg, &scenario, false);
    emit_results(dir.path(), &rows, &summary, &meta).unwrap();

    let mut reader = csv::Reader::from_path(dir.path().join("results.csv")).unwrap();
    let read: Vec<SnapshotRow> = reader.deserialize().collect::<Result<_, _>>().unwrap();
    assert_eq!(read, rows);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let written: Vec<MetricsRow> = serde_json::from_value(json["rows"].clone()).unwrap();
    assert_eq!(written.len(), 6);
    for m in &written {
        let mine: Vec<SnapshotRow> = read
            .iter()
            .filter(|r| r.candidate == m.candidate && r.alpha == m.alpha)
            .cloned()
            .collect();
        let again = summarize(&mine, m.candidate.parse().unwrap(), m.alpha);
        assert!(close(again.avg_cost, m.avg_cost), "{}", m.candidate);
        assert!(close(again.avg_delay_ms_per_req, m.avg_delay_ms_per_req), "{}", m.candidate);
        assert_eq!(again.valid_snapshots, m.valid_snapshots);
    }
}
