use std::io::Write;

use rplsim_core::output::{append_rows, read_rows};
use rplsim_core::trace::{read_trace, write_trace};
use rplsim_core::{run_scenario, ConfigError, ResultRow, RunOptions, ScenarioConfig, TopologyKind};

fn field_of(err: ConfigError) -> String {
    match err {
        ConfigError::InvalidField { field, .. } => field,
        other => panic!("expected a field error, got {other}"),
    }
}

#[test]
fn out_of_range_values_name_the_field() {
    let cases = [
        (r#"{"rx_success_ratio": 1.3}"#, "rx_success_ratio"),
        (r#"{"node_count": 1}"#, "node_count"),
        (r#"{"duration": 30, "warmup": 60}"#, "duration"),
        (r#"{"warmup": -1}"#, "warmup"),
        (r#"{"topology": "custom"}"#, "positions"),
    ];
    for (json, field) in cases {
        let err = ScenarioConfig::from_json_str(json).unwrap_err();
        assert_eq!(field_of(err), field, "{json}");
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let err = ScenarioConfig::from_json_str(r#"{"node_cnt": 20}"#).unwrap_err();
    assert!(matches!(err, ConfigError::Parse(_)));
    assert!(err.to_string().contains("node_cnt"));
}

#[test]
fn sparse_random_layout_reports_density() {
    let cfg = ScenarioConfig {
        node_count: 30,
        area_side: 5000.0,
        ..Default::default()
    };
    let err = run_scenario(&cfg, RunOptions::default()).unwrap_err();
    assert!(matches!(err, ConfigError::Disconnected { .. }));
    assert!(err.to_string().contains("density too low"));
}

#[test]
fn wide_grid_spacing_is_rejected() {
    let cfg = ScenarioConfig {
        topology: TopologyKind::Grid,
        grid_spacing: 500.0,
        ..Default::default()
    };
    assert!(matches!(
        run_scenario(&cfg, RunOptions::default()),
        Err(ConfigError::GridSpacing { .. })
    ));
}

#[test]
fn config_file_round_trips() {
    let cfg = ScenarioConfig {
        node_count: 40,
        seed: 9,
        ..Default::default()
    };
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(serde_json::to_string_pretty(&cfg).unwrap().as_bytes())
        .unwrap();
    assert_eq!(ScenarioConfig::from_path(f.path()).unwrap(), cfg);
}

#[test]
fn trace_and_rows_survive_disk() {
    let cfg = ScenarioConfig::default();
    let out = run_scenario(&cfg, RunOptions { record_trace: true }).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let tpath = dir.path().join("t.jsonl");
    write_trace(&out.trace, std::fs::File::create(&tpath).unwrap()).unwrap();
    let back = read_trace(std::io::BufReader::new(
        std::fs::File::open(&tpath).unwrap(),
    ))
    .unwrap();
    assert_eq!(back, out.trace);

    let rpath = dir.path().join("r.csv");
    let row = ResultRow::from_outcome(&out);
    append_rows(&rpath, std::slice::from_ref(&row)).unwrap();
    append_rows(&rpath, std::slice::from_ref(&row)).unwrap();
    let text = std::fs::read_to_string(&rpath).unwrap();
    assert_eq!(
        text.lines()
            .filter(|l| l.starts_with("scenario_id"))
            .count(),
        1
    );
    assert_eq!(read_rows(text.as_bytes()).unwrap(), vec![row.clone(), row]);
}
