use proptest::prelude::*;
use torus_puzzle::experiment_cli::accept::{bundled_verdicts, fixture_mismatches};
use torus_puzzle::experiment_cli::*;
use torus_puzzle::parallel::with_workers;
use torus_puzzle::Error;

fn field_of(e: Error) -> String {
    match e {
        Error::Config { field, .. } => field,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn unknown_keys_are_named() {
    let e = ExperimentConfig::from_toml("experiment = \"hitting\"\ntrails = 10\n").unwrap_err();
    assert_eq!(field_of(e), "trails");
}

#[test]
fn nested_tables_are_rejected() {
    let e = ExperimentConfig::from_toml("experiment = \"hitting\"\n[extra]\nx = 1\n").unwrap_err();
    assert_eq!(field_of(e), "extra");
}

#[test]
fn wrong_types_name_the_field() {
    let e = ExperimentConfig::from_toml("experiment = \"hitting\"\nn = \"eight\"\n").unwrap_err();
    assert_eq!(field_of(e), "n");
    let e = ExperimentConfig::from_toml("n = 8\n").unwrap_err();
    assert_eq!(field_of(e), "experiment");
}

#[test]
fn unknown_experiment_id() {
    let cfg = ExperimentConfig::from_toml("experiment = \"mixing\"\n").unwrap();
    assert_eq!(field_of(ResolvedConfig::resolve(&cfg).unwrap_err()), "experiment");
}

#[test]
fn preconditions_checked_before_launch() {
    let cfg = ExperimentConfig { experiment: "coupling".into(), n: Some(8), ..Default::default() };
    let e = ResolvedConfig::resolve(&cfg).unwrap_err();
    assert!(matches!(e, Error::Precondition(_)));
    assert_eq!(exit_code(&e), 3);
    let cfg = ExperimentConfig { experiment: "pdm-spectrum".into(), n: Some(4), range: Some(2), ..Default::default() };
    assert!(matches!(ResolvedConfig::resolve(&cfg), Err(Error::Precondition(_))));
    let cfg = ExperimentConfig { experiment: "hitting".into(), t: Some(-1.0), ..Default::default() };
    assert_eq!(exit_code(&ResolvedConfig::resolve(&cfg).unwrap_err()), 2);
}

#[test]
fn every_id_resolves_with_defaults() {
    for id in ExperimentId::ALL {
        let cfg = ExperimentConfig { experiment: id.as_str().into(), ..Default::default() };
        let r = ResolvedConfig::resolve(&cfg).unwrap();
        assert_eq!(r.id, id);
        assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
    }
}

fn small(id: &str, toml_extra: &str) -> ResolvedConfig {
    let text = format!("experiment = \"{id}\"\n{toml_extra}");
    ResolvedConfig::resolve(&ExperimentConfig::from_toml(&text).unwrap()).unwrap()
}

fn csv_bytes(cfg: &ResolvedConfig) -> Vec<u8> {
    let mut buf = Vec::new();
    run(cfg, &mut CsvSink::new(&mut buf, cfg.timing)).unwrap();
    buf
}

#[test]
fn identical_configs_give_identical_bytes() {
    let cfg = small("return-probs", "n = 10\ntrials = 2000\nseed = 4\n");
    assert_eq!(csv_bytes(&cfg), csv_bytes(&cfg));
    let cfg = small("coupling", "n = 5\ntrials = 10\nseed = 4\n");
    assert_eq!(csv_bytes(&cfg), csv_bytes(&cfg));
}

#[test]
fn aggregates_ignore_worker_count() {
    let cfg = small("fixed-points", "n = 4\nsteps = 300\ntrials = 1500\nseed = 2\n");
    let one = with_workers(1, || csv_bytes(&cfg));
    let four = with_workers(4, || csv_bytes(&cfg));
    assert_eq!(one, four);
}

#[test]
fn csv_layout_and_timing_column() {
    let cfg = small("d2-identity", "");
    let text = String::from_utf8(csv_bytes(&cfg)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "schema,experiment,parameters,statistic,value,stderr,seed");
    assert!(lines.next().unwrap().starts_with("1,d2-identity,n=3;d=1,lhs_n0,"));
    let timed = small("d2-identity", "timing = true\n");
    let text = String::from_utf8(csv_bytes(&timed)).unwrap();
    assert!(text.lines().next().unwrap().ends_with(",wall_time"));
}

#[test]
fn json_output_carries_rows_and_report() {
    let cfg = small("comparison", "n = 3\ntrials = 20\n");
    let mut buf = Vec::new();
    run(&cfg, &mut JsonSink::new(&mut buf)).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert_eq!(v["schema"], RESULT_SCHEMA);
    assert!(v["rows"].as_array().unwrap().len() >= 8);
    assert_eq!(v["report"]["states"], 72);
}

#[test]
fn every_experiment_runs_at_small_size() {
    let cases = [
        ("return-probs", "n = 6\ntrials = 500\n"),
        ("renewal-moments", "n = 6\ntrials = 1000\n"),
        ("single-piece-tv", "n = 4\nt = 0.05\ntrials = 500\n"),
        ("fixed-points", "n = 4\nt = 0.01\ntrials = 200\n"),
        ("hitting", "n = 5\ntrials = 200\n"),
        ("eigen-sums", "n = 5\n"),
        ("d2-identity", "steps = 3\n"),
        ("pdm-spectrum", "n = 3\n"),
        ("comparison", "n = 3\ntrials = 10\n"),
        ("coupling", "n = 3\ntrials = 5\nt = 10.0\n"),
        ("appendix", "trials = 200\n"),
    ];
    for (id, extra) in cases {
        let mut sink = VecSink::default();
        run(&small(id, extra), &mut sink).unwrap_or_else(|e| panic!("{id}: {e}"));
        assert!(!sink.rows.is_empty(), "{id}");
        assert!(sink.rows.iter().all(|r| r.experiment == id && r.schema == RESULT_SCHEMA && r.wall_time.is_none()));
        assert!(sink.rows.iter().all(|r| r.value.is_finite()), "{id}");
    }
}

#[test]
fn criteria_table_is_complete() {
    let c = criteria();
    assert_eq!(c.iter().map(|c| c.id).collect::<Vec<_>>(), (1..=12).collect::<Vec<_>>());
    let seeds: std::collections::HashSet<u64> = c.iter().map(|c| c.seed).collect();
    assert_eq!(seeds.len(), 12);
    assert_eq!(bundled_verdicts().len(), 12);
}

#[test]
fn property_suite_passes() {
    let results = run_suite(Suite::Property, |_| {});
    assert_eq!(results.len(), property_checks().len());
    for r in &results {
        assert!(r.pass, "{}", r.line());
    }
}

#[test]
fn fixture_mismatch_detection() {
    let r = run_criterion(Suite::Acceptance, 7).unwrap();
    assert!(r.pass);
    let fixture = vec![Verdict { id: 7, pass: false }];
    assert_eq!(fixture_mismatches(&[r.clone()], &fixture), vec![7]);
    assert!(fixture_mismatches(&[r], &bundled_verdicts()).is_empty());
    assert!(run_criterion(Suite::Acceptance, 99).is_none());
}

proptest! {
    #[test]
    fn configs_round_trip_through_toml(
        id in 0usize..11,
        n in proptest::option::of(3u32..50),
        trials in proptest::option::of(1u64..1_000_000),
        seed in proptest::option::of(any::<u32>()),
        t in proptest::option::of(0.01f64..5.0),
    ) {
        let cfg = ExperimentConfig {
            experiment: ExperimentId::ALL[id].as_str().into(),
            n,
            trials,
            seed: seed.map(u64::from),
            t,
            ..Default::default()
        };
        prop_assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
