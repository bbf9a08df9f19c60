mod common;

use std::path::Path;

use common::{all_stamped, run_into, small_config, ALL};
use proptest::prelude::*;
use slelab_cli::config::parse_override;
use slelab_cli::{main_with, manifest_hash, Experiment, ExperimentConfig, Params, WindowSpec, EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK};

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn cli(args: &[&str]) -> i32 {
    main_with(std::iter::once("slelab").chain(args.iter().copied()))
}

#[test]
fn full_config_round_trips() {
    let config = ExperimentConfig {
        experiment: Experiment::Zipper,
        seed: 123,
        replicates: 7,
        out: "somewhere/else".into(),
        params: Params {
            kappa: Some(2.0),
            gamma: Some(2f64.sqrt()),
            dt: Some(1e-4),
            schedule: Some(vec![0.5, 0.25, 0.125]),
            points: Some(vec![[0.0, 1.0], [0.25, 0.75]]),
            regime: Some("boundary".into()),
            stationarity: Some(vec![0.0, 0.35, 0.7]),
            ..Params::default()
        },
        window: Some(WindowSpec { radius: f64::INFINITY, exclusion: 0.05 }),
    };
    let text = config.to_toml();
    let back = ExperimentConfig::parse_with("rt.toml", &text, None, &[]).unwrap();
    assert_eq!(back, config);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn configs_round_trip(
        seed in 0u64..=i64::MAX as u64,
        replicates in 1usize..100_000,
        kappa in 0.01f64..3.99,
        dt in 1e-6f64..1e-1,
        segments in 1usize..64,
        radius in 0.1f64..10.0,
    ) {
        let config = ExperimentConfig {
            experiment: Experiment::MarkovCheck,
            seed,
            replicates,
            out: "out".into(),
            params: Params { kappa: Some(kappa), dt: Some(dt), segments: Some(segments), ..Params::default() },
            window: Some(WindowSpec { radius, exclusion: radius / 3.0 }),
        };
        let back = ExperimentConfig::parse_with("rt.toml", &config.to_toml(), None, &[]).unwrap();
        prop_assert_eq!(back, config);
    }
}

#[test]
fn errors_point_at_the_line() {
    let text = "experiment = \"gmc\"\nseed = 1\nreplicates = 10\n\n[params]\ngamma_tilde = 0.3\nkappa = 7.0\n";
    let e = ExperimentConfig::parse_with("a.toml", text, None, &[]).unwrap_err();
    assert_eq!(e.origin.as_deref(), Some("a.toml:7"));

    let text = "experiment = \"gmc\"\nseed = 1\nreplicates = 10\n[params]\nwibble = 1\n";
    let e = ExperimentConfig::parse_with("b.toml", text, None, &[]).unwrap_err();
    assert_eq!(e.origin.as_deref(), Some("b.toml:5"));
    assert!(e.message.contains("wibble"));

    let text = "experiment = \"gmc\"\nseed = 1\nreplicates = [\n";
    let e = ExperimentConfig::parse_with("c.toml", text, None, &[]).unwrap_err();
    assert_eq!(e.origin.as_deref(), Some("c.toml:3"));

    let text = "experiment = \"gmc\"\nseed = 1\nreplicates = 10\n[window]\nradius = 1.0\nexclusion = 2.0\n";
    let e = ExperimentConfig::parse_with("d.toml", text, None, &[]).unwrap_err();
    assert_eq!(e.origin.as_deref(), Some("d.toml:6"));
}

#[test]
fn overrides_replace_file_values_and_are_located() {
    let text = "experiment = \"sle-trace\"\nseed = 1\nreplicates = 10\n[params]\nkappa = 1.0\n";
    let ov = vec![parse_override("params.kappa=2.5").unwrap(), parse_override("window.radius=0.8").unwrap()];
    let c = ExperimentConfig::parse_with("e.toml", text, None, &ov).unwrap();
    assert_eq!(c.params.kappa, Some(2.5));
    assert_eq!(c.window, Some(WindowSpec { radius: 0.8, exclusion: 0.0 }));

    let bad = vec![parse_override("params.kappa=9").unwrap()];
    let e = ExperimentConfig::parse_with("e.toml", text, None, &bad).unwrap_err();
    assert_eq!(e.origin.as_deref(), Some("flag --set params.kappa"));
    let bad = vec![parse_override("params.bogus=3").unwrap()];
    let e = ExperimentConfig::parse_with("e.toml", text, None, &bad).unwrap_err();
    assert_eq!(e.origin.as_deref(), Some("flag --set params.bogus"));

    // A string value is taken verbatim when it is not TOML.
    assert_eq!(parse_override("params.regime=bulk").unwrap().1, toml::Value::String("bulk".into()));
    assert!(parse_override("novalue").is_err());
}

#[test]
fn experiment_must_match_the_file() {
    let text = "experiment = \"sle-trace\"\nseed = 1\nreplicates = 1\n";
    let e = ExperimentConfig::parse_with("f.toml", text, Some(Experiment::Gmc), &[]).unwrap_err();
    assert_eq!(e.origin.as_deref(), Some("f.toml:1"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out").display().to_string();
    let ok = write(dir.path(), "ok.toml", "experiment = \"sle-trace\"\nseed = 7\nreplicates = 1\n");
    assert_eq!(cli(&["sle-trace", "--config", &ok, "--out", &out]), EXIT_OK);

    let bad = write(dir.path(), "bad.toml", "experiment = \"sle-trace\"\nseed = 7\nreplicates = 1\n[params]\nkappa = 5.0\n");
    assert_eq!(cli(&["sle-trace", "--config", &bad, "--out", &out]), EXIT_INVALID);
    assert_eq!(cli(&["gmc", "--config", &ok, "--out", &out]), EXIT_INVALID);
    assert_eq!(cli(&["sle-trace", "--config", &ok, "--set", "params.kappa=-1", "--out", &out]), EXIT_INVALID);
    assert_eq!(cli(&["no-such-experiment"]), EXIT_INVALID);
    assert_eq!(cli(&["sle-trace", "--config", "/does/not/exist.toml"]), EXIT_INVALID);

    // Coarse driving steps leave gaps wider than the smallest scale in
    // every replicate, which exceeds the flagged-replicate threshold.
    let coarse = write(
        dir.path(),
        "coarse.toml",
        "experiment = \"minkowski\"\nseed = 1\nreplicates = 3\n[params]\ndt = 0.01\nmax_gap = 0.2\n",
    );
    assert_eq!(cli(&["minkowski", "--config", &coarse, "--out", &out]), EXIT_NUMERICAL);
}

#[test]
fn flags_mirror_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let file = write(dir.path(), "t.toml", "experiment = \"sle-trace\"\nseed = 3\nreplicates = 2\n[params]\nkappa = 2.0\n");
    assert_eq!(cli(&["sle-trace", "--config", &file, "--out", &a.display().to_string()]), EXIT_OK);
    let b_str = b.display().to_string();
    let flags = ["sle-trace", "--seed", "3", "--replicates", "2", "--set", "params.kappa=2.0", "--out", &b_str];
    assert_eq!(cli(&flags), EXIT_OK);
    assert_eq!(common::result_files(&a), common::result_files(&b));
}

#[test]
fn zero_driving_trace_ends_at_2i() {
    let dir = tempfile::tempdir().unwrap();
    let text = "experiment = \"sle-trace\"\nseed = 7\nreplicates = 1\n[params]\nkappa = 0.0\nhorizon = 1.0\n";
    let c = ExperimentConfig::parse_with("z.toml", text, None, &[]).unwrap();
    let files = run_into(&c, dir.path(), 1);
    let csv = String::from_utf8(files["results/trace_0000.csv"].clone()).unwrap();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last.len(), 3);
    assert!((last[0] - 1.0).abs() < 1e-12);
    assert!(last[1].abs() < 1e-6, "re = {}", last[1]);
    assert!((last[2] - 2.0).abs() < 1e-6, "im = {}", last[2]);
}

#[test]
fn every_experiment_is_deterministic_and_stamped() {
    for e in ALL {
        let c = small_config(e);
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let first = run_into(&c, a.path(), 1);
        let second = run_into(&c, b.path(), 2);
        assert!(!first.is_empty());
        for (name, bytes) in &first {
            assert!(second.get(name) == Some(bytes), "{e}: {name} differs between runs");
        }
        assert_eq!(first.len(), second.len());
        all_stamped(&first, &manifest_hash(&c)).unwrap();

        let m: serde_json::Value = serde_json::from_slice(&std::fs::read(a.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["manifest_hash"], manifest_hash(&c));
        assert_eq!(m["schema_version"], slelab_cli::SCHEMA_VERSION);
        assert_eq!(m["outputs"].as_array().unwrap().len(), first.len());
        assert!(m["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
        assert_eq!(m["config"]["experiment"], e.name());
    }
}

#[test]
fn a_different_config_changes_the_hash() {
    let c = small_config(Experiment::Gmc);
    let mut d = c.clone();
    d.seed += 1;
    assert_ne!(manifest_hash(&c), manifest_hash(&d));
    let mut moved = c.clone();
    moved.out = "elsewhere".into();
    assert_eq!(manifest_hash(&c), manifest_hash(&moved));
}

/// Keys and value kinds of a JSON document, recursively for objects.
fn shape(v: &serde_json::Value) -> serde_json::Value {
    use serde_json::Value::*;
    match v {
        Object(m) => Object(m.iter().map(|(k, v)| (k.clone(), shape(v))).collect()),
        Array(_) => "array".into(),
        Number(_) | Null => "number".into(),
        Bool(_) => "bool".into(),
        String(_) => "string".into(),
    }
}

#[test]
fn zipper_report_matches_the_golden_schema() {
    let fixture: serde_json::Value =
        serde_json::from_str(include_str!("fixtures/zipper_slope_report.json")).expect("fixture parses");
    for key in ["median_R2", "slope_cv", "dropped"] {
        assert!(fixture[key].is_number(), "{key}");
    }
    assert_eq!(fixture["replicates"], 200);
    assert!(fixture["median_R2"].as_f64().unwrap() > 0.9);

    let dir = tempfile::tempdir().unwrap();
    let files = run_into(&small_config(Experiment::Zipper), dir.path(), 1);
    let report: serde_json::Value = serde_json::from_slice(&files["results/slope_report.json"]).unwrap();
    assert_eq!(shape(&report), shape(&fixture));

    let plot = String::from_utf8(files["plot/clocks.dat"].clone()).unwrap();
    assert_eq!(plot.lines().nth(1), Some("# replicate t m"));
    let rows = plot.lines().skip(2).filter(|l| !l.is_empty()).count();
    assert!(rows > 0);
}
