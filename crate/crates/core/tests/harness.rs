use sectored_mimo::harness::{
    csv_path, csv_string, export, parse_csv_rates, run_and_export, run_scenario, summary_path, ScenarioSpec, Summary,
};
use sectored_mimo::{AntennaMode, NetworkConfig, RateCdf, Scheme};

fn spec(scheme: Scheme, threads: Option<usize>) -> ScenarioSpec {
    let base = NetworkConfig { cells: 7, users_per_cell: 3, seed: 99, ..Default::default() };
    ScenarioSpec { threads, ..ScenarioSpec::new(base, AntennaMode::Directional, scheme, vec![30.0, 3000.0], 4) }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    for scheme in [Scheme::Upa, Scheme::Cpa] {
        let one = run_scenario(&spec(scheme, Some(1))).unwrap();
        let many = run_scenario(&spec(scheme, Some(8))).unwrap();
        let again = run_scenario(&spec(scheme, Some(1))).unwrap();
        for ((a, b), c) in one.sweeps.iter().zip(&many.sweeps).zip(&again.sweeps) {
            assert_eq!(csv_string(a), csv_string(b));
            assert_eq!(csv_string(a), csv_string(c));
            assert_eq!(a.reports, b.reports);
        }
    }
}

#[test]
fn exported_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = ScenarioSpec { output_dir: Some(dir.path().to_path_buf()), ..spec(Scheme::Upa, None) };
    let (result, secs) = run_and_export(&s).unwrap();
    assert!(secs >= 0.0);
    for sweep in &result.sweeps {
        assert_eq!(sweep.records.len(), s.n_drops * 7 * 3);
        let text = std::fs::read_to_string(csv_path(dir.path(), sweep.mb)).unwrap();
        assert_eq!(text.lines().count(), sweep.records.len() + 1);
        let parsed = RateCdf::from_samples(parse_csv_rates(&text).unwrap()).unwrap();
        let direct = sweep.cdf().unwrap();
        for (x, y) in parsed.samples().iter().zip(direct.samples()) {
            assert!((x - y).abs() <= 1e-10 * y.abs());
        }

        let summary: Summary =
            serde_json::from_str(&std::fs::read_to_string(summary_path(dir.path(), sweep.mb)).unwrap()).unwrap();
        assert_eq!(summary.percentiles["p5"], summary.likely_rate_95);
        assert_eq!(summary.likely_rate_95, sweep.likely_rate_95().unwrap());
        assert_eq!(summary.rows, sweep.records.len());
        assert!(summary.failed_drops.is_empty());
        assert_eq!(summary.config.antennas_per_array, sweep.mb / 3.0);
    }

    // a second export of the same run is byte-identical
    let again = tempfile::tempdir().unwrap();
    export(&result, again.path()).unwrap();
    for sweep in &result.sweeps {
        for path in [csv_path, summary_path] {
            let a = std::fs::read(path(dir.path(), sweep.mb)).unwrap();
            let b = std::fs::read(path(again.path(), sweep.mb)).unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn seed_changes_the_drops() {
    let a = run_scenario(&spec(Scheme::Upa, None)).unwrap();
    let mut other = spec(Scheme::Upa, None);
    other.base.seed = 100;
    let b = run_scenario(&other).unwrap();
    assert_ne!(csv_string(&a.sweeps[0]), csv_string(&b.sweeps[0]));
}

#[test]
fn invalid_specs_are_rejected() {
    let mut s = spec(Scheme::Upa, None);
    s.mb = vec![];
    assert!(run_scenario(&s).is_err());
    let s = ScenarioSpec { n_drops: 0, ..spec(Scheme::Upa, None) };
    assert_eq!(run_scenario(&s).unwrap_err().exit_code(), 1);
    let s = ScenarioSpec { threads: Some(0), ..spec(Scheme::Upa, None) };
    assert!(run_scenario(&s).is_err());
}
