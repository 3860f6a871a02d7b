//! Benchmark and grid-search behavior through the library API.

use std::path::Path;

use hidegl_cli::{grid_search, run_bench, BenchReport, RawConfig};

const SMALL: &str = "\
n_per_class = 40
ambient_dim = 5
data_seed = 3
repeats = 3
labels = 3, 6
";

fn raw(extra: &str) -> RawConfig {
    RawConfig::parse(&format!("{SMALL}{extra}")).unwrap()
}

#[test]
fn same_config_gives_identical_report() {
    for method in ["hidegl-l-approx", "hidegl-a-accurate", "agr-gauss", "agr-lae", "lgc"] {
        let extra = match method {
            "lgc" => "method = lgc\nknn = 5\nsigma = 0.5\n".to_string(),
            m if m.starts_with("agr") => format!("method = {m}\nk = 12\n"),
            m => format!("method = {m}\nk = 12\nsigma = 0.4\n"),
        };
        let cfg = raw(&extra).to_run_config().unwrap();
        let a = run_bench(&cfg).unwrap();
        let b = run_bench(&cfg).unwrap();
        assert_eq!(a.without_timings(), b.without_timings(), "{method}");
        for cell in &a.results {
            assert!(cell.accuracies.iter().all(|v| (0.0..=100.0).contains(v)));
            assert!(cell.sd_accuracy >= 0.0);
            assert!(cell.times.iter().all(|&t| t > 0.0), "{method}: timings must be positive");
            assert_eq!(cell.seeds.len(), 3);
        }
    }
}

#[test]
fn report_json_round_trip() {
    let cfg = raw("method = hidegl-a-approx\nk = 10\nsigma = 0.4\n").to_run_config().unwrap();
    let report = run_bench(&cfg).unwrap();
    let back = BenchReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);

    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], BenchReport::CSV_HEADER);
    assert_eq!(lines.len(), 1 + report.results.len());
    assert!(lines[1].starts_with("hidegl-a-approx,3,"));
}

fn write_four_points(dir: &Path) -> String {
    let path = dir.join("four.csv");
    std::fs::write(&path, "a,0.0,0.0\na,0.1,0.0\nb,5.0,5.0\nb,5.1,5.0\n").unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn single_test_point_scores_zero_or_hundred() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_four_points(dir.path());
    for (method, keys) in [
        ("hidegl-l-accurate", "k = 2\nsigma = 1\n"),
        ("hidegl-a-approx", "k = 2\nsigma = 1\n"),
        ("lgc", "knn = 2\nsigma = 1\n"),
        ("agr-gauss", "k = 2\ns_hat = 1\n"),
    ] {
        let text = format!("dataset = {data}\nmethod = {method}\n{keys}labels = 3\nrepeats = 1\n");
        let report = run_bench(&RawConfig::parse(&text).unwrap().to_run_config().unwrap()).unwrap();
        let acc = report.results[0].accuracies[0];
        assert!(acc == 0.0 || acc == 100.0, "{method}: {acc}");
    }
}

#[test]
fn singleton_grid_returns_its_config() {
    let r = raw("method = hidegl-l-accurate\nk = 12\nsigma = 0.4\n");
    let cells = r.expand_grid().unwrap();
    assert_eq!(cells.len(), 1);
    let grid = grid_search(&cells, None).unwrap();
    assert_eq!(grid.best, cells[0]);
    assert_eq!(grid.cells.len(), 1);
}

#[test]
fn grid_prefers_good_bandwidth_and_matches_rerun() {
    let r = raw("method = hidegl-l-approx\nk = 15\nsigma = 0.4, 50\nlambda2 = 0.01\n");
    let cells = r.expand_grid().unwrap();
    assert_eq!(cells.len(), 2);
    let grid = grid_search(&cells, None).unwrap();
    let scores: Vec<f64> = grid.cells.iter().map(|c| c.score.unwrap()).collect();
    assert!(scores[0] > scores[1], "{scores:?}");
    assert_eq!(grid.best.params.get("sigma"), Some(0.4));
    assert_eq!(grid.best_report.score(), scores[0]);
    let rerun = run_bench(&grid.best).unwrap();
    assert_eq!(rerun.without_timings(), grid.best_report.without_timings());
}

#[test]
fn grid_axes_expand_first_key_slowest() {
    let r = raw("method = hidegl-a-accurate\nsigma = 0.2, 0.3\nlambda1 = 1, 10, 100\n");
    let cells = r.expand_grid().unwrap();
    let pairs: Vec<(f64, f64)> = cells
        .iter()
        .map(|c| (c.params.get("sigma").unwrap(), c.params.get("lambda1").unwrap()))
        .collect();
    assert_eq!(pairs[0], (0.2, 1.0));
    assert_eq!(pairs[1], (0.2, 10.0));
    assert_eq!(pairs[3], (0.3, 1.0));
    assert!(r.to_run_config().is_err());
}

#[test]
fn usage_errors() {
    assert!(grid_search(&[], None).unwrap_err().to_string().contains("empty grid"));
    let err = raw("method = lgc\nlambda1 = 1\n").to_run_config().unwrap_err();
    assert!(err.to_string().contains("does not apply"), "{err}");
    assert!(raw("method = hidegl-a-approx\nalpha = 1.5\n").to_run_config().is_err());
    assert!(raw("method = nope\n").to_run_config().is_err());
    assert!(RawConfig::parse("unknown_key = 1\n").is_err());
    let err = RawConfig::parse("method = lgc\ndataset = x.csv\nnoise_sd = 0.1\n").unwrap().to_run_config().unwrap_err();
    assert!(err.to_string().contains("three-moon"), "{err}");
}
