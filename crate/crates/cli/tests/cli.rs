use std::path::Path;
use std::process::{Command, Output};

fn wavelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavelab"))
        .args(args)
        .env("WAVELAB_THREADS", "2")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn area_witness_writes_samples_and_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "alpha = 1.0\nepsilon = 0.1\nn_max = 6\n");
    let o = wavelab(&["area-witness", "--config", &cfg, "--output", out.to_str().unwrap(), "--svg"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let (header, rows) = read_csv(&out.join("area_witness.csv"));
    assert_eq!(header, ["t", "g"]);
    assert!(rows.len() > 100 && rows.iter().all(|r| r[1] >= 0.0));

    let (header, peaks) = read_csv(&out.join("area_witness_peaks.csv"));
    assert_eq!(&header[..5], ["n", "s_n", "t_n", "z_n", "g_t_n"]);
    assert_eq!(peaks.len(), 6);
    for p in &peaks {
        assert!((p[1] - p[0].exp()).abs() <= 1e-9 * p[1]);
        // g(t_n) = (1+t_n)^{-α/2-ε}
        assert!((p[4] - (1.0 + p[2]).powf(-0.6)).abs() <= 1e-12);
    }
    assert!(out.join("area_witness.svg").exists());
}

#[test]
fn simulate_at_time_zero_is_one_snapshot_of_the_initial_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "t_end = 0.0\ngrid_points = 65\nhalf_width = 8.0\namplitude = 0.0\n");
    let o = wavelab(&["simulate", "--config", &cfg, "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out.join("simulate.csv"));
    assert_eq!(header, ["t", "x", "u"]);
    assert_eq!(rows.len(), 65);
    assert!(rows.iter().all(|r| r[0] == 0.0));
    assert_eq!(rows[0][1], -8.0);
    assert_eq!(rows[64][1], 8.0);
    assert!(rows.windows(2).all(|w| w[1][2] >= w[0][2]));
}

#[test]
fn noise_violation_exits_with_the_rule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sigma = 0.7\nmu = 0.2\n");
    let o = wavelab(&["rarefaction-stability", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("sigma^2 < 2*mu"), "{err}");
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mu = 0.2\nsigmaa = 0.1\n");
    let o = wavelab(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigmaa"));
}

#[test]
fn shock_instability_is_deterministic_and_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "paths = 2000\ntime_points = 20\nseed = 9\n");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = wavelab(&["shock-instability", "--config", &cfg, "--output", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out.join("shock_instability.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let (header, rows) = read_csv(&dir.path().join("a/shock_instability.csv"));
    assert_eq!(header, ["t", "d_quadrature", "d_mc", "stderr"]);
    assert_eq!(rows.len(), 20);
    assert!(rows.windows(2).all(|w| w[1][1] >= w[0][1]));
}

#[test]
fn failing_check_exits_one_with_a_failure_list() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("f.csv");
    let rows: String = (0..50).map(|i| format!("{},{}\n", i as f64, 1.0)).collect();
    std::fs::write(&input, format!("t,value\n{rows}")).unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("input = {:?}\nc0 = 1.0\nc1 = 1.0\nalpha = 1.0\n", input.to_str().unwrap()),
    );
    let out = dir.path().join("out");
    let o = wavelab(&["area-check", "--config", &cfg, "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    let names: Vec<&str> = err["failures"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"premise 2 (integral bound)"), "{names:?}");
    assert!(out.join("area_check.csv").exists());
}

#[test]
fn oracle_compare_passes_on_a_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid_points = 2048\ntolerance = 2e-2\n");
    let out = dir.path().join("out");
    let o = wavelab(&["oracle-compare", "--config", &cfg, "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out.join("oracle_compare.csv"));
    assert_eq!(header, ["x", "fd", "cole_hopf", "gap"]);
    assert_eq!(rows.len(), 2048);
}

#[test]
fn small_rarefaction_run_writes_headline_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "t_end = 5.0\ngrid_points = 512\nrecord_points = 20\nexponent_max = 10.0\nboundary_margin = 2.0\n",
    );
    let out = dir.path().join("out");
    let o = wavelab(&[
        "rarefaction-stability",
        "--config",
        &cfg,
        "--output",
        out.to_str().unwrap(),
        "--paths",
        "4",
        "--seed",
        "11",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out.join("rarefaction.csv"));
    assert_eq!(&header[..3], ["t", "lp2_mean", "lp2_stderr"]);
    assert!(header.iter().any(|h| h == "lpinf_mean"));
    assert_eq!(rows.len(), 20);
    let (_, stats) = read_csv(&out.join("as_statistic.csv"));
    assert_eq!(stats.len(), 4);
    assert_eq!(stats[0][1], 11.0);
}
