use std::path::Path;
use std::process::{Command, Output};

fn setback(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_setback")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(out.status.success(), "exit {:?}: {stderr}", out.status);
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn weather_then_both_baselines() {
    let dir = tempfile::tempdir().unwrap();
    let weather = dir.path().join("weather.csv");
    let w = weather.to_str().unwrap();
    let stdout = ok(&setback(&[
        "gen-weather",
        "--days",
        "2",
        "--season",
        "winter",
        "--seed",
        "5",
        "--out",
        w,
    ]));
    assert!(stdout.contains("192 quarters"), "{stdout}");
    assert_eq!(lines(&weather), 193);

    for kind in ["default", "prescient"] {
        let out = dir.path().join(format!("{kind}.csv"));
        let stdout = ok(&setback(&[
            "baseline",
            "--kind",
            kind,
            "--building",
            "high_insulation",
            "--trace",
            w,
            "--out",
            out.to_str().unwrap(),
        ]));
        assert!(stdout.starts_with("2 days, energy"), "{stdout}");
        assert_eq!(lines(&out), 193);
    }
}

#[test]
fn run_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    std::fs::write(
        &config,
        "days = 2\nseed = 9\noutput_dir = \"out\"\n\n[building]\npreset = \"high_insulation\"\n\n\
         [learning]\nfqi_iterations = 4\n\n[learning.forest]\nn_trees = 5\n",
    )
    .unwrap();
    let stdout = ok(&setback(&["run", "--config", config.to_str().unwrap()]));
    let table: Vec<&str> = stdout.lines().collect();
    assert!(table[0].starts_with("day"));
    assert!(table[1].trim_start().starts_with('1') && table[2].trim_start().starts_with('2'));
    assert!(stdout.contains("total energy: default"));

    // Relative output paths resolve next to the config file.
    let results = dir.path().join("out");
    assert_eq!(lines(&results.join("daily_metrics.csv")), 3);

    let stdout = ok(&setback(&["plot", "--dir", results.to_str().unwrap()]));
    assert_eq!(stdout.lines().count(), 3);
    assert!(stdout.lines().all(|l| l.ends_with(".svg") && Path::new(l).is_file()));
}

#[test]
fn failures_exit_nonzero_with_context() {
    let dir = tempfile::tempdir().unwrap();

    let missing = dir.path().join("nope.toml");
    let out = setback(&["run", "--config", missing.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.toml"));

    let out = setback(&["plot", "--dir", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("daily_metrics.csv"));

    let weather = dir.path().join("w.csv");
    ok(&setback(&[
        "gen-weather",
        "--days",
        "1",
        "--out",
        weather.to_str().unwrap(),
    ]));
    let out = setback(&[
        "baseline",
        "--kind",
        "default",
        "--building",
        "igloo",
        "--trace",
        weather.to_str().unwrap(),
        "--out",
        dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("igloo"));

    let out = setback(&["baseline", "--kind", "optimal", "--trace", "a", "--out", "b"]);
    assert!(!out.status.success());
}
