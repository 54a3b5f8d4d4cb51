//! Short end-to-end runs through the harness and the plot writer.

use std::path::Path;

use setback_core::env::{read_batch, StepRecord};
use setback_core::harness::{run_experiment, TRACE_FILES};
use setback_core::plot::{emit_plots, OUTPUT_FILES};
use setback_core::{ExperimentConfig, QUARTERS_PER_DAY, STEP_HOURS};

fn light_config(days: usize, dir: &Path) -> ExperimentConfig {
    let mut config = ExperimentConfig::from_toml_str(&format!(
        r#"
        season = "winter"
        days = {days}
        seed = 3

        [building]
        preset = "high_insulation"

        [learning]
        fqi_iterations = 6

        [learning.forest]
        n_trees = 8
        "#
    ))
    .unwrap();
    config.output_dir = dir.to_path_buf();
    config
}

fn records(path: &Path) -> Vec<StepRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap()
}

#[test]
fn three_day_run_keeps_its_books() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment(&light_config(3, dir.path()), true).unwrap();
    assert_eq!(summary.metrics.len(), 3);
    assert!(summary.metrics[0].tau.is_none(), "day 1 explores uniformly");
    assert!(summary.metrics[0].e_greedy.is_none());
    assert!(summary.metrics[1..]
        .iter()
        .all(|m| m.tau.is_some() && m.e_greedy.is_some()));

    let lanes: Vec<Vec<StepRecord>> = TRACE_FILES.iter().map(|f| records(&dir.path().join(f))).collect();
    let totals = [
        summary.energy_default_wh,
        summary.energy_learning_wh,
        summary.energy_prescient_wh,
    ];
    for (lane, total) in lanes.iter().zip(totals) {
        assert_eq!(lane.len(), 3 * QUARTERS_PER_DAY);
        let energy: f64 = lane.iter().map(|r| r.u_ph * STEP_HOURS).sum();
        assert!((energy - total).abs() < 1e-6 * total.max(1.0), "{energy} vs {total}");
        // Consecutive records chain through the simulator state.
        for pair in lane.windows(2) {
            assert_eq!(pair[0].t_in_next, pair[1].t_in);
            assert_eq!(pair[0].t_m_next, pair[1].t_m);
        }
    }
    // All lanes see the same weather.
    for ((d, l), p) in lanes[0].iter().zip(&lanes[1]).zip(&lanes[2]) {
        assert_eq!(d.t_out, l.t_out);
        assert_eq!(d.solar, p.solar);
    }

    let cumulative = std::fs::read_to_string(dir.path().join("cumulative_energy.csv")).unwrap();
    let rows: Vec<Vec<f64>> = cumulative
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for pair in rows.windows(2) {
        assert!((1..4).all(|k| pair[1][k] >= pair[0][k]));
    }

    let batch = read_batch(dir.path().join("batch.csv")).unwrap();
    assert_eq!(batch.len(), 3 * QUARTERS_PER_DAY);
    let learned_energy: f64 = batch.iter().map(|t| t.u_ph * STEP_HOURS).sum();
    assert!((learned_energy - summary.energy_learning_wh).abs() < 1e-6 * learned_energy.max(1.0));
}

#[test]
fn charts_are_well_formed_svg() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&light_config(2, dir.path()), false).unwrap();
    let written = emit_plots(dir.path()).unwrap();
    assert_eq!(written.len(), OUTPUT_FILES.len());
    for path in written {
        let text = std::fs::read_to_string(&path).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert!(doc
            .descendants()
            .any(|n| n.has_tag_name("polyline") || n.has_tag_name("path")));
    }
}

#[test]
fn same_seed_same_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&light_config(2, a.path()), false).unwrap();
    run_experiment(&light_config(2, b.path()), false).unwrap();
    for name in TRACE_FILES
        .iter()
        .chain(&["daily_metrics.csv", "cumulative_energy.csv", "batch.csv"])
    {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between identical runs");
    }
}

#[test]
fn unwritable_output_reports_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let err = run_experiment(&light_config(1, &blocker.join("out")), false).unwrap_err();
    assert!(err.to_string().contains("file"), "{err}");
}
