use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use setback_core::baselines::prescient_day;
use setback_core::env::{run_day, DayTrace};
use setback_core::harness::{run_experiment_with, BuildingSection};
use setback_core::weather::{load_trace, save_trace, synthesize_trace, ColumnMap};
use setback_core::{DefaultController, EpisodeState, ExperimentConfig, Season};

#[derive(Parser)]
#[command(
    name = "setback",
    version,
    about = "Set-back thermostat experiments for a heat pump with auxiliary heating"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the default, learning and prescient strategies side by side.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Also rerun each learning day with the greedy policy.
        #[arg(long)]
        eval_greedy: bool,
    },
    /// Run one baseline controller over a trace file.
    Baseline {
        #[arg(long, value_enum)]
        kind: BaselineKind,
        #[arg(long, default_value = "low_insulation")]
        building: String,
        #[arg(long, default_value = "winter")]
        season: Season,
        #[arg(long)]
        trace: PathBuf,
        /// Per-quarter trace of the run, CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic weather trace.
    GenWeather {
        #[arg(long)]
        days: usize,
        #[arg(long, default_value = "winter")]
        season: Season,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG charts from a result directory.
    Plot {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineKind {
    Default,
    Prescient,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, eval_greedy } => run(config, eval_greedy),
        Command::Baseline {
            kind,
            building,
            season,
            trace,
            out,
        } => baseline(kind, building, season, trace, out),
        Command::GenWeather {
            days,
            season,
            seed,
            out,
        } => {
            let trace = synthesize_trace(days, season, seed)?;
            save_trace(&trace, &out)?;
            println!("wrote {} quarters to {}", trace.len(), out.display());
            Ok(())
        }
        Command::Plot { dir } => {
            for path in setback_core::plot::emit_plots(&dir)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn run(path: PathBuf, eval_greedy: bool) -> Result<()> {
    let config = ExperimentConfig::load(&path).with_context(|| format!("loading {}", path.display()))?;
    println!("day      e_d_wh      e_l_wh      e_p_wh     m_d   d_d");
    let summary = run_experiment_with(&config, eval_greedy, |m| {
        let m_d = m.m_d.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"));
        println!(
            "{:>3} {:>11.0} {:>11.0} {:>11.0} {:>7} {:>5.2}",
            m.day, m.e_d, m.e_l, m.e_p, m_d, m.d_d
        );
    })?;
    println!(
        "total energy: default {:.1} kWh, learning {:.1} kWh ({:+.2}%), prescient {:.1} kWh ({:+.2}%)",
        summary.energy_default_wh / 1000.0,
        summary.energy_learning_wh / 1000.0,
        -summary.savings_learning_pct(),
        summary.energy_prescient_wh / 1000.0,
        -summary.savings_prescient_pct(),
    );
    println!("results in {}", summary.output_dir.display());
    Ok(())
}

fn baseline(kind: BaselineKind, building: String, season: Season, trace_path: PathBuf, out: PathBuf) -> Result<()> {
    let config = ExperimentConfig {
        season,
        building: BuildingSection {
            preset: building,
            ..Default::default()
        },
        ..Default::default()
    };
    config.validate()?;
    let trace = load_trace(&trace_path, &ColumnMap::default())?;
    let mut state = EpisodeState::initial(config.initial_state(), &trace, 0, config.start_weekday);
    let mut writer = csv::Writer::from_path(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut total = 0.0;
    let mut violations = 0;
    for day in 1..=trace.days() {
        let (day_trace, end): (DayTrace, EpisodeState) = match kind {
            BaselineKind::Default => {
                let env = config.env_default()?;
                let out = run_day(&mut DefaultController::new(season), &env, state, &trace)?;
                (out.trace, out.end)
            }
            BaselineKind::Prescient => {
                let env = config.env_setback()?;
                let plan = prescient_day(&env, state, &trace, &config.grid()?).with_context(|| format!("day {day}"))?;
                (plan.outcome.trace, plan.outcome.end)
            }
        };
        total += day_trace.energy_wh();
        violations += day_trace.violations();
        for record in &day_trace.steps {
            writer.serialize(record)?;
        }
        state = end;
    }
    writer.flush()?;
    println!(
        "{} days, energy {:.1} kWh, {} comfort violations, trace in {}",
        trace.days(),
        total / 1000.0,
        violations,
        out.display()
    );
    Ok(())
}
