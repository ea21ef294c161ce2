//! Command-line arguments and their validation into run configurations.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nordwatch_core::evaluation::{Dataset, ScenarioId, ScenarioSpec};
use nordwatch_core::features::DataKind;
use nordwatch_core::labeling::JudgeMode;

use crate::{GatewayError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "nordwatch",
    version,
    about = "Online practice assessment for wearable IMU streams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive the sliding-window lengths from the head of a stream.
    Calibrate(CalibrateArgs),
    /// Run prequential experiments and write reports.
    Run(RunArgs),
    /// Replay a stream through a live session and serve it over WebSocket.
    Serve(ServeArgs),
    /// Re-render a saved report.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// synthetic or pamap2.
    #[arg(long, default_value = "synthetic")]
    pub dataset: String,
    /// PAMAP2 directory or file; for synthetic, an optional stream dump.
    #[arg(long)]
    pub path: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Synthetic session length in seconds.
    #[arg(long, default_value_t = 600.0)]
    pub duration: f64,
    /// Passes over the three synthetic classes.
    #[arg(long, default_value_t = 3)]
    pub rounds: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Directory for calibration.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// A, B, C or D.
    #[arg(long, default_value = "A")]
    pub scenario: String,
    /// gnb, hatc, arfc or kmeans (scenario D).
    #[arg(long)]
    pub model: Option<String>,
    /// raw or engineered.
    #[arg(long, default_value = "engineered")]
    pub data: String,
    /// Learning stride; defaults to the scenario's.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Judge tag CSV (slot,label,source) for scenario D; simulated from ground truth if absent.
    #[arg(long)]
    pub tags: Option<PathBuf>,
    /// full or correct-only.
    #[arg(long, default_value = "full")]
    pub judge_mode: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Run every scenario × model × data kind combination.
    #[arg(long)]
    pub grid: bool,
    /// Record wall-clock time in the report.
    #[arg(long)]
    pub timing: bool,
    /// Synthetic sessions to average (seeds seed, seed+1, ...).
    #[arg(long, default_value_t = 1)]
    pub sessions: usize,
    /// Slots between cluster map recomputations in scenario D.
    #[arg(long, default_value_t = 500)]
    pub tick: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8787)]
    pub port: u16,
    /// Replay speed factor; `inf` replays as fast as possible.
    #[arg(long, default_value_t = 1.0)]
    pub speed: f64,
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    /// Judge tags to preload.
    #[arg(long)]
    pub tags: Option<PathBuf>,
    #[arg(long, default_value = "full")]
    pub judge_mode: String,
    /// Slots between explanation events; 0 disables them.
    #[arg(long, default_value_t = 250)]
    pub explain_every: u64,
    /// Seconds between metrics events.
    #[arg(long, default_value_t = 5.0)]
    pub metrics_interval: f64,
    /// Hold the replay until this many clients are connected.
    #[arg(long, default_value_t = 0)]
    pub wait_clients: usize,
    #[arg(long, default_value_t = 500)]
    pub tick: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// rows.json written by `run`.
    #[arg(long)]
    pub input: PathBuf,
    /// table or csv.
    #[arg(long, default_value = "table")]
    pub format: String,
}

/// Validated options of the `run` command.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: Dataset,
    pub path: Option<PathBuf>,
    pub specs: Vec<ScenarioSpec>,
    pub seed: u64,
    pub duration: f64,
    pub rounds: usize,
    pub tags: Option<PathBuf>,
    pub judge_mode: JudgeMode,
    pub out: PathBuf,
    pub timing: bool,
    pub sessions: usize,
    pub tick: u64,
}

/// Collects problems instead of stopping at the first one.
#[derive(Default)]
pub struct Problems(Vec<String>);

impl Problems {
    pub fn check<T>(&mut self, r: std::result::Result<T, impl std::fmt::Display>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.0.push(e.to_string());
                None
            }
        }
    }

    pub fn push(&mut self, msg: impl Into<String>) {
        self.0.push(msg.into());
    }

    pub fn finish(self) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(GatewayError::Config(self.0.join("; ")))
        }
    }
}

fn strip_config_prefix(e: nordwatch_core::Error) -> String {
    match e {
        nordwatch_core::Error::Config(m) => m,
        other => other.to_string(),
    }
}

pub fn check_source(p: &mut Problems, s: &SourceArgs) -> Option<Dataset> {
    let dataset = p.check(s.dataset.parse::<Dataset>().map_err(strip_config_prefix));
    if dataset == Some(Dataset::Pamap2) && s.path.is_none() {
        p.push("pamap2 needs --path");
    }
    if !(s.duration > 0.0) {
        p.push(format!("--duration must be > 0, got {}", s.duration));
    }
    if s.rounds == 0 {
        p.push("--rounds must be at least 1");
    }
    dataset
}

impl RunConfig {
    pub fn from_args(a: &RunArgs) -> Result<Self> {
        let mut p = Problems::default();
        let dataset = check_source(&mut p, &a.source);
        let scenario = p.check(
            a.scenario
                .parse::<ScenarioId>()
                .map_err(strip_config_prefix),
        );
        let data = p.check(a.data.parse::<DataKind>().map_err(strip_config_prefix));
        let judge_mode = p.check(
            a.judge_mode
                .parse::<JudgeMode>()
                .map_err(strip_config_prefix),
        );
        if a.sessions == 0 {
            p.push("--sessions must be at least 1");
        }
        if a.tick == 0 {
            p.push("--tick must be at least 1");
        }
        if a.stride == Some(0) {
            p.push("--stride must be at least 1");
        }
        let mut specs = Vec::new();
        if let (Some(dataset), false) = (dataset, a.grid) {
            if let (Some(id), Some(data)) = (scenario, data) {
                let model = a.model.clone().unwrap_or_else(|| {
                    if id == ScenarioId::D {
                        "kmeans".into()
                    } else {
                        "arfc".into()
                    }
                });
                if let Some(spec) = p.check(
                    ScenarioSpec::new(id, data, &model, dataset).map_err(strip_config_prefix),
                ) {
                    specs.push(spec);
                }
            }
        } else if let Some(dataset) = dataset {
            specs = ScenarioSpec::grid(dataset);
        }
        if let Some(stride) = a.stride.filter(|&s| s > 0) {
            for s in &mut specs {
                s.stride = stride;
            }
        }
        if !a.grid {
            if let Some(model) = &a.model {
                if !["gnb", "hatc", "arfc", "kmeans"].contains(&model.as_str()) {
                    p.push(format!("unknown model `{model}`"));
                }
            }
        }
        p.finish()?;
        Ok(Self {
            dataset: dataset.unwrap(),
            path: a.source.path.clone(),
            specs,
            seed: a.source.seed,
            duration: a.source.duration,
            rounds: a.source.rounds,
            tags: a.tags.clone(),
            judge_mode: judge_mode.unwrap(),
            out: a.out.clone(),
            timing: a.timing,
            sessions: a.sessions,
            tick: a.tick,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(extra: &[&str]) -> RunArgs {
        let mut argv = vec!["nordwatch", "run"];
        argv.extend_from_slice(extra);
        match Cli::parse_from(argv).command {
            Command::Run(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::from_args(&run_args(&[])).unwrap();
        assert_eq!(cfg.specs.len(), 1);
        assert_eq!(cfg.specs[0].model, "arfc");
        assert_eq!(cfg.specs[0].stride, 10);
        let cfg = RunConfig::from_args(&run_args(&["--scenario", "D"])).unwrap();
        assert_eq!(cfg.specs[0].model, "kmeans");
    }

    #[test]
    fn problems_are_aggregated() {
        let err = RunConfig::from_args(&run_args(&[
            "--scenario",
            "Q",
            "--data",
            "cooked",
            "--judge-mode",
            "loose",
        ]))
        .unwrap_err()
        .to_string();
        assert!(
            err.contains("scenario") && err.contains("cooked") && err.contains("loose"),
            "{err}"
        );
        let err = RunConfig::from_args(&run_args(&[
            "--scenario",
            "D",
            "--data",
            "raw",
            "--model",
            "gnb",
        ]))
        .unwrap_err()
        .to_string();
        assert!(
            err.contains("engineered") && err.contains("kmeans"),
            "{err}"
        );
    }

    #[test]
    fn grid_and_stride_override() {
        let cfg = RunConfig::from_args(&run_args(&["--grid", "--stride", "5"])).unwrap();
        assert_eq!(cfg.specs.len(), 19);
        assert!(cfg.specs.iter().all(|s| s.stride == 5));
    }
}
