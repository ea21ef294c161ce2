//! Stream sources for the commands.

use std::path::Path;

use nordwatch_core::evaluation::Dataset;
use nordwatch_core::models::ModelParams;
use nordwatch_core::stream::pamap2::{self, ActivityFilter};
use nordwatch_core::stream::synthetic::{
    generate_synthetic, proportional_schedule, SyntheticConfig,
};
use nordwatch_core::stream::{dump, Stream};

use crate::cli::SourceArgs;
use crate::{GatewayError, Result};

/// One recorded or generated session.
#[derive(Debug, Clone)]
pub struct LoadedStream {
    pub name: String,
    pub seed: u64,
    pub stream: Stream,
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(GatewayError::Data(format!(
            "path `{}` does not exist",
            path.display()
        )))
    }
}

/// Loads the configured sessions. Synthetic data yields `sessions` streams
/// seeded `seed, seed + 1, ...`; PAMAP2 yields one stream per qualifying subject.
pub fn load(dataset: Dataset, source: &SourceArgs, sessions: usize) -> Result<Vec<LoadedStream>> {
    match (dataset, &source.path) {
        (Dataset::Synthetic, Some(path)) => {
            require(path)?;
            Ok(vec![LoadedStream {
                name: path.display().to_string(),
                seed: source.seed,
                stream: dump::read_dump_file(path)?,
            }])
        }
        (Dataset::Synthetic, None) => (0..sessions.max(1) as u64)
            .map(|i| {
                let seed = source.seed + i;
                let cfg = SyntheticConfig::new(
                    seed,
                    proportional_schedule(source.duration, source.rounds),
                );
                Ok(LoadedStream {
                    name: format!("synthetic-{seed}"),
                    seed,
                    stream: generate_synthetic(&cfg)?,
                })
            })
            .collect(),
        (Dataset::Pamap2, Some(path)) => {
            require(path)?;
            let filter = ActivityFilter::default();
            let subjects = if path.is_dir() {
                pamap2::load_dir(path, &filter)?
            } else {
                vec![(path.clone(), pamap2::parse_pamap2_file(path, &filter)?)]
            };
            Ok(subjects
                .into_iter()
                .map(|(p, stream)| LoadedStream {
                    name: p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                    seed: source.seed,
                    stream,
                })
                .collect())
        }
        (Dataset::Pamap2, None) => Err(GatewayError::Config("pamap2 needs --path".into())),
    }
}

pub fn model_params(dataset: Dataset, n_classes: usize, seed: u64) -> ModelParams {
    match dataset {
        Dataset::Pamap2 if n_classes == 2 => ModelParams::pamap2(seed),
        _ => ModelParams::new(n_classes, seed),
    }
}
