//! `calibrate`, `run` and `report`.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nordwatch_core::calibration::{calibrate as calibrate_head, CalibrationConfig};
use nordwatch_core::evaluation::{
    aggregate, render_table, run_prequential, simulated_judge, write_csv, write_prediction_log,
    ReportRow, RunOptions, RunOutcome, ScenarioId,
};
use nordwatch_core::features::FeatureConfig;
use nordwatch_core::labeling::{read_tags, JudgeTag};
use nordwatch_core::session::UnsupervisedConfig;
use nordwatch_core::stream::Stream;

use crate::cli::{check_source, CalibrateArgs, Problems, ReportArgs, RunArgs, RunConfig};
use crate::data::{self, LoadedStream};
use crate::{GatewayError, Result};

/// Judge tags per class drawn from ground truth when no tag file is given.
pub const SIMULATED_TAGS_PER_CLASS: usize = 5;

pub fn calibrate(args: &CalibrateArgs) -> Result<()> {
    let mut p = Problems::default();
    let dataset = check_source(&mut p, &args.source);
    p.finish()?;
    let sessions = data::load(dataset.unwrap(), &args.source, 1)?;
    let stream = &sessions[0].stream;
    let k = CalibrationConfig::default().slots(stream.descriptor.master_rate())?;
    if stream.len() < k {
        return Err(nordwatch_core::Error::Calibration(format!(
            "stream has {} slots, calibration needs {k}",
            stream.len()
        ))
        .into());
    }
    let cal = calibrate_head(&stream.descriptor, &stream.slots[..k], k)?;
    let w = cal.windows;
    println!(
        "windows: wQ1={} wQ2={} wQ3={} wavg={} (n_init={})",
        w.w_q1,
        w.w_q2,
        w.w_q3,
        w.w_avg,
        w.n_init()
    );
    println!(
        "channels used: {}, excluded: {}",
        cal.spacings.len(),
        cal.excluded.len()
    );
    for (address, reason) in &cal.excluded {
        println!("  excluded {address}: {reason}");
    }
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        let file = File::create(out.join("calibration.json"))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &cal)?;
    }
    Ok(())
}

fn load_tags(path: &Path) -> Result<Vec<JudgeTag>> {
    if !path.exists() {
        return Err(GatewayError::Data(format!(
            "tag file `{}` does not exist",
            path.display()
        )));
    }
    Ok(read_tags(File::open(path)?)?)
}

/// Tags for scenario D: the tag file if given, else a simulated judge.
fn tags_for(stream: &Stream, file_tags: Option<&[JudgeTag]>, seed: u64) -> Result<Vec<JudgeTag>> {
    if let Some(tags) = file_tags {
        return Ok(tags.to_vec());
    }
    Ok(simulated_judge(
        stream,
        &FeatureConfig::default(),
        SIMULATED_TAGS_PER_CLASS,
        seed,
    )?)
}

struct Finished {
    session: String,
    outcome: RunOutcome,
}

pub fn run(args: &RunArgs) -> Result<()> {
    let cfg = RunConfig::from_args(args)?;
    let sessions: Vec<LoadedStream> = data::load(cfg.dataset, &args.source, cfg.sessions)?;
    let file_tags = cfg.tags.as_deref().map(load_tags).transpose()?;
    let n_classes = sessions[0].stream.descriptor.classes.len();

    let mut finished = Vec::new();
    for spec in &cfg.specs {
        for s in &sessions {
            let mut opts = RunOptions::new(data::model_params(
                cfg.dataset,
                s.stream.descriptor.classes.len(),
                s.seed,
            ));
            opts.timing = cfg.timing;
            opts.unsupervised = UnsupervisedConfig {
                tick_slots: cfg.tick,
                mode: cfg.judge_mode,
            };
            if spec.id == ScenarioId::D {
                opts.tags = tags_for(&s.stream, file_tags.as_deref(), s.seed)?;
            }
            let outcome = run_prequential(&s.stream, spec, &opts)?;
            finished.push(Finished {
                session: s.name.clone(),
                outcome,
            });
        }
    }
    write_outputs(&cfg, &finished, n_classes)
}

fn write_outputs(cfg: &RunConfig, finished: &[Finished], n_classes: usize) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    let rows: Vec<ReportRow> = finished
        .iter()
        .map(|f| ReportRow {
            data: f.outcome.spec.data,
            scenario: f.outcome.spec.id,
            model: f.outcome.spec.model.clone(),
            metrics: f.outcome.metrics.clone(),
        })
        .collect();
    let agg = aggregate(&rows);
    write_csv(File::create(cfg.out.join("report.csv"))?, &agg, n_classes)?;

    let mut table = render_table(&agg, n_classes);
    let mut digests = String::new();
    for f in finished {
        let spec = &f.outcome.spec;
        let tag = format!(
            "{},{},{},{}",
            spec.data.as_str(),
            spec.id,
            spec.model,
            f.session
        );
        write!(digests, "{tag},{}", f.outcome.model_digest).unwrap();
        if let Some(u) = &f.outcome.unsupervised {
            write!(digests, ",{}", u.explainer_digest).unwrap();
            let oracle = u
                .oracle_accuracy
                .map(|a| format!("{a:.4}"))
                .unwrap_or_else(|| "-".into());
            writeln!(
                table,
                "{} {}: best-mapping accuracy {oracle}, explainer agreement {:.4}, bootstrap samples {}, tags {}",
                spec.model, f.session, u.agreement, u.bootstrap_samples, u.tags_delivered
            )
            .unwrap();
        }
        digests.push('\n');
    }
    fs::write(cfg.out.join("report.txt"), &table)?;
    fs::write(cfg.out.join("digests.txt"), digests)?;
    let file = File::create(cfg.out.join("rows.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &rows)?;

    let single = finished.len() == 1;
    if !single {
        fs::create_dir_all(cfg.out.join("predictions"))?;
    }
    for f in finished {
        let spec = &f.outcome.spec;
        let path = if single {
            cfg.out.join("predictions.log")
        } else {
            cfg.out.join("predictions").join(format!(
                "{}-{}-{}-{}.log",
                spec.data.as_str(),
                spec.id,
                spec.model,
                f.session
            ))
        };
        let comments = vec![
            format!("dataset {} session {}", cfg.dataset.as_str(), f.session),
            format!(
                "scenario {} model {} data {} stride {}",
                spec.id,
                spec.model,
                spec.data.as_str(),
                spec.stride
            ),
            format!(
                "windows {:?} threshold {:.6e}",
                f.outcome.windows.as_array(),
                f.outcome.threshold
            ),
        ];
        let mut w = BufWriter::new(File::create(path)?);
        write_prediction_log(&mut w, &comments, n_classes, &f.outcome.log)?;
        w.flush()?;
    }
    print!("{table}");
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    if !matches!(args.format.as_str(), "table" | "csv") {
        return Err(GatewayError::Config(format!(
            "unknown format `{}` (expected table or csv)",
            args.format
        )));
    }
    if !args.input.exists() {
        return Err(GatewayError::Data(format!(
            "path `{}` does not exist",
            args.input.display()
        )));
    }
    let rows: Vec<ReportRow> = serde_json::from_reader(File::open(&args.input)?)?;
    let n_classes = rows.first().map_or(0, |r| r.metrics.precision.len());
    let agg = aggregate(&rows);
    if args.format == "csv" {
        write_csv(std::io::stdout().lock(), &agg, n_classes)?;
    } else {
        print!("{}", render_table(&agg, n_classes));
    }
    Ok(())
}
