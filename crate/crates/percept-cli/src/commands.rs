//! Subcommand bodies. Each returns the process exit code on success, so a
//! completed-but-degraded run (training hit a NaN loss) can exit nonzero
//! after flushing every artifact it produced.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use percept_core::audio::{mfcc, read_wav, render_audio_plots, MfccConfig};
use percept_core::pipelines::{
    evaluate_model, featurize_speaker_dataset, load_for_eval, load_model, quantize_mfcc,
    run_training, save_model, PipelineError, Task,
};
use percept_core::train::{split_dataset, FitOutcome};

use crate::artifacts::write_report_set;
use crate::config::RunConfig;
use crate::error::CliError;

/// Train, then write `model.prcp`, `history.csv`, `report.json`,
/// `confusion.csv`, and `confusion.pgm` into the output directory. A NaN
/// loss during training still writes everything and exits 4.
pub fn cmd_train(run: &RunConfig) -> Result<u8, CliError> {
    std::fs::create_dir_all(&run.out_dir)?;
    let arts = run_training(&run.pipeline)?;

    save_model(&arts.model, &run.out_dir.join("model.prcp"))?;
    let history_file = File::create(run.out_dir.join("history.csv"))?;
    arts.history.write_csv(BufWriter::new(history_file))?;
    write_report_set(
        &run.out_dir,
        arts.model.task.as_str(),
        &arts.model.label_names,
        &arts.report,
    )?;

    if !run.quiet {
        println!(
            "trained {} epochs ({} steps)",
            arts.history.epochs.len(),
            arts.history.steps
        );
        println!(
            "test: loss {:.6}, accuracy {:.4}, macro-F1 {:.4}, weighted-F1 {:.4}",
            arts.report.loss,
            arts.report.metrics.accuracy,
            arts.report.metrics.macro_f1,
            arts.report.metrics.weighted_f1
        );
        println!("artifacts in {}", run.out_dir.display());
    }

    match arts.history.outcome {
        FitOutcome::NanLoss { epoch } => {
            eprintln!("warning: loss went NaN at epoch {epoch}; artifacts reflect the model state at the halt");
            Ok(4)
        }
        FitOutcome::EarlyStopped {
            stopped_epoch,
            best_epoch,
        } => {
            if !run.quiet {
                println!("early stop at epoch {stopped_epoch}; kept epoch {best_epoch} weights");
            }
            Ok(0)
        }
        FitOutcome::Completed => Ok(0),
    }
}

/// Evaluate a saved model on the config's dataset and write the report
/// artifacts. With `eval_split = "test"` the dataset is reduced to the
/// same held-out test indices the training run used, re-derived from the
/// split fractions and seed.
pub fn cmd_eval(run: &RunConfig, model_path: &Path) -> Result<u8, CliError> {
    let model = load_model(model_path)?;
    if model.task != run.pipeline.task {
        return Err(PipelineError::TaskMismatch {
            model: model.task,
            dataset: run.pipeline.task,
        }
        .into());
    }

    let loaded = load_for_eval(&model, &run.pipeline.data)?;
    for issue in &loaded.issues {
        eprintln!("warning: skipped {issue}");
    }
    let mut data = loaded.dataset()?;
    if run.eval_test_split_only {
        let split = split_dataset(&loaded.labels, loaded.classes, &run.pipeline.split)
            .map_err(PipelineError::from)?;
        data = data.subset(&split.test).map_err(PipelineError::from)?;
    }

    let report = evaluate_model(&model, &data, run.pipeline.batch_size)?;
    std::fs::create_dir_all(&run.out_dir)?;
    write_report_set(
        &run.out_dir,
        model.task.as_str(),
        &model.label_names,
        &report,
    )?;

    if !run.quiet {
        println!(
            "evaluated {} samples: loss {:.6}, accuracy {:.4}, macro-F1 {:.4}, weighted-F1 {:.4}",
            report.samples.len(),
            report.loss,
            report.metrics.accuracy,
            report.metrics.macro_f1,
            report.metrics.weighted_f1
        );
        println!("artifacts in {}", run.out_dir.display());
    }
    Ok(0)
}

#[derive(Serialize)]
struct ScalerJson<'a> {
    mean: &'a [f64],
    std: &'a [f64],
}

/// Extract MFCC features for a speaker manifest ahead of training: writes
/// the feature cache and a `scaler.json`, and prints per-class clip
/// counts. Training reuses the cache when the config points at it.
pub fn cmd_featurize(run: &RunConfig) -> Result<u8, CliError> {
    if run.pipeline.task != Task::Speaker {
        return Err(CliError::Config(format!(
            "featurize applies to the speaker task, not {}",
            run.pipeline.task
        )));
    }
    std::fs::create_dir_all(&run.out_dir)?;

    // Mirror training exactly: the MFCC config is snapped to its f32-visible
    // values first, so this cache and a train-time extraction are
    // byte-identical.
    let mfcc_cfg = quantize_mfcc(&run.pipeline.mfcc);
    let cache = run
        .pipeline
        .cache
        .clone()
        .unwrap_or_else(|| run.out_dir.join("features.mfcc"));
    let features =
        featurize_speaker_dataset(&run.pipeline.data, &mfcc_cfg, &run.pipeline.split, Some(&cache))?;

    for s in &features.skipped {
        eprintln!("warning: skipped {}: {}", s.path.display(), s.reason);
    }

    let mut scaler_text = serde_json::to_string_pretty(&ScalerJson {
        mean: &features.scaler.mean,
        std: &features.scaler.std,
    })
    .expect("scaler serialization");
    scaler_text.push('\n');
    std::fs::write(run.out_dir.join("scaler.json"), scaler_text)?;

    if !run.quiet {
        let mut counts = vec![0usize; features.classes];
        for &l in &features.labels {
            counts[l as usize] += 1;
        }
        for (c, n) in counts.iter().enumerate() {
            let name = match &run.pipeline.label_names {
                Some(names) if c < names.len() => names[c].clone(),
                _ => format!("speaker{c}"),
            };
            println!("{name}: {n} clips");
        }
        println!(
            "cached {} clips x {} frames x {} coefficients in {}",
            features.labels.len(),
            features.frames,
            mfcc_cfg.n_coeffs,
            cache.display()
        );
    }
    Ok(0)
}

/// Render one WAV file into inspection artifacts: `waveform.csv`,
/// `spectrogram.csv`/`.pgm`, and `mfcc.csv`/`.pgm` under the output
/// directory, using the default MFCC front end.
pub fn cmd_plot(wav: &Path, out_dir: &Path, quiet: bool) -> Result<u8, CliError> {
    let buf = read_wav(wav)?;
    let cfg = MfccConfig::default();
    let features = mfcc(&buf, &cfg)?;
    render_audio_plots(&buf, &cfg, &features, out_dir)?;
    if !quiet {
        println!(
            "plotted {} ({} samples at {} Hz, {} MFCC frames) into {}",
            wav.display(),
            buf.samples.len(),
            buf.sample_rate,
            features.rows,
            out_dir.display()
        );
    }
    Ok(0)
}
