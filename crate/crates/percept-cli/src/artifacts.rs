//! Run artifacts written next to the model: `report.json`, `confusion.csv`,
//! and `confusion.pgm`. All writers are deterministic byte-for-byte so a
//! rerun with the same config and seed reproduces identical files.

use std::io;
use std::path::Path;

use serde::Serialize;

use percept_core::imaging;
use percept_core::pipelines::TaskEvalReport;

/// `report.json` schema. Numbers serialize with shortest-roundtrip
/// formatting, so equal values always produce equal bytes; non-finite
/// values (a model that diverged) render as `null` rather than aborting
/// the write.
#[derive(Serialize)]
pub struct ReportJson<'a> {
    pub task: &'a str,
    pub labels: &'a [String],
    pub loss: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassJson<'a>>,
    pub confusion: Vec<Vec<u64>>,
    pub samples: Vec<SampleJson>,
}

#[derive(Serialize)]
pub struct ClassJson<'a> {
    pub label: &'a str,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Serialize)]
pub struct SampleJson {
    pub truth: u32,
    pub predicted: u32,
    pub confidence: f32,
}

pub fn report_json(task: &str, labels: &[String], report: &TaskEvalReport) -> String {
    let k = report.confusion.classes();
    let body = ReportJson {
        task,
        labels,
        loss: report.loss,
        accuracy: report.metrics.accuracy,
        macro_f1: report.metrics.macro_f1,
        weighted_f1: report.metrics.weighted_f1,
        per_class: labels
            .iter()
            .zip(&report.metrics.per_class)
            .map(|(label, m)| ClassJson {
                label,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                support: m.support,
            })
            .collect(),
        confusion: (0..k).map(|t| report.confusion.row(t).to_vec()).collect(),
        samples: report
            .samples
            .iter()
            .map(|s| SampleJson {
                truth: s.true_label,
                predicted: s.predicted,
                confidence: s.confidence,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&body).expect("report serialization");
    text.push('\n');
    text
}

pub fn confusion_csv(labels: &[String], report: &TaskEvalReport) -> String {
    let mut out = String::from("label");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (t, label) in labels.iter().enumerate() {
        out.push_str(label);
        for &c in report.confusion.row(t) {
            out.push(',');
            out.push_str(&c.to_string());
        }
        out.push('\n');
    }
    out
}

/// Row-normalized confusion image: each cell becomes a 32x32 gray square,
/// `round(count / row_total * 255)`; rows with no samples render black.
pub fn write_confusion_pgm(path: &Path, report: &TaskEvalReport) -> io::Result<()> {
    const CELL: usize = 32;
    let k = report.confusion.classes();
    let side = k * CELL;
    let mut pixels = vec![0u8; side * side];
    for t in 0..k {
        let row = report.confusion.row(t);
        let total: u64 = row.iter().sum();
        for (p, &c) in row.iter().enumerate() {
            let gray = if total == 0 {
                0u8
            } else {
                (c as f64 / total as f64 * 255.0).round() as u8
            };
            for dy in 0..CELL {
                let y = t * CELL + dy;
                let x0 = p * CELL;
                pixels[y * side + x0..y * side + x0 + CELL].fill(gray);
            }
        }
    }
    imaging::write_pgm(path, side, side, &pixels).map_err(io::Error::other)
}

pub fn write_report_set(
    out_dir: &Path,
    task: &str,
    labels: &[String],
    report: &TaskEvalReport,
) -> io::Result<()> {
    std::fs::write(out_dir.join("report.json"), report_json(task, labels, report))?;
    std::fs::write(out_dir.join("confusion.csv"), confusion_csv(labels, report))?;
    write_confusion_pgm(&out_dir.join("confusion.pgm"), report)
}
