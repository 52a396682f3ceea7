use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::experiment::Experiment;
use super::grid::{reference_accuracy, MethodSpec, REFERENCE_DATASETS};
use super::methods::{Fitted, Method, MethodRegistry};
use super::metrics::{evaluate, Evaluation};
use super::model::TrainedModel;
use crate::blocks::History;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub method: MethodSpec,
    pub dataset: String,
    pub seed: u64,
    /// Exactly `evaluation.correct / evaluation.total` on the test split.
    pub accuracy: f64,
    pub evaluation: Evaluation,
    pub classes: Vec<String>,
    pub config: ExperimentConfig,
    pub history: Option<History>,
    pub wall_clock_secs: f64,
}

/// Fits `method` on the experiment and scores it on the test split.
pub fn run_method(exp: &Experiment, method: &dyn Method) -> Result<(RunResult, TrainedModel)> {
    let started = Instant::now();
    let Fitted { model, history } = method.fit(exp)?;
    let predictions = exp
        .test
        .iter()
        .map(|ex| model.predict_index(&ex.input))
        .collect::<Result<Vec<_>>>()?;
    let gold: Vec<usize> = exp.test.iter().map(|ex| ex.label).collect();
    let evaluation = evaluate(&predictions, &gold, exp.n_classes())?;
    let result = RunResult {
        method: *method.spec(),
        dataset: exp.name.clone(),
        seed: exp.seed,
        accuracy: evaluation.accuracy,
        evaluation,
        classes: exp.classes.clone(),
        config: exp.config.clone(),
        history,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok((result, model))
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultsTable {
    pub dataset: String,
    pub seed: u64,
    pub rows: Vec<RunResult>,
}

/// Runs every method listed in the experiment's grid config, in order, on
/// the same splits, vocabulary and featurizer.
pub fn compare_all(exp: &Experiment, registry: &MethodRegistry) -> Result<ResultsTable> {
    let methods = exp
        .config
        .grid
        .methods
        .iter()
        .map(|key| registry.get(key))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(methods.len());
    for (i, method) in methods.iter().enumerate() {
        log::info!("[{}/{}] method {}", i + 1, methods.len(), method.spec());
        let (row, _) = run_method(exp, *method)?;
        log::info!("method {}: accuracy {:.4}", method.spec(), row.accuracy);
        rows.push(row);
    }
    Ok(ResultsTable {
        dataset: exp.name.clone(),
        seed: exp.seed,
        rows,
    })
}

impl ResultsTable {
    pub fn best_accuracy(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.accuracy).reduce(f64::max)
    }

    /// Every row reaching the best accuracy is flagged.
    pub fn is_best(&self, row: &RunResult) -> bool {
        self.best_accuracy() == Some(row.accuracy)
    }

    pub fn accuracy_of(&self, method_id: u8) -> Option<f64> {
        self.rows.iter().find(|r| r.method.id == method_id).map(|r| r.accuracy)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![
            "method".to_string(),
            "name".into(),
            "encoder".into(),
            "metadata".into(),
            "head".into(),
            "dataset".into(),
            "seed".into(),
            "accuracy".into(),
            "correct".into(),
            "total".into(),
            "best".into(),
            "wall_clock_s".into(),
        ];
        header.extend(REFERENCE_DATASETS.iter().map(|d| format!("reference_{d}")));
        w.write_record(&header).map_err(csv_error)?;
        for r in &self.rows {
            let m = &r.method;
            let mut rec = vec![
                m.id.to_string(),
                m.name.to_string(),
                enum_name(&m.encoder),
                enum_name(&m.metadata),
                enum_name(&m.head),
                r.dataset.clone(),
                r.seed.to_string(),
                r.accuracy.to_string(),
                r.evaluation.correct.to_string(),
                r.evaluation.total.to_string(),
                self.is_best(r).to_string(),
                format!("{:.3}", r.wall_clock_secs),
            ];
            let refs = reference_accuracy(m.id);
            rec.extend((0..REFERENCE_DATASETS.len()).map(|k| refs.map_or(String::new(), |v| v[k].to_string())));
            w.write_record(&rec).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }

    /// Aligned table: measured accuracy (best marked `*`) next to the
    /// reference accuracies.
    pub fn to_text(&self) -> String {
        let mut header = vec!["Method#".to_string(), "Name".into(), self.dataset.clone()];
        header.extend(REFERENCE_DATASETS.iter().map(|d| format!("ref:{d}")));
        let mut lines = vec![header];
        for r in &self.rows {
            let flag = if self.is_best(r) { "*" } else { "" };
            let mut line = vec![
                r.method.id.to_string(),
                r.method.name.to_string(),
                format!("{:.4}{flag}", r.accuracy),
            ];
            let refs = reference_accuracy(r.method.id);
            line.extend((0..REFERENCE_DATASETS.len()).map(|k| refs.map_or("-".into(), |v| format!("{:.2}", v[k]))));
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let rule: String = widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("+");
        for (i, line) in lines.iter().enumerate() {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, w))| {
                    if c == 1 {
                        format!(" {cell:<w$} ")
                    } else {
                        format!(" {cell:>w$} ")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("|"));
            if i == 0 {
                let _ = writeln!(out, "{rule}");
            }
        }
        let _ = writeln!(
            out,
            "seed {}; * marks the best measured accuracy; ref columns are context only",
            self.seed
        );
        out
    }

    /// Writes the CSV to `path` and the aligned table next to it with a
    /// `.txt` extension. Returns the text path.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<PathBuf> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::io(path, e))?;
        let text_path = path.with_extension("txt");
        std::fs::write(&text_path, self.to_text()).map_err(|e| Error::io(&text_path, e))?;
        Ok(text_path)
    }
}

fn enum_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}
