//! Metrics, the training-fraction × budget experiment grid, and reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bilstm::{self, Combine, ModelShape, SparseSequence};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeaturePipeline};
use crate::fmt::sig;
use crate::ingest::{self, LabeledExample};
use crate::optim::{Method, PLConfig};
use crate::rng;
use crate::scalar::Scalar;

pub const DEFAULT_FRACTIONS: [f64; 6] = [0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
pub const DEFAULT_BUDGETS: [usize; 5] = [10, 15, 20, 25, 30];
/// Optimizer iterations per budget level.
pub const DEFAULT_BUDGET_SCALE: usize = 10;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

pub const METRIC_NAMES: [&str; 4] = ["precision", "recall", "f1", "mse"];
pub const CSV_HEADER: &str = "dataset,method,train_fraction,budget,seed,metric,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Tallies predictions; a score equal to the threshold counts as positive.
pub fn confusion<T: Scalar>(scores: &[T], labels: &[u8], threshold: T) -> Result<ConfusionCounts> {
    if scores.len() != labels.len() {
        return Err(Error::domain(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::domain("no scores to tally"));
    }
    let mut c = ConfusionCounts::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub mse: T,
}

impl<T: Scalar> MetricReport<T> {
    pub fn get(&self, metric: &str) -> Option<T> {
        match metric {
            "precision" => Some(self.precision),
            "recall" => Some(self.recall),
            "f1" => Some(self.f1),
            "mse" => Some(self.mse),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> MetricReport<f64> {
        MetricReport {
            precision: self.precision.as_f64(),
            recall: self.recall.as_f64(),
            f1: self.f1.as_f64(),
            mse: self.mse.as_f64(),
        }
    }
}

/// Precision `tp/(tp+fp)`, recall `tp/(tp+fn)`, F1 `2tp/(2tp+fp+fn)`, and
/// the mean squared error of the raw scores. Empty denominators give 0.
pub fn metrics<T: Scalar>(
    counts: &ConfusionCounts,
    scores: &[T],
    labels: &[u8],
) -> MetricReport<T> {
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            T::zero()
        } else {
            T::lit(num as f64) / T::lit(den as f64)
        }
    };
    let mse = if scores.is_empty() {
        T::zero()
    } else {
        let total = scores.iter().zip(labels).fold(T::zero(), |acc, (&s, &l)| {
            let e = s - T::lit(f64::from(l));
            acc + e * e
        });
        total / T::lit(scores.len() as f64)
    };
    MetricReport {
        precision: ratio(counts.tp, counts.tp + counts.fp),
        recall: ratio(counts.tp, counts.tp + counts.fn_),
        f1: ratio(2 * counts.tp, 2 * counts.tp + counts.fp + counts.fn_),
        mse,
    }
}

/// Scores every test example with the majority class of the training labels.
pub fn majority_class_report(train_labels: &[u8], test_labels: &[u8]) -> Result<MetricReport<f64>> {
    let positives = train_labels.iter().filter(|&&l| l == 1).count();
    let score = if 2 * positives >= train_labels.len() {
        1.0
    } else {
        0.0
    };
    let scores = vec![score; test_labels.len()];
    let counts = confusion(&scores, test_labels, DEFAULT_THRESHOLD)?;
    Ok(metrics(&counts, &scores, test_labels))
}

/// One cell of the experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub dataset_id: String,
    pub method: String,
    pub train_fraction: f64,
    /// Budget level; the optimizer ran `budget × budget_scale` iterations.
    pub budget: usize,
    pub seed: u64,
    pub metrics: Option<MetricReport<f64>>,
    pub error: Option<String>,
    pub wall_time_seconds: f64,
}

impl RunRecord {
    fn grid_key(&self) -> (String, u64, usize, u64) {
        (
            self.dataset_id.clone(),
            self.train_fraction.to_bits(),
            self.budget,
            self.seed,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub fractions: Vec<f64>,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            fractions: DEFAULT_FRACTIONS.to_vec(),
            budgets: DEFAULT_BUDGETS.to_vec(),
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig<T> {
    pub dataset_id: String,
    pub method: Method,
    pub features: FeatureConfig,
    pub steps: usize,
    pub hidden: usize,
    pub combine: Combine,
    pub bound: T,
    /// Population size and rates; bounds, iteration count and seed are set
    /// per run.
    pub optimizer: PLConfig<T>,
    pub budget_scale: usize,
    pub threshold: T,
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn new(dataset_id: impl Into<String>, method: Method) -> Self {
        Self {
            dataset_id: dataset_id.into(),
            method,
            features: FeatureConfig::default(),
            steps: bilstm::DEFAULT_STEPS,
            hidden: bilstm::DEFAULT_HIDDEN,
            combine: Combine::Concat,
            bound: T::lit(bilstm::DEFAULT_PARAM_BOUND),
            optimizer: PLConfig::new(
                30,
                1,
                crate::optim::Bounds::uniform(1, -T::one(), T::one()),
                0,
            ),
            budget_scale: DEFAULT_BUDGET_SCALE,
            threshold: T::lit(DEFAULT_THRESHOLD),
        }
    }
}

/// Split and featurization seed for one `(seed, fraction)` grid column. Shared
/// by every budget level and method so they all see the same data.
pub fn split_seed(seed: u64, fraction: f64) -> u64 {
    rng::derive_many(seed, &[fraction.to_bits()])
}

/// Optimizer seed for one grid cell.
pub fn run_seed(seed: u64, fraction: f64, budget: usize, run_index: usize) -> u64 {
    rng::derive_many(seed, &[fraction.to_bits(), budget as u64, run_index as u64])
}

/// A featurized train/test split, ready for training.
pub struct PreparedSplit<T> {
    pub train: Vec<(crate::tfidf::FeatureVector<T>, u8)>,
    pub test: Vec<(crate::tfidf::FeatureVector<T>, u8)>,
    pub shape: ModelShape,
}

/// Splits, fits features on the training part only, and featurizes both parts.
pub fn prepare_split<T: Scalar>(
    examples: &[LabeledExample],
    fraction: f64,
    seed: u64,
    config: &ExperimentConfig<T>,
) -> Result<PreparedSplit<T>> {
    let split = ingest::split(examples, fraction, seed)?;
    if split.test.is_empty() {
        return Err(Error::domain(format!(
            "fraction {fraction} leaves no test examples"
        )));
    }
    let pipeline = FeaturePipeline::<T>::fit(&split.train, &config.features, seed)?;
    let shape = ModelShape::for_features(pipeline.dimension(), config.steps, config.hidden)?;
    Ok(PreparedSplit {
        train: pipeline.transform_all(&split.train)?,
        test: pipeline.transform_all(&split.test)?,
        shape,
    })
}

/// Trains at `max_iter` iterations and scores the test part.
pub fn train_and_score<T: Scalar>(
    prepared: &PreparedSplit<T>,
    config: &ExperimentConfig<T>,
    max_iter: usize,
    seed: u64,
) -> Result<MetricReport<T>> {
    let opt = PLConfig {
        max_iter,
        seed,
        ..config.optimizer.clone()
    };
    let (model, _) = bilstm::train(
        &prepared.train,
        prepared.shape,
        config.combine,
        &opt,
        config.bound,
        config.method,
    )?;
    let scores = prepared
        .test
        .iter()
        .map(|(f, _)| bilstm::predict_sparse(&model, &SparseSequence::new(f, &prepared.shape)?))
        .collect::<Result<Vec<T>>>()?;
    let labels: Vec<u8> = prepared.test.iter().map(|&(_, l)| l).collect();
    let counts = confusion(&scores, &labels, config.threshold)?;
    Ok(metrics(&counts, &scores, &labels))
}

/// One run per (fraction × budget × seed). Failures are recorded in the
/// affected records and do not stop the other runs.
pub fn run_experiment<T: Scalar>(
    examples: &[LabeledExample],
    grid: &ExperimentGrid,
    config: &ExperimentConfig<T>,
) -> Result<Vec<RunRecord>> {
    if examples.is_empty() {
        return Err(Error::domain("experiment needs examples"));
    }
    let columns: Vec<(usize, f64, u64)> = grid
        .seeds
        .iter()
        .flat_map(|&s| grid.fractions.iter().map(move |&f| (s, f)))
        .enumerate()
        .map(|(i, (s, f))| (i, f, s))
        .collect();
    let records: Vec<Vec<RunRecord>> = columns
        .par_iter()
        .map(|&(column, fraction, seed)| {
            let started = Instant::now();
            let prepared = prepare_split(examples, fraction, split_seed(seed, fraction), config);
            let prep_time = started.elapsed().as_secs_f64();
            grid.budgets
                .iter()
                .enumerate()
                .map(|(b, &budget)| {
                    let started = Instant::now();
                    let run_index = column * grid.budgets.len() + b;
                    let outcome = prepared.as_ref().map_err(|e| e.to_string()).and_then(|p| {
                        train_and_score(
                            p,
                            config,
                            budget * config.budget_scale,
                            run_seed(seed, fraction, budget, run_index),
                        )
                        .map_err(|e| e.to_string())
                    });
                    RunRecord {
                        dataset_id: config.dataset_id.clone(),
                        method: config.method.name().to_owned(),
                        train_fraction: fraction,
                        budget,
                        seed,
                        metrics: outcome.as_ref().ok().map(MetricReport::to_f64),
                        error: outcome.err(),
                        wall_time_seconds: prep_time + started.elapsed().as_secs_f64(),
                    }
                })
                .collect()
        })
        .collect();
    Ok(records.into_iter().flatten().collect())
}

/// Best-over-grid metrics of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub method: String,
    pub best: MetricReport<f64>,
}

/// Published values for the proposed method on dataset 1, in percent.
/// Shown for context only; they are not reproduced here.
pub const REFERENCE_LABEL: &str = "paper-reported, not reproduced";
pub const REFERENCE_PERCENT: MetricReport<f64> = MetricReport {
    precision: 93.52,
    recall: 92.54,
    f1: 90.72,
    mse: 1.22,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
}

impl CompareTable {
    /// Metric rows × method columns, values in percent with two decimals,
    /// followed by the reference column.
    pub fn to_text(&self) -> String {
        let mut header = vec!["metric".to_owned()];
        header.extend(self.rows.iter().map(|r| r.method.clone()));
        header.push(REFERENCE_LABEL.to_owned());
        let mut lines = vec![header.join("\t")];
        for metric in METRIC_NAMES {
            let mut cells = vec![metric.to_owned()];
            cells.extend(
                self.rows
                    .iter()
                    .map(|r| format!("{:.2}", 100.0 * r.best.get(metric).unwrap_or(f64::NAN))),
            );
            cells.push(format!(
                "{:.2}",
                REFERENCE_PERCENT.get(metric).unwrap_or(f64::NAN)
            ));
            lines.push(cells.join("\t"));
        }
        lines.join("\n") + "\n"
    }
}

/// Per method, the best value of each metric over its grid (max for
/// precision, recall and F1; min for MSE). Every method must cover the same
/// grid cells.
pub fn compare_table(records_by_method: &BTreeMap<String, Vec<RunRecord>>) -> Result<CompareTable> {
    let mut grid: Option<BTreeSet<(String, u64, usize, u64)>> = None;
    let mut rows = Vec::new();
    for (method, records) in records_by_method {
        let keys: BTreeSet<_> = records.iter().map(RunRecord::grid_key).collect();
        match &grid {
            None => grid = Some(keys),
            Some(g) if *g != keys => {
                return Err(Error::domain(format!(
                    "method {method} covers a different grid"
                )))
            }
            Some(_) => {}
        }
        let ok: Vec<&MetricReport<f64>> =
            records.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let best_of = |pick: fn(&MetricReport<f64>) -> f64, larger: bool| {
            ok.iter().map(|m| pick(m)).fold(f64::NAN, |acc, v| {
                if acc.is_nan() || (larger && v > acc) || (!larger && v < acc) {
                    v
                } else {
                    acc
                }
            })
        };
        rows.push(CompareRow {
            method: method.clone(),
            best: MetricReport {
                precision: best_of(|m| m.precision, true),
                recall: best_of(|m| m.recall, true),
                f1: best_of(|m| m.f1, true),
                mse: best_of(|m| m.mse, false),
            },
        });
    }
    Ok(CompareTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// One long-format report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: String,
    pub train_fraction: f64,
    pub budget: usize,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

impl ReportRow {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            csv_field(&self.dataset),
            csv_field(&self.method),
            self.train_fraction,
            self.budget,
            self.seed,
            self.metric,
            self.value
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Long-format rows for every successful record, sorted by their CSV text.
pub fn report_rows(records: &[RunRecord]) -> Vec<ReportRow> {
    let mut rows: Vec<(String, ReportRow)> = records
        .iter()
        .filter_map(|r| r.metrics.as_ref().map(|m| (r, m)))
        .flat_map(|(r, m)| {
            METRIC_NAMES.iter().map(move |&metric| ReportRow {
                dataset: r.dataset_id.clone(),
                method: r.method.clone(),
                train_fraction: r.train_fraction,
                budget: r.budget,
                seed: r.seed,
                metric: metric.to_owned(),
                value: m.get(metric).expect("known metric"),
            })
        })
        .map(|row| (row.to_csv(), row))
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    rows.into_iter().map(|(_, row)| row).collect()
}

/// Writes `report.csv` (exact values) and/or `report.json` (values with 6
/// significant digits) into `directory`, creating it if needed.
pub fn emit_report(
    records: &[RunRecord],
    directory: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::domain("no records to report"));
    }
    fs::create_dir_all(directory)?;
    let rows = report_rows(records);
    let mut paths = Vec::new();
    for format in formats {
        let path = match format {
            ReportFormat::Csv => {
                let path = directory.join("report.csv");
                let mut out = std::io::BufWriter::new(fs::File::create(&path)?);
                writeln!(out, "{CSV_HEADER}")?;
                for row in &rows {
                    writeln!(out, "{}", row.to_csv())?;
                }
                out.flush()?;
                path
            }
            ReportFormat::Json => {
                let path = directory.join("report.json");
                let rounded: Vec<ReportRow> = rows
                    .iter()
                    .map(|r| ReportRow {
                        value: sig(r.value, 6).parse().unwrap_or(f64::NAN),
                        ..r.clone()
                    })
                    .collect();
                let text = serde_json::to_string_pretty(&rounded)
                    .map_err(|e| Error::Internal(e.to_string()))?;
                fs::write(&path, text + "\n")?;
                path
            }
        };
        paths.push(path);
    }
    Ok(paths)
}

/// Parses a long-format CSV written by [`emit_report`].
pub fn read_report_csv<R: BufRead>(input: R) -> Result<Vec<ReportRow>> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header != CSV_HEADER {
        return Err(Error::parse(format!("unexpected report header {header:?}")));
    }
    lines
        .map(|line| {
            let line = line?;
            let cols = split_csv_line(&line);
            let [dataset, method, fraction, budget, seed, metric, value] =
                <[String; 7]>::try_from(cols).map_err(|_| {
                    Error::parse(format!("report row {line:?} does not have 7 fields"))
                })?;
            let bad = |what: &str| Error::parse(format!("bad {what} in {line:?}"));
            Ok(ReportRow {
                dataset,
                method,
                train_fraction: fraction.parse().map_err(|_| bad("train_fraction"))?,
                budget: budget.parse().map_err(|_| bad("budget"))?,
                seed: seed.parse().map_err(|_| bad("seed"))?,
                metric,
                value: value.parse().map_err(|_| bad("value"))?,
            })
        })
        .collect()
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                current.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => fields.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    fields.push(current);
    fields
}
