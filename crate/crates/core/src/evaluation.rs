//! Run metrics (development time, accuracy, survey means), the regularized
//! cross-entropy utility, and benchmark report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{LossInput, Mode, ModelError, PipelineRun, RunStatus, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("run {0} has not finished")]
    UnfinishedRun(String),
    #[error(transparent)]
    InvariantViolation(#[from] ModelError),
    #[error("survey row {row}: score {score} outside 1..=5")]
    OutOfRangeScore { row: usize, score: i64 },
    #[error("survey file: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Elapsed monotonic time of a finished run, in minutes.
pub fn development_time(run: &PipelineRun) -> Result<f64, EvalError> {
    let finished = run
        .finished_at_ms
        .ok_or_else(|| EvalError::UnfinishedRun(run.run_id.clone()))?;
    Ok(finished.saturating_sub(run.started_at_ms) as f64 / 60_000.0)
}

/// Percentage of applicable checks that passed across `reports`; `None`
/// when no checks were run.
pub fn accuracy_of(reports: &[ValidationReport]) -> Option<f64> {
    let (passed, total) = reports
        .iter()
        .flat_map(|r| &r.results)
        .fold((0usize, 0usize), |(p, t), r| (p + r.passed as usize, t + 1));
    (total > 0).then(|| 100.0 * passed as f64 / total as f64)
}

pub fn accuracy(run: &PipelineRun) -> Option<f64> {
    accuracy_of(&run.reports)
}

/// Mean negative log-likelihood of the labelled outputs plus
/// `lambda * theta_sq_norm`.
pub fn regularized_cross_entropy(input: &LossInput) -> Result<f64, EvalError> {
    input.validate()?;
    let n = input.probs.len() as f64;
    let mut nll = 0.0;
    for (p_row, y_row) in input.probs.iter().zip(&input.labels) {
        for (p, y) in p_row.iter().zip(y_row) {
            if *y != 0.0 {
                nll -= y * p.ln();
            }
        }
    }
    Ok(nll / n + input.lambda * input.theta_sq_norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Readability,
    Usability,
    Satisfaction,
}

impl Criterion {
    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Readability => "readability",
            Criterion::Usability => "usability",
            Criterion::Satisfaction => "satisfaction",
        }
    }
}

/// One survey answer. `score` is kept wide so out-of-range values can be
/// reported rather than rejected at parse time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub respondent_id: String,
    pub task_name: String,
    pub criterion: Criterion,
    pub score: i64,
}

pub type SurveyMeans = BTreeMap<(String, Criterion), f64>;

/// Reads `respondent_id,task_name,criterion,score` CSV.
pub fn read_survey<R: Read>(reader: R) -> Result<Vec<SurveyRecord>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    Ok(rdr.deserialize().collect::<Result<Vec<SurveyRecord>, _>>()?)
}

pub fn read_survey_file(path: &Path) -> Result<Vec<SurveyRecord>, EvalError> {
    read_survey(std::fs::File::open(path)?)
}

pub fn ingest_survey(rows: &[SurveyRecord]) -> Result<SurveyMeans, EvalError> {
    let mut sums: BTreeMap<(String, Criterion), (i64, usize)> = BTreeMap::new();
    for (row, rec) in rows.iter().enumerate() {
        if !(1..=5).contains(&rec.score) {
            return Err(EvalError::OutOfRangeScore { row, score: rec.score });
        }
        let slot = sums.entry((rec.task_name.clone(), rec.criterion)).or_default();
        slot.0 += rec.score;
        slot.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(k, (sum, n))| (k, sum as f64 / n as f64))
        .collect())
}

/// One row of the benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub task_name: String,
    pub pipeline: Mode,
    pub dev_time_min: f64,
    pub accuracy_pct: Option<f64>,
    pub run_id: String,
    pub status: RunStatus,
}

impl BenchRow {
    pub fn from_run(run: &PipelineRun) -> Result<BenchRow, EvalError> {
        Ok(BenchRow {
            task_name: run.spec.title.clone(),
            pipeline: run.spec.mode,
            dev_time_min: development_time(run)?,
            accuracy_pct: accuracy(run),
            run_id: run.run_id.clone(),
            status: run.status,
        })
    }

    /// Row for a run that never produced a record.
    pub fn crashed(task_name: impl Into<String>, pipeline: Mode) -> BenchRow {
        BenchRow {
            task_name: task_name.into(),
            pipeline,
            dev_time_min: 0.0,
            accuracy_pct: None,
            run_id: String::new(),
            status: RunStatus::Failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SurveyMean {
    task_name: String,
    criterion: Criterion,
    mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReportDoc {
    rows: Vec<BenchRow>,
    survey: Option<Vec<SurveyMean>>,
}

/// Rendered report in text and JSON form.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub text: String,
    pub json: String,
}

impl BenchReport {
    /// Writes `report.txt` and `report.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), EvalError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), &self.text)?;
        std::fs::write(dir.join("report.json"), &self.json)?;
        Ok(())
    }
}

const COLUMNS: [&str; 5] = ["Task", "Pipeline", "DevTime(min)", "Accuracy(%)", "Status"];

fn table_line(cells: &[&str]) -> String {
    cells.join(" | ")
}

fn rule_line(cells: &[&str]) -> String {
    cells
        .iter()
        .map(|c| "-".repeat(c.len()))
        .collect::<Vec<_>>()
        .join("-+-")
}

pub fn format_accuracy(acc: Option<f64>) -> String {
    acc.map_or_else(|| "n/a".to_string(), |a| format!("{a:.1}"))
}

/// Renders rows sorted by task then pipeline, modular and monolithic rows of
/// a task adjacent, followed by survey means when given.
pub fn bench_report(rows: &[BenchRow], survey: Option<&SurveyMeans>) -> Result<BenchReport, EvalError> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| (&a.task_name, a.pipeline).cmp(&(&b.task_name, b.pipeline)));

    let mut text = String::new();
    text.push_str("Development time and accuracy by task\n\n");
    text.push_str(&table_line(&COLUMNS));
    text.push('\n');
    text.push_str(&rule_line(&COLUMNS));
    text.push('\n');
    for row in &sorted {
        let dev = format!("{:.2}", row.dev_time_min);
        let acc = format_accuracy(row.accuracy_pct);
        let status = row.status.to_string();
        text.push_str(&table_line(&[&row.task_name, row.pipeline.as_str(), &dev, &acc, &status]));
        text.push('\n');
    }

    let survey_rows = survey.map(|means| {
        means
            .iter()
            .map(|((task, criterion), mean)| SurveyMean {
                task_name: task.clone(),
                criterion: *criterion,
                mean: *mean,
            })
            .collect::<Vec<_>>()
    });
    if let Some(means) = &survey_rows {
        let cols = ["Task", "Criterion", "Mean"];
        text.push_str("\nSurvey means (scale 1-5)\n\n");
        text.push_str(&table_line(&cols));
        text.push('\n');
        text.push_str(&rule_line(&cols));
        text.push('\n');
        for m in means {
            let _ = writeln!(text, "{} | {} | {:.2}", m.task_name, m.criterion.as_str(), m.mean);
        }
    }

    let json = serde_json::to_string_pretty(&ReportDoc {
        rows: sorted,
        survey: survey_rows,
    })?;
    Ok(BenchReport { text, json })
}
