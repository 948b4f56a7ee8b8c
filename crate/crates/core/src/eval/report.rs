//! Report tables: one row per (dataset, model), one column per metric.
//! Rendered as CSV (full precision) and markdown (three decimals).

use std::collections::BTreeMap;

use thiserror::Error;

use super::studies::{metric_aupr, metric_auroc, AblationPoint, GroupBreakdown, SweepPoint};
use super::ttest::{paired_t_test_by_config, ConfigKey, PairedTTest};
use super::EvalError;
use crate::score::{Metric, ScoreSet};

/// Scores of one (dataset, model) configuration.
pub type ConfigScores<'a> = (ConfigKey, Vec<&'a ScoreSet>);

/// Groups scores by `(dataset, model)`; each group is sorted by
/// `(prompt_id, response_index)` so every fold over it is order-stable.
pub fn group_by_config(scores: &[ScoreSet]) -> Vec<ConfigScores<'_>> {
    let mut groups: BTreeMap<(String, String), Vec<&ScoreSet>> = BTreeMap::new();
    for s in scores {
        groups.entry((s.dataset.clone(), s.model.clone())).or_default().push(s);
    }
    groups
        .into_iter()
        .map(|((dataset, model), mut members)| {
            members.sort_by(|a, b| {
                (a.prompt_id.as_str(), a.response_index).cmp(&(b.prompt_id.as_str(), b.response_index))
            });
            ((model, dataset), members)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigRow {
    pub model: String,
    pub dataset: String,
    pub n: usize,
    pub n_correct: usize,
    /// Aligned with [`EvalTable::metrics`].
    pub auroc: Vec<Option<f64>>,
    pub aupr: Vec<Option<f64>>,
}

impl ConfigRow {
    pub fn key(&self) -> ConfigKey {
        (self.model.clone(), self.dataset.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalTable {
    pub metrics: Vec<Metric>,
    pub threshold: f64,
    pub rows: Vec<ConfigRow>,
    pub warnings: Vec<String>,
}

/// AUROC and AUPR-average of every metric for each configuration.
pub fn evaluate(scores: &[ScoreSet], metrics: &[Metric], threshold: f64) -> EvalTable {
    let mut warnings = Vec::new();
    let rows = group_by_config(scores)
        .into_iter()
        .map(|((model, dataset), members)| {
            let labels: Vec<bool> = members.iter().filter_map(|s| s.label_at(threshold)).collect();
            let mut cell = |m: Metric, r: Result<f64, EvalError>, what: &str| match r {
                Ok(v) => Some(v),
                Err(e) => {
                    warnings.push(format!("{dataset}/{model}: {what} for {m} is n/a: {e}"));
                    None
                }
            };
            let auroc = metrics
                .iter()
                .map(|&m| cell(m, metric_auroc(&members, m, threshold), "AUROC"))
                .collect();
            let aupr = metrics
                .iter()
                .map(|&m| cell(m, metric_aupr(&members, m, threshold), "AUPR"))
                .collect();
            ConfigRow {
                n: labels.len(),
                n_correct: labels.iter().filter(|&&c| c).count(),
                model,
                dataset,
                auroc,
                aupr,
            }
        })
        .collect();
    EvalTable {
        metrics: metrics.to_vec(),
        threshold,
        rows,
        warnings,
    }
}

pub fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v}"))
}

fn fmt_short(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
}

fn csv_string(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn markdown(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = format!("| {} |\n", header.join(" | "));
    out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
    for row in rows {
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}

impl EvalTable {
    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["dataset", "model", "n", "n_correct"].map(String::from).to_vec();
        h.extend(self.metrics.iter().map(|m| m.label().to_string()));
        h
    }

    fn rows_with(
        &self,
        pick: impl Fn(&ConfigRow) -> &[Option<f64>],
        fmt: fn(Option<f64>) -> String,
    ) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![
                    r.dataset.clone(),
                    r.model.clone(),
                    r.n.to_string(),
                    r.n_correct.to_string(),
                ];
                row.extend(pick(r).iter().map(|&v| fmt(v)));
                row
            })
            .collect()
    }

    pub fn auroc_csv(&self) -> String {
        csv_string(&self.header(), self.rows_with(|r| &r.auroc, fmt_value))
    }

    pub fn aupr_csv(&self) -> String {
        csv_string(&self.header(), self.rows_with(|r| &r.aupr, fmt_value))
    }

    pub fn auroc_markdown(&self) -> String {
        markdown(&self.header(), self.rows_with(|r| &r.auroc, fmt_short))
    }

    pub fn aupr_markdown(&self) -> String {
        markdown(&self.header(), self.rows_with(|r| &r.aupr, fmt_short))
    }

    /// AUROC of one metric keyed by (model, dataset), defined cells only.
    pub fn auroc_by_config(&self, metric: Metric) -> BTreeMap<ConfigKey, f64> {
        let Some(col) = self.metrics.iter().position(|&m| m == metric) else {
            return BTreeMap::new();
        };
        self.rows
            .iter()
            .filter_map(|r| r.auroc[col].map(|v| (r.key(), v)))
            .collect()
    }

    pub fn to_metric_table(&self) -> MetricTable {
        MetricTable {
            metrics: self.metrics.iter().map(|m| m.label().to_string()).collect(),
            values: self.metrics.iter().map(|&m| self.auroc_by_config(m)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("malformed table: {0}")]
    Csv(String),
    #[error("table is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("row {row}, column `{column}`: `{value}` is not a number")]
    BadValue { row: usize, column: String, value: String },
}

/// Per-metric values keyed by configuration, as read back from an AUROC table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricTable {
    pub metrics: Vec<String>,
    pub values: Vec<BTreeMap<ConfigKey, f64>>,
}

impl MetricTable {
    pub fn column(&self, metric: &str) -> Option<&BTreeMap<ConfigKey, f64>> {
        self.metrics.iter().position(|m| m == metric).map(|i| &self.values[i])
    }
}

/// Reads a table written by [`EvalTable::auroc_csv`]. Every column other than
/// `dataset`, `model`, `n`, `n_correct` is a metric; `n/a` cells are skipped.
pub fn parse_metric_table(text: &str) -> Result<MetricTable, ReportError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| ReportError::Csv(e.to_string()))?.clone();
    let find = |name: &'static str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or(ReportError::MissingColumn(name))
    };
    let (model_col, dataset_col) = (find("model")?, find("dataset")?);
    let metric_cols: Vec<usize> = (0..header.len())
        .filter(|&i| !["dataset", "model", "n", "n_correct"].contains(&&header[i]))
        .collect();
    let mut table = MetricTable {
        metrics: metric_cols.iter().map(|&i| header[i].to_string()).collect(),
        values: vec![BTreeMap::new(); metric_cols.len()],
    };
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ReportError::Csv(e.to_string()))?;
        let key = (rec[model_col].to_string(), rec[dataset_col].to_string());
        for (slot, &col) in metric_cols.iter().enumerate() {
            let cell = rec[col].trim();
            if cell == "n/a" || cell.is_empty() {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| ReportError::BadValue {
                row: row + 1,
                column: header[col].to_string(),
                value: cell.to_string(),
            })?;
            table.values[slot].insert(key.clone(), v);
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTestRow {
    pub metric_a: String,
    pub metric_b: String,
    pub result: Result<PairedTTest, EvalError>,
}

/// Paired t-tests for every unordered pair of metric columns.
pub fn ttest_all_pairs(table: &MetricTable) -> Vec<TTestRow> {
    let mut rows = Vec::new();
    for a in 0..table.metrics.len() {
        for b in (a + 1)..table.metrics.len() {
            rows.push(TTestRow {
                metric_a: table.metrics[a].clone(),
                metric_b: table.metrics[b].clone(),
                result: paired_t_test_by_config(&table.values[a], &table.values[b]),
            });
        }
    }
    rows
}

pub fn ttest_csv(rows: &[TTestRow]) -> String {
    let header = ["metric_a", "metric_b", "n", "mean_diff", "t", "df", "p", "note"].map(String::from);
    csv_string(
        &header,
        rows.iter().map(|r| {
            let mut row = vec![r.metric_a.clone(), r.metric_b.clone()];
            match &r.result {
                Ok(t) => row.extend([
                    t.n.to_string(),
                    format!("{}", t.mean_diff),
                    format!("{}", t.t),
                    format!("{}", t.df),
                    format!("{}", t.p),
                    String::new(),
                ]),
                Err(e) => {
                    row.extend(std::iter::repeat_n("n/a".to_string(), 5));
                    row.push(e.to_string());
                }
            }
            row
        }),
    )
}

pub fn ablation_csv(curves: &[(ConfigKey, Vec<AblationPoint>)]) -> String {
    let header = ["dataset", "model", "k", "SD", "n", "records", "skipped"].map(String::from);
    csv_string(
        &header,
        curves.iter().flat_map(|((model, dataset), points)| {
            points.iter().map(move |p| {
                vec![
                    dataset.clone(),
                    model.clone(),
                    p.k.to_string(),
                    fmt_value(p.auroc),
                    p.n.to_string(),
                    p.records_used.to_string(),
                    p.records_skipped.to_string(),
                ]
            })
        }),
    )
}

pub fn sweep_csv(metrics: &[Metric], curves: &[(ConfigKey, Vec<SweepPoint>)]) -> String {
    let mut header: Vec<String> = ["dataset", "model", "threshold"].map(String::from).to_vec();
    header.extend(metrics.iter().map(|m| m.label().to_string()));
    csv_string(
        &header,
        curves.iter().flat_map(|((model, dataset), points)| {
            points.iter().map(move |p| {
                let mut row = vec![dataset.clone(), model.clone(), format!("{}", p.threshold)];
                row.extend(p.auroc.iter().map(|&v| fmt_value(v)));
                row
            })
        }),
    )
}

/// One breakdown per metric for each configuration, aligned with `metrics`.
pub fn per_group_csv(metrics: &[Metric], groups: &[(ConfigKey, Vec<GroupBreakdown>)]) -> String {
    let mut header: Vec<String> = ["dataset", "model", "beam_group", "n", "n_correct"]
        .map(String::from)
        .to_vec();
    header.extend(metrics.iter().map(|m| m.label().to_string()));
    let mut rows = Vec::new();
    for ((model, dataset), breakdowns) in groups {
        let Some(first) = breakdowns.first() else { continue };
        for (gi, g) in first.groups.iter().enumerate() {
            let mut row = vec![
                dataset.clone(),
                model.clone(),
                g.beam_group.to_string(),
                g.n.to_string(),
                g.n_correct.to_string(),
            ];
            row.extend(
                breakdowns
                    .iter()
                    .map(|b| fmt_value(b.groups.get(gi).and_then(|g| g.auroc))),
            );
            rows.push(row);
        }
    }
    csv_string(&header, rows)
}
