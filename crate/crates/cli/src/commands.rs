use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::anyhow;

use semdensity::eval::report::{
    ablation_csv, evaluate, group_by_config, parse_metric_table, per_group_csv, sweep_csv, ttest_all_pairs, ttest_csv,
    EvalTable, MetricTable,
};
use semdensity::eval::studies::{ablation_curve, per_group_auroc, rouge_threshold_sweep};
use semdensity::pipeline::{parse_corpus, render_scores, score_parsed, split_lines};
use semdensity::{Execution, GenerationRecord, Metric, ScoreSet};

use crate::config::RunConfig;

/// Failure that ends a run, mapped to the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Invalid input or arguments (exit 1).
    Validation(anyhow::Error),
    /// Reading or writing files failed (exit 2).
    Io(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Io(_) => 2,
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Validation(e) | Failure::Io(e) => format!("{e:#}"),
        }
    }
}

fn io_err(path: &Path, what: &str, e: io::Error) -> Failure {
    Failure::Io(anyhow!("{what} {}: {e}", path.display()))
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| io_err(path, "reading", e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_err(path, "writing", e))
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = cfg
        .output
        .clone()
        .ok_or_else(|| Failure::Validation(anyhow!("--output <DIR> is required")))?;
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, "creating", e))?;
    Ok(dir)
}

fn output_file(cfg: &RunConfig) -> Result<PathBuf, Failure> {
    cfg.output
        .clone()
        .ok_or_else(|| Failure::Validation(anyhow!("--output <FILE> is required")))
}

/// Exit status of a run that completed; 1 when lines were skipped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Status {
    pub skipped: usize,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        u8::from(self.skipped > 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InputKind {
    Records,
    Scores,
}

fn detect_kind(bytes: &[u8]) -> InputKind {
    let Some((_, first)) = split_lines(bytes).into_iter().next() else {
        return InputKind::Records;
    };
    match serde_json::from_slice::<serde_json::Value>(first) {
        Ok(serde_json::Value::Object(map)) if !map.contains_key("responses") && map.contains_key("response_index") => {
            InputKind::Scores
        }
        _ => InputKind::Records,
    }
}

/// Everything read from the inputs of one run.
#[derive(Debug, Default)]
struct Gathered {
    records: Vec<GenerationRecord>,
    scores: Vec<ScoreSet>,
    /// Serialized score lines in input order, for `score` and `report`.
    rendered: Vec<String>,
    skipped: usize,
    from_scores: bool,
}

impl Gathered {
    fn status(&self) -> Status {
        Status { skipped: self.skipped }
    }
}

fn report_line_error(cfg: &RunConfig, path: &Path, err: &dyn std::fmt::Display) -> Result<(), Failure> {
    let msg = format!("{}: {err}", path.display());
    if cfg.keep_going {
        eprintln!("skipping {msg}");
        Ok(())
    } else {
        Err(Failure::Validation(anyhow!(msg)))
    }
}

fn gather(cfg: &RunConfig, exec: Execution, keep_rendered: bool) -> Result<Gathered, Failure> {
    let score_cfg = cfg.score_config();
    let mut out = Gathered::default();
    for path in &cfg.inputs {
        let bytes = read_input(path)?;
        match detect_kind(&bytes) {
            InputKind::Scores => {
                out.from_scores = true;
                for (line, text) in split_lines(&bytes) {
                    match serde_json::from_slice::<ScoreSet>(text) {
                        Ok(s) => out.scores.push(s),
                        Err(e) => {
                            report_line_error(cfg, path, &format_args!("line {line}: malformed score line: {e}"))?;
                            out.skipped += 1;
                        }
                    }
                }
            }
            InputKind::Records => {
                let parsed = parse_corpus(&bytes, exec);
                let outcomes = score_parsed(&parsed, &score_cfg, exec);
                let rendered = if keep_rendered {
                    render_scores(&outcomes, exec)
                } else {
                    vec![None; outcomes.len()]
                };
                for (((_, parsed), outcome), text) in parsed.into_iter().zip(outcomes).zip(rendered) {
                    match outcome.result {
                        Ok(scores) => {
                            out.records.push(parsed.expect("scored lines parsed"));
                            out.scores.extend(scores);
                            out.rendered.extend(text);
                        }
                        Err(e) => {
                            report_line_error(cfg, path, &e)?;
                            out.skipped += 1;
                        }
                    }
                }
            }
        }
    }
    eprintln!(
        "{} records, {} responses, {} skipped",
        out.records.len(),
        out.scores.len(),
        out.skipped
    );
    Ok(out)
}

fn eval_metrics(cfg: &RunConfig, scores: &[ScoreSet]) -> Vec<Metric> {
    cfg.metrics.clone().unwrap_or_else(|| {
        let mut m = Metric::DEFAULT.to_vec();
        if scores.iter().any(|s| s.p_true.is_some()) {
            m.push(Metric::PTrue);
        }
        m
    })
}

pub fn score(cfg: &RunConfig, exec: Execution) -> Result<Status, Failure> {
    let gathered = gather(cfg, exec, true)?;
    if gathered.from_scores {
        return Err(Failure::Validation(anyhow!(
            "`score` expects generation records, got score lines"
        )));
    }
    let write = |w: &mut dyn Write| -> io::Result<()> {
        for chunk in &gathered.rendered {
            w.write_all(chunk.as_bytes())?;
        }
        w.flush()
    };
    match &cfg.output {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| io_err(path, "creating", e))?;
            write(&mut BufWriter::new(file)).map_err(|e| io_err(path, "writing", e))?;
        }
        None => {
            let stdout = io::stdout();
            write(&mut BufWriter::new(stdout.lock())).map_err(|e| io_err(Path::new("<stdout>"), "writing", e))?;
        }
    }
    Ok(gathered.status())
}

fn write_eval_files(dir: &Path, table: &EvalTable, scores: &[ScoreSet]) -> Result<(), Failure> {
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    write_file(&dir.join("auroc.csv"), &table.auroc_csv())?;
    write_file(&dir.join("auroc.md"), &table.auroc_markdown())?;
    write_file(&dir.join("aupr.csv"), &table.aupr_csv())?;
    write_file(&dir.join("aupr.md"), &table.aupr_markdown())?;

    let groups: Vec<_> = group_by_config(scores)
        .into_iter()
        .map(|(key, members)| {
            let breakdowns: Vec<_> = table
                .metrics
                .iter()
                .map(|&m| per_group_auroc(&members, m, table.threshold))
                .collect();
            let skipped: usize = breakdowns.iter().map(|b| b.skipped).sum();
            if skipped > 0 {
                eprintln!(
                    "warning: {}/{}: {skipped} beam-group cells skipped (single class)",
                    key.1, key.0
                );
            }
            (key, breakdowns)
        })
        .collect();
    write_file(
        &dir.join("per_group_auroc.csv"),
        &per_group_csv(&table.metrics, &groups),
    )
}

pub fn eval(cfg: &RunConfig, exec: Execution) -> Result<Status, Failure> {
    let dir = output_dir(cfg)?;
    let gathered = gather(cfg, exec, false)?;
    let metrics = eval_metrics(cfg, &gathered.scores);
    let table = evaluate(&gathered.scores, &metrics, cfg.rouge_threshold);
    write_eval_files(&dir, &table, &gathered.scores)?;
    Ok(gathered.status())
}

fn ablation_text(cfg: &RunConfig, exec: Execution, records: &[GenerationRecord]) -> Result<String, Failure> {
    let score_cfg = cfg.score_config();
    let mut by_config: std::collections::BTreeMap<(String, String), Vec<GenerationRecord>> = Default::default();
    for r in records {
        by_config
            .entry((r.dataset.clone(), r.model.clone()))
            .or_default()
            .push(r.clone());
    }
    let mut curves = Vec::new();
    for ((dataset, model), recs) in by_config {
        let points = ablation_curve(&recs, cfg.max_refs, &score_cfg, exec)
            .map_err(|e| Failure::Validation(anyhow!("{dataset}/{model}: {e}")))?;
        let skipped: usize = points.iter().map(|p| p.records_skipped).sum();
        if skipped > 0 {
            eprintln!("warning: {dataset}/{model}: {skipped} (record, k) cells skipped for lack of references");
        }
        curves.push(((model, dataset), points));
    }
    Ok(ablation_csv(&curves))
}

pub fn ablate(cfg: &RunConfig, exec: Execution) -> Result<Status, Failure> {
    let path = output_file(cfg)?;
    let gathered = gather(cfg, exec, false)?;
    if gathered.from_scores {
        return Err(Failure::Validation(anyhow!(
            "`ablate` needs generation records, got score lines"
        )));
    }
    write_file(&path, &ablation_text(cfg, exec, &gathered.records)?)?;
    Ok(gathered.status())
}

fn sweep_text(cfg: &RunConfig, scores: &[ScoreSet]) -> String {
    let metrics = eval_metrics(cfg, scores);
    let with_rouge: Vec<ScoreSet> = scores.iter().filter(|s| s.rouge_l.is_some()).cloned().collect();
    if with_rouge.len() < scores.len() {
        eprintln!(
            "warning: {} score lines without rouge_l left out of the sweep",
            scores.len() - with_rouge.len()
        );
    }
    let curves: Vec<_> = group_by_config(&with_rouge)
        .into_iter()
        .map(|(key, members)| (key, rouge_threshold_sweep(&members, &cfg.thresholds, &metrics)))
        .collect();
    sweep_csv(&metrics, &curves)
}

pub fn sweep(cfg: &RunConfig, exec: Execution) -> Result<Status, Failure> {
    let path = output_file(cfg)?;
    let gathered = gather(cfg, exec, false)?;
    write_file(&path, &sweep_text(cfg, &gathered.scores))?;
    Ok(gathered.status())
}

fn restrict(table: MetricTable, metrics: &Option<Vec<Metric>>) -> MetricTable {
    let Some(metrics) = metrics else { return table };
    let keep: Vec<usize> = metrics
        .iter()
        .filter_map(|m| table.metrics.iter().position(|name| name == m.label()))
        .collect();
    MetricTable {
        metrics: keep.iter().map(|&i| table.metrics[i].clone()).collect(),
        values: keep.iter().map(|&i| table.values[i].clone()).collect(),
    }
}

pub fn ttest(cfg: &RunConfig) -> Result<Status, Failure> {
    let path = output_file(cfg)?;
    let mut rows = Vec::new();
    for input in &cfg.inputs {
        let bytes = read_input(input)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| Failure::Validation(anyhow!("{}: not valid UTF-8", input.display())))?;
        let table = parse_metric_table(&text).map_err(|e| Failure::Validation(anyhow!("{}: {e}", input.display())))?;
        rows.extend(ttest_all_pairs(&restrict(table, &cfg.metrics)));
    }
    for r in &rows {
        if let Err(e) = &r.result {
            eprintln!("warning: {} vs {}: {e}", r.metric_a, r.metric_b);
        }
    }
    write_file(&path, &ttest_csv(&rows))?;
    Ok(Status::default())
}

/// Scores, evaluation tables, ablation, sweep and t-tests in one directory.
pub fn report(cfg: &RunConfig, exec: Execution) -> Result<Status, Failure> {
    let dir = output_dir(cfg)?;
    let gathered = gather(cfg, exec, true)?;
    if gathered.from_scores {
        return Err(Failure::Validation(anyhow!(
            "`report` needs generation records, got score lines"
        )));
    }
    write_file(&dir.join("scores.jsonl"), &gathered.rendered.concat())?;
    let metrics = eval_metrics(cfg, &gathered.scores);
    let table = evaluate(&gathered.scores, &metrics, cfg.rouge_threshold);
    write_eval_files(&dir, &table, &gathered.scores)?;
    write_file(&dir.join("ablation.csv"), &ablation_text(cfg, exec, &gathered.records)?)?;
    write_file(&dir.join("sweep.csv"), &sweep_text(cfg, &gathered.scores))?;
    write_file(
        &dir.join("ttest.csv"),
        &ttest_csv(&ttest_all_pairs(&table.to_metric_table())),
    )?;
    Ok(gathered.status())
}
