//! Human-readable table document rendered from a results document. Pure
//! function of its input; rendering the same records is byte-identical.

use fedcyte_core::MetricsReport;

use crate::config::Paradigm;
use crate::run::{ExperimentRecord, NamedRun};

pub fn render_report(records: &[ExperimentRecord]) -> String {
    let mut out = String::new();
    out.push_str("fedcyte results\n===============\n\n");
    if records.is_empty() {
        out.push_str("(no experiments)\n");
        return out;
    }
    render_strategy_table(&mut out, records);
    render_paradigm_table(&mut out, records);
    render_f1_grid(
        &mut out,
        records,
        "Per-class F1 (combined test)",
        |run| Some(&run.run.combined_test),
        false,
    );
    render_f1_grid(
        &mut out,
        records,
        "Per-class F1 (holdout institution)",
        |run| run.run.holdout_test.as_ref(),
        true,
    );
    out
}

fn model_label(record: &ExperimentRecord) -> &'static str {
    match record.config.model.kind {
        fedcyte_core::ModelKind::SoftmaxRegression => "softmax",
        fedcyte_core::ModelKind::Mlp1h => "mlp1h",
    }
}

fn render_strategy_table(out: &mut String, records: &[ExperimentRecord]) {
    let rows: Vec<&ExperimentRecord> = records
        .iter()
        .filter(|r| r.config.paradigm == Paradigm::Federated)
        .collect();
    out.push_str("Aggregation strategies (combined test)\n");
    out.push_str("--------------------------------------\n");
    out.push_str(&format!(
        "{:<24} {:<10} {:<9} {:>9} {:>9}\n",
        "experiment", "strategy", "model", "bal.acc", "macro-F1"
    ));
    for r in rows {
        let m = &r.runs[0].run.combined_test;
        out.push_str(&format!(
            "{:<24} {:<10} {:<9} {:>9.4} {:>9.4}\n",
            r.id,
            r.config.strategy.name(),
            model_label(r),
            m.balanced_accuracy,
            m.macro_f1
        ));
    }
    out.push('\n');
}

fn render_paradigm_table(out: &mut String, records: &[ExperimentRecord]) {
    out.push_str("Training paradigms (combined test)\n");
    out.push_str("----------------------------------\n");
    out.push_str(&format!(
        "{:<28} {:<9} {:>9} {:>9}\n",
        "configuration", "model", "accuracy", "bal.acc"
    ));
    for r in records {
        for run in &r.runs {
            let m = &run.run.combined_test;
            out.push_str(&format!(
                "{:<28} {:<9} {:>9.4} {:>9.4}\n",
                run.name,
                model_label(r),
                m.accuracy,
                m.balanced_accuracy
            ));
        }
    }
    out.push('\n');
}

/// Grid of per-class F1 scores, one column per run. When `present_only` is
/// set, classes with zero support in every shown report are dropped (the
/// holdout institution lacks some classes).
fn render_f1_grid(
    out: &mut String,
    records: &[ExperimentRecord],
    title: &str,
    select: impl Fn(&NamedRun) -> Option<&MetricsReport>,
    present_only: bool,
) {
    let class_names = &records[0].class_names;
    let mut columns: Vec<(String, &MetricsReport)> = Vec::new();
    for r in records {
        for run in &r.runs {
            if let Some(m) = select(run) {
                columns.push((run.name.clone(), m));
            }
        }
    }
    out.push_str(title);
    out.push('\n');
    out.push_str(&"-".repeat(title.len()));
    out.push('\n');
    if columns.is_empty() {
        out.push_str("(no data)\n\n");
        return;
    }
    out.push_str(&format!("{:<24}", "class"));
    for (name, _) in &columns {
        out.push_str(&format!(" {:>20}", truncate(name, 20)));
    }
    out.push('\n');
    for (c, class) in class_names.iter().enumerate() {
        if present_only && columns.iter().all(|(_, m)| m.support.get(c).copied().unwrap_or(0) == 0) {
            continue;
        }
        out.push_str(&format!("{:<24}", truncate(class, 24)));
        for (_, m) in &columns {
            match m.support.get(c) {
                Some(&s) if s > 0 => out.push_str(&format!(" {:>20.2}", m.per_class_f1[c])),
                _ => out.push_str(&format!(" {:>20}", "-")),
            }
        }
        out.push('\n');
    }
    out.push('\n');
}

fn truncate(s: &str, max: usize) -> String {
    if s.len() <= max {
        s.to_string()
    } else {
        s.chars().take(max).collect()
    }
}
