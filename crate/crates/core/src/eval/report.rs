use std::fmt::Write;
use std::str::FromStr;

use super::{Confusion, EvalError, EvalReport};
use crate::lexicon::StressLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

impl FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "text" => Ok(ReportFormat::Text),
            other => Err(EvalError::Format(other.to_string())),
        }
    }
}

fn table(out: &mut String, c: &Confusion) {
    let names = StressLevel::ALL.map(|s| s.display_name());
    let _ = writeln!(out, "{:<18}{:>18}{:>18}{:>18}", "real \\ pred", names[0], names[1], names[2]);
    for (name, row) in names.iter().zip(c) {
        let _ = writeln!(out, "{:<18}{:>18}{:>18}{:>18}", name, row[0], row[1], row[2]);
    }
}

/// Renders a report as pretty JSON or as aligned text tables.
pub fn render_report(report: &EvalReport, format: &str) -> Result<String, EvalError> {
    match format.parse::<ReportFormat>()? {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "words: {}  syllables: {}", report.n_words, report.n_syllables);
            let _ = writeln!(out, "accuracy: {:.4}", report.accuracy);
            if let Some(w) = report.weighted_accuracy {
                let _ = writeln!(out, "weighted accuracy: {w:.4}");
            }
            let _ = writeln!(out, "\nconfusion");
            table(&mut out, &report.confusion);
            if report.per_type_confusion.is_empty() {
                let _ = writeln!(out, "\nper-type confusion: none (no scored syllables)");
            }
            for (t, c) in &report.per_type_confusion {
                let _ = writeln!(out, "\nnucleus {t}");
                table(&mut out, c);
            }
            Ok(out)
        }
    }
}
