//! JSON and CSV rendering. CSV numbers carry 17 significant digits.

use serde::Serialize;
use serde_json::Value;

use crate::commands::{CompareReport, DiagnoseReport, EvalReport, SweepReport};
use crate::config::Format;
use crate::error::{CliError, CliResult};

pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn json_cell(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map(num).unwrap_or_else(|| n.to_string()),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn to_json<T: Serialize>(report: &T) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| CliError::Numeric(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn csv_table(header: Vec<String>, rows: Vec<Vec<String>>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(&header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

const EVAL_DIAGNOSTICS: [&str; 7] = ["alpha", "alpha_tilde", "rho", "I1", "I2", "tail_bound", "clamped"];

pub fn render_eval(report: &EvalReport, format: Format) -> CliResult<String> {
    if format == Format::Json {
        return to_json(report);
    }
    let timing = report.records.iter().any(|r| r.runtime_ms.is_some());
    let mut header: Vec<String> = ["method", "value", "error"].map(String::from).to_vec();
    if timing {
        header.push("runtime_ms".into());
    }
    header.extend(EVAL_DIAGNOSTICS.map(String::from));
    let rows = report
        .records
        .iter()
        .map(|r| {
            let mut row = vec![r.method.to_string(), num(r.value), num(r.error)];
            if timing {
                row.push(r.runtime_ms.map(num).unwrap_or_default());
            }
            row.extend(EVAL_DIAGNOSTICS.iter().map(|k| r.diagnostics.get(*k).copied().map(num).unwrap_or_default()));
            row
        })
        .collect();
    csv_table(header, rows)
}

pub fn render_compare(report: &CompareReport, format: Format) -> CliResult<String> {
    if format == Format::Json {
        return to_json(report);
    }
    let header = ["method", "value", "error", "delta_vs_reference", "sigmas"].map(String::from).to_vec();
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.method.to_string(),
                num(r.value),
                num(r.error),
                num(r.delta_vs_reference),
                num(r.sigmas),
            ]
        })
        .collect();
    csv_table(header, rows)
}

pub fn render_diagnose(report: &DiagnoseReport, format: Format) -> CliResult<String> {
    if format == Format::Json {
        return to_json(report);
    }
    let header = ["x", "gap", "se", "normalized", "within_band"].map(String::from).to_vec();
    let rows = report
        .gaps
        .iter()
        .map(|g| vec![num(g.x), num(g.gap), num(g.se), num(g.normalized), g.within_band.to_string()])
        .collect();
    csv_table(header, rows)
}

pub fn render_sweep(report: &SweepReport, format: Format) -> CliResult<String> {
    if format == Format::Json {
        return to_json(report);
    }
    let mut header = report.parameters.clone();
    header.extend(["method", "value", "error"].map(String::from));
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let mut row: Vec<String> = r.point.iter().map(json_cell).collect();
            row.extend([r.method.to_string(), num(r.value), num(r.error)]);
            row
        })
        .collect();
    csv_table(header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_quotes_fields() {
        let t = csv_table(vec!["a".into()], vec![vec!["x,y".into()]]).unwrap();
        assert_eq!(t, "a\n\"x,y\"\n");
    }
}
