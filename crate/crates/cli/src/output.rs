//! CSV and JSON artifacts.
//!
//! Floats are written in scientific notation with 17 significant digits so a
//! byte comparison of two files is a bit comparison of the values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use tailcmp::suite::{InequalityReport, WllnDiagnostic};
use tailcmp::FunctionPair;

use crate::error::{CliError, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const INEQUALITY_COLUMNS: [&str; 26] = [
    "case",
    "check",
    "n",
    "t",
    "lhs_p",
    "lhs_ci_low",
    "lhs_ci_high",
    "rhs_p",
    "rhs_ci_low",
    "rhs_ci_high",
    "factor",
    "tail_term",
    "tail_term_upper",
    "tail_term_analytic",
    "rhs_bound",
    "rhs_bound_upper",
    "slack",
    "sigma_margin",
    "verdict",
    "exact",
    "replications",
    "confidence",
    "both",
    "lhs_only",
    "rhs_only",
    "neither",
];

pub const WLLN_COLUMNS: [&str; 15] = [
    "statistic",
    "n",
    "b_n",
    "lambda",
    "p_hat",
    "ci_low",
    "ci_high",
    "successes",
    "replications",
    "gamma_norm",
    "criterion_analytic",
    "criterion_empirical",
    "criterion_std_error",
    "criterion_exceedances",
    "criterion_draws",
];

pub const CONSTRUCT_COLUMNS: [&str; 4] = ["t", "phi", "psi", "ratio"];

/// Formats a float with 17 significant digits; non-finite values as `inf`,
/// `-inf` and `nan`.
pub fn float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// An in-memory CSV table with a fixed header.
pub struct Table {
    columns: usize,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("write to memory");
        Table {
            columns: header.len(),
            writer,
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns);
        self.writer.write_record(&row).expect("write to memory");
    }

    pub fn into_string(self) -> String {
        let bytes = self.writer.into_inner().expect("flush to memory");
        String::from_utf8(bytes).expect("fields are UTF-8")
    }
}

pub fn inequality_table<'a, I>(cases: I) -> Table
where
    I: IntoIterator<Item = (&'a str, &'a [InequalityReport])>,
{
    let mut table = Table::new(&INEQUALITY_COLUMNS);
    for (case, reports) in cases {
        for r in reports {
            let tail = r.tail_term;
            table.push(vec![
                case.to_string(),
                r.name.clone(),
                r.n.to_string(),
                float(r.t),
                float(r.lhs.p_hat),
                float(r.lhs.ci_low),
                float(r.lhs.ci_high),
                float(r.rhs.p_hat),
                float(r.rhs.ci_low),
                float(r.rhs.ci_high),
                r.factor.to_string(),
                float(tail.map_or(0.0, |x| x.value)),
                float(tail.map_or(0.0, |x| x.upper)),
                tail.map_or(String::new(), |x| x.analytic.to_string()),
                float(r.rhs_bound),
                float(r.rhs_bound_upper),
                float(r.slack),
                float(r.sigma_margin),
                r.verdict.as_str().to_string(),
                r.lhs.exact.to_string(),
                r.lhs.replications.to_string(),
                float(r.lhs.confidence),
                r.joint.both.to_string(),
                r.joint.lhs_only.to_string(),
                r.joint.rhs_only.to_string(),
                r.joint.neither.to_string(),
            ]);
        }
    }
    table
}

pub fn wlln_rows(table: &mut Table, statistic: &str, diag: &WllnDiagnostic) {
    for row in &diag.rows {
        let gamma_norm = row.gamma.iter().map(|g| g * g).sum::<f64>().sqrt();
        for (lambda, e) in diag.lambda_grid.iter().zip(&row.estimates) {
            let c = &row.criterion;
            table.push(vec![
                statistic.to_string(),
                row.n.to_string(),
                float(row.b_n),
                float(*lambda),
                float(e.p_hat),
                float(e.ci_low),
                float(e.ci_high),
                e.successes.to_string(),
                e.replications.to_string(),
                float(gamma_norm),
                c.analytic.map_or(String::new(), float),
                float(c.empirical),
                float(c.empirical_std_error),
                c.exceedances.to_string(),
                c.draws.to_string(),
            ]);
        }
    }
}

/// `phi`, `psi` and their ratio on `t = j / per_unit` for `j = 0..=N * per_unit`.
pub fn construct_table(functions: &FunctionPair, per_unit: usize) -> Result<Table> {
    let mut table = Table::new(&CONSTRUCT_COLUMNS);
    let per_unit = per_unit.max(1);
    for j in 0..=functions.horizon() * per_unit {
        let t = j as f64 / per_unit as f64;
        table.push(vec![
            float(t),
            float(functions.eval_phi(t)?),
            float(functions.eval_psi(t)?),
            float(functions.ratio(t)?),
        ]);
    }
    Ok(table)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Schema {
        path: name.into(),
        message: e.to_string(),
    })?;
    let _ = writeln!(text);
    write_text(dir, name, &text)
}
