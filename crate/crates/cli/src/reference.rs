use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::report::{MetricsReport, ReferenceAnnotation};

const TABLES: &str = include_str!("../data/reference_tables.json");

#[derive(Debug, Clone, Deserialize)]
pub struct ReferenceTables {
    pub version: u32,
    pub source: String,
    pub tables: BTreeMap<String, ReferenceTable>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ReferenceTable {
    pub metric: String,
    /// Setting name → method name → value.
    pub rows: BTreeMap<String, BTreeMap<String, f64>>,
}

impl ReferenceTables {
    pub fn bundled() -> Self {
        serde_json::from_str(TABLES).expect("bundled reference tables parse")
    }

    /// Reference value for one method on one setting.
    pub fn lookup(&self, table: &str, row: &str, method: &str) -> Option<f64> {
        self.tables.get(table)?.rows.get(row)?.get(method).copied()
    }
}

/// Table that holds rows for the report's task.
pub fn table_for(report: &MetricsReport) -> &'static str {
    match report.dataset.task {
        nimo::model::Task::Regression => "regression_mse",
        nimo::model::Task::Logistic => "classification_accuracy",
    }
}

/// Attaches the reference value and ratio to every method that has one.
pub fn compare_to_reference(report: &MetricsReport, table: &str) -> CliResult<MetricsReport> {
    let tables = ReferenceTables::bundled();
    let unknown = || CliError::UnknownTableRow {
        table: table.to_string(),
        row: report.dataset.name.clone(),
    };
    let setting = report.dataset.setting.ok_or_else(unknown)?;
    let row = tables.tables.get(table).and_then(|t| t.rows.get(setting.name())).ok_or_else(unknown)?;
    let mut out = report.clone();
    for (name, m) in out.methods.iter_mut() {
        m.reference = row.get(name).map(|&value| ReferenceAnnotation {
            table: table.to_string(),
            value,
            ratio: m.mean / value,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_values() {
        let t = ReferenceTables::bundled();
        assert_eq!(t.version, 1);
        assert_eq!(t.lookup("regression_mse", "reg1", "nimo"), Some(0.030));
        assert_eq!(t.lookup("classification_accuracy", "cls3", "nimo"), Some(0.84));
        assert_eq!(t.lookup("regression_mse", "reg_vanilla", "contextual_lasso"), None);
    }
}
