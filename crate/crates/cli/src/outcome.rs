//! Scenario outputs: assertions, tables and the intermediate-quantity report.

use latticeq::report::Table;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub assertions: Vec<Assertion>,
    pub tables: Vec<Table>,
    /// every intermediate quantity needed to re-derive the headline numbers
    pub report: serde_json::Map<String, serde_json::Value>,
}

impl Outcome {
    pub fn check(&mut self, name: &str, passed: bool, detail: String) {
        self.assertions.push(Assertion { name: name.to_string(), passed, detail });
    }

    pub fn check_le(&mut self, name: &str, value: f64, bound: f64) {
        self.check(name, value <= bound, format!("{value} <= {bound}"));
    }

    pub fn note<V: Into<serde_json::Value>>(&mut self, key: &str, value: V) {
        self.report.insert(key.to_string(), value.into());
    }

    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let mut t = Table::new("assertions", &["name", "passed", "detail"]);
        for a in &self.assertions {
            t.push(vec![a.name.clone(), a.passed.to_string(), a.detail.clone()]);
        }
        t.write_to(dir)?;
        for table in &self.tables {
            table.write_to(dir)?;
        }
        std::fs::write(
            dir.join("report.json"),
            serde_json::to_string_pretty(&serde_json::Value::Object(self.report.clone()))
                .unwrap(),
        )
    }
}
