use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::BenchError;

/// One flat row of an experiment: column name to number, string or bool.
pub type Record = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Machine {
    pub os: String,
    pub arch: String,
    pub cpus: usize,
    pub harness_version: String,
}

impl Machine {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
            harness_version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub machine: Machine,
    /// Rows carry a `trial` column; wall-clock columns end in `_secs` or
    /// are named `speedup`.
    pub records: Vec<Record>,
    pub summary: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn new(name: &str, seed: u64, trials: usize, records: Vec<Record>, summary: BTreeMap<String, f64>) -> Self {
        Self {
            name: name.into(),
            seed,
            trials,
            machine: Machine::current(),
            records,
            summary,
        }
    }

    /// Records with every wall-clock column removed.
    pub fn untimed_records(&self) -> Vec<Record> {
        self.records
            .iter()
            .map(|r| {
                r.iter()
                    .filter(|(k, _)| !is_timing(k))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect()
            })
            .collect()
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.get(name)?.as_f64()).collect()
    }

    pub fn table(&self) -> String {
        let mut out = format!("{} (seed {}, {} trials)\n", self.name, self.seed, self.trials);
        let width = self.summary.keys().map(String::len).max().unwrap_or(0);
        for (k, v) in &self.summary {
            let _ = writeln!(out, "  {k:<width$}  {v:>12.4}");
        }
        out
    }

    pub fn to_csv(&self) -> Result<String, BenchError> {
        let mut columns: Vec<&String> = self.records.iter().flat_map(|r| r.keys()).collect();
        columns.sort();
        columns.dedup();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&columns)?;
        for r in &self.records {
            w.write_record(columns.iter().map(|c| match r.get(*c) {
                None | Some(Value::Null) => String::new(),
                Some(Value::String(s)) => s.clone(),
                Some(v) => v.to_string(),
            }))?;
        }
        let bytes = w.into_inner().map_err(|e| BenchError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `path` as JSON and a sibling `.csv` with the records.
    pub fn write(&self, path: &Path) -> Result<(), BenchError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        fs::write(path.with_extension("csv"), self.to_csv()?)?;
        Ok(())
    }
}

fn is_timing(column: &str) -> bool {
    column.ends_with("_secs") || column == "speedup"
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn stddev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Half-width of a normal-approximation 95% interval of the mean.
pub fn ci95(values: &[f64]) -> f64 {
    1.96 * stddev(values) / (values.len() as f64).sqrt()
}

#[macro_export]
macro_rules! record {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut r = $crate::report::Record::new();
        $( r.insert($k.to_string(), serde_json::json!($v)); )*
        r
    }};
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn csv_has_union_of_columns() {
        let r = ExperimentReport::new(
            "x",
            0,
            2,
            vec![record!("trial" => 0, "a" => 1.5), record!("trial" => 1, "b" => "s")],
            BTreeMap::new(),
        );
        assert_eq!(r.to_csv().unwrap(), "a,b,trial\n1.5,,0\n,s,1\n");
    }

    #[test]
    fn timing_columns_are_stripped() {
        let r = ExperimentReport::new(
            "x",
            0,
            1,
            vec![record!("trial" => 0, "bound_secs" => 0.1, "speedup" => 9.0, "size" => 25)],
            BTreeMap::new(),
        );
        assert_eq!(r.untimed_records(), vec![record!("trial" => 0, "size" => 25)]);
    }
}
