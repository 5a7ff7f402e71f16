//! Plot-ready tables, CSV emission and sample persistence.
//!
//! CSV bodies must be byte-identical across runs with the same inputs, so
//! floats are rendered with the shortest round-trip representation (the
//! standard `Display` for f64).

use crate::qprofile::{PeriodicQ, TailQOutcome};
use crate::renewal::ConvergenceReport;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Shortest round-trip decimal form of a 64-bit float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        fs::write(dir.join(format!("{}.csv", self.name)), self.to_csv())
    }
}

/// Convergence report as the canonical CSV: n, u_n, normalizer, ratio, trunc_error.
pub fn convergence_table(rep: &ConvergenceReport) -> Table {
    let mut t = Table::new(&rep.kind, &["n", "u_n", "normalizer", "ratio", "trunc_error"]);
    for r in &rep.rows {
        t.push(vec![
            r.n.to_string(),
            fmt_f64(r.u_n),
            fmt_f64(r.normalizer),
            fmt_f64(r.ratio),
            fmt_f64(r.trunc_error),
        ]);
    }
    t
}

/// Profile values as CSV: x, q(x), normalizer_kind, trunc_error.
pub fn periodic_q_table(name: &str, q: &PeriodicQ) -> Table {
    let kind = format!("{:?}", q.normalizer);
    let mut t = Table::new(name, &["x", "q", "normalizer_kind", "trunc_error"]);
    for (i, &(x, v)) in q.grid.iter().enumerate() {
        t.push(vec![fmt_f64(x), fmt_f64(v), kind.clone(), fmt_f64(q.trunc[i])]);
    }
    t
}

/// Per-depth stabilization rows of the direct tail route: n, x, value.
pub fn tail_q_table(name: &str, out: &TailQOutcome) -> Table {
    let mut t = Table::new(name, &["n", "x", "value"]);
    for r in &out.rows {
        t.push(vec![r.n.to_string(), fmt_f64(r.x), fmt_f64(r.value)]);
    }
    t
}

/// Sorted-sample ECDF as CSV: x, cdf.
pub fn ecdf_table(name: &str, samples: &[f64], max_rows: usize) -> Table {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let stride = (n / max_rows.max(1)).max(1);
    let mut t = Table::new(name, &["x", "cdf"]);
    for (i, &x) in sorted.iter().enumerate().step_by(stride) {
        t.push(vec![fmt_f64(x), fmt_f64((i + 1) as f64 / n as f64)]);
    }
    t
}

/// Persist samples as little-endian f64 binary plus a JSON sidecar
/// (seed, config hash, count).
pub fn write_samples_with_sidecar(
    dir: &Path,
    name: &str,
    values: &[f64],
    seed: u64,
    config_hash: &str,
) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(dir.join(format!("{name}.f64le")), &buf)?;
    let sidecar = serde_json::json!({
        "seed": seed,
        "config_hash": config_hash,
        "count": values.len(),
    });
    let mut f = fs::File::create(dir.join(format!("{name}.json")))?;
    writeln!(f, "{}", serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Read back a little-endian f64 sample file.
pub fn read_samples_f64le(path: &Path) -> std::io::Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_is_shortest_round_trip() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(1.0 / 3.0), "0.3333333333333333");
        assert_eq!(fmt_f64(2.0), "2");
        let back: f64 = fmt_f64(std::f64::consts::PI).parse().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }

    #[test]
    fn samples_round_trip() {
        let dir = std::env::temp_dir().join(format!("latticeq-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let vals = vec![1.5, -2.25, 1e300, 0.0];
        write_samples_with_sidecar(&dir, "probe", &vals, 7, "abc").unwrap();
        let back = read_samples_f64le(&dir.join("probe.f64le")).unwrap();
        assert_eq!(back, vals);
        let sidecar: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("probe.json")).unwrap())
                .unwrap();
        assert_eq!(sidecar["count"], 4);
        std::fs::remove_dir_all(&dir).ok();
    }
}
