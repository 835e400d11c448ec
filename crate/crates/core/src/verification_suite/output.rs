use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{exit_code, Check, VerificationReport};
use crate::cli::config::RunConfig;
use crate::error::Result;

pub const CSV_HEADER: [&str; 8] = ["scenario", "metric", "value", "tolerance", "reference", "check", "pass", "detail"];

/// Shortest decimal that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

pub fn write_report_csv<W: Write>(report: &VerificationReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    if let Some(err) = &report.error {
        w.write_record([report.scenario.as_str(), "error", "", "", "", "", "false", err.as_str()])?;
    }
    for m in &report.metrics {
        let (tol, reference) = if m.check == Check::Info {
            (String::new(), String::new())
        } else {
            (format_f64(m.tolerance), format_f64(m.reference))
        };
        w.write_record([
            report.scenario.as_str(),
            m.name.as_str(),
            &format_f64(m.value),
            &tol,
            &reference,
            m.check.name(),
            if m.pass { "true" } else { "false" },
            m.detail.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub config: &'a RunConfig,
    pub config_digest: String,
    pub exit_code: i32,
    pub passed: usize,
    pub failed: usize,
    pub reports: &'a [VerificationReport],
}

/// `<dir>/<scenario>.csv` per report plus `<dir>/summary.json`.
pub fn write_outputs(dir: &Path, config: &RunConfig, reports: &[VerificationReport]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for r in reports {
        let f = std::fs::File::create(dir.join(format!("{}.csv", r.scenario)))?;
        write_report_csv(r, std::io::BufWriter::new(f))?;
    }
    let passed = reports.iter().filter(|r| r.passed()).count();
    let summary = Summary {
        config,
        config_digest: config.digest(),
        exit_code: exit_code(reports),
        passed,
        failed: reports.len() - passed,
        reports,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(dir.join("summary.json"), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_formatting() {
        for v in [0.1, 1e-8, -2.5e300, 1.0 / 3.0, 0.0] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_f64(f64::NAN), "NaN");
    }
}
