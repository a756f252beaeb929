//! Experiment report tables and their CSV/JSON forms.

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COLUMNS: [&str; 7] = [
    "part",
    "model",
    "gluing",
    "flags",
    "train_rmse",
    "test_rmse",
    "trainable_params",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRow {
    pub part: String,
    pub model: String,
    pub gluing: String,
    /// One mark per member: `×` frozen, `○` re-initialised and trained.
    pub flags: String,
    pub train_rmse: f64,
    pub test_rmse: f64,
    pub trainable_params: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format {other:?}, expected csv or json"))),
        }
    }
}

impl Report {
    pub fn write(&self, format: Format, writer: impl Write) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(writer),
            Format::Json => {
                let mut writer = writer;
                serde_json::to_writer_pretty(&mut writer, self)?;
                writer.write_all(b"\n").map_err(|e| Error::io("<report>", e))
            }
        }
    }

    fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let wrap = |e| Error::csv("<report>", e);
        w.write_record(COLUMNS).map_err(wrap)?;
        for r in &self.rows {
            w.write_record([
                r.part.clone(),
                r.model.clone(),
                r.gluing.clone(),
                r.flags.clone(),
                r.train_rmse.to_string(),
                r.test_rmse.to_string(),
                r.trainable_params.to_string(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("<report>", e))
    }

    pub fn to_bytes(&self, format: Format) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write(format, &mut out)?;
        Ok(out)
    }

    pub fn read(format: Format, reader: impl Read) -> Result<Self> {
        match format {
            Format::Json => Ok(serde_json::from_reader(reader)?),
            Format::Csv => {
                let mut r = csv::Reader::from_reader(reader);
                let wrap = |e| Error::csv("<report>", e);
                let header = r.headers().map_err(wrap)?.clone();
                if header.iter().ne(COLUMNS) {
                    return Err(Error::Dataset(format!("report header must be {}", COLUMNS.join(","))));
                }
                let rows = r
                    .deserialize::<ReportRow>()
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(wrap)?;
                Ok(Report { rows })
            }
        }
    }
}

/// Writes `report` to `path`, creating or truncating the file.
pub fn emit_report(report: &Report, format: Format, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = report.to_bytes(format)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn parse_report(format: Format, path: impl AsRef<Path>) -> Result<Report> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Report::read(format, std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        Report {
            rows: vec![
                ReportRow {
                    part: "1".into(),
                    model: "A".into(),
                    gluing: "none".into(),
                    flags: "×".into(),
                    train_rmse: 0.1 + 0.2,
                    test_rmse: 1.0 / 3.0,
                    trainable_params: 0,
                },
                ReportRow {
                    part: "2".into(),
                    model: "A+B, v2".into(),
                    gluing: "logistic".into(),
                    flags: "×○".into(),
                    train_rmse: 1e-300,
                    test_rmse: 12345.678,
                    trainable_params: 9,
                },
            ],
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let bytes = Report::default().to_bytes(Format::Csv).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), format!("{}\n", COLUMNS.join(",")));
    }

    #[test]
    fn round_trips_exactly() {
        for format in [Format::Csv, Format::Json] {
            let bytes = sample().to_bytes(format).unwrap();
            assert_eq!(Report::read(format, bytes.as_slice()).unwrap(), sample());
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        let csv = "part,model\n1,A\n";
        assert!(Report::read(Format::Csv, csv.as_bytes()).is_err());
    }

    #[test]
    fn write_failure_names_the_path() {
        let err = emit_report(&sample(), Format::Csv, "/nonexistent-dir/report.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/report.csv"));
    }
}
