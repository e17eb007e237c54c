use std::io::Write;

use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// One flat output row. Column order is the field order.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Record {
    pub schema_version: u32,
    pub command: String,
    pub quantity: String,
    pub m: Option<u32>,
    pub j: Option<u64>,
    pub k: Option<u64>,
    pub n: Option<u64>,
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub target: Option<f64>,
    pub z: Option<f64>,
    pub abs_err: Option<f64>,
    pub derived: Option<String>,
    pub status: String,
    pub config: String,
}

impl Record {
    pub fn new(command: &str, quantity: impl Into<String>, config: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            quantity: quantity.into(),
            status: "ok".into(),
            config: config.into(),
            ..Default::default()
        }
    }

    pub fn with_report(mut self, r: &cutpoints::stats::EstimateReport) -> Self {
        self.seed = Some(r.seed);
        self.reps = Some(r.reps);
        self.estimate = Some(r.estimate);
        self.se = Some(r.se);
        self.target = r.target;
        self.z = r.z.filter(|z| z.is_finite());
        if r.se_degenerate {
            self.status = "se-degenerate".into();
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

pub fn write_records(out: &mut dyn Write, format: Format, records: &[Record]) -> std::io::Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in records {
                w.serialize(r).map_err(std::io::Error::other)?;
            }
            w.flush()
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, records).map_err(std::io::Error::other)?;
            writeln!(out)
        }
    }
}
