use serde::Serialize;
use thiserror::Error;

use super::dominance::DominanceReport;
use crate::estimators::EstimatorKind;

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("summary CSV row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("summary CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckpointStat {
    pub checkpoint: usize,
    pub mse_mean: f64,
    pub mse_sem: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunMetadata {
    pub config_hash: Option<String>,
    pub master_seed: u64,
    pub replicates: usize,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    /// `None` when read back from a bare CSV.
    pub estimator: Option<EstimatorKind>,
    pub rows: Vec<CheckpointStat>,
    pub metadata: RunMetadata,
}

impl RunSummary {
    /// `checkpoint,mse_mean,mse_sem` plus `bound_value,verdict` when a
    /// dominance report is attached. Untested (calibration) rows get an empty
    /// verdict.
    pub fn to_csv(&self, dominance: Option<&DominanceReport>) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let write = |w: &mut csv::Writer<Vec<u8>>, rec: &[String]| {
            w.write_record(rec).expect("writing to memory cannot fail");
        };
        let mut header = vec!["checkpoint", "mse_mean", "mse_sem"];
        if dominance.is_some() {
            header.extend(["bound_value", "verdict"]);
        }
        write(&mut w, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
        for (k, row) in self.rows.iter().enumerate() {
            let mut rec = vec![
                row.checkpoint.to_string(),
                format!("{:e}", row.mse_mean),
                format!("{:e}", row.mse_sem),
            ];
            if let Some(d) = dominance {
                let v = &d.verdicts[k];
                rec.push(format!("{:e}", v.bound));
                rec.push(match (v.tested, v.pass) {
                    (false, _) => String::new(),
                    (true, true) => "pass".into(),
                    (true, false) => "fail".into(),
                });
            }
            write(&mut w, &rec);
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("ASCII output")
    }

    /// Reads the `checkpoint,mse_mean,mse_sem` columns of a summary CSV; extra columns are ignored.
    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<RunSummary, SummaryError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| SummaryError::Parse {
                    row: 1,
                    message: format!("missing column {name:?}"),
                })
        };
        let (ci, mi, si) = (column("checkpoint")?, column("mse_mean")?, column("mse_sem")?);
        let mut rows = Vec::new();
        for (k, record) in rdr.records().enumerate() {
            let record = record?;
            let row = k + 2;
            let cell = |i: usize| record.get(i).unwrap_or("");
            let bad = |what: &str, v: &str| SummaryError::Parse {
                row,
                message: format!("{what} {v:?} is not a number"),
            };
            let checkpoint = cell(ci).parse::<usize>().map_err(|_| bad("checkpoint", cell(ci)))?;
            let mse_mean = cell(mi).parse::<f64>().map_err(|_| bad("mse_mean", cell(mi)))?;
            let mse_sem = cell(si).parse::<f64>().map_err(|_| bad("mse_sem", cell(si)))?;
            rows.push(CheckpointStat {
                checkpoint,
                mse_mean,
                mse_sem,
            });
        }
        Ok(RunSummary {
            estimator: None,
            rows,
            metadata: RunMetadata::default(),
        })
    }

    pub fn checkpoints(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.checkpoint).collect()
    }
}
