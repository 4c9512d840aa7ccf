use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::links::LinkClass;
use crate::orbital::NodeId;

use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub sim_time_s: f64,
    pub round: u64,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub cumulative_bits: u64,
    pub active_satellites: usize,
}

/// Metric rows, strictly increasing in time. A second row at the same
/// instant replaces the first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    rows: Vec<MetricsRecord>,
}

impl MetricsLog {
    pub fn push(&mut self, rec: MetricsRecord) -> Result<(), SimError> {
        match self.rows.last_mut() {
            Some(last) if last.sim_time_s == rec.sim_time_s => *last = rec,
            Some(last) if last.sim_time_s > rec.sim_time_s => {
                return Err(SimError::PastEvent {
                    time_s: rec.sim_time_s,
                    now_s: last.sim_time_s,
                })
            }
            _ => self.rows.push(rec),
        }
        Ok(())
    }

    pub fn rows(&self) -> &[MetricsRecord] {
        &self.rows
    }

    pub fn last(&self) -> Option<&MetricsRecord> {
        self.rows.last()
    }

    /// First row whose accuracy reaches `target`.
    pub fn first_reaching(&self, target: f64) -> Option<&MetricsRecord> {
        self.rows.iter().find(|r| r.test_accuracy >= target)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r).map_err(|e| SimError::Output(e.to_string()))?;
        }
        w.flush().map_err(|e| SimError::Output(e.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    pub fn from_csv(text: &str) -> Result<Self, SimError> {
        let mut log = Self::default();
        for rec in csv::Reader::from_reader(text.as_bytes()).deserialize() {
            log.push(rec.map_err(|e| SimError::Output(e.to_string()))?)?;
        }
        Ok(log)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Transfer,
    TransferAborted,
    Train,
    PartialUpload,
    Aggregate,
    Reschedule,
    Watchdog,
}

/// One line of the event trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_s: f64,
    pub kind: TraceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst: Option<NodeId>,
    pub payload_bits: u64,
    pub round: u64,
    pub start_s: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn push(&mut self, rec: TraceRecord) {
        self.records.push(rec);
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), SimError> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(|e| SimError::Output(e.to_string()))?;
            out.write_all(b"\n").map_err(|e| SimError::Output(e.to_string()))?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("json output is UTF-8")
    }
}
