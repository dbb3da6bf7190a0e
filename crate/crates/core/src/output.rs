//! Trajectory CSV, neighbor-distance CSV and summary files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{DsaError, Result};
use crate::sim::{RecordSink, RunSummary, StepRecord};

pub const TRAJECTORY_HEADER: &str = "step,time,agent_id,px,py,vx,vy,ax,ay,mode";
pub const NEIGHBOR_DISTANCE_HEADER: &str = "step,time,agent_id,min_neighbor_distance";

/// Formats `x` with 9 significant digits, like C's `%.9g`.
pub fn fmt_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| DsaError::io(path, e))
}

/// Streams one row per (step, agent).
pub struct TrajectoryCsv<W: Write> {
    out: W,
    path: PathBuf,
}

impl TrajectoryCsv<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        TrajectoryCsv::new(create(path)?, path)
    }
}

impl<W: Write> TrajectoryCsv<W> {
    pub fn new(mut out: W, label: &Path) -> Result<Self> {
        writeln!(out, "{TRAJECTORY_HEADER}").map_err(|e| DsaError::io(label, e))?;
        Ok(TrajectoryCsv {
            out,
            path: label.to_path_buf(),
        })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> RecordSink for TrajectoryCsv<W> {
    fn record(&mut self, rec: &StepRecord) -> Result<()> {
        let time = fmt_sig9(rec.time);
        for (k, a) in rec.agents.iter().enumerate() {
            writeln!(
                self.out,
                "{},{},{},{},{},{},{},{},{},{}",
                rec.step,
                time,
                k,
                fmt_sig9(a.position.x),
                fmt_sig9(a.position.y),
                fmt_sig9(a.velocity.x),
                fmt_sig9(a.velocity.y),
                fmt_sig9(a.action.x),
                fmt_sig9(a.action.y),
                a.mode.code()
            )
            .map_err(|e| DsaError::io(&self.path, e))?;
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| DsaError::io(&self.path, e))
    }
}

/// Distance from each agent to its closest neighbor, per step.
pub struct NeighborDistanceCsv<W: Write> {
    out: W,
    path: PathBuf,
}

impl NeighborDistanceCsv<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        NeighborDistanceCsv::new(create(path)?, path)
    }
}

impl<W: Write> NeighborDistanceCsv<W> {
    pub fn new(mut out: W, label: &Path) -> Result<Self> {
        writeln!(out, "{NEIGHBOR_DISTANCE_HEADER}").map_err(|e| DsaError::io(label, e))?;
        Ok(NeighborDistanceCsv {
            out,
            path: label.to_path_buf(),
        })
    }
}

impl<W: Write> RecordSink for NeighborDistanceCsv<W> {
    fn record(&mut self, rec: &StepRecord) -> Result<()> {
        let time = fmt_sig9(rec.time);
        for (k, a) in rec.agents.iter().enumerate() {
            writeln!(
                self.out,
                "{},{},{},{}",
                rec.step,
                time,
                k,
                fmt_sig9(a.min_neighbor_distance)
            )
            .map_err(|e| DsaError::io(&self.path, e))?;
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| DsaError::io(&self.path, e))
    }
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<()> {
    std::fs::write(path, summary.to_toml_string()).map_err(|e| DsaError::io(path, e))
}
