use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const LOG_HEADER: &str = "step,loss_d,loss_g,gp,seconds";

/// One row per generator update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRecord {
    pub step: usize,
    /// Mean critic loss over the critic updates since the previous row.
    pub loss_d: f64,
    pub loss_g: f64,
    /// Mean gradient-penalty term over the same critic updates.
    pub gp: f64,
    /// Wall time since training started.
    pub seconds: f64,
}

impl LogRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:.3}",
            self.step, self.loss_d, self.loss_g, self.gp, self.seconds
        )
    }

    /// Every value except the wall time, as raw bits.
    pub fn deterministic_bits(&self) -> (usize, u64, u64, u64) {
        (
            self.step,
            self.loss_d.to_bits(),
            self.loss_g.to_bits(),
            self.gp.to_bits(),
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
}

impl TrainLog {
    pub fn push(&mut self, r: LogRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if r.step <= last.step {
                return Err(Error::invalid(format!(
                    "log step {} does not follow {}",
                    r.step, last.step
                )));
            }
        }
        for (name, v) in [("loss_d", r.loss_d), ("loss_g", r.loss_g), ("gp", r.gp)] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{name} at step {}", r.step)));
            }
        }
        self.records.push(r);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(Error::at_path(path))?);
        writeln!(w, "{LOG_HEADER}")?;
        for r in &self.records {
            writeln!(w, "{}", r.csv_line())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let r = BufReader::new(File::open(path).map_err(Error::at_path(path))?);
        let mut log = TrainLog::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line.trim() != LOG_HEADER {
                    return Err(Error::invalid(format!("unexpected log header `{line}`")));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::invalid(format!("malformed log line {}: `{line}`", i + 1));
            if f.len() != 5 {
                return Err(bad());
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
            log.records.push(LogRecord {
                step: f[0].trim().parse().map_err(|_| bad())?,
                loss_d: num(f[1])?,
                loss_g: num(f[2])?,
                gp: num(f[3])?,
                seconds: num(f[4])?,
            });
        }
        Ok(log)
    }
}
