use std::io::{self, BufRead, Write};

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training MSE over the epoch's batches.
    pub mse: f64,
    /// Regularization penalty of the parameters at the end of the epoch.
    pub mhe_penalty: f64,
    /// Validation MSE plus the penalty.
    pub val_loss: f64,
    pub lambda: f64,
    pub seconds: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

pub const LOG_HEADER: &str = "epoch,mse,mhe_penalty,val_loss,lambda,seconds,val_mse";

impl TrainLog {
    pub fn push(&mut self, record: EpochRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.epoch < record.epoch));
        self.records.push(record);
    }

    pub fn extend(&mut self, other: TrainLog) {
        for r in other.records {
            self.push(r);
        }
    }

    pub fn last_epoch(&self) -> usize {
        self.records.last().map_or(0, |r| r.epoch)
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// The record with the lowest validation loss (earliest on ties).
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records
            .iter()
            .fold(None, |best: Option<&EpochRecord>, r| match best {
                Some(b) if b.val_loss <= r.val_loss => Some(b),
                _ => Some(r),
            })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{LOG_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.epoch, r.mse, r.mhe_penalty, r.val_loss, r.lambda, r.seconds, r.val_mse
            )?;
        }
        w.flush()
    }

    pub fn read_csv<R: BufRead>(r: R) -> io::Result<TrainLog> {
        let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
        let mut lines = r.lines();
        match lines.next().transpose()? {
            Some(h) if h.trim() == LOG_HEADER => {}
            other => return Err(bad(format!("unexpected log header {other:?}"))),
        }
        let mut log = TrainLog::default();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad(format!("expected 7 fields, got {}", f.len())));
            }
            let num = |i: usize| {
                f[i].parse::<f64>()
                    .map_err(|e| bad(format!("field {i}: {e}")))
            };
            log.records.push(EpochRecord {
                epoch: f[0].parse().map_err(|e| bad(format!("epoch: {e}")))?,
                mse: num(1)?,
                mhe_penalty: num(2)?,
                val_loss: num(3)?,
                lambda: num(4)?,
                seconds: num(5)?,
                val_mse: num(6)?,
            });
        }
        Ok(log)
    }
}
