//! Per-epoch training log: one CSV row per epoch. Empty cells mark
//! re-identification values for nets that did not train that epoch.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hydragan_core::trainer::EpochRecord;

use crate::error::{CliError, CliResult};

pub fn header(n_heads: usize, n_reids: usize) -> Vec<String> {
    let mut h = vec!["epoch".to_owned(), "generator_loss".to_owned()];
    h.extend((0..n_heads).map(|i| format!("critic_loss_{i}")));
    h.extend((0..n_reids).map(|i| format!("reid_loss_{i}")));
    h.extend((0..n_heads).map(|i| format!("generator_realism_{i}")));
    h.extend((0..n_heads).map(|i| format!("generator_reid_{i}")));
    h.extend((0..n_heads).map(|i| format!("em_{i}")));
    h.extend((0..n_heads).map(|i| format!("reid_active_{i}")));
    h
}

pub fn row(r: &EpochRecord) -> Vec<String> {
    let opt = |v: &Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = vec![r.epoch.to_string(), r.generator_loss.to_string()];
    out.extend(r.critic_losses.iter().map(f64::to_string));
    out.extend(r.reid_losses.iter().map(opt));
    out.extend(r.generator_realism.iter().map(f64::to_string));
    out.extend(r.generator_reid.iter().map(opt));
    out.extend(r.per_head_em.iter().map(f64::to_string));
    out.extend(r.reid_active.iter().map(|a| u8::from(*a).to_string()));
    out
}

pub struct TrainLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl TrainLog {
    pub fn create(path: &Path, n_heads: usize, n_reids: usize) -> CliResult<Self> {
        let file = File::create(path).map_err(|e| CliError::output(path, e))?;
        let mut log = TrainLog {
            path: path.to_owned(),
            out: BufWriter::new(file),
        };
        log.line(&header(n_heads, n_reids))?;
        Ok(log)
    }

    fn line(&mut self, cells: &[String]) -> CliResult<()> {
        writeln!(self.out, "{}", cells.join(",")).map_err(|e| CliError::output(&self.path, e))
    }

    pub fn append(&mut self, r: &EpochRecord) -> CliResult<()> {
        self.line(&row(r))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.out.flush().map_err(|e| CliError::output(&self.path, e))
    }
}
