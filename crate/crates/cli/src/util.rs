//! Shared argument parsing and small I/O helpers.

use std::path::Path;
use std::str::FromStr;

use equilcast_core::datahub::{self, Corpus, Split};
use equilcast_core::{Error, Result};

/// A `lo:hi` pair, e.g. `--window 500:1000` or `--snr 2:100`.
#[derive(Debug, Clone, Copy)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound in {s:?}"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound in {s:?}"))?;
        if !(lo < hi) {
            return Err(format!("need lo < hi in {s:?}"));
        }
        Ok(Range { lo, hi })
    }
}

/// The 13 assay concentrations (mg/mL) including the buffer-only control.
pub const DEFAULT_CONCENTRATIONS: [f64; 13] = [
    40.0, 20.0, 10.0, 4.0, 2.0, 1.0, 0.4, 0.2, 0.1, 0.04, 0.02, 0.002, 0.0,
];

/// Loads a corpus and, when the manifest carries no split labels, falls back
/// to `splits.json` next to a model directory.
pub fn load_corpus_with_splits(curves_dir: &Path, model_dir: Option<&Path>) -> Result<Corpus> {
    let mut corpus = datahub::load_corpus(curves_dir)?;
    if corpus.splits.is_empty() {
        if let Some(dir) = model_dir {
            let path = dir.join("splits.json");
            if path.is_file() {
                let splits: std::collections::HashMap<String, Split> =
                    serde_json::from_slice(&std::fs::read(path)?)?;
                corpus.splits = splits;
            }
        }
    }
    Ok(corpus)
}

pub fn require_dir(path: &Path, what: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} {} is not a directory",
            path.display()
        )))
    }
}

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{what} {} is not a file",
            path.display()
        )))
    }
}
