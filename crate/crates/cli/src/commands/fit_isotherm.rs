//! `equilcast fit-isotherm`: equilibrium response vs concentration.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::Parser;

use equilcast_core::datahub::load_corpus;
use equilcast_core::simkit::{fit_isotherm, redlich_peterson};
use equilcast_core::Result;

use crate::util;

#[derive(Parser)]
pub struct Args {
    /// Corpus directory with `manifest.json`.
    #[arg(long)]
    curves: PathBuf,

    /// Output path for the isotherm JSON; a Fig-style `isotherm.csv` is
    /// written next to it.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    util::require_dir(&args.curves, "--curves")?;
    let corpus = load_corpus(&args.curves)?;

    let points: Vec<(f64, f64)> = corpus
        .curves
        .iter()
        .map(|c| (c.meta.concentration_mg_per_ml, c.final_response()))
        .collect();
    let fit = fit_isotherm(&points)?;

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&args.out, serde_json::to_vec_pretty(&fit)?)?;

    // One row per concentration stratum: measured mean/std and the fit.
    let mut strata: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (c, y) in &points {
        strata.entry(c.to_string()).or_default().push(*y);
    }
    let mut csv = String::from("concentration_mg_per_ml,mean_response,std_response,n,fit_response\n");
    let mut rows: Vec<(f64, &Vec<f64>)> = strata
        .iter()
        .map(|(k, v)| (k.parse::<f64>().unwrap(), v))
        .collect();
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for (conc, values) in rows {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        csv.push_str(&format!(
            "{conc},{mean},{std},{},{}\n",
            values.len(),
            redlich_peterson(conc, &fit.params)
        ));
    }
    let csv_path = args.out.with_file_name("isotherm.csv");
    fs::write(&csv_path, csv)?;

    println!(
        "fit-isotherm: K={:.4e} a={:.4e} g={:.4} (SSE {:.3e}) -> {}",
        fit.params.k,
        fit.params.a,
        fit.params.g,
        fit.residual_sse,
        args.out.display()
    );
    Ok(())
}
