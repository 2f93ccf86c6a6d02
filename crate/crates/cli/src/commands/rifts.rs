//! `equilcast rifts`: raw spectra directory → calibrated reflectance →
//! per-timestep effective optical thickness → normalized response curve.

use std::fs;
use std::path::PathBuf;

use clap::Parser;
use equilcast_core::curve::CurveMeta;
use equilcast_core::datahub::write_curve_csv;
use equilcast_core::spectra::{
    build_response_curve, calibrate_reflectance, compute_eot, read_spectrum_csv, EotSeries,
    SpectrumKind,
};
use equilcast_core::{exec, Error, Result};

use crate::util::{self, Range};

#[derive(Parser)]
pub struct Args {
    /// Directory of per-timestep raw spectra (`wavelength_nm,value` CSVs).
    /// File stems that parse as numbers are taken as acquisition times in
    /// seconds; otherwise files are ordered by name and indexed.
    #[arg(long)]
    spectra: PathBuf,

    /// Dark spectrum (0% reflectance).
    #[arg(long)]
    dark: PathBuf,

    /// Reference spectrum (100% reflectance, e.g. a mirror).
    #[arg(long)]
    reference: PathBuf,

    /// Wavelength analysis window in nm.
    #[arg(long, default_value = "500:1000")]
    window: Range,

    /// FFT zero-padding factor.
    #[arg(long, default_value_t = 8)]
    pad: usize,

    /// Output directory for `response.csv` and `eot.csv`.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    util::require_dir(&args.spectra, "--spectra")?;
    util::require_file(&args.dark, "--dark")?;
    util::require_file(&args.reference, "--reference")?;

    let dark = read_spectrum_csv(&args.dark, SpectrumKind::RawCounts)?;
    let reference = read_spectrum_csv(&args.reference, SpectrumKind::RawCounts)?;

    let mut files: Vec<PathBuf> = fs::read_dir(&args.spectra)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "csv"))
        .collect();
    if files.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no .csv spectra in {}",
            args.spectra.display()
        )));
    }
    files.sort();

    let stem_times: Option<Vec<f64>> = files
        .iter()
        .map(|p| p.file_stem()?.to_str()?.parse::<f64>().ok())
        .collect();
    let times: Vec<f64> = match stem_times {
        Some(t) if t.windows(2).all(|w| w[1] > w[0]) => t,
        _ => {
            log::info!("file stems are not ascending times; using file order as seconds");
            (0..files.len()).map(|i| i as f64).collect()
        }
    };

    let window = (args.window.lo, args.window.hi);
    let eots = exec::map_slice(&files, |path| -> Result<f64> {
        let raw = read_spectrum_csv(path, SpectrumKind::RawCounts)?;
        let calibrated = calibrate_reflectance(&raw, &dark, &reference)?;
        compute_eot(&calibrated, window, args.pad)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let series = EotSeries::new(times, eots)?;
    let id = args
        .spectra
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("rifts")
        .to_string();
    let curve = build_response_curve(&series, CurveMeta::experimental(id, 0.0))?;

    fs::create_dir_all(&args.out)?;
    write_curve_csv(&args.out.join("response.csv"), &curve)?;
    let mut eot_csv = String::from("t_seconds,eot_nm\n");
    for (t, e) in series.times_s.iter().zip(&series.eot_nm) {
        eot_csv.push_str(&format!("{t},{e}\n"));
    }
    fs::write(args.out.join("eot.csv"), eot_csv)?;

    println!(
        "rifts: {} spectra -> {} (EOT {:.1} nm at baseline)",
        curve.len(),
        args.out.join("response.csv").display(),
        series.eot_nm[0],
    );
    Ok(())
}
