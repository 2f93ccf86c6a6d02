//! Reflectance calibration and Fourier-domain extraction of effective
//! optical thickness (EOT).
//!
//! A single-layer porous film reflects with near-sinusoidal Fabry-Pérot
//! fringes that are equally spaced in wavenumber; their frequency equals the
//! film's EOT, the optical path 2nL. [`compute_eot`] recovers that frequency
//! by resampling the spectrum onto a uniform wavenumber grid, windowing,
//! zero-padding, and refining the dominant FFT peak by quadratic
//! interpolation.

use std::fs;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::curve::{CurveMeta, ResponseCurve};
use crate::error::{Error, Result};

/// Ratio the fringe peak must exceed over the off-peak median magnitude.
const PEAK_THRESHOLD: f64 = 3.0;
/// Calibrated reflectance is clipped to this range to tolerate noise above
/// the reference.
const REFLECTANCE_CLIP: (f64, f64) = (0.0, 1.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    RawCounts,
    ReflectanceFraction,
}

/// A sampled spectrum on a strictly increasing wavelength grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub wavelengths_nm: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: SpectrumKind,
}

impl Spectrum {
    pub fn new(wavelengths_nm: Vec<f64>, values: Vec<f64>, kind: SpectrumKind) -> Result<Self> {
        if wavelengths_nm.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} wavelengths vs {} values",
                wavelengths_nm.len(),
                values.len()
            )));
        }
        if wavelengths_nm.len() < 2 {
            return Err(Error::InvalidInput("spectrum needs at least 2 samples".into()));
        }
        if wavelengths_nm.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "wavelengths must be strictly increasing".into(),
            ));
        }
        if wavelengths_nm.iter().any(|v| !v.is_finite() || *v <= 0.0)
            || values.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NonFiniteInput);
        }
        Ok(Spectrum {
            wavelengths_nm,
            values,
            kind,
        })
    }

    /// Linear interpolation at `lambda_nm`; callers guarantee coverage.
    fn interpolate(&self, lambda_nm: f64) -> f64 {
        let w = &self.wavelengths_nm;
        let i = match w.binary_search_by(|x| x.partial_cmp(&lambda_nm).unwrap()) {
            Ok(i) => return self.values[i],
            Err(i) => i,
        };
        let i = i.clamp(1, w.len() - 1);
        let t = (lambda_nm - w[i - 1]) / (w[i] - w[i - 1]);
        self.values[i - 1] * (1.0 - t) + self.values[i] * t
    }
}

/// Converts a raw spectrum to reflectance fraction using dark (0%) and
/// reference (100%) spectra: (raw − dark) / (reference − dark), pointwise.
pub fn calibrate_reflectance(raw: &Spectrum, dark: &Spectrum, reference: &Spectrum) -> Result<Spectrum> {
    if raw.wavelengths_nm != dark.wavelengths_nm || raw.wavelengths_nm != reference.wavelengths_nm {
        return Err(Error::GridMismatch);
    }
    let mut values = Vec::with_capacity(raw.values.len());
    for (i, ((&r, &d), &f)) in raw
        .values
        .iter()
        .zip(&dark.values)
        .zip(&reference.values)
        .enumerate()
    {
        let span = f - d;
        if span <= 0.0 {
            return Err(Error::CalibrationDegenerate {
                index: i,
                wavelength_nm: raw.wavelengths_nm[i],
            });
        }
        values.push(((r - d) / span).clamp(REFLECTANCE_CLIP.0, REFLECTANCE_CLIP.1));
    }
    Spectrum::new(
        raw.wavelengths_nm.clone(),
        values,
        SpectrumKind::ReflectanceFraction,
    )
}

/// Extracts the effective optical thickness 2nL (in nm) from the Fabry-Pérot
/// fringe frequency inside `window_nm = (lo, hi)`.
///
/// The spectrum is resampled onto a uniform wavenumber grid inside the
/// window, mean-removed, Hann-apodized, zero-padded by `zero_pad_factor`,
/// and the dominant non-DC magnitude peak is refined with a 3-point
/// quadratic fit on the log magnitudes.
pub fn compute_eot(spec: &Spectrum, window_nm: (f64, f64), zero_pad_factor: usize) -> Result<f64> {
    let (lo, hi) = window_nm;
    if spec.kind != SpectrumKind::ReflectanceFraction {
        return Err(Error::InvalidInput(
            "compute_eot expects calibrated reflectance".into(),
        ));
    }
    if !(lo > 0.0 && hi > lo) || zero_pad_factor == 0 {
        return Err(Error::InvalidInput(
            "window must satisfy 0 < lo < hi; zero_pad_factor >= 1".into(),
        ));
    }
    let (first, last) = (spec.wavelengths_nm[0], *spec.wavelengths_nm.last().unwrap());
    if lo < first || hi > last {
        return Err(Error::WindowOutOfRange { lo_nm: lo, hi_nm: hi });
    }
    let n = spec
        .wavelengths_nm
        .iter()
        .filter(|&&w| w >= lo && w <= hi)
        .count();
    if n < 16 {
        return Err(Error::InvalidInput(format!(
            "only {n} samples inside the analysis window"
        )));
    }

    // Uniform wavenumber grid over [1/hi, 1/lo].
    let k_lo = 1.0 / hi;
    let k_hi = 1.0 / lo;
    let dk = (k_hi - k_lo) / (n - 1) as f64;
    let mut resampled: Vec<f64> = (0..n)
        .map(|j| spec.interpolate(1.0 / (k_lo + j as f64 * dk)))
        .collect();

    let mean = resampled.iter().sum::<f64>() / n as f64;
    for (j, v) in resampled.iter_mut().enumerate() {
        let hann = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * j as f64 / (n - 1) as f64).cos());
        *v = (*v - mean) * hann;
    }

    let np = n * zero_pad_factor;
    let mut buf: Vec<Complex<f64>> = resampled
        .into_iter()
        .map(|v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(np)
        .collect();
    FftPlanner::new().plan_fft_forward(np).process(&mut buf);
    let mags: Vec<f64> = buf[..np / 2].iter().map(|c| c.norm()).collect();

    // Search above ~2 fringes per window so baseline leakage cannot win.
    let j_min = ((2.0 * np as f64 / (n - 1) as f64).ceil() as usize).max(1);
    if j_min + 1 >= mags.len() {
        return Err(Error::InvalidInput("window too narrow for fringe search".into()));
    }
    let (peak_idx, peak_mag) = mags
        .iter()
        .enumerate()
        .skip(j_min)
        .fold((j_min, 0.0f64), |acc, (j, &m)| if m > acc.1 { (j, m) } else { acc });

    // Off-peak median, excluding the apodization main lobe around the peak.
    let lobe = 4 * zero_pad_factor;
    let mut off_peak: Vec<f64> = mags
        .iter()
        .enumerate()
        .skip(j_min)
        .filter(|(j, _)| j.abs_diff(peak_idx) > lobe)
        .map(|(_, &m)| m)
        .collect();
    off_peak.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = off_peak.get(off_peak.len() / 2).copied().unwrap_or(0.0);
    if !(peak_mag > PEAK_THRESHOLD * median) || peak_mag <= 0.0 {
        return Err(Error::NoFringePeak {
            threshold: PEAK_THRESHOLD,
        });
    }

    // 3-point quadratic refinement on log magnitudes.
    let delta = if peak_idx > 0 && peak_idx + 1 < mags.len() {
        let (lm, m0, rm) = (
            mags[peak_idx - 1].max(f64::MIN_POSITIVE).ln(),
            peak_mag.ln(),
            mags[peak_idx + 1].max(f64::MIN_POSITIVE).ln(),
        );
        let denom = lm - 2.0 * m0 + rm;
        if denom.abs() > 1e-12 {
            (0.5 * (lm - rm) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    } else {
        0.0
    };

    Ok((peak_idx as f64 + delta) / (dk * np as f64))
}

/// A per-timestep series of effective optical thicknesses.
#[derive(Debug, Clone, PartialEq)]
pub struct EotSeries {
    pub times_s: Vec<f64>,
    pub eot_nm: Vec<f64>,
}

impl EotSeries {
    pub fn new(times_s: Vec<f64>, eot_nm: Vec<f64>) -> Result<Self> {
        if times_s.len() != eot_nm.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} timestamps vs {} EOT values",
                times_s.len(),
                eot_nm.len()
            )));
        }
        if times_s.is_empty() {
            return Err(Error::InvalidInput("empty EOT series".into()));
        }
        if times_s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("timestamps must be strictly increasing".into()));
        }
        if eot_nm.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidInput("EOT values must be positive".into()));
        }
        Ok(EotSeries { times_s, eot_nm })
    }
}

/// Normalizes an EOT series to the fractional change against its first
/// sample: response[n] = (EOT_n − EOT_0) / EOT_0.
pub fn build_response_curve(eots: &EotSeries, meta: CurveMeta) -> Result<ResponseCurve> {
    let baseline = eots.eot_nm[0];
    if !(baseline > 0.0) {
        return Err(Error::DegenerateBaseline(baseline));
    }
    let response = eots.eot_nm.iter().map(|&e| (e - baseline) / baseline).collect();
    ResponseCurve::new(eots.times_s.clone(), response, meta)
}

/// Reads a `wavelength_nm,value` CSV.
pub fn read_spectrum_csv(path: &Path, kind: SpectrumKind) -> Result<Spectrum> {
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut wavelengths = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 {
            if line != "wavelength_nm,value" {
                return Err(Error::Parse {
                    path: display,
                    line: 1,
                    message: format!("expected header 'wavelength_nm,value', found {line:?}"),
                });
            }
            continue;
        }
        let mut fields = line.split(',');
        let parse = |field: Option<&str>, what: &str| -> Result<f64> {
            field
                .ok_or(())
                .and_then(|f| f.trim().parse::<f64>().map_err(|_| ()))
                .map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("bad {what} in {line:?}"),
                })
        };
        wavelengths.push(parse(fields.next(), "wavelength")?);
        values.push(parse(fields.next(), "value")?);
    }
    Spectrum::new(wavelengths, values, kind)
}

/// Writes a `wavelength_nm,value` CSV.
pub fn write_spectrum_csv(path: &Path, spectrum: &Spectrum) -> Result<()> {
    let mut out = String::from("wavelength_nm,value\n");
    for (w, v) in spectrum.wavelengths_nm.iter().zip(&spectrum.values) {
        out.push_str(&format!("{w},{v}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}
