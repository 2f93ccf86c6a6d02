//! Corpus ingestion, stratified splitting, leakage-free min-max
//! normalization, and persistence.
//!
//! On disk a corpus is a `manifest.json` (array of `{id,
//! concentration_mg_per_ml, file, split?}`) plus one `t_seconds,response`
//! CSV per curve. Normalization statistics are always fitted on the training
//! split only and travel with trained models, never with corpora.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{CurveMeta, ResponseCurve, Source};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// A set of curves with optional split labels and normalizer.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub curves: Vec<ResponseCurve>,
    pub splits: HashMap<String, Split>,
    pub normalizer: Option<MinMaxStats>,
}

impl Corpus {
    pub fn from_curves(curves: Vec<ResponseCurve>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for c in &curves {
            if !seen.insert(c.meta.id.clone()) {
                return Err(Error::DuplicateId(c.meta.id.clone()));
            }
        }
        Ok(Corpus {
            curves,
            splits: HashMap::new(),
            normalizer: None,
        })
    }

    pub fn split_curves(&self, split: Split) -> Vec<&ResponseCurve> {
        self.curves
            .iter()
            .filter(|c| self.splits.get(&c.meta.id) == Some(&split))
            .collect()
    }

    pub fn curve(&self, id: &str) -> Option<&ResponseCurve> {
        self.curves.iter().find(|c| c.meta.id == id)
    }
}

/// Train-split min/max response values used for normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxStats {
    pub min_response: f64,
    pub max_response: f64,
    /// Identifies the split the stats were fitted on.
    pub source: String,
}

impl MinMaxStats {
    pub fn forward_value(&self, x: f64) -> f64 {
        (x - self.min_response) / (self.max_response - self.min_response)
    }

    pub fn inverse_value(&self, x: f64) -> f64 {
        self.min_response + x * (self.max_response - self.min_response)
    }

    /// Values outside the training range map outside [0, 1] and are not
    /// clipped.
    pub fn forward(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.forward_value(x)).collect()
    }

    pub fn inverse(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.inverse_value(x)).collect()
    }
}

/// Allocates `n` slots to the weighted classes by largest-remainder
/// rounding; ties go to the earlier class.
fn largest_remainder(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for i in 0..(n - assigned) {
        counts[order[i % order.len()]] += 1;
    }
    counts
}

/// Shuffles each concentration stratum with the seeded generator and
/// allocates train/validation/test counts by largest-remainder rounding of
/// the ratio. Strata are keyed by the concentration's decimal string.
pub fn stratified_split(
    corpus: &Corpus,
    ratio: (u32, u32, u32),
    seed: u64,
) -> Result<HashMap<String, Split>> {
    if corpus.curves.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let weights = [ratio.0 as f64, ratio.1 as f64, ratio.2 as f64];
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidInput("split ratio must be positive".into()));
    }

    let mut strata: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for c in &corpus.curves {
        strata
            .entry(c.meta.concentration_mg_per_ml.to_string())
            .or_default()
            .push(&c.meta.id);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = HashMap::new();
    for (conc, mut ids) in strata {
        if ids.len() < 5 {
            log::warn!(
                "stratum {conc} mg/mL has only {} curves; allocation still applies",
                ids.len()
            );
        }
        ids.sort_unstable();
        ids.shuffle(&mut rng);
        let counts = largest_remainder(ids.len(), &weights);
        let mut it = ids.into_iter();
        for (split, count) in [Split::Train, Split::Validation, Split::Test]
            .into_iter()
            .zip(counts)
        {
            for id in it.by_ref().take(count) {
                assignment.insert(id.to_string(), split);
            }
        }
    }
    Ok(assignment)
}

/// Min/max over all timesteps of all train-split curves only.
pub fn fit_normalizer(corpus: &Corpus) -> Result<MinMaxStats> {
    let train = corpus.split_curves(Split::Train);
    if train.is_empty() {
        return Err(Error::InvalidInput(
            "train split is empty or unassigned".into(),
        ));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for c in &train {
        for &v in &c.response {
            min = min.min(v);
            max = max.max(v);
        }
    }
    if !(max > min) {
        return Err(Error::DegenerateRange);
    }
    Ok(MinMaxStats {
        min_response: min,
        max_response: max,
        source: "train".to_string(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    concentration_mg_per_ml: f64,
    file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<Source>,
}

/// Reads a `t_seconds,response` CSV.
pub fn read_curve_csv(path: &Path, meta: CurveMeta) -> Result<ResponseCurve> {
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut times = Vec::new();
    let mut response = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if lineno == 0 {
            if line != "t_seconds,response" {
                return Err(Error::Parse {
                    path: display,
                    line: 1,
                    message: format!("expected header 't_seconds,response', found {line:?}"),
                });
            }
            continue;
        }
        let mut fields = line.split(',');
        let mut parse = |what: &str| -> Result<f64> {
            fields
                .next()
                .ok_or(())
                .and_then(|f| f.trim().parse::<f64>().map_err(|_| ()))
                .map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("bad {what} in {line:?}"),
                })
        };
        times.push(parse("timestamp")?);
        response.push(parse("response")?);
    }
    ResponseCurve::new(times, response, meta)
}

/// Writes a `t_seconds,response` CSV; the default float formatting is
/// shortest-round-trip, so save/load is lossless.
pub fn write_curve_csv(path: &Path, curve: &ResponseCurve) -> Result<()> {
    let mut out = String::from("t_seconds,response\n");
    for (t, r) in curve.times_s.iter().zip(&curve.response) {
        out.push_str(&format!("{t},{r}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(corpus.curves.len());
    for curve in &corpus.curves {
        let file = format!("{}.csv", curve.meta.id);
        write_curve_csv(&dir.join(&file), curve)?;
        entries.push(ManifestEntry {
            id: curve.meta.id.clone(),
            concentration_mg_per_ml: curve.meta.concentration_mg_per_ml,
            file,
            split: corpus.splits.get(&curve.meta.id).copied(),
            source: Some(curve.meta.source),
        });
    }
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_vec_pretty(&entries)?,
    )?;
    Ok(())
}

pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let manifest_path = dir.join("manifest.json");
    let entries: Vec<ManifestEntry> = serde_json::from_slice(&fs::read(&manifest_path)?)?;

    let mut curves = Vec::with_capacity(entries.len());
    let mut splits = HashMap::new();
    let mut seen = std::collections::HashSet::new();
    for entry in entries {
        if !seen.insert(entry.id.clone()) {
            return Err(Error::DuplicateId(entry.id));
        }
        let path = dir.join(&entry.file);
        if !path.is_file() {
            return Err(Error::MissingCurveFile {
                id: entry.id,
                path: path.display().to_string(),
            });
        }
        let meta = CurveMeta {
            id: entry.id.clone(),
            concentration_mg_per_ml: entry.concentration_mg_per_ml,
            source: entry.source.unwrap_or(Source::Experimental),
        };
        curves.push(read_curve_csv(&path, meta)?);
        if let Some(split) = entry.split {
            splits.insert(entry.id, split);
        }
    }
    Ok(Corpus {
        curves,
        splits,
        normalizer: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(id: &str, conc: f64, values: &[f64]) -> ResponseCurve {
        let times: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
        ResponseCurve::new(times, values.to_vec(), CurveMeta::simulated(id, conc)).unwrap()
    }

    fn corpus_with_strata(sizes: &[(f64, usize)]) -> Corpus {
        let mut curves = Vec::new();
        for (conc, n) in sizes {
            for i in 0..*n {
                curves.push(curve(&format!("c{conc}_{i}"), *conc, &[0.0, 0.01, 0.02]));
            }
        }
        Corpus::from_curves(curves).unwrap()
    }

    /// Independent largest-remainder oracle for one stratum at 3:1:1.
    fn oracle_311(n: usize) -> (usize, usize, usize) {
        let quotas = [n as f64 * 0.6, n as f64 * 0.2, n as f64 * 0.2];
        let mut counts = [
            quotas[0].floor() as usize,
            quotas[1].floor() as usize,
            quotas[2].floor() as usize,
        ];
        let mut rem: Vec<(usize, f64)> = quotas
            .iter()
            .enumerate()
            .map(|(i, q)| (i, q - q.floor()))
            .collect();
        rem.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let mut left = n - counts.iter().sum::<usize>();
        for (i, _) in rem {
            if left == 0 {
                break;
            }
            counts[i] += 1;
            left -= 1;
        }
        (counts[0], counts[1], counts[2])
    }

    #[test]
    fn paper_scale_split_sizes() {
        // 13 strata of 26..40 curves summing to 387, as in the experimental
        // corpus shape.
        let sizes = [40, 38, 36, 34, 33, 31, 30, 29, 28, 27, 26, 27, 8];
        assert_eq!(sizes.iter().sum::<usize>(), 387);
        let strata: Vec<(f64, usize)> = sizes
            .iter()
            .enumerate()
            .map(|(i, &n)| (i as f64 + 1.0, n))
            .collect();
        let corpus = corpus_with_strata(&strata);
        let assignment = stratified_split(&corpus, (3, 1, 1), 7).unwrap();

        let count = |s: Split| assignment.values().filter(|&&v| v == s).count();
        let (mut et, mut ev, mut es) = (0, 0, 0);
        for &n in &sizes {
            let (a, b, c) = oracle_311(n);
            et += a;
            ev += b;
            es += c;
        }
        assert_eq!(count(Split::Train), et);
        assert_eq!(count(Split::Validation), ev);
        assert_eq!(count(Split::Test), es);
        assert_eq!(et + ev + es, 387);
        // Totals land within a curve of 232/77/78 as the per-stratum
        // remainders cancel.
        assert!((et as i64 - 232).abs() <= 1, "train {et}");
    }

    #[test]
    fn stratum_of_five_splits_exactly() {
        let corpus = corpus_with_strata(&[(2.0, 5)]);
        let assignment = stratified_split(&corpus, (3, 1, 1), 1).unwrap();
        let count = |s: Split| assignment.values().filter(|&&v| v == s).count();
        assert_eq!(
            (count(Split::Train), count(Split::Validation), count(Split::Test)),
            (3, 1, 1)
        );
    }

    #[test]
    fn split_is_seed_deterministic_and_seed_sensitive() {
        let corpus = corpus_with_strata(&[(1.0, 20), (2.0, 20), (4.0, 20)]);
        let a = stratified_split(&corpus, (3, 1, 1), 42).unwrap();
        let b = stratified_split(&corpus, (3, 1, 1), 42).unwrap();
        assert_eq!(a, b);
        let c = stratified_split(&corpus, (3, 1, 1), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_preserves_stratum_proportions() {
        let corpus = corpus_with_strata(&[(0.1, 17), (1.0, 23), (10.0, 31)]);
        let assignment = stratified_split(&corpus, (3, 1, 1), 3).unwrap();
        for (conc, n) in [(0.1, 17usize), (1.0, 23), (10.0, 31)] {
            let train = corpus
                .curves
                .iter()
                .filter(|c| {
                    c.meta.concentration_mg_per_ml == conc
                        && assignment[&c.meta.id] == Split::Train
                })
                .count();
            let expected = n as f64 * 0.6;
            assert!(
                (train as f64 - expected).abs() <= 1.0,
                "stratum {conc}: {train} train of {n}"
            );
        }
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let corpus = Corpus::default();
        assert!(matches!(
            stratified_split(&corpus, (3, 1, 1), 0),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn normalizer_uses_only_the_train_split() {
        let mut corpus = corpus_with_strata(&[(1.0, 4)]);
        corpus.curves[0].response = vec![0.0, 0.02, 0.04];
        corpus.curves[1].response = vec![0.0, 0.01, 0.03];
        corpus.curves[2].response = vec![0.0, 5.0, 9.0]; // test curve, ignored
        corpus.curves[3].response = vec![-3.0, 0.0, 1.0]; // validation, ignored
        corpus.splits = HashMap::from([
            ("c1_0".to_string(), Split::Train),
            ("c1_1".to_string(), Split::Train),
            ("c1_2".to_string(), Split::Test),
            ("c1_3".to_string(), Split::Validation),
        ]);
        let stats = fit_normalizer(&corpus).unwrap();
        assert_eq!(stats.min_response, 0.0);
        assert_eq!(stats.max_response, 0.04);

        // Out-of-range test values are not clipped.
        let normalized = stats.forward(&corpus.curves[2].response);
        assert!(normalized[2] > 1.0);

        // Mutating a non-train curve never changes the stats.
        corpus.curves[2].response = vec![0.0, -100.0, 100.0];
        assert_eq!(fit_normalizer(&corpus).unwrap(), stats);
    }

    #[test]
    fn normalizer_endpoints_and_round_trip() {
        let stats = MinMaxStats {
            min_response: 0.0,
            max_response: 0.04,
            source: "train".into(),
        };
        assert_eq!(stats.forward_value(0.0), 0.0);
        assert_eq!(stats.forward_value(0.04), 1.0);
        assert!((stats.forward_value(0.02) - 0.5).abs() < 1e-15);
        for &x in &[0.0, 0.013, 0.04, -0.01, 0.09] {
            let rt = stats.inverse_value(stats.forward_value(x));
            assert!((rt - x).abs() <= 1e-12);
        }
    }

    #[test]
    fn degenerate_train_range_is_rejected() {
        let mut corpus = corpus_with_strata(&[(1.0, 1)]);
        corpus.curves[0].response = vec![0.0, 0.0, 0.0];
        corpus.splits.insert("c1_0".to_string(), Split::Train);
        assert!(matches!(fit_normalizer(&corpus), Err(Error::DegenerateRange)));
    }

    #[test]
    fn corpus_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let mut corpus = corpus_with_strata(&[(0.4, 3), (2.0, 2)]);
        corpus.curves[0].response = vec![0.0, 1.0 / 3.0, 0.123456789012345];
        corpus.splits = stratified_split(&corpus, (3, 1, 1), 5).unwrap();
        save_corpus(&corpus, dir.path()).unwrap();
        let back = load_corpus(dir.path()).unwrap();
        assert_eq!(back.curves.len(), corpus.curves.len());
        for c in &corpus.curves {
            let b = back.curve(&c.meta.id).unwrap();
            assert_eq!(b.times_s, c.times_s);
            assert_eq!(b.response, c.response);
            assert_eq!(b.meta, c.meta);
        }
        assert_eq!(back.splits, corpus.splits);
    }

    #[test]
    fn missing_curve_file_names_the_id() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = corpus_with_strata(&[(1.0, 2)]);
        save_corpus(&corpus, dir.path()).unwrap();
        fs::remove_file(dir.path().join("c1_1.csv")).unwrap();
        match load_corpus(dir.path()) {
            Err(Error::MissingCurveFile { id, .. }) => assert_eq!(id, "c1_1"),
            other => panic!("expected MissingCurveFile, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = corpus_with_strata(&[(1.0, 1)]);
        save_corpus(&corpus, dir.path()).unwrap();
        let manifest = dir.path().join("manifest.json");
        let mut entries: Vec<ManifestEntry> =
            serde_json::from_slice(&fs::read(&manifest).unwrap()).unwrap();
        let dup = ManifestEntry {
            id: entries[0].id.clone(),
            concentration_mg_per_ml: 1.0,
            file: entries[0].file.clone(),
            split: None,
            source: None,
        };
        entries.push(dup);
        fs::write(&manifest, serde_json::to_vec(&entries).unwrap()).unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(Error::DuplicateId(_))));
    }

    #[test]
    fn curve_parse_errors_carry_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "t_seconds,response\n0,0\n1,abc\n").unwrap();
        match read_curve_csv(&path, CurveMeta::simulated("bad", 1.0)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
