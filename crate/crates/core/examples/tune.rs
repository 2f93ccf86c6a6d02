// Temporary tuning harness for the scaled end-to-end study.
use std::time::Instant;

use equilcast_core::datahub::{fit_normalizer, stratified_split, Corpus, Split};
use equilcast_core::ensemble::{examples_from_curves, train_ensemble};
use equilcast_core::metrics::{evaluate_dataset, StoppingPolicy};
use equilcast_core::neural::{NetworkConfig, TrainConfig};
use equilcast_core::simkit::{
    add_noise, sample_params, simulate_response, ExperimentConditions, NoiseSpec,
    ParameterDistribution,
};
use equilcast_core::ResponseCurve;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONCENTRATIONS: [f64; 13] = [
    40.0, 20.0, 10.0, 4.0, 2.0, 1.0, 0.4, 0.2, 0.1, 0.04, 0.02, 0.002, 0.0,
];

fn build_corpus(per_conc: usize, steps: usize, seed: u64) -> Corpus {
    let mean = [2.5, -2.5, -6.0, 25.0f64.log10(), -10.0, 4.9f64.log10()];
    let sd = [0.4, 0.5, 0.4, 0.05, 0.3, 0.03];
    let dist = ParameterDistribution::diagonal(mean, sd);
    let dt = 13.0 * 3600.0 / (steps - 1) as f64;

    let mut clean = Vec::new();
    for (g, &conc) in CONCENTRATIONS.iter().enumerate() {
        let conditions = ExperimentConditions { c_bulk_mg_per_ml: conc, film_thickness_um: 3.63 };
        let params = sample_params(&dist, per_conc, seed + g as u64, &conditions).unwrap();
        for (j, p) in params.iter().enumerate() {
            let mut c = simulate_response(p, steps, dt, 24).unwrap();
            c.meta.id = format!("c{}_{:02}", conc, j);
            clean.push(c);
        }
    }
    let mut finals: Vec<f64> = clean.iter().map(|c| c.final_response().abs()).filter(|a| *a > 0.0).collect();
    finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let fallback = finals[finals.len() / 2];

    let mut rng = ChaCha8Rng::seed_from_u64(seed + 999);
    let curves: Vec<ResponseCurve> = clean
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let snr = (rng.random_range(2.0f64.ln()..100.0f64.ln())).exp();
            let reference = if c.final_response().abs() > 0.0 { None } else { Some(fallback) };
            add_noise(c, &NoiseSpec { snr, seed: seed + 10_000 + i as u64 }, reference).unwrap()
        })
        .collect();
    let mut corpus = Corpus::from_curves(curves).unwrap();
    corpus.splits = stratified_split(&corpus, (3, 1, 1), seed).unwrap();
    corpus
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let m: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(3);
    let epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(10);
    let lr: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1e-2);
    let batch: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(16);

    let t0 = Instant::now();
    let corpus = build_corpus(20, 250, 42);
    println!("corpus: {} curves in {:.1?}", corpus.curves.len(), t0.elapsed());

    let normalizer = fit_normalizer(&corpus).unwrap();
    let net = NetworkConfig {
        lstm_layer_sizes: vec![16, 64],
        input_dim: 1,
        sequence_length: 250,
        variance_floor: 1e-6,
    };
    let tc = TrainConfig { epochs, batch_size: batch, learning_rate: lr, ..TrainConfig::default() };
    let train = examples_from_curves(&corpus.split_curves(Split::Train), &normalizer, 250).unwrap();
    let val = examples_from_curves(&corpus.split_curves(Split::Validation), &normalizer, 250).unwrap();
    println!("train/val/test: {}/{}/{}", train.len(), val.len(), corpus.split_curves(Split::Test).len());

    let t1 = Instant::now();
    let ensemble = train_ensemble(&train, &val, &net, &tc, m, 7, normalizer.clone()).unwrap();
    println!("trained M={m} epochs={epochs} lr={lr} batch={batch} in {:.1?}", t1.elapsed());
    let nlls: Vec<f64> = ensemble.logs.iter().map(|l| l.best_val_nll).collect();
    println!("best val NLLs: {:?}", nlls);

    let policy = StoppingPolicy {
        variance_threshold: 1e-3,
        stability_window: 10,
        stability_band: 0.05,
        max_cutoff_s: 13.0 * 3600.0,
    };
    let test = corpus.split_curves(Split::Test);
    let (_, summary) = evaluate_dataset(&ensemble.model, &normalizer, &test, &policy).unwrap();
    println!(
        "TEST: mean FOI {:?} median FOI {:?} defined {}/{}",
        summary.mean_foi, summary.median_foi, summary.n_defined_foi, summary.n_curves
    );
}
