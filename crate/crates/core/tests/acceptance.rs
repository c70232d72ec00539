//! Acceptance gate: one PASS/FAIL/SKIPPED line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always reach
//! the console. Any FAIL makes the process exit non-zero.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ecgfuse_core::dsp::{normalize_spectrogram, record_spectrograms, DspConfig, Spectrogram, Stft};
use ecgfuse_core::encoder::{BackendSpec, FeatureSource, FeatureVector};
use ecgfuse_core::eval::{auroc, auroc_pairwise, run_experiment, MetricsReport};
use ecgfuse_core::fusion::{
    data_fuse, decision_accumulate, feature_accumulate, feature_concat, FusionInput, FusionStrategy,
    LeadFeatureBundle, LeadPredictionBundle,
};
use ecgfuse_core::ingest::{write_csv, DiagnosisLabel, RecordFormat, Task};
use ecgfuse_core::model::{backward, batch_loss, init_params, ModelDims, ModelMode, Sample};
use ecgfuse_core::pipeline::synthetic::{synthetic_dataset, synthetic_record};
use ecgfuse_core::pipeline::{
    encode_stage, evaluate_stage, ingest_stage, labeled_records, load_cache, train_stage, IngestOptions,
    PipelineConfig, PipelineError,
};
use ecgfuse_core::{LeadId, Prediction};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

enum Outcome {
    Pass(String),
    Fail(String),
    Skipped(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

// ---------------------------------------------------------------- 1

fn naive_stft(x: &[f64], chunk: usize, hop: usize) -> Vec<Vec<f64>> {
    let frames = (x.len() - chunk) / hop + 1;
    let bins = chunk / 2 + 1;
    let hann: Vec<f64> = (0..chunk)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / chunk as f64).cos())
        .collect();
    let mut out = vec![vec![0.0; frames]; bins];
    for f in 0..frames {
        for (k, row) in out.iter_mut().enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for n in 0..chunk {
                let v = x[f * hop + n] * hann[n];
                let a = 2.0 * PI * (k * n) as f64 / chunk as f64;
                re += v * a.cos();
                im -= v * a.sin();
            }
            row[f] = (re * re + im * im).sqrt();
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let cfg = DspConfig::default();
    let rate = 500.0;
    let stft = Stft::<f64>::new(rate, cfg.chunk_s, cfg.chunk_overlap).unwrap();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let scale = r.random_range(0.01..5.0);
        let x: Vec<f64> = (0..500).map(|_| scale * normal(&mut r)).collect();
        let got = stft.transform(&x).unwrap();
        let want = naive_stft(&x, 50, 5);
        if got.shape() != (want.len(), want[0].len()) {
            return Outcome::Fail(format!("shape {:?}", got.shape()));
        }
        for (k, row) in want.iter().enumerate() {
            for (f, &w) in row.iter().enumerate() {
                worst = worst.max((got.get(k, f) - w).abs());
            }
        }
    }

    let rec = synthetic_record("c1", DiagnosisLabel::Normal, 500, 10.0, 3);
    let set = record_spectrograms::<f64>(&rec, &cfg).unwrap();
    let gamma = set.gamma();
    let shapes_ok = set.per_lead.iter().flatten().all(|s| s.shape() == (26, 91));
    check(
        worst <= 1e-9 && gamma == 19 && shapes_ok,
        format!("max |stft - dft| {worst:.2e} over 1000 windows, gamma {gamma}, 26x91 {shapes_ok}"),
    )
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let values: Vec<f64> = (0..26 * 91).map(|_| r.random_range(0.0..10.0f64).powi(3)).collect();
        let f = Spectrogram::from_values(26, 91, values, 10.0, 0.01, false).unwrap();
        let base = normalize_spectrogram(&f, 1e-6).unwrap();
        for alpha in [1e-3, 1.0, 1e3] {
            let scaled = normalize_spectrogram(&f.scaled(alpha), 1e-6).unwrap();
            for (a, b) in scaled.values().iter().zip(base.values()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("max deviation {worst:.2e} over 200 spectrograms x 3 scales"))
}

// ---------------------------------------------------------------- 3

const GRAD_STEP: f64 = 1e-5;
const GRAD_FLOOR: f64 = 1e-8;

fn grad_check(mode: ModelMode, seed: u64) -> f64 {
    let mut r = rng(300 + seed);
    let dims = ModelDims::new(128, 4);
    let p = init_params::<f64>(mode, dims, seed);
    let inputs: Vec<Vec<f64>> = (0..19)
        .map(|_| (0..128).map(|_| normal(&mut r)).collect())
        .collect();
    let target = r.random_range(0..4);
    let batch = [Sample { inputs: &inputs, target }];
    let (_, grads) = backward(&batch, &p).unwrap();
    let analytic = grads.flatten();

    let flat = p.flatten();
    let mut probe = p.clone();
    let mut worst = 0.0f64;
    for i in 0..flat.len() {
        let mut moved = flat.clone();
        moved[i] = flat[i] + GRAD_STEP;
        probe.load_flat(&moved).unwrap();
        let up = batch_loss(&batch, &probe).unwrap();
        moved[i] = flat[i] - GRAD_STEP;
        probe.load_flat(&moved).unwrap();
        let down = batch_loss(&batch, &probe).unwrap();
        let numeric = (up - down) / (2.0 * GRAD_STEP);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
        worst = worst.max(rel);
    }
    worst
}

fn criterion_3() -> Outcome {
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for mode in ModelMode::ALL {
        let w = (0..3).map(|s| grad_check(mode, s)).fold(0.0, f64::max);
        worst = worst.max(w);
        parts.push(format!("{} {w:.1e}", mode.name()));
    }
    check(
        worst <= 1e-4,
        format!("worst relative error per mode over 3 seeds, 19 steps: {}", parts.join(", ")),
    )
}

// ---------------------------------------------------------------- 4

fn feature(values: Vec<f64>, lead: LeadId) -> FeatureVector<f64> {
    FeatureVector {
        values,
        backend_id: "test".into(),
        source: FeatureSource::SingleLead { lead, n: 0 },
    }
}

fn random_simplex(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| r.random_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn criterion_4() -> Outcome {
    let mut r = rng(4);
    let mut failures = Vec::new();

    // data fusion round trip
    let mut tiles_ok = true;
    for _ in 0..20 {
        let specs: BTreeMap<LeadId, Spectrogram<f64>> = LeadId::ALL
            .iter()
            .map(|&l| {
                let v = (0..26 * 91).map(|_| normal(&mut r)).collect();
                (l, Spectrogram::from_values(26, 91, v, 10.0, 0.01, true).unwrap())
            })
            .collect();
        let stacked = data_fuse(&specs, 0).unwrap();
        for (lead, s) in &specs {
            let t = stacked.lead_tile(*lead);
            let same = t.shape() == s.shape()
                && t.values().iter().zip(s.values()).all(|(a, b)| a.to_bits() == b.to_bits());
            tiles_ok &= same;
        }
    }
    if !tiles_ok {
        failures.push("tile round trip".to_string());
    }

    let tau = 64;
    let mut acc_err = 0.0f64;
    let mut norm_err = 0.0f64;
    let mut perm_acc = 0.0f64;
    let mut perm_dec = 0.0f64;
    let mut concat_changed = 0;
    let trials = 200;
    for _ in 0..trials {
        let vecs: Vec<Vec<f64>> = (0..12).map(|_| (0..tau).map(|_| normal(&mut r)).collect()).collect();
        let bundle = LeadFeatureBundle {
            n: 0,
            features: LeadId::ALL.iter().zip(&vecs).map(|(&l, v)| (l, feature(v.clone(), l))).collect(),
        };
        let acc = feature_accumulate(&bundle).unwrap();
        for i in 0..tau {
            let mut s = 0.0;
            for v in &vecs {
                s += v[i];
            }
            acc_err = acc_err.max((acc.values[i] - s / 12.0).abs());
        }

        let cat = feature_concat(&bundle).unwrap();
        let split_ok = cat.values.len() == 12 * tau
            && cat.values.chunks(tau).zip(&vecs).all(|(c, v)| c == v.as_slice());
        if !split_ok {
            failures.push("concat split".to_string());
        }
        let parts: f64 = vecs.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>()).sum();
        let whole: f64 = cat.values.iter().map(|x| x * x).sum();
        norm_err = norm_err.max((whole - parts).abs() / parts);

        let mut perm: Vec<usize> = (0..12).collect();
        while perm.iter().enumerate().all(|(i, &p)| i == p) {
            perm.shuffle(&mut r);
        }
        let permuted = LeadFeatureBundle {
            n: 0,
            features: LeadId::ALL
                .iter()
                .enumerate()
                .map(|(i, &l)| (l, feature(vecs[perm[i]].clone(), l)))
                .collect(),
        };
        let acc_p = feature_accumulate(&permuted).unwrap();
        for (a, b) in acc.values.iter().zip(&acc_p.values) {
            perm_acc = perm_acc.max((a - b).abs());
        }
        if feature_concat(&permuted).unwrap().values != cat.values {
            concat_changed += 1;
        }

        let probs: Vec<Vec<f64>> = (0..12).map(|_| random_simplex(&mut r, 4)).collect();
        let preds = |order: &dyn Fn(usize) -> usize| LeadPredictionBundle {
            index: 0,
            predictions: LeadId::ALL
                .iter()
                .enumerate()
                .map(|(i, &l)| (l, Prediction::from_probs(probs[order(i)].clone())))
                .collect(),
        };
        let d0 = decision_accumulate(&preds(&|i| i)).unwrap();
        let d1 = decision_accumulate(&preds(&|i| perm[i])).unwrap();
        for c in 0..4 {
            let oracle: f64 = probs.iter().map(|p| p[c]).sum::<f64>() / 12.0;
            acc_err = acc_err.max((d0.probs[c] - oracle).abs());
            perm_dec = perm_dec.max((d0.probs[c] - d1.probs[c]).abs());
        }
    }
    if acc_err > 1e-12 {
        failures.push(format!("accumulation error {acc_err:.2e}"));
    }
    if norm_err > 1e-12 {
        failures.push(format!("norm identity error {norm_err:.2e}"));
    }
    if perm_acc > 1e-12 || perm_dec > 1e-12 {
        failures.push(format!("accumulation permutation drift {perm_acc:.2e}/{perm_dec:.2e}"));
    }
    if concat_changed != trials {
        failures.push(format!("concat unchanged under {} permutations", trials - concat_changed));
    }
    let detail = format!(
        "tiles bit-exact {tiles_ok}, accum err {acc_err:.1e}, norm err {norm_err:.1e}, \
         accum perm drift {:.1e}, concat changed {concat_changed}/{trials}",
        perm_acc.max(perm_dec)
    );
    if failures.is_empty() {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(format!("{detail}; {}", failures.join(", ")))
    }
}

// ---------------------------------------------------------------- 5

fn pairwise_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut ties, mut pos, mut neg) = (0.0, 0.0, 0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        if li {
            pos += 1.0;
        } else {
            neg += 1.0;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    ties += 1.0;
                }
            }
        }
    }
    (wins + 0.5 * ties) / (pos * neg)
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let mut mismatches = 0;
    let mut with_ties = 0;
    for _ in 0..500 {
        let n = r.random_range(2..=12);
        let levels = r.random_range(1..=6);
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(0..levels) as f64 / 8.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        labels.shuffle(&mut r);
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            with_ties += 1;
        }
        let fast = auroc(&scores, &labels).unwrap();
        let oracle = pairwise_oracle(&scores, &labels);
        let lib_pairwise = auroc_pairwise(&scores, &labels).unwrap();
        if fast != oracle || lib_pairwise != oracle {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("{mismatches} mismatches over 500 instances ({with_ties} with tied scores)"),
    )
}

// ---------------------------------------------------------------- 6 and 8

fn synthetic_config() -> PipelineConfig {
    PipelineConfig {
        backend: BackendSpec::Fallback { tau: 64, seed: 0 },
        fusion_input: FusionInput::PerLead,
        fusion: FusionStrategy::FeatureConcat,
        model: ModelMode::Joint,
        task: Task::Onset,
        folds: 4,
        ..PipelineConfig::default()
    }
}

struct SyntheticRun {
    report: MetricsReport,
    json: Vec<u8>,
    cache: PathBuf,
    seconds: f64,
}

fn synthetic_run(root: &Path) -> Result<SyntheticRun, PipelineError> {
    let start = Instant::now();
    let records = root.join("records");
    std::fs::create_dir_all(&records).unwrap();
    for rec in synthetic_dataset(200, 11) {
        write_csv(&rec, &records.join(format!("{}.csv", rec.record_id()))).unwrap();
    }
    let cfg = synthetic_config();
    let manifest = ingest_stage(&records, RecordFormat::Csv, &IngestOptions::default(), &root.join("manifest.json"))?;
    let cache = root.join("cache");
    encode_stage(&manifest, &cfg.upstream(), &cache)?;
    let ckpt = root.join("model.ckpt");
    train_stage(&cache, &cfg, false, &ckpt)?;
    let report_path = root.join("metrics.json");
    let report = evaluate_stage(&ckpt, &cache, &report_path)?;
    let json = std::fs::read(&report_path).unwrap();
    Ok(SyntheticRun {
        report,
        json,
        cache,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn shuffled_control(cache: &Path) -> Result<Vec<f64>, PipelineError> {
    let cfg = synthetic_config();
    let index = load_cache(cache)?;
    let records = labeled_records(cache, &index, cfg.fusion, cfg.task)?;
    let mut out = Vec::new();
    for seed in 0..5u64 {
        let mut targets: Vec<usize> = records.iter().map(|r| r.target).collect();
        targets.shuffle(&mut rng(600 + seed));
        let shuffled: Vec<_> = records
            .iter()
            .zip(targets)
            .map(|(r, t)| {
                let mut r = r.clone();
                r.target = t;
                r
            })
            .collect();
        let mut exp = cfg.experiment();
        exp.seed = seed;
        let report = run_experiment(&shuffled, &exp)?;
        out.push(report.aggregate.auroc_macro.unwrap_or(f64::NAN));
    }
    Ok(out)
}

fn criteria_6_and_8() -> (Outcome, Outcome) {
    let first_dir = tempfile::tempdir().unwrap();
    let first = match synthetic_run(first_dir.path()) {
        Ok(r) => r,
        Err(e) => {
            let f = format!("pipeline error: {e}");
            return (Outcome::Fail(f.clone()), Outcome::Fail(f));
        }
    };
    let macro_auroc = first.report.aggregate.auroc_macro.unwrap_or(f64::NAN);
    let control_start = Instant::now();
    let c6 = match shuffled_control(&first.cache) {
        Ok(control) => {
            let mean = control.iter().sum::<f64>() / control.len() as f64;
            let secs = first.seconds + control_start.elapsed().as_secs_f64();
            let listed: Vec<String> = control.iter().map(|v| format!("{v:.3}")).collect();
            check(
                macro_auroc >= 0.95 && (0.45..=0.55).contains(&mean) && secs < 600.0,
                format!(
                    "macro AUROC {macro_auroc:.4}; shuffled-label mean {mean:.3} [{}]; {secs:.0} s",
                    listed.join(", ")
                ),
            )
        }
        Err(e) => Outcome::Fail(format!("macro AUROC {macro_auroc:.4}; control error: {e}")),
    };

    let second_dir = tempfile::tempdir().unwrap();
    let c8 = match synthetic_run(second_dir.path()) {
        Ok(second) => check(
            second.json == first.json,
            format!("metrics JSON {} bytes, identical {}", first.json.len(), second.json == first.json),
        ),
        Err(e) => Outcome::Fail(format!("second run error: {e}")),
    };
    (c6, c8)
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let (Ok(ptb), Ok(onnx)) = (std::env::var("ECGFUSE_PTB_DIR"), std::env::var("ECGFUSE_MNASNET_ONNX")) else {
        return Outcome::Skipped("set ECGFUSE_PTB_DIR and ECGFUSE_MNASNET_ONNX to run".into());
    };
    let run = || -> Result<f64, PipelineError> {
        let work = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            backend: format!("onnx-mnasnet:{onnx}").parse().map_err(PipelineError::Config)?,
            fusion_input: FusionInput::Stacked,
            fusion: FusionStrategy::Data,
            model: ModelMode::Joint,
            task: Task::Binary,
            folds: 10,
            ..PipelineConfig::default()
        };
        let manifest = ingest_stage(
            Path::new(&ptb),
            RecordFormat::Wfdb,
            &cfg.ingest,
            &work.path().join("manifest.json"),
        )?;
        let cache = work.path().join("cache");
        encode_stage(&manifest, &cfg.upstream(), &cache)?;
        let ckpt = work.path().join("model.ckpt");
        train_stage(&cache, &cfg, false, &ckpt)?;
        let report = evaluate_stage(&ckpt, &cache, &work.path().join("metrics.json"))?;
        Ok(report.aggregate.auroc_per_class[0].unwrap_or(f64::NAN))
    };
    match run() {
        Ok(a) => check(a >= 0.85, format!("binary AUROC {a:.4}")),
        Err(e) => Outcome::Fail(format!("pipeline error: {e}")),
    }
}

// ----------------------------------------------------------------

fn main() {
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut timed = |n, name, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        results.push((n, name, o, t.elapsed().as_secs_f64()));
    };
    timed(1, "dsp oracle", &criterion_1);
    timed(2, "normalization law", &criterion_2);
    timed(3, "gradient suite", &criterion_3);
    timed(4, "fusion algebra", &criterion_4);
    timed(5, "auroc oracle", &criterion_5);
    timed(7, "public-data check", &criterion_7);
    let t = Instant::now();
    let (c6, c8) = criteria_6_and_8();
    let elapsed = t.elapsed().as_secs_f64();
    results.push((6, "synthetic end-to-end", c6, elapsed));
    results.push((8, "determinism", c8, elapsed));
    results.sort_by_key(|r| r.0);

    let mut failed = false;
    for (n, name, outcome, secs) in &results {
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed = true;
                ("FAIL", d)
            }
            Outcome::Skipped(d) => ("SKIPPED", d),
        };
        println!("criterion {n} {name}: {tag} ({detail}) [{secs:.1} s]");
    }
    if failed {
        std::process::exit(1);
    }
}
