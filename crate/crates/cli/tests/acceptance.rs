//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use cdt_core::datagen::{gen_gaussian_mixture, make_longtail_counts, GaussianMixtureSpec};
use cdt_core::diagnostics::{
    deviation_from_features, deviation_subsample, feature_deviation, spearman, DeviationOptions,
};
use cdt_core::inference::{predict_argmax, predict_tau_norm};
use cdt_core::model::{init_params, MlpArch};
use cdt_core::objectives::{backprop, cdt_loss, TemperatureSchedule};
use cdt_core::trainer::{class_balanced_batches, train, TrainConfig};
use cdt_core::{LabeledDataset, LossSpec, Matrix, MlpParams, Sampling};
use cdt_lab::commands::{cmd_sweep, cmd_train};
use cdt_lab::ExperimentConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

// 1. Count formula.

fn counts() -> Check {
    let p = make_longtail_counts(10, 5000, 100.0).map_err(|e| e.to_string())?;
    let picked: Vec<usize> = [0, 2, 4, 6, 8].iter().map(|&c| p.counts[c]).collect();
    ensure(picked == [5000, 1796, 645, 232, 83], format!("got {picked:?}"))?;
    let mut best = Duration::MAX;
    for _ in 0..200 {
        let t = Instant::now();
        std::hint::black_box(make_longtail_counts(10, 5000, 100.0).unwrap());
        best = best.min(t.elapsed());
    }
    ensure(best < Duration::from_millis(1), format!("took {best:?}"))?;
    Ok(format!("{picked:?}, {best:?} per call"))
}

// 2. Gradient oracle.

fn oracle_loss(p: &MlpParams, x: &Matrix, y: &[usize], a: &[f64], w: &[f64]) -> (f64, f64) {
    let (mut num, mut den, mut kink) = (0.0, 0.0, f64::INFINITY);
    for n in 0..x.rows() {
        let mut h: Vec<f64> = x.row(n).to_vec();
        for layer in &p.layers {
            let pre: Vec<f64> = (0..layer.weight.rows())
                .map(|o| (0..h.len()).map(|i| layer.weight.get(o, i) * h[i]).sum::<f64>() + layer.bias[o])
                .collect();
            kink = pre.iter().fold(kink, |k, v| k.min(v.abs()));
            h = pre.into_iter().map(|v| v.max(0.0)).collect();
        }
        let z: Vec<f64> = (0..p.classifier.rows())
            .map(|c| (0..h.len()).map(|i| p.classifier.get(c, i) * h[i]).sum::<f64>() / a[c])
            .collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        num += w[y[n]] * (lse - z[y[n]]);
        den += w[y[n]];
    }
    (num / den, kink)
}

fn perturbed(p: &MlpParams, index: usize, delta: f64) -> MlpParams {
    let mut q = p.clone();
    let mut k = index;
    for (t, _) in q.tensors_mut() {
        if k < t.len() {
            t[k] += delta;
            break;
        }
        k -= t.len();
    }
    q
}

fn gradient_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut trials, mut worst, mut checked) = (0, 0.0f64, 0usize);
    while trials < 120 {
        let d = rng.random_range(1..=8);
        let c = rng.random_range(2..=5);
        let n = rng.random_range(1..=8);
        let hidden = if rng.random_bool(0.25) {
            vec![]
        } else {
            vec![rng.random_range(1..=8)]
        };
        let arch = MlpArch::new(d, hidden, c).unwrap();
        let mut params = init_params(&arch, rng.random()).unwrap();
        for b in params.layers.iter_mut().flat_map(|l| l.bias.iter_mut()) {
            *b = rng.random_range(-0.5..0.5);
        }
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let counts: Vec<usize> = (0..c).map(|_| rng.random_range(1..1000)).collect();
        let gamma = rng.random_range(0.0..1.0);
        let mut spec = [LossSpec::erm(), LossSpec::cdt(gamma), LossSpec::reweighted(gamma)][trials % 3];
        if rng.random_bool(0.5) {
            spec.sampling = Sampling::ClassBalanced;
        }
        let prepared = spec.prepare(&counts).unwrap();
        let (a, w) = (&prepared.schedule.a, &prepared.class_weights);
        // Skip draws with a pre-activation within reach of the ReLU kink.
        if oracle_loss(&params, &x, &y, a, w).1 < 1e-3 {
            continue;
        }
        let (grads, _) = backprop(&params, &x, &y, &prepared).map_err(|e| e.to_string())?;
        let analytic: Vec<f64> = grads.tensors().flat_map(|(t, _)| t.to_vec()).collect();
        let h = 1e-6;
        for (i, g) in analytic.iter().enumerate() {
            let plus = oracle_loss(&perturbed(&params, i, h), &x, &y, a, w).0;
            let minus = oracle_loss(&perturbed(&params, i, -h), &x, &y, a, w).0;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max((g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-4));
            checked += 1;
        }
        trials += 1;
    }
    let elapsed = start.elapsed();
    ensure(worst < 1e-5, format!("worst relative error {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(30), format!("took {elapsed:?}"))?;
    Ok(format!(
        "{trials} trials, {checked} parameters, worst relative error {worst:.2e}, {elapsed:.2?}"
    ))
}

// 3. Equivalences.

fn equivalences() -> Check {
    let start = Instant::now();
    let spec = GaussianMixtureSpec::random(5, 6, 1.5, 1.0, 3).unwrap();
    let (pool, test) = gen_gaussian_mixture(&spec, 200, 40, 3).unwrap();
    let profile = make_longtail_counts(5, 200, 20.0).unwrap();
    let tr = cdt_core::datagen::subsample_to_profile(&pool, &profile, 3).unwrap();
    let arch = MlpArch::new(6, vec![8], 5).unwrap();
    let cfg = |loss| {
        let mut c = TrainConfig::with_defaults(20, 11, loss);
        c.batch_size = 32;
        c
    };
    let erm = train(&tr, &test, &arch, &cfg(LossSpec::erm())).map_err(|e| e.to_string())?;
    let cdt = train(&tr, &test, &arch, &cfg(LossSpec::cdt(0.0))).map_err(|e| e.to_string())?;
    ensure(
        erm.params == cdt.params && erm.metrics == cdt.metrics,
        "CDT(0) differs from ERM",
    )?;

    let params = init_params(&MlpArch::new(6, vec![8], 5).unwrap(), 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Matrix::from_vec(10_000, 6, (0..60_000).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
    ensure(
        predict_tau_norm(&params, &x, 0.0).unwrap() == predict_argmax(&params, &x).unwrap(),
        "τ=0 differs from argmax",
    )?;

    let (bal, bal_test) = gen_gaussian_mixture(&spec, 60, 20, 4).unwrap();
    let a = train(&bal, &bal_test, &arch, &cfg(LossSpec::erm())).map_err(|e| e.to_string())?;
    let b = train(&bal, &bal_test, &arch, &cfg(LossSpec::reweighted(0.5))).map_err(|e| e.to_string())?;
    ensure(a.params == b.params, "re-weighting on balanced counts differs from ERM")?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("all bitwise equal, {elapsed:.2?}"))
}

// 4. Loss closed forms.

fn closed_forms() -> Check {
    let mut worst = 0.0f64;
    for c in 2..=12 {
        let a = TemperatureSchedule {
            gamma: 0.5,
            a: (0..c).map(|i| 1.0 + i as f64).collect(),
        };
        let l = cdt_loss(&Matrix::zeros(3, c), &[0, c - 1, c / 2], &a, None).unwrap();
        worst = worst.max((l - (c as f64).ln()).abs());
    }
    ensure(worst <= 1e-12, format!("uniform logits off by {worst:e}"))?;
    let uniform = TemperatureSchedule::uniform(2);
    let row = |v: [f64; 2]| Matrix::from_vec(1, 2, v.to_vec()).unwrap();
    let l1 = cdt_loss(&row([3f64.ln(), 0.0]), &[0], &uniform, None).unwrap();
    let l2 = cdt_loss(
        &row([2.0, 2.0]),
        &[0],
        &TemperatureSchedule {
            gamma: 1.0,
            a: vec![2.0, 1.0],
        },
        None,
    )
    .unwrap();
    let e1 = (l1 + (0.75f64).ln()).abs();
    let e2 = (l2 - (1.0 + 1f64.exp()).ln()).abs();
    ensure(
        e1 <= 1e-9 && e2 <= 1e-9,
        format!("worked examples off by {e1:e}, {e2:e}"),
    )?;
    Ok(format!("ln C within {worst:.1e}; examples {l1:.6}, {l2:.6}"))
}

// 5. Deviation metric.

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z
        })
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn deviation() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (c, d) = (3, 5);
    let tr = gaussian(&mut rng, 150, d);
    let te = gaussian(&mut rng, 60, d);
    let ytr: Vec<usize> = (0..150).map(|i| i % c).collect();
    let yte: Vec<usize> = (0..60).map(|i| i % c).collect();

    let same = deviation_from_features(
        &tr,
        &ytr,
        &tr,
        &ytr,
        c,
        &DeviationOptions {
            k: 50,
            rounds: 1,
            seed: 1,
            normalize: true,
        },
    )
    .unwrap();
    ensure(
        same.dis.iter().all(|&v| v == 0.0),
        format!("identical sets gave {:?}", same.dis),
    )?;

    // Single round against a direct transcription.
    let opts = DeviationOptions {
        k: 12,
        rounds: 1,
        seed: 8,
        normalize: true,
    };
    let got = deviation_from_features(&tr, &ytr, &te, &yte, c, &opts).unwrap().dis;
    let unit = |v: &[f64]| {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let mut oracle_err = 0.0f64;
    for (class, &value) in got.iter().enumerate() {
        let rows_tr: Vec<Vec<f64>> = (0..150).filter(|&i| ytr[i] == class).map(|i| unit(tr.row(i))).collect();
        let rows_te: Vec<Vec<f64>> = (0..60).filter(|&i| yte[i] == class).map(|i| unit(te.row(i))).collect();
        let pick = deviation_subsample(8, class, 0, rows_tr.len(), 12);
        let dist = (0..d)
            .map(|j| {
                let a = pick.iter().map(|&p| rows_tr[p][j]).sum::<f64>() / 12.0;
                let b = rows_te.iter().map(|r| r[j]).sum::<f64>() / rows_te.len() as f64;
                (a - b) * (a - b)
            })
            .sum::<f64>()
            .sqrt();
        oracle_err = oracle_err.max((dist - value).abs());
    }
    ensure(oracle_err <= 1e-12, format!("oracle mismatch {oracle_err:e}"))?;

    // Rotation by a Householder reflection composed with a plane rotation.
    let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= vn);
    let (ct, st) = (0.7f64.cos(), 0.7f64.sin());
    let mut q = Matrix::identity(d);
    q.set(0, 0, ct);
    q.set(0, 1, -st);
    q.set(1, 0, st);
    q.set(1, 1, ct);
    let mut hh = Matrix::identity(d);
    for i in 0..d {
        for j in 0..d {
            hh.set(i, j, hh.get(i, j) - 2.0 * v[i] * v[j]);
        }
    }
    let rot = hh.matmul(&q).unwrap();
    let opts = DeviationOptions {
        k: 20,
        rounds: 200,
        seed: 9,
        normalize: true,
    };
    let a = deviation_from_features(&tr, &ytr, &te, &yte, c, &opts).unwrap().dis;
    let b = deviation_from_features(
        &tr.matmul_transposed(&rot).unwrap(),
        &ytr,
        &te.matmul_transposed(&rot).unwrap(),
        &yte,
        c,
        &opts,
    )
    .unwrap()
    .dis;
    let rot_err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    ensure(rot_err <= 1e-10, format!("rotation changed dis by {rot_err:e}"))?;

    // Planted shift, raw features, n = 10^4 per class.
    let n = 10_000;
    let shifts = vec![vec![0.5, 0.0, 0.0], vec![0.0, -0.3, 0.4], vec![0.2, 0.2, 0.2]];
    let spec = GaussianMixtureSpec {
        means: vec![vec![2.0, 0.0, 0.0], vec![0.0, 2.0, 0.0], vec![0.0, 0.0, 2.0]],
        cov_scale: 1.0,
        test_shift: Some(shifts.clone()),
    };
    let (train_set, test_set) = gen_gaussian_mixture(&spec, n, n, 10).unwrap();
    let identity = init_params(&MlpArch::identity(3, 3), 0).unwrap();
    let report = feature_deviation(
        &identity,
        &train_set,
        &test_set,
        &DeviationOptions {
            k: n,
            rounds: 1,
            seed: 0,
            normalize: false,
        },
    )
    .unwrap();
    let mut boot_rng = ChaCha8Rng::seed_from_u64(11);
    let mut detail = Vec::new();
    for (class, shift) in shifts.iter().enumerate() {
        let truth = shift.iter().map(|x| x * x).sum::<f64>().sqrt();
        let (lo, hi) = bootstrap_ci(&train_set, &test_set, class, 1000, &mut boot_rng);
        ensure(
            lo <= truth && truth <= hi,
            format!("class {class}: |shift| {truth} outside [{lo}, {hi}]"),
        )?;
        detail.push(format!("{:.3}∈[{lo:.3},{hi:.3}]", report.dis[class]));
    }
    Ok(format!(
        "oracle {oracle_err:.1e}, rotation {rot_err:.1e}, shifts {}",
        detail.join(" ")
    ))
}

fn class_rows(set: &LabeledDataset, class: usize) -> Vec<&[f64]> {
    (0..set.len())
        .filter(|&i| set.labels()[i] == class)
        .map(|i| set.features().row(i))
        .collect()
}

/// Percentile 99% interval for |mean(train) - mean(test)| of one class.
fn bootstrap_ci(
    train: &LabeledDataset,
    test: &LabeledDataset,
    class: usize,
    reps: usize,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let (tr, te) = (class_rows(train, class), class_rows(test, class));
    let d = train.dim();
    let mean = |rows: &[&[f64]], rng: &mut ChaCha8Rng| {
        let mut acc = vec![0.0; d];
        for _ in 0..rows.len() {
            let r = rows[rng.random_range(0..rows.len())];
            acc.iter_mut().zip(r).for_each(|(a, v)| *a += v);
        }
        acc.into_iter().map(|a| a / rows.len() as f64).collect::<Vec<f64>>()
    };
    let mut stats: Vec<f64> = (0..reps)
        .map(|_| {
            let (a, b) = (mean(&tr, rng), mean(&te, rng));
            a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    let at = |q: f64| stats[((reps - 1) as f64 * q).round() as usize];
    (at(0.005), at(0.995))
}

// 6. Desk-scale phenomenon.

struct SeedResult {
    overfit: bool,
    spearman_negative: bool,
    norms_ordered: bool,
    macro_not_worse: bool,
    minor_better: bool,
    elapsed: Duration,
    line: String,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn phenomenon_seed(erm_cfg: &ExperimentConfig, cdt_cfg: &ExperimentConfig, seed: u64) -> Result<SeedResult, String> {
    let start = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let erm = cmd_train(erm_cfg, seed, a.path()).map_err(|e| format!("{e:#}"))?;
    let sweep = cmd_sweep(cdt_cfg, seed, b.path()).map_err(|e| format!("{e:#}"))?;
    let last = erm.epochs.last().unwrap();
    let c = last.test_accuracy.len();
    let te = &last.test_accuracy;
    let norms = &last.classifier_norms;
    let counts: Vec<f64> = erm.train_counts.iter().map(|&n| n as f64).collect();
    let rho = spearman(&counts, &last.feature_deviation).map_err(|e| e.to_string())?;
    let cdt: Vec<f64> = sweep.final_test.per_class.iter().map(|a| a.unwrap()).collect();
    let half = c / 2;
    let overfit = last.train_accuracy.iter().all(|&a| a >= 0.95) && te[c - 2].max(te[c - 1]) < te[0].min(te[1]);
    let r = SeedResult {
        overfit,
        spearman_negative: rho < 0.0,
        norms_ordered: norms[0].min(norms[1]) > norms[c - 2].max(norms[c - 1]),
        macro_not_worse: mean(&cdt) >= mean(te),
        minor_better: mean(&cdt[half..]) > mean(&te[half..]),
        elapsed: start.elapsed(),
        line: format!(
            "seed {seed}: γ*={} ERM macro {:.4} minor {:.4} | CDT macro {:.4} minor {:.4} | min train {:.3} | ρ {:+.2} | {:.1}s",
            sweep.summary.best_gamma,
            mean(te),
            mean(&te[half..]),
            mean(&cdt),
            mean(&cdt[half..]),
            last.train_accuracy.iter().cloned().fold(1.0, f64::min),
            rho,
            start.elapsed().as_secs_f64(),
        ),
    };
    Ok(r)
}

fn phenomenon() -> Check {
    let start = Instant::now();
    let erm_cfg = ExperimentConfig::load(repo_root().join("configs/longtail_erm.json")).map_err(|e| e.to_string())?;
    let cdt_cfg = ExperimentConfig::load(repo_root().join("configs/longtail_cdt.json")).map_err(|e| e.to_string())?;
    let results: Vec<Result<SeedResult, String>> = (0..10u64)
        .into_par_iter()
        .map(|s| phenomenon_seed(&erm_cfg, &cdt_cfg, s))
        .collect();
    let results: Vec<SeedResult> = results.into_iter().collect::<Result<_, _>>()?;
    for r in &results {
        println!("    {}", r.line);
    }
    let tally = |f: fn(&SeedResult) -> bool| results.iter().filter(|r| f(r)).count();
    let (a, b, c) = (
        tally(|r| r.overfit),
        tally(|r| r.spearman_negative),
        tally(|r| r.norms_ordered),
    );
    let (d_macro, d_minor) = (tally(|r| r.macro_not_worse), tally(|r| r.minor_better));
    let slowest = results.iter().map(|r| r.elapsed).max().unwrap();
    let summary = format!(
        "(a) {a}/10 (b) {b}/10 (c) {c}/10 (d) macro {d_macro}/10 minor {d_minor}/10, slowest seed {:.1}s, total {:.1}s",
        slowest.as_secs_f64(),
        start.elapsed().as_secs_f64()
    );
    ensure(
        a >= 6 && b >= 6 && c >= 6 && d_macro >= 6 && d_minor >= 7,
        summary.clone(),
    )?;
    ensure(slowest < Duration::from_secs(600), format!("{summary}: too slow"))?;
    Ok(summary)
}

// 7. Sampler balance.

/// Upper 1% point of chi-square with 9 degrees of freedom.
const CHI2_9_99: f64 = 21.665994;

fn sampler_balance() -> Check {
    let counts = make_longtail_counts(10, 500, 100.0).unwrap().counts;
    let labels: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
        .collect();
    let n = labels.len();
    let data = LabeledDataset::new(Matrix::zeros(n, 1), labels, 10).unwrap();
    let mut detail = Vec::new();
    for b in [130usize, 128] {
        let mut freq = [0u64; 10];
        let mut batches = 0usize;
        let mut epoch = 0;
        while batches < 10_000 {
            for batch in class_balanced_batches(&data, b, 12, epoch).unwrap() {
                if batches == 10_000 {
                    break;
                }
                for &i in &batch {
                    freq[data.labels()[i]] += 1;
                }
                batches += 1;
            }
            epoch += 1;
        }
        let total: u64 = freq.iter().sum();
        let expected = total as f64 / 10.0;
        let chi2: f64 = freq.iter().map(|&f| (f as f64 - expected).powi(2) / expected).sum();
        ensure(chi2 < CHI2_9_99, format!("B={b}: chi-square {chi2:.3} ≥ {CHI2_9_99}"))?;
        detail.push(format!("B={b} χ²={chi2:.3}"));
    }
    Ok(format!("{} (critical {CHI2_9_99})", detail.join(", ")))
}

// 8. CLI determinism.

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    files
}

fn determinism() -> Check {
    let config = repo_root().join("configs/smoke.json");
    let run = |out: &Path| -> Result<(), String> {
        for cmd in ["gen", "train", "eval", "sweep", "diagnose"] {
            let status = Command::new(env!("CARGO_BIN_EXE_cdtlab"))
                .args([cmd, "--config"])
                .arg(&config)
                .arg("--out")
                .arg(out)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(
                status.status.success(),
                format!("{cmd} failed: {}", String::from_utf8_lossy(&status.stderr)),
            )?;
        }
        Ok(())
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(a.path())?;
    run(b.path())?;
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    ensure(sa == sb, "outputs differ between runs")?;
    Ok(format!("{} files byte-identical across two runs", sa.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 count formula", counts),
        ("2 gradient oracle", gradient_oracle),
        ("3 equivalences", equivalences),
        ("4 loss closed forms", closed_forms),
        ("5 deviation metric", deviation),
        ("6 desk-scale phenomenon", phenomenon),
        ("7 sampler balance", sampler_balance),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
