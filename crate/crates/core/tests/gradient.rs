//! Backprop against central finite differences of an independently written
//! forward pass and loss.

use cdt_core::model::{init_params, MlpArch};
use cdt_core::objectives::backprop;
use cdt_core::{LossSpec, Matrix, MlpParams, Sampling};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Loss by explicit loops: ReLU hidden layers, bias-free classifier,
/// weighted mean of -log softmax(z / a)[y].
fn oracle_loss(p: &MlpParams, x: &Matrix, y: &[usize], a: &[f64], w: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for n in 0..x.rows() {
        let mut h: Vec<f64> = x.row(n).to_vec();
        for layer in &p.layers {
            h = (0..layer.weight.rows())
                .map(|o| {
                    let s: f64 = (0..h.len()).map(|i| layer.weight.get(o, i) * h[i]).sum::<f64>() + layer.bias[o];
                    s.max(0.0)
                })
                .collect();
        }
        let z: Vec<f64> = (0..p.classifier.rows())
            .map(|c| (0..h.len()).map(|i| p.classifier.get(c, i) * h[i]).sum::<f64>() / a[c])
            .collect();
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        num += w[y[n]] * (lse - z[y[n]]);
        den += w[y[n]];
    }
    num / den
}

fn min_abs_preactivation(p: &MlpParams, x: &Matrix) -> f64 {
    let mut best = f64::INFINITY;
    for n in 0..x.rows() {
        let mut h: Vec<f64> = x.row(n).to_vec();
        for layer in &p.layers {
            let pre: Vec<f64> = (0..layer.weight.rows())
                .map(|o| (0..h.len()).map(|i| layer.weight.get(o, i) * h[i]).sum::<f64>() + layer.bias[o])
                .collect();
            best = pre.iter().fold(best, |b, v| b.min(v.abs()));
            h = pre.into_iter().map(|v| v.max(0.0)).collect();
        }
    }
    best
}

fn flat(p: &MlpParams) -> Vec<f64> {
    p.tensors().flat_map(|(t, _)| t.to_vec()).collect()
}

fn set_flat(p: &mut MlpParams, i: usize, v: f64) {
    let mut k = i;
    for (t, _) in p.tensors_mut() {
        if k < t.len() {
            t[k] = v;
            return;
        }
        k -= t.len();
    }
    panic!("index out of range");
}

fn trial(rng: &mut ChaCha8Rng, hidden: Vec<usize>) -> f64 {
    let d = rng.random_range(1..=8);
    let c = rng.random_range(2..=5);
    let n = rng.random_range(1..=6);
    let arch = MlpArch::new(d, hidden, c).unwrap();
    let mut params = init_params(&arch, rng.random()).unwrap();
    for b in params.layers.iter_mut().flat_map(|l| l.bias.iter_mut()) {
        *b = rng.random_range(-0.5..0.5);
    }
    let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
    let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    // ReLU kinks make the finite difference meaningless; redraw instead.
    if min_abs_preactivation(&params, &x) < 1e-3 {
        return trial(rng, params.arch.hidden.clone());
    }
    let counts: Vec<usize> = (0..c).map(|_| rng.random_range(1..500)).collect();
    let gamma = rng.random_range(0.0..1.5);
    let mut spec = match rng.random_range(0..3) {
        0 => LossSpec::erm(),
        1 => LossSpec::cdt(gamma),
        _ => LossSpec::reweighted(gamma),
    };
    if rng.random_bool(0.5) {
        spec.sampling = Sampling::ClassBalanced;
    }
    let prepared = spec.prepare(&counts).unwrap();
    let a = prepared.schedule.a.clone();
    let w = prepared.class_weights.clone();

    let (grads, loss) = backprop(&params, &x, &y, &prepared).unwrap();
    assert!((loss - oracle_loss(&params, &x, &y, &a, &w)).abs() < 1e-12 * loss.abs().max(1.0));
    let analytic = flat(&grads);
    let base = flat(&params);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, &v) in base.iter().enumerate() {
        let mut plus = params.clone();
        set_flat(&mut plus, i, v + h);
        let mut minus = params.clone();
        set_flat(&mut minus, i, v - h);
        let numeric = (oracle_loss(&plus, &x, &y, &a, &w) - oracle_loss(&minus, &x, &y, &a, &w)) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-4);
        worst = worst.max(rel);
    }
    worst
}

#[test]
fn backprop_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for t in 0..150 {
        let hidden = match t % 3 {
            0 => vec![],
            1 => vec![rng.random_range(1..=8)],
            _ => vec![rng.random_range(1..=8), rng.random_range(1..=8)],
        };
        let worst = trial(&mut rng, hidden);
        assert!(worst < 1e-5, "trial {t}: relative error {worst:e}");
    }
}
