#![allow(dead_code)]

use ortree::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random instance with some duplicated feature values and a non-constant target.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Dataset {
    loop {
        let levels: Vec<u32> = (0..p).map(|_| rng.random_range(2..=n.max(2) as u32 * 2)).collect();
        let cols: Vec<Vec<f64>> = levels
            .iter()
            .map(|&k| (0..n).map(|_| f64::from(rng.random_range(0..k)) * 0.5).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let base = if cols[0][i] > 1.0 { 3.0 } else { 0.0 };
                base + f64::from(rng.random_range(0..20u32)) * 0.25
            })
            .collect();
        let names = (0..p).map(|j| format!("x{j}")).collect();
        if let Ok(d) = Dataset::from_raw_columns(names, "y".into(), cols, y) {
            return d;
        }
    }
}

/// Two-pass sum of squared deviations.
pub fn sse(ys: &[f64]) -> f64 {
    if ys.is_empty() {
        return 0.0;
    }
    let m = ys.iter().sum::<f64>() / ys.len() as f64;
    ys.iter().map(|y| (y - m) * (y - m)).sum()
}

/// Minimum depth-2 objective by direct enumeration: every root split, and
/// for each child every split or none, each scored from scratch.
pub fn brute_force_depth2(d: &Dataset, lambda: f64) -> f64 {
    use ortree::Rows;
    let n = d.n_samples();
    let l_hat = sse(d.targets());
    let feats = d.splittable_features();
    let subset_cost = |rows: &[usize]| -> f64 {
        let ys: Vec<f64> = rows.iter().map(|&i| d.targets()[i]).collect();
        let mut best = sse(&ys) / l_hat;
        for &k in &feats {
            for &t in &d.sorted_values(k)[1..] {
                let (l, r): (Vec<f64>, Vec<f64>) = {
                    let mut l = Vec::new();
                    let mut r = Vec::new();
                    for &i in rows {
                        if d.value(i, k) < t {
                            l.push(d.targets()[i]);
                        } else {
                            r.push(d.targets()[i]);
                        }
                    }
                    (l, r)
                };
                best = best.min(lambda + (sse(&l) + sse(&r)) / l_hat);
            }
        }
        best
    };
    let all: Vec<usize> = (0..n).collect();
    let mut best = sse(d.targets()) / l_hat;
    for &j in &feats {
        for &t in &d.sorted_values(j)[1..] {
            let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| d.value(i, j) < t);
            best = best.min(lambda + subset_cost(&l) + subset_cost(&r));
        }
    }
    best
}
