#![allow(dead_code)]

use ctcount::Margins;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Splits `total` into `parts` positive integers, uniformly over compositions.
pub fn composition(rng: &mut ChaCha8Rng, total: u64, parts: usize) -> Vec<u64> {
    assert!(total >= parts as u64);
    // choose parts-1 distinct cut points in 1..total
    let mut cuts: Vec<u64> = Vec::with_capacity(parts + 1);
    while cuts.len() < parts - 1 {
        let c = rng.random_range(1..total);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.push(0);
    cuts.push(total);
    cuts.sort_unstable();
    cuts.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Random feasible margins with at most `max_dim` rows and columns and total
/// at most `max_total`.
pub fn small_margins(rng: &mut ChaCha8Rng, max_dim: usize, max_total: u64) -> Margins {
    let m = rng.random_range(1..=max_dim);
    let n = rng.random_range(1..=max_dim);
    let lo = m.max(n) as u64;
    let total = rng.random_range(lo..=max_total.max(lo));
    Margins::new(&composition(rng, total, m), &composition(rng, total, n)).unwrap()
}

/// Splits `total` into `parts` integers roughly proportional to random
/// weights drawn from `[1, spread]`.
pub fn spread_split(rng: &mut ChaCha8Rng, total: u64, parts: usize, spread: f64) -> Vec<u64> {
    let w: Vec<f64> = (0..parts).map(|_| rng.random_range(1.0..=spread)).collect();
    let sum: f64 = w.iter().sum();
    let mut out: Vec<u64> = w.iter().map(|x| (x / sum * total as f64).floor() as u64).collect();
    let mut left = total - out.iter().sum::<u64>();
    let mut i = 0;
    while left > 0 {
        out[i % parts] += 1;
        left -= 1;
        i += 1;
    }
    out
}

/// Margins whose entries differ by at most a factor of `spread` on each side.
pub fn smooth_margins(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64, spread: f64) -> Margins {
    let total = (density * (m * n) as f64).round() as u64;
    Margins::new(
        &spread_split(rng, total, m, spread),
        &spread_split(rng, total, n, spread),
    )
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}
