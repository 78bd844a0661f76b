//! Straightforward reference implementations used as oracles by the
//! integration tests. They deliberately share no code with the library.

#![allow(dead_code)]

use std::collections::HashMap;

/// Min–max quantization into `bins` codes; a constant band maps to code 0.
pub fn codes(values: &[f64], bins: usize) -> Vec<usize> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|&v| {
            if hi == lo {
                0
            } else {
                (((v - lo) / (hi - lo) * bins as f64).floor() as usize).min(bins - 1)
            }
        })
        .collect()
}

/// Shannon entropy in bits of the 256-bin quantization of `values`.
pub fn entropy(values: &[f64]) -> f64 {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for c in codes(values, 256) {
        *counts.entry(c).or_default() += 1;
    }
    let n = values.len() as f64;
    -counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Population Pearson coefficient; 0 if either band is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Full correlation matrix with the convention that a constant band
/// correlates with nothing, itself included.
pub fn correlation_matrix(bands: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let l = bands.len();
    let constant: Vec<bool> = bands.iter().map(|b| b.iter().all(|&v| v == b[0])).collect();
    (0..l)
        .map(|i| {
            (0..l)
                .map(|j| {
                    if constant[i] || constant[j] {
                        0.0
                    } else if i == j {
                        1.0
                    } else {
                        pearson(&bands[i], &bands[j])
                    }
                })
                .collect()
        })
        .collect()
}

pub fn mie(entropies: &[f64], subset: &[usize]) -> f64 {
    subset.iter().map(|&b| entropies[b]).sum::<f64>() / subset.len() as f64
}

/// Mean over all ordered pairs of the subset, diagonal included.
pub fn mean_corr(corr: &[Vec<f64>], subset: &[usize]) -> f64 {
    let mut s = 0.0;
    for &i in subset {
        for &j in subset {
            s += corr[i][j];
        }
    }
    s / (subset.len() * subset.len()) as f64
}

/// Best score over all `k`-subsets of `0..n` by bitmask enumeration.
pub fn brute_force_best(n: usize, k: usize, score: impl Fn(&[usize]) -> f64, maximize: bool) -> f64 {
    let mut best = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let subset: Vec<usize> = (0..n).filter(|&b| mask & (1 << b) != 0).collect();
        let s = score(&subset);
        best = if maximize { best.max(s) } else { best.min(s) };
    }
    best
}
