//! Seeded synthetic matrix generators for tests, benchmarks and the
//! estimation-quality corpus.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, LogNormal};

use crate::csr::CsrMatrix;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nonzero value in `[-2, -0.5] ∪ [0.5, 2]`.
fn value(rng: &mut ChaCha8Rng) -> f64 {
    let v: f64 = rng.random_range(0.5..2.0);
    if rng.random_bool(0.5) {
        v
    } else {
        -v
    }
}

fn assemble(nrows: usize, ncols: usize, rows: Vec<Vec<u32>>, rng: &mut ChaCha8Rng) -> CsrMatrix {
    let mut row_ptr = Vec::with_capacity(nrows + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    for mut r in rows {
        r.sort_unstable();
        r.dedup();
        cols.extend_from_slice(&r);
        row_ptr.push(cols.len());
    }
    let vals = (0..cols.len()).map(|_| value(rng)).collect();
    CsrMatrix::from_parts(nrows, ncols, row_ptr, cols, vals).expect("generator emits canonical rows")
}

/// Each entry present independently with probability `density`.
pub fn uniform(nrows: usize, ncols: usize, density: f64, seed: u64) -> CsrMatrix {
    let mut rng = rng(seed);
    let dist = Binomial::new(ncols as u64, density.clamp(0.0, 1.0)).expect("valid density");
    let rows = (0..nrows)
        .map(|_| {
            let n = dist.sample(&mut rng) as usize;
            index::sample(&mut rng, ncols, n.min(ncols))
                .into_iter()
                .map(|c| c as u32)
                .collect()
        })
        .collect();
    assemble(nrows, ncols, rows, &mut rng)
}

/// Square matrix with `per_row` random entries inside `[i - half_width, i + half_width]`.
pub fn banded(n: usize, per_row: usize, half_width: usize, seed: u64) -> CsrMatrix {
    let mut rng = rng(seed);
    let rows = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half_width);
            let hi = (i + half_width + 1).min(n);
            let width = hi - lo;
            index::sample(&mut rng, width, per_row.min(width))
                .into_iter()
                .map(|c| (lo + c) as u32)
                .collect()
        })
        .collect();
    assemble(n, n, rows, &mut rng)
}

/// Diagonal matrix with random nonzero values.
pub fn diagonal(n: usize, seed: u64) -> CsrMatrix {
    let mut rng = rng(seed);
    let rows = (0..n).map(|i| vec![i as u32]).collect();
    assemble(n, n, rows, &mut rng)
}

/// Row lengths follow a discrete power law `P(len) ∝ len^-exponent` on
/// `[1, max_len]`; columns are uniform. Roughly `empty_frac` of rows stay empty.
pub fn power_law(
    nrows: usize,
    ncols: usize,
    max_len: usize,
    exponent: f64,
    empty_frac: f64,
    seed: u64,
) -> CsrMatrix {
    let mut rng = rng(seed);
    let max_len = max_len.clamp(1, ncols.max(1));
    let weights: Vec<f64> = (1..=max_len).map(|l| (l as f64).powf(-exponent)).collect();
    let total: f64 = weights.iter().sum();
    let rows = (0..nrows)
        .map(|_| {
            if ncols == 0 || rng.random_bool(empty_frac.clamp(0.0, 1.0)) {
                return Vec::new();
            }
            let mut u = rng.random::<f64>() * total;
            let mut len = max_len;
            for (l, w) in weights.iter().enumerate() {
                if u < *w {
                    len = l + 1;
                    break;
                }
                u -= w;
            }
            index::sample(&mut rng, ncols, len)
                .into_iter()
                .map(|c| c as u32)
                .collect()
        })
        .collect();
    assemble(nrows, ncols, rows, &mut rng)
}

/// Pair whose every output row has exactly `width` distinct columns built
/// from `copies * width` products: each row of A selects all `copies` rows of
/// B, and every row of B covers columns `0..width`.
pub fn uniform_compression_pair(nrows: usize, copies: usize, width: usize, seed: u64) -> (CsrMatrix, CsrMatrix) {
    let mut rng = rng(seed);
    let a_rows = (0..nrows).map(|_| (0..copies as u32).collect()).collect();
    let a = assemble(nrows, copies, a_rows, &mut rng);
    let b_rows = (0..copies).map(|_| (0..width as u32).collect()).collect();
    let b = assemble(copies, width, b_rows, &mut rng);
    (a, b)
}

/// Pair with a constant number of products per output row and output row
/// sizes drawn from a log-normal distribution with mean `mean_size` and
/// coefficient of variation `cv`.
///
/// B row `j` covers columns `j..j + window`. Row `i` of A selects `fan_in`
/// B rows whose starts are separated by gaps in `1..=window`, so its output
/// is one contiguous run of `window + Σgaps` columns while its product count
/// stays at `fan_in * window`. Sizes are clamped to the reachable range
/// `[window + fan_in - 1, fan_in * window]`. Returns the pair and the
/// realised output row sizes.
pub fn controlled_cv_pair(
    nrows: usize,
    fan_in: usize,
    window: usize,
    mean_size: f64,
    cv: f64,
    seed: u64,
) -> (CsrMatrix, CsrMatrix, Vec<usize>) {
    assert!(fan_in >= 2 && window >= 1);
    let mut rng = rng(seed);
    let sigma2 = (1.0 + cv * cv).ln();
    let dist = LogNormal::new(mean_size.ln() - sigma2 / 2.0, sigma2.sqrt()).expect("finite parameters");
    let gaps = fan_in - 1;
    let span_cap = fan_in * window;
    let n_b = nrows + span_cap;
    let mut sizes = Vec::with_capacity(nrows);
    let a_rows: Vec<Vec<u32>> = (0..nrows)
        .map(|_| {
            let target: f64 = dist.sample(&mut rng);
            let total_gap = (target.round() as i64 - window as i64).clamp(gaps as i64, (gaps * window) as i64) as usize;
            sizes.push(window + total_gap);
            let start = rng.random_range(0..n_b - total_gap);
            let (base, extra) = (total_gap / gaps, total_gap % gaps);
            let mut pos = start;
            let mut row = Vec::with_capacity(fan_in);
            row.push(pos as u32);
            for g in 0..gaps {
                pos += base + usize::from(g < extra);
                row.push(pos as u32);
            }
            row
        })
        .collect();
    let a = assemble(nrows, n_b, a_rows, &mut rng);
    let b_rows = (0..n_b)
        .map(|j| (j as u32..(j + window) as u32).collect())
        .collect();
    let b = assemble(n_b, n_b + window, b_rows, &mut rng);
    (a, b, sizes)
}

/// A named matrix in a synthetic corpus.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub matrix: CsrMatrix,
}

/// Square matrices whose `A·A` has input expansion ratio of at least 8 and a
/// spread of output row sizes. Deterministic in `seed`.
pub fn estimation_corpus(count: usize, seed: u64) -> Vec<CorpusEntry> {
    let mut rng = rng(seed);
    (0..count)
        .map(|idx| {
            let s = rng.random::<u64>();
            let n = rng.random_range(1500..4000);
            let matrix = match idx % 3 {
                0 => {
                    let per_row = rng.random_range(10..40);
                    let half = per_row * rng.random_range(2..12);
                    banded(n, per_row, half, s)
                }
                1 => {
                    let per_row = rng.random_range(12..32);
                    uniform(n, n, per_row as f64 / n as f64, s)
                }
                _ => {
                    let max_len = rng.random_range(60..160);
                    power_law(n, n, max_len, 0.6, 0.0, s)
                }
            };
            CorpusEntry {
                name: format!("synth_{idx:02}"),
                matrix,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_canonical_and_deterministic() {
        let ms = [
            uniform(40, 30, 0.1, 1),
            banded(50, 5, 8, 2),
            diagonal(10, 3),
            power_law(60, 70, 20, 1.5, 0.2, 4),
        ];
        for m in &ms {
            assert!(m.validate().is_empty());
        }
        assert!(uniform(40, 30, 0.1, 1).bitwise_eq(&ms[0]));
    }

    #[test]
    fn compression_pair_shape() {
        let (a, b) = uniform_compression_pair(5, 10, 7, 0);
        let c = crate::oracle::reference_row_nnz(&a, &b).unwrap();
        assert!(c.iter().all(|&n| n == 7));
        assert_eq!(a.nnz() * 7, 5 * 70);
    }

    #[test]
    fn controlled_cv_sizes_match_oracle() {
        let (a, b, sizes) = controlled_cv_pair(200, 8, 16, 60.0, 0.5, 5);
        let truth = crate::oracle::reference_row_nnz(&a, &b).unwrap();
        assert_eq!(truth, sizes);
        let products = crate::oracle::reference_row_products(&a, &b);
        assert!(products.iter().all(|&p| p == 8 * 16));
    }

    #[test]
    fn controlled_cv_reaches_target_spread() {
        for cv in [0.5, 1.0] {
            let (_, _, sizes) = controlled_cv_pair(20_000, 128, 128, 2000.0, cv, 9);
            let xs: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
            let (mean, std) = crate::analysis::mean_and_std(&xs);
            assert!((mean / 2000.0 - 1.0).abs() < 0.1, "{mean}");
            assert!((std / mean - cv).abs() < 0.1 * cv, "cv {cv}: {}", std / mean);
        }
    }
}
