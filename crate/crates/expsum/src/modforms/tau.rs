//! Coefficients of the weight-12 discriminant cusp form.
//!
//! With x = e(z), the form is x·Π_{n≥1}(1−x^n)^24 = Σ_{n≥1} tau(n)·x^n.
//! The cube of the product is the sparse series
//! Σ_{k≥0} (−1)^k (2k+1) x^{k(k+1)/2}, so the plain 24th power is its
//! 8th power: one sparse square followed by six dense-by-sparse
//! multiplies, each touching O(√limit) terms per output coefficient.
//! All arithmetic is exact i128 with overflow checks.

use rayon::prelude::*;

/// Upper bound on table length; the checked i128 arithmetic below has
/// orders of magnitude of headroom at this size.
pub const TAU_LIMIT: usize = 1_000_000;

/// tau(1..=limit), exact. `out[n-1]` is tau(n).
pub fn tau_table(limit: usize) -> Vec<i128> {
    assert!(limit >= 1 && limit <= TAU_LIMIT, "tau table length {limit} out of range");
    let cube = eta_cubed(limit);
    // sparse square: coefficients of the 6th power of the product
    let mut acc = vec![0i128; limit];
    for &(e1, c1) in &cube {
        for &(e2, c2) in &cube {
            let e = e1 + e2;
            if e < limit {
                acc[e] += c1 * c2;
            } else if e2 >= e1 {
                break;
            }
        }
    }
    // six more cubes reach the 24th power; the leading x of the
    // discriminant shifts indices by one, so tau(n) sits at index n−1
    for _ in 0..6 {
        acc = sparse_mul(&acc, &cube, limit);
    }
    acc
}

/// Deligne-normalized coefficients lambda(n) = tau(n)/n^{11/2}, so that
/// |lambda(n)| ≤ d(n).
pub fn tau_normalized(limit: usize) -> Vec<f64> {
    tau_table(limit)
        .iter()
        .enumerate()
        .map(|(i, &t)| t as f64 / ((i + 1) as f64).powf(5.5))
        .collect()
}

/// Π(1−x^n)³ = Σ_{k≥0} (−1)^k (2k+1) x^{k(k+1)/2}, truncated below
/// `len` and sorted by exponent.
fn eta_cubed(len: usize) -> Vec<(usize, i128)> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let e = k * (k + 1) / 2;
        if e >= len {
            break;
        }
        let c = (2 * k + 1) as i128;
        out.push((e, if k % 2 == 0 { c } else { -c }));
        k += 1;
    }
    out
}

/// Dense-by-sparse truncated product; `sparse` must be sorted by
/// exponent. Parallel over output blocks, each an independent read of
/// the dense input.
fn sparse_mul(dense: &[i128], sparse: &[(usize, i128)], limit: usize) -> Vec<i128> {
    let mut out = vec![0i128; limit];
    out.par_chunks_mut(4096).enumerate().for_each(|(blk, chunk)| {
        let base = blk * 4096;
        for (off, slot) in chunk.iter_mut().enumerate() {
            let i = base + off;
            let mut s = 0i128;
            for &(e, c) in sparse {
                if e > i {
                    break;
                }
                let term = c.checked_mul(dense[i - e]).expect("tau coefficient overflow");
                s = s.checked_add(term).expect("tau coefficient overflow");
            }
            *slot = s;
        }
    });
    out
}
