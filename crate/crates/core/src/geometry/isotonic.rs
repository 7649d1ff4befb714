//! Pool-adjacent-violators for nondecreasing least-squares fits.

use alloc::vec::Vec;

/// Weighted isotonic (nondecreasing) regression of `y`.
pub fn pava(y: &[f64], w: &[f64]) -> Vec<f64> {
    debug_assert_eq!(y.len(), w.len());
    let mut mean: Vec<f64> = Vec::with_capacity(y.len());
    let mut weight: Vec<f64> = Vec::with_capacity(y.len());
    let mut count: Vec<usize> = Vec::with_capacity(y.len());
    for (v, wi) in y.iter().zip(w) {
        mean.push(*v);
        weight.push(*wi);
        count.push(1);
        while mean.len() > 1 && mean[mean.len() - 2] > mean[mean.len() - 1] {
            let (m2, w2, c2) = (
                mean.pop().unwrap(),
                weight.pop().unwrap(),
                count.pop().unwrap(),
            );
            let last = mean.len() - 1;
            let tw = weight[last] + w2;
            mean[last] = (mean[last] * weight[last] + m2 * w2) / tw;
            weight[last] = tw;
            count[last] += c2;
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (m, c) in mean.iter().zip(&count) {
        out.extend(core::iter::repeat(*m).take(*c));
    }
    out
}

/// Unweighted PAVA in place; returns the number of pooled blocks.
///
/// `block_end` receives the exclusive end index of every block. Works on
/// caller-owned buffers so that hot loops do not allocate.
pub fn pava_in_place(y: &mut [f64], block_end: &mut [usize]) -> usize {
    let n = y.len();
    debug_assert!(block_end.len() >= n);
    let mut nb = 0usize;
    // y[b] holds the mean of block b during the sweep, block_end[b] its end.
    let mut i = 0;
    while i < n {
        let v = y[i];
        y[nb] = v;
        block_end[nb] = i + 1;
        nb += 1;
        while nb > 1 && y[nb - 2] > y[nb - 1] {
            let len_last = block_end[nb - 1] - block_end[nb - 2];
            let prev_start = if nb >= 3 { block_end[nb - 3] } else { 0 };
            let len_prev = block_end[nb - 2] - prev_start;
            let merged = (y[nb - 2] * len_prev as f64 + y[nb - 1] * len_last as f64)
                / (len_prev + len_last) as f64;
            y[nb - 2] = merged;
            block_end[nb - 2] = block_end[nb - 1];
            nb -= 1;
        }
        i += 1;
    }
    // expand means back over their blocks, from the right
    let mut b = nb;
    while b > 0 {
        b -= 1;
        let start = if b == 0 { 0 } else { block_end[b - 1] };
        let m = y[b];
        for v in y[start..block_end[b]].iter_mut() {
            *v = m;
        }
    }
    nb
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn pools_violators() {
        let y = [1.0, 3.0, 2.0, 2.0, 5.0, 0.0];
        let w = [1.0; 6];
        let out = pava(&y, &w);
        let mut y2 = y;
        let mut ends = [0usize; 6];
        let nb = pava_in_place(&mut y2, &mut ends);
        assert_eq!(out, y2.to_vec());
        assert_eq!(nb, 3);
        assert!(out.windows(2).all(|p| p[0] <= p[1]));
        let expect = vec![1.0, 7.0 / 3.0, 7.0 / 3.0, 7.0 / 3.0, 2.5, 2.5];
        for (a, b) in out.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
