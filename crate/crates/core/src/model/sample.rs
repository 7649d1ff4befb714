//! Seeded samplers for admissibility probes.

use rand::Rng;

use crate::linalg::SymMat;

/// Random PSD matrix `B B^T / D` with entries of `B` uniform in `[-s, s]`.
pub fn random_psd<R: Rng + ?Sized>(rng: &mut R, dim: usize, s: f64) -> SymMat {
    let b: alloc::vec::Vec<f64> = (0..dim * dim).map(|_| rng.gen_range(-s..=s)).collect();
    let mut m = SymMat::zeros(dim);
    for i in 0..dim {
        for k in i..dim {
            let v: f64 = (0..dim).map(|l| b[i * dim + l] * b[k * dim + l]).sum();
            m.set(i, k, v / dim as f64);
        }
    }
    m
}

/// Random PSD matrix with every entry in `[-1, 1]`.
pub fn random_psd_unit_box<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> SymMat {
    let m = random_psd(rng, dim, 1.0);
    let top = m.max_abs_entry();
    let target: f64 = rng.gen_range(0.0..=1.0);
    if top > 0.0 {
        m.scale(target / top)
    } else {
        m
    }
}

/// Random symmetric matrix with entries uniform in `[-s, s]`.
pub fn random_sym<R: Rng + ?Sized>(rng: &mut R, dim: usize, s: f64) -> SymMat {
    let mut m = SymMat::zeros(dim);
    for i in 0..dim {
        for k in i..dim {
            m.set(i, k, rng.gen_range(-s..=s));
        }
    }
    m
}
