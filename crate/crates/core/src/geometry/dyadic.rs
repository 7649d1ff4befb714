use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{n_coords, SymMat};

/// A point of `L^j = (S^D)^(2^j)` with inner product `2^-j sum_k x_k . y_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicPoint {
    level: u32,
    blocks: Vec<SymMat>,
}

impl DyadicPoint {
    pub fn new(level: u32, blocks: Vec<SymMat>) -> Result<Self> {
        let expected = 1usize << level;
        if blocks.len() != expected {
            return Err(Error::Shape {
                what: "dyadic blocks",
                expected,
                found: blocks.len(),
            });
        }
        let dim = blocks[0].dim();
        if let Some(b) = blocks.iter().find(|b| b.dim() != dim) {
            return Err(Error::Shape {
                what: "block dimension",
                expected: dim,
                found: b.dim(),
            });
        }
        Ok(DyadicPoint { level, blocks })
    }

    pub fn zeros(level: u32, dim: usize) -> Self {
        DyadicPoint {
            level,
            blocks: (0..1usize << level).map(|_| SymMat::zeros(dim)).collect(),
        }
    }

    /// Scalar blocks (`D = 1`).
    pub fn from_scalars(level: u32, values: &[f64]) -> Result<Self> {
        Self::new(level, values.iter().map(|v| SymMat::scalar(*v)).collect())
    }

    /// Blocks from concatenated orthonormal coordinates.
    pub fn from_coords(level: u32, dim: usize, z: &[f64]) -> Result<Self> {
        let nc = n_coords(dim);
        let expected = nc << level;
        if z.len() != expected {
            return Err(Error::Shape {
                what: "coordinate vector",
                expected,
                found: z.len(),
            });
        }
        Ok(DyadicPoint {
            level,
            blocks: z.chunks(nc).map(|c| SymMat::from_coords(dim, c)).collect(),
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].dim()
    }

    pub fn blocks(&self) -> &[SymMat] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<SymMat> {
        self.blocks
    }

    /// Concatenated orthonormal coordinates of all blocks.
    pub fn coords(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.coords()).collect()
    }

    pub fn n_coords(&self) -> usize {
        n_coords(self.dim()) << self.level
    }

    fn check_compatible(&self, other: &DyadicPoint) -> Result<()> {
        if self.level != other.level {
            return Err(Error::Shape {
                what: "dyadic level",
                expected: self.level as usize,
                found: other.level as usize,
            });
        }
        if self.dim() != other.dim() {
            return Err(Error::Shape {
                what: "block dimension",
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn inner(&self, other: &DyadicPoint) -> Result<f64> {
        self.check_compatible(other)?;
        let s: f64 = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.dot(b))
            .sum();
        Ok(s / (1u64 << self.level) as f64)
    }

    pub fn norm(&self) -> f64 {
        let s: f64 = self.blocks.iter().map(|b| b.dot(b)).sum();
        libm::sqrt(s / (1u64 << self.level) as f64)
    }

    pub fn add(&self, other: &DyadicPoint) -> Result<DyadicPoint> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &DyadicPoint) -> Result<DyadicPoint> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &DyadicPoint, c: f64) -> Result<DyadicPoint> {
        self.check_compatible(other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| {
                let mut m = a.clone();
                m.axpy(c, b);
                m
            })
            .collect();
        Ok(DyadicPoint {
            level: self.level,
            blocks,
        })
    }

    pub fn scale(&self, c: f64) -> DyadicPoint {
        DyadicPoint {
            level: self.level,
            blocks: self.blocks.iter().map(|b| b.scale(c)).collect(),
        }
    }

    pub fn map_blocks(&self, f: impl Fn(&SymMat) -> SymMat) -> DyadicPoint {
        DyadicPoint {
            level: self.level,
            blocks: self.blocks.iter().map(f).collect(),
        }
    }
}

/// `<x, y>_{L^j}`.
pub fn inner_product(x: &DyadicPoint, y: &DyadicPoint) -> Result<f64> {
    x.inner(y)
}
