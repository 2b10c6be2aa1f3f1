//! The truncated integer lattice of Fourier modes.
//!
//! The active set is the cube `{ξ ∈ Z^n : |ξ_j| ≤ m}`. Modes are stored in
//! lexicographic order from `(-m, …, -m)` to `(m, …, m)` with the last axis
//! varying fastest, so the zero mode sits at the centre index and `-ξ` lives at
//! `len - 1 - index(ξ)`. Every reduction in the crate walks this order.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct Lattice {
    n: usize,
    m: usize,
    modes: Arc<[i64]>,
}

impl Lattice {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidLattice { n, m });
        }
        let side = 2 * m + 1;
        let len = side
            .checked_pow(n as u32)
            .ok_or(Error::InvalidLattice { n, m })?;
        let mut modes = Vec::with_capacity(len * n);
        for idx in 0..len {
            let mut rem = idx;
            let start = modes.len();
            modes.resize(start + n, 0);
            for axis in (0..n).rev() {
                modes[start + axis] = (rem % side) as i64 - m as i64;
                rem /= side;
            }
        }
        Ok(Self {
            n,
            m,
            modes: modes.into(),
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn truncation(&self) -> usize {
        self.m
    }

    /// Points per axis, `2m + 1`.
    #[inline]
    pub fn side(&self) -> usize {
        2 * self.m + 1
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.modes.len() / self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    #[inline]
    pub fn zero_index(&self) -> usize {
        (self.len() - 1) / 2
    }

    #[inline]
    pub fn mode(&self, idx: usize) -> &[i64] {
        &self.modes[idx * self.n..(idx + 1) * self.n]
    }

    #[inline]
    pub fn negated_index(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    pub fn index_of(&self, xi: &[i64]) -> Option<usize> {
        if xi.len() != self.n {
            return None;
        }
        let m = self.m as i64;
        let side = self.side();
        let mut idx = 0usize;
        for &c in xi {
            if c < -m || c > m {
                return None;
            }
            idx = idx * side + (c + m) as usize;
        }
        Some(idx)
    }

    #[inline]
    pub fn norm_sq(&self, idx: usize) -> f64 {
        self.mode(idx).iter().map(|&c| (c * c) as f64).sum()
    }

    /// `ρ(ξ)² = 1 + |ξ|²`.
    #[inline]
    pub fn rho_sq(&self, idx: usize) -> f64 {
        1.0 + self.norm_sq(idx)
    }

    /// Indices in canonical order, skipping the zero mode.
    pub fn nonzero_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let zero = self.zero_index();
        (0..self.len()).filter(move |&i| i != zero)
    }

    /// Indices whose Euclidean norm is at most `radius`.
    pub fn ball_indices(&self, radius: f64) -> impl Iterator<Item = usize> + '_ {
        let r2 = radius * radius;
        (0..self.len()).filter(move |&i| self.norm_sq(i) <= r2)
    }

    /// Maps an index of `self` to the index of the same mode in `other`.
    pub fn map_index_into(&self, idx: usize, other: &Lattice) -> Option<usize> {
        other.index_of(self.mode(idx))
    }
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.m == other.m
    }
}

impl Eq for Lattice {}

impl fmt::Debug for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lattice")
            .field("n", &self.n)
            .field("m", &self.m)
            .finish()
    }
}
