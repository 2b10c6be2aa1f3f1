//! Uniform-grid sampling of truncated Fourier series and its inverse.
//!
//! Samples are taken at `x = k/N`, `k ∈ {0..N-1}^n`, stored row-major with the
//! last axis fastest. Sampling evaluates `Σ ĝ(ξ) e^{2πi x·ξ}`; the inverse
//! recovers the coefficients exactly whenever `N ≥ 2m + 1`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::lattice::Lattice;

pub struct GridTransform {
    n: usize,
    points: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl GridTransform {
    pub fn new(n: usize, points: usize) -> Result<Self> {
        if n == 0 || points == 0 {
            return Err(Error::InvalidOption(format!(
                "grid needs n ≥ 1 and N ≥ 1 (got n={n}, N={points})"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            points,
            forward: planner.plan_fft_forward(points),
            inverse: planner.plan_fft_inverse(points),
        })
    }

    /// Smallest grid on which quadratic products of fields truncated at `m`
    /// are exact on the retained modes.
    pub fn dealiased(n: usize, m: usize) -> Result<Self> {
        Self::new(n, 3 * m + 1)
    }

    #[inline]
    pub fn points(&self) -> usize {
        self.points
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical coordinates of grid sample `k`.
    pub fn coordinates(&self, k: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        let mut rem = k;
        for axis in (0..self.n).rev() {
            x[axis] = (rem % self.points) as f64 / self.points as f64;
            rem /= self.points;
        }
        x
    }

    fn grid_index(&self, xi: &[i64]) -> usize {
        let np = self.points as i64;
        xi.iter().fold(0usize, |acc, &c| {
            acc * self.points + c.rem_euclid(np) as usize
        })
    }

    fn check_aliasing(&self, lattice: &Lattice) {
        if self.points < lattice.side() {
            log::warn!(
                "grid of {} points cannot resolve truncation m={} (needs {}); modes alias",
                self.points,
                lattice.truncation(),
                lattice.side()
            );
        }
    }

    pub fn to_grid(&self, g: &ScalarField) -> Result<Vec<Complex64>> {
        let lattice = g.lattice();
        self.check_dim(lattice)?;
        self.check_aliasing(lattice);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len()];
        for (i, c) in g.coeffs().iter().enumerate() {
            buf[self.grid_index(lattice.mode(i))] += c;
        }
        self.transform(&mut buf, &self.inverse);
        Ok(buf)
    }

    /// Recovers coefficients on `lattice` from grid samples.
    pub fn from_grid(
        &self,
        samples: &[Complex64],
        lattice: &Lattice,
        real: bool,
    ) -> Result<ScalarField> {
        self.check_dim(lattice)?;
        if samples.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: samples.len(),
            });
        }
        self.check_aliasing(lattice);
        let mut buf = samples.to_vec();
        self.transform(&mut buf, &self.forward);
        let scale = 1.0 / self.len() as f64;
        let coeffs = (0..lattice.len())
            .map(|i| buf[self.grid_index(lattice.mode(i))] * scale)
            .collect();
        let field = ScalarField::from_coeffs(lattice, coeffs, real)?;
        Ok(if real { field.hermitian_part() } else { field })
    }

    fn check_dim(&self, lattice: &Lattice) -> Result<()> {
        if lattice.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: lattice.dim(),
            });
        }
        Ok(())
    }

    /// Applies a 1-D transform along every axis.
    fn transform(&self, buf: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let np = self.points;
        let mut line = vec![Complex64::new(0.0, 0.0); np];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for axis in 0..self.n {
            let stride = np.pow((self.n - 1 - axis) as u32);
            let outer = buf.len() / (np * stride);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * np * stride + inner;
                    for (t, slot) in line.iter_mut().enumerate() {
                        *slot = buf[base + t * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (t, v) in line.iter().enumerate() {
                        buf[base + t * stride] = *v;
                    }
                }
            }
        }
    }
}
