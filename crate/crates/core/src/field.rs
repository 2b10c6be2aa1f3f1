//! Truncated Fourier representations of periodic scalar, vector and matrix
//! fields, with the Sobolev norms and the spectral calculus used by the
//! solvers.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Threshold above which a discarded mean is reported.
pub const MEAN_WARN_TOL: f64 = 1e-14;

/// `2πi`.
const TWO_PI_I: Complex64 = Complex64::new(0.0, 2.0 * PI);

/// Weighted sum `Σ ρ(ξ)^{2s} |c(ξ)|²` in canonical order.
fn weighted_sq(lattice: &Lattice, coeffs: &[Complex64], s: f64, skip_zero: bool) -> f64 {
    let zero = lattice.zero_index();
    let mut acc = 0.0;
    for (i, c) in coeffs.iter().enumerate() {
        if skip_zero && i == zero {
            continue;
        }
        let w = if s == 0.0 {
            1.0
        } else {
            lattice.rho_sq(i).powf(s)
        };
        acc += w * c.norm_sqr();
    }
    acc
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    lattice: Lattice,
    coeffs: Vec<Complex64>,
    real: bool,
}

impl ScalarField {
    pub fn zeros(lattice: &Lattice, real: bool) -> Self {
        Self {
            lattice: lattice.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); lattice.len()],
            real,
        }
    }

    pub fn from_coeffs(lattice: &Lattice, coeffs: Vec<Complex64>, real: bool) -> Result<Self> {
        if coeffs.len() != lattice.len() {
            return Err(Error::DimensionMismatch {
                expected: lattice.len(),
                got: coeffs.len(),
            });
        }
        Ok(Self {
            lattice: lattice.clone(),
            coeffs,
            real,
        })
    }

    /// Builds a field from explicit `(ξ, ĝ(ξ))` pairs. For a real field the
    /// conjugate partner `ĝ(-ξ)` is filled in automatically.
    pub fn from_modes(
        lattice: &Lattice,
        modes: &[(&[i64], Complex64)],
        real: bool,
    ) -> Result<Self> {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); lattice.len()];
        for (xi, c) in modes {
            let idx = lattice
                .index_of(xi)
                .ok_or_else(|| Error::LatticeMismatch(format!("mode {xi:?} outside lattice")))?;
            coeffs[idx] += c;
            if real {
                let neg = lattice.negated_index(idx);
                if neg == idx {
                    coeffs[idx].im = 0.0;
                } else {
                    coeffs[neg] += c.conj();
                }
            }
        }
        Self::from_coeffs(lattice, coeffs, real)
    }

    #[inline]
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn get(&self, xi: &[i64]) -> Option<Complex64> {
        self.lattice.index_of(xi).map(|i| self.coeffs[i])
    }

    #[inline]
    pub fn mean(&self) -> Complex64 {
        self.coeffs[self.lattice.zero_index()]
    }

    /// Zeroes the mean. The flag reports whether a mean above
    /// [`MEAN_WARN_TOL`] was discarded.
    pub fn remove_mean(mut self) -> (Self, bool) {
        let z = self.lattice.zero_index();
        let had = self.coeffs[z].norm() > MEAN_WARN_TOL;
        self.coeffs[z] = Complex64::new(0.0, 0.0);
        (self, had)
    }

    /// Largest defect `|ĝ(-ξ) - conj ĝ(ξ)|`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.lattice.len())
            .map(|i| (self.coeffs[self.lattice.negated_index(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Projects onto Hermitian-symmetric coefficients and sets the real flag.
    pub fn hermitian_part(&self) -> Self {
        let coeffs = (0..self.lattice.len())
            .map(|i| 0.5 * (self.coeffs[i] + self.coeffs[self.lattice.negated_index(i)].conj()))
            .collect();
        Self {
            lattice: self.lattice.clone(),
            coeffs,
            real: true,
        }
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        weighted_sq(&self.lattice, &self.coeffs, s, false).sqrt()
    }

    pub fn seminorm(&self, s: f64) -> f64 {
        weighted_sq(&self.lattice, &self.coeffs, s, true).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `⟨self, other⟩ = Σ ĝ(ξ) conj(ĥ(ξ))`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_lattice(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a * b.conj()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map_coeffs(|_, c| c * factor)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn gradient(&self) -> VectorField {
        let n = self.lattice.dim();
        let comps = (0..n)
            .map(|j| self.map_coeffs(|xi, c| TWO_PI_I * xi[j] as f64 * c))
            .collect();
        VectorField {
            lattice: self.lattice.clone(),
            comps,
            real: self.real,
            solenoidal: false,
        }
    }

    /// Spectral Laplacian, `-4π²|ξ|² ĝ(ξ)`.
    pub fn laplacian(&self) -> Self {
        self.map_coeffs(|xi, c| {
            let k2: f64 = xi.iter().map(|&x| (x * x) as f64).sum();
            -4.0 * PI * PI * k2 * c
        })
    }

    /// Copies the overlapping modes into `target`, zero-filling the rest.
    pub fn resampled(&self, target: &Lattice) -> Result<Self> {
        if target.dim() != self.lattice.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.lattice.dim(),
                got: target.dim(),
            });
        }
        let mut out = Self::zeros(target, self.real);
        for (i, c) in self.coeffs.iter().enumerate() {
            if let Some(j) = self.lattice.map_index_into(i, target) {
                out.coeffs[j] = *c;
            }
        }
        Ok(out)
    }

    pub(crate) fn map_coeffs<F>(&self, f: F) -> Self
    where
        F: Fn(&[i64], Complex64) -> Complex64 + Sync,
    {
        let lattice = &self.lattice;
        let coeffs = self
            .coeffs
            .par_iter()
            .enumerate()
            .map(|(i, &c)| f(lattice.mode(i), c))
            .collect();
        Self {
            lattice: self.lattice.clone(),
            coeffs,
            real: self.real,
        }
    }

    fn zip_with<F>(&self, other: &Self, f: F) -> Result<Self>
    where
        F: Fn(Complex64, Complex64) -> Complex64,
    {
        self.check_lattice(other)?;
        Ok(Self {
            lattice: self.lattice.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            real: self.real && other.real,
        })
    }

    fn check_lattice(&self, other: &Self) -> Result<()> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch(format!(
                "{:?} vs {:?}",
                self.lattice, other.lattice
            )));
        }
        Ok(())
    }
}

/// An `n`-component field on a shared lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    lattice: Lattice,
    comps: Vec<ScalarField>,
    real: bool,
    solenoidal: bool,
}

impl VectorField {
    pub fn zeros(lattice: &Lattice, real: bool) -> Self {
        Self {
            lattice: lattice.clone(),
            comps: (0..lattice.dim())
                .map(|_| ScalarField::zeros(lattice, real))
                .collect(),
            real,
            solenoidal: true,
        }
    }

    pub fn from_components(comps: Vec<ScalarField>) -> Result<Self> {
        let first = comps.first().ok_or(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        })?;
        let lattice = first.lattice().clone();
        if comps.len() != lattice.dim() {
            return Err(Error::DimensionMismatch {
                expected: lattice.dim(),
                got: comps.len(),
            });
        }
        if comps.iter().any(|c| c.lattice() != &lattice) {
            return Err(Error::LatticeMismatch(
                "vector components on different lattices".into(),
            ));
        }
        let real = comps.iter().all(|c| c.is_real());
        let comps = comps
            .into_iter()
            .map(|mut c| {
                c.real = real;
                c
            })
            .collect();
        Ok(Self {
            lattice,
            comps,
            real,
            solenoidal: false,
        })
    }

    #[inline]
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    #[inline]
    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    #[inline]
    pub fn component(&self, k: usize) -> &ScalarField {
        &self.comps[k]
    }

    #[inline]
    pub fn is_real(&self) -> bool {
        self.real
    }

    /// True when the field was produced by a projection or solver that
    /// guarantees `ξ·û(ξ) = 0` on every mode.
    #[inline]
    pub fn is_solenoidal(&self) -> bool {
        self.solenoidal
    }

    pub(crate) fn mark_solenoidal(mut self) -> Self {
        self.solenoidal = true;
        self
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.comps
    }

    /// The coefficient vector `û(ξ)` at a lattice index.
    pub fn mode_vector(&self, idx: usize) -> Vec<Complex64> {
        self.comps.iter().map(|c| c.coeffs[idx]).collect()
    }

    /// Rebuilds a field from per-mode vectors in canonical order.
    pub(crate) fn from_mode_vectors(
        lattice: &Lattice,
        modes: &[Vec<Complex64>],
        real: bool,
    ) -> Self {
        let n = lattice.dim();
        let comps = (0..n)
            .map(|k| ScalarField {
                lattice: lattice.clone(),
                coeffs: modes.iter().map(|v| v[k]).collect(),
                real,
            })
            .collect();
        Self {
            lattice: lattice.clone(),
            comps,
            real,
            solenoidal: false,
        }
    }

    pub fn remove_mean(self) -> (Self, bool) {
        let mut had = false;
        let solenoidal = self.solenoidal;
        let real = self.real;
        let comps = self
            .comps
            .into_iter()
            .map(|c| {
                let (c, h) = c.remove_mean();
                had |= h;
                c
            })
            .collect();
        (
            Self {
                lattice: self.lattice,
                comps,
                real,
                solenoidal,
            },
            had,
        )
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.hermitian_defect())
            .fold(0.0, f64::max)
    }

    pub fn hermitian_part(&self) -> Self {
        Self {
            lattice: self.lattice.clone(),
            comps: self.comps.iter().map(|c| c.hermitian_part()).collect(),
            real: true,
            solenoidal: self.solenoidal,
        }
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.comps
            .iter()
            .map(|c| weighted_sq(&self.lattice, &c.coeffs, s, false))
            .sum::<f64>()
            .sqrt()
    }

    pub fn seminorm(&self, s: f64) -> f64 {
        self.comps
            .iter()
            .map(|c| weighted_sq(&self.lattice, &c.coeffs, s, true))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_dim(other)?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in self.comps.iter().zip(&other.comps) {
            acc += a.inner(b)?;
        }
        Ok(acc)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            lattice: self.lattice.clone(),
            comps: self.comps.iter().map(|c| c.scaled(factor)).collect(),
            real: self.real,
            solenoidal: self.solenoidal,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, ScalarField::add)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, ScalarField::sub)
    }

    /// `(1 - ω) self + ω other`.
    pub fn blend(&self, other: &Self, omega: f64) -> Result<Self> {
        let mut out = self.scaled(1.0 - omega).add(&other.scaled(omega))?;
        out.solenoidal = self.solenoidal && other.solenoidal;
        Ok(out)
    }

    pub fn divergence(&self) -> ScalarField {
        let lattice = &self.lattice;
        let coeffs = (0..lattice.len())
            .into_par_iter()
            .map(|i| {
                let xi = lattice.mode(i);
                let dot = self
                    .comps
                    .iter()
                    .zip(xi)
                    .fold(Complex64::new(0.0, 0.0), |acc, (c, &x)| {
                        acc + c.coeffs[i] * x as f64
                    });
                TWO_PI_I * dot
            })
            .collect();
        ScalarField {
            lattice: lattice.clone(),
            coeffs,
            real: self.real,
        }
    }

    /// Largest `|2πi ξ·û(ξ)|` over the lattice.
    pub fn max_divergence(&self) -> f64 {
        self.divergence().max_abs()
    }

    /// Removes the component of every coefficient along `ξ`; the zero mode
    /// is cleared.
    pub fn leray_project(&self) -> Self {
        let lattice = &self.lattice;
        let zero = lattice.zero_index();
        let modes: Vec<Vec<Complex64>> = (0..lattice.len())
            .into_par_iter()
            .map(|i| {
                let mut v = self.mode_vector(i);
                if i == zero {
                    v.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                    return v;
                }
                let xi = lattice.mode(i);
                let k2 = lattice.norm_sq(i);
                let dot = v
                    .iter()
                    .zip(xi)
                    .fold(Complex64::new(0.0, 0.0), |acc, (c, &x)| acc + c * x as f64);
                for (c, &x) in v.iter_mut().zip(xi) {
                    *c -= dot * (x as f64 / k2);
                }
                v
            })
            .collect();
        Self::from_mode_vectors(lattice, &modes, self.real).mark_solenoidal()
    }

    /// Full gradient; entry `(j, β)` holds `∂_β u_j`.
    pub fn gradient(&self) -> MatrixField {
        let n = self.dim();
        let mut entries = Vec::with_capacity(n * n);
        for j in 0..n {
            for beta in 0..n {
                entries.push(self.comps[j].map_coeffs(|xi, c| TWO_PI_I * xi[beta] as f64 * c));
            }
        }
        MatrixField { n, entries }
    }

    /// `E_{jβ}(u) = ½(∂_j u_β + ∂_β u_j)`, coefficient `πi(ξ_j û_β + ξ_β û_j)`.
    pub fn symmetric_gradient(&self) -> MatrixField {
        let n = self.dim();
        let pi_i = Complex64::new(0.0, PI);
        let lattice = &self.lattice;
        let mut entries = Vec::with_capacity(n * n);
        for j in 0..n {
            for beta in 0..n {
                let coeffs = (0..lattice.len())
                    .map(|i| {
                        let xi = lattice.mode(i);
                        pi_i * (xi[j] as f64 * self.comps[beta].coeffs[i]
                            + xi[beta] as f64 * self.comps[j].coeffs[i])
                    })
                    .collect();
                entries.push(ScalarField {
                    lattice: lattice.clone(),
                    coeffs,
                    real: self.real,
                });
            }
        }
        MatrixField { n, entries }
    }

    pub fn resampled(&self, target: &Lattice) -> Result<Self> {
        let comps = self
            .comps
            .iter()
            .map(|c| c.resampled(target))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            lattice: target.clone(),
            comps,
            real: self.real,
            solenoidal: self.solenoidal,
        })
    }

    fn zip_with<F>(&self, other: &Self, f: F) -> Result<Self>
    where
        F: Fn(&ScalarField, &ScalarField) -> Result<ScalarField>,
    {
        self.check_dim(other)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| f(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            lattice: self.lattice.clone(),
            comps,
            real: self.real && other.real,
            solenoidal: false,
        })
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch(format!(
                "{:?} vs {:?}",
                self.lattice, other.lattice
            )));
        }
        Ok(())
    }
}

/// An `n × n` matrix of scalar fields, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    n: usize,
    entries: Vec<ScalarField>,
}

impl MatrixField {
    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> &ScalarField {
        &self.entries[row * self.n + col]
    }

    /// The `n × n` coefficient matrix at one lattice index, row-major.
    pub fn mode_matrix(&self, idx: usize) -> Vec<Complex64> {
        self.entries.iter().map(|e| e.coeffs[idx]).collect()
    }

    /// `(Σ_{jβ} ‖M_{jβ}‖²_{H^s})^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.entries
            .iter()
            .map(|e| e.sobolev_norm(s).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in self.entries.iter().zip(&other.entries) {
            acc += a.inner(b)?;
        }
        Ok(acc)
    }
}
