//! Constant fourth-order viscosity tensors `a_{kj}^{αβ}`.
//!
//! Entries are indexed `(k, j, α, β)` with zero-based indices. The
//! symmetries enforced by [`ViscosityTensor::symmetry_violations`] are the
//! pair swap `a_{kj}^{αβ} = a_{jk}^{βα}` and the swap of the second lower
//! and upper indices `a_{kj}^{αβ} = a_{kβ}^{αj}`. Together they also imply
//! `a_{kj}^{αβ} = a_{αj}^{kβ}`, which is what lets the operator act through
//! symmetric gradients.
//!
//! Ellipticity is only required on symmetric trace-free matrices, so a
//! tensor may be indefinite on the full matrix space and still be usable.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::linalg::symmetric_eigenvalues;

/// Entrywise tolerance for the symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-14;
/// Smallest admissible eigenvalue of the restricted quadratic form.
pub const ELLIPTICITY_TOL: f64 = 1e-12;
const JACOBI_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct ViscosityTensor {
    n: usize,
    entries: Vec<f64>,
}

impl ViscosityTensor {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![0.0; n.pow(4)],
        }
    }

    /// `a_{kj}^{αβ} = λ δ_{kα} δ_{jβ} + μ (δ_{αj} δ_{βk} + δ_{αβ} δ_{kj})`.
    pub fn isotropic(lambda: f64, mu: f64, n: usize) -> Self {
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut t = Self::zeros(n);
        for k in 0..n {
            for j in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let v = lambda * d(k, a) * d(j, b)
                            + mu * (d(a, j) * d(b, k) + d(a, b) * d(k, j));
                        t.set(k, j, a, b, v);
                    }
                }
            }
        }
        t
    }

    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n.pow(4) {
            return Err(Error::DimensionMismatch {
                expected: n.pow(4),
                got: entries.len(),
            });
        }
        Ok(Self { n, entries })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    fn offset(&self, k: usize, j: usize, a: usize, b: usize) -> usize {
        ((k * self.n + j) * self.n + a) * self.n + b
    }

    #[inline]
    pub fn get(&self, k: usize, j: usize, alpha: usize, beta: usize) -> f64 {
        self.entries[self.offset(k, j, alpha, beta)]
    }

    #[inline]
    pub fn set(&mut self, k: usize, j: usize, alpha: usize, beta: usize, value: f64) {
        let o = self.offset(k, j, alpha, beta);
        self.entries[o] = value;
    }

    /// The index permutations generated by the adopted symmetries, as maps
    /// on `(k, j, α, β)`.
    fn symmetry_group() -> Vec<[usize; 4]> {
        // position permutations: pair swap (k↔j, α↔β) and j↔β
        let gens: [[usize; 4]; 2] = [[1, 0, 3, 2], [0, 3, 2, 1]];
        let mut group: Vec<[usize; 4]> = vec![[0, 1, 2, 3]];
        let mut i = 0;
        while i < group.len() {
            for g in &gens {
                let p = group[i];
                let composed = [p[g[0]], p[g[1]], p[g[2]], p[g[3]]];
                if !group.contains(&composed) {
                    group.push(composed);
                }
            }
            i += 1;
        }
        group
    }

    /// Index quadruples `(k, j, α, β)` at which either adopted symmetry fails
    /// by more than [`SYMMETRY_TOL`].
    pub fn symmetry_violations(&self) -> Vec<[usize; 4]> {
        let n = self.n;
        let mut out = Vec::new();
        for k in 0..n {
            for j in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let v = self.get(k, j, a, b);
                        let pair = self.get(j, k, b, a);
                        let swap = self.get(k, b, a, j);
                        if (v - pair).abs() > SYMMETRY_TOL || (v - swap).abs() > SYMMETRY_TOL {
                            out.push([k, j, a, b]);
                        }
                    }
                }
            }
        }
        out
    }

    /// Averages the tensor over the symmetry group.
    pub fn symmetrized(&self) -> Self {
        let group = Self::symmetry_group();
        let n = self.n;
        let mut out = Self::zeros(n);
        for k in 0..n {
            for j in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let idx = [k, j, a, b];
                        let sum: f64 = group
                            .iter()
                            .map(|p| self.get(idx[p[0]], idx[p[1]], idx[p[2]], idx[p[3]]))
                            .sum();
                        out.set(k, j, a, b, sum / group.len() as f64);
                    }
                }
            }
        }
        out
    }

    /// `‖𝔸‖ = max |a_{kj}^{αβ}|`.
    pub fn norm(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `a_{kj}^{αβ} ζ_{kα} η_{jβ}` for real row-major `n × n` matrices.
    pub fn bilinear_form(&self, zeta: &[f64], eta: &[f64]) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for k in 0..n {
            for j in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        acc += self.get(k, j, a, b) * zeta[k * n + a] * eta[j * n + b];
                    }
                }
            }
        }
        acc
    }

    /// Smallest eigenvalue of the quadratic form restricted to symmetric
    /// trace-free matrices (Frobenius-orthonormal basis).
    pub fn restricted_min_eigenvalue(&self) -> f64 {
        let basis = trace_free_symmetric_basis(self.n);
        let d = basis.len();
        if d == 0 {
            return f64::INFINITY;
        }
        let mut q = vec![0.0; d * d];
        for p in 0..d {
            for r in 0..d {
                q[p * d + r] = self.bilinear_form(&basis[p], &basis[r]);
            }
        }
        // the pair symmetry makes q symmetric; average out rounding
        for p in 0..d {
            for r in p + 1..d {
                let avg = 0.5 * (q[p * d + r] + q[r * d + p]);
                q[p * d + r] = avg;
                q[r * d + p] = avg;
            }
        }
        symmetric_eigenvalues(&q, d, JACOBI_TOL)[0]
    }

    /// `C_𝔸 = 1 / λ_min` of the restricted form.
    pub fn ellipticity_constant(&self) -> Result<f64> {
        let min_eigenvalue = self.restricted_min_eigenvalue();
        if min_eigenvalue <= ELLIPTICITY_TOL {
            return Err(Error::NotElliptic { min_eigenvalue });
        }
        Ok(1.0 / min_eigenvalue)
    }

    /// Checks symmetry and ellipticity and caches the constants the solvers
    /// need.
    pub fn validate(&self) -> Result<ValidatedTensor> {
        let violations = self.symmetry_violations();
        if let Some(q) = violations.first() {
            return Err(Error::InvalidOption(format!(
                "viscosity tensor violates symmetry at {} entries (first at k={} j={} alpha={} beta={}, 1-based)",
                violations.len(),
                q[0] + 1,
                q[1] + 1,
                q[2] + 1,
                q[3] + 1
            )));
        }
        let ellipticity = self.ellipticity_constant()?;
        Ok(ValidatedTensor {
            norm: self.norm(),
            ellipticity,
            tensor: self.clone(),
        })
    }

    /// The real `n × n` block `ξ_α a_{kj}^{αβ} ξ_β` (row `k`, column `j`).
    pub fn contract_mode(&self, xi: &[i64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for k in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        acc += xi[a] as f64 * self.get(k, j, a, b) * xi[b] as f64;
                    }
                }
                out[k * n + j] = acc;
            }
        }
        out
    }

    /// `(𝔏u)_k = ∂_α(a_{kj}^{αβ} ∂_β u_j)`: per mode `-4π² ξ_α a_{kj}^{αβ} ξ_β û_j`.
    pub fn apply(&self, u: &VectorField) -> Result<VectorField> {
        let lattice = u.lattice();
        if lattice.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: lattice.dim(),
            });
        }
        let n = self.n;
        let scale = -4.0 * PI * PI;
        let modes: Vec<Vec<Complex64>> = (0..lattice.len())
            .map(|i| {
                let block = self.contract_mode(lattice.mode(i));
                let v = u.mode_vector(i);
                (0..n)
                    .map(|k| {
                        (0..n).fold(Complex64::new(0.0, 0.0), |acc, j| {
                            acc + v[j] * block[k * n + j]
                        }) * scale
                    })
                    .collect()
            })
            .collect();
        Ok(VectorField::from_mode_vectors(lattice, &modes, u.is_real()))
    }

    /// `𝓛(u, p) = 𝔏u - ∇p`.
    pub fn stokes_operator(&self, u: &VectorField, p: &ScalarField) -> Result<VectorField> {
        if p.lattice() != u.lattice() {
            return Err(Error::LatticeMismatch(
                "velocity and pressure lattices differ".into(),
            ));
        }
        self.apply(u)?.sub(&p.gradient())
    }
}

/// A tensor that passed [`ViscosityTensor::validate`], carrying `C_𝔸` and `‖𝔸‖`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedTensor {
    tensor: ViscosityTensor,
    ellipticity: f64,
    norm: f64,
}

impl ValidatedTensor {
    #[inline]
    pub fn tensor(&self) -> &ViscosityTensor {
        &self.tensor
    }

    /// `C_𝔸`.
    #[inline]
    pub fn ellipticity_constant(&self) -> f64 {
        self.ellipticity
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.tensor.n
    }
}

/// Frobenius-orthonormal basis of symmetric trace-free `n × n` matrices:
/// normalised off-diagonal pairs, then diagonal differences orthogonalised
/// against each other (and hence against the identity).
pub fn trace_free_symmetric_basis(n: usize) -> Vec<Vec<f64>> {
    let mut basis = Vec::new();
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..n {
        for a in k + 1..n {
            let mut m = vec![0.0; n * n];
            m[k * n + a] = inv_sqrt2;
            m[a * n + k] = inv_sqrt2;
            basis.push(m);
        }
    }
    let mut diag: Vec<Vec<f64>> = Vec::new();
    for k in 0..n.saturating_sub(1) {
        let mut d = vec![0.0; n];
        d[k] = 1.0;
        d[k + 1] = -1.0;
        for prev in &diag {
            let proj: f64 = d.iter().zip(prev).map(|(x, y)| x * y).sum();
            d.iter_mut().zip(prev).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        d.iter_mut().for_each(|x| *x /= norm);
        diag.push(d);
    }
    for d in diag {
        let mut m = vec![0.0; n * n];
        for k in 0..n {
            m[k * n + k] = d[k];
        }
        basis.push(m);
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;

    #[test]
    fn isotropic_entries() {
        let t = ViscosityTensor::isotropic(0.0, 1.0, 2);
        assert_eq!(t.get(0, 0, 0, 0), 2.0);
        assert_eq!(t.get(0, 1, 1, 0), 1.0);
        let t = ViscosityTensor::isotropic(1.0, 0.0, 2);
        assert_eq!(t.get(0, 0, 0, 0), 1.0);
        for (l, m) in [(0.0, 1.0), (-7.0, 2.5), (3.0, 0.0)] {
            assert!(ViscosityTensor::isotropic(l, m, 3)
                .symmetry_violations()
                .is_empty());
        }
    }

    #[test]
    fn reports_perturbed_entry() {
        let mut t = ViscosityTensor::isotropic(1.0, 1.0, 2);
        t.set(0, 1, 0, 1, t.get(0, 1, 0, 1) + 1e-6);
        let v = t.symmetry_violations();
        assert!(v.contains(&[0, 1, 0, 1]));
        assert!(t.symmetrized().symmetry_violations().is_empty());
    }

    #[test]
    fn symmetry_group_has_eight_elements() {
        assert_eq!(ViscosityTensor::symmetry_group().len(), 8);
    }

    #[test]
    fn basis_is_orthonormal_and_trace_free() {
        for n in 1..=4 {
            let b = trace_free_symmetric_basis(n);
            assert_eq!(b.len(), n * (n + 1) / 2 - 1);
            for (p, x) in b.iter().enumerate() {
                let tr: f64 = (0..n).map(|k| x[k * n + k]).sum();
                assert!(tr.abs() < 1e-15);
                for k in 0..n {
                    for a in 0..n {
                        assert_eq!(x[k * n + a], x[a * n + k]);
                    }
                }
                for (r, y) in b.iter().enumerate() {
                    let dot: f64 = x.iter().zip(y).map(|(u, v)| u * v).sum();
                    let expect = if p == r { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn ellipticity_examples() {
        let c = ViscosityTensor::isotropic(0.0, 1.0, 2)
            .ellipticity_constant()
            .unwrap();
        assert!((c - 0.5).abs() < 1e-14);
        let c = ViscosityTensor::isotropic(-7.0, 1.0, 3)
            .ellipticity_constant()
            .unwrap();
        assert!((c - 0.5).abs() < 1e-14);
        assert!(matches!(
            ViscosityTensor::isotropic(4.0, 0.0, 2).ellipticity_constant(),
            Err(Error::NotElliptic { .. })
        ));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(ViscosityTensor::isotropic(0.0, 1.0, 2).norm(), 2.0);
        assert_eq!(ViscosityTensor::zeros(3).norm(), 0.0);
        assert_eq!(ViscosityTensor::isotropic(3.0, 1.0, 2).norm(), 5.0);
    }

    fn single(lat: &Lattice, xi: &[i64], v: [f64; 2]) -> VectorField {
        let comps = v
            .iter()
            .map(|&c| ScalarField::from_modes(lat, &[(xi, Complex64::new(c, 0.0))], false).unwrap())
            .collect();
        VectorField::from_components(comps).unwrap()
    }

    #[test]
    fn apply_examples() {
        let lat = Lattice::new(2, 1).unwrap();
        let four_pi2 = 4.0 * PI * PI;

        let t = ViscosityTensor::isotropic(0.0, 1.0, 2);
        let lu = t.apply(&single(&lat, &[1, 0], [0.0, 1.0])).unwrap();
        assert!((lu.component(1).get(&[1, 0]).unwrap().re + four_pi2).abs() < 1e-12);
        assert_eq!(lu.component(0).max_abs(), 0.0);

        let konst = single(&lat, &[0, 0], [1.0, -2.0]);
        assert_eq!(t.apply(&konst).unwrap().max_abs(), 0.0);

        let t = ViscosityTensor::isotropic(1.0, 1.0, 2);
        let lu = t.apply(&single(&lat, &[1, 0], [1.0, 0.0])).unwrap();
        assert!((lu.component(0).get(&[1, 0]).unwrap().re + 3.0 * four_pi2).abs() < 1e-12);
    }

    #[test]
    fn stokes_operator_examples() {
        let lat = Lattice::new(2, 1).unwrap();
        let t = ViscosityTensor::isotropic(0.5, 1.0, 2);
        let u = single(&lat, &[1, 1], [1.0, -0.5]);
        let p0 = ScalarField::zeros(&lat, false);
        assert_eq!(t.stokes_operator(&u, &p0).unwrap(), t.apply(&u).unwrap());

        let p =
            ScalarField::from_modes(&lat, &[(&[0, 1], Complex64::new(1.0, 0.0))], false).unwrap();
        let zero = VectorField::zeros(&lat, false);
        let out = t.stokes_operator(&zero, &p).unwrap();
        let grad = p.gradient();
        for k in 0..2 {
            for (a, b) in out
                .component(k)
                .coeffs()
                .iter()
                .zip(grad.component(k).coeffs())
            {
                assert!((a + b).norm() < 1e-15);
            }
        }
    }
}
