//! Per-mode solution of the anisotropic Stokes system
//! `-𝓛(u, p) = f`, `div u = g` on the torus.
//!
//! For each `ξ ≠ 0` the coefficients satisfy the `(n+1) × (n+1)` system
//!
//! ```text
//! 4π² ξ_α a_{kj}^{αβ} ξ_β û_j + 2πi ξ_k p̂ = f̂_k
//! 2πi ξ_j û_j                           = ĝ
//! ```
//!
//! and the zero mode of both unknowns is pinned to zero.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::linalg::{mat_vec, solve_complex, vec_norm};
use crate::viscosity::{ValidatedTensor, ViscosityTensor};

/// Pivots below this fraction of the symbol's largest entry are singular.
pub const PIVOT_TOL: f64 = 1e-13;
/// Admissible negative slack in the per-mode estimates, relative to the
/// bound (floored at 1).
pub const ESTIMATE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct StokesSymbol {
    xi: Vec<i64>,
    mat: Vec<Complex64>,
}

impl StokesSymbol {
    #[inline]
    pub fn mode(&self) -> &[i64] {
        &self.xi
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.xi.len() + 1
    }

    /// Row-major `(n+1) × (n+1)` entries.
    #[inline]
    pub fn matrix(&self) -> &[Complex64] {
        &self.mat
    }

    #[inline]
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.mat[row * self.size() + col]
    }

    /// `𝔖(ξ) (û, p̂)ᵀ`.
    pub fn apply(&self, u: &[Complex64], p: Complex64) -> (Vec<Complex64>, Complex64) {
        let mut x = u.to_vec();
        x.push(p);
        let mut y = mat_vec(&self.mat, &x);
        let g = y.pop().expect("nonempty");
        (y, g)
    }
}

pub fn assemble_symbol(tensor: &ViscosityTensor, xi: &[i64]) -> Result<StokesSymbol> {
    let n = tensor.dim();
    if xi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: xi.len(),
        });
    }
    if xi.iter().all(|&c| c == 0) {
        return Err(Error::ZeroMode);
    }
    let size = n + 1;
    let block = tensor.contract_mode(xi);
    let mut mat = vec![Complex64::new(0.0, 0.0); size * size];
    let four_pi2 = 4.0 * PI * PI;
    for k in 0..n {
        for j in 0..n {
            mat[k * size + j] = Complex64::new(four_pi2 * block[k * n + j], 0.0);
        }
        let coupling = Complex64::new(0.0, 2.0 * PI * xi[k] as f64);
        mat[k * size + n] = coupling;
        mat[n * size + k] = coupling;
    }
    Ok(StokesSymbol {
        xi: xi.to_vec(),
        mat,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeSolution {
    pub u: Vec<Complex64>,
    pub p: Complex64,
}

/// Solves `𝔖(ξ)(û, p̂)ᵀ = (f̂, ĝ)ᵀ` by elimination with partial pivoting.
pub fn solve_mode(symbol: &StokesSymbol, f: &[Complex64], g: Complex64) -> Result<ModeSolution> {
    let n = symbol.size() - 1;
    if f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    let mut rhs = f.to_vec();
    rhs.push(g);
    let mut x = solve_complex(&symbol.mat, &rhs, PIVOT_TOL).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::SingularSymbol {
            xi: symbol.xi.clone(),
        },
        other => other,
    })?;
    let p = x.pop().expect("nonempty");
    Ok(ModeSolution { u: x, p })
}

/// Closed-form solution for the isotropic tensor:
/// `p̂ = ξ·f̂ / (2πi|ξ|²) + (λ + 2μ) ĝ` and
/// `û = [f̂ - ξ(ξ·f̂)/|ξ|²] / (4π²μ|ξ|²) + ξ ĝ / (2πi|ξ|²)`.
pub fn solve_isotropic_mode(
    lambda: f64,
    mu: f64,
    xi: &[i64],
    f: &[Complex64],
    g: Complex64,
) -> Result<ModeSolution> {
    if mu <= 0.0 {
        return Err(Error::NonPositiveMu(mu));
    }
    if f.len() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: xi.len(),
            got: f.len(),
        });
    }
    let k2: f64 = xi.iter().map(|&c| (c * c) as f64).sum();
    if k2 == 0.0 {
        return Err(Error::ZeroMode);
    }
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let xi_dot_f = xi
        .iter()
        .zip(f)
        .fold(Complex64::new(0.0, 0.0), |acc, (&x, c)| acc + c * x as f64);
    let p = xi_dot_f / (two_pi_i * k2) + (lambda + 2.0 * mu) * g;
    let transverse_scale = 1.0 / (4.0 * PI * PI * mu * k2);
    let u = xi
        .iter()
        .zip(f)
        .map(|(&x, &fk)| {
            let x = x as f64;
            (fk - xi_dot_f * (x / k2)) * transverse_scale + g * x / (two_pi_i * k2)
        })
        .collect();
    Ok(ModeSolution { u, p })
}

/// Constants of the per-mode a-priori estimates, derived from `C_𝔸` and `‖𝔸‖`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateConstants {
    pub ellipticity: f64,
    pub tensor_norm: f64,
    pub c_uf: f64,
    pub c_ug: f64,
    pub c_pf: f64,
    pub c_pg: f64,
}

impl EstimateConstants {
    pub fn new(ellipticity: f64, tensor_norm: f64) -> Self {
        let c_ug = 1.0 + 2.0 * ellipticity * tensor_norm;
        Self {
            ellipticity,
            tensor_norm,
            c_uf: 2.0 * ellipticity,
            c_ug,
            c_pf: c_ug,
            c_pg: tensor_norm * c_ug,
        }
    }

    pub fn from_tensor(tensor: &ValidatedTensor) -> Self {
        Self::new(tensor.ellipticity_constant(), tensor.norm())
    }

    /// Coefficient of `‖f‖_{H^{s-2}}` in the velocity bound.
    pub fn global_uf(&self) -> f64 {
        self.c_uf / (2.0 * PI * PI)
    }

    /// Coefficient of `‖g‖_{H^{s-1}}` in the velocity bound.
    pub fn global_ug(&self) -> f64 {
        SQRT_2 * self.c_ug / (2.0 * PI)
    }

    /// Coefficient of `‖f‖_{H^{s-2}}` in the pressure bound.
    pub fn global_pf(&self) -> f64 {
        self.c_pf / (SQRT_2 * PI)
    }

    /// Coefficient of `‖g‖_{H^{s-1}}` in the pressure bound.
    pub fn global_pg(&self) -> f64 {
        SQRT_2 * self.c_pg
    }
}

/// Right side minus left side of the velocity and pressure mode estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeSlack {
    pub u: f64,
    pub u_bound: f64,
    pub p: f64,
    pub p_bound: f64,
}

impl ModeSlack {
    pub fn holds(&self) -> bool {
        self.u >= -ESTIMATE_TOL * self.u_bound.max(1.0)
            && self.p >= -ESTIMATE_TOL * self.p_bound.max(1.0)
    }
}

/// Evaluates
/// `|û| ≤ C_uf |f̂|/|2πξ|² + C_ug |ĝ|/(2π|ξ|)` and
/// `|p̂| ≤ C_pf |f̂|/(2π|ξ|) + C_pg |ĝ|`.
pub fn verify_mode_estimates(
    constants: &EstimateConstants,
    xi: &[i64],
    f: &[Complex64],
    g: Complex64,
    u: &[Complex64],
    p: Complex64,
) -> ModeSlack {
    let k = xi.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
    let two_pi_k = 2.0 * PI * k;
    let f_abs = vec_norm(f);
    let g_abs = g.norm();
    let u_bound =
        constants.c_uf * f_abs / (two_pi_k * two_pi_k) + constants.c_ug * g_abs / two_pi_k;
    let p_bound = constants.c_pf * f_abs / two_pi_k + constants.c_pg * g_abs;
    ModeSlack {
        u: u_bound - vec_norm(u),
        u_bound,
        p: p_bound - p.norm(),
        p_bound,
    }
}

/// Both sides of the global bounds at Sobolev index `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlobalEstimate {
    pub s: f64,
    pub u_norm: f64,
    pub u_bound: f64,
    pub p_norm: f64,
    pub p_bound: f64,
}

impl GlobalEstimate {
    pub fn u_margin(&self) -> f64 {
        self.u_bound - self.u_norm
    }

    pub fn p_margin(&self) -> f64 {
        self.p_bound - self.p_norm
    }

    pub fn holds(&self) -> bool {
        let ok = |norm: f64, bound: f64| norm <= bound * (1.0 + ESTIMATE_TOL) + f64::MIN_POSITIVE;
        ok(self.u_norm, self.u_bound) && ok(self.p_norm, self.p_bound)
    }
}

/// `‖u‖_{H^s} ≤ C_uf/(2π²) ‖f‖_{H^{s-2}} + √2 C_ug/(2π) ‖g‖_{H^{s-1}}` and
/// `‖p‖_{H^{s-1}} ≤ C_pf/(√2π) ‖f‖_{H^{s-2}} + √2 C_pg ‖g‖_{H^{s-1}}`.
pub fn verify_global_estimate(
    constants: &EstimateConstants,
    s: f64,
    u: &VectorField,
    p: &ScalarField,
    f: &VectorField,
    g: Option<&ScalarField>,
) -> GlobalEstimate {
    let f_norm = f.sobolev_norm(s - 2.0);
    let g_norm = g.map_or(0.0, |g| g.sobolev_norm(s - 1.0));
    GlobalEstimate {
        s,
        u_norm: u.sobolev_norm(s),
        u_bound: constants.global_uf() * f_norm + constants.global_ug() * g_norm,
        p_norm: p.sobolev_norm(s - 1.0),
        p_bound: constants.global_pf() * f_norm + constants.global_pg() * g_norm,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeCheck {
    pub index: usize,
    pub residual: f64,
    pub slack: ModeSlack,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StokesSolveReport {
    pub constants: EstimateConstants,
    /// Per-mode checks in canonical order, zero mode excluded.
    pub modes: Vec<ModeCheck>,
    pub max_residual: f64,
    pub min_u_slack: f64,
    pub min_p_slack: f64,
    pub estimate_failures: usize,
    pub global: GlobalEstimate,
    /// Largest `|2πi ξ·û - ĝ|` over the lattice.
    pub max_divergence_defect: f64,
    /// A nonzero mean was stripped from the data before solving.
    pub mean_removed: bool,
}

impl StokesSolveReport {
    pub fn estimates_hold(&self) -> bool {
        self.estimate_failures == 0 && self.global.holds()
    }
}

#[derive(Clone, Debug)]
pub struct StokesSolution {
    pub u: VectorField,
    pub p: ScalarField,
    pub report: StokesSolveReport,
}

/// Solves `-𝓛(u, p) = f`, `div u = g` mode by mode; `g = None` means `g ≡ 0`.
/// `s` only selects the Sobolev index of the global bound in the report.
pub fn solve_stokes(
    tensor: &ValidatedTensor,
    f: &VectorField,
    g: Option<&ScalarField>,
    s: f64,
) -> Result<StokesSolution> {
    let lattice = f.lattice().clone();
    let n = lattice.dim();
    if n != tensor.dim() {
        return Err(Error::DimensionMismatch {
            expected: tensor.dim(),
            got: n,
        });
    }
    if let Some(g) = g {
        if g.lattice() != &lattice {
            return Err(Error::LatticeMismatch(
                "forcing and divergence data lattices differ".into(),
            ));
        }
    }
    let (f, f_mean) = f.clone().remove_mean();
    let (g, g_mean) = match g {
        Some(g) => {
            let (g, had) = g.clone().remove_mean();
            (Some(g), had)
        }
        None => (None, false),
    };
    let mean_removed = f_mean || g_mean;
    if mean_removed {
        log::warn!("Stokes data had a nonzero mean; it was projected out before solving");
    }

    let constants = EstimateConstants::from_tensor(tensor);
    let zero = lattice.zero_index();
    let czero = Complex64::new(0.0, 0.0);

    let solved: Vec<(ModeSolution, Option<ModeCheck>)> = (0..lattice.len())
        .into_par_iter()
        .map(|i| {
            if i == zero {
                return Ok((
                    ModeSolution {
                        u: vec![czero; n],
                        p: czero,
                    },
                    None,
                ));
            }
            let xi = lattice.mode(i);
            let fh = f.mode_vector(i);
            let gh = g.as_ref().map_or(czero, |g| g.coeffs()[i]);
            let symbol = assemble_symbol(tensor.tensor(), xi)?;
            let sol = solve_mode(&symbol, &fh, gh)?;
            let (lf, lg) = symbol.apply(&sol.u, sol.p);
            let mut defect: Vec<Complex64> = lf.iter().zip(&fh).map(|(a, b)| a - b).collect();
            defect.push(lg - gh);
            let mut rhs = fh.clone();
            rhs.push(gh);
            let rhs_norm = vec_norm(&rhs);
            let residual = if rhs_norm > 0.0 {
                vec_norm(&defect) / rhs_norm
            } else {
                vec_norm(&defect)
            };
            let slack = verify_mode_estimates(&constants, xi, &fh, gh, &sol.u, sol.p);
            Ok((
                sol,
                Some(ModeCheck {
                    index: i,
                    residual,
                    slack,
                }),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let real = f.is_real() && g.as_ref().is_none_or(|g| g.is_real());
    let mut u_modes = Vec::with_capacity(lattice.len());
    let mut p_coeffs = Vec::with_capacity(lattice.len());
    let mut modes = Vec::with_capacity(lattice.len().saturating_sub(1));
    for (sol, check) in solved {
        u_modes.push(sol.u);
        p_coeffs.push(sol.p);
        if let Some(c) = check {
            modes.push(c);
        }
    }
    let u = VectorField::from_mode_vectors(&lattice, &u_modes, real);
    let p = ScalarField::from_coeffs(&lattice, p_coeffs, real)?;

    let max_residual = modes.iter().map(|m| m.residual).fold(0.0, f64::max);
    let min_u_slack = modes
        .iter()
        .map(|m| m.slack.u)
        .fold(f64::INFINITY, f64::min);
    let min_p_slack = modes
        .iter()
        .map(|m| m.slack.p)
        .fold(f64::INFINITY, f64::min);
    let estimate_failures = modes.iter().filter(|m| !m.slack.holds()).count();
    let global = verify_global_estimate(&constants, s, &u, &p, &f, g.as_ref());
    let div = u.divergence();
    let max_divergence_defect = match &g {
        Some(g) => div.sub(g)?.max_abs(),
        None => div.max_abs(),
    };

    Ok(StokesSolution {
        u,
        p,
        report: StokesSolveReport {
            constants,
            modes,
            max_residual,
            min_u_slack,
            min_p_slack,
            estimate_failures,
            global,
            max_divergence_defect,
            mean_removed,
        },
    })
}

/// The `g ≡ 0` case. The returned velocity is flagged divergence-free; the
/// report's `max_divergence_defect` records `max |2πi ξ·û|` before that
/// flag is set.
pub fn solve_stokes_incompressible(
    tensor: &ValidatedTensor,
    f: &VectorField,
    s: f64,
) -> Result<StokesSolution> {
    let mut sol = solve_stokes(tensor, f, None, s)?;
    debug_assert!(sol.report.max_divergence_defect <= 1e-12 * f.max_abs().max(1.0));
    sol.u = sol.u.leray_project();
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() <= 1e-14 * (1.0 + b.norm())
    }

    #[test]
    fn isotropic_symbol_entries() {
        let t = ViscosityTensor::isotropic(0.0, 1.0, 2);
        let s = assemble_symbol(&t, &[1, 0]).unwrap();
        let four_pi2 = 4.0 * PI * PI;
        assert!(close(s.entry(0, 0), c(2.0 * four_pi2, 0.0)));
        assert!(close(s.entry(1, 1), c(four_pi2, 0.0)));
        assert!(close(s.entry(0, 1), c(0.0, 0.0)));
        assert!(close(s.entry(0, 2), c(0.0, 2.0 * PI)));
        assert!(close(s.entry(2, 0), c(0.0, 2.0 * PI)));
        assert_eq!(s.entry(1, 2), c(0.0, 0.0));
        assert_eq!(s.entry(2, 2), c(0.0, 0.0));
        assert!(matches!(assemble_symbol(&t, &[0, 0]), Err(Error::ZeroMode)));
    }

    #[test]
    fn solve_mode_examples() {
        let t = ViscosityTensor::isotropic(0.0, 1.0, 2);
        let s = assemble_symbol(&t, &[1, 0]).unwrap();
        let z = c(0.0, 0.0);

        let sol = solve_mode(&s, &[z, c(1.0, 0.0)], z).unwrap();
        assert!(close(sol.u[0], z) && close(sol.u[1], c(1.0 / (4.0 * PI * PI), 0.0)));
        assert!(close(sol.p, z));

        let sol = solve_mode(&s, &[c(1.0, 0.0), z], z).unwrap();
        assert!(close(sol.u[0], z) && close(sol.u[1], z));
        assert!(close(sol.p, c(0.0, -1.0 / (2.0 * PI))));

        let sol = solve_mode(&s, &[z, z], c(1.0, 0.0)).unwrap();
        assert!(close(sol.u[0], c(0.0, -1.0 / (2.0 * PI))) && close(sol.u[1], z));
        assert!(close(sol.p, c(2.0, 0.0)));
    }

    #[test]
    fn isotropic_closed_form_examples() {
        let z = c(0.0, 0.0);
        let sol = solve_isotropic_mode(0.0, 1.0, &[1, 0], &[z, c(1.0, 0.0)], z).unwrap();
        assert!(close(sol.u[1], c(1.0 / (4.0 * PI * PI), 0.0)) && close(sol.p, z));
        let sol = solve_isotropic_mode(0.0, 1.0, &[1, 0], &[c(1.0, 0.0), z], z).unwrap();
        assert!(close(sol.p, c(0.0, -1.0 / (2.0 * PI))) && close(sol.u[0], z));
        let sol = solve_isotropic_mode(0.0, 1.0, &[1, 0], &[z, z], c(1.0, 0.0)).unwrap();
        assert!(close(sol.u[0], c(0.0, -1.0 / (2.0 * PI))) && close(sol.p, c(2.0, 0.0)));
        let sol = solve_isotropic_mode(1.0, 2.0, &[0, 1], &[z, z], c(1.0, 0.0)).unwrap();
        assert!(close(sol.p, c(5.0, 0.0)));

        let f = [c(0.3, -0.2), c(1.1, 0.4)];
        let a = solve_isotropic_mode(0.7, 1.3, &[2, -1], &f, z).unwrap();
        let f3: Vec<_> = f.iter().map(|v| v * 3.0).collect();
        let b = solve_isotropic_mode(0.7, 1.3, &[2, -1], &f3, z).unwrap();
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!(close(x * 3.0, *y));
        }
        assert!(close(a.p * 3.0, b.p));

        assert!(matches!(
            solve_isotropic_mode(0.0, 0.0, &[1, 0], &[z, z], z),
            Err(Error::NonPositiveMu(_))
        ));
        assert!(matches!(
            solve_isotropic_mode(0.0, 1.0, &[0, 0], &[z, z], z),
            Err(Error::ZeroMode)
        ));
    }

    #[test]
    fn isotropic_constants_and_tight_transverse_case() {
        let t = ViscosityTensor::isotropic(0.0, 1.0, 2).validate().unwrap();
        let k = EstimateConstants::from_tensor(&t);
        assert!((k.c_uf - 1.0).abs() < 1e-14);
        assert!((k.c_ug - 3.0).abs() < 1e-14 && (k.c_pf - 3.0).abs() < 1e-14);
        assert!((k.c_pg - 6.0).abs() < 1e-14);

        let z = c(0.0, 0.0);
        let f = [z, c(1.0, 0.0)];
        let sol = solve_isotropic_mode(0.0, 1.0, &[1, 0], &f, z).unwrap();
        let slack = verify_mode_estimates(&k, &[1, 0], &f, z, &sol.u, sol.p);
        assert!(slack.u.abs() < 1e-17);
        assert!(slack.holds());

        let slack = verify_mode_estimates(&k, &[1, 0], &[z, z], z, &[z, z], z);
        assert_eq!((slack.u, slack.p), (0.0, 0.0));
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let lat = Lattice::new(2, 3).unwrap();
        let t = ViscosityTensor::isotropic(1.0, 1.0, 2).validate().unwrap();
        let f = VectorField::zeros(&lat, true);
        let g = ScalarField::zeros(&lat, true);
        let sol = solve_stokes(&t, &f, Some(&g), 1.0).unwrap();
        assert_eq!(sol.u.max_abs(), 0.0);
        assert_eq!(sol.p.max_abs(), 0.0);
        assert_eq!(sol.report.global.u_bound, 0.0);
        assert!(sol.report.global.holds());
    }

    #[test]
    fn nonzero_mean_is_projected() {
        let lat = Lattice::new(2, 2).unwrap();
        let t = ViscosityTensor::isotropic(0.0, 1.0, 2).validate().unwrap();
        let f0 = ScalarField::from_modes(
            &lat,
            &[(&[0, 0], c(1.0, 0.0)), (&[1, 1], c(0.5, 0.0))],
            true,
        )
        .unwrap();
        let f = VectorField::from_components(vec![f0.clone(), f0]).unwrap();
        let sol = solve_stokes(&t, &f, None, 1.0).unwrap();
        assert!(sol.report.mean_removed);
        assert_eq!(sol.u.mode_vector(lat.zero_index()), vec![c(0.0, 0.0); 2]);
    }
}
