//! The stationary incompressible Navier-Stokes system
//! `-𝓛(u, p) = f - (u·∇)u`, `div u = 0`, solved by damped fixed-point
//! iteration on `u = 𝒰(f - Bu)` with the Stokes inverse `(𝒰, 𝒫)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::GridTransform;
use crate::lattice::Lattice;
use crate::stokes::solve_stokes_incompressible;
use crate::viscosity::ValidatedTensor;

/// Floor for the adaptive relaxation parameter.
pub const MIN_OMEGA: f64 = 1.0 / 64.0;
/// Divergence (relative to the field's derivative scale) below which a
/// field counts as solenoidal for the zero-mean identity of `Bw`.
const SOLENOIDAL_TOL: f64 = 1e-12;

fn grid_for(lattice: &Lattice, dealias: bool) -> Result<GridTransform> {
    if dealias {
        GridTransform::dealiased(lattice.dim(), lattice.truncation())
    } else {
        GridTransform::new(lattice.dim(), lattice.side())
    }
}

fn derivative_scale(w: &VectorField) -> f64 {
    let lattice = w.lattice();
    2.0 * PI * lattice.truncation() as f64 * (lattice.dim() as f64).sqrt() * w.max_abs()
}

pub(crate) fn is_divergence_free(w: &VectorField) -> bool {
    w.is_solenoidal()
        || w.max_divergence() <= SOLENOIDAL_TOL * derivative_scale(w).max(f64::MIN_POSITIVE)
}

/// `Bw = (w·∇)w` on the dealiased grid, truncated back to the lattice of `w`.
/// For divergence-free `w` the zero mode vanishes identically and is set to
/// zero; otherwise it is kept.
pub fn advection(w: &VectorField) -> Result<VectorField> {
    advection_on_grid(w, true)
}

/// As [`advection`], with `dealias = false` evaluating products on the
/// `2m + 1` grid (aliased).
pub fn advection_on_grid(w: &VectorField, dealias: bool) -> Result<VectorField> {
    if !w.is_real() {
        return Err(Error::NonReal);
    }
    let lattice = w.lattice();
    let n = lattice.dim();
    let grid = grid_for(lattice, dealias)?;
    let w_grid = w
        .components()
        .par_iter()
        .map(|c| grid.to_grid(c))
        .collect::<Result<Vec<_>>>()?;
    let grad = w.gradient();
    let comps = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
            for (j, wj) in w_grid.iter().enumerate() {
                let d = grid.to_grid(grad.entry(k, j))?;
                for ((a, x), y) in acc.iter_mut().zip(wj).zip(&d) {
                    *a += x * y;
                }
            }
            grid.from_grid(&acc, lattice, true)
        })
        .collect::<Result<Vec<_>>>()?;
    let out = VectorField::from_components(comps)?;
    if is_divergence_free(w) {
        Ok(out.remove_mean().0)
    } else {
        Ok(out)
    }
}

/// Direct lattice convolution
/// `(Bw)_k(ξ) = Σ_η ŵ_j(ξ - η) 2πi η_j ŵ_k(η)`, restricted to the lattice.
pub fn advection_bruteforce(w: &VectorField) -> Result<VectorField> {
    if !w.is_real() {
        return Err(Error::NonReal);
    }
    let lattice = w.lattice();
    let n = lattice.dim();
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    let modes: Vec<Vec<Complex64>> = (0..lattice.len())
        .into_par_iter()
        .map(|i| {
            let xi = lattice.mode(i);
            let mut out = vec![Complex64::new(0.0, 0.0); n];
            let mut diff = vec![0i64; n];
            for e in 0..lattice.len() {
                let eta = lattice.mode(e);
                for ((d, &x), &y) in diff.iter_mut().zip(xi).zip(eta) {
                    *d = x - y;
                }
                let Some(r) = lattice.index_of(&diff) else {
                    continue;
                };
                // ŵ(ξ-η)·2πiη
                let transport = (0..n).fold(Complex64::new(0.0, 0.0), |acc, j| {
                    acc + w.component(j).coeffs()[r] * eta[j] as f64
                }) * two_pi_i;
                for (k, o) in out.iter_mut().enumerate() {
                    *o += transport * w.component(k).coeffs()[e];
                }
            }
            out
        })
        .collect();
    Ok(VectorField::from_mode_vectors(lattice, &modes, true).hermitian_part())
}

/// `⟨(v₁·∇)v₂, v₃⟩`, evaluated exactly for band-limited fields on the
/// `3m + 1` grid.
pub fn trilinear_form(v1: &VectorField, v2: &VectorField, v3: &VectorField) -> Result<Complex64> {
    let lattice = v1.lattice();
    if v2.lattice() != lattice || v3.lattice() != lattice {
        return Err(Error::LatticeMismatch(
            "trilinear form arguments differ in lattice".into(),
        ));
    }
    let n = lattice.dim();
    let grid = GridTransform::dealiased(n, lattice.truncation())?;
    let a: Vec<Vec<Complex64>> = v1
        .components()
        .iter()
        .map(|c| grid.to_grid(c))
        .collect::<Result<_>>()?;
    let c: Vec<Vec<Complex64>> = v3
        .components()
        .iter()
        .map(|c| grid.to_grid(c))
        .collect::<Result<_>>()?;
    let grad = v2.gradient();
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, ck) in c.iter().enumerate() {
        let mut transport = vec![Complex64::new(0.0, 0.0); grid.len()];
        for (j, aj) in a.iter().enumerate() {
            let d = grid.to_grid(grad.entry(k, j))?;
            for ((t, x), y) in transport.iter_mut().zip(aj).zip(&d) {
                *t += x * y;
            }
        }
        acc += transport
            .iter()
            .zip(ck)
            .fold(Complex64::new(0.0, 0.0), |s, (t, z)| s + t * z.conj());
    }
    Ok(acc / grid.len() as f64)
}

/// `⟨(∇·v₁) v₃, v₂⟩` on the `3m + 1` grid.
pub fn divergence_form(v1: &VectorField, v3: &VectorField, v2: &VectorField) -> Result<Complex64> {
    let lattice = v1.lattice();
    let grid = GridTransform::dealiased(lattice.dim(), lattice.truncation())?;
    let div = grid.to_grid(&v1.divergence())?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (c3, c2) in v3.components().iter().zip(v2.components()) {
        let x = grid.to_grid(c3)?;
        let y = grid.to_grid(c2)?;
        for ((d, a), b) in div.iter().zip(&x).zip(&y) {
            acc += d * a * b.conj();
        }
    }
    Ok(acc / grid.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticRatio {
    pub source_index: f64,
    pub target_index: f64,
    /// `‖Bw‖_{H^t} / ‖w‖²_{H^s}`, zero for a zero field.
    pub ratio: f64,
}

/// Target index of the product estimate: `2s - 1 - n/2` for `0 < s < n/2`,
/// `s - 1` for `s > n/2`, and `s - 3/2` at `s = n/2`.
pub fn product_target_index(n: usize, s: f64) -> Result<f64> {
    let half = n as f64 / 2.0;
    if s <= 0.0 {
        return Err(Error::InvalidOption(format!(
            "product estimate needs s > 0, got {s}"
        )));
    }
    Ok(if s < half {
        2.0 * s - 1.0 - half
    } else if s > half {
        s - 1.0
    } else {
        s - 1.5
    })
}

/// Empirical ratio for the quadratic bound on `B`. The product is evaluated
/// on the doubled lattice so no part of `Bw` is truncated.
pub fn check_quadratic_bound(w: &VectorField, s: f64) -> Result<QuadraticRatio> {
    let lattice = w.lattice();
    let target_index = product_target_index(lattice.dim(), s)?;
    let denom = w.sobolev_norm(s).powi(2);
    if denom == 0.0 {
        return Ok(QuadraticRatio {
            source_index: s,
            target_index,
            ratio: 0.0,
        });
    }
    let wide = Lattice::new(lattice.dim(), 2 * lattice.truncation())?;
    let bw = advection(&w.resampled(&wide)?)?;
    Ok(QuadraticRatio {
        source_index: s,
        target_index,
        ratio: bw.sobolev_norm(target_index) / denom,
    })
}

/// `M₀ = C_𝔸 ‖f‖_{H^{-1}} / π²`.
pub fn leray_bound(tensor: &ValidatedTensor, f: &VectorField) -> f64 {
    tensor.ellipticity_constant() * f.sobolev_norm(-1.0) / (PI * PI)
}

/// `‖-𝓛(u, p) + Bu - f‖_{H^{-1}}`.
pub fn residual(
    tensor: &ValidatedTensor,
    u: &VectorField,
    p: &ScalarField,
    f: &VectorField,
) -> Result<f64> {
    residual_with(tensor, u, p, f, true)
}

fn residual_with(
    tensor: &ValidatedTensor,
    u: &VectorField,
    p: &ScalarField,
    f: &VectorField,
    dealias: bool,
) -> Result<f64> {
    let stokes = tensor.tensor().stokes_operator(u, p)?.scaled(-1.0);
    let bu = advection_on_grid(u, dealias)?;
    Ok(stokes.add(&bu)?.sub(f)?.sobolev_norm(-1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialGuess {
    Zero,
    Stokes,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NsSolveOptions {
    pub omega: f64,
    pub max_iterations: usize,
    /// Stop when the `H^{-1}` residual falls to this value.
    pub tolerance: f64,
    pub dealias: bool,
    pub initial: InitialGuess,
}

impl Default for NsSolveOptions {
    fn default() -> Self {
        Self {
            omega: 1.0,
            max_iterations: 200,
            tolerance: 1e-10,
            dealias: true,
            initial: InitialGuess::Stokes,
        }
    }
}

impl NsSolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::InvalidOption(format!(
                "omega must lie in (0, 1], got {}",
                self.omega
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::InvalidOption(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidOption(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NsSolveReport {
    pub iterations: usize,
    /// `H^{-1}` residual at each iterate, before the update.
    pub residual_history: Vec<f64>,
    /// Relaxation used for the update following each residual.
    pub omega_history: Vec<f64>,
    pub final_residual: f64,
    pub final_omega: f64,
    /// `C_𝔸 ‖f‖_{H^{-1}} / π²`.
    pub m0: f64,
    /// `‖u‖_{Ḣ¹}` of the returned (or last) iterate.
    pub u_h1: f64,
    pub bound_holds: bool,
    pub diverged: bool,
    /// `⟨Bu, u⟩`, zero for solenoidal `u`.
    pub energy: f64,
    pub max_divergence: f64,
    pub mean_removed: bool,
}

#[derive(Clone, Debug)]
pub struct NsSolution {
    pub u: VectorField,
    pub p: ScalarField,
    pub report: NsSolveReport,
}

/// Damped fixed-point iteration `u ← (1-ω)u + ω 𝒰(f - Bu)`. The relaxation
/// is halved whenever the residual grows; growth at `ω = 1/64` is reported
/// as divergence.
pub fn picard_solve(
    tensor: &ValidatedTensor,
    f: &VectorField,
    opts: &NsSolveOptions,
) -> Result<NsSolution> {
    opts.validate()?;
    let lattice = f.lattice().clone();
    let n = lattice.dim();
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidOption(format!(
            "Navier-Stokes solves need n in {{2, 3}}, got {n}"
        )));
    }
    if n != tensor.dim() {
        return Err(Error::DimensionMismatch {
            expected: tensor.dim(),
            got: n,
        });
    }
    if !f.is_real() {
        return Err(Error::NonReal);
    }
    let (f, mean_removed) = f.clone().remove_mean();
    if mean_removed {
        log::warn!("forcing had a nonzero mean; it was projected out before solving");
    }
    let m0 = leray_bound(tensor, &f);

    let stokes = |rhs: &VectorField| solve_stokes_incompressible(tensor, rhs, 1.0);
    let mut u = match opts.initial {
        InitialGuess::Zero => VectorField::zeros(&lattice, true),
        InitialGuess::Stokes => stokes(&f)?.u,
    };

    let mut omega = opts.omega;
    let mut residual_history = Vec::new();
    let mut omega_history = Vec::new();
    let mut prev = f64::INFINITY;

    let finish = |u: VectorField,
                  p: ScalarField,
                  history: Vec<f64>,
                  omegas: Vec<f64>,
                  omega: f64,
                  diverged: bool| {
        let u_h1 = u.seminorm(1.0);
        let energy = advection_on_grid(&u, opts.dealias)
            .and_then(|bu| bu.inner(&u))
            .map(|c| c.re)
            .unwrap_or(f64::NAN);
        let report = NsSolveReport {
            iterations: history.len(),
            final_residual: history.last().copied().unwrap_or(f64::NAN),
            residual_history: history,
            omega_history: omegas,
            final_omega: omega,
            m0,
            u_h1,
            bound_holds: u_h1 <= m0 + 1e-9,
            diverged,
            energy,
            max_divergence: u.max_divergence(),
            mean_removed,
        };
        NsSolution { u, p, report }
    };

    for _ in 0..opts.max_iterations {
        let bu = advection_on_grid(&u, opts.dealias)?;
        let rhs = f.sub(&bu)?;
        let step = stokes(&rhs)?;
        // -𝓛(u, p̃) - (f - Bu) = -𝔏(u - ũ)
        let defect = tensor.tensor().apply(&u.sub(&step.u)?)?;
        let res = defect.sobolev_norm(-1.0);
        residual_history.push(res);

        if res <= opts.tolerance {
            omega_history.push(omega);
            return Ok(finish(
                u,
                step.p,
                residual_history,
                omega_history,
                omega,
                false,
            ));
        }
        if !res.is_finite() || res > prev {
            if omega <= MIN_OMEGA || !res.is_finite() {
                omega_history.push(omega);
                let sol = finish(u, step.p, residual_history, omega_history, omega, true);
                return Err(Error::Diverged {
                    report: Box::new(sol.report),
                });
            }
            omega = (omega * 0.5).max(MIN_OMEGA);
        }
        omega_history.push(omega);
        prev = res;
        u = u.blend(&step.u, omega)?.leray_project();
    }
    let bu = advection_on_grid(&u, opts.dealias)?;
    let step = stokes(&f.sub(&bu)?)?;
    let sol = finish(u, step.p, residual_history, omega_history, omega, false);
    Err(Error::MaxIterations {
        report: Box::new(sol.report),
    })
}

/// Outcome of the spectral decay fit.
#[derive(Clone, Debug, PartialEq)]
pub enum DecaySlope {
    /// The outermost shell of the lattice is empty: the spectrum is compact.
    BandLimited,
    Fitted {
        /// `a` in `|û| ~ ρ^{-a}`.
        slope: f64,
        /// `a - n/2`, the Sobolev-membership threshold the slope implies.
        sobolev_index: f64,
        /// `(ρ, max |û|)` per nonempty dyadic shell.
        shells: Vec<(f64, f64)>,
    },
}

impl DecaySlope {
    /// The slope, with `+∞` for band-limited spectra.
    pub fn value(&self) -> f64 {
        match self {
            DecaySlope::BandLimited => f64::INFINITY,
            DecaySlope::Fitted { slope, .. } => *slope,
        }
    }
}

/// Fits `log max|û|` against `log ρ` over dyadic shells `2^k ≤ ρ < 2^{k+1}`,
/// taking in each shell the mode of largest magnitude. Shells whose maximum
/// is below `1e-14` of the global maximum count as empty.
pub fn regularity_slope(u: &VectorField) -> Result<DecaySlope> {
    let lattice = u.lattice();
    let mut shells: Vec<Option<(f64, f64)>> = Vec::new();
    for i in lattice.nonzero_indices() {
        let rho = lattice.rho_sq(i).sqrt();
        let k = rho.log2().floor() as usize;
        if shells.len() <= k {
            shells.resize(k + 1, None);
        }
        let mag = u
            .components()
            .iter()
            .map(|c| c.coeffs()[i].norm_sqr())
            .sum::<f64>()
            .sqrt();
        match &mut shells[k] {
            Some((r, m)) if mag > *m => {
                *r = rho;
                *m = mag;
            }
            None => shells[k] = Some((rho, mag)),
            _ => {}
        }
    }
    let global = shells.iter().flatten().map(|s| s.1).fold(0.0, f64::max);
    if global == 0.0 {
        return Err(Error::TooFewShells { found: 0 });
    }
    let floor = 1e-14 * global;
    let nonempty: Vec<(f64, f64)> = shells
        .iter()
        .flatten()
        .copied()
        .filter(|s| s.1 > floor)
        .collect();
    let outer_empty = shells.last().and_then(|s| *s).is_none_or(|s| s.1 <= floor);
    if outer_empty {
        return Ok(DecaySlope::BandLimited);
    }
    if nonempty.len() < 3 {
        return Err(Error::TooFewShells {
            found: nonempty.len(),
        });
    }
    let pts: Vec<(f64, f64)> = nonempty.iter().map(|&(r, m)| (r.ln(), m.ln())).collect();
    let count = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / count;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / count;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = -sxy / sxx;
    Ok(DecaySlope::Fitted {
        slope,
        sobolev_index: slope - lattice.dim() as f64 / 2.0,
        shells: nonempty,
    })
}
