//! Seeded test-data generators.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{ScalarField, VectorField};
use crate::lattice::Lattice;

/// How coefficient magnitudes are drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Amplitude {
    /// Uniform in `[½, 1) · ρ(ξ)^{-a}`.
    Jittered,
    /// Exactly `ρ(ξ)^{-a}`, random phase only.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSpec {
    pub decay: f64,
    pub zero_mean: bool,
    pub divergence_free: bool,
    pub amplitude: Amplitude,
}

impl FieldSpec {
    pub fn new(decay: f64) -> Self {
        Self {
            decay,
            zero_mean: true,
            divergence_free: false,
            amplitude: Amplitude::Jittered,
        }
    }

    pub fn solenoidal(mut self) -> Self {
        self.divergence_free = true;
        self.zero_mean = true;
        self
    }

    pub fn with_mean(mut self) -> Self {
        self.zero_mean = false;
        self
    }

    pub fn exact_amplitude(mut self) -> Self {
        self.amplitude = Amplitude::Exact;
        self
    }
}

fn draw_scalar(rng: &mut ChaCha8Rng, lattice: &Lattice, spec: &FieldSpec) -> ScalarField {
    let mut coeffs = vec![Complex64::new(0.0, 0.0); lattice.len()];
    let zero = lattice.zero_index();
    // Upper half of the cube is drawn; the lower half mirrors it.
    for i in zero..lattice.len() {
        let envelope = lattice.rho_sq(i).powf(-0.5 * spec.decay);
        let r = match spec.amplitude {
            Amplitude::Jittered => rng.random_range(0.5..1.0),
            Amplitude::Exact => 1.0,
        } * envelope;
        let phase = rng.random_range(0.0..2.0 * PI);
        if i == zero {
            coeffs[i] = if spec.zero_mean {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(r * phase.cos(), 0.0)
            };
        } else {
            let c = Complex64::from_polar(r, phase);
            coeffs[i] = c;
            coeffs[lattice.negated_index(i)] = c.conj();
        }
    }
    ScalarField::from_coeffs(lattice, coeffs, true).expect("lattice-sized buffer")
}

/// A real scalar field with `|ĝ(ξ)| ~ ρ(ξ)^{-a}`.
pub fn random_scalar(seed: u64, lattice: &Lattice, spec: FieldSpec) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_scalar(&mut rng, lattice, &spec)
}

/// A real vector field; with `divergence_free` the draw is Leray-projected.
pub fn random_vector(seed: u64, lattice: &Lattice, spec: FieldSpec) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = (0..lattice.dim())
        .map(|_| draw_scalar(&mut rng, lattice, &spec))
        .collect();
    let v = VectorField::from_components(comps).expect("components share the lattice");
    if spec.divergence_free {
        v.leray_project()
    } else {
        v
    }
}
