use tsf_core::harness::{manufacture, random_elliptic_tensor};
use tsf_core::random::{random_vector, FieldSpec};
use tsf_core::{picard_solve, Lattice, NsSolveOptions, ScalarField, ViscosityTensor};

#[test]
fn recovers_small_manufactured_flows() {
    let lat = Lattice::new(2, 4).unwrap();
    let tensors = [
        ViscosityTensor::isotropic(0.5, 1.0, 2).validate().unwrap(),
        random_elliptic_tensor(1, 2),
        random_elliptic_tensor(2, 2),
    ];
    for (i, t) in tensors.iter().enumerate() {
        let u = random_vector(40 + i as u64, &lat, FieldSpec::new(3.0).solenoidal());
        let u = u.scaled(0.1 / u.sobolev_norm(1.0));
        let mp = manufacture(&u, &ScalarField::zeros(&lat, true), t.tensor(), true).unwrap();
        let sol = picard_solve(
            t,
            &mp.f,
            &NsSolveOptions {
                max_iterations: 100,
                ..Default::default()
            },
        )
        .unwrap();
        let err = sol.u.sub(&mp.u_star).unwrap().sobolev_norm(1.0);
        eprintln!(
            "{i}: iters {} res {:e} err {:e} div {:e} h1 {} m0 {}",
            sol.report.iterations,
            sol.report.final_residual,
            err,
            sol.report.max_divergence,
            sol.report.u_h1,
            sol.report.m0
        );
        assert!(err < 1e-8);
    }
}
