//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsf_core::harness::{
    check_identity_54_55, check_korn, check_norm_equivalence, check_norm_equivalence_vector,
    manufacture, random_elliptic_tensor, roundtrip_error, taylor_green, taylor_green_advection,
};
use tsf_core::io::format_tensor;
use tsf_core::navier_stokes::{advection, advection_bruteforce, regularity_slope};
use tsf_core::random::{random_scalar, random_vector, FieldSpec};
use tsf_core::stokes::{assemble_symbol, solve_isotropic_mode, solve_mode};
use tsf_core::{
    picard_solve, solve_stokes, Lattice, NsSolveOptions, ScalarField, ValidatedTensor, VectorField,
    ViscosityTensor,
};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn anisotropic(seed: u64, n: usize) -> ValidatedTensor {
    random_elliptic_tensor(seed, n)
}

/// 50 problems at n = 2, m = 8 and 10 at n = 3, m = 4.
fn stokes_roundtrip() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (n, m, count, base) in [(2, 8, 50u64, 1000u64), (3, 4, 10, 2000)] {
        let lat = Lattice::new(n, m).unwrap();
        for k in 0..count {
            let seed = base + k;
            let t = anisotropic(seed, n);
            let u = random_vector(seed ^ 0x55, &lat, FieldSpec::new(3.0));
            let p = random_scalar(seed ^ 0xaa, &lat, FieldSpec::new(3.0));
            let mp = manufacture(&u, &p, t.tensor(), false).unwrap();
            let sol = solve_stokes(&t, &mp.f, Some(&mp.g), 1.0).unwrap();
            worst = worst.max(roundtrip_error(&sol.u, &sol.p, &mp).unwrap());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-10 && elapsed <= Duration::from_secs(30),
        format!(
            "max relative H1xH0 error {worst:.3e}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn isotropic_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=3usize);
        let lambda = rng.random_range(-5.0..5.0);
        let mu = rng.random_range(0.05..5.0);
        let xi: Vec<i64> = loop {
            let x: Vec<i64> = (0..n).map(|_| rng.random_range(-32..=32)).collect();
            if x.iter().any(|&c| c != 0) {
                break x;
            }
        };
        let mut c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let f: Vec<Complex64> = (0..n).map(|_| c()).collect();
        let g = c();
        let t = ViscosityTensor::isotropic(lambda, mu, n);
        let a = solve_mode(&assemble_symbol(&t, &xi).unwrap(), &f, g).unwrap();
        let b = solve_isotropic_mode(lambda, mu, &xi, &f, g).unwrap();
        let scale =
            b.u.iter()
                .map(|z| z.norm())
                .fold(b.p.norm(), f64::max)
                .max(1.0);
        let diff =
            a.u.iter()
                .zip(&b.u)
                .map(|(x, y)| (x - y).norm())
                .fold((a.p - b.p).norm(), f64::max);
        worst = worst.max(diff / scale);
    }
    outcome(
        worst <= 1e-12,
        format!("1000 modes, max deviation {worst:.3e}"),
    )
}

fn estimate_solves() -> Vec<(ValidatedTensor, VectorField, ScalarField)> {
    (0..20u64)
        .map(|k| {
            let (n, m) = if k < 10 { (2, 8) } else { (3, 4) };
            let lat = Lattice::new(n, m).unwrap();
            let t = anisotropic(500 + k, n);
            let f = random_vector(600 + k, &lat, FieldSpec::new(1.0));
            let g = random_scalar(700 + k, &lat, FieldSpec::new(1.0));
            (t, f, g)
        })
        .collect()
}

fn mode_estimates() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut modes = 0;
    for (t, f, g) in estimate_solves() {
        let sol = solve_stokes(&t, &f, Some(&g), 1.0).unwrap();
        modes += sol.report.modes.len();
        for m in &sol.report.modes {
            worst = worst.min(m.slack.u).min(m.slack.p);
        }
    }
    outcome(
        worst >= -1e-12,
        format!("20 tensors, {modes} modes, min slack {worst:.3e}"),
    )
}

fn global_bound() -> Outcome {
    let mut worst_u = f64::INFINITY;
    let mut worst_p = f64::INFINITY;
    let mut all = true;
    let mut solves = 0;
    for (t, f, g) in estimate_solves() {
        for s in [0.0, 1.0, 2.0] {
            let sol = solve_stokes(&t, &f, Some(&g), s).unwrap();
            let e = sol.report.global;
            all &= e.holds();
            worst_u = worst_u.min(e.u_margin() / e.u_bound);
            worst_p = worst_p.min(e.p_margin() / e.p_bound);
            solves += 1;
        }
    }
    outcome(
        all,
        format!("{solves} solves, min relative margin u {worst_u:.3e}, p {worst_p:.3e}"),
    )
}

fn ellipticity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for k in 0..400 {
        let n = 2 + k % 2;
        let lambda = rng.random_range(-10.0..=10.0);
        let mu = 10.0 * (1.0 - rng.random_range(0.0..0.999));
        let c = ViscosityTensor::isotropic(lambda, mu, n)
            .ellipticity_constant()
            .unwrap();
        worst = worst.max((c - 0.5 / mu).abs());
    }
    // Same μ, different λ: identical constant.
    let spread = [-10.0, -3.0, 0.0, 4.0, 10.0]
        .iter()
        .map(|&l| {
            ViscosityTensor::isotropic(l, 0.8, 3)
                .ellipticity_constant()
                .unwrap()
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
            (lo.min(c), hi.max(c))
        });
    let lambda_spread = spread.1 - spread.0;
    outcome(
        worst <= 1e-10 && lambda_spread <= 1e-10,
        format!("400 draws, max |C - 1/(2mu)| {worst:.3e}, lambda spread {lambda_spread:.3e}"),
    )
}

fn advection_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..20u64 {
        let (n, m) = if k % 4 == 3 {
            (3, 2 + (k as usize / 4) % 3)
        } else {
            (2, 2 + (k as usize % 7))
        };
        let lat = Lattice::new(n, m).unwrap();
        let w = random_vector(900 + k, &lat, FieldSpec::new(2.0).solenoidal());
        let d = advection(&w)
            .unwrap()
            .sub(&advection_bruteforce(&w).unwrap())
            .unwrap()
            .max_abs();
        worst = worst.max(d);
    }
    let lat = Lattice::new(2, 8).unwrap();
    let tg = advection(&taylor_green(&lat).unwrap())
        .unwrap()
        .sub(&taylor_green_advection(&lat).unwrap())
        .unwrap()
        .max_abs();
    outcome(
        worst <= 1e-11 && tg <= 1e-12,
        format!("20 fields, max deviation {worst:.3e}; Taylor-Green deviation {tg:.3e}"),
    )
}

fn identities() -> Outcome {
    let lat = Lattice::new(2, 6).unwrap();
    let lat3 = Lattice::new(3, 3).unwrap();
    let spec = FieldSpec::new(3.0);
    let (mut parts, mut skew, mut korn, mut bracket_ok) = (0.0f64, 0.0f64, 0.0f64, true);
    for k in 0..100u64 {
        let l = if k % 5 == 4 { &lat3 } else { &lat };
        let v1 = if k % 2 == 0 {
            random_vector(k, l, spec.solenoidal())
        } else {
            random_vector(k, l, spec)
        };
        let v2 = random_vector(k + 1000, l, spec);
        let v3 = random_vector(k + 2000, l, spec);
        let d = check_identity_54_55(&v1, &v2, &v3).unwrap();
        parts = parts.max(d.integration_by_parts);
        skew = skew.max(d.skew);
        korn = korn.max(check_korn(&v2).unwrap());
        let (lo, hi) = (2.0 * PI * PI, 4.0 * PI * PI);
        let rs = check_norm_equivalence(&random_scalar(k + 3000, l, spec)).unwrap();
        let rv = check_norm_equivalence_vector(&v3).unwrap();
        bracket_ok &= [rs, rv].iter().all(|&r| r >= lo * (1.0 - 1e-14) && r <= hi);
    }
    let shear =
        ScalarField::from_modes(&lat, &[(&[0, 1], Complex64::new(0.0, -0.5))], true).unwrap();
    let shear = VectorField::from_components(vec![shear, ScalarField::zeros(&lat, true)]).unwrap();
    let shear_ratio = check_korn(&shear).unwrap();
    let mut tight: f64 = 0.0;
    for xi in [[1i64, 0], [0, 1], [-1, 0]] {
        let g = ScalarField::from_modes(&lat, &[(&xi, Complex64::new(0.3, 0.4))], true).unwrap();
        tight = tight
            .max((check_norm_equivalence(&g).unwrap() - 2.0 * PI * PI).abs() / (2.0 * PI * PI));
    }
    let passed = parts <= 1e-11
        && skew <= 1e-11
        && korn <= 2.0 + 1e-12
        && (shear_ratio - 2.0).abs() <= 1e-9
        && bracket_ok
        && tight <= 1e-14;
    outcome(
        passed,
        format!(
            "parts {parts:.3e}, skew {skew:.3e}, max Korn {korn:.12}, shear {shear_ratio:.9}, bracket {bracket_ok}, tightness {tight:.1e}"
        ),
    )
}

fn ns_recovery() -> Outcome {
    let tensors = [
        ViscosityTensor::isotropic(0.5, 1.0, 2).validate().unwrap(),
        anisotropic(31, 2),
        anisotropic(32, 2),
        ViscosityTensor::isotropic(0.0, 0.8, 3).validate().unwrap(),
        anisotropic(33, 3),
        anisotropic(34, 3),
    ];
    let (mut err, mut res, mut div, mut bound, mut iters) =
        (0.0f64, 0.0f64, 0.0f64, f64::INFINITY, 0usize);
    let mut converged = true;
    for (i, t) in tensors.iter().enumerate() {
        let lat = Lattice::new(t.dim(), if t.dim() == 2 { 8 } else { 4 }).unwrap();
        let u = random_vector(70 + i as u64, &lat, FieldSpec::new(3.0).solenoidal());
        let u = u.scaled(0.1 / u.sobolev_norm(1.0));
        let p = random_scalar(80 + i as u64, &lat, FieldSpec::new(3.0));
        let mp = manufacture(&u, &p, t.tensor(), true).unwrap();
        let opts = NsSolveOptions {
            max_iterations: 100,
            tolerance: 1e-10,
            ..Default::default()
        };
        match picard_solve(t, &mp.f, &opts) {
            Ok(sol) => {
                let r = &sol.report;
                err = err.max(sol.u.sub(&mp.u_star).unwrap().sobolev_norm(1.0));
                res = res.max(r.final_residual);
                div = div.max(sol.u.max_divergence());
                bound = bound.min(r.m0 + 1e-9 - sol.u.seminorm(1.0));
                iters = iters.max(r.iterations);
            }
            Err(e) => {
                converged = false;
                eprintln!("  ns case {i}: {e}");
            }
        }
    }
    outcome(
        converged && iters <= 100 && res <= 1e-10 && err <= 1e-8 && div <= 1e-12 && bound >= 0.0,
        format!(
            "6 problems, max iterations {iters}, residual {res:.3e}, H1 error {err:.3e}, div {div:.3e}, min M0 margin {bound:.3e}"
        ),
    )
}

fn regularity() -> Outcome {
    let start = Instant::now();
    let lat = Lattice::new(2, 32).unwrap();
    let t = ViscosityTensor::isotropic(0.0, 1.0, 2).validate().unwrap();
    let mut detail = Vec::new();
    let mut passed = true;
    for a in [4.0, 6.0] {
        let f = random_vector(3, &lat, FieldSpec::new(a).exact_amplitude().solenoidal());
        let f = f.scaled(5.0 / f.sobolev_norm(-1.0));
        let sol = picard_solve(&t, &f, &NsSolveOptions::default()).unwrap();
        let au = regularity_slope(&sol.u).unwrap().value();
        passed &= au >= a + 2.0 - 0.3;
        detail.push(format!("a_f={a}: a_u={au:.3}"));
    }
    let elapsed = start.elapsed();
    passed &= elapsed <= Duration::from_secs(120);
    outcome(
        passed,
        format!("{}, {:.2} s", detail.join(", "), elapsed.as_secs_f64()),
    )
}

fn run_in(dir: &Path, threads: &str, args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_tsf"))
        .current_dir(dir)
        .env("TSF_THREADS", threads)
        .args(args)
        .output()
        .expect("spawn tsf");
    out.status.code().unwrap_or(-1)
}

fn determinism() -> Outcome {
    let root = tempfile::TempDir::new().unwrap();
    let runs = [("1", "a"), ("0", "b"), ("1", "c"), ("0", "d")];
    let mut codes = Vec::new();
    for (threads, name) in runs {
        let dir = root.path().join(name);
        fs::create_dir(&dir).unwrap();
        fs::write(
            dir.join("t.txt"),
            format_tensor(anisotropic(77, 2).tensor()),
        )
        .unwrap();
        let steps: [&[&str]; 5] = [
            &[
                "manufacture",
                "--tensor",
                "t.txt",
                "--seed",
                "11",
                "--m",
                "6",
                "--amplitude",
                "0.1",
                "--nonlinear",
                "true",
                "--out-f",
                "f.spf",
                "--out-u",
                "ustar.spf",
                "--out-p",
                "pstar.spf",
                "--report",
                "man.txt",
            ],
            &[
                "stokes-solve",
                "--tensor",
                "t.txt",
                "--f",
                "f.spf",
                "--out",
                "su.spf",
                "--out-p",
                "sp.spf",
                "--report",
                "stokes.txt",
            ],
            &[
                "ns-solve", "--tensor", "t.txt", "--f", "f.spf", "--out-u", "u.spf", "--out-p",
                "p.spf", "--report", "ns.txt",
            ],
            &[
                "verify",
                "--suite",
                "all",
                "--seed",
                "3",
                "--m",
                "4",
                "--draws",
                "6",
                "--report",
                "verify.txt",
            ],
            &["export-grid", "--input", "u.spf", "--out", "u.csv"],
        ];
        codes.push(
            steps
                .iter()
                .map(|s| run_in(&dir, threads, s))
                .collect::<Vec<_>>(),
        );
    }
    let files = [
        "f.spf",
        "ustar.spf",
        "pstar.spf",
        "man.txt",
        "su.spf",
        "sp.spf",
        "stokes.txt",
        "u.spf",
        "p.spf",
        "ns.txt",
        "verify.txt",
        "u.csv",
    ];
    let mut mismatches = Vec::new();
    for file in files {
        let reference = fs::read(root.path().join("a").join(file)).unwrap_or_default();
        if reference.is_empty() {
            mismatches.push(format!("{file} missing"));
            continue;
        }
        for (_, name) in &runs[1..] {
            if fs::read(root.path().join(name).join(file)).unwrap_or_default() != reference {
                mismatches.push(format!("{file} differs in run {name}"));
            }
        }
    }
    let ok_codes = codes.iter().all(|c| c.iter().all(|&x| x == 0));
    outcome(
        ok_codes && mismatches.is_empty(),
        format!(
            "4 runs (TSF_THREADS=1, auto), {} files compared, exit codes {:?}{}",
            files.len(),
            codes[0],
            if mismatches.is_empty() {
                String::new()
            } else {
                format!(", {}", mismatches.join("; "))
            }
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("stokes round trip", stokes_roundtrip),
        ("isotropic closed form", isotropic_closed_form),
        ("per-mode estimates", mode_estimates),
        ("global bound", global_bound),
        ("ellipticity", ellipticity),
        ("advection oracle", advection_oracle),
        ("identities", identities),
        ("navier-stokes recovery", ns_recovery),
        ("regularity slope", regularity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!(
            "[{}] {:>2} {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
