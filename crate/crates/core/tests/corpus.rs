//! Replays the checked-in fuzz corpus seeds through the parsers.

use std::fs;
use std::path::PathBuf;

use tsf_core::io::{parse_tensor, SpectralDump};

fn seed(target: &str, name: &str) -> Vec<u8> {
    let path: PathBuf = [
        env!("CARGO_MANIFEST_DIR"),
        "..",
        "..",
        "fuzz",
        "corpus",
        target,
        name,
    ]
    .iter()
    .collect();
    fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn spectral_dump_seeds() {
    let s = SpectralDump::decode(&seed("decode_spf", "scalar_2d")).unwrap();
    assert!(s.real);
    assert_eq!(s.encode(), seed("decode_spf", "scalar_2d"));
    let g = s.into_scalar().unwrap();
    assert_eq!(g.get(&[0, 1]).unwrap().re, 0.5);
    let v = SpectralDump::decode(&seed("decode_spf", "vector_2d")).unwrap();
    assert_eq!(v.into_vector().unwrap().dim(), 2);
    assert!(SpectralDump::decode(&seed("decode_spf", "truncated")).is_err());
    assert!(SpectralDump::decode(&seed("decode_spf", "bad_magic")).is_err());
}

#[test]
fn tensor_seeds() {
    let text = |n| String::from_utf8(seed("parse_tensor", n)).unwrap();
    let t = parse_tensor(&text("isotropic2")).unwrap();
    assert!((t.ellipticity_constant().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(parse_tensor(&text("single3")).unwrap().dim(), 3);
    assert!(parse_tensor(&text("nan")).is_err());
    assert!(parse_tensor(&text("bad_dim")).is_err());
}
