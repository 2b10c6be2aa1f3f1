//! File formats: the binary spectral dump, the viscosity tensor text format
//! and CSV grid export.
//!
//! Spectral dump layout:
//!
//! ```text
//! SPF1\n
//! n=<int>\n
//! m=<int>\n
//! components=<int>\n
//! real=<0|1>\n
//! <f64 LE re><f64 LE im> …   component-major, canonical lattice order
//! ```

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::GridTransform;
use crate::lattice::Lattice;
use crate::viscosity::ViscosityTensor;

pub const SPF_MAGIC: &[u8] = b"SPF1";

/// Header fields plus coefficients of every component.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDump {
    pub lattice: Lattice,
    pub real: bool,
    pub components: Vec<ScalarField>,
}

impl SpectralDump {
    pub fn from_scalar(g: &ScalarField) -> Self {
        Self {
            lattice: g.lattice().clone(),
            real: g.is_real(),
            components: vec![g.clone()],
        }
    }

    pub fn from_vector(v: &VectorField) -> Self {
        Self {
            lattice: v.lattice().clone(),
            real: v.is_real(),
            components: v.components().to_vec(),
        }
    }

    pub fn into_scalar(self) -> Result<ScalarField> {
        if self.components.len() != 1 {
            return Err(Error::Format(format!(
                "expected a scalar dump, found {} components",
                self.components.len()
            )));
        }
        Ok(self.components.into_iter().next().expect("one component"))
    }

    pub fn into_vector(self) -> Result<VectorField> {
        if self.components.len() != self.lattice.dim() {
            return Err(Error::Format(format!(
                "expected a {}-component vector dump, found {} components",
                self.lattice.dim(),
                self.components.len()
            )));
        }
        VectorField::from_components(self.components)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.components.len() * self.lattice.len() * 16);
        out.extend_from_slice(SPF_MAGIC);
        out.push(b'\n');
        let header = format!(
            "n={}\nm={}\ncomponents={}\nreal={}\n",
            self.lattice.dim(),
            self.lattice.truncation(),
            self.components.len(),
            u8::from(self.real)
        );
        out.extend_from_slice(header.as_bytes());
        for comp in &self.components {
            for c in comp.coeffs() {
                out.extend_from_slice(&c.re.to_le_bytes());
                out.extend_from_slice(&c.im.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut rest = bytes;
        let magic = take_line(&mut rest)?;
        if magic != SPF_MAGIC {
            return Err(Error::Format("missing SPF1 magic".into()));
        }
        let n = header_value(&mut rest, "n")?;
        let m = header_value(&mut rest, "m")?;
        let components = header_value(&mut rest, "components")?;
        let real = match header_value(&mut rest, "real")? {
            0 => false,
            1 => true,
            other => {
                return Err(Error::Format(format!(
                    "real flag must be 0 or 1, got {other}"
                )))
            }
        };
        if n == 0 || m == 0 || components == 0 {
            return Err(Error::Format(format!(
                "n, m and components must be positive (n={n}, m={m}, components={components})"
            )));
        }
        // size the payload before allocating the lattice
        let len = (2 * m as u128 + 1)
            .checked_pow(n as u32)
            .and_then(|l| l.checked_mul(components as u128 * 16))
            .ok_or_else(|| Error::Format("header describes an impossibly large lattice".into()))?;
        if len != rest.len() as u128 {
            return Err(Error::Format(format!(
                "payload has {} bytes, header implies {len}",
                rest.len()
            )));
        }
        let lattice = Lattice::new(n, m)?;
        let per = lattice.len() * 16;
        let mut comps = Vec::with_capacity(components);
        for chunk in rest.chunks_exact(per) {
            let coeffs = chunk
                .chunks_exact(16)
                .map(|b| {
                    let re = f64::from_le_bytes(b[..8].try_into().expect("8 bytes"));
                    let im = f64::from_le_bytes(b[8..].try_into().expect("8 bytes"));
                    if re.is_finite() && im.is_finite() {
                        Ok(Complex64::new(re, im))
                    } else {
                        Err(Error::Format("non-finite coefficient".into()))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            comps.push(ScalarField::from_coeffs(&lattice, coeffs, real)?);
        }
        Ok(Self {
            lattice,
            real,
            components: comps,
        })
    }
}

fn take_line<'a>(rest: &mut &'a [u8]) -> Result<&'a [u8]> {
    let pos = rest
        .iter()
        .take(64)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("truncated header".into()))?;
    let line = &rest[..pos];
    *rest = &rest[pos + 1..];
    Ok(line)
}

fn header_value(rest: &mut &[u8], key: &str) -> Result<usize> {
    let line = take_line(rest)?;
    let text =
        std::str::from_utf8(line).map_err(|_| Error::Format("header is not ASCII".into()))?;
    let value = text
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| Error::Format(format!("expected `{key}=<int>`, found `{text}`")))?;
    value
        .parse()
        .map_err(|_| Error::Format(format!("bad integer in `{text}`")))
}

/// Parses the tensor text format: a `n=<int>` header, then lines
/// `k j alpha beta value` with 1-based indices. Omitted entries are zero;
/// blank lines and `#` comments are ignored; repeated entries are rejected.
pub fn parse_tensor(text: &str) -> Result<ViscosityTensor> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty tensor file".into(),
    })?;
    let n: usize = header
        .strip_prefix("n=")
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n| (1..=8).contains(&n))
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected `n=<1..8>`, found `{header}`"),
        })?;
    let mut tensor = ViscosityTensor::zeros(n);
    let mut seen = vec![false; n.pow(4)];
    for (line, body) in lines {
        let parts: Vec<&str> = body.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(Error::Parse {
                line,
                msg: format!(
                    "expected `k j alpha beta value`, found {} fields",
                    parts.len()
                ),
            });
        }
        let mut idx = [0usize; 4];
        for (slot, p) in idx.iter_mut().zip(&parts[..4]) {
            let v: usize = p.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad index `{p}`"),
            })?;
            if v == 0 || v > n {
                return Err(Error::Parse {
                    line,
                    msg: format!("index {v} outside 1..={n}"),
                });
            }
            *slot = v - 1;
        }
        let value: f64 = parts[4].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad value `{}`", parts[4]),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                line,
                msg: "value must be finite".into(),
            });
        }
        let flat = ((idx[0] * n + idx[1]) * n + idx[2]) * n + idx[3];
        if std::mem::replace(&mut seen[flat], true) {
            return Err(Error::Parse {
                line,
                msg: "duplicate entry".into(),
            });
        }
        tensor.set(idx[0], idx[1], idx[2], idx[3], value);
    }
    Ok(tensor)
}

/// Writes the nonzero entries in the tensor text format.
pub fn format_tensor(tensor: &ViscosityTensor) -> String {
    let n = tensor.dim();
    let mut out = format!("n={n}\n");
    for k in 0..n {
        for j in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let v = tensor.get(k, j, a, b);
                    if v != 0.0 {
                        let _ = writeln!(out, "{} {} {} {} {v:.16e}", k + 1, j + 1, a + 1, b + 1);
                    }
                }
            }
        }
    }
    out
}

/// One row per grid point: coordinates, then each component (real part
/// for real fields, `re,im` pairs otherwise).
pub fn grid_csv(components: &[ScalarField], points: usize) -> Result<String> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidOption("nothing to export".into()))?;
    let n = first.lattice().dim();
    let real = components.iter().all(|c| c.is_real());
    let grid = GridTransform::new(n, points)?;
    let samples = components
        .iter()
        .map(|c| grid.to_grid(c))
        .collect::<Result<Vec<_>>>()?;

    let mut out = String::new();
    let mut header: Vec<String> = (1..=n).map(|j| format!("x{j}")).collect();
    for c in 1..=components.len() {
        if real {
            header.push(format!("c{c}"));
        } else {
            header.push(format!("c{c}_re"));
            header.push(format!("c{c}_im"));
        }
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for k in 0..grid.len() {
        let mut row: Vec<String> = grid
            .coordinates(k)
            .iter()
            .map(|x| format!("{x:.16e}"))
            .collect();
        for s in &samples {
            if real {
                row.push(format!("{:.16e}", s[k].re));
            } else {
                row.push(format!("{:.16e}", s[k].re));
                row.push(format!("{:.16e}", s[k].im));
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}
