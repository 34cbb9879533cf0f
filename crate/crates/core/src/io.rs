//! Dataset (MDS) and parameter file formats.
//!
//! Text datasets start with `MDS1 n d_c d_r` followed by `n` blocks of `d_c`
//! lines holding `d_r` numbers. Binary datasets start with the bytes `MDSB`,
//! three little-endian `u64` counts and then every value as a little-endian
//! `f64`, observation by observation, row by row.

use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;

use crate::error::{Result, TbfaError};
use crate::model::{MatrixDataset, TbfaParams};

pub const TEXT_MAGIC: &str = "MDS1";
pub const BINARY_MAGIC: &[u8; 4] = b"MDSB";
const PARAMS_MAGIC: &str = "TBFA-PARAMS 1";

fn parse_err(line: usize, msg: impl Into<String>) -> TbfaError {
    TbfaError::Parse { line, msg: msg.into() }
}

/// Text encoding; `{}` formatting of `f64` round-trips exactly.
pub fn write_mds_text(data: &MatrixDataset) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{TEXT_MAGIC} {} {} {}", data.n(), data.d_c(), data.d_r());
    for x in data.observations() {
        for i in 0..x.nrows() {
            let row: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
    }
    s
}

pub fn write_mds_binary(data: &MatrixDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(28 + 8 * data.n() * data.d_c() * data.d_r());
    out.extend_from_slice(BINARY_MAGIC);
    for v in [data.n(), data.d_c(), data.d_r()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for x in data.observations() {
        for i in 0..x.nrows() {
            for j in 0..x.ncols() {
                out.extend_from_slice(&x[(i, j)].to_le_bytes());
            }
        }
    }
    out
}

/// Reads either encoding, chosen by the leading magic.
pub fn read_mds(bytes: &[u8]) -> Result<MatrixDataset> {
    if bytes.starts_with(BINARY_MAGIC) {
        read_mds_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|e| parse_err(1, format!("not UTF-8 text: {e}")))?;
        read_mds_text(text)
    }
}

fn dims(n: usize, d_c: usize, d_r: usize) -> Result<usize> {
    n.checked_mul(d_c)
        .and_then(|v| v.checked_mul(d_r))
        .ok_or_else(|| parse_err(1, "dimensions overflow"))
}

pub fn read_mds_text(text: &str) -> Result<MatrixDataset> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l)).filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 4 || f[0] != TEXT_MAGIC {
        return Err(parse_err(1, format!("expected '{TEXT_MAGIC} n d_c d_r'")));
    }
    let count = |s: &str| s.parse::<usize>().map_err(|_| parse_err(1, format!("bad count '{s}'")));
    let (n, d_c, d_r) = (count(f[1])?, count(f[2])?, count(f[3])?);
    dims(n, d_c, d_r)?;
    let mut obs = Vec::with_capacity(n);
    for _ in 0..n {
        let mut m = DMatrix::zeros(d_c, d_r);
        for i in 0..d_c {
            let (ln, line) = lines.next().ok_or_else(|| parse_err(0, "unexpected end of file"))?;
            let vals: Vec<&str> = line.split_whitespace().collect();
            if vals.len() != d_r {
                return Err(parse_err(ln, format!("expected {d_r} values, found {}", vals.len())));
            }
            for (j, v) in vals.iter().enumerate() {
                m[(i, j)] = v.parse().map_err(|_| parse_err(ln, format!("bad number '{v}'")))?;
            }
        }
        obs.push(m);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing data after the last block"));
    }
    MatrixDataset::with_shape(d_c, d_r, obs)
}

pub fn read_mds_binary(bytes: &[u8]) -> Result<MatrixDataset> {
    if bytes.len() < 28 || !bytes.starts_with(BINARY_MAGIC) {
        return Err(parse_err(0, "truncated binary header"));
    }
    let u = |k: usize| {
        let v = u64::from_le_bytes(bytes[4 + 8 * k..12 + 8 * k].try_into().unwrap());
        usize::try_from(v).map_err(|_| parse_err(0, "count too large"))
    };
    let (n, d_c, d_r) = (u(0)?, u(1)?, u(2)?);
    let total = dims(n, d_c, d_r)?;
    let body = &bytes[28..];
    if Some(body.len()) != total.checked_mul(8) {
        return Err(parse_err(0, format!("expected {total} values, found {} bytes", body.len())));
    }
    let mut vals = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let obs = (0..n)
        .map(|_| {
            let mut m = DMatrix::zeros(d_c, d_r);
            for i in 0..d_c {
                for j in 0..d_r {
                    m[(i, j)] = vals.next().unwrap();
                }
            }
            m
        })
        .collect();
    MatrixDataset::with_shape(d_c, d_r, obs)
}

fn push_matrix(s: &mut String, name: &str, m: &DMatrix<f64>) {
    let _ = writeln!(s, "{name} {} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
}

fn push_vector(s: &mut String, name: &str, v: &DVector<f64>) {
    let _ = writeln!(s, "{name} {}", v.len());
    let vals: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    s.push_str(&vals.join(" "));
    s.push('\n');
}

/// Key-value header plus row-major matrix blocks; ν is `inf` in Gaussian mode.
pub fn write_params(p: &TbfaParams) -> String {
    let mut s = format!("{PARAMS_MAGIC}\n");
    let _ = writeln!(s, "gaussian {}", p.gaussian);
    let _ = writeln!(s, "nu {}", if p.gaussian { f64::INFINITY } else { p.nu });
    push_matrix(&mut s, "W", &p.w);
    push_matrix(&mut s, "C", &p.c);
    push_vector(&mut s, "psi_c", &p.psi_c);
    push_matrix(&mut s, "R", &p.r);
    push_vector(&mut s, "psi_r", &p.psi_r);
    s
}

struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    at: usize,
}

impl<'a> Cursor<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        let last = self.lines.last().map_or(0, |l| l.0);
        let l = self.lines.get(self.at).copied().ok_or_else(|| parse_err(last, "unexpected end of file"))?;
        self.at += 1;
        Ok(l)
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (ln, line) = self.next()?;
        let mut f = line.split_whitespace();
        if f.next() != Some(key) {
            return Err(parse_err(ln, format!("expected '{key}'")));
        }
        Ok((ln, f.collect()))
    }

    fn numbers(&mut self, count: usize) -> Result<Vec<f64>> {
        let (ln, line) = self.next()?;
        let v = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(ln, format!("bad number '{t}'"))))
            .collect::<Result<Vec<_>>>()?;
        if v.len() != count {
            return Err(parse_err(ln, format!("expected {count} values, found {}", v.len())));
        }
        Ok(v)
    }

    fn matrix(&mut self, key: &str) -> Result<DMatrix<f64>> {
        let (ln, f) = self.keyed(key)?;
        let d = f
            .iter()
            .map(|t| t.parse::<usize>().map_err(|_| parse_err(ln, format!("bad dimension '{t}'"))))
            .collect::<Result<Vec<_>>>()?;
        if d.len() != 2 {
            return Err(parse_err(ln, format!("'{key}' needs rows and columns")));
        }
        let mut m = DMatrix::zeros(d[0], d[1]);
        // rows of a zero-column matrix are blank and already skipped
        let rows = if d[1] == 0 { 0 } else { d[0] };
        for i in 0..rows {
            let row = self.numbers(d[1])?;
            for (j, v) in row.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    fn vector(&mut self, key: &str) -> Result<DVector<f64>> {
        let (ln, f) = self.keyed(key)?;
        let len: usize = match f.as_slice() {
            [t] => t.parse().map_err(|_| parse_err(ln, format!("bad length '{t}'")))?,
            _ => return Err(parse_err(ln, format!("'{key}' needs a length"))),
        };
        Ok(DVector::from_vec(self.numbers(len)?))
    }
}

pub fn read_params(text: &str) -> Result<TbfaParams> {
    let lines = text.lines().enumerate().map(|(k, l)| (k + 1, l)).filter(|(_, l)| !l.trim().is_empty()).collect();
    let mut c = Cursor { lines, at: 0 };
    let (ln, head) = c.next()?;
    if head.trim() != PARAMS_MAGIC {
        return Err(parse_err(ln, format!("expected '{PARAMS_MAGIC}'")));
    }
    let (ln, g) = c.keyed("gaussian")?;
    let gaussian = match g.as_slice() {
        ["true"] => true,
        ["false"] => false,
        _ => return Err(parse_err(ln, "gaussian must be true or false")),
    };
    let (ln, nu) = c.keyed("nu")?;
    let nu: f64 = match nu.as_slice() {
        [t] => t.parse().map_err(|_| parse_err(ln, format!("bad nu '{t}'")))?,
        _ => return Err(parse_err(ln, "nu needs one value")),
    };
    let p = TbfaParams {
        w: c.matrix("W")?,
        c: c.matrix("C")?,
        psi_c: c.vector("psi_c")?,
        r: c.matrix("R")?,
        psi_r: c.vector("psi_r")?,
        nu,
        gaussian,
    };
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MatrixDataset {
        let obs = (0..3).map(|n| DMatrix::from_fn(2, 3, |i, j| (n * 6 + i * 3 + j) as f64 / 7.0 - 1e-300)).collect();
        MatrixDataset::new(obs).unwrap()
    }

    #[test]
    fn header_and_layout() {
        let s = write_mds_text(&sample());
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("MDS1 3 2 3"));
        assert_eq!(s.lines().count(), 1 + 3 * 2);
        let b = write_mds_binary(&sample());
        assert_eq!(&b[..4], b"MDSB");
        assert_eq!(b.len(), 28 + 8 * 18);
        // row-major: second value is x[0,1]
        assert_eq!(f64::from_le_bytes(b[36..44].try_into().unwrap()), sample().get(0)[(0, 1)]);
    }

    #[test]
    fn text_errors_carry_line_numbers() {
        let e = read_mds_text("MDS1 1 2 2\n1 2\n3\n").unwrap_err();
        assert_eq!(e, TbfaError::Parse { line: 3, msg: "expected 2 values, found 1".into() });
        assert!(read_mds_text("MDS2 1 1 1\n0\n").is_err());
        assert!(read_mds_text("MDS1 1 1 1\n0\n5\n").is_err());
        assert!(read_mds_binary(b"MDSB\x01").is_err());
    }

    #[test]
    fn gaussian_params_store_infinite_nu() {
        let p = TbfaParams::new_gaussian(
            DMatrix::zeros(3, 3),
            DMatrix::from_element(3, 1, 0.5),
            DVector::from_element(3, 1.0),
            DMatrix::from_element(3, 1, -0.5),
            DVector::from_element(3, 2.0),
        )
        .unwrap();
        let s = write_params(&p);
        assert!(s.contains("nu inf\n"));
        assert_eq!(read_params(&s).unwrap(), p);
    }
}
