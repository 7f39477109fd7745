//! One-shot federation: each site reduces its released network to a
//! [`SourceSummary`] and ships it once; the coordinator never sees adjacency
//! data.
//!
//! Wire frame (all fields little-endian, 8 bytes wide):
//!
//! ```text
//! offset  field
//!      0  magic   b"TNS1" (4 bytes)
//!      4  version u64
//!     12  n       u64
//!     20  k       u64
//!     28  l       u64
//!     36  q       f64
//!     44  q'      f64
//!     52  rho_hat f64
//!     60  eigenspace, n*k f64 values, row-major
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result, WireError};
use crate::netgen::BinaryNetwork;
use crate::privacy::{prepare, PrivacyParams};
use crate::spectral::{orthonormality_error, top_k_eigvecs, EigenOrder, Eigenspace};
use crate::weighting::density_of_matrix;

pub const MAGIC: [u8; 4] = *b"TNS1";
pub const FORMAT_VERSION: u64 = 1;
pub const HEADER_LEN: usize = 60;
/// Orthonormality tolerance applied when decoding.
pub const DECODE_TOL: f64 = 1e-6;

/// Everything a source site transmits.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSummary {
    pub eigenspace: Eigenspace,
    pub rho_hat: f64,
    pub params: PrivacyParams,
    pub l: usize,
    pub format_version: u64,
}

impl SourceSummary {
    pub fn new(eigenspace: Eigenspace, rho_hat: f64, params: PrivacyParams, l: usize) -> Self {
        Self {
            eigenspace,
            rho_hat,
            params,
            l,
            format_version: FORMAT_VERSION,
        }
    }

    pub fn n(&self) -> usize {
        self.eigenspace.n()
    }

    pub fn k(&self) -> usize {
        self.eigenspace.k()
    }

    /// Summary of an arbitrary symmetric matrix held at a site (e.g. an
    /// exact population matrix in tests).
    pub fn from_matrix(
        mat: &DMatrix<f64>,
        params: PrivacyParams,
        k: usize,
        l: usize,
        order: EigenOrder,
    ) -> Result<Self> {
        let top = top_k_eigvecs(mat, k, order)?;
        if top.degenerate {
            log::warn!("site {l}: eigen-gap at the k-th cut is zero; summary subspace is not unique");
        }
        let rho = density_of_matrix(mat);
        if rho.clamped {
            log::warn!("site {l}: debiased density {} clamped to {}", rho.raw, rho.value);
        }
        Ok(Self::new(top.space, rho.value, params, l))
    }
}

/// Site-side computation: debias (unless ablated), take the leading
/// eigenvectors and the density estimate. The released matrix does not
/// leave this function.
pub fn local_site_compute(
    a_tilde: &BinaryNetwork,
    params: PrivacyParams,
    k: usize,
    l: usize,
    debias_flag: bool,
    order: EigenOrder,
) -> Result<SourceSummary> {
    let a_hat = prepare(a_tilde, params, debias_flag)?;
    SourceSummary::from_matrix(a_hat.matrix(), params, k, l, order)
}

pub fn encode(s: &SourceSummary) -> Vec<u8> {
    let (n, k) = (s.n(), s.k());
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * k);
    out.extend_from_slice(&MAGIC);
    for v in [s.format_version, n as u64, k as u64, s.l as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [s.params.q(), s.params.q_prime(), s.rho_hat] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let b = s.eigenspace.basis();
    for i in 0..n {
        for j in 0..k {
            out.extend_from_slice(&b[(i, j)].to_le_bytes());
        }
    }
    out
}

fn u64_at(bytes: &[u8], off: usize) -> u64 {
    u64::from_le_bytes(bytes[off..off + 8].try_into().expect("8 bytes"))
}

fn f64_at(bytes: &[u8], off: usize) -> f64 {
    f64::from_le_bytes(bytes[off..off + 8].try_into().expect("8 bytes"))
}

pub fn decode(bytes: &[u8]) -> std::result::Result<SourceSummary, WireError> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        let mut got = [0u8; 4];
        let m = bytes.len().min(4);
        got[..m].copy_from_slice(&bytes[..m]);
        return Err(WireError::BadMagic(got));
    }
    if bytes.len() < HEADER_LEN {
        return Err(WireError::TruncatedHeader {
            got: bytes.len(),
            need: HEADER_LEN,
        });
    }
    let version = u64_at(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(WireError::UnsupportedVersion(version));
    }
    let n = u64_at(bytes, 12);
    let k = u64_at(bytes, 20);
    let l = u64_at(bytes, 28);
    if k == 0 || k > n {
        return Err(WireError::InvalidHeader(format!("k={k} with n={n}")));
    }
    let params = PrivacyParams::new(f64_at(bytes, 36), f64_at(bytes, 44))
        .map_err(|e| WireError::InvalidHeader(e.to_string()))?;
    let rho_hat = f64_at(bytes, 52);
    if !rho_hat.is_finite() {
        return Err(WireError::InvalidHeader(format!("rho_hat={rho_hat}")));
    }
    let need = usize::try_from(n)
        .ok()
        .and_then(|n| n.checked_mul(k as usize))
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(HEADER_LEN))
        .ok_or_else(|| WireError::InvalidHeader(format!("payload size overflows for n={n}, k={k}")))?;
    if bytes.len() < need {
        return Err(WireError::TruncatedPayload {
            got: bytes.len() - HEADER_LEN,
            need: need - HEADER_LEN,
        });
    }
    if bytes.len() > need {
        return Err(WireError::TrailingBytes(bytes.len() - need));
    }
    let (n, k) = (n as usize, k as usize);
    let basis = DMatrix::from_fn(n, k, |i, j| f64_at(bytes, HEADER_LEN + 8 * (i * k + j)));
    let err = orthonormality_error(&basis);
    if !(err <= DECODE_TOL) {
        return Err(WireError::InvalidEigenspace(err));
    }
    Ok(SourceSummary {
        eigenspace: Eigenspace::new_unchecked(basis),
        rho_hat,
        params,
        l: l as usize,
        format_version: version,
    })
}

/// `summary_<l>.tns`.
pub fn summary_file_name(l: usize) -> String {
    format!("summary_{l}.tns")
}

pub fn write_summary(dir: &Path, s: &SourceSummary) -> Result<PathBuf> {
    let path = dir.join(summary_file_name(s.l));
    std::fs::write(&path, encode(s)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_summary(path: &Path) -> Result<SourceSummary> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode(&bytes)?)
}

/// Human-readable dump: a `key,value` header block, then one CSV line per
/// eigenspace row. Floats use shortest round-trip formatting.
pub fn encode_csv(s: &SourceSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "format_version,{}", s.format_version);
    let _ = writeln!(out, "n,{}", s.n());
    let _ = writeln!(out, "k,{}", s.k());
    let _ = writeln!(out, "l,{}", s.l);
    let _ = writeln!(out, "q,{:?}", s.params.q());
    let _ = writeln!(out, "q_prime,{:?}", s.params.q_prime());
    let _ = writeln!(out, "rho_hat,{:?}", s.rho_hat);
    let b = s.eigenspace.basis();
    for row in b.row_iter() {
        let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

pub fn decode_csv(text: &str) -> Result<SourceSummary> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: "<csv summary>".into(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let mut header = std::collections::HashMap::new();
    for key in ["format_version", "n", "k", "l", "q", "q_prime", "rho_hat"] {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("missing header field {key}")))?;
        let (k, v) = line
            .split_once(',')
            .ok_or_else(|| parse_err(ln + 1, "expected key,value".into()))?;
        if k != key {
            return Err(parse_err(ln + 1, format!("expected {key}, found {k}")));
        }
        header.insert(key, v.to_string());
    }
    let num = |key: &str| -> Result<f64> {
        header[key]
            .parse::<f64>()
            .map_err(|e| parse_err(0, format!("{key}: {e}")))
    };
    let int = |key: &str| -> Result<usize> {
        header[key]
            .parse::<usize>()
            .map_err(|e| parse_err(0, format!("{key}: {e}")))
    };
    let (n, k) = (int("n")?, int("k")?);
    let mut data = Vec::with_capacity(n * k);
    for (ln, line) in lines {
        for tok in line.split(',') {
            data.push(
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(ln + 1, e.to_string()))?,
            );
        }
    }
    if data.len() != n * k {
        return Err(parse_err(0, format!("expected {} values, found {}", n * k, data.len())));
    }
    let basis = DMatrix::from_row_slice(n, k, &data);
    let err = orthonormality_error(&basis);
    if !(err <= DECODE_TOL) {
        return Err(WireError::InvalidEigenspace(err).into());
    }
    Ok(SourceSummary {
        eigenspace: Eigenspace::new_unchecked(basis),
        rho_hat: num("rho_hat")?,
        params: PrivacyParams::new(num("q")?, num("q_prime")?)?,
        l: int("l")?,
        format_version: int("format_version")? as u64,
    })
}
