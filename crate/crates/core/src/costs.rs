//! Capacity formulas and per-scheme communication costs in bits.

use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::field::{byte_width, FieldParams};
use crate::grouphash::GroupParams;
use crate::schemes::SchemeId;

/// `C_m(t, k) = (1 - t/k) / (1 - (t/k)^m)`, the best download rate for `m`
/// files, `k` servers and `t`-privacy.
pub fn capacity(t: u64, k: u64, m: u64) -> Result<BigRational> {
    check_tk(t, k)?;
    if m == 0 {
        return Err(Error::InvalidParams("m must be at least 1".into()));
    }
    let ratio = BigRational::new(BigInt::from(t), BigInt::from(k));
    let one = BigRational::one();
    let pow = num_traits::pow(ratio.clone(), m as usize);
    Ok((&one - &ratio) / (&one - pow))
}

/// `lim_{m→∞} C_m(t, k) = 1 - t/k`.
pub fn asymptotic_capacity(t: u64, k: u64) -> Result<BigRational> {
    check_tk(t, k)?;
    Ok(BigRational::one() - BigRational::new(BigInt::from(t), BigInt::from(k)))
}

fn check_tk(t: u64, k: u64) -> Result<()> {
    if t == 0 || t >= k {
        return Err(Error::InvalidParams(format!("need 1 <= t < k, got t={t} k={k}")));
    }
    Ok(())
}

/// Table coefficients: upload `α·m·log p`, download `β·t·log p + γ·log r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Coefficients {
    pub upload_m: u64,
    pub download_t: u64,
    pub download_r: u64,
}

pub fn coefficients(scheme: SchemeId) -> Coefficients {
    let (upload_m, download_t, download_r) = match scheme {
        SchemeId::Pi0 => (2, 2, 0),
        SchemeId::Pi1 | SchemeId::Pi2 | SchemeId::AltA => (4, 4, 0),
        SchemeId::Pi3 => (4, 2, 2),
    };
    Coefficients { upload_m, download_t, download_r }
}

/// Costs of one retrieval.
///
/// The integer fields use bit lengths (`⌈log2(p+1)⌉`), the `*_real` fields
/// use `log2 p`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostRow {
    pub scheme: SchemeId,
    pub m: u64,
    pub file_bits: u64,
    pub upload_bits: u64,
    pub download_bits: u64,
    pub rate: BigRational,
    pub file_bits_real: f64,
    pub upload_bits_real: f64,
    pub download_bits_real: f64,
}

impl CostRow {
    pub fn rate_f64(&self) -> f64 {
        self.rate.to_f64().unwrap_or(f64::NAN)
    }

    pub fn rate_real(&self) -> f64 {
        self.file_bits_real / self.download_bits_real
    }
}

/// `log2(n)` for arbitrarily large `n`.
pub fn log2_big(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap_or(f64::INFINITY).log2();
    }
    let shift = bits - 64;
    (n >> shift).to_f64().unwrap_or(f64::INFINITY).log2() + shift as f64
}

/// The formula costs for `scheme` over `params` with `m` files.
pub fn cost_row(scheme: SchemeId, m: u64, params: &FieldParams, group: Option<&GroupParams>) -> Result<CostRow> {
    if m == 0 {
        return Err(Error::InvalidParams("m must be at least 1".into()));
    }
    let c = coefficients(scheme);
    let (r_bits, r_log) = match (scheme, group) {
        (SchemeId::Pi3, None) => return Err(Error::MissingGroup(scheme)),
        (SchemeId::Pi3, Some(g)) => (g.r_bits(), log2_big(g.r())),
        _ => (0, 0.0),
    };
    let t = params.degree() as u64;
    let lp = params.p_bits();
    let lp_real = log2_big(params.p());
    let file_bits = t * lp;
    let download_bits = c.download_t * t * lp + c.download_r * r_bits;
    let tf = t as f64;
    Ok(CostRow {
        scheme,
        m,
        file_bits,
        upload_bits: c.upload_m * m * lp,
        download_bits,
        rate: BigRational::new(BigInt::from(file_bits), BigInt::from(download_bits)),
        file_bits_real: tf * lp_real,
        upload_bits_real: (c.upload_m * m) as f64 * lp_real,
        download_bits_real: (c.download_t as f64) * tf * lp_real + c.download_r as f64 * r_log,
    })
}

/// Payload sizes observed on the wire during one session.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub scheme: Option<SchemeId>,
    /// QUERY payload bytes, one entry per frame sent.
    pub query_bytes: Vec<usize>,
    /// ANSWER payload bytes, one entry per frame received.
    pub answer_bytes: Vec<usize>,
    /// HELLO and HELLO_ACK payload bytes, not counted as retrieval cost.
    pub handshake_bytes: usize,
}

/// Costs measured from serialized payloads. The file size is the fixed-width
/// encoding of one record.
pub fn measure_transcript(trace: &Transcript, m: u64, params: &FieldParams) -> Result<CostRow> {
    let scheme = trace.scheme.ok_or_else(|| Error::InvalidParams("transcript has no scheme".into()))?;
    let upload: u64 = trace.query_bytes.iter().map(|&b| b as u64 * 8).sum();
    let download: u64 = trace.answer_bytes.iter().map(|&b| b as u64 * 8).sum();
    if download == 0 || upload == 0 {
        return Err(Error::InvalidParams("transcript has no query or answer".into()));
    }
    let file = (params.degree() * byte_width(params.p()) * 8) as u64;
    Ok(CostRow {
        scheme,
        m,
        file_bits: file,
        upload_bits: upload,
        download_bits: download,
        rate: BigRational::new(BigInt::from(file), BigInt::from(download)),
        file_bits_real: file as f64,
        upload_bits_real: upload as f64,
        download_bits_real: download as f64,
    })
}

/// Adversary success probability as printed in the comparison table.
pub fn table_pr(scheme: SchemeId, p: &BigUint) -> String {
    let p = BigInt::from(p.clone());
    match scheme {
        SchemeId::Pi0 => "1".into(),
        SchemeId::Pi1 => BigRational::new(BigInt::one(), &p - 1).to_string(),
        SchemeId::AltA => {
            let d = &p - 2;
            BigRational::new(2 * (&p - 1), &d * &d).to_string()
        }
        SchemeId::Pi2 | SchemeId::Pi3 => "negl".into(),
    }
}

/// Reference column: Scheme 3 of Zhang and Wang layered over `Pi0`. Not
/// implemented here, only printed for comparison.
pub mod reference {
    use super::*;

    pub const NAME: &str = "zw-scheme3";
    pub const COEFFICIENTS: Coefficients = Coefficients { upload_m: 4, download_t: 4, download_r: 0 };

    /// `(p - 1) / (p^2 - 3)`.
    pub fn pr(p: &BigUint) -> BigRational {
        let p = BigInt::from(p.clone());
        BigRational::new(&p - 1, &p * &p - 3)
    }
}

fn verif_labels(scheme: SchemeId) -> (&'static str, &'static str) {
    match scheme {
        SchemeId::Pi0 => ("no", "no"),
        SchemeId::Pi1 | SchemeId::AltA => ("IT", "private"),
        SchemeId::Pi2 => ("DLog", "public"),
        SchemeId::Pi3 => ("DLog", "private"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Csv,
}

/// One line per scheme plus the reference column.
pub fn render_table(rows: &[CostRow], params: &FieldParams, format: TableFormat) -> String {
    let p = params.p();
    let mut out = String::new();
    let header = ["scheme", "file_bits", "upload_bits", "download_bits", "rate", "rate_real", "pr", "verif"];
    match format {
        TableFormat::Csv => {
            let _ = writeln!(out, "{}", header.join(","));
        }
        TableFormat::Text => {
            let _ = writeln!(
                out,
                "{:<11} {:>10} {:>12} {:>13} {:>22} {:>9} {:>24} {}",
                header[0], header[1], header[2], header[3], header[4], header[5], header[6], header[7]
            );
        }
    }
    let mut line = |name: &str, file: u64, up: u64, down: u64, rate: String, real: f64, pr: String, verif: String| {
        match format {
            TableFormat::Csv => {
                let _ = writeln!(out, "{name},{file},{up},{down},{rate},{real:.6},{pr},{verif}");
            }
            TableFormat::Text => {
                let _ = writeln!(
                    out,
                    "{name:<11} {file:>10} {up:>12} {down:>13} {rate:>22} {real:>9.6} {pr:>24} {verif}"
                );
            }
        }
    };
    for row in rows {
        let (kind, who) = verif_labels(row.scheme);
        line(
            row.scheme.name(),
            row.file_bits,
            row.upload_bits,
            row.download_bits,
            row.rate.to_string(),
            row.rate_real(),
            table_pr(row.scheme, p),
            format!("{kind}/{who}"),
        );
    }
    if let Some(first) = rows.first() {
        let (lp, t) = (params.p_bits(), params.degree() as u64);
        let c = reference::COEFFICIENTS;
        let down = c.download_t * t * lp;
        line(
            reference::NAME,
            t * lp,
            c.upload_m * first.m * lp,
            down,
            BigRational::new(BigInt::from(t * lp), BigInt::from(down)).to_string(),
            0.25,
            reference::pr(p).to_string(),
            "IT/private".into(),
        );
    }
    out
}
