//! Plain-text database files.
//!
//! ```text
//! vpir-db v1
//! p=97 t=2 m=3 irr=5,0,1
//! 12,40
//! 0,96
//! 7,7
//! ```
//!
//! One record per line, `t` decimal coefficients with the constant term
//! first. LF line endings.

use std::path::Path;
use std::sync::Arc;

use num_bigint::BigUint;
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};
use crate::field::{Database, FieldParams};

pub const HEADER: &str = "vpir-db v1";

/// Canonical serialization.
pub fn to_string(db: &Database) -> String {
    let f = db.params();
    let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(",");
    let mut out = format!(
        "{HEADER}\np={} t={} m={} irr={}\n",
        f.p(),
        f.degree(),
        db.len(),
        join(&mut f.irreducible().iter().map(|c| c.value().to_string()))
    );
    for rec in db.records() {
        out.push_str(&join(&mut rec.coeffs().iter().map(|c| c.value().to_string())));
        out.push('\n');
    }
    out
}

fn parse_uint(s: &str, what: &str) -> Result<BigUint> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::DbParse(format!("{what}: expected a decimal integer, got {s:?}")));
    }
    s.parse().map_err(|_| Error::DbParse(format!("{what}: bad integer {s:?}")))
}

fn parse_list(s: &str, what: &str) -> Result<Vec<BigUint>> {
    s.split(',').map(|c| parse_uint(c, what)).collect()
}

pub fn parse(text: &str) -> Result<Database> {
    if text.contains('\r') {
        return Err(Error::DbParse("CR line endings are not allowed".into()));
    }
    let mut lines = text.strip_suffix('\n').unwrap_or(text).split('\n');
    if lines.next() != Some(HEADER) {
        return Err(Error::DbParse(format!("first line must be {HEADER:?}")));
    }
    let params_line = lines.next().ok_or_else(|| Error::DbParse("missing parameter line".into()))?;
    let (mut p, mut t, mut m, mut irr) = (None, None, None, None);
    for field in params_line.split(' ') {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| Error::DbParse(format!("bad parameter {field:?}")))?;
        let slot = match k {
            "p" => &mut p,
            "t" => &mut t,
            "m" => &mut m,
            "irr" => &mut irr,
            _ => return Err(Error::DbParse(format!("unknown parameter {k:?}"))),
        };
        if slot.replace(v).is_some() {
            return Err(Error::DbParse(format!("duplicate parameter {k:?}")));
        }
    }
    let missing = |k: &str| Error::DbParse(format!("missing parameter {k}"));
    let p = parse_uint(p.ok_or_else(|| missing("p"))?, "p")?;
    let small = |s: &str, what: &str| -> Result<usize> {
        parse_uint(s, what)?
            .try_into()
            .map_err(|_| Error::DbParse(format!("{what} is too large")))
    };
    let t = small(t.ok_or_else(|| missing("t"))?, "t")?;
    let m = small(m.ok_or_else(|| missing("m"))?, "m")?;
    let irr = parse_list(irr.ok_or_else(|| missing("irr"))?, "irr")?;
    let params = Arc::new(FieldParams::new(p, t, irr).map_err(|e| Error::DbParse(e.to_string()))?);

    let mut records = Vec::with_capacity(m);
    for (n, line) in lines.enumerate() {
        let coeffs = parse_list(line, &format!("record {}", n + 1))?;
        if coeffs.len() != t {
            return Err(Error::DbParse(format!("record {} has {} coefficients, expected {t}", n + 1, coeffs.len())));
        }
        let coeffs = coeffs
            .into_iter()
            .map(|c| params.fp_canonical(c))
            .collect::<Result<Vec<_>>>()
            .map_err(|_| Error::DbParse(format!("record {} has a coefficient >= p", n + 1)))?;
        records.push(params.ext(coeffs)?);
    }
    if records.len() != m {
        return Err(Error::DbParse(format!("header says m={m} but found {} records", records.len())));
    }
    Database::new(params, records).map_err(|e| Error::DbParse(e.to_string()))
}

pub fn read(path: &Path) -> Result<Database> {
    parse(&std::fs::read_to_string(path)?)
}

pub fn write(db: &Database, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, to_string(db))?)
}

/// SHA-256 of the canonical serialization; detects divergent replicas.
pub fn fingerprint(db: &Database) -> [u8; 32] {
    Sha256::digest(to_string(db).as_bytes()).into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    const SAMPLE: &str = "vpir-db v1\np=97 t=2 m=3 irr=5,0,1\n12,40\n0,96\n7,7\n";

    #[test]
    fn parse_sample() {
        let db = parse(SAMPLE).unwrap();
        assert_eq!(db.len(), 3);
        assert_eq!(db.params().p(), &BigUint::from(97u32));
        assert_eq!(db.get(2).unwrap().to_string(), "0,96");
        assert_eq!(to_string(&db), SAMPLE);
    }

    #[test]
    fn round_trip_random() {
        let f = Arc::new(FieldParams::generate(BigUint::from(257u32), 4).unwrap());
        let db = Database::random(f, 9, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        let text = to_string(&db);
        let back = parse(&text).unwrap();
        assert_eq!(back.records(), db.records());
        assert_eq!(fingerprint(&back), fingerprint(&db));
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "",
            "vpir-db v2\np=97 t=2 m=1 irr=5,0,1\n1,2\n",
            "vpir-db v1\np=97 t=2 m=2 irr=5,0,1\n1,2\n",
            "vpir-db v1\np=97 t=2 m=1 irr=5,0,1\n1,2,3\n",
            "vpir-db v1\np=97 t=2 m=1 irr=5,0,1\n1,97\n",
            "vpir-db v1\np=97 t=2 m=1 irr=1,0,1\n1,2\n",
            "vpir-db v1\np=97 t=2 m=1 irr=5,0,1 x=1\n1,2\n",
            "vpir-db v1\np=97 t=2 m=1 irr=5,0,1\n1,-2\n",
            "vpir-db v1\r\np=97 t=2 m=1 irr=5,0,1\r\n1,2\r\n",
            "vpir-db v1\np=97 t=2 m=0 irr=5,0,1\n",
        ] {
            assert!(matches!(parse(bad), Err(Error::DbParse(_))), "{bad:?}");
        }
    }

    #[test]
    fn fingerprint_sees_one_coefficient() {
        let a = parse(SAMPLE).unwrap();
        let b = parse(&SAMPLE.replace("7,7", "7,8")).unwrap();
        assert_ne!(fingerprint(&a), fingerprint(&b));
    }
}
