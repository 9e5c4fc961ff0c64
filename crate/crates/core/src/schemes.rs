//! The five retrieval schemes behind one query / answer / verify interface.
//!
//! Every scheme shares `f(u) = e_i + r·u` over a pair of evaluation points.
//! The verifiable ones add a second, independent share `f_v` and compare what
//! the two halves reconstruct:
//!
//! * `Pi1`: `f_v(u) = v·e_i + r_v·u` with secret `v`; accept iff `v·A = V`.
//! * `Pi2`: as `Pi1` with only `g^v` kept; accept iff `(g^v)^A = g^V`,
//!   checked per basis coordinate when t > 1.
//! * `Pi3`: as `Pi1` but servers return `h(w_j)`; accept iff
//!   `h(A)^v = h(w_1)^a · h(w_2)^b`.
//! * `AltA`: `f_v = f` evaluated at a second secret point pair; accept iff
//!   both pairs reconstruct the same value.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::field::{Database, ExtElem, FieldParams, FpElem};
use crate::grouphash::{hash_setup, setup_group, Digest, GroupParams, HashParams, PrimeOrderGroup};
use crate::sharing::{evaluate_share, lagrange_for, reconstruct, EvalPoints};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    Pi0,
    Pi1,
    Pi2,
    Pi3,
    AltA,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [SchemeId::Pi0, SchemeId::Pi1, SchemeId::Pi2, SchemeId::Pi3, SchemeId::AltA];

    pub fn wire_code(self) -> u8 {
        match self {
            SchemeId::Pi0 => 0x00,
            SchemeId::Pi1 => 0x01,
            SchemeId::Pi2 => 0x02,
            SchemeId::Pi3 => 0x03,
            SchemeId::AltA => 0x0A,
        }
    }

    pub fn from_wire_code(code: u8) -> Option<Self> {
        SchemeId::ALL.into_iter().find(|s| s.wire_code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Pi0 => "pi0",
            SchemeId::Pi1 => "pi1",
            SchemeId::Pi2 => "pi2",
            SchemeId::Pi3 => "pi3",
            SchemeId::AltA => "alt",
        }
    }

    /// Whether queries carry the redundant `f_v` half.
    pub fn has_check_query(self) -> bool {
        self != SchemeId::Pi0
    }

    pub fn needs_group(self) -> bool {
        matches!(self, SchemeId::Pi2 | SchemeId::Pi3)
    }

    pub fn is_public(self) -> bool {
        self == SchemeId::Pi2
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pi0" => Ok(SchemeId::Pi0),
            "pi1" => Ok(SchemeId::Pi1),
            "pi2" => Ok(SchemeId::Pi2),
            "pi3" => Ok(SchemeId::Pi3),
            "alt" | "alt_a" | "a" => Ok(SchemeId::AltA),
            other => Err(Error::InvalidParams(format!("unknown scheme {other:?}"))),
        }
    }
}

/// The query σ_j sent to one server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub scheme: SchemeId,
    pub f_part: Vec<FpElem>,
    pub fv_part: Option<Vec<FpElem>>,
}

impl Query {
    pub fn len(&self) -> usize {
        self.f_part.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_part.is_empty()
    }
}

/// The redundant half of a server answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnswerExtra {
    None,
    Field(ExtElem),
    Digest(Digest),
}

/// The answer π_j from one server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Answer {
    pub scheme: SchemeId,
    pub z: ExtElem,
    pub extra: AnswerExtra,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VerificationKey {
    None,
    Private(FpElem),
    Public(BigUint),
    Points { primary: EvalPoints, check: EvalPoints },
}

/// Auxiliary data for answer generation (aux_A) or verification (aux_V).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Aux {
    pub field: Arc<FieldParams>,
    pub points: Option<EvalPoints>,
    pub group: Option<GroupParams>,
    pub hash: Option<HashParams>,
}

impl Aux {
    pub fn empty(field: Arc<FieldParams>) -> Self {
        Aux { field, points: None, group: None, hash: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RetrievalResult {
    Value(ExtElem),
    Reject,
}

impl RetrievalResult {
    pub fn value(&self) -> Option<&ExtElem> {
        match self {
            RetrievalResult::Value(v) => Some(v),
            RetrievalResult::Reject => None,
        }
    }

    pub fn is_reject(&self) -> bool {
        matches!(self, RetrievalResult::Reject)
    }
}

/// Everything `queries_gen` hands back to the client and servers.
#[derive(Clone, Debug)]
pub struct QueryBundle {
    pub vk: VerificationKey,
    pub sigma1: Query,
    pub sigma2: Query,
    pub aux_a: Aux,
    pub aux_v: Aux,
}

impl QueryBundle {
    pub fn sigma(&self, j: usize) -> &Query {
        if j == 1 {
            &self.sigma1
        } else {
            &self.sigma2
        }
    }
}

/// Secret key material drawn per query.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum KeyCoins {
    None,
    Scalar(FpElem),
    Points { primary: EvalPoints, check: EvalPoints },
}

/// All client randomness for one query. Drawing it separately from
/// evaluating the queries lets tests enumerate it exhaustively.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QueryCoins {
    pub key: KeyCoins,
    pub r: Vec<FpElem>,
    pub r_v: Vec<FpElem>,
}

/// Per-session client parameters: the field, database size, and for the
/// group-based schemes the group and hash parameters.
#[derive(Clone, Debug)]
pub struct ClientSetup {
    scheme: SchemeId,
    field: Arc<FieldParams>,
    m: usize,
    group: Option<GroupParams>,
    hash: Option<HashParams>,
}

impl ClientSetup {
    /// `Pi2` and `Pi3` derive the group deterministically from p; `Pi3`
    /// draws its hash generators from `rng`.
    pub fn new<R: RngCore + ?Sized>(
        scheme: SchemeId,
        field: Arc<FieldParams>,
        m: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParams("database size must be at least 1".into()));
        }
        let group = if scheme.needs_group() { Some(setup_group(field.p())?) } else { None };
        let hash = match (scheme, &group) {
            (SchemeId::Pi3, Some(g)) => Some(hash_setup(&field, g, rng)?),
            _ => None,
        };
        Ok(ClientSetup { scheme, field, m, group, hash })
    }

    /// Uses caller-supplied group parameters (and hash parameters for `Pi3`).
    pub fn with_group(
        scheme: SchemeId,
        field: Arc<FieldParams>,
        m: usize,
        group: Option<GroupParams>,
        hash: Option<HashParams>,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParams("database size must be at least 1".into()));
        }
        if scheme.needs_group() && group.is_none() {
            return Err(Error::MissingGroup(scheme));
        }
        if let Some(g) = &group {
            if g.p() != field.p() {
                return Err(Error::ParamsMismatch("group order differs from p".into()));
            }
        }
        if scheme == SchemeId::Pi3 {
            let h = hash.as_ref().ok_or(Error::MissingAux("hash parameters"))?;
            h.check_field(&field)?;
        }
        Ok(ClientSetup { scheme, field, m, group, hash })
    }

    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn field(&self) -> &Arc<FieldParams> {
        &self.field
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn group(&self) -> Option<&GroupParams> {
        self.group.as_ref()
    }

    pub fn hash(&self) -> Option<&HashParams> {
        self.hash.as_ref()
    }

    pub fn draw_coins<R: RngCore + ?Sized>(&self, rng: &mut R) -> QueryCoins {
        let f = &*self.field;
        let key = match self.scheme {
            SchemeId::Pi0 => KeyCoins::None,
            SchemeId::Pi1 | SchemeId::Pi2 | SchemeId::Pi3 => KeyCoins::Scalar(f.random_nonzero_fp(rng)),
            SchemeId::AltA => {
                let primary = EvalPoints::random(f, rng);
                let check = EvalPoints::random(f, rng);
                KeyCoins::Points { primary, check }
            }
        };
        let r = (0..self.m).map(|_| f.random_fp(rng)).collect();
        let r_v = if self.scheme.has_check_query() {
            (0..self.m).map(|_| f.random_fp(rng)).collect()
        } else {
            Vec::new()
        };
        QueryCoins { key, r, r_v }
    }

    pub fn queries_gen<R: RngCore + ?Sized>(&self, i: usize, rng: &mut R) -> Result<QueryBundle> {
        if i == 0 || i > self.m {
            return Err(Error::IndexOutOfRange { index: i, m: self.m });
        }
        let coins = self.draw_coins(rng);
        self.queries_gen_with(i, &coins)
    }

    /// Deterministic query generation from explicit coins.
    pub fn queries_gen_with(&self, i: usize, coins: &QueryCoins) -> Result<QueryBundle> {
        if i == 0 || i > self.m {
            return Err(Error::IndexOutOfRange { index: i, m: self.m });
        }
        if coins.r.len() != self.m {
            return Err(Error::LengthMismatch { expected: self.m, got: coins.r.len() });
        }
        let f = &*self.field;
        let one = f.fp_one();
        let std_points = EvalPoints::standard(f);
        let mismatch = || Error::VariantMismatch {
            scheme: self.scheme,
            detail: "coins do not match scheme".into(),
        };
        let check_rv = || -> Result<()> {
            if coins.r_v.len() != self.m {
                return Err(Error::LengthMismatch { expected: self.m, got: coins.r_v.len() });
            }
            Ok(())
        };

        let mut aux_a = Aux::empty(self.field.clone());
        let mut aux_v = Aux::empty(self.field.clone());

        let (vk, sigma1, sigma2) = match (self.scheme, &coins.key) {
            (SchemeId::Pi0, KeyCoins::None) => {
                aux_v.points = Some(std_points.clone());
                let q = |j| -> Result<Query> {
                    Ok(Query {
                        scheme: SchemeId::Pi0,
                        f_part: evaluate_share(f, i, &one, std_points.point(j), &coins.r)?,
                        fv_part: None,
                    })
                };
                (VerificationKey::None, q(1)?, q(2)?)
            }
            (SchemeId::Pi1 | SchemeId::Pi2 | SchemeId::Pi3, KeyCoins::Scalar(v)) => {
                if v.is_zero() {
                    return Err(Error::InvalidParams("verification scalar must be nonzero".into()));
                }
                check_rv()?;
                aux_v.points = Some(std_points.clone());
                let q = |j| -> Result<Query> {
                    let u = std_points.point(j);
                    Ok(Query {
                        scheme: self.scheme,
                        f_part: evaluate_share(f, i, &one, u, &coins.r)?,
                        fv_part: Some(evaluate_share(f, i, v, u, &coins.r_v)?),
                    })
                };
                let vk = match self.scheme {
                    SchemeId::Pi2 => {
                        let group = self.group.clone().ok_or(Error::MissingGroup(SchemeId::Pi2))?;
                        let gv = group.gexp(group.g(), v);
                        aux_v.group = Some(group);
                        VerificationKey::Public(gv)
                    }
                    SchemeId::Pi3 => {
                        let hash = self.hash.clone().ok_or(Error::MissingAux("hash parameters"))?;
                        aux_a.hash = Some(hash.clone());
                        aux_v.hash = Some(hash);
                        VerificationKey::Private(v.clone())
                    }
                    _ => VerificationKey::Private(v.clone()),
                };
                (vk, q(1)?, q(2)?)
            }
            (SchemeId::AltA, KeyCoins::Points { primary, check }) => {
                check_rv()?;
                let q = |j| -> Result<Query> {
                    Ok(Query {
                        scheme: SchemeId::AltA,
                        f_part: evaluate_share(f, i, &one, primary.point(j), &coins.r)?,
                        fv_part: Some(evaluate_share(f, i, &one, check.point(j), &coins.r_v)?),
                    })
                };
                let vk = VerificationKey::Points { primary: primary.clone(), check: check.clone() };
                (vk, q(1)?, q(2)?)
            }
            _ => return Err(mismatch()),
        };
        Ok(QueryBundle { vk, sigma1, sigma2, aux_a, aux_v })
    }
}

/// Fresh setup and queries in one call; group-based schemes get new hash
/// generators every time.
pub fn queries_gen<R: RngCore + ?Sized>(
    scheme: SchemeId,
    m: usize,
    i: usize,
    params: &Arc<FieldParams>,
    rng: &mut R,
) -> Result<QueryBundle> {
    ClientSetup::new(scheme, params.clone(), m, rng)?.queries_gen(i, rng)
}

/// Server-side answer: `z = f(u_j)ᵀx`, and `w = f_v(u_j)ᵀx` or its hash.
pub fn answer_gen(scheme: SchemeId, j: usize, sigma: &Query, db: &Database, aux_a: &Aux) -> Result<Answer> {
    if j != 1 && j != 2 {
        return Err(Error::InvalidParams(format!("server index {j} is not 1 or 2")));
    }
    if sigma.scheme != scheme {
        return Err(Error::VariantMismatch { scheme, detail: format!("query is for {}", sigma.scheme) });
    }
    let field = db.params();
    let z = field.dot(&sigma.f_part, db)?;
    let extra = match (scheme, &sigma.fv_part) {
        (SchemeId::Pi0, None) => AnswerExtra::None,
        (SchemeId::Pi1 | SchemeId::Pi2 | SchemeId::AltA, Some(fv)) => AnswerExtra::Field(field.dot(fv, db)?),
        (SchemeId::Pi3, Some(fv)) => {
            let hash = aux_a.hash.as_ref().ok_or(Error::MissingAux("hash parameters"))?;
            hash.check_field(field)?;
            AnswerExtra::Digest(hash.hash_unchecked(&field.dot(fv, db)?))
        }
        _ => {
            return Err(Error::VariantMismatch { scheme, detail: "query shape does not match scheme".into() })
        }
    };
    Ok(Answer { scheme, z, extra })
}

fn field_extra<'a>(scheme: SchemeId, a: &'a Answer) -> Result<&'a ExtElem> {
    match &a.extra {
        AnswerExtra::Field(w) => Ok(w),
        _ => Err(Error::VariantMismatch { scheme, detail: "expected a field-element check answer".into() }),
    }
}

fn digest_extra<'a>(scheme: SchemeId, a: &'a Answer) -> Result<&'a Digest> {
    match &a.extra {
        AnswerExtra::Digest(d) => Ok(d),
        _ => Err(Error::VariantMismatch { scheme, detail: "expected a digest check answer".into() }),
    }
}

/// Client-side reconstruction and check. Returns `Reject` when the check
/// equation fails; malformed inputs are errors.
pub fn verify(
    scheme: SchemeId,
    i: usize,
    vk: &VerificationKey,
    pi1: &Answer,
    pi2: &Answer,
    aux_v: &Aux,
) -> Result<RetrievalResult> {
    if i == 0 {
        return Err(Error::IndexOutOfRange { index: i, m: 0 });
    }
    for pi in [pi1, pi2] {
        if pi.scheme != scheme {
            return Err(Error::VariantMismatch { scheme, detail: format!("answer is for {}", pi.scheme) });
        }
    }
    let field = &*aux_v.field;
    let public_points = || aux_v.points.as_ref().ok_or(Error::MissingAux("evaluation points"));

    let accept = |a: ExtElem, ok: bool| if ok { RetrievalResult::Value(a) } else { RetrievalResult::Reject };

    match (scheme, vk) {
        (SchemeId::Pi0, VerificationKey::None) => {
            if pi1.extra != AnswerExtra::None || pi2.extra != AnswerExtra::None {
                return Err(Error::VariantMismatch { scheme, detail: "unexpected check answer".into() });
            }
            let row = lagrange_for(field, public_points()?);
            Ok(RetrievalResult::Value(reconstruct(field, &pi1.z, &pi2.z, &row)?))
        }
        (SchemeId::Pi1, VerificationKey::Private(v)) => {
            let row = lagrange_for(field, public_points()?);
            let a = reconstruct(field, &pi1.z, &pi2.z, &row)?;
            let check = reconstruct(field, field_extra(scheme, pi1)?, field_extra(scheme, pi2)?, &row)?;
            let ok = field.scale(v, &a) == check;
            Ok(accept(a, ok))
        }
        (SchemeId::Pi2, VerificationKey::Public(gv)) => {
            let group = aux_v.group.as_ref().ok_or(Error::MissingAux("group parameters"))?;
            if !group.contains(gv) {
                return Err(Error::InvalidParams("public key is not in the order-p subgroup".into()));
            }
            let row = lagrange_for(field, public_points()?);
            let a = reconstruct(field, &pi1.z, &pi2.z, &row)?;
            let check = reconstruct(field, field_extra(scheme, pi1)?, field_extra(scheme, pi2)?, &row)?;
            let ok = a
                .coordinates()
                .iter()
                .zip(check.coordinates())
                .all(|(a_l, v_l)| group.exp(gv, a_l) == group.exp(group.generator(), v_l));
            Ok(accept(a, ok))
        }
        (SchemeId::Pi3, VerificationKey::Private(v)) => {
            let hash = aux_v.hash.as_ref().ok_or(Error::MissingAux("hash parameters"))?;
            hash.check_field(field)?;
            let row = lagrange_for(field, public_points()?);
            let a = reconstruct(field, &pi1.z, &pi2.z, &row)?;
            let (h1, h2) = (digest_extra(scheme, pi1)?, digest_extra(scheme, pi2)?);
            let lhs = hash.hscale(&hash.hash_unchecked(&a), v);
            let rhs = hash.combine(&hash.hscale(h1, &row.a), &hash.hscale(h2, &row.b));
            Ok(accept(a, lhs == rhs))
        }
        (SchemeId::AltA, VerificationKey::Points { primary, check }) => {
            let a = reconstruct(field, &pi1.z, &pi2.z, &lagrange_for(field, primary))?;
            let w = reconstruct(
                field,
                field_extra(scheme, pi1)?,
                field_extra(scheme, pi2)?,
                &lagrange_for(field, check),
            )?;
            let ok = a == w;
            Ok(accept(a, ok))
        }
        _ => Err(Error::VariantMismatch { scheme, detail: "verification key does not match scheme".into() }),
    }
}

/// Answers and verification for a generated bundle against honest servers.
pub fn run_honest(scheme: SchemeId, i: usize, bundle: &QueryBundle, db: &Database) -> Result<RetrievalResult> {
    let pi1 = answer_gen(scheme, 1, &bundle.sigma1, db, &bundle.aux_a)?;
    let pi2 = answer_gen(scheme, 2, &bundle.sigma2, db, &bundle.aux_a)?;
    verify(scheme, i, &bundle.vk, &pi1, &pi2, &bundle.aux_v)
}

/// In-process retrieval: setup, queries, two honest answers, verify.
pub fn retrieve<R: RngCore + ?Sized>(
    scheme: SchemeId,
    m: usize,
    i: usize,
    params: &Arc<FieldParams>,
    db: &Database,
    rng: &mut R,
) -> Result<RetrievalResult> {
    if db.len() != m {
        return Err(Error::LengthMismatch { expected: db.len(), got: m });
    }
    let bundle = queries_gen(scheme, m, i, params, rng)?;
    run_honest(scheme, i, &bundle, db)
}
