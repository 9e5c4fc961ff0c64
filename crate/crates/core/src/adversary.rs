//! Security experiments against a single malicious server.
//!
//! The challenger generates queries, hands σ_j to the adversary, computes the
//! other server's answer honestly and runs `verify`. The adversary wins when
//! the client outputs a value other than `x_i` without rejecting.
//!
//! Win probabilities are measured two ways: exhaustively over the client's
//! key space for strategies whose tampering is a finite distribution of
//! additive offsets, and by Monte-Carlo repetition of the full experiment.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Database, ExtElem, FieldParams, FpElem};
use crate::grouphash::{Digest, HashParams};
use crate::schemes::{
    answer_gen, verify, Answer, AnswerExtra, Aux, ClientSetup, Query, RetrievalResult, SchemeId,
    VerificationKey,
};
use crate::sharing::lagrange;

/// Largest p for which the Π1-style key space is enumerated.
pub const EXACT_KEY_LIMIT: u64 = 1 << 16;

/// Largest |L| enumerated for the secret-point scheme (|L| at p = 31).
pub const ALT_DEFAULT_BUDGET: u64 = 30 * 30 * 29 * 29;

/// Trials per independently seeded work unit in Monte-Carlo runs.
const CHUNK: u64 = 4096;

/// Confidence level of the reported upper bound.
pub const CONFIDENCE: f64 = 0.99;

/// What the adversary sees in one experiment.
pub struct AdversaryView<'a> {
    pub scheme: SchemeId,
    /// Index of the corrupted server.
    pub j: usize,
    pub sigma: &'a Query,
    pub db: &'a Database,
    pub i: usize,
    pub aux_a: &'a Aux,
    /// `g^v`, present only in the public-verification game.
    pub vk_public: Option<&'a BigUint>,
}

impl AdversaryView<'_> {
    pub fn field(&self) -> &FieldParams {
        self.db.params()
    }

    /// What an honest server would send.
    pub fn honest_answer(&self) -> Result<Answer> {
        answer_gen(self.scheme, self.j, self.sigma, self.db, self.aux_a)
    }
}

/// An additive deviation from the honest answer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Offset {
    /// `ẑ = z + Δ0`, `ŵ = w + Δ1`; for hashed answers the digest is
    /// multiplied by `h(Δ1)`.
    Field { d0: ExtElem, d1: ExtElem },
    /// `ẑ = z + Δ0`, digest multiplied by an arbitrary group element.
    Digest { d0: ExtElem, factor: Digest },
}

impl Offset {
    pub fn d0(&self) -> &ExtElem {
        match self {
            Offset::Field { d0, .. } | Offset::Digest { d0, .. } => d0,
        }
    }

    /// Applies the offset to an honest answer.
    pub fn apply(&self, honest: Answer, field: &FieldParams, hash: Option<&HashParams>) -> Result<Answer> {
        let z = field.ext_add(&honest.z, self.d0());
        let extra = match (honest.extra, self) {
            (AnswerExtra::None, _) => AnswerExtra::None,
            (AnswerExtra::Field(w), Offset::Field { d1, .. }) => AnswerExtra::Field(field.ext_add(&w, d1)),
            (AnswerExtra::Digest(d), Offset::Field { d1, .. }) => {
                let hash = hash.ok_or(Error::MissingAux("hash parameters"))?;
                AnswerExtra::Digest(hash.combine(&d, &hash.hash_unchecked(d1)))
            }
            (AnswerExtra::Digest(d), Offset::Digest { factor, .. }) => {
                let hash = hash.ok_or(Error::MissingAux("hash parameters"))?;
                AnswerExtra::Digest(hash.combine(&d, factor))
            }
            (AnswerExtra::Field(_), Offset::Digest { .. }) => {
                return Err(Error::VariantMismatch {
                    scheme: honest.scheme,
                    detail: "digest offset on a field answer".into(),
                })
            }
        };
        Ok(Answer { scheme: honest.scheme, z, extra })
    }
}

/// A finite distribution over offsets; weights sum to one.
pub type OffsetSupport = Vec<(BigRational, Offset)>;

/// A one-shot malicious server.
pub trait AdversaryStrategy: Send + Sync {
    fn name(&self) -> String;

    fn craft(&self, view: &AdversaryView<'_>, rng: &mut dyn RngCore) -> Result<Answer>;

    /// The exact offset distribution, when the strategy is additive and its
    /// support is small enough to enumerate.
    fn offset_support(&self, _scheme: SchemeId, _field: &FieldParams, _j: usize) -> Option<OffsetSupport> {
        None
    }
}

/// Answers honestly.
pub struct HonestPassthrough;

impl AdversaryStrategy for HonestPassthrough {
    fn name(&self) -> String {
        "honest".into()
    }

    fn craft(&self, view: &AdversaryView<'_>, _rng: &mut dyn RngCore) -> Result<Answer> {
        view.honest_answer()
    }

    fn offset_support(&self, _scheme: SchemeId, field: &FieldParams, _j: usize) -> Option<OffsetSupport> {
        Some(vec![(BigRational::one(), Offset::Field { d0: field.ext_zero(), d1: field.ext_zero() })])
    }
}

/// Adds fixed offsets `(Δ0, Δ1)` to `(z, w)`; on hashed answers the digest
/// absorbs `h(Δ1)`.
pub struct AdditiveTamper {
    pub d0: ExtElem,
    pub d1: ExtElem,
}

impl AdditiveTamper {
    pub fn scalar(field: &FieldParams, d0: u64, d1: u64) -> Self {
        AdditiveTamper { d0: field.embed(&field.fp(d0)), d1: field.embed(&field.fp(d1)) }
    }
}

impl AdversaryStrategy for AdditiveTamper {
    fn name(&self) -> String {
        format!("additive(d0={}, d1={})", self.d0, self.d1)
    }

    fn craft(&self, view: &AdversaryView<'_>, _rng: &mut dyn RngCore) -> Result<Answer> {
        let offset = Offset::Field { d0: self.d0.clone(), d1: self.d1.clone() };
        offset.apply(view.honest_answer()?, view.field(), view.aux_a.hash.as_ref())
    }

    fn offset_support(&self, _scheme: SchemeId, _field: &FieldParams, _j: usize) -> Option<OffsetSupport> {
        Some(vec![(BigRational::one(), Offset::Field { d0: self.d0.clone(), d1: self.d1.clone() })])
    }
}

/// Replaces the whole answer with uniformly random values of the right
/// shape.
pub struct RandomTamper;

impl AdversaryStrategy for RandomTamper {
    fn name(&self) -> String {
        "random".into()
    }

    fn craft(&self, view: &AdversaryView<'_>, rng: &mut dyn RngCore) -> Result<Answer> {
        let field = view.field();
        let z = field.random_ext(rng);
        let extra = match view.scheme {
            SchemeId::Pi0 => AnswerExtra::None,
            SchemeId::Pi1 | SchemeId::Pi2 | SchemeId::AltA => AnswerExtra::Field(field.random_ext(rng)),
            SchemeId::Pi3 => {
                let hash = view.aux_a.hash.as_ref().ok_or(Error::MissingAux("hash parameters"))?;
                AnswerExtra::Digest(hash.hash_unchecked(&field.random_ext(rng)))
            }
        };
        Ok(Answer { scheme: view.scheme, z, extra })
    }
}

/// Guesses the secret scalar: `Δ0 = 1`, `Δ1 = v̂·Δ0` for uniform nonzero
/// `v̂`. Wins exactly when the guess is right.
pub struct KeyGuesser;

impl KeyGuesser {
    fn offset(field: &FieldParams, guess: &FpElem) -> Offset {
        let d0 = field.ext_one();
        Offset::Field { d1: field.scale(guess, &d0), d0 }
    }
}

impl AdversaryStrategy for KeyGuesser {
    fn name(&self) -> String {
        "key-guesser".into()
    }

    fn craft(&self, view: &AdversaryView<'_>, rng: &mut dyn RngCore) -> Result<Answer> {
        let field = view.field();
        let guess = field.random_nonzero_fp(rng);
        Self::offset(field, &guess).apply(view.honest_answer()?, field, view.aux_a.hash.as_ref())
    }

    fn offset_support(&self, _scheme: SchemeId, field: &FieldParams, _j: usize) -> Option<OffsetSupport> {
        let p = field.p().to_u64().filter(|&p| p <= EXACT_KEY_LIMIT)?;
        let w = BigRational::new(BigInt::one(), BigInt::from(p - 1));
        Some((1..p).map(|g| (w.clone(), Self::offset(field, &field.fp(g)))).collect())
    }
}

/// Guesses the secret evaluation points of the two-pair scheme: samples a
/// tuple from L and picks `Δ1` so that tuple would accept `Δ0 = 1`.
pub struct PointGuesser;

impl PointGuesser {
    /// `Δ1 = (λ_j / λ̃_j)·Δ0` for the guessed tuple.
    fn offset(field: &FieldParams, j: usize, pts: &[FpElem; 4]) -> Offset {
        let lam = lagrange(field, &pts[0], &pts[1]).expect("distinct");
        let lam_check = lagrange(field, &pts[2], &pts[3]).expect("distinct");
        let ratio = field
            .fp_div(lam.weight(j), lam_check.weight(j))
            .expect("weights of nonzero points are nonzero");
        let d0 = field.ext_one();
        Offset::Field { d1: field.scale(&ratio, &d0), d0 }
    }
}

impl AdversaryStrategy for PointGuesser {
    fn name(&self) -> String {
        "point-guesser".into()
    }

    fn craft(&self, view: &AdversaryView<'_>, rng: &mut dyn RngCore) -> Result<Answer> {
        let field = view.field();
        let a = crate::sharing::EvalPoints::random(field, rng);
        let b = crate::sharing::EvalPoints::random(field, rng);
        let pts = [a.u1().clone(), a.u2().clone(), b.u1().clone(), b.u2().clone()];
        Self::offset(field, view.j, &pts).apply(view.honest_answer()?, field, view.aux_a.hash.as_ref())
    }

    fn offset_support(&self, _scheme: SchemeId, field: &FieldParams, j: usize) -> Option<OffsetSupport> {
        let p = field.p().to_u64()?;
        if alt_tuple_count(p) > ALT_DEFAULT_BUDGET {
            return None;
        }
        // Aggregate tuples by the offset they induce.
        let mut by_offset: BTreeMap<Vec<u64>, (u64, Offset)> = BTreeMap::new();
        for pts in alt_tuples(field, p) {
            let off = Self::offset(field, j, &pts);
            let key = match &off {
                Offset::Field { d1, .. } => d1.coeffs().iter().map(|c| c.value().to_u64().unwrap_or(0)).collect(),
                Offset::Digest { .. } => unreachable!(),
            };
            by_offset.entry(key).or_insert((0, off)).0 += 1;
        }
        let total = BigInt::from(alt_tuple_count(p));
        Some(
            by_offset
                .into_values()
                .map(|(n, off)| (BigRational::new(BigInt::from(n), total.clone()), off))
                .collect(),
        )
    }
}

/// The builtin strategy catalog for a field.
pub fn builtin_strategies(field: &FieldParams) -> Vec<Box<dyn AdversaryStrategy>> {
    vec![
        Box::new(HonestPassthrough),
        Box::new(AdditiveTamper::scalar(field, 1, 0)),
        Box::new(AdditiveTamper::scalar(field, 1, 1)),
        Box::new(RandomTamper),
        Box::new(KeyGuesser),
        Box::new(PointGuesser),
    ]
}

/// Looks up a builtin strategy by its command-line name.
pub fn strategy_by_name(name: &str, field: &FieldParams) -> Result<Box<dyn AdversaryStrategy>> {
    Ok(match name {
        "honest" => Box::new(HonestPassthrough),
        "random" => Box::new(RandomTamper),
        "key-guesser" | "key" => Box::new(KeyGuesser),
        "point-guesser" | "point" => Box::new(PointGuesser),
        other => {
            let Some(rest) = other.strip_prefix("additive:") else {
                return Err(Error::InvalidParams(format!("unknown adversary {other:?}")));
            };
            let mut it = rest.split(',').map(|s| s.trim().parse::<u64>());
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(d0)), Some(Ok(d1)), None) => Box::new(AdditiveTamper::scalar(field, d0, d1)),
                _ => return Err(Error::InvalidParams("expected additive:<d0>,<d1>".into())),
            }
        }
    })
}

/// The default strategy matching each scheme's bound.
pub fn default_strategy(scheme: SchemeId) -> Box<dyn AdversaryStrategy> {
    match scheme {
        SchemeId::AltA => Box::new(PointGuesser),
        _ => Box::new(KeyGuesser),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentOutcome {
    /// Verify output a value outside {x_i, ⊥}.
    Win,
    Lose,
}

impl ExperimentOutcome {
    pub fn bit(self) -> u8 {
        match self {
            ExperimentOutcome::Win => 1,
            ExperimentOutcome::Lose => 0,
        }
    }
}

/// One run of the security experiment with server `j` corrupted.
///
/// `public` selects the public-verification game, where the adversary also
/// receives `g^v`; it is only meaningful for `Pi2`.
#[allow(clippy::too_many_arguments)]
pub fn run_experiment(
    setup: &ClientSetup,
    adversary: &dyn AdversaryStrategy,
    db: &Database,
    i: usize,
    j: usize,
    public: bool,
    challenger_rng: &mut dyn RngCore,
    adversary_rng: &mut dyn RngCore,
) -> Result<ExperimentOutcome> {
    let scheme = setup.scheme();
    if public && scheme != SchemeId::Pi2 {
        return Err(Error::SchemeMismatch(format!("{scheme} has no public verification game")));
    }
    if j != 1 && j != 2 {
        return Err(Error::InvalidParams(format!("corrupted server must be 1 or 2, got {j}")));
    }
    if db.len() != setup.m() {
        return Err(Error::LengthMismatch { expected: setup.m(), got: db.len() });
    }
    let bundle = setup.queries_gen(i, challenger_rng)?;
    let vk_public = match (&bundle.vk, public) {
        (VerificationKey::Public(gv), true) => Some(gv),
        _ => None,
    };
    let view = AdversaryView {
        scheme,
        j,
        sigma: bundle.sigma(j),
        db,
        i,
        aux_a: &bundle.aux_a,
        vk_public,
    };
    let crafted = adversary.craft(&view, adversary_rng)?;
    let honest = answer_gen(scheme, 3 - j, bundle.sigma(3 - j), db, &bundle.aux_a)?;
    let (pi1, pi2) = if j == 1 { (crafted, honest) } else { (honest, crafted) };
    let result = verify(scheme, i, &bundle.vk, &pi1, &pi2, &bundle.aux_v)?;
    let outcome = match &result {
        RetrievalResult::Value(y) if y != db.get(i)? => ExperimentOutcome::Win,
        _ => ExperimentOutcome::Lose,
    };
    debug_assert!(outcome == ExperimentOutcome::Lose || matches!(result, RetrievalResult::Value(_)));
    Ok(outcome)
}

// ---- exact win probabilities ----

fn check_key_budget(field: &FieldParams) -> Result<u64> {
    field
        .p()
        .to_u64()
        .filter(|&p| p <= EXACT_KEY_LIMIT)
        .ok_or_else(|| Error::BudgetExceeded(format!("exact mode needs p <= {EXACT_KEY_LIMIT}, use Monte-Carlo")))
}

/// Keys `v ∈ F_p \ {0}` with `Δ1 = v·Δ0`, for extension-valued offsets.
pub fn count_pi1_keys(field: &FieldParams, d0: &ExtElem, d1: &ExtElem) -> Result<u64> {
    let p = check_key_budget(field)?;
    Ok((1..p).filter(|&v| field.scale(&field.fp(v), d0) == *d1).count() as u64)
}

/// `|{v ∈ F_p \ {0} : Δ1 = v·Δ0}| / (p - 1)` for `Δ0 != 0`.
pub fn exact_epsilon_pi1(field: &FieldParams, d0: &FpElem, d1: &FpElem) -> Result<BigRational> {
    if d0.is_zero() {
        return Err(Error::InvalidParams("Δ0 must be nonzero".into()));
    }
    let p = check_key_budget(field)?;
    let hits = (1..p).filter(|&v| field.fp_mul(&field.fp(v), d0) == *d1).count();
    let eps = BigRational::new(BigInt::from(hits), BigInt::from(p - 1));
    debug_assert!(eps <= pi1_bound(field.p()));
    Ok(eps)
}

/// Keys `v` with `h(Δ0)^v = factor`: the hashed-answer analogue of
/// [`count_pi1_keys`].
pub fn count_pi3_keys(field: &FieldParams, hash: &HashParams, d0: &ExtElem, factor: &Digest) -> Result<u64> {
    let p = check_key_budget(field)?;
    let h0 = hash.hash_unchecked(d0);
    Ok((1..p).filter(|&v| hash.hscale(&h0, &field.fp(v)) == *factor).count() as u64)
}

fn alt_tuple_count(p: u64) -> u64 {
    (p - 1) * (p - 1) * (p - 2) * (p - 2)
}

/// All `(u1, u2, ũ1, ũ2)` with nonzero entries, `u1 != u2`, `ũ1 != ũ2`.
fn alt_tuples(field: &FieldParams, p: u64) -> impl Iterator<Item = [FpElem; 4]> + '_ {
    let pairs: Vec<(u64, u64)> =
        (1..p).flat_map(|a| (1..p).filter(move |&b| b != a).map(move |b| (a, b))).collect();
    let pairs2 = pairs.clone();
    pairs.into_iter().flat_map(move |(u1, u2)| {
        pairs2
            .clone()
            .into_iter()
            .map(move |(c1, c2)| [field.fp(u1), field.fp(u2), field.fp(c1), field.fp(c2)])
    })
}

/// Exhaustive win probability for the secret-point scheme with server 1
/// corrupted: the fraction of tuples in L where
/// `ũ2(u2 − u1)Δ1 = u2(ũ2 − ũ1)Δ0`.
pub fn exact_epsilon_alt(field: &FieldParams, d0: &FpElem, d1: &FpElem, budget: u64) -> Result<BigRational> {
    if d0.is_zero() {
        return Err(Error::InvalidParams("Δ0 must be nonzero".into()));
    }
    let p = field.p().to_u64().filter(|&p| alt_tuple_count(p) <= budget).ok_or_else(|| {
        Error::BudgetExceeded(format!("point enumeration exceeds budget of {budget} tuples"))
    })?;
    let f = field;
    let mut hits = 0u64;
    for [u1, u2, c1, c2] in alt_tuples(f, p) {
        let lhs = f.fp_mul(&f.fp_mul(&c2, &f.fp_sub(&u2, &u1)), d1);
        let rhs = f.fp_mul(&f.fp_mul(&u2, &f.fp_sub(&c2, &c1)), d0);
        if lhs == rhs {
            hits += 1;
        }
    }
    let eps = BigRational::new(BigInt::from(hits), BigInt::from(alt_tuple_count(p)));
    assert!(eps <= alt_bound(field.p()), "exceeds the secret-point bound");
    Ok(eps)
}

/// Number of tuples in L accepting `(Δ0, Δ1)` when server `j` is corrupted:
/// `λ_j Δ0 = λ̃_j Δ1` with λ the top-row Lagrange weights. Counts through
/// the weight multiplicities instead of walking L.
pub fn count_alt_tuples(field: &FieldParams, j: usize, d0: &ExtElem, d1: &ExtElem) -> Result<u64> {
    let p = field
        .p()
        .to_u64()
        .filter(|&p| alt_tuple_count(p) <= ALT_DEFAULT_BUDGET)
        .ok_or_else(|| Error::BudgetExceeded("point enumeration budget".into()))?;
    let mut weights: HashMap<FpElem, u64> = HashMap::new();
    for a in 1..p {
        for b in (1..p).filter(|&b| b != a) {
            let row = lagrange(field, &field.fp(a), &field.fp(b))?;
            *weights.entry(row.weight(j).clone()).or_default() += 1;
        }
    }
    let mut hits = 0u64;
    for (lam, n) in &weights {
        let lhs = field.scale(lam, d0);
        for (lam_c, n_c) in &weights {
            if lhs == field.scale(lam_c, d1) {
                hits += n * n_c;
            }
        }
    }
    Ok(hits)
}

pub fn pi1_bound(p: &BigUint) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(p.clone()) - 1)
}

pub fn alt_bound(p: &BigUint) -> BigRational {
    let p = BigInt::from(p.clone());
    let pm2 = &p - 2;
    BigRational::new(2 * (&p - 1), &pm2 * &pm2)
}

/// The proven bound per scheme; the discrete-log schemes report 0 with
/// `dlog_caveat` set.
pub fn analytic_bound(scheme: SchemeId, p: &BigUint) -> (BigRational, bool) {
    match scheme {
        SchemeId::Pi0 => (BigRational::one(), false),
        SchemeId::Pi1 => (pi1_bound(p), false),
        SchemeId::Pi2 | SchemeId::Pi3 => (BigRational::zero(), true),
        SchemeId::AltA => (alt_bound(p), false),
    }
}

// ---- reports ----

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    MonteCarlo,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub scheme: SchemeId,
    pub strategy: String,
    pub p_bits: u64,
    /// Monte-Carlo: experiments run. Exact: enumerated (offset, key) pairs.
    pub trials: u64,
    pub wins: u64,
    pub rate: BigRational,
    pub analytic_bound: BigRational,
    pub dlog_caveat: bool,
    /// Clopper-Pearson upper bound at [`CONFIDENCE`]; Monte-Carlo only.
    pub ci_upper: Option<f64>,
    pub mode: Mode,
}

impl ExperimentReport {
    pub fn rate_f64(&self) -> f64 {
        self.rate.to_f64().unwrap_or(f64::NAN)
    }

    /// Whether the observed rate respects the analytic bound: exactly in
    /// exact mode, via the confidence interval otherwise.
    pub fn within_bound(&self) -> bool {
        if self.dlog_caveat {
            return self.wins == 0;
        }
        match self.mode {
            Mode::Exact => self.rate <= self.analytic_bound,
            Mode::MonteCarlo => {
                let bound = self.analytic_bound.to_f64().unwrap_or(f64::NAN);
                clopper_pearson(self.wins, self.trials, CONFIDENCE).0 <= bound
            }
        }
    }

    fn bound_text(&self) -> String {
        if self.dlog_caveat {
            "negl (dlog)".into()
        } else {
            self.analytic_bound.to_string()
        }
    }

    /// Human-readable, one field per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scheme:    {}", self.scheme);
        let _ = writeln!(s, "strategy:  {}", self.strategy);
        let _ = writeln!(s, "mode:      {}", self.mode.name());
        let _ = writeln!(s, "p bits:    {}", self.p_bits);
        let _ = writeln!(s, "trials:    {}", self.trials);
        let _ = writeln!(s, "wins:      {}", self.wins);
        let _ = writeln!(s, "rate:      {} (~{:.6e})", self.rate, self.rate_f64());
        let _ = writeln!(s, "bound:     {}", self.bound_text());
        match self.ci_upper {
            Some(u) => {
                let _ = writeln!(s, "ci upper:  {u:.6e} ({}% Clopper-Pearson)", CONFIDENCE * 100.0);
            }
            None => {
                let _ = writeln!(s, "ci upper:  -");
            }
        }
        let _ = writeln!(s, "verdict:   {}", if self.within_bound() { "within bound" } else { "BOUND EXCEEDED" });
        s
    }

    /// `key=value` lines in a fixed order.
    pub fn to_kv(&self) -> String {
        let ci = self.ci_upper.map(|u| format!("{u:e}")).unwrap_or_else(|| "none".into());
        format!(
            "scheme={}\nstrategy={}\np_bits={}\ntrials={}\nwins={}\nrate={}\nbound={}\nci_upper={}\nmode={}\n",
            self.scheme,
            self.strategy,
            self.p_bits,
            self.trials,
            self.wins,
            self.rate,
            if self.dlog_caveat { "negl".to_string() } else { self.analytic_bound.to_string() },
            ci,
            self.mode.name()
        )
    }
}

/// Two-sided Clopper-Pearson interval for `wins` out of `trials`.
pub fn clopper_pearson(wins: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && wins <= trials);
    let tail = (1.0 - confidence) / 2.0;
    let (k, n) = (wins as f64, trials as f64);
    // Bisection on the regularized incomplete beta, which is monotone in x.
    let quantile = |a: f64, b: f64, target: f64| {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if statrs::function::beta::beta_reg(a, b, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let lower = if wins == 0 { 0.0 } else { quantile(k, n - k + 1.0, tail) };
    let upper = if wins == trials { 1.0 } else { quantile(k + 1.0, n - k, 1.0 - tail) };
    (lower, upper)
}

/// Exact win probability of an additive strategy, averaging the per-offset
/// acceptance fraction over the strategy's offset distribution.
pub fn exact_report(setup: &ClientSetup, adversary: &dyn AdversaryStrategy, j: usize) -> Result<ExperimentReport> {
    let scheme = setup.scheme();
    let field = &**setup.field();
    let support = adversary.offset_support(scheme, field, j).ok_or_else(|| {
        Error::BudgetExceeded(format!("{} has no enumerable offset distribution here", adversary.name()))
    })?;
    let p = field.p();
    let mut rate = BigRational::zero();
    let mut wins = 0u64;
    let mut trials = 0u64;
    for (weight, offset) in &support {
        if offset.d0().is_zero() {
            trials += 1;
            continue;
        }
        let (hits, keys) = match scheme {
            SchemeId::Pi0 => (1, 1),
            SchemeId::Pi1 | SchemeId::Pi2 => match offset {
                Offset::Field { d0, d1 } => (count_pi1_keys(field, d0, d1)?, check_key_budget(field)? - 1),
                Offset::Digest { .. } => {
                    return Err(Error::VariantMismatch { scheme, detail: "digest offset".into() })
                }
            },
            SchemeId::Pi3 => {
                let hash = setup.hash().ok_or(Error::MissingAux("hash parameters"))?;
                let (d0, factor) = match offset {
                    Offset::Field { d0, d1 } => (d0, hash.hash_unchecked(d1)),
                    Offset::Digest { d0, factor } => (d0, factor.clone()),
                };
                (count_pi3_keys(field, hash, d0, &factor)?, check_key_budget(field)? - 1)
            }
            SchemeId::AltA => match offset {
                Offset::Field { d0, d1 } => {
                    let p64 = p.to_u64().unwrap_or(u64::MAX);
                    (count_alt_tuples(field, j, d0, d1)?, alt_tuple_count(p64))
                }
                Offset::Digest { .. } => {
                    return Err(Error::VariantMismatch { scheme, detail: "digest offset".into() })
                }
            },
        };
        wins += hits;
        trials += keys;
        rate += weight * BigRational::new(BigInt::from(hits), BigInt::from(keys));
    }
    let (analytic_bound, dlog_caveat) = analytic_bound(scheme, p);
    Ok(ExperimentReport {
        scheme,
        strategy: adversary.name(),
        p_bits: p.bits(),
        trials,
        wins,
        rate,
        analytic_bound,
        dlog_caveat,
        ci_upper: None,
        mode: Mode::Exact,
    })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Repeats the experiment `trials` times with fresh challenger randomness.
///
/// Session parameters come from stream 0 of `seed`; work unit `k` uses
/// streams `2k + 2` (challenger) and `2k + 3` (adversary), so the report is
/// independent of thread scheduling.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo(
    scheme: SchemeId,
    adversary: &dyn AdversaryStrategy,
    db: &Database,
    i: usize,
    j: usize,
    trials: u64,
    public: bool,
    seed: u64,
) -> Result<ExperimentReport> {
    if trials == 0 {
        return Err(Error::InvalidParams("at least one trial is required".into()));
    }
    let setup = ClientSetup::new(scheme, db.params().clone(), db.len(), &mut stream_rng(seed, 0))?;
    monte_carlo_with(&setup, adversary, db, i, j, trials, public, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_with(
    setup: &ClientSetup,
    adversary: &dyn AdversaryStrategy,
    db: &Database,
    i: usize,
    j: usize,
    trials: u64,
    public: bool,
    seed: u64,
) -> Result<ExperimentReport> {
    let chunks = trials.div_ceil(CHUNK);
    let wins = (0..chunks)
        .into_par_iter()
        .map(|k| -> Result<u64> {
            let mut challenger = stream_rng(seed, 2 * k + 2);
            let mut adv = stream_rng(seed, 2 * k + 3);
            let n = CHUNK.min(trials - k * CHUNK);
            let mut wins = 0;
            for _ in 0..n {
                let outcome = run_experiment(setup, adversary, db, i, j, public, &mut challenger, &mut adv)?;
                wins += outcome.bit() as u64;
            }
            Ok(wins)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum::<u64>();
    let p = setup.field().p();
    let (analytic_bound, dlog_caveat) = analytic_bound(setup.scheme(), p);
    Ok(ExperimentReport {
        scheme: setup.scheme(),
        strategy: adversary.name(),
        p_bits: p.bits(),
        trials,
        wins,
        rate: BigRational::new(BigInt::from(wins), BigInt::from(trials)),
        analytic_bound,
        dlog_caveat,
        ci_upper: Some(clopper_pearson(wins, trials, CONFIDENCE).1),
        mode: Mode::MonteCarlo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::KeyCoins;
    use std::sync::Arc;

    fn field(p: u64, t: usize) -> Arc<FieldParams> {
        Arc::new(FieldParams::generate(BigUint::from(p), t).unwrap())
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn epsilon_pi1_examples() {
        let k = field(5, 1);
        assert_eq!(exact_epsilon_pi1(&k, &k.fp(1u32), &k.fp(3u32)).unwrap(), rat(1, 4));
        assert_eq!(exact_epsilon_pi1(&k, &k.fp(2u32), &k.fp(0u32)).unwrap(), rat(0, 1));
        let k7 = field(7, 1);
        for d0 in 1u32..7 {
            for d1 in 1u32..7 {
                assert_eq!(exact_epsilon_pi1(&k7, &k7.fp(d0), &k7.fp(d1)).unwrap(), rat(1, 6));
            }
        }
        assert!(matches!(exact_epsilon_pi1(&k, &k.fp(0u32), &k.fp(1u32)), Err(Error::InvalidParams(_))));
        let big = field(65537, 1);
        assert!(exact_epsilon_pi1(&big, &big.fp(1u32), &big.fp(1u32)).is_err());
    }

    #[test]
    fn epsilon_alt_examples() {
        let k = field(5, 1);
        let e = exact_epsilon_alt(&k, &k.fp(1u32), &k.fp(1u32), ALT_DEFAULT_BUDGET).unwrap();
        assert!(e <= rat(8, 9));
        assert_eq!(exact_epsilon_alt(&k, &k.fp(1u32), &k.fp(0u32), ALT_DEFAULT_BUDGET).unwrap(), rat(0, 1));
        let k7 = field(7, 1);
        let e = exact_epsilon_alt(&k7, &k7.fp(1u32), &k7.fp(2u32), ALT_DEFAULT_BUDGET).unwrap();
        assert!(e <= rat(12, 25));
        assert!(matches!(
            exact_epsilon_alt(&k7, &k7.fp(1u32), &k7.fp(2u32), 10),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn alt_counting_routes_agree() {
        for p in [5u64, 7, 11] {
            let k = field(p, 1);
            for d0 in 1..p {
                for d1 in 0..p {
                    let direct = exact_epsilon_alt(&k, &k.fp(d0), &k.fp(d1), ALT_DEFAULT_BUDGET).unwrap();
                    let hits = count_alt_tuples(&k, 1, &k.embed(&k.fp(d0)), &k.embed(&k.fp(d1))).unwrap();
                    assert_eq!(direct, BigRational::new(hits.into(), alt_tuple_count(p).into()), "p={p}");
                }
            }
        }
    }

    #[test]
    fn alt_pipeline_matches_enumeration_at_p5() {
        // Run the real verify over every secret tuple with a fixed tamper.
        let k = field(5, 1);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let db = Database::random(k.clone(), 2, &mut rng).unwrap();
        let setup = ClientSetup::new(SchemeId::AltA, k.clone(), 2, &mut rng).unwrap();
        for (d0, d1) in [(1u64, 1u64), (1, 2), (2, 3), (3, 0)] {
            for j in 1..=2 {
                let offset = Offset::Field { d0: k.embed(&k.fp(d0)), d1: k.embed(&k.fp(d1)) };
                let mut wins = 0u64;
                for [u1, u2, c1, c2] in alt_tuples(&k, 5) {
                    let mut coins = setup.draw_coins(&mut rng);
                    coins.key = KeyCoins::Points {
                        primary: crate::sharing::EvalPoints::new(u1, u2).unwrap(),
                        check: crate::sharing::EvalPoints::new(c1, c2).unwrap(),
                    };
                    let b = setup.queries_gen_with(1, &coins).unwrap();
                    let honest = |s| answer_gen(SchemeId::AltA, s, b.sigma(s), &db, &b.aux_a).unwrap();
                    let bad = offset.apply(honest(j), &k, None).unwrap();
                    let (pi1, pi2) = if j == 1 { (bad, honest(2)) } else { (honest(1), bad) };
                    if let RetrievalResult::Value(y) = verify(SchemeId::AltA, 1, &b.vk, &pi1, &pi2, &b.aux_v).unwrap() {
                        if &y != db.get(1).unwrap() {
                            wins += 1;
                        }
                    }
                }
                let expected = count_alt_tuples(&k, j, offset.d0(), match &offset {
                    Offset::Field { d1, .. } => d1,
                    _ => unreachable!(),
                })
                .unwrap();
                assert_eq!(wins, expected, "d0={d0} d1={d1} j={j}");
            }
        }
    }

    #[test]
    fn key_guesser_exact_is_one_over_p_minus_one() {
        let k = field(5, 1);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for scheme in [SchemeId::Pi1, SchemeId::Pi2, SchemeId::Pi3] {
            let setup = ClientSetup::new(scheme, k.clone(), 3, &mut rng).unwrap();
            for j in 1..=2 {
                let rep = exact_report(&setup, &KeyGuesser, j).unwrap();
                assert_eq!(rep.rate, rat(1, 4), "{scheme} j={j}");
                assert!(rep.within_bound() || scheme != SchemeId::Pi1);
            }
        }
    }

    #[test]
    fn point_guesser_exact_within_bound_and_symmetric() {
        let k = field(5, 1);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let setup = ClientSetup::new(SchemeId::AltA, k, 2, &mut rng).unwrap();
        let r1 = exact_report(&setup, &PointGuesser, 1).unwrap();
        let r2 = exact_report(&setup, &PointGuesser, 2).unwrap();
        assert!(r1.rate <= rat(8, 9));
        assert_eq!(r1.rate, r2.rate);
    }

    #[test]
    fn honest_and_zero_delta_never_win() {
        let k = field(97, 2);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let db = Database::random(k.clone(), 4, &mut rng).unwrap();
        let strategies: Vec<Box<dyn AdversaryStrategy>> =
            vec![Box::new(HonestPassthrough), Box::new(AdditiveTamper { d0: k.ext_zero(), d1: k.ext_one() })];
        for scheme in SchemeId::ALL {
            for s in &strategies {
                let rep = monte_carlo(scheme, s.as_ref(), &db, 2, 1, 300, false, 9).unwrap();
                assert_eq!(rep.wins, 0, "{scheme} {}", s.name());
            }
        }
    }

    #[test]
    fn z_only_tamper_never_wins_pi1() {
        let k = field(5, 1);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let db = Database::random(k.clone(), 3, &mut rng).unwrap();
        let setup = ClientSetup::new(SchemeId::Pi1, k.clone(), 3, &mut rng).unwrap();
        for d0 in 1..5 {
            let tamper = AdditiveTamper::scalar(&k, d0, 0);
            assert_eq!(exact_report(&setup, &tamper, 1).unwrap().rate, rat(0, 1));
            let rep = monte_carlo(SchemeId::Pi1, &tamper, &db, 1, 1, 500, false, d0).unwrap();
            assert_eq!(rep.wins, 0);
        }
    }

    #[test]
    fn pi0_is_always_fooled() {
        let k = field(97, 1);
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let db = Database::random(k.clone(), 3, &mut rng).unwrap();
        let rep = monte_carlo(SchemeId::Pi0, &AdditiveTamper::scalar(&k, 5, 0), &db, 1, 2, 100, false, 1).unwrap();
        assert_eq!(rep.wins, 100);
    }

    #[test]
    fn public_flag_only_for_pi2() {
        let k = field(97, 1);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let db = Database::random(k.clone(), 3, &mut rng).unwrap();
        assert!(matches!(
            monte_carlo(SchemeId::Pi1, &KeyGuesser, &db, 1, 1, 10, true, 1),
            Err(Error::SchemeMismatch(_))
        ));
        assert!(monte_carlo(SchemeId::Pi2, &KeyGuesser, &db, 1, 1, 10, true, 1).is_ok());
    }

    struct WrongVariant;
    impl AdversaryStrategy for WrongVariant {
        fn name(&self) -> String {
            "wrong".into()
        }
        fn craft(&self, view: &AdversaryView<'_>, _rng: &mut dyn RngCore) -> Result<Answer> {
            Ok(Answer { scheme: view.scheme, z: view.field().ext_zero(), extra: AnswerExtra::None })
        }
    }

    #[test]
    fn wrong_variant_is_an_error_not_a_win() {
        let k = field(97, 1);
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let db = Database::random(k.clone(), 3, &mut rng).unwrap();
        assert!(matches!(
            monte_carlo(SchemeId::Pi1, &WrongVariant, &db, 1, 1, 10, false, 1),
            Err(Error::VariantMismatch { .. })
        ));
    }

    #[test]
    fn monte_carlo_is_deterministic_under_seed() {
        let k = field(11, 1);
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let db = Database::random(k.clone(), 3, &mut rng).unwrap();
        let a = monte_carlo(SchemeId::Pi1, &KeyGuesser, &db, 2, 1, 9000, false, 77).unwrap();
        let b = monte_carlo(SchemeId::Pi1, &KeyGuesser, &db, 2, 1, 9000, false, 77).unwrap();
        assert_eq!((a.wins, a.trials), (b.wins, b.trials));
        assert!(a.wins > 0);
    }

    #[test]
    fn clopper_pearson_closed_forms() {
        // Zero successes: upper = 1 - (α/2)^(1/n).
        let (lo, hi) = clopper_pearson(0, 1000, 0.99);
        assert_eq!(lo, 0.0);
        let expected = 1.0 - 0.005f64.powf(1.0 / 1000.0);
        assert!((hi - expected).abs() < 1e-9, "{hi} vs {expected}");
        // All successes: lower = (α/2)^(1/n).
        let (lo, hi) = clopper_pearson(50, 50, 0.99);
        assert_eq!(hi, 1.0);
        assert!((lo - 0.005f64.powf(1.0 / 50.0)).abs() < 1e-9);
        let (lo, hi) = clopper_pearson(390, 100_000, 0.99);
        assert!(lo < 0.0039 && 0.0039 < hi);
    }

    #[test]
    fn report_formats_carry_all_fields() {
        let k = field(97, 1);
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let db = Database::random(k.clone(), 2, &mut rng).unwrap();
        let rep = monte_carlo(SchemeId::Pi1, &KeyGuesser, &db, 1, 1, 200, false, 3).unwrap();
        let kv = rep.to_kv();
        for key in ["scheme=", "p_bits=", "trials=", "wins=", "rate=", "bound=", "ci_upper=", "mode="] {
            assert!(kv.contains(key), "{key} missing");
        }
        assert!(rep.to_text().contains("monte_carlo"));
    }

    #[test]
    fn strategy_lookup() {
        let k = field(97, 1);
        assert_eq!(strategy_by_name("key", &k).unwrap().name(), "key-guesser");
        assert!(strategy_by_name("additive:1,2", &k).is_ok());
        assert!(strategy_by_name("additive:1", &k).is_err());
        assert!(strategy_by_name("nope", &k).is_err());
        assert_eq!(builtin_strategies(&k).len(), 6);
    }
}
