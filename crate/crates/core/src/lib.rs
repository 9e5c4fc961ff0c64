//! Verifiable two-server private information retrieval.
//!
//! A client retrieves record `x_i` from two servers holding replicas of a
//! database over F_{p^t}, hiding `i` from each server individually and
//! detecting a single server that returns a wrong answer. Five schemes share
//! one `queries_gen` / `answer_gen` / `verify` interface:
//!
//! | scheme | verification | check |
//! |--------|--------------|-------|
//! | `Pi0`  | none | plain Shamir reconstruction |
//! | `Pi1`  | private, information-theoretic | `v·A = V` with a secret scalar `v` |
//! | `Pi2`  | public, discrete log | `(g^v)^A = g^V` |
//! | `Pi3`  | private, discrete log | homomorphic hash of the redundant answer |
//! | `AltA` | private, information-theoretic | two secret pairs of evaluation points |
//!
//! Beyond the protocol itself the crate carries the security-experiment
//! harness ([`adversary`]), the download-rate cost model ([`costs`]) and a
//! framed TCP client/server ([`net`]).

pub mod adversary;
pub mod cli;
pub mod codec;
pub mod costs;
pub mod dbfile;
pub mod error;
pub mod field;
pub mod grouphash;
pub mod net;
mod poly;
pub mod primes;
pub mod schemes;
pub mod sharing;

pub use error::{Error, Result};
pub use field::{ArithOp, Database, ExtElem, FieldParams, FpElem};
pub use schemes::{RetrievalResult, SchemeId};
