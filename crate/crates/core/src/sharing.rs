//! Degree-one Shamir sharing of query vectors and the 2×2 reconstruction.
//!
//! A query for record `i` is the vector polynomial `f(u) = s·e_i + r·u`.
//! Evaluating it at two points and inverting the Vandermonde matrix
//! `[[1, u1], [1, u2]]` recovers the constant term from the two answers.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::field::{ExtElem, FieldParams, FpElem};

/// A pair of distinct, nonzero evaluation points.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EvalPoints {
    u1: FpElem,
    u2: FpElem,
}

impl EvalPoints {
    pub fn new(u1: FpElem, u2: FpElem) -> Result<Self> {
        if u1 == u2 || u1.is_zero() || u2.is_zero() {
            return Err(Error::DegeneratePoints);
        }
        Ok(EvalPoints { u1, u2 })
    }

    /// The public points (1, 2).
    pub fn standard(field: &FieldParams) -> Self {
        EvalPoints { u1: field.fp(1u32), u2: field.fp(2u32) }
    }

    /// Uniform over ordered pairs of distinct nonzero points.
    pub fn random<R: RngCore + ?Sized>(field: &FieldParams, rng: &mut R) -> Self {
        let u1 = field.random_nonzero_fp(rng);
        loop {
            let u2 = field.random_nonzero_fp(rng);
            if u2 != u1 {
                return EvalPoints { u1, u2 };
            }
        }
    }

    pub fn u1(&self) -> &FpElem {
        &self.u1
    }

    pub fn u2(&self) -> &FpElem {
        &self.u2
    }

    /// The point assigned to server `j` (1 or 2).
    pub fn point(&self, j: usize) -> &FpElem {
        if j == 1 {
            &self.u1
        } else {
            &self.u2
        }
    }

    pub fn swapped(&self) -> Self {
        EvalPoints { u1: self.u2.clone(), u2: self.u1.clone() }
    }
}

/// Entries of `[[1, u1], [1, u2]]^-1 = [[a, b], [c, d]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LagrangeRow {
    pub a: FpElem,
    pub b: FpElem,
    pub c: FpElem,
    pub d: FpElem,
}

impl LagrangeRow {
    /// The top-row weight applied to server `j`'s answer.
    pub fn weight(&self, j: usize) -> &FpElem {
        if j == 1 {
            &self.a
        } else {
            &self.b
        }
    }
}

fn check_index(m: usize, i: usize) -> Result<()> {
    if i == 0 || i > m {
        return Err(Error::IndexOutOfRange { index: i, m });
    }
    Ok(())
}

/// `s·e_i + r·u` for given randomness `r` (1-based `i`).
pub fn evaluate_share(
    field: &FieldParams,
    i: usize,
    s: &FpElem,
    u: &FpElem,
    r: &[FpElem],
) -> Result<Vec<FpElem>> {
    check_index(r.len(), i)?;
    Ok(r.iter()
        .enumerate()
        .map(|(k, rk)| {
            let ru = field.fp_mul(rk, u);
            if k + 1 == i {
                field.fp_add(s, &ru)
            } else {
                ru
            }
        })
        .collect())
}

/// Draws `r` uniformly from F_p^m and returns `(s·e_i + r·u, r)`.
pub fn share_vector<R: RngCore + ?Sized>(
    field: &FieldParams,
    m: usize,
    i: usize,
    s: &FpElem,
    u: &FpElem,
    rng: &mut R,
) -> Result<(Vec<FpElem>, Vec<FpElem>)> {
    check_index(m, i)?;
    let r: Vec<FpElem> = (0..m).map(|_| field.random_fp(rng)).collect();
    let q = evaluate_share(field, i, s, u, &r)?;
    Ok((q, r))
}

/// Evaluates one shared polynomial at both points, with the same `r`.
pub fn share_pair_with(
    field: &FieldParams,
    i: usize,
    s: &FpElem,
    points: &EvalPoints,
    r: &[FpElem],
) -> Result<(Vec<FpElem>, Vec<FpElem>)> {
    Ok((
        evaluate_share(field, i, s, &points.u1, r)?,
        evaluate_share(field, i, s, &points.u2, r)?,
    ))
}

pub fn share_pair<R: RngCore + ?Sized>(
    field: &FieldParams,
    m: usize,
    i: usize,
    s: &FpElem,
    points: &EvalPoints,
    rng: &mut R,
) -> Result<(Vec<FpElem>, Vec<FpElem>)> {
    check_index(m, i)?;
    let r: Vec<FpElem> = (0..m).map(|_| field.random_fp(rng)).collect();
    share_pair_with(field, i, s, points, &r)
}

/// Inverse of the 2×2 Vandermonde matrix for `(u1, u2)`.
pub fn lagrange(field: &FieldParams, u1: &FpElem, u2: &FpElem) -> Result<LagrangeRow> {
    if u1 == u2 {
        return Err(Error::DegeneratePoints);
    }
    let inv = field.fp_inv(&field.fp_sub(u2, u1))?;
    Ok(LagrangeRow {
        a: field.fp_mul(u2, &inv),
        b: field.fp_neg(&field.fp_mul(u1, &inv)),
        c: field.fp_neg(&inv),
        d: inv,
    })
}

pub fn lagrange_for(field: &FieldParams, points: &EvalPoints) -> LagrangeRow {
    lagrange(field, &points.u1, &points.u2).expect("EvalPoints are distinct")
}

/// Constant term `a·z1 + b·z2`.
pub fn reconstruct(
    field: &FieldParams,
    z1: &ExtElem,
    z2: &ExtElem,
    row: &LagrangeRow,
) -> Result<ExtElem> {
    field.check_ext(z1)?;
    field.check_ext(z2)?;
    Ok(field.ext_add(&field.scale(&row.a, z1), &field.scale(&row.b, z2)))
}

/// Linear coefficient `c·z1 + d·z2` (the masked `rᵀx` term).
pub fn reconstruct_slope(
    field: &FieldParams,
    z1: &ExtElem,
    z2: &ExtElem,
    row: &LagrangeRow,
) -> Result<ExtElem> {
    field.check_ext(z1)?;
    field.check_ext(z2)?;
    Ok(field.ext_add(&field.scale(&row.c, z1), &field.scale(&row.d, z2)))
}
