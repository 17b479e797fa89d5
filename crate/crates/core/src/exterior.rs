//! Exterior algebra of R^n with exact or floating coefficients.
//!
//! A [`Multivector`] is a finite sum of basis terms `e_I` indexed by strictly
//! increasing tuples `I ⊆ {1..n}`. The wedge product carries the shuffle sign,
//! the top pairing reads off the coefficient of `e_{1..n}`, and
//! [`pairing_signature`] diagonalizes the induced bilinear form on the
//! middle-degree component.

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{Rational, Scalar};

/// Strictly increasing index tuple into `{1..n}`; the empty tuple is the scalar unit.
pub type IndexTuple = Vec<u8>;

/// Element of the exterior algebra over R^n.
///
/// Canonical form: tuples strictly increasing, no zero coefficients, terms
/// ordered lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Multivector<S: Scalar> {
    n: usize,
    terms: BTreeMap<IndexTuple, S>,
}

impl<S: Scalar> Multivector<S> {
    pub fn zero(n: usize) -> Self {
        Multivector { n, terms: BTreeMap::new() }
    }

    pub fn one(n: usize) -> Self {
        Self::basis(n, &[]).expect("unit tuple is always valid")
    }

    /// Basis element `e_I`. Fails if the tuple is not strictly increasing in `1..=n`.
    pub fn basis(n: usize, idx: &[u8]) -> Result<Self> {
        validate_tuple(n, idx)?;
        let mut terms = BTreeMap::new();
        terms.insert(idx.to_vec(), S::one());
        Ok(Multivector { n, terms })
    }

    pub fn from_terms(n: usize, entries: impl IntoIterator<Item = (IndexTuple, S)>) -> Result<Self> {
        let mut mv = Multivector::zero(n);
        for (idx, c) in entries {
            validate_tuple(n, &idx)?;
            mv.add_term(idx, c);
        }
        Ok(mv)
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&IndexTuple, &S)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, idx: &[u8]) -> S {
        self.terms.get(idx).cloned().unwrap_or_else(S::zero)
    }

    /// Degree if all terms share one; `None` for 0 or mixed degree.
    pub fn pure_degree(&self) -> Option<usize> {
        let mut degs = self.terms.keys().map(|t| t.len());
        let first = degs.next()?;
        degs.all(|d| d == first).then_some(first)
    }

    /// Component of the given degree.
    pub fn graded_part(&self, k: usize) -> Self {
        Multivector {
            n: self.n,
            terms: self.terms.iter().filter(|(t, _)| t.len() == k).map(|(t, c)| (t.clone(), c.clone())).collect(),
        }
    }

    fn add_term(&mut self, idx: IndexTuple, c: S) {
        if c.is_negligible() {
            return;
        }
        match self.terms.entry(idx) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().clone() + c;
                if sum.is_negligible() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(self.n, other.n));
        }
        let mut out = self.clone();
        for (idx, c) in &other.terms {
            out.add_term(idx.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&(-S::one())))
    }

    pub fn scale(&self, s: &S) -> Self {
        if s.is_negligible() {
            return Multivector::zero(self.n);
        }
        Multivector {
            n: self.n,
            terms: self.terms.iter().map(|(t, c)| (t.clone(), c.clone() * s.clone())).collect(),
        }
    }

    /// Euclidean norm of the coefficient vector (numeric work only).
    pub fn norm(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.to_f64().unwrap_or(f64::NAN).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Wedge product. Bilinear, associative, graded-anticommutative.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(self.n, other.n));
        }
        let mut out = Multivector::zero(self.n);
        for (ta, ca) in &self.terms {
            for (tb, cb) in &other.terms {
                if let Some((merged, sign)) = merge_tuples(ta, tb) {
                    let mut c = ca.clone() * cb.clone();
                    if sign < 0 {
                        c = -c;
                    }
                    out.add_term(merged, c);
                }
            }
        }
        Ok(out)
    }

    /// Coefficient of `e_{1..n}` in `a ∧ b`; requires complementary pure degrees.
    pub fn top_pairing(&self, other: &Self) -> Result<S> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(self.n, other.n));
        }
        let da = self.pure_degree().ok_or(Error::NotPureDegree { expected: 0, found: None })?;
        let db = other.pure_degree().ok_or(Error::NotPureDegree { expected: 0, found: None })?;
        if da + db != self.n {
            return Err(Error::NotPureDegree { expected: self.n - da, found: Some(db) });
        }
        let top: IndexTuple = (1..=self.n as u8).collect();
        Ok(self.wedge(other)?.coefficient(&top))
    }

    /// Coordinates in the lexicographic degree-k basis.
    pub fn coords(&self, k: usize) -> Vec<S> {
        basis_tuples(self.n, k).map(|t| self.coefficient(&t)).collect()
    }

    pub fn to_json(&self) -> Value
    where
        S: ScalarJson,
    {
        json!({
            "n": self.n,
            "terms": self.terms.iter().map(|(idx, c)| {
                let mut obj = serde_json::Map::new();
                obj.insert("idx".into(), json!(idx));
                c.write_coeff(&mut obj);
                Value::Object(obj)
            }).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self>
    where
        S: ScalarJson,
    {
        let n = v["n"].as_u64().ok_or_else(|| Error::Serde("missing field n".into()))? as usize;
        let terms = v["terms"].as_array().ok_or_else(|| Error::Serde("missing field terms".into()))?;
        let mut mv = Multivector::zero(n);
        for t in terms {
            let idx: IndexTuple = t["idx"]
                .as_array()
                .ok_or_else(|| Error::Serde("term missing idx".into()))?
                .iter()
                .map(|x| x.as_u64().map(|u| u as u8).ok_or_else(|| Error::Serde("bad index".into())))
                .collect::<Result<_>>()?;
            validate_tuple(n, &idx)?;
            mv.add_term(idx, S::read_coeff(t)?);
        }
        Ok(mv)
    }
}

impl<S: Scalar> fmt::Display for Multivector<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (idx, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if idx.is_empty() {
                write!(f, "{c}")?;
            } else {
                let label: String = idx.iter().map(|i| i.to_string()).collect();
                write!(f, "{c}*e{label}")?;
            }
        }
        Ok(())
    }
}

/// JSON coefficient encoding: `num`/`den` in exact mode, `val` in numeric mode.
pub trait ScalarJson: Scalar {
    fn write_coeff(&self, obj: &mut serde_json::Map<String, Value>);
    fn read_coeff(term: &Value) -> Result<Self>;
    fn to_scalar_json(&self) -> Value;
    fn from_scalar_json(v: &Value) -> Result<Self>;
}

impl ScalarJson for Rational {
    fn write_coeff(&self, obj: &mut serde_json::Map<String, Value>) {
        obj.insert("num".into(), json!(rational_i64(self.numer())));
        obj.insert("den".into(), json!(rational_i64(self.denom())));
    }

    fn read_coeff(term: &Value) -> Result<Self> {
        let num = term["num"].as_i64().ok_or_else(|| Error::Serde("term missing num".into()))?;
        let den = term["den"].as_i64().ok_or_else(|| Error::Serde("term missing den".into()))?;
        if den == 0 {
            return Err(Error::Serde("zero denominator".into()));
        }
        Ok(Rational::new(num.into(), den.into()))
    }

    fn to_scalar_json(&self) -> Value {
        json!({ "num": rational_i64(self.numer()), "den": rational_i64(self.denom()) })
    }

    fn from_scalar_json(v: &Value) -> Result<Self> {
        Self::read_coeff(v)
    }
}

impl ScalarJson for f64 {
    fn write_coeff(&self, obj: &mut serde_json::Map<String, Value>) {
        obj.insert("val".into(), json!(self));
    }

    fn read_coeff(term: &Value) -> Result<Self> {
        term["val"].as_f64().ok_or_else(|| Error::Serde("term missing val".into()))
    }

    fn to_scalar_json(&self) -> Value {
        json!(self)
    }

    fn from_scalar_json(v: &Value) -> Result<Self> {
        v.as_f64().ok_or_else(|| Error::Serde("expected a number".into()))
    }
}

fn rational_i64(b: &num::BigInt) -> i64 {
    use num_traits::ToPrimitive;
    b.to_i64().expect("rational coefficient exceeds i64 in serialization")
}

fn validate_tuple(n: usize, idx: &[u8]) -> Result<()> {
    let increasing = idx.windows(2).all(|w| w[0] < w[1]);
    let in_range = idx.iter().all(|&i| i >= 1 && i as usize <= n);
    if increasing && in_range {
        Ok(())
    } else {
        Err(Error::BadIndexTuple(idx.to_vec(), n))
    }
}

/// Merge two strictly increasing tuples; `None` on index collision, else the
/// merged tuple with the shuffle sign.
pub fn merge_tuples(a: &[u8], b: &[u8]) -> Option<(IndexTuple, i32)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let mut inversions = 0usize;
    while i < a.len() && j < b.len() {
        if a[i] == b[j] {
            return None;
        }
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            // b[j] jumps over the remaining entries of a
            inversions += a.len() - i;
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Some((out, if inversions % 2 == 0 { 1 } else { -1 }))
}

/// Lexicographically ordered strictly increasing k-tuples in `{1..n}`.
pub fn basis_tuples(n: usize, k: usize) -> impl Iterator<Item = IndexTuple> {
    Combinations::new(n, k)
}

struct Combinations {
    n: usize,
    k: usize,
    current: Option<Vec<u8>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        let current = if k <= n { Some((1..=k as u8).collect()) } else { None };
        Combinations { n, k, current }
    }
}

impl Iterator for Combinations {
    type Item = IndexTuple;

    fn next(&mut self) -> Option<IndexTuple> {
        let cur = self.current.take()?;
        let out = cur.clone();
        let mut next = cur;
        let (n, k) = (self.n as u8, self.k);
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                return Some(out);
            }
            i -= 1;
            if next[i] < n - (k - 1 - i) as u8 {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                return Some(out);
            }
        }
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Gram matrix of the top-coefficient pairing on the degree-k component, in
/// the lexicographic basis. Each basis tuple pairs only with its complement,
/// so the matrix is a signed permutation with exactly one `±1` per row.
#[derive(Debug, Clone)]
pub struct PairingMatrix {
    pub n: usize,
    pub k: usize,
    pub gram: Vec<Vec<i64>>,
}

impl PairingMatrix {
    /// Requires `n = 2k` with `k` even (otherwise the pairing is antisymmetric).
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n != 2 * k || k % 2 != 0 || k == 0 {
            return Err(Error::PairingUndefined { n, k });
        }
        let tuples: Vec<IndexTuple> = basis_tuples(n, k).collect();
        let index_of: BTreeMap<&IndexTuple, usize> = tuples.iter().enumerate().map(|(i, t)| (t, i)).collect();
        let dim = tuples.len();
        let mut gram = vec![vec![0i64; dim]; dim];
        for (i, t) in tuples.iter().enumerate() {
            let comp: IndexTuple = (1..=n as u8).filter(|x| !t.contains(x)).collect();
            let (_, sign) = merge_tuples(t, &comp).expect("complement is disjoint");
            let j = index_of[&comp];
            gram[i][j] = sign as i64;
        }
        Ok(PairingMatrix { n, k, gram })
    }
}

/// Signature `(p, q)` of the top-coefficient pairing on the degree-k component
/// of the exterior algebra over R^n, for `n = 2k` with `k` even. Computed by
/// exact congruence diagonalization of the Gram matrix.
pub fn pairing_signature(n: usize, k: usize) -> Result<(usize, usize)> {
    let pm = PairingMatrix::new(n, k)?;
    let rat: Vec<Vec<Rational>> = pm
        .gram
        .iter()
        .map(|row| row.iter().map(|&v| Rational::from_integer(v.into())).collect())
        .collect();
    let (p, q) = linalg::symmetric_signature(&rat);
    Ok((p, q))
}
