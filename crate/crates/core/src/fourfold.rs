//! Intersection forms of closed oriented 4-manifolds and the homeomorphism
//! classification of the simply connected ones with small definite Betti
//! numbers, including the ellipticity decision and the full decision table.

use num_traits::Signed;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg;

/// Symmetric unimodular integer bilinear form with cached invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntersectionForm {
    matrix: Vec<Vec<i64>>,
    signature: (usize, usize),
    even: bool,
    det: i64,
}

impl IntersectionForm {
    /// Validate symmetry and unimodularity, then compute rank, signature, and
    /// parity. Parity comes from the diagonal: Q(x,x) is even for all integer
    /// x exactly when every diagonal entry is even.
    pub fn analyze(matrix: Vec<Vec<i64>>) -> Result<Self> {
        let n = matrix.len();
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!("row {i} has length {} in a {n}x{n} form", row.len())));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if matrix[i][j] != matrix[j][i] {
                    return Err(Error::NotSymmetric(i, j));
                }
            }
        }
        let det_big = linalg::integer_determinant(&matrix);
        if det_big.abs() != num::BigInt::from(1) {
            return Err(Error::NotUnimodular(det_big.to_string()));
        }
        let det = if det_big == num::BigInt::from(1) { 1 } else { -1 };
        let signature = linalg::symmetric_signature(&linalg::to_rational(&matrix));
        let even = matrix.iter().enumerate().all(|(i, row)| row[i] % 2 == 0);
        Ok(IntersectionForm { matrix, signature, even, det })
    }

    pub fn rank(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self) -> &[Vec<i64>] {
        &self.matrix
    }

    /// `(p, q)`: dimensions of maximal positive / negative definite subspaces.
    pub fn signature(&self) -> (usize, usize) {
        self.signature
    }

    pub fn is_even(&self) -> bool {
        self.even
    }

    pub fn determinant(&self) -> i64 {
        self.det
    }

    /// Block direct sum.
    pub fn direct_sum(&self, other: &IntersectionForm) -> IntersectionForm {
        let n = self.rank();
        let m = other.rank();
        let mut mat = vec![vec![0i64; n + m]; n + m];
        for i in 0..n {
            mat[i][..n].copy_from_slice(&self.matrix[i]);
        }
        for i in 0..m {
            mat[n + i][n..].copy_from_slice(&other.matrix[i]);
        }
        IntersectionForm::analyze(mat).expect("direct sum of unimodular forms is unimodular")
    }

    pub fn hyperbolic() -> IntersectionForm {
        IntersectionForm::analyze(vec![vec![0, 1], vec![1, 0]]).unwrap()
    }

    pub fn diagonal(entries: &[i64]) -> Result<IntersectionForm> {
        let n = entries.len();
        let mut mat = vec![vec![0i64; n]; n];
        for (i, &e) in entries.iter().enumerate() {
            mat[i][i] = e;
        }
        IntersectionForm::analyze(mat)
    }

    pub fn empty() -> IntersectionForm {
        IntersectionForm::analyze(Vec::new()).unwrap()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "rank": self.rank(),
            "matrix": self.matrix,
            "signature": [self.signature.0, self.signature.1],
            "parity": if self.even { "even" } else { "odd" },
            "det": self.det,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let m = v["matrix"]
            .as_array()
            .ok_or_else(|| Error::Serde("missing field matrix".into()))?
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| Error::Serde("bad matrix row".into()))?
                    .iter()
                    .map(|x| x.as_i64().ok_or_else(|| Error::Serde("bad matrix entry".into())))
                    .collect::<Result<Vec<i64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        IntersectionForm::analyze(m)
    }
}

/// Homeomorphism type of a closed simply connected 4-manifold within the
/// small-signature range the classifier supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HomeoType {
    Sphere4,
    /// k-fold connected sum of S^2 x S^2, k >= 1.
    SumS2xS2(usize),
    /// j copies of CP^2 and i of the reversed orientation, j + i >= 1.
    SumCP2(usize, usize),
    OutsideSupportedRegime(String),
}

impl std::fmt::Display for HomeoType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HomeoType::Sphere4 => write!(f, "S^4"),
            HomeoType::SumS2xS2(1) => write!(f, "S^2 x S^2"),
            HomeoType::SumS2xS2(k) => write!(f, "#^{k} (S^2 x S^2)"),
            HomeoType::SumCP2(j, i) => {
                let left = match j {
                    0 => String::new(),
                    1 => "CP^2".to_string(),
                    _ => format!("#^{j} CP^2"),
                };
                let right = match i {
                    0 => String::new(),
                    1 => "CP^2-bar".to_string(),
                    _ => format!("#^{i} CP^2-bar"),
                };
                match (left.is_empty(), right.is_empty()) {
                    (false, false) if right.starts_with('#') => write!(f, "{left} {right}"),
                    (false, false) => write!(f, "{left} # {right}"),
                    (false, true) => write!(f, "{left}"),
                    (true, false) => write!(f, "{right}"),
                    (true, true) => unreachable!("SumCP2(0,0) is normalized to the sphere"),
                }
            }
            HomeoType::OutsideSupportedRegime(reason) => write!(f, "outside supported range: {reason}"),
        }
    }
}

impl HomeoType {
    pub fn to_json(&self) -> Value {
        match self {
            HomeoType::Sphere4 => json!({"kind": "sphere4", "name": self.to_string()}),
            HomeoType::SumS2xS2(k) => json!({"kind": "sum_s2xs2", "k": k, "name": self.to_string()}),
            HomeoType::SumCP2(j, i) => json!({"kind": "sum_cp2", "j": j, "i": i, "name": self.to_string()}),
            HomeoType::OutsideSupportedRegime(r) => json!({"kind": "outside_supported_regime", "reason": r}),
        }
    }
}

/// Supported range for the classifier: both definite Betti numbers at most 3.
pub const DEFINITE_BOUND: usize = 3;

/// Homeomorphism type from the intersection form, for forms with
/// `p, q <= 3`. Odd forms diagonalize to `diag(1^p, -1^q)`; even indefinite
/// forms in this range are sums of hyperbolic planes, which forces `p = q`.
pub fn classify_simply_connected(form: &IntersectionForm) -> Result<HomeoType> {
    let (p, q) = form.signature();
    if p > DEFINITE_BOUND || q > DEFINITE_BOUND {
        return Ok(HomeoType::OutsideSupportedRegime(format!(
            "definite Betti numbers ({p},{q}) exceed {DEFINITE_BOUND}"
        )));
    }
    if form.rank() == 0 {
        return Ok(HomeoType::Sphere4);
    }
    if form.is_even() {
        if p != q {
            // even unimodular forms have signature divisible by 8
            return Err(Error::ImpossibleEvenForm(p, q));
        }
        Ok(HomeoType::SumS2xS2(p))
    } else {
        Ok(HomeoType::SumCP2(p, q))
    }
}

/// Ellipticity decision for the closed simply connected 4-manifold carrying
/// the form: elliptic exactly when both definite Betti numbers are at most 3.
#[derive(Debug, Clone)]
pub struct EllipticityDecision {
    pub elliptic: bool,
    pub homeo: Option<HomeoType>,
    pub betti_plus: usize,
    pub betti_minus: usize,
}

pub fn qre_ellipticity_decision(form: &IntersectionForm) -> Result<EllipticityDecision> {
    let (p, q) = form.signature();
    let elliptic = p <= DEFINITE_BOUND && q <= DEFINITE_BOUND;
    let homeo = if elliptic { Some(classify_simply_connected(form)?) } else { None };
    Ok(EllipticityDecision { elliptic, homeo, betti_plus: p, betti_minus: q })
}

/// One cell of the decision table: every homeomorphism type with the given
/// definite Betti numbers.
pub fn table_cell(plus: usize, minus: usize) -> Vec<HomeoType> {
    let mut cell = Vec::new();
    if plus == 0 && minus == 0 {
        cell.push(HomeoType::Sphere4);
    } else {
        cell.push(HomeoType::SumCP2(plus, minus));
    }
    if plus == minus && plus > 0 {
        cell.push(HomeoType::SumS2xS2(plus));
    }
    cell
}

/// The full 4x4 table over definite Betti numbers in `{0..3}`, indexed
/// `[minus][plus]`.
pub fn generate_table() -> Vec<Vec<Vec<HomeoType>>> {
    (0..=DEFINITE_BOUND)
        .map(|minus| (0..=DEFINITE_BOUND).map(|plus| table_cell(plus, minus)).collect())
        .collect()
}

pub fn table_to_json() -> Value {
    let table = generate_table();
    json!({
        "schema": "qre-toolkit/1",
        "rows": "beta_minus 0..3",
        "cols": "beta_plus 0..3",
        "cells": table
            .iter()
            .enumerate()
            .map(|(minus, row)| row.iter().enumerate().map(|(plus, cell)| json!({
                "beta_plus": plus,
                "beta_minus": minus,
                "types": cell.iter().map(|t| t.to_json()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    })
}

/// Aligned text rendering of the table.
pub fn table_to_text() -> String {
    let table = generate_table();
    let cells: Vec<Vec<String>> = table
        .iter()
        .map(|row| row.iter().map(|cell| cell.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(", ")).collect())
        .collect();
    let mut widths = vec!["b-\\b+".len(); 5];
    for row in &cells {
        for (c, text) in row.iter().enumerate() {
            widths[c + 1] = widths[c + 1].max(text.len()).max(1);
        }
    }
    let mut out = String::new();
    let header: Vec<String> = (0..=DEFINITE_BOUND).map(|p| p.to_string()).collect();
    out.push_str(&format!("{:<w$}", "b-\\b+", w = widths[0]));
    for (c, h) in header.iter().enumerate() {
        out.push_str(&format!(" | {:<w$}", h, w = widths[c + 1]));
    }
    out.push('\n');
    for (minus, row) in cells.iter().enumerate() {
        out.push_str(&format!("{:<w$}", minus, w = widths[0]));
        for (c, text) in row.iter().enumerate() {
            out.push_str(&format!(" | {:<w$}", text, w = widths[c + 1]));
        }
        out.push('\n');
    }
    out
}
