//! Finite-dimensional graded-commutative Poincaré-duality algebras presented
//! by explicit structure constants, modelling the de Rham cohomology of
//! closed oriented n-manifolds. Builders cover spheres, tori, CP^2 with both
//! orientations, S^2 x S^2, and connected sums.
//!
//! The degree-n functional is stored with the volume class normalized to 1,
//! so duality pairings are read off the structure constants directly.

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exterior::{basis_tuples, merge_tuples, ScalarJson};
use crate::fourfold::IntersectionForm;
use crate::linalg;
use crate::scalar::{Rational, Scalar};

/// Structure-constant table for one degree pair: `[x][y][z]` gives the
/// coefficient of basis class `z` (degree j+k) in the product of `x` (degree
/// j) and `y` (degree k).
pub type CupTable<S> = Vec<Vec<Vec<S>>>;

#[derive(Debug, Clone, PartialEq)]
pub struct RingPresentation<S: Scalar> {
    formal_dim: usize,
    betti: Vec<usize>,
    basis_labels: Vec<Vec<String>>,
    sc: BTreeMap<(usize, usize), CupTable<S>>,
    fundamental: Vec<S>,
}

/// Element of a fixed degree, as coordinates in that degree's basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CohomologyClass<S> {
    pub degree: usize,
    pub coords: Vec<S>,
}

impl<S: Scalar> CohomologyClass<S> {
    pub fn zero(degree: usize, dim: usize) -> Self {
        CohomologyClass { degree, coords: vec![S::zero(); dim] }
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_negligible())
    }
}

#[derive(Debug, Clone)]
pub struct AxiomCheck {
    pub name: String,
    pub passed: bool,
    pub witness: Option<String>,
}

/// Outcome of [`RingPresentation::validate`]; carries every axiom verdict.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<AxiomCheck>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

impl<S: Scalar> RingPresentation<S> {
    /// Assemble a presentation from raw tables. Shape errors are rejected
    /// here; algebraic axioms are the business of [`Self::validate`].
    pub fn from_parts(
        formal_dim: usize,
        betti: Vec<usize>,
        basis_labels: Vec<Vec<String>>,
        sc: BTreeMap<(usize, usize), CupTable<S>>,
        fundamental: Vec<S>,
    ) -> Result<Self> {
        if betti.len() != formal_dim + 1 {
            return Err(Error::InvalidRing(format!(
                "betti vector has {} entries for formal dimension {}",
                betti.len(),
                formal_dim
            )));
        }
        if basis_labels.len() != formal_dim + 1
            || basis_labels.iter().zip(&betti).any(|(l, &b)| l.len() != b)
        {
            return Err(Error::InvalidRing("label table does not match betti vector".into()));
        }
        if fundamental.len() != betti[formal_dim] {
            return Err(Error::InvalidRing("fundamental functional has wrong length".into()));
        }
        for (&(j, k), table) in &sc {
            if j + k > formal_dim {
                return Err(Error::InvalidRing(format!("structure constants beyond top degree at ({j},{k})")));
            }
            let ok = table.len() == betti[j]
                && table.iter().all(|row| {
                    row.len() == betti[k] && row.iter().all(|v| v.len() == betti[j + k])
                });
            if !ok {
                return Err(Error::InvalidRing(format!("structure-constant table at ({j},{k}) has wrong shape")));
            }
        }
        Ok(RingPresentation { formal_dim, betti, basis_labels, sc, fundamental })
    }

    pub fn formal_dim(&self) -> usize {
        self.formal_dim
    }

    pub fn betti(&self) -> &[usize] {
        &self.betti
    }

    pub fn labels(&self, degree: usize) -> &[String] {
        &self.basis_labels[degree]
    }

    pub fn fundamental(&self) -> &[S] {
        &self.fundamental
    }

    pub fn basis_class(&self, degree: usize, index: usize) -> CohomologyClass<S> {
        let mut c = CohomologyClass::zero(degree, self.betti[degree]);
        c.coords[index] = S::one();
        c
    }

    pub fn unit(&self) -> CohomologyClass<S> {
        self.basis_class(0, 0)
    }

    fn table(&self, j: usize, k: usize) -> Option<&CupTable<S>> {
        self.sc.get(&(j, k))
    }

    fn cup_basis(&self, j: usize, k: usize, x: usize, y: usize, z: usize) -> S {
        self.table(j, k).map(|t| t[x][y][z].clone()).unwrap_or_else(S::zero)
    }

    /// Cup product by bilinear contraction against the structure constants.
    pub fn cup(&self, x: &CohomologyClass<S>, y: &CohomologyClass<S>) -> Result<CohomologyClass<S>> {
        let (j, k) = (x.degree, y.degree);
        if j + k > self.formal_dim {
            return Err(Error::DegreeOverflow(j, k, self.formal_dim));
        }
        let mut out: CohomologyClass<S> = CohomologyClass::zero(j + k, self.betti[j + k]);
        for (xi, cx) in x.coords.iter().enumerate() {
            if cx.is_negligible() {
                continue;
            }
            for (yi, cy) in y.coords.iter().enumerate() {
                if cy.is_negligible() {
                    continue;
                }
                let w = cx.clone() * cy.clone();
                for z in 0..self.betti[j + k] {
                    let c = self.cup_basis(j, k, xi, yi, z);
                    if !c.is_negligible() {
                        out.coords[z] = out.coords[z].clone() + w.clone() * c;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Evaluation against the fundamental class; degree must be the formal dimension.
    pub fn evaluate_fundamental(&self, c: &CohomologyClass<S>) -> Result<S> {
        if c.degree != self.formal_dim {
            return Err(Error::DegreeOverflow(c.degree, 0, self.formal_dim));
        }
        Ok(c
            .coords
            .iter()
            .zip(&self.fundamental)
            .fold(S::zero(), |acc, (a, f)| acc + a.clone() * f.clone()))
    }

    /// Duality pairing Gram matrix between degrees `k` and `n-k`:
    /// entry `(x, y)` is `fundamental(x . y)`.
    pub fn duality_pairing(&self, k: usize) -> linalg::Matrix<S> {
        let n = self.formal_dim;
        let (bk, bnk) = (self.betti[k], self.betti[n - k]);
        let mut m = vec![vec![S::zero(); bnk]; bk];
        for x in 0..bk {
            for y in 0..bnk {
                let mut acc = S::zero();
                for z in 0..self.betti[n] {
                    acc = acc + self.cup_basis(k, n - k, x, y, z) * self.fundamental[z].clone();
                }
                m[x][y] = acc;
            }
        }
        m
    }

    /// Middle-degree pairing for even-dimensional presentations.
    pub fn middle_pairing(&self) -> Result<linalg::Matrix<S>> {
        if self.formal_dim % 2 != 0 {
            return Err(Error::InvalidRing("middle pairing needs even formal dimension".into()));
        }
        Ok(self.duality_pairing(self.formal_dim / 2))
    }

    /// Check all presentation axioms and report each with a witness on failure.
    pub fn validate(&self) -> ValidationReport {
        let n = self.formal_dim;
        let mut checks = Vec::new();

        checks.push(AxiomCheck {
            name: "connected_closed_oriented".into(),
            passed: self.betti[0] == 1 && self.betti[n] == 1,
            witness: (self.betti[0] != 1 || self.betti[n] != 1)
                .then(|| format!("b0 = {}, bn = {}", self.betti[0], self.betti[n])),
        });

        let mut unit_witness = None;
        'unit: for k in 0..=n {
            for y in 0..self.betti[k] {
                for z in 0..self.betti[k] {
                    let expect = if y == z { S::one() } else { S::zero() };
                    let got = self.cup_basis(0, k, 0, y, z);
                    if !(got.clone() - expect.clone()).is_negligible() {
                        unit_witness = Some(format!("1 . y{y} has coefficient {got} on z{z} in degree {k}"));
                        break 'unit;
                    }
                }
            }
        }
        checks.push(AxiomCheck { name: "unit".into(), passed: unit_witness.is_none(), witness: unit_witness });

        let mut comm_witness = None;
        'comm: for j in 0..=n {
            for k in 0..=n - j {
                for x in 0..self.betti[j] {
                    for y in 0..self.betti[k] {
                        for z in 0..self.betti[j + k] {
                            let lhs = self.cup_basis(j, k, x, y, z);
                            let mut rhs = self.cup_basis(k, j, y, x, z);
                            if (j * k) % 2 == 1 {
                                rhs = -rhs;
                            }
                            if !(lhs.clone() - rhs).is_negligible() {
                                comm_witness =
                                    Some(format!("deg ({j},{k}) basis ({x},{y}) component {z}"));
                                break 'comm;
                            }
                        }
                    }
                }
            }
        }
        checks.push(AxiomCheck {
            name: "graded_commutativity".into(),
            passed: comm_witness.is_none(),
            witness: comm_witness,
        });

        let mut assoc_witness = None;
        'assoc: for j in 0..=n {
            for k in 0..=n - j {
                for l in 0..=n - j - k {
                    for x in 0..self.betti[j] {
                        for y in 0..self.betti[k] {
                            for z in 0..self.betti[l] {
                                let xy = self.cup(&self.basis_class(j, x), &self.basis_class(k, y)).unwrap();
                                let left = self.cup(&xy, &self.basis_class(l, z)).unwrap();
                                let yz = self.cup(&self.basis_class(k, y), &self.basis_class(l, z)).unwrap();
                                let right = self.cup(&self.basis_class(j, x), &yz).unwrap();
                                let differ = left
                                    .coords
                                    .iter()
                                    .zip(&right.coords)
                                    .any(|(a, b)| !(a.clone() - b.clone()).is_negligible());
                                if differ {
                                    assoc_witness = Some(format!("degrees ({j},{k},{l}) basis ({x},{y},{z})"));
                                    break 'assoc;
                                }
                            }
                        }
                    }
                }
            }
        }
        checks.push(AxiomCheck {
            name: "associativity".into(),
            passed: assoc_witness.is_none(),
            witness: assoc_witness,
        });

        let mut duality_witness = None;
        for k in 0..=n {
            if self.betti[k] != self.betti[n - k] {
                duality_witness = Some(format!("b{k} = {} but b{} = {}", self.betti[k], n - k, self.betti[n - k]));
                break;
            }
            let pairing = self.duality_pairing(k);
            let rk = linalg::rank(&pairing);
            if rk != self.betti[k] {
                duality_witness = Some(format!("degree-{k} pairing has rank {rk} < {}", self.betti[k]));
                break;
            }
        }
        checks.push(AxiomCheck {
            name: "poincare_duality".into(),
            passed: duality_witness.is_none(),
            witness: duality_witness,
        });

        ValidationReport { checks }
    }

    /// Rescale the top basis class so the fundamental functional sends it to 1.
    fn normalize_fundamental(&self) -> Result<Self> {
        let f = self.fundamental[0].clone();
        if f.is_negligible() {
            return Err(Error::InvalidRing("fundamental functional vanishes on the top class".into()));
        }
        if (f.clone() - S::one()).is_negligible() {
            return Ok(self.clone());
        }
        let n = self.formal_dim;
        let mut sc = self.sc.clone();
        for (&(j, k), table) in sc.iter_mut() {
            if j + k == n {
                for row in table.iter_mut() {
                    for v in row.iter_mut() {
                        v[0] = v[0].clone() * f.clone();
                    }
                }
            }
        }
        RingPresentation::from_parts(n, self.betti.clone(), self.basis_labels.clone(), sc, vec![S::one()])
    }

    /// Convert the coefficient field, e.g. exact rationals to f64.
    pub fn map_scalars<T: Scalar>(&self, f: impl Fn(&S) -> T + Copy) -> RingPresentation<T> {
        RingPresentation {
            formal_dim: self.formal_dim,
            betti: self.betti.clone(),
            basis_labels: self.basis_labels.clone(),
            sc: self
                .sc
                .iter()
                .map(|(&jk, t)| {
                    (jk, t.iter().map(|r| r.iter().map(|v| v.iter().map(f).collect()).collect()).collect())
                })
                .collect(),
            fundamental: self.fundamental.iter().map(f).collect(),
        }
    }

    pub fn to_json(&self) -> Value
    where
        S: ScalarJson,
    {
        let n = self.formal_dim;
        let sc: Vec<Vec<Value>> = (0..=n)
            .map(|j| {
                (0..=n - j)
                    .map(|k| {
                        let table = self.table(j, k);
                        json!((0..self.betti[j])
                            .map(|x| (0..self.betti[k])
                                .map(|y| (0..self.betti[j + k])
                                    .map(|z| match table {
                                        Some(t) => t[x][y][z].to_scalar_json(),
                                        None => S::zero().to_scalar_json(),
                                    })
                                    .collect::<Vec<_>>())
                                .collect::<Vec<_>>())
                            .collect::<Vec<_>>())
                    })
                    .collect()
            })
            .collect();
        json!({
            "n": n,
            "betti": self.betti,
            "labels": self.basis_labels,
            "sc": sc,
            "fundamental": self.fundamental.iter().map(|f| f.to_scalar_json()).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self>
    where
        S: ScalarJson,
    {
        let n = v["n"].as_u64().ok_or_else(|| Error::Serde("missing field n".into()))? as usize;
        let betti: Vec<usize> = v["betti"]
            .as_array()
            .ok_or_else(|| Error::Serde("missing field betti".into()))?
            .iter()
            .map(|b| b.as_u64().map(|u| u as usize).ok_or_else(|| Error::Serde("bad betti entry".into())))
            .collect::<Result<_>>()?;
        let labels: Vec<Vec<String>> = v["labels"]
            .as_array()
            .ok_or_else(|| Error::Serde("missing field labels".into()))?
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| Error::Serde("bad label row".into()))?
                    .iter()
                    .map(|s| s.as_str().map(String::from).ok_or_else(|| Error::Serde("bad label".into())))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let sc_json = v["sc"].as_array().ok_or_else(|| Error::Serde("missing field sc".into()))?;
        let mut sc = BTreeMap::new();
        for (j, row) in sc_json.iter().enumerate() {
            let row = row.as_array().ok_or_else(|| Error::Serde("bad sc row".into()))?;
            for (k, table) in row.iter().enumerate() {
                if j > n || k > n - j {
                    return Err(Error::Serde("sc table out of degree range".into()));
                }
                let parse = |val: &Value| -> Result<Vec<Vec<Vec<S>>>> {
                    val.as_array()
                        .ok_or_else(|| Error::Serde("bad sc table".into()))?
                        .iter()
                        .map(|r| {
                            r.as_array()
                                .ok_or_else(|| Error::Serde("bad sc table".into()))?
                                .iter()
                                .map(|cell| {
                                    cell.as_array()
                                        .ok_or_else(|| Error::Serde("bad sc table".into()))?
                                        .iter()
                                        .map(S::from_scalar_json)
                                        .collect()
                                })
                                .collect()
                        })
                        .collect()
                };
                let parsed = parse(table)?;
                if !parsed.is_empty() {
                    sc.insert((j, k), parsed);
                }
            }
        }
        let fundamental = v["fundamental"]
            .as_array()
            .ok_or_else(|| Error::Serde("missing field fundamental".into()))?
            .iter()
            .map(S::from_scalar_json)
            .collect::<Result<_>>()?;
        RingPresentation::from_parts(n, betti, labels, sc, fundamental)
    }
}

impl RingPresentation<Rational> {
    /// Middle-degree intersection form, exact. The stored functional already
    /// has the volume class at 1, so no volume factor appears.
    pub fn intersection_form(&self) -> Result<IntersectionForm> {
        let n = self.formal_dim;
        if n % 4 != 0 || n == 0 {
            return Err(Error::InvalidRing(format!("intersection form needs dimension 4m, got {n}")));
        }
        let pairing = self.middle_pairing()?;
        let mut gram = vec![vec![0i64; pairing.len()]; pairing.len()];
        for (i, row) in pairing.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if !v.is_integer() {
                    return Err(Error::NonIntegralPairing(i, j));
                }
                gram[i][j] = v.to_integer().to_i64().ok_or(Error::NonIntegralPairing(i, j))?;
            }
        }
        IntersectionForm::analyze(gram)
    }
}

impl RingPresentation<f64> {
    /// Numeric-mode intersection form: entries are rounded to integers; the
    /// flag reports whether every entry was within `tol` of its rounding.
    pub fn intersection_form_with_tol(&self, tol: f64) -> Result<(IntersectionForm, bool)> {
        let n = self.formal_dim;
        if n % 4 != 0 || n == 0 {
            return Err(Error::InvalidRing(format!("intersection form needs dimension 4m, got {n}")));
        }
        let pairing = self.middle_pairing()?;
        let mut gram = vec![vec![0i64; pairing.len()]; pairing.len()];
        let mut integral = true;
        for (i, row) in pairing.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let r = v.round();
                if (v - r).abs() > tol {
                    integral = false;
                }
                gram[i][j] = r as i64;
            }
        }
        Ok((IntersectionForm::analyze(gram)?, integral))
    }
}

/// Sphere: unit and volume class only.
pub fn build_sphere<S: Scalar>(n: usize) -> Result<RingPresentation<S>> {
    require_dim(n)?;
    let mut betti = vec![0; n + 1];
    betti[0] = 1;
    betti[n] = 1;
    let mut labels = vec![Vec::new(); n + 1];
    labels[0] = vec!["1".to_string()];
    labels[n] = vec!["vol".to_string()];
    let mut sc = BTreeMap::new();
    sc.insert((0, 0), vec![vec![vec![S::one()]]]);
    sc.insert((0, n), vec![vec![vec![S::one()]]]);
    sc.insert((n, 0), vec![vec![vec![S::one()]]]);
    RingPresentation::from_parts(n, betti, labels, sc, vec![S::one()])
}

/// Torus: the full exterior algebra on n degree-1 generators.
pub fn build_torus<S: Scalar>(n: usize) -> Result<RingPresentation<S>> {
    require_dim(n)?;
    let betti: Vec<usize> = (0..=n).map(|k| crate::exterior::binomial(n, k)).collect();
    let tuples: Vec<Vec<Vec<u8>>> = (0..=n).map(|k| basis_tuples(n, k).collect()).collect();
    let labels: Vec<Vec<String>> = tuples
        .iter()
        .map(|ts| {
            ts.iter()
                .map(|t| {
                    if t.is_empty() {
                        "1".to_string()
                    } else {
                        format!("t{}", t.iter().map(|i| i.to_string()).collect::<String>())
                    }
                })
                .collect()
        })
        .collect();
    let mut sc = BTreeMap::new();
    for j in 0..=n {
        for k in 0..=n - j {
            let mut table = vec![vec![vec![S::zero(); betti[j + k]]; betti[k]]; betti[j]];
            for (x, tx) in tuples[j].iter().enumerate() {
                for (y, ty) in tuples[k].iter().enumerate() {
                    if let Some((merged, sign)) = merge_tuples(tx, ty) {
                        let z = tuples[j + k].iter().position(|t| *t == merged).unwrap();
                        table[x][y][z] = if sign > 0 { S::one() } else { -S::one() };
                    }
                }
            }
            sc.insert((j, k), table);
        }
    }
    RingPresentation::from_parts(n, betti, labels, sc, vec![S::one()])
}

/// Complex projective plane: one degree-2 generator squaring to +vol.
pub fn build_cp2<S: Scalar>() -> RingPresentation<S> {
    cp2_signed(S::one(), "c")
}

/// Orientation-reversed CP^2: the generator squares to -vol.
pub fn build_cp2bar<S: Scalar>() -> RingPresentation<S> {
    cp2_signed(-S::one(), "cbar")
}

fn cp2_signed<S: Scalar>(square: S, label: &str) -> RingPresentation<S> {
    let betti = vec![1, 0, 1, 0, 1];
    let mut labels = vec![Vec::new(); 5];
    labels[0] = vec!["1".to_string()];
    labels[2] = vec![label.to_string()];
    labels[4] = vec![format!("{label}^2")];
    let mut sc = BTreeMap::new();
    for k in [0usize, 2, 4] {
        sc.insert((0, k), vec![vec![vec![S::one()]]]);
        if k > 0 {
            sc.insert((k, 0), vec![vec![vec![S::one()]]]);
        }
    }
    sc.insert((2, 2), vec![vec![vec![square]]]);
    RingPresentation::from_parts(4, betti, labels, sc, vec![S::one()])
        .expect("fixed tables are well-shaped")
}

/// S^2 x S^2: hyperbolic middle pairing on two degree-2 generators.
pub fn build_s2xs2<S: Scalar>() -> RingPresentation<S> {
    let betti = vec![1, 0, 2, 0, 1];
    let mut labels = vec![Vec::new(); 5];
    labels[0] = vec!["1".to_string()];
    labels[2] = vec!["a".to_string(), "b".to_string()];
    labels[4] = vec!["ab".to_string()];
    let mut sc = BTreeMap::new();
    sc.insert((0, 0), vec![vec![vec![S::one()]]]);
    sc.insert((0, 2), vec![vec![vec![S::one(), S::zero()], vec![S::zero(), S::one()]]]);
    sc.insert((2, 0), vec![vec![vec![S::one(), S::zero()]], vec![vec![S::zero(), S::one()]]]);
    sc.insert((0, 4), vec![vec![vec![S::one()]]]);
    sc.insert((4, 0), vec![vec![vec![S::one()]]]);
    // a.a = b.b = 0, a.b = b.a = vol
    sc.insert(
        (2, 2),
        vec![
            vec![vec![S::zero()], vec![S::one()]],
            vec![vec![S::one()], vec![S::zero()]],
        ],
    );
    RingPresentation::from_parts(4, betti, labels, sc, vec![S::one()]).expect("fixed tables are well-shaped")
}

/// Dimension-3 presentation with `m` degree-1 generators whose pairwise
/// products all vanish, and identity duality pairing between degrees 1 and 2.
/// For `m = 1` this is the ring of S^2 x S^1; for `m >= 2` it is a valid
/// abstract duality algebra that no sphere, torus, or product realizes.
pub fn build_dim3_zero_cup<S: Scalar>(m: usize) -> Result<RingPresentation<S>> {
    let betti = vec![1, m, m, 1];
    let mut labels = vec![vec!["1".to_string()]];
    labels.push((1..=m).map(|i| format!("x{i}")).collect());
    labels.push((1..=m).map(|i| format!("y{i}")).collect());
    labels.push(vec!["vol".to_string()]);
    let delta = |a: usize, b: usize| if a == b { S::one() } else { S::zero() };
    let mut sc = BTreeMap::new();
    sc.insert((0, 0), vec![vec![vec![S::one()]]]);
    sc.insert((0, 3), vec![vec![vec![S::one()]]]);
    sc.insert((3, 0), vec![vec![vec![S::one()]]]);
    for k in [1usize, 2] {
        sc.insert((0, k), vec![(0..m).map(|y| (0..m).map(|z| delta(y, z)).collect()).collect()]);
        sc.insert((k, 0), (0..m).map(|x| vec![(0..m).map(|z| delta(x, z)).collect()]).collect());
    }
    sc.insert((1, 1), vec![vec![vec![S::zero(); m]; m]; m]);
    // x_i . y_j = delta_ij vol; degree parity makes the reverse order equal
    let pairing: CupTable<S> = (0..m).map(|x| (0..m).map(|y| vec![delta(x, y)]).collect()).collect();
    sc.insert((1, 2), pairing.clone());
    sc.insert((2, 1), pairing);
    RingPresentation::from_parts(3, betti, labels, sc, vec![S::one()])
}

fn require_dim(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::InvalidRing(format!("manifold dimension must be at least 2, got {n}")))
    } else {
        Ok(())
    }
}

/// Connected sum: middle cohomology is the direct sum, degrees 0 and n are
/// identified, cross products of positive-degree classes vanish below the top
/// degree. The result is re-validated.
pub fn connected_sum<S: Scalar>(a: &RingPresentation<S>, b: &RingPresentation<S>) -> Result<RingPresentation<S>> {
    let n = a.formal_dim;
    if b.formal_dim != n {
        return Err(Error::DimensionMismatch(n, b.formal_dim));
    }
    for (name, ring) in [("left", a), ("right", b)] {
        let report = ring.validate();
        if let Some(fail) = report.first_failure() {
            return Err(Error::InvalidRing(format!("{name} summand fails {}: {:?}", fail.name, fail.witness)));
        }
    }
    let a = a.normalize_fundamental()?;
    let b = b.normalize_fundamental()?;

    let mut betti = vec![0usize; n + 1];
    betti[0] = 1;
    betti[n] = 1;
    for k in 1..n {
        betti[k] = a.betti[k] + b.betti[k];
    }
    let mut labels = vec![Vec::new(); n + 1];
    labels[0] = vec!["1".to_string()];
    labels[n] = vec!["vol".to_string()];
    for k in 1..n {
        let mut l: Vec<String> = a.basis_labels[k].iter().map(|s| format!("{s}'")).collect();
        l.extend(b.basis_labels[k].iter().map(|s| format!("{s}''")));
        labels[k] = l;
    }

    // basis index in the sum -> (summand, index within summand)
    let side = |k: usize, x: usize| -> (bool, usize) {
        if k == 0 || k == n || x < a.betti[k] {
            (true, x)
        } else {
            (false, x - a.betti[k])
        }
    };

    let mut sc = BTreeMap::new();
    for j in 0..=n {
        for k in 0..=n - j {
            if betti[j] == 0 || betti[k] == 0 {
                continue;
            }
            let mut table = vec![vec![vec![S::zero(); betti[j + k]]; betti[k]]; betti[j]];
            for x in 0..betti[j] {
                for y in 0..betti[k] {
                    if j == 0 {
                        table[x][y][y] = S::one();
                        continue;
                    }
                    if k == 0 {
                        table[x][y][x] = S::one();
                        continue;
                    }
                    let (xa, xi) = side(j, x);
                    let (ya, yi) = side(k, y);
                    if xa != ya {
                        continue; // cross-summand products of positive-degree classes vanish
                    }
                    let ring = if xa { &a } else { &b };
                    for z in 0..ring.betti[j + k] {
                        let v = ring.cup_basis(j, k, xi, yi, z);
                        if v.is_negligible() {
                            continue;
                        }
                        let out_z = if j + k == n || j + k == 0 || xa { z } else { a.betti[j + k] + z };
                        table[x][y][out_z] = v;
                    }
                }
            }
            sc.insert((j, k), table);
        }
    }

    let sum = RingPresentation::from_parts(n, betti, labels, sc, vec![S::one()])?;
    let report = sum.validate();
    if let Some(fail) = report.first_failure() {
        return Err(Error::InvalidRing(format!(
            "direct-sum rule breaks axiom {}: {:?}",
            fail.name, fail.witness
        )));
    }
    Ok(sum)
}

/// k-fold connected sum of copies of one presentation; k = 0 gives the sphere.
pub fn iterated_sum<S: Scalar>(ring: &RingPresentation<S>, copies: usize) -> Result<RingPresentation<S>> {
    let mut acc = build_sphere::<S>(ring.formal_dim())?;
    for _ in 0..copies {
        acc = connected_sum(&acc, ring)?;
    }
    Ok(acc)
}
