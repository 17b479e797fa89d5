//! Multistart numeric search for a graded-algebra embedding witness.
//!
//! The embedding is parametrized by the coordinates of every positive-degree
//! basis-class image in the exterior algebra. The residual vector collects
//! one block per unordered pair of basis classes, `Phi(x) ^ Phi(y) -
//! Phi(x.y)`, plus one hinge row per degree pushing the smallest singular
//! value of that degree's image matrix above a margin target. Damped
//! Gauss-Newton steps with an analytic Jacobian drive each restart; restarts
//! are independent and merged deterministically.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exterior::{basis_tuples, binomial, merge_tuples, Multivector};
use crate::Ring64;

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub restarts: u32,
    pub max_iters: u32,
    pub tol_residual: f64,
    pub tol_injectivity: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { restarts: 64, max_iters: 400, tol_residual: 1e-8, tol_injectivity: 1e-6, seed: 0 }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be positive".into()));
        }
        if self.tol_residual <= 0.0 || self.tol_injectivity <= 0.0 {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "restarts": self.restarts,
            "max_iters": self.max_iters,
            "tol_residual": self.tol_residual,
            "tol_injectivity": self.tol_injectivity,
            "seed": self.seed,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let d = SearchConfig::default();
        let get_u = |key: &str, dflt: u64| v.get(key).and_then(Value::as_u64).unwrap_or(dflt);
        let get_f = |key: &str, dflt: f64| v.get(key).and_then(Value::as_f64).unwrap_or(dflt);
        let cfg = SearchConfig {
            restarts: get_u("restarts", d.restarts as u64) as u32,
            max_iters: get_u("max_iters", d.max_iters as u64) as u32,
            tol_residual: get_f("tol_residual", d.tol_residual),
            tol_injectivity: get_f("tol_injectivity", d.tol_injectivity),
            seed: get_u("seed", d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct WitnessImage {
    pub degree: usize,
    pub index: usize,
    pub label: String,
    pub image: Multivector<f64>,
}

#[derive(Debug, Clone)]
pub struct EmbeddingWitness {
    pub images: Vec<WitnessImage>,
    /// Sum of squared relation violations over all basis pairs.
    pub residual: f64,
    /// Per positive degree: smallest singular value of the image matrix.
    pub injectivity_margins: Vec<(usize, f64)>,
}

impl EmbeddingWitness {
    pub fn to_json(&self) -> Value {
        json!({
            "images": self.images.iter().map(|w| json!({
                "degree": w.degree,
                "index": w.index,
                "label": w.label,
                "image": w.image.to_json(),
            })).collect::<Vec<_>>(),
            "residual": self.residual,
            "injectivity_margins": self.injectivity_margins,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SearchStats {
    pub restarts_run: u32,
    pub successes: u32,
    pub best_residual: f64,
    pub best_margins: Vec<(usize, f64)>,
    pub winning_restart: Option<u32>,
}

impl SearchStats {
    pub fn to_json(&self) -> Value {
        json!({
            "restarts_run": self.restarts_run,
            "successes": self.successes,
            "best_residual": self.best_residual,
            "min_singular_values_per_degree": self.best_margins,
            "winning_restart": self.winning_restart,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub witness: Option<EmbeddingWitness>,
    pub stats: SearchStats,
}

/// One residual block: images of basis classes `(deg_x, x)` and `(deg_y, y)`
/// wedge-multiplied must equal the image of their cup product.
struct Relation {
    deg_x: usize,
    x: usize,
    deg_y: usize,
    y: usize,
    /// Coordinates of `x . y` in the degree `deg_x + deg_y` basis.
    product: Vec<f64>,
}

/// Sparse wedge tensor entry for a degree pair: basis index in the left
/// degree, in the right degree, target index, sign.
type WedgeEntry = (usize, usize, usize, f64);

/// Parameter layout and residual system for one presentation. Exposed so the
/// objective/gradient pair can be checked against finite differences.
pub struct SearchProblem {
    n: usize,
    betti: Vec<usize>,
    labels: Vec<Vec<String>>,
    /// Positive degrees carrying classes, ascending.
    degrees: Vec<usize>,
    /// Offset of each (degree, class) block in the parameter vector.
    offsets: Vec<Vec<usize>>,
    dim_per_degree: Vec<usize>,
    params: usize,
    relations: Vec<Relation>,
    wedge: std::collections::BTreeMap<(usize, usize), Vec<WedgeEntry>>,
    margin_target: f64,
    margin_weight: f64,
}

impl SearchProblem {
    pub fn new(ring: &Ring64, config: &SearchConfig) -> Self {
        let n = ring.formal_dim();
        let betti = ring.betti().to_vec();
        let degrees: Vec<usize> = (1..=n).filter(|&k| betti[k] > 0).collect();
        let dim_per_degree: Vec<usize> = (0..=n).map(|k| binomial(n, k)).collect();

        let mut offsets = vec![Vec::new(); n + 1];
        let mut params = 0usize;
        for &k in &degrees {
            for _ in 0..betti[k] {
                offsets[k].push(params);
                params += dim_per_degree[k];
            }
        }

        let mut relations = Vec::new();
        for (di, &dx) in degrees.iter().enumerate() {
            for &dy in &degrees[di..] {
                if dx + dy > n {
                    continue;
                }
                for x in 0..betti[dx] {
                    let y_start = |x: usize| if dx == dy { x } else { 0 };
                    for y in y_start(x)..betti[dy] {
                        let product = ring
                            .cup(&ring.basis_class(dx, x), &ring.basis_class(dy, y))
                            .expect("degrees checked")
                            .coords;
                        relations.push(Relation { deg_x: dx, x, deg_y: dy, y, product });
                    }
                }
            }
        }

        let mut wedge = std::collections::BTreeMap::new();
        for (di, &dx) in degrees.iter().enumerate() {
            for &dy in &degrees[di..] {
                if dx + dy > n {
                    continue;
                }
                let left: Vec<_> = basis_tuples(n, dx).collect();
                let right: Vec<_> = basis_tuples(n, dy).collect();
                let target: Vec<_> = basis_tuples(n, dx + dy).collect();
                let mut entries = Vec::new();
                for (i, ti) in left.iter().enumerate() {
                    for (j, tj) in right.iter().enumerate() {
                        if let Some((merged, sign)) = merge_tuples(ti, tj) {
                            let t = target.iter().position(|u| *u == merged).unwrap();
                            entries.push((i, j, t, sign as f64));
                        }
                    }
                }
                wedge.insert((dx, dy), entries);
            }
        }

        SearchProblem {
            n,
            labels: (0..=n).map(|k| ring.labels(k).to_vec()).collect(),
            betti,
            degrees,
            offsets,
            dim_per_degree,
            params,
            relations,
            wedge,
            margin_target: (10.0 * config.tol_injectivity).max(0.05),
            margin_weight: 1.0,
        }
    }

    pub fn param_count(&self) -> usize {
        self.params
    }

    fn image_coords<'a>(&self, x: &'a DVector<f64>, deg: usize, class: usize) -> &'a [f64] {
        let off = self.offsets[deg][class];
        &x.as_slice()[off..off + self.dim_per_degree[deg]]
    }

    fn residual_rows(&self) -> usize {
        self.relations.iter().map(|r| self.dim_per_degree[r.deg_x + r.deg_y]).sum::<usize>() + self.degrees.len()
    }

    /// Image matrix of one degree: rows are class images in the lex basis.
    fn degree_matrix(&self, x: &DVector<f64>, deg: usize) -> DMatrix<f64> {
        let rows = self.betti[deg];
        let cols = self.dim_per_degree[deg];
        DMatrix::from_fn(rows, cols, |r, c| self.image_coords(x, deg, r)[c])
    }

    /// Smallest singular value of a degree's image matrix, with its singular
    /// vector pair; zero margin when injectivity is dimensionally impossible.
    fn margin(&self, x: &DVector<f64>, deg: usize) -> (f64, Option<(DVector<f64>, DVector<f64>)>) {
        let rows = self.betti[deg];
        let cols = self.dim_per_degree[deg];
        if rows > cols {
            return (0.0, None);
        }
        let m = self.degree_matrix(x, deg);
        let svd = m.svd(true, true);
        let (mut idx, mut min) = (0usize, f64::INFINITY);
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s < min {
                min = s;
                idx = i;
            }
        }
        let u = svd.u.as_ref().map(|u| u.column(idx).into_owned());
        let v = svd.v_t.as_ref().map(|vt| vt.row(idx).transpose());
        (min, u.zip(v))
    }

    pub fn margins(&self, x: &DVector<f64>) -> Vec<(usize, f64)> {
        self.degrees.iter().map(|&k| (k, self.margin(x, k).0)).collect()
    }

    /// Residual vector and Jacobian. Relation blocks first, then one hinge
    /// row per degree.
    pub fn residual_jacobian(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let rows = self.residual_rows();
        let mut r = DVector::zeros(rows);
        let mut jac = DMatrix::zeros(rows, self.params);
        let mut row0 = 0usize;
        for rel in &self.relations {
            let tdim = self.dim_per_degree[rel.deg_x + rel.deg_y];
            let a = self.image_coords(x, rel.deg_x, rel.x);
            let b = self.image_coords(x, rel.deg_y, rel.y);
            let off_a = self.offsets[rel.deg_x][rel.x];
            let off_b = self.offsets[rel.deg_y][rel.y];
            for &(i, j, t, sign) in &self.wedge[&(rel.deg_x, rel.deg_y)] {
                r[row0 + t] += sign * a[i] * b[j];
                jac[(row0 + t, off_a + i)] += sign * b[j];
                jac[(row0 + t, off_b + j)] += sign * a[i];
            }
            let target_deg = rel.deg_x + rel.deg_y;
            for z in 0..self.betti[target_deg] {
                let c = rel.product[z];
                if c == 0.0 {
                    continue;
                }
                let off_z = self.offsets[target_deg][z];
                for t in 0..tdim {
                    r[row0 + t] -= c * x[off_z + t];
                    jac[(row0 + t, off_z + t)] -= c;
                }
            }
            row0 += tdim;
        }
        for (mi, &k) in self.degrees.iter().enumerate() {
            let (margin, vectors) = self.margin(x, k);
            let gap = self.margin_target - margin;
            if gap > 0.0 {
                r[row0 + mi] = self.margin_weight * gap;
                if let Some((u, v)) = vectors {
                    // d sigma_min / d M = u v^T
                    for class in 0..self.betti[k] {
                        let off = self.offsets[k][class];
                        for c in 0..self.dim_per_degree[k] {
                            jac[(row0 + mi, off + c)] = -self.margin_weight * u[class] * v[c];
                        }
                    }
                }
            }
        }
        (r, jac)
    }

    /// Half squared norm of the residual vector, and its analytic gradient.
    pub fn objective_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (r, jac) = self.residual_jacobian(x);
        (0.5 * r.norm_squared(), jac.transpose() * r)
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let (r, _) = self.residual_jacobian(x);
        0.5 * r.norm_squared()
    }

    /// Sum of squared relation violations only (no hinge rows).
    pub fn relation_residual(&self, x: &DVector<f64>) -> f64 {
        let (r, _) = self.residual_jacobian(x);
        let relation_rows = self.residual_rows() - self.degrees.len();
        r.rows(0, relation_rows).norm_squared()
    }

    pub fn random_start(&self, rng: &mut impl Rng) -> DVector<f64> {
        DVector::from_fn(self.params, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn witness(&self, x: &DVector<f64>) -> EmbeddingWitness {
        let mut images = vec![WitnessImage {
            degree: 0,
            index: 0,
            label: self.labels[0].first().cloned().unwrap_or_else(|| "1".into()),
            image: Multivector::one(self.n),
        }];
        for &k in &self.degrees {
            for class in 0..self.betti[k] {
                let coords = self.image_coords(x, k, class);
                let terms = basis_tuples(self.n, k).zip(coords.iter().cloned()).collect::<Vec<_>>();
                images.push(WitnessImage {
                    degree: k,
                    index: class,
                    label: self.labels[k][class].clone(),
                    image: Multivector::from_terms(self.n, terms).expect("lex tuples are valid"),
                });
            }
        }
        EmbeddingWitness {
            images,
            residual: self.relation_residual(x),
            injectivity_margins: self.margins(x),
        }
    }
}

struct RestartResult {
    index: u32,
    success: bool,
    residual: f64,
    margins: Vec<(usize, f64)>,
    x: DVector<f64>,
}

fn run_restart(problem: &SearchProblem, config: &SearchConfig, index: u32) -> RestartResult {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut x = problem.random_start(&mut rng);
    let mut lambda = 1e-3;
    let mut objective = problem.objective(&x);
    for _ in 0..config.max_iters {
        let residual = problem.relation_residual(&x);
        let margins_ok = problem.margins(&x).iter().all(|&(_, m)| m > config.tol_injectivity);
        if residual < config.tol_residual && margins_ok {
            break;
        }
        let (r, jac) = problem.residual_jacobian(&x);
        let gradient = jac.transpose() * &r;
        if gradient.norm() < 1e-15 {
            break;
        }
        let jtj = jac.transpose() * &jac;
        let mut stepped = false;
        for _ in 0..25 {
            let mut damped = jtj.clone();
            for i in 0..problem.params {
                damped[(i, i)] += lambda * (jtj[(i, i)].abs() + 1e-12);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&gradient));
            let candidate = &x + &step;
            let cand_obj = problem.objective(&candidate);
            if cand_obj < objective {
                x = candidate;
                objective = cand_obj;
                lambda = (lambda * 0.3).max(1e-12);
                stepped = true;
                break;
            }
            lambda *= 4.0;
            if lambda > 1e14 {
                break;
            }
        }
        if !stepped {
            break;
        }
    }
    let residual = problem.relation_residual(&x);
    let margins = problem.margins(&x);
    let success = residual < config.tol_residual && margins.iter().all(|&(_, m)| m > config.tol_injectivity);
    RestartResult { index, success, residual, margins, x }
}

/// Multistart search. Restarts are independent, run in parallel, and merged
/// by (success, residual, restart index) so the outcome does not depend on
/// scheduling.
pub fn search_embedding(ring: &Ring64, config: &SearchConfig) -> Result<SearchOutcome> {
    config.validate()?;
    let problem = SearchProblem::new(ring, config);
    let results: Vec<RestartResult> = (0..config.restarts)
        .into_par_iter()
        .map(|i| run_restart(&problem, config, i))
        .collect();

    // success beats failure, then lower residual, then lower restart index
    let best = results
        .iter()
        .min_by(|a, b| {
            b.success
                .cmp(&a.success)
                .then(a.residual.partial_cmp(&b.residual).unwrap_or(std::cmp::Ordering::Equal))
                .then(a.index.cmp(&b.index))
        })
        .expect("at least one restart");
    let successes = results.iter().filter(|r| r.success).count() as u32;
    let stats = SearchStats {
        restarts_run: config.restarts,
        successes,
        best_residual: best.residual,
        best_margins: best.margins.clone(),
        winning_restart: best.success.then_some(best.index),
    };
    let witness = best.success.then(|| problem.witness(&best.x));
    Ok(SearchOutcome { witness, stats })
}

/// Recompute a witness's relation residual with the generic multivector
/// wedge, independently of the search's internal tables.
pub fn verify_witness(ring: &Ring64, witness: &EmbeddingWitness) -> f64 {
    let n = ring.formal_dim();
    let find = |deg: usize, idx: usize| -> &Multivector<f64> {
        &witness
            .images
            .iter()
            .find(|w| w.degree == deg && w.index == idx)
            .expect("witness covers every basis class")
            .image
    };
    let mut total = 0.0;
    let degrees: Vec<usize> = (1..=n).filter(|&k| ring.betti()[k] > 0).collect();
    for (di, &dx) in degrees.iter().enumerate() {
        for &dy in &degrees[di..] {
            if dx + dy > n {
                continue;
            }
            for x in 0..ring.betti()[dx] {
                let start = if dx == dy { x } else { 0 };
                for y in start..ring.betti()[dy] {
                    let wedge = find(dx, x).wedge(find(dy, y)).expect("matching dimensions");
                    let product = ring.cup(&ring.basis_class(dx, x), &ring.basis_class(dy, y)).expect("degree ok");
                    let mut target = Multivector::zero(n);
                    for (z, c) in product.coords.iter().enumerate() {
                        if *c != 0.0 {
                            target = target.add(&find(dx + dy, z).scale(c)).expect("same dim");
                        }
                    }
                    let diff = wedge.sub(&target).expect("same dim");
                    total += diff.norm().powi(2);
                }
            }
        }
    }
    total
}
