//! Quasiregular map family B_2^n -> S^n concentrating normalized pullback
//! mass on the segment [-1,1] x {0}: j disjoint balls along the axis, each
//! carrying a conjugated angle-tripling of the sphere, glued to the
//! stereographic embedding outside. The lab measures areas, doubling ratios,
//! distortion, per-ball masses, and test-function integrals against the
//! singular line-measure target.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::quad::{self, Ball, GridSpec, Region};

/// Surface volume of the unit n-sphere.
pub fn vol_sphere(n: usize) -> f64 {
    // vol(S^n) = 2 pi^((n+1)/2) / Gamma((n+1)/2)
    2.0 * std::f64::consts::PI.powf((n as f64 + 1.0) / 2.0) / gamma_half(n + 1)
}

/// Volume of the unit n-ball.
pub fn vol_unit_ball(n: usize) -> f64 {
    std::f64::consts::PI.powf(n as f64 / 2.0) / gamma_half(n + 2)
}

/// Gamma(k/2) for positive integer k.
fn gamma_half(k: usize) -> f64 {
    match k {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (k as f64 / 2.0 - 1.0) * gamma_half(k - 2),
    }
}

/// Point on S^n, stored as a unit vector in R^{n+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint(pub Vec<f64>);

impl SpherePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let norm2: f64 = coords.iter().map(|c| c * c).sum();
        if (norm2.sqrt() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("not a unit vector: |p| = {}", norm2.sqrt())));
        }
        Ok(SpherePoint(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    fn renormalized(mut coords: Vec<f64>) -> SpherePoint {
        let norm: f64 = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        for c in &mut coords {
            *c /= norm;
        }
        SpherePoint(coords)
    }
}

/// Stereographic projection from the north pole (0,..,0,1); the origin maps
/// to the south pole. Conformal with factor 2/(1+|x|^2).
pub fn stereographic(x: &[f64]) -> SpherePoint {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let s = 1.0 + r2;
    let mut coords: Vec<f64> = x.iter().map(|v| 2.0 * v / s).collect();
    coords.push((r2 - 1.0) / s);
    SpherePoint::renormalized(coords)
}

/// Inverse stereographic projection; rejects the projection pole.
pub fn stereographic_inv(p: &SpherePoint) -> Result<Vec<f64>> {
    let n = p.dim();
    let last = p.0[n];
    if 1.0 - last < 1e-14 {
        return Err(Error::InvalidInput("projection pole has no preimage".into()));
    }
    Ok(p.0[..n].iter().map(|u| u / (1.0 - last)).collect())
}

pub fn conformal_factor(x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    2.0 / (1.0 + r2)
}

/// Differential of the stereographic projection, (n+1) x n.
pub fn stereographic_differential(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let s = 1.0 + r2;
    DMatrix::from_fn(n + 1, n, |row, col| {
        if row < n {
            let kron = if row == col { 2.0 / s } else { 0.0 };
            kron - 4.0 * x[row] * x[col] / (s * s)
        } else {
            4.0 * x[col] / (s * s)
        }
    })
}

/// Differential of the inverse projection at p, n x (n+1).
fn stereographic_inv_differential(p: &SpherePoint) -> DMatrix<f64> {
    let n = p.dim();
    let last = p.0[n];
    let d = 1.0 - last;
    DMatrix::from_fn(n, n + 1, |row, col| {
        if col < n {
            if row == col {
                1.0 / d
            } else {
                0.0
            }
        } else {
            p.0[row] / (d * d)
        }
    })
}

/// Sphere self-map tripling the angle in the plane of the last two ambient
/// coordinates; fixes the equator where the final coordinate vanishes and
/// preserves the norm.
pub fn winding_triple(p: &SpherePoint) -> SpherePoint {
    let m = p.0.len();
    let (a, b) = (p.0[m - 2], p.0[m - 1]);
    let r = (a * a + b * b).sqrt();
    if r == 0.0 {
        return p.clone();
    }
    let theta = b.atan2(a);
    let mut coords = p.0.clone();
    coords[m - 2] = r * (3.0 * theta).cos();
    coords[m - 1] = r * (3.0 * theta).sin();
    SpherePoint::renormalized(coords)
}

/// Ambient differential of the angle-tripling map at p (defined off the axis
/// where the last two coordinates vanish). Identity on the first n-1
/// coordinates, Wirtinger-derived block on the winding plane.
fn winding_differential(p: &SpherePoint) -> DMatrix<f64> {
    let m = p.0.len();
    let (a, b) = (p.0[m - 2], p.0[m - 1]);
    let r2 = a * a + b * b;
    assert!(r2 > 0.0, "winding differential undefined on the axis");
    let theta = b.atan2(a);
    // g(w) = w^2 / conj(w): g_w = 2 e^{2 i theta}, g_wbar = -e^{4 i theta}
    let (gw_re, gw_im) = (2.0 * (2.0 * theta).cos(), 2.0 * (2.0 * theta).sin());
    let (gb_re, gb_im) = (-(4.0 * theta).cos(), -(4.0 * theta).sin());
    let mut df = DMatrix::identity(m, m);
    df[(m - 2, m - 2)] = gw_re + gb_re;
    df[(m - 2, m - 1)] = -(gw_im - gb_im);
    df[(m - 1, m - 2)] = gw_im + gb_im;
    df[(m - 1, m - 1)] = gw_re - gb_re;
    df
}

/// The map family: index j gives j balls of radius 1/j centered on the first
/// axis at -1 + (2i-1)/j, each carrying the conjugated winding map; the
/// stereographic embedding elsewhere.
#[derive(Debug, Clone)]
pub struct MapFamily {
    pub n: usize,
    pub j: u32,
    pub centers: Vec<Vec<f64>>,
    pub radius: f64,
}

/// Ball centers as exact integer pairs (numerator of first coordinate, j):
/// center_i = (2i - 1 - j)/j. Disjointness and containment in the closed
/// unit ball hold in integer arithmetic: adjacent numerators differ by 2 and
/// |2i - 1 - j| + 1 <= j for 1 <= i <= j.
pub fn ball_layout_exact(j: u64) -> Vec<(i64, i64)> {
    (1..=j as i64).map(|i| (2 * i - 1 - j as i64, j as i64)).collect()
}

impl MapFamily {
    pub fn new(n: usize, j: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("family needs n >= 2, got {n}")));
        }
        if j < 1 {
            return Err(Error::InvalidInput("family index must be at least 1".into()));
        }
        let centers = (1..=j)
            .map(|i| {
                let mut c = vec![0.0; n];
                c[0] = -1.0 + (2.0 * i as f64 - 1.0) / j as f64;
                c
            })
            .collect();
        Ok(MapFamily { n, j, centers, radius: 1.0 / j as f64 })
    }

    pub fn ball(&self, i: usize) -> Ball {
        Ball::new(self.centers[i].clone(), self.radius)
    }

    pub fn balls(&self) -> Vec<Ball> {
        (0..self.centers.len()).map(|i| self.ball(i)).collect()
    }

    pub fn ball_index(&self, x: &[f64]) -> Option<usize> {
        // balls only overlap the axis slab |x1 + 1| <= 2
        self.centers.iter().position(|c| {
            let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            d2 < self.radius * self.radius
        })
    }

    fn rescale(&self, i: usize, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.centers[i]).map(|(v, c)| (v - c) * self.j as f64).collect()
    }

    fn unscale(&self, i: usize, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.centers[i]).map(|(v, c)| v / self.j as f64 + c).collect()
    }

    /// Value inside ball i: conjugate the winding map by the Moebius
    /// transform aligning the ball with the unit ball. The conjugating
    /// transform fixes the projection pole, so a pole value stays the pole.
    pub fn eval_in_ball(&self, i: usize, x: &[f64]) -> SpherePoint {
        let q = stereographic(&self.rescale(i, x));
        let fq = winding_triple(&q);
        match stereographic_inv(&fq) {
            Ok(y) => stereographic(&self.unscale(i, &y)),
            Err(_) => fq, // exactly the pole, which the conjugation fixes
        }
    }

    pub fn eval(&self, x: &[f64]) -> SpherePoint {
        match self.ball_index(x) {
            Some(i) => self.eval_in_ball(i, x),
            None => stereographic(x),
        }
    }

    /// Signed Jacobian determinant with respect to the sphere volume, by the
    /// product of conformal factors; the winding map contributes the constant
    /// factor 3 off its axis.
    pub fn jacobian(&self, x: &[f64]) -> f64 {
        let n = self.n as i32;
        match self.ball_index(x) {
            None => conformal_factor(x).powi(n),
            Some(i) => {
                let u = self.rescale(i, x);
                let q = stereographic(&u);
                let fq = winding_triple(&q);
                let x0 = match stereographic_inv(&fq) {
                    Ok(v) => v,
                    Err(_) => {
                        // measure-zero pole preimage: nudge within the cell
                        let mut shifted = x.to_vec();
                        shifted[0] += 1e-9 * self.radius;
                        return self.jacobian(&shifted);
                    }
                };
                let y = self.unscale(i, &x0);
                let lam_in = conformal_factor(&u) * self.j as f64;
                // lambda(y) / lambda(x0) computed as a ratio to avoid overflow
                let r2_x0: f64 = x0.iter().map(|v| v * v).sum();
                let r2_y: f64 = y.iter().map(|v| v * v).sum();
                let ratio = (1.0 + r2_x0) / (1.0 + r2_y) / self.j as f64;
                3.0 * (lam_in * ratio).powi(n)
            }
        }
    }

    /// Closed-form differential, (n+1) x n. Defined away from ball
    /// boundaries, the winding axis preimage, and pole preimages.
    pub fn differential(&self, x: &[f64]) -> DMatrix<f64> {
        match self.ball_index(x) {
            None => stereographic_differential(x),
            Some(i) => {
                let u = self.rescale(i, x);
                let q = stereographic(&u);
                let fq = winding_triple(&q);
                let x0 = stereographic_inv(&fq).expect("pole preimage excluded from differential sampling");
                let y = self.unscale(i, &x0);
                // chain: D iota(y) . (1/j) . D iota^{-1}(Fq) . DF(q) . D iota(u) . j
                stereographic_differential(&y)
                    * stereographic_inv_differential(&fq)
                    * winding_differential(&q)
                    * stereographic_differential(&u)
            }
        }
    }

    /// Central-difference differential (step per component).
    pub fn differential_fd(&self, x: &[f64], step: f64) -> DMatrix<f64> {
        let n = self.n;
        let mut df = DMatrix::zeros(n + 1, n);
        for c in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[c] += step;
            xm[c] -= step;
            let fp = self.eval(&xp);
            let fm = self.eval(&xm);
            for r in 0..=n {
                df[(r, c)] = (fp.0[r] - fm.0[r]) / (2.0 * step);
            }
        }
        df
    }

    /// Pointwise distortion |Df|^n / J_f from the matrix differential; the
    /// Jacobian uses the inward-normal completion so the untwisted region has
    /// distortion exactly 1.
    pub fn distortion_at(&self, x: &[f64]) -> f64 {
        let df = self.differential(x);
        let p = self.eval(x);
        let jac = jacobian_from_matrix(&df, &p);
        let op = df.svd(false, false).singular_values.max();
        op.powi(self.n as i32) / jac
    }
}

/// Signed Jacobian from an (n+1) x n differential by appending the inward
/// normal, which orients the sphere compatibly with the stereographic chart.
pub fn jacobian_from_matrix(df: &DMatrix<f64>, p: &SpherePoint) -> f64 {
    let m = p.0.len();
    let mut full = DMatrix::zeros(m, m);
    full.view_mut((0, 0), (m, m - 1)).copy_from(df);
    for r in 0..m {
        full[(r, m - 1)] = -p.0[r];
    }
    full.determinant()
}

/// Spherical volume of the stereographic image of a ball whose center sits at
/// distance `center_norm` from the origin. The image is a geodesic cap; its
/// bounding plane is fixed by symmetry in the plane spanned by the center
/// direction and the projection axis.
pub fn stereographic_cap_volume(n: usize, center_norm: f64, radius: f64) -> Result<f64> {
    let a = center_norm;
    let r = radius;
    let project = |t: f64| -> (f64, f64) {
        let s = 1.0 + t * t;
        (2.0 * t / s, (t * t - 1.0) / s)
    };
    let p_plus = project(a + r);
    let p_minus = project(a - r);
    let p_center = project(a);
    // normal to the chord, in the (center axis, pole axis) plane
    let chord = (p_plus.0 - p_minus.0, p_plus.1 - p_minus.1);
    let len = (chord.0 * chord.0 + chord.1 * chord.1).sqrt();
    let normal = (-chord.1 / len, chord.0 / len);
    let mut height = normal.0 * p_plus.0 + normal.1 * p_plus.1;
    // orient the plane toward the side holding the image of the ball center
    if normal.0 * p_center.0 + normal.1 * p_center.1 < height {
        height = -height;
    }
    let alpha = height.clamp(-1.0, 1.0).acos();
    match n {
        2 => Ok(2.0 * std::f64::consts::PI * (1.0 - height)),
        3 => Ok(2.0 * std::f64::consts::PI * (alpha - alpha.sin() * alpha.cos())),
        _ => Err(Error::InvalidInput(format!("cap volume implemented for n in {{2,3}}, got {n}"))),
    }
}

/// Compactly supported test function on R^n.
#[derive(Debug, Clone)]
pub enum TestFunction {
    /// Smooth bump, 1 at the center, vanishing outside the radius.
    Bump { center: Vec<f64>, radius: f64 },
    /// 1 on the ball of the given radius, smoothly cut off by 1.5x the radius.
    Cutoff { center: Vec<f64>, radius: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Bump { center, radius } => {
                let t2 = norm2_diff(x, center) / (radius * radius);
                if t2 >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - t2)).exp()
                }
            }
            TestFunction::Cutoff { center, radius } => {
                let t = norm2_diff(x, center).sqrt() / radius;
                if t <= 1.0 {
                    1.0
                } else if t >= 1.5 {
                    0.0
                } else {
                    1.0 - smoothstep((t - 1.0) / 0.5)
                }
            }
        }
    }

    pub fn support_radius(&self) -> f64 {
        match self {
            TestFunction::Bump { radius, .. } => *radius,
            TestFunction::Cutoff { radius, .. } => 1.5 * radius,
        }
    }

    pub fn center(&self) -> &[f64] {
        match self {
            TestFunction::Bump { center, .. } | TestFunction::Cutoff { center, .. } => center,
        }
    }

    pub fn label(&self) -> String {
        let (kind, c, r) = match self {
            TestFunction::Bump { center, radius } => ("bump", center, radius),
            TestFunction::Cutoff { center, radius } => ("cutoff", center, radius),
        };
        format!("{kind}(c=({}),r={r})", c.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(","))
    }

    pub fn to_json(&self) -> Value {
        let (kind, c, r) = match self {
            TestFunction::Bump { center, radius } => ("bump", center, radius),
            TestFunction::Cutoff { center, radius } => ("cutoff", center, radius),
        };
        json!({"type": kind, "center": c, "radius": r})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let kind = v["type"].as_str().ok_or_else(|| Error::Serde("test function missing type".into()))?;
        let center: Vec<f64> = v["center"]
            .as_array()
            .ok_or_else(|| Error::Serde("test function missing center".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| Error::Serde("bad center entry".into())))
            .collect::<Result<_>>()?;
        let radius = v["radius"].as_f64().ok_or_else(|| Error::Serde("test function missing radius".into()))?;
        if radius <= 0.0 {
            return Err(Error::InvalidInput("test function radius must be positive".into()));
        }
        match kind {
            "bump" => Ok(TestFunction::Bump { center, radius }),
            "cutoff" => Ok(TestFunction::Cutoff { center, radius }),
            other => Err(Error::Serde(format!("unknown test function type {other}"))),
        }
    }
}

fn norm2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn smoothstep(u: f64) -> f64 {
    // C^infinity transition from 0 at u<=0 to 1 at u>=1
    let b = |t: f64| if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() };
    b(u) / (b(u) + b(1.0 - u))
}

/// The battery shipped with the lab: cutoff over the unit ball, a wide bump,
/// bumps on and off the limit segment, and a cutoff in the right half plane.
pub fn default_battery(n: usize) -> Vec<TestFunction> {
    let at = |x1: f64, x2: f64| {
        let mut c = vec![0.0; n];
        c[0] = x1;
        if n > 1 {
            c[1] = x2;
        }
        c
    };
    vec![
        TestFunction::Cutoff { center: at(0.0, 0.0), radius: 1.0 },
        TestFunction::Bump { center: at(0.0, 0.0), radius: 1.5 },
        TestFunction::Bump { center: at(0.5, 0.0), radius: 0.4 },
        TestFunction::Bump { center: at(0.0, 0.5), radius: 0.4 },
        TestFunction::Bump { center: at(-0.5, 0.0), radius: 0.5 },
        TestFunction::Cutoff { center: at(0.55, 0.0), radius: 0.25 },
    ]
}

/// Line-measure target: half the integral of the test function along the
/// segment [-1,1] on the first axis.
pub fn segment_target(psi: &TestFunction, n: usize) -> f64 {
    quad::integrate_1d(-1.0, 1.0, 64, 12, |t| {
        let mut x = vec![0.0; n];
        x[0] = t;
        0.5 * psi.eval(&x)
    })
}

#[derive(Debug, Clone)]
pub struct LabConfig {
    pub n: usize,
    pub j_values: Vec<u32>,
    /// Cells across the diameter of the radius-2 ball.
    pub grid: usize,
    pub refine_depth: u32,
    pub distortion_samples: usize,
    pub seed: u64,
    pub battery: Vec<TestFunction>,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            n: 2,
            j_values: vec![1, 2, 4, 8, 16],
            grid: 2048,
            refine_depth: 4,
            distortion_samples: 2000,
            seed: 0,
            battery: default_battery(2),
        }
    }
}

impl LabConfig {
    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "j_values": self.j_values,
            "grid": self.grid,
            "refine_depth": self.refine_depth,
            "distortion_samples": self.distortion_samples,
            "seed": self.seed,
            "battery": self.battery.iter().map(|b| b.to_json()).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct BallMass {
    pub index: usize,
    pub mass: f64,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct PsiRecord {
    pub id: String,
    pub integral: f64,
    pub target: f64,
    pub abs_err: f64,
}

#[derive(Debug, Clone)]
pub struct FamilyRecord {
    pub j: u32,
    /// Pullback volume over the unit ball.
    pub area_unit: f64,
    /// Pullback volume over the radius-2 ball.
    pub total: f64,
    pub doubling_ratio: f64,
    pub distortion_estimate: f64,
    pub per_ball: Vec<BallMass>,
    pub outside_mass: f64,
    pub outside_fraction: f64,
    pub min_jacobian_sample: f64,
    pub psi: Vec<PsiRecord>,
}

#[derive(Debug, Clone)]
pub struct MeasureReport {
    pub config: LabConfig,
    pub records: Vec<FamilyRecord>,
}

impl MeasureReport {
    pub fn to_json(&self) -> Value {
        json!({
            "schema": "qre-toolkit/1",
            "config": self.config.to_json(),
            "records": self.records.iter().map(|r| json!({
                "j": r.j,
                "area_unit": r.area_unit,
                "total": r.total,
                "doubling_ratio": r.doubling_ratio,
                "distortion_estimate": r.distortion_estimate,
                "per_ball": r.per_ball.iter().map(|b| json!({
                    "i": b.index, "mass": b.mass, "target": b.target,
                })).collect::<Vec<_>>(),
                "outside_mass": r.outside_mass,
                "outside_fraction": r.outside_fraction,
                "min_jacobian_sample": r.min_jacobian_sample,
                "psi": r.psi.iter().map(|p| json!({
                    "id": p.id, "integral": p.integral, "target": p.target, "abs_err": p.abs_err,
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Sharp-peak loci of the pullback density inside one ball: the preimage of
/// the projection pole (the ball center) and the up-to-three preimages of the
/// chart center. Peak widths scale like radius/(3j), far below the grid cell.
pub fn family_hotspots(family: &MapFamily, cell_size: f64) -> Vec<quad::Hotspot> {
    let j = family.j as f64;
    let width = family.radius / (3.0 * j);
    let depth_for = |w: f64| -> u32 {
        if cell_size <= w / 8.0 {
            0
        } else {
            (cell_size / (w / 8.0)).log2().ceil().min(14.0) as u32
        }
    };
    let mut spots = Vec::new();
    for (i, center) in family.centers.iter().enumerate() {
        spots.push(quad::Hotspot { center: center.clone(), radius: 20.0 * width, depth: depth_for(width) });
        for q in chart_center_preimages(family, i) {
            if let Ok(x0) = stereographic_inv(&q) {
                let x = family.unscale(i, &x0);
                if norm2_diff(&x, center).sqrt() < family.radius {
                    spots.push(quad::Hotspot { center: x, radius: 12.0 * width, depth: depth_for(width) });
                }
            }
        }
    }
    spots
}

/// The three points of the winding sphere mapping to the image of the
/// rescaled chart center (ball centers sit on the first axis, so the target
/// lies in the plane of the first and last coordinates).
fn chart_center_preimages(family: &MapFamily, i: usize) -> Vec<SpherePoint> {
    let n = family.n;
    let t = -(family.j as f64) * family.centers[i][0];
    let s = 1.0 + t * t;
    let x_part = 2.0 * t / s;
    let z = (t * t - 1.0) / s;
    let r_w = z.abs();
    if r_w == 0.0 {
        return Vec::new();
    }
    let theta0 = z.atan2(0.0);
    (0..3)
        .map(|k| {
            let th = (theta0 + 2.0 * std::f64::consts::PI * k as f64) / 3.0;
            let mut coords = vec![0.0; n + 1];
            coords[0] = x_part;
            coords[n - 1] = r_w * th.cos();
            coords[n] = r_w * th.sin();
            SpherePoint::renormalized(coords)
        })
        .collect()
}

/// Deterministic sample points in the radius-2 ball avoiding ball boundaries,
/// ball centers (pole preimages), and the winding-axis preimages.
fn distortion_samples(family: &MapFamily, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = family.n;
    let margin = 1e-3 * family.radius;
    let mut samples = Vec::with_capacity(count);
    // half the samples concentrate inside the balls where the winding acts
    while samples.len() < count {
        let in_ball = samples.len() % 2 == 0 && !family.centers.is_empty();
        let x: Vec<f64> = if in_ball {
            let i = rng.gen_range(0..family.centers.len());
            let c = &family.centers[i];
            (0..n).map(|d| c[d] + rng.gen_range(-1.0..1.0) * family.radius).collect()
        } else {
            (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()
        };
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 >= 4.0 {
            continue;
        }
        let mut ok = true;
        for c in &family.centers {
            let d = norm2_diff(&x, c).sqrt();
            if (d - family.radius).abs() < margin || d < margin {
                ok = false;
                break;
            }
            if d < family.radius {
                // stay away from the two axis points and the pole preimage offsets
                let u: Vec<f64> = x.iter().zip(c).map(|(a, b)| (a - b) * family.j as f64).collect();
                let un = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                let axis_dist = ((un - 1.0).abs()).min(un);
                if axis_dist < 1e-3 {
                    ok = false;
                }
                break;
            }
        }
        if ok {
            samples.push(x);
        }
    }
    samples
}

/// Run the lab for every family index in the config.
pub fn run_lab(config: &LabConfig) -> Result<MeasureReport> {
    for psi in &config.battery {
        let reach = psi.center().iter().map(|c| c * c).sum::<f64>().sqrt() + psi.support_radius();
        if reach >= 2.0 {
            return Err(Error::InvalidInput(format!(
                "test function {} is not compactly supported in the radius-2 ball",
                psi.label()
            )));
        }
    }
    let records = config
        .j_values
        .iter()
        .map(|&j| run_family(config, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureReport { config: config.clone(), records })
}

fn run_family(config: &LabConfig, j: u32) -> Result<FamilyRecord> {
    let family = MapFamily::new(config.n, j)?;
    let mut grid = GridSpec::new(4.0 / config.grid as f64, config.refine_depth);
    grid.hotspots = family_hotspots(&family, grid.cell_size);
    let grid = &grid;
    let width = 1 + config.battery.len();

    // one pass over the radius-2 ball: jacobian and psi-weighted jacobians
    let region2 = Region::ball(Ball::origin(config.n, 2.0));
    let (vals, min_j2) = quad::integrate_region_vec(&region2, grid, width, |x, out| {
        let jac = family.jacobian(x);
        out[0] = jac;
        for (slot, psi) in out[1..].iter_mut().zip(&config.battery) {
            *slot = jac * psi.eval(x);
        }
    });
    let total = vals[0];

    let region1 = Region::ball(Ball::origin(config.n, 1.0));
    let (area_unit, min_j1) = quad::integrate_region(&region1, grid, |x| family.jacobian(x));

    let mut per_ball = Vec::new();
    for i in 0..family.centers.len() {
        let region = Region::ball(family.ball(i));
        let (mass, _) = quad::integrate_region(&region, grid, |x| family.jacobian(x));
        let center_norm = family.centers[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        let cap = stereographic_cap_volume(config.n, center_norm, family.radius)?;
        per_ball.push(BallMass { index: i, mass, target: cap + vol_sphere(config.n) });
    }

    let ball_mass_sum: f64 = per_ball.iter().map(|b| b.mass).sum();
    let outside_mass = total - ball_mass_sum;
    let outside_fraction = outside_mass / area_unit;

    let samples = distortion_samples(&family, config.distortion_samples, config.seed);
    let distortion_estimate = samples
        .iter()
        .map(|x| family.distortion_at(x))
        .fold(0.0f64, f64::max);

    let psi = config
        .battery
        .iter()
        .zip(&vals[1..])
        .map(|(psi, &weighted)| {
            let integral = weighted / area_unit;
            let target = segment_target(psi, config.n);
            PsiRecord { id: psi.label(), integral, target, abs_err: (integral - target).abs() }
        })
        .collect();

    let min_jac = min_j1.min(min_j2);
    if min_jac < -1e-9 {
        return Err(Error::InvalidInput(format!("negative Jacobian sample {min_jac}: orientation bug")));
    }

    Ok(FamilyRecord {
        j,
        area_unit,
        total,
        doubling_ratio: total / area_unit,
        distortion_estimate,
        per_ball,
        outside_mass,
        outside_fraction,
        min_jacobian_sample: min_jac,
        psi,
    })
}

/// Quadrature area of the pullback over a ball region, with a
/// resolution-halving error estimate. Flags negative Jacobian samples.
pub fn area(family: &MapFamily, region_ball: &Ball, grid: &GridSpec) -> Result<(f64, f64)> {
    let region = Region::ball(region_ball.clone());
    let mut fine_grid = grid.clone();
    fine_grid.hotspots = family_hotspots(family, fine_grid.cell_size);
    let (fine, min_fine) = quad::integrate_region(&region, &fine_grid, |x| family.jacobian(x));
    let mut coarse_grid = fine_grid.clone();
    coarse_grid.cell_size *= 2.0;
    coarse_grid.hotspots = family_hotspots(family, coarse_grid.cell_size);
    let (coarse, _) = quad::integrate_region(&region, &coarse_grid, |x| family.jacobian(x));
    if min_fine < -1e-9 {
        return Err(Error::InvalidInput(format!("negative Jacobian sample {min_fine}: orientation bug")));
    }
    Ok((fine, (fine - coarse).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_volumes() {
        assert!((vol_sphere(2) - 4.0 * PI).abs() < 1e-12);
        assert!((vol_sphere(3) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((vol_unit_ball(2) - PI).abs() < 1e-12);
        assert!((vol_unit_ball(3) - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn origin_maps_to_south_pole() {
        let p = stereographic(&[0.0, 0.0]);
        assert!((p.0[0]).abs() < 1e-15 && (p.0[1]).abs() < 1e-15 && (p.0[2] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn stereographic_lands_on_sphere_and_inverts() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let p = stereographic(&x);
            let norm: f64 = p.0.iter().map(|v| v * v).sum::<f64>();
            assert!((norm - 1.0).abs() < 1e-12);
            let back = stereographic_inv(&p).unwrap();
            let err = norm2_diff(&back, &x).sqrt();
            assert!(err < 1e-10, "round trip error {err}");
        }
    }

    #[test]
    fn inverse_rejects_pole() {
        let pole = SpherePoint::new(vec![0.0, 0.0, 1.0]).unwrap();
        assert!(stereographic_inv(&pole).is_err());
    }

    #[test]
    fn stereographic_is_conformal() {
        // differential columns are orthogonal with equal norms = conformal factor
        let x = [0.7, -0.3];
        let df = stereographic_differential(&x);
        let lam = conformal_factor(&x);
        let c0 = df.column(0);
        let c1 = df.column(1);
        assert!((c0.norm() - lam).abs() < 1e-12);
        assert!((c1.norm() - lam).abs() < 1e-12);
        assert!(c0.dot(&c1).abs() < 1e-12);
    }

    #[test]
    fn winding_fixes_equator_and_triples_angle() {
        // theta = 0: fixed
        let p = SpherePoint::new(vec![0.6, 0.8, 0.0]).unwrap();
        let fp = winding_triple(&p);
        assert!(norm2_diff(&fp.0, &p.0).sqrt() < 1e-14);
        // theta = 2 pi / 9 -> 2 pi / 3 at the same radius and x-part
        let (x, r) = (0.6, 0.8);
        let th = 2.0 * PI / 9.0;
        let q = SpherePoint::new(vec![x, r * th.cos(), r * th.sin()]).unwrap();
        let fq = winding_triple(&q);
        let expect = [x, r * (3.0 * th).cos(), r * (3.0 * th).sin()];
        assert!(norm2_diff(&fq.0, &expect).sqrt() < 1e-14);
        // norm preserved
        assert!((fq.0.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn family_agrees_with_projection_outside() {
        let family = MapFamily::new(2, 4).unwrap();
        for x in [[1.5, 0.3], [-1.2, 0.9], [0.0, 1.5]] {
            assert_eq!(family.ball_index(&x), None);
            let p = family.eval(&x);
            let q = stereographic(&x);
            assert!(norm2_diff(&p.0, &q.0).sqrt() < 1e-15);
        }
    }

    #[test]
    fn boundary_continuity() {
        let family = MapFamily::new(2, 3).unwrap();
        for i in 0..3 {
            let c = &family.centers[i];
            for k in 0..12 {
                let th = 2.0 * PI * (k as f64 + 0.3) / 12.0;
                let x = [c[0] + family.radius * th.cos(), c[1] + family.radius * th.sin()];
                let inside = family.eval_in_ball(i, &x);
                let outside = stereographic(&x);
                let gap = norm2_diff(&inside.0, &outside.0).sqrt();
                assert!(gap < 1e-9, "boundary gap {gap} at ball {i} angle {th}");
            }
        }
    }

    #[test]
    fn ball_layout_exact_disjoint_and_contained() {
        for j in [1u64, 2, 3, 10, 100, 10_000] {
            let layout = ball_layout_exact(j);
            for w in layout.windows(2) {
                // adjacent center distance 2/j equals the diameter: tangent, disjoint interiors
                assert_eq!(w[1].0 - w[0].0, 2);
            }
            for &(num, den) in &layout {
                assert!(num.abs() + 1 <= den);
            }
        }
    }

    #[test]
    fn ball_centers_hit_the_pole_as_local_homeomorphisms() {
        // the rescaled center lands on the winding circle, a regular point of
        // the tripling map, so the pole value is taken with index one
        let family = MapFamily::new(2, 2).unwrap();
        for i in 0..2 {
            let c = &family.centers[i];
            let p = family.eval(c);
            assert!(norm2_diff(&p.0, &[0.0, 0.0, 1.0]).sqrt() < 1e-12, "center image {:?}", p.0);
            // winding of the image around the pole in the antipodal chart
            let chart = |p: &SpherePoint| -> (f64, f64) {
                let d = 1.0 + p.0[2];
                (p.0[0] / d, p.0[1] / d)
            };
            let r = family.radius * 0.05;
            let steps = 720;
            let mut total_turn = 0.0;
            let mut prev: Option<f64> = None;
            for k in 0..=steps {
                let th = 2.0 * PI * k as f64 / steps as f64;
                let x = [c[0] + r * th.cos(), c[1] + r * th.sin()];
                let (u, v) = chart(&family.eval(&x));
                let ang = v.atan2(u);
                if let Some(p) = prev {
                    let mut d = ang - p;
                    while d > PI {
                        d -= 2.0 * PI;
                    }
                    while d < -PI {
                        d += 2.0 * PI;
                    }
                    total_turn += d;
                }
                prev = Some(ang);
            }
            let winding = total_turn / (2.0 * PI);
            assert!((winding.abs() - 1.0).abs() < 1e-6, "winding = {winding}");
        }
    }

    #[test]
    fn winding_map_has_local_degree_three_on_its_axis() {
        // small circles around an axis point map with tripled angular speed
        let s = 0.05f64;
        let steps = 360;
        let mut total_turn = 0.0;
        let mut prev: Option<f64> = None;
        for k in 0..=steps {
            let t = 2.0 * PI * k as f64 / steps as f64;
            let q = SpherePoint::new(vec![s.cos(), s.sin() * t.cos(), s.sin() * t.sin()]).unwrap();
            let fq = winding_triple(&q);
            let ang = fq.0[2].atan2(fq.0[1]);
            if let Some(p) = prev {
                let mut d = ang - p;
                while d > PI {
                    d -= 2.0 * PI;
                }
                while d < -PI {
                    d += 2.0 * PI;
                }
                total_turn += d;
            }
            prev = Some(ang);
        }
        let winding = total_turn / (2.0 * PI);
        assert!((winding - 3.0).abs() < 1e-9, "winding = {winding}");
    }

    #[test]
    fn jacobian_routes_agree() {
        let family = MapFamily::new(2, 3).unwrap();
        let points = [[0.9, 0.9], [-0.61, 0.05], [0.05, 0.11], [-0.2, 0.01]];
        for x in points {
            let j_conformal = family.jacobian(&x);
            let df = family.differential(&x);
            let j_matrix = jacobian_from_matrix(&df, &family.eval(&x));
            assert!(
                (j_conformal - j_matrix).abs() <= 1e-8 * j_conformal.abs().max(1.0),
                "at {x:?}: conformal {j_conformal} vs matrix {j_matrix}"
            );
            let df_fd = family.differential_fd(&x, 1e-6);
            let gap = (&df - &df_fd).norm() / df.norm().max(1.0);
            assert!(gap < 1e-4, "closed form vs central differences: {gap}");
        }
    }

    #[test]
    fn jacobian_positive_and_identity_outside() {
        let family = MapFamily::new(2, 4).unwrap();
        let x = [1.3, 0.4];
        let lam = conformal_factor(&x);
        assert!((family.jacobian(&x) - lam * lam).abs() < 1e-14);
        assert!((family.distortion_at(&x) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn distortion_inside_balls_is_three() {
        let family = MapFamily::new(2, 3).unwrap();
        let c = &family.centers[1];
        for offset in [[0.4, 0.3], [-0.2, 0.5], [0.1, -0.6]] {
            let x = [c[0] + offset[0] * family.radius, c[1] + offset[1] * family.radius];
            let d = family.distortion_at(&x);
            assert!((d - 3.0).abs() < 1e-6, "distortion {d}");
        }
    }

    #[test]
    fn cap_volume_matches_quadrature() {
        for (a, r) in [(0.0, 1.0), (0.5, 0.25), (0.9, 0.05)] {
            let exact = stereographic_cap_volume(2, a, r).unwrap();
            let mut c = vec![a, 0.0];
            c.truncate(2);
            let region = Region::ball(Ball::new(c, r));
            let grid = GridSpec::new(2.0 * r / 512.0, 4);
            let (quadv, _) = quad::integrate_region(&region, &grid, |x| {
                conformal_factor(x).powi(2)
            });
            assert!((exact - quadv).abs() < 1e-3 * exact.max(1e-3), "a={a} r={r}: {exact} vs {quadv}");
        }
    }

    #[test]
    fn battery_targets() {
        let battery = default_battery(2);
        // unit cutoff: psi = 1 on [-1,1], so the target is exactly 1
        assert!((segment_target(&battery[0], 2) - 1.0).abs() < 1e-12);
        // off-segment bump: target 0
        assert_eq!(segment_target(&battery[3], 2), 0.0);
        // half-plane cutoff: equals half the integral over t > 0
        let t5 = segment_target(&battery[5], 2);
        assert!(t5 > 0.0);
    }

    #[test]
    fn segment_measure_convergence_small() {
        // coarse sanity run; the acceptance suite runs the full grid
        let config = LabConfig { grid: 512, j_values: vec![2, 8], distortion_samples: 400, ..Default::default() };
        let report = run_lab(&config).unwrap();
        assert_eq!(report.records.len(), 2);
        for rec in &report.records {
            assert!(rec.doubling_ratio <= 3.02, "doubling {}", rec.doubling_ratio);
            assert!(rec.outside_fraction <= 1.0 / rec.j as f64 + 0.02);
            for b in &rec.per_ball {
                let rel = (b.mass - b.target).abs() / b.target;
                assert!(rel < 0.02, "j={} ball {}: mass {} target {}", rec.j, b.index, b.mass, b.target);
            }
            assert!((rec.distortion_estimate - 3.0).abs() < 0.15);
        }
        let e2 = report.records[0].psi.iter().map(|p| p.abs_err).fold(0.0f64, f64::max);
        let e8 = report.records[1].psi.iter().map(|p| p.abs_err).fold(0.0f64, f64::max);
        assert!(e8 < e2, "errors should shrink: {e2} -> {e8}");
    }

    #[test]
    fn area_error_estimate() {
        let family = MapFamily::new(2, 1).unwrap();
        let grid = GridSpec::new(4.0 / 512.0, 3);
        let (v, err) = area(&family, &Ball::origin(2, 2.0), &grid).unwrap();
        assert!(err < 0.01 * v);
    }

    #[test]
    fn projection_area_approaches_sphere_volume() {
        // over a growing ball the pullback of the projection exhausts the sphere
        let grid = GridSpec::new(0.02, 3);
        let mut last = 0.0;
        for radius in [2.0, 8.0, 20.0] {
            let region = Region::ball(Ball::origin(2, radius));
            let (v, _) = quad::integrate_region(&region, &grid, |x| conformal_factor(x).powi(2));
            assert!(v > last);
            last = v;
        }
        assert!((last - 4.0 * PI).abs() < 0.15, "limit {last}");
    }

    #[test]
    fn rejects_unsupported_test_function() {
        let config = LabConfig {
            battery: vec![TestFunction::Bump { center: vec![1.5, 0.0], radius: 0.8 }],
            grid: 128,
            j_values: vec![1],
            ..Default::default()
        };
        assert!(run_lab(&config).is_err());
    }
}
