//! Deterministic quadrature: tensor midpoint grids over ball regions with
//! recursive refinement at region boundaries, and composite Gauss-Legendre
//! rules for oscillatory box integrals. All reductions run in a fixed order
//! so results are bit-stable across thread counts.

use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Ball { center, radius }
    }

    pub fn origin(n: usize, radius: f64) -> Self {
        Ball { center: vec![0.0; n], radius }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist(&self.center, x) < self.radius
    }

    /// Positive inside, negative outside.
    fn signed_depth(&self, x: &[f64]) -> f64 {
        self.radius - dist(&self.center, x)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Ball with a finite set of ball-shaped holes removed.
#[derive(Debug, Clone)]
pub struct Region {
    pub outer: Ball,
    pub holes: Vec<Ball>,
}

impl Region {
    pub fn ball(outer: Ball) -> Self {
        Region { outer, holes: Vec::new() }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.outer.contains(x) && !self.holes.iter().any(|h| h.contains(x))
    }

    /// Cell classification by center and half-diagonal.
    fn classify(&self, center: &[f64], half_diag: f64) -> CellClass {
        let d = self.outer.signed_depth(center);
        if d <= -half_diag {
            return CellClass::Outside;
        }
        let mut boundary = d < half_diag;
        for h in &self.holes {
            let hd = h.signed_depth(center);
            if hd >= half_diag {
                return CellClass::Outside;
            }
            if hd > -half_diag {
                boundary = true;
            }
        }
        if boundary {
            CellClass::Boundary
        } else {
            CellClass::Inside
        }
    }
}

#[derive(PartialEq)]
enum CellClass {
    Inside,
    Outside,
    Boundary,
}

/// Locus where the integrand is sharply peaked; cells meeting it subdivide
/// to the given dyadic depth regardless of region classification.
#[derive(Debug, Clone)]
pub struct Hotspot {
    pub center: Vec<f64>,
    pub radius: f64,
    pub depth: u32,
}

#[derive(Debug, Clone, Default)]
pub struct GridSpec {
    /// Cell side length of the top-level midpoint grid.
    pub cell_size: f64,
    /// Dyadic subdivisions applied to cells crossing a region boundary.
    pub refine_depth: u32,
    pub hotspots: Vec<Hotspot>,
}

impl GridSpec {
    pub fn new(cell_size: f64, refine_depth: u32) -> Self {
        GridSpec { cell_size, refine_depth, hotspots: Vec::new() }
    }

    pub fn from_cells_over_diameter(diameter: f64, cells: usize) -> Self {
        GridSpec::new(diameter / cells as f64, 4)
    }

    fn required_hotspot_depth(&self, center: &[f64], half_diag: f64) -> u32 {
        let mut depth = 0;
        for h in &self.hotspots {
            if dist(&h.center, center) <= h.radius + half_diag {
                depth = depth.max(h.depth);
            }
        }
        depth
    }
}

/// Compensated (Neumaier) accumulator.
#[derive(Default, Clone, Copy)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Midpoint-rule integral of `f` over the region, with the smallest sampled
/// value of `f` returned alongside (orientation monitoring).
pub fn integrate_region<F>(region: &Region, grid: &GridSpec, f: F) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let vals = integrate_region_vec(region, grid, 1, |x, out| out[0] = f(x));
    (vals.0[0], vals.1)
}

/// Vector-valued variant: one grid pass accumulating `width` integrands.
/// Returns the integrals and the minimum of the first component's samples.
pub fn integrate_region_vec<F>(region: &Region, grid: &GridSpec, width: usize, f: F) -> (Vec<f64>, f64)
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let n = region.outer.center.len();
    let h = grid.cell_size;
    let lo: Vec<f64> = region.outer.center.iter().map(|c| c - region.outer.radius).collect();
    let cells = ((2.0 * region.outer.radius) / h).ceil() as usize;

    // chunk over the first axis; each chunk reduces rows in index order
    let partials: Vec<(Vec<Accumulator>, f64)> = (0..cells)
        .into_par_iter()
        .map(|i0| {
            let mut acc = vec![Accumulator::default(); width];
            let mut min_seen = f64::INFINITY;
            let mut idx = vec![0usize; n];
            idx[0] = i0;
            let mut center = vec![0.0; n];
            let mut buf = vec![0.0; width];
            loop {
                for (d, &i) in idx.iter().enumerate() {
                    center[d] = lo[d] + (i as f64 + 0.5) * h;
                }
                cell_contribution(region, grid, &center, h, &f, &mut acc, &mut min_seen, &mut buf, 0);
                // odometer over axes 1..n
                let mut d = n - 1;
                loop {
                    if d == 0 {
                        return (acc, min_seen);
                    }
                    idx[d] += 1;
                    if idx[d] < cells {
                        break;
                    }
                    idx[d] = 0;
                    d -= 1;
                }
            }
        })
        .collect();

    let mut total = vec![Accumulator::default(); width];
    let mut min_seen = f64::INFINITY;
    for (acc, m) in partials {
        for (t, a) in total.iter_mut().zip(acc) {
            t.add(a.value());
        }
        min_seen = min_seen.min(m);
    }
    (total.into_iter().map(|a| a.value()).collect(), min_seen)
}

#[allow(clippy::too_many_arguments)]
fn cell_contribution<F>(
    region: &Region,
    grid: &GridSpec,
    center: &[f64],
    side: f64,
    f: &F,
    acc: &mut [Accumulator],
    min_seen: &mut f64,
    buf: &mut [f64],
    depth: u32,
) where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let n = center.len();
    let half_diag = 0.5 * side * (n as f64).sqrt();
    let volume = side.powi(n as i32);
    let class = region.classify(center, half_diag);
    if let CellClass::Outside = class {
        return;
    }
    let boundary = class == CellClass::Boundary;
    let required = if boundary { grid.refine_depth } else { 0 }.max(grid.required_hotspot_depth(center, half_diag));
    if depth < required {
        let child = side / 2.0;
        let mut sub = vec![0.0; n];
        for corner in 0..(1usize << n) {
            for d in 0..n {
                let sign = if corner >> d & 1 == 1 { 0.5 } else { -0.5 };
                sub[d] = center[d] + sign * child;
            }
            cell_contribution(region, grid, &sub, child, f, acc, min_seen, buf, depth + 1);
        }
        return;
    }
    if !boundary || region.contains(center) {
        f(center, buf);
        *min_seen = min_seen.min(buf[0]);
        for (a, v) in acc.iter_mut().zip(buf.iter()) {
            a.add(v * volume);
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    for i in 0..order {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(order, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(order, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite Gauss-Legendre on an interval.
pub fn integrate_1d<F: Fn(f64) -> f64>(a: f64, b: f64, panels: usize, order: usize, f: F) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut acc = Accumulator::default();
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(&weights) {
            acc.add(w * 0.5 * h * f(mid + 0.5 * h * x));
        }
    }
    acc.value()
}

/// Tensor midpoint rule over an axis-aligned box, any dimension.
pub fn integrate_box_midpoint<F>(lo: &[f64], hi: &[f64], cells: usize, f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = lo.len();
    let h: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| (b - a) / cells as f64).collect();
    let volume: f64 = h.iter().product();
    let rows: Vec<f64> = (0..cells)
        .into_par_iter()
        .map(|i0| {
            let mut acc = Accumulator::default();
            let mut idx = vec![0usize; n];
            idx[0] = i0;
            let mut x = vec![0.0; n];
            loop {
                for d in 0..n {
                    x[d] = lo[d] + (idx[d] as f64 + 0.5) * h[d];
                }
                acc.add(f(&x) * volume);
                let mut d = n - 1;
                loop {
                    if d == 0 {
                        return acc.value();
                    }
                    idx[d] += 1;
                    if idx[d] < cells {
                        break;
                    }
                    idx[d] = 0;
                    d -= 1;
                }
            }
        })
        .collect();
    let mut acc = Accumulator::default();
    for r in rows {
        acc.add(r);
    }
    acc.value()
}

/// Composite Gauss-Legendre over an axis-aligned box in R^2.
pub fn integrate_box_2d<F>(lo: [f64; 2], hi: [f64; 2], panels: [usize; 2], order: usize, f: F) -> f64
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let (nodes, weights) = gauss_legendre(order);
    let hx = (hi[0] - lo[0]) / panels[0] as f64;
    let hy = (hi[1] - lo[1]) / panels[1] as f64;
    let rows: Vec<f64> = (0..panels[0])
        .into_par_iter()
        .map(|px| {
            let mut acc = Accumulator::default();
            for (xi, wx) in nodes.iter().zip(&weights) {
                let x = lo[0] + (px as f64 + 0.5) * hx + 0.5 * hx * xi;
                for py in 0..panels[1] {
                    for (yi, wy) in nodes.iter().zip(&weights) {
                        let y = lo[1] + (py as f64 + 0.5) * hy + 0.5 * hy * yi;
                        acc.add(wx * wy * 0.25 * hx * hy * f(x, y));
                    }
                }
            }
            acc.value()
        })
        .collect();
    let mut acc = Accumulator::default();
    for r in rows {
        acc.add(r);
    }
    acc.value()
}

/// Kendall rank correlation of a sequence against its index order.
pub fn kendall_tau(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            match values[j].partial_cmp(&values[i]) {
                Some(std::cmp::Ordering::Greater) => concordant += 1,
                Some(std::cmp::Ordering::Less) => discordant += 1,
                _ => {}
            }
        }
    }
    (concordant - discordant) as f64 / (n * (n - 1) / 2) as f64
}
