//! Gaussian transition kernel: whitening, the erf-product mass function and
//! its extrema over convex domains.

use crate::geometry::{HyperRectangle, Parallelotope, Polytope, GEOM_TOL};
use crate::linalg::{is_symmetric, max_abs, sym_eigen, Mat};
use crate::special::{interval_log_slope, interval_mass, phi, tail};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("noise covariance is not symmetric positive semi-definite")]
    InvalidNoiseCovariance,
    #[error("step covariance G Cov_w G^T is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("gaussian factor underflowed; log-gradient unavailable")]
    UnderflowedFactor,
    #[error("gradient ascent did not converge after {iterations} iterations (best value {best_value})")]
    NonConvergence { iterations: usize, best_value: f64, best_point: Vec<f64> },
    #[error("unsupported domain: {0}")]
    Unsupported(String),
}

/// One mode of `x' = F x + G w`, `w ~ N(0, Cov_w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDynamics {
    pub drift: Mat,
    pub diffusion: Mat,
    pub noise_cov: Mat,
}

impl ModeDynamics {
    pub fn new(drift: Mat, diffusion: Mat, noise_cov: Mat) -> Result<Self, KernelError> {
        let m = drift.nrows();
        if drift.ncols() != m || diffusion.nrows() != m {
            return Err(KernelError::DimensionMismatch(format!(
                "F is {}x{}, G is {}x{}",
                drift.nrows(),
                drift.ncols(),
                diffusion.nrows(),
                diffusion.ncols()
            )));
        }
        let r = diffusion.ncols();
        if noise_cov.nrows() != r || noise_cov.ncols() != r {
            return Err(KernelError::DimensionMismatch(format!(
                "Cov_w is {}x{}, expected {r}x{r}",
                noise_cov.nrows(),
                noise_cov.ncols()
            )));
        }
        if !is_symmetric(&noise_cov, 1e-12) {
            return Err(KernelError::InvalidNoiseCovariance);
        }
        let (vals, _) = sym_eigen(&noise_cov);
        if vals.iter().any(|&v| v < -1e-12 * max_abs(&noise_cov).max(1.0)) {
            return Err(KernelError::InvalidNoiseCovariance);
        }
        Ok(Self { drift, diffusion, noise_cov })
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    /// Covariance of one step, `G Cov_w G^T`.
    pub fn step_covariance(&self) -> Mat {
        &self.diffusion * &self.noise_cov * self.diffusion.transpose()
    }
}

/// Change of coordinates that maps the step covariance to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Whitening {
    /// `T = Λ^{-1/2} Vᵀ`.
    pub transform: Mat,
    pub inverse: Mat,
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat,
}

impl Whitening {
    pub fn from_covariance(cov: &Mat) -> Result<Self, KernelError> {
        let (vals, vecs) = sym_eigen(cov);
        let top = vals.first().copied().unwrap_or(0.0);
        if !(top > 0.0) || vals.iter().any(|&v| !(v > 1e-14 * top)) {
            return Err(KernelError::NotPositiveDefinite);
        }
        let m = vals.len();
        let transform = Mat::from_fn(m, m, |i, j| vecs[(j, i)] / vals[i].sqrt());
        let inverse = Mat::from_fn(m, m, |i, j| vecs[(i, j)] * vals[j].sqrt());
        Ok(Self { transform, inverse, eigenvalues: vals, eigenvectors: vecs })
    }
}

pub fn whitening(dynamics: &ModeDynamics) -> Result<Whitening, KernelError> {
    Whitening::from_covariance(&dynamics.step_covariance())
}

/// Probability interval with `0 <= lo <= hi <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Probabilities below this are reported as zero.
pub const ROUND_TO_ZERO: f64 = 1e-15;

impl ProbInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        let r = |v: f64| if v < ROUND_TO_ZERO { 0.0 } else { v.min(1.0) };
        let (lo, hi) = (r(lo), r(hi));
        Self { lo: lo.min(hi), hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Mass of `N(y, I)` on `rect`.
pub fn erf_product(y: &[f64], rect: &HyperRectangle) -> f64 {
    let mut p = 1.0;
    for i in 0..y.len() {
        p *= interval_mass(y[i], rect.lower[i], rect.upper[i]);
        if p == 0.0 {
            break;
        }
    }
    p
}

/// Natural log of [`erf_product`] (`-inf` on underflow).
pub fn log_f(y: &[f64], rect: &HyperRectangle) -> f64 {
    (0..y.len()).map(|i| interval_mass(y[i], rect.lower[i], rect.upper[i]).ln()).sum()
}

/// Gradient of `ln f` with respect to `y`.
pub fn grad_log_f(y: &[f64], rect: &HyperRectangle) -> Result<Vec<f64>, KernelError> {
    (0..y.len())
        .map(|i| {
            interval_log_slope(y[i], rect.lower[i], rect.upper[i]).ok_or(KernelError::UnderflowedFactor)
        })
        .collect()
}

/// Convex domain over which the kernel is optimised.
#[derive(Debug, Clone, Copy)]
pub enum Domain<'a> {
    Polytope(&'a Polytope),
    Parallelotope(&'a Parallelotope),
}

impl Domain<'_> {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Polytope(p) => p.dim(),
            Domain::Parallelotope(p) => p.dim(),
        }
    }

    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match self {
            Domain::Polytope(p) => p.vertices().to_vec(),
            Domain::Parallelotope(p) => p.vertices(),
        }
    }

    fn contains(&self, x: &[f64]) -> Result<bool, KernelError> {
        let r = match self {
            Domain::Polytope(p) => p.contains_point(x, GEOM_TOL),
            Domain::Parallelotope(p) => p.contains_point(x, GEOM_TOL),
        };
        r.map_err(|e| KernelError::Unsupported(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extremum {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Algorithm used for the maximum of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaxMethod {
    /// Case analysis over stationary points of faces (dimension <= 3).
    Kkt,
    /// Projected gradient ascent on `ln f` (parallelotopes, any dimension).
    Gradient,
    /// `Kkt` up to dimension 2, `Gradient` above.
    #[default]
    Auto,
}

/// Minimum of `f` over the domain. `f` is quasi-concave, so the minimum is
/// attained at a vertex.
pub fn min_f(domain: Domain<'_>, rect: &HyperRectangle) -> Extremum {
    let mut best = Extremum { point: vec![], value: f64::INFINITY };
    for v in domain.vertices() {
        let val = erf_product(&v, rect);
        if val < best.value {
            best = Extremum { point: v, value: val };
        }
    }
    best
}

/// Maximum of `f` over the domain.
pub fn max_f(domain: Domain<'_>, rect: &HyperRectangle, method: MaxMethod) -> Result<Extremum, KernelError> {
    if let Domain::Parallelotope(p) = domain {
        if p.is_axis_aligned(1e-12) {
            // Separable: clamp the peak into the box.
            let bb = p.bbox();
            let c = rect.center();
            let point: Vec<f64> = (0..c.len()).map(|i| c[i].clamp(bb.lower[i], bb.upper[i])).collect();
            let value = erf_product(&point, rect);
            return Ok(Extremum { point, value });
        }
    }
    let method = match method {
        MaxMethod::Auto if domain.dim() <= 2 => MaxMethod::Kkt,
        MaxMethod::Auto => MaxMethod::Gradient,
        m => m,
    };
    match (method, domain) {
        (MaxMethod::Gradient, Domain::Parallelotope(p)) => match max_f_gradient(p, rect) {
            Ok(e) => Ok(e),
            Err(KernelError::UnderflowedFactor) => Ok(vertex_max(domain, rect)),
            Err(e) => Err(e),
        },
        (MaxMethod::Gradient, Domain::Polytope(p)) if p.dim() <= 2 => max_f_kkt(domain, rect),
        (MaxMethod::Gradient, Domain::Polytope(_)) => {
            Err(KernelError::Unsupported("gradient path needs a parallelotope".into()))
        }
        _ => max_f_kkt(domain, rect),
    }
}

fn vertex_max(domain: Domain<'_>, rect: &HyperRectangle) -> Extremum {
    let mut best = Extremum { point: vec![], value: -1.0 };
    for v in domain.vertices() {
        let val = erf_product(&v, rect);
        if val > best.value {
            best = Extremum { point: v, value: val };
        }
    }
    best
}

const GOLDEN_TOL: f64 = 1e-10;

/// Maximiser of a unimodal function on `[0, 1]`.
fn golden_max(g: impl Fn(f64) -> f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while b - a > GOLDEN_TOL {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    let t = 0.5 * (a + b);
    let gt = g(t);
    // Endpoints may beat the bracket midpoint by a hair.
    [(t, gt), (0.0, g(0.0)), (1.0, g(1.0))]
        .into_iter()
        .fold((t, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best })
}

fn lerp(p: &[f64], q: &[f64], t: f64) -> Vec<f64> {
    p.iter().zip(q).map(|(a, b)| a + t * (b - a)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximum over a segment. Skips the search when the directional
/// derivatives at both ends show the maximum sits at an endpoint.
fn segment_max(p: &[f64], q: &[f64], rect: &HyperRectangle) -> Extremum {
    let dir: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
    if let (Ok(gp), Ok(gq)) = (grad_log_f(p, rect), grad_log_f(q, rect)) {
        if dot(&gp, &dir) <= 0.0 || dot(&gq, &dir) >= 0.0 {
            let (vp, vq) = (erf_product(p, rect), erf_product(q, rect));
            return if vp >= vq {
                Extremum { point: p.to_vec(), value: vp }
            } else {
                Extremum { point: q.to_vec(), value: vq }
            };
        }
    }
    let (t, _) = golden_max(|t| log_f(&lerp(p, q, t), rect));
    let point = lerp(p, q, t);
    let value = erf_product(&point, rect);
    Extremum { point, value }
}

/// Maximum via stationary-point case analysis: the unconstrained peak if it
/// lies in the domain, otherwise the best of the vertices and the interior
/// optima of each face.
pub fn max_f_kkt(domain: Domain<'_>, rect: &HyperRectangle) -> Result<Extremum, KernelError> {
    let m = domain.dim();
    if m > 3 {
        return Err(KernelError::Unsupported(format!("case analysis in dimension {m}")));
    }
    let c = rect.center();
    if domain.contains(&c)? {
        let value = erf_product(&c, rect);
        return Ok(Extremum { point: c, value });
    }
    let mut best = vertex_max(domain, rect);
    let mut consider = |e: Extremum| {
        if e.value > best.value {
            best = e;
        }
    };
    match domain {
        Domain::Polytope(p) => match m {
            1 => {
                let v = p.vertices();
                if v.len() == 2 {
                    consider(segment_max(&v[0], &v[1], rect));
                }
            }
            2 => {
                let v = p.vertices();
                if v.len() >= 2 {
                    for i in 0..v.len() {
                        consider(segment_max(&v[i], &v[(i + 1) % v.len()], rect));
                    }
                }
            }
            _ => {
                return Err(KernelError::Unsupported(
                    "case analysis for general 3-D polytopes; use a parallelotope".into(),
                ))
            }
        },
        Domain::Parallelotope(p) => {
            for free in 1..=m.min(2) {
                if free == m && m > 1 {
                    continue;
                }
                for_each_face(m, free, |axes, fixed| {
                    let corner: Vec<f64> = fixed.to_vec();
                    if free == 1 {
                        let a = p.point(&corner);
                        let mut s = corner.clone();
                        s[axes[0]] = 1.0;
                        consider(segment_max(&a, &p.point(&s), rect));
                    } else {
                        consider(face_max(p, axes, &corner, rect));
                    }
                });
            }
        }
    }
    Ok(best)
}

/// Calls `f(free_axes, corner)` for every face with `free` free generator
/// directions; `corner` has the free coordinates set to zero.
fn for_each_face(m: usize, free: usize, mut f: impl FnMut(&[usize], &[f64])) {
    for mask in 0..1usize << m {
        if mask.count_ones() as usize != free {
            continue;
        }
        let axes: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let fixed_axes: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 0).collect();
        for bits in 0..1usize << fixed_axes.len() {
            let mut corner = vec![0.0; m];
            for (k, &ax) in fixed_axes.iter().enumerate() {
                corner[ax] = (bits >> k & 1) as f64;
            }
            f(&axes, &corner);
        }
    }
}

/// Nested golden-section over a 2-D face of a parallelotope.
fn face_max(p: &Parallelotope, axes: &[usize], corner: &[f64], rect: &HyperRectangle) -> Extremum {
    let eval = |s0: f64, s1: f64| {
        let mut s = corner.to_vec();
        s[axes[0]] = s0;
        s[axes[1]] = s1;
        log_f(&p.point(&s), rect)
    };
    let inner = |s0: f64| golden_max(|s1| eval(s0, s1));
    let (s0, _) = golden_max(|s0| inner(s0).1);
    let (s1, _) = inner(s0);
    let mut s = corner.to_vec();
    s[axes[0]] = s0;
    s[axes[1]] = s1;
    let point = p.point(&s);
    let value = erf_product(&point, rect);
    Extremum { point, value }
}

pub const GRADIENT_TOL: f64 = 1e-9;
pub const GRADIENT_MAX_ITER: usize = 1000;

/// Projected gradient ascent on `ln f` in the box coordinates of the
/// parallelotope.
pub fn max_f_gradient(p: &Parallelotope, rect: &HyperRectangle) -> Result<Extremum, KernelError> {
    let m = p.dim();
    let g = &p.generators;
    let h = |s: &[f64]| log_f(&p.point(s), rect);
    let grad = |s: &[f64]| -> Result<Vec<f64>, KernelError> {
        let gy = grad_log_f(&p.point(s), rect)?;
        Ok((0..m).map(|j| (0..m).map(|i| g[(i, j)] * gy[i]).sum()).collect())
    };
    let clamp = |s: Vec<f64>| -> Vec<f64> { s.into_iter().map(|v| v.clamp(0.0, 1.0)).collect() };

    let start = p
        .coordinates(&rect.center())
        .map(|s| clamp(s))
        .unwrap_or_else(|| vec![0.5; m]);
    let mut s = start;
    let mut hs = h(&s);
    let mut gs = grad(&s)?;
    let mut alpha = 1.0 / (1.0 + gs.iter().map(|x| x * x).sum::<f64>().sqrt());
    for it in 0..GRADIENT_MAX_ITER {
        // Stationarity: projected unit step vanishes.
        let pg: Vec<f64> = clamp(s.iter().zip(&gs).map(|(a, b)| a + b).collect())
            .iter()
            .zip(&s)
            .map(|(a, b)| a - b)
            .collect();
        if pg.iter().all(|v| v.abs() <= GRADIENT_TOL) {
            let point = p.point(&s);
            let value = erf_product(&point, rect);
            return Ok(Extremum { point, value });
        }
        let mut accepted = None;
        let mut a = alpha;
        while a > 1e-30 {
            let cand = clamp(s.iter().zip(&gs).map(|(x, d)| x + a * d).collect());
            let step: Vec<f64> = cand.iter().zip(&s).map(|(x, y)| x - y).collect();
            let hc = h(&cand);
            if hc >= hs + 1e-4 * dot(&gs, &step) && hc.is_finite() {
                accepted = Some((cand, hc, step));
                break;
            }
            a *= 0.5;
        }
        let Some((cand, hc, step)) = accepted else {
            // No ascent possible at machine precision: stationary.
            let point = p.point(&s);
            let value = erf_product(&point, rect);
            return Ok(Extremum { point, value });
        };
        let gc = grad(&cand)?;
        // Barzilai-Borwein estimate for the next trial step.
        let yk: Vec<f64> = gs.iter().zip(&gc).map(|(a, b)| a - b).collect();
        let sy = dot(&step, &yk);
        alpha = if sy > 0.0 { (dot(&step, &step) / sy).clamp(1e-12, 1e12) } else { a * 2.0 };
        let moved = step.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        s = cand;
        hs = hc;
        gs = gc;
        if moved <= 1e-15 && it > 0 {
            let point = p.point(&s);
            let value = erf_product(&point, rect);
            return Ok(Extremum { point, value });
        }
    }
    let point = p.point(&s);
    Err(KernelError::NonConvergence {
        iterations: GRADIENT_MAX_ITER,
        best_value: erf_product(&point, rect),
        best_point: point,
    })
}

/// Bounds on the one-step probability of landing in the whitened target
/// `rect` from any point of `source` under `dynamics`.
pub fn transition_bounds(
    source: &Parallelotope,
    dynamics: &ModeDynamics,
    whitening: &Whitening,
    rect: &HyperRectangle,
    method: MaxMethod,
) -> Result<ProbInterval, KernelError> {
    let domain = source.image(&(&whitening.transform * &dynamics.drift));
    bounds_on_domain(&domain, rect, method)
}

/// [`transition_bounds`] for a domain that is already in whitened
/// coordinates.
pub fn bounds_on_domain(
    domain: &Parallelotope,
    rect: &HyperRectangle,
    method: MaxMethod,
) -> Result<ProbInterval, KernelError> {
    bounds_with_fallback(domain, rect, method).map(|(b, _)| b)
}

/// Like [`bounds_on_domain`]; the flag reports whether gradient ascent failed
/// to converge and a fallback bound was used.
pub fn bounds_with_fallback(
    domain: &Parallelotope,
    rect: &HyperRectangle,
    method: MaxMethod,
) -> Result<(ProbInterval, bool), KernelError> {
    let lo = min_f(Domain::Parallelotope(domain), rect).value;
    let (hi, fallback) = match max_f(Domain::Parallelotope(domain), rect, method) {
        Ok(e) => (e.value, false),
        Err(KernelError::NonConvergence { best_value, .. }) => {
            // Case analysis when it applies; otherwise the trivial bound.
            match max_f_kkt(Domain::Parallelotope(domain), rect) {
                Ok(e) => (e.value.max(best_value), true),
                Err(_) => (1.0, true),
            }
        }
        Err(e) => return Err(e),
    };
    Ok((ProbInterval::new(lo, hi), fallback))
}

/// Cheap separable upper bound of `f` over a bounding box.
pub fn bbox_upper_bound(bbox: &HyperRectangle, rect: &HyperRectangle) -> f64 {
    let mut p = 1.0;
    for i in 0..bbox.dim() {
        let c = 0.5 * (rect.lower[i] + rect.upper[i]);
        let y = c.clamp(bbox.lower[i], bbox.upper[i]);
        p *= interval_mass(y, rect.lower[i], rect.upper[i]);
    }
    p
}

/// Bound on `|d²/du² P(N(y, I) ∈ A)|` along any unit direction `u`, valid
/// for every measurable `A`: `2 φ(1)`.
pub fn mass_curvature_bound() -> f64 {
    2.0 * phi(1.0)
}

/// How a sink interval was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinkMethod {
    /// The cells tile a rectangle, so the union mass is itself an
    /// erf product.
    ExactHull,
    /// Branch-and-bound over the box coordinates of the domain.
    BranchAndBound,
}

/// Target cells near one transition domain, in whitened coordinates.
pub struct SinkCover<'a> {
    pub cells: Vec<&'a HyperRectangle>,
    /// Whether each cell lies entirely inside the safe set.
    pub interior: Vec<bool>,
    /// Set when the cells tile this rectangle exactly and all are interior.
    pub hull: Option<&'a HyperRectangle>,
    /// Upper bound on the mass of all cells omitted from `cells`.
    pub omitted_mass: f64,
}

/// Absolute tolerance of the branch-and-bound sink bounds.
pub const SINK_TOL: f64 = 1e-4;
const SINK_MAX_BOXES: usize = 4000;

/// Bounds on the probability of leaving the safe set from any point of
/// `domain` (whitened).
pub fn sink_bounds(domain: &Parallelotope, cover: &SinkCover<'_>) -> (ProbInterval, SinkMethod) {
    if let Some(hull) = cover.hull {
        let umax = max_f(Domain::Parallelotope(domain), hull, MaxMethod::Auto)
            .map(|e| e.value)
            .unwrap_or(1.0);
        let umin = min_f(Domain::Parallelotope(domain), hull).value;
        return (ProbInterval::new(1.0 - umax, 1.0 - umin), SinkMethod::ExactHull);
    }
    let all_cells = UnionMass::new(&cover.cells);
    let inner_cells: Vec<&HyperRectangle> =
        cover.cells.iter().zip(&cover.interior).filter(|(_, &i)| i).map(|(c, _)| *c).collect();
    let inner_cells = UnionMass::new(&inner_cells);
    let all = |y: &[f64]| all_cells.eval(y);
    let inner = |y: &[f64]| inner_cells.eval(y);
    let umax = (branch_and_bound(domain, &all, true) + cover.omitted_mass).min(1.0);
    let umin = branch_and_bound(domain, &inner, false).max(0.0);
    (ProbInterval::new(1.0 - umax, 1.0 - umin), SinkMethod::BranchAndBound)
}

/// Total mass of a set of grid cells. Cells share their endpoints, so the
/// tails are evaluated once per distinct endpoint and axis; the sum is the
/// same as adding up [`erf_product`] over the cells.
struct UnionMass {
    /// Distinct endpoints per axis.
    ends: Vec<Vec<f64>>,
    /// Per cell and axis, indices of the lower and upper endpoint.
    idx: Vec<Vec<(u32, u32)>>,
}

impl UnionMass {
    fn new(cells: &[&HyperRectangle]) -> Self {
        let m = cells.first().map_or(0, |c| c.dim());
        let mut ends: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut e: Vec<f64> = cells.iter().flat_map(|c| [c.lower[i], c.upper[i]]).collect();
                e.sort_by(f64::total_cmp);
                e.dedup();
                e
            })
            .collect();
        let find = |e: &[f64], v: f64| e.binary_search_by(|x| x.total_cmp(&v)).unwrap() as u32;
        let idx = cells
            .iter()
            .map(|c| (0..m).map(|i| (find(&ends[i], c.lower[i]), find(&ends[i], c.upper[i]))).collect())
            .collect();
        ends.shrink_to_fit();
        Self { ends, idx }
    }

    fn eval(&self, y: &[f64]) -> f64 {
        // tail(e - y) and tail(y - e) for every endpoint e.
        let tails: Vec<Vec<(f64, f64)>> = self
            .ends
            .iter()
            .zip(y)
            .map(|(e, &yi)| e.iter().map(|&v| (tail(v - yi), tail(-(v - yi)))).collect())
            .collect();
        let mut total = 0.0;
        for cell in &self.idx {
            let mut p = 1.0;
            for (i, &(l, u)) in cell.iter().enumerate() {
                let (a, b) = (self.ends[i][l as usize] - y[i], self.ends[i][u as usize] - y[i]);
                let (ta, tna) = tails[i][l as usize];
                let (tb, tnb) = tails[i][u as usize];
                let v = if b <= a {
                    0.0
                } else if a >= 0.0 {
                    ta - tb
                } else if b <= 0.0 {
                    tnb - tna
                } else {
                    1.0 - tna - tb
                };
                p *= v.max(0.0);
                if p == 0.0 {
                    break;
                }
            }
            total += p;
        }
        total
    }
}

/// Bound on `|d²/du² g|` at points where `min(g, 1 - g) <= d`, for a set
/// mass `g`: the worst case puts the set (or its complement) in the normal
/// tails, `2 t φ(t)` with `d = 2 Q(t)`, which the Mills ratio bounds by
/// `d (1 + 2 ln(1/d))`.
fn tail_curvature_bound(d: f64) -> f64 {
    let global = mass_curvature_bound();
    if d <= 0.0 {
        return 0.0;
    }
    if d >= 2.0 * tail(1.0) {
        return global;
    }
    (d * (1.0 + 2.0 * (1.0 / d).ln())).min(global)
}

/// Slack to add to the best corner value of a box whose corner values of
/// the mass span `[a, b]` (either order), given the interpolation spread.
fn local_slack(a: f64, b: f64, spread: f64) -> f64 {
    let (lo, hi) = (a.min(b), a.max(b));
    let mut curv = mass_curvature_bound();
    for _ in 0..4 {
        let e = curv * spread;
        let (l, h) = ((lo - e).max(0.0), (hi + e).min(1.0));
        let d = if h <= 0.5 {
            h
        } else if l >= 0.5 {
            1.0 - l
        } else {
            0.5
        };
        let next = tail_curvature_bound(d);
        if next >= curv {
            break;
        }
        curv = next;
    }
    curv * spread
}

struct BbBox {
    key: f64,
    lower: Vec<f64>,
    width: Vec<f64>,
    values: Vec<f64>,
}

impl PartialEq for BbBox {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key
    }
}
impl Eq for BbBox {}
impl PartialOrd for BbBox {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for BbBox {
    fn cmp(&self, o: &Self) -> Ordering {
        // Max-heap on the optimistic bound.
        self.key.partial_cmp(&o.key).unwrap_or(Ordering::Equal)
    }
}

/// Sound bound on `max g` (or `min g`) over the parallelotope, where `g` is
/// a Gaussian set mass. Uses the curvature bound of
/// [`mass_curvature_bound`] on every sub-box.
pub fn branch_and_bound(p: &Parallelotope, g: &dyn Fn(&[f64]) -> f64, maximize: bool) -> f64 {
    let m = p.dim();
    let sign = if maximize { 1.0 } else { -1.0 };
    let gen_norm: Vec<f64> = (0..m).map(|j| p.generators.column(j).norm()).collect();
    // Interpolation error of the corner values per unit of curvature.
    let spread = |w: &[f64]| (0..m).map(|i| (gen_norm[i] * w[i]).powi(2) / 8.0).sum::<f64>();
    // Corner values; `known` supplies corners shared with the parent box.
    let corners = |lower: &[f64], width: &[f64], known: &dyn Fn(usize) -> Option<f64>| -> Vec<f64> {
        (0..1usize << m)
            .map(|k| {
                known(k).unwrap_or_else(|| {
                    let s: Vec<f64> = (0..m)
                        .map(|i| lower[i] + if k >> i & 1 == 1 { width[i] } else { 0.0 })
                        .collect();
                    sign * g(&p.point(&s))
                })
            })
            .collect()
    };
    let make = |lower: Vec<f64>, width: Vec<f64>, values: Vec<f64>| {
        let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let bottom = values.iter().copied().fold(f64::INFINITY, f64::min);
        let slack = local_slack(sign * top, sign * bottom, spread(&width));
        BbBox { key: top + slack, lower, width, values }
    };
    let lower = vec![0.0; m];
    let width = vec![1.0; m];
    let values = corners(&lower, &width, &|_| None);
    let mut best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut heap = BinaryHeap::new();
    heap.push(make(lower, width, values));
    let mut processed = 0;
    while let Some(b) = heap.pop() {
        if b.key - best <= SINK_TOL || processed >= SINK_MAX_BOXES {
            return sign * b.key;
        }
        processed += 1;
        let axis = (0..m)
            .max_by(|&i, &j| (gen_norm[i] * b.width[i]).partial_cmp(&(gen_norm[j] * b.width[j])).unwrap())
            .unwrap();
        let mut w = b.width.clone();
        w[axis] *= 0.5;
        for half in 0..2usize {
            let mut lo = b.lower.clone();
            lo[axis] += half as f64 * w[axis];
            let vals = corners(&lo, &w, &|k| (k >> axis & 1 == half).then(|| b.values[k]));
            best = best.max(vals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            heap.push(make(lo, w.clone(), vals));
        }
    }
    sign * best
}
