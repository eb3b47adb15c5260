//! Convex sets used by the abstraction: axis-aligned rectangles,
//! parallelotopes and general polytopes, plus regular grids.

use crate::linalg::{inverse, mat_vec, Mat};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use thiserror::Error;

/// Tolerance for membership and containment tests.
pub const GEOM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty domain")]
    EmptyDomain,
    #[error("grid step must be positive and finite")]
    InvalidStep,
    #[error("polytope has no half-space representation in dimension {0}")]
    MissingHalfspaces(usize),
    #[error("linear program failed: {0}")]
    Solver(String),
}

fn check_dim(expected: usize, got: usize) -> Result<(), GeometryError> {
    if expected == got {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, got })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperRectangle {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl HyperRectangle {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(GeometryError::EmptyDomain);
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(GeometryError::EmptyDomain);
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn contains_point(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    pub fn contains_rect(&self, other: &HyperRectangle, tol: f64) -> bool {
        (0..self.dim()).all(|i| {
            other.lower[i] >= self.lower[i] - tol && other.upper[i] <= self.upper[i] + tol
        })
    }

    /// Closed intersection test (shared faces count).
    pub fn intersects_rect(&self, other: &HyperRectangle, tol: f64) -> bool {
        (0..self.dim()).all(|i| {
            other.lower[i] <= self.upper[i] + tol && other.upper[i] >= self.lower[i] - tol
        })
    }

    /// Vertices in binary order: bit `i` of the index selects the upper
    /// bound on axis `i`.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        (0..1usize << m)
            .map(|k| {
                (0..m)
                    .map(|i| if k >> i & 1 == 1 { self.upper[i] } else { self.lower[i] })
                    .collect()
            })
            .collect()
    }

    pub fn to_parallelotope(&self) -> Parallelotope {
        Parallelotope {
            base: self.lower.clone(),
            generators: Mat::from_diagonal(&nalgebra::DVector::from_vec(self.widths())),
        }
    }

    pub fn to_polytope(&self) -> Polytope {
        let m = self.dim();
        let mut normals = Mat::zeros(2 * m, m);
        let mut offsets = Vec::with_capacity(2 * m);
        for i in 0..m {
            normals[(2 * i, i)] = 1.0;
            offsets.push(self.upper[i]);
            normals[(2 * i + 1, i)] = -1.0;
            offsets.push(-self.lower[i]);
        }
        Polytope {
            dim: m,
            vertices: dedup_points(self.vertices()),
            halfspaces: Some(Halfspaces { normals, offsets }),
        }
    }

    /// Smallest rectangle containing all `points`.
    pub fn bounding(points: &[Vec<f64>]) -> Result<Self, GeometryError> {
        let first = points.first().ok_or(GeometryError::EmptyDomain)?;
        let mut lower = first.clone();
        let mut upper = first.clone();
        for p in points {
            check_dim(lower.len(), p.len())?;
            for i in 0..p.len() {
                lower[i] = lower[i].min(p[i]);
                upper[i] = upper[i].max(p[i]);
            }
        }
        Self::new(lower, upper)
    }
}

/// `{x : normals * x <= offsets}` with unit-norm rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspaces {
    pub normals: Mat,
    pub offsets: Vec<f64>,
}

impl Halfspaces {
    /// Builds the system and normalises each row.
    pub fn new(mut normals: Mat, mut offsets: Vec<f64>) -> Result<Self, GeometryError> {
        check_dim(normals.nrows(), offsets.len())?;
        for r in 0..normals.nrows() {
            let n = normals.row(r).norm();
            if n == 0.0 || !n.is_finite() {
                return Err(GeometryError::EmptyDomain);
            }
            for c in 0..normals.ncols() {
                normals[(r, c)] /= n;
            }
            offsets[r] /= n;
        }
        Ok(Self { normals, offsets })
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Largest constraint violation at `x` (non-positive when inside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        (0..self.len())
            .map(|r| {
                let d: f64 = (0..self.dim()).map(|c| self.normals[(r, c)] * x[c]).sum();
                d - self.offsets[r]
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol
    }
}

/// Bounded convex polytope kept as a vertex list, with a half-space
/// representation when one is available.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    halfspaces: Option<Halfspaces>,
}

impl Polytope {
    /// Convex hull of `points`. For dimension up to 3 the half-space form is
    /// computed; above that only the vertices are kept.
    pub fn from_points(dim: usize, points: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyDomain);
        }
        for p in &points {
            check_dim(dim, p.len())?;
        }
        let points = dedup_points(points);
        let (vertices, halfspaces) = match dim {
            1 => hull_1d(&points),
            2 => hull_2d(&points),
            3 => (points.clone(), hull_3d(&points)),
            _ => (points, None),
        };
        Ok(Self { dim, vertices, halfspaces })
    }

    /// Polytope from a bounded half-space system; vertices are enumerated.
    pub fn from_halfspaces(h: Halfspaces) -> Result<Self, GeometryError> {
        let dim = h.dim();
        let vertices = enumerate_vertices(&h);
        if vertices.is_empty() {
            return Err(GeometryError::EmptyDomain);
        }
        Ok(Self { dim, vertices, halfspaces: Some(h) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn halfspaces(&self) -> Option<&Halfspaces> {
        self.halfspaces.as_ref()
    }

    pub fn bbox(&self) -> HyperRectangle {
        HyperRectangle::bounding(&self.vertices).expect("polytope has vertices")
    }

    pub fn contains_point(&self, x: &[f64], tol: f64) -> Result<bool, GeometryError> {
        match &self.halfspaces {
            Some(h) => Ok(h.contains(x, tol)),
            None => {
                let pt = Polytope { dim: self.dim, vertices: vec![x.to_vec()], halfspaces: None };
                intersects(self, &pt)
            }
        }
    }

    pub fn centroid(&self) -> Vec<f64> {
        let n = self.vertices.len() as f64;
        (0..self.dim).map(|i| self.vertices.iter().map(|v| v[i]).sum::<f64>() / n).collect()
    }
}

/// `{base + G s : s in [0,1]^m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parallelotope {
    pub base: Vec<f64>,
    pub generators: Mat,
}

impl Parallelotope {
    pub fn new(base: Vec<f64>, generators: Mat) -> Result<Self, GeometryError> {
        check_dim(base.len(), generators.nrows())?;
        check_dim(base.len(), generators.ncols())?;
        Ok(Self { base, generators })
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// Point with box coordinates `s`.
    pub fn point(&self, s: &[f64]) -> Vec<f64> {
        let g = mat_vec(&self.generators, s);
        self.base.iter().zip(g).map(|(b, d)| b + d).collect()
    }

    /// Vertices in binary order over the generators.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        (0..1usize << m)
            .map(|k| {
                let s: Vec<f64> = (0..m).map(|i| (k >> i & 1) as f64).collect();
                self.point(&s)
            })
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.point(&vec![0.5; self.dim()])
    }

    pub fn volume(&self) -> f64 {
        self.generators.determinant().abs()
    }

    /// Image under the linear map `m`.
    pub fn image(&self, m: &Mat) -> Parallelotope {
        Parallelotope { base: mat_vec(m, &self.base), generators: m * &self.generators }
    }

    pub fn bbox(&self) -> HyperRectangle {
        let m = self.dim();
        let mut lower = self.base.clone();
        let mut upper = self.base.clone();
        for i in 0..m {
            for j in 0..m {
                let g = self.generators[(i, j)];
                if g < 0.0 {
                    lower[i] += g;
                } else {
                    upper[i] += g;
                }
            }
        }
        HyperRectangle { lower, upper }
    }

    /// Box coordinates of `x`, if the generators are invertible.
    pub fn coordinates(&self, x: &[f64]) -> Option<Vec<f64>> {
        let inv = inverse(&self.generators)?;
        let d: Vec<f64> = x.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        Some(mat_vec(&inv, &d))
    }

    pub fn contains_point(&self, x: &[f64], tol: f64) -> Result<bool, GeometryError> {
        match self.coordinates(x) {
            Some(s) => Ok(s.iter().all(|&v| v >= -tol && v <= 1.0 + tol)),
            None => self.to_polytope().contains_point(x, tol),
        }
    }

    /// True when every generator is parallel to a coordinate axis and the
    /// generators cover distinct axes.
    pub fn is_axis_aligned(&self, tol: f64) -> bool {
        let m = self.dim();
        let scale = crate::linalg::max_abs(&self.generators).max(f64::MIN_POSITIVE);
        let mut used = vec![false; m];
        for j in 0..m {
            let nz: Vec<usize> =
                (0..m).filter(|&i| self.generators[(i, j)].abs() > tol * scale).collect();
            match nz.as_slice() {
                [i] if !used[*i] => used[*i] = true,
                [] => {}
                _ => return false,
            }
        }
        true
    }

    pub fn to_polytope(&self) -> Polytope {
        let m = self.dim();
        let vertices = dedup_points(self.vertices());
        let halfspaces = inverse(&self.generators).and_then(|inv| {
            // 0 <= inv (x - base) <= 1
            let mut normals = Mat::zeros(2 * m, m);
            let mut offsets = Vec::with_capacity(2 * m);
            let ib = mat_vec(&inv, &self.base);
            for r in 0..m {
                for c in 0..m {
                    normals[(2 * r, c)] = inv[(r, c)];
                    normals[(2 * r + 1, c)] = -inv[(r, c)];
                }
                offsets.push(1.0 + ib[r]);
                offsets.push(-ib[r]);
            }
            Halfspaces::new(normals, offsets).ok()
        });
        Polytope { dim: m, vertices, halfspaces }
    }
}

fn dedup_points(points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for p in points {
        let scale = p.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        if !out.iter().any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() <= 1e-12 * scale)) {
            out.push(p);
        }
    }
    out
}

fn hull_1d(points: &[Vec<f64>]) -> (Vec<Vec<f64>>, Option<Halfspaces>) {
    let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let h = Halfspaces::new(Mat::from_row_slice(2, 1, &[1.0, -1.0]), vec![hi, -lo]).ok();
    let verts = if hi > lo { vec![vec![lo], vec![hi]] } else { vec![vec![lo]] };
    (verts, h)
}

fn cross(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; returns the hull in counter-clockwise order
/// without collinear points.
fn hull_2d(points: &[Vec<f64>]) -> (Vec<Vec<f64>>, Option<Halfspaces>) {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    if pts.len() < 3 {
        return (pts, None);
    }
    let scale = pts.iter().flatten().fold(1.0f64, |a, x| a.max(x.abs()));
    let eps = 1e-12 * scale * scale;
    let mut lower: Vec<Vec<f64>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= eps {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Vec<f64>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= eps {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    let hull = lower;
    if hull.len() < 3 {
        return (hull, None);
    }
    let k = hull.len();
    let mut normals = Mat::zeros(k, 2);
    let mut offsets = Vec::with_capacity(k);
    for i in 0..k {
        let p = &hull[i];
        let q = &hull[(i + 1) % k];
        let n = [q[1] - p[1], -(q[0] - p[0])];
        normals[(i, 0)] = n[0];
        normals[(i, 1)] = n[1];
        offsets.push(n[0] * p[0] + n[1] * p[1]);
    }
    (hull, Halfspaces::new(normals, offsets).ok())
}

/// Facets of a 3-D point set by brute force over point triples. Returns
/// `None` for flat point sets.
fn hull_3d(points: &[Vec<f64>]) -> Option<Halfspaces> {
    let n = points.len();
    if n < 4 {
        return None;
    }
    let scale = points.iter().flatten().fold(1.0f64, |a, x| a.max(x.abs()));
    let tol = 1e-10 * scale;
    let mut facets: Vec<([f64; 3], f64)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (&points[i], &points[j], &points[k]);
                let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                let mut nrm = [
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ];
                let len = (nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]).sqrt();
                if len <= 1e-12 * scale * scale {
                    continue;
                }
                nrm.iter_mut().for_each(|x| *x /= len);
                let off = nrm[0] * a[0] + nrm[1] * a[1] + nrm[2] * a[2];
                let sides: Vec<f64> = points
                    .iter()
                    .map(|p| nrm[0] * p[0] + nrm[1] * p[1] + nrm[2] * p[2] - off)
                    .collect();
                let (nrm, off) = if sides.iter().all(|&s| s <= tol) {
                    (nrm, off)
                } else if sides.iter().all(|&s| s >= -tol) {
                    ([-nrm[0], -nrm[1], -nrm[2]], -off)
                } else {
                    continue;
                };
                if !facets.iter().any(|(f, o)| {
                    (f[0] - nrm[0]).abs() < 1e-9
                        && (f[1] - nrm[1]).abs() < 1e-9
                        && (f[2] - nrm[2]).abs() < 1e-9
                        && (o - off).abs() < 1e-9 * scale
                }) {
                    facets.push((nrm, off));
                }
            }
        }
    }
    // A flat set yields only an opposite pair of planes.
    if facets.len() < 4 {
        return None;
    }
    let mut normals = Mat::zeros(facets.len(), 3);
    let mut offsets = Vec::with_capacity(facets.len());
    for (r, (f, o)) in facets.iter().enumerate() {
        for c in 0..3 {
            normals[(r, c)] = f[c];
        }
        offsets.push(*o);
    }
    Halfspaces::new(normals, offsets).ok()
}

fn enumerate_vertices(h: &Halfspaces) -> Vec<Vec<f64>> {
    let m = h.dim();
    let k = h.len();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..m).collect();
    if k < m {
        return out;
    }
    loop {
        let a = Mat::from_fn(m, m, |r, c| h.normals[(idx[r], c)]);
        let b = nalgebra::DVector::from_iterator(m, idx.iter().map(|&r| h.offsets[r]));
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            let scale = x.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            if x.iter().all(|v| v.is_finite()) && h.violation(&x) <= 1e-9 * scale {
                out.push(x);
            }
        }
        // next combination
        let mut i = m;
        loop {
            if i == 0 {
                return dedup_points(out);
            }
            i -= 1;
            if idx[i] < k - m + i {
                idx[i] += 1;
                for j in i + 1..m {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Image of a polytope under a linear map.
pub fn post_image(p: &Polytope, m: &Mat) -> Result<Polytope, GeometryError> {
    check_dim(p.dim(), m.ncols())?;
    let verts: Vec<Vec<f64>> = p.vertices().iter().map(|v| mat_vec(m, v)).collect();
    if m.nrows() == m.ncols() {
        if let (Some(h), Some(inv)) = (p.halfspaces(), inverse(m)) {
            // a.x <= b on x = M^-1 y  <=>  (a M^-1).y <= b
            let normals = &h.normals * inv;
            let halfspaces = Halfspaces::new(normals, h.offsets.clone())?;
            return Ok(Polytope { dim: m.nrows(), vertices: verts, halfspaces: Some(halfspaces) });
        }
    }
    Polytope::from_points(m.nrows(), verts)
}

/// Minkowski sum. Exact in dimension 1 and 2; above that the bounding box of
/// the sum is returned, which over-approximates.
pub fn minkowski_sum(a: &Polytope, b: &Polytope) -> Result<Polytope, GeometryError> {
    check_dim(a.dim(), b.dim())?;
    let m = a.dim();
    if m <= 2 {
        let mut pts = Vec::with_capacity(a.vertices().len() * b.vertices().len());
        for u in a.vertices() {
            for v in b.vertices() {
                pts.push(u.iter().zip(v).map(|(x, y)| x + y).collect());
            }
        }
        return Polytope::from_points(m, pts);
    }
    let (ba, bb) = (a.bbox(), b.bbox());
    let lower = ba.lower.iter().zip(&bb.lower).map(|(x, y)| x + y).collect();
    let upper = ba.upper.iter().zip(&bb.upper).map(|(x, y)| x + y).collect();
    Ok(HyperRectangle::new(lower, upper)?.to_polytope())
}

/// `inner ⊆ outer`, decided on the vertices of `inner`.
pub fn contains(outer: &Polytope, inner: &Polytope) -> Result<bool, GeometryError> {
    check_dim(outer.dim(), inner.dim())?;
    let h = outer.halfspaces().ok_or(GeometryError::MissingHalfspaces(outer.dim()))?;
    Ok(inner.vertices().iter().all(|v| {
        let scale = v.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        h.contains(v, GEOM_TOL * scale)
    }))
}

/// Closed intersection test (boundary contact counts), decided exactly by an
/// LP feasibility problem over convex combinations of both vertex sets.
pub fn intersects(a: &Polytope, b: &Polytope) -> Result<bool, GeometryError> {
    check_dim(a.dim(), b.dim())?;
    if !a.bbox().intersects_rect(&b.bbox(), GEOM_TOL) {
        return Ok(false);
    }
    if let Some(h) = a.halfspaces() {
        if b.vertices().iter().any(|v| h.contains(v, GEOM_TOL)) {
            return Ok(true);
        }
    }
    if let Some(h) = b.halfspaces() {
        if a.vertices().iter().any(|v| h.contains(v, GEOM_TOL)) {
            return Ok(true);
        }
    }
    let m = a.dim();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let la: Vec<_> = a.vertices().iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let lb: Vec<_> = b.vertices().iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    let ones_a: Vec<_> = la.iter().map(|&v| (v, 1.0)).collect();
    lp.add_constraint(ones_a.as_slice(), ComparisonOp::Eq, 1.0);
    let ones_b: Vec<_> = lb.iter().map(|&v| (v, 1.0)).collect();
    lp.add_constraint(ones_b.as_slice(), ComparisonOp::Eq, 1.0);
    for i in 0..m {
        let mut row: Vec<_> = la.iter().zip(a.vertices()).map(|(&v, p)| (v, p[i])).collect();
        row.extend(lb.iter().zip(b.vertices()).map(|(&v, p)| (v, -p[i])));
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, 0.0);
    }
    match lp.solve() {
        Ok(_) => Ok(true),
        Err(minilp::Error::Infeasible) => Ok(false),
        Err(e) => Err(GeometryError::Solver(e.to_string())),
    }
}

/// Radius of the largest ball inside `a ∩ b` (negative when the sets are
/// disjoint). Both polytopes need half-space forms.
pub fn overlap_depth(a: &Polytope, b: &Polytope) -> Result<f64, GeometryError> {
    check_dim(a.dim(), b.dim())?;
    let ha = a.halfspaces().ok_or(GeometryError::MissingHalfspaces(a.dim()))?;
    let hb = b.halfspaces().ok_or(GeometryError::MissingHalfspaces(b.dim()))?;
    let m = a.dim();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let xs: Vec<_> = (0..m).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    for h in [ha, hb] {
        for r in 0..h.len() {
            let mut row: Vec<_> = xs.iter().enumerate().map(|(c, &v)| (v, h.normals[(r, c)])).collect();
            row.push((t, 1.0));
            lp.add_constraint(row.as_slice(), ComparisonOp::Le, h.offsets[r]);
        }
    }
    match lp.solve() {
        Ok(sol) => Ok(sol.objective()),
        Err(e) => Err(GeometryError::Solver(e.to_string())),
    }
}

/// Regular grid of axis-aligned cells anchored at `origin`. Cell indices are
/// row-major with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub origin: Vec<f64>,
    pub step: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Grid {
    /// Covers `domain` with cells of side `steps`; the count per axis is
    /// `ceil(extent / step)`, so the last cell may stick out of the domain.
    pub fn covering(domain: &HyperRectangle, steps: &[f64]) -> Result<Self, GeometryError> {
        check_dim(domain.dim(), steps.len())?;
        if steps.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(GeometryError::InvalidStep);
        }
        let widths = domain.widths();
        if widths.iter().any(|w| *w <= 0.0) {
            return Err(GeometryError::EmptyDomain);
        }
        let counts = widths
            .iter()
            .zip(steps)
            .map(|(w, s)| ((w / s) - 1e-9).ceil().max(1.0) as usize)
            .collect();
        Ok(Self { origin: domain.lower.clone(), step: steps.to_vec(), counts })
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            idx[i] = k % self.counts[i];
            k /= self.counts[i];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (i, c)| acc * c + i)
    }

    pub fn cell(&self, k: usize) -> HyperRectangle {
        let idx = self.multi_index(k);
        let lower: Vec<f64> =
            (0..self.dim()).map(|i| self.origin[i] + idx[i] as f64 * self.step[i]).collect();
        let upper = (0..self.dim()).map(|i| lower[i] + self.step[i]).collect();
        HyperRectangle { lower, upper }
    }

    pub fn cells(&self) -> Vec<HyperRectangle> {
        (0..self.len()).map(|k| self.cell(k)).collect()
    }

    /// Per-axis index of the cell holding coordinate `x` on axis `i`.
    /// Points on a shared face go to the lower-indexed cell.
    pub fn axis_index(&self, i: usize, x: f64) -> Option<usize> {
        let t = (x - self.origin[i]) / self.step[i];
        let n = self.counts[i] as f64;
        if !(t >= -1e-12) || t > n + 1e-12 {
            return None;
        }
        let k = (t.ceil() - 1.0).max(0.0);
        Some((k as usize).min(self.counts[i] - 1))
    }

    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut idx = Vec::with_capacity(self.dim());
        for (i, &v) in x.iter().enumerate() {
            idx.push(self.axis_index(i, v)?);
        }
        Some(self.flat_index(&idx))
    }

    /// Inclusive per-axis index ranges of cells meeting `rect`, or `None`
    /// if it misses the grid.
    pub fn index_range(&self, rect: &HyperRectangle) -> Option<Vec<(usize, usize)>> {
        (0..self.dim())
            .map(|i| {
                let lo = ((rect.lower[i] - self.origin[i]) / self.step[i]).floor();
                let hi = ((rect.upper[i] - self.origin[i]) / self.step[i]).ceil() - 1.0;
                let n = self.counts[i] as f64;
                if hi < 0.0 || lo > n - 1.0 {
                    None
                } else {
                    Some((lo.max(0.0) as usize, hi.min(n - 1.0) as usize))
                }
            })
            .collect()
    }
}

/// Cells of a regular grid covering `domain`.
pub fn uniform_grid(domain: &HyperRectangle, steps: &[f64]) -> Result<Vec<HyperRectangle>, GeometryError> {
    Ok(Grid::covering(domain, steps)?.cells())
}
