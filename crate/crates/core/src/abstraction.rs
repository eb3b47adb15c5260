//! Discretisation of a switched system into per-mode grids and construction
//! of the interval MDP.

use crate::exec::{map_indexed, Parallelism};
use crate::geometry::{
    contains, overlap_depth, Grid, GeometryError, HyperRectangle, Parallelotope, Polytope, GEOM_TOL,
};
use crate::kernel::{
    bbox_upper_bound, bounds_with_fallback, sink_bounds, whitening, KernelError, MaxMethod, ModeDynamics,
    ProbInterval, SinkCover, SinkMethod, Whitening,
};
use crate::linalg::mat_vec;
use crate::special::tail;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbstractionError {
    #[error("model has no modes")]
    NoModes,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid label {0:?}")]
    InvalidLabel(String),
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("region {0:?} is not contained in the safe set")]
    RegionOutsideSafeSet(String),
    #[error("too many regions: {0} (at most 32)")]
    TooManyRegions(usize),
    #[error("invalid discretisation: {0}")]
    InvalidDiscretization(String),
    #[error("row ({state}, {action}) is infeasible: sum lo = {sum_lo}, sum hi = {sum_hi}")]
    InfeasibleRow { state: usize, action: usize, sum_lo: f64, sum_hi: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub name: String,
    pub dynamics: ModeDynamics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub label: String,
    pub polytope: Polytope,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridSystem {
    pub modes: Vec<Mode>,
    pub safe_set: HyperRectangle,
    pub regions: Vec<Region>,
}

fn check_label(label: &str) -> Result<(), AbstractionError> {
    let ok = !label.is_empty()
        && label.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ok {
        Ok(())
    } else {
        Err(AbstractionError::InvalidLabel(label.to_string()))
    }
}

impl HybridSystem {
    pub fn new(modes: Vec<Mode>, safe_set: HyperRectangle, regions: Vec<Region>) -> Result<Self, AbstractionError> {
        if modes.is_empty() {
            return Err(AbstractionError::NoModes);
        }
        let m = safe_set.dim();
        let mut names = std::collections::HashSet::new();
        for mode in &modes {
            check_label(&mode.name)?;
            if !names.insert(mode.name.clone()) {
                return Err(AbstractionError::DuplicateLabel(mode.name.clone()));
            }
            if mode.dynamics.dim() != m {
                return Err(AbstractionError::DimensionMismatch(format!(
                    "mode {} has dimension {}, safe set has {m}",
                    mode.name,
                    mode.dynamics.dim()
                )));
            }
        }
        if regions.len() > 32 {
            return Err(AbstractionError::TooManyRegions(regions.len()));
        }
        let safe = safe_set.to_polytope();
        let mut labels = std::collections::HashSet::new();
        for r in &regions {
            check_label(&r.label)?;
            if !labels.insert(r.label.clone()) {
                return Err(AbstractionError::DuplicateLabel(r.label.clone()));
            }
            if r.polytope.dim() != m {
                return Err(AbstractionError::DimensionMismatch(format!(
                    "region {} has dimension {}",
                    r.label,
                    r.polytope.dim()
                )));
            }
            if r.polytope.halfspaces().is_none() {
                return Err(AbstractionError::Geometry(GeometryError::MissingHalfspaces(m)));
            }
            if !contains(&safe, &r.polytope)? {
                return Err(AbstractionError::RegionOutsideSafeSet(r.label.clone()));
            }
        }
        Ok(Self { modes, safe_set, regions })
    }

    pub fn dim(&self) -> usize {
        self.safe_set.dim()
    }

    /// Atomic propositions: each region label followed by the complements
    /// `~label` in the same order.
    pub fn atoms(&self) -> Vec<String> {
        let mut a: Vec<String> = self.regions.iter().map(|r| r.label.clone()).collect();
        a.extend(self.regions.iter().map(|r| format!("~{}", r.label)));
        a
    }
}

/// Grid resolution, in original-space units.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizationSpec {
    /// Side of a cell (the coarsest side in adaptive mode).
    pub dx: f64,
    pub adaptive: Option<AdaptiveSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveSpec {
    /// Refinement stops once every side is at most this long.
    pub dx_min: f64,
    /// Refine cells that cut a region boundary, not only the safe-set
    /// boundary.
    pub refine_regions: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// The cell in the whitened frame of its mode.
    pub whitened: HyperRectangle,
    /// The cell in original coordinates.
    pub original: Parallelotope,
    /// Whether the cell sticks out of the safe set.
    pub boundary: bool,
    /// Index of the base-grid cell it was refined from.
    pub base: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeGrid {
    pub whitening: Whitening,
    pub grid: Grid,
    pub cells: Vec<Cell>,
    /// Cell indices per base-grid cell.
    pub by_base: Vec<Vec<u32>>,
    /// Set when the cells tile this whitened rectangle and none is a
    /// boundary cell.
    pub exact_hull: Option<HyperRectangle>,
}

impl ModeGrid {
    /// Cell containing original-space point `x`; ties go to the lowest index.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let y = mat_vec(&self.whitening.transform, x);
        let base = self.grid.locate(&y)?;
        self.by_base[base]
            .iter()
            .map(|&c| c as usize)
            .find(|&c| self.cells[c].whitened.contains_point(&y, 1e-12))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub modes: Vec<ModeGrid>,
}

impl Discretization {
    pub fn total_cells(&self) -> usize {
        self.modes.iter().map(|m| m.cells.len()).sum()
    }
}

fn cell_membership(cell: &Parallelotope, safe: &HyperRectangle, safe_poly: &Polytope) -> Result<Option<bool>, GeometryError> {
    let verts = cell.vertices();
    if verts.iter().all(|v| safe.contains_point(v, GEOM_TOL)) {
        return Ok(Some(false));
    }
    if !cell.bbox().intersects_rect(safe, 0.0) {
        return Ok(None);
    }
    if verts.iter().any(|v| safe.contains_point(v, -GEOM_TOL)) {
        return Ok(Some(true));
    }
    let depth = overlap_depth(safe_poly, &cell.to_polytope())?;
    Ok(if depth > GEOM_TOL { Some(true) } else { None })
}

fn straddles_region(cell: &Parallelotope, regions: &[Region]) -> Result<bool, GeometryError> {
    let poly = cell.to_polytope();
    for r in regions {
        if !cell.bbox().intersects_rect(&r.polytope.bbox(), 0.0) {
            continue;
        }
        if overlap_depth(&r.polytope, &poly)? > GEOM_TOL && !contains(&r.polytope, &poly)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Partitions the safe set once per mode, on a grid aligned with that mode's
/// whitened frame.
///
/// The whitened step on axis `i` is `dx / sqrt(λ_i)`, so every cell maps back
/// to a square of side `dx` in original coordinates (rotated into the
/// mode's eigenbasis). Cells that miss the safe set are discarded; cells that
/// stick out of it are kept and flagged as boundary cells.
pub fn discretize(h: &HybridSystem, spec: &DiscretizationSpec) -> Result<Discretization, AbstractionError> {
    if !(spec.dx > 0.0) || !spec.dx.is_finite() {
        return Err(AbstractionError::InvalidDiscretization(format!("dx = {}", spec.dx)));
    }
    if let Some(a) = &spec.adaptive {
        if !(a.dx_min > 0.0) || a.dx_min > spec.dx {
            return Err(AbstractionError::InvalidDiscretization(format!(
                "need 0 < dx_min <= dx, got dx_min = {}",
                a.dx_min
            )));
        }
    }
    let safe_poly = h.safe_set.to_polytope();
    let mut out = Vec::with_capacity(h.modes.len());
    for mode in &h.modes {
        let w = whitening(&mode.dynamics)?;
        let m = h.dim();
        let wx: Vec<Vec<f64>> = h.safe_set.vertices().iter().map(|v| mat_vec(&w.transform, v)).collect();
        let domain = HyperRectangle::bounding(&wx)?;
        let steps: Vec<f64> = w.eigenvalues.iter().map(|l| spec.dx / l.sqrt()).collect();
        let grid = Grid::covering(&domain, &steps)?;
        let mut cells = Vec::new();
        let mut by_base = vec![Vec::new(); grid.len()];
        let mut pending: Vec<(HyperRectangle, usize)> = (0..grid.len()).map(|k| (grid.cell(k), k)).collect();
        while let Some((rect, base)) = pending.pop() {
            let original = rect.to_parallelotope().image(&w.inverse);
            let Some(boundary) = cell_membership(&original, &h.safe_set, &safe_poly)? else {
                continue;
            };
            if let Some(a) = &spec.adaptive {
                let side = (0..m)
                    .map(|i| rect.widths()[i] * w.eigenvalues[i].sqrt())
                    .fold(0.0f64, f64::max);
                let refine = boundary || (a.refine_regions && straddles_region(&original, &h.regions)?);
                if refine && side > a.dx_min * (1.0 + 1e-9) {
                    let c = rect.center();
                    for k in 0..1usize << m {
                        let lower = (0..m).map(|i| if k >> i & 1 == 1 { c[i] } else { rect.lower[i] }).collect();
                        let upper = (0..m).map(|i| if k >> i & 1 == 1 { rect.upper[i] } else { c[i] }).collect();
                        pending.push((HyperRectangle { lower, upper }, base));
                    }
                    continue;
                }
            }
            cells.push(Cell { whitened: rect, original, boundary, base });
        }
        // Deterministic order: by base index, then by lower corner.
        cells.sort_by(|a, b| {
            a.base.cmp(&b.base).then_with(|| {
                a.whitened
                    .lower
                    .partial_cmp(&b.whitened.lower)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
        for (i, c) in cells.iter().enumerate() {
            by_base[c.base].push(i as u32);
        }
        let tiled = cells.len() == grid.len() && spec.adaptive.is_none() && cells.iter().all(|c| !c.boundary);
        let exact_hull = tiled.then(|| HyperRectangle {
            lower: grid.origin.clone(),
            upper: (0..m).map(|i| grid.origin[i] + grid.counts[i] as f64 * grid.step[i]).collect(),
        });
        out.push(ModeGrid { whitening: w, grid, cells, by_base, exact_hull });
    }
    Ok(Discretization { modes: out })
}

/// Labels as bit masks over [`HybridSystem::atoms`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Labels {
    /// Propositions that hold everywhere in the cell.
    pub under: u64,
    /// Propositions that hold somewhere in the cell.
    pub over: u64,
}

/// Labels of one cell. Overlap means a shared interior, so cells that only
/// touch a region along a face are not labelled with it.
pub fn label_cell(h: &HybridSystem, cell: &Parallelotope, boundary: bool) -> Result<Labels, GeometryError> {
    let n = h.regions.len();
    let poly = cell.to_polytope();
    let mut l = Labels::default();
    for (i, r) in h.regions.iter().enumerate() {
        let inside = contains(&r.polytope, &poly)?;
        let overlaps = inside
            || (cell.bbox().intersects_rect(&r.polytope.bbox(), 0.0) && overlap_depth(&r.polytope, &poly)? > GEOM_TOL);
        if inside {
            l.under |= 1 << i;
        }
        if overlaps {
            l.over |= 1 << i;
        }
        if !boundary && !overlaps {
            l.under |= 1 << (n + i);
        }
        if !inside {
            l.over |= 1 << (n + i);
        }
    }
    Ok(l)
}

/// Under- and over-labels for every cell of every mode, in state order.
pub fn label_states(h: &HybridSystem, d: &Discretization) -> Result<Vec<Labels>, GeometryError> {
    let mut out = Vec::with_capacity(d.total_cells());
    for mg in &d.modes {
        for c in &mg.cells {
            out.push(label_cell(h, &c.original, c.boundary)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImdpState {
    pub mode: usize,
    pub cell: Parallelotope,
    pub boundary: bool,
    pub labels: Labels,
}

/// Counters collected while building an IMDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BuildStats {
    pub entries: usize,
    pub pruned: usize,
    pub sink_exact: usize,
    pub sink_branch_and_bound: usize,
    pub max_fallbacks: usize,
}

impl BuildStats {
    fn add(&mut self, o: &BuildStats) {
        self.entries += o.entries;
        self.pruned += o.pruned;
        self.sink_exact += o.sink_exact;
        self.sink_branch_and_bound += o.sink_branch_and_bound;
        self.max_fallbacks += o.max_fallbacks;
    }
}

/// Interval MDP in compressed sparse-row form. State `states.len()` is the
/// absorbing sink that stands for leaving the safe set.
#[derive(Debug, Clone, PartialEq)]
pub struct Imdp {
    pub dim: usize,
    pub actions: Vec<String>,
    pub atoms: Vec<String>,
    pub states: Vec<ImdpState>,
    /// Row `(q, a)` occupies `row_ptr[q * A + a] .. row_ptr[q * A + a + 1]`.
    pub row_ptr: Vec<usize>,
    pub targets: Vec<u32>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub stats: BuildStats,
}

/// One row of an [`Imdp`].
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    pub targets: &'a [u32],
    pub lo: &'a [f64],
    pub hi: &'a [f64],
}

impl Imdp {
    pub fn n_states(&self) -> usize {
        self.states.len() + 1
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn sink(&self) -> usize {
        self.states.len()
    }

    pub fn row(&self, q: usize, a: usize) -> Row<'_> {
        let k = q * self.n_actions() + a;
        let (s, e) = (self.row_ptr[k], self.row_ptr[k + 1]);
        Row { targets: &self.targets[s..e], lo: &self.lo[s..e], hi: &self.hi[s..e] }
    }

    pub fn under_label(&self, q: usize) -> u64 {
        self.states.get(q).map_or(0, |s| s.labels.under)
    }

    pub fn over_label(&self, q: usize) -> u64 {
        self.states.get(q).map_or(0, |s| s.labels.over)
    }

    /// Builds from explicit rows `rows[q][a] = [(target, lo, hi)]`, sorting
    /// each row by target.
    pub fn from_rows(
        dim: usize,
        actions: Vec<String>,
        atoms: Vec<String>,
        states: Vec<ImdpState>,
        rows: Vec<Vec<Vec<(u32, f64, f64)>>>,
    ) -> Self {
        let mut row_ptr = vec![0];
        let (mut targets, mut lo, mut hi) = (Vec::new(), Vec::new(), Vec::new());
        for q_rows in rows {
            for mut r in q_rows {
                r.sort_by_key(|e| e.0);
                for (t, l, u) in r {
                    targets.push(t);
                    lo.push(l);
                    hi.push(u);
                }
                row_ptr.push(targets.len());
            }
        }
        Self { dim, actions, atoms, states, row_ptr, targets, lo, hi, stats: BuildStats::default() }
    }
}

/// Options for [`build_imdp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub max_method: MaxMethod,
    pub parallelism: Parallelism,
    /// Entries whose upper bound falls below this are dropped and their mass
    /// is moved to the sink's upper bound.
    pub prune_threshold: f64,
    /// Cells farther than this (whitened units, on some axis) from a
    /// transition domain are not examined.
    pub cull_radius: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { max_method: MaxMethod::Auto, parallelism: Parallelism::default(), prune_threshold: 1e-12, cull_radius: 7.5 }
    }
}

/// Extra multiplicative factors `(lo, hi)` applied to the entry
/// `(source, action, target)`; used by the continuous-time construction.
pub type EntryFactor<'a> = dyn Fn(usize, usize, usize) -> (f64, f64) + Sync + 'a;

pub fn build_imdp(h: &HybridSystem, d: &Discretization, opts: &BuildOptions) -> Result<Imdp, AbstractionError> {
    build_imdp_with(h, d, opts, None)
}

/// [`build_imdp`] with optional per-entry factors `(lo, hi)`. The part of
/// an entry's upper bound not covered by its lower factor is added to the
/// sink's upper bound.
pub fn build_imdp_with(
    h: &HybridSystem,
    d: &Discretization,
    opts: &BuildOptions,
    factor: Option<&EntryFactor<'_>>,
) -> Result<Imdp, AbstractionError> {
    let labels = label_states(h, d)?;
    let mut states = Vec::with_capacity(d.total_cells());
    let mut offsets = Vec::with_capacity(d.modes.len());
    for (mi, mg) in d.modes.iter().enumerate() {
        offsets.push(states.len());
        for c in &mg.cells {
            states.push(ImdpState { mode: mi, cell: c.original.clone(), boundary: c.boundary, labels: labels[states.len()] });
        }
    }
    let n = states.len();
    let na = h.modes.len();
    let maps: Vec<_> = h
        .modes
        .iter()
        .zip(&d.modes)
        .map(|(mode, mg)| &mg.whitening.transform * &mode.dynamics.drift)
        .collect();

    type RowOut = (Vec<(u32, f64, f64)>, BuildStats);
    let built: Vec<Result<Vec<RowOut>, AbstractionError>> = map_indexed(opts.parallelism, n, |q| {
        (0..na)
            .map(|a| {
                let mg = &d.modes[a];
                let domain = states[q].cell.image(&maps[a]);
                build_row(q, a, &domain, mg, offsets[a], opts, factor, n)
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(n + 1);
    let mut stats = BuildStats::default();
    for r in built {
        let r = r?;
        let mut q_rows = Vec::with_capacity(na);
        for (row, s) in r {
            stats.add(&s);
            q_rows.push(row);
        }
        rows.push(q_rows);
    }
    rows.push((0..na).map(|_| vec![(n as u32, 1.0, 1.0)]).collect());
    let mut imdp = Imdp::from_rows(
        h.dim(),
        h.modes.iter().map(|m| m.name.clone()).collect(),
        h.atoms(),
        states,
        rows,
    );
    imdp.stats = stats;
    let report = validate(&imdp);
    if let Some(&(state, action, sum_lo, sum_hi)) = report.infeasible.first() {
        return Err(AbstractionError::InfeasibleRow { state, action, sum_lo, sum_hi });
    }
    Ok(imdp)
}

#[allow(clippy::too_many_arguments)]
fn build_row(
    q: usize,
    a: usize,
    domain: &Parallelotope,
    mg: &ModeGrid,
    offset: usize,
    opts: &BuildOptions,
    factor: Option<&EntryFactor<'_>>,
    sink: usize,
) -> Result<(Vec<(u32, f64, f64)>, BuildStats), AbstractionError> {
    let m = domain.dim();
    let bbox = domain.bbox();
    let r = opts.cull_radius;
    let far = HyperRectangle {
        lower: bbox.lower.iter().map(|v| v - r).collect(),
        upper: bbox.upper.iter().map(|v| v + r).collect(),
    };
    // Cells outside `far` lie more than `r` away on some axis.
    let tail_mass = (2.0 * m as f64 * tail(r)).min(1.0);
    let mut stats = BuildStats::default();
    let mut row = Vec::new();
    let mut near: Vec<usize> = Vec::new();
    let mut dropped = 0.0;
    let mut lost = 0.0;
    if let Some(ranges) = mg.grid.index_range(&far) {
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        'outer: loop {
            let base = mg.grid.flat_index(&idx);
            for &c in &mg.by_base[base] {
                let c = c as usize;
                near.push(c);
                let cell = &mg.cells[c];
                let quick = bbox_upper_bound(&bbox, &cell.whitened);
                if quick < opts.prune_threshold {
                    dropped += quick;
                    stats.pruned += 1;
                    continue;
                }
                let (b, fb) = bounds_with_fallback(domain, &cell.whitened, opts.max_method)?;
                if fb {
                    stats.max_fallbacks += 1;
                }
                if b.hi < opts.prune_threshold {
                    dropped += b.hi;
                    stats.pruned += 1;
                    continue;
                }
                let mut lo = if cell.boundary { 0.0 } else { b.lo };
                let mut hi = b.hi;
                if let Some(f) = factor {
                    let (fl, fh) = f(q, a, offset + c);
                    // Mass that lands in the cell but fails on the way goes
                    // to the sink.
                    lost += hi * (1.0 - fl);
                    lo *= fl;
                    hi *= fh;
                }
                let b = ProbInterval::new(lo, hi);
                row.push(((offset + c) as u32, b.lo, b.hi));
            }
            for i in (0..m).rev() {
                if idx[i] < ranges[i].1 {
                    idx[i] += 1;
                    continue 'outer;
                } else {
                    idx[i] = ranges[i].0;
                }
            }
            break;
        }
    }
    stats.entries += row.len();

    let cover = SinkCover {
        cells: near.iter().map(|&c| &mg.cells[c].whitened).collect(),
        interior: near.iter().map(|&c| !mg.cells[c].boundary).collect(),
        hull: mg.exact_hull.as_ref(),
        omitted_mass: tail_mass,
    };
    let (sb, method) = sink_bounds(domain, &cover);
    match method {
        SinkMethod::ExactHull => stats.sink_exact += 1,
        SinkMethod::BranchAndBound => stats.sink_branch_and_bound += 1,
    }
    let sink_hi = sb.hi + dropped + tail_mass + lost;
    let sum_lo: f64 = row.iter().map(|e| e.1).sum();
    let sum_hi: f64 = row.iter().map(|e| e.2).sum();
    // Absorb round-off so that the row stays feasible.
    let sink_hi = sink_hi.max(1.0 - sum_hi).min(1.0);
    let sink_lo = sb.lo.min((1.0 - sum_lo).max(0.0));
    row.push((sink as u32, sink_lo, sink_hi));
    Ok((row, stats))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub rows: usize,
    /// `(state, action, Σ lo, Σ hi)` for rows with `Σ lo > 1` or `Σ hi < 1`.
    pub infeasible: Vec<(usize, usize, f64, f64)>,
    /// Entries with `lo > hi` or outside `[0, 1]`.
    pub bad_entries: usize,
    pub stats: BuildStats,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.infeasible.is_empty() && self.bad_entries == 0
    }
}

/// Checks `0 <= lo <= hi <= 1` and `Σ lo <= 1 <= Σ hi` on every row.
pub fn validate(imdp: &Imdp) -> ValidationReport {
    let mut rep = ValidationReport { stats: imdp.stats, ..Default::default() };
    for q in 0..imdp.n_states() {
        for a in 0..imdp.n_actions() {
            let r = imdp.row(q, a);
            rep.rows += 1;
            rep.bad_entries += r
                .lo
                .iter()
                .zip(r.hi)
                .filter(|(l, h)| !(**l >= 0.0 && l <= h && **h <= 1.0))
                .count();
            let sl: f64 = r.lo.iter().sum();
            let sh: f64 = r.hi.iter().sum();
            if sl > 1.0 + 1e-12 || sh < 1.0 - 1e-12 {
                rep.infeasible.push((q, a, sl, sh));
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;
    use crate::linalg::Mat;

    fn cs1(n: usize) -> (HybridSystem, Discretization) {
        let x = HyperRectangle::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let dynamics = ModeDynamics::new(
            from_rows(2, 2, &[0.85, 0.0, 0.0, 0.9]),
            from_rows(2, 2, &[0.15, 0.0, 0.0, 0.05]),
            Mat::identity(2, 2),
        )
        .unwrap();
        let h = HybridSystem::new(
            vec![Mode { name: "a".into(), dynamics }],
            x.clone(),
            vec![Region { label: "X".into(), polytope: x.to_polytope() }],
        )
        .unwrap();
        let d = discretize(&h, &DiscretizationSpec { dx: 2.0 / n as f64, adaptive: None }).unwrap();
        (h, d)
    }

    #[test]
    fn cs1_grid_tiles_the_safe_set() {
        let (_, d) = cs1(19);
        assert_eq!(d.modes[0].cells.len(), 361);
        assert!(d.modes[0].exact_hull.is_some());
        let vol: f64 = d.modes[0].cells.iter().map(|c| c.original.volume()).sum();
        assert!((vol - 4.0).abs() < 1e-9);
    }

    #[test]
    fn locate_finds_containing_cell() {
        let (_, d) = cs1(10);
        let mg = &d.modes[0];
        let c = mg.locate(&[0.05, -0.95]).unwrap();
        assert!(mg.cells[c].original.contains_point(&[0.05, -0.95], 1e-12).unwrap());
        assert_eq!(mg.locate(&[1.5, 0.0]), None);
    }

    #[test]
    fn rows_are_feasible_and_sink_is_absorbing() {
        let (h, d) = cs1(8);
        let imdp = build_imdp(&h, &d, &BuildOptions::default()).unwrap();
        assert!(validate(&imdp).is_valid());
        let r = imdp.row(imdp.sink(), 0);
        assert_eq!((r.targets, r.lo, r.hi), (&[imdp.sink() as u32][..], &[1.0][..], &[1.0][..]));
        assert_eq!(imdp.stats.sink_exact, 64);
    }

    #[test]
    fn parallel_and_sequential_builds_are_identical() {
        let (h, d) = cs1(6);
        let a = build_imdp(&h, &d, &BuildOptions { parallelism: Parallelism::Sequential, ..Default::default() }).unwrap();
        let b = build_imdp(&h, &d, &BuildOptions { parallelism: Parallelism::Parallel, ..Default::default() }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn region_outside_safe_set_is_rejected() {
        let (h, _) = cs1(2);
        let big = HyperRectangle::new(vec![-2.0, -2.0], vec![0.0, 0.0]).unwrap();
        let r = HybridSystem::new(h.modes.clone(), h.safe_set.clone(), vec![Region { label: "r".into(), polytope: big.to_polytope() }]);
        assert_eq!(r, Err(AbstractionError::RegionOutsideSafeSet("r".into())));
    }

    #[test]
    fn aligned_grid_has_equal_under_and_over_labels() {
        let (mut h, _) = cs1(2);
        let r = HyperRectangle::new(vec![0.0, 0.0], vec![0.5, 0.5]).unwrap();
        h.regions.push(Region { label: "goal".into(), polytope: r.to_polytope() });
        let d = discretize(&h, &DiscretizationSpec { dx: 0.25, adaptive: None }).unwrap();
        for l in label_states(&h, &d).unwrap() {
            assert_eq!(l.under, l.over);
        }
    }

    #[test]
    fn rotated_grid_marks_boundary_cells() {
        let x = HyperRectangle::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let dynamics = ModeDynamics::new(
            from_rows(2, 2, &[0.1, 0.9, 0.8, 0.2]),
            from_rows(2, 2, &[0.3, 0.1, 0.1, 0.2]),
            Mat::identity(2, 2),
        )
        .unwrap();
        let h = HybridSystem::new(vec![Mode { name: "a".into(), dynamics }], x, vec![]).unwrap();
        let d = discretize(&h, &DiscretizationSpec { dx: 0.5, adaptive: None }).unwrap();
        let mg = &d.modes[0];
        assert!(mg.exact_hull.is_none());
        assert!(mg.cells.iter().any(|c| c.boundary));
        // Interior cells plus boundary cells cover the safe set.
        let vol: f64 = mg.cells.iter().map(|c| c.original.volume()).sum();
        assert!(vol >= 16.0);
        let imdp = build_imdp(&h, &d, &BuildOptions::default()).unwrap();
        assert!(validate(&imdp).is_valid());
        assert!(imdp.stats.sink_branch_and_bound > 0);
    }

    #[test]
    fn adaptive_refinement_shrinks_boundary_cells() {
        let x = HyperRectangle::new(vec![-2.0, -2.0], vec![2.0, 2.0]).unwrap();
        let dynamics = ModeDynamics::new(
            from_rows(2, 2, &[0.8, 0.2, 0.1, 0.9]),
            from_rows(2, 2, &[0.3, 0.1, 0.1, 0.2]),
            Mat::identity(2, 2),
        )
        .unwrap();
        let h = HybridSystem::new(vec![Mode { name: "a".into(), dynamics }], x, vec![]).unwrap();
        let spec = DiscretizationSpec { dx: 0.5, adaptive: Some(AdaptiveSpec { dx_min: 0.125, refine_regions: false }) };
        let d = discretize(&h, &spec).unwrap();
        let mg = &d.modes[0];
        for c in &mg.cells {
            let side = c.original.generators.column(0).norm();
            if c.boundary {
                assert!(side <= 0.125 + 1e-9);
            }
        }
        let p = [1.99, -1.99];
        let c = mg.locate(&p).unwrap();
        assert!(mg.cells[c].original.contains_point(&p, 1e-12).unwrap());
    }
}
