//! Text formats for models, abstractions, results and strategies.
//!
//! Every document starts with a header line `switchsynth-v1 <kind>`. Blank
//! lines and `#` comments are ignored. Floats are written with 17
//! significant digits so that documents round-trip exactly.

use crate::abstraction::{AdaptiveSpec, BuildStats, DiscretizationSpec, HybridSystem, Imdp, ImdpState, Labels, Mode, Region};
use crate::bridge::{BridgeModel, ContinuousSystem, CtModeDynamics};
use crate::geometry::{Halfspaces, HyperRectangle, Parallelotope, Polytope};
use crate::kernel::{ModeDynamics, ProbInterval};
use crate::linalg::{from_rows, identity, Mat};
use crate::synthesis::{ErrorMetrics, Strategy};
use std::fmt::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("invalid model: {0}")]
    Invalid(String),
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ")
}

fn header(kind: &str) -> String {
    format!("switchsynth-v1 {kind}")
}

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, Vec<&'a str>)> + 'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, kind: &str) -> Result<Self, FormatError> {
        let it: Box<dyn Iterator<Item = (usize, Vec<&'a str>)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").split_whitespace().collect::<Vec<_>>()))
                .filter(|(_, w)| !w.is_empty()),
        );
        let mut lines = Lines { inner: it.peekable() };
        let want = header(kind);
        match lines.inner.next() {
            Some((_, w)) if w.join(" ") == want => Ok(lines),
            Some((n, _)) => Err(syntax(n, &format!("expected header '{want}'"))),
            None => Err(syntax(0, "empty document")),
        }
    }

    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        self.inner.next()
    }
}

fn syntax(line: usize, msg: &str) -> FormatError {
    FormatError::Syntax { line, msg: msg.to_string() }
}

fn floats(n: usize, words: &[&str]) -> Result<Vec<f64>, FormatError> {
    words
        .iter()
        .map(|w| w.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| syntax(n, &format!("bad number {w:?}"))))
        .collect()
}

fn int<T: std::str::FromStr>(n: usize, w: Option<&&str>) -> Result<T, FormatError> {
    w.and_then(|w| w.parse().ok()).ok_or_else(|| syntax(n, "expected an integer"))
}

fn square(n: usize, m: usize, name: &str, v: Vec<f64>) -> Result<Mat, FormatError> {
    if v.len() != m * m {
        return Err(syntax(n, &format!("{name} needs {} entries, got {}", m * m, v.len())));
    }
    Ok(from_rows(m, m, &v))
}

/// A parsed model file.
#[derive(Debug, Clone)]
pub struct Model {
    /// The (sampled, for continuous models) discrete-time system.
    pub system: HybridSystem,
    /// Bridge data per mode for continuous models.
    pub bridges: Option<Vec<BridgeModel>>,
    pub discretization: DiscretizationSpec,
}

/// Parses a model document:
///
/// ```text
/// switchsynth-v1 model
/// dim 2
/// safe_lower -1 -1
/// safe_upper 1 1
/// continuous 0.1          # optional sampling time; F, G are then rates
/// mode a1
///   F 0.85 0 0 0.9        # row-major m x m
///   G 0.15 0 0 0.05       # row-major m x r
///   noise_cov 1 0 0 1     # optional r x r, identity by default
/// end
/// region green box 1 1 2 2                  # lower corner, upper corner
/// region red hrep 1 0 0.5 -1 0 0.5 ...      # rows a_1 .. a_m b
/// dx 0.1
/// adaptive 0.05 regions   # optional: dx_min, refine region borders too
/// ```
pub fn parse_model(text: &str) -> Result<Model, FormatError> {
    let mut lines = Lines::new(text, "model")?;
    let mut dim: Option<usize> = None;
    let (mut lower, mut upper) = (None, None);
    let mut dt = None;
    let mut modes: Vec<(usize, String, Mat, Vec<f64>, Option<Vec<f64>>)> = Vec::new();
    let mut regions: Vec<(usize, String, Polytope)> = Vec::new();
    let mut dx = None;
    let mut adaptive = None;
    let need_dim = |n: usize, d: Option<usize>| d.ok_or_else(|| syntax(n, "'dim' must come first"));
    while let Some((n, w)) = lines.next() {
        match w[0] {
            "dim" => {
                let d: usize = int(n, w.get(1))?;
                if d == 0 || d > 16 {
                    return Err(syntax(n, "dimension must be between 1 and 16"));
                }
                dim = Some(d);
            }
            "safe_lower" => lower = Some(floats(n, &w[1..])?),
            "safe_upper" => upper = Some(floats(n, &w[1..])?),
            "continuous" => {
                let v = floats(n, &w[1..])?;
                if v.len() != 1 {
                    return Err(syntax(n, "continuous takes the sampling time"));
                }
                dt = Some(v[0]);
            }
            "mode" => {
                let m = need_dim(n, dim)?;
                let name = w.get(1).ok_or_else(|| syntax(n, "mode needs a name"))?.to_string();
                let (mut f, mut g, mut cov) = (None, None, None);
                loop {
                    let (k, ww) = lines.next().ok_or_else(|| syntax(n, "mode block without 'end'"))?;
                    match ww[0] {
                        "F" => f = Some(square(k, m, "F", floats(k, &ww[1..])?)?),
                        "G" => {
                            let v = floats(k, &ww[1..])?;
                            if v.is_empty() || v.len() % m != 0 {
                                return Err(syntax(k, &format!("G needs a multiple of {m} entries")));
                            }
                            g = Some(v);
                        }
                        "noise_cov" => cov = Some(floats(k, &ww[1..])?),
                        "end" => break,
                        other => return Err(syntax(k, &format!("unknown mode entry {other:?}"))),
                    }
                }
                let f = f.ok_or_else(|| syntax(n, "mode without F"))?;
                let g = g.ok_or_else(|| syntax(n, "mode without G"))?;
                modes.push((n, name, f, g, cov));
            }
            "region" => {
                let m = need_dim(n, dim)?;
                let label = w.get(1).ok_or_else(|| syntax(n, "region needs a label"))?.to_string();
                let v = floats(n, w.get(3..).unwrap_or(&[]))?;
                let poly = match w.get(2).copied() {
                    Some("box") => {
                        if v.len() != 2 * m {
                            return Err(syntax(n, &format!("box needs {} numbers", 2 * m)));
                        }
                        HyperRectangle::new(v[..m].to_vec(), v[m..].to_vec())
                            .map_err(|e| syntax(n, &e.to_string()))?
                            .to_polytope()
                    }
                    Some("hrep") => {
                        if v.is_empty() || v.len() % (m + 1) != 0 {
                            return Err(syntax(n, &format!("hrep needs rows of {} numbers", m + 1)));
                        }
                        let k = v.len() / (m + 1);
                        let mut a = Vec::with_capacity(k * m);
                        let mut b = Vec::with_capacity(k);
                        for r in v.chunks(m + 1) {
                            a.extend_from_slice(&r[..m]);
                            b.push(r[m]);
                        }
                        let hs = Halfspaces::new(from_rows(k, m, &a), b).map_err(|e| syntax(n, &e.to_string()))?;
                        Polytope::from_halfspaces(hs).map_err(|e| syntax(n, &e.to_string()))?
                    }
                    _ => return Err(syntax(n, "region kind must be 'box' or 'hrep'")),
                };
                regions.push((n, label, poly));
            }
            "dx" => {
                let v = floats(n, &w[1..])?;
                dx = v.first().copied();
            }
            "adaptive" => {
                let v = floats(n, w.get(1..2).unwrap_or(&[]))?;
                let dx_min = *v.first().ok_or_else(|| syntax(n, "adaptive needs dx_min"))?;
                let refine_regions = match w.get(2).copied() {
                    None => false,
                    Some("regions") => true,
                    Some(o) => return Err(syntax(n, &format!("unknown adaptive option {o:?}"))),
                };
                adaptive = Some(AdaptiveSpec { dx_min, refine_regions });
            }
            other => return Err(syntax(n, &format!("unknown keyword {other:?}"))),
        }
    }
    let m = dim.ok_or_else(|| syntax(0, "missing 'dim'"))?;
    let lower = lower.ok_or_else(|| syntax(0, "missing 'safe_lower'"))?;
    let upper = upper.ok_or_else(|| syntax(0, "missing 'safe_upper'"))?;
    if lower.len() != m || upper.len() != m {
        return Err(FormatError::Invalid(format!("safe set bounds must have {m} entries")));
    }
    let safe = HyperRectangle::new(lower, upper).map_err(|e| FormatError::Invalid(e.to_string()))?;
    let dx = dx.ok_or_else(|| syntax(0, "missing 'dx'"))?;
    let regions: Vec<Region> = regions.into_iter().map(|(_, label, polytope)| Region { label, polytope }).collect();
    let invalid = |e: &dyn std::fmt::Display| FormatError::Invalid(e.to_string());
    let mut parsed = Vec::with_capacity(modes.len());
    for (n, name, f, g, cov) in modes {
        let r = g.len() / m;
        let g = from_rows(m, r, &g);
        let cov = match cov {
            Some(c) => square(n, r, "noise_cov", c)?,
            None => identity(r),
        };
        parsed.push((name, f, g, cov));
    }
    let (system, bridges) = match dt {
        None => {
            let modes = parsed
                .into_iter()
                .map(|(name, f, g, cov)| Ok(Mode { name, dynamics: ModeDynamics::new(f, g, cov).map_err(|e| invalid(&e))? }))
                .collect::<Result<Vec<_>, FormatError>>()?;
            (HybridSystem::new(modes, safe, regions).map_err(|e| invalid(&e))?, None)
        }
        Some(dt) => {
            let modes = parsed
                .into_iter()
                .map(|(name, f, g, cov)| Ok((name, CtModeDynamics::new(f, g, dt).map_err(|e| invalid(&e))?, cov)))
                .collect::<Result<Vec<_>, FormatError>>()?;
            let cs = ContinuousSystem::new(modes, safe, regions).map_err(|e| invalid(&e))?;
            (cs.sampled, Some(cs.bridges))
        }
    };
    Ok(Model { system, bridges, discretization: DiscretizationSpec { dx, adaptive } })
}

/// Text form of an IMDP (cells, labels and interval rows).
pub fn write_imdp(imdp: &Imdp) -> String {
    let mut s = String::new();
    let m = imdp.dim;
    writeln!(s, "{}", header("imdp")).unwrap();
    writeln!(s, "dim {m}").unwrap();
    writeln!(s, "actions {}", imdp.actions.join(" ")).unwrap();
    writeln!(s, "atoms {}", imdp.atoms.join(" ")).unwrap();
    let st = imdp.stats;
    writeln!(
        s,
        "stats {} {} {} {} {}",
        st.entries, st.pruned, st.sink_exact, st.sink_branch_and_bound, st.max_fallbacks
    )
    .unwrap();
    writeln!(s, "states {}", imdp.states.len()).unwrap();
    for q in &imdp.states {
        let gens: Vec<f64> = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| q.cell.generators[(i, j)]).collect();
        writeln!(
            s,
            "state {} {} {} {} {} {}",
            q.mode,
            u8::from(q.boundary),
            q.labels.under,
            q.labels.over,
            join(&q.cell.base),
            join(&gens)
        )
        .unwrap();
    }
    for q in 0..imdp.n_states() {
        for a in 0..imdp.n_actions() {
            let r = imdp.row(q, a);
            write!(s, "row {q} {a} {}", r.targets.len()).unwrap();
            for k in 0..r.targets.len() {
                write!(s, " {} {} {}", r.targets[k], fmt_f64(r.lo[k]), fmt_f64(r.hi[k])).unwrap();
            }
            s.push('\n');
        }
    }
    s
}

pub fn read_imdp(text: &str) -> Result<Imdp, FormatError> {
    let mut lines = Lines::new(text, "imdp")?;
    let mut dim = None;
    let mut actions = None;
    let mut atoms = Vec::new();
    let mut stats = BuildStats::default();
    let mut n_states = None;
    let mut states = Vec::new();
    let mut rows: Vec<Vec<Option<Vec<(u32, f64, f64)>>>> = Vec::new();
    while let Some((n, w)) = lines.next() {
        match w[0] {
            "dim" => dim = Some(int::<usize>(n, w.get(1))?),
            "actions" => actions = Some(w[1..].iter().map(|s| s.to_string()).collect::<Vec<_>>()),
            "atoms" => atoms = w[1..].iter().map(|s| s.to_string()).collect(),
            "stats" => {
                let v: Vec<usize> = (1..6).map(|i| int(n, w.get(i))).collect::<Result<_, _>>()?;
                stats = BuildStats { entries: v[0], pruned: v[1], sink_exact: v[2], sink_branch_and_bound: v[3], max_fallbacks: v[4] };
            }
            "states" => {
                let k: usize = int(n, w.get(1))?;
                let na = actions.as_ref().ok_or_else(|| syntax(n, "'actions' must precede 'states'"))?.len();
                n_states = Some(k);
                rows = vec![vec![None; na]; k + 1];
            }
            "state" => {
                let m = dim.ok_or_else(|| syntax(n, "'dim' must precede states"))?;
                if w.len() != 5 + m + m * m {
                    return Err(syntax(n, "malformed state line"));
                }
                let mode: usize = int(n, w.get(1))?;
                let boundary = int::<u8>(n, w.get(2))? != 0;
                let under: u64 = int(n, w.get(3))?;
                let over: u64 = int(n, w.get(4))?;
                let base = floats(n, &w[5..5 + m])?;
                let gens = floats(n, &w[5 + m..])?;
                let cell = Parallelotope::new(base, from_rows(m, m, &gens)).map_err(|e| syntax(n, &e.to_string()))?;
                states.push(ImdpState { mode, cell, boundary, labels: Labels { under, over } });
            }
            "row" => {
                let q: usize = int(n, w.get(1))?;
                let a: usize = int(n, w.get(2))?;
                let k: usize = int(n, w.get(3))?;
                if w.len() != 4 + 3 * k {
                    return Err(syntax(n, "row length does not match its entry count"));
                }
                let slot = rows.get_mut(q).and_then(|r| r.get_mut(a)).ok_or_else(|| syntax(n, "row index out of range"))?;
                let mut entries = Vec::with_capacity(k);
                for e in w[4..].chunks(3) {
                    let t: u32 = int(n, e.first())?;
                    let v = floats(n, &e[1..])?;
                    entries.push((t, v[0], v[1]));
                }
                *slot = Some(entries);
            }
            other => return Err(syntax(n, &format!("unknown keyword {other:?}"))),
        }
    }
    let dim = dim.ok_or_else(|| syntax(0, "missing 'dim'"))?;
    let actions = actions.ok_or_else(|| syntax(0, "missing 'actions'"))?;
    let n = n_states.ok_or_else(|| syntax(0, "missing 'states'"))?;
    if states.len() != n {
        return Err(FormatError::Invalid(format!("expected {n} states, found {}", states.len())));
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(q, r)| {
            r.into_iter()
                .enumerate()
                .map(|(a, e)| e.ok_or_else(|| FormatError::Invalid(format!("missing row ({q}, {a})"))))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    if rows.iter().flatten().flatten().any(|e| e.0 as usize > n) {
        return Err(FormatError::Invalid("target index out of range".into()));
    }
    let mut imdp = Imdp::from_rows(dim, actions, atoms, states, rows);
    imdp.stats = stats;
    Ok(imdp)
}

/// Per-state record of a results document.
#[derive(Debug, Clone, PartialEq)]
pub struct StateResult {
    pub mode: usize,
    /// Index of the cell within its mode's grid.
    pub cell: usize,
    pub vertices: Vec<Vec<f64>>,
    pub bounds: ProbInterval,
    pub action: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Results {
    pub formula: String,
    pub metrics: ErrorMetrics,
    pub wall_time: f64,
    pub stats: BuildStats,
    pub states: Vec<StateResult>,
}

impl Results {
    pub fn new(imdp: &Imdp, formula: &str, bounds: &[ProbInterval], actions: &[usize], metrics: ErrorMetrics, wall_time: f64) -> Self {
        let mut seen = vec![0usize; imdp.n_actions()];
        let states = imdp
            .states
            .iter()
            .enumerate()
            .map(|(q, s)| {
                let cell = seen[s.mode];
                seen[s.mode] += 1;
                StateResult { mode: s.mode, cell, vertices: s.cell.vertices(), bounds: bounds[q], action: actions[q] }
            })
            .collect();
        Self { formula: formula.to_string(), metrics, wall_time, stats: imdp.stats, states }
    }
}

pub fn write_results(r: &Results) -> String {
    let mut s = String::new();
    writeln!(s, "{}", header("results")).unwrap();
    writeln!(s, "formula {}", r.formula).unwrap();
    writeln!(s, "eps_max {}", fmt_f64(r.metrics.max)).unwrap();
    writeln!(s, "eps_med {}", fmt_f64(r.metrics.median)).unwrap();
    writeln!(s, "eps_ave {}", fmt_f64(r.metrics.average)).unwrap();
    writeln!(s, "states {}", r.states.len()).unwrap();
    writeln!(s, "wall_time {}", fmt_f64(r.wall_time)).unwrap();
    let st = r.stats;
    writeln!(
        s,
        "counters entries={} pruned={} sink_exact={} sink_branch_and_bound={} max_fallbacks={}",
        st.entries, st.pruned, st.sink_exact, st.sink_branch_and_bound, st.max_fallbacks
    )
    .unwrap();
    for x in &r.states {
        let flat: Vec<f64> = x.vertices.iter().flatten().copied().collect();
        writeln!(
            s,
            "state {} {} {} {} {} {} {}",
            x.mode,
            x.cell,
            fmt_f64(x.bounds.lo),
            fmt_f64(x.bounds.hi),
            x.action,
            x.vertices.len(),
            join(&flat)
        )
        .unwrap();
    }
    s
}

pub fn read_results(text: &str) -> Result<Results, FormatError> {
    let mut lines = Lines::new(text, "results")?;
    let mut formula = String::new();
    let mut metrics = ErrorMetrics { max: 0.0, median: 0.0, average: 0.0 };
    let mut wall_time = 0.0;
    let mut stats = BuildStats::default();
    let mut states = Vec::new();
    let one = |n: usize, w: &[&str]| -> Result<f64, FormatError> { floats(n, &w[1..2.min(w.len())])?.first().copied().ok_or_else(|| syntax(n, "missing value")) };
    while let Some((n, w)) = lines.next() {
        match w[0] {
            "formula" => formula = w[1..].join(" "),
            "eps_max" => metrics.max = one(n, &w)?,
            "eps_med" => metrics.median = one(n, &w)?,
            "eps_ave" => metrics.average = one(n, &w)?,
            "wall_time" => wall_time = one(n, &w)?,
            "states" => {}
            "counters" => {
                for kv in &w[1..] {
                    let (k, v) = kv.split_once('=').ok_or_else(|| syntax(n, "malformed counter"))?;
                    let v: usize = v.parse().map_err(|_| syntax(n, "malformed counter"))?;
                    match k {
                        "entries" => stats.entries = v,
                        "pruned" => stats.pruned = v,
                        "sink_exact" => stats.sink_exact = v,
                        "sink_branch_and_bound" => stats.sink_branch_and_bound = v,
                        "max_fallbacks" => stats.max_fallbacks = v,
                        _ => return Err(syntax(n, &format!("unknown counter {k:?}"))),
                    }
                }
            }
            "state" => {
                let mode = int(n, w.get(1))?;
                let cell = int(n, w.get(2))?;
                let v = floats(n, w.get(3..5).unwrap_or(&[]))?;
                if v.len() != 2 {
                    return Err(syntax(n, "malformed state line"));
                }
                let action = int(n, w.get(5))?;
                let nv: usize = int(n, w.get(6))?;
                let flat = floats(n, w.get(7..).unwrap_or(&[]))?;
                if nv == 0 || flat.len() % nv != 0 {
                    return Err(syntax(n, "malformed vertex list"));
                }
                let m = flat.len() / nv;
                let vertices = flat.chunks(m).map(|c| c.to_vec()).collect();
                states.push(StateResult { mode, cell, vertices, bounds: ProbInterval { lo: v[0], hi: v[1] }, action });
            }
            other => return Err(syntax(n, &format!("unknown keyword {other:?}"))),
        }
    }
    Ok(Results { formula, metrics, wall_time, stats, states })
}

/// `x_center y_center p_lo` rows for the states of `mode` (2D only).
pub fn heatmap(r: &Results, mode: usize) -> Option<String> {
    let mut s = String::new();
    for x in r.states.iter().filter(|x| x.mode == mode) {
        if x.vertices[0].len() != 2 {
            return None;
        }
        let k = x.vertices.len() as f64;
        let cx = x.vertices.iter().map(|v| v[0]).sum::<f64>() / k;
        let cy = x.vertices.iter().map(|v| v[1]).sum::<f64>() / k;
        writeln!(s, "{} {} {}", fmt_f64(cx), fmt_f64(cy), fmt_f64(x.bounds.lo)).unwrap();
    }
    Some(s)
}

pub fn write_strategy(st: &Strategy) -> String {
    let mut s = String::new();
    writeln!(s, "{}", header("strategy")).unwrap();
    writeln!(s, "imdp_states {}", st.n_imdp_states).unwrap();
    writeln!(s, "dfa_states {}", st.n_dfa_states).unwrap();
    writeln!(s, "layers {}", st.layers.len()).unwrap();
    for (p, &(q, z)) in st.states.iter().enumerate() {
        let acts: Vec<String> = st.layers.iter().map(|l| l[p].to_string()).collect();
        writeln!(s, "entry {q} {z} {}", acts.join(" ")).unwrap();
    }
    s
}

pub fn read_strategy(text: &str) -> Result<Strategy, FormatError> {
    let mut lines = Lines::new(text, "strategy")?;
    let (mut nq, mut nz, mut nl) = (None, None, None);
    let mut states = Vec::new();
    let mut layers: Vec<Vec<u16>> = Vec::new();
    while let Some((n, w)) = lines.next() {
        match w[0] {
            "imdp_states" => nq = Some(int::<usize>(n, w.get(1))?),
            "dfa_states" => nz = Some(int::<usize>(n, w.get(1))?),
            "layers" => {
                let l: usize = int(n, w.get(1))?;
                nl = Some(l);
                layers = vec![Vec::new(); l];
            }
            "entry" => {
                let l = nl.ok_or_else(|| syntax(n, "'layers' must precede entries"))?;
                if w.len() != 3 + l {
                    return Err(syntax(n, "entry has the wrong number of actions"));
                }
                let q: u32 = int(n, w.get(1))?;
                let z: u32 = int(n, w.get(2))?;
                if nq.is_some_and(|nq| q as usize >= nq) || nz.is_some_and(|nz| z as usize >= nz) {
                    return Err(syntax(n, "entry out of range"));
                }
                states.push((q, z));
                for (j, layer) in layers.iter_mut().enumerate() {
                    layer.push(int(n, w.get(3 + j))?);
                }
            }
            other => return Err(syntax(n, &format!("unknown keyword {other:?}"))),
        }
    }
    let nq = nq.ok_or_else(|| syntax(0, "missing 'imdp_states'"))?;
    let nz = nz.ok_or_else(|| syntax(0, "missing 'dfa_states'"))?;
    if layers.is_empty() {
        return Err(syntax(0, "strategy without layers"));
    }
    Ok(Strategy::new(nq, nz, states, layers))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CS1: &str = "switchsynth-v1 model
dim 2
safe_lower -1 -1
safe_upper 1 1
mode a1
  F 0.85 0 0 0.9
  G 0.15 0 0 0.05
end
region X box -1 -1 1 1
dx 0.25
";

    #[test]
    fn parses_model() {
        let m = parse_model(CS1).unwrap();
        assert_eq!(m.system.modes.len(), 1);
        assert_eq!(m.system.atoms(), vec!["X", "~X"]);
        assert_eq!(m.discretization.dx, 0.25);
        assert!(m.bridges.is_none());
        assert_eq!(m.system.modes[0].dynamics.noise_cov, identity(2));
    }

    #[test]
    fn model_errors_carry_line_numbers() {
        let bad = CS1.replace("F 0.85 0 0 0.9", "F 0.85 0 0");
        assert!(matches!(parse_model(&bad), Err(FormatError::Syntax { line: 6, .. })));
        assert!(matches!(parse_model("switchsynth-v1 dfa\n"), Err(FormatError::Syntax { line: 1, .. })));
    }

    #[test]
    fn hrep_region() {
        let txt = CS1.replace("region X box -1 -1 1 1", "region tri hrep -1 0 0  0 -1 0  1 1 1");
        let m = parse_model(&txt).unwrap();
        assert_eq!(m.system.regions[0].polytope.vertices().len(), 3);
    }

    #[test]
    fn float_text_is_exact() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 0.9999999999999999, 5e-324] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn strategy_round_trip() {
        let st = Strategy::new(3, 2, vec![(0, 1), (2, 0)], vec![vec![1, 0], vec![0, 1]]);
        let back = read_strategy(&write_strategy(&st)).unwrap();
        assert_eq!(back, st);
        assert_eq!(back.action(2, 0, 2), Some(1));
    }
}
