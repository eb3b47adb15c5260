//! Independent oracles shared by the property tests and the acceptance run.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use switchsynth::abstraction::{Imdp, ImdpState, Labels};
use switchsynth::bridge::BridgeModel;
use switchsynth::geometry::{HyperRectangle, Parallelotope};
use switchsynth::kernel::{ModeDynamics, Whitening};
use switchsynth::linalg::{expm, mat_vec, Mat};

/// Optimum of `sum p_i v_i` over `{lo <= p <= hi, sum p = 1}` by enumerating
/// every vertex: all coordinates but one sit at a bound.
pub fn brute_row(values: &[f64], lo: &[f64], hi: &[f64], minimize: bool) -> f64 {
    let n = values.len();
    let mut best = if minimize { f64::INFINITY } else { f64::NEG_INFINITY };
    for free in 0..n {
        for mask in 0u32..1 << (n - 1) {
            let mut p = vec![0.0; n];
            let mut bit = 0;
            let mut rest = 1.0;
            for i in 0..n {
                if i == free {
                    continue;
                }
                p[i] = if mask >> bit & 1 == 1 { hi[i] } else { lo[i] };
                rest -= p[i];
                bit += 1;
            }
            if rest < lo[free] - 1e-12 || rest > hi[free] + 1e-12 {
                continue;
            }
            p[free] = rest;
            let v: f64 = p.iter().zip(values).map(|(a, b)| a * b).sum();
            best = if minimize { best.min(v) } else { best.max(v) };
        }
    }
    best
}

/// Random row with `sum lo <= 1 <= sum hi`, built around a random
/// distribution. Some entries are degenerate (`lo == hi`).
pub fn feasible_row(rng: &mut impl Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for wi in w {
        let p = wi / s;
        if rng.random::<f64>() < 0.15 {
            lo.push(p);
            hi.push(p);
        } else {
            lo.push(p * rng.random::<f64>());
            hi.push((p + (1.0 - p) * rng.random::<f64>()).min(1.0));
        }
    }
    (lo, hi)
}

fn toy_state(green: bool) -> ImdpState {
    let bit = if green { 0b01 } else { 0b10 };
    ImdpState {
        mode: 0,
        cell: HyperRectangle::new(vec![0.0], vec![1.0]).unwrap().to_parallelotope(),
        boundary: false,
        labels: Labels { under: bit, over: bit },
    }
}

/// Random IMDP over atoms `green, ~green` with `n` states plus the sink.
/// Every row reaches a random subset of states and the sink.
pub fn random_imdp(rng: &mut impl Rng, n: usize, actions: usize) -> Imdp {
    let states: Vec<ImdpState> = (0..n).map(|_| toy_state(rng.random::<f64>() < 0.35)).collect();
    let mut rows = Vec::with_capacity(n + 1);
    for _ in 0..n {
        let mut q_rows = Vec::with_capacity(actions);
        for _ in 0..actions {
            let mut targets: Vec<u32> = (0..=n as u32).filter(|_| rng.random::<f64>() < 0.7).collect();
            if targets.is_empty() {
                targets.push(rng.random_range(0..=n as u32));
            }
            let (lo, hi) = feasible_row(rng, targets.len());
            q_rows.push(targets.into_iter().zip(lo).zip(hi).map(|((t, l), h)| (t, l, h)).collect());
        }
        rows.push(q_rows);
    }
    rows.push((0..actions).map(|_| vec![(n as u32, 1.0, 1.0)]).collect());
    let names = (0..actions).map(|a| format!("a{a}")).collect();
    Imdp::from_rows(1, names, vec!["green".into(), "~green".into()], states, rows)
}

/// Lower bound on reaching `green` within `k` steps: the controller
/// maximises over actions and the adversary picks any vertex of each row,
/// independently at every step.
pub fn exhaustive_bounded_reach(imdp: &Imdp, k: usize) -> Vec<f64> {
    let n = imdp.states.len();
    let green = |q: usize| q < n && imdp.states[q].labels.under & 1 == 1;
    let mut v: Vec<f64> = (0..=n).map(|q| if green(q) { 1.0 } else { 0.0 }).collect();
    for _ in 0..k {
        let next = (0..=n)
            .map(|q| {
                if green(q) {
                    return 1.0;
                }
                if q == n {
                    return 0.0;
                }
                (0..imdp.n_actions())
                    .map(|a| {
                        let r = imdp.row(q, a);
                        let vals: Vec<f64> = r.targets.iter().map(|&t| v[t as usize]).collect();
                        brute_row(&vals, r.lo, r.hi, true)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        v = next;
    }
    v
}

pub fn normal_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn uniform_in(rng: &mut impl Rng, p: &Parallelotope) -> Vec<f64> {
    let s: Vec<f64> = (0..p.dim()).map(|_| rng.random::<f64>()).collect();
    p.point(&s)
}

/// Frequency of `T (F x + G w)` landing in `rect` over `n` draws.
pub fn mc_transition(rng: &mut ChaCha8Rng, dyn_: &ModeDynamics, w: &Whitening, x: &[f64], rect: &HyperRectangle, n: usize) -> f64 {
    let noise_l = dyn_.noise_cov.clone().cholesky().expect("noise covariance").l();
    let fx = mat_vec(&dyn_.drift, x);
    let r = dyn_.diffusion.ncols();
    let mut hits = 0usize;
    for _ in 0..n {
        let z = normal_vec(rng, r);
        let wv = mat_vec(&noise_l, &z);
        let gw = mat_vec(&dyn_.diffusion, &wv);
        let y: Vec<f64> = fx.iter().zip(gw).map(|(a, b)| a + b).collect();
        if rect.contains_point(&mat_vec(&w.transform, &y), 0.0) {
            hits += 1;
        }
    }
    hits as f64 / n as f64
}

/// Exact bridge sampler on a uniform grid: a free path from `x1`, then the
/// Gaussian conditioning correction `x(t) + C(t) Σ(dt)^{-1} (x2 - x(dt))`.
pub struct BridgeSampler {
    step: Mat,
    step_chol: Mat,
    gains: Vec<Mat>,
}

impl BridgeSampler {
    pub fn new(model: &BridgeModel, steps: usize) -> Self {
        let h = model.dt / steps as f64;
        let step = expm(&(&model.drift * h));
        let step_chol = model.covariance(h).cholesky().expect("step covariance").l();
        let gains = (0..=steps).map(|k| model.mean_maps(k as f64 * h).1).collect();
        Self { step, step_chol, gains }
    }

    pub fn path(&self, rng: &mut impl Rng, x1: &[f64], x2: &[f64]) -> Vec<Vec<f64>> {
        let m = x1.len();
        let mut free = vec![x1.to_vec()];
        for _ in 1..self.gains.len() {
            let prev = free.last().unwrap();
            let z = normal_vec(rng, m);
            let noise = mat_vec(&self.step_chol, &z);
            free.push(mat_vec(&self.step, prev).iter().zip(noise).map(|(a, b)| a + b).collect());
        }
        let end = free.last().unwrap().clone();
        let miss: Vec<f64> = x2.iter().zip(&end).map(|(a, b)| a - b).collect();
        free.iter()
            .zip(&self.gains)
            .map(|(x, g)| x.iter().zip(mat_vec(g, &miss)).map(|(a, b)| a + b).collect())
            .collect()
    }

    /// Fraction of `n` bridges from `x1` to `x2` that stay in `x` at every
    /// grid point.
    pub fn stay_frequency(&self, rng: &mut impl Rng, x1: &[f64], x2: &[f64], x: &HyperRectangle, n: usize) -> f64 {
        let ok = (0..n).filter(|_| self.path(rng, x1, x2).iter().all(|p| x.contains_point(p, 0.0))).count();
        ok as f64 / n as f64
    }
}

/// `p_hat >= bound - 3 sigma` with sigma taken at the bound itself.
pub fn above(p_hat: f64, bound: f64, n: usize) -> bool {
    p_hat >= bound - 3.0 * (bound * (1.0 - bound) / n as f64).sqrt() - 1e-12
}

pub fn below(p_hat: f64, bound: f64, n: usize) -> bool {
    p_hat <= bound + 3.0 * (bound * (1.0 - bound) / n as f64).sqrt() + 1e-12
}
