//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Failing criteria are reported
//! but do not fail `cargo test` unless `ACCEPTANCE_STRICT=1` is set.

mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};
use switchsynth::abstraction::*;
use switchsynth::bridge::*;
use switchsynth::exec::Parallelism;
use switchsynth::geometry::{HyperRectangle, Parallelotope};
use switchsynth::kernel::*;
use switchsynth::linalg::{from_rows, identity};
use switchsynth::logic::{parse, template_dfa};
use switchsynth::pipeline::formula_dfa;
use switchsynth::synthesis::*;

// Criterion 1
const CS1_SIDES: [usize; 5] = [19, 25, 38, 51, 61];
const CS1_EPS_MAX: [f64; 5] = [0.211, 0.163, 0.109, 0.082, 0.068];
const CS1_TOL: f64 = 0.03;
const CS1_RUNTIME: Duration = Duration::from_secs(60);
// Criterion 2
const HORIZONS: [u32; 6] = [2, 5, 10, 25, 50, 100];
const HORIZON_LIMIT: f64 = 0.05;
// Criterion 3
const DIM_EPS_MAX: f64 = 0.05;
const DIM_RUNTIME: Duration = Duration::from_secs(600);
// Criterion 4
const CS2_STARTS: usize = 10;
const CS2_RUNS: usize = 10_000;
const CS2_MAX_STEPS: usize = 5_000;
// Criterion 5
const ORACLE_ROWS: usize = 10_000;
const ORACLE_CELLS: usize = 100;
const KKT_INSTANCES: usize = 1_000;
const KKT_TOL: f64 = 1e-6;
const CONCAVITY_TUPLES: usize = 1_000;
const ADVERSARY_FIXTURES: usize = 300;
// Criterion 6
const OU_TOL: f64 = 1e-10;
const PINNING_TOL: f64 = 1e-8;
const BRIDGE_INSTANCES: usize = 50;
const BRIDGE_PAIRS: usize = 1_000;
const CT_BOUNDARY_LO: f64 = 0.05;
const CT_INTERIOR_EPS: f64 = 0.15;
const CT_INTERIOR_MARGIN: f64 = 2.0;

struct Report {
    lines: Vec<(String, bool)>,
}

impl Report {
    fn check(&mut self, id: &str, ok: bool, detail: String) {
        println!("{} [{id}] {detail}", if ok { "PASS" } else { "FAIL" });
        self.lines.push((id.to_string(), ok));
    }

    fn note(&self, text: String) {
        println!("     {text}");
    }
}

fn mode(name: &str, f: &[f64], g: &[f64]) -> Mode {
    let m = (f.len() as f64).sqrt() as usize;
    let d = ModeDynamics::new(from_rows(m, m, f), from_rows(m, g.len() / m, g), identity(g.len() / m)).unwrap();
    Mode { name: name.into(), dynamics: d }
}

fn cube(d: usize, half: f64) -> HyperRectangle {
    HyperRectangle::new(vec![-half; d], vec![half; d]).unwrap()
}

fn cs1_system() -> HybridSystem {
    let x = cube(2, 1.0);
    HybridSystem::new(
        vec![mode("a", &[0.85, 0.0, 0.0, 0.90], &[0.15, 0.0, 0.0, 0.05])],
        x.clone(),
        vec![Region { label: "X".into(), polytope: x.to_polytope() }],
    )
    .unwrap()
}

fn uniform(dx: f64) -> DiscretizationSpec {
    DiscretizationSpec { dx, adaptive: None }
}

fn opts(par: Parallelism) -> IterationOptions {
    IterationOptions { parallelism: par, ..IterationOptions::default() }
}

fn build(h: &HybridSystem, spec: &DiscretizationSpec, par: Parallelism) -> (Discretization, Imdp) {
    let d = discretize(h, spec).unwrap();
    let imdp = build_imdp(h, &d, &BuildOptions { parallelism: par, ..BuildOptions::default() }).unwrap();
    (d, imdp)
}

fn dfa(f: &str) -> switchsynth::logic::Dfa {
    template_dfa(&parse(f).unwrap()).unwrap()
}

fn criterion_1(r: &mut Report) {
    let h = cs1_system();
    let mut eps = Vec::new();
    let mut within = true;
    let mut first_time = Duration::ZERO;
    for (i, &n) in CS1_SIDES.iter().enumerate() {
        let t = Instant::now();
        let par = if i == 0 { Parallelism::Sequential } else { Parallelism::default() };
        let (d, imdp) = build(&h, &uniform(2.0 / n as f64), par);
        let out = synthesize(&imdp, &dfa("G<=2 X"), &opts(par)).unwrap();
        if i == 0 {
            first_time = t.elapsed();
        }
        let e = out.metrics.max;
        within &= (e - CS1_EPS_MAX[i]).abs() <= CS1_TOL;
        r.note(format!(
            "{} cells: eps_max {e:.4} (target {:.3}), eps_med {:.4}, eps_ave {:.4}, {:.2?}",
            d.total_cells(),
            CS1_EPS_MAX[i],
            out.metrics.median,
            out.metrics.average,
            t.elapsed()
        ));
        eps.push(e);
    }
    let decreasing = eps.windows(2).all(|w| w[1] < w[0]);
    r.check("1", within && decreasing, format!("CS1 eps_max within +-{CS1_TOL} of the reference and strictly decreasing"));
    r.check(
        "1-time",
        first_time < CS1_RUNTIME,
        format!("361-cell abstraction and synthesis single-threaded in {first_time:.2?} (limit {CS1_RUNTIME:?})"),
    );
}

fn criterion_2(r: &mut Report) {
    let h = cs1_system();
    let (d, imdp) = build(&h, &uniform(2.0 / 51.0), Parallelism::default());
    let mut eps = Vec::new();
    let mut last = None;
    for &k in &HORIZONS {
        let out = synthesize(&imdp, &dfa(&format!("G<={k} X")), &opts(Parallelism::default())).unwrap();
        let top = out.bounds[..imdp.states.len()].iter().map(|b| b.hi).fold(0.0, f64::max);
        let low = out.bounds[..imdp.states.len()].iter().map(|b| b.lo).fold(0.0, f64::max);
        r.note(format!("k={k}: eps_max {:.4}, max lo {low:.4}, max hi {top:.4}", out.metrics.max));
        eps.push(out.metrics.max);
        last = Some((out, low, top));
    }
    let (out, low, top) = last.unwrap();
    let non_increasing = eps.windows(2).all(|w| w[1] <= w[0]);
    // Independent look at the true probability the bounds should enclose.
    let strategy = out.strategy.clone();
    let f = dfa("G<=100 X");
    let c = refine_strategy(&h, &d, &imdp, &f, &strategy);
    let mc = monte_carlo(&c, &[0.0, 0.0], 0, 2000, 11, 0, Parallelism::default());
    let (wl, wh) = mc.wilson99.unwrap();
    r.note(format!("Monte Carlo P(G<=100 X) from the origin: {:.4} (99% CI [{wl:.4}, {wh:.4}])", mc.frequency.unwrap()));
    let q0 = d.modes[0].locate(&[0.0, 0.0]).unwrap();
    r.note(format!("bounds at the origin cell: [{:.4}, {:.4}]", out.bounds[q0].lo, out.bounds[q0].hi));
    r.check(
        "2",
        eps[eps.len() - 1] < HORIZON_LIMIT && non_increasing && low < HORIZON_LIMIT && top < HORIZON_LIMIT,
        format!("CS1 horizon sweep: eps_max(100) < {HORIZON_LIMIT}, non-increasing in k, bounds vanish at k=100"),
    );
}

fn criterion_3(r: &mut Report) {
    let mut ok = true;
    let mut t7 = Duration::ZERO;
    for d in 2..=7 {
        let t = Instant::now();
        let f: Vec<f64> = (0..d * d).map(|k| if k % (d + 1) == 0 { -0.95 } else { 0.0 }).collect();
        let g: Vec<f64> = (0..d * d).map(|k| if k % (d + 1) == 0 { 0.1 } else { 0.0 }).collect();
        let x = cube(d, 1.0);
        let h = HybridSystem::new(vec![mode("a", &f, &g)], x.clone(), vec![Region { label: "X".into(), polytope: x.to_polytope() }])
            .unwrap();
        let (disc, imdp) = build(&h, &uniform(1.0), Parallelism::default());
        let out = synthesize(&imdp, &dfa("G<=50 X"), &opts(Parallelism::default())).unwrap();
        let el = t.elapsed();
        if d == 7 {
            t7 = el;
        }
        ok &= out.metrics.max <= DIM_EPS_MAX;
        r.note(format!("d={d}: {} cells, eps_max {:.4}, {el:.2?}", disc.total_cells(), out.metrics.max));
        if d == 2 {
            // The true probability varies across a single cell by more than
            // the target, so no sound interval for that cell can be narrower.
            let f = dfa("G<=50 X");
            let c = refine_strategy(&h, &disc, &imdp, &f, &out.strategy);
            let inner = monte_carlo(&c, &[0.01, 0.01], 0, 4000, 31, 0, Parallelism::default());
            let corner = monte_carlo(&c, &[0.99, 0.99], 0, 4000, 32, 0, Parallelism::default());
            r.note(format!(
                "d=2 Monte Carlo within the cell [0,1]^2: P from (0.01,0.01) {:.4}, from (0.99,0.99) {:.4}",
                inner.frequency.unwrap(),
                corner.frequency.unwrap()
            ));
        }
    }
    r.check("3", ok, format!("dimensional scaling d=2..7: eps_max <= {DIM_EPS_MAX}"));
    r.check("3-time", t7 < DIM_RUNTIME, format!("d=7 pipeline in {t7:.2?} (limit {DIM_RUNTIME:?})"));
}

fn cs2_system() -> HybridSystem {
    HybridSystem::new(
        vec![
            mode("a1", &[0.1, 0.9, 0.8, 0.2], &[0.3, 0.1, 0.1, 0.2]),
            mode("a2", &[0.8, 0.2, 0.1, 0.9], &[0.2, 0.0, 0.0, 0.1]),
        ],
        cube(2, 2.0),
        vec![
            Region { label: "green".into(), polytope: HyperRectangle::new(vec![1.0, 1.0], vec![2.0, 2.0]).unwrap().to_polytope() },
            Region { label: "red".into(), polytope: HyperRectangle::new(vec![-0.5, -1.5], vec![0.5, -0.5]).unwrap().to_polytope() },
        ],
    )
    .unwrap()
}

fn criterion_4(r: &mut Report) {
    let t = Instant::now();
    let h = cs2_system();
    let spec = DiscretizationSpec { dx: 0.13, adaptive: Some(AdaptiveSpec { dx_min: 0.05, refine_regions: true }) };
    let (d, imdp) = build(&h, &spec, Parallelism::default());
    let f = formula_dfa("!red U green", &["green".into(), "red".into()]).unwrap();
    let out = match synthesize(&imdp, &f, &opts(Parallelism::default())) {
        Ok(o) => o,
        Err(e) => {
            r.check("4", false, format!("CS2 synthesis failed: {e}"));
            return;
        }
    };
    r.note(format!(
        "{} cells, {} sweeps, eps_max {:.4}, eps_med {:.4}, eps_ave {:.4}, {:.2?}",
        d.total_cells(),
        out.sweeps,
        out.metrics.max,
        out.metrics.median,
        out.metrics.average,
        t.elapsed()
    ));
    let c = refine_strategy(&h, &d, &imdp, &f, &out.strategy);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let interior: Vec<usize> = (0..imdp.states.len()).filter(|&q| !imdp.states[q].boundary).collect();
    let mut ok = true;
    for i in 0..CS2_STARTS {
        let q = interior[rng.random_range(0..interior.len())];
        let s = &imdp.states[q];
        let x0 = s.cell.center();
        let mc = monte_carlo(&c, &x0, s.mode, CS2_RUNS, 100 + i as u64, CS2_MAX_STEPS, Parallelism::default());
        let (wl, wh) = mc.wilson99.unwrap();
        let p = mc.frequency.unwrap();
        let w = 0.5 * (wh - wl);
        let b = out.bounds[q];
        let inside = p >= b.lo - w && p <= b.hi + w;
        ok &= inside;
        r.note(format!(
            "start ({:+.3}, {:+.3}) mode {}: MC {p:.4} +- {w:.4}, bounds [{:.4}, {:.4}]{}",
            x0[0],
            x0[1],
            s.mode,
            b.lo,
            b.hi,
            if inside { "" } else { "  <-- outside" }
        ));
    }
    r.check("4", ok, format!("CS2 !red U green: Monte Carlo frequency in [lo - w, hi + w] at {CS2_STARTS} starts"));
}

fn criterion_5(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    let mut worst: f64 = 0.0;
    for i in 0..ORACLE_ROWS {
        let n = rng.random_range(1..8);
        let (lo, hi) = feasible_row(&mut rng, n);
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let min = i % 2 == 0;
        let (_, val) = o_extreme(&v, &lo, &hi, if min { Sense::Min } else { Sense::Max }).unwrap();
        worst = worst.max((val - brute_row(&v, &lo, &hi, min)).abs());
    }
    r.check("5-lp", worst <= 1e-12, format!("o_extreme vs vertex enumeration on {ORACLE_ROWS} rows: max gap {worst:.2e}"));

    let mut bad = 0;
    let n = 4000;
    for _ in 0..ORACLE_CELLS {
        let f: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = [rng.random_range(0.1..0.6), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(0.1..0.6)];
        let d = ModeDynamics::new(from_rows(2, 2, &f), from_rows(2, 2, &g), identity(2)).unwrap();
        let w = whitening(&d).unwrap();
        let (x, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let src = HyperRectangle::new(vec![x, y], vec![x + 0.3, y + 0.3]).unwrap().to_parallelotope();
        let c = switchsynth::linalg::mat_vec(&(&w.transform * &d.drift), &src.center());
        let (cx, cy) = (c[0] + rng.random_range(-2.0..2.0), c[1] + rng.random_range(-2.0..2.0));
        let rect = HyperRectangle::new(vec![cx, cy], vec![cx + rng.random_range(0.2..2.0), cy + rng.random_range(0.2..2.0)]).unwrap();
        let b = transition_bounds(&src, &d, &w, &rect, MaxMethod::Auto).unwrap();
        let p = uniform_in(&mut rng, &src);
        let freq = mc_transition(&mut rng, &d, &w, &p, &rect, n);
        if !(above(freq, b.lo, n) && below(freq, b.hi, n)) {
            bad += 1;
        }
    }
    r.check("5-mc", bad == 0, format!("transition bounds bracket Monte Carlo (3 sigma) on {ORACLE_CELLS} cells: {bad} misses"));

    let mut gap: f64 = 0.0;
    let mut errors = 0;
    let mut done = 0;
    while done < KKT_INSTANCES {
        let gm = from_rows(2, 2, &[0, 1, 2, 3].map(|_| rng.random_range(-1.5..1.5)));
        if gm.determinant().abs() < 0.05 {
            continue;
        }
        let p = Parallelotope::new(vec![rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)], gm).unwrap();
        let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let rect = HyperRectangle::new(vec![a, b], vec![a + rng.random_range(0.05..3.0), b + rng.random_range(0.05..3.0)]).unwrap();
        match (max_f_kkt(Domain::Parallelotope(&p), &rect), max_f_gradient(&p, &rect)) {
            (Ok(k), Ok(g)) => gap = gap.max((k.value - g.value).abs()),
            _ => errors += 1,
        }
        done += 1;
    }
    r.check(
        "5-kkt",
        gap < KKT_TOL && errors == 0,
        format!("KKT vs gradient on {KKT_INSTANCES} 2D instances: max gap {gap:.2e}, {errors} errors"),
    );

    let mut viol = 0;
    for _ in 0..CONCAVITY_TUPLES {
        let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let rect = HyperRectangle::new(vec![a, b], vec![a + rng.random_range(0.05..3.0), b + rng.random_range(0.05..3.0)]).unwrap();
        let x = [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)];
        let y = [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)];
        let t: f64 = rng.random();
        let mid = [t * x[0] + (1.0 - t) * y[0], t * x[1] + (1.0 - t) * y[1]];
        let rhs = t * log_f(&x, &rect) + (1.0 - t) * log_f(&y, &rect);
        if log_f(&mid, &rect) < rhs - 1e-9 * rhs.abs().max(1.0) {
            viol += 1;
        }
    }
    r.check("5-concave", viol == 0, format!("log-concavity on {CONCAVITY_TUPLES} tuples: {viol} violations"));

    let mut mismatch = 0;
    let f = dfa("F<=2 green");
    let mut fixtures = ChaCha8Rng::seed_from_u64(0x5eed);
    for i in 0..ADVERSARY_FIXTURES {
        let imdp = random_imdp(&mut fixtures, 1 + i % 4, 1 + i % 2);
        let out = synthesize(&imdp, &f, &IterationOptions::default()).unwrap();
        let brute = exhaustive_bounded_reach(&imdp, 2);
        if out.bounds.iter().zip(&brute).any(|(b, v)| (b.lo - v).abs() > 1e-12) {
            mismatch += 1;
        }
    }
    r.check(
        "5-adversary",
        mismatch == 0,
        format!("value iteration vs exhaustive adversary on {ADVERSARY_FIXTURES} fixtures (<=4 states, <=2 actions, 2 steps): {mismatch} mismatches"),
    );
}

fn ou_closed_form_gap() -> f64 {
    let mut gap: f64 = 0.0;
    for (a, q, dt) in [(-1.0, 1.0, 0.1), (-0.5, 2.0, 1.0), (-3.0, 0.5, 0.5), (-1.0, 1.0, 2.0)] {
        let ct = CtModeDynamics::new(from_rows(1, 1, &[a]), from_rows(1, 1, &[q]), dt).unwrap();
        let s = sample_dynamics(&ct, &identity(1)).unwrap();
        let exact = q * q * ((2.0 * a * dt).exp() - 1.0) / (2.0 * a);
        gap = gap.max((s.step_covariance()[(0, 0)] - exact).abs());
    }
    gap
}

fn pinning_gap(rng: &mut ChaCha8Rng) -> f64 {
    let mut gap: f64 = 0.0;
    for _ in 0..20 {
        let f = [-rng.random_range(0.2..2.0), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), -rng.random_range(0.2..2.0)];
        let ct = CtModeDynamics::new(from_rows(2, 2, &f), identity(2), rng.random_range(0.05..1.0)).unwrap();
        let model = BridgeModel::new(&ct, &identity(2)).unwrap();
        let x1 = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let x2 = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        for (t, x) in [(0.0, x1), (ct.dt, x2)] {
            let (m, c) = model.moments(&x1, &x2, t);
            gap = gap.max((m[0] - x[0]).abs()).max((m[1] - x[1]).abs()).max(c.abs().max());
        }
    }
    gap
}

fn criterion_6(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let g = ou_closed_form_gap();
    r.check("6-ou", g <= OU_TOL, format!("OU sampled covariance vs closed form: max gap {g:.2e}"));
    let g = pinning_gap(&mut rng);
    r.check("6-pin", g <= PINNING_TOL, format!("bridge endpoint pinning: max gap {g:.2e}"));

    let mut misses = 0;
    let n = 1000;
    for _ in 0..BRIDGE_INSTANCES {
        let half = [1.0, 2.0, 8.0][rng.random_range(0..3)];
        let x = cube(2, half);
        let f = [-rng.random_range(0.2..2.0), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), -rng.random_range(0.2..2.0)];
        let gd = [rng.random_range(0.3..1.5), 0.0, 0.0, rng.random_range(0.3..1.5)];
        let ct = CtModeDynamics::new(from_rows(2, 2, &f), from_rows(2, 2, &gd), 0.1).unwrap();
        let model = BridgeModel::new(&ct, &identity(2)).unwrap();
        let mut cell = || {
            let c: Vec<f64> = (0..2).map(|_| rng.random_range(-half..half - 0.5)).collect();
            HyperRectangle::new(c.clone(), c.iter().map(|v| v + 0.5).collect()).unwrap().to_parallelotope()
        };
        let (qi, qj) = (cell(), cell());
        let lo = tc_lower(&model, &qi, &qj, &x);
        let hi = tc_upper(&model, &qi, &qj, &x).unwrap();
        let sampler = BridgeSampler::new(&model, 100);
        let (x1, x2) = (uniform_in(&mut rng, &qi), uniform_in(&mut rng, &qj));
        let freq = sampler.stay_frequency(&mut rng, &x1, &x2, &x, n);
        if !(above(freq, lo, n) && below(freq, hi, n)) || lo > hi {
            misses += 1;
        }
    }
    r.check("6-tc", misses == 0, format!("tc_lower <= MC <= tc_upper (3 sigma) on {BRIDGE_INSTANCES} instances: {misses} misses"));

    let mut viol = 0;
    for _ in 0..BRIDGE_PAIRS {
        let f = [-rng.random_range(0.1..3.0), 0.0, 0.0, -rng.random_range(0.1..3.0)];
        let gd = [rng.random_range(0.1..2.0), 0.0, 0.0, rng.random_range(0.1..2.0)];
        let dt = rng.random_range(0.05..1.0);
        let model = BridgeModel::new(&CtModeDynamics::new(from_rows(2, 2, &f), from_rows(2, 2, &gd), dt).unwrap(), &identity(2)).unwrap();
        let x1 = [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)];
        let x2 = [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)];
        let (m, _) = model.moments(&x1, &x2, rng.random_range(0.0..dt));
        if (0..2).any(|i| m[i].abs() > x1[i].abs().max(x2[i].abs()) + 1e-12) {
            viol += 1;
        }
    }
    r.check("6-diag", viol == 0, format!("diagonal bridge mean magnitude invariant on {BRIDGE_PAIRS} pairs: {viol} violations"));

    continuous_case_study(r);
}

fn continuous_case_study(r: &mut Report) {
    let t = Instant::now();
    let x = cube(2, 8.0);
    let ct = CtModeDynamics::new(from_rows(2, 2, &[-1.0, 0.0, 0.0, -0.5]), identity(2), 0.1).unwrap();
    let sys = ContinuousSystem::new(vec![("a".into(), ct, identity(2))], x.clone(), vec![Region { label: "X".into(), polytope: x.to_polytope() }])
        .unwrap();
    let d = discretize(&sys.sampled, &uniform(0.5)).unwrap();
    let imdp = ct_safety_imdp(&sys, &d, &BuildOptions::default()).unwrap();
    let out = synthesize(&imdp, &dfa("G<=10 X"), &IterationOptions::default()).unwrap();
    let cells: Vec<&Parallelotope> = imdp.states.iter().map(|s| &s.cell).collect();
    let mut boundary_lo: f64 = 0.0;
    let mut interior_eps: f64 = 0.0;
    for (q, c) in cells.iter().enumerate() {
        let m = margin(c, &x);
        if m <= 1e-12 {
            boundary_lo = boundary_lo.max(out.bounds[q].lo);
        }
        if m > CT_INTERIOR_MARGIN {
            interior_eps = interior_eps.max(out.bounds[q].width());
        }
    }
    let q0 = d.modes[0].locate(&[0.1, 0.1]).unwrap();
    r.note(format!(
        "{} cells, eps_max {:.4}, eps_med {:.4}, eps_ave {:.4}, origin cell [{:.4}, {:.4}], {:.2?}",
        d.total_cells(),
        out.metrics.max,
        out.metrics.median,
        out.metrics.average,
        out.bounds[q0].lo,
        out.bounds[q0].hi,
        t.elapsed()
    ));
    r.note(format!("bridge constants: K {:?}, xi {:?}, Dudley term {:?}", sys.bridges[0].k, sys.bridges[0].xi, sys.bridges[0].dudley));
    r.check("6-ct-boundary", boundary_lo < CT_BOUNDARY_LO, format!("continuous case study: boundary-cell lower bounds <= {boundary_lo:.4}"));
    r.check(
        "6-ct-interior",
        interior_eps < CT_INTERIOR_EPS,
        format!("continuous case study: worst eps more than {CT_INTERIOR_MARGIN} from the boundary {interior_eps:.4} (limit {CT_INTERIOR_EPS})"),
    );
    r.check(
        "6-ct-median",
        out.metrics.median < out.metrics.average,
        format!("continuous case study: eps_med {:.4} < eps_ave {:.4}", out.metrics.median, out.metrics.average),
    );
}

fn main() {
    let mut r = Report { lines: Vec::new() };
    let start = Instant::now();
    type Criterion = fn(&mut Report);
    let all: [(&str, Criterion); 6] = [
        ("CS1 error reproduction", criterion_1),
        ("horizon behaviour", criterion_2),
        ("dimensional scaling", criterion_3),
        ("CS2 synthesis", criterion_4),
        ("oracle suite", criterion_5),
        ("bridge suite", criterion_6),
    ];
    for (i, (name, f)) in all.iter().enumerate() {
        println!("== criterion {} ({name})", i + 1);
        f(&mut r);
    }
    let failed: Vec<&str> = r.lines.iter().filter(|l| !l.1).map(|l| l.0.as_str()).collect();
    println!(
        "acceptance: {} of {} checks passed in {:.1?}{}",
        r.lines.len() - failed.len(),
        r.lines.len(),
        start.elapsed(),
        if failed.is_empty() { String::new() } else { format!("; failing: {}", failed.join(", ")) }
    );
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
