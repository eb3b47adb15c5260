use super::iteration::Strategy;
use crate::abstraction::{Discretization, HybridSystem, Imdp};
use crate::exec::{map_indexed, Parallelism};
use crate::linalg::{mat_vec, sqrt_psd, Mat};
use crate::logic::{translate_letter, Dfa};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Switching controller on the continuous state space, obtained from a
/// product strategy. The automaton is driven by the under-labels of the
/// cells the trajectory visits.
pub struct Controller<'a> {
    pub system: &'a HybridSystem,
    pub discretization: &'a Discretization,
    pub dfa: &'a Dfa,
    pub strategy: &'a Strategy,
    offsets: Vec<usize>,
    letters: Vec<u64>,
}

/// One controller decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    /// IMDP state of the cell holding the point, `None` outside the grid.
    pub state: Option<usize>,
    /// Automaton state after reading the cell's label.
    pub dfa_state: usize,
    pub mode: usize,
}

pub fn refine_strategy<'a>(
    system: &'a HybridSystem,
    discretization: &'a Discretization,
    imdp: &Imdp,
    dfa: &'a Dfa,
    strategy: &'a Strategy,
) -> Controller<'a> {
    let mut offsets = Vec::new();
    let mut acc = 0;
    for mg in &discretization.modes {
        offsets.push(acc);
        acc += mg.cells.len();
    }
    let map = dfa.letter_map(&imdp.atoms);
    let letters = (0..imdp.n_states()).map(|q| translate_letter(imdp.under_label(q), &map)).collect();
    Controller { system, discretization, dfa, strategy, offsets, letters }
}

impl Controller<'_> {
    /// Locates `x` in the grid of the current `mode` (ties to the lowest
    /// cell index), advances the automaton from `z` with the cell's label and
    /// returns the strategy's mode for the resulting product state.
    pub fn decide(&self, mode: usize, x: &[f64], z: usize, steps_left: usize) -> Decision {
        let inside = self.system.safe_set.contains_point(x, 0.0);
        let state = if inside {
            self.discretization.modes[mode].locate(x).map(|c| self.offsets[mode] + c)
        } else {
            None
        };
        let letter = state.map_or(0, |q| self.letters[q]);
        let z2 = self.dfa.step(z, letter);
        let next_mode = state.and_then(|q| self.strategy.action(q, z2, steps_left)).unwrap_or(0);
        Decision { state, dfa_state: z2, mode: next_mode }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub satisfied: bool,
    /// Whether the run ended by leaving the safe set.
    pub exited: bool,
    pub path: Vec<(usize, Vec<f64>)>,
}

/// Simulates one closed-loop run from `x0` in `mode0`.
///
/// Leaving the safe set is a failure. A bounded specification is decided
/// after its step budget; an unbounded one fails if undecided after
/// `max_steps`.
pub fn simulate(controller: &Controller<'_>, x0: &[f64], mode0: usize, max_steps: usize, rng: &mut ChaCha8Rng) -> SimulationResult {
    let sys = controller.system;
    let dfa = controller.dfa;
    let dead = dfa.dead_states();
    let budget = dfa.horizon.as_ref().map(|h| h.steps as usize);
    let steps = budget.unwrap_or(max_steps);
    let noise: Vec<Mat> = sys.modes.iter().map(|m| sqrt_psd(&m.dynamics.noise_cov)).collect();
    let mut x = x0.to_vec();
    let mut mode = mode0;
    let mut z = dfa.initial;
    let mut path = vec![(mode, x.clone())];
    for t in 0..=steps {
        if !sys.safe_set.contains_point(&x, 0.0) {
            return SimulationResult { satisfied: false, exited: true, path };
        }
        let d = controller.decide(mode, &x, z, steps - t);
        z = d.dfa_state;
        if dfa.is_accepting(z) {
            return SimulationResult { satisfied: true, exited: false, path };
        }
        if dead[z] {
            return SimulationResult { satisfied: false, exited: false, path };
        }
        if t == steps {
            let ok = budget.is_some() && dfa.is_expiry_accepting(z);
            return SimulationResult { satisfied: ok, exited: false, path };
        }
        let dyn_ = &sys.modes[d.mode].dynamics;
        let r = dyn_.diffusion.ncols();
        let e: Vec<f64> = (0..r).map(|_| StandardNormal.sample(rng)).collect();
        let w = mat_vec(&noise[d.mode], &e);
        let fx = mat_vec(&dyn_.drift, &x);
        let gw = mat_vec(&dyn_.diffusion, &w);
        x = fx.iter().zip(&gw).map(|(a, b)| a + b).collect();
        mode = d.mode;
        path.push((mode, x.clone()));
    }
    unreachable!("loop returns at t == steps")
}

/// Generator for run `run` of a batch seeded with `seed`; independent of the
/// order in which runs are executed.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Two-sided Wilson score interval at 99% confidence.
pub fn wilson_interval(successes: usize, n: usize) -> Option<(f64, f64)> {
    if n == 0 {
        return None;
    }
    let z = 2.575_829_303_548_901;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let den = 1.0 + z * z / nf;
    let center = (p + z * z / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / den;
    Some(((center - half).max(0.0), (center + half).min(1.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub runs: usize,
    pub successes: usize,
    pub exits: usize,
    /// `None` when no runs were requested.
    pub frequency: Option<f64>,
    pub wilson99: Option<(f64, f64)>,
}

/// Runs `runs` independent simulations from the same initial condition.
pub fn monte_carlo(
    controller: &Controller<'_>,
    x0: &[f64],
    mode0: usize,
    runs: usize,
    seed: u64,
    max_steps: usize,
    par: Parallelism,
) -> MonteCarloReport {
    let out = map_indexed(par, runs, |i| {
        let mut rng = run_rng(seed, i as u64);
        let r = simulate(controller, x0, mode0, max_steps, &mut rng);
        (r.satisfied, r.exited)
    });
    let successes = out.iter().filter(|o| o.0).count();
    let exits = out.iter().filter(|o| o.1).count();
    MonteCarloReport {
        runs,
        successes,
        exits,
        frequency: (runs > 0).then(|| successes as f64 / runs as f64),
        wilson99: wilson_interval(successes, runs),
    }
}
