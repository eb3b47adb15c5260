use super::product::Product;
use super::SynthesisError;
use crate::exec::{map_indexed, Parallelism};
use std::cell::RefCell;

/// Direction of the adversary (or of the controller).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

/// Feasible distribution in `[lo, hi]` that extremises `Σ p_j v_j`, and the
/// extremal value.
///
/// Every entry first gets its lower bound; the remaining mass is then handed
/// out in order of value (ascending for `Min`, descending for `Max`), ties in
/// the original entry order.
pub fn o_extreme(values: &[f64], lo: &[f64], hi: &[f64], sense: Sense) -> Result<(Vec<f64>, f64), SynthesisError> {
    let sl: f64 = lo.iter().sum();
    let sh: f64 = hi.iter().sum();
    if sl > 1.0 + 1e-12 || sh < 1.0 - 1e-12 || lo.iter().zip(hi).any(|(l, h)| l > h) {
        return Err(SynthesisError::InfeasibleRow { sum_lo: sl, sum_hi: sh });
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    sort_order(&mut order, values, sense);
    let mut p = lo.to_vec();
    let mut rest = 1.0 - sl;
    for &j in &order {
        if rest <= 0.0 {
            break;
        }
        let add = (hi[j] - lo[j]).min(rest);
        p[j] += add;
        rest -= add;
    }
    let v = p.iter().zip(values).map(|(a, b)| a * b).sum();
    Ok((p, v))
}

fn sort_order(order: &mut [usize], values: &[f64], sense: Sense) {
    order.sort_by(|&a, &b| {
        let c = values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal);
        let c = if sense == Sense::Max { c.reverse() } else { c };
        c.then(a.cmp(&b))
    });
}

thread_local! {
    static SCRATCH: RefCell<(Vec<f64>, Vec<usize>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

/// Extremal expectation of `values[succ(t)]` over one row, without building
/// the distribution.
#[inline]
fn row_extreme(lo: &[f64], hi: &[f64], vals: impl Iterator<Item = f64>, sense: Sense) -> f64 {
    SCRATCH.with(|s| {
        let (v, order) = &mut *s.borrow_mut();
        v.clear();
        v.extend(vals);
        order.clear();
        order.extend(0..v.len());
        sort_order(order, v, sense);
        let mut total = 0.0;
        let mut rest = 1.0;
        for (l, x) in lo.iter().zip(v.iter()) {
            total += l * x;
            rest -= l;
        }
        for &j in order.iter() {
            if rest <= 0.0 {
                break;
            }
            let add = (hi[j] - lo[j]).min(rest);
            total += add * v[j];
            rest -= add;
        }
        total
    })
}

/// Memoryless strategy on product states. A bounded specification yields
/// one layer per remaining step; an unbounded one a single layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strategy {
    pub n_imdp_states: usize,
    pub n_dfa_states: usize,
    /// `(q, z)` of each product state.
    pub states: Vec<(u32, u32)>,
    /// `layers[j][p]` is the action in product state `p` with `j + 1` steps
    /// to go (only `layers[0]` for unbounded specifications).
    pub layers: Vec<Vec<u16>>,
    index: Vec<u32>,
}

impl Strategy {
    pub fn new(n_imdp_states: usize, n_dfa_states: usize, states: Vec<(u32, u32)>, layers: Vec<Vec<u16>>) -> Self {
        let mut index = vec![u32::MAX; n_imdp_states * n_dfa_states];
        for (p, &(q, z)) in states.iter().enumerate() {
            index[q as usize * n_dfa_states + z as usize] = p as u32;
        }
        Self { n_imdp_states, n_dfa_states, states, layers, index }
    }

    pub fn is_time_varying(&self) -> bool {
        self.layers.len() > 1
    }

    fn position(&self, q: usize, z: usize) -> Option<usize> {
        if q >= self.n_imdp_states || z >= self.n_dfa_states {
            return None;
        }
        let p = self.index[q * self.n_dfa_states + z];
        (p != u32::MAX).then_some(p as usize)
    }

    /// Action in `(q, z)` with `steps_left` steps to go (ignored for
    /// stationary strategies).
    pub fn action(&self, q: usize, z: usize, steps_left: usize) -> Option<usize> {
        let p = self.position(q, z)?;
        let layer = if self.layers.len() == 1 { 0 } else { steps_left.checked_sub(1)?.min(self.layers.len() - 1) };
        Some(self.layers[layer][p] as usize)
    }
}

/// Who picks actions during value iteration.
#[derive(Debug, Clone, Copy)]
pub enum Control<'s> {
    Maximize,
    Minimize,
    Fixed(&'s Strategy),
}

/// Options for value iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationOptions {
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub parallelism: Parallelism,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_sweeps: 100_000, parallelism: Parallelism::default() }
    }
}

/// Outcome of value iteration on a product.
#[derive(Debug, Clone, PartialEq)]
pub struct Iteration {
    pub values: Vec<f64>,
    pub strategy: Strategy,
    pub sweeps: usize,
}

/// Interval value iteration for the probability of reaching an accepting
/// product state, with the adversary resolving each row in direction `adv`.
///
/// Unbounded specifications run Jacobi sweeps from `V0 = 1_acc` until the
/// sup-norm change drops below the tolerance. A strategy's action changes
/// only when the new best value strictly improves on the current one, so
/// the greedy strategy keeps making progress. Bounded specifications run
/// exactly `k` sweeps from `V0 = 1` on accepting and expiry-accepting states
/// and record one layer per sweep.
pub fn iterate(product: &Product<'_>, control: Control<'_>, adv: Sense, opts: &IterationOptions) -> Result<Iteration, SynthesisError> {
    let n = product.len();
    let na = product.imdp.n_actions();
    let horizon = product.dfa.horizon.clone();
    let mut values: Vec<f64> = (0..n)
        .map(|p| {
            let init = if horizon.is_some() { product.expiry_accepting[p] } else { product.accepting[p] };
            if init { 1.0 } else { 0.0 }
        })
        .collect();
    let fixed_actions = |layer: usize, p: usize| -> Option<usize> {
        match control {
            Control::Fixed(s) => {
                let (q, z) = product.states[p];
                let l = if s.layers.len() == 1 { 0 } else { layer.min(s.layers.len() - 1) };
                s.position(q as usize, z as usize).map(|i| s.layers[l][i] as usize)
            }
            _ => None,
        }
    };
    let evaluate = |p: usize, values: &[f64], layer: usize| -> (f64, u16) {
        if product.accepting[p] {
            return (1.0, 0);
        }
        if product.dead[p] {
            return (0.0, 0);
        }
        let (q, z) = (product.states[p].0 as usize, product.states[p].1 as usize);
        let eval_action = |a: usize| {
            let row = product.imdp.row(q, a);
            row_extreme(row.lo, row.hi, row.targets.iter().map(|&t| values[product.successor(z, t as usize)]), adv)
        };
        if let Some(a) = fixed_actions(layer, p) {
            return (eval_action(a), a as u16);
        }
        let mut best = eval_action(0);
        let mut arg = 0;
        for a in 1..na {
            let v = eval_action(a);
            let better = match control {
                Control::Minimize => v < best,
                _ => v > best,
            };
            if better {
                best = v;
                arg = a;
            }
        }
        (best, arg as u16)
    };

    if let Some(h) = horizon {
        let mut layers = Vec::with_capacity(h.steps as usize);
        for layer in 0..h.steps as usize {
            let out = map_indexed(opts.parallelism, n, |p| evaluate(p, &values, layer));
            values = out.iter().map(|o| o.0).collect();
            layers.push(out.iter().map(|o| o.1).collect());
        }
        if layers.is_empty() {
            layers.push(vec![0; n]);
        }
        let strategy = Strategy::new(product.imdp.n_states(), product.dfa.n_states, product.states.clone(), layers);
        return Ok(Iteration { values, strategy, sweeps: h.steps as usize });
    }

    let mut actions = vec![0u16; n];
    for sweep in 1..=opts.max_sweeps {
        let out = map_indexed(opts.parallelism, n, |p| evaluate(p, &values, 0));
        let mut delta: f64 = 0.0;
        for (p, (v, a)) in out.into_iter().enumerate() {
            delta = delta.max((v - values[p]).abs());
            let improved = match control {
                Control::Minimize => v < values[p] - 1e-12,
                _ => v > values[p] + 1e-12,
            };
            if improved || sweep == 1 {
                actions[p] = a;
            }
            values[p] = v;
        }
        if delta < opts.tolerance {
            let strategy = Strategy::new(product.imdp.n_states(), product.dfa.n_states, product.states.clone(), vec![actions]);
            return Ok(Iteration { values, strategy, sweeps: sweep });
        }
    }
    Err(SynthesisError::NonConvergence { sweeps: opts.max_sweeps })
}

/// Lower bounds on the best achievable satisfaction probability and a
/// strategy attaining them (controller maximises, adversary minimises).
pub fn synthesize_lower(product: &Product<'_>, opts: &IterationOptions) -> Result<Iteration, SynthesisError> {
    iterate(product, Control::Maximize, Sense::Min, opts)
}

/// Upper bounds on the satisfaction probability under a fixed strategy
/// (adversary maximises). Product states the strategy does not cover take
/// the best action, which keeps the bound sound.
pub fn upper_under_strategy(product: &Product<'_>, strategy: &Strategy, opts: &IterationOptions) -> Result<Vec<f64>, SynthesisError> {
    iterate(product, Control::Fixed(strategy), Sense::Max, opts).map(|it| it.values)
}

/// Pairing used by [`verify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    /// Bounds under the worst switching: min over actions for both bounds.
    Pessimistic,
    /// Bounds under the best switching: max over actions for both bounds.
    Optimistic,
}

/// Satisfaction bounds without a controller. The lower bound uses the
/// under-labelled product and a minimising adversary, the upper bound the
/// over-labelled product and a maximising adversary; `mode` decides whether
/// actions are chosen adversarially or cooperatively.
pub fn verify(under: &Product<'_>, over: &Product<'_>, mode: VerifyMode, opts: &IterationOptions) -> Result<(Vec<f64>, Vec<f64>), SynthesisError> {
    let control = match mode {
        VerifyMode::Pessimistic => Control::Minimize,
        VerifyMode::Optimistic => Control::Maximize,
    };
    let lo = iterate(under, control, Sense::Min, opts)?;
    let hi = iterate(over, control, Sense::Max, opts)?;
    Ok((under.project(&lo.values), over.project(&hi.values)))
}
