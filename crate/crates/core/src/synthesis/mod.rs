//! Product construction, interval value iteration, strategies and their
//! closed-loop evaluation.

mod control;
mod iteration;
mod product;

pub use control::{monte_carlo, refine_strategy, run_rng, simulate, wilson_interval, Controller, Decision, MonteCarloReport, SimulationResult};
pub use iteration::{
    iterate, o_extreme, synthesize_lower, upper_under_strategy, verify, Control, Iteration, IterationOptions, Sense, Strategy,
    VerifyMode,
};
pub use product::{LabelKind, Product};

use crate::abstraction::Imdp;
use crate::kernel::ProbInterval;
use crate::logic::Dfa;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error("row is infeasible: sum lo = {sum_lo}, sum hi = {sum_hi}")]
    InfeasibleRow { sum_lo: f64, sum_hi: f64 },
    #[error("value iteration did not converge within {sweeps} sweeps")]
    NonConvergence { sweeps: usize },
    #[error("automaton atom {0:?} is not a label of the abstraction")]
    UnknownAtom(String),
}

/// Gap statistics between upper and lower satisfaction bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub max: f64,
    /// Median; the mean of the two middle values for an even count.
    pub median: f64,
    /// Volume-weighted mean.
    pub average: f64,
}

/// Error statistics over the given states (the sink should be excluded by
/// the caller).
pub fn error_metrics(bounds: &[ProbInterval], volumes: &[f64]) -> ErrorMetrics {
    assert_eq!(bounds.len(), volumes.len());
    if bounds.is_empty() {
        return ErrorMetrics { max: 0.0, median: 0.0, average: 0.0 };
    }
    let mut eps: Vec<f64> = bounds.iter().map(|b| (b.hi - b.lo).max(0.0)).collect();
    let total_vol: f64 = volumes.iter().sum();
    let average = eps.iter().zip(volumes).map(|(e, v)| e * v).sum::<f64>() / total_vol;
    eps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = eps.len();
    let median = if n % 2 == 1 { eps[n / 2] } else { 0.5 * (eps[n / 2 - 1] + eps[n / 2]) };
    ErrorMetrics { max: eps[n - 1], median, average }
}

/// Result of synthesis on an IMDP.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOutcome {
    /// Satisfaction bounds per IMDP state (sink last).
    pub bounds: Vec<ProbInterval>,
    /// Mode chosen at the first step from each IMDP state.
    pub actions: Vec<usize>,
    pub strategy: Strategy,
    pub metrics: ErrorMetrics,
    pub sweeps: usize,
}

fn metrics_for(imdp: &Imdp, bounds: &[ProbInterval]) -> ErrorMetrics {
    let n = imdp.states.len();
    let vols: Vec<f64> = imdp.states.iter().map(|s| s.cell.volume()).collect();
    error_metrics(&bounds[..n], &vols)
}

/// Synthesises a strategy maximising the lower bound, then bounds the
/// satisfaction probability from above under that strategy.
pub fn synthesize(imdp: &Imdp, dfa: &Dfa, opts: &IterationOptions) -> Result<SynthesisOutcome, SynthesisError> {
    let under = Product::build(imdp, dfa, LabelKind::Under)?;
    let over = Product::build(imdp, dfa, LabelKind::Over)?;
    let lower = synthesize_lower(&under, opts)?;
    let upper = upper_under_strategy(&over, &lower.strategy, opts)?;
    let lo = under.project(&lower.values);
    let hi = over.project(&upper);
    let bounds: Vec<ProbInterval> = lo.iter().zip(&hi).map(|(&l, &h)| ProbInterval::new(l, h.max(l))).collect();
    let steps = dfa.horizon.as_ref().map_or(0, |h| h.steps as usize);
    let actions = (0..imdp.n_states())
        .map(|q| {
            let (q2, z) = under.states[under.seed(q)];
            lower.strategy.action(q2 as usize, z as usize, steps).unwrap_or(0)
        })
        .collect();
    let metrics = metrics_for(imdp, &bounds);
    Ok(SynthesisOutcome { bounds, actions, strategy: lower.strategy, metrics, sweeps: lower.sweeps })
}

/// Verification bounds per IMDP state and their error metrics.
pub fn verify_bounds(imdp: &Imdp, dfa: &Dfa, mode: VerifyMode, opts: &IterationOptions) -> Result<(Vec<ProbInterval>, ErrorMetrics), SynthesisError> {
    let under = Product::build(imdp, dfa, LabelKind::Under)?;
    let over = Product::build(imdp, dfa, LabelKind::Over)?;
    let (lo, hi) = verify(&under, &over, mode, opts)?;
    let bounds: Vec<ProbInterval> = lo.iter().zip(&hi).map(|(&l, &h)| ProbInterval::new(l, h.max(l))).collect();
    let m = metrics_for(imdp, &bounds);
    Ok((bounds, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{ImdpState, Labels};
    use crate::geometry::HyperRectangle;
    use crate::logic::{parse, template_dfa};

    fn state(under: u64, over: u64) -> ImdpState {
        ImdpState {
            mode: 0,
            cell: HyperRectangle::new(vec![0.0], vec![1.0]).unwrap().to_parallelotope(),
            boundary: false,
            labels: Labels { under, over },
        }
    }

    #[test]
    fn o_extreme_worked_example() {
        let (p, v) = o_extreme(&[0.0, 1.0, 0.5], &[0.1, 0.2, 0.1], &[0.6, 0.7, 0.5], Sense::Min).unwrap();
        for (a, b) in p.iter().zip([0.6, 0.2, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((v - 0.3).abs() < 1e-15);
        let (p, _) = o_extreme(&[0.0, 1.0, 0.5], &[0.1, 0.2, 0.1], &[0.6, 0.7, 0.5], Sense::Max).unwrap();
        assert!((p[1] - 0.7).abs() < 1e-15 && (p[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn o_extreme_ties_follow_entry_order() {
        let (p, _) = o_extreme(&[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], Sense::Min).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn infeasible_row_is_reported() {
        assert!(matches!(o_extreme(&[0.0], &[0.2], &[0.5], Sense::Min), Err(SynthesisError::InfeasibleRow { .. })));
    }

    #[test]
    fn error_metrics_even_median() {
        let b = [ProbInterval::new(0.0, 0.1), ProbInterval::new(0.0, 0.3), ProbInterval::new(0.5, 0.6), ProbInterval::new(0.0, 0.2)];
        let m = error_metrics(&b, &[1.0, 1.0, 1.0, 1.0]);
        assert!((m.median - 0.15).abs() < 1e-12);
        assert!((m.max - 0.3).abs() < 1e-12);
        assert!((m.average - 0.175).abs() < 1e-12);
    }

    /// Two states plus sink; state 0 is green, state 1 neither.
    fn toy() -> Imdp {
        let atoms = vec!["green".to_string(), "~green".to_string()];
        let states = vec![state(0b01, 0b01), state(0b10, 0b11)];
        let rows = vec![
            vec![vec![(0, 1.0, 1.0)], vec![(0, 1.0, 1.0)]],
            // action 0: to green with [0.3, 0.6], stay [0.2, 0.5], sink [0.1, 0.2]
            vec![vec![(0, 0.3, 0.6), (1, 0.2, 0.5), (2, 0.1, 0.2)], vec![(2, 1.0, 1.0)]],
            vec![vec![(2, 1.0, 1.0)], vec![(2, 1.0, 1.0)]],
        ];
        Imdp::from_rows(1, vec!["a".into(), "b".into()], atoms, states, rows)
    }

    #[test]
    fn reachability_on_toy_model() {
        let imdp = toy();
        let dfa = template_dfa(&parse("F green").unwrap()).unwrap();
        let out = synthesize(&imdp, &dfa, &IterationOptions::default()).unwrap();
        // Lower: fixed point of v = 0.3 + 0.5 v -> 0.6 (adversary keeps the
        // most mass on the sink and the self-loop) ...
        // min: p(green)=0.3, then residual 0.4 to lowest values: sink (0) gets
        // 0.1 more, self-loop gets 0.3 -> v = 0.3 + 0.5 v, v = 0.6.
        assert!((out.bounds[1].lo - 0.6).abs() < 1e-5);
        // Upper with over-labels: state 1 may be green, so 1.
        assert!((out.bounds[1].hi - 1.0).abs() < 1e-9);
        assert_eq!(out.actions[1], 0);
        assert_eq!(out.bounds[0].lo, 1.0);
        assert_eq!(out.bounds[2].hi, 0.0);
    }

    #[test]
    fn bounded_reachability_counts_sweeps() {
        let imdp = toy();
        let dfa = template_dfa(&parse("F<=1 green").unwrap()).unwrap();
        let out = synthesize(&imdp, &dfa, &IterationOptions::default()).unwrap();
        assert_eq!(out.sweeps, 1);
        // One step: reach green with at least 0.3.
        assert!((out.bounds[1].lo - 0.3).abs() < 1e-12);
    }

    #[test]
    fn verify_modes_bracket_each_other() {
        let imdp = toy();
        let dfa = template_dfa(&parse("F green").unwrap()).unwrap();
        let o = IterationOptions::default();
        let (pess, _) = verify_bounds(&imdp, &dfa, VerifyMode::Pessimistic, &o).unwrap();
        let (opt, _) = verify_bounds(&imdp, &dfa, VerifyMode::Optimistic, &o).unwrap();
        assert_eq!(pess[1].lo, 0.0); // action b goes straight to the sink
        assert!(opt[1].lo > 0.59);
        for q in 0..3 {
            assert!(pess[q].lo <= opt[q].lo + 1e-12 && pess[q].hi <= opt[q].hi + 1e-12);
        }
    }

    #[test]
    fn unknown_atom_is_rejected() {
        let imdp = toy();
        let dfa = template_dfa(&parse("F blue").unwrap()).unwrap();
        assert!(matches!(synthesize(&imdp, &dfa, &IterationOptions::default()), Err(SynthesisError::UnknownAtom(_))));
    }

    #[test]
    fn wilson_interval_reference_values() {
        // Reference values from an independent statistics package.
        let (lo, hi) = wilson_interval(50, 100).unwrap();
        assert!((lo - 0.375_279_625_044_839_8).abs() < 1e-12 && (hi - 0.624_720_374_955_160_2).abs() < 1e-12);
        let (lo, hi) = wilson_interval(7, 40).unwrap();
        assert!((lo - 0.070_644_235_036_730_15).abs() < 1e-12 && (hi - 0.371_833_353_743_199_7).abs() < 1e-12);
        assert_eq!(wilson_interval(0, 0), None);
        let (lo, _) = wilson_interval(0, 10).unwrap();
        assert_eq!(lo, 0.0);
    }
}
