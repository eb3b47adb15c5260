use super::SynthesisError;
use crate::abstraction::Imdp;
use crate::logic::{translate_letter, Dfa};
use std::collections::VecDeque;

/// Which labelling drives the automaton.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    /// Propositions that hold on the whole cell (for lower bounds).
    Under,
    /// Propositions that hold somewhere on the cell (for upper bounds).
    Over,
}

const ABSENT: u32 = u32::MAX;

/// Product of an IMDP with a DFA, restricted to states reachable from the
/// seeds `(q, τ(z0, L(q)))`. Rows are borrowed from the IMDP; only the
/// product index of each successor is computed.
pub struct Product<'a> {
    pub imdp: &'a Imdp,
    pub dfa: &'a Dfa,
    pub kind: LabelKind,
    /// `(q, z)` of every product state.
    pub states: Vec<(u32, u32)>,
    index: Vec<u32>,
    letters: Vec<u64>,
    pub accepting: Vec<bool>,
    pub expiry_accepting: Vec<bool>,
    pub dead: Vec<bool>,
}

impl<'a> Product<'a> {
    pub fn build(imdp: &'a Imdp, dfa: &'a Dfa, kind: LabelKind) -> Result<Self, SynthesisError> {
        if let Some(a) = dfa.atoms.iter().find(|a| !imdp.atoms.contains(a)) {
            return Err(SynthesisError::UnknownAtom(a.clone()));
        }
        let map = dfa.letter_map(&imdp.atoms);
        let nq = imdp.n_states();
        let nz = dfa.n_states;
        let letters: Vec<u64> = (0..nq)
            .map(|q| {
                let m = match kind {
                    LabelKind::Under => imdp.under_label(q),
                    LabelKind::Over => imdp.over_label(q),
                };
                translate_letter(m, &map)
            })
            .collect();
        let dead_z = dfa.dead_states();
        let mut index = vec![ABSENT; nq * nz];
        let mut states = Vec::new();
        let mut queue = VecDeque::new();
        let mut visit = |q: usize, z: usize, states: &mut Vec<(u32, u32)>, queue: &mut VecDeque<usize>| {
            let k = q * nz + z;
            if index[k] == ABSENT {
                index[k] = states.len() as u32;
                states.push((q as u32, z as u32));
                queue.push_back(states.len() - 1);
            }
        };
        for q in 0..nq {
            visit(q, dfa.step(dfa.initial, letters[q]), &mut states, &mut queue);
        }
        while let Some(p) = queue.pop_front() {
            let (q, z) = (states[p].0 as usize, states[p].1 as usize);
            if dfa.is_accepting(z) || dead_z[z] {
                continue;
            }
            for a in 0..imdp.n_actions() {
                for &t in imdp.row(q, a).targets {
                    let t = t as usize;
                    visit(t, dfa.step(z, letters[t]), &mut states, &mut queue);
                }
            }
        }
        let accepting = states.iter().map(|&(_, z)| dfa.is_accepting(z as usize)).collect();
        let expiry_accepting = states.iter().map(|&(_, z)| dfa.is_expiry_accepting(z as usize)).collect();
        let dead = states.iter().map(|&(_, z)| dead_z[z as usize]).collect();
        Ok(Self { imdp, dfa, kind, states, index, letters, accepting, expiry_accepting, dead })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Product index of `(q, z)`, if reachable.
    pub fn index_of(&self, q: usize, z: usize) -> Option<usize> {
        let v = self.index[q * self.dfa.n_states + z];
        (v != ABSENT).then_some(v as usize)
    }

    /// Product state entered when the run starts in IMDP state `q`.
    pub fn seed(&self, q: usize) -> usize {
        let z = self.dfa.step(self.dfa.initial, self.letters[q]);
        self.index_of(q, z).expect("seeds are always present")
    }

    /// Product index of the successor reached by moving to IMDP state `t`
    /// from DFA state `z`.
    #[inline]
    pub fn successor(&self, z: usize, t: usize) -> usize {
        let z2 = self.dfa.step(z, self.letters[t]);
        self.index[t * self.dfa.n_states + z2] as usize
    }

    /// DFA letter of IMDP state `q` under this product's labelling.
    pub fn letter(&self, q: usize) -> u64 {
        self.letters[q]
    }

    /// Value of each IMDP state, read at its seed.
    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        (0..self.imdp.n_states()).map(|q| values[self.seed(q)]).collect()
    }
}
