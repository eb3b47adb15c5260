//! Specifications: formulas, their negation-free translation, and the
//! automata used for synthesis.

mod dfa;
mod formula;

pub use dfa::{
    parse_guard, read_dfa, template_dfa, translate_letter, write_dfa, Dfa, DfaError, Guard, Horizon, DFA_HEADER,
    MAX_ATOMS,
};
pub use formula::{
    atoms, bar_translate, classify, evaluate_prefix, parse, Formula, Fragment, ParseError, TranslateError, Verdict,
};
