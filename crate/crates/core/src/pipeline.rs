//! Glue from a parsed model and a formula to an abstraction and a strategy.

use crate::abstraction::{build_imdp, discretize, AbstractionError, BuildOptions, Discretization, Imdp};
use crate::bridge::{ct_safety_imdp, ContinuousSystem};
use crate::format::Model;
use crate::logic::{bar_translate, parse, template_dfa, Dfa, DfaError, ParseError, TranslateError};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Dfa(#[from] DfaError),
}

/// Automaton for a formula over the model's regions; negated atoms become
/// complement atoms first.
pub fn formula_dfa(text: &str, regions: &[String]) -> Result<Dfa, SpecError> {
    let f = parse(text)?;
    let f = bar_translate(&f, regions)?;
    Ok(template_dfa(&f)?)
}

/// Discretises the model and builds its IMDP; continuous models go through
/// the bridge construction.
pub fn abstract_model(model: &Model, opts: &BuildOptions) -> Result<(Discretization, Imdp), AbstractionError> {
    let d = discretize(&model.system, &model.discretization)?;
    let imdp = match &model.bridges {
        None => build_imdp(&model.system, &d, opts)?,
        Some(b) => {
            let cs = ContinuousSystem { sampled: model.system.clone(), bridges: b.clone() };
            ct_safety_imdp(&cs, &d, opts)?
        }
    };
    Ok((d, imdp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::parse_model;

    #[test]
    fn negated_atoms_are_translated() {
        let regions = vec!["red".to_string(), "green".to_string()];
        let d = formula_dfa("!red U green", &regions).unwrap();
        assert_eq!(d.atoms, vec!["~red", "green"]);
        assert!(matches!(formula_dfa("!(red & green) U green", &regions), Err(SpecError::Translate(_))));
        assert!(matches!(formula_dfa("G red", &regions), Err(SpecError::Parse(_))));
        assert!(matches!(formula_dfa("F (red U green)", &regions), Err(SpecError::Dfa(_))));
    }

    #[test]
    fn continuous_models_are_dispatched() {
        let txt = "switchsynth-v1 model
dim 1
safe_lower -2
safe_upper 2
continuous 0.1
mode a
  F -1
  G 1
end
dx 0.5
";
        let m = parse_model(txt).unwrap();
        let (_, imdp) = abstract_model(&m, &BuildOptions::default()).unwrap();
        assert_eq!(imdp.n_states(), 9);
        // Every row loses mass to continuous exits, so the sink can receive
        // more than the discrete kernel alone allows.
        let r = imdp.row(3, 0);
        assert!(*r.hi.last().unwrap() > 0.0);
    }
}
