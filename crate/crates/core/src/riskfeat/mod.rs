//! One-sided rule risk features: induction, priors, activation and rendering.

mod induce;
mod rule;

pub use induce::{induce_rules, RuleParams};
pub use rule::{
    activate, estimate_prior, load_ruleset, parse_conjunction, parse_rule, read_ruleset,
    render_conjunction, render_rule, save_ruleset, write_ruleset, ActivationVector, Comparator,
    Predicate, RiskFeature, RuleClass, INITIAL_SIGMA2,
};
