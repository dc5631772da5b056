//! First-order formulas: syntax, parsing, evaluation over substructures,
//! target-query result sets and feature sets.

mod ast;
mod eval;
mod features;
mod parser;
mod query;

pub use ast::{Atom, Formula, Term};
pub use eval::{relativized_count, relativized_evaluate, CompiledFormula};
pub use features::{
    default_feature_set, pair_membership_features, relation_templates, two_hop_path_features,
    FeatureSet, FeatureSource,
};
pub use parser::{parse, parse_with};
pub use query::{result_set, TargetQuery};
