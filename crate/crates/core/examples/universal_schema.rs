//! With radius 0, size bound 2 and only the two membership atoms per
//! relation as features, every feature vector is the row of relation
//! indicators a universal-schema model would see for the pair.

use gaifman::featurizer::{build_dataset, BuildOptions, Featurizer, Transform};
use gaifman::graph::GaifmanGraph;
use gaifman::kb::KnowledgeBase;
use gaifman::logic::{pair_membership_features, TargetQuery};
use gaifman::sampler::{SamplerConfig, SizeBound};

fn main() -> gaifman::Result<()> {
    let mut kb = KnowledgeBase::new();
    for (h, r, t) in [
        ("turing", "born_in", "london"),
        ("turing", "lived_in", "london"),
        ("turing", "worked_in", "manchester"),
        ("lovelace", "born_in", "london"),
        ("lovelace", "lived_in", "london"),
        ("babbage", "lived_in", "london"),
        ("london", "twinned_with", "manchester"),
    ] {
        kb.add_named(r, &[h, t])?;
    }
    let graph = GaifmanGraph::build(&kb);
    let phi = pair_membership_features(kb.relations());
    let featurizer = Featurizer::new(&phi, &kb, 2, Transform::None)?;
    let config = SamplerConfig {
        radius: 0,
        bound: SizeBound::Bounded(2),
        w: 1,
        w_neg: 0,
        seed: 0,
    };
    let header: Vec<String> = phi.formulas().iter().map(|f| f.to_string()).collect();
    println!("{}", header.join(" | "));
    let ds = build_dataset(
        &kb,
        &graph,
        &TargetQuery::binary("lived_in"),
        &featurizer,
        &config,
        &BuildOptions::default(),
    )?;
    for v in &ds.examples {
        let row: Vec<String> = v.to_dense().iter().map(|x| format!("{x}")).collect();
        println!(
            "{} {}: {}",
            kb.object_name(v.tuple[0]),
            kb.object_name(v.tuple[1]),
            row.join(" ")
        );
    }
    Ok(())
}
