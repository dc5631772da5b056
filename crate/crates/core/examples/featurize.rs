//! Feature vectors of a tuple over sampled neighborhoods, with the default
//! per-relation templates plus a few custom formulas.

use gaifman::featurizer::{Featurizer, Transform};
use gaifman::graph::GaifmanGraph;
use gaifman::kb::KnowledgeBase;
use gaifman::logic::{default_feature_set, FeatureSet};
use gaifman::sampler::{NeighborhoodSampler, SizeBound};

fn main() -> gaifman::Result<()> {
    let mut kb = KnowledgeBase::new();
    for (h, r, t) in [
        ("paris", "capital_of", "france"),
        ("lyon", "city_in", "france"),
        ("paris", "city_in", "france"),
        ("france", "borders", "spain"),
        ("spain", "borders", "france"),
        ("madrid", "capital_of", "spain"),
        ("madrid", "city_in", "spain"),
    ] {
        kb.add_named(r, &[h, t])?;
    }
    let graph = GaifmanGraph::build(&kb);

    let mut phi = default_feature_set(kb.relations())?;
    let custom = FeatureSet::parse_text(
        "# cities the second argument contains\n\
         city_in(u1, s2)\n\
         exists c . capital_of(c, s2) & borders(s2, s1)\n",
        Some(&kb),
    )?;
    phi.extend(custom.formulas().iter().cloned());
    println!("|phi| = {}  hash {}", phi.len(), phi.content_hash());

    let featurizer = Featurizer::new(&phi, &kb, 2, Transform::Log1p)?;
    let tuple = [
        kb.object_id("paris").unwrap(),
        kb.object_id("france").unwrap(),
    ];
    let mut sampler = NeighborhoodSampler::new(&graph, 1, SizeBound::Bounded(3), 1);
    for members in sampler.sample(&tuple, 4, 0) {
        let sub = kb.induce(&members)?;
        let v = featurizer.featurize(&sub, &tuple)?;
        let names: Vec<&str> = members.iter().map(|&o| kb.object_name(o)).collect();
        println!("neighborhood {names:?}");
        for &(i, x) in v.entries() {
            println!("  {x:>6.3}  {}", phi.formulas()[i as usize]);
        }
    }
    Ok(())
}
