//! Bounded-size neighborhood sampling around a tuple, and corrupted tuples
//! for negative examples.
//!
//!     cargo run --example sample_neighborhoods -- [k] [w] [seed]

use gaifman::graph::GaifmanGraph;
use gaifman::kb::{KnowledgeBase, ObjectId};
use gaifman::sampler::{corrupt, gen_neighs, SamplerConfig, SizeBound};

fn main() -> gaifman::Result<()> {
    let mut args = std::env::args().skip(1);
    let bound: SizeBound = args.next().as_deref().unwrap_or("4").parse()?;
    let w: usize = args.next().map_or(3, |s| s.parse().expect("w"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));

    // two hubs joined by an edge, eight leaves each
    let mut kb = KnowledgeBase::new();
    kb.add_named("link", &["h1", "h2"])?;
    for i in 0..8 {
        kb.add_named("link", &["h1", &format!("x{i}")])?;
        kb.add_named("link", &["h2", &format!("y{i}")])?;
    }
    let graph = GaifmanGraph::build(&kb);
    let tuple = [kb.object_id("h1").unwrap(), kb.object_id("h2").unwrap()];
    let name = |ids: &[ObjectId]| {
        ids.iter()
            .map(|&o| kb.object_name(o))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let config = SamplerConfig {
        radius: 1,
        bound,
        w,
        w_neg: 4,
        seed,
    };
    println!(
        "|N_1(h1, h2)| = {}, k = {bound}",
        graph.neighborhood(&tuple, 1).members.len()
    );
    for s in gen_neighs(&graph, &tuple, &config)? {
        println!("  {{{}}}", name(&s.members));
    }

    let known = |t: &[ObjectId]| kb.holds_args(kb.relation_id("link").unwrap(), t);
    let negatives = corrupt(&kb, &tuple, config.w_neg, seed, Some(&known))?;
    for t in &negatives.tuples {
        println!("negative ({})", name(t));
    }
    Ok(())
}
