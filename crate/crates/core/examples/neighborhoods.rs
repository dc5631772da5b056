//! r-neighborhoods of single objects and of tuples, and the substructures
//! they induce.

use gaifman::graph::GaifmanGraph;
use gaifman::kb::{KnowledgeBase, ObjectId};

fn names(kb: &KnowledgeBase, ids: &[ObjectId]) -> String {
    ids.iter()
        .map(|&o| kb.object_name(o))
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> gaifman::Result<()> {
    // a path a - b - c - d - e plus a ternary fact tying e, f and g
    let mut kb = KnowledgeBase::new();
    for pair in [["a", "b"], ["b", "c"], ["c", "d"], ["d", "e"]] {
        kb.add_named("next", &pair)?;
    }
    kb.add_named("meet", &["e", "f", "g"])?;
    let graph = GaifmanGraph::build(&kb);
    let id = |n: &str| kb.object_id(n).expect("known object");

    for radius in 0..=3 {
        let ball = graph.neighborhood(&[id("c")], radius);
        println!("N_{radius}(c) = {{{}}}", names(&kb, &ball.members));
    }
    // a ternary fact makes all its arguments pairwise adjacent
    println!("neighbors of f: {}", names(&kb, graph.neighbors(id("f"))));

    let tuple = [id("a"), id("e")];
    let ball = graph.neighborhood(&tuple, 1);
    println!("N_1(a, e) = {{{}}}", names(&kb, &ball.members));
    let sub = kb.induce(&ball.members)?;
    for f in sub.facts() {
        println!(
            "  {}",
            kb.format_fact(f, gaifman::kb::TripleFormat::NAry)
                .replace('\t', " ")
        );
    }
    // next(b, c) is not induced: c lies outside the carrier
    Ok(())
}
