//! Parsing formulas, model checking them on induced substructures, counting
//! groundings, and the relativized route that never builds a substructure.

use gaifman::graph::GaifmanGraph;
use gaifman::kb::KnowledgeBase;
use gaifman::logic::{
    parse_with, relativized_count, relativized_evaluate, result_set, CompiledFormula, TargetQuery,
};

fn main() -> gaifman::Result<()> {
    let mut kb = KnowledgeBase::new();
    for (h, r, t) in [
        ("ann", "parent", "bob"),
        ("ann", "parent", "cid"),
        ("bob", "parent", "dan"),
        ("cid", "parent", "eve"),
        ("cid", "parent", "fay"),
    ] {
        kb.add_named(r, &[h, t])?;
    }
    let graph = GaifmanGraph::build(&kb);
    let id = |n: &str| kb.object_id(n).unwrap();

    let grandparent = parse_with("exists y . parent(s1, y) & parent(y, s2)", Some(&kb))?;
    println!("{grandparent}");
    let q = TargetQuery::new(grandparent.clone())?;
    for t in result_set(&kb, &q)? {
        println!(
            "  grandparent({}, {})",
            kb.object_name(t[0]),
            kb.object_name(t[1])
        );
    }

    let f = CompiledFormula::compile(&grandparent, &kb)?;
    let pair = [id("ann"), id("eve")];
    // the witness cid is in N_1(ann, eve) but not in the carrier {ann, eve}
    let whole = kb.induce(&graph.neighborhood(&pair, 1).members)?;
    let bare = kb.induce(&pair)?;
    println!(
        "in N_1: {}  in {{ann, eve}}: {}",
        f.evaluate(&whole, &pair)?,
        f.evaluate(&bare, &pair)?
    );
    println!(
        "relativized: {}",
        relativized_evaluate(&kb, &graph, &f, &pair, 1)?
    );

    let children = CompiledFormula::compile(&parse_with("parent(s1, u1)", Some(&kb))?, &kb)?;
    let cid = [id("cid")];
    let sub = kb.induce(&graph.neighborhood(&cid, 1).members)?;
    println!("children of cid: {}", children.count(&sub, &cid)?);
    println!(
        "relativized count: {}",
        relativized_count(&kb, &graph, &children, &cid, 1)?
    );

    let childless = parse_with("forall x . !parent(s1, x)", Some(&kb))?;
    let childless = CompiledFormula::compile(&childless, &kb)?;
    for who in ["ann", "dan"] {
        let t = [id(who)];
        let sub = kb.induce(&graph.neighborhood(&t, 1).members)?;
        println!("childless({who}) = {}", childless.evaluate(&sub, &t)?);
    }

    // constants are resolved when compiling against a KB
    let unknown = parse_with("parent(s1, `zed`)", Some(&kb))?;
    if let Err(e) = CompiledFormula::compile(&unknown, &kb) {
        println!("error: {e}");
    }
    Ok(())
}
