//! Domain, schema and Gaifman-graph statistics of a fact file, or of a small
//! built-in family KB when no path is given.
//!
//!     cargo run --example kb_stats -- [facts.tsv] [--nary]

use gaifman::graph::GaifmanGraph;
use gaifman::kb::{KnowledgeBase, TripleFormat};

fn family() -> gaifman::Result<KnowledgeBase> {
    let mut kb = KnowledgeBase::new();
    for (h, r, t) in [
        ("ann", "parent", "bob"),
        ("ann", "parent", "cid"),
        ("bob", "parent", "dan"),
        ("eve", "spouse", "bob"),
        ("bob", "spouse", "eve"),
        ("dan", "lives_in", "oslo"),
        ("cid", "lives_in", "oslo"),
    ] {
        kb.add_named(r, &[h, t])?;
    }
    kb.add_named("born", &["dan", "oslo", "y2001"])?;
    Ok(kb)
}

fn main() -> gaifman::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let format = if args.iter().any(|a| a == "--nary") {
        TripleFormat::NAry
    } else {
        TripleFormat::Triples
    };
    let kb = match args.iter().find(|a| !a.starts_with("--")) {
        Some(path) => KnowledgeBase::load_path(path, format)?,
        None => family()?,
    };
    let graph = GaifmanGraph::build(&kb);
    println!("{}", kb.stats());
    println!("content hash {}", kb.content_hash());
    for r in kb.relation_ids().take(10) {
        println!(
            "  {:<12} arity {}  {} facts",
            kb.relation_name(r),
            kb.arity(r),
            kb.facts_of(r).len()
        );
    }
    println!("gaifman edges {}", graph.num_edges());
    for radius in 0..=2 {
        println!(
            "largest N_{radius}: {}",
            graph.max_r_neighborhood_size(radius)
        );
    }
    graph.write_degree_histogram_csv(std::io::stdout())?;
    Ok(())
}
