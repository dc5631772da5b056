//! Entity prediction on a WordNet-like KB (or real WN18 when
//! `GAIFMAN_WN18_DIR` points at a directory with `train.txt`, `valid.txt`,
//! `test.txt`), against a degree baseline, for N = 1, 2, 3 inference samples.
//!
//!     cargo run --release --example link_prediction_eval -- [entities] [test triples] [epochs]

use std::path::PathBuf;
use std::time::Instant;

use gaifman::graph::GaifmanGraph;
use gaifman::kb::{KnowledgeBase, TripleFormat};
use gaifman::logic::default_feature_set;
use gaifman::pipeline::{
    evaluate, train_all, Candidates, DegreeBaseline, Engine, EvalOptions, GaifmanConfig,
    KnownFacts, TrainOptions,
};
use gaifman::sampler::SizeBound;
use gaifman::synth::{wordnet_like, Split};

fn load_split() -> gaifman::Result<Option<Split>> {
    let Some(dir) = std::env::var_os("GAIFMAN_WN18_DIR").map(PathBuf::from) else {
        return Ok(None);
    };
    let train = KnowledgeBase::load_path(dir.join("train.txt"), TripleFormat::Triples)?;
    let (valid, _) = train.resolve_path(dir.join("valid.txt"), TripleFormat::Triples)?;
    let (test, skipped) = train.resolve_path(dir.join("test.txt"), TripleFormat::Triples)?;
    println!(
        "loaded WN18 from {} ({skipped} test triple(s) with unseen symbols)",
        dir.display()
    );
    Ok(Some(Split { train, valid, test }))
}

fn main() -> gaifman::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let entities: usize = args.next().map_or(3000, |s| s.parse().expect("entities"));
    let n_test: usize = args
        .next()
        .map_or(200, |s| s.parse().expect("test triples"));
    let epochs: usize = args.next().map_or(20, |s| s.parse().expect("epochs"));
    let started = Instant::now();

    let split = match load_split()? {
        Some(s) => s,
        None => {
            println!("surrogate: WordNet-like synthetic KB");
            wordnet_like(entities, 0.03, 0)
        }
    };
    let kb = &split.train;
    let graph = GaifmanGraph::build(kb);
    println!("{}  test: {}", kb.stats(), split.test.len());

    let features = default_feature_set(kb.relations())?;
    let mut config = GaifmanConfig {
        bound: SizeBound::Bounded(20),
        w: 5,
        w_neg: 25,
        ..GaifmanConfig::default()
    };
    config.mlp.epochs = epochs;
    let bundle = train_all(kb, &graph, &features, &config, &TrainOptions::default())?;
    println!(
        "trained {} models in {:.1}s",
        bundle.models.len(),
        started.elapsed().as_secs_f64()
    );

    let test = &split.test[..n_test.min(split.test.len())];
    let known = KnownFacts::new(kb, split.all_held_out());
    let options = EvalOptions {
        candidates: Candidates::Sample(500),
        ..EvalOptions::default()
    };
    let baseline = evaluate(
        &DegreeBaseline { graph: &graph },
        kb,
        test,
        &known,
        &options,
    )?;
    println!("degree baseline");
    baseline.write_table(std::io::stdout())?;
    for n in 1..=3 {
        let engine = Engine::new(kb, &graph, &bundle)?.with_samples(n);
        let report = evaluate(&engine, kb, test, &known, &options)?;
        println!("N = {n}");
        report.write_table(std::io::stdout())?;
    }
    Ok(())
}
