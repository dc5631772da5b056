//! Query answers per second for several size bounds on a degree-skewed KB of
//! FB15k scale (about 15k objects, 1345 relations, 483k facts).
//!
//!     cargo run --release --example throughput_bench -- [relations] [queries]

use std::time::Instant;

use gaifman::graph::GaifmanGraph;
use gaifman::logic::default_feature_set;
use gaifman::pipeline::{bench, train_all, write_bench_csv, Engine, GaifmanConfig, TrainOptions};
use gaifman::sampler::SizeBound;
use gaifman::synth::skewed;

fn main() -> gaifman::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let relations: usize = args.next().map_or(8, |s| s.parse().expect("relations"));
    let queries: usize = args.next().map_or(200, |s| s.parse().expect("queries"));

    let started = Instant::now();
    let kb = skewed(14_951, 1_345, 483_142, 0);
    let graph = GaifmanGraph::build(&kb);
    println!(
        "{}  built in {:.1}s",
        kb.stats(),
        started.elapsed().as_secs_f64()
    );

    // mid-frequency relations keep training short; throughput does not depend on the weights
    let picked: Vec<String> = kb
        .relation_ids()
        .filter(|&r| (100..=400).contains(&kb.facts_of(r).len()))
        .take(relations)
        .map(|r| kb.relation_name(r).to_owned())
        .collect();
    let features = default_feature_set(kb.relations())?;
    let mut config = GaifmanConfig {
        bound: SizeBound::Bounded(10),
        w: 1,
        w_neg: 2,
        ..GaifmanConfig::default()
    };
    config.mlp.epochs = 1;
    let options = TrainOptions {
        relations: Some(picked.clone()),
        ..TrainOptions::default()
    };
    let bundle = train_all(&kb, &graph, &features, &config, &options)?;
    println!(
        "|features|={}  trained {} models in {:.1}s",
        features.len(),
        bundle.models.len(),
        started.elapsed().as_secs_f64()
    );

    let mut test = Vec::new();
    for name in &picked {
        let r = kb.relation_id(name).expect("relation");
        test.extend(
            kb.facts_of(r)
                .iter()
                .take(queries)
                .map(|&fi| kb.fact(fi).clone()),
        );
    }
    let engine = Engine::new(&kb, &graph, &bundle)?;
    let bounds: Vec<SizeBound> = [10, 20, 50].into_iter().map(SizeBound::Bounded).collect();
    let rows = bench(&engine, &test, &bounds)?;
    write_bench_csv(std::io::stdout(), &rows)?;
    Ok(())
}
