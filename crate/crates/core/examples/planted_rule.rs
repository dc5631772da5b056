//! Learns a planted composition rule `r3(x,z) <- r1(x,y), r2(y,z)` and ranks
//! the held-out `r3` facts.
//!
//!     cargo run --release --example planted_rule -- [k] [seed]

use std::time::Instant;

use gaifman::graph::GaifmanGraph;
use gaifman::logic::{default_feature_set, two_hop_path_features};
use gaifman::pipeline::{
    evaluate, train_all, Engine, EvalOptions, GaifmanConfig, KnownFacts, TrainOptions,
};
use gaifman::sampler::SizeBound;
use gaifman::synth::planted_rule;

fn main() -> gaifman::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let bound: SizeBound = args.next().as_deref().unwrap_or("10").parse()?;
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let started = Instant::now();

    let split = planted_rule(200, 0.02, 0.1, seed);
    let kb = &split.train;
    println!("{}  held out: {}", kb.stats(), split.test.len());
    let graph = GaifmanGraph::build(kb);

    let mut features = default_feature_set(kb.relations())?;
    features.extend(
        two_hop_path_features(kb.relations())
            .formulas()
            .iter()
            .cloned(),
    );

    let mut config = GaifmanConfig {
        bound,
        w: 2,
        w_neg: 4,
        n_infer: 1,
        seed,
        ..GaifmanConfig::default()
    };
    config.mlp.seed = seed;
    let options = TrainOptions {
        relations: Some(vec!["r3".into()]),
        ..TrainOptions::default()
    };
    let bundle = train_all(kb, &graph, &features, &config, &options)?;
    println!("trained in {:.1}s", started.elapsed().as_secs_f64());

    let engine = Engine::new(kb, &graph, &bundle)?;
    let known = KnownFacts::new(kb, split.all_held_out());
    let report = evaluate(&engine, kb, &split.test, &known, &EvalOptions::default())?;
    report.write_table(std::io::stdout())?;
    println!("total {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
