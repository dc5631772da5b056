//! Builds the labelled dataset of one relation, trains its classifier, saves
//! both, and scores a few pairs with the reloaded model.
//!
//!     cargo run --release --example train_relation -- [epochs] [out dir]

use std::path::PathBuf;

use gaifman::featurizer::{build_dataset, BuildOptions, Dataset, Featurizer};
use gaifman::graph::GaifmanGraph;
use gaifman::logic::{default_feature_set, TargetQuery};
use gaifman::mlp::{train, write_training_log, MlpConfig, MlpModel};
use gaifman::pipeline::GaifmanConfig;
use gaifman::synth::wordnet_like;

fn main() -> gaifman::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(15, |s| s.parse().expect("epochs"));
    let dir = args.next().map_or_else(
        || std::env::temp_dir().join("gaifman-train-relation"),
        PathBuf::from,
    );
    std::fs::create_dir_all(&dir)?;

    let split = wordnet_like(800, 0.03, 2);
    let kb = &split.train;
    let graph = GaifmanGraph::build(kb);
    let config = GaifmanConfig::default();
    let phi = default_feature_set(kb.relations())?;
    let featurizer = Featurizer::new(&phi, kb, 2, config.transform)?;
    let query = TargetQuery::binary("_hypernym");
    let ds = build_dataset(
        kb,
        &graph,
        &query,
        &featurizer,
        &config.sampler(),
        &BuildOptions::default(),
    )?;
    println!(
        "{} positive, {} negative examples, {} features",
        ds.meta.positives, ds.meta.negatives, ds.meta.dim
    );
    ds.save(dir.join("hypernym.ds"))?;

    let mlp = MlpConfig {
        epochs,
        ..config.mlp.clone()
    };
    let (model, log) = train(&mlp, &ds)?;
    write_training_log(std::io::stdout(), &log)?;
    let path = dir.join("hypernym.mlp");
    model.save(&path)?;

    let model = MlpModel::load_checked(&path, featurizer.feature_hash())?;
    let again = Dataset::load_checked(
        dir.join("hypernym.ds"),
        featurizer.feature_hash(),
        &kb.content_hash(),
    )?;
    for v in again.examples.iter().step_by(again.examples.len() / 6 + 1) {
        println!("{:?}  p = {:.3}", v.label, model.predict(v.entries()));
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}
