//! Per-relation training, probabilistic query answering, entity-prediction
//! evaluation and throughput measurement.

mod bench;
mod config;
mod eval;
mod model;

pub use bench::{bench, write_bench_csv, BenchRow};
pub use config::{GaifmanConfig, CONFIG_KEYS};
pub use eval::{
    evaluate, rank_of, Candidates, DegreeBaseline, EvalOptions, EvalReport, KnownFacts, RankMode,
    RankStats, TieRule, TripleScorer,
};
pub use model::{relation_seed, train_all, Engine, ModelBundle, RelationModel, TrainOptions};
