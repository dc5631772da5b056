use std::io::Write;
use std::time::Instant;

use super::model::Engine;
use crate::error::Result;
use crate::kb::{Fact, RelationId};
use crate::sampler::SizeBound;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchRow {
    pub bound: SizeBound,
    pub answers_per_sec: f64,
    pub answers: usize,
}

/// Wall-clock query-answering throughput (neighborhood sampling,
/// featurization and inference) for each size bound, on one thread.
/// Throughput is measured per relation and averaged over relations.
pub fn bench(engine: &Engine<'_>, queries: &[Fact], bounds: &[SizeBound]) -> Result<Vec<BenchRow>> {
    let mut by_relation: Vec<(RelationId, Vec<[crate::kb::ObjectId; 2]>)> = Vec::new();
    for f in queries
        .iter()
        .filter(|f| f.args.len() == 2 && engine.has_model(f.relation))
    {
        let pair = [f.args[0], f.args[1]];
        match by_relation.iter_mut().find(|(r, _)| *r == f.relation) {
            Some((_, v)) => v.push(pair),
            None => by_relation.push((f.relation, vec![pair])),
        }
    }
    let total: usize = by_relation.iter().map(|(_, v)| v.len()).sum::<usize>() * bounds.len();
    let started = Instant::now();
    let mut rows = Vec::with_capacity(bounds.len());
    for (i, &bound) in bounds.iter().enumerate() {
        let mut sampler = engine.sampler();
        sampler.set_bound(bound);
        let mut rates = Vec::new();
        let mut answers = 0;
        for (rel, pairs) in &by_relation {
            let started = Instant::now();
            let mut sink = 0.0;
            for p in pairs {
                sink += engine.prob_with(&mut sampler, *rel, p)?;
            }
            let secs = started.elapsed().as_secs_f64().max(1e-9);
            std::hint::black_box(sink);
            rates.push(pairs.len() as f64 / secs);
            answers += pairs.len();
        }
        let mean = if rates.is_empty() {
            0.0
        } else {
            rates.iter().sum::<f64>() / rates.len() as f64
        };
        rows.push(BenchRow {
            bound,
            answers_per_sec: mean,
            answers,
        });
        let done = answers * (i + 1);
        let elapsed = started.elapsed().as_secs_f64();
        let eta = elapsed / done.max(1) as f64 * (total - done) as f64;
        log::info!("bench: {done}/{total} queries, {elapsed:.1}s elapsed, ETA {eta:.1}s");
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(mut out: W, rows: &[BenchRow]) -> Result<()> {
    writeln!(out, "k,answers_per_sec")?;
    for r in rows {
        writeln!(out, "{},{:.1}", r.bound, r.answers_per_sec)?;
    }
    Ok(())
}
