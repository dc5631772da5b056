use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;

use super::model::Engine;
use crate::error::{Error, Result};
use crate::graph::GaifmanGraph;
use crate::kb::{Fact, KnowledgeBase, ObjectId, RelationId};
use crate::rng;

/// Scores candidate completions of a triple with one position left open.
pub trait TripleScorer: Sync {
    /// Scores of `relation(c, fixed)` when `replace == 0`, else of
    /// `relation(fixed, c)`, for each candidate `c`. `None` when the scorer has
    /// no model for `relation`.
    fn score_candidates(
        &self,
        relation: RelationId,
        fixed: ObjectId,
        replace: usize,
        candidates: &[ObjectId],
    ) -> Option<Result<Vec<f64>>>;
}

impl TripleScorer for Engine<'_> {
    fn score_candidates(
        &self,
        relation: RelationId,
        fixed: ObjectId,
        replace: usize,
        candidates: &[ObjectId],
    ) -> Option<Result<Vec<f64>>> {
        if !self.has_model(relation) {
            return None;
        }
        let mut sampler = self.sampler();
        Some(
            candidates
                .iter()
                .map(|&c| {
                    let tuple = if replace == 0 { [c, fixed] } else { [fixed, c] };
                    self.prob_with(&mut sampler, relation, &tuple)
                })
                .collect(),
        )
    }
}

/// Scores a candidate by its Gaifman degree, ignoring the relation.
pub struct DegreeBaseline<'a> {
    pub graph: &'a GaifmanGraph,
}

impl TripleScorer for DegreeBaseline<'_> {
    fn score_candidates(
        &self,
        _relation: RelationId,
        _fixed: ObjectId,
        _replace: usize,
        candidates: &[ObjectId],
    ) -> Option<Result<Vec<f64>>> {
        Some(Ok(candidates
            .iter()
            .map(|&c| self.graph.degree(c) as f64)
            .collect()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankMode {
    Raw,
    /// Other known-true completions are removed from the candidates.
    Filtered,
}

impl fmt::Display for RankMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankMode::Raw => "raw",
            RankMode::Filtered => "filtered",
        })
    }
}

impl FromStr for RankMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(RankMode::Raw),
            "filtered" => Ok(RankMode::Filtered),
            o => Err(Error::InvalidConfig(format!("unknown rank mode `{o}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Candidates {
    All,
    /// The true object plus `m - 1` others drawn without replacement.
    Sample(usize),
}

impl fmt::Display for Candidates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Candidates::All => f.write_str("all"),
            Candidates::Sample(m) => write!(f, "sample({m})"),
        }
    }
}

impl FromStr for Candidates {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(Candidates::All);
        }
        let inner = s
            .strip_prefix("sample(")
            .and_then(|r| r.strip_suffix(')'))
            .unwrap_or(s);
        match inner.parse::<usize>() {
            Ok(m) if m >= 1 => Ok(Candidates::Sample(m)),
            _ => Err(Error::InvalidConfig(format!(
                "candidates must be `all`, `sample(m)` or `m`, got `{s}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieRule {
    /// Mean position of the tied block.
    #[default]
    Average,
    Optimistic,
    Pessimistic,
}

impl fmt::Display for TieRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieRule::Average => "average",
            TieRule::Optimistic => "optimistic",
            TieRule::Pessimistic => "pessimistic",
        })
    }
}

impl FromStr for TieRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(TieRule::Average),
            "optimistic" => Ok(TieRule::Optimistic),
            "pessimistic" => Ok(TieRule::Pessimistic),
            o => Err(Error::InvalidConfig(format!("unknown tie rule `{o}`"))),
        }
    }
}

/// 1-based rank of `scores[target]` in descending order. NaN sorts last.
pub fn rank_of(scores: &[f64], target: usize, ties: TieRule) -> f64 {
    let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
    let t = key(scores[target]);
    let mut greater = 0usize;
    let mut equal = 0usize;
    for &s in scores {
        let s = key(s);
        if s > t {
            greater += 1;
        } else if s == t {
            equal += 1;
        }
    }
    match ties {
        TieRule::Average => greater as f64 + (equal as f64 + 1.0) / 2.0,
        TieRule::Optimistic => greater as f64 + 1.0,
        TieRule::Pessimistic => (greater + equal) as f64,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RankStats {
    pub count: usize,
    pub mean_rank: f64,
    /// Percentages.
    pub hits10: f64,
    pub hits1: f64,
}

impl RankStats {
    pub fn from_ranks(ranks: &[f64]) -> Self {
        if ranks.is_empty() {
            return RankStats::default();
        }
        let n = ranks.len() as f64;
        RankStats {
            count: ranks.len(),
            mean_rank: ranks.iter().sum::<f64>() / n,
            hits10: 100.0 * ranks.iter().filter(|&&r| r <= 10.0).count() as f64 / n,
            hits1: 100.0 * ranks.iter().filter(|&&r| r <= 1.0).count() as f64 / n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub mode: RankMode,
    pub candidates: Candidates,
    pub ties: TieRule,
    /// Seed of the candidate subsampling.
    pub seed: u64,
    /// Log progress after every this many test triples; 0 disables it.
    pub progress_every: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            mode: RankMode::Filtered,
            candidates: Candidates::All,
            ties: TieRule::Average,
            seed: 0,
            progress_every: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Ranks for replacing the head.
    pub head: RankStats,
    /// Ranks for replacing the tail.
    pub tail: RankStats,
    pub overall: RankStats,
    pub mode: RankMode,
    pub candidates: Candidates,
    pub ties: TieRule,
    pub evaluated: usize,
    /// Test triples whose relation has no model.
    pub skipped: usize,
    pub seconds: f64,
    /// Per evaluated triple: `[head rank, tail rank]`, in input order.
    pub ranks: Vec<[f64; 2]>,
}

impl EvalReport {
    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "mode: {}  candidates: {}{}  ties: {}",
            self.mode,
            self.candidates,
            if matches!(self.candidates, Candidates::Sample(_)) {
                " (subsampled)"
            } else {
                ""
            },
            self.ties
        )?;
        writeln!(
            out,
            "{:<10}{:>8}{:>12}{:>10}{:>10}",
            "direction", "count", "mean rank", "hits@10", "hits@1"
        )?;
        for (name, s) in [
            ("head", &self.head),
            ("tail", &self.tail),
            ("both", &self.overall),
        ] {
            writeln!(
                out,
                "{:<10}{:>8}{:>12.2}{:>10.2}{:>10.2}",
                name, s.count, s.mean_rank, s.hits10, s.hits1
            )?;
        }
        writeln!(
            out,
            "evaluated {} triple(s), skipped {}, {:.2}s",
            self.evaluated, self.skipped, self.seconds
        )?;
        Ok(())
    }

    /// CSV without timing, so reruns are byte-identical.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "direction,count,mean_rank,hits10,hits1,mode,candidates,ties,skipped"
        )?;
        for (name, s) in [
            ("head", &self.head),
            ("tail", &self.tail),
            ("both", &self.overall),
        ] {
            writeln!(
                out,
                "{name},{},{},{},{},{},{},{},{}",
                s.count,
                s.mean_rank,
                s.hits10,
                s.hits1,
                self.mode,
                self.candidates,
                self.ties,
                self.skipped
            )?;
        }
        Ok(())
    }
}

/// Facts known to be true (train, validation and test) for filtering.
pub struct KnownFacts {
    set: HashSet<(RelationId, ObjectId, ObjectId)>,
}

impl KnownFacts {
    pub fn new<'f>(kb: &'f KnowledgeBase, extra: impl IntoIterator<Item = &'f Fact>) -> Self {
        let mut set = HashSet::new();
        for f in kb.facts().iter().chain(extra) {
            if f.args.len() == 2 {
                set.insert((f.relation, f.args[0], f.args[1]));
            }
        }
        KnownFacts { set }
    }

    pub fn contains(&self, r: RelationId, h: ObjectId, t: ObjectId) -> bool {
        self.set.contains(&(r, h, t))
    }
}

fn candidate_list(
    num_objects: usize,
    relation: RelationId,
    fixed: ObjectId,
    truth: ObjectId,
    replace: usize,
    known: Option<&KnownFacts>,
    options: &EvalOptions,
) -> Vec<ObjectId> {
    let excluded = |c: ObjectId| {
        c != truth
            && known.is_some_and(|k| {
                let (h, t) = if replace == 0 { (c, fixed) } else { (fixed, c) };
                k.contains(relation, h, t)
            })
    };
    let pool: Vec<ObjectId> = (0..num_objects as u32)
        .map(ObjectId)
        .filter(|&c| c != truth && !excluded(c))
        .collect();
    let mut out = vec![truth];
    match options.candidates {
        Candidates::All => out.extend(pool),
        Candidates::Sample(m) => {
            let take = (m - 1).min(pool.len());
            let key = rng::tuple_key(&[ObjectId(relation.0), fixed, truth]);
            let mut r = rng::stream(options.seed, &[rng::TAG_CANDIDATES, key, replace as u64]);
            let mut picked: Vec<usize> = index::sample(&mut r, pool.len(), take).into_vec();
            picked.sort_unstable();
            out.extend(picked.into_iter().map(|i| pool[i]));
        }
    }
    out
}

/// Entity-prediction evaluation: for every binary test fact, rank the true
/// head among head replacements and the true tail among tail replacements.
pub fn evaluate(
    scorer: &dyn TripleScorer,
    kb: &KnowledgeBase,
    test: &[Fact],
    known: &KnownFacts,
    options: &EvalOptions,
) -> Result<EvalReport> {
    let started = Instant::now();
    let filter = (options.mode == RankMode::Filtered).then_some(known);
    let score_triple = |fact: &Fact| -> Result<Option<[f64; 2]>> {
        if fact.args.len() != 2 {
            return Ok(None);
        }
        let (h, t) = (fact.args[0], fact.args[1]);
        let mut ranks = [0.0; 2];
        for (replace, (fixed, truth)) in [(0usize, (t, h)), (1, (h, t))] {
            let cands = candidate_list(
                kb.num_objects(),
                fact.relation,
                fixed,
                truth,
                replace,
                filter,
                options,
            );
            let Some(scores) = scorer.score_candidates(fact.relation, fixed, replace, &cands)
            else {
                return Ok(None);
            };
            ranks[replace] = rank_of(&scores?, 0, options.ties);
        }
        Ok(Some(ranks))
    };
    let chunk = match options.progress_every {
        0 => test.len().max(1),
        n => n,
    };
    let mut per_triple: Vec<Option<[f64; 2]>> = Vec::with_capacity(test.len());
    for block in test.chunks(chunk) {
        let scored: Vec<Option<[f64; 2]>> =
            block.par_iter().map(score_triple).collect::<Result<_>>()?;
        per_triple.extend(scored);
        if options.progress_every > 0 {
            let done = per_triple.len();
            let elapsed = started.elapsed().as_secs_f64();
            let eta = elapsed / done as f64 * (test.len() - done) as f64;
            log::info!(
                "eval: {done}/{} triples, {elapsed:.1}s elapsed, ETA {eta:.1}s",
                test.len()
            );
        }
    }
    let ranks: Vec<[f64; 2]> = per_triple.iter().flatten().copied().collect();
    let heads: Vec<f64> = ranks.iter().map(|r| r[0]).collect();
    let tails: Vec<f64> = ranks.iter().map(|r| r[1]).collect();
    let both: Vec<f64> = heads.iter().chain(&tails).copied().collect();
    Ok(EvalReport {
        head: RankStats::from_ranks(&heads),
        tail: RankStats::from_ranks(&tails),
        overall: RankStats::from_ranks(&both),
        mode: options.mode,
        candidates: options.candidates,
        ties: options.ties,
        evaluated: ranks.len(),
        skipped: test.len() - ranks.len(),
        seconds: started.elapsed().as_secs_f64(),
        ranks,
    })
}
