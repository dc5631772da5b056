//! Bounded-size neighborhood sampling and tuple corruption.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BfsScratch, GaifmanGraph};
use crate::kb::{KnowledgeBase, ObjectId};
use crate::rng::{self, StreamRng};

/// Size bound `k` of sampled neighborhoods. `Unbounded` returns the full
/// r-neighborhood without sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SizeBound {
    Bounded(usize),
    Unbounded,
}

impl fmt::Display for SizeBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizeBound::Bounded(k) => write!(f, "{k}"),
            SizeBound::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for SizeBound {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "unbounded" | "∞" => Ok(SizeBound::Unbounded),
            other => other
                .parse::<usize>()
                .map(SizeBound::Bounded)
                .map_err(|_| Error::InvalidConfig(format!("invalid size bound `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplerConfig {
    pub radius: usize,
    pub bound: SizeBound,
    /// Positive neighborhoods per tuple.
    pub w: usize,
    /// Corrupted (negative) tuples per positive tuple.
    pub w_neg: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            radius: 1,
            bound: SizeBound::Bounded(20),
            w: 5,
            w_neg: 25,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, arity: usize) -> Result<()> {
        if self.w == 0 {
            return Err(Error::InvalidConfig("w must be at least 1".into()));
        }
        if arity == 0 {
            return Err(Error::InvalidConfig(
                "tuples must have at least one element".into(),
            ));
        }
        if let SizeBound::Bounded(k) = self.bound {
            if k < arity {
                return Err(Error::InvalidConfig(format!(
                    "size bound k={k} is smaller than the tuple length {arity}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
    Unlabeled,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledNeighborhood {
    pub tuple: Vec<ObjectId>,
    pub label: Label,
    /// Ascending object ids; always contains every tuple element.
    pub members: Vec<ObjectId>,
}

/// Draws (r,k)-neighborhoods around tuples of one graph.
///
/// Each call computes `N_r(d_i)` for every tuple element and then, per sample,
/// takes `floor(k/n)` objects from each element's ball (the element itself
/// always among them), and tops the result up to `k` from what is left of
/// `N_r(d)`. When `|N_r(d)| <= k` or the bound is unbounded, every sample is
/// the whole neighborhood.
pub struct NeighborhoodSampler<'g> {
    graph: &'g GaifmanGraph,
    radius: usize,
    bound: SizeBound,
    seed: u64,
    scratch: BfsScratch,
    balls: Vec<Vec<ObjectId>>,
    union: Vec<ObjectId>,
}

impl<'g> NeighborhoodSampler<'g> {
    pub fn new(graph: &'g GaifmanGraph, radius: usize, bound: SizeBound, seed: u64) -> Self {
        NeighborhoodSampler {
            graph,
            radius,
            bound,
            seed,
            scratch: BfsScratch::new(),
            balls: Vec::new(),
            union: Vec::new(),
        }
    }

    pub fn from_config(graph: &'g GaifmanGraph, config: &SamplerConfig) -> Self {
        Self::new(graph, config.radius, config.bound, config.seed)
    }

    pub fn set_bound(&mut self, bound: SizeBound) {
        self.bound = bound;
    }

    /// `count` neighborhoods of `tuple`; sample `j` uses the stream keyed by
    /// `(seed, salt, tuple, j)`.
    pub fn sample(&mut self, tuple: &[ObjectId], count: usize, salt: u64) -> Vec<Vec<ObjectId>> {
        let n = tuple.len();
        self.balls.resize_with(n, Vec::new);
        for (i, &d) in tuple.iter().enumerate() {
            self.graph
                .ball_into(&mut self.scratch, &[d], self.radius, &mut self.balls[i]);
        }
        self.graph
            .ball_into(&mut self.scratch, tuple, self.radius, &mut self.union);

        let k = match self.bound {
            SizeBound::Bounded(k) if self.union.len() > k => k,
            _ => return vec![self.union.clone(); count],
        };
        let quota = k / n;
        let key = rng::tuple_key(tuple);
        (0..count)
            .map(|j| {
                let mut rng = rng::stream(self.seed, &[salt, key, j as u64]);
                self.draw_one(tuple, k, quota, &mut rng)
            })
            .collect()
    }

    fn draw_one(
        &self,
        tuple: &[ObjectId],
        k: usize,
        quota: usize,
        rng: &mut StreamRng,
    ) -> Vec<ObjectId> {
        let mut chosen: Vec<ObjectId> = Vec::with_capacity(k);
        for (&d, ball) in tuple.iter().zip(&self.balls) {
            let take = quota.min(ball.len());
            if !chosen.contains(&d) {
                chosen.push(d);
            }
            // `d` fills one slot of its own quota.
            let self_pos = ball.binary_search(&d).expect("ball contains its center");
            let others = ball.len() - 1;
            let extra = (take - 1).min(others);
            for idx in index::sample(rng, others, extra) {
                let obj = ball[if idx >= self_pos { idx + 1 } else { idx }];
                if !chosen.contains(&obj) {
                    chosen.push(obj);
                }
            }
        }
        chosen.sort_unstable();
        let remaining = k.saturating_sub(chosen.len());
        if remaining > 0 {
            let pool: Vec<ObjectId> = self
                .union
                .iter()
                .copied()
                .filter(|o| chosen.binary_search(o).is_err())
                .collect();
            let top_up = remaining.min(pool.len());
            for idx in index::sample(rng, pool.len(), top_up) {
                chosen.push(pool[idx]);
            }
            chosen.sort_unstable();
        }
        chosen
    }
}

/// `config.w` positive-labelled (r,k)-neighborhoods of `tuple`.
pub fn gen_neighs(
    graph: &GaifmanGraph,
    tuple: &[ObjectId],
    config: &SamplerConfig,
) -> Result<Vec<SampledNeighborhood>> {
    config.validate(tuple.len())?;
    if let Some(bad) = tuple.iter().find(|o| o.index() >= graph.num_objects()) {
        return Err(Error::ObjectOutOfRange(bad.0));
    }
    let mut sampler = NeighborhoodSampler::from_config(graph, config);
    Ok(sampler
        .sample(tuple, config.w, rng::TAG_POSITIVE)
        .into_iter()
        .map(|members| SampledNeighborhood {
            tuple: tuple.to_vec(),
            label: Label::Positive,
            members,
        })
        .collect())
}

/// Membership test for tuples that must not be drawn as negatives.
pub type KnownTest<'a> = &'a dyn Fn(&[ObjectId]) -> bool;

/// Retry budget for drawing a corrupted tuple that is not a known fact.
pub const MAX_CORRUPTION_RETRIES: usize = 64;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corruptions {
    pub tuples: Vec<Vec<ObjectId>>,
    /// Tuples accepted although they are known facts, after the retry budget ran out.
    pub forced: usize,
}

/// Replaces one position of `tuple` per output (round-robin over positions)
/// with a uniformly drawn object different from the original. When `is_known`
/// is given, tuples it accepts are redrawn.
pub fn corrupt(
    kb: &KnowledgeBase,
    tuple: &[ObjectId],
    count: usize,
    seed: u64,
    is_known: Option<KnownTest<'_>>,
) -> Result<Corruptions> {
    corrupt_in_domain(kb.num_objects(), tuple, count, seed, is_known)
}

pub fn corrupt_in_domain(
    num_objects: usize,
    tuple: &[ObjectId],
    count: usize,
    seed: u64,
    is_known: Option<KnownTest<'_>>,
) -> Result<Corruptions> {
    if count == 0 {
        return Ok(Corruptions::default());
    }
    if num_objects <= 1 {
        return Err(Error::DomainTooSmall(num_objects));
    }
    if tuple.is_empty() {
        return Err(Error::InvalidConfig("cannot corrupt an empty tuple".into()));
    }
    let key = rng::tuple_key(tuple);
    let mut out = Corruptions::default();
    for j in 0..count {
        let pos = j % tuple.len();
        let mut rng = rng::stream(seed, &[rng::TAG_CORRUPT, key, j as u64]);
        let mut candidate = tuple.to_vec();
        let mut attempts = 0;
        loop {
            let draw = loop {
                let o = ObjectId(rng.gen_range(0..num_objects as u32));
                if o != tuple[pos] {
                    break o;
                }
            };
            candidate[pos] = draw;
            attempts += 1;
            match is_known {
                Some(known) if known(&candidate) => {
                    if attempts >= MAX_CORRUPTION_RETRIES {
                        out.forced += 1;
                        break;
                    }
                }
                _ => break,
            }
        }
        out.tuples.push(candidate);
    }
    Ok(out)
}
