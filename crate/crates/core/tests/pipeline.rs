mod common;

use gaifman::featurizer::{build_dataset, BuildOptions, Dataset, Featurizer, Transform};
use gaifman::graph::GaifmanGraph;
use gaifman::kb::{Fact, KnowledgeBase, ObjectId, RelationId};
use gaifman::logic::{default_feature_set, result_set, Formula, TargetQuery, Term};
use gaifman::pipeline::{
    evaluate, rank_of, train_all, Candidates, Engine, EvalOptions, GaifmanConfig, KnownFacts,
    RankMode, TieRule, TrainOptions, TripleScorer,
};
use gaifman::rng;
use gaifman::sampler::{NeighborhoodSampler, SamplerConfig, SizeBound};
use proptest::prelude::*;
use rand::Rng;

use common::*;

/// Pseudo-random but fixed score of a candidate, passed through `transform`.
struct HashScorer<F: Fn(f64) -> f64 + Sync> {
    salt: u64,
    transform: F,
}

impl<F: Fn(f64) -> f64 + Sync> TripleScorer for HashScorer<F> {
    fn score_candidates(
        &self,
        relation: RelationId,
        fixed: ObjectId,
        replace: usize,
        candidates: &[ObjectId],
    ) -> Option<gaifman::Result<Vec<f64>>> {
        Some(Ok(candidates
            .iter()
            .map(|&c| {
                let h = rng::derive(
                    self.salt,
                    &[
                        u64::from(relation.0),
                        u64::from(fixed.0),
                        replace as u64,
                        u64::from(c.0),
                    ],
                );
                // coarse buckets make ties common
                (self.transform)((h % 16) as f64 / 16.0)
            })
            .collect()))
    }
}

fn random_conjunctive_query(rng: &mut rand_chacha::ChaCha8Rng, kb: &KnowledgeBase) -> Formula {
    let atoms = rng.gen_range(1..=3);
    let terms = [Term::Target(1), Term::Target(2), Term::var("y")];
    let mut body: Option<Formula> = None;
    for i in 0..atoms {
        let r = &kb.relations()[rng.gen_range(0..kb.num_relations())];
        let args = match i {
            0 => vec![Term::Target(1), terms[rng.gen_range(1..3)].clone()],
            _ => vec![
                terms[rng.gen_range(0..3)].clone(),
                terms[rng.gen_range(0..3)].clone(),
            ],
        };
        let atom = Formula::atom(r.name.clone(), args);
        body = Some(match body {
            None => atom,
            Some(b) => Formula::and(b, atom),
        });
    }
    // s1 occurs in the first atom and s2 in the last, so every target is bound
    let last = Formula::atom(
        kb.relations()[0].name.clone(),
        vec![Term::Target(2), Term::var("y")],
    );
    let body = Formula::and(body.unwrap(), last);
    Formula::exists("y", body)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn result_set_matches_enumeration(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let kb = random_binary_kb(&mut rng, 12, 3, 30);
        let f = random_conjunctive_query(&mut rng, &kb);
        let q = TargetQuery::new(f.clone()).unwrap();
        prop_assert_eq!(result_set(&kb, &q).unwrap(), brute_force_result_set(&kb, &f, 2));
    }

    #[test]
    fn rank_is_invariant_under_monotone_maps(scores in prop::collection::vec(-5.0f64..5.0, 1..40), target in any::<prop::sample::Index>()) {
        let t = target.index(scores.len());
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() + 1.0).collect();
        for ties in [TieRule::Average, TieRule::Optimistic, TieRule::Pessimistic] {
            prop_assert_eq!(rank_of(&scores, t, ties), rank_of(&mapped, t, ties));
        }
        let avg = rank_of(&scores, t, TieRule::Average);
        prop_assert!(rank_of(&scores, t, TieRule::Optimistic) <= avg);
        prop_assert!(avg <= rank_of(&scores, t, TieRule::Pessimistic));
    }

    #[test]
    fn filtered_and_subsampled_ranks_never_exceed_raw(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let kb = random_binary_kb(&mut rng, 30, 3, 120);
        let test: Vec<Fact> = kb.facts().iter().take(20).cloned().collect();
        let known = KnownFacts::new(&kb, &test);
        let scorer = HashScorer { salt: seed, transform: |s| s };
        let run = |mode, candidates| {
            let options = EvalOptions { mode, candidates, ..EvalOptions::default() };
            evaluate(&scorer, &kb, &test, &known, &options).unwrap()
        };
        let raw = run(RankMode::Raw, Candidates::All);
        let filtered = run(RankMode::Filtered, Candidates::All);
        let sampled = run(RankMode::Filtered, Candidates::Sample(8));
        for i in 0..test.len() {
            for side in 0..2 {
                prop_assert!(filtered.ranks[i][side] <= raw.ranks[i][side]);
                prop_assert!(sampled.ranks[i][side] <= filtered.ranks[i][side]);
                prop_assert!(sampled.ranks[i][side] <= 8.0);
            }
        }
        prop_assert!(sampled.overall.hits10 >= filtered.overall.hits10);
        prop_assert!(filtered.overall.hits1 >= raw.overall.hits1);

        let squashed = HashScorer { salt: seed, transform: |s: f64| 1.0 / (1.0 + (-4.0 * s).exp()) };
        let options = EvalOptions::default();
        prop_assert_eq!(evaluate(&squashed, &kb, &test, &known, &options).unwrap().ranks, filtered.ranks);
    }

    #[test]
    fn oversized_neighborhoods_are_cut_to_exactly_k(seed in any::<u64>(), k in 2usize..12, n in 1usize..3) {
        let mut rng = rng(seed);
        let kb = random_binary_kb(&mut rng, 40, 3, 150);
        let graph = GaifmanGraph::build(&kb);
        let tuple = random_tuple(&mut rng, &kb, n);
        let full = graph.neighborhood(&tuple, 1).members;
        let mut sampler = NeighborhoodSampler::new(&graph, 1, SizeBound::Bounded(k.max(n)), seed);
        for s in sampler.sample(&tuple, 4, 0) {
            prop_assert_eq!(s.len(), full.len().min(k.max(n)));
            prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        }
    }
}

fn small_bundle(kb: &KnowledgeBase, graph: &GaifmanGraph) -> gaifman::pipeline::ModelBundle {
    let features = default_feature_set(kb.relations()).unwrap();
    let mut config = GaifmanConfig {
        bound: SizeBound::Bounded(6),
        w: 2,
        w_neg: 3,
        ..GaifmanConfig::default()
    };
    config.mlp.epochs = 3;
    config.mlp.hidden = vec![8];
    train_all(kb, graph, &features, &config, &TrainOptions::default()).unwrap()
}

#[test]
fn query_probabilities_are_means_of_sample_probabilities() {
    let mut rng = rng(17);
    let kb = random_binary_kb(&mut rng, 40, 2, 160);
    let graph = GaifmanGraph::build(&kb);
    let bundle = small_bundle(&kb, &graph);
    let r = kb.relation_name(RelationId(0)).to_owned();
    for n in [1, 2, 5] {
        let engine = Engine::new(&kb, &graph, &bundle).unwrap().with_samples(n);
        for _ in 0..20 {
            let pair = random_tuple(&mut rng, &kb, 2);
            let p = engine.query_prob(&r, &pair).unwrap();
            assert!((0.0..=1.0).contains(&p));
            let samples = engine
                .sample_probs(&mut engine.sampler(), RelationId(0), &pair)
                .unwrap();
            assert_eq!(samples.len(), n);
            let mean = samples.iter().sum::<f64>() / n as f64;
            assert!((p - mean).abs() < 1e-12, "{p} vs {mean}");
        }
    }
}

#[test]
fn averaging_more_samples_reduces_variance() {
    let mut rng = rng(23);
    let kb = random_binary_kb(&mut rng, 60, 2, 300);
    let graph = GaifmanGraph::build(&kb);
    let bundle = small_bundle(&kb, &graph);
    let r = kb.relation_name(RelationId(0)).to_owned();
    // a hub and one of its neighbors: far more than k objects around the pair
    let hub = kb.objects().max_by_key(|&o| graph.degree(o)).unwrap();
    let pair = [hub, graph.neighbors(hub)[0]];
    let variance = |n: usize| -> f64 {
        let draws: Vec<f64> = (0..1000)
            .map(|s| {
                Engine::new(&kb, &graph, &bundle)
                    .unwrap()
                    .with_samples(n)
                    .with_seed(s)
                    .query_prob(&r, &pair)
                    .unwrap()
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64
    };
    let (one, three) = (variance(1), variance(3));
    assert!(one > 0.0);
    // independent samples: the variance of a mean of three is a third
    assert!(three < 0.5 * one, "N=3 variance {three} vs N=1 {one}");
}

#[test]
fn dataset_survives_save_and_load() {
    let mut rng = rng(31);
    let kb = random_binary_kb(&mut rng, 30, 2, 80);
    let graph = GaifmanGraph::build(&kb);
    let features = default_feature_set(kb.relations()).unwrap();
    let featurizer = Featurizer::new(&features, &kb, 2, Transform::Log1p).unwrap();
    let config = SamplerConfig {
        bound: SizeBound::Bounded(5),
        w: 2,
        w_neg: 3,
        ..SamplerConfig::default()
    };
    let q = TargetQuery::binary(kb.relation_name(RelationId(1)));
    let ds = build_dataset(
        &kb,
        &graph,
        &q,
        &featurizer,
        &config,
        &BuildOptions::default(),
    )
    .unwrap();
    let path = std::env::temp_dir().join(format!("gaifman-pipeline-{}.bin", std::process::id()));
    ds.save(&path).unwrap();
    let back = Dataset::load_checked(&path, featurizer.feature_hash(), &kb.content_hash()).unwrap();
    assert!(Dataset::load_checked(&path, "0000", &kb.content_hash()).is_err());
    std::fs::remove_file(&path).unwrap();
    assert_eq!(back, ds);
    assert_eq!(ds.meta.positives, kb.facts_of(RelationId(1)).len() * 2);
}
