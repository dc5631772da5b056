use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::config::GaifmanConfig;
use crate::error::{Error, Result};
use crate::featurizer::{build_dataset_from, BuildOptions, Featurizer};
use crate::graph::GaifmanGraph;
use crate::kb::{KnowledgeBase, ObjectId, RelationId};
use crate::logic::{FeatureSet, TargetQuery};
use crate::mlp::{self, write_training_log, EpochStats, MlpModel};
use crate::rng;
use crate::sampler::{NeighborhoodSampler, SizeBound};

/// The classifier of one relation and what it was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationModel {
    pub relation: String,
    pub model: MlpModel,
    pub log: Vec<EpochStats>,
    pub positives: usize,
    pub negatives: usize,
}

/// One model per relation plus the shared configuration and feature set.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub config: GaifmanConfig,
    pub features: FeatureSet,
    pub kb_hash: String,
    pub models: Vec<RelationModel>,
    /// Relations without training facts.
    pub skipped: Vec<String>,
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Train only these relations (all when `None`).
    pub relations: Option<Vec<String>>,
    /// Log dataset progress every this many tuples (0 disables).
    pub progress_every: usize,
}

/// Seed of everything specific to one relation.
pub fn relation_seed(seed: u64, relation: &str) -> u64 {
    rng::derive(seed, &[rng::name_key(relation)])
}

/// Trains one classifier per binary relation on the template query
/// `relation(s1, s2)`. Relations are processed in parallel.
pub fn train_all(
    kb: &KnowledgeBase,
    graph: &GaifmanGraph,
    features: &FeatureSet,
    config: &GaifmanConfig,
    options: &TrainOptions,
) -> Result<ModelBundle> {
    config.validate()?;
    let featurizer = Featurizer::new(features, kb, 2, config.transform)?;
    let mut wanted: Vec<RelationId> = Vec::new();
    match &options.relations {
        Some(names) => {
            for n in names {
                wanted.push(
                    kb.relation_id(n)
                        .ok_or_else(|| Error::UnknownRelation(n.clone()))?,
                );
            }
        }
        None => wanted.extend(kb.relation_ids()),
    }
    for &r in &wanted {
        if kb.arity(r) != 2 {
            return Err(Error::InvalidConfig(format!(
                "relation `{}` has arity {}; per-relation training needs binary relations",
                kb.relation_name(r),
                kb.arity(r)
            )));
        }
    }
    let mut skipped = Vec::new();
    let mut active = Vec::new();
    for r in wanted {
        if kb.facts_of(r).is_empty() {
            log::warn!(
                "relation `{}` has no training facts; skipped",
                kb.relation_name(r)
            );
            skipped.push(kb.relation_name(r).to_owned());
        } else {
            active.push(r);
        }
    }
    let build = BuildOptions {
        filter_known: config.filter_known,
        progress_every: options.progress_every,
    };
    let models = active
        .par_iter()
        .map(|&r| -> Result<RelationModel> {
            let name = kb.relation_name(r);
            let seed = relation_seed(config.seed, name);
            let mut sampler = config.sampler();
            sampler.seed = seed;
            let positives: Vec<Vec<ObjectId>> = kb
                .facts_of(r)
                .iter()
                .map(|&fi| kb.fact(fi).args.to_vec())
                .collect();
            let dataset = build_dataset_from(
                kb,
                graph,
                &TargetQuery::binary(name),
                &positives,
                &featurizer,
                &sampler,
                &build,
            )?;
            let mut mlp_config = config.mlp.clone();
            mlp_config.seed = seed;
            let (mut model, log) = mlp::train(&mlp_config, &dataset)?;
            model.metadata.insert("relation".into(), name.to_owned());
            log::info!(
                "trained `{name}`: {} examples, final loss {:.4}",
                dataset.len(),
                log.last().map_or(f64::NAN, |s| s.loss)
            );
            Ok(RelationModel {
                relation: name.to_owned(),
                model,
                log,
                positives: dataset.meta.positives,
                negatives: dataset.meta.negatives,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelBundle {
        config: config.clone(),
        features: features.clone(),
        kb_hash: kb.content_hash(),
        models,
        skipped,
    })
}

const BUNDLE_MAGIC: &str = "gaifman-bundle v1";

impl ModelBundle {
    pub fn model(&self, relation: &str) -> Option<&RelationModel> {
        self.models.iter().find(|m| m.relation == relation)
    }

    pub fn feature_hash(&self) -> String {
        self.features.content_hash()
    }

    pub fn manifest(&self) -> String {
        let mut out = format!("{BUNDLE_MAGIC}\n{}", self.config.to_text());
        out.push_str(&format!("feature_hash={}\n", self.feature_hash()));
        out.push_str(&format!("features={}\n", self.features.len()));
        out.push_str(&format!("kb_hash={}\n", self.kb_hash));
        for (i, m) in self.models.iter().enumerate() {
            out.push_str(&format!(
                "model={} {} {} {}\n",
                model_file(i),
                m.positives,
                m.negatives,
                m.relation
            ));
        }
        for s in &self.skipped {
            out.push_str(&format!("skipped={s}\n"));
        }
        out
    }

    /// Writes `manifest.txt`, `features.txt` and per relation a model file
    /// and its training log.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.txt"), self.manifest())?;
        fs::write(dir.join("features.txt"), self.features.to_text())?;
        for (i, m) in self.models.iter().enumerate() {
            m.model.save(dir.join(model_file(i)))?;
            let mut log = fs::File::create(dir.join(format!("rel_{i:05}.log.csv")))?;
            write_training_log(&mut log, &m.log)?;
            log.flush()?;
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join("manifest.txt");
        let text = fs::read_to_string(&manifest_path)
            .map_err(|e| Error::format(&manifest_path, e.to_string()))?;
        let mut lines = text.lines();
        if lines.next() != Some(BUNDLE_MAGIC) {
            return Err(Error::format(&manifest_path, "not a model bundle manifest"));
        }
        let mut config = GaifmanConfig::default();
        let mut feature_hash = None;
        let mut kb_hash = None;
        let mut entries = Vec::new();
        let mut skipped = Vec::new();
        for line in lines {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(&manifest_path, format!("bad line `{line}`")))?;
            match k {
                "feature_hash" => feature_hash = Some(v.to_owned()),
                "kb_hash" => kb_hash = Some(v.to_owned()),
                "features" => {}
                "model" => {
                    let mut parts = v.splitn(4, ' ');
                    let (Some(file), Some(pos), Some(neg), Some(rel)) =
                        (parts.next(), parts.next(), parts.next(), parts.next())
                    else {
                        return Err(Error::format(
                            &manifest_path,
                            format!("bad model line `{line}`"),
                        ));
                    };
                    let count = |s: &str| {
                        s.parse::<usize>().map_err(|_| {
                            Error::format(&manifest_path, format!("bad count in `{line}`"))
                        })
                    };
                    entries.push((file.to_owned(), count(pos)?, count(neg)?, rel.to_owned()));
                }
                "skipped" => skipped.push(v.to_owned()),
                _ => config.set(k, v)?,
            }
        }
        let feature_hash =
            feature_hash.ok_or_else(|| Error::format(&manifest_path, "missing feature_hash"))?;
        let kb_hash = kb_hash.ok_or_else(|| Error::format(&manifest_path, "missing kb_hash"))?;
        let features_path = dir.join("features.txt");
        let features = FeatureSet::parse_text(
            &fs::read_to_string(&features_path)
                .map_err(|e| Error::format(&features_path, e.to_string()))?,
            None,
        )?;
        if features.content_hash() != feature_hash {
            return Err(Error::HashMismatch {
                expected: feature_hash,
                found: features.content_hash(),
            });
        }
        let mut models = Vec::with_capacity(entries.len());
        for (file, positives, negatives, relation) in entries {
            let model = MlpModel::load_checked(dir.join(&file), &feature_hash)?;
            models.push(RelationModel {
                relation,
                model,
                log: Vec::new(),
                positives,
                negatives,
            });
        }
        Ok(ModelBundle {
            config,
            features,
            kb_hash,
            models,
            skipped,
        })
    }
}

fn model_file(i: usize) -> String {
    format!("rel_{i:05}.mlp")
}

/// Answers probabilistic queries with a bundle over the training KB: the
/// probability of `relation(a, b)` is the mean classifier output over `n`
/// sampled neighborhoods of `(a, b)`.
pub struct Engine<'a> {
    kb: &'a KnowledgeBase,
    graph: &'a GaifmanGraph,
    featurizer: Featurizer,
    models: HashMap<RelationId, &'a MlpModel>,
    radius: usize,
    bound: SizeBound,
    samples: usize,
    seed: u64,
}

impl<'a> Engine<'a> {
    /// Fails when the bundle was trained on a different KB.
    pub fn new(
        kb: &'a KnowledgeBase,
        graph: &'a GaifmanGraph,
        bundle: &'a ModelBundle,
    ) -> Result<Self> {
        let hash = kb.content_hash();
        if hash != bundle.kb_hash {
            return Err(Error::HashMismatch {
                expected: hash,
                found: bundle.kb_hash.clone(),
            });
        }
        Self::new_unchecked(kb, graph, bundle)
    }

    /// As [`Engine::new`] without comparing KB hashes.
    pub fn new_unchecked(
        kb: &'a KnowledgeBase,
        graph: &'a GaifmanGraph,
        bundle: &'a ModelBundle,
    ) -> Result<Self> {
        let featurizer = Featurizer::new(&bundle.features, kb, 2, bundle.config.transform)?;
        let mut models = HashMap::new();
        for m in &bundle.models {
            if m.model.input_dim() != featurizer.dim() {
                return Err(Error::DimensionMismatch {
                    expected: featurizer.dim(),
                    found: m.model.input_dim(),
                });
            }
            if let Some(r) = kb.relation_id(&m.relation) {
                models.insert(r, &m.model);
            }
        }
        Ok(Engine {
            kb,
            graph,
            featurizer,
            models,
            radius: bundle.config.radius,
            bound: bundle.config.bound,
            samples: bundle.config.n_infer,
            seed: rng::derive(bundle.config.seed, &[rng::TAG_INFER]),
        })
    }

    pub fn with_bound(mut self, bound: SizeBound) -> Self {
        self.bound = bound;
        self
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = n.max(1);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = rng::derive(seed, &[rng::TAG_INFER]);
        self
    }

    pub fn kb(&self) -> &KnowledgeBase {
        self.kb
    }

    pub fn graph(&self) -> &GaifmanGraph {
        self.graph
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn bound(&self) -> SizeBound {
        self.bound
    }

    pub fn has_model(&self, relation: RelationId) -> bool {
        self.models.contains_key(&relation)
    }

    pub fn sampler(&self) -> NeighborhoodSampler<'a> {
        NeighborhoodSampler::new(self.graph, self.radius, self.bound, self.seed)
    }

    /// Classifier outputs on each of the `n` sampled neighborhoods of `tuple`.
    pub fn sample_probs(
        &self,
        sampler: &mut NeighborhoodSampler<'_>,
        relation: RelationId,
        tuple: &[ObjectId],
    ) -> Result<Vec<f64>> {
        let model = self
            .models
            .get(&relation)
            .ok_or_else(|| Error::UnknownRelation(self.kb.relation_name(relation).to_owned()))?;
        let mut buf = Vec::new();
        sampler
            .sample(tuple, self.samples, rng::TAG_INFER)
            .into_iter()
            .map(|members| {
                let sub = self.kb.induce(&members)?;
                self.featurizer.featurize_into(&sub, tuple, &mut buf);
                Ok(model.predict(&buf))
            })
            .collect()
    }

    pub fn prob_with(
        &self,
        sampler: &mut NeighborhoodSampler<'_>,
        relation: RelationId,
        tuple: &[ObjectId],
    ) -> Result<f64> {
        let ps = self.sample_probs(sampler, relation, tuple)?;
        Ok(ps.iter().sum::<f64>() / ps.len() as f64)
    }

    /// `P(relation(tuple))`, the mean over `n` sampled neighborhoods.
    pub fn query_prob(&self, relation: &str, tuple: &[ObjectId]) -> Result<f64> {
        let r = self
            .kb
            .relation_id(relation)
            .filter(|r| self.models.contains_key(r))
            .ok_or_else(|| Error::UnknownRelation(relation.to_owned()))?;
        for &o in tuple {
            self.kb.check_object(o)?;
        }
        if tuple.len() != 2 {
            return Err(Error::ArityMismatch {
                relation: relation.to_owned(),
                expected: 2,
                found: tuple.len(),
            });
        }
        self.prob_with(&mut self.sampler(), r, tuple)
    }

    /// As [`Engine::query_prob`] with object names.
    pub fn query_prob_named(&self, head: &str, relation: &str, tail: &str) -> Result<f64> {
        let id = |n: &str| {
            self.kb
                .object_id(n)
                .ok_or_else(|| Error::UnknownObject(n.to_owned()))
        };
        self.query_prob(relation, &[id(head)?, id(tail)?])
    }
}
