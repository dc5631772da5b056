//! Feature vectors of sampled neighborhoods and labelled training datasets.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::GaifmanGraph;
use crate::kb::{KnowledgeBase, ObjectId, RelationId, Substructure};
use crate::logic::{result_set, CompiledFormula, FeatureSet, TargetQuery};
use crate::rng;
use crate::sampler::{corrupt, KnownTest, Label, NeighborhoodSampler, SamplerConfig, SizeBound};

/// Transform applied to counting features before they reach the model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Transform {
    /// Raw grounding counts.
    None,
    /// `ln(1 + v)`.
    #[default]
    Log1p,
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::None => "none",
            Transform::Log1p => "log1p",
        })
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "raw" => Ok(Transform::None),
            "log1p" => Ok(Transform::Log1p),
            other => Err(Error::InvalidConfig(format!("unknown transform `{other}`"))),
        }
    }
}

/// A feature vector `v` of length `|Φ|`, stored as its non-zero coordinates in
/// ascending index order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub tuple: Vec<ObjectId>,
    pub label: Label,
    dim: usize,
    entries: Vec<(u32, f32)>,
}

impl FeatureVector {
    pub fn from_sparse(
        tuple: Vec<ObjectId>,
        label: Label,
        dim: usize,
        mut entries: Vec<(u32, f32)>,
    ) -> Self {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_unstable_by_key(|&(i, _)| i);
        FeatureVector {
            tuple,
            label,
            dim,
            entries,
        }
    }

    pub fn from_dense(tuple: Vec<ObjectId>, label: Label, values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i as u32, *v as f32))
            .collect();
        FeatureVector {
            tuple,
            label,
            dim: values.len(),
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f32)] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> f32 {
        self.entries
            .binary_search_by_key(&(i as u32), |&(j, _)| j)
            .map_or(0.0, |p| self.entries[p].1)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i as usize] = f64::from(v);
        }
        out
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }
}

/// A feature set compiled against a knowledge base.
///
/// Features are bucketed by one relation they require; a bucket is only
/// evaluated when that relation occurs in the substructure. Features with no
/// required relation are evaluated everywhere.
#[derive(Clone, Debug)]
pub struct Featurizer {
    features: Vec<CompiledFormula>,
    always: Vec<u32>,
    buckets: HashMap<RelationId, Vec<u32>>,
    arity: usize,
    transform: Transform,
    hash: String,
}

impl Featurizer {
    pub fn new(
        set: &FeatureSet,
        kb: &KnowledgeBase,
        arity: usize,
        transform: Transform,
    ) -> Result<Self> {
        set.check_targets(arity)?;
        let features = set
            .formulas()
            .iter()
            .map(|f| CompiledFormula::compile(f, kb))
            .collect::<Result<Vec<_>>>()?;
        let mut always = Vec::new();
        let mut buckets: HashMap<RelationId, Vec<u32>> = HashMap::new();
        for (i, f) in features.iter().enumerate() {
            match f.required_relations().first() {
                Some(r) => buckets.entry(*r).or_default().push(i as u32),
                None => always.push(i as u32),
            }
        }
        Ok(Featurizer {
            features,
            always,
            buckets,
            arity,
            transform,
            hash: set.content_hash(),
        })
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    pub fn feature_hash(&self) -> &str {
        &self.hash
    }

    pub fn is_counting(&self, i: usize) -> bool {
        self.features[i].is_counting()
    }

    fn value(&self, i: u32, sub: &Substructure, tuple: &[ObjectId]) -> f32 {
        let f = &self.features[i as usize];
        if f.required_relations().iter().any(|r| !sub.has_relation(*r)) {
            return 0.0;
        }
        if f.is_counting() {
            let c = f.count_unchecked(sub, tuple) as f64;
            match self.transform {
                Transform::None => c as f32,
                Transform::Log1p => c.ln_1p() as f32,
            }
        } else if f.evaluate_unchecked(sub, tuple) {
            1.0
        } else {
            0.0
        }
    }

    /// Writes the non-zero coordinates of `v` for `tuple` in `sub` into `out`,
    /// sorted by feature index.
    pub fn featurize_into(
        &self,
        sub: &Substructure,
        tuple: &[ObjectId],
        out: &mut Vec<(u32, f32)>,
    ) {
        debug_assert_eq!(tuple.len(), self.arity);
        out.clear();
        for &i in &self.always {
            let v = self.value(i, sub, tuple);
            if v != 0.0 {
                out.push((i, v));
            }
        }
        for rel in sub.present_relations() {
            if let Some(bucket) = self.buckets.get(&rel) {
                for &i in bucket {
                    let v = self.value(i, sub, tuple);
                    if v != 0.0 {
                        out.push((i, v));
                    }
                }
            }
        }
        out.sort_unstable_by_key(|&(i, _)| i);
    }

    pub fn featurize(&self, sub: &Substructure, tuple: &[ObjectId]) -> Result<FeatureVector> {
        if tuple.len() != self.arity {
            return Err(Error::DimensionMismatch {
                expected: self.arity,
                found: tuple.len(),
            });
        }
        let mut entries = Vec::new();
        self.featurize_into(sub, tuple, &mut entries);
        Ok(FeatureVector {
            tuple: tuple.to_vec(),
            label: Label::Unlabeled,
            dim: self.dim(),
            entries,
        })
    }
}

/// One-shot featurization of `tuple` in `sub`.
pub fn featurize(
    kb: &KnowledgeBase,
    sub: &Substructure,
    tuple: &[ObjectId],
    features: &FeatureSet,
    transform: Transform,
) -> Result<FeatureVector> {
    Featurizer::new(features, kb, tuple.len(), transform)?.featurize(sub, tuple)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetMeta {
    pub query: String,
    pub radius: usize,
    pub bound: SizeBound,
    pub w: usize,
    pub w_neg: usize,
    pub seed: u64,
    pub transform: Transform,
    pub filter_known: bool,
    pub feature_hash: String,
    pub kb_hash: String,
    pub dim: usize,
    pub arity: usize,
    pub positives: usize,
    pub negatives: usize,
    pub forced_corruptions: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub examples: Vec<FeatureVector>,
}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    /// Reject corrupted tuples that are themselves in the result set.
    pub filter_known: bool,
    /// Log progress every this many tuples (0 disables).
    pub progress_every: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            filter_known: true,
            progress_every: 0,
        }
    }
}

struct TupleExamples {
    examples: Vec<FeatureVector>,
    forced: usize,
}

/// Builds the labelled dataset for `query`: for every tuple of its result set,
/// `w` positive neighborhoods and one neighborhood around each of `w_neg`
/// corrupted tuples. Output order is by tuple, positives first.
pub fn build_dataset(
    kb: &KnowledgeBase,
    graph: &GaifmanGraph,
    query: &TargetQuery,
    featurizer: &Featurizer,
    config: &SamplerConfig,
    options: &BuildOptions,
) -> Result<Dataset> {
    let positives: Vec<Vec<ObjectId>> = result_set(kb, query)?.into_iter().collect();
    build_dataset_from(kb, graph, query, &positives, featurizer, config, options)
}

/// As [`build_dataset`], with a precomputed result set.
pub fn build_dataset_from(
    kb: &KnowledgeBase,
    graph: &GaifmanGraph,
    query: &TargetQuery,
    positives: &[Vec<ObjectId>],
    featurizer: &Featurizer,
    config: &SamplerConfig,
    options: &BuildOptions,
) -> Result<Dataset> {
    if positives.is_empty() {
        return Err(Error::NoPositiveExamples);
    }
    config.validate(query.arity())?;
    if featurizer.arity() != query.arity() {
        return Err(Error::DimensionMismatch {
            expected: query.arity(),
            found: featurizer.arity(),
        });
    }
    if config.w_neg > 0 && kb.num_objects() <= 1 {
        return Err(Error::DomainTooSmall(kb.num_objects()));
    }
    let known: HashSet<&[ObjectId]> = positives.iter().map(Vec::as_slice).collect();
    let is_known = |t: &[ObjectId]| known.contains(t);

    let per_tuple = |sampler: &mut NeighborhoodSampler,
                     buf: &mut Vec<(u32, f32)>,
                     tuple: &Vec<ObjectId>|
     -> Result<TupleExamples> {
        let mut examples = Vec::with_capacity(config.w + config.w_neg);
        for members in sampler.sample(tuple, config.w, rng::TAG_POSITIVE) {
            let sub = kb.induce(&members)?;
            featurizer.featurize_into(&sub, tuple, buf);
            examples.push(FeatureVector::from_sparse(
                tuple.clone(),
                Label::Positive,
                featurizer.dim(),
                buf.clone(),
            ));
        }
        let known_filter: Option<KnownTest<'_>> = options.filter_known.then_some(&is_known);
        let corrupted = corrupt(kb, tuple, config.w_neg, config.seed, known_filter)?;
        let key = rng::tuple_key(tuple);
        for (j, neg) in corrupted.tuples.into_iter().enumerate() {
            let salt = rng::derive(rng::TAG_NEGATIVE, &[key, j as u64]);
            let members = sampler.sample(&neg, 1, salt).pop().expect("one sample");
            let sub = kb.induce(&members)?;
            featurizer.featurize_into(&sub, &neg, buf);
            examples.push(FeatureVector::from_sparse(
                neg,
                Label::Negative,
                featurizer.dim(),
                buf.clone(),
            ));
        }
        Ok(TupleExamples {
            examples,
            forced: corrupted.forced,
        })
    };

    let started = Instant::now();
    let chunk = if options.progress_every == 0 {
        positives.len()
    } else {
        options.progress_every
    };
    let mut examples = Vec::with_capacity(positives.len() * (config.w + config.w_neg));
    let mut forced = 0;
    for (ci, block) in positives.chunks(chunk).enumerate() {
        let results: Vec<Result<TupleExamples>> = block
            .par_iter()
            .map_init(
                || (NeighborhoodSampler::from_config(graph, config), Vec::new()),
                |(sampler, buf), tuple| per_tuple(sampler, buf, tuple),
            )
            .collect();
        for r in results {
            let r = r?;
            forced += r.forced;
            examples.extend(r.examples);
        }
        if options.progress_every > 0 {
            let done = ((ci + 1) * chunk).min(positives.len());
            let elapsed = started.elapsed().as_secs_f64();
            let eta = elapsed / done as f64 * (positives.len() - done) as f64;
            log::info!(
                "{}: {done}/{} tuples, {:.1}s elapsed, ETA {:.1}s",
                query.formula(),
                positives.len(),
                elapsed,
                eta
            );
        }
    }
    if forced > 0 {
        log::warn!("{forced} corrupted tuple(s) accepted although they are known positives");
    }
    let n_pos = examples
        .iter()
        .filter(|e| e.label == Label::Positive)
        .count();
    let meta = DatasetMeta {
        query: query.formula().to_string(),
        radius: config.radius,
        bound: config.bound,
        w: config.w,
        w_neg: config.w_neg,
        seed: config.seed,
        transform: featurizer.transform(),
        filter_known: options.filter_known,
        feature_hash: featurizer.feature_hash().to_owned(),
        kb_hash: kb.content_hash(),
        dim: featurizer.dim(),
        arity: query.arity(),
        positives: n_pos,
        negatives: examples.len() - n_pos,
        forced_corruptions: forced,
    };
    Ok(Dataset { meta, examples })
}

const DATASET_MAGIC: &str = "gaifman-dataset v1";

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    fn header(&self) -> String {
        let m = &self.meta;
        format!(
            "{DATASET_MAGIC}\nquery={}\nradius={}\nbound={}\nw={}\nw_neg={}\nseed={}\ntransform={}\nfilter_known={}\nfeature_hash={}\nkb_hash={}\ndim={}\narity={}\nexamples={}\npositives={}\nnegatives={}\nforced_corruptions={}\n\n",
            m.query, m.radius, m.bound, m.w, m.w_neg, m.seed, m.transform, m.filter_known,
            m.feature_hash, m.kb_hash, m.dim, m.arity, self.examples.len(), m.positives,
            m.negatives, m.forced_corruptions
        )
    }

    /// Plain-text header, a blank line, then little-endian columns of
    /// `examples` entries each: the label bytes, one u32 column per tuple
    /// position, one f32 column per feature.
    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        out.write_all(self.header().as_bytes())?;
        let labels: Vec<u8> = self
            .examples
            .iter()
            .map(|ex| match ex.label {
                Label::Positive => 1u8,
                Label::Negative => 0,
                Label::Unlabeled => 2,
            })
            .collect();
        out.write_all(&labels)?;
        for j in 0..self.meta.arity {
            for ex in &self.examples {
                out.write_all(&ex.tuple[j].0.to_le_bytes())?;
            }
        }
        for f in 0..self.meta.dim {
            for ex in &self.examples {
                out.write_all(&ex.get(f).to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = BufReader::new(File::open(path)?);
        let header = read_header(&mut reader, path)?;
        let get = |k: &str| -> Result<&str> {
            header
                .get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::format(path, format!("missing header field `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::format(path, format!("bad value for `{k}`")))
        };
        let meta = DatasetMeta {
            query: get("query")?.to_owned(),
            radius: num("radius")?,
            bound: get("bound")?.parse()?,
            w: num("w")?,
            w_neg: num("w_neg")?,
            seed: get("seed")?
                .parse()
                .map_err(|_| Error::format(path, "bad seed"))?,
            transform: get("transform")?.parse()?,
            filter_known: get("filter_known")? == "true",
            feature_hash: get("feature_hash")?.to_owned(),
            kb_hash: get("kb_hash")?.to_owned(),
            dim: num("dim")?,
            arity: num("arity")?,
            positives: num("positives")?,
            negatives: num("negatives")?,
            forced_corruptions: num("forced_corruptions")?,
        };
        let count = num("examples")?;
        let truncated = |what: &str| Error::format(path, format!("truncated in the {what} column"));
        let mut labels = vec![0u8; count];
        reader
            .read_exact(&mut labels)
            .map_err(|_| truncated("label"))?;
        let mut examples = labels
            .iter()
            .map(|&b| {
                let label = match b {
                    1 => Label::Positive,
                    0 => Label::Negative,
                    2 => Label::Unlabeled,
                    b => return Err(Error::format(path, format!("bad label byte {b}"))),
                };
                Ok(FeatureVector {
                    tuple: Vec::with_capacity(meta.arity),
                    label,
                    dim: meta.dim,
                    entries: Vec::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut column = vec![0u8; 4 * count];
        let words = |column: &[u8]| {
            column
                .chunks_exact(4)
                .map(|c| [c[0], c[1], c[2], c[3]])
                .collect::<Vec<_>>()
        };
        for j in 0..meta.arity {
            reader
                .read_exact(&mut column)
                .map_err(|_| truncated(&format!("s{}", j + 1)))?;
            for (ex, w) in examples.iter_mut().zip(words(&column)) {
                ex.tuple.push(ObjectId(u32::from_le_bytes(w)));
            }
        }
        for f in 0..meta.dim {
            reader
                .read_exact(&mut column)
                .map_err(|_| truncated(&format!("f{f}")))?;
            for (ex, w) in examples.iter_mut().zip(words(&column)) {
                let v = f32::from_le_bytes(w);
                if v != 0.0 {
                    ex.entries.push((f as u32, v));
                }
            }
        }
        let mut rest = [0u8; 1];
        if reader.read(&mut rest)? != 0 {
            return Err(Error::format(path, "trailing bytes after the last column"));
        }
        Ok(Dataset { meta, examples })
    }

    /// Loads a dataset and checks it was produced from the given artifacts.
    pub fn load_checked(path: impl AsRef<Path>, feature_hash: &str, kb_hash: &str) -> Result<Self> {
        let ds = Self::load(path)?;
        if ds.meta.feature_hash != feature_hash {
            return Err(Error::HashMismatch {
                expected: feature_hash.to_owned(),
                found: ds.meta.feature_hash,
            });
        }
        if ds.meta.kb_hash != kb_hash {
            return Err(Error::HashMismatch {
                expected: kb_hash.to_owned(),
                found: ds.meta.kb_hash,
            });
        }
        Ok(ds)
    }

    /// CSV dump: `label,s1..sn,f0..f{dim-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        let mut cols = vec!["label".to_owned()];
        cols.extend((1..=self.meta.arity).map(|i| format!("s{i}")));
        cols.extend((0..self.meta.dim).map(|i| format!("f{i}")));
        writeln!(out, "{}", cols.join(","))?;
        for ex in &self.examples {
            let label = match ex.label {
                Label::Positive => "1",
                Label::Negative => "0",
                Label::Unlabeled => "",
            };
            write!(out, "{label}")?;
            for o in &ex.tuple {
                write!(out, ",{}", o.0)?;
            }
            for v in ex.to_dense() {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Reads `key=value` lines after a magic line until the first blank line.
pub(crate) fn read_header<R: BufRead>(
    reader: &mut R,
    path: &Path,
) -> Result<HashMap<String, String>> {
    let mut fields = HashMap::new();
    let mut line = String::new();
    let mut first = true;
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::format(path, "truncated: header is not terminated"));
        }
        let l = line.trim_end_matches(['\n', '\r']);
        if first {
            fields.insert("__magic".to_owned(), l.to_owned());
            first = false;
            continue;
        }
        if l.is_empty() {
            break;
        }
        let (k, v) = l
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("bad header line `{l}`")))?;
        fields.insert(k.to_owned(), v.to_owned());
    }
    Ok(fields)
}
