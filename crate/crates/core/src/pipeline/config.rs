use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::featurizer::Transform;
use crate::mlp::MlpConfig;
use crate::sampler::{SamplerConfig, SizeBound};

/// Every knob of a trained model family: neighborhood radius and size bound,
/// sample counts for training and inference, the feature transform, the
/// classifier hyperparameters and the run seed.
#[derive(Clone, Debug, PartialEq)]
pub struct GaifmanConfig {
    pub radius: usize,
    pub bound: SizeBound,
    pub w: usize,
    pub w_neg: usize,
    /// Neighborhood samples averaged per answer at inference time.
    pub n_infer: usize,
    pub transform: Transform,
    /// Redraw corrupted tuples that are known positives.
    pub filter_known: bool,
    pub mlp: MlpConfig,
    pub seed: u64,
}

impl Default for GaifmanConfig {
    fn default() -> Self {
        let s = SamplerConfig::default();
        GaifmanConfig {
            radius: s.radius,
            bound: s.bound,
            w: s.w,
            w_neg: s.w_neg,
            n_infer: 1,
            transform: Transform::default(),
            filter_known: true,
            mlp: MlpConfig::default(),
            seed: 0,
        }
    }
}

/// Config keys, in the order they are written.
pub const CONFIG_KEYS: &[&str] = &[
    "r",
    "k",
    "w",
    "neg",
    "n",
    "transform",
    "filter_known",
    "seed",
    "hidden",
    "dropout",
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "batch_size",
    "epochs",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("invalid value `{value}` for `{key}`")))
}

impl GaifmanConfig {
    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            radius: self.radius,
            bound: self.bound,
            w: self.w,
            w_neg: self.w_neg,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_infer == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        self.sampler().validate(2)?;
        let mut mlp = self.mlp.clone();
        mlp.input_dim = mlp.input_dim.max(1);
        mlp.validate()
    }

    /// Sets one `key=value` entry; keys are those of [`CONFIG_KEYS`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "r" | "radius" => self.radius = parse_num(key, v)?,
            "k" | "bound" => self.bound = v.parse()?,
            "w" => self.w = parse_num(key, v)?,
            "neg" | "w_neg" => self.w_neg = parse_num(key, v)?,
            "n" | "n_infer" => self.n_infer = parse_num(key, v)?,
            "transform" => self.transform = v.parse()?,
            "filter_known" => self.filter_known = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "hidden" => {
                self.mlp.hidden = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',')
                        .map(|w| parse_num(key, w))
                        .collect::<Result<_>>()?
                }
            }
            "dropout" => self.mlp.dropout = parse_num(key, v)?,
            "learning_rate" | "lr" => self.mlp.learning_rate = parse_num(key, v)?,
            "beta1" => self.mlp.beta1 = parse_num(key, v)?,
            "beta2" => self.mlp.beta2 = parse_num(key, v)?,
            "epsilon" => self.mlp.epsilon = parse_num(key, v)?,
            "batch_size" => self.mlp.batch_size = parse_num(key, v)?,
            "epochs" => self.mlp.epochs = parse_num(key, v)?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown config key `{other}`"
                )))
            }
        }
        Ok(())
    }

    /// Applies a plain-text config: `key=value` lines, `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("config line {}: expected key=value", i + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let hidden: Vec<String> = self.mlp.hidden.iter().map(usize::to_string).collect();
        let values = [
            self.radius.to_string(),
            self.bound.to_string(),
            self.w.to_string(),
            self.w_neg.to_string(),
            self.n_infer.to_string(),
            self.transform.to_string(),
            self.filter_known.to_string(),
            self.seed.to_string(),
            hidden.join(","),
            self.mlp.dropout.to_string(),
            self.mlp.learning_rate.to_string(),
            self.mlp.beta1.to_string(),
            self.mlp.beta2.to_string(),
            self.mlp.epsilon.to_string(),
            self.mlp.batch_size.to_string(),
            self.mlp.epochs.to_string(),
        ];
        CONFIG_KEYS.iter().copied().zip(values).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}
