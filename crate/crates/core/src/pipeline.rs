//! End-to-end fitting and prediction for every model kind, plus the on-disk
//! model directory.
//!
//! A model directory holds `manifest.json` and, per kind:
//!
//! | kind          | files                                         |
//! |---------------|-----------------------------------------------|
//! | svr           | `model.json`, `vocab.json`, `replacements.json` |
//! | slstm / elstm | `model.bin`                                   |
//!
//! The manifest records the full config, its hash, every derived seed, the
//! training data checksum and a checksum of each model file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blstm::{self, BlstmModel};
use crate::config::{hex, ExperimentConfig, ModelKind};
use crate::corpus::HeadlineInstance;
use crate::embeddings::{build_replacement_lexicon, load_word2vec_binary, load_word2vec_text, WordVectors};
use crate::error::{Error, Result};
use crate::eval::Estimator;
use crate::features::{
    apply_replacements, extract_ngrams, fit_vocabulary, vectorize, ReplacementConfig, ReplacementGroup,
    SparseFeatureVector, Vocabulary,
};
use crate::seed;
use crate::svr::{train_svr, SvrModel};
use crate::tokenize::Tokenizer;

pub const MANIFEST_VERSION: u32 = 1;
pub const SVR_SEED_LABEL: &str = "svr";
pub const BLSTM_SEED_LABEL: &str = "blstm";
pub const VALIDATION_SEED_LABEL: &str = "blstm/validation";

/// Reads word2vec text for `.txt` / `.vec` files and binary otherwise.
pub fn load_word_vectors(path: &Path) -> Result<WordVectors> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("txt" | "vec") => load_word2vec_text(path),
        _ => load_word2vec_binary(path),
    }
}

/// SHA-256 of a byte string, hex encoded.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn labeled(train: &[HeadlineInstance]) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(Error::EmptyDataset("training set"));
    }
    train
        .iter()
        .enumerate()
        .map(|(record, i)| {
            i.gold_score.ok_or(Error::EmptyField {
                record,
                field: "sentiment",
            })
        })
        .collect()
}

fn require_embeddings<'a>(cfg: &ExperimentConfig, wv: Option<&'a WordVectors>) -> Result<&'a WordVectors> {
    wv.ok_or_else(|| {
        Error::Config(format!(
            "model kind {:?} with replacement groups {:?} needs an embedding file",
            cfg.model_kind, cfg.replacements.groups
        ))
    })
}

/// Builds the replacement tables from the training companies and the
/// embedding lexicons of the enabled groups.
pub fn build_replacements(
    cfg: &ExperimentConfig,
    train: &[HeadlineInstance],
    wv: Option<&WordVectors>,
) -> Result<ReplacementConfig> {
    let groups = &cfg.replacements.groups;
    if groups.is_empty() {
        return Ok(ReplacementConfig::disabled());
    }
    let r = &cfg.replacements;
    let lexicon = |group, seed: &str, n| -> Result<_> {
        if groups.contains(&group) {
            build_replacement_lexicon(require_embeddings(cfg, wv)?, seed, n).map(Some)
        } else {
            Ok(None)
        }
    };
    let positive = lexicon(ReplacementGroup::Positive, &r.positive_seed, r.positive_n)?;
    let negative = lexicon(ReplacementGroup::Negative, &r.negative_seed, r.negative_n)?;
    Ok(ReplacementConfig::new(
        train.iter().map(|i| i.company.as_str()),
        &cfg.tokenizer(),
        positive,
        negative,
        groups.clone(),
    ))
}

/// Tokenizer, replacements, vocabulary and linear SVR.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrPipeline {
    pub tokenizer: Tokenizer,
    pub ngram_orders: BTreeSet<usize>,
    pub aspect_features: bool,
    pub normalize: bool,
    pub replacements: ReplacementConfig,
    pub vocab: Vocabulary,
    pub model: SvrModel,
}

impl SvrPipeline {
    pub fn fit(cfg: &ExperimentConfig, train: &[HeadlineInstance], wv: Option<&WordVectors>) -> Result<Self> {
        let y = labeled(train)?;
        let replacements = build_replacements(cfg, train, wv)?;
        let tokenizer = cfg.tokenizer();
        let grams: Vec<Vec<String>> = train
            .iter()
            .map(|i| grams_of(&tokenizer, &replacements, &cfg.ngram_orders, &i.sentence))
            .collect();
        let aspects: Vec<&str> = if cfg.aspect_features {
            train.iter().map(|i| i.company.as_str()).collect()
        } else {
            Vec::new()
        };
        let vocab = fit_vocabulary(grams.iter().map(Vec::as_slice), aspects, cfg.binary_features);
        let x: Vec<SparseFeatureVector> = train
            .iter()
            .zip(&grams)
            .map(|(i, g)| featurize(&vocab, cfg.aspect_features, cfg.normalize_features, g, &i.company))
            .collect::<Result<_>>()?;
        let svr_cfg = crate::svr::SvrConfig {
            seed: seed::derive(cfg.seed, SVR_SEED_LABEL),
            ..cfg.svr
        };
        let model = train_svr(&x, &y, &svr_cfg)?;
        Ok(SvrPipeline {
            tokenizer,
            ngram_orders: cfg.ngram_orders.clone(),
            aspect_features: cfg.aspect_features,
            normalize: cfg.normalize_features,
            replacements,
            vocab,
            model,
        })
    }

    pub fn grams(&self, sentence: &str) -> Vec<String> {
        grams_of(&self.tokenizer, &self.replacements, &self.ngram_orders, sentence)
    }

    pub fn featurize(&self, instance: &HeadlineInstance) -> Result<SparseFeatureVector> {
        featurize(
            &self.vocab,
            self.aspect_features,
            self.normalize,
            &self.grams(&instance.sentence),
            &instance.company,
        )
    }

    pub fn predict(&self, instances: &[HeadlineInstance]) -> Result<Vec<f64>> {
        instances
            .par_iter()
            .map(|i| self.model.predict(&self.featurize(i)?))
            .collect()
    }
}

fn featurize(
    vocab: &Vocabulary,
    aspect_features: bool,
    normalize: bool,
    grams: &[String],
    company: &str,
) -> Result<SparseFeatureVector> {
    let v = vectorize(grams, aspect_features.then_some(company), vocab);
    if !normalize || v.entries.is_empty() {
        return Ok(v);
    }
    let norm = v.squared_norm().sqrt();
    SparseFeatureVector::new(v.entries.iter().map(|&(c, x)| (c, x / norm)).collect(), v.width)
}

fn grams_of(
    tokenizer: &Tokenizer,
    replacements: &ReplacementConfig,
    orders: &BTreeSet<usize>,
    sentence: &str,
) -> Vec<String> {
    extract_ngrams(&apply_replacements(&tokenizer.tokenize(sentence), replacements), orders)
}

/// Tokenizer and BLSTM. Embeddings are supplied at prediction time.
#[derive(Debug, Clone, PartialEq)]
pub struct BlstmPipeline {
    pub tokenizer: Tokenizer,
    pub model: BlstmModel,
}

impl BlstmPipeline {
    pub fn fit(cfg: &ExperimentConfig, train: &[HeadlineInstance], wv: &WordVectors) -> Result<Self> {
        labeled(train)?;
        let variant = cfg
            .model_kind
            .variant()
            .ok_or_else(|| Error::Config("BLSTM pipeline needs model_kind slstm or elstm".into()))?;
        let tokenizer = cfg.tokenizer();
        let bcfg = blstm::BlstmConfig {
            variant,
            seed: seed::derive(cfg.seed, BLSTM_SEED_LABEL),
            ..cfg.blstm
        };
        let model = match variant {
            blstm::Variant::Slstm => blstm::train_slstm(train, wv, &tokenizer, &bcfg)?,
            blstm::Variant::Elstm => {
                let split_seed = seed::derive(cfg.seed, VALIDATION_SEED_LABEL);
                let (fit_part, val_part) = blstm::split_validation(train, bcfg.val_fraction, split_seed)?;
                // the sequence length comes from the whole training set
                let bcfg = blstm::BlstmConfig {
                    max_len: Some(bcfg.max_len.unwrap_or_else(|| blstm::longest_sentence(train, &tokenizer))),
                    ..bcfg
                };
                blstm::train_elstm(&fit_part, &val_part, wv, &tokenizer, &bcfg)?
            }
        };
        Ok(BlstmPipeline { tokenizer, model })
    }

    pub fn predict(&self, instances: &[HeadlineInstance], wv: &WordVectors) -> Result<Vec<f64>> {
        let sentences: Vec<&str> = instances.iter().map(|i| i.sentence.as_str()).collect();
        let seqs = self.model.encode(&sentences, wv, &self.tokenizer)?;
        self.model.predict_all(&seqs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pipeline {
    Svr(SvrPipeline),
    Blstm(BlstmPipeline),
}

/// A fitted pipeline together with the config that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: ExperimentConfig,
    pub pipeline: Pipeline,
}

impl TrainedModel {
    pub fn fit(cfg: &ExperimentConfig, train: &[HeadlineInstance], wv: Option<&WordVectors>) -> Result<Self> {
        cfg.validate()?;
        if cfg.needs_embeddings() {
            require_embeddings(cfg, wv)?;
        }
        let pipeline = match cfg.model_kind {
            ModelKind::Svr => Pipeline::Svr(SvrPipeline::fit(cfg, train, wv)?),
            ModelKind::Slstm | ModelKind::Elstm => {
                Pipeline::Blstm(BlstmPipeline::fit(cfg, train, require_embeddings(cfg, wv)?)?)
            }
        };
        Ok(TrainedModel {
            config: cfg.clone(),
            pipeline,
        })
    }

    /// Raw scores in input order; `clamp` limits them to `[-1, 1]`.
    pub fn predict(&self, instances: &[HeadlineInstance], wv: Option<&WordVectors>, clamp: bool) -> Result<Vec<f64>> {
        let mut scores = match &self.pipeline {
            Pipeline::Svr(p) => p.predict(instances)?,
            Pipeline::Blstm(p) => p.predict(instances, require_embeddings(&self.config, wv)?)?,
        };
        if clamp {
            for s in &mut scores {
                *s = s.clamp(-1.0, 1.0);
            }
        }
        Ok(scores)
    }

    /// Labeled seeds actually used by this config.
    pub fn derived_seeds(&self) -> BTreeMap<String, u64> {
        let labels: &[&str] = match self.config.model_kind {
            ModelKind::Svr => &[SVR_SEED_LABEL],
            ModelKind::Slstm => &[BLSTM_SEED_LABEL],
            ModelKind::Elstm => &[BLSTM_SEED_LABEL, VALIDATION_SEED_LABEL],
        };
        labels
            .iter()
            .map(|l| (l.to_string(), seed::derive(self.config.seed, l)))
            .collect()
    }

    fn files(&self) -> Vec<(&'static str, Vec<u8>)> {
        match &self.pipeline {
            Pipeline::Svr(p) => vec![
                ("model.json", p.model.to_json().into_bytes()),
                ("vocab.json", p.vocab.to_json().into_bytes()),
                (
                    "replacements.json",
                    serde_json::to_string_pretty(&p.replacements).expect("plain data").into_bytes(),
                ),
            ],
            Pipeline::Blstm(p) => vec![("model.bin", p.model.to_bytes())],
        }
    }

    /// Writes the model files and the manifest into `dir`, creating it.
    pub fn save(&self, dir: &Path, dataset: &DatasetInfo) -> Result<Manifest> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut checksums = BTreeMap::new();
        for (name, bytes) in self.files() {
            let path = dir.join(name);
            fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            checksums.insert(name.to_string(), sha256_hex(&bytes));
        }
        let manifest = Manifest {
            version: MANIFEST_VERSION,
            model_kind: self.config.model_kind,
            config_sha256: self.config.fingerprint(),
            root_seed: self.config.seed,
            derived_seeds: self.derived_seeds(),
            dataset: dataset.clone(),
            files: checksums,
            config: self.config.clone(),
        };
        let path = dir.join("manifest.json");
        fs::write(&path, manifest.to_json()).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    /// Reads a model directory, checking every file against the manifest.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = Manifest::load(dir)?;
        let read = |name: &str| -> Result<Vec<u8>> {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            match manifest.files.get(name) {
                Some(sum) if *sum == sha256_hex(&bytes) => Ok(bytes),
                Some(_) => Err(Error::VocabularyMismatch(format!("{name} does not match its manifest checksum"))),
                None => Err(Error::VocabularyMismatch(format!(
                    "manifest for a {:?} model does not list {name}",
                    manifest.model_kind
                ))),
            }
        };
        let text = |name: &str| -> Result<String> {
            String::from_utf8(read(name)?).map_err(|_| Error::VocabularyMismatch(format!("{name} is not UTF-8")))
        };
        let cfg = manifest.config.clone();
        let pipeline = match manifest.model_kind {
            ModelKind::Svr => {
                let model = SvrModel::from_json(&text("model.json")?)?;
                let vocab = Vocabulary::from_json(&text("vocab.json")?)?;
                let replacements: ReplacementConfig = serde_json::from_str(&text("replacements.json")?)
                    .map_err(|e| Error::VocabularyMismatch(format!("replacements.json: {e}")))?;
                if vocab.width() != model.width() {
                    return Err(Error::VocabularyMismatch(format!(
                        "vocabulary has {} columns but the model has {} weights",
                        vocab.width(),
                        model.width()
                    )));
                }
                Pipeline::Svr(SvrPipeline {
                    tokenizer: cfg.tokenizer(),
                    ngram_orders: cfg.ngram_orders.clone(),
                    aspect_features: cfg.aspect_features,
                    normalize: cfg.normalize_features,
                    replacements,
                    vocab,
                    model,
                })
            }
            kind @ (ModelKind::Slstm | ModelKind::Elstm) => {
                let model = BlstmModel::from_bytes(&read("model.bin")?)?;
                if Some(model.config.variant) != kind.variant() {
                    return Err(Error::VocabularyMismatch(format!(
                        "manifest says {kind:?} but model.bin holds {:?}",
                        model.config.variant
                    )));
                }
                Pipeline::Blstm(BlstmPipeline {
                    tokenizer: cfg.tokenizer(),
                    model,
                })
            }
        };
        Ok(TrainedModel { config: cfg, pipeline })
    }
}

/// Where the training data came from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub sha256: String,
    pub n_instances: usize,
}

impl DatasetInfo {
    pub fn from_bytes(bytes: &[u8], n_instances: usize) -> Self {
        DatasetInfo {
            sha256: sha256_hex(bytes),
            n_instances,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub model_kind: ModelKind,
    pub config_sha256: String,
    pub root_seed: u64,
    pub derived_seeds: BTreeMap<String, u64>,
    pub dataset: DatasetInfo,
    pub files: BTreeMap<String, String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let raw = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest =
            serde_json::from_str(&raw).map_err(|e| Error::VocabularyMismatch(format!("manifest.json: {e}")))?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::VocabularyMismatch(format!("unsupported manifest version {}", m.version)));
        }
        if m.config.fingerprint() != m.config_sha256 {
            return Err(Error::VocabularyMismatch("manifest config does not match its hash".into()));
        }
        Ok(m)
    }
}

/// Cross-validation adapter: fits a [`TrainedModel`] from a config on each
/// training partition.
pub struct ConfigEstimator<'a> {
    pub config: &'a ExperimentConfig,
    pub embeddings: Option<&'a WordVectors>,
}

impl Estimator for ConfigEstimator<'_> {
    fn fit_predict(&self, train: &[HeadlineInstance], test: &[HeadlineInstance]) -> Result<Vec<f64>> {
        TrainedModel::fit(self.config, train, self.embeddings)?.predict(test, self.embeddings, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn no_replacements() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.replacements.groups.clear();
        cfg
    }

    #[test]
    fn svr_fits_training_data() {
        let data = synthetic::headlines(40, 1);
        let mut cfg = no_replacements();
        cfg.svr.c = 10.0;
        let model = TrainedModel::fit(&cfg, &data, None).unwrap();
        let preds = model.predict(&data, None, false).unwrap();
        let gold: Vec<f64> = data.iter().map(|i| i.gold_score.unwrap()).collect();
        let mean = gold.iter().sum::<f64>() / gold.len() as f64;
        let mae = |p: &dyn Fn(usize) -> f64| gold.iter().enumerate().map(|(i, y)| (p(i) - y).abs()).sum::<f64>();
        let fitted = mae(&|i| preds[i]);
        let baseline = mae(&|_| mean);
        assert!(fitted < 0.25 * baseline, "fitted {fitted} vs baseline {baseline}");
    }

    #[test]
    fn missing_embeddings_is_config_error() {
        let data = synthetic::headlines(10, 1);
        let err = TrainedModel::fit(&ExperimentConfig::default(), &data, None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn replacements_use_lexicons() {
        let wv = synthetic::embeddings(16, 3);
        let data = synthetic::headlines(30, 2);
        let model = TrainedModel::fit(&ExperimentConfig::default(), &data, Some(&wv)).unwrap();
        let Pipeline::Svr(p) = &model.pipeline else { panic!() };
        assert_eq!(p.replacements.positive.as_ref().unwrap().words.len(), 10);
        assert!(p.vocab.gram_column(crate::tokenize::COMPANY_TOKEN).is_some());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let wv = synthetic::embeddings(16, 3);
        let data = synthetic::headlines(30, 2);
        let model = TrainedModel::fit(&ExperimentConfig::default(), &data, Some(&wv)).unwrap();
        model.save(dir.path(), &DatasetInfo::default()).unwrap();
        let back = TrainedModel::load(dir.path()).unwrap();
        assert_eq!(
            back.predict(&data, None, false).unwrap(),
            model.predict(&data, None, false).unwrap()
        );
        fs::write(dir.path().join("vocab.json"), "{}").unwrap();
        assert!(matches!(TrainedModel::load(dir.path()), Err(Error::VocabularyMismatch(_))));
    }

    #[test]
    fn clamp_bounds_output() {
        let data = synthetic::headlines(20, 4);
        let mut cfg = no_replacements();
        cfg.svr.c = 100.0;
        let model = TrainedModel::fit(&cfg, &data, None).unwrap();
        let mut odd = data[0].clone();
        odd.sentence = format!("{} {} {}", odd.sentence, odd.sentence, odd.sentence);
        let preds = model.predict(&[odd], None, true).unwrap();
        assert!(preds.iter().all(|p| (-1.0..=1.0).contains(p)));
    }
}
