//! Experiment configuration: one TOML document describes a full run.
//!
//! Resolution order: preset or file, then `--set key=value` overrides
//! (dotted keys reach into tables, e.g. `svr.C=1`), then the `FINSENT_SEED`
//! environment variable for the root seed.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blstm::{BlstmConfig, Variant};
use crate::error::{Error, Result};
use crate::eval::MetricSelector;
use crate::features::ReplacementGroup;
use crate::svr::{SvrConfig, C_GRID, EPSILON_GRID};
use crate::tokenize::{Tokenizer, TokenizerKind};

pub const SEED_ENV: &str = "FINSENT_SEED";

pub const PRESETS: [(&str, &str); 3] = [
    ("best-svr", include_str!("../presets/best-svr.toml")),
    ("slstm", include_str!("../presets/slstm.toml")),
    ("elstm", include_str!("../presets/elstm.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Svr,
    Slstm,
    Elstm,
}

impl ModelKind {
    pub fn variant(self) -> Option<Variant> {
        match self {
            ModelKind::Svr => None,
            ModelKind::Slstm => Some(Variant::Slstm),
            ModelKind::Elstm => Some(Variant::Elstm),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplacementSettings {
    pub groups: BTreeSet<ReplacementGroup>,
    pub positive_seed: String,
    pub negative_seed: String,
    pub positive_n: usize,
    pub negative_n: usize,
}

impl Default for ReplacementSettings {
    fn default() -> Self {
        ReplacementSettings {
            groups: [
                ReplacementGroup::Company,
                ReplacementGroup::Positive,
                ReplacementGroup::Negative,
            ]
            .into(),
            positive_seed: "excellent".into(),
            negative_seed: "poor".into(),
            positive_n: 10,
            negative_n: 10,
        }
    }
}

impl ReplacementSettings {
    pub fn needs_embeddings(&self) -> bool {
        self.groups.contains(&ReplacementGroup::Positive)
            || self.groups.contains(&ReplacementGroup::Negative)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub k: usize,
    pub metric: MetricSelector,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings {
            k: 5,
            metric: MetricSelector::Metric1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model_kind: ModelKind,
    /// Root seed; every random stream is derived from it by label.
    pub seed: u64,
    pub tokenizer: TokenizerKind,
    pub lowercase: bool,
    pub ngram_orders: BTreeSet<usize>,
    pub binary_features: bool,
    pub aspect_features: bool,
    /// Scale every SVR feature vector to unit L2 norm.
    pub normalize_features: bool,
    pub embedding_path: Option<PathBuf>,
    pub replacements: ReplacementSettings,
    pub svr: SvrConfig,
    pub blstm: BlstmConfig,
    pub cv: CvSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model_kind: ModelKind::Svr,
            seed: 0,
            tokenizer: TokenizerKind::Rules,
            lowercase: true,
            ngram_orders: [1, 2].into(),
            binary_features: true,
            aspect_features: true,
            normalize_features: false,
            embedding_path: None,
            replacements: ReplacementSettings::default(),
            svr: SvrConfig::default(),
            blstm: BlstmConfig::default(),
            cv: CvSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let raw = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, raw)| *raw)
            .ok_or_else(|| {
                let names: Vec<_> = PRESETS.iter().map(|p| p.0).collect();
                Error::Config(format!("unknown preset {name:?}; available: {}", names.join(", ")))
            })?;
        Self::from_toml(raw)
    }

    pub fn from_toml(raw: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(raw).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&raw)
    }

    /// Builds a config from an optional preset or file plus overrides.
    /// `env_seed` is the raw value of [`SEED_ENV`], if set.
    pub fn resolve(
        preset: Option<&str>,
        file: Option<&Path>,
        overrides: &[String],
        env_seed: Option<&str>,
    ) -> Result<Self> {
        let base = match (preset, file) {
            (Some(_), Some(_)) => return Err(Error::Config("give either a preset or a config file".into())),
            (Some(name), None) => Self::preset(name)?,
            (None, Some(path)) => Self::load(path)?,
            (None, None) => Self::default(),
        };
        let mut cfg = base.with_overrides(overrides)?;
        if let Some(raw) = env_seed {
            cfg.seed = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={raw:?} is not an unsigned integer")))?;
            cfg.validate()?;
        }
        Ok(cfg)
    }

    /// Applies `key=value` assignments. Values are parsed as TOML, falling
    /// back to a bare string.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for assignment in overrides {
            let (key, raw) = assignment
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
            set_path(&mut doc, key.trim(), parse_value(raw.trim()))?;
        }
        let cfg: Self = doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.ngram_orders.is_empty() || self.ngram_orders.iter().any(|&n| n != 1 && n != 2) {
            return fail(format!("ngram_orders must be a non-empty subset of {{1, 2}}, got {:?}", self.ngram_orders));
        }
        let r = &self.replacements;
        if r.groups.contains(&ReplacementGroup::Positive) && (r.positive_seed.trim().is_empty() || r.positive_n == 0) {
            return fail("positive replacement needs a seed word and positive_n >= 1".into());
        }
        if r.groups.contains(&ReplacementGroup::Negative) && (r.negative_seed.trim().is_empty() || r.negative_n == 0) {
            return fail("negative replacement needs a seed word and negative_n >= 1".into());
        }
        if [self.seed, self.svr.seed, self.blstm.seed].iter().any(|&s| s > i64::MAX as u64) {
            return fail(format!("seeds must not exceed {}", i64::MAX));
        }
        if self.cv.k < 2 {
            return fail(format!("cv.k must be at least 2, got {}", self.cv.k));
        }
        self.svr.validate()?;
        self.blstm.validate()?;
        if let Some(v) = self.model_kind.variant() {
            if v != self.blstm.variant {
                return fail(format!(
                    "model_kind {:?} does not match blstm.variant {:?}",
                    self.model_kind, self.blstm.variant
                ));
            }
        }
        Ok(())
    }

    pub fn tokenizer(&self) -> Tokenizer {
        Tokenizer {
            kind: self.tokenizer,
            lowercase: self.lowercase,
        }
    }

    pub fn needs_embeddings(&self) -> bool {
        match self.model_kind {
            ModelKind::Svr => self.replacements.needs_embeddings(),
            ModelKind::Slstm | ModelKind::Elstm => true,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(doc: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {part:?} is not inside a table")))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Err(Error::Config("empty override key".into()))
}

/// Axes of the cross-validation search. Every combination becomes one
/// config; replacement "on" enables all three groups with the same N for
/// both lexicons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvGrid {
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub tokenizers: Vec<TokenizerKind>,
    pub ngram_orders: Vec<BTreeSet<usize>>,
    pub replacements: Vec<bool>,
    pub n_values: Vec<usize>,
    pub aspect_features: Vec<bool>,
}

impl Default for CvGrid {
    fn default() -> Self {
        CvGrid {
            c: C_GRID.to_vec(),
            epsilon: EPSILON_GRID.to_vec(),
            tokenizers: vec![TokenizerKind::Whitespace, TokenizerKind::Rules],
            ngram_orders: vec![[1].into(), [2].into(), [1, 2].into()],
            replacements: vec![false, true],
            n_values: vec![5, 10, 20],
            aspect_features: vec![false, true],
        }
    }
}

/// One expanded grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub label: String,
    pub config: ExperimentConfig,
}

impl CvGrid {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&raw).map_err(|e| Error::Config(e.to_string()))
    }

    /// All combinations over `base`, in a fixed nested order. N only varies
    /// when replacement is on.
    pub fn expand(&self, base: &ExperimentConfig) -> Result<Vec<GridPoint>> {
        let axes = [
            ("C", self.c.len()),
            ("epsilon", self.epsilon.len()),
            ("tokenizers", self.tokenizers.len()),
            ("ngram_orders", self.ngram_orders.len()),
            ("replacements", self.replacements.len()),
            ("aspect_features", self.aspect_features.len()),
        ];
        if let Some((name, _)) = axes.iter().find(|a| a.1 == 0) {
            return Err(Error::Config(format!("grid axis {name} is empty")));
        }
        if self.replacements.contains(&true) && self.n_values.is_empty() {
            return Err(Error::Config("grid axis n_values is empty".into()));
        }
        let mut points = Vec::new();
        for &c in &self.c {
            for &eps in &self.epsilon {
                for &tok in &self.tokenizers {
                    for orders in &self.ngram_orders {
                        for &repl in &self.replacements {
                            let ns: Vec<Option<usize>> = if repl {
                                self.n_values.iter().map(|&n| Some(n)).collect()
                            } else {
                                vec![None]
                            };
                            for n in ns {
                                for &aspect in &self.aspect_features {
                                    let mut cfg = base.clone();
                                    cfg.model_kind = ModelKind::Svr;
                                    cfg.svr.c = c;
                                    cfg.svr.epsilon = eps;
                                    cfg.tokenizer = tok;
                                    cfg.ngram_orders = orders.clone();
                                    cfg.aspect_features = aspect;
                                    match n {
                                        Some(n) => {
                                            cfg.replacements.groups = ReplacementSettings::default().groups;
                                            cfg.replacements.positive_n = n;
                                            cfg.replacements.negative_n = n;
                                        }
                                        None => cfg.replacements.groups.clear(),
                                    }
                                    cfg.validate()?;
                                    let orders: Vec<String> = orders.iter().map(|o| o.to_string()).collect();
                                    let label = format!(
                                        "C={c} eps={eps} tok={} ngrams={} repl={} aspect={aspect}",
                                        match tok {
                                            TokenizerKind::Whitespace => "whitespace",
                                            TokenizerKind::Rules => "rules",
                                        },
                                        orders.join("+"),
                                        n.map_or("off".to_string(), |n| format!("N{n}")),
                                    );
                                    points.push(GridPoint { label, config: cfg });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        let best = ExperimentConfig::preset("best-svr").unwrap();
        assert_eq!(best, ExperimentConfig::default());
        assert_eq!(best.svr.c, 0.1);
        assert_eq!(best.svr.epsilon, 0.01);
        assert_eq!(best.replacements.positive_n, 10);
        let s = ExperimentConfig::preset("slstm").unwrap();
        assert_eq!(s.model_kind, ModelKind::Slstm);
        assert_eq!(s.blstm.epochs, 25);
        let e = ExperimentConfig::preset("elstm").unwrap();
        assert_eq!(e.blstm.variant, Variant::Elstm);
        assert_eq!(e.blstm.patience, 10);
        assert!(ExperimentConfig::preset("nope").is_err());
    }

    #[test]
    fn overrides_and_env_seed() {
        let sets = vec!["svr.C=1".to_string(), "tokenizer=whitespace".to_string(), "ngram_orders=[1]".to_string()];
        let cfg = ExperimentConfig::resolve(Some("best-svr"), None, &sets, Some("42")).unwrap();
        assert_eq!(cfg.svr.c, 1.0);
        assert_eq!(cfg.tokenizer, TokenizerKind::Whitespace);
        assert_eq!(cfg.ngram_orders, [1].into());
        assert_eq!(cfg.seed, 42);
        assert!(ExperimentConfig::resolve(None, None, &["svr.bogus=1".into()], None).is_err());
        assert!(ExperimentConfig::resolve(None, None, &["noequals".into()], None).is_err());
        assert!(ExperimentConfig::resolve(None, None, &[], Some("x")).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::preset("elstm").unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(cfg.fingerprint(), cfg.clone().fingerprint());
        assert_ne!(cfg.fingerprint(), ExperimentConfig::default().fingerprint());
    }

    #[test]
    fn invalid_configs() {
        let bad = |sets: &[&str]| {
            let sets: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
            ExperimentConfig::default().with_overrides(&sets).is_err()
        };
        assert!(bad(&["ngram_orders=[3]"]));
        assert!(bad(&["ngram_orders=[]"]));
        assert!(bad(&["replacements.positive_n=0"]));
        assert!(bad(&["model_kind=elstm"]));
        assert!(bad(&["cv.k=1"]));
        assert!(bad(&["svr.C=0"]));
        assert!(!bad(&["replacements.groups=[]", "replacements.positive_n=0"]));
    }

    #[test]
    fn default_grid_size() {
        let points = CvGrid::default().expand(&ExperimentConfig::default()).unwrap();
        // 3 C x 3 eps x 2 tokenizers x 3 n-gram sets x (off + 3 N) x 2 aspect
        assert_eq!(points.len(), 3 * 3 * 2 * 3 * 4 * 2);
        let labels: BTreeSet<_> = points.iter().map(|p| p.label.clone()).collect();
        assert_eq!(labels.len(), points.len());
    }

    #[test]
    fn small_grid() {
        let grid: CvGrid = toml::from_str(
            "C = [0.1, 1.0]\nepsilon = [0.01]\ntokenizers = [\"rules\"]\nngram_orders = [[1]]\nreplacements = [false]\naspect_features = [true]",
        )
        .unwrap();
        let points = grid.expand(&ExperimentConfig::default()).unwrap();
        assert_eq!(points.len(), 2);
        assert!(points.iter().all(|p| p.config.replacements.groups.is_empty()));
        assert_eq!(points[1].config.svr.c, 1.0);
    }
}
