//! Dataset ingestion, sentence grouping and fold splitting.
//!
//! A dataset is a list of `(id, company, sentence, sentiment?)` records. The
//! same headline may appear several times, once per company it mentions; the
//! evaluation and the cross-validation protocol both work on the resulting
//! sentence groups rather than on single instances.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::seed;

/// One (headline, company, gold score) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadlineInstance {
    pub id: String,
    pub company: String,
    pub sentence: String,
    #[serde(rename = "sentiment", skip_serializing_if = "Option::is_none", default)]
    pub gold_score: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StrictRecord {
    id: String,
    company: String,
    sentence: String,
    #[serde(default)]
    sentiment: Option<f64>,
}

#[derive(Deserialize)]
struct LenientRecord {
    id: String,
    company: String,
    sentence: String,
    #[serde(default)]
    sentiment: Option<f64>,
}

impl From<StrictRecord> for HeadlineInstance {
    fn from(r: StrictRecord) -> Self {
        HeadlineInstance {
            id: r.id,
            company: r.company,
            sentence: r.sentence,
            gold_score: r.sentiment,
        }
    }
}

impl From<LenientRecord> for HeadlineInstance {
    fn from(r: LenientRecord) -> Self {
        HeadlineInstance {
            id: r.id,
            company: r.company,
            sentence: r.sentence,
            gold_score: r.sentiment,
        }
    }
}

impl HeadlineInstance {
    pub fn new(
        id: impl Into<String>,
        company: impl Into<String>,
        sentence: impl Into<String>,
        gold_score: Option<f64>,
    ) -> Self {
        HeadlineInstance {
            id: id.into(),
            company: company.into(),
            sentence: sentence.into(),
            gold_score,
        }
    }

    /// Checks the record-level invariants. `record` is only used for error
    /// reporting.
    pub fn validate(&self, record: usize) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::EmptyField { record, field: "id" });
        }
        if self.sentence.trim().is_empty() {
            return Err(Error::EmptyField {
                record,
                field: "sentence",
            });
        }
        if self.company.trim().is_empty() {
            return Err(Error::EmptyField {
                record,
                field: "company",
            });
        }
        if let Some(score) = self.gold_score {
            if !(-1.0..=1.0).contains(&score) {
                return Err(Error::Range {
                    record,
                    value: score,
                });
            }
        }
        Ok(())
    }

    pub fn sentence_key(&self) -> String {
        canonical_sentence(&self.sentence)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    #[default]
    Json,
    Csv,
}

impl DatasetFormat {
    /// Picks the format from a file extension, defaulting to JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Ignore unknown JSON keys instead of rejecting them.
    pub lenient: bool,
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<HeadlineInstance>> {
    load_dataset_with(path, format, LoadOptions::default())
}

pub fn load_dataset_with(
    path: &Path,
    format: DatasetFormat,
    options: LoadOptions,
) -> Result<Vec<HeadlineInstance>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        DatasetFormat::Json => parse_json(&raw, options),
        DatasetFormat::Csv => parse_csv(&raw),
    }
}

pub fn parse_json(raw: &str, options: LoadOptions) -> Result<Vec<HeadlineInstance>> {
    let values: Vec<serde_json::Value> = serde_json::from_str(raw).map_err(|e| Error::Parse {
        record: 0,
        message: format!("expected a top-level JSON array: {e}"),
    })?;
    let mut out = Vec::with_capacity(values.len());
    for (record, value) in values.into_iter().enumerate() {
        let parsed: std::result::Result<HeadlineInstance, _> = if options.lenient {
            serde_json::from_value::<LenientRecord>(value).map(Into::into)
        } else {
            serde_json::from_value::<StrictRecord>(value).map(Into::into)
        };
        let instance = parsed.map_err(|e| Error::Parse {
            record,
            message: e.to_string(),
        })?;
        out.push(instance);
    }
    validate_all(&out)?;
    Ok(out)
}

pub fn parse_csv(raw: &str) -> Result<Vec<HeadlineInstance>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(raw.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse {
        record: 0,
        message: e.to_string(),
    })?;
    let expected = ["id", "company", "sentence", "sentiment"];
    if headers.len() != expected.len() || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse {
            record: 0,
            message: format!("header must be {}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for (record, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            record,
            message: e.to_string(),
        })?;
        let sentiment = match row.get(3).map(str::trim) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<f64>().map_err(|e| Error::Parse {
                record,
                message: format!("sentiment {s:?}: {e}"),
            })?),
        };
        out.push(HeadlineInstance {
            id: row[0].to_string(),
            company: row[1].to_string(),
            sentence: row[2].to_string(),
            gold_score: sentiment,
        });
    }
    validate_all(&out)?;
    Ok(out)
}

fn validate_all(instances: &[HeadlineInstance]) -> Result<()> {
    let mut seen = HashSet::with_capacity(instances.len());
    for (record, instance) in instances.iter().enumerate() {
        instance.validate(record)?;
        if !seen.insert(instance.id.as_str()) {
            return Err(Error::Parse {
                record,
                message: format!("duplicate id {:?}", instance.id),
            });
        }
    }
    Ok(())
}

pub fn to_json(instances: &[HeadlineInstance]) -> String {
    serde_json::to_string_pretty(instances).expect("instances serialize")
}

pub fn write_dataset_json(path: &Path, instances: &[HeadlineInstance]) -> Result<()> {
    fs::write(path, to_json(instances)).map_err(|e| Error::io(path, e))
}

/// NFC normalization plus whitespace trimming. Case is preserved.
pub fn canonical_sentence(sentence: &str) -> String {
    sentence.trim().nfc().collect()
}

/// All instances sharing one canonical sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceGroup {
    pub sentence_key: String,
    pub members: Vec<String>,
}

impl SentenceGroup {
    pub fn is_multi_aspect(&self) -> bool {
        self.members.len() > 1
    }
}

/// Groups instances by canonical sentence. Groups come out in order of first
/// appearance; members inside a group are sorted by id.
pub fn group_by_sentence(instances: &[HeadlineInstance]) -> Vec<SentenceGroup> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<SentenceGroup> = Vec::new();
    for instance in instances {
        let key = instance.sentence_key();
        let slot = *index.entry(key.clone()).or_insert_with(|| {
            groups.push(SentenceGroup {
                sentence_key: key,
                members: Vec::new(),
            });
            groups.len() - 1
        });
        groups[slot].members.push(instance.id.clone());
    }
    for group in &mut groups {
        group.members.sort();
    }
    groups
}

/// Maps every sentence group to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, sentence_key: &str) -> Option<usize> {
        self.assignment.get(sentence_key).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &fold in self.assignment.values() {
            sizes[fold] += 1;
        }
        sizes
    }

    /// Splits instances into (train, held-out) for `fold`. Instances whose
    /// sentence is not covered by the assignment land in neither side.
    pub fn split<'a>(
        &self,
        instances: &'a [HeadlineInstance],
        fold: usize,
    ) -> (Vec<&'a HeadlineInstance>, Vec<&'a HeadlineInstance>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for instance in instances {
            match self.fold_of(&instance.sentence_key()) {
                Some(f) if f == fold => test.push(instance),
                Some(_) => train.push(instance),
                None => {}
            }
        }
        (train, test)
    }
}

/// Seeded k-fold partition at the sentence-group level. Fold sizes differ by
/// at most one group.
pub fn kfold_split(groups: &[SentenceGroup], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: k,
        });
    }
    if groups.len() < k {
        return Err(Error::InsufficientData {
            needed: k,
            found: groups.len(),
        });
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut seed::rng(seed));
    let assignment = order
        .into_iter()
        .enumerate()
        .map(|(position, g)| (groups[g].sentence_key.clone(), position % k))
        .collect();
    Ok(FoldAssignment { k, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(id: &str, company: &str, sentence: &str) -> HeadlineInstance {
        HeadlineInstance::new(id, company, sentence, Some(0.0))
    }

    fn distinct_groups(n: usize) -> Vec<SentenceGroup> {
        let instances: Vec<_> = (0..n)
            .map(|i| inst(&i.to_string(), "X", &format!("headline {i}")))
            .collect();
        group_by_sentence(&instances)
    }

    #[test]
    fn json_record_maps_fields() {
        let raw = r#"[{"id":"3","company":"Glencore","sentence":"Glencore shares plunge","sentiment":-0.8}]"#;
        let got = parse_json(raw, LoadOptions::default()).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].id, "3");
        assert_eq!(got[0].company, "Glencore");
        assert_eq!(got[0].gold_score, Some(-0.8));
    }

    #[test]
    fn out_of_range_sentiment_is_rejected() {
        let raw = r#"[{"id":"1","company":"A","sentence":"s","sentiment":1.5}]"#;
        assert!(matches!(
            parse_json(raw, LoadOptions::default()),
            Err(Error::Range { record: 0, .. })
        ));
    }

    #[test]
    fn empty_fields_are_rejected() {
        let raw = r#"[{"id":"1","company":"A","sentence":"ok"},{"id":"2","company":" ","sentence":"s"}]"#;
        assert!(matches!(
            parse_json(raw, LoadOptions::default()),
            Err(Error::EmptyField {
                record: 1,
                field: "company"
            })
        ));
        let raw = r#"[{"id":"1","company":"A","sentence":"  \t"}]"#;
        assert!(matches!(
            parse_json(raw, LoadOptions::default()),
            Err(Error::EmptyField {
                field: "sentence",
                ..
            })
        ));
    }

    #[test]
    fn unknown_keys_strict_and_lenient() {
        let raw = r#"[{"id":"1","company":"A","sentence":"s","span":"x"}]"#;
        assert!(matches!(
            parse_json(raw, LoadOptions::default()),
            Err(Error::Parse { record: 0, .. })
        ));
        let got = parse_json(raw, LoadOptions { lenient: true }).unwrap();
        assert_eq!(got[0].gold_score, None);
    }

    #[test]
    fn malformed_record_reports_index() {
        let raw = r#"[{"id":"1","company":"A","sentence":"s"},{"id":2,"company":"A","sentence":"s"}]"#;
        assert!(matches!(
            parse_json(raw, LoadOptions::default()),
            Err(Error::Parse { record: 1, .. })
        ));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let raw = r#"[{"id":"1","company":"A","sentence":"s"},{"id":"1","company":"B","sentence":"s"}]"#;
        assert!(parse_json(raw, LoadOptions::default()).is_err());
    }

    #[test]
    fn csv_with_quoting_and_missing_sentiment() {
        let raw = "id,company,sentence,sentiment\n1,BP,\"BP, Shell rise\",0.4\n2,Shell,\"BP, Shell rise\",\n";
        let got = parse_csv(raw).unwrap();
        assert_eq!(got[0].sentence, "BP, Shell rise");
        assert_eq!(got[0].gold_score, Some(0.4));
        assert_eq!(got[1].gold_score, None);
        assert!(parse_csv("id,sentence\n1,x\n").is_err());
    }

    #[test]
    fn shared_sentence_forms_one_group() {
        let raw = r#"[{"id":"b","company":"BP","sentence":"BP and Shell rise","sentiment":0.3},
                      {"id":"a","company":"Shell","sentence":"BP and Shell rise","sentiment":0.2}]"#;
        let instances = parse_json(raw, LoadOptions::default()).unwrap();
        assert_eq!(instances.len(), 2);
        // oracle: partition by exact string equality
        let distinct: HashSet<_> = instances.iter().map(|i| i.sentence.as_str()).collect();
        let groups = group_by_sentence(&instances);
        assert_eq!(groups.len(), distinct.len());
        assert_eq!(groups[0].members, vec!["a", "b"]);
    }

    #[test]
    fn grouping_shapes() {
        let three = [inst("1", "A", "x"), inst("2", "B", "y"), inst("3", "C", "x")];
        let mut sizes: Vec<_> = group_by_sentence(&three)
            .iter()
            .map(|g| g.members.len())
            .collect();
        sizes.sort();
        assert_eq!(sizes, vec![1, 2]);
        assert!(group_by_sentence(&[]).is_empty());
        assert_eq!(distinct_groups(5).len(), 5);
    }

    #[test]
    fn grouping_key_is_nfc_trimmed_and_case_sensitive() {
        let composed = "Nestl\u{e9} rises";
        let decomposed = "  Nestle\u{301} rises ";
        let items = [
            inst("1", "A", composed),
            inst("2", "B", decomposed),
            inst("3", "C", "NESTL\u{c9} RISES"),
        ];
        let groups = group_by_sentence(&items);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].members, vec!["1", "2"]);
    }

    #[test]
    fn kfold_balanced_and_deterministic() {
        let groups = distinct_groups(10);
        let a = kfold_split(&groups, 5, 7).unwrap();
        assert_eq!(a.fold_sizes(), vec![2; 5]);
        assert_eq!(a, kfold_split(&groups, 5, 7).unwrap());

        let mut sizes = kfold_split(&distinct_groups(11), 5, 7).unwrap().fold_sizes();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![3, 2, 2, 2, 2]);
    }

    #[test]
    fn kfold_rejects_too_few_groups() {
        assert!(matches!(
            kfold_split(&distinct_groups(3), 5, 1),
            Err(Error::InsufficientData { .. })
        ));
        assert!(kfold_split(&distinct_groups(3), 1, 1).is_err());
    }

    #[test]
    fn split_keeps_groups_atomic() {
        let items = [
            inst("1", "A", "x"),
            inst("2", "B", "x"),
            inst("3", "C", "y"),
            inst("4", "D", "z"),
        ];
        let folds = kfold_split(&group_by_sentence(&items), 2, 3).unwrap();
        for fold in 0..2 {
            let (train, test) = folds.split(&items, fold);
            assert_eq!(train.len() + test.len(), items.len());
            let in_test: HashSet<_> = test.iter().map(|i| i.sentence.as_str()).collect();
            assert!(train.iter().all(|i| !in_test.contains(i.sentence.as_str())));
        }
    }
}
