//! Deterministic stratified train/dev/test splits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::sample::stratum_rng;
use super::PreferenceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, dev: f64, test: f64) -> Result<Self> {
        let ratios = SplitRatios { train, dev, test };
        ratios.validate()?;
        Ok(ratios)
    }

    pub fn validate(&self) -> Result<()> {
        for r in [self.train, self.dev, self.test] {
            if !(r > 0.0) {
                return Err(Error::InvalidConfig(format!("ratio must be positive: {r}")));
            }
        }
        let sum = self.train + self.dev + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.dev, self.test]
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.70,
            dev: 0.15,
            test: 0.15,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
    pub ratios: SplitRatios,
    pub strata_keys: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SplitReport {
    /// Strata smaller than 3 records, assigned wholly to train.
    pub degenerate_strata: BTreeMap<String, usize>,
    pub per_stratum_sizes: BTreeMap<String, [usize; 3]>,
}

/// Allocate `n` slots to the three splits by largest remainder, which keeps
/// every split within one record of its exact quota. Fractional-part ties
/// break in split order (train, dev, test).
fn largest_remainder(n: usize, ratios: &SplitRatios) -> [usize; 3] {
    let quotas = ratios.as_array().map(|r| r * n as f64);
    let mut alloc = quotas.map(|q| q.floor() as usize);
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..(n - assigned) {
        alloc[order[i % 3]] += 1;
    }
    alloc
}

fn stratum_key(record: &PreferenceRecord, strata_keys: &[String]) -> Result<String> {
    let mut parts = Vec::with_capacity(strata_keys.len());
    for key in strata_keys {
        let value = match key.as_str() {
            "source" | "source_id" => record.source_id.as_str().to_string(),
            "domain" => record.domain.clone(),
            "annotator" | "annotator_kind" => record.annotator_kind.as_str().to_string(),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown stratification key {other:?} (expected source, domain, annotator)"
                )))
            }
        };
        parts.push(value);
    }
    Ok(parts.join("\u{1f}"))
}

/// Partition records into train/dev/test, stratified on the given keys.
///
/// Each stratum is shuffled with a seed-derived generator and cut by
/// largest-remainder allocation. Strata with fewer than 3 records go wholly
/// to train and are reported.
pub fn split(
    records: &[PreferenceRecord],
    ratios: SplitRatios,
    strata_keys: &[String],
    seed: u64,
) -> Result<(DatasetSplit, SplitReport)> {
    ratios.validate()?;
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to split".into()));
    }
    let mut by_stratum: BTreeMap<String, Vec<&PreferenceRecord>> = BTreeMap::new();
    for record in records {
        by_stratum
            .entry(stratum_key(record, strata_keys)?)
            .or_default()
            .push(record);
    }

    let mut result = DatasetSplit {
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
        ratios,
        strata_keys: strata_keys.to_vec(),
    };
    let mut report = SplitReport::default();

    for (stratum, mut members) in by_stratum {
        members.sort_by(|a, b| a.record_id.cmp(&b.record_id));
        if members.len() < 3 {
            report
                .degenerate_strata
                .insert(stratum.clone(), members.len());
            report
                .per_stratum_sizes
                .insert(stratum, [members.len(), 0, 0]);
            result
                .train
                .extend(members.iter().map(|r| r.record_id.clone()));
            continue;
        }
        let mut rng = stratum_rng(seed, &stratum);
        members.shuffle(&mut rng);
        let alloc = largest_remainder(members.len(), &ratios);
        report.per_stratum_sizes.insert(stratum, alloc);
        let (train_part, rest) = members.split_at(alloc[0]);
        let (dev_part, test_part) = rest.split_at(alloc[1]);
        result
            .train
            .extend(train_part.iter().map(|r| r.record_id.clone()));
        result
            .dev
            .extend(dev_part.iter().map(|r| r.record_id.clone()));
        result
            .test
            .extend(test_part.iter().map(|r| r.record_id.clone()));
    }

    result.train.sort();
    result.dev.sort();
    result.test.sort();
    Ok((result, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{AnnotatorKind, SourceId};
    use crate::types::Choice;
    use std::collections::HashSet;

    fn make_records(n: usize, domains: usize) -> Vec<PreferenceRecord> {
        (0..n)
            .map(|i| PreferenceRecord {
                record_id: format!("{i:016}"),
                question: format!("question {i}"),
                answer_a: "first".into(),
                answer_b: "second".into(),
                human_choice: Choice::A,
                source_id: SourceId::Custom,
                domain: format!("d{}", i % domains.max(1)),
                annotator_kind: AnnotatorKind::Crowd,
                is_lfq: None,
            })
            .collect()
    }

    #[test]
    fn exact_division_single_stratum() {
        let records = make_records(100, 1);
        let (split, _) =
            split(&records, SplitRatios::default(), &["domain".into()], 11).unwrap();
        assert_eq!(split.train.len(), 70);
        assert_eq!(split.dev.len(), 15);
        assert_eq!(split.test.len(), 15);
    }

    #[test]
    fn largest_remainder_on_ten_records() {
        // Quotas (7.0, 1.5, 1.5): floors (7,1,1), one leftover goes to dev
        // because ties break in split order.
        assert_eq!(largest_remainder(10, &SplitRatios::default()), [7, 2, 1]);
    }

    #[test]
    fn degenerate_stratum_goes_to_train() {
        let mut records = make_records(100, 1);
        let mut tiny = make_records(2, 1);
        for (i, record) in tiny.iter_mut().enumerate() {
            record.record_id = format!("tiny{i:012}");
            record.domain = "rare".into();
        }
        records.extend(tiny);
        let (split, report) =
            split(&records, SplitRatios::default(), &["domain".into()], 11).unwrap();
        assert_eq!(report.degenerate_strata.get("rare"), Some(&2));
        assert!(split.train.iter().any(|id| id.starts_with("tiny")));
        assert_eq!(split.train.len() + split.dev.len() + split.test.len(), 102);
    }

    #[test]
    fn split_is_a_partition() {
        let records = make_records(137, 7);
        let (split, _) =
            split(&records, SplitRatios::default(), &["domain".into()], 5).unwrap();
        let mut all: Vec<&String> = split
            .train
            .iter()
            .chain(split.dev.iter())
            .chain(split.test.iter())
            .collect();
        assert_eq!(all.len(), records.len());
        let unique: HashSet<&&String> = all.iter().collect();
        assert_eq!(unique.len(), all.len());
        all.sort();
    }

    #[test]
    fn per_stratum_deviation_at_most_one() {
        let records = make_records(137, 7);
        let ratios = SplitRatios::default();
        let (split, _) = split(&records, ratios, &["domain".into()], 5).unwrap();
        let in_split = |id: &String, list: &[String]| list.binary_search(id).is_ok();
        for domain in 0..7 {
            let members: Vec<&PreferenceRecord> = records
                .iter()
                .filter(|r| r.domain == format!("d{domain}"))
                .collect();
            let n = members.len() as f64;
            for (ratio, list) in [
                (ratios.train, &split.train),
                (ratios.dev, &split.dev),
                (ratios.test, &split.test),
            ] {
                let count = members
                    .iter()
                    .filter(|r| in_split(&r.record_id, list))
                    .count() as f64;
                assert!(
                    (count - ratio * n).abs() <= 1.0 + 1e-9,
                    "stratum d{domain}: {count} vs {}",
                    ratio * n
                );
            }
        }
    }

    #[test]
    fn identical_seed_reproduces_identical_split() {
        let records = make_records(97, 3);
        let (a, _) = split(&records, SplitRatios::default(), &["domain".into()], 9).unwrap();
        let (b, _) = split(&records, SplitRatios::default(), &["domain".into()], 9).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn bad_ratios_rejected() {
        assert!(SplitRatios::new(0.5, 0.2, 0.2).is_err());
        assert!(SplitRatios::new(0.7, 0.15, -0.15).is_err());
        assert!(SplitRatios::new(0.70, 0.15, 0.15).is_ok());
    }
}
