//! Seeded stratified sampling with per-domain floors.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::sha256_hex;

use super::PreferenceRecord;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleConfig {
    /// Target count per stratum; the stratum key is the source id string.
    pub target_counts: BTreeMap<String, usize>,
    /// Floor of records per (stratum, domain) where availability allows.
    #[serde(default)]
    pub min_per_domain: usize,
    pub seed: u64,
    /// Declared total to reconcile against; any mismatch with the sum of
    /// targets or with the realized selection is flagged, not guessed away.
    #[serde(default)]
    pub expected_total: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StratumOutcome {
    pub target: usize,
    pub available: usize,
    pub taken: usize,
    pub shortfall: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleReport {
    pub requested_total: usize,
    pub selected_total: usize,
    pub expected_total: Option<usize>,
    /// Set when the declared expected total disagrees with the sum of the
    /// per-stratum targets or with the realized selection.
    pub expected_total_mismatch: bool,
    pub per_stratum: BTreeMap<String, StratumOutcome>,
    /// Domains that ended below the per-domain floor because availability
    /// ran out, with the count actually taken.
    pub domains_below_min: BTreeMap<String, usize>,
}

/// Seed a generator from (seed, stratum) so each stratum shuffles
/// independently and reproducibly.
pub(super) fn stratum_rng(seed: u64, stratum: &str) -> ChaCha8Rng {
    let digest = sha256_hex(&[&seed.to_string(), stratum]);
    let mut key = [0u8; 32];
    key.copy_from_slice(&hex::decode(&digest).expect("sha256 hex decodes")[..32]);
    ChaCha8Rng::from_seed(key)
}

/// Draw a deterministic stratified sample.
///
/// Within each stratum members are shuffled with a seed-derived generator;
/// a first pass gives every domain up to `min_per_domain` members
/// (round-robin over domains so a tight target is spread rather than
/// swallowed by the first domain), a second pass fills the remaining quota
/// in shuffle order. Strata with fewer members than their target yield
/// everything they have and report the shortfall.
pub fn stratified_sample(
    records: &[PreferenceRecord],
    config: &SampleConfig,
) -> Result<(Vec<PreferenceRecord>, SampleReport)> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to sample".into()));
    }
    let mut by_stratum: BTreeMap<&str, Vec<&PreferenceRecord>> = BTreeMap::new();
    for record in records {
        by_stratum
            .entry(record.source_id.as_str())
            .or_default()
            .push(record);
    }

    let mut selected: Vec<PreferenceRecord> = Vec::new();
    let mut per_stratum = BTreeMap::new();
    let mut domains_below_min = BTreeMap::new();

    for (stratum, target) in &config.target_counts {
        let mut members: Vec<&PreferenceRecord> = by_stratum
            .get(stratum.as_str())
            .cloned()
            .unwrap_or_default();
        members.sort_by(|a, b| a.record_id.cmp(&b.record_id));
        let mut rng = stratum_rng(config.seed, stratum);
        members.shuffle(&mut rng);

        let available = members.len();
        let quota = (*target).min(available);

        let mut domain_queues: BTreeMap<&str, Vec<&PreferenceRecord>> = BTreeMap::new();
        for member in &members {
            domain_queues
                .entry(member.domain.as_str())
                .or_default()
                .push(member);
        }
        // Queues hold members in shuffle order; pop from the front.
        for queue in domain_queues.values_mut() {
            queue.reverse();
        }

        let mut taken: Vec<&PreferenceRecord> = Vec::with_capacity(quota);
        let mut taken_ids: std::collections::HashSet<&str> = std::collections::HashSet::new();
        let mut domain_taken: BTreeMap<&str, usize> = BTreeMap::new();

        if config.min_per_domain > 0 {
            let mut progressed = true;
            while progressed && taken.len() < quota {
                progressed = false;
                for (domain, queue) in domain_queues.iter_mut() {
                    if taken.len() >= quota {
                        break;
                    }
                    let count = domain_taken.get(domain).copied().unwrap_or(0);
                    if count >= config.min_per_domain {
                        continue;
                    }
                    if let Some(member) = queue.pop() {
                        taken.push(member);
                        taken_ids.insert(member.record_id.as_str());
                        *domain_taken.entry(domain).or_insert(0) += 1;
                        progressed = true;
                    }
                }
            }
        }
        // Fill the remainder in global shuffle order.
        for member in &members {
            if taken.len() >= quota {
                break;
            }
            if !taken_ids.insert(member.record_id.as_str()) {
                continue;
            }
            taken.push(member);
            *domain_taken.entry(member.domain.as_str()).or_insert(0) += 1;
        }

        if config.min_per_domain > 0 {
            let mut domain_avail: BTreeMap<&str, usize> = BTreeMap::new();
            for member in &members {
                *domain_avail.entry(member.domain.as_str()).or_insert(0) += 1;
            }
            for (domain, avail) in &domain_avail {
                let count = domain_taken.get(domain).copied().unwrap_or(0);
                if count < config.min_per_domain && count == *avail {
                    domains_below_min.insert(format!("{stratum}/{domain}"), count);
                }
            }
        }

        per_stratum.insert(
            stratum.clone(),
            StratumOutcome {
                target: *target,
                available,
                taken: taken.len(),
                shortfall: target.saturating_sub(taken.len()),
            },
        );
        selected.extend(taken.into_iter().cloned());
    }

    selected.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    let requested_total: usize = config.target_counts.values().sum();
    let selected_total = selected.len();
    let expected_total_mismatch = config
        .expected_total
        .map(|expected| expected != requested_total || expected != selected_total)
        .unwrap_or(false);
    let report = SampleReport {
        requested_total,
        selected_total,
        expected_total: config.expected_total,
        expected_total_mismatch,
        per_stratum,
        domains_below_min,
    };
    Ok((selected, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{AnnotatorKind, SourceId};
    use crate::types::Choice;

    fn make_records(n: usize, source: SourceId, domain_cycle: usize) -> Vec<PreferenceRecord> {
        (0..n)
            .map(|i| PreferenceRecord {
                record_id: format!("{}{:012}", source.as_str().len(), i),
                question: format!("question {i}"),
                answer_a: "first answer".into(),
                answer_b: "second answer".into(),
                human_choice: if i % 2 == 0 { Choice::A } else { Choice::B },
                source_id: source,
                domain: format!("domain{}", i % domain_cycle),
                annotator_kind: AnnotatorKind::Crowd,
                is_lfq: None,
            })
            .collect()
    }

    #[test]
    fn same_seed_selects_identically() {
        let records = make_records(1000, SourceId::ChatbotArena, 5);
        let config = SampleConfig {
            target_counts: BTreeMap::from([("chatbot_arena".to_string(), 100)]),
            min_per_domain: 0,
            seed: 7,
            expected_total: None,
        };
        let (first, _) = stratified_sample(&records, &config).unwrap();
        let (second, _) = stratified_sample(&records, &config).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.len(), 100);
    }

    #[test]
    fn different_seed_selects_differently() {
        let records = make_records(1000, SourceId::ChatbotArena, 5);
        let base = SampleConfig {
            target_counts: BTreeMap::from([("chatbot_arena".to_string(), 100)]),
            min_per_domain: 0,
            seed: 7,
            expected_total: None,
        };
        let other = SampleConfig { seed: 8, ..base.clone() };
        let (first, _) = stratified_sample(&records, &base).unwrap();
        let (second, _) = stratified_sample(&records, &other).unwrap();
        assert_ne!(first, second);
    }

    #[test]
    fn shortfall_takes_all_and_reports() {
        let records = make_records(12, SourceId::LfqaEval, 2);
        let config = SampleConfig {
            target_counts: BTreeMap::from([("lfqa_eval".to_string(), 20)]),
            min_per_domain: 0,
            seed: 1,
            expected_total: None,
        };
        let (selected, report) = stratified_sample(&records, &config).unwrap();
        assert_eq!(selected.len(), 12);
        let outcome = &report.per_stratum["lfqa_eval"];
        assert_eq!(outcome.taken, 12);
        assert_eq!(outcome.shortfall, 8);
    }

    #[test]
    fn reference_configuration_flags_total_mismatch() {
        let mut records = make_records(800, SourceId::ChatbotArena, 10);
        records.extend(make_records(800, SourceId::LfqaEval, 10));
        records.extend(make_records(2100, SourceId::Shp2Reddit, 30));
        records.extend(make_records(1600, SourceId::Shp2Stackexchange, 20));
        let config = SampleConfig {
            target_counts: BTreeMap::from([
                ("chatbot_arena".to_string(), 750),
                ("lfqa_eval".to_string(), 750),
                ("shp2_reddit".to_string(), 2039),
                ("shp2_stackexchange".to_string(), 1536),
            ]),
            min_per_domain: 20,
            seed: 42,
            expected_total: Some(5074),
        };
        let (selected, report) = stratified_sample(&records, &config).unwrap();
        assert_eq!(selected.len(), 5075);
        assert_eq!(report.requested_total, 5075);
        assert!(report.expected_total_mismatch);
    }

    #[test]
    fn per_domain_floor_is_honored_where_available() {
        let records = make_records(100, SourceId::ChatbotArena, 4);
        let config = SampleConfig {
            target_counts: BTreeMap::from([("chatbot_arena".to_string(), 40)]),
            min_per_domain: 5,
            seed: 3,
            expected_total: None,
        };
        let (selected, _) = stratified_sample(&records, &config).unwrap();
        let mut per_domain: BTreeMap<&str, usize> = BTreeMap::new();
        for record in &selected {
            *per_domain.entry(record.domain.as_str()).or_insert(0) += 1;
        }
        for count in per_domain.values() {
            assert!(*count >= 5);
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        let config = SampleConfig {
            target_counts: BTreeMap::new(),
            min_per_domain: 0,
            seed: 0,
            expected_total: None,
        };
        assert!(stratified_sample(&[], &config).is_err());
    }
}
