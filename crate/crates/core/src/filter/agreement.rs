//! Chance-corrected inter-rater agreement for binary label tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Agreement over an items x raters binary table.
///
/// `ac1` is the chance-corrected statistic `(pa - pe) / (1 - pe)` with the
/// chance term `pe = 2*pi*(1-pi)` built from the mean per-item positive
/// share `pi`, which keeps the estimate stable under class imbalance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub n_items: usize,
    pub n_raters: usize,
    pub percent_agreement: f64,
    pub chance_agreement: f64,
    pub ac1: f64,
}

/// Compute Gwet's AC1 over a binary label table.
///
/// `labels[item][rater]` is `None` when that rater skipped the item. Items
/// with fewer than two labels are excluded when `allow_missing` is set and
/// rejected otherwise.
pub fn gwet_ac1(labels: &[Vec<Option<bool>>], allow_missing: bool) -> Result<AgreementReport> {
    if labels.is_empty() {
        return Err(Error::Agreement("empty label table".into()));
    }
    let n_raters = labels.iter().map(Vec::len).max().unwrap_or(0);

    let mut pa_sum = 0.0;
    let mut pi_sum = 0.0;
    let mut usable = 0usize;
    for (idx, item) in labels.iter().enumerate() {
        let votes: Vec<bool> = item.iter().flatten().copied().collect();
        let raters = votes.len();
        if raters < 2 {
            if allow_missing {
                continue;
            }
            return Err(Error::Agreement(format!(
                "item {} has {} labels; need at least 2",
                idx + 1,
                raters
            )));
        }
        let yes = votes.iter().filter(|v| **v).count();
        let no = raters - yes;
        let pairs_agreeing = yes * yes.saturating_sub(1) + no * no.saturating_sub(1);
        pa_sum += pairs_agreeing as f64 / (raters * (raters - 1)) as f64;
        pi_sum += yes as f64 / raters as f64;
        usable += 1;
    }
    if usable == 0 {
        return Err(Error::Agreement("no item carries at least 2 labels".into()));
    }

    let pa = pa_sum / usable as f64;
    let pi = pi_sum / usable as f64;
    let pe = 2.0 * pi * (1.0 - pi);
    if (1.0 - pe).abs() < f64::EPSILON {
        return Err(Error::Agreement("degenerate chance agreement of 1".into()));
    }
    Ok(AgreementReport {
        n_items: usable,
        n_raters,
        percent_agreement: pa,
        chance_agreement: pe,
        ac1: (pa - pe) / (1.0 - pe),
    })
}

/// Per-item majority vote; `None` marks ties, which ground-truth
/// construction excludes and reports rather than guessing.
pub fn majority_vote_labels(labels: &[Vec<Option<bool>>]) -> Vec<Option<bool>> {
    labels
        .iter()
        .map(|item| {
            let votes: Vec<bool> = item.iter().flatten().copied().collect();
            let yes = votes.iter().filter(|v| **v).count();
            let no = votes.len() - yes;
            match yes.cmp(&no) {
                std::cmp::Ordering::Greater => Some(true),
                std::cmp::Ordering::Less => Some(false),
                std::cmp::Ordering::Equal => None,
            }
        })
        .collect()
}

/// Parse an items x raters CSV (header row of rater ids) into a label table.
/// Accepted cell values: yes/no, y/n, true/false, 1/0; empty means missing.
pub fn parse_label_matrix(text: &str) -> Result<(Vec<String>, Vec<Vec<Option<bool>>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let raters: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut matrix = Vec::new();
    for row in reader.records() {
        let row = row?;
        let mut item = Vec::with_capacity(raters.len());
        for cell in row.iter() {
            let cell = cell.trim().to_ascii_lowercase();
            let label = match cell.as_str() {
                "" => None,
                "yes" | "y" | "true" | "1" => Some(true),
                "no" | "n" | "false" | "0" => Some(false),
                other => {
                    return Err(Error::Agreement(format!("unrecognized label {other:?}")));
                }
            };
            item.push(label);
        }
        while item.len() < raters.len() {
            item.push(None);
        }
        matrix.push(item);
    }
    Ok((raters, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[bool]]) -> Vec<Vec<Option<bool>>> {
        rows.iter()
            .map(|row| row.iter().map(|v| Some(*v)).collect())
            .collect()
    }

    #[test]
    fn unanimous_yes_table_scores_one() {
        let report = gwet_ac1(&table(&[&[true, true], &[true, true]]), false).unwrap();
        assert_eq!(report.percent_agreement, 1.0);
        assert_eq!(report.chance_agreement, 0.0);
        assert_eq!(report.ac1, 1.0);
    }

    #[test]
    fn worked_two_rater_four_item_table() {
        // Rater 1: y y n n; rater 2: y n n n.
        let labels = table(&[&[true, true], &[true, false], &[false, false], &[false, false]]);
        let report = gwet_ac1(&labels, false).unwrap();
        assert!((report.percent_agreement - 0.75).abs() < 1e-12);
        assert!((report.chance_agreement - 0.46875).abs() < 1e-12);
        assert!((report.ac1 - 0.5294117647058824).abs() < 1e-10);
    }

    #[test]
    fn full_disagreement_two_items_scores_minus_one() {
        let labels = table(&[&[true, false], &[false, true]]);
        let report = gwet_ac1(&labels, false).unwrap();
        assert_eq!(report.percent_agreement, 0.0);
        assert!((report.chance_agreement - 0.5).abs() < 1e-12);
        assert!((report.ac1 - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn short_items_excluded_only_when_allowed() {
        let labels = vec![
            vec![Some(true), Some(true)],
            vec![Some(true), None],
        ];
        assert!(gwet_ac1(&labels, false).is_err());
        let report = gwet_ac1(&labels, true).unwrap();
        assert_eq!(report.n_items, 1);
        assert_eq!(report.ac1, 1.0);
    }

    #[test]
    fn majority_vote_marks_ties() {
        let labels = vec![
            vec![Some(true), Some(true), Some(false)],
            vec![Some(true), Some(false)],
        ];
        assert_eq!(majority_vote_labels(&labels), vec![Some(true), None]);
    }

    #[test]
    fn csv_matrix_parses() {
        let text = "r1,r2,r3\nyes,no,yes\n1,0,\n";
        let (raters, matrix) = parse_label_matrix(text).unwrap();
        assert_eq!(raters, vec!["r1", "r2", "r3"]);
        assert_eq!(
            matrix,
            vec![
                vec![Some(true), Some(false), Some(true)],
                vec![Some(true), Some(false), None],
            ]
        );
    }
}
