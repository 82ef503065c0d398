//! Per-seed result rows, their CSV form and the JSON summary built from them.

use std::collections::HashMap;

use ctdne::evaluation::mean_std;
use ctdne::{BiasKind, EdgeOperator, LinkPredictionReport};
use serde::{Deserialize, Serialize};

pub const RESULTS_HEADER: &str = "dataset,variant,operator,seed,auc";

/// How the best of a full start × neighbor sweep is chosen.
pub const BEST_VARIANT_NOTE: &str =
    "approximates learned variant selection by picking the highest mean AUC of the 3x3 sweep";

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub variant: String,
    pub operator: EdgeOperator,
    pub seed: u64,
    pub auc: f64,
}

pub fn ctdne_variant(fs: BiasKind, fg: BiasKind) -> String {
    format!("ctdne-{}-{}", fs.short_name(), fg.short_name())
}

pub const STATIC_VARIANT: &str = "static";

pub fn rows_from_report(dataset: &str, variant: &str, report: &LinkPredictionReport) -> Vec<ResultRow> {
    report
        .per_seed
        .iter()
        .map(|r| ResultRow {
            dataset: dataset.to_owned(),
            variant: variant.to_owned(),
            operator: r.operator,
            seed: r.seed,
            auc: r.auc,
        })
        .collect()
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.dataset, r.variant, r.operator, r.seed, r.auc));
    }
    out
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == RESULTS_HEADER => {}
        other => return Err(format!("expected header {RESULTS_HEADER:?}, found {other:?}")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        let [dataset, variant, operator, seed, auc] = fields[..] else {
            return Err(format!("line {lineno}: expected 5 fields, found {}", fields.len()));
        };
        rows.push(ResultRow {
            dataset: dataset.to_owned(),
            variant: variant.to_owned(),
            operator: operator.parse().map_err(|e| format!("line {lineno}: {e}"))?,
            seed: seed.parse().map_err(|_| format!("line {lineno}: bad seed {seed:?}"))?,
            auc: auc.parse().map_err(|_| format!("line {lineno}: bad auc {auc:?}"))?,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub dataset: String,
    pub variant: String,
    pub mean_auc: f64,
    pub std_auc: f64,
    /// Most frequent winning operator; ties go to the earlier operator.
    pub operator: String,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestVariant {
    pub dataset: String,
    pub variant: String,
    pub mean_auc: f64,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub variants: Vec<VariantSummary>,
    /// Present for each dataset whose rows cover all nine temporal variants.
    pub best: Vec<BestVariant>,
}

impl Summary {
    /// Groups rows by (dataset, variant) in order of first appearance.
    pub fn from_rows(rows: &[ResultRow]) -> Self {
        let mut order: Vec<(String, String)> = Vec::new();
        let mut groups: HashMap<(String, String), Vec<&ResultRow>> = HashMap::new();
        for r in rows {
            let key = (r.dataset.clone(), r.variant.clone());
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(r);
        }
        let variants: Vec<VariantSummary> = order
            .iter()
            .map(|key| {
                let group = &groups[key];
                let aucs: Vec<f64> = group.iter().map(|r| r.auc).collect();
                let (mean_auc, std_auc) = mean_std(&aucs);
                let mut votes = [0usize; 4];
                for r in group {
                    votes[EdgeOperator::ALL.iter().position(|&op| op == r.operator).expect("known operator")] += 1;
                }
                let top = (0..4).fold(0, |best, i| if votes[i] > votes[best] { i } else { best });
                VariantSummary {
                    dataset: key.0.clone(),
                    variant: key.1.clone(),
                    mean_auc,
                    std_auc,
                    operator: EdgeOperator::ALL[top].to_string(),
                    seeds: group.iter().map(|r| r.seed).collect(),
                }
            })
            .collect();

        let sweep: Vec<String> = BiasKind::ALL
            .iter()
            .flat_map(|&fs| BiasKind::ALL.iter().map(move |&fg| ctdne_variant(fs, fg)))
            .collect();
        let mut datasets: Vec<&str> = Vec::new();
        for v in &variants {
            if !datasets.contains(&v.dataset.as_str()) {
                datasets.push(&v.dataset);
            }
        }
        let best = datasets
            .into_iter()
            .filter_map(|d| {
                let candidates: Vec<&VariantSummary> =
                    variants.iter().filter(|v| v.dataset == d && sweep.contains(&v.variant)).collect();
                if candidates.len() < sweep.len() {
                    return None;
                }
                let top = candidates
                    .into_iter()
                    .reduce(|a, b| if b.mean_auc > a.mean_auc { b } else { a })?;
                Some(BestVariant {
                    dataset: d.to_owned(),
                    variant: top.variant.clone(),
                    mean_auc: top.mean_auc,
                    note: BEST_VARIANT_NOTE.to_owned(),
                })
            })
            .collect();
        Summary { variants, best }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Rebuilds the summary from a results CSV.
pub fn summary_from_results_csv(text: &str) -> Result<Summary, String> {
    parse_results_csv(text).map(|rows| Summary::from_rows(&rows))
}

pub const SNAPSHOT_HEADER: &str = "dataset,T,dtdne_auc,ctdne_auc,gain_pct";

/// Relative AUC gain of the continuous-time model over the snapshot model, in percent.
pub fn gain_pct(dtdne: f64, ctdne: f64) -> f64 {
    (ctdne - dtdne) / dtdne * 100.0
}

pub fn snapshot_csv(dataset: &str, t: usize, dtdne: f64, ctdne: f64) -> String {
    format!("{SNAPSHOT_HEADER}\n{dataset},{t},{dtdne},{ctdne},{}\n", gain_pct(dtdne, ctdne))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(variant: &str, seed: u64, auc: f64, op: EdgeOperator) -> ResultRow {
        ResultRow {
            dataset: "toy".into(),
            variant: variant.into(),
            operator: op,
            seed,
            auc,
        }
    }

    #[test]
    fn csv_round_trip_reproduces_summary() {
        let mut rows = Vec::new();
        for (k, &fs) in BiasKind::ALL.iter().enumerate() {
            for (j, &fg) in BiasKind::ALL.iter().enumerate() {
                for seed in 0..3 {
                    let auc = 0.5 + 0.01 * (k * 3 + j) as f64 + 1.0 / (seed as f64 + 7.0);
                    rows.push(row(&ctdne_variant(fs, fg), seed, auc, EdgeOperator::ALL[seed as usize % 4]));
                }
            }
        }
        let csv = results_csv(&rows);
        assert_eq!(parse_results_csv(&csv).unwrap(), rows);
        let summary = Summary::from_rows(&rows);
        assert_eq!(summary_from_results_csv(&csv).unwrap(), summary);
        assert_eq!(summary.variants.len(), 9);
        assert_eq!(summary.best[0].variant, "ctdne-exp-exp");
        let json: Summary = serde_json::from_str(&summary.to_json()).unwrap();
        assert_eq!(json, summary);
    }

    #[test]
    fn partial_sweep_has_no_best() {
        let rows = vec![row("ctdne-unif-unif", 0, 0.7, EdgeOperator::Mean), row("static", 0, 0.6, EdgeOperator::Mean)];
        let summary = Summary::from_rows(&rows);
        assert!(summary.best.is_empty());
        assert_eq!(summary.variants[0].std_auc, 0.0);
    }

    #[test]
    fn gain_matches_columns() {
        let csv = snapshot_csv("ia-contact", 4, 0.843, 0.913);
        let fields: Vec<f64> = csv.lines().nth(1).unwrap().split(',').skip(2).map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields[2], (fields[1] - fields[0]) / fields[0] * 100.0);
        assert!((fields[2] - 8.30).abs() < 0.01);
        assert!(parse_results_csv("nope\n").is_err());
    }
}
