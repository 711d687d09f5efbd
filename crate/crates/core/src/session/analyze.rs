//! Skip-reason analytics and the online/offline comparison table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::report::{SessionReport, SkipCounts};
use crate::metrics::percent;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SkipTable {
    /// `method -> activity -> counts`.
    pub rows: BTreeMap<String, BTreeMap<String, SkipCounts>>,
}

impl SkipTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn method_total(&self, method: &str) -> SkipCounts {
        let mut c = SkipCounts::default();
        for counts in self.rows.get(method).into_iter().flat_map(|m| m.values()) {
            c.merge(counts);
        }
        c
    }

    pub fn total(&self) -> SkipCounts {
        let mut c = SkipCounts::default();
        for m in self.rows.keys() {
            c.merge(&self.method_total(m));
        }
        c
    }

    pub fn redundant_share(&self) -> Option<f64> {
        self.total().redundant_share()
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<10} {:<10} {:>9} {:>10} {:>10}\n",
            "Method", "Activity", "Redundant", "Infeasible", "Irrelevant"
        );
        let line = |out: &mut String, m: &str, a: &str, c: &SkipCounts| {
            out.push_str(&format!(
                "{:<10} {:<10} {:>9} {:>10} {:>10}\n",
                m, a, c.redundant, c.infeasible, c.irrelevant
            ));
        };
        for (method, acts) in &self.rows {
            for (act, c) in acts {
                line(&mut out, method, act, c);
            }
            line(&mut out, method, "Total", &self.method_total(method));
        }
        let total = self.total();
        line(&mut out, "All", "Total", &total);
        match total.redundant_share() {
            Some(s) => out.push_str(&format!(
                "Redundant share: {}% ({}/{})\n",
                percent(s),
                total.redundant,
                total.total()
            )),
            None => out.push_str("Redundant share: n/a (no skips)\n"),
        }
        out
    }
}

/// Counts skip outcomes per method and activity.
pub fn analyze_skips<'a>(reports: impl IntoIterator<Item = &'a SessionReport>) -> SkipTable {
    let mut table = SkipTable::default();
    for r in reports {
        table
            .rows
            .entry(r.predictor.clone())
            .or_default()
            .entry(r.script_id.clone())
            .or_default()
            .merge(&r.skip_breakdown);
    }
    table
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub sessions: usize,
    pub success_rate: f64,
    pub online_miou: f64,
    pub offline_miou: Option<f64>,
}

/// Per-method success rate and mean online mIoU, with the offline rerun
/// mIoU when available (`method -> mean`).
pub fn compare_online_offline<'a>(
    reports: impl IntoIterator<Item = &'a SessionReport>,
    offline: &BTreeMap<String, f64>,
) -> Vec<ComparisonRow> {
    let mut by_method: BTreeMap<String, Vec<&SessionReport>> = BTreeMap::new();
    for r in reports {
        by_method.entry(r.predictor.clone()).or_default().push(r);
    }
    by_method
        .into_iter()
        .map(|(method, rs)| {
            let n = rs.len() as f64;
            ComparisonRow {
                sessions: rs.len(),
                success_rate: rs.iter().filter(|r| r.success).count() as f64 / n,
                online_miou: rs.iter().map(|r| r.online_miou).sum::<f64>() / n,
                offline_miou: offline.get(&method).copied(),
                method,
            }
        })
        .collect()
}

pub fn render_comparison(rows: &[ComparisonRow]) -> String {
    let mut out = format!(
        "{:<10} {:>8} {:>12} {:>12} {:>13}\n",
        "Method", "Sessions", "Success (%)", "Online mIoU", "Offline mIoU"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<10} {:>8} {:>12} {:>12} {:>13}\n",
            r.method,
            r.sessions,
            percent(r.success_rate),
            percent(r.online_miou),
            r.offline_miou.map_or_else(|| "-".to_string(), percent)
        ));
    }
    out
}
